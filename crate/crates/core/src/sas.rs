//! Self-augmentation selection: ask the model which augmentation most
//! disrupts the query, then parse its `Reason:` / `Choice:` answer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentationKind;
use crate::backend::Backend;
use crate::error::BackendError;

const FULL: &str = include_str!("../assets/prompts/sas_v1_full.txt");
const NO_REASONING: &str = include_str!("../assets/prompts/sas_v1_no_reasoning.txt");
const NO_ICL: &str = include_str!("../assets/prompts/sas_v1_no_icl.txt");
const MINIMAL: &str = include_str!("../assets/prompts/sas_v1_minimal.txt");

/// Reasoning-quality judge prompt. Shipped for reference; nothing here
/// renders or scores it.
pub const JUDGE_PROMPT: &str = include_str!("../assets/prompts/judge_v1.txt");

pub const TEMPLATE_VERSION: &str = "v1";
const QUERY_SLOT: &str = "{text}";

pub const DEFAULT_FALLBACK: AugmentationKind = AugmentationKind::Noise;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateId {
    Full,
    NoReasoning,
    NoIcl,
    Minimal,
}

impl TemplateId {
    pub const ALL: [TemplateId; 4] = [
        TemplateId::Full,
        TemplateId::NoReasoning,
        TemplateId::NoIcl,
        TemplateId::Minimal,
    ];

    pub fn template(self) -> &'static str {
        match self {
            TemplateId::Full => FULL,
            TemplateId::NoReasoning => NO_REASONING,
            TemplateId::NoIcl => NO_ICL,
            TemplateId::Minimal => MINIMAL,
        }
    }

    /// Generation budget for the selection pass.
    pub fn max_tokens(self) -> usize {
        match self {
            TemplateId::Full | TemplateId::NoIcl => 256,
            TemplateId::NoReasoning | TemplateId::Minimal => 16,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Full => "full",
            TemplateId::NoReasoning => "no-reasoning",
            TemplateId::NoIcl => "no-icl",
            TemplateId::Minimal => "minimal",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown SAS template {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SasPrompt {
    pub template_id: TemplateId,
    pub rendered_text: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SasError {
    #[error("query must not be empty")]
    EmptyQuery,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Fills the template's question slot with `query`.
pub fn render_prompt(template_id: TemplateId, query: &str) -> Result<SasPrompt, SasError> {
    if query.trim().is_empty() {
        return Err(SasError::EmptyQuery);
    }
    let template = template_id.template();
    let (head, tail) = template
        .split_once(QUERY_SLOT)
        .expect("every shipped template has a query slot");
    Ok(SasPrompt {
        template_id,
        rendered_text: format!("{head}{query}{tail}"),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SasOutcome {
    pub reason: String,
    pub choice: AugmentationKind,
    /// False when the parser fell back.
    pub valid: bool,
    pub raw_output: String,
}

/// Lowercase, trim, treat `_` and `-` as spaces, collapse whitespace and
/// drop surrounding quotes or punctuation.
fn normalize_choice(s: &str) -> String {
    let lowered = s.to_lowercase().replace(['_', '-'], " ");
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_string()
}

fn lookup_synonym(normalized: &str) -> Option<AugmentationKind> {
    use AugmentationKind::*;
    let kind = match normalized {
        "vertical flip" | "vflip" | "v flip" | "flip vertical" | "vertical flipping"
        | "vertical" | "flip vertically" => VerticalFlip,
        "horizontal flip"
        | "hflip"
        | "h flip"
        | "flip horizontal"
        | "horizontal flipping"
        | "horizontal"
        | "flip horizontally" => HorizontalFlip,
        "random crop" | "crop" | "random cropping" | "cropping" => RandomCrop,
        "random mask" | "mask" | "random masking" | "masking" => RandomMask,
        "color inversion" | "colour inversion" | "color invert" | "invert" | "inversion"
        | "invert colors" | "invert colours" | "color inverse" => ColorInversion,
        "noise" | "noise addition" | "add noise" | "adding noise" | "diffusion noise"
        | "gaussian noise" | "random noise" => Noise,
        _ => return None,
    };
    Some(kind)
}

/// Strips a case-insensitive ASCII `marker` from the start of `line`,
/// tolerating leading whitespace.
fn strip_marker<'a>(line: &'a str, marker: &str) -> Option<&'a str> {
    let line = line.trim_start();
    let head = line.get(..marker.len())?;
    head.eq_ignore_ascii_case(marker)
        .then(|| &line[marker.len()..])
}

/// Splits raw selection output into `(reason, choice)`.
///
/// The last line starting with `Choice:` wins. The reason is the text after
/// the last `Reason:` line that precedes it, or everything before the
/// choice line when there is no such marker. Any failure yields
/// `(raw, fallback, valid = false)`.
pub fn parse_g(raw: &str, fallback: AugmentationKind) -> SasOutcome {
    let failed = || SasOutcome {
        reason: raw.to_string(),
        choice: fallback,
        valid: false,
        raw_output: raw.to_string(),
    };
    let lines: Vec<&str> = raw.lines().collect();
    let Some((choice_idx, choice_text)) = lines
        .iter()
        .enumerate()
        .rev()
        .find_map(|(i, l)| strip_marker(l, "choice:").map(|rest| (i, rest)))
    else {
        return failed();
    };
    let Some(choice) = lookup_synonym(&normalize_choice(choice_text)) else {
        return failed();
    };

    let before = &lines[..choice_idx];
    let reason = match before
        .iter()
        .enumerate()
        .rev()
        .find_map(|(i, l)| strip_marker(l, "reason:").map(|rest| (i, rest)))
    {
        Some((i, first)) => std::iter::once(first)
            .chain(before[i + 1..].iter().copied())
            .collect::<Vec<_>>()
            .join("\n"),
        None => before.join("\n"),
    };
    SasOutcome {
        reason: reason.trim().to_string(),
        choice,
        valid: true,
        raw_output: raw.to_string(),
    }
}

/// Renders the prompt, runs one text-only greedy pass and parses it.
pub fn select_augmentation<B: Backend + ?Sized>(
    backend: &B,
    query: &str,
    template_id: TemplateId,
    fallback: AugmentationKind,
) -> Result<SasOutcome, SasError> {
    let prompt = render_prompt(template_id, query)?;
    let mut session = backend.open_session(None)?;
    let generated = backend.generate_text(
        &mut session,
        &prompt.rendered_text,
        template_id.max_tokens(),
        true,
    );
    let closed = backend.close_session(session);
    let text = generated?;
    closed?;
    Ok(parse_g(&text, fallback))
}

/// The six worked examples embedded in the full template, as
/// `(question, model-style answer, expected choice)`.
pub fn template_examples() -> Vec<(String, String, AugmentationKind)> {
    let mut out = Vec::new();
    let mut lines = FULL.lines().peekable();
    while let Some(line) = lines.next() {
        let Some(q) = line
            .strip_prefix("Question: \"")
            .and_then(|r| r.strip_suffix('"'))
        else {
            continue;
        };
        if q == QUERY_SLOT {
            continue;
        }
        let (Some(reason), Some(choice)) = (lines.next(), lines.next()) else {
            break;
        };
        let kind = choice
            .strip_prefix("Choice: ")
            .and_then(|c| lookup_synonym(&normalize_choice(c)))
            .expect("template examples use canonical names");
        out.push((q.to_string(), format!("{reason}\n{choice}"), kind));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{SyntheticBackend, SyntheticScript};
    use AugmentationKind::*;

    #[test]
    fn full_prompt_contains_preamble_and_query() {
        let p = render_prompt(TemplateId::Full, "Is the mirror above the TV?").unwrap();
        assert!(p
            .rendered_text
            .starts_with("You are an expert data augmentation analyst."));
        assert!(p
            .rendered_text
            .ends_with("Question: \"Is the mirror above the TV?\"\n"));
        for name in [
            "Vertical flip:",
            "Color inversion:",
            "Random crop:",
            "Random mask:",
            "Noise:",
            "Horizontal flip:",
        ] {
            assert_eq!(p.rendered_text.matches(name).count(), 1, "{name}");
        }
        assert_eq!(template_examples().len(), 6);
    }

    #[test]
    fn minimal_drops_examples_and_reason_format() {
        let p = render_prompt(TemplateId::Minimal, "Is it red?").unwrap();
        assert!(!p.rendered_text.contains("## Examples ##"));
        assert!(!p.rendered_text.contains("Reason"));
        assert!(p.rendered_text.contains("Choice:"));
        assert!(p.rendered_text.contains("Is it red?"));
    }

    #[test]
    fn no_icl_differs_only_by_examples_block() {
        let q = "Is it red?";
        let full = render_prompt(TemplateId::Full, q).unwrap().rendered_text;
        let no_icl = render_prompt(TemplateId::NoIcl, q).unwrap().rendered_text;
        let start = full.find("## Examples ##").unwrap();
        let end = full.find("## Your Answer ##").unwrap();
        assert_eq!(format!("{}{}", &full[..start], &full[end..]), no_icl);
    }

    #[test]
    fn no_reasoning_keeps_examples_without_reasons() {
        let p = render_prompt(TemplateId::NoReasoning, "q?")
            .unwrap()
            .rendered_text;
        assert!(p.contains("## Examples ##"));
        assert_eq!(p.matches("\nChoice: ").count(), 6);
        assert!(!p.contains("Reason"));
    }

    #[test]
    fn empty_query_rejected() {
        assert_eq!(
            render_prompt(TemplateId::Full, "  "),
            Err(SasError::EmptyQuery)
        );
    }

    #[test]
    fn parse_reason_and_choice() {
        let raw = "Reason: The question focuses on vertical positioning. Other augmentations don't affect vertical relationships.\nChoice: vertical flip";
        let out = parse_g(raw, Noise);
        assert_eq!(out.choice, VerticalFlip);
        assert!(out.valid);
        assert!(out
            .reason
            .starts_with("The question focuses on vertical positioning."));
        assert!(!out.reason.contains("Choice"));
    }

    #[test]
    fn parse_bare_choice() {
        let out = parse_g("Choice: random_mask", Noise);
        assert_eq!(
            (out.reason.as_str(), out.choice, out.valid),
            ("", RandomMask, true)
        );
    }

    #[test]
    fn parse_failure_falls_back() {
        let raw = "I would probably blur it.";
        let out = parse_g(raw, HorizontalFlip);
        assert_eq!(out.reason, raw);
        assert_eq!(out.choice, HorizontalFlip);
        assert!(!out.valid);
        let out = parse_g("Choice: blur", Noise);
        assert_eq!((out.choice, out.valid), (Noise, false));
    }

    #[test]
    fn last_choice_line_wins() {
        let raw = "Question: \"x\"\nReason: a\nChoice: noise\n\nReason: b\nmore b\n  choice:  Horizontal   Flip.";
        let out = parse_g(raw, Noise);
        assert_eq!(out.choice, HorizontalFlip);
        assert_eq!(out.reason, "b\nmore b");
    }

    #[test]
    fn synonyms() {
        for s in [
            "random mask",
            "Random Mask",
            "random_mask",
            "random-mask",
            " \"RANDOM MASK\" ",
        ] {
            assert_eq!(
                parse_g(&format!("Choice: {s}"), Noise).choice,
                RandomMask,
                "{s}"
            );
        }
        assert_eq!(
            parse_g("Choice: colour inversion", Noise).choice,
            ColorInversion
        );
        assert_eq!(parse_g("CHOICE: hflip", Noise).choice, HorizontalFlip);
    }

    #[test]
    fn reason_without_marker_is_preceding_text() {
        let out = parse_g("It is about colors.\nChoice: color inversion", Noise);
        assert_eq!(out.reason, "It is about colors.");
    }

    #[test]
    fn parser_handles_multibyte_text() {
        let out = parse_g("Ré\u{301}sumé\nChoïce: noise\n日本語", RandomCrop);
        assert!(!out.valid);
        let out = parse_g("日本\nChoice: 噪声", RandomCrop);
        assert_eq!(out.choice, RandomCrop);
    }

    #[test]
    fn select_with_scripted_backend() {
        let examples = template_examples();
        let (q, answer, kind) = examples
            .iter()
            .find(|(q, _, _)| q.contains("green beans"))
            .cloned()
            .unwrap();
        let script = SyntheticScript::new(4, 3).with_completion(q.clone(), answer);
        let b = SyntheticBackend::new(script).unwrap();
        let first = select_augmentation(&b, &q, TemplateId::Full, Noise).unwrap();
        assert_eq!(first.choice, kind);
        assert_eq!(kind, ColorInversion);
        assert!(first.valid);
        let second = select_augmentation(&b, &q, TemplateId::Full, Noise).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn select_falls_back_on_garbage() {
        let script = SyntheticScript::new(4, 3).with_completion("q?", "no idea at all");
        let b = SyntheticBackend::new(script).unwrap();
        let out = select_augmentation(&b, "q?", TemplateId::Minimal, Noise).unwrap();
        assert_eq!((out.choice, out.valid), (Noise, false));
    }

    #[test]
    fn template_ids_parse() {
        for t in TemplateId::ALL {
            assert_eq!(t.as_str().parse::<TemplateId>().unwrap(), t);
        }
        assert!(JUDGE_PROMPT.contains("{oracle_choice}"));
    }
}
