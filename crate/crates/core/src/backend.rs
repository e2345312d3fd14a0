//! Model access: per-step logits and text completion.
//!
//! A [`Backend`] hands out [`BackendSession`]s bound to at most one image.
//! The engine opens one session on the clean image (expert view) and one
//! on the augmented image (amateur view); a session never swaps images.
//!
//! [`SyntheticBackend`] replays a [`SyntheticScript`] and is the reference
//! backend for every test in this workspace.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::RasterImage;
use crate::dist::LogitVector;
use crate::error::BackendError;

/// Client-side handle for one backend session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendSession {
    session_id: String,
    vocab_size: usize,
    end_token: usize,
    context: Vec<usize>,
}

impl BackendSession {
    pub fn new(session_id: impl Into<String>, vocab_size: usize, end_token: usize) -> Self {
        Self {
            session_id: session_id.into(),
            vocab_size,
            end_token,
            context: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.session_id
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn end_token(&self) -> usize {
        self.end_token
    }

    pub fn context(&self) -> &[usize] {
        &self.context
    }

    /// Records `tokens` as the new context. It must extend the current one.
    pub fn advance(&mut self, tokens: &[usize]) -> Result<(), BackendError> {
        if tokens.is_empty() {
            return Err(BackendError::EmptyContext);
        }
        if !tokens.starts_with(&self.context) {
            return Err(BackendError::ContextRewrite);
        }
        self.context
            .extend_from_slice(&tokens[self.context.len()..]);
        Ok(())
    }
}

pub trait Backend: Sync {
    /// Opens a session, optionally bound to an image.
    fn open_session(&self, image: Option<&RasterImage>) -> Result<BackendSession, BackendError>;

    /// Raw next-token logits for the full token context `tokens`.
    fn next_logits(
        &self,
        session: &mut BackendSession,
        tokens: &[usize],
    ) -> Result<LogitVector, BackendError>;

    fn generate_text(
        &self,
        session: &mut BackendSession,
        prompt: &str,
        max_tokens: usize,
        greedy: bool,
    ) -> Result<String, BackendError>;

    fn close_session(&self, session: BackendSession) -> Result<(), BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn open_session(&self, image: Option<&RasterImage>) -> Result<BackendSession, BackendError> {
        (**self).open_session(image)
    }

    fn next_logits(
        &self,
        session: &mut BackendSession,
        tokens: &[usize],
    ) -> Result<LogitVector, BackendError> {
        (**self).next_logits(session, tokens)
    }

    fn generate_text(
        &self,
        session: &mut BackendSession,
        prompt: &str,
        max_tokens: usize,
        greedy: bool,
    ) -> Result<String, BackendError> {
        (**self).generate_text(session, prompt, max_tokens, greedy)
    }

    fn close_session(&self, session: BackendSession) -> Result<(), BackendError> {
        (**self).close_session(session)
    }
}

/// Which logit table a session reads from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    /// Bound to the clean image (or any image, when no clean image is set).
    Expert,
    /// Bound to an image other than the clean one.
    Amateur,
    /// No image; text completion only. Logits fall back to the expert rows.
    Text,
}

/// One scripted logit row. Exactly one of `step` and `context` keys it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRow {
    /// Number of generated tokens so far (context length minus prompt length).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    /// Full token context, prompt included.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<Vec<usize>>,
    pub logits: Vec<f64>,
}

impl ScriptRow {
    pub fn at_step(step: usize, logits: Vec<f64>) -> Self {
        Self {
            step: Some(step),
            context: None,
            logits,
        }
    }

    pub fn at_context(context: Vec<usize>, logits: Vec<f64>) -> Self {
        Self {
            step: None,
            context: Some(context),
            logits,
        }
    }
}

/// Declarative description of a synthetic model.
///
/// Lookup for a logits request checks context-keyed rows first (by SHA-256
/// of the token sequence), then step-keyed rows, then `default_row`.
/// Without a match a strict script errors and a lenient one returns a
/// uniform (all-zero) row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScript {
    pub vocab_size: usize,
    pub end_token: usize,
    #[serde(default = "default_prompt")]
    pub prompt_tokens: Vec<usize>,
    #[serde(default)]
    pub strict: bool,
    /// Optional token strings, for display only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub token_names: Vec<String>,
    /// SHA-256 digest of the clean image; overridden by
    /// [`SyntheticBackend::with_clean_image`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean_image_digest: Option<String>,
    #[serde(default)]
    pub expert: Vec<ScriptRow>,
    #[serde(default)]
    pub amateur: Vec<ScriptRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_row: Option<Vec<f64>>,
    /// Completion table. Keys match the whole prompt or the text of its
    /// last `Question: "..."` line.
    #[serde(default)]
    pub completions: BTreeMap<String, String>,
}

fn default_prompt() -> Vec<usize> {
    vec![0]
}

impl SyntheticScript {
    pub fn new(vocab_size: usize, end_token: usize) -> Self {
        Self {
            vocab_size,
            end_token,
            prompt_tokens: default_prompt(),
            strict: false,
            token_names: Vec::new(),
            clean_image_digest: None,
            expert: Vec::new(),
            amateur: Vec::new(),
            default_row: None,
            completions: BTreeMap::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let script: Self =
            serde_json::from_str(text).map_err(|e| BackendError::InvalidScript(e.to_string()))?;
        script.validate()?;
        Ok(script)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("script is always serializable")
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.vocab_size == 0 {
            return Err(BackendError::InvalidScript(
                "vocab_size must be positive".into(),
            ));
        }
        if self.end_token >= self.vocab_size {
            return Err(BackendError::InvalidScript(format!(
                "end_token {} outside vocabulary",
                self.end_token
            )));
        }
        if self.prompt_tokens.is_empty() {
            return Err(BackendError::InvalidScript(
                "prompt_tokens must be nonempty".into(),
            ));
        }
        let rows = self.expert.iter().chain(&self.amateur);
        for row in rows {
            if row.step.is_some() == row.context.is_some() {
                return Err(BackendError::InvalidScript(
                    "each row needs exactly one of step or context".into(),
                ));
            }
            self.check_row(&row.logits)?;
        }
        if let Some(row) = &self.default_row {
            self.check_row(row)?;
        }
        Ok(())
    }

    fn check_row(&self, row: &[f64]) -> Result<(), BackendError> {
        if row.len() != self.vocab_size {
            return Err(BackendError::VocabMismatch {
                expected: self.vocab_size,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(BackendError::InvalidScript(
                "scripted logits must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn with_expert_steps(mut self, rows: Vec<Vec<f64>>) -> Self {
        self.expert = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| ScriptRow::at_step(i, r))
            .collect();
        self
    }

    pub fn with_amateur_steps(mut self, rows: Vec<Vec<f64>>) -> Self {
        self.amateur = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| ScriptRow::at_step(i, r))
            .collect();
        self
    }

    pub fn with_completion(mut self, key: impl Into<String>, text: impl Into<String>) -> Self {
        self.completions.insert(key.into(), text.into());
        self
    }
}

/// Hex SHA-256 of a token sequence, each token as a little-endian u64.
pub fn context_digest(tokens: &[usize]) -> String {
    let mut hasher = Sha256::new();
    for &t in tokens {
        hasher.update((t as u64).to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Text inside the last `Question: "..."` line of a prompt.
fn last_question(prompt: &str) -> Option<&str> {
    prompt.lines().rev().find_map(|line| {
        let rest = line.trim().strip_prefix("Question:")?.trim();
        let inner = rest.strip_prefix('"')?.strip_suffix('"')?;
        Some(inner)
    })
}

#[derive(Debug, Clone)]
struct IndexedRows {
    by_step: BTreeMap<usize, Vec<f64>>,
    by_context: BTreeMap<String, Vec<f64>>,
}

impl IndexedRows {
    fn build(rows: &[ScriptRow]) -> Self {
        let mut by_step = BTreeMap::new();
        let mut by_context = BTreeMap::new();
        for row in rows {
            if let Some(step) = row.step {
                by_step.insert(step, row.logits.clone());
            }
            if let Some(ctx) = &row.context {
                by_context.insert(context_digest(ctx), row.logits.clone());
            }
        }
        Self {
            by_step,
            by_context,
        }
    }
}

/// Deterministic scripted backend.
///
/// Output depends only on the script, the bound image's digest (through its
/// [`View`]) and the token context. Session ids come from a counter and
/// never influence outputs.
#[derive(Debug)]
pub struct SyntheticBackend {
    script: SyntheticScript,
    clean_digest: Option<String>,
    expert: IndexedRows,
    amateur: IndexedRows,
    next_id: AtomicU64,
}

impl SyntheticBackend {
    pub fn new(script: SyntheticScript) -> Result<Self, BackendError> {
        script.validate()?;
        Ok(Self {
            clean_digest: script.clean_image_digest.clone(),
            expert: IndexedRows::build(&script.expert),
            amateur: IndexedRows::build(&script.amateur),
            script,
            next_id: AtomicU64::new(0),
        })
    }

    /// Sessions bound to exactly this image read the expert rows; sessions
    /// bound to any other image read the amateur rows.
    pub fn with_clean_image(mut self, image: &RasterImage) -> Self {
        self.clean_digest = Some(image.digest());
        self
    }

    pub fn script(&self) -> &SyntheticScript {
        &self.script
    }

    fn view_for(&self, image: Option<&RasterImage>) -> View {
        match (image, &self.clean_digest) {
            (None, _) => View::Text,
            (Some(_), None) => View::Expert,
            (Some(img), Some(clean)) if img.digest() == *clean => View::Expert,
            (Some(_), Some(_)) => View::Amateur,
        }
    }

    /// Looks up the scripted row for `(view, tokens)`.
    pub fn row_for(&self, view: View, tokens: &[usize]) -> Result<Vec<f64>, BackendError> {
        if tokens.is_empty() {
            return Err(BackendError::EmptyContext);
        }
        let table = match view {
            View::Amateur => &self.amateur,
            View::Expert | View::Text => &self.expert,
        };
        let digest = context_digest(tokens);
        if let Some(row) = table.by_context.get(&digest) {
            return Ok(row.clone());
        }
        let prompt_len = self.script.prompt_tokens.len();
        if tokens.len() >= prompt_len {
            if let Some(row) = table.by_step.get(&(tokens.len() - prompt_len)) {
                return Ok(row.clone());
            }
        }
        if let Some(row) = &self.script.default_row {
            return Ok(row.clone());
        }
        if self.script.strict {
            return Err(BackendError::UnknownContext(digest));
        }
        Ok(vec![0.0; self.script.vocab_size])
    }

    /// Completion lookup: exact prompt first, then the last quoted question.
    pub fn completion_for(&self, prompt: &str) -> Result<String, BackendError> {
        let table = &self.script.completions;
        let hit = table
            .get(prompt)
            .or_else(|| last_question(prompt).and_then(|q| table.get(q)));
        match hit {
            Some(text) => Ok(text.clone()),
            None if self.script.strict => Err(BackendError::MissingCompletion),
            None => Ok(String::new()),
        }
    }
}

/// Session ids encode the view so the backend stays stateless.
fn encode_session_id(view: View, serial: u64) -> String {
    let tag = match view {
        View::Expert => "e",
        View::Amateur => "a",
        View::Text => "t",
    };
    format!("syn-{tag}-{serial}")
}

fn decode_session_view(id: &str) -> Option<View> {
    match id.strip_prefix("syn-")?.split('-').next()? {
        "e" => Some(View::Expert),
        "a" => Some(View::Amateur),
        "t" => Some(View::Text),
        _ => None,
    }
}

/// Keeps the first `max_tokens` whitespace-separated words, preserving the
/// original spacing of the kept prefix.
fn truncate_words(text: &str, max_tokens: usize) -> String {
    let mut seen = 0;
    let mut in_word = false;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            in_word = false;
        } else if !in_word {
            in_word = true;
            seen += 1;
            if seen > max_tokens {
                return text[..i].trim_end().to_string();
            }
        }
    }
    text.to_string()
}

impl Backend for SyntheticBackend {
    fn open_session(&self, image: Option<&RasterImage>) -> Result<BackendSession, BackendError> {
        let view = self.view_for(image);
        let serial = self.next_id.fetch_add(1, Ordering::Relaxed);
        Ok(BackendSession::new(
            encode_session_id(view, serial),
            self.script.vocab_size,
            self.script.end_token,
        ))
    }

    fn next_logits(
        &self,
        session: &mut BackendSession,
        tokens: &[usize],
    ) -> Result<LogitVector, BackendError> {
        let view = decode_session_view(session.id())
            .ok_or_else(|| BackendError::Transport(format!("unknown session {}", session.id())))?;
        session.advance(tokens)?;
        let row = self.row_for(view, tokens)?;
        Ok(LogitVector::new(row)?)
    }

    fn generate_text(
        &self,
        _session: &mut BackendSession,
        prompt: &str,
        max_tokens: usize,
        _greedy: bool,
    ) -> Result<String, BackendError> {
        let text = self.completion_for(prompt)?;
        Ok(truncate_words(&text, max_tokens))
    }

    fn close_session(&self, _session: BackendSession) -> Result<(), BackendError> {
        Ok(())
    }
}
