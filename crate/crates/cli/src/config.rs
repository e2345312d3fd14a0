//! Run configuration: built-in defaults, overlaid by an optional TOML file,
//! overlaid by command-line flags.
//!
//! File keys are the flag names without the leading dashes:
//!
//! ```toml
//! script = "assets/demo/script.json"
//! threshold-mode = "sat"
//! gamma = -0.5
//! no-sas = true
//! augmentation = "noise"
//! ```

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Deserializer, Serialize};

use savcd_core::engine::{DecodingParams, Sampling, ThresholdMode};
use savcd_core::sas::{TemplateId, DEFAULT_FALLBACK};
use savcd_core::AugmentationKind;

use crate::error::CliError;

/// Every decode setting, each optional so layers can be merged.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunOptions {
    /// Logit server base URL.
    #[arg(long, value_name = "URL", conflicts_with = "script")]
    pub backend: Option<String>,

    /// Synthetic backend script (JSON).
    #[arg(long, value_name = "PATH")]
    pub script: Option<PathBuf>,

    /// Clean input image (PNG). Defaults to the built-in test card.
    #[arg(long, value_name = "PATH")]
    pub image: Option<PathBuf>,

    #[arg(long, value_name = "STR")]
    pub query: Option<String>,

    #[arg(long, value_name = "F")]
    pub alpha: Option<f64>,

    #[arg(long, value_name = "F")]
    pub beta: Option<f64>,

    #[arg(long, value_name = "F")]
    pub gamma: Option<f64>,

    #[arg(long, value_name = "none|apc|sat|hns")]
    pub threshold_mode: Option<ThresholdMode>,

    #[arg(long, value_name = "greedy|multinomial")]
    pub sampling: Option<Sampling>,

    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,

    #[arg(long, value_name = "N")]
    pub max_tokens: Option<usize>,

    #[arg(long, value_name = "full|no-reasoning|no-icl|minimal")]
    pub sas_template: Option<TemplateId>,

    /// Skip augmentation selection.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_sas: bool,

    /// Fixed augmentation; skips selection.
    #[arg(long, value_name = "KIND")]
    #[serde(default, deserialize_with = "kind_from_str")]
    pub augmentation: Option<AugmentationKind>,

    /// Augmentation used when the selector output cannot be parsed.
    #[arg(long, value_name = "KIND")]
    #[serde(default, deserialize_with = "kind_from_str")]
    pub fallback: Option<AugmentationKind>,

    /// Write per-step JSONL records here.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,

    /// Prompt token ids. Defaults to the script's prompt, or `0` over HTTP.
    #[arg(long, value_name = "IDS", value_delimiter = ',')]
    pub prompt_tokens: Option<Vec<usize>>,
}

fn kind_from_str<'de, D: Deserializer<'de>>(d: D) -> Result<Option<AugmentationKind>, D::Error> {
    Option::<String>::deserialize(d)?
        .map(|s| s.parse().map_err(serde::de::Error::custom))
        .transpose()
}

impl RunOptions {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it are taken relative
    /// to the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut opts = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut opts.script, &mut opts.image, &mut opts.trace]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(opts)
    }

    /// Values set in `over` win.
    pub fn overlay(self, over: RunOptions) -> RunOptions {
        RunOptions {
            backend: over.backend.or(self.backend),
            script: over.script.or(self.script),
            image: over.image.or(self.image),
            query: over.query.or(self.query),
            alpha: over.alpha.or(self.alpha),
            beta: over.beta.or(self.beta),
            gamma: over.gamma.or(self.gamma),
            threshold_mode: over.threshold_mode.or(self.threshold_mode),
            sampling: over.sampling.or(self.sampling),
            seed: over.seed.or(self.seed),
            max_tokens: over.max_tokens.or(self.max_tokens),
            sas_template: over.sas_template.or(self.sas_template),
            no_sas: over.no_sas || self.no_sas,
            augmentation: over.augmentation.or(self.augmentation),
            fallback: over.fallback.or(self.fallback),
            trace: over.trace.or(self.trace),
            prompt_tokens: over.prompt_tokens.or(self.prompt_tokens),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Script(PathBuf),
    Http(String),
}

/// How the augmentation is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    Fixed(AugmentationKind),
    Sas {
        template: TemplateId,
        fallback: AugmentationKind,
    },
}

/// Fully resolved settings for one decode.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: Option<Source>,
    pub image: Option<PathBuf>,
    pub query: Option<String>,
    pub params: DecodingParams,
    pub selection: Selection,
    pub trace: Option<PathBuf>,
    pub prompt_tokens: Option<Vec<usize>>,
}

impl RunConfig {
    pub fn resolve(opts: RunOptions) -> Result<Self, CliError> {
        let defaults = DecodingParams::default();
        let params = DecodingParams {
            alpha: opts.alpha.unwrap_or(defaults.alpha),
            beta: opts.beta.unwrap_or(defaults.beta),
            gamma: opts.gamma.unwrap_or(defaults.gamma),
            threshold_mode: opts.threshold_mode.unwrap_or(defaults.threshold_mode),
            max_tokens: opts.max_tokens.unwrap_or(defaults.max_tokens),
            sampling: opts.sampling.unwrap_or(defaults.sampling),
            seed: opts.seed.unwrap_or(defaults.seed),
        };
        params
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let source = match (opts.backend, opts.script) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "--backend and --script are mutually exclusive".into(),
                ))
            }
            (Some(url), None) => Some(Source::Http(url)),
            (None, Some(path)) => Some(Source::Script(path)),
            (None, None) => None,
        };
        let fallback = opts.fallback.unwrap_or(DEFAULT_FALLBACK);
        let selection = match opts.augmentation {
            Some(kind) => Selection::Fixed(kind),
            None if opts.no_sas => Selection::Fixed(fallback),
            None => Selection::Sas {
                template: opts.sas_template.unwrap_or(TemplateId::Full),
                fallback,
            },
        };
        if opts.prompt_tokens.as_ref().is_some_and(Vec::is_empty) {
            return Err(CliError::Config("--prompt-tokens must not be empty".into()));
        }
        Ok(Self {
            source,
            image: opts.image,
            query: opts.query,
            params,
            selection,
            trace: opts.trace,
            prompt_tokens: opts.prompt_tokens,
        })
    }

    /// The resolved settings in config-file form.
    pub fn to_options(&self) -> RunOptions {
        let (backend, script) = match &self.source {
            Some(Source::Http(url)) => (Some(url.clone()), None),
            Some(Source::Script(path)) => (None, Some(path.clone())),
            None => (None, None),
        };
        let (no_sas, augmentation, sas_template, fallback) = match self.selection {
            Selection::Fixed(kind) => (true, Some(kind), None, None),
            Selection::Sas { template, fallback } => (false, None, Some(template), Some(fallback)),
        };
        RunOptions {
            backend,
            script,
            image: self.image.clone(),
            query: self.query.clone(),
            alpha: Some(self.params.alpha),
            beta: Some(self.params.beta),
            gamma: Some(self.params.gamma),
            threshold_mode: Some(self.params.threshold_mode),
            sampling: Some(self.params.sampling),
            seed: Some(self.params.seed),
            max_tokens: Some(self.params.max_tokens),
            sas_template,
            no_sas,
            augmentation,
            fallback,
            trace: self.trace.clone(),
            prompt_tokens: self.prompt_tokens.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_options()).expect("options are always representable")
    }
}
