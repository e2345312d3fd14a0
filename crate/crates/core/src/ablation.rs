//! Threshold-mode ablation over a scripted benchmark suite.
//!
//! Every grid cell decodes every suite case greedily and reports mean
//! `beta_t`, mean candidate-set size and the fraction of cases whose
//! output equals the scripted ground truth. Cells are independent, so
//! [`run_grid`] fans them out over [`crate::par::map_ordered`]; rows come
//! back in grid order either way.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::augment;
use crate::engine::{self, DecodingParams, Sampling, ThresholdMode};
use crate::error::EngineError;
use crate::par;
use crate::suite::{self, BenchmarkSuite};

/// Token budget per case; suite ground truths are far shorter.
pub const CASE_MAX_TOKENS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub mode: ThresholdMode,
    /// Set for sat and hns cells.
    pub gamma: Option<f64>,
    /// Set for apc cells.
    pub beta: Option<f64>,
}

impl GridCell {
    pub fn params(&self, alpha: f64) -> DecodingParams {
        let defaults = DecodingParams::default();
        DecodingParams {
            alpha,
            beta: self.beta.unwrap_or(defaults.beta),
            gamma: self.gamma.unwrap_or(defaults.gamma),
            threshold_mode: self.mode,
            max_tokens: CASE_MAX_TOKENS,
            sampling: Sampling::Greedy,
            seed: 0,
        }
    }
}

/// Threshold modes crossed with their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub modes: Vec<ThresholdMode>,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_gammas() -> Vec<f64> {
    vec![engine::DEFAULT_GAMMA]
}

fn default_betas() -> Vec<f64> {
    vec![engine::DEFAULT_BETA]
}

fn default_alpha() -> f64 {
    engine::DEFAULT_ALPHA
}

impl GridSpec {
    pub fn new(modes: Vec<ThresholdMode>) -> Self {
        Self {
            modes,
            gammas: default_gammas(),
            betas: default_betas(),
            alpha: default_alpha(),
        }
    }

    /// Cells in grid order: modes as listed; sat and hns expand over
    /// `gammas`, apc over `betas`.
    pub fn cells(&self) -> Vec<GridCell> {
        let mut cells = Vec::new();
        for &mode in &self.modes {
            match mode {
                ThresholdMode::None => cells.push(GridCell {
                    mode,
                    gamma: None,
                    beta: None,
                }),
                ThresholdMode::Apc => cells.extend(self.betas.iter().map(|&b| GridCell {
                    mode,
                    gamma: None,
                    beta: Some(b),
                })),
                ThresholdMode::Sat | ThresholdMode::Hns => {
                    cells.extend(self.gammas.iter().map(|&g| GridCell {
                        mode,
                        gamma: Some(g),
                        beta: None,
                    }))
                }
            }
        }
        cells
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: ThresholdMode,
    pub gamma: Option<f64>,
    pub mean_beta_t: f64,
    pub mean_candidates: f64,
    pub exact_match_rate: f64,
}

/// Decodes every case of `suite` under one cell.
pub fn run_cell(
    suite: &BenchmarkSuite,
    cell: &GridCell,
    alpha: f64,
) -> Result<AblationRow, EngineError> {
    let params = cell.params(alpha);
    params.validate()?;
    let image = suite::suite_image();
    let mut beta_sum = 0.0;
    let mut candidate_sum = 0.0;
    let mut steps = 0usize;
    let mut matches = 0usize;
    for (i, case) in suite.cases.iter().enumerate() {
        let backend = case.backend(&image).map_err(EngineError::Setup)?;
        let augmented = augment::apply(case.augmentation, &image, i as u64);
        let result = engine::decode(
            &backend,
            &image,
            &augmented,
            &case.script.prompt_tokens,
            &params,
        )?;
        for step in &result.traces {
            beta_sum += step.beta_t;
            candidate_sum += step.candidate_count() as f64;
        }
        steps += result.traces.len();
        if result.tokens == case.ground_truth {
            matches += 1;
        }
    }
    let steps = steps.max(1) as f64;
    Ok(AblationRow {
        mode: cell.mode,
        gamma: cell.gamma,
        mean_beta_t: beta_sum / steps,
        mean_candidates: candidate_sum / steps,
        exact_match_rate: matches as f64 / suite.cases.len().max(1) as f64,
    })
}

/// Runs all cells, in parallel when the `parallel` feature is enabled.
pub fn run_grid(suite: &BenchmarkSuite, spec: &GridSpec) -> Result<Vec<AblationRow>, EngineError> {
    par::map_ordered(&spec.cells(), |cell| run_cell(suite, cell, spec.alpha))
        .into_iter()
        .collect()
}

pub fn run_grid_sequential(
    suite: &BenchmarkSuite,
    spec: &GridSpec,
) -> Result<Vec<AblationRow>, EngineError> {
    par::map_sequential(&spec.cells(), |cell| run_cell(suite, cell, spec.alpha))
        .into_iter()
        .collect()
}

/// Writes rows as CSV with header
/// `mode,gamma,mean_beta_t,mean_candidates,exact_match_rate`.
pub fn write_csv<W: Write>(out: W, rows: &[AblationRow]) -> io::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row).map_err(io::Error::from)?;
    }
    writer.flush()
}

pub fn to_csv(rows: &[AblationRow]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv output is UTF-8")
}
