//! Line-delimited JSON step records and run summaries.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentationKind;
use crate::engine::{DecodeResult, StepTrace, StopReason};

/// Entries kept in each `*_top5` field.
pub const TOP_K: usize = 5;

/// One JSONL trace line. Field order is part of the format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub t: usize,
    pub beta_t: f64,
    pub entropy_bits: f64,
    pub candidates: Vec<usize>,
    pub chosen: usize,
    pub expert_top5: Vec<(usize, f64)>,
    pub amateur_top5: Vec<(usize, f64)>,
    pub contrasted_top5: Vec<(usize, f64)>,
}

impl From<&StepTrace> for TraceRecord {
    fn from(step: &StepTrace) -> Self {
        Self {
            t: step.t,
            beta_t: step.beta_t,
            entropy_bits: step.entropy_bits,
            candidates: step.candidates.clone(),
            chosen: step.chosen_token,
            expert_top5: step.expert_logits.top_k(TOP_K),
            amateur_top5: step.amateur_logits.top_k(TOP_K),
            contrasted_top5: step.contrasted_logits.top_k(TOP_K),
        }
    }
}

pub fn write_jsonl<W: Write>(mut out: W, traces: &[StepTrace]) -> io::Result<()> {
    for step in traces {
        let line = serde_json::to_string(&TraceRecord::from(step))?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn to_jsonl(traces: &[StepTrace]) -> String {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, traces).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub augmentation: AugmentationKind,
    pub sas_valid: Option<bool>,
    pub tokens: Vec<usize>,
    pub token_count: usize,
    pub stop_reason: StopReason,
    pub mean_candidates: f64,
    pub mean_beta_t: f64,
    pub entropy_series: Vec<f64>,
    pub duration_ms: f64,
}

impl RunSummary {
    pub fn from_result(
        result: &DecodeResult,
        augmentation: AugmentationKind,
        sas_valid: Option<bool>,
        duration_ms: f64,
    ) -> Self {
        let n = result.traces.len().max(1) as f64;
        Self {
            augmentation,
            sas_valid,
            tokens: result.tokens.clone(),
            token_count: result.tokens.len(),
            stop_reason: result.stop_reason,
            mean_candidates: result
                .traces
                .iter()
                .map(|s| s.candidate_count() as f64)
                .sum::<f64>()
                / n,
            mean_beta_t: result.traces.iter().map(|s| s.beta_t).sum::<f64>() / n,
            entropy_series: result.traces.iter().map(|s| s.entropy_bits).collect(),
            duration_ms,
        }
    }
}
