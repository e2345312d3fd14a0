//! Scripted scenarios with known correct outputs.
//!
//! All scripts share an eight-token vocabulary:
//!
//! | id | token      |
//! |----|------------|
//! | 0  | `<s>`      |
//! | 1  | `Yes`      |
//! | 2  | `No`       |
//! | 3  | `the`      |
//! | 4  | `red`      |
//! | 5  | `blue`     |
//! | 6  | `painting` |
//! | 7  | `</s>`     |
//!
//! Expert rows are read by the clean-image session and amateur rows by any
//! other image, so every case is independent of which augmentation built
//! the amateur view.

use serde::{Deserialize, Serialize};

use crate::augment::{self, AugmentationKind, RasterImage};
use crate::backend::{SyntheticBackend, SyntheticScript};
use crate::error::BackendError;

pub const VOCAB_SIZE: usize = 8;
pub const BOS: usize = 0;
pub const YES: usize = 1;
pub const NO: usize = 2;
pub const THE: usize = 3;
pub const RED: usize = 4;
pub const BLUE: usize = 5;
pub const PAINTING: usize = 6;
pub const EOS: usize = 7;

pub const TOKEN_NAMES: [&str; VOCAB_SIZE] =
    ["<s>", "Yes", "No", "the", "red", "blue", "painting", "</s>"];

/// Query answered by the demo script's completion table.
pub const DEMO_QUERY: &str = "What color is the painting?";

/// Expert and amateur agree on a confident end-of-sequence.
fn end_row() -> Vec<f64> {
    vec![-2.0, -2.0, -2.0, -2.0, -2.0, -2.0, -2.0, 6.0]
}

fn script(expert: Vec<Vec<f64>>, amateur: Vec<Vec<f64>>) -> SyntheticScript {
    let mut s = SyntheticScript::new(VOCAB_SIZE, EOS)
        .with_expert_steps(expert)
        .with_amateur_steps(amateur);
    s.prompt_tokens = vec![BOS];
    s.strict = true;
    s.token_names = TOKEN_NAMES.iter().map(|t| t.to_string()).collect();
    s
}

/// The expert narrowly prefers the wrong `No` (2.0 vs 1.9) while the
/// degraded view prefers it strongly (3.0 vs 0.0). Contrast with
/// `alpha = 1` scores `Yes` at 3.8 and `No` at 1.0.
pub fn failure_correction_script() -> SyntheticScript {
    script(
        vec![
            vec![-4.0, 1.9, 2.0, -1.0, -2.0, -2.0, -3.0, -3.0],
            end_row(),
        ],
        vec![
            vec![-4.0, 0.0, 3.0, -1.0, -2.0, -2.0, -3.0, -3.0],
            end_row(),
        ],
    )
}

/// The degraded view hallucinates `blue` (6.0). The expert gives `blue`
/// about an eighth of the mass of `red`, which is below the entropy
/// threshold, so `blue` never enters the candidate set.
pub fn hallucination_penalty_script() -> SyntheticScript {
    let the = vec![-3.0, -3.0, -3.0, 5.0, -1.0, -1.0, -1.0, -3.0];
    script(
        vec![
            the.clone(),
            vec![-3.0, -3.0, -3.0, -1.0, 4.0, 2.0, 1.0, -1.0],
            end_row(),
        ],
        vec![
            the,
            vec![-3.0, -3.0, -3.0, -1.0, 2.5, 6.0, 1.0, -1.0],
            end_row(),
        ],
    )
}

/// Contrast rewards an implausible token: `painting` is near-impossible for
/// the expert (-3) and even less likely for the amateur (-14), so
/// `2 * -3 + 14 = 8` outranks `Yes` at 4.5 unless truncation removes it.
pub fn implausible_reward_script() -> SyntheticScript {
    script(
        vec![
            vec![-4.0, 5.0, 0.5, -4.0, -4.0, -4.0, -3.0, -4.0],
            end_row(),
        ],
        vec![
            vec![-4.0, 5.5, 0.5, -4.0, -4.0, -4.0, -14.0, -4.0],
            end_row(),
        ],
    )
}

/// A three-way uncertain step where the amateur drives the expert's narrow
/// favourite (`blue`) and contrast recovers `red`.
pub fn uncertain_color_script() -> SyntheticScript {
    script(
        vec![vec![-3.0, -3.0, -3.0, -2.0, 1.4, 1.5, 1.2, -2.0], end_row()],
        vec![vec![-3.0, -3.0, -3.0, -2.0, 0.2, 2.5, 1.2, -2.0], end_row()],
    )
}

/// Alternating confident and uncertain steps with identical expert and
/// amateur rows, for checking that thresholds track entropy.
pub fn mixed_entropy_script() -> SyntheticScript {
    let rows = vec![
        vec![-2.0, -2.0, -2.0, 6.0, -2.0, -2.0, -2.0, -2.0],
        vec![-1.0, -1.0, -1.0, -1.0, 1.0, 0.9, 0.8, -1.0],
        vec![-5.0, -5.0, -5.0, -5.0, -5.0, -5.0, 9.0, -5.0],
        vec![0.1, 0.0, 0.2, 0.3, 0.0, 0.1, 0.2, -0.5],
        vec![-1.0, 2.0, 1.5, -1.0, -1.0, -1.0, -1.0, -1.0],
        vec![-1.0, -1.0, -1.0, 3.0, 0.0, -1.0, -1.0, -1.0],
        end_row(),
    ];
    script(rows.clone(), rows)
}

/// Sentence-length demo: failure correction, a hallucination penalty and
/// an implausible reward in one run, plus an SAS completion.
pub fn demo_script() -> SyntheticScript {
    let expert = vec![
        vec![-4.0, 1.9, 2.0, -1.0, -2.0, -2.0, -3.0, -3.0],
        vec![-3.0, -3.0, -3.0, 5.0, -1.0, -1.0, 0.5, -3.0],
        vec![-3.0, -3.0, -3.0, -1.0, 4.0, 2.0, 1.0, -1.0],
        vec![-4.0, -4.0, -4.0, -4.0, -3.0, -4.0, 5.0, 0.0],
        end_row(),
    ];
    let amateur = vec![
        vec![-4.0, 0.0, 3.0, -1.0, -2.0, -2.0, -3.0, -3.0],
        vec![-3.0, -3.0, -3.0, 5.0, -1.0, -1.0, 0.0, -3.0],
        vec![-3.0, -3.0, -3.0, -1.0, 2.5, 6.0, 1.0, -1.0],
        vec![-4.0, -4.0, -4.0, -4.0, -14.0, -4.0, 5.5, 0.0],
        end_row(),
    ];
    let mut s = script(expert, amateur);
    s.strict = false;
    s.completions.insert(
        DEMO_QUERY.to_string(),
        "Reason: The question requires identifying a specific color. Color inversion changes \
         each color to its complement, invalidating the question.\nChoice: color inversion"
            .to_string(),
    );
    s
}

/// Ground truth for [`demo_script`]: `Yes the red painting </s>`.
pub fn demo_ground_truth() -> Vec<usize> {
    vec![YES, THE, RED, PAINTING, EOS]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub name: String,
    pub script: SyntheticScript,
    pub ground_truth: Vec<usize>,
    #[serde(default = "default_augmentation")]
    pub augmentation: AugmentationKind,
}

fn default_augmentation() -> AugmentationKind {
    AugmentationKind::Noise
}

impl BenchmarkCase {
    pub fn new(name: &str, script: SyntheticScript, ground_truth: Vec<usize>) -> Self {
        Self {
            name: name.to_string(),
            script,
            ground_truth,
            augmentation: default_augmentation(),
        }
    }

    /// Backend whose expert view is bound to `image`.
    pub fn backend(&self, image: &RasterImage) -> Result<SyntheticBackend, BackendError> {
        Ok(SyntheticBackend::new(self.script.clone())?.with_clean_image(image))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSuite {
    pub name: String,
    pub cases: Vec<BenchmarkCase>,
}

impl BenchmarkSuite {
    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let suite: Self =
            serde_json::from_str(text).map_err(|e| BackendError::InvalidScript(e.to_string()))?;
        for case in &suite.cases {
            case.script.validate()?;
        }
        Ok(suite)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite is always serializable")
    }
}

/// Clean image used for every suite case.
pub fn suite_image() -> RasterImage {
    augment::demo_image()
}

/// The bundled hallucination-injection suite.
pub fn hallucination_injection_suite() -> BenchmarkSuite {
    BenchmarkSuite {
        name: "hallucination-injection".to_string(),
        cases: vec![
            BenchmarkCase::new(
                "failure_correction",
                failure_correction_script(),
                vec![YES, EOS],
            ),
            BenchmarkCase::new(
                "hallucination_penalty",
                hallucination_penalty_script(),
                vec![THE, RED, EOS],
            ),
            BenchmarkCase::new(
                "implausible_reward",
                implausible_reward_script(),
                vec![YES, EOS],
            ),
            BenchmarkCase::new("uncertain_color", uncertain_color_script(), vec![RED, EOS]),
            BenchmarkCase::new("demo_sentence", demo_script(), demo_ground_truth()),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripts_validate() {
        for case in hallucination_injection_suite().cases {
            case.script.validate().unwrap();
        }
        mixed_entropy_script().validate().unwrap();
    }

    #[test]
    fn suite_json_round_trip() {
        let suite = hallucination_injection_suite();
        assert_eq!(
            BenchmarkSuite::from_json(&suite.to_json_pretty()).unwrap(),
            suite
        );
    }
}
