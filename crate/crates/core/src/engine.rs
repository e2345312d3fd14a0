//! Contrastive decoding with entropy-adaptive vocabulary truncation.
//!
//! Each step pulls expert logits (clean image) and amateur logits
//! (augmented image), forms `(1 + alpha) * expert - alpha * amateur`,
//! builds a candidate set from the *expert* distribution, masks every
//! token outside it and samples from what is left.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::RasterImage;
use crate::backend::{Backend, BackendSession};
use crate::dist::{
    self, entropy_bits, h_decay_from_entropy, h_ns_from_entropy, softmax, EntropyBits, LogitVector,
    ProbVector,
};
use crate::error::{DistError, EngineError};

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_BETA: f64 = 0.1;
pub const DEFAULT_GAMMA: f64 = -0.5;
pub const DEFAULT_MAX_TOKENS: usize = 64;

/// How the per-step candidate set is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    /// No truncation.
    None,
    /// Static plausibility threshold `beta`.
    Apc,
    /// `beta_t = sigmoid(gamma * H(expert))`.
    Sat,
    /// Normalized scaled entropy comparator.
    Hns,
}

impl ThresholdMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdMode::None => "none",
            ThresholdMode::Apc => "apc",
            ThresholdMode::Sat => "sat",
            ThresholdMode::Hns => "hns",
        }
    }
}

impl fmt::Display for ThresholdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ThresholdMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(ThresholdMode::None),
            "apc" => Ok(ThresholdMode::Apc),
            "sat" => Ok(ThresholdMode::Sat),
            "hns" => Ok(ThresholdMode::Hns),
            other => Err(format!("unknown threshold mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    Greedy,
    Multinomial,
}

impl Sampling {
    pub fn as_str(self) -> &'static str {
        match self {
            Sampling::Greedy => "greedy",
            Sampling::Multinomial => "multinomial",
        }
    }
}

impl FromStr for Sampling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "greedy" => Ok(Sampling::Greedy),
            "multinomial" => Ok(Sampling::Multinomial),
            other => Err(format!("unknown sampling mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub threshold_mode: ThresholdMode,
    pub max_tokens: usize,
    pub sampling: Sampling,
    pub seed: u64,
}

impl Default for DecodingParams {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            gamma: DEFAULT_GAMMA,
            threshold_mode: ThresholdMode::Sat,
            max_tokens: DEFAULT_MAX_TOKENS,
            sampling: Sampling::Multinomial,
            seed: 0,
        }
    }
}

impl DecodingParams {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(EngineError::InvalidParams(format!(
                "alpha {} must be >= 0",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(EngineError::InvalidParams(format!(
                "beta {} outside [0, 1]",
                self.beta
            )));
        }
        match self.threshold_mode {
            ThresholdMode::Sat if !(self.gamma.is_finite() && self.gamma < 0.0) => {
                return Err(EngineError::InvalidParams(format!(
                    "gamma {} must be negative for sat",
                    self.gamma
                )));
            }
            ThresholdMode::Hns if self.gamma == 0.0 || !self.gamma.is_finite() => {
                return Err(EngineError::InvalidParams(
                    "gamma must be nonzero for hns".into(),
                ));
            }
            _ => {}
        }
        if self.max_tokens == 0 {
            return Err(EngineError::InvalidParams("max_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

/// Tokens that survive truncation at one step, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    members: Vec<usize>,
    threshold_used: f64,
}

impl CandidateSet {
    pub fn full(vocab_size: usize) -> Self {
        Self {
            members: (0..vocab_size).collect(),
            threshold_used: 0.0,
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, token: usize) -> bool {
        self.members.binary_search(&token).is_ok()
    }

    pub fn threshold_used(&self) -> f64 {
        self.threshold_used
    }
}

/// `{ y : p(y) >= beta * max_w p(w) }`.
pub fn apc_candidates(p: &ProbVector, beta: f64) -> CandidateSet {
    let cutoff = beta * p.max_prob();
    let members = p
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &py)| py >= cutoff)
        .map(|(i, _)| i)
        .collect();
    CandidateSet {
        members,
        threshold_used: beta,
    }
}

/// Plausibility filter with `beta_t = sigmoid(gamma * H(softmax(expert)))`.
pub fn sat_candidates(expert_logits: &LogitVector, gamma: f64) -> Result<CandidateSet, DistError> {
    let p = softmax(expert_logits);
    let beta_t = dist::h_decay(&p, gamma)?;
    Ok(apc_candidates(&p, beta_t))
}

/// `(1 + alpha) * l - alpha * l_prime`, elementwise.
///
/// Evaluated as `l + alpha * (l - l_prime)` so that `l_prime == l` and
/// `alpha == 0` both return `l` bit for bit.
pub fn contrast(
    l: &LogitVector,
    l_prime: &LogitVector,
    alpha: f64,
) -> Result<LogitVector, DistError> {
    if l.vocab_size() != l_prime.vocab_size() {
        return Err(DistError::LengthMismatch {
            left: l.vocab_size(),
            right: l_prime.vocab_size(),
        });
    }
    if !l.is_fully_finite() || !l_prime.is_fully_finite() {
        return Err(DistError::NonFiniteContrast);
    }
    let scores: Vec<f64> = l
        .scores()
        .iter()
        .zip(l_prime.scores())
        .map(|(&e, &a)| e + alpha * (e - a))
        .collect();
    // large inputs can overflow to +-inf
    LogitVector::new(scores)
}

/// Sets every entry outside `cs` to the mask sentinel.
pub fn mask_to_candidates(l_cd: &LogitVector, cs: &CandidateSet) -> Result<LogitVector, DistError> {
    let mut scores = vec![f64::NEG_INFINITY; l_cd.vocab_size()];
    for &i in cs.members() {
        if let Some(&v) = l_cd.scores().get(i) {
            scores[i] = v;
        }
    }
    LogitVector::new(scores)
}

/// Deterministic token sampler.
///
/// Uses ChaCha8 seeded with [`ChaCha8Rng::seed_from_u64`]; a multinomial
/// draw consumes exactly one `f64` from the stream, greedy draws consume
/// nothing.
#[derive(Debug, Clone)]
pub struct TokenSampler {
    rng: ChaCha8Rng,
}

impl TokenSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn sample(&mut self, l_final: &LogitVector, mode: Sampling) -> usize {
        match mode {
            Sampling::Greedy => dist::argmax(l_final),
            Sampling::Multinomial => {
                let p = softmax(l_final);
                let u: f64 = self.rng.random();
                inverse_cdf(&p, u)
            }
        }
    }
}

/// Smallest index whose cumulative mass exceeds `u`; zero-mass entries are
/// never returned.
fn inverse_cdf(p: &ProbVector, u: f64) -> usize {
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, &pi) in p.probs().iter().enumerate() {
        if pi <= 0.0 {
            continue;
        }
        last_positive = i;
        cumulative += pi;
        if u < cumulative {
            return i;
        }
    }
    last_positive
}

/// One-shot sampling helper over an explicit sampler.
pub fn sample(l_final: &LogitVector, mode: Sampling, sampler: &mut TokenSampler) -> usize {
    sampler.sample(l_final, mode)
}

/// Candidate set and `beta_t` for one step under `params`.
///
/// `beta_t` is 0 when truncation is disabled.
pub fn step_candidates(
    expert: &LogitVector,
    params: &DecodingParams,
) -> Result<(CandidateSet, f64, EntropyBits), DistError> {
    let p = softmax(expert);
    let h = entropy_bits(&p);
    let cs = match params.threshold_mode {
        ThresholdMode::None => CandidateSet::full(expert.vocab_size()),
        ThresholdMode::Apc => apc_candidates(&p, params.beta),
        ThresholdMode::Sat => {
            if params.gamma.is_nan() || params.gamma >= 0.0 {
                return Err(DistError::InvalidGamma(params.gamma));
            }
            apc_candidates(&p, h_decay_from_entropy(h, params.gamma))
        }
        ThresholdMode::Hns => {
            if params.gamma == 0.0 {
                return Err(DistError::InvalidGamma(params.gamma));
            }
            apc_candidates(&p, h_ns_from_entropy(h, p.len(), params.gamma))
        }
    };
    let beta_t = cs.threshold_used();
    Ok((cs, beta_t, h))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub t: usize,
    pub expert_logits: LogitVector,
    pub amateur_logits: LogitVector,
    /// Contrasted logits before masking.
    pub contrasted_logits: LogitVector,
    pub beta_t: f64,
    /// Entropy of the expert distribution, in bits.
    pub entropy_bits: f64,
    pub candidates: Vec<usize>,
    pub chosen_token: usize,
}

impl StepTrace {
    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxTokens,
    EndToken,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub tokens: Vec<usize>,
    pub traces: Vec<StepTrace>,
    pub stop_reason: StopReason,
}

/// Runs the contrastive decoding loop.
///
/// Opens an expert session on `image` and an amateur session on
/// `augmented_image`, then generates until the backend's end token is
/// sampled or `params.max_tokens` tokens exist. Sessions are closed on
/// every exit path.
pub fn decode<B: Backend + ?Sized>(
    backend: &B,
    image: &RasterImage,
    augmented_image: &RasterImage,
    prompt_tokens: &[usize],
    params: &DecodingParams,
) -> Result<DecodeResult, EngineError> {
    params.validate()?;
    if image.dims() != augmented_image.dims() {
        let (h0, w0) = image.dims();
        let (h1, w1) = augmented_image.dims();
        return Err(EngineError::ImageMismatch(h0, w0, h1, w1));
    }
    if prompt_tokens.is_empty() {
        return Err(EngineError::InvalidParams(
            "prompt must contain a token".into(),
        ));
    }
    let mut expert = backend
        .open_session(Some(image))
        .map_err(EngineError::Setup)?;
    let mut amateur = match backend.open_session(Some(augmented_image)) {
        Ok(s) => s,
        Err(e) => {
            let _ = backend.close_session(expert);
            return Err(EngineError::Setup(e));
        }
    };
    let result = run_loop(backend, &mut expert, &mut amateur, prompt_tokens, params);
    let closed_expert = backend.close_session(expert);
    let closed_amateur = backend.close_session(amateur);
    let result = result?;
    closed_expert.map_err(EngineError::Setup)?;
    closed_amateur.map_err(EngineError::Setup)?;
    Ok(result)
}

fn run_loop<B: Backend + ?Sized>(
    backend: &B,
    expert: &mut BackendSession,
    amateur: &mut BackendSession,
    prompt_tokens: &[usize],
    params: &DecodingParams,
) -> Result<DecodeResult, EngineError> {
    let vocab = expert.vocab_size();
    if amateur.vocab_size() != vocab {
        return Err(EngineError::SessionMismatch {
            expert: vocab,
            amateur: amateur.vocab_size(),
        });
    }
    let end_token = expert.end_token();
    let mut sampler = TokenSampler::new(params.seed);
    let mut context = prompt_tokens.to_vec();
    let mut tokens = Vec::new();
    let mut traces = Vec::new();
    let mut stop_reason = StopReason::MaxTokens;

    for t in 0..params.max_tokens {
        let l = fetch(backend, expert, &context, t, vocab, "expert")?;
        let l_prime = fetch(backend, amateur, &context, t, vocab, "amateur")?;
        let l_cd = contrast(&l, &l_prime, params.alpha)?;
        let (cs, beta_t, h) = step_candidates(&l, params)?;
        let masked = mask_to_candidates(&l_cd, &cs)?;
        let y = sampler.sample(&masked, params.sampling);
        traces.push(StepTrace {
            t,
            expert_logits: l,
            amateur_logits: l_prime,
            contrasted_logits: l_cd,
            beta_t,
            entropy_bits: h.value(),
            candidates: cs.members().to_vec(),
            chosen_token: y,
        });
        tokens.push(y);
        context.push(y);
        if y == end_token {
            stop_reason = StopReason::EndToken;
            break;
        }
    }
    Ok(DecodeResult {
        tokens,
        traces,
        stop_reason,
    })
}

fn fetch<B: Backend + ?Sized>(
    backend: &B,
    session: &mut BackendSession,
    context: &[usize],
    step: usize,
    vocab: usize,
    which: &'static str,
) -> Result<LogitVector, EngineError> {
    let logits = backend
        .next_logits(session, context)
        .map_err(|source| EngineError::Backend { step, source })?;
    if logits.vocab_size() != vocab {
        return Err(EngineError::VocabMismatch {
            step,
            which,
            expected: vocab,
            got: logits.vocab_size(),
        });
    }
    Ok(logits)
}
