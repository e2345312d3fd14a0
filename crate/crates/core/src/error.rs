use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("empty vector")]
    Empty,
    #[error("every entry is masked")]
    AllMasked,
    #[error("logit {index} is {value}; only finite values or -inf are allowed")]
    InvalidLogit { index: usize, value: f64 },
    #[error("probability {index} is {value}, outside [0, 1]")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probabilities sum to {0}")]
    NotNormalized(f64),
    #[error("invalid gamma {0}")]
    InvalidGamma(f64),
    #[error("vocabulary size mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("contrast inputs must be fully finite")]
    NonFiniteContrast,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("server returned {status}: {message}")]
    Server { status: u16, message: String },
    #[error("backend returned {got} logits, vocabulary is {expected}")]
    VocabMismatch { expected: usize, got: usize },
    #[error("no scripted logits for context {0}")]
    UnknownContext(String),
    #[error("no scripted completion for prompt")]
    MissingCompletion,
    #[error("token context must be append-only")]
    ContextRewrite,
    #[error("empty token context")]
    EmptyContext,
    #[error("invalid logits: {0}")]
    InvalidLogits(#[from] DistError),
    #[error("invalid script: {0}")]
    InvalidScript(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("backend failed at step {step}: {source}")]
    Backend {
        step: usize,
        #[source]
        source: BackendError,
    },
    #[error("backend setup failed: {0}")]
    Setup(#[source] BackendError),
    #[error("step {step}: {which} logits have length {got}, vocabulary is {expected}")]
    VocabMismatch {
        step: usize,
        which: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("expert and amateur sessions disagree on vocabulary ({expert} vs {amateur})")]
    SessionMismatch { expert: usize, amateur: usize },
    #[error("invalid decoding parameters: {0}")]
    InvalidParams(String),
    #[error("images differ in size: {0}x{1} vs {2}x{3}")]
    ImageMismatch(usize, usize, usize, usize),
    #[error(transparent)]
    Dist(#[from] DistError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error("image must be at least 2x2, got {height}x{width}")]
    TooSmall { height: usize, width: usize },
    #[error("pixel buffer has {got} bytes, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("diffusion step {0} outside [1, 1000]")]
    InvalidStep(u32),
    #[error("unknown augmentation {0:?}")]
    UnknownKind(String),
    #[error("png: {0}")]
    Png(String),
}
