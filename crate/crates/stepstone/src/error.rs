use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),

    #[error("ellipticity violated at site {site}: size {value} outside [{lo}, {hi}]")]
    Ellipticity { site: i64, value: f64, lo: f64, hi: f64 },

    #[error("site {site} outside window of length {len}")]
    OutOfWindow { site: i64, len: usize },

    #[error("window of length {expected} required, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("map is not non-decreasing between inputs {x0} and {x1}")]
    NonMonotone { x0: f64, x1: f64 },

    #[error("unknown window functional: {0}")]
    UnknownFunctional(String),

    #[error("ring boundary mode required for {0}")]
    RingRequired(&'static str),

    #[error("ring length {len} exceeds the cap {cap} for {what}")]
    RingTooLarge { len: usize, cap: usize, what: &'static str },

    #[error("ring length {len} below the anti-wrap requirement {need}")]
    RingTooSmall { len: usize, need: usize },

    #[error("requested time {t} beyond simulated horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },

    #[error("need at least {need} {what}, got {got}")]
    TooFewSamples { what: &'static str, need: usize, got: usize },

    #[error("no meeting time accumulated; cannot estimate")]
    NoMeetings,

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("config line {line}: unknown key `{key}` in section [{section}]")]
    UnknownKey { line: usize, section: String, key: String },

    #[error("report schema version {got} unsupported (expected {expected})")]
    SchemaVersion { expected: u32, got: u32 },

    #[error("malformed environment file: {0}")]
    EnvFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
