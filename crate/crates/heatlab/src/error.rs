use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown space family `{0}`")]
    UnknownFamily(String),
    #[error("invalid space spec: {0}")]
    BadSpec(String),
    #[error("vertex count {count} exceeds cap {cap}")]
    TooLarge { count: usize, cap: usize },
    #[error("graph is not connected")]
    Disconnected,
    #[error("invalid graph data: {0}")]
    BadGraph(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("vertex {0} out of range")]
    Vertex(usize),
    #[error("invalid scaling function: {0}")]
    BadScaling(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("degenerate annulus: {0}")]
    DegenerateAnnulus(String),
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("time {t} outside schedule span [{start}, {end}]")]
    OutsideSchedule { t: f64, start: f64, end: f64 },
    #[error("grid misalignment: {0}")]
    Misaligned(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("unsupported report schema version {0}")]
    Schema(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
