use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point:?} outside the phase domain of {system}")]
    Domain { system: String, point: Vec<f64> },
    #[error("step-size underflow at t = {t}")]
    Step { t: f64 },
    #[error("chart coordinate {u:?} outside the chart box of section `{section}`")]
    Chart { section: String, u: Vec<f64> },
    #[error("vector field vanishes on section `{section}`")]
    Singularity { section: String },
    #[error("impulses act between different sections")]
    IncompatibleSections,
    #[error("C1 budget exceeded: bound {bound} > budget {budget}")]
    BudgetExceeded { bound: f64, budget: f64 },
    #[error("bump support (center {center:?}, radius {radius}) leaves the target chart")]
    SupportOutsideChart { center: Vec<f64>, radius: f64 },
    #[error("grazing hit at t = {t} (normalized transversality {margin:e})")]
    GrazingHit { t: f64, margin: f64 },
    #[error("hit at chart point {u:?} lies within the boundary margin of `{section}`")]
    BoundaryHit { section: String, u: Vec<f64> },
    #[error("no return to the impulsive region within horizon {horizon}")]
    NoReturn { horizon: f64 },
    #[error("periodic orbit not found: {reason}")]
    NotFound { reason: String },
    #[error("Newton matrix is singular (condition {condition:e})")]
    SingularJacobian { condition: f64 },
    #[error("continuation failed at segment {segment}: {reason}")]
    ContinuationFailed { segment: usize, reason: String },
    #[error("hyperbolization failed after {attempts} attempts")]
    HyperbolizationFailed { attempts: usize },
    #[error("no crossing of the target section within |t| <= {bound}")]
    NoCrossing { bound: f64 },
    #[error("{count} crossings of the target section within |t| <= {bound}")]
    MultipleCrossings { count: usize, bound: f64 },
    #[error("jump {jump}: {source}")]
    Trajectory {
        jump: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("closing failed ({kind}): {detail}")]
    Closing { kind: String, detail: String },
    #[error("unknown example `{0}`")]
    UnknownExample(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
