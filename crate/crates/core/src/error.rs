use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("node count {0} is below the minimum of 5")]
    TooFewNodes(usize),

    #[error("no grid lattice with {grids} cells fits a {width} x {height} m area with cell aspect in [1/4, 4]")]
    LatticeUnrealizable { grids: usize, width: f64, height: f64 },

    #[error("negative {what}: {value}")]
    Negative { what: &'static str, value: f64 },

    #[error("coincident positions have no defined path loss")]
    CoincidentPositions,

    #[error("sink count {sinks} exceeds grid count {grids}")]
    TooManySinks { sinks: usize, grids: usize },

    #[error("no unvisited neighbour left before reaching the destination")]
    DeadEnd,

    #[error("destination {destination} is unreachable from {origin}")]
    Unreachable { origin: usize, destination: usize },

    #[error("no ant completed a path although {destination} is reachable from {origin}")]
    NoAntCompleted { origin: usize, destination: usize },

    #[error("zero-length path has no fitness")]
    ZeroLengthPath,

    #[error("packet {0} was not delivered")]
    Undelivered(u64),

    #[error("energy rate must be positive, got {0}")]
    NonPositiveRate(f64),

    #[error("config: {0}")]
    Config(String),

    #[error("graph file line {line}: {reason}")]
    GraphFile { line: usize, reason: String },

    #[error("run failed for {param} = {value} (seed {seed}): {source}")]
    SweepRun {
        param: String,
        value: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
