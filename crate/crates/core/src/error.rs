use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate snapshot matrix: no singular value survives the rank policy")]
    DegenerateSnapshots,

    #[error("invalid rank policy: {0}")]
    InvalidRankPolicy(String),

    #[error("eigenvalue iteration did not converge after {iterations} iterations (matrix order {order})")]
    NoConvergence { iterations: usize, order: usize },

    #[error("integration blow-up at t = {t}")]
    BlowUp { t: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("hierarchy capacity exceeded: {entries} state entries > cap {cap} (depth {depth}, {terms} bath terms); reduce hierarchy.depth")]
    Capacity {
        entries: usize,
        cap: usize,
        depth: usize,
        terms: usize,
    },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("kernel extraction failed for basis element {label}: {source}")]
    Kernel {
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::InvalidRankPolicy(_) => 2,
            Error::Capacity { .. } => 4,
            Error::Kernel { source, .. } => source.exit_code(),
            Error::Io { .. } | Error::Json(_) => 2,
            _ => 3,
        }
    }

    /// Short machine-readable tag for the failure class.
    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            4 => "capacity",
            _ => "numerical",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
