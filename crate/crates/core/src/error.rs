use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("coincident nodes: {0}")]
    CoincidentNodes(String),

    #[error("angle {angle_deg:.4} deg outside (-90, 90) deg: {context}")]
    AngleOutOfRange { angle_deg: f64, context: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid sub-array length L={sub_len} for M={m_elements}, K={k_targets}")]
    InvalidSubarray {
        sub_len: usize,
        m_elements: usize,
        k_targets: usize,
    },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("solver did not converge after {iterations} iterations (primal residual {primal_residual:.3e}, dual residual {dual_residual:.3e})")]
    NotConverged {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
    },

    #[error("singular Fisher information matrix (condition number {condition:.3e})")]
    SingularFim { condition: f64 },

    #[error("singular model: {0}")]
    SingularModel(String),

    #[error("zero gradient: target at array endfire")]
    ZeroGradient,

    #[error("zero vector: {0}")]
    ZeroVector(String),

    #[error("dictionary atoms became numerically dependent at iteration {0}")]
    DictionaryDegenerate(usize),

    #[error("estimate count {estimates} does not match truth count {truth}")]
    CountMismatch { estimates: usize, truth: usize },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
