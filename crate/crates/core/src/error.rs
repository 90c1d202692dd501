use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum CqdError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("system size {n} exceeds the configured cap of {cap} sites")]
    CapExceeded { n: usize, cap: usize },

    #[error("pauli strings {0} and {1} do not commute")]
    NonCommuting(String, String),

    #[error("invalid pauli string {0:?}")]
    ParsePauli(String),

    #[error("complex coefficient {re}+{im}i rejected: pauli sums must be hermitian")]
    ComplexCoefficient { re: f64, im: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration:\n{}", format_issues(.0))]
    InvalidConfig(Vec<ConfigIssue>),

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One problem found in an experiment configuration, located by key path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "`{}`: {}", self.path, self.message)
    }
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T> = std::result::Result<T, CqdError>;

impl CqdError {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        CqdError::Precondition(msg.into())
    }

    pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(CqdError::Dimension { expected, got })
        }
    }
}
