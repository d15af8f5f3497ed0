use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{} configuration error(s):\n{}", .0.len(), join_issues(.0))]
    ConfigList(Vec<ConfigIssue>),
    #[error("numerical abort at t = {t}: {reason}")]
    Numerical { t: f64, reason: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_issues(v: &[ConfigIssue]) -> String {
    v.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

pub type Result<T> = std::result::Result<T, Error>;
