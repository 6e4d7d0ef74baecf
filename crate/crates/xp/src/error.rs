use thiserror::Error;

#[derive(Debug, Error)]
pub enum XpError {
    #[error("unknown experiment `{0}` (run `fwdre list`)")]
    UnknownExperiment(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Model(#[from] fwdre_core::Error),
}

impl XpError {
    /// 2 for bad input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            XpError::Model(e) if !e.is_config() => 3,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            XpError::UnknownExperiment(_) => "unknown_experiment",
            XpError::Config(_) => "config",
            XpError::Io { .. } => "io",
            XpError::Model(e) if e.is_config() => "config",
            XpError::Model(_) => "numerical",
        }
    }

    /// Machine-readable record printed on stderr.
    pub fn to_json(&self, experiment: Option<&str>) -> String {
        serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "experiment": experiment,
            "exit_code": self.exit_code(),
        })
        .to_string()
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        XpError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = XpError> = std::result::Result<T, E>;
