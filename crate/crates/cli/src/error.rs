use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: statelp::Error,
    },

    #[error("writing {}: {source}", .path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn stage(stage: &'static str) -> impl FnOnce(statelp::Error) -> CliError {
        move |source| CliError::Stage { stage, source }
    }

    /// 2 for configuration and data problems, 4 for identification failure,
    /// 3 for any other estimation or output error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { source, .. } => match source {
                statelp::Error::Identification { .. } => 4,
                statelp::Error::Ingestion { .. }
                | statelp::Error::QuarterFormat(_)
                | statelp::Error::MissingSeries(_)
                | statelp::Error::Io(_)
                | statelp::Error::Csv(_) => 2,
                _ => 3,
            },
            CliError::Output { .. } => 3,
        }
    }
}
