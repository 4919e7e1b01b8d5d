use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] pso_esn::data::DataError),
    #[error(transparent)]
    Esn(#[from] pso_esn::esn::EsnError),
    #[error(transparent)]
    Hybrid(#[from] pso_esn::hybrid::HybridError),
    #[error("{path}: malformed result file: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("{0}")]
    Resume(String),
    #[error("no successful runs: {0}")]
    NoSuccessfulRuns(String),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
