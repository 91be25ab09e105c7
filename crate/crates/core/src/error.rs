use thiserror::Error;

/// Crate-wide error. Each variant names the module that raised it so that
/// CLI failures can be traced back without a backtrace.
#[derive(Debug, Error)]
pub enum Error {
    #[error("crystal: {0}")]
    Crystal(String),

    #[error("anharmonic: {0}")]
    Anharmonic(String),

    #[error("fock: {0}")]
    Fock(String),

    #[error("dynamics: {0}")]
    Dynamics(String),

    #[error("protocol: {0}")]
    Protocol(String),

    #[error("spectrum: {0}")]
    Spectrum(String),

    #[error("phasenoise: {0}")]
    PhaseNoise(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }

    /// Short module tag, used in manifests.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Crystal(_) => "crystal",
            Error::Anharmonic(_) => "anharmonic",
            Error::Fock(_) => "fock",
            Error::Dynamics(_) => "dynamics",
            Error::Protocol(_) => "protocol",
            Error::Spectrum(_) => "spectrum",
            Error::PhaseNoise(_) => "phasenoise",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
