use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numeric failure{}: {} [{}]", member_suffix(*member), source, source.name())]
    Numeric {
        member: Option<usize>,
        source: krylov_qfi::Error,
    },

    #[error("I/O error at {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

fn member_suffix(member: Option<usize>) -> String {
    member.map(|i| format!(" in member {i}")).unwrap_or_default()
}

impl CliError {
    /// 2 for configuration, 3 for numeric failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numeric { .. } => 3,
            Self::Io { .. } => 4,
        }
    }

    pub fn numeric(source: krylov_qfi::Error) -> Self {
        Self::Numeric { member: None, source }
    }

    pub fn in_member(member: usize) -> impl FnOnce(krylov_qfi::Error) -> Self {
        move |source| Self::Numeric {
            member: Some(member),
            source,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }
}

impl From<krylov_qfi::Error> for CliError {
    fn from(e: krylov_qfi::Error) -> Self {
        Self::numeric(e)
    }
}
