use invcloud_core::Error;

/// Command failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration (exit 2).
    Usage(String),
    /// Missing, corrupt or inconsistent input data (exit 3).
    Data(String),
    /// The algorithm ran but failed a gate or did not converge (exit 4).
    Algorithm(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Algorithm(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Algorithm(m) => m,
        }
    }

    /// Wraps a core error with the context of what was being done.
    pub fn context(what: impl std::fmt::Display) -> impl FnOnce(Error) -> CliError {
        let what = what.to_string();
        move |e| {
            let code = CliError::from(e);
            let msg = format!("{what}: {}", code.message());
            match code {
                CliError::Usage(_) => CliError::Usage(msg),
                CliError::Data(_) => CliError::Data(msg),
                CliError::Algorithm(_) => CliError::Algorithm(msg),
            }
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NoContact
            | Error::InsufficientOverlap { .. }
            | Error::InsufficientPoints(_)
            | Error::DegenerateGeometry
            | Error::YawUnobservable { .. }
            | Error::PrealignUnavailable
            | Error::GateFailure { .. } => CliError::Algorithm(msg),
            Error::InvalidArgument(_)
            | Error::OutOfRange { .. }
            | Error::DetectionFailure { .. }
            | Error::Layout(_)
            | Error::NotFound(_)
            | Error::Format(_)
            | Error::Io(_) => CliError::Data(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
