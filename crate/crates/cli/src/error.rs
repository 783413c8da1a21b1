use circuflow_core::design::DesignError;
use circuflow_core::export::ExportError;
use circuflow_core::io::LoadError;
use circuflow_core::metrics::MetricsError;
use circuflow_core::SimError;
use circuflow_robot::RobotError;

/// Everything a command can fail with, grouped by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        if e.is_content_error() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        match e {
            DesignError::Simulation { source, name } => {
                let inner = CliError::from(source);
                let msg = format!("simulation of `{name}` failed: {inner}");
                match inner {
                    CliError::Numeric(_) => CliError::Numeric(msg),
                    _ => CliError::Validation(msg),
                }
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        match e {
            ExportError::Io(source) => CliError::io("output", source),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<RobotError> for CliError {
    fn from(e: RobotError) -> Self {
        match e {
            RobotError::Io { path, source } => CliError::Io { path, source },
            RobotError::UnknownPolicy(_) => CliError::Usage(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::Validation("x".into()).exit_code(), 2);
        assert_eq!(CliError::Numeric("x".into()).exit_code(), 3);
        let missing = LoadError::UnknownBundled("nope".into());
        assert_eq!(CliError::from(missing).exit_code(), 1);
        assert_eq!(
            CliError::from(SimError::UnknownMethod("rk9".into())).exit_code(),
            2
        );
    }
}
