use std::fmt;
use std::path::Path;

use leadvar::ErrorKind;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(leadvar::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Core(leadvar::Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
    }

    /// 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<leadvar::Error> for CliError {
    fn from(e: leadvar::Error) -> Self {
        CliError::Core(e)
    }
}
