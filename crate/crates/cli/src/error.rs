use std::fmt;
use std::path::PathBuf;

/// Process exit codes.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISSING: i32 = 3;
pub const EXIT_FORMAT: i32 = 4;
pub const EXIT_NUMERIC: i32 = 5;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    /// An input produced by an earlier stage is absent.
    Missing { path: PathBuf, stage: &'static str },
    Core(gra_core::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use gra_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Missing { .. } => EXIT_MISSING,
            CliError::Core(e) => match e {
                E::Config(_) => EXIT_CONFIG,
                E::ColumnSet(_)
                | E::Input(_)
                | E::Shape(_)
                | E::Schema(_)
                | E::Format(_)
                | E::Version { .. }
                | E::Io(_)
                | E::Json(_) => EXIT_FORMAT,
                E::DegenerateColumn(_)
                | E::MissingAllValues(_)
                | E::Numeric { .. }
                | E::State(_)
                | E::Training { .. }
                | E::Evaluation(_) => EXIT_NUMERIC,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Missing { path, stage } => {
                write!(f, "missing artifact {}: run `gra {stage}` first", path.display())
            }
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<gra_core::Error> for CliError {
    fn from(e: gra_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(gra_core::Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(gra_core::Error::Json(e))
    }
}
