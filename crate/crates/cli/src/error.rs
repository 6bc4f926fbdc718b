use spectral_spde::SpdeError;

/// Process exit codes.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: msg.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_DATA, message: msg.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Default classification. Bad values mostly come from the configuration,
/// so invalid arguments count as usage errors; callers reading data files
/// reclassify with [`Context::data`].
impl From<SpdeError> for CliError {
    fn from(e: SpdeError) -> Self {
        let code = match e {
            SpdeError::InvalidArgument(_) => EXIT_USAGE,
            SpdeError::Parse { .. } => EXIT_USAGE,
            SpdeError::Io(_) => EXIT_DATA,
            SpdeError::NumericalDegeneracy(_) => EXIT_NUMERICAL,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(format!("i/o error: {e}"))
    }
}

pub trait Context<T> {
    /// Reports any failure as a data error, prefixed with `what`.
    fn data(self, what: &str) -> CliResult<T>;
}

impl<T, E: std::fmt::Display> Context<T> for std::result::Result<T, E> {
    fn data(self, what: &str) -> CliResult<T> {
        self.map_err(|e| CliError::data(format!("{what}: {e}")))
    }
}
