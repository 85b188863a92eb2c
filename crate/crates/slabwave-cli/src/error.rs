//! Exit-code contract: 0 ok, 1 verify failure, 2 config, 3 material,
//! 4 no guided mode, 5 no phase match, 6 numerical failure.

use slabwave::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: String) -> Self {
        CliError { code, message }
    }

    pub fn verify(message: String) -> Self {
        Self::new(1, message)
    }

    pub fn config(message: String) -> Self {
        Self::new(2, message)
    }

    pub fn material(message: String) -> Self {
        Self::new(3, message)
    }

    pub fn io(context: &str, e: std::io::Error) -> Self {
        Self::new(2, format!("{context}: {e}"))
    }

    /// Prefixes the message, keeping the code.
    pub fn context(self, what: &str) -> Self {
        CliError { code: self.code, message: format!("{what}: {}", self.message) }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidMaterial(_) | Error::Superluminal(_) | Error::SingularMaterial { .. } => 3,
        Error::NoMode { .. } | Error::NoContrast => 4,
        Error::NoMatch(_) => 5,
        Error::InvalidSlab(_) | Error::InvalidArgument(_) | Error::TailOverflow(_) | Error::NotPerturbative(_) => 2,
        Error::GridTooCoarse(_)
        | Error::DerivativeUnstable(_)
        | Error::DegenerateCoupling(_)
        | Error::NonDiagonalizable(_)
        | Error::DegenerateGram(_)
        | Error::IncompleteBasis(_)
        | Error::TruncationLeak(_) => 6,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::new(exit_code(&e), e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}
