use collapse::Error;

/// Failure of one invocation, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments; every problem found is listed.
    Validation(Vec<String>),
    /// The numerics failed (blow-up, no plateau, too many failed runs …).
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError::Validation(vec![message.into()])
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError::Io(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub fn report(&self) -> String {
        match self {
            CliError::Validation(errors) => {
                let mut text = format!("invalid configuration ({} problem(s)):", errors.len());
                for e in errors {
                    text.push_str("\n  - ");
                    text.push_str(e);
                }
                text
            }
            CliError::Numerical(e) => format!("numerical failure: {e}"),
            CliError::Io(e) => format!("i/o error: {e}"),
        }
    }
}

fn is_numerical(e: &Error) -> bool {
    match e {
        Error::BlowUp { .. }
        | Error::NoPlateau
        | Error::Integration(_)
        | Error::EnsembleBlowUps { .. }
        | Error::NoCompletedRuns => true,
        Error::AtPoint { source, .. } => is_numerical(source),
        _ => false,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if is_numerical(&e) {
            CliError::Numerical(e.to_string())
        } else {
            CliError::validation(e.to_string())
        }
    }
}
