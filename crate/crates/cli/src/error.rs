use std::fmt;
use std::process::ExitCode;

/// Failure classes, printed as `error[class]: message`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    /// A check ran and found a mismatch (verify-utm).
    Check,
    /// Bad flags or an invalid config.
    Usage,
    /// An input file could not be parsed or failed validation.
    Input,
    /// Reading or writing a file failed.
    Io,
    /// The endpoint refused us or the key is missing.
    Remote,
}

impl Class {
    pub fn name(self) -> &'static str {
        match self {
            Class::Check => "check",
            Class::Usage => "usage",
            Class::Input => "input",
            Class::Io => "io",
            Class::Remote => "remote",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Class::Check => 1,
            Class::Usage => 2,
            Class::Input => 3,
            Class::Io => 4,
            Class::Remote => 5,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub class: Class,
    pub message: String,
}

impl Failure {
    pub fn new(class: Class, message: impl Into<String>) -> Self {
        Failure {
            class,
            message: message.into(),
        }
    }

    pub fn report(&self) -> ExitCode {
        // one line, whatever the message held
        let line = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        eprintln!("error[{}]: {line}", self.class.name());
        ExitCode::from(self.class.code())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.class.name(), self.message)
    }
}

pub trait Classify<T> {
    fn class(self, class: Class, context: impl FnOnce() -> String) -> Result<T, Failure>;
}

impl<T, E: fmt::Display> Classify<T> for Result<T, E> {
    fn class(self, class: Class, context: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(class, format!("{}: {e}", context())))
    }
}
