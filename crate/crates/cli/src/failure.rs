//! Error classification for exit codes.

use std::fmt;

/// Exit code 2: the user's inputs (files, flags, config) are unusable.
pub const EXIT_BAD_INPUT: i32 = 2;
/// Exit code 1: anything else, such as an output that cannot be written.
pub const EXIT_INTERNAL: i32 = 1;

#[derive(Debug)]
pub enum Failure {
    BadInput(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::BadInput(_) => EXIT_BAD_INPUT,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn bad_input(msg: impl fmt::Display) -> Self {
        Failure::BadInput(anyhow::anyhow!("{msg}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (Failure::BadInput(e) | Failure::Internal(e)) = self;
        // Core errors often repeat their source in their own message; only
        // append causes that add something.
        let mut text = String::new();
        for cause in e.chain() {
            let cause = cause.to_string();
            if text.is_empty() {
                text = cause;
            } else if !text.contains(&cause) {
                text = format!("{text}: {cause}");
            }
        }
        f.write_str(&text)
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

/// Tags an error with its exit-code class.
pub trait Classify<T> {
    fn input(self) -> CliResult<T>;
    fn internal(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> CliResult<T> {
        self.map_err(|e| Failure::BadInput(e.into()))
    }

    fn internal(self) -> CliResult<T> {
        self.map_err(|e| Failure::Internal(e.into()))
    }
}
