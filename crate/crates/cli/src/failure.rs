//! Errors mapped onto process exit codes.

use serde::Serialize;

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Debug, Serialize)]
pub struct Failure {
    pub exit_code: i32,
    pub kind: String,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self { exit_code: EXIT_CONFIG, kind: "config".into(), message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { exit_code: EXIT_CONFIG, kind: "io".into(), message: message.into() }
    }

    pub fn missing(message: impl Into<String>) -> Self {
        Self { exit_code: EXIT_CONFIG, kind: "missing_artifacts".into(), message: message.into() }
    }

    pub fn inconclusive(message: impl Into<String>) -> Self {
        Self { exit_code: EXIT_INCONCLUSIVE, kind: "inconclusive".into(), message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<dbarlab::Error> for Failure {
    fn from(e: dbarlab::Error) -> Self {
        let exit_code = if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG };
        Self { exit_code, kind: e.kind().to_string(), message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::io(e.to_string())
    }
}
