//! Exit codes and the machine-readable error object written to stderr.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// Bad flags or config (exit 1).
    Usage,
    /// A solver failed (exit 2).
    Numerical,
    /// A certificate could not be decided at working precision (exit 3).
    Undecided,
}

impl Kind {
    pub fn code(self) -> i32 {
        match self {
            Kind::Usage => 1,
            Kind::Numerical => 2,
            Kind::Undecided => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { kind: Kind::Usage, message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self, "exit_code": self.kind.code() }).to_string()
    }
}

impl From<ratdyn::Error> for Failure {
    fn from(e: ratdyn::Error) -> Self {
        let kind = if e.is_usage() {
            Kind::Usage
        } else if e.is_undecided() {
            Kind::Undecided
        } else {
            Kind::Numerical
        };
        Failure { kind, message: e.to_string() }
    }
}
