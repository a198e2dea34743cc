use serde::{Deserialize, Serialize};

/// Whether a candidate could be run on a test case, and if not, why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum ExecutabilityStatus {
    Executable,
    NoCode,
    SyntaxError {
        message: String,
    },
    RuntimeFailure {
        tc_id: String,
        tick: usize,
        message: String,
    },
    /// `tick` is absent when the handshake itself timed out.
    Timeout {
        tc_id: String,
        tick: Option<usize>,
    },
}

impl ExecutabilityStatus {
    pub fn is_executable(&self) -> bool {
        matches!(self, ExecutabilityStatus::Executable)
    }

    /// Short description of the failure class with its diagnostic.
    pub fn describe(&self) -> String {
        match self {
            ExecutabilityStatus::Executable => "executable".into(),
            ExecutabilityStatus::NoCode => "no controller code found in the response".into(),
            ExecutabilityStatus::SyntaxError { message } => format!("syntax error: {}", one_line(message)),
            ExecutabilityStatus::RuntimeFailure { tick, message, .. } => {
                format!("runtime failure at tick {tick}: {}", one_line(message))
            }
            ExecutabilityStatus::Timeout { tick: Some(tick), .. } => format!("timed out at tick {tick}"),
            ExecutabilityStatus::Timeout { tick: None, .. } => "timed out during start-up".into(),
        }
    }
}

fn one_line(text: &str) -> String {
    let joined = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" | ");
    if joined.is_empty() {
        "no diagnostic".into()
    } else {
        joined
    }
}
