use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// A failed run with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const VALIDATION: u8 = 2;
    pub const VIOLATION: u8 = 3;
    pub const NUMERICAL: u8 = 4;

    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: Self::VALIDATION, message: message.into() }
    }

    pub fn violation(message: impl Into<String>) -> Self {
        Self { code: Self::VIOLATION, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<fracstep::Error> for Failure {
    fn from(e: fracstep::Error) -> Self {
        use fracstep::Error::*;
        let code = match e {
            NonConvergence { .. }
            | SoeNotCertified(_)
            | ToleranceUnreachable { .. }
            | SingularSystem { .. }
            | DegenerateKernel { .. }
            | NonFinite { .. } => Failure::NUMERICAL,
            _ => Failure::VALIDATION,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::validation(format!("i/o error: {e}"))
    }
}

/// Overlay the flags that were given on the contents of a JSON config file.
/// Keys are the long flag names.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = file else {
        return Ok(serde_json::from_value(serde_json::to_value(flags).expect("flags serialize")).expect("flags round trip"));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("cannot read config {}: {e}", path.display())))?;
    let mut base: Map<String, Value> = match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => m,
        Ok(_) => return Err(Failure::validation("config file must hold a JSON object")),
        Err(e) => return Err(Failure::validation(format!("bad config {}: {e}", path.display()))),
    };
    if let Value::Object(given) = serde_json::to_value(flags).expect("flags serialize") {
        for (k, v) in given {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| Failure::validation(format!("bad config: {e}")))
}

/// `# key: value` lines echoing a resolved configuration.
pub fn header<T: Serialize>(command: &str, config: &T, extra: &[(&str, String)]) -> String {
    let mut s = format!("# fracstep {command}\n");
    if let Value::Object(m) = serde_json::to_value(config).expect("config serializes") {
        for (k, v) in m {
            if v.is_null() {
                continue;
            }
            let shown = match v {
                Value::String(s) => s,
                other => other.to_string(),
            };
            s.push_str(&format!("# {k}: {shown}\n"));
        }
    }
    for (k, v) in extra {
        s.push_str(&format!("# {k}: {v}\n"));
    }
    s
}

pub fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::validation(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
