use std::path::Path;

use sha2::{Digest, Sha256};

use crate::problem::{Problem, ProblemError, ProblemSpec};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid problem: {0}")]
    Invalid(#[from] ProblemError),
    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),
}

/// Parses and validates a problem document.
pub fn load_problem(text: &str) -> Result<Problem, IoError> {
    let spec: ProblemSpec = toml::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
    Ok(Problem::new(spec)?)
}

pub fn load_problem_file(path: &Path) -> Result<Problem, IoError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| IoError::Read { path: path.display().to_string(), source })?;
    load_problem(&text)
}

/// Canonical text of a problem: fixed field order, sorted maps, defaults
/// omitted where the schema allows it.
pub fn save_problem(spec: &ProblemSpec) -> String {
    toml::to_string(spec).expect("problem specs always serialize")
}

/// SHA-256 of the canonical text.
pub fn problem_hash(spec: &ProblemSpec) -> String {
    hex::encode(Sha256::digest(save_problem(spec).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_problem_round_trips() {
        for (name, text) in crate::io::bundled() {
            let p = load_problem(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            let again = load_problem(&save_problem(&p.spec)).unwrap();
            assert_eq!(again.spec, p.spec, "{name}");
            assert_eq!(save_problem(&again.spec), save_problem(&p.spec));
        }
    }

    #[test]
    fn unknown_constraint_kind_is_rejected() {
        let text = r#"
schema = "toposketch/1"
name = "x"
[[units]]
id = "u"
L = { min = 2, max = 2 }
W = { min = 2, max = 2 }
[[constraints]]
kind = "teleport"
space = "a"
"#;
        let err = load_problem(text).unwrap_err();
        assert!(matches!(err, IoError::Parse(_)), "{err}");
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn empty_unit_is_valid() {
        let text = r#"
schema = "toposketch/1"
name = "empty"
[[units]]
id = "u"
L = { min = 3, max = 3 }
W = { min = 2, max = 2 }
total_recovery = false
"#;
        let p = load_problem(text).unwrap();
        assert_eq!(p.num_spaces(), 0);
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let text = "schema = \"toposketch/0\"\nname = \"x\"\nunits = []\n";
        assert!(matches!(load_problem(text), Err(IoError::Invalid(ProblemError::Schema(_)))));
    }
}
