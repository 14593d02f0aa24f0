use super::problem_file::{load_problem, IoError};
use crate::problem::Problem;

const BUNDLED: &[(&str, &str)] = &[
    ("pfk", include_str!("../../benchmarks/pfk.toml")),
    ("lr", include_str!("../../benchmarks/lr.toml")),
    ("tng", include_str!("../../benchmarks/tng.toml")),
    ("col9", include_str!("../../benchmarks/col9.toml")),
    ("mac", include_str!("../../benchmarks/mac.toml")),
    ("mac_interpretation", include_str!("../../benchmarks/mac_interpretation.toml")),
    ("house2f", include_str!("../../benchmarks/house2f.toml")),
    ("office_patio", include_str!("../../benchmarks/office_patio.toml")),
    ("office_patio_interpretation", include_str!("../../benchmarks/office_patio_interpretation.toml")),
];

/// Names and documents of the bundled problems.
pub fn bundled() -> &'static [(&'static str, &'static str)] {
    BUNDLED
}

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|b| b.0).collect()
}

pub fn load_bundled(name: &str) -> Result<Problem, IoError> {
    let (_, text) = BUNDLED
        .iter()
        .find(|b| b.0 == name)
        .ok_or_else(|| IoError::UnknownBenchmark(name.to_string()))?;
    load_problem(text)
}
