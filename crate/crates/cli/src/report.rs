//! Benchmark report: counts and wall-clock per problem.

use std::fmt::Write;

use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub problem: String,
    pub spaces: usize,
    /// Complete topological labelings.
    pub n1: u64,
    /// Consistent topologies.
    pub n2: u64,
    pub wall_ms: f64,
    pub truncated: bool,
}

impl Row {
    pub fn ratio(&self) -> Option<f64> {
        (self.n1 > 0).then(|| self.n2 as f64 / self.n1 as f64)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub rows: Vec<Row>,
    pub hardware: String,
}

impl Report {
    pub fn new(rows: Vec<Row>, jobs: usize) -> Report {
        let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
        let hardware = format!(
            "{}-{}, {threads} hardware threads, {jobs} worker threads; wall-clock times are for this machine only",
            std::env::consts::OS,
            std::env::consts::ARCH
        );
        Report { rows, hardware }
    }

    pub fn markdown(&self) -> String {
        let mut s = String::from("| problem | spaces | N1 | N2 | N2/N1 | wall-clock (ms) |\n|---|---:|---:|---:|---:|---:|\n");
        for r in &self.rows {
            let ratio = r.ratio().map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
            let mark = if r.truncated { " (truncated)" } else { "" };
            let _ = writeln!(s, "| {}{mark} | {} | {} | {} | {ratio} | {:.1} |", r.problem, r.spaces, r.n1, r.n2, r.wall_ms);
        }
        let _ = writeln!(s, "\nHardware: {}", self.hardware);
        s
    }
}
