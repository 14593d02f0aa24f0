use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::enumerate::{Enumeration, EnumStats, SpaceDomains};
use crate::layout::Layout;
use crate::optimize::GeomSolution;
use crate::problem::Problem;

pub const SOLUTION_SCHEMA: &str = "toposketch-solutions/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyRecord {
    pub index: usize,
    pub signature: BTreeMap<String, String>,
    pub domains: Vec<SpaceDomains>,
    pub witness: Layout,
}

/// Enumeration (and optionally optimization) results of one problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub schema: String,
    pub problem: String,
    pub problem_hash: String,
    /// Complete topological labelings reached.
    pub n1: u64,
    /// Consistent topologies.
    pub n2: u64,
    pub stats: EnumStats,
    pub topologies: Vec<TopologyRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub optima: Vec<GeomSolution>,
}

impl SolutionFile {
    pub fn new(problem: &Problem, e: &Enumeration) -> SolutionFile {
        SolutionFile {
            schema: SOLUTION_SCHEMA.into(),
            problem: problem.spec.name.clone(),
            problem_hash: super::problem_hash(&problem.spec),
            n1: e.stats.candidates,
            n2: e.stats.consistent,
            stats: e.stats.clone(),
            topologies: e
                .topologies
                .iter()
                .map(|t| TopologyRecord {
                    index: t.index,
                    signature: t.signature.0.clone(),
                    domains: t.domains.clone(),
                    witness: t.witness.clone(),
                })
                .collect(),
            optima: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution files always serialize")
    }

    pub fn from_json(text: &str) -> Result<SolutionFile, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Space ids referenced by the file that the problem does not define.
    pub fn unknown_spaces(&self, problem: &Problem) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |id: &str| {
            if problem.space(id).is_none() && !out.iter().any(|o| o == id) {
                out.push(id.to_string());
            }
        };
        for t in &self.topologies {
            t.domains.iter().for_each(|d| check(&d.id));
            t.witness.spaces.iter().for_each(|p| check(&p.id));
            for k in t.signature.keys() {
                if let Some(rest) = k.strip_prefix("pos:") {
                    rest.split(':').for_each(&mut check);
                }
            }
        }
        for g in &self.optima {
            g.layout.spaces.iter().for_each(|p| check(&p.id));
        }
        out
    }
}
