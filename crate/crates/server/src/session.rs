//! Per-session state and the engine calls behind each endpoint.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use toposketch::enumerate::{
    diff, differing_spaces, hypothetical_filter, Difference, EnumStats, Enumeration, Progress, ProgressSnapshot,
    Refinement, Sketch, SpaceDomains, Topology, Witness,
};
use toposketch::io::{
    problem_hash, rects_from_domains, rects_from_layout, render_svg, SolutionFile, SvgStyle,
};
use toposketch::layout::{ContourSize, Layout};
use toposketch::model::Model;
use toposketch::optimize::{build_cost, optimize, rank, summarize, Optimized, TimingSummary};
use toposketch::problem::{Attr, ConstraintSpec, CostSpec, Problem};

use crate::error::{ApiError, ApiResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Done,
    Cancelled,
    Failed,
}

#[derive(Debug)]
pub struct Job {
    pub id: usize,
    pub status: JobStatus,
    pub progress: Arc<Progress>,
    pub started: Instant,
    pub elapsed_ms: Option<f64>,
    pub stats: Option<EnumStats>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TopologySummary {
    pub index: usize,
    pub signature: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JobView {
    pub id: usize,
    pub status: JobStatus,
    pub progress: ProgressSnapshot,
    pub elapsed_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n1: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n2: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<EnumStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topologies: Option<Vec<TopologySummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub id: u64,
    pub name: String,
    pub problem_hash: String,
    pub units: Vec<String>,
    pub spaces: Vec<String>,
    pub constraints: usize,
    /// The model fails before any search.
    pub infeasible: bool,
    /// Topologies of the latest finished enumeration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topologies: Option<usize>,
    pub jobs: usize,
    pub cost: CostSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TopologyView {
    pub index: usize,
    pub signature: BTreeMap<String, String>,
    pub domains: Vec<SpaceDomains>,
    pub witness: Layout,
    /// Midpoint rendering of the domains.
    pub sketch_svg: String,
    pub witness_svg: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiffView {
    pub a: usize,
    pub b: usize,
    pub differences: Vec<Difference>,
    pub spaces: BTreeSet<String>,
    /// Sketches with the differing spaces highlighted.
    pub svg_a: String,
    pub svg_b: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FilterRequest {
    pub constraints: Vec<ConstraintSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FilterView {
    pub total: usize,
    pub survivors: Vec<usize>,
    pub excluded: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefineRequest {
    pub space: String,
    pub attr: Attr,
    pub min: i64,
    pub max: i64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefineView {
    /// Whether the last action was applied.
    pub consistent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub sketch: Sketch,
    pub sketch_svg: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct OptimizeRequest {
    /// Optimal layouts to list; all of them when absent.
    #[serde(default)]
    pub max_solutions: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizeView {
    #[serde(flatten)]
    pub result: Optimized,
    pub svg: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankEntry {
    pub position: usize,
    pub topology: usize,
    pub cost: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankView {
    pub ranking: Vec<RankEntry>,
    pub timing: TimingSummary,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CostView {
    pub cost: CostSpec,
    /// Integer scale of the cost variable.
    pub scale: i64,
}

#[derive(Debug)]
pub struct Session {
    pub id: u64,
    pub problem: Arc<Problem>,
    pub model: Model,
    pub cost: CostSpec,
    pub enumeration: Option<Enumeration>,
    pub refinements: BTreeMap<usize, Refinement>,
    pub optimized: BTreeMap<usize, Optimized>,
    pub jobs: Vec<Job>,
}

fn style(highlight: BTreeSet<String>, title: String) -> SvgStyle {
    SvgStyle { highlight, title: Some(title), ..SvgStyle::default() }
}

/// Unit sizes for a sketch: the witness contours, or the largest contours.
fn units_of(problem: &Problem, witness: &Layout) -> Vec<ContourSize> {
    if !witness.units.is_empty() {
        return witness.units.clone();
    }
    problem
        .spec
        .units
        .iter()
        .map(|u| ContourSize { id: u.id.clone(), l: u.l.max.unwrap_or(1), w: u.w.max.unwrap_or(1) })
        .collect()
}

impl Session {
    pub fn new(id: u64, problem: Problem) -> Session {
        let problem = Arc::new(problem);
        let model = Model::build(problem.clone());
        Session {
            id,
            cost: problem.spec.cost.clone(),
            problem,
            model,
            enumeration: None,
            refinements: BTreeMap::new(),
            optimized: BTreeMap::new(),
            jobs: Vec::new(),
        }
    }

    pub fn view(&self) -> SessionView {
        let spec = &self.problem.spec;
        SessionView {
            id: self.id,
            name: spec.name.clone(),
            problem_hash: problem_hash(spec),
            units: spec.units.iter().map(|u| u.id.clone()).collect(),
            spaces: spec.spaces.iter().map(|s| s.id.clone()).collect(),
            constraints: spec.constraints.len(),
            infeasible: self.model.infeasible,
            topologies: self.enumeration.as_ref().map(|e| e.topologies.len()),
            jobs: self.jobs.len(),
            cost: self.cost.clone(),
        }
    }

    pub fn running(&self) -> bool {
        self.jobs.iter().any(|j| j.status == JobStatus::Running)
    }

    pub fn job(&self, id: usize) -> ApiResult<&Job> {
        self.jobs.get(id).ok_or_else(|| ApiError::not_found(format!("no job {id} in session {}", self.id)))
    }

    pub fn job_view(&self, id: usize) -> ApiResult<JobView> {
        let j = self.job(id)?;
        let done = j.status == JobStatus::Done || j.status == JobStatus::Cancelled;
        let topologies = done
            .then(|| self.enumeration.as_ref())
            .flatten()
            .map(|e| e.topologies.iter().map(|t| TopologySummary { index: t.index, signature: t.signature.0.clone() }).collect());
        Ok(JobView {
            id: j.id,
            status: j.status,
            progress: j.progress.snapshot(),
            elapsed_ms: j.elapsed_ms.unwrap_or_else(|| j.started.elapsed().as_secs_f64() * 1e3),
            n1: j.stats.as_ref().map(|s| s.candidates),
            n2: j.stats.as_ref().map(|s| s.consistent),
            stats: j.stats.clone(),
            topologies,
            error: j.error.clone(),
        })
    }

    /// Stores a finished enumeration; earlier refinements and optima
    /// refer to the old indices and are dropped.
    pub fn finish_job(&mut self, id: usize, result: Result<Enumeration, String>) {
        let job = &mut self.jobs[id];
        job.elapsed_ms = Some(job.started.elapsed().as_secs_f64() * 1e3);
        match result {
            Ok(e) => {
                job.status = if e.stats.cancelled { JobStatus::Cancelled } else { JobStatus::Done };
                job.stats = Some(e.stats.clone());
                self.enumeration = Some(e);
                self.refinements.clear();
                self.optimized.clear();
            }
            Err(msg) => {
                job.status = JobStatus::Failed;
                job.error = Some(msg);
            }
        }
    }

    pub fn enumeration(&self) -> ApiResult<&Enumeration> {
        self.enumeration.as_ref().ok_or_else(|| ApiError::conflict("no finished enumeration in this session"))
    }

    pub fn topology(&self, i: usize) -> ApiResult<&Topology> {
        let e = self.enumeration()?;
        e.topologies.get(i).ok_or_else(|| ApiError::not_found(format!("no topology {i} (session has {})", e.topologies.len())))
    }

    fn sketch_svg(&self, domains: &[SpaceDomains], witness: &Layout, highlight: BTreeSet<String>, title: String) -> String {
        let p = &self.problem;
        render_svg(p, &units_of(p, witness), &rects_from_domains(p, domains), &style(highlight, title))
    }

    pub fn topology_view(&self, i: usize) -> ApiResult<TopologyView> {
        let t = self.topology(i)?;
        let p = &self.problem;
        Ok(TopologyView {
            index: t.index,
            signature: t.signature.0.clone(),
            domains: t.domains.clone(),
            witness: t.witness.clone(),
            sketch_svg: self.sketch_svg(&t.domains, &t.witness, BTreeSet::new(), format!("topology {i}")),
            witness_svg: render_svg(
                p,
                &units_of(p, &t.witness),
                &rects_from_layout(p, &t.witness),
                &style(BTreeSet::new(), format!("topology {i} witness")),
            ),
        })
    }

    pub fn diff_view(&self, a: usize, b: usize) -> ApiResult<DiffView> {
        let (ta, tb) = (self.topology(a)?, self.topology(b)?);
        let differences = diff(&ta.signature, &tb.signature);
        let spaces = differing_spaces(&self.problem, &differences);
        Ok(DiffView {
            a,
            b,
            svg_a: self.sketch_svg(&ta.domains, &ta.witness, spaces.clone(), format!("topology {a}")),
            svg_b: self.sketch_svg(&tb.domains, &tb.witness, spaces.clone(), format!("topology {b}")),
            differences,
            spaces,
        })
    }

    pub fn filter(&self, req: &FilterRequest) -> ApiResult<FilterView> {
        let e = self.enumeration()?;
        let survivors = hypothetical_filter(&self.model, &e.topologies, &req.constraints)
            .map_err(|err| ApiError::validation(err.to_string()))?;
        let keep: BTreeSet<usize> = survivors.iter().copied().collect();
        Ok(FilterView {
            total: e.topologies.len(),
            excluded: (0..e.topologies.len()).filter(|i| !keep.contains(i)).collect(),
            survivors,
        })
    }

    fn refine_view(&self, i: usize, consistent: bool, message: Option<String>) -> RefineView {
        let r = &self.refinements[&i];
        let sketch = r.sketch();
        let sketch_svg = self.sketch_svg(&sketch.domains, &sketch.witness, BTreeSet::new(), format!("topology {i}"));
        RefineView { consistent, message, sketch, sketch_svg }
    }

    fn refinement(&mut self, i: usize) -> ApiResult<&mut Refinement> {
        if !self.refinements.contains_key(&i) {
            let t = self.topology(i)?;
            let r = Refinement::new(&self.model, t).map_err(|e| ApiError::engine(e.to_string()))?;
            self.refinements.insert(i, r);
        }
        Ok(self.refinements.get_mut(&i).unwrap())
    }

    pub fn refine_state(&mut self, i: usize) -> ApiResult<RefineView> {
        self.refinement(i)?;
        Ok(self.refine_view(i, true, None))
    }

    pub fn refine(&mut self, i: usize, req: &RefineRequest) -> ApiResult<RefineView> {
        if req.min > req.max {
            return Err(ApiError::validation(format!("empty range [{}, {}]", req.min, req.max)));
        }
        let r = self.refinement(i)?;
        match r.refine(&req.space, req.attr, req.min, req.max) {
            Ok(_) => Ok(self.refine_view(i, true, None)),
            Err(toposketch::enumerate::RefineError::UnknownSpace(s)) => {
                Err(ApiError::validation(format!("unknown space `{s}`")))
            }
            Err(e) => Ok(self.refine_view(i, false, Some(e.to_string()))),
        }
    }

    pub fn undo(&mut self, i: usize) -> ApiResult<RefineView> {
        let undone = self.refinement(i)?.undo();
        let msg = (!undone).then(|| "nothing to undo".to_string());
        Ok(self.refine_view(i, undone, msg))
    }

    pub fn set_cost(&mut self, cost: CostSpec) -> CostView {
        let c = build_cost(&mut self.model, &cost);
        self.model.cost = c;
        self.cost = cost.clone();
        self.optimized.clear();
        CostView { cost, scale: c.scale }
    }

    fn optimized(&mut self, i: usize, max_solutions: Option<usize>) -> ApiResult<&Optimized> {
        let cached = self.optimized.get(&i).is_some_and(|o| o.complete || o.solutions.len() >= max_solutions.unwrap_or(usize::MAX));
        if !cached {
            let t = self.topology(i)?;
            let o = optimize(&self.model, t, self.model.cost, max_solutions)
                .ok_or_else(|| ApiError::engine(format!("topology {i} has no layout under the current model")))?;
            self.optimized.insert(i, o);
        }
        Ok(&self.optimized[&i])
    }

    pub fn optimize(&mut self, i: usize, req: &OptimizeRequest) -> ApiResult<OptimizeView> {
        let mut result = self.optimized(i, req.max_solutions)?.clone();
        if let Some(k) = req.max_solutions {
            if result.solutions.len() > k {
                result.solutions.truncate(k);
                result.complete = false;
            }
        }
        let p = &self.problem;
        let svg = result.solutions.first().map_or_else(String::new, |s| {
            render_svg(
                p,
                &s.layout.units,
                &rects_from_layout(p, &s.layout),
                &style(BTreeSet::new(), format!("topology {i} cost {}", result.cost)),
            )
        });
        Ok(OptimizeView { result, svg })
    }

    pub fn rank(&mut self, req: &OptimizeRequest) -> ApiResult<RankView> {
        let n = self.enumeration()?.topologies.len();
        let mut results = Vec::with_capacity(n);
        for i in 0..n {
            results.push(self.optimized(i, req.max_solutions.or(Some(1)))?.clone());
        }
        let order = rank(&results);
        Ok(RankView {
            ranking: order
                .iter()
                .enumerate()
                .map(|(pos, &k)| RankEntry { position: pos, topology: results[k].topology, cost: results[k].cost.clone() })
                .collect(),
            timing: summarize(&results),
        })
    }

    pub fn solution_file(&self) -> ApiResult<SolutionFile> {
        let e = self.enumeration()?;
        let mut f = SolutionFile::new(&self.problem, e);
        f.optima = self.optimized.values().flat_map(|o| o.solutions.iter().cloned()).collect();
        Ok(f)
    }
}

/// Enumeration settings accepted by the start endpoint.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EnumerateRequest {
    #[serde(default)]
    pub max_topologies: Option<usize>,
    #[serde(default)]
    pub witness: Option<Witness>,
}
