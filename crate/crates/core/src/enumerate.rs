//! Enumeration of topological solutions and the analytics built on them.
//!
//! The topological phase labels OR selectors, contour attachments and
//! relative positions. Every complete labeling is a candidate topology; a
//! geometric search then either produces a witness layout or discards it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::ControlFlow;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{self, OVERLAP};
use crate::fd::{label, minimize_best_with, Dom, Domains, LabelOptions, Marker, Store, VarId};
use crate::layout::Layout;
use crate::model::Model;
use crate::problem::{Attr, ConstraintSpec, Problem, ProblemError, Side};

/// Topology identity: the value of every topological choice, keyed by a
/// readable name (`pos:a:b`, `contour:k:space`, `or:k`).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature(pub BTreeMap<String, String>);

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(" "))
    }
}

pub fn pos_key(a: &str, b: &str) -> String {
    format!("pos:{a}:{b}")
}

pub fn contour_key(k: usize, space: &str) -> String {
    format!("contour:{k}:{space}")
}

pub fn or_key(k: usize) -> String {
    format!("or:{k}")
}

pub fn relation_label(code: i64) -> String {
    if code == OVERLAP {
        "O".into()
    } else {
        Side::from_code(code).to_string()
    }
}

/// Signature of a node where every topological variable is fixed.
pub fn signature(m: &Model, d: &Domains) -> Signature {
    let p = &m.problem;
    let mut out = BTreeMap::new();
    for (&(a, b), &r) in &m.rels {
        out.insert(pos_key(p.space_id(a), p.space_id(b)), relation_label(d.min(r)));
    }
    if p.spec.reductions.signature_contours {
        for c in &m.contour_choices {
            out.insert(contour_key(c.constraint, p.space_id(c.space)), Side::from_code(d.min(c.var)).to_string());
        }
    }
    for o in &m.or_choices {
        out.insert(or_key(o.constraint), d.min(o.var).to_string());
    }
    Signature(out)
}

/// Current domains of one space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceDomains {
    pub id: String,
    pub x1: Dom,
    pub y1: Dom,
    pub x2: Dom,
    pub y2: Dom,
    #[serde(rename = "L")]
    pub l: Dom,
    #[serde(rename = "W")]
    pub w: Dom,
    #[serde(rename = "S")]
    pub s: Dom,
}

pub fn space_domains(m: &Model, d: &Domains) -> Vec<SpaceDomains> {
    m.spaces
        .iter()
        .enumerate()
        .map(|(i, r)| SpaceDomains {
            id: m.problem.space_id(i).to_string(),
            x1: d.dom(r.x1).clone(),
            y1: d.dom(r.y1).clone(),
            x2: d.dom(r.x2).clone(),
            y2: d.dom(r.y2).clone(),
            l: d.dom(r.l).clone(),
            w: d.dom(r.w).clone(),
            s: d.dom(r.s).clone(),
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Topology {
    pub index: usize,
    pub signature: Signature,
    /// Values of the topological variables.
    pub assignment: Vec<(VarId, i64)>,
    /// Space domains right after the topological labeling.
    pub domains: Vec<SpaceDomains>,
    pub witness: Layout,
}

/// Which layout the geometric check returns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    /// The first layout found.
    First,
    /// A minimum-cost layout under the problem's cost.
    #[default]
    Best,
}

/// Live counters of a running enumeration, shared with other threads.
#[derive(Debug, Default)]
pub struct Progress {
    pub nodes: AtomicU64,
    pub candidates: AtomicU64,
    pub consistent: AtomicU64,
    /// Set to stop the search at the next node.
    pub cancel: AtomicBool,
}

/// Plain copy of [`Progress`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressSnapshot {
    pub nodes: u64,
    pub candidates: u64,
    pub consistent: u64,
}

impl Progress {
    pub fn snapshot(&self) -> ProgressSnapshot {
        ProgressSnapshot {
            nodes: self.nodes.load(Ordering::Relaxed),
            candidates: self.candidates.load(Ordering::Relaxed),
            consistent: self.consistent.load(Ordering::Relaxed),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnumOptions {
    pub witness: Witness,
    /// Check candidates on a thread pool.
    pub parallel: bool,
    /// Stop after this many consistent topologies.
    pub max_topologies: Option<usize>,
    /// Skip the geometric check; every candidate is kept with an empty witness.
    pub skip_check: bool,
    pub progress: Option<Arc<Progress>>,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions { witness: Witness::Best, parallel: true, max_topologies: None, skip_check: false, progress: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnumStats {
    /// Complete topological labelings reached.
    pub candidates: u64,
    /// Candidates with a geometric solution.
    pub consistent: u64,
    pub nodes: u64,
    pub failures: u64,
    /// Propagator executions of the topological search.
    #[serde(default)]
    pub propagations: u64,
    pub elapsed_ms: f64,
    /// Summed time of geometric checks (across threads).
    pub check_ms: f64,
    /// Search stopped early because of `max_topologies`.
    pub truncated: bool,
    /// Search stopped by [`Progress::cancel`].
    #[serde(default)]
    pub cancelled: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Enumeration {
    pub topologies: Vec<Topology>,
    pub stats: EnumStats,
}

fn domain_product(m: &Model, i: usize) -> u64 {
    let r = m.spaces[i];
    m.store.dom(r.l).size().saturating_mul(m.store.dom(r.w).size())
}

/// Space placement order: repeatedly the space with most listed constraints
/// towards its contour or already placed spaces, then the smallest
/// dimension domain, then declaration order.
pub fn placement_order(m: &Model) -> Vec<usize> {
    let p = &m.problem;
    let links: Vec<(Vec<usize>, bool)> = p
        .spec
        .constraints
        .iter()
        .map(|c| {
            let mut ids: Vec<usize> = c.spaces().iter().filter_map(|id| p.space(id)).collect();
            ids.sort();
            ids.dedup();
            (ids, c.touches_contour())
        })
        .collect();
    let mut placed: Vec<usize> = Vec::new();
    let mut left: Vec<usize> = (0..p.num_spaces()).collect();
    while !left.is_empty() {
        let score = |e: usize| -> usize {
            links
                .iter()
                .filter(|(ids, contour)| ids.contains(&e) && (*contour || ids.iter().any(|i| placed.contains(i))))
                .count()
        };
        let (pos, _) = left
            .iter()
            .enumerate()
            .min_by_key(|&(_, &e)| (std::cmp::Reverse(score(e)), domain_product(m, e), e))
            .unwrap();
        placed.push(left.remove(pos));
    }
    placed
}

/// Topological variables in labeling order.
pub fn topology_order(m: &Model) -> Vec<VarId> {
    let p = &m.problem;
    let mut out: Vec<VarId> = m.or_choices.iter().map(|o| o.var).collect();
    let mut adjacent = BTreeSet::new();
    for c in &p.spec.constraints {
        let mut adj = Vec::new();
        match c {
            ConstraintSpec::Adjacent(a) => adj.push(a),
            ConstraintSpec::Or { left, right } => {
                for cl in left.iter().chain(right) {
                    if let crate::problem::Clause::Adjacent(a) = cl {
                        adj.push(a);
                    }
                }
            }
            _ => {}
        }
        for a in adj {
            let (i, j) = (p.space(&a.a).unwrap(), p.space(&a.b).unwrap());
            adjacent.insert((i.min(j), i.max(j)));
        }
    }
    let mut placed = Vec::new();
    for e in placement_order(m) {
        out.extend(m.contour_choices.iter().filter(|c| c.space == e).map(|c| c.var));
        let mut rels: Vec<(bool, usize, VarId)> = placed
            .iter()
            .filter_map(|&o: &usize| {
                let key = (o.min(e), o.max(e));
                m.rels.get(&key).map(|&r| (!adjacent.contains(&key), o, r))
            })
            .collect();
        rels.sort();
        out.extend(rels.into_iter().map(|t| t.2));
        placed.push(e);
    }
    debug_assert_eq!(out.len(), m.topology_vars().len());
    out
}

/// Geometric search of a node whose topology is fixed. Returns a layout,
/// of minimum cost with [`Witness::Best`].
pub fn check_consistency(m: &Model, store: &mut Store, witness: Witness) -> Option<Layout> {
    let vars = m.geometric_vars();
    let opts = LabelOptions::default();
    match witness {
        Witness::First => {
            let mut found = None;
            label(store, &vars, &opts, |s| {
                debug_assert!(s.all_satisfied());
                found = Some(Layout::from_domains(m, s.domains()));
                ControlFlow::Break(())
            });
            found
        }
        Witness::Best => {
            let mut found = None;
            minimize_best_with(store, m.cost.var, &vars, &opts, |_, s| {
                debug_assert!(s.all_satisfied());
                found = Some(Layout::from_domains(m, s.domains()));
            });
            found
        }
    }
}

struct Leaf {
    store: Store,
    signature: Signature,
    assignment: Vec<(VarId, i64)>,
}

struct Search<'a> {
    m: &'a Model,
    order: Vec<VarId>,
    opts: &'a EnumOptions,
    pending: Vec<Leaf>,
    out: Enumeration,
    seen: BTreeSet<Signature>,
}

impl Search<'_> {
    fn dfs(&mut self, store: &mut Store) -> ControlFlow<()> {
        self.out.stats.nodes += 1;
        if let Some(p) = &self.opts.progress {
            p.nodes.fetch_add(1, Ordering::Relaxed);
            if p.cancel.load(Ordering::Relaxed) {
                self.out.stats.cancelled = true;
                return ControlFlow::Break(());
            }
        }
        let Some(&var) = self.order.iter().find(|&&v| store.value(v).is_none()) else {
            self.out.stats.candidates += 1;
            if let Some(p) = &self.opts.progress {
                p.candidates.fetch_add(1, Ordering::Relaxed);
            }
            let leaf = Leaf {
                signature: signature(self.m, store.domains()),
                assignment: self.order.iter().map(|&v| (v, store.min(v))).collect(),
                store: store.clone(),
            };
            self.pending.push(leaf);
            if self.pending.len() >= 64 {
                return self.flush();
            }
            return ControlFlow::Continue(());
        };
        let values: Vec<i64> = store.dom(var).values().collect();
        for val in values {
            let mk = store.push();
            let flow = if store.assign(var, val).is_failed() {
                self.out.stats.failures += 1;
                ControlFlow::Continue(())
            } else {
                self.dfs(store)
            };
            store.pop(mk);
            flow?;
        }
        ControlFlow::Continue(())
    }

    fn flush(&mut self) -> ControlFlow<()> {
        let leaves = std::mem::take(&mut self.pending);
        let m = self.m;
        let skip = self.opts.skip_check;
        let mode = self.opts.witness;
        let check = |mut leaf: Leaf| -> (Leaf, Option<Layout>, f64) {
            let t = Instant::now();
            let w = if skip {
                Some(Layout { units: Vec::new(), spaces: Vec::new() })
            } else {
                check_consistency(m, &mut leaf.store, mode)
            };
            (leaf, w, t.elapsed().as_secs_f64() * 1e3)
        };
        let results: Vec<(Leaf, Option<Layout>, f64)> = if self.opts.parallel {
            leaves.into_par_iter().map(check).collect()
        } else {
            leaves.into_iter().map(check).collect()
        };
        for (leaf, witness, ms) in results {
            self.out.stats.check_ms += ms;
            let Some(witness) = witness else { continue };
            if !self.seen.insert(leaf.signature.clone()) {
                continue;
            }
            self.out.stats.consistent += 1;
            if let Some(p) = &self.opts.progress {
                p.consistent.fetch_add(1, Ordering::Relaxed);
            }
            let index = self.out.topologies.len();
            self.out.topologies.push(Topology {
                index,
                signature: leaf.signature,
                assignment: leaf.assignment,
                domains: space_domains(m, leaf.store.domains()),
                witness,
            });
            if self.opts.max_topologies.is_some_and(|k| self.out.topologies.len() >= k) {
                self.out.stats.truncated = true;
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    }
}

/// Enumerates every consistent topology, in search order.
pub fn enumerate(m: &Model, opts: &EnumOptions) -> Enumeration {
    let start = Instant::now();
    let mut search = Search {
        m,
        order: topology_order(m),
        opts,
        pending: Vec::new(),
        out: Enumeration::default(),
        seen: BTreeSet::new(),
    };
    let mut store = m.store.clone();
    let before = store.propagation_count();
    if !m.infeasible && !store.fixpoint().is_failed() && search.dfs(&mut store).is_continue() {
        let _ = search.flush();
    } else if search.out.stats.cancelled {
        // leaves already labeled are still checked
        let _ = search.flush();
    }
    let mut out = search.out;
    out.stats.propagations = store.propagation_count() - before;
    out.stats.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    out
}

/// One differing topological choice.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Difference {
    pub key: String,
    pub left: Option<String>,
    pub right: Option<String>,
}

/// Choices on which two signatures disagree, sorted by key.
pub fn diff(a: &Signature, b: &Signature) -> Vec<Difference> {
    let keys: BTreeSet<&String> = a.0.keys().chain(b.0.keys()).collect();
    keys.into_iter()
        .filter(|k| a.0.get(*k) != b.0.get(*k))
        .map(|k| Difference { key: k.clone(), left: a.0.get(k).cloned(), right: b.0.get(k).cloned() })
        .collect()
}

/// Spaces named by a set of differences.
pub fn differing_spaces(problem: &Problem, diffs: &[Difference]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for d in diffs {
        let mut parts = d.key.split(':');
        match parts.next() {
            Some("pos") => out.extend(parts.map(str::to_string)),
            Some("contour") => out.extend(parts.nth(1).map(str::to_string)),
            Some("or") => {
                let k: usize = parts.next().and_then(|s| s.parse().ok()).unwrap_or(usize::MAX);
                if let Some(c) = problem.spec.constraints.get(k) {
                    out.extend(c.spaces().into_iter().map(str::to_string));
                }
            }
            _ => {}
        }
    }
    out
}

fn validate_extra(m: &Model, extra: &[ConstraintSpec]) -> Result<(), ProblemError> {
    let mut spec = m.problem.spec.clone();
    spec.constraints.extend(extra.iter().cloned());
    Problem::new(spec).map(|_| ())
}

/// Indices of the topologies that stay consistent once `extra` is added.
pub fn hypothetical_filter(
    m: &Model,
    topologies: &[Topology],
    extra: &[ConstraintSpec],
) -> Result<Vec<usize>, ProblemError> {
    validate_extra(m, extra)?;
    let mut hm = m.clone();
    let base = m.problem.spec.constraints.len();
    for (k, c) in extra.iter().enumerate() {
        constraints::post_constraint(&mut hm, base + k, c);
    }
    let keep: Vec<bool> = topologies
        .par_iter()
        .map(|t| {
            let mut s = hm.store.clone();
            if s.fixpoint().is_failed() {
                return false;
            }
            for &(v, val) in &t.assignment {
                if s.assign(v, val).is_failed() {
                    return false;
                }
            }
            check_consistency(&hm, &mut s, Witness::First).is_some()
        })
        .collect();
    Ok(topologies.iter().zip(keep).filter(|(_, k)| *k).map(|(t, _)| t.index).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RefineError {
    #[error("unknown space `{0}`")]
    UnknownSpace(String),
    #[error("refinement leaves no layout for this topology")]
    Inconsistent,
    #[error("topology is not consistent with the model")]
    BadTopology,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineStep {
    pub space: String,
    pub attr: Attr,
    pub min: i64,
    pub max: i64,
}

/// Sketch of a topology under refinement: current domains and a layout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sketch {
    pub topology: usize,
    pub steps: Vec<RefineStep>,
    pub domains: Vec<SpaceDomains>,
    pub witness: Layout,
}

/// Interactive narrowing of one topology's geometry, with undo.
#[derive(Debug)]
pub struct Refinement {
    model: Model,
    topology: usize,
    steps: Vec<(Marker, RefineStep, Layout)>,
    base_witness: Layout,
}

impl Refinement {
    pub fn new(m: &Model, t: &Topology) -> Result<Refinement, RefineError> {
        let mut model = m.clone();
        for &(v, val) in &t.assignment {
            if model.store.assign(v, val).is_failed() {
                return Err(RefineError::BadTopology);
            }
        }
        Ok(Refinement { model, topology: t.index, steps: Vec::new(), base_witness: t.witness.clone() })
    }

    /// Restricts `space.attr` to `[min, max]`. Rejected (and not applied)
    /// when no layout remains.
    pub fn refine(&mut self, space: &str, attr: Attr, min: i64, max: i64) -> Result<&Layout, RefineError> {
        let i = self.model.problem.space(space).ok_or_else(|| RefineError::UnknownSpace(space.into()))?;
        let mk = self.model.store.push();
        let ok = !self.model.set_bound(i, attr, min, max).is_failed();
        let witness = if ok {
            let mut probe = self.model.store.clone();
            check_consistency(&self.model, &mut probe, Witness::First)
        } else {
            None
        };
        let Some(witness) = witness else {
            self.model.store.pop(mk);
            return Err(RefineError::Inconsistent);
        };
        let step = RefineStep { space: space.into(), attr, min, max };
        self.steps.push((mk, step, witness));
        Ok(&self.steps.last().unwrap().2)
    }

    /// Reverts the latest refinement. Returns false when there is none.
    pub fn undo(&mut self) -> bool {
        match self.steps.pop() {
            Some((mk, _, _)) => {
                self.model.store.pop(mk);
                true
            }
            None => false,
        }
    }

    pub fn witness(&self) -> &Layout {
        self.steps.last().map_or(&self.base_witness, |s| &s.2)
    }

    pub fn sketch(&self) -> Sketch {
        Sketch {
            topology: self.topology,
            steps: self.steps.iter().map(|s| s.1.clone()).collect(),
            domains: space_domains(&self.model, self.model.store.domains()),
            witness: self.witness().clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Bounds, ProblemSpec, SpaceKind, SpaceSpec};
    use std::sync::Arc;

    fn squares(symmetry: bool) -> Model {
        let mut spec = ProblemSpec::new("sq").unit("u", 4, 4);
        for i in 0..4 {
            spec = spec.space(
                SpaceSpec::new(&format!("s{i}"), "u", SpaceKind::Room).dims(Bounds::exactly(2), Bounds::exactly(2)),
            );
        }
        spec.reductions.symmetry = symmetry;
        Model::build(Arc::new(Problem::new(spec).unwrap()))
    }

    #[test]
    fn four_squares_tile_in_one_way_up_to_symmetry() {
        let e = enumerate(&squares(true), &EnumOptions::default());
        assert_eq!(e.topologies.len(), 1);
        let e = enumerate(&squares(false), &EnumOptions::default());
        assert_eq!(e.topologies.len(), 24);
        let signatures: BTreeSet<_> = e.topologies.iter().map(|t| &t.signature).collect();
        assert_eq!(signatures.len(), 24);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let m = squares(false);
        let a = enumerate(&m, &EnumOptions { parallel: false, ..Default::default() });
        let b = enumerate(&m, &EnumOptions::default());
        let sa: Vec<_> = a.topologies.iter().map(|t| t.signature.clone()).collect();
        let sb: Vec<_> = b.topologies.iter().map(|t| t.signature.clone()).collect();
        assert_eq!(sa, sb);
        assert_eq!(a.stats.candidates, b.stats.candidates);
    }

    #[test]
    fn progress_counts_and_cancel() {
        let m = squares(false);
        let progress = Arc::new(Progress::default());
        let e = enumerate(&m, &EnumOptions { progress: Some(progress.clone()), ..Default::default() });
        let snap = progress.snapshot();
        assert_eq!(snap.candidates, e.stats.candidates);
        assert_eq!(snap.consistent, 24);
        assert_eq!(snap.nodes, e.stats.nodes);
        let stop = Arc::new(Progress::default());
        stop.cancel.store(true, Ordering::Relaxed);
        let e = enumerate(&m, &EnumOptions { progress: Some(stop), ..Default::default() });
        assert!(e.stats.cancelled);
        assert!(e.topologies.is_empty());
    }

    #[test]
    fn refine_and_undo() {
        let m = squares(false);
        let e = enumerate(&m, &EnumOptions::default());
        let t = &e.topologies[0];
        let mut r = Refinement::new(&m, t).unwrap();
        let before = r.sketch();
        assert_eq!(r.refine("s0", Attr::L, 3, 4), Err(RefineError::Inconsistent));
        assert_eq!(r.sketch(), before);
        assert!(r.refine("nope", Attr::L, 1, 1).is_err());
        assert!(!r.undo());
    }

    #[test]
    fn diff_lists_changed_choices() {
        let e = enumerate(&squares(false), &EnumOptions::default());
        let d = diff(&e.topologies[0].signature, &e.topologies[1].signature);
        assert!(!d.is_empty());
        assert!(diff(&e.topologies[0].signature, &e.topologies[0].signature).is_empty());
    }
}
