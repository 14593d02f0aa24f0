//! Cost functions over the layout variables and branch-and-bound search for
//! the best layouts of a topology.

use std::collections::BTreeMap;
use std::ops::ControlFlow;
use std::time::Instant;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::enumerate::Topology;
use crate::fd::{label, minimize, minimize_best_with, Atom, AtomProp, Dom, LabelOptions, LinExpr, Store, VarId};
use crate::layout::Layout;
use crate::model::Model;
use crate::problem::{CostSpec, Criterion, SpaceKind};

/// Integer cost variable: its value is the weighted cost times `scale`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CostVar {
    pub var: VarId,
    pub scale: i64,
}

impl CostVar {
    pub fn real(&self, v: i64) -> Ratio<i64> {
        Ratio::new(v, self.scale)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

type Terms = BTreeMap<VarId, Ratio<i64>>;

fn add(terms: &mut Terms, v: VarId, c: Ratio<i64>) {
    *terms.entry(v).or_insert_with(|| Ratio::from_integer(0)) += c;
}

/// Rational coefficients of each criterion, before weighting.
fn criterion_terms(m: &Model, c: Criterion, spec: &CostSpec) -> Terms {
    let one = Ratio::from_integer(1);
    let mut t = Terms::new();
    let internal = |t: &mut Terms, k: Ratio<i64>| {
        for r in &m.spaces {
            add(t, r.l, k);
            add(t, r.w, k);
        }
        for e in &m.contours {
            add(t, e.l, -k);
            add(t, e.w, -k);
        }
    };
    let external = |t: &mut Terms, k: Ratio<i64>| {
        for e in &m.contours {
            add(t, e.l, k * 2);
            add(t, e.w, k * 2);
        }
    };
    match c {
        Criterion::CorridorArea => {
            for (i, s) in m.problem.spec.spaces.iter().enumerate() {
                if s.kind == SpaceKind::Corridor {
                    add(&mut t, m.spaces[i].s, one);
                }
            }
        }
        Criterion::ExtraSpaceArea => {
            for e in &m.contours {
                add(&mut t, e.s, one);
            }
            for r in &m.spaces {
                add(&mut t, r.s, -one);
            }
        }
        Criterion::InternalWallLength => internal(&mut t, spec.cost_internal_wall.0),
        Criterion::ExternalWallLength => external(&mut t, spec.cost_external_wall.0),
        Criterion::CombinedWallLength => {
            internal(&mut t, spec.cost_internal_wall.0);
            external(&mut t, spec.cost_external_wall.0);
        }
    }
    t
}

/// Posts `cost = scale * sum(weight * criterion)` and returns the variable.
pub fn build_cost(m: &mut Model, spec: &CostSpec) -> CostVar {
    let mut terms = Terms::new();
    for c in Criterion::ALL {
        let w = spec.weight(c).0;
        if *w.numer() == 0 {
            continue;
        }
        for (v, k) in criterion_terms(m, c, spec) {
            add(&mut terms, v, k * w);
        }
    }
    terms.retain(|_, k| *k.numer() != 0);
    let scale = terms.values().fold(1i64, |acc, k| acc / gcd(acc, *k.denom()) * *k.denom());
    let mut e = LinExpr::new();
    for (&v, k) in &terms {
        e.add_term((k * scale).to_integer(), v);
    }
    let var = m.store.new_var(Dom::full());
    m.store.post(AtomProp::new(Atom::eq(LinExpr::var(var), e)));
    CostVar { var, scale }
}

/// A placed solution of a topology.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeomSolution {
    pub topology: usize,
    /// Cost as `numerator/denominator` text when not an integer.
    pub cost: String,
    pub layout: Layout,
}

pub fn format_ratio(r: Ratio<i64>) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizeStats {
    pub nodes: u64,
    pub failures: u64,
    pub improvements: usize,
    pub time_to_first_ms: f64,
    pub time_to_best_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimized {
    pub topology: usize,
    pub cost: String,
    #[serde(skip)]
    pub cost_value: Ratio<i64>,
    pub solutions: Vec<GeomSolution>,
    /// False when `max_solutions` cut the list of optima.
    pub complete: bool,
    pub stats: OptimizeStats,
}

fn fix_topology(m: &Model, t: &Topology) -> Option<Store> {
    let mut s = m.store.clone();
    if s.fixpoint().is_failed() {
        return None;
    }
    for &(v, val) in &t.assignment {
        if s.assign(v, val).is_failed() {
            return None;
        }
    }
    Some(s)
}

/// Every optimal layout of a topology (up to `max_solutions`), in
/// lexicographic order of the geometric variables.
pub fn optimize(m: &Model, t: &Topology, cost: CostVar, max_solutions: Option<usize>) -> Option<Optimized> {
    let mut store = fix_topology(m, t)?;
    let vars = m.geometric_vars();
    let opts = LabelOptions::default();
    let start = Instant::now();
    let mut first = None;
    let mut last = 0.0;
    let mut improvements = 0;
    let (best, _, stats) = minimize_best_with(&mut store, cost.var, &vars, &opts, |_, _| {
        let ms = start.elapsed().as_secs_f64() * 1e3;
        first.get_or_insert(ms);
        last = ms;
        improvements += 1;
    })?;
    store.assign(cost.var, best);
    let all = minimize(&mut store, cost.var, &vars, &opts, max_solutions)?;
    let cost_value = cost.real(best);
    let solutions = all
        .solutions
        .iter()
        .map(|sol| {
            let mut s = store.clone();
            for (&v, &val) in vars.iter().zip(sol) {
                s.assign(v, val);
            }
            GeomSolution {
                topology: t.index,
                cost: format_ratio(cost_value),
                layout: Layout::from_domains(m, s.domains()),
            }
        })
        .collect();
    Some(Optimized {
        topology: t.index,
        cost: format_ratio(cost_value),
        cost_value,
        solutions,
        complete: all.complete,
        stats: OptimizeStats {
            nodes: stats.nodes + all.stats.nodes,
            failures: stats.failures + all.stats.failures,
            improvements,
            time_to_first_ms: first.unwrap_or(0.0),
            time_to_best_ms: last,
            total_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    })
}

/// Every geometric solution of a topology, stopping after `limit` layouts.
/// Returns the layouts and whether the list is complete.
pub fn geometric_solutions(m: &Model, t: &Topology, limit: Option<usize>) -> (Vec<Layout>, bool) {
    let Some(mut store) = fix_topology(m, t) else { return (Vec::new(), true) };
    let vars = m.geometric_vars();
    let mut out = Vec::new();
    let mut complete = true;
    label(&mut store, &vars, &LabelOptions::default(), |s| {
        if limit.is_some_and(|n| out.len() >= n) {
            complete = false;
            return ControlFlow::Break(());
        }
        out.push(Layout::from_domains(m, s.domains()));
        ControlFlow::Continue(())
    });
    (out, complete)
}

/// Minimum, median, mean and maximum of a sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Spread {
        if values.is_empty() {
            return Spread::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
        Spread { min: v[0], median, mean: v.iter().sum::<f64>() / n as f64, max: v[n - 1] }
    }
}

/// Time to the first and to the best solution across optimized topologies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub topologies: usize,
    pub time_to_first_ms: Spread,
    pub time_to_best_ms: Spread,
    pub total_ms: Spread,
    /// Topologies whose first solution was already optimal.
    pub first_was_best: usize,
}

pub fn summarize(results: &[Optimized]) -> TimingSummary {
    let pick = |f: fn(&OptimizeStats) -> f64| -> Vec<f64> { results.iter().map(|r| f(&r.stats)).collect() };
    TimingSummary {
        topologies: results.len(),
        time_to_first_ms: Spread::of(&pick(|s| s.time_to_first_ms)),
        time_to_best_ms: Spread::of(&pick(|s| s.time_to_best_ms)),
        total_ms: Spread::of(&pick(|s| s.total_ms)),
        first_was_best: results.iter().filter(|r| r.stats.improvements == 1).count(),
    }
}

/// Indices of `results` by ascending cost, ties by topology index.
pub fn rank(results: &[Optimized]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..results.len()).collect();
    idx.sort_by(|&a, &b| {
        results[a]
            .cost_value
            .cmp(&results[b].cost_value)
            .then(results[a].topology.cmp(&results[b].topology))
    });
    idx
}
