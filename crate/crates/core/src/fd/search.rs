//! Depth-first labeling and branch-and-bound minimization.

use std::ops::ControlFlow;

use super::domain::INF;
use super::store::{PropStatus, Store, VarId};

/// Variable choice, re-evaluated at every node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum VarSelect {
    /// First unfixed variable in the given order.
    InputOrder,
    /// Smallest domain first, ties by the given order.
    #[default]
    FirstFail,
}

/// Value choice. Only affects the order in which solutions are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ValSelect {
    #[default]
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LabelOptions {
    pub var: VarSelect,
    pub val: ValSelect,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub nodes: u64,
    pub failures: u64,
    pub solutions: u64,
}

/// A total assignment of the labeled variables, in the order they were given.
pub type Solution = Vec<i64>;

fn select(store: &Store, vars: &[VarId], opts: &LabelOptions) -> Option<(VarId, i64)> {
    let v = match opts.var {
        VarSelect::InputOrder => vars.iter().copied().find(|&v| store.value(v).is_none())?,
        VarSelect::FirstFail => {
            let mut best: Option<(u64, VarId)> = None;
            for &v in vars {
                let d = store.dom(v);
                if d.is_fixed() {
                    continue;
                }
                let size = d.size();
                if best.map_or(true, |(s, _)| size < s) {
                    best = Some((size, v));
                    if size == 2 {
                        break;
                    }
                }
            }
            best?.1
        }
    };
    let val = match opts.val {
        ValSelect::Min => store.min(v),
        ValSelect::Max => store.max(v),
    };
    Some((v, val))
}

struct Bound {
    cost: VarId,
    upper: i64,
}

fn dfs(
    store: &mut Store,
    vars: &[VarId],
    opts: &LabelOptions,
    bound: &mut Option<Bound>,
    stats: &mut SearchStats,
    on_solution: &mut dyn FnMut(&Store, &mut Option<Bound>) -> ControlFlow<()>,
) -> ControlFlow<()> {
    stats.nodes += 1;
    if let Some(b) = bound {
        if store.set_max(b.cost, b.upper).is_failed() {
            stats.failures += 1;
            return ControlFlow::Continue(());
        }
    }
    let Some((var, val)) = select(store, vars, opts) else {
        stats.solutions += 1;
        return on_solution(store, bound);
    };
    for take in [true, false] {
        let m = store.push();
        let status = if take { store.assign(var, val) } else { store.remove(var, val) };
        let flow = if status == PropStatus::Failed {
            stats.failures += 1;
            ControlFlow::Continue(())
        } else {
            dfs(store, vars, opts, bound, stats, on_solution)
        };
        store.pop(m);
        flow?;
    }
    ControlFlow::Continue(())
}

/// Enumerates every total assignment of `vars` consistent with the posted
/// propagators, each exactly once. The callback sees the store at the
/// solution node and may stop the search by returning `Break`.
pub fn label(
    store: &mut Store,
    vars: &[VarId],
    opts: &LabelOptions,
    mut on_solution: impl FnMut(&Store) -> ControlFlow<()>,
) -> SearchStats {
    let mut stats = SearchStats::default();
    if store.is_failed() || store.fixpoint().is_failed() {
        return stats;
    }
    let mut none = None;
    let _ = dfs(store, vars, opts, &mut none, &mut stats, &mut |s, _| on_solution(s));
    stats
}

/// Collects every solution of `label`.
pub fn all_solutions(store: &mut Store, vars: &[VarId], opts: &LabelOptions) -> Vec<Solution> {
    let mut out = Vec::new();
    label(store, vars, opts, |s| {
        out.push(vars.iter().map(|&v| s.min(v)).collect());
        ControlFlow::Continue(())
    });
    out
}

/// Result of a minimization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Optimum {
    pub cost: i64,
    /// Optimal assignments of the labeled variables, sorted lexicographically.
    pub solutions: Vec<Solution>,
    pub stats: SearchStats,
    /// Whether `solutions` holds every optimum (false when capped).
    pub complete: bool,
}

/// Branch and bound: each incumbent tightens `cost < incumbent` for the rest
/// of the search (the bound survives backtracking). Returns the best cost
/// and the assignment that first reached it.
pub fn minimize_best(
    store: &mut Store,
    cost: VarId,
    vars: &[VarId],
    opts: &LabelOptions,
) -> Option<(i64, Solution, SearchStats)> {
    minimize_best_with(store, cost, vars, opts, |_, _| {})
}

/// [`minimize_best`], calling `on_improve` with each new incumbent cost.
pub fn minimize_best_with(
    store: &mut Store,
    cost: VarId,
    vars: &[VarId],
    opts: &LabelOptions,
    mut on_improve: impl FnMut(i64, &Store),
) -> Option<(i64, Solution, SearchStats)> {
    let mut stats = SearchStats::default();
    if store.is_failed() || store.fixpoint().is_failed() {
        return None;
    }
    let mut bound = Some(Bound { cost, upper: INF });
    let mut best: Option<(i64, Solution)> = None;
    let _ = dfs(store, vars, opts, &mut bound, &mut stats, &mut |s, b| {
        let c = s.min(cost);
        on_improve(c, s);
        best = Some((c, vars.iter().map(|&v| s.min(v)).collect()));
        if let Some(b) = b {
            b.upper = c - 1;
        }
        ControlFlow::Continue(())
    });
    best.map(|(c, sol)| (c, sol, stats))
}

/// Minimizes `cost` and returns every optimal assignment of `vars` (up to
/// `max_solutions` when given), deterministically ordered.
pub fn minimize(
    store: &mut Store,
    cost: VarId,
    vars: &[VarId],
    opts: &LabelOptions,
    max_solutions: Option<usize>,
) -> Option<Optimum> {
    let (best, _, mut stats) = minimize_best(store, cost, vars, opts)?;
    let m = store.push();
    let mut solutions = Vec::new();
    let mut complete = true;
    if !store.assign(cost, best).is_failed() {
        let second = label(store, vars, opts, |s| {
            if max_solutions.is_some_and(|k| solutions.len() >= k) {
                complete = false;
                return ControlFlow::Break(());
            }
            solutions.push(vars.iter().map(|&v| s.min(v)).collect());
            ControlFlow::Continue(())
        });
        stats.nodes += second.nodes;
        stats.failures += second.failures;
    }
    store.pop(m);
    solutions.sort();
    Some(Optimum { cost: best, solutions, stats, complete })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::atom::{Atom, AtomProp, LinExpr};
    use crate::fd::domain::Dom;

    fn lt(s: &mut Store, a: VarId, b: VarId) {
        s.post(AtomProp::new(Atom::lt(LinExpr::var(a), LinExpr::var(b))));
    }

    #[test]
    fn two_vars_strictly_ordered() {
        let mut s = Store::new();
        let x = s.new_var(Dom::range(1, 2));
        let y = s.new_var(Dom::range(1, 2));
        lt(&mut s, x, y);
        let sols = all_solutions(&mut s, &[x, y], &LabelOptions::default());
        assert_eq!(sols, vec![vec![1, 2]]);
    }

    #[test]
    fn minimize_simple_lower_bound() {
        let mut s = Store::new();
        let x = s.new_var(Dom::range(3, 9));
        s.post(AtomProp::new(Atom::ge(LinExpr::var(x), LinExpr::constant(5))));
        let opt = minimize(&mut s, x, &[x], &LabelOptions::default(), None).unwrap();
        assert_eq!(opt.cost, 5);
        assert_eq!(opt.solutions, vec![vec![5]]);
    }

    #[test]
    fn minimize_returns_all_ties() {
        // cost = |x - y| style: cost = x + y with x + y >= 4, x,y in [0,4]
        let mut s = Store::new();
        let x = s.new_var(Dom::range(0, 4));
        let y = s.new_var(Dom::range(0, 4));
        let c = s.new_var(Dom::range(0, 8));
        s.post(AtomProp::new(Atom::eq(LinExpr::var(c), LinExpr::var(x).term(1, y))));
        s.post(AtomProp::new(Atom::ge(LinExpr::var(c), LinExpr::constant(4))));
        let opt = minimize(&mut s, c, &[x, y], &LabelOptions { val: ValSelect::Max, ..Default::default() }, None).unwrap();
        assert_eq!(opt.cost, 4);
        assert_eq!(opt.solutions, vec![vec![0, 4], vec![1, 3], vec![2, 2], vec![3, 1], vec![4, 0]]);
        // store untouched afterwards
        assert_eq!(s.dom(x), &Dom::range(0, 4));
    }

    #[test]
    fn value_order_does_not_change_solution_set() {
        let build = || {
            let mut s = Store::new();
            let v: Vec<VarId> = (0..3).map(|_| s.new_var(Dom::range(0, 4))).collect();
            lt(&mut s, v[0], v[1]);
            s.post(AtomProp::new(Atom::ne(LinExpr::var(v[1]), LinExpr::var(v[2]))));
            (s, v)
        };
        let (mut a, va) = build();
        let (mut b, vb) = build();
        let mut sa = all_solutions(&mut a, &va, &LabelOptions { var: VarSelect::InputOrder, val: ValSelect::Min });
        let mut sb = all_solutions(&mut b, &vb, &LabelOptions { var: VarSelect::FirstFail, val: ValSelect::Max });
        sa.sort();
        sb.sort();
        assert_eq!(sa, sb);
    }
}
