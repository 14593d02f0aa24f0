//! The constraint store: variables, propagators, the restore trail and the
//! fixpoint loop.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use super::domain::Dom;

/// Identifier of a variable inside one [`Store`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct VarId(pub u32);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Identifier of a posted propagator.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct PropId(pub u32);

/// Raised when a domain becomes empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("inconsistency")]
pub struct Failed;

pub type PropResult = Result<(), Failed>;

/// Outcome of posting a constraint or applying a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropStatus {
    Fixpoint,
    Failed,
}

impl PropStatus {
    pub fn is_failed(self) -> bool {
        self == PropStatus::Failed
    }
}

impl From<PropResult> for PropStatus {
    fn from(r: PropResult) -> Self {
        match r {
            Ok(()) => PropStatus::Fixpoint,
            Err(Failed) => PropStatus::Failed,
        }
    }
}

/// Token returned by [`Store::push`]; must be handed back to [`Store::pop`]
/// in LIFO order.
#[derive(Debug, PartialEq, Eq)]
#[must_use]
pub struct Marker {
    depth: usize,
}

/// A filtering algorithm over a fixed set of variables.
///
/// Implementations must be stateless: all state lives in the domains so that
/// backtracking restores it. A propagator may only remove values that have no
/// support under its relation.
pub trait Propagator: Send + Sync + fmt::Debug {
    fn scope(&self) -> Vec<VarId>;

    fn propagate(&self, d: &mut Domains) -> PropResult;

    /// Direct evaluation on a total assignment (every scope variable fixed).
    fn satisfied(&self, d: &Domains) -> bool;

    /// True when no future domain reduction can make the propagator prune.
    /// Checked after each run; entailed propagators sleep until backtracking.
    fn entailed(&self, _d: &Domains) -> bool {
        false
    }
}

/// Domains of all variables plus the undo log.
#[derive(Clone, Debug, Default)]
pub struct Domains {
    doms: Vec<Dom>,
    stamps: Vec<u64>,
    trail: Vec<(VarId, Dom)>,
    generation: u64,
    changed: Vec<VarId>,
}

impl Domains {
    pub fn len(&self) -> usize {
        self.doms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doms.is_empty()
    }

    #[inline]
    pub fn dom(&self, v: VarId) -> &Dom {
        &self.doms[v.index()]
    }

    #[inline]
    pub fn min(&self, v: VarId) -> i64 {
        self.doms[v.index()].min()
    }

    #[inline]
    pub fn max(&self, v: VarId) -> i64 {
        self.doms[v.index()].max()
    }

    #[inline]
    pub fn is_fixed(&self, v: VarId) -> bool {
        self.doms[v.index()].is_fixed()
    }

    #[inline]
    pub fn value(&self, v: VarId) -> Option<i64> {
        self.doms[v.index()].value()
    }

    /// Replaces the domain of `v` by `new`, which must be a subset of the
    /// current one. Fails (after recording nothing) if `new` is empty.
    pub fn set(&mut self, v: VarId, new: Dom) -> PropResult {
        if new.is_empty() {
            return Err(Failed);
        }
        let i = v.index();
        if self.doms[i] == new {
            return Ok(());
        }
        debug_assert!(new.is_subset(&self.doms[i]), "domains only shrink");
        if self.stamps[i] != self.generation {
            self.stamps[i] = self.generation;
            self.trail.push((v, self.doms[i].clone()));
        }
        self.doms[i] = new;
        self.changed.push(v);
        Ok(())
    }

    pub fn intersect(&mut self, v: VarId, with: &Dom) -> PropResult {
        let cur = &self.doms[v.index()];
        if cur.is_subset(with) {
            return Ok(());
        }
        let new = cur.intersect(with);
        self.set(v, new)
    }

    pub fn set_min(&mut self, v: VarId, lo: i64) -> PropResult {
        let cur = &self.doms[v.index()];
        if cur.min() >= lo {
            return Ok(());
        }
        let new = cur.with_min(lo);
        self.set(v, new)
    }

    pub fn set_max(&mut self, v: VarId, hi: i64) -> PropResult {
        let cur = &self.doms[v.index()];
        if cur.max() <= hi {
            return Ok(());
        }
        let new = cur.with_max(hi);
        self.set(v, new)
    }

    pub fn assign(&mut self, v: VarId, val: i64) -> PropResult {
        let cur = &self.doms[v.index()];
        if !cur.contains(val) {
            return Err(Failed);
        }
        self.set(v, Dom::singleton(val))
    }

    pub fn remove(&mut self, v: VarId, val: i64) -> PropResult {
        let cur = &self.doms[v.index()];
        if !cur.contains(val) {
            return Ok(());
        }
        let new = cur.without(val);
        self.set(v, new)
    }

    /// All domains, in variable order.
    pub fn snapshot(&self) -> Vec<Dom> {
        self.doms.clone()
    }
}

/// Variables, propagators and search state.
///
/// A store is a single-threaded unit of work; clone it to explore
/// independently (propagators are shared immutably between clones).
#[derive(Clone, Debug, Default)]
pub struct Store {
    d: Domains,
    props: Vec<Arc<dyn Propagator>>,
    watchers: Vec<Vec<PropId>>,
    levels: Vec<(usize, usize, usize)>,
    queue: VecDeque<PropId>,
    queued: Vec<bool>,
    asleep: Vec<bool>,
    asleep_trail: Vec<PropId>,
    failed: bool,
    propagations: u64,
}

impl Store {
    pub fn new() -> Self {
        Store::default()
    }

    pub fn new_var(&mut self, dom: Dom) -> VarId {
        assert!(!dom.is_empty(), "variables start with a non-empty domain");
        let id = VarId(self.d.doms.len() as u32);
        self.d.doms.push(dom);
        self.d.stamps.push(u64::MAX);
        self.watchers.push(Vec::new());
        id
    }

    pub fn num_vars(&self) -> usize {
        self.d.doms.len()
    }

    pub fn num_propagators(&self) -> usize {
        self.props.len()
    }

    pub fn domains(&self) -> &Domains {
        &self.d
    }

    pub fn dom(&self, v: VarId) -> &Dom {
        self.d.dom(v)
    }

    pub fn min(&self, v: VarId) -> i64 {
        self.d.min(v)
    }

    pub fn max(&self, v: VarId) -> i64 {
        self.d.max(v)
    }

    pub fn value(&self, v: VarId) -> Option<i64> {
        self.d.value(v)
    }

    pub fn is_failed(&self) -> bool {
        self.failed
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Total number of propagator executions so far.
    pub fn propagation_count(&self) -> u64 {
        self.propagations
    }

    /// Adds a propagator and runs propagation to fixpoint. The propagator
    /// stays active until the enclosing choice point is popped.
    pub fn post<P: Propagator + 'static>(&mut self, p: P) -> PropStatus {
        self.post_arc(Arc::new(p))
    }

    pub fn post_arc(&mut self, p: Arc<dyn Propagator>) -> PropStatus {
        if self.failed {
            return PropStatus::Failed;
        }
        let id = PropId(self.props.len() as u32);
        let mut scope = p.scope();
        scope.sort_unstable();
        scope.dedup();
        for v in scope {
            assert!(v.index() < self.num_vars(), "propagator scope refers to unknown variable {v:?}");
            self.watchers[v.index()].push(id);
        }
        self.props.push(p);
        self.queued.push(false);
        self.asleep.push(false);
        self.enqueue(id);
        self.fixpoint()
    }

    fn enqueue(&mut self, id: PropId) {
        let q = &mut self.queued[id.0 as usize];
        if !*q && !self.asleep[id.0 as usize] {
            *q = true;
            self.queue.push_back(id);
        }
    }

    fn schedule_changed(&mut self) {
        let changed = std::mem::take(&mut self.d.changed);
        for v in &changed {
            for k in 0..self.watchers[v.index()].len() {
                let id = self.watchers[v.index()][k];
                self.enqueue(id);
            }
        }
        let mut changed = changed;
        changed.clear();
        self.d.changed = changed;
    }

    /// Runs queued propagators until nothing changes.
    pub fn fixpoint(&mut self) -> PropStatus {
        if self.failed {
            return PropStatus::Failed;
        }
        self.schedule_changed();
        while let Some(id) = self.queue.pop_front() {
            self.queued[id.0 as usize] = false;
            let p = Arc::clone(&self.props[id.0 as usize]);
            self.propagations += 1;
            if p.propagate(&mut self.d).is_err() {
                self.fail();
                return PropStatus::Failed;
            }
            if p.entailed(&self.d) {
                self.asleep[id.0 as usize] = true;
                self.asleep_trail.push(id);
            }
            self.schedule_changed();
        }
        PropStatus::Fixpoint
    }

    fn fail(&mut self) {
        self.failed = true;
        for id in self.queue.drain(..) {
            self.queued[id.0 as usize] = false;
        }
        self.d.changed.clear();
    }

    /// Applies a domain change from outside propagation and runs to fixpoint.
    pub fn apply<F>(&mut self, f: F) -> PropStatus
    where
        F: FnOnce(&mut Domains) -> PropResult,
    {
        if self.failed {
            return PropStatus::Failed;
        }
        if f(&mut self.d).is_err() {
            self.fail();
            return PropStatus::Failed;
        }
        self.fixpoint()
    }

    pub fn assign(&mut self, v: VarId, val: i64) -> PropStatus {
        self.apply(|d| d.assign(v, val))
    }

    pub fn remove(&mut self, v: VarId, val: i64) -> PropStatus {
        self.apply(|d| d.remove(v, val))
    }

    pub fn set_min(&mut self, v: VarId, lo: i64) -> PropStatus {
        self.apply(|d| d.set_min(v, lo))
    }

    pub fn set_max(&mut self, v: VarId, hi: i64) -> PropStatus {
        self.apply(|d| d.set_max(v, hi))
    }

    pub fn intersect(&mut self, v: VarId, with: &Dom) -> PropStatus {
        self.apply(|d| d.intersect(v, with))
    }

    /// Opens a choice point.
    pub fn push(&mut self) -> Marker {
        self.levels.push((self.d.trail.len(), self.props.len(), self.asleep_trail.len()));
        self.d.generation += 1;
        Marker { depth: self.levels.len() }
    }

    /// Restores every domain and removes every propagator recorded since the
    /// matching [`push`](Self::push). Clears the failed flag.
    pub fn pop(&mut self, m: Marker) {
        assert_eq!(m.depth, self.levels.len(), "choice points must be popped in LIFO order");
        let (trail_len, props_len, asleep_len) = self.levels.pop().expect("pop without push");
        while self.d.trail.len() > trail_len {
            let (v, dom) = self.d.trail.pop().unwrap();
            self.d.doms[v.index()] = dom;
        }
        for id in self.asleep_trail.drain(asleep_len..) {
            self.asleep[id.0 as usize] = false;
        }
        while self.props.len() > props_len {
            let id = PropId((self.props.len() - 1) as u32);
            let p = self.props.pop().unwrap();
            self.queued.pop();
            self.asleep.pop();
            for v in p.scope() {
                let w = &mut self.watchers[v.index()];
                if w.last() == Some(&id) {
                    w.pop();
                } else {
                    w.retain(|&x| x != id);
                }
            }
        }
        self.d.generation += 1;
        self.failed = false;
        self.queue.clear();
        self.d.changed.clear();
    }

    /// Checks every posted propagator by direct evaluation. Only meaningful
    /// when all variables in their scopes are fixed.
    pub fn all_satisfied(&self) -> bool {
        self.props.iter().all(|p| p.satisfied(&self.d))
    }

    pub fn snapshot(&self) -> Vec<Dom> {
        self.d.snapshot()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct Lt(VarId, VarId);

    impl Propagator for Lt {
        fn scope(&self) -> Vec<VarId> {
            vec![self.0, self.1]
        }
        fn propagate(&self, d: &mut Domains) -> PropResult {
            let hi = d.max(self.1) - 1;
            d.set_max(self.0, hi)?;
            let lo = d.min(self.0) + 1;
            d.set_min(self.1, lo)
        }
        fn satisfied(&self, d: &Domains) -> bool {
            d.min(self.0) < d.min(self.1)
        }
    }

    #[test]
    fn push_remove_pop_restores_value() {
        let mut s = Store::new();
        let x = s.new_var(Dom::range(0, 9));
        let m = s.push();
        assert_eq!(s.remove(x, 5), PropStatus::Fixpoint);
        assert!(!s.dom(x).contains(5));
        s.pop(m);
        assert!(s.dom(x).contains(5));
    }

    #[test]
    fn failure_is_undone_by_pop() {
        let mut s = Store::new();
        let x = s.new_var(Dom::range(0, 3));
        let y = s.new_var(Dom::range(0, 3));
        let m = s.push();
        s.post(Lt(x, y));
        assert_eq!(s.post(Lt(y, x)), PropStatus::Failed);
        assert!(s.is_failed());
        s.pop(m);
        assert!(!s.is_failed());
        assert_eq!(s.num_propagators(), 0);
        assert_eq!(s.dom(x), &Dom::range(0, 3));
        assert_eq!(s.dom(y), &Dom::range(0, 3));
    }

    #[test]
    fn nested_choice_points_restore_exactly() {
        let mut s = Store::new();
        let vars: Vec<VarId> = (0..4).map(|i| s.new_var(Dom::range(0, 10 + i))).collect();
        s.post(Lt(vars[0], vars[1]));
        let before = s.snapshot();
        let outer = s.push();
        s.post(Lt(vars[1], vars[2]));
        s.set_min(vars[3], 4);
        let mid = s.snapshot();
        let inner = s.push();
        s.assign(vars[0], 3);
        s.remove(vars[3], 7);
        s.pop(inner);
        assert_eq!(s.snapshot(), mid);
        s.pop(outer);
        assert_eq!(s.snapshot(), before);
        assert_eq!(s.num_propagators(), 1);
    }

    #[test]
    #[should_panic(expected = "LIFO")]
    fn out_of_order_pop_is_rejected() {
        let mut s = Store::new();
        let a = s.push();
        let b = s.push();
        s.pop(a);
        s.pop(b);
    }
}
