//! Reifiable constraint atoms and the propagators built from them.
//!
//! An [`Atom`] is a small formula over variables: a linear expression
//! restricted to a domain, a membership test, or a conjunction/disjunction of
//! atoms. Every atom can report whether it is entailed or already violated
//! under the current bounds, which is what guarded ("daemon") constraints
//! need: [`Implies`] enforces its body once its condition is entailed and
//! refutes the condition as soon as the body becomes impossible.

use std::fmt;

use super::domain::{clamp_wide, Dom};
use super::store::{Domains, Failed, PropResult, Propagator, VarId};

/// `sum(coef * var) + constant`.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct LinExpr {
    pub terms: Vec<(i64, VarId)>,
    pub constant: i64,
}

impl LinExpr {
    pub fn new() -> Self {
        LinExpr::default()
    }

    pub fn var(v: VarId) -> Self {
        LinExpr { terms: vec![(1, v)], constant: 0 }
    }

    pub fn constant(k: i64) -> Self {
        LinExpr { terms: Vec::new(), constant: k }
    }

    pub fn term(mut self, coef: i64, v: VarId) -> Self {
        self.add_term(coef, v);
        self
    }

    pub fn plus(mut self, k: i64) -> Self {
        self.constant += k;
        self
    }

    pub fn add_term(&mut self, coef: i64, v: VarId) {
        if coef == 0 {
            return;
        }
        if let Some(t) = self.terms.iter_mut().find(|t| t.1 == v) {
            t.0 += coef;
        } else {
            self.terms.push((coef, v));
        }
        self.terms.retain(|t| t.0 != 0);
    }

    /// `self - other`.
    pub fn minus(mut self, other: &LinExpr) -> Self {
        for &(c, v) in &other.terms {
            self.add_term(-c, v);
        }
        self.constant -= other.constant;
        self
    }

    pub fn add(mut self, other: &LinExpr) -> Self {
        for &(c, v) in &other.terms {
            self.add_term(c, v);
        }
        self.constant += other.constant;
        self
    }

    pub fn scaled(mut self, k: i64) -> Self {
        for t in &mut self.terms {
            t.0 *= k;
        }
        self.constant *= k;
        self.terms.retain(|t| t.0 != 0);
        self
    }

    fn term_bounds(d: &Domains, c: i64, v: VarId) -> (i128, i128) {
        let (lo, hi) = (d.min(v) as i128, d.max(v) as i128);
        let c = c as i128;
        if c >= 0 {
            (c * lo, c * hi)
        } else {
            (c * hi, c * lo)
        }
    }

    /// Bounds of the expression under the current domains.
    pub fn bounds(&self, d: &Domains) -> (i128, i128) {
        let mut lo = self.constant as i128;
        let mut hi = self.constant as i128;
        for &(c, v) in &self.terms {
            let (a, b) = Self::term_bounds(d, c, v);
            lo += a;
            hi += b;
        }
        (lo, hi)
    }

    /// Value on a total assignment.
    pub fn eval(&self, d: &Domains) -> i128 {
        self.bounds(d).0
    }

    /// Value under an explicit assignment function.
    pub fn eval_with(&self, f: impl Fn(VarId) -> i64) -> i64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(c, v)| acc + c * f(v))
    }
}

fn div_floor(a: i128, b: i128) -> i128 {
    // i64 division is much cheaper than the i128 routine
    if let (Ok(a), Ok(b)) = (i64::try_from(a), i64::try_from(b)) {
        let q = a / b;
        return (q - i64::from(a % b != 0 && (a < 0) != (b < 0))) as i128;
    }
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    -div_floor(-a, b)
}

/// A constraint formula that can be posted, reified and negated.
#[derive(Clone, PartialEq, Eq)]
pub enum Atom {
    /// The expression takes a value in the domain.
    Lin(LinExpr, Dom),
    /// The variable takes a value in the domain.
    Member(VarId, Dom),
    And(Vec<Atom>),
    Or(Vec<Atom>),
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Lin(e, d) => {
                let ts: Vec<String> = e.terms.iter().map(|(c, v)| format!("{c}*v{}", v.0)).collect();
                write!(f, "({} + {}) in {}", ts.join(" + "), e.constant, d)
            }
            Atom::Member(v, d) => write!(f, "v{} in {}", v.0, d),
            Atom::And(xs) => f.debug_tuple("And").field(xs).finish(),
            Atom::Or(xs) => f.debug_tuple("Or").field(xs).finish(),
        }
    }
}

impl Atom {
    pub fn truth() -> Atom {
        Atom::And(Vec::new())
    }

    pub fn falsity() -> Atom {
        Atom::Or(Vec::new())
    }

    /// `lhs <= rhs`
    pub fn le(lhs: LinExpr, rhs: LinExpr) -> Atom {
        Atom::Lin(lhs.minus(&rhs), Dom::at_most(0))
    }

    /// `lhs >= rhs`
    pub fn ge(lhs: LinExpr, rhs: LinExpr) -> Atom {
        Atom::Lin(lhs.minus(&rhs), Dom::at_least(0))
    }

    /// `lhs < rhs`
    pub fn lt(lhs: LinExpr, rhs: LinExpr) -> Atom {
        Atom::Lin(lhs.minus(&rhs), Dom::at_most(-1))
    }

    /// `lhs = rhs`
    pub fn eq(lhs: LinExpr, rhs: LinExpr) -> Atom {
        Atom::Lin(lhs.minus(&rhs), Dom::singleton(0))
    }

    /// `lhs != rhs`
    pub fn ne(lhs: LinExpr, rhs: LinExpr) -> Atom {
        Atom::Lin(lhs.minus(&rhs), Dom::singleton(0).complement())
    }

    /// `lhs - rhs` in `dom`
    pub fn diff_in(lhs: LinExpr, rhs: LinExpr, dom: Dom) -> Atom {
        Atom::Lin(lhs.minus(&rhs), dom)
    }

    pub fn member(v: VarId, dom: Dom) -> Atom {
        Atom::Member(v, dom)
    }

    pub fn is_value(v: VarId, val: i64) -> Atom {
        Atom::Member(v, Dom::singleton(val))
    }

    pub fn and(xs: Vec<Atom>) -> Atom {
        if xs.len() == 1 {
            xs.into_iter().next().unwrap()
        } else {
            Atom::And(xs)
        }
    }

    pub fn or(xs: Vec<Atom>) -> Atom {
        if xs.len() == 1 {
            xs.into_iter().next().unwrap()
        } else {
            Atom::Or(xs)
        }
    }

    pub fn negate(&self) -> Atom {
        match self {
            Atom::Lin(e, d) => Atom::Lin(e.clone(), d.complement()),
            Atom::Member(v, d) => Atom::Member(*v, d.complement()),
            Atom::And(xs) => Atom::Or(xs.iter().map(Atom::negate).collect()),
            Atom::Or(xs) => Atom::And(xs.iter().map(Atom::negate).collect()),
        }
    }

    pub fn collect_vars(&self, out: &mut Vec<VarId>) {
        match self {
            Atom::Lin(e, _) => out.extend(e.terms.iter().map(|t| t.1)),
            Atom::Member(v, _) => out.push(*v),
            Atom::And(xs) | Atom::Or(xs) => xs.iter().for_each(|x| x.collect_vars(out)),
        }
    }

    pub fn vars(&self) -> Vec<VarId> {
        let mut v = Vec::new();
        self.collect_vars(&mut v);
        v.sort_unstable();
        v.dedup();
        v
    }

    /// True when every assignment compatible with the current domains
    /// satisfies the atom (sound, not necessarily complete).
    pub fn entailed(&self, d: &Domains) -> bool {
        match self {
            Atom::Lin(e, dom) => {
                let (lo, hi) = e.bounds(d);
                dom.contains_range(clamp_wide(lo), clamp_wide(hi))
            }
            Atom::Member(v, dom) => d.dom(*v).is_subset(dom),
            Atom::And(xs) => xs.iter().all(|x| x.entailed(d)),
            Atom::Or(xs) => xs.iter().any(|x| x.entailed(d)),
        }
    }

    /// True when no assignment compatible with the current domains can
    /// satisfy the atom (sound, not necessarily complete).
    pub fn infeasible(&self, d: &Domains) -> bool {
        match self {
            Atom::Lin(e, dom) => {
                let (lo, hi) = e.bounds(d);
                !dom.meets_range(clamp_wide(lo), clamp_wide(hi))
            }
            Atom::Member(v, dom) => !d.dom(*v).meets(dom),
            Atom::And(xs) => xs.iter().any(|x| x.infeasible(d)),
            Atom::Or(xs) => xs.iter().all(|x| x.infeasible(d)),
        }
    }

    /// `Some(true)` when entailed, `Some(false)` when infeasible, in one pass.
    pub fn status(&self, d: &Domains) -> Option<bool> {
        match self {
            Atom::Lin(e, dom) => {
                let (lo, hi) = e.bounds(d);
                let (lo, hi) = (clamp_wide(lo), clamp_wide(hi));
                if dom.contains_range(lo, hi) {
                    Some(true)
                } else if !dom.meets_range(lo, hi) {
                    Some(false)
                } else {
                    None
                }
            }
            Atom::Member(v, dom) => {
                let cur = d.dom(*v);
                if cur.is_subset(dom) {
                    Some(true)
                } else if !cur.meets(dom) {
                    Some(false)
                } else {
                    None
                }
            }
            Atom::And(xs) => {
                let mut all = true;
                for x in xs {
                    match x.status(d) {
                        Some(false) => return Some(false),
                        None => all = false,
                        Some(true) => {}
                    }
                }
                all.then_some(true)
            }
            Atom::Or(xs) => {
                let mut none = true;
                for x in xs {
                    match x.status(d) {
                        Some(true) => return Some(true),
                        None => none = false,
                        Some(false) => {}
                    }
                }
                none.then_some(false)
            }
        }
    }

    /// Evaluates on a total assignment.
    pub fn holds(&self, d: &Domains) -> bool {
        match self {
            Atom::Lin(e, dom) => dom.contains(clamp_wide(e.eval(d))),
            Atom::Member(v, dom) => dom.contains(d.min(*v)),
            Atom::And(xs) => xs.iter().all(|x| x.holds(d)),
            Atom::Or(xs) => xs.iter().any(|x| x.holds(d)),
        }
    }

    /// Removes values that cannot satisfy the atom.
    pub fn propagate(&self, d: &mut Domains) -> PropResult {
        match self {
            Atom::Lin(e, dom) => propagate_lin(e, dom, d),
            Atom::Member(v, dom) => d.intersect(*v, dom),
            Atom::And(xs) => {
                for x in xs {
                    x.propagate(d)?;
                }
                Ok(())
            }
            Atom::Or(xs) => {
                let mut live = None;
                for (i, x) in xs.iter().enumerate() {
                    match x.status(d) {
                        Some(true) => return Ok(()),
                        Some(false) => {}
                        None => {
                            if live.is_some() {
                                return Ok(());
                            }
                            live = Some(i);
                        }
                    }
                }
                match live {
                    None => Err(Failed),
                    Some(i) => xs[i].propagate(d),
                }
            }
        }
    }
}

/// Bounds propagation for `e in dom`, with exact hole punching when a single
/// unit-coefficient variable remains unfixed.
fn propagate_lin(e: &LinExpr, dom: &Dom, d: &mut Domains) -> PropResult {
    loop {
        let mut changed = false;
        let (smin, smax) = e.bounds(d);
        let reach = dom.intersect(&Dom::range(clamp_wide(smin), clamp_wide(smax)));
        if reach.is_empty() {
            return Err(Failed);
        }
        let (lo, hi) = (reach.min() as i128, reach.max() as i128);
        let mut unfixed = None;
        let mut n_unfixed = 0;
        for &(c, v) in &e.terms {
            let (tmin, tmax) = LinExpr::term_bounds(d, c, v);
            let omin = smin - tmin;
            let omax = smax - tmax;
            let c = c as i128;
            let (nlo, nhi) = if c > 0 {
                (div_ceil(lo - omax, c), div_floor(hi - omin, c))
            } else {
                (div_ceil(hi - omin, c), div_floor(lo - omax, c))
            };
            let (cur_lo, cur_hi) = (d.min(v) as i128, d.max(v) as i128);
            if nlo > cur_lo {
                d.set_min(v, clamp_wide(nlo))?;
                changed = true;
            }
            if nhi < cur_hi {
                d.set_max(v, clamp_wide(nhi))?;
                changed = true;
            }
            if !d.is_fixed(v) {
                n_unfixed += 1;
                unfixed = Some((c, v));
            }
        }
        if n_unfixed == 1 {
            let (c, v) = unfixed.unwrap();
            if c == 1 || c == -1 {
                // others are fixed: c*v in dom - rest
                let rest = e.eval_with(|u| if u == v { 0 } else { d.min(u) });
                let mut allowed = dom.shift(-rest);
                if c == -1 {
                    allowed = allowed.negate();
                }
                let before = d.dom(v).clone();
                d.intersect(v, &allowed)?;
                if d.dom(v) != &before {
                    changed = true;
                }
            }
        } else if n_unfixed == 0 {
            let val = clamp_wide(e.eval(d));
            if !dom.contains(val) {
                return Err(Failed);
            }
        }
        if !changed {
            return Ok(());
        }
    }
}

/// Posts an atom unconditionally.
#[derive(Debug)]
pub struct AtomProp {
    pub atom: Atom,
    scope: Vec<VarId>,
}

impl AtomProp {
    pub fn new(atom: Atom) -> Self {
        let scope = atom.vars();
        AtomProp { atom, scope }
    }
}

impl Propagator for AtomProp {
    fn scope(&self) -> Vec<VarId> {
        self.scope.clone()
    }

    fn propagate(&self, d: &mut Domains) -> PropResult {
        self.atom.propagate(d)
    }

    fn satisfied(&self, d: &Domains) -> bool {
        self.atom.holds(d)
    }

    fn entailed(&self, d: &Domains) -> bool {
        self.atom.status(d) == Some(true)
    }
}

/// `cond => body`. Enforces `body` once `cond` is entailed, and `not cond`
/// once `body` is refuted.
#[derive(Debug)]
pub struct Implies {
    pub cond: Atom,
    pub body: Atom,
    neg_cond: Atom,
    scope: Vec<VarId>,
}

impl Implies {
    pub fn new(cond: Atom, body: Atom) -> Self {
        let mut scope = cond.vars();
        scope.extend(body.vars());
        scope.sort_unstable();
        scope.dedup();
        let neg_cond = cond.negate();
        Implies { cond, body, neg_cond, scope }
    }
}

impl Propagator for Implies {
    fn scope(&self) -> Vec<VarId> {
        self.scope.clone()
    }

    fn propagate(&self, d: &mut Domains) -> PropResult {
        match self.cond.status(d) {
            Some(true) => self.body.propagate(d),
            Some(false) => Ok(()),
            None if self.body.status(d) == Some(false) => self.neg_cond.propagate(d),
            None => Ok(()),
        }
    }

    fn satisfied(&self, d: &Domains) -> bool {
        !self.cond.holds(d) || self.body.holds(d)
    }

    fn entailed(&self, d: &Domains) -> bool {
        self.cond.status(d) == Some(false)
    }
}

/// `product = left * right` over non-negative domains, bounds reasoning only.
#[derive(Debug)]
pub struct Product {
    pub product: VarId,
    pub left: VarId,
    pub right: VarId,
}

impl Propagator for Product {
    fn scope(&self) -> Vec<VarId> {
        vec![self.product, self.left, self.right]
    }

    fn propagate(&self, d: &mut Domains) -> PropResult {
        let (s, l, w) = (self.product, self.left, self.right);
        d.set_min(l, 0)?;
        d.set_min(w, 0)?;
        d.set_min(s, 0)?;
        loop {
            let (l0, l1) = (d.min(l) as i128, d.max(l) as i128);
            let (w0, w1) = (d.min(w) as i128, d.max(w) as i128);
            d.set_min(s, clamp_wide(l0 * w0))?;
            d.set_max(s, clamp_wide(l1 * w1))?;
            let (s0, s1) = (d.min(s) as i128, d.max(s) as i128);
            let before = (d.min(l), d.max(l), d.min(w), d.max(w));
            if w1 > 0 {
                d.set_min(l, clamp_wide(div_ceil(s0, w1)))?;
            }
            if w0 > 0 {
                d.set_max(l, clamp_wide(div_floor(s1, w0)))?;
            }
            let (l0, l1) = (d.min(l) as i128, d.max(l) as i128);
            if l1 > 0 {
                d.set_min(w, clamp_wide(div_ceil(s0, l1)))?;
            }
            if l0 > 0 {
                d.set_max(w, clamp_wide(div_floor(s1, l0)))?;
            }
            if d.is_fixed(l) && d.is_fixed(w) {
                d.assign(s, d.min(l) * d.min(w))?;
            }
            if before == (d.min(l), d.max(l), d.min(w), d.max(w)) {
                return Ok(());
            }
        }
    }

    fn satisfied(&self, d: &Domains) -> bool {
        d.min(self.product) as i128 == d.min(self.left) as i128 * d.min(self.right) as i128
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::store::{PropStatus, Store};
    use proptest::prelude::*;

    fn x2_eq_x1_plus_l(x2: VarId, x1: VarId, l: VarId) -> AtomProp {
        AtomProp::new(Atom::eq(LinExpr::var(x2), LinExpr::var(x1).term(1, l)))
    }

    #[test]
    fn sum_reduces_coordinates_like_the_worked_example() {
        let mut s = Store::new();
        let x1 = s.new_var(Dom::range(0, 10));
        let l = s.new_var(Dom::range(2, 6));
        let x2 = s.new_var(Dom::range(0, 10));
        assert_eq!(s.post(x2_eq_x1_plus_l(x2, x1, l)), PropStatus::Fixpoint);
        assert_eq!(s.dom(x1), &Dom::range(0, 8));
        assert_eq!(s.dom(x2), &Dom::range(2, 10));
        assert_eq!(s.dom(l), &Dom::range(2, 6));
    }

    #[test]
    fn self_sum_with_zero_is_identity() {
        let mut s = Store::new();
        let x = s.new_var(Dom::from_values([1, 4, 9]));
        let z = s.new_var(Dom::singleton(0));
        assert_eq!(s.post(x2_eq_x1_plus_l(x, x, z)), PropStatus::Fixpoint);
        assert_eq!(s.dom(x), &Dom::from_values([1, 4, 9]));
    }

    #[test]
    fn product_bound_reduction() {
        let mut s = Store::new();
        let a = s.new_var(Dom::range(13, 36));
        let l = s.new_var(Dom::range(2, 6));
        let w = s.new_var(Dom::range(2, 6));
        assert_eq!(s.post(Product { product: a, left: l, right: w }), PropStatus::Fixpoint);
        assert_eq!(s.dom(l), &Dom::range(3, 6));
        assert_eq!(s.dom(w), &Dom::range(3, 6));
    }

    #[test]
    fn ne_const_punches_hole() {
        let mut s = Store::new();
        let x = s.new_var(Dom::range(0, 10));
        let e = s.new_var(Dom::singleton(0));
        s.post(AtomProp::new(Atom::ne(LinExpr::var(x), LinExpr::var(e).plus(1))));
        s.post(AtomProp::new(Atom::ne(LinExpr::var(x), LinExpr::var(e).plus(2))));
        assert_eq!(s.dom(x).intervals(), &[(0, 0), (3, 10)]);
    }

    #[test]
    fn implication_refutes_condition_when_body_impossible() {
        let mut s = Store::new();
        let r = s.new_var(Dom::range(0, 3));
        let y = s.new_var(Dom::range(0, 4));
        // r = 2 => y >= 7 ; impossible, so 2 leaves r
        s.post(Implies::new(
            Atom::is_value(r, 2),
            Atom::ge(LinExpr::var(y), LinExpr::constant(7)),
        ));
        assert_eq!(s.dom(r), &Dom::from_values([0, 1, 3]));
        // r = 1 => y <= 1 ; fires after r is fixed
        s.post(Implies::new(Atom::is_value(r, 1), Atom::le(LinExpr::var(y), LinExpr::constant(1))));
        assert_eq!(s.dom(y), &Dom::range(0, 4));
        s.assign(r, 1);
        assert_eq!(s.dom(y), &Dom::range(0, 1));
    }

    #[test]
    fn disjunction_propagates_last_live_branch() {
        let mut s = Store::new();
        let x = s.new_var(Dom::range(0, 10));
        let y = s.new_var(Dom::range(0, 10));
        s.post(AtomProp::new(Atom::or(vec![
            Atom::ge(LinExpr::var(x), LinExpr::constant(20)),
            Atom::le(LinExpr::var(y), LinExpr::constant(3)),
        ])));
        assert_eq!(s.dom(y), &Dom::range(0, 3));
    }

    // Brute-force support check: every value removed by a linear atom has no
    // support among the full cartesian product of the original domains.
    proptest! {
        #[test]
        fn linear_never_removes_supported_values(
            coefs in proptest::collection::vec(-3i64..=3, 1..=3),
            los in proptest::collection::vec(-5i64..5, 3),
            widths in proptest::collection::vec(0i64..6, 3),
            dlo in -10i64..10, dw in 0i64..8, hole in -10i64..10,
        ) {
            let mut s = Store::new();
            let n = coefs.len();
            let vars: Vec<VarId> = (0..n).map(|i| s.new_var(Dom::range(los[i], los[i] + widths[i]))).collect();
            let orig: Vec<Dom> = vars.iter().map(|&v| s.dom(v).clone()).collect();
            let mut e = LinExpr::new();
            for (i, &c) in coefs.iter().enumerate() { e.add_term(c, vars[i]); }
            let dom = Dom::range(dlo, dlo + dw).without(hole);
            let atom = Atom::Lin(e.clone(), dom.clone());
            let status = s.post(AtomProp::new(atom));
            // enumerate supports
            let mut supported: Vec<std::collections::BTreeSet<i64>> = vec![Default::default(); n];
            let mut any = false;
            let mut idx = vec![0usize; n];
            let vals: Vec<Vec<i64>> = orig.iter().map(|d| d.values().collect()).collect();
            loop {
                let asg: Vec<i64> = (0..n).map(|i| vals[i][idx[i]]).collect();
                let sum: i64 = e.terms.iter().map(|&(c, v)| c * asg[vars.iter().position(|&u| u == v).unwrap()]).sum();
                if dom.contains(sum) {
                    any = true;
                    for i in 0..n { supported[i].insert(asg[i]); }
                }
                let mut k = 0;
                loop {
                    if k == n { break; }
                    idx[k] += 1;
                    if idx[k] < vals[k].len() { break; }
                    idx[k] = 0; k += 1;
                }
                if k == n { break; }
            }
            if status == PropStatus::Failed {
                let all_zero = coefs.iter().all(|&c| c == 0);
                prop_assert!(!any || all_zero);
            } else {
                for i in 0..n {
                    for v in &supported[i] {
                        prop_assert!(s.dom(vars[i]).contains(*v), "removed supported value {} of var {}", v, i);
                    }
                }
            }
        }

        #[test]
        fn product_never_removes_supported_values(
            l0 in 0i64..8, lw in 0i64..6, w0 in 0i64..8, ww in 0i64..6, s0 in 0i64..60, sw in 0i64..40,
        ) {
            let mut st = Store::new();
            let l = st.new_var(Dom::range(l0, l0 + lw));
            let w = st.new_var(Dom::range(w0, w0 + ww));
            let a = st.new_var(Dom::range(s0, s0 + sw));
            let status = st.post(Product { product: a, left: l, right: w });
            let mut any = false;
            for lv in l0..=l0 + lw {
                for wv in w0..=w0 + ww {
                    let p = lv * wv;
                    if (s0..=s0 + sw).contains(&p) {
                        any = true;
                        prop_assert!(status == PropStatus::Fixpoint);
                        prop_assert!(st.dom(l).contains(lv) && st.dom(w).contains(wv) && st.dom(a).contains(p));
                    }
                }
            }
            if !any { prop_assert!(status == PropStatus::Failed || !st.dom(a).is_empty()); }
        }
    }
}
