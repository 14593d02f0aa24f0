//! Implied constraints that shrink the search without losing topologies:
//! facing gaps, incoherent spaces, symmetry of interchangeable spaces,
//! contour-side exclusion and north/south transitivity.
//!
//! The gap and incoherent-space rules rely on total recovery and
//! non-overlap: a strip narrower than every space that could fill it must
//! not exist.

use std::collections::{BTreeMap, BTreeSet};

use crate::constraints::{gap_expr, overlap_at_most, position_atom_existing};
use crate::fd::{Atom, AtomProp, Dom, Domains, Implies, LinExpr, PropResult, Propagator, VarId, INF};
use crate::model::{Model, Rect};
use crate::problem::{ConstraintSpec, DminMode, LinkSpec, Problem, Side, SpaceKind};

pub(crate) fn post_reductions(m: &mut Model) {
    let red = m.problem.spec.reductions;
    for unit in 0..m.contours.len() {
        let u = &m.problem.spec.units[unit];
        let packed = u.total_recovery && u.non_overlap;
        if packed && red.gap {
            post_gap_rule(m, unit);
        }
        if packed && red.incoherent {
            post_incoherent(m, unit, red.dmin);
        }
        if red.orientation_propagation {
            post_transitivity(m, unit);
        }
    }
    if red.topological {
        post_topological(m);
    }
    m.symmetry_groups = symmetry_groups(&m.problem);
    if red.symmetry {
        for g in m.symmetry_groups.clone() {
            post_symmetry(m, &g);
        }
    }
}

/// Smallest lengths and widths among the spaces of `unit` other than
/// `skip`, from the current domains; `INF` when there are none.
fn min_dims(d: &Domains, others: &[(VarId, VarId)]) -> (i64, i64) {
    others.iter().fold((INF, INF), |(l, w), &(vl, vw)| (l.min(d.min(vl)), w.min(d.min(vw))))
}

fn other_dims(m: &Model, unit: usize, skip: &[usize]) -> Vec<(VarId, VarId)> {
    m.problem.unit_spaces[unit]
        .iter()
        .filter(|s| !skip.contains(s))
        .map(|&s| (m.spaces[s].l, m.spaces[s].w))
        .collect()
}

fn exclude_small(e: LinExpr, dmin: i64) -> Atom {
    if dmin <= 1 {
        Atom::truth()
    } else {
        Atom::Lin(e, Dom::range(1, dmin - 1).complement())
    }
}

/// Two spaces facing each other are either in contact or far enough apart
/// to fit another space in between.
fn post_gap_rule(m: &mut Model, unit: usize) {
    let pairs: Vec<((usize, usize), VarId)> = m
        .rels
        .iter()
        .filter(|((a, _), _)| m.unit_of(*a) == unit)
        .map(|(&k, &v)| (k, v))
        .collect();
    for ((a, b), r) in pairs {
        let (dl, dw) = min_dims(m.store.domains(), &other_dims(m, unit, &[a, b]));
        let (ra, rb) = (m.spaces[a], m.spaces[b]);
        for side in Side::ALL {
            // a north/south gap must be filled by spaces no wider than it
            let dmin = if matches!(side, Side::N | Side::S) { dw } else { dl };
            if dmin <= 1 {
                continue;
            }
            let body = Atom::or(vec![
                overlap_at_most(&ra, &rb, side, 0),
                exclude_small(gap_expr(&ra, &rb, side), dmin),
            ]);
            m.store.post(Implies::new(Atom::is_value(r, side.code()), body));
        }
    }
}

/// Keeps the strips between a space and each contour side either empty or
/// at least as thick as the smallest other space.
#[derive(Debug)]
pub struct Incoherent {
    pub rect: Rect,
    pub contour: Rect,
    pub others: Vec<(VarId, VarId)>,
    /// Fixed `(length, width)` thresholds; recomputed from `others` when absent.
    pub fixed: Option<(i64, i64)>,
}

impl Incoherent {
    fn thresholds(&self, d: &Domains) -> (i64, i64) {
        self.fixed.unwrap_or_else(|| min_dims(d, &self.others))
    }

    /// `(far, near, threshold)`: each distance `far - near` avoids `[1, threshold - 1]`.
    fn gaps(&self, d: &Domains) -> [(VarId, VarId, i64); 4] {
        let (dl, dw) = self.thresholds(d);
        let (r, c) = (&self.rect, &self.contour);
        [(r.x1, c.x1, dl), (c.x2, r.x2, dl), (r.y1, c.y1, dw), (c.y2, r.y2, dw)]
    }
}

/// Removes the values putting `p - q` in `[1, t - 1]`.
fn exclude_gap(d: &mut Domains, p: VarId, q: VarId, t: i64) -> PropResult {
    if t <= 1 {
        return Ok(());
    }
    let (lo, hi) = (d.min(p) - d.max(q), d.max(p) - d.min(q));
    if let Some(qv) = d.value(q) {
        return d.intersect(p, &Dom::range(qv + 1, qv + t - 1).complement());
    }
    if let Some(pv) = d.value(p) {
        return d.intersect(q, &Dom::range(pv - t + 1, pv - 1).complement());
    }
    if lo >= 1 {
        d.set_min(p, d.min(q) + t)?;
        d.set_max(q, d.max(p) - t)?;
    } else if hi <= t - 1 {
        d.set_max(p, d.max(q))?;
        d.set_min(q, d.min(p))?;
    }
    Ok(())
}

impl Propagator for Incoherent {
    fn scope(&self) -> Vec<VarId> {
        let (r, c) = (&self.rect, &self.contour);
        let mut v = vec![r.x1, r.x2, r.y1, r.y2, c.x1, c.x2, c.y1, c.y2];
        if self.fixed.is_none() {
            v.extend(self.others.iter().flat_map(|&(l, w)| [l, w]));
        }
        v
    }

    fn propagate(&self, d: &mut Domains) -> PropResult {
        for (p, q, t) in self.gaps(d) {
            exclude_gap(d, p, q, t)?;
        }
        Ok(())
    }

    fn satisfied(&self, d: &Domains) -> bool {
        self.gaps(d).iter().all(|&(p, q, t)| {
            let g = d.min(p) - d.min(q);
            g < 1 || g >= t
        })
    }
}

fn post_incoherent(m: &mut Model, unit: usize, mode: DminMode) {
    let spaces = m.problem.unit_spaces[unit].clone();
    let fixed_all = match mode {
        DminMode::Static => Some(min_dims(m.store.domains(), &other_dims(m, unit, &[]))),
        DminMode::Dynamic => None,
    };
    for s in spaces {
        let p = Incoherent {
            rect: m.spaces[s],
            contour: m.contours[unit],
            others: other_dims(m, unit, &[s]),
            fixed: fixed_all,
        };
        m.store.post(p);
    }
}

/// `a` south of `b` and `b` south of `c` puts `a` south of `c`.
fn post_transitivity(m: &mut Model, unit: usize) {
    let spaces = m.problem.unit_spaces[unit].clone();
    for &a in &spaces {
        for &b in &spaces {
            for &c in &spaces {
                if a == b || b == c || a == c {
                    continue;
                }
                let (Some(ab), Some(bc), Some(ac)) = (
                    position_atom_existing(m, a, b, Side::N),
                    position_atom_existing(m, b, c, Side::N),
                    position_atom_existing(m, a, c, Side::N),
                ) else {
                    continue;
                };
                m.store.post(Implies::new(Atom::and(vec![ab, bc]), ac));
            }
        }
    }
}

/// A space attached to a contour side has nothing beyond it on that side.
fn post_topological(m: &mut Model) {
    for cc in m.contour_choices.clone() {
        let unit = m.unit_of(cc.space);
        for &side in &cc.sides {
            for &o in &m.problem.unit_spaces[unit].clone() {
                if o == cc.space {
                    continue;
                }
                if let Some(pos) = position_atom_existing(m, cc.space, o, side) {
                    m.store.post(Implies::new(Atom::is_value(cc.var, side.code()), pos.negate()));
                }
            }
        }
    }
}

/// Description of everything the problem says about a space, with the space
/// itself replaced by a placeholder. Equal keys mean interchangeable spaces.
fn space_key(p: &Problem, i: usize) -> Option<String> {
    let s = &p.spec.spaces[i];
    if s.kind == SpaceKind::Staircase {
        return None;
    }
    let linked = p.spec.links.iter().any(|l| match l {
        LinkSpec::Stairs { lower, upper } => *lower == s.id || *upper == s.id,
        LinkSpec::Superimpose { .. } => false,
    });
    if linked {
        return None;
    }
    let mut shape = s.clone();
    shape.id = String::new();
    shape.label = None;
    let mut about: Vec<String> = p
        .spec
        .constraints
        .iter()
        .filter(|c| c.spaces().contains(&s.id.as_str()))
        .map(|c| describe(c, &s.id))
        .collect();
    about.sort();
    Some(format!("{}|{}", serde_json::to_string(&shape).ok()?, about.join(";")))
}

fn describe(c: &ConstraintSpec, id: &str) -> String {
    let mut v = serde_json::to_value(c).expect("constraints serialize");
    fn replace(v: &mut serde_json::Value, id: &str) {
        match v {
            serde_json::Value::String(s) if s == id => *s = "\u{0}self".into(),
            serde_json::Value::String(s) => {
                if let Some(attr) = s.strip_prefix(id).and_then(|r| r.strip_prefix('.')) {
                    *s = format!("\u{0}self.{attr}");
                }
            }
            serde_json::Value::Array(xs) => xs.iter_mut().for_each(|x| replace(x, id)),
            serde_json::Value::Object(o) => o.values_mut().for_each(|x| replace(x, id)),
            _ => {}
        }
    }
    replace(&mut v, id);
    v.to_string()
}

/// Groups of interchangeable spaces, each sorted, in order of first member.
pub fn symmetry_groups(p: &Problem) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = p
        .spec
        .symmetry
        .groups
        .iter()
        .map(|g| {
            let mut v: Vec<usize> = g.iter().filter_map(|id| p.space(id)).collect();
            v.sort();
            v.dedup();
            v
        })
        .filter(|g| g.len() > 1)
        .collect();
    if p.spec.symmetry.auto {
        let taken: BTreeSet<usize> = groups.iter().flatten().copied().collect();
        let mut by_key: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for i in 0..p.num_spaces() {
            if taken.contains(&i) {
                continue;
            }
            if let Some(k) = space_key(p, i) {
                by_key.entry(k).or_default().push(i);
            }
        }
        groups.extend(by_key.into_values().filter(|g| g.len() > 1));
    }
    groups.sort();
    groups
}

/// Lower-left corners strictly increasing in (x1, y1) order along `group`.
fn post_symmetry(m: &mut Model, group: &[usize]) {
    let lex = |m: &Model, i: usize, j: usize| -> Vec<Atom> {
        let (a, b) = (m.spaces[i], m.spaces[j]);
        vec![
            Atom::le(LinExpr::var(a.x1), LinExpr::var(b.x1)),
            Atom::or(vec![
                Atom::lt(LinExpr::var(a.x1), LinExpr::var(b.x1)),
                Atom::lt(LinExpr::var(a.y1), LinExpr::var(b.y1)),
            ]),
        ]
    };
    let rotatable = group.iter().all(|&i| m.orientation[i].is_some());
    for (k, &i) in group.iter().enumerate() {
        for &j in &group[k + 1..] {
            if !rotatable {
                for a in lex(m, i, j) {
                    m.store.post(AtomProp::new(a));
                }
                continue;
            }
            // upright members first, then rotated ones, each group ordered
            let (oi, oj) = (m.orientation[i].unwrap(), m.orientation[j].unwrap());
            let rot = |o: VarId| Atom::member(o, Dom::at_least(1));
            m.store.post(Implies::new(rot(oi), rot(oj)));
            let same = Atom::or(vec![
                Atom::and(vec![rot(oi), rot(oj)]),
                Atom::and(vec![rot(oi).negate(), rot(oj).negate()]),
            ]);
            m.store.post(Implies::new(same, Atom::and(lex(m, i, j))));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Bounds, Problem, ProblemSpec, SpaceSpec};
    use std::sync::Arc;

    fn squares(n: usize) -> ProblemSpec {
        let mut spec = ProblemSpec::new("sq").unit("u", 4, 4);
        for i in 0..n {
            spec = spec.space(
                SpaceSpec::new(&format!("s{i}"), "u", SpaceKind::Room).dims(Bounds::exactly(2), Bounds::exactly(2)),
            );
        }
        spec
    }

    #[test]
    fn identical_spaces_form_one_group() {
        let m = Model::build(Arc::new(Problem::new(squares(4)).unwrap()));
        assert_eq!(m.symmetry_groups, vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn constraints_split_groups() {
        let spec = squares(3).constraint(ConstraintSpec::OnContour { space: "s1".into(), sides: vec![Side::N] });
        let m = Model::build(Arc::new(Problem::new(spec).unwrap()));
        assert_eq!(m.symmetry_groups, vec![vec![0, 2]]);
    }

    #[test]
    fn incoherent_strip_is_excluded() {
        // a 1-wide strip west of s0 could only be filled by a 2-wide square
        let mut spec = squares(4);
        spec.reductions.symmetry = false;
        let mut m = Model::build(Arc::new(Problem::new(spec).unwrap()));
        let r = m.spaces[0];
        assert!(!m.store.dom(r.x1).contains(1));
        assert!(m.store.assign(r.x1, 1).is_failed());
    }
}
