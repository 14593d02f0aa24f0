//! Topological constraints: relative positions, adjacency, contour
//! attachment, staircase access, corridor alignment, ratios and OR.
//!
//! Relative positions are discrete variables. For a pair `(a, b)` with
//! `a < b` the variable tells where `b` lies with respect to `a`: north
//! (`b` entirely above), south, or east/west with overlapping y
//! projections. Units without the non-overlap requirement get a fifth value,
//! [`OVERLAP`], for pairs whose interiors intersect.

use crate::fd::{Atom, AtomProp, Dom, Implies, LinExpr, Store, VarId, INF};
use crate::model::{stair_config_of, ContourChoice, Model, OrChoice, Rect, StairConfig};
use crate::problem::{AdjacentSpec, Bounds, Clause, ConstraintSpec, FirstStep, Side, Step};

/// Relation value for intersecting interiors.
pub const OVERLAP: i64 = 4;

fn v(x: VarId) -> LinExpr {
    LinExpr::var(x)
}

/// `p - q` for two variables.
fn d(p: VarId, q: VarId) -> LinExpr {
    LinExpr::var(p).term(-1, q)
}

/// Distance from `a` to `b` when `b` lies on `side` of `a`.
pub fn gap_expr(a: &Rect, b: &Rect, side: Side) -> LinExpr {
    match side {
        Side::N => d(b.y1, a.y2),
        Side::S => d(a.y1, b.y2),
        Side::E => d(b.x1, a.x2),
        Side::W => d(a.x1, b.x2),
    }
}

/// Projection endpoints `(a.lo, a.hi, b.lo, b.hi)` on the axis along which
/// `b` and `a` face each other when `b` is on `side`.
fn facing_axis(a: &Rect, b: &Rect, side: Side) -> (VarId, VarId, VarId, VarId) {
    match side {
        Side::N | Side::S => (a.x1, a.x2, b.x1, b.x2),
        Side::E | Side::W => (a.y1, a.y2, b.y1, b.y2),
    }
}

/// `min(a.hi, b.hi) - max(a.lo, b.lo) >= k`
pub fn overlap_at_least(a: &Rect, b: &Rect, side: Side, k: i64) -> Atom {
    let (alo, ahi, blo, bhi) = facing_axis(a, b, side);
    let ge = |e: LinExpr| Atom::Lin(e, Dom::at_least(k));
    Atom::and(vec![ge(d(ahi, alo)), ge(d(bhi, blo)), ge(d(ahi, blo)), ge(d(bhi, alo))])
}

/// `min(a.hi, b.hi) - max(a.lo, b.lo) <= k`
pub fn overlap_at_most(a: &Rect, b: &Rect, side: Side, k: i64) -> Atom {
    let (alo, ahi, blo, bhi) = facing_axis(a, b, side);
    let le = |e: LinExpr| Atom::Lin(e, Dom::at_most(k));
    Atom::or(vec![le(d(ahi, alo)), le(d(ahi, blo)), le(d(bhi, alo)), le(d(bhi, blo))])
}

fn overlap_in(a: &Rect, b: &Rect, side: Side, d1: &Bounds) -> Atom {
    let mut parts = Vec::new();
    if d1.lo() > -INF {
        parts.push(overlap_at_least(a, b, side, d1.lo()));
    }
    if d1.hi() < INF {
        parts.push(overlap_at_most(a, b, side, d1.hi()));
    }
    Atom::and(parts)
}

/// Geometric meaning of a relation value.
pub fn position_body(a: &Rect, b: &Rect, code: i64) -> Atom {
    let strictly = |e: LinExpr| Atom::Lin(e, Dom::at_most(-1));
    let y_overlap = || vec![strictly(d(b.y1, a.y2)), strictly(d(a.y1, b.y2))];
    if code == OVERLAP {
        let mut xs = y_overlap();
        xs.push(strictly(d(b.x1, a.x2)));
        xs.push(strictly(d(a.x1, b.x2)));
        return Atom::and(xs);
    }
    let side = Side::from_code(code);
    let apart = Atom::Lin(gap_expr(a, b, side), Dom::at_least(0));
    match side {
        Side::N | Side::S => apart,
        Side::E | Side::W => {
            let mut xs = vec![apart];
            xs.extend(y_overlap());
            Atom::and(xs)
        }
    }
}

/// Creates the relation variable of a pair if it does not exist yet.
pub fn ensure_rel(m: &mut Model, a: usize, b: usize) -> VarId {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    if let Some(&r) = m.rels.get(&(a, b)) {
        return r;
    }
    let unit = &m.problem.spec.units[m.unit_of(a)];
    let mut codes: Vec<i64> = Side::ALL.iter().map(|s| s.code()).collect();
    if !unit.non_overlap {
        codes.push(OVERLAP);
    }
    let r = m.store.new_var(Dom::from_values(codes.iter().copied()));
    let (ra, rb) = (m.spaces[a], m.spaces[b]);
    for &c in &codes {
        m.store.post(Implies::new(Atom::is_value(r, c), position_body(&ra, &rb, c)));
    }
    m.rels.insert((a, b), r);
    r
}

/// `b` lies on `side` of `a`.
pub fn position_atom(m: &mut Model, a: usize, b: usize, side: Side) -> Atom {
    let r = ensure_rel(m, a, b);
    let code = if a < b { side.code() } else { side.opposite().code() };
    Atom::is_value(r, code)
}

/// Position atom over existing relations only.
pub fn position_atom_existing(m: &Model, a: usize, b: usize, side: Side) -> Option<Atom> {
    let (r, flipped) = m.rel(a, b)?;
    let code = if flipped { side.opposite().code() } else { side.code() };
    Some(Atom::is_value(r, code))
}

fn adjacency_parts(m: &mut Model, spec: &AdjacentSpec) -> Vec<(Atom, Atom)> {
    let a = m.problem.space(&spec.a).unwrap();
    let b = m.problem.space(&spec.b).unwrap();
    let (ra, rb) = (m.spaces[a], m.spaces[b]);
    spec.allowed()
        .into_iter()
        .map(|side| {
            let pos = position_atom(m, a, b, side);
            let body = Atom::and(vec![
                Atom::Lin(gap_expr(&ra, &rb, side), spec.d2.dom()),
                overlap_in(&ra, &rb, side, &spec.d1),
            ]);
            (pos, body)
        })
        .collect()
}

/// Reified adjacency.
pub fn adjacency_atom(m: &mut Model, spec: &AdjacentSpec) -> Atom {
    let parts = adjacency_parts(m, spec);
    Atom::or(parts.into_iter().map(|(p, b)| Atom::and(vec![p, b])).collect())
}

pub fn post_adjacent(m: &mut Model, spec: &AdjacentSpec) {
    let parts = adjacency_parts(m, spec);
    let allowed = Atom::or(parts.iter().map(|(p, _)| p.clone()).collect());
    m.store.post(AtomProp::new(allowed));
    for (pos, body) in parts {
        m.store.post(Implies::new(pos, body));
    }
}

/// The space's `side` edge lies on the same side of its contour.
pub fn contour_side_atom(r: &Rect, c: &Rect, side: Side) -> Atom {
    Atom::eq(v(r.edge(side)), v(c.edge(side)))
}

fn post_on_contour(m: &mut Model, k: usize, space: usize, sides: &[Side]) {
    let (r, c) = (m.spaces[space], m.contour_of(space));
    let var = m.store.new_var(Dom::from_values(sides.iter().map(|s| s.code())));
    for (i, &side) in sides.iter().enumerate() {
        let mut body = vec![contour_side_atom(&r, &c, side)];
        body.extend(sides[..i].iter().map(|&s| contour_side_atom(&r, &c, s).negate()));
        m.store.post(Implies::new(Atom::is_value(var, side.code()), Atom::and(body)));
    }
    m.contour_choices.push(ContourChoice { constraint: k, space, var, sides: sides.to_vec() });
}

fn clause_atom(m: &mut Model, c: &Clause) -> Atom {
    match c {
        Clause::Adjacent(a) => adjacency_atom(m, a),
        Clause::OnContour { space, sides } => {
            let i = m.problem.space(space).unwrap();
            let (r, ct) = (m.spaces[i], m.contour_of(i));
            Atom::and(sides.iter().map(|&s| contour_side_atom(&r, &ct, s)).collect())
        }
    }
}

fn post_or(m: &mut Model, k: usize, left: &[Clause], right: &[Clause]) {
    let p1 = Atom::and(left.iter().map(|c| clause_atom(m, c)).collect());
    let p2 = Atom::and(right.iter().map(|c| clause_atom(m, c)).collect());
    let var = m.store.new_var(Dom::range(1, 2));
    m.store.post(Implies::new(Atom::is_value(var, 1), p1.clone()));
    m.store.post(Implies::new(Atom::is_value(var, 2), Atom::and(vec![p2.clone(), p1.negate()])));
    m.or_choices.push(OrChoice { constraint: k, var, left: p1, right: p2 });
}

/// Half of a staircase edge, as `(lower_half)`; `None` is the whole edge.
fn step_half(degrees: u16, first: Option<FirstStep>, step: Step) -> Option<bool> {
    let first = first?;
    let on_left = (first == FirstStep::Left) == (step == Step::First);
    // climbing north or west, the left hand points to lower coordinates
    Some(on_left == matches!(degrees, 0 | 90))
}

/// `space` gives access to the first or last step of `st` for one staircase
/// configuration: it touches the step edge from outside and covers the
/// step's extent along it.
pub fn stair_access_atom(st: &Rect, sp: &Rect, degrees: u16, first: Option<FirstStep>, step: Step) -> Atom {
    let cfg = StairConfig { degrees, first };
    let side = match step {
        Step::First => cfg.entry_side(),
        Step::Last => cfg.exit_side(),
    };
    let touch = Atom::Lin(gap_expr(st, sp, side), Dom::singleton(0));
    let (slo, shi, plo, phi) = facing_axis(st, sp, side);
    let covers = match step_half(degrees, first, step) {
        None => vec![Atom::le(v(plo), v(slo)), Atom::ge(v(phi), v(shi))],
        Some(true) => vec![
            Atom::le(v(plo), v(slo)),
            Atom::ge(LinExpr::new().term(2, phi), v(slo).term(1, shi)),
        ],
        Some(false) => vec![
            Atom::le(LinExpr::new().term(2, plo), v(slo).term(1, shi)),
            Atom::ge(v(phi), v(shi)),
        ],
    };
    let mut xs = vec![touch];
    xs.extend(covers);
    Atom::and(xs)
}

fn post_stairs_adjacent(m: &mut Model, stairs: usize, space: usize, step: Step) {
    let cfg_var = m.stair_config[stairs].expect("staircase without configuration");
    let style = m.problem.spec.spaces[stairs].style.unwrap_or_default();
    let (st, sp) = (m.spaces[stairs], m.spaces[space]);
    let codes: Vec<i64> = m.store.dom(cfg_var).values().collect();
    let mut any = Vec::new();
    for c in codes {
        let cfg = stair_config_of(style, c);
        let body = stair_access_atom(&st, &sp, cfg.degrees, cfg.first, step);
        m.store.post(Implies::new(Atom::is_value(cfg_var, c), body.clone()));
        any.push(Atom::and(vec![Atom::is_value(cfg_var, c), body]));
    }
    m.store.post(AtomProp::new(Atom::or(any)));
}

/// Forbids layouts where the boundary between two aligned corridors could be
/// moved to shrink `c1` and grow `c2` within their bounds.
pub fn corridor_alignment_atom(m: &Model, c1: usize, c2: usize) -> Atom {
    let (a, b) = (m.spaces[c1], m.spaces[c2]);
    let (sa, sb) = (&m.problem.spec.spaces[c1], &m.problem.spec.spaces[c2]);
    let smin = sa.s.min.unwrap_or(1);
    let smax = sb.s.hi();
    let mut out = Vec::new();
    for horizontal in [true, false] {
        let (len_a, thick_a, len_b, thick_b, amin, bmax) = if horizontal {
            (a.l, a.w, b.l, b.w, sa.l.min.unwrap_or(1), sb.l.hi())
        } else {
            (a.w, a.l, b.w, b.l, sa.w.min.unwrap_or(1), sb.w.hi())
        };
        let aligned = if horizontal {
            Atom::and(vec![
                Atom::eq(v(a.y1), v(b.y1)),
                Atom::eq(v(a.y2), v(b.y2)),
                Atom::or(vec![Atom::eq(v(a.x2), v(b.x1)), Atom::eq(v(b.x2), v(a.x1))]),
            ])
        } else {
            Atom::and(vec![
                Atom::eq(v(a.x1), v(b.x1)),
                Atom::eq(v(a.x2), v(b.x2)),
                Atom::or(vec![Atom::eq(v(a.y2), v(b.y1)), Atom::eq(v(b.y2), v(a.y1))]),
            ])
        };
        let mut movable = vec![
            aligned,
            Atom::Lin(v(len_a), Dom::at_least(amin + 1)),
            Atom::Lin(d(a.s, thick_a), Dom::at_least(smin)),
        ];
        if bmax < INF {
            movable.push(Atom::Lin(v(len_b), Dom::at_most(bmax - 1)));
        }
        if smax < INF {
            movable.push(Atom::Lin(v(b.s).term(1, thick_b), Dom::at_most(smax)));
        }
        out.push(Atom::and(movable).negate());
    }
    Atom::and(out)
}

fn post_ratio(store: &mut Store, p1: VarId, p2: VarId, lower: [i64; 2], upper: [i64; 2]) {
    // lower[0]/lower[1] <= p1/p2  <=>  lower[0]*p2 <= lower[1]*p1
    let lo = Atom::le(LinExpr::new().term(lower[0], p2), LinExpr::new().term(lower[1], p1));
    let hi = Atom::le(LinExpr::new().term(upper[1], p1), LinExpr::new().term(upper[0], p2));
    store.post(AtomProp::new(lo));
    store.post(AtomProp::new(hi));
}

/// Relation variables of a unit when non-overlap applies, and the area
/// balance of total recovery.
pub(crate) fn post_unit_implicit(m: &mut Model, unit: usize) {
    let spaces = m.problem.unit_spaces[unit].clone();
    let u = m.problem.spec.units[unit].clone();
    if u.non_overlap {
        for (i, &a) in spaces.iter().enumerate() {
            for &b in &spaces[i + 1..] {
                ensure_rel(m, a, b);
            }
        }
    }
    if u.total_recovery {
        let mut sum = LinExpr::new();
        for &s in &spaces {
            sum.add_term(1, m.spaces[s].s);
        }
        let c = m.contours[unit].s;
        m.store.post(AtomProp::new(Atom::eq(sum, v(c))));
    }
}

/// Posts one listed constraint; `k` identifies it in choice records.
pub fn post_constraint(m: &mut Model, k: usize, c: &ConstraintSpec) {
    let problem = m.problem.clone();
    let idx = |id: &str| problem.space(id).expect("validated space id");
    match c {
        ConstraintSpec::Adjacent(a) => post_adjacent(m, a),
        ConstraintSpec::OnContour { space, sides } => post_on_contour(m, k, idx(space), sides),
        ConstraintSpec::Ratio { p1, p2, lower, upper } => {
            let x = m.spaces[idx(&p1.space)].attr(p1.attr);
            let y = m.spaces[idx(&p2.space)].attr(p2.attr);
            post_ratio(&mut m.store, x, y, *lower, *upper);
        }
        ConstraintSpec::Or { left, right } => post_or(m, k, left, right),
        ConstraintSpec::StairsAdjacent { stairs, space, step } => {
            post_stairs_adjacent(m, idx(stairs), idx(space), *step)
        }
        ConstraintSpec::CorridorAlignment { c1, c2 } => {
            let atom = corridor_alignment_atom(m, idx(c1), idx(c2));
            m.store.post(AtomProp::new(atom));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::{label, LabelOptions};
    use crate::model::create_rect;
    use std::ops::ControlFlow;

    fn rect(s: &mut Store, n: i64) -> Rect {
        create_rect(s, Dom::range(0, n), Dom::range(0, n), Dom::range(1, n), Dom::range(1, n), Dom::range(1, n * n))
    }

    fn geo(a: [i64; 4]) -> (i64, i64, i64, i64) {
        (a[0], a[1], a[0] + a[2], a[1] + a[3])
    }

    // relation values on fixed rectangles, against a direct computation
    #[test]
    fn positions_partition_pairs_of_rectangles() {
        let cases = [[0, 0, 2, 2], [2, 0, 1, 3], [0, 2, 3, 1], [1, 1, 1, 1], [3, 3, 1, 1]];
        for p in cases {
            for q in cases {
                let mut s = Store::new();
                let a = rect(&mut s, 5);
                let b = rect(&mut s, 5);
                for (r, g) in [(a, p), (b, q)] {
                    s.assign(r.x1, g[0]);
                    s.assign(r.y1, g[1]);
                    s.assign(r.l, g[2]);
                    s.assign(r.w, g[3]);
                }
                let (ax1, ay1, ax2, ay2) = geo(p);
                let (bx1, by1, bx2, by2) = geo(q);
                let expect = if by1 >= ay2 {
                    Side::N.code()
                } else if ay1 >= by2 {
                    Side::S.code()
                } else if bx1 >= ax2 {
                    Side::E.code()
                } else if ax1 >= bx2 {
                    Side::W.code()
                } else {
                    OVERLAP
                };
                let holding: Vec<i64> = (0..=4).filter(|&c| position_body(&a, &b, c).holds(s.domains())).collect();
                assert_eq!(holding, vec![expect], "{p:?} {q:?}");
            }
        }
    }

    #[test]
    fn overlap_atoms_match_min_minus_max() {
        let mut s = Store::new();
        let a = rect(&mut s, 6);
        let b = rect(&mut s, 6);
        let vars = [a.x1, a.l, b.x1, b.l];
        label(&mut s, &vars, &LabelOptions::default(), |st| {
            let dd = st.domains();
            let ov = (dd.min(a.x2)).min(dd.min(b.x2)) - dd.min(a.x1).max(dd.min(b.x1));
            for k in -3..4 {
                assert_eq!(overlap_at_least(&a, &b, Side::N, k).holds(dd), ov >= k);
                assert_eq!(overlap_at_most(&a, &b, Side::N, k).holds(dd), ov <= k);
            }
            ControlFlow::Continue(())
        });
    }

    #[test]
    fn ratio_tightens_area() {
        // 2/5 <= p1/p2 <= 1/2 with p2 = 10
        let mut s = Store::new();
        let p1 = s.new_var(Dom::range(1, 100));
        let p2 = s.new_var(Dom::singleton(10));
        post_ratio(&mut s, p1, p2, [2, 5], [1, 2]);
        assert_eq!(s.dom(p1), &Dom::range(4, 5));
    }

    #[test]
    fn double_stairs_halves() {
        // climbing north and turning, first flight on the left: west half
        assert_eq!(step_half(0, Some(FirstStep::Left), Step::First), Some(true));
        assert_eq!(step_half(0, Some(FirstStep::Left), Step::Last), Some(false));
        assert_eq!(step_half(180, Some(FirstStep::Left), Step::First), Some(false));
        assert_eq!(step_half(90, Some(FirstStep::Right), Step::First), Some(false));
        assert_eq!(step_half(0, None, Step::First), None);
    }
}
