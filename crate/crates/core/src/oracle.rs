//! Exhaustive reference enumeration for small instances.
//!
//! Every geometric solution is generated by plain loops over integer
//! coordinates and checked against the constraint definitions directly,
//! without the constraint engine. Solutions are then grouped by signature.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::enumerate::{contour_key, or_key, pos_key, Enumeration, Signature};
use crate::layout::{ContourSize, Layout, Placement};
use crate::optimize::format_ratio;
use crate::problem::{AdjacentSpec, Bounds, Clause, ConstraintSpec, Problem, Side, SpaceKind};

pub const DEFAULT_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("search exceeded the cap of {cap} candidate placements")]
    CapExceeded { cap: u64 },
    #[error("not supported by the oracle: {0}")]
    Unsupported(String),
}

/// One signature class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassInfo {
    /// Geometric solutions in the class (after canonicalization).
    pub members: u64,
    pub min_cost: String,
    #[serde(skip)]
    pub min_cost_value: Ratio<i64>,
    /// A minimum-cost member.
    pub example: Layout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Geometric solutions satisfying every constraint.
    pub placements: u64,
    /// Solutions left after choosing one labeling per symmetry orbit.
    pub canonical: u64,
    pub classes: BTreeMap<Signature, ClassInfo>,
    /// Candidate placements visited.
    pub visited: u64,
}

/// Integer rectangle in modules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct R {
    x: i64,
    y: i64,
    l: i64,
    w: i64,
}

impl R {
    fn x2(&self) -> i64 {
        self.x + self.l
    }
    fn y2(&self) -> i64 {
        self.y + self.w
    }
}

/// Size cap applied to rotatable rooms: the largest contour extent.
fn rot_cap(p: &Problem, i: usize) -> i64 {
    let u = &p.spec.units[p.unit_of[i]];
    u.l.max.unwrap().max(u.w.max.unwrap())
}

fn range(b: &Bounds, cap: i64) -> (i64, i64) {
    (b.min.unwrap_or(1).max(1), b.max.unwrap_or(cap).min(cap))
}

fn in_range(v: i64, (lo, hi): (i64, i64)) -> bool {
    lo <= v && v <= hi
}

struct Ctx<'a> {
    p: &'a Problem,
    cap: u64,
    visited: u64,
}

impl Ctx<'_> {
    fn tick(&mut self) -> Result<(), OracleError> {
        self.visited += 1;
        if self.visited > self.cap {
            return Err(OracleError::CapExceeded { cap: self.cap });
        }
        Ok(())
    }
}

/// Allowed `(l, w)` pairs of a space inside a `cl x cw` contour.
fn dims(p: &Problem, i: usize, cl: i64, cw: i64) -> Vec<(i64, i64)> {
    let s = &p.spec.spaces[i];
    let cap = rot_cap(p, i);
    let (dl, dw) = (range(&s.l, cap), range(&s.w, cap));
    let area = (s.s.min.unwrap_or(1), s.s.max.unwrap_or(i64::MAX));
    let rotatable = s.kind == SpaceKind::Room && s.rotatable;
    let mut out = Vec::new();
    for l in 1..=cl {
        for w in 1..=cw {
            let upright = in_range(l, dl) && in_range(w, dw);
            let rotated = rotatable && in_range(l, dw) && in_range(w, dl);
            if (upright || rotated) && in_range(l * w, area) {
                out.push((l, w));
            }
        }
    }
    out
}

/// Whether a rotatable room uses a rotated orientation branch.
fn is_rotated(p: &Problem, i: usize, r: &R) -> bool {
    let s = &p.spec.spaces[i];
    let cap = rot_cap(p, i);
    let (dl, dw) = (range(&s.l, cap), range(&s.w, cap));
    !(in_range(r.l, dl) && in_range(r.w, dw))
}

/// All tilings of a `cl x cw` contour by the given spaces.
fn tilings(ctx: &mut Ctx, spaces: &[usize], cl: i64, cw: i64) -> Result<Vec<Vec<R>>, OracleError> {
    let options: Vec<Vec<(i64, i64)>> = spaces.iter().map(|&i| dims(ctx.p, i, cl, cw)).collect();
    let mut grid = vec![false; (cl * cw) as usize];
    let mut placed: Vec<Option<R>> = vec![None; spaces.len()];
    let mut out = Vec::new();
    fn go(
        ctx: &mut Ctx,
        options: &[Vec<(i64, i64)>],
        cl: i64,
        cw: i64,
        grid: &mut [bool],
        placed: &mut [Option<R>],
        out: &mut Vec<Vec<R>>,
    ) -> Result<(), OracleError> {
        let Some(cell) = grid.iter().position(|&c| !c) else {
            if placed.iter().all(Option::is_some) {
                out.push(placed.iter().map(|r| r.unwrap()).collect());
            }
            return Ok(());
        };
        let (x, y) = (cell as i64 % cl, cell as i64 / cl);
        for k in 0..placed.len() {
            if placed[k].is_some() {
                continue;
            }
            for &(l, w) in &options[k] {
                ctx.tick()?;
                if x + l > cl || y + w > cw {
                    continue;
                }
                let cells: Vec<usize> =
                    (y..y + w).flat_map(|yy| (x..x + l).map(move |xx| (yy * cl + xx) as usize)).collect();
                if cells.iter().any(|&c| grid[c]) {
                    continue;
                }
                cells.iter().for_each(|&c| grid[c] = true);
                placed[k] = Some(R { x, y, l, w });
                go(ctx, options, cl, cw, grid, placed, out)?;
                placed[k] = None;
                cells.iter().for_each(|&c| grid[c] = false);
            }
        }
        Ok(())
    }
    go(ctx, &options, cl, cw, &mut grid, &mut placed, &mut out)?;
    Ok(out)
}

fn interiors_meet(a: &R, b: &R) -> bool {
    a.x < b.x2() && b.x < a.x2() && a.y < b.y2() && b.y < a.y2()
}

/// All placements by nested loops over position and size.
fn nested(
    ctx: &mut Ctx,
    spaces: &[usize],
    cl: i64,
    cw: i64,
    non_overlap: bool,
    total_recovery: bool,
) -> Result<Vec<Vec<R>>, OracleError> {
    let options: Vec<Vec<(i64, i64)>> = spaces.iter().map(|&i| dims(ctx.p, i, cl, cw)).collect();
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(
        ctx: &mut Ctx,
        options: &[Vec<(i64, i64)>],
        cl: i64,
        cw: i64,
        non_overlap: bool,
        total_recovery: bool,
        cur: &mut Vec<R>,
        out: &mut Vec<Vec<R>>,
    ) -> Result<(), OracleError> {
        let k = cur.len();
        if k == options.len() {
            if !total_recovery || cur.iter().map(|r| r.l * r.w).sum::<i64>() == cl * cw {
                out.push(cur.clone());
            }
            return Ok(());
        }
        for &(l, w) in &options[k] {
            for x in 0..=cl - l {
                for y in 0..=cw - w {
                    ctx.tick()?;
                    let r = R { x, y, l, w };
                    if non_overlap && cur.iter().any(|o| interiors_meet(o, &r)) {
                        continue;
                    }
                    cur.push(r);
                    go(ctx, options, cl, cw, non_overlap, total_recovery, cur, out)?;
                    cur.pop();
                }
            }
        }
        Ok(())
    }
    go(ctx, &options, cl, cw, non_overlap, total_recovery, &mut cur, &mut out)?;
    Ok(out)
}

/// Where `b` lies with respect to `a`.
fn relation(a: &R, b: &R) -> Side {
    if b.y >= a.y2() {
        Side::N
    } else if b.y2() <= a.y {
        Side::S
    } else if b.x >= a.x2() {
        Side::E
    } else {
        Side::W
    }
}

fn gap(a: &R, b: &R, side: Side) -> i64 {
    match side {
        Side::N => b.y - a.y2(),
        Side::S => a.y - b.y2(),
        Side::E => b.x - a.x2(),
        Side::W => a.x - b.x2(),
    }
}

fn overlap(a: &R, b: &R, side: Side) -> i64 {
    match side {
        Side::N | Side::S => a.x2().min(b.x2()) - a.x.max(b.x),
        Side::E | Side::W => a.y2().min(b.y2()) - a.y.max(b.y),
    }
}

fn within(v: i64, b: &Bounds) -> bool {
    b.min.is_none_or(|m| v >= m) && b.max.is_none_or(|m| v <= m)
}

/// A full layout: rectangles by space index and contour sizes by unit.
struct Full<'a> {
    p: &'a Problem,
    rects: Vec<R>,
    contours: Vec<(i64, i64)>,
}

impl Full<'_> {
    fn r(&self, id: &str) -> R {
        self.rects[self.p.space(id).unwrap()]
    }

    fn contour(&self, id: &str) -> (i64, i64) {
        self.contours[self.p.unit_of[self.p.space(id).unwrap()]]
    }

    fn adjacent(&self, a: &AdjacentSpec) -> bool {
        let (ra, rb) = (self.r(&a.a), self.r(&a.b));
        let side = relation(&ra, &rb);
        a.allowed().contains(&side) && within(gap(&ra, &rb, side), &a.d2) && within(overlap(&ra, &rb, side), &a.d1)
    }

    fn touches(&self, id: &str, side: Side) -> bool {
        let (r, (cl, cw)) = (self.r(id), self.contour(id));
        match side {
            Side::N => r.y2() == cw,
            Side::S => r.y == 0,
            Side::E => r.x2() == cl,
            Side::W => r.x == 0,
        }
    }

    fn clause(&self, c: &Clause) -> bool {
        match c {
            Clause::Adjacent(a) => self.adjacent(a),
            Clause::OnContour { space, sides } => sides.iter().all(|&s| self.touches(space, s)),
        }
    }

    fn attr(&self, a: &crate::problem::AttrRef) -> i64 {
        use crate::problem::Attr;
        let r = self.r(&a.space);
        match a.attr {
            Attr::X1 => r.x,
            Attr::Y1 => r.y,
            Attr::X2 => r.x2(),
            Attr::Y2 => r.y2(),
            Attr::L => r.l,
            Attr::W => r.w,
            Attr::S => r.l * r.w,
        }
    }

    fn alignment_movable(&self, c1: &str, c2: &str) -> bool {
        let (a, b) = (self.r(c1), self.r(c2));
        let (sa, sb) =
            (&self.p.spec.spaces[self.p.space(c1).unwrap()], &self.p.spec.spaces[self.p.space(c2).unwrap()]);
        let smin = sa.s.min.unwrap_or(1);
        let smax = sb.s.max;
        let (area_a, area_b) = (a.l * a.w, b.l * b.w);
        let horizontal = a.y == b.y && a.y2() == b.y2() && (a.x2() == b.x || b.x2() == a.x);
        let vertical = a.x == b.x && a.x2() == b.x2() && (a.y2() == b.y || b.y2() == a.y);
        let h = horizontal
            && a.l > sa.l.min.unwrap_or(1)
            && area_a - a.w >= smin
            && sb.l.max.is_none_or(|m| b.l < m)
            && smax.is_none_or(|m| area_b + b.w <= m);
        let v = vertical
            && a.w > sa.w.min.unwrap_or(1)
            && area_a - a.l >= smin
            && sb.w.max.is_none_or(|m| b.w < m)
            && smax.is_none_or(|m| area_b + b.l <= m);
        h || v
    }

    /// Signature when every constraint holds.
    fn signature(&self) -> Option<Signature> {
        let p = self.p;
        let mut sig = BTreeMap::new();
        for unit in &p.unit_spaces {
            for (k, &a) in unit.iter().enumerate() {
                for &b in &unit[k + 1..] {
                    let (i, j) = (a.min(b), a.max(b));
                    let rel = relation(&self.rects[i], &self.rects[j]);
                    sig.insert(pos_key(p.space_id(i), p.space_id(j)), rel.to_string());
                }
            }
        }
        for (k, c) in p.spec.constraints.iter().enumerate() {
            match c {
                ConstraintSpec::Adjacent(a) => {
                    if !self.adjacent(a) {
                        return None;
                    }
                }
                ConstraintSpec::OnContour { space, sides } => {
                    let first = sides.iter().find(|&&s| self.touches(space, s))?;
                    if p.spec.reductions.signature_contours {
                        sig.insert(contour_key(k, space), first.to_string());
                    }
                }
                ConstraintSpec::Ratio { p1, p2, lower, upper } => {
                    let (v1, v2) = (self.attr(p1) as i128, self.attr(p2) as i128);
                    let ok = lower[0] as i128 * v2 <= lower[1] as i128 * v1
                        && upper[1] as i128 * v1 <= upper[0] as i128 * v2;
                    if !ok {
                        return None;
                    }
                }
                ConstraintSpec::Or { left, right } => {
                    let choice = if left.iter().all(|c| self.clause(c)) {
                        1
                    } else if right.iter().all(|c| self.clause(c)) {
                        2
                    } else {
                        return None;
                    };
                    sig.insert(or_key(k), choice.to_string());
                }
                ConstraintSpec::CorridorAlignment { c1, c2 } => {
                    if self.alignment_movable(c1, c2) {
                        return None;
                    }
                }
                ConstraintSpec::StairsAdjacent { .. } => unreachable!("rejected up front"),
            }
        }
        Some(Signature(sig))
    }

    fn layout(&self) -> Layout {
        let p = self.p;
        Layout {
            units: p
                .spec
                .units
                .iter()
                .zip(&self.contours)
                .map(|(u, &(l, w))| ContourSize { id: u.id.clone(), l, w })
                .collect(),
            spaces: p
                .spec
                .spaces
                .iter()
                .zip(&self.rects)
                .map(|(s, r)| Placement {
                    id: s.id.clone(),
                    unit: s.unit.clone(),
                    kind: s.kind,
                    x: r.x,
                    y: r.y,
                    l: r.l,
                    w: r.w,
                    orientation: None,
                    config: None,
                })
                .collect(),
        }
    }
}

fn check_supported(p: &Problem) -> Result<(), OracleError> {
    if !p.spec.links.is_empty() {
        return Err(OracleError::Unsupported("links between units".into()));
    }
    if p.spec.spaces.iter().any(|s| s.kind == SpaceKind::Staircase) {
        return Err(OracleError::Unsupported("staircases".into()));
    }
    if p.spec.units.iter().any(|u| !u.non_overlap) {
        return Err(OracleError::Unsupported("units without non-overlap".into()));
    }
    for u in &p.spec.units {
        if u.l.max.is_none() || u.w.max.is_none() {
            return Err(OracleError::Unsupported(format!("unbounded contour `{}`", u.id)));
        }
    }
    Ok(())
}

/// Whether group members appear in canonical order: upright before rotated,
/// then by lower-left corner.
fn canonical(p: &Problem, groups: &[Vec<usize>], f: &Full) -> bool {
    groups.iter().all(|g| {
        let key = |i: usize| {
            let r = f.rects[i];
            let rot = has_orientation(p, i) && is_rotated(p, i, &r);
            (rot, r.x, r.y)
        };
        g.windows(2).all(|w| key(w[0]) < key(w[1]))
    })
}

/// Checks a complete layout against the problem directly and returns its
/// signature, or `None` when some bound or constraint is violated. Links and
/// staircases are supported; stair access constraints are not.
pub fn classify(p: &Problem, layout: &Layout) -> Result<Option<Signature>, OracleError> {
    if p.spec.constraints.iter().any(|c| matches!(c, ConstraintSpec::StairsAdjacent { .. })) {
        return Err(OracleError::Unsupported("stair access constraints".into()));
    }
    let spec = &p.spec;
    let ids_match = layout.units.len() == spec.units.len()
        && layout.spaces.len() == spec.spaces.len()
        && layout.units.iter().zip(&spec.units).all(|(a, b)| a.id == b.id)
        && layout.spaces.iter().zip(&spec.spaces).all(|(a, b)| a.id == b.id);
    if !ids_match {
        return Ok(None);
    }
    let contours: Vec<(i64, i64)> = layout.units.iter().map(|u| (u.l, u.w)).collect();
    for (u, &(cl, cw)) in spec.units.iter().zip(&contours) {
        if !(in_range(cl, range(&u.l, i64::MAX)) && in_range(cw, range(&u.w, i64::MAX))) {
            return Ok(None);
        }
    }
    let rects: Vec<R> = layout.spaces.iter().map(|s| R { x: s.x, y: s.y, l: s.l, w: s.w }).collect();
    for (i, r) in rects.iter().enumerate() {
        let (cl, cw) = contours[p.unit_of[i]];
        let inside = r.x >= 0 && r.y >= 0 && r.x2() <= cl && r.y2() <= cw;
        if !inside || !dims(p, i, cl, cw).contains(&(r.l, r.w)) {
            return Ok(None);
        }
    }
    for (u, unit) in spec.units.iter().enumerate() {
        let members = &p.unit_spaces[u];
        if unit.non_overlap {
            for (k, &a) in members.iter().enumerate() {
                for &b in &members[k + 1..] {
                    let (ra, rb) = (rects[a], rects[b]);
                    if ra.x < rb.x2() && rb.x < ra.x2() && ra.y < rb.y2() && rb.y < ra.y2() {
                        return Ok(None);
                    }
                }
            }
        }
        let (cl, cw) = contours[u];
        if unit.total_recovery && members.iter().map(|&i| rects[i].l * rects[i].w).sum::<i64>() != cl * cw {
            return Ok(None);
        }
    }
    for link in &spec.links {
        let ok = match link {
            crate::problem::LinkSpec::Stairs { lower, upper } => {
                let (a, b) = (p.space(lower).unwrap(), p.space(upper).unwrap());
                rects[a] == rects[b]
            }
            crate::problem::LinkSpec::Superimpose { lower, upper } => {
                let unit = |id: &str| spec.units.iter().position(|u| u.id == id).unwrap();
                contours[unit(lower)] == contours[unit(upper)]
            }
        };
        if !ok {
            return Ok(None);
        }
    }
    Ok(Full { p, rects, contours }.signature())
}

/// Whether a layout is the canonical labeling of its symmetry orbit.
pub fn is_canonical(p: &Problem, layout: &Layout) -> bool {
    let rects = layout.spaces.iter().map(|s| R { x: s.x, y: s.y, l: s.l, w: s.w }).collect();
    let contours = layout.units.iter().map(|u| (u.l, u.w)).collect();
    let groups = crate::reduction::symmetry_groups(p);
    canonical(p, &groups, &Full { p, rects, contours })
}

/// Whether the engine gives a room an orientation choice: it must be
/// rotatable with different length and width ranges.
fn has_orientation(p: &Problem, i: usize) -> bool {
    let s = &p.spec.spaces[i];
    let cap = rot_cap(p, i);
    s.kind == SpaceKind::Room && s.rotatable && range(&s.l, cap) != range(&s.w, cap)
}

/// Calls `f` with every geometric solution, its signature and whether it is
/// the canonical labeling of its symmetry orbit. Returns the number of
/// candidate placements visited.
pub fn visit(p: &Problem, cap: u64, mut f: impl FnMut(&Signature, &Layout, bool)) -> Result<u64, OracleError> {
    check_supported(p)?;
    let mut ctx = Ctx { p, cap, visited: 0 };
    let groups = if p.spec.reductions.symmetry { crate::reduction::symmetry_groups(p) } else { Vec::new() };
    // per unit: every contour size with its placements
    let mut per_unit: Vec<Vec<((i64, i64), Vec<R>)>> = Vec::new();
    for (u, unit) in p.spec.units.iter().enumerate() {
        let spaces = &p.unit_spaces[u];
        let mut opts = Vec::new();
        let (l0, l1) = (unit.l.min.unwrap_or(1), unit.l.max.unwrap());
        let (w0, w1) = (unit.w.min.unwrap_or(1), unit.w.max.unwrap());
        for cl in l0.max(1)..=l1 {
            for cw in w0.max(1)..=w1 {
                let sols = if unit.total_recovery {
                    tilings(&mut ctx, spaces, cl, cw)?
                } else {
                    nested(&mut ctx, spaces, cl, cw, true, false)?
                };
                opts.extend(sols.into_iter().map(|s| ((cl, cw), s)));
            }
        }
        per_unit.push(opts);
    }
    if per_unit.iter().any(Vec::is_empty) {
        return Ok(ctx.visited);
    }
    let n = p.num_spaces();
    let mut idx = vec![0usize; per_unit.len()];
    loop {
        ctx.tick()?;
        let mut rects = vec![R { x: 0, y: 0, l: 0, w: 0 }; n];
        let mut contours = Vec::new();
        for (u, &k) in idx.iter().enumerate() {
            let (size, sol) = &per_unit[u][k];
            contours.push(*size);
            for (j, &s) in p.unit_spaces[u].iter().enumerate() {
                rects[s] = sol[j];
            }
        }
        let full = Full { p, rects, contours };
        if let Some(sig) = full.signature() {
            f(&sig, &full.layout(), canonical(p, &groups, &full));
        }
        // next combination
        let mut u = 0;
        loop {
            if u == idx.len() {
                return Ok(ctx.visited);
            }
            idx[u] += 1;
            if idx[u] < per_unit[u].len() {
                break;
            }
            idx[u] = 0;
            u += 1;
        }
    }
}

/// Enumerates every geometric solution and groups them by signature.
/// Symmetric spaces are canonicalized when the symmetry reduction is on.
pub fn brute_force(p: &Problem, cap: u64) -> Result<OracleReport, OracleError> {
    let mut report = OracleReport { placements: 0, canonical: 0, classes: BTreeMap::new(), visited: 0 };
    let visited = visit(p, cap, |sig, layout, canonical| {
        report.placements += 1;
        if !canonical {
            return;
        }
        report.canonical += 1;
        let cost = layout.cost(&p.spec.cost);
        let e = report.classes.entry(sig.clone()).or_insert_with(|| ClassInfo {
            members: 0,
            min_cost: format_ratio(cost),
            min_cost_value: cost,
            example: layout.clone(),
        });
        e.members += 1;
        if cost < e.min_cost_value {
            e.min_cost_value = cost;
            e.min_cost = format_ratio(cost);
            e.example = layout.clone();
        }
    })?;
    report.visited = visited;
    Ok(report)
}

/// Comparison of an enumeration with the oracle.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// Oracle classes the enumeration missed.
    pub missing: Vec<Signature>,
    /// Enumerated signatures the oracle does not know.
    pub extra: Vec<Signature>,
    /// Signatures enumerated more than once.
    pub duplicates: Vec<Signature>,
    /// `(signature, oracle minimum, witness cost)` where they differ.
    pub cost_mismatches: Vec<(Signature, String, String)>,
}

impl Verdict {
    pub fn ok(&self) -> bool {
        self.missing.is_empty() && self.extra.is_empty() && self.duplicates.is_empty() && self.cost_mismatches.is_empty()
    }
}

/// Compares signatures and, for best witnesses, their costs.
pub fn compare(p: &Problem, e: &Enumeration, report: &OracleReport, check_costs: bool) -> Verdict {
    let mut v = Verdict::default();
    let mut seen = BTreeSet::new();
    for t in &e.topologies {
        if !seen.insert(t.signature.clone()) {
            v.duplicates.push(t.signature.clone());
            continue;
        }
        match report.classes.get(&t.signature) {
            None => v.extra.push(t.signature.clone()),
            Some(c) if check_costs => {
                let got = t.witness.cost(&p.spec.cost);
                if got != c.min_cost_value {
                    v.cost_mismatches.push((t.signature.clone(), c.min_cost.clone(), format_ratio(got)));
                }
            }
            Some(_) => {}
        }
    }
    v.missing = report.classes.keys().filter(|s| !seen.contains(*s)).cloned().collect();
    v
}
