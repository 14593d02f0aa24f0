//! Spaces as constrained rectangles and the assembled constraint model of a
//! [`Problem`].

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constraints;
use crate::fd::{Atom, AtomProp, Dom, Implies, LinExpr, Product, PropStatus, Store, VarId};
use crate::problem::{
    Attr, FirstStep, LinkSpec, Problem, Side, SpaceKind, SpaceSpec, StairStyle,
};
use crate::optimize::{self, CostVar};
use crate::reduction;

/// The seven variables of a rectangle: corners, dimensions and area.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub x1: VarId,
    pub y1: VarId,
    pub x2: VarId,
    pub y2: VarId,
    pub l: VarId,
    pub w: VarId,
    pub s: VarId,
}

impl Rect {
    pub fn attr(&self, a: Attr) -> VarId {
        match a {
            Attr::X1 => self.x1,
            Attr::Y1 => self.y1,
            Attr::X2 => self.x2,
            Attr::Y2 => self.y2,
            Attr::L => self.l,
            Attr::W => self.w,
            Attr::S => self.s,
        }
    }

    pub fn vars(&self) -> [VarId; 7] {
        [self.x1, self.y1, self.x2, self.y2, self.l, self.w, self.s]
    }

    /// Coordinate of the given edge.
    pub fn edge(&self, side: Side) -> VarId {
        match side {
            Side::E => self.x2,
            Side::W => self.x1,
            Side::N => self.y2,
            Side::S => self.y1,
        }
    }
}

/// Creates a rectangle with `x2 = x1 + L`, `y2 = y1 + W` and `S = L * W`.
pub fn create_rect(store: &mut Store, x: Dom, y: Dom, l: Dom, w: Dom, s: Dom) -> Rect {
    let x1 = store.new_var(x.clone());
    let y1 = store.new_var(y.clone());
    let l = store.new_var(l);
    let w = store.new_var(w);
    let x2 = store.new_var(Dom::full());
    let y2 = store.new_var(Dom::full());
    let s = store.new_var(s);
    store.post(AtomProp::new(Atom::eq(LinExpr::var(x2), LinExpr::var(x1).term(1, l))));
    store.post(AtomProp::new(Atom::eq(LinExpr::var(y2), LinExpr::var(y1).term(1, w))));
    store.post(Product { product: s, left: l, right: w });
    Rect { x1, y1, x2, y2, l, w, s }
}

/// One placement class of a rotatable room's dimensions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrientationBranch {
    /// 0 keeps the declared orientation, 1 and 2 are the two rotated parts.
    pub code: i64,
    pub l: Dom,
    pub w: Dom,
}

impl OrientationBranch {
    pub fn is_rotated(&self) -> bool {
        self.code != 0
    }
}

/// Splits the dimension pairs `D_L x D_W` union its transpose into disjoint
/// boxes: the declared box, `(D_W - D_L) x D_L` and `(D_W & D_L) x (D_L - D_W)`.
/// Empty boxes are dropped; a single box is returned when `D_L = D_W`.
pub fn orientation_branches(dl: &Dom, dw: &Dom) -> Vec<OrientationBranch> {
    let mut out = vec![OrientationBranch { code: 0, l: dl.clone(), w: dw.clone() }];
    if dl == dw {
        return out;
    }
    let b1 = OrientationBranch { code: 1, l: dw.difference(dl), w: dl.clone() };
    let b2 = OrientationBranch { code: 2, l: dw.intersect(dl), w: dl.difference(dw) };
    out.extend([b1, b2].into_iter().filter(|b| !b.l.is_empty() && !b.w.is_empty()));
    out
}

/// A staircase orientation and, for double staircases, the side of the
/// first flight as seen by someone climbing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StairConfig {
    /// Counter-clockwise rotation in degrees; 0 climbs northward.
    pub degrees: u16,
    pub first: Option<FirstStep>,
}

impl StairConfig {
    /// Edge through which the first step is entered.
    pub fn entry_side(&self) -> Side {
        match self.degrees {
            0 => Side::S,
            90 => Side::E,
            180 => Side::N,
            _ => Side::W,
        }
    }

    /// Edge through which the last step is left.
    pub fn exit_side(&self) -> Side {
        match self.first {
            None => self.entry_side().opposite(),
            Some(_) => self.entry_side(),
        }
    }
}

/// Configuration codes of a staircase. Simple staircases use codes 0..4
/// (orientation index); double ones `2 * orientation + side`.
pub fn staircase_configs(style: StairStyle, first: Option<FirstStep>) -> Vec<(i64, StairConfig)> {
    let mut out = Vec::new();
    for k in 0..4u16 {
        let degrees = k * 90;
        match style {
            StairStyle::Simple => out.push((k as i64, StairConfig { degrees, first: None })),
            StairStyle::Double => {
                for (f, side) in [(0, FirstStep::Left), (1, FirstStep::Right)] {
                    if first.is_none_or(|want| want == side) {
                        out.push((2 * k as i64 + f, StairConfig { degrees, first: Some(side) }));
                    }
                }
            }
        }
    }
    out
}

pub fn stair_config_of(style: StairStyle, code: i64) -> StairConfig {
    match style {
        StairStyle::Simple => StairConfig { degrees: (code as u16) * 90, first: None },
        StairStyle::Double => StairConfig {
            degrees: (code as u16 / 2) * 90,
            first: Some(if code % 2 == 0 { FirstStep::Left } else { FirstStep::Right }),
        },
    }
}

/// Contour attachment choice of an on-contour constraint.
#[derive(Clone, Debug)]
pub struct ContourChoice {
    pub constraint: usize,
    pub space: usize,
    pub var: VarId,
    pub sides: Vec<Side>,
}

/// Branch selector of an OR constraint (1 = left, 2 = right only).
#[derive(Clone, Debug)]
pub struct OrChoice {
    pub constraint: usize,
    pub var: VarId,
    pub left: Atom,
    pub right: Atom,
}

/// A problem compiled into finite-domain variables and propagators.
#[derive(Clone, Debug)]
pub struct Model {
    pub problem: Arc<Problem>,
    pub store: Store,
    /// Contour rectangle of each unit.
    pub contours: Vec<Rect>,
    pub spaces: Vec<Rect>,
    /// Orientation variable of rotatable rooms whose dimension ranges differ.
    pub orientation: Vec<Option<VarId>>,
    pub orientation_branches: Vec<Vec<OrientationBranch>>,
    /// Shared configuration variable of staircases.
    pub stair_config: Vec<Option<VarId>>,
    /// Relative position of `b` with respect to `a`, keyed by `(a, b)`, `a < b`.
    pub rels: BTreeMap<(usize, usize), VarId>,
    pub contour_choices: Vec<ContourChoice>,
    pub or_choices: Vec<OrChoice>,
    pub symmetry_groups: Vec<Vec<usize>>,
    /// Cost of the problem's cost specification.
    pub cost: CostVar,
    /// Set when the root propagation already fails.
    pub infeasible: bool,
}

impl Model {
    /// Posts, in order: contours and spaces with their class constraints and
    /// inclusion, links, implicit constraints, the listed constraints, and
    /// finally the enabled reductions.
    pub fn build(problem: Arc<Problem>) -> Model {
        let mut m = Model {
            problem: problem.clone(),
            store: Store::new(),
            contours: Vec::new(),
            spaces: Vec::new(),
            orientation: Vec::new(),
            orientation_branches: Vec::new(),
            stair_config: Vec::new(),
            rels: BTreeMap::new(),
            contour_choices: Vec::new(),
            or_choices: Vec::new(),
            symmetry_groups: Vec::new(),
            cost: CostVar { var: VarId(0), scale: 1 },
            infeasible: false,
        };
        let spec = &problem.spec;
        for u in &spec.units {
            let zero = Dom::singleton(0);
            let l = u.l.dom_from(1).with_min(1);
            let w = u.w.dom_from(1).with_min(1);
            let r = create_rect(&mut m.store, zero.clone(), zero, l, w, Dom::at_least(1));
            m.contours.push(r);
        }
        for (i, s) in spec.spaces.iter().enumerate() {
            m.create_space(i, s);
        }
        m.post_links();
        for unit in 0..spec.units.len() {
            constraints::post_unit_implicit(&mut m, unit);
        }
        for (k, c) in spec.constraints.iter().enumerate() {
            constraints::post_constraint(&mut m, k, c);
        }
        reduction::post_reductions(&mut m);
        m.cost = optimize::build_cost(&mut m, &spec.cost);
        m.infeasible = m.store.fixpoint().is_failed();
        m
    }

    fn create_space(&mut self, index: usize, s: &SpaceSpec) {
        let unit = self.problem.unit_of[index];
        let c = self.contours[unit];
        let (cl, cw) = (self.store.max(c.l), self.store.max(c.w));
        let dl = s.l.dom_from(1).with_min(1);
        let dw = s.w.dom_from(1).with_min(1);
        let rotatable = s.kind == SpaceKind::Room && s.rotatable;
        let (branches, l, w) = if rotatable {
            let cap = cl.max(cw);
            let br = orientation_branches(&dl.with_max(cap), &dw.with_max(cap));
            let l = br.iter().fold(Dom::empty(), |acc, b| acc.union(&b.l));
            let w = br.iter().fold(Dom::empty(), |acc, b| acc.union(&b.w));
            (br, l, w)
        } else {
            (Vec::new(), dl, dw)
        };
        let area = s.s.dom_from(1);
        let r = create_rect(&mut self.store, Dom::range(0, cl), Dom::range(0, cw), l, w, area);
        // inclusion in the contour
        for side in Side::ALL {
            let (inner, outer) = (r.edge(side), c.edge(side));
            let atom = match side {
                Side::E | Side::N => Atom::le(LinExpr::var(inner), LinExpr::var(outer)),
                Side::W | Side::S => Atom::ge(LinExpr::var(inner), LinExpr::var(outer)),
            };
            self.store.post(AtomProp::new(atom));
        }
        let mut orient = None;
        if branches.len() > 1 {
            let var = self.store.new_var(Dom::from_values(branches.iter().map(|b| b.code)));
            for b in &branches {
                let body = Atom::and(vec![Atom::member(r.l, b.l.clone()), Atom::member(r.w, b.w.clone())]);
                self.store.post(Implies::new(Atom::is_value(var, b.code), body));
            }
            orient = Some(var);
        }
        let config = (s.kind == SpaceKind::Staircase).then(|| {
            let style = s.style.unwrap_or_default();
            let codes = staircase_configs(style, s.first_step);
            self.store.new_var(Dom::from_values(codes.iter().map(|c| c.0)))
        });
        self.spaces.push(r);
        self.orientation.push(orient);
        self.orientation_branches.push(if branches.len() > 1 { branches } else { Vec::new() });
        self.stair_config.push(config);
    }

    fn post_links(&mut self) {
        let problem = self.problem.clone();
        for link in &problem.spec.links {
            match link {
                LinkSpec::Superimpose { lower, upper } => {
                    let a = self.contours[problem.unit(lower).unwrap()];
                    let b = self.contours[problem.unit(upper).unwrap()];
                    self.equal(a.l, b.l);
                    self.equal(a.w, b.w);
                }
                LinkSpec::Stairs { lower, upper } => {
                    let i = problem.space(lower).unwrap();
                    let j = problem.space(upper).unwrap();
                    let (a, b) = (self.spaces[i], self.spaces[j]);
                    for (p, q) in [(a.x1, b.x1), (a.y1, b.y1), (a.l, b.l), (a.w, b.w)] {
                        self.equal(p, q);
                    }
                    let (ca, cb) = (self.stair_config[i].unwrap(), self.stair_config[j].unwrap());
                    let shared = self.store.dom(ca).intersect(self.store.dom(cb));
                    self.store.intersect(ca, &shared);
                    self.stair_config[j] = Some(ca);
                }
            }
        }
    }

    fn equal(&mut self, a: VarId, b: VarId) -> PropStatus {
        self.store.post(AtomProp::new(Atom::eq(LinExpr::var(a), LinExpr::var(b))))
    }

    pub fn num_spaces(&self) -> usize {
        self.spaces.len()
    }

    pub fn unit_of(&self, space: usize) -> usize {
        self.problem.unit_of[space]
    }

    pub fn contour_of(&self, space: usize) -> Rect {
        self.contours[self.unit_of(space)]
    }

    /// Restricts an attribute of a space to `[lo, hi]`.
    pub fn set_bound(&mut self, space: usize, attr: Attr, lo: i64, hi: i64) -> PropStatus {
        let v = self.spaces[space].attr(attr);
        self.store.intersect(v, &Dom::range(lo, hi))
    }

    /// Relation variable of a pair, with the position of `b` seen from `a`
    /// returned as a flag telling whether values must be read flipped.
    pub fn rel(&self, a: usize, b: usize) -> Option<(VarId, bool)> {
        if a < b {
            self.rels.get(&(a, b)).map(|&v| (v, false))
        } else {
            self.rels.get(&(b, a)).map(|&v| (v, true))
        }
    }

    /// Variables fixed by the geometric phase: orientation/configuration
    /// choices, dimensions and lower-left corners, plus free contour sizes.
    pub fn geometric_vars(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        for o in self.orientation.iter().flatten() {
            out.push(*o);
        }
        let mut seen = Vec::new();
        for c in self.stair_config.iter().flatten() {
            if !seen.contains(c) {
                seen.push(*c);
                out.push(*c);
            }
        }
        for c in &self.contours {
            out.push(c.l);
            out.push(c.w);
        }
        for r in &self.spaces {
            out.extend([r.l, r.w, r.x1, r.y1]);
        }
        out
    }

    /// Every decision variable of the model.
    pub fn topology_vars(&self) -> Vec<VarId> {
        let mut out: Vec<VarId> = self.or_choices.iter().map(|o| o.var).collect();
        out.extend(self.contour_choices.iter().map(|c| c.var));
        out.extend(self.rels.values().copied());
        out
    }
}
