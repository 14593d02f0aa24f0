//! The functional-diagram schema: spaces, building units, constraints,
//! reduction switches and the cost specification.
//!
//! These types are the on-disk format (see [`crate::io`]) and the input of
//! [`crate::model::Model::build`]. [`Problem`] wraps a validated spec with id
//! lookups.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::fd::{Dom, INF};

pub const SCHEMA: &str = "toposketch/1";

/// Optional inclusive bounds. Missing ends are unbounded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<i64>,
}

impl Bounds {
    pub const fn new(min: i64, max: i64) -> Self {
        Bounds { min: Some(min), max: Some(max) }
    }

    pub const fn at_least(min: i64) -> Self {
        Bounds { min: Some(min), max: None }
    }

    pub const fn exactly(v: i64) -> Self {
        Bounds::new(v, v)
    }

    pub fn is_unbounded(&self) -> bool {
        self.min.is_none() && self.max.is_none()
    }

    pub fn lo(&self) -> i64 {
        self.min.unwrap_or(-INF)
    }

    pub fn hi(&self) -> i64 {
        self.max.unwrap_or(INF)
    }

    /// Domain with a default lower bound when `min` is absent.
    pub fn dom_from(&self, default_min: i64) -> Dom {
        Dom::range(self.min.unwrap_or(default_min), self.hi())
    }

    pub fn dom(&self) -> Dom {
        Dom::range(self.lo(), self.hi())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Room,
    Corridor,
    Staircase,
}

impl SpaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpaceKind::Room => "room",
            SpaceKind::Corridor => "corridor",
            SpaceKind::Staircase => "staircase",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StairStyle {
    #[default]
    Simple,
    Double,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstStep {
    Left,
    Right,
}

/// Compass side / relative position. `y` grows northward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    E,
    W,
    N,
    S,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::E, Side::W, Side::N, Side::S];

    /// Encoding used for discrete variables; ascending code is the branching
    /// order E, W, N, S.
    pub fn code(self) -> i64 {
        match self {
            Side::E => 0,
            Side::W => 1,
            Side::N => 2,
            Side::S => 3,
        }
    }

    pub fn from_code(c: i64) -> Side {
        match c {
            0 => Side::E,
            1 => Side::W,
            2 => Side::N,
            3 => Side::S,
            _ => panic!("invalid side code {c}"),
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::E => Side::W,
            Side::W => Side::E,
            Side::N => Side::S,
            Side::S => Side::N,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Side::E => 'E',
            Side::W => 'W',
            Side::N => 'N',
            Side::S => 'S',
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitSpec {
    pub id: String,
    /// Contour length (x extent).
    #[serde(rename = "L")]
    pub l: Bounds,
    /// Contour width (y extent).
    #[serde(rename = "W")]
    pub w: Bounds,
    #[serde(default = "yes")]
    pub total_recovery: bool,
    #[serde(default = "yes")]
    pub non_overlap: bool,
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub id: String,
    pub unit: String,
    pub kind: SpaceKind,
    #[serde(rename = "L", default, skip_serializing_if = "Bounds::is_unbounded")]
    pub l: Bounds,
    #[serde(rename = "W", default, skip_serializing_if = "Bounds::is_unbounded")]
    pub w: Bounds,
    #[serde(rename = "S", default, skip_serializing_if = "Bounds::is_unbounded")]
    pub s: Bounds,
    /// Rooms only: whether the 90 degree orientation is allowed.
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub rotatable: bool,
    /// Staircases only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<StairStyle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_step: Option<FirstStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl SpaceSpec {
    pub fn new(id: &str, unit: &str, kind: SpaceKind) -> Self {
        SpaceSpec {
            id: id.into(),
            unit: unit.into(),
            kind,
            l: Bounds::default(),
            w: Bounds::default(),
            s: Bounds::default(),
            rotatable: true,
            style: None,
            first_step: None,
            label: None,
        }
    }

    pub fn dims(mut self, l: Bounds, w: Bounds) -> Self {
        self.l = l;
        self.w = w;
        self
    }

    pub fn area(mut self, s: Bounds) -> Self {
        self.s = s;
        self
    }

    pub fn fixed_orientation(mut self) -> Self {
        self.rotatable = false;
        self
    }
}

/// Attribute of a space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Attr {
    #[serde(rename = "x1")]
    X1,
    #[serde(rename = "y1")]
    Y1,
    #[serde(rename = "x2")]
    X2,
    #[serde(rename = "y2")]
    Y2,
    L,
    W,
    S,
}

impl Attr {
    pub const ALL: [Attr; 7] = [Attr::X1, Attr::Y1, Attr::X2, Attr::Y2, Attr::L, Attr::W, Attr::S];

    pub fn as_str(self) -> &'static str {
        match self {
            Attr::X1 => "x1",
            Attr::Y1 => "y1",
            Attr::X2 => "x2",
            Attr::Y2 => "y2",
            Attr::L => "L",
            Attr::W => "W",
            Attr::S => "S",
        }
    }
}

impl FromStr for Attr {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Attr::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown attribute `{s}`"))
    }
}

/// `space.attr`, e.g. `toilet.S`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttrRef {
    pub space: String,
    pub attr: Attr,
}

impl fmt::Display for AttrRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.space, self.attr.as_str())
    }
}

impl FromStr for AttrRef {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (space, attr) = s
            .rsplit_once('.')
            .ok_or_else(|| format!("expected `space.attr`, got `{s}`"))?;
        Ok(AttrRef { space: space.to_string(), attr: attr.parse()? })
    }
}

impl Serialize for AttrRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AttrRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    First,
    Last,
}

fn default_d2() -> Bounds {
    Bounds::exactly(0)
}

fn default_d1() -> Bounds {
    Bounds::at_least(0)
}

fn is_default_d1(b: &Bounds) -> bool {
    *b == default_d1()
}

fn is_default_d2(b: &Bounds) -> bool {
    *b == default_d2()
}

/// Generalized adjacency between two spaces.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjacentSpec {
    pub a: String,
    pub b: String,
    /// Allowed positions of `b` relative to `a`; all four when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sides: Option<Vec<Side>>,
    /// Contact length.
    #[serde(default = "default_d1", skip_serializing_if = "is_default_d1")]
    pub d1: Bounds,
    /// Distance between the spaces.
    #[serde(default = "default_d2", skip_serializing_if = "is_default_d2")]
    pub d2: Bounds,
}

impl AdjacentSpec {
    pub fn new(a: &str, b: &str) -> Self {
        AdjacentSpec { a: a.into(), b: b.into(), sides: None, d1: default_d1(), d2: default_d2() }
    }

    pub fn contact(mut self, min: i64) -> Self {
        self.d1 = Bounds::at_least(min);
        self
    }

    pub fn sides(mut self, sides: &[Side]) -> Self {
        self.sides = Some(sides.to_vec());
        self
    }

    pub fn allowed(&self) -> Vec<Side> {
        self.sides.clone().unwrap_or_else(|| Side::ALL.to_vec())
    }
}

/// A member of an OR branch.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Clause {
    Adjacent(AdjacentSpec),
    /// The space touches every listed contour side.
    OnContour { space: String, sides: Vec<Side> },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSpec {
    Adjacent(AdjacentSpec),
    /// The space touches one of the listed contour sides; a placement valid
    /// for several sides is attributed to the first one listed.
    OnContour { space: String, sides: Vec<Side> },
    /// `lower[0]/lower[1] <= p1/p2 <= upper[0]/upper[1]`.
    Ratio { p1: AttrRef, p2: AttrRef, lower: [i64; 2], upper: [i64; 2] },
    /// Inclusive OR; solutions satisfying both branches belong to `left`.
    Or { left: Vec<Clause>, right: Vec<Clause> },
    StairsAdjacent { stairs: String, space: String, step: Step },
    CorridorAlignment { c1: String, c2: String },
}

impl ConstraintSpec {
    /// Space ids mentioned by the constraint, in order of appearance.
    pub fn spaces(&self) -> Vec<&str> {
        match self {
            ConstraintSpec::Adjacent(a) => vec![&a.a, &a.b],
            ConstraintSpec::OnContour { space, .. } => vec![space],
            ConstraintSpec::Ratio { p1, p2, .. } => vec![&p1.space, &p2.space],
            ConstraintSpec::Or { left, right } => left
                .iter()
                .chain(right.iter())
                .flat_map(|c| match c {
                    Clause::Adjacent(a) => vec![a.a.as_str(), a.b.as_str()],
                    Clause::OnContour { space, .. } => vec![space.as_str()],
                })
                .collect(),
            ConstraintSpec::StairsAdjacent { stairs, space, .. } => vec![stairs, space],
            ConstraintSpec::CorridorAlignment { c1, c2 } => vec![c1, c2],
        }
    }

    /// Whether the constraint ties a space to its contour.
    pub fn touches_contour(&self) -> bool {
        match self {
            ConstraintSpec::OnContour { .. } => true,
            ConstraintSpec::Or { left, right } => left
                .iter()
                .chain(right.iter())
                .any(|c| matches!(c, Clause::OnContour { .. })),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinkSpec {
    /// Two staircases share footprint and configuration.
    Stairs { lower: String, upper: String },
    /// Two units share contour dimensions.
    Superimpose { lower: String, upper: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetrySpec {
    /// Detect interchangeable spaces automatically.
    #[serde(default = "yes")]
    pub auto: bool,
    /// Explicit groups, added to (or replacing, when `auto` is off) detected ones.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<Vec<String>>,
}

impl Default for SymmetrySpec {
    fn default() -> Self {
        SymmetrySpec { auto: true, groups: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DminMode {
    /// Recomputed from the current domains of the other spaces.
    #[default]
    Dynamic,
    /// Computed once from the initial domains.
    Static,
}

/// Switches for the implicit search-reduction constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reductions {
    #[serde(default = "yes")]
    pub symmetry: bool,
    #[serde(default = "yes")]
    pub incoherent: bool,
    #[serde(default = "yes")]
    pub topological: bool,
    #[serde(default = "yes")]
    pub orientation_propagation: bool,
    /// Facing gap between non-overlapping spaces is 0 or at least dmin.
    #[serde(default = "yes")]
    pub gap: bool,
    #[serde(default)]
    pub dmin: DminMode,
    /// Include contour-attachment choices in topological signatures.
    #[serde(default = "yes")]
    pub signature_contours: bool,
}

impl Default for Reductions {
    fn default() -> Self {
        Reductions {
            symmetry: true,
            incoherent: true,
            topological: true,
            orientation_propagation: true,
            gap: true,
            dmin: DminMode::Dynamic,
            signature_contours: true,
        }
    }
}

impl Reductions {
    /// Every reduction disabled (definitional constraints only).
    pub fn none() -> Self {
        Reductions {
            symmetry: false,
            incoherent: false,
            topological: false,
            orientation_propagation: false,
            gap: false,
            dmin: DminMode::Dynamic,
            signature_contours: true,
        }
    }
}

/// Non-negative rational weight, written as an integer or `"p/q"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Weight(pub Ratio<i64>);

impl Weight {
    pub fn zero() -> Self {
        Weight(Ratio::from_integer(0))
    }

    pub fn int(v: i64) -> Self {
        Weight(Ratio::from_integer(v))
    }

    pub fn is_zero(&self) -> bool {
        *self.0.numer() == 0
    }
}

impl Default for Weight {
    fn default() -> Self {
        Weight::zero()
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self.0.denom() == 1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Weight {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let r = if let Some((p, q)) = s.split_once('/') {
            let p: i64 = p.trim().parse().map_err(|_| format!("bad weight `{s}`"))?;
            let q: i64 = q.trim().parse().map_err(|_| format!("bad weight `{s}`"))?;
            if q <= 0 {
                return Err(format!("bad weight denominator in `{s}`"));
            }
            Ratio::new(p, q)
        } else {
            Ratio::from_integer(s.parse().map_err(|_| format!("bad weight `{s}`"))?)
        };
        if r < Ratio::from_integer(0) {
            return Err(format!("weights must be non-negative, got `{s}`"));
        }
        Ok(Weight(r))
    }
}

impl Serialize for Weight {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if *self.0.denom() == 1 {
            s.serialize_i64(*self.0.numer())
        } else {
            s.collect_str(self)
        }
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) if v >= 0 => Ok(Weight::int(v)),
            Raw::Int(v) => Err(serde::de::Error::custom(format!("weights must be non-negative, got {v}"))),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    CorridorArea,
    ExtraSpaceArea,
    InternalWallLength,
    ExternalWallLength,
    CombinedWallLength,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::CorridorArea,
        Criterion::ExtraSpaceArea,
        Criterion::InternalWallLength,
        Criterion::ExternalWallLength,
        Criterion::CombinedWallLength,
    ];
}

fn one() -> Weight {
    Weight::int(1)
}

fn is_one(w: &Weight) -> bool {
    *w == one()
}

/// Weighted sum of criteria.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    #[serde(default)]
    pub weights: BTreeMap<Criterion, Weight>,
    /// Cost per module of internal partition.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub cost_internal_wall: Weight,
    /// Cost per module of external wall.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub cost_external_wall: Weight,
}

impl Default for CostSpec {
    fn default() -> Self {
        CostSpec::single(Criterion::CorridorArea)
    }
}

impl CostSpec {
    pub fn single(c: Criterion) -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(c, Weight::int(1));
        CostSpec { weights, cost_internal_wall: one(), cost_external_wall: one() }
    }

    pub fn weight(&self, c: Criterion) -> Weight {
        self.weights.get(&c).copied().unwrap_or_default()
    }
}

/// A whole problem file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub schema: String,
    pub name: String,
    /// Meters per module.
    #[serde(default = "default_module")]
    pub module_length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub units: Vec<UnitSpec>,
    #[serde(default)]
    pub spaces: Vec<SpaceSpec>,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub symmetry: SymmetrySpec,
    #[serde(default)]
    pub reductions: Reductions,
    #[serde(default)]
    pub cost: CostSpec,
}

fn default_module() -> f64 {
    1.0
}

impl ProblemSpec {
    pub fn new(name: &str) -> Self {
        ProblemSpec {
            schema: SCHEMA.into(),
            name: name.into(),
            module_length: 1.0,
            notes: None,
            units: Vec::new(),
            spaces: Vec::new(),
            constraints: Vec::new(),
            links: Vec::new(),
            symmetry: SymmetrySpec::default(),
            reductions: Reductions::default(),
            cost: CostSpec::default(),
        }
    }

    pub fn unit(mut self, id: &str, l: i64, w: i64) -> Self {
        self.units.push(UnitSpec {
            id: id.into(),
            l: Bounds::exactly(l),
            w: Bounds::exactly(w),
            total_recovery: true,
            non_overlap: true,
        });
        self
    }

    pub fn space(mut self, s: SpaceSpec) -> Self {
        self.spaces.push(s);
        self
    }

    pub fn constraint(mut self, c: ConstraintSpec) -> Self {
        self.constraints.push(c);
        self
    }

    /// The same problem on a grid `k` times finer: lengths scale by `k`,
    /// areas by `k²`, and the module shrinks by `k`.
    pub fn refine_module(&self, k: i64) -> ProblemSpec {
        assert!(k >= 1, "refinement factor must be positive");
        let mut out = self.clone();
        if k == 1 {
            return out;
        }
        out.module_length = self.module_length / k as f64;
        for u in &mut out.units {
            u.l = scale_bounds(u.l, k, true);
            u.w = scale_bounds(u.w, k, true);
        }
        for s in &mut out.spaces {
            s.l = scale_bounds(s.l, k, true);
            s.w = scale_bounds(s.w, k, true);
            s.s = scale_bounds(s.s, k * k, false);
        }
        let adj = |a: &mut AdjacentSpec| {
            a.d1 = scale_bounds(a.d1, k, false);
            a.d2 = scale_bounds(a.d2, k, false);
        };
        for c in &mut out.constraints {
            match c {
                ConstraintSpec::Adjacent(a) => adj(a),
                ConstraintSpec::Or { left, right } => {
                    for cl in left.iter_mut().chain(right.iter_mut()) {
                        if let Clause::Adjacent(a) = cl {
                            adj(a);
                        }
                    }
                }
                ConstraintSpec::Ratio { p1, p2, lower, upper } => {
                    let e = |a: Attr| if a == Attr::S { 2 } else { 1 };
                    let d = e(p1.attr) - e(p2.attr);
                    for r in [lower, upper] {
                        match d {
                            1 => r[0] *= k,
                            -1 => r[1] *= k,
                            _ => {}
                        }
                    }
                }
                _ => {}
            }
        }
        out
    }
}

/// Multiplies both ends by `k`; a missing minimum of a length means one module.
fn scale_bounds(b: Bounds, k: i64, length: bool) -> Bounds {
    let min = match b.min {
        Some(v) => Some(v * k),
        None if length => Some(k),
        None => None,
    };
    Bounds { min, max: b.max.map(|v| if v >= INF { v } else { v * k }) }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProblemError {
    #[error("unsupported schema `{0}` (expected `{SCHEMA}`)")]
    Schema(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("{context}: unknown space `{id}`")]
    UnknownSpace { context: String, id: String },
    #[error("space `{space}`: unknown unit `{unit}`")]
    UnknownUnit { space: String, unit: String },
    #[error("{0}")]
    Invalid(String),
}

/// A validated [`ProblemSpec`] with index lookups.
#[derive(Clone, Debug)]
pub struct Problem {
    pub spec: ProblemSpec,
    space_index: HashMap<String, usize>,
    unit_index: HashMap<String, usize>,
    /// Unit of each space.
    pub unit_of: Vec<usize>,
    /// Spaces of each unit, in declaration order.
    pub unit_spaces: Vec<Vec<usize>>,
}

impl Problem {
    pub fn new(spec: ProblemSpec) -> Result<Self, ProblemError> {
        if spec.schema != SCHEMA {
            return Err(ProblemError::Schema(spec.schema.clone()));
        }
        if !(spec.module_length > 0.0) {
            return Err(ProblemError::Invalid("module_length must be positive".into()));
        }
        let mut unit_index = HashMap::new();
        for (i, u) in spec.units.iter().enumerate() {
            if unit_index.insert(u.id.clone(), i).is_some() {
                return Err(ProblemError::DuplicateId(u.id.clone()));
            }
            if u.l.max.is_none() || u.w.max.is_none() {
                return Err(ProblemError::Invalid(format!("unit `{}`: contour L and W need an upper bound", u.id)));
            }
            if u.l.dom_from(1).is_empty() || u.w.dom_from(1).is_empty() {
                return Err(ProblemError::Invalid(format!("unit `{}`: empty contour bounds", u.id)));
            }
        }
        let mut space_index = HashMap::new();
        let mut unit_of = Vec::new();
        let mut unit_spaces = vec![Vec::new(); spec.units.len()];
        for (i, s) in spec.spaces.iter().enumerate() {
            if unit_index.contains_key(&s.id) || space_index.insert(s.id.clone(), i).is_some() {
                return Err(ProblemError::DuplicateId(s.id.clone()));
            }
            let u = *unit_index.get(&s.unit).ok_or_else(|| ProblemError::UnknownUnit {
                space: s.id.clone(),
                unit: s.unit.clone(),
            })?;
            unit_of.push(u);
            unit_spaces[u].push(i);
            if s.kind != SpaceKind::Staircase && (s.style.is_some() || s.first_step.is_some()) {
                return Err(ProblemError::Invalid(format!("space `{}`: style/first_step apply to staircases only", s.id)));
            }
            if s.first_step.is_some() && s.style != Some(StairStyle::Double) {
                return Err(ProblemError::Invalid(format!("space `{}`: first_step needs a double staircase", s.id)));
            }
            for (name, b) in [("L", &s.l), ("W", &s.w), ("S", &s.s)] {
                if let (Some(lo), Some(hi)) = (b.min, b.max) {
                    if lo > hi {
                        return Err(ProblemError::Invalid(format!("space `{}`: empty {name} bounds", s.id)));
                    }
                }
            }
        }
        let p = Problem { spec, space_index, unit_index, unit_of, unit_spaces };
        p.validate_references()?;
        Ok(p)
    }

    fn validate_references(&self) -> Result<(), ProblemError> {
        let known = |ctx: &str, id: &str| -> Result<usize, ProblemError> {
            self.space(id).ok_or_else(|| ProblemError::UnknownSpace { context: ctx.into(), id: id.into() })
        };
        for (k, c) in self.spec.constraints.iter().enumerate() {
            let ctx = format!("constraint #{k}");
            let ids = c.spaces();
            let idx: Vec<usize> = ids.iter().map(|id| known(&ctx, id)).collect::<Result<_, _>>()?;
            let same_unit = |a: usize, b: usize| -> Result<(), ProblemError> {
                if a == b {
                    return Err(ProblemError::Invalid(format!("{ctx}: a space cannot be related to itself")));
                }
                if self.unit_of[a] != self.unit_of[b] {
                    return Err(ProblemError::Invalid(format!("{ctx}: spaces belong to different units")));
                }
                Ok(())
            };
            match c {
                ConstraintSpec::Adjacent(a) => {
                    same_unit(idx[0], idx[1])?;
                    check_adjacent(&ctx, a)?;
                }
                ConstraintSpec::OnContour { sides, .. } => check_sides(&ctx, sides)?,
                ConstraintSpec::Ratio { lower, upper, .. } => {
                    if lower.iter().chain(upper.iter()).any(|&v| v <= 0) {
                        return Err(ProblemError::Invalid(format!("{ctx}: ratio terms must be positive")));
                    }
                    if (lower[0] as i128) * (upper[1] as i128) > (upper[0] as i128) * (lower[1] as i128) {
                        return Err(ProblemError::Invalid(format!("{ctx}: lower ratio exceeds upper ratio")));
                    }
                }
                ConstraintSpec::Or { left, right } => {
                    if left.is_empty() || right.is_empty() {
                        return Err(ProblemError::Invalid(format!("{ctx}: OR branches must be non-empty")));
                    }
                    for cl in left.iter().chain(right.iter()) {
                        match cl {
                            Clause::Adjacent(a) => {
                                same_unit(known(&ctx, &a.a)?, known(&ctx, &a.b)?)?;
                                check_adjacent(&ctx, a)?;
                            }
                            Clause::OnContour { sides, .. } => check_sides(&ctx, sides)?,
                        }
                    }
                }
                ConstraintSpec::StairsAdjacent { .. } => {
                    same_unit(idx[0], idx[1])?;
                    if self.spec.spaces[idx[0]].kind != SpaceKind::Staircase {
                        return Err(ProblemError::Invalid(format!("{ctx}: `{}` is not a staircase", ids[0])));
                    }
                }
                ConstraintSpec::CorridorAlignment { .. } => {
                    same_unit(idx[0], idx[1])?;
                    for (&i, id) in idx.iter().zip(&ids) {
                        if self.spec.spaces[i].kind != SpaceKind::Corridor {
                            return Err(ProblemError::Invalid(format!("{ctx}: `{id}` is not a corridor")));
                        }
                    }
                }
            }
        }
        for (k, l) in self.spec.links.iter().enumerate() {
            let ctx = format!("link #{k}");
            match l {
                LinkSpec::Stairs { lower, upper } => {
                    let a = known(&ctx, lower)?;
                    let b = known(&ctx, upper)?;
                    for &i in &[a, b] {
                        if self.spec.spaces[i].kind != SpaceKind::Staircase {
                            return Err(ProblemError::Invalid(format!("{ctx}: `{}` is not a staircase", self.spec.spaces[i].id)));
                        }
                    }
                    if self.unit_of[a] == self.unit_of[b] {
                        return Err(ProblemError::Invalid(format!("{ctx}: linked staircases must be in different units")));
                    }
                }
                LinkSpec::Superimpose { lower, upper } => {
                    for u in [lower, upper] {
                        if self.unit(u).is_none() {
                            return Err(ProblemError::Invalid(format!("{ctx}: unknown unit `{u}`")));
                        }
                    }
                }
            }
        }
        for g in &self.spec.symmetry.groups {
            for id in g {
                known("symmetry group", id)?;
            }
        }
        Ok(())
    }

    pub fn space(&self, id: &str) -> Option<usize> {
        self.space_index.get(id).copied()
    }

    pub fn unit(&self, id: &str) -> Option<usize> {
        self.unit_index.get(id).copied()
    }

    pub fn space_id(&self, i: usize) -> &str {
        &self.spec.spaces[i].id
    }

    pub fn num_spaces(&self) -> usize {
        self.spec.spaces.len()
    }
}

fn check_sides(ctx: &str, sides: &[Side]) -> Result<(), ProblemError> {
    if sides.is_empty() {
        return Err(ProblemError::Invalid(format!("{ctx}: at least one side is required")));
    }
    let mut seen = sides.to_vec();
    seen.sort();
    seen.dedup();
    if seen.len() != sides.len() {
        return Err(ProblemError::Invalid(format!("{ctx}: repeated side")));
    }
    Ok(())
}

fn check_adjacent(ctx: &str, a: &AdjacentSpec) -> Result<(), ProblemError> {
    if let Some(s) = &a.sides {
        check_sides(ctx, s)?;
    }
    if a.d2.min.unwrap_or(0) < 0 {
        return Err(ProblemError::Invalid(format!("{ctx}: d2 must be non-negative")));
    }
    if a.d1.dom().is_empty() || a.d2.dom().is_empty() {
        return Err(ProblemError::Invalid(format!("{ctx}: empty d1/d2 bounds")));
    }
    Ok(())
}
