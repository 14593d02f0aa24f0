#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toposketch::enumerate::{enumerate, EnumOptions, Enumeration};
use toposketch::model::Model;
use toposketch::layout::Layout;
use toposketch::optimize::{geometric_solutions, optimize};
use toposketch::oracle::{brute_force, classify, compare, OracleError, OracleReport, Verdict};
use toposketch::problem::{
    AdjacentSpec, Bounds, Clause, ConstraintSpec, Criterion, CostSpec, Problem, ProblemSpec, Side, SpaceKind,
    SpaceSpec,
};

pub const ORACLE_CAP: u64 = 20_000_000;

pub fn run(p: &Problem) -> Enumeration {
    let m = Model::build(Arc::new(p.clone()));
    enumerate(&m, &EnumOptions::default())
}

/// Engine run, oracle run and their comparison. Optimizer minima that
/// differ from the oracle are added to the cost mismatches.
pub fn check(p: &Problem) -> Result<(Enumeration, OracleReport, Verdict), OracleError> {
    let report = brute_force(p, ORACLE_CAP)?;
    let m = Model::build(Arc::new(p.clone()));
    let e = enumerate(&m, &EnumOptions::default());
    let mut v = compare(p, &e, &report, true);
    for t in &e.topologies {
        let Some(class) = report.classes.get(&t.signature) else { continue };
        let opt = optimize(&m, t, m.cost, Some(1)).expect("consistent topology has an optimum");
        if opt.cost_value != class.min_cost_value {
            v.cost_mismatches.push((t.signature.clone(), class.min_cost.clone(), format!("optimizer {}", opt.cost)));
        }
    }
    Ok((e, report, v))
}

/// Every geometric solution found through the enumerated topologies.
pub fn all_layouts(p: &Problem) -> Vec<Layout> {
    let m = Model::build(Arc::new(p.clone()));
    let e = enumerate(&m, &EnumOptions::default());
    let mut out = Vec::new();
    for t in &e.topologies {
        let (ls, complete) = geometric_solutions(&m, t, None);
        assert!(complete);
        out.extend(ls);
    }
    out
}

/// Placement tuples `(x1, y1, L, W)` of a layout, with contour sizes.
pub fn tuple(l: &Layout) -> Vec<i64> {
    let mut v: Vec<i64> = l.units.iter().flat_map(|u| [u.l, u.w]).collect();
    v.extend(l.spaces.iter().flat_map(|s| [s.x, s.y, s.l, s.w]));
    v
}

fn bounds(rng: &mut ChaCha8Rng, max: i64) -> Bounds {
    let lo = rng.random_range(1..=2.min(max));
    let hi = rng.random_range(lo..=(lo + 3).min(max));
    Bounds::new(lo, hi)
}

fn sides(rng: &mut ChaCha8Rng) -> Vec<Side> {
    let mut all = Side::ALL.to_vec();
    let k = rng.random_range(1..=2);
    let mut out = Vec::new();
    for _ in 0..k {
        out.push(all.remove(rng.random_range(0..all.len())));
    }
    out
}

/// Small random instance: at most four spaces in a frame of at most 6x6.
pub fn random_problem(seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let recovery = rng.random_bool(0.8);
    let (n, side_max) = if recovery { (rng.random_range(2..=4usize), 6) } else { (rng.random_range(2..=3usize), 4) };
    let l = rng.random_range(2..=side_max);
    let w = rng.random_range(2..=side_max);
    let mut spec = ProblemSpec::new(&format!("random-{seed}")).unit("u", l, w);
    spec.units[0].total_recovery = recovery;
    if rng.random_bool(0.3) {
        spec.units[0].l = Bounds::new(l - 1, l);
    }
    // equal shapes now and then so that symmetry groups appear
    let shared = bounds(&mut rng, l.max(w));
    for i in 0..n {
        let kind = if rng.random_bool(0.2) { SpaceKind::Corridor } else { SpaceKind::Room };
        let (dl, dw) = if rng.random_bool(0.4) { (shared, shared) } else { (bounds(&mut rng, l), bounds(&mut rng, w)) };
        let mut s = SpaceSpec::new(&format!("s{i}"), "u", kind).dims(dl, dw);
        if rng.random_bool(0.3) {
            s = s.fixed_orientation();
        }
        spec = spec.space(s);
    }
    let id = |k: usize| format!("s{k}");
    for _ in 0..rng.random_range(0..=3) {
        let a = rng.random_range(0..n);
        let b = (a + rng.random_range(1..n)) % n;
        let c = match rng.random_range(0..4) {
            0 => ConstraintSpec::Adjacent(AdjacentSpec::new(&id(a), &id(b)).contact(rng.random_range(0..=1))),
            1 => ConstraintSpec::OnContour { space: id(a), sides: sides(&mut rng) },
            2 => ConstraintSpec::Adjacent(AdjacentSpec::new(&id(a), &id(b)).sides(&sides(&mut rng))),
            _ => ConstraintSpec::Or {
                left: vec![Clause::Adjacent(AdjacentSpec::new(&id(a), &id(b)).contact(1))],
                right: vec![Clause::OnContour { space: id(a), sides: sides(&mut rng) }],
            },
        };
        spec = spec.constraint(c);
    }
    spec.reductions.symmetry = rng.random_bool(0.5);
    spec.cost = CostSpec::single(if rng.random_bool(0.5) {
        Criterion::InternalWallLength
    } else {
        Criterion::ExtraSpaceArea
    });
    Problem::new(spec).expect("generated instance is valid")
}

pub fn assert_ok(name: &str, v: &Verdict) {
    assert!(v.ok(), "{name}: engine and oracle disagree: {v:#?}");
}

/// Witness validity, signature distinctness and no duplicated geometric
/// emission, checked with the direct layout classifier. At most
/// `per_topology` layouts of each topology are expanded.
pub fn invariants(m: &Model, e: &Enumeration, per_topology: usize) -> Result<(), String> {
    let p = &m.problem;
    let mut sigs = BTreeSet::new();
    let mut tuples = BTreeSet::new();
    for t in &e.topologies {
        if !sigs.insert(t.signature.clone()) {
            return Err(format!("topology {} repeats a signature", t.index));
        }
        let got = classify(p, &t.witness).map_err(|e| e.to_string())?;
        if got.as_ref() != Some(&t.signature) {
            return Err(format!("witness of topology {} classifies as {got:?}", t.index));
        }
        let (layouts, _) = geometric_solutions(m, t, Some(per_topology));
        for l in &layouts {
            if classify(p, l).map_err(|e| e.to_string())?.as_ref() != Some(&t.signature) {
                return Err(format!("a layout of topology {} is invalid or misclassified", t.index));
            }
            // staircase configuration is a choice of its own, not implied by the geometry
            let configs: Vec<Option<i64>> = l.spaces.iter().map(|s| s.config).collect();
            if !tuples.insert((tuple(l), configs)) {
                return Err(format!("topology {} emits a layout twice", t.index));
            }
        }
    }
    Ok(())
}

pub fn factorial(k: u64) -> u64 {
    (1..=k).product()
}

/// Three interchangeable unit squares and a 3x1 bar in a 3x2 frame.
pub fn squares_and_bar() -> ProblemSpec {
    let mut spec = ProblemSpec::new("squares-and-bar").unit("u", 3, 2);
    for i in 0..3 {
        spec = spec.space(
            SpaceSpec::new(&format!("q{i}"), "u", SpaceKind::Room).dims(Bounds::exactly(1), Bounds::exactly(1)),
        );
    }
    spec.space(SpaceSpec::new("bar", "u", SpaceKind::Room).dims(Bounds::exactly(3), Bounds::exactly(1)).fixed_orientation())
}

/// Three interchangeable rotatable 1x3 bars in a 3x3 frame.
pub fn rotatable_bars() -> ProblemSpec {
    let mut spec = ProblemSpec::new("bars").unit("u", 3, 3);
    for i in 0..3 {
        spec = spec.space(
            SpaceSpec::new(&format!("b{i}"), "u", SpaceKind::Room).dims(Bounds::exactly(1), Bounds::exactly(3)),
        );
    }
    spec
}

/// Four interchangeable squares sized 1 or 2 in a 3x3 frame, with rotatable
/// 1x2 dominoes allowed.
pub fn mixed_sizes() -> ProblemSpec {
    let mut spec = ProblemSpec::new("mixed").unit("u", 3, 3);
    for i in 0..4 {
        spec = spec.space(
            SpaceSpec::new(&format!("r{i}"), "u", SpaceKind::Room).dims(Bounds::new(1, 2), Bounds::new(1, 3)),
        );
    }
    spec
}

pub fn with_symmetry(mut spec: ProblemSpec, on: bool) -> Problem {
    spec.reductions.symmetry = on;
    Problem::new(spec).unwrap()
}

pub fn instances() -> Vec<Problem> {
    let mut out: Vec<Problem> = [squares_and_bar(), rotatable_bars(), mixed_sizes()]
        .into_iter()
        .map(|s| with_symmetry(s, true))
        .collect();
    out.extend((0..24).map(random_problem));
    out
}
