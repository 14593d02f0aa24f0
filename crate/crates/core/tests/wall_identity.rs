use std::collections::BTreeMap;
use std::sync::Arc;

use toposketch::fd::Store;
use toposketch::io::load_bundled;
use toposketch::layout::Layout;
use toposketch::model::Model;
use toposketch::optimize::build_cost;
use toposketch::oracle::{visit, DEFAULT_CAP};
use toposketch::problem::{CostSpec, Criterion};

/// Unit grid edges with different spaces on both sides, counted cell by cell.
fn partition_segments(l: &Layout) -> i64 {
    let u = &l.units[0];
    let mut owner = BTreeMap::new();
    for (k, s) in l.spaces.iter().enumerate() {
        for x in s.x..s.x2() {
            for y in s.y..s.y2() {
                assert!(owner.insert((x, y), k).is_none(), "overlap at ({x}, {y})");
            }
        }
    }
    let mut n = 0;
    for x in 0..u.l {
        for y in 0..u.w {
            let here = owner[&(x, y)];
            if x + 1 < u.l && owner[&(x + 1, y)] != here {
                n += 1;
            }
            if y + 1 < u.w && owner[&(x, y + 1)] != here {
                n += 1;
            }
        }
    }
    n
}

/// Value of the engine's cost variable with the layout's geometry fixed.
fn engine_cost(m: &Model, cost: toposketch::optimize::CostVar, l: &Layout) -> i64 {
    let mut s: Store = m.store.clone();
    for (r, p) in m.spaces.iter().zip(&l.spaces) {
        for (v, val) in [(r.x1, p.x), (r.y1, p.y), (r.l, p.l), (r.w, p.w)] {
            assert!(!s.assign(v, val).is_failed());
        }
    }
    assert!(!s.fixpoint().is_failed());
    s.value(cost.var).expect("cost fixed by the geometry")
}

#[test]
fn internal_wall_length_equals_partition_segments_on_pfk() {
    let p = load_bundled("pfk").unwrap();
    let mut m = Model::build(Arc::new(p.clone()));
    let cost = build_cost(&mut m, &CostSpec::single(Criterion::InternalWallLength));
    let mut tilings = 0;
    visit(&p, DEFAULT_CAP, |_, l, _| {
        let direct = partition_segments(l);
        assert_eq!(l.criterion(Criterion::InternalWallLength), direct);
        assert_eq!(l.contact_length(), direct);
        assert_eq!(engine_cost(&m, cost, l), direct);
        tilings += 1;
    })
    .unwrap();
    assert_eq!(tilings, 24);
}
