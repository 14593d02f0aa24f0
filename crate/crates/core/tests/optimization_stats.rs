use std::sync::Arc;

use toposketch::enumerate::{enumerate, EnumOptions};
use toposketch::io::load_bundled;
use toposketch::model::Model;
use toposketch::optimize::{optimize, summarize};

#[test]
fn every_topology_optimizes_and_reports_timing() {
    for name in ["tng", "pfk", "lr", "col9", "house2f"] {
        let m = Model::build(Arc::new(load_bundled(name).unwrap()));
        let e = enumerate(&m, &EnumOptions::default());
        assert!(!e.topologies.is_empty(), "{name}");
        let mut results = Vec::new();
        for t in &e.topologies {
            let o = optimize(&m, t, m.cost, Some(10)).unwrap_or_else(|| panic!("{name} t{}: no optimum", t.index));
            let s = &o.stats;
            assert!(s.improvements >= 1);
            assert!(s.time_to_first_ms <= s.time_to_best_ms && s.time_to_best_ms <= s.total_ms);
            assert!(!o.solutions.is_empty());
            // the enumeration witness is a best layout of its topology
            assert_eq!(t.witness.cost(&m.problem.spec.cost), o.cost_value, "{name} t{}", t.index);
            for sol in &o.solutions {
                assert_eq!(sol.layout.cost(&m.problem.spec.cost), o.cost_value);
            }
            results.push(o);
        }
        let sum = summarize(&results);
        println!(
            "{name}: {} topologies, first ms median {:.3} max {:.3}, best ms median {:.3} max {:.3}, first optimal in {}",
            sum.topologies,
            sum.time_to_first_ms.median,
            sum.time_to_first_ms.max,
            sum.time_to_best_ms.median,
            sum.time_to_best_ms.max,
            sum.first_was_best
        );
        assert_eq!(sum.topologies, e.topologies.len());
    }
}
