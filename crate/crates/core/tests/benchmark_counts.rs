use std::sync::Arc;

use toposketch::enumerate::{enumerate, EnumOptions};
use toposketch::io::load_bundled;
use toposketch::model::Model;

fn count(name: &str) -> (usize, u64) {
    let m = Model::build(Arc::new(load_bundled(name).unwrap()));
    let e = enumerate(&m, &EnumOptions::default());
    eprintln!("{name}: {} topologies, {} candidates, {:.0} ms", e.topologies.len(), e.stats.candidates, e.stats.elapsed_ms);
    (e.topologies.len(), e.stats.candidates)
}

#[test]
fn pfk_has_24_tilings() {
    assert_eq!(count("pfk").0, 24);
}

#[test]
fn lr_has_72_tilings() {
    assert_eq!(count("lr").0, 72);
}

#[test]
fn tng_has_4_topologies() {
    assert_eq!(count("tng").0, 4);
}

#[test]
fn col9_has_4_topologies() {
    assert_eq!(count("col9").0, 4);
}
