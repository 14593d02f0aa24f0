//! Finite-domain integer constraint engine.
//!
//! Domains are interval unions ([`Dom`]), propagation runs a FIFO queue to
//! fixpoint, and choice points restore domains exactly from a trail.

mod atom;
mod domain;
mod search;
mod store;

pub use atom::{Atom, AtomProp, Implies, LinExpr, Product};
pub use domain::{Dom, INF};
pub use search::{
    all_solutions, label, minimize, minimize_best, minimize_best_with, LabelOptions, Optimum, SearchStats, Solution,
    ValSelect, VarSelect,
};
pub use store::{Domains, Failed, Marker, PropId, PropResult, PropStatus, Propagator, Store, VarId};
