//! Dynamic optimal transport by network simplex, backed by an Euler-tour
//! forest and a skip orthogonal list over its element pairs.

pub mod dynamic;
pub mod error;
pub mod euler_tour;
pub mod model;
pub mod oracle;
pub mod par;
pub mod simplex;
pub mod sol;
pub mod workload;

pub use dynamic::{OpReport, Solver, SolverConfig, UpdateEvent};
pub use error::{Error, Result};
pub use euler_tour::{EulerForest, Tour, TourElement};
pub use model::*;
pub use simplex::{PivotReport, SimplexConfig, SimplexState, StaticSolver};
pub use sol::{IndexMode, SkipOrthogonalList, TourMatrix};
