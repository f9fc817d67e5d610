//! Hard rods (k-mers) on the square lattice: grand-canonical Monte Carlo,
//! exact enumeration on small boxes, tile coarse-graining and contour
//! statistics, and the estimators needed to measure orientational order.
//!
//! The model: oriented `1 x k` rods live on sites of a finite box, interact
//! through hard-core exclusion only, and carry an activity `z` per rod, so a
//! configuration `R` has weight `z^|R|`. Plus/minus boundary conditions force
//! rods centered in the `2k`-thick boundary peel to be horizontal/vertical,
//! which selects the orientation of the ordered phase at intermediate
//! densities.

pub mod coarsegrain;
pub mod lattice;
pub mod observables;
pub mod oracle;
pub mod sampler;
pub mod stats;

pub use lattice::{
    BoundaryCondition, BoxSpec, Containment, LatticeError, Orientation, Rod, RodConfig, Site,
};
