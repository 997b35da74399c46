//! Linear, decoupled, energy-stable time stepping for thermodynamically
//! consistent flow models on a staggered 2-D grid.
//!
//! The crate is organised bottom-up: [`grid`] holds fields and discrete
//! operators, [`linsolve`] the Krylov and spectral solvers, [`eqrid`] the
//! model-agnostic stepping machinery, and [`chns`] / [`ericksen_leslie`] the
//! two concrete models. [`diagnostics`] collects energy series and
//! refinement studies.

pub mod chns;
pub mod diagnostics;
pub mod eqrid;
pub mod ericksen_leslie;
pub mod grid;
pub mod linsolve;
