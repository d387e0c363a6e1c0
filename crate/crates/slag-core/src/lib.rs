//! Split special Lagrangian planes and submanifolds over the double numbers `D`.
//!
//! Conventions: `z = x + τy` with `τ² = 1`, idempotents `e = ½(1 − τ)` and
//! `ē = ½(1 + τ)`, null coordinates `u = x − y`, `v = x + y`, inner product
//! `Σx² − Σy²` and symplectic form `ω = Σ dx∧dy = ½ Σ du∧dv`.

pub mod deform;
pub mod dmat;
pub mod dnum;
pub mod error;
pub mod expr;
pub mod forms;
pub mod holo2d;
pub mod lin;
pub mod planes;
pub mod potential;
pub mod sweeps;
pub mod transport;

pub use dmat::DMatrix;
pub use dnum::DNumber;
pub use error::{Result, SlagError};
pub use forms::{AltForm, MultiVector};
pub use planes::PlaneBasis;

/// Default absolute tolerance for predicates.
pub const DEFAULT_TOL: f64 = 1e-10;
