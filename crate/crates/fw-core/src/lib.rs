//! Numerical laboratory for the Fornberg-Whitham equation in nonlocal form,
//!
//!   u_t + (3/2) u u_x = dx (1 - dxx)^{-1} u,
//!
//! built to measure, at desk scale, the quantities that drive wave breaking
//! and norm inflation for peakon-antipeakon data: characteristic flows,
//! Riccati slope envelopes, lifespan brackets, the moving-window slope
//! energy A(t), and Besov / Sobolev / W^{1,p} norms.

pub mod besov;
pub mod characteristics;
pub mod envelope;
pub mod error;
pub mod grid;
pub mod initial_data;
pub mod nonlocal;
pub mod solver;

pub use error::{CoreError, Result};
pub use grid::{Field, Grid};
pub use initial_data::{PeakonPairParams, Regime, Side};
pub use nonlocal::{NonlocalEngine, Strategy};
