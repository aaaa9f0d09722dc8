//! Discrete Caputo fractional derivatives on nonuniform time meshes.
//!
//! The crate builds the discrete convolution kernels `A^(n)_{n-k}` of the
//! L1, fast L1 (sum-of-exponentials), Alikhanov (L2-1σ) and BDF2-like
//! formulas, their complementary kernels `P^(n)_j`, and evaluates the
//! discrete fractional Grönwall bounds that those kernels admit. A
//! time-stepping solver for linear reaction-subdiffusion (scalar single-mode
//! reduction and 1D finite differences) closes the loop.
//!
//! Index conventions follow the usual notation: mesh nodes are
//! `t_0 = 0 < t_1 < ... < t_N = T`, rows are numbered `n = 1..=N`, and a
//! kernel entry is addressed by its lag `j = n - k` in `0..n`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod complementary;
pub mod error;
pub mod gronwall;
pub mod kernels;
pub mod mesh;
pub mod quad;
pub mod soe;
pub mod solver;
pub mod specialfn;

pub use complementary::ComplementaryTable;
pub use error::{Error, Result};
pub use kernels::{AssumptionReport, KernelTable, Scheme};
pub use mesh::{MeshReport, TimeMesh};
pub use soe::SoeApprox;
