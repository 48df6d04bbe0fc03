//! Semi-Lagrangian adaptive-rank (SLAR) solver for Vlasov–Poisson systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`tree`], [`index`] and [`ht`]: dimension trees and hierarchical Tucker tensors.
//! * [`cross`]: matrix ACA and hierarchical Tucker cross approximation (HTACA)
//!   from entry accessors.
//! * [`advect`]: third-order semi-Lagrangian finite-difference transport exposed as an accessor.
//! * [`field`]: spectral Poisson solver acting on HT leaf frames.
//! * [`vp`]: SLAR steps, the CF3 exponential integrator and diagnostics.
//! * [`runner`]: benchmark configurations, initial conditions and the time loop.

pub mod advect;
pub mod cross;
pub mod error;
pub mod field;
pub mod ht;
pub mod index;
pub mod linalg;
pub mod scalar;
pub mod tree;
pub mod runner;
pub mod vp;

pub use cross::{htaca, AcaParams, EntryAccessor};
pub use error::{Result, SlarError};
pub use ht::{DenseTensor, HtTensor, RankBounds};
pub use scalar::{Scalar, C64};
pub use tree::{DimensionTree, TreeLayout, TreeStrategy};
