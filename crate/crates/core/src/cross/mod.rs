//! Cross approximation from entry accessors.

mod accessor;
mod htaca;
mod matrix;
mod pivot;

pub use accessor::{eval_batch, CountingAccessor, EntryAccessor, FnAccessor, Restricted, Residual};
pub use htaca::{htaca, htaca_with, pivot_tolerance, AcaParams, HtacaOptions, HtacaOutput, HtacaStats};
pub use matrix::{matrix_aca, MatrixAca};
pub use pivot::{recursive_pivot_search, sampling_params, IndexSets, PivotResult};

/// Stabilized reciprocal `1 / (p + sign(p) * 1e-15)` with `sign(0) = 1`.
pub fn safeguarded_reciprocal<T: crate::Scalar>(p: T) -> T {
    T::one() / (p + p.sign() * T::from_real(1e-15))
}
