//! Column-major linearization of multi-indices.
//!
//! All indices are 0-based: the first mode varies fastest, so a multi-index
//! `i` over modes with sizes `n` maps to `sum_l i_l * prod_{m<l} n_m`.

use crate::error::{Result, SlarError};

/// Linear index of `idx` within `shape`, first mode fastest.
pub fn linearize(shape: &[usize], idx: &[usize]) -> Result<usize> {
    if shape.len() != idx.len() {
        return Err(SlarError::ShapeMismatch(format!(
            "index has {} modes, shape has {}",
            idx.len(),
            shape.len()
        )));
    }
    let mut lin = 0usize;
    let mut stride = 1usize;
    for (mode, (&i, &n)) in idx.iter().zip(shape).enumerate() {
        if i >= n {
            return Err(SlarError::OutOfBounds { mode, index: i, size: n });
        }
        lin += i * stride;
        stride *= n;
    }
    Ok(lin)
}

/// Inverse of [`linearize`].
pub fn delinearize(shape: &[usize], lin: usize) -> Result<Vec<usize>> {
    let total: usize = shape.iter().product();
    if lin >= total {
        return Err(SlarError::OutOfBounds { mode: 0, index: lin, size: total });
    }
    let mut rest = lin;
    Ok(shape
        .iter()
        .map(|&n| {
            let i = rest % n;
            rest /= n;
            i
        })
        .collect())
}

/// Same as [`delinearize`] but writes into `out` and skips the range check.
pub fn delinearize_into(shape: &[usize], mut lin: usize, out: &mut [usize]) {
    for (o, &n) in out.iter_mut().zip(shape) {
        *o = lin % n;
        lin /= n;
    }
}

/// Number of entries, saturating instead of overflowing.
pub fn numel(shape: &[usize]) -> u128 {
    shape.iter().map(|&n| n as u128).product()
}

/// Validates `idx` against `shape`.
pub fn check_index(shape: &[usize], idx: &[usize]) -> Result<()> {
    if shape.len() != idx.len() {
        return Err(SlarError::ShapeMismatch(format!(
            "index has {} modes, shape has {}",
            idx.len(),
            shape.len()
        )));
    }
    for (mode, (&i, &n)) in idx.iter().zip(shape).enumerate() {
        if i >= n {
            return Err(SlarError::OutOfBounds { mode, index: i, size: n });
        }
    }
    Ok(())
}
