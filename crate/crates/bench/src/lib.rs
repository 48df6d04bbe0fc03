//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slar_core::advect::{Axis, PhaseSpaceGrid};
use slar_core::{DimensionTree, HtTensor};

/// Random tensor with every mode of size `n` and every rank `r`.
pub fn random_ht(tree: &Arc<DimensionTree>, n: usize, r: usize, seed: u64) -> HtTensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = (0..tree.n_nodes())
        .map(|id| {
            let cols = if id == tree.root() { 1 } else { r };
            let rows = if tree.is_leaf(id) { n } else { r * r };
            DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
        })
        .collect();
    HtTensor::from_parts(tree.clone(), vec![n; tree.n_modes()], frames).unwrap()
}

/// Smooth rank-`r` tensor on `[-6, 6]^d`: a sum of separable Gaussians with
/// shifted centers, so truncation and cross approximation see decaying spectra.
pub fn gaussian_sum(tree: &Arc<DimensionTree>, grid: &PhaseSpaceGrid, r: usize) -> HtTensor<f64> {
    let d = tree.n_modes();
    let mut sum: Option<HtTensor<f64>> = None;
    for k in 0..r {
        let shift = k as f64 * 0.7 - 1.0;
        let factors: Vec<Vec<f64>> = (0..d)
            .map(|m| grid.axis(m).centers().iter().map(|x| (-(x - shift * (m as f64 + 1.0) / d as f64).powi(2) / 2.0).exp()).collect())
            .collect();
        let term = HtTensor::rank_one(tree.clone(), &factors).unwrap();
        sum = Some(match sum {
            Some(s) => s.add(&term).unwrap(),
            None => term,
        });
    }
    sum.unwrap()
}

/// `[-6, 6]^d` with `n` cells per mode.
pub fn box_grid(d: usize, n: usize) -> PhaseSpaceGrid {
    PhaseSpaceGrid::new(vec![Axis::truncated(-6.0, 6.0, n).unwrap(); d]).unwrap()
}
