//! Spectral Poisson solver acting on hierarchical Tucker leaf frames.
//!
//! The charge density is obtained by contracting the velocity modes of the
//! distribution, transformed mode-wise with batched FFTs on the leaf frames,
//! divided by `|k|²` through cross approximation and differentiated spectrally.

use std::f64::consts::PI;
use nalgebra::DMatrix;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::advect::PhaseSpaceGrid;
use crate::cross::{htaca_with, AcaParams, EntryAccessor, HtacaOptions, HtacaStats};
use crate::error::{Result, SlarError};
use crate::ht::{HtTensor, RankBounds};
use crate::scalar::C64;

/// Number of dominant frequency rows per mode used to seed the pivot search.
const POOL_ROWS: usize = 8;
/// Upper bound on the size of the seeded candidate pool.
const POOL_CAP: usize = 512;

/// Ordering of the spatial and velocity modes in the distribution tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeOrdering {
    /// `x_1, ..., x_dx, v_1, ..., v_dv`.
    Grouped,
    /// `x_1, v_1, x_2, v_2, ...`.
    Interleaved,
}

/// Which tensor modes are spatial and which are velocity modes.
/// `velocity[j]` is the velocity conjugate to `spatial[j]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseLayout {
    pub spatial: Vec<usize>,
    pub velocity: Vec<usize>,
}

impl PhaseLayout {
    pub fn new(spatial: Vec<usize>, velocity: Vec<usize>) -> Result<Self> {
        let d = spatial.len() + velocity.len();
        let mut seen = vec![false; d];
        for &m in spatial.iter().chain(&velocity) {
            if m >= d || seen[m] {
                return Err(SlarError::Config(format!("modes {spatial:?} / {velocity:?} do not partition 0..{d}")));
            }
            seen[m] = true;
        }
        if spatial.is_empty() || spatial.windows(2).any(|w| w[0] > w[1]) {
            return Err(SlarError::Config("spatial modes must be non-empty and increasing".into()));
        }
        if velocity.len() != spatial.len() {
            return Err(SlarError::Config("every spatial mode needs a velocity mode".into()));
        }
        Ok(PhaseLayout { spatial, velocity })
    }

    pub fn with_ordering(d_x: usize, ordering: ModeOrdering) -> Result<Self> {
        match ordering {
            ModeOrdering::Grouped => Self::new((0..d_x).collect(), (d_x..2 * d_x).collect()),
            ModeOrdering::Interleaved => Self::new((0..d_x).map(|j| 2 * j).collect(), (0..d_x).map(|j| 2 * j + 1).collect()),
        }
    }

    pub fn d_x(&self) -> usize {
        self.spatial.len()
    }

    pub fn order(&self) -> usize {
        self.spatial.len() + self.velocity.len()
    }
}

/// Discrete wavenumbers `k = 2π m / L`, `m = 0, 1, ..., N/2 - 1, -N/2, ..., -1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGrid {
    lengths: Vec<f64>,
    wavenumbers: Vec<Vec<f64>>,
}

impl SpectralGrid {
    pub fn new(lengths: &[f64], counts: &[usize]) -> Result<Self> {
        if lengths.len() != counts.len() || lengths.iter().any(|&l| !(l > 0.0)) || counts.contains(&0) {
            return Err(SlarError::Config("invalid spectral grid".into()));
        }
        let wavenumbers = lengths
            .iter()
            .zip(counts)
            .map(|(&l, &n)| {
                (0..n)
                    .map(|i| {
                        let m = if i < n.div_ceil(2) { i as f64 } else { i as f64 - n as f64 };
                        2.0 * PI * m / l
                    })
                    .collect()
            })
            .collect();
        Ok(SpectralGrid { lengths: lengths.to_vec(), wavenumbers })
    }

    /// Spectral grid of a spatial grid (all modes periodic).
    pub fn from_grid(grid: &PhaseSpaceGrid) -> Result<Self> {
        let lengths: Vec<f64> = grid.axes().iter().map(|a| a.length()).collect();
        Self::new(&lengths, &grid.shape())
    }

    pub fn order(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn wavenumbers(&self, mode: usize) -> &[f64] {
        &self.wavenumbers[mode]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.wavenumbers.iter().map(Vec::len).collect()
    }

    pub fn k_squared(&self, idx: &[usize]) -> f64 {
        idx.iter().enumerate().map(|(m, &i)| self.wavenumbers[m][i].powi(2)).sum()
    }
}

/// Charge density `ρ = ρ₀ - ∫ f dv` on the spatial modes.
#[derive(Clone, Debug)]
pub struct Density {
    pub rho: HtTensor<f64>,
    /// Neutralizing background: the spatial mean of `∫ f dv`.
    pub rho0: f64,
}

/// Midpoint quadrature over the velocity modes followed by neutralization.
pub fn compute_density(f: &HtTensor<f64>, grid: &PhaseSpaceGrid, layout: &PhaseLayout) -> Result<Density> {
    if f.shape() != grid.shape().as_slice() || layout.order() != f.order() {
        return Err(SlarError::ShapeMismatch("distribution, grid and layout disagree".into()));
    }
    let mut charge = f.clone();
    for &m in &layout.velocity {
        let axis = grid.axis(m);
        charge = charge.contract_mode(m, &vec![axis.dx(); axis.n])?;
    }
    let charge = charge.squeeze(&layout.velocity)?;
    let spatial_shape = charge.shape().to_vec();
    let means: Vec<Vec<f64>> = spatial_shape.iter().map(|&n| vec![1.0 / n as f64; n]).collect();
    let rho0 = charge.contract_all(&means)?;
    let ones: Vec<Vec<f64>> = spatial_shape.iter().map(|&n| vec![1.0; n]).collect();
    let background = HtTensor::rank_one(charge.tree_arc().clone(), &ones)?.scale(rho0);
    let rho = background.sub(&charge)?;
    let scale = charge.norm().max(background.norm());
    let rho = rho.truncate(1e-14 * scale, &RankBounds::unbounded());
    Ok(Density { rho, rho0 })
}

/// Column-wise DFT of every leaf frame: forward unnormalized, inverse scaled by `1/N`.
pub fn dft_leaves(t: &HtTensor<C64>, inverse: bool) -> Result<HtTensor<C64>> {
    let mut planner = FftPlanner::<f64>::new();
    let mut out = t.clone();
    for mode in 0..t.order() {
        let n = t.shape()[mode];
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let scale = if inverse { 1.0 / n as f64 } else { 1.0 };
        out = out.map_leaf(mode, |u| {
            let mut data = u.as_slice().to_vec();
            // Frames are column-major, so every column is a contiguous chunk of length n.
            fft.process(&mut data);
            if inverse {
                data.iter_mut().for_each(|v| *v *= scale);
            }
            DMatrix::from_vec(n, u.ncols(), data)
        })?;
    }
    Ok(out)
}

/// `φ̂ = ρ̂ / |k|²` with `φ̂ = 0` at the zero frequency, evaluated entrywise.
pub struct PotentialAccessor<'a> {
    rho_hat: &'a HtTensor<C64>,
    spectral: &'a SpectralGrid,
}

impl<'a> PotentialAccessor<'a> {
    pub fn new(rho_hat: &'a HtTensor<C64>, spectral: &'a SpectralGrid) -> Result<Self> {
        if rho_hat.shape() != spectral.shape().as_slice() {
            return Err(SlarError::ShapeMismatch("density and spectral grid disagree".into()));
        }
        Ok(PotentialAccessor { rho_hat, spectral })
    }
}

impl EntryAccessor<C64> for PotentialAccessor<'_> {
    fn shape(&self) -> &[usize] {
        self.rho_hat.shape()
    }

    fn eval(&self, idx: &[usize]) -> C64 {
        let k2 = self.spectral.k_squared(idx);
        if k2 == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let mut scratch = self.rho_hat.new_scratch();
        self.rho_hat.entry_with(idx, &mut scratch) / k2
    }
}

/// Fields of one Poisson solve.
#[derive(Clone, Debug)]
pub struct FieldSet {
    pub rho: HtTensor<C64>,
    pub phi_hat: HtTensor<C64>,
    /// Electric field components in physical space, one per spatial mode.
    pub e: Vec<HtTensor<C64>>,
    pub stats: Option<HtacaStats>,
}

impl FieldSet {
    /// `½ Σ_μ ‖E_μ‖² ΔV` with `ΔV` the spatial cell volume.
    pub fn electric_energy(&self, cell_volume: f64) -> f64 {
        0.5 * self.e.iter().map(|e| e.norm().powi(2)).sum::<f64>() * cell_volume
    }

    /// Root-mean-square magnitude `‖E_μ‖ / sqrt(Π N)` per component.
    pub fn rms(&self) -> Vec<f64> {
        self.e
            .iter()
            .map(|e| e.norm() / (e.shape().iter().product::<usize>() as f64).sqrt())
            .collect()
    }
}

/// Multi-indices combining the dominant rows of every leaf frame of `t`.
fn leverage_pool(t: &HtTensor<C64>) -> Vec<Vec<usize>> {
    let mut per_mode = Vec::new();
    for mode in 0..t.order() {
        let u = t.frame(t.tree().leaf_of_mode(mode));
        let mut norms: Vec<(usize, f64)> = (0..u.nrows()).map(|i| (i, u.row(i).norm_squared())).collect();
        let top = norms.iter().map(|p| p.1).fold(0.0, f64::max);
        norms.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let rows: Vec<usize> = norms.iter().take(POOL_ROWS).filter(|p| p.1 > 1e-28 * top && p.1 > 0.0).map(|p| p.0).collect();
        per_mode.push(rows);
    }
    let mut pool: Vec<Vec<usize>> = vec![Vec::new()];
    for rows in &per_mode {
        pool = pool.iter().flat_map(|p| rows.iter().map(move |&i| [p.as_slice(), &[i]].concat())).collect();
        pool.truncate(POOL_CAP);
    }
    pool
}

/// Solves `-Δφ = ρ` and returns `E = -∇φ` as spectral derivatives of the
/// compressed potential. `tol` is the relative cross approximation tolerance.
pub fn solve_poisson(rho: &HtTensor<C64>, spectral: &SpectralGrid, tol: f64, params: &AcaParams) -> Result<FieldSet> {
    let rho_hat = dft_leaves(rho, false)?;
    let (phi_hat, stats) = if rho.order() == 1 {
        let k = spectral.wavenumbers(0);
        let phi = rho_hat.map_leaf(0, |u| {
            DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| if k[i] == 0.0 { C64::new(0.0, 0.0) } else { u[(i, j)] / (k[i] * k[i]) })
        })?;
        (phi, None)
    } else {
        let acc = PotentialAccessor::new(&rho_hat, spectral)?;
        let params = AcaParams { eps_base: tol, ..params.clone() };
        let options = HtacaOptions { candidate_pool: leverage_pool(&rho_hat), ..Default::default() };
        let out = htaca_with(&acc, rho.tree_arc(), &params, &options)?;
        (enforce_gauge(out.tensor)?, Some(out.stats))
    };
    if !phi_hat.is_finite() {
        return Err(SlarError::NonFinite("potential".into()));
    }
    let mut e = Vec::with_capacity(rho.order());
    for mode in 0..rho.order() {
        let k = spectral.wavenumbers(mode);
        let e_hat = phi_hat.map_leaf(mode, |u| DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] * C64::new(0.0, -k[i])))?;
        e.push(dft_leaves(&e_hat, true)?);
    }
    Ok(FieldSet { rho: rho.clone(), phi_hat, e, stats })
}

/// Subtracts the zero-frequency entry so that the gauge holds exactly.
fn enforce_gauge(phi_hat: HtTensor<C64>) -> Result<HtTensor<C64>> {
    let zero = vec![0; phi_hat.order()];
    let c = phi_hat.entry(&zero)?;
    if c == C64::new(0.0, 0.0) {
        return Ok(phi_hat);
    }
    let units: Vec<Vec<C64>> = phi_hat
        .shape()
        .iter()
        .map(|&n| (0..n).map(|i| C64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect();
    let spike = HtTensor::rank_one(phi_hat.tree_arc().clone(), &units)?.scale(c);
    phi_hat.sub(&spike)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::advect::Axis;
    use crate::ht::testing::*;
    use crate::tree::DimensionTree;
    use std::sync::Arc;

    fn spatial_grid(d: usize, l: f64, n: usize) -> PhaseSpaceGrid {
        PhaseSpaceGrid::new((0..d).map(|_| Axis::periodic(0.0, l, n).unwrap()).collect()).unwrap()
    }

    #[test]
    fn wavenumbers_include_signed_nyquist() {
        let s = SpectralGrid::new(&[2.0 * PI], &[6]).unwrap();
        assert_eq!(s.wavenumbers(0), &[0.0, 1.0, 2.0, -3.0, -2.0, -1.0]);
        let s = SpectralGrid::new(&[4.0 * PI], &[5]).unwrap();
        assert_eq!(s.wavenumbers(0), &[0.0, 0.5, 1.0, -1.0, -0.5]);
    }

    #[test]
    fn layouts() {
        let g = PhaseLayout::with_ordering(2, ModeOrdering::Grouped).unwrap();
        assert_eq!((g.spatial.as_slice(), g.velocity.as_slice()), (&[0, 1][..], &[2, 3][..]));
        let i = PhaseLayout::with_ordering(3, ModeOrdering::Interleaved).unwrap();
        assert_eq!((i.spatial.as_slice(), i.velocity.as_slice()), (&[0, 2, 4][..], &[1, 3, 5][..]));
        assert!(PhaseLayout::new(vec![0, 1], vec![1, 2]).is_err());
    }

    #[test]
    fn dft_round_trip_and_cosine() {
        let mut rng = rng(121);
        let x: HtTensor<C64> = random_ht(&balanced(3), &[8, 6, 5], 3, &mut rng);
        let back = dft_leaves(&dft_leaves(&x, false).unwrap(), true).unwrap();
        assert!(back.full().unwrap().distance(&x.full().unwrap()) < 1e-12);

        let n = 16;
        let tree = Arc::new(DimensionTree::balanced(1));
        let v: Vec<C64> = (0..n).map(|i| C64::new((2.0 * PI * 3.0 * i as f64 / n as f64).cos(), 0.0)).collect();
        let t = HtTensor::rank_one(tree, &[v]).unwrap();
        let hat = dft_leaves(&t, false).unwrap().full().unwrap();
        for i in 0..n {
            let expect = if i == 3 || i == n - 3 { n as f64 / 2.0 } else { 0.0 };
            assert!((hat.data[i] - C64::new(expect, 0.0)).norm() < 1e-12);
        }
        let z = HtTensor::<C64>::zeros(Arc::new(balanced(2)), &[4, 4]).unwrap();
        assert_eq!(dft_leaves(&z, false).unwrap().full().unwrap().max_abs(), 0.0);
    }

    #[test]
    fn density_of_separable_distribution() {
        let grid = PhaseSpaceGrid::new(vec![
            Axis::periodic(0.0, 2.0 * PI, 8).unwrap(),
            Axis::truncated(-5.0, 5.0, 20).unwrap(),
        ])
        .unwrap();
        let layout = PhaseLayout::with_ordering(1, ModeOrdering::Grouped).unwrap();
        let g: Vec<f64> = grid.axis(0).centers().iter().map(|x| 1.0 + 0.3 * x.sin()).collect();
        let m: Vec<f64> = grid.axis(1).centers().iter().map(|v| (-v * v / 2.0).exp()).collect();
        let f = HtTensor::rank_one(Arc::new(DimensionTree::balanced(2)), &[g.clone(), m.clone()]).unwrap();
        let d = compute_density(&f, &grid, &layout).unwrap();
        let mass: f64 = m.iter().sum::<f64>() * grid.dx(1);
        let mean = g.iter().sum::<f64>() / 8.0 * mass;
        assert!((d.rho0 - mean).abs() < 1e-12);
        for i in 0..8 {
            assert!((d.rho.entry(&[i]).unwrap() - (d.rho0 - g[i] * mass)).abs() < 1e-12);
        }
        let zero = HtTensor::<f64>::zeros(f.tree_arc().clone(), f.shape()).unwrap();
        let d = compute_density(&zero, &grid, &layout).unwrap();
        assert_eq!(d.rho0, 0.0);
        assert_eq!(d.rho.full().unwrap().max_abs(), 0.0);
    }

    #[test]
    fn single_mode_poisson_1d() {
        let (alpha, k, n) = (0.5, 0.5, 64);
        let grid = spatial_grid(1, 4.0 * PI, n);
        let spectral = SpectralGrid::from_grid(&grid).unwrap();
        let xs = grid.axis(0).centers();
        let rho: Vec<C64> = xs.iter().map(|x| C64::new(alpha * (k * x).cos(), 0.0)).collect();
        let rho = HtTensor::rank_one(Arc::new(DimensionTree::balanced(1)), &[rho]).unwrap();
        let fs = solve_poisson(&rho, &spectral, 1e-6, &AcaParams::default()).unwrap();
        assert_eq!(fs.phi_hat.entry(&[0]).unwrap(), C64::new(0.0, 0.0));
        let e = fs.e[0].full().unwrap();
        let err = xs.iter().zip(&e.data).map(|(x, v)| (v - C64::new(alpha / k * (k * x).sin(), 0.0)).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-10, "error {err}");
    }

    #[test]
    fn separable_poisson_2d() {
        let (alpha, k, n) = (0.5, 0.5, 32);
        let grid = spatial_grid(2, 4.0 * PI, n);
        let spectral = SpectralGrid::from_grid(&grid).unwrap();
        let xs = grid.axis(0).centers();
        let c: Vec<C64> = xs.iter().map(|x| C64::new(alpha * (k * x).cos(), 0.0)).collect();
        let one = vec![C64::new(1.0, 0.0); n];
        let tree = Arc::new(DimensionTree::balanced(2));
        let rho = HtTensor::rank_one(tree.clone(), &[c.clone(), one.clone()])
            .unwrap()
            .add(&HtTensor::rank_one(tree.clone(), &[one, c]).unwrap())
            .unwrap();
        let fs = solve_poisson(&rho, &spectral, 1e-6, &AcaParams::default()).unwrap();
        assert_eq!(fs.phi_hat.entry(&[0, 0]).unwrap(), C64::new(0.0, 0.0));
        for (mu, e) in fs.e.iter().enumerate() {
            let full = e.full().unwrap();
            for i in 0..n {
                for j in 0..n {
                    let x = xs[if mu == 0 { i } else { j }];
                    let v = full.get(&[i, j]);
                    assert!((v.re - alpha / k * (k * x).sin()).abs() < 1e-10);
                    assert!(v.im.abs() < 1e-10);
                }
            }
        }
        let zero = HtTensor::<C64>::zeros(tree, &[n, n]).unwrap();
        let fs = solve_poisson(&zero, &spectral, 1e-6, &AcaParams::default()).unwrap();
        assert!(fs.e.iter().all(|e| e.full().unwrap().max_abs() == 0.0));
    }

    #[test]
    fn gauss_law_on_band_limited_density() {
        let n = 16;
        let l = 2.0 * PI;
        let grid = spatial_grid(2, l, n);
        let spectral = SpectralGrid::from_grid(&grid).unwrap();
        let xs = grid.axis(0).centers();
        let mut rng = rng(122);
        let tree = Arc::new(DimensionTree::balanced(2));
        let mut rho = HtTensor::<C64>::zeros(tree.clone(), &[n, n]).unwrap();
        for (a, b) in [(1.0, 2.0), (3.0, 1.0), (2.0, 2.0)] {
            let (p, q): (f64, f64) = (rand::Rng::random_range(&mut rng, 0.0..1.0), rand::Rng::random_range(&mut rng, 0.0..1.0));
            let u: Vec<C64> = xs.iter().map(|x| C64::new((a * x + p).cos(), 0.0)).collect();
            let v: Vec<C64> = xs.iter().map(|x| C64::new((b * x + q).sin(), 0.0)).collect();
            rho = rho.add(&HtTensor::rank_one(tree.clone(), &[u, v]).unwrap()).unwrap();
        }
        let fs = solve_poisson(&rho, &spectral, 1e-12, &AcaParams::default()).unwrap();
        let mut div = HtTensor::<C64>::zeros(tree.clone(), &[n, n]).unwrap();
        for (mu, e) in fs.e.iter().enumerate() {
            let k = spectral.wavenumbers(mu).to_vec();
            let d = dft_leaves(e, false)
                .unwrap()
                .map_leaf(mu, |u| DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] * C64::new(0.0, k[i])))
                .unwrap();
            div = div.add(&dft_leaves(&d, true).unwrap()).unwrap();
        }
        let err = div.full().unwrap().distance(&rho.full().unwrap());
        assert!(err < 1e-10 * rho.norm().max(1.0), "error {err}");
    }

    #[test]
    fn sparse_spectrum_is_found() {
        let n = 32;
        let grid = spatial_grid(3, 4.0 * PI, n);
        let spectral = SpectralGrid::from_grid(&grid).unwrap();
        let xs = grid.axis(0).centers();
        let c: Vec<C64> = xs.iter().map(|x| C64::new(0.01 * (0.5 * x).cos(), 0.0)).collect();
        let one = vec![C64::new(1.0, 0.0); n];
        let tree = Arc::new(DimensionTree::balanced(3));
        let mut rho = HtTensor::<C64>::zeros(tree.clone(), &[n; 3]).unwrap();
        for mu in 0..3 {
            let mut f = vec![one.clone(); 3];
            f[mu] = c.clone();
            rho = rho.add(&HtTensor::rank_one(tree.clone(), &f).unwrap()).unwrap();
        }
        let fs = solve_poisson(&rho, &spectral, 1e-6, &AcaParams::default()).unwrap();
        let e0 = fs.e[0].entry(&[3, 7, 11]).unwrap();
        assert!((e0.re - 0.02 * (0.5 * xs[3]).sin()).abs() < 1e-9);
    }
}
