use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::HtTensor;
use crate::linalg::{frobenius, left_svd, tail_rank, thin_qr};
use crate::scalar::Scalar;

/// Per-node rank bounds applied during truncation, split by node kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankBounds {
    pub leaf_min: usize,
    pub leaf_max: usize,
    pub interior_min: usize,
    pub interior_max: usize,
}

impl RankBounds {
    pub fn uniform(min: usize, max: usize) -> Self {
        RankBounds { leaf_min: min, leaf_max: max, interior_min: min, interior_max: max }
    }

    pub fn unbounded() -> Self {
        Self::uniform(1, usize::MAX)
    }

    pub fn with_leaf_min(mut self, min: usize) -> Self {
        self.leaf_min = min;
        self.leaf_max = self.leaf_max.max(min);
        self
    }

    pub fn for_node(&self, is_leaf: bool) -> (usize, usize) {
        if is_leaf {
            (self.leaf_min, self.leaf_max)
        } else {
            (self.interior_min, self.interior_max)
        }
    }
}

impl Default for RankBounds {
    fn default() -> Self {
        Self::unbounded()
    }
}

impl<T: Scalar> HtTensor<T> {
    /// Equivalent representation with orthonormal columns in every frame below the root.
    pub fn orthogonalize(&self) -> Self {
        let n = self.frames.len();
        let mut frames = self.frames.clone();
        let mut rfac: Vec<Option<DMatrix<T>>> = vec![None; n];
        for id in (0..n).rev() {
            if let Some((l, r)) = self.tree.children(id) {
                let rl = rfac[l].take().expect("child processed");
                let rr = rfac[r].take().expect("child processed");
                frames[id] = apply_child_factors(&frames[id], &rl, &rr, self.rank(l), self.rank(r));
            }
            if id != 0 {
                let (q, r) = thin_qr(&frames[id]);
                frames[id] = q;
                rfac[id] = Some(r);
            }
        }
        self.rebuild(frames)
    }

    /// Frobenius norm, computed from the orthogonalized root transfer.
    pub fn norm(&self) -> f64 {
        frobenius(&self.orthogonalize().frames[0])
    }

    /// Hierarchical SVD truncation to absolute Frobenius tolerance `abs_tol`.
    ///
    /// Each node may discard singular values whose tail is below
    /// `abs_tol / sqrt(2d - 3)`; the resulting rank is then clamped to `bounds`
    /// and to the rank available at that node.
    pub fn truncate(&self, abs_tol: f64, bounds: &RankBounds) -> Self {
        self.orthogonalize().truncate_orthogonal(|_| abs_tol, bounds)
    }

    /// Truncation with tolerance `rel_tol * norm`; also returns the norm before truncation.
    pub fn truncate_relative(&self, rel_tol: f64, bounds: &RankBounds) -> (Self, f64) {
        let orth = self.orthogonalize();
        let norm = frobenius(&orth.frames[0]);
        (orth.truncate_orthogonal(|_| rel_tol * norm, bounds), norm)
    }

    fn truncate_orthogonal(&self, tol: impl Fn(f64) -> f64, bounds: &RankBounds) -> Self {
        let n = self.frames.len();
        if n == 1 {
            return self.clone();
        }
        let d = self.order();
        let node_tol = tol(0.0) / ((2 * d).saturating_sub(3).max(1) as f64).sqrt();

        // Scaled left singular vectors of each node's reduced matricization.
        let mut sqrt_gram: Vec<Option<DMatrix<T>>> = vec![None; n];
        let mut selected: Vec<Option<DMatrix<T>>> = vec![None; n];
        for id in 0..n {
            let Some((l, r)) = self.tree.children(id) else { continue };
            let (rl, rr) = (self.rank(l), self.rank(r));
            let b = &self.frames[id];
            let c = match &sqrt_gram[id] {
                None => b.clone(),
                Some(a) => b * a,
            };
            let k = c.ncols();
            // Left child: rows a, columns (b, j).
            let al = DMatrix::from_column_slice(rl, rr * k, c.as_slice());
            // Right child: rows b, columns (a, j).
            let ar = DMatrix::from_fn(rr, rl * k, |bi, col| {
                let (a, j) = (col % rl, col / rl);
                c[(a + bi * rl, j)]
            });
            for (child, a) in [(l, al), (r, ar)] {
                let (u, s) = left_svd(&a);
                let (lo, hi) = bounds.for_node(self.tree.is_leaf(child));
                let keep = tail_rank(&s, node_tol).max(lo).min(hi).min(u.ncols()).max(1);
                let sel = u.columns(0, keep).into_owned();
                if !self.tree.is_leaf(child) {
                    let scaled = DMatrix::from_fn(u.nrows(), s.len(), |i, j| u[(i, j)] * T::from_real(s[j]));
                    sqrt_gram[child] = Some(scaled);
                }
                selected[child] = Some(sel);
            }
        }

        let mut frames = Vec::with_capacity(n);
        for id in 0..n {
            let frame = &self.frames[id];
            let mut out = match self.tree.children(id) {
                None => frame.clone(),
                Some((l, r)) => {
                    let sl = selected[l].as_ref().unwrap().adjoint();
                    let sr = selected[r].as_ref().unwrap().adjoint();
                    apply_child_factors(frame, &sl, &sr, self.rank(l), self.rank(r))
                }
            };
            if id != 0 {
                out = out * selected[id].as_ref().unwrap();
            }
            frames.push(out);
        }
        self.rebuild(frames)
    }
}

/// `B'[a', b', c] = sum_{a,b} ml[a', a] mr[b', b] B[a + b*rl, c]`.
fn apply_child_factors<T: Scalar>(b: &DMatrix<T>, ml: &DMatrix<T>, mr: &DMatrix<T>, rl: usize, rr: usize) -> DMatrix<T> {
    let (kl, kr) = (ml.nrows(), mr.nrows());
    debug_assert_eq!(ml.ncols(), rl);
    debug_assert_eq!(mr.ncols(), rr);
    let mut out = DMatrix::zeros(kl * kr, b.ncols());
    for c in 0..b.ncols() {
        let mat = DMatrix::from_column_slice(rl, rr, b.column(c).as_slice());
        let res = ml * mat * mr.transpose();
        out.column_mut(c).copy_from_slice(res.as_slice());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;
    use crate::scalar::C64;
    use std::sync::Arc;

    #[test]
    fn norm_matches_dense() {
        let mut rng = rng(21);
        for d in 1..=5 {
            let tree = balanced(d);
            let x: HtTensor<C64> = random_ht(&tree, &vec![3; d], 3, &mut rng);
            let dense = x.full().unwrap().norm();
            assert!((x.norm() - dense).abs() <= 1e-10 * dense);
        }
        let z = HtTensor::<f64>::zeros(Arc::new(balanced(4)), &[3; 4]).unwrap();
        assert_eq!(z.norm(), 0.0);
    }

    #[test]
    fn unit_separable_norm() {
        let tree = Arc::new(balanced(4));
        let f = vec![vec![0.6, 0.8], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.8, -0.6]];
        let x = HtTensor::rank_one(tree, &f).unwrap();
        assert!((x.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonalize_preserves_entries() {
        let mut rng = rng(22);
        let tree = balanced(4);
        let x: HtTensor<C64> = random_ht(&tree, &[4, 3, 5, 2], 3, &mut rng);
        let o = x.orthogonalize();
        assert!(o.full().unwrap().distance(&x.full().unwrap()) < 1e-12 * x.norm());
        for id in 1..o.frames.len() {
            let f = o.frame(id);
            let eye = DMatrix::<C64>::identity(f.ncols(), f.ncols());
            assert!(frobenius(&(f.adjoint() * f - eye)) < 1e-12);
        }
    }

    #[test]
    fn lossless_truncation() {
        let mut rng = rng(23);
        let tree = balanced(4);
        let x: HtTensor<C64> = random_ht(&tree, &[5; 4], 3, &mut rng);
        let y = x.truncate(0.0, &RankBounds::unbounded());
        let fx = x.full().unwrap();
        assert!(y.full().unwrap().distance(&fx) <= 1e-12 * fx.norm());
        for id in 0..x.frames.len() {
            assert!(y.rank(id) <= x.rank(id));
        }
    }

    #[test]
    fn error_within_tolerance() {
        let mut rng = rng(24);
        let tree = balanced(4);
        for _ in 0..20 {
            let x: HtTensor<C64> = random_ht(&tree, &[6; 4], 4, &mut rng);
            let y: HtTensor<C64> = random_ht(&tree, &[6; 4], 4, &mut rng);
            let s = x.add(&y.scale(C64::new(1e-3, 0.0))).unwrap();
            let tol = 0.05 * s.norm();
            let t = s.truncate(tol, &RankBounds::unbounded());
            let err = t.full().unwrap().distance(&s.full().unwrap());
            assert!(err <= tol, "error {err} above {tol}");
            for id in 0..s.frames.len() {
                assert!(t.rank(id) <= s.rank(id));
            }
        }
    }

    #[test]
    fn rank_cap_of_one() {
        let mut rng = rng(25);
        let tree = balanced(5);
        let x: HtTensor<f64> = random_ht(&tree, &[4; 5], 3, &mut rng);
        let y = x.truncate(0.0, &RankBounds::uniform(1, 1));
        assert!(y.ranks().iter().all(|&r| r == 1));
    }

    #[test]
    fn leaf_floor_is_respected() {
        let tree = Arc::new(balanced(4));
        let f = vec![vec![1.0; 5]; 4];
        let x = HtTensor::rank_one(tree.clone(), &f).unwrap();
        let x = x.add(&x).unwrap().add(&x).unwrap();
        let y = x.truncate(1e-12, &RankBounds::uniform(1, 8).with_leaf_min(3));
        for leaf in tree.leaves() {
            assert_eq!(y.rank(leaf), 3);
        }
        assert_eq!(y.rank(1), 1);
    }
}
