use std::sync::Arc;

use nalgebra::DMatrix;

use super::{contract_transfer, HtTensor};
use crate::error::{Result, SlarError};
use crate::scalar::Scalar;
use crate::tree::{DimensionTree, TreeLayout};

/// Places `src` (an `(sl*sr) x c` transfer) into `dst` with child offsets and a column offset.
fn embed_transfer<T: Scalar>(
    dst: &mut DMatrix<T>,
    src: &DMatrix<T>,
    src_rl: usize,
    dst_rl: usize,
    off_l: usize,
    off_r: usize,
    col_off: usize,
    accumulate: bool,
) {
    let src_rr = src.nrows() / src_rl;
    for c in 0..src.ncols() {
        for b in 0..src_rr {
            for a in 0..src_rl {
                let v = src[(a + b * src_rl, c)];
                let row = (off_l + a) + (off_r + b) * dst_rl;
                if accumulate {
                    dst[(row, col_off + c)] += v;
                } else {
                    dst[(row, col_off + c)] = v;
                }
            }
        }
    }
}

enum Squeezed<T: Scalar> {
    Kept { layout: TreeLayout, frames: Vec<DMatrix<T>>, modes: Vec<usize> },
    Gone(Vec<T>),
}

impl<T: Scalar> HtTensor<T> {
    /// Exact sum; ranks add at every node except the root.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let tree = self.tree.clone();
        let mut frames = Vec::with_capacity(self.frames.len());
        for (id, node) in tree.nodes().iter().enumerate() {
            let (fa, fb) = (&self.frames[id], &other.frames[id]);
            let is_root = id == 0;
            let frame = match node.children {
                None if is_root => fa + fb,
                None => {
                    let mut m = DMatrix::zeros(fa.nrows(), fa.ncols() + fb.ncols());
                    m.columns_mut(0, fa.ncols()).copy_from(fa);
                    m.columns_mut(fa.ncols(), fb.ncols()).copy_from(fb);
                    m
                }
                Some((l, r)) => {
                    let (al, bl) = (self.rank(l), other.rank(l));
                    let (ar, br) = (self.rank(r), other.rank(r));
                    let rl = al + bl;
                    let cols = if is_root { 1 } else { fa.ncols() + fb.ncols() };
                    let mut m = DMatrix::zeros(rl * (ar + br), cols);
                    embed_transfer(&mut m, fa, al, rl, 0, 0, 0, false);
                    let col_off = if is_root { 0 } else { fa.ncols() };
                    embed_transfer(&mut m, fb, bl, rl, al, ar, col_off, true);
                    m
                }
            };
            frames.push(frame);
        }
        Self::from_parts(tree, self.shape.clone(), frames)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-T::one()))
    }

    /// Multiplies the root transfer tensor (or the single leaf) by `c`.
    pub fn scale(&self, c: T) -> Self {
        let mut frames = self.frames.clone();
        frames[0] *= c;
        self.rebuild(frames)
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        self.rebuild(self.frames.iter().map(|m| m.map(|v| v.conjugate())).collect())
    }

    /// Replaces the frame of `mode` by `m * U`; the mode size becomes `m.nrows()`.
    pub fn leaf_transform(&self, mode: usize, m: &DMatrix<T>) -> Result<Self> {
        let leaf = self.leaf_checked(mode)?;
        if m.ncols() != self.shape[mode] {
            return Err(SlarError::ShapeMismatch(format!(
                "matrix with {} columns applied to mode {mode} of size {}",
                m.ncols(),
                self.shape[mode]
            )));
        }
        let new_frame = m * &self.frames[leaf];
        let mut shape = self.shape.clone();
        shape[mode] = m.nrows();
        let mut frames = self.frames.clone();
        frames[leaf] = new_frame;
        Self::from_parts(self.tree.clone(), shape, frames)
    }

    /// Applies `f` to the frame of `mode`. The rank must be preserved; the row count may change.
    pub fn map_leaf(&self, mode: usize, f: impl FnOnce(&DMatrix<T>) -> DMatrix<T>) -> Result<Self> {
        let leaf = self.leaf_checked(mode)?;
        let new_frame = f(&self.frames[leaf]);
        if new_frame.ncols() != self.rank(leaf) {
            return Err(SlarError::ShapeMismatch(format!(
                "leaf map changed the rank of mode {mode} from {} to {}",
                self.rank(leaf),
                new_frame.ncols()
            )));
        }
        let mut shape = self.shape.clone();
        shape[mode] = new_frame.nrows();
        let mut frames = self.frames.clone();
        frames[leaf] = new_frame;
        Self::from_parts(self.tree.clone(), shape, frames)
    }

    /// Reverses the row order of the frame of `mode` (index reflection `i -> N-1-i`).
    pub fn reverse_leaf_rows(&self, mode: usize) -> Result<Self> {
        self.map_leaf(mode, |u| {
            let n = u.nrows();
            DMatrix::from_fn(n, u.ncols(), |i, j| u[(n - 1 - i, j)])
        })
    }

    /// Rewrites the frame of `mode` as `u_new * m` (so `U = u_new * m` must hold),
    /// moving `m` into the parent transfer. Changes the representation, not the tensor.
    pub fn refactor_leaf(&self, mode: usize, u_new: DMatrix<T>, m: &DMatrix<T>) -> Result<Self> {
        let leaf = self.leaf_checked(mode)?;
        if u_new.nrows() != self.shape[mode] || m.nrows() != u_new.ncols() || m.ncols() != self.rank(leaf) {
            return Err(SlarError::ShapeMismatch("inconsistent leaf refactorization".into()));
        }
        let mut frames = self.frames.clone();
        match self.tree.node(leaf).parent {
            None => frames[leaf] = &u_new * m,
            Some(parent) => {
                let (l, r) = self.tree.children(parent).unwrap();
                let b = &self.frames[parent];
                let (rl, rr) = (self.rank(l), self.rank(r));
                let mut out;
                if leaf == l {
                    let k = m.nrows();
                    out = DMatrix::zeros(k * rr, b.ncols());
                    for c in 0..b.ncols() {
                        for bi in 0..rr {
                            let seg = b.column(c).rows(bi * rl, rl).into_owned();
                            let new_seg = m * seg;
                            out.column_mut(c).rows_mut(bi * k, k).copy_from(&new_seg);
                        }
                    }
                } else {
                    let k = m.nrows();
                    out = DMatrix::zeros(rl * k, b.ncols());
                    for c in 0..b.ncols() {
                        let mat = DMatrix::from_column_slice(rl, rr, b.column(c).as_slice());
                        let new_mat = mat * m.transpose();
                        out.column_mut(c).copy_from_slice(new_mat.as_slice());
                    }
                }
                frames[parent] = out;
                frames[leaf] = u_new;
            }
        }
        Self::from_parts(self.tree.clone(), self.shape.clone(), frames)
    }

    /// Weighted sum over mode `mode`; the mode keeps size 1.
    pub fn contract_mode(&self, mode: usize, weights: &[T]) -> Result<Self> {
        if mode >= self.order() || weights.len() != self.shape[mode] {
            return Err(SlarError::ShapeMismatch(format!(
                "{} weights for mode {mode} of a tensor with shape {:?}",
                weights.len(),
                self.shape
            )));
        }
        self.leaf_transform(mode, &DMatrix::from_row_slice(1, weights.len(), weights))
    }

    /// Full contraction `sum_i prod_mu w_mu[i_mu] X[i]`.
    pub fn contract_all(&self, weights: &[Vec<T>]) -> Result<T> {
        if weights.len() != self.order() || weights.iter().zip(&self.shape).any(|(w, &n)| w.len() != n) {
            return Err(SlarError::ShapeMismatch("weights do not match the tensor shape".into()));
        }
        let mut vecs: Vec<Vec<T>> = vec![Vec::new(); self.frames.len()];
        for id in (0..self.frames.len()).rev() {
            let frame = &self.frames[id];
            let node = self.tree.node(id);
            vecs[id] = match node.children {
                None => {
                    let w = &weights[node.modes.start];
                    (0..frame.ncols())
                        .map(|c| frame.column(c).iter().zip(w).fold(T::zero(), |acc, (u, w)| acc + *u * *w))
                        .collect()
                }
                Some((l, r)) => {
                    let mut out = vec![T::zero(); frame.ncols()];
                    contract_transfer(frame, &vecs[l], &vecs[r], &mut out);
                    out
                }
            };
        }
        Ok(vecs[0][0])
    }

    /// Removes size-1 modes, absorbing their frames into the neighbouring transfer tensors.
    pub fn squeeze(&self, modes: &[usize]) -> Result<Self> {
        for &m in modes {
            if m >= self.order() || self.shape[m] != 1 {
                return Err(SlarError::ShapeMismatch(format!(
                    "cannot squeeze mode {m} of a tensor with shape {:?}",
                    self.shape
                )));
            }
        }
        if modes.is_empty() {
            return Ok(self.clone());
        }
        match self.squeeze_node(0, modes) {
            Squeezed::Gone(_) => Err(SlarError::ShapeMismatch("cannot squeeze every mode".into())),
            Squeezed::Kept { layout, frames, modes: kept } => {
                let tree = Arc::new(DimensionTree::from_layout(&layout));
                let shape = kept.iter().map(|&m| self.shape[m]).collect();
                Self::from_parts(tree, shape, frames)
            }
        }
    }

    fn squeeze_node(&self, id: usize, drop: &[usize]) -> Squeezed<T> {
        let node = self.tree.node(id);
        match node.children {
            None => {
                let mode = node.modes.start;
                if drop.contains(&mode) {
                    Squeezed::Gone(self.frames[id].row(0).iter().copied().collect())
                } else {
                    Squeezed::Kept { layout: TreeLayout::Leaf, frames: vec![self.frames[id].clone()], modes: vec![mode] }
                }
            }
            Some((l, r)) => {
                let b = &self.frames[id];
                let (rl, rr) = (self.rank(l), self.rank(r));
                let sl = self.squeeze_node(l, drop);
                let sr = self.squeeze_node(r, drop);
                match (sl, sr) {
                    (
                        Squeezed::Kept { layout: ll, frames: fl, modes: ml },
                        Squeezed::Kept { layout: lr, frames: fr, modes: mr },
                    ) => {
                        let mut frames = vec![b.clone()];
                        frames.extend(fl);
                        frames.extend(fr);
                        Squeezed::Kept {
                            layout: TreeLayout::Split(Box::new(ll), Box::new(lr)),
                            frames,
                            modes: ml.into_iter().chain(mr).collect(),
                        }
                    }
                    (Squeezed::Gone(ul), Squeezed::Kept { layout, mut frames, modes }) => {
                        // B'[b, c] = sum_a ul[a] B[a + b rl, c]
                        let m = DMatrix::from_fn(rr, b.ncols(), |bi, c| {
                            (0..rl).fold(T::zero(), |acc, a| acc + ul[a] * b[(a + bi * rl, c)])
                        });
                        frames[0] = &frames[0] * m;
                        Squeezed::Kept { layout, frames, modes }
                    }
                    (Squeezed::Kept { layout, mut frames, modes }, Squeezed::Gone(ur)) => {
                        let m = DMatrix::from_fn(rl, b.ncols(), |a, c| {
                            (0..rr).fold(T::zero(), |acc, bi| acc + ur[bi] * b[(a + bi * rl, c)])
                        });
                        frames[0] = &frames[0] * m;
                        Squeezed::Kept { layout, frames, modes }
                    }
                    (Squeezed::Gone(ul), Squeezed::Gone(ur)) => {
                        let mut out = vec![T::zero(); b.ncols()];
                        contract_transfer(b, &ul, &ur, &mut out);
                        Squeezed::Gone(out)
                    }
                }
            }
        }
    }

    /// Tensor over the root's left subtree obtained by fixing the right child's
    /// modes at `idx_r`, i.e. the column `X(:, idx_r)` of the left matricization.
    pub fn fix_right(&self, idx_r: &[usize]) -> Result<Self> {
        self.fix_child(false, idx_r)
    }

    /// Tensor over the root's right subtree obtained by fixing the left child's modes at `idx_l`.
    pub fn fix_left(&self, idx_l: &[usize]) -> Result<Self> {
        self.fix_child(true, idx_l)
    }

    fn fix_child(&self, fix_left: bool, idx: &[usize]) -> Result<Self> {
        let (l, r) = self
            .tree
            .children(0)
            .ok_or_else(|| SlarError::ShapeMismatch("cannot fix a child of a single-mode tensor".into()))?;
        let (fixed, kept) = if fix_left { (l, r) } else { (r, l) };
        let fixed_modes = self.tree.node(fixed).modes.clone();
        let fixed_shape = &self.shape[fixed_modes.clone()];
        crate::index::check_index(fixed_shape, idx)?;
        let mut scratch = self.new_scratch();
        let v = self.subtree_vector(fixed, idx, &mut scratch);
        let b = &self.frames[0];
        let (rl, rr) = (self.rank(l), self.rank(r));
        let m = if fix_left {
            DMatrix::from_fn(rr, 1, |bi, _| (0..rl).fold(T::zero(), |acc, a| acc + v[a] * b[(a + bi * rl, 0)]))
        } else {
            DMatrix::from_fn(rl, 1, |a, _| (0..rr).fold(T::zero(), |acc, bi| acc + v[bi] * b[(a + bi * rl, 0)]))
        };
        let size = self.tree.subtree_size(kept);
        let mut frames: Vec<DMatrix<T>> = self.frames[kept..kept + size].to_vec();
        frames[0] = &frames[0] * m;
        let tree = Arc::new(self.tree.subtree(kept));
        let shape = self.shape[self.tree.node(kept).modes.clone()].to_vec();
        Self::from_parts(tree, shape, frames)
    }

    /// Tensor whose root has `left` and `right` as children and scalar transfer `weight`:
    /// the outer product `weight * vec(left) vec(right)^T`.
    pub fn join(left: &Self, right: &Self, weight: T) -> Result<Self> {
        let tree = Arc::new(DimensionTree::join(&left.tree, &right.tree));
        let mut frames = Vec::with_capacity(tree.n_nodes());
        frames.push(DMatrix::from_element(1, 1, weight));
        frames.extend(left.frames.iter().cloned());
        frames.extend(right.frames.iter().cloned());
        let shape = left.shape.iter().chain(&right.shape).copied().collect();
        Self::from_parts(tree, shape, frames)
    }

    /// Tensor over a single mode with frame `v`.
    pub fn from_vector(v: &[T]) -> Self {
        let tree = Arc::new(DimensionTree::balanced(1));
        Self::from_parts(tree, vec![v.len()], vec![DMatrix::from_column_slice(v.len(), 1, v)]).expect("valid vector")
    }

    fn leaf_checked(&self, mode: usize) -> Result<usize> {
        if mode >= self.order() {
            return Err(SlarError::OutOfBounds { mode, index: mode, size: self.order() });
        }
        Ok(self.tree.leaf_of_mode(mode))
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::DenseTensor;
    use super::*;
    use crate::scalar::C64;
    use crate::tree::TreeStrategy;
    use rand::Rng;

    fn close(a: &DenseTensor<C64>, b: &DenseTensor<C64>, tol: f64) {
        let d = a.distance(b);
        assert!(d <= tol * a.norm().max(1.0), "distance {d}");
    }

    #[test]
    fn add_and_scale_match_dense() {
        let mut rng = rng(5);
        for d in 1..=5 {
            let tree = balanced(d);
            let shape: Vec<usize> = (0..d).map(|_| rng.random_range(2..=4)).collect();
            let x: HtTensor<C64> = random_ht(&tree, &shape, 3, &mut rng);
            let y: HtTensor<C64> = random_ht(&tree, &shape, 3, &mut rng);
            let sum = x.add(&y).unwrap();
            let (fx, fy) = (x.full().unwrap(), y.full().unwrap());
            let expected = DenseTensor {
                shape: shape.clone(),
                data: fx.data.iter().zip(&fy.data).map(|(a, b)| a + b).collect(),
            };
            close(&sum.full().unwrap(), &expected, 1e-12);
            for id in 1..tree.n_nodes() {
                assert!(sum.rank(id) <= x.rank(id) + y.rank(id));
            }
            let c = C64::new(0.5, -2.0);
            let scaled = x.scale(c).full().unwrap();
            let expected = DenseTensor { shape: shape.clone(), data: fx.data.iter().map(|a| a * c).collect() };
            close(&scaled, &expected, 1e-12);
            assert!(x.scale(C64::new(0.0, 0.0)).full().unwrap().max_abs() == 0.0);
        }
    }

    #[test]
    fn add_zero_is_identity() {
        let mut rng = rng(6);
        let tree = balanced(4);
        let x: HtTensor<C64> = random_ht(&tree, &[3, 4, 3, 2], 3, &mut rng);
        let z = HtTensor::zeros(x.tree_arc().clone(), x.shape()).unwrap();
        close(&x.add(&z).unwrap().full().unwrap(), &x.full().unwrap(), 1e-14);
    }

    #[test]
    fn leaf_transform_matches_mode_product() {
        let mut rng = rng(7);
        let tree = balanced(4);
        let x: HtTensor<C64> = random_ht(&tree, &[4, 4, 4, 4], 3, &mut rng);
        let m = DMatrix::from_fn(6, 4, |_, _| random_scalar::<C64>(&mut rng));
        for mode in 0..4 {
            let y = x.leaf_transform(mode, &m).unwrap();
            let fx = x.full().unwrap();
            let mut shape = vec![4; 4];
            shape[mode] = 6;
            let expected = DenseTensor::from_fn(&shape, |idx| {
                let mut j = idx.to_vec();
                (0..4).fold(C64::new(0.0, 0.0), |acc, k| {
                    j[mode] = k;
                    acc + m[(idx[mode], k)] * fx.get(&j)
                })
            });
            close(&y.full().unwrap(), &expected, 1e-12);
        }
        let eye = DMatrix::identity(4, 4);
        close(&x.leaf_transform(2, &eye).unwrap().full().unwrap(), &x.full().unwrap(), 0.0);
        assert!(x.leaf_transform(0, &DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn contraction_and_squeeze() {
        let mut rng = rng(8);
        let tree = DimensionTree::build(6, TreeStrategy::PairedUnbalanced).unwrap();
        let shape = [3, 4, 2, 3, 4, 2];
        let x: HtTensor<C64> = random_ht(&tree, &shape, 3, &mut rng);
        let fx = x.full().unwrap();
        let w1: Vec<C64> = (0..4).map(|_| random_scalar(&mut rng)).collect();
        let w3: Vec<C64> = (0..3).map(|_| random_scalar(&mut rng)).collect();
        let y = x.contract_mode(1, &w1).unwrap().contract_mode(3, &w3).unwrap();
        let s = y.squeeze(&[1, 3]).unwrap();
        assert_eq!(s.shape(), &[3, 2, 4, 2]);
        let expected = DenseTensor::from_fn(&[3, 2, 4, 2], |idx| {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..4 {
                for b in 0..3 {
                    acc += w1[a] * w3[b] * fx.get(&[idx[0], a, idx[1], b, idx[2], idx[3]]);
                }
            }
            acc
        });
        close(&s.full().unwrap(), &expected, 1e-12);

        let first = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let sliced = x.contract_mode(0, &first).unwrap().squeeze(&[0]).unwrap();
        let expected = DenseTensor::from_fn(&shape[1..], |idx| {
            let mut j = vec![0];
            j.extend_from_slice(idx);
            fx.get(&j)
        });
        close(&sliced.full().unwrap(), &expected, 1e-12);

        let zero = x.contract_mode(0, &[C64::new(0.0, 0.0); 3]).unwrap();
        assert_eq!(zero.full().unwrap().max_abs(), 0.0);
        assert_eq!(x.squeeze(&[]).unwrap().full().unwrap(), fx);
        assert!(x.squeeze(&[0]).is_err());
    }

    #[test]
    fn squeeze_whole_subtree() {
        let mut rng = rng(9);
        let tree = balanced(4);
        let x: HtTensor<f64> = random_ht(&tree, &[3, 3, 1, 1], 2, &mut rng);
        let s = x.squeeze(&[2, 3]).unwrap();
        assert_eq!(s.shape(), &[3, 3]);
        assert_eq!(s.tree().n_nodes(), 3);
        let fx = x.full().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((s.entry(&[i, j]).unwrap() - fx.get(&[i, j, 0, 0])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn contract_all_matches_dense() {
        let mut rng = rng(10);
        let tree = balanced(3);
        let x: HtTensor<C64> = random_ht(&tree, &[3, 4, 5], 3, &mut rng);
        let ws: Vec<Vec<C64>> = [3, 4, 5].iter().map(|&n| (0..n).map(|_| random_scalar(&mut rng)).collect()).collect();
        let fx = x.full().unwrap();
        let mut expected = C64::new(0.0, 0.0);
        for i in 0..3 {
            for j in 0..4 {
                for k in 0..5 {
                    expected += ws[0][i] * ws[1][j] * ws[2][k] * fx.get(&[i, j, k]);
                }
            }
        }
        assert!((x.contract_all(&ws).unwrap() - expected).norm() < 1e-12);
    }

    #[test]
    fn fix_and_join() {
        let mut rng = rng(12);
        let tree = balanced(4);
        let x: HtTensor<C64> = random_ht(&tree, &[3, 2, 4, 3], 3, &mut rng);
        let fx = x.full().unwrap();
        let col = x.fix_right(&[1, 2]).unwrap();
        let row = x.fix_left(&[2, 0]).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                assert!((col.entry(&[i, j]).unwrap() - fx.get(&[i, j, 1, 2])).norm() < 1e-12);
            }
        }
        for i in 0..4 {
            for j in 0..3 {
                assert!((row.entry(&[i, j]).unwrap() - fx.get(&[2, 0, i, j])).norm() < 1e-12);
            }
        }
        let w = C64::new(0.25, 1.0);
        let joined = HtTensor::join(&col, &row, w).unwrap();
        assert_eq!(joined.tree(), x.tree());
        let (fc, fr) = (col.full().unwrap(), row.full().unwrap());
        for (lin, v) in joined.full().unwrap().data.iter().enumerate() {
            let expected = w * fc.data[lin % 6] * fr.data[lin / 6];
            assert!((v - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn refactor_and_reverse() {
        let mut rng = rng(13);
        let tree = balanced(3);
        let x: HtTensor<f64> = random_ht(&tree, &[4, 5, 3], 2, &mut rng);
        let fx = x.full().unwrap();
        for mode in 0..3 {
            let u = x.frame(x.tree().leaf_of_mode(mode)).clone();
            let m = DMatrix::from_fn(3, u.ncols(), |i, j| (i + 2 * j) as f64 + 0.5);
            let pinv = m.clone().pseudo_inverse(1e-14).unwrap();
            let u_new = &u * pinv;
            let y = x.refactor_leaf(mode, u_new, &m).unwrap();
            assert!(y.full().unwrap().distance(&fx) < 1e-10 * fx.norm());
        }
        let r = x.reverse_leaf_rows(1).unwrap();
        assert_eq!(r.entry(&[1, 0, 2]).unwrap(), x.entry(&[1, 4, 2]).unwrap());
    }
}
