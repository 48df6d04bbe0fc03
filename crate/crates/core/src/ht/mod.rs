//! Hierarchical Tucker tensors.
//!
//! A tensor is stored as one matrix per tree node, indexed like the nodes of
//! its [`DimensionTree`]. Leaves hold frames `U` of size `N_mu x r`; interior
//! nodes hold matricized transfer tensors `B` of size `(r_l * r_r) x r` with
//! the left child index fastest, so that `U_alpha = (U_r ⊗ U_l) B_alpha`. The
//! root always has rank 1.

mod algebra;
pub mod io;
mod truncate;

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Result, SlarError};
use crate::index;
use crate::scalar::{Scalar, C64};
use crate::tree::DimensionTree;

pub use truncate::RankBounds;

/// Default cap on dense reconstructions.
pub const DENSE_CAP: usize = 10_000_000;

#[derive(Clone, Debug)]
pub struct HtTensor<T: Scalar = C64> {
    tree: Arc<DimensionTree>,
    shape: Vec<usize>,
    frames: Vec<DMatrix<T>>,
    offsets: Vec<usize>,
}

/// Column-major dense tensor, used as an oracle and for small reconstructions.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor<T: Scalar = C64> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> DenseTensor<T> {
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> T) -> Self {
        let total: usize = shape.iter().product();
        let mut idx = vec![0; shape.len()];
        let data = (0..total)
            .map(|lin| {
                index::delinearize_into(shape, lin, &mut idx);
                f(&idx)
            })
            .collect();
        DenseTensor { shape: shape.to_vec(), data }
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.data[index::linearize(&self.shape, idx).expect("index in range")]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v.modulus_squared()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &DenseTensor<T>) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).modulus_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Matricization with the modes in `rows` as row index (in ascending order).
    pub fn matricize(&self, rows: &[usize]) -> DMatrix<T> {
        let cols: Vec<usize> = (0..self.shape.len()).filter(|m| !rows.contains(m)).collect();
        let rshape: Vec<usize> = rows.iter().map(|&m| self.shape[m]).collect();
        let cshape: Vec<usize> = cols.iter().map(|&m| self.shape[m]).collect();
        let nr: usize = rshape.iter().product();
        let nc: usize = cshape.iter().product();
        let mut out = DMatrix::zeros(nr, nc);
        let mut idx = vec![0; self.shape.len()];
        for (lin, v) in self.data.iter().enumerate() {
            index::delinearize_into(&self.shape, lin, &mut idx);
            let ri: Vec<usize> = rows.iter().map(|&m| idx[m]).collect();
            let ci: Vec<usize> = cols.iter().map(|&m| idx[m]).collect();
            let r = index::linearize(&rshape, &ri).unwrap();
            let c = if ci.is_empty() { 0 } else { index::linearize(&cshape, &ci).unwrap() };
            out[(r, c)] = *v;
        }
        out
    }
}

/// Per-thread workspace for entry evaluation.
#[derive(Clone, Debug, Default)]
pub struct EntryScratch<T> {
    buf: Vec<T>,
}

impl<T: Scalar> EntryScratch<T> {
    pub fn new() -> Self {
        EntryScratch { buf: Vec::new() }
    }
}

impl<T: Scalar> HtTensor<T> {
    /// Assembles a tensor from per-node matrices in the tree's node order.
    pub fn from_parts(tree: Arc<DimensionTree>, shape: Vec<usize>, frames: Vec<DMatrix<T>>) -> Result<Self> {
        if shape.len() != tree.n_modes() {
            return Err(SlarError::ShapeMismatch(format!(
                "shape has {} modes, tree has {}",
                shape.len(),
                tree.n_modes()
            )));
        }
        if frames.len() != tree.n_nodes() {
            return Err(SlarError::ShapeMismatch(format!(
                "{} frames for {} tree nodes",
                frames.len(),
                tree.n_nodes()
            )));
        }
        for (id, node) in tree.nodes().iter().enumerate() {
            let m = &frames[id];
            match node.children {
                None => {
                    if m.nrows() != shape[node.modes.start] {
                        return Err(SlarError::ShapeMismatch(format!(
                            "leaf frame of mode {} has {} rows, expected {}",
                            node.modes.start,
                            m.nrows(),
                            shape[node.modes.start]
                        )));
                    }
                }
                Some((l, r)) => {
                    let expected = frames[l].ncols() * frames[r].ncols();
                    if m.nrows() != expected {
                        return Err(SlarError::ShapeMismatch(format!(
                            "transfer at node {id} has {} rows, expected {expected}",
                            m.nrows()
                        )));
                    }
                }
            }
            if m.ncols() == 0 {
                return Err(SlarError::ShapeMismatch(format!("node {id} has rank 0")));
            }
        }
        if frames[0].ncols() != 1 {
            return Err(SlarError::ShapeMismatch(format!("root rank is {}, must be 1", frames[0].ncols())));
        }
        let mut offsets = Vec::with_capacity(frames.len() + 1);
        let mut acc = 0;
        for f in &frames {
            offsets.push(acc);
            acc += f.ncols();
        }
        offsets.push(acc);
        Ok(HtTensor { tree, shape, frames, offsets })
    }

    /// The zero tensor with all ranks 1.
    pub fn zeros(tree: Arc<DimensionTree>, shape: &[usize]) -> Result<Self> {
        let frames = tree
            .nodes()
            .iter()
            .map(|node| match node.children {
                None => DMatrix::zeros(shape.get(node.modes.start).copied().unwrap_or(1), 1),
                Some(_) => DMatrix::zeros(1, 1),
            })
            .collect();
        Self::from_parts(tree, shape.to_vec(), frames)
    }

    /// Rank-1 tensor `factors[0] ⊗ ... ⊗ factors[d-1]` (outer product, mode 0 fastest).
    pub fn rank_one(tree: Arc<DimensionTree>, factors: &[Vec<T>]) -> Result<Self> {
        if factors.len() != tree.n_modes() {
            return Err(SlarError::ShapeMismatch(format!(
                "{} factors for a {}-mode tree",
                factors.len(),
                tree.n_modes()
            )));
        }
        let shape: Vec<usize> = factors.iter().map(Vec::len).collect();
        let frames = tree
            .nodes()
            .iter()
            .map(|node| match node.children {
                None => DMatrix::from_column_slice(factors[node.modes.start].len(), 1, &factors[node.modes.start]),
                Some(_) => DMatrix::from_element(1, 1, T::one()),
            })
            .collect();
        Self::from_parts(tree, shape, frames)
    }

    pub fn tree(&self) -> &DimensionTree {
        &self.tree
    }

    pub fn tree_arc(&self) -> &Arc<DimensionTree> {
        &self.tree
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn frame(&self, node: usize) -> &DMatrix<T> {
        &self.frames[node]
    }

    pub fn frames(&self) -> &[DMatrix<T>] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<DMatrix<T>> {
        self.frames
    }

    pub fn rank(&self, node: usize) -> usize {
        self.frames[node].ncols()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.frames.iter().map(|f| f.ncols()).collect()
    }

    pub fn max_rank(&self) -> usize {
        self.frames.iter().map(|f| f.ncols()).max().unwrap_or(1)
    }

    /// Largest rank over interior (non-root) nodes, or 1 if there are none.
    pub fn max_interior_rank(&self) -> usize {
        self.tree
            .nodes()
            .iter()
            .enumerate()
            .filter(|(id, n)| *id != 0 && !n.is_leaf())
            .map(|(id, _)| self.rank(id))
            .max()
            .unwrap_or(1)
    }

    /// Number of stored scalars over all frames and transfer tensors.
    pub fn storage(&self) -> usize {
        self.frames.iter().map(|f| f.len()).sum()
    }

    /// Stored scalars divided by the number of dense entries.
    pub fn compression_ratio(&self) -> f64 {
        self.storage() as f64 / index::numel(&self.shape) as f64
    }

    pub fn new_scratch(&self) -> EntryScratch<T> {
        EntryScratch { buf: vec![T::zero(); *self.offsets.last().unwrap()] }
    }

    /// Entry at a 0-based multi-index.
    pub fn entry(&self, idx: &[usize]) -> Result<T> {
        index::check_index(&self.shape, idx)?;
        let mut scratch = self.new_scratch();
        Ok(self.entry_with(idx, &mut scratch))
    }

    /// Entry evaluation without bounds checks beyond debug assertions.
    pub fn entry_with(&self, idx: &[usize], scratch: &mut EntryScratch<T>) -> T {
        debug_assert!(index::check_index(&self.shape, idx).is_ok());
        self.subtree_eval(0, idx, scratch);
        scratch.buf[0]
    }

    /// Evaluates the subtree rooted at `node` for indices of its modes
    /// (`idx[k]` is the index of mode `node.modes.start + k`) and returns the
    /// resulting vector of length `rank(node)`.
    pub fn subtree_vector(&self, node: usize, idx: &[usize], scratch: &mut EntryScratch<T>) -> Vec<T> {
        self.subtree_eval(node, idx, scratch);
        let off = self.offsets[node];
        scratch.buf[off..off + self.rank(node)].to_vec()
    }

    fn subtree_eval(&self, node: usize, idx: &[usize], scratch: &mut EntryScratch<T>) {
        let total = *self.offsets.last().unwrap();
        if scratch.buf.len() < total {
            scratch.buf.resize(total, T::zero());
        }
        let first_mode = self.tree.node(node).modes.start;
        let end = node + self.tree.subtree_size(node);
        for id in (node..end).rev() {
            let tnode = self.tree.node(id);
            let off = self.offsets[id];
            let frame = &self.frames[id];
            let r = frame.ncols();
            match tnode.children {
                None => {
                    let i = idx[tnode.modes.start - first_mode];
                    for c in 0..r {
                        scratch.buf[off + c] = frame[(i, c)];
                    }
                }
                Some((l, rc)) => {
                    let (head, tail) = scratch.buf.split_at_mut(off + r);
                    let base = off + r;
                    let vl = &tail[self.offsets[l] - base..self.offsets[l] - base + self.rank(l)];
                    let vr = &tail[self.offsets[rc] - base..self.offsets[rc] - base + self.rank(rc)];
                    contract_transfer(frame, vl, vr, &mut head[off..off + r]);
                }
            }
        }
    }

    /// Dense reconstruction, refusing tensors with more than `cap` entries.
    pub fn full_capped(&self, cap: usize) -> Result<DenseTensor<T>> {
        let entries = index::numel(&self.shape);
        if entries > cap as u128 {
            return Err(SlarError::SizeCap { entries, cap });
        }
        let root = self.full_frame(0);
        Ok(DenseTensor { shape: self.shape.clone(), data: root.as_slice().to_vec() })
    }

    pub fn full(&self) -> Result<DenseTensor<T>> {
        self.full_capped(DENSE_CAP)
    }

    /// Dense frame `U_alpha` of a node: rows over the node's modes, one column per rank.
    pub fn full_frame(&self, node: usize) -> DMatrix<T> {
        match self.tree.children(node) {
            None => self.frames[node].clone(),
            Some((l, r)) => {
                let ul = self.full_frame(l);
                let ur = self.full_frame(r);
                let b = &self.frames[node];
                let (rl, rr) = (ul.ncols(), ur.ncols());
                let mut out = DMatrix::zeros(ul.nrows() * ur.nrows(), b.ncols());
                for c in 0..b.ncols() {
                    let m = DMatrix::from_column_slice(rl, rr, b.column(c).as_slice());
                    let block = &ul * m * ur.transpose();
                    out.column_mut(c).copy_from_slice(block.as_slice());
                }
                out
            }
        }
    }

    /// Converts every stored matrix with `f`.
    pub fn map_frames<S: Scalar>(&self, f: impl Fn(T) -> S) -> HtTensor<S> {
        HtTensor {
            tree: self.tree.clone(),
            shape: self.shape.clone(),
            frames: self.frames.iter().map(|m| m.map(&f)).collect(),
            offsets: self.offsets.clone(),
        }
    }

    pub fn to_complex(&self) -> HtTensor<C64> {
        self.map_frames(|v| v.to_c64())
    }

    /// Checks that every stored number is finite.
    pub fn is_finite(&self) -> bool {
        self.frames.iter().all(|m| m.iter().all(|v| v.is_finite_value()))
    }

    pub(crate) fn rebuild(&self, frames: Vec<DMatrix<T>>) -> Self {
        Self::from_parts(self.tree.clone(), self.shape.clone(), frames).expect("consistent frames")
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(SlarError::ShapeMismatch(format!("shapes {:?} and {:?}", self.shape, other.shape)));
        }
        if *self.tree != *other.tree {
            return Err(SlarError::ShapeMismatch(format!("trees {:?} and {:?}", self.tree, other.tree)));
        }
        Ok(())
    }
}

impl HtTensor<C64> {
    /// Real tensor from a complex one whose stored numbers are all real.
    pub fn try_into_real(&self) -> Option<HtTensor<f64>> {
        if self.frames.iter().all(|m| m.iter().all(|v| v.im == 0.0)) {
            Some(self.map_frames(|v| v.re))
        } else {
            None
        }
    }
}

/// `out[c] = sum_{a,b} B[a + b * rl, c] * vl[a] * vr[b]`.
#[inline]
pub(crate) fn contract_transfer<T: Scalar>(b: &DMatrix<T>, vl: &[T], vr: &[T], out: &mut [T]) {
    let rl = vl.len();
    let data = b.as_slice();
    let rows = b.nrows();
    for (c, o) in out.iter_mut().enumerate() {
        let col = &data[c * rows..(c + 1) * rows];
        let mut s = T::zero();
        for (bi, &wr) in vr.iter().enumerate() {
            s += dot(&col[bi * rl..(bi + 1) * rl], vl) * wr;
        }
        *o = s;
    }
}

/// [`contract_transfer`] for many `(left, right)` vector pairs at once.
///
/// `left` and `right` hold `rl`- and `rr`-vectors back to back; pair `k`
/// writes `out[k * r..(k + 1) * r]`. Each left vector is contracted with the
/// transfer tensor once and reused by every pair that shares it.
pub(crate) fn contract_transfer_pairs<T: Scalar>(b: &DMatrix<T>, left: &[T], right: &[T], rl: usize, pairs: &[(usize, usize)], out: &mut [T]) {
    let (rows, r) = b.shape();
    if rl == 0 || rows == 0 {
        out.iter_mut().for_each(|o| *o = T::zero());
        return;
    }
    let rr = rows / rl;
    let nl = left.len() / rl;
    let data = b.as_slice();
    let mut t = vec![T::zero(); nl * rr];
    for c in 0..r {
        let col = &data[c * rows..(c + 1) * rows];
        for (i, ti) in t.chunks_exact_mut(rr).enumerate() {
            let vl = &left[i * rl..(i + 1) * rl];
            for (bi, x) in ti.iter_mut().enumerate() {
                *x = dot(&col[bi * rl..(bi + 1) * rl], vl);
            }
        }
        for (k, &(i, j)) in pairs.iter().enumerate() {
            out[k * r + c] = dot(&t[i * rr..(i + 1) * rr], &right[j * rr..(j + 1) * rr]);
        }
    }
}

/// `Σ a_i b_i` with four independent accumulators so the loop vectorizes.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[2]) + (acc[1] + acc[3]);
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        s += *x * *y;
    }
    s
}
