use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use rayon::prelude::*;

use crate::ht::{DenseTensor, HtTensor};
use crate::scalar::Scalar;

/// A tensor exposed through single-entry evaluation.
///
/// Implementations must be deterministic and safe to call from several
/// threads at once; batches of entries are evaluated in parallel.
pub trait EntryAccessor<T: Scalar>: Sync {
    fn shape(&self) -> &[usize];
    fn eval(&self, idx: &[usize]) -> T;

    fn order(&self) -> usize {
        self.shape().len()
    }
}

/// Batches below this size are evaluated on the calling thread.
const PARALLEL_BATCH: usize = 32;

/// Evaluates `acc` at every index, in parallel for large batches when more
/// than one worker is available.
pub fn eval_batch<T: Scalar>(acc: &(impl EntryAccessor<T> + ?Sized), idxs: &[Vec<usize>]) -> Vec<T> {
    if idxs.len() < PARALLEL_BATCH || rayon::current_num_threads() == 1 {
        idxs.iter().map(|i| acc.eval(i)).collect()
    } else {
        idxs.par_iter().with_min_len(PARALLEL_BATCH / 2).map(|i| acc.eval(i)).collect()
    }
}

impl<T: Scalar> EntryAccessor<T> for HtTensor<T> {
    fn shape(&self) -> &[usize] {
        HtTensor::shape(self)
    }

    fn eval(&self, idx: &[usize]) -> T {
        let mut scratch = self.new_scratch();
        self.entry_with(idx, &mut scratch)
    }
}

impl<T: Scalar> EntryAccessor<T> for DenseTensor<T> {
    fn shape(&self) -> &[usize] {
        &self.shape
    }

    fn eval(&self, idx: &[usize]) -> T {
        self.get(idx)
    }
}

/// Accessor defined by a closure.
pub struct FnAccessor<F> {
    shape: Vec<usize>,
    f: F,
}

impl<F> FnAccessor<F> {
    pub fn new(shape: Vec<usize>, f: F) -> Self {
        FnAccessor { shape, f }
    }
}

impl<T: Scalar, F: Fn(&[usize]) -> T + Sync> EntryAccessor<T> for FnAccessor<F> {
    fn shape(&self) -> &[usize] {
        &self.shape
    }

    fn eval(&self, idx: &[usize]) -> T {
        (self.f)(idx)
    }
}

/// A contiguous window of modes of a parent accessor, all other modes fixed.
pub struct Restricted<'a, T: Scalar> {
    parent: &'a dyn EntryAccessor<T>,
    template: Vec<usize>,
    offset: usize,
    shape: Vec<usize>,
}

impl<'a, T: Scalar> Restricted<'a, T> {
    /// Window `offset..offset + len` of `parent`; the remaining modes take their values from `template`.
    pub fn new(parent: &'a dyn EntryAccessor<T>, template: Vec<usize>, offset: usize, len: usize) -> Self {
        debug_assert_eq!(template.len(), parent.order());
        let shape = parent.shape()[offset..offset + len].to_vec();
        Restricted { parent, template, offset, shape }
    }
}

impl<T: Scalar> EntryAccessor<T> for Restricted<'_, T> {
    fn shape(&self) -> &[usize] {
        &self.shape
    }

    fn eval(&self, idx: &[usize]) -> T {
        let mut full = self.template.clone();
        full[self.offset..self.offset + idx.len()].copy_from_slice(idx);
        self.parent.eval(&full)
    }
}

/// `target - approx`, evaluated entrywise.
pub struct Residual<'a, T: Scalar> {
    target: &'a dyn EntryAccessor<T>,
    approx: &'a HtTensor<T>,
}

impl<'a, T: Scalar> Residual<'a, T> {
    pub fn new(target: &'a dyn EntryAccessor<T>, approx: &'a HtTensor<T>) -> Self {
        debug_assert_eq!(target.shape(), approx.shape());
        Residual { target, approx }
    }
}

impl<T: Scalar> EntryAccessor<T> for Residual<'_, T> {
    fn shape(&self) -> &[usize] {
        self.target.shape()
    }

    fn eval(&self, idx: &[usize]) -> T {
        let mut scratch = self.approx.new_scratch();
        self.target.eval(idx) - self.approx.entry_with(idx, &mut scratch)
    }
}

/// Counts evaluations of the wrapped accessor and flags out-of-range requests.
pub struct CountingAccessor<'a, T: Scalar> {
    inner: &'a dyn EntryAccessor<T>,
    count: AtomicU64,
    out_of_range: AtomicBool,
}

impl<'a, T: Scalar> CountingAccessor<'a, T> {
    pub fn new(inner: &'a dyn EntryAccessor<T>) -> Self {
        CountingAccessor { inner, count: AtomicU64::new(0), out_of_range: AtomicBool::new(false) }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    /// Whether any request fell outside the declared shape.
    pub fn saw_out_of_range(&self) -> bool {
        self.out_of_range.load(Ordering::Relaxed)
    }
}

impl<T: Scalar> EntryAccessor<T> for CountingAccessor<'_, T> {
    fn shape(&self) -> &[usize] {
        self.inner.shape()
    }

    fn eval(&self, idx: &[usize]) -> T {
        self.count.fetch_add(1, Ordering::Relaxed);
        let shape = self.inner.shape();
        if idx.len() != shape.len() || idx.iter().zip(shape).any(|(&i, &n)| i >= n) {
            self.out_of_range.store(true, Ordering::Relaxed);
            return T::zero();
        }
        self.inner.eval(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ht::testing::*;
    use crate::scalar::C64;

    #[test]
    fn residual_of_exact_approximation_vanishes() {
        let mut rng = rng(41);
        let x: HtTensor<C64> = random_ht(&balanced(4), &[4; 4], 3, &mut rng);
        let dense = x.full().unwrap();
        let res = Residual::new(&dense, &x);
        for lin in (0..256).step_by(3) {
            let idx = crate::index::delinearize(&[4; 4], lin).unwrap();
            assert!(res.eval(&idx).norm() < 1e-12);
        }
        let zero = HtTensor::zeros(x.tree_arc().clone(), x.shape()).unwrap();
        let res = Residual::new(&dense, &zero);
        assert_eq!(res.eval(&[1, 2, 3, 0]), dense.get(&[1, 2, 3, 0]));
    }

    #[test]
    fn residual_matches_dense_difference() {
        let mut rng = rng(42);
        let tree = balanced(3);
        let x: HtTensor<C64> = random_ht(&tree, &[3, 4, 5], 3, &mut rng);
        let y: HtTensor<C64> = random_ht(&tree, &[3, 4, 5], 3, &mut rng);
        let (fx, fy) = (x.full().unwrap(), y.full().unwrap());
        let res = Residual::new(&fx, &y);
        for lin in 0..60 {
            let idx = crate::index::delinearize(&[3, 4, 5], lin).unwrap();
            assert!((res.eval(&idx) - (fx.get(&idx) - fy.get(&idx))).norm() < 1e-12);
        }
    }

    #[test]
    fn restriction_commutes_with_eval() {
        let acc = FnAccessor::new(vec![3, 4, 5, 6], |i: &[usize]| (i[0] + 10 * i[1] + 100 * i[2] + 1000 * i[3]) as f64);
        let r = Restricted::new(&acc, vec![2, 0, 0, 5], 1, 2);
        assert_eq!(r.shape(), &[4, 5]);
        assert_eq!(r.eval(&[3, 4]), acc.eval(&[2, 3, 4, 5]));
        let counting = CountingAccessor::new(&r);
        counting.eval(&[0, 0]);
        counting.eval(&[4, 0]);
        assert_eq!(counting.count(), 2);
        assert!(counting.saw_out_of_range());
    }
}
