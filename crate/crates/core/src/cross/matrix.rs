use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::accessor::{eval_batch, EntryAccessor, FnAccessor};
use super::pivot::{recursive_pivot_search, IndexSets};
use crate::error::{Result, SlarError};
use crate::scalar::Scalar;
use crate::tree::DimensionTree;

/// Skeleton factorization `A ≈ left * right` built by adaptive cross approximation.
#[derive(Clone, Debug)]
pub struct MatrixAca<T: Scalar> {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// Residual columns at the pivots, `n1 x k`.
    pub left: DMatrix<T>,
    /// Residual rows at the pivots divided by the pivot values, `k x n2`.
    pub right: DMatrix<T>,
    pub pivots: Vec<T>,
    /// The rank cap was reached before the pivot dropped below the tolerance.
    pub saturated: bool,
    /// Every row/column pair was used.
    pub exhausted: bool,
}

impl<T: Scalar> MatrixAca<T> {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn approximation(&self) -> DMatrix<T> {
        &self.left * &self.right
    }
}

/// Matrix ACA on a 2-mode accessor: stops once the pivot magnitude falls below
/// `tol` (the sub-threshold pivot is not applied) or `max_rank` corrections were made.
pub fn matrix_aca<T: Scalar>(acc: &dyn EntryAccessor<T>, tol: f64, max_rank: usize, seed: u64) -> Result<MatrixAca<T>> {
    let shape = acc.shape().to_vec();
    if shape.len() != 2 {
        return Err(SlarError::ShapeMismatch(format!("matrix ACA needs 2 modes, got {}", shape.len())));
    }
    let (n1, n2) = (shape[0], shape[1]);
    let tree = DimensionTree::balanced(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = IndexSets::default();
    let mut cols_mat: Vec<Vec<T>> = Vec::new();
    let mut rows_mat: Vec<Vec<T>> = Vec::new();
    let mut out = MatrixAca {
        rows: Vec::new(),
        cols: Vec::new(),
        left: DMatrix::zeros(n1, 0),
        right: DMatrix::zeros(0, n2),
        pivots: Vec::new(),
        saturated: false,
        exhausted: false,
    };
    loop {
        if out.pivots.len() >= max_rank {
            out.saturated = true;
            break;
        }
        let residual = FnAccessor::new(shape.clone(), |idx: &[usize]| {
            let mut v = acc.eval(idx);
            for (c, r) in cols_mat.iter().zip(&rows_mat) {
                v -= c[idx[0]] * r[idx[1]];
            }
            v
        });
        let pivot = recursive_pivot_search(&residual, &tree, 0, Some(&mut sets), &[], &mut rng);
        if pivot.exhausted {
            out.exhausted = true;
            break;
        }
        let p = pivot.value;
        if !p.is_finite_value() {
            return Err(SlarError::NonFinite(format!("pivot at {:?}", pivot.index)));
        }
        if p.modulus() < tol || p.modulus() == 0.0 {
            break;
        }
        let (i, j) = (pivot.index[0], pivot.index[1]);
        let col = eval_batch(&residual, &(0..n1).map(|a| vec![a, j]).collect::<Vec<_>>());
        let row = eval_batch(&residual, &(0..n2).map(|b| vec![i, b]).collect::<Vec<_>>());
        let inv = T::one() / p;
        cols_mat.push(col);
        rows_mat.push(row.into_iter().map(|v| v * inv).collect());
        out.rows.push(i);
        out.cols.push(j);
        out.pivots.push(p);
    }
    let k = out.pivots.len();
    out.left = DMatrix::from_fn(n1, k, |a, c| cols_mat[c][a]);
    out.right = DMatrix::from_fn(k, n2, |c, b| rows_mat[c][b]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ht::testing::*;
    use crate::ht::DenseTensor;
    use crate::scalar::C64;

    fn dense_acc(m: &DMatrix<C64>) -> DenseTensor<C64> {
        DenseTensor::from_fn(&[m.nrows(), m.ncols()], |i| m[(i[0], i[1])])
    }

    #[test]
    fn rank_one_in_one_step() {
        let mut rng = rng(61);
        let u = DMatrix::from_fn(12, 1, |_, _| random_scalar::<C64>(&mut rng));
        let v = DMatrix::from_fn(1, 9, |_, _| random_scalar::<C64>(&mut rng));
        let m = &u * &v;
        let aca = matrix_aca(&dense_acc(&m), 1e-12, 10, 0).unwrap();
        assert_eq!(aca.rank(), 1);
        assert!((aca.approximation() - &m).iter().all(|e| e.norm() < 1e-13));
    }

    #[test]
    fn exact_rank_two() {
        let mut rng = rng(62);
        let u = DMatrix::from_fn(8, 2, |_, _| random_scalar::<C64>(&mut rng));
        let v = DMatrix::from_fn(2, 8, |_, _| random_scalar::<C64>(&mut rng));
        let m = &u * &v;
        let aca = matrix_aca(&dense_acc(&m), 1e-10, 10, 1).unwrap();
        assert_eq!(aca.rank(), 2);
        assert!((aca.approximation() - &m).iter().all(|e| e.norm() < 1e-12));
    }

    #[test]
    fn interpolates_selected_rows_and_columns() {
        let n = 32;
        let m = DMatrix::from_fn(n, n, |i, j| C64::new(1.0 / (i + j + 1) as f64, 0.0));
        let aca = matrix_aca(&dense_acc(&m), 1e-8, 30, 2).unwrap();
        let approx = aca.approximation();
        for &i in &aca.rows {
            for j in 0..n {
                assert!((approx[(i, j)] - m[(i, j)]).norm() < 1e-12);
            }
        }
        for &j in &aca.cols {
            for i in 0..n {
                assert!((approx[(i, j)] - m[(i, j)]).norm() < 1e-12);
            }
        }
        let err = (approx - &m).iter().map(|e| e.norm()).fold(0.0, f64::max);
        assert!(err <= 10.0 * 1e-8, "max error {err}");
    }
}
