//! Dense helpers on top of nalgebra.

use nalgebra::DMatrix;

use crate::scalar::Scalar;

/// Thin QR: `m = q * r` with `q` of size rows x min(rows, cols).
pub fn thin_qr<T: Scalar>(m: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    if m.ncols() == 0 || m.nrows() == 0 {
        let k = m.nrows().min(m.ncols());
        return (DMatrix::zeros(m.nrows(), k), DMatrix::zeros(k, m.ncols()));
    }
    let qr = m.clone().qr();
    (qr.q(), qr.r())
}

/// Left singular vectors and singular values in descending order.
///
/// Returns `u` with `min(rows, cols)` columns. The SVD is computed with faer;
/// nalgebra's implicit-shift SVD loses accuracy on some ill-conditioned inputs.
/// Falls back to the Gram matrix if the SVD fails to converge.
pub fn left_svd<T: Scalar>(m: &DMatrix<T>) -> (DMatrix<T>, Vec<f64>) {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return (DMatrix::zeros(m.nrows(), 0), Vec::new());
    }
    let (u, s) = match faer_left_svd(m) {
        Some(us) => us,
        None => {
            log::warn!("SVD did not converge on a {}x{} matrix, using the Gram matrix", m.nrows(), m.ncols());
            let gram = m * m.adjoint();
            let svd = gram.svd(true, false);
            let s: Vec<f64> = svd.singular_values.iter().map(|v| v.max(0.0).sqrt()).collect();
            let u = svd.u.expect("u requested");
            (u.columns(0, k).into_owned(), s[..k].to_vec())
        }
    };
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let sorted_u = DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let sorted_s = order.iter().map(|&j| s[j]).collect();
    (sorted_u, sorted_s)
}

/// Thin SVD through faer, in real arithmetic for real scalars.
fn faer_left_svd<T: Scalar>(m: &DMatrix<T>) -> Option<(DMatrix<T>, Vec<f64>)> {
    let (r, c) = m.shape();
    if T::IS_COMPLEX {
        let a = faer::Mat::<faer::c64>::from_fn(r, c, |i, j| m[(i, j)].to_c64());
        let svd = a.thin_svd().ok()?;
        let u = svd.U();
        let s = svd.S().column_vector().iter().map(|v| v.re).collect();
        Some((DMatrix::from_fn(r, u.ncols(), |i, j| T::from_c64(u[(i, j)]).expect("complex scalar")), s))
    } else {
        let a = faer::Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)].re());
        let svd = a.thin_svd().ok()?;
        let u = svd.U();
        let s = svd.S().column_vector().iter().copied().collect();
        Some((DMatrix::from_fn(r, u.ncols(), |i, j| T::from_real(u[(i, j)])), s))
    }
}

/// Smallest `k` such that the tail `sqrt(sum_{i >= k} s_i^2)` is at most `tol`.
pub fn tail_rank(s: &[f64], tol: f64) -> usize {
    let mut tail = 0.0;
    for k in (0..s.len()).rev() {
        tail += s[k] * s[k];
        if tail.sqrt() > tol {
            return k + 1;
        }
    }
    0
}

/// Kronecker product `a ⊗ b`.
pub fn kron<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn frobenius<T: Scalar>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|v| v.modulus_squared()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::C64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
        DMatrix::from_fn(rows, cols, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn vec_of_outer_product_is_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = rng.random_range(1..=8);
            let n = rng.random_range(1..=8);
            let u = random(m, 1, &mut rng);
            let v = random(n, 1, &mut rng);
            let outer = &v * u.transpose();
            let k = kron(&u, &v);
            assert_eq!(outer.as_slice(), k.as_slice());
        }
    }

    #[test]
    fn qr_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (r, c) in [(7, 3), (3, 7), (5, 5)] {
            let m = random(r, c, &mut rng);
            let (q, rr) = thin_qr(&m);
            assert_eq!(q.ncols(), r.min(c));
            assert!(frobenius(&(&q * &rr - &m)) < 1e-12);
            let eye = DMatrix::<C64>::identity(q.ncols(), q.ncols());
            assert!(frobenius(&(q.adjoint() * &q - eye)) < 1e-12);
        }
    }

    #[test]
    fn svd_is_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random(6, 9, &mut rng);
        let (u, s) = left_svd(&m);
        assert_eq!(u.ncols(), 6);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let proj = &u * u.adjoint() * &m;
        assert!(frobenius(&(proj - &m)) < 1e-12);
    }

    #[test]
    fn svd_with_negligible_singular_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (a, _) = thin_qr(&random(4, 4, &mut rng));
            let (b, _) = thin_qr(&random(12, 4, &mut rng));
            let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                C64::new(360.0, 0.0),
                C64::new(143.0, 0.0),
                C64::new(84.0, 0.0),
                C64::new(1e-13, 0.0),
            ]));
            let m = &a * sigma * b.adjoint();
            let (u, s) = left_svd(&m);
            assert!((s[0] - 360.0).abs() < 1e-10 && s[3] < 1e-10, "{s:?}");
            assert!(frobenius(&(&u * u.adjoint() * &m - &m)) < 1e-10);
        }
    }

    #[test]
    fn svd_of_graded_real_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let real = |m: DMatrix<C64>| m.map(|z| z.re);
        for _ in 0..20 {
            let (a, _) = thin_qr(&real(random(22, 22, &mut rng)));
            let (b, _) = thin_qr(&real(random(44, 22, &mut rng)));
            let s: Vec<f64> = (0..22).map(|i| 20.0 * 10f64.powf(-0.33 * i as f64)).collect();
            let m = &a * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(s.clone())) * b.transpose();
            let (u, got) = left_svd(&m);
            for (x, y) in got.iter().zip(&s) {
                assert!((x - y).abs() <= 1e-12 * s[0], "{x} vs {y}");
            }
            assert!(frobenius(&(&u * u.transpose() * &m - &m)) <= 1e-13 * frobenius(&m));
        }
    }

    #[test]
    fn tail_rank_cases() {
        let s = [4.0, 3.0, 0.0];
        assert_eq!(tail_rank(&s, 0.0), 2);
        assert_eq!(tail_rank(&s, 3.0), 1);
        assert_eq!(tail_rank(&s, 5.0), 0);
        assert_eq!(tail_rank(&s, 4.99), 1);
    }
}
