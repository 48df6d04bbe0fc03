use crate::scalar::Scalar;

/// Number of stencil values `1 + 2d + 4 C(d, 2)`.
pub fn stencil_size(d: usize) -> usize {
    1 + 2 * d + 2 * d * d.saturating_sub(1)
}

/// Number of coefficients `1 + 2d + C(d, 2)`.
pub fn coefficient_count(d: usize) -> usize {
    1 + 2 * d + d * d.saturating_sub(1) / 2
}

/// Stencil offsets in the canonical order: the center, then `+e_μ`, `-e_μ`
/// for every mode, then `(+,+)`, `(-,-)`, `(+,-)`, `(-,+)` for every pair
/// `μ < ν` in lexicographic order.
pub fn stencil_offsets(d: usize) -> Vec<Vec<i32>> {
    let mut out = vec![vec![0; d]];
    for m in 0..d {
        for s in [1, -1] {
            let mut o = vec![0; d];
            o[m] = s;
            out.push(o);
        }
    }
    for m in 0..d {
        for n in m + 1..d {
            for (a, b) in [(1, 1), (-1, -1), (1, -1), (-1, 1)] {
                let mut o = vec![0; d];
                o[m] = a;
                o[n] = b;
                out.push(o);
            }
        }
    }
    out
}

/// Coefficients of `p(ξ) = a0 + Σ a_μ ξ_μ + Σ a_μμ ξ_μ² + Σ_{μ<ν} a_μν ξ_μ ξ_ν`.
#[derive(Clone, Debug, PartialEq)]
pub struct P2Coefficients<T> {
    pub a0: T,
    pub linear: Vec<T>,
    pub quadratic: Vec<T>,
    /// Mixed terms for pairs `μ < ν` in lexicographic order.
    pub mixed: Vec<T>,
}

impl<T: Scalar> P2Coefficients<T> {
    /// Closed-form coefficients from stencil values in the order of [`stencil_offsets`].
    pub fn from_stencil(d: usize, values: &[T]) -> Self {
        assert_eq!(values.len(), stencil_size(d), "incomplete stencil");
        let half = T::from_real(0.5);
        let quarter = T::from_real(0.25);
        let a0 = values[0];
        let mut linear = Vec::with_capacity(d);
        let mut quadratic = Vec::with_capacity(d);
        for m in 0..d {
            let (p, n) = (values[1 + 2 * m], values[2 + 2 * m]);
            linear.push(half * (p - n));
            quadratic.push(half * (p + n) - a0);
        }
        let mixed = values[1 + 2 * d..].chunks(4).map(|c| quarter * (c[0] + c[1] - c[2] - c[3])).collect();
        P2Coefficients { a0, linear, quadratic, mixed }
    }

    pub fn len(&self) -> usize {
        1 + self.linear.len() + self.quadratic.len() + self.mixed.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn evaluate(&self, xi: &[f64]) -> T {
        let d = self.linear.len();
        let mut s = self.a0;
        for m in 0..d {
            s += self.linear[m] * T::from_real(xi[m]) + self.quadratic[m] * T::from_real(xi[m] * xi[m]);
        }
        let mut k = 0;
        for m in 0..d {
            for n in m + 1..d {
                s += self.mixed[k] * T::from_real(xi[m] * xi[n]);
                k += 1;
            }
        }
        s
    }
}

/// Evaluates the reconstruction at `ξ` straight from stencil values.
pub fn p2_interpolate<T: Scalar>(values: &[T], xi: &[f64]) -> T {
    let d = xi.len();
    debug_assert_eq!(values.len(), stencil_size(d));
    let a0 = values[0];
    let mut s = a0;
    for m in 0..d {
        let (p, n) = (values[1 + 2 * m], values[2 + 2 * m]);
        let lin = (p - n) * T::from_real(0.5 * xi[m]);
        let quad = ((p + n) * T::from_real(0.5) - a0) * T::from_real(xi[m] * xi[m]);
        s += lin + quad;
    }
    let mut k = 1 + 2 * d;
    for m in 0..d {
        for n in m + 1..d {
            let c = &values[k..k + 4];
            s += (c[0] + c[1] - c[2] - c[3]) * T::from_real(0.25 * xi[m] * xi[n]);
            k += 4;
        }
    }
    s
}
