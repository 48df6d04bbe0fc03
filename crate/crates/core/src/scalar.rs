use std::fmt::Debug;

use nalgebra::ComplexField;
use num_complex::Complex64;

/// Complex double, the default scalar of every tensor in the crate.
pub type C64 = Complex64;

/// Scalar field used by tensors and accessors.
///
/// Implemented for `f64` and [`C64`]. Real tensors are a storage optimisation
/// for data that is real by construction (distribution functions); every
/// operation behaves identically to the complex path with zero imaginary parts.
pub trait Scalar:
    ComplexField<RealField = f64> + Copy + Default + Debug + Send + Sync + 'static
{
    const IS_COMPLEX: bool;

    fn to_c64(self) -> C64;
    /// Converts back from a complex value; real scalars reject a nonzero imaginary part.
    fn from_c64(z: C64) -> Option<Self>;
    fn re(self) -> f64;

    /// `sign(x + 0⁺)`: the unit-modulus phase of `x`, with `sign(0) = 1`.
    fn sign(self) -> Self {
        let m = self.modulus();
        if m == 0.0 {
            Self::one()
        } else {
            self.unscale(m)
        }
    }

    fn is_finite_value(self) -> bool {
        let z = self.to_c64();
        z.re.is_finite() && z.im.is_finite()
    }
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;

    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
    fn from_c64(z: C64) -> Option<Self> {
        (z.im == 0.0).then_some(z.re)
    }
    fn re(self) -> f64 {
        self
    }
}

impl Scalar for C64 {
    const IS_COMPLEX: bool = true;

    fn to_c64(self) -> C64 {
        self
    }
    fn from_c64(z: C64) -> Option<Self> {
        Some(z)
    }
    fn re(self) -> f64 {
        self.re
    }
}
