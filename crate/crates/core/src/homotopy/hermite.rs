//! Piecewise cubic Hermite homotopy between consecutive slice distance fields.
//!
//! For slices `i, i+1, i+2`
//!
//! ```text
//! H(x, l) = 1/2 [ (2 - l - 4l^2 + 3l^3) p0(x)
//!               + (l + 5l^2 - 4l^3)     p1(x)
//!               + (-l^2 + l^3)          p2(x) ]
//! ```
//!
//! with `H(x, 0) = p0`, `H(x, 1) = p1` and end slopes `(p1 - p0) / 2` and
//! `(p2 - p1) / 2`, which makes consecutive slabs meet with matching slope.

use super::sdf::SignedDistanceSlice;
use crate::error::{Error, Result};

/// Weights applied to `(phi_i, phi_i+1, phi_i+2)`, the leading 1/2 included.
#[inline]
pub fn blend_weights(lambda: f64) -> [f64; 3] {
    let l2 = lambda * lambda;
    let l3 = l2 * lambda;
    [
        0.5 * (2.0 - lambda - 4.0 * l2 + 3.0 * l3),
        0.5 * (lambda + 5.0 * l2 - 4.0 * l3),
        0.5 * (-l2 + l3),
    ]
}

/// Weights of the analytic derivative with respect to lambda.
#[inline]
pub fn slope_weights(lambda: f64) -> [f64; 3] {
    let l2 = lambda * lambda;
    [
        0.5 * (-1.0 - 8.0 * lambda + 9.0 * l2),
        0.5 * (1.0 + 10.0 * lambda - 12.0 * l2),
        0.5 * (-2.0 * lambda + 3.0 * l2),
    ]
}

/// Blends three pointwise values.
#[inline]
pub fn blend(phi: [f64; 3], lambda: f64) -> f64 {
    let w = blend_weights(lambda);
    w[0] * phi[0] + w[1] * phi[1] + w[2] * phi[2]
}

#[inline]
pub fn blend_slope(phi: [f64; 3], lambda: f64) -> f64 {
    let w = slope_weights(lambda);
    w[0] * phi[0] + w[1] * phi[1] + w[2] * phi[2]
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::OutOfRange(format!("lambda {lambda} outside [0, 1]")));
    }
    Ok(())
}

/// Three same-label distance slices bounding one interpolation interval.
#[derive(Clone, Copy, Debug)]
pub struct HomotopySlab<'a> {
    slices: [&'a SignedDistanceSlice; 3],
}

impl<'a> HomotopySlab<'a> {
    pub fn new(
        phi_i: &'a SignedDistanceSlice,
        phi_i1: &'a SignedDistanceSlice,
        phi_i2: &'a SignedDistanceSlice,
    ) -> Result<Self> {
        let slices = [phi_i, phi_i1, phi_i2];
        let dims = phi_i.field.dims();
        if slices.iter().any(|s| s.field.dims() != dims) {
            return Err(Error::Dimension("slab slices differ in dims".into()));
        }
        if slices.iter().any(|s| s.label != phi_i.label) {
            return Err(Error::Precondition("slab slices differ in label".into()));
        }
        Ok(HomotopySlab { slices })
    }

    fn values_at(&self, x: [f64; 2]) -> Result<[f64; 3]> {
        let (nx, ny) = self.slices[0].field.dims();
        let inside = (0.0..=(nx - 1) as f64).contains(&x[0]) && (0.0..=(ny - 1) as f64).contains(&x[1]);
        if !inside {
            return Err(Error::OutOfRange(format!("point {x:?} outside the {nx}x{ny} grid")));
        }
        Ok(self.slices.map(|s| s.field.bilinear(x[0], x[1])))
    }

    /// `H(x, lambda)` with `x` in pixel-index coordinates.
    pub fn eval(&self, x: [f64; 2], lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        Ok(blend(self.values_at(x)?, lambda))
    }

    /// `dH/dlambda (x, lambda)`.
    pub fn derivative(&self, x: [f64; 2], lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        Ok(blend_slope(self.values_at(x)?, lambda))
    }
}

pub fn homotopy_eval(slab: &HomotopySlab<'_>, x: [f64; 2], lambda: f64) -> Result<f64> {
    slab.eval(x, lambda)
}

pub fn homotopy_derivative(slab: &HomotopySlab<'_>, x: [f64; 2], lambda: f64) -> Result<f64> {
    slab.derivative(x, lambda)
}
