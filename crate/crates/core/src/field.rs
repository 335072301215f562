//! Field abstractions: complex vector fields with optional analytic Jacobians,
//! real views for streamline integration, and fourth-order finite-difference
//! derivative helpers used both as production fallbacks and as test oracles.

use crate::error::Result;
use crate::geo::{C3, C64, M3, M3c, V3};
use std::sync::Arc;

/// A complex vector field on (a subset of) R^3.
pub trait ComplexField: Send + Sync {
    fn eval(&self, x: V3) -> Result<C3>;

    /// Jacobian J[i][j] = d u_i / d x_j. Default: fourth-order differences.
    fn jacobian(&self, x: V3) -> Result<M3c> {
        fd_jacobian(&|p| self.eval(p), x, 1e-4)
    }
}

/// A real vector field (streamline integration operates on these).
pub trait RealField: Send + Sync {
    fn eval(&self, x: V3) -> Result<V3>;

    fn jacobian(&self, x: V3) -> Result<M3> {
        let j = fd_jacobian(&|p| self.eval(p).map(|v| v.to_c()), x, 1e-4)?;
        let mut out = M3::ZERO;
        for i in 0..3 {
            for k in 0..3 {
                out.0[i][k] = j.0[i][k].re;
            }
        }
        Ok(out)
    }
}

/// Real part of a complex field.
pub struct RealPart(pub Arc<dyn ComplexField>);

impl RealField for RealPart {
    fn eval(&self, x: V3) -> Result<V3> {
        Ok(self.0.eval(x)?.re())
    }
    fn jacobian(&self, x: V3) -> Result<M3> {
        let j = self.0.jacobian(x)?;
        let mut out = M3::ZERO;
        for i in 0..3 {
            for k in 0..3 {
                out.0[i][k] = j.0[i][k].re;
            }
        }
        Ok(out)
    }
}

/// Sum of two complex fields.
pub struct SumField(pub Arc<dyn ComplexField>, pub Arc<dyn ComplexField>);

impl ComplexField for SumField {
    fn eval(&self, x: V3) -> Result<C3> {
        Ok(self.0.eval(x)? + self.1.eval(x)?)
    }
    fn jacobian(&self, x: V3) -> Result<M3c> {
        Ok(self.0.jacobian(x)?.add(&self.1.jacobian(x)?))
    }
}

/// Closure-backed real field (analytic test fields).
pub struct FnField<F: Fn(V3) -> V3 + Send + Sync>(pub F);

impl<F: Fn(V3) -> V3 + Send + Sync> RealField for FnField<F> {
    fn eval(&self, x: V3) -> Result<V3> {
        Ok((self.0)(x))
    }
}

const FD_STENCIL: [(f64, f64); 4] = [
    (-2.0, 1.0 / 12.0),
    (-1.0, -8.0 / 12.0),
    (1.0, 8.0 / 12.0),
    (2.0, -1.0 / 12.0),
];

/// Fourth-order central gradient of a scalar function.
pub fn fd_gradient<F: Fn(V3) -> Result<C64>>(f: &F, x: V3, h: f64) -> Result<C3> {
    let mut g = C3::ZERO;
    for axis in 0..3 {
        let mut acc = C64::new(0.0, 0.0);
        for (off, w) in FD_STENCIL {
            let mut p = x;
            p.0[axis] += off * h;
            acc += f(p)? * (w / h);
        }
        g.0[axis] = acc;
    }
    Ok(g)
}

/// Fourth-order Jacobian J[i][j] = d f_i / d x_j of a vector function.
pub fn fd_jacobian<F: Fn(V3) -> Result<C3>>(f: &F, x: V3, h: f64) -> Result<M3c> {
    let mut j = M3c::ZERO;
    for axis in 0..3 {
        let mut col = C3::ZERO;
        for (off, w) in FD_STENCIL {
            let mut p = x;
            p.0[axis] += off * h;
            let v = f(p)?;
            col = col + v.scale_re(w / h);
        }
        for i in 0..3 {
            j.0[i][axis] = col.0[i];
        }
    }
    Ok(j)
}

pub fn curl_from_jacobian(j: &M3c) -> C3 {
    C3::new(
        j.0[2][1] - j.0[1][2],
        j.0[0][2] - j.0[2][0],
        j.0[1][0] - j.0[0][1],
    )
}

pub fn div_from_jacobian(j: &M3c) -> C64 {
    j.trace()
}

/// Fourth-order curl of a complex field.
pub fn fd_curl<F: Fn(V3) -> Result<C3>>(f: &F, x: V3, h: f64) -> Result<C3> {
    Ok(curl_from_jacobian(&fd_jacobian(f, x, h)?))
}

/// Fourth-order divergence of a complex field.
pub fn fd_div<F: Fn(V3) -> Result<C3>>(f: &F, x: V3, h: f64) -> Result<C64> {
    Ok(div_from_jacobian(&fd_jacobian(f, x, h)?))
}
