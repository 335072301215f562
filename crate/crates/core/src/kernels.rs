//! Helmholtz fundamental solution Gamma_lambda(z) = e^{i lambda |z|}/(4 pi |z|),
//! its derivatives, the homogeneous/inhomogeneous split
//! Gamma_lambda = Gamma_0 + R_lambda, and pointwise radiation residuals.
//!
//! Everything here is complex-valued; real-field callers take real parts at
//! the boundary of this module.

use crate::error::{Error, Result};
use crate::geo::{cross_vc, C3, C64, M3c, V3};

pub const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Nonzero proportionality constant / wave number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveNumber(pub f64);

impl WaveNumber {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::domain("wave number must be finite"));
        }
        Ok(WaveNumber(lambda))
    }
    pub fn nonzero(lambda: f64) -> Result<Self> {
        let wn = Self::new(lambda)?;
        if lambda == 0.0 {
            return Err(Error::domain("wave number must be nonzero here"));
        }
        Ok(wn)
    }
}

/// Kernel value with gradient and optional Hessian.
#[derive(Debug, Clone, Copy)]
pub struct KernelValue {
    pub value: C64,
    pub gradient: C3,
    pub hessian: Option<M3c>,
}

/// Split Gamma_lambda = Gamma_0 + R_lambda with R_lambda(z) = psi_lambda(|z|).
#[derive(Debug, Clone, Copy)]
pub struct KernelSplit {
    pub homogeneous: C64,
    pub remainder: C64,
    pub psi: C64,
}

/// Gamma_lambda(z) = e^{i lambda |z|} / (4 pi |z|); lambda = 0 gives the Newtonian kernel.
pub fn gamma(lambda: f64, z: V3) -> Result<C64> {
    let r = z.norm();
    if r == 0.0 {
        return Err(Error::domain("gamma evaluated at the singular point z = 0"));
    }
    Ok(C64::new(0.0, lambda * r).exp() / (FOUR_PI * r))
}

/// grad Gamma_lambda(z) = (i lambda - 1/|z|) Gamma_lambda(z) z/|z|.
pub fn grad_gamma(lambda: f64, z: V3) -> Result<C3> {
    let r = z.norm();
    if r == 0.0 {
        return Err(Error::domain("grad_gamma evaluated at z = 0"));
    }
    let g = gamma(lambda, z)?;
    let factor = (C64::new(0.0, lambda) - 1.0 / r) * g / r;
    Ok(C3::new(factor * z.x(), factor * z.y(), factor * z.z()))
}

/// Hessian of Gamma_lambda from the radial form:
/// with phi(r) = Gamma, phi' = (i lambda - 1/r) phi, phi'' = ((i lambda - 1/r)^2 + 1/r^2) phi,
/// Hess = phi'' zhat zhat^T + (phi'/r)(I - zhat zhat^T).
pub fn hess_gamma(lambda: f64, z: V3) -> Result<M3c> {
    let r = z.norm();
    if r == 0.0 {
        return Err(Error::domain("hess_gamma evaluated at z = 0"));
    }
    let g = gamma(lambda, z)?;
    let il = C64::new(0.0, lambda);
    let dphi = (il - 1.0 / r) * g;
    let ddphi = ((il - 1.0 / r) * (il - 1.0 / r) + 1.0 / (r * r)) * g;
    let zh = z.scale(1.0 / r);
    let mut h = M3c::ZERO;
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            h.0[i][j] =
                ddphi * zh.0[i] * zh.0[j] + dphi / r * (delta - zh.0[i] * zh.0[j]);
        }
    }
    Ok(h)
}

/// Full tier: value + gradient (+ Hessian on request).
pub fn kernel_value(lambda: f64, z: V3, with_hessian: bool) -> Result<KernelValue> {
    Ok(KernelValue {
        value: gamma(lambda, z)?,
        gradient: grad_gamma(lambda, z)?,
        hessian: if with_hessian {
            Some(hess_gamma(lambda, z)?)
        } else {
            None
        },
    })
}

/// psi_lambda(r) = (e^{i lambda r} - 1)/(4 pi r), evaluated in the
/// cancellation-free form 2i e^{i lambda r/2} sin(lambda r/2) / (4 pi r).
pub fn psi_lambda(lambda: f64, r: f64) -> C64 {
    debug_assert!(r > 0.0);
    let half = 0.5 * lambda * r;
    C64::new(0.0, 2.0) * C64::new(0.0, half).exp() * half.sin() / (FOUR_PI * r)
}

/// psi_lambda(0+) = i lambda / (4 pi).
pub fn psi_lambda_origin(lambda: f64) -> C64 {
    C64::new(0.0, lambda / FOUR_PI)
}

/// d/dr psi_lambda = i lambda/(4 pi r) + (i lambda - 1/r) psi_lambda(r);
/// bounded near r = 0 with limit -lambda^2/(8 pi).
pub fn dpsi_lambda(lambda: f64, r: f64) -> C64 {
    debug_assert!(r > 0.0);
    if lambda.abs() * r < 1e-5 {
        // Taylor: psi' = -lambda^2/(8 pi) - i lambda^3 r / (12 pi) + O(r^2)
        return C64::new(
            -lambda * lambda / (8.0 * std::f64::consts::PI),
            -lambda.powi(3) * r / (12.0 * std::f64::consts::PI),
        );
    }
    C64::new(0.0, lambda / (FOUR_PI * r)) + (C64::new(0.0, lambda) - 1.0 / r) * psi_lambda(lambda, r)
}

/// grad R_lambda(z) = psi'(|z|) z/|z| (bounded as z -> 0).
pub fn grad_remainder(lambda: f64, z: V3) -> C3 {
    let r = z.norm();
    debug_assert!(r > 0.0);
    let d = dpsi_lambda(lambda, r);
    let zh = z.scale(1.0 / r);
    C3::new(d * zh.x(), d * zh.y(), d * zh.z())
}

/// Newtonian part Gamma_0(z) = 1/(4 pi |z|).
pub fn gamma0(z: V3) -> C64 {
    C64::new(1.0 / (FOUR_PI * z.norm()), 0.0)
}

/// grad Gamma_0(z) = -z / (4 pi |z|^3).
pub fn grad_gamma0(z: V3) -> C3 {
    let r = z.norm();
    let f = -1.0 / (FOUR_PI * r * r * r);
    C3::new(
        C64::new(f * z.x(), 0.0),
        C64::new(f * z.y(), 0.0),
        C64::new(f * z.z(), 0.0),
    )
}

/// Split Gamma_lambda(z) into Gamma_0 and the bounded remainder R_lambda.
pub fn kernel_split(lambda: f64, z: V3) -> Result<KernelSplit> {
    let r = z.norm();
    if r == 0.0 {
        return Err(Error::domain("kernel_split evaluated at z = 0"));
    }
    let hom = C64::new(1.0 / (FOUR_PI * r), 0.0);
    let psi = psi_lambda(lambda, r);
    Ok(KernelSplit {
        homogeneous: hom,
        remainder: psi,
        psi,
    })
}

/// Pointwise Sommerfeld residual grad_a . x/|x| - i lambda a.
pub fn sommerfeld_residual(lambda: f64, a: C64, grad_a: C3, x: V3) -> Result<C64> {
    let r = x.norm();
    if r == 0.0 {
        return Err(Error::domain("sommerfeld_residual requires x != 0"));
    }
    Ok(grad_a.dot_v(x.scale(1.0 / r)) - C64::new(0.0, lambda) * a)
}

/// Pointwise Silver-Muller-Beltrami residual i (x/|x|) x u - u.
pub fn smb_residual(_lambda: f64, u: C3, x: V3) -> Result<C3> {
    let r = x.norm();
    if r == 0.0 {
        return Err(Error::domain("smb_residual requires x != 0"));
    }
    let xh = x.scale(1.0 / r);
    Ok(cross_vc(xh, u).scale(C64::i()) - u)
}
