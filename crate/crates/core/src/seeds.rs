//! Strong Beltrami seed fields from finite Fourier-Bessel series.
//!
//! A series u_hat(x) = sum c_lm f_l(lambda |x|) Y_lm(x/|x|) solves the vector
//! Helmholtz equation componentwise (f_l = j_l regular, h1_l radiating), and
//!   u = curl(curl + lambda) u_hat / (2 lambda^2)
//! is then a Beltrami field with factor lambda. Coefficients live in the real
//! spherical-harmonic basis so real coefficient vectors give real fields.
//!
//! Each (l, m) angular factor is carried as the exact solid-harmonic
//! polynomial r^l Y_lm, so all derivatives up to third order are assembled
//! analytically; no nested finite differences appear in production paths.

use crate::error::{Error, Result};
use crate::field::{curl_from_jacobian, ComplexField};
use crate::geo::{C3, C64, M3c, V3};
use crate::special::{real_solid_harmonic_poly, sph_j_upto, sph_y_upto, TriPoly};
use std::sync::Arc;

pub use crate::special::{sph_bessel, BesselKind, SpecialFunctionTable};

/// Coefficient spec: lambda, max degree, and (l, m, c) triples with complex
/// 3-vector coefficients in the real-Y basis.
#[derive(Debug, Clone)]
pub struct FourierBesselSpec {
    pub lambda: f64,
    pub degree: usize,
    pub coeffs: Vec<(usize, i32, C3)>,
}

impl FourierBesselSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lambda == 0.0 || !self.lambda.is_finite() {
            return Err(Error::config("seed spec requires nonzero finite lambda"));
        }
        for &(l, m, c) in &self.coeffs {
            if l > self.degree {
                return Err(Error::config(format!("coefficient l = {l} exceeds degree")));
            }
            if m.unsigned_abs() as usize > l {
                return Err(Error::config(format!("coefficient |m| > l at (l, m) = ({l}, {m})")));
            }
            if !c.is_finite() {
                return Err(Error::config("coefficient must be finite"));
            }
        }
        Ok(())
    }

    /// All coefficient vectors real: the regular seed field is real-valued.
    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|(_, _, c)| c.im().norm() == 0.0)
    }

    /// Structured-text round trip: `lambda:`, `degree:`, then one
    /// `coeff: l m re_x im_x re_y im_y re_z im_z` line per term.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("lambda: {:.17e}\n", self.lambda));
        s.push_str(&format!("degree: {}\n", self.degree));
        for &(l, m, c) in &self.coeffs {
            s.push_str(&format!(
                "coeff: {} {} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}\n",
                l, m, c.0[0].re, c.0[0].im, c.0[1].re, c.0[1].im, c.0[2].re, c.0[2].im
            ));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<FourierBesselSpec> {
        let mut lambda = None;
        let mut degree = None;
        let mut coeffs = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line
                .split_once(':')
                .ok_or_else(|| Error::config(format!("seed spec line {} missing ':'", ln + 1)))?;
            let rest = rest.trim();
            match key.trim() {
                "lambda" => {
                    lambda = Some(rest.parse::<f64>().map_err(|e| {
                        Error::config(format!("bad lambda on line {}: {e}", ln + 1))
                    })?)
                }
                "degree" => {
                    degree = Some(rest.parse::<usize>().map_err(|e| {
                        Error::config(format!("bad degree on line {}: {e}", ln + 1))
                    })?)
                }
                "coeff" => {
                    let parts: Vec<&str> = rest.split_whitespace().collect();
                    if parts.len() != 8 {
                        return Err(Error::config(format!(
                            "coeff line {} needs 'l m re im re im re im'",
                            ln + 1
                        )));
                    }
                    let l: usize = parts[0]
                        .parse()
                        .map_err(|e| Error::config(format!("bad l on line {}: {e}", ln + 1)))?;
                    let m: i32 = parts[1]
                        .parse()
                        .map_err(|e| Error::config(format!("bad m on line {}: {e}", ln + 1)))?;
                    let nums: Vec<f64> = parts[2..]
                        .iter()
                        .map(|p| p.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::config(format!("bad coeff on line {}: {e}", ln + 1)))?;
                    coeffs.push((
                        l,
                        m,
                        C3::new(
                            C64::new(nums[0], nums[1]),
                            C64::new(nums[2], nums[3]),
                            C64::new(nums[4], nums[5]),
                        ),
                    ));
                }
                other => {
                    return Err(Error::config(format!(
                        "unknown seed spec key '{other}' on line {}",
                        ln + 1
                    )))
                }
            }
        }
        let spec = FourierBesselSpec {
            lambda: lambda.ok_or_else(|| Error::config("seed spec missing lambda"))?,
            degree: degree.ok_or_else(|| Error::config("seed spec missing degree"))?,
            coeffs,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedKind {
    /// j_l radial factors: entire fields, real for real coefficients.
    Regular,
    /// h1_l radial factors: radiating, diverges at the origin.
    Radiating,
}

struct SeedTerm {
    l: usize,
    c: C3,
    s: TriPoly,
    ds: [TriPoly; 3],
    d2s: [[TriPoly; 3]; 3],
    d3s: [[[TriPoly; 3]; 3]; 3],
}

/// Evaluable seed field with analytic derivatives.
pub struct SeedField {
    pub lambda: f64,
    pub kind: SeedKind,
    terms: Vec<SeedTerm>,
    gmax: usize,
}

/// Build the seed sampler u = curl(curl + lambda) u_hat / (2 lambda^2).
pub fn seed_field(spec: &FourierBesselSpec, kind: SeedKind) -> Result<SeedField> {
    spec.validate()?;
    let mut terms = Vec::with_capacity(spec.coeffs.len());
    let mut lmax = 0;
    for &(l, m, c) in &spec.coeffs {
        lmax = lmax.max(l);
        let s = real_solid_harmonic_poly(l, m);
        let ds = [s.diff(0), s.diff(1), s.diff(2)];
        let mut d2s: [[TriPoly; 3]; 3] = Default::default();
        let mut d3s: [[[TriPoly; 3]; 3]; 3] = Default::default();
        for a in 0..3 {
            for b in 0..3 {
                d2s[a][b] = ds[a].diff(b);
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                for e in 0..3 {
                    d3s[a][b][e] = d2s[a][b].diff(e);
                }
            }
        }
        terms.push(SeedTerm {
            l,
            c,
            s,
            ds,
            d2s,
            d3s,
        });
    }
    Ok(SeedField {
        lambda: spec.lambda,
        kind,
        terms,
        gmax: lmax + 3,
    })
}

impl SeedField {
    /// Scaled radial table G_k(z) = z^{-k} f_k(z) for k = 0..=gmax, with
    /// (z^{-k} f_k)' = -z^{-k} f_{k+1} driving all radial derivatives.
    fn g_table(&self, z: f64) -> Result<Vec<C64>> {
        let kmax = self.gmax;
        match self.kind {
            SeedKind::Regular => {
                let mut g = vec![C64::new(0.0, 0.0); kmax + 1];
                if z < 0.1 {
                    // series: j_k(z)/z^k = (1 - u/(2(2k+3)) + u^2/(8(2k+3)(2k+5)) - ...)/(2k+1)!!
                    let u = z * z;
                    let mut dfact = 1.0;
                    for (k, gk) in g.iter_mut().enumerate() {
                        if k > 0 {
                            dfact *= (2 * k + 1) as f64;
                        }
                        let a1 = 2.0 * k as f64 + 3.0;
                        let a2 = a1 + 2.0;
                        let a3 = a2 + 2.0;
                        let series = 1.0 - u / (2.0 * a1) + u * u / (8.0 * a1 * a2)
                            - u * u * u / (48.0 * a1 * a2 * a3);
                        *gk = C64::new(series / dfact, 0.0);
                    }
                } else {
                    let j = sph_j_upto(kmax, z);
                    let mut zk = 1.0;
                    for (k, gk) in g.iter_mut().enumerate() {
                        if k > 0 {
                            zk *= z;
                        }
                        *gk = C64::new(j[k] / zk, 0.0);
                    }
                }
                Ok(g)
            }
            SeedKind::Radiating => {
                if self.lambda < 0.0 {
                    return Err(Error::domain(
                        "radiating seeds require lambda > 0 (real-argument Hankel tables)",
                    ));
                }
                if z < 1e-12 {
                    return Err(Error::domain(
                        "radiating seed diverges at the origin",
                    ));
                }
                let j = sph_j_upto(kmax, z);
                let y = sph_y_upto(kmax, z);
                let mut g = vec![C64::new(0.0, 0.0); kmax + 1];
                let mut zk = 1.0;
                for (k, gk) in g.iter_mut().enumerate() {
                    if k > 0 {
                        zk *= z;
                    }
                    *gk = C64::new(j[k] / zk, y[k] / zk);
                }
                Ok(g)
            }
        }
    }

    /// Field value.
    pub fn eval(&self, x: V3) -> Result<C3> {
        let (u, _) = self.eval_impl(x, false)?;
        Ok(u)
    }

    /// Field value and Jacobian J[i][j] = d u_i / d x_j.
    pub fn eval_with_jacobian(&self, x: V3) -> Result<(C3, M3c)> {
        let (u, j) = self.eval_impl(x, true)?;
        Ok((u, j.unwrap()))
    }

    fn eval_impl(&self, x: V3, want_jac: bool) -> Result<(C3, Option<M3c>)> {
        let lambda = self.lambda;
        let r = x.norm();
        let z = lambda.abs() * r;
        let g = self.g_table(z)?;
        let inv2l2 = 1.0 / (2.0 * lambda * lambda);

        let mut u = C3::ZERO;
        let mut jac = M3c::ZERO;
        for t in &self.terms {
            let l = t.l;
            // Radial factors with G_k(z) = z^{-k} f_k(z), z = |lambda| r:
            //   F = lambda^l G_l,    A1 = F'/r           = -lambda^{l+2} G_{l+1},
            //   A2 = (F''-F'/r)/r^2  = lambda^{l+4} G_{l+2},
            //   A3 = A2'/r           = -lambda^{l+6} G_{l+3}.
            // Signed powers carry the Bessel parity for negative lambda.
            let f = lambda.powi(l as i32) * g[l];
            let a1 = -lambda.powi(l as i32 + 2) * g[l + 1];
            let a2 = lambda.powi(l as i32 + 4) * g[l + 2];
            let a3 = -lambda.powi(l as i32 + 6) * g[l + 3];

            let s = t.s.eval(x);
            let ds = V3::new(t.ds[0].eval(x), t.ds[1].eval(x), t.ds[2].eval(x));
            let mut d2 = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    d2[a][b] = t.d2s[a][b].eval(x);
                }
            }
            let c = t.c;
            let xc = c.dot_v(x); // (x . c)
            let dsc = c.dot_v(ds); // (grad S . c)

            // psi = F S; grad psi = A1 S x + F grad S
            let grad_psi = |a: usize| a1 * s * x.0[a] + f * ds.0[a];
            // Hess psi . c
            let mut hess_c = C3::ZERO;
            for a in 0..3 {
                let mut acc = a2 * s * xc * x.0[a] + a1 * s * c.0[a];
                acc += a1 * (dsc * x.0[a] + xc * ds.0[a]);
                let mut row = C64::new(0.0, 0.0);
                for b in 0..3 {
                    row += c.0[b] * d2[a][b];
                }
                acc += f * row;
                hess_c.0[a] = acc;
            }
            // u term: (Hess psi c + lambda^2 psi c + lambda grad psi x c) / (2 lambda^2)
            let psi = f * s;
            let gp = C3::new(grad_psi(0), grad_psi(1), grad_psi(2));
            let curl_term = C3::new(
                gp.0[1] * c.0[2] - gp.0[2] * c.0[1],
                gp.0[2] * c.0[0] - gp.0[0] * c.0[2],
                gp.0[0] * c.0[1] - gp.0[1] * c.0[0],
            );
            for a in 0..3 {
                u.0[a] += inv2l2
                    * (hess_c.0[a] + lambda * lambda * psi * c.0[a] + lambda * curl_term.0[a]);
            }

            if want_jac {
                // third derivative contraction T[a][d] = T_adb c_b
                let mut d3c = [[C64::new(0.0, 0.0); 3]; 3];
                for a in 0..3 {
                    for d in 0..3 {
                        let mut acc = C64::new(0.0, 0.0);
                        // A3 x_d x_a x_b c_b S + A2 (delta_ad x_b c_b + delta_bd->c_d x_a) S ...
                        acc += a3 * x.0[d] * x.0[a] * xc * s;
                        let delta_ad = if a == d { 1.0 } else { 0.0 };
                        acc += a2 * s * (delta_ad * xc + x.0[a] * c.0[d]);
                        acc += a2 * x.0[a] * xc * ds.0[d];
                        // from d_d(A1 S delta_ab c_b):
                        acc += (a2 * x.0[d] * s + a1 * ds.0[d]) * c.0[a];
                        // from d_d(A1 (x_a dsc + xc ds_a)):
                        acc += a2 * x.0[d] * (x.0[a] * dsc + xc * ds.0[a]);
                        let mut d2row_d = C64::new(0.0, 0.0);
                        let mut d2row_a = C64::new(0.0, 0.0);
                        for b in 0..3 {
                            d2row_d += c.0[b] * d2[d][b];
                            d2row_a += c.0[b] * d2[a][b];
                        }
                        acc += a1 * (delta_ad * dsc + x.0[a] * d2row_d + c.0[d] * ds.0[a] + xc * d2[a][d]);
                        // from d_d(F d2[a][b] c_b):
                        acc += a1 * x.0[d] * d2row_a;
                        let mut d3row = C64::new(0.0, 0.0);
                        for b in 0..3 {
                            d3row += c.0[b] * t.d3s[a][b][d].eval(x);
                        }
                        acc += f * d3row;
                        d3c[a][d] = acc;
                    }
                }
                // d_d u_a = (T_adb c_b + lambda^2 grad_psi_d c_a + lambda (Hess_{.d} x c)_a)/(2 lambda^2)
                for a in 0..3 {
                    for d in 0..3 {
                        // Hessian column d
                        let col = |rowa: usize| -> C64 {
                            a2 * s * x.0[rowa] * x.0[d]
                                + a1 * s * (if rowa == d { 1.0 } else { 0.0 })
                                + a1 * (x.0[rowa] * ds.0[d] + x.0[d] * ds.0[rowa])
                                + f * d2[rowa][d]
                        };
                        let hc = C3::new(col(0), col(1), col(2));
                        let cross = C3::new(
                            hc.0[1] * c.0[2] - hc.0[2] * c.0[1],
                            hc.0[2] * c.0[0] - hc.0[0] * c.0[2],
                            hc.0[0] * c.0[1] - hc.0[1] * c.0[0],
                        );
                        jac.0[a][d] += inv2l2
                            * (d3c[a][d] + lambda * lambda * gp.0[d] * c.0[a] + lambda * cross.0[a]);
                    }
                }
            }
        }
        Ok((u, if want_jac { Some(jac) } else { None }))
    }
}

impl ComplexField for SeedField {
    fn eval(&self, x: V3) -> Result<C3> {
        SeedField::eval(self, x)
    }
    fn jacobian(&self, x: V3) -> Result<M3c> {
        Ok(self.eval_with_jacobian(x)?.1)
    }
}

/// Map a divergence-free Helmholtz solution to a Beltrami field:
/// u = (curl u_hat + lambda u_hat) / (2 lambda).
pub struct HelmholtzToBeltrami {
    pub lambda: f64,
    pub u_hat: Arc<dyn ComplexField>,
}

pub fn helmholtz_to_beltrami(lambda: f64, u_hat: Arc<dyn ComplexField>) -> Result<HelmholtzToBeltrami> {
    if lambda == 0.0 {
        return Err(Error::domain("helmholtz_to_beltrami requires lambda != 0"));
    }
    Ok(HelmholtzToBeltrami { lambda, u_hat })
}

impl ComplexField for HelmholtzToBeltrami {
    fn eval(&self, x: V3) -> Result<C3> {
        let j = self.u_hat.jacobian(x)?;
        let curl = curl_from_jacobian(&j);
        let v = self.u_hat.eval(x)?;
        Ok((curl + v.scale_re(self.lambda)).scale_re(1.0 / (2.0 * self.lambda)))
    }
}
