//! Boundary integral equation (I/2 - T_lambda) xi = mu for the tangential
//! trace of the exterior Beltrami velocity field.
//!
//! T_lambda splits into a magnetic-dipole part and a tangential single-layer
//! part. The dipole integrand is rewritten as
//!   eta(x) x (grad Gamma x xi) = ((eta(x) - eta(y)) . xi) grad Gamma
//!                                - (eta(x) . grad Gamma) xi,
//! which is weakly singular on a smooth surface; the Newtonian parts of the
//! diagonal are fixed by singularity subtraction against the precomputed
//! moments. The system acts on two tangent degrees of freedom per node.

use crate::error::{Error, Result};
use crate::geo::{cross_vc, C3, C64, M3c, V3};
use crate::kernels::{gamma, gamma0, grad_gamma, grad_gamma0, psi_lambda_origin};
use crate::potentials::{pv_grad_scalar_layer, VolumeDensity};
use crate::quadrature::SingularMoments;
use crate::surface::{surface_gradient, SurfaceGrid, SurfaceScalar};
use ndarray::{Array1, Array2, OwnedRepr};
use ndarray_linalg::{FactorizeInto, LUFactorized, Solve, SVDInto};
use rayon::prelude::*;
use std::io::Write;

/// Threaded OpenBLAS kernels use multi-megabyte stack frames in the calling
/// thread; run LAPACK entry points on a dedicated thread with room to spare.
fn with_big_stack<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(64 << 20)
            .spawn_scoped(s, f)
            .expect("spawn linalg thread")
            .join()
            .expect("linalg thread panicked")
    })
}

/// Complex tangent vector density on a grid, ambient coordinates, tangency
/// enforced by projection after linear-algebra steps.
#[derive(Debug, Clone)]
pub struct TangentDensity {
    pub xi: Vec<C3>,
}

impl TangentDensity {
    pub fn zero(n: usize) -> TangentDensity {
        TangentDensity {
            xi: vec![C3::ZERO; n],
        }
    }

    pub fn max_normal_defect(&self, grid: &SurfaceGrid) -> f64 {
        self.xi
            .iter()
            .zip(&grid.normals)
            .map(|(v, n)| v.dot_v(*n).norm() / (1.0 + v.norm()))
            .fold(0.0, f64::max)
    }

    pub fn norm_inf(&self) -> f64 {
        self.xi.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Orthonormal tangent pair per node, from the chart tangents.
#[derive(Debug, Clone)]
pub struct TangentBasis {
    pub t1: Vec<V3>,
    pub t2: Vec<V3>,
}

impl TangentBasis {
    pub fn from_grid(grid: &SurfaceGrid) -> TangentBasis {
        let n = grid.n_nodes();
        let mut t1 = Vec::with_capacity(n);
        let mut t2 = Vec::with_capacity(n);
        for i in 0..n {
            let a = grid.t_theta[i].normalized();
            let b = grid.t_phi[i] - a * grid.t_phi[i].dot(a);
            t1.push(a);
            t2.push(b.normalized());
        }
        TangentBasis { t1, t2 }
    }
}

/// Dense discretization of T_lambda on stacked tangent coefficients.
pub struct BoundaryOperator {
    pub lambda: f64,
    pub n_nodes: usize,
    pub basis: TangentBasis,
    /// (2N x 2N) matrix of T_lambda in the local tangent bases.
    pub t_matrix: Array2<C64>,
    /// Regular-lambda diagnostic computed at assembly.
    pub lambda_flag: LambdaFlag,
}

/// Heuristic surrogate for the paper's "lambda regular" requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaFlag {
    pub regular: bool,
    pub detail: String,
}

/// For a sphere of radius a, lambda is flagged when some j_l(lambda a) nearly
/// vanishes (Dirichlet eigenvalues of the ball are zeros of j_l); deformed
/// surfaces are flagged on pivot collapse during factorization.
pub fn flag_lambda(lambda: f64, grid: &SurfaceGrid) -> LambdaFlag {
    if lambda == 0.0 {
        return LambdaFlag {
            regular: false,
            detail: "lambda = 0 is outside the Beltrami branch".into(),
        };
    }
    if let crate::surface::SurfaceShape::Sphere { radius, .. } = &grid.shape {
        let x = (lambda * radius).abs();
        let j = crate::special::sph_j_upto(10, x);
        for (l, val) in j.iter().enumerate() {
            // j_l has no zeros on (0, l], so smallness there only reflects the
            // x^l prefactor, not eigenvalue proximity.
            if x >= l as f64 && val.abs() < 1e-3 {
                return LambdaFlag {
                    regular: false,
                    detail: format!(
                        "|j_{l}(lambda a)| = {:.2e} < 1e-3: lambda likely near a Dirichlet eigenvalue",
                        val.abs()
                    ),
                };
            }
        }
    }
    LambdaFlag {
        regular: true,
        detail: "no eigenvalue proximity detected".into(),
    }
}

/// Add coeff * [eta]_x (the cross-product matrix) to m.
fn add_cross(m: &mut M3c, coeff: C64, eta: V3) {
    m.0[0][1] -= coeff * eta.z();
    m.0[0][2] += coeff * eta.y();
    m.0[1][0] += coeff * eta.z();
    m.0[1][2] -= coeff * eta.x();
    m.0[2][0] -= coeff * eta.y();
    m.0[2][1] += coeff * eta.x();
}

/// 3x3 ambient kernel block of the rewritten T integrand at (x_i, y_j):
/// grad Gamma (x) (eta_i - eta_j) - (eta_i . grad Gamma) I + lambda Gamma [eta_i]_x.
fn t_block(gl: C3, gam: C64, lambda: f64, eta_i: V3, eta_j: V3) -> M3c {
    let deta = eta_i - eta_j;
    let mut b = M3c::ZERO;
    let eidotg = gl.dot_v(eta_i);
    for a in 0..3 {
        for c in 0..3 {
            b.0[a][c] = gl.0[a] * deta.0[c];
            if a == c {
                b.0[a][c] -= eidotg;
            }
        }
    }
    add_cross(&mut b, gam * lambda, eta_i);
    b
}

/// Assemble the dense T_lambda operator. Requires |lambda| > 0.
pub fn assemble_t(
    lambda: f64,
    grid: &SurfaceGrid,
    moments: &SingularMoments,
) -> Result<BoundaryOperator> {
    if lambda == 0.0 {
        return Err(Error::domain(
            "lambda = 0 (harmonic branch) is not supported by the boundary operator",
        ));
    }
    let n = grid.n_nodes();
    let basis = TangentBasis::from_grid(grid);
    let flag = flag_lambda(lambda, grid);

    // Row-parallel assembly: each worker owns one row block (2 x 2N).
    let rows: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let eta_i = grid.normals[i];
            let xi_pos = grid.nodes[i];
            let mut row = vec![C64::new(0.0, 0.0); 2 * 2 * n];
            // diagonal ambient block accumulates exact-minus-plain moments
            let mut diag = M3c::ZERO;
            // exact Newtonian moments:
            //   term1: G0 (x) eta_i - H^T, term2: -(eta_i . G0) I,
            //   term3: lambda I0 [eta_i]_x
            let g0 = moments.g0[i];
            let h = moments.h[i];
            let d0 = eta_i.dot(g0);
            for a in 0..3 {
                for c in 0..3 {
                    let mut v = g0.0[a] * eta_i.0[c] - h.0[c][a];
                    if a == c {
                        v -= d0;
                    }
                    diag.0[a][c] += C64::new(v, 0.0);
                }
            }
            add_cross(&mut diag, C64::new(lambda * moments.i0[i], 0.0), eta_i);
            // bounded remainder of the single-layer part at the diagonal node
            add_cross(
                &mut diag,
                psi_lambda_origin(lambda) * lambda * grid.weights[i],
                eta_i,
            );

            for j in 0..n {
                if j == i {
                    continue;
                }
                let z = xi_pos - grid.nodes[j];
                let w = grid.weights[j];
                let b = t_block(
                    grad_gamma(lambda, z).unwrap(),
                    gamma(lambda, z).unwrap(),
                    lambda,
                    eta_i,
                    grid.normals[j],
                );
                let b0 = t_block(grad_gamma0(z), gamma0(z), lambda, eta_i, grid.normals[j]);
                // off-diagonal entry: w * B; subtract plain Newtonian moment from diag
                for (a, ta) in [(0usize, basis.t1[i]), (1usize, basis.t2[i])] {
                    for (bidx, tb) in [(0usize, basis.t1[j]), (1usize, basis.t2[j])] {
                        let mut val = C64::new(0.0, 0.0);
                        for r in 0..3 {
                            for c in 0..3 {
                                val += ta.0[r] * b.0[r][c] * tb.0[c];
                            }
                        }
                        row[a * 2 * n + 2 * j + bidx] = val * w;
                    }
                }
                for r in 0..3 {
                    for c in 0..3 {
                        diag.0[r][c] -= b0.0[r][c] * w;
                    }
                }
            }
            // project the accumulated diagonal block
            for (a, ta) in [(0usize, basis.t1[i]), (1usize, basis.t2[i])] {
                for (bidx, tb) in [(0usize, basis.t1[i]), (1usize, basis.t2[i])] {
                    let mut val = C64::new(0.0, 0.0);
                    for r in 0..3 {
                        for c in 0..3 {
                            val += ta.0[r] * diag.0[r][c] * tb.0[c];
                        }
                    }
                    row[a * 2 * n + 2 * i + bidx] += val;
                }
            }
            row
        })
        .collect();

    let mut t_matrix = Array2::zeros((2 * n, 2 * n));
    for (i, row) in rows.into_iter().enumerate() {
        for a in 0..2 {
            for col in 0..2 * n {
                t_matrix[(2 * i + a, col)] = row[a * 2 * n + col];
            }
        }
    }
    Ok(BoundaryOperator {
        lambda,
        n_nodes: n,
        basis,
        t_matrix,
        lambda_flag: flag,
    })
}

impl BoundaryOperator {
    /// Apply T to an ambient tangent density (projects input to the bases).
    pub fn apply(&self, xi: &TangentDensity) -> TangentDensity {
        let n = self.n_nodes;
        let mut coeffs = Array1::zeros(2 * n);
        for i in 0..n {
            coeffs[2 * i] = xi.xi[i].dot_v(self.basis.t1[i]);
            coeffs[2 * i + 1] = xi.xi[i].dot_v(self.basis.t2[i]);
        }
        let out = self.t_matrix.dot(&coeffs);
        let mut res = TangentDensity::zero(n);
        for i in 0..n {
            res.xi[i] =
                self.basis.t1[i].to_c().scale(out[2 * i]) + self.basis.t2[i].to_c().scale(out[2 * i + 1]);
        }
        res
    }

    /// Factorize (I/2 - T) for repeated solves.
    pub fn factorize(&self) -> Result<BieSolver> {
        let n2 = 2 * self.n_nodes;
        let mut a = self.t_matrix.clone();
        a.mapv_inplace(|v| -v);
        for k in 0..n2 {
            a[(k, k)] += 0.5;
        }
        let lu = with_big_stack(move || a.factorize_into())
            .map_err(|e| Error::numerical(format!(
                "LU factorization of I/2 - T failed ({e}); lambda likely irregular for this domain"
            )))?;
        Ok(BieSolver {
            lambda: self.lambda,
            n_nodes: self.n_nodes,
            basis: self.basis.clone(),
            t_matrix: self.t_matrix.clone(),
            lu,
        })
    }

    /// Singular values of the discrete T (compactness diagnostic).
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        let m = self.t_matrix.clone();
        let (_, sv, _) = with_big_stack(move || m.svd_into(false, false))
            .map_err(|e| Error::numerical(format!("SVD failed: {e}")))?;
        Ok(sv.to_vec())
    }

    /// Raw dump: row-major (re, im) f64 pairs of the tangent-basis matrix.
    pub fn dump<W: Write>(&self, out: &mut W) -> Result<()> {
        for v in self.t_matrix.iter() {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Factorized (I/2 - T), reusable across right-hand sides.
pub struct BieSolver {
    pub lambda: f64,
    pub n_nodes: usize,
    pub basis: TangentBasis,
    t_matrix: Array2<C64>,
    lu: LUFactorized<OwnedRepr<C64>>,
}

impl BieSolver {
    /// Solve (I/2 - T) xi = mu with one step of iterative refinement and a
    /// relative-residual guard of 1e-10; the result is re-projected tangent.
    pub fn solve(&self, grid: &SurfaceGrid, mu: &TangentDensity) -> Result<TangentDensity> {
        let n = self.n_nodes;
        let mut rhs = Array1::zeros(2 * n);
        for i in 0..n {
            rhs[2 * i] = mu.xi[i].dot_v(self.basis.t1[i]);
            rhs[2 * i + 1] = mu.xi[i].dot_v(self.basis.t2[i]);
        }
        let rhs_norm = rhs.iter().map(|v: &C64| v.norm_sqr()).sum::<f64>().sqrt();
        let mut sol = with_big_stack(|| self.lu.solve(&rhs))
            .map_err(|e| Error::numerical(format!("BIE solve failed: {e}")))?;
        // apply A = I/2 - T
        let apply = |v: &Array1<C64>| -> Array1<C64> {
            let mut out = with_big_stack(|| self.t_matrix.dot(v));
            out.zip_mut_with(v, |o, vi| *o = 0.5 * vi - *o);
            out
        };
        if rhs_norm > 0.0 {
            let mut resid = apply(&sol);
            resid.zip_mut_with(&rhs, |r, b| *r = b - *r);
            let corr = with_big_stack(|| self.lu.solve(&resid))
                .map_err(|e| Error::numerical(format!("refinement solve failed: {e}")))?;
            sol += &corr;
            let mut resid2 = apply(&sol);
            resid2.zip_mut_with(&rhs, |r, b| *r = b - *r);
            let rel = resid2.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() / rhs_norm;
            if rel > 1e-10 {
                return Err(Error::numerical(format!(
                    "BIE residual {rel:.2e} exceeds 1e-10; lambda likely irregular for this domain"
                )));
            }
        }
        let mut xi = TangentDensity::zero(n);
        for i in 0..n {
            let v = self.basis.t1[i].to_c().scale(sol[2 * i])
                + self.basis.t2[i].to_c().scale(sol[2 * i + 1]);
            // re-project tangent against the grid normal
            let nrm = grid.normals[i];
            xi.xi[i] = v - nrm.to_c().scale(v.dot_v(nrm));
        }
        Ok(xi)
    }
}

/// Right-hand side of the boundary integral equation from data (w, g):
///   mu = eta x [ (1/lambda) int grad Gamma div w - PV int grad Gamma g
///                + int grad Gamma x w + lambda int Gamma w ],
/// the volume terms over the support of w and the PV term over S.
/// With `divergence_free` the div w volume term is dropped (the Grad-Rubin
/// right-hand sides satisfy div(phi u) = 0 identically).
pub fn assemble_mu(
    lambda: f64,
    grid: &SurfaceGrid,
    moments: &SingularMoments,
    w: &VolumeDensity,
    g: &SurfaceScalar,
    divergence_free: bool,
) -> Result<TangentDensity> {
    if lambda == 0.0 {
        return Err(Error::domain("assemble_mu requires lambda != 0"));
    }
    if !w.is_empty() {
        w.validate()?;
        // near-surface volume nodes degrade the surface quadrature
        let min_clearance = grid.spacing * 0.5;
        for p in &w.nodes {
            let d = grid.shape.signed_distance(*p);
            if d.abs() < min_clearance * 0.25 {
                return Err(Error::validation(format!(
                    "volume quadrature node at distance {:.2e} from S (< {:.2e})",
                    d.abs(),
                    min_clearance * 0.25
                )));
            }
        }
    }
    let grad_g = surface_gradient(grid, g)?;
    let n = grid.n_nodes();
    let xi: Vec<C3> = (0..n)
        .into_par_iter()
        .map(|i| {
            let eta = grid.normals[i];
            let x = grid.nodes[i];
            let mut inner =
                pv_grad_scalar_layer(grid, moments, lambda, g, grad_g[i], i).map(|v| -v)?;
            if !w.is_empty() {
                inner += w.curl_potential(lambda, x)?;
                inner += w.potential(lambda, x)?.scale_re(lambda);
                if !divergence_free {
                    inner += w.grad_div_potential(lambda, x)?.scale_re(1.0 / lambda);
                }
            }
            Ok(cross_vc(eta, inner))
        })
        .collect::<Result<Vec<C3>>>()?;
    Ok(TangentDensity { xi })
}
