//! Singular and near-singular surface quadrature.
//!
//! Weakly singular and principal-value integrals over S are computed with a
//! two-part rule: the global product rule times a smooth cutoff that vanishes
//! near the target, plus a local polar patch in a rotated direction frame
//! centered at the target. The polar Jacobian sin(beta) cancels the 1/r
//! singularity, and the uniform (even) alpha rule cancels the odd
//! principal-value part pairwise.
//!
//! The patch machinery integrates closed-form kernels only; density-carrying
//! integrands are handled upstream by singularity subtraction against these
//! moments.

use crate::geo::{C64, M3, V3};
use crate::kernels::FOUR_PI;
use crate::special::gauss_legendre;
use crate::surface::{SurfaceGrid, SurfaceShape};
use rayon::prelude::*;

/// Smooth cutoff: 1 for t <= t0, 0 for t >= 1, C-infinity in between.
pub fn pou_cutoff(t: f64) -> f64 {
    const T0: f64 = 0.35;
    if t <= T0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        // Bruno-Kunyansky style exponential blend.
        let u = (t - T0) / (1.0 - T0);
        let e = (-1.0 / u).exp();
        (2.0 * e / (u - 1.0)).exp()
    }
}

/// Rotated-frame polar patch around a unit direction.
#[derive(Debug, Clone)]
pub struct PolarPatch {
    pub center_dir: V3,
    pub e1: V3,
    pub e2: V3,
    /// Angular window radius (radians).
    pub window: f64,
    pub beta_nodes: Vec<f64>,
    pub beta_weights: Vec<f64>,
    pub alpha_nodes: Vec<f64>,
    pub alpha_weight: f64,
}

impl PolarPatch {
    pub fn new(center_dir: V3, window: f64, n_beta: usize, n_alpha: usize) -> PolarPatch {
        debug_assert!(n_alpha % 2 == 0, "alpha rule must be symmetric");
        let nd = center_dir.normalized();
        let seed = if nd.x().abs() < 0.9 {
            V3::new(1.0, 0.0, 0.0)
        } else {
            V3::new(0.0, 1.0, 0.0)
        };
        let e1 = (seed - nd * seed.dot(nd)).normalized();
        let e2 = nd.cross(e1);
        let (bn, bw) = gauss_legendre(n_beta);
        let beta_nodes: Vec<f64> = bn.iter().map(|t| 0.5 * window * (t + 1.0)).collect();
        let beta_weights: Vec<f64> = bw.iter().map(|w| 0.5 * window * w).collect();
        let alpha_nodes: Vec<f64> = (0..n_alpha)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n_alpha as f64)
            .collect();
        PolarPatch {
            center_dir: nd,
            e1,
            e2,
            window,
            beta_nodes,
            beta_weights,
            alpha_nodes,
            alpha_weight: 2.0 * std::f64::consts::PI / n_alpha as f64,
        }
    }

    pub fn direction(&self, beta: f64, alpha: f64) -> V3 {
        let (sb, cb) = beta.sin_cos();
        let (sa, ca) = alpha.sin_cos();
        self.center_dir * cb + (self.e1 * ca + self.e2 * sa) * sb
    }

    /// Surface point and area element |y_beta x y_alpha| at (beta, alpha).
    pub fn surface_point(&self, shape: &SurfaceShape, beta: f64, alpha: f64) -> (V3, f64) {
        match shape {
            SurfaceShape::Sphere { radius, .. } => {
                let y = shape.point_in_direction(self.direction(beta, alpha));
                (y, radius * radius * beta.sin())
            }
            SurfaceShape::Deformed { .. } => {
                let h = 1e-6;
                let p = |b: f64, a: f64| shape.point_in_direction(self.direction(b, a));
                let y = p(beta, alpha);
                let yb = (p(beta + h, alpha) - p(beta - h, alpha)) * (0.5 / h);
                let ya = (p(beta, alpha + h) - p(beta, alpha - h)) * (0.5 / h);
                (y, yb.cross(ya).norm())
            }
        }
    }

    /// Integrate a closed-form surface integrand over the patch, weighted by
    /// the cutoff: sum w_beta w_alpha J(beta, alpha) chi(beta/window) f(y).
    /// Alpha is the inner accumulation so principal-value pairs cancel.
    pub fn integrate<T, F>(&self, shape: &SurfaceShape, zero: T, mut f: F) -> T
    where
        T: Copy + std::ops::Add<Output = T>,
        F: FnMut(V3, f64) -> T,
    {
        let mut acc = zero;
        for (ib, &beta) in self.beta_nodes.iter().enumerate() {
            let chi = pou_cutoff(beta / self.window);
            if chi == 0.0 {
                continue;
            }
            for &alpha in &self.alpha_nodes {
                let (y, jac) = self.surface_point(shape, beta, alpha);
                let w = self.beta_weights[ib] * self.alpha_weight * jac * chi;
                acc = acc + f(y, w);
            }
        }
        acc
    }
}

/// Angular window for singular targets: a few times the coarsest row spacing.
pub fn default_window(grid: &SurfaceGrid) -> f64 {
    let spacing = std::f64::consts::PI / grid.n_theta as f64;
    (5.0 * spacing).min(1.2)
}

/// Geodesic angle between directions of two points as seen from the center.
fn direction_angle(shape: &SurfaceShape, a: V3, b: V3) -> f64 {
    let da = (a - shape.center()).normalized();
    let db = (b - shape.center()).normalized();
    da.dot(db).clamp(-1.0, 1.0).acos()
}

/// Per-node moments of the Newtonian kernel Gamma_0 over S, used for
/// singularity subtraction in the boundary operators:
///   i0 = int Gamma_0(x_i - y) dS_y
///   g0 = PV int grad_x Gamma_0(x_i - y) dS_y
///   h  = PV int eta(y) (x) grad_x Gamma_0(x_i - y) dS_y   (3x3 per node)
///   m2 = int grad_x Gamma_0(x_i - y) (x) (y - x_i) dS_y   (3x3 per node)
#[derive(Debug, Clone)]
pub struct SingularMoments {
    pub window: f64,
    pub i0: Vec<f64>,
    pub g0: Vec<V3>,
    pub h: Vec<M3>,
    pub m2: Vec<M3>,
}

impl SingularMoments {
    /// D0 = eta(x_i) . g0_i; equals -1/2 on any smooth closed surface.
    pub fn d0(&self, grid: &SurfaceGrid, i: usize) -> f64 {
        grid.normals[i].dot(self.g0[i])
    }
}

struct MomentAccum {
    i0: f64,
    g0: V3,
    h: M3,
    m2: M3,
}

impl std::ops::Add for MomentAccum {
    type Output = MomentAccum;
    fn add(self, o: MomentAccum) -> MomentAccum {
        let mut h = self.h;
        let mut m2 = self.m2;
        for a in 0..3 {
            for b in 0..3 {
                h.0[a][b] += o.h.0[a][b];
                m2.0[a][b] += o.m2.0[a][b];
            }
        }
        MomentAccum {
            i0: self.i0 + o.i0,
            g0: self.g0 + o.g0,
            h,
            m2,
        }
    }
}

impl Copy for MomentAccum {}
impl Clone for MomentAccum {
    fn clone(&self) -> Self {
        *self
    }
}

fn moment_kernels(x: V3, y: V3, eta_y: V3, w: f64) -> MomentAccum {
    let z = x - y;
    let r = z.norm();
    let g0val = w / (FOUR_PI * r);
    let gfac = -w / (FOUR_PI * r * r * r);
    let grad = z * gfac;
    let mut h = M3::ZERO;
    let mut m2 = M3::ZERO;
    let d = y - x;
    for a in 0..3 {
        for b in 0..3 {
            h.0[a][b] = eta_y.0[a] * grad.0[b];
            m2.0[a][b] = grad.0[a] * d.0[b];
        }
    }
    MomentAccum {
        i0: g0val,
        g0: grad,
        h,
        m2,
    }
}

/// Compute the Newtonian moments at every grid node with the cutoff-blended
/// global rule plus a rotated polar patch.
pub fn compute_moments(grid: &SurfaceGrid, n_beta: usize, n_alpha: usize) -> SingularMoments {
    let window = default_window(grid);
    let n = grid.n_nodes();
    let results: Vec<MomentAccum> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = grid.nodes[i];
            let dir_i = (xi - grid.shape.center()).normalized();
            let zero = MomentAccum {
                i0: 0.0,
                g0: V3::ZERO,
                h: M3::ZERO,
                m2: M3::ZERO,
            };
            // Global part with cutoff complement.
            let mut acc = zero;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let ang = direction_angle(&grid.shape, xi, grid.nodes[j]);
                let chi = pou_cutoff(ang / window);
                if chi >= 1.0 {
                    continue;
                }
                let w = grid.weights[j] * (1.0 - chi);
                acc = acc + moment_kernels(xi, grid.nodes[j], grid.normals[j], w);
            }
            // Local polar patch around the target direction.
            let patch = PolarPatch::new(dir_i, window, n_beta, n_alpha);
            let local = patch.integrate(&grid.shape, zero, |y, w| {
                let ang = direction_angle(&grid.shape, xi, y);
                // normal at the patch point
                let dy = (y - grid.shape.center()).normalized();
                let theta = dy.z().acos();
                let phi = dy.y().atan2(dy.x());
                let eta_y = grid.shape.chart_normal(theta, phi);
                let _ = ang;
                moment_kernels(xi, y, eta_y, w)
            });
            acc + local
        })
        .collect();

    let mut i0 = Vec::with_capacity(n);
    let mut g0 = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    let mut m2 = Vec::with_capacity(n);
    for r in results {
        i0.push(r.i0);
        g0.push(r.g0);
        h.push(r.h);
        m2.push(r.m2);
    }
    SingularMoments {
        window,
        i0,
        g0,
        h,
        m2,
    }
}

/// Bilinear interpolation of node data in chart coordinates (periodic in phi,
/// clamped to the first/last Gauss row in theta).
pub fn interp_scalar(grid: &SurfaceGrid, data: &[C64], theta: f64, phi: f64) -> C64 {
    let (it, jt, wt, jp, kp, wp) = interp_stencil(grid, theta, phi);
    let np = grid.n_phi;
    let f = |row: usize, col: usize| data[row * np + col];
    f(it, jp) * ((1.0 - wt) * (1.0 - wp))
        + f(it, kp) * ((1.0 - wt) * wp)
        + f(jt, jp) * (wt * (1.0 - wp))
        + f(jt, kp) * (wt * wp)
}

pub fn interp_vector(grid: &SurfaceGrid, data: &[crate::geo::C3], theta: f64, phi: f64) -> crate::geo::C3 {
    let (it, jt, wt, jp, kp, wp) = interp_stencil(grid, theta, phi);
    let np = grid.n_phi;
    let f = |row: usize, col: usize| data[row * np + col];
    f(it, jp).scale_re((1.0 - wt) * (1.0 - wp))
        + f(it, kp).scale_re((1.0 - wt) * wp)
        + f(jt, jp).scale_re(wt * (1.0 - wp))
        + f(jt, kp).scale_re(wt * wp)
}

fn interp_stencil(
    grid: &SurfaceGrid,
    theta: f64,
    phi: f64,
) -> (usize, usize, f64, usize, usize, f64) {
    let th = &grid.theta_nodes;
    let nt = grid.n_theta;
    let (it, jt, wt) = if theta <= th[0] {
        (0, 0, 0.0)
    } else if theta >= th[nt - 1] {
        (nt - 1, nt - 1, 0.0)
    } else {
        let mut lo = 0;
        let mut hi = nt - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if th[mid] <= theta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, hi, (theta - th[lo]) / (th[hi] - th[lo]))
    };
    let np = grid.n_phi;
    let dphi = 2.0 * std::f64::consts::PI / np as f64;
    let p = phi.rem_euclid(2.0 * std::f64::consts::PI);
    let jp = (p / dphi).floor() as usize % np;
    let kp = (jp + 1) % np;
    let wp = (p - jp as f64 * dphi) / dphi;
    (it, jt, wt, jp, kp, wp)
}
