//! Discrete closed genus-0 boundary surfaces: product quadrature grids
//! (Gauss-Legendre in cos(theta), uniform periodic in phi), chart-based
//! surface differential operators, and boundary patches.

use crate::error::{Error, Result};
use crate::geo::{C3, C64, V3};
use crate::special::{fd_weights, gauss_legendre};
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

/// Radial profile of a star-shaped surface: direction (unit vector) -> radius.
pub type RadialProfile = Arc<dyn Fn(V3) -> f64 + Send + Sync>;

/// Geometry of the boundary, evaluable at arbitrary chart points.
#[derive(Clone)]
pub enum SurfaceShape {
    Sphere { center: V3, radius: f64 },
    Deformed { center: V3, profile: RadialProfile },
}

impl std::fmt::Debug for SurfaceShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SurfaceShape::Sphere { center, radius } => f
                .debug_struct("Sphere")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            SurfaceShape::Deformed { center, .. } => {
                f.debug_struct("Deformed").field("center", center).finish()
            }
        }
    }
}

impl SurfaceShape {
    pub fn center(&self) -> V3 {
        match self {
            SurfaceShape::Sphere { center, .. } => *center,
            SurfaceShape::Deformed { center, .. } => *center,
        }
    }

    pub fn radius_in_direction(&self, dir: V3) -> f64 {
        match self {
            SurfaceShape::Sphere { radius, .. } => *radius,
            SurfaceShape::Deformed { profile, .. } => profile(dir),
        }
    }

    /// Point on the surface in a given unit direction from the center.
    pub fn point_in_direction(&self, dir: V3) -> V3 {
        self.center() + dir * self.radius_in_direction(dir)
    }

    /// Signed distance surrogate: negative inside the bounded domain G,
    /// zero on S, positive in the exterior. Exact zero set for star shapes.
    pub fn signed_distance(&self, x: V3) -> f64 {
        let d = x - self.center();
        let r = d.norm();
        if r == 0.0 {
            return -self.radius_in_direction(V3::new(0.0, 0.0, 1.0));
        }
        r - self.radius_in_direction(d.scale(1.0 / r))
    }

    fn chart_point(&self, theta: f64, phi: f64) -> V3 {
        let dir = V3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        self.point_in_direction(dir)
    }

    /// Position and chart tangents d/dtheta, d/dphi at (theta, phi).
    /// Analytic for the sphere; centered differences on the profile otherwise.
    pub fn chart_frame(&self, theta: f64, phi: f64) -> (V3, V3, V3) {
        match self {
            SurfaceShape::Sphere { center, radius } => {
                let (st, ct) = theta.sin_cos();
                let (sp, cp) = phi.sin_cos();
                let dir = V3::new(st * cp, st * sp, ct);
                let t_theta = V3::new(ct * cp, ct * sp, -st) * *radius;
                let t_phi = V3::new(-st * sp, st * cp, 0.0) * *radius;
                (*center + dir * *radius, t_theta, t_phi)
            }
            SurfaceShape::Deformed { .. } => {
                let h = 1e-6;
                let p = self.chart_point(theta, phi);
                let t_theta =
                    (self.chart_point(theta + h, phi) - self.chart_point(theta - h, phi))
                        * (0.5 / h);
                let t_phi = (self.chart_point(theta, phi + h) - self.chart_point(theta, phi - h))
                    * (0.5 / h);
                (p, t_theta, t_phi)
            }
        }
    }

    /// Outward unit normal at (theta, phi).
    pub fn chart_normal(&self, theta: f64, phi: f64) -> V3 {
        let (p, t1, t2) = self.chart_frame(theta, phi);
        let mut n = t1.cross(t2).normalized();
        if n.dot(p - self.center()) < 0.0 {
            n = -n;
        }
        n
    }
}

/// Per-node complex scalar samples on a grid.
pub type SurfaceScalar = Vec<C64>;
/// Per-node complex tangent vector samples.
pub type SurfaceTangentField = Vec<C3>;

/// Quadrature discretization of the boundary surface S.
#[derive(Debug, Clone)]
pub struct SurfaceGrid {
    pub shape: SurfaceShape,
    pub n_theta: usize,
    pub n_phi: usize,
    /// theta values of the Gauss rows (arccos of Gauss-Legendre nodes), increasing.
    pub theta_nodes: Vec<f64>,
    pub phi_nodes: Vec<f64>,
    /// Gauss-Legendre weights in t = cos(theta) per row.
    pub t_weights: Vec<f64>,
    pub nodes: Vec<V3>,
    pub normals: Vec<V3>,
    pub weights: Vec<f64>,
    /// Chart coordinates (theta, phi) per node.
    pub chart_coords: Vec<(f64, f64)>,
    /// First fundamental form (E, F, G) per node.
    pub metric: Vec<(f64, f64, f64)>,
    /// Chart tangent vectors d/dtheta and d/dphi per node.
    pub t_theta: Vec<V3>,
    pub t_phi: Vec<V3>,
    /// Representative node spacing sqrt(max weight).
    pub spacing: f64,
}

impl SurfaceGrid {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn node_index(&self, i_theta: usize, i_phi: usize) -> usize {
        i_theta * self.n_phi + i_phi
    }

    fn build(shape: SurfaceShape, n_theta: usize, n_phi: usize) -> Result<SurfaceGrid> {
        if n_theta < 8 || n_phi < 16 {
            return Err(Error::config(format!(
                "grid resolution {n_theta}x{n_phi} below minimum 8x16"
            )));
        }
        let (t_nodes, t_weights) = gauss_legendre(n_theta);
        // t = cos(theta) increasing means theta decreasing; store rows by increasing theta.
        let theta_nodes: Vec<f64> = t_nodes.iter().rev().map(|t| t.acos()).collect();
        let t_weights: Vec<f64> = t_weights.iter().rev().copied().collect();
        let dphi = 2.0 * PI / n_phi as f64;
        let phi_nodes: Vec<f64> = (0..n_phi).map(|j| j as f64 * dphi).collect();

        let n = n_theta * n_phi;
        let mut nodes = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut chart_coords = Vec::with_capacity(n);
        let mut metric = Vec::with_capacity(n);
        let mut tt = Vec::with_capacity(n);
        let mut tp = Vec::with_capacity(n);

        for (it, &theta) in theta_nodes.iter().enumerate() {
            let st = theta.sin();
            for &phi in &phi_nodes {
                let (p, t1, t2) = shape.chart_frame(theta, phi);
                let mut nrm = t1.cross(t2);
                let w_area = nrm.norm();
                if w_area <= 0.0 {
                    return Err(Error::config("degenerate chart frame on surface grid"));
                }
                nrm = nrm.scale(1.0 / w_area);
                if nrm.dot(p - shape.center()) < 0.0 {
                    nrm = -nrm;
                }
                // dS = |t1 x t2| dtheta dphi = |t1 x t2|/sin(theta) dt dphi
                let w = w_area / st * t_weights[it] * dphi;
                nodes.push(p);
                normals.push(nrm);
                weights.push(w);
                chart_coords.push((theta, phi));
                metric.push((t1.dot(t1), t1.dot(t2), t2.dot(t2)));
                tt.push(t1);
                tp.push(t2);
            }
        }
        let spacing = weights.iter().fold(0.0_f64, |a, &w| a.max(w)).sqrt();
        Ok(SurfaceGrid {
            shape,
            n_theta,
            n_phi,
            theta_nodes,
            phi_nodes,
            t_weights,
            nodes,
            normals,
            weights,
            chart_coords,
            metric,
            t_theta: tt,
            t_phi: tp,
            spacing,
        })
    }
}

/// Product grid on a sphere: exact normals, product Gauss weights.
pub fn make_sphere_grid(center: V3, radius: f64, n_theta: usize, n_phi: usize) -> Result<SurfaceGrid> {
    if !(radius > 0.0) {
        return Err(Error::config("sphere radius must be positive"));
    }
    SurfaceGrid::build(SurfaceShape::Sphere { center, radius }, n_theta, n_phi)
}

/// Grid on a star-shaped deformed sphere r(direction) * direction.
pub fn make_deformed_sphere_grid(
    profile: RadialProfile,
    n_theta: usize,
    n_phi: usize,
) -> Result<SurfaceGrid> {
    // sample a few directions to validate positivity
    for k in 0..32 {
        let theta = PI * (k as f64 + 0.5) / 32.0;
        let phi = 2.0 * PI * (k as f64) / 32.0;
        let dir = V3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        if !(profile(dir) > 0.0) {
            return Err(Error::config("radial profile must be positive everywhere"));
        }
    }
    SurfaceGrid::build(
        SurfaceShape::Deformed {
            center: V3::ZERO,
            profile,
        },
        n_theta,
        n_phi,
    )
}

/// Weighted sum over the grid.
pub fn integrate_surface(grid: &SurfaceGrid, f: &[C64]) -> C64 {
    grid.weights
        .iter()
        .zip(f)
        .map(|(w, v)| *v * *w)
        .fold(C64::new(0.0, 0.0), |a, b| a + b)
}

pub fn integrate_surface_vector(grid: &SurfaceGrid, f: &[C3]) -> C3 {
    let mut acc = C3::ZERO;
    for (w, v) in grid.weights.iter().zip(f) {
        acc += v.scale_re(*w);
    }
    acc
}

/// Partial derivative along theta of node data, 5-point stencils on the
/// non-uniform Gauss rows (one-sided near the endpoints).
fn d_dtheta(grid: &SurfaceGrid, f: &[C64]) -> Vec<C64> {
    let nt = grid.n_theta;
    let np = grid.n_phi;
    let width = 5.min(nt);
    let mut out = vec![C64::new(0.0, 0.0); f.len()];
    // Precompute stencil windows and weights per row.
    let mut stencils: Vec<(usize, Vec<f64>)> = Vec::with_capacity(nt);
    for it in 0..nt {
        let lo = it.saturating_sub(width / 2).min(nt - width);
        let window: Vec<f64> = grid.theta_nodes[lo..lo + width].to_vec();
        let w = fd_weights(grid.theta_nodes[it], &window, 1);
        stencils.push((lo, w));
    }
    for it in 0..nt {
        let (lo, w) = &stencils[it];
        for jp in 0..np {
            let mut acc = C64::new(0.0, 0.0);
            for (k, wk) in w.iter().enumerate() {
                acc += f[(lo + k) * np + jp] * *wk;
            }
            out[it * np + jp] = acc;
        }
    }
    out
}

/// Partial derivative along phi: 4th-order centered, periodic.
fn d_dphi(grid: &SurfaceGrid, f: &[C64]) -> Vec<C64> {
    let nt = grid.n_theta;
    let np = grid.n_phi;
    let h = 2.0 * PI / np as f64;
    let mut out = vec![C64::new(0.0, 0.0); f.len()];
    for it in 0..nt {
        let row = it * np;
        for jp in 0..np {
            let jm2 = (jp + np - 2) % np;
            let jm1 = (jp + np - 1) % np;
            let jp1 = (jp + 1) % np;
            let jp2 = (jp + 2) % np;
            out[row + jp] = (f[row + jm2] - f[row + jm1] * 8.0 + f[row + jp1] * 8.0
                - f[row + jp2])
                / (12.0 * h);
        }
    }
    out
}

/// Surface gradient via the first fundamental form:
/// grad_S f = ((G f_t - F f_p) t_theta + (E f_p - F f_t) t_phi) / (EG - F^2).
pub fn surface_gradient(grid: &SurfaceGrid, f: &[C64]) -> Result<SurfaceTangentField> {
    if f.len() != grid.n_nodes() {
        return Err(Error::validation("scalar field length mismatch"));
    }
    let ft = d_dtheta(grid, f);
    let fp = d_dphi(grid, f);
    let mut out = Vec::with_capacity(f.len());
    for i in 0..f.len() {
        let (e, ff, g) = grid.metric[i];
        let w2 = e * g - ff * ff;
        let a = (ft[i] * g - fp[i] * ff) / w2;
        let b = (fp[i] * e - ft[i] * ff) / w2;
        out.push(grid.t_theta[i].to_c().scale(a) + grid.t_phi[i].to_c().scale(b));
    }
    Ok(out)
}

fn check_tangent(grid: &SurfaceGrid, x: &[C3]) -> Result<()> {
    for (i, v) in x.iter().enumerate() {
        let nt = v.dot_v(grid.normals[i]).norm();
        if nt > 1e-8 * (1.0 + v.norm()) {
            return Err(Error::validation(format!(
                "field not tangent at node {i}: |X.n| = {nt:.3e}"
            )));
        }
    }
    Ok(())
}

/// Surface divergence div_S X = (1/W) (d/dtheta (W X^theta) + d/dphi (W X^phi))
/// with contravariant components from the inverse metric.
pub fn surface_divergence(grid: &SurfaceGrid, x: &[C3]) -> Result<SurfaceScalar> {
    if x.len() != grid.n_nodes() {
        return Err(Error::validation("tangent field length mismatch"));
    }
    check_tangent(grid, x)?;
    let n = grid.n_nodes();
    let mut wx1 = vec![C64::new(0.0, 0.0); n];
    let mut wx2 = vec![C64::new(0.0, 0.0); n];
    let mut winv = vec![0.0; n];
    for i in 0..n {
        let (e, ff, g) = grid.metric[i];
        let w = (e * g - ff * ff).sqrt();
        let a1 = x[i].dot_v(grid.t_theta[i]);
        let a2 = x[i].dot_v(grid.t_phi[i]);
        let x1 = (a1 * g - a2 * ff) / (w * w);
        let x2 = (a2 * e - a1 * ff) / (w * w);
        wx1[i] = x1 * w;
        wx2[i] = x2 * w;
        winv[i] = 1.0 / w;
    }
    let d1 = d_dtheta(grid, &wx1);
    let d2 = d_dphi(grid, &wx2);
    Ok((0..n).map(|i| (d1[i] + d2[i]) * winv[i]).collect())
}

/// Surface curl curl_S X = (1/W) (d/dtheta (X . t_phi) - d/dphi (X . t_theta)).
pub fn surface_curl(grid: &SurfaceGrid, x: &[C3]) -> Result<SurfaceScalar> {
    if x.len() != grid.n_nodes() {
        return Err(Error::validation("tangent field length mismatch"));
    }
    check_tangent(grid, x)?;
    let n = grid.n_nodes();
    let a1: Vec<C64> = (0..n).map(|i| x[i].dot_v(grid.t_theta[i])).collect();
    let a2: Vec<C64> = (0..n).map(|i| x[i].dot_v(grid.t_phi[i])).collect();
    let d1 = d_dtheta(grid, &a2);
    let d2 = d_dphi(grid, &a1);
    Ok((0..n)
        .map(|i| {
            let (e, ff, g) = grid.metric[i];
            let w = (e * g - ff * ff).sqrt();
            (d1[i] - d2[i]) / w
        })
        .collect())
}

/// Project an ambient vector field sample onto the tangent plane at each node.
pub fn project_tangent(grid: &SurfaceGrid, x: &[C3]) -> SurfaceTangentField {
    x.iter()
        .zip(&grid.normals)
        .map(|(v, n)| {
            let vn = v.dot_v(*n);
            *v - n.to_c().scale(vn)
        })
        .collect()
}

/// Export the grid in CSV (x,y,z,nx,ny,nz,w) with 17 significant digits.
pub fn export_grid_csv<W: Write>(grid: &SurfaceGrid, out: &mut W) -> Result<()> {
    writeln!(out, "x,y,z,nx,ny,nz,w")?;
    for i in 0..grid.n_nodes() {
        let p = grid.nodes[i];
        let n = grid.normals[i];
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.x(),
            p.y(),
            p.z(),
            n.x(),
            n.y(),
            n.z(),
            grid.weights[i]
        )?;
    }
    Ok(())
}

/// Open boundary patch: a geodesic cap around a center direction, with an
/// azimuthal-equidistant disk chart s in D(0, cap_radius) -> S.
#[derive(Debug, Clone)]
pub struct SurfacePatch {
    pub shape: SurfaceShape,
    /// Unit direction of the cap center.
    pub center_dir: V3,
    /// Angular radius of the cap (radians).
    pub cap_radius: f64,
    /// Orthonormal frame (e1, e2) spanning the plane orthogonal to center_dir,
    /// with e1 x e2 = center_dir.
    pub e1: V3,
    pub e2: V3,
    /// Indices of parent-grid nodes inside the cap.
    pub node_subset: Vec<usize>,
}

impl SurfacePatch {
    pub fn cap(grid: &SurfaceGrid, center_dir: V3, cap_radius: f64) -> Result<SurfacePatch> {
        if !(cap_radius > 0.0 && cap_radius < PI / 2.0) {
            return Err(Error::config("cap radius must lie in (0, pi/2)"));
        }
        let nd = center_dir.normalized();
        let seed = if nd.x().abs() < 0.9 {
            V3::new(1.0, 0.0, 0.0)
        } else {
            V3::new(0.0, 1.0, 0.0)
        };
        let e1 = (seed - nd * seed.dot(nd)).normalized();
        let e2 = nd.cross(e1);
        let node_subset = grid
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                let d = (**p - grid.shape.center()).normalized();
                d.dot(nd).acos() < cap_radius
            })
            .map(|(i, _)| i)
            .collect::<Vec<_>>();
        if node_subset.is_empty() {
            return Err(Error::config("cap patch contains no grid nodes"));
        }
        Ok(SurfacePatch {
            shape: grid.shape.clone(),
            center_dir: nd,
            cap_radius,
            e1,
            e2,
            node_subset,
        })
    }

    /// Direction on the unit sphere for chart coordinates s = (s1, s2), |s| < cap_radius.
    pub fn direction(&self, s: [f64; 2]) -> V3 {
        let beta = (s[0] * s[0] + s[1] * s[1]).sqrt();
        if beta == 0.0 {
            return self.center_dir;
        }
        let (c1, c2) = (s[0] / beta, s[1] / beta);
        self.center_dir * beta.cos() + (self.e1 * c1 + self.e2 * c2) * beta.sin()
    }

    /// Chart map mu: D -> S.
    pub fn chart(&self, s: [f64; 2]) -> V3 {
        self.shape.point_in_direction(self.direction(s))
    }

    /// Chart tangents d mu/d s1, d mu/d s2 by centered differences.
    pub fn chart_tangents(&self, s: [f64; 2]) -> (V3, V3) {
        let h = 1e-6;
        let d1 = (self.chart([s[0] + h, s[1]]) - self.chart([s[0] - h, s[1]])) * (0.5 / h);
        let d2 = (self.chart([s[0], s[1] + h]) - self.chart([s[0], s[1] - h])) * (0.5 / h);
        (d1, d2)
    }

    /// Inverse chart for a point on S (by direction): None if outside the cap.
    pub fn chart_coords_of(&self, x: V3) -> Option<[f64; 2]> {
        let d = (x - self.shape.center()).normalized();
        let beta = d.dot(self.center_dir).clamp(-1.0, 1.0).acos();
        if beta >= self.cap_radius {
            return None;
        }
        let p1 = d.dot(self.e1);
        let p2 = d.dot(self.e2);
        let pn = (p1 * p1 + p2 * p2).sqrt();
        if pn < 1e-300 {
            return Some([0.0, 0.0]);
        }
        Some([beta * p1 / pn, beta * p2 / pn])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_sphere(nt: usize, np: usize) -> SurfaceGrid {
        make_sphere_grid(V3::ZERO, 1.0, nt, np).unwrap()
    }

    #[test]
    fn sphere_area_and_normal_flux() {
        let g = unit_sphere(32, 64);
        let area: f64 = g.weights.iter().sum();
        assert_abs_diff_eq!(area, 4.0 * PI, epsilon = 4.0 * PI * 1e-12);
        let ones = vec![C64::new(1.0, 0.0); g.n_nodes()];
        let total = integrate_surface(&g, &ones);
        assert_abs_diff_eq!(total.re, 4.0 * PI, epsilon = 1e-10);
        // integral of the normal over a closed surface vanishes
        let nflux: Vec<C3> = g.normals.iter().map(|n| n.to_c()).collect();
        let flux = integrate_surface_vector(&g, &nflux);
        assert!(flux.norm() < 1e-12);
    }

    #[test]
    fn second_moment_z() {
        let g = unit_sphere(32, 64);
        let f: Vec<C64> = g.nodes.iter().map(|p| C64::new(p.z() * p.z(), 0.0)).collect();
        let m = integrate_surface(&g, &f);
        assert_abs_diff_eq!(m.re, 4.0 * PI / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn odd_function_integrates_to_zero() {
        let g = unit_sphere(16, 32);
        let f: Vec<C64> = g.nodes.iter().map(|p| C64::new(p.z(), 0.0)).collect();
        assert!(integrate_surface(&g, &f).norm() < 1e-12);
    }

    #[test]
    fn deformed_profile_identity_matches_sphere() {
        let g1 = unit_sphere(16, 32);
        let g2 = make_deformed_sphere_grid(Arc::new(|_| 1.0), 16, 32).unwrap();
        for i in 0..g1.n_nodes() {
            assert!((g1.nodes[i] - g2.nodes[i]).norm() < 1e-9);
            assert!((g1.normals[i] - g2.normals[i]).norm() < 1e-7);
            assert!((g1.weights[i] - g2.weights[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn deformed_bump_normals_unit_and_area_bound() {
        let profile: RadialProfile =
            Arc::new(|d: V3| 1.0 + 0.1 * d.z() * d.z() * (1.0 - d.z() * d.z()));
        let g = make_deformed_sphere_grid(profile, 24, 48).unwrap();
        for n in &g.normals {
            assert_abs_diff_eq!(n.norm(), 1.0, epsilon = 1e-10);
        }
        let area: f64 = g.weights.iter().sum();
        assert!(area > 4.0 * PI, "bump area {area} should exceed 4 pi min r^2");
    }

    #[test]
    fn no_pole_nodes_and_positive_metric() {
        let g = unit_sphere(16, 32);
        for &(theta, _) in &g.chart_coords {
            assert!(theta > 0.0 && theta < PI);
        }
        for &(e, f, gg) in &g.metric {
            assert!(e * gg - f * f > 0.0);
        }
    }

    #[test]
    fn gradient_of_constant_vanishes_and_linearity() {
        let g = unit_sphere(16, 32);
        let f = vec![C64::new(3.5, -1.0); g.n_nodes()];
        let gr = surface_gradient(&g, &f).unwrap();
        for v in &gr {
            assert!(v.norm() < 1e-10);
        }
        // linearity: grad(2 f1 + f2) = 2 grad f1 + grad f2
        let f1: Vec<C64> = g.nodes.iter().map(|p| C64::new(p.z(), 0.0)).collect();
        let f2: Vec<C64> = g.nodes.iter().map(|p| C64::new(p.x() * p.y(), 0.0)).collect();
        let combo: Vec<C64> = f1.iter().zip(&f2).map(|(a, b)| *a * 2.0 + *b).collect();
        let g1 = surface_gradient(&g, &f1).unwrap();
        let g2 = surface_gradient(&g, &f2).unwrap();
        let gc = surface_gradient(&g, &combo).unwrap();
        for i in 0..g.n_nodes() {
            let expect = g1[i].scale_re(2.0) + g2[i];
            assert!((gc[i] - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn gradient_matches_tangential_projection() {
        // f = z on the unit sphere: grad_S f = e3 - (e3.n) n, within O(h^2).
        let g = unit_sphere(32, 64);
        let f: Vec<C64> = g.nodes.iter().map(|p| C64::new(p.z(), 0.0)).collect();
        let gr = surface_gradient(&g, &f).unwrap();
        let e3 = V3::new(0.0, 0.0, 1.0);
        let mut worst: f64 = 0.0;
        for i in 0..g.n_nodes() {
            let n = g.normals[i];
            let expect = (e3 - n * e3.dot(n)).to_c();
            worst = worst.max((gr[i] - expect).norm());
        }
        assert!(worst < 1e-4, "worst tangential projection error {worst}");
    }

    #[test]
    fn closed_surface_divergence_integrates_to_zero() {
        let g = unit_sphere(24, 48);
        // tangential projection of a smooth ambient field
        let x: Vec<C3> = g
            .nodes
            .iter()
            .zip(&g.normals)
            .map(|(p, n)| {
                let amb = V3::new(p.y(), p.z() * p.x(), -p.x());
                (amb - *n * amb.dot(*n)).to_c()
            })
            .collect();
        let div = surface_divergence(&g, &x).unwrap();
        let total = integrate_surface(&g, &div);
        assert!(total.norm() < 1e-8, "total divergence {}", total.norm());
    }

    #[test]
    fn curl_of_surface_gradient_vanishes() {
        let g = unit_sphere(64, 128);
        let f: Vec<C64> = g.nodes.iter().map(|p| C64::new(p.z(), 0.0)).collect();
        let gr = surface_gradient(&g, &f).unwrap();
        let c = surface_curl(&g, &gr).unwrap();
        let worst = c.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
        assert!(worst < 1e-6, "max |curl_S grad_S f| = {worst}");
    }

    #[test]
    fn curl_equals_minus_div_of_rotated() {
        // curl_S X = -div_S (n x X) nodewise.
        let g = unit_sphere(32, 64);
        let x: Vec<C3> = g
            .nodes
            .iter()
            .zip(&g.normals)
            .map(|(p, n)| {
                let amb = V3::new(p.z(), p.x(), p.y() * p.y());
                (amb - *n * amb.dot(*n)).to_c()
            })
            .collect();
        let rot: Vec<C3> = x
            .iter()
            .zip(&g.normals)
            .map(|(v, n)| crate::geo::cross_vc(*n, *v))
            .collect();
        let c = surface_curl(&g, &x).unwrap();
        let d = surface_divergence(&g, &rot).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..g.n_nodes() {
            worst = worst.max((c[i] + d[i]).norm());
        }
        assert!(worst < 1e-8, "max |curl_S X + div_S(n x X)| = {worst}");
    }

    #[test]
    fn div_of_rotated_gradient_vanishes() {
        let g = unit_sphere(64, 128);
        let f: Vec<C64> = g.nodes.iter().map(|p| C64::new(p.z(), 0.0)).collect();
        let gr = surface_gradient(&g, &f).unwrap();
        let rot: Vec<C3> = gr
            .iter()
            .zip(&g.normals)
            .map(|(v, n)| crate::geo::cross_vc(*n, *v))
            .collect();
        let d = surface_divergence(&g, &rot).unwrap();
        let worst = d.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
        assert!(worst < 1e-6, "max |div_S(n x grad_S f)| = {worst}");
    }

    #[test]
    fn refinement_improves_surface_operators() {
        // error in grad_S(z) against the closed form at two resolutions
        let err = |nt: usize, np: usize| -> f64 {
            let g = unit_sphere(nt, np);
            let f: Vec<C64> = g.nodes.iter().map(|p| C64::new(p.z(), 0.0)).collect();
            let gr = surface_gradient(&g, &f).unwrap();
            let e3 = V3::new(0.0, 0.0, 1.0);
            let mut worst: f64 = 0.0;
            for i in 0..g.n_nodes() {
                let n = g.normals[i];
                let expect = (e3 - n * e3.dot(n)).to_c();
                worst = worst.max((gr[i] - expect).norm());
            }
            worst
        };
        let e1 = err(32, 64);
        let e2 = err(64, 128);
        assert!(
            e1 / e2 >= 3.0,
            "refinement ratio {} below 3 (e1 = {e1:.3e}, e2 = {e2:.3e})",
            e1 / e2
        );
    }

    #[test]
    fn rejects_degenerate_resolution() {
        assert!(make_sphere_grid(V3::ZERO, 1.0, 4, 64).is_err());
        assert!(make_sphere_grid(V3::ZERO, 1.0, 16, 8).is_err());
        assert!(make_sphere_grid(V3::ZERO, -1.0, 16, 32).is_err());
    }

    #[test]
    fn rejects_nontangent_input() {
        let g = unit_sphere(16, 32);
        let bad: Vec<C3> = g.normals.iter().map(|n| n.to_c()).collect();
        assert!(surface_divergence(&g, &bad).is_err());
    }

    #[test]
    fn cap_patch_roundtrip() {
        let g = unit_sphere(24, 48);
        let patch = SurfacePatch::cap(&g, V3::new(0.0, 0.0, 1.0), 0.5).unwrap();
        assert!(!patch.node_subset.is_empty());
        let s = [0.21, -0.13];
        let x = patch.chart(s);
        let back = patch.chart_coords_of(x).unwrap();
        assert!((back[0] - s[0]).abs() < 1e-12 && (back[1] - s[1]).abs() < 1e-12);
        // orientation: mu_s1 x mu_s2 points along the outward normal
        let (d1, d2) = patch.chart_tangents(s);
        let n = patch.shape.chart_normal(
            x.z().acos(),
            x.y().atan2(x.x()),
        );
        assert!(d1.cross(d2).dot(n) > 0.0);
    }
}
