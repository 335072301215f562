//! Special functions and quadrature primitives: Gauss-Legendre rules,
//! finite-difference stencils on arbitrary nodes, spherical Bessel/Hankel
//! functions, associated Legendre functions and spherical harmonics.

use crate::error::{Error, Result};
use crate::geo::{C64, V3};

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) via the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Finite-difference weights on arbitrary nodes (Fornberg's algorithm).
/// Returns weights so that sum w_i f(x_i) approximates the m-th derivative at x0.
pub fn fd_weights(x0: f64, nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(order < n);
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mi = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mi).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mi).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Spherical Bessel functions of the first kind j_0..j_n at x >= 0.
/// Downward (Miller) recurrence normalized against j_0, stable for all n.
pub fn sph_j_upto(n: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite());
    let mut out = vec![0.0; n + 1];
    if x < 1e-8 {
        // Leading Taylor terms: j_l(x) ~ x^l / (2l+1)!!.
        let mut dfact = 1.0;
        let mut xp = 1.0;
        for (l, o) in out.iter_mut().enumerate() {
            if l > 0 {
                dfact *= (2 * l + 1) as f64;
                xp *= x;
                *o = xp / dfact * (1.0 - x * x / (2.0 * (2.0 * l as f64 + 3.0)));
            } else {
                *o = 1.0 - x * x / 6.0;
            }
        }
        return out;
    }
    let start = n.max(1) + (x as usize) + 24;
    let mut jp2 = 0.0_f64;
    let mut jp1 = 1e-280_f64;
    let mut tail = vec![0.0; n.max(1) + 1];
    for k in (0..=start).rev() {
        let j = (2.0 * k as f64 + 3.0) / x * jp1 - jp2;
        if k <= n.max(1) {
            tail[k] = j;
        }
        jp2 = jp1;
        jp1 = j;
        // Rescale to avoid overflow during the downward sweep.
        if jp1.abs() > 1e250 {
            jp1 *= 1e-250;
            jp2 *= 1e-250;
            for t in tail.iter_mut() {
                *t *= 1e-250;
            }
        }
    }
    // Normalize against whichever closed form is better resolved; anchoring on
    // j_0 alone loses everything near its zeros.
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    let scale = if j0.abs() >= j1.abs() {
        j0 / tail[0]
    } else {
        j1 / tail[1]
    };
    for (o, t) in out.iter_mut().zip(tail.iter()) {
        *o = t * scale;
    }
    out
}

/// Spherical Bessel functions of the second kind y_0..y_n at x > 0 (upward recurrence).
pub fn sph_y_upto(n: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0 && x.is_finite());
    let mut out = vec![0.0; n + 1];
    out[0] = -x.cos() / x;
    if n >= 1 {
        out[1] = -(x.cos() / x + x.sin()) / x;
    }
    for l in 2..=n {
        out[l] = (2.0 * l as f64 - 1.0) / x * out[l - 1] - out[l - 2];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselKind {
    J,
    Y,
    H1,
}

/// Single spherical Bessel/Hankel value. h1 = j + i y.
pub fn sph_bessel(kind: BesselKind, l: usize, x: f64) -> Result<C64> {
    match kind {
        BesselKind::J => {
            if x < 0.0 {
                return Err(Error::domain("sph_bessel j requires x >= 0"));
            }
            Ok(C64::new(sph_j_upto(l, x)[l], 0.0))
        }
        BesselKind::Y => {
            if x <= 0.0 {
                return Err(Error::domain("sph_bessel y requires x > 0"));
            }
            Ok(C64::new(sph_y_upto(l, x)[l], 0.0))
        }
        BesselKind::H1 => {
            if x <= 0.0 {
                return Err(Error::domain("sph_bessel h1 requires x > 0"));
            }
            Ok(C64::new(sph_j_upto(l, x)[l], sph_y_upto(l, x)[l]))
        }
    }
}

/// Cached table of j_l, y_l, h1_l and their derivatives via
/// f_l' = f_{l-1} - (l+1)/x * f_l.
#[derive(Debug, Clone)]
pub struct SpecialFunctionTable {
    pub x: f64,
    pub j: Vec<f64>,
    pub y: Vec<f64>,
    pub dj: Vec<f64>,
    pub dy: Vec<f64>,
}

impl SpecialFunctionTable {
    pub fn new(lmax: usize, x: f64) -> Result<Self> {
        if x <= 0.0 {
            return Err(Error::domain("special function table requires x > 0"));
        }
        let j = sph_j_upto(lmax, x);
        let y = sph_y_upto(lmax, x);
        let deriv = |f: &Vec<f64>, l: usize| -> f64 {
            if l == 0 {
                // j_0' = -j_1 (and likewise for y).
                let f1 = if f.len() > 1 {
                    f[1]
                } else {
                    (2.0 * 0.0 + 1.0) / x * f[0]
                };
                -f1
            } else {
                f[l - 1] - (l as f64 + 1.0) / x * f[l]
            }
        };
        let dj = (0..=lmax).map(|l| deriv(&j, l)).collect();
        let dy = (0..=lmax).map(|l| deriv(&y, l)).collect();
        Ok(SpecialFunctionTable { x, j, y, dj, dy })
    }

    pub fn h1(&self, l: usize) -> C64 {
        C64::new(self.j[l], self.y[l])
    }
    pub fn dh1(&self, l: usize) -> C64 {
        C64::new(self.dj[l], self.dy[l])
    }
    /// Wronskian j_l y_l' - j_l' y_l, identically 1/x^2.
    pub fn wronskian(&self, l: usize) -> f64 {
        self.j[l] * self.dy[l] - self.dj[l] * self.y[l]
    }
}

/// Associated Legendre P_l^m(x) for 0 <= m <= l, with the Condon-Shortley
/// phase (-1)^m included, by the standard stable recurrences.
pub fn assoc_legendre(l: usize, m: usize, x: f64) -> f64 {
    assert!(m <= l);
    // P_m^m = (-1)^m (2m-1)!! (1-x^2)^{m/2}
    let somx2 = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut pmm = 1.0;
    let mut fact = 1.0;
    for _ in 0..m {
        pmm *= -fact * somx2;
        fact += 2.0;
    }
    if l == m {
        return pmm;
    }
    let mut pmmp1 = x * (2.0 * m as f64 + 1.0) * pmm;
    if l == m + 1 {
        return pmmp1;
    }
    let mut pll = 0.0;
    for ll in (m + 2)..=l {
        let llf = ll as f64;
        let mf = m as f64;
        pll = (x * (2.0 * llf - 1.0) * pmmp1 - (llf + mf - 1.0) * pmm) / (llf - mf);
        pmm = pmmp1;
        pmmp1 = pll;
    }
    pll
}

fn ylm_norm(l: usize, m: usize) -> f64 {
    // sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!)
    let mut ratio = 1.0;
    for k in (l - m + 1)..=(l + m) {
        ratio /= k as f64;
    }
    ((2.0 * l as f64 + 1.0) / (4.0 * std::f64::consts::PI) * ratio).sqrt()
}

/// Orthonormal complex spherical harmonic Y_l^m(direction), |direction| = 1.
/// Convention: Y_l^{-m} = (-1)^m conj(Y_l^m).
pub fn spherical_harmonic(l: usize, m: i32, dir: V3) -> Result<C64> {
    if m.unsigned_abs() as usize > l {
        return Err(Error::domain(format!("|m| = {} exceeds l = {l}", m.abs())));
    }
    let ct = dir.z().clamp(-1.0, 1.0);
    let phi = dir.y().atan2(dir.x());
    let ma = m.unsigned_abs() as usize;
    let p = assoc_legendre(l, ma, ct);
    let val = ylm_norm(l, ma) * p * C64::new(0.0, ma as f64 * phi).exp();
    if m >= 0 {
        Ok(val)
    } else {
        Ok(val.conj() * if ma % 2 == 1 { -1.0 } else { 1.0 })
    }
}

/// Real orthonormal spherical harmonic basis.
/// m > 0: sqrt(2) (-1)^m Re Y_l^m, m = 0: Y_l^0, m < 0: sqrt(2) (-1)^m Im Y_l^{|m|}.
pub fn real_spherical_harmonic(l: usize, m: i32, dir: V3) -> Result<f64> {
    let ma = m.unsigned_abs() as usize;
    if ma > l {
        return Err(Error::domain(format!("|m| = {ma} exceeds l = {l}")));
    }
    let y = spherical_harmonic(l, ma as i32, dir)?;
    let sign = if ma % 2 == 1 { -1.0 } else { 1.0 };
    Ok(match m.cmp(&0) {
        std::cmp::Ordering::Greater => std::f64::consts::SQRT_2 * sign * y.re,
        std::cmp::Ordering::Equal => y.re,
        std::cmp::Ordering::Less => std::f64::consts::SQRT_2 * sign * y.im,
    })
}

/// Trivariate polynomial with real coefficients, exponents (i,j,k) -> x^i y^j z^k.
/// Used to represent solid harmonics r^l Y_lm(direction) exactly.
#[derive(Debug, Clone, Default)]
pub struct TriPoly {
    pub terms: Vec<([u32; 3], f64)>,
}

impl TriPoly {
    pub fn zero() -> Self {
        TriPoly { terms: Vec::new() }
    }
    pub fn constant(c: f64) -> Self {
        TriPoly {
            terms: vec![([0, 0, 0], c)],
        }
    }
    pub fn monomial(e: [u32; 3], c: f64) -> Self {
        TriPoly { terms: vec![(e, c)] }
    }

    fn push(&mut self, e: [u32; 3], c: f64) {
        if c == 0.0 {
            return;
        }
        for t in self.terms.iter_mut() {
            if t.0 == e {
                t.1 += c;
                return;
            }
        }
        self.terms.push((e, c));
    }

    pub fn add(&self, o: &TriPoly) -> TriPoly {
        let mut out = self.clone();
        for (e, c) in &o.terms {
            out.push(*e, *c);
        }
        out.compact();
        out
    }

    pub fn scale(&self, s: f64) -> TriPoly {
        TriPoly {
            terms: self.terms.iter().map(|(e, c)| (*e, c * s)).collect(),
        }
    }

    pub fn mul(&self, o: &TriPoly) -> TriPoly {
        let mut out = TriPoly::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                out.push([ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]], ca * cb);
            }
        }
        out.compact();
        out
    }

    fn compact(&mut self) {
        self.terms.retain(|(_, c)| c.abs() > 0.0);
        self.terms.sort_by_key(|(e, _)| *e);
    }

    pub fn diff(&self, axis: usize) -> TriPoly {
        let mut out = TriPoly::zero();
        for (e, c) in &self.terms {
            if e[axis] > 0 {
                let mut ne = *e;
                ne[axis] -= 1;
                out.push(ne, c * e[axis] as f64);
            }
        }
        out.compact();
        out
    }

    pub fn eval(&self, p: V3) -> f64 {
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            acc += c
                * p.x().powi(e[0] as i32)
                * p.y().powi(e[1] as i32)
                * p.z().powi(e[2] as i32);
        }
        acc
    }
}

/// Real solid harmonic r^l Y_lm(dir) as an exact polynomial in (x,y,z),
/// in the same real basis as `real_spherical_harmonic`.
///
/// Built from the unnormalized complex solid harmonics S_l^m = r^l P_l^m e^{im phi}
/// (Condon-Shortley included) via
///   S_m^m     = (-1)^m (2m-1)!! (x+iy)^m,
///   S_{m+1}^m = (2m+1) z S_m^m,
///   (l-m) S_l^m = (2l-1) z S_{l-1}^m - (l-1+m) r^2 S_{l-2}^m.
pub fn real_solid_harmonic_poly(l: usize, m: i32) -> TriPoly {
    let ma = m.unsigned_abs() as usize;
    assert!(ma <= l);
    // Complex S_mm as (re, im) polynomial pair.
    let mut re = TriPoly::constant(1.0);
    let mut im = TriPoly::zero();
    let mut coef = 1.0;
    for k in 0..ma {
        // multiply by (x + i y)
        let x = TriPoly::monomial([1, 0, 0], 1.0);
        let y = TriPoly::monomial([0, 1, 0], 1.0);
        let nre = re.mul(&x).add(&im.mul(&y).scale(-1.0));
        let nim = re.mul(&y).add(&im.mul(&x));
        re = nre;
        im = nim;
        coef *= -(2.0 * k as f64 + 1.0); // (-1)^m (2m-1)!!
    }
    re = re.scale(coef);
    im = im.scale(coef);
    // Upward recurrence in l at fixed m.
    let r2 = TriPoly {
        terms: vec![([2, 0, 0], 1.0), ([0, 2, 0], 1.0), ([0, 0, 2], 1.0)],
    };
    let z = TriPoly::monomial([0, 0, 1], 1.0);
    let (mut s_re, mut s_im) = (re.clone(), im.clone());
    if l > ma {
        let mut prev = (re, im);
        let c = 2.0 * ma as f64 + 1.0;
        let mut cur = (z.mul(&prev.0).scale(c), z.mul(&prev.1).scale(c));
        for ll in (ma + 2)..=l {
            let a = (2.0 * ll as f64 - 1.0) / (ll - ma) as f64;
            let b = (ll + ma - 1) as f64 / (ll - ma) as f64;
            let nxt_re = z.mul(&cur.0).scale(a).add(&r2.mul(&prev.0).scale(-b));
            let nxt_im = z.mul(&cur.1).scale(a).add(&r2.mul(&prev.1).scale(-b));
            prev = cur;
            cur = (nxt_re, nxt_im);
        }
        s_re = cur.0;
        s_im = cur.1;
    }
    let n = ylm_norm(l, ma);
    let sign = if ma % 2 == 1 { -1.0 } else { 1.0 };
    match m.cmp(&0) {
        std::cmp::Ordering::Equal => s_re.scale(n),
        std::cmp::Ordering::Greater => s_re.scale(n * sign * std::f64::consts::SQRT_2),
        std::cmp::Ordering::Less => s_im.scale(n * sign * std::f64::consts::SQRT_2),
    }
}
