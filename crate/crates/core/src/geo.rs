//! Small fixed-size vector helpers for points in R^3 and complex 3-vectors.

use num_complex::Complex64;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

pub type C64 = Complex64;

/// Real 3-vector (points, normals, velocities).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct V3(pub [f64; 3]);

/// Complex 3-vector (densities, complex fields).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct C3(pub [C64; 3]);

impl V3 {
    pub const ZERO: V3 = V3([0.0; 3]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        V3([x, y, z])
    }
    pub fn x(&self) -> f64 {
        self.0[0]
    }
    pub fn y(&self) -> f64 {
        self.0[1]
    }
    pub fn z(&self) -> f64 {
        self.0[2]
    }
    pub fn dot(&self, o: V3) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }
    pub fn cross(&self, o: V3) -> V3 {
        V3([
            self.0[1] * o.0[2] - self.0[2] * o.0[1],
            self.0[2] * o.0[0] - self.0[0] * o.0[2],
            self.0[0] * o.0[1] - self.0[1] * o.0[0],
        ])
    }
    pub fn norm(&self) -> f64 {
        self.dot(*self).sqrt()
    }
    pub fn normalized(&self) -> V3 {
        let n = self.norm();
        V3([self.0[0] / n, self.0[1] / n, self.0[2] / n])
    }
    pub fn scale(&self, s: f64) -> V3 {
        V3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
    pub fn to_c(&self) -> C3 {
        C3([
            C64::new(self.0[0], 0.0),
            C64::new(self.0[1], 0.0),
            C64::new(self.0[2], 0.0),
        ])
    }
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl C3 {
    pub const ZERO: C3 = C3([C64::new(0.0, 0.0); 3]);

    pub fn new(x: C64, y: C64, z: C64) -> Self {
        C3([x, y, z])
    }
    pub fn re(&self) -> V3 {
        V3([self.0[0].re, self.0[1].re, self.0[2].re])
    }
    pub fn im(&self) -> V3 {
        V3([self.0[0].im, self.0[1].im, self.0[2].im])
    }
    pub fn conj(&self) -> C3 {
        C3([self.0[0].conj(), self.0[1].conj(), self.0[2].conj()])
    }
    /// Unconjugated dot product with a real vector.
    pub fn dot_v(&self, o: V3) -> C64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }
    /// Unconjugated (bilinear) dot product.
    pub fn dot(&self, o: C3) -> C64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }
    pub fn cross(&self, o: C3) -> C3 {
        C3([
            self.0[1] * o.0[2] - self.0[2] * o.0[1],
            self.0[2] * o.0[0] - self.0[0] * o.0[2],
            self.0[0] * o.0[1] - self.0[1] * o.0[0],
        ])
    }
    pub fn norm(&self) -> f64 {
        (self.0[0].norm_sqr() + self.0[1].norm_sqr() + self.0[2].norm_sqr()).sqrt()
    }
    pub fn scale(&self, s: C64) -> C3 {
        C3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
    pub fn scale_re(&self, s: f64) -> C3 {
        C3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

impl Add for V3 {
    type Output = V3;
    fn add(self, o: V3) -> V3 {
        V3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}
impl Sub for V3 {
    type Output = V3;
    fn sub(self, o: V3) -> V3 {
        V3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}
impl Neg for V3 {
    type Output = V3;
    fn neg(self) -> V3 {
        V3([-self.0[0], -self.0[1], -self.0[2]])
    }
}
impl Mul<f64> for V3 {
    type Output = V3;
    fn mul(self, s: f64) -> V3 {
        self.scale(s)
    }
}
impl AddAssign for V3 {
    fn add_assign(&mut self, o: V3) {
        *self = *self + o;
    }
}

impl Add for C3 {
    type Output = C3;
    fn add(self, o: C3) -> C3 {
        C3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}
impl Sub for C3 {
    type Output = C3;
    fn sub(self, o: C3) -> C3 {
        C3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}
impl Neg for C3 {
    type Output = C3;
    fn neg(self) -> C3 {
        C3([-self.0[0], -self.0[1], -self.0[2]])
    }
}
impl AddAssign for C3 {
    fn add_assign(&mut self, o: C3) {
        *self = *self + o;
    }
}

/// Cross product of a real vector with a complex vector.
pub fn cross_vc(a: V3, b: C3) -> C3 {
    C3([
        b.0[2] * a.0[1] - b.0[1] * a.0[2],
        b.0[0] * a.0[2] - b.0[2] * a.0[0],
        b.0[1] * a.0[0] - b.0[0] * a.0[1],
    ])
}

/// Complex 3x3 matrix in row-major order; used for field Jacobians and kernel Hessians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct M3c(pub [[C64; 3]; 3]);

impl M3c {
    pub const ZERO: M3c = M3c([[C64::new(0.0, 0.0); 3]; 3]);

    pub fn apply(&self, v: C3) -> C3 {
        let mut out = [C64::new(0.0, 0.0); 3];
        for (i, row) in self.0.iter().enumerate() {
            out[i] = row[0] * v.0[0] + row[1] * v.0[1] + row[2] * v.0[2];
        }
        C3(out)
    }
    pub fn apply_v(&self, v: V3) -> C3 {
        self.apply(v.to_c())
    }
    pub fn add(&self, o: &M3c) -> M3c {
        let mut m = M3c::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[i][j] + o.0[i][j];
            }
        }
        m
    }
    pub fn scale(&self, s: C64) -> M3c {
        let mut m = M3c::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[i][j] * s;
            }
        }
        m
    }
    /// Outer product a b^T of complex column a and real row b.
    pub fn outer_cv(a: C3, b: V3) -> M3c {
        let mut m = M3c::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = a.0[i] * b.0[j];
            }
        }
        m
    }
    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }
}

/// Real 3x3 matrix, row-major; flow-map Jacobians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct M3(pub [[f64; 3]; 3]);

impl M3 {
    pub const ZERO: M3 = M3([[0.0; 3]; 3]);
    pub const IDENTITY: M3 = M3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn apply(&self, v: V3) -> V3 {
        let mut out = [0.0; 3];
        for (i, row) in self.0.iter().enumerate() {
            out[i] = row[0] * v.0[0] + row[1] * v.0[1] + row[2] * v.0[2];
        }
        V3(out)
    }
    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }
    pub fn from_columns(c0: V3, c1: V3, c2: V3) -> M3 {
        let mut m = M3::ZERO;
        for i in 0..3 {
            m.0[i][0] = c0.0[i];
            m.0[i][1] = c1.0[i];
            m.0[i][2] = c2.0[i];
        }
        m
    }
}
