//! Closed-form 2×2 linear algebra and exponent-rescaled products.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2: f64 = std::f64::consts::LN_2;

/// A planar vector.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at angle `a` (radians) from the positive x-axis.
    pub fn from_angle(a: f64) -> Self {
        Self::new(a.cos(), a.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        self * (1.0 / self.norm())
    }

    /// Counter-clockwise rotation by a right angle.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// A 2×2 matrix `[[a, b], [c, d]]`, row-major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl From<[[f64; 2]; 2]> for Mat2 {
    fn from(r: [[f64; 2]; 2]) -> Self {
        Mat2::new(r[0][0], r[0][1], r[1][0], r[1][1])
    }
}

impl From<Mat2> for [[f64; 2]; 2] {
    fn from(m: Mat2) -> Self {
        [[m.a, m.b], [m.c, m.d]]
    }
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub const fn diag(a: f64, d: f64) -> Self {
        Self::new(a, 0.0, 0.0, d)
    }

    pub const fn scalar(s: f64) -> Self {
        Self::diag(s, s)
    }

    /// `s` times the rotation by `phi`.
    pub fn similarity(s: f64, phi: f64) -> Self {
        let (sn, cs) = phi.sin_cos();
        Self::new(s * cs, -s * sn, s * sn, s * cs)
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn inverse(&self) -> Result<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() || !self.is_finite() {
            return Err(Error::SingularInput);
        }
        let r = 1.0 / det;
        Ok(Mat2::new(self.d * r, -self.b * r, -self.c * r, self.a * r))
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    /// True when all entries are strictly positive.
    pub fn is_positive(&self) -> bool {
        self.entries().iter().all(|&v| v > 0.0)
    }

    /// True when all entries are strictly negative.
    pub fn is_negative(&self) -> bool {
        self.entries().iter().all(|&v| v < 0.0)
    }

    /// Eigenvalues when they are real, ordered by decreasing modulus.
    pub fn real_eigenvalues(&self) -> Option<(f64, f64)> {
        let h = 0.5 * self.trace();
        let disc = h * h - self.det();
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        let (l1, l2) = (h + s, h - s);
        Some(if l1.abs() >= l2.abs() { (l1, l2) } else { (l2, l1) })
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-1.0)
    }
}

/// Singular values and right singular vectors of a 2×2 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SingularData {
    pub alpha1: f64,
    pub alpha2: f64,
    pub theta1: Vec2,
    pub theta2: Vec2,
    pub log_alpha1: f64,
    pub log_alpha2: f64,
}

/// Larger singular value and the dominant right singular vector of `m`,
/// whose determinant is `det`.
fn top_singular(m: &Mat2, det: f64) -> (f64, f64, Vec2) {
    let p = m.a * m.a + m.c * m.c;
    let r = m.b * m.b + m.d * m.d;
    let q = m.a * m.b + m.c * m.d;
    let lmax = 0.5 * (p + r) + (0.5 * (p - r)).hypot(q);
    let alpha1 = lmax.sqrt();
    let alpha2 = det.abs() / alpha1;
    let theta1 = if alpha1 - alpha2 <= 1e-12 * alpha1 {
        Vec2::new(1.0, 0.0)
    } else if q == 0.0 {
        if p >= r {
            Vec2::new(1.0, 0.0)
        } else {
            Vec2::new(0.0, 1.0)
        }
    } else {
        let phi = 0.5 * (2.0 * q).atan2(p - r);
        let v = Vec2::from_angle(phi);
        if v.x < 0.0 || (v.x == 0.0 && v.y < 0.0) {
            -v
        } else {
            v
        }
    };
    (alpha1, alpha2, theta1)
}

/// Closed-form singular value decomposition data of an invertible matrix.
pub fn svd2(m: &Mat2) -> Result<SingularData> {
    let det = m.det();
    if !m.is_finite() || det == 0.0 || !det.is_finite() {
        return Err(Error::SingularInput);
    }
    let (alpha1, alpha2, theta1) = top_singular(m, det);
    Ok(SingularData {
        alpha1,
        alpha2,
        theta1,
        theta2: theta1.perp(),
        log_alpha1: alpha1.ln(),
        log_alpha2: det.abs().ln() - alpha1.ln(),
    })
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &Mat2) -> f64 {
    let h = 0.5 * m.trace();
    let det = m.det();
    let disc = h * h - det;
    if disc >= 0.0 {
        h.abs() + disc.sqrt()
    } else {
        det.sqrt()
    }
}

/// Exact power of two `2^k` for `|k| <= 1022`.
#[inline]
fn pow2(k: i64) -> f64 {
    f64::from_bits(((1023 + k) as u64) << 52)
}

/// A matrix stored as `mantissa · 2^exponent` with the mantissa's largest
/// entry in `[1, 2)`, plus the accumulated `log|det|` of the factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaledMat2 {
    pub mantissa: Mat2,
    pub exponent: i64,
    pub log_abs_det: f64,
}

impl Default for ScaledMat2 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl ScaledMat2 {
    pub const IDENTITY: ScaledMat2 =
        ScaledMat2 { mantissa: Mat2::IDENTITY, exponent: 0, log_abs_det: 0.0 };

    /// Wrap a single invertible matrix.
    pub fn from_mat(m: &Mat2) -> Result<ScaledMat2> {
        let det = m.det();
        if !m.is_finite() || det == 0.0 || !det.is_finite() {
            return Err(Error::SingularInput);
        }
        Ok(Self::normalized(*m, 0, det.abs().ln()))
    }

    fn normalized(m: Mat2, exponent: i64, log_abs_det: f64) -> ScaledMat2 {
        let mx = m.max_abs();
        let k = ((mx.to_bits() >> 52) & 0x7ff) as i64 - 1023;
        ScaledMat2 { mantissa: m.scale(pow2(-k)), exponent: exponent + k, log_abs_det }
    }

    /// `self · m`, where `log_abs_det_m = ln|det m|`.
    #[inline]
    pub fn mul_mat(&self, m: &Mat2, log_abs_det_m: f64) -> ScaledMat2 {
        Self::normalized(self.mantissa * *m, self.exponent, self.log_abs_det + log_abs_det_m)
    }

    pub fn mul_scaled(&self, o: &ScaledMat2) -> ScaledMat2 {
        Self::normalized(
            self.mantissa * o.mantissa,
            self.exponent + o.exponent,
            self.log_abs_det + o.log_abs_det,
        )
    }

    /// The represented matrix; entries may underflow for long products.
    pub fn to_mat(&self) -> Mat2 {
        let e = self.exponent.clamp(-1074, 1023) as i32;
        self.mantissa.scale(2f64.powi(e))
    }

    /// `ln 2^exponent`.
    pub fn log_scale(&self) -> f64 {
        self.exponent as f64 * LN_2
    }

    /// Singular data of the represented matrix. Logs are exact up to
    /// rounding; `alpha1`/`alpha2` may underflow to zero for very long words.
    pub fn singular(&self) -> SingularData {
        let (a1m, _, theta1) = top_singular(&self.mantissa, self.mantissa.det());
        let log_alpha1 = a1m.ln() + self.log_scale();
        let log_alpha2 = self.log_abs_det - log_alpha1;
        SingularData {
            alpha1: log_alpha1.exp(),
            alpha2: log_alpha2.exp(),
            theta1,
            theta2: theta1.perp(),
            log_alpha1,
            log_alpha2,
        }
    }

    /// `ln α₁` only.
    #[inline]
    pub fn log_alpha1(&self) -> f64 {
        let m = &self.mantissa;
        let p = m.a * m.a + m.c * m.c;
        let r = m.b * m.b + m.d * m.d;
        let q = m.a * m.b + m.c * m.d;
        let lmax = 0.5 * (p + r) + (0.5 * (p - r)).hypot(q);
        0.5 * lmax.ln() + self.log_scale()
    }
}

/// Product `ms[0] · ms[1] · …` renormalized after every factor.
pub fn scaled_product(ms: &[Mat2]) -> Result<ScaledMat2> {
    let mut acc = ScaledMat2::IDENTITY;
    for m in ms {
        let det = m.det();
        if !m.is_finite() || det == 0.0 || !det.is_finite() {
            return Err(Error::SingularInput);
        }
        acc = acc.mul_mat(m, det.abs().ln());
    }
    Ok(acc)
}
