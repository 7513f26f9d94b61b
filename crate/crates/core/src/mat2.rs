//! 2×2 real matrices, planar rotations and the closed-form QR factorization.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2×2 real matrix `(a b; c d)`, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub const ZERO: Mat2 = Mat2 {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let m = Mat2 { a, b, c, d };
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::NonFiniteEntry)
        }
    }

    /// Builds a matrix without the finiteness check. Used on hot paths where
    /// the caller validates the result afterwards.
    pub(crate) const fn raw(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn diag(x: f64, y: f64) -> Result<Self> {
        Mat2::new(x, 0.0, 0.0, y)
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn d(&self) -> f64 {
        self.d
    }

    /// Entries in row-major order `[a, b, c, d]`.
    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|v| v.is_finite())
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// `tr(AᵀA)`, the squared Frobenius norm.
    pub fn gram_trace(&self) -> f64 {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::raw(self.a, self.c, self.b, self.d)
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        self.entries()
            .iter()
            .zip(other.entries())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::raw(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::raw(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        Mat2::raw(self.a * s, self.b * s, self.c * s, self.d * s)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::raw(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

/// An element of SO(2), kept as an angle so that angular paths stay real
/// and continuous. The matrix form is computed on demand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub angle: f64,
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation { angle: 0.0 };

    pub fn new(angle: f64) -> Self {
        Rotation { angle }
    }

    /// `(cos t, −sin t; sin t, cos t)`.
    pub fn matrix(&self) -> Mat2 {
        let (s, c) = self.angle.sin_cos();
        Mat2::raw(c, -s, s, c)
    }

    pub fn inverse(&self) -> Rotation {
        Rotation::new(-self.angle)
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation::new(self.angle + other.angle)
    }

    /// Left action `k·A`.
    pub fn apply(&self, m: &Mat2) -> Mat2 {
        self.matrix() * *m
    }

    pub fn apply_vec(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }
}

pub fn rotation_matrix(t: f64) -> Rotation {
    Rotation::new(t)
}

/// Upper-triangular `(t11 t12; 0 t22)` with strictly positive diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperTri2 {
    t11: f64,
    t12: f64,
    t22: f64,
}

impl UpperTri2 {
    pub fn new(t11: f64, t12: f64, t22: f64) -> Result<Self> {
        if !(t11.is_finite() && t12.is_finite() && t22.is_finite()) {
            return Err(Error::NonFiniteEntry);
        }
        if t11 <= 0.0 || t22 <= 0.0 {
            return Err(Error::NonPositiveDiagonalEntry { t11, t22 });
        }
        Ok(UpperTri2 { t11, t12, t22 })
    }

    pub fn t11(&self) -> f64 {
        self.t11
    }
    pub fn t12(&self) -> f64 {
        self.t12
    }
    pub fn t22(&self) -> f64 {
        self.t22
    }

    pub fn to_mat2(&self) -> Mat2 {
        Mat2::raw(self.t11, self.t12, 0.0, self.t22)
    }
}

/// Factor `A = Q·T` with `Q ∈ SO(2)` and `T` upper triangular with positive
/// diagonal. For `A = (a b; c d)` and `r = √(a² + c²)`:
///
/// ```text
/// Q = (1/r)(a −c; c a),   T = (r, (ab + cd)/r; 0, det(A)/r)
/// ```
pub fn qr_decompose(m: &Mat2) -> Result<(Rotation, UpperTri2)> {
    let r = m.a.hypot(m.c);
    if r == 0.0 {
        return Err(Error::DegenerateColumn);
    }
    let det = m.det();
    if det.is_nan() || det <= 0.0 {
        return Err(Error::NonPositiveDeterminant { det });
    }
    let q = Rotation::new(m.c.atan2(m.a));
    let t = UpperTri2::new(r, (m.a * m.b + m.c * m.d) / r, det / r)?;
    Ok((q, t))
}

/// Diffusion coefficient `f(A) = det(A) / (tr(AᵀA) + 1)`. Always `|f| < 1`.
pub fn f_coeff(m: &Mat2) -> f64 {
    m.det() / (m.gram_trace() + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(x: &Mat2, y: &Mat2, tol: f64) -> bool {
        x.max_abs_diff(y) <= tol
    }

    #[test]
    fn constructor_rejects_non_finite() {
        assert_eq!(Mat2::new(f64::NAN, 0.0, 0.0, 1.0), Err(Error::NonFiniteEntry));
        assert_eq!(Mat2::new(1.0, f64::INFINITY, 0.0, 1.0), Err(Error::NonFiniteEntry));
        assert!(UpperTri2::new(1.0, 0.0, 0.0).is_err());
        assert!(UpperTri2::new(-1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn qr_of_identity() {
        let (q, t) = qr_decompose(&Mat2::IDENTITY).unwrap();
        assert_eq!(q.angle, 0.0);
        assert_eq!(t, UpperTri2::new(1.0, 0.0, 1.0).unwrap());
    }

    #[test]
    fn qr_of_quarter_turn() {
        let m = Mat2::new(0.0, -1.0, 1.0, 0.0).unwrap();
        let (q, t) = qr_decompose(&m).unwrap();
        assert!((q.angle - FRAC_PI_2).abs() < 1e-15);
        assert!(close(&t.to_mat2(), &Mat2::IDENTITY, 1e-15));
    }

    #[test]
    fn qr_of_three_one_four_two() {
        // Hand-computed factors; verified below by independent products.
        let m = Mat2::new(3.0, 1.0, 4.0, 2.0).unwrap();
        let q_expected = Mat2::new(0.6, -0.8, 0.8, 0.6).unwrap();
        let t_expected = Mat2::new(5.0, 11.0 / 5.0, 0.0, 2.0 / 5.0).unwrap();
        assert!(close(&(q_expected.transpose() * q_expected), &Mat2::IDENTITY, 1e-15));
        assert!(close(&(q_expected * t_expected), &m, 1e-14));

        let (q, t) = qr_decompose(&m).unwrap();
        assert!(close(&q.matrix(), &q_expected, 1e-12));
        assert!(close(&t.to_mat2(), &t_expected, 1e-12));
    }

    #[test]
    fn qr_errors() {
        let flipped = Mat2::new(0.0, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            qr_decompose(&flipped),
            Err(Error::NonPositiveDeterminant { .. })
        ));
        let singular = Mat2::new(1.0, 2.0, 2.0, 4.0).unwrap();
        assert!(matches!(
            qr_decompose(&singular),
            Err(Error::NonPositiveDeterminant { .. })
        ));
        let zero_col = Mat2::new(0.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(qr_decompose(&zero_col), Err(Error::DegenerateColumn));
    }

    #[test]
    fn rotation_matrices() {
        assert!(close(&rotation_matrix(0.0).matrix(), &Mat2::IDENTITY, 0.0));
        let quarter = Mat2::new(0.0, -1.0, 1.0, 0.0).unwrap();
        assert!(close(&rotation_matrix(FRAC_PI_2).matrix(), &quarter, 1e-15));
        let half = Mat2::new(-1.0, 0.0, 0.0, -1.0).unwrap();
        assert!(close(&rotation_matrix(PI).matrix(), &half, 1e-15));
    }

    #[test]
    fn f_coeff_values() {
        assert!((f_coeff(&Mat2::IDENTITY) - 1.0 / 3.0).abs() < 1e-15);
        assert!((f_coeff(&Mat2::diag(2.0, 2.0).unwrap()) - 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(f_coeff(&Mat2::new(1.0, 2.0, 2.0, 4.0).unwrap()), 0.0);
    }

    fn entry() -> impl Strategy<Value = f64> {
        -10.0..10.0f64
    }

    fn positive_det_matrix() -> impl Strategy<Value = Mat2> {
        (entry(), entry(), entry(), entry())
            .prop_map(|(a, b, c, d)| Mat2::raw(a, b, c, d))
            .prop_filter("det > 0", |m| m.det() > 1e-6)
    }

    proptest! {
        #[test]
        fn rotation_is_orthogonal(t in -100.0..100.0f64) {
            let q = rotation_matrix(t).matrix();
            prop_assert!(close(&(q.transpose() * q), &Mat2::IDENTITY, 1e-12));
            prop_assert!((q.det() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn qr_reconstructs(m in positive_det_matrix()) {
            let (q, t) = qr_decompose(&m).unwrap();
            prop_assert!(close(&(q.matrix() * t.to_mat2()), &m, 1e-12 * (1.0 + m.gram_trace().sqrt())));
            prop_assert!(t.t11() > 0.0 && t.t22() > 0.0);
        }

        #[test]
        fn qr_radial_part_is_rotation_invariant(m in positive_det_matrix(), k in -PI..PI) {
            let rot = Rotation::new(k);
            let (q, t) = qr_decompose(&m).unwrap();
            let (qk, tk) = qr_decompose(&rot.apply(&m)).unwrap();
            prop_assert!(close(&t.to_mat2(), &tk.to_mat2(), 1e-10));
            prop_assert!(close(&qk.matrix(), &(rot.matrix() * q.matrix()), 1e-10));
        }

        #[test]
        fn f_coeff_bounded_and_invariant(a in entry(), b in entry(), c in entry(), d in entry(), k in -PI..PI) {
            let m = Mat2::raw(a, b, c, d);
            prop_assert!(f_coeff(&m).abs() < 1.0);
            let km = Rotation::new(k).apply(&m);
            prop_assert!((f_coeff(&km) - f_coeff(&m)).abs() < 1e-12);
        }
    }
}
