//! Primitives for the rotation group SO(3) and its Lie algebra so(3).
//!
//! Rotations are stored as 3x3 matrices and validated at construction
//! boundaries; algebra elements are plain `Vector3<f64>` identified with
//! skew matrices through [`hat`]/[`vee`]. The exponential map uses the
//! Rodrigues formula, the logarithm is restricted to the principal branch
//! (angle in `[0, pi]`) with dedicated series and symmetric-part paths at
//! the two ends of the branch.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Frobenius tolerance for orthonormality and determinant checks at
/// construction boundaries.
pub const ROTATION_TOL: f64 = 1e-10;

/// Largest tolerated asymmetry when reading a skew matrix back from a
/// general 3x3 matrix. Anything above this signals a caller bug.
pub const SKEW_TOL: f64 = 1e-9;

/// Below this angle exp/log switch to 4th-order Taylor series of
/// `sin(t)/t` and `(1 - cos(t))/t^2` to avoid 0/0 cancellation.
const SMALL_ANGLE: f64 = 1e-4;

/// Above `pi - PI_BRANCH` the logarithm extracts the axis from the
/// symmetric part of the rotation, where the antisymmetric part degrades.
const PI_BRANCH: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum So3Error {
    #[error("matrix is not skew-symmetric (asymmetry {asymmetry:.3e} exceeds {SKEW_TOL:.0e})")]
    NotSkewSymmetric { asymmetry: f64 },
    #[error("matrix is not orthonormal (defect {defect:.3e} exceeds {ROTATION_TOL:.0e})")]
    NotOrthonormal { defect: f64 },
    #[error("matrix determinant {det} is not +1")]
    DeterminantNotOne { det: f64 },
    #[error("entries are not finite")]
    NonFinite,
}

/// A 3x3 skew-symmetric matrix, the matrix form of an so(3) element.
///
/// Instances built through [`hat`] or [`SkewMatrix::from_matrix`] satisfy
/// `m + m^T = 0` exactly: the three generators are stored once and
/// mirrored with explicit negation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewMatrix {
    m: Matrix3<f64>,
}

impl SkewMatrix {
    /// Reads a skew matrix from a general matrix, rejecting asymmetry
    /// beyond [`SKEW_TOL`] and antisymmetrizing what remains.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, So3Error> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(So3Error::NonFinite);
        }
        let asymmetry = (m + m.transpose()).norm();
        if asymmetry > SKEW_TOL {
            return Err(So3Error::NotSkewSymmetric { asymmetry });
        }
        let v = Vector3::new(
            0.5 * (m[(2, 1)] - m[(1, 2)]),
            0.5 * (m[(0, 2)] - m[(2, 0)]),
            0.5 * (m[(1, 0)] - m[(0, 1)]),
        );
        Ok(hat(&v))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix3<f64> {
        self.m
    }

    /// Inverse of [`hat`].
    pub fn vee(&self) -> Vector3<f64> {
        Vector3::new(self.m[(2, 1)], self.m[(0, 2)], self.m[(1, 0)])
    }
}

/// Maps a 3-vector to the skew matrix acting as the cross product:
/// `hat(v) * w == v.cross(&w)` for every `w`.
pub fn hat(v: &Vector3<f64>) -> SkewMatrix {
    SkewMatrix {
        m: Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0),
    }
}

/// Extracts the generating vector of a skew matrix.
pub fn vee(m: &SkewMatrix) -> Vector3<f64> {
    m.vee()
}

/// Adjoint of an algebra element: the matrix of `x -> [v, x]` on so(3),
/// which is again `hat(v)`.
pub fn ad(v: &Vector3<f64>) -> Matrix3<f64> {
    hat(v).into_matrix()
}

/// An element of SO(3), kept orthonormal with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    m: Matrix3<f64>,
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation {
            m: Matrix3::identity(),
        }
    }

    /// Validates orthonormality and determinant at [`ROTATION_TOL`].
    ///
    /// Used at construction boundaries (config load, test harness); hot
    /// loops stay on the group by composing exponentials instead.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, So3Error> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(So3Error::NonFinite);
        }
        let defect = (m.transpose() * m - Matrix3::identity()).norm();
        if defect > ROTATION_TOL {
            return Err(So3Error::NotOrthonormal { defect });
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(So3Error::DeterminantNotOne { det });
        }
        Ok(Rotation { m })
    }

    /// Wraps a matrix that is already known to be on the group (outputs
    /// of trusted compositions). No checks.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation { m }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Exponential map via the Rodrigues formula
    /// `I + sin(t)/t * v^ + (1 - cos(t))/t^2 * (v^)^2` with `t = |v|`,
    /// using series coefficients below [`SMALL_ANGLE`].
    pub fn exp(v: &Vector3<f64>) -> Self {
        let theta = v.norm();
        let (a, b) = if theta < SMALL_ANGLE {
            let t2 = theta * theta;
            (
                1.0 - t2 / 6.0 + t2 * t2 / 120.0,
                0.5 - t2 / 24.0 + t2 * t2 / 720.0,
            )
        } else {
            (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
        };
        let k = hat(v).into_matrix();
        Rotation {
            m: Matrix3::identity() + a * k + b * (k * k),
        }
    }

    /// Principal-branch logarithm: returns the rotation vector with norm
    /// in `[0, pi]` such that `Rotation::exp` recovers `self`.
    ///
    /// Three paths: series for `sin(t)/t` near zero, the generic
    /// antisymmetric-part formula in the interior, and an axis extraction
    /// from the symmetric part near `pi` where `sin(t)` loses the axis.
    /// At exactly `pi` the axis sign is ambiguous; it is fixed so that the
    /// first component of largest magnitude is positive.
    pub fn log(&self) -> Vector3<f64> {
        // w = sin(theta) * axis; s and c locate theta on [0, pi].
        let w = Vector3::new(
            0.5 * (self.m[(2, 1)] - self.m[(1, 2)]),
            0.5 * (self.m[(0, 2)] - self.m[(2, 0)]),
            0.5 * (self.m[(1, 0)] - self.m[(0, 1)]),
        );
        let s = w.norm();
        let c = 0.5 * (self.m.trace() - 1.0);
        let theta = s.atan2(c);

        if theta < SMALL_ANGLE {
            let t2 = theta * theta;
            // theta / sin(theta) expanded to 4th order
            return (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0) * w;
        }
        if theta < std::f64::consts::PI - PI_BRANCH {
            return (theta / s) * w;
        }

        // Near the branch cut: (R + R^T)/2 = cos(t) I + (1 - cos(t)) n n^T,
        // so the outer product n n^T is recovered with 1 - cos(t) ~ 2.
        let sym = 0.5 * (self.m + self.m.transpose());
        let outer = (sym - c * Matrix3::identity()) / (1.0 - c);
        let k = (0..3)
            .max_by(|&i, &j| outer[(i, i)].partial_cmp(&outer[(j, j)]).unwrap())
            .unwrap();
        let mut axis = Vector3::new(outer[(0, k)], outer[(1, k)], outer[(2, k)]);
        axis /= outer[(k, k)].max(0.0).sqrt();
        // Orient with the antisymmetric part when it still carries signal,
        // otherwise pick the deterministic representative.
        let dot = axis.dot(&w);
        if dot < 0.0 {
            axis = -axis;
        } else if dot == 0.0 {
            let lead = axis
                .iter()
                .cloned()
                .find(|x| x.abs() > 1e-12)
                .unwrap_or(1.0);
            if lead < 0.0 {
                axis = -axis;
            }
        }
        theta * axis
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        let w = Vector3::new(
            0.5 * (self.m[(2, 1)] - self.m[(1, 2)]),
            0.5 * (self.m[(0, 2)] - self.m[(2, 0)]),
            0.5 * (self.m[(1, 0)] - self.m[(0, 1)]),
        );
        w.norm().atan2(0.5 * (self.m.trace() - 1.0))
    }

    /// Group inverse (the transpose).
    pub fn inverse(&self) -> Self {
        Rotation {
            m: self.m.transpose(),
        }
    }

    /// Matrix of the adjoint action `x -> (R x^ R^T)v`; on SO(3) this is
    /// the rotation matrix itself (asserted as a property in tests).
    pub fn adjoint(&self) -> Matrix3<f64> {
        self.m
    }

    /// Left-inverse composition `self^T * other`: identity exactly when
    /// the two rotations agree.
    pub fn between(&self, other: &Rotation) -> Rotation {
        Rotation {
            m: self.m.tr_mul(&other.m),
        }
    }

    /// Frobenius distance of `R^T R` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        (self.m.transpose() * self.m - Matrix3::identity()).norm()
    }

    /// Nearest rotation in the Frobenius sense, via polar decomposition.
    /// Used to re-project long integration chains back onto the group.
    pub fn orthonormalize(&self) -> Self {
        let svd = self.m.svd(true, true);
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        let det = (u * vt).determinant();
        let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum()));
        Rotation { m: u * fix * vt }
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation { m: self.m * rhs.m }
    }
}

impl std::ops::Mul for &Rotation {
    type Output = Rotation;

    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation { m: self.m * rhs.m }
    }
}

impl std::ops::Mul<Vector3<f64>> for &Rotation {
    type Output = Vector3<f64>;

    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.m * rhs
    }
}

/// Configuration error `R_d^T R` between a desired and an actual rotation.
pub fn group_error(desired: &Rotation, actual: &Rotation) -> Rotation {
    desired.between(actual)
}

/// Magnitude of the configuration error in radians, in `[0, pi]`.
pub fn error_angle(desired: &Rotation, actual: &Rotation) -> f64 {
    group_error(desired, actual).angle()
}
