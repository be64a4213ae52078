//! Rigid-body geometry: points and SE(3) poses.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::PoseError;

/// A point in meters. All coordinates are finite once past input validation.
pub type Point3 = nalgebra::Point3<f64>;

/// Orthonormality drift above which a rotation is re-projected onto SO(3).
pub const ORTHO_TOLERANCE: f64 = 1e-6;

/// Rotation plus translation placing a frame in its parent.
///
/// The rotation is kept as a matrix. Constructors validate it and project
/// small drift back onto SO(3) through polar decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose from a rotation matrix and translation.
    ///
    /// Rotations that are within a loose tolerance of SO(3) are
    /// re-orthonormalized; anything further off (or non-finite) is rejected.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, PoseError> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(PoseError::NonFinite);
        }
        let det = rotation.determinant();
        if det <= 0.0 {
            return Err(PoseError::NotARotation(format!("determinant {det:.6}")));
        }
        let drift = orthonormality_drift(&rotation);
        // Parsed text poses commonly carry ~1e-4 rounding; a matrix that far
        // from SO(3) is a data error, not drift.
        if drift > 1e-2 {
            return Err(PoseError::NotARotation(format!("orthonormality error {drift:.3e}")));
        }
        let rotation = if drift > ORTHO_TOLERANCE {
            project_to_so3(&rotation)
        } else {
            rotation
        };
        Ok(Self { rotation, translation })
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    pub fn from_quaternion(q: UnitQuaternion<f64>, t: Vector3<f64>) -> Self {
        Self {
            rotation: q.to_rotation_matrix().into_inner(),
            translation: t,
        }
    }

    /// Rotation of `yaw` radians about +z, then translation.
    pub fn from_yaw(yaw: f64, t: Vector3<f64>) -> Self {
        let (s, c) = yaw.sin_cos();
        #[rustfmt::skip]
        let rotation = Matrix3::new(
            c, -s, 0.0,
            s,  c, 0.0,
            0.0, 0.0, 1.0,
        );
        Self { rotation, translation: t }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Origin of this frame expressed in the parent frame.
    pub fn position(&self) -> Point3 {
        Point3::from(self.translation)
    }

    /// `R·p + t`.
    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// Pose that applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let mut rotation = self.rotation * other.rotation;
        if orthonormality_drift(&rotation) > ORTHO_TOLERANCE {
            rotation = project_to_so3(&rotation);
        }
        Pose {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Row-major 3x4 `[R | t]`, the KITTI odometry layout.
    pub fn to_row_major_3x4(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
        ]
    }

    pub fn from_row_major_3x4(m: &[f64; 12]) -> Result<Pose, PoseError> {
        #[rustfmt::skip]
        let rotation = Matrix3::new(
            m[0], m[1], m[2],
            m[4], m[5], m[6],
            m[8], m[9], m[10],
        );
        Pose::new(rotation, Vector3::new(m[3], m[7], m[11]))
    }

    /// Largest absolute difference between corresponding entries.
    pub fn max_abs_diff(&self, other: &Pose) -> f64 {
        let dr = (self.rotation - other.rotation).abs().max();
        let dt = (self.translation - other.translation).abs().max();
        dr.max(dt)
    }
}

/// Max entry of `|RᵀR − I|`.
pub fn orthonormality_drift(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).abs().max()
}

/// Nearest rotation in the Frobenius sense (polar factor via SVD).
fn project_to_so3(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut rot = u * v_t;
    if rot.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        rot = u * v_t;
    }
    rot
}

/// Serialized form: row-major rotation and a translation vector.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRepr {
    #[serde(default = "identity_rows")]
    rotation: [f64; 9],
    #[serde(default)]
    translation: [f64; 3],
}

fn identity_rows() -> [f64; 9] {
    [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
}

impl TryFrom<PoseRepr> for Pose {
    type Error = PoseError;

    fn try_from(r: PoseRepr) -> Result<Self, Self::Error> {
        Pose::new(
            Matrix3::from_row_slice(&r.rotation),
            Vector3::from(r.translation),
        )
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let m = p.to_row_major_3x4();
        PoseRepr {
            rotation: [m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]],
            translation: [m[3], m[7], m[11]],
        }
    }
}
