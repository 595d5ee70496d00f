//! Reference frames, attitude representations and elementary rotations.
//!
//! World frame is NED (gravity along +i_z). The body frame has b_x along the
//! chord line, b_y out of the right wing and b_z completing the right-handed
//! set. Quaternions follow the Hamilton convention with `v_b = ξ⁻¹ ∘ v ∘ ξ`,
//! i.e. ξ rotates body-frame vectors into the world frame.

use std::fmt;

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrameError {
    #[error("yaw undefined: wingtips vertical (|i_z . b_y| = {0:.12})")]
    YawUndefined(f64),
    #[error("cannot compose rotation {outer} after {inner}")]
    FrameMismatch { outer: String, inner: String },
}

/// Named reference frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// World-fixed NED frame `i`.
    World,
    /// Body-fixed frame `b`.
    Body,
    /// Zero-lift frame `α`.
    ZeroLift,
    /// Intermediate frame after the yaw rotation.
    Yaw,
    /// Intermediate frame after yaw and roll.
    Roll,
    /// Intermediate frame after yaw, roll and θ̄ (equals the zero-lift frame).
    Pitch,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Frame::World => "i",
            Frame::Body => "b",
            Frame::ZeroLift => "alpha",
            Frame::Yaw => "psi",
            Frame::Roll => "phi",
            Frame::Pitch => "theta_bar",
        };
        f.write_str(s)
    }
}

/// Active rotation about x by `a`.
pub fn rot_x(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Active rotation about y by `a`.
pub fn rot_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Active rotation about z by `a`.
pub fn rot_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// d/da of [`rot_x`].
pub fn rot_x_d(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

/// d/da of [`rot_y`].
pub fn rot_y_d(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

/// d/da of [`rot_z`].
pub fn rot_z_d(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// d²/da² of [`rot_x`].
pub fn rot_x_dd(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(0.0, 0.0, 0.0, 0.0, -c, s, 0.0, -s, -c)
}

/// d²/da² of [`rot_z`].
pub fn rot_z_dd(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(-c, s, 0.0, -s, -c, 0.0, 0.0, 0.0, 0.0)
}

/// Wraps an angle to (-π, π].
pub fn wrap_pi(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Unit quaternion with the double cover resolved to `w >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuat(UnitQuaternion<f64>);

impl UnitQuat {
    /// Builds a quaternion from raw components; the result is renormalized and
    /// canonicalized.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self::from_quaternion(Quaternion::new(w, x, y, z))
    }

    pub fn identity() -> Self {
        Self(UnitQuaternion::identity())
    }

    pub fn from_quaternion(q: Quaternion<f64>) -> Self {
        let mut u = UnitQuaternion::from_quaternion(q);
        if u.w < 0.0 {
            u = UnitQuaternion::new_unchecked(-u.into_inner());
        }
        Self(u)
    }

    pub fn from_unit(u: UnitQuaternion<f64>) -> Self {
        Self::from_quaternion(u.into_inner())
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(axis);
        Self::from_unit(UnitQuaternion::from_axis_angle(&axis, angle))
    }

    /// Exponential map of a rotation vector.
    pub fn from_rotation_vector(v: Vec3) -> Self {
        Self::from_unit(UnitQuaternion::from_scaled_axis(v))
    }

    /// Quaternion of a body→world rotation matrix.
    pub fn from_matrix(m: &Mat3) -> Self {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(*m);
        Self::from_unit(UnitQuaternion::from_rotation_matrix(&rot))
    }

    pub fn w(&self) -> f64 {
        self.0.w
    }
    pub fn x(&self) -> f64 {
        self.0.i
    }
    pub fn y(&self) -> f64 {
        self.0.j
    }
    pub fn z(&self) -> f64 {
        self.0.k
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.w(), self.x(), self.y(), self.z()]
    }

    pub fn inner(&self) -> &UnitQuaternion<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.as_ref().norm()
    }

    pub fn inverse(&self) -> Self {
        Self::from_unit(self.0.inverse())
    }

    /// Hamilton product `self ∘ rhs`.
    pub fn hamilton(&self, rhs: &Self) -> Self {
        Self::from_quaternion(self.0.into_inner() * rhs.0.into_inner())
    }

    /// Rotates a body-frame vector into the world frame.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0.transform_vector(v)
    }

    /// Rotates a world-frame vector into the body frame.
    pub fn inverse_rotate(&self, v: &Vec3) -> Vec3 {
        self.0.inverse_transform_vector(v)
    }

    /// Body→world rotation matrix `R_b^i`.
    pub fn to_matrix(&self) -> Mat3 {
        self.0.to_rotation_matrix().into_inner()
    }

    pub fn to_rotation(&self) -> Rotation {
        Rotation::new(self.to_matrix(), Frame::Body, Frame::World)
    }

    /// Geodesic angle between two attitudes, in [0, π].
    pub fn angle_to(&self, other: &Self) -> f64 {
        let d = self.0.coords.dot(&other.0.coords).abs().min(1.0);
        2.0 * d.acos()
    }
}

impl std::ops::Mul for UnitQuat {
    type Output = UnitQuat;
    fn mul(self, rhs: UnitQuat) -> UnitQuat {
        self.hamilton(&rhs)
    }
}

impl Default for UnitQuat {
    fn default() -> Self {
        Self::identity()
    }
}

/// Hamilton product of two unit quaternions.
pub fn hamilton_product(a: &UnitQuat, b: &UnitQuat) -> UnitQuat {
    a.hamilton(b)
}

/// Orthonormal rotation matrix tagged with its source and destination frames.
///
/// `matrix * v_from = v_to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub matrix: Mat3,
    pub from: Frame,
    pub to: Frame,
}

impl Rotation {
    pub fn new(matrix: Mat3, from: Frame, to: Frame) -> Self {
        Self { matrix, from, to }
    }

    pub fn identity(frame: Frame) -> Self {
        Self::new(Mat3::identity(), frame, frame)
    }

    pub fn inverse(&self) -> Self {
        Self::new(self.matrix.transpose(), self.to, self.from)
    }

    /// `self ∘ inner`: applies `inner` first. Frames must chain.
    pub fn compose(&self, inner: &Rotation) -> Result<Rotation, FrameError> {
        if inner.to != self.from {
            return Err(FrameError::FrameMismatch {
                outer: format!("{}->{}", self.from, self.to),
                inner: format!("{}->{}", inner.from, inner.to),
            });
        }
        Ok(Rotation::new(self.matrix * inner.matrix, inner.from, self.to))
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.matrix * v
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.determinant()
    }

    /// Largest absolute entry of `RᵀR - I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.matrix.transpose() * self.matrix - Mat3::identity()).amax()
    }
}

/// ZXY (3-1-2) Euler angles: yaw about i_z, roll about the yawed x-axis, pitch
/// about the resulting y-axis. `R_b^i = R_z(ψ) R_x(φ) R_y(θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerZxy {
    pub yaw: f64,
    pub roll: f64,
    pub pitch: f64,
}

/// Threshold on |i_z·b_y| above which yaw is treated as undefined.
pub const GIMBAL_TOLERANCE: f64 = 1e-9;

impl EulerZxy {
    pub fn new(yaw: f64, roll: f64, pitch: f64) -> Self {
        Self { yaw, roll, pitch }
    }

    pub fn to_matrix(&self) -> Mat3 {
        rot_z(self.yaw) * rot_x(self.roll) * rot_y(self.pitch)
    }

    pub fn to_quat(&self) -> UnitQuat {
        UnitQuat::from_matrix(&self.to_matrix())
    }

    /// Extracts angles from a body→world rotation. Roll is returned in
    /// [-π/2, π/2]; the equivalent (ψ+π, π−φ, θ+π) solution is not produced.
    pub fn from_matrix(m: &Mat3) -> Result<Self, FrameError> {
        let s_roll = m[(2, 1)];
        if (1.0 - s_roll.abs()) < GIMBAL_TOLERANCE {
            return Err(FrameError::YawUndefined(s_roll.abs()));
        }
        let roll = s_roll.clamp(-1.0, 1.0).asin();
        let pitch = (-m[(2, 0)]).atan2(m[(2, 2)]);
        let yaw = (-m[(0, 1)]).atan2(m[(1, 1)]);
        Ok(Self { yaw, roll, pitch })
    }

    pub fn from_quat(q: &UnitQuat) -> Result<Self, FrameError> {
        Self::from_matrix(&q.to_matrix())
    }
}

/// Body→world rotation for ZXY Euler angles.
pub fn euler_zxy_to_rotation(e: &EulerZxy) -> Rotation {
    Rotation::new(e.to_matrix(), Frame::Body, Frame::World)
}

/// Body→zero-lift rotation: rotation of the body axes about −b_y by `alpha0`.
pub fn zero_lift_rotation(alpha0: f64) -> Rotation {
    Rotation::new(rot_y(alpha0), Frame::Body, Frame::ZeroLift)
}
