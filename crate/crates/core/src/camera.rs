//! Pinhole cameras.
//!
//! Pixel `(x, y)` is the center of column `x`, row `y`; image `x` points
//! right, `y` down and the camera looks along `+Z`. Poses map world
//! coordinates to camera coordinates, `X_cam = R · X_world + t`. The source
//! view has the identity pose, so source-camera and world coordinates are
//! the same thing.

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::SceneError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Square pixels, principal point at the image center, and the given
    /// horizontal field of view.
    pub fn from_fov(width: usize, height: usize, horizontal_fov_deg: f64) -> Self {
        let f = 0.5 * width as f64 / (0.5 * horizontal_fov_deg.to_radians()).tan();
        Self {
            fx: f,
            fy: f,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
        }
    }

    /// Back-projects pixel `(x, y)` at depth `d` into camera coordinates.
    #[inline]
    pub fn unproject(&self, x: f64, y: f64, d: f64) -> Vector3<f64> {
        Vector3::new((x - self.cx) / self.fx * d, (y - self.cy) / self.fy * d, d)
    }

    /// Projects a camera-space point to continuous pixel coordinates.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    fn validate(&self) -> Result<(), SceneError> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(SceneError::InvalidCamera(format!(
                "focal lengths must be finite and positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// Tolerance on `‖RᵀR − I‖∞`.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-6;

impl Camera {
    pub fn new(
        intrinsics: Intrinsics,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, SceneError> {
        let cam = Self {
            intrinsics,
            rotation,
            translation,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// The source view: identity pose.
    pub fn source(intrinsics: Intrinsics) -> Self {
        Self {
            intrinsics,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Camera whose optical center sits at `center` with world-to-camera
    /// rotation `rotation`.
    pub fn from_center(intrinsics: Intrinsics, rotation: Matrix3<f64>, center: Vector3<f64>) -> Self {
        Self {
            intrinsics,
            rotation,
            translation: -(rotation * center),
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        self.intrinsics.validate()?;
        if !self.rotation.iter().chain(self.translation.iter()).all(|v| v.is_finite()) {
            return Err(SceneError::InvalidCamera("non-finite pose".into()));
        }
        let err = (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax();
        if err > ORTHONORMAL_TOLERANCE {
            return Err(SceneError::InvalidCamera(format!(
                "rotation is not orthonormal (error {err:e})"
            )));
        }
        if self.rotation.determinant() < 0.0 {
            return Err(SceneError::InvalidCamera("rotation is a reflection".into()));
        }
        Ok(())
    }

    /// Optical center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    #[inline]
    pub fn world_to_camera(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.rotation * p.coords + self.translation
    }

    /// Projects a world point; returns `(x, y, z_cam)`.
    #[inline]
    pub fn project(&self, p: &Point3<f64>) -> (f64, f64, f64) {
        let c = self.world_to_camera(p);
        let (x, y) = self.intrinsics.project(&c);
        (x, y, c.z)
    }
}

/// Rotation about the camera `Y` axis by `angle` radians.
pub fn rotation_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_point_projection() {
        let k = Intrinsics { fx: 1.0, fy: 1.0, cx: 0.0, cy: 0.0 };
        assert_eq!(k.unproject(0.0, 0.0, 2.0), Vector3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn unproject_then_project_returns_pixel() {
        let k = Intrinsics { fx: 2.0, fy: 2.0, cx: 1.0, cy: 1.0 };
        let p = k.unproject(2.0, 1.0, 4.0);
        assert_eq!(p, Vector3::new(2.0, 0.0, 4.0));
        assert_eq!(k.project(&p), (2.0, 1.0));
    }

    #[test]
    fn rejects_bad_cameras() {
        let k = Intrinsics { fx: 1.0, fy: 1.0, cx: 0.0, cy: 0.0 };
        let bad_k = Intrinsics { fx: 0.0, ..k };
        assert!(Camera::new(bad_k, Matrix3::identity(), Vector3::zeros()).is_err());
        let skew = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Camera::new(k, skew, Vector3::zeros()).is_err());
        let flip = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Camera::new(k, flip, Vector3::zeros()).is_err());
        assert!(Camera::new(k, rotation_y(0.3), Vector3::new(1.0, 2.0, 3.0)).is_ok());
    }

    #[test]
    fn center_round_trips() {
        let k = Intrinsics::from_fov(64, 48, 60.0);
        let c = Vector3::new(0.5, -0.25, 1.0);
        let cam = Camera::from_center(k, rotation_y(0.2), c);
        assert!((cam.center() - c).amax() < 1e-12);
        assert!(cam.world_to_camera(&Point3::from(c)).amax() < 1e-12);
    }

    #[test]
    fn fov_intrinsics_center_principal_point() {
        let k = Intrinsics::from_fov(5, 3, 90.0);
        assert!((k.fx - 2.5).abs() < 1e-12);
        assert_eq!((k.cx, k.cy), (2.0, 1.0));
    }
}
