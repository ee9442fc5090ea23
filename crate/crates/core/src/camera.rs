//! Pinhole cameras.

use nalgebra::{Matrix2x3, Matrix3, Vector2};

use crate::error::{Error, Result};
use crate::mesh::Vec3;

/// Calibrated pinhole camera mapping world points to pixel coordinates.
///
/// Pixel `(col, row)` has its center at the continuous coordinate
/// `(col, row)`; the image covers `[-0.5, width - 0.5] x [-0.5, height - 0.5]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    /// Upper-triangular intrinsics.
    pub k: Matrix3<f64>,
    /// World-to-camera rotation.
    pub r: Matrix3<f64>,
    /// World-to-camera translation.
    pub t: Vec3,
    pub width: usize,
    pub height: usize,
    k_inv: Matrix3<f64>,
    center: Vec3,
}

impl Camera {
    pub fn new(k: Matrix3<f64>, r: Matrix3<f64>, t: Vec3, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidCamera("image size must be positive".into()));
        }
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            return Err(Error::InvalidCamera("intrinsics must be upper triangular".into()));
        }
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0 && k[(2, 2)] > 0.0) {
            return Err(Error::InvalidCamera("focal lengths must be positive".into()));
        }
        let (cx, cy) = (k[(0, 2)] / k[(2, 2)], k[(1, 2)] / k[(2, 2)]);
        if !(-0.5..=width as f64 - 0.5).contains(&cx) || !(-0.5..=height as f64 - 0.5).contains(&cy) {
            return Err(Error::InvalidCamera(format!(
                "principal point ({cx}, {cy}) lies outside the {width}x{height} image"
            )));
        }
        let orth = (r.transpose() * r - Matrix3::identity()).abs().max();
        if orth > 1e-9 || (r.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidCamera(
                "rotation must be orthonormal with determinant +1".into(),
            ));
        }
        if !t.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidCamera("translation must be finite".into()));
        }
        let k_inv = k
            .try_inverse()
            .ok_or_else(|| Error::InvalidCamera("singular intrinsics".into()))?;
        let center = -(r.transpose() * t);
        Ok(Camera {
            k,
            r,
            t,
            width,
            height,
            k_inv,
            center,
        })
    }

    /// Camera at `eye` looking at `target`, with image rows pointing along
    /// `-up` and a square-pixel focal length in pixels.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, focal: f64, width: usize, height: usize) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidCamera("eye and target coincide".into()))?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidCamera("viewing direction parallel to up vector".into()))?;
        let down = forward.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(r * eye);
        let k = Matrix3::new(
            focal,
            0.0,
            (width as f64 - 1.0) / 2.0,
            0.0,
            focal,
            (height as f64 - 1.0) / 2.0,
            0.0,
            0.0,
            1.0,
        );
        Camera::new(k, r, t, width, height)
    }

    /// Optical center in world coordinates.
    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.r * p + self.t
    }

    /// Pixel coordinates and camera-frame depth of a world point.
    pub fn project(&self, p: &Vec3) -> Result<(Vector2<f64>, f64)> {
        let pc = self.to_camera(p);
        if pc.z <= 0.0 {
            return Err(Error::BehindCamera { depth: pc.z });
        }
        Ok((self.image_of(&pc), pc.z))
    }

    /// Like [`Camera::project`] but returns `None` behind the camera.
    #[inline]
    pub fn project_opt(&self, p: &Vec3) -> Option<(Vector2<f64>, f64)> {
        let pc = self.to_camera(p);
        (pc.z > 0.0).then(|| (self.image_of(&pc), pc.z))
    }

    #[inline]
    fn image_of(&self, pc: &Vec3) -> Vector2<f64> {
        let h = self.k * pc;
        Vector2::new(h.x / h.z, h.y / h.z)
    }

    /// World point on the viewing ray of `pixel` at camera-frame depth `depth`.
    pub fn backproject(&self, pixel: &Vector2<f64>, depth: f64) -> Vec3 {
        let ray = self.k_inv * Vec3::new(pixel.x, pixel.y, 1.0);
        let pc = ray * (depth / ray.z);
        self.r.transpose() * (pc - self.t)
    }

    /// Jacobian of the pixel coordinates with respect to the world point.
    pub fn projection_jacobian(&self, p: &Vec3) -> Result<Matrix2x3<f64>> {
        let pc = self.to_camera(p);
        if pc.z <= 0.0 {
            return Err(Error::BehindCamera { depth: pc.z });
        }
        Ok(self.jacobian_at_camera_point(&pc))
    }

    #[inline]
    pub(crate) fn jacobian_at_camera_point(&self, pc: &Vec3) -> Matrix2x3<f64> {
        let h = self.k * pc;
        let inv = 1.0 / h.z;
        let (u, v) = (h.x * inv, h.y * inv);
        let k = &self.k;
        let dcam = Matrix2x3::new(
            (k[(0, 0)] - u * k[(2, 0)]) * inv,
            (k[(0, 1)] - u * k[(2, 1)]) * inv,
            (k[(0, 2)] - u * k[(2, 2)]) * inv,
            (k[(1, 0)] - v * k[(2, 0)]) * inv,
            (k[(1, 1)] - v * k[(2, 1)]) * inv,
            (k[(1, 2)] - v * k[(2, 2)]) * inv,
        );
        dcam * self.r
    }
}
