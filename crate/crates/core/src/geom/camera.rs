use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::Pose;
use crate::error::{Result, TvgError};

/// Pinhole intrinsics in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics {
            fx: 90.0,
            fy: 90.0,
            cx: 48.0,
            cy: 36.0,
            width: 96,
            height: 72,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(TvgError::Config(format!(
                "invalid camera intrinsics {self:?}"
            )))
        }
    }

    /// Pixel to normalized homogeneous coordinates `K⁻¹ (u, v, 1)`.
    pub fn normalize(&self, pixel: &Vector2<f64>) -> Vector3<f64> {
        Vector3::new(
            (pixel.x - self.cx) / self.fx,
            (pixel.y - self.cy) / self.fy,
            1.0,
        )
    }

    /// Camera-frame point at the given depth along the pixel's ray.
    pub fn unproject(&self, pixel: &Vector2<f64>, depth: f64) -> Vector3<f64> {
        self.normalize(pixel) * depth
    }

    pub fn contains(&self, pixel: &Vector2<f64>) -> bool {
        pixel.x >= 0.0
            && pixel.y >= 0.0
            && pixel.x <= (self.width - 1) as f64
            && pixel.y <= (self.height - 1) as f64
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectedPoint {
    pub pixel: Vector2<f64>,
    pub depth: f64,
}

/// Projects a world point; `None` when the point is not in front of the camera.
pub fn project(
    k: &CameraIntrinsics,
    camera_from_world: &Pose,
    point: &Vector3<f64>,
) -> Option<ProjectedPoint> {
    let pc = camera_from_world.transform_point(point);
    if pc.z <= 0.0 {
        return None;
    }
    Some(ProjectedPoint {
        pixel: Vector2::new(k.fx * pc.x / pc.z + k.cx, k.fy * pc.y / pc.z + k.cy),
        depth: pc.z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k100() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap()
    }

    #[test]
    fn axis_point_lands_on_principal_point() {
        let k = k100();
        let p = project(&k, &Pose::identity(), &Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(p.pixel, Vector2::new(50.0, 50.0));
        assert_eq!(p.depth, 1.0);
    }

    #[test]
    fn pinhole_arithmetic() {
        let p = project(&k100(), &Pose::identity(), &Vector3::new(0.1, 0.2, 1.0)).unwrap();
        assert!((p.pixel - Vector2::new(60.0, 70.0)).norm() < 1e-12);
    }

    #[test]
    fn behind_camera_is_not_visible() {
        assert!(project(&k100(), &Pose::identity(), &Vector3::new(0.0, 0.0, -1.0)).is_none());
    }

    #[test]
    fn rejects_bad_intrinsics() {
        assert!(CameraIntrinsics::new(-1.0, 100.0, 50.0, 50.0, 100, 100).is_err());
        assert!(CameraIntrinsics::new(100.0, 100.0, 150.0, 50.0, 100, 100).is_err());
    }

    #[test]
    fn normalize_inverts_projection() {
        let k = k100();
        let x = Vector3::new(0.3, -0.4, 2.5);
        let p = project(&k, &Pose::identity(), &x).unwrap();
        assert!((k.unproject(&p.pixel, p.depth) - x).norm() < 1e-12);
    }
}
