//! Spherical (equirectangular) camera model, rigid poses, and plane-induced
//! cross-view warping.
//!
//! Conventions: y is the world up-vector, image u maps to longitude and v to
//! latitude. A pixel (u, v) on a W x H panorama views longitude
//! `phi = (u/W) * 2pi - pi` and latitude `theta = pi/2 - (v/H) * pi`, so the
//! image center looks down +z and the top row degenerates to the +y pole.
//! Poses map camera coordinates to world coordinates.

use nalgebra::{Matrix3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Rigid transform (world <- camera): `x_world = rotation * x_cam + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

/// Serialized form: row-major 3x3 rotation plus translation in meters.
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let r = &self.rotation;
        PoseRepr {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [self.translation.x, self.translation.y, self.translation.z],
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(deserializer)?;
        let r = repr.rotation;
        Pose::new(
            Matrix3::new(
                r[0][0], r[0][1], r[0][2],
                r[1][0], r[1][1], r[1][2],
                r[2][0], r[2][1], r[2][2],
            ),
            Vector3::from(repr.translation),
        )
        .map_err(serde::de::Error::custom)
    }
}

impl Pose {
    /// Build a pose, rejecting rotations that are not proper orthonormal.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.norm() >= ORTHONORMAL_TOL {
            return Err(Error::domain(format!(
                "rotation is not orthonormal (|R^T R - I| = {:.3e})",
                gram.norm()
            )));
        }
        if rotation.determinant() <= 0.0 {
            return Err(Error::domain("rotation has non-positive determinant"));
        }
        Ok(Pose {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Camera at `center` with a yaw (radians) about the world up axis.
    pub fn from_center_yaw(center: Vector3<f64>, yaw: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        // Rotation of the camera frame about +y; columns are the camera axes in world.
        let rotation = Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c);
        Pose {
            rotation,
            translation: center,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        self.translation
    }

    pub fn transform_point(&self, cam: Vector3<f64>) -> Vector3<f64> {
        self.rotation * cam + self.translation
    }

    pub fn transform_dir(&self, cam: Vector3<f64>) -> Vector3<f64> {
        self.rotation * cam
    }

    pub fn inverse_transform_point(&self, world: Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (world - self.translation)
    }

    pub fn inverse_transform_dir(&self, world: Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * world
    }
}

/// `compose(a, b)` applies `b` first: `(a o b)(x) = a(b(x))`.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose {
        rotation: a.rotation * b.rotation,
        translation: a.rotation * b.translation + a.translation,
    }
}

pub fn invert(a: &Pose) -> Pose {
    let rotation = a.rotation.transpose();
    Pose {
        rotation,
        translation: -(rotation * a.translation),
    }
}

/// Equirectangular panorama geometry (2:1 aspect).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphericalCamera {
    width: usize,
    height: usize,
}

impl SphericalCamera {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width != 2 * height {
            return Err(Error::domain(format!(
                "equirectangular image must be 2:1, got {width}x{height}"
            )));
        }
        if width < 8 {
            return Err(Error::domain(format!("width {width} < 8")));
        }
        Ok(SphericalCamera { width, height })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn contains(&self, pixel: [f64; 2]) -> bool {
        pixel[0] >= 0.0 && pixel[0] < self.width as f64 && pixel[1] >= 0.0 && pixel[1] <= self.height as f64
    }

    /// Unit viewing direction of a continuous pixel coordinate.
    pub fn pixel_to_ray(&self, pixel: [f64; 2]) -> Result<Vector3<f64>> {
        if !self.contains(pixel) {
            return Err(Error::domain(format!(
                "pixel ({}, {}) outside {}x{}",
                pixel[0], pixel[1], self.width, self.height
            )));
        }
        Ok(self.pixel_to_ray_unchecked(pixel))
    }

    #[inline]
    pub(crate) fn pixel_to_ray_unchecked(&self, pixel: [f64; 2]) -> Vector3<f64> {
        let phi = (pixel[0] / self.width as f64) * std::f64::consts::TAU - std::f64::consts::PI;
        let theta = std::f64::consts::FRAC_PI_2 - (pixel[1] / self.height as f64) * std::f64::consts::PI;
        let (sin_phi, cos_phi) = phi.sin_cos();
        let (sin_theta, cos_theta) = theta.sin_cos();
        Vector3::new(cos_theta * sin_phi, sin_theta, cos_theta * cos_phi)
    }

    /// Inverse of [`pixel_to_ray`]: pixel wrapped to [0, width) x [0, height].
    ///
    /// The direction is normalized internally; a zero vector is rejected.
    pub fn ray_to_pixel(&self, dir: Vector3<f64>) -> Result<[f64; 2]> {
        let norm = dir.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::domain("cannot project a zero or non-finite direction"));
        }
        Ok(self.ray_to_pixel_unchecked(dir, norm))
    }

    #[inline]
    pub(crate) fn ray_to_pixel_unchecked(&self, dir: Vector3<f64>, norm: f64) -> [f64; 2] {
        let theta = (dir.y / norm).clamp(-1.0, 1.0).asin();
        let phi = dir.x.atan2(dir.z);
        let u = ((phi + std::f64::consts::PI) / std::f64::consts::TAU) * self.width as f64;
        let v = ((std::f64::consts::FRAC_PI_2 - theta) / std::f64::consts::PI) * self.height as f64;
        let u = if u >= self.width as f64 { u - self.width as f64 } else { u };
        [u, v]
    }
}

/// Layout element plane in a camera frame: the orientation faces the camera,
/// so on-plane points satisfy `normal . x = -depth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    normal: Unit<Vector3<f64>>,
    depth: f64,
}

impl Plane {
    pub fn new(normal: Vector3<f64>, depth: f64) -> Result<Self> {
        if (normal.norm() - 1.0).abs() >= 1e-9 {
            return Err(Error::domain(format!(
                "plane normal must be unit length (|n| = {})",
                normal.norm()
            )));
        }
        if !(depth > 0.0) {
            return Err(Error::domain(format!("plane depth must be positive, got {depth}")));
        }
        Ok(Plane {
            normal: Unit::new_unchecked(normal),
            depth,
        })
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.normal.into_inner()
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    /// Distance along `ray` (unit or not) to the plane, if the ray crosses it
    /// in front of the camera.
    #[inline]
    pub fn ray_intersection(&self, ray: &Vector3<f64>) -> Option<f64> {
        let denom = self.normal.dot(ray);
        if denom >= -1e-12 {
            return None;
        }
        Some(-self.depth / denom)
    }
}

/// Plane-induced cross-view correspondence for spherical cameras.
///
/// Casts the reference ray through `pixel`, intersects the plane expressed in
/// the reference camera frame, and reprojects the 3D point into the source
/// panorama. Returns `None` when the ray is parallel to the plane or the
/// intersection lies behind the camera.
pub fn warp_layout(
    ref_pose: &Pose,
    src_pose: &Pose,
    plane: &Plane,
    cam: &SphericalCamera,
    pixel: [f64; 2],
) -> Result<Option<[f64; 2]>> {
    let ray = cam.pixel_to_ray(pixel)?;
    let Some(t) = plane.ray_intersection(&ray) else {
        return Ok(None);
    };
    let point_ref = ray * t;
    let point_world = ref_pose.transform_point(point_ref);
    let point_src = src_pose.inverse_transform_point(point_world);
    let norm = point_src.norm();
    if norm <= 1e-15 {
        return Ok(None);
    }
    Ok(Some(cam.ray_to_pixel_unchecked(point_src, norm)))
}
