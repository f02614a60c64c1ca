//! Pinhole cameras, ray casting and projection.
//!
//! Unit convention: the focal length `f`, the pixel pitch `(Δx, Δy)` and
//! every image-plane radius are world units measured on the image plane,
//! which sits at distance `f` in front of the projection center. A pixel
//! index `(u, v)` has its center at continuous coordinates
//! `(u + 0.5, v + 0.5)`. Camera space is right-handed, looks down `+z`,
//! with `+x` to the right and `+y` down the image.
//!
//! Rays keep the unnormalized direction `p_o - o` from the projection center
//! to the pixel center on the image plane, so every ray direction has a
//! camera-space `z` component equal to `f`. A point at ray parameter `t`
//! therefore sits at camera depth `t * f`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Serialized camera description as stored in rig files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraDesc {
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    pub dx: f64,
    pub dy: f64,
    /// World-to-camera rotation, row-major.
    #[serde(rename = "R")]
    pub rotation: [f64; 9],
    /// World-to-camera translation.
    pub t: [f64; 3],
    #[serde(rename = "W")]
    pub width: usize,
    #[serde(rename = "H")]
    pub height: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraDesc", into = "CameraDesc")]
pub struct Camera {
    focal: f64,
    cx: f64,
    cy: f64,
    pitch_x: f64,
    pitch_y: f64,
    rotation: Matrix3<f64>,
    translation: Vec3,
    center: Vec3,
    width: usize,
    height: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub pixel: (usize, usize),
}

impl Ray {
    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Continuous pixel coordinates plus camera-space depth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
}

/// Area-equivalent disc of a single pixel on the image plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelFootprint {
    pub dx: f64,
    pub dy: f64,
    pub radius: f64,
}

impl PixelFootprint {
    pub fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy, radius: (dx * dy / std::f64::consts::PI).sqrt() }
    }
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        focal: f64,
        cx: f64,
        cy: f64,
        pitch_x: f64,
        pitch_y: f64,
        rotation: Matrix3<f64>,
        translation: Vec3,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if !(focal > 0.0 && focal.is_finite()) {
            return Err(Error::domain(format!("focal length must be positive, got {focal}")));
        }
        if !(pitch_x > 0.0 && pitch_y > 0.0 && pitch_x.is_finite() && pitch_y.is_finite()) {
            return Err(Error::domain(format!("pixel pitch must be positive, got ({pitch_x}, {pitch_y})")));
        }
        if width == 0 || height == 0 {
            return Err(Error::domain(format!("image size must be at least 1x1, got {width}x{height}")));
        }
        if !cx.is_finite() || !cy.is_finite() || !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::domain("camera parameters must be finite"));
        }
        let gram = rotation.transpose() * rotation;
        let off = (gram - Matrix3::identity()).abs().max();
        if !(off <= ORTHONORMAL_TOL) {
            return Err(Error::domain(format!("rotation is not orthonormal (max |R^T R - I| = {off:e})")));
        }
        if rotation.determinant() <= 0.0 {
            return Err(Error::domain("rotation must be proper (det = +1)"));
        }
        let center = -(rotation.transpose() * translation);
        Ok(Self { focal, cx, cy, pitch_x, pitch_y, rotation, translation, center, width, height })
    }

    /// Camera at `eye` looking at `target`; `up` fixes the roll (image `y`
    /// runs opposite to `up`). Principal point at the image center.
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        focal: f64,
        pitch: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::DegenerateGeometry("eye coincides with target".into()))?;
        let right = (-up)
            .cross(&forward)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::DegenerateGeometry("up is parallel to the view direction".into()))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        Self::new(focal, width as f64 / 2.0, height as f64 / 2.0, pitch, pitch, rotation, translation, width, height)
    }

    pub fn focal(&self) -> f64 {
        self.focal
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (self.cx, self.cy)
    }

    pub fn pitch(&self) -> (f64, f64) {
        (self.pitch_x, self.pitch_y)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Projection center in world coordinates.
    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Optical axis in world coordinates, unit length.
    pub fn forward(&self) -> Vec3 {
        self.rotation.row(2).transpose()
    }

    pub fn footprint(&self) -> PixelFootprint {
        PixelFootprint::new(self.pitch_x, self.pitch_y)
    }

    /// Ray from the projection center through the center of pixel `(u, v)`.
    pub fn cast_ray(&self, u: usize, v: usize) -> Result<Ray> {
        if u >= self.width || v >= self.height {
            return Err(Error::domain(format!("pixel ({u}, {v}) outside {}x{} image", self.width, self.height)));
        }
        Ok(self.ray_through(u as f64 + 0.5, v as f64 + 0.5, (u, v)))
    }

    /// Ray through continuous pixel coordinates `(x, y)`.
    pub fn ray_through(&self, x: f64, y: f64, pixel: (usize, usize)) -> Ray {
        let local = Vec3::new((x - self.cx) * self.pitch_x, (y - self.cy) * self.pitch_y, self.focal);
        Ray { origin: self.center, direction: self.rotation.transpose() * local, pixel }
    }

    #[inline]
    pub fn to_camera(&self, x: &Vec3) -> Vec3 {
        self.rotation * x + self.translation
    }

    /// Continuous pixel coordinates and camera depth of a world point.
    pub fn project_point(&self, x: &Vec3) -> Result<Projection> {
        let p = self.to_camera(x);
        if !(p.z > 0.0) {
            return Err(Error::BehindCamera { depth: p.z });
        }
        Ok(Projection {
            x: self.cx + self.focal * p.x / (p.z * self.pitch_x),
            y: self.cy + self.focal * p.y / (p.z * self.pitch_y),
            depth: p.z,
        })
    }

    /// Whether continuous pixel coordinates fall on the image.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64
    }

    /// Direction from the projection center to the image-plane projection of
    /// `x`, in world coordinates. Has the same scaling as ray directions.
    pub fn view_direction(&self, x: &Vec3) -> Result<Vec3> {
        let p = self.to_camera(x);
        if !(p.z > 0.0) {
            return Err(Error::BehindCamera { depth: p.z });
        }
        let on_plane = p * (self.focal / p.z);
        Ok(self.rotation.transpose() * on_plane)
    }

    pub fn desc(&self) -> CameraDesc {
        let r = &self.rotation;
        CameraDesc {
            f: self.focal,
            cx: self.cx,
            cy: self.cy,
            dx: self.pitch_x,
            dy: self.pitch_y,
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            t: [self.translation.x, self.translation.y, self.translation.z],
            width: self.width,
            height: self.height,
        }
    }
}

impl TryFrom<CameraDesc> for Camera {
    type Error = Error;

    fn try_from(d: CameraDesc) -> Result<Self> {
        Camera::new(
            d.f,
            d.cx,
            d.cy,
            d.dx,
            d.dy,
            Matrix3::from_row_slice(&d.rotation),
            Vec3::from(d.t),
            d.width,
            d.height,
        )
    }
}

impl From<Camera> for CameraDesc {
    fn from(c: Camera) -> Self {
        c.desc()
    }
}

/// Pixel footprint of a camera: `r_p = sqrt(Δx·Δy/π)`.
pub fn pixel_footprint(camera: &Camera) -> PixelFootprint {
    camera.footprint()
}

/// Norm and unit direction of `d_i - d_C`, where `d_i` is the view direction
/// of `sphere_center` in `source`. A difference shorter than 1e-12 yields
/// the zero vector.
pub fn view_direction_delta(sphere_center: &Vec3, cone_dir: &Vec3, source: &Camera) -> Result<(f64, Vec3)> {
    let d_i = source.view_direction(sphere_center)?;
    let diff = d_i - cone_dir;
    let norm = diff.norm();
    if norm < 1e-12 {
        Ok((norm, Vec3::zeros()))
    } else {
        Ok((norm, diff / norm))
    }
}
