//! Bundle partitioning, cone construction, adaptive sample allocation and
//! inscribed-sphere placement.
//!
//! Depths in this module are camera depths (distance along the optical
//! axis). Because every ray direction has camera depth component `f`, a
//! depth `z` corresponds to the ray parameter `t = z / f` for all rays of a
//! bundle at once, so the K² ray points of a sphere lie on a common
//! fronto-parallel plane.

use crate::camera::{Camera, Ray, Vec3};
use crate::error::{Error, Result};

/// A K×K block of target pixels, clipped to the image at the right and
/// bottom borders.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bundle {
    /// Bundle row.
    pub bi: usize,
    /// Bundle column.
    pub bj: usize,
    pub u0: usize,
    pub v0: usize,
    /// Present columns (`K` except on a clipped right edge).
    pub cols: usize,
    /// Present rows (`K` except on a clipped bottom edge).
    pub rows: usize,
    pub k: usize,
}

impl Bundle {
    pub fn ray_count(&self) -> usize {
        self.cols * self.rows
    }

    /// Member pixels in row-major ray order, paired with their slot
    /// `b * K + a` in the folded K×K layout.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, (usize, usize))> + '_ {
        (0..self.rows).flat_map(move |b| (0..self.cols).map(move |a| (b * self.k + a, (self.u0 + a, self.v0 + b))))
    }
}

/// Bundle grid dimensions `(columns, rows)` for a `width`×`height` image.
pub fn bundle_grid_dims(width: usize, height: usize, k: usize) -> (usize, usize) {
    (width.div_ceil(k), height.div_ceil(k))
}

/// Tiles the image into bundles in row-major bundle order.
pub fn partition_bundles(width: usize, height: usize, k: usize) -> Result<Vec<Bundle>> {
    if k == 0 {
        return Err(Error::domain("bundle size K must be at least 1"));
    }
    if width == 0 || height == 0 {
        return Err(Error::domain(format!("image must be non-empty, got {width}x{height}")));
    }
    let (gw, gh) = bundle_grid_dims(width, height, k);
    let mut out = Vec::with_capacity(gw * gh);
    for bi in 0..gh {
        for bj in 0..gw {
            let u0 = bj * k;
            let v0 = bi * k;
            out.push(Bundle { bi, bj, u0, v0, cols: k.min(width - u0), rows: k.min(height - v0), k });
        }
    }
    Ok(out)
}

/// Cone enclosing a bundle's rays.
#[derive(Clone, Debug)]
pub struct Cone {
    pub apex: Vec3,
    /// Mean of the member ray directions (unnormalized).
    pub axis: Vec3,
    /// Radius of the bundle's disc on the target image plane, `K · r_p`.
    pub r_tar: f64,
    pub focal: f64,
    pub k: usize,
    /// Member rays with their folded slot index.
    pub rays: Vec<(usize, Ray)>,
}

impl Cone {
    pub fn axis_point(&self, t: f64) -> Vec3 {
        self.apex + self.axis * t
    }
}

pub fn build_cone(camera: &Camera, bundle: &Bundle) -> Result<Cone> {
    let mut rays = Vec::with_capacity(bundle.ray_count());
    let mut sum = Vec3::zeros();
    for (slot, (u, v)) in bundle.pixels() {
        let ray = camera.cast_ray(u, v)?;
        sum += ray.direction;
        rays.push((slot, ray));
    }
    let axis = sum / rays.len() as f64;
    Ok(Cone {
        apex: camera.center(),
        axis,
        r_tar: bundle.k as f64 * camera.footprint().radius,
        focal: camera.focal(),
        k: bundle.k,
        rays,
    })
}

/// Where a depth range came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthSource {
    Analytic,
    File,
}

/// Depth interval `[center - half_width, center + half_width]` to sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthRange {
    center: f64,
    half_width: f64,
    source: DepthSource,
}

impl DepthRange {
    pub fn new(center: f64, half_width: f64, source: DepthSource) -> Result<Self> {
        if !(half_width >= 0.0) || !half_width.is_finite() || !center.is_finite() {
            return Err(Error::domain(format!("invalid depth range {center} ± {half_width}")));
        }
        if !(center - half_width > 0.0) {
            return Err(Error::domain(format!("depth range {center} ± {half_width} extends behind the camera")));
        }
        Ok(Self { center, half_width, source })
    }

    /// Range covering `[min - margin, max + margin]` of the finite depths in
    /// `depths`. Returns `None` when no depth is finite.
    pub fn from_depths(
        depths: impl IntoIterator<Item = f64>,
        margin: f64,
        source: DepthSource,
    ) -> Option<Result<Self>> {
        let (lo, hi) = depths
            .into_iter()
            .filter(|d| d.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        if !lo.is_finite() {
            return None;
        }
        Some(Self::new(0.5 * (lo + hi), 0.5 * (hi - lo) + margin, source))
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn source(&self) -> DepthSource {
        self.source
    }

    pub fn near(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn far(&self) -> f64 {
        self.center + self.half_width
    }
}

/// Samples for a bundle: `ceil(2R / δs)` capped to `[1, n_max]`.
pub fn adaptive_sample_count(range: &DepthRange, delta_s: f64, n_max: usize) -> usize {
    debug_assert!(delta_s > 0.0 && n_max >= 1);
    let wanted = (2.0 * range.half_width / delta_s).ceil();
    if wanted <= 1.0 {
        1
    } else if wanted >= n_max as f64 {
        n_max
    } else {
        wanted as usize
    }
}

/// One ray's point on a sphere's sampling plane.
#[derive(Clone, Debug, PartialEq)]
pub struct RayPoint {
    pub slot: usize,
    pub point: Vec3,
}

/// Sphere inscribed in a cone.
#[derive(Clone, Debug, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
    /// Camera depth of the sampling plane.
    pub depth: f64,
    /// Ray parameter (`depth / f`).
    pub t: f64,
    /// Width of the depth interval this sphere represents.
    pub interval: f64,
    pub k: usize,
    pub rays: Vec<RayPoint>,
}

/// Radius of the sphere centered at `center` inscribed in `cone`.
///
/// Returns the radius and whether the inner square root argument
/// `‖d_C‖² - f²` went negative and was clamped to zero.
pub fn inscribed_radius(center: &Vec3, cone: &Cone) -> (f64, bool) {
    let axis_norm = cone.axis.norm();
    let f = cone.focal;
    let inner = axis_norm * axis_norm - f * f;
    let clamped = inner < 0.0;
    let offset = inner.max(0.0).sqrt() - cone.r_tar;
    let dist = (center - cone.apex).norm();
    let radius = dist * f * cone.r_tar / (axis_norm * (offset * offset + f * f).sqrt());
    (radius, clamped)
}

/// Places `n` spheres at the centers of `n` equal intervals of `range`,
/// ordered by increasing depth. A single sphere sits at the range center.
pub fn place_spheres(cone: &Cone, range: &DepthRange, n: usize) -> Result<Vec<Sphere>> {
    Ok(place_spheres_counting(cone, range, n)?.0)
}

/// As [`place_spheres`], also reporting how many radii hit the clamp in
/// [`inscribed_radius`].
pub fn place_spheres_counting(cone: &Cone, range: &DepthRange, n: usize) -> Result<(Vec<Sphere>, usize)> {
    if n == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    if !(range.near() > 0.0) {
        return Err(Error::domain("depth range extends behind the camera"));
    }
    let width = 2.0 * range.half_width() / n as f64;
    let mut clamped = 0;
    let mut spheres = Vec::with_capacity(n);
    for i in 0..n {
        let depth = if n == 1 { range.center() } else { range.near() + (i as f64 + 0.5) * width };
        let t = depth / cone.focal;
        let mut sum = Vec3::zeros();
        let rays: Vec<RayPoint> = cone
            .rays
            .iter()
            .map(|(slot, ray)| {
                let point = ray.at(t);
                sum += point;
                RayPoint { slot: *slot, point }
            })
            .collect();
        let center = sum / rays.len() as f64;
        let (radius, c) = inscribed_radius(&center, cone);
        clamped += c as usize;
        spheres.push(Sphere { center, radius, depth, t, interval: width, k: cone.k, rays });
    }
    Ok((spheres, clamped))
}

/// Inputs to the maximum camera spacing bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlenopticBounds {
    /// Spacing between camera rays.
    pub ray_spacing: f64,
    /// Highest texture frequency.
    pub max_frequency: f64,
    pub focal: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl PlenopticBounds {
    pub fn new(ray_spacing: f64, max_frequency: f64, focal: f64, z_min: f64, z_max: f64) -> Result<Self> {
        if !(ray_spacing > 0.0 && max_frequency > 0.0 && focal > 0.0 && z_min > 0.0) {
            return Err(Error::domain("plenoptic bounds require positive spacing, frequency, focal and z_min"));
        }
        if !(z_max >= z_min) {
            return Err(Error::domain(format!("z_max ({z_max}) must not be below z_min ({z_min})")));
        }
        Ok(Self { ray_spacing, max_frequency, focal, z_min, z_max })
    }

    /// Disparity range `1/z_min - 1/z_max`.
    pub fn disparity_range(&self) -> f64 {
        1.0 / self.z_min - 1.0 / self.z_max
    }
}

/// Largest camera spacing that avoids aliasing:
/// `max(2Δv, 1/B) / (f · h_d)`, or `+∞` for a zero disparity range.
pub fn plenoptic_max_spacing(bounds: &PlenopticBounds) -> f64 {
    let h_d = bounds.disparity_range();
    if h_d <= 0.0 {
        return f64::INFINITY;
    }
    (2.0 * bounds.ray_spacing).max(1.0 / bounds.max_frequency) / (bounds.focal * h_d)
}
