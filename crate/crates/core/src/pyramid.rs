//! Source-view mipmaps and sphere encoding.
//!
//! A sphere is encoded twice per source view: a joint feature read from
//! the view's mipmap at the level whose texel size matches the sphere's
//! projected disc, and a ray-specific block of full-resolution colors at
//! the projections of the bundle's K² ray points.

use crate::camera::{Camera, Vec3};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sampler::Sphere;

/// Image pyramid; level 0 is the original feature map and each further
/// level halves both dimensions (rounding up) with a 2×2 box filter.
#[derive(Clone, Debug)]
pub struct Mipmap {
    levels: Vec<Grid>,
}

impl Mipmap {
    pub fn build(base: Grid) -> Self {
        let top = max_level(base.width(), base.height());
        let mut levels = Vec::with_capacity(top + 1);
        levels.push(base);
        for _ in 0..top {
            let next = downsample(levels.last().unwrap());
            levels.push(next);
        }
        Self { levels }
    }

    /// Highest level index `L = floor(log2(max(W, H)))`.
    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, l: usize) -> &Grid {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[Grid] {
        &self.levels
    }

    pub fn channels(&self) -> usize {
        self.levels[0].channels()
    }

    /// Trilinear lookup at level-0 pixel coordinates `(x, y)` and fractional
    /// level `l` (clamped to `[0, L]`).
    pub fn sample_trilinear_into(&self, x: f64, y: f64, l: f64, out: &mut [f64]) {
        let top = self.max_level() as f64;
        let l = if l.is_nan() { 0.0 } else { l.clamp(0.0, top) };
        let l0 = l.floor();
        let frac = l - l0;
        let i0 = l0 as usize;
        sample_level(&self.levels[i0], i0, x, y, out);
        if frac > 0.0 {
            let mut upper = vec![0.0; out.len()];
            sample_level(&self.levels[i0 + 1], i0 + 1, x, y, &mut upper);
            for (o, u) in out.iter_mut().zip(&upper) {
                *o += (u - *o) * frac;
            }
        }
    }

    pub fn sample_trilinear(&self, x: f64, y: f64, l: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.channels()];
        self.sample_trilinear_into(x, y, l, &mut out);
        out
    }
}

fn sample_level(grid: &Grid, level: usize, x: f64, y: f64, out: &mut [f64]) {
    let scale = (level as f64).exp2();
    grid.bilinear_into(x / scale, y / scale, out);
}

fn max_level(width: usize, height: usize) -> usize {
    let m = width.max(height);
    (usize::BITS - 1 - m.leading_zeros()) as usize
}

fn downsample(src: &Grid) -> Grid {
    let w = src.width().div_ceil(2);
    let h = src.height().div_ceil(2);
    let c = src.channels();
    Grid::from_fn(w, h, c, |x, y, out| {
        let mut n = 0.0;
        for sy in 2 * y..(2 * y + 2).min(src.height()) {
            for sx in 2 * x..(2 * x + 2).min(src.width()) {
                for (o, v) in out.iter_mut().zip(src.texel(sx, sy)) {
                    *o += v;
                }
                n += 1.0;
            }
        }
        out.iter_mut().for_each(|o| *o /= n);
    })
    .expect("downsampled grid is non-empty")
}

pub fn build_mipmap(image: &Grid) -> Mipmap {
    Mipmap::build(image.clone())
}

/// Radius of the sphere's projected disc on `source`'s image plane.
pub fn source_disc_radius(sphere: &Sphere, source: &Camera) -> Result<f64> {
    let proj = source.project_point(&sphere.center)?;
    let dist = (sphere.center - source.center()).norm();
    if !(dist > sphere.radius) {
        return Err(Error::DegenerateGeometry(format!(
            "camera lies inside the sphere (distance {dist}, radius {})",
            sphere.radius
        )));
    }
    let f = source.focal();
    let (cx, cy) = source.principal_point();
    let (px, py) = source.pitch();
    // distance from the projection center to the projected center on the image plane
    let on_plane = Vec3::new((proj.x - cx) * px, (proj.y - cy) * py, f);
    let d2 = on_plane.norm_squared();
    let ratio = dist / sphere.radius;
    Ok(d2 / (f * (ratio * ratio - 1.0).sqrt() + (d2 - f * f).max(0.0).sqrt()))
}

/// Fractional mipmap level `log2(r_src / r_p)`, unclamped.
pub fn mip_level(r_src: f64, r_p: f64) -> Result<f64> {
    if !(r_src > 0.0 && r_p > 0.0) {
        return Err(Error::domain(format!("mip level needs positive radii, got r_src={r_src}, r_p={r_p}")));
    }
    Ok((r_src / r_p).log2())
}

pub fn sample_trilinear(mipmap: &Mipmap, x: f64, y: f64, l: f64) -> Vec<f64> {
    mipmap.sample_trilinear(x, y, l)
}

/// How the joint feature's pyramid level is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelSelection {
    /// Match the sphere's projected disc to the texel footprint.
    #[default]
    Footprint,
    /// Always read level 0.
    Base,
}

/// Per-view joint and ray-specific features of one sphere.
///
/// Views are stored contiguously: view `i` owns `joint[i*C..][..C]` and
/// `rays[i*K²*3..][..K²*3]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereEncoding {
    pub channels: usize,
    pub k: usize,
    pub visible: Vec<bool>,
    /// Chosen (clamped) level per view; 0 for invisible views.
    pub levels: Vec<f64>,
    pub joint: Vec<f64>,
    pub rays: Vec<f64>,
    /// Per view and slot: the ray point projected inside that view.
    pub ray_visible: Vec<bool>,
}

impl SphereEncoding {
    pub fn views(&self) -> usize {
        self.visible.len()
    }

    pub fn ray_len(&self) -> usize {
        self.k * self.k * 3
    }

    pub fn joint_of(&self, view: usize) -> &[f64] {
        &self.joint[view * self.channels..(view + 1) * self.channels]
    }

    pub fn rays_of(&self, view: usize) -> &[f64] {
        let n = self.ray_len();
        &self.rays[view * n..(view + 1) * n]
    }

    pub fn ray_visible_of(&self, view: usize) -> &[bool] {
        let n = self.k * self.k;
        &self.ray_visible[view * n..(view + 1) * n]
    }

    pub fn any_visible(&self) -> bool {
        self.visible.iter().any(|&v| v)
    }
}

/// Joint part of the encoding: per view, project the sphere center, pick a
/// level from the projected disc and read the mipmap trilinearly. Views that
/// see the center behind them or off-image are flagged invisible with zero
/// features. The ray part is left zeroed.
pub fn encode_sphere(
    sphere: &Sphere,
    mipmaps: &[&Mipmap],
    cams: &[&Camera],
    selection: LevelSelection,
) -> Result<SphereEncoding> {
    if mipmaps.is_empty() {
        return Err(Error::domain("at least one source view is required"));
    }
    if mipmaps.len() != cams.len() {
        return Err(Error::mismatch(mipmaps.len(), cams.len()));
    }
    let channels = mipmaps[0].channels();
    let views = mipmaps.len();
    let k = sphere.k;
    let mut enc = SphereEncoding {
        channels,
        k,
        visible: vec![false; views],
        levels: vec![0.0; views],
        joint: vec![0.0; views * channels],
        rays: vec![0.0; views * k * k * 3],
        ray_visible: vec![false; views * k * k],
    };
    for (i, (mip, cam)) in mipmaps.iter().zip(cams).enumerate() {
        if mip.channels() != channels {
            return Err(Error::mismatch(channels, mip.channels()));
        }
        let Ok(proj) = cam.project_point(&sphere.center) else {
            continue;
        };
        if !cam.contains(proj.x, proj.y) {
            continue;
        }
        let level = match selection {
            LevelSelection::Base => 0.0,
            LevelSelection::Footprint => match source_disc_radius(sphere, cam) {
                Ok(r_src) if r_src > 0.0 => mip_level(r_src, cam.footprint().radius)?,
                Ok(_) => 0.0,
                Err(_) => continue,
            },
        };
        let level = level.clamp(0.0, mip.max_level() as f64);
        mip.sample_trilinear_into(proj.x, proj.y, level, &mut enc.joint[i * channels..(i + 1) * channels]);
        enc.visible[i] = true;
        enc.levels[i] = level;
    }
    Ok(enc)
}

/// Ray part of the encoding: bilinear level-0 colors at the projections of
/// the sphere's ray points, folded in row-major slot order. Off-image and
/// behind-camera projections, and absent slots of clipped bundles, stay zero
/// and are flagged in `ray_visible`.
pub fn encode_rays(sphere: &Sphere, images: &[&Grid], cams: &[&Camera], enc: &mut SphereEncoding) -> Result<()> {
    if images.len() != cams.len() || images.len() != enc.views() {
        return Err(Error::mismatch(enc.views(), images.len()));
    }
    let n = enc.ray_len();
    for (i, (img, cam)) in images.iter().zip(cams).enumerate() {
        if img.channels() != 3 {
            return Err(Error::mismatch("3 color channels", img.channels()));
        }
        let block = &mut enc.rays[i * n..(i + 1) * n];
        let seen = &mut enc.ray_visible[i * n / 3..(i + 1) * n / 3];
        for rp in &sphere.rays {
            let Ok(proj) = cam.project_point(&rp.point) else {
                continue;
            };
            if !cam.contains(proj.x, proj.y) {
                continue;
            }
            img.bilinear_into(proj.x, proj.y, &mut block[rp.slot * 3..rp.slot * 3 + 3]);
            seen[rp.slot] = true;
        }
    }
    Ok(())
}
