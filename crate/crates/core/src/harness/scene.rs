//! Procedural scenes with exact depth: textured rectangles and spheres.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{Camera, Vec3};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::radiance::SurfaceQuery;

pub const SCENE_VERSION: u32 = 1;
pub const RIG_VERSION: u32 = 1;

const NOISE_PERIOD: usize = 64;

pub type Rgb = [f64; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TextureSpec {
    Constant {
        color: Rgb,
    },
    /// Square checkerboard with cells `period / 2` wide.
    Checker {
        period: f64,
        a: Rgb,
        b: Rgb,
    },
    /// Sinusoidal grating with `frequency` cycles per world unit along the
    /// direction `angle` (degrees) in surface coordinates.
    Sine {
        frequency: f64,
        #[serde(default)]
        angle: f64,
        a: Rgb,
        b: Rgb,
    },
    /// Smooth value noise seeded from the scene seed.
    Noise {
        frequency: f64,
        a: Rgb,
        b: Rgb,
    },
    /// `detail` inside the surface-coordinate rectangle `[u0, v0, u1, v1]`,
    /// `base` elsewhere.
    Inset {
        base: Box<TextureSpec>,
        detail: Box<TextureSpec>,
        rect: [f64; 4],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PrimitiveSpec {
    /// Rectangle centered at `center` spanning `±half_extent` along `u_axis`
    /// and `normal × u_axis`.
    Plane {
        center: [f64; 3],
        normal: [f64; 3],
        u_axis: [f64; 3],
        half_extent: [f64; 2],
        texture: TextureSpec,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
        texture: TextureSpec,
    },
}

/// Versioned scene description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Scene depth extent `[z_min, z_max]`.
    pub depth_range: [f64; 2],
    #[serde(default)]
    pub primitives: Vec<PrimitiveSpec>,
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene spec serializes")
    }
}

/// Target camera plus source cameras.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rig {
    pub version: u32,
    pub target: Camera,
    pub sources: Vec<Camera>,
}

impl Rig {
    pub fn from_json(text: &str) -> Result<Self> {
        let rig: Rig = serde_json::from_str(text)?;
        if rig.version != RIG_VERSION {
            return Err(Error::Parse {
                location: "rig.version".into(),
                message: format!("unsupported version {}", rig.version),
            });
        }
        Ok(rig)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rig serializes")
    }
}

#[derive(Clone, Debug)]
enum Texture {
    Constant(Rgb),
    Checker { period: f64, a: Rgb, b: Rgb },
    Sine { frequency: f64, dir: (f64, f64), a: Rgb, b: Rgb },
    Noise { frequency: f64, lattice: Vec<f64>, a: Rgb, b: Rgb },
    Inset { base: Box<Texture>, detail: Box<Texture>, rect: [f64; 4] },
}

fn mix(a: &Rgb, b: &Rgb, w: f64) -> Rgb {
    [a[0] + (b[0] - a[0]) * w, a[1] + (b[1] - a[1]) * w, a[2] + (b[2] - a[2]) * w]
}

impl Texture {
    fn compile(spec: &TextureSpec, rng: &mut ChaCha8Rng, field: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Parse { location: field.to_string(), message: msg.to_string() };
        Ok(match spec {
            TextureSpec::Constant { color } => Texture::Constant(*color),
            TextureSpec::Checker { period, a, b } => {
                if !(*period > 0.0) {
                    return Err(bad("checker period must be positive"));
                }
                Texture::Checker { period: *period, a: *a, b: *b }
            }
            TextureSpec::Sine { frequency, angle, a, b } => {
                if !(*frequency >= 0.0) {
                    return Err(bad("sine frequency must be non-negative"));
                }
                let rad = angle.to_radians();
                Texture::Sine { frequency: *frequency, dir: (rad.cos(), rad.sin()), a: *a, b: *b }
            }
            TextureSpec::Noise { frequency, a, b } => {
                if !(*frequency > 0.0) {
                    return Err(bad("noise frequency must be positive"));
                }
                let lattice = (0..NOISE_PERIOD * NOISE_PERIOD).map(|_| rng.gen::<f64>()).collect();
                Texture::Noise { frequency: *frequency, lattice, a: *a, b: *b }
            }
            TextureSpec::Inset { base, detail, rect } => Texture::Inset {
                base: Box::new(Texture::compile(base, rng, &format!("{field}.base"))?),
                detail: Box::new(Texture::compile(detail, rng, &format!("{field}.detail"))?),
                rect: *rect,
            },
        })
    }

    fn eval(&self, u: f64, v: f64) -> Rgb {
        match self {
            Texture::Constant(c) => *c,
            Texture::Checker { period, a, b } => {
                let iu = (2.0 * u / period).floor() as i64;
                let iv = (2.0 * v / period).floor() as i64;
                if (iu + iv).rem_euclid(2) == 0 {
                    *a
                } else {
                    *b
                }
            }
            Texture::Sine { frequency, dir, a, b } => {
                let phase = 2.0 * std::f64::consts::PI * frequency * (u * dir.0 + v * dir.1);
                mix(a, b, 0.5 + 0.5 * phase.sin())
            }
            Texture::Noise { frequency, lattice, a, b } => {
                let x = u * frequency;
                let y = v * frequency;
                let x0 = x.floor();
                let y0 = y.floor();
                let sx = smooth(x - x0);
                let sy = smooth(y - y0);
                let at = |i: f64, j: f64| {
                    let i = (i as i64).rem_euclid(NOISE_PERIOD as i64) as usize;
                    let j = (j as i64).rem_euclid(NOISE_PERIOD as i64) as usize;
                    lattice[j * NOISE_PERIOD + i]
                };
                let top = at(x0, y0) + (at(x0 + 1.0, y0) - at(x0, y0)) * sx;
                let bottom = at(x0, y0 + 1.0) + (at(x0 + 1.0, y0 + 1.0) - at(x0, y0 + 1.0)) * sx;
                mix(a, b, top + (bottom - top) * sy)
            }
            Texture::Inset { base, detail, rect } => {
                if u >= rect[0] && u <= rect[2] && v >= rect[1] && v <= rect[3] {
                    detail.eval(u, v)
                } else {
                    base.eval(u, v)
                }
            }
        }
    }
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

#[derive(Clone, Debug)]
enum Primitive {
    Plane { center: Vec3, normal: Vec3, u_axis: Vec3, v_axis: Vec3, half: [f64; 2], texture: Texture },
    Sphere { center: Vec3, radius: f64, texture: Texture },
}

/// Nearest intersection along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    /// Parameter on the (unnormalized) ray.
    pub t: f64,
    pub color: Rgb,
}

impl Primitive {
    fn hit_t(&self, o: &Vec3, d: &Vec3) -> Option<(f64, f64, f64)> {
        match self {
            Primitive::Plane { center, normal, u_axis, v_axis, half, .. } => {
                let denom = normal.dot(d);
                if denom.abs() < 1e-15 {
                    return None;
                }
                let t = normal.dot(&(center - o)) / denom;
                if !(t > 0.0) {
                    return None;
                }
                let local = o + d * t - center;
                let s = local.dot(u_axis);
                let r = local.dot(v_axis);
                (s.abs() <= half[0] && r.abs() <= half[1]).then_some((t, s, r))
            }
            Primitive::Sphere { center, radius, .. } => {
                let oc = o - center;
                let a = d.dot(d);
                let b = oc.dot(d);
                let c = oc.dot(&oc) - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t = [(-b - sq) / a, (-b + sq) / a].into_iter().find(|t| *t > 0.0)?;
                let n = (o + d * t - center) / *radius;
                let s = radius * n.x.atan2(-n.z);
                let r = radius * n.y.clamp(-1.0, 1.0).asin();
                Some((t, s, r))
            }
        }
    }

    fn texture(&self) -> &Texture {
        match self {
            Primitive::Plane { texture, .. } | Primitive::Sphere { texture, .. } => texture,
        }
    }
}

fn vec3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// A compiled scene: primitives with exact nearest-hit queries.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    name: String,
    primitives: Vec<Primitive>,
    z_min: f64,
    z_max: f64,
}

impl SyntheticScene {
    pub fn from_spec(spec: &SceneSpec) -> Result<Self> {
        if spec.version != SCENE_VERSION {
            return Err(Error::Parse {
                location: "version".into(),
                message: format!("unsupported scene version {}", spec.version),
            });
        }
        let [z_min, z_max] = spec.depth_range;
        if !(z_min > 0.0 && z_max > z_min && z_max.is_finite()) {
            return Err(Error::Parse {
                location: "depth_range".into(),
                message: format!("need 0 < z_min < z_max, got [{z_min}, {z_max}]"),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut primitives = Vec::with_capacity(spec.primitives.len());
        for (i, p) in spec.primitives.iter().enumerate() {
            let field = format!("primitives[{i}]");
            let bad = |msg: &str| Error::Parse { location: field.clone(), message: msg.to_string() };
            primitives.push(match p {
                PrimitiveSpec::Plane { center, normal, u_axis, half_extent, texture } => {
                    let n = vec3(normal).try_normalize(1e-12).ok_or_else(|| bad("normal must be non-zero"))?;
                    let u = vec3(u_axis);
                    let u = (u - n * u.dot(&n))
                        .try_normalize(1e-12)
                        .ok_or_else(|| bad("u_axis must not be parallel to the normal"))?;
                    if !(half_extent[0] > 0.0 && half_extent[1] > 0.0) {
                        return Err(bad("half_extent must be positive"));
                    }
                    Primitive::Plane {
                        center: vec3(center),
                        normal: n,
                        u_axis: u,
                        v_axis: n.cross(&u),
                        half: *half_extent,
                        texture: Texture::compile(texture, &mut rng, &format!("{field}.texture"))?,
                    }
                }
                PrimitiveSpec::Sphere { center, radius, texture } => {
                    if !(*radius > 0.0) {
                        return Err(bad("radius must be positive"));
                    }
                    Primitive::Sphere {
                        center: vec3(center),
                        radius: *radius,
                        texture: Texture::compile(texture, &mut rng, &format!("{field}.texture"))?,
                    }
                }
            });
        }
        Ok(Self { name: spec.name.clone(), primitives, z_min, z_max })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn primitive_count(&self) -> usize {
        self.primitives.len()
    }

    /// Declared scene depth extent `(z_min, z_max)`.
    pub fn depth_extent(&self) -> (f64, f64) {
        (self.z_min, self.z_max)
    }

    pub fn intersect(&self, origin: &Vec3, direction: &Vec3) -> Option<Hit> {
        let mut best: Option<(f64, usize, f64, f64)> = None;
        for (i, p) in self.primitives.iter().enumerate() {
            if let Some((t, s, r)) = p.hit_t(origin, direction) {
                if best.is_none_or(|b| t < b.0) {
                    best = Some((t, i, s, r));
                }
            }
        }
        best.map(|(t, i, s, r)| Hit { t, color: self.primitives[i].texture().eval(s, r) })
    }

    fn nearest_t(&self, origin: &Vec3, direction: &Vec3) -> Option<f64> {
        self.primitives.iter().filter_map(|p| p.hit_t(origin, direction).map(|h| h.0)).min_by(f64::total_cmp)
    }

    /// Camera depth of the nearest hit through pixel `(u, v)`; `+∞` on a miss.
    pub fn depth_query(&self, camera: &Camera, u: usize, v: usize) -> Result<f64> {
        let ray = camera.cast_ray(u, v)?;
        Ok(self.nearest_t(&ray.origin, &ray.direction).map_or(f64::INFINITY, |t| t * camera.focal()))
    }

    /// Color and depth maps with one point-sampled primary ray per pixel.
    /// Misses are black with infinite depth.
    pub fn render(&self, camera: &Camera) -> (Grid, Grid) {
        let w = camera.width();
        let h = camera.height();
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..h)
            .into_par_iter()
            .map(|v| {
                let mut color = Vec::with_capacity(w * 3);
                let mut depth = Vec::with_capacity(w);
                for u in 0..w {
                    let ray = camera.cast_ray(u, v).expect("pixel in range");
                    match self.intersect(&ray.origin, &ray.direction) {
                        Some(hit) => {
                            color.extend_from_slice(&hit.color);
                            depth.push(hit.t * camera.focal());
                        }
                        None => {
                            color.extend_from_slice(&[0.0; 3]);
                            depth.push(f64::INFINITY);
                        }
                    }
                }
                (color, depth)
            })
            .collect();
        let mut color = Vec::with_capacity(w * h * 3);
        let mut depth = Vec::with_capacity(w * h);
        for (c, d) in rows {
            color.extend(c);
            depth.extend(d);
        }
        (
            Grid::from_vec(w, h, 3, color).expect("color buffer sized"),
            Grid::from_vec(w, h, 1, depth).expect("depth buffer sized"),
        )
    }

    /// Depth map only.
    pub fn depth_map(&self, camera: &Camera) -> Grid {
        let w = camera.width();
        let h = camera.height();
        let rows: Vec<Vec<f64>> = (0..h)
            .into_par_iter()
            .map(|v| (0..w).map(|u| self.depth_query(camera, u, v).expect("pixel in range")).collect())
            .collect();
        Grid::from_vec(w, h, 1, rows.concat()).expect("depth buffer sized")
    }
}

impl SurfaceQuery for SyntheticScene {
    fn hit_parameter(&self, origin: &Vec3, direction: &Vec3) -> Option<f64> {
        self.nearest_t(origin, direction)
    }
}

/// Ray-traced `(color, depth)` for each camera.
pub fn render_source_views(scene: &SyntheticScene, cameras: &[Camera]) -> Vec<(Grid, Grid)> {
    cameras.iter().map(|c| scene.render(c)).collect()
}

pub fn gen_scene(spec: &SceneSpec) -> Result<SyntheticScene> {
    SyntheticScene::from_spec(spec)
}

/// Built-in scene names.
pub const PRESETS: &[&str] = &["flat-card", "two-planes", "textured-planes", "empty"];

/// Horizontal field of view of preset cameras.
const PRESET_FOV_DEG: f64 = 45.0;
/// Source camera offset from the target.
const PRESET_BASELINE: f64 = 0.12;

fn plane(center: [f64; 3], half_extent: [f64; 2], texture: TextureSpec) -> PrimitiveSpec {
    PrimitiveSpec::Plane { center, normal: [0.0, 0.0, -1.0], u_axis: [1.0, 0.0, 0.0], half_extent, texture }
}

pub fn preset_spec(name: &str) -> Result<SceneSpec> {
    let spec = |depth_range: [f64; 2], seed: u64, primitives: Vec<PrimitiveSpec>| SceneSpec {
        version: SCENE_VERSION,
        name: name.to_string(),
        seed,
        depth_range,
        primitives,
    };
    Ok(match name {
        "flat-card" => spec(
            [2.0, 4.0],
            1,
            vec![plane(
                [0.0, 0.0, 3.0],
                [4.0, 4.0],
                TextureSpec::Sine { frequency: 1.5, angle: 30.0, a: [0.15, 0.25, 0.6], b: [0.9, 0.8, 0.3] },
            )],
        ),
        "two-planes" => spec(
            [2.0, 4.0],
            7,
            vec![
                plane(
                    [0.0, 0.0, 4.0],
                    [4.0, 4.0],
                    TextureSpec::Inset {
                        base: Box::new(TextureSpec::Sine {
                            frequency: 0.8,
                            angle: 0.0,
                            a: [0.2, 0.45, 0.35],
                            b: [0.55, 0.75, 0.5],
                        }),
                        detail: Box::new(TextureSpec::Checker {
                            period: 0.2,
                            a: [0.85, 0.85, 0.8],
                            b: [0.25, 0.2, 0.3],
                        }),
                        rect: [0.3, 0.3, 1.2, 1.0],
                    },
                ),
                plane(
                    [-0.7, 0.0, 2.0],
                    [0.8, 0.45],
                    TextureSpec::Noise { frequency: 4.0, a: [0.7, 0.3, 0.2], b: [0.95, 0.7, 0.4] },
                ),
            ],
        ),
        "textured-planes" => {
            let a = 35f64.to_radians();
            spec(
                [2.0, 6.0],
                11,
                vec![
                    PrimitiveSpec::Plane {
                        center: [0.0, 0.0, 4.2],
                        normal: [a.sin(), 0.0, -a.cos()],
                        u_axis: [a.cos(), 0.0, a.sin()],
                        half_extent: [5.0, 4.0],
                        texture: TextureSpec::Checker { period: 0.6, a: [0.8, 0.75, 0.6], b: [0.3, 0.35, 0.5] },
                    },
                    PrimitiveSpec::Sphere {
                        center: [0.35, 0.15, 2.8],
                        radius: 0.5,
                        texture: TextureSpec::Noise { frequency: 5.0, a: [0.2, 0.5, 0.25], b: [0.6, 0.9, 0.5] },
                    },
                ],
            )
        }
        "empty" => spec([1.0, 2.0], 0, vec![]),
        other => {
            return Err(Error::Parse {
                location: "preset".into(),
                message: format!("unknown preset '{other}' (known: {})", PRESETS.join(", ")),
            })
        }
    })
}

/// Square rig at `resolution`: the target at the origin looking down `+z`
/// and three sources offset by a small baseline, all converging on the
/// point three units ahead.
pub fn preset_rig(resolution: usize) -> Result<Rig> {
    if resolution == 0 {
        return Err(Error::domain("resolution must be positive"));
    }
    let pitch = 2.0 * (PRESET_FOV_DEG.to_radians() / 2.0).tan() / resolution as f64;
    let up = Vec3::new(0.0, -1.0, 0.0);
    let look = Vec3::new(0.0, 0.0, 3.0);
    let target = Camera::look_at(Vec3::zeros(), look, up, 1.0, pitch, resolution, resolution)?;
    let b = PRESET_BASELINE;
    let sources = [Vec3::new(-b, 0.0, 0.0), Vec3::new(b, 0.0, 0.0), Vec3::new(0.0, -b, 0.0)]
        .iter()
        .map(|eye| Camera::look_at(*eye, look, up, 1.0, pitch, resolution, resolution))
        .collect::<Result<Vec<_>>>()?;
    Ok(Rig { version: RIG_VERSION, target, sources })
}

pub fn preset(name: &str, resolution: usize) -> Result<(SceneSpec, Rig)> {
    Ok((preset_spec(name)?, preset_rig(resolution)?))
}
