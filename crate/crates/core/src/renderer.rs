//! Target-view rendering: partition, sample, encode, accumulate, decode.
//!
//! Bundles are independent work units. Each stage maps over the bundle list
//! on a worker pool and collects results in bundle order, so the output is
//! bit-identical for any worker count.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{Camera, Vec3};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::harness::scene::SyntheticScene;
use crate::pyramid::{encode_rays, encode_sphere, LevelSelection, Mipmap, SphereEncoding};
use crate::radiance::{
    accumulate, blend_features, view_deltas, AnalyticField, BundleFeatures, ConstantField, FieldProvider, FieldQuery,
    RadianceSample, SurfaceQuery, ViewDelta,
};
use crate::sampler::{
    adaptive_sample_count, build_cone, bundle_grid_dims, partition_bundles, place_spheres_counting, Bundle, Cone,
    DepthRange, DepthSource, Sphere,
};

/// Density/weight provider selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderConfig {
    Analytic {
        #[serde(default = "default_sigma_peak")]
        sigma_peak: f64,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    Constant {
        sigma: f64,
    },
}

fn default_sigma_peak() -> f64 {
    20.0
}

fn default_lambda() -> f64 {
    1.0
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Analytic { sigma_peak: default_sigma_peak(), lambda: default_lambda() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Sample count from the bundle's depth range.
    #[default]
    Adaptive,
    /// Every bundle gets `n_max` samples.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Bundle edge length in pixels.
    pub k: usize,
    pub n_max: usize,
    /// Minimum sample spacing as a fraction of the scene depth extent.
    pub delta_s_fraction: f64,
    /// Weight of the coarse map.
    pub alpha: f64,
    /// Weight of the fine map.
    pub beta: f64,
    pub provider: ProviderConfig,
    /// Worker count; 0 uses all available cores.
    pub threads: usize,
    pub level_selection: LevelSelection,
    pub sampling: SamplingMode,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            k: 2,
            n_max: 6,
            delta_s_fraction: 1.0 / 64.0,
            alpha: 1.0,
            beta: 1.0,
            provider: ProviderConfig::default(),
            threads: 0,
            level_selection: LevelSelection::Footprint,
            sampling: SamplingMode::Adaptive,
        }
    }
}

impl RenderConfig {
    /// Composition weights for cross-domain inputs.
    pub fn cross_domain() -> Self {
        Self { alpha: 0.5, beta: 1.5, ..Self::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::domain("k must be at least 1"));
        }
        if self.n_max == 0 {
            return Err(Error::domain("n_max must be at least 1"));
        }
        if !(self.delta_s_fraction > 0.0 && self.delta_s_fraction <= 1.0) {
            return Err(Error::domain(format!("delta_s_fraction must lie in (0, 1], got {}", self.delta_s_fraction)));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::domain("alpha and beta must be finite"));
        }
        match self.provider {
            ProviderConfig::Analytic { sigma_peak, lambda } => {
                if !(sigma_peak >= 0.0 && sigma_peak.is_finite() && lambda.is_finite()) {
                    return Err(Error::domain("analytic provider needs finite sigma_peak >= 0 and lambda"));
                }
            }
            ProviderConfig::Constant { sigma } => {
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::domain("constant provider needs finite sigma >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Minimum sample spacing for a scene depth extent.
    pub fn delta_s(&self, extent: (f64, f64)) -> f64 {
        self.delta_s_fraction * (extent.1 - extent.0)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::domain(format!("cannot build worker pool: {e}")))
    }
}

/// A source view: camera, color image, optional depth and its pyramid.
#[derive(Clone, Debug)]
pub struct SourceView {
    pub camera: Camera,
    pub image: Grid,
    pub depth: Option<Grid>,
    pub mipmap: Mipmap,
}

impl SourceView {
    /// Builds the view's pyramid from its color image.
    pub fn new(camera: Camera, image: Grid, depth: Option<Grid>) -> Result<Self> {
        if image.channels() != 3 {
            return Err(Error::mismatch("3-channel source image", image.shape_string()));
        }
        if image.width() != camera.width() || image.height() != camera.height() {
            return Err(Error::mismatch(
                format!("{}x{}", camera.width(), camera.height()),
                format!("{}x{}", image.width(), image.height()),
            ));
        }
        let mipmap = Mipmap::build(image.clone());
        Ok(Self { camera, image, depth, mipmap })
    }
}

/// Per-pixel camera depths of the target view (`+∞` where nothing is hit)
/// and the scene depth extent used to derive the sample spacing.
#[derive(Clone, Debug)]
pub struct DepthPrior {
    pub depths: Grid,
    pub extent: (f64, f64),
    pub source: DepthSource,
}

impl DepthPrior {
    pub fn analytic(scene: &SyntheticScene, target: &Camera) -> Self {
        Self { depths: scene.depth_map(target), extent: scene.depth_extent(), source: DepthSource::Analytic }
    }

    /// Prior from a loaded depth map; the extent spans its finite values.
    pub fn from_map(depths: Grid) -> Result<Self> {
        if depths.channels() != 1 {
            return Err(Error::mismatch("1-channel depth map", depths.shape_string()));
        }
        let (lo, hi) = depths
            .data()
            .iter()
            .filter(|d| d.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::domain("depth map has no positive finite depths"));
        }
        let hi = if hi > lo { hi } else { lo * 1.01 };
        Ok(Self { depths, extent: (lo, hi), source: DepthSource::File })
    }

    /// Sampling range for a bundle: the finite depths over its pixels widened
    /// by `margin`, or a single-sample range at the far extent when every
    /// pixel misses.
    pub fn bundle_range(&self, bundle: &Bundle, margin: f64) -> Result<DepthRange> {
        let depths = bundle.pixels().map(|(_, (u, v))| self.depths.texel(u, v)[0]);
        match DepthRange::from_depths(depths, margin, self.source) {
            Some(r) => r,
            None => DepthRange::new(self.extent.1, margin, self.source),
        }
    }
}

/// Wall-clock time per pipeline stage in milliseconds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub depth_prior: f64,
    pub partition: f64,
    pub sampling: f64,
    pub encoding: f64,
    pub accumulation: f64,
    pub decoding: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.depth_prior + self.partition + self.sampling + self.encoding + self.accumulation + self.decoding
    }

    pub fn as_map(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("depth_prior".to_string(), self.depth_prior),
            ("partition".to_string(), self.partition),
            ("sampling".to_string(), self.sampling),
            ("encoding".to_string(), self.encoding),
            ("accumulation".to_string(), self.accumulation),
            ("decoding".to_string(), self.decoding),
            ("total".to_string(), self.total()),
        ])
    }
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

#[derive(Clone, Debug)]
pub struct RenderReport {
    /// Composed output, clamped to `[0, 1]`.
    pub image: Grid,
    /// Decoded bundle map.
    pub coarse: Grid,
    /// Unfolded per-ray map.
    pub fine: Grid,
    /// Accumulated opacity per bundle.
    pub opacity: Grid,
    pub total_samples: usize,
    pub avg_samples_per_ray: f64,
    /// Sample count of each bundle, row-major over the bundle grid.
    pub samples_per_bundle: Vec<usize>,
    /// `histogram[n]` counts bundles that received `n` samples.
    pub histogram: Vec<usize>,
    pub timings: StageTimings,
    pub k: usize,
    pub n_max: usize,
    pub delta_s: f64,
    /// Sphere radii whose inner square root argument was clamped.
    pub clamped_radii: usize,
}

/// JSON report written next to rendered images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
    pub avg_samples_per_ray: f64,
    pub total_samples: usize,
    pub per_stage_ms: BTreeMap<String, f64>,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N_max")]
    pub n_max: usize,
}

impl RenderReport {
    pub fn summary(&self, psnr: Option<f64>) -> ReportSummary {
        ReportSummary {
            psnr: psnr.filter(|p| p.is_finite()),
            avg_samples_per_ray: self.avg_samples_per_ray,
            total_samples: self.total_samples,
            per_stage_ms: self.timings.as_map(),
            k: self.k,
            n_max: self.n_max,
        }
    }
}

/// Bilinear upsampling of a bundle grid to `width`×`height`, with bundle
/// centers as sample points and border clamping.
pub fn decode_coarse(grid: &Grid, k: usize, width: usize, height: usize) -> Result<Grid> {
    check_bundle_grid(grid, k, width, height)?;
    let kf = k as f64;
    Grid::from_fn(width, height, grid.channels(), |x, y, out| {
        grid.bilinear_into((x as f64 + 0.5) / kf, (y as f64 + 0.5) / kf, out);
    })
}

/// Scatters each bundle's folded `K²·3` ray colors back to its pixels.
pub fn unfold_fine(grid: &Grid, k: usize, width: usize, height: usize) -> Result<Grid> {
    check_bundle_grid(grid, k, width, height)?;
    if grid.channels() != k * k * 3 {
        return Err(Error::mismatch(format!("{} folded values per bundle", k * k * 3), grid.channels()));
    }
    Grid::from_fn(width, height, 3, |x, y, out| {
        let block = grid.texel(x / k, y / k);
        let slot = (y % k) * k + x % k;
        out.copy_from_slice(&block[slot * 3..slot * 3 + 3]);
    })
}

/// Gathers a 3-channel image into folded bundles (absent slots are zero).
pub fn fold_fine(image: &Grid, k: usize) -> Result<Grid> {
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    if image.channels() != 3 {
        return Err(Error::mismatch("3 channels", image.channels()));
    }
    let (gw, gh) = bundle_grid_dims(image.width(), image.height(), k);
    let mut out = Grid::new(gw, gh, k * k * 3)?;
    for y in 0..image.height() {
        for x in 0..image.width() {
            let slot = (y % k) * k + x % k;
            out.texel_mut(x / k, y / k)[slot * 3..slot * 3 + 3].copy_from_slice(image.texel(x, y));
        }
    }
    Ok(out)
}

fn check_bundle_grid(grid: &Grid, k: usize, width: usize, height: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    let (gw, gh) = bundle_grid_dims(width, height, k);
    if grid.width() != gw || grid.height() != gh {
        return Err(Error::mismatch(format!("{gw}x{gh} bundle grid"), format!("{}x{}", grid.width(), grid.height())));
    }
    Ok(())
}

/// `α·coarse + β·fine` without clamping.
pub fn compose_unclamped(coarse: &Grid, fine: &Grid, alpha: f64, beta: f64) -> Result<Grid> {
    coarse.ensure_same_shape(fine)?;
    let data = coarse.data().iter().zip(fine.data()).map(|(c, f)| alpha * c + beta * f).collect();
    Grid::from_vec(coarse.width(), coarse.height(), coarse.channels(), data)
}

/// `α·coarse + β·fine`, clamped to `[0, 1]`.
pub fn compose(coarse: &Grid, fine: &Grid, alpha: f64, beta: f64) -> Result<Grid> {
    let mut g = compose_unclamped(coarse, fine, alpha, beta)?;
    g.data_mut().iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(g)
}

struct SampledBundle {
    cone: Cone,
    spheres: Vec<Sphere>,
    clamped: usize,
}

struct EncodedSphere {
    encoding: SphereEncoding,
    deltas: Vec<Option<ViewDelta>>,
}

fn validate_inputs(sources: &[SourceView], target: &Camera, prior: &DepthPrior) -> Result<()> {
    if sources.is_empty() {
        return Err(Error::domain("at least one source view is required"));
    }
    if prior.depths.width() != target.width() || prior.depths.height() != target.height() {
        return Err(Error::mismatch(
            format!("{}x{} depth prior", target.width(), target.height()),
            prior.depths.shape_string(),
        ));
    }
    let channels = sources[0].mipmap.channels();
    if sources.iter().any(|s| s.mipmap.channels() != channels) {
        return Err(Error::domain("source feature maps disagree on channel count"));
    }
    if channels != 3 {
        return Err(Error::mismatch("3-channel features for the bilinear decoder", channels));
    }
    Ok(())
}

/// Renders `target` from a depth prior and an explicit field provider.
pub fn render_with(
    prior: &DepthPrior,
    provider: &dyn FieldProvider,
    sources: &[SourceView],
    target: &Camera,
    cfg: &RenderConfig,
) -> Result<RenderReport> {
    cfg.validate()?;
    validate_inputs(sources, target, prior)?;
    let pool = cfg.pool()?;
    let (width, height) = (target.width(), target.height());
    let k = cfg.k;
    let delta_s = cfg.delta_s(prior.extent);
    let margin = 0.5 * delta_s;
    let mut timings = StageTimings::default();

    let mips: Vec<&Mipmap> = sources.iter().map(|s| &s.mipmap).collect();
    let images: Vec<&Grid> = sources.iter().map(|s| &s.image).collect();
    let cams: Vec<&Camera> = sources.iter().map(|s| &s.camera).collect();

    let t = Instant::now();
    let bundles = partition_bundles(width, height, k)?;
    timings.partition = elapsed_ms(t);

    let t = Instant::now();
    let sampled: Vec<SampledBundle> = pool.install(|| {
        bundles
            .par_iter()
            .map(|b| {
                let cone = build_cone(target, b)?;
                let range = prior.bundle_range(b, margin)?;
                let n = match cfg.sampling {
                    SamplingMode::Adaptive => adaptive_sample_count(&range, delta_s, cfg.n_max),
                    SamplingMode::Uniform => cfg.n_max,
                };
                let (spheres, clamped) = place_spheres_counting(&cone, &range, n)?;
                Ok(SampledBundle { cone, spheres, clamped })
            })
            .collect::<Result<_>>()
    })?;
    timings.sampling = elapsed_ms(t);

    let t = Instant::now();
    let encoded: Vec<Vec<EncodedSphere>> = pool.install(|| {
        sampled
            .par_iter()
            .map(|sb| {
                sb.spheres
                    .iter()
                    .map(|s| {
                        let mut encoding = encode_sphere(s, &mips, &cams, cfg.level_selection)?;
                        encode_rays(s, &images, &cams, &mut encoding)?;
                        let deltas = view_deltas(s, &sb.cone.axis, &cams, &encoding);
                        Ok(EncodedSphere { encoding, deltas })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()
    })?;
    timings.encoding = elapsed_ms(t);

    let t = Instant::now();
    let features: Vec<BundleFeatures> = pool.install(|| {
        sampled
            .par_iter()
            .zip(encoded.par_iter())
            .map(|(sb, enc)| {
                let mut samples = Vec::with_capacity(sb.spheres.len());
                for (s, e) in sb.spheres.iter().zip(enc) {
                    let q = FieldQuery::new(s, &sb.cone, &e.encoding, &e.deltas);
                    let field = provider.evaluate(&q);
                    if !(field.sigma >= 0.0 && field.sigma.is_finite()) {
                        return Err(Error::domain(format!("provider returned invalid density {}", field.sigma)));
                    }
                    if field.weights.len() != e.encoding.views() {
                        return Err(Error::mismatch(e.encoding.views(), field.weights.len()));
                    }
                    let blended = blend_features(&field.weights, &e.encoding)?;
                    samples.push(RadianceSample::new(s.t, field, blended));
                }
                accumulate(&mut samples)
            })
            .collect::<Result<_>>()
    })?;
    timings.accumulation = elapsed_ms(t);

    let t = Instant::now();
    let (gw, gh) = bundle_grid_dims(width, height, k);
    let mut residual = Grid::new(gw, gh, 3)?;
    let mut folded = Grid::new(gw, gh, k * k * 3)?;
    let mut opacity = Grid::new(gw, gh, 1)?;
    for ((b, f), sb) in bundles.iter().zip(&features).zip(&sampled) {
        let n = sb.cone.rays.len() as f64;
        let mut mean = [0.0; 3];
        for (slot, _) in &sb.cone.rays {
            for (m, v) in mean.iter_mut().zip(&f.rays[slot * 3..slot * 3 + 3]) {
                *m += v;
            }
        }
        let cell = residual.texel_mut(b.bj, b.bi);
        for ((o, j), m) in cell.iter_mut().zip(&f.joint).zip(mean) {
            *o = j - m / n;
        }
        folded.texel_mut(b.bj, b.bi).copy_from_slice(&f.rays);
        opacity.texel_mut(b.bj, b.bi)[0] = f.opacity;
    }
    let coarse = decode_coarse(&residual, k, width, height)?;
    let fine = unfold_fine(&folded, k, width, height)?;
    let image = compose(&coarse, &fine, cfg.alpha, cfg.beta)?;
    timings.decoding = elapsed_ms(t);

    let mut histogram = vec![0usize; cfg.n_max + 1];
    let mut total_samples = 0;
    let mut clamped_radii = 0;
    for sb in &sampled {
        histogram[sb.spheres.len()] += 1;
        total_samples += sb.spheres.len();
        clamped_radii += sb.clamped;
    }
    if clamped_radii > 0 {
        log::warn!("{clamped_radii} sphere radii clamped a negative ‖d_C‖² - f² to zero");
    }

    Ok(RenderReport {
        image,
        coarse,
        fine,
        opacity,
        total_samples,
        avg_samples_per_ray: total_samples as f64 / (width * height) as f64,
        samples_per_bundle: sampled.iter().map(|sb| sb.spheres.len()).collect(),
        histogram,
        timings,
        k,
        n_max: cfg.n_max,
        delta_s,
        clamped_radii,
    })
}

fn provider_for<'a>(scene: &'a SyntheticScene, cfg: &RenderConfig, delta_s: f64) -> Box<dyn FieldProvider + 'a> {
    match cfg.provider {
        ProviderConfig::Analytic { sigma_peak, lambda } => {
            Box::new(AnalyticField::new(scene, sigma_peak, lambda, delta_s))
        }
        ProviderConfig::Constant { sigma } => Box::new(ConstantField { sigma }),
    }
}

/// Renders `target` with the analytic depth prior and the provider selected
/// in `cfg`. The depth prior is timed as its own stage.
pub fn render_view(
    scene: &SyntheticScene,
    sources: &[SourceView],
    target: &Camera,
    cfg: &RenderConfig,
) -> Result<RenderReport> {
    cfg.validate()?;
    if sources.is_empty() {
        return Err(Error::domain("at least one source view is required"));
    }
    let t = Instant::now();
    let prior = DepthPrior::analytic(scene, target);
    let prior_ms = elapsed_ms(t);
    let provider = provider_for(scene, cfg, cfg.delta_s(prior.extent));
    let mut report = render_with(&prior, provider.as_ref(), sources, target, cfg)?;
    report.timings.depth_prior = prior_ms;
    Ok(report)
}

/// Dense per-pixel reference renderer.
///
/// Each pixel is sampled at `n` uniform points inside its own ground-truth
/// depth range (`δs/2` either side of the surface), colors are read
/// bilinearly from full-resolution source images, blended with the same
/// softmax view weighting and composited front to back. No bundles, cones or
/// pyramids are involved. The result equals a `K = 1`, level-0,
/// fixed-`n` bundle render.
pub fn render_oracle(
    scene: &SyntheticScene,
    sources: &[SourceView],
    target: &Camera,
    n: usize,
    cfg: &RenderConfig,
) -> Result<Grid> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::domain("oracle sample count must be at least 1"));
    }
    if sources.is_empty() {
        return Err(Error::domain("at least one source view is required"));
    }
    let (z_min, z_max) = scene.depth_extent();
    let delta_s = cfg.delta_s_fraction * (z_max - z_min);
    let half = 0.5 * delta_s;
    let f = target.focal();
    let r_p = target.footprint().radius;
    let pool = cfg.pool()?;
    let (width, height) = (target.width(), target.height());

    let pixel = |u: usize, v: usize| -> Result<[f64; 3]> {
        let ray = target.cast_ray(u, v)?;
        let surface = scene.hit_parameter(&ray.origin, &ray.direction).map(|t| t * f);
        let center = surface.unwrap_or(z_max);
        let interval = 2.0 * half / n as f64;
        // inscribed radius of the single-pixel cone at distance `dist`
        let dn = ray.direction.norm();
        let lateral = (dn * dn - f * f).max(0.0).sqrt() - r_p;
        let radius_per_dist = f * r_p / (dn * (lateral * lateral + f * f).sqrt());

        let mut color = [0.0; 3];
        let mut optical = 0.0_f64;
        for i in 0..n {
            let z = if n == 1 { center } else { (center - half) + (i as f64 + 0.5) * interval };
            let x = ray.at(z / f);
            let radius = (x - ray.origin).norm() * radius_per_dist;

            let mut logits = Vec::with_capacity(sources.len());
            let mut colors = Vec::with_capacity(sources.len());
            for s in sources {
                let Ok(p) = s.camera.project_point(&x) else { continue };
                if !s.camera.contains(p.x, p.y) {
                    continue;
                }
                let logit = match cfg.provider {
                    ProviderConfig::Analytic { lambda, .. } => {
                        let d_i: Vec3 = s.camera.view_direction(&x)?;
                        -lambda * (d_i - ray.direction).norm()
                    }
                    ProviderConfig::Constant { .. } => 0.0,
                };
                logits.push(logit);
                colors.push(s.image.bilinear(p.x, p.y));
            }
            if logits.is_empty() {
                continue;
            }
            let sigma = match cfg.provider {
                ProviderConfig::Analytic { sigma_peak, .. } => match surface {
                    Some(zs) => {
                        let s = radius.max(half).max(0.5 * interval);
                        sigma_peak * (-((z - zs) * (z - zs)) / (2.0 * s * s)).exp()
                    }
                    None => 0.0,
                },
                ProviderConfig::Constant { sigma } => sigma,
            };
            let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
            let norm: f64 = exps.iter().sum();
            let weight = (-optical).exp() * (1.0 - (-sigma).exp());
            for (e, c) in exps.iter().zip(&colors) {
                for ch in 0..3 {
                    color[ch] += weight * (e / norm) * c[ch];
                }
            }
            optical += sigma;
        }
        Ok(color.map(|c| (cfg.beta * c).clamp(0.0, 1.0)))
    };

    let rows: Vec<Vec<f64>> = pool.install(|| {
        (0..height)
            .into_par_iter()
            .map(|v| {
                let mut row = Vec::with_capacity(width * 3);
                for u in 0..width {
                    row.extend_from_slice(&pixel(u, v)?);
                }
                Ok(row)
            })
            .collect::<Result<_>>()
    })?;
    Grid::from_vec(width, height, 3, rows.concat())
}
