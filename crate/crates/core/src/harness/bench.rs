//! Benchmark sweeps over scenes, bundle sizes and sample caps.
//!
//! Runs execute one after another so timings are not perturbed by each
//! other; each run still uses the renderer's bundle parallelism with the
//! configured worker count. Metrics are computed once per run; timings are
//! repeated and reported as medians.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::harness::metrics;
use crate::harness::scene::{preset_rig, preset_spec, render_source_views, SceneSpec, SyntheticScene};
use crate::io;
use crate::renderer::{render_view, RenderConfig, SamplingMode, SourceView, StageTimings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Preset names or paths to scene JSON files.
    pub scenes: Vec<String>,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    pub k_values: Vec<usize>,
    pub n_max_values: Vec<usize>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Also run every configuration with `n_max` samples in every bundle.
    #[serde(default)]
    pub uniform_ablation: bool,
    /// Remaining render settings; `k`, `n_max` and `sampling` are overridden.
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub write_images: bool,
}

fn default_resolution() -> usize {
    128
}

fn default_repetitions() -> usize {
    3
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::domain(format!("cannot read benchmark config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenes.is_empty() {
            return Err(Error::domain("benchmark lists no scenes"));
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::domain("k_values must be non-empty and positive"));
        }
        if self.n_max_values.is_empty() || self.n_max_values.contains(&0) {
            return Err(Error::domain("n_max_values must be non-empty and positive"));
        }
        if self.repetitions == 0 {
            return Err(Error::domain("repetitions must be at least 1"));
        }
        if self.resolution < 11 {
            return Err(Error::domain("resolution must be at least 11 for SSIM"));
        }
        self.render.validate()
    }
}

/// Resolves a preset name or a scene JSON path.
pub fn load_scene(name: &str) -> Result<SceneSpec> {
    if name.ends_with(".json") || Path::new(name).is_file() {
        let text = fs::read_to_string(name).map_err(|e| Error::domain(format!("cannot read scene {name}: {e}")))?;
        SceneSpec::from_json(&text)
    } else {
        preset_spec(name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scene: String,
    pub sampling: SamplingMode,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N_max")]
    pub n_max: usize,
    /// `None` when the render equals the ground truth exactly.
    pub psnr: Option<f64>,
    pub ssim: f64,
    pub avg_samples_per_ray: f64,
    pub total_samples: usize,
    pub histogram: Vec<usize>,
    /// Median over repetitions.
    pub per_stage_ms: BTreeMap<String, f64>,
    /// Total wall-clock of every repetition.
    pub timing_samples_ms: Vec<f64>,
    /// Whether every repetition produced the identical image.
    pub repeatable: bool,
}

impl BenchRow {
    /// The row with timing fields removed, for determinism checks.
    pub fn without_timings(&self) -> Self {
        Self { per_stage_ms: BTreeMap::new(), timing_samples_ms: Vec::new(), ..self.clone() }
    }

    pub fn median_total_ms(&self) -> f64 {
        self.per_stage_ms.get("total").copied().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug)]
pub struct BenchOutcome {
    pub rows: Vec<BenchRow>,
    /// First-repetition image of each row, in row order.
    pub images: Vec<Grid>,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    config: &'a BenchConfig,
    runs: &'a [BenchRow],
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn median_timings(samples: &[StageTimings]) -> BTreeMap<String, f64> {
    let maps: Vec<_> = samples.iter().map(StageTimings::as_map).collect();
    maps[0].keys().map(|k| (k.clone(), median(maps.iter().map(|m| m[k]).collect()))).collect()
}

struct Prepared {
    name: String,
    scene: SyntheticScene,
    sources: Vec<SourceView>,
    target: crate::camera::Camera,
    ground_truth: Grid,
}

fn prepare(name: &str, resolution: usize) -> Result<Prepared> {
    let spec = load_scene(name)?;
    let scene = SyntheticScene::from_spec(&spec)?;
    let rig = preset_rig(resolution)?;
    let sources = render_source_views(&scene, &rig.sources)
        .into_iter()
        .zip(&rig.sources)
        .map(|((img, depth), cam)| SourceView::new(cam.clone(), img, Some(depth)))
        .collect::<Result<Vec<_>>>()?;
    let ground_truth = scene.render(&rig.target).0;
    Ok(Prepared { name: spec.name.clone(), scene, sources, target: rig.target, ground_truth })
}

/// Runs the sweep and returns rows in scene, sampling, K, N_max order.
///
/// Every scene is resolved before the first render, so a bad entry fails
/// fast.
pub fn run_sweep(cfg: &BenchConfig) -> Result<BenchOutcome> {
    cfg.validate()?;
    let specs = cfg.scenes.iter().map(|s| load_scene(s)).collect::<Result<Vec<_>>>()?;
    for spec in &specs {
        SyntheticScene::from_spec(spec)?;
    }
    let modes: &[SamplingMode] =
        if cfg.uniform_ablation { &[SamplingMode::Adaptive, SamplingMode::Uniform] } else { &[SamplingMode::Adaptive] };

    let mut rows = Vec::new();
    let mut images = Vec::new();
    for name in &cfg.scenes {
        let p = prepare(name, cfg.resolution)?;
        for &sampling in modes {
            for &k in &cfg.k_values {
                for &n_max in &cfg.n_max_values {
                    let rc = RenderConfig { k, n_max, sampling, ..cfg.render.clone() };
                    let mut timings = Vec::with_capacity(cfg.repetitions);
                    let mut first = None;
                    let mut repeatable = true;
                    for _ in 0..cfg.repetitions {
                        let report = render_view(&p.scene, &p.sources, &p.target, &rc)?;
                        timings.push(report.timings.clone());
                        match &first {
                            None => first = Some(report),
                            Some(f) => repeatable &= f.image == report.image,
                        }
                    }
                    let report = first.expect("at least one repetition");
                    let psnr = metrics::psnr(&report.image, &p.ground_truth)?;
                    let ssim = metrics::ssim(&report.image, &p.ground_truth)?;
                    log::info!(
                        "{} {:?} K={k} N_max={n_max}: psnr {psnr:.2} dB, {:.3} samples/ray",
                        p.name,
                        sampling,
                        report.avg_samples_per_ray
                    );
                    rows.push(BenchRow {
                        scene: p.name.clone(),
                        sampling,
                        k,
                        n_max,
                        psnr: psnr.is_finite().then_some(psnr),
                        ssim,
                        avg_samples_per_ray: report.avg_samples_per_ray,
                        total_samples: report.total_samples,
                        histogram: report.histogram.clone(),
                        per_stage_ms: median_timings(&timings),
                        timing_samples_ms: timings.iter().map(StageTimings::total).collect(),
                        repeatable,
                    });
                    images.push(report.image);
                }
            }
        }
    }
    Ok(BenchOutcome { rows, images })
}

fn row_file_stem(row: &BenchRow) -> String {
    let mode = match row.sampling {
        SamplingMode::Adaptive => "adaptive",
        SamplingMode::Uniform => "uniform",
    };
    format!("{}_K{}_N{}_{mode}", row.scene, row.k, row.n_max)
}

/// Writes `report.json`, `report.csv` and optionally one PNG per row.
pub fn write_reports(cfg: &BenchConfig, outcome: &BenchOutcome, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let json_path = out_dir.join("report.json");
    let json =
        serde_json::to_string_pretty(&JsonReport { config: cfg, runs: &outcome.rows }).expect("report serializes");
    fs::write(&json_path, json)?;
    written.push(json_path);

    let csv_path = out_dir.join("report.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    let stages: Vec<String> =
        outcome.rows.first().map(|r| r.per_stage_ms.keys().cloned().collect()).unwrap_or_default();
    let mut header: Vec<String> =
        ["scene", "sampling", "K", "N_max", "psnr", "ssim", "avg_samples_per_ray", "total_samples"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    header.extend(stages.iter().map(|s| format!("{s}_ms")));
    w.write_record(&header)?;
    for r in &outcome.rows {
        let mut rec = vec![
            r.scene.clone(),
            format!("{:?}", r.sampling).to_lowercase(),
            r.k.to_string(),
            r.n_max.to_string(),
            r.psnr.map(|p| format!("{p:.4}")).unwrap_or_else(|| "inf".into()),
            format!("{:.6}", r.ssim),
            format!("{:.6}", r.avg_samples_per_ray),
            r.total_samples.to_string(),
        ];
        rec.extend(stages.iter().map(|s| format!("{:.3}", r.per_stage_ms[s])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    written.push(csv_path);

    if cfg.write_images {
        for (row, img) in outcome.rows.iter().zip(&outcome.images) {
            let path = out_dir.join(format!("{}.png", row_file_stem(row)));
            io::write_png(&path, img)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Loads a config file, runs the sweep and writes reports to `out_dir`.
pub fn run_benchmark(config_path: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<BenchOutcome> {
    let cfg = BenchConfig::load(config_path)?;
    let outcome = run_sweep(&cfg)?;
    write_reports(&cfg, &outcome, out_dir.as_ref())?;
    Ok(outcome)
}
