use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use conebundle::harness::bench::{self, load_scene};
use conebundle::harness::metrics;
use conebundle::harness::scene::{preset_rig, render_source_views, Rig};
use conebundle::io::{read_pfm, read_png, write_pfm, write_png};
use conebundle::pyramid::LevelSelection;
use conebundle::renderer::{render_with, DepthPrior, ProviderConfig, SamplingMode};
use conebundle::{
    render_oracle, render_view, AnalyticField, ConstantField, FieldProvider, RenderConfig, SourceView, SyntheticScene,
};

#[derive(Parser)]
#[command(name = "conebundle", version, about = "Depth-guided bundle rendering of synthetic scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a scene spec, its rig and ground-truth views.
    SceneGen {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the target view with bundle sampling.
    Render {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        render: RenderArgs,
        /// Target-view depth map (PFM) to use instead of the analytic prior.
        #[arg(long)]
        depth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the target view with the dense per-pixel reference.
    Oracle {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        render: RenderArgs,
        /// Samples per pixel.
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark sweep from a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// PSNR and SSIM between two PNG images.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Write the absolute difference image here.
        #[arg(long)]
        diff: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SceneArgs {
    /// Preset name or path to a scene JSON file.
    #[arg(long, default_value = "two-planes")]
    scene: String,
    /// Camera rig JSON; defaults to the preset rig.
    #[arg(long)]
    rig: Option<PathBuf>,
    /// Square resolution of the preset rig.
    #[arg(long, default_value_t = 128)]
    resolution: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Provider {
    Analytic,
    Constant,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Footprint,
    Base,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampling {
    Adaptive,
    Uniform,
}

/// Overrides applied on top of `--config` (or the defaults).
#[derive(Args)]
struct RenderArgs {
    /// RenderConfig JSON used as the base.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the cross-domain composition weights.
    #[arg(long)]
    cross_domain: bool,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    delta_s_fraction: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum)]
    provider: Option<Provider>,
    #[arg(long)]
    sigma_peak: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Density of the constant provider.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    level_selection: Option<Level>,
    #[arg(long, value_enum)]
    sampling: Option<Sampling>,
}

impl RenderArgs {
    fn resolve(&self) -> Result<RenderConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                RenderConfig::from_json(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None if self.cross_domain => RenderConfig::cross_domain(),
            None => RenderConfig::default(),
        };
        if self.cross_domain {
            let x = RenderConfig::cross_domain();
            cfg.alpha = x.alpha;
            cfg.beta = x.beta;
        }
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { cfg.$field = v; })* };
        }
        set!(k, n_max, delta_s_fraction, alpha, beta, threads);
        if let Some(l) = self.level_selection {
            cfg.level_selection = match l {
                Level::Footprint => LevelSelection::Footprint,
                Level::Base => LevelSelection::Base,
            };
        }
        if let Some(s) = self.sampling {
            cfg.sampling = match s {
                Sampling::Adaptive => SamplingMode::Adaptive,
                Sampling::Uniform => SamplingMode::Uniform,
            };
        }
        let kind = self.provider.unwrap_or(match cfg.provider {
            ProviderConfig::Analytic { .. } => Provider::Analytic,
            ProviderConfig::Constant { .. } => Provider::Constant,
        });
        cfg.provider = match (kind, cfg.provider.clone()) {
            (Provider::Analytic, ProviderConfig::Analytic { sigma_peak, lambda }) => ProviderConfig::Analytic {
                sigma_peak: self.sigma_peak.unwrap_or(sigma_peak),
                lambda: self.lambda.unwrap_or(lambda),
            },
            (Provider::Analytic, _) => ProviderConfig::Analytic {
                sigma_peak: self.sigma_peak.unwrap_or(20.0),
                lambda: self.lambda.unwrap_or(1.0),
            },
            (Provider::Constant, ProviderConfig::Constant { sigma }) => {
                ProviderConfig::Constant { sigma: self.sigma.unwrap_or(sigma) }
            }
            (Provider::Constant, _) => match self.sigma {
                Some(sigma) => ProviderConfig::Constant { sigma },
                None => bail!("--provider constant needs --sigma"),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

struct Loaded {
    scene: SyntheticScene,
    rig: Rig,
    sources: Vec<SourceView>,
}

fn load(args: &SceneArgs) -> Result<Loaded> {
    let spec = load_scene(&args.scene)?;
    let scene = SyntheticScene::from_spec(&spec)?;
    let rig = match &args.rig {
        Some(p) => Rig::from_json(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => preset_rig(args.resolution)?,
    };
    let sources = render_source_views(&scene, &rig.sources)
        .into_iter()
        .zip(&rig.sources)
        .map(|((img, depth), cam)| SourceView::new(cam.clone(), img, Some(depth)))
        .collect::<conebundle::Result<Vec<_>>>()?;
    Ok(Loaded { scene, rig, sources })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn scene_gen(args: &SceneArgs, out: &Path) -> Result<()> {
    let spec = load_scene(&args.scene)?;
    let l = load(args)?;
    ensure_dir(out)?;
    fs::write(out.join("scene.json"), spec.to_json())?;
    fs::write(out.join("rig.json"), l.rig.to_json())?;
    let (img, depth) = l.scene.render(&l.rig.target);
    write_png(out.join("target.png"), &img)?;
    write_pfm(out.join("target_depth.pfm"), &depth)?;
    for (i, s) in l.sources.iter().enumerate() {
        write_png(out.join(format!("source_{i}.png")), &s.image)?;
        if let Some(d) = &s.depth {
            write_pfm(out.join(format!("source_{i}_depth.pfm")), d)?;
        }
    }
    println!("wrote {} views of '{}' to {}", l.sources.len() + 1, l.scene.name(), out.display());
    Ok(())
}

fn render(args: &SceneArgs, ra: &RenderArgs, depth: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = ra.resolve()?;
    let l = load(args)?;
    let report = match depth {
        Some(p) => {
            let prior = DepthPrior::from_map(read_pfm(p)?)?;
            let ds = cfg.delta_s(prior.extent);
            let provider: Box<dyn FieldProvider + '_> = match cfg.provider {
                ProviderConfig::Analytic { sigma_peak, lambda } => {
                    Box::new(AnalyticField::new(&l.scene, sigma_peak, lambda, ds))
                }
                ProviderConfig::Constant { sigma } => Box::new(ConstantField { sigma }),
            };
            render_with(&prior, provider.as_ref(), &l.sources, &l.rig.target, &cfg)?
        }
        None => render_view(&l.scene, &l.sources, &l.rig.target, &cfg)?,
    };
    let truth = l.scene.render(&l.rig.target).0;
    let psnr = metrics::psnr(&report.image, &truth)?;
    ensure_dir(out)?;
    write_png(out.join("render.png"), &report.image)?;
    let summary = report.summary(Some(psnr));
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&summary)?)?;
    println!(
        "K={} N_max={}: {:.3} samples/ray, {} samples, PSNR {psnr:.2} dB, {:.1} ms",
        report.k,
        report.n_max,
        report.avg_samples_per_ray,
        report.total_samples,
        report.timings.total()
    );
    Ok(())
}

fn oracle(args: &SceneArgs, ra: &RenderArgs, n: usize, out: &Path) -> Result<()> {
    let cfg = ra.resolve()?;
    let l = load(args)?;
    let img = render_oracle(&l.scene, &l.sources, &l.rig.target, n, &cfg)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_png(out, &img)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn compare(a: &Path, b: &Path, diff: Option<&Path>) -> Result<()> {
    let ia = read_png(a).with_context(|| format!("reading {}", a.display()))?;
    let ib = read_png(b).with_context(|| format!("reading {}", b.display()))?;
    let m = metrics::compare(&ia, &ib)?;
    if let Some(d) = diff {
        write_png(d, &m.abs_error)?;
    }
    let psnr = if m.psnr.is_finite() { serde_json::json!(m.psnr) } else { serde_json::json!("inf") };
    println!("{}", serde_json::json!({ "psnr": psnr, "ssim": m.ssim }));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::SceneGen { scene, out } => scene_gen(scene, out),
        Command::Render { scene, render: ra, depth, out } => render(scene, ra, depth.as_deref(), out),
        Command::Oracle { scene, render: ra, n, out } => oracle(scene, ra, *n, out),
        Command::Bench { config, out } => {
            let outcome = bench::run_benchmark(config, out)?;
            println!("{} runs written to {}", outcome.rows.len(), out.display());
            Ok(())
        }
        Command::Compare { a, b, diff } => compare(a, b, diff.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
