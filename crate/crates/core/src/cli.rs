//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for unreadable or invalid input, 2 when the
//! numerical machinery fails. Settings come from flags, then from the
//! `--config` file, then from built-in defaults.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::animation::{
    detect_knee_crossings, foot_trajectories, interpolate, trajectories_csv, trajectories_svg,
    Animation, InterpolateOptions, KneeConfig, Scheme,
};
use crate::curve::{DiscreteCurve, Topology};
use crate::dp::{DpGrid, DEFAULT_M, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::geometry::{geodesic_closed, geodesic_open, project_to_closed, GeodesicPath};
use crate::grad::DescentOptions;
use crate::io;
use crate::matcher::{invariance_check, match_closed, match_open, MatchOptions, Method, DEFAULT_GEODESIC_STEPS};
use crate::warp::Warp;

#[derive(Debug, Parser)]
#[command(name = "srvmatch", version, about = "Elastic curve matching with feature points")]
pub struct Cli {
    /// JSON file with default settings; unknown keys are rejected.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print optimizer traces to standard error.
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Match two curves and write the warp, energies and geodesic.
    Match(MatchArgs),
    /// Compute the geodesic between two curves without reparametrizing.
    Geodesic(GeodesicArgs),
    /// Interpolate between two animations.
    Animate(AnimateArgs),
    /// Check invariance of the energies under a joint reparametrization.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyArg {
    Open,
    Closed,
}

impl From<TopologyArg> for Topology {
    fn from(t: TopologyArg) -> Self {
        match t {
            TopologyArg::Open => Topology::Open,
            TopologyArg::Closed => Topology::Closed,
        }
    }
}

#[derive(Debug, Args)]
pub struct CurveInputs {
    /// First curve (JSON or CSV).
    pub c0: PathBuf,
    /// Second curve (JSON or CSV).
    pub c1: PathBuf,
    /// Topology of CSV inputs, or an override for JSON inputs.
    #[arg(long, value_enum)]
    pub topology: Option<TopologyArg>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[command(flatten)]
    pub inputs: CurveInputs,
    /// Feature pairs as JSON.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Feature weight; 0 disables the feature term.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// dp, grad or dp+grad.
    #[arg(long)]
    pub method: Option<Method>,
    /// Lattice size of the dynamic program.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Largest lattice step in either direction.
    #[arg(long)]
    pub window: Option<usize>,
    /// Number of geodesic snapshots.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Minimize the symmetrized energy (dp only).
    #[arg(long)]
    pub symmetric: bool,
    /// Match result JSON; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Geodesic path JSON.
    #[arg(long)]
    pub geodesic_out: Option<PathBuf>,
    /// SVG of the correspondence with feature markers.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GeodesicArgs {
    #[command(flatten)]
    pub inputs: CurveInputs,
    /// Number of geodesic snapshots.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Path JSON; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// SVG filmstrip of the snapshots.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    LinearEuler,
    ElasticNoreparam,
    ElasticReparam,
    ElasticFeatures,
    All,
}

#[derive(Debug, Args)]
pub struct AnimateArgs {
    /// First animation (BVH or JSON).
    pub a0: PathBuf,
    /// Second animation (BVH or JSON).
    pub a1: PathBuf,
    /// Interpolation scheme, or `all` for every scheme.
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Blend parameter in [0, 1].
    #[arg(long, conflicts_with = "sweep")]
    pub s: Option<f64>,
    /// Number of uniformly spaced blend parameters from 0 to 1.
    #[arg(long)]
    pub sweep: Option<usize>,
    /// JSON list of `[t0, t1]` feature time pairs in seconds.
    #[arg(long, conflicts_with = "auto_knee")]
    pub feature_times: Option<PathBuf>,
    /// Use the first n knee crossings common to both animations.
    #[arg(long)]
    pub auto_knee: Option<usize>,
    /// Forward axis for knee crossings, as `x,y,z`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub forward: Option<Vec<f64>>,
    /// Feature weight of the elastic-features scheme.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Scale applied to root translation channels before matching.
    #[arg(long)]
    pub translation_weight: Option<f64>,
    /// Output directory for animations and foot trajectories.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Animation file format.
    #[arg(long, value_parser = ["json", "bvh"])]
    pub format: Option<String>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub inputs: CurveInputs,
    /// Feature pairs as JSON.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Amplitude `a` of the test warp `θ + a sin θ`, with |a| < 1.
    #[arg(long, default_value_t = 0.3)]
    pub amplitude: f64,
    /// Report JSON; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// Settings file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lambda: Option<f64>,
    pub method: Option<Method>,
    pub grid: Option<usize>,
    pub window: Option<usize>,
    pub steps: Option<usize>,
    pub topology: Option<TopologyArg>,
    pub symmetric: Option<bool>,
    pub descent: Option<DescentOptions>,
    pub translation_weight: Option<f64>,
    pub knee: Option<KneeConfig>,
    pub scheme: Option<Scheme>,
    pub format: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidInput("lambda must be finite and non-negative".into()));
            }
        }
        if matches!(self.grid, Some(0 | 1)) || self.window == Some(0) {
            return Err(Error::InvalidInput("grid needs at least 2 cells and a positive window".into()));
        }
        if matches!(self.steps, Some(0 | 1)) {
            return Err(Error::InvalidInput("a path needs at least 2 steps".into()));
        }
        if let Some(f) = &self.format {
            if f != "json" && f != "bvh" {
                return Err(Error::InvalidInput(format!("unknown format `{f}`")));
            }
        }
        Ok(())
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Match(a) => cmd_match(a, &cfg, cli.verbose),
        Command::Geodesic(a) => cmd_geodesic(a, &cfg),
        Command::Animate(a) => cmd_animate(a, &cfg, cli.verbose),
        Command::Check(a) => cmd_check(a, &cfg),
    }
}

fn read_pair(inputs: &CurveInputs, cfg: &RunConfig) -> Result<(DiscreteCurve, DiscreteCurve)> {
    let topology = inputs.topology.or(cfg.topology).map(Topology::from);
    let c0 = io::read_curve(&inputs.c0, topology)?;
    let c1 = io::read_curve(&inputs.c1, topology)?;
    if c0.topology() != c1.topology() {
        return Err(Error::InvalidInput("curves have different topologies".into()));
    }
    Ok((c0, c1))
}

fn read_features(path: Option<&Path>) -> Result<FeatureSpec> {
    match path {
        Some(p) => FeatureSpec::from_json(&fs::read_to_string(p)?),
        None => Ok(FeatureSpec::none()),
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn match_options(a: &MatchArgs, cfg: &RunConfig) -> Result<MatchOptions> {
    let m = a.grid.or(cfg.grid).unwrap_or(DEFAULT_M);
    let window = a.window.or(cfg.window).unwrap_or(DEFAULT_WINDOW);
    Ok(MatchOptions {
        method: a.method.or(cfg.method).unwrap_or_default(),
        grid: DpGrid::new(m, window)?,
        descent: cfg.descent.unwrap_or_default(),
        geodesic_steps: a.steps.or(cfg.steps).unwrap_or(DEFAULT_GEODESIC_STEPS),
    })
}

fn cmd_match(a: &MatchArgs, cfg: &RunConfig, verbose: bool) -> Result<()> {
    let (c0, c1) = read_pair(&a.inputs, cfg)?;
    let mut features = read_features(a.features.as_deref())?;
    if let Some(l) = a.lambda.or(cfg.lambda) {
        features.lambda = l;
    }
    features.symmetric |= a.symmetric || cfg.symmetric.unwrap_or(false);
    features.validate()?;
    let opts = match_options(a, cfg)?;
    let r = match c0.topology() {
        Topology::Open => match_open(&c0, &c1, &features, &opts)?,
        Topology::Closed => match_closed(&c0, &c1, &features, &opts)?,
    };
    if verbose {
        eprintln!("{}", serde_json::to_string_pretty(&r.diagnostics)?);
    }
    let geodesic_name = a.geodesic_out.as_ref().map(|p| p.display().to_string());
    if let Some(p) = &a.geodesic_out {
        fs::write(p, io::path_to_json(&r.geodesic)?)?;
    }
    if let Some(p) = &a.svg {
        let pairs: Vec<(f64, f64)> = features.pairs.iter().map(|p| (p.theta0, p.theta1)).collect();
        fs::write(p, io::correspondence_svg(&c0, &c1, &r.warp, &pairs))?;
    }
    emit(a.out.as_deref(), &io::match_to_json(&r, geodesic_name.as_deref())?)
}

fn cmd_geodesic(a: &GeodesicArgs, cfg: &RunConfig) -> Result<()> {
    let (c0, c1) = read_pair(&a.inputs, cfg)?;
    let steps = a.steps.or(cfg.steps).unwrap_or(DEFAULT_GEODESIC_STEPS);
    let path: GeodesicPath = match c0.topology() {
        Topology::Open => geodesic_open(&c0, &c1, steps)?,
        Topology::Closed => {
            for c in [&c0, &c1] {
                project_to_closed(&crate::curve::srvt(c)?)?;
            }
            geodesic_closed(&c0, &c1, steps)?
        }
    };
    if let Some(p) = &a.svg {
        fs::write(p, io::filmstrip_svg(&path))?;
    }
    emit(a.out.as_deref(), &io::path_to_json(&path)?)
}

fn cmd_animate(a: &AnimateArgs, cfg: &RunConfig, verbose: bool) -> Result<()> {
    let a0 = Animation::load(&a.a0)?;
    let a1 = Animation::load(&a.a1)?;
    let schemes: Vec<Scheme> = match a.scheme {
        Some(SchemeArg::All) => Scheme::ALL.to_vec(),
        Some(SchemeArg::LinearEuler) => vec![Scheme::LinearEuler],
        Some(SchemeArg::ElasticNoreparam) => vec![Scheme::ElasticNoreparam],
        Some(SchemeArg::ElasticReparam) => vec![Scheme::ElasticReparam],
        Some(SchemeArg::ElasticFeatures) => vec![Scheme::ElasticFeatures],
        None => vec![cfg.scheme.unwrap_or(Scheme::ElasticFeatures)],
    };
    let blends: Vec<f64> = match (a.s, a.sweep) {
        (Some(s), _) => vec![s],
        (None, Some(k)) if k >= 2 => (0..k).map(|i| i as f64 / (k - 1) as f64).collect(),
        (None, Some(_)) => return Err(Error::InvalidInput("a sweep needs at least 2 values".into())),
        (None, None) => vec![0.5],
    };
    let mut knee = cfg.knee.clone().unwrap_or_default();
    if let Some(f) = &a.forward {
        knee.forward = [f[0], f[1], f[2]];
    }
    let pairs = feature_pairs(a, &a0, &a1, &knee)?;
    if verbose {
        eprintln!("feature times: {pairs:?}");
    }
    let opts = InterpolateOptions {
        lambda: a.lambda.or(cfg.lambda).unwrap_or(1.0),
        translation_weight: a.translation_weight.or(cfg.translation_weight).unwrap_or(1.0),
        ..Default::default()
    };
    let ext = a.format.as_deref().or(cfg.format.as_deref()).unwrap_or("json");
    fs::create_dir_all(&a.out_dir)?;
    let (left, right) = (foot_name(&knee.left), foot_name(&knee.right));
    for scheme in &schemes {
        for &s in &blends {
            let r = interpolate(&a0, &a1, &pairs, *scheme, s, &opts)?;
            let stem = format!("{scheme}_s{s:.3}");
            r.animation.save(&a.out_dir.join(format!("{stem}.{ext}")))?;
            let feet = foot_trajectories(&r.animation, &left, &right)?;
            fs::write(
                a.out_dir.join(format!("{stem}_feet.csv")),
                trajectories_csv(&r.animation, &feet)?,
            )?;
            fs::write(
                a.out_dir.join(format!("{stem}_feet.svg")),
                trajectories_svg(&[(stem.as_str(), &feet)]),
            )?;
        }
    }
    Ok(())
}

/// Foot joint below a knee joint named `<Side>Leg`.
fn foot_name(knee: &str) -> String {
    match knee.strip_suffix("Leg") {
        Some(side) => format!("{side}Foot"),
        None => format!("{knee}Foot"),
    }
}

fn feature_pairs(a: &AnimateArgs, a0: &Animation, a1: &Animation, knee: &KneeConfig) -> Result<Vec<(f64, f64)>> {
    if let Some(p) = &a.feature_times {
        let pairs: Vec<(f64, f64)> = serde_json::from_str(&fs::read_to_string(p)?)?;
        return Ok(pairs);
    }
    let Some(n) = a.auto_knee else {
        return Ok(Vec::new());
    };
    // Pair as many crossings as both animations have, up to n.
    let found = |anim: &Animation| -> Result<Vec<f64>> {
        match detect_knee_crossings(anim, knee, n) {
            Ok(t) => Ok(t),
            Err(Error::InsufficientCrossings { found: k, .. }) if k > 0 => {
                detect_knee_crossings(anim, knee, k)
            }
            Err(e) => Err(e),
        }
    };
    let (t0, t1) = (found(a0)?, found(a1)?);
    Ok(t0.into_iter().zip(t1).collect())
}

fn cmd_check(a: &CheckArgs, cfg: &RunConfig) -> Result<()> {
    let (c0, c1) = read_pair(&a.inputs, cfg)?;
    let mut features = read_features(a.features.as_deref())?;
    if let Some(l) = cfg.lambda {
        features.lambda = l;
    }
    if !(a.amplitude.abs() < 1.0) {
        return Err(Error::InvalidInput("test warp amplitude must lie in (-1, 1)".into()));
    }
    let amp = a.amplitude;
    let n = 4 * c0.len().max(16);
    let warp = Warp::from_fn(n, |t| t + amp * t.sin(), |t| 1.0 + amp * t.cos());
    let report = invariance_check(&c0, &c1, &features, &warp)?;
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&report)?)
}
