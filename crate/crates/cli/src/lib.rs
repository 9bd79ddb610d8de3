//! `rtv` command-line front end.
//!
//! Exit codes: 0 on success, 2 for unreadable or invalid input, 3 when the
//! geometry of the input makes triangulation impossible.

pub mod csv;
pub mod scene_file;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rtv_core::sim::{run_robustness_sweep, run_stability_study, Method, RobustnessConfig, StabilityConfig};
use rtv_core::{robust_triangulate, triangulate_dlt, Error, Point2, RobustConfig, WssCompare};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use scene_file::{CameraSpec, Detection, FrameDetections, SceneFile, Skeleton};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_GEOMETRY: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Geometry(String),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Geometry(_) => EXIT_GEOMETRY,
            CliError::Input(_) | CliError::Io { .. } => EXIT_INPUT,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::ConfigInvalid(_) | Error::InvalidInput(_) | Error::InvalidCamera(_) => CliError::Input(e.to_string()),
            _ => CliError::Geometry(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rtv", version, about = "Robust multi-view triangulation and synthetic ablations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Triangulate every joint of every frame in a scene file.
    Triangulate(TriangulateArgs),
    /// Triangulation error under circular noise on a subset of views.
    SimRobustness(RobustnessArgs),
    /// Detection descent on the triangulation loss for several α.
    SimStability(StabilityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompareArg {
    Rms,
    Squared,
}

#[derive(Debug, Args)]
pub struct TriangulateArgs {
    /// Scene file (JSON).
    pub scene: PathBuf,
    /// Weighted triangulation with joint rejection (default).
    #[arg(long, conflicts_with = "standard")]
    pub robust: bool,
    /// Unweighted DLT over every valid view.
    #[arg(long)]
    pub standard: bool,
    /// Pairwise weight bandwidth in mm.
    #[arg(long)]
    pub sigma_mm: Option<f64>,
    /// Rejection threshold on the candidate spread, in mm.
    #[arg(long)]
    pub wss_mm: Option<f64>,
    /// Compare the spread as RMS in mm or as mean squared distance in mm².
    #[arg(long, value_enum)]
    pub wss_compare: Option<CompareArg>,
    /// Output path, `-` for standard output.
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    /// JSON sweep configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cameras on the ring.
    #[arg(long)]
    pub n_cameras: Option<usize>,
    /// Points per scene.
    #[arg(long)]
    pub n_points: Option<usize>,
    /// Camera ring radius in metres.
    #[arg(long)]
    pub ring_radius_m: Option<f64>,
    /// Focal length in pixels.
    #[arg(long)]
    pub focal_px: Option<f64>,
    /// Comma-separated noise radii in pixels.
    #[arg(long, value_delimiter = ',')]
    pub noise_levels: Option<Vec<f64>>,
    /// Comma-separated counts of corrupted views.
    #[arg(long, value_delimiter = ',')]
    pub noisy_views: Option<Vec<usize>>,
    /// Comma-separated subset of standard, weights_no_wss, weights_wss.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Trials per cell.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Pairwise weight bandwidth in mm.
    #[arg(long)]
    pub sigma_mm: Option<f64>,
    /// Rejection threshold on the candidate spread, in mm.
    #[arg(long)]
    pub wss_mm: Option<f64>,
    /// Compare the spread as RMS in mm or as mean squared distance in mm².
    #[arg(long, value_enum)]
    pub wss_compare: Option<CompareArg>,
    /// Output path, `-` for standard output.
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    /// JSON study configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated gradient mixing factors.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Descent steps per trial.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Descent step size.
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Trials per cell.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Points per scene.
    #[arg(long)]
    pub n_points: Option<usize>,
    /// Output path, `-` for standard output.
    #[arg(long, default_value = "-")]
    pub out: String,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("rtv: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let pool = thread_pool()?;
    pool.install(|| match &cli.command {
        Command::Triangulate(args) => cmd_triangulate(args),
        Command::SimRobustness(args) => cmd_sim_robustness(args),
        Command::SimStability(args) => cmd_sim_stability(args),
    })
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var("RTV_THREADS") {
        let n: usize = value
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Input(format!("RTV_THREADS must be a positive integer, got {value:?}")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Input(format!("cannot start worker threads: {e}")))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        context: format!("cannot read {}", path.display()),
        source,
    })
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_file(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Input(format!("invalid config {} at `{}`: {}", path.display(), e.path(), e.inner())))
}

fn write_output(out: &str, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    let io_err = |source| CliError::Io {
        context: format!("cannot write {out}"),
        source,
    };
    if out == "-" {
        let stdout = io::stdout();
        let mut lock = io::BufWriter::new(stdout.lock());
        write(&mut lock).map_err(io_err)
    } else {
        let file = fs::File::create(out).map_err(io_err)?;
        let mut buf = io::BufWriter::new(file);
        write(&mut buf).map_err(io_err)
    }
}

fn apply_robust_flags(
    config: &mut RobustConfig,
    sigma_mm: Option<f64>,
    wss_mm: Option<f64>,
    compare: Option<CompareArg>,
) -> Result<(), CliError> {
    if let Some(s) = sigma_mm {
        config.sigma_mm = s;
    }
    if let Some(w) = wss_mm {
        config.wss_threshold_mm = w;
    }
    if let Some(c) = compare {
        config.wss_compare = match c {
            CompareArg::Rms => WssCompare::Rms,
            CompareArg::Squared => WssCompare::Squared,
        };
    }
    config.validate().map_err(|e| CliError::Input(e.to_string()))
}

#[derive(Debug, Serialize)]
pub struct TriangulationOutput {
    pub version: &'static str,
    pub method: &'static str,
    pub frames: Vec<FrameOutput>,
}

#[derive(Debug, Serialize)]
pub struct FrameOutput {
    pub frame: usize,
    pub joints: Vec<JointOutput>,
}

#[derive(Debug, Serialize)]
pub struct JointOutput {
    pub joint: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub point: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<&'static str>,
    /// Weight of each view in the final solve.
    pub weights: BTreeMap<usize, f64>,
    pub rejected: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wss_mm2: Option<f64>,
}

impl JointOutput {
    fn missing(joint: usize, name: Option<String>) -> Self {
        Self {
            joint,
            name,
            point: None,
            reason: Some("insufficient_views"),
            weights: BTreeMap::new(),
            rejected: false,
            wss_mm2: None,
        }
    }
}

/// Triangulates every frame of `scene`. `robust = None` selects plain DLT.
pub fn triangulate_scene(scene: &SceneFile, robust: Option<&RobustConfig>) -> Result<TriangulationOutput, CliError> {
    let rig = scene.rig()?;
    let names = scene.joints.as_ref().map(|s| &s.names);
    let geometry = |f: usize, j: usize, e: Error| CliError::Geometry(format!("frame {f}, joint {j}: {e}"));
    let mut frames = Vec::with_capacity(scene.detections.len());
    for f in 0..scene.detections.len() {
        let mut joints = Vec::new();
        for (j, obs) in scene.observations(f).into_iter().enumerate() {
            let name = names.map(|n| n[j].clone());
            let valid: Vec<(usize, Point2)> = obs.iter().enumerate().filter_map(|(c, x)| x.map(|x| (c, x))).collect();
            let joint = match robust {
                None => match triangulate_dlt(&rig, &valid, None) {
                    Ok(p) => JointOutput {
                        joint: j,
                        name,
                        point: Some(p.into()),
                        reason: None,
                        weights: valid.iter().map(|&(c, _)| (c, 1.0)).collect(),
                        rejected: false,
                        wss_mm2: None,
                    },
                    Err(Error::InsufficientViews { .. }) => JointOutput::missing(j, name),
                    Err(e) => return Err(geometry(f, j, e)),
                },
                Some(config) => match robust_triangulate(&rig, &obs, config) {
                    Ok(r) => match (r.point, r.failure) {
                        (Some(p), _) => JointOutput {
                            joint: j,
                            name,
                            point: Some(p.into()),
                            reason: None,
                            weights: if r.rejected {
                                valid.iter().map(|&(c, _)| (c, config.fallback_weight)).collect()
                            } else {
                                r.per_view_weights
                            },
                            rejected: r.rejected,
                            wss_mm2: Some(r.wss_mm2),
                        },
                        (None, Some(Error::InsufficientViews { .. })) => JointOutput::missing(j, name),
                        (None, e) => {
                            return Err(geometry(
                                f,
                                j,
                                e.unwrap_or_else(|| Error::DegenerateGeometry("no solution".into())),
                            ))
                        }
                    },
                    Err(Error::InsufficientViews { .. }) => JointOutput::missing(j, name),
                    Err(e) => return Err(geometry(f, j, e)),
                },
            };
            joints.push(joint);
        }
        frames.push(FrameOutput { frame: f, joints });
    }
    Ok(TriangulationOutput {
        version: scene_file::SCENE_VERSION,
        method: if robust.is_some() { "robust" } else { "standard" },
        frames,
    })
}

pub fn cmd_triangulate(args: &TriangulateArgs) -> Result<(), CliError> {
    let scene = SceneFile::from_json(&read_file(&args.scene)?)?;
    let robust = if args.standard {
        None
    } else {
        let mut config = RobustConfig::default();
        apply_robust_flags(&mut config, args.sigma_mm, args.wss_mm, args.wss_compare)?;
        Some(config)
    };
    let output = triangulate_scene(&scene, robust.as_ref())?;
    write_output(&args.out, |w| {
        serde_json::to_writer_pretty(&mut *w, &output)?;
        writeln!(w)?;
        w.flush()
    })
}

pub fn robustness_config(args: &RobustnessArgs) -> Result<RobustnessConfig, CliError> {
    let mut config: RobustnessConfig = match &args.config {
        Some(path) => read_config(path)?,
        None => RobustnessConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.scene.seed = seed;
    }
    if let Some(n) = args.n_cameras {
        config.scene.n_cameras = n;
    }
    if let Some(n) = args.n_points {
        config.scene.n_points = n;
    }
    if let Some(r) = args.ring_radius_m {
        config.scene.ring_radius_m = r;
    }
    if let Some(f) = args.focal_px {
        config.scene.focal_px = f;
    }
    if let Some(levels) = &args.noise_levels {
        config.noise_levels_px = levels.clone();
    }
    if let Some(counts) = &args.noisy_views {
        config.noisy_view_counts = counts.clone();
    }
    if let Some(methods) = &args.methods {
        config.methods = methods
            .iter()
            .map(|m| {
                Method::parse(m.trim()).ok_or_else(|| {
                    CliError::Input(format!(
                        "unknown method {m:?}; expected one of standard, weights_no_wss, weights_wss"
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    apply_robust_flags(&mut config.robust, args.sigma_mm, args.wss_mm, args.wss_compare)?;
    Ok(config)
}

pub fn cmd_sim_robustness(args: &RobustnessArgs) -> Result<(), CliError> {
    let config = robustness_config(args)?;
    let rows = run_robustness_sweep(&config)?;
    write_output(&args.out, |w| csv::write_robustness(w, &rows))
}

pub fn stability_config(args: &StabilityArgs) -> Result<StabilityConfig, CliError> {
    let mut config: StabilityConfig = match &args.config {
        Some(path) => read_config(path)?,
        None => StabilityConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.scene.seed = seed;
    }
    if let Some(alphas) = &args.alphas {
        config.alphas = alphas.clone();
    }
    if let Some(n) = args.steps {
        config.n_steps = n;
    }
    if let Some(s) = args.step_size {
        config.step_size = s;
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(n) = args.n_points {
        config.scene.n_points = n;
    }
    Ok(config)
}

pub fn cmd_sim_stability(args: &StabilityArgs) -> Result<(), CliError> {
    let config = stability_config(args)?;
    let rows = run_stability_study(&config)?;
    write_output(&args.out, |w| csv::write_stability(w, &rows))
}
