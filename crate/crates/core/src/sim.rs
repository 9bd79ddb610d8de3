//! Synthetic scenes and the two experiment runners: triangulation accuracy
//! under circular image noise on a subset of views, and detection descent
//! on the triangulation loss for several gradient blends.
//!
//! Every random draw comes from a ChaCha stream whose seed is derived from
//! the master seed and the cell coordinates, so results do not depend on the
//! order or degree of parallelism in which cells run.

use nalgebra::Vector3;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{triangulate_dlt, BBox, Camera, CameraRig, Point2, Point3};
use crate::lifting::Pose3D;
use crate::losses::{descend_detections, MultiViewDetections};
use crate::robust::{robust_triangulate, RobustConfig};

const STREAM_SCENE: u64 = 1;
const STREAM_ROBUSTNESS: u64 = 2;
const STREAM_STABILITY: u64 = 3;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the stream identified by `path` under `master`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(master), |acc, &k| splitmix(acc ^ splitmix(k)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointVolume {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl PointVolume {
    pub fn center(&self) -> Point3 {
        (Point3::from(self.min) + Point3::from(self.max)) / 2.0
    }
}

impl Default for PointVolume {
    fn default() -> Self {
        Self {
            min: [-1.0, -1.0, 0.0],
            max: [1.0, 1.0, 2.0],
        }
    }
}

/// Cameras evenly spaced on a horizontal ring, all looking at the center of
/// the volume the target points are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub n_cameras: usize,
    pub ring_radius_m: f64,
    pub camera_height_m: f64,
    pub focal_px: f64,
    pub image_size: (u32, u32),
    pub n_points: usize,
    pub point_volume: PointVolume,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_cameras: 6,
            ring_radius_m: 5.0,
            camera_height_m: 1.6,
            focal_px: 1000.0,
            image_size: (1920, 1080),
            n_points: 100,
            point_volume: PointVolume::default(),
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.n_cameras < 2 {
            return bad(format!("n_cameras must be at least 2, got {}", self.n_cameras));
        }
        if !(self.ring_radius_m > 0.0 && self.ring_radius_m.is_finite()) {
            return bad(format!("ring_radius_m must be positive, got {}", self.ring_radius_m));
        }
        if !self.camera_height_m.is_finite() {
            return bad("camera_height_m must be finite".into());
        }
        if !(self.focal_px > 0.0 && self.focal_px.is_finite()) {
            return bad(format!("focal_px must be positive, got {}", self.focal_px));
        }
        if self.image_size.0 == 0 || self.image_size.1 == 0 {
            return bad("image_size must be positive".into());
        }
        if self.n_points == 0 {
            return bad("n_points must be at least 1".into());
        }
        let v = &self.point_volume;
        if (0..3).any(|k| v.min[k] >= v.max[k] || !v.min[k].is_finite() || !v.max[k].is_finite()) {
            return bad("point_volume must have min < max on every axis".into());
        }
        Ok(())
    }

    pub fn build_rig(&self) -> Result<CameraRig> {
        self.validate()?;
        let k = Camera::centered_intrinsics(self.focal_px, self.image_size);
        let target = self.point_volume.center();
        let cameras = (0..self.n_cameras)
            .map(|i| {
                let angle = std::f64::consts::TAU * i as f64 / self.n_cameras as f64;
                let center = Point3::new(
                    self.ring_radius_m * angle.cos(),
                    self.ring_radius_m * angle.sin(),
                    self.camera_height_m,
                );
                Camera::look_at(k, center, target, Vector3::z(), self.image_size)
            })
            .collect::<Result<Vec<_>>>()?;
        CameraRig::new(cameras)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub rig: CameraRig,
    pub points: Vec<Point3>,
    /// Exact projections, `[view][point]`.
    pub projections: Vec<Vec<Point2>>,
}

/// Draws `n_points` uniformly from the point volume and projects them.
/// Every point must land in front of every camera and inside its image.
pub fn generate_scene(config: &SceneConfig) -> Result<Scene> {
    let rig = config.build_rig()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[STREAM_SCENE]));
    let v = &config.point_volume;
    let points: Vec<Point3> = (0..config.n_points)
        .map(|_| Point3::from_fn(|k, _| rng.random_range(v.min[k]..v.max[k])))
        .collect();
    let mut projections = Vec::with_capacity(rig.len());
    for (c, camera) in rig.cameras().iter().enumerate() {
        let mut view = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            let x = camera.project(p).map_err(|_| {
                Error::ConfigInvalid(format!("point {i} lies behind camera {c}"))
            })?;
            if !camera.contains(&x) {
                return Err(Error::ConfigInvalid(format!(
                    "point {i} projects outside the image of camera {c}"
                )));
            }
            view.push(x);
        }
        projections.push(view);
    }
    Ok(Scene {
        rig,
        points,
        projections,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseKind {
    /// Displacement of exactly `radius_px` in a uniformly random direction.
    Circle { radius_px: f64 },
    /// Isotropic `N(0, σ²)` per axis.
    Gaussian { sigma_px: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffectedViews {
    Explicit(Vec<usize>),
    /// This many views drawn at random without replacement.
    Count(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub affected_views: AffectedViews,
}

impl NoiseSpec {
    fn validate(&self, n_views: usize) -> Result<()> {
        let magnitude = match self.kind {
            NoiseKind::Circle { radius_px } => radius_px,
            NoiseKind::Gaussian { sigma_px } => sigma_px,
        };
        if !(magnitude >= 0.0 && magnitude.is_finite()) {
            return Err(Error::ConfigInvalid(format!("noise magnitude must be >= 0, got {magnitude}")));
        }
        match &self.affected_views {
            AffectedViews::Explicit(views) if views.iter().any(|&v| v >= n_views) => Err(Error::ConfigInvalid(
                format!("affected views {views:?} exceed the {n_views} cameras"),
            )),
            AffectedViews::Count(n) if *n > n_views => Err(Error::ConfigInvalid(format!(
                "cannot corrupt {n} of {n_views} views"
            ))),
            _ => Ok(()),
        }
    }
}

/// Perturbs `[view][point]` image points according to `spec`. Returns the
/// noisy points and the sorted list of affected views.
pub fn apply_noise<R: Rng + ?Sized>(
    points2d: &[Vec<Point2>],
    spec: &NoiseSpec,
    rng: &mut R,
) -> Result<(Vec<Vec<Point2>>, Vec<usize>)> {
    spec.validate(points2d.len())?;
    let mut affected = match &spec.affected_views {
        AffectedViews::Explicit(v) => v.clone(),
        AffectedViews::Count(n) => sample(rng, points2d.len(), *n).into_vec(),
    };
    affected.sort_unstable();
    affected.dedup();
    let mut out = points2d.to_vec();
    for &view in &affected {
        for p in out[view].iter_mut() {
            *p += match spec.kind {
                NoiseKind::Circle { radius_px } => {
                    let theta = rng.random_range(0.0..std::f64::consts::TAU);
                    Point2::new(theta.cos(), theta.sin()) * radius_px
                }
                NoiseKind::Gaussian { sigma_px } => {
                    let normal = Normal::new(0.0, sigma_px).expect("validated sigma");
                    Point2::new(normal.sample(rng), normal.sample(rng))
                }
            };
        }
    }
    Ok((out, affected))
}

/// Triangulation variants compared in the robustness sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Unweighted DLT over all views.
    Standard,
    /// Robust weights, joints never rejected.
    WeightsNoWss,
    /// Robust weights with WSS joint rejection.
    WeightsWss,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Standard, Method::WeightsNoWss, Method::WeightsWss];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Standard => "standard",
            Method::WeightsNoWss => "weights_no_wss",
            Method::WeightsWss => "weights_wss",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    pub scene: SceneConfig,
    pub noise_levels_px: Vec<f64>,
    pub noisy_view_counts: Vec<usize>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub robust: RobustConfig,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            noise_levels_px: vec![0.0, 2.0, 5.0, 10.0, 15.0, 20.0],
            noisy_view_counts: (0..=5).collect(),
            methods: Method::ALL.to_vec(),
            trials: 50,
            robust: RobustConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessRow {
    pub experiment: &'static str,
    /// Seed of the noise stream; rows of different methods in the same cell
    /// share it and therefore saw identical noise.
    pub seed: u64,
    pub method: Method,
    pub noise_px: f64,
    pub n_noisy_views: usize,
    pub mpjpe_mm: f64,
    pub skipped_points: usize,
}

fn triangulate_with(method: Method, rig: &CameraRig, obs: &[Option<Point2>], robust: &RobustConfig) -> Option<Point3> {
    match method {
        Method::Standard => {
            let all: Vec<(usize, Point2)> = obs.iter().enumerate().filter_map(|(c, x)| x.map(|x| (c, x))).collect();
            triangulate_dlt(rig, &all, None).ok()
        }
        Method::WeightsNoWss | Method::WeightsWss => {
            let config = RobustConfig {
                joint_selection: method == Method::WeightsWss,
                ..*robust
            };
            robust_triangulate(rig, obs, &config).ok().and_then(|r| r.point)
        }
    }
}

/// Runs every `(noise level, noisy view count, trial)` cell and evaluates
/// each requested method on the same noisy projections. Rows are ordered by
/// level, count, method (in request order), then trial.
pub fn run_robustness_sweep(config: &RobustnessConfig) -> Result<Vec<RobustnessRow>> {
    if config.trials == 0 {
        return Err(Error::ConfigInvalid("trials must be at least 1".into()));
    }
    if config.methods.is_empty() {
        return Err(Error::ConfigInvalid("no methods requested".into()));
    }
    config.robust.validate().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    let scene = generate_scene(&config.scene)?;
    for &count in &config.noisy_view_counts {
        if count > scene.rig.len() {
            return Err(Error::ConfigInvalid(format!(
                "cannot corrupt {count} of {} views",
                scene.rig.len()
            )));
        }
    }
    for &level in &config.noise_levels_px {
        if !(level >= 0.0 && level.is_finite()) {
            return Err(Error::ConfigInvalid(format!("noise level must be >= 0, got {level}")));
        }
    }

    let cells: Vec<(usize, usize, usize)> = (0..config.noise_levels_px.len())
        .flat_map(|l| (0..config.noisy_view_counts.len()).flat_map(move |c| (0..config.trials).map(move |t| (l, c, t))))
        .collect();
    let results: Vec<Vec<RobustnessRow>> = cells
        .par_iter()
        .map(|&(l, c, t)| {
            let level = config.noise_levels_px[l];
            let count = config.noisy_view_counts[c];
            let seed = derive_seed(config.scene.seed, &[STREAM_ROBUSTNESS, l as u64, c as u64, t as u64]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spec = NoiseSpec {
                kind: NoiseKind::Circle { radius_px: level },
                affected_views: AffectedViews::Count(count),
            };
            let (noisy, _) = apply_noise(&scene.projections, &spec, &mut rng)?;
            let rows = config
                .methods
                .iter()
                .map(|&method| {
                    let mut total = 0.0;
                    let mut ok = 0usize;
                    for (i, truth) in scene.points.iter().enumerate() {
                        let obs: Vec<Option<Point2>> = noisy.iter().map(|v| Some(v[i])).collect();
                        if let Some(p) = triangulate_with(method, &scene.rig, &obs, &config.robust) {
                            total += (p - truth).norm() * 1000.0;
                            ok += 1;
                        }
                    }
                    RobustnessRow {
                        experiment: "robustness",
                        seed,
                        method,
                        noise_px: level,
                        n_noisy_views: count,
                        mpjpe_mm: if ok == 0 { f64::NAN } else { total / ok as f64 },
                        skipped_points: scene.points.len() - ok,
                    }
                })
                .collect();
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    // Regroup from (level, count, trial)[method] into level, count, method, trial.
    let trials = config.trials;
    let mut rows = Vec::with_capacity(results.len() * config.methods.len());
    for block in results.chunks(trials) {
        for m in 0..config.methods.len() {
            rows.extend(block.iter().map(|cell| cell[m].clone()));
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub scene: SceneConfig,
    pub alphas: Vec<f64>,
    /// Gradient step in normalized bounding-box units.
    pub step_size: f64,
    pub n_steps: usize,
    pub trials: usize,
    /// Gaussian noise on every view except the outlier view.
    pub base_sigma_px: f64,
    /// Gaussian noise on the outlier view.
    pub outlier_sigma_px: f64,
    pub outlier_view: usize,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig {
                n_cameras: 3,
                ..SceneConfig::default()
            },
            alphas: vec![0.0, 0.1, 0.5, 1.0],
            step_size: 0.05,
            n_steps: 500,
            trials: 20,
            base_sigma_px: 1.0,
            outlier_sigma_px: 10.0,
            outlier_view: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub experiment: &'static str,
    /// Seed of the trial's noise stream.
    pub seed: u64,
    pub alpha: f64,
    pub step: usize,
    pub loss: f64,
    pub mpjpe_mm: f64,
    pub center_drift_px: f64,
}

/// Noisy detections for one stability trial, normalized by the bounding box
/// of each view's exact projections.
pub fn stability_detections(scene: &Scene, config: &StabilityConfig, seed: u64) -> Result<MultiViewDetections> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let others: Vec<usize> = (0..scene.rig.len()).filter(|&v| v != config.outlier_view).collect();
    let (noisy, _) = apply_noise(
        &scene.projections,
        &NoiseSpec {
            kind: NoiseKind::Gaussian {
                sigma_px: config.base_sigma_px,
            },
            affected_views: AffectedViews::Explicit(others),
        },
        &mut rng,
    )?;
    let (noisy, _) = apply_noise(
        &noisy,
        &NoiseSpec {
            kind: NoiseKind::Gaussian {
                sigma_px: config.outlier_sigma_px,
            },
            affected_views: AffectedViews::Explicit(vec![config.outlier_view]),
        },
        &mut rng,
    )?;
    let bboxes = scene
        .projections
        .iter()
        .map(|v| BBox::enclosing(v.iter()))
        .collect::<Result<Vec<_>>>()?;
    let pixels = noisy.into_iter().map(|v| v.into_iter().map(Some).collect()).collect();
    MultiViewDetections::from_pixels(bboxes, pixels)
}

/// Descends the detections of every trial once per requested α. Rows are
/// ordered by trial, α (in request order), then step.
pub fn run_stability_study(config: &StabilityConfig) -> Result<Vec<StabilityRow>> {
    if config.scene.n_cameras != 3 {
        return Err(Error::ConfigInvalid(format!(
            "the stability study uses exactly 3 cameras, got {}",
            config.scene.n_cameras
        )));
    }
    if config.trials == 0 || config.n_steps == 0 {
        return Err(Error::ConfigInvalid("trials and n_steps must be at least 1".into()));
    }
    if config.alphas.is_empty() || config.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::ConfigInvalid("alphas must be a non-empty list within [0, 1]".into()));
    }
    if !(config.step_size > 0.0 && config.step_size.is_finite()) {
        return Err(Error::ConfigInvalid(format!("step_size must be positive, got {}", config.step_size)));
    }
    if config.outlier_view >= 3 {
        return Err(Error::ConfigInvalid(format!("outlier_view {} out of range", config.outlier_view)));
    }
    let scene = generate_scene(&config.scene)?;
    let truth = Pose3D::world(scene.points.clone());

    let detections: Vec<(u64, MultiViewDetections)> = (0..config.trials)
        .map(|t| {
            let seed = derive_seed(config.scene.seed, &[STREAM_STABILITY, t as u64]);
            Ok((seed, stability_detections(&scene, config, seed)?))
        })
        .collect::<Result<_>>()?;
    let runs: Vec<(usize, usize)> = (0..config.trials)
        .flat_map(|t| (0..config.alphas.len()).map(move |a| (t, a)))
        .collect();
    let results: Vec<Vec<StabilityRow>> = runs
        .par_iter()
        .map(|&(t, a)| {
            let (seed, det) = &detections[t];
            let alpha = config.alphas[a];
            let trajectory = descend_detections(&scene.rig, det, alpha, config.step_size, config.n_steps, &truth)?;
            Ok(trajectory
                .into_iter()
                .map(|s| StabilityRow {
                    experiment: "stability",
                    seed: *seed,
                    alpha,
                    step: s.step,
                    loss: s.loss,
                    mpjpe_mm: s.mpjpe_mm,
                    center_drift_px: s.center_drift_px,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(results.into_iter().flatten().collect())
}
