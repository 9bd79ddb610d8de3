//! Robust localization of one joint from several views.
//!
//! Every pair of valid views is triangulated into a candidate location; the
//! geometric median of the candidates is the cluster center. Candidates
//! close to the center vote for their two views through a Gaussian kernel,
//! and each view's weight is the median of its votes. The mean squared
//! spread of the cluster (WSS) decides whether the joint is trusted at all.
//!
//! Distances entering the kernel and the spread are expressed in
//! millimeters, matching the units of `sigma_mm` and `wss_threshold_mm`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{triangulate_dlt, triangulate_pair, CameraRig, Point2, Point3};

/// Unordered view pair stored as `(low, high)`.
pub type ViewPair = (usize, usize);

const MM_PER_M: f64 = 1000.0;
const WEISZFELD_MAX_ITERS: usize = 200;
const WEISZFELD_TOL_M: f64 = 1e-9;
const NEWTON_MAX_ITERS: usize = 20;
const COINCIDENCE_TOL_M: f64 = 1e-12;

/// Pairwise-triangulated candidates for one joint and their geometric median.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionCluster {
    candidates: BTreeMap<ViewPair, Point3>,
    center: Point3,
    contributing_views: BTreeSet<usize>,
    degenerate_pairs: Vec<ViewPair>,
}

impl DetectionCluster {
    /// Builds a cluster from already triangulated candidates.
    pub fn from_candidates(candidates: BTreeMap<ViewPair, Point3>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InsufficientViews { available: 0 });
        }
        let mut contributing_views = BTreeSet::new();
        let mut normalized = BTreeMap::new();
        for (&(a, b), p) in &candidates {
            if a == b {
                return Err(Error::InvalidInput(format!("candidate pair ({a}, {b}) repeats a view")));
            }
            contributing_views.insert(a);
            contributing_views.insert(b);
            normalized.insert((a.min(b), a.max(b)), *p);
        }
        let points: Vec<Point3> = normalized.values().copied().collect();
        let center = geometric_median(&points)?;
        Ok(Self {
            candidates: normalized,
            center,
            contributing_views,
            degenerate_pairs: Vec::new(),
        })
    }

    pub fn candidates(&self) -> &BTreeMap<ViewPair, Point3> {
        &self.candidates
    }

    pub fn center(&self) -> Point3 {
        self.center
    }

    pub fn contributing_views(&self) -> &BTreeSet<usize> {
        &self.contributing_views
    }

    /// Pairs whose two-view triangulation was degenerate and got dropped.
    pub fn degenerate_pairs(&self) -> &[ViewPair] {
        &self.degenerate_pairs
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Triangulates every pair of valid views. `joint_obs[c]` is the detection
/// in view `c`, `None` when the joint is not visible there.
pub fn build_cluster(rig: &CameraRig, joint_obs: &[Option<Point2>]) -> Result<DetectionCluster> {
    if joint_obs.len() != rig.len() {
        return Err(Error::InvalidInput(format!(
            "{} observations for a rig of {} cameras",
            joint_obs.len(),
            rig.len()
        )));
    }
    let valid: Vec<(usize, Point2)> = joint_obs
        .iter()
        .enumerate()
        .filter_map(|(c, x)| x.map(|x| (c, x)))
        .collect();
    if valid.len() < 2 {
        return Err(Error::InsufficientViews {
            available: valid.len(),
        });
    }

    let mut candidates = BTreeMap::new();
    let mut degenerate_pairs = Vec::new();
    for (i, &(a, xa)) in valid.iter().enumerate() {
        for &(b, xb) in &valid[i + 1..] {
            let (ca, cb) = (&rig.cameras()[a], &rig.cameras()[b]);
            match triangulate_pair(ca, cb, xa, xb) {
                Ok(p) => {
                    candidates.insert((a, b), p);
                }
                Err(Error::DegenerateGeometry(_)) => degenerate_pairs.push((a, b)),
                Err(e) => return Err(e),
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::DegenerateGeometry(format!(
            "all {} view pairs are degenerate",
            degenerate_pairs.len()
        )));
    }
    let mut cluster = DetectionCluster::from_candidates(candidates)?;
    cluster.degenerate_pairs = degenerate_pairs;
    Ok(cluster)
}

fn distance_sum(points: &[Point3], y: &Point3) -> f64 {
    points.iter().map(|p| (p - y).norm()).sum()
}

fn coordinate_median(points: &[Point3]) -> Point3 {
    Point3::from_fn(|k, _| median(points.iter().map(|p| p[k]).collect()))
}

/// Median with the even-cardinality case resolved to the mean of the two
/// central values. Panics on an empty input.
pub(crate) fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty(), "median of an empty set");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n.is_multiple_of(2) {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    } else {
        values[n / 2]
    }
}

/// Subgradient optimality of `y` when it coincides with input points.
fn optimal_at(points: &[Point3], y: &Point3) -> bool {
    let mut resultant = Point3::zeros();
    let mut multiplicity = 0.0;
    for p in points {
        let d = (p - y).norm();
        if d < COINCIDENCE_TOL_M {
            multiplicity += 1.0;
        } else {
            resultant += (p - y) / d;
        }
    }
    multiplicity > 0.0 && resultant.norm() <= multiplicity
}

/// Damped Newton steps on the distance sum. Weiszfeld is only linearly
/// convergent, and slowly so next to an input point.
fn newton_polish(points: &[Point3], mut y: Point3) -> Point3 {
    let mut f = distance_sum(points, &y);
    for _ in 0..NEWTON_MAX_ITERS {
        let mut gradient = Point3::zeros();
        let mut hessian = Matrix3::zeros();
        for p in points {
            let r = y - p;
            let d = r.norm();
            if d < COINCIDENCE_TOL_M {
                return y;
            }
            let u = r / d;
            gradient += u;
            hessian += (Matrix3::identity() - u * u.transpose()) / d;
        }
        let Some(step) = hessian.lu().solve(&-gradient) else {
            return y;
        };
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-6 {
            let candidate = y + step * t;
            let fc = distance_sum(points, &candidate);
            if fc < f {
                y = candidate;
                f = fc;
                improved = true;
                break;
            }
            t /= 2.0;
        }
        if !improved || (step * t).norm() < WEISZFELD_TOL_M * 1e-3 {
            break;
        }
    }
    y
}

/// Minimizer of the summed Euclidean distance to `points` (Weiszfeld
/// iteration started at the coordinate-wise median).
///
/// When the iterate coincides with input points, the subgradient condition
/// `‖Σ (pᵢ − y)/‖pᵢ − y‖‖ ≤ multiplicity` is tested; if it holds the iterate
/// is optimal, otherwise the Vardi–Zhang modified step moves off the point.
pub fn geometric_median(points: &[Point3]) -> Result<Point3> {
    if points.is_empty() {
        return Err(Error::InvalidInput("geometric median of an empty set".into()));
    }
    if points.len() == 1 {
        return Ok(points[0]);
    }
    let mut y = coordinate_median(points);
    for _ in 0..WEISZFELD_MAX_ITERS {
        let mut numerator = Point3::zeros();
        let mut denominator = 0.0;
        let mut resultant = Point3::zeros();
        let mut multiplicity = 0.0;
        for p in points {
            let d = (p - y).norm();
            if d < COINCIDENCE_TOL_M {
                multiplicity += 1.0;
                continue;
            }
            numerator += p / d;
            denominator += 1.0 / d;
            resultant += (p - y) / d;
        }
        if denominator == 0.0 {
            break;
        }
        let weiszfeld = numerator / denominator;
        let next = if multiplicity > 0.0 {
            let pull = resultant.norm();
            if pull <= multiplicity {
                break;
            }
            let beta = multiplicity / pull;
            weiszfeld * (1.0 - beta) + y * beta
        } else {
            weiszfeld
        };
        debug_assert!(
            distance_sum(points, &next) <= distance_sum(points, &y) * (1.0 + 1e-12) + 1e-15,
            "Weiszfeld step increased the objective"
        );
        let step = (next - y).norm();
        y = next;
        if step < WEISZFELD_TOL_M {
            break;
        }
    }
    let y = newton_polish(points, y);
    // Weiszfeld converges sublinearly towards a minimizer that sits on an
    // input point, so optimal input points are checked explicitly.
    let f = distance_sum(points, &y);
    if let Some(p) = points
        .iter()
        .filter(|p| optimal_at(points, p))
        .min_by(|a, b| distance_sum(points, a).total_cmp(&distance_sum(points, b)))
    {
        if distance_sum(points, p) < f * (1.0 - 1e-12) {
            return Ok(*p);
        }
    }
    Ok(y)
}

/// Gaussian agreement `exp(−d²/σ²)` between each candidate and the cluster
/// center, with `d` in millimeters. Values that would underflow are clamped
/// to the smallest positive normal so every weight stays in `(0, 1]`.
pub fn pairwise_weights(cluster: &DetectionCluster, sigma_mm: f64) -> Result<BTreeMap<ViewPair, f64>> {
    if !(sigma_mm > 0.0 && sigma_mm.is_finite()) {
        return Err(Error::ConfigInvalid(format!("sigma_mm must be positive, got {sigma_mm}")));
    }
    Ok(cluster
        .candidates
        .iter()
        .map(|(&pair, p)| {
            let d_mm = (p - cluster.center).norm() * MM_PER_M;
            (pair, gaussian_agreement(d_mm, sigma_mm))
        })
        .collect())
}

pub(crate) fn gaussian_agreement(distance_mm: f64, sigma_mm: f64) -> f64 {
    (-(distance_mm * distance_mm) / (sigma_mm * sigma_mm))
        .exp()
        .max(f64::MIN_POSITIVE)
}

/// Per-view weight: median of the pairwise weights of all pairs containing
/// the view.
pub fn per_view_weights(
    pairwise: &BTreeMap<ViewPair, f64>,
    views: &BTreeSet<usize>,
) -> Result<BTreeMap<usize, f64>> {
    views
        .iter()
        .map(|&view| {
            let votes: Vec<f64> = pairwise
                .iter()
                .filter(|((a, b), _)| *a == view || *b == view)
                .map(|(_, w)| *w)
                .collect();
            if votes.is_empty() {
                return Err(Error::InvalidInput(format!("view {view} is not part of any pair")));
            }
            Ok((view, median(votes)))
        })
        .collect()
}

/// Normalized within-cluster sum of squares: mean squared candidate distance
/// to the center, in mm².
pub fn wss(cluster: &DetectionCluster) -> f64 {
    let total: f64 = cluster
        .candidates
        .values()
        .map(|p| ((p - cluster.center) * MM_PER_M).norm_squared())
        .sum();
    total / cluster.candidates.len() as f64
}

/// How the WSS is compared against `wss_threshold_mm`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WssCompare {
    /// `√WSS` (RMS candidate spread, mm) against the threshold in mm.
    #[default]
    Rms,
    /// Raw WSS (mm²) against the threshold's numeric value.
    Squared,
}

impl WssCompare {
    pub fn score(self, wss_mm2: f64) -> f64 {
        match self {
            WssCompare::Rms => wss_mm2.sqrt(),
            WssCompare::Squared => wss_mm2,
        }
    }
}

/// Which estimate is reported for an accepted joint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// Weighted DLT over all contributing views.
    #[default]
    Wdlt,
    /// The cluster center itself.
    Geomed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustConfig {
    pub sigma_mm: f64,
    pub wss_threshold_mm: f64,
    /// Uniform weight used for every view of a rejected joint.
    pub fallback_weight: f64,
    pub wss_compare: WssCompare,
    /// When false, joints are never rejected (weights without WSS).
    pub joint_selection: bool,
    pub target: Target,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            sigma_mm: 10.0,
            wss_threshold_mm: 20.0,
            fallback_weight: 1e-3,
            wss_compare: WssCompare::Rms,
            joint_selection: true,
            target: Target::Wdlt,
        }
    }
}

impl RobustConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_mm", self.sigma_mm),
            ("wss_threshold_mm", self.wss_threshold_mm),
            ("fallback_weight", self.fallback_weight),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::ConfigInvalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Outcome of robust triangulation of one joint.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustTriangulation {
    /// `None` when the final (weighted) solve failed; see `failure`.
    pub point: Option<Point3>,
    pub per_view_weights: BTreeMap<usize, f64>,
    pub pairwise_weights: BTreeMap<ViewPair, f64>,
    /// Mean squared candidate spread, mm².
    pub wss_mm2: f64,
    /// The quantity compared against the threshold (see [`WssCompare`]).
    pub wss_score: f64,
    pub rejected: bool,
    pub cluster: DetectionCluster,
    pub failure: Option<Error>,
}

impl RobustTriangulation {
    /// Weights in view order for the valid views, as fed to the final DLT.
    pub fn weights_for(&self, views: &[usize]) -> Vec<f64> {
        views
            .iter()
            .map(|v| self.per_view_weights.get(v).copied().unwrap_or(0.0))
            .collect()
    }
}

/// Full robust localization of one joint: cluster, weights, WSS and the
/// final triangulation.
///
/// Accepted joints are triangulated with their per-view weights. Rejected
/// joints are triangulated with `fallback_weight` on every valid view, which
/// reproduces the unweighted DLT.
pub fn robust_triangulate(
    rig: &CameraRig,
    joint_obs: &[Option<Point2>],
    config: &RobustConfig,
) -> Result<RobustTriangulation> {
    config.validate()?;
    let cluster = build_cluster(rig, joint_obs)?;
    let pairwise = pairwise_weights(&cluster, config.sigma_mm)?;
    let per_view = per_view_weights(&pairwise, &cluster.contributing_views)?;
    let wss_mm2 = wss(&cluster);
    let wss_score = config.wss_compare.score(wss_mm2);
    let rejected = config.joint_selection && wss_score > config.wss_threshold_mm;

    let solved = if rejected {
        let obs: Vec<(usize, Point2)> = joint_obs
            .iter()
            .enumerate()
            .filter_map(|(c, x)| x.map(|x| (c, x)))
            .collect();
        let weights = vec![config.fallback_weight; obs.len()];
        triangulate_dlt(rig, &obs, Some(&weights))
    } else {
        match config.target {
            Target::Geomed => Ok(cluster.center),
            Target::Wdlt => {
                let obs: Vec<(usize, Point2)> = per_view
                    .keys()
                    .map(|&c| (c, joint_obs[c].expect("contributing views are valid")))
                    .collect();
                let weights: Vec<f64> = per_view.values().copied().collect();
                triangulate_dlt(rig, &obs, Some(&weights))
            }
        }
    };
    let (point, failure) = match solved {
        Ok(p) => (Some(p), None),
        Err(e @ (Error::InsufficientViews { .. } | Error::DegenerateGeometry(_))) => (None, Some(e)),
        Err(e) => return Err(e),
    };
    Ok(RobustTriangulation {
        point,
        per_view_weights: per_view,
        pairwise_weights: pairwise,
        wss_mm2,
        wss_score,
        rejected,
        cluster,
        failure,
    })
}
