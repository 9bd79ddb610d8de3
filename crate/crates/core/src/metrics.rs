//! Pose error metrics. Inputs are in meters, results in millimeters.
//!
//! * MPJPE: mean joint distance after subtracting the root joint.
//! * NMPJPE: MPJPE after applying the least-squares scale
//!   `s* = max(0, ⟨pred, gt⟩ / ⟨pred, pred⟩)` to the root-relative prediction.
//! * PMPJPE: mean joint distance after a least-squares similarity
//!   (rotation, translation, scale) alignment of the prediction.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::lifting::Pose3D;

const MM_PER_M: f64 = 1000.0;
/// Default root (pelvis) joint index.
pub const DEFAULT_ROOT: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub mpjpe_mm: f64,
    pub nmpjpe_mm: f64,
    pub pmpjpe_mm: f64,
    /// Root-relative error of each joint.
    pub per_joint_mm: Vec<f64>,
}

fn check(pred: &Pose3D, gt: &Pose3D, root: usize) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::JointCountMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    if pred.frame != gt.frame {
        return Err(Error::InvalidInput("poses are expressed in different frames".into()));
    }
    if root >= gt.len() {
        return Err(Error::InvalidInput(format!("root index {root} out of range")));
    }
    Ok(())
}

fn root_relative(pose: &Pose3D, root: usize) -> Vec<Point3> {
    let r = pose.joints[root];
    pose.joints.iter().map(|p| p - r).collect()
}

fn mean_distance_mm(a: &[Point3], b: &[Point3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).sum::<f64>() / a.len() as f64 * MM_PER_M
}

/// Mean Euclidean distance in mm, without any alignment.
pub fn mean_position_error(pred: &[Point3], gt: &[Point3]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::JointCountMismatch {
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("no joints to compare".into()));
    }
    Ok(mean_distance_mm(pred, gt))
}

pub fn per_joint_errors(pred: &Pose3D, gt: &Pose3D, root: usize) -> Result<Vec<f64>> {
    check(pred, gt, root)?;
    let (p, g) = (root_relative(pred, root), root_relative(gt, root));
    Ok(p.iter().zip(&g).map(|(a, b)| (a - b).norm() * MM_PER_M).collect())
}

pub fn mpjpe(pred: &Pose3D, gt: &Pose3D, root: usize) -> Result<f64> {
    check(pred, gt, root)?;
    Ok(mean_distance_mm(&root_relative(pred, root), &root_relative(gt, root)))
}

pub fn nmpjpe(pred: &Pose3D, gt: &Pose3D, root: usize) -> Result<f64> {
    check(pred, gt, root)?;
    let (p, g) = (root_relative(pred, root), root_relative(gt, root));
    let pp: f64 = p.iter().map(|x| x.norm_squared()).sum();
    if pp < 1e-12 {
        return Err(Error::DegeneratePose("prediction collapses onto its root".into()));
    }
    let pg: f64 = p.iter().zip(&g).map(|(a, b)| a.dot(b)).sum();
    // A negative factor would be a point reflection, not a scale.
    let s = (pg / pp).max(0.0);
    let scaled: Vec<Point3> = p.iter().map(|x| x * s).collect();
    Ok(mean_distance_mm(&scaled, &g))
}

/// Similarity transform `x ↦ s R x + t` minimizing the summed squared
/// distance from `source` to `target` (Umeyama), with reflections excluded.
pub fn similarity_alignment(source: &[Point3], target: &[Point3]) -> Result<(f64, Matrix3<f64>, Vector3<f64>)> {
    let n = source.len() as f64;
    let mu_s = source.iter().sum::<Point3>() / n;
    let mu_t = target.iter().sum::<Point3>() / n;
    let mut cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, t) in source.iter().zip(target) {
        let (ds, dt) = (s - mu_s, t - mu_t);
        cov += dt * ds.transpose();
        var_s += ds.norm_squared();
    }
    cov /= n;
    var_s /= n;
    if var_s < 1e-12 {
        return Err(Error::DegeneratePose("prediction has no spatial extent".into()));
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegeneratePose("SVD of the cross-covariance failed".into())),
    };
    let sv = svd.singular_values;
    // Rank check on the cross-covariance: collinear joints leave the
    // rotation about their common axis undetermined.
    let mut sorted = [sv[0], sv[1], sv[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    if sorted[1] <= 1e-12 * sorted[0].max(1e-300) {
        return Err(Error::DegeneratePose("joints are collinear".into()));
    }
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        // Flip the axis of the smallest singular value.
        let smallest = (0..3).min_by(|&a, &b| sv[a].total_cmp(&sv[b])).unwrap();
        d[(smallest, smallest)] = -1.0;
    }
    let rotation = u * d * v_t;
    let scale = (Matrix3::from_diagonal(&sv) * d).trace() / var_s;
    let translation = mu_t - scale * rotation * mu_s;
    Ok((scale, rotation, translation))
}

pub fn pmpjpe(pred: &Pose3D, gt: &Pose3D, root: usize) -> Result<f64> {
    check(pred, gt, root)?;
    if gt.len() < 3 {
        return Err(Error::DegeneratePose("at least 3 joints are required".into()));
    }
    let (s, r, t) = similarity_alignment(&pred.joints, &gt.joints)?;
    let aligned: Vec<Point3> = pred.joints.iter().map(|p| s * r * p + t).collect();
    Ok(mean_distance_mm(&aligned, &gt.joints))
}

pub fn evaluate(pred: &Pose3D, gt: &Pose3D, root: usize) -> Result<MetricReport> {
    Ok(MetricReport {
        mpjpe_mm: mpjpe(pred, gt, root)?,
        nmpjpe_mm: nmpjpe(pred, gt, root)?,
        pmpjpe_mm: pmpjpe(pred, gt, root)?,
        per_joint_mm: per_joint_errors(pred, gt, root)?,
    })
}
