//! Self-supervised triangulation loss and its two gradient paths.
//!
//! For every joint the detections `x̂` are triangulated with the weighted
//! DLT, the result is reprojected into every valid view giving `x̄`, and
//!
//! ```text
//! L = Σ_views Σ_joints w · ‖x̂ − x̄‖²
//! ```
//!
//! is accumulated in bounding-box normalized coordinates. The gradient with
//! respect to `x̂` splits into a direct part (`x̄` held fixed) and a part
//! flowing through the triangulation (`x̂` held fixed in the residual). They
//! are blended as `α·direct + (1 − α)·through`.
//!
//! The per-view weights are constants for differentiation: nothing flows
//! through the cluster, median or WSS computations that produce them.

use nalgebra::{DVector, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{solve_dlt, BBox, Camera, CameraRig, DltSystem, Point2, Point3};
use crate::lifting::Pose3D;
use crate::metrics::mean_position_error;

/// Singular gap below which the smallest right singular vector is treated
/// as non-differentiable.
pub const MIN_SINGULAR_GAP: f64 = 1e-9;

pub type Grad2 = Vector2<f64>;

/// Detections of `N_J` joints in `N_C` views, stored in the `[-1, 1]`
/// frame of a per-view bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDetections {
    bboxes: Vec<BBox>,
    /// `[view][joint]`, normalized coordinates.
    points: Vec<Vec<Option<Point2>>>,
}

impl MultiViewDetections {
    pub fn new(bboxes: Vec<BBox>, points: Vec<Vec<Option<Point2>>>) -> Result<Self> {
        if bboxes.len() != points.len() {
            return Err(Error::InvalidInput(format!(
                "{} bounding boxes for {} views",
                bboxes.len(),
                points.len()
            )));
        }
        let n_joints = points.first().map_or(0, Vec::len);
        if points.iter().any(|v| v.len() != n_joints) {
            return Err(Error::InvalidInput("views disagree on the joint count".into()));
        }
        if points.iter().flatten().flatten().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::InvalidInput("non-finite detection".into()));
        }
        Ok(Self { bboxes, points })
    }

    /// Builds detections from pixel coordinates.
    pub fn from_pixels(bboxes: Vec<BBox>, pixels: Vec<Vec<Option<Point2>>>) -> Result<Self> {
        if bboxes.len() != pixels.len() {
            return Err(Error::InvalidInput(format!(
                "{} bounding boxes for {} views",
                bboxes.len(),
                pixels.len()
            )));
        }
        let points = pixels
            .iter()
            .zip(&bboxes)
            .map(|(view, bbox)| view.iter().map(|p| p.map(|p| bbox.normalize(&p))).collect())
            .collect();
        Self::new(bboxes, points)
    }

    pub fn n_views(&self) -> usize {
        self.points.len()
    }

    pub fn n_joints(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn bbox(&self, view: usize) -> &BBox {
        &self.bboxes[view]
    }

    pub fn normalized(&self, view: usize, joint: usize) -> Option<Point2> {
        self.points[view][joint]
    }

    pub fn pixel(&self, view: usize, joint: usize) -> Option<Point2> {
        self.points[view][joint].map(|n| self.bboxes[view].denormalize(&n))
    }

    pub fn set_normalized(&mut self, view: usize, joint: usize, point: Option<Point2>) {
        self.points[view][joint] = point;
    }

    /// Pixel observations of one joint, indexed by view.
    pub fn joint_pixels(&self, joint: usize) -> Vec<Option<Point2>> {
        (0..self.n_views()).map(|v| self.pixel(v, joint)).collect()
    }

    /// `x̂ ← x̂ − step · grad` for every valid detection.
    pub fn descend(&mut self, grad: &[Vec<Grad2>], step: f64) {
        for (view, grads) in self.points.iter_mut().zip(grad) {
            for (p, g) in view.iter_mut().zip(grads) {
                if let Some(p) = p {
                    *p -= g * step;
                }
            }
        }
    }
}

/// A joint left out of the loss or its gradient, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSkip {
    pub joint: usize,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    /// Triangulated point per joint, `None` for skipped joints.
    pub points: Vec<Option<Point3>>,
    pub skipped: Vec<JointSkip>,
}

/// Loss value with both gradient paths, each indexed `[view][joint]` in
/// normalized units. Invalid detections carry zero gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct TriLossResult {
    pub loss: f64,
    pub alpha: f64,
    pub grad_direct: Vec<Vec<Grad2>>,
    pub grad_through_triangulation: Vec<Vec<Grad2>>,
    pub points: Vec<Option<Point3>>,
    /// Joints whose gradient was not computed. Joints skipped only for a
    /// degenerate gradient still contribute to `loss`.
    pub skipped: Vec<JointSkip>,
}

impl TriLossResult {
    pub fn grad_total(&self) -> Vec<Vec<Grad2>> {
        self.grad_total_at(self.alpha)
    }

    /// `α·direct + (1 − α)·through`.
    pub fn grad_total_at(&self, alpha: f64) -> Vec<Vec<Grad2>> {
        self.grad_direct
            .iter()
            .zip(&self.grad_through_triangulation)
            .map(|(d, t)| d.iter().zip(t).map(|(d, t)| d * alpha + t * (1.0 - alpha)).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GradientMode {
    /// Implicit differentiation of the smallest right singular vector.
    #[default]
    Analytic,
    /// Central differences with the given step in normalized units.
    FiniteDifference { step: f64 },
}

struct ViewObs<'a> {
    view: usize,
    camera: &'a Camera,
    bbox: &'a BBox,
    normalized: Point2,
    weight: f64,
}

struct JointEval {
    loss: f64,
    point: Point3,
    /// `(view, direct, through)`.
    grads: Option<Vec<(usize, Grad2, Grad2)>>,
    grad_error: Option<Error>,
}

fn check_shapes(rig: &CameraRig, det: &MultiViewDetections, weights: Option<&[Vec<f64>]>) -> Result<()> {
    if det.n_views() != rig.len() {
        return Err(Error::InvalidInput(format!(
            "detections for {} views, rig has {}",
            det.n_views(),
            rig.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != det.n_views() || w.iter().any(|v| v.len() != det.n_joints()) {
            return Err(Error::InvalidInput("weights must be indexed [view][joint]".into()));
        }
        if w.iter().flatten().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
        }
    }
    Ok(())
}

fn joint_views<'a>(
    rig: &'a CameraRig,
    det: &'a MultiViewDetections,
    weights: Option<&[Vec<f64>]>,
    joint: usize,
) -> Vec<ViewObs<'a>> {
    (0..det.n_views())
        .filter_map(|v| {
            det.normalized(v, joint).map(|n| ViewObs {
                view: v,
                camera: &rig.cameras()[v],
                bbox: det.bbox(v),
                normalized: n,
                weight: weights.map_or(1.0, |w| w[v][joint]),
            })
        })
        .collect()
}

fn triangulate_views(views: &[ViewObs], pixels: &[Point2]) -> Result<DltSystem> {
    let triples: Vec<(&Camera, Point2, f64)> = views
        .iter()
        .zip(pixels)
        .map(|(o, p)| (o.camera, *p, o.weight))
        .collect();
    solve_dlt(&triples)
}

fn pixels_of(views: &[ViewObs]) -> Vec<Point2> {
    views.iter().map(|o| o.bbox.denormalize(&o.normalized)).collect()
}

/// Normalized reprojections of `point` into every view of the joint.
fn reproject(views: &[ViewObs], point: &Point3) -> Result<Vec<Point2>> {
    views
        .iter()
        .map(|o| Ok(o.bbox.normalize(&o.camera.project(point)?)))
        .collect()
}

fn weighted_residual(views: &[ViewObs], detections: &[Point2], reprojections: &[Point2]) -> f64 {
    views
        .iter()
        .zip(detections.iter().zip(reprojections))
        .map(|(o, (n, nb))| o.weight * (n - nb).norm_squared())
        .sum()
}

fn eval_joint_analytic(views: &[ViewObs], want_grad: bool) -> Result<JointEval> {
    let system = triangulate_views(views, &pixels_of(views))?;
    let point = system.point;

    let mut loss = 0.0;
    let mut direct = Vec::with_capacity(views.len());
    // ∂L/∂X through the reprojections.
    let mut dl_dx = Vector3::zeros();
    for o in views {
        let (pixel, jac) = o.camera.project_with_jacobian(&point)?;
        let reprojected = o.bbox.normalize(&pixel);
        let residual = o.normalized - reprojected;
        loss += o.weight * residual.norm_squared();
        direct.push(residual * (2.0 * o.weight));
        let half = o.bbox.half_extent();
        let upstream = -residual * (2.0 * o.weight);
        let scaled = Vector2::new(upstream.x / half.x, upstream.y / half.y);
        dl_dx += jac.transpose() * scaled;
    }
    if !want_grad {
        return Ok(JointEval {
            loss,
            point,
            grads: None,
            grad_error: None,
        });
    }

    let gap = system.singular_gap();
    if gap < MIN_SINGULAR_GAP {
        return Ok(JointEval {
            loss,
            point,
            grads: None,
            grad_error: Some(Error::GradientDegenerate { gap }),
        });
    }
    let through = through_gradient(&system, views, &dl_dx);
    let grads = views
        .iter()
        .zip(direct)
        .zip(through)
        .map(|((o, d), t)| (o.view, d, t))
        .collect();
    Ok(JointEval {
        loss,
        point,
        grads: Some(grads),
        grad_error: None,
    })
}

/// Chain rule from `∂L/∂X` to the normalized detections through the DLT.
///
/// With `M = AᵀA = V Σ² Vᵀ` and `v` the right singular vector of the
/// smallest singular value `σ₃`, a perturbation `dA` moves it by
/// `dv = −Σ_{k<3} v_k (v_kᵀ dM v) / (σ_k² − σ₃²)` where `dM v = dAᵀ A v + Aᵀ dA v`.
/// Each pixel coordinate enters exactly one row of `A`, and that row's
/// derivative is the view's weighted, conditioned depth row.
fn through_gradient(system: &DltSystem, views: &[ViewObs], dl_dx: &Vector3<f64>) -> Vec<Grad2> {
    let v = system.homogeneous();
    let point = system.point;
    let av: DVector<f64> = &system.design * v;
    let sigma_min_sq = system.singular_values[3].powi(2);
    views
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let meta = &system.views[i];
            let half = o.bbox.half_extent();
            let depth_dot_v = meta.depth_row.dot(&v.transpose());
            let mut g = Grad2::zeros();
            for axis in 0..2 {
                let row = 2 * i + axis;
                let a_r = system.design.row(row).transpose();
                let d_row = meta.weight * meta.scale;
                let dm_v = (meta.depth_row.transpose() * av[row] + a_r * depth_dot_v) * d_row;
                let mut dv = nalgebra::Vector4::zeros();
                for k in 0..3 {
                    let vk = system.right_vectors.column(k);
                    let denom = system.singular_values[k].powi(2) - sigma_min_sq;
                    dv -= vk * (vk.dot(&dm_v) / denom);
                }
                let dx = (dv.xyz() - point * dv.w) / v.w;
                g[axis] = dl_dx.dot(&dx) * half[axis];
            }
            g
        })
        .collect()
}

fn eval_joint_finite_difference(views: &[ViewObs], step: f64) -> Result<JointEval> {
    let pixels = pixels_of(views);
    let system = triangulate_views(views, &pixels)?;
    let point = system.point;
    let detections: Vec<Point2> = views.iter().map(|o| o.normalized).collect();
    let reprojected = reproject(views, &point)?;
    let loss = weighted_residual(views, &detections, &reprojected);

    let mut grads = Vec::with_capacity(views.len());
    for (i, o) in views.iter().enumerate() {
        let mut direct = Grad2::zeros();
        let mut through = Grad2::zeros();
        for axis in 0..2 {
            let mut values = [0.0; 2];
            let mut frozen = [0.0; 2];
            for (slot, sign) in [1.0, -1.0].into_iter().enumerate() {
                let mut moved = detections.clone();
                moved[i][axis] += sign * step;
                let moved_pixels: Vec<Point2> = views
                    .iter()
                    .zip(&moved)
                    .map(|(o, n)| o.bbox.denormalize(n))
                    .collect();
                let p = triangulate_views(views, &moved_pixels)?.point;
                values[slot] = weighted_residual(views, &detections, &reproject(views, &p)?);
                frozen[slot] = o.weight * (moved[i] - reprojected[i]).norm_squared();
            }
            through[axis] = (values[0] - values[1]) / (2.0 * step);
            direct[axis] = (frozen[0] - frozen[1]) / (2.0 * step);
        }
        grads.push((o.view, direct, through));
    }
    Ok(JointEval {
        loss,
        point,
        grads: Some(grads),
        grad_error: None,
    })
}

fn skippable(e: &Error) -> bool {
    matches!(
        e,
        Error::InsufficientViews { .. } | Error::DegenerateGeometry(_) | Error::NonPositiveDepth { .. }
    )
}

/// Value of the (weighted) triangulation loss. `weights` is indexed
/// `[view][joint]`; `None` means unit weights. Joints that cannot be
/// triangulated are skipped and listed.
pub fn tri_loss(rig: &CameraRig, det: &MultiViewDetections, weights: Option<&[Vec<f64>]>) -> Result<LossValue> {
    check_shapes(rig, det, weights)?;
    let mut out = LossValue {
        loss: 0.0,
        points: vec![None; det.n_joints()],
        skipped: Vec::new(),
    };
    for joint in 0..det.n_joints() {
        let views = joint_views(rig, det, weights, joint);
        match eval_joint_analytic(&views, false) {
            Ok(eval) => {
                out.loss += eval.loss;
                out.points[joint] = Some(eval.point);
            }
            Err(e) if skippable(&e) => out.skipped.push(JointSkip { joint, error: e }),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Loss with the direct and through-triangulation gradients.
pub fn tri_loss_grad(
    rig: &CameraRig,
    det: &MultiViewDetections,
    weights: Option<&[Vec<f64>]>,
    alpha: f64,
) -> Result<TriLossResult> {
    tri_loss_grad_with(rig, det, weights, alpha, GradientMode::Analytic)
}

pub fn tri_loss_grad_with(
    rig: &CameraRig,
    det: &MultiViewDetections,
    weights: Option<&[Vec<f64>]>,
    alpha: f64,
    mode: GradientMode,
) -> Result<TriLossResult> {
    check_shapes(rig, det, weights)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let zeros = vec![vec![Grad2::zeros(); det.n_joints()]; det.n_views()];
    let mut out = TriLossResult {
        loss: 0.0,
        alpha,
        grad_direct: zeros.clone(),
        grad_through_triangulation: zeros,
        points: vec![None; det.n_joints()],
        skipped: Vec::new(),
    };
    for joint in 0..det.n_joints() {
        let views = joint_views(rig, det, weights, joint);
        let eval = match mode {
            GradientMode::Analytic => eval_joint_analytic(&views, true),
            GradientMode::FiniteDifference { step } => eval_joint_finite_difference(&views, step),
        };
        let eval = match eval {
            Ok(eval) => eval,
            Err(e) if skippable(&e) => {
                out.skipped.push(JointSkip { joint, error: e });
                continue;
            }
            Err(e) => return Err(e),
        };
        out.loss += eval.loss;
        out.points[joint] = Some(eval.point);
        if let Some(e) = eval.grad_error {
            out.skipped.push(JointSkip { joint, error: e });
        }
        for (view, d, t) in eval.grads.into_iter().flatten() {
            out.grad_direct[view][joint] = d;
            out.grad_through_triangulation[view][joint] = t;
        }
    }
    Ok(out)
}

/// One recorded step of [`descend_detections`].
#[derive(Debug, Clone, PartialEq)]
pub struct DescentStep {
    pub step: usize,
    pub loss: f64,
    /// Mean distance of the triangulated joints to the ground truth, mm.
    pub mpjpe_mm: f64,
    /// Mean pixel distance of the detections to their image centers.
    pub center_drift_px: f64,
    pub skipped_joints: usize,
}

fn center_drift(rig: &CameraRig, det: &MultiViewDetections) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (v, camera) in rig.cameras().iter().enumerate() {
        let (w, h) = camera.image_size();
        let center = Point2::new(w as f64 / 2.0, h as f64 / 2.0);
        for j in 0..det.n_joints() {
            if let Some(p) = det.pixel(v, j) {
                total += (p - center).norm();
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Fixed-step gradient descent of the detections on the unweighted loss,
/// using `α·direct + (1 − α)·through`. Row `k` records the state before the
/// `k`-th update; joints with a degenerate gradient keep their detections
/// for that step.
pub fn descend_detections(
    rig: &CameraRig,
    detections: &MultiViewDetections,
    alpha: f64,
    step_size: f64,
    n_steps: usize,
    ground_truth: &Pose3D,
) -> Result<Vec<DescentStep>> {
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::InvalidInput(format!("step size must be positive, got {step_size}")));
    }
    if n_steps == 0 {
        return Err(Error::InvalidInput("at least one step is required".into()));
    }
    if ground_truth.len() != detections.n_joints() {
        return Err(Error::JointCountMismatch {
            pred: detections.n_joints(),
            gt: ground_truth.len(),
        });
    }
    let mut det = detections.clone();
    let mut trajectory = Vec::with_capacity(n_steps);
    for step in 0..n_steps {
        let eval = tri_loss_grad(rig, &det, None, alpha)?;
        let (pred, gt): (Vec<Point3>, Vec<Point3>) = eval
            .points
            .iter()
            .zip(&ground_truth.joints)
            .filter_map(|(p, g)| p.map(|p| (p, *g)))
            .unzip();
        if pred.is_empty() {
            return Err(Error::InsufficientViews { available: 0 });
        }
        trajectory.push(DescentStep {
            step,
            loss: eval.loss,
            mpjpe_mm: mean_position_error(&pred, &gt)?,
            center_drift_px: center_drift(rig, &det),
            skipped_joints: eval.skipped.len(),
        });
        det.descend(&eval.grad_total(), step_size);
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ring_rig(n: usize) -> CameraRig {
        let size = (1920, 1080);
        let k = Camera::centered_intrinsics(1000.0, size);
        let cams = (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                let c = Point3::new(5.0 * a.cos(), 5.0 * a.sin(), 1.6);
                Camera::look_at(k, c, Point3::new(0.0, 0.0, 1.0), Vector3::z(), size).unwrap()
            })
            .collect();
        CameraRig::new(cams).unwrap()
    }

    fn scene(rig: &CameraRig, n: usize, seed: u64) -> (Vec<Point3>, Vec<Vec<Option<Point2>>>, Vec<BBox>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Point3> = (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.0..2.0),
                )
            })
            .collect();
        let pixels: Vec<Vec<Option<Point2>>> = rig
            .cameras()
            .iter()
            .map(|c| pts.iter().map(|p| Some(c.project(p).unwrap())).collect())
            .collect();
        let bboxes = pixels
            .iter()
            .map(|v| BBox::enclosing(v.iter().flatten()).unwrap())
            .collect();
        (pts, pixels, bboxes)
    }

    #[test]
    fn consistent_detections_have_zero_loss_and_gradients() {
        let rig = ring_rig(4);
        let (_, pixels, bboxes) = scene(&rig, 5, 1);
        let det = MultiViewDetections::from_pixels(bboxes, pixels).unwrap();
        assert!(tri_loss(&rig, &det, None).unwrap().loss < 1e-12);
        let r = tri_loss_grad(&rig, &det, None, 0.5).unwrap();
        for g in r.grad_direct.iter().chain(&r.grad_through_triangulation).flatten() {
            assert!(g.norm() < 1e-10);
        }
    }

    #[test]
    fn alpha_one_is_the_direct_gradient() {
        let rig = ring_rig(3);
        let (_, mut pixels, bboxes) = scene(&rig, 3, 2);
        pixels[0][0] = pixels[0][0].map(|p| p + Point2::new(4.0, -3.0));
        let det = MultiViewDetections::from_pixels(bboxes, pixels).unwrap();
        let r = tri_loss_grad(&rig, &det, None, 1.0).unwrap();
        assert_eq!(r.grad_total(), r.grad_direct);
        let r0 = tri_loss_grad(&rig, &det, None, 0.0).unwrap();
        assert_eq!(r0.grad_total(), r0.grad_through_triangulation);
    }

    #[test]
    fn two_view_weights_reduce_to_two_view_residual() {
        let rig = ring_rig(4);
        let (_, mut pixels, bboxes) = scene(&rig, 3, 3);
        for (v, view) in pixels.iter_mut().enumerate() {
            for (j, p) in view.iter_mut().enumerate() {
                *p = p.map(|p| p + Point2::new(v as f64 * 2.0, -(v as f64) + j as f64));
            }
        }
        let det = MultiViewDetections::from_pixels(bboxes.clone(), pixels.clone()).unwrap();
        let weights = vec![vec![0.0; 3], vec![1.0; 3], vec![0.0; 3], vec![1.0; 3]];
        let weighted = tri_loss(&rig, &det, Some(&weights)).unwrap();

        let pair_rig = CameraRig::new(vec![rig.cameras()[1].clone(), rig.cameras()[3].clone()]).unwrap();
        let pair_det =
            MultiViewDetections::from_pixels(vec![bboxes[1], bboxes[3]], vec![pixels[1].clone(), pixels[3].clone()])
                .unwrap();
        let pair = tri_loss(&pair_rig, &pair_det, None).unwrap();
        assert!((weighted.loss - pair.loss).abs() < 1e-12);
    }

    #[test]
    fn batched_loss_matches_per_joint_recomputation() {
        let rig = ring_rig(3);
        let (_, mut pixels, bboxes) = scene(&rig, 6, 4);
        pixels[1][2] = pixels[1][2].map(|p| p + Point2::new(0.0, 7.5));
        let det = MultiViewDetections::from_pixels(bboxes.clone(), pixels.clone()).unwrap();
        let batched = tri_loss(&rig, &det, None).unwrap().loss;

        let mut by_hand = 0.0;
        for j in 0..6 {
            let obs: Vec<_> = (0..3).map(|v| (v, pixels[v][j].unwrap())).collect();
            let x = crate::geometry::triangulate_dlt(&rig, &obs, None).unwrap();
            for v in 0..3 {
                let n = bboxes[v].normalize(&pixels[v][j].unwrap());
                let nb = bboxes[v].normalize(&rig.cameras()[v].project(&x).unwrap());
                by_hand += (n - nb).norm_squared();
            }
        }
        assert!((batched - by_hand).abs() < 1e-12);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let rig = ring_rig(3);
        let (_, mut pixels, bboxes) = scene(&rig, 4, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for view in pixels.iter_mut() {
            for p in view.iter_mut() {
                *p = p.map(|p| p + Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)));
            }
        }
        let det = MultiViewDetections::from_pixels(bboxes, pixels).unwrap();
        let analytic = tri_loss_grad(&rig, &det, None, 0.5).unwrap();
        let numeric =
            tri_loss_grad_with(&rig, &det, None, 0.5, GradientMode::FiniteDifference { step: 1e-6 }).unwrap();
        let (a, n): (Vec<Grad2>, Vec<Grad2>) = (
            analytic.grad_total().into_iter().flatten().collect(),
            numeric.grad_total().into_iter().flatten().collect(),
        );
        let err: f64 = a.iter().zip(&n).map(|(a, n)| (a - n).norm_squared()).sum::<f64>().sqrt();
        let scale: f64 = n.iter().map(|n| n.norm_squared()).sum::<f64>().sqrt();
        assert!(err / scale < 1e-4, "relative error {}", err / scale);
    }

    #[test]
    fn invalid_and_insufficient_joints_are_skipped() {
        let rig = ring_rig(3);
        let (_, mut pixels, bboxes) = scene(&rig, 3, 6);
        pixels[0][1] = None;
        pixels[1][1] = None;
        pixels[2][0] = None;
        let det = MultiViewDetections::from_pixels(bboxes, pixels).unwrap();
        let r = tri_loss_grad(&rig, &det, None, 0.5).unwrap();
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.skipped[0].joint, 1);
        assert!(r.points[1].is_none() && r.points[0].is_some());
        assert_eq!(r.grad_direct[2][0], Grad2::zeros());
    }

    #[test]
    fn argument_validation() {
        let rig = ring_rig(3);
        let (pts, pixels, bboxes) = scene(&rig, 2, 7);
        let det = MultiViewDetections::from_pixels(bboxes, pixels).unwrap();
        assert!(tri_loss_grad(&rig, &det, None, 1.5).is_err());
        assert!(tri_loss(&rig, &det, Some(&[vec![1.0; 2]])).is_err());
        let gt = Pose3D::world(pts);
        assert!(descend_detections(&rig, &det, 0.5, 0.0, 5, &gt).is_err());
        assert!(descend_detections(&rig, &det, 0.5, 0.1, 0, &gt).is_err());
    }

    #[test]
    fn consistent_descent_stays_put() {
        let rig = ring_rig(3);
        let (pts, pixels, bboxes) = scene(&rig, 4, 8);
        let det = MultiViewDetections::from_pixels(bboxes, pixels).unwrap();
        let gt = Pose3D::world(pts);
        for alpha in [0.0, 0.5, 1.0] {
            let traj = descend_detections(&rig, &det, alpha, 0.05, 20, &gt).unwrap();
            assert_eq!(traj.len(), 20);
            for s in &traj {
                assert!(s.loss < 1e-12);
                assert!(s.mpjpe_mm < 1e-5);
            }
        }
    }
}
