//! Pinhole cameras, projection, bounding-box normalization and (weighted)
//! DLT triangulation.
//!
//! All world quantities are in meters and all image quantities in pixels.
//! Lens distortion is not modelled: image points are assumed to already be
//! undistorted.

use nalgebra::{DMatrix, Matrix2x3, Matrix3, Matrix3x4, Matrix4, RowVector4, Vector2, Vector3, Vector4};

use crate::error::{Error, Result};

pub type Point2 = Vector2<f64>;
pub type Point3 = Vector3<f64>;

/// Minimum camera-frame depth for a point to count as in front of a camera.
pub const MIN_DEPTH: f64 = 1e-9;
/// Minimum distance between two camera centers.
pub const MIN_BASELINE: f64 = 1e-6;
/// Observations with a weight at or below this do not count towards the
/// two-view minimum of a weighted triangulation.
pub const MIN_EFFECTIVE_WEIGHT: f64 = 1e-12;

const ROTATION_TOL: f64 = 1e-9;
const HOMOGENEOUS_EPS: f64 = 1e-12;
const RANK_TOL: f64 = 1e-12;

/// A calibrated pinhole view: `x ~ K (R X + t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    intrinsics: Matrix3<f64>,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    image_size: (u32, u32),
}

impl Camera {
    pub fn new(
        intrinsics: Matrix3<f64>,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        image_size: (u32, u32),
    ) -> Result<Self> {
        let k = &intrinsics;
        if !(k.iter().all(|v| v.is_finite())
            && rotation.iter().all(|v| v.is_finite())
            && translation.iter().all(|v| v.is_finite()))
        {
            return Err(Error::InvalidCamera("non-finite camera parameter".into()));
        }
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            return Err(Error::InvalidCamera("intrinsics must be upper-triangular".into()));
        }
        if (k[(2, 2)] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCamera("intrinsics K[2][2] must be 1".into()));
        }
        if k[(0, 0)] <= 0.0 || k[(1, 1)] <= 0.0 {
            return Err(Error::InvalidCamera("focal lengths must be positive".into()));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if ortho >= ROTATION_TOL || (rotation.determinant() - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidCamera(format!(
                "rotation is not a proper orthonormal matrix (deviation {ortho:e})"
            )));
        }
        if image_size.0 == 0 || image_size.1 == 0 {
            return Err(Error::InvalidCamera("image size must be positive".into()));
        }
        Ok(Self {
            intrinsics,
            rotation,
            translation,
            image_size,
        })
    }

    /// Intrinsics with square pixels and the principal point at the image
    /// center.
    pub fn centered_intrinsics(focal_px: f64, image_size: (u32, u32)) -> Matrix3<f64> {
        Matrix3::new(
            focal_px,
            0.0,
            image_size.0 as f64 / 2.0,
            0.0,
            focal_px,
            image_size.1 as f64 / 2.0,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Camera at `center` whose optical axis points at `target`, with image
    /// rows running against `up`.
    pub fn look_at(
        intrinsics: Matrix3<f64>,
        center: Point3,
        target: Point3,
        up: Vector3<f64>,
        image_size: (u32, u32),
    ) -> Result<Self> {
        let forward = (target - center)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidCamera("camera center coincides with target".into()))?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidCamera("up vector parallel to viewing direction".into()))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * center);
        Self::new(intrinsics, rotation, translation, image_size)
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.intrinsics
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn image_size(&self) -> (u32, u32) {
        self.image_size
    }

    /// Camera center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Point3 {
        -(self.rotation.transpose() * self.translation)
    }

    /// `K [R | t]`.
    pub fn projection_matrix(&self) -> Matrix3x4<f64> {
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        rt.set_column(3, &self.translation);
        self.intrinsics * rt
    }

    pub fn to_camera_frame(&self, point: &Point3) -> Point3 {
        self.rotation * point + self.translation
    }

    pub fn project(&self, point: &Point3) -> Result<Point2> {
        let cam = self.to_camera_frame(point);
        if cam.z <= MIN_DEPTH {
            return Err(Error::NonPositiveDepth { depth: cam.z });
        }
        let h = self.intrinsics * cam;
        Ok(Point2::new(h.x / h.z, h.y / h.z))
    }

    /// Projection together with its Jacobian with respect to the world point.
    pub fn project_with_jacobian(&self, point: &Point3) -> Result<(Point2, Matrix2x3<f64>)> {
        let cam = self.to_camera_frame(point);
        if cam.z <= MIN_DEPTH {
            return Err(Error::NonPositiveDepth { depth: cam.z });
        }
        let h = self.intrinsics * cam;
        let uv = Point2::new(h.x / h.z, h.y / h.z);
        let k = &self.intrinsics;
        let du = (k.row(0) - uv.x * k.row(2)) / h.z;
        let dv = (k.row(1) - uv.y * k.row(2)) / h.z;
        let jac = Matrix2x3::from_rows(&[du, dv]) * self.rotation;
        Ok((uv, jac))
    }

    pub fn contains(&self, pixel: &Point2) -> bool {
        pixel.x >= 0.0
            && pixel.y >= 0.0
            && pixel.x <= self.image_size.0 as f64
            && pixel.y <= self.image_size.1 as f64
    }

    /// Isotropic image conditioning: moves the image center to the origin
    /// and scales the half-diagonal to √2.
    pub fn conditioning(&self) -> Matrix3<f64> {
        let (w, h) = (self.image_size.0 as f64, self.image_size.1 as f64);
        let s = std::f64::consts::SQRT_2 / (0.5 * w.hypot(h));
        Matrix3::new(s, 0.0, -s * w / 2.0, 0.0, s, -s * h / 2.0, 0.0, 0.0, 1.0)
    }
}

/// An ordered set of at least two cameras with pairwise distinct centers.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    cameras: Vec<Camera>,
}

impl CameraRig {
    pub fn new(cameras: Vec<Camera>) -> Result<Self> {
        if cameras.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a rig needs at least 2 cameras, got {}",
                cameras.len()
            )));
        }
        for (i, a) in cameras.iter().enumerate() {
            for (j, b) in cameras.iter().enumerate().skip(i + 1) {
                let baseline = (a.center() - b.center()).norm();
                if baseline <= MIN_BASELINE {
                    return Err(Error::InvalidInput(format!(
                        "cameras {i} and {j} share a center (baseline {baseline:e} m)"
                    )));
                }
            }
        }
        Ok(Self { cameras })
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn camera(&self, index: usize) -> Option<&Camera> {
        self.cameras.get(index)
    }

    pub fn cameras(&self) -> &[Camera] {
        &self.cameras
    }

    /// Projects a point into every view.
    pub fn project_all(&self, point: &Point3) -> Result<Vec<Point2>> {
        self.cameras.iter().map(|c| c.project(point)).collect()
    }
}

/// Per-view bookkeeping of an assembled DLT system, needed to differentiate
/// the solution with respect to the image observations.
#[derive(Debug, Clone)]
pub(crate) struct DltView {
    pub weight: f64,
    /// Derivative of the conditioned image coordinate w.r.t. the pixel one.
    pub scale: f64,
    /// Third row of the conditioned projection matrix.
    pub depth_row: RowVector4<f64>,
}

/// A solved homogeneous DLT system `A Ỹ = 0`.
#[derive(Debug, Clone)]
pub(crate) struct DltSystem {
    pub design: DMatrix<f64>,
    /// Singular values in descending order.
    pub singular_values: Vector4<f64>,
    /// Right singular vectors as columns, matching `singular_values`.
    pub right_vectors: Matrix4<f64>,
    pub views: Vec<DltView>,
    pub point: Point3,
}

impl DltSystem {
    pub fn homogeneous(&self) -> Vector4<f64> {
        self.right_vectors.column(3).into_owned()
    }

    /// Gap between the two smallest singular values.
    pub fn singular_gap(&self) -> f64 {
        self.singular_values[2] - self.singular_values[3]
    }
}

/// Assembles and solves the weighted DLT system. Each view contributes the
/// two rows `u·p3 − p1` and `v·p3 − p2` of its conditioned projection,
/// both multiplied by the view's weight.
pub(crate) fn solve_dlt(views: &[(&Camera, Point2, f64)]) -> Result<DltSystem> {
    let mut effective = Vec::with_capacity(views.len());
    for (camera, x, w) in views {
        if !w.is_finite() || *w < 0.0 {
            return Err(Error::InvalidInput(format!("weight {w} is not a finite non-negative number")));
        }
        if !(x.x.is_finite() && x.y.is_finite()) {
            return Err(Error::InvalidInput("non-finite image observation".into()));
        }
        if *w > MIN_EFFECTIVE_WEIGHT {
            effective.push(*camera);
        }
    }
    if effective.len() < 2 {
        return Err(Error::InsufficientViews {
            available: effective.len(),
        });
    }
    let centers: Vec<Point3> = effective.iter().map(|c| c.center()).collect();
    let widest = centers
        .iter()
        .enumerate()
        .flat_map(|(i, a)| centers[i + 1..].iter().map(move |b| (a - b).norm()))
        .fold(0.0_f64, f64::max);
    if widest <= MIN_BASELINE {
        return Err(Error::DegenerateGeometry(format!(
            "camera centers coincide (baseline {widest:e} m)"
        )));
    }

    // The solution is invariant to a common weight scale; dividing by the
    // largest weight makes uniform weights reproduce the unweighted system
    // bit for bit.
    let max_weight = views.iter().map(|v| v.2).fold(0.0_f64, f64::max);
    let mut design = DMatrix::<f64>::zeros(2 * views.len(), 4);
    let mut bookkeeping = Vec::with_capacity(views.len());
    for (i, (camera, x, w)) in views.iter().enumerate() {
        let w = &(w / max_weight);
        let cond = camera.conditioning();
        let p = cond * camera.projection_matrix();
        let xc = cond * x.push(1.0);
        let depth_row = p.row(2).into_owned();
        design.set_row(2 * i, &((xc.x * depth_row - p.row(0)) * *w));
        design.set_row(2 * i + 1, &((xc.y * depth_row - p.row(1)) * *w));
        bookkeeping.push(DltView {
            weight: *w,
            scale: cond[(0, 0)],
            depth_row,
        });
    }

    let svd = design.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::DegenerateGeometry("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut singular_values = Vector4::zeros();
    let mut right_vectors = Matrix4::zeros();
    for (dst, &src) in order.iter().enumerate() {
        singular_values[dst] = svd.singular_values[src];
        right_vectors.set_column(dst, &v_t.row(src).transpose());
    }

    if singular_values[2] <= RANK_TOL * singular_values[0] {
        return Err(Error::DegenerateGeometry(
            "DLT system is rank deficient (near-parallel rays)".into(),
        ));
    }
    let h = right_vectors.column(3);
    if h[3].abs() < HOMOGENEOUS_EPS {
        return Err(Error::DegenerateGeometry(
            "triangulated point lies at infinity".into(),
        ));
    }
    let point = Point3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]);
    Ok(DltSystem {
        design,
        singular_values,
        right_vectors,
        views: bookkeeping,
        point,
    })
}

/// Gathers `(camera, observation, weight)` triples after validating view
/// indices, weights and view distinctness.
pub(crate) fn gather_views<'a>(
    rig: &'a CameraRig,
    observations: &[(usize, Point2)],
    weights: Option<&[f64]>,
) -> Result<Vec<(&'a Camera, Point2, f64)>> {
    if let Some(w) = weights {
        if w.len() != observations.len() {
            return Err(Error::InvalidInput(format!(
                "{} weights for {} observations",
                w.len(),
                observations.len()
            )));
        }
    }
    let mut seen = vec![false; rig.len()];
    observations
        .iter()
        .enumerate()
        .map(|(i, &(view, x))| {
            let camera = rig
                .camera(view)
                .ok_or_else(|| Error::InvalidInput(format!("view index {view} out of range")))?;
            if std::mem::replace(&mut seen[view], true) {
                return Err(Error::InvalidInput(format!("view {view} observed twice")));
            }
            Ok((camera, x, weights.map_or(1.0, |w| w[i])))
        })
        .collect()
}

/// Triangulates one world point from observations in several views.
///
/// With `weights`, both DLT rows of an observation are multiplied by its
/// weight; without, every weight is 1. The result is the dehomogenized right
/// singular vector of the smallest singular value of the stacked system.
pub fn triangulate_dlt(
    rig: &CameraRig,
    observations: &[(usize, Point2)],
    weights: Option<&[f64]>,
) -> Result<Point3> {
    let views = gather_views(rig, observations, weights)?;
    solve_dlt(&views).map(|s| s.point)
}

/// Two-view DLT triangulation.
pub fn triangulate_pair(cam_a: &Camera, cam_b: &Camera, x_a: Point2, x_b: Point2) -> Result<Point3> {
    solve_dlt(&[(cam_a, x_a, 1.0), (cam_b, x_b, 1.0)]).map(|s| s.point)
}

/// Axis-aligned image region used to normalize coordinates to `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    min: Point2,
    max: Point2,
}

impl BBox {
    pub fn new(min: Point2, max: Point2) -> Result<Self> {
        let (width, height) = (max.x - min.x, max.y - min.y);
        if !(width > 0.0 && height > 0.0) || !width.is_finite() || !height.is_finite() {
            return Err(Error::EmptyBBox { width, height });
        }
        Ok(Self { min, max })
    }

    /// Tight box around a set of points.
    pub fn enclosing<'a>(points: impl IntoIterator<Item = &'a Point2>) -> Result<Self> {
        let mut min = Point2::repeat(f64::INFINITY);
        let mut max = Point2::repeat(f64::NEG_INFINITY);
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        Self::new(min, max)
    }

    pub fn min(&self) -> Point2 {
        self.min
    }

    pub fn max(&self) -> Point2 {
        self.max
    }

    pub fn center(&self) -> Point2 {
        (self.min + self.max) / 2.0
    }

    /// Half extent per axis: pixels per normalized unit.
    pub fn half_extent(&self) -> Vector2<f64> {
        (self.max - self.min) / 2.0
    }

    pub fn normalize(&self, p: &Point2) -> Point2 {
        (p - self.center()).component_div(&self.half_extent())
    }

    pub fn denormalize(&self, n: &Point2) -> Point2 {
        self.center() + n.component_mul(&self.half_extent())
    }
}

/// Maps pixel points into the `[-1, 1]` frame of `bbox`.
pub fn normalize_to_bbox(points: &[Point2], bbox: &BBox) -> Vec<Point2> {
    points.iter().map(|p| bbox.normalize(p)).collect()
}

/// Inverse of [`normalize_to_bbox`].
pub fn denormalize_from_bbox(points: &[Point2], bbox: &BBox) -> Vec<Point2> {
    points.iter().map(|p| bbox.denormalize(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ring_rig(n: usize) -> CameraRig {
        let size = (1920, 1080);
        let k = Camera::centered_intrinsics(1000.0, size);
        let target = Point3::new(0.0, 0.0, 1.0);
        let cams = (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                let c = Point3::new(5.0 * a.cos(), 5.0 * a.sin(), 1.6);
                Camera::look_at(k, c, target, Vector3::z(), size).unwrap()
            })
            .collect();
        CameraRig::new(cams).unwrap()
    }

    fn identity_camera() -> Camera {
        Camera::new(Matrix3::identity(), Matrix3::identity(), Vector3::zeros(), (2, 2)).unwrap()
    }

    #[test]
    fn identity_camera_projects_optical_axis_to_origin() {
        let p = identity_camera().project(&Point3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(p, Point2::new(0.0, 0.0));
    }

    #[test]
    fn focal_scaling() {
        let k = Matrix3::from_diagonal(&Vector3::new(1000.0, 1000.0, 1.0));
        let cam = Camera::new(k, Matrix3::identity(), Vector3::zeros(), (100, 100)).unwrap();
        let p = cam.project(&Point3::new(0.1, 0.0, 2.0)).unwrap();
        assert_abs_diff_eq!(p, Point2::new(50.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn behind_camera_is_rejected() {
        let err = identity_camera().project(&Point3::new(0.0, 0.0, -1.0)).unwrap_err();
        assert!(matches!(err, Error::NonPositiveDepth { .. }));
        let err = identity_camera().project(&Point3::new(1.0, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::NonPositiveDepth { .. }));
    }

    #[test]
    fn camera_validation() {
        let mut k = Matrix3::identity();
        k[(1, 0)] = 0.5;
        assert!(Camera::new(k, Matrix3::identity(), Vector3::zeros(), (1, 1)).is_err());
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Camera::new(Matrix3::identity(), reflect, Vector3::zeros(), (1, 1)).is_err());
        let skewed = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Camera::new(Matrix3::identity(), skewed, Vector3::zeros(), (1, 1)).is_err());
        let neg_focal = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
        assert!(Camera::new(neg_focal, Matrix3::identity(), Vector3::zeros(), (1, 1)).is_err());
    }

    #[test]
    fn projection_jacobian_matches_finite_differences() {
        let rig = ring_rig(3);
        let cam = rig.camera(1).unwrap();
        let x = Point3::new(0.3, -0.2, 1.4);
        let (_, jac) = cam.project_with_jacobian(&x).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            let mut e = Point3::zeros();
            e[k] = h;
            let fd = (cam.project(&(x + e)).unwrap() - cam.project(&(x - e)).unwrap()) / (2.0 * h);
            assert_abs_diff_eq!(fd, jac.column(k).into_owned(), epsilon = 1e-4);
        }
    }

    #[test]
    fn noiseless_four_view_triangulation() {
        let rig = ring_rig(4);
        let x = Point3::new(0.4, -0.3, 1.2);
        let obs: Vec<_> = rig.project_all(&x).unwrap().into_iter().enumerate().collect();
        let y = triangulate_dlt(&rig, &obs, None).unwrap();
        assert!((y - x).norm() < 1e-8);
    }

    #[test]
    fn weight_scale_invariance() {
        let rig = ring_rig(5);
        let x = Point3::new(0.1, 0.2, 0.9);
        let obs: Vec<_> = rig
            .project_all(&x)
            .unwrap()
            .into_iter()
            .enumerate()
            .map(|(i, p)| (i, p + Point2::new(i as f64, -(i as f64) * 0.5)))
            .collect();
        let w = [0.3, 1.0, 0.7, 0.2, 0.9];
        let scaled: Vec<f64> = w.iter().map(|v| v * 7.3).collect();
        let a = triangulate_dlt(&rig, &obs, Some(&w)).unwrap();
        let b = triangulate_dlt(&rig, &obs, Some(&scaled)).unwrap();
        assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn zero_weight_equals_omitting_view() {
        let rig = ring_rig(6);
        let x = Point3::new(-0.2, 0.5, 1.3);
        let mut obs: Vec<_> = rig.project_all(&x).unwrap().into_iter().enumerate().collect();
        obs[2].1 += Point2::new(10.0, 0.0);
        for (i, o) in obs.iter_mut().enumerate() {
            o.1 += Point2::new(0.3 * i as f64, -0.2);
        }
        let mut w = vec![1.0; 6];
        w[2] = 0.0;
        let weighted = triangulate_dlt(&rig, &obs, Some(&w)).unwrap();
        let reduced: Vec<_> = obs.iter().copied().filter(|(v, _)| *v != 2).collect();
        let omitted = triangulate_dlt(&rig, &reduced, None).unwrap();
        assert!((weighted - omitted).norm() < 1e-9);
    }

    #[test]
    fn unit_weights_reproduce_unweighted_path_exactly() {
        let rig = ring_rig(4);
        let obs = vec![
            (0, Point2::new(900.0, 500.0)),
            (1, Point2::new(1000.0, 560.0)),
            (3, Point2::new(950.0, 530.0)),
        ];
        let a = triangulate_dlt(&rig, &obs, None).unwrap();
        let b = triangulate_dlt(&rig, &obs, Some(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn insufficient_views() {
        let rig = ring_rig(3);
        let obs = vec![(0, Point2::new(900.0, 500.0))];
        assert!(matches!(
            triangulate_dlt(&rig, &obs, None),
            Err(Error::InsufficientViews { available: 1 })
        ));
        let obs = vec![(0, Point2::new(900.0, 500.0)), (1, Point2::new(900.0, 500.0))];
        assert!(matches!(
            triangulate_dlt(&rig, &obs, Some(&[1.0, 1e-13])),
            Err(Error::InsufficientViews { available: 1 })
        ));
    }

    #[test]
    fn malformed_observations_are_rejected() {
        let rig = ring_rig(3);
        let obs = vec![(0, Point2::new(900.0, 500.0)), (0, Point2::new(901.0, 500.0))];
        assert!(matches!(triangulate_dlt(&rig, &obs, None), Err(Error::InvalidInput(_))));
        let obs = vec![(0, Point2::new(900.0, 500.0)), (7, Point2::new(901.0, 500.0))];
        assert!(matches!(triangulate_dlt(&rig, &obs, None), Err(Error::InvalidInput(_))));
        let obs = vec![(0, Point2::new(900.0, 500.0)), (1, Point2::new(901.0, 500.0))];
        assert!(matches!(
            triangulate_dlt(&rig, &obs, Some(&[1.0, -1.0])),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            triangulate_dlt(&rig, &obs, Some(&[1.0])),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn pair_exact_and_coincident_centers() {
        let rig = ring_rig(2);
        let (a, b) = (rig.camera(0).unwrap(), rig.camera(1).unwrap());
        let x = Point3::new(0.2, 0.1, 1.1);
        let y = triangulate_pair(a, b, a.project(&x).unwrap(), b.project(&x).unwrap()).unwrap();
        assert!((y - x).norm() < 1e-8);

        let k = *a.intrinsics();
        let twin = Camera::look_at(k, a.center(), Point3::new(1.0, 1.0, 1.0), Vector3::z(), (1920, 1080)).unwrap();
        let err = triangulate_pair(a, &twin, a.project(&x).unwrap(), twin.project(&x).unwrap()).unwrap_err();
        assert!(matches!(err, Error::DegenerateGeometry(_)));
    }

    #[test]
    fn rig_rejects_shared_centers() {
        let cam = identity_camera();
        assert!(CameraRig::new(vec![cam.clone()]).is_err());
        assert!(CameraRig::new(vec![cam.clone(), cam]).is_err());
    }

    #[test]
    fn bbox_normalization() {
        let bbox = BBox::new(Point2::new(100.0, 50.0), Point2::new(300.0, 450.0)).unwrap();
        assert_eq!(bbox.normalize(&Point2::new(200.0, 250.0)), Point2::new(0.0, 0.0));
        assert_eq!(bbox.normalize(&Point2::new(300.0, 450.0)), Point2::new(1.0, 1.0));
        assert_eq!(bbox.normalize(&Point2::new(100.0, 50.0)), Point2::new(-1.0, -1.0));
        assert!(matches!(
            BBox::new(Point2::new(0.0, 0.0), Point2::new(0.0, 5.0)),
            Err(Error::EmptyBBox { .. })
        ));
        assert!(BBox::new(Point2::new(0.0, 0.0), Point2::new(5.0, -1.0)).is_err());
    }
}
