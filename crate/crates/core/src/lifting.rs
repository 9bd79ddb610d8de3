//! Recovery of 3D joints from image coordinates plus depth (2.5D poses).

use crate::error::{Error, Result};
use crate::geometry::{Camera, Point2, Point3, MIN_DEPTH};

/// Coordinate frame a [`Pose3D`] is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    World,
    Camera,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pose3D {
    pub joints: Vec<Point3>,
    pub frame: Frame,
}

impl Pose3D {
    pub fn new(joints: Vec<Point3>, frame: Frame) -> Self {
        Self { joints, frame }
    }

    pub fn world(joints: Vec<Point3>) -> Self {
        Self::new(joints, Frame::World)
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }
}

/// Per-joint pixel location with the depth of the root joint shared by all
/// joints and a root-relative depth per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose25D {
    pub root_depth: f64,
    /// `(pixel, depth relative to the root)` per joint.
    pub joints: Vec<(Point2, f64)>,
}

impl Pose25D {
    pub fn new(root_depth: f64, joints: Vec<(Point2, f64)>) -> Result<Self> {
        let pose = Self { root_depth, joints };
        pose.validate()?;
        Ok(pose)
    }

    fn validate(&self) -> Result<()> {
        for (uv, rel) in &self.joints {
            if !(uv.x.is_finite() && uv.y.is_finite() && rel.is_finite() && self.root_depth.is_finite()) {
                return Err(Error::InvalidInput("non-finite 2.5D joint".into()));
            }
            let depth = self.root_depth + rel;
            if depth <= MIN_DEPTH {
                return Err(Error::NonPositiveDepth { depth });
            }
        }
        Ok(())
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    /// 2.5D representation of camera-frame points as seen by `camera`, with
    /// joint `root` as depth reference.
    pub fn from_camera_points(camera: &Camera, points: &[Point3], root: usize) -> Result<Self> {
        let root_depth = points
            .get(root)
            .map(|p| camera.to_camera_frame(p).z)
            .ok_or_else(|| Error::InvalidInput(format!("root index {root} out of range")))?;
        let joints = points
            .iter()
            .map(|p| Ok((camera.project(p)?, camera.to_camera_frame(p).z - root_depth)))
            .collect::<Result<_>>()?;
        Self::new(root_depth, joints)
    }
}

/// Inverse projection into the camera frame: `X_cam = d · K⁻¹ (u, v, 1)ᵀ`.
pub fn lift_to_camera(camera: &Camera, pose: &Pose25D) -> Result<Pose3D> {
    pose.validate()?;
    let k_inv = camera
        .intrinsics()
        .try_inverse()
        .ok_or_else(|| Error::InvalidCamera("intrinsics are not invertible".into()))?;
    let joints = pose
        .joints
        .iter()
        .map(|(uv, rel)| k_inv * uv.push(1.0) * (pose.root_depth + rel))
        .collect();
    Ok(Pose3D::new(joints, Frame::Camera))
}

/// Inverse projection into the world frame: `X = Rᵀ (X_cam − t)`.
pub fn lift_to_world(camera: &Camera, pose: &Pose25D) -> Result<Pose3D> {
    let cam = lift_to_camera(camera, pose)?;
    let r_t = camera.rotation().transpose();
    let joints = cam
        .joints
        .iter()
        .map(|x| r_t * (x - camera.translation()))
        .collect();
    Ok(Pose3D::new(joints, Frame::World))
}
