//! JSON scene files: camera calibration plus per-frame 2D detections.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use rtv_core::{Camera, CameraRig, Point2};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCENE_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    /// Intrinsics, row-major.
    #[serde(rename = "K")]
    pub k: [f64; 9],
    /// World-to-camera rotation, row-major.
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
    pub width: u32,
    pub height: u32,
}

impl CameraSpec {
    pub fn from_camera(camera: &Camera) -> Self {
        let row_major = |m: &Matrix3<f64>| std::array::from_fn(|i| m[(i / 3, i % 3)]);
        let (width, height) = camera.image_size();
        Self {
            k: row_major(camera.intrinsics()),
            r: row_major(camera.rotation()),
            t: (*camera.translation()).into(),
            width,
            height,
        }
    }

    pub fn to_camera(&self) -> rtv_core::Result<Camera> {
        Camera::new(
            Matrix3::from_row_slice(&self.k),
            Matrix3::from_row_slice(&self.r),
            Vector3::from(self.t),
            (self.width, self.height),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Skeleton {
    pub names: Vec<String>,
    pub root_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detection {
    pub joint: usize,
    pub u: f64,
    pub v: f64,
    pub valid: bool,
}

/// One frame: view index to the detections in that view.
pub type FrameDetections = BTreeMap<usize, Vec<Detection>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub version: String,
    pub cameras: Vec<CameraSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joints: Option<Skeleton>,
    pub detections: Vec<FrameDetections>,
}

impl SceneFile {
    pub fn new(rig: &CameraRig, joints: Option<Skeleton>, detections: Vec<FrameDetections>) -> Self {
        Self {
            version: SCENE_VERSION.to_string(),
            cameras: rig.cameras().iter().map(CameraSpec::from_camera).collect(),
            joints,
            detections,
        }
    }

    /// Parses and validates a scene. Errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scene: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Input(format!("invalid scene file at `{}`: {}", e.path(), e.inner())))?;
        scene.validate()?;
        Ok(scene)
    }

    /// Canonical serialization: pretty-printed, keys in declaration order,
    /// shortest round-trip floats, trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene files always serialize");
        s.push('\n');
        s
    }

    fn validate(&self) -> Result<(), CliError> {
        let input = |msg: String| Err(CliError::Input(msg));
        if self.version != SCENE_VERSION {
            return input(format!(
                "invalid scene file at `version`: unsupported version {:?}, expected {SCENE_VERSION:?}",
                self.version
            ));
        }
        for (i, cam) in self.cameras.iter().enumerate() {
            if let Err(e) = cam.to_camera() {
                return input(format!("invalid scene file at `cameras[{i}]`: {e}"));
            }
        }
        if let Some(skeleton) = &self.joints {
            if skeleton.root_index >= skeleton.names.len() {
                return input(format!(
                    "invalid scene file at `joints.root_index`: {} is out of range for {} joints",
                    skeleton.root_index,
                    skeleton.names.len()
                ));
            }
        }
        for (f, frame) in self.detections.iter().enumerate() {
            for (&view, dets) in frame {
                if view >= self.cameras.len() {
                    return input(format!(
                        "invalid scene file at `detections[{f}].{view}`: view index exceeds the {} cameras",
                        self.cameras.len()
                    ));
                }
                let mut seen = std::collections::BTreeSet::new();
                for (d, det) in dets.iter().enumerate() {
                    let path = format!("detections[{f}].{view}[{d}]");
                    if let Some(skeleton) = &self.joints {
                        if det.joint >= skeleton.names.len() {
                            return input(format!(
                                "invalid scene file at `{path}.joint`: joint {} is not in the skeleton",
                                det.joint
                            ));
                        }
                    }
                    if !seen.insert(det.joint) {
                        return input(format!(
                            "invalid scene file at `{path}.joint`: duplicate detection of joint {}",
                            det.joint
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn rig(&self) -> Result<CameraRig, CliError> {
        let cameras = self
            .cameras
            .iter()
            .map(|c| c.to_camera())
            .collect::<rtv_core::Result<Vec<_>>>()
            .map_err(|e| CliError::Input(format!("invalid scene file at `cameras`: {e}")))?;
        CameraRig::new(cameras).map_err(|e| CliError::Input(format!("invalid scene file at `cameras`: {e}")))
    }

    /// Number of joints per frame: the skeleton size, or one past the
    /// largest detected joint index.
    pub fn joint_count(&self) -> usize {
        match &self.joints {
            Some(s) => s.names.len(),
            None => self
                .detections
                .iter()
                .flat_map(|f| f.values().flatten())
                .map(|d| d.joint + 1)
                .max()
                .unwrap_or(0),
        }
    }

    /// Valid observations of every joint in `frame`, `[joint][view]`.
    pub fn observations(&self, frame: usize) -> Vec<Vec<Option<Point2>>> {
        let mut obs = vec![vec![None; self.cameras.len()]; self.joint_count()];
        for (&view, dets) in &self.detections[frame] {
            for d in dets.iter().filter(|d| d.valid) {
                obs[d.joint][view] = Some(Point2::new(d.u, d.v));
            }
        }
        obs
    }
}
