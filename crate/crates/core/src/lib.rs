//! Robust multi-view triangulation with geometric-median view weighting,
//! a self-supervised reprojection loss with a split gradient, 2.5D pose
//! lifting, pose error metrics and the synthetic experiments built on them.

pub mod error;
pub mod geometry;
pub mod lifting;
pub mod losses;
pub mod metrics;
pub mod robust;
pub mod sim;

pub use error::{Error, Result};
pub use geometry::{
    denormalize_from_bbox, normalize_to_bbox, triangulate_dlt, triangulate_pair, BBox, Camera, CameraRig,
    Point2, Point3,
};
pub use lifting::{lift_to_camera, lift_to_world, Frame, Pose25D, Pose3D};
pub use robust::{
    build_cluster, geometric_median, pairwise_weights, per_view_weights, robust_triangulate, wss,
    DetectionCluster, RobustConfig, RobustTriangulation, Target, ViewPair, WssCompare,
};
