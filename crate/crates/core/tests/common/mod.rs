#![allow(dead_code)]

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rtv_core::{Camera, CameraRig, Point2, Point3};

pub const IMAGE: (u32, u32) = (1920, 1080);

/// A camera 3–8 m from `target`, looking at it, with a random focal length.
pub fn random_camera<R: Rng>(rng: &mut R, target: Point3) -> Camera {
    let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
    let elevation = rng.random_range(-0.35..0.7_f64);
    let distance = rng.random_range(3.0..8.0);
    let dir = Vector3::new(elevation.cos() * azimuth.cos(), elevation.cos() * azimuth.sin(), elevation.sin());
    let k = Camera::centered_intrinsics(rng.random_range(600.0..1800.0), IMAGE);
    Camera::look_at(k, target + dir * distance, target, Vector3::z(), IMAGE).unwrap()
}

pub fn random_target<R: Rng>(rng: &mut R) -> Point3 {
    Point3::new(
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
        rng.random_range(0.5..1.5),
    )
}

pub fn random_rig<R: Rng>(rng: &mut R, n: usize) -> (CameraRig, Point3) {
    let target = random_target(rng);
    let cams = (0..n).map(|_| random_camera(rng, target)).collect();
    (CameraRig::new(cams).unwrap(), target)
}

/// A point near `target` that is visible in every camera of `rig`.
pub fn visible_point<R: Rng>(rng: &mut R, rig: &CameraRig, target: Point3) -> Point3 {
    loop {
        let p = target
            + Vector3::new(
                rng.random_range(-0.8..0.8),
                rng.random_range(-0.8..0.8),
                rng.random_range(-0.8..0.8),
            );
        if rig
            .cameras()
            .iter()
            .all(|c| c.project(&p).map(|x| c.contains(&x)).unwrap_or(false))
        {
            return p;
        }
    }
}

pub fn gaussian2<R: Rng>(rng: &mut R, sigma: f64) -> Point2 {
    use rand_distr::{Distribution, Normal};
    let n = Normal::new(0.0, sigma).unwrap();
    Point2::new(n.sample(rng), n.sample(rng))
}

/// Viewing ray of pixel `x`: camera center and unit direction in the world.
pub fn ray(camera: &Camera, x: &Point2) -> (Point3, Vector3<f64>) {
    let k_inv: Matrix3<f64> = camera.intrinsics().try_inverse().unwrap();
    let d = camera.rotation().transpose() * (k_inv * x.push(1.0));
    (camera.center(), d.normalize())
}
