//! Optical-axis construction and angular gaze parameterization.
//!
//! The pupil 2D center is lifted onto the corneal sphere along its camera
//! ray; connecting the lifted pupil to the cornea center gives the optical
//! axis, which is transformed to the device frame and unit normalized.
//! Gaze directions are parameterized as (horizontal, vertical) angles about
//! an estimated origin — the mean cornea position — relative to the
//! direction from that origin to the central target.

use nalgebra::{Isometry3, Unit, Vector3};

use crate::error::{Error, Result};
use crate::geom::{ray_sphere_intersect, Dir3, Pixel, Point3, Sphere};
use crate::scene::CameraModel;

pub const ARCMIN_PER_RAD: f64 = 60.0 * 180.0 / std::f64::consts::PI;

/// Optical axis estimate, device frame.
#[derive(Debug, Clone)]
pub struct OpticalAxisEstimate {
    pub cornea_3d: Point3,
    pub pupil_3d: Point3,
    pub optical_axis: Dir3,
}

/// Origin and reference direction for the angular gaze parameterization.
#[derive(Debug, Clone)]
pub struct GazeFrameSpec {
    /// Device frame; the mean cornea position over the frames in scope.
    pub origin: Point3,
    /// Unit direction from the origin toward the central target.
    pub reference_dir: Dir3,
}

impl GazeFrameSpec {
    /// Orthonormal (right, up, forward) basis around the reference
    /// direction, using device +y as the vertical anchor.
    fn basis(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let forward = self.reference_dir.into_inner();
        let right = Vector3::y().cross(&forward).normalize();
        let up = forward.cross(&right);
        (right, up, forward)
    }
}

/// Intersects the backprojected pupil ray with the corneal sphere (nearer
/// root; the pupil faces the camera). A miss is an error — at sane geometry
/// the pupil ray always strikes the cornea, so a miss signals a
/// configuration or estimation failure and a silent fallback would mask it.
pub fn lift_pupil_3d(camera: &CameraModel, pupil_2d: &Pixel, cornea: &Sphere) -> Result<Point3> {
    let ray = camera.backproject(pupil_2d);
    let t = ray_sphere_intersect(&ray, cornea).ok_or(Error::PupilRayMiss)?;
    Ok(ray.at(t))
}

/// Optical axis from camera-frame cornea and pupil centers, expressed in
/// the device frame.
pub fn optical_axis(
    cornea_3d: &Point3,
    pupil_3d: &Point3,
    pose: &Isometry3<f64>,
) -> Result<OpticalAxisEstimate> {
    let separation = (pupil_3d - cornea_3d).norm();
    if separation < 1e-9 {
        return Err(Error::DegenerateAxis(separation));
    }
    let cornea_dev = pose * cornea_3d;
    let pupil_dev = pose * pupil_3d;
    Ok(OpticalAxisEstimate {
        cornea_3d: cornea_dev,
        pupil_3d: pupil_dev,
        optical_axis: Unit::new_normalize(pupil_dev - cornea_dev),
    })
}

/// Gaze origin: component-wise mean of the cornea positions, with the
/// reference direction toward the central target.
pub fn gaze_origin(cornea_centers: &[Point3], central_target: &Point3) -> Result<GazeFrameSpec> {
    if cornea_centers.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum = cornea_centers
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.coords);
    let origin = Point3::from(sum / cornea_centers.len() as f64);
    Ok(GazeFrameSpec {
        reference_dir: Unit::new_normalize(central_target - origin),
        origin,
    })
}

/// Direction to (horizontal, vertical) angles in arcmin: azimuth about the
/// vertical axis, then elevation, relative to the reference direction.
pub fn to_angles(dir: &Dir3, frame: &GazeFrameSpec) -> Result<(f64, f64)> {
    let (right, up, forward) = frame.basis();
    let d = dir.into_inner();
    let x = d.dot(&right);
    let y = d.dot(&up);
    let z = d.dot(&forward);
    let horizontal_norm = x.hypot(z);
    if horizontal_norm < 1e-6 {
        return Err(Error::GimbalDegenerate(horizontal_norm));
    }
    let azimuth = x.atan2(z);
    let elevation = y.atan2(horizontal_norm);
    Ok((azimuth * ARCMIN_PER_RAD, elevation * ARCMIN_PER_RAD))
}

/// Inverse of [`to_angles`].
pub fn from_angles(h_arcmin: f64, v_arcmin: f64, frame: &GazeFrameSpec) -> Dir3 {
    let (right, up, forward) = frame.basis();
    let az = h_arcmin / ARCMIN_PER_RAD;
    let el = v_arcmin / ARCMIN_PER_RAD;
    let d = az.sin() * el.cos() * right + el.sin() * up + az.cos() * el.cos() * forward;
    Unit::new_normalize(d)
}
