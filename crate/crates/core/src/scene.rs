//! Camera, LED rig, eye model, coordinate frames, and the virtual target
//! protocol.
//!
//! Two frames are used throughout:
//!
//! * **camera frame** — origin at the camera center, +z along the optical
//!   axis (into the scene), +y down the image. Imaging and the corneal
//!   geometry live here.
//! * **device frame** — origin at the eyeball center, +z headset-forward
//!   (toward the targets), +y up. Targets, gaze directions, and the kappa
//!   convention live here.
//!
//! `CameraModel::pose` is the rigid camera-to-device transform.

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, Unit, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::geom::{angle_between, Dir3, Pixel, Point3, Ray};

/// Pinhole camera intrinsics plus the camera-to-device pose.
#[derive(Debug, Clone)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub image_width: u32,
    pub image_height: u32,
    /// Rigid transform mapping camera-frame coordinates to device-frame
    /// coordinates.
    pub pose: Isometry3<f64>,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        image_width: u32,
        image_height: u32,
        pose: Isometry3<f64>,
    ) -> Result<Self> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "focal lengths must be positive (fx = {fx}, fy = {fy})"
            )));
        }
        if cx <= 0.0 || cx >= image_width as f64 || cy <= 0.0 || cy >= image_height as f64 {
            return Err(Error::InvalidConfig(format!(
                "principal point ({cx}, {cy}) outside the {image_width}x{image_height} image"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            image_width,
            image_height,
            pose,
        })
    }

    /// Pinhole projection of a camera-frame point.
    ///
    /// The algebraic formula is applied whenever |z| is non-degenerate, even
    /// if the pixel falls outside the image: LED projections are geometric
    /// constructs, not observables, and routinely land off-sensor.
    pub fn project(&self, p: &Point3) -> Result<Pixel> {
        if p.z.abs() < 1e-9 {
            return Err(Error::DegenerateProjection(p.z.abs()));
        }
        Ok(Pixel::new(
            self.cx + self.fx * p.x / p.z,
            self.cy + self.fy * p.y / p.z,
        ))
    }

    /// Ray from the camera center through a pixel, unit direction toward +z.
    pub fn backproject(&self, px: &Pixel) -> Ray {
        let dir = Vector3::new((px.x - self.cx) / self.fx, (px.y - self.cy) / self.fy, 1.0);
        Ray::new(Point3::origin(), Unit::new_normalize(dir))
    }

    pub fn in_bounds(&self, px: &Pixel) -> bool {
        px.x >= 0.0
            && px.x < self.image_width as f64
            && px.y >= 0.0
            && px.y < self.image_height as f64
    }

    pub fn to_device_point(&self, p: &Point3) -> Point3 {
        self.pose * p
    }

    pub fn to_camera_point(&self, p: &Point3) -> Point3 {
        self.pose.inverse_transform_point(p)
    }

    pub fn to_device_dir(&self, d: &Dir3) -> Dir3 {
        Unit::new_normalize(self.pose.rotation * d.into_inner())
    }

    pub fn to_camera_dir(&self, d: &Dir3) -> Dir3 {
        Unit::new_normalize(self.pose.rotation.inverse() * d.into_inner())
    }
}

/// Camera-to-device pose for an off-axis eye camera: the camera sits
/// `distance` meters from the eyeball center (the device origin), pitched
/// `pitch_deg` below the forward axis, looking back at the eye. The camera
/// x-axis stays aligned with device x, so the image y-axis points downward.
pub fn off_axis_camera_pose(distance: f64, pitch_deg: f64) -> Isometry3<f64> {
    let pitch = pitch_deg.to_radians();
    // Direction from eye to camera, below-front of the eye.
    let eye_to_cam = Vector3::new(0.0, -pitch.sin(), pitch.cos());
    let position = Point3::origin() + distance * eye_to_cam;
    let cam_z = -eye_to_cam; // boresight back toward the eye
    let cam_x = Vector3::x();
    let cam_y = cam_z.cross(&cam_x);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[cam_x, cam_y, cam_z]));
    Isometry3::from_parts(
        Translation3::from(position.coords),
        UnitQuaternion::from_rotation_matrix(&rot),
    )
}

/// The four IR LEDs, stored in the camera frame.
#[derive(Debug, Clone)]
pub struct LedRig {
    leds: [Point3; 4],
}

impl LedRig {
    /// `leds` must all sit off the camera plane z = 0.
    pub fn new(leds: [Point3; 4]) -> Result<Self> {
        for (i, led) in leds.iter().enumerate() {
            if led.z.abs() < 1e-6 {
                return Err(Error::InvalidConfig(format!(
                    "LED {i} lies on the camera plane (z = {:.3e} m)",
                    led.z
                )));
            }
        }
        Ok(Self { leds })
    }

    /// LEDs at the corners of a rectangle centered on the display axis
    /// (device z), at `depth` meters in front of the eyeball center.
    /// Index order: 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right,
    /// seen from the eye.
    pub fn from_device_rect(
        camera: &CameraModel,
        half_width: f64,
        half_height: f64,
        depth: f64,
    ) -> Result<Self> {
        let corners = [
            Point3::new(-half_width, half_height, depth),
            Point3::new(half_width, half_height, depth),
            Point3::new(-half_width, -half_height, depth),
            Point3::new(half_width, -half_height, depth),
        ];
        Self::new(corners.map(|c| camera.to_camera_point(&c)))
    }

    pub fn leds(&self) -> &[Point3; 4] {
        &self.leds
    }

    pub fn led(&self, index: usize) -> &Point3 {
        &self.leds[index]
    }
}

/// Camera plus LED rig; the fixed hardware half of a scene.
#[derive(Debug, Clone)]
pub struct Scene {
    pub camera: CameraModel,
    pub rig: LedRig,
}

/// Constant per-subject offset between the optical and visual axes,
/// in radians. Applied about the device axes: horizontal (about +y) first,
/// then vertical (about +x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa {
    pub horizontal: f64,
    pub vertical: f64,
}

impl Kappa {
    pub const ZERO: Kappa = Kappa {
        horizontal: 0.0,
        vertical: 0.0,
    };

    pub fn from_degrees(horizontal: f64, vertical: f64) -> Self {
        Self {
            horizontal: horizontal.to_radians(),
            vertical: vertical.to_radians(),
        }
    }
}

/// Optical axis -> visual axis, device frame.
pub fn apply_kappa(axis: &Dir3, kappa: Kappa) -> Dir3 {
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), kappa.horizontal);
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), kappa.vertical);
    Unit::new_normalize(rx * (ry * axis.into_inner()))
}

/// Visual axis -> optical axis; exact inverse of [`apply_kappa`].
pub fn remove_kappa(axis: &Dir3, kappa: Kappa) -> Dir3 {
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), -kappa.horizontal);
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), -kappa.vertical);
    Unit::new_normalize(ry * (rx * axis.into_inner()))
}

/// Pupil placement convention for the simulated eye.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PupilMode {
    /// Pupil center on the corneal sphere (offset = cornea radius), so the
    /// pipeline's pupil lifting is exact and round trips close at machine
    /// precision.
    Consistent,
    /// Pupil center inside the corneal sphere at the given offset from the
    /// cornea center; exposes the pupil-lifting approximation as a
    /// deterministic bias.
    Physiological { pupil_offset: f64 },
}

/// Per-subject eye constants. Lengths in meters, `eyeball_center` in the
/// camera frame.
#[derive(Debug, Clone)]
pub struct EyePhysiology {
    pub cornea_radius: f64,
    pub eyeball_center: Point3,
    /// Eyeball center to cornea center, along the optical axis.
    pub cornea_offset: f64,
    pub pupil_mode: PupilMode,
    pub kappa: Kappa,
}

impl EyePhysiology {
    pub fn validate(&self) -> Result<()> {
        if self.cornea_radius <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "cornea radius must be positive, got {}",
                self.cornea_radius
            )));
        }
        if self.cornea_offset <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "cornea offset must be positive, got {}",
                self.cornea_offset
            )));
        }
        if let PupilMode::Physiological { pupil_offset } = self.pupil_mode {
            if !(0.0..=self.cornea_radius).contains(&pupil_offset) {
                return Err(Error::InvalidConfig(format!(
                    "pupil offset {} outside [0, cornea radius {}]",
                    pupil_offset, self.cornea_radius
                )));
            }
        }
        Ok(())
    }

    /// Cornea center to pupil center distance; the cornea radius itself in
    /// consistent mode.
    pub fn pupil_offset(&self) -> f64 {
        match self.pupil_mode {
            PupilMode::Consistent => self.cornea_radius,
            PupilMode::Physiological { pupil_offset } => pupil_offset,
        }
    }
}

/// Per-frame eye state, camera frame. Axes are unit length; the device-frame
/// versions are obtained through the camera pose.
#[derive(Debug, Clone)]
pub struct EyePose {
    pub cornea_center: Point3,
    pub pupil_center: Point3,
    pub optical_axis: Dir3,
    pub visual_axis: Dir3,
}

impl EyePose {
    pub fn optical_axis_device(&self, camera: &CameraModel) -> Dir3 {
        camera.to_device_dir(&self.optical_axis)
    }

    pub fn visual_axis_device(&self, camera: &CameraModel) -> Dir3 {
        camera.to_device_dir(&self.visual_axis)
    }
}

const FIXATE_MAX_ITERATIONS: usize = 50;
const FIXATE_TOLERANCE: f64 = 1e-9;

/// Solves the eye pose that fixates `target` (device frame): the visual
/// axis through the cornea center passes through the target.
///
/// The optical axis is found by fixed-point iteration of
/// `o <- remove_kappa(normalize(T - (E + d_ec * o)))`, which contracts at
/// roughly `d_ec / |T - E|` per step.
pub fn fixate(camera: &CameraModel, phys: &EyePhysiology, target: &Point3) -> Result<EyePose> {
    phys.validate()?;
    let eye_device = camera.to_device_point(&phys.eyeball_center);
    let to_target = target - eye_device;
    if to_target.norm() <= 2.0 * phys.cornea_offset {
        return Err(Error::NoFixation {
            residual: f64::INFINITY,
            iterations: 0,
        });
    }

    let mut optical = Unit::new_normalize(to_target);
    let mut residual = f64::INFINITY;
    for _iter in 0..FIXATE_MAX_ITERATIONS {
        let cornea = eye_device + phys.cornea_offset * optical.into_inner();
        optical = remove_kappa(&Unit::new_normalize(target - cornea), phys.kappa);

        let cornea = eye_device + phys.cornea_offset * optical.into_inner();
        let visual = apply_kappa(&optical, phys.kappa);
        residual = angle_between(&visual, &Unit::new_normalize(target - cornea));
        if residual < FIXATE_TOLERANCE {
            // Assemble the pose in the camera frame so the EyePose
            // invariants hold exactly there.
            let optical_cam = camera.to_camera_dir(&optical);
            let visual_cam = camera.to_camera_dir(&visual);
            let cornea_cam = phys.eyeball_center + phys.cornea_offset * optical_cam.into_inner();
            let pupil_cam = cornea_cam + phys.pupil_offset() * optical_cam.into_inner();
            return Ok(EyePose {
                cornea_center: cornea_cam,
                pupil_center: pupil_cam,
                optical_axis: optical_cam,
                visual_axis: visual_cam,
            });
        }
    }
    Err(Error::NoFixation {
        residual,
        iterations: FIXATE_MAX_ITERATIONS,
    })
}

/// One gaze target with its grid coordinates. `plane` indexes the depth
/// plane, `row`/`col` the 3x3 cell (row 0 at the top, col 0 at the left).
#[derive(Debug, Clone, Copy)]
pub struct Target {
    pub position: Point3,
    pub plane: usize,
    pub row: usize,
    pub col: usize,
}

impl Target {
    /// Stable target identifier: plane * 9 + row * 3 + col.
    pub fn id(&self) -> u32 {
        (self.plane * 9 + self.row * 3 + self.col) as u32
    }
}

/// The gaze-target protocol grid: a 3x3 target layout repeated on several
/// depth planes along the device forward axis.
#[derive(Debug, Clone)]
pub struct TargetGrid {
    targets: Vec<Target>,
    planes: usize,
}

impl TargetGrid {
    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn plane_count(&self) -> usize {
        self.planes
    }

    pub fn plane_targets(&self, plane: usize) -> impl Iterator<Item = &Target> {
        self.targets.iter().filter(move |t| t.plane == plane)
    }

    /// The central (row 1, col 1) target of a plane.
    pub fn center_target(&self, plane: usize) -> &Target {
        self.targets
            .iter()
            .find(|t| t.plane == plane && t.row == 1 && t.col == 1)
            .expect("every plane has a center target")
    }

    pub fn target_by_id(&self, id: u32) -> Option<&Target> {
        self.targets.iter().find(|t| t.id() == id)
    }
}

/// Grid layout parameters. The angular half-extent alternates by plane
/// parity to mimic the alternating target spacing of the capture protocol.
#[derive(Debug, Clone)]
pub struct GridConfig {
    /// Depth of each plane in meters, device frame.
    pub plane_depths: Vec<f64>,
    /// Angular half-extent (degrees) for odd-indexed planes.
    pub half_extent_odd_deg: f64,
    /// Angular half-extent (degrees) for even-indexed planes.
    pub half_extent_even_deg: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            plane_depths: vec![0.5, 0.75, 1.0, 1.5, 2.0, 3.0],
            half_extent_odd_deg: 10.0,
            half_extent_even_deg: 7.0,
        }
    }
}

/// Builds the target grid: 3x3 targets per depth plane, centered on the
/// device forward axis. With the default six planes this yields 54 targets.
pub fn make_target_grid(cfg: &GridConfig) -> TargetGrid {
    let mut targets = Vec::with_capacity(cfg.plane_depths.len() * 9);
    for (plane, &depth) in cfg.plane_depths.iter().enumerate() {
        let half_deg = if plane % 2 == 1 {
            cfg.half_extent_odd_deg
        } else {
            cfg.half_extent_even_deg
        };
        let half = half_deg.to_radians();
        for row in 0..3 {
            for col in 0..3 {
                let az = half * (col as f64 - 1.0);
                let el = half * (1.0 - row as f64);
                targets.push(Target {
                    position: Point3::new(depth * az.tan(), depth * el.tan(), depth),
                    plane,
                    row,
                    col,
                });
            }
        }
    }
    TargetGrid {
        targets,
        planes: cfg.plane_depths.len(),
    }
}

/// Default physiology: standard schematic-eye constants, eyeball center at
/// the device origin.
pub fn default_physiology(camera: &CameraModel) -> EyePhysiology {
    EyePhysiology {
        cornea_radius: 0.0078,
        eyeball_center: camera.to_camera_point(&Point3::origin()),
        cornea_offset: 0.0053,
        pupil_mode: PupilMode::Physiological {
            pupil_offset: 0.0042,
        },
        kappa: Kappa::from_degrees(5.0, 1.5),
    }
}
