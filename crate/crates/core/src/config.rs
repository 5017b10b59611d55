//! Scene configuration file.
//!
//! TOML with four sections; all lengths are meters, all angles degrees.
//! Missing sections fall back to the defaults below.
//!
//! ```toml
//! [camera]
//! fx = 700.0          # focal lengths, pixels
//! fy = 700.0
//! cx = 320.0          # principal point, pixels
//! cy = 240.0
//! width = 640
//! height = 480
//! distance = 0.035    # camera distance from the eyeball center
//! pitch_deg = 30.0    # off-axis pitch below the device forward axis
//!
//! [rig]
//! half_width = 0.020  # LED rectangle half-extents around the display axis
//! half_height = 0.015
//! depth = 0.025       # LED plane distance from the eyeball center
//!
//! [physiology]
//! cornea_radius = 0.0078
//! cornea_offset = 0.0053   # eyeball center -> cornea center
//! pupil_offset = 0.0042    # cornea center -> pupil center (physiological)
//! pupil_mode = "physiological"   # or "consistent"
//! kappa_h_deg = 5.0
//! kappa_v_deg = 1.5
//!
//! [grid]
//! plane_depths = [0.5, 0.75, 1.0, 1.5, 2.0, 3.0]
//! half_extent_odd_deg = 10.0
//! half_extent_even_deg = 7.0
//! ```
//!
//! The device frame has its origin at the eyeball center, +z toward the
//! targets, +y up.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{
    off_axis_camera_pose, CameraModel, EyePhysiology, GridConfig, Kappa, LedRig, PupilMode, Scene,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraSection {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub distance: f64,
    pub pitch_deg: f64,
}

impl Default for CameraSection {
    fn default() -> Self {
        Self {
            fx: 640.0,
            fy: 640.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
            distance: 0.035,
            pitch_deg: 30.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RigSection {
    pub half_width: f64,
    pub half_height: f64,
    pub depth: f64,
}

impl Default for RigSection {
    fn default() -> Self {
        Self {
            half_width: 0.020,
            half_height: 0.015,
            depth: 0.025,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysiologySection {
    pub cornea_radius: f64,
    pub cornea_offset: f64,
    pub pupil_offset: f64,
    pub pupil_mode: String,
    pub kappa_h_deg: f64,
    pub kappa_v_deg: f64,
}

impl Default for PhysiologySection {
    fn default() -> Self {
        Self {
            cornea_radius: 0.0078,
            cornea_offset: 0.0053,
            pupil_offset: 0.0042,
            pupil_mode: "physiological".into(),
            kappa_h_deg: 5.0,
            kappa_v_deg: 1.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSection {
    pub plane_depths: Vec<f64>,
    pub half_extent_odd_deg: f64,
    pub half_extent_even_deg: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridConfig::default();
        Self {
            plane_depths: g.plane_depths,
            half_extent_odd_deg: g.half_extent_odd_deg,
            half_extent_even_deg: g.half_extent_even_deg,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub camera: CameraSection,
    pub rig: RigSection,
    pub physiology: PhysiologySection,
    pub grid: GridSection,
}

impl SceneConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scene config serializes")
    }

    pub fn build_camera(&self) -> Result<CameraModel> {
        let c = &self.camera;
        CameraModel::new(
            c.fx,
            c.fy,
            c.cx,
            c.cy,
            c.width,
            c.height,
            off_axis_camera_pose(c.distance, c.pitch_deg),
        )
    }

    pub fn build_scene(&self) -> Result<Scene> {
        let camera = self.build_camera()?;
        let rig = LedRig::from_device_rect(
            &camera,
            self.rig.half_width,
            self.rig.half_height,
            self.rig.depth,
        )?;
        Ok(Scene { camera, rig })
    }

    pub fn build_physiology(&self, camera: &CameraModel) -> Result<EyePhysiology> {
        let p = &self.physiology;
        let pupil_mode = match p.pupil_mode.as_str() {
            "consistent" => PupilMode::Consistent,
            "physiological" => PupilMode::Physiological {
                pupil_offset: p.pupil_offset,
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown pupil_mode {other:?} (expected \"consistent\" or \"physiological\")"
                )))
            }
        };
        let phys = EyePhysiology {
            cornea_radius: p.cornea_radius,
            eyeball_center: camera.to_camera_point(&crate::geom::Point3::origin()),
            cornea_offset: p.cornea_offset,
            pupil_mode,
            kappa: Kappa::from_degrees(p.kappa_h_deg, p.kappa_v_deg),
        };
        phys.validate()?;
        Ok(phys)
    }

    pub fn build_grid_config(&self) -> GridConfig {
        GridConfig {
            plane_depths: self.grid.plane_depths.clone(),
            half_extent_odd_deg: self.grid.half_extent_odd_deg,
            half_extent_even_deg: self.grid.half_extent_even_deg,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = SceneConfig::default();
        let text = cfg.to_toml();
        let back = SceneConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.camera.fx, back.camera.fx);
        assert_eq!(cfg.grid.plane_depths, back.grid.plane_depths);
        assert_eq!(cfg.physiology.pupil_mode, back.physiology.pupil_mode);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg = SceneConfig::from_toml("[physiology]\nkappa_h_deg = 3.0\n").unwrap();
        assert_eq!(cfg.physiology.kappa_h_deg, 3.0);
        assert_eq!(cfg.camera.fx, 640.0);
    }

    #[test]
    fn bad_pupil_mode_rejected() {
        let cfg = SceneConfig::from_toml("[physiology]\npupil_mode = \"weird\"\n").unwrap();
        let camera = cfg.build_camera().unwrap();
        assert!(cfg.build_physiology(&camera).is_err());
    }

    #[test]
    fn builds_default_scene() {
        let cfg = SceneConfig::default();
        let scene = cfg.build_scene().unwrap();
        let phys = cfg.build_physiology(&scene.camera).unwrap();
        phys.validate().unwrap();
        // The eyeball center maps back to the device origin.
        let dev = scene.camera.to_device_point(&phys.eyeball_center);
        assert!(dev.coords.norm() < 1e-12);
    }
}
