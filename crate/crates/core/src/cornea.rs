//! Cornea estimation from glint observations.
//!
//! Two stages:
//!
//! 1. **cornea 2D** — every LED-projection-to-glint image line passes
//!    through the projected cornea center, so the cornea 2D position is the
//!    least-squares intersection of those lines (the closed-form global
//!    minimizer of the squared line-distance objective).
//! 2. **cornea 3D** — the center is lifted along the camera ray through the
//!    cornea 2D point by minimizing the reflection residual: backproject
//!    each glint, intersect with a hypothesized corneal sphere, reflect
//!    about the surface normal, and measure how far the reflected ray
//!    passes from the known LED.

use crate::error::{Error, Result};
use crate::geom::{
    intersect_lines2_lsq, point_to_line3_distance, ray_sphere_intersect, reflect_direction,
    Line2, Pixel, Point3, Ray, Sphere,
};
use crate::scene::{CameraModel, LedRig};
use crate::sim::FrameObservation;
use nalgebra::Unit;

/// Result of a cornea solve with optimizer diagnostics.
#[derive(Debug, Clone)]
pub struct CorneaEstimate {
    pub cornea_2d: Pixel,
    /// Camera frame.
    pub cornea_3d: Point3,
    pub iterations: usize,
    /// Mean reflection residual at the solution, meters.
    pub final_residual: f64,
    /// Indices of the glints that entered the solve.
    pub used_glints: Vec<usize>,
    /// False when the iteration cap was hit with a residual well above the
    /// configured noise floor; the estimate is still returned.
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct CorneaSolverConfig {
    /// Assumed corneal radius, meters.
    pub cornea_radius: f64,
    /// Initial camera-to-cornea distance for the 1D descent, meters.
    pub init_distance: f64,
    /// Search bounds along the cornea ray, meters.
    pub min_distance: f64,
    pub max_distance: f64,
    /// Residual level regarded as "converged" when the iteration cap is
    /// hit; solves ending above 10x this value are flagged.
    pub noise_floor: f64,
    /// Optional free-3D refinement after the 1D solve, for noisy inputs.
    pub polish_3d: bool,
}

impl Default for CorneaSolverConfig {
    fn default() -> Self {
        Self {
            cornea_radius: 0.0078,
            init_distance: 0.035,
            min_distance: 0.005,
            max_distance: 0.200,
            noise_floor: 1e-6,
            polish_3d: false,
        }
    }
}

pub const MAX_SOLVER_ITERATIONS: usize = 100;
const POLISH_ITERATIONS: usize = 20;
const LOSS_TOLERANCE: f64 = 1e-12;
const STEP_TOLERANCE: f64 = 1e-9;
const GRADIENT_STEP: f64 = 1e-9;

/// One image line per present glint, from the projected LED to the glint.
pub fn led_glint_lines(
    camera: &CameraModel,
    rig: &LedRig,
    obs: &FrameObservation,
) -> Result<Vec<Line2>> {
    let mut lines = Vec::new();
    for (i, glint) in obs.present_glints() {
        let led_px = camera.project(rig.led(i))?;
        lines.push(Line2::new(led_px, *glint)?);
    }
    Ok(lines)
}

/// Mean perpendicular distance from a candidate cornea 2D point to the
/// LED-glint lines; the objective whose global minimizer the closed-form
/// solve returns (in its squared form).
pub fn cornea_line_loss(p: &Pixel, lines: &[Line2]) -> Result<f64> {
    if lines.is_empty() {
        return Err(Error::InsufficientLines(0));
    }
    let sum: f64 = lines
        .iter()
        .map(|l| crate::geom::point_to_line2_distance(p, l))
        .sum();
    Ok(sum / lines.len() as f64)
}

/// Cornea 2D position: least-squares intersection of the LED-glint lines.
pub fn solve_cornea_2d(
    camera: &CameraModel,
    rig: &LedRig,
    obs: &FrameObservation,
) -> Result<Pixel> {
    let present = obs.present_glint_count();
    if present < 2 {
        return Err(Error::InsufficientGlints(present));
    }
    let lines = led_glint_lines(camera, rig, obs)?;
    let (p, _cond) = intersect_lines2_lsq(&lines)?;
    Ok(p)
}

/// Precomputed per-glint data for repeated residual evaluations.
struct ResidualEval {
    glint_rays: Vec<Ray>,
    leds: Vec<Point3>,
    radius: f64,
}

impl ResidualEval {
    fn new(
        camera: &CameraModel,
        rig: &LedRig,
        obs: &FrameObservation,
        radius: f64,
    ) -> Result<Self> {
        let mut glint_rays = Vec::new();
        let mut leds = Vec::new();
        for (i, glint) in obs.present_glints() {
            glint_rays.push(camera.backproject(glint));
            leds.push(*rig.led(i));
        }
        if glint_rays.is_empty() {
            return Err(Error::InsufficientGlints(0));
        }
        Ok(Self {
            glint_rays,
            leds,
            radius,
        })
    }

    /// Mean over glints of the LED distance to the reflected glint ray.
    /// Rays that miss the hypothesized sphere contribute a hinge penalty of
    /// (miss distance + radius), which decreases smoothly as the sphere
    /// approaches the ray.
    fn eval(&self, center: &Point3) -> f64 {
        let sphere = Sphere::new(*center, self.radius);
        let mut sum = 0.0;
        for (ray, led) in self.glint_rays.iter().zip(&self.leds) {
            sum += match ray_sphere_intersect(ray, &sphere) {
                Some(t) => {
                    let g = ray.at(t);
                    let normal = Unit::new_normalize(g - sphere.center);
                    let reflected = reflect_direction(&ray.direction, &normal);
                    point_to_line3_distance(led, &Ray::new(g, reflected))
                }
                None => {
                    let miss = point_to_line3_distance(center, ray) - self.radius;
                    miss.max(0.0) + self.radius
                }
            };
        }
        sum / self.glint_rays.len() as f64
    }
}

/// Mean reflection residual (meters) of a hypothesized cornea 3D position.
pub fn reflection_residual(
    cornea_3d: &Point3,
    camera: &CameraModel,
    rig: &LedRig,
    obs: &FrameObservation,
    radius: f64,
) -> Result<f64> {
    Ok(ResidualEval::new(camera, rig, obs, radius)?.eval(cornea_3d))
}

/// Lifts the cornea 2D position to 3D: gradient descent on the reflection
/// residual over the distance along the backprojected cornea ray, bounded
/// to [min_distance, max_distance]. Gradients are central finite
/// differences with a backtracking line search; the solve stops when the
/// loss improvement or the step drops below tolerance, within 100
/// iterations total.
pub fn lift_cornea_3d(
    camera: &CameraModel,
    rig: &LedRig,
    obs: &FrameObservation,
    cfg: &CorneaSolverConfig,
) -> Result<CorneaEstimate> {
    let present = obs.present_glint_count();
    if present < 2 {
        return Err(Error::InsufficientGlints(present));
    }
    let cornea_2d = solve_cornea_2d(camera, rig, obs)?;
    let ray = camera.backproject(&cornea_2d);
    let eval = ResidualEval::new(camera, rig, obs, cfg.cornea_radius)?;

    let loss_at = |t: f64| eval.eval(&ray.at(t));
    let mut t = cfg.init_distance.clamp(cfg.min_distance, cfg.max_distance);
    let mut loss = loss_at(t);
    let mut step_scale = 1e-2;
    let mut iterations = 0;
    let budget = if cfg.polish_3d {
        MAX_SOLVER_ITERATIONS - POLISH_ITERATIONS
    } else {
        MAX_SOLVER_ITERATIONS
    };

    while iterations < budget {
        iterations += 1;
        let grad = (loss_at(t + GRADIENT_STEP) - loss_at(t - GRADIENT_STEP))
            / (2.0 * GRADIENT_STEP);
        if grad == 0.0 {
            break;
        }
        // Backtracking line search along -grad.
        let mut alpha = step_scale;
        let mut improved = None;
        for _ in 0..60 {
            let cand = (t - alpha * grad).clamp(cfg.min_distance, cfg.max_distance);
            if cand == t {
                break;
            }
            let cand_loss = loss_at(cand);
            if cand_loss < loss {
                improved = Some((cand, cand_loss, alpha));
                break;
            }
            alpha *= 0.5;
        }
        let Some((new_t, new_loss, accepted_alpha)) = improved else {
            break; // no descent direction left at this resolution
        };
        let delta_loss = loss - new_loss;
        let delta_t = (new_t - t).abs();
        t = new_t;
        loss = new_loss;
        step_scale = accepted_alpha * 2.0;
        if delta_loss < LOSS_TOLERANCE || delta_t < STEP_TOLERANCE {
            break;
        }
    }

    let mut center = ray.at(t);
    if cfg.polish_3d {
        let (polished, extra) = polish_3d(&eval, center, loss);
        center = polished;
        iterations += extra;
        loss = eval.eval(&center);
    }

    let converged = iterations < budget || loss <= 10.0 * cfg.noise_floor;
    Ok(CorneaEstimate {
        cornea_2d,
        cornea_3d: center,
        iterations,
        final_residual: loss,
        used_glints: obs.present_glints().map(|(i, _)| i).collect(),
        converged,
    })
}

/// Free-3D refinement: a few steps of finite-difference gradient descent
/// over all three coordinates, starting from the 1D solution.
fn polish_3d(eval: &ResidualEval, start: Point3, start_loss: f64) -> (Point3, usize) {
    let mut p = start;
    let mut loss = start_loss;
    let mut step_scale = 1e-4;
    let mut iterations = 0;
    for _ in 0..POLISH_ITERATIONS {
        iterations += 1;
        let mut grad = nalgebra::Vector3::zeros();
        for axis in 0..3 {
            let mut hi = p;
            let mut lo = p;
            hi[axis] += GRADIENT_STEP;
            lo[axis] -= GRADIENT_STEP;
            grad[axis] = (eval.eval(&hi) - eval.eval(&lo)) / (2.0 * GRADIENT_STEP);
        }
        if grad.norm() == 0.0 {
            break;
        }
        let mut alpha = step_scale;
        let mut improved = None;
        for _ in 0..40 {
            let cand = p - alpha * grad;
            let cand_loss = eval.eval(&cand);
            if cand_loss < loss {
                improved = Some((cand, cand_loss, alpha));
                break;
            }
            alpha *= 0.5;
        }
        let Some((new_p, new_loss, accepted)) = improved else {
            break;
        };
        let delta_loss = loss - new_loss;
        p = new_p;
        loss = new_loss;
        step_scale = accepted * 2.0;
        if delta_loss < LOSS_TOLERANCE {
            break;
        }
    }
    (p, iterations)
}
