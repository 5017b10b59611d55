//! Forward model: renders glint pixels (by solving the specular reflection
//! point of each LED on the corneal sphere), pupil pixels, presence flags,
//! and the hidden ground truth used by the test suites.
//!
//! No images are rendered; observations are pixel coordinates with
//! presence flags, optionally perturbed by Gaussian noise and dropout.

use std::io::{BufRead, Write};

use nalgebra::Unit;

use crate::error::{Error, Result};
use crate::exec;
use crate::geom::{reflect_direction, Dir3, Pixel, Point3, Sphere};
use crate::rng::{derive_seed, SplitMix64};
use crate::scene::{fixate, EyePhysiology, EyePose, Scene, Target, TargetGrid};

/// Observation noise: i.i.d. axis-aligned Gaussian pixel noise plus
/// independent per-glint dropout. `seed` roots every derived per-frame
/// stream, so identical seeds give bit-identical datasets regardless of
/// render order.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub glint_sigma: f64,
    pub pupil_sigma: f64,
    pub dropout_prob: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noiseless(seed: u64) -> Self {
        Self {
            glint_sigma: 0.0,
            pupil_sigma: 0.0,
            dropout_prob: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.glint_sigma < 0.0 || self.pupil_sigma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise sigmas must be non-negative (glint {}, pupil {})",
                self.glint_sigma, self.pupil_sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.dropout_prob) {
            return Err(Error::InvalidConfig(format!(
                "dropout probability {} outside [0, 1]",
                self.dropout_prob
            )));
        }
        Ok(())
    }
}

/// What the front-end would hand the geometric pipeline for one frame:
/// up to four labeled glints and the pupil center, each with a presence
/// flag (absent entries carry no coordinates), plus the gaze target.
#[derive(Debug, Clone)]
pub struct FrameObservation {
    pub subject_id: u32,
    pub target_id: u32,
    pub frame_id: u32,
    /// Gaze target position, device frame.
    pub target: Point3,
    pub glints: [Option<Pixel>; 4],
    pub pupil: Option<Pixel>,
}

impl FrameObservation {
    pub fn present_glints(&self) -> impl Iterator<Item = (usize, &Pixel)> {
        self.glints
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|p| (i, p)))
    }

    pub fn present_glint_count(&self) -> usize {
        self.glints.iter().filter(|g| g.is_some()).count()
    }
}

/// Hidden ground truth paired with an observation. Never carries noise.
#[derive(Debug, Clone)]
pub struct FrameTruth {
    /// Eye state, camera frame.
    pub eye_pose: EyePose,
    pub optical_axis_device: Dir3,
    pub visual_axis_device: Dir3,
    /// Noiseless glint pixels (all four, regardless of presence flags).
    pub glint_pixels: [Pixel; 4],
    /// Reflection points on the corneal sphere, camera frame.
    pub glint_points: [Point3; 4],
    pub pupil_pixel: Pixel,
}

#[derive(Debug, Clone)]
pub struct SimRecord {
    pub observation: FrameObservation,
    pub truth: FrameTruth,
}

#[derive(Debug, Clone, Default)]
pub struct SimDataset {
    pub records: Vec<SimRecord>,
}

/// Specular reflection point of a point source on a sphere.
#[derive(Debug, Clone, Copy)]
pub struct GlintReflection {
    pub point: Point3,
    /// Set when camera, source, and sphere center are collinear and the
    /// reflection plane is undefined; the retro-reflection point toward the
    /// camera is returned instead.
    pub collinear: bool,
}

const GLINT_BISECTION_ITERATIONS: usize = 80;
const COLLINEAR_TOLERANCE: f64 = 1e-9;

/// Solves for the point `G` on the corneal sphere where a ray from `led`
/// reflects into the camera center: `G` lies in the plane of (camera, led,
/// center) and the surface normal at `G` bisects the directions to both.
///
/// The point is parameterized by the arc angle from the camera direction
/// and found by bisection of the bisection-residual
/// `f(theta) = n . unit(L - G) - n . unit(O - G)`, which brackets the root
/// on `[0, theta_max]` and is monotonic there.
pub fn solve_glint_point(
    camera_center: &Point3,
    led: &Point3,
    cornea: &Sphere,
) -> Result<GlintReflection> {
    let to_cam = camera_center - cornea.center;
    let to_led = led - cornea.center;
    let dist_cam = to_cam.norm();
    let dist_led = to_led.norm();
    if dist_cam <= cornea.radius || dist_led <= cornea.radius {
        return Err(Error::InsideSphere);
    }
    let u = to_cam / dist_cam;
    let w = to_led / dist_led;

    let theta_max = u.cross(&w).norm().atan2(u.dot(&w));
    if theta_max < COLLINEAR_TOLERANCE || std::f64::consts::PI - theta_max < COLLINEAR_TOLERANCE {
        return Ok(GlintReflection {
            point: cornea.center + cornea.radius * u,
            collinear: true,
        });
    }

    // In-plane orthonormal basis (u, e) spanning the (O, L, C) plane.
    let e = (w - u.dot(&w) * u).normalize();
    let residual = |theta: f64| -> f64 {
        let n = theta.cos() * u + theta.sin() * e;
        let g = cornea.center + cornea.radius * n;
        let to_l = (led - g).normalize();
        let to_o = (camera_center - g).normalize();
        n.dot(&to_l) - n.dot(&to_o)
    };

    let mut lo = 1e-9;
    let mut hi = theta_max;
    for _ in 0..GLINT_BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let n = theta.cos() * u + theta.sin() * e;
    Ok(GlintReflection {
        point: cornea.center + cornea.radius * n,
        collinear: false,
    })
}

/// Reflection-law residual of a candidate glint point: how far the ray from
/// the LED, mirrored at `point`, deviates from heading to the camera.
pub fn reflection_law_residual(
    camera_center: &Point3,
    led: &Point3,
    cornea: &Sphere,
    point: &Point3,
) -> f64 {
    let n = Unit::new_normalize(point - cornea.center);
    let incoming = Unit::new_normalize(point - led);
    let reflected = reflect_direction(&incoming, &n);
    let to_cam = Unit::new_normalize(camera_center - point);
    (reflected.into_inner() - to_cam.into_inner()).norm()
}

/// Identifies one rendered frame within a dataset.
#[derive(Debug, Clone, Copy)]
pub struct FrameIds {
    pub subject: u32,
    pub target: u32,
    pub frame: u32,
}

/// Renders one frame: fixates the eye on the target, solves the four glint
/// reflection points, projects everything, and applies the noise model to
/// the observation (never to the truth).
///
/// A glint is present when its reflection point faces the camera, its
/// (noisy) pixel lands in the image, and it survives dropout. The pupil is
/// present when its (noisy) pixel lands in the image.
pub fn render_frame(
    scene: &Scene,
    phys: &EyePhysiology,
    target: &Target,
    noise: &NoiseModel,
    ids: FrameIds,
) -> Result<(FrameObservation, FrameTruth)> {
    noise.validate()?;
    let camera = &scene.camera;
    let pose = fixate(camera, phys, &target.position)?;
    let sphere = Sphere::new(pose.cornea_center, phys.cornea_radius);
    let camera_center = Point3::origin();

    let mut rng = SplitMix64::new(derive_seed(
        noise.seed,
        ids.subject as u64,
        ids.target as u64,
        ids.frame as u64,
    ));
    // Fixed draw order per frame: dropout first, then glint noise, then
    // pupil noise, so the dropout pattern and the noise realization are
    // invariant under changes to the other's parameters.
    let dropout_draws: [f64; 4] = std::array::from_fn(|_| rng.next_f64());
    let glint_noise: [[f64; 2]; 4] = std::array::from_fn(|_| [rng.next_normal(), rng.next_normal()]);
    let pupil_noise = [rng.next_normal(), rng.next_normal()];

    let mut glint_pixels = [Pixel::origin(); 4];
    let mut glint_points = [Point3::origin(); 4];
    let mut observed_glints: [Option<Pixel>; 4] = [None; 4];
    for i in 0..4 {
        let reflection = solve_glint_point(&camera_center, scene.rig.led(i), &sphere)?;
        let g = reflection.point;
        let true_px = camera.project(&g)?;
        glint_pixels[i] = true_px;
        glint_points[i] = g;

        let normal = Unit::new_normalize(g - sphere.center);
        let facing = (camera_center - g).dot(&normal) > 0.0;
        let noisy = Pixel::new(
            true_px.x + noise.glint_sigma * glint_noise[i][0],
            true_px.y + noise.glint_sigma * glint_noise[i][1],
        );
        let dropped = dropout_draws[i] < noise.dropout_prob;
        if facing && camera.in_bounds(&noisy) && !dropped {
            observed_glints[i] = Some(noisy);
        }
    }

    let pupil_px = camera.project(&pose.pupil_center)?;
    let noisy_pupil = Pixel::new(
        pupil_px.x + noise.pupil_sigma * pupil_noise[0],
        pupil_px.y + noise.pupil_sigma * pupil_noise[1],
    );
    let pupil = camera.in_bounds(&noisy_pupil).then_some(noisy_pupil);

    let truth = FrameTruth {
        optical_axis_device: pose.optical_axis_device(camera),
        visual_axis_device: pose.visual_axis_device(camera),
        eye_pose: pose,
        glint_pixels,
        glint_points,
        pupil_pixel: pupil_px,
    };
    let observation = FrameObservation {
        subject_id: ids.subject,
        target_id: ids.target,
        frame_id: ids.frame,
        target: target.position,
        glints: observed_glints,
        pupil,
    };
    Ok((observation, truth))
}

/// Renders `subjects x targets x frames_per_target` records. Deterministic
/// given the noise seed; frames render independently (in parallel with the
/// `parallel` feature) with per-frame derived seeds, so the result does not
/// depend on scheduling.
pub fn generate_dataset(
    scene: &Scene,
    subjects: &[EyePhysiology],
    grid: &TargetGrid,
    frames_per_target: usize,
    noise: &NoiseModel,
) -> Result<SimDataset> {
    if frames_per_target == 0 {
        return Err(Error::InvalidConfig(
            "frames_per_target must be at least 1".into(),
        ));
    }
    let mut jobs = Vec::new();
    for (subject_idx, phys) in subjects.iter().enumerate() {
        for target in grid.targets() {
            for frame in 0..frames_per_target {
                jobs.push((subject_idx as u32, phys.clone(), *target, frame as u32));
            }
        }
    }
    let results = exec::map(jobs, |(subject, phys, target, frame)| {
        render_frame(
            scene,
            &phys,
            &target,
            noise,
            FrameIds {
                subject,
                target: target.id(),
                frame,
            },
        )
        .map(|(observation, truth)| SimRecord { observation, truth })
    });
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SimDataset { records })
}

/// Derives `count` subject physiologies from a base one by jittering the
/// per-subject constants (kappa, radii, offsets). Subject 0 is the base
/// itself.
pub fn subject_variants(base: &EyePhysiology, count: usize, seed: u64) -> Vec<EyePhysiology> {
    let mut subjects = Vec::with_capacity(count);
    for idx in 0..count {
        if idx == 0 {
            subjects.push(base.clone());
            continue;
        }
        let mut rng = SplitMix64::new(derive_seed(seed, 0x5b, idx as u64, 0));
        let mut phys = base.clone();
        phys.kappa.horizontal += rng.next_range(-1.0, 1.0_f64).to_radians();
        phys.kappa.vertical += rng.next_range(-0.5, 0.5_f64).to_radians();
        phys.cornea_radius += rng.next_range(-0.3e-3, 0.3e-3);
        phys.cornea_offset += rng.next_range(-0.2e-3, 0.2e-3);
        if let crate::scene::PupilMode::Physiological { pupil_offset } = &mut phys.pupil_mode {
            *pupil_offset =
                (*pupil_offset + rng.next_range(-0.2e-3, 0.2e-3)).clamp(0.0, phys.cornea_radius);
        }
        subjects.push(phys);
    }
    subjects
}

// ---------------------------------------------------------------------------
// Dataset CSV
//
// One row per frame. Observation columns are always written; absent glints
// and pupils leave their coordinate fields empty. Truth columns (cornea in
// the camera frame, axes in the device frame) are appended when requested.
// ---------------------------------------------------------------------------

const OBS_HEADER: &str = "subject_id,target_id,frame_id,target_x,target_y,target_z,\
g0_u,g0_v,g0_present,g1_u,g1_v,g1_present,g2_u,g2_v,g2_present,g3_u,g3_v,g3_present,\
pupil_u,pupil_v,pupil_present";

const TRUTH_HEADER: &str = ",cornea_cam_x,cornea_cam_y,cornea_cam_z,\
optical_dev_x,optical_dev_y,optical_dev_z,visual_dev_x,visual_dev_y,visual_dev_z";

fn write_opt_pixel(row: &mut String, px: &Option<Pixel>) {
    match px {
        Some(p) => {
            row.push_str(&format!("{},{},1", p.x, p.y));
        }
        None => row.push_str(",,0"),
    }
}

impl SimDataset {
    pub fn write_csv<W: Write>(&self, out: &mut W, with_truth: bool) -> Result<()> {
        let mut header = OBS_HEADER.to_string();
        if with_truth {
            header.push_str(TRUTH_HEADER);
        }
        writeln!(out, "{header}")?;
        for rec in &self.records {
            let obs = &rec.observation;
            let mut row = format!(
                "{},{},{},{},{},{},",
                obs.subject_id,
                obs.target_id,
                obs.frame_id,
                obs.target.x,
                obs.target.y,
                obs.target.z
            );
            for glint in &obs.glints {
                write_opt_pixel(&mut row, glint);
                row.push(',');
            }
            write_opt_pixel(&mut row, &obs.pupil);
            if with_truth {
                let t = &rec.truth;
                let c = t.eye_pose.cornea_center;
                let o = t.optical_axis_device.into_inner();
                let v = t.visual_axis_device.into_inner();
                row.push_str(&format!(
                    ",{},{},{},{},{},{},{},{},{}",
                    c.x, c.y, c.z, o.x, o.y, o.z, v.x, v.y, v.z
                ));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self, with_truth: bool) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, with_truth)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }
}

fn parse_field<T: std::str::FromStr>(field: &str, line: usize, what: &str) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {what} from {field:?}"),
    })
}

fn parse_opt_pixel(fields: &[&str], base: usize, line: usize) -> Result<Option<Pixel>> {
    let present: u8 = parse_field(fields[base + 2], line, "presence flag")?;
    if present == 0 {
        return Ok(None);
    }
    let u: f64 = parse_field(fields[base], line, "pixel u")?;
    let v: f64 = parse_field(fields[base + 1], line, "pixel v")?;
    Ok(Some(Pixel::new(u, v)))
}

/// Reads the observation columns of a dataset CSV. Truth columns, when
/// present, are ignored, so externally produced detection files with the
/// same observation schema load the same way.
pub fn read_observations_csv<R: BufRead>(reader: R) -> Result<Vec<FrameObservation>> {
    let mut lines = reader.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(Error::Parse {
            line: 1,
            message: "empty file".into(),
        });
    };
    let header = header?;
    if !header.trim_end().starts_with(OBS_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: "unrecognized dataset header".into(),
        });
    }
    let mut observations = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 21 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected at least 21 fields, got {}", fields.len()),
            });
        }
        let mut glints: [Option<Pixel>; 4] = [None; 4];
        for (i, slot) in glints.iter_mut().enumerate() {
            *slot = parse_opt_pixel(&fields, 6 + 3 * i, lineno)?;
        }
        observations.push(FrameObservation {
            subject_id: parse_field(fields[0], lineno, "subject_id")?,
            target_id: parse_field(fields[1], lineno, "target_id")?,
            frame_id: parse_field(fields[2], lineno, "frame_id")?,
            target: Point3::new(
                parse_field(fields[3], lineno, "target_x")?,
                parse_field(fields[4], lineno, "target_y")?,
                parse_field(fields[5], lineno, "target_z")?,
            ),
            glints,
            pupil: parse_opt_pixel(&fields, 18, lineno)?,
        });
    }
    Ok(observations)
}
