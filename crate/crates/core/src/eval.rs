//! Evaluation protocol: calibrate the mapper on one depth plane, test on
//! the rest, and report angular-error statistics in arcmin.
//!
//! The per-frame pipeline is observation -> cornea 2D -> cornea 3D ->
//! pupil 3D -> optical axis -> mapper -> angular error against the true
//! gaze vector (origin to target). The origin is the mean estimated cornea
//! position: over the calibration frames while fitting, and (by default)
//! over the evaluated test frames while scoring.

use std::io::Write;

use nalgebra::Unit;

use crate::cornea::{lift_cornea_3d, CorneaEstimate, CorneaSolverConfig};
use crate::error::{Error, Result};
use crate::exec;
use crate::gaze::{gaze_origin, lift_pupil_3d, optical_axis, GazeFrameSpec, OpticalAxisEstimate};
use crate::geom::{Dir3, Pixel, Point3, Sphere};
use crate::mapper::{fit_polynomial, net_init, net_train, CalibrationSet, GazeMapper, TrainConfig};
use crate::rng::derive_seed;
use crate::scene::{EyePhysiology, Scene, TargetGrid};
use crate::sim::{render_frame, FrameIds, FrameObservation, NoiseModel};

/// Angular error between two unit directions, in arcmin:
/// `acos(clamped dot) * (180/pi) * 60`.
pub fn angular_error_arcmin(estimated: &Dir3, truth: &Dir3) -> f64 {
    let dot = estimated.dot(truth).clamp(-1.0, 1.0);
    dot.acos().to_degrees() * 60.0
}

/// Euclidean pixel distance.
pub fn pixel_error(estimated: &Pixel, truth: &Pixel) -> f64 {
    (estimated - truth).norm()
}

/// Five-number error statistics in arcmin, reported in the order
/// Mean / Std / Q1 / Q2 / Q3.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSummary {
    pub mean: f64,
    pub std: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub n: usize,
}

/// Linear-interpolation quantile of pre-sorted data (the position
/// `q * (n - 1)` is interpolated between its neighbors).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Sample statistics: mean, sample standard deviation (n - 1 denominator,
/// zero for a single value), and linearly interpolated quartiles.
pub fn summarize(errors: &[f64]) -> Result<ErrorSummary> {
    if errors.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = errors.len();
    let mean = errors.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ErrorSummary {
        mean,
        std,
        q1: quantile_sorted(&sorted, 0.25),
        q2: quantile_sorted(&sorted, 0.50),
        q3: quantile_sorted(&sorted, 0.75),
        n,
    })
}

pub const TABLE_COLUMNS: &str = "Mean AE | Std AE | Q1 AE | Q2 AE | Q3 AE";

impl ErrorSummary {
    /// Report table header matching [`table_row`](Self::table_row).
    pub fn table_header(label_width: usize) -> String {
        format!(
            "{:label_width$}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}",
            "Model", "Mean AE", "Std AE", "Q1 AE", "Q2 AE", "Q3 AE"
        )
    }

    /// One report row in the published column order, two decimals.
    pub fn table_row(&self, label: &str, label_width: usize) -> String {
        format!(
            "{:label_width$}  {:>8.2}  {:>8.2}  {:>8.2}  {:>8.2}  {:>8.2}",
            label, self.mean, self.std, self.q1, self.q2, self.q3
        )
    }
}

/// Which optical-to-visual mapper the protocol personalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapperKind {
    Poly,
    Dense,
    /// No mapping: score the raw optical axis (the kappa-offset baseline).
    None,
}

impl std::str::FromStr for MapperKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poly" => Ok(MapperKind::Poly),
            "dense" => Ok(MapperKind::Dense),
            "none" => Ok(MapperKind::None),
            other => Err(Error::InvalidConfig(format!(
                "unknown mapper {other:?} (expected poly, dense, or none)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    /// Depth plane whose nine targets personalize the mapper.
    pub calibration_plane: usize,
    pub frames_per_target: usize,
    pub noise: NoiseModel,
    pub mapper: MapperKind,
    pub solver: CorneaSolverConfig,
    pub train: TrainConfig,
    /// Score against the calibration origin instead of the mean cornea of
    /// the evaluated test frames.
    pub reuse_calibration_origin: bool,
    /// Average errors per target before summarizing, instead of per frame.
    pub per_target_average: bool,
}

impl ProtocolConfig {
    pub fn new(noise: NoiseModel) -> Self {
        Self {
            calibration_plane: 1,
            frames_per_target: 1,
            noise,
            mapper: MapperKind::Dense,
            solver: CorneaSolverConfig::default(),
            train: TrainConfig::default(),
            reuse_calibration_origin: false,
            per_target_average: false,
        }
    }
}

/// Everything the per-frame pipeline produced for one observation.
#[derive(Debug, Clone)]
pub struct SolvedFrame {
    pub cornea: CorneaEstimate,
    /// None when the pupil was absent from the observation.
    pub axis: Option<OpticalAxisEstimate>,
}

/// Runs the geometric pipeline on one observation: cornea 2D + 3D solve,
/// pupil lifting onto the estimated corneal sphere, optical axis in the
/// device frame.
pub fn solve_frame(
    scene: &Scene,
    obs: &FrameObservation,
    solver: &CorneaSolverConfig,
) -> Result<SolvedFrame> {
    let cornea = lift_cornea_3d(&scene.camera, &scene.rig, obs, solver)?;
    let axis = match &obs.pupil {
        Some(pupil_px) => {
            let sphere = Sphere::new(cornea.cornea_3d, solver.cornea_radius);
            let pupil_3d = lift_pupil_3d(&scene.camera, pupil_px, &sphere)?;
            Some(optical_axis(
                &cornea.cornea_3d,
                &pupil_3d,
                &scene.camera.pose,
            )?)
        }
        None => None,
    };
    Ok(SolvedFrame { cornea, axis })
}

/// Protocol phase a frame belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Calibration,
    Test,
}

impl Phase {
    fn as_str(self) -> &'static str {
        match self {
            Phase::Calibration => "calibration",
            Phase::Test => "test",
        }
    }
}

/// Per-frame evaluation record; one metrics CSV row.
#[derive(Debug, Clone)]
pub struct FrameRecord {
    pub phase: Phase,
    pub subject_id: u32,
    pub target_id: u32,
    pub frame_id: u32,
    /// "ok" or the error that dropped the frame.
    pub status: String,
    /// Angular error in arcmin; test frames only.
    pub error_arcmin: Option<f64>,
    pub cornea_iterations: Option<usize>,
    pub cornea_residual: Option<f64>,
    pub cornea_converged: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct ProtocolReport {
    pub summary: ErrorSummary,
    pub frames: Vec<FrameRecord>,
    /// Dropped / evaluated test-frame counts; they sum to the number of
    /// rendered test frames.
    pub dropped: usize,
    pub evaluated: usize,
    pub dropped_calibration: usize,
    /// Origin used for scoring.
    pub origin: GazeFrameSpec,
    pub mapper: Option<GazeMapper>,
}

impl ProtocolReport {
    /// Metrics CSV: per-frame rows plus a `#`-prefixed summary footer.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(
            out,
            "phase,subject_id,target_id,frame_id,status,error_arcmin,\
cornea_iterations,cornea_residual,cornea_converged"
        )?;
        for f in &self.frames {
            let error = f.error_arcmin.map(|e| e.to_string()).unwrap_or_default();
            let iters = f
                .cornea_iterations
                .map(|i| i.to_string())
                .unwrap_or_default();
            let residual = f
                .cornea_residual
                .map(|r| r.to_string())
                .unwrap_or_default();
            let converged = f
                .cornea_converged
                .map(|c| u8::from(c).to_string())
                .unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                f.phase.as_str(),
                f.subject_id,
                f.target_id,
                f.frame_id,
                f.status,
                error,
                iters,
                residual,
                converged
            )?;
        }
        let s = &self.summary;
        writeln!(out, "# summary,mean,std,q1,q2,q3,n,dropped,evaluated")?;
        writeln!(
            out,
            "# values,{},{},{},{},{},{},{},{}",
            s.mean, s.std, s.q1, s.q2, s.q3, s.n, self.dropped, self.evaluated
        )?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

struct PipelineFrame {
    phase: Phase,
    target_id: u32,
    frame_id: u32,
    target: Point3,
    outcome: Result<SolvedFrame>,
}

/// Runs the full protocol for one subject: render, solve, personalize the
/// mapper on the calibration plane, and score the remaining targets.
pub fn run_protocol(
    scene: &Scene,
    phys: &EyePhysiology,
    grid: &TargetGrid,
    cfg: &ProtocolConfig,
) -> Result<ProtocolReport> {
    if cfg.calibration_plane >= grid.plane_count() {
        return Err(Error::InvalidConfig(format!(
            "calibration plane {} out of range (grid has {} planes)",
            cfg.calibration_plane,
            grid.plane_count()
        )));
    }
    if cfg.frames_per_target == 0 {
        return Err(Error::InvalidConfig(
            "frames_per_target must be at least 1".into(),
        ));
    }
    cfg.noise.validate()?;

    // Render and solve every frame of every target, in parallel.
    let mut jobs = Vec::new();
    for target in grid.targets() {
        let phase = if target.plane == cfg.calibration_plane {
            Phase::Calibration
        } else {
            Phase::Test
        };
        for frame in 0..cfg.frames_per_target {
            jobs.push((phase, *target, frame as u32));
        }
    }
    let frames: Vec<PipelineFrame> = exec::map(jobs, |(phase, target, frame_id)| {
        let outcome = render_frame(
            scene,
            phys,
            &target,
            &cfg.noise,
            FrameIds {
                subject: 0,
                target: target.id(),
                frame: frame_id,
            },
        )
        .and_then(|(obs, _)| solve_frame(scene, &obs, &cfg.solver));
        PipelineFrame {
            phase,
            target_id: target.id(),
            frame_id,
            target: target.position,
            outcome,
        }
    });

    let central_cal_target = grid.center_target(cfg.calibration_plane).position;

    // Calibration: collect (optical axis, target direction from the
    // estimated cornea) pairs and the cornea positions for the origin.
    let mut cal_corneas = Vec::new();
    let mut cal_pairs = Vec::new();
    let mut usable_cal_targets = std::collections::BTreeSet::new();
    let mut dropped_calibration = 0;
    for f in frames.iter().filter(|f| f.phase == Phase::Calibration) {
        match &f.outcome {
            Ok(SolvedFrame {
                axis: Some(axis), ..
            }) => {
                cal_corneas.push(axis.cornea_3d);
                let visual_truth = Unit::new_normalize(f.target - axis.cornea_3d);
                cal_pairs.push((axis.optical_axis, visual_truth));
                usable_cal_targets.insert(f.target_id);
            }
            _ => dropped_calibration += 1,
        }
    }

    let mapper = match cfg.mapper {
        MapperKind::None => None,
        MapperKind::Poly => {
            if usable_cal_targets.len() < 6 {
                return Err(Error::InsufficientCalibration(usable_cal_targets.len()));
            }
            let origin_cal = gaze_origin(&cal_corneas, &central_cal_target)?;
            let cal_set = CalibrationSet::new(cal_pairs.clone());
            let fitted = fit_polynomial(&cal_set, &origin_cal)?;
            Some(GazeMapper::Poly {
                mapper: fitted,
                frame: origin_cal,
            })
        }
        MapperKind::Dense => {
            let cal_set = CalibrationSet::new(cal_pairs.clone());
            let net = net_init(derive_seed(cfg.noise.seed, 0xde, 0, 0));
            let (trained, _losses) = net_train(&net, &cal_set, &cfg.train)?;
            Some(GazeMapper::Dense(trained))
        }
    };

    // Test pass one: solve and predict every test frame.
    struct Scored {
        index: usize,
        target_id: u32,
        target: Point3,
        cornea: Point3,
        predicted: Dir3,
    }
    let mut scored = Vec::new();
    let mut records = Vec::with_capacity(frames.len());
    let mut dropped = 0;
    for (index, f) in frames.iter().enumerate() {
        let mut record = FrameRecord {
            phase: f.phase,
            subject_id: 0,
            target_id: f.target_id,
            frame_id: f.frame_id,
            status: "ok".into(),
            error_arcmin: None,
            cornea_iterations: None,
            cornea_residual: None,
            cornea_converged: None,
        };
        match &f.outcome {
            Ok(solved) => {
                record.cornea_iterations = Some(solved.cornea.iterations);
                record.cornea_residual = Some(solved.cornea.final_residual);
                record.cornea_converged = Some(solved.cornea.converged);
                match (&solved.axis, f.phase) {
                    (Some(axis), Phase::Test) => {
                        let predicted = match &mapper {
                            Some(m) => m.apply(&axis.optical_axis)?,
                            None => axis.optical_axis,
                        };
                        scored.push(Scored {
                            index,
                            target_id: f.target_id,
                            target: f.target,
                            cornea: axis.cornea_3d,
                            predicted,
                        });
                    }
                    (None, _) => {
                        record.status = "pupil absent".into();
                        if f.phase == Phase::Test {
                            dropped += 1;
                        }
                    }
                    (Some(_), Phase::Calibration) => {}
                }
            }
            Err(e) => {
                record.status = e.to_string();
                if f.phase == Phase::Test {
                    dropped += 1;
                }
            }
        }
        records.push(record);
    }

    // Test pass two: fix the scoring origin, then measure angular errors
    // against the true gaze vectors (origin to target).
    let origin = if cfg.reuse_calibration_origin || scored.is_empty() {
        gaze_origin(&cal_corneas, &central_cal_target)?
    } else {
        let test_corneas: Vec<Point3> = scored.iter().map(|s| s.cornea).collect();
        gaze_origin(&test_corneas, &central_cal_target)?
    };

    let mut errors = Vec::with_capacity(scored.len());
    let mut per_target: std::collections::BTreeMap<u32, Vec<f64>> = Default::default();
    for s in &scored {
        let truth = Unit::new_normalize(s.target - origin.origin);
        let error = angular_error_arcmin(&s.predicted, &truth);
        records[s.index].error_arcmin = Some(error);
        errors.push(error);
        per_target.entry(s.target_id).or_default().push(error);
    }

    let summary = if cfg.per_target_average {
        let target_means: Vec<f64> = per_target
            .values()
            .map(|errs| errs.iter().sum::<f64>() / errs.len() as f64)
            .collect();
        summarize(&target_means)?
    } else {
        summarize(&errors)?
    };

    Ok(ProtocolReport {
        summary,
        frames: records,
        dropped,
        evaluated: scored.len(),
        dropped_calibration,
        origin,
        mapper,
    })
}

/// One row of a noise sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub sigma: f64,
    pub summary: ErrorSummary,
    pub dropped: usize,
    pub evaluated: usize,
}

/// Runs the protocol once per noise level (sigma applied to both glints
/// and pupil), sharing the base seed. Sigmas must be sorted ascending.
pub fn noise_sweep(
    scene: &Scene,
    phys: &EyePhysiology,
    grid: &TargetGrid,
    sigmas: &[f64],
    cfg: &ProtocolConfig,
) -> Result<Vec<SweepPoint>> {
    if sigmas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig(
            "noise sweep sigmas must be sorted ascending".into(),
        ));
    }
    let mut points = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let mut run_cfg = cfg.clone();
        run_cfg.noise.glint_sigma = sigma;
        run_cfg.noise.pupil_sigma = sigma;
        let report = run_protocol(scene, phys, grid, &run_cfg)?;
        points.push(SweepPoint {
            sigma,
            summary: report.summary,
            dropped: report.dropped,
            evaluated: report.evaluated,
        });
    }
    Ok(points)
}

/// Noise sweep pooled over several seeds: per sigma, the per-frame errors
/// of every seed are pooled into one summary (Monte-Carlo averaging).
pub fn noise_sweep_seeds(
    scene: &Scene,
    phys: &EyePhysiology,
    grid: &TargetGrid,
    sigmas: &[f64],
    seeds: &[u64],
    cfg: &ProtocolConfig,
) -> Result<Vec<SweepPoint>> {
    if sigmas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig(
            "noise sweep sigmas must be sorted ascending".into(),
        ));
    }
    if seeds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut points = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let mut errors = Vec::new();
        let mut dropped = 0;
        let mut evaluated = 0;
        for &seed in seeds {
            let mut run_cfg = cfg.clone();
            run_cfg.noise.glint_sigma = sigma;
            run_cfg.noise.pupil_sigma = sigma;
            run_cfg.noise.seed = seed;
            let report = run_protocol(scene, phys, grid, &run_cfg)?;
            dropped += report.dropped;
            evaluated += report.evaluated;
            errors.extend(
                report
                    .frames
                    .iter()
                    .filter_map(|f| f.error_arcmin),
            );
        }
        points.push(SweepPoint {
            sigma,
            summary: summarize(&errors)?,
            dropped,
            evaluated,
        });
    }
    Ok(points)
}
