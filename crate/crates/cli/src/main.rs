//! Batch entry point: simulate datasets, solve observation files,
//! calibrate mappers, run the evaluation protocol, and sweep noise levels.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or geometry error.
//! Every subcommand records a `run_manifest.txt` into its output directory
//! and writes byte-identical outputs when re-run with the same
//! configuration and seed.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use gazekit::config::SceneConfig;
use gazekit::cornea::CorneaSolverConfig;
use gazekit::eval::{
    noise_sweep_seeds, run_protocol, solve_frame, ErrorSummary, MapperKind, ProtocolConfig,
};
use gazekit::gaze::gaze_origin;
use gazekit::geom::Point3;
use gazekit::mapper::{fit_polynomial, net_init, net_train, save_mapper, CalibrationSet, GazeMapper, TrainConfig};
use gazekit::rng::derive_seed;
use gazekit::scene::{make_target_grid, EyePhysiology, PupilMode, Scene, TargetGrid};
use gazekit::sim::{
    generate_dataset, read_observations_csv, subject_variants, NoiseModel,
};
use gazekit::nalgebra::Unit;

#[derive(Parser)]
#[command(
    name = "gazekit",
    version,
    about = "Glint-based gaze estimation: simulate, solve, calibrate, evaluate, sweep"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MapperArg {
    Poly,
    Dense,
    None,
}

impl From<MapperArg> for MapperKind {
    fn from(m: MapperArg) -> Self {
        match m {
            MapperArg::Poly => MapperKind::Poly,
            MapperArg::Dense => MapperKind::Dense,
            MapperArg::None => MapperKind::None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PupilModeArg {
    Consistent,
    Physiological,
}

#[derive(Args)]
struct CommonArgs {
    /// Scene configuration file (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base RNG seed.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the pupil placement mode of the configuration.
    #[arg(long, value_enum)]
    pupil_mode: Option<PupilModeArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic observation dataset to CSV.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of simulated subjects (subject 0 uses the configured
        /// physiology; the rest are jittered variants).
        #[arg(long, default_value_t = 1)]
        subjects: usize,
        /// Frames per gaze target.
        #[arg(long, default_value_t = 1)]
        frames: usize,
        /// Glint and pupil pixel noise, sigma in px.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Per-glint dropout probability.
        #[arg(long, default_value_t = 0.0)]
        dropout: f64,
        /// Append ground-truth columns (cornea, optical/visual axes).
        #[arg(long)]
        with_truth: bool,
    },
    /// Solve cornea and optical-axis estimates for an observation CSV.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Observation dataset (dataset.csv schema; truth columns ignored).
        #[arg(long)]
        input: PathBuf,
    },
    /// Fit a gaze mapper from the calibration plane of a dataset.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        /// Observation dataset to calibrate from.
        #[arg(long)]
        input: PathBuf,
        /// Mapper scheme to fit.
        #[arg(long, value_enum, default_value_t = MapperArg::Dense)]
        mapper: MapperArg,
        /// Depth plane whose targets are used for personalization.
        #[arg(long, default_value_t = 1)]
        calibration_plane: usize,
    },
    /// Run the calibrate-then-test protocol and report arcmin statistics.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value_t = MapperArg::Dense)]
        mapper: MapperArg,
        /// Glint and pupil pixel noise, sigma in px.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0.0)]
        dropout: f64,
        #[arg(long, default_value_t = 1)]
        calibration_plane: usize,
        /// Frames per gaze target.
        #[arg(long, default_value_t = 1)]
        frames: usize,
    },
    /// Evaluate across a list of noise levels.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value_t = MapperArg::Dense)]
        mapper: MapperArg,
        /// Comma-separated pixel sigmas, ascending.
        #[arg(long, default_value = "0,0.25,0.5,1.0")]
        sigmas: String,
        /// Number of Monte-Carlo seeds pooled per sigma.
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        #[arg(long, default_value_t = 0.0)]
        dropout: f64,
        #[arg(long, default_value_t = 1)]
        calibration_plane: usize,
        #[arg(long, default_value_t = 1)]
        frames: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Scene objects resolved from the configuration plus CLI overrides.
struct Setup {
    scene: Scene,
    phys: EyePhysiology,
    grid: TargetGrid,
}

fn load_setup(common: &CommonArgs) -> gazekit::Result<Setup> {
    let config = match &common.config {
        Some(path) => SceneConfig::load(path)?,
        None => SceneConfig::default(),
    };
    let scene = config.build_scene()?;
    let mut phys = config.build_physiology(&scene.camera)?;
    if let Some(mode) = common.pupil_mode {
        phys.pupil_mode = match mode {
            PupilModeArg::Consistent => PupilMode::Consistent,
            PupilModeArg::Physiological => PupilMode::Physiological {
                pupil_offset: config.physiology.pupil_offset,
            },
        };
    }
    let grid = make_target_grid(&config.build_grid_config());
    Ok(Setup { scene, phys, grid })
}

fn write_manifest(common: &CommonArgs, subcommand: &str) -> gazekit::Result<()> {
    fs::create_dir_all(&common.out)?;
    let config = common
        .config
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "default".into());
    let manifest = format!(
        "tool gazekit {}\nsubcommand {}\nconfig {}\nseed {}\nout {}\n",
        env!("CARGO_PKG_VERSION"),
        subcommand,
        config,
        common.seed,
        common.out.display()
    );
    fs::write(common.out.join("run_manifest.txt"), manifest)?;
    Ok(())
}

fn create_output(dir: &Path, name: &str) -> gazekit::Result<BufWriter<fs::File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

fn sanitize(status: &str) -> String {
    status.replace(',', ";")
}

fn run(cli: Cli) -> gazekit::Result<()> {
    match cli.command {
        Command::Simulate {
            common,
            subjects,
            frames,
            noise,
            dropout,
            with_truth,
        } => {
            let setup = load_setup(&common)?;
            let noise = NoiseModel {
                glint_sigma: noise,
                pupil_sigma: noise,
                dropout_prob: dropout,
                seed: common.seed,
            };
            let all_subjects = subject_variants(&setup.phys, subjects, common.seed);
            let dataset =
                generate_dataset(&setup.scene, &all_subjects, &setup.grid, frames, &noise)?;
            write_manifest(&common, "simulate")?;
            let mut out = create_output(&common.out, "dataset.csv")?;
            dataset.write_csv(&mut out, with_truth)?;
            out.flush()?;
            println!(
                "wrote {} ({} rows)",
                common.out.join("dataset.csv").display(),
                dataset.records.len()
            );
        }

        Command::Solve { common, input } => {
            let setup = load_setup(&common)?;
            let observations = read_observations_csv(BufReader::new(fs::File::open(&input)?))?;
            let solver = CorneaSolverConfig::default();
            write_manifest(&common, "solve")?;
            let mut out = create_output(&common.out, "estimates.csv")?;
            writeln!(
                out,
                "subject_id,target_id,frame_id,status,cornea_u,cornea_v,\
cornea_x,cornea_y,cornea_z,iterations,residual,converged,\
optical_dev_x,optical_dev_y,optical_dev_z"
            )?;
            let mut solved = 0usize;
            for obs in &observations {
                let prefix = format!("{},{},{}", obs.subject_id, obs.target_id, obs.frame_id);
                match solve_frame(&setup.scene, obs, &solver) {
                    Ok(frame) => {
                        solved += 1;
                        let c = &frame.cornea;
                        let axis = frame
                            .axis
                            .as_ref()
                            .map(|a| {
                                let d = a.optical_axis.into_inner();
                                format!("{},{},{}", d.x, d.y, d.z)
                            })
                            .unwrap_or_else(|| ",,".into());
                        writeln!(
                            out,
                            "{prefix},ok,{},{},{},{},{},{},{},{},{axis}",
                            c.cornea_2d.x,
                            c.cornea_2d.y,
                            c.cornea_3d.x,
                            c.cornea_3d.y,
                            c.cornea_3d.z,
                            c.iterations,
                            c.final_residual,
                            u8::from(c.converged)
                        )?;
                    }
                    Err(e) => {
                        writeln!(out, "{prefix},{},,,,,,,,,,,", sanitize(&e.to_string()))?;
                    }
                }
            }
            out.flush()?;
            println!(
                "wrote {} ({} of {} frames solved)",
                common.out.join("estimates.csv").display(),
                solved,
                observations.len()
            );
        }

        Command::Calibrate {
            common,
            input,
            mapper,
            calibration_plane,
        } => {
            let setup = load_setup(&common)?;
            let observations = read_observations_csv(BufReader::new(fs::File::open(&input)?))?;
            let solver = CorneaSolverConfig::default();
            let plane_range = (calibration_plane * 9) as u32..(calibration_plane * 9 + 9) as u32;
            let center_id = (calibration_plane * 9 + 4) as u32;

            let mut pairs = Vec::new();
            let mut corneas = Vec::new();
            let mut central_target: Option<Point3> = None;
            for obs in observations
                .iter()
                .filter(|o| plane_range.contains(&o.target_id))
            {
                if obs.target_id == center_id {
                    central_target = Some(obs.target);
                }
                if let Ok(frame) = solve_frame(&setup.scene, obs, &solver) {
                    if let Some(axis) = frame.axis {
                        corneas.push(axis.cornea_3d);
                        pairs.push((
                            axis.optical_axis,
                            Unit::new_normalize(obs.target - axis.cornea_3d),
                        ));
                    }
                }
            }
            let central_target = central_target.ok_or_else(|| {
                gazekit::Error::InvalidConfig(format!(
                    "dataset has no frames for the central calibration target (id {center_id})"
                ))
            })?;
            let origin = gaze_origin(&corneas, &central_target)?;
            let cal = CalibrationSet::new(pairs);
            let fitted = match mapper {
                MapperArg::Poly => GazeMapper::Poly {
                    mapper: fit_polynomial(&cal, &origin)?,
                    frame: origin,
                },
                MapperArg::Dense => {
                    let net = net_init(derive_seed(common.seed, 0xde, 0, 0));
                    let (trained, _) = net_train(&net, &cal, &TrainConfig::default())?;
                    GazeMapper::Dense(trained)
                }
                MapperArg::None => {
                    return Err(gazekit::Error::InvalidConfig(
                        "calibrate requires --mapper poly or dense".into(),
                    ))
                }
            };
            write_manifest(&common, "calibrate")?;
            let mut out = create_output(&common.out, "mapper.txt")?;
            save_mapper(&fitted, &mut out)?;
            out.flush()?;
            println!(
                "wrote {} ({} scheme, {} calibration pairs)",
                common.out.join("mapper.txt").display(),
                fitted.scheme(),
                cal.len()
            );
        }

        Command::Evaluate {
            common,
            mapper,
            noise,
            dropout,
            calibration_plane,
            frames,
        } => {
            let setup = load_setup(&common)?;
            let mut cfg = ProtocolConfig::new(NoiseModel {
                glint_sigma: noise,
                pupil_sigma: noise,
                dropout_prob: dropout,
                seed: common.seed,
            });
            cfg.mapper = mapper.into();
            cfg.calibration_plane = calibration_plane;
            cfg.frames_per_target = frames;
            let report = run_protocol(&setup.scene, &setup.phys, &setup.grid, &cfg)?;
            write_manifest(&common, "evaluate")?;
            let mut out = create_output(&common.out, "metrics.csv")?;
            report.write_csv(&mut out)?;
            out.flush()?;

            let label = format!("gazekit-{}", mapper_label(mapper));
            println!("{}", ErrorSummary::table_header(16));
            println!("{}", report.summary.table_row(&label, 16));
            println!(
                "evaluated {} test frames, dropped {} (calibration drops: {})",
                report.evaluated, report.dropped, report.dropped_calibration
            );
            println!("wrote {}", common.out.join("metrics.csv").display());
        }

        Command::Sweep {
            common,
            mapper,
            sigmas,
            seeds,
            dropout,
            calibration_plane,
            frames,
        } => {
            let setup = load_setup(&common)?;
            let sigmas: Vec<f64> = sigmas
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        gazekit::Error::InvalidConfig(format!("bad sigma value {s:?}"))
                    })
                })
                .collect::<gazekit::Result<_>>()?;
            if seeds == 0 {
                return Err(gazekit::Error::InvalidConfig(
                    "--seeds must be at least 1".into(),
                ));
            }
            let mut cfg = ProtocolConfig::new(NoiseModel {
                glint_sigma: 0.0,
                pupil_sigma: 0.0,
                dropout_prob: dropout,
                seed: common.seed,
            });
            cfg.mapper = mapper.into();
            cfg.calibration_plane = calibration_plane;
            cfg.frames_per_target = frames;
            let seed_list: Vec<u64> = (0..seeds as u64).map(|i| common.seed + i).collect();
            let points =
                noise_sweep_seeds(&setup.scene, &setup.phys, &setup.grid, &sigmas, &seed_list, &cfg)?;

            write_manifest(&common, "sweep")?;
            let mut out = create_output(&common.out, "sweep.csv")?;
            writeln!(out, "sigma_px,mean,std,q1,q2,q3,n,dropped,evaluated")?;
            println!("{}", ErrorSummary::table_header(16));
            for p in &points {
                let s = &p.summary;
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    p.sigma, s.mean, s.std, s.q1, s.q2, s.q3, s.n, p.dropped, p.evaluated
                )?;
                let label = format!("sigma {:.2} px", p.sigma);
                println!("{}", s.table_row(&label, 16));
            }
            out.flush()?;
            println!("wrote {}", common.out.join("sweep.csv").display());
        }
    }
    Ok(())
}

fn mapper_label(mapper: MapperArg) -> &'static str {
    match mapper {
        MapperArg::Poly => "poly",
        MapperArg::Dense => "dense",
        MapperArg::None => "none",
    }
}
