//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("at least two lines are required, got {0}")]
    InsufficientLines(usize),

    #[error("line endpoints coincide (|a - b| = {0:.3e} px)")]
    DegenerateLine(f64),

    #[error("near-parallel lines: normal-equation condition number {cond:.3e}")]
    SingularGeometry { cond: f64 },

    #[error("projection of a point with |z| = {0:.3e} m is degenerate")]
    DegenerateProjection(f64),

    #[error("fixation did not converge (residual {residual:.3e} rad after {iterations} iterations)")]
    NoFixation { residual: f64, iterations: usize },

    #[error("camera or LED lies inside the corneal sphere")]
    InsideSphere,

    #[error("fewer than two glints present ({0})")]
    InsufficientGlints(usize),

    #[error("pupil ray misses the corneal sphere")]
    PupilRayMiss,

    #[error("cornea and pupil centers coincide (separation {0:.3e} m)")]
    DegenerateAxis(f64),

    #[error("empty input")]
    EmptyInput,

    #[error("direction within {0:.3e} rad of the vertical axis; azimuth undefined")]
    GimbalDegenerate(f64),

    #[error("polynomial fit needs at least 6 calibration pairs, got {0}")]
    Underdetermined(usize),

    #[error("rank-deficient polynomial basis (collinear calibration targets?)")]
    SingularBasis,

    #[error("network output magnitude {0:.3e} too small to normalize")]
    DegenerateOutput(f64),

    #[error("training diverged: loss {loss:.3e} exceeds 10x the initial loss {initial:.3e}")]
    DivergedTraining { loss: f64, initial: f64 },

    #[error("only {0} usable calibration targets; the polynomial mapper needs 6")]
    InsufficientCalibration(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
