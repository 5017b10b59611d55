//! Glint-based (PCCR) gaze estimation toolkit.
//!
//! Implements the classical pupil-center / corneal-reflection pipeline end
//! to end against a built-in synthetic eye-and-camera simulator that serves
//! as ground truth:
//!
//! 1. **simulator** — renders glint and pupil pixel observations by solving
//!    the specular reflection point of each LED on the corneal sphere.
//! 2. **cornea solver** — recovers the cornea 2D position as the
//!    least-squares intersection of the LED–glint image lines, then lifts
//!    it to 3D by minimizing the reflection residual along the camera ray.
//! 3. **gaze pipeline** — lifts the pupil to 3D on the corneal sphere,
//!    forms the optical axis, and parameterizes gaze as angles about a
//!    cornea-centered origin.
//! 4. **gaze mapper** — per-subject optical-to-visual-axis calibration,
//!    either a second-order polynomial or a small dense network.
//! 5. **eval harness** — calibrate-on-one-plane / test-on-the-rest
//!    protocol with arcmin error statistics and noise sweeps.
//!
//! Units: meters for 3D, pixels for image coordinates, radians internally,
//! arcmin in reports.

pub mod config;
pub mod cornea;
pub mod error;
pub mod eval;
pub mod exec;
pub mod gaze;
pub mod geom;
pub mod mapper;
pub mod rng;
pub mod scene;
pub mod sim;

pub use error::{Error, Result};

// The public geometry types are nalgebra types; re-export the crate so
// downstream users construct them without a separate dependency.
pub use nalgebra;
