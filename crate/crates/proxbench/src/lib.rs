//! Projection and proximal fixed-point solvers for the "cone and sphere"
//! best-approximation problem, covering phase retrieval and source
//! localization, together with a reproducible benchmark harness.
//!
//! The crate is organized bottom-up:
//!
//! * [`signal`] — blockwise real storage for complex-as-`ℝ²` signals,
//!   unitary transforms, measurement maps, and the phase-invariant metric;
//! * [`sets`] — the constraint sets (amplitude spheres, cones, the
//!   product-space diagonal) with projectors and reflectors;
//! * [`algorithms`] — the benchmarked fixed-point step maps and the
//!   common run loop;
//! * [`problems`] — synthetic instance generators, dataset file I/O and
//!   per-family success criteria;
//! * [`bench`] — multi-trial campaigns, summaries and table emission.

pub mod algorithms;
pub mod bench;
pub mod error;
pub mod problems;
pub mod sets;
pub mod signal;

pub use error::Error;
pub use signal::{MeasurementMap, Modifier, ProductSignal, Shape, Signal, Transform};
