//! EnKCF: an ensemble of three kernelized correlation filters run in a fixed
//! round-robin (a large-area and a small-area translation filter plus a
//! target-only scale filter), smoothed by a constant-velocity particle filter.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: 2-D DFTs, complex planes, cosine windows and a brute-force
//!   Gram-matrix solver used as a test oracle.
//! * [`features`]: ROI cropping/resampling, fHoG and color-naming channels.
//! * [`kcf`]: a single kernelized correlation filter.
//! * [`particle`]: the particle filter that smooths the filter hand-offs.
//! * [`scheduler`]: the tracker state machine dispatching one filter per frame.
//! * [`harness`]: benchmark sequences and precision/success evaluation.
//!
//! With the `parallel` feature (on by default) per-channel transforms, the
//! scale pool, particle weighting and dataset evaluation fan out over rayon.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod features;
pub mod harness;
pub mod kcf;
pub mod par;
pub mod particle;
pub mod scheduler;
pub mod spectral;

pub use error::{Error, Result};
pub use features::{ColorNamingTable, FeatureKind, FeatureMap, FilterFeatureSpec, Image, Roi};
pub use harness::{MetricCurves, Rect, Sequence, TrackRun};
pub use kcf::{FilterModel, FilterParams, ResponseMap};
pub use particle::{Particle, ParticleSet};
pub use scheduler::{FilterKind, SchedulerConfig, TargetState, Tracker};
pub use spectral::{ComplexPlane, RealPlane};
