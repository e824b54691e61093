//! Lensless quantum ghost imaging with a collimated SPDC pump.
//!
//! The crate propagates the two-photon amplitude of a thin nonlinear crystal
//! to a signal-side object and bucket detector and an idler-side camera, and
//! compares the resulting ghost pattern with a closed-form Gaussian model.

pub mod analytic;
pub mod engine;
pub mod fourier;
pub mod grid;
pub mod objects;
pub mod optimize;
pub mod profile;
pub mod propagation;
pub mod setup;
pub mod spdc;

pub use analytic::{AnalyticError, AnalyticReport, DEFAULT_THRESHOLD, GAMMA};
pub use engine::{compute_jsp, ghost_pattern, illumination_width, visibility, EngineError, GhostPattern, JspResult};
pub use grid::{auto_grid, make_grid, GridError, SampledAxis, SpectralGrid};
pub use objects::{ObjectError, ObjectSpec, ObjectTransmission};
pub use profile::{fit_gaussian, moment_width, Profile1D, ProfileError};
pub use setup::{OpticalSetup, PhaseMatchingModel, PropagationMode, SetupError, ValidatedSetup};
pub use spdc::{psi_spdc, BiphotonAmplitude, Representation, SpdcError};
pub use rustfft::num_complex::Complex64;
