//! Paraxial propagation of vortex and optical Ferris-wheel beams through a
//! Rydberg-EIT medium with a nonlocal Kerr response, plus the tooling around
//! it: response coefficients, beam synthesis, stability metrics and a
//! genetic parameter search.
//!
//! Units throughout: lengths in µm, times in µs, all rates angular
//! (rad·µs⁻¹). Inputs quoted as `X/2π` in MHz or GHz are converted once by
//! the helpers in [`params`].

pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod io;
pub mod metrics;
pub mod optimizer;
pub mod params;
pub mod propagator;
pub mod quadrature;
pub mod response;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{make_ofw, make_vortex, ComplexField, Grid};
pub use metrics::{fidelity, RunRecord};
pub use params::{DerivedParams, KernelForm, PhysicalParams};
pub use propagator::{propagate, Mode, PropagationConfig, SplitStep};
pub use response::{nonlocal_kernel, potential_strengths, KernelTable, PotentialStrengths, ResponseCoefficients};
