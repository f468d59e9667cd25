//! Solver and verification harness for a two-layer porous-media combustion
//! system: two coupled reaction-diffusion equations for the layer temperatures
//! driven by Arrhenius kinetics, with the fuel concentrations eliminated
//! through their closed-form exponential decay.
//!
//! The pipeline has three independent legs that check each other:
//!
//! * [`kernel`] constructs fundamental solutions of 1-D uniformly parabolic
//!   operators with Hölder coefficients by the parametrix (Levi) method and
//!   exposes them as evaluators and convolution operators.
//! * [`solver`] runs the Picard iteration for the coupled system through the
//!   integral representation built on those kernels, and chains local windows
//!   into a global march.
//! * [`fdref`] is a deliberately independent finite-difference oracle for the
//!   same initial-value problem; it only shares the constitutive functions in
//!   [`model`], never the kernel machinery.
//!
//! [`verify`] turns the analytical invariants of the model (sector bounds,
//! fuel monotonicity, comparison ordering, Lᵖ envelopes, coefficient
//! stability) into post-hoc checks on solved trajectories, and [`cli`] wires
//! everything to TOML scenarios and CSV outputs.

pub mod cli;
pub mod fdref;
pub mod grid;
pub mod kernel;
pub mod model;
pub mod solver;
pub mod verify;

/// Errors surfaced by the library.
///
/// Numerical checks that merely *fail* do not error; they return a
/// [`verify::CheckReport`] with `passed = false`. Errors are reserved for
/// contract violations (bad arguments, invalid configuration) and for
/// breakdowns that make a result meaningless (instability, lost local
/// existence).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter `{name}` must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("negative fuel value {value} (fuel fields must stay nonnegative)")]
    NegativeFuel { value: f64 },

    #[error("negative cumulative reaction integral {value}")]
    NegativeHistory { value: f64 },

    #[error("negative time {value}")]
    NegativeTime { value: f64 },

    #[error("kernel evaluation requires t > tau, got t = {t}, tau = {tau}")]
    TimeOrder { t: f64, tau: f64 },

    #[error("Levi iterate index {requested} exceeds the configured depth {max}")]
    LeviDepth { requested: usize, max: usize },

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("coefficient field violates its declared bounds: {0}")]
    CoefficientBounds(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("finite-difference step unstable: {0}")]
    Unstable(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error(
        "local existence lost: window length shrank to {window} (floor {floor}) without contraction"
    )]
    LocalExistence { window: f64, floor: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("failed to parse scenario: {0}")]
    Toml(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
