//! Cramer-Rao bounds on time-delay estimation for signals spread over several
//! disjoint frequency bands, each received on its own branch with its own
//! channel coefficient and carrier frequency offset.
//!
//! The crate is organized bottom-up:
//!
//! - [`signal`] builds the sampled baseband waveform of each branch,
//! - [`functionals`] integrates the quantities that enter the Fisher matrix,
//! - [`crlb`] assembles the matrix and evaluates the three bounds,
//! - [`mc`] synthesizes noisy receptions and runs maximum-likelihood delay
//!   estimators against those bounds,
//! - [`scenario`] drives sweeps from a TOML file and renders CSV.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crlb;
pub mod error;
pub mod functionals;
pub mod linalg;
pub mod mc;
pub mod scenario;
pub mod signal;

pub use num_complex::Complex64;

pub use crate::crlb::{
    analyze_branch, assemble_fim, crlb1_closed, crlb1_via_inverse, crlb2, crlb3,
    crlb_constant_envelope, crlb_report, evaluate, BranchAnalysis, ChannelWeights, CrlbReport,
    FisherInfo,
};
pub use crate::error::{Error, ErrorCategory, Result};
pub use crate::functionals::{
    compute_functionals, convergence_check, ConvergenceReport, FunctionalSet,
};
pub use crate::mc::{
    ml_estimate, run_trials, synthesize_received, Estimate, KnowledgeLevel, MlEstimator,
    SearchGrid, TrialConfig, TrialReport,
};
pub use crate::scenario::{
    render_convergence_csv, render_crlb_csv, render_mc_csv, run_mc, run_scenario, CrlbRow, McRow,
    Scenario, Unit,
};
pub use crate::signal::{
    gaussian_doublet, make_symbols, sample_branch, BranchSpec, ModulationKind, ModulationSpec,
    PulseSpec, SampledSignal, SymbolSequence,
};
