//! Robust mean-square stability certificates for linear quantum plants
//! subject to a nonlinear quantum uncertainty, via a small-gain argument.
//!
//! The pipeline reads a plant in doubled-up form ([`model`]), computes the
//! nominal drift, the H-infinity norm of the uncertainty channel and a
//! Riccati certificate ([`smallgain`]), takes the gain and covariance budget
//! from a linear uncertainty subsystem ([`uncertainty`]), and checks the
//! resulting mean-square bound against closed-loop second moments
//! ([`moments`]). [`fockcheck`] verifies the operator identities on
//! truncated Fock spaces and [`opa`] holds the parametric-amplifier closed forms.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fockcheck;
pub mod io;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod opa;
pub mod smallgain;
pub mod uncertainty;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
pub use model::{validate_model, QuantumModel, RawModel};
pub use smallgain::{certify, CertificationReport, CertifyOptions, Verdict};
pub use uncertainty::{qsiqc_params, LinearUncertainty, QsiqcParams};
