//! Stability and suboptimality certificates for multistep model predictive
//! control, with a closed-loop simulator to check them against.
//!
//! The certificate consumes only a controllability sequence `gamma` with
//! `V_i(x) <= gamma_i * l*(x)`, and returns the index `alpha_{N,m}`. A positive
//! index proves asymptotic stability of the `m`-step MPC loop with horizon `N`
//! and bounds its infinite-horizon cost by `V_N(x0) / alpha`.

pub mod analysis;
pub mod certificate;
pub mod controllability;
pub mod error;
pub mod format;
pub mod lp;
pub mod netcheck;
pub mod sim;

pub use analysis::{
    horizon_bound_half, horizon_bound_m1, minimal_horizon, stability_region, HorizonPolicy,
    HorizonResult, Parity, RegionGrid,
};
pub use certificate::{
    alpha_closed_form, alpha_lp, max_alpha_over_m, CertificateQuery, CertificateRecord,
    CertificateResult, Method,
};
pub use controllability::{
    check_submultiplicative, constant_gamma, gamma_from_c_sequence, gamma_from_exponential,
    CSequence, ExpBound, GammaSequence,
};
pub use error::{Error, Result};
pub use netcheck::{
    certify_up_to, run_network_experiment, ExperimentSpec, NetworkExperiment, NetworkReport,
};
