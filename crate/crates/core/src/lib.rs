//! Secret key rates for continuous-variable measurement-device-independent
//! QKD with virtual photon subtraction (non-Gaussian post-selection of the
//! modulation data).
//!
//! The pipeline is
//!
//! 1. [`photon_subtraction`]: covariance and success probability of each
//!    party's post-selected source;
//! 2. [`protocol`]: reduction of the relay configuration to an equivalent
//!    one-way channel;
//! 3. [`keyrate`]: mutual information, Holevo bound and the asymptotic
//!    reverse-reconciliation rate;
//! 4. [`optimizer`]: `T_PS` optimization, maximum distance, tolerable noise
//!    and sweeps.
//!
//! [`montecarlo`] independently samples the post-selection to check the
//! closed forms of step 1.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons are how NaN gets rejected

pub mod error;
pub mod gaussian;
pub mod keyrate;
pub mod montecarlo;
pub mod optimizer;
pub mod photon_subtraction;
pub mod protocol;

pub use error::{Error, Result};
pub use gaussian::{
    entropy_g, heterodyne_condition_single, symplectic_eigenvalues, von_neumann_entropy, SymplecticSpectrum,
    TwoModeCovariance,
};
pub use keyrate::{holevo_bound, key_rate, mutual_information, plob_bound, KeyRateBreakdown, KEY_RATE_FLOOR};
pub use montecarlo::{run_equivalence_check, McConfig, McReport};
pub use optimizer::{
    max_distance, optimal_tps, sweep, tolerable_excess_noise, Evaluation, OptimumReport, Party, Scenario, Scheme,
    SweepResult, SweepSpec, SweepVariable, TpsChoice,
};
pub use photon_subtraction::{
    selection_probability, subtracted_covariance, success_probability, ModulationSample, SourceParams,
};
pub use protocol::{
    end_to_end_covariance, equivalent_channel, optimal_mu, Attack, CeConvention, EquivalentChannel, Gain, Geometry,
    LinkParams, ProtocolConfig,
};
