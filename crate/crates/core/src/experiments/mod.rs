//! Monte Carlo harness comparing empirical tails and norms with the bounds.

pub mod binomial;
mod checks;
mod tail;

pub use binomial::{binomial_cdf, binomial_sf, clopper_pearson};
pub use checks::{
    decoupling_average, decoupling_identity_check, empirical_psi1_report, mgf_envelope_check, EnvelopeCheck,
    Psi1Report,
};
pub use tail::{
    draw_quadforms, run_tail_experiment, Centering, CenteringInfo, NotApplicable, TailExperimentConfig, TailMetadata,
    TailReport, TailRow, Thresholds, AUTO_THRESHOLD_COUNT, CSV_CURVES, MIN_SAMPLES,
};
