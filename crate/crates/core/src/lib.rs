//! Numerical laboratory for a four-state phase-coding continuous-variable
//! QKD protocol with pulsed homodyne detection and threshold post-selection.
//!
//! The crate models the lossy no-eavesdropper channel, two intercept-resend
//! attacks (an interferometric single-photon-detection readout and a
//! simultaneous measurement of both quadratures), and the statistics Bob can
//! use to expose them:
//!
//! * [`model`] — shared domain types and the elementary physical maps;
//! * [`analytic`] — closed-form post-selection probabilities, bit error
//!   rates, resend mixtures and outcome densities;
//! * [`montecarlo`] — a seeded, deterministic pulse-by-pulse simulation that
//!   converges to the analytic predictions;
//! * [`analysis`] — crossover thresholds, maximal attack-visible distance,
//!   figure sweeps, and the chi-square density-reconstruction countermeasure.

pub mod analysis;
pub mod analytic;
pub mod error;
pub mod model;
pub mod montecarlo;

pub use analysis::{
    compare_attacks, crossover_threshold, default_mu_e_grid, density_curves, gof_test,
    max_distance, min_ber_presence, min_inherent_ber, sweep_threshold, ColumnSpec, EvePolicy,
    GofDecision, GofReport, SweepRow, SweepTable,
};
pub use analytic::{
    ber_absence, ber_presence, conclusive_prob_absence, conclusive_prob_presence, erfc,
    outcome_density_absence, outcome_density_presence, sma_mixture, spda_mixture, BerResult,
};
pub use error::{Error, Result};
pub use model::{
    channel_transmittance, quadrature_pdf, AttackConfig, AttackStrategy, Basis, CoherentSignal,
    EveDetector, ProtocolParams, ResendMixture, DEFAULT_ETA_BOB, DEFAULT_LOSS_DB_PER_KM,
};
pub use montecarlo::{
    eve_sma_trial, eve_spda_trial, sample_homodyne, simulate_session, HistogramPair,
    HistogramSpec, QuadratureHistogram, SessionStats,
};
