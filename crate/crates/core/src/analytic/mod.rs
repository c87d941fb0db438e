//! Closed-form post-selection probabilities, bit error rates, resend
//! mixtures for both attacks, and quadrature outcome densities.
//!
//! All quantities are conditioned on Alice sending `|a>` and Bob measuring
//! the matching quadrature unless stated otherwise; the other three signal
//! states follow by phase rotation.

mod erfc;
mod quad;

pub use erfc::erfc;
pub use quad::{integrate, QuadResult};

use crate::error::{Error, Result};
use crate::model::{Basis, EveDetector, ProtocolParams, ResendMixture};

use std::f64::consts::{PI, SQRT_2};

/// Absolute tolerance for the one-dimensional resend-probability integrals.
pub const SMA_QUAD_TOL: f64 = 1e-9;

/// Raw SMA resend probabilities must satisfy `P+ + P- + 2*Pperp = 1` within
/// this bound before normalization.
pub const SMA_SUM_TOL: f64 = 1e-8;

/// A post-selection probability together with the bit error rate of the
/// surviving events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerResult {
    pub conclusive_prob: f64,
    pub ber: f64,
}

fn gaussian_density(x: f64, mean: f64) -> f64 {
    let d = x - mean;
    (2.0 / PI).sqrt() * (-2.0 * d * d).exp()
}

/// Probability that Bob's outcome survives post-selection with no
/// eavesdropper present:
/// `(1/2) { erfc[sqrt(2)(x0 + m)] + erfc[sqrt(2)(x0 - m)] }` with
/// `m = sqrt(eta * mu_a)`.
pub fn conclusive_prob_absence(params: &ProtocolParams) -> f64 {
    let m = (params.total_transmittance() * params.mu_a).sqrt();
    0.5 * (erfc(SQRT_2 * (params.x0 + m)) + erfc(SQRT_2 * (params.x0 - m)))
}

/// Inherent bit error rate of the lossy system with no eavesdropper.
///
/// Fails with [`Error::NoConclusiveEvents`] if the post-selection
/// probability underflows to zero.
pub fn ber_absence(params: &ProtocolParams) -> Result<BerResult> {
    let conclusive = conclusive_prob_absence(params);
    if conclusive <= 0.0 {
        return Err(Error::NoConclusiveEvents);
    }
    let m = (params.total_transmittance() * params.mu_a).sqrt();
    let ber = erfc(SQRT_2 * (params.x0 + m)) / (2.0 * conclusive);
    Ok(BerResult { conclusive_prob: conclusive, ber })
}

/// Resend mixture of the single-photon-detection attack.
///
/// With Alice sending `|a>` and Eve interferometrically reading the pulse at
/// Alice's output (no channel loss applies before her):
///
/// * matched basis: `P_D1 = 1 - (1 - Y0) e^(-2 eps mu_a)`, `P_D2 = Y0`;
/// * mismatched basis: both detectors click independently with
///   `P'_D = 1 - (1 - Y0) e^(-eps mu_a)`;
/// * a single click resends the corresponding state, double clicks and
///   empty gates resend vacuum.
///
/// The five components sum to one algebraically.
pub fn spda_mixture(mu_a: f64, detector: &EveDetector) -> ResendMixture {
    let y0 = detector.y0;
    let eps = detector.epsilon;
    let p_d1 = 1.0 - (1.0 - y0) * (-2.0 * eps * mu_a).exp();
    let p_d2 = y0;
    let p_d = 1.0 - (1.0 - y0) * (-eps * mu_a).exp();

    let p_plus = p_d1 * (1.0 - p_d2) / 2.0;
    let p_minus = (1.0 - p_d1) * p_d2 / 2.0;
    let p_perp = p_d * (1.0 - p_d) / 2.0;
    let p_vac = ((1.0 - p_d1) * (1.0 - p_d2)
        + p_d1 * p_d2
        + (1.0 - p_d) * (1.0 - p_d)
        + p_d * p_d)
        / 2.0;

    ResendMixture {
        p_plus,
        p_minus,
        p_plus_i: p_perp,
        p_minus_i: p_perp,
        p_vac,
    }
}

/// Resend mixture of the simultaneous-measurement attack.
///
/// Eve splits the pulse 50/50, measures both quadratures, and resends by the
/// sign rule on `(x1, x2)`. The region probabilities reduce to
/// one-dimensional integrals of `erfc` against the Gaussian marginal
/// `g(t) = sqrt(2/pi) e^(-2 t^2)` (with `m = sqrt(mu_a / 2)`):
///
/// * `P+    = int_0^inf g(t) erfc[sqrt(2)(t - m)] dt`  (|x2| folded),
/// * `P-    = int_0^inf g(t) erfc[sqrt(2)(t + m)] dt`,
/// * `Pperp = int_0^inf g(t) (erfc[-sqrt(2)(t + m)] - erfc[sqrt(2)(t - m)]) / 2 dt`.
///
/// Each integral is evaluated adaptively to [`SMA_QUAD_TOL`]; the raw sum
/// rule `P+ + P- + 2 Pperp = 1` is checked to [`SMA_SUM_TOL`] and the
/// components are then normalized so the mixture sums to one exactly.
/// Boundary sets such as `x1 = |x2|` carry zero probability, so tie
/// handling does not affect the values.
pub fn sma_mixture(mu_a: f64) -> Result<ResendMixture> {
    if !(mu_a >= 0.0) {
        return Err(Error::Domain(format!("mu_a must be >= 0, got {mu_a}")));
    }
    let m = (mu_a / 2.0).sqrt();
    let g = |t: f64| (2.0 / PI).sqrt() * (-2.0 * t * t).exp();

    let p_plus = integrate(|t| g(t) * erfc(SQRT_2 * (t - m)), 0.0, 8.0, SMA_QUAD_TOL)?.value;
    let p_minus = integrate(|t| g(t) * erfc(SQRT_2 * (t + m)), 0.0, 8.0, SMA_QUAD_TOL)?.value;
    let p_perp = integrate(
        |t| g(t) * (erfc(-SQRT_2 * (t + m)) - erfc(SQRT_2 * (t - m))) / 2.0,
        0.0,
        8.0,
        SMA_QUAD_TOL,
    )?
    .value;

    let sum = p_plus + p_minus + 2.0 * p_perp;
    if (sum - 1.0).abs() > SMA_SUM_TOL {
        return Err(Error::QuadratureNonConvergence {
            error_estimate: (sum - 1.0).abs(),
            tolerance: SMA_SUM_TOL,
            panels: 0,
        });
    }

    Ok(ResendMixture {
        p_plus: p_plus / sum,
        p_minus: p_minus / sum,
        p_plus_i: p_perp / sum,
        p_minus_i: p_perp / sum,
        p_vac: 0.0,
    })
}

/// Probability that Bob's outcome survives post-selection when Eve resends
/// the mixture `mix` at intensity `mu_e`.
pub fn conclusive_prob_presence(mix: &ResendMixture, mu_e: f64, x0: f64) -> f64 {
    let me = mu_e.sqrt();
    0.5 * (mix.p_plus + mix.p_minus)
        * (erfc(SQRT_2 * (x0 + me)) + erfc(SQRT_2 * (x0 - me)))
        + mix.p_neutral() * erfc(SQRT_2 * x0)
}

/// Bit error rate of the post-selected events in the presence of Eve.
pub fn ber_presence(mix: &ResendMixture, mu_e: f64, x0: f64) -> Result<BerResult> {
    let conclusive = conclusive_prob_presence(mix, mu_e, x0);
    if conclusive <= 0.0 {
        return Err(Error::NoConclusiveEvents);
    }
    let me = mu_e.sqrt();
    let err_mass = mix.p_plus * erfc(SQRT_2 * (x0 + me))
        + mix.p_minus * erfc(SQRT_2 * (x0 - me))
        + mix.p_neutral() * erfc(SQRT_2 * x0);
    Ok(BerResult { conclusive_prob: conclusive, ber: err_mass / (2.0 * conclusive) })
}

/// Outcome density of Bob's quadrature with no eavesdropper: a Gaussian
/// displaced by `sqrt(eta mu_a)` in the correct basis and centred in the
/// wrong one.
pub fn outcome_density_absence(params: &ProtocolParams, basis: Basis, x: f64) -> f64 {
    let mean = match basis {
        Basis::Correct => (params.total_transmittance() * params.mu_a).sqrt(),
        Basis::Wrong => 0.0,
    };
    gaussian_density(x, mean)
}

/// Outcome density of Bob's quadrature when Eve resends `mix` at intensity
/// `mu_e`. In the correct basis the `|+-a_e>` components carry the
/// displacement; in the wrong basis the orthogonal pair does.
pub fn outcome_density_presence(mix: &ResendMixture, mu_e: f64, basis: Basis, x: f64) -> f64 {
    let me = mu_e.sqrt();
    match basis {
        Basis::Correct => {
            mix.p_plus * gaussian_density(x, me)
                + mix.p_minus * gaussian_density(x, -me)
                + mix.p_neutral() * gaussian_density(x, 0.0)
        }
        Basis::Wrong => {
            mix.p_plus_i * gaussian_density(x, me)
                + mix.p_minus_i * gaussian_density(x, -me)
                + (mix.p_plus + mix.p_minus + mix.p_vac) * gaussian_density(x, 0.0)
        }
    }
}
