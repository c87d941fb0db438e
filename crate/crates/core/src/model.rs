//! Domain types and elementary physical maps shared by every other module.
//!
//! The measurement model uses the convention `[x1, x2] = i/2`, so a homodyne
//! outcome on a coherent state of amplitude `b` and relative phase `phi` is
//! Gaussian with mean `b*cos(phi)` and standard deviation exactly `1/2`.
//! Every formula in the crate assumes this single convention.

use crate::error::{Error, Result};

/// Fibre attenuation coefficient in dB/km for standard telecom fibre.
pub const DEFAULT_LOSS_DB_PER_KM: f64 = 0.21;

/// Transmittance of Bob's optics times his homodyne efficiency.
pub const DEFAULT_ETA_BOB: f64 = 0.6636;

/// Alice/Bob/channel parameters for one protocol configuration.
///
/// `mu_a` is the mean photon number of Alice's signal pulse, `x0` the
/// symmetric post-selection threshold applied to Bob's quadrature outcome,
/// and `eta_bob` the lumped transmittance of Bob's optics and detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    pub mu_a: f64,
    pub x0: f64,
    pub distance_km: f64,
    pub loss_db_per_km: f64,
    pub eta_bob: f64,
}

impl ProtocolParams {
    /// Parameters with the default fibre loss and receiver transmittance.
    pub fn new(mu_a: f64, x0: f64, distance_km: f64) -> Result<Self> {
        let params = Self {
            mu_a,
            x0,
            distance_km,
            loss_db_per_km: DEFAULT_LOSS_DB_PER_KM,
            eta_bob: DEFAULT_ETA_BOB,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_a >= 0.0) {
            return Err(Error::Domain(format!("mu_a must be >= 0, got {}", self.mu_a)));
        }
        if !(self.x0 >= 0.0) {
            return Err(Error::Domain(format!("x0 must be >= 0, got {}", self.x0)));
        }
        if !(self.distance_km >= 0.0) {
            return Err(Error::Domain(format!(
                "distance_km must be >= 0, got {}",
                self.distance_km
            )));
        }
        if !(self.loss_db_per_km > 0.0) {
            return Err(Error::Domain(format!(
                "loss_db_per_km must be > 0, got {}",
                self.loss_db_per_km
            )));
        }
        if !(self.eta_bob > 0.0 && self.eta_bob <= 1.0) {
            return Err(Error::Domain(format!(
                "eta_bob must be in (0, 1], got {}",
                self.eta_bob
            )));
        }
        Ok(())
    }

    /// Channel transmittance `eta_c = 10^(-a*l/10)`.
    pub fn channel_transmittance(&self) -> f64 {
        10f64.powf(-self.loss_db_per_km * self.distance_km / 10.0)
    }

    /// Total transmittance `eta = eta_c * eta_bob` seen by Alice's signal.
    pub fn total_transmittance(&self) -> f64 {
        self.channel_transmittance() * self.eta_bob
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_distance(mut self, distance_km: f64) -> Self {
        self.distance_km = distance_km;
        self
    }
}

/// Channel transmittance `10^(-a*l/10)` for a fibre of length `l` km and
/// attenuation `a` dB/km. Strictly decreasing and multiplicative in `l`.
pub fn channel_transmittance(distance_km: f64, loss_db_per_km: f64) -> Result<f64> {
    if !(distance_km >= 0.0) {
        return Err(Error::Domain(format!(
            "distance_km must be >= 0, got {distance_km}"
        )));
    }
    if !(loss_db_per_km > 0.0) {
        return Err(Error::Domain(format!(
            "loss_db_per_km must be > 0, got {loss_db_per_km}"
        )));
    }
    Ok(10f64.powf(-loss_db_per_km * distance_km / 10.0))
}

/// Probability density of a homodyne outcome `x` on a coherent state of
/// amplitude `amplitude`, measured at relative phase `phase_diff`:
/// `sqrt(2/pi) * exp(-2 (x - amplitude*cos(phase_diff))^2)`.
///
/// A Gaussian with mean `amplitude*cos(phase_diff)` and standard deviation
/// 1/2; integrates to one over the real line.
pub fn quadrature_pdf(x: f64, amplitude: f64, phase_diff: f64) -> f64 {
    let d = x - amplitude * phase_diff.cos();
    (2.0 / std::f64::consts::PI).sqrt() * (-2.0 * d * d).exp()
}

/// Imperfections of one of Eve's single-photon detectors: dark-count
/// probability per gate and detection efficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveDetector {
    pub y0: f64,
    pub epsilon: f64,
}

impl EveDetector {
    pub fn new(y0: f64, epsilon: f64) -> Result<Self> {
        let detector = Self { y0, epsilon };
        detector.validate()?;
        Ok(detector)
    }

    /// No dark counts, unit efficiency.
    pub fn perfect() -> Self {
        Self { y0: 0.0, epsilon: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.y0 >= 0.0 && self.y0 < 1.0) {
            return Err(Error::Domain(format!("y0 must be in [0, 1), got {}", self.y0)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Domain(format!(
                "epsilon must be in (0, 1], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Which intercept-resend strategy Eve runs, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackStrategy {
    NoAttack,
    /// Interferometric readout with two single-photon detectors.
    Spda,
    /// 50/50 split followed by simultaneous measurement of both quadratures.
    Sma,
}

/// Full attack configuration for a session.
///
/// `mu_e` is the intensity of Eve's resent pulse *as seen at Bob's homodyne
/// input*: losses of Bob's receiver are already folded in, so no further
/// attenuation may be applied to it. The raw resent intensity is never
/// stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    pub strategy: AttackStrategy,
    pub mu_e: f64,
    pub detector: EveDetector,
}

impl AttackConfig {
    pub fn none() -> Self {
        Self {
            strategy: AttackStrategy::NoAttack,
            mu_e: 0.0,
            detector: EveDetector::perfect(),
        }
    }

    pub fn spda(mu_e: f64, detector: EveDetector) -> Self {
        Self { strategy: AttackStrategy::Spda, mu_e, detector }
    }

    pub fn sma(mu_e: f64) -> Self {
        Self {
            strategy: AttackStrategy::Sma,
            mu_e,
            detector: EveDetector::perfect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_e >= 0.0) {
            return Err(Error::Domain(format!("mu_e must be >= 0, got {}", self.mu_e)));
        }
        self.detector.validate()
    }
}

/// One of the four signal states `|a e^(i k pi/2)>`, or vacuum.
///
/// Vacuum is intensity zero rather than a separate variant, so density
/// formulas degrade gracefully.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentSignal {
    pub intensity: f64,
    pub phase_index: u8,
}

impl CoherentSignal {
    pub fn new(intensity: f64, phase_index: u8) -> Self {
        assert!(phase_index < 4, "phase_index must be in 0..4");
        assert!(intensity >= 0.0, "intensity must be >= 0");
        Self { intensity, phase_index }
    }

    pub fn vacuum() -> Self {
        Self { intensity: 0.0, phase_index: 0 }
    }

    pub fn is_vacuum(&self) -> bool {
        self.intensity == 0.0
    }

    /// Optical phase `k * pi/2`.
    pub fn phase(&self) -> f64 {
        f64::from(self.phase_index) * std::f64::consts::FRAC_PI_2
    }

    /// Key bit encoded by the state: 0 for phases {0, pi/2}, 1 for {pi, 3pi/2}.
    pub fn bit(&self) -> u8 {
        u8::from(self.phase_index >= 2)
    }

    /// Quadrature index (0 or 1) in which this state carries its displacement.
    pub fn encoding_basis(&self) -> u8 {
        self.phase_index % 2
    }
}

/// Which quadrature Bob measured relative to Alice's encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Correct,
    Wrong,
}

/// Probabilities that Eve resends `|a_e>`, `|-a_e>`, `|i a_e>`, `|-i a_e>`
/// or vacuum, conditioned on Alice having sent `|a>`. Other signal states
/// map onto this one by phase rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResendMixture {
    pub p_plus: f64,
    pub p_minus: f64,
    pub p_plus_i: f64,
    pub p_minus_i: f64,
    pub p_vac: f64,
}

/// Components of a [`ResendMixture`] must sum to one within this tolerance.
pub const MIXTURE_SUM_TOL: f64 = 1e-12;

impl ResendMixture {
    pub fn new(p_plus: f64, p_minus: f64, p_plus_i: f64, p_minus_i: f64, p_vac: f64) -> Result<Self> {
        let mix = Self { p_plus, p_minus, p_plus_i, p_minus_i, p_vac };
        for (name, p) in mix.components() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!(
                    "mixture component {name} must be in [0, 1], got {p}"
                )));
            }
        }
        let sum = mix.sum();
        if (sum - 1.0).abs() > MIXTURE_SUM_TOL {
            return Err(Error::Domain(format!(
                "mixture components must sum to 1 within {MIXTURE_SUM_TOL:e}, got {sum}"
            )));
        }
        Ok(mix)
    }

    /// Eve always forwards Alice's state untouched: `(1, 0, 0, 0, 0)`.
    pub fn passthrough() -> Self {
        Self { p_plus: 1.0, p_minus: 0.0, p_plus_i: 0.0, p_minus_i: 0.0, p_vac: 0.0 }
    }

    /// Eve always resends vacuum: `(0, 0, 0, 0, 1)`.
    pub fn vacuum() -> Self {
        Self { p_plus: 0.0, p_minus: 0.0, p_plus_i: 0.0, p_minus_i: 0.0, p_vac: 1.0 }
    }

    pub fn sum(&self) -> f64 {
        self.p_plus + self.p_minus + self.p_plus_i + self.p_minus_i + self.p_vac
    }

    /// Total weight of states that carry no displacement along the correct
    /// quadrature: both orthogonal states and vacuum.
    pub fn p_neutral(&self) -> f64 {
        self.p_plus_i + self.p_minus_i + self.p_vac
    }

    fn components(&self) -> [(&'static str, f64); 5] {
        [
            ("p_plus", self.p_plus),
            ("p_minus", self.p_minus),
            ("p_plus_i", self.p_plus_i),
            ("p_minus_i", self.p_minus_i),
            ("p_vac", self.p_vac),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn transmittance_zero_length_is_one() {
        assert_eq!(channel_transmittance(0.0, 0.21).unwrap(), 1.0);
    }

    #[test]
    fn transmittance_matches_reference() {
        // 10^(-0.63), mpmath 50-digit reference
        assert_relative_eq!(
            channel_transmittance(30.0, 0.21).unwrap(),
            0.23442288153199221,
            max_relative = 1e-15
        );
    }

    #[test]
    fn transmittance_exact_decade() {
        assert_relative_eq!(channel_transmittance(10.0, 3.0).unwrap(), 1e-3, max_relative = 1e-15);
    }

    #[test]
    fn transmittance_rejects_bad_domain() {
        assert!(channel_transmittance(-1.0, 0.21).is_err());
        assert!(channel_transmittance(10.0, 0.0).is_err());
        assert!(channel_transmittance(10.0, -0.5).is_err());
        assert!(channel_transmittance(f64::NAN, 0.21).is_err());
    }

    #[test]
    fn pdf_peak_is_sqrt_2_over_pi() {
        let peak = (2.0 / std::f64::consts::PI).sqrt();
        assert_relative_eq!(quadrature_pdf(0.7, 0.7, 0.0), peak, max_relative = 1e-14);
        assert_relative_eq!(peak, 0.79788456080286536, max_relative = 1e-15);
    }

    #[test]
    fn pdf_reference_values() {
        // sqrt(2/pi) * e^-2 and sqrt(2/pi) * e^-0.18, mpmath references
        assert_relative_eq!(quadrature_pdf(0.0, 1.0, 0.0), 0.10798193302637610, max_relative = 1e-14);
        assert_relative_eq!(
            quadrature_pdf(0.3, 1.0, std::f64::consts::FRAC_PI_2),
            0.66644920578359927,
            max_relative = 1e-14
        );
    }

    #[test]
    fn pdf_integrates_to_one() {
        // Composite Simpson over [-10, 10]; independent of the closed form.
        for &amp in &[0.0, 0.5, 1.0, 2.5, 5.0] {
            for &phase in &[0.0, 1.0, std::f64::consts::PI] {
                let n = 8000;
                let h = 20.0 / n as f64;
                let mut acc = quadrature_pdf(-10.0, amp, phase) + quadrature_pdf(10.0, amp, phase);
                for i in 1..n {
                    let x = -10.0 + i as f64 * h;
                    let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                    acc += w * quadrature_pdf(x, amp, phase);
                }
                let integral = acc * h / 3.0;
                assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn protocol_params_validation() {
        assert!(ProtocolParams::new(1.0, 1.12, 30.0).is_ok());
        assert!(ProtocolParams::new(-0.1, 0.0, 0.0).is_err());
        assert!(ProtocolParams::new(1.0, -0.2, 0.0).is_err());
        assert!(ProtocolParams::new(1.0, 0.0, -5.0).is_err());
        let mut p = ProtocolParams::new(1.0, 0.0, 0.0).unwrap();
        p.eta_bob = 1.2;
        assert!(p.validate().is_err());
        p.eta_bob = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn derived_transmittances_stay_in_range() {
        let p = ProtocolParams::new(1.0, 1.12, 30.0).unwrap();
        let eta_c = p.channel_transmittance();
        let eta = p.total_transmittance();
        assert!(eta_c > 0.0 && eta_c <= 1.0);
        assert!(eta > 0.0 && eta <= 1.0);
        assert_relative_eq!(eta, 0.15556302418463003, max_relative = 1e-14);
    }

    #[test]
    fn coherent_signal_accessors() {
        let s = CoherentSignal::new(1.5, 3);
        assert_eq!(s.bit(), 1);
        assert_eq!(s.encoding_basis(), 1);
        assert!(!s.is_vacuum());
        assert_relative_eq!(s.phase(), 3.0 * std::f64::consts::FRAC_PI_2);
        assert!(CoherentSignal::vacuum().is_vacuum());
        assert_eq!(CoherentSignal::new(2.0, 1).bit(), 0);
    }

    #[test]
    #[should_panic(expected = "phase_index")]
    fn coherent_signal_rejects_phase_index() {
        let _ = CoherentSignal::new(1.0, 4);
    }

    #[test]
    fn mixture_validation() {
        assert!(ResendMixture::new(0.2, 0.2, 0.2, 0.2, 0.2).is_ok());
        assert!(ResendMixture::new(0.5, 0.5, 0.25, -0.25, 0.0).is_err());
        assert!(ResendMixture::new(0.3, 0.3, 0.3, 0.3, 0.3).is_err());
        assert_eq!(ResendMixture::vacuum().p_neutral(), 1.0);
        assert_eq!(ResendMixture::passthrough().sum(), 1.0);
    }

    proptest! {
        #[test]
        fn transmittance_is_multiplicative(l1 in 0.0..100.0f64, l2 in 0.0..100.0f64) {
            let t1 = channel_transmittance(l1, 0.21).unwrap();
            let t2 = channel_transmittance(l2, 0.21).unwrap();
            let t12 = channel_transmittance(l1 + l2, 0.21).unwrap();
            prop_assert!((t12 - t1 * t2).abs() <= 1e-12);
        }

        #[test]
        fn transmittance_decreases_with_length(l in 0.0..200.0f64, dl in 0.01..50.0f64) {
            let t = channel_transmittance(l, 0.21).unwrap();
            let t2 = channel_transmittance(l + dl, 0.21).unwrap();
            prop_assert!(t2 < t);
        }

        #[test]
        fn pdf_is_nonnegative(x in -20.0..20.0f64, amp in 0.0..5.0f64, phase in 0.0..7.0f64) {
            prop_assert!(quadrature_pdf(x, amp, phase) >= 0.0);
        }

        #[test]
        fn pdf_phase_flip_mirror(x in -8.0..8.0f64, amp in 0.0..5.0f64, phase in 0.0..7.0f64) {
            let lhs = quadrature_pdf(x, amp, phase);
            let rhs = quadrature_pdf(-x, amp, phase + std::f64::consts::PI);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(rhs).max(1.0));
        }
    }
}
