//! Pulse-by-pulse stochastic simulation of the protocol: Alice's random
//! state choice, an optional intercept-resend attack, Bob's homodyne
//! measurement, sifting and threshold post-selection.
//!
//! # Reproducibility
//!
//! Pulses are processed in fixed chunks of [`CHUNK_SIZE`]. Chunk `i` draws
//! from `ChaCha8` stream `i` of the session seed, and all tallies are plain
//! integer sums, so a session's output is bit-identical for any number of
//! worker threads and any rayon schedule.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{AttackConfig, AttackStrategy, Basis, CoherentSignal, EveDetector, ProtocolParams};

/// Pulses simulated per RNG stream.
pub const CHUNK_SIZE: u64 = 1 << 16;

/// Tallies of one simulated session.
///
/// `ber_estimate` is `None` when post-selection left no conclusive events;
/// it is never reported as zero in that case.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SessionStats {
    pub n_sent: u64,
    pub n_sifted: u64,
    pub n_conclusive: u64,
    pub n_errors: u64,
    pub ber_estimate: Option<f64>,
    pub ber_stderr: Option<f64>,
}

impl SessionStats {
    fn from_tallies(t: Tallies) -> Self {
        let (ber_estimate, ber_stderr) = if t.n_conclusive > 0 {
            let p = t.n_errors as f64 / t.n_conclusive as f64;
            (Some(p), Some((p * (1.0 - p) / t.n_conclusive as f64).sqrt()))
        } else {
            (None, None)
        };
        Self {
            n_sent: t.n_sent,
            n_sifted: t.n_sifted,
            n_conclusive: t.n_conclusive,
            n_errors: t.n_errors,
            ber_estimate,
            ber_stderr,
        }
    }

    /// Fraction of sifted pulses that survived post-selection.
    pub fn conclusive_rate(&self) -> Option<f64> {
        (self.n_sifted > 0).then(|| self.n_conclusive as f64 / self.n_sifted as f64)
    }

    /// Fraction of sent pulses kept after basis reconciliation.
    pub fn sift_rate(&self) -> Option<f64> {
        (self.n_sent > 0).then(|| self.n_sifted as f64 / self.n_sent as f64)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tallies {
    n_sent: u64,
    n_sifted: u64,
    n_conclusive: u64,
    n_errors: u64,
}

impl Tallies {
    fn merge(mut self, other: Tallies) -> Tallies {
        self.n_sent += other.n_sent;
        self.n_sifted += other.n_sifted;
        self.n_conclusive += other.n_conclusive;
        self.n_errors += other.n_errors;
        self
    }
}

/// Uniform binning over `[-half_range, half_range]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramSpec {
    pub half_range: f64,
    pub bins: usize,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self { half_range: 10.0, bins: 200 }
    }
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_range > 0.0) {
            return Err(Error::Config(format!(
                "histogram half_range must be > 0, got {}",
                self.half_range
            )));
        }
        if self.bins == 0 {
            return Err(Error::Config("histogram needs at least one bin".into()));
        }
        Ok(())
    }
}

/// Binned empirical density of Bob's quadrature outcomes for one basis.
///
/// Outcomes are mirrored into the frame of Alice's bit-0 state before
/// binning (`x -> -x` when she sent a bit-1 state), so pulses from all four
/// signal states pool into one per-state density. Outcomes outside the
/// binned range are dropped; with the default range their probability is
/// below 1e-40.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureHistogram {
    pub basis: Basis,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl QuadratureHistogram {
    pub fn new(basis: Basis, spec: &HistogramSpec) -> Self {
        let n = spec.bins;
        let width = 2.0 * spec.half_range / n as f64;
        let bin_edges = (0..=n).map(|i| -spec.half_range + i as f64 * width).collect();
        Self { basis, bin_edges, counts: vec![0; n], total: 0 }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.bin_edges[self.bins()] - self.bin_edges[0]) / self.bins() as f64
    }

    pub fn record(&mut self, x: f64) {
        let lo = self.bin_edges[0];
        let idx = ((x - lo) / self.bin_width()).floor();
        if idx >= 0.0 && (idx as usize) < self.bins() {
            self.counts[idx as usize] += 1;
            self.total += 1;
        }
    }

    /// Empirical density value of bin `i` (count over total mass and width).
    pub fn density(&self, i: usize) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts[i] as f64 / (self.total as f64 * self.bin_width())
    }

    fn merge(&mut self, other: &QuadratureHistogram) {
        debug_assert_eq!(self.bin_edges, other.bin_edges);
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.total += other.total;
    }
}

/// Correct- and wrong-basis histograms of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramPair {
    pub correct: QuadratureHistogram,
    pub wrong: QuadratureHistogram,
}

impl HistogramPair {
    fn new(spec: &HistogramSpec) -> Self {
        Self {
            correct: QuadratureHistogram::new(Basis::Correct, spec),
            wrong: QuadratureHistogram::new(Basis::Wrong, spec),
        }
    }

    fn merge(mut self, other: HistogramPair) -> Self {
        self.correct.merge(&other.correct);
        self.wrong.merge(&other.wrong);
        self
    }
}

/// Draw one homodyne outcome for `signal` at post-loss intensity
/// `effective_intensity`, with Bob's local phase `bob_phase`: Gaussian with
/// mean `sqrt(effective_intensity) * cos(bob_phase - signal_phase)` and
/// standard deviation 1/2. Vacuum draws around zero.
pub fn sample_homodyne<R: Rng + ?Sized>(
    signal: &CoherentSignal,
    effective_intensity: f64,
    bob_phase: f64,
    rng: &mut R,
) -> f64 {
    let mean = if signal.is_vacuum() {
        0.0
    } else {
        effective_intensity.sqrt() * (bob_phase - signal.phase()).cos()
    };
    let z: f64 = rng.sample(StandardNormal);
    mean + 0.5 * z
}

/// One interferometric intercept-resend trial.
///
/// Eve picks her measurement basis uniformly. When it matches Alice's
/// encoding basis, the constructive port fires with
/// `1 - (1 - Y0) e^(-2 eps mu_a)` and the other port only by dark count;
/// when it mismatches, both ports click independently with
/// `1 - (1 - Y0) e^(-eps mu_a)`. Exactly one click resends the matching
/// state at intensity `mu_e`; double clicks and empty gates resend vacuum.
/// Eve sits at Alice's output, so `alice.intensity` enters unattenuated.
pub fn eve_spda_trial<R: Rng + ?Sized>(
    alice: &CoherentSignal,
    detector: &EveDetector,
    mu_e: f64,
    rng: &mut R,
) -> CoherentSignal {
    let eve_basis: u8 = rng.random_range(0..2);
    let y0 = detector.y0;
    let eps = detector.epsilon;

    let (p_d1, p_d2) = if eve_basis == alice.encoding_basis() {
        let p_signal = 1.0 - (1.0 - y0) * (-2.0 * eps * alice.intensity).exp();
        if alice.bit() == 0 {
            (p_signal, y0)
        } else {
            (y0, p_signal)
        }
    } else {
        let p = 1.0 - (1.0 - y0) * (-eps * alice.intensity).exp();
        (p, p)
    };

    let d1 = rng.random::<f64>() < p_d1;
    let d2 = rng.random::<f64>() < p_d2;
    match (d1, d2) {
        (true, false) => CoherentSignal::new(mu_e, eve_basis),
        (false, true) => CoherentSignal::new(mu_e, eve_basis + 2),
        _ => CoherentSignal::vacuum(),
    }
}

/// One simultaneous-measurement trial: Eve splits the pulse 50/50, measures
/// `x1` and `x2` of the halves, and resends by the dominant quadrature
/// (`|a_e>` if `x1 >= |x2|`, `|-a_e>` if `-x1 >= |x2|`, `|i a_e>` if
/// `x2 > |x1|`, `|-i a_e>` otherwise).
pub fn eve_sma_trial<R: Rng + ?Sized>(
    alice: &CoherentSignal,
    mu_e: f64,
    rng: &mut R,
) -> CoherentSignal {
    let amp = (alice.intensity / 2.0).sqrt();
    let theta = alice.phase();
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let x1 = amp * theta.cos() + 0.5 * z1;
    let x2 = amp * theta.sin() + 0.5 * z2;
    CoherentSignal::new(mu_e, sma_resend_phase(x1, x2))
}

/// Phase index Eve resends for measured quadratures `(x1, x2)`. The four
/// branches partition the plane up to boundaries of measure zero.
pub fn sma_resend_phase(x1: f64, x2: f64) -> u8 {
    if x1 >= x2.abs() {
        0
    } else if -x1 >= x2.abs() {
        2
    } else if x2 > x1.abs() {
        1
    } else {
        3
    }
}

/// Simulate `n_pulses` protocol rounds.
///
/// Per pulse: Alice draws one of the four states uniformly, Bob draws his
/// basis uniformly. Without an attack the signal reaches Bob attenuated by
/// `eta_c * eta_bob`; under attack, Eve's trial replaces the channel and her
/// resent pulse reaches Bob's homodyne input at intensity `mu_e` with no
/// further loss. Correct-basis pulses are sifted; outcomes beyond `x0` in
/// magnitude give the bit by sign; the rest are inconclusive.
pub fn simulate_session(
    params: &ProtocolParams,
    attack: &AttackConfig,
    n_pulses: u64,
    seed: u64,
    histogram_spec: Option<&HistogramSpec>,
) -> Result<(SessionStats, Option<HistogramPair>)> {
    params.validate()?;
    attack.validate()?;
    if let Some(spec) = histogram_spec {
        spec.validate()?;
    }

    let n_chunks = n_pulses.div_ceil(CHUNK_SIZE);
    let (tallies, hists) = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let pulses = CHUNK_SIZE.min(n_pulses - chunk * CHUNK_SIZE);
            run_chunk(params, attack, pulses, seed, chunk, histogram_spec)
        })
        .reduce(
            || (Tallies::default(), histogram_spec.map(HistogramPair::new)),
            |(t1, h1), (t2, h2)| {
                let hists = match (h1, h2) {
                    (Some(a), Some(b)) => Some(a.merge(b)),
                    (a, b) => a.or(b),
                };
                (t1.merge(t2), hists)
            },
        );

    Ok((SessionStats::from_tallies(tallies), hists))
}

fn run_chunk(
    params: &ProtocolParams,
    attack: &AttackConfig,
    pulses: u64,
    seed: u64,
    chunk: u64,
    histogram_spec: Option<&HistogramSpec>,
) -> (Tallies, Option<HistogramPair>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);

    let eta = params.total_transmittance();
    let mut tallies = Tallies::default();
    let mut hists = histogram_spec.map(HistogramPair::new);

    for _ in 0..pulses {
        let alice = CoherentSignal::new(params.mu_a, rng.random_range(0..4));
        let bob_basis: u8 = rng.random_range(0..2);
        let bob_phase = f64::from(bob_basis) * std::f64::consts::FRAC_PI_2;

        let x = match attack.strategy {
            AttackStrategy::NoAttack => {
                sample_homodyne(&alice, eta * alice.intensity, bob_phase, &mut rng)
            }
            AttackStrategy::Spda => {
                let resent = eve_spda_trial(&alice, &attack.detector, attack.mu_e, &mut rng);
                sample_homodyne(&resent, resent.intensity, bob_phase, &mut rng)
            }
            AttackStrategy::Sma => {
                let resent = eve_sma_trial(&alice, attack.mu_e, &mut rng);
                sample_homodyne(&resent, resent.intensity, bob_phase, &mut rng)
            }
        };

        tallies.n_sent += 1;
        let correct_basis = bob_basis == alice.encoding_basis();

        if let Some(pair) = hists.as_mut() {
            // Mirror bit-1 pulses so all states pool into the bit-0 frame.
            let folded = if alice.bit() == 0 { x } else { -x };
            if correct_basis {
                pair.correct.record(folded);
            } else {
                pair.wrong.record(folded);
            }
        }

        if !correct_basis {
            continue;
        }
        tallies.n_sifted += 1;

        let bob_bit = if x > params.x0 {
            Some(0u8)
        } else if x < -params.x0 {
            Some(1u8)
        } else {
            None
        };
        if let Some(bit) = bob_bit {
            tallies.n_conclusive += 1;
            if bit != alice.bit() {
                tallies.n_errors += 1;
            }
        }
    }

    (tallies, hists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{ber_absence, spda_mixture, sma_mixture};
    use approx::assert_abs_diff_eq;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn homodyne_same_seed_same_sample() {
        let s = CoherentSignal::new(1.3, 1);
        let a = sample_homodyne(&s, 0.8, 0.0, &mut rng(42));
        let b = sample_homodyne(&s, 0.8, 0.0, &mut rng(42));
        assert_eq!(a, b);
    }

    #[test]
    fn homodyne_vacuum_mean() {
        let mut r = rng(1);
        let vac = CoherentSignal::vacuum();
        let n = 1_000_000;
        let mean: f64 =
            (0..n).map(|_| sample_homodyne(&vac, 0.0, 0.3, &mut r)).sum::<f64>() / n as f64;
        // 4 sigma/sqrt(N) with sigma = 1/2
        assert!(mean.abs() < 4.0 * 0.5 / 1000.0, "vacuum mean {mean}");
    }

    #[test]
    fn homodyne_displaced_mean() {
        let mut r = rng(2);
        let s = CoherentSignal::new(1.0, 0);
        let n = 1_000_000;
        let mean: f64 =
            (0..n).map(|_| sample_homodyne(&s, 1.0, 0.0, &mut r)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 4.0 * 0.5 / 1000.0, "mean {mean}");
    }

    fn spda_frequencies(alice: CoherentSignal, n: u64, seed: u64) -> [f64; 5] {
        let mut r = rng(seed);
        let det = EveDetector::perfect();
        let mut counts = [0u64; 5];
        for _ in 0..n {
            let resent = eve_spda_trial(&alice, &det, 3.0, &mut r);
            let idx = if resent.is_vacuum() { 4 } else { resent.phase_index as usize };
            counts[idx] += 1;
        }
        // order: |a>, |ia>, |-a>, |-ia>, vac -> reorder to mixture layout
        let f = |i: usize| counts[i] as f64 / n as f64;
        [f(0), f(2), f(1), f(3), f(4)]
    }

    #[test]
    fn spda_trial_matches_mixture() {
        let n = 10_000_000;
        let freq = spda_frequencies(CoherentSignal::new(1.0, 0), n, 7);
        let mix = spda_mixture(1.0, &EveDetector::perfect());
        let expect = [mix.p_plus, mix.p_minus, mix.p_plus_i, mix.p_minus_i, mix.p_vac];
        for (f, e) in freq.iter().zip(expect) {
            let sigma = (e * (1.0 - e) / n as f64).sqrt();
            assert!((f - e).abs() <= 3.0 * sigma + 1e-9, "freq {f} vs {e} (sigma {sigma:.2e})");
        }
    }

    #[test]
    fn spda_trial_phase_rotation_swaps_components() {
        let n = 1_000_000;
        let plus = spda_frequencies(CoherentSignal::new(1.0, 0), n, 8);
        let minus = spda_frequencies(CoherentSignal::new(1.0, 2), n, 9);
        // |-a>: the roles of |a_e> and |-a_e> swap, orthogonal stays split.
        let sigma = 3.0 * (0.5 / (n as f64).sqrt());
        assert!((plus[0] - minus[1]).abs() < sigma);
        assert!((plus[1] - minus[0]).abs() < sigma);
        assert!((plus[4] - minus[4]).abs() < sigma);
    }

    #[test]
    fn spda_trial_blind_detector_always_vacuum() {
        let mut r = rng(3);
        let det = EveDetector::new(0.0, 1e-15).unwrap();
        let alice = CoherentSignal::new(1.0, 0);
        for _ in 0..10_000 {
            assert!(eve_spda_trial(&alice, &det, 3.0, &mut r).is_vacuum());
        }
    }

    #[test]
    fn sma_trial_matches_mixture() {
        let n = 10_000_000;
        let mut r = rng(11);
        let alice = CoherentSignal::new(1.0, 0);
        let mut counts = [0u64; 4];
        for _ in 0..n {
            let resent = eve_sma_trial(&alice, 3.0, &mut r);
            counts[resent.phase_index as usize] += 1;
        }
        let mix = sma_mixture(1.0).unwrap();
        let expect = [mix.p_plus, mix.p_plus_i, mix.p_minus, mix.p_minus_i];
        for (c, e) in counts.iter().zip(expect) {
            let f = *c as f64 / n as f64;
            let sigma = (e * (1.0 - e) / n as f64).sqrt();
            assert!((f - e).abs() <= 3.0 * sigma, "freq {f} vs {e}");
        }
    }

    #[test]
    fn sma_trial_symmetric_for_vacuum_signal() {
        let n = 1_000_000;
        let mut r = rng(12);
        let alice = CoherentSignal::new(0.0, 0);
        let mut counts = [0u64; 4];
        for _ in 0..n {
            counts[eve_sma_trial(&alice, 1.0, &mut r).phase_index as usize] += 1;
        }
        let sigma = (0.25 * 0.75 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() <= 3.0 * sigma);
        }
    }

    #[test]
    fn sma_resend_rule_is_exhaustive_and_consistent() {
        let mut r = rng(13);
        for _ in 0..100_000 {
            let x1: f64 = r.random::<f64>() * 8.0 - 4.0;
            let x2: f64 = r.random::<f64>() * 8.0 - 4.0;
            let k = sma_resend_phase(x1, x2);
            match k {
                0 => assert!(x1 >= x2.abs()),
                1 => assert!(x2 > x1.abs()),
                2 => assert!(-x1 >= x2.abs()),
                3 => assert!(-x2 > x1.abs()),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn session_zero_pulses() {
        let params = ProtocolParams::new(1.0, 1.0, 30.0).unwrap();
        let (stats, hists) =
            simulate_session(&params, &AttackConfig::none(), 0, 0, None).unwrap();
        assert_eq!(stats, SessionStats::default());
        assert!(stats.ber_estimate.is_none());
        assert!(hists.is_none());
    }

    #[test]
    fn session_is_deterministic() {
        let params = ProtocolParams::new(1.0, 1.0, 30.0).unwrap();
        let attack = AttackConfig::spda(3.0, EveDetector::perfect());
        let spec = HistogramSpec::default();
        let a = simulate_session(&params, &attack, 300_000, 7, Some(&spec)).unwrap();
        let b = simulate_session(&params, &attack, 300_000, 7, Some(&spec)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn session_independent_of_thread_count() {
        let params = ProtocolParams::new(1.0, 0.8, 20.0).unwrap();
        let attack = AttackConfig::sma(2.0);
        let spec = HistogramSpec::default();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate_session(&params, &attack, 260_000, 5, Some(&spec)).unwrap());
        let multi = simulate_session(&params, &attack, 260_000, 5, Some(&spec)).unwrap();
        assert_eq!(single.0, multi.0);
        assert_eq!(single.1, multi.1);
    }

    #[test]
    fn session_sift_rate_near_half() {
        let params = ProtocolParams::new(1.0, 1.0, 30.0).unwrap();
        let n = 1_000_000u64;
        let (stats, _) = simulate_session(&params, &AttackConfig::none(), n, 3, None).unwrap();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((stats.sift_rate().unwrap() - 0.5).abs() <= 3.0 * sigma);
    }

    #[test]
    fn session_matches_analytic_ber_no_attack() {
        let params = ProtocolParams::new(1.0, 1.12, 30.0).unwrap();
        let n = 1_000_000u64;
        let (stats, _) = simulate_session(&params, &AttackConfig::none(), n, 101, None).unwrap();
        let expect = ber_absence(&params).unwrap();
        let nc = stats.n_conclusive as f64;
        let sigma = (expect.ber * (1.0 - expect.ber) / nc).sqrt();
        let got = stats.ber_estimate.unwrap();
        assert!(
            (got - expect.ber).abs() <= 3.0 * sigma,
            "MC ber {got} vs analytic {} (sigma {sigma:.2e})",
            expect.ber
        );
    }

    #[test]
    fn session_counts_are_ordered() {
        let params = ProtocolParams::new(0.5, 0.7, 10.0).unwrap();
        let (stats, _) = simulate_session(
            &params,
            &AttackConfig::spda(1.0, EveDetector::new(1e-3, 0.4).unwrap()),
            200_000,
            17,
            None,
        )
        .unwrap();
        assert!(stats.n_errors <= stats.n_conclusive);
        assert!(stats.n_conclusive <= stats.n_sifted);
        assert!(stats.n_sifted <= stats.n_sent);
        assert_eq!(stats.n_sent, 200_000);
        assert_abs_diff_eq!(
            stats.ber_estimate.unwrap(),
            stats.n_errors as f64 / stats.n_conclusive as f64
        );
    }

    #[test]
    fn histogram_totals_and_edges() {
        let params = ProtocolParams::new(1.0, 1.0, 30.0).unwrap();
        let spec = HistogramSpec { half_range: 6.0, bins: 120 };
        let (stats, hists) =
            simulate_session(&params, &AttackConfig::none(), 150_000, 23, Some(&spec)).unwrap();
        let pair = hists.unwrap();
        for hist in [&pair.correct, &pair.wrong] {
            assert_eq!(hist.counts.iter().sum::<u64>(), hist.total);
            assert!(hist.bin_edges.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(hist.bins(), 120);
        }
        // Everything lands in range at these intensities.
        assert_eq!(pair.correct.total + pair.wrong.total, stats.n_sent);
        assert_eq!(pair.correct.total, stats.n_sifted);
    }

    #[test]
    fn histogram_rejects_bad_spec() {
        let params = ProtocolParams::new(1.0, 1.0, 30.0).unwrap();
        let bad = HistogramSpec { half_range: 0.0, bins: 10 };
        assert!(simulate_session(&params, &AttackConfig::none(), 10, 0, Some(&bad)).is_err());
    }
}
