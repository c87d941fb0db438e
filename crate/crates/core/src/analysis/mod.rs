//! Derived quantities and experiments: crossover thresholds, attainable
//! distance, comparison sweeps between the attacks, and the
//! density-reconstruction countermeasure.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::analytic::{
    ber_absence, ber_presence, integrate, outcome_density_absence, outcome_density_presence,
    sma_mixture, spda_mixture,
};
use crate::error::{Error, Result};
use crate::model::{AttackConfig, AttackStrategy, Basis, EveDetector, ProtocolParams, ResendMixture};
use crate::montecarlo::QuadratureHistogram;

/// Scan step in `x0` used before bisection refinement. Matches the grid of
/// the distance-limit checks.
pub const X0_SCAN_STEP: f64 = 0.01;

/// Bisection tolerance in `x0` for the crossover threshold.
pub const X0_BISECT_TOL: f64 = 1e-4;

/// Bisection tolerance in km for the maximal distance.
pub const DISTANCE_BISECT_TOL_KM: f64 = 0.1;

/// Eve's intensity grid used when her resent pulse is adversarially
/// optimized: `{0.5, 1.0, ..., 6.0}`.
pub fn default_mu_e_grid() -> Vec<f64> {
    (1..=12).map(|i| 0.5 * f64::from(i)).collect()
}

/// An attack strategy with its detector model but without a fixed resent
/// intensity; `mu_e` is supplied per evaluation (typically optimized over a
/// grid).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvePolicy {
    pub strategy: AttackStrategy,
    pub detector: EveDetector,
}

impl EvePolicy {
    pub fn spda(detector: EveDetector) -> Self {
        Self { strategy: AttackStrategy::Spda, detector }
    }

    pub fn sma() -> Self {
        Self { strategy: AttackStrategy::Sma, detector: EveDetector::perfect() }
    }

    /// Resend mixture this policy induces for signal intensity `mu_a`.
    pub fn mixture(&self, mu_a: f64) -> Result<ResendMixture> {
        match self.strategy {
            AttackStrategy::Spda => Ok(spda_mixture(mu_a, &self.detector)),
            AttackStrategy::Sma => sma_mixture(mu_a),
            AttackStrategy::NoAttack => {
                Err(Error::Config("an Eve policy needs an attack strategy".into()))
            }
        }
    }
}

/// Smallest BER Eve can induce at threshold `x0` when she may pick any
/// intensity from `mu_e_grid`.
pub fn min_ber_presence(mix: &ResendMixture, mu_e_grid: &[f64], x0: f64) -> Result<f64> {
    if mu_e_grid.is_empty() {
        return Err(Error::Config("mu_e grid must not be empty".into()));
    }
    let mut best = f64::INFINITY;
    for &mu_e in mu_e_grid {
        best = best.min(ber_presence(mix, mu_e, x0)?.ber);
    }
    Ok(best)
}

/// Crossover threshold `x0*`: the smallest threshold such that for every
/// `x0 >= x0*` in the scanned range the optimized attack BER falls strictly
/// below the inherent BER, making Eve invisible to BER monitoring.
///
/// Returns `Some(x0*)` (refined by bisection to [`X0_BISECT_TOL`] after a
/// [`X0_SCAN_STEP`] grid scan), `Some(lower bound)` when the attack already
/// wins at the bottom of the range, and `None` when it does not win even at
/// the top. Equality counts as detectable.
pub fn crossover_threshold(
    params: &ProtocolParams,
    policy: &EvePolicy,
    mu_e_grid: &[f64],
    x0_range: (f64, f64),
) -> Result<Option<f64>> {
    params.validate()?;
    let (lo, hi) = x0_range;
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::Config(format!("invalid x0 range [{lo}, {hi}]")));
    }
    let mix = policy.mixture(params.mu_a)?;
    let attack_wins = |x0: f64| -> Result<bool> {
        let inherent = ber_absence(&params.with_x0(x0))?.ber;
        Ok(min_ber_presence(&mix, mu_e_grid, x0)? < inherent)
    };

    let steps = ((hi - lo) / X0_SCAN_STEP).ceil() as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| if i == steps { hi } else { lo + i as f64 * X0_SCAN_STEP })
        .collect();
    let mut wins = Vec::with_capacity(grid.len());
    for &x0 in &grid {
        wins.push(attack_wins(x0)?);
    }

    if !*wins.last().expect("grid is non-empty") {
        return Ok(None);
    }
    let Some(last_losing) = wins.iter().rposition(|w| !w) else {
        return Ok(Some(lo));
    };

    let (mut a, mut b) = (grid[last_losing], grid[last_losing + 1]);
    while b - a > X0_BISECT_TOL {
        let mid = 0.5 * (a + b);
        if attack_wins(mid)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(Some(0.5 * (a + b)))
}

/// Inherent BER at the crossover threshold: the best error rate Bob can
/// claim while the attack is still visible in BER monitoring.
pub fn min_inherent_ber(
    params: &ProtocolParams,
    policy: &EvePolicy,
    mu_e_grid: &[f64],
    x0_range: (f64, f64),
) -> Result<f64> {
    let x0 = crossover_threshold(params, policy, mu_e_grid, x0_range)?.ok_or_else(|| {
        Error::Config("no crossover in the scanned range: the attack never dominates".into())
    })?;
    Ok(ber_absence(&params.with_x0(x0))?.ber)
}

/// Largest channel length (bisection to [`DISTANCE_BISECT_TOL_KM`]) at which
/// some threshold in `[0, x0_max]` still exposes the attack, i.e. the
/// inherent BER falls strictly below the optimized attack BER there. Beyond
/// this distance the attack is invisible at every threshold.
pub fn max_distance(
    params: &ProtocolParams,
    policy: &EvePolicy,
    mu_e_grid: &[f64],
    l_range: (f64, f64),
    x0_max: f64,
) -> Result<f64> {
    params.validate()?;
    let (lo, hi) = l_range;
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::Config(format!("invalid distance range [{lo}, {hi}]")));
    }
    if !(x0_max > 0.0) {
        return Err(Error::Config(format!("x0_max must be > 0, got {x0_max}")));
    }

    let mix = policy.mixture(params.mu_a)?;
    // Eve bypasses the channel, so her optimized BER per threshold is
    // distance-independent and can be tabulated once.
    let steps = (x0_max / X0_SCAN_STEP).ceil() as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| if i == steps { x0_max } else { i as f64 * X0_SCAN_STEP })
        .collect();
    let mut eve_best = Vec::with_capacity(grid.len());
    for &x0 in &grid {
        eve_best.push(min_ber_presence(&mix, mu_e_grid, x0)?);
    }

    let detectable = |l: f64| -> Result<bool> {
        let at = params.with_distance(l);
        for (&x0, &eve) in grid.iter().zip(&eve_best) {
            if ber_absence(&at.with_x0(x0))?.ber < eve {
                return Ok(true);
            }
        }
        Ok(false)
    };

    if detectable(hi)? {
        return Ok(hi);
    }
    if !detectable(lo)? {
        return Ok(lo);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > DISTANCE_BISECT_TOL_KM {
        let mid = 0.5 * (a + b);
        if detectable(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// A named column with a unit tag, rendered as `name[unit]` in output files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: String,
    pub unit: String,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, unit: impl Into<String>) -> Self {
        Self { name: name.into(), unit: unit.into() }
    }

    pub fn header(&self) -> String {
        format!("{}[{}]", self.name, self.unit)
    }
}

/// One row of a sweep: the independent value plus one entry per column.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub x: f64,
    pub values: Vec<f64>,
}

/// Materialized sweep data: an independent variable and one column per
/// configured curve, with rows strictly increasing in the independent
/// variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub independent: ColumnSpec,
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn new(independent: ColumnSpec, columns: Vec<ColumnSpec>, rows: Vec<SweepRow>) -> Result<Self> {
        for pair in rows.windows(2) {
            if !(pair[1].x > pair[0].x) {
                return Err(Error::Config(format!(
                    "sweep rows must be strictly increasing in {}: {} then {}",
                    independent.name, pair[0].x, pair[1].x
                )));
            }
        }
        for row in &rows {
            if row.values.len() != columns.len() {
                return Err(Error::Config(format!(
                    "row at {} has {} values for {} columns",
                    row.x,
                    row.values.len(),
                    columns.len()
                )));
            }
            for (col, &v) in columns.iter().zip(&row.values) {
                let ok = match col.unit.as_str() {
                    "prob" => (-1e-12..=1.0 + 1e-12).contains(&v),
                    "density" | "count" => v >= 0.0,
                    _ => v.is_finite(),
                };
                if !ok {
                    return Err(Error::Config(format!(
                        "column {} value {v} out of range for unit {}",
                        col.name, col.unit
                    )));
                }
            }
        }
        Ok(Self { independent, columns, rows })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

fn fmt_tag(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// BER versus threshold for a family of configurations: one column of the
/// inherent BER per distance, one column per attack configuration (whose
/// BER does not depend on the distance).
pub fn sweep_threshold(
    params: &ProtocolParams,
    distances_km: &[f64],
    attacks: &[AttackConfig],
    x0_grid: &[f64],
) -> Result<SweepTable> {
    params.validate()?;
    if x0_grid.is_empty() {
        return Err(Error::Config("x0 grid must not be empty".into()));
    }

    let mut columns = Vec::new();
    for &l in distances_km {
        if !(l >= 0.0) {
            return Err(Error::Domain(format!("distance must be >= 0, got {l}")));
        }
        columns.push(ColumnSpec::new(format!("ber_absence_l{}", fmt_tag(l)), "prob"));
    }
    let mut mixtures = Vec::new();
    for attack in attacks {
        attack.validate()?;
        let tag = match attack.strategy {
            AttackStrategy::Spda => "spda",
            AttackStrategy::Sma => "sma",
            AttackStrategy::NoAttack => {
                return Err(Error::Config("attack columns need an attack strategy".into()))
            }
        };
        let policy = EvePolicy { strategy: attack.strategy, detector: attack.detector };
        mixtures.push(policy.mixture(params.mu_a)?);
        columns.push(ColumnSpec::new(
            format!("ber_{tag}_mue{}", fmt_tag(attack.mu_e)),
            "prob",
        ));
    }

    let mut rows = Vec::with_capacity(x0_grid.len());
    for &x0 in x0_grid {
        let mut values = Vec::with_capacity(columns.len());
        for &l in distances_km {
            values.push(ber_absence(&params.with_x0(x0).with_distance(l))?.ber);
        }
        for (attack, mix) in attacks.iter().zip(&mixtures) {
            values.push(ber_presence(mix, attack.mu_e, x0)?.ber);
        }
        rows.push(SweepRow { x: x0, values });
    }

    SweepTable::new(ColumnSpec::new("x0", "quadrature"), columns, rows)
}

/// The four outcome densities (absence/presence crossed with correct/wrong
/// basis) on a quadrature grid.
pub fn density_curves(
    params: &ProtocolParams,
    attack: &AttackConfig,
    x_grid: &[f64],
) -> Result<SweepTable> {
    params.validate()?;
    attack.validate()?;
    if x_grid.is_empty() {
        return Err(Error::Config("x grid must not be empty".into()));
    }
    let policy = EvePolicy { strategy: attack.strategy, detector: attack.detector };
    let mix = policy.mixture(params.mu_a)?;

    let columns = vec![
        ColumnSpec::new("density_absence_correct", "density"),
        ColumnSpec::new("density_absence_wrong", "density"),
        ColumnSpec::new("density_presence_correct", "density"),
        ColumnSpec::new("density_presence_wrong", "density"),
    ];
    let rows = x_grid
        .iter()
        .map(|&x| SweepRow {
            x,
            values: vec![
                outcome_density_absence(params, Basis::Correct, x),
                outcome_density_absence(params, Basis::Wrong, x),
                outcome_density_presence(&mix, attack.mu_e, Basis::Correct, x),
                outcome_density_presence(&mix, attack.mu_e, Basis::Wrong, x),
            ],
        })
        .collect();

    SweepTable::new(ColumnSpec::new("x", "quadrature"), columns, rows)
}

/// Side-by-side BER of the two attacks at fixed `mu_a` and `mu_e`, with
/// perfect detectors for Eve.
pub fn compare_attacks(mu_a: f64, mu_e: f64, x0_grid: &[f64]) -> Result<SweepTable> {
    if x0_grid.is_empty() {
        return Err(Error::Config("x0 grid must not be empty".into()));
    }
    let spda = spda_mixture(mu_a, &EveDetector::perfect());
    let sma = sma_mixture(mu_a)?;

    let columns = vec![ColumnSpec::new("ber_spda", "prob"), ColumnSpec::new("ber_sma", "prob")];
    let mut rows = Vec::with_capacity(x0_grid.len());
    for &x0 in x0_grid {
        rows.push(SweepRow {
            x: x0,
            values: vec![
                ber_presence(&spda, mu_e, x0)?.ber,
                ber_presence(&sma, mu_e, x0)?.ber,
            ],
        });
    }
    SweepTable::new(ColumnSpec::new("x0", "quadrature"), columns, rows)
}

/// Verdict of the density-reconstruction countermeasure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GofDecision {
    Consistent,
    EavesdropperSuspected,
}

impl std::fmt::Display for GofDecision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GofDecision::Consistent => f.write_str("consistent"),
            GofDecision::EavesdropperSuspected => f.write_str("eavesdropper_suspected"),
        }
    }
}

/// Pearson chi-square comparison of an empirical quadrature histogram
/// against a model density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub decision: GofDecision,
}

/// Upper-tail probability of a chi-squared variable with `dof` degrees of
/// freedom.
pub fn chi_square_survival(statistic: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return Err(Error::Config("chi-square needs at least one degree of freedom".into()));
    }
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| Error::Config(format!("chi-square setup failed: {e}")))?;
    Ok(dist.sf(statistic))
}

/// Pearson chi-square goodness-of-fit test of `hist` against the density
/// `expected`.
///
/// Expected bin masses are integrated numerically, normalized over the
/// histogram's range, and adjacent bins are merged left to right until every
/// merged bin expects at least five counts (a trailing remainder joins the
/// last group). The decision flags an eavesdropper when the p-value falls
/// below `significance`.
pub fn gof_test<F: Fn(f64) -> f64>(
    hist: &QuadratureHistogram,
    expected: F,
    significance: f64,
) -> Result<GofReport> {
    if !(0.0 < significance && significance < 1.0) {
        return Err(Error::Config(format!(
            "significance must be in (0, 1), got {significance}"
        )));
    }
    if hist.total < 1000 {
        return Err(Error::InsufficientData(format!(
            "chi-square test needs at least 1000 samples, histogram holds {}",
            hist.total
        )));
    }

    let bins = hist.bins();
    let mut masses = Vec::with_capacity(bins);
    for i in 0..bins {
        let (a, b) = (hist.bin_edges[i], hist.bin_edges[i + 1]);
        masses.push(integrate(&expected, a, b, 1e-12)?.value.max(0.0));
    }
    let mass_total: f64 = masses.iter().sum();
    if !(mass_total > 0.0) {
        return Err(Error::Config(
            "expected density carries no mass over the histogram range".into(),
        ));
    }

    // Merge adjacent bins until each group expects at least five counts.
    let total = hist.total as f64;
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (mut obs_acc, mut exp_acc) = (0.0, 0.0);
    for (count, mass) in hist.counts.iter().zip(&masses) {
        obs_acc += *count as f64;
        exp_acc += total * mass / mass_total;
        if exp_acc >= 5.0 {
            groups.push((obs_acc, exp_acc));
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
    }
    if exp_acc > 0.0 || obs_acc > 0.0 {
        if let Some(last) = groups.last_mut() {
            last.0 += obs_acc;
            last.1 += exp_acc;
        }
    }
    if groups.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than two populated bins after merging".into(),
        ));
    }

    let statistic: f64 = groups.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = groups.len() - 1;
    let p_value = chi_square_survival(statistic, dof)?;
    let decision = if p_value < significance {
        GofDecision::EavesdropperSuspected
    } else {
        GofDecision::Consistent
    };
    Ok(GofReport { statistic, dof, p_value, decision })
}
