//! Inference on paired binary outcomes: McNemar tests, bootstrap intervals,
//! Holm adjustment, Wilson intervals, Cohen's h and a logistic rating fit.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::factorial::ln_binomial;

use crate::orchestrator::SessionLog;

pub const DEFAULT_RESAMPLES: usize = 10_000;
/// Discordant totals at or below this use the exact test as primary.
pub const EXACT_THRESHOLD: u64 = 25;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("probability {0} outside [0,1]")]
    OutOfRange(f64),
    #[error("need at least {needed} pairs, got {got}")]
    TooFewPairs { needed: usize, got: usize },
    #[error("sample size must be positive")]
    EmptySample,
    #[error("{successes} successes exceed sample size {n}")]
    TooManySuccesses { successes: u64, n: u64 },
    #[error("ledgers cover different problems ({only_a} only in the first, {only_b} only in the second)")]
    ProblemSetMismatch { only_a: usize, only_b: usize },
    #[error("problem {0} appears more than once in a ledger")]
    DuplicateProblem(String),
    #[error("logistic fit did not converge: {0}")]
    NotConverged(String),
    #[error("fitted slope is zero; rating has no effect")]
    FlatSlope,
    #[error("strata length {strata} does not match {pairs} pairs")]
    StrataMismatch { strata: usize, pairs: usize },
}

fn check_prob(p: f64) -> Result<f64, StatsError> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(StatsError::OutOfRange(p))
    }
}

/// Solved/unsolved outcome pairs for two conditions over the same problems.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedOutcomes {
    pub pairs: Vec<(bool, bool)>,
    /// Problems solved by A only.
    pub b_count: u64,
    /// Problems solved by B only.
    pub c_count: u64,
}

impl PairedOutcomes {
    pub fn new(pairs: Vec<(bool, bool)>) -> Self {
        let b_count = pairs.iter().filter(|&&(a, b)| a && !b).count() as u64;
        let c_count = pairs.iter().filter(|&&(a, b)| !a && b).count() as u64;
        Self { pairs, b_count, c_count }
    }

    /// Builds pairs from a fixed number of each outcome pattern.
    pub fn from_counts(both: usize, a_only: usize, b_only: usize, neither: usize) -> Self {
        let mut pairs = Vec::with_capacity(both + a_only + b_only + neither);
        pairs.extend(std::iter::repeat_n((true, true), both));
        pairs.extend(std::iter::repeat_n((true, false), a_only));
        pairs.extend(std::iter::repeat_n((false, true), b_only));
        pairs.extend(std::iter::repeat_n((false, false), neither));
        Self::new(pairs)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn rate_a(&self) -> f64 {
        self.pairs.iter().filter(|p| p.0).count() as f64 / self.len() as f64
    }

    pub fn rate_b(&self) -> f64 {
        self.pairs.iter().filter(|p| p.1).count() as f64 / self.len() as f64
    }

    pub fn difference(&self) -> f64 {
        (self.b_count as f64 - self.c_count as f64) / self.len() as f64
    }
}

/// Aligns two ledgers by problem id. Both must cover exactly the same problems.
/// Returns the pairs and each problem's rating, in problem-id order.
pub fn align_ledgers(a: &[SessionLog], b: &[SessionLog]) -> Result<(PairedOutcomes, Vec<Option<u32>>), StatsError> {
    fn index(logs: &[SessionLog]) -> Result<BTreeMap<&str, &SessionLog>, StatsError> {
        let mut m = BTreeMap::new();
        for l in logs {
            if m.insert(l.problem_id.as_str(), l).is_some() {
                return Err(StatsError::DuplicateProblem(l.problem_id.clone()));
            }
        }
        Ok(m)
    }
    let ia = index(a)?;
    let ib = index(b)?;
    let ka: BTreeSet<&str> = ia.keys().copied().collect();
    let kb: BTreeSet<&str> = ib.keys().copied().collect();
    if ka != kb {
        return Err(StatsError::ProblemSetMismatch {
            only_a: ka.difference(&kb).count(),
            only_b: kb.difference(&ka).count(),
        });
    }
    let mut pairs = Vec::with_capacity(ia.len());
    let mut ratings = Vec::with_capacity(ia.len());
    for (id, la) in &ia {
        let lb = ib[id];
        pairs.push((la.is_solved(), lb.is_solved()));
        ratings.push(la.rating.or(lb.rating));
    }
    Ok((PairedOutcomes::new(pairs), ratings))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimaryTest {
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    pub b: u64,
    pub c: u64,
    pub chi2_cc: f64,
    pub p_exact: f64,
    pub p_asymptotic: f64,
    pub primary: PrimaryTest,
    /// No discordant pairs: the test carries no information.
    pub degenerate: bool,
}

impl McNemarResult {
    pub fn p_value(&self) -> f64 {
        match self.primary {
            PrimaryTest::Exact => self.p_exact,
            PrimaryTest::Asymptotic => self.p_asymptotic,
        }
    }
}

/// P(X <= k) for X ~ Binomial(n, 1/2).
pub fn binomial_half_cdf(k: u64, n: u64) -> f64 {
    if k >= n {
        return 1.0;
    }
    if n <= 125 {
        // exact integer coefficients; C(125, 62) < 2^122
        let mut coef: u128 = 1;
        let mut sum: u128 = 0;
        for i in 0..=k {
            sum += coef;
            coef = coef * u128::from(n - i) / u128::from(i + 1);
        }
        return sum as f64 / 2f64.powi(n as i32);
    }
    let ln_half_n = n as f64 * std::f64::consts::LN_2;
    let terms: Vec<f64> = (0..=k).map(|i| ln_binomial(n, i) - ln_half_n).collect();
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()).exp().min(1.0)
}

/// Two-sided exact p-value for `b` successes among `b + c` fair trials.
pub fn mcnemar_exact(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let lower = binomial_half_cdf(b, n);
    // P(X >= b) = P(X <= n - b) by symmetry, which avoids cancellation
    let upper = binomial_half_cdf(n - b, n);
    (2.0 * lower.min(upper)).min(1.0)
}

pub fn mcnemar(pairs: &PairedOutcomes) -> McNemarResult {
    mcnemar_counts(pairs.b_count, pairs.c_count)
}

pub fn mcnemar_counts(b: u64, c: u64) -> McNemarResult {
    let n = b + c;
    let chi2_cc = if n == 0 {
        0.0
    } else {
        let d = (b as f64 - c as f64).abs() - 1.0;
        d * d / n as f64
    };
    let p_asymptotic = if n == 0 {
        1.0
    } else {
        ChiSquared::new(1.0).expect("one degree of freedom").sf(chi2_cc).clamp(0.0, 1.0)
    };
    McNemarResult {
        b,
        c,
        chi2_cc,
        p_exact: mcnemar_exact(b, c),
        p_asymptotic,
        primary: if n <= EXACT_THRESHOLD {
            PrimaryTest::Exact
        } else {
            PrimaryTest::Asymptotic
        },
        degenerate: n == 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Linear-interpolation percentile of sorted data, `q` in [0,1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn contribution(p: (bool, bool)) -> i64 {
    i64::from(p.0) - i64::from(p.1)
}

/// Percentile bootstrap interval for rate(A) - rate(B), resampling whole
/// problem pairs with replacement.
pub fn bootstrap_ci_diff(pairs: &PairedOutcomes, resamples: usize, seed: u64) -> Result<Interval, StatsError> {
    let n = pairs.len();
    if n < 2 {
        return Err(StatsError::TooFewPairs { needed: 2, got: n });
    }
    let d: Vec<i64> = pairs.pairs.iter().map(|&p| contribution(p)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats: Vec<f64> = (0..resamples.max(1))
        .map(|_| {
            let s: i64 = (0..n).map(|_| d[rng.random_range(0..n)]).sum();
            s as f64 / n as f64
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    Ok(Interval {
        lower: percentile(&stats, 0.025),
        upper: percentile(&stats, 0.975),
    })
}

/// Like [`bootstrap_ci_diff`] but resampling within each stratum (for
/// example, rating) so stratum sizes are preserved.
pub fn bootstrap_ci_diff_stratified(
    pairs: &PairedOutcomes,
    strata: &[u32],
    resamples: usize,
    seed: u64,
) -> Result<Interval, StatsError> {
    let n = pairs.len();
    if n < 2 {
        return Err(StatsError::TooFewPairs { needed: 2, got: n });
    }
    if strata.len() != n {
        return Err(StatsError::StrataMismatch {
            strata: strata.len(),
            pairs: n,
        });
    }
    let mut groups: BTreeMap<u32, Vec<i64>> = BTreeMap::new();
    for (&s, &p) in strata.iter().zip(&pairs.pairs) {
        groups.entry(s).or_default().push(contribution(p));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats: Vec<f64> = (0..resamples.max(1))
        .map(|_| {
            let s: i64 = groups
                .values()
                .map(|g| (0..g.len()).map(|_| g[rng.random_range(0..g.len())]).sum::<i64>())
                .sum();
            s as f64 / n as f64
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    Ok(Interval {
        lower: percentile(&stats, 0.025),
        upper: percentile(&stats, 0.975),
    })
}

/// Holm step-down adjusted p-values, returned in input order.
pub fn holm_bonferroni(pvalues: &[f64]) -> Result<Vec<f64>, StatsError> {
    for &p in pvalues {
        check_prob(p)?;
    }
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
    let mut out = vec![0.0; m];
    let mut running: f64 = 0.0;
    for (i, &idx) in order.iter().enumerate() {
        let adj = ((m - i) as f64 * pvalues[idx]).min(1.0);
        running = running.max(adj);
        out[idx] = running;
    }
    Ok(out)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> Result<Interval, StatsError> {
    if n == 0 {
        return Err(StatsError::EmptySample);
    }
    if successes > n {
        return Err(StatsError::TooManySuccesses { successes, n });
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lower = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let upper = if successes == n { 1.0 } else { (center + half).min(1.0) };
    Ok(Interval { lower, upper })
}

/// Arcsine-transformed difference between two proportions.
pub fn cohens_h(p1: f64, p2: f64) -> Result<f64, StatsError> {
    let t = |p: f64| 2.0 * p.sqrt().asin();
    Ok(t(check_prob(p1)?) - t(check_prob(p2)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectSize {
    Negligible,
    Small,
    Medium,
    Large,
}

impl EffectSize {
    pub fn label(self) -> &'static str {
        match self {
            EffectSize::Negligible => "Negligible",
            EffectSize::Small => "Small",
            EffectSize::Medium => "Medium",
            EffectSize::Large => "Large",
        }
    }
}

pub fn classify_h(h: f64) -> EffectSize {
    let a = h.abs();
    if a < 0.2 {
        EffectSize::Negligible
    } else if a < 0.5 {
        EffectSize::Small
    } else if a < 0.8 {
        EffectSize::Medium
    } else {
        EffectSize::Large
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub beta0: f64,
    pub beta1: f64,
    pub converged: bool,
    pub iterations: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl LogisticFit {
    fn failed(diagnostic: impl Into<String>, iterations: u32) -> Self {
        Self {
            beta0: f64::NAN,
            beta1: f64::NAN,
            converged: false,
            iterations,
            diagnostic: Some(diagnostic.into()),
        }
    }

    /// Modelled probability of solving a problem at `rating`.
    pub fn predict(&self, rating: f64) -> f64 {
        sigmoid(self.beta0 + self.beta1 * rating)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

const IRLS_TOLERANCE: f64 = 1e-10;
const IRLS_MAX_ITER: u32 = 100;

/// Maximum-likelihood logistic regression of solve outcome on rating, by
/// Newton / IRLS on standardized ratings. Separation and non-convergence
/// yield `converged: false` with a diagnostic instead of coefficients.
pub fn fit_logistic_rating(samples: &[(u32, bool)]) -> LogisticFit {
    let distinct: BTreeSet<u32> = samples.iter().map(|s| s.0).collect();
    if distinct.len() < 2 {
        return LogisticFit::failed("need at least two distinct ratings", 0);
    }
    let successes = samples.iter().filter(|s| s.1).count();
    if successes == 0 || successes == samples.len() {
        return LogisticFit::failed("complete separation: every outcome is identical", 0);
    }
    let max_fail = samples.iter().filter(|s| !s.1).map(|s| s.0).max();
    let min_fail = samples.iter().filter(|s| !s.1).map(|s| s.0).min();
    let max_ok = samples.iter().filter(|s| s.1).map(|s| s.0).max();
    let min_ok = samples.iter().filter(|s| s.1).map(|s| s.0).min();
    if max_ok < min_fail || max_fail < min_ok {
        return LogisticFit::failed("complete separation: a rating threshold splits the outcomes", 0);
    }

    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| f64::from(s.0)).sum::<f64>() / n;
    let sd = (samples.iter().map(|s| (f64::from(s.0) - mean).powi(2)).sum::<f64>() / n).sqrt();
    let xs: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(r, y)| ((f64::from(r) - mean) / sd, if y { 1.0 } else { 0.0 }))
        .collect();

    let (mut b0, mut b1) = (0.0f64, 0.0f64);
    for iter in 1..=IRLS_MAX_ITER {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(x, y) in &xs {
            let p = sigmoid(b0 + b1 * x);
            let w = p * (1.0 - p);
            g0 += y - p;
            g1 += (y - p) * x;
            h00 += w;
            h01 += w * x;
            h11 += w * x * x;
        }
        if g0.abs().max(g1.abs()) / n < IRLS_TOLERANCE {
            return LogisticFit {
                beta0: b0 - b1 * mean / sd,
                beta1: b1 / sd,
                converged: true,
                iterations: iter - 1,
                diagnostic: None,
            };
        }
        let det = h00 * h11 - h01 * h01;
        if !det.is_finite() || det.abs() < 1e-300 {
            return LogisticFit::failed("singular information matrix (quasi-separation)", iter);
        }
        b0 += (h11 * g0 - h01 * g1) / det;
        b1 += (h00 * g1 - h01 * g0) / det;
        if !(b0.is_finite() && b1.is_finite()) || b1.abs() > 1e3 {
            return LogisticFit::failed("coefficients diverged (quasi-separation)", iter);
        }
    }
    LogisticFit::failed(format!("no convergence within {IRLS_MAX_ITER} iterations"), IRLS_MAX_ITER)
}

/// Rating at which the fitted model predicts a `target` solve probability.
pub fn estimated_rating(fit: &LogisticFit, target: f64) -> Result<f64, StatsError> {
    if !fit.converged {
        return Err(StatsError::NotConverged(
            fit.diagnostic.clone().unwrap_or_else(|| "unknown".into()),
        ));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(StatsError::OutOfRange(target));
    }
    if fit.beta1 == 0.0 {
        return Err(StatsError::FlatSlope);
    }
    Ok((logit(target) - fit.beta0) / fit.beta1)
}

/// One line of a comparison family: rates, difference, raw and adjusted
/// McNemar p, bootstrap interval and effect size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub n: usize,
    pub rate_a: f64,
    pub rate_b: f64,
    pub difference: f64,
    pub mcnemar: McNemarResult,
    pub p_holm: f64,
    pub ci: Interval,
    pub cohens_h: f64,
    pub effect: EffectSize,
    pub significant: bool,
}

/// Runs the full battery on each comparison and Holm-adjusts across the family.
pub fn compare_family(
    comparisons: &[(String, PairedOutcomes)],
    resamples: usize,
    seed: u64,
    alpha: f64,
) -> Result<Vec<ComparisonRow>, StatsError> {
    let tests: Vec<McNemarResult> = comparisons.iter().map(|(_, p)| mcnemar(p)).collect();
    let raw: Vec<f64> = tests.iter().map(McNemarResult::p_value).collect();
    let adjusted = holm_bonferroni(&raw)?;
    comparisons
        .iter()
        .zip(tests)
        .zip(adjusted)
        .map(|(((label, pairs), test), p_holm)| {
            let h = cohens_h(pairs.rate_a(), pairs.rate_b())?;
            Ok(ComparisonRow {
                label: label.clone(),
                n: pairs.len(),
                rate_a: pairs.rate_a(),
                rate_b: pairs.rate_b(),
                difference: pairs.difference(),
                ci: bootstrap_ci_diff(pairs, resamples, seed)?,
                mcnemar: test,
                p_holm,
                cohens_h: h,
                effect: classify_h(h),
                significant: p_holm < alpha,
            })
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Two-sided tail by enumerating every outcome of `n` fair coin flips.
    pub(crate) fn brute_force_exact(b: u64, c: u64) -> f64 {
        let n = b + c;
        if n == 0 {
            return 1.0;
        }
        let total = 1u64 << n;
        let (mut le, mut ge) = (0u64, 0u64);
        for mask in 0..total {
            let k = u64::from((mask as u32).count_ones());
            if k <= b {
                le += 1;
            }
            if k >= b {
                ge += 1;
            }
        }
        (2.0 * le.min(ge) as f64 / total as f64).min(1.0)
    }

    #[test]
    fn mcnemar_examples() {
        let r = mcnemar_counts(9, 1);
        assert!((r.p_exact - 22.0 / 1024.0).abs() < 1e-15);
        assert_eq!(r.primary, PrimaryTest::Exact);
        assert_eq!(mcnemar_counts(5, 5).p_exact, 1.0);
        assert!((mcnemar_counts(12, 4).chi2_cc - 3.0625).abs() < 1e-12);
        let d = mcnemar_counts(0, 0);
        assert!(d.degenerate);
        assert_eq!((d.p_exact, d.chi2_cc), (1.0, 0.0));
        assert_eq!(mcnemar_counts(20, 10).primary, PrimaryTest::Asymptotic);
    }

    #[test]
    fn asymptotic_matches_normal_tail() {
        // chi-square(1) survival at z^2 equals the two-sided normal tail at z
        let r = mcnemar_counts(12, 4);
        let z: f64 = r.chi2_cc.sqrt();
        let two_sided = statrs::function::erf::erfc(z / std::f64::consts::SQRT_2);
        assert!((r.p_asymptotic - two_sided).abs() < 1e-9, "{} vs {two_sided}", r.p_asymptotic);
    }

    #[test]
    fn exact_matches_enumeration() {
        for n in 0..=16u64 {
            for b in 0..=n {
                let c = n - b;
                assert!((mcnemar_exact(b, c) - brute_force_exact(b, c)).abs() < 1e-12, "b={b} c={c}");
            }
        }
    }

    #[test]
    fn large_n_switches_to_log_space() {
        // symmetric split is always p = 1
        assert!((mcnemar_exact(100, 100) - 1.0).abs() < 1e-12);
        // continuity across the switch point
        let a = binomial_half_cdf(60, 125);
        let b = binomial_half_cdf(60, 126);
        assert!(a > b && (a - b) < 0.05);
        let p = mcnemar_exact(90, 110);
        assert!(p > 0.1 && p < 0.25, "{p}");
    }

    #[test]
    fn holm_examples() {
        assert_eq!(holm_bonferroni(&[0.01, 0.04, 0.03]).unwrap(), vec![0.03, 0.06, 0.06]);
        assert_eq!(holm_bonferroni(&[0.2]).unwrap(), vec![0.2]);
        assert_eq!(holm_bonferroni(&[0.5, 0.6]).unwrap(), vec![1.0, 1.0]);
        assert!(holm_bonferroni(&[1.2]).is_err());
        assert!(holm_bonferroni(&[f64::NAN]).is_err());
        assert!(holm_bonferroni(&[]).unwrap().is_empty());
    }

    #[test]
    fn wilson_examples() {
        let w = wilson_interval(50, 100, 1.96).unwrap();
        assert!((w.lower - 0.4038).abs() < 1e-3 && (w.upper - 0.5962).abs() < 1e-3);
        let w = wilson_interval(10, 10, 1.96).unwrap();
        assert_eq!(w.upper, 1.0);
        assert!((w.lower - 0.7225).abs() < 1e-3);
        assert_eq!(wilson_interval(0, 10, 1.96).unwrap().lower, 0.0);
        assert!(wilson_interval(1, 0, 1.96).is_err());
        assert!(wilson_interval(11, 10, 1.96).is_err());
        let big = wilson_interval(3_000_000, 10_000_000, 1.96).unwrap();
        assert!(big.upper - big.lower < 1e-3);
    }

    #[test]
    fn effect_sizes() {
        // 2 asin(sqrt .41) - 2 asin(sqrt .205) = 1.389810 - 0.939737
        assert!((cohens_h(0.41, 0.205).unwrap() - 0.450072).abs() < 1e-6);
        assert_eq!(cohens_h(0.3, 0.3).unwrap(), 0.0);
        assert!((cohens_h(1.0, 0.0).unwrap() - std::f64::consts::PI).abs() < 1e-12);
        assert!(cohens_h(1.5, 0.2).is_err());
        assert_eq!(classify_h(0.68), EffectSize::Medium);
        assert_eq!(classify_h(0.45), EffectSize::Small);
        assert_eq!(classify_h(0.05), EffectSize::Negligible);
        assert_eq!(classify_h(-0.9), EffectSize::Large);
        assert_eq!(classify_h(0.2), EffectSize::Small);
    }

    #[test]
    fn bootstrap_degenerate_cases() {
        let all_a = PairedOutcomes::from_counts(0, 10, 0, 0);
        let ci = bootstrap_ci_diff(&all_a, 1000, 1).unwrap();
        assert_eq!((ci.lower, ci.upper), (1.0, 1.0));
        let same = PairedOutcomes::from_counts(6, 0, 0, 4);
        let ci = bootstrap_ci_diff(&same, 1000, 1).unwrap();
        assert_eq!((ci.lower, ci.upper), (0.0, 0.0));
        assert!(bootstrap_ci_diff(&PairedOutcomes::from_counts(1, 0, 0, 0), 10, 1).is_err());
    }

    #[test]
    fn bootstrap_is_seeded() {
        let p = PairedOutcomes::from_counts(11, 8, 3, 25);
        assert!((p.difference() - 5.0 / 47.0).abs() < 1e-12);
        let a = bootstrap_ci_diff(&p, DEFAULT_RESAMPLES, 42).unwrap();
        let b = bootstrap_ci_diff(&p, DEFAULT_RESAMPLES, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.contains(p.difference()));
    }

    #[test]
    fn stratified_bootstrap_keeps_strata() {
        let p = PairedOutcomes::from_counts(10, 6, 2, 12);
        let strata: Vec<u32> = (0..30).map(|i| 1200 + 100 * (i % 3)).collect();
        let ci = bootstrap_ci_diff_stratified(&p, &strata, 2000, 7).unwrap();
        assert!(ci.contains(p.difference()));
        assert_eq!(ci, bootstrap_ci_diff_stratified(&p, &strata, 2000, 7).unwrap());
        assert!(bootstrap_ci_diff_stratified(&p, &strata[1..], 10, 7).is_err());
    }

    #[test]
    fn logistic_degenerate_inputs() {
        let all: Vec<(u32, bool)> = (0..20).map(|i| (1200 + 100 * (i % 5), true)).collect();
        let f = fit_logistic_rating(&all);
        assert!(!f.converged);
        assert!(f.diagnostic.unwrap().contains("separation"));
        let split: Vec<(u32, bool)> = (0..20).map(|i| (1200 + 100 * (i % 5), i % 5 < 2)).collect();
        assert!(!fit_logistic_rating(&split).converged);
        let flat: Vec<(u32, bool)> = (0..400).map(|i| (1200 + 100 * (i % 4), (i / 4) % 2 == 0)).collect();
        let f = fit_logistic_rating(&flat);
        assert!(f.converged);
        assert!(f.beta1.abs() < 1e-9, "{}", f.beta1);
        assert!(estimated_rating(&LogisticFit::failed("x", 0), 0.4).is_err());
    }

    #[test]
    fn rating_inversion() {
        let beta1 = -0.004;
        let beta0 = logit(0.4) - beta1 * 1350.0;
        let fit = LogisticFit {
            beta0,
            beta1,
            converged: true,
            iterations: 0,
            diagnostic: None,
        };
        assert!((estimated_rating(&fit, 0.4).unwrap() - 1350.0).abs() < 1e-6);
        assert!((estimated_rating(&fit, 0.5).unwrap() + beta0 / beta1).abs() < 1e-9);
        let flat = LogisticFit { beta1: 0.0, ..fit };
        assert_eq!(estimated_rating(&flat, 0.4), Err(StatsError::FlatSlope));
    }

    #[test]
    fn family_adjusts_across_comparisons() {
        let comps: Vec<(String, PairedOutcomes)> = (0..6)
            .map(|i| (format!("c{i}"), PairedOutcomes::from_counts(10, 9 - i, 1 + i, 20)))
            .collect();
        let rows = compare_family(&comps, 500, 1, 0.05).unwrap();
        assert_eq!(rows.len(), 6);
        for r in &rows {
            assert!(r.p_holm >= r.mcnemar.p_value());
        }
        let identical = compare_family(&[("same".into(), PairedOutcomes::from_counts(5, 0, 0, 5))], 100, 1, 0.05).unwrap();
        assert_eq!(identical[0].cohens_h, 0.0);
        assert_eq!(identical[0].mcnemar.p_exact, 1.0);
    }

    proptest! {
        #[test]
        fn holm_properties(ps in proptest::collection::vec(0.0f64..=1.0, 1..12)) {
            let adj = holm_bonferroni(&ps).unwrap();
            let mut order: Vec<usize> = (0..ps.len()).collect();
            order.sort_by(|&a, &b| ps[a].total_cmp(&ps[b]));
            for i in 0..ps.len() {
                prop_assert!(adj[i] >= ps[i] && adj[i] <= 1.0);
            }
            for w in order.windows(2) {
                prop_assert!(adj[w[0]] <= adj[w[1]]);
            }
        }

        #[test]
        fn wilson_contains_estimate(n in 1u64..500, frac in 0.0f64..=1.0, z in 0.5f64..3.5) {
            let s = ((n as f64) * frac).round() as u64;
            let w = wilson_interval(s, n, z).unwrap();
            let p = s as f64 / n as f64;
            prop_assert!(w.lower <= p + 1e-12 && p <= w.upper + 1e-12);
            prop_assert!(0.0 <= w.lower && w.upper <= 1.0);
        }

        #[test]
        fn cohens_h_antisymmetric_and_monotone(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0, bump in 0.001f64..0.5) {
            prop_assert!((cohens_h(p1, p2).unwrap() + cohens_h(p2, p1).unwrap()).abs() < 1e-12);
            let higher = (p1 + bump).min(1.0);
            if higher > p1 {
                prop_assert!(cohens_h(higher, p2).unwrap() > cohens_h(p1, p2).unwrap());
            }
        }

        #[test]
        fn exact_p_symmetric_and_bounded(b in 0u64..200, c in 0u64..200) {
            let p = mcnemar_exact(b, c);
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!((p - mcnemar_exact(c, b)).abs() < 1e-12);
        }
    }
}
