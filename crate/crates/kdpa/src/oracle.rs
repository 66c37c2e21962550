//! Brute-force ground truth on small finite instances.
//!
//! Both enumerators walk every value profile of a finite-support law and
//! weight it by its product probability, so their outputs are exact up to
//! float rounding. Tie-break expectations are computed combinatorially, not
//! sampled, keeping the oracle deterministic. `deviation_check_mc` is the
//! simulation-level twin of `best_response_audit`: it pins one buyer's value
//! and measures every unilateral round deviation with common random numbers.

use rayon::prelude::*;

use crate::dist::ValueDistribution;
use crate::equilibrium::EquilibriumProfile;
use crate::mc::trial_rng;
use crate::prophet::ThresholdPolicy;

/// Profiles per enumeration chunk; fixed so the summation order is stable.
const ENUM_CHUNK: u64 = 4096;

/// Hard cap on enumerated profiles, keeping the oracle suite fast.
const ENUM_CAP: u64 = 10_000_000;

/// Errors from oracle evaluations.
#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("invalid discrete distribution: {0}")]
    Invalid(String),
    #[error("enumeration of {atoms}^{n} profiles exceeds the 10^7 cap")]
    TooLarge { atoms: usize, n: usize },
    #[error("threshold {0} sits exactly on an atom; place thresholds between atoms")]
    ThresholdOnAtom(f64),
}

/// A finite-support law given by (value, probability) atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, OracleError> {
        if atoms.is_empty() {
            return Err(OracleError::Invalid("need at least one atom".into()));
        }
        if atoms.iter().any(|(v, p)| !v.is_finite() || !p.is_finite() || *p < 0.0) {
            return Err(OracleError::Invalid("atoms must be finite with nonnegative probability".into()));
        }
        if atoms.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(OracleError::Invalid("atom values must be strictly increasing".into()));
        }
        let total: f64 = atoms.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(OracleError::Invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }
}

fn profile_count(atoms: usize, n: usize) -> Result<u64, OracleError> {
    let too_large = OracleError::TooLarge { atoms, n };
    let count = u32::try_from(n)
        .ok()
        .and_then(|n| (atoms as u64).checked_pow(n))
        .ok_or(too_large)?;
    if count > ENUM_CAP {
        return Err(OracleError::TooLarge { atoms, n });
    }
    Ok(count)
}

/// Enumerates all profiles, applying `contribution` to each decoded value
/// vector, and sums probability-weighted results in a fixed chunk order.
fn enumerate_profiles<F>(d: &DiscreteDistribution, n: usize, contribution: F) -> Result<f64, OracleError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let atoms = d.atoms();
    let count = profile_count(atoms.len(), n)?;
    let chunks = count.div_ceil(ENUM_CHUNK);
    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * ENUM_CHUNK;
            let hi = (lo + ENUM_CHUNK).min(count);
            let mut values = vec![0.0; n];
            let mut total = 0.0;
            for idx in lo..hi {
                let mut rest = idx;
                let mut prob = 1.0;
                for slot in values.iter_mut() {
                    let digit = (rest % atoms.len() as u64) as usize;
                    rest /= atoms.len() as u64;
                    *slot = atoms[digit].0;
                    prob *= atoms[digit].1;
                }
                if prob > 0.0 {
                    total += prob * contribution(&values);
                }
            }
            total
        })
        .collect();
    Ok(partials.iter().sum())
}

/// Exact expected total collected by the threshold policy under uniform
/// tie-breaking, by full enumeration. When a round's passers exceed the
/// remaining capacity c, each of the l passers is kept with probability c/l,
/// so the round contributes c times the passer mean and the game ends.
pub fn exact_alg_enumeration(
    d: &DiscreteDistribution,
    n: usize,
    m: usize,
    policy: &ThresholdPolicy,
) -> Result<f64, OracleError> {
    assert!(n >= 1 && m >= 1, "need n >= 1 and m >= 1");
    for &tau in policy.thresholds() {
        if d.atoms().iter().any(|&(v, _)| v == tau) {
            return Err(OracleError::ThresholdOnAtom(tau));
        }
    }
    let taus = policy.thresholds().to_vec();
    enumerate_profiles(d, n, move |values| {
        let mut remaining = m;
        let mut collected = 0.0;
        let mut floor = f64::INFINITY;
        for &tau in &taus {
            let mut passers = 0usize;
            let mut sum = 0.0;
            for &v in values {
                if v >= tau && v < floor {
                    passers += 1;
                    sum += v;
                }
            }
            floor = tau;
            if passers == 0 {
                continue;
            }
            if passers <= remaining {
                collected += sum;
                remaining -= passers;
                if remaining == 0 {
                    break;
                }
            } else {
                collected += remaining as f64 * sum / passers as f64;
                break;
            }
        }
        collected
    })
}

/// Exact expected sum of the top m positive values, by full enumeration.
pub fn exact_opt_enumeration(d: &DiscreteDistribution, n: usize, m: usize) -> Result<f64, OracleError> {
    assert!(n >= 1 && m >= 1, "need n >= 1 and m >= 1");
    enumerate_profiles(d, n, move |values| {
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite values"));
        sorted.iter().take(m).filter(|v| **v > 0.0).sum()
    })
}

/// Simulation-level best-response check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationReport {
    /// Max over (value, round) of estimated deviation gain minus 3 standard
    /// errors; a profile passes when this is <= 0.
    pub max_gain_lcb: f64,
    /// Grid value attaining the max.
    pub worst_value: f64,
    /// 1-based round of that deviation; None means "do not bid".
    pub worst_round: Option<usize>,
}

/// Pins one buyer's value at each of `deviations` quantile-spaced grid
/// points, plays every candidate round (and no-bid) against n-1 equilibrium
/// opponents with common random numbers, and reports the most favorable
/// deviation gain lower bound.
pub fn deviation_check_mc(
    g: &ValueDistribution,
    n: usize,
    m: usize,
    profile: &EquilibriumProfile,
    deviations: usize,
    trials: u64,
    seed: u64,
) -> DeviationReport {
    assert!(trials >= 10_000, "need at least 10^4 trials");
    assert!(deviations >= 1, "need at least one grid value");
    assert!(n >= 1 && m >= 1 && m <= n, "need 1 <= m <= n");
    let k = profile.k();
    let taus = profile.thresholds();
    let prices = profile.prices().prices();
    let grid: Vec<f64> = (0..deviations)
        .filter_map(|i| g.quantile((i + 1) as f64 / (deviations + 1) as f64).ok())
        .collect();
    // prescribed[i]: 1-based stopping round of grid value i, 0 for no-bid.
    let prescribed: Vec<usize> = grid
        .iter()
        .map(|&v| taus.iter().position(|&tau| v >= tau).map_or(0, |j| j + 1))
        .collect();
    let actions = k + 1;
    let cells = grid.len() * actions;
    let chunks = trials.div_ceil(8192);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * 8192;
            let hi = (lo + 8192).min(trials);
            let mut sum = vec![0.0; cells];
            let mut sumsq = vec![0.0; cells];
            let mut counts = vec![0usize; k + 1];
            let mut utility = vec![0.0; actions];
            for t in lo..hi {
                let mut rng = trial_rng(seed, t);
                counts.fill(0);
                for _ in 1..n {
                    let v = g.sample(&mut rng);
                    let round = taus.iter().position(|&tau| v >= tau).map_or(0, |j| j + 1);
                    counts[round] += 1;
                }
                // utility[a] for stopping at round a (index 0 = no-bid),
                // as a function of the pinned value filled in below.
                for (i, &v) in grid.iter().enumerate() {
                    utility[0] = 0.0;
                    let mut capacity = m as isize;
                    for a in 1..=k {
                        let room = capacity.max(0) as f64;
                        let rivals = counts[a] as f64;
                        let win = if room == 0.0 { 0.0 } else { 1.0f64.min(room / (rivals + 1.0)) };
                        utility[a] = win * (v - prices[a - 1]);
                        capacity -= counts[a] as isize;
                    }
                    let base = utility[prescribed[i]];
                    for (a, &u) in utility.iter().enumerate() {
                        let gain = u - base;
                        let cell = i * actions + a;
                        sum[cell] += gain;
                        sumsq[cell] += gain * gain;
                    }
                }
            }
            (sum, sumsq)
        })
        .collect();
    let mut sum = vec![0.0; cells];
    let mut sumsq = vec![0.0; cells];
    for (s, s2) in partials {
        for i in 0..cells {
            sum[i] += s[i];
            sumsq[i] += s2[i];
        }
    }
    let t = trials as f64;
    let mut report = DeviationReport { max_gain_lcb: f64::NEG_INFINITY, worst_value: f64::NAN, worst_round: None };
    for (i, &v) in grid.iter().enumerate() {
        for a in 0..actions {
            if a == prescribed[i] {
                continue;
            }
            let cell = i * actions + a;
            let mean = sum[cell] / t;
            let var = ((sumsq[cell] / t - mean * mean).max(0.0)) * t / (t - 1.0);
            let lcb = mean - 3.0 * (var / t).sqrt();
            if lcb > report.max_gain_lcb {
                report = DeviationReport {
                    max_gain_lcb: lcb,
                    worst_value: v,
                    worst_round: (a > 0).then_some(a),
                };
            }
        }
    }
    report
}
