//! Bidder-side equilibrium maps for the k-level descending price auction.
//!
//! In the symmetric equilibrium a buyer with value v stops at the round j
//! whose interval [tau_j, tau_{j-1}) contains v. The maps here convert a
//! price ladder into its equilibrium stopping thresholds and back by zeroing
//! the indifference condition at every interior threshold, and audit solved
//! profiles against closed-form round utilities.

use crate::combin::{binom_pmf, ln_factorial_table};
use crate::dist::{DistError, ValueDistribution};

/// Errors from equilibrium constructions.
#[derive(Debug, thiserror::Error)]
pub enum EquilibriumError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("a single buyer cannot support {0} strictly decreasing prices")]
    DegenerateCompetition(usize),
    #[error("shooting failed to bracket the terminal condition: {0}")]
    NoBracket(String),
    #[error("prices are not minimal: thresholds {0} and {1} collide")]
    NonMinimal(usize, usize),
    #[error(transparent)]
    Dist(#[from] DistError),
}

fn invalid<S: Into<String>>(msg: S) -> EquilibriumError {
    EquilibriumError::Invalid(msg.into())
}

/// A strictly decreasing positive price ladder for n buyers and m units.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSchedule {
    prices: Vec<f64>,
    n: usize,
    m: usize,
}

impl PriceSchedule {
    pub fn new(prices: Vec<f64>, n: usize, m: usize) -> Result<Self, EquilibriumError> {
        if prices.is_empty() {
            return Err(invalid("price ladder must be non-empty"));
        }
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(invalid("prices must be finite and positive"));
        }
        if prices.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(invalid("prices must be strictly decreasing"));
        }
        if n < 1 || m < 1 || m > n {
            return Err(invalid(format!("need 1 <= m <= n, got n={n} m={m}")));
        }
        Ok(Self { prices, n, m })
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.prices.len()
    }
}

/// A price ladder together with its equilibrium stopping thresholds and
/// their quantiles beta_j = G(tau_j).
#[derive(Debug, Clone)]
pub struct EquilibriumProfile {
    thresholds: Vec<f64>,
    prices: PriceSchedule,
    quantiles: Vec<f64>,
}

impl EquilibriumProfile {
    /// Packs thresholds with a price ladder, computing quantiles from G.
    /// Shape and ordering invariants are checked; indifference is not (that
    /// is `best_response_audit`'s job), so perturbed profiles can be built.
    pub fn assemble(g: &ValueDistribution, thresholds: Vec<f64>, prices: PriceSchedule) -> Result<Self, EquilibriumError> {
        if thresholds.len() != prices.k() {
            return Err(invalid("thresholds and prices must have equal length"));
        }
        if thresholds.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(invalid("thresholds must be finite and positive"));
        }
        if thresholds.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(invalid("thresholds must be strictly decreasing"));
        }
        let last = *thresholds.last().expect("non-empty");
        let p_last = prices.prices()[prices.k() - 1];
        if (last - p_last).abs() > 1e-8 {
            return Err(invalid(format!("final threshold {last} must equal final price {p_last}")));
        }
        if thresholds.iter().zip(prices.prices()).any(|(t, p)| t - p < -1e-9) {
            return Err(invalid("every threshold must sit at or above its price"));
        }
        let quantiles = thresholds.iter().map(|&t| g.cdf(t)).collect();
        Ok(Self { thresholds, prices, quantiles })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn prices(&self) -> &PriceSchedule {
        &self.prices
    }

    /// beta_j = G(tau_j) for j = 1..k; beta_0 = 1 is implicit.
    pub fn quantiles(&self) -> &[f64] {
        &self.quantiles
    }

    pub fn k(&self) -> usize {
        self.thresholds.len()
    }
}

/// S(a, b) = sum_{i=0}^{n-1} a^i b^{n-1-i}; the geometric-sum form stays
/// finite at a = b where the ratio form (a^n - b^n)/(a - b) degenerates.
pub(crate) fn geom_sum(n: usize, a: f64, b: f64) -> f64 {
    // Horner in a: S = b^{n-1} + a (b^{n-2} + a (... + a)).
    let mut s = 1.0;
    let mut bp = 1.0;
    for _ in 1..n {
        bp *= b;
        s = s * a + bp;
    }
    s
}

/// Round-j win factor for the m-unit auction: the double sum over r buyers
/// gone in earlier rounds and l rivals tying in round j, each tie won with
/// probability min((m-r)/(l+1), 1). For m=1 this collapses to S(.,.)/n.
fn win_factor(table: &[f64], n: usize, m: usize, beta_prev: f64, beta_j: f64) -> f64 {
    let x = if beta_prev > 0.0 { (beta_j / beta_prev).clamp(0.0, 1.0) } else { 1.0 };
    let mut w = 0.0;
    for r in 0..m.min(n) {
        let outer = binom_pmf(table, n - 1, r, 1.0 - beta_prev);
        if outer <= 0.0 {
            continue;
        }
        let rem = n - 1 - r;
        let mut inner = 0.0;
        for l in 0..=rem {
            inner += binom_pmf(table, rem, l, 1.0 - x) * 1.0f64.min((m - r) as f64 / (l + 1) as f64);
        }
        w += outer * inner;
    }
    w
}

/// LHS - RHS of the interior indifference condition at round j (1-based,
/// 1 <= j <= k-1): S(b_{j-1}, b_j)(tau_j - p_j) - S(b_j, b_{j+1})(tau_j - p_{j+1}).
pub fn indifference_residual(g: &ValueDistribution, n: usize, j: usize, profile: &EquilibriumProfile) -> f64 {
    assert!(j >= 1 && j < profile.k(), "j must be interior");
    let ts = profile.thresholds();
    let ps = profile.prices().prices();
    let beta = |idx: usize| if idx == 0 { 1.0 } else { g.cdf(ts[idx - 1]) };
    geom_sum(n, beta(j - 1), beta(j)) * (ts[j - 1] - ps[j - 1])
        - geom_sum(n, beta(j), beta(j + 1)) * (ts[j - 1] - ps[j])
}

fn validate_thresholds(thresholds: &[f64]) -> Result<(), EquilibriumError> {
    if thresholds.is_empty() {
        return Err(invalid("threshold ladder must be non-empty"));
    }
    if thresholds.iter().any(|t| !t.is_finite() || *t <= 0.0) {
        return Err(invalid("thresholds must be finite and positive"));
    }
    if thresholds.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(invalid("thresholds must be strictly decreasing"));
    }
    Ok(())
}

/// Backward construction of the price ladder supporting a threshold ladder:
/// p_k = tau_k, then p_j = tau_j - (tau_j - p_{j+1}) S(b_j, b_{j+1}) / S(b_{j-1}, b_j).
pub fn thresholds_to_prices(g: &ValueDistribution, n: usize, thresholds: &[f64]) -> Result<PriceSchedule, EquilibriumError> {
    validate_thresholds(thresholds)?;
    let k = thresholds.len();
    if n == 0 {
        return Err(invalid("need at least one buyer"));
    }
    if n == 1 && k >= 2 {
        return Err(EquilibriumError::DegenerateCompetition(k));
    }
    let beta: Vec<f64> = std::iter::once(1.0).chain(thresholds.iter().map(|&t| g.cdf(t))).collect();
    let mut prices = vec![0.0; k];
    prices[k - 1] = thresholds[k - 1];
    for j in (0..k - 1).rev() {
        let ratio = geom_sum(n, beta[j + 1], beta[j + 2]) / geom_sum(n, beta[j], beta[j + 1]);
        prices[j] = thresholds[j] - (thresholds[j] - prices[j + 1]) * ratio;
    }
    PriceSchedule::new(prices, n, 1)
}

/// Backward construction for the m-unit auction using the round win factors:
/// p_k = tau_k, then p_j = tau_j - (tau_j - p_{j+1}) W_{j+1} / W_j.
pub fn thresholds_to_prices_multi(g: &ValueDistribution, n: usize, m: usize, thresholds: &[f64]) -> Result<PriceSchedule, EquilibriumError> {
    validate_thresholds(thresholds)?;
    if n < 2 || m < 1 || m >= n {
        return Err(invalid(format!("need 1 <= m < n with n >= 2, got n={n} m={m}")));
    }
    let k = thresholds.len();
    let table = ln_factorial_table(n);
    let beta: Vec<f64> = std::iter::once(1.0).chain(thresholds.iter().map(|&t| g.cdf(t))).collect();
    let w: Vec<f64> = (0..k).map(|j| win_factor(&table, n, m, beta[j], beta[j + 1])).collect();
    let mut prices = vec![0.0; k];
    prices[k - 1] = thresholds[k - 1];
    for j in (0..k - 1).rev() {
        prices[j] = thresholds[j] - (thresholds[j] - prices[j + 1]) * w[j + 1] / w[j];
    }
    PriceSchedule::new(prices, n, m)
}

/// Outcome of one forward propagation pass in the shooting solver. The
/// failure arms carry the threshold prefix built before the chain broke.
enum Shot {
    /// Chain fell off the bottom (needed beta below 0): guess too low.
    Low(Vec<f64>),
    /// Chain could not rise enough (needed beta above the previous): too high.
    High(Vec<f64>),
    /// Full ladder built: thresholds and their quantiles.
    Done(Vec<f64>, Vec<f64>),
}

/// Inverse map: solves the indifference system for the thresholds supported
/// by a price ladder, by an outer bisection on tau_1 and monotone inner
/// bisections for each subsequent threshold.
pub fn prices_to_thresholds(g: &ValueDistribution, n: usize, prices: &PriceSchedule) -> Result<EquilibriumProfile, EquilibriumError> {
    if n != prices.n() {
        return Err(invalid(format!("n={n} disagrees with the schedule's n={}", prices.n())));
    }
    let ps = prices.prices().to_vec();
    let k = ps.len();
    if k == 1 {
        return EquilibriumProfile::assemble(g, ps.clone(), prices.clone());
    }
    if n == 1 {
        return Err(EquilibriumError::DegenerateCompetition(k));
    }
    // Forward-propagates a tau_1 guess; each step solves the indifference
    // equation for beta_{j+1} in [0, beta_j], where the utility sum S is
    // increasing in beta_{j+1}.
    let propagate = |tau1: f64| -> Shot {
        let mut taus = vec![tau1];
        let mut betas = vec![g.cdf(tau1)];
        for j in 0..k - 1 {
            let (tau_j, beta_j) = (taus[j], betas[j]);
            let beta_prev = if j == 0 { 1.0 } else { betas[j - 1] };
            let lhs = geom_sum(n, beta_prev, beta_j) * (tau_j - ps[j]);
            let gap = tau_j - ps[j + 1];
            let rhs_at = |y: f64| geom_sum(n, beta_j, y) * gap;
            if rhs_at(0.0) > lhs {
                return Shot::Low(taus);
            }
            if rhs_at(beta_j) < lhs {
                return Shot::High(taus);
            }
            let (mut lo, mut hi) = (0.0f64, beta_j);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if rhs_at(mid) < lhs {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-14 {
                    break;
                }
            }
            let beta_next = 0.5 * (lo + hi);
            let tau_next = match g.quantile(beta_next) {
                Ok(t) => t,
                Err(_) => return Shot::Low(taus),
            };
            taus.push(tau_next);
            betas.push(beta_next);
        }
        Shot::Done(taus, betas)
    };
    // Outer bisection: the terminal threshold rises with the tau_1 guess.
    let mut lo = ps[0];
    let mut hi = if g.hi().is_finite() {
        g.hi()
    } else {
        let mut h = ps[0].abs().max(1.0) + ps[0];
        let mut ok = false;
        for _ in 0..200 {
            match propagate(h) {
                Shot::Low(_) => h = ps[0] + 2.0 * (h - ps[0]),
                _ => {
                    ok = true;
                    break;
                }
            }
        }
        if !ok {
            return Err(EquilibriumError::NoBracket("terminal condition stays low for every tau_1 guess".into()));
        }
        h
    };
    // Near-degenerate ladders make the terminal map stiff (its slope scales
    // like one over the smallest price gap), so the bracket may collapse to
    // a float ulp without landing inside the terminal tolerance. Track the
    // closest full chain and the last failure prefix for diagnosis.
    let mut solved: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    let mut last_prefix: Vec<f64> = Vec::new();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match propagate(mid) {
            Shot::Low(prefix) => {
                last_prefix = prefix;
                lo = mid;
            }
            Shot::High(prefix) => {
                last_prefix = prefix;
                hi = mid;
            }
            Shot::Done(taus, betas) => {
                let miss = taus[k - 1] - ps[k - 1];
                if best.as_ref().is_none_or(|(_, _, m)| miss.abs() < m.abs()) {
                    best = Some((taus.clone(), betas.clone(), miss));
                }
                if miss.abs() <= 1e-10 {
                    solved = Some((taus, betas));
                    break;
                }
                if miss < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
    }
    if solved.is_none() {
        if let Some((taus, betas, miss)) = &best {
            if miss.abs() <= 1e-8 {
                solved = Some((taus.clone(), betas.clone()));
            }
        }
    }
    let (mut taus, mut betas) = match solved {
        Some(s) => s,
        None => {
            // The stable part of the evidence is the converged tau_1 side of
            // the chain; a threshold sitting on the next price level means
            // the true solution has two thresholds colliding there.
            let witness = best.as_ref().map(|(t, _, _)| t.as_slice()).unwrap_or(&last_prefix);
            for (j, &tau) in witness.iter().enumerate() {
                if j + 1 < k && tau - ps[j + 1] <= 1e-9 {
                    return Err(EquilibriumError::NonMinimal(j + 1, j + 2));
                }
            }
            return Err(EquilibriumError::NoBracket(format!(
                "no tau_1 in ({}, {}) reaches the terminal price {}",
                ps[0],
                hi,
                ps[k - 1]
            )));
        }
    };
    // Snap the terminal threshold onto p_k (solved to 1e-10 already).
    taus[k - 1] = ps[k - 1];
    betas[k - 1] = g.cdf(ps[k - 1]);
    for j in 0..k - 1 {
        if taus[j] - taus[j + 1] <= 1e-9 {
            return Err(EquilibriumError::NonMinimal(j + 1, j + 2));
        }
    }
    EquilibriumProfile::assemble(g, taus, prices.clone())
}

/// Equilibrium bid: p_j for value in [tau_j, tau_{j-1}) with tau_0 = inf,
/// and 0 below the last threshold.
pub fn bid_of(value: f64, profile: &EquilibriumProfile) -> f64 {
    for (j, &tau) in profile.thresholds().iter().enumerate() {
        if value >= tau {
            return profile.prices().prices()[j];
        }
    }
    0.0
}

/// Closed-form best-response audit of a profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditReport {
    /// Largest (best deviation utility - prescribed utility) over the grid.
    pub max_violation: f64,
    /// Grid value attaining the largest violation.
    pub worst_value: f64,
    /// Largest |U_j(tau_j) - U_{j+1}(tau_j)| over interior thresholds.
    pub max_indifference_gap: f64,
}

/// Audits a profile on a quantile-spaced value grid: at every grid value the
/// prescribed round must maximize the closed-form utility W_j (v - p_j)
/// against all rounds and against not bidding.
pub fn best_response_audit(
    g: &ValueDistribution,
    n: usize,
    m: usize,
    profile: &EquilibriumProfile,
    value_grid: usize,
) -> AuditReport {
    assert!(value_grid >= 1, "value_grid must be positive");
    assert!(n >= 1 && m >= 1 && m <= n, "need 1 <= m <= n");
    let k = profile.k();
    let ts = profile.thresholds();
    let ps = profile.prices().prices();
    let table = ln_factorial_table(n);
    let w: Vec<f64> = (0..k)
        .map(|j| {
            let beta_prev = if j == 0 { 1.0 } else { profile.quantiles()[j - 1] };
            win_factor(&table, n, m, beta_prev, profile.quantiles()[j])
        })
        .collect();
    let utility = |j: usize, v: f64| w[j] * (v - ps[j]);
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst_value = f64::NAN;
    for i in 0..value_grid {
        let q = (i + 1) as f64 / (value_grid + 1) as f64;
        let v = match g.quantile(q) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let prescribed_round = ts.iter().position(|&tau| v >= tau);
        let prescribed = prescribed_round.map_or(0.0, |j| utility(j, v));
        let best = (0..k).map(|j| utility(j, v)).fold(0.0f64, f64::max);
        let violation = best - prescribed;
        if violation > max_violation {
            max_violation = violation;
            worst_value = v;
        }
    }
    let mut max_indifference_gap = 0.0f64;
    for (j, &t) in ts.iter().enumerate().take(k.saturating_sub(1)) {
        let gap = (utility(j, t) - utility(j + 1, t)).abs();
        max_indifference_gap = max_indifference_gap.max(gap);
    }
    AuditReport { max_violation, worst_value, max_indifference_gap }
}
