//! Batched prophet inequality engine.
//!
//! A decision-maker observes n i.i.d. rewards, announces k decreasing
//! thresholds, and in round r collects uniformly at random among the rewards
//! clearing threshold r, up to a capacity of m units in total. This module
//! provides the threshold ladders, their exact and Monte Carlo evaluation,
//! the competitive-ratio polynomials, the offline benchmarks, and a Bellman
//! solver for optimal single-item ladders.

use rand::Rng;

use crate::combin::{binom_pmf, expected_min_binomial, ln_factorial_table};
use crate::dist::{conditional_mean, DistError, RewardDistribution};
use crate::mc::{parallel_trials, McEstimate};
use crate::quad::{adaptive_simpson, QUAD_TOL, TAIL_EPS};

/// Errors from prophet-side computations.
#[derive(Debug, thiserror::Error)]
pub enum ProphetError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Dist(#[from] DistError),
}

fn domain<S: Into<String>>(msg: S) -> ProphetError {
    ProphetError::Domain(msg.into())
}

/// A strictly decreasing threshold ladder; the last threshold is never
/// negative (negative rewards can always be rejected).
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPolicy {
    thresholds: Vec<f64>,
}

impl ThresholdPolicy {
    /// Validates strict decrease and a nonnegative final threshold; an empty
    /// ladder is allowed and accepts nothing.
    pub fn new(thresholds: Vec<f64>) -> Result<Self, ProphetError> {
        if thresholds.iter().any(|t| !t.is_finite() && *t != f64::INFINITY) {
            return Err(domain("thresholds must be finite or +inf"));
        }
        if thresholds.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(domain("thresholds must be strictly decreasing"));
        }
        if let Some(&last) = thresholds.last() {
            if last < 0.0 {
                return Err(domain("the final threshold must be nonnegative"));
            }
        }
        Ok(Self { thresholds })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Number of rounds k.
    pub fn k(&self) -> usize {
        self.thresholds.len()
    }
}

/// An n-reward, m-unit instance over a reward law F.
#[derive(Debug, Clone)]
pub struct ProphetInstance {
    reward_dist: RewardDistribution,
    n: usize,
    m: usize,
    min_n_for_asymptotics: usize,
}

impl ProphetInstance {
    pub fn new(reward_dist: RewardDistribution, n: usize, m: usize) -> Result<Self, ProphetError> {
        if n < 1 || m < 1 || m > n {
            return Err(domain(format!("need 1 <= m <= n, got n={n} m={m}")));
        }
        Ok(Self { reward_dist, n, m, min_n_for_asymptotics: 0 })
    }

    /// Configuration-only stand-in for the asymptotic-regime cutoff.
    pub fn with_min_n_for_asymptotics(mut self, min_n: usize) -> Self {
        self.min_n_for_asymptotics = min_n;
        self
    }

    pub fn reward_dist(&self) -> &RewardDistribution {
        &self.reward_dist
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn min_n_for_asymptotics(&self) -> usize {
        self.min_n_for_asymptotics
    }
}

/// What one round of a simulated policy run collected.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    /// 1-based round index.
    pub round: usize,
    /// Rewards collected this round, each at or above the round's threshold.
    pub collected: Vec<f64>,
    /// True on the stage where capacity filled or the last round ended.
    pub game_over: bool,
}

/// Output of the Bellman solver.
#[derive(Debug, Clone)]
pub struct DpSolution {
    /// Optimal expected reward from the top state, Psi(k, hi).
    pub value: f64,
    /// Greedy-optimal ladder read off the argmax choices.
    pub thresholds: ThresholdPolicy,
    pub grid_size: usize,
    /// Largest conditional-mean spread of any grid cell; an honest slack
    /// term for discretization comparisons.
    pub grid_error: f64,
}

/// P_n(x) = sum_{i=0}^{n-1} C(n-1,i) x^{n-1-i} (1-x)^i / (i+1), evaluated by
/// the stable closed form (1 - x^n) / (n (1 - x)).
pub fn p_polynomial(n: usize, x: f64) -> Result<f64, ProphetError> {
    if n < 1 {
        return Err(domain("n must be at least 1"));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("x={x} outside [0,1]")));
    }
    let u = 1.0 - x;
    if u == 0.0 {
        return Ok(1.0);
    }
    let nf = n as f64;
    // 1 - x^n = -expm1(n ln x) with ln x = ln1p(-u), stable for x near 1.
    Ok(-(nf * (-u).ln_1p()).exp_m1() / (nf * u))
}

/// The selection polynomials (A, B):
/// A(n,m,x) = E[min(K, m)] / m for K ~ Binomial(n, 1-x), and
/// B(n,m,x) = sum_i C(n-1,i) x^{n-1-i} (1-x)^i min(1, m/(i+1)).
pub fn selection_polynomials(n: usize, m: usize, x: f64) -> Result<(f64, f64), ProphetError> {
    if n < 1 || m < 1 {
        return Err(domain("need n >= 1 and m >= 1"));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("x={x} outside [0,1]")));
    }
    let p = 1.0 - x;
    let a = expected_min_binomial(n, p, m) / m as f64;
    let table = ln_factorial_table(n - 1);
    let mut b = 0.0;
    for i in 0..n {
        b += binom_pmf(&table, n - 1, i, p) * 1.0f64.min(m as f64 / (i + 1) as f64);
    }
    Ok((a, b))
}

/// Single-item guarantee of the k-level balanced ladder: 1 - e^{-k}.
pub fn guarantee_single(k: usize) -> f64 {
    -(-(k as f64)).exp_m1()
}

/// m-unit guarantee of the k-level balanced ladder (asymptotic form):
/// (1 - e^{-m} m^m / m!) + sum_{r=1}^{k-1} sum_{i=0}^{m-1}
/// (m^i r^i / i!) e^{-mr} (1 - e^{-(m-i)} (m-i)^{m-i} / (m-i)!).
pub fn guarantee_multi(k: usize, m: usize) -> f64 {
    assert!(k >= 1 && m >= 1, "need k >= 1 and m >= 1");
    let table = ln_factorial_table(m);
    // gap(s) = 1 - e^{-s} s^s / s!
    let gap = |s: usize| -> f64 {
        let sf = s as f64;
        1.0 - (sf * sf.ln() - sf - table[s]).exp()
    };
    let mut total = gap(m);
    for r in 1..k {
        let mrf = (m * r) as f64;
        for (i, &ln_fact) in table.iter().enumerate().take(m) {
            let ln_coeff = if i == 0 { 0.0 } else { i as f64 * mrf.ln() - ln_fact };
            total += (ln_coeff - mrf).exp() * gap(m - i);
        }
    }
    total
}

/// Balanced single-item ladder tau_j = F^{-1}(e^{-j/n}), j = 1..k.
pub fn balanced_thresholds_single(f: &RewardDistribution, n: usize, k: usize) -> Result<ThresholdPolicy, ProphetError> {
    if n < 1 || k < 1 {
        return Err(domain("need n >= 1 and k >= 1"));
    }
    let mut ts = Vec::with_capacity(k);
    for j in 1..=k {
        ts.push(f.quantile((-(j as f64) / n as f64).exp())?);
    }
    ThresholdPolicy::new(ts)
}

/// Balanced m-unit ladder tau_r = F^{-1}((1 - m/n)^r), r = 1..k; needs m < n.
pub fn balanced_thresholds_multi(f: &RewardDistribution, n: usize, m: usize, k: usize) -> Result<ThresholdPolicy, ProphetError> {
    if n < 1 || k < 1 || m < 1 || m >= n {
        return Err(domain(format!("need 1 <= m < n and k >= 1, got n={n} m={m} k={k}")));
    }
    let x = 1.0 - m as f64 / n as f64;
    let mut ts = Vec::with_capacity(k);
    for r in 1..=k {
        ts.push(f.quantile(x.powi(r as i32))?);
    }
    ThresholdPolicy::new(ts)
}

/// S+(tau) = sum_{i=1}^m E[(V_(i) - tau)^+] = int_tau^inf E[min(N_z, m)] dz
/// with N_z ~ Binomial(n, 1 - F(z)).
pub fn splus(f: &RewardDistribution, n: usize, m: usize, tau: f64) -> Result<f64, ProphetError> {
    if n < 1 || m < 1 || m > n {
        return Err(domain(format!("need 1 <= m <= n, got n={n} m={m}")));
    }
    let cap = if f.hi().is_finite() { f.hi() } else { f.quantile(1.0 - TAIL_EPS)? };
    if tau >= cap {
        return Ok(0.0);
    }
    Ok(adaptive_simpson(&|z| expected_min_binomial(n, 1.0 - f.cdf(z), m), tau, cap, QUAD_TOL))
}

/// Offline benchmark OPT_m = E[sum of the top m positive rewards],
/// the positive-part anchor of `splus`.
pub fn opt_offline(f: &RewardDistribution, n: usize, m: usize) -> Result<f64, ProphetError> {
    splus(f, n, m, 0.0)
}

/// Exact single-item ladder value:
/// sum_j (F(tau_{j-1})^n - F(tau_j)^n) E[V | V in [tau_j, tau_{j-1})]
/// with tau_0 = hi; terms whose interval mass is below 1e-12 are dropped.
pub fn exact_alg_single(f: &RewardDistribution, n: usize, policy: &ThresholdPolicy) -> Result<f64, ProphetError> {
    if n < 1 {
        return Err(domain("n must be at least 1"));
    }
    let mut total = 0.0;
    let mut q_hi = 1.0f64;
    let mut upper = f.hi();
    for &tau in policy.thresholds() {
        let q_lo = f.cdf(tau).clamp(0.0, 1.0);
        let top_mass = q_hi.powi(n as i32) - q_lo.powi(n as i32);
        if q_hi - q_lo > 1e-12 && top_mass > 1e-12 {
            total += top_mass * conditional_mean(f, tau, upper)?;
        }
        q_hi = q_lo;
        upper = tau;
    }
    Ok(total)
}

/// One simulated run: draws all n rewards up front, then replays rounds,
/// collecting uniformly at random among passers up to remaining capacity.
pub fn simulate_policy<R: Rng + ?Sized>(inst: &ProphetInstance, policy: &ThresholdPolicy, rng: &mut R) -> Vec<StageOutcome> {
    let mut pool: Vec<f64> = (0..inst.n).map(|_| inst.reward_dist.sample(rng)).collect();
    let k = policy.k();
    let mut stages = Vec::new();
    let mut taken = 0usize;
    for (r, &tau) in policy.thresholds().iter().enumerate() {
        // Partition passers to the front of the pool.
        let mut passers = 0usize;
        for i in 0..pool.len() {
            if pool[i] >= tau {
                pool.swap(passers, i);
                passers += 1;
            }
        }
        let count = passers.min(inst.m - taken);
        // Uniform random count-subset via partial Fisher-Yates.
        let mut collected = Vec::with_capacity(count);
        for t in 0..count {
            let j = rng.gen_range(t..passers);
            pool.swap(t, j);
            collected.push(pool[t]);
        }
        pool.drain(0..count);
        taken += count;
        let game_over = taken == inst.m || r + 1 == k;
        stages.push(StageOutcome { round: r + 1, collected, game_over });
        if taken == inst.m {
            break;
        }
    }
    stages
}

/// Seeded Monte Carlo estimate of the policy's expected total reward.
pub fn expected_reward_mc(inst: &ProphetInstance, policy: &ThresholdPolicy, trials: u64, seed: u64) -> McEstimate {
    let [est] = parallel_trials(trials, seed, |rng| {
        let total: f64 = simulate_policy(inst, policy, rng)
            .iter()
            .flat_map(|s| s.collected.iter())
            .sum();
        [total]
    });
    est
}

/// Closed-form lower bound on the m-unit ladder value:
/// sum_r sum_{i=0}^{m-1} C(n,i)(1-F(tau_{r-1}))^i F(tau_{r-1})^{n-i}
/// (m tau_r A(n-i, m-i, x_r) + S+(tau_r) B(n-i, m-i, x_r))
/// with x_r = F(tau_r)/F(tau_{r-1}) and tau_0 = +inf.
pub fn alg_lower_bound_multi(inst: &ProphetInstance, policy: &ThresholdPolicy) -> f64 {
    let f = inst.reward_dist();
    let (n, m) = (inst.n, inst.m);
    let table = ln_factorial_table(n);
    let mut total = 0.0;
    let mut q_prev = 1.0f64;
    for &tau in policy.thresholds() {
        let q_tau = f.cdf(tau).clamp(0.0, 1.0);
        let x = if q_prev > 0.0 { (q_tau / q_prev).clamp(0.0, 1.0) } else { 1.0 };
        let sp = splus(f, n, m, tau).expect("instance invariants keep splus in domain");
        for i in 0..m {
            let w = binom_pmf(&table, n, i, 1.0 - q_prev);
            if w <= 0.0 {
                continue;
            }
            let (a, b) = selection_polynomials(n - i, m - i, x).expect("0 <= i < m <= n keeps (n-i, m-i) in domain");
            total += w * (m as f64 * tau * a + sp * b);
        }
        q_prev = q_tau;
    }
    total
}

/// Bellman solver for the optimal single-item k-ladder on a quantile grid.
///
/// Psi(t, theta) = max over theta' <= theta of (F(theta')/F(theta))^n
/// Psi(t-1, theta') plus (1 - (F(theta')/F(theta))^n) E[V | V in [theta',
/// theta)), with Psi(0, .) = 0; one golden-section refinement per cell
/// sharpens the argmax between its neighboring grid points.
pub fn dp_solve(f: &RewardDistribution, n: usize, k: usize, grid: usize) -> Result<DpSolution, ProphetError> {
    if n < 1 {
        return Err(domain("n must be at least 1"));
    }
    if grid < 16 {
        return Err(domain("grid must be at least 16"));
    }
    if k == 0 {
        return Ok(DpSolution { value: 0.0, thresholds: ThresholdPolicy::new(Vec::new())?, grid_size: grid, grid_error: 0.0 });
    }
    // Mass below the zero-reward floor is never accepted, so the grid starts
    // at quantile F(0) when the support dips negative.
    let q_floor = if f.lo() < 0.0 { f.cdf(0.0) } else { 0.0 };
    if 1.0 - q_floor <= 1e-12 {
        return Err(domain("no mass on nonnegative rewards"));
    }
    let g = grid;
    let step = (1.0 - q_floor) / g as f64;
    let mut qs = Vec::with_capacity(g + 1);
    let mut thetas = Vec::with_capacity(g + 1);
    for i in 0..=g {
        let q = if i == g { 1.0 } else { q_floor + step * i as f64 };
        let theta = if i == g {
            if f.hi().is_finite() { f.hi() } else { f.quantile(1.0 - TAIL_EPS)? }
        } else {
            f.quantile(q)?.max(0.0)
        };
        qs.push(q);
        thetas.push(theta);
    }
    // Cumulative partial moments cum[i] = int_{theta_0}^{theta_i} v dF,
    // CDF-only via integration by parts.
    let mut cum = vec![0.0f64; g + 1];
    let mut grid_error = 0.0f64;
    for i in 0..g {
        let (a, b) = (thetas[i], thetas[i + 1]);
        let int_f = adaptive_simpson(&|x| f.cdf(x), a, b, QUAD_TOL);
        let mu = (b * qs[i + 1] - a * qs[i] - int_f).max(0.0);
        cum[i + 1] = cum[i] + mu;
        let spread = if i == g - 1 && !f.hi().is_finite() {
            // Unbounded top cell: spread of means anchored at its lower edge.
            mu / (qs[i + 1] - qs[i]) - a
        } else {
            b - a
        };
        grid_error = grid_error.max(spread);
    }
    let ln_qs: Vec<f64> = qs.iter().map(|&q| if q > 0.0 { q.ln() } else { f64::NEG_INFINITY }).collect();
    let nf = n as f64;
    let cell_of = |q: f64| (((q - q_floor) / step) as usize).min(g - 1);
    let lerp = |arr: &[f64], q: f64| {
        let i = cell_of(q);
        let t = ((q - qs[i]) / step).clamp(0.0, 1.0);
        arr[i] + t * (arr[i + 1] - arr[i])
    };

    let mut psi_prev = vec![0.0f64; g + 1];
    let mut psi_cur = vec![0.0f64; g + 1];
    let mut choice_idx = vec![vec![0usize; g + 1]; k + 1];
    let mut choice_theta = vec![vec![0.0f64; g + 1]; k + 1];
    for t in 1..=k {
        choice_theta[t][0] = thetas[0];
        for j in 1..=g {
            let ratio_pow = |ln_qi: f64| -> f64 {
                if qs[j] <= 0.0 {
                    1.0
                } else if ln_qi == f64::NEG_INFINITY {
                    0.0
                } else {
                    (nf * (ln_qi - ln_qs[j])).exp()
                }
            };
            let mut best = psi_prev[j];
            let mut best_i = j;
            for i in 0..j {
                let r = ratio_pow(ln_qs[i]);
                let val = r * psi_prev[i] + (1.0 - r) * (cum[j] - cum[i]) / (qs[j] - qs[i]);
                if val > best {
                    best = val;
                    best_i = i;
                }
            }
            // Golden-section refinement between the argmax's neighbors, with
            // Psi and the partial moments interpolated linearly in q.
            let objective = |q: f64| -> f64 {
                if qs[j] - q < 1e-15 {
                    return psi_prev[j];
                }
                let r = if q <= 0.0 { 0.0 } else { ratio_pow(q.ln()) };
                r * lerp(&psi_prev, q) + (1.0 - r) * (cum[j] - lerp(&cum, q)) / (qs[j] - q)
            };
            let (mut a, mut b) = (qs[best_i.saturating_sub(1)], qs[(best_i + 1).min(j)]);
            let gr = 0.5 * (5.0f64.sqrt() - 1.0);
            let (mut c, mut d) = (b - gr * (b - a), a + gr * (b - a));
            let (mut fc, mut fd) = (objective(c), objective(d));
            for _ in 0..60 {
                if fc >= fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - gr * (b - a);
                    fc = objective(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + gr * (b - a);
                    fd = objective(d);
                }
                if b - a < 1e-14 {
                    break;
                }
            }
            let q_star = 0.5 * (a + b);
            let refined = objective(q_star);
            if refined > best {
                best = refined;
                choice_theta[t][j] = f.quantile(q_star)?.max(0.0);
            } else {
                choice_theta[t][j] = thetas[best_i];
            }
            psi_cur[j] = best;
            choice_idx[t][j] = best_i;
        }
        std::mem::swap(&mut psi_prev, &mut psi_cur);
    }
    let mut ladder = Vec::with_capacity(k);
    let mut j = g;
    for t in (1..=k).rev() {
        ladder.push(choice_theta[t][j]);
        j = choice_idx[t][j];
    }
    Ok(DpSolution {
        value: psi_prev[g].max(0.0),
        thresholds: ThresholdPolicy::new(ladder)?,
        grid_size: g,
        grid_error,
    })
}
