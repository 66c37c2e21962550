//! k-level descending price auction: price designers, simulator, benchmarks.
//!
//! `revenue_prices` builds the revenue ladder by placing balanced thresholds
//! on the quantile range above the Myerson reserve and supporting them with
//! equilibrium prices; `welfare_prices` does the same on the full quantile
//! range. `simulate_kdpa` runs the auction against equilibrium bidders, and
//! the Myerson / max-welfare benchmarks give the deterministic quadrature
//! targets that Monte Carlo outcomes are measured against.

use rand::Rng;

use crate::dist::{DistError, ValueDistribution, VirtualValueTransform};
use crate::equilibrium::{geom_sum, EquilibriumError, EquilibriumProfile, PriceSchedule};
use crate::mc::{parallel_trials, McEstimate};
use crate::prophet::{opt_offline, ProphetError};

/// Errors from auction constructions.
#[derive(Debug, thiserror::Error)]
pub enum AuctionError {
    #[error("invalid auction instance: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Prophet(#[from] ProphetError),
}

fn invalid<S: Into<String>>(msg: S) -> AuctionError {
    AuctionError::Invalid(msg.into())
}

/// An auction environment: value law G, n buyers, m units, k price levels.
#[derive(Debug, Clone)]
pub struct AuctionInstance {
    values_dist: ValueDistribution,
    n: usize,
    m: usize,
    k: usize,
    transform: VirtualValueTransform,
}

impl AuctionInstance {
    pub fn new(values_dist: ValueDistribution, n: usize, m: usize, k: usize) -> Result<Self, AuctionError> {
        if n < 2 {
            return Err(invalid("need at least two buyers"));
        }
        if m < 1 || m > n {
            return Err(invalid(format!("need 1 <= m <= n, got n={n} m={m}")));
        }
        if k < 1 {
            return Err(invalid("need at least one price level"));
        }
        let transform = VirtualValueTransform::new_unchecked(values_dist.clone());
        Ok(Self { values_dist, n, m, k, transform })
    }

    pub fn values_dist(&self) -> &ValueDistribution {
        &self.values_dist
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// One winner: buyer index, the 1-based round it won in, and what it paid.
#[derive(Debug, Clone, PartialEq)]
pub struct Winner {
    pub buyer: usize,
    pub round: usize,
    pub price: f64,
    pub value: f64,
}

/// Realized auction result for one value profile.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionOutcome {
    pub winners: Vec<Winner>,
    pub revenue: f64,
    pub welfare: f64,
    pub virtual_surplus: f64,
}

/// Monte Carlo estimates of the three outcome aggregates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeEstimate {
    pub revenue: McEstimate,
    pub welfare: McEstimate,
    pub virtual_surplus: McEstimate,
}

/// Supports an analytic quantile ladder beta_1 > ... > beta_k with prices
/// from the backward indifference recursion, using the given beta values
/// directly rather than re-reading them through G.
fn ladder_profile(
    g: &ValueDistribution,
    n: usize,
    betas: &[f64],
    taus: Vec<f64>,
) -> Result<EquilibriumProfile, AuctionError> {
    let k = taus.len();
    if n == 1 && k >= 2 {
        return Err(EquilibriumError::DegenerateCompetition(k).into());
    }
    let mut prices = vec![0.0; k];
    prices[k - 1] = taus[k - 1];
    for j in (0..k - 1).rev() {
        let beta_prev = if j == 0 { 1.0 } else { betas[j - 1] };
        let ratio = geom_sum(n, betas[j], betas[j + 1]) / geom_sum(n, beta_prev, betas[j]);
        prices[j] = taus[j] - (taus[j] - prices[j + 1]) * ratio;
    }
    let schedule = PriceSchedule::new(prices, n, 1)?;
    Ok(EquilibriumProfile::assemble(g, taus, schedule)?)
}

/// Revenue ladder: reserve rho at the zero of the virtual value, quantiles
/// beta_j = (1 - G(rho)) e^{-j/n} + G(rho), thresholds at those quantiles,
/// prices from the backward recursion with p_k = tau_k.
pub fn revenue_prices(g: &ValueDistribution, n: usize, k: usize) -> Result<EquilibriumProfile, AuctionError> {
    if n < 1 || k < 1 {
        return Err(invalid("need n >= 1 and k >= 1"));
    }
    let transform = VirtualValueTransform::new(g.clone())?;
    let g_rho = g.cdf(transform.reserve());
    let alpha = (-1.0 / n as f64).exp();
    let mut betas = Vec::with_capacity(k);
    let mut taus = Vec::with_capacity(k);
    for j in 1..=k {
        let beta = (1.0 - g_rho) * alpha.powi(j as i32) + g_rho;
        taus.push(g.quantile(beta)?);
        betas.push(beta);
    }
    ladder_profile(g, n, &betas, taus)
}

/// Welfare ladder: quantiles beta_j = e^{-j/n} with no reserve, prices from
/// the same backward recursion.
pub fn welfare_prices(g: &ValueDistribution, n: usize, k: usize) -> Result<EquilibriumProfile, AuctionError> {
    if n < 1 || k < 1 {
        return Err(invalid("need n >= 1 and k >= 1"));
    }
    let mut betas = Vec::with_capacity(k);
    let mut taus = Vec::with_capacity(k);
    for j in 1..=k {
        let beta = (-(j as f64) / n as f64).exp();
        taus.push(g.quantile(beta)?);
        betas.push(beta);
    }
    ladder_profile(g, n, &betas, taus)
}

/// Expected revenue of the optimal (Myerson) mechanism: the expected sum of
/// the top m positive virtual values, by quadrature on the induced reward law.
pub fn myerson_opt_revenue(g: &ValueDistribution, n: usize, m: usize) -> Result<f64, AuctionError> {
    let transform = VirtualValueTransform::new(g.clone())?;
    let induced = transform.induced_reward_distribution(false)?;
    Ok(opt_offline(&induced, n, m)?)
}

/// Expected maximum social welfare: the expected sum of the top m values.
pub fn max_welfare(g: &ValueDistribution, n: usize, m: usize) -> Result<f64, AuctionError> {
    Ok(opt_offline(&g.as_reward(), n, m)?)
}

/// Allocates a fixed value profile: rounds run in decreasing price order,
/// each round's bidders get remaining units, with a uniform random subset
/// when they exceed remaining supply.
fn allocate<R: Rng + ?Sized>(
    inst: &AuctionInstance,
    profile: &EquilibriumProfile,
    values: &[f64],
    rng: &mut R,
) -> AuctionOutcome {
    let taus = profile.thresholds();
    let prices = profile.prices().prices();
    let mut remaining = inst.m;
    let mut winners = Vec::new();
    for j in 0..profile.k() {
        if remaining == 0 {
            break;
        }
        let upper = if j == 0 { f64::INFINITY } else { taus[j - 1] };
        let mut round: Vec<usize> = (0..values.len())
            .filter(|&i| values[i] >= taus[j] && values[i] < upper)
            .collect();
        if round.is_empty() {
            continue;
        }
        let take = round.len().min(remaining);
        if take < round.len() {
            for t in 0..take {
                let pick = rng.gen_range(t..round.len());
                round.swap(t, pick);
            }
            round.truncate(take);
        }
        for &i in &round {
            winners.push(Winner { buyer: i, round: j + 1, price: prices[j], value: values[i] });
        }
        remaining -= take;
    }
    let revenue = winners.iter().map(|w| w.price).sum();
    let welfare = winners.iter().map(|w| w.value).sum();
    let virtual_surplus = winners
        .iter()
        .map(|w| {
            inst.transform
                .virtual_value(w.value)
                .expect("sampled value has positive density")
        })
        .sum();
    AuctionOutcome { winners, revenue, welfare, virtual_surplus }
}

/// Runs one k-DPA against equilibrium bidders: draws n i.i.d. values from G,
/// bids them via `bid_of`, and allocates greedily with uniform tie-breaking.
pub fn simulate_kdpa<R: Rng + ?Sized>(
    inst: &AuctionInstance,
    profile: &EquilibriumProfile,
    rng: &mut R,
) -> AuctionOutcome {
    assert_eq!(profile.k(), inst.k, "profile must have inst.k rounds");
    let values: Vec<f64> = (0..inst.n).map(|_| inst.values_dist.sample(rng)).collect();
    allocate(inst, profile, &values, rng)
}

/// Monte Carlo revenue / welfare / virtual-surplus estimates; deterministic
/// for a fixed seed regardless of thread count.
pub fn expected_outcome_mc(
    inst: &AuctionInstance,
    profile: &EquilibriumProfile,
    trials: u64,
    seed: u64,
) -> OutcomeEstimate {
    let [revenue, welfare, virtual_surplus] = parallel_trials(trials, seed, |rng| {
        let outcome = simulate_kdpa(inst, profile, rng);
        [outcome.revenue, outcome.welfare, outcome.virtual_surplus]
    });
    OutcomeEstimate { revenue, welfare, virtual_surplus }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{indifference_residual, thresholds_to_prices};
    use crate::mc::trial_rng;
    use crate::prophet::{exact_alg_single, ThresholdPolicy};

    fn uni() -> ValueDistribution {
        ValueDistribution::uniform(0.0, 1.0)
    }

    /// 0.9 U[0,1] + 0.1 U[1,4]: virtual value jumps down at v=1.
    fn irregular_mixture() -> ValueDistribution {
        ValueDistribution::from_quantile_table(&[(0.0, 0.0), (0.9, 1.0), (1.0, 4.0)]).unwrap()
    }

    #[test]
    fn algorithm1_degenerate_and_small_cases() {
        let single = revenue_prices(&uni(), 1, 1).unwrap();
        let expect = 0.5 * (1.0 + (-1.0f64).exp());
        assert!((single.thresholds()[0] - expect).abs() < 1e-9);
        assert!((single.prices().prices()[0] - expect).abs() < 1e-9);
        assert!(matches!(
            revenue_prices(&uni(), 1, 2),
            Err(AuctionError::Equilibrium(EquilibriumError::DegenerateCompetition(2)))
        ));
        let two = revenue_prices(&uni(), 2, 1).unwrap();
        assert!((two.prices().prices()[0] - 0.5 * (1.0 + (-0.5f64).exp())).abs() < 1e-9);
        assert!(matches!(revenue_prices(&irregular_mixture(), 3, 2), Err(AuctionError::Dist(DistError::Irregular))));
    }

    #[test]
    fn algorithm1_known_ladder() {
        let profile = revenue_prices(&uni(), 10, 5).unwrap();
        let taus = [0.952418709017979, 0.9093653765389909, 0.8704091103408589, 0.8351600230178197, 0.8032653298563167];
        let prices = [0.8904739770963065, 0.85733542345763, 0.831270709080011, 0.8129533175558357, 0.8032653298563167];
        for j in 0..5 {
            assert!((profile.thresholds()[j] - taus[j]).abs() < 1e-8, "tau {j}");
            assert!((profile.prices().prices()[j] - prices[j]).abs() < 1e-8, "price {j}");
        }
    }

    #[test]
    fn algorithm1_exponential_reserve() {
        let g = ValueDistribution::exponential(1.0);
        let profile = revenue_prices(&g, 2, 3).unwrap();
        // phi(v) = v - 1 for exp(1), so the reserve is 1 and the top
        // threshold is 1 - ln(1 - e^{-1/2}).
        let alpha = (-0.5f64).exp();
        let expect = 1.0 - (1.0 - alpha).ln();
        assert!((profile.thresholds()[0] - expect).abs() < 1e-8);
        let taus = profile.thresholds();
        assert!(taus.windows(2).all(|w| w[0] > w[1]));
        assert!(taus[2] > 1.0);
    }

    #[test]
    fn algorithm1_agrees_with_equilibrium_map() {
        let g = uni();
        let profile = revenue_prices(&g, 10, 5).unwrap();
        let cross = thresholds_to_prices(&g, 10, profile.thresholds()).unwrap();
        for (a, b) in profile.prices().prices().iter().zip(cross.prices()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        for j in 1..5 {
            assert!(indifference_residual(&g, 10, j, &profile).abs() < 1e-9, "j={j}");
        }
    }

    #[test]
    fn welfare_ladder_known_values() {
        let profile = welfare_prices(&uni(), 10, 5).unwrap();
        for j in 1..=5 {
            let beta = (-(j as f64) / 10.0).exp();
            assert!((profile.thresholds()[j - 1] - beta).abs() < 1e-12);
        }
        let prices = profile.prices().prices();
        assert!((prices[4] - (-0.5f64).exp()).abs() < 1e-9);
        assert!((prices[3] - 0.6443852169425789).abs() < 1e-9, "{}", prices[3]);
        // For uniform G the recursion reduces to the constant-coefficient
        // form p_j = tau_j (1 - c) + c p_{j+1} with c = e^{-(n-1)/n}.
        let c = (-0.9f64).exp();
        let mut expect = prices[4];
        for j in (0..4).rev() {
            expect = profile.thresholds()[j] * (1.0 - c) + c * expect;
            assert!((prices[j] - expect).abs() < 1e-12, "j={j}");
        }
        let single = welfare_prices(&uni(), 7, 1).unwrap();
        assert!((single.prices().prices()[0] - (-1.0 / 7.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn welfare_ladder_agrees_with_equilibrium_map() {
        let g = ValueDistribution::exponential(1.0);
        let profile = welfare_prices(&g, 5, 4).unwrap();
        let cross = thresholds_to_prices(&g, 5, profile.thresholds()).unwrap();
        for (a, b) in profile.prices().prices().iter().zip(cross.prices()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn myerson_benchmark_known_values() {
        assert!((myerson_opt_revenue(&uni(), 1, 1).unwrap() - 0.25).abs() < 1e-8);
        assert!((myerson_opt_revenue(&uni(), 2, 1).unwrap() - 5.0 / 12.0).abs() < 1e-8);
        assert!((myerson_opt_revenue(&uni(), 2, 2).unwrap() - 0.5).abs() < 1e-8);
        assert!(matches!(myerson_opt_revenue(&irregular_mixture(), 2, 1), Err(AuctionError::Dist(DistError::Irregular))));
    }

    #[test]
    fn max_welfare_known_values() {
        assert!((max_welfare(&uni(), 10, 1).unwrap() - 10.0 / 11.0).abs() < 1e-8);
        assert!((max_welfare(&uni(), 2, 2).unwrap() - 1.0).abs() < 1e-8);
        assert!((max_welfare(&uni(), 2, 1).unwrap() - 2.0 / 3.0).abs() < 1e-8);
    }

    fn hand_profile(g: &ValueDistribution) -> EquilibriumProfile {
        let prices = thresholds_to_prices(g, 2, &[0.8, 0.5]).unwrap();
        EquilibriumProfile::assemble(g, vec![0.8, 0.5], prices).unwrap()
    }

    #[test]
    fn allocation_traces() {
        let g = uni();
        let profile = hand_profile(&g);
        let p1 = profile.prices().prices()[0];
        let inst = AuctionInstance::new(g.clone(), 2, 1, 2).unwrap();
        let mut rng = trial_rng(7, 0);

        let out = allocate(&inst, &profile, &[0.9, 0.6], &mut rng);
        assert_eq!(out.winners.len(), 1);
        assert_eq!(out.winners[0].buyer, 0);
        assert_eq!(out.winners[0].round, 1);
        assert!((out.revenue - p1).abs() < 1e-12);
        assert!((out.welfare - 0.9).abs() < 1e-12);
        assert!((out.virtual_surplus - 0.8).abs() < 1e-12);

        let none = allocate(&inst, &profile, &[0.4, 0.2], &mut rng);
        assert!(none.winners.is_empty());
        assert_eq!(none.revenue, 0.0);

        for trial in 0..50 {
            let mut rng = trial_rng(11, trial);
            let tied = allocate(&inst, &profile, &[0.9, 0.85], &mut rng);
            assert_eq!(tied.winners.len(), 1);
            assert!((tied.revenue - p1).abs() < 1e-12);
        }

        let both = AuctionInstance::new(g, 2, 2, 2).unwrap();
        let full = allocate(&both, &profile, &[0.9, 0.6], &mut rng);
        assert_eq!(full.winners.len(), 2);
        let p2 = profile.prices().prices()[1];
        assert!((full.revenue - (p1 + p2)).abs() < 1e-12);
    }

    #[test]
    fn tie_break_is_uniform() {
        let g = uni();
        let profile = hand_profile(&g);
        let inst = AuctionInstance::new(g, 3, 1, 2).unwrap();
        let mut counts = [0usize; 3];
        let trials = 3000;
        for trial in 0..trials {
            let mut rng = trial_rng(5, trial);
            let out = allocate(&inst, &profile, &[0.9, 0.85, 0.83], &mut rng);
            counts[out.winners[0].buyer] += 1;
        }
        for &c in &counts {
            let share = c as f64 / trials as f64;
            assert!((share - 1.0 / 3.0).abs() < 0.05, "{counts:?}");
        }
    }

    #[test]
    fn outcome_invariants_under_simulation() {
        let g = uni();
        let inst = AuctionInstance::new(g.clone(), 6, 2, 3).unwrap();
        let prices = thresholds_to_prices(&g, 6, &[0.8, 0.6, 0.4]).unwrap();
        let profile = EquilibriumProfile::assemble(&g, vec![0.8, 0.6, 0.4], prices).unwrap();
        for trial in 0..200 {
            let mut rng = trial_rng(3, trial);
            let out = simulate_kdpa(&inst, &profile, &mut rng);
            assert!(out.winners.len() <= 2);
            let by_price: f64 = out.winners.iter().map(|w| w.price).sum();
            assert_eq!(out.revenue, by_price);
            for w in &out.winners {
                assert!(w.value >= profile.thresholds()[w.round - 1]);
            }
        }
    }

    #[test]
    fn revenue_equivalence_within_mc_error() {
        let g = uni();
        let inst = AuctionInstance::new(g.clone(), 10, 1, 5).unwrap();
        let profile = revenue_prices(&g, 10, 5).unwrap();
        let est = expected_outcome_mc(&inst, &profile, 100_000, 42);
        let gap = (est.revenue.mean - est.virtual_surplus.mean).abs();
        assert!(gap <= est.revenue.three_sigma() + est.virtual_surplus.three_sigma(), "{est:?}");
        let again = expected_outcome_mc(&inst, &profile, 100_000, 42);
        assert_eq!(est, again);
    }

    #[test]
    fn welfare_estimate_matches_reduction() {
        let g = uni();
        let inst = AuctionInstance::new(g.clone(), 10, 1, 5).unwrap();
        let profile = welfare_prices(&g, 10, 5).unwrap();
        let est = expected_outcome_mc(&inst, &profile, 200_000, 9);
        let policy = ThresholdPolicy::new(profile.thresholds().to_vec()).unwrap();
        let exact = exact_alg_single(&g.as_reward(), 10, &policy).unwrap();
        assert!((est.welfare.mean - exact).abs() <= est.welfare.three_sigma(), "{} vs {exact}", est.welfare.mean);
    }

    #[test]
    fn prices_above_support_yield_zero() {
        let g = uni();
        let inst = AuctionInstance::new(g.clone(), 4, 1, 2).unwrap();
        let schedule = PriceSchedule::new(vec![1.4, 1.2], 4, 1).unwrap();
        let profile = EquilibriumProfile::assemble(&g, vec![1.5, 1.2], schedule).unwrap();
        let est = expected_outcome_mc(&inst, &profile, 10_000, 1);
        assert_eq!(est.revenue.mean, 0.0);
        assert_eq!(est.welfare.mean, 0.0);
        assert_eq!(est.revenue.std_error, 0.0);
    }
}
