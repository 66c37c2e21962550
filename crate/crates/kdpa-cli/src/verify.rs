//! Built-in verification suites: `fast` checks closed-form identities and
//! equilibrium round trips; `full` adds Monte Carlo cross-checks.

use kdpa::mc::trial_rng;
use kdpa::{
    balanced_thresholds_multi, balanced_thresholds_single, best_response_audit, deviation_check_mc,
    dp_solve, exact_alg_enumeration, exact_alg_single, expected_outcome_mc, expected_reward_mc,
    guarantee_multi, opt_offline, p_polynomial, prices_to_thresholds, selection_polynomials,
    thresholds_to_prices, AuctionInstance, DiscreteDistribution, EquilibriumProfile,
    ProphetInstance, RewardDistribution, ThresholdPolicy, ValueDistribution,
};
use rand::Rng;

pub struct PropertyResult {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

fn check(name: &'static str, ok: bool, detail: String) -> PropertyResult {
    PropertyResult { name, ok, detail }
}

fn single_item_floor() -> PropertyResult {
    let floor = 1.0 - (-1.0f64).exp();
    let mut worst = f64::INFINITY;
    for n in 1..=200usize {
        let x = (-1.0 / n as f64).exp();
        let p = p_polynomial(n, x).unwrap();
        worst = worst.min((1.0 - x.powi(n as i32)).min(p) - floor);
    }
    check("single_item_floor", worst >= -1e-12, format!("min margin {worst:.3e}"))
}

fn selection_identity() -> PropertyResult {
    let mut rng = trial_rng(101, 0);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(2..=150usize);
        let m = rng.gen_range(1..=n.min(6));
        let x = rng.gen::<f64>() * 0.999;
        let (a, b) = selection_polynomials(n, m, x).unwrap();
        worst = worst.max((b - m as f64 * a / (n as f64 * (1.0 - x))).abs());
    }
    check("selection_identity", worst <= 1e-10, format!("max gap {worst:.3e}"))
}

fn selection_floor() -> PropertyResult {
    let mut worst = f64::INFINITY;
    for m in 1..=5usize {
        let bar = guarantee_multi(1, m);
        for i in 0..10 {
            let n = (m + 1) * (1 << i).min(128);
            let x = 1.0 - m as f64 / n as f64;
            let (a, b) = selection_polynomials(n, m, x).unwrap();
            worst = worst.min(a.min(b) - bar);
        }
    }
    check("selection_floor", worst >= -1e-9, format!("min margin {worst:.3e}"))
}

fn balanced_quantiles() -> PropertyResult {
    let mut worst = 0.0f64;
    for f in [RewardDistribution::uniform(0.0, 1.0), RewardDistribution::exponential(1.0)] {
        let single = balanced_thresholds_single(&f, 10, 4).unwrap();
        for (j, tau) in single.thresholds().iter().enumerate() {
            worst = worst.max((f.cdf(*tau) - (-((j + 1) as f64) / 10.0).exp()).abs());
        }
        let multi = balanced_thresholds_multi(&f, 12, 3, 4).unwrap();
        for (r, tau) in multi.thresholds().iter().enumerate() {
            worst = worst.max((f.cdf(*tau) - (1.0f64 - 3.0 / 12.0).powi(r as i32 + 1)).abs());
        }
    }
    check("balanced_quantiles", worst <= 1e-9, format!("max quantile gap {worst:.3e}"))
}

fn warmup_value() -> PropertyResult {
    let f = RewardDistribution::uniform(0.0, 1.0);
    let policy = balanced_thresholds_single(&f, 10, 5).unwrap();
    let alg = exact_alg_single(&f, 10, &policy).unwrap();
    let opt = opt_offline(&f, 10, 1).unwrap();
    let ok = (alg - 0.8987513776867328).abs() <= 1e-6 && (opt - 10.0 / 11.0).abs() <= 1e-9;
    check("warmup_value", ok, format!("alg {alg:.10}, opt {opt:.10}"))
}

fn equilibrium_round_trip() -> PropertyResult {
    let mut rng = trial_rng(102, 0);
    let mut worst_rt = 0.0f64;
    let mut worst_audit = f64::NEG_INFINITY;
    for i in 0..8 {
        let g = if i % 2 == 0 { ValueDistribution::uniform(0.0, 1.0) } else { ValueDistribution::exponential(1.0) };
        let n = rng.gen_range(2..=8usize);
        let k = rng.gen_range(1..=5usize);
        let taus: Vec<f64> = {
            let mut qs: Vec<f64> = (0..k).map(|j| 0.90 - 0.84 * (j as f64 + rng.gen::<f64>() * 0.8) / k as f64).collect();
            qs.sort_by(|a, b| b.partial_cmp(a).unwrap());
            qs.iter().map(|&q| g.quantile(q).unwrap()).collect()
        };
        let prices = thresholds_to_prices(&g, n, &taus).unwrap();
        let profile = prices_to_thresholds(&g, n, &prices).unwrap();
        for (got, want) in profile.thresholds().iter().zip(&taus) {
            worst_rt = worst_rt.max((got - want).abs());
        }
        worst_audit = worst_audit.max(best_response_audit(&g, n, 1, &profile, 400).max_violation);
    }
    check(
        "equilibrium_round_trip",
        worst_rt <= 1e-8 && worst_audit <= 1e-8,
        format!("round trip {worst_rt:.2e}, audit {worst_audit:.2e}"),
    )
}

fn hand_instance() -> PropertyResult {
    let g = ValueDistribution::uniform(0.0, 1.0);
    let prices = thresholds_to_prices(&g, 2, &[0.8, 0.5]).unwrap();
    let gap = (prices.prices()[0] - 7.0 / 12.0).abs().max((prices.prices()[1] - 0.5).abs());
    check("hand_instance", gap <= 1e-9, format!("price gap {gap:.2e}"))
}

fn dp_dominance() -> PropertyResult {
    let f = RewardDistribution::uniform(0.0, 1.0);
    let mut ok = true;
    let mut prev = 0.0;
    let mut worst = f64::INFINITY;
    for k in 1..=3usize {
        let sol = dp_solve(&f, 10, k, 400).unwrap();
        let balanced = balanced_thresholds_single(&f, 10, k).unwrap();
        let base = exact_alg_single(&f, 10, &balanced).unwrap();
        worst = worst.min(sol.value + sol.grid_error - base);
        ok &= sol.value + sol.grid_error >= base && sol.value >= prev;
        prev = sol.value;
    }
    check("dp_dominance", ok, format!("min dominance margin {worst:.3e}"))
}

fn oracle_stage_decomposition() -> PropertyResult {
    let mut rng = trial_rng(103, 0);
    let mut worst = 0.0f64;
    for i in 0..6u64 {
        let len = 2 + (i % 3) as usize;
        let mut v = 0.0;
        let mut atoms = Vec::new();
        for _ in 0..len {
            v += 0.2 + rng.gen::<f64>();
            atoms.push((v, 1.0 / len as f64));
        }
        let d = DiscreteDistribution::new(atoms.clone()).unwrap();
        let n = 2 + (i % 2) as usize;
        let tau = 0.5 * (atoms[len - 2].0 + atoms[len - 1].0);
        let policy = ThresholdPolicy::new(vec![tau]).unwrap();
        let exact = exact_alg_enumeration(&d, n, 1, &policy).unwrap();
        // Single threshold: the win event is max >= tau and the prize is the
        // top atom's value.
        let p_pass: f64 = atoms.iter().filter(|(v, _)| *v >= tau).map(|(_, p)| p).sum();
        let closed = (1.0 - (1.0 - p_pass).powi(n as i32)) * atoms[len - 1].0;
        worst = worst.max((exact - closed).abs());
    }
    check("oracle_stage_decomposition", worst <= 1e-12, format!("max gap {worst:.2e}"))
}

fn mc_brackets_exact() -> PropertyResult {
    let mut rng = trial_rng(104, 0);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..3u64 {
        let f = if i % 2 == 0 { RewardDistribution::uniform(0.0, 1.0) } else { RewardDistribution::exponential(1.0) };
        let n = rng.gen_range(3..=12usize);
        let k = rng.gen_range(1..=4usize);
        let mut qs: Vec<f64> = (0..k).map(|_| 0.05 + 0.9 * rng.gen::<f64>()).collect();
        qs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        qs.dedup_by(|a, b| (*a - *b).abs() < 1e-2);
        let taus: Vec<f64> = qs.iter().map(|&q| f.quantile(q).unwrap()).collect();
        let policy = ThresholdPolicy::new(taus).unwrap();
        let exact = exact_alg_single(&f, n, &policy).unwrap();
        let inst = ProphetInstance::new(f, n, 1).unwrap();
        let est = expected_reward_mc(&inst, &policy, 1_000_000, 7000 + i);
        worst = worst.max((est.mean - exact).abs() / est.std_error.max(1e-300));
    }
    check("mc_brackets_exact", worst <= 3.0, format!("worst deviation {worst:.2} sigma"))
}

fn revenue_equivalence_mc() -> PropertyResult {
    let g = ValueDistribution::uniform(0.0, 1.0);
    let profile = kdpa::revenue_prices(&g, 10, 3).unwrap();
    let inst = AuctionInstance::new(g, 10, 1, 3).unwrap();
    let est = expected_outcome_mc(&inst, &profile, 1_000_000, 7100);
    let gap = (est.revenue.mean - est.virtual_surplus.mean).abs();
    let budget = est.revenue.three_sigma() + est.virtual_surplus.three_sigma();
    check("revenue_equivalence_mc", gap <= budget, format!("gap {gap:.2e} vs budget {budget:.2e}"))
}

fn welfare_reduction_mc() -> PropertyResult {
    let g = ValueDistribution::uniform(0.0, 1.0);
    let profile = kdpa::welfare_prices(&g, 10, 4).unwrap();
    let inst = AuctionInstance::new(g.clone(), 10, 1, 4).unwrap();
    let est = expected_outcome_mc(&inst, &profile, 1_000_000, 7200);
    let policy = ThresholdPolicy::new(profile.thresholds().to_vec()).unwrap();
    let exact = exact_alg_single(&g.as_reward(), 10, &policy).unwrap();
    let sigmas = (est.welfare.mean - exact).abs() / est.welfare.std_error.max(1e-300);
    check("welfare_reduction_mc", sigmas <= 3.0, format!("deviation {sigmas:.2} sigma"))
}

fn deviation_audit_agreement() -> PropertyResult {
    let g = ValueDistribution::uniform(0.0, 1.0);
    let solved = {
        let prices = thresholds_to_prices(&g, 2, &[0.8, 0.5]).unwrap();
        EquilibriumProfile::assemble(&g, vec![0.8, 0.5], prices).unwrap()
    };
    let solved_audit = best_response_audit(&g, 2, 1, &solved, 200).max_violation <= 1e-8;
    let solved_mc = deviation_check_mc(&g, 2, 1, &solved, 21, 40_000, 7300).max_gain_lcb <= 0.0;
    let perturbed = {
        let mut prices = solved.prices().prices().to_vec();
        prices[0] -= 0.05;
        let schedule = kdpa::PriceSchedule::new(prices, 2, 1).unwrap();
        EquilibriumProfile::assemble(&g, vec![0.8, 0.5], schedule).unwrap()
    };
    let perturbed_audit = best_response_audit(&g, 2, 1, &perturbed, 200).max_violation > 1e-4;
    let perturbed_mc = deviation_check_mc(&g, 2, 1, &perturbed, 21, 40_000, 7301).max_gain_lcb > 0.0;
    check(
        "deviation_audit_agreement",
        solved_audit && solved_mc && perturbed_audit && perturbed_mc,
        format!("solved ({solved_audit},{solved_mc}), perturbed ({perturbed_audit},{perturbed_mc})"),
    )
}

/// Runs the requested suite and returns its results.
pub fn run_suite(full: bool) -> Vec<PropertyResult> {
    let mut results = vec![
        single_item_floor(),
        selection_identity(),
        selection_floor(),
        balanced_quantiles(),
        warmup_value(),
        equilibrium_round_trip(),
        hand_instance(),
        dp_dominance(),
        oracle_stage_decomposition(),
    ];
    if full {
        results.push(mc_brackets_exact());
        results.push(revenue_equivalence_mc());
        results.push(welfare_reduction_mc());
        results.push(deviation_audit_agreement());
    }
    results
}
