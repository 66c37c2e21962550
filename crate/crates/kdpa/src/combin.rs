//! Log-space binomial helpers. Counts up to 1e5 must survive without
//! overflow, so probability masses are assembled as `exp(ln C(n,i) + ...)`.

/// Cumulative log-factorial table: `table[i] = ln(i!)` for `i = 0..=n`.
///
/// Built with compensated summation so the absolute error stays near machine
/// epsilon even for n in the tens of thousands.
pub(crate) fn ln_factorial_table(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    table.push(0.0);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for i in 1..=n {
        let term = (i as f64).ln();
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        table.push(sum);
    }
    table
}

/// `ln C(n, i)` computed from a log-factorial table covering at least `n`.
#[inline]
pub(crate) fn ln_choose(table: &[f64], n: usize, i: usize) -> f64 {
    debug_assert!(i <= n && n < table.len());
    table[n] - table[i] - table[n - i]
}

/// Binomial(n, p) probability mass at `i`, stable for any n the table covers.
#[inline]
pub(crate) fn binom_pmf(table: &[f64], n: usize, i: usize, p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    if p == 0.0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if i == n { 1.0 } else { 0.0 };
    }
    let ln_pmf = ln_choose(table, n, i) + (i as f64) * p.ln() + ((n - i) as f64) * (1.0 - p).ln();
    ln_pmf.exp()
}

/// `E[min(K, cap)]` for `K ~ Binomial(n, p)`, via the complement identity
/// `E[min(K, cap)] = cap - sum_{i < cap} (cap - i) P(K = i)`; O(cap) terms.
pub(crate) fn expected_min_binomial(n: usize, p: f64, cap: usize) -> f64 {
    debug_assert!(cap >= 1);
    if cap >= n {
        // min(K, cap) = K almost surely when cap >= n.
        return n as f64 * p;
    }
    let q = 1.0 - p;
    let mut shortfall = 0.0;
    // pmf(i) for i < cap, built incrementally: pmf(0) = q^n in log space.
    let mut ln_pmf = (n as f64) * q.ln();
    if p == 0.0 {
        return 0.0;
    }
    if q == 0.0 {
        return cap.min(n) as f64;
    }
    for i in 0..cap.min(n + 1) {
        shortfall += (cap - i) as f64 * ln_pmf.exp();
        // pmf(i+1)/pmf(i) = (n-i)/(i+1) * p/q
        ln_pmf += ((n - i) as f64 / (i + 1) as f64).ln() + p.ln() - q.ln();
    }
    (cap as f64 - shortfall).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_choose_matches_small_cases() {
        let t = ln_factorial_table(10);
        assert!((ln_choose(&t, 5, 2).exp() - 10.0).abs() < 1e-12);
        assert!((ln_choose(&t, 10, 5).exp() - 252.0).abs() < 1e-9);
    }

    #[test]
    fn pmf_sums_to_one() {
        let t = ln_factorial_table(60);
        let total: f64 = (0..=60).map(|i| binom_pmf(&t, 60, i, 0.37)).sum();
        assert!((total - 1.0).abs() < 1e-12, "total {total}");
    }

    #[test]
    fn expected_min_agrees_with_direct_sum() {
        let t = ln_factorial_table(40);
        for &(n, p, cap) in &[(10usize, 0.3, 2usize), (40, 0.9, 5), (7, 0.05, 1), (12, 0.5, 12)] {
            let direct: f64 = (0..=n)
                .map(|i| (i.min(cap)) as f64 * binom_pmf(&t, n, i, p))
                .sum();
            let fast = expected_min_binomial(n, p, cap);
            assert!((direct - fast).abs() < 1e-12, "n={n} p={p} cap={cap}: {direct} vs {fast}");
        }
    }
}
