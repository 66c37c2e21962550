//! Value and reward distributions.
//!
//! `ValueDistribution` is the buyer-side law G (CDF, density, quantile),
//! `RewardDistribution` is the prophet-side law F (CDF and quantile only, so
//! induced laws never need a density), and `VirtualValueTransform` bridges
//! the two: phi(v) = v - (1 - G(v)) / g(v), its inverse, the reserve
//! phi^-1(0), and the induced reward law F(x) = G(phi^-1(x)).
//!
//! Everything is immutable after construction and safe to share across
//! threads. Regularity is checked, never ironed: a distribution whose
//! virtual value decreases somewhere is rejected.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::quad::{adaptive_simpson, QUAD_TOL, TAIL_EPS};

/// Densities at or below this floor are treated as zero.
pub(crate) const DENSITY_FLOOR: f64 = 1e-12;

/// Bisection tolerance for quantile and inverse-virtual-value solves.
const BISECT_TOL: f64 = 1e-12;

/// Iteration cap for every bisection and bracket-doubling loop.
const BISECT_ITERS: usize = 200;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Errors from distribution construction and evaluation.
#[derive(Debug, thiserror::Error)]
pub enum DistError {
    #[error("value {0} lies outside the support")]
    OutOfSupport(f64),
    #[error("density at {0} is below the floor; virtual value undefined")]
    ZeroDensity(f64),
    #[error("{0} is outside the admissible range")]
    OutOfRange(f64),
    #[error("virtual value is not weakly increasing (ironing is unsupported)")]
    Irregular,
    #[error("interval [{a}, {b}) carries mass below 1e-12")]
    EmptyInterval { a: f64, b: f64 },
    #[error("no mass above the reserve to condition on")]
    DegenerateConditioning,
    #[error("bad distribution spec: {0}")]
    InvalidSpec(String),
}

/// Buyer value law G with CDF, density, and quantile on [lo, hi].
#[derive(Clone)]
pub struct ValueDistribution {
    cdf: RealFn,
    pdf: RealFn,
    quantile: RealFn,
    lo: f64,
    hi: f64,
}

/// Reward law F with CDF and quantile on [lo, hi]; no density required.
#[derive(Clone)]
pub struct RewardDistribution {
    cdf: RealFn,
    quantile: RealFn,
    lo: f64,
    hi: f64,
}

impl fmt::Debug for ValueDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ValueDistribution").field("lo", &self.lo).field("hi", &self.hi).finish_non_exhaustive()
    }
}

impl fmt::Debug for RewardDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RewardDistribution").field("lo", &self.lo).field("hi", &self.hi).finish_non_exhaustive()
    }
}

/// Solves cdf(v) = q by bisection on [lo, hi], doubling the bracket first
/// when hi is infinite.
fn bisect_quantile(cdf: &dyn Fn(f64) -> f64, q: f64, lo: f64, hi: f64) -> f64 {
    if q <= 0.0 {
        return lo;
    }
    if q >= 1.0 {
        return hi;
    }
    let mut vhi = if hi.is_finite() {
        hi
    } else {
        let mut w = lo.abs().max(1.0);
        for _ in 0..BISECT_ITERS {
            if cdf(lo + w) >= q {
                break;
            }
            w *= 2.0;
        }
        lo + w
    };
    let mut vlo = lo;
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (vlo + vhi);
        if cdf(mid) < q {
            vlo = mid;
        } else {
            vhi = mid;
        }
        if vhi - vlo <= BISECT_TOL * mid.abs().max(1.0) {
            break;
        }
    }
    0.5 * (vlo + vhi)
}

impl ValueDistribution {
    /// Uniform law on [a, b].
    pub fn uniform(a: f64, b: f64) -> Self {
        assert!(a.is_finite() && b.is_finite() && a < b, "uniform needs finite a < b");
        let w = b - a;
        Self {
            cdf: Arc::new(move |v| ((v - a) / w).clamp(0.0, 1.0)),
            pdf: Arc::new(move |v| if (a..=b).contains(&v) { 1.0 / w } else { 0.0 }),
            quantile: Arc::new(move |q| a + q * w),
            lo: a,
            hi: b,
        }
    }

    /// Exponential law with the given rate on [0, inf).
    pub fn exponential(rate: f64) -> Self {
        assert!(rate.is_finite() && rate > 0.0, "exponential needs rate > 0");
        Self {
            cdf: Arc::new(move |v| if v <= 0.0 { 0.0 } else { -(-rate * v).exp_m1() }),
            pdf: Arc::new(move |v| if v < 0.0 { 0.0 } else { rate * (-rate * v).exp() }),
            quantile: Arc::new(move |q| -(-q).ln_1p() / rate),
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    /// Piecewise-linear quantile table: strictly increasing (q, v) knots
    /// with q running from exactly 0 to exactly 1.
    pub fn from_quantile_table(knots: &[(f64, f64)]) -> Result<Self, DistError> {
        if knots.len() < 2 {
            return Err(DistError::InvalidSpec("quantile table needs at least two rows".into()));
        }
        for w in knots.windows(2) {
            if !(w[0].0 < w[1].0) || !(w[0].1 < w[1].1) {
                return Err(DistError::InvalidSpec("quantile table must be strictly increasing in q and v".into()));
            }
        }
        if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return Err(DistError::InvalidSpec("quantile table must start at q=0 and end at q=1".into()));
        }
        if knots.iter().any(|&(q, v)| !q.is_finite() || !v.is_finite()) {
            return Err(DistError::InvalidSpec("quantile table entries must be finite".into()));
        }
        let qs: Arc<Vec<f64>> = Arc::new(knots.iter().map(|k| k.0).collect());
        let vs: Arc<Vec<f64>> = Arc::new(knots.iter().map(|k| k.1).collect());
        let lo = vs[0];
        let hi = vs[vs.len() - 1];
        // Segment i covers [v_i, v_{i+1}) with constant density slope_i.
        let seg = |vs: &[f64], x: f64| vs.partition_point(|&t| t <= x).clamp(1, vs.len() - 1) - 1;
        let (cq, cv) = (qs.clone(), vs.clone());
        let cdf = Arc::new(move |x: f64| {
            if x <= cv[0] {
                return 0.0;
            }
            if x >= cv[cv.len() - 1] {
                return 1.0;
            }
            let i = seg(&cv, x);
            cq[i] + (cq[i + 1] - cq[i]) * (x - cv[i]) / (cv[i + 1] - cv[i])
        });
        let (pq, pv) = (qs.clone(), vs.clone());
        let pdf = Arc::new(move |x: f64| {
            if !(pv[0]..=pv[pv.len() - 1]).contains(&x) {
                return 0.0;
            }
            let i = seg(&pv, x);
            (pq[i + 1] - pq[i]) / (pv[i + 1] - pv[i])
        });
        let quantile = Arc::new(move |q: f64| {
            if q <= 0.0 {
                return vs[0];
            }
            if q >= 1.0 {
                return vs[vs.len() - 1];
            }
            let i = qs.partition_point(|&t| t <= q).clamp(1, qs.len() - 1) - 1;
            vs[i] + (vs[i + 1] - vs[i]) * (q - qs[i]) / (qs[i + 1] - qs[i])
        });
        Ok(Self { cdf, pdf, quantile, lo, hi })
    }

    /// Any atomless law given by CDF and density callbacks; the quantile
    /// falls back to bisection (tolerance 1e-12, at most 200 iterations).
    pub fn from_fns<C, P>(cdf: C, pdf: P, lo: f64, hi: f64) -> Self
    where
        C: Fn(f64) -> f64 + Send + Sync + 'static,
        P: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        assert!(lo.is_finite() && lo < hi, "support needs finite lo < hi");
        let cdf: RealFn = Arc::new(cdf);
        let qcdf = cdf.clone();
        Self {
            cdf,
            pdf: Arc::new(pdf),
            quantile: Arc::new(move |q| bisect_quantile(&*qcdf, q, lo, hi)),
            lo,
            hi,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn cdf(&self, v: f64) -> f64 {
        (self.cdf)(v)
    }

    pub fn pdf(&self, v: f64) -> f64 {
        (self.pdf)(v)
    }

    /// Quantile G^-1(q) for q in [0, 1].
    pub fn quantile(&self, q: f64) -> Result<f64, DistError> {
        if !(0.0..=1.0).contains(&q) {
            return Err(DistError::OutOfRange(q));
        }
        Ok((self.quantile)(q))
    }

    /// Draws one value by inverse transform.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        (self.quantile)(rng.gen::<f64>())
    }

    /// Reinterprets the value law as a reward law (welfare benchmarks).
    pub fn as_reward(&self) -> RewardDistribution {
        RewardDistribution {
            cdf: self.cdf.clone(),
            quantile: self.quantile.clone(),
            lo: self.lo,
            hi: self.hi,
        }
    }
}

impl RewardDistribution {
    /// Uniform reward law on [a, b].
    pub fn uniform(a: f64, b: f64) -> Self {
        ValueDistribution::uniform(a, b).as_reward()
    }

    /// Exponential reward law with the given rate.
    pub fn exponential(rate: f64) -> Self {
        ValueDistribution::exponential(rate).as_reward()
    }

    /// Any atomless reward law given by its CDF; quantile by bisection.
    pub fn from_cdf<C>(cdf: C, lo: f64, hi: f64) -> Self
    where
        C: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        assert!(lo < hi, "support needs lo < hi");
        let cdf: RealFn = Arc::new(cdf);
        let qcdf = cdf.clone();
        Self {
            cdf,
            quantile: Arc::new(move |q| bisect_quantile(&*qcdf, q, lo, hi)),
            lo,
            hi,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (self.cdf)(x)
    }

    /// Quantile F^-1(q) for q in [0, 1].
    pub fn quantile(&self, q: f64) -> Result<f64, DistError> {
        if !(0.0..=1.0).contains(&q) {
            return Err(DistError::OutOfRange(q));
        }
        Ok((self.quantile)(q))
    }

    /// Draws one reward by inverse transform.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        (self.quantile)(rng.gen::<f64>())
    }
}

/// Total extension of phi: +-inf at the boundary cases instead of errors.
fn phi_raw(d: &ValueDistribution, v: f64) -> f64 {
    if v.is_infinite() {
        return v;
    }
    let g = (d.pdf)(v);
    let tail = 1.0 - (d.cdf)(v);
    if g > DENSITY_FLOOR {
        v - tail / g
    } else if tail <= DENSITY_FLOOR {
        v
    } else {
        f64::NEG_INFINITY
    }
}

/// Solves phi(v) = x by bisection, clamped to the support; callers check
/// the residual when out-of-range must be an error.
fn phi_inverse_clamped(d: &ValueDistribution, x: f64) -> f64 {
    let lo = d.lo;
    let mut vhi = if d.hi.is_finite() {
        d.hi
    } else {
        let mut w = lo.abs().max(1.0);
        for _ in 0..BISECT_ITERS {
            if phi_raw(d, lo + w) >= x {
                break;
            }
            w *= 2.0;
        }
        lo + w
    };
    let mut vlo = lo;
    for _ in 0..BISECT_ITERS {
        let mid = 0.5 * (vlo + vhi);
        if phi_raw(d, mid) < x {
            vlo = mid;
        } else {
            vhi = mid;
        }
        if vhi - vlo <= BISECT_TOL * mid.abs().max(1.0) {
            break;
        }
    }
    0.5 * (vlo + vhi)
}

/// Myerson's virtual value phi for a regular value law, with its reserve.
#[derive(Clone, Debug)]
pub struct VirtualValueTransform {
    base: ValueDistribution,
    reserve: f64,
}

impl VirtualValueTransform {
    /// Builds the transform and rejects irregular laws (512-point check).
    pub fn new(base: ValueDistribution) -> Result<Self, DistError> {
        let t = Self::new_unchecked(base);
        if check_regularity(&t, 512) {
            Ok(t)
        } else {
            Err(DistError::Irregular)
        }
    }

    /// Builds the transform without the regularity check.
    pub fn new_unchecked(base: ValueDistribution) -> Self {
        let reserve = if phi_raw(&base, base.lo) >= 0.0 {
            base.lo
        } else {
            phi_inverse_clamped(&base, 0.0)
        };
        Self { base, reserve }
    }

    pub fn base(&self) -> &ValueDistribution {
        &self.base
    }

    /// The reserve rho = phi^-1(0), clamped to lo when phi(lo) >= 0.
    pub fn reserve(&self) -> f64 {
        self.reserve
    }

    /// phi(v) = v - (1 - G(v)) / g(v).
    pub fn virtual_value(&self, v: f64) -> Result<f64, DistError> {
        if !(self.base.lo..=self.base.hi).contains(&v) {
            return Err(DistError::OutOfSupport(v));
        }
        let g = (self.base.pdf)(v);
        if g <= DENSITY_FLOOR {
            return Err(DistError::ZeroDensity(v));
        }
        Ok(v - (1.0 - (self.base.cdf)(v)) / g)
    }

    /// Monotone inverse of phi; errors when x is outside phi's range.
    pub fn inverse_virtual_value(&self, x: f64) -> Result<f64, DistError> {
        if !x.is_finite() {
            return Err(DistError::OutOfRange(x));
        }
        let v = phi_inverse_clamped(&self.base, x);
        if (phi_raw(&self.base, v) - x).abs() <= 1e-6 * x.abs().max(1.0) {
            Ok(v)
        } else {
            Err(DistError::OutOfRange(x))
        }
    }

    /// Law of phi(V): plain F when `condition_nonnegative` is false, the
    /// zero-conditioned F-bar = (F - F(0)) / (1 - F(0)) on [0, hi] when true.
    pub fn induced_reward_distribution(&self, condition_nonnegative: bool) -> Result<RewardDistribution, DistError> {
        let cdf_base = self.base.clone();
        let raw_cdf: RealFn = Arc::new(move |x: f64| {
            if x == f64::NEG_INFINITY {
                return 0.0;
            }
            if x == f64::INFINITY {
                return 1.0;
            }
            (cdf_base.cdf)(phi_inverse_clamped(&cdf_base, x))
        });
        let q_base = self.base.clone();
        let raw_quantile: RealFn = Arc::new(move |q: f64| phi_raw(&q_base, (q_base.quantile)(q)));
        let lo_f = phi_raw(&self.base, self.base.lo);
        let hi_f = if self.base.hi.is_finite() { phi_raw(&self.base, self.base.hi) } else { f64::INFINITY };
        if !condition_nonnegative {
            return Ok(RewardDistribution { cdf: raw_cdf, quantile: raw_quantile, lo: lo_f, hi: hi_f });
        }
        let f0 = (self.base.cdf)(self.reserve);
        let above = 1.0 - f0;
        if above <= 1e-12 {
            return Err(DistError::DegenerateConditioning);
        }
        let c_cdf = raw_cdf.clone();
        let cdf: RealFn = Arc::new(move |x: f64| if x <= 0.0 { 0.0 } else { ((c_cdf(x) - f0) / above).clamp(0.0, 1.0) });
        let quantile: RealFn = Arc::new(move |q: f64| raw_quantile(f0 + q * above).max(0.0));
        Ok(RewardDistribution { cdf, quantile, lo: 0.0, hi: hi_f })
    }
}

/// True iff phi is weakly increasing across a quantile-spaced grid
/// (slack 1e-9); evaluation failures count as irregular.
pub fn check_regularity(t: &VirtualValueTransform, grid_size: usize) -> bool {
    assert!(grid_size >= 2, "grid_size must be at least 2");
    let mut prev = f64::NEG_INFINITY;
    for i in 0..grid_size {
        let q = (i + 1) as f64 / (grid_size + 1) as f64;
        let v = (t.base.quantile)(q);
        let phi = match t.virtual_value(v) {
            Ok(p) => p,
            Err(_) => return false,
        };
        if phi < prev - 1e-9 {
            return false;
        }
        prev = phi;
    }
    true
}

/// E[V | V in [a, b)] for a reward law, by CDF-only quadrature:
/// mean = a + integral of (F(b) - F(x)) / mass over [a, b).
pub fn conditional_mean(d: &RewardDistribution, a: f64, b: f64) -> Result<f64, DistError> {
    if !(a < b) {
        return Err(DistError::EmptyInterval { a, b });
    }
    let fa = (d.cdf)(a);
    let fb = if b.is_finite() { (d.cdf)(b) } else { 1.0 };
    let mass = fb - fa;
    if mass <= 1e-12 {
        return Err(DistError::EmptyInterval { a, b });
    }
    let cap = if b.is_finite() {
        b
    } else {
        let mut cap = (d.quantile)(1.0 - TAIL_EPS).max(a + a.abs().max(1.0));
        for _ in 0..60 {
            if 1.0 - (d.cdf)(cap) <= 1e-12 * mass {
                break;
            }
            cap = a + 2.0 * (cap - a);
        }
        cap
    };
    let shortfall = adaptive_simpson(&|x| fb - (d.cdf)(x), a, cap, (QUAD_TOL * mass).max(1e-15));
    Ok(a + shortfall / mass)
}

/// Parses `uniform:a,b`, `exp:rate`, or `table:path.csv` (header `q,v`).
pub fn parse_dist_spec(spec: &str) -> Result<ValueDistribution, DistError> {
    let bad = |msg: String| DistError::InvalidSpec(msg);
    let (kind, args) = spec
        .split_once(':')
        .ok_or_else(|| bad(format!("{spec:?} (expected kind:args)")))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("{s:?} is not a number")));
    match kind {
        "uniform" => {
            let (a, b) = args
                .split_once(',')
                .ok_or_else(|| bad(format!("uniform wants a,b, got {args:?}")))?;
            let (a, b) = (num(a)?, num(b)?);
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(bad(format!("uniform needs finite a < b, got {a},{b}")));
            }
            Ok(ValueDistribution::uniform(a, b))
        }
        "exp" => {
            let rate = num(args)?;
            if !(rate.is_finite() && rate > 0.0) {
                return Err(bad(format!("exp needs rate > 0, got {rate}")));
            }
            Ok(ValueDistribution::exponential(rate))
        }
        "table" => read_quantile_table(Path::new(args)),
        other => Err(bad(format!("unknown distribution kind {other:?}"))),
    }
}

/// Reads a `q,v` CSV into a piecewise-linear quantile distribution.
fn read_quantile_table(path: &Path) -> Result<ValueDistribution, DistError> {
    let bad = |msg: String| DistError::InvalidSpec(msg);
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(format!("table {}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| bad(format!("table {}: {e}", path.display())))?;
    let cols: Vec<&str> = headers.iter().map(str::trim).collect();
    if cols != ["q", "v"] {
        return Err(bad(format!("table header must be q,v, got {cols:?}")));
    }
    let mut knots = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| bad(format!("table {}: {e}", path.display())))?;
        let q = row.get(0).unwrap_or("").trim().parse::<f64>().map_err(|_| bad(format!("bad q in row {row:?}")))?;
        let v = row.get(1).unwrap_or("").trim().parse::<f64>().map_err(|_| bad(format!("bad v in row {row:?}")))?;
        knots.push((q, v));
    }
    ValueDistribution::from_quantile_table(&knots)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 0.9 U[0,1] + 0.1 U[1,4] as a quantile table; phi drops at v=1.
    fn irregular_mixture() -> ValueDistribution {
        ValueDistribution::from_quantile_table(&[(0.0, 0.0), (0.9, 1.0), (1.0, 4.0)]).unwrap()
    }

    #[test]
    fn uniform_basics() {
        let d = ValueDistribution::uniform(0.0, 1.0);
        assert_eq!(d.cdf(0.25), 0.25);
        assert_eq!(d.pdf(0.5), 1.0);
        assert_eq!(d.quantile(0.7).unwrap(), 0.7);
        assert!(d.quantile(1.5).is_err());
        let pdf_mass = adaptive_simpson(&|v| d.pdf(v), 0.0, 1.0, QUAD_TOL);
        assert!((pdf_mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn exponential_round_trip() {
        let d = ValueDistribution::exponential(2.0);
        for q in [0.01, 0.3, 0.5, 0.9, 0.999] {
            let v = d.quantile(q).unwrap();
            assert!((d.cdf(v) - q).abs() < 1e-12, "q={q}");
        }
        let cap = d.quantile(1.0 - 1e-12).unwrap();
        let pdf_mass = adaptive_simpson(&|v| d.pdf(v), 0.0, cap, QUAD_TOL);
        assert!((pdf_mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quantile_table_matches_mixture() {
        let d = irregular_mixture();
        assert_eq!(d.cdf(0.5), 0.45);
        assert_eq!(d.cdf(2.5), 0.95);
        assert!((d.pdf(0.5) - 0.9).abs() < 1e-12);
        assert!((d.pdf(2.0) - 0.1 / 3.0).abs() < 1e-12);
        for q in [0.05, 0.45, 0.89, 0.91, 0.99] {
            let v = d.quantile(q).unwrap();
            assert!((d.cdf(v) - q).abs() < 1e-12, "q={q}");
        }
    }

    #[test]
    fn from_fns_bisection_quantile() {
        let d = ValueDistribution::from_fns(|v: f64| (v * v).clamp(0.0, 1.0), |v| 2.0 * v, 0.0, 1.0);
        for q in [0.1, 0.25, 0.5, 0.81] {
            let v = d.quantile(q).unwrap();
            assert!((v - q.sqrt()).abs() < 1e-10, "q={q}");
        }
    }

    #[test]
    fn virtual_value_known_points() {
        let u = VirtualValueTransform::new(ValueDistribution::uniform(0.0, 1.0)).unwrap();
        assert!((u.virtual_value(0.5).unwrap() - 0.0).abs() < 1e-12);
        assert!((u.virtual_value(1.0).unwrap() - 1.0).abs() < 1e-12);
        let e = VirtualValueTransform::new(ValueDistribution::exponential(1.0)).unwrap();
        assert!((e.virtual_value(2.0).unwrap() - 1.0).abs() < 1e-10);
        assert!(matches!(u.virtual_value(2.0), Err(DistError::OutOfSupport(_))));
    }

    #[test]
    fn inverse_virtual_value_known_points() {
        let u = VirtualValueTransform::new(ValueDistribution::uniform(0.0, 1.0)).unwrap();
        assert!((u.inverse_virtual_value(0.0).unwrap() - 0.5).abs() < 1e-9);
        assert!((u.inverse_virtual_value(1.0).unwrap() - 1.0).abs() < 1e-9);
        assert!((u.inverse_virtual_value(-1.0).unwrap() - 0.0).abs() < 1e-9);
        assert!(matches!(u.inverse_virtual_value(1.5), Err(DistError::OutOfRange(_))));
    }

    #[test]
    fn reserve_values() {
        let u = VirtualValueTransform::new(ValueDistribution::uniform(0.0, 1.0)).unwrap();
        assert!((u.reserve() - 0.5).abs() < 1e-9);
        let e = VirtualValueTransform::new(ValueDistribution::exponential(1.0)).unwrap();
        assert!((e.reserve() - 1.0).abs() < 1e-9);
        // phi(lo) = 1 > 0, so the reserve clamps to lo.
        let shifted = VirtualValueTransform::new(ValueDistribution::uniform(2.0, 3.0)).unwrap();
        assert_eq!(shifted.reserve(), 2.0);
    }

    #[test]
    fn regularity_verdicts() {
        let u = VirtualValueTransform::new_unchecked(ValueDistribution::uniform(0.0, 1.0));
        assert!(check_regularity(&u, 1000));
        let e = VirtualValueTransform::new_unchecked(ValueDistribution::exponential(1.0));
        assert!(check_regularity(&e, 1000));
        let m = VirtualValueTransform::new_unchecked(irregular_mixture());
        assert!(!check_regularity(&m, 1000));
        assert!(matches!(VirtualValueTransform::new(irregular_mixture()), Err(DistError::Irregular)));
    }

    #[test]
    fn induced_reward_law_uniform() {
        let t = VirtualValueTransform::new(ValueDistribution::uniform(0.0, 1.0)).unwrap();
        let f = t.induced_reward_distribution(false).unwrap();
        assert!((f.lo() + 1.0).abs() < 1e-9 && (f.hi() - 1.0).abs() < 1e-9);
        for x in [-1.0, -0.4, 0.0, 0.3, 1.0] {
            assert!((f.cdf(x) - (x + 1.0) / 2.0).abs() < 1e-9, "x={x}");
        }
        let fbar = t.induced_reward_distribution(true).unwrap();
        assert_eq!(fbar.cdf(0.0), 0.0);
        for x in [0.1, 0.5, 0.9] {
            assert!((fbar.cdf(x) - x).abs() < 1e-9, "x={x}");
            assert!((fbar.quantile(x).unwrap() - x).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn induced_reward_composition_identity() {
        let t = VirtualValueTransform::new(ValueDistribution::exponential(1.0)).unwrap();
        let f = t.induced_reward_distribution(false).unwrap();
        for i in 1..20 {
            let v = t.base().quantile(i as f64 / 20.0).unwrap();
            let phi = t.virtual_value(v).unwrap();
            assert!((f.cdf(phi) - t.base().cdf(v)).abs() < 1e-8, "v={v}");
        }
    }

    #[test]
    fn degenerate_conditioning_rejected() {
        let t = VirtualValueTransform::new(ValueDistribution::uniform(-3.0, -1.0)).unwrap();
        assert!(matches!(t.induced_reward_distribution(true), Err(DistError::DegenerateConditioning)));
    }

    #[test]
    fn conditional_means() {
        let u = RewardDistribution::uniform(0.0, 1.0);
        assert!((conditional_mean(&u, 0.2, 0.8).unwrap() - 0.5).abs() < 1e-9);
        assert!((conditional_mean(&u, 0.5, 1.0).unwrap() - 0.75).abs() < 1e-9);
        let e = RewardDistribution::exponential(1.0);
        assert!((conditional_mean(&e, 0.0, f64::INFINITY).unwrap() - 1.0).abs() < 1e-8);
        assert!(matches!(conditional_mean(&u, 2.0, 3.0), Err(DistError::EmptyInterval { .. })));
    }

    #[test]
    fn conditional_mean_mixture_identity() {
        let e = RewardDistribution::exponential(0.7);
        let (a, c, b) = (0.3, 1.1, 2.9);
        let mass = |x: f64, y: f64| e.cdf(y) - e.cdf(x);
        let whole = mass(a, b) * conditional_mean(&e, a, b).unwrap();
        let split = mass(a, c) * conditional_mean(&e, a, c).unwrap() + mass(c, b) * conditional_mean(&e, c, b).unwrap();
        assert!((whole - split).abs() < 1e-8);
    }

    #[test]
    fn parse_specs() {
        assert!(parse_dist_spec("uniform:0,1").is_ok());
        assert!(parse_dist_spec("exp:1").is_ok());
        assert!(matches!(parse_dist_spec("uniform:1,0"), Err(DistError::InvalidSpec(_))));
        assert!(matches!(parse_dist_spec("normal:0,1"), Err(DistError::InvalidSpec(_))));
        assert!(matches!(parse_dist_spec("exp"), Err(DistError::InvalidSpec(_))));
    }

    #[test]
    fn parse_table_csv() {
        use std::io::Write;
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "q,v\n0,0\n0.5,2\n1,3").unwrap();
        let d = parse_dist_spec(&format!("table:{}", file.path().display())).unwrap();
        assert_eq!(d.lo(), 0.0);
        assert_eq!(d.hi(), 3.0);
        assert!((d.quantile(0.25).unwrap() - 1.0).abs() < 1e-12);
        assert!((d.cdf(2.5) - 0.75).abs() < 1e-12);
        let mut badfile = tempfile::NamedTempFile::new().unwrap();
        writeln!(badfile, "q,v\n0,0\n0.5,2\n0.9,3").unwrap();
        assert!(parse_dist_spec(&format!("table:{}", badfile.path().display())).is_err());
    }
}
