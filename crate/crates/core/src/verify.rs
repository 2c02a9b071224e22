//! Monte Carlo checks of the distributional laws of the random
//! homeomorphism, decay-shape checks for kernel integrals, and partial-sum
//! sweeps.
//!
//! Every sample `j` of a check draws from the substream `(seed, [tag, j])`,
//! and samples are gathered in index order, so reports do not depend on the
//! size of the rayon pool they run in.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{domain, Error, Result};
use crate::fourier::{interval_integral, Composed, KernelOrder, KernelPlan, PiecewiseLinear, QuadratureSpec};
use crate::homeo::{
    bracket_at, chain_values, conditional_chain_sample, conditional_restrict, sample_chain, value_at,
    DyadicHomeomorphism, HolderEnvelope, SplitSource,
};
use crate::rng::RandomSource;
use crate::testfn::TestFunction;

/// Substream tags, one per family of samples.
mod tag {
    pub const DYADIC: u64 = 1;
    pub const FIRST_PASSAGE: u64 = 2;
    pub const THIRD: u64 = 3;
    pub const HOLDER: u64 = 4;
    /// Shared by the head and tail checks so both see the same homeomorphisms.
    pub const KERNEL_INTEGRAL: u64 = 5;
    pub const TUBE: u64 = 6;
    pub const SWEEP: u64 = 7;
    pub const CONDITIONAL: u64 = 8;
}

fn sample_source(seed: u64, tag: u64, index: u64) -> RandomSource {
    RandomSource::with_path(seed, vec![tag, index])
}

/// Runs `f(j)` for `j < count` on the current rayon pool, results in index order.
pub fn par_samples<T: Send>(count: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..count as u64).into_par_iter().map(f).collect()
}

/// Sorted sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.iter().any(|v| v.is_nan()) {
            return domain("samples must not contain NaN");
        }
        samples.sort_unstable_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    /// Linear interpolation between order statistics (`p` in [0, 1]).
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.samples.len();
        if n == 0 {
            return f64::NAN;
        }
        let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        let frac = pos - lo as f64;
        self.samples[lo] + frac * (self.samples[hi] - self.samples[lo])
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Fraction of samples strictly above `t`.
    pub fn exceedance(&self, t: f64) -> f64 {
        let above = self.samples.len() - self.samples.partition_point(|&v| v <= t);
        above as f64 / self.samples.len().max(1) as f64
    }
}

/// Outcome of a statistical check.
///
/// Without `expected`, `pass` means `statistic <= threshold`; with it,
/// `|statistic - expected| <= threshold`. Checks that use another rule say so
/// in `details`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    #[serde(rename = "n_samples")]
    pub sample_count: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl CheckReport {
    fn at_most(name: &str, statistic: f64, threshold: f64, sample_count: usize, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            statistic,
            threshold,
            pass: statistic <= threshold,
            sample_count,
            seed,
            expected: None,
            details: serde_json::Value::Null,
        }
    }

    fn with_details(mut self, details: serde_json::Value) -> Self {
        self.details = details;
        self
    }
}

/// One-sample Kolmogorov-Smirnov distance `sup |F_emp - cdf|`.
pub fn ks_statistic(emp: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let n = emp.count();
    if n < 100 {
        return domain(format!("KS needs at least 100 samples, got {n}"));
    }
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in emp.samples().iter().enumerate() {
        let f = cdf(x);
        if !(0.0..=1.0).contains(&f) {
            return domain(format!("cdf({x}) = {f} lies outside [0, 1]"));
        }
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    Ok(d)
}

/// Asymptotic 1% critical value `1.63 / sqrt(n)` of the one-sample KS distance.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// `P(phi(2^-i) <= y) = y sum_{m<i} (-log y)^m / m!`.
pub fn dyadic_cdf(i: u32, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return 1.0;
    }
    let l = -y.ln();
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..i {
        term *= l / f64::from(m);
        sum += term;
    }
    (y * sum).min(1.0)
}

/// `P(phi(2^-i) > y) = e^-L sum_{m>=i} L^m / m!` with `L = -log y`, summed
/// directly so that small tails keep their relative accuracy.
pub fn dyadic_upper_tail(i: u32, y: f64) -> f64 {
    if y <= 0.0 {
        return 1.0;
    }
    if y >= 1.0 {
        return 0.0;
    }
    let l = -y.ln();
    if l >= f64::from(i) {
        return 1.0 - dyadic_cdf(i, y);
    }
    let log_fact: f64 = (1..=i).map(|m| f64::from(m).ln()).sum();
    let mut term = (-l + f64::from(i) * l.ln() - log_fact).exp();
    let mut sum = 0.0;
    let mut m = i;
    while term > sum * 1e-17 {
        sum += term;
        m += 1;
        term *= l / f64::from(m);
    }
    sum.min(1.0)
}

fn ks_threshold(n: usize, threshold: Option<f64>) -> f64 {
    threshold.unwrap_or_else(|| ks_critical_1pct(n))
}

/// KS of sampled `phi(2^-i)` against [`dyadic_cdf`].
pub fn check_dyadic_law(i: u32, n: usize, seed: u64, threshold: Option<f64>) -> Result<CheckReport> {
    if !(1..=8).contains(&i) {
        return domain(format!("dyadic law check needs 1 <= i <= 8, got {i}"));
    }
    let samples = par_samples(n, |j| {
        let src = sample_source(seed, tag::DYADIC, j);
        sample_chain(i as usize, &src).map(|c| c.last())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let emp = EmpiricalDistribution::new(samples)?;
    let d = ks_statistic(&emp, |y| dyadic_cdf(i, y))?;
    Ok(
        CheckReport::at_most("dyadic-law", d, ks_threshold(n, threshold), n, seed)
            .with_details(json!({ "i": i, "median": emp.median() })),
    )
}

/// Rate at which the first chain value below `y` is also below `x`, against `x / y`.
pub fn check_first_passage(x: f64, y: f64, n: usize, seed: u64) -> Result<CheckReport> {
    if !(x > 0.0 && x <= y && y < 1.0) {
        return domain(format!("first passage needs 0 < x <= y < 1, got x = {x}, y = {y}"));
    }
    if n == 0 {
        return domain("first passage needs at least one sample");
    }
    let hits = par_samples(n, |j| {
        let src = sample_source(seed, tag::FIRST_PASSAGE, j);
        chain_values(&src).find(|&v| v <= y).is_some_and(|v| v <= x)
    });
    let count = hits.iter().filter(|&&h| h).count();
    let rate = count as f64 / n as f64;
    let p = x / y;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    let threshold = 3.0 * sigma;
    Ok(CheckReport {
        name: "first-passage".into(),
        statistic: rate,
        threshold,
        pass: (rate - p).abs() <= threshold,
        sample_count: n,
        seed,
        expected: Some(p),
        details: json!({ "x": x, "y": y, "hits": count }),
    })
}

/// `P(phi(1/3) <= x) = 2x - x^2`, the law with density `2 (1 - x)`.
pub fn third_cdf(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * (2.0 - x)
}

/// Median `1 - sqrt(2)/2` of [`third_cdf`].
pub fn third_median() -> f64 {
    1.0 - std::f64::consts::FRAC_1_SQRT_2
}

/// KS of `phi(1/3)` against `2x - x^2`; also reports the fit against the
/// unnormalized primitive `x - x^2/2` of `1 - x` and the bracket widths.
///
/// Passes when the KS distance is below the threshold and the 99th
/// percentile of the depth-`depth` bracket width is below `1e-3`.
pub fn check_third_density(n: usize, depth: u32, seed: u64, threshold: Option<f64>) -> Result<CheckReport> {
    if depth < 16 {
        return domain(format!("the 1/3 check needs depth >= 16, got {depth}"));
    }
    if depth > 52 {
        return domain(format!("the 1/3 check needs depth <= 52, got {depth}"));
    }
    let pairs = par_samples(n, |j| {
        let src = sample_source(seed, tag::THIRD, j);
        let b = bracket_at(1.0 / 3.0, depth, &src);
        (b.interpolate(1.0 / 3.0), b.width())
    });
    let (values, widths): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let emp = EmpiricalDistribution::new(values)?;
    let widths = EmpiricalDistribution::new(widths)?;
    let d = ks_statistic(&emp, third_cdf)?;
    let d_literal = ks_statistic(&emp, |x| {
        let x = x.clamp(0.0, 1.0);
        x - 0.5 * x * x
    })?;
    let width99 = widths.quantile(0.99);
    let threshold = ks_threshold(n, threshold);
    let mut report = CheckReport::at_most("third-density", d, threshold, n, seed).with_details(json!({
        "depth": depth,
        "median": emp.median(),
        "median_expected": third_median(),
        "ks_unnormalized": d_literal,
        "bracket_width_p99": width99,
    }));
    report.pass = d <= threshold && width99 < 1e-3;
    Ok(report)
}

/// Exact `P(phi(r) not in (r^K1, r^K2))` at `r = 2^-m`.
pub fn dyadic_holder_failure(env: &HolderEnvelope, m: u32) -> f64 {
    let r = 0.5f64.powi(m as i32);
    let (lo, hi) = env.bounds(r);
    dyadic_cdf(m, lo) + dyadic_upper_tail(m, hi)
}

/// Largest `failure / r^2` over dyadic `r = 2^-m`, `m <= max_level`.
pub fn holder_constant(env: &HolderEnvelope, max_level: u32) -> f64 {
    (1..=max_level)
        .map(|m| dyadic_holder_failure(env, m) * 4f64.powi(m as i32))
        .fold(0.0, f64::max)
}

/// Envelope failures of `phi(r)` per `r`, `phi` drawn from `make_source(j)`.
///
/// The statistic is the largest z-score `(rate - C r^2) / sigma` with
/// `sigma^2 = C r^2 (1 - C r^2) / N`; the check passes below 3.
pub fn check_holder_with<S, F>(
    env: &HolderEnvelope,
    r_values: &[f64],
    n: usize,
    depth: u32,
    seed: u64,
    make_source: F,
) -> Result<CheckReport>
where
    S: SplitSource,
    F: Fn(u64) -> S + Sync + Send,
{
    env.validate()?;
    if r_values.is_empty() {
        return domain("holder check needs at least one r");
    }
    if let Some(r) = r_values.iter().find(|r| !(**r > 0.0 && **r <= 0.5)) {
        return domain(format!("holder radii must lie in (0, 1/2], got {r}"));
    }
    if n == 0 {
        return domain("holder check needs at least one sample");
    }
    let fails: Vec<Vec<bool>> = par_samples(n, |j| {
        let src = make_source(j);
        r_values
            .iter()
            .map(|&r| !env.contains(r, value_at(r, depth, &src)))
            .collect()
    });
    let mut rates = Vec::with_capacity(r_values.len());
    let mut z_max = f64::NEG_INFINITY;
    for (idx, &r) in r_values.iter().enumerate() {
        let count = fails.iter().filter(|row| row[idx]).count();
        let rate = count as f64 / n as f64;
        let bound = env.c * r * r;
        let z = if bound >= 1.0 {
            f64::NEG_INFINITY
        } else {
            let sigma = (bound * (1.0 - bound) / n as f64).sqrt();
            (rate - bound) / sigma
        };
        z_max = z_max.max(z);
        rates.push(json!({ "r": r, "failure_rate": rate, "bound": bound.min(1.0), "z": z }));
    }
    Ok(CheckReport::at_most("holder", z_max, 3.0, n, seed).with_details(json!({
        "k1": env.k1,
        "k2": env.k2,
        "c": env.c,
        "depth": depth,
        "per_r": rates,
    })))
}

pub fn check_holder(env: &HolderEnvelope, r_values: &[f64], n: usize, depth: u32, seed: u64) -> Result<CheckReport> {
    check_holder_with(env, r_values, n, depth, seed, |j| sample_source(seed, tag::HOLDER, j))
}

/// Exceedance probabilities `P(|X| > K ||f||)` on a grid of `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceCurve {
    pub k_values: Vec<f64>,
    pub exceedance: Vec<f64>,
    /// Median of `|X| / ||f||`.
    pub median: f64,
}

impl ExceedanceCurve {
    /// `k_values` sorted ascending; `None` picks 8 evenly spaced levels below
    /// the median and 24 from the median to the 99.9th percentile.
    pub fn from_samples(scaled_abs: &EmpiricalDistribution, k_values: Option<&[f64]>) -> Self {
        let ks: Vec<f64> = match k_values {
            Some(ks) => {
                let mut ks = ks.to_vec();
                ks.sort_by(f64::total_cmp);
                ks
            }
            None => {
                let med = scaled_abs.median();
                let top = scaled_abs.quantile(0.999);
                let mut ks: Vec<f64> = (0..8).map(|m| med * m as f64 / 8.0).collect();
                ks.extend((0..24).map(|m| med + (top - med) * m as f64 / 23.0));
                ks.dedup();
                ks
            }
        };
        let exceedance = ks.iter().map(|&k| scaled_abs.exceedance(k)).collect();
        Self {
            k_values: ks,
            exceedance,
            median: scaled_abs.median(),
        }
    }

    pub fn is_non_increasing(&self) -> bool {
        self.exceedance.windows(2).all(|w| w[1] <= w[0])
    }

    /// Points `(K, ln P)` beyond the median with at least `min_count` exceedances.
    fn log_points(&self, sample_count: usize, min_count: usize) -> Vec<(f64, f64)> {
        let floor = min_count as f64 / sample_count.max(1) as f64;
        self.k_values
            .iter()
            .zip(&self.exceedance)
            .filter(|(k, p)| **k >= self.median && **p >= floor && **p > 0.0)
            .map(|(&k, &p)| (k, p.ln()))
            .collect()
    }

    /// Least-squares slope of `ln P` against `K` beyond the median.
    pub fn log_slope(&self, sample_count: usize) -> Option<f64> {
        least_squares_slope(&self.log_points(sample_count, 5))
    }
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `|int (f o phi) D_n| / ||f||` over `[a, b]`, wrapping `a < 0` around the period.
fn kernel_integral_sample(
    f: &TestFunction,
    phi: &DyadicHomeomorphism,
    a: f64,
    b: f64,
    n: KernelOrder,
    q: &QuadratureSpec,
) -> Result<f64> {
    let g = Composed { f, phi };
    let v = if a < 0.0 {
        interval_integral(&g, a + 1.0, 1.0, n, q)? + interval_integral(&g, 0.0, b, n, q)?
    } else {
        interval_integral(&g, a, b, n, q)?
    };
    Ok(v.abs() / f.sup_norm())
}

/// Shared parameters of the head and tail checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySetup {
    pub f: TestFunction,
    pub n: u32,
    pub depth: u32,
    pub samples: usize,
    pub seed: u64,
    pub quadrature: QuadratureSpec,
}

impl DecaySetup {
    fn validate(&self) -> Result<()> {
        self.quadrature.validate()?;
        if !(self.f.sup_norm() > 0.0) {
            return domain("decay checks need a function with positive sup norm");
        }
        if self.samples < 100 {
            return domain(format!("decay checks need at least 100 samples, got {}", self.samples));
        }
        if self.n < 1 {
            return domain("decay checks need n >= 1");
        }
        Ok(())
    }

    /// `|int_a^b (f o phi) D_n| / ||f||` for every sample, in sample order.
    ///
    /// Functions without breakpoints share one node set across samples, with
    /// the kernel folded into the weights; others get a plan per sample that
    /// also follows the preimages of their breakpoints.
    pub fn scaled_integrals(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        self.validate()?;
        if !(a < b && a >= -1.0 && b <= 1.0 && b - a <= 1.0) {
            return domain(format!(
                "integration window [{a}, {b}] must be a sub-interval of one period"
            ));
        }
        let n = KernelOrder(self.n);
        let norm = self.f.sup_norm();
        if self.f.breakpoints(0.0, 1.0).is_empty() {
            let windows = if a < 0.0 {
                vec![(a + 1.0, 1.0), (0.0, b)]
            } else {
                vec![(a, b)]
            };
            let plans = windows
                .iter()
                .map(|&(s, e)| KernelPlan::new(s, e, n, 0.0, self.depth, &self.quadrature))
                .collect::<Result<Vec<_>>>()?;
            return par_samples(self.samples, |j| {
                let src = sample_source(self.seed, tag::KERNEL_INTEGRAL, j);
                let phi = DyadicHomeomorphism::sample(self.depth, &src)?;
                let v: f64 = plans
                    .iter()
                    .map(|p| p.integrate(|t| self.f.eval(phi.evaluate(t))))
                    .sum();
                Ok(v.abs() / norm)
            })
            .into_iter()
            .collect();
        }
        par_samples(self.samples, |j| {
            let src = sample_source(self.seed, tag::KERNEL_INTEGRAL, j);
            let phi = DyadicHomeomorphism::sample(self.depth, &src)?;
            kernel_integral_sample(&self.f, &phi, a, b, n, &self.quadrature)
        })
        .into_iter()
        .collect()
    }
}

/// A decay check with the curve and the samples behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayOutcome {
    pub report: CheckReport,
    pub curve: ExceedanceCurve,
    /// `|integral| / ||f||` per sample.
    pub samples: EmpiricalDistribution,
}

/// Exceedance of `|int_r^{1-r} (f o phi) D_n| / ||f||`.
///
/// Passes when the curve is non-increasing and the slope of `ln P` beyond
/// the median is negative; the statistic is that slope.
pub fn check_tail_decay(setup: &DecaySetup, r: f64, k_values: Option<&[f64]>) -> Result<DecayOutcome> {
    if !(r > 2.0 / f64::from(setup.n) && r < 0.5) {
        return domain(format!("tail check needs 2/n < r < 1/2, got r = {r}, n = {}", setup.n));
    }
    let samples = EmpiricalDistribution::new(setup.scaled_integrals(r, 1.0 - r)?)?;
    let curve = ExceedanceCurve::from_samples(&samples, k_values);
    let slope = curve.log_slope(setup.samples);
    let mut report = CheckReport::at_most("tail-decay", slope.unwrap_or(f64::NAN), 0.0, setup.samples, setup.seed);
    report.pass = curve.is_non_increasing() && slope.is_some_and(|s| s < 0.0);
    report.details = json!({
        "n": setup.n,
        "r": r,
        "depth": setup.depth,
        "tail_ratio": tail_ratio(&samples),
        "curve": curve,
    });
    Ok(DecayOutcome { report, curve, samples })
}

/// Exceedance of `|int_I (f o phi) D_n| / ||f||` with `I = [a, b]`; `a < 0`
/// wraps around the period.
///
/// The same homeomorphisms are integrated over the rest of the period, and
/// the head decays faster when its upper tail, measured in units of its own
/// median by [`tail_ratio`], is shorter than that of the rest. The statistic
/// is the ratio of the two tail ratios; the check passes when the curve is
/// non-increasing and the statistic is below 1. The mean second difference
/// of `ln P` beyond the median is reported as `curvature`.
pub fn check_head_decay(setup: &DecaySetup, a: f64, b: f64, k_values: Option<&[f64]>) -> Result<DecayOutcome> {
    let samples = EmpiricalDistribution::new(setup.scaled_integrals(a, b)?)?;
    let (ca, cb) = if a < 0.0 { (b, a + 1.0) } else { (b - 1.0, a) };
    let rest = EmpiricalDistribution::new(setup.scaled_integrals(ca, cb)?)?;
    let curve = ExceedanceCurve::from_samples(&samples, k_values);
    let curvature = mean_second_difference(&curve.log_points(setup.samples, 5));
    let (rh, rt) = (tail_ratio(&samples), tail_ratio(&rest));
    let mut report = CheckReport::at_most("head-decay", rh / rt, 1.0, setup.samples, setup.seed);
    report.pass = curve.is_non_increasing() && rh / rt < 1.0;
    report.details = json!({
        "n": setup.n,
        "a": a,
        "b": b,
        "depth": setup.depth,
        "tail_ratio": rh,
        "rest_tail_ratio": rt,
        "curvature": curvature,
        "curve": curve,
    });
    Ok(DecayOutcome { report, curve, samples })
}

/// `q_0.99 / q_0.5`: how far the upper tail reaches in units of the median.
pub fn tail_ratio(samples: &EmpiricalDistribution) -> f64 {
    samples.quantile(0.99) / samples.median()
}

/// Mean of second divided differences of `y` over consecutive triples.
fn mean_second_difference(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 3 {
        return None;
    }
    let diffs: Vec<f64> = pts
        .windows(3)
        .map(|w| {
            let s1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            let s2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
            (s2 - s1) / (0.5 * (w[2].0 - w[0].0))
        })
        .collect();
    Some(diffs.iter().sum::<f64>() / diffs.len() as f64)
}

/// Conditional law of `phi(1/2)` given `phi(1/4) = y`: CDF `1 - ln x / ln y` on `[y, 1]`.
pub fn check_conditional_chain(y: f64, n: usize, seed: u64, threshold: Option<f64>) -> Result<CheckReport> {
    if !(y > 0.0 && y < 1.0) {
        return domain(format!("conditioning value must lie in (0, 1), got {y}"));
    }
    let samples = par_samples(n, |j| {
        let src = sample_source(seed, tag::CONDITIONAL, j);
        conditional_chain_sample(2, y, &src).map(|c| c.at_level(1))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let emp = EmpiricalDistribution::new(samples)?;
    let ly = y.ln();
    let d = ks_statistic(&emp, |x| (1.0 - x.clamp(y, 1.0).ln() / ly).clamp(0.0, 1.0))?;
    Ok(
        CheckReport::at_most("conditional-chain", d, ks_threshold(n, threshold), n, seed)
            .with_details(json!({ "y": y })),
    )
}

/// Probability that `max |phi - tau| < eps` on `[2^-i, 1]` given `phi(2^-i) = phi_i`.
///
/// The chain above `2^-i` is drawn conditionally, then each interval
/// `[2^-m, 2^-m+1]` gets an independent rescaled homeomorphism at
/// `local_depth`; a sample is rejected at the first interval leaving the tube.
/// Passes when the rate is positive.
pub fn check_tube_probability(
    i: usize,
    phi_i: f64,
    tau: &PiecewiseLinear,
    eps: f64,
    n: usize,
    local_depth: u32,
    seed: u64,
) -> Result<CheckReport> {
    if !(1..=30).contains(&i) {
        return domain(format!("tube check needs 1 <= i <= 30, got {i}"));
    }
    if !(eps > 0.0) {
        return domain(format!("tube width must be positive, got {eps}"));
    }
    let x_i = 0.5f64.powi(i as i32);
    if (tau.eval(x_i) - phi_i).abs() > 1e-12 || (tau.eval(1.0) - 1.0).abs() > 1e-12 {
        return Err(Error::Construction(format!(
            "tau must map [2^-{i}, 1] onto [{phi_i}, 1]"
        )));
    }
    if n == 0 {
        return domain("tube check needs at least one sample");
    }
    let inside = par_samples(n, |j| -> Result<bool> {
        let src = sample_source(seed, tag::TUBE, j);
        let chain = conditional_chain_sample(i, phi_i, &src.substream(0))?;
        for m in (1..=i).rev() {
            let lo = chain.at_level(m);
            let hi = if m == 1 { 1.0 } else { chain.at_level(m - 1) };
            let seg = conditional_restrict(lo, hi, local_depth, &src.substream(m as u64))?;
            let x0 = 0.5f64.powi(m as i32);
            let cells = seg.values().len() - 1;
            let far = seg.values().iter().enumerate().any(|(k, &v)| {
                let x = x0 + x0 * k as f64 / cells as f64;
                (v - tau.eval(x)).abs() >= eps
            });
            if far {
                return Ok(false);
            }
        }
        Ok(true)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let count = inside.iter().filter(|&&b| b).count();
    let rate = count as f64 / n as f64;
    let mut report = CheckReport::at_most("tube", rate, 0.0, n, seed);
    report.pass = rate > 0.0;
    report.details = json!({ "i": i, "phi_i": phi_i, "eps": eps, "local_depth": local_depth, "hits": count });
    Ok(report)
}

/// `S_n(f o phi; 0)` for every `n` in a grid, with `phi` sampled at `depth`.
///
/// Nodes are the grid points and cell midpoints of `phi`, weights are
/// Simpson's per cell, and `sin((2n+1) pi t_j)` comes from one quarter-wave
/// table shared by all `n`.
pub struct SweepKernel {
    depth: u32,
    table: Vec<f64>,
    inv_sin: Vec<f64>,
}

impl SweepKernel {
    pub fn new(depth: u32) -> Result<Self> {
        if !(1..=24).contains(&depth) {
            return domain(format!("sweep depth must be in 1..=24, got {depth}"));
        }
        // nodes t_j = j / M, M = 2^(depth + 1)
        let m = 1usize << (depth + 1);
        let quarter = m / 2;
        let table = (0..=quarter).map(|k| (PI * k as f64 / m as f64).sin()).collect();
        let inv_sin = (0..=m)
            .map(|j| {
                if j == 0 || j == m {
                    0.0
                } else {
                    1.0 / (PI * j as f64 / m as f64).sin()
                }
            })
            .collect();
        Ok(Self { depth, table, inv_sin })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    fn nodes(&self) -> usize {
        1 << (self.depth + 1)
    }

    /// `sin(pi k / M)` for any integer `k mod 2M`.
    #[inline]
    fn sin_index(&self, k: usize) -> f64 {
        let m = self.nodes();
        let (k, sign) = if k >= m { (k - m, -1.0) } else { (k, 1.0) };
        let k = if k > m / 2 { m - k } else { k };
        sign * self.table[k]
    }

    /// Simpson weights times `g(t_j)`; endpoints kept separately.
    fn weighted(&self, g: &[f64]) -> Vec<f64> {
        let m = self.nodes();
        let h = 1.0 / m as f64;
        (0..=m)
            .map(|j| {
                let w = if j == 0 || j == m {
                    h / 3.0
                } else if j % 2 == 1 {
                    4.0 * h / 3.0
                } else {
                    2.0 * h / 3.0
                };
                w * g[j]
            })
            .collect()
    }

    /// `S_n(g; 0)` for each `n`, from node values `g[j] = g(j / M)`.
    pub fn partial_sums_at_zero(&self, g: &[f64], n_grid: &[u32]) -> Vec<f64> {
        let m = self.nodes();
        assert_eq!(g.len(), m + 1);
        let wg = self.weighted(g);
        let c: Vec<f64> = wg.iter().zip(&self.inv_sin).map(|(a, b)| a * b).collect();
        n_grid
            .iter()
            .map(|&n| {
                let lobes = 2 * n as usize + 1;
                let step = lobes % (2 * m);
                let mut k = 0usize;
                let mut acc = (wg[0] + wg[m]) * lobes as f64;
                for cj in &c[1..m] {
                    k += step;
                    if k >= 2 * m {
                        k -= 2 * m;
                    }
                    acc += cj * self.sin_index(k);
                }
                acc
            })
            .collect()
    }

    /// Node values of `f o phi` for a fresh `phi` from `src`.
    pub fn composed_values<S: SplitSource + ?Sized>(&self, f: &TestFunction, src: &S) -> Result<Vec<f64>> {
        let phi = DyadicHomeomorphism::sample(self.depth, src)?;
        let m = self.nodes();
        Ok((0..=m).map(|j| f.eval(phi.evaluate(j as f64 / m as f64))).collect())
    }
}

/// Partial sums at 0 of one family, one row per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFamily {
    pub name: String,
    pub f: TestFunction,
    /// `sums[s][k] = S_{n_grid[k]}(f o phi_s; 0)`.
    pub sums: Vec<Vec<f64>>,
    /// `sup_k |S_{n_k}|` per sample.
    pub sup_abs: Vec<f64>,
}

impl SweepFamily {
    pub fn quantiles(&self, ps: &[f64]) -> Result<Vec<f64>> {
        let emp = EmpiricalDistribution::new(self.sup_abs.clone())?;
        Ok(ps.iter().map(|&p| emp.quantile(p)).collect())
    }
}

/// Quantile levels reported by sweeps.
pub const SWEEP_QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

/// Runs every family on the same homeomorphisms: sample `s` uses substream `s`.
pub fn sweep_partial_sums(
    families: &[(String, TestFunction)],
    n_grid: &[u32],
    samples: usize,
    depth: u32,
    seed: u64,
) -> Result<Vec<SweepFamily>> {
    if n_grid.is_empty() {
        return domain("sweep needs at least one n");
    }
    if let Some(n) = n_grid.iter().find(|&&n| n > 4096) {
        return domain(format!("sweep orders are limited to 4096, got {n}"));
    }
    if samples == 0 {
        return domain("sweep needs at least one sample");
    }
    let kernel = SweepKernel::new(depth)?;
    let mut out = Vec::with_capacity(families.len());
    for (name, f) in families {
        let sums = par_samples(samples, |s| {
            let src = sample_source(seed, tag::SWEEP, s);
            kernel
                .composed_values(f, &src)
                .map(|g| kernel.partial_sums_at_zero(&g, n_grid))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let sup_abs = sums
            .iter()
            .map(|row| row.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect();
        out.push(SweepFamily {
            name: name.clone(),
            f: f.clone(),
            sums,
            sup_abs,
        });
    }
    Ok(out)
}

/// `n = 1..=16`, then roughly geometric steps of `2^(1/4)` up to `n_max`.
pub fn default_sweep_grid(n_max: u32) -> Vec<u32> {
    let mut grid: Vec<u32> = (1..=n_max.min(16)).collect();
    let mut x = 16.0f64;
    loop {
        x *= 2f64.powf(0.25);
        let n = x.round() as u32;
        if n > n_max {
            break;
        }
        if grid.last() != Some(&n) {
            grid.push(n);
        }
    }
    if grid.last() != Some(&n_max) {
        grid.push(n_max);
    }
    grid
}

/// Sweep depth `ceil(log2 n_max) + 10`, capped at 24.
pub fn default_sweep_depth(n_max: u32) -> u32 {
    let bits = 32 - n_max.max(1).saturating_sub(1).leading_zeros();
    (bits + 10).min(24)
}
