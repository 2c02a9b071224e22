//! The random homeomorphism of [0,1] built by recursive uniform splitting at
//! dyadic midpoints.
//!
//! Level `n` assigns the odd nodes `k 2^-n` by
//! `phi(k 2^-n) = phi((k-1) 2^-n) + X_{n,k} (phi((k+1) 2^-n) - phi((k-1) 2^-n))`
//! with independent uniform `X_{n,k}`. The splitting variables come from a
//! [`SplitSource`]; with a [`RandomSource`] the variable `X_{n,k}` lives at a
//! fixed counter, so full grids, refinements and lazily evaluated paths agree
//! bitwise.

use std::io::Write;

use crate::error::{domain, Error, Result};
use crate::output::fmt_f64;
use crate::rng::RandomSource;

/// Largest grid depth held in memory (2^26 + 1 values).
pub const MAX_DEPTH: u32 = 26;

/// Redraws attempted when a split collapses onto an endpoint in floating point.
const MAX_REDRAWS: u32 = 64;

/// Counter of `X_{level,k}` inside a stream: level-major, `k` odd.
#[inline]
pub fn split_counter(level: u32, k: u64) -> u64 {
    debug_assert!(level >= 1 && k % 2 == 1);
    (1u64 << (level - 1)) - 1 + (k >> 1)
}

/// Supplier of the splitting variables `X_{n,k}`.
///
/// `attempt > 0` asks for a redraw after a floating-point collapse.
pub trait SplitSource {
    fn split(&self, level: u32, k: u64, attempt: u32) -> f64;

    /// First-attempt variables of one level, `out[j] = X_{level, 2j+1}`.
    fn fill_level(&self, level: u32, out: &mut [f64]) {
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = self.split(level, 2 * j as u64 + 1, 0);
        }
    }
}

impl SplitSource for RandomSource {
    fn split(&self, level: u32, k: u64, attempt: u32) -> f64 {
        self.uniform_at_lane(u64::from(attempt), split_counter(level, k))
    }

    fn fill_level(&self, level: u32, out: &mut [f64]) {
        let mut stream = self.generator_at(0, split_counter(level, 1));
        for slot in out.iter_mut() {
            *slot = stream.next_uniform();
        }
    }
}

impl<S: SplitSource + ?Sized> SplitSource for &S {
    fn split(&self, level: u32, k: u64, attempt: u32) -> f64 {
        (**self).split(level, k, attempt)
    }

    fn fill_level(&self, level: u32, out: &mut [f64]) {
        (**self).fill_level(level, out)
    }
}

/// Every variable equal to the same constant; `FixedSplit(0.5)` yields the identity.
#[derive(Debug, Clone, Copy)]
pub struct FixedSplit(pub f64);

impl SplitSource for FixedSplit {
    fn split(&self, _level: u32, _k: u64, _attempt: u32) -> f64 {
        self.0
    }
}

/// Variables given by a closure of `(level, k, attempt)`.
pub struct SplitFn<F>(pub F);

impl<F: Fn(u32, u64, u32) -> f64> SplitSource for SplitFn<F> {
    fn split(&self, level: u32, k: u64, attempt: u32) -> f64 {
        (self.0)(level, k, attempt)
    }
}

/// New node value strictly between `left` and `right` when one is representable.
///
/// A collapse onto an endpoint redraws `X_{level,k}` on the next lane. When
/// `left` and `right` are adjacent doubles there is no interior point and
/// `left` is returned.
pub(crate) fn split_value<S: SplitSource + ?Sized>(
    src: &S,
    level: u32,
    k: u64,
    first: f64,
    left: f64,
    right: f64,
) -> f64 {
    if !(left < right) || left.next_up() >= right {
        return left;
    }
    let mut x = first;
    let mut attempt = 0;
    loop {
        let v = left + x * (right - left);
        if left < v && v < right {
            return v;
        }
        attempt += 1;
        if attempt > MAX_REDRAWS {
            let mid = left + 0.5 * (right - left);
            return if left < mid && mid < right { mid } else { left.next_up() };
        }
        x = src.split(level, k, attempt);
    }
}

#[inline]
fn interpolate(lo: f64, hi: f64, frac: f64) -> f64 {
    (lo + frac * (hi - lo)).clamp(lo, hi)
}

/// Grid values `values[k] = phi(k 2^-depth)` of a sampled homeomorphism.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicHomeomorphism {
    depth: u32,
    values: Vec<f64>,
}

impl DyadicHomeomorphism {
    /// The identity map sampled at `depth`.
    pub fn identity(depth: u32) -> Result<Self> {
        check_depth(depth)?;
        let cells = 1u64 << depth;
        let values = (0..=cells).map(|k| k as f64 / cells as f64).collect();
        Ok(Self { depth, values })
    }

    /// Wraps explicit grid values, validating length, endpoints and order.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let cells = values.len().saturating_sub(1);
        if cells == 0 || !cells.is_power_of_two() {
            return domain(format!("grid must hold 2^N + 1 values, got {}", values.len()));
        }
        let depth = cells.trailing_zeros();
        check_depth(depth)?;
        if values[0] != 0.0 || values[cells] != 1.0 {
            return domain("grid values must start at 0 and end at 1");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("grid values must be finite");
        }
        if let Some(k) = values.windows(2).position(|w| w[1] < w[0]) {
            return domain(format!("grid values decrease at k = {}", k + 1));
        }
        Ok(Self { depth, values })
    }

    /// Draws the grid at `depth` from the splitting variables of `src`.
    pub fn sample<S: SplitSource + ?Sized>(depth: u32, src: &S) -> Result<Self> {
        Self {
            depth: 0,
            values: vec![0.0, 1.0],
        }
        .refine(depth, src)
    }

    /// Continues the construction for `extra_depth` more levels.
    ///
    /// Existing grid values are copied unchanged.
    pub fn refine<S: SplitSource + ?Sized>(&self, extra_depth: u32, src: &S) -> Result<Self> {
        if extra_depth == 0 {
            return Ok(self.clone());
        }
        let depth = self.depth + extra_depth;
        check_depth(depth)?;
        let cells = 1usize << depth;
        let mut values = vec![0.0; cells + 1];
        let coarse_stride = 1usize << extra_depth;
        for (k, &v) in self.values.iter().enumerate() {
            values[k * coarse_stride] = v;
        }
        let mut xs = Vec::new();
        for level in self.depth + 1..=depth {
            let nodes = 1usize << (level - 1);
            xs.resize(nodes, 0.0);
            src.fill_level(level, &mut xs);
            let stride = 1usize << (depth - level);
            for (j, &x) in xs.iter().enumerate() {
                let pos = (2 * j + 1) * stride;
                let left = values[pos - stride];
                let right = values[pos + stride];
                values[pos] = split_value(src, level, 2 * j as u64 + 1, x, left, right);
            }
        }
        Ok(Self { depth, values })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cells(&self) -> usize {
        self.values.len() - 1
    }

    /// `k 2^-depth`, exact.
    pub fn grid_point(&self, k: usize) -> f64 {
        k as f64 / self.cells() as f64
    }

    /// Piecewise-linear interpolation of the grid values.
    pub fn evaluate(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= 0.0 {
            return self.values[0];
        }
        let cells = self.cells();
        if x >= 1.0 {
            return self.values[cells];
        }
        let pos = x * cells as f64;
        let k = (pos.floor() as usize).min(cells - 1);
        interpolate(self.values[k], self.values[k + 1], pos - k as f64)
    }

    /// Preimage under the interpolated map; grid values map back to grid points exactly.
    pub fn invert(&self, y: f64) -> f64 {
        if y.is_nan() {
            return f64::NAN;
        }
        let cells = self.cells();
        if y <= self.values[0] {
            return 0.0;
        }
        if y >= self.values[cells] {
            return 1.0;
        }
        // first index with value > y; values[k] <= y < values[k + 1]
        let k = self.values.partition_point(|&v| v <= y) - 1;
        let (lo, hi) = (self.values[k], self.values[k + 1]);
        let frac = if hi > lo { ((y - lo) / (hi - lo)).min(1.0) } else { 0.0 };
        (k as f64 + frac) / cells as f64
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] < w[1])
    }

    /// Cells whose endpoints coincide in floating point.
    pub fn degenerate_cells(&self) -> usize {
        self.values.windows(2).filter(|w| w[0] >= w[1]).count()
    }

    /// CSV with header `k,x,phi_x`, rows in increasing `k`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "k,x,phi_x")?;
        for (k, &v) in self.values.iter().enumerate() {
            writeln!(out, "{},{},{}", k, fmt_f64(self.grid_point(k)), fmt_f64(v))?;
        }
        Ok(())
    }
}

fn check_depth(depth: u32) -> Result<()> {
    if depth > MAX_DEPTH {
        return domain(format!("depth {depth} exceeds the maximum {MAX_DEPTH}"));
    }
    Ok(())
}

/// The depth-`depth` cell containing a point, with its endpoint values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub depth: u32,
    pub cell: u64,
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn x_lo(&self) -> f64 {
        self.cell as f64 / (1u64 << self.depth) as f64
    }

    pub fn x_hi(&self) -> f64 {
        (self.cell + 1) as f64 / (1u64 << self.depth) as f64
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Same interpolation rule as [`DyadicHomeomorphism::evaluate`].
    pub fn interpolate(&self, x: f64) -> f64 {
        let cells = (1u64 << self.depth) as f64;
        if x >= 1.0 {
            return self.hi;
        }
        let frac = (x * cells - self.cell as f64).clamp(0.0, 1.0);
        interpolate(self.lo, self.hi, frac)
    }
}

/// Samples only the nested cells containing `x`, down to `depth`.
///
/// Agrees bitwise with the corresponding cell of a full sample from the same source.
pub fn bracket_at<S: SplitSource + ?Sized>(x: f64, depth: u32, src: &S) -> Bracket {
    assert!(depth < 63, "bracket depth must be below 63");
    let cells = 1u64 << depth;
    let cell = if x >= 1.0 {
        cells - 1
    } else if x <= 0.0 {
        0
    } else {
        ((x * cells as f64).floor() as u64).min(cells - 1)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for level in 1..=depth {
        let parent = cell >> (depth - level + 1);
        let k = 2 * parent + 1;
        let first = src.split(level, k, 0);
        let mid = split_value(src, level, k, first, lo, hi);
        if (cell >> (depth - level)) & 1 == 0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Bracket { depth, cell, lo, hi }
}

/// `phi(x)` through a lazily sampled bracket.
pub fn value_at<S: SplitSource + ?Sized>(x: f64, depth: u32, src: &S) -> f64 {
    bracket_at(x, depth, src).interpolate(x)
}

/// Endless iterator over `phi(2^-1), phi(2^-2), ...`.
pub struct ChainIter<S> {
    src: S,
    level: u32,
    value: f64,
}

impl<S: SplitSource> Iterator for ChainIter<S> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if self.level >= 62 {
            return None;
        }
        self.level += 1;
        let first = self.src.split(self.level, 1, 0);
        self.value = split_value(&self.src, self.level, 1, first, 0.0, self.value);
        Some(self.value)
    }
}

pub fn chain_values<S: SplitSource>(src: S) -> ChainIter<S> {
    ChainIter {
        src,
        level: 0,
        value: 1.0,
    }
}

/// The values `phi(2^-1) > ... > phi(2^-i)`; `chain[m-1] = phi(2^-m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicChain {
    chain: Vec<f64>,
}

impl DyadicChain {
    pub fn new(chain: Vec<f64>) -> Result<Self> {
        if chain.is_empty() {
            return domain("a chain needs at least one value");
        }
        if chain.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return domain("chain values must lie in (0, 1)");
        }
        if chain.windows(2).any(|w| w[1] >= w[0]) {
            return domain("chain values must be strictly decreasing");
        }
        Ok(Self { chain })
    }

    /// Number of levels `i`.
    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.chain
    }

    /// `phi(2^-m)` for `1 <= m <= i`.
    pub fn at_level(&self, m: usize) -> f64 {
        self.chain[m - 1]
    }

    pub fn last(&self) -> f64 {
        self.chain[self.chain.len() - 1]
    }
}

/// Unconditional chain `phi(2^-1..2^-i)`, consistent with full samples from `src`.
pub fn sample_chain<S: SplitSource>(i: usize, src: S) -> Result<DyadicChain> {
    if !(1..=62).contains(&i) {
        return domain(format!("chain length must be in 1..=62, got {i}"));
    }
    DyadicChain::new(chain_values(src).take(i).collect())
}

/// Exact draw of `(phi(2^-1), ..., phi(2^-i))` given `phi(2^-i) = y`.
///
/// `-log phi(2^-m)` are partial sums of i.i.d. unit exponentials, so given the
/// total `-log y` the first `i - 1` partial sums are `-log y` times the order
/// statistics of `i - 1` uniforms.
pub fn conditional_chain_sample(i: usize, y: f64, src: &RandomSource) -> Result<DyadicChain> {
    if i < 1 {
        return domain("conditional chain needs i >= 1");
    }
    if !(y > 0.0 && y < 1.0) {
        return domain(format!("conditioning value must lie in (0, 1), got {y}"));
    }
    if i == 1 {
        return DyadicChain::new(vec![y]);
    }
    let log_y = y.ln();
    let mut u = vec![0.0; i - 1];
    for lane in 0..=u64::from(MAX_REDRAWS) {
        let mut stream = src.generator_at(lane, 0);
        for slot in u.iter_mut() {
            *slot = stream.next_uniform();
        }
        u.sort_unstable_by(f64::total_cmp);
        let mut chain: Vec<f64> = u.iter().map(|&t| (log_y * t).exp()).collect();
        chain.push(y);
        if let Ok(c) = DyadicChain::new(chain) {
            return Ok(c);
        }
    }
    Err(Error::Construction(format!(
        "no strictly decreasing chain representable for i = {i}, y = {y}"
    )))
}

/// A fresh homeomorphism rescaled onto `[a, b]`: the law of `phi` on a dyadic
/// interval given its endpoint values.
#[derive(Debug, Clone, PartialEq)]
pub struct HomeoSegment {
    a: f64,
    b: f64,
    depth: u32,
    values: Vec<f64>,
}

impl HomeoSegment {
    pub fn range(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Values at the local grid `k 2^-depth` of the underlying interval.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at local coordinate `u` in [0, 1].
    pub fn evaluate_local(&self, u: f64) -> f64 {
        let cells = self.values.len() - 1;
        if u <= 0.0 {
            return self.a;
        }
        if u >= 1.0 {
            return self.b;
        }
        let pos = u * cells as f64;
        let k = (pos.floor() as usize).min(cells - 1);
        interpolate(self.values[k], self.values[k + 1], pos - k as f64)
    }
}

pub fn conditional_restrict<S: SplitSource + ?Sized>(a: f64, b: f64, depth: u32, src: &S) -> Result<HomeoSegment> {
    if !(a >= 0.0 && b <= 1.0 && a < b) {
        return domain(format!("need 0 <= a < b <= 1, got a = {a}, b = {b}"));
    }
    let phi = DyadicHomeomorphism::sample(depth, src)?;
    let span = b - a;
    let mut values: Vec<f64> = phi.values.iter().map(|&v| (a + span * v).clamp(a, b)).collect();
    values[0] = a;
    let last = values.len() - 1;
    values[last] = b;
    Ok(HomeoSegment { a, b, depth, values })
}

/// Envelope `r^K1 < phi(r) < r^K2`, violated with probability below `C r^2`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HolderEnvelope {
    pub k1: f64,
    pub k2: f64,
    pub c: f64,
}

impl HolderEnvelope {
    pub fn new(k1: f64, k2: f64, c: f64) -> Result<Self> {
        let env = Self { k1, k2, c };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k2 > 0.0 && self.k2 < 1.0 && self.k1 > 1.0) {
            return Err(Error::Config(format!(
                "holder exponents need 0 < K2 < 1 < K1, got K1 = {}, K2 = {}",
                self.k1, self.k2
            )));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!(
                "holder constant C must be positive, got {}",
                self.c
            )));
        }
        Ok(())
    }

    /// `(r^K1, r^K2)`.
    pub fn bounds(&self, r: f64) -> (f64, f64) {
        (r.powf(self.k1), r.powf(self.k2))
    }

    pub fn contains(&self, r: f64, value: f64) -> bool {
        let (lo, hi) = self.bounds(r);
        lo < value && value < hi
    }
}

impl Default for HolderEnvelope {
    /// `K1 = 8`, `K2 = 0.1`. The exact failure probability at `r = 2^-m` is
    /// largest at `m = 1`, where it is `0.2835 r^2`, so `C = 0.3` covers every
    /// dyadic level; see `verify::holder_constant`.
    fn default() -> Self {
        Self {
            k1: 8.0,
            k2: 0.1,
            c: 0.3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_zero_is_the_two_endpoints() {
        let phi = DyadicHomeomorphism::sample(0, &RandomSource::new(1)).unwrap();
        assert_eq!(phi.values(), &[0.0, 1.0]);
    }

    #[test]
    fn half_splits_give_the_identity() {
        let phi = DyadicHomeomorphism::sample(10, &FixedSplit(0.5)).unwrap();
        assert_eq!(phi, DyadicHomeomorphism::identity(10).unwrap());
    }

    #[test]
    fn first_split_is_phi_of_one_half() {
        let src = SplitFn(|level: u32, k: u64, _| {
            assert_eq!((level, k), (1, 1));
            0.3
        });
        let phi = DyadicHomeomorphism::sample(1, &src).unwrap();
        assert_eq!(phi.values(), &[0.0, 0.3, 1.0]);
    }

    #[test]
    fn second_level_follows_the_recursion() {
        let src = SplitFn(|level: u32, k: u64, _| match (level, k) {
            (1, 1) => 0.4,
            (2, 1) => 0.5,
            (2, 3) => 0.25,
            _ => unreachable!(),
        });
        let phi = DyadicHomeomorphism::sample(2, &src).unwrap();
        assert_eq!(phi.values(), &[0.0, 0.2, 0.4, 0.4 + 0.25 * 0.6, 1.0]);
    }

    #[test]
    fn refine_keeps_coarse_values_bitwise() {
        let src = RandomSource::new(3).substream(11);
        let coarse = DyadicHomeomorphism::sample(6, &src).unwrap();
        let fine = coarse.refine(3, &src).unwrap();
        for (k, &v) in coarse.values().iter().enumerate() {
            assert_eq!(fine.values()[k * 8].to_bits(), v.to_bits());
        }
        assert_eq!(fine, DyadicHomeomorphism::sample(9, &src).unwrap());
        assert_eq!(coarse.refine(0, &src).unwrap(), coarse);
    }

    #[test]
    fn sample_is_valid_and_deterministic() {
        let src = RandomSource::new(42);
        let a = DyadicHomeomorphism::sample(12, &src).unwrap();
        let b = DyadicHomeomorphism::sample(12, &src).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values()[0], 0.0);
        assert_eq!(a.values()[4096], 1.0);
        assert!(a.is_strictly_increasing());
        assert!(DyadicHomeomorphism::from_values(a.values().to_vec()).is_ok());
    }

    #[test]
    fn too_deep_is_rejected() {
        assert!(DyadicHomeomorphism::sample(MAX_DEPTH + 1, &FixedSplit(0.5)).is_err());
    }

    #[test]
    fn from_values_validation() {
        assert!(DyadicHomeomorphism::from_values(vec![0.0, 0.5, 1.0]).is_ok());
        assert!(DyadicHomeomorphism::from_values(vec![0.0, 0.5, 0.7, 1.0]).is_err());
        assert!(DyadicHomeomorphism::from_values(vec![0.1, 0.5, 1.0]).is_err());
        assert!(DyadicHomeomorphism::from_values(vec![0.0, 0.6, 0.5, 0.7, 1.0]).is_err());
    }

    #[test]
    fn collapsed_split_is_redrawn() {
        // the first draw lands on the left endpoint, the redraw does not
        let src = SplitFn(|_, _, attempt| if attempt == 0 { 0.0 } else { 0.25 });
        let phi = DyadicHomeomorphism::sample(1, &src).unwrap();
        assert_eq!(phi.values(), &[0.0, 0.25, 1.0]);
    }

    #[test]
    fn adjacent_doubles_cannot_be_split() {
        let left = 0.5f64;
        let right = left.next_up();
        assert_eq!(split_value(&FixedSplit(0.5), 3, 1, 0.5, left, right), left);
        let v = split_value(&FixedSplit(0.5), 3, 1, 0.5, left, right.next_up());
        assert_eq!(v, right);
    }

    #[test]
    fn evaluate_is_exact_on_the_grid_and_linear_between() {
        let id = DyadicHomeomorphism::identity(8).unwrap();
        assert_eq!(id.evaluate(0.37), 0.37);
        let phi = DyadicHomeomorphism::sample(8, &RandomSource::new(9)).unwrap();
        for k in 0..=256 {
            assert_eq!(phi.evaluate(phi.grid_point(k)), phi.values()[k]);
        }
        let mid = phi.evaluate(2.5 / 256.0);
        assert!((mid - 0.5 * (phi.values()[2] + phi.values()[3])).abs() < 1e-15);
    }

    #[test]
    fn invert_grid_values_and_identity() {
        let id = DyadicHomeomorphism::identity(6).unwrap();
        assert_eq!(id.invert(0.25), 0.25);
        let phi = DyadicHomeomorphism::sample(8, &RandomSource::new(10)).unwrap();
        for k in 0..=256 {
            assert_eq!(phi.invert(phi.values()[k]), phi.grid_point(k));
        }
    }

    #[test]
    fn bracket_matches_full_sample() {
        let src = RandomSource::new(77).substream(5);
        let phi = DyadicHomeomorphism::sample(14, &src).unwrap();
        for &x in &[0.0, 1.0 / 3.0, 0.5, 0.123456, 0.999, 1.0] {
            let b = bracket_at(x, 14, &src);
            assert_eq!(b.lo.to_bits(), phi.values()[b.cell as usize].to_bits());
            assert_eq!(b.hi.to_bits(), phi.values()[b.cell as usize + 1].to_bits());
            assert_eq!(b.interpolate(x).to_bits(), phi.evaluate(x).to_bits());
            assert!(b.x_lo() <= x && x <= b.x_hi());
        }
    }

    #[test]
    fn chain_matches_full_sample() {
        let src = RandomSource::new(8);
        let phi = DyadicHomeomorphism::sample(10, &src).unwrap();
        let chain = sample_chain(10, &src).unwrap();
        for m in 1..=10 {
            assert_eq!(chain.at_level(m), phi.values()[1 << (10 - m)]);
        }
    }

    #[test]
    fn conditional_chain_edge_cases() {
        let src = RandomSource::new(1);
        assert_eq!(conditional_chain_sample(1, 0.3, &src).unwrap().values(), &[0.3]);
        let c = conditional_chain_sample(6, 0.01, &src).unwrap();
        assert_eq!(c.len(), 6);
        assert_eq!(c.last().to_bits(), 0.01f64.to_bits());
        assert!(c.values().windows(2).all(|w| w[0] > w[1]));
        assert!(conditional_chain_sample(0, 0.3, &src).is_err());
        assert!(conditional_chain_sample(2, 1.0, &src).is_err());
        assert!(conditional_chain_sample(2, 0.0, &src).is_err());
    }

    #[test]
    fn restrict_endpoints_exact() {
        let seg = conditional_restrict(0.2, 0.7, 5, &RandomSource::new(4)).unwrap();
        assert_eq!(seg.values()[0], 0.2);
        assert_eq!(seg.values()[32], 0.7);
        assert_eq!(seg.evaluate_local(0.0), 0.2);
        assert_eq!(seg.evaluate_local(1.0), 0.7);
        assert!(seg.values().windows(2).all(|w| w[0] <= w[1]));
        assert!(conditional_restrict(0.5, 0.5, 3, &RandomSource::new(4)).is_err());
        assert!(conditional_restrict(0.6, 0.5, 3, &RandomSource::new(4)).is_err());
    }

    #[test]
    fn restrict_unit_interval_is_plain_sample() {
        let src = RandomSource::new(12);
        let seg = conditional_restrict(0.0, 1.0, 7, &src).unwrap();
        let phi = DyadicHomeomorphism::sample(7, &src).unwrap();
        assert_eq!(seg.values(), phi.values());
    }

    #[test]
    fn holder_envelope_validation() {
        assert!(HolderEnvelope::new(4.0, 0.25, 1.0).is_ok());
        assert!(HolderEnvelope::new(4.0, 1.5, 1.0).is_err());
        assert!(HolderEnvelope::new(0.5, 0.25, 1.0).is_err());
        assert!(HolderEnvelope::new(4.0, 0.25, 0.0).is_err());
        let env = HolderEnvelope::default();
        assert!(env.contains(0.25, 0.25));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let phi = DyadicHomeomorphism::identity(1).unwrap();
        let mut buf = Vec::new();
        phi.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,x,phi_x");
        assert_eq!(lines.len(), 4);
        let cols: Vec<f64> = lines[2].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(cols, vec![1.0, 0.5, 0.5]);
    }
}
