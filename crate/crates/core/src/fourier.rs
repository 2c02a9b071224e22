//! Dirichlet kernels, partial Fourier sums by composite Simpson quadrature and
//! the aligned scene where a time change turns an oscillatory piece into the
//! kernel's own frequency.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::homeo::DyadicHomeomorphism;
use crate::testfn::TestFunction;

/// Order `n` of the Dirichlet kernel `D_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KernelOrder(pub u32);

impl KernelOrder {
    pub fn n(self) -> u32 {
        self.0
    }

    /// `2n + 1`, the number of lobes of `D_n` on one period.
    pub fn lobes(self) -> f64 {
        2.0 * f64::from(self.0) + 1.0
    }
}

/// `D_n(x) = sin((2n+1) pi x) / sin(pi x)`, with the value `2n+1` at integers.
pub fn dirichlet_eval(n: KernelOrder, x: f64) -> f64 {
    if !x.is_finite() {
        return f64::NAN;
    }
    // D_n is 1-periodic and even; reducing first keeps the argument small
    let v = x - x.round();
    if v == 0.0 {
        return n.lobes();
    }
    (n.lobes() * PI * v).sin() / (PI * v).sin()
}

/// Function integrated against the kernel.
pub trait Integrand: Sync {
    fn value(&self, t: f64) -> f64;

    /// Points in `[lo, hi]` where the integrand may fail to be smooth.
    fn breakpoints(&self, _lo: f64, _hi: f64) -> Vec<f64> {
        Vec::new()
    }

    /// Upper estimate of oscillation cycles on `[a, b]`.
    fn cycles(&self, _a: f64, _b: f64) -> f64 {
        0.0
    }
}

impl Integrand for TestFunction {
    fn value(&self, t: f64) -> f64 {
        self.eval(t)
    }

    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        TestFunction::breakpoints(self, lo, hi)
    }

    fn cycles(&self, a: f64, b: f64) -> f64 {
        TestFunction::cycles(self, a, b)
    }
}

/// A closure with a stated frequency in cycles per unit length.
pub struct FnIntegrand<F> {
    pub f: F,
    pub frequency: f64,
}

impl<F: Fn(f64) -> f64 + Sync> Integrand for FnIntegrand<F> {
    fn value(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    fn cycles(&self, a: f64, b: f64) -> f64 {
        self.frequency * (b - a).abs()
    }
}

/// `f o phi`, with the grid nodes of `phi` and the preimages of the
/// breakpoints of `f` as its own breakpoints.
pub struct Composed<'a, F: ?Sized> {
    pub f: &'a F,
    pub phi: &'a DyadicHomeomorphism,
}

impl<F: Integrand + ?Sized> Integrand for Composed<'_, F> {
    fn value(&self, t: f64) -> f64 {
        self.f.value(self.phi.evaluate(t))
    }

    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let cells = self.phi.cells();
        let first = (lo * cells as f64).ceil().max(0.0) as usize;
        let last = ((hi * cells as f64).floor() as usize).min(cells);
        let mut pts: Vec<f64> = (first..=last).map(|k| self.phi.grid_point(k)).collect();
        let (ylo, yhi) = (self.phi.evaluate(lo), self.phi.evaluate(hi));
        pts.extend(
            self.f
                .breakpoints(ylo, yhi)
                .into_iter()
                .map(|y| self.phi.invert(y))
                .filter(|&t| t >= lo && t <= hi),
        );
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    fn cycles(&self, a: f64, b: f64) -> f64 {
        self.f.cycles(self.phi.evaluate(a), self.phi.evaluate(b))
    }
}

/// Resolution rule for the Simpson plans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Nodes per kernel lobe and per half-cycle of the integrand.
    pub points_per_oscillation: u32,
    /// Plans needing more nodes than this are refused.
    pub max_nodes: usize,
}

impl QuadratureSpec {
    pub fn new(points_per_oscillation: u32) -> Result<Self> {
        let q = Self {
            points_per_oscillation,
            ..Self::default()
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_oscillation < 8 {
            return Err(Error::Config(format!(
                "points_per_oscillation must be at least 8, got {}",
                self.points_per_oscillation
            )));
        }
        Ok(())
    }

    /// Even subinterval count for a segment carrying `lobes` half-oscillations.
    pub fn subintervals(&self, lobes: f64) -> usize {
        let m = (f64::from(self.points_per_oscillation) * lobes).ceil().max(2.0) as usize;
        m + (m & 1)
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            points_per_oscillation: 16,
            max_nodes: 1 << 27,
        }
    }
}

/// Nodes and weights of a composite Simpson rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraturePlan {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadraturePlan {
    /// Simpson on every segment between consecutive points of
    /// `{a} + breakpoints + {b}`, with `subintervals(s, e)` (rounded up to
    /// even) subintervals on `[s, e]`.
    pub fn composite_simpson(
        a: f64,
        b: f64,
        breakpoints: &[f64],
        mut subintervals: impl FnMut(f64, f64) -> usize,
        max_nodes: usize,
    ) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return domain(format!("need a finite interval a <= b, got [{a}, {b}]"));
        }
        let mut cuts = Vec::with_capacity(breakpoints.len() + 2);
        cuts.push(a);
        cuts.extend(breakpoints.iter().copied().filter(|&t| t > a && t < b));
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        if cuts.len() < 2 {
            return Ok(Self { nodes, weights });
        }
        nodes.push(a);
        weights.push(0.0);
        for w in cuts.windows(2) {
            let (s, e) = (w[0], w[1]);
            let mut m = subintervals(s, e).max(2);
            m += m & 1;
            if nodes.len() + m > max_nodes {
                return Err(Error::Config(format!(
                    "quadrature needs more than {max_nodes} nodes; lower the resolution or raise the limit"
                )));
            }
            let h = (e - s) / m as f64;
            let third = h / 3.0;
            *weights.last_mut().unwrap() += third;
            for i in 1..m {
                nodes.push(s + (e - s) * (i as f64 / m as f64));
                weights.push(if i % 2 == 1 { 4.0 * third } else { 2.0 * third });
            }
            nodes.push(e);
            weights.push(third);
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weighted sum in node order.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }
}

/// `int_a^b f(t) D_n(center - t) dt`.
pub fn interval_integral_at<F: Integrand + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    n: KernelOrder,
    center: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    q.validate()?;
    if !(a <= b) {
        return domain(format!("need a <= b, got [{a}, {b}]"));
    }
    let breaks = f.breakpoints(a, b);
    let plan = QuadraturePlan::composite_simpson(
        a,
        b,
        &breaks,
        |s, e| q.subintervals(n.lobes() * (e - s) + 2.0 * f.cycles(s, e)),
        q.max_nodes,
    )?;
    Ok(plan.integrate(|t| f.value(t) * dirichlet_eval(n, center - t)))
}

/// Simpson nodes on `[a, b]` with kernel values folded into the weights, for
/// integrands that are smooth inside each cell of the depth-`depth` dyadic grid.
///
/// Built once and reused for every homeomorphism sampled at that depth.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelPlan {
    pub nodes: Vec<f64>,
    /// `w_j D_n(center - t_j)`.
    pub kernel_weights: Vec<f64>,
}

impl KernelPlan {
    pub fn new(a: f64, b: f64, n: KernelOrder, center: f64, depth: u32, q: &QuadratureSpec) -> Result<Self> {
        q.validate()?;
        if depth > 30 {
            return domain(format!("kernel plan depth must be at most 30, got {depth}"));
        }
        let cells = (1u64 << depth) as f64;
        let first = (a * cells).ceil() as i64;
        let last = (b * cells).floor() as i64;
        let breaks: Vec<f64> = (first..=last).map(|k| k as f64 / cells).collect();
        let plan =
            QuadraturePlan::composite_simpson(a, b, &breaks, |s, e| q.subintervals(n.lobes() * (e - s)), q.max_nodes)?;
        let kernel_weights = plan
            .nodes
            .iter()
            .zip(&plan.weights)
            .map(|(&t, &w)| w * dirichlet_eval(n, center - t))
            .collect();
        Ok(Self {
            nodes: plan.nodes,
            kernel_weights,
        })
    }

    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.kernel_weights)
            .map(|(&t, &w)| w * g(t))
            .sum()
    }
}

/// `int_a^b f(t) D_n(t) dt`.
pub fn interval_integral<F: Integrand + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    n: KernelOrder,
    q: &QuadratureSpec,
) -> Result<f64> {
    interval_integral_at(f, a, b, n, 0.0, q)
}

/// `S_n(f; x) = int_0^1 f(t) D_n(x - t) dt`.
pub fn partial_sum<F: Integrand + ?Sized>(f: &F, n: KernelOrder, x: f64, q: &QuadratureSpec) -> Result<f64> {
    if !x.is_finite() {
        return domain("evaluation point must be finite");
    }
    interval_integral_at(f, 0.0, 1.0, n, x, q)
}

/// `|D_m1(x) - D_m2(x)|` from the product form
/// `2 cos((m1+m2+1) pi x) sin((m1-m2) pi x) / sin(pi x)`.
pub fn kernel_diff_abs(m1: u32, m2: u32, x: f64) -> f64 {
    let d = f64::from(m1) - f64::from(m2);
    let v = x - x.round();
    if v == 0.0 {
        return 2.0 * d.abs();
    }
    let s = f64::from(m1) + f64::from(m2) + 1.0;
    (2.0 * (s * PI * v).cos() * (d * PI * v).sin() / (PI * v).sin()).abs()
}

/// `max |D_m1 - D_m2|` on the grid `j / grid`, `j = 0..=grid`.
pub fn kernel_diff_max(m1: u32, m2: u32, grid: usize) -> Result<f64> {
    if m1 < m2 {
        return domain(format!("kernel difference needs m1 >= m2, got {m1} < {m2}"));
    }
    if grid == 0 {
        return domain("kernel difference grid needs at least one cell");
    }
    Ok((0..=grid)
        .map(|j| kernel_diff_abs(m1, m2, j as f64 / grid as f64))
        .fold(0.0, f64::max))
}

/// Increasing piecewise-linear map through the given nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl PiecewiseLinear {
    /// Nodes must be non-decreasing in both coordinates; repeated nodes are merged.
    pub fn new(nodes: &[(f64, f64)]) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Construction("a piecewise-linear map needs two nodes".into()));
        }
        let mut xs = Vec::with_capacity(nodes.len());
        let mut ys = Vec::with_capacity(nodes.len());
        for &(x, y) in nodes {
            if let (Some(&px), Some(&py)) = (xs.last(), ys.last()) {
                if x == px && y == py {
                    continue;
                }
                if !(x > px && y >= py) {
                    return Err(Error::Construction(format!(
                        "nodes must increase: ({px}, {py}) then ({x}, {y})"
                    )));
                }
            }
            xs.push(x);
            ys.push(y);
        }
        if xs.len() < 2 {
            return Err(Error::Construction(
                "a piecewise-linear map needs two distinct nodes".into(),
            ));
        }
        Ok(Self { xs, ys })
    }

    /// Linear interpolation, clamped to the end values outside the node range.
    pub fn eval(&self, x: f64) -> f64 {
        let last = self.xs.len() - 1;
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[last] {
            return self.ys[last];
        }
        let k = self.xs.partition_point(|&v| v <= x) - 1;
        let frac = (x - self.xs[k]) / (self.xs[k + 1] - self.xs[k]);
        self.ys[k] + frac * (self.ys[k + 1] - self.ys[k])
    }
}

/// Limits on the scene parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneBounds {
    /// Upper exponent in `2^(i-j) < n^k1`.
    pub k1: f64,
    /// Upper exponent in `phi_j / phi_i < n^ratio_exponent`.
    pub ratio_exponent: f64,
}

impl Default for SceneBounds {
    fn default() -> Self {
        Self {
            k1: 8.0,
            ratio_exponent: 3.0,
        }
    }
}

/// Time change `tau` matching `g o tau` with `sin((2r+1) pi x)` on `[alpha, beta]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedScene {
    pub n: u32,
    pub k: u32,
    pub s0: f64,
    pub i: u32,
    pub j: u32,
    pub phi_i: f64,
    pub phi_j: f64,
    /// `r = 2n 2^j`.
    pub r: u32,
    pub alpha: f64,
    pub beta: f64,
    pub tau: PiecewiseLinear,
    /// The oscillatory function truncated at `k` with continuity phases.
    pub g: TestFunction,
}

#[allow(clippy::too_many_arguments)]
pub fn build_aligned_scene(
    n: u32,
    k: u32,
    s0: f64,
    i: u32,
    j: u32,
    phi_i: f64,
    phi_j: f64,
    bounds: SceneBounds,
) -> Result<AlignedScene> {
    let bad = |msg: String| Err(Error::Construction(msg));
    if n < 4 {
        return bad(format!("aligned scene needs n >= 4, got {n}"));
    }
    if k < 1 {
        return bad("aligned scene needs k >= 1".into());
    }
    if !(s0 > 0.0 && s0 <= 1.0) {
        return bad(format!("s0 must lie in (0, 1], got {s0}"));
    }
    if i <= j || i - j >= 63 {
        return bad(format!("need j < i with i - j < 63, got i = {i}, j = {j}"));
    }
    let nf = f64::from(n);
    let gap = 2f64.powi((i - j) as i32);
    if !(4.0 * nf < gap && gap < nf.powf(bounds.k1)) {
        return bad(format!(
            "need 4n < 2^(i-j) < n^K1, got 2^(i-j) = {gap}, n = {n}, K1 = {}",
            bounds.k1
        ));
    }
    if !(phi_i > 0.0 && phi_i < phi_j && phi_j <= 1.0) {
        return bad(format!("need 0 < phi_i < phi_j <= 1, got {phi_i}, {phi_j}"));
    }
    let ratio = phi_j / phi_i;
    if !(nf * nf < ratio && ratio < nf.powf(bounds.ratio_exponent)) {
        return bad(format!(
            "need n^2 < phi_j / phi_i < n^{}, got ratio {ratio}",
            bounds.ratio_exponent
        ));
    }
    let nk = nf.powi(k as i32);
    let (piece_lo, piece_hi) = (s0 / nk, s0 * nf / nk);
    if !(phi_i <= piece_lo && piece_hi <= phi_j) {
        return bad(format!(
            "piece [{piece_lo}, {piece_hi}] must lie inside [phi_i, phi_j] = [{phi_i}, {phi_j}]"
        ));
    }
    let r64 = (2 * u64::from(n)) << j;
    let r = u32::try_from(r64).map_err(|_| Error::Construction(format!("kernel order 2n 2^j = {r64} overflows")))?;
    let denom = 2.0 * r as f64 + 1.0;
    let alpha = 4.0 / denom;
    let beta = (2.0 * nf - 4.0) / denom;
    let psi = crate::testfn::continuity_phases(n, k)?;
    let psi_k = psi[k as usize - 1];
    let x_i = 2f64.powi(-(i as i32));
    let x_j = 2f64.powi(-(j as i32));
    if !(x_i < alpha && beta < x_j) {
        return bad(format!("[alpha, beta] = [{alpha}, {beta}] escapes [2^-i, 2^-j]"));
    }
    let tau = PiecewiseLinear::new(&[
        (x_i, phi_i),
        (alpha, (3.0 - psi_k) * s0 / nk),
        (beta, (nf - 1.0 - psi_k) * s0 / nk),
        (x_j, phi_j),
    ])?;
    let g = TestFunction::Oscillatory { n, depth_k: k, s0, psi };
    Ok(AlignedScene {
        n,
        k,
        s0,
        i,
        j,
        phi_i,
        phi_j,
        r,
        alpha,
        beta,
        tau,
        g,
    })
}

impl AlignedScene {
    pub fn kernel(&self) -> KernelOrder {
        KernelOrder(self.r)
    }

    /// `max |g(tau(x)) - sin((2r+1) pi x)|` over `grid + 1` points of `[alpha, beta]`.
    pub fn alignment_error(&self, grid: usize) -> f64 {
        let w = 2.0 * f64::from(self.r) + 1.0;
        (0..=grid.max(1))
            .map(|m| {
                let x = self.alpha + (self.beta - self.alpha) * m as f64 / grid.max(1) as f64;
                (self.g.eval(self.tau.eval(x)) - (w * PI * x).sin()).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `int_alpha^beta sin((2r+1) pi x) D_r(x) dx`.
pub fn aligned_integral(scene: &AlignedScene, q: &QuadratureSpec) -> Result<f64> {
    let w = 2.0 * f64::from(scene.r) + 1.0;
    let f = FnIntegrand {
        f: |x: f64| (w * PI * x).sin(),
        frequency: w / 2.0,
    };
    interval_integral(&f, scene.alpha, scene.beta, scene.kernel(), q)
}

/// Leading-order value `(1 / 2 pi) log(n/2 - 1)` of the aligned integral.
pub fn aligned_integral_estimate(n: u32) -> f64 {
    (f64::from(n) / 2.0 - 1.0).ln() / (2.0 * PI)
}
