//! Periodic test functions on [0,1] and pointwise moduli of continuity.
//!
//! The oscillatory family `f_n(t) = sin 2pi(t n^k + psi_k)` on `[n^-k, n^-k+1]`
//! is truncated at `k = depth_k`. A ladder places a rescaled copy of `f_n` on
//! `(4 s_next, s_n)` with linear bridges on `[2 s_next, 4 s_next]` and
//! `[s_n, 2 s_n]`; a counterexample sum stacks weighted ladders on nested,
//! touching supports.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub k: i64,
    pub amplitude: f64,
    /// Phase in cycles: the term is `amplitude * sin(2 pi (k t + phase))`.
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderSpec {
    pub n: u32,
    pub s_n: f64,
    pub s_next: f64,
    /// One phase per piece; its length is the truncation depth.
    pub psi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedLadder {
    pub weight: f64,
    #[serde(flatten)]
    pub ladder: LadderSpec,
}

/// JSON form: `{"variant": "<snake_case name>", ...fields}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum TestFunction {
    TrigPolynomial {
        terms: Vec<TrigTerm>,
    },
    Oscillatory {
        n: u32,
        depth_k: u32,
        s0: f64,
        psi: Vec<f64>,
    },
    Ladder(LadderSpec),
    CounterexampleSum {
        terms: Vec<WeightedLadder>,
    },
    Constant {
        c: f64,
    },
    Identity,
}

/// Value of piece `k` of `f_n` at `u`, with no range check.
#[inline]
pub fn piece_value(n: u32, psi: &[f64], k: usize, u: f64) -> f64 {
    let scale = f64::from(n).powi(k as i32);
    (TAU * (u * scale + psi[k - 1])).sin()
}

/// Piece index `k` with `u in [n^-k, n^-k+1]`, or `None` below `n^-K`.
fn piece_index(n: u32, depth: usize, u: f64) -> Option<usize> {
    if depth == 0 || !(u > 0.0) {
        return None;
    }
    let nf = f64::from(n);
    let mut k = ((-u.ln() / nf.ln()).floor() as i64 + 1).clamp(1, depth as i64) as usize;
    // the logarithm can land on the wrong side of a breakpoint
    loop {
        let scaled = u * nf.powi(k as i32);
        if scaled < 1.0 && k < depth {
            k += 1;
        } else if scaled > nf && k > 1 {
            k -= 1;
        } else {
            break;
        }
    }
    let scaled = u * nf.powi(k as i32);
    if scaled < 1.0 || scaled > nf * (1.0 + 4.0 * f64::EPSILON) && k == 1 && u > 1.0 {
        return None;
    }
    Some(k)
}

/// `f_n(u)` on `[0, 1]`; zero below `n^-K`.
pub fn oscillatory_core(n: u32, psi: &[f64], u: f64) -> f64 {
    match piece_index(n, psi.len(), u) {
        Some(k) => piece_value(n, psi, k, u),
        None => 0.0,
    }
}

/// Phases making the truncated `f_n` continuous at every breakpoint.
///
/// At `t = n^-k` the two adjacent pieces evaluate the sine at the integers 1
/// and `n`, so all-zero phases work.
pub fn continuity_phases(n: u32, depth_k: u32) -> Result<Vec<f64>> {
    if n < 2 {
        return domain(format!("oscillatory family needs n >= 2, got {n}"));
    }
    Ok(vec![0.0; depth_k as usize])
}

impl LadderSpec {
    pub fn depth(&self) -> usize {
        self.psi.len()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (s, s1) = (self.s_n, self.s_next);
        if x <= 2.0 * s1 || x >= 2.0 * s {
            0.0
        } else if x <= 4.0 * s1 {
            let inner = oscillatory_core(self.n, &self.psi, 4.0 * s1 / s);
            inner * (x - 2.0 * s1) / (2.0 * s1)
        } else if x < s {
            oscillatory_core(self.n, &self.psi, x / s)
        } else {
            let inner = oscillatory_core(self.n, &self.psi, 1.0);
            inner * (2.0 * s - x) / s
        }
    }

    /// Support `[2 s_next, 2 s_n]`.
    pub fn support(&self) -> (f64, f64) {
        (2.0 * self.s_next, 2.0 * self.s_n)
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Construction(format!("ladder needs n >= 2, got {}", self.n)));
        }
        if !(self.s_next > 0.0 && 4.0 * self.s_next < self.s_n && self.s_n <= 0.5) {
            return Err(Error::Construction(format!(
                "ladder scales need 0 < 4 s_next < s_n <= 1/2, got s_n = {}, s_next = {}",
                self.s_n, self.s_next
            )));
        }
        Ok(())
    }

    fn breakpoints(&self, out: &mut Vec<f64>) {
        let (s, s1) = (self.s_n, self.s_next);
        out.extend_from_slice(&[2.0 * s1, 4.0 * s1, s, 2.0 * s]);
        piece_breakpoints(self.n, self.depth(), s, 4.0 * s1, s, out);
    }

    fn extrema(&self, out: &mut Vec<f64>) {
        piece_extrema(self.n, &self.psi, self.s_n, 4.0 * self.s_next, self.s_n, out);
    }
}

fn piece_breakpoints(n: u32, depth: usize, scale: f64, lo: f64, hi: f64, out: &mut Vec<f64>) {
    let nf = f64::from(n);
    for k in 0..=depth {
        let t = scale / nf.powi(k as i32);
        if t >= lo && t <= hi {
            out.push(t);
        }
    }
}

/// Peaks of `sin 2 pi (u n^k + psi_k)` on each piece, scaled by `scale`.
fn piece_extrema(n: u32, psi: &[f64], scale: f64, lo: f64, hi: f64, out: &mut Vec<f64>) {
    let nf = f64::from(n);
    for k in 1..=psi.len() {
        let pk = nf.powi(k as i32);
        for m in 0..=n {
            for q in [0.25, 0.75] {
                let u = (f64::from(m) + q - psi[k - 1]) / pk;
                let t = u * scale;
                if u * pk >= 1.0 && u * pk <= nf && t >= lo && t <= hi {
                    out.push(t);
                }
            }
        }
    }
}

impl TestFunction {
    pub fn constant(c: f64) -> Self {
        TestFunction::Constant { c }
    }

    /// `amplitude * sin(2 pi k t)`.
    pub fn sine(k: i64, amplitude: f64) -> Self {
        TestFunction::TrigPolynomial {
            terms: vec![TrigTerm {
                k,
                amplitude,
                phase: 0.0,
            }],
        }
    }

    /// `amplitude * cos(2 pi k t)`.
    pub fn cosine(k: i64, amplitude: f64) -> Self {
        TestFunction::TrigPolynomial {
            terms: vec![TrigTerm {
                k,
                amplitude,
                phase: 0.25,
            }],
        }
    }

    /// Truncated `f_n` rescaled to `[0, s0]` with continuity phases.
    pub fn oscillatory(n: u32, depth_k: u32, s0: f64) -> Result<Self> {
        let f = TestFunction::Oscillatory {
            n,
            depth_k,
            s0,
            psi: continuity_phases(n, depth_k)?,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TestFunction::TrigPolynomial { terms } => {
                if terms.iter().any(|t| !t.amplitude.is_finite() || !t.phase.is_finite()) {
                    return Err(Error::Construction("trig coefficients must be finite".into()));
                }
            }
            TestFunction::Oscillatory { n, depth_k, s0, psi } => {
                if *n < 2 {
                    return Err(Error::Construction(format!("oscillatory needs n >= 2, got {n}")));
                }
                if *depth_k < 1 || psi.len() != *depth_k as usize {
                    return Err(Error::Construction(format!(
                        "oscillatory needs depth_k >= 1 phases, got depth_k = {depth_k} with {} phases",
                        psi.len()
                    )));
                }
                if !(*s0 > 0.0 && *s0 <= 1.0) {
                    return Err(Error::Construction(format!("s0 must lie in (0, 1], got {s0}")));
                }
            }
            TestFunction::Ladder(l) => l.validate()?,
            TestFunction::CounterexampleSum { terms } => {
                for t in terms {
                    t.ladder.validate()?;
                }
                let mut supports: Vec<(f64, f64)> = terms.iter().map(|t| t.ladder.support()).collect();
                supports.sort_by(|a, b| a.0.total_cmp(&b.0));
                if supports.windows(2).any(|w| w[1].0 < w[0].1) {
                    return Err(Error::Construction("ladder supports overlap".into()));
                }
            }
            TestFunction::Constant { c } => {
                if !c.is_finite() {
                    return Err(Error::Construction("constant must be finite".into()));
                }
            }
            TestFunction::Identity => {}
        }
        Ok(())
    }

    /// Value at `t`; arguments outside [0,1] are not wrapped.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TestFunction::TrigPolynomial { terms } => terms
                .iter()
                .map(|term| term.amplitude * (TAU * (term.k as f64 * t + term.phase)).sin())
                .sum(),
            TestFunction::Oscillatory { n, s0, psi, .. } => {
                if t > *s0 || t <= 0.0 {
                    0.0
                } else {
                    oscillatory_core(*n, psi, t / s0)
                }
            }
            TestFunction::Ladder(l) => l.eval(t),
            TestFunction::CounterexampleSum { terms } => terms
                .iter()
                .map(|term| {
                    let (lo, hi) = term.ladder.support();
                    if t > lo && t < hi {
                        term.weight * term.ladder.eval(t)
                    } else {
                        0.0
                    }
                })
                .sum(),
            TestFunction::Constant { c } => *c,
            TestFunction::Identity => t,
        }
    }

    /// Value of the 1-periodic extension.
    pub fn eval_periodic(&self, t: f64) -> f64 {
        self.eval(t.rem_euclid(1.0))
    }

    /// Upper bound for `sup |f|`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            TestFunction::TrigPolynomial { terms } => terms.iter().map(|t| t.amplitude.abs()).sum(),
            TestFunction::Oscillatory { .. } | TestFunction::Ladder(_) | TestFunction::Identity => 1.0,
            TestFunction::CounterexampleSum { terms } => terms.iter().map(|t| t.weight.abs()).sum(),
            TestFunction::Constant { c } => c.abs(),
        }
    }

    /// Points in `[lo, hi]` where the derivative may jump, sorted.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            TestFunction::Oscillatory { n, s0, psi, .. } => {
                piece_breakpoints(*n, psi.len(), *s0, 0.0, *s0, &mut out);
            }
            TestFunction::Ladder(l) => l.breakpoints(&mut out),
            TestFunction::CounterexampleSum { terms } => {
                for t in terms {
                    t.ladder.breakpoints(&mut out);
                }
            }
            _ => {}
        }
        finish_points(out, lo, hi)
    }

    /// Breakpoints plus the peaks of every sine piece in `[lo, hi]`, sorted.
    pub fn critical_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = self.breakpoints(lo, hi);
        match self {
            TestFunction::Oscillatory { n, s0, psi, .. } => {
                piece_extrema(*n, psi, *s0, lo.max(0.0), hi.min(*s0), &mut out);
            }
            TestFunction::Ladder(l) => l.extrema(&mut out),
            TestFunction::CounterexampleSum { terms } => {
                for t in terms {
                    t.ladder.extrema(&mut out);
                }
            }
            _ => {}
        }
        finish_points(out, lo, hi)
    }

    /// Upper estimate of the oscillation cycles of `f` on `[a, b]`.
    pub fn cycles(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(0.0), b.min(1.0));
        if b <= a {
            return 0.0;
        }
        match self {
            TestFunction::TrigPolynomial { terms } => {
                terms.iter().map(|t| t.k.unsigned_abs() as f64).fold(0.0, f64::max) * (b - a)
            }
            TestFunction::Oscillatory { n, s0, psi, .. } => pieces_cycles(*n, psi.len(), *s0, a, b),
            TestFunction::Ladder(l) => pieces_cycles(l.n, l.depth(), l.s_n, a, b),
            TestFunction::CounterexampleSum { terms } => terms
                .iter()
                .map(|t| pieces_cycles(t.ladder.n, t.ladder.depth(), t.ladder.s_n, a, b))
                .sum(),
            TestFunction::Constant { .. } | TestFunction::Identity => 0.0,
        }
    }
}

/// Cycles of the pieces `scale [n^-k, n^-k+1]` overlapping `[a, b]`.
fn pieces_cycles(n: u32, depth: usize, scale: f64, a: f64, b: f64) -> f64 {
    let nf = f64::from(n);
    (1..=depth)
        .map(|k| {
            let pk = nf.powi(k as i32);
            let lo = scale / pk;
            let hi = scale * nf / pk;
            let overlap = (b.min(hi) - a.max(lo)).max(0.0);
            overlap * pk / scale
        })
        .sum()
}

fn finish_points(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|&t| t >= lo && t <= hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Builds `sum_k g_{n_k} / log n_k` with scales `s_next = s_n n^-K / 4`,
/// chaining each ladder's `s_next` into the next ladder's `s_n`.
pub fn build_counterexample(n_list: &[u32], depth_k: u32, s0: f64) -> Result<TestFunction> {
    if n_list.is_empty() {
        return Err(Error::Construction("counterexample needs at least one n".into()));
    }
    if n_list.iter().any(|&n| n < 3) {
        return Err(Error::Construction("counterexample needs every n >= 3".into()));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Construction("n_list must be strictly increasing".into()));
    }
    if depth_k < 1 {
        return Err(Error::Construction("depth_k must be at least 1".into()));
    }
    if !(s0 > 0.0 && s0 <= 0.5) {
        return Err(Error::Construction(format!("s0 must lie in (0, 1/2], got {s0}")));
    }
    let mut s = s0;
    let mut terms = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let s_next = s * 0.25 * f64::from(n).powi(-(depth_k as i32));
        if !(s_next >= f64::MIN_POSITIVE) {
            return Err(Error::Construction(format!(
                "ladder scales underflow at n = {n}; reduce depth_k or the list"
            )));
        }
        terms.push(WeightedLadder {
            weight: 1.0 / f64::from(n).ln(),
            ladder: LadderSpec {
                n,
                s_n: s,
                s_next,
                psi: continuity_phases(n, depth_k)?,
            },
        });
        s = s_next;
    }
    let f = TestFunction::CounterexampleSum { terms };
    f.validate()?;
    Ok(f)
}

/// Pointwise moduli `omega_f(x; delta)` for several `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub x: f64,
    pub deltas: Vec<f64>,
    pub omega: Vec<f64>,
}

/// `omega[j] = max |f(x + mu) - f(x)|` over `0 < |mu| <= deltas[j]`.
///
/// Offsets are a uniform grid of `grid_resolution` points on each side for
/// every delta, plus every critical point of `f` in reach; the periodic
/// extension is used. Nested node sets make `omega` non-decreasing in delta.
/// Including `|mu| = delta` gives the supremum over the open window for
/// continuous `f`.
pub fn modulus_at(f: &TestFunction, x: f64, deltas: &[f64], grid_resolution: usize) -> Result<ModulusReport> {
    if grid_resolution < 1000 {
        return Err(Error::Config(format!(
            "grid_resolution must be at least 1000, got {grid_resolution}"
        )));
    }
    if deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return domain("deltas must be positive and finite");
    }
    let fx = f.eval_periodic(x);
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|&a, &b| deltas[a].total_cmp(&deltas[b]));
    let max_delta = deltas.iter().copied().fold(0.0, f64::max);

    // critical points of the periodic extension, as offsets from x
    let crit: Vec<f64> = f
        .critical_points(0.0, 1.0)
        .into_iter()
        .flat_map(|c| [c - 1.0 - x, c - x, c + 1.0 - x])
        .filter(|mu| *mu != 0.0 && mu.abs() <= max_delta)
        .collect();

    let mut omega = vec![0.0; deltas.len()];
    let mut running: f64 = 0.0;
    for &j in &order {
        let delta = deltas[j];
        let step = delta / grid_resolution as f64;
        for m in 1..=grid_resolution {
            let mu = if m == grid_resolution { delta } else { step * m as f64 };
            running = running
                .max((f.eval_periodic(x + mu) - fx).abs())
                .max((f.eval_periodic(x - mu) - fx).abs());
        }
        for &mu in crit.iter().filter(|mu| mu.abs() <= delta) {
            running = running.max((f.eval_periodic(x + mu) - fx).abs());
        }
        omega[j] = running;
    }
    Ok(ModulusReport {
        x,
        deltas: deltas.to_vec(),
        omega,
    })
}
