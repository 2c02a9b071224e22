//! Grid exploration of the averaging equation
//! `p(x,y) = 1/(y-x) int_x^y p(x,t) p(t,y) dt` on `0 <= x <= y <= 1`.
//!
//! Functions live on the triangular grid `x_a = a h`, `h = 1/M`, with the
//! diagonal pinned to 1. Averages use the trapezoid rule over the grid nodes
//! between `x_a` and `x_b`.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::output::fmt_f64;
use crate::rng::RandomSource;

/// Values `p(x_a, x_b)` for `0 <= a <= b <= M`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBivariate {
    m: usize,
    values: Vec<f64>,
}

#[inline]
fn row_start(m: usize, a: usize) -> usize {
    a * (m + 1) - a * a.saturating_sub(1) / 2
}

impl GridBivariate {
    /// Tabulates `f` at every grid pair; the diagonal is set to 1.
    pub fn from_fn(m: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if m < 1 {
            return domain("grid needs M >= 1");
        }
        let h = 1.0 / m as f64;
        let mut values = Vec::with_capacity((m + 1) * (m + 2) / 2);
        for a in 0..=m {
            for b in a..=m {
                values.push(if a == b { 1.0 } else { f(a as f64 * h, b as f64 * h) });
            }
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
            return domain(format!("grid values must lie in [0, 1], found {v}"));
        }
        Ok(Self { m, values })
    }

    pub fn constant(m: usize, c: f64) -> Result<Self> {
        Self::from_fn(m, |_, _| c)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn x(&self, a: usize) -> f64 {
        a as f64 * self.h()
    }

    /// Scale of the trapezoid error on this grid.
    ///
    /// Near the diagonal an average covers only a few cells, so the rule is
    /// first order there; `h` bounds the deviation observed for smooth `p`.
    pub fn grid_error(&self) -> f64 {
        self.h()
    }

    /// `p(x_a, x_b)`, `a <= b`.
    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        debug_assert!(a <= b && b <= self.m);
        self.values[row_start(self.m, a) + (b - a)]
    }

    /// Trapezoid average of `p(x_a, t) p(t, x_b)` over `[x_a, x_b]`, `a < b`.
    pub fn average(&self, a: usize, b: usize) -> f64 {
        let cells = (b - a) as f64;
        let ends = 0.5 * (self.get(a, a) * self.get(a, b) + self.get(a, b) * self.get(b, b));
        let inner: f64 = (a + 1..b).map(|t| self.get(a, t) * self.get(t, b)).sum();
        (ends + inner) / cells
    }

    /// CSV with header `a,b,x,y,p`, rows ordered by `a` then `b`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "a,b,x,y,p")?;
        for a in 0..=self.m {
            for b in a..=self.m {
                writeln!(
                    out,
                    "{a},{b},{},{},{}",
                    fmt_f64(self.x(a)),
                    fmt_f64(self.x(b)),
                    fmt_f64(self.get(a, b))
                )?;
            }
        }
        Ok(())
    }
}

/// `max |p(x_a, x_b) - average(a, b)|` over `a < b`.
pub fn residual(p: &GridBivariate) -> f64 {
    residual_beyond(p, 1)
}

/// Residual restricted to pairs at least `min_cells` grid steps apart.
pub fn residual_beyond(p: &GridBivariate, min_cells: usize) -> f64 {
    let m = p.m();
    let min_cells = min_cells.max(1);
    (0..=m)
        .into_par_iter()
        .map(|a| {
            (a + min_cells..=m)
                .map(|b| (p.get(a, b) - p.average(a, b)).abs())
                .fold(0.0, f64::max)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// One step of the averaging map, clamped to [0, 1], diagonal kept at 1.
pub fn iterate(p: &GridBivariate) -> GridBivariate {
    let m = p.m();
    let rows: Vec<Vec<f64>> = (0..=m)
        .into_par_iter()
        .map(|a| {
            (a..=m)
                .map(|b| if a == b { 1.0 } else { p.average(a, b).clamp(0.0, 1.0) })
                .collect()
        })
        .collect();
    GridBivariate {
        m,
        values: rows.concat(),
    }
}

/// `max |p(x_a, x_c) - p(x_a, x_b) p(x_b, x_c)|` over `a <= b <= c`.
pub fn defect(p: &GridBivariate) -> f64 {
    let m = p.m();
    (0..=m)
        .into_par_iter()
        .map(|a| {
            let mut worst: f64 = 0.0;
            for b in a..=m {
                let pab = p.get(a, b);
                for c in b..=m {
                    worst = worst.max((p.get(a, c) - pab * p.get(b, c)).abs());
                }
            }
            worst
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// `p(x, y) = q(y) / q(x)` for a positive non-increasing `q` on the grid.
pub fn make_multiplicative(q: &[f64]) -> Result<GridBivariate> {
    if q.len() < 2 {
        return domain("q needs at least two grid values");
    }
    if q.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return domain("q must be positive and finite");
    }
    if let Some(a) = q.windows(2).position(|w| w[1] > w[0]) {
        return domain(format!("q increases between grid points {a} and {}", a + 1));
    }
    let m = q.len() - 1;
    let mut values = Vec::with_capacity((m + 1) * (m + 2) / 2);
    for a in 0..=m {
        for b in a..=m {
            values.push(if a == b { 1.0 } else { q[b] / q[a] });
        }
    }
    Ok(GridBivariate { m, values })
}

/// The non-monotone solution: 1 everywhere except 0 on the line `y = 1/2`
/// (off the diagonal). Needs even `M`.
pub fn remark_counterexample(m: usize) -> Result<GridBivariate> {
    if m < 2 || !m.is_multiple_of(2) {
        return domain(format!("the line y = 1/2 needs an even grid size, got {m}"));
    }
    let half = m / 2;
    let mut p = GridBivariate::constant(m, 1.0)?;
    for a in 0..half {
        let idx = row_start(m, a) + (half - a);
        p.values[idx] = 0.0;
    }
    Ok(p)
}

/// `c + (1 - c) exp(-lambda (y - x))` with `c` and `lambda` drawn from `src`:
/// monotone in both arguments but not multiplicative.
pub fn random_monotone(m: usize, src: &RandomSource) -> Result<GridBivariate> {
    let c = src.uniform_at(0);
    let lambda = 0.5 + 4.5 * src.uniform_at(1);
    GridBivariate::from_fn(m, |x, y| c + (1.0 - c) * (-lambda * (y - x)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// Pairs with `p(x_a, x_{b+1}) > p(x_a, x_b)`.
    pub increasing_in_y: usize,
    /// Pairs with `p(x_{a+1}, x_b) < p(x_a, x_b)`.
    pub decreasing_in_x: usize,
    /// Comparisons made in each direction.
    pub comparisons: usize,
}

impl MonotonicityReport {
    pub fn violations(&self) -> usize {
        self.increasing_in_y + self.decreasing_in_x
    }

    pub fn fraction(&self) -> f64 {
        self.violations() as f64 / (2 * self.comparisons).max(1) as f64
    }
}

pub fn monotonicity_check(p: &GridBivariate) -> MonotonicityReport {
    let m = p.m();
    let mut report = MonotonicityReport {
        increasing_in_y: 0,
        decreasing_in_x: 0,
        comparisons: m * (m + 1) / 2,
    };
    for a in 0..m {
        for b in a..m {
            if p.get(a, b + 1) > p.get(a, b) {
                report.increasing_in_y += 1;
            }
        }
    }
    for b in 1..=m {
        for a in 0..b {
            if p.get(a + 1, b) < p.get(a, b) {
                report.decreasing_in_x += 1;
            }
        }
    }
    report
}

/// Starting grids accepted by the explorer: `const:<c>`, `exp:<lambda>`,
/// `remark` and `random`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridInit {
    Constant(f64),
    Exponential(f64),
    Remark,
    Random,
}

impl FromStr for GridInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "unknown grid init '{s}'; use const:<c>, exp:<lambda>, remark or random"
            ))
        };
        let (kind, arg) = match s.split_once(':') {
            Some((k, v)) => (k, Some(v)),
            None => (s, None),
        };
        let number = || -> Result<f64> { arg.ok_or_else(bad)?.trim().parse::<f64>().map_err(|_| bad()) };
        match kind {
            "const" => Ok(GridInit::Constant(number()?)),
            "exp" => Ok(GridInit::Exponential(number()?)),
            "remark" if arg.is_none() => Ok(GridInit::Remark),
            "random" if arg.is_none() => Ok(GridInit::Random),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for GridInit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GridInit::Constant(c) => write!(f, "const:{c}"),
            GridInit::Exponential(l) => write!(f, "exp:{l}"),
            GridInit::Remark => write!(f, "remark"),
            GridInit::Random => write!(f, "random"),
        }
    }
}

impl GridInit {
    pub fn build(&self, m: usize, src: &RandomSource) -> Result<GridBivariate> {
        match *self {
            GridInit::Constant(c) => GridBivariate::constant(m, c),
            GridInit::Exponential(lambda) => {
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    return domain(format!("exp rate must be non-negative, got {lambda}"));
                }
                let q: Vec<f64> = (0..=m).map(|a| (-lambda * a as f64 / m as f64).exp()).collect();
                make_multiplicative(&q)
            }
            GridInit::Remark => remark_counterexample(m),
            GridInit::Random => random_monotone(m, src),
        }
    }
}

/// One line of an iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub residual: f64,
    pub defect: f64,
    pub violations: usize,
    /// `p(0, 1)`.
    pub p01: f64,
}

fn record(iter: usize, p: &GridBivariate) -> TraceRecord {
    TraceRecord {
        iter,
        residual: residual(p),
        defect: defect(p),
        violations: monotonicity_check(p).violations(),
        p01: p.get(0, p.m()),
    }
}

/// Records for the start grid and each of `iters` iterates; returns the last grid too.
pub fn run_trace(start: GridBivariate, iters: usize) -> (Vec<TraceRecord>, GridBivariate) {
    let mut p = start;
    let mut trace = vec![record(0, &p)];
    for it in 1..=iters {
        p = iterate(&p);
        trace.push(record(it, &p));
    }
    (trace, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn indexing_covers_the_triangle() {
        let p = GridBivariate::from_fn(5, |x, y| (x + y) / 2.0).unwrap();
        assert_eq!(p.values.len(), 21);
        assert_eq!(p.get(5, 5), 1.0);
        assert_abs_diff_eq!(p.get(1, 4), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(2, 3), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn values_outside_unit_interval_are_rejected() {
        assert!(GridBivariate::constant(4, 1.5).is_err());
        assert!(GridBivariate::constant(4, -0.1).is_err());
        assert!(GridBivariate::constant(0, 0.5).is_err());
    }

    #[test]
    fn ones_are_a_fixed_point() {
        let p = GridBivariate::constant(16, 1.0).unwrap();
        assert_eq!(residual(&p), 0.0);
        assert_eq!(iterate(&p), p);
        assert_eq!(defect(&p), 0.0);
    }

    #[test]
    fn constant_half_residual_and_defect() {
        let p = GridBivariate::constant(32, 0.5).unwrap();
        let r = residual(&p);
        assert!((r - 0.25).abs() <= p.h(), "residual {r}");
        assert_eq!(defect(&p), 0.25);
    }

    #[test]
    fn adjacent_cells_are_left_alone() {
        let p = GridBivariate::constant(8, 0.3).unwrap();
        let q = iterate(&p);
        assert_abs_diff_eq!(q.get(2, 3), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn multiplicative_grid_has_zero_defect_for_dyadic_q() {
        let q: Vec<f64> = (0..=16).map(|a| 0.5f64.powi(a)).collect();
        let p = make_multiplicative(&q).unwrap();
        assert_eq!(defect(&p), 0.0);
        assert_eq!(monotonicity_check(&p).violations(), 0);
    }

    #[test]
    fn make_multiplicative_rejects_increasing_q() {
        assert!(make_multiplicative(&[1.0, 0.5, 0.6]).is_err());
        assert!(make_multiplicative(&[1.0, 0.0]).is_err());
        assert_eq!(
            make_multiplicative(&[1.0; 5]).unwrap(),
            GridBivariate::constant(4, 1.0).unwrap()
        );
    }

    #[test]
    fn remark_counterexample_violations_lie_on_the_line() {
        let p = remark_counterexample(8).unwrap();
        let rep = monotonicity_check(&p);
        assert!(rep.violations() > 0);
        assert!(remark_counterexample(7).is_err());
    }

    #[test]
    fn init_parsing() {
        assert_eq!("const:0.5".parse::<GridInit>().unwrap(), GridInit::Constant(0.5));
        assert_eq!("exp:2".parse::<GridInit>().unwrap(), GridInit::Exponential(2.0));
        assert_eq!("remark".parse::<GridInit>().unwrap(), GridInit::Remark);
        assert!("const".parse::<GridInit>().is_err());
        assert!("wave:1".parse::<GridInit>().is_err());
        assert!("const:abc".parse::<GridInit>().is_err());
    }

    #[test]
    fn trace_starts_at_iteration_zero() {
        let (trace, last) = run_trace(GridBivariate::constant(16, 0.5).unwrap(), 2);
        assert_eq!(trace.len(), 3);
        assert_eq!(trace[0].iter, 0);
        assert_eq!(trace[0].p01, 0.5);
        assert_eq!(trace[2].p01, last.get(0, 16));
    }

    #[test]
    fn csv_has_one_row_per_pair() {
        let p = GridBivariate::constant(3, 0.5).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 10);
        assert!(text.starts_with("a,b,x,y,p\n"));
    }
}
