//! Closed-form trapping potentials `V` and weights `m` with every structural
//! constant known analytically, plus numerical validators for the standing
//! assumptions (V1)–(V4), (M1)–(M2).
//!
//! ```text
//! V(x) = v_inf [1 - (1 + c r^p)^{-beta/p}]      r = |x - x0|
//! m(x) = m_inf + (1 - m_inf) / (1 + c2 r^q)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{FlepError, Result};
use crate::grid::{Field, Grid, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub v_inf: f64,
    pub x0: Point,
    /// Local exponent at `x0`.
    pub p: f64,
    /// Tail exponent.
    pub beta: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub m_inf: f64,
    pub x0: Point,
    /// Local exponent of `1 - m` at `x0`.
    pub q: f64,
    pub c2: f64,
}

/// One violated assumption, with the offending spec field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub assumption: &'static str,
    pub field: &'static str,
    pub message: String,
}

impl Violation {
    fn new(assumption: &'static str, field: &'static str, message: String) -> Self {
        Self {
            assumption,
            field,
            message,
        }
    }

    pub fn into_error(self) -> FlepError {
        FlepError::Assumption {
            assumption: self.assumption,
            message: self.message,
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.assumption, self.message)
    }
}

/// Upper end of the admissible range for the weight exponent `q`.
pub fn weight_exponent_limit(dim: usize, s: f64) -> f64 {
    let d = dim as f64;
    d + 8.0 * s + 8.0 * s * s / d
}

/// `l = min(q - 2s, p)`, the exponent that governs the blow-up laws.
pub fn blowup_exponent(p: f64, q: f64, s: f64) -> f64 {
    (q - 2.0 * s).min(p)
}

fn finite_positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl PotentialSpec {
    /// `C0 = lim V / |x - x0|^p`.
    pub fn c0(&self) -> f64 {
        self.v_inf * self.beta * self.c / self.p
    }

    /// `v_inf c^{-beta/p}`; must exceed 1 for the tail inequality.
    pub fn tail_margin(&self) -> f64 {
        self.v_inf * self.c.powf(-self.beta / self.p)
    }

    pub fn eval(&self, r: f64) -> f64 {
        // 1 - (1+y)^{-b} via expm1/ln_1p keeps V(x0 + δ) accurate to the last bit.
        let y = self.c * r.powf(self.p);
        -self.v_inf * (-(self.beta / self.p) * y.ln_1p()).exp_m1()
    }

    /// All violated assumptions for order `s` in dimension `dim`.
    pub fn violations(&self, dim: usize, s: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        if !finite_positive(self.v_inf) {
            out.push(Violation::new(
                "(V2)",
                "v_inf",
                format!("v_inf must be positive, got {}", self.v_inf),
            ));
        }
        if !(self.beta > 0.0 && self.beta < 2.0 * s) {
            out.push(Violation::new(
                "(V2)",
                "beta",
                format!("beta must lie in (0,2s) = (0,{}), got {}", 2.0 * s, self.beta),
            ));
        }
        let p_max = dim as f64 + 4.0 * s;
        if !(self.p > 0.0 && self.p < p_max) {
            out.push(Violation::new(
                "(V4)",
                "p",
                format!("p must lie in (0,d+4s) = (0,{p_max}), got {}", self.p),
            ));
        }
        if !finite_positive(self.c) {
            out.push(Violation::new(
                "(V4)",
                "c",
                format!("c must be positive so that C0 > 0, got {}", self.c),
            ));
        }
        if out.is_empty() && !(self.tail_margin() > 1.0) {
            out.push(Violation::new(
                "(V2)",
                "c",
                format!(
                    "tail margin v_inf*c^(-beta/p) = {} must exceed 1",
                    self.tail_margin()
                ),
            ));
        }
        if !self.x0.iter().all(|x| x.is_finite()) {
            out.push(Violation::new("(V1)", "x0", "x0 must be finite".into()));
        }
        out
    }
}

impl WeightSpec {
    /// `C̄ = lim (1 - m) / |x - x0|^q`.
    pub fn c_bar(&self) -> f64 {
        (1.0 - self.m_inf) * self.c2
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.m_inf + (1.0 - self.m_inf) / (1.0 + self.c2 * r.powf(self.q))
    }

    pub fn violations(&self, dim: usize, s: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.m_inf > 0.0 && self.m_inf < 1.0) {
            out.push(Violation::new(
                "(M2)",
                "m_inf",
                format!("m_inf must lie in (0,1), got {}", self.m_inf),
            ));
        }
        let q_max = weight_exponent_limit(dim, s);
        if !(self.q > 2.0 * s && self.q < q_max) {
            out.push(Violation::new(
                "(M2)",
                "q",
                format!(
                    "q must lie in (2s, d+8s+8s^2/d) = ({}, {q_max}) for the moment integrals to converge, got {}",
                    2.0 * s,
                    self.q
                ),
            ));
        }
        if !finite_positive(self.c2) {
            out.push(Violation::new(
                "(M2)",
                "c2",
                format!("c2 must be positive so that C_bar > 0, got {}", self.c2),
            ));
        }
        if !self.x0.iter().all(|x| x.is_finite()) {
            out.push(Violation::new("(M1)", "x0", "x0 must be finite".into()));
        }
        out
    }
}

/// Violations of the pair, including the shared-extremum condition (V3).
pub fn pair_violations(v: &PotentialSpec, m: &WeightSpec, dim: usize, s: f64) -> Vec<Violation> {
    let mut out = v.violations(dim, s);
    out.extend(m.violations(dim, s));
    let gap = (0..dim).map(|a| (v.x0[a] - m.x0[a]).abs()).fold(0.0, f64::max);
    if gap > 0.0 {
        out.push(Violation::new(
            "(V3)",
            "weight.x0",
            format!(
                "the minimum of V and the maximum of m must coincide, but they are {gap} apart"
            ),
        ));
    }
    out
}

/// `x0` must be a grid point in the central half of the box.
pub fn check_placement(grid: &Grid, x0: Point) -> Result<()> {
    let quarter = 0.25 * grid.length();
    if (0..grid.dim()).any(|a| !(x0[a].abs() <= quarter)) {
        return Err(FlepError::Domain(format!(
            "x0 = {:?} must lie in the central half of the box |x| <= {quarter}",
            &x0[..grid.dim()]
        )));
    }
    let snapped = grid.point(grid.nearest_index(x0));
    let off = (0..grid.dim()).map(|a| (snapped[a] - x0[a]).abs()).fold(0.0, f64::max);
    if off > 1e-9 * grid.spacing() {
        return Err(FlepError::Domain(format!(
            "x0 = {:?} must be a grid point (spacing {})",
            &x0[..grid.dim()],
            grid.spacing()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RealizedPotential {
    pub field: Field,
    pub spec: PotentialSpec,
    pub c0: f64,
}

#[derive(Debug, Clone)]
pub struct RealizedWeight {
    pub field: Field,
    pub spec: WeightSpec,
    pub c_bar: f64,
}

/// Samples `V` on `grid` using minimal-image distances from `x0`.
pub fn realize_potential(spec: &PotentialSpec, grid: Grid, s: f64) -> Result<RealizedPotential> {
    if let Some(v) = spec.violations(grid.dim(), s).into_iter().next() {
        return Err(v.into_error());
    }
    check_placement(&grid, spec.x0)?;
    let field = Field::from_fn(grid, |x| spec.eval(grid.distance(x, spec.x0)))?;
    Ok(RealizedPotential {
        field,
        spec: *spec,
        c0: spec.c0(),
    })
}

pub fn realize_weight(spec: &WeightSpec, grid: Grid, s: f64) -> Result<RealizedWeight> {
    if let Some(v) = spec.violations(grid.dim(), s).into_iter().next() {
        return Err(v.into_error());
    }
    check_placement(&grid, spec.x0)?;
    let field = Field::from_fn(grid, |x| spec.eval(grid.distance(x, spec.x0)))?;
    Ok(RealizedWeight {
        field,
        spec: *spec,
        c_bar: spec.c_bar(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub assumption: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
    /// Log-log slope of `V` over `r ∈ [2h, 16h]` from `x0`.
    pub measured_p: f64,
    /// Log-log slope of `1 - m` over the same radii.
    pub measured_q: f64,
    /// Richardson estimates from radii `4h`, `8h`.
    pub measured_c0: f64,
    pub measured_c_bar: f64,
    pub c0: f64,
    pub c_bar: f64,
    pub argmin_v: Point,
    pub argmax_m: Point,
    pub l: f64,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Least-squares slope of `log y` against `log x`.
fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Samples `f` along the first axis at `x0 + j h` for `j` in `js`.
fn axis_samples(f: &Field, x0: Point, js: impl Iterator<Item = usize>) -> (Vec<f64>, Vec<f64>) {
    let grid = f.grid();
    let h = grid.spacing();
    js.map(|j| {
        let mut x = x0;
        x[0] += j as f64 * h;
        (j as f64 * h, f.get(grid.nearest_index(x)))
    })
    .unzip()
}

fn richardson(g4: f64, g8: f64, order: f64) -> f64 {
    let w = 2f64.powf(order);
    (w * g4 - g8) / (w - 1.0)
}

fn check(assumption: &'static str, passed: bool, detail: String) -> AssumptionCheck {
    AssumptionCheck {
        assumption,
        passed,
        detail,
    }
}

/// Numerically verifies the standing assumptions on sampled `V`, `m`.
pub fn validate_assumptions(
    v: &Field,
    m: &Field,
    vspec: &PotentialSpec,
    mspec: &WeightSpec,
    s: f64,
) -> Result<ValidationReport> {
    v.check_same_grid(m)?;
    let grid = *v.grid();
    let dim = grid.dim();
    let h = grid.spacing();
    let mut checks = Vec::new();
    for viol in pair_violations(vspec, mspec, dim, s) {
        checks.push(check(viol.assumption, false, viol.message));
    }

    let i0 = grid.nearest_index(vspec.x0);
    let x0 = grid.point(i0);
    let v_inf = vspec.v_inf;

    // (V1): bounded, V(x0) = 0 = inf V.
    let v_min = v.values().iter().copied().fold(f64::INFINITY, f64::min);
    let v_x0 = v.get(i0);
    checks.push(check(
        "(V1)",
        v_x0.abs() <= 1e-12 * v_inf && v_min >= -1e-12 * v_inf,
        format!("V(x0) = {v_x0:e}, min V = {v_min:e}"),
    ));

    // (V2): sup V < V^inf and the far-ring tail inequality.
    let v_max = v.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (r_lo, r_hi) = (0.35 * grid.length(), 0.45 * grid.length());
    let mut ring_points = 0usize;
    let mut ring_worst = f64::NEG_INFINITY;
    for (idx, val) in v.values().iter().enumerate() {
        let r = grid.distance(grid.point(idx), x0);
        if r >= r_lo && r <= r_hi {
            ring_points += 1;
            ring_worst = ring_worst.max(val - v_inf + r.powf(-vspec.beta));
        }
    }
    checks.push(check(
        "(V2)",
        v_max < v_inf && ring_points > 0 && ring_worst < 0.0,
        format!(
            "sup V = {v_max}, V^inf = {v_inf}; max over far ring of V - V^inf + r^-beta = {ring_worst:e} ({ring_points} points)"
        ),
    ));

    // (V3): argmin V and argmax m are the same unique grid point.
    let argmin_v = unique_extremum(v, |a, b| a < b);
    let argmax_m = unique_extremum(m, |a, b| a > b);
    let shared = matches!((argmin_v, argmax_m), (Some(a), Some(b)) if a == b);
    checks.push(check(
        "(V3)",
        shared,
        format!(
            "argmin V = {:?}, argmax m = {:?}",
            argmin_v.map(|i| grid.point(i)),
            argmax_m.map(|i| grid.point(i))
        ),
    ));

    // (V4): local exponent and C0.
    let (rs, vs) = axis_samples(v, x0, 2..=16);
    let measured_p = loglog_slope(&rs, &vs);
    let (_, g) = axis_samples(v, x0, [4usize, 8].into_iter());
    let measured_c0 = richardson(
        g[0] / (4.0 * h).powf(vspec.p),
        g[1] / (8.0 * h).powf(vspec.p),
        vspec.p,
    );
    let c0 = vspec.c0();
    checks.push(check(
        "(V4)",
        (measured_p / vspec.p - 1.0).abs() <= 0.02 && (measured_c0 / c0 - 1.0).abs() <= 0.01,
        format!(
            "local exponent {measured_p} (p = {}), C0 {measured_c0} (closed form {c0})",
            vspec.p
        ),
    ));

    // (M1): m^inf <= m <= 1 with the flat-top condition at x0.
    let m_min = m.values().iter().copied().fold(f64::INFINITY, f64::min);
    let m_max = m.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let xm = grid.point(grid.nearest_index(mspec.x0));
    let m_x0 = m.get(grid.nearest_index(xm));
    let (rm, ms) = axis_samples(m, xm, 2..=16);
    let deficit: Vec<f64> = ms.iter().map(|v| 1.0 - v).collect();
    let flat_near = deficit[0] / rm[0].powf(2.0 * s);
    let flat_far = deficit[deficit.len() - 1] / rm[rm.len() - 1].powf(2.0 * s);
    checks.push(check(
        "(M1)",
        m_min >= mspec.m_inf && m_max <= 1.0 && (m_x0 - 1.0).abs() <= 1e-12 && flat_near < flat_far,
        format!(
            "m in [{m_min}, {m_max}], m(x0) = {m_x0}; (1-m)/r^(2s) = {flat_near:e} at 2h vs {flat_far:e} at 16h"
        ),
    ));

    // (M2): strict lower bound, local exponent and C̄.
    let measured_q = loglog_slope(&rm, &deficit);
    let (_, gm) = axis_samples(m, xm, [4usize, 8].into_iter());
    let measured_c_bar = richardson(
        (1.0 - gm[0]) / (4.0 * h).powf(mspec.q),
        (1.0 - gm[1]) / (8.0 * h).powf(mspec.q),
        mspec.q,
    );
    let c_bar = mspec.c_bar();
    checks.push(check(
        "(M2)",
        m_min > mspec.m_inf
            && (measured_q / mspec.q - 1.0).abs() <= 0.02
            && (measured_c_bar / c_bar - 1.0).abs() <= 0.01,
        format!(
            "local exponent {measured_q} (q = {}), C_bar {measured_c_bar} (closed form {c_bar})",
            mspec.q
        ),
    ));

    Ok(ValidationReport {
        checks,
        measured_p,
        measured_q,
        measured_c0,
        measured_c_bar,
        c0,
        c_bar,
        argmin_v: argmin_v.map(|i| grid.point(i)).unwrap_or([f64::NAN; 2]),
        argmax_m: argmax_m.map(|i| grid.point(i)).unwrap_or([f64::NAN; 2]),
        l: blowup_exponent(vspec.p, mspec.q, s),
    })
}

/// Index of the strict extremum under `better`, or `None` when it is shared.
fn unique_extremum(f: &Field, better: impl Fn(f64, f64) -> bool) -> Option<usize> {
    let vals = f.values();
    let mut best = 0;
    for (i, &x) in vals.iter().enumerate() {
        if better(x, vals[best]) {
            best = i;
        }
    }
    let ties = vals.iter().filter(|&&x| x == vals[best]).count();
    (ties == 1).then_some(best)
}
