//! Blow-up asymptotics as `a ↗ a*`: trial-function upper bounds, the
//! closed-form predictions for `I₁(a)` and `ε_a`, and the sweep over
//! `a_k = a*(1 - 2^{-k})` with log-log power-law fits.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{blowup_exponent, PotentialSpec, RealizedPotential, RealizedWeight, WeightSpec};
use crate::error::{FlepError, Result};
use crate::grid::{Field, Grid, Point};
use crate::ground_state::{
    critical_exponent, gamma_moments, golden_section, solve_ground_state, GroundState, GroundStateOptions,
    RadialProfile,
};
use crate::minimizer::{minimize_with_mass, MinimizerOptions, Problem};
use crate::spectral::Spectral;

const CASE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Case {
    /// `q - 2s < p`: the weight deficit sets the rate.
    QDominant,
    /// `p < q - 2s`: the potential sets the rate.
    PDominant,
    Balanced,
}

impl Case {
    pub fn classify(p: f64, q: f64, s: f64) -> Self {
        let lq = q - 2.0 * s;
        if (p - lq).abs() <= CASE_TOL {
            Case::Balanced
        } else if lq < p {
            Case::QDominant
        } else {
            Case::PDominant
        }
    }

    fn uses_weight(self) -> bool {
        self != Case::PDominant
    }

    fn uses_potential(self) -> bool {
        self != Case::QDominant
    }
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Case::QDominant => "Q_DOMINANT",
            Case::PDominant => "P_DOMINANT",
            Case::Balanced => "BALANCED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub dim: usize,
    pub s: f64,
    pub a_star: f64,
    pub l: f64,
    pub case: Case,
    pub gamma: f64,
    /// `∫ |x|^{l+2s} U^{4s/d+2}`.
    pub gamma1: f64,
    /// `∫ |x|^l U²`.
    pub gamma2: f64,
    pub c0: f64,
    pub c_bar: f64,
}

impl TheoryConstants {
    /// Assembles the constants from the moments of `ground` and the
    /// coefficient families; `a_star` may differ from `ground.a_star` (e.g.
    /// a box-extrapolated value).
    pub fn new(a_star: f64, ground: &GroundState, v: &PotentialSpec, m: &WeightSpec) -> Result<Self> {
        let s = ground.s;
        let dim = ground.dim();
        let l = blowup_exponent(v.p, m.q, s);
        let moments = gamma_moments(ground, l)?;
        Self::from_parts(dim, s, a_star, v.p, m.q, moments.gamma1, moments.gamma2, v.c0(), m.c_bar())
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        dim: usize,
        s: f64,
        a_star: f64,
        p: f64,
        q: f64,
        gamma1: f64,
        gamma2: f64,
        c0: f64,
        c_bar: f64,
    ) -> Result<Self> {
        let l = blowup_exponent(p, q, s);
        if !(l > 0.0) {
            return Err(FlepError::Domain(format!("l = min(q-2s, p) = {l} must be positive")));
        }
        let case = Case::classify(p, q, s);
        let d = dim as f64;
        let ratio = d / (d + 2.0 * s);
        let q_part = ratio.powf((l + 2.0 * s) / (2.0 * s)) * c_bar * gamma1;
        let p_part = ratio.powf(l / (2.0 * s)) * c0 * gamma2;
        let gamma = match case {
            Case::QDominant => q_part,
            Case::PDominant => p_part,
            Case::Balanced => q_part + p_part,
        };
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(FlepError::Domain(format!("gamma = {gamma} must be positive")));
        }
        Ok(Self {
            dim,
            s,
            a_star,
            l,
            case,
            gamma,
            gamma1,
            gamma2,
            c0,
            c_bar,
        })
    }

    pub fn energy_slope(&self) -> f64 {
        self.l / (self.l + 2.0 * self.s)
    }

    pub fn epsilon_slope(&self) -> f64 {
        1.0 / (self.l + 2.0 * self.s)
    }

    /// Prefactor of `I_pred = P (a* - a)^{l/(l+2s)}`.
    pub fn energy_prefactor(&self) -> f64 {
        let gap = self.a_star * (1.0 - 0.5f64);
        predicted_energy(self.a_star - gap, self).unwrap() / gap.powf(self.energy_slope())
    }

    /// Prefactor of `ε_pred = P (a* - a)^{1/(l+2s)}`.
    pub fn epsilon_prefactor(&self) -> f64 {
        let gap = self.a_star * (1.0 - 0.5f64);
        predicted_epsilon(self.a_star - gap, self).unwrap() / gap.powf(self.epsilon_slope())
    }

    /// `l C̄ Γ₁/(d+2s)` and/or `l C₀ Γ₂/d`, whichever the case keeps.
    fn scale_coefficient(&self) -> f64 {
        let d = self.dim as f64;
        let mut b = 0.0;
        if self.case.uses_weight() {
            b += self.l * self.c_bar * self.gamma1 / (d + 2.0 * self.s);
        }
        if self.case.uses_potential() {
            b += self.l * self.c0 * self.gamma2 / d;
        }
        b
    }

    fn check_subcritical(&self, a: f64) -> Result<f64> {
        let gap = self.a_star - a;
        if !(gap > 0.0) || !(a >= 0.0) {
            return Err(FlepError::Domain(format!(
                "a = {a} must lie in [0, a*) = [0, {})",
                self.a_star
            )));
        }
        Ok(gap)
    }
}

/// The trial scale `t` that minimizes the leading-order trial energy.
pub fn optimal_trial_scale(a: f64, c: &TheoryConstants) -> Result<f64> {
    let gap = c.check_subcritical(a)?;
    let d = c.dim as f64;
    let s = c.s;
    let denom = gap * c.a_star.powf((d - 2.0 * s) / (2.0 * s));
    Ok((c.scale_coefficient() / denom).powf(1.0 / (c.l + 2.0 * s)))
}

/// Leading-order `I₁(a)`.
pub fn predicted_energy(a: f64, c: &TheoryConstants) -> Result<f64> {
    let gap = c.check_subcritical(a)?;
    let (d, s, l) = (c.dim as f64, c.s, c.l);
    Ok((l + 2.0 * s) / l
        * (l * c.gamma / (2.0 * s)).powf(2.0 * s / (l + 2.0 * s))
        * c.a_star.powf(-(d + l) / (l + 2.0 * s))
        * ((d + 2.0 * s) / (2.0 * s) * gap).powf(l / (l + 2.0 * s)))
}

/// Leading-order `ε_a`.
pub fn predicted_epsilon(a: f64, c: &TheoryConstants) -> Result<f64> {
    let gap = c.check_subcritical(a)?;
    let (d, s, l) = (c.dim as f64, c.s, c.l);
    let lead = match c.case {
        Case::QDominant => ((d + 2.0 * s) / (l * c.c_bar * c.gamma1)).powf(1.0 / (l + 2.0 * s)),
        Case::PDominant => (d / (l * c.c0 * c.gamma2)).powf(1.0 / (l + 2.0 * s)),
        Case::Balanced => (l * c.c_bar * c.gamma1 / (d + 2.0 * s) + l * c.c0 * c.gamma2 / d)
            .powf(-1.0 / (l + 2.0 * s)),
    };
    Ok(lead
        * (2.0 * s / d).powf(1.0 / (2.0 * s))
        * c.a_star.powf((d - 2.0 * s) / (2.0 * s * (l + 2.0 * s)))
        * gap.powf(1.0 / (l + 2.0 * s)))
}

/// Ground-state data needed to build trial functions and limit profiles.
#[derive(Debug, Clone)]
pub struct Reference {
    pub ground: GroundState,
    pub profile: RadialProfile,
    /// Threshold used for the sweep; see [`extrapolated_threshold`].
    pub a_star: f64,
}

impl Reference {
    pub fn new(ground: GroundState, a_star: f64) -> Result<Self> {
        let profile = RadialProfile::from_ground_state(&ground)?;
        Ok(Self {
            ground,
            profile,
            a_star,
        })
    }

    /// `t^{d/2}/‖U‖ U(t|x - x0|)` sampled on `grid`, with the whole-space
    /// normalization (mass 1 up to box truncation).
    pub fn trial_state(&self, grid: Grid, x0: Point, t: f64) -> Result<Field> {
        let d = grid.dim() as f64;
        let c = t.powf(0.5 * d) / self.ground.mass().sqrt();
        Field::from_fn(grid, |x| c * self.profile.eval(t * grid.distance(x, x0)))
    }
}

/// Ground-state thresholds on two nested boxes and their extrapolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub coarse: f64,
    pub fine: f64,
    /// The box error of `a*` falls like `L^{-(d+2s)}`.
    pub extrapolated: f64,
}

/// Solves for the ground state on `grid` and on the box of twice the side
/// at the same spacing, and removes the leading box error of `a*` by
/// Richardson extrapolation. Returns the larger-box state.
pub fn extrapolated_threshold(grid: Grid, s: f64, opts: &GroundStateOptions) -> Result<(ThresholdEstimate, GroundState)> {
    let coarse = solve_ground_state(grid, s, opts)?;
    let big = Grid::new(grid.dim(), 2 * grid.n(), 2.0 * grid.length())?;
    let fine = solve_ground_state(big, s, opts)?;
    let order = grid.dim() as f64 + 2.0 * s;
    let factor = 2f64.powf(order) - 1.0;
    let est = ThresholdEstimate {
        coarse: coarse.a_star,
        fine: fine.a_star,
        extrapolated: fine.a_star + (fine.a_star - coarse.a_star) / factor,
    };
    Ok((est, fine))
}

/// `J_a` of the trial state at scale `t`, renormalized to unit mass on the
/// grid. Errors when `t h > 1/4`, i.e. when the core of `U` spans fewer
/// than four grid cells.
pub fn trial_energy_bound(problem: &Problem, reference: &Reference, x0: Point, t: f64) -> Result<f64> {
    let grid = *problem.grid();
    if !(t > 0.0 && t.is_finite()) {
        return Err(FlepError::Domain(format!("trial scale t = {t} must be positive")));
    }
    if t * grid.spacing() > 0.25 {
        return Err(FlepError::UnderResolved(format!(
            "trial scale t = {t} exceeds 1/(4h) = {}",
            0.25 / grid.spacing()
        )));
    }
    let u = reference.trial_state(grid, x0, t)?.normalized_to(1.0)?;
    Ok(problem.energy(&u)?.total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

/// Least squares for `log y = log P + slope log x`.
pub fn fit_powerlaw(xs: &[f64], ys: &[f64]) -> Result<PowerFit> {
    if xs.len() != ys.len() {
        return Err(FlepError::Domain(format!(
            "{} abscissae but {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 4 {
        return Err(FlepError::Domain(format!("need at least 4 points, got {}", xs.len())));
    }
    if let Some((x, y)) = xs.iter().zip(ys).find(|(x, y)| !(**x > 0.0 && **y > 0.0)) {
        return Err(FlepError::Domain(format!("non-positive data point ({x}, {y})")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(FlepError::Domain("abscissae must not all coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(PowerFit {
        slope,
        prefactor: intercept.exp(),
        r_squared,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub k_min: u32,
    pub k_max: u32,
    pub workers: usize,
    pub minimizer: MinimizerOptions,
    /// Extra row at `a = inject * a*`, for checking the supercritical regime.
    #[serde(default)]
    pub inject: Option<f64>,
    /// Keep each row's minimizer in [`SweepRow::u`].
    #[serde(default)]
    pub keep_fields: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            k_min: 3,
            k_max: 9,
            workers: 1,
            minimizer: MinimizerOptions::default(),
            inject: None,
            keep_fields: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    /// `None` for an injected row.
    pub k: Option<u32>,
    pub a: f64,
    pub gap: f64,
    pub energy: f64,
    pub energy_pred: f64,
    pub epsilon: f64,
    pub epsilon_pred: f64,
    pub lambda_a: f64,
    pub eps2s_lambda: f64,
    pub z_bar: Point,
    pub profile_err: f64,
    /// Translation of the limit profile, in rescaled units.
    pub z0: Point,
    /// `a* d/(d+2s) ε^{2s} ∫ m u^{4s/d+2}`, which tends to 1.
    pub interaction_limit: f64,
    pub t_opt: f64,
    pub trial_bound: f64,
    /// Minimizer of the trial energy over `t ∈ [t_opt/2, 2 t_opt]`.
    pub t_argmin: f64,
    pub trial_min: f64,
    pub el_residual: f64,
    pub steps: usize,
    pub outer_mass_fraction: f64,
    pub resolved: bool,
    #[serde(skip)]
    pub u: Option<Field>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepFits {
    pub energy: PowerFit,
    pub epsilon: PowerFit,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub fits: SweepFits,
    pub theory: TheoryConstants,
    pub predicted_energy_slope: f64,
    pub predicted_epsilon_slope: f64,
    pub predicted_energy_prefactor: f64,
    pub predicted_epsilon_prefactor: f64,
}

/// Everything one sweep row needs besides its coupling.
pub struct SweepProblem<'a> {
    pub potential: &'a RealizedPotential,
    pub weight: &'a RealizedWeight,
    pub reference: &'a Reference,
    pub theory: &'a TheoryConstants,
    pub s: f64,
}

/// Minimizes at every `a_k = a*(1 - 2^{-k})`, each row started from the
/// trial state at its own optimal scale, so rows are independent.
pub fn sweep_rows(sp: &SweepProblem<'_>, cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.k_min > cfg.k_max {
        return Err(FlepError::Domain(format!(
            "k range {}..={} is empty",
            cfg.k_min, cfg.k_max
        )));
    }
    let a_star = sp.theory.a_star;
    let mut jobs: Vec<(Option<u32>, f64)> = (cfg.k_min..=cfg.k_max)
        .map(|k| (Some(k), a_star * (1.0 - 2f64.powi(-(k as i32)))))
        .collect();
    if let Some(f) = cfg.inject {
        jobs.push((None, f * a_star));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| FlepError::Domain(format!("worker pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(k, a)| sweep_row(sp, cfg, k, a))
            .collect::<Result<Vec<_>>>()
    })
}

fn sweep_row(sp: &SweepProblem<'_>, cfg: &SweepConfig, k: Option<u32>, a: f64) -> Result<SweepRow> {
    let grid = *sp.potential.field.grid();
    let x0 = sp.potential.spec.x0;
    let th = sp.theory;
    let problem = Problem::new(
        sp.potential.field.clone(),
        sp.weight.field.clone(),
        a,
        sp.s,
        sp.potential.spec.v_inf,
    )?;
    let subcritical = a < th.a_star;
    // Above a* there is no optimal scale; start from the finest resolvable trial.
    let t_opt = if subcritical {
        optimal_trial_scale(a, th)?
    } else {
        0.25 / grid.spacing()
    };
    let t_init = t_opt.min(0.25 / grid.spacing());
    let u0 = sp.reference.trial_state(grid, x0, t_init)?;
    let r = minimize_with_mass(1.0, &u0, &problem, &cfg.minimizer)?;
    let (energy_pred, epsilon_pred) = if subcritical {
        (predicted_energy(a, th)?, predicted_epsilon(a, th)?)
    } else {
        (f64::NAN, f64::NAN)
    };
    let bound = |t: f64| trial_energy_bound(&problem, sp.reference, x0, t);
    let trial_bound = bound(t_opt).unwrap_or(f64::NAN);
    let (t_argmin, trial_min) = if trial_bound.is_finite() {
        let t_hi = (2.0 * t_opt).min(0.25 / grid.spacing());
        let lt = golden_section((0.5 * t_opt).ln(), t_hi.ln(), 1e-4, |lt| {
            bound(lt.exp()).unwrap_or(f64::INFINITY)
        });
        let t = lt.exp();
        (t, bound(t)?)
    } else {
        (f64::NAN, f64::NAN)
    };
    let (profile_err, z0) = profile_error(&r.u, sp.reference, r.epsilon, r.z_bar, sp.s)?;
    let d = grid.dim() as f64;
    let s = sp.s;
    let interaction_limit = th.a_star * d / (d + 2.0 * s) * r.epsilon.powf(2.0 * s) * r.energy.interaction;
    Ok(SweepRow {
        k,
        a,
        gap: th.a_star - a,
        energy: r.energy.total,
        energy_pred,
        epsilon: r.epsilon,
        epsilon_pred,
        lambda_a: r.lambda_a,
        eps2s_lambda: r.epsilon.powf(2.0 * s) * r.lambda_a,
        z_bar: r.z_bar,
        profile_err,
        z0,
        interaction_limit,
        t_opt,
        trial_bound,
        t_argmin,
        trial_min,
        el_residual: r.el_residual,
        steps: r.steps,
        outer_mass_fraction: r.outer_mass_fraction,
        resolved: r.resolved,
        u: cfg.keep_fields.then_some(r.u),
    })
}

/// Relative `L²` distance between `u` and the limit profile
/// `(2s/d)^{d/4s} U((2s/d)^{1/2s}(y + z0))/‖U‖` of the rescaled state
/// `ε^{d/2} u(ε y + z̄)`, minimized over `z0`.
///
/// The distance is evaluated in the original variables, where the limit
/// profile is the trial state of scale `(2s/d)^{1/2s}/ε` centered at `z̄`.
/// The best translation comes from the cross-correlation peak, refined
/// parabolically and applied as a Fourier shift.
pub fn profile_error(u: &Field, reference: &Reference, epsilon: f64, z_bar: Point, s: f64) -> Result<(f64, Point)> {
    let grid = *u.grid();
    let d = grid.dim() as f64;
    let t = (2.0 * s / d).powf(1.0 / (2.0 * s)) / epsilon;
    let g = reference.trial_state(grid, z_bar, t)?;
    let sp = Spectral::new(grid);
    let (fu, fg) = sp.forward_pair(u.values(), g.values());
    let cross: Vec<Complex64> = fu.iter().zip(&fg).map(|(a, b)| a * b.conj()).collect();
    let corr = sp.inverse_real(cross, u.sup_norm() * g.sup_norm() * grid.len() as f64)?;
    let corr = Field::new(grid, corr)?;
    let idx = corr.argmax_abs();
    let axes = grid.axis_indices(idx);
    let n = grid.n();
    let h = grid.spacing();
    let mut shift = [0.0; 2];
    for a in 0..grid.dim() {
        let m = axes[a];
        let mut lo = axes;
        let mut hi = axes;
        lo[a] = (m + n - 1) % n;
        hi[a] = (m + 1) % n;
        let (fm, f0, fp) = (corr.get(grid.flat_index(lo)), corr.get(idx), corr.get(grid.flat_index(hi)));
        let denom = fm - 2.0 * f0 + fp;
        let off = if denom < 0.0 {
            (0.5 * (fm - fp) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let whole = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
        shift[a] = (whole + off) * h;
    }
    let moved = sp.translate(&g, shift)?;
    let diff = u.zip_map(&moved, |x, y| x - y)?;
    let err = (diff.mass() / u.mass()).sqrt();
    // g(x - τ) centered at z̄ + τ matches U(κ(y + z0)) with y = (x - z̄)/ε.
    let z0 = [-shift[0] / epsilon, -shift[1] / epsilon];
    Ok((err, z0))
}

/// Fits over resolved rows (injected rows excluded).
pub fn summarize(rows: Vec<SweepRow>, theory: &TheoryConstants) -> Result<SweepReport> {
    let resolved: Vec<&SweepRow> = rows.iter().filter(|r| r.resolved && r.k.is_some()).collect();
    if resolved.len() < 4 {
        return Err(FlepError::InsufficientResolution {
            resolved: resolved.len(),
        });
    }
    let gaps: Vec<f64> = resolved.iter().map(|r| r.gap).collect();
    let energies: Vec<f64> = resolved.iter().map(|r| r.energy).collect();
    let eps: Vec<f64> = resolved.iter().map(|r| r.epsilon).collect();
    let fits = SweepFits {
        energy: fit_powerlaw(&gaps, &energies)?,
        epsilon: fit_powerlaw(&gaps, &eps)?,
        points: resolved.len(),
    };
    Ok(SweepReport {
        fits,
        theory: *theory,
        predicted_energy_slope: theory.energy_slope(),
        predicted_epsilon_slope: theory.epsilon_slope(),
        predicted_energy_prefactor: theory.energy_prefactor(),
        predicted_epsilon_prefactor: theory.epsilon_prefactor(),
        rows,
    })
}

pub fn run_sweep(sp: &SweepProblem<'_>, cfg: &SweepConfig) -> Result<SweepReport> {
    summarize(sweep_rows(sp, cfg)?, sp.theory)
}

/// `4s/d`, the limit of `-ε^{2s} λ_a`.
pub fn multiplier_limit(dim: usize, s: f64) -> f64 {
    critical_exponent(dim, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constants(p: f64, q: f64) -> TheoryConstants {
        TheoryConstants::from_parts(2, 0.5, 3.27, p, q, 1.76, 4.0, 0.45, 0.2).unwrap()
    }

    #[test]
    fn case_dispatch() {
        assert_eq!(Case::classify(3.9, 3.0, 0.5), Case::QDominant);
        assert_eq!(Case::classify(2.0, 4.5, 0.5), Case::PDominant);
        assert_eq!(Case::classify(2.0, 3.0, 0.5), Case::Balanced);
        assert_eq!(Case::classify(2.0 + 1e-13, 3.0, 0.5), Case::Balanced);
        assert_eq!(Case::classify(2.0 + 1e-9, 3.0, 0.5), Case::QDominant);
        for (p, q) in [(3.9, 3.0), (2.0, 4.5), (2.0, 3.0)] {
            let c = constants(p, q);
            let r = 2.0f64 / 3.0;
            let gq = r.powf((c.l + 1.0) / 1.0) * c.c_bar * c.gamma1;
            let gp = r.powf(c.l) * c.c0 * c.gamma2;
            let want = match c.case {
                Case::QDominant => gq,
                Case::PDominant => gp,
                Case::Balanced => gq + gp,
            };
            assert_eq!(c.gamma, want);
        }
    }

    #[test]
    fn predictions_reject_supercritical_coupling() {
        let c = constants(2.0, 4.5);
        assert!(optimal_trial_scale(3.27, &c).is_err());
        assert!(predicted_energy(3.3, &c).is_err());
        assert!(predicted_epsilon(4.0, &c).is_err());
    }

    /// Leading-order trial energy `A t^{2s} + B t^{-l}` with the kinetic
    /// deficit and the potential/weight terms of a concentrating trial state.
    fn leading_trial_energy(c: &TheoryConstants, a: f64, t: f64) -> f64 {
        let (d, s, l) = (c.dim as f64, c.s, c.l);
        let big_a = d * (c.a_star - a) / (2.0 * s * c.a_star);
        let norm = c.a_star.powf(-d / (2.0 * s));
        let mut b = 0.0;
        if c.case.uses_weight() {
            b += d / (d + 2.0 * s) * c.c_bar * c.gamma1 * norm;
        }
        if c.case.uses_potential() {
            b += c.c0 * c.gamma2 * norm;
        }
        big_a * t.powf(2.0 * s) + b * t.powf(-l)
    }

    #[test]
    fn prediction_is_the_minimum_of_the_leading_trial_energy() {
        for (p, q) in [(3.9, 3.0), (2.0, 4.5), (2.0, 3.0), (1.2, 2.5)] {
            let c = constants(p, q);
            for k in [3, 6, 9] {
                let a = c.a_star * (1.0 - 2f64.powi(-k));
                let lt = golden_section(-10.0, 10.0, 1e-12, |lt| leading_trial_energy(&c, a, lt.exp()));
                let t = optimal_trial_scale(a, &c).unwrap();
                assert!((lt.exp() / t - 1.0).abs() < 1e-6, "{p} {q} {k}");
                let e = leading_trial_energy(&c, a, lt.exp());
                let rel = (predicted_energy(a, &c).unwrap() / e - 1.0).abs();
                assert!(rel < 1e-10, "{p} {q} {k}: {rel}");
                // ε of the optimal trial state is (2s/d)^{1/2s}/t.
                let eps = (2.0 * c.s / c.dim as f64).powf(1.0 / (2.0 * c.s)) / t;
                assert!((predicted_epsilon(a, &c).unwrap() / eps - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lower_bound_equality_at_predicted_scale() {
        // (a*-a)/a* ε^{-2s} + D ε^l evaluated at ε_pred equals I_pred.
        for (p, q) in [(3.9, 3.0), (2.0, 4.5), (2.0, 3.0)] {
            let c = constants(p, q);
            let (d, s, l) = (2.0, 0.5, c.l);
            let base = (2.0f64 * s / d).powf(-l / (2.0 * s)) * c.a_star.powf(-d / (2.0 * s));
            let mut coef = 0.0;
            if c.case.uses_potential() {
                coef += c.c0 * base * c.gamma2;
            }
            if c.case.uses_weight() {
                coef += d / (d + 2.0 * s) * c.c_bar * base * c.gamma1;
            }
            let a = c.a_star * (1.0 - 2f64.powi(-7));
            let e = predicted_epsilon(a, &c).unwrap();
            let lhs = (c.a_star - a) / c.a_star * e.powf(-2.0 * s) + coef * e.powf(l);
            assert!((lhs / predicted_energy(a, &c).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn balanced_scale_uses_combined_coefficient() {
        let c = constants(2.0, 3.0);
        let a = c.a_star * 0.99;
        let (d, s, l) = (2.0f64, 0.5f64, 2.0f64);
        let comb = l * c.c_bar * c.gamma1 / (d + 2.0 * s) + l * c.c0 * c.gamma2 / d;
        let want = (comb / ((c.a_star - a) * c.a_star.powf((d - 2.0 * s) / (2.0 * s)))).powf(1.0 / (l + 2.0 * s));
        assert!((optimal_trial_scale(a, &c).unwrap() / want - 1.0).abs() < 1e-14);
        let eps = comb.powf(-1.0 / (l + 2.0 * s))
            * (2.0 * s / d).powf(1.0 / (2.0 * s))
            * c.a_star.powf((d - 2.0 * s) / (2.0 * s * (l + 2.0 * s)))
            * (c.a_star - a).powf(1.0 / (l + 2.0 * s));
        assert!((predicted_epsilon(a, &c).unwrap() / eps - 1.0).abs() < 1e-14);
    }

    #[test]
    fn energy_slope_increases_towards_one() {
        let mut prev = 0.0;
        for l in [0.5, 1.0, 2.0, 4.0, 8.0, 64.0] {
            let c = TheoryConstants::from_parts(2, 0.5, 3.27, l, l + 1.0 + 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
            assert!(c.energy_slope() > prev && c.energy_slope() < 1.0);
            prev = c.energy_slope();
        }
        assert!(prev > 0.98);
    }

    #[test]
    fn prefactors_reproduce_predictions() {
        let c = constants(3.9, 3.0);
        for gap in [0.1, 0.01, 0.001] {
            let a = c.a_star - gap;
            let i = c.energy_prefactor() * gap.powf(c.energy_slope());
            let e = c.epsilon_prefactor() * gap.powf(c.epsilon_slope());
            assert!((i / predicted_energy(a, &c).unwrap() - 1.0).abs() < 1e-12);
            assert!((e / predicted_epsilon(a, &c).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_exact_power() {
        let xs: Vec<f64> = (1..=8).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let f = fit_powerlaw(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.prefactor - 3.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let f = fit_powerlaw(&xs, &[2.5; 8]).unwrap();
        assert!(f.slope.abs() < 1e-14);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_powerlaw(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_powerlaw(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 3.0, 4.0]).is_err());
        assert!(fit_powerlaw(&[1.0, -2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(fit_powerlaw(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn fit_noisy_square_root() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..40).map(|i| 2f64.powf(-(i as f64) / 4.0)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| x.sqrt() * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))
            .collect();
        let f = fit_powerlaw(&xs, &ys).unwrap();
        assert!((f.slope - 0.5).abs() < 0.005);
    }

    proptest! {
        #[test]
        fn halving_the_gap_scales_t(p in 0.5f64..3.9, q in 1.2f64..6.9, k in 2i32..12) {
            let c = TheoryConstants::from_parts(2, 0.5, 3.27, p, q, 1.7, 4.0, 0.3, 0.4).unwrap();
            let a1 = c.a_star * (1.0 - 2f64.powi(-k));
            let a2 = c.a_star * (1.0 - 2f64.powi(-k - 1));
            let r = optimal_trial_scale(a2, &c).unwrap() / optimal_trial_scale(a1, &c).unwrap();
            prop_assert!((r / 2f64.powf(1.0 / (c.l + 1.0)) - 1.0).abs() < 1e-12);
            let er = predicted_energy(a2, &c).unwrap() / predicted_energy(a1, &c).unwrap();
            prop_assert!((er.log2() + c.energy_slope()).abs() < 1e-10);
            let pr = predicted_epsilon(a2, &c).unwrap() / predicted_epsilon(a1, &c).unwrap();
            prop_assert!((pr.log2() + c.epsilon_slope()).abs() < 1e-10);
        }
    }
}
