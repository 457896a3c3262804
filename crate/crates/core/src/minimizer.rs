//! Minimization of
//!
//! ```text
//! J_a(u) = ∫ |(-Δ)^{s/2} u|² + V u² dx - a d/(d+2s) ∫ m |u|^{4s/d+2} dx
//! ```
//!
//! over the sphere `∫ u² = λ`, the Lagrange multiplier of the Euler–Lagrange
//! equation `(-Δ)^s u + V u = (λ_a/2) u + a m |u|^{4s/d} u`, the blow-up scale
//! `ε = K(u)^{-1/(2s)}` and the concentration point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FlepError, Result};
use crate::grid::{abs_pow, dot, Field, Grid, Point};
use crate::ground_state::{critical_exponent, interpolated_peak};
use crate::spectral::{FractionalLaplacian, FractionalOrder};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub interaction: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(kinetic: f64, potential: f64, interaction: f64, a: f64, coupling: f64) -> Self {
        Self {
            kinetic,
            potential,
            interaction,
            total: kinetic + potential - a * coupling * interaction,
        }
    }
}

/// `V`, `m`, `a` and the operator for one minimization.
#[derive(Debug)]
pub struct Problem {
    op: FractionalLaplacian,
    v: Field,
    m: Field,
    a: f64,
    /// `V^∞`, used by the divergence detector.
    v_inf: f64,
}

impl Problem {
    pub fn new(v: Field, m: Field, a: f64, s: f64, v_inf: f64) -> Result<Self> {
        v.check_same_grid(&m)?;
        if !(a >= 0.0 && a.is_finite()) {
            return Err(FlepError::Domain(format!("coupling a = {a} must be >= 0")));
        }
        let op = FractionalLaplacian::new(*v.grid(), FractionalOrder::new(s)?);
        Ok(Self {
            op,
            v,
            m,
            a,
            v_inf,
        })
    }

    /// Same coefficients with another coupling, reusing the FFT plans.
    pub fn with_coupling(&self, a: f64) -> Result<Self> {
        Self::new(self.v.clone(), self.m.clone(), a, self.s(), self.v_inf)
    }

    pub fn grid(&self) -> &Grid {
        self.v.grid()
    }

    pub fn s(&self) -> f64 {
        self.op.s()
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn potential(&self) -> &Field {
        &self.v
    }

    pub fn weight(&self) -> &Field {
        &self.m
    }

    pub fn operator(&self) -> &FractionalLaplacian {
        &self.op
    }

    fn power(&self) -> f64 {
        critical_exponent(self.grid().dim(), self.s())
    }

    /// `d/(d+2s)`.
    fn coupling(&self) -> f64 {
        let d = self.grid().dim() as f64;
        d / (d + 2.0 * self.s())
    }

    pub fn energy(&self, u: &Field) -> Result<EnergyBreakdown> {
        u.check_same_grid(&self.v)?;
        let kinetic = self.op.dirichlet_energy(u)?;
        Ok(self.breakdown(u.values(), kinetic))
    }

    fn breakdown(&self, u: &[f64], kinetic: f64) -> EnergyBreakdown {
        let w = self.grid().cell_volume();
        let pp = self.power() + 2.0;
        let mut potential = 0.0;
        let mut interaction = 0.0;
        for ((x, v), m) in u.iter().zip(self.v.values()).zip(self.m.values()) {
            potential += v * x * x;
            interaction += m * abs_pow(*x, pp);
        }
        EnergyBreakdown::new(kinetic, potential * w, interaction * w, self.a, self.coupling())
    }

    /// `g = Au + Vu - a m |u|^p u` given `Au`.
    fn gradient_with(&self, u: &[f64], au: &[f64], out: &mut [f64]) {
        let p = self.power();
        for i in 0..u.len() {
            let x = u[i];
            out[i] =
                au[i] + self.v.values()[i] * x - self.a * self.m.values()[i] * abs_pow(x, p) * x;
        }
    }

    /// Scale `‖Au‖ + ‖Vu‖ + ‖a m u^{1+p}‖` that normalizes the EL residual.
    fn residual_scale(&self, u: &[f64], au: &[f64]) -> f64 {
        let p = self.power();
        let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
        for i in 0..u.len() {
            let x = u[i];
            s1 += au[i] * au[i];
            s2 += (self.v.values()[i] * x).powi(2);
            s3 += (self.a * self.m.values()[i] * abs_pow(x, p) * x).powi(2);
        }
        let w = self.grid().cell_volume();
        ((s1 * w).sqrt() + (s2 * w).sqrt() + (s3 * w).sqrt()).max(f64::MIN_POSITIVE)
    }

    fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let sp = self.op.spectral();
        let sym = self.op.symbol();
        let spec: Vec<Complex64> = sp
            .forward(u)
            .into_iter()
            .zip(sym)
            .map(|(c, m)| c * m)
            .collect();
        let scale = u.iter().fold(0.0f64, |a, v| a.max(v.abs())) * sym.iter().fold(0.0f64, |a, v| a.max(*v));
        sp.inverse_real(spec, scale)
    }

    /// Exact diagnostics of a candidate minimizer.
    pub fn critical_point_diagnostics(&self, u: &Field) -> Result<CriticalPoint> {
        u.check_same_grid(&self.v)?;
        let au = self.apply(u.values())?;
        let w = self.grid().cell_volume();
        let kinetic = w * dot(u.values(), &au);
        let energy = self.breakdown(u.values(), kinetic);
        let mut g = vec![0.0; u.values().len()];
        self.gradient_with(u.values(), &au, &mut g);
        let mass = u.mass();
        let mu = w * dot(&g, u.values()) / mass;
        let res2: f64 = g.iter().zip(u.values()).map(|(gi, ui)| (gi - mu * ui).powi(2)).sum();
        let el_residual = (res2 * w).sqrt() / self.residual_scale(u.values(), &au);
        Ok(CriticalPoint {
            energy,
            mass,
            projected_multiplier: 2.0 * mu,
            el_residual,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub energy: EnergyBreakdown,
    pub mass: f64,
    /// `2⟨Au + Vu - a m u^{1+p}, u⟩ / ∫u²`.
    pub projected_multiplier: f64,
    pub el_residual: f64,
}

/// `J_a(u)` broken into its three integrals.
pub fn energy(u: &Field, v: &Field, m: &Field, a: f64, s: f64) -> Result<EnergyBreakdown> {
    u.check_same_grid(v)?;
    Problem::new(v.clone(), m.clone(), a, s, 1.0)?.energy(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Semi-implicit normalized gradient flow.
    GradientFlow,
    /// Preconditioned nonlinear conjugate gradients on the mass sphere.
    PreconditionedCg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizerOptions {
    /// Target for the relative Euler–Lagrange residual.
    pub tol: f64,
    pub max_steps: usize,
    /// Gradient-flow step; `None` picks `0.1 ε^{2s}` from the initial guess.
    pub tau: Option<f64>,
    pub method: Method,
}

impl Default for MinimizerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_steps: 20_000,
            tau: None,
            method: Method::PreconditionedCg,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizerResult {
    pub u: Field,
    pub a: f64,
    pub s: f64,
    pub mass: f64,
    pub energy: EnergyBreakdown,
    pub lambda_a: f64,
    pub projected_multiplier: f64,
    pub epsilon: f64,
    pub z_bar: Point,
    pub el_residual: f64,
    pub steps: usize,
    /// Share of the mass farther than `0.4 L` from `z_bar`.
    pub outer_mass_fraction: f64,
    /// `ε >= 4h` and the outer share below 1%.
    pub resolved: bool,
    /// Energy after each accepted step.
    pub energy_history: Vec<f64>,
}

/// Sub-grid peak location of `|u|`.
pub fn concentration_point(u: &Field) -> Result<Point> {
    let max = u.sup_norm();
    let mean = u.values().iter().map(|v| v.abs()).sum::<f64>() / u.values().len() as f64;
    if !(max - mean > 1e-12 * max.max(f64::MIN_POSITIVE)) {
        return Err(FlepError::NoConcentration);
    }
    Ok(interpolated_peak(u))
}

/// `λ_a = (2 I - a 4s/(d+2s) ∫ m u^{p+2}) / ∫u²`, checked against the
/// projection of the Euler–Lagrange equation onto `u`.
pub fn lagrange_multiplier(r: &MinimizerResult) -> Result<f64> {
    let mismatch = (r.lambda_a - r.projected_multiplier).abs() / r.lambda_a.abs().max(1e-300);
    if mismatch > 1e-4 || !(r.el_residual <= 1e-4) {
        return Err(FlepError::NotCriticalPoint {
            mismatch: mismatch.max(r.el_residual),
        });
    }
    Ok(r.lambda_a)
}

fn closed_form_multiplier(e: &EnergyBreakdown, a: f64, dim: usize, s: f64, mass: f64) -> f64 {
    let d = dim as f64;
    (2.0 * e.total - a * 4.0 * s / (d + 2.0 * s) * e.interaction) / mass
}

fn outer_mass_fraction(u: &Field, center: Point) -> f64 {
    let grid = u.grid();
    let cut = 0.4 * grid.length();
    let mut outer = 0.0;
    let mut total = 0.0;
    for (i, v) in u.values().iter().enumerate() {
        let w = v * v;
        total += w;
        if grid.distance(grid.point(i), center) > cut {
            outer += w;
        }
    }
    outer / total
}

/// Minimizes on the sphere of mass `∫u0²` starting from `u0`.
pub fn gradient_flow_minimize(u0: &Field, problem: &Problem, opts: &MinimizerOptions) -> Result<MinimizerResult> {
    minimize_with_mass(u0.mass(), u0, problem, opts)
}

/// Minimizes on the sphere `∫u² = mass`; `u0` is rescaled onto it first.
pub fn minimize_with_mass(
    mass: f64,
    u0: &Field,
    problem: &Problem,
    opts: &MinimizerOptions,
) -> Result<MinimizerResult> {
    u0.check_same_grid(problem.potential())?;
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(FlepError::Domain(format!("mass {mass} must be positive")));
    }
    if !(u0.mass() > 0.0) {
        return Err(FlepError::Domain("initial guess is the zero field".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(FlepError::Domain(format!("tolerance {} must be positive", opts.tol)));
    }
    let start = u0.map(f64::abs)?.normalized_to(mass)?;
    let (u, steps, history) = match opts.method {
        Method::PreconditionedCg => Cg::new(problem, mass).run(start.into_values(), opts)?,
        Method::GradientFlow => gradient_flow(problem, mass, start.into_values(), opts)?,
    };
    finish(problem, mass, u, steps, history)
}

fn finish(problem: &Problem, mass: f64, u: Vec<f64>, steps: usize, energy_history: Vec<f64>) -> Result<MinimizerResult> {
    let grid = *problem.grid();
    let u = Field::new(grid, u)?.normalized_to(mass)?;
    let cp = problem.critical_point_diagnostics(&u)?;
    let s = problem.s();
    let epsilon = cp.energy.kinetic.powf(-1.0 / (2.0 * s));
    let z_bar = concentration_point(&u)?;
    let outer = outer_mass_fraction(&u, z_bar);
    Ok(MinimizerResult {
        a: problem.a(),
        s,
        mass: u.mass(),
        energy: cp.energy,
        lambda_a: closed_form_multiplier(&cp.energy, problem.a(), grid.dim(), s, mass),
        projected_multiplier: cp.projected_multiplier,
        epsilon,
        z_bar,
        el_residual: cp.el_residual,
        steps,
        outer_mass_fraction: outer,
        resolved: epsilon >= 4.0 * grid.spacing() && outer < 0.01,
        energy_history,
        u,
    })
}

/// Raises `EnergyUnbounded` once the energy certifies the supercritical
/// regime: far below any subcritical value, or negative while concentrated
/// below the grid resolution.
fn check_divergence(problem: &Problem, mass: f64, e: &EnergyBreakdown, steps: usize) -> Result<()> {
    let floor = -10.0 * problem.v_inf * mass - 10.0;
    let eps = e.kinetic.powf(-1.0 / (2.0 * problem.s()));
    if e.total < floor || (e.total < 0.0 && eps < 4.0 * problem.grid().spacing()) {
        return Err(FlepError::EnergyUnbounded {
            energy: e.total,
            steps,
        });
    }
    Ok(())
}

fn monotone(new: f64, old: f64) -> bool {
    new <= old + 1e-12 * old.abs()
}

/// Riemannian nonlinear CG on `{∫u² = mass}` with the preconditioner
/// `(A + σ)^{-1}`, PR+ updates, and exact great-circle line searches.
struct Cg<'a> {
    pb: &'a Problem,
    mass: f64,
    w: f64,
}

/// Line-search state along `u(θ) = cos θ u + sin θ d̂`.
struct Line<'b> {
    u: &'b [f64],
    d: &'b [f64],
    /// Quadratic parts `⟨u,(A+V)u⟩`, `⟨u,(A+V)d̂⟩`, `⟨d̂,(A+V)d̂⟩`.
    quu: f64,
    qud: f64,
    qdd: f64,
}

impl Cg<'_> {
    fn new(pb: &Problem, mass: f64) -> Cg<'_> {
        Cg {
            pb,
            mass,
            w: pb.grid().cell_volume(),
        }
    }

    fn ip(&self, a: &[f64], b: &[f64]) -> f64 {
        self.w * dot(a, b)
    }

    /// Energy and its `θ`-derivative.
    fn line_eval(&self, ln: &Line, theta: f64) -> (f64, f64) {
        let (s, c) = theta.sin_cos();
        let q = c * c * ln.quu + 2.0 * c * s * ln.qud + s * s * ln.qdd;
        let dq = 2.0 * (c * c - s * s) * ln.qud + 2.0 * c * s * (ln.qdd - ln.quu);
        let p = self.pb.power();
        let m = self.pb.m.values();
        let (mut wm, mut dwm) = (0.0, 0.0);
        for ((&u, &d), &mi) in ln.u.iter().zip(ln.d).zip(m) {
            let x = c * u + s * d;
            let dx = -s * u + c * d;
            let xp = abs_pow(x, p);
            wm += mi * xp * x * x;
            dwm += mi * xp * x * dx;
        }
        let k = self.pb.a * self.pb.coupling();
        (q - k * wm * self.w, dq - k * (p + 2.0) * dwm * self.w)
    }

    /// Returns an accepted `θ` with its energy, or `None` when no decrease
    /// was found.
    fn line_search(&self, ln: &Line, e0: f64, de0: f64, guess: f64) -> Option<(f64, f64)> {
        let theta_max = 0.5;
        let (mut lo, mut dlo) = (0.0, de0);
        let mut hi: Option<(f64, f64)> = None;
        let mut theta = guess.clamp(1e-12, theta_max);
        let mut best: Option<(f64, f64)> = None;
        for _ in 0..30 {
            let (e, de) = self.line_eval(ln, theta);
            if monotone(e, e0) && best.is_none_or(|(_, eb)| e < eb) {
                best = Some((theta, e));
            }
            if monotone(e, e0) && de.abs() <= 0.1 * de0.abs() {
                return Some((theta, e));
            }
            if de < 0.0 && monotone(e, e0) {
                lo = theta;
                dlo = de;
            } else {
                hi = Some((theta, de));
            }
            theta = match hi {
                None => {
                    if lo >= theta_max {
                        break;
                    }
                    (2.0 * lo).min(theta_max)
                }
                Some((th, dh)) => {
                    // Secant on the derivative, kept inside the bracket.
                    let t = if dh > 0.0 { lo - dlo * (th - lo) / (dh - dlo) } else { f64::NAN };
                    if t.is_finite() && t > lo + 0.01 * (th - lo) && t < th - 0.01 * (th - lo) {
                        t
                    } else {
                        0.5 * (lo + th)
                    }
                }
            };
            if let Some((th, _)) = hi {
                if th - lo < 1e-15 {
                    break;
                }
            }
        }
        best
    }

    fn run(&self, mut u: Vec<f64>, opts: &MinimizerOptions) -> Result<(Vec<f64>, usize, Vec<f64>)> {
        let pb = self.pb;
        let sp = pb.op.spectral();
        let sym = pb.op.symbol();
        let n = u.len();
        let zero = Complex64::new(0.0, 0.0);
        let mut work = vec![zero; n];
        let mut r_hat = vec![zero; n];
        let mut u_hat = vec![zero; n];
        let mut z1 = vec![0.0; n];
        let mut z2 = vec![0.0; n];
        let mut g = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut xi = vec![0.0; n];
        let mut a_xi = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut ad = vec![0.0; n];
        let mut dhat = vec![0.0; n];
        let mut a_dhat = vec![0.0; n];

        let mut au = pb.apply(&u)?;
        let mut history = Vec::new();
        let mut theta_guess = 0.05;
        let mut r_xi_old = 0.0;
        let mut xi_old = vec![0.0; n];
        let mut since_refresh = 0usize;
        let mut restart = true;
        let mut sigma = 1.0;

        for step in 0..opts.max_steps {
            if since_refresh >= 20 {
                au = pb.apply(&u)?;
                since_refresh = 0;
                restart = true;
            }
            let kinetic = self.ip(&u, &au);
            let e = pb.breakdown(&u, kinetic);
            check_divergence(pb, self.mass, &e, step)?;
            history.push(e.total);

            pb.gradient_with(&u, &au, &mut g);
            let mu = self.ip(&g, &u) / self.mass;
            for i in 0..n {
                r[i] = g[i] - mu * u[i];
            }
            let rnorm = self.ip(&r, &r).sqrt();
            let el = rnorm / pb.residual_scale(&u, &au);
            if el <= opts.tol {
                // Confirm on an exact operator application before stopping.
                let exact = pb.apply(&u)?;
                let drift = exact.iter().zip(&au).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                au = exact;
                since_refresh = 0;
                if drift <= 1e-9 * au.iter().fold(0.0f64, |a, v| a.max(v.abs())) {
                    if u.iter().all(|&x| x >= 0.0) {
                        return Ok((u, step, history));
                    }
                    for x in &mut u {
                        *x = x.abs();
                    }
                    au = pb.apply(&u)?;
                }
                restart = true;
                continue;
            }

            if restart {
                sigma = (-mu).max(0.0) + 0.1 * kinetic / self.mass + 1e-12;
            }
            // z1 = (A+σ)^{-1} r, z2 = (A+σ)^{-1} u; A z = (input) - σ z.
            sp.forward_pair_into(&r, &u, &mut work, &mut r_hat, &mut u_hat);
            for k in 0..n {
                let inv = 1.0 / (sym[k] + sigma);
                let a = r_hat[k] * inv;
                let b = u_hat[k] * inv;
                work[k] = a + Complex64::new(-b.im, b.re);
            }
            sp.inverse_pair_into(&mut work, &mut z1, &mut z2)?;
            let theta_p = self.ip(&z1, &u) / self.ip(&z2, &u);
            for i in 0..n {
                xi[i] = z1[i] - theta_p * z2[i];
                a_xi[i] = (r[i] - sigma * z1[i]) - theta_p * (u[i] - sigma * z2[i]);
            }
            let r_xi = self.ip(&r, &xi);
            let beta = if restart || r_xi_old <= 0.0 {
                0.0
            } else {
                let diff: f64 = self.w * r.iter().zip(xi.iter().zip(&xi_old)).map(|(ri, (x, xo))| ri * (x - xo)).sum::<f64>();
                (diff / r_xi_old).max(0.0)
            };
            for i in 0..n {
                d[i] = -xi[i] + beta * d[i];
                ad[i] = -a_xi[i] + beta * ad[i];
            }
            // Keep the direction tangent.
            let c = self.ip(&d, &u) / self.mass;
            for i in 0..n {
                d[i] -= c * u[i];
                ad[i] -= c * au[i];
            }
            let mut slope = self.ip(&r, &d);
            if !(slope < 0.0) {
                for i in 0..n {
                    d[i] = -xi[i];
                    ad[i] = -a_xi[i];
                }
                slope = self.ip(&r, &d);
            }
            xi_old.copy_from_slice(&xi);
            r_xi_old = r_xi;
            restart = false;

            let dn = (self.ip(&d, &d) / self.mass).sqrt();
            if !(dn > 0.0) || !(slope < 0.0) {
                return Err(FlepError::MaxSteps {
                    steps: step,
                    residual: el,
                    history: history.clone(),
                });
            }
            for i in 0..n {
                dhat[i] = d[i] / dn;
                a_dhat[i] = ad[i] / dn;
            }
            let v = pb.v.values();
            let vu: f64 = self.w * (0..n).map(|i| v[i] * u[i] * u[i]).sum::<f64>();
            let vud: f64 = self.w * (0..n).map(|i| v[i] * u[i] * dhat[i]).sum::<f64>();
            let vdd: f64 = self.w * (0..n).map(|i| v[i] * dhat[i] * dhat[i]).sum::<f64>();
            let kud = 0.5 * (self.ip(&u, &a_dhat) + self.ip(&au, &dhat));
            let line = Line {
                u: &u,
                d: &dhat,
                quu: kinetic + vu,
                qud: kud + vud,
                qdd: self.ip(&dhat, &a_dhat) + vdd,
            };
            let de0 = 2.0 * slope / dn;
            let Some((theta, _)) = self.line_search(&line, e.total, de0, theta_guess) else {
                if beta == 0.0 && since_refresh == 0 {
                    return Err(FlepError::MaxSteps {
                        steps: step,
                        residual: el,
                        history: history.clone(),
                    });
                }
                restart = true;
                since_refresh = 20;
                continue;
            };
            theta_guess = theta;
            let (sn, cs) = theta.sin_cos();
            for i in 0..n {
                u[i] = cs * u[i] + sn * dhat[i];
                au[i] = cs * au[i] + sn * a_dhat[i];
            }
            let f = (self.mass / self.ip(&u, &u)).sqrt();
            for i in 0..n {
                u[i] *= f;
                au[i] *= f;
            }
            since_refresh += 1;
        }
        Err(FlepError::MaxSteps {
            steps: opts.max_steps,
            residual: f64::NAN,
            history,
        })
    }
}

/// `u ← |(1 + τA)^{-1}[u + τ(μ - V + a m |u|^p) u]|` renormalized, with
/// `μ` the current Rayleigh multiplier and `τ` halved whenever the energy
/// would increase.
fn gradient_flow(
    pb: &Problem,
    mass: f64,
    mut u: Vec<f64>,
    opts: &MinimizerOptions,
) -> Result<(Vec<f64>, usize, Vec<f64>)> {
    let sp = pb.op.spectral();
    let sym = pb.op.symbol();
    let w = pb.grid().cell_volume();
    let p = pb.power();
    let n = u.len();
    let kinetic = pb.op.energy_of_spectrum(&sp.forward(&u));
    let mut e = pb.breakdown(&u, kinetic);
    let mut tau = opts.tau.unwrap_or(0.1 / kinetic);
    if !(tau > 0.0) {
        return Err(FlepError::Domain(format!("step {tau} must be positive")));
    }
    let mut history = vec![e.total];
    let mut b = vec![0.0; n];
    let mut el = f64::NAN;
    for step in 0..opts.max_steps {
        check_divergence(pb, mass, &e, step)?;
        if step % 10 == 0 {
            let cp = pb.critical_point_diagnostics(&Field::new(*pb.grid(), u.clone())?)?;
            el = cp.el_residual;
            if el <= opts.tol {
                return Ok((u, step, history));
            }
        }
        let mu = (e.kinetic + e.potential - pb.a * e.interaction) / mass;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                let x = u[i];
                b[i] = x + tau * (mu - pb.v.values()[i] + pb.a * pb.m.values()[i] * abs_pow(x, p)) * x;
            }
            let scale = b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let spec: Vec<Complex64> = sp
                .forward(&b)
                .into_iter()
                .zip(sym)
                .map(|(c, k)| c / (1.0 + tau * k))
                .collect();
            let mut next = sp.inverse_real(spec, scale)?;
            let nm = w * next.iter().map(|x| x * x).sum::<f64>();
            let f = (mass / nm).sqrt();
            for x in &mut next {
                *x = x.abs() * f;
            }
            let k_next = pb.op.energy_of_spectrum(&sp.forward(&next));
            let e_next = pb.breakdown(&next, k_next);
            if monotone(e_next.total, e.total) {
                u = next;
                e = e_next;
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        if !accepted {
            return Err(FlepError::MaxSteps {
                steps: step,
                residual: el,
                history,
            });
        }
        history.push(e.total);
    }
    Err(FlepError::MaxSteps {
        steps: opts.max_steps,
        residual: el,
        history,
    })
}
