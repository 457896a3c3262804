//! Subcommand orchestration. Every command produces a JSON report; exit
//! code 0 on success, 1 for configuration problems, 2 for numerical (or
//! I/O) failures.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use flep_core::asymptotics::{
    extrapolated_threshold, optimal_trial_scale, summarize, sweep_rows, Reference, SweepConfig, SweepProblem,
    ThresholdEstimate, TheoryConstants,
};
use flep_core::coefficients::{realize_potential, realize_weight, validate_assumptions};
use flep_core::ground_state::{check_identities, decay_fit, gamma_moments, gn_quotient, solve_ground_state};
use flep_core::minimizer::{minimize_with_mass, Problem};
use flep_core::FlepError;
use serde_json::{json, Map, Value};

use crate::artifacts::{atomic_write, read_field, sweep_csv, write_field};
use crate::config::ExperimentConfig;

#[derive(Debug, Clone)]
pub enum Command {
    GroundState {
        out: PathBuf,
    },
    Minimize {
        /// Absolute coupling.
        a: Option<f64>,
        /// Coupling as a multiple of `a*`.
        a_frac: Option<f64>,
        out: PathBuf,
        init: Option<PathBuf>,
    },
    Sweep {
        out: PathBuf,
        fields_dir: Option<PathBuf>,
    },
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GroundState { .. } => "ground-state",
            Command::Minimize { .. } => "minimize",
            Command::Sweep { .. } => "sweep",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Config(e) | Failure::Numerical(e) => format!("{e:#}"),
        }
    }
}

impl From<FlepError> for Failure {
    fn from(e: FlepError) -> Self {
        Failure::Numerical(e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Numerical(e)
    }
}

pub struct Outcome {
    pub exit_code: i32,
    pub report: Value,
}

/// Runs `cmd`; the report records status, config hash, version and timings
/// whether or not the command succeeded.
pub fn execute(cmd: &Command, cfg: &ExperimentConfig) -> Outcome {
    let start = Instant::now();
    let mut timings = Map::new();
    let mut body = Map::new();
    let result = match cmd {
        Command::GroundState { out } => ground_state(cfg, out, &mut body, &mut timings),
        Command::Minimize { a, a_frac, out, init } => {
            minimize(cfg, *a, *a_frac, out, init.as_deref(), &mut body, &mut timings)
        }
        Command::Sweep { out, fields_dir } => sweep(cfg, out, fields_dir.as_deref(), &mut body, &mut timings),
        Command::Validate => validate(cfg, &mut body),
    };
    timings.insert("total_s".into(), json!(start.elapsed().as_secs_f64()));
    let (exit_code, status, error) = match &result {
        Ok(()) => (0, "ok", Value::Null),
        Err(f) => (f.exit_code(), "error", json!(f.message())),
    };
    let mut report = Map::new();
    report.insert("command".into(), json!(cmd.name()));
    report.insert("status".into(), json!(status));
    report.insert("error".into(), error);
    report.insert("config_hash".into(), json!(cfg.hash()));
    report.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    report.insert("case".into(), json!(cfg.case().to_string()));
    report.insert("timings".into(), Value::Object(timings));
    report.extend(body);
    Outcome {
        exit_code,
        report: Value::Object(report),
    }
}

fn reference(cfg: &ExperimentConfig, timings: &mut Map<String, Value>) -> Result<(Reference, Value), Failure> {
    let t = Instant::now();
    let grid = cfg.ground_grid();
    let s = cfg.problem.s;
    let opts = cfg.ground_options();
    let (a_star, ground, summary) = if cfg.ground_state.extrapolate {
        let (est, ground): (ThresholdEstimate, _) = extrapolated_threshold(grid, s, &opts)?;
        (est.extrapolated, ground, json!(est))
    } else {
        let g = solve_ground_state(grid, s, &opts)?;
        let a = g.a_star;
        (a, g, json!({ "box": a }))
    };
    timings.insert("ground_state_s".into(), json!(t.elapsed().as_secs_f64()));
    Ok((Reference::new(ground, a_star)?, summary))
}

fn ground_state(
    cfg: &ExperimentConfig,
    out: &Path,
    body: &mut Map<String, Value>,
    timings: &mut Map<String, Value>,
) -> Result<(), Failure> {
    let (r, est) = reference(cfg, timings)?;
    let g = &r.ground;
    write_field(out, &g.u, g.s, &cfg.hash())?;
    let l = flep_core::coefficients::blowup_exponent(cfg.potential.p, cfg.weight.q, cfg.problem.s);
    body.insert("a_star".into(), json!(r.a_star));
    body.insert("threshold".into(), est);
    body.insert("grid".into(), json!({ "n": g.grid().n(), "L": g.grid().length() }));
    body.insert("identities".into(), json!(check_identities(g)?));
    body.insert("gn_quotient".into(), json!(gn_quotient(&g.u, g.s, g.a_star)?));
    body.insert("iterations".into(), json!(g.iterations));
    body.insert("final_residual".into(), json!(g.final_residual));
    body.insert(
        "gamma".into(),
        match gamma_moments(g, l) {
            Ok(m) => json!(m),
            Err(e) => json!({ "error": e.to_string() }),
        },
    );
    body.insert(
        "decay".into(),
        match decay_fit(g) {
            Ok(d) => json!(d),
            Err(e) => json!({ "error": e.to_string() }),
        },
    );
    body.insert("field".into(), json!(out.display().to_string()));
    Ok(())
}

fn coefficients(cfg: &ExperimentConfig) -> Result<(flep_core::coefficients::RealizedPotential, flep_core::coefficients::RealizedWeight), Failure> {
    let grid = cfg.sweep_grid();
    let s = cfg.problem.s;
    let v = realize_potential(&cfg.potential, grid, s).map_err(|e| Failure::Config(e.into()))?;
    let m = realize_weight(&cfg.weight, grid, s).map_err(|e| Failure::Config(e.into()))?;
    Ok((v, m))
}

fn minimize(
    cfg: &ExperimentConfig,
    a: Option<f64>,
    a_frac: Option<f64>,
    out: &Path,
    init: Option<&Path>,
    body: &mut Map<String, Value>,
    timings: &mut Map<String, Value>,
) -> Result<(), Failure> {
    let hash = cfg.hash();
    let start = match init {
        Some(p) => Some(read_field(p, &hash).map_err(Failure::Config)?),
        None => None,
    };
    let (reference, _) = reference(cfg, timings)?;
    let a_star = reference.a_star;
    let a = match (a, a_frac) {
        (Some(a), None) => a,
        (None, Some(f)) => f * a_star,
        _ => return Err(Failure::Config(anyhow!("give exactly one of --a and --a-frac"))),
    };
    let (v, m) = coefficients(cfg)?;
    let grid = cfg.sweep_grid();
    let u0 = match start {
        Some(f) => {
            if f.field.grid() != &grid {
                return Err(Failure::Config(anyhow!("initial field grid differs from the config grid")));
            }
            f.field
        }
        None => {
            let theory = TheoryConstants::new(a_star, &reference.ground, &cfg.potential, &cfg.weight)?;
            let t_max = 0.25 / grid.spacing();
            let t = optimal_trial_scale(a, &theory).map(|t| t.min(t_max)).unwrap_or(t_max);
            reference.trial_state(grid, cfg.potential.x0, t)?
        }
    };
    let problem = Problem::new(v.field, m.field, a, cfg.problem.s, cfg.potential.v_inf)?;
    let t = Instant::now();
    body.insert("a".into(), json!(a));
    body.insert("a_star".into(), json!(a_star));
    let r = minimize_with_mass(1.0, &u0, &problem, &cfg.minimizer_options())?;
    timings.insert("minimize_s".into(), json!(t.elapsed().as_secs_f64()));
    write_field(out, &r.u, r.s, &hash)?;
    body.insert("energy".into(), json!(r.energy));
    body.insert("lambda_a".into(), json!(r.lambda_a));
    body.insert("projected_multiplier".into(), json!(r.projected_multiplier));
    body.insert("epsilon".into(), json!(r.epsilon));
    body.insert("z_bar".into(), json!(&r.z_bar[..grid.dim()]));
    body.insert("el_residual".into(), json!(r.el_residual));
    body.insert("mass".into(), json!(r.mass));
    body.insert("steps".into(), json!(r.steps));
    body.insert("outer_mass_fraction".into(), json!(r.outer_mass_fraction));
    body.insert("resolved".into(), json!(r.resolved));
    body.insert("field".into(), json!(out.display().to_string()));
    Ok(())
}

fn sweep(
    cfg: &ExperimentConfig,
    out: &Path,
    fields_dir: Option<&Path>,
    body: &mut Map<String, Value>,
    timings: &mut Map<String, Value>,
) -> Result<(), Failure> {
    let hash = cfg.hash();
    let (v, m) = coefficients(cfg)?;
    let (reference, est) = reference(cfg, timings)?;
    let theory = TheoryConstants::new(reference.a_star, &reference.ground, &cfg.potential, &cfg.weight)?;
    body.insert("threshold".into(), est);
    body.insert("theory".into(), json!(theory));
    let sp = SweepProblem {
        potential: &v,
        weight: &m,
        reference: &reference,
        theory: &theory,
        s: cfg.problem.s,
    };
    let sc = SweepConfig {
        k_min: cfg.sweep.k_min,
        k_max: cfg.sweep.k_max,
        workers: cfg.sweep.workers,
        minimizer: cfg.minimizer_options(),
        inject: cfg.sweep.inject,
        keep_fields: fields_dir.is_some(),
    };
    let t = Instant::now();
    let mut rows = sweep_rows(&sp, &sc)?;
    timings.insert("sweep_s".into(), json!(t.elapsed().as_secs_f64()));
    atomic_write(out, sweep_csv(&rows, &hash).as_bytes())?;
    body.insert("csv".into(), json!(out.display().to_string()));
    if let Some(dir) = fields_dir {
        for r in &mut rows {
            if let (Some(k), Some(u)) = (r.k, r.u.take()) {
                write_field(&dir.join(format!("u_k{k:02}.fld")), &u, cfg.problem.s, &hash)
                    .with_context(|| format!("writing field for k = {k}"))?;
            }
        }
    }
    body.insert("rows".into(), json!(rows));
    let report = summarize(rows, &theory)?;
    body.insert("fits".into(), json!(report.fits));
    body.insert(
        "predicted".into(),
        json!({
            "energy_slope": report.predicted_energy_slope,
            "eps_slope": report.predicted_epsilon_slope,
            "energy_prefactor": report.predicted_energy_prefactor,
            "eps_prefactor": report.predicted_epsilon_prefactor,
        }),
    );
    Ok(())
}

fn validate(cfg: &ExperimentConfig, body: &mut Map<String, Value>) -> Result<(), Failure> {
    let (v, m) = coefficients(cfg)?;
    let report = validate_assumptions(&v.field, &m.field, &cfg.potential, &cfg.weight, cfg.problem.s)?;
    let passed = report.all_passed();
    body.insert("validation".into(), json!(report));
    if passed {
        Ok(())
    } else {
        let failed: Vec<String> = report
            .failed()
            .iter()
            .map(|c| format!("{}: {}", c.assumption, c.detail))
            .collect();
        Err(Failure::Config(anyhow!("assumptions violated: {}", failed.join("; "))))
    }
}
