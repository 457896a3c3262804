//! Experiment configuration: JSON schema checks that report every bad
//! path at once, then domain and coefficient-assumption validation.

use std::fmt;
use std::path::Path;

use flep_core::asymptotics::Case;
use flep_core::coefficients::{check_placement, pair_violations, PotentialSpec, WeightSpec};
use flep_core::ground_state::{GroundStateOptions, InitialGuess};
use flep_core::minimizer::{Method, MinimizerOptions};
use flep_core::{Grid, Point};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProblemConfig {
    pub d: usize,
    pub s: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GroundStateConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub init: InitialGuess,
    /// Solve again on the doubled box and extrapolate `a*` in `L`.
    pub extrapolate: bool,
}

impl Default for GroundStateConfig {
    fn default() -> Self {
        Self {
            n: 512,
            length: 32.0,
            tol: 1e-10,
            max_iter: 5000,
            init: InitialGuess::Gaussian,
            extrapolate: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_steps: usize,
    pub tau: Option<f64>,
    pub method: Method,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let m = MinimizerOptions::default();
        Self {
            tol: m.tol,
            max_steps: m.max_steps,
            tau: m.tau,
            method: m.method,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepBlock {
    pub k_min: u32,
    pub k_max: u32,
    pub workers: usize,
    /// Extra coupling `inject * a*` appended to the sweep.
    pub inject: Option<f64>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            k_min: 3,
            k_max: 9,
            workers: 1,
            inject: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    pub ground_state: GroundStateConfig,
    pub potential: PotentialSpec,
    pub weight: WeightSpec,
    pub solver: SolverConfig,
    pub sweep: SweepBlock,
    pub output: OutputConfig,
}

#[derive(Debug)]
pub enum ConfigError {
    Read(String),
    /// Every violation found, each prefixed by its field path or assumption.
    Invalid(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Read(m) => write!(f, "cannot read config: {m}"),
            ConfigError::Invalid(v) => {
                write!(f, "invalid config ({} problems):", v.len())?;
                for line in v {
                    write!(f, "\n  - {line}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn sweep_grid(&self) -> Grid {
        Grid::new(self.problem.d, self.grid.n, self.grid.length).expect("validated grid")
    }

    pub fn ground_grid(&self) -> Grid {
        Grid::new(self.problem.d, self.ground_state.n, self.ground_state.length).expect("validated grid")
    }

    pub fn case(&self) -> Case {
        Case::classify(self.potential.p, self.weight.q, self.problem.s)
    }

    pub fn ground_options(&self) -> GroundStateOptions {
        GroundStateOptions {
            tol: self.ground_state.tol,
            max_iter: self.ground_state.max_iter,
            seed: self.solver.seed,
            init: self.ground_state.init,
            ..Default::default()
        }
    }

    pub fn minimizer_options(&self) -> MinimizerOptions {
        MinimizerOptions {
            tol: self.solver.tol,
            max_steps: self.solver.max_steps,
            tau: self.solver.tau,
            method: self.solver.method,
        }
    }

    /// SHA-256 of the canonical JSON form of the validated config. Worker
    /// count and output directory do not affect results and are excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.sweep.workers = 1;
        canonical.output.dir.clear();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(format!("{}: {e}", path.display())))?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let root: Value = serde_json::from_str(text).map_err(|e| ConfigError::Invalid(vec![format!("$: {e}")]))?;
    let mut errs = Vec::new();
    let Some(root) = root.as_object() else {
        return Err(ConfigError::Invalid(vec!["$: expected an object".into()]));
    };
    let mut r = Reader { errs: &mut errs };
    r.unknown(root, "", &["problem", "grid", "ground_state", "potential", "weight", "solver", "sweep", "output"]);

    let problem = r.block(root, "problem", true).map(|b| {
        r.unknown(b, "problem", &["d", "s"]);
        (r.int(b, "problem.d"), r.num(b, "problem.s"))
    });
    let grid = r.block(root, "grid", true).map(|b| {
        r.unknown(b, "grid", &["n", "L"]);
        (r.int(b, "grid.n"), r.num(b, "grid.L"))
    });
    let gs_default = GroundStateConfig::default();
    let ground_state = match r.block(root, "ground_state", false) {
        Some(b) => {
            r.unknown(b, "ground_state", &["n", "L", "tol", "max_iter", "init", "extrapolate"]);
            let init = match b.get("init") {
                None => Some(gs_default.init),
                Some(v) => match serde_json::from_value::<InitialGuess>(v.clone()) {
                    Ok(i) => Some(i),
                    Err(_) => {
                        r.errs.push(format!("ground_state.init: expected \"gaussian\" or \"plateau\", got {v}"));
                        None
                    }
                },
            };
            Some((
                r.int_or(b, "ground_state.n", gs_default.n as u64),
                r.num_or(b, "ground_state.L", gs_default.length),
                r.num_or(b, "ground_state.tol", gs_default.tol),
                r.int_or(b, "ground_state.max_iter", gs_default.max_iter as u64),
                init,
                r.bool_or(b, "ground_state.extrapolate", gs_default.extrapolate),
            ))
        }
        None => Some((
            Some(gs_default.n as u64),
            Some(gs_default.length),
            Some(gs_default.tol),
            Some(gs_default.max_iter as u64),
            Some(gs_default.init),
            Some(gs_default.extrapolate),
        )),
    };
    let dim = problem.as_ref().and_then(|p| p.0).unwrap_or(2) as usize;
    let potential = r.block(root, "potential", true).map(|b| {
        r.unknown(b, "potential", &["v_inf", "x0", "p", "beta", "c"]);
        (
            r.num(b, "potential.v_inf"),
            r.point(b, "potential.x0", dim, true),
            r.num(b, "potential.p"),
            r.num(b, "potential.beta"),
            r.num(b, "potential.c"),
        )
    });
    let weight = r.block(root, "weight", true).map(|b| {
        r.unknown(b, "weight", &["m_inf", "x0", "q", "c2"]);
        (
            r.num(b, "weight.m_inf"),
            r.point(b, "weight.x0", dim, false),
            r.num(b, "weight.q"),
            r.num(b, "weight.c2"),
        )
    });
    let sd = SolverConfig::default();
    let solver = match r.block(root, "solver", false) {
        Some(b) => {
            r.unknown(b, "solver", &["tol", "max_steps", "tau", "method", "seed"]);
            let method = match b.get("method") {
                None => Some(sd.method),
                Some(v) => match serde_json::from_value::<Method>(v.clone()) {
                    Ok(m) => Some(m),
                    Err(_) => {
                        r.errs.push(format!(
                            "solver.method: expected \"preconditioned_cg\" or \"gradient_flow\", got {v}"
                        ));
                        None
                    }
                },
            };
            let tau = match b.get("tau") {
                None | Some(Value::Null) => Some(None),
                Some(_) => r.num(b, "solver.tau").map(Some),
            };
            (
                r.num_or(b, "solver.tol", sd.tol),
                r.int_or(b, "solver.max_steps", sd.max_steps as u64),
                tau,
                method,
                r.int_or(b, "solver.seed", sd.seed),
            )
        }
        None => (
            Some(sd.tol),
            Some(sd.max_steps as u64),
            Some(sd.tau),
            Some(sd.method),
            Some(sd.seed),
        ),
    };
    let swd = SweepBlock::default();
    let sweep = match r.block(root, "sweep", false) {
        Some(b) => {
            r.unknown(b, "sweep", &["k_min", "k_max", "workers", "inject"]);
            let inject = match b.get("inject") {
                None | Some(Value::Null) => Some(None),
                Some(_) => r.num(b, "sweep.inject").map(Some),
            };
            (
                r.int_or(b, "sweep.k_min", swd.k_min as u64),
                r.int_or(b, "sweep.k_max", swd.k_max as u64),
                r.int_or(b, "sweep.workers", swd.workers as u64),
                inject,
            )
        }
        None => (
            Some(swd.k_min as u64),
            Some(swd.k_max as u64),
            Some(swd.workers as u64),
            Some(None),
        ),
    };
    let output = match r.block(root, "output", false) {
        Some(b) => {
            r.unknown(b, "output", &["dir"]);
            match b.get("dir") {
                None => Some(OutputConfig::default()),
                Some(Value::String(s)) => Some(OutputConfig { dir: s.clone() }),
                Some(v) => {
                    r.errs.push(format!("output.dir: expected a string, got {v}"));
                    None
                }
            }
        }
        None => Some(OutputConfig::default()),
    };

    // Assemble only if every field was read.
    let cfg = (|| {
        let (d, s) = problem?;
        let (n, l) = grid?;
        let (gn, gl, gtol, giter, ginit, gext) = ground_state?;
        let (v_inf, vx0, p, beta, c) = potential?;
        let (m_inf, wx0, q, c2) = weight?;
        let (tol, max_steps, tau, method, seed) = solver;
        let (k_min, k_max, workers, inject) = sweep;
        let x0 = vx0??;
        Some(ExperimentConfig {
            problem: ProblemConfig { d: d? as usize, s: s? },
            grid: GridConfig {
                n: n? as usize,
                length: l?,
            },
            ground_state: GroundStateConfig {
                n: gn? as usize,
                length: gl?,
                tol: gtol?,
                max_iter: giter? as usize,
                init: ginit?,
                extrapolate: gext?,
            },
            potential: PotentialSpec {
                v_inf: v_inf?,
                x0,
                p: p?,
                beta: beta?,
                c: c?,
            },
            weight: WeightSpec {
                m_inf: m_inf?,
                x0: wx0?.unwrap_or(x0),
                q: q?,
                c2: c2?,
            },
            solver: SolverConfig {
                tol: tol?,
                max_steps: max_steps? as usize,
                tau: tau?,
                method: method?,
                seed: seed?,
            },
            sweep: SweepBlock {
                k_min: k_min? as u32,
                k_max: k_max? as u32,
                workers: workers? as usize,
                inject: inject?,
            },
            output: output?,
        })
    })();
    match cfg {
        Some(cfg) if errs.is_empty() => {
            let problems = validate(&cfg);
            if problems.is_empty() {
                Ok(cfg)
            } else {
                Err(ConfigError::Invalid(problems))
            }
        }
        _ => Err(ConfigError::Invalid(errs)),
    }
}

/// Domain checks and coefficient assumptions of a structurally valid config.
pub fn validate(cfg: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    let d = cfg.problem.d;
    let s = cfg.problem.s;
    if !(d == 1 || d == 2) {
        out.push(format!("problem.d: dimension must be 1 or 2, got {d}"));
    }
    if !(s > 0.0 && s <= 1.0) {
        out.push(format!("problem.s: order must lie in (0,1], got {s}"));
    }
    let dim = if d == 1 || d == 2 { d } else { 2 };
    for (path, n, l) in [
        ("grid", cfg.grid.n, cfg.grid.length),
        ("ground_state", cfg.ground_state.n, cfg.ground_state.length),
    ] {
        if let Err(e) = Grid::new(dim, n, l) {
            out.push(format!("{path}: {e}"));
        }
    }
    if cfg.ground_state.length.is_nan() || cfg.ground_state.length < 20.0 {
        out.push(format!(
            "ground_state.L: box length must be at least 20, got {}",
            cfg.ground_state.length
        ));
    }
    if !(cfg.ground_state.tol >= 1e-12 && cfg.ground_state.tol < 1.0) {
        out.push(format!("ground_state.tol: must lie in [1e-12, 1), got {}", cfg.ground_state.tol));
    }
    if !(cfg.solver.tol > 0.0 && cfg.solver.tol < 1.0) {
        out.push(format!("solver.tol: must lie in (0,1), got {}", cfg.solver.tol));
    }
    if let Some(t) = cfg.solver.tau {
        if !(t > 0.0 && t.is_finite()) {
            out.push(format!("solver.tau: step must be positive, got {t}"));
        }
    }
    if cfg.sweep.k_min > cfg.sweep.k_max || cfg.sweep.k_min == 0 {
        out.push(format!(
            "sweep.k_min: need 1 <= k_min <= k_max, got {}..{}",
            cfg.sweep.k_min, cfg.sweep.k_max
        ));
    }
    if cfg.sweep.k_max > 40 {
        out.push(format!("sweep.k_max: at most 40, got {}", cfg.sweep.k_max));
    }
    if cfg.sweep.workers == 0 {
        out.push("sweep.workers: need at least one worker".into());
    }
    if let Some(f) = cfg.sweep.inject {
        if !(f > 0.0 && f.is_finite()) {
            out.push(format!("sweep.inject: multiple of a* must be positive, got {f}"));
        }
    }
    if !(s > 0.0 && s < 1.0) && s != 1.0 {
        return out;
    }
    for v in pair_violations(&cfg.potential, &cfg.weight, dim, s) {
        out.push(v.to_string());
    }
    if out.is_empty() {
        if let Err(e) = check_placement(&cfg.sweep_grid(), cfg.potential.x0) {
            out.push(format!("potential.x0: {e}"));
        }
    }
    out
}

struct Reader<'e> {
    errs: &'e mut Vec<String>,
}

impl Reader<'_> {
    fn unknown(&mut self, obj: &Map<String, Value>, path: &str, allowed: &[&str]) {
        for k in obj.keys() {
            if !allowed.contains(&k.as_str()) {
                let full = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                self.errs.push(format!("{full}: unknown field"));
            }
        }
    }

    fn block<'v>(&mut self, obj: &'v Map<String, Value>, key: &str, required: bool) -> Option<&'v Map<String, Value>> {
        match obj.get(key) {
            Some(Value::Object(m)) => Some(m),
            Some(v) => {
                self.errs.push(format!("{key}: expected an object, got {v}"));
                None
            }
            None => {
                if required {
                    self.errs.push(format!("{key}: missing required block"));
                }
                None
            }
        }
    }

    fn leaf<'v>(obj: &'v Map<String, Value>, path: &str) -> Option<&'v Value> {
        obj.get(path.rsplit('.').next().unwrap())
    }

    fn num(&mut self, obj: &Map<String, Value>, path: &str) -> Option<f64> {
        match Self::leaf(obj, path) {
            Some(v) => match v.as_f64() {
                Some(x) => Some(x),
                None => {
                    self.errs.push(format!("{path}: expected a number, got {v}"));
                    None
                }
            },
            None => {
                self.errs.push(format!("{path}: missing required field"));
                None
            }
        }
    }

    fn num_or(&mut self, obj: &Map<String, Value>, path: &str, default: f64) -> Option<f64> {
        if Self::leaf(obj, path).is_none() {
            return Some(default);
        }
        self.num(obj, path)
    }

    fn int(&mut self, obj: &Map<String, Value>, path: &str) -> Option<u64> {
        match Self::leaf(obj, path) {
            Some(v) => match v.as_u64() {
                Some(x) => Some(x),
                None => {
                    self.errs.push(format!("{path}: expected a non-negative integer, got {v}"));
                    None
                }
            },
            None => {
                self.errs.push(format!("{path}: missing required field"));
                None
            }
        }
    }

    fn int_or(&mut self, obj: &Map<String, Value>, path: &str, default: u64) -> Option<u64> {
        if Self::leaf(obj, path).is_none() {
            return Some(default);
        }
        self.int(obj, path)
    }

    fn bool_or(&mut self, obj: &Map<String, Value>, path: &str, default: bool) -> Option<bool> {
        match Self::leaf(obj, path) {
            None => Some(default),
            Some(Value::Bool(b)) => Some(*b),
            Some(v) => {
                self.errs.push(format!("{path}: expected a boolean, got {v}"));
                None
            }
        }
    }

    /// `x0` as an array of `dim` numbers. Optional points read as
    /// `Some(None)` when absent.
    fn point(&mut self, obj: &Map<String, Value>, path: &str, dim: usize, required: bool) -> Option<Option<Point>> {
        let v = match Self::leaf(obj, path) {
            None if required => {
                self.errs.push(format!("{path}: missing required field"));
                return None;
            }
            None => return Some(None),
            Some(v) => v,
        };
        let Some(arr) = v.as_array().filter(|a| a.len() == dim && a.iter().all(|x| x.is_number())) else {
            self.errs.push(format!("{path}: expected an array of {dim} numbers, got {v}"));
            return None;
        };
        let mut p = [0.0; 2];
        for (a, x) in arr.iter().enumerate() {
            p[a] = x.as_f64().unwrap();
        }
        Some(Some(p))
    }
}
