//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use flep_cli::config::{parse_config, ExperimentConfig};
use flep_core::asymptotics::{
    extrapolated_threshold, multiplier_limit, optimal_trial_scale, summarize, sweep_rows, Reference, SweepConfig,
    SweepProblem, SweepReport, TheoryConstants,
};
use flep_core::coefficients::{realize_potential, realize_weight};
use flep_core::ground_state::{
    check_identities, decay_fit, gn_quotient, solve_ground_state, GroundState, GroundStateOptions,
};
use flep_core::minimizer::{minimize_with_mass, Problem};
use flep_core::{FlepError, Field, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    id: u32,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn load(name: &str) -> ExperimentConfig {
    parse_config(&fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn sup_diff(a: &Field, b: impl Fn(usize) -> f64) -> f64 {
    (0..a.grid().len()).map(|i| (a.get(i) - b(i)).abs()).fold(0.0, f64::max)
}

fn criterion_1() -> Verdict {
    let t = Instant::now();
    let grid = Grid::new(1, 1024, 40.0).unwrap();
    let g = solve_ground_state(grid, 1.0, &GroundStateOptions::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let err = sup_diff(&g.u, |i| 3f64.powf(0.25) / (2.0 * grid.point(i)[0]).cosh().sqrt());
    let exact = 3.0 * std::f64::consts::PI.powi(2) / 4.0;
    let rel = (g.a_star / exact - 1.0).abs();
    Verdict {
        id: 1,
        title: "quintic soliton oracle (d=1, s=1)",
        passed: err <= 1e-6 && rel <= 1e-6 && secs < 5.0,
        detail: format!("sup error {err:.2e}, a* rel error {rel:.2e}, {secs:.2} s"),
    }
}

/// Mass `2π ∫ Q² r dr` of the positive radial solution of
/// `Q'' + Q'/r - Q + Q³ = 0`, found by bisection on `Q(0)`.
fn townes_mass() -> f64 {
    const DR: f64 = 1e-3;
    // Returns (+1 if the orbit crosses zero, -1 if it turns back up, mass).
    let shoot = |alpha: f64| -> (i32, f64) {
        let r0 = 1e-4;
        let mut r = r0;
        let mut y = [alpha + (alpha - alpha.powi(3)) * r0 * r0 / 4.0, (alpha - alpha.powi(3)) * r0 / 2.0];
        let f = |r: f64, y: [f64; 2]| [y[1], -y[1] / r + y[0] - y[0].powi(3)];
        let mut mass = 0.0;
        while r < 30.0 {
            let k1 = f(r, y);
            let k2 = f(r + DR / 2.0, [y[0] + DR / 2.0 * k1[0], y[1] + DR / 2.0 * k1[1]]);
            let k3 = f(r + DR / 2.0, [y[0] + DR / 2.0 * k2[0], y[1] + DR / 2.0 * k2[1]]);
            let k4 = f(r + DR, [y[0] + DR * k3[0], y[1] + DR * k3[1]]);
            let next = [
                y[0] + DR / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                y[1] + DR / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ];
            mass += DR / 2.0 * (y[0] * y[0] * r + next[0] * next[0] * (r + DR));
            r += DR;
            y = next;
            if y[0] < 0.0 {
                return (1, mass);
            }
            if y[1] > 0.0 {
                return (-1, mass);
            }
        }
        (0, mass)
    };
    let (mut lo, mut hi) = (1.5, 3.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match shoot(mid).0 {
            1 => hi = mid,
            _ => lo = mid,
        }
    }
    2.0 * std::f64::consts::PI * shoot(lo).1
}

fn criterion_2() -> Verdict {
    let oracle = townes_mass();
    let t = Instant::now();
    let grid = Grid::new(2, 512, 30.0).unwrap();
    let g = solve_ground_state(grid, 1.0, &GroundStateOptions::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let rel = (g.a_star / oracle - 1.0).abs();
    Verdict {
        id: 2,
        title: "Townes cross-check (d=2, s=1)",
        passed: rel <= 1e-3 && secs < 60.0,
        detail: format!("a* {:.6}, shooting oracle {oracle:.6}, rel {rel:.2e}, {secs:.1} s", g.a_star),
    }
}

/// Localized random fields: Gaussian mixtures and perturbed ground states.
fn random_field(rng: &mut ChaCha8Rng, g: &GroundState) -> Field {
    let grid = *g.grid();
    let d = grid.dim();
    let half = grid.length() / 8.0;
    let center = |rng: &mut ChaCha8Rng| {
        let mut c = [0.0; 2];
        for x in c.iter_mut().take(d) {
            *x = rng.gen_range(-half..half);
        }
        c
    };
    if rng.gen_bool(0.5) {
        let count = rng.gen_range(1..4);
        let bumps: Vec<_> = (0..count)
            .map(|_| (center(rng), rng.gen_range(0.5..2.5), rng.gen_range(0.2..1.0)))
            .collect();
        Field::from_fn(grid, |x| {
            bumps
                .iter()
                .map(|(c, w, amp)| {
                    let r2: f64 = (0..d).map(|a| (grid.wrap(x[a] - c[a]) / w).powi(2)).sum();
                    amp * (-r2).exp()
                })
                .sum()
        })
        .unwrap()
    } else {
        let delta = rng.gen_range(0.01..0.3);
        let waves: Vec<_> = (0..3)
            .map(|_| {
                let mut k = [0.0; 2];
                for x in k.iter_mut().take(d) {
                    *x = rng.gen_range(-1.5..1.5);
                }
                (k, rng.gen_range(0.0..std::f64::consts::TAU))
            })
            .collect();
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                let xi: f64 = waves
                    .iter()
                    .map(|(k, ph)| ((0..d).map(|a| k[a] * x[a]).sum::<f64>() + ph).cos())
                    .sum::<f64>()
                    / 3.0;
                g.u.get(i) * (1.0 + delta * xi)
            })
            .collect();
        Field::new(grid, values).unwrap()
    }
}

fn criterion_3() -> Verdict {
    let t = Instant::now();
    let table: [(usize, f64, usize, f64); 8] = [
        (1, 0.4, 524_288, 16_384.0),
        (1, 0.5, 131_072, 8_192.0),
        (1, 0.75, 8_192, 1_024.0),
        (1, 1.0, 1_024, 40.0),
        (2, 0.4, 2_048, 128.0),
        (2, 0.5, 2_048, 128.0),
        (2, 0.75, 2_048, 256.0),
        (2, 1.0, 512, 30.0),
    ];
    // 1000 random fields in total, spread evenly over the table so that each
    // is compared with the minimum certified on the same grid.
    let mut passed = true;
    let mut notes = Vec::new();
    let mut worst = f64::INFINITY;
    for (i, (d, s, n, l)) in table.into_iter().enumerate() {
        let g = solve_ground_state(Grid::new(d, n, l).unwrap(), s, &GroundStateOptions::default()).unwrap();
        let ids = check_identities(&g).unwrap();
        let gn = gn_quotient(&g.u, s, g.a_star).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        let lowest = (0..125)
            .map(|_| gn_quotient(&random_field(&mut rng, &g), s, g.a_star).unwrap())
            .fold(f64::INFINITY, f64::min);
        worst = worst.min(lowest);
        let ok = ids.pohozaev_residual <= 1e-6
            && ids.mass_identity_residual <= 1e-6
            && (gn - 1.0).abs() <= 1e-6
            && lowest >= 1.0 - 1e-6;
        passed &= ok;
        notes.push(format!(
            "(d={d},s={s}) pohozaev {:.1e} mass {:.1e} gn-1 {:.1e} random min-1 {:.1e}{}",
            ids.pohozaev_residual,
            ids.mass_identity_residual,
            gn - 1.0,
            lowest - 1.0,
            if ok { "" } else { " FAIL" }
        ));
    }
    let secs = t.elapsed().as_secs_f64();
    passed &= secs < 600.0;
    Verdict {
        id: 3,
        title: "Pohozaev, mass identity and GN sharpness",
        passed,
        detail: format!("{}; min random quotient {worst:.6}; {secs:.0} s", notes.join("; ")),
    }
}

fn criterion_4() -> Verdict {
    let g = solve_ground_state(Grid::new(2, 512, 60.0).unwrap(), 0.5, &GroundStateOptions::default()).unwrap();
    let fit = decay_fit(&g).unwrap();
    let rel = (fit.fitted_exponent / -3.0 - 1.0).abs();
    Verdict {
        id: 4,
        title: "algebraic decay (d=2, s=0.5, L=60)",
        passed: rel <= 0.1,
        detail: format!("fitted exponent {:.3} vs -3 (rel {rel:.3})", fit.fitted_exponent),
    }
}

struct Shared {
    reference: Reference,
}

fn shared_reference() -> Shared {
    let cfg = load("q_dominant.json");
    let (est, ground) = extrapolated_threshold(cfg.ground_grid(), cfg.problem.s, &cfg.ground_options()).unwrap();
    Shared {
        reference: Reference::new(ground, est.extrapolated).unwrap(),
    }
}

fn criterion_5(shared: &Shared) -> Verdict {
    let cfg = load("q_dominant.json");
    let s = cfg.problem.s;
    let grid = cfg.sweep_grid();
    let reference = &shared.reference;
    let a_star = reference.a_star;
    let v = realize_potential(&cfg.potential, grid, s).unwrap();
    let m = realize_weight(&cfg.weight, grid, s).unwrap();
    let theory = TheoryConstants::new(a_star, &reference.ground, &cfg.potential, &cfg.weight).unwrap();
    let a = 0.5 * a_star;
    let t = optimal_trial_scale(a, &theory).unwrap().min(0.25 / grid.spacing());
    let u0 = reference.trial_state(grid, cfg.potential.x0, t).unwrap();
    let problem = Problem::new(v.field.clone(), m.field.clone(), a, s, cfg.potential.v_inf).unwrap();
    let opts = cfg.minimizer_options();
    let energy = |mass: f64| minimize_with_mass(mass, &u0, &problem, &opts).unwrap().energy.total;
    let (i1, i05, i08, i04) = (energy(1.0), energy(0.5), energy(0.8), energy(0.4));
    let margin1 = 2.0 * i05 - i1;
    let margin2 = 2.0 * i04 - i08;
    let bounded = i1 > 0.0 && i1 < cfg.potential.v_inf;
    let sub = margin1 > 1e-4 && margin2 > 1e-4;
    let over = problem.with_coupling(1.2 * a_star).unwrap();
    let start = reference.trial_state(grid, cfg.potential.x0, 0.25 / grid.spacing()).unwrap();
    let detected = matches!(
        minimize_with_mass(1.0, &start, &over, &opts),
        Err(FlepError::EnergyUnbounded { .. })
    );
    Verdict {
        id: 5,
        title: "subcritical structure at a = 0.5 a*",
        passed: bounded && sub && detected,
        detail: format!(
            "I1 {i1:.6}, V_inf {}; 2 I0.5 - I1 = {margin1:.3e}; 2 I0.4 - I0.8 = {margin2:.3e}; divergence at 1.2 a* detected: {detected}",
            cfg.potential.v_inf
        ),
    }
}

struct SweepRun {
    name: &'static str,
    report: SweepReport,
    secs: f64,
}

fn sweep(shared: &Shared, name: &'static str) -> SweepRun {
    let cfg = load(name);
    let s = cfg.problem.s;
    let grid = cfg.sweep_grid();
    let v = realize_potential(&cfg.potential, grid, s).unwrap();
    let m = realize_weight(&cfg.weight, grid, s).unwrap();
    let theory = TheoryConstants::new(shared.reference.a_star, &shared.reference.ground, &cfg.potential, &cfg.weight).unwrap();
    let sp = SweepProblem {
        potential: &v,
        weight: &m,
        reference: &shared.reference,
        theory: &theory,
        s,
    };
    let sc = SweepConfig {
        k_min: cfg.sweep.k_min,
        k_max: cfg.sweep.k_max,
        workers: cfg.sweep.workers,
        minimizer: cfg.minimizer_options(),
        inject: None,
        keep_fields: false,
    };
    let t = Instant::now();
    let rows = sweep_rows(&sp, &sc).unwrap();
    let secs = t.elapsed().as_secs_f64();
    SweepRun {
        name,
        report: summarize(rows, &theory).unwrap(),
        secs,
    }
}

fn rel(x: f64, want: f64) -> f64 {
    (x / want - 1.0).abs()
}

fn resolved(r: &SweepReport) -> Vec<&flep_core::asymptotics::SweepRow> {
    r.rows.iter().filter(|r| r.resolved && r.k.is_some()).collect()
}

fn criterion_6(runs: &[SweepRun]) -> Verdict {
    let mut passed = true;
    let mut notes = Vec::new();
    for run in runs {
        let r = &run.report;
        let rows = resolved(r);
        let (first, last) = (rows[0], rows[rows.len() - 1]);
        let e_ratio = |row: &flep_core::asymptotics::SweepRow| row.energy / row.energy_pred;
        let eps_ratio = |row: &flep_core::asymptotics::SweepRow| row.epsilon / row.epsilon_pred;
        let slopes = rel(r.fits.energy.slope, r.predicted_energy_slope) <= 0.05
            && rel(r.fits.epsilon.slope, r.predicted_epsilon_slope) <= 0.05
            && r.fits.energy.r_squared >= 0.999
            && r.fits.epsilon.r_squared >= 0.999;
        let ratios = (e_ratio(last) - 1.0).abs() <= 0.15 && (eps_ratio(last) - 1.0).abs() <= 0.15;
        let trending = (e_ratio(last) - 1.0).abs() < (e_ratio(first) - 1.0).abs()
            && (eps_ratio(last) - 1.0).abs() < (eps_ratio(first) - 1.0).abs();
        let ok = slopes && ratios && trending && run.secs < 1800.0;
        passed &= ok;
        notes.push(format!(
            "{}: energy slope {:.4} (pred {:.4}, r2 {:.5}), eps slope {:.4} (pred {:.4}, r2 {:.5}), I/Ipred {:.3}->{:.3}, eps/eps_pred {:.3}->{:.3}, {:.1} s{}",
            run.name,
            r.fits.energy.slope,
            r.predicted_energy_slope,
            r.fits.energy.r_squared,
            r.fits.epsilon.slope,
            r.predicted_epsilon_slope,
            r.fits.epsilon.r_squared,
            e_ratio(first),
            e_ratio(last),
            eps_ratio(first),
            eps_ratio(last),
            run.secs,
            if ok { "" } else { " FAIL" }
        ));
    }
    Verdict {
        id: 6,
        title: "blow-up rates for energy and scale",
        passed,
        detail: notes.join("; "),
    }
}

fn criterion_7(runs: &[SweepRun]) -> Verdict {
    let mut passed = true;
    let mut notes = Vec::new();
    for run in runs {
        let rows = resolved(&run.report);
        let target = -multiplier_limit(run.report.theory.dim, run.report.theory.s);
        let tail: Vec<f64> = rows[rows.len() - 3..].iter().map(|r| r.eps2s_lambda).collect();
        let last = tail[2];
        let monotone = tail.windows(2).all(|w| (w[1] - target).abs() < (w[0] - target).abs());
        let ok = rel(last, target) <= 0.05 && monotone;
        passed &= ok;
        notes.push(format!("{}: {:?} -> {target}{}", run.name, tail.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>(), if ok { "" } else { " FAIL" }));
    }
    Verdict {
        id: 7,
        title: "multiplier limit",
        passed,
        detail: notes.join("; "),
    }
}

fn criterion_8(runs: &[SweepRun]) -> Verdict {
    let mut passed = true;
    let mut notes = Vec::new();
    for run in runs {
        let cfg = load(run.name);
        let h = cfg.sweep_grid().spacing();
        let x0 = cfg.potential.x0;
        let rows = resolved(&run.report);
        let errs: Vec<f64> = rows.iter().map(|r| r.profile_err).collect();
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        let located = rows.iter().all(|r| {
            let dist = ((r.z_bar[0] - x0[0]).powi(2) + (r.z_bar[1] - x0[1]).powi(2)).sqrt();
            dist <= r.epsilon + 2.0 * h
        });
        let last = errs[errs.len() - 1];
        let ok = decreasing && last <= 0.05 && located;
        passed &= ok;
        notes.push(format!(
            "{}: profile error {:.3e} -> {last:.3e}, strictly decreasing {decreasing}, concentration point located {located}{}",
            run.name,
            errs[0],
            if ok { "" } else { " FAIL" }
        ));
    }
    Verdict {
        id: 8,
        title: "profile convergence and concentration point",
        passed,
        detail: notes.join("; "),
    }
}

fn criterion_9(runs: &[SweepRun]) -> Verdict {
    let mut passed = true;
    let mut notes = Vec::new();
    for run in runs {
        let rows = resolved(&run.report);
        let below = rows.iter().all(|r| r.energy <= r.trial_bound);
        let last = rows[rows.len() - 1];
        let ratio = last.t_argmin / last.t_opt;
        let ok = below && (ratio - 1.0).abs() <= 0.05;
        passed &= ok;
        notes.push(format!(
            "{}: I <= trial bound on all rows {below}, t_argmin/t_opt {ratio:.4} at k={}{}",
            run.name,
            last.k.unwrap(),
            if ok { "" } else { " FAIL" }
        ));
    }
    Verdict {
        id: 9,
        title: "trial upper bound and optimal scale",
        passed,
        detail: notes.join("; "),
    }
}

fn criterion_10() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str, workers: &str| -> Vec<u8> {
        let out = dir.path().join(format!("{tag}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_flep"))
            .args(["sweep", "--config"])
            .arg(fixture("q_dominant.json"))
            .arg("--out")
            .arg(&out)
            .arg("--report")
            .arg(dir.path().join(format!("{tag}.json")))
            .env("FLEP_WORKERS", workers)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "2");
    Verdict {
        id: 10,
        title: "deterministic sweep CSV",
        passed: a == b && a == c,
        detail: format!("rerun identical {}, two workers identical {}, {} bytes", a == b, a == c, a.len()),
    }
}

fn main() {
    let mut verdicts = Vec::new();
    let mut report = |v: Verdict| {
        println!("criterion {:>2} [{}] {}: {}", v.id, if v.passed { "PASS" } else { "FAIL" }, v.title, v.detail);
        verdicts.push(v.passed);
    };
    report(criterion_1());
    report(criterion_2());
    report(criterion_3());
    report(criterion_4());
    let shared = shared_reference();
    report(criterion_5(&shared));
    let runs: Vec<SweepRun> = ["q_dominant.json", "p_dominant.json", "balanced.json"]
        .into_iter()
        .map(|name| sweep(&shared, name))
        .collect();
    report(criterion_6(&runs));
    report(criterion_7(&runs));
    report(criterion_8(&runs));
    report(criterion_9(&runs));
    report(criterion_10());
    let failed = verdicts.iter().filter(|p| !**p).count();
    println!("acceptance: {} of {} criteria passed", verdicts.len() - failed, verdicts.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
