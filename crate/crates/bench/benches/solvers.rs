use criterion::{criterion_group, criterion_main, Criterion};
use flep_core::asymptotics::Reference;
use flep_core::coefficients::{realize_potential, realize_weight, PotentialSpec, WeightSpec};
use flep_core::ground_state::{solve_ground_state, GroundStateOptions};
use flep_core::minimizer::{minimize_with_mass, MinimizerOptions, Problem};
use flep_core::{Field, FractionalLaplacian, FractionalOrder, Grid};
use std::hint::black_box;

fn operator(c: &mut Criterion) {
    for n in [256usize, 1024] {
        let grid = Grid::new(2, n, 16.0).unwrap();
        let op = FractionalLaplacian::new(grid, FractionalOrder::new(0.5).unwrap());
        let f = Field::from_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1])).exp()).unwrap();
        c.bench_function(&format!("apply (-Δ)^0.5 on {n}²"), |b| b.iter(|| op.apply(black_box(&f)).unwrap()));
    }
}

fn ground_state(c: &mut Criterion) {
    let mut group = c.benchmark_group("ground state");
    group.sample_size(10);
    let grid = Grid::new(2, 256, 32.0).unwrap();
    group.bench_function("d=2 s=0.5 n=256", |b| {
        b.iter(|| solve_ground_state(grid, 0.5, &GroundStateOptions::default()).unwrap())
    });
    group.finish();
}

fn minimizer(c: &mut Criterion) {
    let s = 0.5;
    let ground = solve_ground_state(Grid::new(2, 256, 32.0).unwrap(), s, &GroundStateOptions::default()).unwrap();
    let a_star = ground.a_star;
    let reference = Reference::new(ground, a_star).unwrap();
    let grid = Grid::new(2, 256, 8.0).unwrap();
    let x0 = [0.5, -0.25];
    let v = realize_potential(&PotentialSpec { v_inf: 108.0, x0, p: 3.9, beta: 0.9, c: 0.002 }, grid, s).unwrap();
    let m = realize_weight(&WeightSpec { m_inf: 0.05, x0, q: 3.0, c2: 1.0 }, grid, s).unwrap();
    let problem = Problem::new(v.field, m.field, 0.99 * a_star, s, 108.0).unwrap();
    let u0 = reference.trial_state(grid, x0, 2.0).unwrap();
    let mut group = c.benchmark_group("minimizer");
    group.sample_size(10);
    group.bench_function("cg a=0.99a* n=256", |b| {
        b.iter(|| minimize_with_mass(1.0, &u0, &problem, &MinimizerOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, operator, ground_state, minimizer);
criterion_main!(benches);
