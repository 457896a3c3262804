//! Fourier-multiplier realization of `(-Δ)^s` on the periodic box.
//!
//! Everything here is diagonal in the discrete Fourier basis: the operator
//! multiplies mode `k` by `|k|^{2s}`, the resolvent divides by `1 + τ|k|^{2s}`.
//! The `k = -n/2` Nyquist mode needs no special care for these even symbols;
//! only the odd phase factors used by [`Spectral::translate`] do.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{FlepError, Result};
use crate::grid::{Field, Grid, Point};

/// Imaginary residues above this (relative to the field scale) mean the input
/// was not a real periodic field or the transform was corrupted.
const NON_REAL_LIMIT: f64 = 1e-8;

/// Fractional order `s ∈ (0, 1]`; `s = 1` is the classical Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(s: f64) -> Result<Self> {
        if s > 0.0 && s <= 1.0 {
            Ok(Self(s))
        } else {
            Err(FlepError::Domain(format!("fractional order s = {s} not in (0, 1]")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = FlepError;
    fn try_from(s: f64) -> Result<Self> {
        Self::new(s)
    }
}

impl From<FractionalOrder> for f64 {
    fn from(s: FractionalOrder) -> f64 {
        s.0
    }
}

/// FFT plans for one grid.
pub struct Spectral {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `|k|^2` per flat spectral index.
    k_squared: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n());
        let inverse = planner.plan_fft_inverse(grid.n());
        let k_squared = (0..grid.len())
            .map(|idx| {
                let [i, j] = grid.axis_indices(idx);
                let kx = grid.wavenumber(i);
                if grid.dim() == 1 {
                    kx * kx
                } else {
                    let ky = grid.wavenumber(j);
                    kx * kx + ky * ky
                }
            })
            .collect();
        Self {
            grid,
            forward,
            inverse,
            k_squared,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn k_squared(&self) -> &[f64] {
        &self.k_squared
    }

    /// Symbol `|k|^{2s}` on the lattice.
    pub fn multiplier(&self, s: FractionalOrder) -> Multiplier {
        let s = s.get();
        let values = self
            .k_squared
            .iter()
            .map(|&k2| if k2 == 0.0 { 0.0 } else { k2.powf(s) })
            .collect();
        Multiplier {
            grid: self.grid,
            s,
            values,
        }
    }

    /// Unnormalized forward DFT of real samples.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.forward);
        buf
    }

    /// Inverse DFT (normalized by `1/n^d`) returning the real part after
    /// checking that the imaginary residue is negligible relative to `scale`.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>, scale: f64) -> Result<Vec<f64>> {
        self.transform(&mut spectrum, &self.inverse);
        let norm = 1.0 / self.grid.len() as f64;
        let mut max_re = 0.0f64;
        let mut max_im = 0.0f64;
        let out: Vec<f64> = spectrum
            .iter()
            .map(|c| {
                let re = c.re * norm;
                max_re = max_re.max(re.abs());
                max_im = max_im.max((c.im * norm).abs());
                re
            })
            .collect();
        let denom = scale.abs().max(max_re).max(f64::MIN_POSITIVE);
        let residue = max_im / denom;
        if !(residue <= NON_REAL_LIMIT) {
            return Err(FlepError::NonReal { residue });
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(FlepError::NonFinite);
        }
        Ok(out)
    }

    /// Transforms of two real fields from one complex FFT of `a + i b`.
    pub fn forward_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let zero = Complex64::new(0.0, 0.0);
        let mut work = vec![zero; a.len()];
        let mut fa = vec![zero; a.len()];
        let mut fb = vec![zero; a.len()];
        self.forward_pair_into(a, b, &mut work, &mut fa, &mut fb);
        (fa, fb)
    }

    /// Allocation-free form of [`Spectral::forward_pair`].
    pub fn forward_pair_into(
        &self,
        a: &[f64],
        b: &[f64],
        work: &mut [Complex64],
        fa: &mut [Complex64],
        fb: &mut [Complex64],
    ) {
        for ((z, &x), &y) in work.iter_mut().zip(a).zip(b) {
            *z = Complex64::new(x, y);
        }
        self.transform(work, &self.forward);
        for idx in 0..work.len() {
            let zk = work[idx];
            let zm = work[self.negated(idx)].conj();
            fa[idx] = (zk + zm) * 0.5;
            fb[idx] = (zk - zm) * Complex64::new(0.0, -0.5);
        }
    }

    /// Inverse of two Hermitian spectra (transforms of real fields) from one
    /// complex FFT; the imaginary channel carries the second field, so no
    /// residue check is possible here.
    pub fn inverse_real_pair(&self, sa: &[Complex64], sb: &[Complex64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut work: Vec<Complex64> = sa
            .iter()
            .zip(sb)
            .map(|(x, y)| x + Complex64::new(-y.im, y.re))
            .collect();
        let mut a = vec![0.0; sa.len()];
        let mut b = vec![0.0; sa.len()];
        self.inverse_pair_into(&mut work, &mut a, &mut b)?;
        Ok((a, b))
    }

    /// Inverts `work = â + i b̂` in place and splits it into the two real
    /// fields.
    pub fn inverse_pair_into(&self, work: &mut [Complex64], a: &mut [f64], b: &mut [f64]) -> Result<()> {
        self.transform(work, &self.inverse);
        let norm = 1.0 / self.grid.len() as f64;
        for ((c, x), y) in work.iter().zip(a.iter_mut()).zip(b.iter_mut()) {
            *x = c.re * norm;
            *y = c.im * norm;
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(FlepError::NonFinite);
        }
        Ok(())
    }

    /// Flat index of the mode `-k`.
    fn negated(&self, idx: usize) -> usize {
        let n = self.grid.n();
        let [i, j] = self.grid.axis_indices(idx);
        self.grid.flat_index([(n - i) % n, (n - j) % n])
    }

    fn transform(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n();
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
        if self.grid.dim() == 2 {
            transpose_square(buf, n);
            plan.process_with_scratch(buf, &mut scratch);
            transpose_square(buf, n);
        }
    }

    /// Applies a real even symbol given per flat spectral index.
    pub fn apply_symbol(&self, f: &Field, symbol: impl Fn(usize) -> f64) -> Result<Field> {
        self.check(f)?;
        let mut spec = self.forward(f.values());
        for (idx, c) in spec.iter_mut().enumerate() {
            *c *= symbol(idx);
        }
        Field::new(self.grid, self.inverse_real(spec, f.sup_norm())?)
    }

    /// `g(x) = f(x - shift)`, exact for band-limited `f`. The Nyquist bins
    /// keep only the cosine part of the phase so the output stays real.
    pub fn translate(&self, f: &Field, shift: Point) -> Result<Field> {
        self.check(f)?;
        let grid = self.grid;
        let n = grid.n();
        let axis_phase = |j: usize, a: f64| -> Complex64 {
            let k = grid.wavenumber(j);
            if j == n / 2 {
                Complex64::new((k * a).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, -k * a)
            }
        };
        let mut spec = self.forward(f.values());
        for (idx, c) in spec.iter_mut().enumerate() {
            let [i, j] = grid.axis_indices(idx);
            let mut phase = axis_phase(i, shift[0]);
            if grid.dim() == 2 {
                phase *= axis_phase(j, shift[1]);
            }
            *c *= phase;
        }
        Field::new(grid, self.inverse_real(spec, f.sup_norm())?)
    }

    fn check(&self, f: &Field) -> Result<()> {
        if *f.grid() == self.grid {
            Ok(())
        } else {
            Err(FlepError::GridMismatch)
        }
    }
}

fn transpose_square(buf: &mut [Complex64], n: usize) {
    const B: usize = 32;
    for bi in (0..n).step_by(B) {
        for bj in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                let j0 = if bi == bj { i + 1 } else { bj };
                for j in j0..(bj + B).min(n) {
                    buf.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Tabulated `|k|^{2s}` for one `(grid, s)` pair.
#[derive(Debug, Clone)]
pub struct Multiplier {
    grid: Grid,
    s: f64,
    values: Vec<f64>,
}

impl Multiplier {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `(-Δ)^s` together with its plans; cheap to share between solver steps.
#[derive(Debug)]
pub struct FractionalLaplacian {
    spectral: Spectral,
    multiplier: Multiplier,
}

impl FractionalLaplacian {
    pub fn new(grid: Grid, s: FractionalOrder) -> Self {
        let spectral = Spectral::new(grid);
        let multiplier = spectral.multiplier(s);
        Self {
            spectral,
            multiplier,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.spectral.grid()
    }

    pub fn s(&self) -> f64 {
        self.multiplier.s
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn symbol(&self) -> &[f64] {
        &self.multiplier.values
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        let sym = &self.multiplier.values;
        self.spectral.apply_symbol(f, |i| sym[i])
    }

    /// `∫ |(-Δ)^{s/2} f|^2 dx` via Parseval.
    pub fn dirichlet_energy(&self, f: &Field) -> Result<f64> {
        self.spectral.check(f)?;
        let spec = self.spectral.forward(f.values());
        Ok(self.energy_of_spectrum(&spec))
    }

    /// Parseval sum `h^d / n^d Σ |k|^{2s} |f̂_k|^2` for an existing transform.
    pub fn energy_of_spectrum(&self, spec: &[Complex64]) -> f64 {
        let grid = self.grid();
        let sum: f64 = spec
            .iter()
            .zip(&self.multiplier.values)
            .map(|(c, m)| m * c.norm_sqr())
            .sum();
        sum * grid.cell_volume() / grid.len() as f64
    }

    /// `(Id + τ(-Δ)^s)^{-1} f`.
    pub fn resolvent(&self, f: &Field, tau: f64) -> Result<Field> {
        if !(tau > 0.0) {
            return Err(FlepError::Domain(format!("resolvent step τ = {tau} must be > 0")));
        }
        let sym = &self.multiplier.values;
        self.spectral.apply_symbol(f, |i| 1.0 / (1.0 + tau * sym[i]))
    }

    /// `(σ Id + (-Δ)^s)^{-1} f` for `σ > 0`.
    pub fn shifted_inverse(&self, f: &Field, sigma: f64) -> Result<Field> {
        if !(sigma > 0.0) {
            return Err(FlepError::Domain(format!("shift σ = {sigma} must be > 0")));
        }
        let sym = &self.multiplier.values;
        self.spectral.apply_symbol(f, |i| 1.0 / (sigma + sym[i]))
    }
}

pub fn apply_fractional_laplacian(f: &Field, s: FractionalOrder) -> Result<Field> {
    FractionalLaplacian::new(*f.grid(), s).apply(f)
}

pub fn dirichlet_energy(f: &Field, s: FractionalOrder) -> Result<f64> {
    FractionalLaplacian::new(*f.grid(), s).dirichlet_energy(f)
}

pub fn resolvent_apply(f: &Field, s: FractionalOrder, tau: f64) -> Result<Field> {
    FractionalLaplacian::new(*f.grid(), s).resolvent(f, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn order(s: f64) -> FractionalOrder {
        FractionalOrder::new(s).unwrap()
    }

    fn sup_diff(a: &Field, b: &Field) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    /// Random field with modes |m| <= cutoff on each axis.
    fn band_limited(grid: Grid, cutoff: i32, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = 2.0 * PI / grid.length();
        let mut modes = Vec::new();
        let ky_range = if grid.dim() == 2 { -cutoff..=cutoff } else { 0..=0 };
        for mx in -cutoff..=cutoff {
            for my in ky_range.clone() {
                let a: f64 = rng.gen_range(-1.0..1.0);
                let ph: f64 = rng.gen_range(0.0..2.0 * PI);
                modes.push((mx as f64 * w, my as f64 * w, a, ph));
            }
        }
        Field::from_fn(grid, |x| {
            modes
                .iter()
                .map(|(kx, ky, a, ph)| a * (kx * x[0] + ky * x[1] + ph).cos())
                .sum()
        })
        .unwrap()
    }

    #[test]
    fn order_bounds() {
        assert!(FractionalOrder::new(0.0).is_err());
        assert!(FractionalOrder::new(1.2).is_err());
        assert!(FractionalOrder::new(1.0).is_ok());
    }

    #[test]
    fn cosine_is_an_eigenfunction() {
        let g = Grid::new(1, 64, 2.0 * PI).unwrap();
        let f = Field::from_fn(g, |x| (3.0 * x[0]).cos()).unwrap();
        let out = apply_fractional_laplacian(&f, order(0.5)).unwrap();
        let expect = f.scaled(3.0).unwrap();
        assert!(sup_diff(&out, &expect) < 1e-12);
    }

    #[test]
    fn classical_laplacian_in_two_dimensions() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let f = Field::from_fn(g, |x| x[0].cos() + (2.0 * x[1]).cos()).unwrap();
        let out = apply_fractional_laplacian(&f, order(1.0)).unwrap();
        let expect = Field::from_fn(g, |x| x[0].cos() + 4.0 * (2.0 * x[1]).cos()).unwrap();
        assert!(sup_diff(&out, &expect) < 1e-12);
    }

    #[test]
    fn plane_waves_on_every_lattice_vector() {
        let g = Grid::new(2, 16, 5.0).unwrap();
        let s = 0.37;
        let op = FractionalLaplacian::new(g, order(s));
        let w = 2.0 * PI / g.length();
        for mx in -7..=7 {
            for my in -7..=7 {
                let (kx, ky) = (mx as f64 * w, my as f64 * w);
                let f = Field::from_fn(g, |x| (kx * x[0] + ky * x[1]).cos()).unwrap();
                let lam = (kx * kx + ky * ky).powf(s);
                let expect = f.scaled(lam).unwrap();
                assert!(sup_diff(&op.apply(&f).unwrap(), &expect) < 1e-11);
            }
        }
    }

    #[test]
    fn dirichlet_energy_examples() {
        let g = Grid::new(1, 64, 2.0 * PI).unwrap();
        let f = Field::from_fn(g, |x| x[0].cos()).unwrap();
        for s in [0.2, 0.5, 1.0] {
            assert!((dirichlet_energy(&f, order(s)).unwrap() - PI).abs() < 1e-12);
        }
        let c = Field::constant(g, 2.0).unwrap();
        assert!(dirichlet_energy(&c, order(0.5)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn dirichlet_energy_is_self_adjoint_pairing() {
        let g = Grid::new(2, 32, 7.0).unwrap();
        let f = band_limited(g, 5, 3);
        for s in [0.3, 0.75] {
            let op = FractionalLaplacian::new(g, order(s));
            let e = op.dirichlet_energy(&f).unwrap();
            let pairing = f.inner(&op.apply(&f).unwrap()).unwrap();
            assert!((e - pairing).abs() <= 1e-10 * e.abs());
        }
    }

    #[test]
    fn operator_is_symmetric() {
        let g = Grid::new(2, 32, 6.0).unwrap();
        let f = band_limited(g, 6, 11);
        let h = band_limited(g, 6, 12);
        let op = FractionalLaplacian::new(g, order(0.6));
        let a = h.inner(&op.apply(&f).unwrap()).unwrap();
        let b = f.inner(&op.apply(&h).unwrap()).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
    }

    #[test]
    fn composition_adds_orders() {
        let g = Grid::new(1, 128, 9.0).unwrap();
        let f = band_limited(g, 20, 5);
        let once = apply_fractional_laplacian(
            &apply_fractional_laplacian(&f, order(0.3)).unwrap(),
            order(0.45),
        )
        .unwrap();
        let direct = apply_fractional_laplacian(&f, order(0.75)).unwrap();
        assert!(sup_diff(&once, &direct) <= 1e-10 * direct.sup_norm());
    }

    #[test]
    fn s_one_matches_finite_differences() {
        // Second-order stencil error is O(h^2): halving h quarters it.
        let err = |n: usize| {
            let g = Grid::new(1, n, 2.0 * PI).unwrap();
            let f = Field::from_fn(g, |x| (x[0].sin()).exp()).unwrap();
            let spec = apply_fractional_laplacian(&f, order(1.0)).unwrap();
            let h = g.spacing();
            let v = f.values();
            (0..n)
                .map(|i| {
                    let fd = -(v[(i + 1) % n] - 2.0 * v[i] + v[(i + n - 1) % n]) / (h * h);
                    (fd - spec.get(i)).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e1 < 0.05);
        assert!((e1 / e2 - 4.0).abs() < 0.2, "ratio {}", e1 / e2);
    }

    #[test]
    fn resolvent_examples() {
        let g = Grid::new(1, 64, 2.0 * PI).unwrap();
        let s = 0.4;
        let f = Field::from_fn(g, |x| (5.0 * x[0]).cos()).unwrap();
        let r = resolvent_apply(&f, order(s), 1.0).unwrap();
        let expect = f.scaled(1.0 / (1.0 + 25f64.powf(s))).unwrap();
        assert!(sup_diff(&r, &expect) < 1e-13);
        assert!(resolvent_apply(&f, order(s), 0.0).is_err());
        assert!(resolvent_apply(&f, order(s), -1.0).is_err());

        let f = band_limited(g, 8, 9);
        let op = FractionalLaplacian::new(g, order(s));
        let bound = op.apply(&f).unwrap().sup_norm();
        for tau in [1e-3, 1e-5] {
            let d = sup_diff(&op.resolvent(&f, tau).unwrap(), &f);
            assert!(d <= tau * bound * (1.0 + 1e-9));
        }
    }

    #[test]
    fn resolvent_roundtrip() {
        let g = Grid::new(2, 32, 4.0).unwrap();
        let op = FractionalLaplacian::new(g, order(0.8));
        let f = band_limited(g, 15, 21);
        let tau = 0.7;
        let r = op.resolvent(&f, tau).unwrap();
        let back = r.zip_map(&op.apply(&r).unwrap(), |a, b| a + tau * b).unwrap();
        assert!(sup_diff(&back, &f) <= 1e-12 * f.sup_norm());
    }

    #[test]
    fn translation_moves_band_limited_fields() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let sp = Spectral::new(g);
        let f = Field::from_fn(g, |x| (2.0 * x[0]).cos() * x[1].sin()).unwrap();
        let shift = [0.3, -0.7];
        let moved = sp.translate(&f, shift).unwrap();
        let expect =
            Field::from_fn(g, |x| (2.0 * (x[0] - 0.3)).cos() * (x[1] + 0.7).sin()).unwrap();
        assert!(sup_diff(&moved, &expect) < 1e-12);
    }

    #[test]
    fn corrupted_spectrum_is_flagged() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let sp = Spectral::new(g);
        let mut spec = sp.forward(&[1.0; 16]);
        spec[1] = Complex64::new(0.0, 5.0);
        assert!(matches!(
            sp.inverse_real(spec, 1.0),
            Err(FlepError::NonReal { .. })
        ));
    }

    #[test]
    fn paired_transforms_match_single_ones() {
        for dim in [1, 2] {
            let g = Grid::new(dim, 32, 5.0).unwrap();
            let sp = Spectral::new(g);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let a: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (fa, fb) = sp.forward_pair(&a, &b);
            let (ea, eb) = (sp.forward(&a), sp.forward(&b));
            for k in 0..g.len() {
                assert!((fa[k] - ea[k]).norm() < 1e-12);
                assert!((fb[k] - eb[k]).norm() < 1e-12);
            }
            let (ra, rb) = sp.inverse_real_pair(&fa, &fb).unwrap();
            for k in 0..g.len() {
                assert!((ra[k] - a[k]).abs() < 1e-13 && (rb[k] - b[k]).abs() < 1e-13);
            }
        }
    }
}
