//! Uniform periodic grids on `[-L/2, L/2)^d` and real fields sampled on them.
//!
//! Samples are stored row-major: for `d = 2` the flat index is `i * n + j`
//! where `i` runs along the first axis. The coordinate of index `j` on any
//! axis is `-L/2 + j h` with `h = L / n`, so the origin sits at `j = n / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{FlepError, Result};

/// A point in the box. For one-dimensional grids the second entry is ignored.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(FlepError::InvalidGrid(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(FlepError::InvalidGrid(format!(
                "points per axis must be a power of two >= 16, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(FlepError::InvalidGrid(format!(
                "box length must be positive, got {length}"
            )));
        }
        Ok(Self { dim, n, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Box side length `L`.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Total number of samples `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.spacing()
    }

    /// Axis indices of a flat index.
    pub fn axis_indices(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    pub fn flat_index(&self, axes: [usize; 2]) -> usize {
        if self.dim == 1 {
            axes[0]
        } else {
            axes[0] * self.n + axes[1]
        }
    }

    pub fn point(&self, idx: usize) -> Point {
        let [i, j] = self.axis_indices(idx);
        if self.dim == 1 {
            [self.coord(i), 0.0]
        } else {
            [self.coord(i), self.coord(j)]
        }
    }

    /// Whether `p` lies inside `[-L/2, L/2)^d`.
    pub fn contains(&self, p: Point) -> bool {
        let half = 0.5 * self.length;
        p.iter()
            .take(self.dim)
            .all(|&x| x.is_finite() && x >= -half && x < half)
    }

    /// Wraps a coordinate difference into `[-L/2, L/2)`.
    pub fn wrap(&self, dx: f64) -> f64 {
        let l = self.length;
        dx - l * ((dx + 0.5 * l) / l).floor()
    }

    /// Minimal-image separation vector `x - center`.
    pub fn separation(&self, x: Point, center: Point) -> Point {
        let mut out = [0.0; 2];
        for a in 0..self.dim {
            out[a] = self.wrap(x[a] - center[a]);
        }
        out
    }

    /// Minimal-image distance `|x - center|` on the torus.
    pub fn distance(&self, x: Point, center: Point) -> f64 {
        let d = self.separation(x, center);
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    }

    /// Flat index of the grid point nearest to `p` (periodically).
    pub fn nearest_index(&self, p: Point) -> usize {
        let h = self.spacing();
        let mut axes = [0usize; 2];
        for a in 0..self.dim {
            let x = self.wrap(p[a]) + 0.5 * self.length;
            let j = (x / h).round() as isize;
            axes[a] = j.rem_euclid(self.n as isize) as usize;
        }
        self.flat_index(axes)
    }

    /// Angular wavenumber of FFT bin `j`, aliased to `[-n/2, n/2)`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.n as isize;
        let j = j as isize;
        let m = if j < n / 2 { j } else { j - n };
        2.0 * std::f64::consts::PI * m as f64 / self.length
    }

    /// Index of the reflection `x -> -x` along one axis.
    pub fn reflect(&self, j: usize) -> usize {
        (self.n - j) % self.n
    }
}

/// Real-valued samples on a [`Grid`]. Every sample is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(FlepError::Domain(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FlepError::NonFinite);
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Rectangle-rule integral `h^d * sum(values)`.
    pub fn integrate(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    /// `∫ |f|^r dx` (no root taken).
    pub fn lp_norm_p(&self, r: f64) -> Result<f64> {
        if !(r >= 1.0) {
            return Err(FlepError::Domain(format!("exponent r = {r} must be >= 1")));
        }
        Ok(self.grid.cell_volume() * self.values.iter().map(|v| abs_pow(*v, r)).sum::<f64>())
    }

    /// `∫ f^2 dx`.
    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    /// `∫ |x - center|^r |f|^pow dx` with minimal-image distances.
    pub fn moment(&self, center: Point, r: f64, pow: f64) -> Result<f64> {
        if !self.grid.contains(center) {
            return Err(FlepError::Domain(format!(
                "center {:?} outside the box",
                &center[..self.grid.dim()]
            )));
        }
        if !(r >= 0.0) {
            return Err(FlepError::Domain(format!("radial power {r} must be >= 0")));
        }
        if r == 0.0 {
            return self.lp_norm_p(pow);
        }
        if !(pow >= 1.0) {
            return Err(FlepError::Domain(format!("exponent {pow} must be >= 1")));
        }
        let sum: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let dist = self.grid.distance(self.grid.point(i), center);
                dist.powf(r) * abs_pow(*v, pow)
            })
            .sum();
        Ok(self.grid.cell_volume() * sum)
    }

    /// `∫ f g dx`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.grid.cell_volume() * dot(&self.values, &other.values))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid, self.values.iter().map(|v| f(*v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_same_grid(other)?;
        Field::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        )
    }

    pub fn scaled(&self, c: f64) -> Result<Field> {
        self.map(|v| c * v)
    }

    /// Rescales to `∫ f^2 = mass`.
    pub fn normalized_to(&self, mass: f64) -> Result<Field> {
        let current = self.mass();
        if current <= 0.0 {
            return Err(FlepError::Domain("cannot normalize a zero field".into()));
        }
        self.scaled((mass / current).sqrt())
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(FlepError::GridMismatch)
        }
    }

    /// Flat index of the largest `|f|`; ties go to the smallest index.
    pub fn argmax_abs(&self) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (i, v) in self.values.iter().enumerate() {
            if v.abs() > best_val {
                best_val = v.abs();
                best = i;
            }
        }
        best
    }
}

/// `|x|^e` with fast paths for the small integer exponents that dominate
/// the mass-critical nonlinearities.
#[inline]
pub fn abs_pow(x: f64, e: f64) -> f64 {
    let a = x.abs();
    if e == 2.0 {
        a * a
    } else if e == 1.0 {
        a
    } else if e == 3.0 {
        a * a * a
    } else if e == 4.0 {
        let b = a * a;
        b * b
    } else if e == 6.0 {
        let b = a * a * a;
        b * b
    } else if a == 0.0 {
        0.0
    } else {
        a.powf(e)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
