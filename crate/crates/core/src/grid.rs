//! Truncated uniform lattice on `[-L, L]^n` and grid functions.
//!
//! Cells are centred at `x_i = -L + (i + 1/2) h` with `h = 2L/N`. All
//! difference operators use zero Dirichlet ghost values just outside the box,
//! and every integral is a midpoint sum `h^n * sum_i`. The forward-difference
//! gradient and the 3/5-point Laplacian are adjoint under this quadrature, so
//! summation by parts holds exactly.

use std::io::Write;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    cells: usize,
}

impl Grid {
    /// `dim` in {1, 2}, `half_width > 0`, at least 4 cells per axis.
    pub fn new(dim: usize, half_width: f64, cells: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!("half-width {half_width} must be positive")));
        }
        if cells < 4 {
            return Err(Error::InvalidGrid(format!("{cells} cells per axis, need at least 4")));
        }
        Ok(Grid { dim, half_width, cells })
    }

    /// 1D grid on `[-8, 8]` with 256 cells (`h = 1/16`).
    pub fn reference() -> Self {
        Grid { dim: 1, half_width: 8.0, cells: 256 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Cells per axis.
    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.cells as f64
    }

    /// Cell volume `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    fn axis_coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    /// Coordinates of cell `idx`; the second entry is zero in 1D.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.axis_coord(idx), 0.0],
            _ => [self.axis_coord(idx % self.cells), self.axis_coord(idx / self.cells)],
        }
    }

    /// Euclidean distance of cell `idx` from the origin.
    pub fn radius(&self, idx: usize) -> f64 {
        let [x, y] = self.coords(idx);
        x.hypot(y)
    }

    /// Radius of the farthest cell centre.
    pub fn max_radius(&self) -> f64 {
        let r = self.half_width - 0.5 * self.spacing();
        r * (self.dim as f64).sqrt()
    }

    /// Forward links `(i, Some(j))` with `j = i + e_k`, plus boundary links to
    /// the zero ghost cells encoded as `(i, None)`. Each interior pair of
    /// neighbours appears exactly once.
    pub(crate) fn for_each_link(&self, mut f: impl FnMut(Option<usize>, Option<usize>)) {
        let n = self.cells;
        match self.dim {
            1 => {
                f(None, Some(0));
                for i in 0..n - 1 {
                    f(Some(i), Some(i + 1));
                }
                f(Some(n - 1), None);
            }
            _ => {
                for row in 0..n {
                    f(None, Some(row * n));
                    for i in 0..n - 1 {
                        f(Some(row * n + i), Some(row * n + i + 1));
                    }
                    f(Some(row * n + n - 1), None);
                }
                for col in 0..n {
                    f(None, Some(col));
                    for j in 0..n - 1 {
                        f(Some(j * n + col), Some((j + 1) * n + col));
                    }
                    f(Some((n - 1) * n + col), None);
                }
            }
        }
    }

    /// Field sampled from a function of the cell coordinates.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Field {
        let values = (0..self.len()).map(|i| f(self.coords(i))).collect();
        Field { grid: *self, values }
    }

    /// Field sampled from a radial profile.
    pub fn sample_radial(&self, f: impl Fn(f64) -> f64) -> Field {
        let values = (0..self.len()).map(|i| f(self.radius(i))).collect();
        Field { grid: *self, values }
    }

    pub fn zeros(&self) -> Field {
        Field { grid: *self, values: vec![0.0; self.len()] }
    }

    pub fn constant(&self, c: f64) -> Field {
        Field { grid: *self, values: vec![c; self.len()] }
    }
}

/// A real-valued grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at cell {i}")));
        }
        Ok(Field { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field { grid: self.grid, values })
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Field) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    /// Discrete Laplacian `(Δ_h f)_i = Σ_neighbours (f_j - f_i) / h^2` with
    /// zero ghost values.
    pub fn laplacian(&self) -> Field {
        let g = self.grid;
        let n = g.cells;
        let inv_h2 = 1.0 / (g.spacing() * g.spacing());
        let f = &self.values;
        let mut out = vec![0.0; f.len()];
        match g.dim {
            1 => {
                for i in 0..n {
                    let left = if i > 0 { f[i - 1] } else { 0.0 };
                    let right = if i + 1 < n { f[i + 1] } else { 0.0 };
                    out[i] = (left - 2.0 * f[i] + right) * inv_h2;
                }
            }
            _ => {
                for j in 0..n {
                    for i in 0..n {
                        let k = j * n + i;
                        let left = if i > 0 { f[k - 1] } else { 0.0 };
                        let right = if i + 1 < n { f[k + 1] } else { 0.0 };
                        let down = if j > 0 { f[k - n] } else { 0.0 };
                        let up = if j + 1 < n { f[k + n] } else { 0.0 };
                        out[k] = (left + right + down + up - 4.0 * f[k]) * inv_h2;
                    }
                }
            }
        }
        Field { grid: g, values: out }
    }

    /// `h^n Σ_links ((f_b - f_a)/h) ((g_b - g_a)/h)`, the discrete `<∇f, ∇g>`.
    pub fn grad_inner(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.weighted_grad_inner(other, |_, _| 1.0))
    }

    /// Gradient inner product with a per-link weight computed from the two
    /// endpoint cells (`None` for a ghost).
    pub(crate) fn weighted_grad_inner(
        &self,
        other: &Field,
        weight: impl Fn(Option<usize>, Option<usize>) -> f64,
    ) -> f64 {
        let h = self.grid.spacing();
        let mut acc = 0.0;
        let (f, g) = (&self.values, &other.values);
        self.grid.for_each_link(|a, b| {
            let w = weight(a, b);
            if w == 0.0 {
                return;
            }
            let fa = a.map_or(0.0, |i| f[i]);
            let fb = b.map_or(0.0, |i| f[i]);
            let ga = a.map_or(0.0, |i| g[i]);
            let gb = b.map_or(0.0, |i| g[i]);
            acc += w * (fb - fa) * (gb - ga);
        });
        acc * self.grid.cell_volume() / (h * h)
    }

    /// `||∇_h f||^2` over forward-difference links including the ghost links.
    pub fn grad_sq_norm(&self) -> f64 {
        self.weighted_grad_inner(self, |_, _| 1.0)
    }

    /// Midpoint-quadrature inner product `h^n Σ f_i g_i`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_volume())
    }

    /// `h^n Σ f_i`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm_l2_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_l2_sq().sqrt()
    }

    /// `h^n Σ |f_i|^p`.
    pub fn lp_integral(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!("L^p exponent {p} < 1")));
        }
        Ok(self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * self.grid.cell_volume())
    }

    pub fn norm_lp(&self, p: f64) -> Result<f64> {
        Ok(self.lp_integral(p)?.powf(1.0 / p))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// One CSV row per cell: coordinates followed by the value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        match self.grid.dim {
            1 => writeln!(out, "x,value")?,
            _ => writeln!(out, "x,y,value")?,
        }
        for (i, v) in self.values.iter().enumerate() {
            let [x, y] = self.grid.coords(i);
            match self.grid.dim {
                1 => writeln!(out, "{x},{v}")?,
                _ => writeln!(out, "{x},{y},{v}")?,
            }
        }
        Ok(())
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b).expect("grid mismatch in Field addition")
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b).expect("grid mismatch in Field subtraction")
    }
}

impl Mul<&Field> for f64 {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        rhs.scale(self)
    }
}

/// Smooth nondecreasing cutoff: 0 on `[0, 1]`, 1 on `[2, ∞)`, smoothstep
/// `3τ² - 2τ³` with `τ = s - 1` in between. Its derivative peaks at 1.5.
pub fn cutoff_rho(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!("cutoff argument {s} < 0")));
    }
    Ok(cutoff_unchecked(s))
}

pub(crate) fn cutoff_unchecked(s: f64) -> f64 {
    if s <= 1.0 {
        0.0
    } else if s >= 2.0 {
        1.0
    } else {
        let t = s - 1.0;
        t * t * (3.0 - 2.0 * t)
    }
}

/// Per-cell weights `ρ(|x|²/r²)`.
pub fn tail_mask(grid: &Grid, r: f64) -> Result<Field> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("tail radius {r} must be positive")));
    }
    Ok(grid.sample_radial(|x| cutoff_unchecked(x * x / (r * r))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_grid(cells: usize) -> Grid {
        // h = 1
        Grid::new(1, cells as f64 / 2.0, cells).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(3, 1.0, 8).is_err());
        assert!(Grid::new(1, 0.0, 8).is_err());
        assert!(Grid::new(1, 1.0, 3).is_err());
        let g = Grid::new(2, 1.0, 4).unwrap();
        assert_eq!(g.len(), 16);
        assert!(g.max_radius() < 2f64.sqrt());
    }

    #[test]
    fn laplacian_stencil_by_hand() {
        let g = unit_grid(4);
        let f = Field::from_values(g, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(f.laplacian().values(), &[1.0, -2.0, 1.0, 0.0]);
        assert!(g.zeros().laplacian().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_2d_stencil() {
        let g = Grid::new(2, 2.0, 4).unwrap();
        let mut f = g.zeros();
        f.values_mut()[5] = 1.0;
        let lap = f.laplacian();
        assert_eq!(lap.values()[5], -4.0);
        for k in [4, 6, 1, 9] {
            assert_eq!(lap.values()[k], 1.0);
        }
    }

    #[test]
    fn discrete_eigenfunction() {
        let g = Grid::reference();
        let (l, h) = (g.half_width(), g.spacing());
        // vanishes at the ghost centres ±(L + h/2)
        let f = g.sample(|[x, _]| (std::f64::consts::PI * x / (2.0 * l + h)).cos());
        let lambda = 2.0 / (h * h) * (1.0 - (std::f64::consts::PI * h / (2.0 * l)).cos());
        let resid = &f.laplacian() + &f.scale(lambda);
        let rel = resid.norm_l2() / f.scale(lambda).norm_l2();
        assert!(rel <= 1e-2, "relative error {rel}");
    }

    #[test]
    fn grad_sq_norm_by_hand() {
        let g = unit_grid(4);
        let f = g.constant(1.0);
        // ghost links at both ends contribute 1 each
        assert_eq!(f.grad_sq_norm(), 2.0);
        assert_eq!(g.zeros().grad_sq_norm(), 0.0);
    }

    #[test]
    fn l2_single_cell() {
        let g = Grid::reference();
        let mut f = g.zeros();
        f.values_mut()[17] = 2.0;
        assert_eq!(f.norm_l2(), 0.5);
        assert_eq!(g.zeros().norm_l2(), 0.0);
        assert!(f.norm_lp(0.5).is_err());
    }

    #[test]
    fn cutoff_values() {
        assert_eq!(cutoff_rho(0.5).unwrap(), 0.0);
        assert_eq!(cutoff_rho(3.0).unwrap(), 1.0);
        assert_eq!(cutoff_rho(1.5).unwrap(), 0.5);
        assert!(cutoff_rho(-0.1).is_err());
    }

    #[test]
    fn cutoff_monotone_with_bounded_slope() {
        let n = 10_000;
        let ds = 3.0 / n as f64;
        let mut prev = cutoff_rho(0.0).unwrap();
        for k in 1..=n {
            let s = k as f64 * ds;
            let cur = cutoff_rho(s).unwrap();
            assert!(cur >= prev);
            let lo = (s - ds / 2.0).max(0.0);
            let slope = (cutoff_rho(s + ds / 2.0).unwrap() - cutoff_rho(lo).unwrap()) / (s + ds / 2.0 - lo);
            assert!(slope <= 2.0, "slope {slope} at {s}");
            prev = cur;
        }
    }

    #[test]
    fn tail_mask_regions() {
        let g = Grid::reference();
        let r = (2.0 * g.dim() as f64).sqrt() * g.half_width();
        assert!(tail_mask(&g, r).unwrap().values().iter().all(|&v| v == 0.0));
        // cell centre at x = 1.5 r  ->  s = 2.25
        let x = g.coords(200)[0];
        let mask = tail_mask(&g, x / 1.5).unwrap();
        assert_eq!(mask.values()[200], 1.0);
        let mask = tail_mask(&g, x / 1.5f64.sqrt()).unwrap();
        assert!((mask.values()[200] - 0.5).abs() < 1e-12);
        assert!(tail_mask(&g, 0.0).is_err());
    }

    #[test]
    fn rho_between_indicators() {
        let g = Grid::new(2, 4.0, 32).unwrap();
        let r = 1.3;
        let mask = tail_mask(&g, r).unwrap();
        for (i, &w) in mask.values().iter().enumerate() {
            let x = g.radius(i);
            let outer = if x > 2f64.sqrt() * r { 1.0 } else { 0.0 };
            let inner = if x > r { 1.0 } else { 0.0 };
            assert!(outer <= w && w <= inner);
        }
    }

    #[test]
    fn mismatched_grids_error() {
        let a = Grid::reference().zeros();
        let b = Grid::new(1, 8.0, 128).unwrap().zeros();
        assert!(matches!(a.inner(&b), Err(Error::GridMismatch)));
        assert!(a.grad_inner(&b).is_err());
    }

    fn field_strategy(grid: Grid) -> impl Strategy<Value = Field> {
        prop::collection::vec(-3.0f64..3.0, grid.len())
            .prop_map(move |v| Field::from_values(grid, v).unwrap())
    }

    fn small_grids() -> impl Strategy<Value = Grid> {
        prop_oneof![
            (4usize..40, 0.5f64..10.0).prop_map(|(n, l)| Grid::new(1, l, n).unwrap()),
            (4usize..12, 0.5f64..5.0).prop_map(|(n, l)| Grid::new(2, l, n).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn summation_by_parts(f in small_grids().prop_flat_map(field_strategy)) {
            let lhs = f.grad_sq_norm();
            let rhs = -f.inner(&f.laplacian()).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-300));
        }

        #[test]
        fn laplacian_symmetric_nsd(
            (f, g) in small_grids().prop_flat_map(|g| (field_strategy(g), field_strategy(g)))
        ) {
            let a = f.inner(&g.laplacian()).unwrap();
            let b = g.inner(&f.laplacian()).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
            prop_assert!(f.inner(&f.laplacian()).unwrap() <= 0.0);
        }

        #[test]
        fn lp_two_matches_l2(f in small_grids().prop_flat_map(field_strategy)) {
            let a = f.norm_lp(2.0).unwrap();
            let b = f.norm_l2();
            prop_assert!((a - b).abs() <= 1e-14 * b.max(1e-300));
        }

        #[test]
        fn lp_additive_over_disjoint_supports(
            f in field_strategy(Grid::new(1, 4.0, 32).unwrap()),
            split in 1usize..31,
            p in 1.0f64..6.0,
        ) {
            let g = *f.grid();
            let left = Field::from_values(g, f.values().iter().enumerate()
                .map(|(i, &v)| if i < split { v } else { 0.0 }).collect()).unwrap();
            let right = &f - &left;
            let total = f.lp_integral(p).unwrap();
            let sum = left.lp_integral(p).unwrap() + right.lp_integral(p).unwrap();
            prop_assert!((total - sum).abs() <= 1e-12 * total.max(1e-300));
        }
    }
}
