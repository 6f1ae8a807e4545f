//! Tail functionals outside a ball `B_r` and the ensemble tail experiment.
//!
//! [`tail_norm`] restricts the E-norm to cells with `|x| > r` (sharp cut).
//! [`tail_energy`] weights every integrand of `Q` by `ρ(|x|²/r²)`. A gradient
//! link belongs to the sharp tail if any of its real endpoints does, and
//! carries the larger of its endpoint weights in the smooth one.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{pullback, Model, State, TimeGrid, MAX_CFL};
use crate::energy::e_norm;
use crate::error::{Error, Result};
use crate::grid::{cutoff_unchecked, Field, Grid};
use crate::noise::{NoisePath, OuTrajectory};
use crate::params::Params;

/// Largest admissible tail radius as a fraction of the half-width; beyond it
/// the Dirichlet walls suppress tails artificially.
pub const MAX_RADIUS_FRACTION: f64 = 0.75;

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("tail radius {r} must be positive")));
    }
    Ok(())
}

fn restrict(field: &Field, weights: &[f64]) -> Field {
    let values = field.values().iter().zip(weights).map(|(x, w)| x * w).collect();
    Field::from_values(*field.grid(), values).expect("restriction of a finite field")
}

fn cell_weights(grid: &Grid, weight: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..grid.len()).map(|i| weight(grid.radius(i))).collect()
}

/// E-norm of `χ_{|x| > r} (u, v)`.
pub fn tail_norm(state: &State, r: f64, params: &Params) -> Result<f64> {
    check_radius(r)?;
    let grid = state.grid();
    let chi = cell_weights(grid, |x| if x > r { 1.0 } else { 0.0 });
    let link = |a: Option<usize>, b: Option<usize>| {
        let any = a.is_some_and(|i| chi[i] == 1.0) || b.is_some_and(|i| chi[i] == 1.0);
        if any {
            1.0
        } else {
            0.0
        }
    };
    let u = restrict(&state.u, &chi);
    let v = restrict(&state.v, &chi);
    let grad = state.u.weighted_grad_inner(&state.u, link);
    let quad = v.norm_l2_sq() + params.coercivity() * u.norm_l2_sq() + grad;
    let restricted = State { u, v };
    let lp = restricted.u.norm_lp(params.p)?;
    // same evaluation as e_norm when nothing is cut away
    if chi.iter().all(|&c| c == 1.0) {
        return e_norm(state, params);
    }
    Ok(quad.sqrt() + lp)
}

/// `Q` with every integrand weighted by `ρ(|x|²/r²)`.
pub fn tail_energy(state: &State, r: f64, params: &Params, nl: &crate::nonlin::Nonlinearity) -> Result<f64> {
    check_radius(r)?;
    let grid = state.grid();
    let rho = cell_weights(grid, |x| cutoff_unchecked(x * x / (r * r)));
    let link = |a: Option<usize>, b: Option<usize>| {
        let wa = a.map_or(0.0, |i| rho[i]);
        let wb = b.map_or(0.0, |i| rho[i]);
        wa.max(wb)
    };
    let h = grid.cell_volume();
    let (u, v) = (state.u.values(), state.v.values());
    let a = params.coercivity();
    let mut acc = 0.0;
    for i in 0..grid.len() {
        if rho[i] != 0.0 {
            acc += rho[i] * (v[i] * v[i] + a * u[i] * u[i] + 2.0 * nl.F(u[i]));
        }
    }
    let grad = state.u.weighted_grad_inner(&state.u, link);
    Ok(acc * h + grad + 2.0 * nl.phi3_l1())
}

/// Radius beyond which the discrete RK4 solution is exactly zero after
/// `steps` steps, for data, forcing and noise supported in `|x| < support`:
/// each step couples two neighbouring cells per axis, and one more cell
/// accounts for gradient links straddling the cut.
pub fn discrete_cone_radius(grid: &Grid, support: f64, steps: usize) -> f64 {
    support + (2 * steps + 1) as f64 * grid.spacing() * (grid.dim() as f64).sqrt()
}

/// Ensemble configuration of [`tail_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailConfig {
    pub seeds: Vec<u64>,
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub t: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
    pub eta: f64,
    /// `max_tail[i][j]`: largest tail norm over seeds and initial states at
    /// `(times[i], radii[j])`.
    pub max_tail: Vec<Vec<f64>>,
    /// For each time `T` the smallest `V` such that every sampled tail with
    /// `t >= T`, `r >= V` is below `eta`.
    pub frontier: Vec<FrontierPoint>,
    /// Earliest frontier point, if any.
    pub cell: Option<FrontierPoint>,
}

impl TailReport {
    pub fn below(&self, i: usize, j: usize) -> bool {
        self.max_tail[i][j] < self.eta
    }

    /// CSV matrix with rows `t` and columns `r`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = self.radii.iter().map(|r| format!("r={r}")).collect();
        writeln!(out, "t,{}", header.join(","))?;
        for (t, row) in self.times.iter().zip(&self.max_tail) {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(out, "{t},{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn increasing(xs: &[f64]) -> bool {
    !xs.is_empty() && xs.windows(2).all(|w| w[0] < w[1])
}

/// Pullback runs for every seed and initial state, evaluating
/// [`tail_norm`] at each `(t, r)` pair.
pub fn tail_experiment(model: &Model, initial: &[State], config: &TailConfig) -> Result<TailReport> {
    if !increasing(&config.times) || !increasing(&config.radii) {
        return Err(Error::InvalidArgument("tail schedules must be nonempty and increasing".into()));
    }
    if config.seeds.is_empty() || initial.is_empty() {
        return Err(Error::InvalidArgument("tail experiment needs seeds and initial states".into()));
    }
    if !(config.eta > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold eta = {} must be positive", config.eta)));
    }
    let grid = *model.grid();
    let r_max = MAX_RADIUS_FRACTION * grid.half_width();
    if config.radii[0] <= 0.0 || *config.radii.last().expect("nonempty") > r_max {
        return Err(Error::InvalidArgument(format!("tail radii must lie in (0, {r_max}]")));
    }
    let t_max = *config.times.last().expect("nonempty");
    let dt = TimeGrid::for_grid(&grid, MAX_CFL)?.noise_dt();
    let jobs: Vec<(u64, &State)> =
        config.seeds.iter().flat_map(|&s| initial.iter().map(move |x| (s, x))).collect();
    let per_job: Vec<Vec<Vec<f64>>> = jobs
        .par_iter()
        .map(|&(seed, x)| {
            let path = NoisePath::sample(seed, -t_max, 0.0, dt, model.params.m)?;
            let ou = OuTrajectory::from_path(&path, model.params.delta)?;
            config
                .times
                .iter()
                .map(|&t| {
                    let s = pullback(t, &ou, x, model)?;
                    config.radii.iter().map(|&r| tail_norm(&s, r, &model.params)).collect()
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let (nt, nr) = (config.times.len(), config.radii.len());
    let mut max_tail = vec![vec![0.0f64; nr]; nt];
    for job in &per_job {
        for i in 0..nt {
            for j in 0..nr {
                max_tail[i][j] = max_tail[i][j].max(job[i][j]);
            }
        }
    }
    let frontier = frontier(&config.times, &config.radii, &max_tail, config.eta);
    Ok(TailReport {
        times: config.times.clone(),
        radii: config.radii.clone(),
        eta: config.eta,
        cell: frontier.first().copied(),
        max_tail,
        frontier,
    })
}

fn frontier(times: &[f64], radii: &[f64], max_tail: &[Vec<f64>], eta: f64) -> Vec<FrontierPoint> {
    let mut out = Vec::new();
    for i in 0..times.len() {
        let first_ok = (0..radii.len())
            .find(|&j| (i..times.len()).all(|ii| (j..radii.len()).all(|jj| max_tail[ii][jj] < eta)));
        if let Some(j) = first_ok {
            out.push(FrontierPoint { t: times[i], r: radii[j] });
        }
    }
    out
}
