//! Finite-sample surrogates of the pullback attractor: state clouds, the
//! Hausdorff semidistance in the E-norm, pullback convergence and
//! invariance experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_to, pullback, Model, State};
use crate::energy::e_norm;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::noise::{OuTrajectory, Shape};
use crate::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub pullback_time: f64,
    pub initial_id: usize,
}

/// States on a common grid with their origin.
#[derive(Debug, Clone, PartialEq)]
pub struct StateCloud {
    pub states: Vec<State>,
    pub provenance: Vec<Provenance>,
}

impl StateCloud {
    pub fn new(states: Vec<State>, provenance: Vec<Provenance>) -> Result<Self> {
        if states.len() != provenance.len() {
            return Err(Error::InvalidArgument("one provenance record per state required".into()));
        }
        if let Some(first) = states.first() {
            for s in &states {
                first.u.check_same_grid(&s.u)?;
            }
        }
        Ok(StateCloud { states, provenance })
    }

    pub fn singleton(state: State) -> Self {
        let provenance = vec![Provenance { seed: 0, pullback_time: 0.0, initial_id: 0 }];
        StateCloud { states: vec![state], provenance }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Largest E-norm in the cloud.
    pub fn max_e_norm(&self, params: &Params) -> Result<f64> {
        self.states.iter().map(|s| e_norm(s, params)).try_fold(0.0, |m, x| Ok(f64::max(m, x?)))
    }
}

/// `sup_{a ∈ A} inf_{b ∈ B} ||a - b||_E`.
pub fn hausdorff_semidist(a: &StateCloud, b: &StateCloud, params: &Params) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let per_a = a
        .states
        .par_iter()
        .map(|x| {
            b.states
                .iter()
                .map(|y| e_norm(&x.diff(y)?, params))
                .try_fold(f64::INFINITY, |m, d| Ok::<_, Error>(m.min(d?)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_a.into_iter().fold(0.0, f64::max))
}

/// A smooth, compactly supported random state: a few bumps in `u` and `v`
/// centred in the inner half of the box.
pub fn random_smooth_state(grid: &Grid, rng: &mut impl Rng) -> State {
    let inner = 0.5 * grid.half_width();
    let component = |rng: &mut dyn rand::RngCore| {
        let mut f = grid.zeros();
        for _ in 0..3 {
            let radius = rng.random_range(1.0..inner.max(1.5));
            let center = rng.random_range(-inner..inner);
            let shape = Shape::Bump { amplitude: rng.random_range(-1.0..1.0), radius, center };
            f.axpy(1.0, &shape.sample(grid)).expect("same grid");
        }
        f
    };
    let u = component(rng);
    let v = component(rng);
    State { u, v }
}

/// `count` samples of the ball of E-norm radius `radius`: random smooth
/// directions scaled to stratified norms `radius (j + 1) / count`.
pub fn sample_ball(grid: &Grid, params: &Params, radius: f64, count: usize, seed: u64) -> Result<Vec<State>> {
    if !(radius >= 0.0) {
        return Err(Error::InvalidArgument(format!("ball radius {radius} < 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|j| {
            let dir = random_smooth_state(grid, &mut rng);
            let norm = e_norm(&dir, params)?;
            let target = radius * (j + 1) as f64 / count as f64;
            Ok(dir.scale(target / norm))
        })
        .collect()
}

/// Pullback clouds at increasing depths.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractorApprox {
    pub times: Vec<f64>,
    /// `stages[i] = {Φ(T_i, θ_{-T_i} ω, x_j)}_j`.
    pub stages: Vec<StateCloud>,
    /// `gaps[i] = dist(stages[i + 1], stages[i])`.
    pub gaps: Vec<f64>,
}

impl AttractorApprox {
    /// The deepest stage, the finite surrogate of the attractor.
    pub fn deepest(&self) -> &StateCloud {
        self.stages.last().expect("at least one stage")
    }

    /// Union of all stages.
    pub fn cloud(&self) -> StateCloud {
        let mut states = Vec::new();
        let mut provenance = Vec::new();
        for s in &self.stages {
            states.extend(s.states.iter().cloned());
            provenance.extend(s.provenance.iter().copied());
        }
        StateCloud { states, provenance }
    }

    /// Last inter-stage gap, the internal Cauchy gap of the surrogate.
    pub fn cauchy_gap(&self) -> Option<f64> {
        self.gaps.last().copied()
    }
}

fn check_schedule(times: &[f64]) -> Result<()> {
    if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("pullback times must be nonnegative and increasing".into()));
    }
    Ok(())
}

/// Pullback clouds ending at `end`: member `j` of stage `i` is the state at
/// `end` of the solution started from `x_j` at `end - T_i`.
fn clouds_ending_at(
    model: &Model,
    ou: &OuTrajectory,
    seed: u64,
    times: &[f64],
    initial: &[State],
    end: f64,
) -> Result<Vec<StateCloud>> {
    times
        .iter()
        .map(|&t| {
            let states = initial
                .par_iter()
                .map(|x| evolve_to(x, end - t, end, ou, model))
                .collect::<Result<Vec<_>>>()?;
            let provenance = (0..initial.len())
                .map(|j| Provenance { seed, pullback_time: t, initial_id: j })
                .collect();
            StateCloud::new(states, provenance)
        })
        .collect()
}

/// Clouds `Φ(T_i, θ_{-T_i} ω, x_j)` for every pullback time, with the
/// semidistances between consecutive stages. `seed` is recorded as
/// provenance of the path behind `ou`.
pub fn approximate_attractor(
    model: &Model,
    ou: &OuTrajectory,
    seed: u64,
    times: &[f64],
    initial: &[State],
) -> Result<AttractorApprox> {
    check_schedule(times)?;
    if initial.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let stages = clouds_ending_at(model, ou, seed, times, initial, 0.0)?;
    let gaps = stages
        .windows(2)
        .map(|w| hausdorff_semidist(&w[1], &w[0], &model.params))
        .collect::<Result<Vec<_>>>()?;
    Ok(AttractorApprox { times: times.to_vec(), stages, gaps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub times: Vec<f64>,
    /// `differences[j][i] = ||Φ(t_{i+1}, θ_{-t_{i+1}} ω, x_j) - Φ(t_i, θ_{-t_i} ω, x_j)||_E`.
    pub differences: Vec<Vec<f64>>,
    /// Per initial state, `exp(λ Δt)` for the least-squares slope `λ` of
    /// `ln d_i` against `t_i` and the mean spacing `Δt`.
    pub fitted_rates: Vec<f64>,
    /// `e^{-σ Δt}`.
    pub benchmark: f64,
    /// Fewer than two differences per initial state.
    pub insufficient_data: bool,
    /// Final pullback state per initial condition.
    pub terminal: Vec<f64>,
    /// Largest E-distance between terminal states of distinct initial conditions.
    pub terminal_spread: f64,
}

impl ConvergenceReport {
    /// Every fitted rate is at most `factor` times the benchmark.
    pub fn rate_within(&self, factor: f64) -> bool {
        !self.insufficient_data && self.fitted_rates.iter().all(|&r| r <= factor * self.benchmark)
    }

    /// Every difference sequence decreases strictly.
    pub fn strictly_decreasing(&self) -> bool {
        !self.insufficient_data
            && self.differences.iter().all(|d| d.windows(2).all(|w| w[1] < w[0]))
    }
}

/// Least-squares slope of `ln y` against `x`; `None` if fewer than two
/// positive samples.
pub fn log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|p| *p.1 > 0.0).map(|(&a, &b)| (a, b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Consecutive pullback differences for every initial state along one path.
pub fn pullback_convergence_test(
    model: &Model,
    ou: &OuTrajectory,
    initial: &[State],
    times: &[f64],
) -> Result<ConvergenceReport> {
    check_schedule(times)?;
    if initial.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let sigma = model.params.decay_rate_sigma()?;
    let runs = initial
        .par_iter()
        .map(|x| times.iter().map(|&t| pullback(t, ou, x, model)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let differences = runs
        .iter()
        .map(|states| {
            states.windows(2).map(|w| e_norm(&w[1].diff(&w[0])?, &model.params)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let insufficient_data = times.len() < 3;
    let dt_mean = if times.len() > 1 {
        (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64
    } else {
        0.0
    };
    let t_right = &times[1.min(times.len())..];
    let fitted_rates = differences
        .iter()
        .map(|d| log_slope(t_right, d).map_or(f64::NAN, |s| (s * dt_mean).exp()))
        .collect();
    let terminal_states: Vec<&State> = runs.iter().map(|r| r.last().expect("nonempty schedule")).collect();
    let terminal = terminal_states.iter().map(|s| e_norm(s, &model.params)).collect::<Result<Vec<_>>>()?;
    let mut terminal_spread = 0.0f64;
    for (i, a) in terminal_states.iter().enumerate() {
        for b in &terminal_states[i + 1..] {
            terminal_spread = terminal_spread.max(e_norm(&a.diff(b)?, &model.params)?);
        }
    }
    Ok(ConvergenceReport {
        times: times.to_vec(),
        differences,
        fitted_rates,
        benchmark: (-sigma * dt_mean).exp(),
        insufficient_data,
        terminal,
        terminal_spread,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub t: f64,
    /// `dist(Φ(t, ω, A(ω)), A(θ_t ω))`.
    pub pushed_to_shifted: f64,
    /// `dist(A(θ_t ω), Φ(t, ω, A(ω)))`.
    pub shifted_to_pushed: f64,
    pub gap_omega: f64,
    pub gap_shifted: f64,
}

impl InvarianceReport {
    /// Both semidistances within `factor` times each cloud's Cauchy gap, or
    /// below `abs_tol` outright.
    pub fn passed(&self, factor: f64, abs_tol: f64) -> bool {
        let worst = self.pushed_to_shifted.max(self.shifted_to_pushed);
        worst <= abs_tol || worst <= factor * self.gap_omega.min(self.gap_shifted)
    }
}

/// Pushes the deepest cloud at `ω` forward by `t` and compares it with the
/// surrogate built at `θ_t ω` from the same pullback schedule. `ou` must
/// cover `[-T_k, t]`.
pub fn invariance_check(
    model: &Model,
    ou: &OuTrajectory,
    approx: &AttractorApprox,
    initial: &[State],
    t: f64,
) -> Result<InvarianceReport> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("invariance time {t} < 0")));
    }
    let seed = approx.deepest().provenance.first().map_or(0, |p| p.seed);
    let pushed_states = approx
        .deepest()
        .states
        .par_iter()
        .map(|x| evolve_to(x, 0.0, t, ou, model))
        .collect::<Result<Vec<_>>>()?;
    let pushed = StateCloud::new(pushed_states, approx.deepest().provenance.clone())?;
    let shifted_stages = clouds_ending_at(model, ou, seed, &approx.times, initial, t)?;
    let gap_shifted = match shifted_stages.len() {
        n if n >= 2 => hausdorff_semidist(&shifted_stages[n - 1], &shifted_stages[n - 2], &model.params)?,
        _ => 0.0,
    };
    let shifted = shifted_stages.last().expect("nonempty schedule");
    Ok(InvarianceReport {
        t,
        pushed_to_shifted: hausdorff_semidist(&pushed, shifted, &model.params)?,
        shifted_to_pushed: hausdorff_semidist(shifted, &pushed, &model.params)?,
        gap_omega: approx.cauchy_gap().unwrap_or(0.0),
        gap_shifted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Forcing, TimeGrid, MAX_CFL};
    use crate::noise::{NoisePath, NoiseProfile};
    use crate::nonlin::Nonlinearity;

    fn model(eps: f64) -> Model {
        let grid = Grid::reference();
        let params = Params::reference().with_epsilon(eps);
        let profile = NoiseProfile::reference(&grid, 4.0);
        Model::new(params, Nonlinearity::canonical(4.0).unwrap(), Forcing::new(grid.zeros(), profile).unwrap())
            .unwrap()
    }

    fn ou(seed: u64, t_min: f64, t_max: f64) -> OuTrajectory {
        let dt = TimeGrid::for_grid(&Grid::reference(), MAX_CFL).unwrap().noise_dt();
        OuTrajectory::from_path(&NoisePath::sample(seed, t_min, t_max, dt, 1).unwrap(), 0.25).unwrap()
    }

    #[test]
    fn semidistance_examples() {
        let g = Grid::reference();
        let p = Params::reference();
        let states = sample_ball(&g, &p, 5.0, 4, 1).unwrap();
        let a = StateCloud::new(states.clone(), vec![Provenance { seed: 0, pullback_time: 0.0, initial_id: 0 }; 4])
            .unwrap();
        assert_eq!(hausdorff_semidist(&a, &a, &p).unwrap(), 0.0);
        let zero = StateCloud::singleton(State::zeros(&g));
        let x = StateCloud::singleton(states[2].clone());
        assert!((hausdorff_semidist(&x, &zero, &p).unwrap() - e_norm(&states[2], &p).unwrap()).abs() < 1e-12);
        let s = states[0].scale(3.0 / e_norm(&states[0], &p).unwrap());
        let two = StateCloud::new(
            vec![State::zeros(&g), s],
            vec![Provenance { seed: 0, pullback_time: 0.0, initial_id: 0 }; 2],
        )
        .unwrap();
        assert!((hausdorff_semidist(&two, &zero, &p).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(hausdorff_semidist(&zero, &two, &p).unwrap(), 0.0);
        let empty = StateCloud::new(vec![], vec![]).unwrap();
        assert!(matches!(hausdorff_semidist(&empty, &zero, &p), Err(Error::EmptyCloud)));
    }

    #[test]
    fn ball_samples_have_stratified_norms() {
        let g = Grid::reference();
        let p = Params::reference();
        let states = sample_ball(&g, &p, 7.0, 5, 3).unwrap();
        for (j, s) in states.iter().enumerate() {
            let target = 7.0 * (j + 1) as f64 / 5.0;
            assert!((e_norm(s, &p).unwrap() - target).abs() < 1e-12 * target);
        }
    }

    #[test]
    fn triangle_bound_on_random_clouds() {
        let g = Grid::reference();
        let p = Params::reference();
        let prov = vec![Provenance { seed: 0, pullback_time: 0.0, initial_id: 0 }; 3];
        for seed in 0..10 {
            let mk = |s| StateCloud::new(sample_ball(&g, &p, 4.0, 3, s).unwrap(), prov.clone()).unwrap();
            let (a, b, c) = (mk(seed), mk(seed + 100), mk(seed + 200));
            let ac = hausdorff_semidist(&a, &c, &p).unwrap();
            let ab = hausdorff_semidist(&a, &b, &p).unwrap();
            let bc = hausdorff_semidist(&b, &c, &p).unwrap();
            assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn single_sample_gives_one_state_per_time() {
        let m = model(0.1);
        let x = sample_ball(m.grid(), &m.params, 3.0, 1, 5).unwrap();
        let approx = approximate_attractor(&m, &ou(1, -3.0, 0.0), 1, &[1.0, 2.0, 3.0], &x).unwrap();
        assert_eq!(approx.cloud().len(), 3);
        assert_eq!(approx.gaps.len(), 2);
        assert_eq!(approx.deepest().provenance[0].pullback_time, 3.0);
    }

    #[test]
    fn deterministic_surrogate_is_seed_independent() {
        let m = model(0.0);
        let x = sample_ball(m.grid(), &m.params, 3.0, 2, 5).unwrap();
        let a = approximate_attractor(&m, &ou(1, -4.0, 0.0), 1, &[2.0, 4.0], &x).unwrap();
        let b = approximate_attractor(&m, &ou(2, -4.0, 0.0), 2, &[2.0, 4.0], &x).unwrap();
        assert_eq!(a.deepest().states, b.deepest().states);
    }

    #[test]
    fn short_schedules_flag_insufficient_data() {
        let m = model(0.0);
        let x = sample_ball(m.grid(), &m.params, 3.0, 1, 5).unwrap();
        let r = pullback_convergence_test(&m, &ou(1, -1.0, 0.0), &x, &[1.0]).unwrap();
        assert!(r.insufficient_data && r.differences[0].is_empty());
        assert!(!r.rate_within(1.1));
    }

    #[test]
    fn invariance_at_zero_time() {
        let m = model(0.1);
        let x = sample_ball(m.grid(), &m.params, 3.0, 2, 5).unwrap();
        let ou = ou(4, -3.0, 1.0);
        let approx = approximate_attractor(&m, &ou, 4, &[1.0, 3.0], &x).unwrap();
        let r = invariance_check(&m, &ou, &approx, &x, 0.0).unwrap();
        assert_eq!((r.pushed_to_shifted, r.shifted_to_pushed), (0.0, 0.0));
    }

    #[test]
    fn log_slope_recovers_exponent() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|t| 3.0 * (-0.4 * t).exp()).collect();
        assert!((log_slope(&x, &y).unwrap() + 0.4).abs() < 1e-12);
        assert!(log_slope(&[1.0], &[1.0]).is_none());
    }
}
