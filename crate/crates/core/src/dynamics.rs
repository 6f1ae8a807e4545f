//! The transformed pathwise system
//!
//! ```text
//! u_t = v + ε z - δ u
//! v_t = δ v - (δ² + α) u + Δ_h u - f(u) + g - β (v + ε z - δ u) + 2 ε δ z
//! ```
//!
//! integrated with classical RK4. The OU field `z(θ_t ω)` is read from an
//! [`OuTrajectory`] sampled on a half-step grid, so every RK stage uses an
//! exact OU sample and stepping is a pure function of the noise path. All
//! times handed to the integrator must sit on that grid; the stepper works in
//! integer half-step indices internally, which makes the semiflow and
//! cocycle identities hold bit for bit on aligned grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::noise::{aligned_steps, NoiseProfile, OuTrajectory};
use crate::nonlin::Nonlinearity;
use crate::params::Params;

/// Default and maximal Courant number `dt / h` (unit wave speed).
pub const MAX_CFL: f64 = 0.5;

/// Phase-space point `(u, v)` with `v = u_t + δ u - ε z(θ_t ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Field,
    pub v: Field,
}

impl State {
    pub fn new(u: Field, v: Field) -> Result<Self> {
        u.check_same_grid(&v)?;
        Ok(State { u, v })
    }

    pub fn zeros(grid: &Grid) -> Self {
        State { u: grid.zeros(), v: grid.zeros() }
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    /// Componentwise difference `self - other`.
    pub fn diff(&self, other: &State) -> Result<State> {
        Ok(State {
            u: self.u.zip_map(&other.u, |a, b| a - b)?,
            v: self.v.zip_map(&other.v, |a, b| a - b)?,
        })
    }

    pub fn scale(&self, c: f64) -> State {
        State { u: self.u.scale(c), v: self.v.scale(c) }
    }

    fn axpy(&mut self, c: f64, other: &State) {
        self.u.axpy(c, &other.u).expect("stage grids agree");
        self.v.axpy(c, &other.v).expect("stage grids agree");
    }

    /// Largest componentwise absolute difference relative to the largest
    /// entry of `self`.
    pub fn max_rel_diff(&self, other: &State) -> f64 {
        let scale = self.u.max_abs().max(self.v.max_abs()).max(f64::MIN_POSITIVE);
        let du = self.u.values().iter().zip(other.u.values()).map(|(a, b)| (a - b).abs());
        let dv = self.v.values().iter().zip(other.v.values()).map(|(a, b)| (a - b).abs());
        du.chain(dv).fold(0.0, f64::max) / scale
    }
}

/// Deterministic forcing `g` and the noise modes `h_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    pub g: Field,
    pub profile: NoiseProfile,
}

impl Forcing {
    pub fn new(g: Field, profile: NoiseProfile) -> Result<Self> {
        g.check_same_grid(&profile.fields()[0])?;
        if !g.is_finite() {
            return Err(Error::InvalidArgument("forcing g has non-finite entries".into()));
        }
        Ok(Forcing { g, profile })
    }
}

/// Everything that defines the right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: Params,
    pub nl: Nonlinearity,
    pub forcing: Forcing,
}

impl Model {
    /// Checks mode counts and exponent consistency. Admissibility of the
    /// parameters is not required here: the linear switch and convergence
    /// studies deliberately leave the admissible region.
    pub fn new(params: Params, nl: Nonlinearity, forcing: Forcing) -> Result<Self> {
        if forcing.profile.modes() != params.m {
            return Err(Error::InvalidArgument(format!(
                "noise profile has {} modes, parameters declare m = {}",
                forcing.profile.modes(),
                params.m
            )));
        }
        if nl.p != params.p || forcing.profile.p() != params.p {
            return Err(Error::InvalidArgument(format!(
                "exponent mismatch: params p = {}, nonlinearity p = {}, profile p = {}",
                params.p,
                nl.p,
                forcing.profile.p()
            )));
        }
        Ok(Model { params, nl, forcing })
    }

    pub fn grid(&self) -> &Grid {
        self.forcing.g.grid()
    }

    /// `ε Σ_j h_j z_j` at half-step index `k`.
    fn eps_z(&self, ou: &OuTrajectory, k: usize) -> Field {
        let eps = self.params.epsilon;
        if eps == 0.0 {
            return self.grid().zeros();
        }
        let z = ou.coords_at(k);
        self.forcing.profile.z_field(&z).expect("profile matches mode count").scale(eps)
    }
}

/// Initial state at time τ from physical data `(u0, u1 = u_t(τ))`:
/// `(u0, u1 + δ u0 - ε z(θ_τ ω))`. `eps_z_tau` is the field `ε z(θ_τ ω)`.
pub fn transform_initial(u0: &Field, u1: &Field, params: &Params, eps_z_tau: &Field) -> Result<State> {
    u0.check_same_grid(u1)?;
    u0.check_same_grid(eps_z_tau)?;
    let delta = params.delta;
    let mut v = u1.clone();
    v.axpy(delta, u0)?;
    v.axpy(-1.0, eps_z_tau)?;
    Ok(State { u: u0.clone(), v })
}

/// `(u, u_t)` with `u_t = v + ε z - δ u`.
pub fn recover_physical(state: &State, params: &Params, eps_z: &Field) -> Result<(Field, Field)> {
    let mut ut = state.v.clone();
    ut.axpy(1.0, eps_z)?;
    ut.axpy(-params.delta, &state.u)?;
    Ok((state.u.clone(), ut))
}

/// Time derivative of the transformed system; `eps_z` is `ε z(θ_t ω)`.
pub fn rhs(state: &State, eps_z: &Field, model: &Model) -> Result<State> {
    state.u.check_same_grid(&state.v)?;
    state.u.check_same_grid(eps_z)?;
    state.u.check_same_grid(&model.forcing.g)?;
    Ok(rhs_unchecked(state, eps_z, model))
}

fn rhs_unchecked(state: &State, eps_z: &Field, model: &Model) -> State {
    let Params { alpha, beta, delta, .. } = model.params;
    let lap = state.u.laplacian();
    let (u, v, ez, g) = (
        state.u.values(),
        state.v.values(),
        eps_z.values(),
        model.forcing.g.values(),
    );
    let lap = lap.values();
    let n = u.len();
    let mut du = Vec::with_capacity(n);
    let mut dv = Vec::with_capacity(n);
    let restoring = delta * delta + alpha;
    for i in 0..n {
        let ut = v[i] + ez[i] - delta * u[i];
        du.push(ut);
        dv.push(
            delta * v[i] - restoring * u[i] + lap[i] - model.nl.f(u[i]) + g[i] - beta * ut
                + 2.0 * delta * ez[i],
        );
    }
    let grid = *state.grid();
    State {
        u: Field::from_values(grid, du).unwrap_or_else(|_| nonfinite_field(grid)),
        v: Field::from_values(grid, dv).unwrap_or_else(|_| nonfinite_field(grid)),
    }
}

// Carries a blow-up through to the divergence check after the step.
fn nonfinite_field(grid: Grid) -> Field {
    let mut f = grid.zeros();
    f.values_mut()[0] = f64::NAN;
    f
}

/// Rejects steps above `MAX_CFL * h`.
pub fn check_cfl(dt: f64, grid: &Grid) -> Result<()> {
    let h = grid.spacing();
    let max_dt = MAX_CFL * h;
    if !(dt > 0.0) || dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, max_dt, c_cfl: MAX_CFL, h });
    }
    Ok(())
}

/// Time step of the integrator driven by `ou`: twice the OU spacing.
pub fn step_size(ou: &OuTrajectory) -> f64 {
    2.0 * ou.dt()
}

fn check_step(dt: f64, ou: &OuTrajectory) -> Result<()> {
    let expected = step_size(ou);
    if (dt - expected).abs() > 1e-12 * expected {
        return Err(Error::InvalidArgument(format!(
            "step {dt} must be twice the OU spacing {}",
            ou.dt()
        )));
    }
    Ok(())
}

fn rk4_at(state: &State, k: usize, dt: f64, ou: &OuTrajectory, model: &Model) -> State {
    let z0 = model.eps_z(ou, k);
    let zh = model.eps_z(ou, k + 1);
    let z1 = model.eps_z(ou, k + 2);
    let k1 = rhs_unchecked(state, &z0, model);
    let mut s = state.clone();
    s.axpy(0.5 * dt, &k1);
    let k2 = rhs_unchecked(&s, &zh, model);
    let mut s = state.clone();
    s.axpy(0.5 * dt, &k2);
    let k3 = rhs_unchecked(&s, &zh, model);
    let mut s = state.clone();
    s.axpy(dt, &k3);
    let k4 = rhs_unchecked(&s, &z1, model);
    let mut out = state.clone();
    out.axpy(dt / 6.0, &k1);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4);
    out
}

/// One RK4 step from `t` to `t + dt`, with `z` sampled at `t`, `t + dt/2`
/// and `t + dt`. `dt` must equal twice the OU spacing and respect the CFL
/// bound `dt <= 0.5 h`.
pub fn step(state: &State, t: f64, dt: f64, ou: &OuTrajectory, model: &Model) -> Result<State> {
    check_cfl(dt, model.grid())?;
    check_step(dt, ou)?;
    state.u.check_same_grid(&model.forcing.g)?;
    let k = ou.index_of(t)?;
    if k + 2 >= ou.len() {
        return Err(Error::Coverage { t_min: ou.t_min(), t_max: ou.t_max(), from: t, to: t + dt });
    }
    let out = rk4_at(state, k, dt, ou, model);
    if !out.is_finite() {
        return Err(Error::Diverged { t: t + dt });
    }
    Ok(out)
}

/// Snapshots `(t, state)` of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory always holds its initial state")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn step_range(tau: f64, t: f64, ou: &OuTrajectory, model: &Model) -> Result<(usize, usize)> {
    if !(tau <= t) {
        return Err(Error::InvalidArgument(format!("evolution interval [{tau}, {t}] is reversed")));
    }
    let dt = step_size(ou);
    check_cfl(dt, model.grid())?;
    let coverage = || Error::Coverage { t_min: ou.t_min(), t_max: ou.t_max(), from: tau, to: t };
    if tau < ou.t_min() - 1e-9 * dt || t > ou.t_max() + 1e-9 * dt {
        return Err(coverage());
    }
    let k0 = ou.index_of(tau).map_err(|e| match e {
        Error::Coverage { .. } => coverage(),
        other => other,
    })?;
    let steps = aligned_steps(t - tau, dt)?;
    if k0 + 2 * steps as usize >= ou.len() {
        return Err(coverage());
    }
    Ok((k0, steps as usize))
}

/// `S(t, τ; ω) x`, recording every `record_every` steps plus both endpoints.
pub fn evolve(
    state: &State,
    tau: f64,
    t: f64,
    ou: &OuTrajectory,
    model: &Model,
    record_every: usize,
) -> Result<Trajectory> {
    state.u.check_same_grid(&model.forcing.g)?;
    let (k0, steps) = step_range(tau, t, ou, model)?;
    let dt = step_size(ou);
    let every = record_every.max(1);
    let mut times = vec![ou.time(k0)];
    let mut states = vec![state.clone()];
    let mut cur = state.clone();
    for s in 0..steps {
        let k = k0 + 2 * s;
        cur = rk4_at(&cur, k, dt, ou, model);
        if !cur.is_finite() {
            return Err(Error::Diverged { t: ou.time(k + 2) });
        }
        if (s + 1) % every == 0 || s + 1 == steps {
            times.push(ou.time(k + 2));
            states.push(cur.clone());
        }
    }
    Ok(Trajectory { times, states })
}

/// Final state of [`evolve`] without storing intermediate snapshots.
pub fn evolve_to(state: &State, tau: f64, t: f64, ou: &OuTrajectory, model: &Model) -> Result<State> {
    state.u.check_same_grid(&model.forcing.g)?;
    let (k0, steps) = step_range(tau, t, ou, model)?;
    let dt = step_size(ou);
    let mut cur = state.clone();
    for s in 0..steps {
        let k = k0 + 2 * s;
        cur = rk4_at(&cur, k, dt, ou, model);
        if !cur.is_finite() {
            return Err(Error::Diverged { t: ou.time(k + 2) });
        }
    }
    Ok(cur)
}

/// Pullback quasi-trajectory `Φ(t, θ_{-t} ω, g0)`: the state at time 0 of
/// the solution started from `g0` at time `-t_back`.
pub fn pullback(t_back: f64, ou: &OuTrajectory, g0: &State, model: &Model) -> Result<State> {
    if !(t_back >= 0.0) {
        return Err(Error::InvalidArgument(format!("pullback time {t_back} < 0")));
    }
    evolve_to(g0, -t_back, 0.0, ou, model)
}

/// `ε z(θ_t ω)` at a grid time of `ou`.
pub fn eps_z_at(model: &Model, ou: &OuTrajectory, t: f64) -> Result<Field> {
    Ok(model.eps_z(ou, ou.index_of(t)?))
}

/// Spatial and temporal resolution of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
}

impl TimeGrid {
    /// `dt = c_cfl * h`, rounded down so that `1/dt` is an integer power of two
    /// multiple; keeps every integer time on the grid.
    pub fn for_grid(grid: &Grid, c_cfl: f64) -> Result<Self> {
        if !(c_cfl > 0.0 && c_cfl <= MAX_CFL) {
            return Err(Error::InvalidArgument(format!("Courant number {c_cfl} not in (0, {MAX_CFL}]")));
        }
        let target = c_cfl * grid.spacing();
        let dt = 2f64.powi(target.log2().floor() as i32);
        Ok(TimeGrid { dt })
    }

    /// OU spacing to pair with this step.
    pub fn noise_dt(&self) -> f64 {
        0.5 * self.dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoisePath, Shape};

    fn model(eps: f64, nl: Nonlinearity, g: Shape) -> Model {
        let grid = Grid::reference();
        let params = Params::reference().with_epsilon(eps);
        let profile = NoiseProfile::reference(&grid, params.p);
        Model::new(params, nl, Forcing::new(g.sample(&grid), profile).unwrap()).unwrap()
    }

    fn quartic() -> Nonlinearity {
        Nonlinearity::canonical(4.0).unwrap()
    }

    fn ou(seed: u64, t_min: f64, t_max: f64) -> OuTrajectory {
        let dt = TimeGrid::for_grid(&Grid::reference(), MAX_CFL).unwrap().noise_dt();
        let path = NoisePath::sample(seed, t_min, t_max, dt, 1).unwrap();
        OuTrajectory::from_path(&path, 0.25).unwrap()
    }

    fn smooth_state(grid: &Grid) -> State {
        State {
            u: grid.sample(|[x, _]| 0.8 * (-(x - 0.5) * (x - 0.5)).exp()),
            v: grid.sample(|[x, _]| -0.3 * x * (-x * x / 2.0).exp()),
        }
    }

    #[test]
    fn time_grid_reference() {
        let tg = TimeGrid::for_grid(&Grid::reference(), MAX_CFL).unwrap();
        assert_eq!(tg.dt, 1.0 / 32.0);
        assert!(TimeGrid::for_grid(&Grid::reference(), 0.6).is_err());
    }

    #[test]
    fn transform_examples() {
        let g = Grid::reference();
        let p = Params::reference();
        let s = transform_initial(&g.zeros(), &g.zeros(), &p, &g.zeros()).unwrap();
        assert_eq!(s, State::zeros(&g));
        let s = transform_initial(&g.constant(4.0), &g.constant(1.0), &p, &g.constant(0.5)).unwrap();
        assert!(s.v.values().iter().all(|&v| v == 1.5));
        let (u0, u1) = (g.sample(|[x, _]| x.sin()), g.sample(|[x, _]| x.cos()));
        let s = transform_initial(&u0, &u1, &p.with_epsilon(0.0), &g.zeros()).unwrap();
        assert_eq!(s.v, &u1 + &u0.scale(0.25));
    }

    #[test]
    fn round_trip_recovers_physical_data() {
        let g = Grid::reference();
        let p = Params::reference();
        let u0 = g.sample(|[x, _]| (-x * x).exp());
        let u1 = g.sample(|[x, _]| 0.25 * x.sin());
        let ez = g.sample(|[x, _]| 0.1 * (-(x * x) / 3.0).exp());
        let s = transform_initial(&u0, &u1, &p, &ez).unwrap();
        let (u, ut) = recover_physical(&s, &p, &ez).unwrap();
        assert_eq!(u, u0);
        for (a, b) in ut.values().iter().zip(u1.values()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn recover_special_cases() {
        let g = Grid::reference();
        let p = Params::reference().with_epsilon(0.0);
        let u = g.sample(|[x, _]| x.cos());
        let s = State { u: u.clone(), v: u.scale(p.delta) };
        let (_, ut) = recover_physical(&s, &p, &g.zeros()).unwrap();
        assert!(ut.max_abs() < 1e-15);
        let p0 = Params { delta: 0.0, ..p };
        let (_, ut) = recover_physical(&s, &p0, &g.zeros()).unwrap();
        assert_eq!(ut, s.v);
    }

    #[test]
    fn rhs_zero_equilibrium() {
        let m = model(0.0, quartic(), Shape::Zero);
        let g = m.grid();
        let d = rhs(&State::zeros(g), &g.zeros(), &m).unwrap();
        assert_eq!(d, State::zeros(g));
    }

    #[test]
    fn rhs_linear_constant_v() {
        let m = model(0.0, Nonlinearity::linear(4.0), Shape::Zero);
        let g = m.grid();
        let c = 0.7;
        let s = State { u: g.zeros(), v: g.constant(c) };
        let d = rhs(&s, &g.zeros(), &m).unwrap();
        assert!(d.u.values().iter().all(|&x| x == c));
        let expect = (m.params.delta - m.params.beta) * c;
        assert!(d.v.values().iter().all(|&x| (x - expect).abs() < 1e-15));
    }

    #[test]
    fn rhs_recomposes_second_order_equation() {
        // u_tt + β u_t - Δu + α u + f(u) - g = ε (z_t + δ z) for any z_t
        let m = model(0.1, quartic(), Shape::Gaussian { amplitude: 0.3, width: 2.0, center: 0.0 });
        let g = m.grid();
        let Params { alpha, beta, delta, epsilon, .. } = m.params;
        let s = smooth_state(g);
        let z = g.sample(|[x, _]| (-x * x).exp() * 0.7);
        let zt = g.sample(|[x, _]| (x / 3.0).sin());
        let d = rhs(&s, &z.scale(epsilon), &m).unwrap();
        let ut = &d.u;
        let mut utt = d.v.clone();
        utt.axpy(epsilon, &zt).unwrap();
        utt.axpy(-delta, ut).unwrap();
        let lap = s.u.laplacian();
        for i in 0..g.len() {
            let u = s.u.values()[i];
            let lhs = utt.values()[i] + beta * ut.values()[i] - lap.values()[i] + alpha * u + m.nl.f(u)
                - m.forcing.g.values()[i];
            let rhs = epsilon * (zt.values()[i] + delta * z.values()[i]);
            assert!((lhs - rhs).abs() < 1e-11, "cell {i}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn step_rejects_cfl_violation() {
        let m = model(0.0, quartic(), Shape::Zero);
        let path = NoisePath::zero(-1.0, 1.0, 1.0 / 16.0, 1).unwrap();
        let ou = OuTrajectory::from_path(&path, 0.25).unwrap();
        let err = step(&State::zeros(m.grid()), 0.0, 0.125, &ou, &m).unwrap_err();
        assert!(matches!(err, Error::Cfl { .. }));
    }

    #[test]
    fn zero_state_is_fixed_point() {
        let m = model(0.0, quartic(), Shape::Zero);
        let ou = ou(1, -1.0, 1.0);
        let s = step(&State::zeros(m.grid()), 0.0, 1.0 / 32.0, &ou, &m).unwrap();
        assert_eq!(s, State::zeros(m.grid()));
    }

    #[test]
    fn noisy_runs_are_deterministic() {
        let m = model(0.1, quartic(), Shape::Zero);
        let a = evolve_to(&smooth_state(m.grid()), -2.0, 0.0, &ou(17, -2.0, 0.0), &m).unwrap();
        let b = evolve_to(&smooth_state(m.grid()), -2.0, 0.0, &ou(17, -2.0, 0.0), &m).unwrap();
        assert_eq!(a, b);
        let c = evolve_to(&smooth_state(m.grid()), -2.0, 0.0, &ou(18, -2.0, 0.0), &m).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn identity_and_concatenation() {
        let m = model(0.1, quartic(), Shape::Zero);
        let ou = ou(5, -1.0, 2.0);
        let x = smooth_state(m.grid());
        assert_eq!(evolve_to(&x, 0.5, 0.5, &ou, &m).unwrap(), x);
        let whole = evolve_to(&x, 0.0, 2.0, &ou, &m).unwrap();
        let mid = evolve_to(&x, 0.0, 1.0, &ou, &m).unwrap();
        let split = evolve_to(&mid, 1.0, 2.0, &ou, &m).unwrap();
        assert!(whole.max_rel_diff(&split) <= 1e-12);
    }

    #[test]
    fn noiseless_is_seed_independent() {
        let m = model(0.0, quartic(), Shape::Zero);
        let x = smooth_state(m.grid());
        let a = pullback(1.0, &ou(1, -1.0, 0.0), &x, &m).unwrap();
        let b = pullback(1.0, &ou(2, -1.0, 0.0), &x, &m).unwrap();
        assert_eq!(a, b);
        // and equals the forward flow over the same duration
        let c = evolve_to(&x, 0.0, 1.0, &ou(3, 0.0, 1.0), &m).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn pullback_zero_time_is_identity() {
        let m = model(0.1, quartic(), Shape::Zero);
        let x = smooth_state(m.grid());
        assert_eq!(pullback(0.0, &ou(1, -1.0, 0.0), &x, &m).unwrap(), x);
        assert!(pullback(-1.0, &ou(1, -1.0, 0.0), &x, &m).is_err());
    }

    #[test]
    fn coverage_is_checked() {
        let m = model(0.1, quartic(), Shape::Zero);
        let x = smooth_state(m.grid());
        let err = pullback(3.0, &ou(1, -1.0, 0.0), &x, &m).unwrap_err();
        assert!(matches!(err, Error::Coverage { .. }));
        let err = evolve_to(&x, 0.0, 0.5, &ou(1, -1.0, 0.0), &m).unwrap_err();
        assert!(matches!(err, Error::Coverage { .. }));
    }

    #[test]
    fn evolve_records_snapshots() {
        let m = model(0.0, quartic(), Shape::Zero);
        let traj = evolve(&smooth_state(m.grid()), 0.0, 1.0, &ou(1, 0.0, 1.0), &m, 8).unwrap();
        assert_eq!(traj.times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let direct = evolve_to(&smooth_state(m.grid()), 0.0, 1.0, &ou(1, 0.0, 1.0), &m).unwrap();
        assert_eq!(traj.last(), &direct);
    }

    #[test]
    fn linear_energy_nonincreasing() {
        // classical energy of u_tt + β u_t - Δu + α u = 0
        let m = model(0.0, Nonlinearity::linear(4.0), Shape::Zero);
        let g = *m.grid();
        let p = m.params;
        let ou = ou(1, 0.0, 10.0);
        let x = smooth_state(&g);
        let traj = evolve(&x, 0.0, 10.0, &ou, &m, 4).unwrap();
        let mut last = f64::INFINITY;
        for s in &traj.states {
            let (u, ut) = recover_physical(s, &p, &g.zeros()).unwrap();
            let e = 0.5 * (ut.norm_l2_sq() + u.grad_sq_norm() + p.alpha * u.norm_l2_sq());
            assert!(e <= last * (1.0 + 1e-10), "{e} > {last}");
            last = e;
        }
    }
}
