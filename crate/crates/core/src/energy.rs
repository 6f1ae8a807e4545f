//! Energy bookkeeping: the E-norm, the functional `Q`, its exact drift `G`,
//! the noise functional `Γ₁`, the Gronwall bound and the absorbing radius.
//!
//! All spatial integrals use the same midpoint quadrature as [`Field`], so
//! algebraic identities such as `f(u) u = p F(u)` carry over exactly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Model, State, Trajectory};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::noise::{estimate_r0_trajectory, NoiseProfile, OuTrajectory};
use crate::nonlin::Nonlinearity;
use crate::params::Params;

/// Relative tolerance of Gronwall-margin checks at the reference resolution.
pub const GRONWALL_TOLERANCE: f64 = 0.05;

fn coercivity_checked(params: &Params) -> Result<f64> {
    let a = params.coercivity();
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha + delta^2 - beta*delta = {a} must be positive for the E-norm"
        )));
    }
    Ok(a)
}

/// Quadratic part `||v||² + a||u||² + ||∇u||²` with `a = α + δ² - βδ`.
pub fn quadratic_energy(state: &State, params: &Params) -> f64 {
    state.v.norm_l2_sq() + params.coercivity() * state.u.norm_l2_sq() + state.u.grad_sq_norm()
}

/// `(||v||² + a||u||² + ||∇u||²)^{1/2} + ||u||_{L^p}`.
pub fn e_norm(state: &State, params: &Params) -> Result<f64> {
    coercivity_checked(params)?;
    Ok(quadratic_energy(state, params).sqrt() + state.u.norm_lp(params.p)?)
}

/// The unweighted phase-space norm `(||∇u||² + ||u||² + ||v||²)^{1/2} + ||u||_{L^p}`.
pub fn sobolev_norm(state: &State, p: f64) -> Result<f64> {
    let q = state.u.grad_sq_norm() + state.u.norm_l2_sq() + state.v.norm_l2_sq();
    Ok(q.sqrt() + state.u.norm_lp(p)?)
}

/// `||v||² + a||u||² + ||∇u||² + 2∫(F(u) + φ₃)`.
pub fn energy_q(state: &State, params: &Params, nl: &Nonlinearity) -> f64 {
    quadratic_energy(state, params) + 2.0 * (nl.potential(&state.u) + nl.phi3_l1())
}

/// Exact right-hand side `G` of `dQ/dt + 2σQ = G` for the semi-discrete
/// system. `z` is the unscaled noise field `Σ_j h_j z_j(θ_t ω)` and `g` the
/// deterministic forcing.
pub fn drift_g(state: &State, z: &Field, g: &Field, params: &Params, nl: &Nonlinearity) -> Result<f64> {
    let sigma = params.decay_rate_sigma()?;
    let Params { beta, delta, epsilon: eps, .. } = *params;
    let a = params.coercivity();
    let (u, v) = (&state.u, &state.v);
    let fu = nl.apply_f(u);
    let big_f = nl.potential(u) + nl.phi3_l1();
    let mut out = -2.0 * (beta - delta - sigma) * v.norm_l2_sq()
        - 2.0 * (delta - sigma) * a * u.norm_l2_sq()
        - 2.0 * (delta - sigma) * u.grad_sq_norm()
        + 4.0 * sigma * big_f
        - 2.0 * delta * fu.inner(u)?
        + 2.0 * g.inner(v)?;
    if eps != 0.0 {
        out += 2.0 * eps * a * z.inner(u)?
            + 2.0 * eps * z.grad_inner(u)?
            + 2.0 * eps * z.inner(&fu)?
            + (4.0 * delta * eps - 2.0 * beta * eps) * z.inner(v)?;
    }
    Ok(out)
}

/// `C₀`: the largest of the grouped noise coefficients
/// `ε²a/(2δ) + ε²(2δ+β)²/(2δ) + ε/2`, `ε²/(2δ)` and `εC₁/p`.
pub fn c0(params: &Params) -> f64 {
    let Params { beta, delta, epsilon: eps, p, c1, .. } = *params;
    let a = params.coercivity();
    let l2 = eps * eps * a / (2.0 * delta) + eps * eps * (2.0 * delta + beta).powi(2) / (2.0 * delta) + eps / 2.0;
    let grad = eps * eps / (2.0 * delta);
    let lp = eps * c1 / p;
    l2.max(grad).max(lp)
}

/// `Γ₁ = C₀ (||z||² + ||∇z||² + ||z||_{L^p}^p)` for the unscaled noise field.
pub fn gamma1(z: &Field, p: f64, c0: f64) -> Result<f64> {
    Ok(c0 * (z.norm_l2_sq() + z.grad_sq_norm() + z.lp_integral(p)?))
}

/// `C₅ = C₀ max_j max{m(||h_j||² + ||∇h_j||²), m^{p-1} ||h_j||_{L^p}^p}`, so
/// that `Γ₁ <= C₅ Σ_j (|z_j|² + |z_j|^p)`.
pub fn c5(params: &Params, profile: &NoiseProfile) -> f64 {
    let m = profile.modes() as f64;
    let p = params.p;
    let worst = (0..profile.modes())
        .map(|j| {
            let quad = m * (profile.l2_sq()[j] + profile.grad_sq()[j]);
            let pow = m.powf(p - 1.0) * profile.lp_pow()[j];
            quad.max(pow)
        })
        .fold(0.0, f64::max);
    c0(params) * worst
}

/// `C₄ = (ε/2)||φ₁||² - δ||φ₂||_{L¹} + (εC₁(p-1)/(C₃p))||φ₃||_{L¹}`.
pub fn c4(params: &Params, nl: &Nonlinearity) -> f64 {
    let Params { delta, epsilon: eps, p, c1, c3, .. } = *params;
    0.5 * eps * nl.phi1_l2_sq() - delta * nl.phi2_l1() + eps * c1 * (p - 1.0) / (c3 * p) * nl.phi3_l1()
}

/// `C₆ = 2(δC₂ - εC₁(p-1)/(C₃p))||φ₃||_{L¹} + 2C₄`.
pub fn c6(params: &Params, nl: &Nonlinearity) -> f64 {
    2.0 * params.potential_rate() * nl.phi3_l1() + 2.0 * c4(params, nl)
}

/// Time-independent inputs of the Gronwall bound and the absorbing radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyConstants {
    pub sigma: f64,
    pub coercivity: f64,
    pub c0: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub phi3_l1: f64,
    pub g_norm_sq: f64,
    pub beta_minus_delta: f64,
    pub c3: f64,
    pub p: f64,
}

impl EnergyConstants {
    /// Requires admissible parameters.
    pub fn new(model: &Model) -> Result<Self> {
        let params = &model.params;
        let nl = &model.nl;
        let sigma = params.decay_rate_sigma()?;
        Ok(EnergyConstants {
            sigma,
            coercivity: params.coercivity(),
            c0: c0(params),
            c4: c4(params, nl),
            c5: c5(params, &model.forcing.profile),
            c6: c6(params, nl),
            phi3_l1: nl.phi3_l1(),
            g_norm_sq: model.forcing.g.norm_l2_sq(),
            beta_minus_delta: params.beta - params.delta,
            c3: params.c3,
            p: params.p,
        })
    }

    /// `(1/σ)(C₆ + ||g||²/(β-δ))`.
    pub fn additive_term(&self) -> f64 {
        (self.c6 + self.g_norm_sq / self.beta_minus_delta) / self.sigma
    }

    pub fn absorbing_radius(&self, r0: f64) -> Result<f64> {
        absorbing_radius(
            self.sigma,
            self.coercivity,
            self.c3,
            self.p,
            r0,
            self.c5,
            self.c6,
            self.g_norm_sq / self.beta_minus_delta,
        )
    }
}

/// Trapezoid rule for `∫ e^{σ(s - t)} Γ₁(s) ds` over the samples `(s, Γ₁(s))`.
pub fn weighted_gamma_integral(series: &[(f64, f64)], sigma: f64, t: f64) -> f64 {
    series
        .windows(2)
        .map(|w| {
            let ((s0, g0), (s1, g1)) = (w[0], w[1]);
            0.5 * (s1 - s0) * ((sigma * (s0 - t)).exp() * g0 + (sigma * (s1 - t)).exp() * g1)
        })
        .sum()
}

/// `e^{-σ(t-τ)}(Q(τ) + 2||φ₃||) + 2∫_τ^t e^{σ(s-t)} Γ₁ ds + (1/σ)(C₆ + ||g||²/(β-δ))`.
/// `gamma1_series` holds `(s, Γ₁(θ_s ω))` samples covering `[τ, t]`.
pub fn gronwall_bound(
    q_tau: f64,
    tau: f64,
    t: f64,
    gamma1_series: &[(f64, f64)],
    constants: &EnergyConstants,
) -> Result<f64> {
    if !(tau <= t) {
        return Err(Error::InvalidArgument(format!("gronwall interval [{tau}, {t}] is reversed")));
    }
    let sigma = constants.sigma;
    let window: Vec<(f64, f64)> = gamma1_series
        .iter()
        .copied()
        .filter(|&(s, _)| s >= tau - 1e-12 && s <= t + 1e-12)
        .collect();
    if t > tau {
        let covered = window.first().zip(window.last()).is_some_and(|(a, b)| {
            (a.0 - tau).abs() <= 1e-9 && (b.0 - t).abs() <= 1e-9
        });
        if !covered && window.iter().any(|&(_, g)| g != 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Γ₁ samples do not cover [{tau}, {t}]"
            )));
        }
    }
    Ok((-sigma * (t - tau)).exp() * (q_tau + 2.0 * constants.phi3_l1)
        + 2.0 * weighted_gamma_integral(&window, sigma, t)
        + constants.additive_term())
}

/// `R(ω) = (B / min{1, a})^{1/2} + (B / (2C₃))^{1/p}` with
/// `B = 1 + (1/σ)(4C₅r₀ + C₆ + ||g||²/(β-δ))`. `g_term` is `||g||²/(β-δ)`.
#[allow(clippy::too_many_arguments)]
pub fn absorbing_radius(
    sigma: f64,
    coercivity: f64,
    c3: f64,
    p: f64,
    r0: f64,
    c5: f64,
    c6: f64,
    g_term: f64,
) -> Result<f64> {
    if !(r0 >= 0.0) || !(sigma > 0.0) || !(coercivity > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "absorbing radius needs r0 >= 0, sigma > 0, coercivity > 0 (got {r0}, {sigma}, {coercivity})"
        )));
    }
    let b = 1.0 + (4.0 * c5 * r0 + c6 + g_term) / sigma;
    Ok((b / coercivity.min(1.0)).sqrt() + (b / (2.0 * c3)).powf(1.0 / p))
}

/// Unscaled noise field at half-step index `k`.
pub fn noise_field(profile: &NoiseProfile, ou: &OuTrajectory, k: usize) -> Result<Field> {
    profile.z_field(&ou.coords_at(k))
}

/// `(s, Γ₁(θ_s ω))` on every OU grid time in `[tau, t]`.
pub fn gamma1_series(model: &Model, ou: &OuTrajectory, tau: f64, t: f64) -> Result<Vec<(f64, f64)>> {
    let c0 = c0(&model.params);
    let (k0, k1) = (ou.index_of(tau)?, ou.index_of(t)?);
    (k0..=k1)
        .map(|k| {
            let g = if c0 == 0.0 {
                0.0
            } else {
                gamma1(&noise_field(&model.forcing.profile, ou, k)?, model.params.p, c0)?
            };
            Ok((ou.time(k), g))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub t: f64,
    pub e_norm: f64,
    pub q: f64,
    pub bound: f64,
    /// `bound - Q`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub rows: Vec<EnergyRow>,
    pub constants: EnergyConstants,
    pub r0: f64,
    pub radius: f64,
    pub tolerance: f64,
    pub min_relative_margin: f64,
    /// Snapshots with `margin < -tolerance * bound`.
    pub violations: usize,
    /// `Γ₁(θ_t ω) <= C₅ e^{σ|t|/2} r₀` at every sampled time.
    pub c5_bound_holds: bool,
}

impl EnergyReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.c5_bound_holds
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,e_norm,q,bound,margin")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.t, r.e_norm, r.q, r.bound, r.margin)?;
        }
        Ok(())
    }
}

/// Evaluates `Q` and the Gronwall bound at every snapshot of `traj`, which
/// must have been produced by [`crate::dynamics::evolve`] with `model` on `ou`.
pub fn check_energy_inequality(
    traj: &Trajectory,
    ou: &OuTrajectory,
    model: &Model,
    tolerance: f64,
) -> Result<EnergyReport> {
    let first = traj.states.first().ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    first.u.check_same_grid(&model.forcing.g)?;
    let constants = EnergyConstants::new(model)?;
    let (tau, t_end) = (traj.times[0], *traj.times.last().expect("nonempty"));
    let series = gamma1_series(model, ou, tau, t_end)?;
    let r0 = estimate_r0_trajectory(ou, constants.sigma, model.params.p);
    let c5_bound_holds = c5_bound_holds(model, ou, &constants, r0)?;
    let radius = constants.absorbing_radius(r0)?;
    let q_tau = energy_q(first, &model.params, &model.nl);

    // cumulative ∫_τ^s e^{σ(s'-τ)} Γ₁ ds', rescaled per snapshot
    let sigma = constants.sigma;
    let mut cumulative = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    cumulative.push(acc);
    for w in series.windows(2) {
        let ((s0, g0), (s1, g1)) = (w[0], w[1]);
        acc += 0.5 * (s1 - s0) * ((sigma * (s0 - tau)).exp() * g0 + (sigma * (s1 - tau)).exp() * g1);
        cumulative.push(acc);
    }

    let mut rows = Vec::with_capacity(traj.len());
    let mut violations = 0;
    let mut min_rel = f64::INFINITY;
    for (&t, state) in traj.times.iter().zip(&traj.states) {
        let k = ou.index_of(t)? - ou.index_of(tau)?;
        let decay = (-sigma * (t - tau)).exp();
        let bound = decay * (q_tau + 2.0 * constants.phi3_l1) + 2.0 * decay * cumulative[k] + constants.additive_term();
        let q = energy_q(state, &model.params, &model.nl);
        let margin = bound - q;
        if bound > 0.0 {
            min_rel = min_rel.min(margin / bound);
        } else if margin < 0.0 {
            min_rel = f64::NEG_INFINITY;
        }
        if margin < -tolerance * bound {
            violations += 1;
        }
        rows.push(EnergyRow { t, e_norm: e_norm(state, &model.params)?, q, bound, margin });
    }
    Ok(EnergyReport {
        rows,
        constants,
        r0,
        radius,
        tolerance,
        min_relative_margin: min_rel,
        violations,
        c5_bound_holds,
    })
}

/// Checks `Γ₁(θ_t ω) <= C₅ e^{σ|t|/2} r₀` on every sample of `ou`.
pub fn c5_bound_holds(model: &Model, ou: &OuTrajectory, constants: &EnergyConstants, r0: f64) -> Result<bool> {
    for k in 0..ou.len() {
        let z = noise_field(&model.forcing.profile, ou, k)?;
        let g = gamma1(&z, model.params.p, constants.c0)?;
        let cap = constants.c5 * (0.5 * constants.sigma * ou.time(k).abs()).exp() * r0;
        if g > cap * (1.0 + 1e-12) + 1e-300 {
            return Ok(false);
        }
    }
    Ok(true)
}
