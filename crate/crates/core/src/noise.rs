//! Two-sided Wiener paths, exact Ornstein-Uhlenbeck sampling and the noise
//! profile `z(θ_t ω) = Σ_j h_j z_j(θ_t ω_j)`.
//!
//! Every random draw is a pure function of the seed. Each mode owns three
//! ChaCha streams: forward increments on `[0, t_max]`, backward increments on
//! `[t_min, 0]` generated outward from the origin, and the stationary draw
//! that starts the OU recursion at `t_min`. Extending a horizon therefore
//! never changes increments that were already sampled.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

const STREAM_FORWARD: u64 = 0;
const STREAM_BACKWARD: u64 = 1;
const STREAM_STATIONARY: u64 = 2;

fn mode_rng(seed: u64, mode: usize, kind: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((mode as u64) << 2) | kind);
    rng
}

/// SplitMix64 finaliser applied to `master + index * golden`: the seed of
/// ensemble member `index`. Independent of thread scheduling.
pub fn member_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Checks that `t / spacing` is an integer up to rounding and returns it.
pub(crate) fn aligned_steps(t: f64, spacing: f64) -> Result<i64> {
    let k = t / spacing;
    let r = k.round();
    if (k - r).abs() > 1e-6 {
        return Err(Error::Misaligned { t, spacing });
    }
    Ok(r as i64)
}

/// Sampled two-sided Wiener path with `W_j(0) = 0` on the grid `t_min + k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    seed: u64,
    t_min: f64,
    t_max: f64,
    dt: f64,
    /// Steps on the negative half-line; `t = 0` is grid index `neg_steps`.
    neg_steps: usize,
    /// `increments[j][k] = W_j(t_{k+1}) - W_j(t_k)`.
    increments: Vec<Vec<f64>>,
}

impl NoisePath {
    pub fn sample(seed: u64, t_min: f64, t_max: f64, dt: f64, m: usize) -> Result<Self> {
        let (neg_steps, pos_steps) = Self::check_shape(t_min, t_max, dt, m)?;
        let sd = dt.sqrt();
        let increments = (0..m)
            .map(|j| {
                let mut inc = vec![0.0; neg_steps + pos_steps];
                let mut back = mode_rng(seed, j, STREAM_BACKWARD);
                // outward from the origin: W(-dt) - W(0) first
                for k in (0..neg_steps).rev() {
                    let x: f64 = StandardNormal.sample(&mut back);
                    inc[k] = sd * x;
                }
                let mut fwd = mode_rng(seed, j, STREAM_FORWARD);
                for slot in &mut inc[neg_steps..neg_steps + pos_steps] {
                    let x: f64 = StandardNormal.sample(&mut fwd);
                    *slot = sd * x;
                }
                inc
            })
            .collect();
        Ok(NoisePath { seed, t_min, t_max, dt, neg_steps, increments })
    }

    /// A path whose increments are all zero (deterministic tests).
    pub fn zero(t_min: f64, t_max: f64, dt: f64, m: usize) -> Result<Self> {
        let (neg_steps, pos_steps) = Self::check_shape(t_min, t_max, dt, m)?;
        Ok(NoisePath {
            seed: 0,
            t_min,
            t_max,
            dt,
            neg_steps,
            increments: vec![vec![0.0; neg_steps + pos_steps]; m],
        })
    }

    fn check_shape(t_min: f64, t_max: f64, dt: f64, m: usize) -> Result<(usize, usize)> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("path spacing {dt} must be positive")));
        }
        if !(t_min <= 0.0 && 0.0 <= t_max) || !t_min.is_finite() || !t_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "path interval [{t_min}, {t_max}] must contain 0"
            )));
        }
        if m == 0 {
            return Err(Error::InvalidArgument("at least one noise mode required".into()));
        }
        let neg = aligned_steps(-t_min, dt)? as usize;
        let pos = aligned_steps(t_max, dt)? as usize;
        Ok((neg, pos))
    }

    /// The shifted path `θ_s ω`: `W'(t) = W(t + s) - W(s)` on
    /// `[t_min - s, t_max - s]`. Increments are shared, so the two paths
    /// drive identical dynamics on corresponding grid indices.
    pub fn shift(&self, s: f64) -> Result<Self> {
        let k = aligned_steps(s, self.dt)?;
        let origin = self.neg_steps as i64 + k;
        if origin < 0 || origin as usize > self.steps() {
            return Err(Error::Coverage { t_min: self.t_min, t_max: self.t_max, from: s, to: s });
        }
        Ok(NoisePath {
            seed: self.seed,
            t_min: self.t_min - s,
            t_max: self.t_max - s,
            dt: self.dt,
            neg_steps: origin as usize,
            increments: self.increments.clone(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn modes(&self) -> usize {
        self.increments.len()
    }

    pub fn steps(&self) -> usize {
        self.increments.first().map_or(0, |v| v.len())
    }

    pub fn increments(&self, mode: usize) -> &[f64] {
        &self.increments[mode]
    }

    pub fn time(&self, k: usize) -> f64 {
        (k as f64 - self.neg_steps as f64) * self.dt
    }

    /// Grid index of time `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = aligned_steps(t, self.dt)? + self.neg_steps as i64;
        if k < 0 || k as usize > self.steps() {
            return Err(Error::Coverage { t_min: self.t_min, t_max: self.t_max, from: t, to: t });
        }
        Ok(k as usize)
    }

    /// `W_j(t)` at a grid time.
    pub fn value(&self, mode: usize, t: f64) -> Result<f64> {
        let k = self.index_of(t)?;
        let inc = &self.increments[mode];
        let z = self.neg_steps;
        Ok(if k >= z {
            inc[z..k].iter().sum()
        } else {
            -inc[k..z].iter().sum::<f64>()
        })
    }

    /// Binary layout, little-endian: `seed: u64, t_min: f64, t_max: f64,
    /// dt: f64, m: u64`, then the increments of mode 0, mode 1, ... in time order.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.seed.to_le_bytes())?;
        out.write_all(&self.t_min.to_le_bytes())?;
        out.write_all(&self.t_max.to_le_bytes())?;
        out.write_all(&self.dt.to_le_bytes())?;
        out.write_all(&(self.modes() as u64).to_le_bytes())?;
        for inc in &self.increments {
            for x in inc {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |input: &mut R| -> Result<[u8; 8]> {
            input.read_exact(&mut word)?;
            Ok(word)
        };
        let seed = u64::from_le_bytes(next(&mut input)?);
        let t_min = f64::from_le_bytes(next(&mut input)?);
        let t_max = f64::from_le_bytes(next(&mut input)?);
        let dt = f64::from_le_bytes(next(&mut input)?);
        let m = u64::from_le_bytes(next(&mut input)?) as usize;
        let (neg_steps, pos_steps) = Self::check_shape(t_min, t_max, dt, m)
            .map_err(|e| Error::Format(format!("bad noise header: {e}")))?;
        let mut increments = Vec::with_capacity(m);
        for _ in 0..m {
            let mut inc = Vec::with_capacity(neg_steps + pos_steps);
            for _ in 0..neg_steps + pos_steps {
                inc.push(f64::from_le_bytes(next(&mut input)?));
            }
            increments.push(inc);
        }
        let mut rest = Vec::new();
        input.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes after noise body", rest.len())));
        }
        Ok(NoisePath { seed, t_min, t_max, dt, neg_steps, increments })
    }

    /// `t,W_0,W_1,...` per grid time.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "t")?;
        for j in 0..self.modes() {
            write!(out, ",w{j}")?;
        }
        writeln!(out)?;
        let mut w = vec![0.0; self.modes()];
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = -self.increments[j][..self.neg_steps].iter().sum::<f64>();
        }
        for k in 0..=self.steps() {
            write!(out, "{}", self.time(k))?;
            for wj in &w {
                write!(out, ",{wj}")?;
            }
            writeln!(out)?;
            if k < self.steps() {
                for (j, wj) in w.iter_mut().enumerate() {
                    *wj += self.increments[j][k];
                }
            }
        }
        Ok(())
    }
}

/// One exact step of `dz + δ z dt = dW` in law:
/// `z' = e^{-δ dt} z + sqrt((1 - e^{-2δ dt}) / (2δ)) ξ`.
pub fn ou_step(z: f64, delta: f64, dt: f64, xi: f64) -> f64 {
    let decay = (-delta * dt).exp();
    // 1 - e^{-2δdt} without cancellation for small steps
    let var = -(-2.0 * delta * dt).exp_m1() / (2.0 * delta);
    decay * z + var.sqrt() * xi
}

/// `z_j(θ_t ω)` at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuState {
    pub t: f64,
    pub z: Vec<f64>,
    pub delta: f64,
}

/// OU coordinates on the full grid of a [`NoisePath`].
#[derive(Debug, Clone, PartialEq)]
pub struct OuTrajectory {
    delta: f64,
    t_min: f64,
    dt: f64,
    neg_steps: usize,
    /// `values[j][k]` is `z_j` at grid time `k`.
    values: Vec<Vec<f64>>,
}

impl OuTrajectory {
    /// Starts every mode from the stationary law `N(0, 1/(2δ))` at `t_min`
    /// and advances it with [`ou_step`] driven by the path increments.
    pub fn from_path(path: &NoisePath, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!("OU drift {delta} must be positive")));
        }
        let sd0 = (0.5 / delta).sqrt();
        let sqrt_dt = path.dt.sqrt();
        let values = (0..path.modes())
            .map(|j| {
                let mut rng = mode_rng(path.seed, j, STREAM_STATIONARY);
                let x: f64 = StandardNormal.sample(&mut rng);
                Self::advance(sd0 * x, path.increments(j), delta, path.dt, sqrt_dt)
            })
            .collect();
        Ok(Self::assemble(path, delta, values))
    }

    /// Same recursion from explicit initial values at `t_min`.
    pub fn from_path_with_initial(path: &NoisePath, delta: f64, z0: &[f64]) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!("OU drift {delta} must be positive")));
        }
        if z0.len() != path.modes() {
            return Err(Error::InvalidArgument(format!(
                "{} initial values for {} modes",
                z0.len(),
                path.modes()
            )));
        }
        let sqrt_dt = path.dt.sqrt();
        let values = z0
            .iter()
            .enumerate()
            .map(|(j, &z)| Self::advance(z, path.increments(j), delta, path.dt, sqrt_dt))
            .collect();
        Ok(Self::assemble(path, delta, values))
    }

    fn advance(z0: f64, inc: &[f64], delta: f64, dt: f64, sqrt_dt: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(inc.len() + 1);
        let mut z = z0;
        out.push(z);
        for dw in inc {
            z = ou_step(z, delta, dt, dw / sqrt_dt);
            out.push(z);
        }
        out
    }

    fn assemble(path: &NoisePath, delta: f64, values: Vec<Vec<f64>>) -> Self {
        OuTrajectory { delta, t_min: path.t_min, dt: path.dt, neg_steps: path.neg_steps, values }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn modes(&self) -> usize {
        self.values.len()
    }

    /// Number of grid times.
    pub fn len(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        (k as f64 - self.neg_steps as f64) * self.dt
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = aligned_steps(t, self.dt)? + self.neg_steps as i64;
        if k < 0 || k as usize >= self.len() {
            return Err(Error::Coverage { t_min: self.t_min, t_max: self.t_max(), from: t, to: t });
        }
        Ok(k as usize)
    }

    /// Coordinates at grid index `k`.
    pub fn coords_at(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[k]).collect()
    }

    pub fn state_at(&self, k: usize) -> OuState {
        OuState { t: self.time(k), z: self.coords_at(k), delta: self.delta }
    }

    pub fn at(&self, t: f64) -> Result<OuState> {
        Ok(self.state_at(self.index_of(t)?))
    }

    pub fn mode_series(&self, mode: usize) -> &[f64] {
        &self.values[mode]
    }

    pub fn states(&self) -> impl Iterator<Item = OuState> + '_ {
        (0..self.len()).map(|k| self.state_at(k))
    }
}

/// Evaluates the OU coordinates at the requested times, each of which must
/// lie on the path grid.
pub fn ou_trajectory(path: &NoisePath, delta: f64, times: &[f64]) -> Result<Vec<OuState>> {
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
    }
    for &t in times {
        if t < path.t_min || t > path.t_max {
            return Err(Error::Coverage { t_min: path.t_min, t_max: path.t_max, from: t, to: t });
        }
    }
    let traj = OuTrajectory::from_path(path, delta)?;
    times.iter().map(|&t| traj.at(t)).collect()
}

/// Sampled surrogate of the tempered bound `r_0(ω)`:
/// `max_t e^{-(σ/2)|t|} Σ_j (|z_j|² + |z_j|^p)`.
pub fn estimate_r0<'a>(states: impl IntoIterator<Item = &'a OuState>, sigma: f64, p: f64) -> f64 {
    states
        .into_iter()
        .map(|s| (-0.5 * sigma * s.t.abs()).exp() * mode_power_sum(&s.z, p))
        .fold(0.0, f64::max)
}

/// `Σ_j (|z_j|² + |z_j|^p)`.
pub fn mode_power_sum(z: &[f64], p: f64) -> f64 {
    z.iter().map(|x| x * x + x.abs().powf(p)).sum()
}

/// [`estimate_r0`] over every grid time of an [`OuTrajectory`].
pub fn estimate_r0_trajectory(ou: &OuTrajectory, sigma: f64, p: f64) -> f64 {
    (0..ou.len())
        .map(|k| {
            let z = ou.coords_at(k);
            (-0.5 * sigma * ou.time(k).abs()).exp() * mode_power_sum(&z, p)
        })
        .fold(0.0, f64::max)
}

/// Radial shape of a noise mode `h_j` or of the deterministic forcing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Zero,
    /// `amplitude * exp(-|x - c|² / width²)`.
    Gaussian { amplitude: f64, width: f64, #[serde(default)] center: f64 },
    /// Compactly supported `amplitude * exp(1 - 1/(1 - (|x - c|/radius)²))` for `|x - c| < radius`.
    Bump { amplitude: f64, radius: f64, #[serde(default)] center: f64 },
}

impl Shape {
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match *self {
            Shape::Zero => 0.0,
            Shape::Gaussian { amplitude, width, center } => {
                let r2 = (x[0] - center).powi(2) + x[1] * x[1];
                amplitude * (-r2 / (width * width)).exp()
            }
            Shape::Bump { amplitude, radius, center } => {
                let s = ((x[0] - center).powi(2) + x[1] * x[1]) / (radius * radius);
                if s < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - s)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sample(&self, grid: &Grid) -> Field {
        grid.sample(|x| self.eval(x))
    }

    /// Radius outside of which the shape vanishes identically, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match *self {
            Shape::Zero => Some(0.0),
            Shape::Gaussian { .. } => None,
            Shape::Bump { radius, center, .. } => Some(radius + center.abs()),
        }
    }
}

/// The spatial noise modes `h_j` with their precomputed norms.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProfile {
    fields: Vec<Field>,
    l2_sq: Vec<f64>,
    grad_sq: Vec<f64>,
    /// `||h_j||_{L^p}^p`.
    lp_pow: Vec<f64>,
    p: f64,
}

impl NoiseProfile {
    pub fn new(fields: Vec<Field>, p: f64) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| Error::InvalidArgument("noise profile needs at least one mode".into()))?;
        for f in &fields {
            first.check_same_grid(f)?;
        }
        let l2_sq = fields.iter().map(Field::norm_l2_sq).collect();
        let grad_sq = fields.iter().map(Field::grad_sq_norm).collect();
        let lp_pow = fields.iter().map(|f| f.lp_integral(p)).collect::<Result<_>>()?;
        Ok(NoiseProfile { fields, l2_sq, grad_sq, lp_pow, p })
    }

    pub fn from_shapes(grid: &Grid, shapes: &[Shape], p: f64) -> Result<Self> {
        Self::new(shapes.iter().map(|s| s.sample(grid)).collect(), p)
    }

    /// Single Gaussian mode `h_1(x) = exp(-|x|²)`.
    pub fn reference(grid: &Grid, p: f64) -> Self {
        Self::from_shapes(grid, &[Shape::Gaussian { amplitude: 1.0, width: 1.0, center: 0.0 }], p)
            .expect("reference profile")
    }

    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }

    pub fn modes(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn l2_sq(&self) -> &[f64] {
        &self.l2_sq
    }

    pub fn grad_sq(&self) -> &[f64] {
        &self.grad_sq
    }

    pub fn lp_pow(&self) -> &[f64] {
        &self.lp_pow
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `Σ_j h_j z_j` pointwise.
    pub fn z_field(&self, z: &[f64]) -> Result<Field> {
        if z.len() != self.modes() {
            return Err(Error::InvalidArgument(format!(
                "{} OU coordinates for {} noise modes",
                z.len(),
                self.modes()
            )));
        }
        let mut out = self.grid().zeros();
        for (h, &zj) in self.fields.iter().zip(z) {
            if zj != 0.0 {
                out.axpy(zj, h)?;
            }
        }
        Ok(out)
    }
}

pub fn z_field(profile: &NoiseProfile, ou: &OuState) -> Result<Field> {
    profile.z_field(&ou.z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_reanchors_the_path() {
        let path = NoisePath::sample(8, -2.0, 2.0, 0.125, 2).unwrap();
        let shifted = path.shift(0.5).unwrap();
        assert_eq!((shifted.t_min(), shifted.t_max()), (-2.5, 1.5));
        for t in [-2.5, -1.0, 0.0, 1.5] {
            let expect = path.value(1, t + 0.5).unwrap() - path.value(1, 0.5).unwrap();
            assert!((shifted.value(1, t).unwrap() - expect).abs() < 1e-12);
        }
        assert_eq!(shifted.shift(-0.5).unwrap(), path);
        assert!(path.shift(3.0).is_err());
    }

    #[test]
    fn anchored_and_reproducible() {
        let a = NoisePath::sample(7, -2.0, 3.0, 0.125, 2).unwrap();
        let b = NoisePath::sample(7, -2.0, 3.0, 0.125, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.value(0, 0.0).unwrap(), 0.0);
        assert_eq!(a.value(1, 0.0).unwrap(), 0.0);
        assert_eq!(a.steps(), 40);
        let c = NoisePath::sample(8, -2.0, 3.0, 0.125, 2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn extending_horizon_keeps_existing_increments() {
        let short = NoisePath::sample(11, -1.0, 1.0, 0.25, 1).unwrap();
        let long = NoisePath::sample(11, -3.0, 2.0, 0.25, 1).unwrap();
        for t in [-1.0, -0.5, 0.25, 1.0] {
            assert_eq!(short.value(0, t).unwrap(), long.value(0, t).unwrap());
        }
    }

    #[test]
    fn rejects_intervals_without_origin() {
        assert!(NoisePath::sample(1, 0.5, 1.0, 0.1, 1).is_err());
        assert!(NoisePath::sample(1, -1.0, -0.5, 0.1, 1).is_err());
        assert!(NoisePath::sample(1, -1.0, 1.0, 0.3, 1).is_err());
    }

    #[test]
    fn ou_step_closed_form() {
        let z = ou_step(1.0, 0.5, 1.0, 0.0);
        assert!((z - (-0.5f64).exp()).abs() < 1e-15);
        assert!((ou_step(1.3, 0.5, 1e-12, 0.0) - 1.3).abs() < 1e-11);
    }

    #[test]
    fn zero_path_decays_deterministically() {
        let path = NoisePath::zero(-2.0, 1.0, 0.25, 1).unwrap();
        let ou = OuTrajectory::from_path_with_initial(&path, 0.5, &[1.0]).unwrap();
        for k in 0..ou.len() {
            let expect = (-0.5 * (ou.time(k) + 2.0)).exp();
            assert!((ou.coords_at(k)[0] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn ou_trajectory_checks_grid() {
        let path = NoisePath::sample(3, -1.0, 1.0, 0.25, 1).unwrap();
        assert!(ou_trajectory(&path, 0.5, &[-0.5, 0.0, 0.5]).is_ok());
        assert!(ou_trajectory(&path, 0.5, &[0.0, 2.0]).is_err());
        assert!(ou_trajectory(&path, 0.5, &[0.5, 0.0]).is_err());
        assert!(ou_trajectory(&path, 0.5, &[0.1]).is_err());
    }

    #[test]
    fn z_field_linear_combination() {
        let g = Grid::reference();
        let prof = NoiseProfile::reference(&g, 4.0);
        assert!(prof.z_field(&[0.0]).unwrap().values().iter().all(|&v| v == 0.0));
        assert_eq!(prof.z_field(&[2.0]).unwrap(), prof.fields()[0].scale(2.0));
        let h = prof.fields()[0].clone();
        let two = NoiseProfile::new(vec![h.clone(), h], 4.0).unwrap();
        let z = two.z_field(&[1.0, -1.0]).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert!(two.z_field(&[1.0]).is_err());
    }

    #[test]
    fn profile_norms_match_grid() {
        let g = Grid::reference();
        let prof = NoiseProfile::reference(&g, 4.0);
        let h = &prof.fields()[0];
        assert_eq!(prof.l2_sq()[0], h.norm_l2_sq());
        assert_eq!(prof.grad_sq()[0], h.grad_sq_norm());
        assert_eq!(prof.lp_pow()[0], h.lp_integral(4.0).unwrap());
        // ∫ exp(-2x²) = sqrt(π/2)
        assert!((prof.l2_sq()[0] - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn r0_examples() {
        let zero = [OuState { t: 0.0, z: vec![0.0], delta: 0.25 }];
        assert_eq!(estimate_r0(&zero, 0.25, 4.0), 0.0);
        let one = [OuState { t: 0.0, z: vec![1.0], delta: 0.25 }];
        assert_eq!(estimate_r0(&one, 0.25, 4.0), 2.0);
    }

    #[test]
    fn r0_bounds_every_sample() {
        let path = NoisePath::sample(5, -20.0, 5.0, 1.0 / 64.0, 2).unwrap();
        let ou = OuTrajectory::from_path(&path, 0.25).unwrap();
        let (sigma, p) = (0.25, 4.0);
        let r0 = estimate_r0_trajectory(&ou, sigma, p);
        let states: Vec<_> = ou.states().collect();
        assert_eq!(r0, estimate_r0(&states, sigma, p));
        for s in &states {
            assert!(mode_power_sum(&s.z, p) <= (0.5 * sigma * s.t.abs()).exp() * r0 * (1.0 + 1e-12));
        }
        let at0 = ou.at(0.0).unwrap();
        assert!(r0 >= mode_power_sum(&at0.z, p));
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let path = NoisePath::sample(99, -1.5, 0.75, 0.125, 3).unwrap();
        let mut buf = Vec::new();
        path.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 40 + 8 * 3 * path.steps());
        let back = NoisePath::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, path);
        buf.push(0);
        assert!(NoisePath::read_binary(buf.as_slice()).is_err());
        assert!(NoisePath::read_binary(&buf[..30]).is_err());
    }

    #[test]
    fn csv_export_matches_values() {
        let path = NoisePath::sample(1, -0.5, 0.5, 0.25, 1).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<_> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 5);
        let w_end: f64 = rows[4].split(',').nth(1).unwrap().parse().unwrap();
        assert!((w_end - path.value(0, 0.5).unwrap()).abs() < 1e-15);
        let w0: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
        assert!(w0.abs() < 1e-15);
    }

    #[test]
    fn member_seeds_distinct() {
        let seeds: std::collections::HashSet<_> = (0..1000).map(|i| member_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_eq!(member_seed(42, 3), member_seed(42, 3));
    }

    #[test]
    fn bump_is_compact() {
        let s = Shape::Bump { amplitude: 2.0, radius: 1.5, center: 0.0 };
        assert_eq!(s.eval([0.0, 0.0]), 2.0);
        assert_eq!(s.eval([1.5, 0.0]), 0.0);
        assert_eq!(s.eval([0.0, 1.6]), 0.0);
        assert_eq!(s.support_radius(), Some(1.5));
    }
}
