//! Property tests for the structural invariants of each layer.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stochwave::attractor::{hausdorff_semidist, random_smooth_state, Provenance, StateCloud};
use stochwave::dynamics::{evolve_to, Forcing, Model, State};
use stochwave::energy::{e_norm, energy_q, quadratic_energy};
use stochwave::grid::{cutoff_rho, tail_mask};
use stochwave::noise::{estimate_r0_trajectory, mode_power_sum, NoisePath, NoiseProfile, OuTrajectory, Shape};
use stochwave::nonlin::{f_eval, F_eval, Nonlinearity};
use stochwave::tails::tail_norm;
use stochwave::{Grid, Params};

fn admissible() -> impl Strategy<Value = Params> {
    (0.05f64..2.0, 0.05f64..0.6, 2.1f64..6.0, 0.1f64..2.0, 1.0f64..6.0, 0.05f64..1.0, 0.0f64..1.0)
        .prop_filter_map("admissible", |(alpha, delta, p, c1, c2, c3, frac)| {
            let beta = 3.0 * delta + 0.1 + alpha * 0.5;
            let mut params = Params { alpha, beta, delta, epsilon: 0.0, p, c1, c2, c3, m: 1 };
            params.epsilon = frac * params.max_noise_intensity().ok()?;
            params.validate().ok()?.is_empty().then_some(params)
        })
}

fn small_state(seed: u64, scale: f64) -> State {
    let grid = Grid::new(1, 4.0, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_smooth_state(&grid, &mut rng).scale(scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sigma_never_exceeds_delta(params in admissible()) {
        let sigma = params.decay_rate_sigma().unwrap();
        prop_assert!(sigma <= params.delta);
        let absorbed = params.epsilon * params.c1 * (params.p - 1.0) / (params.c3 * params.p);
        if absorbed <= params.delta * (params.c2 - 1.0) {
            prop_assert_eq!(sigma, params.delta);
        }
    }

    #[test]
    fn noise_bound_monotone_in_constants(params in admissible(), bump in 0.01f64..0.5) {
        let base = params.max_noise_intensity().unwrap();
        let up = |f: fn(&mut Params, f64), sign: f64| {
            let mut q = params;
            f(&mut q, bump);
            sign * (q.max_noise_intensity().unwrap() - base)
        };
        prop_assert!(up(|q, b| q.delta += b, 1.0) > 0.0);
        prop_assert!(up(|q, b| q.c2 += b, 1.0) > 0.0);
        prop_assert!(up(|q, b| q.c3 += b, 1.0) > 0.0);
        prop_assert!(up(|q, b| q.c1 += b, -1.0) > 0.0);
        prop_assert!(up(|q, b| q.p += b, -1.0) > 0.0);
    }

    #[test]
    fn canonical_derivative_and_sign(p in 2.1f64..6.0, u in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0]) {
        let nl = Nonlinearity::canonical(p).unwrap();
        let h = 1e-5;
        let fd = (F_eval(u + h, &nl) - F_eval(u - h, &nl)) / (2.0 * h);
        let f = f_eval(u, &nl);
        prop_assert!((fd - f).abs() <= 1e-6 * f.abs().max(1e-12));
        prop_assert!(u * f >= 0.0);
        prop_assert!(F_eval(u, &nl) >= 0.0);
    }

    #[test]
    fn canonical_noise_bound_is_delta_p_over_p_minus_one(p in 2.1f64..6.0, delta in 0.05f64..0.6) {
        let c = Nonlinearity::canonical(p).unwrap().constants().unwrap();
        let params = Params { alpha: 1.0, beta: 3.5 * delta, delta, epsilon: 0.0, p, c1: c.c1, c2: c.c2, c3: c.c3, m: 1 };
        let bound = params.max_noise_intensity().unwrap();
        prop_assert!((bound - delta * p / (p - 1.0)).abs() <= 1e-12 * bound);
    }

    #[test]
    fn lp_integral_additive_on_disjoint_supports(seed in any::<u64>(), split in 1usize..63, p in 1.5f64..5.0) {
        let grid = Grid::new(1, 4.0, 64).unwrap();
        let s = small_state(seed, 1.0);
        let mut left = s.u.clone();
        let mut right = s.u.clone();
        left.values_mut()[split..].iter_mut().for_each(|x| *x = 0.0);
        right.values_mut()[..split].iter_mut().for_each(|x| *x = 0.0);
        let whole = s.u.lp_integral(p).unwrap();
        let parts = left.lp_integral(p).unwrap() + right.lp_integral(p).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-12 * whole.max(1e-300));
        prop_assert_eq!(s.u.grid(), &grid);
    }

    #[test]
    fn energy_coercivity(seed in any::<u64>(), scale in 0.01f64..5.0) {
        let params = Params::reference();
        let nl = Nonlinearity::canonical(params.p).unwrap();
        let s = small_state(seed, scale);
        let a = params.alpha + params.delta * params.delta - params.beta * params.delta;
        let base = s.v.norm_l2_sq() + s.u.norm_l2_sq() + s.u.grad_sq_norm();
        let lower = a.min(1.0) * base + 2.0 * params.c3 * s.u.lp_integral(params.p).unwrap();
        prop_assert!(energy_q(&s, &params, &nl) >= lower * (1.0 - 1e-12));
        prop_assert!(quadratic_energy(&s, &params) >= 0.0);
    }

    #[test]
    fn tail_norm_monotone_and_consistent(seed in any::<u64>(), r1 in 0.1f64..2.5, dr in 0.0f64..0.5) {
        let params = Params::reference();
        let s = small_state(seed, 2.0);
        let (t1, t2) = (tail_norm(&s, r1, &params).unwrap(), tail_norm(&s, r1 + dr, &params).unwrap());
        prop_assert!(t2 <= t1);
        prop_assert_eq!(tail_norm(&s, 1e-12, &params).unwrap(), e_norm(&s, &params).unwrap());
    }

    #[test]
    fn cutoff_sandwich(r in 0.2f64..3.0) {
        let grid = Grid::new(1, 4.0, 64).unwrap();
        let rho = tail_mask(&grid, r).unwrap();
        for (i, &w) in rho.values().iter().enumerate() {
            let x = grid.radius(i);
            let outer = if x > std::f64::consts::SQRT_2 * r { 1.0 } else { 0.0 };
            let inner = if x > r { 1.0 } else { 0.0 };
            prop_assert!(outer <= w && w <= inner);
        }
    }

    #[test]
    fn hausdorff_zero_and_triangle(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let params = Params::reference();
        let cloud = |seed: u64| {
            let states = (0..3).map(|k| small_state(seed.wrapping_add(k), 1.0)).collect();
            let provenance = (0..3).map(|k| Provenance { seed, pullback_time: 0.0, initial_id: k }).collect();
            StateCloud::new(states, provenance).unwrap()
        };
        let (ca, cb, cc) = (cloud(a), cloud(b), cloud(c));
        let d = |x: &StateCloud, y: &StateCloud| hausdorff_semidist(x, y, &params).unwrap();
        prop_assert_eq!(d(&ca, &ca), 0.0);
        prop_assert!(d(&ca, &cc) <= d(&ca, &cb) + d(&cb, &cc) + 1e-12);
    }
}

#[test]
fn cutoff_is_monotone_with_bounded_slope() {
    let h = 1e-4;
    let mut prev = 0.0;
    for i in 0..10_000 {
        let s = 3.0 * i as f64 / 10_000.0;
        let v = cutoff_rho(s).unwrap();
        assert!(v >= prev);
        prev = v;
        if s > h {
            let slope = (cutoff_rho(s + h).unwrap() - cutoff_rho(s - h).unwrap()) / (2.0 * h);
            assert!(slope <= 2.0, "slope {slope} at {s}");
        }
    }
}

#[test]
fn sampled_noise_power_respects_r0() {
    let params = Params::reference();
    let sigma = params.decay_rate_sigma().unwrap();
    for seed in 0..10 {
        let path = NoisePath::sample(seed, -20.0, 0.0, 1.0 / 64.0, 2).unwrap();
        let ou = OuTrajectory::from_path(&path, params.delta).unwrap();
        let r0 = estimate_r0_trajectory(&ou, sigma, params.p);
        for k in 0..ou.len() {
            let bound = (0.5 * sigma * ou.time(k).abs()).exp() * r0;
            assert!(mode_power_sum(&ou.coords_at(k), params.p) <= bound * (1.0 + 1e-12));
        }
    }
}

#[test]
fn noiseless_dynamics_ignore_the_seed() {
    let grid = Grid::new(1, 4.0, 64).unwrap();
    let params = Params::reference().with_epsilon(0.0);
    let profile = NoiseProfile::from_shapes(&grid, &[Shape::Gaussian { amplitude: 1.0, width: 1.0, center: 0.0 }], params.p)
        .unwrap();
    let model = Model::new(params, Nonlinearity::canonical(params.p).unwrap(), Forcing::new(grid.zeros(), profile).unwrap())
        .unwrap();
    let x = small_state(3, 2.0);
    let run = |seed| {
        let path = NoisePath::sample(seed, 0.0, 4.0, 1.0 / 32.0, 1).unwrap();
        evolve_to(&x, 0.0, 4.0, &OuTrajectory::from_path(&path, params.delta).unwrap(), &model).unwrap()
    };
    assert_eq!(run(1), run(2));
}
