use rayon::prelude::*;

use stochwave::attractor::{approximate_attractor, invariance_check, sample_ball};
use stochwave::dynamics::{Forcing, Model, TimeGrid, MAX_CFL};
use stochwave::noise::{member_seed, NoisePath, NoiseProfile, OuTrajectory, Shape};
use stochwave::nonlin::Nonlinearity;
use stochwave::{Grid, Params};

fn reference_model() -> Model {
    let grid = Grid::reference();
    let params = Params::reference();
    let profile =
        NoiseProfile::from_shapes(&grid, &[Shape::Gaussian { amplitude: 1.0, width: 1.0, center: 0.0 }], params.p)
            .unwrap();
    Model::new(params, Nonlinearity::canonical(params.p).unwrap(), Forcing::new(grid.zeros(), profile).unwrap())
        .unwrap()
}

#[test]
fn stochastic_surrogate_stabilises_and_is_invariant() {
    let model = reference_model();
    let grid = *model.grid();
    let noise_dt = TimeGrid::for_grid(&grid, MAX_CFL).unwrap().noise_dt();
    let times = [4.0, 8.0, 12.0, 16.0];
    let t = 1.0;
    let results: Vec<_> = (0..8)
        .into_par_iter()
        .map(|i| {
            let seed = member_seed(42, i);
            let path = NoisePath::sample(seed, -16.0, t, noise_dt, 1).unwrap();
            let ou = OuTrajectory::from_path(&path, model.params.delta).unwrap();
            let initial = sample_ball(&grid, &model.params, 3.0, 3, seed).unwrap();
            let approx = approximate_attractor(&model, &ou, seed, &times, &initial).unwrap();
            let inv = invariance_check(&model, &ou, &approx, &initial, t).unwrap();
            (approx.gaps, inv)
        })
        .collect();
    for (gaps, inv) in results {
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "gaps {gaps:?}");
        assert!(inv.passed(3.0, 1e-9), "{inv:?}");
    }
}
