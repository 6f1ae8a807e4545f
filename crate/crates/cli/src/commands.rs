//! One function per subcommand. Ensembles run in parallel; results are
//! collected in seed order and written by the caller's single writer.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Write};

use rayon::prelude::*;
use serde_json::{json, Value};

use stochwave::attractor::{approximate_attractor, invariance_check, pullback_convergence_test, sample_ball};
use stochwave::dynamics::{evolve, evolve_to, pullback, Model, State};
use stochwave::energy::{check_energy_inequality, e_norm, energy_q, EnergyConstants};
use stochwave::noise::{estimate_r0_trajectory, member_seed, NoisePath, OuTrajectory};
use stochwave::tails::{tail_experiment, TailConfig};
use stochwave::vitali::{bundled_families, load_family_csv, radon_riesz_check, vitali_verdict, Family};
use stochwave::Error;

use crate::config::{ExperimentConfig, InitialBlock};
use crate::output::Artifacts;

pub type Result<T> = std::result::Result<T, Error>;

fn seeds(config: &ExperimentConfig) -> Vec<u64> {
    (0..config.experiment.ensemble).map(|i| member_seed(config.noise.seed, i)).collect()
}

fn ou(config: &ExperimentConfig, model: &Model, seed: u64, t_min: f64, t_max: f64) -> Result<(NoisePath, OuTrajectory)> {
    let dt = config.dt(model.grid())?;
    let path = NoisePath::sample(seed, t_min, t_max, 0.5 * dt, model.params.m)?;
    let ou = OuTrajectory::from_path(&path, model.params.delta)?;
    Ok((path, ou))
}

fn initial_states(config: &ExperimentConfig, model: &Model, seed: u64) -> Result<Vec<State>> {
    let grid = *model.grid();
    Ok(match config.initial {
        InitialBlock::Zero => vec![State::zeros(&grid)],
        InitialBlock::Fields { u, v } => vec![State::new(u.sample(&grid), v.sample(&grid))?],
        InitialBlock::Ball { radius, count } => sample_ball(&grid, &model.params, radius, count, seed)?,
    })
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

/// Admissibility report. Returns `false` when the parameters are inadmissible.
pub fn validate(config: &ExperimentConfig, out: &mut Artifacts) -> Result<bool> {
    let p = &config.params;
    let violations = p.validate()?;
    let grid = config.grid()?;
    let dt = config.dt(&grid)?;
    let constants = config.model().and_then(|m| EnergyConstants::new(&m)).ok();
    let report = json!({
        "params": to_value(p),
        "admissible": violations.is_empty(),
        "violations": violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        "sigma": p.decay_rate_sigma().ok(),
        "epsilon_max": p.max_noise_intensity().ok(),
        "coercivity": p.coercivity(),
        "grid": to_value(&grid),
        "dt": dt,
        "energy_constants": constants.map(|c| to_value(&c)),
        "diagnostics": config.validate(),
    });
    out.json("validate.json", report)?;
    Ok(violations.is_empty() && config.validate().is_empty())
}

/// Forward trajectory on `[0, horizon]` with its energy report.
pub fn simulate(config: &ExperimentConfig, out: &mut Artifacts) -> Result<bool> {
    let model = config.model()?;
    let seed = config.noise.seed;
    let horizon = config.noise.horizon;
    let (path, ou) = ou(config, &model, seed, 0.0, horizon)?;
    out.binary("noise.bin", |w| path.write_binary(w))?;
    let x = initial_states(config, &model, seed)?.swap_remove(0);
    let traj = evolve(&x, 0.0, horizon, &ou, &model, config.experiment.snapshot_every)?;
    out.csv("trajectory.csv", |w| {
        writeln!(w, "t,e_norm,q,u_l2,v_l2,u_max,v_max")?;
        for (t, s) in traj.times.iter().zip(&traj.states) {
            writeln!(
                w,
                "{t},{},{},{},{},{},{}",
                e_norm(s, &model.params)?,
                energy_q(s, &model.params, &model.nl),
                s.u.norm_l2(),
                s.v.norm_l2(),
                s.u.max_abs(),
                s.v.max_abs()
            )?;
        }
        Ok(())
    })?;
    for &t in &config.experiment.dump_times {
        let s = evolve_to(&x, 0.0, t, &ou, &model)?;
        out.csv(&format!("field_u_t{t}.csv"), |w| s.u.write_csv(w))?;
        out.csv(&format!("field_v_t{t}.csv"), |w| s.v.write_csv(w))?;
    }
    let report = check_energy_inequality(&traj, &ou, &model, config.experiment.tolerance)?;
    out.csv("energy.csv", |w| report.write_csv(w))?;
    let passed = report.passed();
    out.json(
        "simulate.json",
        json!({
            "seed": seed,
            "horizon": horizon,
            "snapshots": traj.len(),
            "constants": to_value(&report.constants),
            "r0": report.r0,
            "radius": report.radius,
            "min_relative_margin": report.min_relative_margin,
            "violations": report.violations,
            "c5_bound_holds": report.c5_bound_holds,
            "passed": passed,
        }),
    )?;
    Ok(passed)
}

/// Pullback convergence over the ensemble. Passes when every Cauchy
/// sequence decreases strictly; the fitted rate is an observation.
pub fn pullback_cmd(config: &ExperimentConfig, out: &mut Artifacts) -> Result<bool> {
    let model = config.model()?;
    let times = &config.experiment.pullback_times;
    let t_max = *times.last().expect("validated schedule");
    let reports = seeds(config)
        .par_iter()
        .map(|&seed| {
            let (_, ou) = ou(config, &model, seed, -t_max, 0.0)?;
            let initial = initial_states(config, &model, seed)?;
            Ok((seed, pullback_convergence_test(&model, &ou, &initial, times)?))
        })
        .collect::<Result<Vec<_>>>()?;
    out.csv("pullback.csv", |w| {
        writeln!(w, "seed,initial,t,difference")?;
        for (seed, r) in &reports {
            for (j, d) in r.differences.iter().enumerate() {
                for (i, v) in d.iter().enumerate() {
                    writeln!(w, "{seed},{j},{},{v}", r.times[i])?;
                }
            }
        }
        Ok(())
    })?;
    let factor = config.experiment.rate_factor;
    let members: Vec<Value> = reports
        .iter()
        .map(|(seed, r)| {
            json!({
                "seed": seed,
                "fitted_rates": r.fitted_rates,
                "benchmark": r.benchmark,
                "rate_within": r.rate_within(factor),
                "strictly_decreasing": r.strictly_decreasing(),
                "terminal_spread": r.terminal_spread,
            })
        })
        .collect();
    let passed = reports.iter().all(|(_, r)| r.strictly_decreasing());
    out.json(
        "pullback.json",
        json!({
            "times": times,
            "rate_factor": factor,
            "rate_within_all": reports.iter().all(|(_, r)| r.rate_within(factor)),
            "members": members,
            "passed": passed,
        }),
    )?;
    Ok(passed)
}

/// Entry into the absorbing ball from data of size up to `ball_factor * R(ω)`.
pub fn absorb(config: &ExperimentConfig, out: &mut Artifacts) -> Result<bool> {
    let model = config.model()?;
    let constants = EnergyConstants::new(&model)?;
    let horizon = config.noise.horizon;
    let e = &config.experiment;
    let rows = seeds(config)
        .par_iter()
        .map(|&seed| {
            let (_, ou) = ou(config, &model, seed, -horizon, 0.0)?;
            let r0 = estimate_r0_trajectory(&ou, constants.sigma, model.params.p);
            let radius = constants.absorbing_radius(r0)?;
            let initial = sample_ball(model.grid(), &model.params, e.ball_factor * radius, e.ball_count, seed)?;
            let mut start = 0.0f64;
            let mut end = 0.0f64;
            for x in &initial {
                start = start.max(e_norm(x, &model.params)?);
                end = end.max(e_norm(&pullback(horizon, &ou, x, &model)?, &model.params)?);
            }
            Ok((seed, r0, radius, start, end))
        })
        .collect::<Result<Vec<_>>>()?;
    out.csv("absorb.csv", |w| {
        writeln!(w, "seed,r0,radius,max_initial_e_norm,max_final_e_norm,entered")?;
        for (seed, r0, radius, start, end) in &rows {
            writeln!(w, "{seed},{r0},{radius},{start},{end},{}", end <= radius)?;
        }
        Ok(())
    })?;
    let entered = rows.iter().filter(|r| r.4 <= r.2).count();
    let passed = entered == rows.len();
    out.json(
        "absorb.json",
        json!({
            "horizon": horizon,
            "ball_factor": e.ball_factor,
            "constants": to_value(&constants),
            "entered": entered,
            "members": rows.len(),
            "passed": passed,
        }),
    )?;
    Ok(passed)
}

/// Tail experiment. Passes when the tail at the last `(t, r)` is below `eta`.
pub fn tails(config: &ExperimentConfig, out: &mut Artifacts) -> Result<bool> {
    let model = config.model()?;
    let e = &config.experiment;
    let initial = initial_states(config, &model, config.noise.seed)?;
    let tail_config =
        TailConfig { seeds: seeds(config), times: e.tail_times.clone(), radii: e.tail_radii.clone(), eta: e.eta };
    let report = tail_experiment(&model, &initial, &tail_config)?;
    out.csv("tails.csv", |w| report.write_csv(w))?;
    let passed = report.below(report.times.len() - 1, report.radii.len() - 1);
    out.json("tails.json", json!({ "report": to_value(&report), "passed": passed }))?;
    Ok(passed)
}

/// Attractor surrogate and its invariance check.
pub fn attractor(config: &ExperimentConfig, out: &mut Artifacts) -> Result<bool> {
    let model = config.model()?;
    let e = &config.experiment;
    let seed = config.noise.seed;
    let times = &e.pullback_times;
    let t_max = *times.last().expect("validated schedule");
    let (_, ou) = ou(config, &model, seed, -t_max, e.invariance_time)?;
    let initial = initial_states(config, &model, seed)?;
    let approx = approximate_attractor(&model, &ou, seed, times, &initial)?;
    let inv = invariance_check(&model, &ou, &approx, &initial, e.invariance_time)?;
    out.csv("attractor.csv", |w| {
        writeln!(w, "stage,t,member,e_norm")?;
        for (i, stage) in approx.stages.iter().enumerate() {
            for (j, s) in stage.states.iter().enumerate() {
                writeln!(w, "{i},{},{j},{}", approx.times[i], e_norm(s, &model.params)?)?;
            }
        }
        Ok(())
    })?;
    let passed = inv.passed(e.invariance_factor, e.invariance_abs_tol);
    out.json(
        "attractor.json",
        json!({
            "times": approx.times,
            "gaps": approx.gaps,
            "cauchy_gap": approx.cauchy_gap(),
            "deepest_size": approx.deepest().len(),
            "deepest_max_e_norm": approx.deepest().max_e_norm(&model.params)?,
            "invariance": to_value(&inv),
            "passed": passed,
        }),
    )?;
    Ok(passed)
}

fn vitali_family(config: &ExperimentConfig, fam: &Family) -> Value {
    let e = &config.experiment;
    let p = config.params.p;
    match vitali_verdict(&fam.members, &fam.limit, p, &e.vitali_eps, &e.vitali_thresholds) {
        Ok(r) => {
            let rr = radon_riesz_check(&fam.members, &fam.limit, p).ok();
            json!({
                "name": fam.name,
                "members": fam.members.len(),
                "condition_a": r.a_passed,
                "condition_b": r.b_passed,
                "oracle_converges": r.oracle_converges,
                "consistent": r.consistent,
                "distances": r.distances,
                "decreasing_from": r.decreasing_from,
                "radon_riesz": rr.map(|x| to_value(&x)),
            })
        }
        Err(err) => json!({ "name": fam.name, "error": err.to_string(), "consistent": false }),
    }
}

/// Bundled families plus any user CSV families. Passes when every verdict
/// agrees with the direct norm oracle.
pub fn vitali(config: &ExperimentConfig, out: &mut Artifacts) -> Result<bool> {
    let e = &config.experiment;
    let mut families = bundled_families(e.vitali_length, config.params.p);
    for path in &e.vitali_csv {
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let file = File::open(path)?;
        families.push(load_family_csv(BufReader::new(file), &name)?);
    }
    let verdicts: Vec<Value> = families.par_iter().map(|f| vitali_family(config, f)).collect();
    let mut rows = String::from("family,member,distance\n");
    for v in &verdicts {
        if let Some(d) = v["distances"].as_array() {
            for (m, x) in d.iter().enumerate() {
                let _ = writeln!(rows, "{},{},{}", v["name"].as_str().unwrap_or(""), m + 1, x);
            }
        }
    }
    out.csv("vitali.csv", |w| Ok(w.write_all(rows.as_bytes())?))?;
    let passed = verdicts.iter().all(|v| v["consistent"].as_bool() == Some(true));
    out.json("vitali.json", json!({ "families": verdicts, "passed": passed }))?;
    Ok(passed)
}
