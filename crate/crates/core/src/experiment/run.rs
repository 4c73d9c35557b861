use num_complex::Complex64;

use super::config::{
    AmplificationConfig, DpTauConfig, EnergyGrowthConfig, ExperimentConfig, ExperimentKind, GrwBornConfig, LobeParams,
    ShapeConfig, VisibilityBoundConfig, VsMasterConfig,
};
use super::csv::ExperimentResult;
use crate::bounds::{heating_rate, lambda_upper_bound, published_bound, visibility, InterferometryExperiment};
use crate::csl::{match_parameters, run_csl_with};
use crate::dp::{collapse_time, delta_e_composite, MassDistribution};
use crate::ensemble::{mean_and_sem, Ensemble};
use crate::error::{CollapseError, Result};
use crate::grw::{lobe_coherence, run_trajectory_with, CollapseParams, TrajectoryConfig};
use crate::master::{decay_kernel, evolve_density_matrix_sampled, exponential_fit, MasterConfig};
use crate::propagator::Hamiltonian;
use crate::qstate::{gaussian_packet, observables, two_peak_superposition, DensityMatrix, Grid1D, WaveFunction};

/// Offset between the single- and two-particle ensembles' master seeds.
const PAIR_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

/// Runs the configured experiment.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let (columns, rows, summary) = match &config.experiment {
        ExperimentKind::GrwBorn(c) => grw_born(config, c)?,
        ExperimentKind::GrwVsMaster(c) => vs_master(config, c, Unraveling::Jumps)?,
        ExperimentKind::CslVsMaster(c) => vs_master(config, c, Unraveling::Diffusive)?,
        ExperimentKind::Amplification(c) => amplification(config, c)?,
        ExperimentKind::EnergyGrowth(c) => energy_growth(config, c)?,
        ExperimentKind::DpTau(c) => dp_tau(c)?,
        ExperimentKind::VisibilityBound(c) => visibility_bound(c)?,
    };
    Ok(ExperimentResult {
        kind: config.experiment.name().to_string(),
        seed: config.seed,
        config_echo: config.to_toml()?,
        columns: columns.into_iter().map(String::from).collect(),
        rows,
        summary: summary.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    })
}

type Table = (Vec<&'static str>, Vec<Vec<f64>>, Vec<(&'static str, f64)>);

fn grid(config: &ExperimentConfig) -> Result<Grid1D> {
    let g = config.grid.as_ref().ok_or_else(|| CollapseError::ConfigInvalid {
        path: "grid".into(),
        message: "missing".into(),
    })?;
    Grid1D::centered(g.half_width, g.n_points)
}

fn ensemble(config: &ExperimentConfig) -> Result<Ensemble> {
    Ensemble::new(config.seed, config.trajectories, config.workers)
}

fn lobe_state(grid: &Grid1D, p: &LobeParams) -> Result<WaveFunction> {
    let a = p.weight_left.sqrt();
    let b = (1.0 - p.weight_left).sqrt();
    two_peak_superposition(grid, a.into(), b.into(), p.separation, p.width, p.mass)
}

fn grw_born(config: &ExperimentConfig, c: &GrwBornConfig) -> Result<Table> {
    let grid = grid(config)?;
    let lobes = c.lobes();
    let psi = lobe_state(&grid, &lobes)?;
    let params = CollapseParams::new(c.lambda, c.r_c)?;
    let h = Hamiltonian::free();
    let traj = TrajectoryConfig::new(c.t_final, c.t_final, vec![c.t_final]);
    let rows = ensemble(config)?.map(|i, rng| {
        let mut left = f64::NAN;
        let events = run_trajectory_with(&psi, &h, &params, &traj, rng, |_, _, s| left = s.left_probability(0))?;
        let outcome = match (events.is_empty(), left > 0.5) {
            (true, _) => f64::NAN,
            (false, true) => 1.0,
            (false, false) => 0.0,
        };
        Ok(vec![i as f64, events.len() as f64, left, outcome])
    })?;
    let decided: Vec<f64> = rows.iter().map(|r| r[3]).filter(|v| !v.is_nan()).collect();
    let n = decided.len() as f64;
    let frac = decided.iter().sum::<f64>() / n;
    let summary = vec![
        ("decided", n),
        ("left_fraction", frac),
        ("left_fraction_sigma", (frac * (1.0 - frac) / n).sqrt()),
        ("expected_left", c.weight_left),
    ];
    Ok((
        vec!["trajectory", "n_events", "left_probability", "outcome_left"],
        rows,
        summary,
    ))
}

#[derive(Clone, Copy)]
enum Unraveling {
    Jumps,
    Diffusive,
}

/// `|rho(L, R)| / sqrt(rho(L, L) rho(R, R))` at the lobe centers.
fn lobe_visibility(rho: &DensityMatrix, lobes: &LobeParams) -> f64 {
    let g = rho.grid();
    let l = g.nearest_index(g.midpoint() - 0.5 * lobes.separation);
    let r = g.nearest_index(g.midpoint() + 0.5 * lobes.separation);
    let norm = (rho.element(l, l).re * rho.element(r, r).re).sqrt();
    if norm > 0.0 {
        rho.element(l, r).norm() / norm
    } else {
        0.0
    }
}

fn vs_master(config: &ExperimentConfig, c: &VsMasterConfig, how: Unraveling) -> Result<Table> {
    let grid = grid(config)?;
    let lobes = c.lobes();
    let psi = lobe_state(&grid, &lobes)?;
    let params = CollapseParams::new(c.lambda, c.r_c)?;
    let h = Hamiltonian::free();
    let rho0 = DensityMatrix::from_pure(&psi)?;
    let master = evolve_density_matrix_sampled(&rho0, &h, &params, &c.sample_times, &MasterConfig::new(c.dt))?;

    let t_final = *c.sample_times.last().unwrap_or(&0.0);
    let traj = TrajectoryConfig::new(t_final, c.dt, c.sample_times.clone());
    let csl = match_parameters(&params);
    let weight = 1.0 / config.trajectories as f64;
    let init: Vec<DensityMatrix> = c
        .sample_times
        .iter()
        .map(|_| DensityMatrix::zeros(grid, c.mass))
        .collect();
    let ensemble = ensemble(config)?.fold(
        init,
        |_, rng| {
            let mut states = Vec::with_capacity(c.sample_times.len());
            match how {
                Unraveling::Jumps => {
                    run_trajectory_with(&psi, &h, &params, &traj, rng, |_, _, s| states.push(s.clone()))?;
                }
                Unraveling::Diffusive => {
                    run_csl_with(&psi, &h, &csl, &traj, rng, |_, _, s| states.push(s.clone()))?;
                }
            }
            Ok(states)
        },
        |acc, _, states| {
            for (rho, s) in acc.iter_mut().zip(&states) {
                rho.add_pure(s, weight);
            }
        },
    )?;

    let mut rows = Vec::with_capacity(c.sample_times.len());
    let mut worst: f64 = 0.0;
    for ((t, est), exact) in c.sample_times.iter().zip(&ensemble).zip(&master) {
        let td = est.trace_distance(exact)?;
        worst = worst.max(td);
        rows.push(vec![
            *t,
            td,
            est.purity(),
            exact.purity(),
            lobe_visibility(est, &lobes),
            lobe_visibility(exact, &lobes),
        ]);
    }
    let columns = vec![
        "time",
        "trace_distance",
        "ensemble_purity",
        "master_purity",
        "ensemble_lobe_coherence",
        "master_lobe_coherence",
    ];
    let summary = vec![
        ("max_trace_distance", worst),
        ("trajectories", config.trajectories as f64),
    ];
    Ok((columns, rows, summary))
}

fn coherence_series(
    ens: &Ensemble,
    psi: &WaveFunction,
    params: &CollapseParams,
    traj: &TrajectoryConfig,
    separation: f64,
) -> Result<Vec<f64>> {
    let h = Hamiltonian::free();
    let n = traj.sample_times.len();
    let sums = ens.fold(
        vec![Complex64::new(0.0, 0.0); n],
        |_, rng| {
            let mut out = Vec::with_capacity(n);
            run_trajectory_with(psi, &h, params, traj, rng, |_, _, s| {
                out.push(lobe_coherence(s, separation))
            })?;
            Ok(out)
        },
        |acc, _, v| acc.iter_mut().zip(v).for_each(|(a, b)| *a += b),
    )?;
    let scale = 1.0 / ens.trajectories() as f64;
    Ok(sums.iter().map(|z| (z * scale).norm()).collect())
}

fn amplification(config: &ExperimentConfig, c: &AmplificationConfig) -> Result<Table> {
    let grid = grid(config)?;
    let params = CollapseParams::new(c.lambda, c.r_c)?;
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let single = two_peak_superposition(&grid, half.into(), half.into(), c.separation, c.width, c.mass)?;
    let left = gaussian_packet(&grid, grid.midpoint() - 0.5 * c.separation, c.width, 0.0, c.mass)?;
    let right = gaussian_packet(&grid, grid.midpoint() + 0.5 * c.separation, c.width, 0.0, c.mass)?;
    let both_left = WaveFunction::product(&left, &left)?;
    let both_right = WaveFunction::product(&right, &right)?;
    let pair = WaveFunction::superpose(&[(half.into(), &both_left), (half.into(), &both_right)])?;

    let t_final = *c.sample_times.last().unwrap_or(&0.0);
    let traj = TrajectoryConfig::new(t_final, t_final.max(f64::MIN_POSITIVE), c.sample_times.clone());
    let one = coherence_series(&ensemble(config)?, &single, &params, &traj, c.separation)?;
    let pair_ens = Ensemble::new(
        config.seed.wrapping_add(PAIR_SEED_OFFSET),
        config.trajectories,
        config.workers,
    )?;
    let two = coherence_series(&pair_ens, &pair, &params, &traj, c.separation)?;

    let fit_one = exponential_fit(&c.sample_times, &one)?;
    let fit_two = exponential_fit(&c.sample_times, &two)?;
    let rows = c
        .sample_times
        .iter()
        .zip(one.iter().zip(&two))
        .map(|(t, (a, b))| vec![*t, *a, *b])
        .collect();
    let summary = vec![
        ("rate_single", fit_one.rate),
        ("rate_pair", fit_two.rate),
        ("rate_ratio", fit_two.rate / fit_one.rate),
        ("kernel_rate", decay_kernel(c.separation, &params)),
        ("residual_single", fit_one.residual),
        ("residual_pair", fit_two.residual),
    ];
    Ok((vec!["time", "coherence_single", "coherence_pair"], rows, summary))
}

fn energy_growth(config: &ExperimentConfig, c: &EnergyGrowthConfig) -> Result<Table> {
    let grid = grid(config)?;
    let params = CollapseParams::new(c.lambda, c.r_c)?;
    let psi = gaussian_packet(&grid, grid.midpoint(), c.width, 0.0, c.mass)?;
    let h = Hamiltonian::free();
    let t_final = *c.sample_times.last().unwrap_or(&0.0);
    let traj = TrajectoryConfig::new(t_final, t_final.max(f64::MIN_POSITIVE), c.sample_times.clone());
    let n = c.sample_times.len();
    let per_time: Vec<Vec<f64>> = ensemble(config)?.fold(
        vec![Vec::with_capacity(config.trajectories as usize); n],
        |_, rng| {
            let mut ke = Vec::with_capacity(n);
            run_trajectory_with(&psi, &h, &params, &traj, rng, |_, _, s| {
                ke.push(observables(s).kinetic_energy)
            })?;
            Ok(ke)
        },
        |acc, _, ke| acc.iter_mut().zip(ke).for_each(|(a, v)| a.push(v)),
    )?;
    let stats: Vec<(f64, f64)> = per_time.iter().map(|v| mean_and_sem(v)).collect();
    let (slope, slope_err) = weighted_slope(&c.sample_times, &stats);
    let predicted = heating_rate(&params, c.mass, 1.0)?;
    let rows = c
        .sample_times
        .iter()
        .zip(&stats)
        .map(|(t, (m, s))| vec![*t, *m, *s, predicted * t + stats[0].0])
        .collect();
    let summary = vec![
        ("slope", slope),
        ("slope_stderr", slope_err),
        ("heating_rate", predicted),
        ("relative_error", (slope - predicted) / predicted),
    ];
    Ok((
        vec!["time", "mean_kinetic_energy", "stderr", "predicted"],
        rows,
        summary,
    ))
}

/// Ordinary least-squares slope of the means and a rough standard error
/// that treats the points as independent.
fn weighted_slope(times: &[f64], stats: &[(f64, f64)]) -> (f64, f64) {
    let n = times.len() as f64;
    let tm = times.iter().sum::<f64>() / n;
    let ym = stats.iter().map(|s| s.0).sum::<f64>() / n;
    let sxx: f64 = times.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = times.iter().zip(stats).map(|(t, s)| (t - tm) * (s.0 - ym)).sum();
    let var: f64 = times
        .iter()
        .zip(stats)
        .map(|(t, s)| {
            let e = if s.1.is_finite() { s.1 } else { 0.0 };
            ((t - tm) / sxx).powi(2) * e * e
        })
        .sum();
    (sxy / sxx, var.sqrt())
}

fn distribution(s: &ShapeConfig) -> Result<MassDistribution> {
    match *s {
        ShapeConfig::Point { mass, center } => MassDistribution::point(mass, center),
        ShapeConfig::Sphere { mass, radius, center } => MassDistribution::uniform_sphere(mass, radius, center),
        ShapeConfig::Gaussian { mass, sigma, center } => MassDistribution::gaussian(mass, sigma, center),
    }
}

fn dp_tau(c: &DpTauConfig) -> Result<Table> {
    let first = c.first.iter().map(distribution).collect::<Result<Vec<_>>>()?;
    let second = c.second.iter().map(distribution).collect::<Result<Vec<_>>>()?;
    let de = delta_e_composite(&first, &second)?;
    let tau = collapse_time(de)?;
    Ok((
        vec!["delta_e", "tau"],
        vec![vec![de, tau]],
        vec![("delta_e", de), ("tau", tau)],
    ))
}

fn visibility_bound(c: &VisibilityBoundConfig) -> Result<Table> {
    let exp = InterferometryExperiment::new(c.mass_amu, c.separation, c.duration, c.visibility_floor)?;
    let rows = c
        .lambdas
        .iter()
        .map(|&l| Ok(vec![l, visibility(&exp, l, c.r_c)?]))
        .collect::<Result<Vec<_>>>()?;
    let bound = lambda_upper_bound(&exp, c.r_c)?;
    let summary = vec![
        ("lambda_upper", bound.lambda_upper),
        ("r_c_assumed", bound.r_c_assumed),
        (
            "reference_matter_wave",
            published_bound("Matter-wave interferometry").unwrap_or(f64::NAN),
        ),
        (
            "reference_x_ray",
            published_bound("Spontaneous X-ray emission from Ge").unwrap_or(f64::NAN),
        ),
    ];
    Ok((vec!["lambda", "visibility"], rows, summary))
}
