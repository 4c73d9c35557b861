//! GRW jump dynamics: Poisson-timed Gaussian localizations interleaved with
//! unitary evolution.
//!
//! The localization operator of particle `i` around `c` is the multiplier
//!
//! ```text
//! L(c) = (α/π)^(1/4) exp(-α (q_i - c)² / 2),   α = 1/r_c²
//! ```
//!
//! normalized so that `sum_c L(c)² dx = 1` over the grid of candidate
//! centers. Distances are minimum-image distances on the periodic grid, which
//! makes this completeness relation hold at every grid point, edges included.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{CollapseError, Result};
use crate::propagator::{Evolver, Hamiltonian};
use crate::qstate::{observables, Grid1D, Observables, WaveFunction};

/// Posterior weight (relative to a unit-peak Gaussian) below which a collapse is refused.
pub const EMPTY_POSTERIOR_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseParams {
    lambda: f64,
    r_c: f64,
}

impl CollapseParams {
    pub fn new(lambda: f64, r_c: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(CollapseError::NegativeRate(lambda));
        }
        if !(r_c > 0.0 && r_c.is_finite()) {
            return Err(CollapseError::invalid("r_c", format!("must be positive, got {r_c:e}")));
        }
        Ok(CollapseParams { lambda, r_c })
    }

    /// Collapse rate per constituent, s⁻¹.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn r_c(&self) -> f64 {
        self.r_c
    }

    /// `1 / r_c²`, m⁻².
    pub fn alpha(&self) -> f64 {
        1.0 / (self.r_c * self.r_c)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        CollapseParams::new(lambda, self.r_c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseEvent {
    pub time: f64,
    pub particle: usize,
    pub center: f64,
}

/// Exponential waiting time of a Poisson process; `f64::INFINITY` when `rate == 0`.
pub fn sample_waiting_time<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<f64> {
    if !(rate >= 0.0) {
        return Err(CollapseError::NegativeRate(rate));
    }
    if rate == 0.0 {
        return Ok(f64::INFINITY);
    }
    let exp = Exp::new(rate).map_err(|e| CollapseError::invalid("rate", e.to_string()))?;
    Ok(exp.sample(rng))
}

/// `L(center)` evaluated at every grid point.
///
/// The Gaussian is cut at half the box length, so the localization operators
/// sum to the identity only up to about `exp(-(L / 2 r_c)²)`.
pub fn localization_kernel(center: f64, params: &CollapseParams, grid: &Grid1D) -> Result<Vec<f64>> {
    if !grid.contains(center) {
        return Err(CollapseError::OutOfDomain(format!("collapse center {center:e} m")));
    }
    let alpha = params.alpha();
    let pref = (alpha / std::f64::consts::PI).powf(0.25);
    Ok(grid
        .points()
        .iter()
        .map(|&x| {
            let d = grid.periodic_distance(x, center);
            pref * (-0.5 * alpha * d * d).exp()
        })
        .collect())
}

/// `g[k] = L² at index offset k`, shared by every center because the grid is uniform.
fn squared_kernel_table(params: &CollapseParams, grid: &Grid1D) -> Vec<f64> {
    let alpha = params.alpha();
    let pref = (alpha / std::f64::consts::PI).sqrt();
    (0..grid.n_points())
        .map(|k| {
            let d = grid.offset_distance(k);
            pref * (-alpha * d * d).exp()
        })
        .collect()
}

fn check_particle(state: &WaveFunction, particle: usize) -> Result<()> {
    if particle >= state.n_particles() {
        return Err(CollapseError::invalid(
            "particle",
            format!("index {particle} but state has {} particles", state.n_particles()),
        ));
    }
    Ok(())
}

/// `p(c) = ||L(c) psi||²` for every grid center `c`; a density over centers (m⁻¹).
pub fn collapse_probability_density(
    state: &WaveFunction,
    particle: usize,
    params: &CollapseParams,
) -> Result<Vec<f64>> {
    check_particle(state, particle)?;
    state.require_normalized()?;
    Ok(probability_density_unchecked(
        state,
        particle,
        &squared_kernel_table(params, state.grid()),
    ))
}

fn probability_density_unchecked(state: &WaveFunction, particle: usize, table: &[f64]) -> Vec<f64> {
    let grid = state.grid();
    let n = grid.n_points();
    let dx = grid.dx();
    let rho = state.marginal_density(particle);
    let support: Vec<(usize, f64)> = rho
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > 0.0)
        .map(|(l, r)| (l, *r * dx))
        .collect();
    (0..n)
        .map(|j| support.iter().map(|&(l, w)| table[(j + n - l) % n] * w).sum::<f64>())
        .collect()
}

/// `L(center) psi / ||L(center) psi||`, acting on one particle's coordinate of the joint state.
pub fn apply_collapse(
    state: &WaveFunction,
    particle: usize,
    center: f64,
    params: &CollapseParams,
) -> Result<WaveFunction> {
    check_particle(state, particle)?;
    state.require_normalized()?;
    let grid = state.grid();
    if !grid.contains(center) {
        return Err(CollapseError::OutOfDomain(format!("collapse center {center:e} m")));
    }
    let alpha = params.alpha();
    // Unit-peak Gaussian; the prefactor cancels on renormalization.
    let factor: Vec<f64> = grid
        .points()
        .iter()
        .map(|&x| {
            let d = grid.periodic_distance(x, center);
            (-0.5 * alpha * d * d).exp()
        })
        .collect();
    let mut out = state.clone();
    let n = grid.n_points();
    {
        let amps = out.amplitudes_mut();
        match (state.n_particles(), particle) {
            (1, _) => amps.iter_mut().zip(&factor).for_each(|(z, f)| *z *= *f),
            (_, 0) => {
                for i in 0..n {
                    amps[i * n..(i + 1) * n].iter_mut().for_each(|z| *z *= factor[i]);
                }
            }
            _ => {
                for i in 0..n {
                    amps[i * n..(i + 1) * n]
                        .iter_mut()
                        .zip(&factor)
                        .for_each(|(z, f)| *z *= *f);
                }
            }
        }
    }
    let weight = out.norm_squared();
    if !(weight >= EMPTY_POSTERIOR_LIMIT) {
        return Err(CollapseError::EmptyPosterior(weight));
    }
    out.normalize_in_place()?;
    Ok(out)
}

/// Collapse rate of a bound system of `n_constituents`, each collapsing at λ.
pub fn effective_rate(n_constituents: f64, params: &CollapseParams) -> Result<f64> {
    if !(n_constituents >= 1.0) {
        return Err(CollapseError::ZeroConstituents);
    }
    Ok(n_constituents * params.lambda())
}

/// Time grid, sampling schedule and what to keep for one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub t_final: f64,
    pub dt: f64,
    /// Non-decreasing times in `[0, t_final]`.
    pub sample_times: Vec<f64>,
    pub keep_states: bool,
}

impl TrajectoryConfig {
    pub fn new(t_final: f64, dt: f64, sample_times: Vec<f64>) -> Self {
        TrajectoryConfig {
            t_final,
            dt,
            sample_times,
            keep_states: false,
        }
    }

    pub fn keeping_states(mut self) -> Self {
        self.keep_states = true;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(CollapseError::invalid(
                "t_final",
                format!("must be >= 0, got {:e}", self.t_final),
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CollapseError::NonPositiveStep(self.dt));
        }
        let mut prev = 0.0;
        for &t in &self.sample_times {
            if !(t >= prev && t <= self.t_final) {
                return Err(CollapseError::invalid(
                    "sample_times",
                    format!("must be non-decreasing within [0, {:e}], got {t:e}", self.t_final),
                ));
            }
            prev = t;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub sample_times: Vec<f64>,
    pub observables: Vec<Observables>,
    /// Filled only when the config asks for states.
    pub states: Vec<WaveFunction>,
    pub events: Vec<CollapseEvent>,
}

/// RNG for a standalone trajectory.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` of a master seed; earlier streams never depend on later ones.
pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Runs one jump trajectory with a fresh RNG seeded from `seed`.
pub fn run_trajectory(
    state0: &WaveFunction,
    h: &Hamiltonian,
    params: &CollapseParams,
    config: &TrajectoryConfig,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let mut rng = rng_from_seed(seed);
    let mut record = TrajectoryRecord {
        seed,
        sample_times: config.sample_times.clone(),
        observables: Vec::with_capacity(config.sample_times.len()),
        states: Vec::new(),
        events: Vec::new(),
    };
    let events = run_trajectory_with(state0, h, params, config, &mut rng, |_, _, psi| {
        record.observables.push(observables(psi));
        if config.keep_states {
            record.states.push(psi.clone());
        }
    })?;
    record.events = events;
    Ok(record)
}

/// Event-driven core: calls `observe(sample_index, time, state)` at every
/// sample time and returns the collapse events in time order.
///
/// Each particle carries its own Poisson clock of rate λ. The unitary leg in
/// front of an event is shortened to land exactly on the event time.
pub fn run_trajectory_with<R, F>(
    state0: &WaveFunction,
    h: &Hamiltonian,
    params: &CollapseParams,
    config: &TrajectoryConfig,
    rng: &mut R,
    mut observe: F,
) -> Result<Vec<CollapseEvent>>
where
    R: Rng + ?Sized,
    F: FnMut(usize, f64, &WaveFunction),
{
    config.validate()?;
    state0.require_normalized()?;
    let grid = *state0.grid();
    let mut evolver = Evolver::new(state0, h, config.dt)?;
    let table = squared_kernel_table(params, &grid);
    let mut state = state0.clone();
    let mut events = Vec::new();
    let mut t = 0.0;
    let mut next_event: Vec<f64> = (0..state.n_particles())
        .map(|_| sample_waiting_time(params.lambda(), rng))
        .collect::<Result<_>>()?;
    let mut k = 0;
    let samples = &config.sample_times;

    loop {
        while k < samples.len() && samples[k] <= t {
            observe(k, samples[k], &state);
            k += 1;
        }
        let (particle, t_event) =
            next_event.iter().copied().enumerate().fold(
                (0, f64::INFINITY),
                |best, (i, te)| if te < best.1 { (i, te) } else { best },
            );
        let t_sample = samples.get(k).copied().unwrap_or(f64::INFINITY);
        let target = t_event.min(t_sample).min(config.t_final);
        if target > t {
            evolver.evolve_in_place(&mut state, target - t)?;
            t = target;
        }
        if t_event <= t && t_event <= config.t_final {
            if t_sample <= t {
                // A sample coinciding with an event sees the pre-collapse state.
                continue;
            }
            let center = sample_center(&state, particle, &table, rng);
            state = apply_collapse(&state, particle, center, params)?;
            events.push(CollapseEvent {
                time: t,
                particle,
                center,
            });
            next_event[particle] = t + sample_waiting_time(params.lambda(), rng)?;
            continue;
        }
        if t >= config.t_final && k == samples.len() {
            break;
        }
    }
    Ok(events)
}

/// Draws a collapse center for `particle` from `p(c)`.
pub fn sample_collapse_center<R: Rng + ?Sized>(
    state: &WaveFunction,
    particle: usize,
    params: &CollapseParams,
    rng: &mut R,
) -> Result<f64> {
    check_particle(state, particle)?;
    state.require_normalized()?;
    Ok(sample_center(
        state,
        particle,
        &squared_kernel_table(params, state.grid()),
        rng,
    ))
}

/// Inverse-CDF draw of a grid center from `p(c)`.
fn sample_center<R: Rng + ?Sized>(state: &WaveFunction, particle: usize, table: &[f64], rng: &mut R) -> f64 {
    let p = probability_density_unchecked(state, particle, table);
    let total: f64 = p.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (j, v) in p.iter().enumerate() {
        acc += v;
        if acc >= u {
            return state.grid().x(j);
        }
    }
    state.grid().x(p.len() - 1)
}

/// Left-lobe amplitude `psi(left)` times conjugated right-lobe amplitude,
/// summed over the left half after shifting the right lobe onto it by
/// `separation`. For two particles both coordinates are shifted together,
/// which probes the center-of-mass coherence.
pub fn lobe_coherence(state: &WaveFunction, separation: f64) -> Complex64 {
    let grid = state.grid();
    let n = grid.n_points();
    let shift = (separation / grid.dx()).round() as usize;
    let mid = n / 2;
    let amps = state.amplitudes();
    match state.n_particles() {
        1 => {
            (0..mid)
                .filter(|i| i + shift < n)
                .map(|i| amps[i] * amps[i + shift].conj())
                .sum::<Complex64>()
                * grid.dx()
        }
        _ => {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..mid {
                for j in 0..mid {
                    if i + shift < n && j + shift < n {
                        acc += amps[i * n + j] * amps[(i + shift) * n + j + shift].conj();
                    }
                }
            }
            acc * grid.dx() * grid.dx()
        }
    }
}
