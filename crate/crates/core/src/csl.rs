//! Continuous spontaneous localization as a norm-preserving stochastic
//! Schrödinger equation.
//!
//! The collapse operators are one smeared density per grid center `c_j`,
//!
//! ```text
//! A_j = sqrt(dx) * sum_i kappa_i g(q_i - c_j),   g(y) = (alpha/pi)^(1/4) exp(-alpha y² / 2)
//! ```
//!
//! with `kappa_i = m_i / m0` under mass-proportional coupling and `kappa_i = 1`
//! under number coupling. The Itô equation
//!
//! ```text
//! d psi = [-i H dt / hbar + sqrt(gamma) sum_j (A_j - <A_j>) dW_j
//!          - gamma/2 sum_j (A_j - <A_j>)² dt] psi
//! ```
//!
//! averages to the Lindblad equation with operators `A_j` and rate `gamma`,
//! whose position-space coherence decay for one particle is
//! `gamma kappa² (1 - exp(-alpha d² / 4))`.
//!
//! Each step applies the unitary split-step and then the linear collapse
//! multiplier `exp(sqrt(gamma) sum_j A_j dB_j)` with `dB_j = dW_j + 2 sqrt(gamma) <A_j> dt`,
//! followed by renormalization. Terms that are constant in position drop out.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CollapseError, Result};
use crate::grw::{rng_from_seed, trajectory_rng, CollapseParams, TrajectoryConfig, TrajectoryRecord};
use crate::propagator::{Hamiltonian, SplitStep};
use crate::qstate::{observables, Grid1D, WaveFunction};
use crate::spectral::PeriodicConvolver;
use crate::AMU;

/// Upper limit on `gamma * dt * sum_j Var(A_j)`, the variance of the per-step norm correction.
pub const MAX_STEP_VARIANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    Number,
    MassProportional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CslParams {
    gamma: f64,
    r_c: f64,
    reference_mass: f64,
    coupling: Coupling,
}

impl CslParams {
    /// Mass-proportional coupling with the atomic mass unit as reference.
    pub fn new(gamma: f64, r_c: f64) -> Result<Self> {
        CslParams::with_coupling(gamma, r_c, AMU, Coupling::MassProportional)
    }

    pub fn with_coupling(gamma: f64, r_c: f64, reference_mass: f64, coupling: Coupling) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(CollapseError::NegativeRate(gamma));
        }
        if !(r_c > 0.0 && r_c.is_finite()) {
            return Err(CollapseError::invalid("r_c", format!("must be positive, got {r_c:e}")));
        }
        if !(reference_mass > 0.0 && reference_mass.is_finite()) {
            return Err(CollapseError::invalid(
                "reference_mass",
                format!("must be positive, got {reference_mass:e}"),
            ));
        }
        Ok(CslParams {
            gamma,
            r_c,
            reference_mass,
            coupling,
        })
    }

    /// Collapse strength, s⁻¹ (the decay rate of far-apart coherences of a unit-coupling particle).
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_c(&self) -> f64 {
        self.r_c
    }

    pub fn alpha(&self) -> f64 {
        1.0 / (self.r_c * self.r_c)
    }

    pub fn reference_mass(&self) -> f64 {
        self.reference_mass
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    /// Coupling factor of a particle of mass `mass`.
    pub fn kappa(&self, mass: f64) -> f64 {
        match self.coupling {
            Coupling::Number => 1.0,
            Coupling::MassProportional => mass / self.reference_mass,
        }
    }

    /// Ensemble coherence decay rate of a single particle at separation `d`.
    pub fn decay_kernel(&self, d: f64, mass: f64) -> f64 {
        let k = self.kappa(mass);
        -self.gamma * k * k * (-0.25 * self.alpha() * d * d).exp_m1()
    }
}

/// CSL parameters whose single-particle decay kernel equals the GRW kernel for any mass.
pub fn match_parameters(grw: &CollapseParams) -> CslParams {
    CslParams {
        gamma: grw.lambda(),
        r_c: grw.r_c(),
        reference_mass: AMU,
        coupling: Coupling::Number,
    }
}

/// Mass-proportional parameters reproducing the GRW kernel for a particle of mass `mass`.
pub fn match_parameters_for_mass(grw: &CollapseParams, mass: f64) -> Result<CslParams> {
    if !(mass > 0.0) {
        return Err(CollapseError::invalid(
            "mass",
            format!("must be positive, got {mass:e}"),
        ));
    }
    let ratio = AMU / mass;
    CslParams::with_coupling(grw.lambda() * ratio * ratio, grw.r_c(), AMU, Coupling::MassProportional)
}

/// Wiener increments for every step and smeared-field mode of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    dt: f64,
    n_modes: usize,
    increments: Vec<f64>,
}

impl NoisePath {
    pub fn sample<R: Rng + ?Sized>(n_steps: usize, n_modes: usize, dt: f64, rng: &mut R) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(CollapseError::NonPositiveStep(dt));
        }
        let sd = dt.sqrt();
        let increments = (0..n_steps * n_modes)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            })
            .collect::<Vec<f64>>();
        Ok(NoisePath {
            dt,
            n_modes,
            increments,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_steps(&self) -> usize {
        self.increments.len().checked_div(self.n_modes).unwrap_or(0)
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn step(&self, k: usize) -> &[f64] {
        &self.increments[k * self.n_modes..(k + 1) * self.n_modes]
    }

    /// Same Brownian path at twice the step: consecutive increments are summed.
    pub fn coarsen(&self) -> NoisePath {
        let m = self.n_modes;
        let steps = self.n_steps() / 2;
        let mut increments = Vec::with_capacity(steps * m);
        for k in 0..steps {
            let (a, b) = (self.step(2 * k), self.step(2 * k + 1));
            increments.extend(a.iter().zip(b).map(|(x, y)| x + y));
        }
        NoisePath {
            dt: 2.0 * self.dt,
            n_modes: m,
            increments,
        }
    }
}

/// Reusable CSL integrator for one grid, particle set and Hamiltonian.
pub struct CslStepper {
    grid: Grid1D,
    params: CslParams,
    h: Hamiltonian,
    kappas: Vec<f64>,
    masses: Vec<f64>,
    smear: PeriodicConvolver,
    /// `sum_j dx g(d_k - c_j) g(-c_j)` by offset `k`; its value at 0 is the diagonal.
    overlap: Vec<f64>,
    unitary: Option<(f64, SplitStep)>,
    means: Vec<f64>,
    field: Vec<f64>,
    buf: Vec<f64>,
}

impl CslStepper {
    pub fn new(state: &WaveFunction, h: &Hamiltonian, params: &CslParams) -> Result<Self> {
        let grid = *state.grid();
        let n = grid.n_points();
        let alpha = params.alpha();
        let pref = (alpha / std::f64::consts::PI).powf(0.25);
        let g: Vec<f64> = (0..n)
            .map(|k| {
                let d = grid.offset_distance(k);
                pref * (-0.5 * alpha * d * d).exp()
            })
            .collect();
        let mut smear = PeriodicConvolver::new(&g);
        let mut overlap = vec![0.0; n];
        smear.convolve(&g, &mut overlap);
        overlap.iter_mut().for_each(|v| *v *= grid.dx());
        Ok(CslStepper {
            grid,
            params: *params,
            h: h.clone(),
            kappas: state.masses().iter().map(|&m| params.kappa(m)).collect(),
            masses: state.masses().to_vec(),
            smear,
            overlap,
            unitary: None,
            means: vec![0.0; n],
            field: vec![0.0; n],
            buf: vec![0.0; n],
        })
    }

    pub fn n_modes(&self) -> usize {
        self.grid.n_points()
    }

    fn check_state(&self, state: &WaveFunction) -> Result<()> {
        if state.grid() != &self.grid || state.masses() != self.masses.as_slice() {
            return Err(CollapseError::ShapeMismatch("state does not match the stepper".into()));
        }
        Ok(())
    }

    /// Fills `self.means` with `<A_j>` and returns `sum_j Var(A_j)`.
    fn moments(&mut self, state: &WaveFunction) -> f64 {
        let n = self.grid.n_points();
        let dx = self.grid.dx();
        let sdx = dx.sqrt();
        self.means.iter_mut().for_each(|v| *v = 0.0);
        let mut second = 0.0;
        for (i, &k) in self.kappas.iter().enumerate() {
            let rho = state.marginal_density(i);
            self.smear.convolve(&rho, &mut self.buf);
            for (m, b) in self.means.iter_mut().zip(&self.buf) {
                *m += sdx * dx * k * b;
            }
            second += k * k * self.overlap[0];
        }
        if self.kappas.len() == 2 {
            let amps = state.amplitudes();
            let mut cross = 0.0;
            for a in 0..n {
                for b in 0..n {
                    cross += amps[a * n + b].norm_sqr() * self.overlap[(a + n - b) % n];
                }
            }
            second += 2.0 * self.kappas[0] * self.kappas[1] * cross * dx * dx;
        }
        let first: f64 = self.means.iter().map(|m| m * m).sum();
        (second - first).max(0.0)
    }

    fn unitary_for(&mut self, dt: f64) -> &mut SplitStep {
        let rebuild = !matches!(&self.unitary, Some((d, _)) if *d == dt);
        if rebuild {
            self.unitary = Some((dt, SplitStep::new(&self.grid, &self.masses, &self.h, dt)));
        }
        &mut self.unitary.as_mut().unwrap().1
    }

    /// One step driven by the given Wiener increments, one per grid center.
    pub fn step_with_noise(&mut self, state: &mut WaveFunction, dt: f64, dw: &[f64]) -> Result<()> {
        self.check_state(state)?;
        self.h.check_step(dt)?;
        if dw.len() != self.n_modes() {
            return Err(CollapseError::ShapeMismatch(format!(
                "{} noise increments for {} modes",
                dw.len(),
                self.n_modes()
            )));
        }
        self.unitary_for(dt).apply(state.amplitudes_mut());
        let gamma = self.params.gamma();
        if gamma > 0.0 {
            let var = self.moments(state);
            if gamma * dt * var > MAX_STEP_VARIANCE {
                return Err(CollapseError::StepTooLarge(format!(
                    "gamma dt Var = {:e} exceeds {MAX_STEP_VARIANCE:e}",
                    gamma * dt * var
                )));
            }
            let sg = gamma.sqrt();
            for (b, (w, m)) in self.buf.iter_mut().zip(dw.iter().zip(&self.means)) {
                *b = w + 2.0 * sg * m * dt;
            }
            self.smear.convolve(&self.buf, &mut self.field);
            let sdx = self.grid.dx().sqrt();
            self.apply_multiplier(state, sg * sdx);
        }
        state.normalize_in_place()
    }

    /// Multiplies by `exp(scale * sum_i kappa_i field(x_i))`, shifted by the field maximum for range safety.
    fn apply_multiplier(&self, state: &mut WaveFunction, scale: f64) {
        let n = self.grid.n_points();
        let peak = self.field.iter().cloned().fold(f64::MIN, f64::max);
        let per: Vec<Vec<f64>> = self
            .kappas
            .iter()
            .map(|k| self.field.iter().map(|f| (scale * k * (f - peak)).exp()).collect())
            .collect();
        let amps = state.amplitudes_mut();
        match per.as_slice() {
            [one] => amps.iter_mut().zip(one).for_each(|(z, f)| *z *= *f),
            [a, b] => {
                for i in 0..n {
                    amps[i * n..(i + 1) * n]
                        .iter_mut()
                        .zip(b)
                        .for_each(|(z, f)| *z *= a[i] * f);
                }
            }
            _ => unreachable!("states have one or two particles"),
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, state: &mut WaveFunction, dt: f64, rng: &mut R) -> Result<()> {
        if !(dt > 0.0) {
            return Err(CollapseError::NonPositiveStep(dt));
        }
        let sd = dt.sqrt();
        let dw: Vec<f64> = if self.params.gamma() > 0.0 {
            (0..self.n_modes())
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    sd * z
                })
                .collect::<Vec<f64>>()
        } else {
            vec![0.0; self.n_modes()]
        };
        self.step_with_noise(state, dt, &dw)
    }
}

/// One stochastic step.
pub fn csl_step<R: Rng + ?Sized>(
    state: &WaveFunction,
    h: &Hamiltonian,
    params: &CslParams,
    dt: f64,
    rng: &mut R,
) -> Result<WaveFunction> {
    state.require_normalized()?;
    let mut out = state.clone();
    CslStepper::new(state, h, params)?.step(&mut out, dt, rng)?;
    Ok(out)
}

/// Integrates along a prescribed noise path.
pub fn evolve_with_noise(
    state: &WaveFunction,
    h: &Hamiltonian,
    params: &CslParams,
    noise: &NoisePath,
) -> Result<WaveFunction> {
    state.require_normalized()?;
    let mut stepper = CslStepper::new(state, h, params)?;
    if noise.n_modes() != stepper.n_modes() {
        return Err(CollapseError::ShapeMismatch(format!(
            "noise has {} modes, grid has {}",
            noise.n_modes(),
            stepper.n_modes()
        )));
    }
    let mut out = state.clone();
    for k in 0..noise.n_steps() {
        stepper.step_with_noise(&mut out, noise.dt(), noise.step(k))?;
    }
    Ok(out)
}

/// CSL counterpart of [`crate::grw::run_trajectory`]; the event list stays empty.
pub fn run_csl_trajectory(
    state0: &WaveFunction,
    h: &Hamiltonian,
    params: &CslParams,
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
    run_csl_with(state0, h, params, config, &mut rng, |_, _, psi| {
        record.observables.push(observables(psi));
        if config.keep_states {
            record.states.push(psi.clone());
        }
    })?;
    Ok(record)
}

/// Integrates to `config.t_final`, calling `observe` at each sample time.
/// Steps are shortened where needed to land on sample times.
pub fn run_csl_with<R, F>(
    state0: &WaveFunction,
    h: &Hamiltonian,
    params: &CslParams,
    config: &TrajectoryConfig,
    rng: &mut R,
    mut observe: F,
) -> Result<()>
where
    R: Rng + ?Sized,
    F: FnMut(usize, f64, &WaveFunction),
{
    config.validate()?;
    state0.require_normalized()?;
    let mut stepper = CslStepper::new(state0, h, params)?;
    let mut state = state0.clone();
    let mut t = 0.0;
    let mut k = 0;
    let samples = &config.sample_times;
    loop {
        while k < samples.len() && samples[k] <= t * (1.0 + 1e-12) {
            observe(k, samples[k], &state);
            k += 1;
        }
        let target = samples.get(k).copied().unwrap_or(config.t_final).min(config.t_final);
        if t >= config.t_final * (1.0 - 1e-12) && k == samples.len() {
            break;
        }
        let remaining = target - t;
        let dt = if remaining < config.dt * (1.0 + 1e-9) {
            remaining
        } else {
            config.dt
        };
        if dt <= 0.0 {
            t = target;
            continue;
        }
        stepper.step(&mut state, dt, rng)?;
        t = if dt == remaining { target } else { t + dt };
    }
    Ok(())
}

/// Stream `index` of a master seed, shared with the GRW runner.
pub fn csl_rng(master_seed: u64, index: u64) -> rand_chacha::ChaCha8Rng {
    trajectory_rng(master_seed, index)
}
