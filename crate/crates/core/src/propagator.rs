//! Unitary evolution between collapses: Strang-split spectral stepping.
//!
//! One step is `exp(-iV dt/2ħ) · F⁻¹ exp(-iħk² dt/2m) F · exp(-iV dt/2ħ)`,
//! applied along every particle axis. Each factor is unitary on the grid, so
//! the norm is conserved to round-off for any `dt`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{CollapseError, Result};
use crate::qstate::{Grid1D, WaveFunction};
use crate::spectral::{transpose_square, wavenumbers, Fft1d};
use crate::HBAR;

/// Probability allowed in the outer 5% bands before evolution is aborted.
pub const EDGE_PROBABILITY_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Free,
    /// `V(x) = m ω² (x - x_mid)² / 2` for every particle, `x_mid` the grid midpoint.
    Harmonic {
        omega: f64,
    },
    /// Same potential (J) for every particle, one value per grid point.
    External(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    potential: Potential,
}

impl Hamiltonian {
    pub fn free() -> Self {
        Hamiltonian {
            potential: Potential::Free,
        }
    }

    pub fn harmonic(omega: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(CollapseError::invalid(
                "omega",
                format!("must be positive, got {omega:e}"),
            ));
        }
        Ok(Hamiltonian {
            potential: Potential::Harmonic { omega },
        })
    }

    pub fn external(grid: &Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(CollapseError::ShapeMismatch(format!(
                "potential has {} entries, grid has {}",
                values.len(),
                grid.n_points()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CollapseError::invalid("potential", "non-finite entry"));
        }
        Ok(Hamiltonian {
            potential: Potential::External(values),
        })
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn is_free(&self) -> bool {
        matches!(self.potential, Potential::Free)
    }

    /// Potential energy at every grid point for a particle of mass `mass`.
    pub fn potential_values(&self, grid: &Grid1D, mass: f64) -> Vec<f64> {
        match &self.potential {
            Potential::Free => vec![0.0; grid.n_points()],
            Potential::Harmonic { omega } => {
                let mid = grid.midpoint();
                grid.points()
                    .iter()
                    .map(|x| 0.5 * mass * omega * omega * (x - mid) * (x - mid))
                    .collect()
            }
            Potential::External(v) => v.clone(),
        }
    }

    pub(crate) fn check_step(&self, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(CollapseError::NonPositiveStep(dt));
        }
        if let Potential::Harmonic { omega } = self.potential {
            let period = 2.0 * PI / omega;
            if dt > period / 20.0 {
                return Err(CollapseError::StepTooLarge(format!(
                    "dt = {dt:e} s exceeds 1/20 of the oscillator period {period:e} s"
                )));
            }
        }
        Ok(())
    }
}

/// Precomputed phase factors for one step length.
#[derive(Clone)]
pub(crate) struct SplitStep {
    n: usize,
    half_potential: Option<Vec<Vec<Complex64>>>,
    kinetic: Vec<Vec<Complex64>>,
    fft: Fft1d,
}

impl SplitStep {
    pub(crate) fn new(grid: &Grid1D, masses: &[f64], h: &Hamiltonian, dt: f64) -> Self {
        let ks = wavenumbers(grid);
        let kinetic = masses
            .iter()
            .map(|&m| {
                ks.iter()
                    .map(|k| Complex64::from_polar(1.0, -HBAR * k * k * dt / (2.0 * m)))
                    .collect()
            })
            .collect();
        let half_potential = if h.is_free() {
            None
        } else {
            Some(
                masses
                    .iter()
                    .map(|&m| {
                        h.potential_values(grid, m)
                            .iter()
                            .map(|v| Complex64::from_polar(1.0, -v * dt / (2.0 * HBAR)))
                            .collect()
                    })
                    .collect(),
            )
        };
        SplitStep {
            n: grid.n_points(),
            half_potential,
            kinetic,
            fft: Fft1d::new(grid.n_points()),
        }
    }

    fn apply_potential(&self, amps: &mut [Complex64]) {
        let Some(hv) = &self.half_potential else {
            return;
        };
        let n = self.n;
        if hv.len() == 1 {
            for (z, p) in amps.iter_mut().zip(&hv[0]) {
                *z *= p;
            }
        } else {
            for i in 0..n {
                for j in 0..n {
                    amps[i * n + j] *= hv[0][i] * hv[1][j];
                }
            }
        }
    }

    pub(crate) fn apply(&mut self, amps: &mut [Complex64]) {
        let n = self.n;
        self.apply_potential(amps);
        if self.kinetic.len() == 1 {
            self.fft.forward(amps);
            for (z, p) in amps.iter_mut().zip(&self.kinetic[0]) {
                *z *= p;
            }
            self.fft.inverse(amps);
        } else {
            self.fft.forward(amps);
            transpose_square(amps, n);
            self.fft.forward(amps);
            // amps[j * n + i] now holds the (k_i, k_j) component.
            for j in 0..n {
                for i in 0..n {
                    amps[j * n + i] *= self.kinetic[0][i] * self.kinetic[1][j];
                }
            }
            self.fft.inverse(amps);
            transpose_square(amps, n);
            self.fft.inverse(amps);
        }
        self.apply_potential(amps);
    }
}

fn check_boundary(state: &WaveFunction, time: f64) -> Result<()> {
    let p = state.edge_probability();
    if p > EDGE_PROBABILITY_LIMIT {
        return Err(CollapseError::AbsorbedAtBoundary { probability: p, time });
    }
    Ok(())
}

/// One split-step of length `dt`.
pub fn step(state: &WaveFunction, h: &Hamiltonian, dt: f64) -> Result<WaveFunction> {
    h.check_step(dt)?;
    let mut out = state.clone();
    SplitStep::new(state.grid(), state.masses(), h, dt).apply(out.amplitudes_mut());
    check_boundary(&out, dt)?;
    Ok(out)
}

/// `floor(t_total/dt)` steps of `dt` followed by one fractional step.
pub fn evolve(state: &WaveFunction, h: &Hamiltonian, t_total: f64, dt: f64) -> Result<WaveFunction> {
    let mut out = state.clone();
    Evolver::new(state, h, dt)?.evolve_in_place(&mut out, t_total)?;
    Ok(out)
}

/// Reusable evolution engine for one (grid, masses, Hamiltonian, dt).
#[derive(Clone)]
pub struct Evolver {
    grid: Grid1D,
    masses: Vec<f64>,
    h: Hamiltonian,
    dt: f64,
    full: SplitStep,
    /// Accumulated evolution time, only used to label boundary errors.
    clock: f64,
}

impl Evolver {
    pub fn new(state: &WaveFunction, h: &Hamiltonian, dt: f64) -> Result<Self> {
        h.check_step(dt)?;
        Ok(Evolver {
            grid: *state.grid(),
            masses: state.masses().to_vec(),
            h: h.clone(),
            dt,
            full: SplitStep::new(state.grid(), state.masses(), h, dt),
            clock: 0.0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.h
    }

    pub fn evolve_in_place(&mut self, state: &mut WaveFunction, t_total: f64) -> Result<()> {
        if !(t_total >= 0.0 && t_total.is_finite()) {
            return Err(CollapseError::invalid(
                "t_total",
                format!("must be >= 0, got {t_total:e}"),
            ));
        }
        if t_total == 0.0 {
            return Ok(());
        }
        if self.h.is_free() {
            // Without a potential the kinetic factor is exact, so the whole
            // interval collapses into one step.
            SplitStep::new(&self.grid, &self.masses, &self.h, t_total).apply(state.amplitudes_mut());
            self.clock += t_total;
            return check_boundary(state, self.clock);
        }
        let n_full = (t_total / self.dt).floor() as usize;
        let rest = t_total - n_full as f64 * self.dt;
        for _ in 0..n_full {
            self.full.apply(state.amplitudes_mut());
            self.clock += self.dt;
            check_boundary(state, self.clock)?;
        }
        if rest > 1e-12 * self.dt {
            SplitStep::new(&self.grid, &self.masses, &self.h, rest).apply(state.amplitudes_mut());
            self.clock += rest;
            check_boundary(state, self.clock)?;
        }
        Ok(())
    }
}

/// `<H>` = kinetic energy plus `<V>` summed over particles.
pub fn energy(state: &WaveFunction, h: &Hamiltonian) -> f64 {
    let kinetic = crate::qstate::observables(state).kinetic_energy;
    if h.is_free() {
        return kinetic;
    }
    let grid = state.grid();
    let norm = state.norm_squared();
    let potential: f64 = state
        .masses()
        .iter()
        .enumerate()
        .map(|(p, &m)| {
            let v = h.potential_values(grid, m);
            state
                .marginal_density(p)
                .iter()
                .zip(&v)
                .map(|(r, v)| r * v)
                .sum::<f64>()
        })
        .sum::<f64>()
        * grid.dx()
        / norm;
    kinetic + potential
}
