//! Discretized wave functions, density matrices and their observables.
//!
//! Gaussian width convention, used by every constructor in this crate:
//!
//! ```text
//! psi(x) ∝ exp(-(x - x0)^2 / (2 w^2)) · exp(i p (x - x0) / ħ)
//! ```
//!
//! so `|psi|^2` has variance `w^2 / 2` and a packet at rest carries kinetic
//! energy `ħ^2 / (4 m w^2)`.
//!
//! Two-particle amplitudes are stored row-major: index `i * n + j` holds
//! `psi(x_i, y_j)` with particle 0 on the slow axis.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{CollapseError, Result};
use crate::spectral::{transpose_square, wavenumbers, Fft1d};
use crate::HBAR;

/// Tolerance on `|norm - 1|` accepted by operations that require a normalized state.
pub const NORM_TOLERANCE: f64 = 1e-6;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Uniform periodic grid `x_j = x_min + j dx`, `j = 0..n_points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(CollapseError::invalid(
                "n_points",
                format!("must be a power of two >= 8, got {n_points}"),
            ));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(CollapseError::invalid(
                "x_max",
                format!("need finite x_min < x_max, got [{x_min:e}, {x_max:e}]"),
            ));
        }
        Ok(Grid1D { x_min, x_max, n_points })
    }

    /// Grid of `n_points` symmetric about the origin.
    pub fn centered(half_width: f64, n_points: usize) -> Result<Self> {
        Grid1D::new(-half_width, half_width, n_points)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n_points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    /// The grid point `x_{n/2}`; mirror images are taken about it.
    pub fn midpoint(&self) -> f64 {
        self.x(self.n_points / 2)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Index of the grid point nearest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let j = ((x - self.x_min) / self.dx()).round();
        j.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    /// Minimum-image distance on the periodic grid.
    pub fn periodic_distance(&self, a: f64, b: f64) -> f64 {
        let l = self.length();
        let d = (a - b).rem_euclid(l);
        d.min(l - d)
    }

    /// Minimum-image distance for an index offset.
    pub(crate) fn offset_distance(&self, k: usize) -> f64 {
        let k = k % self.n_points;
        k.min(self.n_points - k) as f64 * self.dx()
    }

    /// Number of points in each outer band watched by the domain-escape check.
    pub fn edge_band(&self) -> usize {
        (self.n_points / 20).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid1D,
    masses: Vec<f64>,
    amplitudes: Vec<Complex64>,
}

impl WaveFunction {
    pub fn from_amplitudes(grid: Grid1D, masses: Vec<f64>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if masses.is_empty() || masses.len() > 2 {
            return Err(CollapseError::invalid(
                "masses",
                format!("1 or 2 particles supported, got {}", masses.len()),
            ));
        }
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(CollapseError::invalid("masses", format!("must be positive, got {m:e}")));
        }
        let expected = grid.n_points().pow(masses.len() as u32);
        if amplitudes.len() != expected {
            return Err(CollapseError::ShapeMismatch(format!(
                "expected {expected} amplitudes, got {}",
                amplitudes.len()
            )));
        }
        if amplitudes.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(CollapseError::invalid("amplitudes", "non-finite entry"));
        }
        Ok(WaveFunction {
            grid,
            masses,
            amplitudes,
        })
    }

    pub(crate) fn with_amplitudes(&self, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), self.amplitudes.len());
        WaveFunction {
            grid: self.grid,
            masses: self.masses.clone(),
            amplitudes,
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn n_particles(&self) -> usize {
        self.masses.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    /// Volume element `dx^n_particles`.
    pub fn cell(&self) -> f64 {
        self.grid.dx().powi(self.n_particles() as i32)
    }

    /// `sum |psi|^2 dx^n`.
    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell()
    }

    pub fn normalize(&self) -> Result<Self> {
        let mut out = self.clone();
        out.normalize_in_place()?;
        Ok(out)
    }

    pub(crate) fn normalize_in_place(&mut self) -> Result<()> {
        let n2 = self.norm_squared();
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(CollapseError::ZeroNorm);
        }
        let s = 1.0 / n2.sqrt();
        for z in self.amplitudes.iter_mut() {
            *z *= s;
        }
        Ok(())
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        let n2 = self.norm_squared();
        if (n2 - 1.0).abs() > NORM_TOLERANCE {
            return Err(CollapseError::NotNormalized(n2));
        }
        Ok(())
    }

    /// `<self|other>` by quadrature.
    pub fn inner(&self, other: &WaveFunction) -> Complex64 {
        debug_assert_eq!(self.amplitudes.len(), other.amplitudes.len());
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.cell()
    }

    /// `|<a|b>|^2 / (<a|a><b|b>)`.
    pub fn fidelity(&self, other: &WaveFunction) -> f64 {
        self.inner(other).norm_sqr() / (self.norm_squared() * other.norm_squared())
    }

    /// Complex conjugate; evolving the conjugate forward runs the original backward.
    pub fn time_reversed(&self) -> Self {
        self.with_amplitudes(self.amplitudes.iter().map(|z| z.conj()).collect())
    }

    /// Joint state of two independent single-particle states.
    pub fn product(a: &WaveFunction, b: &WaveFunction) -> Result<Self> {
        if a.n_particles() != 1 || b.n_particles() != 1 || a.grid != b.grid {
            return Err(CollapseError::ShapeMismatch(
                "product needs two single-particle states on the same grid".into(),
            ));
        }
        let mut amps = Vec::with_capacity(a.amplitudes.len() * b.amplitudes.len());
        for za in &a.amplitudes {
            for zb in &b.amplitudes {
                amps.push(za * zb);
            }
        }
        WaveFunction::from_amplitudes(a.grid, vec![a.masses[0], b.masses[0]], amps)
    }

    /// Normalized `sum_k c_k |psi_k>`.
    pub fn superpose(terms: &[(Complex64, &WaveFunction)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| CollapseError::invalid("terms", "empty superposition"))?;
        let mut amps = vec![C0; first.amplitudes.len()];
        for (c, psi) in terms {
            if psi.grid != first.grid || psi.masses != first.masses {
                return Err(CollapseError::ShapeMismatch(
                    "superposed states must share grid and masses".into(),
                ));
            }
            for (acc, z) in amps.iter_mut().zip(&psi.amplitudes) {
                *acc += c * z;
            }
        }
        first.with_amplitudes(amps).normalize()
    }

    /// Marginal position density of one particle, `int |psi|^2 d(other)`.
    pub fn marginal_density(&self, particle: usize) -> Vec<f64> {
        let n = self.grid.n_points();
        match self.n_particles() {
            1 => self.amplitudes.iter().map(|z| z.norm_sqr()).collect(),
            _ => {
                let dx = self.grid.dx();
                let mut out = vec![0.0; n];
                for i in 0..n {
                    for j in 0..n {
                        let p = self.amplitudes[i * n + j].norm_sqr() * dx;
                        if particle == 0 {
                            out[i] += p;
                        } else {
                            out[j] += p;
                        }
                    }
                }
                out
            }
        }
    }

    /// Probability that `particle` is found strictly left of the grid midpoint.
    pub fn left_probability(&self, particle: usize) -> f64 {
        let mid = self.grid.n_points() / 2;
        self.marginal_density(particle)[..mid].iter().sum::<f64>() * self.grid.dx()
    }

    /// Probability mass of each particle inside the outer edge bands; the maximum over particles.
    pub fn edge_probability(&self) -> f64 {
        let n = self.grid.n_points();
        let band = self.grid.edge_band();
        (0..self.n_particles())
            .map(|p| {
                let rho = self.marginal_density(p);
                (rho[..band].iter().sum::<f64>() + rho[n - band..].iter().sum::<f64>()) * self.grid.dx()
            })
            .fold(0.0, f64::max)
    }

    /// Amplitudes in wavenumber space (unnormalized DFT along every particle axis).
    pub(crate) fn momentum_amplitudes(&self) -> Vec<Complex64> {
        let n = self.grid.n_points();
        let mut fft = Fft1d::new(n);
        let mut buf = self.amplitudes.clone();
        fft.forward(&mut buf);
        if self.n_particles() == 2 {
            transpose_square(&mut buf, n);
            fft.forward(&mut buf);
            transpose_square(&mut buf, n);
        }
        buf
    }
}

fn check_lobe_fits(grid: &Grid1D, center: f64, width: f64) -> Result<()> {
    let min = 4.0 * grid.dx();
    if !(width >= min) {
        return Err(CollapseError::GridTooCoarse { width, min });
    }
    if center - 5.0 * width < grid.x_min() || center + 5.0 * width > grid.x_max() {
        return Err(CollapseError::OutOfDomain(format!(
            "packet at {center:e} m with width {width:e} m needs 5 widths of margin inside [{:e}, {:e}]",
            grid.x_min(),
            grid.x_max()
        )));
    }
    Ok(())
}

fn gaussian_amplitudes(grid: &Grid1D, center: f64, width: f64, momentum: f64) -> Vec<Complex64> {
    let k0 = momentum / HBAR;
    grid.points()
        .iter()
        .map(|&x| {
            let u = x - center;
            Complex64::from_polar((-u * u / (2.0 * width * width)).exp(), k0 * u)
        })
        .collect()
}

/// Normalized Gaussian packet in the documented width convention.
pub fn gaussian_packet(grid: &Grid1D, center: f64, width: f64, momentum: f64, mass: f64) -> Result<WaveFunction> {
    check_lobe_fits(grid, center, width)?;
    let k_max = std::f64::consts::PI / grid.dx();
    if (momentum / HBAR).abs() + 5.0 / width > k_max {
        return Err(CollapseError::OutOfDomain(format!(
            "momentum {momentum:e} kg m/s is not resolved by the grid"
        )));
    }
    WaveFunction::from_amplitudes(*grid, vec![mass], gaussian_amplitudes(grid, center, width, momentum))?.normalize()
}

/// `a|left> + b|right>`: two equal-width lobes at `midpoint ∓ separation/2`.
///
/// `a` and `b` are rescaled so that `|a|^2 + |b|^2 = 1`; the lobe `a` sits on the left.
pub fn two_peak_superposition(
    grid: &Grid1D,
    a: Complex64,
    b: Complex64,
    separation: f64,
    width: f64,
    mass: f64,
) -> Result<WaveFunction> {
    if !(separation >= 0.0) {
        return Err(CollapseError::invalid("separation", "must be non-negative"));
    }
    let scale = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if !(scale > 0.0) {
        return Err(CollapseError::invalid("a, b", "both weights are zero"));
    }
    let (a, b) = (a / scale, b / scale);
    let mid = grid.midpoint();
    let left = gaussian_packet(grid, mid - separation / 2.0, width, 0.0, mass)?;
    let right = gaussian_packet(grid, mid + separation / 2.0, width, 0.0, mass)?;
    WaveFunction::superpose(&[(a, &left), (b, &right)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassDensityField {
    pub grid: Grid1D,
    /// kg/m at each grid point.
    pub values: Vec<f64>,
    pub time: f64,
}

impl MassDensityField {
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }
}

/// `rho(x) = sum_i m_i rho_i(x)` with `rho_i` the marginal density of particle `i`.
pub fn mass_density(state: &WaveFunction) -> Result<MassDensityField> {
    state.require_normalized()?;
    let n = state.grid().n_points();
    let mut values = vec![0.0; n];
    for (p, &m) in state.masses().iter().enumerate() {
        for (v, r) in values.iter_mut().zip(state.marginal_density(p)) {
            *v += m * r;
        }
    }
    Ok(MassDensityField {
        grid: *state.grid(),
        values,
        time: 0.0,
    })
}

/// Expectation values of the state. For two particles the position moments
/// are those of the center-of-mass coordinate, `mean_p` is the total
/// momentum and `kinetic_energy` the sum over particles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub norm: f64,
    pub mean_x: f64,
    pub var_x: f64,
    pub mean_p: f64,
    pub kinetic_energy: f64,
}

pub fn observables(state: &WaveFunction) -> Observables {
    let grid = state.grid();
    let n = grid.n_points();
    let norm = state.norm_squared();
    let xs = grid.points();
    let masses = state.masses();
    let total = state.total_mass();

    let (mut sx, mut sxx, mut w) = (0.0, 0.0, 0.0);
    match state.n_particles() {
        1 => {
            for (z, &x) in state.amplitudes().iter().zip(&xs) {
                let p = z.norm_sqr();
                w += p;
                sx += p * x;
                sxx += p * x * x;
            }
        }
        _ => {
            for i in 0..n {
                for j in 0..n {
                    let p = state.amplitudes()[i * n + j].norm_sqr();
                    let x = (masses[0] * xs[i] + masses[1] * xs[j]) / total;
                    w += p;
                    sx += p * x;
                    sxx += p * x * x;
                }
            }
        }
    }
    let mean_x = if w > 0.0 { sx / w } else { 0.0 };
    let var_x = if w > 0.0 {
        (sxx / w - mean_x * mean_x).max(0.0)
    } else {
        0.0
    };

    let ks = wavenumbers(grid);
    let phi = state.momentum_amplitudes();
    let (mut wk, mut sp, mut ke) = (0.0, 0.0, 0.0);
    match state.n_particles() {
        1 => {
            for (z, &k) in phi.iter().zip(&ks) {
                let p = z.norm_sqr();
                wk += p;
                sp += p * k;
                ke += p * k * k / (2.0 * masses[0]);
            }
        }
        _ => {
            for i in 0..n {
                for j in 0..n {
                    let p = phi[i * n + j].norm_sqr();
                    wk += p;
                    sp += p * (ks[i] + ks[j]);
                    ke += p * (ks[i] * ks[i] / (2.0 * masses[0]) + ks[j] * ks[j] / (2.0 * masses[1]));
                }
            }
        }
    }
    let (mean_p, kinetic_energy) = if wk > 0.0 {
        (HBAR * sp / wk, HBAR * HBAR * ke / wk)
    } else {
        (0.0, 0.0)
    };
    Observables {
        norm,
        mean_x,
        var_x,
        mean_p,
        kinetic_energy,
    }
}

/// Position-basis density matrix `rho(x_i, x_j)` of one particle, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    grid: Grid1D,
    mass: f64,
    elements: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_elements(grid: Grid1D, mass: f64, elements: Vec<Complex64>) -> Result<Self> {
        let n = grid.n_points();
        if elements.len() != n * n {
            return Err(CollapseError::ShapeMismatch(format!(
                "expected {} elements, got {}",
                n * n,
                elements.len()
            )));
        }
        Ok(DensityMatrix { grid, mass, elements })
    }

    pub fn from_pure(state: &WaveFunction) -> Result<Self> {
        if state.n_particles() != 1 {
            return Err(CollapseError::ShapeMismatch(
                "density matrices are single-particle".into(),
            ));
        }
        let psi = state.amplitudes();
        let mut elements = Vec::with_capacity(psi.len() * psi.len());
        for a in psi {
            for b in psi {
                elements.push(a * b.conj());
            }
        }
        Ok(DensityMatrix {
            grid: *state.grid(),
            mass: state.masses()[0],
            elements,
        })
    }

    /// Empty accumulator for ensemble averages.
    pub fn zeros(grid: Grid1D, mass: f64) -> Self {
        let n = grid.n_points();
        DensityMatrix {
            grid,
            mass,
            elements: vec![C0; n * n],
        }
    }

    /// `self += weight |psi><psi|`.
    pub fn add_pure(&mut self, state: &WaveFunction, weight: f64) {
        let psi = state.amplitudes();
        let n = psi.len();
        debug_assert_eq!(n * n, self.elements.len());
        for (i, a) in psi.iter().enumerate() {
            let wa = a * weight;
            let row = &mut self.elements[i * n..(i + 1) * n];
            for (e, b) in row.iter_mut().zip(psi) {
                *e += wa * b.conj();
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for e in self.elements.iter_mut() {
            *e *= factor;
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn elements(&self) -> &[Complex64] {
        &self.elements
    }

    pub(crate) fn elements_mut(&mut self) -> &mut [Complex64] {
        &mut self.elements
    }

    pub fn element(&self, i: usize, j: usize) -> Complex64 {
        self.elements[i * self.grid.n_points() + j]
    }

    pub fn trace(&self) -> f64 {
        let n = self.grid.n_points();
        (0..n).map(|i| self.elements[i * n + i].re).sum::<f64>() * self.grid.dx()
    }

    /// `Tr rho^2`.
    pub fn purity(&self) -> f64 {
        let dx = self.grid.dx();
        self.elements.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx * dx
    }

    /// Largest `|rho_ij - conj(rho_ji)| dx`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.grid.n_points();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.element(i, j) - self.element(j, i).conj()).norm());
            }
        }
        worst * self.grid.dx()
    }

    /// Diagonal `rho(x, x)`.
    pub fn populations(&self) -> Vec<f64> {
        let n = self.grid.n_points();
        (0..n).map(|i| self.elements[i * n + i].re).collect()
    }

    /// Eigenvalues of the operator represented on the grid (`rho_ij dx`).
    pub fn eigenvalues(&self) -> Vec<f64> {
        operator_eigenvalues(&self.grid, &self.elements)
    }

    /// `(1/2) || rho - sigma ||_1`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.grid != other.grid {
            return Err(CollapseError::ShapeMismatch(
                "density matrices on different grids".into(),
            ));
        }
        let diff: Vec<Complex64> = self.elements.iter().zip(&other.elements).map(|(a, b)| a - b).collect();
        let eig = operator_eigenvalues(&self.grid, &diff);
        Ok(0.5 * eig.iter().map(|v| v.abs()).sum::<f64>())
    }
}

fn operator_eigenvalues(grid: &Grid1D, elements: &[Complex64]) -> Vec<f64> {
    let n = grid.n_points();
    let dx = grid.dx();
    // Symmetrize so round-off asymmetry cannot leak into the solver.
    let m = DMatrix::from_fn(n, n, |i, j| {
        0.5 * (elements[i * n + j] + elements[j * n + i].conj()) * dx
    });
    m.symmetric_eigenvalues().iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const PROTON: f64 = 1.67e-27;

    fn grid() -> Grid1D {
        Grid1D::centered(2e-7, 256).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid1D::new(0.0, 1.0, 100).is_err());
        assert!(Grid1D::new(0.0, 1.0, 4).is_err());
        assert!(Grid1D::new(1.0, 0.0, 16).is_err());
        let g = Grid1D::new(0.0, 1.0, 16).unwrap();
        assert_relative_eq!(g.dx(), 1.0 / 16.0);
        assert_relative_eq!(g.periodic_distance(0.05, 0.95), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn centered_packet_has_zero_mean_and_unit_norm() {
        let g = grid();
        let psi = gaussian_packet(&g, 0.0, 1e-8, 0.0, PROTON).unwrap();
        let o = observables(&psi);
        assert!((o.norm - 1.0).abs() < 1e-9);
        assert!(o.mean_x.abs() < g.dx());
        assert!(o.mean_p.abs() < 1e-40);
    }

    #[test]
    fn packet_variance_follows_width_convention() {
        let g = grid();
        let w = 1e-8;
        let psi = gaussian_packet(&g, 0.0, w, 0.0, PROTON).unwrap();
        // Direct quadrature of the constructed array.
        let xs = g.points();
        let var: f64 = psi
            .amplitudes()
            .iter()
            .zip(&xs)
            .map(|(z, x)| z.norm_sqr() * x * x)
            .sum::<f64>()
            * g.dx();
        assert_relative_eq!(var, w * w / 2.0, max_relative = 1e-9);
    }

    #[test]
    fn packet_momentum_is_reproduced() {
        let g = grid();
        let w = 1e-8;
        let p = 10.0 * HBAR / w;
        let psi = gaussian_packet(&g, 0.0, w, p, PROTON).unwrap();
        assert_relative_eq!(observables(&psi).mean_p, p, max_relative = 0.01);
    }

    #[test]
    fn packet_kinetic_energy_matches_spectral_oracle() {
        let g = grid();
        let w = 1e-8;
        let psi = gaussian_packet(&g, 0.0, w, 0.0, PROTON).unwrap();
        // Oracle: naive O(n^2) DFT of the constructed array.
        let n = g.n_points();
        let ks = wavenumbers(&g);
        let mut num = 0.0;
        let mut den = 0.0;
        for (m, &k) in ks.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, z) in psi.amplitudes().iter().enumerate() {
                let ph = -2.0 * std::f64::consts::PI * (m * j) as f64 / n as f64;
                acc += z * Complex64::from_polar(1.0, ph);
            }
            num += acc.norm_sqr() * k * k;
            den += acc.norm_sqr();
        }
        let oracle = HBAR * HBAR * num / den / (2.0 * PROTON);
        let ke = observables(&psi).kinetic_energy;
        assert_relative_eq!(ke, oracle, max_relative = 1e-9);
        assert_relative_eq!(ke, HBAR * HBAR / (4.0 * PROTON * w * w), max_relative = 1e-6);
    }

    #[test]
    fn packet_preconditions() {
        let g = grid();
        assert!(matches!(
            gaussian_packet(&g, 0.0, 2.0 * g.dx(), 0.0, PROTON),
            Err(CollapseError::GridTooCoarse { .. })
        ));
        assert!(matches!(
            gaussian_packet(&g, 1.9e-7, 1e-8, 0.0, PROTON),
            Err(CollapseError::OutOfDomain(_))
        ));
    }

    #[test]
    fn two_peak_weights() {
        let g = Grid1D::centered(1.2e-6, 512).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let sym = two_peak_superposition(&g, h.into(), h.into(), 1e-6, 2e-8, PROTON).unwrap();
        assert!((sym.left_probability(0) - 0.5).abs() < 1e-6);

        let asym = two_peak_superposition(&g, 0.7f64.sqrt().into(), 0.3f64.sqrt().into(), 1e-6, 2e-8, PROTON).unwrap();
        // Quadrature over x < 0.
        let left: f64 = asym
            .amplitudes()
            .iter()
            .zip(g.points())
            .filter(|(_, x)| *x < 0.0)
            .map(|(z, _)| z.norm_sqr())
            .sum::<f64>()
            * g.dx();
        assert!((left - 0.7).abs() < 1e-6);

        let merged = two_peak_superposition(&g, h.into(), h.into(), 0.0, 2e-8, PROTON).unwrap();
        let single = gaussian_packet(&g, 0.0, 2e-8, 0.0, PROTON).unwrap();
        assert!((merged.norm_squared() - 1.0).abs() < 1e-12);
        assert!(merged.fidelity(&single) > 1.0 - 1e-12);
    }

    #[test]
    fn mass_density_integrates_to_mass() {
        let g = grid();
        let psi = gaussian_packet(&g, 0.0, 1e-8, 0.0, PROTON).unwrap();
        let rho = mass_density(&psi).unwrap();
        assert_relative_eq!(rho.total_mass(), PROTON, max_relative = 1e-9);
        assert!(rho.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn mass_density_is_symmetric_for_symmetric_state() {
        let g = Grid1D::centered(1.2e-6, 512).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = two_peak_superposition(&g, h.into(), h.into(), 1e-6, 2e-8, PROTON).unwrap();
        let rho = mass_density(&psi).unwrap();
        let n = g.n_points();
        let peak = rho.values.iter().cloned().fold(0.0, f64::max);
        for k in 1..n / 2 {
            let d = (rho.values[n / 2 + k] - rho.values[n / 2 - k]).abs();
            assert!(d <= 1e-9 * peak, "asymmetry {d} at offset {k}");
        }
    }

    #[test]
    fn two_particle_mass_density_is_sum_of_marginals() {
        let g = Grid1D::centered(2e-7, 128).unwrap();
        let m1 = PROTON;
        let m2 = 3.0 * PROTON;
        let a = gaussian_packet(&g, -8e-8, 1.5e-8, 0.0, m1).unwrap();
        let b = gaussian_packet(&g, 8e-8, 1.5e-8, 0.0, m2).unwrap();
        let joint = WaveFunction::product(&a, &b).unwrap();
        let rho = mass_density(&joint).unwrap();
        // Explicit quadrature over the product array.
        let n = g.n_points();
        let dx = g.dx();
        for i in 0..n {
            let mut expect = 0.0;
            for j in 0..n {
                expect += m1 * joint.amplitudes()[i * n + j].norm_sqr() * dx;
                expect += m2 * joint.amplitudes()[j * n + i].norm_sqr() * dx;
            }
            assert_relative_eq!(rho.values[i], expect, max_relative = 1e-12, epsilon = 1e-300);
        }
        let single = m1 * a.amplitudes()[10].norm_sqr() + m2 * b.amplitudes()[10].norm_sqr();
        assert_relative_eq!(rho.values[10], single, max_relative = 1e-9);
        assert_relative_eq!(rho.total_mass(), m1 + m2, max_relative = 1e-9);
    }

    #[test]
    fn mass_density_rejects_unnormalized() {
        let g = grid();
        let psi = gaussian_packet(&g, 0.0, 1e-8, 0.0, PROTON).unwrap();
        let doubled = psi.with_amplitudes(psi.amplitudes().iter().map(|z| z * 2.0).collect());
        assert!(matches!(mass_density(&doubled), Err(CollapseError::NotNormalized(_))));
    }

    #[test]
    fn density_matrix_of_pure_state() {
        let g = Grid1D::centered(2e-7, 128).unwrap();
        let psi = gaussian_packet(&g, 0.0, 2e-8, 0.0, PROTON).unwrap();
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        assert_relative_eq!(rho.trace(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(rho.purity(), 1.0, epsilon = 1e-12);
        assert!(rho.hermiticity_error() < 1e-12);
        let eig = rho.eigenvalues();
        let max = eig.iter().cloned().fold(f64::MIN, f64::max);
        assert_relative_eq!(max, 1.0, epsilon = 1e-10);
        assert_relative_eq!(rho.trace_distance(&rho).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_distance_of_orthogonal_states_is_one() {
        let g = Grid1D::centered(2e-7, 128).unwrap();
        let a = gaussian_packet(&g, -8e-8, 1.5e-8, 0.0, PROTON).unwrap();
        let b = gaussian_packet(&g, 8e-8, 1.5e-8, 0.0, PROTON).unwrap();
        let ra = DensityMatrix::from_pure(&a).unwrap();
        let rb = DensityMatrix::from_pure(&b).unwrap();
        assert_relative_eq!(ra.trace_distance(&rb).unwrap(), 1.0, epsilon = 1e-9);
    }
}
