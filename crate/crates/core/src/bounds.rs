//! Interferometric visibility under collapse dynamics and the collapse-rate
//! bounds that follow from an observed visibility.
//!
//! A rigid object of `N` nucleon masses whose extent is below `r_c` couples
//! coherently, so its coherence at separation `l` decays `N²` times faster
//! than a single nucleon's. [`amplification_factor`] is the one place that
//! convention lives.

use crate::error::{CollapseError, Result};
use crate::grw::CollapseParams;
use crate::master::decay_kernel;
use crate::{AMU, HBAR};

/// Rates searched by [`lambda_upper_bound`] lie in `[1e-40, 1e30]` s⁻¹.
pub const LAMBDA_SEARCH_MAX: f64 = 1e30;
const LAMBDA_SEARCH_MIN: f64 = 1e-40;
/// Relative width of the final bisection bracket.
pub const BISECTION_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometryExperiment {
    mass_amu: f64,
    separation: f64,
    duration: f64,
    visibility_floor: f64,
}

impl InterferometryExperiment {
    pub fn new(mass_amu: f64, separation: f64, duration: f64, visibility_floor: f64) -> Result<Self> {
        for (name, v) in [("mass", mass_amu), ("separation", separation), ("duration", duration)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CollapseError::invalid(name, format!("must be positive, got {v:e}")));
            }
        }
        if !(visibility_floor > 0.0 && visibility_floor <= 1.0) {
            return Err(CollapseError::invalid(
                "visibility_floor",
                format!("must lie in (0, 1], got {visibility_floor}"),
            ));
        }
        Ok(InterferometryExperiment {
            mass_amu,
            separation,
            duration,
            visibility_floor,
        })
    }

    pub fn mass_amu(&self) -> f64 {
        self.mass_amu
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn visibility_floor(&self) -> f64 {
        self.visibility_floor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelModel {
    /// Per-nucleon GRW kernel with coherent mass-squared amplification.
    GrwLike,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub lambda_upper: f64,
    pub r_c_assumed: f64,
    pub model: KernelModel,
    pub notes: String,
}

/// Coherent enhancement of the single-nucleon decay rate for an object of `mass_amu`.
pub fn amplification_factor(mass_amu: f64) -> f64 {
    mass_amu * mass_amu
}

/// Fringe visibility left after the experiment, `exp(-N² Gamma(l) t)`.
pub fn visibility(exp: &InterferometryExperiment, lambda: f64, r_c: f64) -> Result<f64> {
    let params = CollapseParams::new(lambda, r_c)?;
    let rate = amplification_factor(exp.mass_amu) * decay_kernel(exp.separation, &params);
    Ok((-rate * exp.duration).exp())
}

/// Smallest collapse rate whose predicted visibility falls below the observed floor.
pub fn lambda_upper_bound(exp: &InterferometryExperiment, r_c: f64) -> Result<BoundResult> {
    if !(exp.visibility_floor < 1.0) {
        return Err(CollapseError::invalid(
            "visibility_floor",
            "must be below 1 to exclude anything",
        ));
    }
    let floor = exp.visibility_floor;
    if visibility(exp, LAMBDA_SEARCH_MAX, r_c)? >= floor {
        return Err(CollapseError::NoExclusion(LAMBDA_SEARCH_MAX));
    }
    let (mut lo, mut hi) = (LAMBDA_SEARCH_MIN.ln(), LAMBDA_SEARCH_MAX.ln());
    if visibility(exp, LAMBDA_SEARCH_MIN, r_c)? < floor {
        return Err(CollapseError::invalid(
            "experiment",
            "excludes every rate in the search range",
        ));
    }
    while hi - lo > BISECTION_TOLERANCE.ln_1p() {
        let mid = 0.5 * (lo + hi);
        if visibility(exp, mid.exp(), r_c)? < floor {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(BoundResult {
        lambda_upper: hi.exp(),
        r_c_assumed: r_c,
        model: KernelModel::GrwLike,
        notes: format!(
            "per-nucleon rate, mass-squared coherent amplification, N = {:e}, visibility floor {}",
            exp.mass_amu, floor
        ),
    })
}

/// Mean kinetic-energy growth, W, of a body of `n_constituents` each of mass `mass`.
///
/// Follows from the curvature of the decay kernel at zero separation:
/// `dE/dt = N hbar² Gamma''(0) / (2 m) = N lambda hbar² alpha / (4 m)`.
pub fn heating_rate(params: &CollapseParams, mass: f64, n_constituents: f64) -> Result<f64> {
    if !(mass > 0.0) {
        return Err(CollapseError::invalid(
            "mass",
            format!("must be positive, got {mass:e}"),
        ));
    }
    if !(n_constituents >= 1.0) {
        return Err(CollapseError::ZeroConstituents);
    }
    let curvature = crate::master::decay_kernel_curvature(params);
    Ok(n_constituents * HBAR * HBAR * curvature / (2.0 * mass))
}

/// Mass, in amu, of a homogeneous sphere of the given diameter and density.
pub fn sphere_mass_amu(diameter: f64, density: f64) -> f64 {
    let r = 0.5 * diameter;
    4.0 / 3.0 * std::f64::consts::PI * r.powi(3) * density / AMU
}

/// Published upper bounds on the collapse rate, s⁻¹, by experiment type.
pub fn published_bounds() -> Vec<(&'static str, f64)> {
    vec![
        ("Matter-wave interferometry", 1e-5),
        ("Decay of supercurrents (SQUIDS)", 1e-3),
        ("Spontaneous X-ray emission from Ge", 1e-11),
        ("Proton decay", 10.0),
        ("Dissociation of cosmic hydrogen", 1.0),
        ("Heating of intergalactic medium (IGM)", 1e-9),
        ("Heating of interstellar dust grains", 1e-2),
    ]
}

/// Looks a row of [`published_bounds`] up by name.
pub fn published_bound(name: &str) -> Option<f64> {
    published_bounds().into_iter().find(|(n, _)| *n == name).map(|(_, v)| v)
}
