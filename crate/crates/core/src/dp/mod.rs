//! Diósi–Penrose gravitational self-energy of the difference between two
//! mass distributions, and the collapse time `tau = hbar / dE` it implies.
//!
//! `dE = 4 pi G ∬ f(x) f(y) / |x - y| d³x d³y` with `f = M1 - M2`. Every
//! distribution is a set of spherically symmetric components, so the double
//! integral splits into pair terms between components. A pair term reduces to
//! one radial integral by averaging the potential of one component over
//! spherical shells of the other.

mod quad;

use std::cmp::Ordering;

use crate::error::{CollapseError, Result};
use crate::{G_NEWTON, HBAR};

/// Gaussian components are cut off at this many standard deviations.
const GAUSS_CUTOFF: f64 = 12.0;
const REL_TOL: f64 = 1e-10;
/// Relative error estimate above which quadrature is reported as failed.
pub const QUADRATURE_GIVE_UP: f64 = 5e-3;

#[derive(Debug, Clone, PartialEq)]
pub enum MassDistribution {
    PointSet { masses: Vec<f64>, positions: Vec<[f64; 3]> },
    UniformSphere { mass: f64, radius: f64, center: [f64; 3] },
    Gaussian { mass: f64, sigma: f64, center: [f64; 3] },
}

impl MassDistribution {
    pub fn point(mass: f64, position: [f64; 3]) -> Result<Self> {
        MassDistribution::point_set(vec![mass], vec![position])
    }

    pub fn point_set(masses: Vec<f64>, positions: Vec<[f64; 3]>) -> Result<Self> {
        if masses.len() != positions.len() || masses.is_empty() {
            return Err(CollapseError::ShapeMismatch(format!(
                "{} masses for {} positions",
                masses.len(),
                positions.len()
            )));
        }
        if masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(CollapseError::invalid("masses", "every point mass must be positive"));
        }
        check_center(&positions)?;
        Ok(MassDistribution::PointSet { masses, positions })
    }

    pub fn uniform_sphere(mass: f64, radius: f64, center: [f64; 3]) -> Result<Self> {
        check_mass(mass)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(CollapseError::invalid(
                "radius",
                format!("must be positive, got {radius:e}"),
            ));
        }
        check_center(&[center])?;
        Ok(MassDistribution::UniformSphere { mass, radius, center })
    }

    pub fn gaussian(mass: f64, sigma: f64, center: [f64; 3]) -> Result<Self> {
        check_mass(mass)?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(CollapseError::invalid(
                "sigma",
                format!("must be positive, got {sigma:e}"),
            ));
        }
        check_center(&[center])?;
        Ok(MassDistribution::Gaussian { mass, sigma, center })
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            MassDistribution::PointSet { masses, .. } => masses.iter().sum(),
            MassDistribution::UniformSphere { mass, .. } | MassDistribution::Gaussian { mass, .. } => *mass,
        }
    }

    /// Same distribution moved by `offset`.
    pub fn translated(&self, offset: [f64; 3]) -> Self {
        let mv = |c: &[f64; 3]| [c[0] + offset[0], c[1] + offset[1], c[2] + offset[2]];
        match self {
            MassDistribution::PointSet { masses, positions } => MassDistribution::PointSet {
                masses: masses.clone(),
                positions: positions.iter().map(mv).collect(),
            },
            MassDistribution::UniformSphere { mass, radius, center } => MassDistribution::UniformSphere {
                mass: *mass,
                radius: *radius,
                center: mv(center),
            },
            MassDistribution::Gaussian { mass, sigma, center } => MassDistribution::Gaussian {
                mass: *mass,
                sigma: *sigma,
                center: mv(center),
            },
        }
    }

    fn components(&self, sign: f64, out: &mut Vec<Component>) {
        match self {
            MassDistribution::PointSet { masses, positions } => {
                for (m, p) in masses.iter().zip(positions) {
                    out.push(Component {
                        shape: Shape::Point,
                        center: *p,
                        mass: sign * m,
                    });
                }
            }
            MassDistribution::UniformSphere { mass, radius, center } => out.push(Component {
                shape: Shape::Sphere(*radius),
                center: *center,
                mass: sign * mass,
            }),
            MassDistribution::Gaussian { mass, sigma, center } => out.push(Component {
                shape: Shape::Gaussian(*sigma),
                center: *center,
                mass: sign * mass,
            }),
        }
    }
}

fn check_mass(mass: f64) -> Result<()> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(CollapseError::invalid(
            "mass",
            format!("must be positive, got {mass:e}"),
        ));
    }
    Ok(())
}

fn check_center(centers: &[[f64; 3]]) -> Result<()> {
    if centers.iter().flatten().any(|c| !c.is_finite()) {
        return Err(CollapseError::invalid("center", "coordinates must be finite"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Point,
    Sphere(f64),
    Gaussian(f64),
}

impl Shape {
    fn key(&self) -> (u8, f64) {
        match self {
            Shape::Point => (0, 0.0),
            Shape::Sphere(r) => (1, *r),
            Shape::Gaussian(s) => (2, *s),
        }
    }

    fn outer_radius(&self) -> f64 {
        match self {
            Shape::Point => 0.0,
            Shape::Sphere(r) => *r,
            Shape::Gaussian(s) => GAUSS_CUTOFF * s,
        }
    }

    /// Unit-mass radial density.
    fn density(&self, r: f64) -> f64 {
        match *self {
            Shape::Point => 0.0,
            Shape::Sphere(radius) => {
                if r <= radius {
                    3.0 / (4.0 * std::f64::consts::PI * radius.powi(3))
                } else {
                    0.0
                }
            }
            Shape::Gaussian(s) => {
                let norm = (2.0 * std::f64::consts::PI * s * s).powf(-1.5);
                norm * (-0.5 * r * r / (s * s)).exp()
            }
        }
    }

    /// Potential `∫ rho(y) / |x - y| d³y` of the unit-mass profile at distance `r`.
    fn potential(&self, r: f64) -> Result<f64> {
        let outer = self.outer_radius();
        if let Shape::Point = self {
            return Ok(1.0 / r);
        }
        let four_pi = 4.0 * std::f64::consts::PI;
        let inner_limit = r.min(outer);
        let enclosed = if r > 0.0 {
            quad::integrate(
                |s| four_pi * s * s * self.density(s),
                0.0,
                inner_limit,
                REL_TOL,
                0.0,
                QUADRATURE_GIVE_UP,
            )? / r
        } else {
            0.0
        };
        let shell = if r < outer {
            quad::integrate(
                |s| four_pi * s * self.density(s),
                r,
                outer,
                REL_TOL,
                0.0,
                QUADRATURE_GIVE_UP,
            )?
        } else {
            0.0
        };
        Ok(enclosed + shell)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Component {
    shape: Shape,
    center: [f64; 3],
    mass: f64,
}

impl Component {
    fn geometry_cmp(&self, other: &Component) -> Ordering {
        let (ka, sa) = self.shape.key();
        let (kb, sb) = other.shape.key();
        ka.cmp(&kb)
            .then(sa.total_cmp(&sb))
            .then(self.center[0].total_cmp(&other.center[0]))
            .then(self.center[1].total_cmp(&other.center[1]))
            .then(self.center[2].total_cmp(&other.center[2]))
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// `∬ rho_a rho_b / |x - y|` for unit-mass components a distance `d` apart.
fn pair_integral(a: Shape, b: Shape, d: f64) -> Result<f64> {
    match (a, b) {
        (Shape::Point, Shape::Point) => Ok(1.0 / d),
        (Shape::Point, other) | (other, Shape::Point) => other.potential(d),
        _ => shell_average(a, b, d),
    }
}

/// Averages the potential of `a` over spherical shells of `b`.
fn shell_average(a: Shape, b: Shape, d: f64) -> Result<f64> {
    let four_pi = 4.0 * std::f64::consts::PI;
    let rb = b.outer_radius();
    let ra = a.outer_radius();
    let mut breaks = vec![0.0, rb];
    for x in [ra, d, (d - ra).abs(), d + ra] {
        if x > 0.0 && x < rb {
            breaks.push(x);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut failure = None;
    let mut outer = |s: f64| -> f64 {
        if failure.is_some() || s == 0.0 {
            return 0.0;
        }
        let avg = if d == 0.0 {
            a.potential(s)
        } else {
            // Mean over a shell of radius s: (1 / 2sd) ∫_{|d-s|}^{d+s} r Phi_a(r) dr.
            let lo = (d - s).abs();
            let hi = d + s;
            let mut inner_breaks = vec![lo, hi];
            if ra > lo && ra < hi {
                inner_breaks.insert(1, ra);
            }
            let mut inner_failure = None;
            let val = quad::integrate_pieces(
                |r| match a.potential(r) {
                    Ok(p) => r * p,
                    Err(e) => {
                        inner_failure.get_or_insert(e);
                        0.0
                    }
                },
                &inner_breaks,
                REL_TOL,
                0.0,
                QUADRATURE_GIVE_UP,
            );
            match (val, inner_failure) {
                (Ok(v), None) => Ok(v / (2.0 * s * d)),
                (Err(e), _) | (_, Some(e)) => Err(e),
            }
        };
        match avg {
            Ok(v) => four_pi * s * s * b.density(s) * v,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        }
    };
    let value = quad::integrate_pieces(&mut outer, &breaks, REL_TOL, 0.0, QUADRATURE_GIVE_UP)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(value)
}

/// Signed components of `m1 - m2` with identical geometry merged and zero masses dropped,
/// in a canonical order.
fn difference_components(m1: &[MassDistribution], m2: &[MassDistribution]) -> Vec<Component> {
    let mut raw = Vec::new();
    m1.iter().for_each(|m| m.components(1.0, &mut raw));
    m2.iter().for_each(|m| m.components(-1.0, &mut raw));
    raw.sort_by(|a, b| a.geometry_cmp(b).then(a.mass.total_cmp(&b.mass)));
    let mut merged: Vec<Component> = Vec::with_capacity(raw.len());
    for c in raw {
        match merged.last_mut() {
            Some(last) if last.geometry_cmp(&c) == Ordering::Equal => last.mass += c.mass,
            _ => merged.push(c),
        }
    }
    merged.retain(|c| c.mass != 0.0);
    merged
}

/// Gravitational self-energy of `m1 - m2`, J, reported as a non-negative magnitude.
pub fn delta_e(m1: &MassDistribution, m2: &MassDistribution) -> Result<f64> {
    delta_e_composite(std::slice::from_ref(m1), std::slice::from_ref(m2))
}

/// [`delta_e`] for states whose mass density is a sum of several distributions.
pub fn delta_e_composite(m1: &[MassDistribution], m2: &[MassDistribution]) -> Result<f64> {
    let comps = difference_components(m1, m2);
    if comps.iter().any(|c| c.shape == Shape::Point) {
        return Err(CollapseError::SingularSelfEnergy);
    }
    let mut terms = Vec::with_capacity(comps.len() * (comps.len() + 1) / 2);
    for (i, a) in comps.iter().enumerate() {
        terms.push(a.mass * a.mass * pair_integral(a.shape, a.shape, 0.0)?);
        for b in &comps[i + 1..] {
            let d = distance(&a.center, &b.center);
            terms.push(2.0 * a.mass * b.mass * pair_integral(a.shape, b.shape, d)?);
        }
    }
    let energy: f64 = terms.iter().sum();
    Ok(4.0 * std::f64::consts::PI * G_NEWTON * energy.abs())
}

/// `tau = hbar / dE`, s; infinite for `dE = 0`.
pub fn collapse_time(delta_e: f64) -> Result<f64> {
    if delta_e.is_nan() || delta_e < 0.0 {
        return Err(CollapseError::NegativeEnergy(delta_e));
    }
    if delta_e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(HBAR / delta_e)
}
