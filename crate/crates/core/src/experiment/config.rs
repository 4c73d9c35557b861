use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CollapseError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "one")]
    pub trajectories: u64,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    pub experiment: ExperimentKind,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub n_points: usize,
}

/// Two-lobe initial state: lobes of `width` at the grid midpoint ∓ `separation / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LobeParams {
    pub lambda: f64,
    pub r_c: f64,
    pub mass: f64,
    pub separation: f64,
    pub width: f64,
    /// Probability weight of the left lobe.
    pub weight_left: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentKind {
    GrwBorn(GrwBornConfig),
    GrwVsMaster(VsMasterConfig),
    CslVsMaster(VsMasterConfig),
    Amplification(AmplificationConfig),
    EnergyGrowth(EnergyGrowthConfig),
    DpTau(DpTauConfig),
    VisibilityBound(VisibilityBoundConfig),
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::GrwBorn(_) => "grw_born",
            ExperimentKind::GrwVsMaster(_) => "grw_vs_master",
            ExperimentKind::CslVsMaster(_) => "csl_vs_master",
            ExperimentKind::Amplification(_) => "amplification",
            ExperimentKind::EnergyGrowth(_) => "energy_growth",
            ExperimentKind::DpTau(_) => "dp_tau",
            ExperimentKind::VisibilityBound(_) => "visibility_bound",
        }
    }

    fn needs_grid(&self) -> bool {
        !matches!(self, ExperimentKind::DpTau(_) | ExperimentKind::VisibilityBound(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrwBornConfig {
    pub lambda: f64,
    pub r_c: f64,
    pub mass: f64,
    pub separation: f64,
    pub width: f64,
    /// Probability weight of the left lobe.
    pub weight_left: f64,
    pub t_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VsMasterConfig {
    pub lambda: f64,
    pub r_c: f64,
    pub mass: f64,
    pub separation: f64,
    pub width: f64,
    /// Probability weight of the left lobe.
    pub weight_left: f64,
    pub sample_times: Vec<f64>,
    /// Step of the density-matrix integrator and of the CSL integrator.
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplificationConfig {
    pub lambda: f64,
    pub r_c: f64,
    pub mass: f64,
    pub separation: f64,
    pub width: f64,
    pub sample_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyGrowthConfig {
    pub lambda: f64,
    pub r_c: f64,
    pub mass: f64,
    pub width: f64,
    pub sample_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpTauConfig {
    pub first: Vec<ShapeConfig>,
    pub second: Vec<ShapeConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeConfig {
    Point { mass: f64, center: [f64; 3] },
    Sphere { mass: f64, radius: f64, center: [f64; 3] },
    Gaussian { mass: f64, sigma: f64, center: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisibilityBoundConfig {
    pub mass_amu: f64,
    pub separation: f64,
    pub duration: f64,
    pub visibility_floor: f64,
    pub r_c: f64,
    /// Rates at which the visibility is tabulated.
    #[serde(default)]
    pub lambdas: Vec<f64>,
}

fn config_error(path: impl Into<String>, message: impl Into<String>) -> CollapseError {
    CollapseError::ConfigInvalid {
        path: path.into(),
        message: message.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(path, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(path: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(path, format!("must be non-negative and finite, got {v}")))
    }
}

fn sample_times(path: &str, times: &[f64], min_len: usize) -> Result<()> {
    if times.len() < min_len {
        return Err(config_error(
            path,
            format!("needs at least {min_len} entries, got {}", times.len()),
        ));
    }
    let mut prev = 0.0;
    for (i, &t) in times.iter().enumerate() {
        if !(t >= prev && t.is_finite()) {
            return Err(config_error(
                format!("{path}[{i}]"),
                "must be finite, non-negative and non-decreasing",
            ));
        }
        prev = t;
    }
    Ok(())
}

macro_rules! lobe_params {
    ($t:ty) => {
        impl $t {
            pub fn lobes(&self) -> LobeParams {
                LobeParams {
                    lambda: self.lambda,
                    r_c: self.r_c,
                    mass: self.mass,
                    separation: self.separation,
                    width: self.width,
                    weight_left: self.weight_left,
                }
            }
        }
    };
}

lobe_params!(GrwBornConfig);
lobe_params!(VsMasterConfig);

impl LobeParams {
    fn validate(&self, prefix: &str) -> Result<()> {
        non_negative(&format!("{prefix}.lambda"), self.lambda)?;
        positive(&format!("{prefix}.r_c"), self.r_c)?;
        positive(&format!("{prefix}.mass"), self.mass)?;
        non_negative(&format!("{prefix}.separation"), self.separation)?;
        positive(&format!("{prefix}.width"), self.width)?;
        if !(self.weight_left >= 0.0 && self.weight_left <= 1.0) {
            return Err(config_error(format!("{prefix}.weight_left"), "must lie in [0, 1]"));
        }
        Ok(())
    }
}

impl ShapeConfig {
    fn validate(&self, path: &str) -> Result<()> {
        let (mass, size, center) = match self {
            ShapeConfig::Point { mass, center } => (*mass, None, center),
            ShapeConfig::Sphere { mass, radius, center } => (*mass, Some(("radius", *radius)), center),
            ShapeConfig::Gaussian { mass, sigma, center } => (*mass, Some(("sigma", *sigma)), center),
        };
        positive(&format!("{path}.mass"), mass)?;
        if let Some((name, v)) = size {
            positive(&format!("{path}.{name}"), v)?;
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(config_error(format!("{path}.center"), "coordinates must be finite"));
        }
        Ok(())
    }
}

impl ExperimentConfig {
    /// Checks every field before any computation starts.
    pub fn validate(&self) -> Result<()> {
        if self.trajectories == 0 {
            return Err(config_error("trajectories", "must be at least 1"));
        }
        if self.experiment.needs_grid() {
            let grid = self
                .grid
                .as_ref()
                .ok_or_else(|| config_error("grid", format!("required for `{}`", self.experiment.name())))?;
            positive("grid.half_width", grid.half_width)?;
            if !(grid.n_points >= 8 && grid.n_points.is_power_of_two()) {
                return Err(config_error("grid.n_points", "must be a power of two and at least 8"));
            }
        }
        let p = "experiment";
        match &self.experiment {
            ExperimentKind::GrwBorn(c) => {
                c.lobes().validate(p)?;
                positive("experiment.t_final", c.t_final)?;
            }
            ExperimentKind::GrwVsMaster(c) | ExperimentKind::CslVsMaster(c) => {
                c.lobes().validate(p)?;
                sample_times("experiment.sample_times", &c.sample_times, 1)?;
                positive("experiment.dt", c.dt)?;
            }
            ExperimentKind::Amplification(c) => {
                non_negative("experiment.lambda", c.lambda)?;
                positive("experiment.r_c", c.r_c)?;
                positive("experiment.mass", c.mass)?;
                positive("experiment.separation", c.separation)?;
                positive("experiment.width", c.width)?;
                sample_times("experiment.sample_times", &c.sample_times, 5)?;
            }
            ExperimentKind::EnergyGrowth(c) => {
                non_negative("experiment.lambda", c.lambda)?;
                positive("experiment.r_c", c.r_c)?;
                positive("experiment.mass", c.mass)?;
                positive("experiment.width", c.width)?;
                sample_times("experiment.sample_times", &c.sample_times, 2)?;
            }
            ExperimentKind::DpTau(c) => {
                for (name, shapes) in [("first", &c.first), ("second", &c.second)] {
                    if shapes.is_empty() {
                        return Err(config_error(format!("experiment.{name}"), "needs at least one shape"));
                    }
                    for (i, s) in shapes.iter().enumerate() {
                        s.validate(&format!("experiment.{name}[{i}]"))?;
                    }
                }
            }
            ExperimentKind::VisibilityBound(c) => {
                positive("experiment.mass_amu", c.mass_amu)?;
                positive("experiment.separation", c.separation)?;
                positive("experiment.duration", c.duration)?;
                positive("experiment.r_c", c.r_c)?;
                if !(c.visibility_floor > 0.0 && c.visibility_floor < 1.0) {
                    return Err(config_error("experiment.visibility_floor", "must lie in (0, 1)"));
                }
                for (i, &l) in c.lambdas.iter().enumerate() {
                    non_negative(&format!("experiment.lambdas[{i}]"), l)?;
                }
            }
        }
        Ok(())
    }

    /// Canonical TOML form, used as the provenance echo.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_error("", format!("cannot serialize config: {e}")))
    }
}

/// Parses and validates a TOML config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| config_error("", e.message().to_string()))?;
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(
            if path == "." { String::new() } else { path },
            e.inner().message().to_string(),
        )
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CollapseError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BORN: &str = r#"
seed = 7
trajectories = 100

[grid]
half_width = 1.6e-6
n_points = 256

[experiment]
kind = "grw_born"
lambda = 1.0
r_c = 1e-7
mass = 1e-24
separation = 1e-6
width = 2.5e-8
weight_left = 0.7
t_final = 10.0
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = parse_config(BORN).unwrap();
        assert_eq!(c.experiment.name(), "grw_born");
        assert_eq!(c.workers, 0);
        let again = parse_config(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let bad = BORN.replace("t_final = 10.0", "t_final = 10.0\ncolour = 3");
        let err = parse_config(&bad).unwrap_err();
        assert!(matches!(err, CollapseError::ConfigInvalid { .. }), "{err}");
        assert!(err.to_string().contains("colour"), "{err}");
        let bad = BORN.replace("n_points = 256", "n_points = 256\nspacing = 1");
        let err = parse_config(&bad).unwrap_err();
        assert!(err.to_string().contains("grid"), "{err}");
    }

    #[test]
    fn out_of_range_fields_are_named() {
        for (from, to, field) in [
            ("weight_left = 0.7", "weight_left = 1.7", "experiment.weight_left"),
            ("n_points = 256", "n_points = 200", "grid.n_points"),
            ("trajectories = 100", "trajectories = 0", "trajectories"),
            ("r_c = 1e-7", "r_c = -1e-7", "experiment.r_c"),
            ("t_final = 10.0", "t_final = 0.0", "experiment.t_final"),
        ] {
            match parse_config(&BORN.replace(from, to)) {
                Err(CollapseError::ConfigInvalid { path, .. }) => assert_eq!(path, field),
                other => panic!("{to}: {other:?}"),
            }
        }
    }

    #[test]
    fn dp_config_needs_no_grid() {
        let text = r#"
seed = 1
[experiment]
kind = "dp_tau"
first = [{ shape = "sphere", mass = 1e-14, radius = 1e-7, center = [0.0, 0.0, 0.0] }]
second = [{ shape = "sphere", mass = 1e-14, radius = 1e-7, center = [5e-7, 0.0, 0.0] }]
"#;
        let c = parse_config(text).unwrap();
        assert!(c.grid.is_none());
        let bad = text.replace("radius = 1e-7, center = [5e-7", "radius = 0.0, center = [5e-7");
        match parse_config(&bad) {
            Err(CollapseError::ConfigInvalid { path, .. }) => assert_eq!(path, "experiment.second[0].radius"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grid_is_required_for_dynamics() {
        let text = BORN.replace("[grid]\nhalf_width = 1.6e-6\nn_points = 256\n", "");
        match parse_config(&text) {
            Err(CollapseError::ConfigInvalid { path, .. }) => assert_eq!(path, "grid"),
            other => panic!("{other:?}"),
        }
    }
}
