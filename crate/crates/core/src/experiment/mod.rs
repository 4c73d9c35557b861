//! Configured experiments: TOML configs in, CSV tables out.

mod config;
mod csv;
mod run;

pub use config::{
    load_config, parse_config, AmplificationConfig, DpTauConfig, EnergyGrowthConfig, ExperimentConfig, ExperimentKind,
    GridConfig, GrwBornConfig, LobeParams, ShapeConfig, VisibilityBoundConfig, VsMasterConfig,
};
pub use csv::{
    emit_csv, format_float, parse_csv, plot_script, render_csv, write_atomic, write_plot_script, ExperimentResult,
};
pub use run::run;
