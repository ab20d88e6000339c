//! Contraction experiment harness: reads a JSON configuration, runs two
//! backward Riccati recursions from different boundary matrices, and reports
//! their distance in the affine-invariant metric and in the spectral norm,
//! together with the lifted contraction factors that bound the former.

pub mod config;
pub mod csv;
pub mod experiment;
pub mod svg;

pub use config::{parse_config, to_json, ConfigError, ExperimentConfig, LiftDepth, ResolvedConfig};
pub use csv::{render_csv, write_csv};
pub use experiment::{
    check_invariants, choose_depth, distance_table, lifted_bounds, run_contraction_experiment, DepthChoice,
    DistanceRow, DistanceTable, ExperimentReport, LiftedRow, RunError, RunOptions, Violation,
};
pub use svg::{render_svg, write_svg, SvgOptions};

/// The example configuration shipped with the crate.
pub const EXAMPLE_CONFIG: &str = include_str!("../configs/tv_example.json");
