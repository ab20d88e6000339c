use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ricclift_cli::{
    choose_depth, lifted_bounds, parse_config, run_contraction_experiment, ExperimentConfig, LiftDepth, RunError,
    RunOptions,
};

/// Riccati contraction experiments: affine-invariant vs 2-norm distance of backward iterates.
#[derive(Debug, Parser)]
#[command(name = "ricclift", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the configuration and print the rank report.
    Check(Common),
    /// Run the experiment and write CSV (and SVG) output.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Write the SVG plot (default).
        #[arg(long, overrides_with = "no_svg")]
        svg: bool,
        /// Skip the SVG plot.
        #[arg(long = "no-svg")]
        no_svg: bool,
    },
    /// Print the lifted contraction factors only.
    Bound(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Lift depth, overriding the configuration: a positive integer or `auto`.
    #[arg(long = "d", value_name = "INT|auto")]
    depth: Option<LiftDepth>,
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(parse_config(&text)?)
}

fn check(common: &Common) -> Result<(), RunError> {
    let config = load(&common.config)?;
    let resolved = config.resolve()?;
    let depth = common.depth.unwrap_or(config.lift_depth);
    println!(
        "config ok: n = {}, m = {}, horizon = {}",
        resolved.problem.n(),
        resolved.problem.m(),
        resolved.horizon
    );
    let choice = choose_depth(&config, &resolved, depth)?;
    let rank = &choice.rank;
    println!(
        "rank report at d = {} over lifted stages {}..={}: {}",
        rank.d,
        rank.t_lo,
        rank.t_hi,
        if rank.pass { "pass" } else { "FAIL" }
    );
    println!("t,gamma_row_ratio,xi_col_ratio,pass");
    for s in &rank.stages {
        println!("{},{:.6e},{:.6e},{}", s.t, s.gamma_row_ratio, s.xi_col_ratio, s.pass);
    }
    Ok(())
}

fn bound(common: &Common) -> Result<(), RunError> {
    let config = load(&common.config)?;
    let resolved = config.resolve()?;
    let choice = choose_depth(&config, &resolved, common.depth.unwrap_or(config.lift_depth))?;
    println!("t,rho_bound,strict");
    for (t, rho, strict) in lifted_bounds(&resolved, &choice)? {
        println!("{t},{rho:.16e},{strict}");
    }
    Ok(())
}

fn run(common: &Common, out: PathBuf, svg: bool) -> Result<(), RunError> {
    let config = load(&common.config)?;
    let opts = RunOptions {
        out_dir: out,
        depth: common.depth,
        svg,
    };
    let report = run_contraction_experiment(&config, &opts)?;
    if !report.depth.rank.pass {
        eprintln!(
            "warning: rank check fails at d = {}; stages without a strict bound are reported with rho = 1",
            report.depth.d
        );
    }
    println!(
        "d = {}, {} steps, {} lifted stages",
        report.depth.d,
        report.table.rows.len().saturating_sub(1),
        report.table.lifted.len()
    );
    println!("wrote {}", report.csv_path.display());
    if let Some(p) = &report.svg_path {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(c) => check(c),
        Command::Bound(c) => bound(c),
        Command::Run {
            common, out, no_svg, ..
        } => run(common, out.clone(), !no_svg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
