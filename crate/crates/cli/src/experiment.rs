use std::fmt;
use std::path::{Path, PathBuf};

use ricclift::{
    backward_recursion, build_lifted_stage, lifted_contraction, rank_report, riemannian_distance, spectral_norm,
    Contraction, Error as CoreError, RankReport, RiccatiTrace, SpdMatrix,
};

use crate::config::{ConfigError, ExperimentConfig, LiftDepth, ResolvedConfig, Window};
use crate::{csv, svg};

/// Absolute slack allowed on every contraction inequality.
pub const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceRow {
    pub k: usize,
    pub riemannian: f64,
    pub two_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedRow {
    pub t: usize,
    /// Contraction factor of lifted stage `t`; `1` when the stage is only non-expansive.
    pub rho_bound: f64,
    pub strict: bool,
    /// `delta_{dt} / delta_{d(t+1)}`, absent when the denominator is below the ratio floor.
    pub observed_ratio: Option<f64>,
}

/// Distances between the two backward iterates, `k = T` down to `0`, and
/// per-lifted-stage contraction factors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistanceTable {
    pub rows: Vec<DistanceRow>,
    pub lifted: Vec<LiftedRow>,
}

impl DistanceTable {
    pub fn distance_at(&self, k: usize) -> Option<&DistanceRow> {
        self.rows.iter().find(|r| r.k == k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `delta_k > delta_{k+1} + slack`.
    Expansion { k: usize, before: f64, after: f64 },
    /// `delta_{dt} > rho_t delta_{d(t+1)} + slack`, or the ratio exceeds `rho_t + slack`.
    LiftedBound {
        t: usize,
        rho: f64,
        before: f64,
        after: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Expansion { k, before, after } => write!(
                f,
                "Riemannian distance grew on the backward step {}->{k}: {before:e} -> {after:e}",
                k + 1
            ),
            Violation::LiftedBound { t, rho, before, after } => write!(
                f,
                "lifted stage {t} contracted by {:e}, more than its bound {rho:e} ({before:e} -> {after:e})",
                after / before
            ),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("no lift depth up to {d_max} passes the rank check on the analysis window; pass an explicit depth (--d) to run with non-strict bounds")]
    DepthSearchExhausted { d_max: usize },
    #[error("{0}")]
    Numerical(#[from] CoreError),
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invariant(Vec<Violation>),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit code: 1 for bad input, 2 for numerical or invariant failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Numerical(e) if !e.is_numerical() && !matches!(e.root(), CoreError::Range { .. }) => 1,
            _ => 2,
        }
    }
}

/// Depth chosen for an experiment, with its rank report.
#[derive(Debug, Clone)]
pub struct DepthChoice {
    pub d: usize,
    pub window: Window,
    pub rank: RankReport,
}

/// Resolves `depth`, searching `1..=4n` when it is `auto`.
///
/// The analysis window depends on `d` when it is not configured, so the
/// search re-derives it for each candidate depth.
pub fn choose_depth(
    config: &ExperimentConfig,
    resolved: &ResolvedConfig,
    depth: LiftDepth,
) -> Result<DepthChoice, RunError> {
    let problem = &resolved.problem;
    let report = |d: usize| -> Result<Option<DepthChoice>, RunError> {
        let Some(window) = config.lifted_window(d) else {
            return Ok(None);
        };
        let rank = rank_report(problem, d, window.t_lo, window.t_hi)?;
        Ok(Some(DepthChoice { d, window, rank }))
    };
    match depth {
        LiftDepth::Fixed(d) => report(d)?.ok_or_else(|| {
            RunError::Config(ConfigError {
                path: "lift_depth".into(),
                reason: format!(
                    "lift depth {d} leaves no whole lifted stage inside the window and horizon {}",
                    resolved.horizon
                ),
            })
        }),
        LiftDepth::Auto => {
            let d_max = 4 * problem.n();
            for d in 1..=d_max {
                match report(d)? {
                    Some(choice) if choice.rank.pass => return Ok(choice),
                    Some(_) => {}
                    None => break,
                }
            }
            Err(RunError::DepthSearchExhausted { d_max })
        }
    }
}

/// Contraction factors of the lifted stages in the chosen window.
pub fn lifted_bounds(resolved: &ResolvedConfig, choice: &DepthChoice) -> Result<Vec<(usize, f64, bool)>, RunError> {
    (choice.window.t_lo..=choice.window.t_hi)
        .map(|t| {
            let stage = build_lifted_stage(&resolved.problem, t, choice.d)?;
            Ok(match lifted_contraction(&stage)? {
                Contraction::Strict(b) => (t, b.rho, true),
                Contraction::NotStrict(_) => (t, 1.0, false),
            })
        })
        .collect()
}

fn traces(resolved: &ResolvedConfig) -> Result<(RiccatiTrace, RiccatiTrace), CoreError> {
    let t = resolved.horizon;
    let x = backward_recursion(&resolved.problem, t, 0, &resolved.x_terminal)?;
    let y = backward_recursion(&resolved.problem, t, 0, &resolved.y_terminal)?;
    Ok((x, y))
}

/// Runs both recursions and tabulates distances and lifted bounds; no I/O.
pub fn distance_table(resolved: &ResolvedConfig, choice: &DepthChoice) -> Result<DistanceTable, RunError> {
    let (xs, ys) = traces(resolved)?;
    let tol = *resolved.problem.tolerances();
    let rows = (0..=resolved.horizon)
        .rev()
        .map(|k| {
            let (x, y) = (xs.at(k).expect("in range"), ys.at(k).expect("in range"));
            let at_k = |e: CoreError| CoreError::AtStage {
                index: k,
                source: Box::new(e),
            };
            let spd = |m| SpdMatrix::with_tolerances(m, &tol).map_err(at_k);
            let riemannian = riemannian_distance(&spd(x.clone())?, &spd(y.clone())?).map_err(at_k)?;
            let two_norm = spectral_norm(&(x.as_matrix() - y.as_matrix()));
            Ok(DistanceRow {
                k,
                riemannian,
                two_norm,
            })
        })
        .collect::<Result<Vec<_>, CoreError>>()?;

    let mut table = DistanceTable {
        rows,
        lifted: Vec::new(),
    };
    for (t, rho_bound, strict) in lifted_bounds(resolved, choice)? {
        let before = table
            .distance_at(choice.d * (t + 1))
            .expect("window inside horizon")
            .riemannian;
        let after = table
            .distance_at(choice.d * t)
            .expect("window inside horizon")
            .riemannian;
        let observed_ratio = (before > resolved.ratio_floor).then(|| after / before);
        table.lifted.push(LiftedRow {
            t,
            rho_bound,
            strict,
            observed_ratio,
        });
    }
    Ok(table)
}

/// Checks monotonicity of the Riemannian column and every lifted bound.
pub fn check_invariants(table: &DistanceTable, d: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    for pair in table.rows.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        if cur.k + 1 == prev.k && cur.riemannian > prev.riemannian + SLACK {
            out.push(Violation::Expansion {
                k: cur.k,
                before: prev.riemannian,
                after: cur.riemannian,
            });
        }
    }
    for row in &table.lifted {
        let (Some(before), Some(after)) = (table.distance_at(d * (row.t + 1)), table.distance_at(d * row.t)) else {
            continue;
        };
        let (before, after) = (before.riemannian, after.riemannian);
        let absolute = after > row.rho_bound * before + SLACK;
        let relative = row.observed_ratio.is_some_and(|r| r > row.rho_bound + SLACK);
        if absolute || relative {
            out.push(Violation::LiftedBound {
                t: row.t,
                rho: row.rho_bound,
                before,
                after,
            });
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides the configured lift depth.
    pub depth: Option<LiftDepth>,
    pub svg: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions {
            out_dir: out_dir.into(),
            depth: None,
            svg: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub depth: DepthChoice,
    pub table: DistanceTable,
    pub csv_path: PathBuf,
    pub svg_path: Option<PathBuf>,
}

/// Full experiment: validate, pick the depth, run both recursions, write
/// the CSV (and SVG), then check the invariants.
///
/// Artifacts are written even when an invariant fails, so the offending
/// run can be inspected; the failure is still returned as an error.
pub fn run_contraction_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport, RunError> {
    let resolved = config.resolve()?;
    let depth = choose_depth(config, &resolved, opts.depth.unwrap_or(config.lift_depth))?;
    let table = distance_table(&resolved, &depth)?;

    std::fs::create_dir_all(&opts.out_dir).map_err(|source| RunError::Io {
        path: opts.out_dir.clone(),
        source,
    })?;
    let csv_path = opts.out_dir.join(&config.output.csv);
    csv::write_csv(&table, &csv_path).map_err(|source| io_error(&csv_path, source))?;
    let svg_path = if opts.svg {
        let path = opts.out_dir.join(&config.output.svg);
        let options = svg::SvgOptions {
            log_y: config.output.log_y,
        };
        svg::write_svg(&table, &options, &path).map_err(|source| io_error(&path, source))?;
        Some(path)
    } else {
        None
    };

    let violations = check_invariants(&table, depth.d);
    if !violations.is_empty() {
        return Err(RunError::Invariant(violations));
    }
    Ok(ExperimentReport {
        depth,
        table,
        csv_path,
        svg_path,
    })
}

fn io_error(path: &Path, source: std::io::Error) -> RunError {
    RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}
