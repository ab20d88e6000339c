//! Experiment configuration: a JSON document with a schema version.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "problem": { "parametric": { "base": {...}, "perturbation": {...}, "alpha": 0.9, "omega": 1.0 } },
//!   "horizon": 20,
//!   "boundaries": { "x": 0.01, "y": 100.0 },
//!   "lift_depth": "auto"
//! }
//! ```
//!
//! Matrices are either row lists (`[[1, 2], [3, 4]]`) or, for square slots,
//! a scalar `s` meaning `s * I`. `B` must always be given as rows since it
//! fixes the state and input dimensions.

use std::fmt;

use ricclift::{
    is_spd, DMatrix, Error as CoreError, LqProblem, ParametricStages, StageData, StageMatrices, SymMatrix, Tolerances,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_HORIZON: usize = 20;
/// Observed ratios are only reported when the denominator distance exceeds this.
pub const DEFAULT_RATIO_FLOOR: f64 = 1e-8;

/// A configuration problem, located by its key path in the document.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {reason}")]
pub struct ConfigError {
    pub path: String,
    pub reason: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub problem: ProblemSpec,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    pub boundaries: Boundaries,
    #[serde(default)]
    pub lift_depth: LiftDepth,
    /// Lifted-stage indices `[t_lo, t_hi]`; defaults to every whole lifted stage in `[0, T]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `M_k = M_base + alpha^k sin(omega k) M_perturbation` for each of A, B, Q, R.
    Parametric {
        base: StageSpec,
        perturbation: StageSpec,
        alpha: f64,
        omega: f64,
    },
    Explicit {
        stages: Vec<StageSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    #[serde(rename = "A")]
    pub a: MatrixSpec,
    #[serde(rename = "B")]
    pub b: MatrixSpec,
    #[serde(rename = "Q")]
    pub q: MatrixSpec,
    #[serde(rename = "R")]
    pub r: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Boundaries {
    pub x: MatrixSpec,
    pub y: MatrixSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "LiftDepthRepr", into = "LiftDepthRepr")]
pub enum LiftDepth {
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LiftDepthRepr {
    Fixed(usize),
    Named(String),
}

impl TryFrom<LiftDepthRepr> for LiftDepth {
    type Error = String;

    fn try_from(r: LiftDepthRepr) -> Result<Self, String> {
        match r {
            LiftDepthRepr::Fixed(0) => Err("lift depth must be at least 1".into()),
            LiftDepthRepr::Fixed(d) => Ok(LiftDepth::Fixed(d)),
            LiftDepthRepr::Named(s) if s == "auto" => Ok(LiftDepth::Auto),
            LiftDepthRepr::Named(s) => Err(format!("expected a positive integer or \"auto\", got {s:?}")),
        }
    }
}

impl From<LiftDepth> for LiftDepthRepr {
    fn from(d: LiftDepth) -> Self {
        match d {
            LiftDepth::Auto => LiftDepthRepr::Named("auto".into()),
            LiftDepth::Fixed(d) => LiftDepthRepr::Fixed(d),
        }
    }
}

impl std::str::FromStr for LiftDepth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.parse::<usize>() {
            Ok(d) => LiftDepth::try_from(LiftDepthRepr::Fixed(d)),
            Err(_) => LiftDepth::try_from(LiftDepthRepr::Named(s.to_string())),
        }
    }
}

impl fmt::Display for LiftDepth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LiftDepth::Auto => f.write_str("auto"),
            LiftDepth::Fixed(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub t_lo: usize,
    pub t_hi: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// File names, relative to the output directory.
    #[serde(default = "default_csv")]
    pub csv: String,
    #[serde(default = "default_svg")]
    pub svg: String,
    #[serde(default = "default_true")]
    pub log_y: bool,
}

fn default_csv() -> String {
    "distances.csv".into()
}

fn default_svg() -> String {
    "distances.svg".into()
}

fn default_true() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            csv: default_csv(),
            svg: default_svg(),
            log_y: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_floor: Option<f64>,
}

impl ToleranceOverrides {
    pub fn resolve(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            pd: self.pd.unwrap_or(d.pd),
            psd: self.psd.unwrap_or(d.psd),
            rank: self.rank.unwrap_or(d.rank),
        }
    }

    pub fn ratio_floor(&self) -> f64 {
        self.ratio_floor.unwrap_or(DEFAULT_RATIO_FLOOR)
    }
}

impl MatrixSpec {
    /// Materializes the matrix; `square` is the dimension a scalar expands to.
    pub fn to_matrix(&self, path: &str, square: Option<usize>) -> Result<DMatrix<f64>, ConfigError> {
        match self {
            MatrixSpec::Scalar(s) => match square {
                Some(n) => Ok(DMatrix::identity(n, n) * *s),
                None => Err(ConfigError::new(
                    path,
                    "scalar shorthand is only allowed for square matrices",
                )),
            },
            MatrixSpec::Rows(rows) => {
                let nrows = rows.len();
                let ncols = rows.first().map_or(0, Vec::len);
                if nrows == 0 || ncols == 0 {
                    return Err(ConfigError::new(
                        path,
                        "matrix must have at least one row and one column",
                    ));
                }
                if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
                    return Err(ConfigError::new(
                        path,
                        format!("ragged rows: row {i} has {} entries, row 0 has {ncols}", rows[i].len()),
                    ));
                }
                if rows.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(ConfigError::new(path, "entries must be finite"));
                }
                Ok(DMatrix::from_row_iterator(nrows, ncols, rows.iter().flatten().copied()))
            }
        }
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        MatrixSpec::Rows(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }
}

impl StageSpec {
    fn dims(&self, path: &str) -> Result<(usize, usize), ConfigError> {
        match &self.b {
            MatrixSpec::Rows(_) => {
                let b = self.b.to_matrix(&format!("{path}.B"), None)?;
                Ok(b.shape())
            }
            MatrixSpec::Scalar(_) => Err(ConfigError::new(
                format!("{path}.B"),
                "B must be given as rows; it fixes the state and input dimensions",
            )),
        }
    }

    fn matrices(&self, path: &str, n: usize, m: usize) -> Result<StageMatrices, ConfigError> {
        let get = |spec: &MatrixSpec, name: &str, want: (usize, usize)| {
            let p = format!("{path}.{name}");
            let square = (want.0 == want.1).then_some(want.0);
            let mat = spec.to_matrix(&p, square)?;
            if mat.shape() != want {
                return Err(ConfigError::new(
                    p,
                    format!("expected {}x{}, got {}x{}", want.0, want.1, mat.nrows(), mat.ncols()),
                ));
            }
            Ok(mat)
        };
        Ok(StageMatrices {
            a: get(&self.a, "A", (n, n))?,
            b: get(&self.b, "B", (n, m))?,
            q: get(&self.q, "Q", (n, n))?,
            r: get(&self.r, "R", (m, m))?,
        })
    }

    pub fn from_matrices(s: &StageMatrices) -> Self {
        StageSpec {
            a: MatrixSpec::from_matrix(&s.a),
            b: MatrixSpec::from_matrix(&s.b),
            q: MatrixSpec::from_matrix(&s.q),
            r: MatrixSpec::from_matrix(&s.r),
        }
    }
}

/// Everything needed to run, materialized from a validated config.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub problem: LqProblem,
    pub horizon: usize,
    pub x_terminal: SymMatrix,
    pub y_terminal: SymMatrix,
    pub ratio_floor: f64,
}

/// Parses and fully validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." || path == "?" {
            "<root>".to_string()
        } else {
            path
        };
        ConfigError::new(path, e.into_inner().to_string())
    })?;
    config.resolve()?;
    Ok(config)
}

pub fn to_json(config: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}

impl ExperimentConfig {
    /// Builds the problem and checks every stage in `[0, T]` plus the boundaries.
    pub fn resolve(&self) -> Result<ResolvedConfig, ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "schema_version",
                format!(
                    "unsupported schema version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        if self.horizon == 0 {
            return Err(ConfigError::new("horizon", "horizon must be at least 1"));
        }
        let tol = self.tolerances.resolve();
        for (name, v) in [
            ("pd", tol.pd),
            ("psd", tol.psd),
            ("rank", tol.rank),
            ("ratio_floor", self.tolerances.ratio_floor()),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::new(
                    format!("tolerances.{name}"),
                    "must be a finite non-negative number",
                ));
            }
        }

        let problem = match &self.problem {
            ProblemSpec::Parametric {
                base,
                perturbation,
                alpha,
                omega,
            } => {
                let (n, m) = base.dims("problem.parametric.base")?;
                let stages = ParametricStages {
                    base: base.matrices("problem.parametric.base", n, m)?,
                    perturbation: perturbation.matrices("problem.parametric.perturbation", n, m)?,
                    alpha: *alpha,
                    omega: *omega,
                };
                LqProblem::parametric(stages, tol).map_err(|e| ConfigError::new("problem", e.to_string()))?
            }
            ProblemSpec::Explicit { stages } => {
                let first = stages
                    .first()
                    .ok_or_else(|| ConfigError::new("problem.explicit.stages", "at least one stage is required"))?;
                let (n, m) = first.dims("problem.explicit.stages[0]")?;
                if stages.len() < self.horizon {
                    return Err(ConfigError::new(
                        "problem.explicit.stages",
                        format!(
                            "horizon {} needs at least {} stages, got {}",
                            self.horizon,
                            self.horizon,
                            stages.len()
                        ),
                    ));
                }
                let data = stages
                    .iter()
                    .enumerate()
                    .map(|(k, s)| {
                        let path = format!("problem.explicit.stages[{k}]");
                        let mats = s.matrices(&path, n, m)?;
                        StageData::from_matrices(mats, &tol).map_err(|e| ConfigError::new(path, describe(&e)))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                LqProblem::explicit(data)
                    .map_err(|e| ConfigError::new("problem", e.to_string()))?
                    .with_tolerances(tol)
            }
        };

        // Stages 0..T drive the recursion; stage T is checked too when it exists.
        let last = match problem.len() {
            Some(len) => self.horizon.min(len - 1),
            None => self.horizon,
        };
        for k in 0..=last {
            problem
                .stage(k)
                .map_err(|e| ConfigError::new(stage_path(&self.problem, k), describe(&e)))?;
        }

        let n = problem.n();
        let boundary = |spec: &MatrixSpec, name: &str| -> Result<SymMatrix, ConfigError> {
            let path = format!("boundaries.{name}");
            let mat = spec.to_matrix(&path, Some(n))?;
            if mat.shape() != (n, n) {
                return Err(ConfigError::new(
                    path,
                    format!("expected {n}x{n}, got {}x{}", mat.nrows(), mat.ncols()),
                ));
            }
            let sym = SymMatrix::new(mat).map_err(|e| ConfigError::new(&path, e.to_string()))?;
            if !is_spd(&sym, tol.pd).is_spd {
                return Err(ConfigError::new(path, "boundary matrix must be positive definite"));
            }
            Ok(sym)
        };
        let x_terminal = boundary(&self.boundaries.x, "x")?;
        let y_terminal = boundary(&self.boundaries.y, "y")?;

        if let Some(w) = self.window {
            if w.t_lo > w.t_hi {
                return Err(ConfigError::new("window", "t_lo must not exceed t_hi"));
            }
        }
        if let LiftDepth::Fixed(d) = self.lift_depth {
            self.lifted_window(d).ok_or_else(|| {
                ConfigError::new(
                    "lift_depth",
                    format!(
                        "lift depth {d} leaves no whole lifted stage inside the window and horizon {}",
                        self.horizon
                    ),
                )
            })?;
        }

        Ok(ResolvedConfig {
            problem,
            horizon: self.horizon,
            x_terminal,
            y_terminal,
            ratio_floor: self.tolerances.ratio_floor(),
        })
    }

    /// Lifted-stage window for depth `d`, or `None` if it does not fit in `[0, T]`.
    pub fn lifted_window(&self, d: usize) -> Option<Window> {
        let whole = self.horizon / d;
        if whole == 0 {
            return None;
        }
        let w = self.window.unwrap_or(Window {
            t_lo: 0,
            t_hi: whole - 1,
        });
        (w.t_lo <= w.t_hi && w.t_hi < whole).then_some(w)
    }
}

fn stage_path(spec: &ProblemSpec, k: usize) -> String {
    match spec {
        ProblemSpec::Parametric { .. } => format!("problem.parametric (stage {k})"),
        ProblemSpec::Explicit { .. } => format!("problem.explicit.stages[{k}]"),
    }
}

/// Strips error wrappers so the reason reads like "Q not PSD".
fn describe(e: &CoreError) -> String {
    match e.root() {
        CoreError::Precondition(s) | CoreError::Argument(s) => s.clone(),
        other => other.to_string(),
    }
}
