//! Stage data `(A_k, B_k, Q_k, R_k)` and time-varying LQ problems.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{eig_extremes, rank_ratio};
use crate::spd::{is_spd, SymMatrix};
use crate::tol::Tolerances;

/// Raw, unvalidated matrices of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StageMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// Validated data of one time step.
///
/// Invariants: `A` is nonsingular, `Q` is symmetric PSD and `R` is symmetric PD.
#[derive(Debug, Clone, PartialEq)]
pub struct StageData {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: SymMatrix,
    r: SymMatrix,
}

impl StageData {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerances(a, b, q, r, &Tolerances::default())
    }

    pub fn with_tolerances(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::dim(
                "StageData::A",
                "nonempty square",
                format!("{}x{}", a.nrows(), a.ncols()),
            ));
        }
        let m = b.ncols();
        if b.nrows() != n || m == 0 {
            return Err(Error::dim(
                "StageData::B",
                format!("{n}xm, m >= 1"),
                format!("{}x{}", b.nrows(), b.ncols()),
            ));
        }
        if q.shape() != (n, n) {
            return Err(Error::dim(
                "StageData::Q",
                format!("{n}x{n}"),
                format!("{}x{}", q.nrows(), q.ncols()),
            ));
        }
        if r.shape() != (m, m) {
            return Err(Error::dim(
                "StageData::R",
                format!("{m}x{m}"),
                format!("{}x{}", r.nrows(), r.ncols()),
            ));
        }
        if a.iter()
            .chain(b.iter())
            .chain(q.iter())
            .chain(r.iter())
            .any(|x| !x.is_finite())
        {
            return Err(Error::Argument("stage data contains non-finite entries".into()));
        }
        let a_ratio = rank_ratio(&a, n);
        if a_ratio <= tol.rank {
            return Err(Error::Precondition(format!(
                "A is singular (sigma_min/sigma_max = {a_ratio:e})"
            )));
        }
        let q = SymMatrix::new(q)?;
        let (q_min, q_radius) = eig_extremes(&q);
        if q_min < -tol.psd * q_radius.max(1.0) {
            return Err(Error::Argument(format!("Q not PSD (smallest eigenvalue {q_min:e})")));
        }
        let r = SymMatrix::new(r)?;
        let r_check = is_spd(&r, tol.pd);
        if !r_check.is_spd {
            return Err(Error::Argument(format!(
                "R not PD (smallest eigenvalue {:e})",
                r_check.min_eig
            )));
        }
        Ok(StageData { a, b, q, r })
    }

    pub fn from_matrices(m: StageMatrices, tol: &Tolerances) -> Result<Self> {
        Self::with_tolerances(m.a, m.b, m.q, m.r, tol)
    }

    /// Scalar stage (`n = m = 1`).
    pub fn scalar(a: f64, b: f64, q: f64, r: f64) -> Result<Self> {
        let s = |x| DMatrix::from_element(1, 1, x);
        Self::new(s(a), s(b), s(q), s(r))
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn q(&self) -> &SymMatrix {
        &self.q
    }

    pub fn r(&self) -> &SymMatrix {
        &self.r
    }

    pub fn to_matrices(&self) -> StageMatrices {
        StageMatrices {
            a: self.a.clone(),
            b: self.b.clone(),
            q: self.q.as_matrix().clone(),
            r: self.r.as_matrix().clone(),
        }
    }
}

/// Stages of the form `base + alpha^k sin(omega k) * perturbation`, applied
/// to each of `A, B, Q, R`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricStages {
    pub base: StageMatrices,
    pub perturbation: StageMatrices,
    pub alpha: f64,
    pub omega: f64,
}

impl ParametricStages {
    pub fn modulation(&self, k: usize) -> f64 {
        self.alpha.powi(k as i32) * (self.omega * k as f64).sin()
    }

    pub fn matrices(&self, k: usize) -> StageMatrices {
        let s = self.modulation(k);
        let (b, p) = (&self.base, &self.perturbation);
        StageMatrices {
            a: &b.a + &p.a * s,
            b: &b.b + &p.b * s,
            q: &b.q + &p.q * s,
            r: &b.r + &p.r * s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)] // one per problem, never in bulk
pub enum StageSource {
    /// Finite list; stage `k` is `stages[k]`.
    Explicit(Vec<Arc<StageData>>),
    Parametric(ParametricStages),
}

/// A time-varying LQ problem: dimensions plus a rule giving the stage data
/// for every `k`. Parametric stages are validated on first access and cached.
#[derive(Debug)]
pub struct LqProblem {
    n: usize,
    m: usize,
    source: StageSource,
    tol: Tolerances,
    cache: Mutex<HashMap<usize, Arc<StageData>>>,
}

impl Clone for LqProblem {
    fn clone(&self) -> Self {
        LqProblem {
            n: self.n,
            m: self.m,
            source: self.source.clone(),
            tol: self.tol,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl LqProblem {
    pub fn explicit(stages: Vec<StageData>) -> Result<Self> {
        let first = stages
            .first()
            .ok_or_else(|| Error::Argument("explicit problem needs at least one stage".into()))?;
        let (n, m) = (first.n(), first.m());
        for (k, s) in stages.iter().enumerate() {
            if s.n() != n || s.m() != m {
                return Err(Error::dim(
                    "LqProblem::explicit",
                    format!("n={n}, m={m}"),
                    format!("n={}, m={}", s.n(), s.m()),
                )
                .at_stage(k));
            }
        }
        Ok(LqProblem {
            n,
            m,
            source: StageSource::Explicit(stages.into_iter().map(Arc::new).collect()),
            tol: Tolerances::default(),
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// A problem whose data repeats `stage` for `len` steps.
    pub fn stationary(stage: StageData, len: usize) -> Result<Self> {
        Self::explicit(vec![stage; len])
    }

    pub fn parametric(stages: ParametricStages, tol: Tolerances) -> Result<Self> {
        let (base, pert) = (&stages.base, &stages.perturbation);
        let n = base.a.nrows();
        let m = base.b.ncols();
        let shapes = [
            ("A", base.a.shape(), pert.a.shape(), (n, n)),
            ("B", base.b.shape(), pert.b.shape(), (n, m)),
            ("Q", base.q.shape(), pert.q.shape(), (n, n)),
            ("R", base.r.shape(), pert.r.shape(), (m, m)),
        ];
        for (name, got_base, got_pert, want) in shapes {
            if got_base != want || got_pert != want {
                return Err(Error::Dimension {
                    context: "LqProblem::parametric",
                    expected: format!("{name} of shape {}x{}", want.0, want.1),
                    actual: format!("base {:?}, perturbation {:?}", got_base, got_pert),
                });
            }
        }
        if !stages.alpha.is_finite() || !stages.omega.is_finite() {
            return Err(Error::Argument("alpha and omega must be finite".into()));
        }
        Ok(LqProblem {
            n,
            m,
            source: StageSource::Parametric(stages),
            tol,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self.cache = Mutex::new(HashMap::new());
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn source(&self) -> &StageSource {
        &self.source
    }

    /// Number of stages when the source is finite.
    pub fn len(&self) -> Option<usize> {
        match &self.source {
            StageSource::Explicit(v) => Some(v.len()),
            StageSource::Parametric(_) => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    pub fn stage(&self, k: usize) -> Result<Arc<StageData>> {
        match &self.source {
            StageSource::Explicit(v) => v.get(k).cloned().ok_or(Error::Range {
                index: k,
                available: v.len(),
            }),
            StageSource::Parametric(p) => {
                if let Some(s) = self.cache.lock().expect("stage cache poisoned").get(&k) {
                    return Ok(Arc::clone(s));
                }
                let stage = StageData::from_matrices(p.matrices(k), &self.tol).map_err(|e| e.at_stage(k))?;
                let stage = Arc::new(stage);
                self.cache
                    .lock()
                    .expect("stage cache poisoned")
                    .insert(k, Arc::clone(&stage));
                Ok(stage)
            }
        }
    }

    /// Validates every stage in `[k_lo, k_hi]`.
    pub fn check_window(&self, k_lo: usize, k_hi: usize) -> Result<()> {
        for k in k_lo..=k_hi {
            self.stage(k)?;
        }
        Ok(())
    }
}
