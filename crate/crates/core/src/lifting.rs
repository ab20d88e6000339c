//! d-step lifting.
//!
//! Stage `t` of the lifted problem advances the original system from
//! `x_{dt}` to `x_{d(t+1)}` under the stacked input
//! `u_hat_t = (u_{dt}, ..., u_{d(t+1)-1})`. A change of input variable removes
//! the state/input cross term of the lifted cost, leaving a standard LQ stage
//! `(A~, B~, Q~, R~)` whose Riccati operator equals the d-fold composition of
//! the original operators. When the d-step controllability matrix `Gamma` has
//! full row rank and the d-step observability matrix `Xi` has full column
//! rank, `Q~` is PD, `A~` is nonsingular and the lifted operator is a strict
//! contraction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{col_rank_ratio, psd_sqrt, rank_ratio, row_rank_ratio, spd_solve};
use crate::problem::LqProblem;
use crate::riccati::{contraction_from_parts, Contraction};
use crate::spd::SymMatrix;
use crate::tol::Tolerances;

/// Block matrices `A^, B^, C^, R^` of lifted stage `t` at depth `d`.
///
/// * `A^ = I - [[0, 0], [diag(A_{dt..}), 0]]` is `n(d+1) x n(d+1)`,
/// * `B^ = [0; diag(B_{dt..})]` is `n(d+1) x md`,
/// * `C^ = [diag(Q_{dt..}^{1/2}), 0]` is `nd x n(d+1)`,
/// * `R^ = diag(R_{dt..})` is `md x md`.
#[derive(Debug, Clone, PartialEq)]
pub struct HatMatrices {
    pub t: usize,
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub a_hat: DMatrix<f64>,
    pub b_hat: DMatrix<f64>,
    pub c_hat: DMatrix<f64>,
    pub r_hat: DMatrix<f64>,
}

pub fn build_hat(problem: &LqProblem, t: usize, d: usize) -> Result<HatMatrices> {
    if d == 0 {
        return Err(Error::Argument("lift depth d must be at least 1".into()));
    }
    let (n, m) = (problem.n(), problem.m());
    let mut a_hat = DMatrix::identity(n * (d + 1), n * (d + 1));
    let mut b_hat = DMatrix::zeros(n * (d + 1), m * d);
    let mut c_hat = DMatrix::zeros(n * d, n * (d + 1));
    let mut r_hat = DMatrix::zeros(m * d, m * d);
    for j in 0..d {
        let k = d * t + j;
        let stage = problem.stage(k).map_err(|e| e.at_stage(k))?;
        a_hat.view_mut((n * (j + 1), n * j), (n, n)).copy_from(&(-stage.a()));
        b_hat.view_mut((n * (j + 1), m * j), (n, m)).copy_from(stage.b());
        c_hat
            .view_mut((n * j, n * j), (n, n))
            .copy_from(&psd_sqrt(stage.q(), problem.tolerances().psd));
        r_hat.view_mut((m * j, m * j), (m, m)).copy_from(stage.r().as_matrix());
    }
    Ok(HatMatrices {
        t,
        d,
        n,
        m,
        a_hat,
        b_hat,
        c_hat,
        r_hat,
    })
}

impl HatMatrices {
    /// `A^{-1}` by forward block substitution on the unit lower
    /// block-bidiagonal structure: block `(i, j)` is `A_{i-1} ... A_j` for `i >= j`.
    pub fn a_hat_inverse(&self) -> DMatrix<f64> {
        let (n, d) = (self.n, self.d);
        let mut inv = DMatrix::zeros(n * (d + 1), n * (d + 1));
        for j in 0..=d {
            inv.view_mut((n * j, n * j), (n, n)).fill_with_identity();
            for i in j + 1..=d {
                let sub = -self.a_hat.view((n * i, n * (i - 1)), (n, n));
                let prev = inv.view((n * (i - 1), n * j), (n, n)).clone_owned();
                inv.view_mut((n * i, n * j), (n, n)).copy_from(&(sub * prev));
            }
        }
        inv
    }
}

struct Blocks {
    phi: DMatrix<f64>,
    gamma: DMatrix<f64>,
    xi: DMatrix<f64>,
    delta: DMatrix<f64>,
}

fn blocks(h: &HatMatrices) -> Blocks {
    let (n, d) = (h.n, h.d);
    let inv = h.a_hat_inverse();
    let first_cols = inv.columns(0, n);
    let inv_b = &inv * &h.b_hat;
    Blocks {
        phi: first_cols.rows(n * d, n).clone_owned(),
        gamma: inv_b.rows(n * d, n).clone_owned(),
        xi: &h.c_hat * first_cols,
        delta: &h.c_hat * &inv_b,
    }
}

/// `Phi = [0 I] A^{-1} [I; 0]` (the d-step transition matrix) and
/// `Gamma = [0 I] A^{-1} B^` (the d-step controllability matrix).
pub fn phi_gamma(h: &HatMatrices) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = blocks(h);
    (b.phi, b.gamma)
}

/// `Xi = C^ A^{-1} [I; 0]` (the d-step observability matrix) and
/// `Delta = C^ A^{-1} B^`.
pub fn xi_delta(h: &HatMatrices) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = blocks(h);
    (b.xi, b.delta)
}

/// Rank diagnostics of one lifted stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageRank {
    pub t: usize,
    /// `sigma_n(Gamma) / sigma_max(Gamma)`; zero when `md < n`.
    pub gamma_row_ratio: f64,
    /// `sigma_n(Xi) / sigma_max(Xi)`.
    pub xi_col_ratio: f64,
    pub pass: bool,
}

impl StageRank {
    fn new(t: usize, gamma: &DMatrix<f64>, xi: &DMatrix<f64>, tol: &Tolerances) -> Self {
        let gamma_row_ratio = row_rank_ratio(gamma);
        let xi_col_ratio = col_rank_ratio(xi);
        StageRank {
            t,
            gamma_row_ratio,
            xi_col_ratio,
            pass: gamma_row_ratio > tol.rank && xi_col_ratio > tol.rank,
        }
    }
}

/// All matrices of lifted stage `t` at depth `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedStage {
    pub t: usize,
    pub d: usize,
    pub hat: HatMatrices,
    pub phi: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub xi: DMatrix<f64>,
    pub delta: DMatrix<f64>,
    pub q_tilde: SymMatrix,
    pub r_tilde: SymMatrix,
    pub a_tilde: DMatrix<f64>,
    pub b_tilde: DMatrix<f64>,
    /// `R~^{-1} Delta' Xi`, the state feedthrough of the input change of variable.
    pub input_shift: DMatrix<f64>,
    pub rank: StageRank,
    tol: Tolerances,
}

/// Assembles lifted stage `t`:
/// `R~ = R^ + Delta'Delta`, `Q~ = Xi'Xi - Xi'Delta R~^{-1} Delta'Xi`,
/// `A~ = Phi - Gamma R~^{-1} Delta'Xi`, `B~ = Gamma`.
pub fn build_lifted_stage(problem: &LqProblem, t: usize, d: usize) -> Result<LiftedStage> {
    let tol = *problem.tolerances();
    let hat = build_hat(problem, t, d)?;
    let Blocks { phi, gamma, xi, delta } = blocks(&hat);
    let r_tilde = SymMatrix::from_symmetric_unchecked(&hat.r_hat + delta.transpose() * &delta);
    let cross = delta.transpose() * &xi;
    let input_shift = spd_solve(&r_tilde, &cross, "R~").map_err(|e| e.at_stage(t))?;
    let q_tilde = SymMatrix::from_symmetric_unchecked(xi.transpose() * &xi - cross.transpose() * &input_shift);
    let a_tilde = &phi - &gamma * &input_shift;
    let rank = StageRank::new(t, &gamma, &xi, &tol);
    if rank.pass && rank_ratio(&a_tilde, hat.n) <= tol.rank {
        return Err(Error::Consistency(format!(
            "lifted state matrix is singular at stage {t} although the rank conditions hold"
        )));
    }
    Ok(LiftedStage {
        t,
        d,
        b_tilde: gamma.clone(),
        hat,
        phi,
        gamma,
        xi,
        delta,
        q_tilde,
        r_tilde,
        a_tilde,
        input_shift,
        rank,
        tol,
    })
}

impl LiftedStage {
    pub fn n(&self) -> usize {
        self.hat.n
    }

    /// Width `md` of the stacked input.
    pub fn input_dim(&self) -> usize {
        self.hat.m * self.d
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// `Q~` through its Woodbury form `Xi'(I + Delta R^{-1} Delta')^{-1} Xi`.
    pub fn q_tilde_woodbury(&self) -> Result<SymMatrix> {
        let nd = self.xi.nrows();
        let r_inv_dt = spd_solve(&self.hat.r_hat, &self.delta.transpose(), "R^")?;
        let inner = DMatrix::identity(nd, nd) + &self.delta * r_inv_dt;
        let solved = spd_solve(&inner, &self.xi, "I + Delta R^-1 Delta'")?;
        Ok(SymMatrix::from_symmetric_unchecked(self.xi.transpose() * solved))
    }

    /// Lifted cost weight `[[Xi'Xi, Xi'Delta], [Delta'Xi, R~]]` on `(x~, u^)`.
    pub fn cost_matrix(&self) -> DMatrix<f64> {
        let (n, w) = (self.n(), self.input_dim());
        let mut m = DMatrix::zeros(n + w, n + w);
        m.view_mut((0, 0), (n, n)).copy_from(&(self.xi.transpose() * &self.xi));
        let cross = self.delta.transpose() * &self.xi;
        m.view_mut((n, 0), (w, n)).copy_from(&cross);
        m.view_mut((0, n), (n, w)).copy_from(&cross.transpose());
        m.view_mut((n, n), (w, w)).copy_from(self.r_tilde.as_matrix());
        m
    }

    /// The unit lower block-triangular factor `L = [[I, 0], [R~^{-1}Delta'Xi, I]]`
    /// with `cost_matrix = L' diag(Q~, R~) L`.
    pub fn ldu_factor(&self) -> DMatrix<f64> {
        let (n, w) = (self.n(), self.input_dim());
        let mut l = DMatrix::identity(n + w, n + w);
        l.view_mut((n, 0), (w, n)).copy_from(&self.input_shift);
        l
    }

    /// `R^ + Delta'Delta - Delta'Xi Phi^{-1} Gamma`. Block upper triangular with
    /// the blocks of `R^` on its diagonal; nonsingular exactly when `A~` is.
    pub fn schur_diagnostic(&self) -> Result<DMatrix<f64>> {
        let phi_inv_gamma = crate::linalg::solve(&self.phi, &self.gamma, self.tol.rank, "Phi")?;
        Ok(self.r_tilde.as_matrix() - self.delta.transpose() * &self.xi * phi_inv_gamma)
    }

    /// The decoupled stage data `(A~, B~, Q~, R~)`, borrowed.
    pub(crate) fn parts(&self) -> (&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>) {
        (
            &self.a_tilde,
            &self.b_tilde,
            self.q_tilde.as_matrix(),
            self.r_tilde.as_matrix(),
        )
    }
}

/// Rank checks of `Gamma_t` (row rank) and `Xi_t` (column rank) over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub d: usize,
    pub t_lo: usize,
    pub t_hi: usize,
    pub stages: Vec<StageRank>,
    pub pass: bool,
}

impl RankReport {
    pub fn failures(&self) -> impl Iterator<Item = &StageRank> {
        self.stages.iter().filter(|s| !s.pass)
    }
}

pub fn rank_report(problem: &LqProblem, d: usize, t_lo: usize, t_hi: usize) -> Result<RankReport> {
    if t_lo > t_hi {
        return Err(Error::Argument(format!("t_lo ({t_lo}) must not exceed t_hi ({t_hi})")));
    }
    let tol = problem.tolerances();
    let stages = (t_lo..=t_hi)
        .map(|t| {
            let hat = build_hat(problem, t, d)?;
            let b = blocks(&hat);
            Ok(StageRank::new(t, &b.gamma, &b.xi, tol))
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = stages.iter().all(|s| s.pass);
    Ok(RankReport {
        d,
        t_lo,
        t_hi,
        stages,
        pass,
    })
}

/// Smallest `d <= d_max` whose rank report passes on `[t_lo, t_hi]`.
///
/// Depths whose window would need stages beyond a finite problem end the search.
pub fn minimal_lift_depth(problem: &LqProblem, t_lo: usize, t_hi: usize, d_max: usize) -> Result<Option<usize>> {
    if d_max == 0 {
        return Err(Error::Argument("d_max must be at least 1".into()));
    }
    for d in 1..=d_max {
        if let Some(len) = problem.len() {
            if d * (t_hi + 1) > len {
                break;
            }
        }
        if rank_report(problem, d, t_lo, t_hi)?.pass {
            return Ok(Some(d));
        }
    }
    Ok(None)
}

/// Strict contraction certificate of the lifted Riccati operator.
pub fn lifted_contraction(stage: &LiftedStage) -> Result<Contraction> {
    let (a, b, q, r) = stage.parts();
    contraction_from_parts(a, b, q, r, &stage.tol)
}

fn check_io(stage: &LiftedStage, x: &DVector<f64>, u: &DVector<f64>, context: &'static str) -> Result<()> {
    if x.len() != stage.n() {
        return Err(Error::dim(context, format!("state of length {}", stage.n()), x.len()));
    }
    if u.len() != stage.input_dim() {
        return Err(Error::dim(
            context,
            format!("input of length {}", stage.input_dim()),
            u.len(),
        ));
    }
    Ok(())
}

/// `u~ = R~^{-1} Delta' Xi x~ + u^`.
pub fn lift_input(stage: &LiftedStage, x: &DVector<f64>, u_hat: &DVector<f64>) -> Result<DVector<f64>> {
    check_io(stage, x, u_hat, "lift_input")?;
    Ok(&stage.input_shift * x + u_hat)
}

/// Inverse of [`lift_input`]: `u^ = u~ - R~^{-1} Delta' Xi x~`.
pub fn unlift_input(stage: &LiftedStage, x: &DVector<f64>, u_tilde: &DVector<f64>) -> Result<DVector<f64>> {
    check_io(stage, x, u_tilde, "unlift_input")?;
    Ok(u_tilde - &stage.input_shift * x)
}
