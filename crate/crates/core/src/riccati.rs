//! The Riccati operator `P -> Q + A'(P - PB(R + B'PB)^{-1}B'P)A`, its
//! linear-fractional form, per-step contraction certificates, and the
//! backward recursion `P_k = R_k(P_{k+1})`.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{eig_extremes, inverse, rank_ratio, row_rank_ratio, solve, spd_solve, symmetrize};
use crate::problem::{LqProblem, StageData};
use crate::spd::SymMatrix;
use crate::tol::Tolerances;

pub(crate) fn check_psd_arg(p: &SymMatrix, n: usize, tol: &Tolerances, context: &'static str) -> Result<()> {
    if p.dim() != n {
        return Err(Error::dim(context, format!("{n}x{n}"), format!("{0}x{0}", p.dim())));
    }
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument(format!("{context}: P has non-finite entries")));
    }
    if !p.is_psd(tol.psd) {
        return Err(Error::Argument(format!(
            "{context}: P is not PSD (smallest eigenvalue {:e})",
            p.min_eigenvalue()
        )));
    }
    Ok(())
}

/// Riccati step on raw parts. `r` must be PD, `p` PSD; not re-checked.
pub(crate) fn riccati_step(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<SymMatrix> {
    let pa = p * a;
    let bt = b.transpose();
    let s = r + &bt * p * b;
    let btpa = &bt * &pa;
    let k = spd_solve(&s, &btpa, "R + B'PB")?;
    let out = q + a.transpose() * &pa - btpa.transpose() * k;
    Ok(SymMatrix::from_symmetric_unchecked(out))
}

/// One backward Riccati step `R_k(P)`.
pub fn riccati_apply(stage: &StageData, p: &SymMatrix) -> Result<SymMatrix> {
    check_psd_arg(p, stage.n(), &Tolerances::default(), "riccati_apply")?;
    riccati_step(stage.a(), stage.b(), stage.q(), stage.r(), p)
}

/// Matrices `(E, F, G, H)` with `R(P) = (EP + F)(GP + H)^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LftForm {
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

impl LftForm {
    /// `F E'`; symmetric PSD for any valid stage.
    pub fn fe_t(&self) -> DMatrix<f64> {
        &self.f * self.e.transpose()
    }

    /// `E' G`; symmetric PSD for any valid stage.
    pub fn e_t_g(&self) -> DMatrix<f64> {
        self.e.transpose() * &self.g
    }
}

/// Builds the linear-fractional representation of a stage's Riccati operator:
/// `E = A' + Q A^{-1} B R^{-1} B'`, `F = Q A^{-1}`, `G = A^{-1} B R^{-1} B'`, `H = A^{-1}`.
pub fn lft_form(stage: &StageData) -> Result<LftForm> {
    let tol = Tolerances::default();
    let h = inverse(stage.a(), tol.rank, "A").map_err(|_| Error::Precondition("A is singular".into()))?;
    let r_inv_bt = spd_solve(stage.r(), &stage.b().transpose(), "R")?;
    let g = &h * stage.b() * r_inv_bt;
    let q = stage.q().as_matrix();
    let e = stage.a().transpose() + q * &g;
    let f = q * &h;
    if rank_ratio(&e, e.nrows()) <= tol.rank {
        return Err(Error::Numerical("E is numerically singular".into()));
    }
    Ok(LftForm { e, f, g, h })
}

/// Evaluates `(EP + F)(GP + H)^{-1}`.
pub fn lft_apply(lft: &LftForm, p: &SymMatrix) -> Result<SymMatrix> {
    let n = lft.e.nrows();
    if p.dim() != n {
        return Err(Error::dim("lft_apply", format!("{n}x{n}"), format!("{0}x{0}", p.dim())));
    }
    let num = &lft.e * p.as_matrix() + &lft.f;
    let den = &lft.g * p.as_matrix() + &lft.h;
    // X den = num  <=>  den' X' = num'
    let xt = solve(&den.transpose(), &num.transpose(), Tolerances::default().rank, "GP + H")?;
    Ok(SymMatrix::from_symmetric_unchecked(xt.transpose()))
}

/// Rates certifying `delta(R(X), R(Y)) <= rho * delta(X, Y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionBound {
    pub zeta: f64,
    pub eps: f64,
    pub rho: f64,
}

impl ContractionBound {
    fn new(zeta: f64, eps: f64) -> Self {
        ContractionBound {
            zeta,
            eps,
            rho: zeta / (zeta + eps),
        }
    }
}

/// Which strict-contraction hypothesis failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NotStrictReason {
    /// The state cost is only semidefinite.
    QNotPd,
    /// The input matrix does not have full row rank.
    BRowRank,
    /// The state matrix is numerically singular (only reachable for lifted stages).
    ANotInvertible,
}

impl fmt::Display for NotStrictReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NotStrictReason::QNotPd => "Q not PD",
            NotStrictReason::BRowRank => "B row rank",
            NotStrictReason::ANotInvertible => "A not invertible",
        })
    }
}

/// Strict certificate, or the reason none is available. In the latter case
/// the operator is still non-expansive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Contraction {
    Strict(ContractionBound),
    NotStrict(NotStrictReason),
}

impl Contraction {
    pub fn is_strict(&self) -> bool {
        matches!(self, Contraction::Strict(_))
    }

    pub fn bound(&self) -> Option<&ContractionBound> {
        match self {
            Contraction::Strict(b) => Some(b),
            Contraction::NotStrict(_) => None,
        }
    }

    pub fn rho(&self) -> Option<f64> {
        self.bound().map(|b| b.rho)
    }
}

pub(crate) fn contraction_from_parts(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<Contraction> {
    let n = a.nrows();
    if rank_ratio(a, n) <= tol.rank {
        return Ok(Contraction::NotStrict(NotStrictReason::ANotInvertible));
    }
    let (q_min, q_radius) = eig_extremes(q);
    if !(q_min > tol.rank * q_radius) {
        return Ok(Contraction::NotStrict(NotStrictReason::QNotPd));
    }
    if row_rank_ratio(b) <= tol.rank {
        return Ok(Contraction::NotStrict(NotStrictReason::BRowRank));
    }
    // W = A^{-1} B
    let w = solve(a, b, tol.rank, "A")?;
    let wt = w.transpose();
    let r_inv_wt = spd_solve(r, &wt, "R")?;
    let m = q + q * &w * r_inv_wt * q;
    let (m_min, _) = eig_extremes(&symmetrize(&m));
    if !(m_min > 0.0) {
        return Err(Error::Numerical(
            "Q + Q A^-1 B R^-1 B' A^-T Q is not positive definite".into(),
        ));
    }
    let zeta = 1.0 / m_min;
    let s = r + &wt * q * &w;
    let n_mat = &w * spd_solve(&s, &wt, "R + B'A^-T Q A^-1 B")?;
    let (eps, _) = eig_extremes(&symmetrize(&n_mat));
    if !(eps > 0.0) {
        return Ok(Contraction::NotStrict(NotStrictReason::BRowRank));
    }
    Ok(Contraction::Strict(ContractionBound::new(zeta, eps)))
}

/// Strict contraction rate of a single stage, available when `Q` is PD and
/// `B` has full row rank:
/// `zeta = |(Q + Q A^{-1} B R^{-1} B' A^{-T} Q)^{-1}|_2`,
/// `eps = lambda_min(A^{-1} B (R + B' A^{-T} Q A^{-1} B)^{-1} B' A^{-T})`,
/// `rho = zeta / (zeta + eps)`.
pub fn contraction_bound(stage: &StageData) -> Result<Contraction> {
    let tol = Tolerances::default();
    match contraction_from_parts(stage.a(), stage.b(), stage.q(), stage.r(), &tol)? {
        Contraction::NotStrict(NotStrictReason::ANotInvertible) => Err(Error::Precondition("A is singular".into())),
        c => Ok(c),
    }
}

/// Solution of the backward recursion on `[k_lo, k_hi]`, stored in
/// ascending `k`. The entry at `k_hi` is the boundary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiTrace {
    k_lo: usize,
    mats: Vec<SymMatrix>,
}

impl RiccatiTrace {
    pub fn k_lo(&self) -> usize {
        self.k_lo
    }

    pub fn boundary_index(&self) -> usize {
        self.k_lo + self.mats.len() - 1
    }

    pub fn boundary(&self) -> &SymMatrix {
        self.mats.last().expect("trace is never empty")
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn at(&self, k: usize) -> Option<&SymMatrix> {
        k.checked_sub(self.k_lo).and_then(|i| self.mats.get(i))
    }

    /// `(k, P_k)` in ascending `k`.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (usize, &SymMatrix)> + '_ {
        self.mats.iter().enumerate().map(move |(i, p)| (self.k_lo + i, p))
    }

    /// Recomputes each step and returns the largest relative Frobenius
    /// discrepancy `|P_k - R_k(P_{k+1})| / |P_k|`.
    pub fn verify(&self, problem: &LqProblem) -> Result<f64> {
        let mut worst = 0.0f64;
        for i in 0..self.mats.len() - 1 {
            let k = self.k_lo + i;
            let stage = problem.stage(k)?;
            let next = riccati_step(stage.a(), stage.b(), stage.q(), stage.r(), &self.mats[i + 1])
                .map_err(|e| e.at_stage(k))?;
            worst = worst.max(crate::linalg::relative_error(&next, &self.mats[i]));
        }
        Ok(worst)
    }
}

/// Iterates `P_k = R_k(P_{k+1})` from `P_{k_hi} = p_terminal` down to `k_lo`.
pub fn backward_recursion(
    problem: &LqProblem,
    k_hi: usize,
    k_lo: usize,
    p_terminal: &SymMatrix,
) -> Result<RiccatiTrace> {
    if k_lo > k_hi {
        return Err(Error::Argument(format!("k_lo ({k_lo}) must not exceed k_hi ({k_hi})")));
    }
    check_psd_arg(p_terminal, problem.n(), problem.tolerances(), "backward_recursion")?;
    let mut mats = Vec::with_capacity(k_hi - k_lo + 1);
    mats.push(p_terminal.clone());
    for k in (k_lo..k_hi).rev() {
        let stage = problem.stage(k).map_err(|e| e.at_stage(k))?;
        let next = mats.last().expect("non-empty");
        let p = riccati_step(stage.a(), stage.b(), stage.q(), stage.r(), next).map_err(|e| e.at_stage(k))?;
        mats.push(p);
    }
    mats.reverse();
    Ok(RiccatiTrace { k_lo, mats })
}

pub(crate) fn gain_from_parts(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p_next: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let bt = b.transpose();
    let s = r + &bt * p_next * b;
    spd_solve(&s, &(&bt * p_next * a), "R + B'PB")
}

/// Optimal feedback gain `K = (R + B'PB)^{-1} B'PA`, so that `u = -K x`.
pub fn optimal_gain(stage: &StageData, p_next: &SymMatrix) -> Result<DMatrix<f64>> {
    check_psd_arg(p_next, stage.n(), &Tolerances::default(), "optimal_gain")?;
    gain_from_parts(stage.a(), stage.b(), stage.r(), p_next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::StageData;

    fn unit() -> StageData {
        StageData::scalar(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    fn s(x: f64) -> SymMatrix {
        SymMatrix::from_diagonal(&[x])
    }

    #[test]
    fn scalar_step() {
        // 1 + (1 - 1/(1+1))
        let p = riccati_apply(&unit(), &s(1.0)).unwrap();
        assert!((p[(0, 0)] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn uncontrolled_step() {
        let stage = StageData::scalar(2.0, 0.0, 1.0, 1.0).unwrap();
        let p = riccati_apply(&stage, &s(3.0)).unwrap();
        assert_eq!(p[(0, 0)], 13.0);
    }

    #[test]
    fn rejects_non_psd_and_wrong_dim() {
        assert!(matches!(riccati_apply(&unit(), &s(-1.0)), Err(Error::Argument(_))));
        assert!(matches!(
            riccati_apply(&unit(), &SymMatrix::identity(2)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn scalar_lft() {
        let lft = lft_form(&unit()).unwrap();
        assert_eq!(
            (lft.e[(0, 0)], lft.f[(0, 0)], lft.g[(0, 0)], lft.h[(0, 0)]),
            (2.0, 1.0, 1.0, 1.0)
        );
        let p = lft_apply(&lft, &s(1.0)).unwrap();
        assert!((p[(0, 0)] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn lft_without_cost_or_control() {
        let a0 = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 3.0]);
        let stage = StageData::new(
            a0.clone(),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 2),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let lft = lft_form(&stage).unwrap();
        assert_eq!(lft.e, a0.transpose());
        assert_eq!(lft.f, DMatrix::zeros(2, 2));
        assert_eq!(lft.g, DMatrix::zeros(2, 2));
        assert!(crate::linalg::relative_error(&(&lft.h * &a0), &DMatrix::identity(2, 2)) < 1e-15);
        let p = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
        let expected = a0.transpose() * p.as_matrix() * &a0;
        assert!(crate::linalg::relative_error(&lft_apply(&lft, &p).unwrap(), &expected) < 1e-13);
    }

    #[test]
    fn scalar_contraction_bound() {
        let b = *contraction_bound(&unit()).unwrap().bound().unwrap();
        assert!((b.zeta - 0.5).abs() < 1e-12);
        assert!((b.eps - 0.5).abs() < 1e-12);
        assert!((b.rho - 0.5).abs() < 1e-12);
    }

    #[test]
    fn not_strict_reasons() {
        let q_semi = StageData::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::from_diagonal(&nalgebra::dvector![1.0, 0.0]),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        assert_eq!(
            contraction_bound(&q_semi).unwrap(),
            Contraction::NotStrict(NotStrictReason::QNotPd)
        );
        let thin_b = StageData::new(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            DMatrix::identity(2, 2),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        assert_eq!(
            contraction_bound(&thin_b).unwrap(),
            Contraction::NotStrict(NotStrictReason::BRowRank)
        );
        assert_eq!(NotStrictReason::BRowRank.to_string(), "B row rank");
        assert_eq!(NotStrictReason::QNotPd.to_string(), "Q not PD");
    }

    #[test]
    fn recursion_zero_steps() {
        let p = LqProblem::stationary(unit(), 5).unwrap();
        let tr = backward_recursion(&p, 3, 3, &s(2.0)).unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.boundary_index(), 3);
        assert_eq!(tr.at(3).unwrap(), &s(2.0));
    }

    #[test]
    fn recursion_reaches_golden_ratio() {
        let p = LqProblem::stationary(unit(), 51).unwrap();
        let tr = backward_recursion(&p, 50, 0, &s(0.0)).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((tr.at(0).unwrap()[(0, 0)] - golden).abs() < 1e-12);
        assert!(tr.verify(&p).unwrap() < 1e-14);
        assert!(matches!(backward_recursion(&p, 2, 3, &s(0.0)), Err(Error::Argument(_))));
    }

    #[test]
    fn recursion_error_names_stage() {
        let p = LqProblem::stationary(unit(), 3).unwrap();
        match backward_recursion(&p, 5, 0, &s(0.0)).unwrap_err() {
            Error::AtStage { index, source } => {
                assert_eq!(index, 4);
                assert!(matches!(*source, Error::Range { .. }));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn gains() {
        let k = optimal_gain(&unit(), &s(1.0)).unwrap();
        assert!((k[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(optimal_gain(&unit(), &s(0.0)).unwrap()[(0, 0)], 0.0);
        let no_b = StageData::new(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 3),
            DMatrix::identity(2, 2),
            DMatrix::identity(3, 3),
        )
        .unwrap();
        let k = optimal_gain(&no_b, &SymMatrix::identity(2)).unwrap();
        assert_eq!(k, DMatrix::zeros(3, 2));
    }
}
