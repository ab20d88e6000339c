//! Seeded random problem generators for property tests and benchmarks.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::problem::{LqProblem, StageData};
use crate::spd::{random_orthogonal, random_spd_with, SpdMatrix, SymMatrix};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `O1 diag(s) O2` with singular values drawn uniformly from `[lo, hi]`.
pub fn nonsingular_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let s = DVector::from_fn(n, |_, _| rng.random_range(lo..=hi));
    random_orthogonal(rng, n) * DMatrix::from_diagonal(&s) * random_orthogonal(rng, n)
}

/// PSD matrix `G G'` of the given rank.
pub fn psd_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> SymMatrix {
    let g = gaussian_matrix(rng, n, rank);
    SymMatrix::new(&g * g.transpose()).expect("square")
}

pub fn spd_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize, cond_max: f64) -> SpdMatrix {
    random_spd_with(rng, n, cond_max)
}

/// Shape of the sampled state cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostShape {
    /// Positive definite.
    Definite,
    /// PSD of a fixed rank.
    Rank(usize),
    /// PSD with rank drawn uniformly from `0..=n`.
    AnyRank,
}

/// Distribution of random stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSampler {
    /// Range of the singular values of `A`.
    pub a_singular: (f64, f64),
    pub q: CostShape,
    pub r_cond: f64,
    /// Replace `B` by zero.
    pub zero_b: bool,
}

impl Default for StageSampler {
    fn default() -> Self {
        StageSampler {
            a_singular: (0.5, 1.5),
            q: CostShape::AnyRank,
            r_cond: 10.0,
            zero_b: false,
        }
    }
}

impl StageSampler {
    pub fn definite() -> Self {
        StageSampler {
            q: CostShape::Definite,
            ..Self::default()
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize, m: usize) -> StageData {
        let a = nonsingular_matrix(rng, n, self.a_singular.0, self.a_singular.1);
        let b = if self.zero_b {
            DMatrix::zeros(n, m)
        } else {
            gaussian_matrix(rng, n, m)
        };
        let q = match self.q {
            CostShape::Definite => spd_matrix(rng, n, 100.0).as_sym().clone(),
            CostShape::Rank(r) => psd_matrix(rng, n, r.min(n)),
            CostShape::AnyRank => {
                let r = rng.random_range(0..=n);
                psd_matrix(rng, n, r)
            }
        };
        let r = spd_matrix(rng, m, self.r_cond);
        StageData::new(a, b, q.into_inner(), r.as_sym().as_matrix().clone())
            .expect("sampled stage satisfies the stage invariants")
    }

    /// Explicit problem with `len` independently drawn stages.
    pub fn problem<R: Rng + ?Sized>(&self, rng: &mut R, n: usize, m: usize, len: usize) -> LqProblem {
        let stages = (0..len).map(|_| self.sample(rng, n, m)).collect();
        LqProblem::explicit(stages).expect("consistent dimensions")
    }
}
