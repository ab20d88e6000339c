#![allow(dead_code)]

use ricclift::{DMatrix, LqProblem, ParametricStages, StageMatrices, SymMatrix, Tolerances};

pub fn mat(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, v)
}

/// Two-state, single-input problem whose data is modulated by `0.9^k sin(k)`.
pub fn example_problem() -> LqProblem {
    let base = StageMatrices {
        a: mat(2, 2, &[5.0, 3.0, 2.0, 1.0]),
        b: mat(2, 1, &[2.0, 3.0]),
        q: mat(2, 2, &[10.0, 4.0, 4.0, 7.0]),
        r: mat(1, 1, &[5.0]),
    };
    let perturbation = StageMatrices {
        a: mat(2, 2, &[10.0, 20.0, 30.0, 10.0]),
        b: mat(2, 1, &[10.0, 20.0]),
        q: mat(2, 2, &[2.0, 1.0, 1.0, 3.0]),
        r: mat(1, 1, &[4.0]),
    };
    LqProblem::parametric(
        ParametricStages {
            base,
            perturbation,
            alpha: 0.9,
            omega: 1.0,
        },
        Tolerances::default(),
    )
    .unwrap()
}

pub fn assert_close(got: &DMatrix<f64>, want: &DMatrix<f64>, rel: f64, what: &str) {
    let err = ricclift::relative_error(got, want);
    assert!(
        err <= rel,
        "{what}: relative error {err:e} > {rel:e}\n got {got}\nwant {want}"
    );
}

pub fn sym(m: DMatrix<f64>) -> SymMatrix {
    SymMatrix::new(m).unwrap()
}
