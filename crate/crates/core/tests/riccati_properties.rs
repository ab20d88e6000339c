mod common;

use proptest::prelude::*;
use ricclift::sampling::{psd_matrix, rng, spd_matrix, CostShape, StageSampler};
use ricclift::*;

fn spd(p: &SymMatrix) -> SpdMatrix {
    SpdMatrix::new(p.clone()).unwrap()
}

fn dist(x: &SymMatrix, y: &SymMatrix) -> f64 {
    riemannian_distance(&spd(x), &spd(y)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn direct_and_fractional_forms_agree(seed in any::<u64>(), n in 1usize..=5, m in 1usize..=4) {
        let mut r = rng(seed);
        let stage = StageSampler::default().sample(&mut r, n, m);
        let rank = n.min(1 + (seed as usize) % n);
        let p = psd_matrix(&mut r, n, rank);
        let direct = riccati_apply(&stage, &p).unwrap();
        let lft = lft_form(&stage).unwrap();
        let fractional = lft_apply(&lft, &p).unwrap();
        prop_assert!(relative_error(&fractional, &direct) <= 1e-9);
    }

    #[test]
    fn fractional_form_blocks_are_psd(seed in any::<u64>(), n in 1usize..=5, m in 1usize..=4) {
        let mut r = rng(seed);
        let stage = StageSampler::default().sample(&mut r, n, m);
        let lft = lft_form(&stage).unwrap();
        for block in [lft.fe_t(), lft.e_t_g()] {
            let scale = block.amax().max(1.0);
            prop_assert!((&block - block.transpose()).amax() <= 1e-10 * scale);
            let s = SymMatrix::new(block).unwrap();
            prop_assert!(s.min_eigenvalue() >= -1e-9 * scale);
        }
    }

    #[test]
    fn riccati_is_non_expansive(seed in any::<u64>(), n in 1usize..=5, m in 1usize..=4) {
        let mut r = rng(seed);
        let stage = StageSampler::default().sample(&mut r, n, m);
        let x = spd_matrix(&mut r, n, 1e3).as_sym().clone();
        let y = spd_matrix(&mut r, n, 1e3).as_sym().clone();
        let before = dist(&x, &y);
        let after = dist(&riccati_apply(&stage, &x).unwrap(), &riccati_apply(&stage, &y).unwrap());
        prop_assert!(after <= before + 1e-9, "{after} > {before}");
    }

    #[test]
    fn strict_contraction_rate_holds(seed in any::<u64>(), n in 1usize..=4, extra in 0usize..=2) {
        let mut r = rng(seed);
        let stage = StageSampler::definite().sample(&mut r, n, n + extra);
        let bound = *contraction_bound(&stage).unwrap().bound().expect("hypotheses hold");
        prop_assert!(bound.rho > 0.0 && bound.rho < 1.0);
        prop_assert!((bound.rho - bound.zeta / (bound.zeta + bound.eps)).abs() == 0.0);
        let x = spd_matrix(&mut r, n, 1e3).as_sym().clone();
        let y = spd_matrix(&mut r, n, 1e3).as_sym().clone();
        let before = dist(&x, &y);
        let after = dist(&riccati_apply(&stage, &x).unwrap(), &riccati_apply(&stage, &y).unwrap());
        prop_assert!(after <= bound.rho * before + 1e-9, "{after} > {} * {before}", bound.rho);
    }

    #[test]
    fn riccati_is_monotone(seed in any::<u64>(), n in 1usize..=5, m in 1usize..=4) {
        let mut r = rng(seed);
        let stage = StageSampler::default().sample(&mut r, n, m);
        let x = psd_matrix(&mut r, n, n);
        let gap = psd_matrix(&mut r, n, 1 + (seed as usize) % n);
        let y = SymMatrix::new(x.as_matrix() + gap.as_matrix()).unwrap();
        let diff = SymMatrix::new(
            riccati_apply(&stage, &y).unwrap().as_matrix() - riccati_apply(&stage, &x).unwrap().as_matrix(),
        )
        .unwrap();
        let scale = diff.amax().max(y.amax()).max(1.0);
        prop_assert!(diff.min_eigenvalue() >= -1e-9 * scale);
    }

    #[test]
    fn riccati_preserves_psd(seed in any::<u64>(), n in 1usize..=5, m in 1usize..=4) {
        let mut r = rng(seed);
        let stage = StageSampler { q: CostShape::Rank(0), ..StageSampler::default() }.sample(&mut r, n, m);
        let p = psd_matrix(&mut r, n, (seed as usize) % (n + 1));
        let out = riccati_apply(&stage, &p).unwrap();
        prop_assert!(out.min_eigenvalue() >= -1e-9 * out.amax().max(1.0));
        prop_assert_eq!(out.as_matrix(), &out.transpose());
    }

    #[test]
    fn recursion_trace_reverifies(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=3, len in 1usize..=15) {
        let mut r = rng(seed);
        let problem = StageSampler::default().problem(&mut r, n, m, len);
        let terminal = psd_matrix(&mut r, n, n);
        // stage `len` does not exist, so the recursion can start at `len` but not beyond
        prop_assert!(backward_recursion(&problem, len + 1, 0, &terminal).is_err());
        let trace = backward_recursion(&problem, len, 0, &terminal).unwrap();
        prop_assert_eq!(trace.len(), len + 1);
        prop_assert_eq!(trace.boundary(), &terminal);
        prop_assert!(trace.verify(&problem).unwrap() <= 1e-9);
    }

    #[test]
    fn gain_gives_closed_loop_cost(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=3) {
        // x'R(P)x = min_u x'Qx + u'Ru + (Ax+Bu)'P(Ax+Bu), attained at u = -Kx
        let mut r = rng(seed);
        let stage = StageSampler::default().sample(&mut r, n, m);
        let p = psd_matrix(&mut r, n, n);
        let x = ricclift::sampling::gaussian_vector(&mut r, n);
        let k = optimal_gain(&stage, &p).unwrap();
        let u = -(&k * &x);
        let next = stage.a() * &x + stage.b() * &u;
        let cost = x.dot(&(stage.q().as_matrix() * &x)) + u.dot(&(stage.r().as_matrix() * &u)) + next.dot(&(p.as_matrix() * &next));
        let value = x.dot(&(riccati_apply(&stage, &p).unwrap().as_matrix() * &x));
        prop_assert!((cost - value).abs() <= 1e-9 * value.abs().max(1.0));
    }
}
