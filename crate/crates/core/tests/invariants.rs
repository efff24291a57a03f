use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use resbvp::conditions::{sign_sets, DEFAULT_C_GRID};
use resbvp::golden;
use resbvp::oracle::random_resonant;
use resbvp::solver::BifurcationProblem;
use resbvp::{CheckOptions, Checker, LinearAnalysis, Nonlinearity, Orientation, SolveOptions, Verdict};

fn sign_vec() -> impl Strategy<Value = Vec<f64>> {
    // Mix exact zeros, tiny values and ordinary ones.
    prop::collection::vec(
        prop_oneof![Just(0.0), -1e-12..1e-12f64, -10.0..10.0f64],
        1..40,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sign_sets_partition_the_grid((psi, s) in sign_vec().prop_flat_map(|p| {
        let len = p.len();
        (Just(p), prop::collection::vec(prop_oneof![Just(0.0), -1e-12..1e-12f64, -10.0..10.0f64], len))
    })) {
        let sets = sign_sets(&psi, &s, 1e-10);
        let mut seen = vec![0u8; psi.len()];
        for t in sets.opp.iter().chain(&sets.opm).chain(&sets.omp).chain(&sets.omm).chain(&sets.o0) {
            seen[*t] += 1;
        }
        for (t, &count) in seen.iter().enumerate() {
            let psi_zero = psi[t].abs() <= sets.psi_tol;
            prop_assert_eq!(count, u8::from(!psi_zero), "t = {}", t);
        }
        for &t in &sets.opp {
            prop_assert!(psi[t] > 0.0 && s[t] > 0.0);
        }
        for &t in &sets.omm {
            prop_assert!(psi[t] < 0.0 && s[t] < 0.0);
        }
    }

    #[test]
    fn doubling_g_doubles_certificate_numbers(
        amp in 0.1..5.0f64,
        shift in -0.5..0.5f64,
        c in 0.5..20.0f64,
        ratio in 1.5..200.0f64,
    ) {
        let g = format!("{amp:?}*atan(x) + {shift:?}*cos(t)");
        let la = LinearAnalysis::new(&golden::spec(&g).unwrap()).unwrap();
        let la2 = LinearAnalysis::new(&golden::spec(&format!("2*({g})")).unwrap()).unwrap();
        let opts = CheckOptions::default();
        let d = c * ratio;
        let one = Checker::new(&la, opts).certify_main_orientations(c, d, &Orientation::BOTH).unwrap();
        let two = Checker::new(&la2, opts).certify_main_orientations(c, d, &Orientation::BOTH).unwrap();
        for (r1, r2) in one.iter().zip(&two) {
            prop_assert_eq!(r2.g_sup_d, 2.0 * r1.g_sup_d);
            prop_assert_eq!(r2.j1_tight, 2.0 * r1.j1_tight);
            prop_assert_eq!(r2.j2_tight, 2.0 * r1.j2_tight);
            // The reported tables carry the strictness slack, which is
            // relative to the compared values plus an absolute floor.
            let slack = 4.0 * opts.strict_tol * (1.0 + 2.0 * r1.g_sup_d);
            for (t, k) in &r1.k1 {
                prop_assert!((r2.k1[t] - 2.0 * k).abs() <= slack);
            }
            for (t, k) in &r1.k2 {
                prop_assert!((r2.k2[t] - 2.0 * k).abs() <= slack);
            }
            let pattern = |r: &resbvp::ConditionReport| (r.j1_tight > 0.0, r.j2_tight < 0.0);
            prop_assert_eq!(pattern(r1), pattern(r2));
        }
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn aux_iterates_stay_in_ball_and_contract(seed in 0u64..10_000, amp in 0.05..0.6f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_resonant(&mut rng, 2, 6, "0");
        let la0 = LinearAnalysis::new(&spec).unwrap();
        // Bounded g with a small Lipschitz constant relative to the norm bound.
        let lip = amp / la0.a_bar();
        let g = format!("{lip:?}*tanh(x) + 0.1*sin(t)");
        let la = LinearAnalysis::new(&spec.with_nonlinearity(Nonlinearity::parse(&g).unwrap()).unwrap()).unwrap();
        let checker = Checker::new(&la, CheckOptions::default());
        let Ok(search) = checker.auto_certificate(&DEFAULT_C_GRID, 1e6, &Orientation::BOTH) else {
            return Ok(());
        };
        let Some(report) = search.found else {
            return Ok(());
        };
        prop_assert_eq!(report.verdict, Verdict::Pass);
        let cert = report.certificate().unwrap();
        let bp = BifurcationProblem::new(&la, &cert, SolveOptions::default()).unwrap();
        prop_assert!(bp.contraction_q() < 1.0);
        for alpha in [-bp.alpha_star(), 0.0, 0.37 * bp.alpha_star(), bp.alpha_star()] {
            let aux = bp.auxiliary_fixed_point(alpha, None).unwrap();
            prop_assert!(aux.z.amax() <= bp.r_star() + 1e-9);
            if let Some(rate) = aux.observed_rate {
                prop_assert!(rate <= bp.contraction_q() + 0.05, "rate {} vs q {}", rate, bp.contraction_q());
            }
        }
        let res = bp.solve().unwrap();
        prop_assert!(res.recurrence_residual <= 1e-10 && res.boundary_residual <= 1e-10);
        prop_assert!(res.v.sup_norm() <= bp.r_star() + 1e-9);
        prop_assert!(la.project_p(&res.v).unwrap().sup_norm() <= 1e-11 * (1.0 + res.alpha.abs()));
        let (lo, hi, b_lo, b_hi) = res.bracket;
        prop_assert!(lo <= res.alpha && res.alpha <= hi);
        prop_assert!(b_lo * b_hi <= 0.0, "bracket lost its sign change");
    }
}
