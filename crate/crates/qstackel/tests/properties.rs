use proptest::prelude::*;

use qstackel::coeffring::CoeffExpr;
use qstackel::frobenius::{solve_deformation, DeformedSystem, SolveOptions, SystemFile};
use qstackel::phasepoly::{pb, PhaseExpr};
use qstackel::stackelgen::SystemSpec;

mod common;
use common::{coeff, phase};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ring_axioms(x in coeff(), y in coeff(), z in coeff()) {
        prop_assert_eq!(&x + &y, &y + &x);
        prop_assert_eq!(&x * &y, &y * &x);
        prop_assert_eq!(&(&x + &y) + &z, &x + &(&y + &z));
        prop_assert_eq!(&(&x * &y) * &z, &x * &(&y * &z));
        prop_assert_eq!(&x * &(&y + &z), &(&x * &y) + &(&x * &z));
        prop_assert_eq!(&x + &CoeffExpr::zero(), x.clone());
        prop_assert_eq!(&x * &CoeffExpr::one(), x.clone());
        prop_assert!((&x - &x).is_zero());
        prop_assert!((&x * &CoeffExpr::zero()).is_zero());
    }

    #[test]
    fn derivative_of_antiderivative(x in coeff(), j in 1usize..=2) {
        prop_assert_eq!(x.integrate(j).diff(j), x);
    }

    #[test]
    fn leibniz_rule_for_time_derivatives(x in coeff(), y in coeff(), j in 1usize..=2) {
        prop_assert_eq!((&x * &y).diff(j), &(&x.diff(j) * &y) + &(&x * &y.diff(j)));
    }

    #[test]
    fn coefficient_text_round_trip(x in coeff()) {
        let back: CoeffExpr = x.to_string().parse().unwrap();
        prop_assert_eq!(back, x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(250))]

    #[test]
    fn poisson_bracket_axioms(f in phase(), g in phase(), h in phase()) {
        prop_assert_eq!(pb(&f, &g), -&pb(&g, &f));
        prop_assert_eq!(pb(&f, &(&g * &h)), &(&pb(&f, &g) * &h) + &(&g * &pb(&f, &h)));
        let jac = &(&pb(&f, &pb(&g, &h)) + &pb(&g, &pb(&h, &f))) + &pb(&h, &pb(&f, &g));
        prop_assert!(jac.is_zero());
    }

    #[test]
    fn phase_serialization_round_trip(f in phase()) {
        let json = serde_json::to_string(&f.to_json()).unwrap();
        let back = PhaseExpr::from_json(&serde_json::from_str(&json).unwrap()).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(serde_json::to_string(&back.to_json()).unwrap(), json);
        let text: PhaseExpr = PhaseExpr::parse(2, &f.to_string()).unwrap();
        prop_assert_eq!(text, f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn system_file_round_trip(n in 2usize..=3, m in 0usize..=3, fam in 0usize..3) {
        prop_assume!(m <= n + 1);
        let spec = match fam {
            0 => SystemSpec::geodesic(n, m),
            1 => SystemSpec::ordinary(n, m),
            _ => SystemSpec::magnetic(n, m, n as i64 + 1),
        };
        let sys = solve_deformation(&spec, &SolveOptions::default()).unwrap();
        let a = serde_json::to_string(&sys.to_file()).unwrap();
        let f: SystemFile = serde_json::from_str(&a).unwrap();
        let back = DeformedSystem::from_file(&f).unwrap();
        prop_assert_eq!(serde_json::to_string(&back.to_file()).unwrap(), a);
        prop_assert_eq!(&back.h, &sys.h);
    }
}
