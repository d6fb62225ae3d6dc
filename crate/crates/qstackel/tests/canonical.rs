use std::collections::BTreeMap;

use qstackel::canonmap::*;
use qstackel::coeffring::{cf, CoeffExpr};
use qstackel::frobenius::{certify_hamiltonians, solve_deformation, Gauge, SolveOptions};
use qstackel::phasepoly::{pb, PhaseExpr};
use qstackel::stackelgen::{potential_v_component, SystemSpec};

fn shapes(nmax: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..=nmax).flat_map(|n| (0..=n + 1).map(move |m| (n, m)))
}

fn symbolic_map(n: usize, m: usize) -> CanonicalMap {
    let sol = theorem_pde(n, m, None).unwrap();
    build_map(n, m, sol.d, default_e(n, m)).unwrap()
}

#[test]
fn power_sums_match_potentials() {
    for n in 1..=6 {
        for g in 1..=n as i64 {
            let mut s = PhaseExpr::zero(n);
            for k in 1..=g {
                s += &potential_v_component(n, n as i64 + g - k, k);
            }
            assert_eq!(s, -power_sum(n, g), "n={n} γ={g}");
        }
    }
}

#[test]
fn negative_power_sums_invert() {
    // Z_{-1} Z_1 is not simple, but λ-reciprocity is: Z_{-k} for n=1 is (-q)^{-k}
    for k in 1..=5 {
        let want = PhaseExpr::qn_pow(1, -(k as i32)).scale_q(&qstackel::coeffring::q_int(if k % 2 == 0 { 1 } else { -1 }));
        assert_eq!(power_sum(1, -k), want);
    }
    // n=2: Z_{-1} = (λ1+λ2)/(λ1λ2) = -q1/q2, Z_{-2} = Z_{-1}^2 - 2/q2
    let z1 = power_sum(2, -1);
    let z2 = power_sum(2, -2);
    assert_eq!(z2, &(&z1 * &z1) - &PhaseExpr::qn_pow(2, -1).scale_q(&qstackel::coeffring::q_int(2)));
}

#[test]
fn closed_form_shift_terms() {
    for (n, m) in shapes(4) {
        let map = symbolic_map(n, m);
        for r in 1..=n {
            assert_eq!(s_r(&map, r).unwrap(), s_r_direct(&map, r).unwrap(), "n={n} m={m} r={r}");
        }
    }
}

#[test]
fn generating_function_routes_agree() {
    for (n, m) in shapes(4) {
        let map = symbolic_map(n, m);
        for r in 1..=n {
            assert_eq!(map.df_direct(r), map.df[r - 1], "n={n} m={m} r={r}");
        }
    }
}

#[test]
fn shift_coefficients_match_direct_solution() {
    for n in 2..=3 {
        for m in 0..=n + 1 {
            let sol = theorem_pde(n, m, None).unwrap();
            let sys = solve_deformation(&SystemSpec::magnetic(n, m, n as i64 + 1), &SolveOptions::default()).unwrap();
            for g in 0..n + 2 {
                assert_eq!(sol.d[g], sys.coeff_fns[&(g as i64)], "n={n} m={m} γ={g}");
            }
            assert_eq!(sol.zeta, sys.zeta);
        }
    }
}

#[test]
fn magnetic_side_is_integrable_with_extra_term() {
    for n in 2..=3 {
        for m in 0..=n + 1 {
            let map = symbolic_map(n, m);
            let h = map.magnetic_hamiltonians().unwrap();
            let rep = certify_hamiltonians(&h);
            assert!(rep.passes(), "n={n} m={m}");
        }
    }
}

#[test]
fn full_equivalence_all_shapes() {
    for n in 2..=3 {
        for m in 0..=n + 1 {
            let map = symbolic_map(n, m);
            let hb = map.magnetic_hamiltonians().unwrap();
            let ord = solve_deformation(&SystemSpec::ordinary(n, m), &SolveOptions::default()).unwrap();
            let eq = verify_equivalence(&ord, &hb, &map).unwrap();
            assert!(eq.holds, "n={n} m={m}: {}", eq.residuals.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("; "));
            // with the returned tails the two sides agree exactly
            let fixed = solve_deformation(
                &SystemSpec::ordinary(n, m),
                &SolveOptions { free: None, gauge: Gauge::Explicit(eq.tail_coeffs.clone()) },
            )
            .unwrap();
            let again = verify_equivalence(&fixed, &hb, &map).unwrap();
            assert!(again.residuals.iter().all(|r| r.is_zero()), "n={n} m={m}");
        }
    }
}

#[test]
fn cubic_example_tails() {
    let free = vec!["b[3]".to_string()];
    let sol = theorem_pde(3, 1, Some(&free)).unwrap();
    assert_eq!(sol.d, vec![cf("0"), cf("b[3]*(t2 + t3^2)"), cf("2*b[3]*t3"), cf("b[3]"), cf("0")]);
    let map = build_map(3, 1, sol.d, cf("0")).unwrap();
    let ord = solve_deformation(
        &SystemSpec::ordinary(3, 1),
        &SolveOptions { free: Some(vec!["a[5]".into()]), gauge: Gauge::Zero },
    )
    .unwrap();
    let pm = param_map_for(&map).unwrap();
    assert_eq!(pm.a[&5], cf("1/2*b[3]^2"));
    let eq = verify_equivalence(&ord, &map.magnetic_hamiltonians().unwrap(), &map).unwrap();
    assert!(eq.holds);
    assert_eq!(eq.tail_coeffs[&1], cf("1/2*b[3]^2*(t2^2 + t3^4 + 2*t2*t3^2) + 2*b[3]*t3"));
    assert_eq!(eq.tail_coeffs[&2], cf("2*b[3]^2*(t2 + t3^2)*t3"));
    assert_eq!(eq.tail_coeffs[&0], cf("2*b[3]*(t2 + t3^2)"));
}

#[test]
fn perturbed_shift_is_detected() {
    let free = vec!["b[3]".to_string()];
    let mut sol = theorem_pde(3, 1, Some(&free)).unwrap();
    sol.d[2] = &sol.d[2] + &cf("b[3]*t1");
    let map = build_map(3, 1, sol.d.clone(), cf("0")).unwrap();
    let ord = solve_deformation(
        &SystemSpec::ordinary(3, 1),
        &SolveOptions { free: Some(vec!["a[5]".into()]), gauge: Gauge::Zero },
    )
    .unwrap();
    let holds = verify_equivalence(&ord, &map.magnetic_hamiltonians().unwrap(), &map).map(|e| e.holds).unwrap_or(false);
    assert!(!holds);
}

#[test]
fn zero_map_is_identity() {
    for (n, m) in shapes(3) {
        let map = build_map(n, m, vec![CoeffExpr::zero(); n + 2], CoeffExpr::zero()).unwrap();
        assert!(map.shift.iter().all(|s| s.is_zero()));
        assert!(map.df.iter().all(|s| s.is_zero()));
        assert!(map.cprime.values().all(|c| c.is_zero()));
    }
}

#[test]
fn cprime_is_laurent_identity() {
    // use q_1 of a one-dimensional ring as the formal λ
    for (n, m) in shapes(3) {
        let map = symbolic_map(n, m);
        let lam = |k: i64| PhaseExpr::qn_pow(1, k as i32);
        let mut lhs = PhaseExpr::zero(1);
        for (a, c) in &map.cprime {
            lhs += &lam(*a).scale(c);
        }
        let mut s = PhaseExpr::zero(1);
        for (g, d) in map.d.iter().enumerate() {
            s += &lam(g as i64 - m as i64).scale(d);
        }
        let rhs = &(&lam(m as i64) * &(&s * &s)).scale_q(&qstackel::coeffring::q_frac(1, 2)) + &lam(n as i64).scale(&map.e);
        assert_eq!(lhs, rhs, "n={n} m={m}");
    }
}

#[test]
fn shift_preserves_brackets() {
    let cases = [
        (2, 1, "q1*p2^2 + q2*p1", "p1*p2 + q1^2*p1"),
        (3, 1, "p1*p3 + q2*p2^2", "q1*q3*p1 + p2^2"),
        (3, 3, "q3^-1*p1 + p3^2", "q2*p1*p2"),
    ];
    for (n, m, f, g) in cases {
        let map = symbolic_map(n, m);
        let f = PhaseExpr::parse(n, f).unwrap();
        let g = PhaseExpr::parse(n, g).unwrap();
        let t = |x: &PhaseExpr| x.subst_p(&map.shift).unwrap();
        assert_eq!(pb(&t(&f), &t(&g)), t(&pb(&f, &g)), "n={n} m={m}");
    }
}

#[test]
fn shift_constants_are_compatible() {
    // d_{m-1} is constant in every shape
    for (n, m) in shapes(4) {
        let sol = theorem_pde(n, m, None).unwrap();
        if m >= 1 && m - 1 < n + 2 {
            assert!(!sol.d[m - 1].depends_on_time(), "n={n} m={m}");
        }
    }
}

#[test]
fn image_of_the_map_is_solvable() {
    let samples: [(usize, usize, &[(&str, i64)]); 4] = [
        (2, 1, &[("b[0]", 2), ("b[1]", -1), ("b[2]", 3), ("b[3]", 1), ("bbar", 5)]),
        (3, 1, &[("b[0]", 1), ("b[1]", 2), ("b[2]", -1), ("b[3]", 4), ("b[4]", 2), ("bbar", -3)]),
        (3, 0, &[("b[0]", 1), ("b[2]", -1), ("b[4]", 2), ("bbar", 1)]),
        (2, 3, &[("b[0]", 2), ("b[1]", 1), ("b[3]", 3), ("bbar", 7)]),
    ];
    for (n, m, vals) in samples {
        let pm = param_map(n, m).unwrap();
        let binds: BTreeMap<String, CoeffExpr> =
            vals.iter().map(|(k, v)| (k.to_string(), CoeffExpr::from_int(*v))).collect();
        let target: BTreeMap<i64, CoeffExpr> =
            pm.a.iter().map(|(a, phi)| (*a, phi.subst_params(&binds).subst_params(&zero_rest(n)))).collect();
        match obstruction(n, m, &target).unwrap() {
            Verdict::Solvable { b, radicals } => {
                let mut env = b.clone();
                for r in &radicals {
                    assert!(r.value.as_q().is_some());
                }
                env.retain(|_, v| v.params().is_empty());
                if radicals.is_empty() {
                    for (a, phi) in &pm.a {
                        assert_eq!(phi.subst_params(&env).subst_params(&zero_rest(n)), target[a], "n={n} m={m} a[{a}]");
                    }
                }
            }
            v => panic!("n={n} m={m}: {v:?}"),
        }
    }
}

fn zero_rest(n: usize) -> BTreeMap<String, CoeffExpr> {
    let mut z: BTreeMap<String, CoeffExpr> = (0..n + 2).map(|g| (format!("b[{g}]"), CoeffExpr::zero())).collect();
    z.insert("bbar".into(), CoeffExpr::zero());
    z
}

#[test]
fn henon_heiles_has_no_magnetic_form() {
    let target: BTreeMap<i64, CoeffExpr> =
        [(5, cf("0")), (3, cf("0")), (2, cf("0")), (4, cf("-1")), (-1, cf("-1/4*alpha"))].into_iter().collect();
    let Verdict::Unsolvable { witness } = obstruction(2, 1, &target).unwrap() else { panic!() };
    assert_eq!(witness.alpha, 4);
    assert_eq!(witness.assignments[0], ("b[3]".to_string(), cf("0")));
    assert_eq!(witness.reduced, "1 = 0");
}

#[test]
fn trivial_targets_are_solvable() {
    for (n, m) in shapes(3) {
        match obstruction(n, m, &BTreeMap::new()).unwrap() {
            Verdict::Solvable { b, .. } => assert!(b.values().all(|v| v.is_zero()), "n={n} m={m}"),
            v => panic!("{v:?}"),
        }
    }
}
