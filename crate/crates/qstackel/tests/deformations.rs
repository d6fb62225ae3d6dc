//! Coefficient functions for all two- and three-dimensional families, frozen
//! from an independent computer-algebra run.

use qstackel::coeffring::cf;
use qstackel::frobenius::*;
use qstackel::stackelgen::{Family, SystemSpec};

const TABLE: &[(usize, usize, Family, i64, &str)] = &[
    (2, 0, Family::Ordinary, 2, "a[2] + 2*a[4]*t2 + a[5]*t1 + 4*a[6]*t2^2"),
    (2, 0, Family::Ordinary, 3, "a[3] + 3*a[5]*t2 + 2*a[6]*t1"),
    (2, 0, Family::Ordinary, 4, "a[4] + 4*a[6]*t2"),
    (2, 0, Family::Ordinary, 5, "a[5]"),
    (2, 0, Family::Ordinary, 6, "a[6]"),
    (2, 0, Family::Magnetic, 0, "b[0] + b[2]*t2 + b[3]*t1"),
    (2, 0, Family::Magnetic, 1, "b[1] + 2*b[3]*t2"),
    (2, 0, Family::Magnetic, 2, "b[2]"),
    (2, 0, Family::Magnetic, 3, "b[3]"),
    (2, 1, Family::Ordinary, -1, "a[-1]"),
    (2, 1, Family::Ordinary, 2, "a[2] + 2*a[3]*t2 + a[4]*t1 + 3*a[4]*t2^2 + 4*a[5]*t1*t2 + 4*a[5]*t2^3"),
    (2, 1, Family::Ordinary, 3, "a[3] + 3*a[4]*t2 + 2*a[5]*t1 + 6*a[5]*t2^2"),
    (2, 1, Family::Ordinary, 4, "a[4] + 4*a[5]*t2"),
    (2, 1, Family::Ordinary, 5, "a[5]"),
    (2, 1, Family::Magnetic, 0, "b[0]"),
    (2, 1, Family::Magnetic, 1, "b[1] + b[2]*t2 + b[3]*t1 + b[3]*t2^2"),
    (2, 1, Family::Magnetic, 2, "b[2] + 2*b[3]*t2"),
    (2, 1, Family::Magnetic, 3, "b[3]"),
    (2, 2, Family::Ordinary, -2, "a[-2]*exp(2*t2)"),
    (2, 2, Family::Ordinary, -1, "a[-1]*exp(t2)"),
    (2, 2, Family::Ordinary, 2, "a[2] + a[3]*t1 + a[4]*t1^2"),
    (2, 2, Family::Ordinary, 3, "a[3] + 2*a[4]*t1"),
    (2, 2, Family::Ordinary, 4, "a[4]"),
    (2, 2, Family::Magnetic, 0, "b[0]*exp(t2)"),
    (2, 2, Family::Magnetic, 1, "b[1]"),
    (2, 2, Family::Magnetic, 2, "b[2] + b[3]*t1"),
    (2, 2, Family::Magnetic, 3, "b[3]"),
    (2, 3, Family::Ordinary, -3, "a[-3]"),
    (2, 3, Family::Ordinary, -2, "a[-2] + 2*a[-3]*t2"),
    (2, 3, Family::Ordinary, -1, "a[-1] + a[-2]*t2 + a[-3]*t2^2"),
    (2, 3, Family::Ordinary, 2, "a[2]*exp(t1)"),
    (2, 3, Family::Ordinary, 3, "a[3]*exp(2*t1)"),
    (2, 3, Family::Magnetic, 0, "b[0]"),
    (2, 3, Family::Magnetic, 1, "b[0]*t2 + b[1]"),
    (2, 3, Family::Magnetic, 2, "b[2]"),
    (2, 3, Family::Magnetic, 3, "b[3]*exp(t1)"),
    (3, 0, Family::Ordinary, 3, "a[3] + 3*a[5]*t3 + 2*a[6]*t2 + a[7]*t1 + 15*a[7]*t3^2/2 + 12*a[8]*t2*t3"),
    (3, 0, Family::Ordinary, 4, "a[4] + 4*a[6]*t3 + 3*a[7]*t2 + 2*a[8]*t1 + 12*a[8]*t3^2"),
    (3, 0, Family::Ordinary, 5, "a[5] + 5*a[7]*t3 + 4*a[8]*t2"),
    (3, 0, Family::Ordinary, 6, "a[6] + 6*a[8]*t3"),
    (3, 0, Family::Ordinary, 7, "a[7]"),
    (3, 0, Family::Ordinary, 8, "a[8]"),
    (3, 0, Family::Magnetic, 0, "b[0] + b[2]*t3 + b[3]*t2 + b[4]*t1 + 3*b[4]*t3^2/2"),
    (3, 0, Family::Magnetic, 1, "b[1] + 2*b[3]*t3 + 2*b[4]*t2"),
    (3, 0, Family::Magnetic, 2, "b[2] + 3*b[4]*t3"),
    (3, 0, Family::Magnetic, 3, "b[3]"),
    (3, 0, Family::Magnetic, 4, "b[4]"),
    (3, 1, Family::Ordinary, -1, "a[-1]"),
    (3, 1, Family::Ordinary, 3, "a[3] + 3*a[4]*t3 + 2*a[5]*t2 + 6*a[5]*t3^2 + a[6]*t1 + 10*a[6]*t2*t3 + 10*a[6]*t3^3 + 6*a[7]*t1*t3 + 4*a[7]*t2^2 + 30*a[7]*t2*t3^2 + 15*a[7]*t3^4"),
    (3, 1, Family::Ordinary, 4, "a[4] + 4*a[5]*t3 + 3*a[6]*t2 + 10*a[6]*t3^2 + 2*a[7]*t1 + 18*a[7]*t2*t3 + 20*a[7]*t3^3"),
    (3, 1, Family::Ordinary, 5, "a[5] + 5*a[6]*t3 + 4*a[7]*t2 + 15*a[7]*t3^2"),
    (3, 1, Family::Ordinary, 6, "a[6] + 6*a[7]*t3"),
    (3, 1, Family::Ordinary, 7, "a[7]"),
    (3, 1, Family::Magnetic, 0, "b[0]"),
    (3, 1, Family::Magnetic, 1, "b[1] + b[2]*t3 + b[3]*t2 + b[3]*t3^2 + b[4]*t1 + 3*b[4]*t2*t3 + b[4]*t3^3"),
    (3, 1, Family::Magnetic, 2, "b[2] + 2*b[3]*t3 + 2*b[4]*t2 + 3*b[4]*t3^2"),
    (3, 1, Family::Magnetic, 3, "b[3] + 3*b[4]*t3"),
    (3, 1, Family::Magnetic, 4, "b[4]"),
    (3, 2, Family::Ordinary, -2, "a[-2]*exp(2*t3)"),
    (3, 2, Family::Ordinary, -1, "a[-1]*exp(t3)"),
    (3, 2, Family::Ordinary, 3, "a[3] + 2*a[4]*t2 + a[5]*t1 + 3*a[5]*t2^2 + 4*a[6]*t1*t2 + 4*a[6]*t2^3"),
    (3, 2, Family::Ordinary, 4, "a[4] + 3*a[5]*t2 + 2*a[6]*t1 + 6*a[6]*t2^2"),
    (3, 2, Family::Ordinary, 5, "a[5] + 4*a[6]*t2"),
    (3, 2, Family::Ordinary, 6, "a[6]"),
    (3, 2, Family::Magnetic, 0, "b[0]*exp(t3)"),
    (3, 2, Family::Magnetic, 1, "b[1]"),
    (3, 2, Family::Magnetic, 2, "b[2] + b[3]*t2 + b[4]*t1 + b[4]*t2^2"),
    (3, 2, Family::Magnetic, 3, "b[3] + 2*b[4]*t2"),
    (3, 2, Family::Magnetic, 4, "b[4]"),
    (3, 3, Family::Ordinary, -3, "a[-3]*exp(4*t2)"),
    (3, 3, Family::Ordinary, -2, "a[-2]*exp(3*t2) + 2*a[-3]*t3*exp(4*t2)"),
    (3, 3, Family::Ordinary, -1, "a[-1]*exp(2*t2) + a[-2]*t3*exp(3*t2) + a[-3]*t3^2*exp(4*t2)"),
    (3, 3, Family::Ordinary, 3, "a[3] + a[4]*t1 + a[5]*t1^2"),
    (3, 3, Family::Ordinary, 4, "a[4] + 2*a[5]*t1"),
    (3, 3, Family::Ordinary, 5, "a[5]"),
    (3, 3, Family::Magnetic, 0, "b[0]*exp(2*t2)"),
    (3, 3, Family::Magnetic, 1, "b[0]*t3*exp(2*t2) + b[1]*exp(t2)"),
    (3, 3, Family::Magnetic, 2, "b[2]"),
    (3, 3, Family::Magnetic, 3, "b[3] + b[4]*t1"),
    (3, 3, Family::Magnetic, 4, "b[4]"),
    (3, 4, Family::Ordinary, -4, "a[-4]"),
    (3, 4, Family::Ordinary, -3, "a[-3] + 4*a[-4]*t2"),
    (3, 4, Family::Ordinary, -2, "a[-2] + 3*a[-3]*t2 + 6*a[-4]*t2^2 + 2*a[-4]*t3"),
    (3, 4, Family::Ordinary, -1, "a[-1] + 2*a[-2]*t2 + 3*a[-3]*t2^2 + a[-3]*t3 + 4*a[-4]*t2^3 + 4*a[-4]*t2*t3"),
    (3, 4, Family::Ordinary, 3, "a[3]*exp(t1)"),
    (3, 4, Family::Ordinary, 4, "a[4]*exp(2*t1)"),
    (3, 4, Family::Magnetic, 0, "b[0]"),
    (3, 4, Family::Magnetic, 1, "2*b[0]*t2 + b[1]"),
    (3, 4, Family::Magnetic, 2, "b[0]*t2^2 + b[0]*t3 + b[1]*t2 + b[2]"),
    (3, 4, Family::Magnetic, 3, "b[3]"),
    (3, 4, Family::Magnetic, 4, "b[4]*exp(t1)"),
];

fn spec_for(n: usize, m: usize, fam: Family) -> SystemSpec {
    match fam {
        Family::Ordinary => SystemSpec::ordinary(n, m),
        _ => SystemSpec::magnetic(n, m, n as i64 + 1),
    }
}

#[test]
fn coefficient_tables() {
    let mut cases: Vec<(usize, usize, Family)> = TABLE.iter().map(|r| (r.0, r.1, r.2)).collect();
    cases.dedup();
    for (n, m, fam) in cases {
        let spec = spec_for(n, m, fam);
        let sys = solve_deformation(&spec, &SolveOptions::default()).unwrap();
        for row in TABLE.iter().filter(|r| (r.0, r.1, r.2) == (n, m, fam)) {
            assert_eq!(sys.coeff_fns[&row.3], cf(row.4), "n={n} m={m} {fam} α={}", row.3);
        }
        let rep = certify(&sys);
        assert!(rep.passes(), "n={n} m={m} {fam}");
        if fam == Family::Magnetic {
            assert!(rep.exact_zero(), "n={n} m={m}");
            assert!(sys.underdetermined.is_empty());
        }
    }
}

#[test]
fn solved_gauge_closes_residuals() {
    for n in 2..=3 {
        for m in 0..=n + 1 {
            let spec = SystemSpec::ordinary(n, m);
            let opts = SolveOptions { free: None, gauge: Gauge::Solve };
            let sys = solve_deformation(&spec, &opts).unwrap();
            assert!(certify(&sys).exact_zero(), "n={n} m={m}");
        }
    }
}

#[test]
fn geodesic_part_independent_of_own_time() {
    for n in 1..=5 {
        for m in 0..=n + 1 {
            let z = zeta_solve(n, m).unwrap();
            for r in 1..=n {
                assert!(z[r - 1].iter().all(|c| !c.depends_on_t(r)), "n={n} m={m} r={r}");
            }
        }
    }
}

#[test]
fn potentials_can_carry_own_time() {
    // n=2, m=0: c_3 contains 2 a_6 t_1 and V_1^(3) = q_1, so H_1 depends on t_1
    let sys = solve_deformation(&SystemSpec::ordinary(2, 0), &SolveOptions::default()).unwrap();
    assert!(sys.h[0].dynamic_part().depends_on_t(1));
}

#[test]
fn geodesic_deformations_commute_exactly() {
    for n in 1..=4 {
        for m in 0..=n + 1 {
            let sys = solve_deformation(&SystemSpec::geodesic(n, m), &SolveOptions::default()).unwrap();
            assert!(certify(&sys).exact_zero(), "n={n} m={m}");
        }
    }
}

#[test]
fn henon_heiles_presets() {
    let spec = SystemSpec::ordinary_range(2, 1, -1, 4);
    for name in ["hh-a", "hh-b"] {
        let p = gauge_preset(name).unwrap();
        let mut binds = p.bindings.clone();
        binds.insert("a[4]".into(), cf("-1"));
        binds.insert("a[3]".into(), cf("0"));
        binds.insert("a[2]".into(), cf("0"));
        let opts = SolveOptions { free: None, gauge: Gauge::Explicit(p.tails) };
        let sys = solve_deformation(&spec, &opts).unwrap().subst_params(&binds);
        assert!(certify(&sys).exact_zero(), "{name}");
    }
}

#[test]
fn file_round_trip() {
    let sys = solve_deformation(&SystemSpec::ordinary(3, 3), &SolveOptions::default()).unwrap();
    let json = serde_json::to_string(&sys.to_file()).unwrap();
    let back = DeformedSystem::from_file(&serde_json::from_str(&json).unwrap()).unwrap();
    assert_eq!(back.h, sys.h);
    assert_eq!(back.coeff_fns, sys.coeff_fns);
    assert_eq!(certify(&back), certify(&sys));
}
