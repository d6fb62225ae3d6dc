//! Random generators shared by the property suites.
#![allow(dead_code)]

use proptest::prelude::*;

use qstackel::coeffring::{q_frac, CoeffExpr};
use qstackel::phasepoly::PhaseExpr;

const PARAMS: [&str; 3] = ["a[1]", "b[0]", "alpha"];

/// (coefficient, t1 power, t2 power, exp(k t1), exp(k t2), param index, param power)
pub type MonoSpec = (i64, i64, u32, u32, i32, i32, usize, u32);

pub fn mono_spec() -> impl Strategy<Value = MonoSpec> {
    (-4i64..=4, 1i64..=3, 0u32..=2, 0u32..=2, -1i32..=1, -1i32..=1, 0usize..3, 0u32..=2)
}

pub fn build(terms: &[MonoSpec]) -> CoeffExpr {
    let mut out = CoeffExpr::zero();
    for &(num, den, a, b, k1, k2, pi, pe) in terms {
        let m = &(&(&CoeffExpr::t(1).pow(a) * &CoeffExpr::t(2).pow(b)) * &(&CoeffExpr::exp(1, k1) * &CoeffExpr::exp(2, k2)))
            * &CoeffExpr::param(PARAMS[pi]).pow(pe);
        out += &m.scale(&q_frac(num, den));
    }
    out
}

pub fn coeff() -> impl Strategy<Value = CoeffExpr> {
    prop::collection::vec(mono_spec(), 0..4).prop_map(|v| build(&v))
}

/// Phase term: q exponents (q_2 may be negative), p exponents, coefficient.
pub fn phase_term() -> impl Strategy<Value = (i32, i32, u32, u32, Vec<MonoSpec>)> {
    (0i32..=2, -1i32..=2, 0u32..=2, 0u32..=2, prop::collection::vec(mono_spec(), 1..2))
}

pub fn phase() -> impl Strategy<Value = PhaseExpr> {
    prop::collection::vec(phase_term(), 0..4).prop_map(|ts| {
        let mut out = PhaseExpr::zero(2);
        for (q1, q2, p1, p2, c) in ts {
            out += &PhaseExpr::from_exponents(2, &[q1, q2], &[p1, p2], build(&c)).unwrap();
        }
        out
    })
}
