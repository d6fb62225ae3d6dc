//! Phase-space expressions: polynomials in `q_1..q_{n-1}`, `p_1..p_n`, Laurent in
//! `q_n`, with coefficients in [`CoeffExpr`].
//!
//! The bracket is `{f,g} = sum_i (df/dq_i dg/dp_i - df/dp_i dg/dq_i)`, so
//! `{q_i, p_j} = delta_ij` and Hamilton's equations read `q' = dH/dp`,
//! `p' = -dH/dq`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::coeffring::{q_int, CMono, CoeffExpr, Q};
use crate::error::{Error, Result};
use crate::parse::{self, ParseRing};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhaseExpr {
    n: usize,
    /// Exponent vector `[q_1..q_n, p_1..p_n]`.
    terms: BTreeMap<Vec<i32>, CoeffExpr>,
}

/// Numeric evaluation point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: Vec<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>, t: Vec<f64>) -> Self {
        PhasePoint { q, p, t }
    }
}

impl PhaseExpr {
    pub fn zero(n: usize) -> Self {
        PhaseExpr { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: CoeffExpr) -> Self {
        let mut out = Self::zero(n);
        out.add_term(vec![0; 2 * n], c);
        out
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, CoeffExpr::one())
    }

    /// The single accessor for Viete coordinates: `q_0 = 1`, `q_k = 0` for
    /// `k < 0` or `k > n`.
    pub fn q(n: usize, k: i64) -> Self {
        if k == 0 {
            return Self::one(n);
        }
        if k < 0 || k > n as i64 {
            return Self::zero(n);
        }
        let mut e = vec![0; 2 * n];
        e[k as usize - 1] = 1;
        Self::mono(n, e, CoeffExpr::one())
    }

    /// `q_n^k`, any integer `k`.
    pub fn qn_pow(n: usize, k: i32) -> Self {
        let mut e = vec![0; 2 * n];
        e[n - 1] = k;
        Self::mono(n, e, CoeffExpr::one())
    }

    /// `p_i`, 1-based; zero outside `1..n`.
    pub fn p(n: usize, i: i64) -> Self {
        if i < 1 || i > n as i64 {
            return Self::zero(n);
        }
        let mut e = vec![0; 2 * n];
        e[n + i as usize - 1] = 1;
        Self::mono(n, e, CoeffExpr::one())
    }

    fn mono(n: usize, e: Vec<i32>, c: CoeffExpr) -> Self {
        let mut out = Self::zero(n);
        out.add_term(e, c);
        out
    }

    /// Build from a raw exponent vector, enforcing the Laurent restriction.
    pub fn from_exponents(n: usize, q: &[i32], p: &[u32], c: CoeffExpr) -> Result<Self> {
        if q.len() != n || p.len() != n {
            return Err(Error::Dimension(format!("expected {n} q and p exponents")));
        }
        for (i, e) in q.iter().enumerate() {
            if *e < 0 && i + 1 != n {
                return Err(Error::NegativePower(i + 1));
            }
        }
        let mut e: Vec<i32> = q.to_vec();
        e.extend(p.iter().map(|x| *x as i32));
        Ok(Self::mono(n, e, c))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i32>, &CoeffExpr)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, e: Vec<i32>, c: CoeffExpr) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += &c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn coeff_of(&self, e: &[i32]) -> CoeffExpr {
        self.terms.get(e).cloned().unwrap_or_default()
    }

    fn check_n(&self, o: &PhaseExpr) {
        assert_eq!(self.n, o.n, "phase expressions over different n");
    }

    pub fn scale(&self, c: &CoeffExpr) -> Self {
        if c.is_zero() {
            return Self::zero(self.n);
        }
        PhaseExpr { n: self.n, terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect() }
            .cleaned()
    }

    pub fn scale_q(&self, c: &Q) -> Self {
        self.scale(&CoeffExpr::from_q(c.clone()))
    }

    fn cleaned(mut self) -> Self {
        self.terms.retain(|_, v| !v.is_zero());
        self
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::one(self.n);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(&CoeffExpr) -> CoeffExpr) -> Self {
        PhaseExpr { n: self.n, terms: self.terms.iter().map(|(e, v)| (e.clone(), f(v))).collect() }
            .cleaned()
    }

    pub fn try_map_coeffs(&self, f: impl Fn(&CoeffExpr) -> Result<CoeffExpr>) -> Result<Self> {
        let mut terms = BTreeMap::new();
        for (e, v) in &self.terms {
            terms.insert(e.clone(), f(v)?);
        }
        Ok(PhaseExpr { n: self.n, terms }.cleaned())
    }

    pub fn subst_param(&self, name: &str, val: &CoeffExpr) -> Self {
        self.map_coeffs(|c| c.subst_param(name, val))
    }

    pub fn subst_params(&self, map: &BTreeMap<String, CoeffExpr>) -> Self {
        self.map_coeffs(|c| c.subst_params(map))
    }

    pub fn diff_q(&self, i: usize) -> Self {
        let idx = i - 1;
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            let a = e[idx];
            if a != 0 {
                let mut f = e.clone();
                f[idx] -= 1;
                out.add_term(f, c.scale(&q_int(a as i64)));
            }
        }
        out
    }

    pub fn diff_p(&self, i: usize) -> Self {
        let idx = self.n + i - 1;
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            let a = e[idx];
            if a != 0 {
                let mut f = e.clone();
                f[idx] -= 1;
                out.add_term(f, c.scale(&q_int(a as i64)));
            }
        }
        out
    }

    pub fn diff_t(&self, j: usize) -> Self {
        self.map_coeffs(|c| c.diff(j))
    }

    /// Coefficient of the constant monomial.
    pub fn phase_free(&self) -> CoeffExpr {
        self.coeff_of(&vec![0; 2 * self.n])
    }

    /// Everything except the constant monomial.
    pub fn dynamic_part(&self) -> Self {
        let mut out = self.clone();
        out.terms.remove(&vec![0; 2 * self.n]);
        out
    }

    pub fn is_phase_independent(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|x| *x == 0))
    }

    pub fn depends_on_p(&self) -> bool {
        self.terms.keys().any(|e| e[self.n..].iter().any(|x| *x != 0))
    }

    pub fn p_degree(&self) -> u32 {
        self.terms.keys().map(|e| e[self.n..].iter().sum::<i32>() as u32).max().unwrap_or(0)
    }

    /// Part homogeneous of degree `k` in the momenta.
    pub fn p_part(&self, k: u32) -> Self {
        let n = self.n;
        PhaseExpr {
            n,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e[n..].iter().sum::<i32>() as u32 == k)
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn depends_on_time(&self) -> bool {
        self.terms.values().any(|c| c.depends_on_time())
    }

    pub fn depends_on_t(&self, j: usize) -> bool {
        self.terms.values().any(|c| c.depends_on_t(j))
    }

    pub fn params(&self) -> Vec<String> {
        let mut v: Vec<String> = self.terms.values().flat_map(|c| c.params()).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Substitute `p_i <- p_i + shift_i`, the shifts being momentum-free.
    pub fn subst_p(&self, shift: &[PhaseExpr]) -> Result<Self> {
        let n = self.n;
        if shift.len() != n {
            return Err(Error::InvalidShift(format!("expected {n} shift components")));
        }
        for (i, s) in shift.iter().enumerate() {
            self.check_n(s);
            if s.depends_on_p() {
                return Err(Error::InvalidShift(format!("component {} depends on p", i + 1)));
            }
        }
        let bases: Vec<PhaseExpr> = (0..n).map(|i| &PhaseExpr::p(n, i as i64 + 1) + &shift[i]).collect();
        let mut cache: BTreeMap<(usize, i32), PhaseExpr> = BTreeMap::new();
        let mut out = Self::zero(n);
        for (e, c) in &self.terms {
            let mut qpart = e.clone();
            for x in qpart[n..].iter_mut() {
                *x = 0;
            }
            let mut term = Self::mono(n, qpart, c.clone());
            for i in 0..n {
                let k = e[n + i];
                if k == 0 {
                    continue;
                }
                let pw = cache.entry((i, k)).or_insert_with(|| bases[i].pow(k as u32)).clone();
                term = &term * &pw;
            }
            out += &term;
        }
        Ok(out)
    }

    /// Replace `q_n^{-1}` powers and check for undefined evaluation.
    pub fn eval(&self, pt: &PhasePoint, params: &dyn Fn(&str) -> Option<f64>) -> Result<f64> {
        let n = self.n;
        if pt.q.len() != n || pt.p.len() != n {
            return Err(Error::Dimension(format!("point must have {n} q and p entries")));
        }
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            let mut v = c.eval(&pt.t, params)?;
            for i in 0..n {
                if e[i] < 0 && pt.q[i] == 0.0 {
                    return Err(Error::DivisionByZero(format!("q_{} = 0", i + 1)));
                }
                v *= pt.q[i].powi(e[i]) * pt.p[i].powi(e[n + i]);
            }
            acc += v;
        }
        Ok(acc)
    }

    pub fn to_latex(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let n = self.n;
        let mut s = String::new();
        for (i, (e, c)) in self.terms.iter().rev().enumerate() {
            let mono = phase_mono_latex(n, e);
            let (neg, body) = coeff_factor_latex(c, mono.is_empty());
            if i == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            s.push_str(&body);
            s.push_str(&mono);
        }
        s
    }

    pub fn to_json(&self) -> ExprJson {
        let n = self.n;
        let mut terms = Vec::new();
        for (e, c) in &self.terms {
            for (m, v) in c.terms() {
                terms.push(TermJson {
                    q: e[..n].to_vec(),
                    p: e[n..].iter().map(|x| *x as u32).collect(),
                    coeff: CoeffJson::from_mono(n, m, v),
                });
            }
        }
        ExprJson { n, terms }
    }

    pub fn from_json(j: &ExprJson) -> Result<Self> {
        let n = j.n;
        let mut out = Self::zero(n);
        for t in &j.terms {
            let c = t.coeff.to_coeff(n)?;
            out += &Self::from_exponents(n, &t.q, &t.p, c)?;
        }
        Ok(out)
    }

    /// Parse the plain-text syntax, e.g. `1/2*p1^2 - 1/2*q2*p2^2 + a[4]*q3^-1`.
    pub fn parse(n: usize, s: &str) -> Result<Self> {
        let hook = move |name: &str| -> Option<Result<PhaseVal>> {
            let (head, rest) = name.split_at(1);
            let idx: usize = rest.parse().ok()?;
            match head {
                "q" | "p" if idx == 0 || idx > n => {
                    Some(Err(Error::Parse(format!("{name} out of range for n = {n}"))))
                }
                "q" => Some(Ok(PhaseVal(PhaseExpr::q(n, idx as i64)))),
                "p" => Some(Ok(PhaseVal(PhaseExpr::p(n, idx as i64)))),
                _ => None,
            }
        };
        let v: PhaseVal = parse::parse_with(s, &hook)?;
        let mut out = v.0;
        if out.n == 0 {
            out = PhaseExpr::constant(n, out.phase_free_any());
        }
        Ok(out)
    }

    fn phase_free_any(&self) -> CoeffExpr {
        self.terms.values().next().cloned().unwrap_or_default()
    }

    /// Dimension-agnostic constant used while parsing.
    fn raw_constant(c: CoeffExpr) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Vec::new(), c);
        }
        PhaseExpr { n: 0, terms }
    }

    /// Lift a dimension-agnostic constant to `n`.
    fn lift(&self, n: usize) -> Self {
        if self.n == n {
            return self.clone();
        }
        assert_eq!(self.n, 0);
        PhaseExpr::constant(n, self.phase_free_any())
    }
}

/// Parser adaptor: constants have `n = 0` until combined with a phase atom.
#[derive(Clone)]
struct PhaseVal(PhaseExpr);

impl PhaseVal {
    fn pair(&self, o: &PhaseVal) -> (PhaseExpr, PhaseExpr) {
        let n = self.0.n.max(o.0.n);
        (self.0.lift(n), o.0.lift(n))
    }
}

impl ParseRing for PhaseVal {
    fn from_coeff(c: CoeffExpr) -> Self {
        PhaseVal(PhaseExpr::raw_constant(c))
    }
    fn as_coeff(&self) -> Option<CoeffExpr> {
        self.0.is_phase_independent().then(|| self.0.phase_free_any())
    }
    fn add(&self, o: &Self) -> Self {
        let (a, b) = self.pair(o);
        PhaseVal(&a + &b)
    }
    fn sub(&self, o: &Self) -> Self {
        let (a, b) = self.pair(o);
        PhaseVal(&a - &b)
    }
    fn mul(&self, o: &Self) -> Self {
        let (a, b) = self.pair(o);
        PhaseVal(&a * &b)
    }
    fn neg(&self) -> Self {
        PhaseVal(-&self.0)
    }
    fn pow(&self, k: i64) -> Result<Self> {
        if k >= 0 {
            return Ok(PhaseVal(self.0.pow(k as u32)));
        }
        let n = self.0.n;
        if n > 0 && self.0 == PhaseExpr::q(n, n as i64) {
            return Ok(PhaseVal(PhaseExpr::qn_pow(n, k as i32)));
        }
        Err(Error::Parse("negative powers are only allowed for q_n".into()))
    }
    fn div(&self, o: &Self) -> Result<Self> {
        let n = o.0.n;
        if n > 0 && o.0.len() == 1 {
            let (e, c) = o.0.terms().next().unwrap();
            let only_qn = e.iter().enumerate().all(|(i, x)| *x == 0 || i + 1 == n);
            if only_qn {
                if let Some(inv) = c.as_q().filter(|q| !q.is_zero()) {
                    let inv_e = PhaseExpr::qn_pow(n, -e[n - 1]).scale_q(&inv.recip());
                    return Ok(PhaseVal(&self.0.lift(n) * &inv_e));
                }
            }
        }
        Err(Error::Parse("division only by rational multiples of powers of q_n".into()))
    }
}

fn coeff_factor_latex(c: &CoeffExpr, bare: bool) -> (bool, String) {
    if let Some(q) = c.as_q() {
        let neg = q.is_negative();
        let a = q.abs();
        if a.is_one() {
            return (neg, if bare { "1".into() } else { String::new() });
        }
        let s = if a.denom().is_one() {
            a.numer().to_string()
        } else {
            format!("\\frac{{{}}}{{{}}}", a.numer(), a.denom())
        };
        return (neg, s);
    }
    if c.len() == 1 {
        let l = c.to_latex();
        if let Some(rest) = l.strip_prefix('-') {
            return (true, rest.to_string());
        }
        return (false, l);
    }
    (false, format!("\\left({}\\right)", c.to_latex()))
}

fn phase_mono_latex(n: usize, e: &[i32]) -> String {
    let mut s = String::new();
    for (k, name) in [(0usize, "q"), (n, "p")] {
        for i in 0..n {
            let a = e[k + i];
            if a == 0 {
                continue;
            }
            s.push_str(&format!("{name}_{{{}}}", i + 1));
            if a != 1 {
                s.push_str(&format!("^{{{a}}}"));
            }
        }
    }
    s
}

fn phase_mono_text(n: usize, e: &[i32]) -> Vec<String> {
    let mut f = Vec::new();
    for (k, name) in [(0usize, "q"), (n, "p")] {
        for i in 0..n {
            let a = e[k + i];
            if a == 1 {
                f.push(format!("{name}{}", i + 1));
            } else if a != 0 {
                f.push(format!("{name}{}^{a}", i + 1));
            }
        }
    }
    f
}

impl fmt::Display for PhaseExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let n = self.n;
        for (i, (e, c)) in self.terms.iter().rev().enumerate() {
            let mono = phase_mono_text(n, e);
            let (neg, cs) = match c.as_q() {
                Some(q) => (q.is_negative(), {
                    let a = q.abs();
                    if a.is_one() && !mono.is_empty() {
                        None
                    } else {
                        Some(a.to_string())
                    }
                }),
                None if c.len() == 1 => {
                    let s = c.to_string();
                    match s.strip_prefix('-') {
                        Some(r) => (true, Some(r.to_string())),
                        None => (false, Some(s)),
                    }
                }
                None => (false, Some(format!("({c})"))),
            };
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            let mut factors: Vec<String> = cs.into_iter().collect();
            factors.extend(mono);
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

impl std::ops::AddAssign<&PhaseExpr> for PhaseExpr {
    fn add_assign(&mut self, rhs: &PhaseExpr) {
        self.check_n(rhs);
        for (e, c) in &rhs.terms {
            self.add_term(e.clone(), c.clone());
        }
    }
}

impl std::ops::SubAssign<&PhaseExpr> for PhaseExpr {
    fn sub_assign(&mut self, rhs: &PhaseExpr) {
        self.check_n(rhs);
        for (e, c) in &rhs.terms {
            self.add_term(e.clone(), -c);
        }
    }
}

impl std::ops::Add for &PhaseExpr {
    type Output = PhaseExpr;
    fn add(self, rhs: &PhaseExpr) -> PhaseExpr {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl std::ops::Sub for &PhaseExpr {
    type Output = PhaseExpr;
    fn sub(self, rhs: &PhaseExpr) -> PhaseExpr {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl std::ops::Neg for &PhaseExpr {
    type Output = PhaseExpr;
    fn neg(self) -> PhaseExpr {
        PhaseExpr { n: self.n, terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect() }
    }
}

impl std::ops::Mul for &PhaseExpr {
    type Output = PhaseExpr;
    fn mul(self, rhs: &PhaseExpr) -> PhaseExpr {
        self.check_n(rhs);
        let mut acc: BTreeMap<Vec<i32>, CoeffExpr> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                let e: Vec<i32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                let c = c1 * c2;
                *acc.entry(e).or_default() += &c;
            }
        }
        PhaseExpr { n: self.n, terms: acc }.cleaned()
    }
}

macro_rules! owned_ops {
    ($tr:ident, $f:ident) => {
        impl std::ops::$tr for PhaseExpr {
            type Output = PhaseExpr;
            fn $f(self, rhs: PhaseExpr) -> PhaseExpr {
                std::ops::$tr::$f(&self, &rhs)
            }
        }
        impl std::ops::$tr<&PhaseExpr> for PhaseExpr {
            type Output = PhaseExpr;
            fn $f(self, rhs: &PhaseExpr) -> PhaseExpr {
                std::ops::$tr::$f(&self, rhs)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

impl std::ops::Neg for PhaseExpr {
    type Output = PhaseExpr;
    fn neg(self) -> PhaseExpr {
        -&self
    }
}

/// Poisson bracket `{f, g}`.
pub fn pb(f: &PhaseExpr, g: &PhaseExpr) -> PhaseExpr {
    f.check_n(g);
    let n = f.n;
    let mut acc: BTreeMap<Vec<i32>, CoeffExpr> = BTreeMap::new();
    for (e1, c1) in &f.terms {
        for (e2, c2) in &g.terms {
            let mut prod: Option<CoeffExpr> = None;
            for i in 0..n {
                let k = e1[i] * e2[n + i] - e1[n + i] * e2[i];
                if k == 0 {
                    continue;
                }
                let c = prod.get_or_insert_with(|| c1 * c2);
                let mut e: Vec<i32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                e[i] -= 1;
                e[n + i] -= 1;
                *acc.entry(e).or_default() += &c.scale(&q_int(k as i64));
            }
        }
    }
    PhaseExpr { n, terms: acc }.cleaned()
}

/// Partial derivative with respect to one named variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    Q(usize),
    P(usize),
    T(usize),
}

pub fn px_diff(f: &PhaseExpr, v: Var) -> PhaseExpr {
    match v {
        Var::Q(i) => f.diff_q(i),
        Var::P(i) => f.diff_p(i),
        Var::T(j) => f.diff_t(j),
    }
}

// ---------------------------------------------------------------------------
// JSON schema

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExprJson {
    pub n: usize,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub q: Vec<i32>,
    pub p: Vec<u32>,
    pub coeff: CoeffJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffJson {
    pub tpow: Vec<u32>,
    pub exppow: Vec<i32>,
    pub params: BTreeMap<String, u32>,
    /// Decimal strings, arbitrary precision.
    pub num: String,
    pub den: String,
}

impl CoeffJson {
    pub fn from_mono(n: usize, m: &CMono, v: &Q) -> Self {
        let mut tpow = m.tpow.clone();
        tpow.resize(n.max(tpow.len()), 0);
        let mut exppow = m.exppow.clone();
        exppow.resize(n.max(exppow.len()), 0);
        CoeffJson {
            tpow,
            exppow,
            params: m.params.iter().cloned().collect(),
            num: v.numer().to_string(),
            den: v.denom().to_string(),
        }
    }

    pub fn to_coeff(&self, n: usize) -> Result<CoeffExpr> {
        if self.tpow.len() > n || self.exppow.len() > n {
            return Err(Error::Dimension(format!("coefficient longer than n = {n}")));
        }
        let num: BigInt = self.num.parse().map_err(|_| Error::Parse(format!("bad numerator {}", self.num)))?;
        let den: BigInt = self.den.parse().map_err(|_| Error::Parse(format!("bad denominator {}", self.den)))?;
        if den.is_zero() {
            return Err(Error::DivisionByZero("denominator 0".into()));
        }
        let mut tpow = self.tpow.clone();
        while tpow.last() == Some(&0) {
            tpow.pop();
        }
        let mut exppow = self.exppow.clone();
        while exppow.last() == Some(&0) {
            exppow.pop();
        }
        let params = self.params.iter().filter(|(_, e)| **e > 0).map(|(k, e)| (k.clone(), *e)).collect();
        Ok(CoeffExpr::from_term(CMono { tpow, exppow, params }, Q::new(num, den)))
    }
}

/// JSON form of a bare coefficient (a list of monomials).
pub fn coeff_to_json(n: usize, c: &CoeffExpr) -> Vec<CoeffJson> {
    c.terms().map(|(m, v)| CoeffJson::from_mono(n, m, v)).collect()
}

pub fn coeff_from_json(n: usize, v: &[CoeffJson]) -> Result<CoeffExpr> {
    let mut out = CoeffExpr::zero();
    for c in v {
        out += &c.to_coeff(n)?;
    }
    Ok(out)
}
