//! Exact coefficient ring: polynomials in `t_1..t_n` and `exp(k t_j)` over the
//! rationals, with free symbolic parameters as extra polynomial generators.
//!
//! Exponent vectors are stored trimmed (no trailing zeros), so a constant has
//! the same representation for every `n`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q_int(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn q_frac(a: i64, b: i64) -> Q {
    Q::new(BigInt::from(a), BigInt::from(b))
}

/// Monomial `t^tpow * exp(exppow . t) * params`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct CMono {
    pub tpow: Vec<u32>,
    pub exppow: Vec<i32>,
    /// Sorted by name, exponents positive.
    pub params: Vec<(String, u32)>,
}

fn trim<T: Zero + PartialEq>(v: &mut Vec<T>) {
    while v.last().map_or(false, |x| x.is_zero()) {
        v.pop();
    }
}

fn add_vecs<T: Copy + Zero + PartialEq + std::ops::Add<Output = T>>(a: &[T], b: &[T]) -> Vec<T> {
    let len = a.len().max(b.len());
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let x = a.get(i).copied().unwrap_or_else(T::zero);
        let y = b.get(i).copied().unwrap_or_else(T::zero);
        out.push(x + y);
    }
    trim(&mut out);
    out
}

fn merge_params(a: &[(String, u32)], b: &[(String, u32)]) -> Vec<(String, u32)> {
    if b.is_empty() {
        return a.to_vec();
    }
    if a.is_empty() {
        return b.to_vec();
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((a[i].0.clone(), a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

impl CMono {
    pub fn one() -> Self {
        CMono::default()
    }

    pub fn is_one(&self) -> bool {
        self.tpow.is_empty() && self.exppow.is_empty() && self.params.is_empty()
    }

    pub fn mul(&self, other: &CMono) -> CMono {
        CMono {
            tpow: add_vecs(&self.tpow, &other.tpow),
            exppow: add_vecs(&self.exppow, &other.exppow),
            params: merge_params(&self.params, &other.params),
        }
    }

    pub fn t_deg(&self, j: usize) -> u32 {
        self.tpow.get(j).copied().unwrap_or(0)
    }

    pub fn e_deg(&self, j: usize) -> i32 {
        self.exppow.get(j).copied().unwrap_or(0)
    }

    pub fn param_deg(&self, name: &str) -> u32 {
        self.params.iter().find(|(p, _)| p == name).map_or(0, |(_, e)| *e)
    }

    fn with_t(&self, j: usize, deg: u32) -> CMono {
        let mut m = self.clone();
        if m.tpow.len() <= j {
            m.tpow.resize(j + 1, 0);
        }
        m.tpow[j] = deg;
        trim(&mut m.tpow);
        m
    }

    fn without_param(&self, name: &str) -> CMono {
        let mut m = self.clone();
        m.params.retain(|(p, _)| p != name);
        m
    }

    /// Highest time index (1-based) this monomial touches.
    pub fn time_dim(&self) -> usize {
        self.tpow.len().max(self.exppow.len())
    }
}

/// Element of the coefficient ring in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct CoeffExpr {
    terms: BTreeMap<CMono, Q>,
}

impl CoeffExpr {
    pub fn zero() -> Self {
        CoeffExpr::default()
    }

    pub fn one() -> Self {
        Self::from_q(Q::one())
    }

    pub fn from_q(c: Q) -> Self {
        Self::from_term(CMono::one(), c)
    }

    pub fn from_int(v: i64) -> Self {
        Self::from_q(q_int(v))
    }

    pub fn from_term(m: CMono, c: Q) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        CoeffExpr { terms }
    }

    /// `t_j`, 1-based.
    pub fn t(j: usize) -> Self {
        assert!(j >= 1, "time index is 1-based");
        Self::from_term(CMono::one().with_t(j - 1, 1), Q::one())
    }

    /// `exp(k t_j)`, 1-based.
    pub fn exp(j: usize, k: i32) -> Self {
        assert!(j >= 1, "time index is 1-based");
        let mut e = vec![0; j];
        e[j - 1] = k;
        trim(&mut e);
        Self::from_term(CMono { exppow: e, ..CMono::one() }, Q::one())
    }

    pub fn param(name: &str) -> Self {
        Self::from_term(
            CMono { params: vec![(name.to_string(), 1)], ..CMono::one() },
            Q::one(),
        )
    }

    pub fn terms(&self) -> impl Iterator<Item = (&CMono, &Q)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> impl Iterator<Item = (CMono, Q)> {
        self.terms.into_iter()
    }

    pub fn from_terms<I: IntoIterator<Item = (CMono, Q)>>(it: I) -> Self {
        let mut out = CoeffExpr::zero();
        for (m, c) in it {
            out.add_term(m, c);
        }
        out
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

    pub fn add_term(&mut self, m: CMono, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    /// The rational value if the element is a constant.
    pub fn as_q(&self) -> Option<Q> {
        match self.terms.len() {
            0 => Some(Q::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn is_one(&self) -> bool {
        self.as_q().map_or(false, |c| c.is_one())
    }

    /// Highest time index (1-based) appearing in the element.
    pub fn time_dim(&self) -> usize {
        self.terms.keys().map(CMono::time_dim).max().unwrap_or(0)
    }

    /// Dimension check used by the public arithmetic entry point.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        let d = self.time_dim();
        if d > n {
            return Err(Error::Dimension(format!("coefficient uses t_{d} but n = {n}")));
        }
        Ok(())
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return CoeffExpr::zero();
        }
        CoeffExpr { terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect() }
    }

    pub fn mul_mono(&self, mono: &CMono, c: &Q) -> Self {
        if c.is_zero() {
            return CoeffExpr::zero();
        }
        CoeffExpr { terms: self.terms.iter().map(|(m, v)| (m.mul(mono), v * c)).collect() }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = CoeffExpr::one();
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Partial derivative in `t_j` (1-based).
    pub fn diff(&self, j: usize) -> Self {
        let idx = j - 1;
        let mut out = CoeffExpr::zero();
        for (m, c) in &self.terms {
            let a = m.t_deg(idx);
            let k = m.e_deg(idx);
            if a > 0 {
                out.add_term(m.with_t(idx, a - 1), c * q_int(a as i64));
            }
            if k != 0 {
                out.add_term(m.clone(), c * q_int(k as i64));
            }
        }
        out
    }

    /// Antiderivative in `t_j` (1-based) with zero integration constant.
    pub fn integrate(&self, j: usize) -> Self {
        let idx = j - 1;
        let mut out = CoeffExpr::zero();
        for (m, c) in &self.terms {
            let a = m.t_deg(idx);
            let k = m.e_deg(idx);
            if k == 0 {
                out.add_term(m.with_t(idx, a + 1), c / q_int(a as i64 + 1));
            } else {
                // int t^a e^{kt} = e^{kt} sum_i (-1)^i a!/(a-i)! t^{a-i} / k^{i+1}
                let kq = q_int(k as i64);
                let mut fall = Q::one();
                let mut kp = kq.clone();
                for i in 0..=a {
                    let sign = if i % 2 == 0 { Q::one() } else { -Q::one() };
                    out.add_term(m.with_t(idx, a - i), c * &sign * &fall / &kp);
                    fall *= q_int((a - i) as i64);
                    kp *= &kq;
                }
            }
        }
        out
    }

    pub fn depends_on_t(&self, j: usize) -> bool {
        let idx = j - 1;
        self.terms.keys().any(|m| m.t_deg(idx) > 0 || m.e_deg(idx) != 0)
    }

    pub fn depends_on_time(&self) -> bool {
        self.terms.keys().any(|m| !m.tpow.is_empty() || !m.exppow.is_empty())
    }

    pub fn params(&self) -> Vec<String> {
        let mut v: Vec<String> =
            self.terms.keys().flat_map(|m| m.params.iter().map(|(p, _)| p.clone())).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn has_param(&self, name: &str) -> bool {
        self.terms.keys().any(|m| m.param_deg(name) > 0)
    }

    /// Replace a parameter by an expression.
    pub fn subst_param(&self, name: &str, val: &CoeffExpr) -> Self {
        if !self.has_param(name) {
            return self.clone();
        }
        let mut powers: Vec<CoeffExpr> = vec![CoeffExpr::one()];
        let mut out = CoeffExpr::zero();
        for (m, c) in &self.terms {
            let d = m.param_deg(name) as usize;
            while powers.len() <= d {
                let next = powers.last().unwrap() * val;
                powers.push(next);
            }
            let rest = m.without_param(name);
            out += &powers[d].mul_mono(&rest, c);
        }
        out
    }

    pub fn subst_params(&self, map: &BTreeMap<String, CoeffExpr>) -> Self {
        let mut out = self.clone();
        for (k, v) in map {
            out = out.subst_param(k, v);
        }
        out
    }

    /// Replace `t_j` (1-based) by an expression; exponentials in `t_j` must be absent.
    pub fn subst_t(&self, j: usize, val: &CoeffExpr) -> Result<Self> {
        let idx = j - 1;
        let mut out = CoeffExpr::zero();
        for (m, c) in &self.terms {
            if m.e_deg(idx) != 0 {
                return Err(Error::Unsupported(format!("cannot substitute t_{j} inside exp")));
            }
            let a = m.t_deg(idx);
            out += &val.pow(a).mul_mono(&m.with_t(idx, 0), c);
        }
        Ok(out)
    }

    /// Coefficients with respect to one parameter: `sum_k x^k * coeff_k`.
    pub fn split_param(&self, name: &str) -> BTreeMap<u32, CoeffExpr> {
        let mut out: BTreeMap<u32, CoeffExpr> = BTreeMap::new();
        for (m, c) in &self.terms {
            let d = m.param_deg(name);
            out.entry(d).or_default().add_term(m.without_param(name), c.clone());
        }
        out.retain(|_, v| !v.is_zero());
        out
    }

    /// Reduce powers of the parameter `name` with the relation `name^deg = value`.
    pub fn reduce_power(&self, name: &str, deg: u32, value: &CoeffExpr) -> Self {
        if !self.has_param(name) {
            return self.clone();
        }
        let x = Self::param(name);
        let mut out = Self::zero();
        for (k, c) in self.split_param(name) {
            out += &(&(&c * &value.pow(k / deg)) * &x.pow(k % deg));
        }
        out
    }

    /// Inverse if the element is a single rational multiple of an exponential.
    pub fn inv_unit(&self) -> Option<Self> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next().unwrap();
        if !m.tpow.is_empty() || !m.params.is_empty() {
            return None;
        }
        let e: Vec<i32> = m.exppow.iter().map(|x| -x).collect();
        Some(Self::from_term(CMono { exppow: e, ..CMono::one() }, c.recip()))
    }

    /// Numeric evaluation. `t` is indexed from `t_1`.
    pub fn eval(&self, t: &[f64], params: &dyn Fn(&str) -> Option<f64>) -> Result<f64> {
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut v = q_to_f64(c);
            for (j, a) in m.tpow.iter().enumerate() {
                let tj = *t.get(j).ok_or_else(|| Error::Dimension(format!("t_{} missing", j + 1)))?;
                v *= tj.powi(*a as i32);
            }
            let mut arg = 0.0;
            for (j, k) in m.exppow.iter().enumerate() {
                let tj = *t.get(j).ok_or_else(|| Error::Dimension(format!("t_{} missing", j + 1)))?;
                arg += *k as f64 * tj;
            }
            v *= arg.exp();
            for (p, e) in &m.params {
                let pv = params(p).ok_or_else(|| Error::UnboundParam(p.clone()))?;
                v *= pv.powi(*e as i32);
            }
            acc += v;
        }
        Ok(acc)
    }

    pub fn to_latex(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        for (i, (m, c)) in self.display_order().into_iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if i == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            let body = mono_latex(m);
            if a.is_one() {
                s.push_str(if body.is_empty() { "1" } else { &body });
            } else {
                s.push_str(&q_latex(&a));
                s.push_str(&body);
            }
        }
        s
    }

    fn display_order(&self) -> Vec<(&CMono, &Q)> {
        // constants first, then by the canonical order
        self.terms.iter().collect()
    }

    /// `true` when all terms are rational constants times parameters only.
    pub fn is_time_free(&self) -> bool {
        !self.depends_on_time()
    }
}

pub fn q_to_f64(c: &Q) -> f64 {
    let n = c.numer().to_f64().unwrap_or(f64::NAN);
    let d = c.denom().to_f64().unwrap_or(f64::NAN);
    if n.is_finite() && d.is_finite() {
        n / d
    } else {
        // very large numerators: fall back to scaled division
        let shift = c.numer().bits().max(c.denom().bits()).saturating_sub(900);
        let nn = (c.numer() >> shift).to_f64().unwrap_or(0.0);
        let dd = (c.denom() >> shift).to_f64().unwrap_or(1.0);
        nn / dd
    }
}

/// LaTeX form of a parameter name: `a[-1]` -> `a_{-1}`, `bbar` -> `\bar{b}`.
pub fn param_latex(name: &str) -> String {
    if name == "bbar" {
        return "\\bar{b}".into();
    }
    if let Some(open) = name.find('[') {
        let base = &name[..open];
        let idx = name[open + 1..].trim_end_matches(']');
        return format!("{base}_{{{idx}}}");
    }
    let split = name.find(|c: char| c.is_ascii_digit());
    match split {
        Some(k) if k > 0 => format!("{}_{{{}}}", &name[..k], &name[k..]),
        _ => name.to_string(),
    }
}

fn q_latex(c: &Q) -> String {
    if c.denom().is_one() {
        c.numer().to_string()
    } else {
        format!("\\frac{{{}}}{{{}}}", c.numer(), c.denom())
    }
}

fn mono_latex(m: &CMono) -> String {
    let mut s = String::new();
    for (p, e) in &m.params {
        s.push_str(&param_latex(p));
        if *e > 1 {
            s.push_str(&format!("^{{{e}}}"));
        }
    }
    for (j, a) in m.tpow.iter().enumerate() {
        if *a > 0 {
            s.push_str(&format!("t_{{{}}}", j + 1));
            if *a > 1 {
                s.push_str(&format!("^{{{a}}}"));
            }
        }
    }
    let arg = exp_arg_text(&m.exppow, true);
    if !arg.is_empty() {
        s.push_str(&format!("e^{{{arg}}}"));
    }
    s
}

fn exp_arg_text(e: &[i32], latex: bool) -> String {
    let mut s = String::new();
    for (j, k) in e.iter().enumerate() {
        if *k == 0 {
            continue;
        }
        let var = if latex { format!("t_{{{}}}", j + 1) } else { format!("t{}", j + 1) };
        let mag = k.unsigned_abs();
        let body = if mag == 1 {
            var
        } else if latex {
            format!("{mag}{var}")
        } else {
            format!("{mag}*{var}")
        };
        if s.is_empty() {
            if *k < 0 {
                s.push('-');
            }
        } else {
            s.push_str(if *k < 0 { " - " } else { " + " });
        }
        s.push_str(&body);
    }
    s
}

fn mono_text(m: &CMono) -> Vec<String> {
    let mut f = Vec::new();
    for (p, e) in &m.params {
        f.push(if *e > 1 { format!("{p}^{e}") } else { p.clone() });
    }
    for (j, a) in m.tpow.iter().enumerate() {
        if *a == 1 {
            f.push(format!("t{}", j + 1));
        } else if *a > 1 {
            f.push(format!("t{}^{}", j + 1, a));
        }
    }
    let arg = exp_arg_text(&m.exppow, false);
    if !arg.is_empty() {
        f.push(format!("exp({arg})"));
    }
    f
}

impl fmt::Display for CoeffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.display_order().into_iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            let mut factors = mono_text(m);
            if !a.is_one() || factors.is_empty() {
                factors.insert(0, a.to_string());
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

impl std::ops::AddAssign<&CoeffExpr> for CoeffExpr {
    fn add_assign(&mut self, rhs: &CoeffExpr) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), c.clone());
        }
    }
}

impl std::ops::SubAssign<&CoeffExpr> for CoeffExpr {
    fn sub_assign(&mut self, rhs: &CoeffExpr) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), -c.clone());
        }
    }
}

impl std::ops::Add for &CoeffExpr {
    type Output = CoeffExpr;
    fn add(self, rhs: &CoeffExpr) -> CoeffExpr {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl std::ops::Sub for &CoeffExpr {
    type Output = CoeffExpr;
    fn sub(self, rhs: &CoeffExpr) -> CoeffExpr {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl std::ops::Neg for &CoeffExpr {
    type Output = CoeffExpr;
    fn neg(self) -> CoeffExpr {
        CoeffExpr { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }
}

impl std::ops::Mul for &CoeffExpr {
    type Output = CoeffExpr;
    fn mul(self, rhs: &CoeffExpr) -> CoeffExpr {
        if self.terms.is_empty() || rhs.terms.is_empty() {
            return CoeffExpr::zero();
        }
        if let Some(c) = self.as_q() {
            return rhs.scale(&c);
        }
        if let Some(c) = rhs.as_q() {
            return self.scale(&c);
        }
        let mut out = CoeffExpr::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

macro_rules! owned_ops {
    ($tr:ident, $f:ident) => {
        impl std::ops::$tr for CoeffExpr {
            type Output = CoeffExpr;
            fn $f(self, rhs: CoeffExpr) -> CoeffExpr {
                std::ops::$tr::$f(&self, &rhs)
            }
        }
        impl std::ops::$tr<&CoeffExpr> for CoeffExpr {
            type Output = CoeffExpr;
            fn $f(self, rhs: &CoeffExpr) -> CoeffExpr {
                std::ops::$tr::$f(&self, rhs)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

impl std::ops::Neg for CoeffExpr {
    type Output = CoeffExpr;
    fn neg(self) -> CoeffExpr {
        -&self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

/// Checked arithmetic for callers that carry an explicit `n`.
pub fn cf_arith(n: usize, x: &CoeffExpr, y: &CoeffExpr, op: ArithOp) -> Result<CoeffExpr> {
    x.check_dim(n)?;
    y.check_dim(n)?;
    Ok(match op {
        ArithOp::Add => x + y,
        ArithOp::Sub => x - y,
        ArithOp::Mul => x * y,
    })
}

impl FromStr for CoeffExpr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        crate::parse::parse(s)
    }
}

/// Parse shorthand used throughout tests and the CLI.
pub fn cf(s: &str) -> CoeffExpr {
    s.parse().unwrap_or_else(|e| panic!("bad coefficient literal {s:?}: {e}"))
}

/// Exact rational square root if it exists.
pub fn q_sqrt(c: &Q) -> Option<Q> {
    if c.is_negative() {
        return None;
    }
    let n = c.numer().sqrt();
    let d = c.denom().sqrt();
    (&n * &n == *c.numer() && &d * &d == *c.denom()).then(|| Q::new(n, d))
}
