//! One-dimensional systems and their second-order equations.
//!
//! Momentum is eliminated from a Hamiltonian quadratic in `p`, and the
//! resulting equation `y'' = R(y, y', x)` is brought to Painlevé normal forms by
//! exact changes of variables. Irrational scale factors live in a formal
//! symbol `s` with a relation `s^N = 2`.

use std::collections::BTreeMap;
use std::fmt;

use crate::canonmap::{build_map, default_e, obstruction, ordinary_representation, theorem_pde, Verdict};
use crate::coeffring::{q_int, CMono, CoeffExpr, Q};
use crate::error::{Error, Result};
use crate::phasepoly::PhaseExpr;

/// Slots of a [`LPoly`] monomial.
pub const Y: usize = 0;
pub const Y1: usize = 1;
pub const X: usize = 2;
pub const EX: usize = 3;

/// Laurent polynomial in `y, y', x, e^x` with parameter coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LPoly {
    terms: BTreeMap<[i32; 4], CoeffExpr>,
}

impl LPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: CoeffExpr) -> Self {
        Self::mono([0; 4], c)
    }

    pub fn mono(e: [i32; 4], c: CoeffExpr) -> Self {
        let mut p = Self::zero();
        p.add_term(e, c);
        p
    }

    pub fn var(i: usize) -> Self {
        let mut e = [0; 4];
        e[i] = 1;
        Self::mono(e, CoeffExpr::one())
    }

    pub fn var_pow(i: usize, k: i32) -> Self {
        let mut e = [0; 4];
        e[i] = k;
        Self::mono(e, CoeffExpr::one())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[i32; 4], &CoeffExpr)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, e: [i32; 4], c: CoeffExpr) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(e).or_default();
        *slot += &c;
        if slot.is_zero() {
            self.terms.remove(&e);
        }
    }

    pub fn scale(&self, c: &CoeffExpr) -> Self {
        let mut out = Self::zero();
        for (e, v) in &self.terms {
            out.add_term(*e, v * c);
        }
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(&CoeffExpr) -> CoeffExpr) -> Self {
        let mut out = Self::zero();
        for (e, v) in &self.terms {
            out.add_term(*e, f(v));
        }
        out
    }

    pub fn uses(&self, i: usize) -> bool {
        self.terms.keys().any(|e| e[i] != 0)
    }

    pub fn diff(&self, i: usize) -> Self {
        let mut out = Self::zero();
        for (e, v) in &self.terms {
            if e[i] != 0 {
                let mut f = *e;
                f[i] -= 1;
                out.add_term(f, v.scale(&q_int(e[i] as i64)));
            }
        }
        out
    }

    /// Total derivative in `x` of an expression free of `y, y'`.
    pub fn dx_explicit(&self) -> Self {
        &self.diff(X) + &(&LPoly::var(EX) * &self.diff(EX))
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::constant(CoeffExpr::one());
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    fn as_mono(&self) -> Option<([i32; 4], &CoeffExpr)> {
        if self.terms.len() != 1 {
            return None;
        }
        self.terms.iter().next().map(|(e, c)| (*e, c))
    }

    /// Inverse of a monomial, using `ctx` to invert its coefficient.
    pub fn inv_mono(&self, ctx: &Ctx) -> Option<Self> {
        let (e, c) = self.as_mono()?;
        let ci = ctx.invert(c)?;
        Some(Self::mono([-e[0], -e[1], -e[2], -e[3]], ci))
    }

    /// Substitute slot `i` by `val`; negative powers need `val` to be a monomial.
    pub fn subst(&self, i: usize, val: &LPoly, ctx: &Ctx) -> Result<Self> {
        let mut vals: [Option<&LPoly>; 4] = [None; 4];
        vals[i] = Some(val);
        self.subst_all(vals, ctx)
    }

    /// Simultaneous substitution; `None` keeps a slot unchanged.
    pub fn subst_all(&self, vals: [Option<&LPoly>; 4], ctx: &Ctx) -> Result<Self> {
        let invs: Vec<Option<LPoly>> = vals.iter().map(|v| v.and_then(|v| v.inv_mono(ctx))).collect();
        let mut cache: BTreeMap<(usize, i32), LPoly> = BTreeMap::new();
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            let mut f = *e;
            let mut term = LPoly::zero();
            for i in 0..4 {
                if vals[i].is_some() {
                    f[i] = 0;
                }
            }
            term.add_term(f, c.clone());
            for i in 0..4 {
                let Some(val) = vals[i] else { continue };
                let k = e[i];
                if k == 0 {
                    continue;
                }
                if !cache.contains_key(&(i, k)) {
                    let p = if k > 0 {
                        val.pow(k as u32)
                    } else {
                        invs[i]
                            .as_ref()
                            .ok_or_else(|| Error::Unsupported("negative power of a non-monomial".into()))?
                            .pow((-k) as u32)
                    };
                    cache.insert((i, k), p);
                }
                term = &term * &cache[&(i, k)];
            }
            out += &term;
        }
        Ok(out.map_coeffs(|c| ctx.reduce(c)))
    }

    /// Smallest monomial clearing every negative exponent.
    pub fn clearing_monomial(&self) -> [i32; 4] {
        let mut e = [0; 4];
        for k in self.terms.keys() {
            for i in 0..4 {
                e[i] = e[i].max(-k[i]);
            }
        }
        e
    }

    /// Convert a one-dimensional, momentum-free phase expression.
    pub fn from_phase(h: &PhaseExpr) -> Result<Self> {
        if h.n() != 1 {
            return Err(Error::Dimension("expected a one-dimensional expression".into()));
        }
        let mut out = Self::zero();
        for (e, c) in h.terms() {
            if e[1] != 0 {
                return Err(Error::InvalidConfig("expression depends on p".into()));
            }
            out += &Self::from_coeff(c).mul_mono([e[0], 0, 0, 0]);
        }
        Ok(out)
    }

    pub fn from_coeff(c: &CoeffExpr) -> Self {
        let mut out = Self::zero();
        for (m, v) in c.terms() {
            if m.time_dim() > 1 {
                // higher times never occur in one-dimensional systems
                continue;
            }
            let e = [0, 0, m.t_deg(0) as i32, m.e_deg(0)];
            let p = CMono { tpow: vec![], exppow: vec![], params: m.params.clone() };
            out.add_term(e, CoeffExpr::from_term(p, v.clone()));
        }
        out
    }

    fn mul_mono(&self, f: [i32; 4]) -> Self {
        let mut out = Self::zero();
        for (e, c) in &self.terms {
            out.add_term([e[0] + f[0], e[1] + f[1], e[2] + f[2], e[3] + f[3]], c.clone());
        }
        out
    }

    pub fn params(&self) -> Vec<String> {
        let mut v: Vec<String> = self.terms.values().flat_map(|c| c.params()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn subst_params(&self, map: &BTreeMap<String, CoeffExpr>) -> Self {
        self.map_coeffs(|c| c.subst_params(map))
    }

    pub fn fmt_with(&self, names: &VarNames, latex: bool) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut parts: Vec<(bool, String)> = Vec::new();
        for (e, c) in self.terms.iter().rev() {
            let mut factors: Vec<String> = Vec::new();
            let syms = names.symbols(latex);
            for i in 0..4 {
                if e[i] == 0 {
                    continue;
                }
                let base = &syms[i];
                factors.push(match (e[i], latex) {
                    (1, _) => base.clone(),
                    (k, true) => format!("{base}^{{{k}}}"),
                    (k, false) => format!("{base}^{k}"),
                });
            }
            let (neg, coef) = coeff_display(c, latex);
            let body = match (coef.as_str(), factors.is_empty()) {
                ("1", true) => "1".to_string(),
                ("1", false) => factors.join(if latex { " " } else { "*" }),
                (_, true) => coef,
                (_, false) => format!("{coef}{}{}", if latex { " " } else { "*" }, factors.join(if latex { " " } else { "*" })),
            };
            parts.push((neg, body));
        }
        let mut s = String::new();
        for (i, (neg, body)) in parts.iter().enumerate() {
            match (i, neg) {
                (0, true) => s.push_str(&format!("-{body}")),
                (0, false) => s.push_str(body),
                (_, true) => s.push_str(&format!(" - {body}")),
                (_, false) => s.push_str(&format!(" + {body}")),
            }
        }
        s
    }
}

fn greek(s: &str) -> String {
    match s {
        "alpha" | "beta" | "gamma" | "delta" | "tau" => format!("\\{s}"),
        _ => s.replace('\'', "^{\\prime}"),
    }
}

fn greek_params(s: String) -> String {
    let mut out = s;
    for g in ["alpha", "beta", "gamma", "delta"] {
        out = out.replace(g, &format!("\\{g} "));
    }
    out.replace(" }", "}").trim_end().to_string()
}

fn coeff_display(c: &CoeffExpr, latex: bool) -> (bool, String) {
    if latex && c.as_q().is_none() {
        let neg = c.len() == 1 && c.terms().all(|(_, v)| *v < q_int(0));
        let tex = if neg { (-c).to_latex() } else { c.to_latex() };
        let tex = greek_params(tex);
        return (neg, if c.len() > 1 { format!("({tex})") } else { tex });
    }
    if let Some(q) = c.as_q() {
        let neg = q < q_int(0);
        let a = if neg { -q } else { q };
        let txt = if a.is_integer() {
            a.to_string()
        } else if latex {
            format!("\\frac{{{}}}{{{}}}", a.numer(), a.denom())
        } else {
            a.to_string()
        };
        return (neg, txt);
    }
    if c.len() == 1 {
        let (_, v) = c.terms().next().unwrap();
        if *v < q_int(0) {
            let s = if latex { (-c).to_latex() } else { (-c).to_string() };
            return (true, s);
        }
        return (false, if latex { c.to_latex() } else { c.to_string() });
    }
    let s = if latex { c.to_latex() } else { c.to_string() };
    (false, format!("({s})"))
}

impl std::ops::AddAssign<&LPoly> for LPoly {
    fn add_assign(&mut self, o: &LPoly) {
        for (e, c) in &o.terms {
            self.add_term(*e, c.clone());
        }
    }
}

impl std::ops::Add for &LPoly {
    type Output = LPoly;
    fn add(self, o: &LPoly) -> LPoly {
        let mut r = self.clone();
        r += o;
        r
    }
}

impl std::ops::Sub for &LPoly {
    type Output = LPoly;
    fn sub(self, o: &LPoly) -> LPoly {
        let mut r = self.clone();
        r += &(-o);
        r
    }
}

impl std::ops::Neg for &LPoly {
    type Output = LPoly;
    fn neg(self) -> LPoly {
        self.map_coeffs(|c| -c)
    }
}

impl std::ops::Mul for &LPoly {
    type Output = LPoly;
    fn mul(self, o: &LPoly) -> LPoly {
        let mut out = LPoly::zero();
        for (a, ca) in &self.terms {
            for (b, cb) in &o.terms {
                out.add_term([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]], ca * cb);
            }
        }
        out
    }
}

/// Formal scale symbol with `name^degree = value`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleSymbol {
    pub name: String,
    pub degree: u32,
    pub value: Q,
}

impl ScaleSymbol {
    pub fn new(degree: u32) -> Self {
        ScaleSymbol { name: "s".into(), degree, value: q_int(2) }
    }

    /// `name^k` for any integer `k`, reduced.
    pub fn pow(&self, k: i32) -> CoeffExpr {
        let d = self.degree as i32;
        let (qt, r) = (k.div_euclid(d), k.rem_euclid(d));
        CoeffExpr::param(&self.name).pow(r as u32).scale(&self.value.pow(qt))
    }
}

/// Arithmetic context: an optional scale relation used for reduction and inversion.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Ctx {
    pub scale: Option<ScaleSymbol>,
}

impl Ctx {
    pub fn reduce(&self, c: &CoeffExpr) -> CoeffExpr {
        match &self.scale {
            Some(s) => c.reduce_power(&s.name, s.degree, &CoeffExpr::from_q(s.value.clone())),
            None => c.clone(),
        }
    }

    /// Inverse of a rational multiple of a power of the scale symbol.
    pub fn invert(&self, c: &CoeffExpr) -> Option<CoeffExpr> {
        if c.len() != 1 {
            return None;
        }
        let (m, v) = c.terms().next().unwrap();
        if !m.tpow.is_empty() || !m.exppow.is_empty() {
            return None;
        }
        let mut out = CoeffExpr::from_q(v.recip());
        for (p, e) in &m.params {
            let s = self.scale.as_ref().filter(|s| &s.name == p)?;
            out = &out * &s.pow(-(*e as i32));
        }
        Some(self.reduce(&out))
    }
}

/// Display names of the dependent and independent variables.
#[derive(Clone, Debug, PartialEq)]
pub struct VarNames {
    pub dep: String,
    pub indep: String,
}

impl VarNames {
    pub fn new(dep: &str, indep: &str) -> Self {
        VarNames { dep: dep.into(), indep: indep.into() }
    }

    fn symbols(&self, latex: bool) -> [String; 4] {
        if latex {
            let (d, i) = (greek(&self.dep), greek(&self.indep));
            [d.clone(), format!("{d}_{{{i}}}"), i.clone(), format!("e^{{{i}}}")]
        } else {
            [self.dep.clone(), format!("{}_{}", self.dep, self.indep), self.indep.clone(), format!("exp({})", self.indep)]
        }
    }
}

/// Second-order equation `y'' = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeExpr {
    pub rhs: LPoly,
    pub names: VarNames,
}

impl OdeExpr {
    pub fn new(rhs: LPoly) -> Self {
        OdeExpr { rhs, names: VarNames::new("q", "t") }
    }

    /// The equation cleared of denominators: `(multiplier, rhs·multiplier)`.
    pub fn cleared(&self) -> ([i32; 4], LPoly) {
        let e = self.rhs.clearing_monomial();
        (e, self.rhs.mul_mono(e))
    }

    pub fn to_text(&self) -> String {
        self.render(false)
    }

    pub fn to_latex(&self) -> String {
        self.render(true)
    }

    fn render(&self, latex: bool) -> String {
        let (e, rhs) = self.cleared();
        let mult = LPoly::mono(e, CoeffExpr::one()).fmt_with(&self.names, latex);
        let y2 = if latex {
            let i = greek(&self.names.indep);
            format!("{}_{{{i}{i}}}", greek(&self.names.dep))
        } else {
            format!("{}_{}{}", self.names.dep, self.names.indep, self.names.indep)
        };
        let lhs = if mult == "1" { y2 } else if latex { format!("{mult} {y2}") } else { format!("{mult}*{y2}") };
        format!("{lhs} = {}", rhs.fmt_with(&self.names, latex))
    }

    pub fn subst_params(&self, map: &BTreeMap<String, CoeffExpr>, ctx: &Ctx) -> Self {
        OdeExpr { rhs: self.rhs.subst_params(map).map_coeffs(|c| ctx.reduce(c)), names: self.names.clone() }
    }

    /// General point change: old `y, y', y''` and `x, e^x` in terms of new ones,
    /// with `y'' = y2_coeff·Y'' + y2_rest` and `y2_coeff` a monomial.
    pub fn transform(&self, tr: &Transform, ctx: &Ctx) -> Result<Self> {
        if self.rhs.uses(X) && tr.x.is_none() {
            return Err(Error::Unsupported("transform leaves x undefined".into()));
        }
        if self.rhs.uses(EX) && tr.ex.is_none() {
            return Err(Error::Unsupported("transform leaves exp(x) undefined".into()));
        }
        let r = self.rhs.subst_all([Some(&tr.y), Some(&tr.y1), tr.x.as_ref(), tr.ex.as_ref()], ctx)?;
        let inv = tr.y2_coeff.inv_mono(ctx).ok_or_else(|| Error::Unsupported("second-derivative factor not invertible".into()))?;
        let rhs = (&(&r - &tr.y2_rest) * &inv).map_coeffs(|c| ctx.reduce(c));
        Ok(OdeExpr { rhs, names: tr.names.clone().unwrap_or_else(|| self.names.clone()) })
    }

    /// `y = k·Y`, `x = l·X`.
    pub fn rescale(&self, k: &CoeffExpr, l: &CoeffExpr, ctx: &Ctx) -> Result<Self> {
        if self.rhs.uses(EX) {
            return Err(Error::Unsupported("cannot rescale through exp(x)".into()));
        }
        let li = ctx.invert(l).ok_or_else(|| Error::Unsupported("time scale not invertible".into()))?;
        let kl = ctx.reduce(&(k * &li));
        let kll = ctx.reduce(&(&kl * &li));
        let tr = Transform {
            y: LPoly::var(Y).scale(k),
            y1: LPoly::var(Y1).scale(&kl),
            y2_coeff: LPoly::constant(kll),
            y2_rest: LPoly::zero(),
            x: Some(LPoly::var(X).scale(l)),
            ex: None,
            names: None,
        };
        self.transform(&tr, ctx)
    }
}

impl fmt::Display for OdeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transform {
    pub y: LPoly,
    pub y1: LPoly,
    pub y2_coeff: LPoly,
    pub y2_rest: LPoly,
    pub x: Option<LPoly>,
    pub ex: Option<LPoly>,
    pub names: Option<VarNames>,
}

/// Eliminate `p` from the equations of motion of `h = A p² + B p + C`.
pub fn eliminate_p(h: &PhaseExpr) -> Result<OdeExpr> {
    if h.n() != 1 {
        return Err(Error::Dimension("momentum elimination needs a one-dimensional Hamiltonian".into()));
    }
    if h.p_degree() != 2 {
        return Err(Error::InvalidConfig("Hamiltonian is not quadratic in p".into()));
    }
    let part = |k: u32| -> Result<LPoly> {
        let mut e = PhaseExpr::zero(1);
        for (ex, c) in h.p_part(k).terms() {
            e.add_term(vec![ex[0], 0], c.clone());
        }
        LPoly::from_phase(&e)
    };
    let (a, b, c) = (part(2)?, part(1)?, part(0)?);
    let ctx = Ctx::default();
    let a2 = a.scale(&CoeffExpr::from_int(2));
    let inv = a2.inv_mono(&ctx).ok_or_else(|| Error::Unsupported("p² coefficient is not a monomial".into()))?;
    let y1 = LPoly::var(Y1);
    let p = &(&y1 - &b) * &inv;
    // p' = -∂h/∂q
    let pt = -&(&(&a.diff(Y) * &p.pow(2)) + &(&(&b.diff(Y) * &p) + &c.diff(Y)));
    let y2 = &(&(&(&a2.diff(Y) * &y1) + &a2.dx_explicit()) * &p) + &(&(&a2 * &pt) + &(&(&b.diff(Y) * &y1) + &b.dx_explicit()));
    Ok(OdeExpr::new(y2))
}

/// Solved shift coefficients and `e(t)` for `n = 1`.
pub fn one_dim_map(m: usize) -> Result<crate::canonmap::CanonicalMap> {
    if m > 2 {
        return Err(Error::InvalidConfig(format!("one-dimensional systems need m in 0..=2, got {m}")));
    }
    let sol = theorem_pde(1, m, None)?;
    build_map(1, m, sol.d, default_e(1, m))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OneDimFamily {
    Magnetic,
    Ordinary,
}

/// One-dimensional Hamiltonian of the given family; parameters stay symbolic.
pub fn build_1d(m: usize, family: OneDimFamily) -> Result<PhaseExpr> {
    let map = one_dim_map(m)?;
    match family {
        OneDimFamily::Magnetic => Ok(map.magnetic_hamiltonians()?.remove(0)),
        OneDimFamily::Ordinary => Ok(ordinary_representation(&map)?.0.remove(0)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Target {
    PI,
    PII,
    PIII,
    PIV,
}

impl std::str::FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "PI" | "P1" => Ok(Target::PI),
            "PII" | "P2" => Ok(Target::PII),
            "PIII" | "P3" => Ok(Target::PIII),
            "PIV" | "P4" => Ok(Target::PIV),
            _ => Err(Error::Parse(format!("unknown target {s}"))),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::PI => "PI",
            Target::PII => "PII",
            Target::PIII => "PIII",
            Target::PIV => "PIV",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub label: String,
    pub ode: OdeExpr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Specialization {
    pub target: Target,
    /// Scale symbol used by the rescaling, if any.
    pub scale: Option<ScaleSymbol>,
    pub stages: Vec<Stage>,
    pub result: OdeExpr,
    pub expected: OdeExpr,
    pub matches: bool,
}

fn lp(s: &[([i32; 4], &str)]) -> LPoly {
    let mut p = LPoly::zero();
    for (e, c) in s {
        p.add_term(*e, crate::coeffring::cf(c));
    }
    p
}

fn binds(v: &[(&str, &str)]) -> BTreeMap<String, CoeffExpr> {
    v.iter().map(|(k, c)| (k.to_string(), crate::coeffring::cf(c))).collect()
}

/// Canonical forms, written as `y'' = R`.
pub fn canonical_form(t: Target) -> OdeExpr {
    match t {
        Target::PI => OdeExpr::new(lp(&[([2, 0, 0, 0], "6"), ([0, 0, 1, 0], "1")])),
        Target::PII => OdeExpr::new(lp(&[([3, 0, 0, 0], "2"), ([1, 0, 1, 0], "1"), ([0, 0, 0, 0], "alpha")])),
        Target::PIV => OdeExpr::new(lp(&[
            ([-1, 2, 0, 0], "1/2"),
            ([3, 0, 0, 0], "3/2"),
            ([2, 0, 1, 0], "4"),
            ([1, 0, 2, 0], "2"),
            ([1, 0, 0, 0], "-2*alpha"),
            ([-1, 0, 0, 0], "beta"),
        ])),
        Target::PIII => OdeExpr {
            rhs: lp(&[
                ([-1, 2, 0, 0], "1"),
                ([0, 1, -1, 0], "-1"),
                ([3, 0, 0, 0], "gamma"),
                ([2, 0, -1, 0], "alpha"),
                ([0, 0, -1, 0], "beta"),
                ([-1, 0, 0, 0], "delta"),
            ]),
            names: VarNames::new("w", "tau"),
        },
    }
}

/// Parameter values of the canonical form in terms of the `a[α]`.
pub fn target_parameters(t: Target) -> BTreeMap<String, CoeffExpr> {
    match t {
        Target::PI => BTreeMap::new(),
        Target::PII => binds(&[("alpha", "alpha")]),
        // with s^4 = 2
        Target::PIV => binds(&[("alpha", "-1/2*s^2*a[1]"), ("beta", "-4*a[-1]")]),
        Target::PIII => binds(&[("alpha", "-2*a[1]"), ("beta", "4*a[-1]"), ("gamma", "2*a[2]"), ("delta", "-8*a[-2]")]),
    }
}

/// Run the derivation for `target` and compare with its canonical form.
pub fn specialize(target: Target) -> Result<Specialization> {
    let mut stages = Vec::new();
    let (m, choice, scale): (usize, BTreeMap<String, CoeffExpr>, Option<ScaleSymbol>) = match target {
        Target::PI => (0, binds(&[("a[4]", "0"), ("a[2]", "0"), ("a[1]", "0"), ("a[3]", "-1")]), Some(ScaleSymbol::new(5))),
        Target::PII => (0, binds(&[("a[4]", "1/4"), ("a[3]", "0"), ("a[2]", "0"), ("a[1]", "-alpha")]), Some(ScaleSymbol::new(2))),
        Target::PIII => (2, BTreeMap::new(), None),
        Target::PIV => (1, binds(&[("a[3]", "1"), ("a[2]", "0")]), Some(ScaleSymbol::new(4))),
    };
    let ctx = Ctx { scale: scale.clone() };
    let h = build_1d(m, OneDimFamily::Ordinary)?;
    let ode = eliminate_p(&h)?;
    stages.push(Stage { label: format!("momentum eliminated (m = {m})"), ode: ode.clone() });
    let mut ode = ode.subst_params(&choice, &ctx);
    if !choice.is_empty() {
        stages.push(Stage { label: "parameters specialized".into(), ode: ode.clone() });
    }
    let s = |k: i32| scale.as_ref().expect("targets with a rescaling carry a scale").pow(k);
    match target {
        Target::PI => {
            ode = ode.rescale(&s(3), &s(1), &ctx)?;
        }
        Target::PII => {
            ode = ode.rescale(&s(1), &CoeffExpr::one(), &ctx)?;
            stages.push(Stage { label: "rescaled".into(), ode: ode.clone() });
            ode = ode.subst_params(&binds(&[("alpha", "s*alpha")]), &ctx);
        }
        Target::PIV => {
            ode = ode.rescale(&(-&s(-3)), &s(1), &ctx)?;
        }
        Target::PIII => {
            // exp(t) becomes the new time t'
            let tp = LPoly::var(X);
            let pass1 = Transform {
                y: LPoly::var(Y),
                y1: &tp * &LPoly::var(Y1),
                y2_coeff: tp.pow(2),
                y2_rest: &tp * &LPoly::var(Y1),
                x: None,
                ex: Some(tp.clone()),
                names: Some(VarNames::new("q", "t'")),
            };
            ode = ode.transform(&pass1, &ctx)?;
            stages.push(Stage { label: "t' = exp(t)".into(), ode: ode.clone() });
            // t' = tau^2/2, q = w/tau
            let tau = |k: i32| LPoly::var_pow(X, k);
            let w = LPoly::var(Y);
            let w1 = LPoly::var(Y1);
            let pass2 = Transform {
                y: &w * &tau(-1),
                y1: &(&w1 * &tau(-2)) - &(&w * &tau(-3)),
                y2_coeff: tau(-3),
                y2_rest: &(&w * &tau(-5)).scale(&CoeffExpr::from_int(3)) - &(&w1 * &tau(-4)).scale(&CoeffExpr::from_int(3)),
                x: Some(tau(2).scale(&crate::coeffring::cf("1/2"))),
                ex: None,
                names: Some(VarNames::new("w", "tau")),
            };
            ode = ode.transform(&pass2, &ctx)?;
        }
    }
    stages.push(Stage { label: "normal form".into(), ode: ode.clone() });
    let expected = {
        let c = canonical_form(target);
        OdeExpr { rhs: c.rhs.subst_params(&target_parameters(target)).map_coeffs(|x| ctx.reduce(x)), names: c.names }
    };
    let matches = expected.rhs == ode.rhs;
    Ok(Specialization { target, scale, stages, result: ode, expected, matches })
}

/// Does the specialized ordinary system have a magnetic partner?
pub fn magnetic_rep_check(target: Target) -> Result<Verdict> {
    let (m, a): (usize, &[(i64, &str)]) = match target {
        Target::PI => (0, &[(4, "0"), (3, "-1"), (2, "0"), (1, "0")]),
        Target::PII => (0, &[(4, "1/4"), (3, "0"), (2, "0"), (1, "-alpha")]),
        Target::PIV => (1, &[(3, "1"), (2, "0"), (1, "a[1]"), (-1, "a[-1]")]),
        // b[0]·b[1] = a[-1] needs 1/sqrt(2a[-2]) for symbolic a[-2]
        Target::PIII => return Err(Error::Unsupported("magnetic check for PIII needs symbolic radical inverses".into())),
    };
    let target: BTreeMap<i64, CoeffExpr> = a.iter().map(|(k, v)| (*k, crate::coeffring::cf(v))).collect();
    obstruction(1, m, &target)
}
