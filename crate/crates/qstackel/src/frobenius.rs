//! Frobenius-integrable deformations.
//!
//! The deformed Hamiltonians are `H_r = Σ_j ζ_{r,j}(t) h_j` with `ζ_{r,r} = 1`,
//! `h_j = 𝓔_j + Σ_α c_α(t) P_{α,j}`. The ζ-functions come from the geodesic
//! subsystem; the coefficient functions are then found by matching
//! `(q,p)`-monomials in `∂_s H_r − ∂_r H_s + {H_r, H_s}` and integrating the
//! resulting gradient systems one unknown at a time.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use num_traits::One;

use crate::coeffring::{q_int, CoeffExpr};
use crate::error::{Error, Result};
use crate::phasepoly::{pb, ExprJson, PhaseExpr};
use crate::stackelgen::{ecal, family_term, index_sets, structure_constants, Family, SystemSpec};

/// Rows deformed by the lower-triangular ansatz (increasing) and by the
/// upper-triangular ansatz (decreasing).
pub fn deformed_rows(n: usize, m: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let ix = index_sets(n, m)?;
    let top_b = (n as i64 - m as i64 + 1).min(n as i64);
    let lower: Vec<usize> = ((ix.kappa1 as i64 + 1)..=top_b).map(|r| r as usize).collect();
    let low_c = n as i64 - m as i64 + 2;
    let upper: Vec<usize> = (low_c..=(n as i64 - ix.kappa2 as i64)).rev().map(|r| r as usize).collect();
    Ok((lower, upper))
}

pub type Matrix = Vec<Vec<CoeffExpr>>;

/// Solve for the ζ-functions of the geodesic deformation, with zero
/// integration constants.
pub fn zeta_solve(n: usize, m: usize) -> Result<Matrix> {
    let (lower, upper) = deformed_rows(n, m)?;
    let mut c = vec![vec![Vec::<(usize, i64)>::new(); n]; n];
    for i in 1..=n {
        for j in 1..=n {
            c[i - 1][j - 1] = structure_constants(n, m, i, j)?;
        }
    }
    let mut z: Matrix =
        (0..n).map(|i| (0..n).map(|j| if i == j { CoeffExpr::one() } else { CoeffExpr::zero() }).collect()).collect();
    let rows: Vec<(usize, bool)> =
        lower.iter().map(|r| (*r, true)).chain(upper.iter().map(|r| (*r, false))).collect();
    for (r, is_lower) in rows {
        let (svars, ks): (Vec<usize>, Vec<usize>) = if is_lower {
            ((1..r).collect(), (1..r).rev().collect())
        } else {
            ((r + 1..=n).collect(), (r + 1..=n).collect())
        };
        for k in ks {
            let grads: Vec<CoeffExpr> = svars
                .iter()
                .map(|&s| {
                    let mut g = CoeffExpr::zero();
                    for i in 0..n {
                        if z[s - 1][i].is_zero() {
                            continue;
                        }
                        for j in 0..n {
                            if z[r - 1][j].is_zero() {
                                continue;
                            }
                            for (kk, cc) in &c[i][j] {
                                if *kk == k {
                                    g += &(&z[s - 1][i] * &z[r - 1][j]).scale(&q_int(*cc));
                                }
                            }
                        }
                    }
                    g
                })
                .collect();
            let f = integrate_gradient(&svars, &grads)?;
            z[r - 1][k - 1] = f;
        }
    }
    Ok(z)
}

/// Potential `f` with `∂f/∂t_{vars[i]} = grads[i]`, zero constants.
pub fn integrate_gradient(vars: &[usize], grads: &[CoeffExpr]) -> Result<CoeffExpr> {
    let mut f = CoeffExpr::zero();
    for (s, g) in vars.iter().zip(grads) {
        let res = g - &f.diff(*s);
        f += &res.integrate(*s);
    }
    for (s, g) in vars.iter().zip(grads) {
        if f.diff(*s) != *g {
            return Err(Error::Inconsistent(format!("gradient system not closed in t_{s}")));
        }
    }
    Ok(f)
}

/// Deformation ansatz with unknown ζ- and coefficient-function symbols.
#[derive(Clone, Debug)]
pub struct Ansatz {
    pub spec: SystemSpec,
    pub h: Vec<PhaseExpr>,
    pub unknowns: Vec<String>,
}

pub fn zeta_symbol(r: usize, j: usize) -> String {
    format!("z{r}_{j}")
}

pub fn coeff_symbol(spec: &SystemSpec, alpha: i64) -> String {
    let base = if spec.family == Family::Magnetic { "d" } else { "c" };
    format!("{base}[{alpha}]")
}

pub fn build_ansatz(spec: &SystemSpec) -> Result<Ansatz> {
    spec.validate()?;
    let (n, m) = (spec.n, spec.m);
    let (lower, upper) = deformed_rows(n, m)?;
    let mut unknowns = Vec::new();
    let mut coeffs = BTreeMap::new();
    for a in &spec.exponents {
        let name = coeff_symbol(spec, *a);
        coeffs.insert(*a, CoeffExpr::param(&name));
        unknowns.push(name);
    }
    let base = crate::stackelgen::assemble(spec, &coeffs)?;
    let mut h = base.clone();
    for r in lower.iter().chain(upper.iter()) {
        let others: Vec<usize> = if lower.contains(r) { (1..*r).collect() } else { (r + 1..=n).collect() };
        for j in others {
            let name = zeta_symbol(*r, j);
            h[r - 1] += &base[j - 1].scale(&CoeffExpr::param(&name));
            unknowns.push(name);
        }
    }
    Ok(Ansatz { spec: spec.clone(), h, unknowns })
}

/// Choice of the non-dynamical tail functions `c_0..c_{n-1}`.
#[derive(Clone, Debug, PartialEq)]
pub enum Gauge {
    /// All free tail functions set to zero.
    Zero,
    /// Tails chosen so that every residual vanishes identically.
    Solve,
    /// Tails given explicitly per exponent.
    Explicit(BTreeMap<i64, CoeffExpr>),
}

impl Gauge {
    pub fn name(&self) -> &'static str {
        match self {
            Gauge::Zero => "zero",
            Gauge::Solve => "solve",
            Gauge::Explicit(_) => "explicit",
        }
    }
}

/// Named tail choices. Returns `(n, m, parameter bindings, tails)`.
pub fn gauge_preset(name: &str) -> Option<GaugePreset> {
    let cf = crate::coeffring::cf;
    let mk = |n, m, bind: &[(&str, &str)], tails: &[(i64, &str)]| GaugePreset {
        n,
        m,
        bindings: bind.iter().map(|(k, v)| (k.to_string(), cf(v))).collect(),
        tails: tails.iter().map(|(a, v)| (*a, cf(v))).collect(),
    };
    match name {
        // three-dimensional example with only the top constant kept
        "cubic-top" => Some(mk(
            3,
            1,
            &[],
            &[(0, "0"), (1, "a[5]*(t3^3 - 2*t2*t3 - 4*t1)*t3"), (2, "4*a[5]*(t3^3 - t1)")],
        )),
        // Hénon–Heiles tails, first choice
        "hh-a" => Some(mk(2, 1, &[("a[0]", "0"), ("a[1]", "0")], &[(0, "1/2*t1^2 + 3*t1*t2^2"), (1, "0")])),
        // Hénon–Heiles tails, second choice
        "hh-b" => Some(mk(2, 1, &[("a[0]", "1"), ("a[1]", "1")], &[(0, "1/2*t1^2"), (1, "-t2^3")])),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaugePreset {
    pub n: usize,
    pub m: usize,
    pub bindings: BTreeMap<String, CoeffExpr>,
    pub tails: BTreeMap<i64, CoeffExpr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    /// Integration constants kept symbolic; `None` keeps all of them.
    pub free: Option<Vec<String>>,
    pub gauge: Gauge,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { free: None, gauge: Gauge::Zero }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeformedSystem {
    pub spec: SystemSpec,
    pub h: Vec<PhaseExpr>,
    pub zeta: Matrix,
    /// `c_α(t)` or `d_γ(t)`, including any tail functions.
    pub coeff_fns: BTreeMap<i64, CoeffExpr>,
    pub gauge: String,
    /// Exponents whose functions are left undetermined by the dynamics.
    pub underdetermined: Vec<i64>,
    /// Order in which the dynamical coefficient functions were solved.
    pub solve_order: Vec<i64>,
}

impl DeformedSystem {
    /// Assemble `H_r = Σ_j ζ_{r,j} h_j` from solved data.
    pub fn from_parts(spec: &SystemSpec, zeta: Matrix, coeff_fns: BTreeMap<i64, CoeffExpr>) -> Result<Self> {
        let base = crate::stackelgen::assemble(spec, &coeff_fns)?;
        let h = combine(&zeta, &base);
        Ok(DeformedSystem {
            spec: spec.clone(),
            h,
            zeta,
            coeff_fns,
            gauge: "explicit".into(),
            underdetermined: spec.trivial_exponents(),
            solve_order: vec![],
        })
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    /// Phase-independent additive part of each `H_r`.
    pub fn tails(&self) -> Vec<CoeffExpr> {
        self.h.iter().map(|h| h.phase_free()).collect()
    }

    pub fn subst_params(&self, map: &BTreeMap<String, CoeffExpr>) -> Self {
        let mut out = self.clone();
        out.h = self.h.iter().map(|h| h.subst_params(map)).collect();
        out.coeff_fns = self.coeff_fns.iter().map(|(a, c)| (*a, c.subst_params(map))).collect();
        out
    }

    pub fn params(&self) -> Vec<String> {
        let mut v: Vec<String> = self.h.iter().flat_map(|h| h.params()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn to_file(&self) -> SystemFile {
        SystemFile {
            format: SYSTEM_FORMAT.into(),
            spec: self.spec.clone(),
            gauge: self.gauge.clone(),
            zeta: self.zeta.iter().map(|row| row.iter().map(|c| c.to_string()).collect()).collect(),
            coefficients: self.coeff_fns.iter().map(|(a, c)| (a.to_string(), c.to_string())).collect(),
            hamiltonians: self.h.iter().map(|h| h.to_json()).collect(),
        }
    }

    pub fn from_file(f: &SystemFile) -> Result<Self> {
        if f.format != SYSTEM_FORMAT {
            return Err(Error::InvalidConfig(format!("unknown system format {}", f.format)));
        }
        f.spec.validate()?;
        let n = f.spec.n;
        let h: Vec<PhaseExpr> = f.hamiltonians.iter().map(PhaseExpr::from_json).collect::<Result<_>>()?;
        if h.len() != n || h.iter().any(|x| x.n() != n) {
            return Err(Error::Dimension(format!("expected {n} Hamiltonians over n = {n}")));
        }
        let zeta: Matrix = f
            .zeta
            .iter()
            .map(|row| row.iter().map(|s| s.parse()).collect::<Result<Vec<CoeffExpr>>>())
            .collect::<Result<_>>()?;
        let mut coeff_fns = BTreeMap::new();
        for (a, c) in &f.coefficients {
            let a: i64 = a.parse().map_err(|_| Error::Parse(format!("bad exponent {a}")))?;
            coeff_fns.insert(a, c.parse()?);
        }
        Ok(DeformedSystem {
            spec: f.spec.clone(),
            h,
            zeta,
            coeff_fns,
            gauge: f.gauge.clone(),
            underdetermined: f.spec.trivial_exponents(),
            solve_order: vec![],
        })
    }
}

pub const SYSTEM_FORMAT: &str = "qstackel.system/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub format: String,
    pub spec: SystemSpec,
    pub gauge: String,
    pub zeta: Vec<Vec<String>>,
    pub coefficients: BTreeMap<String, String>,
    pub hamiltonians: Vec<ExprJson>,
}

pub fn combine(zeta: &Matrix, base: &[PhaseExpr]) -> Vec<PhaseExpr> {
    let n = base.len();
    (0..n)
        .map(|r| {
            let mut h = PhaseExpr::zero(base[0].n());
            for j in 0..n {
                if !zeta[r][j].is_zero() {
                    h += &base[j].scale(&zeta[r][j]);
                }
            }
            h
        })
        .collect()
}

/// `∂H_r/∂t_s − ∂H_s/∂t_r + {H_r, H_s}`.
pub fn residual_of(h: &[PhaseExpr], r: usize, s: usize) -> PhaseExpr {
    &(&h[r - 1].diff_t(s) - &h[s - 1].diff_t(r)) + &pb(&h[r - 1], &h[s - 1])
}

pub fn residual(sys: &DeformedSystem, r: usize, s: usize) -> PhaseExpr {
    residual_of(&sys.h, r, s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairResidual {
    pub r: usize,
    pub s: usize,
    pub residual: PhaseExpr,
    pub phase_independent: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub pairs: Vec<PairResidual>,
    /// Tails exist that make every residual vanish.
    pub gauge_closable: bool,
}

impl ResidualReport {
    pub fn phase_independent(&self) -> bool {
        self.pairs.iter().all(|p| p.phase_independent)
    }

    pub fn exact_zero(&self) -> bool {
        self.pairs.iter().all(|p| p.residual.is_zero())
    }

    pub fn passes(&self) -> bool {
        self.phase_independent() && self.gauge_closable
    }

    pub fn first_failure(&self) -> Option<&PairResidual> {
        self.pairs.iter().find(|p| !p.phase_independent)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "pass": self.passes(),
            "exact_zero": self.exact_zero(),
            "pairs": self.pairs.iter().map(|p| serde_json::json!({
                "r": p.r,
                "s": p.s,
                "phase_independent": p.phase_independent,
                "zero": p.residual.is_zero(),
                "residual": p.residual.to_string(),
            })).collect::<Vec<_>>(),
        })
    }
}

pub fn certify_hamiltonians(h: &[PhaseExpr]) -> ResidualReport {
    let n = h.len();
    let idx: Vec<(usize, usize)> = (1..=n).flat_map(|r| (r + 1..=n).map(move |s| (r, s))).collect();
    let pairs: Vec<PairResidual> = idx
        .par_iter()
        .map(|&(r, s)| {
            let residual = residual_of(h, r, s);
            let phase_independent = residual.is_phase_independent();
            PairResidual { r, s, residual, phase_independent }
        })
        .collect();
    let gauge_closable = pairs.iter().all(|p| p.phase_independent) && {
        let f: BTreeMap<(usize, usize), CoeffExpr> =
            pairs.iter().map(|p| ((p.r, p.s), p.residual.phase_free())).collect();
        solve_tails(n, &f).is_ok()
    };
    ResidualReport { pairs, gauge_closable }
}

pub fn certify(sys: &DeformedSystem) -> ResidualReport {
    certify_hamiltonians(&sys.h)
}

/// Phase-free corrections `T_r` with `∂_s T_r − ∂_r T_s = −f_rs` for all
/// `r < s`, built axis by axis with zero integration constants.
pub fn solve_tails(n: usize, f: &BTreeMap<(usize, usize), CoeffExpr>) -> Result<Vec<CoeffExpr>> {
    let get = |r: usize, s: usize| f.get(&(r, s)).cloned().unwrap_or_default();
    let mut g: BTreeMap<(usize, usize), CoeffExpr> = BTreeMap::new();
    for r in 1..=n {
        for s in r + 1..=n {
            g.insert((r, s), -get(r, s));
        }
    }
    let mut t = vec![CoeffExpr::zero(); n];
    for k in 1..=n {
        let ints: BTreeMap<usize, CoeffExpr> = (k + 1..=n).map(|s| (s, g[&(k, s)].integrate(k))).collect();
        for (s, i) in &ints {
            t[s - 1] -= i;
        }
        for r in k + 1..=n {
            for s in r + 1..=n {
                let upd = &ints[&r].diff(s) - &ints[&s].diff(r);
                let e = g.get_mut(&(r, s)).unwrap();
                *e += &upd;
                if e.depends_on_t(k) {
                    return Err(Error::Inconsistent(format!(
                        "residual functions are not closed; ({r},{s}) still depends on t_{k}"
                    )));
                }
            }
        }
    }
    for r in 1..=n {
        for s in r + 1..=n {
            let lhs = &t[r - 1].diff(s) - &t[s - 1].diff(r);
            if lhs != -get(r, s) {
                return Err(Error::Inconsistent(format!("tail equation ({r},{s}) not satisfiable")));
            }
        }
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Linear PDE extraction

/// Jet of an unknown: `(α, 0)` is the value, `(α, s)` its `t_s` derivative.
type Jet = (i64, usize);

fn jet_name(j: Jet) -> String {
    if j.1 == 0 {
        format!("%C{}", j.0)
    } else {
        format!("%D{}_{}", j.0, j.1)
    }
}

fn parse_jet(name: &str) -> Option<Jet> {
    if let Some(rest) = name.strip_prefix("%C") {
        return Some((rest.parse().ok()?, 0));
    }
    let rest = name.strip_prefix("%D")?;
    let (a, s) = rest.split_once('_')?;
    Some((a.parse().ok()?, s.parse().ok()?))
}

#[derive(Clone, Debug, Default)]
struct Lin {
    jets: BTreeMap<Jet, CoeffExpr>,
    rest: CoeffExpr,
}

impl Lin {
    fn from_coeff(c: &CoeffExpr) -> Result<Lin> {
        let mut out = Lin::default();
        for (m, v) in c.terms() {
            let mut jet = None;
            let mut params = Vec::new();
            for (p, e) in &m.params {
                match parse_jet(p) {
                    Some(j) => {
                        if jet.is_some() || *e != 1 {
                            return Err(Error::Inconsistent("residual is not linear in the unknowns".into()));
                        }
                        jet = Some(j);
                    }
                    None => params.push((p.clone(), *e)),
                }
            }
            let mono = crate::coeffring::CMono { params, ..m.clone() };
            match jet {
                Some(j) => out.jets.entry(j).or_default().add_term(mono, v.clone()),
                None => out.rest.add_term(mono, v.clone()),
            }
        }
        out.jets.retain(|_, c| !c.is_zero());
        Ok(out)
    }

    fn substitute(&mut self, u: i64, val: &CoeffExpr, ders: &[CoeffExpr]) {
        let keys: Vec<Jet> = self.jets.keys().filter(|j| j.0 == u).copied().collect();
        for k in keys {
            let coef = self.jets.remove(&k).unwrap();
            let v = if k.1 == 0 { val } else { &ders[k.1 - 1] };
            self.rest += &(&coef * v);
        }
    }

    fn is_zero(&self) -> bool {
        self.jets.is_empty() && self.rest.is_zero()
    }
}

struct Row {
    d: Vec<CoeffExpr>,
    c: CoeffExpr,
    rest: CoeffExpr,
}

impl Row {
    fn axpy(&mut self, k: &CoeffExpr, o: &Row) {
        for (a, b) in self.d.iter_mut().zip(&o.d) {
            *a -= &(k * b);
        }
        self.c -= &(k * &o.c);
        self.rest -= &(k * &o.rest);
    }

    fn scale(&mut self, k: &CoeffExpr) {
        for a in self.d.iter_mut() {
            *a = &*a * k;
        }
        self.c = &self.c * k;
        self.rest = &self.rest * k;
    }
}

/// Try to determine all derivatives of unknown `u` from rows touching only `u`.
/// Returns `(k_s, K_s)` with `∂_s C_u = k_s C_u + K_s`.
fn gradient_for(n: usize, u: i64, eqs: &[Lin]) -> Option<Vec<(i64, CoeffExpr)>> {
    let mut rows: Vec<Row> = eqs
        .iter()
        .filter(|e| !e.jets.is_empty() && e.jets.keys().all(|j| j.0 == u))
        .map(|e| Row {
            d: (1..=n).map(|s| e.jets.get(&(u, s)).cloned().unwrap_or_default()).collect(),
            c: e.jets.get(&(u, 0)).cloned().unwrap_or_default(),
            rest: e.rest.clone(),
        })
        .collect();
    if rows.is_empty() {
        return None;
    }
    let mut pivot_of = vec![usize::MAX; n];
    let mut used = vec![false; rows.len()];
    for col in 0..n {
        let found = (0..rows.len()).find(|&i| !used[i] && rows[i].d[col].inv_unit().is_some());
        let Some(i) = found else { continue };
        let inv = rows[i].d[col].inv_unit().unwrap();
        rows[i].scale(&inv);
        used[i] = true;
        pivot_of[col] = i;
        let (piv_d, piv_c, piv_rest) = (rows[i].d.clone(), rows[i].c.clone(), rows[i].rest.clone());
        let piv = Row { d: piv_d, c: piv_c, rest: piv_rest };
        for (k, row) in rows.iter_mut().enumerate() {
            if k == i || row.d[col].is_zero() {
                continue;
            }
            let f = row.d[col].clone();
            row.axpy(&f, &piv);
        }
    }
    if pivot_of.iter().any(|p| *p == usize::MAX) {
        return None;
    }
    for (i, row) in rows.iter().enumerate() {
        if !used[i] && !(row.c.is_zero() && row.rest.is_zero()) {
            return None;
        }
    }
    let mut out = Vec::with_capacity(n);
    for col in 0..n {
        let row = &rows[pivot_of[col]];
        let k = (-&row.c).as_q()?;
        if !k.denom().is_one() {
            return None;
        }
        out.push((k.numer().try_into().ok()?, -&row.rest));
    }
    Some(out)
}

/// Integrate `∂_s C = k_s C + K_s` to `C = e^{Σ k_s t_s}(a + Φ)`.
pub fn integrate_linear(n: usize, grad: &[(i64, CoeffExpr)], constant: CoeffExpr) -> Result<CoeffExpr> {
    let mut e_minus = CoeffExpr::one();
    let mut e_plus = CoeffExpr::one();
    for (s, (k, _)) in grad.iter().enumerate() {
        if *k != 0 {
            let k32 = i32::try_from(*k).map_err(|_| Error::Unsupported("exponent too large".into()))?;
            e_minus = &e_minus * &CoeffExpr::exp(s + 1, -k32);
            e_plus = &e_plus * &CoeffExpr::exp(s + 1, k32);
        }
    }
    let vars: Vec<usize> = (1..=n).collect();
    let grads: Vec<CoeffExpr> = grad.iter().map(|(_, kk)| &e_minus * kk).collect();
    let phi = integrate_gradient(&vars, &grads)?;
    Ok(&e_plus * &(&constant + &phi))
}

/// Default name of the integration constant of exponent `α`.
pub fn constant_symbol(spec: &SystemSpec, alpha: i64) -> String {
    format!("{}[{}]", spec.param_prefix(), alpha)
}

/// Solve the deformation of `spec`: ζ-functions first, then all dynamical
/// coefficient functions, then tails according to the gauge.
pub fn solve_deformation(spec: &SystemSpec, opts: &SolveOptions) -> Result<DeformedSystem> {
    spec.validate()?;
    let (n, m) = (spec.n, spec.m);
    let zeta = zeta_solve(n, m)?;
    let trivial = spec.trivial_exponents();
    let dynamic: Vec<i64> = spec.exponents.iter().copied().filter(|a| !trivial.contains(a)).collect();

    let constant_for = |a: i64| -> CoeffExpr {
        let name = constant_symbol(spec, a);
        match &opts.free {
            Some(list) if !list.contains(&name) => CoeffExpr::zero(),
            _ => CoeffExpr::param(&name),
        }
    };

    let mut coeff_fns: BTreeMap<i64, CoeffExpr> = BTreeMap::new();
    let mut order = Vec::new();
    let mut tail_eqs: BTreeMap<(usize, usize), Lin> = BTreeMap::new();

    if n == 1 {
        for a in &dynamic {
            coeff_fns.insert(*a, constant_for(*a));
            order.push(*a);
        }
    } else {
        let terms: BTreeMap<i64, Vec<PhaseExpr>> =
            dynamic.iter().map(|a| (*a, (1..=n).map(|r| family_term(spec, *a, r)).collect())).collect();
        let ecals: Vec<PhaseExpr> = (1..=n).map(|r| ecal(n, m, r as i64)).collect::<Result<_>>()?;
        let base: Vec<PhaseExpr> = (0..n)
            .map(|j| {
                let mut h = ecals[j].clone();
                for (a, t) in &terms {
                    h += &t[j].scale(&CoeffExpr::param(&jet_name((*a, 0))));
                }
                h
            })
            .collect();
        let dbase = |s: usize| -> Vec<PhaseExpr> {
            (0..n)
                .map(|j| {
                    let mut h = PhaseExpr::zero(n);
                    for (a, t) in &terms {
                        h += &t[j].scale(&CoeffExpr::param(&jet_name((*a, s))));
                    }
                    h
                })
                .collect()
        };
        let h = combine(&zeta, &base);
        let dbases: Vec<Vec<PhaseExpr>> = (1..=n).map(dbase).collect();
        let dh = |r: usize, s: usize| -> PhaseExpr {
            let mut out = PhaseExpr::zero(n);
            for j in 0..n {
                let z = &zeta[r - 1][j];
                if z.is_zero() {
                    continue;
                }
                let dz = z.diff(s);
                if !dz.is_zero() {
                    out += &base[j].scale(&dz);
                }
                out += &dbases[s - 1][j].scale(z);
            }
            out
        };
        let pairs: Vec<(usize, usize)> = (1..=n).flat_map(|r| (r + 1..=n).map(move |s| (r, s))).collect();
        let residuals: Vec<((usize, usize), PhaseExpr)> = pairs
            .par_iter()
            .map(|&(r, s)| ((r, s), &(&dh(r, s) - &dh(s, r)) + &pb(&h[r - 1], &h[s - 1])))
            .collect();
        let zero_mono = vec![0; 2 * n];
        let mut eqs: Vec<Lin> = Vec::new();
        for ((r, s), res) in &residuals {
            for (e, c) in res.terms() {
                let lin = Lin::from_coeff(c)?;
                if *e == zero_mono {
                    tail_eqs.insert((*r, *s), lin);
                } else if !lin.is_zero() {
                    eqs.push(lin);
                }
            }
        }

        let mut pending: Vec<i64> = dynamic.iter().rev().copied().collect();
        while !pending.is_empty() {
            let mut progressed = false;
            for u in pending.clone() {
                let Some(grad) = gradient_for(n, u, &eqs) else { continue };
                let f = integrate_linear(n, &grad, constant_for(u))?;
                let ders: Vec<CoeffExpr> = (1..=n).map(|s| f.diff(s)).collect();
                for e in eqs.iter_mut() {
                    e.substitute(u, &f, &ders);
                }
                for e in tail_eqs.values_mut() {
                    e.substitute(u, &f, &ders);
                }
                eqs.retain(|e| !e.is_zero());
                coeff_fns.insert(u, f);
                order.push(u);
                pending.retain(|x| *x != u);
                progressed = true;
            }
            if !progressed {
                // unknowns that never enter a dynamical equation are constants
                let untouched: Vec<i64> =
                    pending.iter().copied().filter(|u| !eqs.iter().any(|e| e.jets.keys().any(|j| j.0 == *u))).collect();
                if untouched.is_empty() {
                    return Err(Error::Inconsistent(format!(
                        "cannot determine coefficient functions for exponents {pending:?}"
                    )));
                }
                for u in untouched {
                    let f = constant_for(u);
                    let ders = vec![CoeffExpr::zero(); n];
                    for e in tail_eqs.values_mut() {
                        e.substitute(u, &f, &ders);
                    }
                    coeff_fns.insert(u, f);
                    order.push(u);
                    pending.retain(|x| *x != u);
                }
            }
        }
        if let Some(e) = eqs.iter().find(|e| !e.is_zero()) {
            return Err(Error::Inconsistent(format!("unsatisfied equation: {}", e.rest)));
        }
    }

    // tails
    let f: BTreeMap<(usize, usize), CoeffExpr> = tail_eqs.into_iter().map(|(k, v)| (k, v.rest)).collect();
    match &opts.gauge {
        Gauge::Zero => {
            for a in &trivial {
                coeff_fns.insert(*a, CoeffExpr::zero());
            }
        }
        Gauge::Explicit(map) => {
            for a in &trivial {
                coeff_fns.insert(*a, map.get(a).cloned().unwrap_or_default());
            }
        }
        Gauge::Solve => {
            let t = solve_tails(n, &f)?;
            let tails = tails_to_coefficients(spec, &zeta, &t)?;
            coeff_fns.extend(tails);
        }
    }
    let mut sys = DeformedSystem::from_parts(spec, zeta, coeff_fns)?;
    sys.gauge = opts.gauge.name().into();
    sys.solve_order = order;
    Ok(sys)
}

/// Convert additive tails `T_r = −Σ_j ζ_{r,j} c_{n−j}` into the trivial
/// coefficient functions, solving rows in triangular order.
pub fn tails_to_coefficients(spec: &SystemSpec, zeta: &Matrix, t: &[CoeffExpr]) -> Result<BTreeMap<i64, CoeffExpr>> {
    let n = spec.n;
    let trivial = spec.trivial_exponents();
    let (lower, upper) = deformed_rows(n, spec.m)?;
    let deformed: BTreeSet<usize> = lower.iter().chain(upper.iter()).copied().collect();
    let order: Vec<usize> =
        (1..=n).filter(|r| !deformed.contains(r)).chain(lower.iter().copied()).chain(upper.iter().copied()).collect();
    let mut c: BTreeMap<i64, CoeffExpr> = BTreeMap::new();
    for r in order {
        let alpha = n as i64 - r as i64;
        let mut val = -&t[r - 1];
        for j in 1..=n {
            if j == r || zeta[r - 1][j - 1].is_zero() {
                continue;
            }
            let cj = c.get(&(n as i64 - j as i64)).cloned().unwrap_or_default();
            val -= &(&zeta[r - 1][j - 1] * &cj);
        }
        if !trivial.contains(&alpha) {
            if !val.is_zero() {
                return Err(Error::Inconsistent(format!(
                    "tail of H_{r} needs exponent {alpha}, which is not in the exponent set"
                )));
            }
            continue;
        }
        c.insert(alpha, val);
    }
    Ok(c)
}
