//! Time-dependent momentum shifts relating magnetic and ordinary deformations.
//!
//! The shift `p = p' + Σ_γ d_γ(t) V_1^(n−m−i+γ)` carries a magnetic system
//! with coefficients `d_γ, e` to an ordinary one whose coefficients are read
//! off from `½λ^m (Σ d_γ λ^{γ−m})² + e λ^n`. Only `∂F/∂t_r` of the generating
//! function is ever built.

use std::collections::BTreeMap;

use crate::coeffring::{q_int, q_sqrt, CMono, CoeffExpr, Q};
use crate::error::{Error, Result};
use crate::frobenius::{
    combine, deformed_rows, integrate_linear, solve_deformation, zeta_solve, DeformedSystem, Matrix, SolveOptions,
};
use crate::phasepoly::PhaseExpr;
use crate::stackelgen::{
    assemble, ecal, index_sets, potential_v_component, quasi_w, Family, SystemSpec,
};

/// Power sum `Z_k = Σ λ_i^k` in Viète coordinates; Laurent in `q_n` for `k < 0`.
pub fn power_sum(n: usize, k: i64) -> PhaseExpr {
    if k == 0 {
        return PhaseExpr::constant(n, CoeffExpr::from_int(n as i64));
    }
    // coefficients of the monic polynomial whose roots are λ (k > 0) or 1/λ (k < 0)
    let coef: Vec<PhaseExpr> = if k > 0 {
        (0..=n).map(|j| PhaseExpr::q(n, j as i64)).collect()
    } else {
        let inv = PhaseExpr::qn_pow(n, -1);
        (0..=n).map(|j| &PhaseExpr::q(n, (n - j) as i64) * &inv).collect()
    };
    let kk = k.unsigned_abs() as usize;
    let mut z: Vec<PhaseExpr> = vec![PhaseExpr::constant(n, CoeffExpr::from_int(n as i64))];
    for s in 1..=kk {
        let mut acc = PhaseExpr::zero(n);
        for j in 1..=(s - 1).min(n) {
            acc -= &(&coef[j] * &z[s - j]);
        }
        if s <= n {
            acc -= &coef[s].scale_q(&q_int(s as i64));
        }
        z.push(acc);
    }
    z.pop().unwrap()
}

/// `𝓩_r` built from the shift coefficients `d_0..d_{n+1}`.
pub fn zcal(n: usize, m: usize, d: &[CoeffExpr], r: usize) -> Result<PhaseExpr> {
    let ix = index_sets(n, m)?;
    let dd = |i: i64| -> CoeffExpr { usize::try_from(i).ok().and_then(|i| d.get(i).cloned()).unwrap_or_default() };
    let (n_, r_) = (n as i64, r as i64);
    let mut out = PhaseExpr::zero(n);
    if r == 1 {
        out = power_sum(n, 1).scale(&dd(n_ + 1));
    } else if ix.in_first(r) {
        for k in 1..=r_ {
            out += &power_sum(n, k).scale(&dd(n_ - r_ + 1 + k));
        }
    } else if ix.in_second(r) {
        for k in 1..=(n_ - r_ + 1) {
            out -= &power_sum(n, -k).scale(&dd(n_ - r_ + 1 - k));
        }
    }
    Ok(out)
}

/// Shift function `e(t)`: `b̄` for `m ≤ n`, `b̄·exp(t_1)` for `m = n+1`.
pub fn default_e(n: usize, m: usize) -> CoeffExpr {
    let b = CoeffExpr::param("bbar");
    if m == n + 1 {
        &b * &CoeffExpr::exp(1, 1)
    } else {
        b
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalMap {
    pub n: usize,
    pub m: usize,
    pub d: Vec<CoeffExpr>,
    pub e: CoeffExpr,
    pub zeta: Matrix,
    /// `p_i − p'_i`.
    pub shift: Vec<PhaseExpr>,
    /// `∂F/∂t_r`.
    pub df: Vec<PhaseExpr>,
    /// `c'_α` for `α = −m..2n−m+2`.
    pub cprime: BTreeMap<i64, CoeffExpr>,
    pub b_params: Vec<String>,
}

impl CanonicalMap {
    pub fn dd(&self, i: i64) -> CoeffExpr {
        usize::try_from(i).ok().and_then(|i| self.d.get(i).cloned()).unwrap_or_default()
    }

    /// `c'_α` with the top correction `c_n = c'_n − d_{n+1}` applied.
    pub fn effective_c(&self, alpha: i64) -> CoeffExpr {
        let mut c = self.cprime.get(&alpha).cloned().unwrap_or_default();
        if alpha == self.n as i64 {
            c -= &self.dd(self.n as i64 + 1);
        }
        c
    }

    /// `∂F/∂t_r` from the generating function directly.
    pub fn df_direct(&self, r: usize) -> PhaseExpr {
        let mut out = PhaseExpr::zero(self.n);
        for (g, dg) in self.d.iter().enumerate() {
            let k = g as i64 - self.m as i64 + 1;
            let dr = dg.diff(r);
            if k == 0 || dr.is_zero() {
                continue;
            }
            out += &power_sum(self.n, k).scale(&dr.scale(&Q::new(1.into(), k.into())));
        }
        out
    }

    /// Magnetic Hamiltonians `H_r^B`.
    pub fn magnetic_hamiltonians(&self) -> Result<Vec<PhaseExpr>> {
        let (n, m) = (self.n, self.m);
        let spec = SystemSpec::magnetic(n, m, n as i64 + 1);
        let coeffs: BTreeMap<i64, CoeffExpr> = self.d.iter().enumerate().map(|(g, c)| (g as i64, c.clone())).collect();
        let mut base = assemble(&spec, &coeffs)?;
        for (j, b) in base.iter_mut().enumerate() {
            *b += &potential_v_component(n, n as i64, j as i64 + 1).scale(&self.e);
        }
        Ok(combine(&self.zeta, &base))
    }
}

/// Assemble the map from given shift coefficients.
pub fn build_map(n: usize, m: usize, d: Vec<CoeffExpr>, e: CoeffExpr) -> Result<CanonicalMap> {
    index_sets(n, m)?;
    if d.len() != n + 2 {
        return Err(Error::Dimension(format!("expected {} shift coefficients, got {}", n + 2, d.len())));
    }
    let zeta = zeta_solve(n, m)?;
    let shift: Vec<PhaseExpr> = (1..=n)
        .map(|i| {
            let mut s = PhaseExpr::zero(n);
            for (g, dg) in d.iter().enumerate() {
                if !dg.is_zero() {
                    let a = n as i64 - m as i64 - i as i64 + g as i64;
                    s += &potential_v_component(n, a, 1).scale(dg);
                }
            }
            s
        })
        .collect();
    let zs: Vec<PhaseExpr> = (1..=n).map(|r| zcal(n, m, &d, r)).collect::<Result<_>>()?;
    let df = combine(&zeta, &zs);
    let mut params: Vec<String> = d.iter().chain(std::iter::once(&e)).flat_map(|c| c.params()).collect();
    params.sort();
    params.dedup();
    let mut map = CanonicalMap { n, m, d, e, zeta, shift, df, cprime: BTreeMap::new(), b_params: params };
    map.cprime = cprime(&map);
    Ok(map)
}

/// Coefficients of `½λ^m (Σ_γ d_γ λ^{γ−m})² + e λ^n`.
pub fn cprime(map: &CanonicalMap) -> BTreeMap<i64, CoeffExpr> {
    let (n, m) = (map.n as i64, map.m as i64);
    let mut out: BTreeMap<i64, CoeffExpr> = (-m..=2 * n - m + 2).map(|a| (a, CoeffExpr::zero())).collect();
    let half = Q::new(1.into(), 2.into());
    for (g, dg) in map.d.iter().enumerate() {
        for (h, dh) in map.d.iter().enumerate() {
            let a = g as i64 + h as i64 - m;
            *out.get_mut(&a).unwrap() += &(dg * dh).scale(&half);
        }
    }
    *out.get_mut(&n).unwrap() += &map.e;
    out
}

/// `S_r = W_r − W_r'` from the closed formula.
pub fn s_r(map: &CanonicalMap, r: usize) -> Result<PhaseExpr> {
    let (n, m) = (map.n, map.m);
    let ix = index_sets(n, m)?;
    if r == 1 {
        return Ok(PhaseExpr::zero(n));
    }
    let (n_, r_) = (n as i64, r as i64);
    let lead = if ix.in_first(r) {
        map.dd(n_ - r_ + 1).scale_q_(-(r_ - 1))
    } else {
        map.dd(n_ - r_ + 1).scale_q_(n_ - r_ + 1)
    };
    let mut out = PhaseExpr::constant(n, lead);
    out -= &zcal(n, m, &map.d, r)?;
    out -= &potential_v_component(n, n_, r_).scale(&map.dd(n_ + 1));
    Ok(out)
}

/// `S_r` by substituting the shift into `W_r`.
pub fn s_r_direct(map: &CanonicalMap, r: usize) -> Result<PhaseExpr> {
    let w = quasi_w(map.n, map.m, r)?;
    Ok(&w.subst_p(&map.shift)? - &w)
}

trait ScaleInt {
    fn scale_q_(&self, k: i64) -> CoeffExpr;
}

impl ScaleInt for CoeffExpr {
    fn scale_q_(&self, k: i64) -> CoeffExpr {
        self.scale(&q_int(k))
    }
}

/// One linear equation `∂d_γ/∂t_r = Σ coef·d_δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PdeEquation {
    pub gamma: usize,
    pub r: usize,
    pub rhs: Vec<(CoeffExpr, usize)>,
}

impl std::fmt::Display for PdeEquation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "d{}_t{} = ", self.gamma, self.r)?;
        if self.rhs.is_empty() {
            return write!(f, "0");
        }
        for (i, (c, dlt)) in self.rhs.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if c.is_one() {
                write!(f, "d{dlt}")?;
            } else {
                write!(f, "({c})*d{dlt}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdeSolution {
    pub equations: Vec<PdeEquation>,
    pub d: Vec<CoeffExpr>,
    pub zeta: Matrix,
}

/// Generate and solve the first-order system for `d_0..d_{n+1}`.
///
/// Constants are `b[γ]`; with `free = Some(list)` only the listed ones are kept.
pub fn theorem_pde(n: usize, m: usize, free: Option<&[String]>) -> Result<PdeSolution> {
    let ix = index_sets(n, m)?;
    let zeta = zeta_solve(n, m)?;
    let (n_, m_) = (n as i64, m as i64);
    let in_range = |g: i64| (0..=n_ + 1).contains(&g);
    let mut equations = Vec::new();
    for r in 1..=n {
        let r_ = r as i64;
        let lower = r == 1 || ix.in_first(r);
        let gammas: Vec<i64> = if lower { (m_..=m_ + r_ - 1).collect() } else { (r_ - (n_ - m_ + 2)..=m_ - 2).collect() };
        for g in gammas.into_iter().filter(|g| in_range(*g)) {
            let mut rhs: BTreeMap<usize, CoeffExpr> = BTreeMap::new();
            if lower {
                for j in (g - m_ + 1)..=r_ {
                    let z = &zeta[r - 1][j as usize - 1];
                    let dl = n_ - m_ + 2 + g - j;
                    if !z.is_zero() && in_range(dl) {
                        *rhs.entry(dl as usize).or_default() += &z.scale_q_(g - m_ + 1);
                    }
                }
            } else {
                for j in 0..=(n_ - m_ + 2 + g - r_) {
                    if r_ + j > n_ {
                        break;
                    }
                    let z = &zeta[r - 1][(r_ + j) as usize - 1];
                    let dl = n_ - m_ + 2 + g - r_ - j;
                    if !z.is_zero() && in_range(dl) {
                        *rhs.entry(dl as usize).or_default() += &z.scale_q_(-(g - m_ + 1));
                    }
                }
            }
            let rhs: Vec<(CoeffExpr, usize)> = rhs.into_iter().filter(|(_, c)| !c.is_zero()).map(|(k, c)| (c, k)).collect();
            equations.push(PdeEquation { gamma: g as usize, r, rhs });
        }
    }
    let constant = |g: usize| -> CoeffExpr {
        let name = format!("b[{g}]");
        match free {
            Some(list) if !list.contains(&name) => CoeffExpr::zero(),
            _ => CoeffExpr::param(&name),
        }
    };
    let mut d: Vec<Option<CoeffExpr>> = vec![None; n + 2];
    loop {
        let mut progressed = false;
        for g in 0..n + 2 {
            if d[g].is_some() {
                continue;
            }
            let eqs: Vec<&PdeEquation> = equations.iter().filter(|e| e.gamma == g).collect();
            if eqs.iter().any(|e| e.rhs.iter().any(|(_, dl)| *dl != g && d[*dl].is_none())) {
                continue;
            }
            let mut grad: Vec<(i64, CoeffExpr)> = vec![(0, CoeffExpr::zero()); n];
            for e in eqs {
                for (c, dl) in &e.rhs {
                    if *dl == g {
                        let k = c.as_q().filter(|q| q.is_integer()).ok_or_else(|| {
                            Error::Unsupported(format!("non-constant self coupling for d_{g}"))
                        })?;
                        grad[e.r - 1].0 += i64::try_from(k.to_integer()).unwrap_or(0);
                    } else {
                        grad[e.r - 1].1 += &(c * d[*dl].as_ref().unwrap());
                    }
                }
            }
            d[g] = Some(integrate_linear(n, &grad, constant(g))?);
            progressed = true;
        }
        if d.iter().all(Option::is_some) {
            break;
        }
        if !progressed {
            return Err(Error::Inconsistent("shift equations are not triangular".into()));
        }
    }
    let d: Vec<CoeffExpr> = d.into_iter().map(Option::unwrap).collect();
    // mixed-derivative compatibility
    for g in 0..n + 2 {
        for e1 in equations.iter().filter(|e| e.gamma == g) {
            for e2 in equations.iter().filter(|e| e.gamma == g && e.r > e1.r) {
                let ev = |e: &PdeEquation| -> CoeffExpr {
                    e.rhs.iter().fold(CoeffExpr::zero(), |acc, (c, dl)| &acc + &(c * &d[*dl]))
                };
                if ev(e1).diff(e2.r) != ev(e2).diff(e1.r) {
                    return Err(Error::Inconsistent(format!("d_{g} fails mixed-derivative compatibility")));
                }
            }
        }
    }
    Ok(PdeSolution { equations, d, zeta })
}

/// Map from the magnetic constants to the dynamical ordinary parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamMap {
    pub n: usize,
    pub m: usize,
    /// `a[α] ↦ polynomial in b[γ], bbar`.
    pub a: BTreeMap<i64, CoeffExpr>,
}

impl ParamMap {
    pub fn bindings(&self) -> BTreeMap<String, CoeffExpr> {
        self.a.iter().map(|(k, v)| (format!("a[{k}]"), v.clone())).collect()
    }
}

/// Dynamical exponents of the ordinary family.
pub fn dynamic_exponents(n: usize, m: usize) -> Vec<i64> {
    let (n, m) = (n as i64, m as i64);
    (-m..=-1).chain(n..=2 * n - m + 2).collect()
}

/// Parameter map for a fully symbolic magnetic map of shape `(n, m)`.
pub fn param_map(n: usize, m: usize) -> Result<ParamMap> {
    let sol = theorem_pde(n, m, None)?;
    let map = build_map(n, m, sol.d, default_e(n, m))?;
    param_map_for(&map)
}

/// Read off `a = Φ(b)` by matching `c_α(t; a)` with `c'_α(t; b)`.
pub fn param_map_for(map: &CanonicalMap) -> Result<ParamMap> {
    let (n, m) = (map.n, map.m);
    let mut a: BTreeMap<i64, CoeffExpr> = BTreeMap::new();
    if n == 1 {
        let zero = vec![0.0; 1];
        for alpha in dynamic_exponents(n, m) {
            a.insert(alpha, time_origin(&map.effective_c(alpha), &zero)?);
        }
        return Ok(ParamMap { n, m, a });
    }
    let sys = solve_deformation(&SystemSpec::ordinary(n, m), &SolveOptions::default())?;
    for u in &sys.solve_order {
        let name = format!("a[{u}]");
        let c = sys.coeff_fns[u].subst_params(&bindings(&a));
        let parts = c.split_param(&name);
        let unit = parts.get(&1).and_then(|e| e.inv_unit()).ok_or_else(|| {
            Error::Inconsistent(format!("coefficient of {name} in c_{u} is not a unit"))
        })?;
        let rest = parts.get(&0).cloned().unwrap_or_default();
        if parts.keys().any(|k| *k > 1) {
            return Err(Error::Inconsistent(format!("c_{u} is not linear in {name}")));
        }
        let val = &(&map.effective_c(*u) - &rest) * &unit;
        if val.depends_on_time() {
            return Err(Error::Inconsistent(format!("parameter {name} would depend on time: {val}")));
        }
        a.insert(*u, val);
    }
    Ok(ParamMap { n, m, a })
}

fn bindings(a: &BTreeMap<i64, CoeffExpr>) -> BTreeMap<String, CoeffExpr> {
    a.iter().map(|(k, v)| (format!("a[{k}]"), v.clone())).collect()
}

/// Value at `t = 0`, keeping parameters symbolic.
fn time_origin(c: &CoeffExpr, _t: &[f64]) -> Result<CoeffExpr> {
    let mut out = CoeffExpr::zero();
    for (mono, v) in c.terms() {
        if mono.tpow.iter().any(|k| *k > 0) {
            continue;
        }
        out.add_term(CMono { tpow: vec![], exppow: vec![], params: mono.params.clone() }, v.clone());
    }
    Ok(out)
}

/// Express `target` as a rational combination of `basis` polynomials.
fn express_in_basis(target: &CoeffExpr, basis: &[(String, CoeffExpr)]) -> Option<CoeffExpr> {
    // rows: monomials; columns: basis elements + target
    let mut monos: Vec<CMono> = basis.iter().flat_map(|(_, b)| b.terms().map(|(m, _)| m.clone())).collect();
    monos.extend(target.terms().map(|(m, _)| m.clone()));
    monos.sort();
    monos.dedup();
    let k = basis.len();
    let mut rows: Vec<Vec<Q>> = monos
        .iter()
        .map(|mo| {
            let mut row: Vec<Q> = basis.iter().map(|(_, b)| coeff_at(b, mo)).collect();
            row.push(coeff_at(target, mo));
            row
        })
        .collect();
    let mut piv_cols = Vec::new();
    let mut r0 = 0;
    for col in 0..k {
        let Some(p) = (r0..rows.len()).find(|&i| !rows[i][col].is_zero_q()) else { continue };
        rows.swap(r0, p);
        let inv = rows[r0][col].recip();
        for x in rows[r0].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows.len() {
            if i != r0 && !rows[i][col].is_zero_q() {
                let f = rows[i][col].clone();
                for j in 0..=k {
                    let v = &rows[r0][j] * &f;
                    rows[i][j] = &rows[i][j] - &v;
                }
            }
        }
        piv_cols.push(col);
        r0 += 1;
    }
    if rows[r0..].iter().any(|r| !r[k].is_zero_q()) {
        return None;
    }
    let mut out = CoeffExpr::zero();
    for (i, col) in piv_cols.iter().enumerate() {
        out += &CoeffExpr::param(&basis[*col].0).scale(&rows[i][k]);
    }
    Some(out)
}

trait IsZeroQ {
    fn is_zero_q(&self) -> bool;
}

impl IsZeroQ for Q {
    fn is_zero_q(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
}

fn coeff_at(c: &CoeffExpr, m: &CMono) -> Q {
    c.terms().find(|(k, _)| *k == m).map(|(_, v)| v.clone()).unwrap_or_else(|| q_int(0))
}

/// Ordinary Hamiltonians equivalent to `map`, written in the parameters `a[α]`.
///
/// For `n ≥ 2` this is the solved ordinary family with `a` left symbolic. For
/// `n = 1` there is no integrability constraint, so the coefficient functions
/// are `c'_α(t; b)` re-expressed through `a = Φ(b)`.
pub fn ordinary_representation(map: &CanonicalMap) -> Result<(Vec<PhaseExpr>, ParamMap)> {
    let (n, m) = (map.n, map.m);
    let pm = param_map_for(map)?;
    if n >= 2 {
        let sys = solve_deformation(&SystemSpec::ordinary(n, m), &SolveOptions::default())?;
        return Ok((sys.h, pm));
    }
    let basis: Vec<(String, CoeffExpr)> = pm.a.iter().map(|(k, v)| (format!("a[{k}]"), v.clone())).collect();
    let mut h = ecal(1, m, 1)?;
    for alpha in dynamic_exponents(1, m) {
        let c = map.effective_c(alpha);
        let mut groups: BTreeMap<CMono, CoeffExpr> = BTreeMap::new();
        for (mono, v) in c.terms() {
            let tpart = CMono { tpow: mono.tpow.clone(), exppow: mono.exppow.clone(), params: vec![] };
            let ppart = CMono { tpow: vec![], exppow: vec![], params: mono.params.clone() };
            groups.entry(tpart).or_default().add_term(ppart, v.clone());
        }
        let mut ca = CoeffExpr::zero();
        for (tpart, poly) in groups {
            let lin = express_in_basis(&poly, &basis).ok_or_else(|| {
                Error::Inconsistent(format!("c'_{alpha} is not expressible through the parameter map"))
            })?;
            ca += &lin.mul_mono(&tpart, &q_int(1));
        }
        h += &potential_v_component(1, alpha, 1).scale(&ca);
    }
    Ok((vec![h], pm))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equivalence {
    /// `H_r^A(q,p') − H_r^B(q,p'+shift) − ∂F/∂t_r`.
    pub residuals: Vec<PhaseExpr>,
    pub holds: bool,
    /// Phase-free differences, to be absorbed into the ordinary tails.
    pub tails: Vec<CoeffExpr>,
    /// The same tails as non-dynamical coefficients `c_0..c_{n−1}`.
    pub tail_coeffs: BTreeMap<i64, CoeffExpr>,
}

/// Check `H^A = H^B + ∂F/∂t` after binding `a = Φ(b)` in the ordinary system.
pub fn verify_equivalence(ordinary: &DeformedSystem, magnetic: &[PhaseExpr], map: &CanonicalMap) -> Result<Equivalence> {
    let n = map.n;
    if ordinary.spec.n != n || ordinary.spec.m != map.m || magnetic.len() != n {
        return Err(Error::InvalidConfig("ordinary and magnetic systems have different shapes".into()));
    }
    if ordinary.spec.family != Family::Ordinary {
        return Err(Error::InvalidConfig("first system must be of ordinary type".into()));
    }
    let pm = param_map_for(map)?;
    let params = ordinary.params();
    for (k, v) in &pm.a {
        let name = format!("a[{k}]");
        if !v.is_zero() && !params.contains(&name) {
            return Err(Error::InvalidConfig(format!("parameter mismatch: {name} = {v} is fixed to zero")));
        }
    }
    let binds = pm.bindings();
    let residuals: Vec<PhaseExpr> = (0..n)
        .map(|r| -> Result<PhaseExpr> {
            let ha = ordinary.h[r].subst_params(&binds);
            let hb = magnetic[r].subst_p(&map.shift)?;
            Ok(&(&ha - &hb) - &map.df[r])
        })
        .collect::<Result<_>>()?;
    let holds = residuals.iter().all(|r| r.is_phase_independent());
    let tails: Vec<CoeffExpr> = residuals.iter().map(|r| r.phase_free()).collect();
    let tail_coeffs = if holds && n >= 2 {
        let neg: Vec<CoeffExpr> = tails.iter().map(|t| -t).collect();
        let mut c = crate::frobenius::tails_to_coefficients(&ordinary.spec, &ordinary.zeta, &neg)?;
        for (a, v) in c.iter_mut() {
            *v += &ordinary.coeff_fns.get(a).cloned().unwrap_or_default().subst_params(&binds);
        }
        c
    } else {
        BTreeMap::new()
    };
    Ok(Equivalence { residuals, holds, tails, tail_coeffs })
}

// ---------------------------------------------------------------------------
// Obstruction

#[derive(Clone, Debug, PartialEq)]
pub struct Radical {
    pub name: String,
    pub degree: u32,
    pub value: CoeffExpr,
}

impl std::fmt::Display for Radical {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}^{} = {}", self.name, self.degree, self.value)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub alpha: i64,
    /// `a_α(b) = target`, as stated.
    pub equation: String,
    /// The same equation after earlier assignments, reduced to a contradiction.
    pub reduced: String,
    pub assignments: Vec<(String, CoeffExpr)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Solvable { b: BTreeMap<String, CoeffExpr>, radicals: Vec<Radical> },
    Unsolvable { witness: Witness },
}

impl Verdict {
    pub fn is_solvable(&self) -> bool {
        matches!(self, Verdict::Solvable { .. })
    }
}

struct Search {
    unknowns: Vec<String>,
    eqs: Vec<(i64, CoeffExpr)>,
    targets: BTreeMap<i64, CoeffExpr>,
    phi: BTreeMap<i64, CoeffExpr>,
}

#[derive(Clone)]
struct State {
    assign: Vec<(String, CoeffExpr)>,
    radicals: Vec<Radical>,
}

impl State {
    fn reduce(&self, c: &CoeffExpr) -> CoeffExpr {
        let mut x = c.clone();
        for (k, v) in &self.assign {
            x = x.subst_param(k, v);
        }
        for r in &self.radicals {
            x = x.reduce_power(&r.name, r.degree, &r.value);
        }
        x
    }

    /// Inverse of a nonzero rational times a product of radicals with rational values.
    fn invert(&self, c: &CoeffExpr) -> Option<CoeffExpr> {
        if c.len() != 1 {
            return None;
        }
        let (mono, v) = c.terms().next().unwrap();
        if !mono.tpow.is_empty() || !mono.exppow.is_empty() {
            return None;
        }
        let mut out = CoeffExpr::from_q(v.recip());
        for (p, e) in &mono.params {
            let r = self.radicals.iter().find(|r| &r.name == p)?;
            let rv = r.value.as_q()?;
            // p^{-e} = p^{k·deg − e} / value^k
            let k = e.div_ceil(r.degree);
            let f = CoeffExpr::param(p).pow(k * r.degree - e).scale(&rv.pow(k as i32).recip());
            out = &out * &f;
        }
        Some(self.reduce(&out))
    }
}

impl Search {
    fn unknowns_in(&self, c: &CoeffExpr) -> Vec<String> {
        self.unknowns.iter().filter(|u| c.has_param(u)).cloned().collect()
    }

    fn witness(&self, alpha: i64, reduced: &CoeffExpr, st: &State) -> Witness {
        Witness {
            alpha,
            equation: format!("{} = {}", self.phi[&alpha], self.targets[&alpha]),
            reduced: format!("{} = 0", reduced),
            assignments: st.assign.clone(),
        }
    }

    fn run(&self, st: State) -> Result<Verdict> {
        let mut st = st;
        loop {
            let mut live: Vec<(i64, CoeffExpr)> = Vec::new();
            for (a, e) in &self.eqs {
                let r = st.reduce(e);
                if r.is_zero() {
                    continue;
                }
                if self.unknowns_in(&r).is_empty() {
                    return Ok(Verdict::Unsolvable { witness: self.witness(*a, &r, &st) });
                }
                live.push((*a, r));
            }
            if live.is_empty() {
                // unconstrained unknowns are set to zero
                for u in &self.unknowns {
                    if !st.assign.iter().any(|(k, _)| k == u) {
                        st.assign.push((u.clone(), CoeffExpr::zero()));
                    }
                }
                let b = st.assign.iter().cloned().collect::<BTreeMap<_, _>>();
                let mut full = BTreeMap::new();
                for u in &self.unknowns {
                    full.insert(u.clone(), st.reduce(&b.get(u).cloned().unwrap_or_default()));
                }
                return Ok(Verdict::Solvable { b: full, radicals: st.radicals });
            }
            // single-unknown steps
            let mut step = None;
            for (a, e) in &live {
                let us = self.unknowns_in(e);
                if us.len() != 1 {
                    continue;
                }
                let u = &us[0];
                let parts = e.split_param(u);
                let deg = *parts.keys().max().unwrap();
                let c0 = parts.get(&0).cloned().unwrap_or_default();
                let c1 = parts.get(&1).cloned().unwrap_or_default();
                if deg == 1 {
                    if let Some(inv) = st.invert(&c1) {
                        step = Some((u.clone(), vec![st.reduce(&(&(-&c0) * &inv))]));
                        break;
                    }
                } else if deg == 2 && c1.is_zero() {
                    let Some(inv) = st.invert(&parts[&2]) else { continue };
                    let v = st.reduce(&(&(-&c0) * &inv));
                    let roots = match v.as_q() {
                        Some(q) if num_traits::Zero::is_zero(&q) => vec![CoeffExpr::zero()],
                        Some(q) if q < q_int(0) => {
                            return Ok(Verdict::Unsolvable { witness: self.witness(*a, e, &st) });
                        }
                        Some(q) => match q_sqrt(&q) {
                            Some(s) => vec![CoeffExpr::from_q(s.clone()), CoeffExpr::from_q(-s)],
                            None => self.new_radical(&mut st, v),
                        },
                        None => self.new_radical(&mut st, v),
                    };
                    step = Some((u.clone(), roots));
                    break;
                }
            }
            // linear slack steps, bbar first
            if step.is_none() {
                let mut order: Vec<&String> = self.unknowns.iter().filter(|u| u.as_str() == "bbar").collect();
                order.extend(self.unknowns.iter().filter(|u| u.as_str() != "bbar"));
                'outer: for u in order {
                    for (_, e) in &live {
                        let parts = e.split_param(u);
                        if parts.keys().max() != Some(&1) {
                            continue;
                        }
                        if let Some(k) = parts[&1].as_q() {
                            let c0 = parts.get(&0).cloned().unwrap_or_default();
                            step = Some((u.clone(), vec![c0.scale(&(-k.recip()))]));
                            break 'outer;
                        }
                    }
                }
            }
            let Some((u, roots)) = step else {
                return Err(Error::Unsupported("parameter equations are not triangular".into()));
            };
            if roots.len() == 1 {
                st.assign.push((u, roots.into_iter().next().unwrap()));
                continue;
            }
            let mut first_fail = None;
            for root in roots {
                let mut br = st.clone();
                br.assign.push((u.clone(), root));
                match self.run(br)? {
                    v @ Verdict::Solvable { .. } => return Ok(v),
                    v => {
                        first_fail.get_or_insert(v);
                    }
                }
            }
            return Ok(first_fail.unwrap());
        }
    }

    fn new_radical(&self, st: &mut State, v: CoeffExpr) -> Vec<CoeffExpr> {
        let name = format!("r{}", st.radicals.len() + 1);
        st.radicals.push(Radical { name: name.clone(), degree: 2, value: v });
        let r = CoeffExpr::param(&name);
        vec![r.clone(), -r]
    }
}

/// Decide whether ordinary parameters `target` lie in the image of the
/// parameter map. Missing exponents are taken as zero.
pub fn obstruction(n: usize, m: usize, target: &BTreeMap<i64, CoeffExpr>) -> Result<Verdict> {
    let pm = param_map(n, m)?;
    for a in target.keys() {
        if !pm.a.contains_key(a) {
            return Err(Error::InvalidConfig(format!("a[{a}] is not a dynamical parameter for n={n}, m={m}")));
        }
    }
    let mut unknowns: Vec<String> = (0..n + 2).map(|g| format!("b[{g}]")).collect();
    unknowns.push("bbar".into());
    let targets: BTreeMap<i64, CoeffExpr> =
        pm.a.keys().map(|a| (*a, target.get(a).cloned().unwrap_or_default())).collect();
    let eqs: Vec<(i64, CoeffExpr)> = pm.a.iter().rev().map(|(a, phi)| (*a, phi - &targets[a])).collect();
    let s = Search { unknowns, eqs, targets, phi: pm.a.clone() };
    s.run(State { assign: vec![], radicals: vec![] })
}

/// Rows deformed by the ansatz, exposed for reporting.
pub fn deformed(n: usize, m: usize) -> Result<Vec<usize>> {
    let (a, b) = deformed_rows(n, m)?;
    Ok(a.into_iter().chain(b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffring::cf;

    fn px(n: usize, s: &str) -> PhaseExpr {
        PhaseExpr::parse(n, s).unwrap()
    }

    #[test]
    fn power_sums() {
        assert_eq!(power_sum(3, 1), px(3, "-q1"));
        assert_eq!(power_sum(3, 2), px(3, "q1^2 - 2*q2"));
        assert_eq!(power_sum(3, 3), px(3, "-q1^3 + 3*q1*q2 - 3*q3"));
        assert_eq!(power_sum(3, 0), px(3, "3"));
        assert_eq!(power_sum(1, -1), px(1, "-q1^-1"));
        assert_eq!(power_sum(2, -1), px(2, "-q1*q2^-1"));
    }

    #[test]
    fn cubic_shift_example() {
        let d = vec![cf("0"), cf("b[3]*(t2 + t3^2)"), cf("2*b[3]*t3"), cf("b[3]"), cf("0")];
        let map = build_map(3, 1, d, cf("0")).unwrap();
        assert!(map.df[0].is_zero());
        assert_eq!(map.df[1], px(3, "-b[3]*q1"));
        assert_eq!(map.df[2], px(3, "b[3]*(q1^2 - 2*q2) - 2*b[3]*t3*q1"));
        assert_eq!(map.shift[2], px(3, "-b[3]"));
        assert_eq!(map.shift[1], px(3, "b[3]*q1 - 2*b[3]*t3"));
        for r in 1..=3 {
            assert_eq!(map.df_direct(r), map.df[r - 1], "r={r}");
        }
    }

    #[test]
    fn cprime_examples() {
        let pm = param_map(3, 1).unwrap();
        assert_eq!(pm.a[&7], cf("1/2*b[4]^2"));
        assert_eq!(pm.a[&6], cf("b[3]*b[4]"));
        assert_eq!(pm.a[&3], cf("1/2*b[2]^2 + b[0]*b[4] + b[1]*b[3] + bbar - b[4]"));
        assert_eq!(pm.a[&-1], cf("1/2*b[0]^2"));
        let pm = param_map(3, 0).unwrap();
        assert_eq!(pm.a[&8], cf("1/2*b[4]^2"));
        assert_eq!(pm.a[&3], cf("b[0]*b[3] + b[1]*b[2] + bbar - b[4]"));
    }

    #[test]
    fn pde_examples() {
        let s = theorem_pde(3, 0, None).unwrap();
        assert_eq!(s.d[2], cf("b[2] + 3*b[4]*t3"));
        assert_eq!(s.d[0], cf("b[0] + b[2]*t3 + b[3]*t2 + b[4]*(t1 + 3/2*t3^2)"));
        let s = theorem_pde(3, 4, None).unwrap();
        assert_eq!(s.d[4], cf("b[4]*exp(t1)"));
        assert_eq!(s.d[2], cf("b[0]*(t3 + t2^2) + b[1]*t2 + b[2]"));
    }

    #[test]
    fn hh_obstruction() {
        let target: BTreeMap<i64, CoeffExpr> =
            [(4, cf("-1")), (-1, cf("-1/4*alpha"))].into_iter().collect();
        match obstruction(2, 1, &target).unwrap() {
            Verdict::Unsolvable { witness } => assert_eq!(witness.alpha, 4),
            v => panic!("{v:?}"),
        }
        let v = obstruction(2, 1, &BTreeMap::new()).unwrap();
        assert!(v.is_solvable());
    }
}
