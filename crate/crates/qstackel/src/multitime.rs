//! Numerical multi-time flows.
//!
//! Hamiltonians are compiled once into flat term lists with all parameters
//! bound, then integrated with classical RK4 along axis-parallel time paths.

use itertools::Itertools;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffring::{q_to_f64, CoeffExpr};
use crate::error::{Error, Result};
use crate::frobenius::DeformedSystem;
use crate::phasepoly::{PhaseExpr, PhasePoint};

#[derive(Clone, Debug)]
struct TimeTerm {
    c: f64,
    tpow: Vec<(usize, i32)>,
    epow: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
struct Term {
    coeff: Vec<TimeTerm>,
    q: Vec<(usize, i32)>,
    p: Vec<(usize, i32)>,
}

/// Compiled phase-space function with bound parameters.
#[derive(Clone, Debug)]
pub struct Tape {
    n: usize,
    terms: Vec<Term>,
}

fn compile_coeff(c: &CoeffExpr, params: &dyn Fn(&str) -> Option<f64>) -> Result<Vec<TimeTerm>> {
    let mut out = Vec::new();
    for (m, v) in c.terms() {
        let mut k = q_to_f64(v);
        for (name, e) in &m.params {
            let x = params(name).ok_or_else(|| Error::UnboundParam(name.clone()))?;
            k *= x.powi(*e as i32);
        }
        if k == 0.0 {
            continue;
        }
        let tpow = m.tpow.iter().enumerate().filter(|(_, e)| **e != 0).map(|(j, e)| (j, *e as i32)).collect();
        let epow = m.exppow.iter().enumerate().filter(|(_, e)| **e != 0).map(|(j, e)| (j, *e as f64)).collect();
        out.push(TimeTerm { c: k, tpow, epow });
    }
    Ok(out)
}

impl Tape {
    pub fn compile(f: &PhaseExpr, params: &dyn Fn(&str) -> Option<f64>) -> Result<Self> {
        let n = f.n();
        let mut terms = Vec::new();
        for (e, c) in f.terms() {
            let coeff = compile_coeff(c, params)?;
            if coeff.is_empty() {
                continue;
            }
            let q = (0..n).filter(|&i| e[i] != 0).map(|i| (i, e[i])).collect();
            let p = (0..n).filter(|&i| e[n + i] != 0).map(|i| (i, e[n + i])).collect();
            terms.push(Term { coeff, q, p });
        }
        Ok(Tape { n, terms })
    }

    pub fn eval(&self, q: &[f64], p: &[f64], t: &[f64]) -> f64 {
        let mut acc = 0.0;
        for term in &self.terms {
            let mut c = 0.0;
            for tt in &term.coeff {
                let mut v = tt.c;
                for &(j, k) in &tt.tpow {
                    v *= t[j].powi(k);
                }
                for &(j, k) in &tt.epow {
                    v *= (k * t[j]).exp();
                }
                c += v;
            }
            for &(i, k) in &term.q {
                c *= q[i].powi(k);
            }
            for &(i, k) in &term.p {
                c *= p[i].powi(k);
            }
            acc += c;
        }
        acc
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Hamiltonians and their vector fields, ready for integration.
#[derive(Clone, Debug)]
pub struct CompiledFlows {
    n: usize,
    hams: Vec<Tape>,
    /// Per flow: `∂H/∂p_i` then `−∂H/∂q_i`.
    fields: Vec<Vec<Tape>>,
}

impl CompiledFlows {
    pub fn new(h: &[PhaseExpr], params: &dyn Fn(&str) -> Option<f64>) -> Result<Self> {
        let n = h.first().map(|x| x.n()).ok_or_else(|| Error::InvalidConfig("no Hamiltonians".into()))?;
        let mut hams = Vec::new();
        let mut fields = Vec::new();
        for hr in h {
            if hr.n() != n {
                return Err(Error::Dimension("Hamiltonians of different dimension".into()));
            }
            hams.push(Tape::compile(hr, params)?);
            let mut f = Vec::with_capacity(2 * n);
            for i in 0..n {
                f.push(Tape::compile(&hr.diff_p(i + 1), params)?);
            }
            for i in 0..n {
                f.push(Tape::compile(&(-&hr.diff_q(i + 1)), params)?);
            }
            fields.push(f);
        }
        Ok(CompiledFlows { n, hams, fields })
    }

    pub fn from_system(sys: &DeformedSystem, params: &dyn Fn(&str) -> Option<f64>) -> Result<Self> {
        Self::new(&sys.h, params)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn flows(&self) -> usize {
        self.hams.len()
    }

    pub fn hamiltonian(&self, r: usize, pt: &PhasePoint) -> f64 {
        self.hams[r].eval(&pt.q, &pt.p, &pt.t)
    }

    /// `(dq/dt_r, dp/dt_r)` at `pt`; `r` is zero-based.
    pub fn field(&self, r: usize, pt: &PhasePoint) -> Result<Vec<f64>> {
        let n = self.n;
        if r >= self.fields.len() {
            return Err(Error::InvalidConfig(format!("flow index {} out of range", r + 1)));
        }
        check_point(n, pt)?;
        let out: Vec<f64> = self.fields[r].iter().map(|f| f.eval(&pt.q, &pt.p, &pt.t)).collect();
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::DivisionByZero("vector field is not finite at this point".into()));
        }
        Ok(out)
    }
}

fn check_point(n: usize, pt: &PhasePoint) -> Result<()> {
    if pt.q.len() != n || pt.p.len() != n || pt.t.len() != n {
        return Err(Error::Dimension(format!("point must have {n} q, p and t entries")));
    }
    Ok(())
}

/// Vector field of flow `r` (one-based) of a system.
pub fn vector_field(sys: &DeformedSystem, r: usize, pt: &PhasePoint, params: &dyn Fn(&str) -> Option<f64>) -> Result<Vec<f64>> {
    if r == 0 {
        return Err(Error::InvalidConfig("flows are numbered from 1".into()));
    }
    CompiledFlows::from_system(sys, params)?.field(r - 1, pt)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Zero-based time index.
    pub r: usize,
    pub start: f64,
    pub end: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimePath {
    pub segments: Vec<Segment>,
    pub h: f64,
}

impl TimePath {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidConfig("step size must be positive".into()));
        }
        for s in &self.segments {
            if s.r >= n {
                return Err(Error::InvalidConfig(format!("segment time index {} exceeds n = {n}", s.r + 1)));
            }
            if !s.start.is_finite() || !s.end.is_finite() {
                return Err(Error::InvalidConfig("segment bounds must be finite".into()));
            }
        }
        Ok(())
    }

    /// Edges of a box taken in the given axis order.
    pub fn box_path(bx: &[(f64, f64)], order: &[usize], h: f64) -> Self {
        TimePath { segments: order.iter().map(|&r| Segment { r, start: bx[r].0, end: bx[r].1 }).collect(), h }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentDrift {
    pub r: usize,
    pub h_start: f64,
    pub h_end: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub endpoint: PhasePoint,
    pub drift: Vec<SegmentDrift>,
    pub steps: usize,
    pub blown_up: bool,
    /// Optional dense output `(t, q, p)` after every step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<PhasePoint>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrateOptions {
    /// Largest allowed |state| component before stopping.
    pub bound: f64,
    pub record: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { bound: 1e8, record: false }
    }
}

fn rk4_step(fl: &CompiledFlows, r: usize, pt: &PhasePoint, dt: f64) -> Result<PhasePoint> {
    let n = fl.n;
    let shifted = |k: &[f64], a: f64| {
        let mut x = pt.clone();
        for i in 0..n {
            x.q[i] += a * k[i];
            x.p[i] += a * k[n + i];
        }
        x.t[r] += a;
        x
    };
    let k1 = fl.field(r, pt)?;
    let k2 = fl.field(r, &shifted(&k1, dt / 2.0))?;
    let k3 = fl.field(r, &shifted(&k2, dt / 2.0))?;
    let k4 = fl.field(r, &shifted(&k3, dt))?;
    let mut out = pt.clone();
    for i in 0..2 * n {
        let d = dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if i < n {
            out.q[i] += d;
        } else {
            out.p[i - n] += d;
        }
    }
    out.t[r] += dt;
    Ok(out)
}

/// Integrate along `path` starting at `start`. Each segment first moves `t_r`
/// to its start value; the start values of a box path are the box corner.
pub fn integrate_flows(fl: &CompiledFlows, path: &TimePath, start: &PhasePoint, opts: IntegrateOptions) -> Result<TrajectoryResult> {
    let n = fl.n;
    path.validate(n)?;
    check_point(n, start)?;
    let mut pt = start.clone();
    let mut drift = Vec::new();
    let mut steps = 0;
    let mut samples = opts.record.then(|| vec![start.clone()]);
    for seg in &path.segments {
        pt.t[seg.r] = seg.start;
        let h0 = fl.hamiltonian(seg.r, &pt);
        let len = seg.end - seg.start;
        let k = (len.abs() / path.h).ceil() as usize;
        let dt = if k == 0 { 0.0 } else { len / k as f64 };
        for _ in 0..k {
            let next = match rk4_step(fl, seg.r, &pt, dt) {
                Ok(x) => x,
                Err(Error::DivisionByZero(_)) => {
                    return Ok(TrajectoryResult { endpoint: pt, drift, steps, blown_up: true, samples });
                }
                Err(e) => return Err(e),
            };
            steps += 1;
            let big = next.q.iter().chain(&next.p).any(|x| !x.is_finite() || x.abs() > opts.bound);
            if big {
                return Ok(TrajectoryResult { endpoint: next, drift, steps, blown_up: true, samples });
            }
            pt = next;
            if let Some(s) = samples.as_mut() {
                s.push(pt.clone());
            }
        }
        pt.t[seg.r] = seg.end;
        drift.push(SegmentDrift { r: seg.r, h_start: h0, h_end: fl.hamiltonian(seg.r, &pt) });
    }
    Ok(TrajectoryResult { endpoint: pt, drift, steps, blown_up: false, samples })
}

pub fn integrate(
    sys: &DeformedSystem,
    path: &TimePath,
    start: &PhasePoint,
    params: &dyn Fn(&str) -> Option<f64>,
) -> Result<TrajectoryResult> {
    let fl = CompiledFlows::from_system(sys, params)?;
    integrate_flows(&fl, path, start, IntegrateOptions::default())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub discrepancy: f64,
    pub orderings: Vec<Vec<usize>>,
    pub endpoints: Vec<PhasePoint>,
    pub steps: usize,
}

fn distance(a: &PhasePoint, b: &PhasePoint) -> f64 {
    a.q.iter().zip(&b.q).chain(a.p.iter().zip(&b.p)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Integrate over every axis ordering of the box and return the largest
/// pairwise endpoint distance (max norm over `q, p`).
pub fn path_independence_flows(fl: &CompiledFlows, start: &PhasePoint, bx: &[(f64, f64)], h: f64) -> Result<PathReport> {
    let n = fl.n;
    if bx.len() != n {
        return Err(Error::Dimension(format!("box needs {n} intervals")));
    }
    let mut corner = start.clone();
    for (r, (a, _)) in bx.iter().enumerate() {
        corner.t[r] = *a;
    }
    let orderings: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let runs: Vec<Result<TrajectoryResult>> = orderings
        .par_iter()
        .map(|ord| integrate_flows(fl, &TimePath::box_path(bx, ord, h), &corner, IntegrateOptions::default()))
        .collect();
    let mut endpoints = Vec::new();
    let mut steps = 0;
    for (ord, run) in orderings.iter().zip(runs) {
        let run = run?;
        if run.blown_up {
            return Err(Error::BlowUp(format!("ordering {:?} left the bounded region", ord.iter().map(|r| r + 1).collect::<Vec<_>>())));
        }
        steps += run.steps;
        endpoints.push(run.endpoint);
    }
    let mut d: f64 = 0.0;
    for i in 0..endpoints.len() {
        for j in i + 1..endpoints.len() {
            d = d.max(distance(&endpoints[i], &endpoints[j]));
        }
    }
    Ok(PathReport { discrepancy: d, orderings, endpoints, steps })
}

pub fn path_independence(
    sys: &DeformedSystem,
    start: &PhasePoint,
    bx: &[(f64, f64)],
    params: &dyn Fn(&str) -> Option<f64>,
    h: f64,
) -> Result<PathReport> {
    let fl = CompiledFlows::from_system(sys, params)?;
    path_independence_flows(&fl, start, bx, h)
}

/// Observed orders `log2(e_k / e_{k+1})` for successive step halvings.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Numerical rank of the rows, relative tolerance `tol`.
pub fn numerical_rank(rows: &[Vec<f64>], tol: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    let sv = m.singular_values();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|s| **s > tol * top.max(1.0)).count()
}

/// Does the vector field of `y` at `pt` lie in the span of the fields of `basis`?
pub fn in_span(basis: &CompiledFlows, y: &CompiledFlows, r: usize, pt: &PhasePoint, tol: f64) -> Result<bool> {
    let mut rows: Vec<Vec<f64>> = (0..basis.flows()).map(|j| basis.field(j, pt)).collect::<Result<_>>()?;
    let k = numerical_rank(&rows, tol);
    rows.push(y.field(r, pt)?);
    Ok(numerical_rank(&rows, tol) == k)
}
