//! Command-line front end.
//!
//! `run` parses arguments, dispatches, and returns the exit status together
//! with the rendered output so that the binary stays a thin wrapper.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde_json::json;

use crate::canonmap::{build_map, default_e, obstruction, param_map_for, theorem_pde, verify_equivalence, Verdict};
use crate::coeffring::{param_latex, CoeffExpr};
use crate::error::{Error, Result};
use crate::frobenius::{certify, gauge_preset, solve_deformation, DeformedSystem, Gauge, SolveOptions, SystemFile};
use crate::multitime::{integrate_flows, path_independence_flows, CompiledFlows, IntegrateOptions, TimePath};
use crate::painleve::{magnetic_rep_check, specialize, Target};
use crate::phasepoly::{PhaseExpr, PhasePoint};
use crate::stackelgen::{assemble, ecal, ordinary_bounds, Family, SystemSpec};

/// Environment variable naming the directory for generated artifacts.
pub const OUT_DIR_ENV: &str = "QSTACKEL_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CERTIFY: i32 = 3;
pub const EXIT_BLOWUP: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Latex,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "qstackel", version, about = "Quasi-Stäckel systems, Frobenius deformations and Painlevé reductions")]
pub struct RunConfig {
    #[command(subcommand)]
    pub cmd: Command,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "text")]
    pub format: Format,
    /// Write the result to this file (relative paths resolve inside $QSTACKEL_OUT_DIR when set).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct SystemArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    /// geodesic, ordinary or magnetic.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long, conflicts_with_all = ["magnetic", "geodesic", "family"])]
    pub ordinary: bool,
    #[arg(long, conflicts_with_all = ["ordinary", "geodesic", "family"])]
    pub magnetic: bool,
    #[arg(long, conflicts_with_all = ["ordinary", "magnetic", "family"])]
    pub geodesic: bool,
    /// Lowest ordinary exponent.
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<i64>,
    /// Highest ordinary exponent.
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<i64>,
    /// Largest magnetic exponent.
    #[arg(long)]
    pub gmax: Option<i64>,
    /// Parameter bindings, e.g. `a4=-1,a[-1]=1/4`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub bind: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Undeformed Hamiltonians of a family.
    Gen(SystemArgs),
    /// Solve for the time-dependent coefficients.
    Deform {
        #[command(flatten)]
        sys: SystemArgs,
        /// Integration constants kept symbolic (others are set to zero).
        #[arg(long, value_delimiter = ',')]
        free: Option<Vec<String>>,
        /// zero, solve, or a named preset.
        #[arg(long, default_value = "zero")]
        gauge: String,
    },
    /// Certify a system file.
    Check { file: PathBuf },
    /// Magnetic-to-ordinary canonical map.
    Map {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, value_delimiter = ',')]
        free: Option<Vec<String>>,
        /// Ordinary parameter values to test for a magnetic partner, e.g. `a4=-1,a3=0`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        target: Option<Vec<String>>,
    },
    /// Reduce a one-dimensional system to a Painlevé equation.
    Painleve {
        #[arg(long)]
        target: String,
        #[arg(long)]
        show_derivation: bool,
    },
    /// Numerical path-independence test.
    Simulate {
        /// System file; otherwise the system is solved from the flags below.
        #[arg(long)]
        system: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value = "ordinary")]
        family: String,
        #[arg(long, default_value = "zero")]
        gauge: String,
        #[arg(long, allow_hyphen_values = true)]
        lo: Option<i64>,
        #[arg(long, allow_hyphen_values = true)]
        hi: Option<i64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        bind: Vec<String>,
        /// Use the undeformed Hamiltonians.
        #[arg(long)]
        raw: bool,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        q: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p: Vec<f64>,
        /// Box edges `t_begin:t_end` per time, comma separated.
        #[arg(long = "box", value_delimiter = ',', allow_hyphen_values = true)]
        bx: Vec<String>,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Dump the first ordering's trajectory as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Regenerate the golden tables and compare with the shipped copies.
    Reproduce {
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Overwrite the golden files instead of comparing.
        #[arg(long)]
        bless: bool,
    },
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Certification(_) => EXIT_CERTIFY,
        Error::BlowUp(_) | Error::DivisionByZero(_) => EXIT_BLOWUP,
        _ => EXIT_CONFIG,
    }
}

/// Parse and dispatch; never panics on bad input.
pub fn run<I, S>(args: I) -> Outcome
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    match dispatch(&cfg) {
        Ok((code, body)) => match write_out(&cfg, &body) {
            Ok(stdout) => Outcome { code, stdout, stderr: String::new() },
            Err(e) => Outcome { code: exit_code(&e), stdout: String::new(), stderr: format!("error: {e}\n") },
        },
        Err(Failure { code, body, err }) => {
            let stdout = write_out(&cfg, &body).unwrap_or_default();
            Outcome { code, stdout, stderr: format!("error: {err}\n") }
        }
    }
}

fn write_out(cfg: &RunConfig, body: &str) -> Result<String> {
    match &cfg.out {
        Some(p) => {
            let path = resolve_out(p);
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::InvalidConfig(format!("{}: {e}", dir.display())))?;
            }
            std::fs::write(&path, body).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(body.to_string()),
    }
}

fn resolve_out(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(d) if p.is_relative() => PathBuf::from(d).join(p),
        _ => p.to_path_buf(),
    }
}

struct Failure {
    code: i32,
    body: String,
    err: Error,
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure { code: exit_code(&err), body: String::new(), err }
    }
}

type Dispatch = std::result::Result<(i32, String), Failure>;

pub fn dispatch_config(cfg: &RunConfig) -> Result<(i32, String)> {
    dispatch(cfg).map_err(|f| f.err)
}

fn dispatch(cfg: &RunConfig) -> Dispatch {
    let fmt = cfg.format;
    match &cfg.cmd {
        Command::Gen(a) => Ok((EXIT_OK, cmd_gen(a, fmt)?)),
        Command::Deform { sys, free, gauge } => Ok((EXIT_OK, cmd_deform(sys, free.as_deref(), gauge, fmt)?)),
        Command::Check { file } => cmd_check(file, fmt),
        Command::Map { n, m, free, target } => Ok((EXIT_OK, cmd_map(*n, *m, free.as_deref(), target.as_deref(), fmt)?)),
        Command::Painleve { target, show_derivation } => cmd_painleve(target, *show_derivation, fmt),
        Command::Simulate { .. } => cmd_simulate(&cfg.cmd, fmt),
        Command::Reproduce { golden, bless } => cmd_reproduce(golden.as_deref(), *bless, fmt),
    }
}

/// `a4` → `a[4]`, `a-1` → `a[-1]`; bracketed names pass through.
pub fn normalize_param(s: &str) -> String {
    let s = s.trim();
    if s.contains('[') || s == "bbar" {
        return s.to_string();
    }
    let mut chars = s.chars();
    match chars.next() {
        Some(c @ ('a' | 'b')) => {
            let rest: String = chars.collect();
            if !rest.is_empty() && rest.parse::<i64>().is_ok() {
                format!("{c}[{rest}]")
            } else {
                s.to_string()
            }
        }
        _ => s.to_string(),
    }
}

/// Exact value: a coefficient expression, or a decimal converted exactly.
pub fn parse_value(s: &str) -> Result<CoeffExpr> {
    if let Ok(c) = s.parse::<CoeffExpr>() {
        return Ok(c);
    }
    let x: f64 = s.trim().parse().map_err(|_| Error::Parse(format!("cannot parse value {s:?}")))?;
    let q = BigRational::from_float(x).ok_or_else(|| Error::Parse(format!("value {s:?} is not finite")))?;
    Ok(CoeffExpr::from_q(q))
}

pub fn parse_bindings(items: &[String]) -> Result<BTreeMap<String, CoeffExpr>> {
    let mut out = BTreeMap::new();
    for it in items {
        let (k, v) = it.split_once('=').ok_or_else(|| Error::Parse(format!("binding {it:?} is not name=value")))?;
        out.insert(normalize_param(k), parse_value(v)?);
    }
    Ok(out)
}

fn family_of(a: &SystemArgs) -> Result<Family> {
    match (&a.family, a.ordinary, a.magnetic, a.geodesic) {
        (Some(f), ..) => f.parse(),
        (None, true, _, _) => Ok(Family::Ordinary),
        (None, _, true, _) => Ok(Family::Magnetic),
        (None, _, _, true) => Ok(Family::Geodesic),
        _ => Err(Error::InvalidConfig("choose a family (--family, --ordinary, --magnetic or --geodesic)".into())),
    }
}

pub fn system_spec(a: &SystemArgs) -> Result<SystemSpec> {
    let fam = family_of(a)?;
    let spec = match fam {
        Family::Geodesic => SystemSpec::geodesic(a.n, a.m),
        Family::Ordinary => {
            let (lo, hi) = ordinary_bounds(a.n, a.m);
            SystemSpec::ordinary_range(a.n, a.m, a.lo.unwrap_or(lo), a.hi.unwrap_or(hi))
        }
        Family::Magnetic => SystemSpec::magnetic(a.n, a.m, a.gmax.unwrap_or(a.n as i64 + 1)),
    };
    spec.validate()?;
    Ok(spec)
}

fn fmt_unsupported(cmd: &str, fmt: Format) -> Error {
    Error::InvalidConfig(format!("{cmd} has no {fmt:?} output").to_lowercase())
}

fn to_json_string(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_gen(a: &SystemArgs, fmt: Format) -> Result<String> {
    let spec = system_spec(a)?;
    let binds = parse_bindings(&a.bind)?;
    let coeffs: BTreeMap<i64, CoeffExpr> = spec
        .exponents
        .iter()
        .map(|al| (*al, CoeffExpr::param(&crate::frobenius::constant_symbol(&spec, *al))))
        .collect();
    let h: Vec<PhaseExpr> = if spec.family == Family::Geodesic {
        (1..=spec.n).map(|r| ecal(spec.n, spec.m, r as i64)).collect::<Result<_>>()?
    } else {
        assemble(&spec, &coeffs)?
    };
    let h: Vec<PhaseExpr> = h.iter().map(|x| x.subst_params(&binds)).collect();
    let name = if spec.family == Family::Geodesic { "E" } else { "h" };
    Ok(match fmt {
        Format::Text => h.iter().enumerate().map(|(r, x)| format!("{name}_{} = {x}\n", r + 1)).collect(),
        Format::Latex => {
            let sym = if spec.family == Family::Geodesic { "\\mathcal{E}" } else { "h" };
            h.iter().enumerate().map(|(r, x)| format!("{sym}_{{{}}} = {}\n", r + 1, x.to_latex())).collect()
        }
        Format::Json => to_json_string(&json!({
            "spec": spec,
            "hamiltonians": h.iter().map(|x| x.to_json()).collect::<Vec<_>>(),
            "text": h.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
        })),
        Format::Csv => {
            let mut s = String::from("r,hamiltonian\n");
            for (r, x) in h.iter().enumerate() {
                let _ = writeln!(s, "{},{}", r + 1, csv_field(&x.to_string()));
            }
            s
        }
    })
}

/// Solve a family with a gauge name and bindings.
pub fn solve_named(spec: &SystemSpec, free: Option<&[String]>, gauge: &str, bind: &BTreeMap<String, CoeffExpr>) -> Result<DeformedSystem> {
    let free = free.map(|f| f.iter().map(|x| normalize_param(x)).collect::<Vec<_>>());
    let (g, mut binds) = match gauge {
        "zero" => (Gauge::Zero, BTreeMap::new()),
        "solve" => (Gauge::Solve, BTreeMap::new()),
        other => {
            let p = gauge_preset(other).ok_or_else(|| Error::InvalidConfig(format!("unknown gauge {other}")))?;
            if (p.n, p.m) != (spec.n, spec.m) {
                return Err(Error::InvalidConfig(format!("gauge {other} is for n = {}, m = {}", p.n, p.m)));
            }
            (Gauge::Explicit(p.tails), p.bindings)
        }
    };
    binds.extend(bind.iter().map(|(k, v)| (k.clone(), v.clone())));
    let sys = solve_deformation(spec, &SolveOptions { free, gauge: g })?;
    Ok(if binds.is_empty() { sys } else { sys.subst_params(&binds) })
}

fn coeff_name(spec: &SystemSpec, a: i64) -> String {
    match spec.family {
        Family::Magnetic => format!("d[{a}]"),
        _ => format!("c[{a}]"),
    }
}

fn cmd_deform(a: &SystemArgs, free: Option<&[String]>, gauge: &str, fmt: Format) -> Result<String> {
    let spec = system_spec(a)?;
    let sys = solve_named(&spec, free, gauge, &parse_bindings(&a.bind)?)?;
    Ok(match fmt {
        Format::Json => {
            let mut v = serde_json::to_value(sys.to_file()).expect("system files serialize");
            v["certificate"] = certify(&sys).to_json();
            to_json_string(&v)
        }
        Format::Text => {
            let mut s = String::new();
            for (al, c) in &sys.coeff_fns {
                let _ = writeln!(s, "{} = {c}", coeff_name(&spec, *al));
            }
            for (r, row) in sys.zeta.iter().enumerate() {
                let row: Vec<String> = row.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(s, "zeta[{}] = [{}]", r + 1, row.join(", "));
            }
            s
        }
        Format::Latex => {
            let mut s = String::new();
            let sym = if spec.family == Family::Magnetic { "d" } else { "c" };
            for (al, c) in &sys.coeff_fns {
                let _ = writeln!(s, "{sym}_{{{al}}} = {}", c.to_latex());
            }
            for (r, h) in sys.h.iter().enumerate() {
                let _ = writeln!(s, "H_{{{}}} = {}", r + 1, h.to_latex());
            }
            s
        }
        Format::Csv => {
            let mut s = String::from("exponent,coefficient\n");
            for (al, c) in &sys.coeff_fns {
                let _ = writeln!(s, "{al},{}", csv_field(&c.to_string()));
            }
            s
        }
    })
}

pub fn load_system(path: &Path) -> Result<DeformedSystem> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    let f: SystemFile = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    DeformedSystem::from_file(&f)
}

fn cmd_check(file: &Path, fmt: Format) -> Dispatch {
    let sys = load_system(file)?;
    let rep = certify(&sys);
    let body = match fmt {
        Format::Json => to_json_string(&rep.to_json()),
        Format::Text | Format::Latex => {
            let mut s = String::new();
            for p in &rep.pairs {
                let status = if p.residual.is_zero() {
                    "zero"
                } else if p.phase_independent {
                    "phase-free"
                } else {
                    "FAIL"
                };
                let _ = writeln!(s, "({}, {}): {status}", p.r, p.s);
            }
            let _ = writeln!(s, "{}", if rep.passes() { "certified" } else { "not certified" });
            s
        }
        Format::Csv => return Err(fmt_unsupported("check", fmt).into()),
    };
    if let Some(p) = rep.first_failure() {
        return Err(Failure {
            code: EXIT_CERTIFY,
            body,
            err: Error::Certification(format!("pair ({}, {}) has residual {}", p.r, p.s, p.residual)),
        });
    }
    Ok((EXIT_OK, body))
}

fn cmd_map(n: usize, m: usize, free: Option<&[String]>, target: Option<&[String]>, fmt: Format) -> Result<String> {
    if let Some(t) = target {
        let binds = parse_bindings(t)?;
        let mut tg = BTreeMap::new();
        for (k, v) in binds {
            let a = k
                .strip_prefix("a[")
                .and_then(|r| r.strip_suffix(']'))
                .and_then(|r| r.parse::<i64>().ok())
                .ok_or_else(|| Error::InvalidConfig(format!("target {k} is not an ordinary parameter")))?;
            tg.insert(a, v);
        }
        let verdict = obstruction(n, m, &tg)?;
        return Ok(render_verdict(&verdict, fmt));
    }
    let free = free.map(|f| f.iter().map(|x| normalize_param(x)).collect::<Vec<_>>());
    let sol = theorem_pde(n, m, free.as_deref())?;
    let map = build_map(n, m, sol.d.clone(), default_e(n, m))?;
    let pm = param_map_for(&map)?;
    let ord = solve_deformation(&SystemSpec::ordinary(n, m), &SolveOptions::default())?;
    let eq = verify_equivalence(&ord, &map.magnetic_hamiltonians()?, &map)?;
    Ok(match fmt {
        Format::Json => to_json_string(&json!({
            "n": n, "m": m,
            "d": sol.d.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "e": map.e.to_string(),
            "equations": sol.equations.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
            "shift": map.shift.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "df": map.df.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "parameter_map": pm.a.iter().map(|(a, c)| (a.to_string(), c.to_string())).collect::<BTreeMap<_, _>>(),
            "equivalent": eq.holds,
            "tails": eq.tail_coeffs.iter().map(|(a, c)| (a.to_string(), c.to_string())).collect::<BTreeMap<_, _>>(),
        })),
        Format::Text => {
            let mut s = String::new();
            for e in &sol.equations {
                let _ = writeln!(s, "{e}");
            }
            for (g, d) in sol.d.iter().enumerate() {
                let _ = writeln!(s, "d[{g}] = {d}");
            }
            let _ = writeln!(s, "e = {}", map.e);
            for (a, c) in &pm.a {
                let _ = writeln!(s, "a[{a}] = {c}");
            }
            let _ = writeln!(s, "equivalent: {}", eq.holds);
            s
        }
        Format::Latex => {
            let mut s = String::new();
            for (g, d) in sol.d.iter().enumerate() {
                let _ = writeln!(s, "d_{{{g}}} = {}", d.to_latex());
            }
            let _ = writeln!(s, "e = {}", map.e.to_latex());
            for (a, c) in &pm.a {
                let _ = writeln!(s, "{} = {}", param_latex(&format!("a[{a}]")), c.to_latex());
            }
            s
        }
        Format::Csv => return Err(fmt_unsupported("map", fmt)),
    })
}

fn render_verdict(v: &Verdict, fmt: Format) -> String {
    match (v, fmt) {
        (Verdict::Solvable { b, radicals }, Format::Json) => to_json_string(&json!({
            "exists": true,
            "b": b.iter().map(|(k, c)| (k.clone(), c.to_string())).collect::<BTreeMap<_, _>>(),
            "radicals": radicals.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
        })),
        (Verdict::Unsolvable { witness }, Format::Json) => to_json_string(&json!({
            "exists": false,
            "witness": {
                "alpha": witness.alpha,
                "equation": witness.equation,
                "reduced": witness.reduced,
                "assignments": witness.assignments.iter().map(|(k, c)| format!("{k} = {c}")).collect::<Vec<_>>(),
            }
        })),
        (Verdict::Solvable { b, radicals }, _) => {
            let mut s = String::from("magnetic representation exists\n");
            for (k, c) in b {
                let _ = writeln!(s, "{k} = {c}");
            }
            for r in radicals {
                let _ = writeln!(s, "{r}");
            }
            s
        }
        (Verdict::Unsolvable { witness }, _) => {
            let mut s = String::from("no magnetic representation\n");
            for (k, c) in &witness.assignments {
                let _ = writeln!(s, "forced: {k} = {c}");
            }
            let _ = writeln!(s, "a[{}]: {} reduces to {}", witness.alpha, witness.equation, witness.reduced);
            s
        }
    }
}

fn cmd_painleve(target: &str, show: bool, fmt: Format) -> Dispatch {
    let t: Target = target.parse().map_err(|_| Error::InvalidConfig(format!("unknown target {target}")))?;
    let sp = specialize(t)?;
    let mag = if t == Target::PIII { None } else { Some(magnetic_rep_check(t)?) };
    let body = match fmt {
        Format::Json => to_json_string(&json!({
            "target": t.to_string(),
            "matches": sp.matches,
            "result": sp.result.to_text(),
            "scale": sp.scale.as_ref().map(|sc| format!("{}^{} = {}", sc.name, sc.degree, sc.value)),
            "expected": sp.expected.to_text(),
            "stages": sp.stages.iter().map(|s| json!({"label": s.label, "text": s.ode.to_text(), "latex": s.ode.to_latex()})).collect::<Vec<_>>(),
            "magnetic": mag.as_ref().map(|v| serde_json::from_str::<serde_json::Value>(&render_verdict(v, Format::Json)).expect("verdict json")),
        })),
        Format::Latex | Format::Text => {
            let latex = fmt == Format::Latex || show;
            let r = |o: &crate::painleve::OdeExpr| if latex { o.to_latex() } else { o.to_text() };
            let mut s = String::new();
            if show {
                for st in &sp.stages {
                    let _ = writeln!(s, "% {}\n{}", st.label, r(&st.ode));
                }
            } else {
                let _ = writeln!(s, "{}", r(&sp.result));
            }
            if let Some(sc) = &sp.scale {
                let _ = writeln!(s, "{} {}^{} = {}", if latex { "%" } else { "#" }, sc.name, sc.degree, sc.value);
            }
            let _ = writeln!(s, "{} {}", if latex { "%" } else { "#" }, if sp.matches { format!("{t}: exact match") } else { format!("{t}: MISMATCH") });
            if let Some(v) = &mag {
                for line in render_verdict(v, Format::Text).lines() {
                    let _ = writeln!(s, "{} {line}", if latex { "%" } else { "#" });
                }
            }
            s
        }
        Format::Csv => return Err(fmt_unsupported("painleve", fmt).into()),
    };
    if !sp.matches {
        return Err(Failure { code: EXIT_CERTIFY, body, err: Error::Certification(format!("{t} does not match its normal form")) });
    }
    Ok((EXIT_OK, body))
}

fn parse_box(items: &[String], n: usize) -> Result<Vec<(f64, f64)>> {
    if items.is_empty() {
        return Ok(vec![(0.0, 0.1); n]);
    }
    if items.len() != n {
        return Err(Error::InvalidConfig(format!("--box needs {n} intervals")));
    }
    items
        .iter()
        .map(|s| {
            let (a, b) = s.split_once(':').ok_or_else(|| Error::Parse(format!("interval {s:?} is not a:b")))?;
            let a: f64 = a.parse().map_err(|_| Error::Parse(format!("bad number {a:?}")))?;
            let b: f64 = b.parse().map_err(|_| Error::Parse(format!("bad number {b:?}")))?;
            Ok((a, b))
        })
        .collect()
}

fn cmd_simulate(cmd: &Command, fmt: Format) -> Dispatch {
    let Command::Simulate { system, n, m, family, gauge, lo, hi, bind, raw, q, p, bx, h, csv } = cmd else { unreachable!() };
    let binds = parse_bindings(bind)?;
    let hams: Vec<PhaseExpr> = match (system, n, m) {
        (Some(f), _, _) => load_system(f)?.subst_params(&binds).h,
        (None, Some(n), Some(m)) => {
            let args = SystemArgs {
                n: *n,
                m: *m,
                family: Some(family.clone()),
                ordinary: false,
                magnetic: false,
                geodesic: false,
                lo: *lo,
                hi: *hi,
                gmax: None,
                bind: vec![],
            };
            let spec = system_spec(&args)?;
            if *raw {
                let coeffs: BTreeMap<i64, CoeffExpr> = spec
                    .exponents
                    .iter()
                    .map(|al| (*al, CoeffExpr::param(&crate::frobenius::constant_symbol(&spec, *al))))
                    .collect();
                assemble(&spec, &coeffs)?.iter().map(|x| x.subst_params(&binds)).collect()
            } else {
                solve_named(&spec, None, gauge, &binds)?.h
            }
        }
        _ => return Err(Error::InvalidConfig("give --system or both --n and --m".into()).into()),
    };
    let dim = hams[0].n();
    if q.len() != dim || p.len() != dim {
        return Err(Error::InvalidConfig(format!("--q and --p need {dim} values")).into());
    }
    let bxv = parse_box(bx, dim)?;
    let fl = CompiledFlows::new(&hams, &|_| None)?;
    let start = PhasePoint::new(q.clone(), p.clone(), bxv.iter().map(|b| b.0).collect());
    let rep = path_independence_flows(&fl, &start, &bxv, *h)?;
    if let Some(path) = csv {
        let order: Vec<usize> = (0..dim).collect();
        let tp = TimePath::box_path(&bxv, &order, *h);
        let tr = integrate_flows(&fl, &tp, &start, IntegrateOptions { record: true, ..Default::default() })?;
        let mut s = String::new();
        let head: Vec<String> = (1..=dim)
            .map(|i| format!("t{i}"))
            .chain((1..=dim).map(|i| format!("q{i}")))
            .chain((1..=dim).map(|i| format!("p{i}")))
            .collect();
        let _ = writeln!(s, "{}", head.join(","));
        for pt in tr.samples.unwrap_or_default() {
            let row: Vec<String> = pt.t.iter().chain(&pt.q).chain(&pt.p).map(|x| format!("{x:e}")).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        let path = resolve_out(path);
        std::fs::write(&path, s).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    }
    let drift: Vec<f64> = (0..dim)
        .map(|r| {
            let seg = TimePath { segments: vec![crate::multitime::Segment { r, start: bxv[r].0, end: bxv[r].1 }], h: *h };
            integrate_flows(&fl, &seg, &start, IntegrateOptions::default())
                .map(|t| t.drift.first().map_or(0.0, |d| d.h_end - d.h_start))
        })
        .collect::<Result<_>>()?;
    Ok((
        EXIT_OK,
        match fmt {
            Format::Json => to_json_string(&json!({
                "discrepancy": rep.discrepancy,
                "steps": rep.steps,
                "orderings": rep.orderings.iter().map(|o| o.iter().map(|r| r + 1).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "endpoints": rep.endpoints,
                "drift": drift,
            })),
            Format::Text => {
                let mut s = format!("discrepancy = {:e}\n", rep.discrepancy);
                for (o, e) in rep.orderings.iter().zip(&rep.endpoints) {
                    let _ = writeln!(s, "order {:?}: q = {:?}, p = {:?}", o.iter().map(|r| r + 1).collect::<Vec<_>>(), e.q, e.p);
                }
                for (r, d) in drift.iter().enumerate() {
                    let _ = writeln!(s, "H_{} change along t_{}: {d:e}", r + 1, r + 1);
                }
                s
            }
            Format::Csv => {
                let mut s = String::from("ordering,");
                let head: Vec<String> = (1..=dim).map(|i| format!("q{i}")).chain((1..=dim).map(|i| format!("p{i}"))).collect();
                let _ = writeln!(s, "{}", head.join(","));
                for (o, e) in rep.orderings.iter().zip(&rep.endpoints) {
                    let name: Vec<String> = o.iter().map(|r| (r + 1).to_string()).collect();
                    let row: Vec<String> = e.q.iter().chain(&e.p).map(|x| format!("{x:e}")).collect();
                    let _ = writeln!(s, "{},{}", name.join("-"), row.join(","));
                }
                s
            }
            Format::Latex => return Err(fmt_unsupported("simulate", fmt).into()),
        },
    ))
}

/// Directory shipped with the crate.
pub fn default_golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("golden")
}

fn system_table(sys: &DeformedSystem) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} n={} m={} gauge={}", sys.spec.family, sys.spec.n, sys.spec.m, sys.gauge);
    for (al, c) in &sys.coeff_fns {
        let _ = writeln!(s, "{} = {c}", coeff_name(&sys.spec, *al));
    }
    for (r, row) in sys.zeta.iter().enumerate() {
        let row: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "zeta[{}] = [{}]", r + 1, row.join(", "));
    }
    let rep = certify(sys);
    let _ = writeln!(s, "certified = {}", rep.exact_zero());
    s
}

/// All regenerated tables, keyed by file name.
pub fn golden_tables() -> Result<BTreeMap<String, String>> {
    use rayon::prelude::*;
    let mut jobs: Vec<(String, SystemSpec)> = Vec::new();
    for n in 2..=3usize {
        for m in 0..=n + 1 {
            jobs.push((format!("ordinary_n{n}_m{m}.txt"), SystemSpec::ordinary(n, m)));
            jobs.push((format!("magnetic_n{n}_m{m}.txt"), SystemSpec::magnetic(n, m, n as i64 + 1)));
            jobs.push((format!("geodesic_n{n}_m{m}.txt"), SystemSpec::geodesic(n, m)));
        }
    }
    let mut out: BTreeMap<String, String> = jobs
        .par_iter()
        .map(|(name, spec)| solve_deformation(spec, &SolveOptions::default()).map(|s| (name.clone(), system_table(&s))))
        .collect::<Result<_>>()?;
    let maps: Vec<(String, String)> = (2..=3usize)
        .flat_map(|n| (0..=n + 1).map(move |m| (n, m)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(n, m)| -> Result<(String, String)> {
            let sol = theorem_pde(n, m, None)?;
            let map = build_map(n, m, sol.d.clone(), default_e(n, m))?;
            let pm = param_map_for(&map)?;
            let mut s = format!("# canonical map n={n} m={m}\n");
            for (g, d) in sol.d.iter().enumerate() {
                let _ = writeln!(s, "d[{g}] = {d}");
            }
            let _ = writeln!(s, "e = {}", map.e);
            for (a, c) in &pm.a {
                let _ = writeln!(s, "a[{a}] = {c}");
            }
            Ok((format!("canonical_n{n}_m{m}.txt"), s))
        })
        .collect::<Result<_>>()?;
    out.extend(maps);
    let mut s = String::new();
    for t in [Target::PI, Target::PII, Target::PIII, Target::PIV] {
        let sp = specialize(t)?;
        let _ = writeln!(s, "{t}: {} [{}]", sp.result.to_text(), if sp.matches { "match" } else { "mismatch" });
    }
    out.insert("painleve.txt".into(), s);
    Ok(out)
}

fn cmd_reproduce(golden: Option<&Path>, bless: bool, fmt: Format) -> Dispatch {
    let dir = golden.map(Path::to_path_buf).unwrap_or_else(default_golden_dir);
    let tables = golden_tables()?;
    if let Some(out) = std::env::var_os(OUT_DIR_ENV) {
        let out = PathBuf::from(out);
        std::fs::create_dir_all(&out).map_err(|e| Error::InvalidConfig(format!("{}: {e}", out.display())))?;
        for (name, body) in &tables {
            std::fs::write(out.join(name), body).map_err(|e| Error::InvalidConfig(format!("{name}: {e}")))?;
        }
    }
    if bless {
        std::fs::create_dir_all(&dir).map_err(|e| Error::InvalidConfig(format!("{}: {e}", dir.display())))?;
        for (name, body) in &tables {
            std::fs::write(dir.join(name), body).map_err(|e| Error::InvalidConfig(format!("{name}: {e}")))?;
        }
        return Ok((EXIT_OK, format!("wrote {} tables to {}\n", tables.len(), dir.display())));
    }
    let mut results: Vec<(String, &'static str)> = Vec::new();
    for (name, body) in &tables {
        let status = match std::fs::read_to_string(dir.join(name)) {
            Ok(old) if &old == body => "same",
            Ok(_) => "differs",
            Err(_) => "missing",
        };
        results.push((name.clone(), status));
    }
    let bad: Vec<&(String, &str)> = results.iter().filter(|(_, s)| *s != "same").collect();
    let body = match fmt {
        Format::Json => to_json_string(&json!({
            "tables": results.iter().map(|(n, s)| json!({"file": n, "status": s})).collect::<Vec<_>>(),
            "ok": bad.is_empty(),
        })),
        Format::Csv => {
            let mut s = String::from("file,status\n");
            for (n, st) in &results {
                let _ = writeln!(s, "{n},{st}");
            }
            s
        }
        _ => {
            let mut s = String::new();
            for (n, st) in &results {
                let _ = writeln!(s, "{n}: {st}");
            }
            s
        }
    };
    if bad.is_empty() {
        Ok((EXIT_OK, body))
    } else {
        Err(Failure {
            code: EXIT_CERTIFY,
            body,
            err: Error::Certification(format!("{} golden table(s) differ or are missing", bad.len())),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shorthand_parameters() {
        assert_eq!(normalize_param("a5"), "a[5]");
        assert_eq!(normalize_param("a-1"), "a[-1]");
        assert_eq!(normalize_param("b[2]"), "b[2]");
        assert_eq!(normalize_param("bbar"), "bbar");
        assert_eq!(normalize_param("alpha"), "alpha");
    }

    #[test]
    fn decimal_values_are_exact() {
        assert_eq!(parse_value("0.25").unwrap(), crate::cf("1/4"));
        assert_eq!(parse_value("-1/3").unwrap(), crate::cf("-1/3"));
        assert!(parse_value("x=").is_err());
    }

    #[test]
    fn bad_arguments_exit_two() {
        assert_eq!(run(["qstackel", "gen", "--n", "0", "--m", "0", "--geodesic"]).code, EXIT_CONFIG);
        assert_eq!(run(["qstackel", "frobnicate"]).code, EXIT_CONFIG);
    }
}
