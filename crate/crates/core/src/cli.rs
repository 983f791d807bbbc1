//! Command-line front end.
//!
//! Input files are line oriented, with sections `[params]`, `[liealg]`,
//! `[lca]` and `[pva]` and `#` comments:
//!
//! ```text
//! [params]
//! c                  # formal parameter
//! k = 1              # assignment
//!
//! [liealg]
//! basis e even
//! bracket[e,f] = h
//! form[e,f] = 1
//!
//! [lca]
//! gen L even 2       # optional: zeta=Q charge=N
//! hamiltonian true
//! bracket L L = T(L) + 2*lam*L + c/12*lam^3
//!
//! [pva]
//! gen u even 1
//! bracket u u = lam
//! functional h2 = (u^3 - u'^2)/2
//! ```
//!
//! Exit codes: 0 success, 1 an identity or check failed, 2 usage, parse
//! or validation error.

use crate::constructions::{dirac, Dirac};
use crate::liealg::{builtin, grading_from_pair, principal_pair, Elem, LieAlgData};
use crate::pva::{
    gfz_hamiltonian, hamiltonian_flow, involution, pva_zhu, reduce_mod_t, weil_corner, LamPoly, PvaExpr, PvaGen,
    PvaSpec,
};
use crate::scalar::{Rat, Scalar};
use crate::terms::{parse_literal, psign, Expr, GeneratorDecl, LambdaExpr, Parity, ParseEnv, Registry, TermsError};
use crate::walgebra::{
    build_complex, finite_w, reduced_spec, solve_generators, virasoro_shape, w_spec, whittaker_invariants,
};
use crate::wick::{check_jacobi, check_skewsymmetry, Engine, LcaSpec};
use crate::zhu::{ZhuAlgebra, ZhuExpr};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use std::collections::{BTreeSet, HashMap};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

pub const FORMAT_VERSION: u32 = 1;
pub const THREADS_VAR: &str = "LAMBDA_FORGE_THREADS";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{0}")]
    Usage(String),
}

fn perr(line: usize, col: usize, msg: impl Into<String>) -> CliError {
    CliError::Parse { line, col, msg: msg.into() }
}

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

/// A `[pva]` section: the algebra plus named local functionals.
#[derive(Clone, Debug, PartialEq)]
pub struct PvaDoc {
    pub spec: PvaSpec,
    pub functionals: Vec<(String, PvaExpr)>,
}

/// Parsed input file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Document {
    /// Declared parameters, with their values when assigned.
    pub params: Vec<(String, Option<Scalar>)>,
    pub liealg: Option<LieAlgData>,
    pub lca: Option<LcaSpec>,
    pub pva: Option<PvaDoc>,
}

impl Document {
    pub fn assignments(&self) -> HashMap<String, Scalar> {
        self.params.iter().filter_map(|(n, v)| v.clone().map(|v| (n.clone(), v))).collect()
    }

    /// The `[lca]` section with assigned parameters substituted.
    pub fn lca_specialized(&self) -> Result<Option<LcaSpec>, CliError> {
        let Some(spec) = &self.lca else { return Ok(None) };
        let a = self.assignments();
        if a.is_empty() {
            return Ok(Some(spec.clone()));
        }
        spec.substitute(&a).map(Some).map_err(|e| CliError::Validation(e.to_string()))
    }
}

struct Line<'a> {
    no: usize,
    /// Byte offset of `text` inside the raw line.
    offset: usize,
    text: &'a str,
}

/// Split `key rest` at the first `=`; returns the trimmed left part and the
/// right part with its column.
fn split_eq<'a>(l: &Line<'a>) -> Result<(&'a str, &'a str, usize), CliError> {
    let i = l.text.find('=').ok_or_else(|| perr(l.no, l.offset + 1, "expected `=`"))?;
    let rhs = &l.text[i + 1..];
    let lead = rhs.len() - rhs.trim_start().len();
    Ok((l.text[..i].trim(), rhs.trim(), l.offset + i + 2 + lead))
}

fn parse_parity(s: &str, l: &Line) -> Result<Parity, CliError> {
    match s {
        "even" => Ok(Parity::Even),
        "odd" => Ok(Parity::Odd),
        _ => Err(perr(l.no, l.offset + 1, format!("expected `even` or `odd`, found `{s}`"))),
    }
}

fn parse_rat(s: &str, l: &Line) -> Result<Rat, CliError> {
    Scalar::parse(s)
        .ok()
        .and_then(|x| x.as_rat())
        .ok_or_else(|| perr(l.no, l.offset + 1, format!("expected a rational number, found `{s}`")))
}

fn terms_err(e: TermsError, l: &Line, col: usize) -> CliError {
    match e {
        TermsError::Parse { pos, msg } => perr(l.no, col + pos, msg),
        other => perr(l.no, col, other.to_string()),
    }
}

/// Parse a whole input file.  With `strict`, skewsymmetry of the given
/// tables is checked eagerly.
pub fn parse_document(text: &str, strict: bool) -> Result<Document, CliError> {
    let mut sections: Vec<(String, usize, Vec<Line>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        let trimmed = body.trim();
        if trimmed.is_empty() {
            continue;
        }
        let offset = body.len() - body.trim_start().len();
        if trimmed.starts_with('[') && trimmed.ends_with(']') && !trimmed.contains('=') {
            let name = trimmed[1..trimmed.len() - 1].trim().to_string();
            if !["params", "liealg", "lca", "pva"].contains(&name.as_str()) {
                return Err(perr(no, offset + 1, format!("unknown section `[{name}]`")));
            }
            if sections.iter().any(|s| s.0 == name) {
                return Err(perr(no, offset + 1, format!("duplicate section `[{name}]`")));
            }
            sections.push((name, no, Vec::new()));
            continue;
        }
        let Some(cur) = sections.last_mut() else {
            return Err(perr(no, offset + 1, "content before the first section header"));
        };
        cur.2.push(Line { no, offset, text: trimmed });
    }
    let mut doc = Document::default();
    if let Some((_, _, lines)) = sections.iter().find(|s| s.0 == "params") {
        for l in lines {
            let (name, val) = match l.text.find('=') {
                Some(_) => {
                    let (n, v, col) = split_eq(l)?;
                    let s = Scalar::parse(v).map_err(|e| perr(l.no, col, e.to_string()))?;
                    (n.to_string(), Some(s))
                }
                None => (l.text.to_string(), None),
            };
            if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') || name.is_empty() {
                return Err(perr(l.no, l.offset + 1, format!("bad parameter name `{name}`")));
            }
            doc.params.push((name, val));
        }
    }
    let declared: BTreeSet<String> = doc.params.iter().map(|p| p.0.clone()).collect();
    for (name, _, lines) in &sections {
        match name.as_str() {
            "liealg" => doc.liealg = Some(parse_liealg(lines)?),
            "lca" => doc.lca = Some(parse_lca(lines, &declared, strict)?),
            "pva" => doc.pva = Some(parse_pva(lines, strict)?),
            _ => {}
        }
    }
    Ok(doc)
}

fn linear_parser(names: &[String]) -> PvaSpec {
    let gens = names.iter().map(|n| PvaGen::new(n, Parity::Even, None)).collect();
    PvaSpec::new(gens, vec![]).expect("distinct names")
}

fn parse_elem(text: &str, names: &[String], line: usize, col: usize) -> Result<Elem, CliError> {
    let p = linear_parser(names);
    let e = p.parse_expr(text).map_err(|e| perr(line, col, e.to_string()))?;
    let mut out = vec![Scalar::zero(); names.len()];
    for (m, c) in e.iter() {
        match m.0.as_slice() {
            [v] if v.order == 0 => out[v.gen] = c.clone(),
            _ => return Err(perr(line, col, format!("`{text}` is not a linear combination of basis vectors"))),
        }
    }
    Ok(out)
}

fn index_pair<'a>(key: &'a str, head: &str, l: &Line) -> Result<(&'a str, &'a str), CliError> {
    let inner = key
        .strip_prefix(head)
        .and_then(|r| r.trim().strip_prefix('['))
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| perr(l.no, l.offset + 1, format!("expected `{head}[a,b]`")))?;
    let mut it = inner.split(',');
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) => Ok((a.trim(), b.trim())),
        _ => Err(perr(l.no, l.offset + 1, format!("expected `{head}[a,b]`"))),
    }
}

fn parse_liealg(lines: &[Line]) -> Result<LieAlgData, CliError> {
    let mut names = Vec::new();
    let mut parity = Vec::new();
    for l in lines.iter().filter(|l| l.text.starts_with("basis ")) {
        let w: Vec<&str> = l.text.split_whitespace().collect();
        if w.len() != 3 {
            return Err(perr(l.no, l.offset + 1, "expected `basis NAME PARITY`"));
        }
        if names.iter().any(|n| n == w[1]) {
            return Err(perr(l.no, l.offset + 1, format!("duplicate basis vector `{}`", w[1])));
        }
        names.push(w[1].to_string());
        parity.push(parse_parity(w[2], l)?);
    }
    let n = names.len();
    let idx = |s: &str, l: &Line| {
        names.iter().position(|x| x == s).ok_or_else(|| perr(l.no, l.offset + 1, format!("unknown basis vector `{s}`")))
    };
    let mut bracket: Vec<Vec<Option<Elem>>> = vec![vec![None; n]; n];
    let mut form: Vec<Vec<Option<Scalar>>> = vec![vec![None; n]; n];
    for l in lines.iter().filter(|l| !l.text.starts_with("basis ")) {
        let (key, rhs, col) = split_eq(l)?;
        if key.starts_with("bracket") {
            let (a, b) = index_pair(key, "bracket", l)?;
            let (i, j) = (idx(a, l)?, idx(b, l)?);
            bracket[i][j] = Some(parse_elem(rhs, &names, l.no, col)?);
        } else if key.starts_with("form") {
            let (a, b) = index_pair(key, "form", l)?;
            let (i, j) = (idx(a, l)?, idx(b, l)?);
            form[i][j] = Some(Scalar::parse(rhs).map_err(|e| perr(l.no, col, e.to_string()))?);
        } else {
            return Err(perr(l.no, l.offset + 1, format!("unexpected `{key}` in [liealg]")));
        }
    }
    let zero = vec![Scalar::zero(); n];
    let mut br = vec![vec![zero.clone(); n]; n];
    let mut fm = vec![vec![Scalar::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let s = Scalar::from_int(-psign(parity[i], parity[j]));
            br[i][j] = match (&bracket[i][j], &bracket[j][i]) {
                (Some(x), _) => x.clone(),
                (None, Some(y)) => y.iter().map(|c| c * &s).collect(),
                _ => zero.clone(),
            };
            let t = Scalar::from_int(psign(parity[i], parity[j]));
            fm[i][j] = match (&form[i][j], &form[j][i]) {
                (Some(x), _) => x.clone(),
                (None, Some(y)) => y * &t,
                _ => Scalar::zero(),
            };
        }
    }
    let data = LieAlgData { names, parity, bracket: br, form: fm };
    let bad = data.validate();
    if !bad.is_empty() {
        return Err(CliError::Validation(bad.join("; ")));
    }
    Ok(data)
}

fn parse_lca(lines: &[Line], declared: &BTreeSet<String>, strict: bool) -> Result<LcaSpec, CliError> {
    let mut gens = Vec::new();
    let mut hamiltonian = true;
    for l in lines {
        let w: Vec<&str> = l.text.split_whitespace().collect();
        match w.first().copied() {
            Some("gen") => {
                if w.len() < 4 {
                    return Err(perr(l.no, l.offset + 1, "expected `gen NAME PARITY DELTA`"));
                }
                let mut g = GeneratorDecl::new(w[1], parse_parity(w[2], l)?, parse_rat(w[3], l)?);
                for opt in &w[4..] {
                    match opt.split_once('=') {
                        Some(("zeta", v)) => g = g.with_zeta(parse_rat(v, l)?),
                        Some(("charge", v)) => {
                            g = g.with_charge(v.parse().map_err(|_| perr(l.no, l.offset + 1, "bad charge"))?)
                        }
                        _ => return Err(perr(l.no, l.offset + 1, format!("unknown option `{opt}`"))),
                    }
                }
                gens.push(g);
            }
            Some("hamiltonian") => {
                hamiltonian = match w.get(1).copied() {
                    Some("true") => true,
                    Some("false") => false,
                    _ => return Err(perr(l.no, l.offset + 1, "expected `hamiltonian true|false`")),
                }
            }
            Some("bracket") => {}
            _ => return Err(perr(l.no, l.offset + 1, "expected `gen`, `hamiltonian` or `bracket`")),
        }
    }
    let reg = Registry::new(gens).map_err(|e| CliError::Validation(e.to_string()))?;
    let env = ParseEnv { reg: &reg, params: if declared.is_empty() { None } else { Some(declared) } };
    let mut entries = Vec::new();
    for l in lines.iter().filter(|l| l.text.starts_with("bracket")) {
        let (key, rhs, col) = split_eq(l)?;
        let w: Vec<&str> = key.split_whitespace().collect();
        if w.len() != 3 {
            return Err(perr(l.no, l.offset + 1, "expected `bracket A B = EXPR`"));
        }
        let id = |s: &str| reg.lookup(s).ok_or_else(|| perr(l.no, l.offset + 1, format!("unknown generator `{s}`")));
        let (a, b) = (id(w[1])?, id(w[2])?);
        let br = parse_literal(rhs, &env).map_err(|e| terms_err(e, l, col))?;
        entries.push((a, b, br));
    }
    let spec = LcaSpec::new(reg, entries, hamiltonian)
        .map_err(|e| CliError::Validation(e.to_string()))?
        .with_params(declared.iter().cloned());
    if strict {
        let rep = check_skewsymmetry(&Arc::new(spec.clone()));
        let first = rep.failures().next().map(|f| f.label.clone());
        if let Some(label) = first {
            return Err(CliError::Validation(format!("skewsymmetry fails for {label}")));
        }
    }
    Ok(spec)
}

fn parse_pva(lines: &[Line], strict: bool) -> Result<PvaDoc, CliError> {
    let mut gens = Vec::new();
    for l in lines.iter().filter(|l| l.text.starts_with("gen ")) {
        let w: Vec<&str> = l.text.split_whitespace().collect();
        if !(3..=4).contains(&w.len()) {
            return Err(perr(l.no, l.offset + 1, "expected `gen NAME PARITY [DELTA]`"));
        }
        let d = match w.get(3) {
            Some(s) => Some(parse_rat(s, l)?),
            None => None,
        };
        gens.push(PvaGen::new(w[1], parse_parity(w[2], l)?, d));
    }
    let base = PvaSpec::new(gens.clone(), vec![]).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut entries = Vec::new();
    let mut functionals = Vec::new();
    for l in lines.iter().filter(|l| !l.text.starts_with("gen ")) {
        let (key, rhs, col) = split_eq(l)?;
        let w: Vec<&str> = key.split_whitespace().collect();
        match w.as_slice() {
            ["bracket", a, b] => {
                let id = |s: &str| {
                    base.lookup(s).ok_or_else(|| perr(l.no, l.offset + 1, format!("unknown generator `{s}`")))
                };
                let lp = base.parse_lam(rhs).map_err(|e| pva_perr(e, l, col))?;
                entries.push((id(a)?, id(b)?, lp));
            }
            ["functional", name] => {
                functionals.push((name.to_string(), base.parse_expr(rhs).map_err(|e| pva_perr(e, l, col))?));
            }
            _ => return Err(perr(l.no, l.offset + 1, "expected `bracket A B = ...` or `functional NAME = ...`")),
        }
    }
    let spec = PvaSpec::new(gens, entries).map_err(|e| CliError::Validation(e.to_string()))?;
    if strict {
        if let Some(f) = spec.check_skew().first() {
            return Err(CliError::Validation(f.clone()));
        }
    }
    Ok(PvaDoc { spec, functionals })
}

fn pva_perr(e: crate::pva::PvaError, l: &Line, col: usize) -> CliError {
    match e {
        crate::pva::PvaError::Parse { pos, msg } => perr(l.no, col + pos, msg),
        other => perr(l.no, col, other.to_string()),
    }
}

fn elem_text(a: &Elem, names: &[String]) -> String {
    let mut e = PvaExpr::zero();
    for (i, c) in a.iter().enumerate() {
        e.add_scaled(&PvaExpr::gen(i), c);
    }
    e.display(names).to_string()
}

/// Print a document in the input format.
pub fn print_document(doc: &Document) -> String {
    let mut s = String::new();
    if !doc.params.is_empty() {
        s.push_str("[params]\n");
        for (n, v) in &doc.params {
            match v {
                Some(v) => s.push_str(&format!("{n} = {v}\n")),
                None => s.push_str(&format!("{n}\n")),
            }
        }
        s.push('\n');
    }
    if let Some(data) = &doc.liealg {
        s.push_str("[liealg]\n");
        for (n, p) in data.names.iter().zip(&data.parity) {
            s.push_str(&format!("basis {n} {}\n", p.name()));
        }
        let n = data.dim();
        for i in 0..n {
            for j in i..n {
                if data.bracket[i][j].iter().any(|c| !c.is_zero()) {
                    let (a, b) = (&data.names[i], &data.names[j]);
                    s.push_str(&format!("bracket[{a},{b}] = {}\n", elem_text(&data.bracket[i][j], &data.names)));
                }
            }
        }
        for i in 0..n {
            for j in i..n {
                if !data.form[i][j].is_zero() {
                    s.push_str(&format!("form[{},{}] = {}\n", data.names[i], data.names[j], data.form[i][j]));
                }
            }
        }
        s.push('\n');
    }
    if let Some(spec) = &doc.lca {
        s.push_str("[lca]\n");
        for g in spec.reg.gens() {
            let mut line = format!("gen {} {} {}", g.id, g.parity.name(), g.delta);
            let def = GeneratorDecl::new(&g.id, g.parity, g.delta.clone());
            if g.zeta != def.zeta {
                line.push_str(&format!(" zeta={}", g.zeta));
            }
            if g.charge != 0 {
                line.push_str(&format!(" charge={}", g.charge));
            }
            s.push_str(&line);
            s.push('\n');
        }
        if !spec.hamiltonian {
            s.push_str("hamiltonian false\n");
        }
        for (&(a, b), _) in spec.entries() {
            let l = spec.entry_lambda(a, b).unwrap_or_default();
            s.push_str(&format!("bracket {} {} = {}\n", spec.reg.name(a), spec.reg.name(b), l.display(&spec.reg)));
        }
        s.push('\n');
    }
    if let Some(p) = &doc.pva {
        s.push_str("[pva]\n");
        for g in p.spec.gens() {
            match &g.delta {
                Some(d) => s.push_str(&format!("gen {} {} {d}\n", g.name, g.parity.name())),
                None => s.push_str(&format!("gen {} {}\n", g.name, g.parity.name())),
            }
        }
        for (&(a, b), l) in p.spec.entries() {
            s.push_str(&format!("bracket {} {} = {}\n", p.spec.names[a], p.spec.names[b], p.spec.display_lam(l)));
        }
        for (n, e) in &p.functionals {
            s.push_str(&format!("functional {n} = {}\n", p.spec.display_expr(e)));
        }
        s.push('\n');
    }
    while s.ends_with("\n\n") {
        s.pop();
    }
    s
}

pub fn load_document(path: &std::path::Path, strict: bool) -> Result<Document, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    parse_document(&text, strict)
}

// ---------------------------------------------------------------- machine output

pub fn json_expr(e: &Expr, reg: &Registry) -> Value {
    Value::Array(
        e.iter()
            .map(|(m, c)| {
                let mono: Vec<Value> = m.terms().iter().map(|t| json!([reg.name(t.gen as usize), t.tpow])).collect();
                json!([c.to_string(), mono])
            })
            .collect(),
    )
}

pub fn json_lambda(l: &LambdaExpr, reg: &Registry) -> Value {
    Value::Array(l.iter().map(|(k, e)| json!([k, json_expr(e, reg)])).collect())
}

pub fn json_pva(e: &PvaExpr, names: &[String]) -> Value {
    Value::Array(
        e.iter()
            .map(|(m, c)| {
                let mono: Vec<Value> = m.0.iter().map(|v| json!([names[v.gen], v.order])).collect();
                json!([c.to_string(), mono])
            })
            .collect(),
    )
}

pub fn json_lampoly(l: &LamPoly, names: &[String]) -> Value {
    Value::Array(
        l.0.iter().enumerate().filter(|(_, e)| !e.is_zero()).map(|(n, e)| json!([[n], json_pva(e, names)])).collect(),
    )
}

pub fn json_zhu(z: &ZhuExpr, names: &[String]) -> Value {
    Value::Array(
        z.0.iter()
            .map(|(w, c)| {
                let word: Vec<&str> = w.iter().map(|&i| names[i].as_str()).collect();
                json!([c.to_string(), word])
            })
            .collect(),
    )
}

// ---------------------------------------------------------------- arguments

#[derive(Parser, Debug)]
#[command(name = "lambda-forge", version, about = "Exact lambda-bracket calculus, Zhu algebras and W-algebras")]
pub struct Cli {
    /// Emit a JSON tree instead of text.
    #[arg(long, global = true)]
    pub machine: bool,
    /// Parameter assignment `name=value` (repeatable); overrides `[params]`.
    #[arg(long = "param", short = 'p', global = true, value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// More detail in text output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Skewsymmetry and Jacobi identity for the definitions in a file.
    Check { file: PathBuf },
    /// Lambda-bracket of two expressions.
    Ope { file: PathBuf, a: String, b: String },
    /// Normal form of an expression.
    Nf { file: PathBuf, expr: String },
    /// H-twisted Zhu algebra.
    Zhu {
        #[command(subcommand)]
        op: ZhuOp,
    },
    /// W-algebras by quantum Hamiltonian reduction.
    Walg {
        #[command(subcommand)]
        op: WalgOp,
    },
    /// Cubic Dirac operator and its classical Weil-algebra corner.
    Dirac {
        #[arg(long, default_value = "sl2")]
        algebra: String,
    },
    /// Poisson vertex algebras.
    Pva {
        #[command(subcommand)]
        op: PvaOp,
    },
}

#[derive(Subcommand, Debug)]
pub enum ZhuOp {
    /// `pi_Z(A) pi_Z(B)`.
    Product { file: PathBuf, a: String, b: String },
    /// `[pi_Z(A), pi_Z(B)]`.
    Commutator { file: PathBuf, a: String, b: String },
    /// `pi_Z(EXPR)` in PBW form.
    Pi { file: PathBuf, expr: String },
}

#[derive(Args, Debug, Clone)]
pub struct AlgebraArgs {
    /// Built-in name (sl2, sl3) or a file with a `[liealg]` section.
    #[arg(long, default_value = "sl2")]
    pub algebra: String,
    /// Grading element, as a combination of basis vectors (default: principal).
    #[arg(long)]
    pub x: Option<String>,
    /// Nilpotent `f`, as a combination of basis vectors (default: principal).
    #[arg(long)]
    pub f: Option<String>,
    /// Level; formal `k` by default.
    #[arg(long)]
    pub level: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum WalgOp {
    /// The complex: generators, differential, energy-momentum field.
    Build {
        #[command(flatten)]
        alg: AlgebraArgs,
    },
    /// Solve for the W-generators up to a conformal weight.
    Generators {
        #[command(flatten)]
        alg: AlgebraArgs,
        #[arg(long, default_value = "2")]
        maxdelta: String,
    },
    /// Lambda-brackets among the W-generators.
    Bracket {
        #[command(flatten)]
        alg: AlgebraArgs,
        #[arg(long, default_value = "2")]
        maxdelta: String,
    },
    /// Finite W-algebra, computed two ways.
    Finite {
        #[command(flatten)]
        alg: AlgebraArgs,
        #[arg(long, default_value = "2")]
        maxdelta: String,
    },
    /// Graded dimensions of Whittaker invariants against the Slodowy slice.
    Whittaker {
        #[command(flatten)]
        alg: AlgebraArgs,
        #[arg(long, default_value = "4")]
        cutoff: String,
        /// Basis vectors of g_1/2 spanning the isotropic subspace.
        #[arg(long = "l", value_delimiter = ',')]
        l: Vec<String>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct PvaSource {
    /// File with a `[pva]` section.
    pub file: Option<PathBuf>,
    /// Built-in PVA (`gfz`).
    #[arg(long)]
    pub builtin: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum PvaOp {
    /// Hamiltonian flow `{h, u}` of every generator.
    Flow {
        #[command(flatten)]
        src: PvaSource,
        /// Named functional or an expression.
        #[arg(long)]
        h: String,
        /// Restrict to one generator.
        #[arg(long)]
        of: Option<String>,
    },
    /// `{h, g}` modulo total derivatives.
    Involution {
        #[command(flatten)]
        src: PvaSource,
        #[arg(long)]
        h: String,
        #[arg(long)]
        g: String,
    },
    /// Zhu Poisson algebra from the hbar-bracket.
    Zhu {
        #[command(flatten)]
        src: PvaSource,
        #[arg(long, default_value = "1")]
        hbar: String,
    },
}

// ---------------------------------------------------------------- running

/// Outcome of one command.
pub struct Outcome {
    pub ok: bool,
    pub text: String,
    pub result: Value,
}

impl Outcome {
    fn new(ok: bool, text: String, result: Value) -> Self {
        Outcome { ok, text, result }
    }
}

fn cli_params(cli: &Cli) -> Result<Vec<(String, Scalar)>, CliError> {
    cli.params
        .iter()
        .map(|p| {
            let (n, v) = p.split_once('=').ok_or_else(|| usage(format!("expected NAME=VALUE, found `{p}`")))?;
            let v = Scalar::parse(v.trim()).map_err(|e| usage(format!("{p}: {e}")))?;
            Ok((n.trim().to_string(), v))
        })
        .collect()
}

fn with_overrides(mut doc: Document, over: &[(String, Scalar)]) -> Document {
    for (n, v) in over {
        match doc.params.iter_mut().find(|p| &p.0 == n) {
            Some(p) => p.1 = Some(v.clone()),
            None => doc.params.push((n.clone(), Some(v.clone()))),
        }
    }
    doc
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("{THREADS_VAR} must be a positive integer, found `{v}`")))?;
    // a second initialisation in the same process is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parse arguments, run, write the report; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    let name = command_name(&cli.command);
    let res = configure_threads().and_then(|_| execute(&cli));
    match res {
        Ok(o) => {
            if cli.machine {
                let tree = json!({
                    "format": "lambda-forge",
                    "version": FORMAT_VERSION,
                    "command": name,
                    "status": if o.ok { "ok" } else { "fail" },
                    "result": o.result,
                });
                let _ = writeln!(out, "{}", serde_json::to_string_pretty(&tree).unwrap());
            } else {
                let _ = write!(out, "{}", o.text);
            }
            if o.ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            if cli.machine {
                let tree = json!({
                    "format": "lambda-forge",
                    "version": FORMAT_VERSION,
                    "command": name,
                    "status": "error",
                    "error": e.to_string(),
                });
                let _ = writeln!(out, "{}", serde_json::to_string_pretty(&tree).unwrap());
            }
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

fn command_name(c: &Command) -> String {
    match c {
        Command::Check { .. } => "check".into(),
        Command::Ope { .. } => "ope".into(),
        Command::Nf { .. } => "nf".into(),
        Command::Zhu { op } => format!(
            "zhu {}",
            match op {
                ZhuOp::Product { .. } => "product",
                ZhuOp::Commutator { .. } => "commutator",
                ZhuOp::Pi { .. } => "pi",
            }
        ),
        Command::Walg { op } => format!(
            "walg {}",
            match op {
                WalgOp::Build { .. } => "build",
                WalgOp::Generators { .. } => "generators",
                WalgOp::Bracket { .. } => "bracket",
                WalgOp::Finite { .. } => "finite",
                WalgOp::Whittaker { .. } => "whittaker",
            }
        ),
        Command::Dirac { .. } => "dirac".into(),
        Command::Pva { op } => format!(
            "pva {}",
            match op {
                PvaOp::Flow { .. } => "flow",
                PvaOp::Involution { .. } => "involution",
                PvaOp::Zhu { .. } => "zhu",
            }
        ),
    }
}

fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let over = cli_params(cli)?;
    let load = |p: &PathBuf, strict: bool| load_document(p, strict).map(|d| with_overrides(d, &over));
    match &cli.command {
        Command::Check { file } => cmd_check(&load(file, false)?),
        Command::Ope { file, a, b } => {
            let eng = lca_engine(&load(file, true)?)?;
            let (x, y) = (parse_in(&eng, a)?, parse_in(&eng, b)?);
            let br = eng.lambda_bracket(&x, &y);
            let text = format!("{}\n", br.display(eng.reg()));
            Ok(Outcome::new(true, text, json!({ "bracket": json_lambda(&br, eng.reg()) })))
        }
        Command::Nf { file, expr } => {
            let eng = lca_engine(&load(file, true)?)?;
            let v = eng.parse(expr).map_err(|e| usage(format!("{expr}: {e}")))?;
            let text = format!("{}\n", v.display(eng.reg()));
            Ok(Outcome::new(true, text, json!({ "normal_form": json_lambda(&v, eng.reg()) })))
        }
        Command::Zhu { op } => {
            let file = match op {
                ZhuOp::Product { file, .. } | ZhuOp::Commutator { file, .. } | ZhuOp::Pi { file, .. } => file,
            };
            let eng = lca_engine(&load(file, true)?)?;
            let zhu = ZhuAlgebra::new(eng).map_err(|e| CliError::Validation(e.to_string()))?;
            let eng = zhu.engine();
            let names = zhu.names();
            let z = match op {
                ZhuOp::Product { a, b, .. } => zhu.mul(&zhu.pi_z(&parse_in(eng, a)?), &zhu.pi_z(&parse_in(eng, b)?)),
                ZhuOp::Commutator { a, b, .. } => {
                    zhu.supercommutator(&zhu.pi_z(&parse_in(eng, a)?), &zhu.pi_z(&parse_in(eng, b)?))
                }
                ZhuOp::Pi { expr, .. } => zhu.pi_z(&parse_in(eng, expr)?),
            };
            let text = format!("{}\n", z.display(&names));
            Ok(Outcome::new(true, text, json!({ "zhu": json_zhu(&z, &names) })))
        }
        Command::Walg { op } => cmd_walg(op, &over),
        Command::Dirac { algebra } => cmd_dirac(&resolve_algebra(algebra)?),
        Command::Pva { op } => cmd_pva(op, &over),
    }
}

fn lca_engine(doc: &Document) -> Result<Engine, CliError> {
    let spec = doc.lca_specialized()?.ok_or_else(|| usage("the file has no [lca] section"))?;
    Ok(Engine::new(Arc::new(spec)))
}

fn parse_in(eng: &Engine, text: &str) -> Result<Expr, CliError> {
    eng.parse_expr(text).map_err(|e| usage(format!("{text}: {e}")))
}

fn cmd_check(doc: &Document) -> Result<Outcome, CliError> {
    let mut text = String::new();
    let mut ok = true;
    let mut result = serde_json::Map::new();
    if let Some(data) = &doc.liealg {
        text.push_str(&format!("liealg: dimension {}, validated\n", data.dim()));
        result.insert("liealg".into(), json!({ "dim": data.dim(), "ok": true }));
    }
    if let Some(spec) = doc.lca_specialized()? {
        let spec = Arc::new(spec);
        let skew = check_skewsymmetry(&spec);
        let jac = check_jacobi(&spec);
        let mut fails = Vec::new();
        for f in skew.failures() {
            fails.push(format!("skewsymmetry {}: {}", f.label, f.residual.display(&spec.reg)));
        }
        for f in jac.failures() {
            fails.push(format!("jacobi {}: {}", f.label, f.residual.display(&spec.reg)));
        }
        text.push_str(&format!(
            "lca: {} generators, skewsymmetry {}/{} pairs, jacobi {}/{} triples\n",
            spec.reg.len(),
            skew.entries.len() - skew.failures().count(),
            skew.entries.len(),
            jac.entries.len() - jac.failures().count(),
            jac.entries.len()
        ));
        for f in &fails {
            text.push_str(&format!("  FAIL {f}\n"));
        }
        ok &= fails.is_empty();
        result.insert("lca".into(), json!({ "ok": fails.is_empty(), "failures": fails }));
    }
    if let Some(p) = &doc.pva {
        let mut fails = p.spec.check_skew();
        fails.extend(p.spec.check_jacobi());
        text.push_str(&format!("pva: {} generators, {} failures\n", p.spec.len(), fails.len()));
        for f in &fails {
            text.push_str(&format!("  FAIL {f}\n"));
        }
        ok &= fails.is_empty();
        result.insert("pva".into(), json!({ "ok": fails.is_empty(), "failures": fails }));
    }
    text.push_str(if ok { "PASS\n" } else { "FAIL\n" });
    Ok(Outcome::new(ok, text, Value::Object(result)))
}

/// Built-in name or path to a file with a `[liealg]` section.
pub fn resolve_algebra(name: &str) -> Result<LieAlgData, CliError> {
    if let Some(d) = builtin(name) {
        return Ok(d);
    }
    let path = std::path::Path::new(name);
    if path.exists() {
        return load_document(path, true)?.liealg.ok_or_else(|| usage(format!("{name} has no [liealg] section")));
    }
    Err(usage(format!("unknown algebra `{name}`")))
}

fn level_of(alg: &AlgebraArgs, over: &[(String, Scalar)]) -> Result<Scalar, CliError> {
    let mut k = match &alg.level {
        Some(s) => Scalar::parse(s).map_err(|e| usage(format!("--level: {e}")))?,
        None => Scalar::param("k"),
    };
    for (n, v) in over {
        k = k.subst1(n, v).map_err(|e| usage(e.to_string()))?;
    }
    Ok(k)
}

fn grading_of(alg: &AlgebraArgs) -> Result<(LieAlgData, crate::liealg::GoodGrading), CliError> {
    let data = resolve_algebra(&alg.algebra)?;
    let (px, pf) = principal_pair(&data).unwrap_or_else(|| (data.zero(), data.zero()));
    let x = match &alg.x {
        Some(s) => parse_elem(s, &data.names, 0, 1).map_err(|e| usage(format!("--x: {e}")))?,
        None => px,
    };
    let f = match &alg.f {
        Some(s) => parse_elem(s, &data.names, 0, 1).map_err(|e| usage(format!("--f: {e}")))?,
        None => pf,
    };
    let gr = grading_from_pair(&data, &x, &f).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok((data, gr))
}

fn rat_arg(s: &str, what: &str) -> Result<Rat, CliError> {
    Scalar::parse(s).ok().and_then(|x| x.as_rat()).ok_or_else(|| usage(format!("{what}: expected a rational number")))
}

fn werr(e: crate::walgebra::WError) -> CliError {
    CliError::Validation(e.to_string())
}

fn cmd_walg(op: &WalgOp, over: &[(String, Scalar)]) -> Result<Outcome, CliError> {
    let alg = match op {
        WalgOp::Build { alg }
        | WalgOp::Generators { alg, .. }
        | WalgOp::Bracket { alg, .. }
        | WalgOp::Finite { alg, .. }
        | WalgOp::Whittaker { alg, .. } => alg,
    };
    let (data, gr) = grading_of(alg)?;
    if let WalgOp::Whittaker { cutoff, l, .. } = op {
        let cut = rat_arg(cutoff, "--cutoff")?;
        let idx = l.iter().map(|n| data.index(n).map_err(|e| usage(e.to_string()))).collect::<Result<Vec<_>, _>>()?;
        let w = whittaker_invariants(&data, &gr, &idx, &cut).map_err(werr)?;
        let ok = w.matches();
        let fmt = |v: &[usize]| v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ");
        let text = format!(
            "degree step {}\nwhittaker invariants: {}\nslodowy slice:        {}\n{}\n",
            w.step,
            fmt(&w.dims),
            fmt(&w.slice),
            if ok { "MATCH" } else { "MISMATCH" }
        );
        let result = json!({ "step": w.step.to_string(), "dims": w.dims, "slice": w.slice, "match": ok });
        return Ok(Outcome::new(ok, text, result));
    }
    let level = level_of(alg, over)?;
    let cx = build_complex(&data, &gr, &level).map_err(werr)?;
    let reg = &cx.spec.reg;
    match op {
        WalgOp::Build { .. } => {
            let bad = cx.verify();
            let mut text = String::from("generators:\n");
            let mut gens = Vec::new();
            for g in reg.gens() {
                text.push_str(&format!("  {} {} delta={} charge={}\n", g.id, g.parity.name(), g.delta, g.charge));
                gens.push(json!({ "name": g.id, "parity": g.parity.name(), "delta": g.delta.to_string(), "charge": g.charge }));
            }
            text.push_str(&format!("d = {}\n", cx.d.display(reg)));
            text.push_str(&format!("L = {}\n", cx.em.l.display(reg)));
            text.push_str(&format!("c = {}\n", cx.em.central_charge));
            for b in &bad {
                text.push_str(&format!("FAIL {b}\n"));
            }
            text.push_str(if bad.is_empty() { "[d lam d] = 0, d(L) = 0: verified\n" } else { "FAIL\n" });
            let result = json!({
                "generators": gens,
                "d": json_expr(&cx.d, reg),
                "L": json_expr(&cx.em.l, reg),
                "central_charge": cx.em.central_charge.to_string(),
                "failures": bad,
            });
            Ok(Outcome::new(bad.is_empty(), text, result))
        }
        WalgOp::Generators { maxdelta, .. } => {
            let red = reduced_spec(&cx).map_err(werr)?;
            let gens = solve_generators(&red, &rat_arg(maxdelta, "--maxdelta")?).map_err(werr)?;
            let rreg = &red.spec.reg;
            let mut ok = true;
            let mut text = String::new();
            let mut out = Vec::new();
            for i in 0..gens.len() {
                let closed = red.d_expr(&gens.exprs[i]).is_zero();
                ok &= closed;
                text.push_str(&format!(
                    "{} (delta = {}) = {}\n  d({}) = {}\n",
                    gens.names[i],
                    gens.delta(i),
                    gens.exprs[i].display(rreg),
                    gens.names[i],
                    if closed { "0" } else { "NONZERO" }
                ));
                out.push(json!({
                    "name": gens.names[i],
                    "delta": gens.delta(i).to_string(),
                    "expr": json_expr(&gens.exprs[i], rreg),
                    "closed": closed,
                }));
            }
            if gens.is_empty() {
                text.push_str("no generators up to this weight\n");
            }
            Ok(Outcome::new(ok, text, json!({ "generators": out })))
        }
        WalgOp::Bracket { maxdelta, .. } => {
            let red = reduced_spec(&cx).map_err(werr)?;
            let gens = solve_generators(&red, &rat_arg(maxdelta, "--maxdelta")?).map_err(werr)?;
            let ws = w_spec(&red, &gens).map_err(werr)?;
            let mut text = String::new();
            let mut out = Vec::new();
            for (&(a, b), _) in ws.entries() {
                let l = ws.entry_lambda(a, b).unwrap_or_default();
                text.push_str(&format!("[{} lam {}] = {}\n", ws.reg.name(a), ws.reg.name(b), l.display(&ws.reg)));
                out.push(json!({ "a": ws.reg.name(a), "b": ws.reg.name(b), "bracket": json_lambda(&l, &ws.reg) }));
                if a == b && gens.delta(a) == Rat::from_integer(2.into()) {
                    if let Some(v) = virasoro_shape(&l, a) {
                        text.push_str(&format!(
                            "  {}/({}) is a Virasoro field with central charge {}\n",
                            ws.reg.name(a),
                            v.scale,
                            v.central_charge
                        ));
                    }
                }
            }
            Ok(Outcome::new(true, text, json!({ "brackets": out })))
        }
        WalgOp::Finite { maxdelta, .. } => {
            let red = reduced_spec(&cx).map_err(werr)?;
            let gens = solve_generators(&red, &rat_arg(maxdelta, "--maxdelta")?).map_err(werr)?;
            let ws = Arc::new(w_spec(&red, &gens).map_err(werr)?);
            let fw = finite_w(&red, &gens, &ws).map_err(werr)?;
            let mut text = String::new();
            for (i, img) in fw.images.iter().enumerate() {
                text.push_str(&format!("pi_Z({}) = {}\n", fw.names[i], img.display(&fw.r_names)));
            }
            let mut table = Vec::new();
            for (&(i, j), z) in &fw.table_zhu {
                text.push_str(&format!("[{}, {}] = {}\n", fw.names[i], fw.names[j], z.display(&fw.names)));
                table.push(json!({ "a": fw.names[i], "b": fw.names[j], "commutator": json_zhu(z, &fw.names) }));
            }
            text.push_str(&format!(
                "cocycles: {}\ntables agree: {}\n",
                if fw.cocycles { "yes" } else { "no" },
                if fw.agree { "yes" } else { "no" }
            ));
            let ok = fw.cocycles && fw.agree;
            Ok(Outcome::new(ok, text, json!({ "table": table, "cocycles": fw.cocycles, "agree": fw.agree })))
        }
        WalgOp::Whittaker { .. } => unreachable!(),
    }
}

fn cmd_dirac(data: &LieAlgData) -> Result<Outcome, CliError> {
    let d: Dirac = dirac(data).map_err(|e| CliError::Validation(e.to_string()))?;
    let names = d.zhu.names();
    let expected = Dirac::expected_defect(data).map_err(|e| CliError::Validation(e.to_string()))?;
    let rel = d.check_relations();
    let (lhs, rhs) = d.classical_square();
    let weil = weil_corner(data).map_err(|e| CliError::Validation(e.to_string()))?;
    let wbad = weil.check();
    let square_ok = d.defect.as_ref() == Some(&expected);
    let ok = square_ok && rel.is_empty() && lhs == rhs && wbad.is_empty();
    let mut text = format!("D = {}\nC = {}\n", d.d.display(&names), d.c.display(&names));
    match &d.defect {
        Some(s) => text.push_str(&format!("D^2 - C = {s} (expected {expected})\n")),
        None => text.push_str("D^2 - C is not a scalar\n"),
    }
    for r in &rel {
        text.push_str(&format!("FAIL {r}\n"));
    }
    text.push_str(&format!("classical corner {{D, D}} = 2C: {}\n", if lhs == rhs { "yes" } else { "no" }));
    for r in &wbad {
        text.push_str(&format!("FAIL weil: {r}\n"));
    }
    text.push_str(&format!("weil algebra corner: {}\n", if wbad.is_empty() { "yes" } else { "no" }));
    let result = json!({
        "D": json_zhu(&d.d, &names),
        "C": json_zhu(&d.c, &names),
        "defect": d.defect.as_ref().map(|s| s.to_string()),
        "expected_defect": expected.to_string(),
        "relations": rel,
        "classical_square": lhs == rhs,
        "weil": wbad,
    });
    Ok(Outcome::new(ok, text, result))
}

fn pva_source(src: &PvaSource, over: &[(String, Scalar)]) -> Result<PvaDoc, CliError> {
    match (&src.builtin, &src.file) {
        (Some(b), None) if b == "gfz" => {
            let functionals =
                ["h0", "h1", "h2"].iter().map(|n| (n.to_string(), gfz_hamiltonian(n).expect("builtin"))).collect();
            Ok(PvaDoc { spec: PvaSpec::gfz(), functionals })
        }
        (Some(b), None) => Err(usage(format!("unknown builtin `{b}`"))),
        (None, Some(f)) => {
            let doc = with_overrides(load_document(f, true)?, over);
            doc.pva.ok_or_else(|| usage(format!("{} has no [pva] section", f.display())))
        }
        _ => Err(usage("give either a file or --builtin")),
    }
}

fn functional(doc: &PvaDoc, text: &str) -> Result<PvaExpr, CliError> {
    if let Some((_, e)) = doc.functionals.iter().find(|(n, _)| n == text) {
        return Ok(e.clone());
    }
    doc.spec.parse_expr(text).map_err(|e| usage(format!("{text}: {e}")))
}

fn cmd_pva(op: &PvaOp, over: &[(String, Scalar)]) -> Result<Outcome, CliError> {
    match op {
        PvaOp::Flow { src, h, of } => {
            let doc = pva_source(src, over)?;
            let spec = &doc.spec;
            let hf = reduce_mod_t(&functional(&doc, h)?, spec);
            let targets: Vec<usize> = match of {
                Some(g) => vec![spec.lookup(g).ok_or_else(|| usage(format!("unknown generator `{g}`")))?],
                None => (0..spec.len()).collect(),
            };
            let mut text = String::new();
            let mut out = serde_json::Map::new();
            for &i in &targets {
                let flow = hamiltonian_flow(&hf, &PvaExpr::gen(i), spec);
                if targets.len() == 1 {
                    text.push_str(&format!("{}\n", spec.display_expr(&flow)));
                } else {
                    text.push_str(&format!("{}: {}\n", spec.names[i], spec.display_expr(&flow)));
                }
                out.insert(spec.names[i].clone(), json_pva(&flow, &spec.names));
            }
            Ok(Outcome::new(true, text, json!({ "flow": out })))
        }
        PvaOp::Involution { src, h, g } => {
            let doc = pva_source(src, over)?;
            let spec = &doc.spec;
            let a = reduce_mod_t(&functional(&doc, h)?, spec);
            let b = reduce_mod_t(&functional(&doc, g)?, spec);
            let v = involution(&a, &b, spec);
            let ok = v.is_zero();
            let text = format!(
                "{{{h}, {g}}} = {} (mod T)\n{}\n",
                spec.display_expr(v.rep()),
                if ok { "in involution" } else { "not in involution" }
            );
            Ok(Outcome::new(ok, text, json!({ "value": json_pva(v.rep(), &spec.names), "involution": ok })))
        }
        PvaOp::Zhu { src, hbar } => {
            let doc = pva_source(src, over)?;
            let spec = &doc.spec;
            let hb = Scalar::parse(hbar).map_err(|e| usage(format!("--hbar: {e}")))?;
            let z = pva_zhu(spec, &hb).map_err(|e| CliError::Validation(e.to_string()))?;
            let bad = z.check_axioms().map_err(|e| CliError::Validation(e.to_string()))?;
            let mut text = String::new();
            let mut table = Vec::new();
            for i in 0..spec.len() {
                for j in 0..spec.len() {
                    let e = z.table.get(&(i, j)).cloned().unwrap_or_default();
                    text.push_str(&format!("{{{}, {}}} = {}\n", spec.names[i], spec.names[j], spec.display_expr(&e)));
                    table.push(json!({ "a": spec.names[i], "b": spec.names[j], "bracket": json_pva(&e, &spec.names) }));
                }
            }
            for b in &bad {
                text.push_str(&format!("FAIL {b}\n"));
            }
            text.push_str(if bad.is_empty() { "Poisson axioms: verified\n" } else { "Poisson axioms: FAIL\n" });
            Ok(Outcome::new(bad.is_empty(), text, json!({ "table": table, "failures": bad })))
        }
    }
}
