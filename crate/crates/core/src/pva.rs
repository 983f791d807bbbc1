//! Poisson vertex algebras on differential polynomial algebras `C[u_i^(n)]`.
//!
//! Brackets of arbitrary differential polynomials come from the master
//! formula applied to a generator table.  Local functionals are classes
//! modulo total derivatives; their canonical representative is obtained by
//! exact row reduction slice by slice.  The Zhu Poisson algebra is built from
//! the hbar-bracket, and [`quasiclassical_limit`] turns an `eps`-family of
//! conformal algebras into a generator table.

use crate::constructions::{kac_todorov, ConstructionError};
use crate::liealg::{Elem, LieAlgData, LieError};
use crate::linsolve::rref;
use crate::scalar::{binom, Rat, Scalar, ScalarError};
use crate::terms::{coeff_parts, psign, Expr, Parity};
use crate::wick::{factorial, LcaSpec, WickError};
use num_traits::{One, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PvaError {
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("duplicate generator `{0}`")]
    DuplicateGenerator(String),
    #[error("bracket of {0} is not divisible by {1}")]
    NotDivisibleByEpsilon(String, String),
    #[error("generator `{0}` has no conformal weight")]
    MissingWeight(String),
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error("{0}")]
    Construction(String),
    #[error(transparent)]
    Wick(#[from] WickError),
}

impl From<ConstructionError> for PvaError {
    fn from(e: ConstructionError) -> Self {
        PvaError::Construction(e.to_string())
    }
}

/// The indeterminate `u_gen^(order)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub gen: usize,
    pub order: u32,
}

impl Var {
    pub fn new(gen: usize, order: u32) -> Self {
        Var { gen, order }
    }
}

/// Monomial in the `u_i^(n)`: factors sorted nondecreasingly, odd factors
/// appear at most once.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DiffMono(pub Vec<Var>);

impl DiffMono {
    pub fn one() -> Self {
        DiffMono(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        DiffMono(vec![v])
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn total_order(&self) -> u32 {
        self.0.iter().map(|v| v.order).sum()
    }

    pub fn parity(&self, par: &[Parity]) -> Parity {
        self.0.iter().fold(Parity::Even, |p, v| p.add(par[v.gen]))
    }

    /// Sort a word of factors, tracking the Koszul sign; `None` when an odd
    /// factor repeats.
    pub fn from_factors(mut w: Vec<Var>, par: &[Parity]) -> Option<(DiffMono, i64)> {
        let mut sign = 1;
        for i in 1..w.len() {
            let mut j = i;
            while j > 0 && w[j - 1] > w[j] {
                if par[w[j].gen].is_odd() && par[w[j - 1].gen].is_odd() {
                    sign = -sign;
                }
                w.swap(j - 1, j);
                j -= 1;
            }
        }
        if w.windows(2).any(|p| p[0] == p[1] && par[p[0].gen].is_odd()) {
            return None;
        }
        Some((DiffMono(w), sign))
    }

    fn delta(&self, weights: &[Option<Rat>]) -> Option<Rat> {
        let mut d = Rat::zero();
        for v in &self.0 {
            d += weights[v.gen].clone()? + Rat::from_integer(v.order.into());
        }
        Some(d)
    }

    /// Preference order for pivots in the mod-T reduction: the monomial
    /// carrying the highest derivative is eliminated first.
    fn pivot_key(&self) -> Vec<Var> {
        self.0.iter().rev().copied().collect()
    }
}

fn var_name(names: &[String], v: Var) -> String {
    let n = &names[v.gen];
    match v.order {
        0 => n.clone(),
        k @ 1..=3 => format!("{n}{}", "'".repeat(k as usize)),
        k => format!("{n}^({k})"),
    }
}

fn mono_factors(names: &[String], m: &DiffMono) -> Vec<String> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < m.0.len() {
        let mut j = i;
        while j < m.0.len() && m.0[j] == m.0[i] {
            j += 1;
        }
        let base = var_name(names, m.0[i]);
        out.push(if j - i == 1 { base } else { format!("{base}^{}", j - i) });
        i = j;
    }
    out
}

/// Differential polynomial with [`Scalar`] coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PvaExpr(pub BTreeMap<DiffMono, Scalar>);

impl PvaExpr {
    pub fn zero() -> Self {
        PvaExpr(BTreeMap::new())
    }

    pub fn one() -> Self {
        Self::scalar(Scalar::one())
    }

    pub fn scalar(c: Scalar) -> Self {
        let mut e = Self::zero();
        e.add_term(DiffMono::one(), c);
        e
    }

    pub fn var(gen: usize, order: u32) -> Self {
        let mut e = Self::zero();
        e.add_term(DiffMono::var(Var::new(gen, order)), Scalar::one());
        e
    }

    pub fn gen(gen: usize) -> Self {
        Self::var(gen, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DiffMono, &Scalar)> {
        self.0.iter()
    }

    pub fn coeff(&self, m: &DiffMono) -> Scalar {
        self.0.get(m).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn as_scalar(&self) -> Option<Scalar> {
        match self.0.len() {
            0 => Some(Scalar::zero()),
            1 => self.0.get(&DiffMono::one()).cloned(),
            _ => None,
        }
    }

    pub fn add_term(&mut self, m: DiffMono, c: Scalar) {
        if c.is_zero() {
            return;
        }
        match self.0.entry(m) {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get() + &c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn add_scaled(&mut self, o: &PvaExpr, c: &Scalar) {
        for (m, x) in &o.0 {
            self.add_term(m.clone(), x * c);
        }
    }

    pub fn add(&self, o: &PvaExpr) -> PvaExpr {
        let mut r = self.clone();
        r.add_scaled(o, &Scalar::one());
        r
    }

    pub fn sub(&self, o: &PvaExpr) -> PvaExpr {
        let mut r = self.clone();
        r.add_scaled(o, &Scalar::from_int(-1));
        r
    }

    pub fn scale(&self, c: &Scalar) -> PvaExpr {
        let mut r = Self::zero();
        r.add_scaled(self, c);
        r
    }

    pub fn neg(&self) -> PvaExpr {
        self.scale(&Scalar::from_int(-1))
    }

    pub fn mul(&self, o: &PvaExpr, par: &[Parity]) -> PvaExpr {
        let mut r = Self::zero();
        for (a, x) in &self.0 {
            for (b, y) in &o.0 {
                let mut w = a.0.clone();
                w.extend_from_slice(&b.0);
                if let Some((m, s)) = DiffMono::from_factors(w, par) {
                    r.add_term(m, &(x * y) * &Scalar::from_int(s));
                }
            }
        }
        r
    }

    pub fn pow(&self, n: u32, par: &[Parity]) -> PvaExpr {
        let mut r = Self::one();
        for _ in 0..n {
            r = r.mul(self, par);
        }
        r
    }

    /// Total derivative `T`.
    pub fn derivative(&self, par: &[Parity]) -> PvaExpr {
        let mut r = Self::zero();
        for (m, c) in &self.0 {
            for k in 0..m.0.len() {
                if k > 0 && m.0[k] == m.0[k - 1] {
                    continue;
                }
                let mult = m.0[k..].iter().take_while(|v| **v == m.0[k]).count();
                let mut w = m.0.clone();
                w[k].order += 1;
                if let Some((mm, s)) = DiffMono::from_factors(w, par) {
                    r.add_term(mm, c * &Scalar::from_int(s * mult as i64));
                }
            }
        }
        r
    }

    pub fn derivative_n(&self, n: u32, par: &[Parity]) -> PvaExpr {
        let mut r = self.clone();
        for _ in 0..n {
            r = r.derivative(par);
        }
        r
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.0.keys().flat_map(|m| m.0.iter().copied()).collect()
    }

    /// Left partial derivative: the factor is moved to the front, then removed.
    pub fn partial_left(&self, v: Var, par: &[Parity]) -> PvaExpr {
        let mut r = Self::zero();
        for (m, c) in &self.0 {
            let mut odd_before = 0;
            for (k, w) in m.0.iter().enumerate() {
                if *w == v {
                    let s = if par[v.gen].is_odd() && odd_before % 2 == 1 { -1 } else { 1 };
                    let mut rest = m.0.clone();
                    rest.remove(k);
                    r.add_term(DiffMono(rest), c * &Scalar::from_int(s));
                }
                if par[w.gen].is_odd() {
                    odd_before += 1;
                }
            }
        }
        r
    }

    /// Even and odd parts.
    pub fn parity_parts(&self, par: &[Parity]) -> (PvaExpr, PvaExpr) {
        let mut e = Self::zero();
        let mut o = Self::zero();
        for (m, c) in &self.0 {
            match m.parity(par) {
                Parity::Even => e.add_term(m.clone(), c.clone()),
                Parity::Odd => o.add_term(m.clone(), c.clone()),
            }
        }
        (e, o)
    }

    pub fn map_scalars(&self, f: impl Fn(&Scalar) -> Result<Scalar, ScalarError>) -> Result<PvaExpr, ScalarError> {
        let mut r = Self::zero();
        for (m, c) in &self.0 {
            r.add_term(m.clone(), f(c)?);
        }
        Ok(r)
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> PvaDisplay<'a> {
        PvaDisplay { e: self, names, lam: 0 }
    }
}

pub struct PvaDisplay<'a> {
    e: &'a PvaExpr,
    names: &'a [String],
    lam: u32,
}

fn write_pva_terms(
    f: &mut fmt::Formatter<'_>,
    first: &mut bool,
    e: &PvaExpr,
    lam: u32,
    names: &[String],
) -> fmt::Result {
    let mut items: Vec<_> = e.0.iter().collect();
    items.sort_by(|a, b| b.0.degree().cmp(&a.0.degree()).then_with(|| a.0.cmp(b.0)));
    for (m, c) in items {
        let (neg, pre) = coeff_parts(c);
        if *first {
            if neg {
                write!(f, "-")?;
            }
        } else {
            write!(f, " {} ", if neg { '-' } else { '+' })?;
        }
        *first = false;
        let mut parts: Vec<String> = Vec::new();
        match lam {
            0 => {}
            1 => parts.push("lam".into()),
            n => parts.push(format!("lam^{n}")),
        }
        parts.extend(mono_factors(names, m));
        let body = parts.join("*");
        if body.is_empty() {
            // bare scalar
            write!(f, "{}", if pre.is_empty() { "1".to_string() } else { pre.trim_end_matches('*').to_string() })?;
        } else {
            write!(f, "{pre}{body}")?;
        }
    }
    Ok(())
}

impl fmt::Display for PvaDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.e.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        write_pva_terms(f, &mut first, self.e, self.lam, self.names)
    }
}

/// Polynomial in `lam` with [`PvaExpr`] coefficients (index = power).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LamPoly(pub Vec<PvaExpr>);

impl LamPoly {
    pub fn zero() -> Self {
        LamPoly(Vec::new())
    }

    pub fn constant(e: PvaExpr) -> Self {
        Self::from_coeffs(vec![e])
    }

    pub fn lam() -> Self {
        Self::from_coeffs(vec![PvaExpr::zero(), PvaExpr::one()])
    }

    pub fn from_coeffs(mut cs: Vec<PvaExpr>) -> Self {
        while cs.last().is_some_and(|c| c.is_zero()) {
            cs.pop();
        }
        LamPoly(cs)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coeff(&self, n: usize) -> PvaExpr {
        self.0.get(n).cloned().unwrap_or_default()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn add_at(&mut self, n: usize, e: &PvaExpr, c: &Scalar) {
        if self.0.len() <= n {
            self.0.resize(n + 1, PvaExpr::zero());
        }
        self.0[n].add_scaled(e, c);
        let cs = std::mem::take(&mut self.0);
        *self = Self::from_coeffs(cs);
    }

    pub fn add(&self, o: &LamPoly) -> LamPoly {
        let n = self.0.len().max(o.0.len());
        Self::from_coeffs((0..n).map(|i| self.coeff(i).add(&o.coeff(i))).collect())
    }

    pub fn sub(&self, o: &LamPoly) -> LamPoly {
        self.add(&o.scale(&Scalar::from_int(-1)))
    }

    pub fn scale(&self, c: &Scalar) -> LamPoly {
        Self::from_coeffs(self.0.iter().map(|e| e.scale(c)).collect())
    }

    pub fn mul_right(&self, e: &PvaExpr, par: &[Parity]) -> LamPoly {
        Self::from_coeffs(self.0.iter().map(|x| x.mul(e, par)).collect())
    }

    pub fn mul(&self, o: &LamPoly, par: &[Parity]) -> LamPoly {
        let mut cs = vec![PvaExpr::zero(); (self.0.len() + o.0.len()).saturating_sub(1)];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                let p = a.mul(b, par);
                cs[i + j].add_scaled(&p, &Scalar::one());
            }
        }
        Self::from_coeffs(cs)
    }

    /// `(lam + T)^q` applied, with `T` acting on the coefficients.
    pub fn shift_plus_t(&self, q: u32, par: &[Parity]) -> LamPoly {
        if q == 0 {
            return self.clone();
        }
        let mut out = LamPoly::zero();
        for (n, c) in self.0.iter().enumerate() {
            let mut d = c.clone();
            for r in 0..=q {
                let b = Scalar::from_rat(crate::scalar::binom_int(q as i64, r));
                out.add_at(n + (q - r) as usize, &d, &b);
                d = d.derivative(par);
            }
        }
        out
    }

    /// Substitute `lam -> -lam - T`, with `T` acting on the coefficients.
    pub fn subst_neg_lam_minus_t(&self, par: &[Parity]) -> LamPoly {
        let mut out = LamPoly::zero();
        for (n, c) in self.0.iter().enumerate() {
            let mut d = c.clone();
            for r in 0..=n {
                let b = Scalar::from_rat(crate::scalar::binom_int(n as i64, r as u32));
                let s = if n % 2 == 1 { b.neg() } else { b };
                out.add_at(n - r, &d, &s);
                d = d.derivative(par);
            }
        }
        out
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> LamDisplay<'a> {
        LamDisplay { l: self, names }
    }
}

pub struct LamDisplay<'a> {
    l: &'a LamPoly,
    names: &'a [String],
}

impl fmt::Display for LamDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.l.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (n, e) in self.l.0.iter().enumerate() {
            write_pva_terms(f, &mut first, e, n as u32, self.names)?;
        }
        Ok(())
    }
}

/// Generator of a PVA: name, parity and optional conformal weight.
#[derive(Clone, Debug, PartialEq)]
pub struct PvaGen {
    pub name: String,
    pub parity: Parity,
    pub delta: Option<Rat>,
}

impl PvaGen {
    pub fn new(name: &str, parity: Parity, delta: Option<Rat>) -> Self {
        PvaGen { name: name.to_string(), parity, delta }
    }
}

/// Generators and the table `{u_i lam u_j}`.  Pairs not in the table are
/// obtained by skewsymmetry from the reversed pair, or are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct PvaSpec {
    pub names: Vec<String>,
    pub parity: Vec<Parity>,
    pub delta: Vec<Option<Rat>>,
    table: BTreeMap<(usize, usize), LamPoly>,
}

impl PvaSpec {
    pub fn new(gens: Vec<PvaGen>, entries: Vec<(usize, usize, LamPoly)>) -> Result<Self, PvaError> {
        let mut seen = BTreeSet::new();
        for g in &gens {
            if !seen.insert(g.name.clone()) {
                return Err(PvaError::DuplicateGenerator(g.name.clone()));
            }
        }
        let mut table = BTreeMap::new();
        for (i, j, l) in entries {
            if i >= gens.len() || j >= gens.len() {
                return Err(PvaError::UnknownGenerator(format!("#{}", i.max(j))));
            }
            if !l.is_zero() {
                table.insert((i, j), l);
            }
        }
        Ok(PvaSpec {
            names: gens.iter().map(|g| g.name.clone()).collect(),
            parity: gens.iter().map(|g| g.parity).collect(),
            delta: gens.iter().map(|g| g.delta.clone()).collect(),
            table,
        })
    }

    /// One even generator `u` of weight 1 with `{u lam u} = lam`.
    pub fn gfz() -> PvaSpec {
        PvaSpec::new(vec![PvaGen::new("u", Parity::Even, Some(Rat::one()))], vec![(0, 0, LamPoly::lam())])
            .expect("static data")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn gens(&self) -> Vec<PvaGen> {
        (0..self.len()).map(|i| PvaGen::new(&self.names[i], self.parity[i], self.delta[i].clone())).collect()
    }

    /// Stored table entries.
    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &LamPoly)> {
        self.table.iter()
    }

    /// `{u_i lam u_j}`.
    pub fn gen_bracket(&self, i: usize, j: usize) -> LamPoly {
        if let Some(l) = self.table.get(&(i, j)) {
            return l.clone();
        }
        if let Some(l) = self.table.get(&(j, i)) {
            let s = -psign(self.parity[i], self.parity[j]);
            return l.subst_neg_lam_minus_t(&self.parity).scale(&Scalar::from_int(s));
        }
        LamPoly::zero()
    }

    pub fn mono_delta(&self, m: &DiffMono) -> Option<Rat> {
        m.delta(&self.delta)
    }

    /// Skewsymmetry on generator pairs.
    pub fn check_skew(&self) -> Vec<String> {
        let mut bad = Vec::new();
        for i in 0..self.len() {
            for j in i..self.len() {
                let a = self.gen_bracket(i, j);
                let s = -psign(self.parity[i], self.parity[j]);
                let b = self.gen_bracket(j, i).subst_neg_lam_minus_t(&self.parity).scale(&Scalar::from_int(s));
                if a != b {
                    bad.push(format!("skewsymmetry fails for ({}, {})", self.names[i], self.names[j]));
                }
            }
        }
        bad
    }

    /// Jacobi identity on generator triples, via the master formula.
    pub fn check_jacobi(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (a, b, c) = (PvaExpr::gen(i), PvaExpr::gen(j), PvaExpr::gen(k));
                    if jacobi_defect(&a, &b, &c, self).values().any(|e| !e.is_zero()) {
                        bad.push(format!(
                            "Jacobi identity fails for ({}, {}, {})",
                            self.names[i], self.names[j], self.names[k]
                        ));
                    }
                }
            }
        }
        bad
    }

    pub fn parse_expr(&self, text: &str) -> Result<PvaExpr, PvaError> {
        let l = self.parse_lam(text)?;
        if l.degree().unwrap_or(0) > 0 {
            return Err(PvaError::Parse { pos: 0, msg: "unexpected lam".into() });
        }
        Ok(l.coeff(0))
    }

    /// Parse a lam-polynomial of differential polynomials: `u'''`, `u^(4)`,
    /// `u^2`, `lam`, rational numbers and formal parameters.
    pub fn parse_lam(&self, text: &str) -> Result<LamPoly, PvaError> {
        let mut p = ExprParser { s: text.as_bytes(), pos: 0, spec: self };
        let v = p.expr()?;
        p.ws();
        if p.pos != p.s.len() {
            return Err(p.err("trailing input"));
        }
        Ok(v)
    }

    pub fn display_expr(&self, e: &PvaExpr) -> String {
        e.display(&self.names).to_string()
    }

    pub fn display_lam(&self, l: &LamPoly) -> String {
        l.display(&self.names).to_string()
    }
}

struct ExprParser<'a> {
    s: &'a [u8],
    pos: usize,
    spec: &'a PvaSpec,
}

impl ExprParser<'_> {
    fn err(&self, msg: &str) -> PvaError {
        PvaError::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<LamPoly, PvaError> {
        let mut acc = LamPoly::zero();
        let mut sign = 1;
        match self.peek() {
            Some(b'-') => {
                sign = -1;
                self.pos += 1;
            }
            Some(b'+') => self.pos += 1,
            _ => {}
        }
        loop {
            let t = self.term()?;
            acc = acc.add(&t.scale(&Scalar::from_int(sign)));
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    sign = 1;
                }
                Some(b'-') => {
                    self.pos += 1;
                    sign = -1;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<LamPoly, PvaError> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let r = self.power()?;
                    acc = acc.mul(&r, &self.spec.parity);
                }
                Some(b'/') => {
                    self.pos += 1;
                    let r = self.power()?;
                    let c = match r.degree() {
                        Some(0) => r.coeff(0).as_scalar(),
                        _ => None,
                    }
                    .filter(|c| !c.is_zero())
                    .ok_or_else(|| self.err("division by a non-scalar"))?;
                    acc = acc.scale(&c.inv()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn uint(&mut self) -> Result<u32, PvaError> {
        self.ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos]).unwrap().parse().map_err(|_| self.err("expected an integer"))
    }

    fn power(&mut self) -> Result<LamPoly, PvaError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let n = self.uint()?;
            let mut r = LamPoly::constant(PvaExpr::one());
            for _ in 0..n {
                r = r.mul(&base, &self.spec.parity);
            }
            return Ok(r);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<LamPoly, PvaError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => {
                let n = self.uint()?;
                Ok(LamPoly::constant(PvaExpr::scalar(Scalar::from_int(n as i64))))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.s.len() && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                if name == "lam" {
                    return Ok(LamPoly::lam());
                }
                let Some(g) = self.spec.lookup(name) else {
                    return Ok(LamPoly::constant(PvaExpr::scalar(Scalar::param(name))));
                };
                let mut order = 0;
                while self.pos < self.s.len() && self.s[self.pos] == b'\'' {
                    order += 1;
                    self.pos += 1;
                }
                if order == 0 && self.s[self.pos..].starts_with(b"^(") {
                    self.pos += 2;
                    order = self.uint()?;
                    if self.peek() != Some(b')') {
                        return Err(self.err("expected `)`"));
                    }
                    self.pos += 1;
                }
                Ok(LamPoly::constant(PvaExpr::var(g, order)))
            }
            _ => Err(self.err("expected an atom")),
        }
    }
}

/// `{u_j mu P}` by right Leibniz and sesquilinearity in the second slot.
fn gen_left_bracket(j: usize, p: &PvaExpr, spec: &PvaSpec) -> LamPoly {
    let par = &spec.parity;
    let mut out = LamPoly::zero();
    for v in p.vars() {
        let base = spec.gen_bracket(j, v.gen);
        if base.is_zero() {
            continue;
        }
        let dp = p.partial_left(v, par);
        out = out.add(&base.shift_plus_t(v.order, par).mul_right(&dp, par));
    }
    out
}

/// Master formula: `{P lam Q} = sum_{j,q} (lam+T)^q {P lam u_j} dQ/du_j^(q)`
/// with `{P lam u_j} = -p(P,u_j) {u_j -lam-T P}` and the left-hand bracket
/// expanded over the partial derivatives of `P`.
pub fn pva_bracket(p: &PvaExpr, q: &PvaExpr, spec: &PvaSpec) -> LamPoly {
    let par = &spec.parity;
    let (pe, po) = p.parity_parts(par);
    let qvars = q.vars();
    let gens: BTreeSet<usize> = qvars.iter().map(|v| v.gen).collect();
    let mut against: BTreeMap<usize, LamPoly> = BTreeMap::new();
    for &j in &gens {
        let mut acc = LamPoly::zero();
        for (part, pp) in [(&pe, Parity::Even), (&po, Parity::Odd)] {
            if part.is_zero() {
                continue;
            }
            let s = -psign(pp, par[j]);
            acc = acc.add(&gen_left_bracket(j, part, spec).subst_neg_lam_minus_t(par).scale(&Scalar::from_int(s)));
        }
        against.insert(j, acc);
    }
    let mut out = LamPoly::zero();
    for v in qvars {
        let l = &against[&v.gen];
        if l.is_zero() {
            continue;
        }
        let dq = q.partial_left(v, par);
        out = out.add(&l.shift_plus_t(v.order, par).mul_right(&dq, par));
    }
    out
}

/// Two-variable polynomial in `(lam, mu)`.
pub type LamMu = BTreeMap<(usize, usize), PvaExpr>;

fn lm_add(acc: &mut LamMu, key: (usize, usize), e: &PvaExpr, c: &Scalar) {
    let slot = acc.entry(key).or_default();
    slot.add_scaled(e, c);
    if slot.is_zero() {
        acc.remove(&key);
    }
}

/// `{a lam {b mu c}} - p(a,b){b mu {a lam c}} - {{a lam b} lam+mu c}` for
/// parity-homogeneous `a, b`.
pub fn jacobi_defect(a: &PvaExpr, b: &PvaExpr, c: &PvaExpr, spec: &PvaSpec) -> LamMu {
    let par = &spec.parity;
    let pa = a.0.keys().next().map_or(Parity::Even, |m| m.parity(par));
    let pb = b.0.keys().next().map_or(Parity::Even, |m| m.parity(par));
    let mut acc = LamMu::new();
    for (n, x) in pva_bracket(b, c, spec).0.iter().enumerate() {
        for (m, y) in pva_bracket(a, x, spec).0.iter().enumerate() {
            lm_add(&mut acc, (m, n), y, &Scalar::one());
        }
    }
    let s = Scalar::from_int(-psign(pa, pb));
    for (n, x) in pva_bracket(a, c, spec).0.iter().enumerate() {
        for (m, y) in pva_bracket(b, x, spec).0.iter().enumerate() {
            lm_add(&mut acc, (n, m), y, &s);
        }
    }
    for (i, e) in pva_bracket(a, b, spec).0.iter().enumerate() {
        for (k, f) in pva_bracket(e, c, spec).0.iter().enumerate() {
            for r in 0..=k {
                let bc = Scalar::from_rat(crate::scalar::binom_int(k as i64, r as u32));
                lm_add(&mut acc, (i + r, k - r), f, &bc.neg());
            }
        }
    }
    acc
}

/// Canonical representative of a class in `V / T V`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalFunctional {
    rep: PvaExpr,
}

impl LocalFunctional {
    pub fn rep(&self) -> &PvaExpr {
        &self.rep
    }

    pub fn is_zero(&self) -> bool {
        self.rep.is_zero()
    }
}

/// All monomials on the generator multiset `gens` with derivative orders
/// summing to `d`.
fn slice_monomials(gens: &[usize], d: u32, par: &[Parity]) -> BTreeSet<DiffMono> {
    fn rec(gens: &[usize], left: u32, cur: &mut Vec<Var>, par: &[Parity], out: &mut BTreeSet<DiffMono>) {
        let k = cur.len();
        if k + 1 == gens.len() {
            cur.push(Var::new(gens[k], left));
            if let Some((m, _)) = DiffMono::from_factors(cur.clone(), par) {
                out.insert(m);
            }
            cur.pop();
            return;
        }
        for o in 0..=left {
            cur.push(Var::new(gens[k], o));
            rec(gens, left - o, cur, par, out);
            cur.pop();
        }
    }
    let mut out = BTreeSet::new();
    if gens.is_empty() {
        if d == 0 {
            out.insert(DiffMono::one());
        }
        return out;
    }
    rec(gens, d, &mut Vec::new(), par, &mut out);
    out
}

fn reduce_slice(part: &PvaExpr, gens: &[usize], d: u32, par: &[Parity]) -> PvaExpr {
    if d == 0 || gens.is_empty() {
        return part.clone();
    }
    let images: Vec<PvaExpr> = slice_monomials(gens, d - 1, par)
        .into_iter()
        .map(|m| {
            let mut e = PvaExpr::zero();
            e.add_term(m, Scalar::one());
            e.derivative(par)
        })
        .filter(|e| !e.is_zero())
        .collect();
    if images.is_empty() {
        return part.clone();
    }
    let mut cols: Vec<DiffMono> = images
        .iter()
        .flat_map(|e| e.0.keys().cloned())
        .chain(part.0.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    cols.sort_by_key(|m| std::cmp::Reverse(m.pivot_key()));
    let index: BTreeMap<&DiffMono, usize> = cols.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let mut rows: Vec<Vec<Scalar>> = images
        .iter()
        .map(|e| {
            let mut row = vec![Scalar::zero(); cols.len()];
            for (m, c) in &e.0 {
                row[index[m]] = c.clone();
            }
            row
        })
        .collect();
    let pivots = rref(&mut rows, cols.len());
    let mut v = vec![Scalar::zero(); cols.len()];
    for (m, c) in &part.0 {
        v[index[m]] = c.clone();
    }
    for (r, &pc) in pivots.iter().enumerate() {
        if v[pc].is_zero() {
            continue;
        }
        let f = v[pc].clone();
        for (c, x) in rows[r].iter().enumerate() {
            if !x.is_zero() {
                v[c] = &v[c] - &(&f * x);
            }
        }
    }
    let mut out = PvaExpr::zero();
    for (i, c) in v.into_iter().enumerate() {
        out.add_term(cols[i].clone(), c);
    }
    out
}

/// Project onto the fixed complement of `T V`: in each slice (generator
/// multiset, total derivative order) the image of `T` is row reduced with
/// pivots on the monomials carrying the highest derivatives.
pub fn reduce_mod_t(p: &PvaExpr, spec: &PvaSpec) -> LocalFunctional {
    LocalFunctional { rep: reduce_mod_t_par(p, &spec.parity) }
}

fn reduce_mod_t_par(p: &PvaExpr, par: &[Parity]) -> PvaExpr {
    let mut slices: BTreeMap<(Vec<usize>, u32), PvaExpr> = BTreeMap::new();
    for (m, c) in &p.0 {
        let key = (m.0.iter().map(|v| v.gen).collect(), m.total_order());
        slices.entry(key).or_default().add_term(m.clone(), c.clone());
    }
    let mut out = PvaExpr::zero();
    for ((gens, d), part) in slices {
        out.add_scaled(&reduce_slice(&part, &gens, d, par), &Scalar::one());
    }
    out
}

/// `{h lam P}` at `lam = 0`.
pub fn hamiltonian_flow(h: &LocalFunctional, p: &PvaExpr, spec: &PvaSpec) -> PvaExpr {
    pva_bracket(&h.rep, p, spec).coeff(0)
}

/// Class of `{h1 lam h2}|_{lam=0}` in `V / T V`.
pub fn involution(h1: &LocalFunctional, h2: &LocalFunctional, spec: &PvaSpec) -> LocalFunctional {
    reduce_mod_t(&pva_bracket(&h1.rep, &h2.rep, spec).coeff(0), spec)
}

pub fn involution_check(h1: &LocalFunctional, h2: &LocalFunctional, spec: &PvaSpec) -> bool {
    involution(h1, h2, spec).is_zero()
}

/// `sum_n (-T)^n dh/du_i^(n)`.  Convenience for tests; the flows themselves
/// are computed by the master formula.
pub fn variational_derivative(h: &PvaExpr, gen: usize, spec: &PvaSpec) -> PvaExpr {
    let par = &spec.parity;
    let mut out = PvaExpr::zero();
    for v in h.vars().into_iter().filter(|v| v.gen == gen) {
        let d = h.partial_left(v, par).derivative_n(v.order, par);
        let s = if v.order % 2 == 1 { -1 } else { 1 };
        out.add_scaled(&d, &Scalar::from_int(s));
    }
    out
}

/// Named local functionals of the KdV hierarchy on the GFZ algebra:
/// `h0 = u`, `h1 = u^2/2`, `h2 = (u^3 - u'^2)/2`.
pub fn gfz_hamiltonian(name: &str) -> Option<PvaExpr> {
    let spec = PvaSpec::gfz();
    let text = match name {
        "h0" => "u",
        "h1" => "u^2/2",
        "h2" => "(u^3 - u'^2)/2",
        _ => return None,
    };
    spec.parse_expr(text).ok()
}

/// `{a, b}_hbar = sum_j binom(Delta_a - 1, j) hbar^j a_(j) b`, with `a`
/// split into weight-homogeneous parts.
pub fn hbar_bracket(a: &PvaExpr, b: &PvaExpr, spec: &PvaSpec, hbar: &Scalar) -> Result<PvaExpr, PvaError> {
    let mut parts: BTreeMap<Rat, PvaExpr> = BTreeMap::new();
    for (m, c) in &a.0 {
        let d = spec.mono_delta(m).ok_or_else(|| weightless(spec, m))?;
        parts.entry(d).or_default().add_term(m.clone(), c.clone());
    }
    let mut out = PvaExpr::zero();
    for (d, part) in parts {
        let top = &Scalar::from_rat(d) - &Scalar::one();
        let br = pva_bracket(&part, b, spec);
        for (j, e) in br.0.iter().enumerate() {
            let c = &(&binom(&top, j as u32) * &hbar.pow(j as u32)) * &factorial(j as u32);
            out.add_scaled(e, &c);
        }
    }
    Ok(out)
}

fn weightless(spec: &PvaSpec, m: &DiffMono) -> PvaError {
    let g = m.0.iter().find(|v| spec.delta[v.gen].is_none()).map_or(0, |v| v.gen);
    PvaError::MissingWeight(spec.names[g].clone())
}

/// Zhu Poisson algebra `V_hbar / J_hbar` for the grading induced by the
/// Hamiltonian: the polynomial superalgebra on the generators, with
/// `u^(n) = n! hbar^n binom(-Delta, n) u` and the bracket induced by the
/// hbar-bracket.
#[derive(Clone, Debug)]
pub struct PvaZhu {
    pub spec: PvaSpec,
    pub hbar: Scalar,
    /// `{u_i, u_j}` in the quotient.
    pub table: BTreeMap<(usize, usize), PvaExpr>,
}

pub fn pva_zhu(spec: &PvaSpec, hbar: &Scalar) -> Result<PvaZhu, PvaError> {
    for i in 0..spec.len() {
        if spec.delta[i].is_none() {
            return Err(PvaError::MissingWeight(spec.names[i].clone()));
        }
    }
    let mut z = PvaZhu { spec: spec.clone(), hbar: hbar.clone(), table: BTreeMap::new() };
    for i in 0..spec.len() {
        for j in 0..spec.len() {
            let e = z.image(&hbar_bracket(&PvaExpr::gen(i), &PvaExpr::gen(j), spec, hbar)?);
            if !e.is_zero() {
                z.table.insert((i, j), e);
            }
        }
    }
    Ok(z)
}

impl PvaZhu {
    fn par(&self) -> &[Parity] {
        &self.spec.parity
    }

    /// Image in the quotient.
    pub fn image(&self, p: &PvaExpr) -> PvaExpr {
        let par = self.par();
        let mut out = PvaExpr::zero();
        for (m, c) in &p.0 {
            let mut coef = c.clone();
            let mut w = Vec::with_capacity(m.0.len());
            for v in &m.0 {
                if v.order > 0 {
                    let d = Scalar::from_rat(self.spec.delta[v.gen].clone().unwrap_or_else(Rat::zero));
                    let f = &(&factorial(v.order) * &self.hbar.pow(v.order)) * &binom(&-&d, v.order);
                    coef = &coef * &f;
                }
                w.push(Var::new(v.gen, 0));
            }
            if let Some((mm, s)) = DiffMono::from_factors(w, par) {
                out.add_term(mm, &coef * &Scalar::from_int(s));
            }
        }
        out
    }

    pub fn mul(&self, a: &PvaExpr, b: &PvaExpr) -> PvaExpr {
        self.image(&a.mul(b, self.par()))
    }

    fn gen_left(&self, j: usize, p: &PvaExpr) -> PvaExpr {
        let mut out = PvaExpr::zero();
        for v in p.vars() {
            if let Some(t) = self.table.get(&(j, v.gen)) {
                out.add_scaled(&t.mul(&p.partial_left(v, self.par()), self.par()), &Scalar::one());
            }
        }
        out
    }

    /// Poisson bracket on the quotient, extended from the generator table
    /// by the Leibniz rule.
    pub fn bracket(&self, a: &PvaExpr, b: &PvaExpr) -> PvaExpr {
        let par = self.par();
        let (a, b) = (self.image(a), self.image(b));
        let (ae, ao) = a.parity_parts(par);
        let mut out = PvaExpr::zero();
        for v in b.vars() {
            let mut left = PvaExpr::zero();
            for (part, pp) in [(&ae, Parity::Even), (&ao, Parity::Odd)] {
                if !part.is_zero() {
                    let s = -psign(pp, par[v.gen]);
                    left.add_scaled(&self.gen_left(v.gen, part), &Scalar::from_int(s));
                }
            }
            out.add_scaled(&left.mul(&b.partial_left(v, par), par), &Scalar::one());
        }
        out
    }

    /// Skewsymmetry (computed independently from the reversed hbar-bracket)
    /// and the Jacobi identity on generator triples.
    pub fn check_axioms(&self) -> Result<Vec<String>, PvaError> {
        let n = self.spec.len();
        let mut bad = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let fwd = self.table.get(&(i, j)).cloned().unwrap_or_default();
                let rev = self.image(&hbar_bracket(&PvaExpr::gen(j), &PvaExpr::gen(i), &self.spec, &self.hbar)?);
                let s = Scalar::from_int(-psign(self.spec.parity[i], self.spec.parity[j]));
                if rev != fwd.scale(&s) {
                    bad.push(format!("skewsymmetry fails for ({}, {})", self.spec.names[i], self.spec.names[j]));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (a, b, c) = (PvaExpr::gen(i), PvaExpr::gen(j), PvaExpr::gen(k));
                    let s = Scalar::from_int(psign(self.spec.parity[i], self.spec.parity[j]));
                    let lhs =
                        self.bracket(&a, &self.bracket(&b, &c)).sub(&self.bracket(&b, &self.bracket(&a, &c)).scale(&s));
                    if lhs != self.bracket(&self.bracket(&a, &b), &c) {
                        bad.push(format!(
                            "Jacobi identity fails for ({}, {}, {})",
                            self.spec.names[i], self.spec.names[j], self.spec.names[k]
                        ));
                    }
                }
            }
        }
        Ok(bad)
    }
}

/// Commutative image of a normally ordered element: `T^(k) u` becomes
/// `u^(k) / k!` and products become commutative.
pub fn classical_image(e: &Expr, par: &[Parity]) -> PvaExpr {
    let mut out = PvaExpr::zero();
    for (m, c) in e.iter() {
        let mut coef = c.clone();
        let mut w = Vec::new();
        for t in m.terms() {
            coef = &coef * &factorial(t.tpow).inv().expect("nonzero");
            w.push(Var::new(t.gen as usize, t.tpow));
        }
        if let Some((mm, s)) = DiffMono::from_factors(w, par) {
            out.add_term(mm, &coef * &Scalar::from_int(s));
        }
    }
    out
}

/// Multiply every table entry of a conformal algebra by `eps`.
pub fn epsilon_family(spec: &LcaSpec, eps: &str) -> Result<LcaSpec, PvaError> {
    let e = Scalar::param(eps);
    let mut entries = Vec::new();
    for (&(a, b), _) in spec.entries() {
        let l = spec.entry_lambda(a, b).unwrap_or_default();
        entries.push((a, b, l.map_exprs(|x| x.scale(&e))));
    }
    let mut params = spec.params.clone();
    params.insert(eps.to_string());
    Ok(LcaSpec::new(spec.reg.clone(), entries, spec.hamiltonian)?.with_params(params))
}

/// `{a lam b} = eps^-1 [a lam b] |_{eps = 0}` on the generators.
pub fn quasiclassical_limit(family: &LcaSpec, eps: &str) -> Result<PvaSpec, PvaError> {
    let reg = &family.reg;
    let gens: Vec<PvaGen> = reg.gens().iter().map(|g| PvaGen::new(&g.id, g.parity, Some(g.delta.clone()))).collect();
    let par: Vec<Parity> = gens.iter().map(|g| g.parity).collect();
    let e = Scalar::param(eps);
    let mut entries = Vec::new();
    for (&(a, b), _) in family.entries() {
        let l = family.entry_lambda(a, b).unwrap_or_default();
        let mut coeffs = Vec::new();
        for x in l.lam_coeffs() {
            let y = x.try_map_scalars(|c| c.checked_div(&e)?.subst1(eps, &Scalar::zero())).map_err(|_| {
                PvaError::NotDivisibleByEpsilon(format!("({}, {})", reg.name(a), reg.name(b)), eps.into())
            })?;
            coeffs.push(classical_image(&y, &par));
        }
        entries.push((a, b, LamPoly::from_coeffs(coeffs)));
    }
    PvaSpec::new(gens, entries)
}

/// Classical Weil-algebra corner of the Kac-Todorov construction at
/// `k + h^vee = 1`.
pub struct WeilCorner {
    pub spec: PvaSpec,
    pub zhu: PvaZhu,
    pub g_cl: PvaExpr,
    pub l_cl: PvaExpr,
    pub d_cl: PvaExpr,
    pub c_cl: PvaExpr,
    pub dim: usize,
}

pub fn weil_corner(data: &LieAlgData) -> Result<WeilCorner, PvaError> {
    let hv = data.dual_coxeter()?;
    let kt = kac_todorov(data, &(&Scalar::one() - &hv))?;
    let spec = quasiclassical_limit(&epsilon_family(&kt.spec, "eps")?, "eps")?;
    let par = spec.parity.clone();
    let n = data.dim();
    let elem = |a: &Elem, off: usize| {
        let mut e = PvaExpr::zero();
        for (i, c) in a.iter().enumerate() {
            e.add_scaled(&PvaExpr::gen(off + i), c);
        }
        e
    };
    let dual = data.dual_basis()?;
    let mut g1 = PvaExpr::zero();
    let mut g3 = PvaExpr::zero();
    let mut l1 = PvaExpr::zero();
    let mut l2 = PvaExpr::zero();
    let mut l3 = PvaExpr::zero();
    for i in 0..n {
        let ai = data.basis(i);
        let up = &dual[i];
        g1 = g1.add(&elem(&ai, 0).mul(&elem(up, n), &par));
        l1 = l1.add(&elem(&ai, 0).mul(&elem(up, 0), &par));
        l2 = l2.add(&elem(&ai, n).derivative(&par).mul(&elem(up, n), &par));
        for j in 0..n {
            let aj = data.basis(j);
            let upj = &dual[j];
            g3 = g3.add(&elem(&data.br(&ai, &aj), n).mul(&elem(up, n), &par).mul(&elem(upj, n), &par));
            l3 = l3.add(&elem(&ai, n).mul(&elem(&data.br(up, &aj), 0), &par).mul(&elem(upj, n), &par));
        }
    }
    let g_cl = g1.add(&g3.scale(&Scalar::from_frac(1, 3)));
    let l_cl = l1.add(&l2).add(&l3).scale(&Scalar::from_frac(1, 2));
    let zhu = pva_zhu(&spec, &Scalar::one())?;
    let d_cl = zhu.image(&g_cl);
    let c_cl = zhu.image(&l_cl);
    Ok(WeilCorner { spec, zhu, g_cl, l_cl, d_cl, c_cl, dim: n })
}

impl WeilCorner {
    /// `{D, a} = 0`, `{D, bar_a} = a`, `{D, D} = 2C`, `C` central.
    pub fn check(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let z = &self.zhu;
        let names = &self.spec.names;
        for i in 0..self.dim {
            let a = PvaExpr::gen(i);
            let abar = PvaExpr::gen(self.dim + i);
            if !z.bracket(&self.d_cl, &a).is_zero() {
                bad.push(format!("{{D, {}}} != 0", names[i]));
            }
            if z.bracket(&self.d_cl, &abar) != a {
                bad.push(format!("{{D, {}}} != {}", names[self.dim + i], names[i]));
            }
        }
        for x in 0..2 * self.dim {
            if !z.bracket(&self.c_cl, &PvaExpr::gen(x)).is_zero() {
                bad.push(format!("C does not commute with {}", names[x]));
            }
        }
        if z.bracket(&self.d_cl, &self.d_cl) != self.c_cl.scale(&Scalar::from_int(2)) {
            bad.push("{D, D} != 2C".into());
        }
        bad
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gfz() -> PvaSpec {
        PvaSpec::gfz()
    }

    fn p(spec: &PvaSpec, s: &str) -> PvaExpr {
        spec.parse_expr(s).unwrap()
    }

    #[test]
    fn gfz_basic_brackets() {
        let s = gfz();
        assert_eq!(s.display_lam(&pva_bracket(&p(&s, "u"), &p(&s, "u"), &s)), "lam");
        assert_eq!(s.display_lam(&pva_bracket(&p(&s, "u"), &p(&s, "u^2"), &s)), "2*lam*u");
        assert_eq!(s.display_lam(&pva_bracket(&p(&s, "u^2"), &p(&s, "u"), &s)), "2*u' + 2*lam*u");
        assert!(s.check_skew().is_empty());
        assert!(s.check_jacobi().is_empty());
    }

    #[test]
    fn kdv_flow() {
        let s = gfz();
        let h2 = reduce_mod_t(&gfz_hamiltonian("h2").unwrap(), &s);
        let flow = hamiltonian_flow(&h2, &PvaExpr::gen(0), &s);
        assert_eq!(s.display_expr(&flow), "3*u*u' + u'''");
        let h0 = reduce_mod_t(&gfz_hamiltonian("h0").unwrap(), &s);
        let h1 = reduce_mod_t(&gfz_hamiltonian("h1").unwrap(), &s);
        assert!(hamiltonian_flow(&h0, &PvaExpr::gen(0), &s).is_zero());
        assert_eq!(s.display_expr(&hamiltonian_flow(&h1, &PvaExpr::gen(0), &s)), "u'");
        for a in [&h0, &h1, &h2] {
            for b in [&h0, &h1, &h2] {
                assert!(involution_check(a, b, &s));
            }
        }
        let neg = reduce_mod_t(&p(&s, "u'^2"), &s);
        let cube = reduce_mod_t(&p(&s, "u^3"), &s);
        // h1 generates translations, so this pair commutes as well
        assert!(involution(&h1, &neg, &s).is_zero());
        // by hand: -12 int u u' u'' = 6 int u'^3
        assert_eq!(s.display_expr(involution(&cube, &neg, &s).rep()), "6*u'^3");
    }

    #[test]
    fn mod_t_examples() {
        let s = gfz();
        assert!(reduce_mod_t(&p(&s, "u'"), &s).is_zero());
        assert!(reduce_mod_t(&p(&s, "u*u'"), &s).is_zero());
        assert!(!reduce_mod_t(&p(&s, "u'^2"), &s).is_zero());
        assert!(reduce_mod_t(&p(&s, "u'^2 + u*u''"), &s).is_zero());
        assert_eq!(s.display_expr(reduce_mod_t(&p(&s, "u*u''"), &s).rep()), "-u'^2");
    }

    #[test]
    fn parse_display_round_trip() {
        let s = gfz();
        for t in ["3*u*u' + u'''", "u^(4) - 1/2*u'^2", "(1/2)*u^3 + k*u", "0"] {
            let e = p(&s, t);
            assert_eq!(p(&s, &s.display_expr(&e)), e, "{t}");
        }
    }

    #[test]
    fn odd_generators_skew() {
        // b c system: {b lam c} = 1.
        let spec = PvaSpec::new(
            vec![PvaGen::new("b", Parity::Odd, Some(Rat::one())), PvaGen::new("c", Parity::Odd, Some(Rat::zero()))],
            vec![(0, 1, LamPoly::constant(PvaExpr::one()))],
        )
        .unwrap();
        assert!(spec.check_skew().is_empty());
        assert!(spec.check_jacobi().is_empty());
        let x = spec.parse_expr("b*c'").unwrap();
        let y = spec.parse_expr("b'*c*b").unwrap();
        let l = pva_bracket(&x, &y, &spec);
        let r = pva_bracket(&y, &x, &spec).subst_neg_lam_minus_t(&spec.parity);
        assert_eq!(l, r.scale(&Scalar::from_int(-1)));
    }

    #[test]
    fn quasiclassical_free_boson() {
        use crate::terms::{GeneratorDecl, LambdaExpr, Registry};
        let reg = Registry::new(vec![GeneratorDecl::new("u", Parity::Even, Rat::one())]).unwrap();
        let eps = Scalar::param("eps");
        let fam = LcaSpec::new(
            reg.clone(),
            vec![(0, 0, LambdaExpr::from_lam_coeffs(&[Expr::zero(), Expr::scalar(eps)]))],
            true,
        )
        .unwrap();
        let lim = quasiclassical_limit(&fam, "eps").unwrap();
        assert_eq!(lim.gen_bracket(0, 0), LamPoly::lam());
        let bad = LcaSpec::new(reg, vec![(0, 0, LambdaExpr::from_lam_coeffs(&[Expr::zero(), Expr::vacuum()]))], true)
            .unwrap();
        assert!(matches!(quasiclassical_limit(&bad, "eps"), Err(PvaError::NotDivisibleByEpsilon(..))));
    }

    #[test]
    fn zhu_of_virasoro_and_currents() {
        let vir =
            PvaSpec::new(vec![PvaGen::new("L", Parity::Even, Some(Rat::from_integer(2.into())))], vec![]).unwrap();
        let vir = PvaSpec::new(vir.gens(), vec![(0, 0, vir.parse_lam("L' + 2*lam*L + c/12*lam^3").unwrap())]).unwrap();
        assert!(vir.check_skew().is_empty() && vir.check_jacobi().is_empty());
        let z = pva_zhu(&vir, &Scalar::one()).unwrap();
        assert!(z.table.is_empty());
        assert!(z.check_axioms().unwrap().is_empty());

        let data = LieAlgData::sl2();
        let k = Scalar::param("k");
        let cur = crate::constructions::cur(&data, &k).unwrap();
        let spec = quasiclassical_limit(&epsilon_family(&cur, "eps").unwrap(), "eps").unwrap();
        assert!(spec.check_skew().is_empty() && spec.check_jacobi().is_empty());
        let z = pva_zhu(&spec, &Scalar::one()).unwrap();
        assert!(z.check_axioms().unwrap().is_empty());
        let e = data.index("e").unwrap();
        let f = data.index("f").unwrap();
        let h = data.index("h").unwrap();
        assert_eq!(z.table[&(e, f)], PvaExpr::gen(h));
    }

    #[test]
    fn weil_corner_sl2() {
        let w = weil_corner(&LieAlgData::sl2()).unwrap();
        assert!(w.spec.check_skew().is_empty());
        assert!(w.zhu.check_axioms().unwrap().is_empty());
        assert_eq!(w.check(), Vec::<String>::new());
    }
}
