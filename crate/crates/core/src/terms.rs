//! Elements of freely generated vertex algebras.
//!
//! A [`Monomial`] is a word of divided-power terms `T^(n) e`, read as the
//! right-nested normally ordered product `:e1(:e2(...es):):`.  An [`Expr`] is
//! a finite linear combination of monomials and a [`LambdaExpr`] a
//! polynomial in the formal variables `lam`, `mu`, ... with `Expr`
//! coefficients.

use crate::scalar::{binom_int, Rat, Scalar};
use num_traits::{One, Signed, Zero};
use smallvec::SmallVec;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TermsError {
    #[error("unknown generator '{0}'")]
    UnknownGenerator(String),
    #[error("parse error at offset {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("{0}")]
    Eval(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn is_odd(self) -> bool {
        self == Parity::Odd
    }

    pub fn add(self, o: Parity) -> Parity {
        if self == o {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn flip(self) -> Parity {
        self.add(Parity::Odd)
    }

    /// `s(a)`: +1 for even, -1 for odd.
    pub fn sign(self) -> i64 {
        if self.is_odd() {
            -1
        } else {
            1
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

/// `p(a,b)`: -1 iff both arguments are odd.
pub fn psign(a: Parity, b: Parity) -> i64 {
    if a.is_odd() && b.is_odd() {
        -1
    } else {
        1
    }
}

/// Fractional part in `[0,1)`.
pub fn frac(q: &Rat) -> Rat {
    q - q.floor()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorDecl {
    pub id: String,
    pub parity: Parity,
    pub delta: Rat,
    pub zeta: Rat,
    pub charge: i64,
    pub coset: Rat,
    pub bigrade: Option<(Rat, Rat)>,
}

impl GeneratorDecl {
    /// Defaults: `zeta = delta` when positive (else 1), charge 0, coset `delta mod 1`.
    pub fn new(id: &str, parity: Parity, delta: Rat) -> Self {
        let zeta = if delta.is_positive() { delta.clone() } else { Rat::one() };
        let coset = frac(&delta);
        GeneratorDecl { id: id.to_string(), parity, delta, zeta, charge: 0, coset, bigrade: None }
    }

    pub fn with_zeta(mut self, z: Rat) -> Self {
        self.zeta = z;
        self
    }

    pub fn with_charge(mut self, c: i64) -> Self {
        self.charge = c;
        self
    }

    pub fn with_bigrade(mut self, p: Rat, q: Rat) -> Self {
        self.bigrade = Some((p, q));
        self
    }
}

/// Frozen list of generators in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Registry {
    gens: Vec<GeneratorDecl>,
    index: HashMap<String, usize>,
}

impl Registry {
    pub fn new(gens: Vec<GeneratorDecl>) -> Result<Self, TermsError> {
        let mut index = HashMap::new();
        for (i, g) in gens.iter().enumerate() {
            if index.insert(g.id.clone(), i).is_some() {
                return Err(TermsError::Eval(format!("duplicate generator '{}'", g.id)));
            }
        }
        Ok(Registry { gens, index })
    }

    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    pub fn gens(&self) -> &[GeneratorDecl] {
        &self.gens
    }

    pub fn get(&self, i: usize) -> &GeneratorDecl {
        &self.gens[i]
    }

    pub fn lookup(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, id: &str) -> Result<usize, TermsError> {
        self.lookup(id).ok_or_else(|| TermsError::UnknownGenerator(id.to_string()))
    }

    pub fn name(&self, i: usize) -> &str {
        &self.gens[i].id
    }

    pub fn parity(&self, i: usize) -> Parity {
        self.gens[i].parity
    }

    pub fn mono_parity(&self, m: &Monomial) -> Parity {
        m.0.iter().fold(Parity::Even, |p, t| p.add(self.parity(t.gen as usize)))
    }

    pub fn mono_delta(&self, m: &Monomial) -> Rat {
        m.0.iter().fold(Rat::zero(), |d, t| d + &self.gens[t.gen as usize].delta + Rat::from_integer(t.tpow.into()))
    }

    pub fn mono_zeta(&self, m: &Monomial) -> Rat {
        m.0.iter().fold(Rat::zero(), |d, t| d + &self.gens[t.gen as usize].zeta)
    }

    pub fn mono_charge(&self, m: &Monomial) -> i64 {
        m.0.iter().map(|t| self.gens[t.gen as usize].charge).sum()
    }

    /// Sum of the `(p,q)` bidegrees; `None` if some generator has none.
    pub fn mono_bigrade(&self, m: &Monomial) -> Option<(Rat, Rat)> {
        let mut p = Rat::zero();
        let mut q = Rat::zero();
        for t in &m.0 {
            let (a, b) = self.gens[t.gen as usize].bigrade.clone()?;
            p += a;
            q += b;
        }
        Some((p, q))
    }

    /// Ordered monomial: nondecreasing terms, strictly increasing at odd repeats.
    pub fn is_ordered(&self, m: &Monomial) -> bool {
        m.0.windows(2).all(|w| w[0] < w[1] || (w[0] == w[1] && !self.parity(w[0].gen as usize).is_odd()))
    }

    pub fn make_monomial(&self, terms: &[(&str, u32)]) -> Result<Monomial, TermsError> {
        let mut v = SmallVec::new();
        for (id, n) in terms {
            v.push(Term { gen: self.id(id)? as u32, tpow: *n });
        }
        Ok(Monomial(v))
    }
}

/// `T^(tpow) gen`; ordered by generator declaration order, then T-power.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    pub gen: u32,
    pub tpow: u32,
}

impl Term {
    pub fn new(gen: usize, tpow: u32) -> Self {
        Term { gen: gen as u32, tpow }
    }
}

pub fn compare_index(a: &Term, b: &Term) -> std::cmp::Ordering {
    a.cmp(b)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial(pub SmallVec<[Term; 4]>);

impl Monomial {
    pub fn vacuum() -> Self {
        Monomial(SmallVec::new())
    }

    pub fn single(t: Term) -> Self {
        let mut v = SmallVec::new();
        v.push(t);
        Monomial(v)
    }

    pub fn gen(g: usize) -> Self {
        Monomial::single(Term::new(g, 0))
    }

    pub fn is_vacuum(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terms(&self) -> &[Term] {
        &self.0
    }

    pub fn head(&self) -> Term {
        self.0[0]
    }

    pub fn tail(&self) -> Monomial {
        Monomial(self.0[1..].iter().copied().collect())
    }

    pub fn cons(t: Term, rest: &Monomial) -> Monomial {
        let mut v: SmallVec<[Term; 4]> = SmallVec::with_capacity(rest.len() + 1);
        v.push(t);
        v.extend_from_slice(&rest.0);
        Monomial(v)
    }

    pub fn concat(&self, o: &Monomial) -> Monomial {
        let mut v = self.0.clone();
        v.extend_from_slice(&o.0);
        Monomial(v)
    }

    pub fn total_tpow(&self) -> u32 {
        self.0.iter().map(|t| t.tpow).sum()
    }

    pub fn display<'a>(&'a self, reg: &'a Registry) -> MonoDisplay<'a> {
        MonoDisplay { m: self, reg }
    }
}

pub struct MonoDisplay<'a> {
    m: &'a Monomial,
    reg: &'a Registry,
}

fn fmt_term(t: &Term, reg: &Registry) -> String {
    let n = reg.name(t.gen as usize);
    match t.tpow {
        0 => n.to_string(),
        1 => format!("T({n})"),
        k => format!("T^{k}({n})"),
    }
}

impl fmt::Display for MonoDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.m.len() {
            0 => write!(f, "|0>"),
            1 => write!(f, "{}", fmt_term(&self.m.0[0], self.reg)),
            _ => {
                let parts: Vec<String> = self.m.0.iter().map(|t| fmt_term(t, self.reg)).collect();
                write!(f, ":{}:", parts.join(" "))
            }
        }
    }
}

/// Finite linear combination of monomials.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Expr {
    terms: BTreeMap<Monomial, Scalar>,
}

impl Expr {
    pub fn zero() -> Self {
        Expr::default()
    }

    pub fn vacuum() -> Self {
        Expr::mono(Monomial::vacuum())
    }

    pub fn scalar(c: Scalar) -> Self {
        Expr::mono_scaled(Monomial::vacuum(), c)
    }

    pub fn mono(m: Monomial) -> Self {
        Expr::mono_scaled(m, Scalar::one())
    }

    pub fn mono_scaled(m: Monomial, c: Scalar) -> Self {
        let mut e = Expr::zero();
        e.add_term(m, c);
        e
    }

    pub fn gen(g: usize) -> Self {
        Expr::mono(Monomial::gen(g))
    }

    pub fn term(t: Term) -> Self {
        Expr::mono(Monomial::single(t))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Monomial, &Scalar)> {
        self.terms.iter()
    }

    pub fn monomials(&self) -> impl Iterator<Item = &Monomial> {
        self.terms.keys()
    }

    pub fn coeff(&self, m: &Monomial) -> Scalar {
        self.terms.get(m).cloned().unwrap_or_else(Scalar::zero)
    }

    /// Coefficient of the vacuum if the expression is a multiple of it.
    pub fn as_scalar(&self) -> Option<Scalar> {
        if self.is_zero() {
            return Some(Scalar::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Monomial::vacuum()) {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn add_term(&mut self, m: Monomial, c: Scalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get() + &c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add_scaled(&mut self, o: &Expr, c: &Scalar) {
        if c.is_zero() {
            return;
        }
        for (m, a) in &o.terms {
            self.add_term(m.clone(), if c.is_one() { a.clone() } else { a * c });
        }
    }

    pub fn add_assign(&mut self, o: &Expr) {
        self.add_scaled(o, &Scalar::one());
    }

    pub fn scale(&self, c: &Scalar) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr { terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect() }
    }

    pub fn neg(&self) -> Expr {
        Expr { terms: self.terms.iter().map(|(m, a)| (m.clone(), a.neg())).collect() }
    }

    pub fn add(&self, o: &Expr) -> Expr {
        let mut r = self.clone();
        r.add_assign(o);
        r
    }

    pub fn sub(&self, o: &Expr) -> Expr {
        let mut r = self.clone();
        r.add_scaled(o, &Scalar::from_int(-1));
        r
    }

    pub fn try_map_scalars<E>(&self, f: impl Fn(&Scalar) -> Result<Scalar, E>) -> Result<Expr, E> {
        let mut r = Expr::zero();
        for (m, c) in &self.terms {
            r.add_term(m.clone(), f(c)?);
        }
        Ok(r)
    }

    pub fn substitute(&self, assign: &HashMap<String, Scalar>) -> Result<Expr, crate::scalar::ScalarError> {
        self.try_map_scalars(|c| c.substitute(assign))
    }

    pub fn is_normal(&self, reg: &Registry) -> bool {
        self.terms.keys().all(|m| reg.is_ordered(m))
    }

    /// Conformal weight if all monomials share it.
    pub fn homogeneous_delta(&self, reg: &Registry) -> Option<Rat> {
        let mut it = self.terms.keys().map(|m| reg.mono_delta(m));
        let first = it.next()?;
        it.all(|d| d == first).then_some(first)
    }

    pub fn parity(&self, reg: &Registry) -> Option<Parity> {
        let mut it = self.terms.keys().map(|m| reg.mono_parity(m));
        let first = it.next()?;
        it.all(|d| d == first).then_some(first)
    }

    pub fn display<'a>(&'a self, reg: &'a Registry) -> ExprDisplay<'a> {
        ExprDisplay { e: self, reg, lam: None }
    }
}

/// Coefficient prefix and sign for a printed term.
pub(crate) fn coeff_parts(c: &Scalar) -> (bool, String) {
    let single = c.is_polynomial() && c.numer().terms().len() == 1;
    if single {
        let neg = c.numer().terms()[0].1.is_negative();
        let a = if neg { c.neg() } else { c.clone() };
        if a.is_one() {
            (neg, String::new())
        } else {
            (neg, format!("{a}*"))
        }
    } else {
        (false, format!("({c})*"))
    }
}

pub struct ExprDisplay<'a> {
    e: &'a Expr,
    reg: &'a Registry,
    lam: Option<String>,
}

fn write_terms<'a>(
    f: &mut fmt::Formatter<'_>,
    first: &mut bool,
    items: impl Iterator<Item = (&'a Monomial, &'a Scalar)>,
    lam: &str,
    reg: &Registry,
) -> fmt::Result {
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
        write!(f, "{pre}{lam}{}", m.display(reg))?;
    }
    Ok(())
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.e.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        write_terms(f, &mut first, self.e.iter(), self.lam.as_deref().unwrap_or(""), self.reg)
    }
}

pub const LAMBDA_VARS: &[&str] = &["lam", "mu", "nu"];

/// Polynomial in `lam, mu, nu` with [`Expr`] coefficients; keys are exponent vectors without trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LambdaExpr {
    coeffs: BTreeMap<Vec<u32>, Expr>,
}

fn trim(mut k: Vec<u32>) -> Vec<u32> {
    while k.last() == Some(&0) {
        k.pop();
    }
    k
}

impl LambdaExpr {
    pub fn zero() -> Self {
        LambdaExpr::default()
    }

    pub fn from_expr(e: Expr) -> Self {
        let mut l = LambdaExpr::zero();
        l.add_at(vec![], &e, &Scalar::one());
        l
    }

    /// `sum_n lam^n e_n` from a list of coefficients in the first variable.
    pub fn from_lam_coeffs(cs: &[Expr]) -> Self {
        let mut l = LambdaExpr::zero();
        for (n, e) in cs.iter().enumerate() {
            l.add_at(vec![n as u32], e, &Scalar::one());
        }
        l
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<u32>, &Expr)> {
        self.coeffs.iter()
    }

    pub fn add_at(&mut self, key: Vec<u32>, e: &Expr, c: &Scalar) {
        if e.is_zero() || c.is_zero() {
            return;
        }
        let key = trim(key);
        let slot = self.coeffs.entry(key.clone()).or_default();
        slot.add_scaled(e, c);
        if slot.is_zero() {
            self.coeffs.remove(&key);
        }
    }

    pub fn add_assign(&mut self, o: &LambdaExpr) {
        for (k, e) in &o.coeffs {
            self.add_at(k.clone(), e, &Scalar::one());
        }
    }

    pub fn add_scaled(&mut self, o: &LambdaExpr, c: &Scalar) {
        for (k, e) in &o.coeffs {
            self.add_at(k.clone(), e, c);
        }
    }

    pub fn scale(&self, c: &Scalar) -> LambdaExpr {
        let mut r = LambdaExpr::zero();
        r.add_scaled(self, c);
        r
    }

    pub fn sub(&self, o: &LambdaExpr) -> LambdaExpr {
        let mut r = self.clone();
        r.add_scaled(o, &Scalar::from_int(-1));
        r
    }

    /// Coefficient of the given exponent vector.
    pub fn get(&self, key: &[u32]) -> Expr {
        self.coeffs.get(&trim(key.to_vec())).cloned().unwrap_or_default()
    }

    /// Coefficient of `lam^n` in a one-variable polynomial.
    pub fn coeff(&self, n: u32) -> Expr {
        self.get(&[n])
    }

    /// Degree in the first variable.
    pub fn degree(&self) -> Option<u32> {
        self.coeffs.keys().map(|k| k.first().copied().unwrap_or(0)).max()
    }

    pub fn nvars(&self) -> usize {
        self.coeffs.keys().map(|k| k.len()).max().unwrap_or(0)
    }

    /// The list `e_0, e_1, ...` when only the first variable occurs.
    pub fn lam_coeffs(&self) -> Vec<Expr> {
        let d = match self.degree() {
            None => return vec![],
            Some(d) => d,
        };
        (0..=d).map(|n| self.coeff(n)).collect()
    }

    /// Multiply by a monomial in the variables.
    pub fn shift(&self, key: &[u32]) -> LambdaExpr {
        let mut r = LambdaExpr::zero();
        for (k, e) in &self.coeffs {
            let n = k.len().max(key.len());
            let nk: Vec<u32> =
                (0..n).map(|i| k.get(i).copied().unwrap_or(0) + key.get(i).copied().unwrap_or(0)).collect();
            r.add_at(nk, e, &Scalar::one());
        }
        r
    }

    pub fn map_exprs(&self, f: impl Fn(&Expr) -> Expr) -> LambdaExpr {
        let mut r = LambdaExpr::zero();
        for (k, e) in &self.coeffs {
            r.add_at(k.clone(), &f(e), &Scalar::one());
        }
        r
    }

    pub fn try_map_exprs<E>(&self, f: impl Fn(&Expr) -> Result<Expr, E>) -> Result<LambdaExpr, E> {
        let mut r = LambdaExpr::zero();
        for (k, e) in &self.coeffs {
            r.add_at(k.clone(), &f(e)?, &Scalar::one());
        }
        Ok(r)
    }

    /// The degree-zero slice, if nothing else is present.
    pub fn as_expr(&self) -> Option<Expr> {
        if self.coeffs.keys().all(|k| k.is_empty()) {
            Some(self.get(&[]))
        } else {
            None
        }
    }

    /// Pure scalar polynomial (all coefficients multiples of the vacuum).
    pub fn is_scalar_like(&self) -> bool {
        self.coeffs.values().all(|e| e.as_scalar().is_some())
    }

    pub fn display<'a>(&'a self, reg: &'a Registry) -> LambdaDisplay<'a> {
        LambdaDisplay { l: self, reg }
    }
}

pub struct LambdaDisplay<'a> {
    l: &'a LambdaExpr,
    reg: &'a Registry,
}

fn lam_prefix(k: &[u32]) -> String {
    let mut s = String::new();
    for (i, e) in k.iter().enumerate() {
        match e {
            0 => {}
            1 => s.push_str(&format!("{}*", LAMBDA_VARS[i])),
            e => s.push_str(&format!("{}^{e}*", LAMBDA_VARS[i])),
        }
    }
    s
}

impl fmt::Display for LambdaDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.l.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, e) in &self.l.coeffs {
            write_terms(f, &mut first, e.iter(), &lam_prefix(k), self.reg)?;
        }
        Ok(())
    }
}

/// `T^(r)` applied to a word by the multinomial Leibniz rule; output words
/// keep their positions and may be out of order.
pub fn apply_t_mono_raw(m: &Monomial, r: u32) -> Expr {
    if r == 0 {
        return Expr::mono(m.clone());
    }
    if m.is_vacuum() {
        return Expr::zero();
    }
    let mut out = Expr::zero();
    let mut word = m.clone();
    distribute(m, 0, r, &mut word, &Scalar::one(), &mut out);
    out
}

fn distribute(m: &Monomial, pos: usize, left: u32, word: &mut Monomial, c: &Scalar, out: &mut Expr) {
    let t = m.0[pos];
    if pos + 1 == m.len() {
        let f = binom_int((t.tpow + left) as i64, left);
        word.0[pos] = Term { gen: t.gen, tpow: t.tpow + left };
        out.add_term(word.clone(), c * &Scalar::from_rat(f));
        word.0[pos] = t;
        return;
    }
    for j in 0..=left {
        let f = binom_int((t.tpow + j) as i64, j);
        word.0[pos] = Term { gen: t.gen, tpow: t.tpow + j };
        distribute(m, pos + 1, left - j, word, &(c * &Scalar::from_rat(f)), out);
    }
    word.0[pos] = t;
}

/// `T^(r) x` without reordering.
pub fn apply_t_raw(x: &Expr, r: u32) -> Expr {
    let mut out = Expr::zero();
    for (m, c) in x.iter() {
        out.add_scaled(&apply_t_mono_raw(m, r), c);
    }
    out
}

/// Single application of `T` (raw).
pub fn apply_t(x: &Expr) -> Expr {
    apply_t_raw(x, 1).scale(&Scalar::one())
}

/// Parsed expression tree prior to normal ordering.
#[derive(Clone, Debug, PartialEq)]
pub enum Raw {
    Vac,
    Gen(usize),
    Num(Scalar),
    Lam(usize, u32),
    Add(Vec<Raw>),
    Neg(Box<Raw>),
    Mul(Vec<Raw>),
    Div(Box<Raw>, Box<Raw>),
    T(u32, Box<Raw>),
    Nop(Vec<Raw>),
}

/// Operations needed to evaluate a [`Raw`] tree.
pub trait RawOps {
    fn nop(&self, a: &Expr, b: &Expr) -> Result<Expr, TermsError>;
    fn tpow(&self, a: &Expr, n: u32) -> Result<Expr, TermsError>;
}

/// Literal evaluation: words are concatenated without reordering.
pub struct Literal;

impl RawOps for Literal {
    fn nop(&self, a: &Expr, b: &Expr) -> Result<Expr, TermsError> {
        let mut out = Expr::zero();
        for (m1, c1) in a.iter() {
            for (m2, c2) in b.iter() {
                out.add_term(m1.concat(m2), c1 * c2);
            }
        }
        Ok(out)
    }

    fn tpow(&self, a: &Expr, n: u32) -> Result<Expr, TermsError> {
        Ok(apply_t_raw(a, n))
    }
}

impl Raw {
    pub fn eval(&self, ops: &dyn RawOps) -> Result<LambdaExpr, TermsError> {
        Ok(match self {
            Raw::Vac => LambdaExpr::from_expr(Expr::vacuum()),
            Raw::Gen(g) => LambdaExpr::from_expr(Expr::gen(*g)),
            Raw::Num(s) => LambdaExpr::from_expr(Expr::scalar(s.clone())),
            Raw::Lam(v, n) => {
                let mut k = vec![0; v + 1];
                k[*v] = *n;
                let mut l = LambdaExpr::zero();
                l.add_at(k, &Expr::vacuum(), &Scalar::one());
                l
            }
            Raw::Add(xs) => {
                let mut acc = LambdaExpr::zero();
                for x in xs {
                    acc.add_assign(&x.eval(ops)?);
                }
                acc
            }
            Raw::Neg(x) => x.eval(ops)?.scale(&Scalar::from_int(-1)),
            Raw::Mul(xs) => {
                let mut acc = LambdaExpr::from_expr(Expr::vacuum());
                for x in xs {
                    acc = mul_values(&acc, &x.eval(ops)?)?;
                }
                acc
            }
            Raw::Div(a, b) => {
                let d = b.eval(ops)?;
                let s = d
                    .as_expr()
                    .and_then(|e| e.as_scalar())
                    .ok_or_else(|| TermsError::Eval("divisor must be a scalar".into()))?;
                let inv = s.inv().map_err(|_| TermsError::Eval("division by zero".into()))?;
                a.eval(ops)?.scale(&inv)
            }
            Raw::T(n, x) => {
                let v = x.eval(ops)?;
                v.try_map_exprs(|e| ops.tpow(e, *n))?
            }
            Raw::Nop(xs) => {
                let mut vals = Vec::new();
                for x in xs {
                    vals.push(
                        x.eval(ops)?
                            .as_expr()
                            .ok_or_else(|| TermsError::Eval("lambda inside a normally ordered product".into()))?,
                    );
                }
                let mut acc = vals.pop().unwrap_or_else(Expr::vacuum);
                while let Some(v) = vals.pop() {
                    acc = ops.nop(&v, &acc)?;
                }
                LambdaExpr::from_expr(acc)
            }
        })
    }
}

fn mul_values(a: &LambdaExpr, b: &LambdaExpr) -> Result<LambdaExpr, TermsError> {
    let (s, v) = if a.is_scalar_like() {
        (a, b)
    } else if b.is_scalar_like() {
        (b, a)
    } else {
        return Err(TermsError::Eval("product of two vectors; use :x y:".into()));
    };
    let mut out = LambdaExpr::zero();
    for (k, e) in s.iter() {
        let c = e.as_scalar().unwrap();
        out.add_scaled(&v.shift(k), &c);
    }
    Ok(out)
}

/// Identifier lookup for the expression parser.
pub struct ParseEnv<'a> {
    pub reg: &'a Registry,
    /// Declared parameters; `None` accepts any non-generator identifier.
    pub params: Option<&'a BTreeSet<String>>,
}

pub fn parse_raw(text: &str, env: &ParseEnv) -> Result<Raw, TermsError> {
    let mut p = ExprParser { s: text.as_bytes(), pos: 0, env };
    let r = p.sum()?;
    p.ws();
    if p.pos != p.s.len() {
        return p.err("unexpected trailing input");
    }
    Ok(r)
}

/// Parse and evaluate literally (words kept as written).
pub fn parse_literal(text: &str, env: &ParseEnv) -> Result<LambdaExpr, TermsError> {
    parse_raw(text, env)?.eval(&Literal)
}

struct ExprParser<'a, 'b> {
    s: &'a [u8],
    pos: usize,
    env: &'a ParseEnv<'b>,
}

impl ExprParser<'_, '_> {
    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.pos).copied()
    }

    fn err<T>(&self, msg: &str) -> Result<T, TermsError> {
        Err(TermsError::Parse { pos: self.pos, msg: msg.into() })
    }

    fn expect(&mut self, c: u8) -> Result<(), TermsError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(&format!("expected '{}'", c as char))
        }
    }

    fn sum(&mut self) -> Result<Raw, TermsError> {
        let mut parts = Vec::new();
        let neg = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                true
            }
            Some(b'+') => {
                self.pos += 1;
                false
            }
            _ => false,
        };
        let t = self.product()?;
        parts.push(if neg { Raw::Neg(Box::new(t)) } else { t });
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    parts.push(self.product()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    parts.push(Raw::Neg(Box::new(self.product()?)));
                }
                _ => break,
            }
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Raw::Add(parts) })
    }

    fn product(&mut self) -> Result<Raw, TermsError> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let r = self.power()?;
                    acc = match acc {
                        Raw::Mul(mut v) => {
                            v.push(r);
                            Raw::Mul(v)
                        }
                        a => Raw::Mul(vec![a, r]),
                    };
                }
                Some(b'/') => {
                    self.pos += 1;
                    let r = self.power()?;
                    acc = Raw::Div(Box::new(acc), Box::new(r));
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn uint(&mut self) -> Result<u32, TermsError> {
        self.ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected integer");
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| TermsError::Parse { pos: start, msg: "integer too large".into() })
    }

    fn power(&mut self) -> Result<Raw, TermsError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.uint()?;
            return Ok(match base {
                Raw::Lam(v, n) => Raw::Lam(v, n * e),
                Raw::Num(s) => Raw::Num(s.pow(e)),
                _ => return self.err("only scalars and lambda variables may be raised to powers"),
            });
        }
        Ok(base)
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.s.len() {
            let c = self.s[self.pos];
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else if c == b'^' && self.s.get(self.pos + 1).is_some_and(|d| d.is_ascii_alphabetic()) {
                self.pos += 1;
            } else {
                break;
            }
        }
        String::from_utf8(self.s[start..self.pos].to_vec()).unwrap()
    }

    fn atom(&mut self) -> Result<Raw, TermsError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let v = self.sum()?;
                self.expect(b')')?;
                Ok(v)
            }
            Some(b'|') => {
                if self.s[self.pos..].starts_with(b"|0>") {
                    self.pos += 3;
                    Ok(Raw::Vac)
                } else {
                    self.err("expected |0>")
                }
            }
            Some(b':') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    if self.peek() == Some(b':') {
                        self.pos += 1;
                        break;
                    }
                    if self.peek().is_none() {
                        return self.err("unterminated normally ordered product");
                    }
                    items.push(self.power()?);
                }
                if items.is_empty() {
                    return self.err("empty normally ordered product");
                }
                Ok(Raw::Nop(items))
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let n: num_bigint::BigInt = std::str::from_utf8(&self.s[start..self.pos]).unwrap().parse().unwrap();
                Ok(Raw::Num(Scalar::from_rat(Rat::from_integer(n))))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                let name = self.ident();
                if name == "T" {
                    let n = if self.peek() == Some(b'^') {
                        self.pos += 1;
                        self.uint()?
                    } else {
                        1
                    };
                    self.expect(b'(')?;
                    let v = self.sum()?;
                    self.expect(b')')?;
                    return Ok(Raw::T(n, Box::new(v)));
                }
                if let Some(g) = self.env.reg.lookup(&name) {
                    return Ok(Raw::Gen(g));
                }
                if let Some(v) = LAMBDA_VARS.iter().position(|x| *x == name) {
                    return Ok(Raw::Lam(v, 1));
                }
                if name == "lambda" {
                    return Ok(Raw::Lam(0, 1));
                }
                match self.env.params {
                    Some(ps) if !ps.contains(&name) => {
                        Err(TermsError::Parse { pos: start, msg: format!("unknown identifier '{name}'") })
                    }
                    _ => Ok(Raw::Num(Scalar::param(&name))),
                }
            }
            _ => self.err("expected an expression"),
        }
    }
}
