//! The rewrite engine.
//!
//! An [`LcaSpec`] presents a non-linear Lie conformal algebra by a table of
//! n-th products between generators.  An [`Engine`] extends the table to the
//! whole enveloping vertex algebra: normally ordered products are brought
//! to ordered form by quasicommutativity and quasi-associativity, and
//! brackets of monomials are computed with sesquilinearity, the left Wick
//! formula and skewsymmetry.
//!
//! Internally everything is in mode form: `products(a, b)[n] = a_(n) b`,
//! so `[a_lam b] = sum_n lam^n / n! a_(n) b`.

use crate::scalar::{binom_int, Rat, Scalar};
use crate::terms::{
    apply_t_raw, psign, Expr, LambdaExpr, Monomial, Parity, ParseEnv, Raw, RawOps, Registry, Term, TermsError,
};
use num_bigint::BigInt;
use num_traits::One;
use rayon::prelude::*;
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WickError {
    #[error("grading violation in [{a} {b}]: monomial {mono} has zeta {zeta} >= {bound}")]
    GradingViolation { a: String, b: String, mono: String, zeta: String, bound: String },
    #[error("bracket [{a} {b}] is not homogeneous: coefficient of lam^{n} should have weight {expected}")]
    NotHomogeneous { a: String, b: String, n: u32, expected: String },
    #[error("table entry [{a} {b}] uses a second lambda variable")]
    MultiVariable { a: String, b: String },
    #[error("unsupported integration bound '{0}'")]
    UnsupportedBound(String),
    #[error("input is not homogeneous")]
    InhomogeneousInput,
    #[error(transparent)]
    Terms(#[from] TermsError),
}

pub fn factorial(n: u32) -> Scalar {
    let mut r = BigInt::one();
    for i in 2..=n {
        r *= i;
    }
    Scalar::from_rat(Rat::from_integer(r))
}

fn binq(n: i64, j: u32) -> Scalar {
    Scalar::from_rat(binom_int(n, j))
}

fn sgn(e: i64) -> Scalar {
    Scalar::from_int(e)
}

/// `lam`-polynomial to n-th products: `p_n = n! c_n`.
pub fn lambda_to_products(l: &LambdaExpr) -> Vec<Expr> {
    l.lam_coeffs().iter().enumerate().map(|(n, e)| e.scale(&factorial(n as u32))).collect()
}

/// n-th products to a `lam`-polynomial.
pub fn products_to_lambda(p: &[Expr]) -> LambdaExpr {
    let cs: Vec<Expr> = p.iter().enumerate().map(|(n, e)| e.scale(&factorial(n as u32).inv().unwrap())).collect();
    LambdaExpr::from_lam_coeffs(&cs)
}

fn trim_vec(v: &mut Vec<Expr>) {
    while v.last().is_some_and(|e| e.is_zero()) {
        v.pop();
    }
}

fn add_at(v: &mut Vec<Expr>, n: usize, e: &Expr, c: &Scalar) {
    if e.is_zero() || c.is_zero() {
        return;
    }
    if v.len() <= n {
        v.resize(n + 1, Expr::zero());
    }
    v[n].add_scaled(e, c);
}

/// Presentation of a non-linear Lie conformal algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct LcaSpec {
    pub reg: Registry,
    /// Given entries as n-th products, keyed by ordered generator pair.
    table: BTreeMap<(usize, usize), Vec<Expr>>,
    pub hamiltonian: bool,
    /// Declared formal parameters (used by text parsing).
    pub params: BTreeSet<String>,
}

impl LcaSpec {
    /// Validate and freeze.  Entries are `[a_lam b]` as lam-polynomials.
    pub fn new(reg: Registry, entries: Vec<(usize, usize, LambdaExpr)>, hamiltonian: bool) -> Result<Self, WickError> {
        let mut table = BTreeMap::new();
        for (a, b, l) in entries {
            if l.nvars() > 1 {
                return Err(WickError::MultiVariable { a: reg.name(a).into(), b: reg.name(b).into() });
            }
            let mut p = lambda_to_products(&l);
            trim_vec(&mut p);
            let slot: &mut Vec<Expr> = table.entry((a, b)).or_default();
            for (n, e) in p.iter().enumerate() {
                add_at(slot, n, e, &Scalar::one());
            }
            trim_vec(slot);
        }
        let spec = LcaSpec { reg, table, hamiltonian, params: BTreeSet::new() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_params(mut self, params: impl IntoIterator<Item = String>) -> Self {
        self.params.extend(params);
        self
    }

    fn validate(&self) -> Result<(), WickError> {
        for (&(a, b), prods) in &self.table {
            let bound = &self.reg.get(a).zeta + &self.reg.get(b).zeta;
            for (n, e) in prods.iter().enumerate() {
                for m in e.monomials() {
                    for t in m.terms() {
                        if t.gen as usize >= self.reg.len() {
                            return Err(TermsError::UnknownGenerator(format!("#{}", t.gen)).into());
                        }
                    }
                    let z = self.reg.mono_zeta(m);
                    if z >= bound {
                        return Err(WickError::GradingViolation {
                            a: self.reg.name(a).into(),
                            b: self.reg.name(b).into(),
                            mono: m.display(&self.reg).to_string(),
                            zeta: z.to_string(),
                            bound: bound.to_string(),
                        });
                    }
                    if self.hamiltonian {
                        let expected =
                            &self.reg.get(a).delta + &self.reg.get(b).delta - Rat::from_integer((n as i64 + 1).into());
                        if self.reg.mono_delta(m) != expected {
                            return Err(WickError::NotHomogeneous {
                                a: self.reg.name(a).into(),
                                b: self.reg.name(b).into(),
                                n: n as u32,
                                expected: expected.to_string(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Given entry, as n-th products, if present.
    pub fn entry(&self, a: usize, b: usize) -> Option<&Vec<Expr>> {
        self.table.get(&(a, b))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &Vec<Expr>)> {
        self.table.iter()
    }

    pub fn entry_lambda(&self, a: usize, b: usize) -> Option<LambdaExpr> {
        self.entry(a, b).map(|p| products_to_lambda(p))
    }

    pub fn parse_env(&self) -> ParseEnv<'_> {
        ParseEnv { reg: &self.reg, params: if self.params.is_empty() { None } else { Some(&self.params) } }
    }

    /// Linear table: every entry is a combination of single terms and the vacuum.
    pub fn is_linear(&self) -> bool {
        self.table.values().flatten().all(|e| e.monomials().all(|m| m.len() <= 1))
    }

    /// Specialise parameters in all entries.
    pub fn substitute(&self, assign: &HashMap<String, Scalar>) -> Result<LcaSpec, crate::scalar::ScalarError> {
        let mut table = BTreeMap::new();
        for (k, v) in &self.table {
            let mut nv = Vec::new();
            for e in v {
                nv.push(e.substitute(assign)?);
            }
            trim_vec(&mut nv);
            table.insert(*k, nv);
        }
        let params = self.params.iter().filter(|p| !assign.contains_key(*p)).cloned().collect();
        Ok(LcaSpec { reg: self.reg.clone(), table, hamiltonian: self.hamiltonian, params })
    }
}

/// Integration bounds.
#[derive(Clone, Debug, PartialEq)]
pub enum Bound {
    Zero,
    Var(usize),
    /// `sign * T`, acting on the coefficient.
    T(i64),
    /// `lam_i - lam_j`.
    Diff(usize, usize),
}

impl Bound {
    pub fn parse(s: &str) -> Result<Bound, WickError> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let var = |n: &str| crate::terms::LAMBDA_VARS.iter().position(|v| *v == n);
        Ok(match t.as_str() {
            "0" => Bound::Zero,
            "T" => Bound::T(1),
            "-T" => Bound::T(-1),
            _ => {
                if let Some(v) = var(&t) {
                    Bound::Var(v)
                } else if let Some((a, b)) = t.split_once('-') {
                    match (var(a), var(b)) {
                        (Some(x), Some(y)) => Bound::Diff(x, y),
                        _ => return Err(WickError::UnsupportedBound(s.into())),
                    }
                } else {
                    return Err(WickError::UnsupportedBound(s.into()));
                }
            }
        })
    }
}

/// Per-session rewrite engine with memo caches.
pub struct Engine {
    spec: Arc<LcaSpec>,
    gen_cache: RefCell<HashMap<(u32, u32), Rc<Vec<Expr>>>>,
    br_cache: RefCell<HashMap<(Monomial, Monomial), Rc<Vec<Expr>>>>,
    ins_cache: RefCell<HashMap<(Term, Monomial), Rc<Expr>>>,
    nop_cache: RefCell<HashMap<(Monomial, Monomial), Rc<Expr>>>,
}

impl Engine {
    pub fn new(spec: Arc<LcaSpec>) -> Self {
        Engine {
            spec,
            gen_cache: RefCell::default(),
            br_cache: RefCell::default(),
            ins_cache: RefCell::default(),
            nop_cache: RefCell::default(),
        }
    }

    pub fn spec(&self) -> &LcaSpec {
        &self.spec
    }

    pub fn spec_arc(&self) -> Arc<LcaSpec> {
        self.spec.clone()
    }

    pub fn reg(&self) -> &Registry {
        &self.spec.reg
    }

    fn par(&self, t: Term) -> Parity {
        self.spec.reg.parity(t.gen as usize)
    }

    fn mpar(&self, m: &Monomial) -> Parity {
        self.spec.reg.mono_parity(m)
    }

    /// Generator products `a_(n) b`, normal-ordered.
    fn gen_prods(&self, a: u32, b: u32) -> Rc<Vec<Expr>> {
        if let Some(v) = self.gen_cache.borrow().get(&(a, b)) {
            return v.clone();
        }
        let (ai, bi) = (a as usize, b as usize);
        let canonical = if a <= b {
            self.spec.entry(ai, bi).is_some() || self.spec.entry(bi, ai).is_none()
        } else {
            self.spec.entry(ai, bi).is_some() && self.spec.entry(bi, ai).is_none()
        };
        let v = if canonical {
            match self.spec.entry(ai, bi) {
                None => vec![],
                Some(raw) => {
                    let mut v: Vec<Expr> = raw.iter().map(|e| self.normal_form(e)).collect();
                    trim_vec(&mut v);
                    v
                }
            }
        } else {
            let other = self.gen_prods(b, a);
            let p = psign(self.spec.reg.parity(ai), self.spec.reg.parity(bi));
            self.skew_from(&other, p)
        };
        let rc = Rc::new(v);
        self.gen_cache.borrow_mut().insert((a, b), rc.clone());
        rc
    }

    /// Given `w[n] = b_(n) a`, return `a_(n) b = p sum_j (-1)^(n+j+1) T^(j) w[n+j]`.
    fn skew_from(&self, w: &[Expr], p: i64) -> Vec<Expr> {
        let mut out = Vec::new();
        for n in 0..w.len() {
            let mut acc = Expr::zero();
            for j in 0..(w.len() - n) {
                let s = if (n + j + 1) % 2 == 0 { p } else { -p };
                acc.add_scaled(&self.apply_t(&w[n + j], j as u32), &sgn(s));
            }
            add_at(&mut out, n, &acc, &Scalar::one());
        }
        trim_vec(&mut out);
        out
    }

    /// `T^(r) x` in normal form.
    pub fn apply_t(&self, x: &Expr, r: u32) -> Expr {
        if r == 0 {
            return x.clone();
        }
        self.normal_form(&apply_t_raw(x, r))
    }

    /// `(T^(k) a)_(n) (T^(l) b)` for terms.
    fn term_prods(&self, s: Term, t: Term) -> Vec<Expr> {
        let base = self.gen_prods(s.gen, t.gen);
        if base.is_empty() {
            return vec![];
        }
        // a_(m) T^(l) b = sum_i C(m,i) T^(l-i) (a_(m-i) b)
        let l = t.tpow as usize;
        let mut right = Vec::new();
        for m in 0..base.len() + l {
            let mut acc = Expr::zero();
            for i in 0..=l.min(m) {
                if m - i < base.len() {
                    acc.add_scaled(&self.apply_t(&base[m - i], (l - i) as u32), &binq(m as i64, i as u32));
                }
            }
            add_at(&mut right, m, &acc, &Scalar::one());
        }
        trim_vec(&mut right);
        // (T^(k) a)_(n) X = (-1)^k C(n,k) a_(n-k) X
        let k = s.tpow as usize;
        if k == 0 {
            return right;
        }
        let sign = if k % 2 == 0 { 1 } else { -1 };
        let mut out = Vec::new();
        for (m, e) in right.iter().enumerate() {
            let n = m + k;
            add_at(&mut out, n, e, &(&binq(n as i64, k as u32) * &sgn(sign)));
        }
        out
    }

    /// Normal form of `:t N:` for an ordered monomial `N`.
    fn insert(&self, t: Term, n: &Monomial) -> Rc<Expr> {
        let key = (t, n.clone());
        if let Some(v) = self.ins_cache.borrow().get(&key) {
            return v.clone();
        }
        let r = self.insert_uncached(t, n);
        let rc = Rc::new(r);
        self.ins_cache.borrow_mut().insert(key, rc.clone());
        rc
    }

    fn insert_uncached(&self, t: Term, n: &Monomial) -> Expr {
        if n.is_vacuum() {
            return Expr::term(t);
        }
        let h = n.head();
        let odd = self.par(t).is_odd();
        if t < h || (t == h && !odd) {
            return Expr::mono(Monomial::cons(t, n));
        }
        let rest = n.tail();
        // corrections sum_j (-1)^j :(T^(j+1)(t_(j) h)) rest:
        let mut corr = Expr::zero();
        for (j, e) in self.term_prods(t, h).iter().enumerate() {
            if e.is_zero() {
                continue;
            }
            let te = self.apply_t(e, j as u32 + 1);
            let s = if j % 2 == 0 { 1 } else { -1 };
            corr.add_scaled(&self.nop_expr_mono(&te, &rest), &sgn(s));
        }
        if t == h {
            // odd repeat: 2 :t t rest: = corrections
            return corr.scale(&Scalar::from_frac(1, 2));
        }
        let p = psign(self.par(t), self.par(h));
        let inner = self.insert(t, &rest);
        let mut out = Expr::zero();
        for (m, c) in inner.iter() {
            out.add_scaled(&self.insert(h, m), &(c * &sgn(p)));
        }
        out.add_assign(&corr);
        out
    }

    fn nop_expr_mono(&self, x: &Expr, n: &Monomial) -> Expr {
        let mut out = Expr::zero();
        for (m, c) in x.iter() {
            out.add_scaled(&self.nop_mono(m, n), c);
        }
        out
    }

    /// Normal form of `:M N:` for ordered monomials.
    fn nop_mono(&self, m: &Monomial, n: &Monomial) -> Rc<Expr> {
        if m.is_vacuum() {
            return Rc::new(Expr::mono(n.clone()));
        }
        if n.is_vacuum() {
            return Rc::new(Expr::mono(m.clone()));
        }
        if m.len() == 1 {
            return self.insert(m.head(), n);
        }
        let key = (m.clone(), n.clone());
        if let Some(v) = self.nop_cache.borrow().get(&key) {
            return v.clone();
        }
        // :(:a B:) C: = :a(:B C:): + sum_j :(T^(j+1) a)(B_(j) C): + p(a,B) sum_j :(T^(j+1) B)(a_(j) C):
        let a = m.head();
        let b = m.tail();
        let mut out = Expr::zero();
        let bc = self.nop_mono(&b, n);
        for (w, c) in bc.iter() {
            out.add_scaled(&self.insert(a, w), c);
        }
        let a_mono = Monomial::single(a);
        for (j, e) in self.br(&b, n).iter().enumerate() {
            if e.is_zero() {
                continue;
            }
            let ta = Term { gen: a.gen, tpow: a.tpow + j as u32 + 1 };
            let f = binq(a.tpow as i64 + j as i64 + 1, j as u32 + 1);
            for (w, c) in e.iter() {
                out.add_scaled(&self.insert(ta, w), &(c * &f));
            }
        }
        let p = psign(self.par(a), self.mpar(&b));
        let bexpr = Expr::mono(b.clone());
        for (j, e) in self.br(&a_mono, n).iter().enumerate() {
            if e.is_zero() {
                continue;
            }
            let tb = self.apply_t(&bexpr, j as u32 + 1);
            out.add_scaled(&self.nop(&tb, e), &sgn(p));
        }
        let rc = Rc::new(out);
        self.nop_cache.borrow_mut().insert(key, rc.clone());
        rc
    }

    /// Normally ordered product of normal expressions.
    pub fn nop(&self, x: &Expr, y: &Expr) -> Expr {
        let mut out = Expr::zero();
        for (m, c) in x.iter() {
            for (n, d) in y.iter() {
                out.add_scaled(&self.nop_mono(m, n), &(c * d));
            }
        }
        out
    }

    /// Normal form of an expression whose words are arbitrary (read right-nested).
    pub fn normal_form(&self, raw: &Expr) -> Expr {
        let mut out = Expr::zero();
        for (m, c) in raw.iter() {
            if self.spec.reg.is_ordered(m) {
                out.add_term(m.clone(), c.clone());
                continue;
            }
            let mut acc = Expr::vacuum();
            for t in m.terms().iter().rev() {
                let mut next = Expr::zero();
                for (w, d) in acc.iter() {
                    next.add_scaled(&self.insert(*t, w), d);
                }
                acc = next;
            }
            out.add_scaled(&acc, c);
        }
        out
    }

    /// `M_(n) N` for `n >= 0`, ordered monomials.
    pub fn br(&self, m: &Monomial, n: &Monomial) -> Rc<Vec<Expr>> {
        if m.is_vacuum() || n.is_vacuum() {
            return Rc::new(vec![]);
        }
        let key = (m.clone(), n.clone());
        if let Some(v) = self.br_cache.borrow().get(&key) {
            return v.clone();
        }
        let v = self.br_uncached(m, n);
        let rc = Rc::new(v);
        self.br_cache.borrow_mut().insert(key, rc.clone());
        rc
    }

    fn br_uncached(&self, m: &Monomial, n: &Monomial) -> Vec<Expr> {
        if m.len() == 1 && n.len() == 1 {
            return self.term_prods(m.head(), n.head());
        }
        if n.len() >= 2 {
            // left Wick: M_(n)(:n1 N':) = :(M_(n) n1) N': + p :n1 (M_(n) N'): + sum_j C(n,j) (M_(j) n1)_(n-1-j) N'
            let n1 = Monomial::single(n.head());
            let rest = n.tail();
            let p = psign(self.mpar(m), self.par(n.head()));
            let a = self.br(m, &n1);
            let b = self.br(m, &rest);
            let mut out = Vec::new();
            for (k, e) in a.iter().enumerate() {
                let part = self.nop_expr_mono(e, &rest);
                add_at(&mut out, k, &part, &Scalar::one());
            }
            for (k, e) in b.iter().enumerate() {
                let mut part = Expr::zero();
                for (w, c) in e.iter() {
                    part.add_scaled(&self.insert(n.head(), w), c);
                }
                add_at(&mut out, k, &part, &sgn(p));
            }
            for (j, e) in a.iter().enumerate() {
                if e.is_zero() {
                    continue;
                }
                let d = self.products_expr_mono(e, &rest);
                for (i, x) in d.iter().enumerate() {
                    let nn = j + 1 + i;
                    add_at(&mut out, nn, x, &binq(nn as i64, j as u32));
                }
            }
            trim_vec(&mut out);
            return out;
        }
        // composite M, single-term N: skewsymmetry from N_(n) M
        let w = self.br(n, m);
        let p = psign(self.mpar(m), self.mpar(n));
        self.skew_from(&w, p)
    }

    fn products_expr_mono(&self, x: &Expr, n: &Monomial) -> Vec<Expr> {
        let mut out = Vec::new();
        for (m, c) in x.iter() {
            for (k, e) in self.br(m, n).iter().enumerate() {
                add_at(&mut out, k, e, c);
            }
        }
        trim_vec(&mut out);
        out
    }

    /// All `x_(n) y`, `n >= 0`.
    pub fn products(&self, x: &Expr, y: &Expr) -> Vec<Expr> {
        let mut out = Vec::new();
        for (m, c) in x.iter() {
            for (n, d) in y.iter() {
                let cd = c * d;
                for (k, e) in self.br(m, n).iter().enumerate() {
                    add_at(&mut out, k, e, &cd);
                }
            }
        }
        trim_vec(&mut out);
        out
    }

    pub fn lambda_bracket(&self, x: &Expr, y: &Expr) -> LambdaExpr {
        products_to_lambda(&self.products(x, y))
    }

    /// `x_(n) y` for any integer `n`.
    pub fn nth_product(&self, x: &Expr, n: i64, y: &Expr) -> Expr {
        if n >= 0 {
            self.products(x, y).get(n as usize).cloned().unwrap_or_default()
        } else {
            let m = (-n - 1) as u32;
            self.nop(&self.apply_t(x, m), y)
        }
    }

    /// `[x_lam y]` evaluated at `lam = -lam - T` (T acting on coefficients).
    pub fn at_minus_lam_minus_t(&self, l: &LambdaExpr) -> LambdaExpr {
        let mut out = LambdaExpr::zero();
        for (k, e) in l.iter() {
            let n = k.first().copied().unwrap_or(0);
            for i in 0..=n {
                // (-lam - T)^n = sum_i C(n,i) (-lam)^(n-i) (-T)^i, T^i = i! T^(i)
                let c = &binq(n as i64, i) * &sgn(if n % 2 == 0 { 1 } else { -1 });
                let c = &c * &factorial(i);
                let mut key = k.clone();
                if key.is_empty() {
                    key.push(0);
                }
                key[0] = n - i;
                out.add_at(key, &self.apply_t(e, i), &c);
            }
        }
        out
    }

    /// Definite integral in one lambda variable.
    pub fn integrate(&self, l: &LambdaExpr, var: usize, lower: &Bound, upper: &Bound) -> LambdaExpr {
        let mut out = LambdaExpr::zero();
        for (k, e) in l.iter() {
            let mut key = k.clone();
            if key.len() <= var {
                key.resize(var + 1, 0);
            }
            let n = key[var];
            key[var] = 0;
            let inv = Scalar::from_frac(1, n as i64 + 1);
            for (b, s) in [(upper, 1i64), (lower, -1i64)] {
                let c = &inv * &sgn(s);
                match b {
                    Bound::Zero => {}
                    Bound::Var(w) => {
                        let mut kk = key.clone();
                        if kk.len() <= *w {
                            kk.resize(w + 1, 0);
                        }
                        kk[*w] += n + 1;
                        out.add_at(kk, e, &c);
                    }
                    Bound::T(sign) => {
                        // (sign T)^(n+1) / (n+1) = sign^(n+1) n! T^(n+1)
                        let sg = if (n + 1) % 2 == 1 { *sign } else { 1 };
                        let f = &(&c * &factorial(n + 1)) * &sgn(sg);
                        out.add_at(key.clone(), &self.apply_t(e, n + 1), &f);
                    }
                    Bound::Diff(x, y) => {
                        for i in 0..=n + 1 {
                            let mut kk = key.clone();
                            let len = kk.len().max(*x + 1).max(*y + 1);
                            kk.resize(len, 0);
                            kk[*x] += n + 1 - i;
                            kk[*y] += i;
                            let f = &(&c * &binq(n as i64 + 1, i)) * &sgn(if i % 2 == 0 { 1 } else { -1 });
                            out.add_at(kk, e, &f);
                        }
                    }
                }
            }
        }
        out
    }

    /// `I_lam(a,b) = :ab: + int_0^lam [a_x b] dx`.
    pub fn integral_bracket(&self, a: &Expr, b: &Expr) -> LambdaExpr {
        let mut out = LambdaExpr::from_expr(self.nop(a, b));
        let br = self.lambda_bracket(a, b);
        out.add_assign(&self.integrate(&br, 0, &Bound::Zero, &Bound::Var(0)));
        out
    }

    pub fn eval_raw(&self, raw: &Raw) -> Result<LambdaExpr, WickError> {
        Ok(raw.eval(&EngineOps(self))?)
    }

    pub fn parse(&self, text: &str) -> Result<LambdaExpr, WickError> {
        let raw = crate::terms::parse_raw(text, &self.spec.parse_env())?;
        self.eval_raw(&raw)
    }

    /// Parse a lambda-free expression.
    pub fn parse_expr(&self, text: &str) -> Result<Expr, WickError> {
        self.parse(text)?
            .as_expr()
            .ok_or_else(|| TermsError::Eval("expected an expression without lambda".into()).into())
    }

    pub fn gen(&self, id: &str) -> Result<Expr, WickError> {
        Ok(Expr::gen(self.spec.reg.id(id)?))
    }

    /// Skewsymmetry residual of two given brackets `[a_lam b] + p [b_{-lam-T} a]`.
    pub fn skew_residual(&self, ab: &LambdaExpr, ba: &LambdaExpr, p: i64) -> LambdaExpr {
        let mut r = ab.clone();
        r.add_scaled(&self.at_minus_lam_minus_t(ba), &sgn(p));
        r
    }

    /// Jacobi residual `J(a,b,c; lam, mu)` for arbitrary normal expressions.
    pub fn jacobi_residual(&self, a: &Expr, b: &Expr, c: &Expr) -> LambdaExpr {
        let pab = match (a.parity(self.reg()), b.parity(self.reg())) {
            (Some(x), Some(y)) => psign(x, y),
            _ => 1,
        };
        let mut res: BTreeMap<(usize, usize), Expr> = BTreeMap::new();
        let mut put = |m: usize, n: usize, e: &Expr, s: &Scalar| {
            if !e.is_zero() {
                res.entry((m, n)).or_default().add_scaled(e, s);
            }
        };
        for (n, x) in self.products(b, c).iter().enumerate() {
            for (m, e) in self.products(a, x).iter().enumerate() {
                put(m, n, e, &Scalar::one());
            }
        }
        for (m, x) in self.products(a, c).iter().enumerate() {
            for (n, e) in self.products(b, x).iter().enumerate() {
                put(m, n, e, &sgn(-pab));
            }
        }
        for (i, y) in self.products(a, b).iter().enumerate() {
            for (nn, e) in self.products(y, c).iter().enumerate() {
                // contributes to (m, n) with m >= i, m + n - i = nn
                for m in i..=nn + i {
                    let n = nn + i - m;
                    put(m, n, e, &binq(m as i64, i as u32).neg());
                }
            }
        }
        let mut out = LambdaExpr::zero();
        for ((m, n), e) in res {
            let f = (&factorial(m as u32) * &factorial(n as u32)).inv().unwrap();
            out.add_at(vec![m as u32, n as u32], &e, &f);
        }
        out
    }

    /// Both sides of the Borcherds identity.
    pub fn borcherds_sides(&self, a: &Expr, b: &Expr, c: &Expr, m: i64, n: i64, k: i64) -> (Expr, Expr) {
        let p = match (a.parity(self.reg()), b.parity(self.reg())) {
            (Some(x), Some(y)) => psign(x, y),
            _ => 1,
        };
        let lbc = self.products(b, c).len() as i64;
        let lac = self.products(a, c).len() as i64;
        let lab = self.products(a, b).len() as i64;
        let mut lhs = Expr::zero();
        let jmax = (lbc - k).max(lac - m).max(0);
        let sn = if n.rem_euclid(2) == 0 { 1 } else { -1 };
        for j in 0..=jmax {
            let cj = &binq(n, j as u32) * &sgn(if j % 2 == 0 { 1 } else { -1 });
            if cj.is_zero() {
                continue;
            }
            let t1 = self.nth_product(a, m + n - j, &self.nth_product(b, k + j, c));
            let t2 = self.nth_product(b, n + k - j, &self.nth_product(a, m + j, c));
            lhs.add_scaled(&t1, &cj);
            lhs.add_scaled(&t2, &(&cj * &sgn(-sn * p)));
        }
        let mut rhs = Expr::zero();
        let jmax = (lab - n).max(0);
        for j in 0..=jmax {
            let cj = binq(m, j as u32);
            if cj.is_zero() {
                continue;
            }
            rhs.add_scaled(&self.nth_product(&self.nth_product(a, n + j, b), m + k - j, c), &cj);
        }
        (lhs, rhs)
    }

    pub fn check_borcherds(&self, a: &Expr, b: &Expr, c: &Expr, m: i64, n: i64, k: i64) -> bool {
        let (l, r) = self.borcherds_sides(a, b, c, m, n, k);
        l == r
    }
}

struct EngineOps<'a>(&'a Engine);

impl RawOps for EngineOps<'_> {
    fn nop(&self, a: &Expr, b: &Expr) -> Result<Expr, TermsError> {
        Ok(self.0.nop(&self.0.normal_form(a), &self.0.normal_form(b)))
    }

    fn tpow(&self, a: &Expr, n: u32) -> Result<Expr, TermsError> {
        Ok(self.0.apply_t(&self.0.normal_form(a), n))
    }
}

/// One line of a checker report.
#[derive(Clone, Debug)]
pub struct ReportEntry {
    pub label: String,
    pub ok: bool,
    pub residual: LambdaExpr,
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub entries: Vec<ReportEntry>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportEntry> {
        self.entries.iter().filter(|e| !e.ok)
    }
}

/// Compare given table entries with their skewsymmetric partners.
pub fn check_skewsymmetry(spec: &Arc<LcaSpec>) -> Report {
    let eng = Engine::new(spec.clone());
    let reg = &spec.reg;
    let mut report = Report::default();
    let mut seen = BTreeSet::new();
    for (&(a, b), _) in spec.entries() {
        let key = (a.min(b), a.max(b));
        if !seen.insert(key) {
            continue;
        }
        let (x, y) = key;
        let (Some(xy), Some(yx)) = (spec.entry_lambda(x, y), spec.entry_lambda(y, x)) else { continue };
        let xy = xy.map_exprs(|e| eng.normal_form(e));
        let yx = yx.map_exprs(|e| eng.normal_form(e));
        let p = psign(reg.parity(x), reg.parity(y));
        let r = eng.skew_residual(&xy, &yx, p);
        report.entries.push(ReportEntry {
            label: format!("({}, {})", reg.name(x), reg.name(y)),
            ok: r.is_zero(),
            residual: r,
        });
    }
    report
}

/// Jacobi identity on all generator triples (parallel, one engine per worker).
pub fn check_jacobi(spec: &Arc<LcaSpec>) -> Report {
    let n = spec.reg.len();
    let triples: Vec<(usize, usize, usize)> =
        (0..n).flat_map(|a| (0..n).flat_map(move |b| (0..n).map(move |c| (a, b, c)))).collect();
    let entries: Vec<ReportEntry> = triples
        .par_iter()
        .map_init(
            || Engine::new(spec.clone()),
            |eng, &(a, b, c)| {
                let r = eng.jacobi_residual(&Expr::gen(a), &Expr::gen(b), &Expr::gen(c));
                let reg = &spec.reg;
                ReportEntry {
                    label: format!("({}, {}, {})", reg.name(a), reg.name(b), reg.name(c)),
                    ok: r.is_zero(),
                    residual: r,
                }
            },
        )
        .collect();
    Report { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::{parse_literal, GeneratorDecl};

    fn virasoro() -> Arc<LcaSpec> {
        let reg = Registry::new(vec![GeneratorDecl::new("L", Parity::Even, Rat::from_integer(2.into()))]).unwrap();
        let env = ParseEnv { reg: &reg, params: None };
        let br = parse_literal("T(L) + 2*lam*L + c/12*lam^3*|0>", &env).unwrap();
        Arc::new(LcaSpec::new(reg, vec![(0, 0, br)], true).unwrap())
    }

    #[test]
    fn virasoro_products() {
        let spec = virasoro();
        let eng = Engine::new(spec.clone());
        let l = Expr::gen(0);
        let br = eng.lambda_bracket(&l, &l);
        assert_eq!(br.display(&spec.reg).to_string(), "T(L) + 2*lam*L + 1/12*c*lam^3*|0>");
        assert_eq!(eng.nth_product(&l, 1, &l), l.scale(&Scalar::from_int(2)));
        assert_eq!(eng.nth_product(&l, 3, &l), Expr::scalar(Scalar::parse("c/2").unwrap()));
        assert_eq!(eng.nth_product(&Expr::vacuum(), -1, &l), l);
        assert!(eng.nth_product(&Expr::vacuum(), 0, &l).is_zero());
        assert!(eng.lambda_bracket(&l, &Expr::vacuum()).is_zero());
        assert!(check_skewsymmetry(&spec).passed());
        assert!(check_jacobi(&spec).passed());
    }

    #[test]
    fn grading_violation_rejected() {
        let reg = Registry::new(vec![GeneratorDecl::new("a", Parity::Even, Rat::one())]).unwrap();
        let env = ParseEnv { reg: &reg, params: None };
        let br = parse_literal(":a a:", &env).unwrap();
        assert!(matches!(LcaSpec::new(reg, vec![(0, 0, br)], false), Err(WickError::GradingViolation { .. })));
    }

    #[test]
    fn integrals() {
        let spec = virasoro();
        let eng = Engine::new(spec);
        let mu = LambdaExpr::from_lam_coeffs(&[Expr::zero(), Expr::vacuum()]);
        let r = eng.integrate(&mu, 0, &Bound::Zero, &Bound::Var(0));
        assert_eq!(r.coeff(2), Expr::scalar(Scalar::from_frac(1, 2)));
        assert!(eng.integrate(&mu, 0, &Bound::Zero, &Bound::Zero).is_zero());
        assert!(Bound::parse("lam+T").is_err());
        assert_eq!(Bound::parse("lam - mu").unwrap(), Bound::Diff(0, 1));
    }
}
