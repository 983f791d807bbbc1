//! Exact coefficients: multivariate rational functions over the rationals.
//!
//! A [`Scalar`] is a reduced fraction of two polynomials in named formal
//! parameters.  The denominator is monic with respect to graded
//! lexicographic order (variables compared alphabetically), so two equal
//! rational functions always have identical representations.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

pub type Rat = BigRational;

/// Names that may not be used as parameters.
pub const RESERVED: &[&str] = &["lam", "mu", "nu", "lambda", "T"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScalarError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("substitution makes a denominator vanish")]
    PoleAtSubstitution,
    #[error("parse error at offset {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// A power product of parameters, sorted by name.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct PMono(Vec<(Arc<str>, u32)>);

impl PMono {
    pub fn one() -> Self {
        PMono(Vec::new())
    }

    pub fn var(name: &str) -> Self {
        PMono(vec![(Arc::from(name), 1)])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| *e).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exp(&self, v: &str) -> u32 {
        self.0.iter().find(|(n, _)| &**n == v).map_or(0, |(_, e)| *e)
    }

    pub fn vars(&self) -> impl Iterator<Item = &Arc<str>> {
        self.0.iter().map(|(n, _)| n)
    }

    pub fn mul(&self, o: &PMono) -> PMono {
        let mut out = Vec::with_capacity(self.0.len() + o.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < o.0.len() {
            match self.0[i].0.cmp(&o.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(o.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + o.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&o.0[j..]);
        PMono(out)
    }

    /// `self / o` if `o` divides `self`.
    pub fn div(&self, o: &PMono) -> Option<PMono> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for (n, e) in &self.0 {
            if j < o.0.len() && o.0[j].0 < *n {
                return None;
            }
            if j < o.0.len() && o.0[j].0 == *n {
                let f = o.0[j].1;
                j += 1;
                match e.cmp(&f) {
                    Ordering::Less => return None,
                    Ordering::Equal => {}
                    Ordering::Greater => out.push((n.clone(), e - f)),
                }
            } else {
                out.push((n.clone(), *e));
            }
        }
        if j < o.0.len() {
            return None;
        }
        Some(PMono(out))
    }

    fn without(&self, v: &str) -> PMono {
        PMono(self.0.iter().filter(|(n, _)| &**n != v).cloned().collect())
    }
}

impl Ord for PMono {
    /// Graded lexicographic order, alphabetically earlier variables more significant.
    fn cmp(&self, o: &Self) -> Ordering {
        match self.degree().cmp(&o.degree()) {
            Ordering::Equal => {}
            c => return c,
        }
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.0.get(i), o.0.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((na, ea)), Some((nb, eb))) => match na.cmp(nb) {
                    Ordering::Equal => {
                        if ea != eb {
                            return ea.cmp(eb);
                        }
                        i += 1;
                        j += 1;
                    }
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                },
            }
        }
    }
}

impl PartialOrd for PMono {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Sparse polynomial with terms sorted in descending grlex order.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Poly {
    terms: Vec<(PMono, Rat)>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Poly::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly { terms: vec![(PMono::one(), c)] }
        }
    }

    pub fn var(name: &str) -> Self {
        Poly { terms: vec![(PMono::var(name), Rat::one())] }
    }

    fn from_map(m: BTreeMap<PMono, Rat>) -> Self {
        Poly { terms: m.into_iter().rev().filter(|(_, c)| !c.is_zero()).collect() }
    }

    pub fn terms(&self) -> &[(PMono, Rat)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].0.is_one() && self.terms[0].1.is_one()
    }

    pub fn as_constant(&self) -> Option<Rat> {
        match self.terms.len() {
            0 => Some(Rat::zero()),
            1 if self.terms[0].0.is_one() => Some(self.terms[0].1.clone()),
            _ => None,
        }
    }

    pub fn lead(&self) -> Option<&(PMono, Rat)> {
        self.terms.first()
    }

    pub fn vars(&self) -> BTreeSet<Arc<str>> {
        self.terms.iter().flat_map(|(m, _)| m.vars().cloned()).collect()
    }

    pub fn degree_in(&self, v: &str) -> u32 {
        self.terms.iter().map(|(m, _)| m.exp(v)).max().unwrap_or(0)
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect() }
    }

    fn mul_term(&self, m: &PMono, c: &Rat) -> Poly {
        Poly { terms: self.terms.iter().map(|(a, x)| (a.mul(m), x * c)).collect() }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut out = Vec::with_capacity(self.terms.len() + o.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < o.terms.len() {
            match self.terms[i].0.cmp(&o.terms[j].0) {
                Ordering::Greater => {
                    out.push(self.terms[i].clone());
                    i += 1;
                }
                Ordering::Less => {
                    out.push(o.terms[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let c = &self.terms[i].1 + &o.terms[j].1;
                    if !c.is_zero() {
                        out.push((self.terms[i].0.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.terms[i..]);
        out.extend_from_slice(&o.terms[j..]);
        Poly { terms: out }
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        if let Some(c) = self.as_constant() {
            return o.scale(&c);
        }
        if let Some(c) = o.as_constant() {
            return self.scale(&c);
        }
        let mut acc: BTreeMap<PMono, Rat> = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let e = acc.entry(m1.mul(m2)).or_insert_with(Rat::zero);
                *e += c1 * c2;
            }
        }
        Poly::from_map(acc)
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut r = Poly::one();
        for _ in 0..n {
            r = r.mul(self);
        }
        r
    }

    /// Exact quotient, `None` when `d` does not divide `self`.
    pub fn exact_div(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if let Some(c) = d.as_constant() {
            return Some(self.scale(&c.recip()));
        }
        let (dm, dc) = d.lead().unwrap().clone();
        let mut r = self.clone();
        let mut q: Vec<(PMono, Rat)> = Vec::new();
        while let Some((rm, rc)) = r.lead().cloned() {
            let m = rm.div(&dm)?;
            let c = rc / &dc;
            r = r.sub(&d.mul_term(&m, &c));
            q.push((m, c));
        }
        Some(Poly { terms: q })
    }

    /// Make the leading coefficient 1.
    pub fn monic(&self) -> Poly {
        match self.lead() {
            None => Poly::zero(),
            Some((_, c)) => self.scale(&c.recip()),
        }
    }

    /// Coefficients as a polynomial in `v` (index = degree).
    fn coeffs_in(&self, v: &str) -> Vec<Poly> {
        let deg = self.degree_in(v) as usize;
        let mut maps: Vec<BTreeMap<PMono, Rat>> = vec![BTreeMap::new(); deg + 1];
        for (m, c) in &self.terms {
            let e = m.exp(v) as usize;
            *maps[e].entry(m.without(v)).or_insert_with(Rat::zero) += c;
        }
        maps.into_iter().map(Poly::from_map).collect()
    }

    fn from_coeffs(v: &str, cs: &[Poly]) -> Poly {
        let mut acc = Poly::zero();
        for (e, c) in cs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let m = if e == 0 { PMono::one() } else { PMono(vec![(Arc::from(v), e as u32)]) };
            acc = acc.add(&c.mul_term(&m, &Rat::one()));
        }
        acc
    }

    /// Evaluate with some parameters replaced by scalars.
    pub fn eval(&self, assign: &HashMap<String, Scalar>) -> Scalar {
        let mut acc = Scalar::zero();
        for (m, c) in &self.terms {
            let mut t = Scalar::from_rat(c.clone());
            for (n, e) in &m.0 {
                let base = match assign.get(&**n) {
                    Some(s) => s.clone(),
                    None => Scalar::param(n),
                };
                t = &t * &base.pow(*e);
            }
            acc = &acc + &t;
        }
        acc
    }
}

/// Content with respect to `v`: gcd of the coefficients.
fn content_in(p: &Poly, v: &str) -> Poly {
    let mut g = Poly::zero();
    for c in p.coeffs_in(v) {
        if c.is_zero() {
            continue;
        }
        g = poly_gcd(&g, &c);
        if g.is_one() {
            break;
        }
    }
    g
}

/// Sparse pseudo-remainder of `f` by `g` as polynomials in `v`.
fn prem(f: &[Poly], g: &[Poly]) -> Vec<Poly> {
    let mut r: Vec<Poly> = f.to_vec();
    let dg = g.len() - 1;
    let lc = &g[dg];
    loop {
        while r.last().is_some_and(|c| c.is_zero()) {
            r.pop();
        }
        if r.len() <= dg {
            return r;
        }
        let dr = r.len() - 1;
        let lr = r[dr].clone();
        let shift = dr - dg;
        let mut next: Vec<Poly> = r.iter().map(|c| c.mul(lc)).collect();
        for (i, gc) in g.iter().enumerate() {
            next[i + shift] = next[i + shift].sub(&gc.mul(&lr));
        }
        r = next;
    }
}

/// Rescale to integer coefficients with gcd 1, keeping coefficient growth
/// in the remainder sequence polynomial.
fn int_primitive(p: &Poly) -> Poly {
    let mut den = BigInt::one();
    let mut num = BigInt::zero();
    for (_, c) in &p.terms {
        den = int_lcm(&den, c.denom());
        num = num.gcd(c.numer());
    }
    if num.is_zero() {
        return p.clone();
    }
    p.scale(&Rat::new(den, num))
}

/// Monic greatest common divisor.
pub fn poly_gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.as_constant().is_some() || b.as_constant().is_some() {
        return Poly::one();
    }
    if a == b {
        return a.monic();
    }
    let va = a.vars();
    let vb = b.vars();
    let v = va.union(&vb).next().unwrap().clone();
    let ina = va.contains(&v);
    let inb = vb.contains(&v);
    if !ina {
        return poly_gcd(a, &content_in(b, &v));
    }
    if !inb {
        return poly_gcd(&content_in(a, &v), b);
    }
    let ca = content_in(a, &v);
    let cb = content_in(b, &v);
    let c = poly_gcd(&ca, &cb);
    let pa = a.exact_div(&ca).expect("content divides");
    let pb = b.exact_div(&cb).expect("content divides");
    let (pa, pb) = (int_primitive(&pa), int_primitive(&pb));
    let (mut f, mut g) = if pa.degree_in(&v) >= pb.degree_in(&v) { (pa, pb) } else { (pb, pa) };
    loop {
        let r = prem(&f.coeffs_in(&v), &g.coeffs_in(&v));
        if r.is_empty() {
            break;
        }
        if r.len() == 1 {
            return c.monic();
        }
        let rp = Poly::from_coeffs(&v, &r);
        let cr = content_in(&rp, &v);
        f = g;
        g = int_primitive(&rp.exact_div(&cr).expect("content divides"));
    }
    let cg = content_in(&g, &v);
    let g = g.exact_div(&cg).expect("content divides");
    c.mul(&g).monic()
}

/// Canonical rational function in formal parameters.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Scalar {
    num: Poly,
    den: Poly,
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::zero()
    }
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar { num: Poly::zero(), den: Poly::one() }
    }

    pub fn one() -> Self {
        Scalar { num: Poly::one(), den: Poly::one() }
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::from_rat(Rat::from_integer(BigInt::from(n)))
    }

    pub fn from_frac(n: i64, d: i64) -> Self {
        Scalar::from_rat(Rat::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn from_rat(r: Rat) -> Self {
        Scalar { num: Poly::constant(r), den: Poly::one() }
    }

    pub fn from_poly(p: Poly) -> Self {
        Scalar { num: p, den: Poly::one() }
    }

    pub fn param(name: &str) -> Self {
        Scalar { num: Poly::var(name), den: Poly::one() }
    }

    pub fn numer(&self) -> &Poly {
        &self.num
    }

    pub fn denom(&self) -> &Poly {
        &self.den
    }

    /// Reduce `num/den` to canonical form.
    pub fn normalize(num: Poly, den: Poly) -> Result<Scalar, ScalarError> {
        if den.is_zero() {
            return Err(ScalarError::ZeroDenominator);
        }
        if num.is_zero() {
            return Ok(Scalar::zero());
        }
        if let Some(c) = den.as_constant() {
            let inv = c.recip();
            return Ok(Scalar { num: num.scale(&inv), den: Poly::one() });
        }
        let g = poly_gcd(&num, &den);
        let (num, den) = if g.is_one() {
            (num, den)
        } else {
            (num.exact_div(&g).expect("gcd divides"), den.exact_div(&g).expect("gcd divides"))
        };
        let lc = den.lead().unwrap().1.clone();
        if lc.is_one() {
            Ok(Scalar { num, den })
        } else {
            let inv = lc.recip();
            Ok(Scalar { num: num.scale(&inv), den: den.scale(&inv) })
        }
    }

    fn norm(num: Poly, den: Poly) -> Scalar {
        Scalar::normalize(num, den).expect("nonzero denominator")
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    /// Value if the scalar is a rational constant.
    pub fn as_rat(&self) -> Option<Rat> {
        if self.den.is_one() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn as_integer(&self) -> Option<BigInt> {
        self.as_rat().filter(|r| r.is_integer()).map(|r| r.to_integer())
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    /// Parameters occurring in the scalar.
    pub fn params(&self) -> BTreeSet<Arc<str>> {
        let mut s = self.num.vars();
        s.extend(self.den.vars());
        s
    }

    pub fn neg(&self) -> Scalar {
        Scalar { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn inv(&self) -> Result<Scalar, ScalarError> {
        if self.is_zero() {
            return Err(ScalarError::ZeroDenominator);
        }
        let lc = self.num.lead().unwrap().1.recip();
        Ok(Scalar { num: self.den.scale(&lc), den: self.num.scale(&lc) })
    }

    pub fn checked_div(&self, o: &Scalar) -> Result<Scalar, ScalarError> {
        Ok(self * &o.inv()?)
    }

    pub fn pow(&self, n: u32) -> Scalar {
        if n == 0 {
            return Scalar::one();
        }
        Scalar { num: self.num.pow(n), den: self.den.pow(n) }
    }

    pub fn powi(&self, n: i32) -> Result<Scalar, ScalarError> {
        if n >= 0 {
            Ok(self.pow(n as u32))
        } else {
            Ok(self.inv()?.pow((-n) as u32))
        }
    }

    /// Replace parameters by scalars.
    pub fn substitute(&self, assign: &HashMap<String, Scalar>) -> Result<Scalar, ScalarError> {
        if assign.is_empty() || self.params().iter().all(|p| !assign.contains_key(&**p)) {
            return Ok(self.clone());
        }
        let n = self.num.eval(assign);
        let d = self.den.eval(assign);
        if d.is_zero() {
            return Err(ScalarError::PoleAtSubstitution);
        }
        Ok(&n * &d.inv().unwrap())
    }

    pub fn subst1(&self, name: &str, val: &Scalar) -> Result<Scalar, ScalarError> {
        let mut m = HashMap::new();
        m.insert(name.to_string(), val.clone());
        self.substitute(&m)
    }

    /// Partial derivative in one parameter.
    pub fn derivative(&self, v: &str) -> Scalar {
        let dp = |p: &Poly| {
            let mut acc: BTreeMap<PMono, Rat> = BTreeMap::new();
            for (m, c) in p.terms() {
                let e = m.exp(v);
                if e == 0 {
                    continue;
                }
                let mut mm = m.without(v);
                if e > 1 {
                    mm = mm.mul(&PMono(vec![(Arc::from(v), e - 1)]));
                }
                *acc.entry(mm).or_insert_with(Rat::zero) += c * Rat::from_integer(BigInt::from(e));
            }
            Poly::from_map(acc)
        };
        let n = dp(&self.num).mul(&self.den).sub(&self.num.mul(&dp(&self.den)));
        Scalar::norm(n, self.den.mul(&self.den))
    }

    pub fn display_atom(&self) -> String {
        let s = self.to_string();
        if self.den.is_one() && self.num.terms().len() == 1 && !s.starts_with('-') {
            s
        } else {
            format!("({s})")
        }
    }

    pub fn parse(text: &str) -> Result<Scalar, ScalarError> {
        let mut p = ScalarParser { s: text.as_bytes(), pos: 0 };
        let v = p.expr()?;
        p.ws();
        if p.pos != p.s.len() {
            return Err(ScalarError::Parse { pos: p.pos, msg: "trailing input".into() });
        }
        Ok(v)
    }
}

/// `x (x-1) ... (x-j+1) / j!`
pub fn binom(x: &Scalar, j: u32) -> Scalar {
    let mut r = Scalar::one();
    for i in 0..j {
        let f = x - &Scalar::from_int(i as i64);
        r = &r * &f;
        r = &r * &Scalar::from_frac(1, i as i64 + 1);
    }
    r
}

/// Integer binomial coefficient with integer (possibly negative) top.
pub fn binom_int(n: i64, j: u32) -> Rat {
    let mut r = Rat::one();
    for i in 0..j as i64 {
        r = r * Rat::new(BigInt::from(n - i), BigInt::from(i + 1));
    }
    r
}

impl<'a> std::ops::Add<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn add(self, o: &Scalar) -> Scalar {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        if self.den.is_one() && o.den.is_one() {
            return Scalar { num: self.num.add(&o.num), den: Poly::one() };
        }
        if self.den == o.den {
            return Scalar::norm(self.num.add(&o.num), self.den.clone());
        }
        let n = self.num.mul(&o.den).add(&o.num.mul(&self.den));
        Scalar::norm(n, self.den.mul(&o.den))
    }
}

impl<'a> std::ops::Sub<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn sub(self, o: &Scalar) -> Scalar {
        self + &o.neg()
    }
}

impl<'a> std::ops::Mul<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn mul(self, o: &Scalar) -> Scalar {
        if self.is_zero() || o.is_zero() {
            return Scalar::zero();
        }
        if self.den.is_one() && o.den.is_one() {
            return Scalar { num: self.num.mul(&o.num), den: Poly::one() };
        }
        if let Some(c) = self.as_rat() {
            return Scalar { num: o.num.scale(&c), den: o.den.clone() };
        }
        if let Some(c) = o.as_rat() {
            return Scalar { num: self.num.scale(&c), den: self.den.clone() };
        }
        Scalar::norm(self.num.mul(&o.num), self.den.mul(&o.den))
    }
}

impl<'a> std::ops::Div<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn div(self, o: &Scalar) -> Scalar {
        self.checked_div(o).expect("division by zero scalar")
    }
}

impl std::ops::Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar::neg(self)
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl std::ops::$tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, o: Scalar) -> Scalar {
                std::ops::$tr::$m(&self, &o)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);
owned_ops!(Div, div);

impl From<i64> for Scalar {
    fn from(n: i64) -> Self {
        Scalar::from_int(n)
    }
}

impl From<Rat> for Scalar {
    fn from(r: Rat) -> Self {
        Scalar::from_rat(r)
    }
}

fn fmt_rat(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for PMono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.0.iter().map(|(n, e)| if *e == 1 { n.to_string() } else { format!("{n}^{e}") }).collect();
        write!(f, "{}", parts.join("*"))
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            if m.is_one() {
                write!(f, "{}", fmt_rat(&a))?;
            } else if a.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", fmt_rat(&a))?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            return write!(f, "{}", self.num);
        }
        let n = if self.num.terms().len() > 1 { format!("({})", self.num) } else { self.num.to_string() };
        write!(f, "{n}/({})", self.den)
    }
}

struct ScalarParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl ScalarParser<'_> {
    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.pos).copied()
    }

    fn err<T>(&self, msg: &str) -> Result<T, ScalarError> {
        Err(ScalarError::Parse { pos: self.pos, msg: msg.into() })
    }

    fn expr(&mut self) -> Result<Scalar, ScalarError> {
        let mut acc = self.term()?;
        while let Some(c) = self.peek() {
            match c {
                b'+' => {
                    self.pos += 1;
                    acc = &acc + &self.term()?;
                }
                b'-' => {
                    self.pos += 1;
                    acc = &acc - &self.term()?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Scalar, ScalarError> {
        let mut acc = self.unary()?;
        while let Some(c) = self.peek() {
            match c {
                b'*' => {
                    self.pos += 1;
                    acc = &acc * &self.unary()?;
                }
                b'/' => {
                    self.pos += 1;
                    let d = self.unary()?;
                    acc = acc.checked_div(&d)?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Scalar, ScalarError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(self.unary()?.neg());
        }
        if self.peek() == Some(b'+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Scalar, ScalarError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let neg = if self.peek() == Some(b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            self.ws();
            let start = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return self.err("expected exponent");
            }
            let e: i32 = std::str::from_utf8(&self.s[start..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| ScalarError::Parse { pos: start, msg: "exponent too large".into() })?;
            return base.powi(if neg { -e } else { e });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Scalar, ScalarError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let n: BigInt = std::str::from_utf8(&self.s[start..self.pos]).unwrap().parse().unwrap();
                Ok(Scalar::from_rat(Rat::from_integer(n)))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.s.len() && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                if RESERVED.contains(&name) {
                    return Err(ScalarError::Parse { pos: start, msg: format!("reserved name '{name}'") });
                }
                Ok(Scalar::param(name))
            }
            _ => self.err("expected number, parameter or '('"),
        }
    }
}

/// Integer gcd helper used by callers that clear denominators.
pub fn int_lcm(a: &BigInt, b: &BigInt) -> BigInt {
    a.lcm(b)
}
