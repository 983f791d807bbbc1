//! hbar-deformed products, the H-twisted Zhu algebra and its classical limit.

use crate::scalar::{binom, Rat, Scalar};
use crate::terms::{psign, Expr, Monomial, Parity, Registry};
use crate::wick::Engine;
use num_traits::{One, Signed, Zero};
use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

pub const HBAR: &str = "hbar";

pub fn hbar() -> Scalar {
    Scalar::param(HBAR)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ZhuError {
    #[error("spec has no Hamiltonian; the Zhu algebra needs conformal weights")]
    NotFreelyGenerated,
    #[error("grading violation while reordering {0}")]
    GradingViolation(String),
}

/// Coset data for a general `Gamma/Z` grading.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaData {
    /// `epsilon_a` per generator, in `(-1, 0]`.
    pub eps: Vec<Rat>,
}

impl GammaData {
    /// Grading induced by the Hamiltonian: every `epsilon` vanishes.
    pub fn h_induced(reg: &Registry) -> GammaData {
        GammaData { eps: vec![Rat::zero(); reg.len()] }
    }

    /// From coset representatives `gamma_bar_a`: `epsilon_a` is the maximal non-positive
    /// number congruent to `gamma_bar_a - Delta_a` mod 1.
    pub fn from_cosets(reg: &Registry, cosets: &[Rat]) -> GammaData {
        let eps = (0..reg.len())
            .map(|i| {
                let d = &reg.get(i).delta - &cosets[i];
                let f = &d - d.floor();
                if f.is_zero() {
                    f
                } else {
                    -f
                }
            })
            .collect();
        GammaData { eps }
    }

    pub fn chi(&self, ea: &Rat, eb: &Rat) -> Rat {
        if ea + eb <= -Rat::one() {
            Rat::one()
        } else {
            Rat::zero()
        }
    }

    /// `epsilon` of a monomial, read as nested `(-1)`-products.
    pub fn eps_mono(&self, m: &Monomial) -> Rat {
        let mut e = Rat::zero();
        for t in m.terms().iter().rev() {
            let ea = &self.eps[t.gen as usize];
            let chi = self.chi(ea, &e);
            e = ea + &e + chi;
        }
        e
    }

    /// `gamma = Delta + epsilon` of a monomial.
    pub fn gamma_mono(&self, reg: &Registry, m: &Monomial) -> Rat {
        reg.mono_delta(m) + self.eps_mono(m)
    }
}

fn rs(r: &Rat) -> Scalar {
    Scalar::from_rat(r.clone())
}

/// Number of `j >= 0` worth summing for `x_(n+j) y` style sums.
fn jrange(nprods: usize, n: i64) -> i64 {
    (nprods as i64 - n).max(-n).max(0)
}

/// `a_(n, hbar, Gamma) b = sum_j C(gamma_a, j) hbar^j a_(n+j) b`, extended linearly in `a`.
pub fn deformed_product_with(eng: &Engine, a: &Expr, n: i64, b: &Expr, gamma: Option<&GammaData>, h: &Scalar) -> Expr {
    let reg = eng.reg();
    let mut out = Expr::zero();
    for (m, c) in a.iter() {
        let am = Expr::mono(m.clone());
        let g = match gamma {
            Some(gd) => gd.gamma_mono(reg, m),
            None => reg.mono_delta(m),
        };
        let nprods = eng.products(&am, b).len();
        for j in 0..jrange(nprods, n) {
            let coef = &binom(&rs(&g), j as u32) * &h.pow(j as u32);
            if coef.is_zero() {
                continue;
            }
            out.add_scaled(&eng.nth_product(&am, n + j, b), &(&coef * c));
        }
    }
    out
}

pub fn deformed_product(eng: &Engine, a: &Expr, n: i64, b: &Expr, gamma: Option<&GammaData>) -> Expr {
    deformed_product_with(eng, a, n, b, gamma, &hbar())
}

/// `[a, b]_(hbar, Gamma) = sum_j C(gamma_a - 1, j) hbar^j a_(j) b`.
pub fn hbar_bracket_with(eng: &Engine, a: &Expr, b: &Expr, gamma: Option<&GammaData>, h: &Scalar) -> Expr {
    let reg = eng.reg();
    let mut out = Expr::zero();
    for (m, c) in a.iter() {
        let am = Expr::mono(m.clone());
        let g = match gamma {
            Some(gd) => gd.gamma_mono(reg, m),
            None => reg.mono_delta(m),
        };
        let g1 = &rs(&g) - &Scalar::one();
        for (j, e) in eng.products(&am, b).iter().enumerate() {
            let coef = &binom(&g1, j as u32) * &h.pow(j as u32);
            out.add_scaled(e, &(&coef * c));
        }
    }
    out
}

pub fn hbar_bracket(eng: &Engine, a: &Expr, b: &Expr, gamma: Option<&GammaData>) -> Expr {
    hbar_bracket_with(eng, a, b, gamma, &hbar())
}

/// `a *_n b`.
pub fn star_product(eng: &Engine, a: &Expr, n: i64, b: &Expr) -> Expr {
    deformed_product_with(eng, a, n, b, None, &Scalar::one())
}

/// `[a_* b]`.
pub fn star_bracket(eng: &Engine, a: &Expr, b: &Expr) -> Expr {
    hbar_bracket_with(eng, a, b, None, &Scalar::one())
}

/// `H a` (conformal weight times `a`, monomial by monomial).
pub fn apply_h(reg: &Registry, a: &Expr) -> Expr {
    let mut out = Expr::zero();
    for (m, c) in a.iter() {
        out.add_term(m.clone(), c * &rs(&reg.mono_delta(m)));
    }
    out
}

/// Element of a PBW-generated algebra: ordered words of generator indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ZhuExpr(pub BTreeMap<Vec<usize>, Scalar>);

impl ZhuExpr {
    pub fn zero() -> Self {
        ZhuExpr::default()
    }

    pub fn one() -> Self {
        ZhuExpr::scalar(Scalar::one())
    }

    pub fn scalar(c: Scalar) -> Self {
        let mut z = ZhuExpr::zero();
        z.add_term(vec![], c);
        z
    }

    pub fn gen(i: usize) -> Self {
        let mut z = ZhuExpr::zero();
        z.add_term(vec![i], Scalar::one());
        z
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add_term(&mut self, w: Vec<usize>, c: Scalar) {
        if c.is_zero() {
            return;
        }
        let e = self.0.entry(w).or_default();
        *e = &*e + &c;
        if e.is_zero() {
            self.0.retain(|_, v| !v.is_zero());
        }
    }

    pub fn add_scaled(&mut self, o: &ZhuExpr, c: &Scalar) {
        for (w, d) in &o.0 {
            self.add_term(w.clone(), d * c);
        }
    }

    pub fn add(&self, o: &ZhuExpr) -> ZhuExpr {
        let mut r = self.clone();
        r.add_scaled(o, &Scalar::one());
        r
    }

    pub fn sub(&self, o: &ZhuExpr) -> ZhuExpr {
        let mut r = self.clone();
        r.add_scaled(o, &Scalar::from_int(-1));
        r
    }

    pub fn scale(&self, c: &Scalar) -> ZhuExpr {
        let mut r = ZhuExpr::zero();
        r.add_scaled(self, c);
        r
    }

    pub fn as_scalar(&self) -> Option<Scalar> {
        match self.0.len() {
            0 => Some(Scalar::zero()),
            1 => self.0.get(&vec![]).cloned(),
            _ => None,
        }
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> ZhuDisplay<'a> {
        ZhuDisplay { z: self, names }
    }
}

pub struct ZhuDisplay<'a> {
    z: &'a ZhuExpr,
    names: &'a [String],
}

impl fmt::Display for ZhuDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.z.is_zero() {
            return write!(f, "0");
        }
        // highest words first
        let mut items: Vec<(&Vec<usize>, &Scalar)> = self.z.0.iter().collect();
        items.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(b.0)));
        for (k, (w, c)) in items.into_iter().enumerate() {
            let word = w.iter().map(|&i| self.names[i].as_str()).collect::<Vec<_>>().join("*");
            let (neg, mag) = match c.as_rat() {
                Some(r) if r.is_negative() => (true, c.neg()),
                _ => (false, c.clone()),
            };
            if k == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            if w.is_empty() {
                write!(f, "{}", mag.display_atom())?;
            } else if mag.is_one() {
                write!(f, "{word}")?;
            } else {
                write!(f, "{}*{word}", mag.display_atom())?;
            }
        }
        Ok(())
    }
}

/// Associative algebra with a PBW basis of ordered words, given by generator commutators.
pub trait CommutatorSource {
    fn parity(&self, i: usize) -> Parity;
    /// `x_i x_j - p x_j x_i` for `i > j`, and `x_i x_i` super-commutator for odd `i`.
    fn commutator(&self, i: usize, j: usize) -> ZhuExpr;
}

/// Reordering engine with memoised left multiplication.
pub struct PbwAlgebra<S: CommutatorSource> {
    pub src: S,
    mul_cache: RefCell<HashMap<(usize, Vec<usize>), ZhuExpr>>,
}

impl<S: CommutatorSource> PbwAlgebra<S> {
    pub fn new(src: S) -> Self {
        PbwAlgebra { src, mul_cache: RefCell::default() }
    }

    /// `x_i * w` in PBW form.
    pub fn mul_gen(&self, i: usize, w: &[usize]) -> ZhuExpr {
        if w.is_empty() || i < w[0] || (i == w[0] && !self.src.parity(i).is_odd()) {
            let mut v = Vec::with_capacity(w.len() + 1);
            v.push(i);
            v.extend_from_slice(w);
            let mut z = ZhuExpr::zero();
            z.add_term(v, Scalar::one());
            return z;
        }
        let key = (i, w.to_vec());
        if let Some(z) = self.mul_cache.borrow().get(&key) {
            return z.clone();
        }
        let f = w[0];
        let rest = &w[1..];
        let out = if i == f {
            // odd square: x x = [x, x] / 2
            let c = self.src.commutator(i, i);
            self.mul_expr_word(&c, rest).scale(&Scalar::from_frac(1, 2))
        } else {
            let p = psign(self.src.parity(i), self.src.parity(f));
            let inner = self.mul_gen(i, rest);
            let mut out = ZhuExpr::zero();
            for (u, c) in &inner.0 {
                out.add_scaled(&self.mul_gen(f, u), &(c * &Scalar::from_int(p)));
            }
            let com = self.src.commutator(i, f);
            out.add_scaled(&self.mul_expr_word(&com, rest), &Scalar::one());
            out
        };
        self.mul_cache.borrow_mut().insert(key, out.clone());
        out
    }

    /// `u * w` for a word `u` (not necessarily ordered).
    pub fn mul_word(&self, u: &[usize], w: &[usize]) -> ZhuExpr {
        let mut acc = ZhuExpr::zero();
        acc.add_term(w.to_vec(), Scalar::one());
        for &i in u.iter().rev() {
            let mut next = ZhuExpr::zero();
            for (v, c) in &acc.0 {
                next.add_scaled(&self.mul_gen(i, v), c);
            }
            acc = next;
        }
        acc
    }

    fn mul_expr_word(&self, z: &ZhuExpr, w: &[usize]) -> ZhuExpr {
        let mut out = ZhuExpr::zero();
        for (u, c) in &z.0 {
            out.add_scaled(&self.mul_word(u, w), c);
        }
        out
    }

    pub fn mul(&self, a: &ZhuExpr, b: &ZhuExpr) -> ZhuExpr {
        let mut out = ZhuExpr::zero();
        for (u, c) in &a.0 {
            for (w, d) in &b.0 {
                out.add_scaled(&self.mul_word(u, w), &(c * d));
            }
        }
        out
    }

    /// Normal form of an arbitrary combination of words.
    pub fn normal_form(&self, z: &ZhuExpr) -> ZhuExpr {
        self.mul(z, &ZhuExpr::one())
    }

    /// Parity of a word.
    pub fn word_parity(&self, w: &[usize]) -> Parity {
        w.iter().fold(Parity::Even, |p, &i| p.add(self.src.parity(i)))
    }

    /// Super-commutator `a b - p(a,b) b a` for homogeneous `a`, `b`.
    pub fn supercommutator(&self, a: &ZhuExpr, b: &ZhuExpr) -> ZhuExpr {
        let pa = a.0.keys().next().map_or(Parity::Even, |w| self.word_parity(w));
        let pb = b.0.keys().next().map_or(Parity::Even, |w| self.word_parity(w));
        self.mul(a, b).sub(&self.mul(b, a).scale(&Scalar::from_int(psign(pa, pb))))
    }
}

/// Commutators from an explicit table.
#[derive(Clone, Debug)]
pub struct TableSource {
    pub parity: Vec<Parity>,
    pub table: BTreeMap<(usize, usize), ZhuExpr>,
}

impl CommutatorSource for TableSource {
    fn parity(&self, i: usize) -> Parity {
        self.parity[i]
    }

    fn commutator(&self, i: usize, j: usize) -> ZhuExpr {
        if let Some(z) = self.table.get(&(i, j)) {
            return z.clone();
        }
        if let Some(z) = self.table.get(&(j, i)) {
            let p = psign(self.parity[i], self.parity[j]);
            return z.scale(&Scalar::from_int(-p));
        }
        ZhuExpr::zero()
    }
}

/// Commutators of the Zhu algebra computed lazily through `pi_Z`.
pub struct ZhuSource {
    eng: Engine,
    table: RefCell<HashMap<(usize, usize), ZhuExpr>>,
    pi_cache: RefCell<HashMap<Monomial, ZhuExpr>>,
    /// Back-reference for reordering inside `pi_Z`.
    alg: RefCell<Option<std::rc::Weak<ZhuInner>>>,
}

struct ZhuInner {
    pbw: PbwAlgebra<ZhuSourceRef>,
}

struct ZhuSourceRef(std::rc::Rc<ZhuSource>);

impl CommutatorSource for ZhuSourceRef {
    fn parity(&self, i: usize) -> Parity {
        self.0.eng.reg().parity(i)
    }

    fn commutator(&self, i: usize, j: usize) -> ZhuExpr {
        self.0.commutator(i, j)
    }
}

/// `Zhu_H V` for the universal enveloping vertex algebra of a spec.
pub struct ZhuAlgebra {
    src: std::rc::Rc<ZhuSource>,
    inner: std::rc::Rc<ZhuInner>,
}

impl ZhuSource {
    fn alg(&self) -> std::rc::Rc<ZhuInner> {
        self.alg.borrow().as_ref().and_then(|w| w.upgrade()).expect("algebra alive")
    }

    fn commutator(&self, i: usize, j: usize) -> ZhuExpr {
        if let Some(z) = self.table.borrow().get(&(i, j)) {
            return z.clone();
        }
        let z = self.pi_z(&star_bracket(&self.eng, &Expr::gen(i), &Expr::gen(j)));
        self.table.borrow_mut().insert((i, j), z.clone());
        z
    }

    fn pi_z(&self, x: &Expr) -> ZhuExpr {
        let mut out = ZhuExpr::zero();
        for (m, c) in x.iter() {
            out.add_scaled(&self.pi_mono(m), c);
        }
        out
    }

    fn pi_mono(&self, m: &Monomial) -> ZhuExpr {
        if m.is_vacuum() {
            return ZhuExpr::one();
        }
        if let Some(z) = self.pi_cache.borrow().get(m) {
            return z.clone();
        }
        let reg = self.eng.reg();
        let t = m.head();
        let rest = m.tail();
        let a = t.gen as usize;
        let k = t.tpow;
        let da = rs(&reg.get(a).delta);
        let pref = binom(&da.neg(), k);
        let mut out = ZhuExpr::zero();
        if !pref.is_zero() {
            let pb = self.pi_mono(&rest);
            let alg = self.alg();
            for (w, c) in &pb.0 {
                out.add_scaled(&alg.pbw.mul_gen(a, w), c);
            }
            let ae = Expr::gen(a);
            let be = Expr::mono(rest.clone());
            let dk = &da + &Scalar::from_int(k as i64);
            let dm1 = &da - &Scalar::one();
            for (j, e) in self.eng.products(&ae, &be).iter().enumerate() {
                let coef = &(&binom(&dm1, j as u32) * &dk) * &Scalar::from_frac(1, (k as i64) + (j as i64) + 1);
                if coef.is_zero() {
                    continue;
                }
                out.add_scaled(&self.pi_z(e), &coef.neg());
            }
            out = out.scale(&pref);
        }
        self.pi_cache.borrow_mut().insert(m.clone(), out.clone());
        out
    }
}

impl ZhuAlgebra {
    pub fn new(eng: Engine) -> Result<ZhuAlgebra, ZhuError> {
        if !eng.spec().hamiltonian {
            return Err(ZhuError::NotFreelyGenerated);
        }
        let src = std::rc::Rc::new(ZhuSource {
            eng,
            table: RefCell::default(),
            pi_cache: RefCell::default(),
            alg: RefCell::new(None),
        });
        let inner = std::rc::Rc::new(ZhuInner { pbw: PbwAlgebra::new(ZhuSourceRef(src.clone())) });
        *src.alg.borrow_mut() = Some(std::rc::Rc::downgrade(&inner));
        Ok(ZhuAlgebra { src, inner })
    }

    pub fn engine(&self) -> &Engine {
        &self.src.eng
    }

    pub fn names(&self) -> Vec<String> {
        let reg = self.src.eng.reg();
        (0..reg.len()).map(|i| reg.name(i).to_string()).collect()
    }

    pub fn pi_z(&self, x: &Expr) -> ZhuExpr {
        self.src.pi_z(x)
    }

    /// `[a-bar, b-bar] = pi_Z([a_* b])`.
    pub fn commutator(&self, i: usize, j: usize) -> ZhuExpr {
        self.src.commutator(i, j)
    }

    pub fn mul(&self, a: &ZhuExpr, b: &ZhuExpr) -> ZhuExpr {
        self.inner.pbw.mul(a, b)
    }

    pub fn normal_form(&self, z: &ZhuExpr) -> ZhuExpr {
        self.inner.pbw.normal_form(z)
    }

    pub fn supercommutator(&self, a: &ZhuExpr, b: &ZhuExpr) -> ZhuExpr {
        self.inner.pbw.supercommutator(a, b)
    }

    /// Full table `[x_i, x_j]` for `i <= j`.
    pub fn table(&self) -> BTreeMap<(usize, usize), ZhuExpr> {
        let n = self.src.eng.reg().len();
        let mut t = BTreeMap::new();
        for i in 0..n {
            for j in i..n {
                let z = self.commutator(i, j);
                if !z.is_zero() {
                    t.insert((i, j), z);
                }
            }
        }
        t
    }
}

/// `pi_0 : V -> V / V_(-2) V`, a supercommutative algebra on the generators.
pub fn pi0(reg: &Registry, x: &Expr) -> ZhuExpr {
    let mut out = ZhuExpr::zero();
    for (m, c) in x.iter() {
        if m.terms().iter().any(|t| t.tpow > 0) {
            continue;
        }
        let mut w: Vec<usize> = m.terms().iter().map(|t| t.gen as usize).collect();
        let sign = sort_with_sign(reg, &mut w);
        if sign != 0 {
            out.add_term(w, c * &Scalar::from_int(sign));
        }
    }
    out
}

/// Sort a word supercommutatively; 0 if an odd letter repeats.
pub fn sort_with_sign(reg: &Registry, w: &mut [usize]) -> i64 {
    let mut sign = 1;
    for i in 1..w.len() {
        let mut j = i;
        while j > 0 && w[j - 1] > w[j] {
            sign *= psign(reg.parity(w[j - 1]), reg.parity(w[j]));
            w.swap(j - 1, j);
            j -= 1;
        }
    }
    if w.windows(2).any(|p| p[0] == p[1] && reg.parity(p[0]).is_odd()) {
        0
    } else {
        sign
    }
}

/// Supercommutative product of two elements of the classical quotient.
pub fn comm_mul(reg: &Registry, a: &ZhuExpr, b: &ZhuExpr) -> ZhuExpr {
    let mut out = ZhuExpr::zero();
    for (u, c) in &a.0 {
        for (v, d) in &b.0 {
            let mut w: Vec<usize> = u.iter().chain(v.iter()).copied().collect();
            let s = sort_with_sign(reg, &mut w);
            if s != 0 {
                out.add_term(w, &(c * d) * &Scalar::from_int(s));
            }
        }
    }
    out
}

/// Classical (hbar = 0) Zhu algebra: generator-level Poisson brackets `{a, b} = pi_0(a_(0) b)`.
pub struct ClassicalZhu {
    pub table: BTreeMap<(usize, usize), ZhuExpr>,
    pub parity: Vec<Parity>,
}

pub fn classical_zhu(eng: &Engine) -> ClassicalZhu {
    let reg = eng.reg();
    let n = reg.len();
    let mut table = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            let p = eng.products(&Expr::gen(i), &Expr::gen(j));
            let z = p.first().map(|e| pi0(reg, e)).unwrap_or_default();
            if !z.is_zero() {
                table.insert((i, j), z);
            }
        }
    }
    ClassicalZhu { table, parity: (0..n).map(|i| reg.parity(i)).collect() }
}

impl ClassicalZhu {
    fn word_parity(&self, w: &[usize]) -> Parity {
        w.iter().fold(Parity::Even, |p, &i| p.add(self.parity[i]))
    }

    /// Poisson bracket, extended by the Leibniz rules.
    pub fn bracket(&self, reg: &Registry, a: &ZhuExpr, b: &ZhuExpr) -> ZhuExpr {
        let mut out = ZhuExpr::zero();
        for (u, c) in &a.0 {
            for (v, d) in &b.0 {
                out.add_scaled(&self.bracket_words(reg, u, v), &(c * d));
            }
        }
        out
    }

    fn bracket_words(&self, reg: &Registry, u: &[usize], v: &[usize]) -> ZhuExpr {
        if u.is_empty() || v.is_empty() {
            return ZhuExpr::zero();
        }
        if u.len() > 1 {
            // {x u', v} = x {u', v} + p(u', v) {x, v} u'
            let x = &u[..1];
            let rest = &u[1..];
            let xz = word(x);
            let rz = word(rest);
            let first = comm_mul(reg, &xz, &self.bracket_words(reg, rest, v));
            let p = psign(self.word_parity(rest), self.word_parity(v));
            let second = comm_mul(reg, &self.bracket_words(reg, x, v), &rz).scale(&Scalar::from_int(p));
            return first.add(&second);
        }
        if v.len() > 1 {
            // {a, y v'} = {a, y} v' + p(a, y) y {a, v'}
            let y = &v[..1];
            let rest = &v[1..];
            let first = comm_mul(reg, &self.bracket_words(reg, u, y), &word(rest));
            let p = psign(self.word_parity(u), self.word_parity(y));
            let second = comm_mul(reg, &word(y), &self.bracket_words(reg, u, rest)).scale(&Scalar::from_int(p));
            return first.add(&second);
        }
        self.table.get(&(u[0], v[0])).cloned().unwrap_or_default()
    }
}

fn word(w: &[usize]) -> ZhuExpr {
    let mut z = ZhuExpr::zero();
    z.add_term(w.to_vec(), Scalar::one());
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{cur, virasoro};
    use crate::liealg::LieAlgData;
    use std::sync::Arc;

    #[test]
    fn current_zhu_is_enveloping() {
        let k = Scalar::param("k");
        let eng = Engine::new(Arc::new(cur(&LieAlgData::sl2(), &k).unwrap()));
        let (e, h, f) = (Expr::gen(0), Expr::gen(1), Expr::gen(2));
        let d = deformed_product(&eng, &e, 0, &f, None);
        assert_eq!(d, h.add(&Expr::scalar(&k * &hbar())));
        assert_eq!(hbar_bracket(&eng, &e, &f, None), h);
        let zhu = ZhuAlgebra::new(eng).unwrap();
        assert_eq!(zhu.commutator(0, 2), ZhuExpr::gen(1));
        assert_eq!(zhu.commutator(1, 0), ZhuExpr::gen(0).scale(&Scalar::from_int(2)));
        // f e = e f - h
        let fe = zhu.mul(&ZhuExpr::gen(2), &ZhuExpr::gen(0));
        let mut want = ZhuExpr::zero();
        want.add_term(vec![0, 2], Scalar::one());
        want.add_term(vec![1], Scalar::from_int(-1));
        assert_eq!(fe, want);
        // pi_Z(T e) = -e
        assert_eq!(zhu.pi_z(&crate::terms::apply_t(&e)), ZhuExpr::gen(0).scale(&Scalar::from_int(-1)));
    }

    #[test]
    fn virasoro_zhu_commutative() {
        let c = Scalar::param("c");
        let eng = Engine::new(Arc::new(virasoro(&c).unwrap()));
        let l = Expr::gen(0);
        assert_eq!(
            hbar_bracket(&eng, &l, &l, None),
            crate::terms::apply_t(&l).add(&l.scale(&(&Scalar::from_int(2) * &hbar())))
        );
        let cz = classical_zhu(&eng);
        assert!(cz.table.is_empty());
        let zhu = ZhuAlgebra::new(eng).unwrap();
        assert!(zhu.commutator(0, 0).is_zero());
    }

    #[test]
    fn gamma_cosets() {
        let reg = Registry::new(vec![
            crate::terms::GeneratorDecl::new("a", Parity::Odd, Rat::new(1.into(), 2.into())),
            crate::terms::GeneratorDecl::new("b", Parity::Even, Rat::one()),
        ])
        .unwrap();
        let g = GammaData::from_cosets(&reg, &[Rat::zero(), Rat::zero()]);
        assert_eq!(g.eps, vec![Rat::new((-1).into(), 2.into()), Rat::zero()]);
        let aa = reg.make_monomial(&[("a", 0), ("a", 1)]).unwrap();
        assert_eq!(g.eps_mono(&aa), Rat::zero());
        assert_eq!(GammaData::h_induced(&reg).eps, vec![Rat::zero(); 2]);
    }
}
