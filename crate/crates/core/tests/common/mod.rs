//! Shared fixtures and an independent oracle for integration tests.
//!
//! `ModeOracle` realises a linear Lie conformal algebra on its vacuum
//! module through the mode commutator formula
//! `[a_(m), b_(n)] = sum_j C(m, j) (a_(j) b)_(m+n-j)`
//! and `(T^(i) c)_(p) = (-1)^i C(p, i) c_(p-i)`.  It shares no code with
//! the rewrite engine beyond the input table.
#![allow(dead_code)]

pub mod battery;

use lambda_forge::constructions::{
    cur, fermion_charged, fermion_neutral, kac_todorov, virasoro, ChargedPair, NeutralFermions,
};
use lambda_forge::liealg::LieAlgData;
use lambda_forge::pva::{LamPoly, PvaExpr, PvaGen, PvaSpec};
use lambda_forge::scalar::{binom, Rat, Scalar};
use lambda_forge::terms::{psign, Monomial, Parity, Term};
use lambda_forge::walgebra::{build_complex, principal_setup, reduced_spec};
use lambda_forge::{Expr, LcaSpec, Registry};
use num_traits::{One, Zero};
use proptest::test_runner::{Config, RngSeed};
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

pub fn pinned(cases: u32, seed: u64) -> Config {
    Config { cases, rng_seed: RngSeed::Fixed(seed), failure_persistence: None, ..Config::default() }
}

pub fn q(n: i64) -> Scalar {
    Scalar::from_int(n)
}

pub fn k() -> Scalar {
    Scalar::param("k")
}

/// Built-in conformal algebras used across the identity battery.
pub fn builtin_specs() -> Vec<(&'static str, Arc<LcaSpec>)> {
    let mut out = vec![
        ("virasoro", Arc::new(virasoro(&Scalar::param("c")).unwrap())),
        ("cur_sl2", Arc::new(cur(&LieAlgData::sl2(), &k()).unwrap())),
        ("cur_sl3", Arc::new(cur(&LieAlgData::sl3(), &k()).unwrap())),
        ("charged_fermion", Arc::new(fermion_charged(&charged_pair()).unwrap())),
        ("neutral_fermion", Arc::new(fermion_neutral(&neutral_pair()).unwrap())),
    ];
    let (data, gr) = principal_setup("sl2").unwrap();
    let cx = build_complex(&data, &gr, &k()).unwrap();
    out.push(("complex_sl2", cx.spec.clone()));
    let red = reduced_spec(&cx).unwrap();
    out.push(("reduced_sl2", red.spec.clone()));
    out.push(("kac_todorov_sl2", kac_todorov(&LieAlgData::sl2(), &k()).unwrap().spec.clone()));
    out
}

pub fn charged_pair() -> Vec<ChargedPair> {
    vec![ChargedPair { lower: "phi".into(), upper: "phis".into(), parity: Parity::Odd, m: Rat::one() }]
}

pub fn neutral_pair() -> NeutralFermions {
    NeutralFermions {
        names: vec!["psi1".into(), "psi2".into()],
        parity: vec![Parity::Odd; 2],
        gram: vec![vec![q(0), q(1)], vec![q(1), q(0)]],
    }
}

pub fn mono(terms: &[(usize, u32)]) -> Monomial {
    let mut m = Monomial::vacuum();
    for &(g, t) in terms.iter().rev() {
        m = Monomial::cons(Term::new(g, t), &m);
    }
    m
}

/// A mode `g_(n)`.
pub type Op = (usize, i64);
/// Vector in the vacuum module: words of creation modes applied to `|0>`.
pub type State = BTreeMap<Vec<Op>, Scalar>;

fn add_to(s: &mut State, w: Vec<Op>, c: &Scalar) {
    if c.is_zero() {
        return;
    }
    let e = s.entry(w.clone()).or_insert_with(Scalar::zero);
    *e = &*e + c;
    if e.is_zero() {
        s.remove(&w);
    }
}

fn add_state(s: &mut State, o: &State, c: &Scalar) {
    for (w, x) in o {
        add_to(s, w.clone(), &(x * c));
    }
}

pub fn vacuum_state() -> State {
    let mut s = State::new();
    s.insert(vec![], Scalar::one());
    s
}

pub struct ModeOracle {
    pub reg: Registry,
    table: HashMap<(usize, usize), Vec<Expr>>,
}

fn rat_scalar(r: &Rat) -> Scalar {
    Scalar::from_rat(r.clone())
}

impl ModeOracle {
    /// Panics on non-linear tables.
    pub fn new(spec: &LcaSpec) -> Self {
        assert!(spec.is_linear(), "mode oracle needs a linear table");
        let reg = spec.reg.clone();
        let mut table = HashMap::new();
        for (&(a, b), prods) in spec.entries() {
            table.insert((a, b), prods.clone());
        }
        // reverse entries from skewsymmetry: p b_(n) a = sum_i (-1)^(n+i+1) T^(i)(a_(n+i) b)
        let keys: Vec<(usize, usize)> = table.keys().copied().collect();
        for (a, b) in keys {
            if table.contains_key(&(b, a)) {
                continue;
            }
            let ab = table[&(a, b)].clone();
            let p = psign(reg.parity(a), reg.parity(b));
            let mut ba = vec![Expr::zero(); ab.len()];
            for (n, slot) in ba.iter_mut().enumerate() {
                for (m, x) in ab.iter().enumerate().skip(n) {
                    let i = (m - n) as u32;
                    let sign = if (n as u32 + i + 1) % 2 == 0 { 1 } else { -1 };
                    slot.add_scaled(&t_divided(x, i), &q(sign * p));
                }
            }
            table.insert((b, a), ba);
        }
        ModeOracle { reg, table }
    }

    fn parity(&self, g: usize) -> Parity {
        self.reg.parity(g)
    }

    fn key(&self, o: &Op) -> (usize, i64) {
        (o.0, -o.1)
    }

    pub fn weight(&self, w: &[Op]) -> Rat {
        w.iter().fold(Rat::zero(), |acc, &(g, n)| acc + &self.reg.get(g).delta - Rat::from_integer((n + 1).into()))
    }

    /// `a_(m) b_(n) v - p b_(n) a_(m) v`, as a vector.
    fn commutator(&self, a: Op, b: Op, rest: &[Op]) -> State {
        let mut out = State::new();
        let Some(prods) = self.table.get(&(a.0, b.0)) else { return out };
        let (m, n) = (a.1, b.1);
        for (j, e) in prods.iter().enumerate() {
            let cj = binom(&q(m), j as u32);
            if cj.is_zero() {
                continue;
            }
            let p = m + n - j as i64;
            for (mm, c) in e.iter() {
                let c = c * &cj;
                if mm.is_vacuum() {
                    if p == -1 {
                        let mut s = State::new();
                        add_to(&mut s, rest.to_vec(), &c);
                        add_state(&mut out, &s, &Scalar::one());
                    }
                    continue;
                }
                let t = mm.head();
                let i = t.tpow;
                let sign = if i % 2 == 0 { q(1) } else { q(-1) };
                let f = &(&c * &sign) * &binom(&q(p), i);
                if f.is_zero() {
                    continue;
                }
                let v = self.apply((t.gen as usize, p - i as i64), rest);
                add_state(&mut out, &v, &f);
            }
        }
        out
    }

    /// `g_(n)` applied to a normally ordered word.
    pub fn apply(&self, op: Op, word: &[Op]) -> State {
        let mut out = State::new();
        if word.is_empty() {
            if op.1 < 0 {
                out.insert(vec![op], Scalar::one());
            }
            return out;
        }
        let first = word[0];
        let even_tie = op == first && !self.parity(op.0).is_odd();
        if op.1 < 0 && (self.key(&op) < self.key(&first) || even_tie) {
            let mut w = vec![op];
            w.extend_from_slice(word);
            out.insert(w, Scalar::one());
            return out;
        }
        if op.1 < 0 && op == first && self.parity(op.0).is_odd() {
            let half = Scalar::from_frac(1, 2);
            return self.commutator(op, first, &word[1..]).into_iter().map(|(w, c)| (w, &c * &half)).collect();
        }
        out = self.commutator(op, first, &word[1..]);
        let s = q(psign(self.parity(op.0), self.parity(first.0)));
        for (w, c) in self.apply(op, &word[1..]) {
            add_state(&mut out, &self.apply(first, &w), &(&c * &s));
        }
        out
    }

    pub fn apply_state(&self, op: Op, v: &State) -> State {
        let mut out = State::new();
        for (w, c) in v {
            add_state(&mut out, &self.apply(op, w), c);
        }
        out
    }

    /// Modes of `T^(i) g`: `(T^(i) g)_(n) = (-1)^i C(n, i) g_(n-i)`.
    pub fn term_mode(&self, t: Term, n: i64, v: &State) -> State {
        let i = t.tpow;
        let sign = if i % 2 == 0 { q(1) } else { q(-1) };
        let f = &sign * &binom(&q(n), i);
        let mut out = State::new();
        if !f.is_zero() {
            add_state(&mut out, &self.apply_state((t.gen as usize, n - i as i64), v), &f);
        }
        out
    }

    fn state_weight_bound(&self, v: &State) -> i64 {
        v.keys().map(|w| ceil(&self.weight(w))).max().unwrap_or(0)
    }

    fn mono_delta(&self, m: &Monomial) -> Rat {
        self.reg.mono_delta(m)
    }

    /// Modes of a right-nested normally ordered monomial:
    /// `(:a y:)_(n) = sum_j a_(-1-j) y_(n+j) + p(a,y) y_(n-1-j) a_(j)`.
    pub fn mono_mode(&self, m: &Monomial, n: i64, v: &State) -> State {
        if m.is_vacuum() {
            return if n == -1 { v.clone() } else { State::new() };
        }
        if m.len() == 1 {
            return self.term_mode(m.head(), n, v);
        }
        let a = m.head();
        let y = m.tail();
        let da = self.mono_delta(&Monomial::single(a));
        let dy = self.mono_delta(&y);
        let wt = self.state_weight_bound(v);
        let jmax = (wt + ceil(&da)).max(wt + ceil(&dy) - n).max(0) + 1;
        let p = q(psign(self.reg.mono_parity(&Monomial::single(a)), self.reg.mono_parity(&y)));
        let mut out = State::new();
        for j in 0..=jmax {
            let inner = self.mono_mode(&y, n + j, v);
            add_state(&mut out, &self.term_mode(a, -1 - j, &inner), &Scalar::one());
            let inner = self.term_mode(a, j, v);
            add_state(&mut out, &self.mono_mode(&y, n - 1 - j, &inner), &p);
        }
        out
    }

    /// State of an element: `x = x_(-1) |0>`.
    pub fn state(&self, x: &Expr) -> State {
        self.expr_mode(x, -1, &vacuum_state())
    }

    pub fn expr_mode(&self, x: &Expr, n: i64, v: &State) -> State {
        let mut out = State::new();
        for (m, c) in x.iter() {
            add_state(&mut out, &self.mono_mode(m, n, v), c);
        }
        out
    }
}

fn ceil(r: &Rat) -> i64 {
    let c = r.ceil();
    i64::try_from(c.to_integer()).unwrap()
}

/// `T^(i)` on a linear element (single terms and the vacuum).
fn t_divided(x: &Expr, i: u32) -> Expr {
    if i == 0 {
        return x.clone();
    }
    let mut out = Expr::zero();
    for (m, c) in x.iter() {
        if m.is_vacuum() {
            continue;
        }
        let t = m.head();
        let b = rat_scalar(&lambda_forge::scalar::binom_int((t.tpow + i) as i64, i));
        out.add_term(Monomial::single(Term::new(t.gen as usize, t.tpow + i)), c * &b);
    }
    out
}

// ---------------------------------------------------------------- PVAs

pub fn pva_sl2_current() -> PvaSpec {
    let base =
        PvaSpec::new(["e", "h", "f"].iter().map(|n| PvaGen::new(n, Parity::Even, Some(Rat::one()))).collect(), vec![])
            .unwrap();
    let entries = [("e", "h", "-2*e"), ("e", "f", "h + k*lam"), ("h", "h", "2*k*lam"), ("h", "f", "-2*f")]
        .iter()
        .map(|(a, b, t)| (base.lookup(a).unwrap(), base.lookup(b).unwrap(), base.parse_lam(t).unwrap()))
        .collect();
    PvaSpec::new(base.gens(), entries).unwrap()
}

pub fn pva_bc_system() -> PvaSpec {
    PvaSpec::new(
        vec![PvaGen::new("b", Parity::Odd, Some(Rat::one())), PvaGen::new("c", Parity::Odd, Some(Rat::zero()))],
        vec![(0, 1, LamPoly::constant(PvaExpr::one()))],
    )
    .unwrap()
}

pub fn pva_specs() -> Vec<PvaSpec> {
    vec![PvaSpec::gfz(), pva_sl2_current(), pva_bc_system()]
}
