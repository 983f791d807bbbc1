//! Seed-pinned identity battery over the built-in conformal algebras.

mod common;

use common::{battery, builtin_specs, mono, pinned, q};
use lambda_forge::zhu::{star_bracket, star_product, ZhuAlgebra};
use lambda_forge::{Engine, Expr, LcaSpec};
use proptest::prelude::*;
use std::sync::Arc;

fn spec_at(s: usize) -> (&'static str, Arc<LcaSpec>) {
    let mut all = builtin_specs();
    let i = s % all.len();
    all.swap_remove(i)
}

fn term_expr(spec: &LcaSpec, g: usize, t: u32) -> Expr {
    Expr::mono(mono(&[(g % spec.reg.len(), t)]))
}

fn random_normal(eng: &Engine, raw: &[(usize, u32)]) -> Expr {
    let n = eng.reg().len();
    let terms: Vec<(usize, u32)> = raw.iter().map(|&(g, t)| (g % n, t)).collect();
    eng.normal_form(&Expr::mono(mono(&terms)))
}

fn ok(r: battery::Check, name: &str) -> Result<(), TestCaseError> {
    r.map_err(|e| TestCaseError::fail(format!("{name}: {e}")))
}

proptest! {
    #![proptest_config(pinned(24, 0x5eed_0010))]

    /// `:ab: - p :ba: = int_{-T}^0 [a_lam b] dlam`.
    #[test]
    fn quasicommutativity(x in prop::collection::vec((0usize..16, 0u32..2), 1..=2),
                          y in prop::collection::vec((0usize..16, 0u32..2), 1..=2),
                          s in 0usize..8) {
        let (name, spec) = spec_at(s);
        let eng = Engine::new(spec);
        let a = random_normal(&eng, &x);
        let b = random_normal(&eng, &y);
        prop_assume!(a.homogeneous_delta(eng.reg()).map_or(false, |d| d <= lambda_forge::scalar::Rat::from_integer(4.into())));
        prop_assume!(b.homogeneous_delta(eng.reg()).map_or(false, |d| d <= lambda_forge::scalar::Rat::from_integer(4.into())));
        ok(battery::quasicommutativity(&eng, &a, &b), name)?;
    }

    /// `:a:bc:: - p(a,b) :b:ac:: = ::ab:c: - p(a,b) ::ba:c:`.
    #[test]
    fn weak_quasi_associativity(g in prop::array::uniform3((0usize..16, 0u32..2)), s in 0usize..8) {
        let (name, spec) = spec_at(s);
        let eng = Engine::new(spec.clone());
        let [a, b, c] = g.map(|(i, t)| term_expr(&spec, i, t));
        ok(battery::weak_quasi_associativity(&eng, &a, &b, &c), name)?;
    }

    /// Non-commutative Wick formula
    /// `[a_lam :bc:] = :[a_lam b]c: + p :b[a_lam c]: + int_0^lam [[a_lam b]_mu c] dmu`.
    #[test]
    fn left_wick(g in prop::array::uniform3(0usize..16), s in 0usize..8) {
        let (name, spec) = spec_at(s);
        let eng = Engine::new(spec.clone());
        let [a, b, c] = g.map(|i| term_expr(&spec, i, 0));
        ok(battery::left_wick(&eng, &a, &b, &c), name)?;
    }

    /// normal_form is idempotent and preserves weight, charge and parity.
    #[test]
    fn normal_form_projection(x in prop::collection::vec((0usize..16, 0u32..3), 1..=4), s in 0usize..8) {
        let (name, spec) = spec_at(s);
        let eng = Engine::new(spec.clone());
        let raw = Expr::mono(mono(&x.iter().map(|&(g, t)| (g % spec.reg.len(), t)).collect::<Vec<_>>()));
        let nf = eng.normal_form(&raw);
        prop_assert_eq!(eng.normal_form(&nf), nf.clone(), "{}", name);
        prop_assert!(nf.is_normal(eng.reg()));
        let m = raw.monomials().next().unwrap().clone();
        for n in nf.monomials() {
            if n.is_vacuum() {
                continue;
            }
            prop_assert_eq!(spec.reg.mono_delta(n), spec.reg.mono_delta(&m));
            prop_assert_eq!(spec.reg.mono_charge(n), spec.reg.mono_charge(&m));
            prop_assert_eq!(spec.reg.mono_parity(n), spec.reg.mono_parity(&m));
        }
    }
}

proptest! {
    #![proptest_config(pinned(24, 0x5eed_0020))]

    /// `a_(-2,hbar) b = ((T + hbar H) a)_(-1,hbar) b`.
    #[test]
    fn hbar_sesquilinearity(g in prop::array::uniform2((0usize..16, 0u32..2)), s in 0usize..8) {
        let (name, spec) = spec_at(s);
        let eng = Engine::new(spec.clone());
        let [a, b] = g.map(|(i, t)| term_expr(&spec, i, t));
        ok(battery::hbar_sesquilinearity(&eng, &a, &b), name)?;
    }

    /// `(a_(-1,h) b)_(-1,h) c - a_(-1,h)(b_(-1,h) c)
    ///   = sum_j a_(-j-2,h)(b_(j,h) c) + p b_(-j-2,h)(a_(j,h) c)`.
    #[test]
    fn hbar_quasi_associativity(g in prop::array::uniform3(0usize..16), s in 0usize..8) {
        let (name, spec) = spec_at(s);
        let eng = Engine::new(spec.clone());
        let [a, b, c] = g.map(|i| term_expr(&spec, i, 0));
        ok(battery::hbar_quasi_associativity(&eng, &a, &b, &c), name)?;
    }

    /// The hbar-bracket is a derivation of every (n, hbar)-product.
    #[test]
    fn hbar_bracket_derivation(g in prop::array::uniform3(0usize..16), n in -2i64..2, s in 0usize..8) {
        let (name, spec) = spec_at(s);
        let eng = Engine::new(spec.clone());
        let [a, b, c] = g.map(|i| term_expr(&spec, i, 0));
        ok(battery::hbar_bracket_derivation(&eng, &a, &b, &c, n), name)?;
    }
}

proptest! {
    #![proptest_config(pinned(50, 0x5eed_0030))]

    /// Borcherds identity, 50 instances per spec.
    #[test]
    fn borcherds(g in prop::array::uniform3((0usize..16, 0u32..2)), m in -3i64..=3, n in -3i64..=3, k in -3i64..=3) {
        for (name, spec) in builtin_specs() {
            let eng = Engine::new(spec.clone());
            let [a, b, c] = g.map(|(i, t)| term_expr(&spec, i, t));
            ok(battery::borcherds(&eng, &a, &b, &c, m, n, k), name)?;
        }
    }
}

/// Zhu algebra relations on all generator pairs and triples.
#[test]
fn zhu_relations_on_generators() {
    for (name, spec) in builtin_specs() {
        if name == "cur_sl3" || name == "kac_todorov_sl2" {
            continue;
        }
        let eng = Engine::new(spec.clone());
        let zhu = ZhuAlgebra::new(Engine::new(spec.clone())).unwrap();
        let n = spec.reg.len();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (Expr::gen(i), Expr::gen(j));
                let p = q(battery::par(&eng, &a, &b));
                let x = star_product(&eng, &a, -1, &b)
                    .sub(&star_product(&eng, &b, -1, &a).scale(&p))
                    .sub(&star_bracket(&eng, &a, &b));
                assert!(zhu.pi_z(&x).is_zero(), "{name}: commutator ({i},{j})");
                for l in 0..n {
                    let c = Expr::gen(l);
                    let lhs = star_product(&eng, &star_product(&eng, &a, -1, &b), -1, &c);
                    let rhs = star_product(&eng, &a, -1, &star_product(&eng, &b, -1, &c));
                    assert!(zhu.pi_z(&lhs.sub(&rhs)).is_zero(), "{name}: associativity ({i},{j},{l})");
                    let (x, y, z) = (zhu.pi_z(&a), zhu.pi_z(&b), zhu.pi_z(&c));
                    assert_eq!(zhu.mul(&zhu.mul(&x, &y), &z), zhu.mul(&x, &zhu.mul(&y, &z)), "{name}");
                }
            }
        }
    }
}
