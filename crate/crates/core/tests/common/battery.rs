//! Identity checks shared by the property tests and the acceptance runner.
//! Each returns `Err` with a description of the first mismatch.

use super::q;
use lambda_forge::terms::{apply_t, psign};
use lambda_forge::wick::Bound;
use lambda_forge::zhu::{apply_h, deformed_product, hbar, hbar_bracket};
use lambda_forge::{Engine, Expr, LambdaExpr, Scalar};

pub type Check = Result<(), String>;

fn expect<T: PartialEq + std::fmt::Debug>(what: &str, lhs: T, rhs: T) -> Check {
    if lhs == rhs {
        Ok(())
    } else {
        Err(format!("{what}: {lhs:?} != {rhs:?}"))
    }
}

pub fn par(eng: &Engine, a: &Expr, b: &Expr) -> i64 {
    match (a.parity(eng.reg()), b.parity(eng.reg())) {
        (Some(x), Some(y)) => psign(x, y),
        _ => 1,
    }
}

fn nop_left(eng: &Engine, l: &LambdaExpr, c: &Expr) -> LambdaExpr {
    let mut out = LambdaExpr::zero();
    for (k, e) in l.iter() {
        out.add_at(k.clone(), &eng.nop(e, c), &Scalar::one());
    }
    out
}

fn nop_right(eng: &Engine, b: &Expr, l: &LambdaExpr) -> LambdaExpr {
    let mut out = LambdaExpr::zero();
    for (k, e) in l.iter() {
        out.add_at(k.clone(), &eng.nop(b, e), &Scalar::one());
    }
    out
}

/// `:ab: - p :ba: = int_{-T}^0 [a_lam b] dlam`.
pub fn quasicommutativity(eng: &Engine, a: &Expr, b: &Expr) -> Check {
    let p = par(eng, a, b);
    let lhs = eng.nop(a, b).sub(&eng.nop(b, a).scale(&q(p)));
    let rhs = eng.integrate(&eng.lambda_bracket(a, b), 0, &Bound::T(-1), &Bound::Zero);
    expect("quasicommutativity", LambdaExpr::from_expr(lhs), rhs)
}

/// `:a:bc:: - p(a,b) :b:ac:: = ::ab:c: - p(a,b) ::ba:c:`.
pub fn weak_quasi_associativity(eng: &Engine, a: &Expr, b: &Expr, c: &Expr) -> Check {
    let p = q(par(eng, a, b));
    let lhs = eng.nop(a, &eng.nop(b, c)).sub(&eng.nop(b, &eng.nop(a, c)).scale(&p));
    let rhs = eng.nop(&eng.nop(a, b), c).sub(&eng.nop(&eng.nop(b, a), c).scale(&p));
    expect("weak quasi-associativity", lhs, rhs)
}

/// `[a_lam :bc:] = :[a_lam b]c: + p :b[a_lam c]: + int_0^lam [[a_lam b]_mu c] dmu`.
pub fn left_wick(eng: &Engine, a: &Expr, b: &Expr, c: &Expr) -> Check {
    let lhs = eng.lambda_bracket(a, &eng.nop(b, c));
    let ab = eng.lambda_bracket(a, b);
    let mut rhs = nop_left(eng, &ab, c);
    rhs.add_scaled(&nop_right(eng, b, &eng.lambda_bracket(a, c)), &q(par(eng, a, b)));
    let mut nested = LambdaExpr::zero();
    for (k, e) in ab.iter() {
        let lam = k.first().copied().unwrap_or(0);
        for (k2, f) in eng.lambda_bracket(e, c).iter() {
            nested.add_at(vec![lam, k2.first().copied().unwrap_or(0)], f, &Scalar::one());
        }
    }
    rhs.add_assign(&eng.integrate(&nested, 1, &Bound::Zero, &Bound::Var(0)));
    expect("left Wick", lhs, rhs)
}

/// `a_(-2,hbar) b = ((T + hbar H) a)_(-1,hbar) b`.
pub fn hbar_sesquilinearity(eng: &Engine, a: &Expr, b: &Expr) -> Check {
    let lhs = deformed_product(eng, a, -2, b, None);
    let ta = apply_t(a).add(&apply_h(eng.reg(), a).scale(&hbar()));
    expect("hbar sesquilinearity", lhs, deformed_product(eng, &ta, -1, b, None))
}

/// `(a_(-1,h) b)_(-1,h) c - a_(-1,h)(b_(-1,h) c)
///   = sum_j a_(-j-2,h)(b_(j,h) c) + p b_(-j-2,h)(a_(j,h) c)`.
pub fn hbar_quasi_associativity(eng: &Engine, a: &Expr, b: &Expr, c: &Expr) -> Check {
    let dp = |x: &Expr, n: i64, y: &Expr| deformed_product(eng, x, n, y, None);
    let lhs = dp(&dp(a, -1, b), -1, c).sub(&dp(a, -1, &dp(b, -1, c)));
    let jmax = eng.products(b, c).len().max(eng.products(a, c).len()) as i64;
    let p = q(par(eng, a, b));
    let mut rhs = Expr::zero();
    for j in 0..=jmax {
        rhs.add_assign(&dp(a, -j - 2, &dp(b, j, c)));
        rhs.add_scaled(&dp(b, -j - 2, &dp(a, j, c)), &p);
    }
    expect("hbar quasi-associativity", lhs, rhs)
}

/// The hbar-bracket is a derivation of the `(n, hbar)`-product.
pub fn hbar_bracket_derivation(eng: &Engine, a: &Expr, b: &Expr, c: &Expr, n: i64) -> Check {
    let hb = |x: &Expr, y: &Expr| hbar_bracket(eng, x, y, None);
    let dp = |x: &Expr, y: &Expr| deformed_product(eng, x, n, y, None);
    let lhs = hb(a, &dp(b, c));
    let rhs = dp(&hb(a, b), c).add(&dp(b, &hb(a, c)).scale(&q(par(eng, a, b))));
    expect(&format!("hbar-bracket derivation n={n}"), lhs, rhs)
}

pub fn borcherds(eng: &Engine, a: &Expr, b: &Expr, c: &Expr, m: i64, n: i64, k: i64) -> Check {
    let (l, r) = eng.borcherds_sides(a, b, c, m, n, k);
    expect(&format!("Borcherds m={m} n={n} k={k}"), l, r)
}
