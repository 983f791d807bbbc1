//! Standard Lie conformal algebras and energy-momentum fields.

use crate::liealg::{Elem, LieAlgData, LieError};
use crate::linsolve;
use crate::scalar::{Rat, Scalar};
use crate::terms::{apply_t, Expr, GeneratorDecl, LambdaExpr, Parity, Registry, TermsError};
use crate::wick::{Engine, LcaSpec, WickError};
use crate::zhu::{classical_zhu, pi0, ZhuAlgebra, ZhuError, ZhuExpr};
use num_traits::One;
use std::collections::BTreeSet;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum ConstructionError {
    #[error("critical level: k + h^vee vanishes identically")]
    CriticalLevel,
    #[error("degenerate pairing")]
    DegeneratePairing,
    #[error("bad polarization: {0}")]
    BadPolarization(String),
    #[error("energy-momentum check failed: {0}")]
    EMField(String),
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Wick(#[from] WickError),
    #[error(transparent)]
    Terms(#[from] TermsError),
    #[error(transparent)]
    Zhu(#[from] ZhuError),
}

/// Energy-momentum field with its central charge.
#[derive(Clone, Debug, PartialEq)]
pub struct EMField {
    pub l: Expr,
    pub central_charge: Scalar,
}

fn q(n: i64) -> Scalar {
    Scalar::from_int(n)
}

fn half() -> Rat {
    Rat::new(1.into(), 2.into())
}

fn params_of<'a>(xs: impl IntoIterator<Item = &'a Scalar>) -> BTreeSet<String> {
    xs.into_iter().flat_map(|s| s.params().into_iter().map(|p| p.to_string())).collect()
}

/// `sum_i c_i gen(offset + i)`.
pub fn elem_expr(a: &Elem, offset: usize) -> Expr {
    let mut e = Expr::zero();
    for (i, c) in a.iter().enumerate() {
        if !c.is_zero() {
            e.add_scaled(&Expr::gen(offset + i), c);
        }
    }
    e
}

/// `[a_lam b] = c0 + lam c1`.
fn lin(c0: Expr, c1: Expr) -> LambdaExpr {
    LambdaExpr::from_lam_coeffs(&[c0, c1])
}

/// Current algebra `Cur_k g`.
pub fn cur(data: &LieAlgData, level: &Scalar) -> Result<LcaSpec, ConstructionError> {
    let n = data.dim();
    let reg = Registry::new((0..n).map(|i| GeneratorDecl::new(&data.names[i], data.parity[i], Rat::one())).collect())?;
    let mut entries = Vec::new();
    for i in 0..n {
        for j in i..n {
            let c0 = elem_expr(&data.bracket[i][j], 0);
            let c1 = Expr::scalar(level * &data.form[i][j]);
            let l = lin(c0, c1);
            if !l.is_zero() {
                entries.push((i, j, l));
            }
        }
    }
    let params = params_of(std::iter::once(level));
    Ok(LcaSpec::new(reg, entries, true)?.with_params(params))
}

/// Check `[L_lam L] = (T + 2 lam) L + lam^3/12 c` and `[L_lam a] = (T + Delta_a lam) a + O(lam^2)`.
pub fn check_em(eng: &Engine, em: &EMField, weights: &[(Expr, Rat)]) -> Result<(), String> {
    let reg = eng.reg();
    let ll = eng.lambda_bracket(&em.l, &em.l);
    let expected = LambdaExpr::from_lam_coeffs(&[
        eng.apply_t(&em.l, 1),
        em.l.scale(&q(2)),
        Expr::zero(),
        Expr::scalar(&em.central_charge * &Scalar::from_frac(1, 12)),
    ]);
    if ll != expected {
        return Err(format!("[L_lam L] = {} expected {}", ll.display(reg), expected.display(reg)));
    }
    for (a, d) in weights {
        let br = eng.lambda_bracket(&em.l, a);
        if br.coeff(0) != eng.apply_t(a, 1) || br.coeff(1) != a.scale(&Scalar::from_rat(d.clone())) {
            return Err(format!("[L_lam {}] = {}", a.display(reg), br.display(reg)));
        }
    }
    Ok(())
}

/// `a` primary of weight `d`: `[L_lam a] = (T + d lam) a` exactly.
pub fn is_primary(eng: &Engine, l: &Expr, a: &Expr, d: &Rat) -> bool {
    let br = eng.lambda_bracket(l, a);
    br == LambdaExpr::from_lam_coeffs(&[eng.apply_t(a, 1), a.scale(&Scalar::from_rat(d.clone()))])
}

/// Sugawara field of `Cur_k g` (the algebra built by [`cur`]).
pub fn sugawara(data: &LieAlgData, level: &Scalar) -> Result<(Arc<LcaSpec>, EMField), ConstructionError> {
    let hv = data.dual_coxeter()?;
    let kk = level + &hv;
    if kk.is_zero() {
        return Err(ConstructionError::CriticalLevel);
    }
    let spec = Arc::new(cur(data, level)?);
    let eng = Engine::new(spec.clone());
    let dual = data.dual_basis()?;
    let mut l = Expr::zero();
    for (i, up) in dual.iter().enumerate() {
        l.add_assign(&eng.nop(&elem_expr(up, 0), &Expr::gen(i)));
    }
    let pref = (&q(2) * &kk).inv().map_err(|_| ConstructionError::CriticalLevel)?;
    let l = l.scale(&pref);
    let c = (&(level * &q(data.sdim())) / &kk).clone();
    let em = EMField { l, central_charge: c };
    let weights: Vec<(Expr, Rat)> = (0..data.dim()).map(|i| (Expr::gen(i), Rat::one())).collect();
    check_em(&eng, &em, &weights).map_err(ConstructionError::EMField)?;
    for (a, d) in &weights {
        if !is_primary(&eng, &em.l, a, d) {
            return Err(ConstructionError::EMField(format!("{} not primary", a.display(eng.reg()))));
        }
    }
    Ok((spec, em))
}

/// One pair `(phi_lower, phi_upper)` with `<phi_lower | phi_upper> = 1` and weight `m` for the upper one.
#[derive(Clone, Debug)]
pub struct ChargedPair {
    pub lower: String,
    pub upper: String,
    pub parity: Parity,
    pub m: Rat,
}

/// Charged free fermions: `[lower_lam upper] = |0>`; lower has charge -1 and weight `1 - m`.
pub fn fermion_charged(pairs: &[ChargedPair]) -> Result<LcaSpec, ConstructionError> {
    let mut gens = Vec::new();
    for p in pairs {
        gens.push(GeneratorDecl::new(&p.lower, p.parity, Rat::one() - &p.m).with_charge(-1));
        gens.push(GeneratorDecl::new(&p.upper, p.parity, p.m.clone()).with_charge(1));
    }
    let reg = Registry::new(gens)?;
    let entries = (0..pairs.len()).map(|i| (2 * i, 2 * i + 1, LambdaExpr::from_expr(Expr::vacuum()))).collect();
    Ok(LcaSpec::new(reg, entries, true)?)
}

/// Energy-momentum field for charged fermions; generators as laid out by [`fermion_charged`].
pub fn charged_em(eng: &Engine, pairs: &[ChargedPair]) -> Result<EMField, ConstructionError> {
    let mut l = Expr::zero();
    let mut c = Scalar::zero();
    let mut weights = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        let lo = Expr::gen(2 * i);
        let up = Expr::gen(2 * i + 1);
        let m = Scalar::from_rat(p.m.clone());
        l.add_scaled(&eng.nop(&up, &apply_t(&lo)), &m.neg());
        l.add_scaled(&eng.nop(&apply_t(&up), &lo), &(&q(1) - &m));
        let m2 = &m * &m;
        let term = &(&(&q(12) * &m2) - &(&q(12) * &m)) + &q(2);
        c = &c + &(&term * &q(p.parity.sign()));
        weights.push((lo, Rat::one() - &p.m));
        weights.push((up, p.m.clone()));
    }
    let em = EMField { l, central_charge: c };
    check_em(eng, &em, &weights).map_err(ConstructionError::EMField)?;
    for (a, d) in &weights {
        if !is_primary(eng, &em.l, a, d) {
            return Err(ConstructionError::EMField(format!("{} not primary", a.display(eng.reg()))));
        }
    }
    Ok(em)
}

/// Neutral free fermions on a superspace with a skew-supersymmetric pairing.
#[derive(Clone, Debug)]
pub struct NeutralFermions {
    pub names: Vec<String>,
    pub parity: Vec<Parity>,
    /// `gram[i][j] = <Phi_i | Phi_j>`.
    pub gram: Vec<Vec<Scalar>>,
}

impl NeutralFermions {
    pub fn sdim(&self) -> i64 {
        self.parity.iter().map(|p| p.sign()).sum()
    }

    /// Dual basis `Phi^j` with `<Phi_i | Phi^j> = delta_ij`.
    pub fn dual_basis(&self) -> Result<Vec<Elem>, ConstructionError> {
        let inv = linsolve::inverse(&self.gram).ok_or(ConstructionError::DegeneratePairing)?;
        let n = self.names.len();
        Ok((0..n).map(|j| (0..n).map(|k| inv[k][j].clone()).collect()).collect())
    }
}

pub fn fermion_neutral(nf: &NeutralFermions) -> Result<LcaSpec, ConstructionError> {
    let n = nf.names.len();
    if n > 0 && linsolve::inverse(&nf.gram).is_none() {
        return Err(ConstructionError::DegeneratePairing);
    }
    for i in 0..n {
        for j in 0..n {
            let s = crate::terms::psign(nf.parity[i], nf.parity[j]);
            if nf.gram[j][i] != &nf.gram[i][j] * &q(-s) || (nf.parity[i] != nf.parity[j] && !nf.gram[i][j].is_zero()) {
                return Err(ConstructionError::BadPolarization(format!(
                    "pairing not skew-supersymmetric on ({}, {})",
                    nf.names[i], nf.names[j]
                )));
            }
        }
    }
    let reg = Registry::new((0..n).map(|i| GeneratorDecl::new(&nf.names[i], nf.parity[i], half())).collect())?;
    let mut entries = Vec::new();
    for i in 0..n {
        for j in i..n {
            if !nf.gram[i][j].is_zero() {
                entries.push((i, j, LambdaExpr::from_expr(Expr::scalar(nf.gram[i][j].clone()))));
            }
        }
    }
    let params = params_of(nf.gram.iter().flatten());
    Ok(LcaSpec::new(reg, entries, true)?.with_params(params))
}

/// `L = 1/2 sum_i :(T Phi^i) Phi_i:` on the algebra built by [`fermion_neutral`].
pub fn neutral_em(eng: &Engine, nf: &NeutralFermions) -> Result<EMField, ConstructionError> {
    let dual = nf.dual_basis()?;
    let mut l = Expr::zero();
    for (i, up) in dual.iter().enumerate() {
        l.add_assign(&eng.nop(&eng.apply_t(&elem_expr(up, 0), 1), &Expr::gen(i)));
    }
    let em = EMField { l: l.scale(&Scalar::from_frac(1, 2)), central_charge: Scalar::from_frac(-nf.sdim(), 2) };
    let weights: Vec<(Expr, Rat)> = (0..nf.names.len()).map(|i| (Expr::gen(i), half())).collect();
    check_em(eng, &em, &weights).map_err(ConstructionError::EMField)?;
    for (a, d) in &weights {
        if !is_primary(eng, &em.l, a, d) {
            return Err(ConstructionError::EMField(format!("{} not primary", a.display(eng.reg()))));
        }
    }
    Ok(em)
}

/// Generator name of the odd copy of a basis element.
pub fn bar_name(name: &str) -> String {
    format!("bar_{name}")
}

/// Fields of the Kac-Todorov construction.
#[derive(Clone, Debug)]
pub struct KacTodorov {
    pub spec: Arc<LcaSpec>,
    pub g: Expr,
    pub l: Expr,
    pub c: Scalar,
    /// `k + h^vee`.
    pub shifted_level: Scalar,
    pub dim: usize,
}

/// Currents `a` (weight 1) and odd copies `bar_a` (weight 1/2) with
/// `[a_lam b] = [a,b] + lam (k+h)(a|b)`, `[a_lam bar_b] = bar_[a,b]`, `[bar_a_lam bar_b] = (k+h)(a|b)`.
pub fn kac_todorov(data: &LieAlgData, level: &Scalar) -> Result<KacTodorov, ConstructionError> {
    let hv = data.dual_coxeter()?;
    let kk = level + &hv;
    if kk.is_zero() {
        return Err(ConstructionError::CriticalLevel);
    }
    let n = data.dim();
    let mut gens: Vec<GeneratorDecl> =
        (0..n).map(|i| GeneratorDecl::new(&data.names[i], data.parity[i], Rat::one())).collect();
    for i in 0..n {
        gens.push(GeneratorDecl::new(&bar_name(&data.names[i]), data.parity[i].flip(), half()));
    }
    let reg = Registry::new(gens)?;
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let br = &data.bracket[i][j];
            if i <= j {
                let l = lin(elem_expr(br, 0), Expr::scalar(&kk * &data.form[i][j]));
                if !l.is_zero() {
                    entries.push((i, j, l));
                }
                if !data.form[i][j].is_zero() {
                    entries.push((n + i, n + j, LambdaExpr::from_expr(Expr::scalar(&kk * &data.form[i][j]))));
                }
            }
            let b = elem_expr(br, n);
            if !b.is_zero() {
                entries.push((i, n + j, LambdaExpr::from_expr(b)));
            }
        }
    }
    let spec = Arc::new(LcaSpec::new(reg, entries, true)?.with_params(params_of([level])));
    let eng = Engine::new(spec.clone());
    let dual = data.dual_basis()?;
    let kinv = kk.inv().map_err(|_| ConstructionError::CriticalLevel)?;
    let cur_of = |a: &Elem| elem_expr(a, 0);
    let bar_of = |a: &Elem| elem_expr(a, n);

    let mut g1 = Expr::zero();
    let mut g3 = Expr::zero();
    let mut l1 = Expr::zero();
    let mut l2 = Expr::zero();
    let mut l3 = Expr::zero();
    for i in 0..n {
        let ai = data.basis(i);
        let up_i = &dual[i];
        g1.add_assign(&eng.nop(&cur_of(&ai), &bar_of(up_i)));
        l1.add_assign(&eng.nop(&cur_of(&ai), &cur_of(up_i)));
        l2.add_assign(&eng.nop(&eng.apply_t(&bar_of(&ai), 1), &bar_of(up_i)));
        for j in 0..n {
            let aj = data.basis(j);
            let up_j = &dual[j];
            let inner = eng.nop(&bar_of(up_i), &bar_of(up_j));
            g3.add_assign(&eng.nop(&bar_of(&data.br(&ai, &aj)), &inner));
            let inner = eng.nop(&cur_of(&data.br(up_i, &aj)), &bar_of(up_j));
            l3.add_assign(&eng.nop(&bar_of(&ai), &inner));
        }
    }
    let g = g1.add(&g3.scale(&(&kinv * &Scalar::from_frac(1, 3)))).scale(&kinv);
    let l = l1.add(&l2).add(&l3.scale(&kinv)).scale(&(&kinv * &Scalar::from_frac(1, 2)));
    let sd = q(data.sdim());
    let c = &(&(level * &sd) * &kinv) + &(&sd * &Scalar::from_frac(1, 2));
    Ok(KacTodorov { spec, g, l, c, shifted_level: kk, dim: n })
}

impl KacTodorov {
    /// Verify the Neveu-Schwarz relations and the brackets with the generators.
    pub fn verify(&self) -> Result<(), ConstructionError> {
        let eng = Engine::new(self.spec.clone());
        let n = self.dim;
        let em = EMField { l: self.l.clone(), central_charge: self.c.clone() };
        let mut weights: Vec<(Expr, Rat)> = (0..n).map(|i| (Expr::gen(i), Rat::one())).collect();
        weights.extend((0..n).map(|i| (Expr::gen(n + i), half())));
        check_em(&eng, &em, &weights).map_err(ConstructionError::EMField)?;
        let err = |s: String| ConstructionError::EMField(s);
        for (a, d) in &weights {
            if !is_primary(&eng, &self.l, a, d) {
                return Err(err(format!("{} not primary", a.display(eng.reg()))));
            }
        }
        if !is_primary(&eng, &self.l, &self.g, &(Rat::one() + half())) {
            return Err(err("G not primary of weight 3/2".into()));
        }
        let gg = eng.lambda_bracket(&self.g, &self.g);
        let expected = LambdaExpr::from_lam_coeffs(&[
            self.l.scale(&q(2)),
            Expr::zero(),
            Expr::scalar(&self.c * &Scalar::from_frac(1, 3)),
        ]);
        if gg != expected {
            return Err(err(format!("[G_lam G] = {}", gg.display(eng.reg()))));
        }
        for i in 0..n {
            let a = Expr::gen(i);
            let abar = Expr::gen(n + i);
            if eng.lambda_bracket(&a, &self.g) != LambdaExpr::from_lam_coeffs(&[Expr::zero(), abar.clone()]) {
                return Err(err(format!("[{}_lam G] != lam {}", self.spec.reg.name(i), self.spec.reg.name(n + i))));
            }
            if eng.lambda_bracket(&abar, &self.g) != LambdaExpr::from_expr(a) {
                return Err(err(format!("[{}_lam G] != {}", self.spec.reg.name(n + i), self.spec.reg.name(i))));
            }
        }
        Ok(())
    }
}

/// Cubic Dirac operator `D = pi_Z(G)` and `C = pi_Z(L)` at `k + h^vee = 1`.
pub struct Dirac {
    pub kt: KacTodorov,
    pub zhu: ZhuAlgebra,
    pub d: ZhuExpr,
    pub c: ZhuExpr,
    /// `D^2 - C`, when it is a scalar.
    pub defect: Option<Scalar>,
}

pub fn dirac(data: &LieAlgData) -> Result<Dirac, ConstructionError> {
    let hv = data.dual_coxeter()?;
    let level = &Scalar::one() - &hv;
    let kt = kac_todorov(data, &level)?;
    let zhu = ZhuAlgebra::new(Engine::new(kt.spec.clone()))?;
    let d = zhu.pi_z(&kt.g);
    let c = zhu.pi_z(&kt.l);
    let defect = zhu.mul(&d, &d).sub(&c).as_scalar();
    Ok(Dirac { kt, zhu, d, c, defect })
}

impl Dirac {
    /// Expected value of `D^2 - C`: `(h^vee/24 - 1/16) dim g`.
    pub fn expected_defect(data: &LieAlgData) -> Result<Scalar, ConstructionError> {
        let hv = data.dual_coxeter()?;
        let per = &(&hv * &Scalar::from_frac(1, 24)) - &Scalar::from_frac(1, 16);
        Ok(&per * &q(data.sdim()))
    }

    /// `[D, a] = 0`, `[D, bar_a] = a`, `[C, x] = 0` for every generator.
    pub fn check_relations(&self) -> Vec<String> {
        let n = self.kt.dim;
        let names = self.zhu.names();
        let mut bad = Vec::new();
        for i in 0..n {
            let a = ZhuExpr::gen(i);
            let abar = ZhuExpr::gen(n + i);
            if !self.zhu.supercommutator(&self.d, &a).is_zero() {
                bad.push(format!("[D, {}] != 0", names[i]));
            }
            if self.zhu.supercommutator(&self.d, &abar) != a {
                bad.push(format!("[D, {}] != {}", names[n + i], names[i]));
            }
        }
        for x in 0..2 * n {
            if !self.zhu.supercommutator(&self.c, &ZhuExpr::gen(x)).is_zero() {
                bad.push(format!("C does not commute with {}", names[x]));
            }
        }
        bad
    }

    /// Classical corner: `{D_cl, D_cl} = 2 C_cl` in `V / V_(-2) V`.
    pub fn classical_square(&self) -> (ZhuExpr, ZhuExpr) {
        let eng = Engine::new(self.kt.spec.clone());
        let reg = &self.kt.spec.reg;
        let cz = classical_zhu(&eng);
        let dcl = pi0(reg, &self.kt.g);
        let ccl = pi0(reg, &self.kt.l);
        (cz.bracket(reg, &dcl, &dcl), ccl.scale(&q(2)))
    }
}

/// Virasoro conformal algebra with central charge `c`.
pub fn virasoro(c: &Scalar) -> Result<LcaSpec, ConstructionError> {
    let reg = Registry::new(vec![GeneratorDecl::new("L", Parity::Even, Rat::from_integer(2.into()))])?;
    let l = Expr::gen(0);
    let br = LambdaExpr::from_lam_coeffs(&[
        apply_t(&l),
        l.scale(&q(2)),
        Expr::zero(),
        Expr::scalar(c * &Scalar::from_frac(1, 12)),
    ]);
    Ok(LcaSpec::new(reg, vec![(0, 0, br)], true)?.with_params(params_of([c])))
}
