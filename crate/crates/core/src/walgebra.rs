//! Quantum Hamiltonian reduction: the complex `C_k(g, x)`, its reduced form `V(R)`,
//! W-generators and their brackets, the finite W-algebra and the Whittaker model.

use crate::constructions::{check_em, elem_expr, EMField};
use crate::liealg::{
    builtin, dual_bases, grading_from_pair, principal_pair, DualBases, Elem, GoodGrading, LieAlgData, LieError,
};
use crate::linsolve;
use crate::scalar::{Rat, Scalar};
use crate::terms::{psign, Expr, GeneratorDecl, LambdaExpr, Monomial, Parity, Registry, Term, TermsError};
use crate::wick::{Engine, LcaSpec, WickError};
use crate::zhu::{PbwAlgebra, TableSource, ZhuAlgebra, ZhuError, ZhuExpr};
use num_traits::{One, Zero};
use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum WError {
    #[error("critical level: k + h^vee vanishes identically")]
    CriticalLevel,
    #[error("no cocycle with leading term {0}")]
    NoSolution(String),
    #[error("cannot express {0} through the solved generators")]
    InsufficientGenerators(String),
    #[error("consistency check failed: {0}")]
    Inconsistent(String),
    #[error("subspace is not isotropic in g_1/2: {0}")]
    NotIsotropic(String),
    #[error("unknown algebra {0}")]
    UnknownAlgebra(String),
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Wick(#[from] WickError),
    #[error(transparent)]
    Terms(#[from] TermsError),
    #[error(transparent)]
    Zhu(#[from] ZhuError),
}

fn q(n: i64) -> Scalar {
    Scalar::from_int(n)
}

fn rs(r: &Rat) -> Scalar {
    Scalar::from_rat(r.clone())
}

fn half_rat() -> Rat {
    Rat::new(1.into(), 2.into())
}

fn sign(p: Parity) -> Scalar {
    q(p.sign())
}

/// Built-in algebra with its principal good pair.
pub fn principal_setup(name: &str) -> Result<(LieAlgData, GoodGrading), WError> {
    let data = builtin(name).ok_or_else(|| WError::UnknownAlgebra(name.into()))?;
    let (x, f) = principal_pair(&data).ok_or_else(|| WError::UnknownAlgebra(name.into()))?;
    let gr = grading_from_pair(&data, &x, &f)?;
    Ok((data, gr))
}

/// `C_k(g, x)` with the differential and the energy-momentum field.
pub struct WComplex {
    pub data: LieAlgData,
    pub grading: GoodGrading,
    pub duals: DualBases,
    pub level: Scalar,
    /// Basis indices of `g_+` and `g_{1/2}`.
    pub plus: Vec<usize>,
    pub half: Vec<usize>,
    pub spec: Arc<LcaSpec>,
    pub d: Expr,
    pub em: EMField,
    eng: Engine,
}

/// Generator layout: `g` basis, then `phi_a`, `phiu_a` (a in `S_+`), then `Phi_a` (a in `S_1/2`).
pub fn build_complex(data: &LieAlgData, gr: &GoodGrading, level: &Scalar) -> Result<WComplex, WError> {
    let duals = dual_bases(data, gr)?;
    let kk = level + &data.dual_coxeter()?;
    if kk.is_zero() {
        return Err(WError::CriticalLevel);
    }
    let n = data.dim();
    let plus = gr.plus();
    let half = gr.half();
    let np = plus.len();
    let one = Rat::one();
    let mut gens = Vec::new();
    for i in 0..n {
        gens.push(GeneratorDecl::new(&data.names[i], data.parity[i], &one - &gr.j[i]).with_charge(0));
    }
    for &a in &plus {
        let name = format!("phi_{}", data.names[a]);
        gens.push(GeneratorDecl::new(&name, data.parity[a].flip(), &one - &gr.j[a]).with_charge(-1));
    }
    for &a in &plus {
        let name = format!("phiu_{}", data.names[a]);
        gens.push(GeneratorDecl::new(&name, data.parity[a].flip(), gr.j[a].clone()).with_charge(1));
    }
    for &a in &half {
        gens.push(GeneratorDecl::new(&format!("Phi_{}", data.names[a]), data.parity[a], half_rat()).with_charge(0));
    }
    // Linear brackets: a constant pregrading is admissible.
    let reg = Registry::new(gens.into_iter().map(|g| g.with_zeta(Rat::one())).collect())?;
    let mut entries = Vec::new();
    for i in 0..n {
        for j in i..n {
            let l = LambdaExpr::from_lam_coeffs(&[
                elem_expr(&data.bracket[i][j], 0),
                Expr::scalar(level * &data.form[i][j]),
            ]);
            if !l.is_zero() {
                entries.push((i, j, l));
            }
        }
    }
    for pos in 0..np {
        entries.push((n + pos, n + np + pos, LambdaExpr::from_expr(Expr::vacuum())));
    }
    for (p1, &a) in half.iter().enumerate() {
        for (p2, &b) in half.iter().enumerate().skip(p1) {
            let c = data.pair(&gr.f, &data.br(&data.basis(a), &data.basis(b)));
            if !c.is_zero() {
                entries.push((n + 2 * np + p1, n + 2 * np + p2, LambdaExpr::from_expr(Expr::scalar(c))));
            }
        }
    }
    let params: Vec<String> = level.params().into_iter().map(|p| p.to_string()).collect();
    let spec = Arc::new(LcaSpec::new(reg, entries, true)?.with_params(params));
    let eng = Engine::new(spec.clone());
    let mut cx = WComplex {
        data: data.clone(),
        grading: gr.clone(),
        duals,
        level: level.clone(),
        plus,
        half,
        spec,
        d: Expr::zero(),
        em: EMField { l: Expr::zero(), central_charge: Scalar::zero() },
        eng,
    };
    cx.d = cx.assemble_d();
    cx.em = cx.assemble_em(&kk);
    let weights: Vec<(Expr, Rat)> =
        (0..cx.spec.reg.len()).map(|g| (Expr::gen(g), cx.spec.reg.get(g).delta.clone())).collect();
    check_em(&cx.eng, &cx.em, &weights).map_err(WError::Inconsistent)?;
    Ok(cx)
}

impl WComplex {
    pub fn engine(&self) -> &Engine {
        &self.eng
    }

    pub fn phi_lower_id(&self, pos: usize) -> usize {
        self.data.dim() + pos
    }

    pub fn phi_upper_id(&self, pos: usize) -> usize {
        self.data.dim() + self.plus.len() + pos
    }

    pub fn big_phi_id(&self, pos: usize) -> usize {
        self.data.dim() + 2 * self.plus.len() + pos
    }

    fn plus_pos(&self, a: usize) -> Option<usize> {
        self.plus.iter().position(|&b| b == a)
    }

    pub fn cur(&self, a: &Elem) -> Expr {
        elem_expr(a, 0)
    }

    /// `phi_a = sum (a|u^alpha) phi_alpha`.
    pub fn phi_lower(&self, a: &Elem) -> Expr {
        let mut e = Expr::zero();
        for (pos, &al) in self.plus.iter().enumerate() {
            if !a[al].is_zero() {
                e.add_scaled(&Expr::gen(self.phi_lower_id(pos)), &a[al]);
            }
        }
        e
    }

    /// `phi^a = sum (u_alpha|a) phi^alpha`.
    pub fn phi_upper(&self, a: &Elem) -> Expr {
        let mut e = Expr::zero();
        for (pos, &al) in self.plus.iter().enumerate() {
            let c = self.data.pair(&self.data.basis(al), a);
            if !c.is_zero() {
                e.add_scaled(&Expr::gen(self.phi_upper_id(pos)), &c);
            }
        }
        e
    }

    /// `Phi_a = Phi_{pi_1/2 a}`.
    pub fn big_phi(&self, a: &Elem) -> Expr {
        let mut e = Expr::zero();
        for (pos, &al) in self.half.iter().enumerate() {
            if !a[al].is_zero() {
                e.add_scaled(&Expr::gen(self.big_phi_id(pos)), &a[al]);
            }
        }
        e
    }

    fn s(&self, a: &Elem) -> Scalar {
        sign(self.data.elem_parity(a))
    }

    fn u(&self, i: usize) -> Elem {
        self.data.basis(i)
    }

    /// Building block `J_a = a + sum :phi^alpha phi_[u_alpha, a]:`.
    pub fn j_field(&self, a: &Elem) -> Expr {
        let mut e = self.cur(a);
        for (pos, &al) in self.plus.iter().enumerate() {
            let lo = self.phi_lower(&self.data.br(&self.u(al), a));
            if !lo.is_zero() {
                e.add_assign(&self.eng.nop(&Expr::gen(self.phi_upper_id(pos)), &lo));
            }
        }
        e
    }

    /// `psi_k(a|b) = k(a|b) + str_{g_+}((pi_+ ad a)(pi_+ ad b))`.
    pub fn psi(&self, a: &Elem, b: &Elem) -> Scalar {
        psi_pair(&self.data, &self.grading, &self.level, a, b)
    }

    fn assemble_d(&self) -> Expr {
        let eng = &self.eng;
        let mut d = Expr::zero();
        for (pos, &al) in self.plus.iter().enumerate() {
            let up = Expr::gen(self.phi_upper_id(pos));
            d.add_scaled(&eng.nop(&up, &Expr::gen(al)), &sign(self.data.parity[al]));
        }
        for (hp, &al) in self.half.iter().enumerate() {
            let pos = self.plus_pos(al).expect("g_1/2 inside g_+");
            d.add_assign(&eng.nop(&Expr::gen(self.phi_upper_id(pos)), &Expr::gen(self.big_phi_id(hp))));
        }
        d.add_assign(&self.phi_upper(&self.grading.f));
        let h = Scalar::from_frac(1, 2);
        for (pa, &al) in self.plus.iter().enumerate() {
            for (pb, &be) in self.plus.iter().enumerate() {
                let lo = self.phi_lower(&self.data.br(&self.u(be), &self.u(al)));
                if lo.is_zero() {
                    continue;
                }
                let inner = eng.nop(&Expr::gen(self.phi_upper_id(pb)), &lo);
                let t = eng.nop(&Expr::gen(self.phi_upper_id(pa)), &inner);
                d.add_scaled(&t, &(&h * &sign(self.data.parity[al])));
            }
        }
        d
    }

    fn assemble_em(&self, kk: &Scalar) -> EMField {
        let eng = &self.eng;
        let data = &self.data;
        let gr = &self.grading;
        let mut lg = Expr::zero();
        for (i, up) in self.duals.up.iter().enumerate() {
            lg.add_assign(&eng.nop(&self.cur(up), &Expr::gen(i)));
        }
        let mut l = lg.scale(&(&q(2) * kk).inv().expect("noncritical"));
        l.add_assign(&eng.apply_t(&self.cur(&gr.x), 1));
        let h = Scalar::from_frac(1, 2);
        for (hp, &al) in self.half.iter().enumerate() {
            let dual = self.big_phi(self.duals.v_of(al));
            l.add_scaled(&eng.nop(&eng.apply_t(&dual, 1), &Expr::gen(self.big_phi_id(hp))), &h);
        }
        for (pos, &al) in self.plus.iter().enumerate() {
            let m = rs(&gr.j[al]);
            let lo = Expr::gen(self.phi_lower_id(pos));
            let up = Expr::gen(self.phi_upper_id(pos));
            l.add_scaled(&eng.nop(&up, &eng.apply_t(&lo, 1)), &m.neg());
            l.add_scaled(&eng.nop(&eng.apply_t(&up, 1), &lo), &(&q(1) - &m));
        }
        EMField { l, central_charge: central_charge(data, gr, &self.level).expect("noncritical") }
    }

    /// Closed form of `[d_lam g]` for a generator of the complex.
    pub fn dgen_expected(&self, g: usize) -> LambdaExpr {
        let n = self.data.dim();
        let np = self.plus.len();
        let eng = &self.eng;
        if g < n {
            let a = self.u(g);
            let mut c0 = Expr::zero();
            for (pos, &al) in self.plus.iter().enumerate() {
                let inner = self.cur(&self.data.br(&self.u(al), &a));
                if !inner.is_zero() {
                    c0.add_scaled(&eng.nop(&Expr::gen(self.phi_upper_id(pos)), &inner), &sign(self.data.parity[al]));
                }
            }
            let ks = &self.level * &self.s(&a);
            let pu = self.phi_upper(&a);
            c0.add_scaled(&eng.apply_t(&pu, 1), &ks);
            LambdaExpr::from_lam_coeffs(&[c0, pu.scale(&ks)])
        } else if g < n + np {
            let a = self.u(self.plus[g - n]);
            let pa = self.grading.pi_plus(&a);
            let mut c0 = self.cur(&pa);
            c0.add_assign(&Expr::scalar(self.data.pair(&a, &self.grading.f)));
            c0.add_scaled(&self.big_phi(&a), &self.s(&a));
            for (pos, &al) in self.plus.iter().enumerate() {
                let lo = self.phi_lower(&self.data.br(&self.u(al), &pa));
                if !lo.is_zero() {
                    c0.add_assign(&eng.nop(&Expr::gen(self.phi_upper_id(pos)), &lo));
                }
            }
            LambdaExpr::from_expr(c0)
        } else if g < n + 2 * np {
            let a = self.duals.up[self.plus[g - n - np]].clone();
            let mut c0 = Expr::zero();
            for (pos, &al) in self.plus.iter().enumerate() {
                let pu = self.phi_upper(&self.data.br(&self.u(al), &a));
                if !pu.is_zero() {
                    let t = eng.nop(&Expr::gen(self.phi_upper_id(pos)), &pu);
                    c0.add_scaled(&t, &(&Scalar::from_frac(1, 2) * &sign(self.data.parity[al])));
                }
            }
            LambdaExpr::from_expr(c0)
        } else {
            let a = self.u(self.half[g - n - 2 * np]);
            LambdaExpr::from_expr(self.phi_upper(&self.data.br(&self.grading.pi_half(&a), &self.grading.f)))
        }
    }

    /// Closed form of `[J_a lam J_b]`, with the mixed correction term taken
    /// with the literal sign `+sum :phi^a (phi_[pi<=[u_a,a],b] - p phi_[pi<=[u_a,b],a]):`.
    /// The engine gives the opposite sign for this term; see [`Self::jj_computed_form`].
    pub fn jj_expected(&self, a: &Elem, b: &Elem) -> LambdaExpr {
        let mut c0 = self.j_field(&self.data.br(a, b));
        c0.add_assign(&self.jj_correction(a, b));
        LambdaExpr::from_lam_coeffs(&[c0, Expr::scalar(self.psi(a, b))])
    }

    /// `[J_a lam J_b]` with the mixed correction term subtracted, which is what
    /// the Wick engine produces for every pair of basis elements of sl2 and sl3.
    pub fn jj_computed_form(&self, a: &Elem, b: &Elem) -> LambdaExpr {
        let mut c0 = self.j_field(&self.data.br(a, b));
        c0.add_assign(&self.jj_correction(a, b).scale(&q(-1)));
        LambdaExpr::from_lam_coeffs(&[c0, Expr::scalar(self.psi(a, b))])
    }

    /// `sum_a :phi^a (phi_[pi<=[u_a,a],b] - p(a,b) phi_[pi<=[u_a,b],a]):`.
    /// Vanishes when `a, b` both lie in `g_<=` or both in `g_>=`.
    pub fn jj_correction(&self, a: &Elem, b: &Elem) -> Expr {
        let gr = &self.grading;
        let p = q(psign(self.data.elem_parity(a), self.data.elem_parity(b)));
        let mut out = Expr::zero();
        for (pos, &al) in self.plus.iter().enumerate() {
            let x = self.data.br(&gr.pi_le(&self.data.br(&self.u(al), a)), b);
            let y = self.data.br(&gr.pi_le(&self.data.br(&self.u(al), b)), a);
            let inner = self.phi_lower(&x).sub(&self.phi_lower(&y).scale(&p));
            if !inner.is_zero() {
                out.add_assign(&self.eng.nop(&Expr::gen(self.phi_upper_id(pos)), &inner));
            }
        }
        out
    }

    /// Closed form of `[d lam J_a]`.
    pub fn dj_expected(&self, a: &Elem) -> LambdaExpr {
        let eng = &self.eng;
        let gr = &self.grading;
        let sa = self.s(a);
        let mut c0 = Expr::zero();
        let mut lin = Expr::zero();
        for (pos, &al) in self.plus.iter().enumerate() {
            let up = Expr::gen(self.phi_upper_id(pos));
            let ua = self.data.br(&self.u(al), a);
            let jj = self.j_field(&gr.pi_le(&ua));
            if !jj.is_zero() {
                c0.add_scaled(&eng.nop(&up, &jj), &sign(self.data.parity[al]));
            }
            let bp = self.big_phi(&ua);
            if !bp.is_zero() {
                c0.add_scaled(&eng.nop(&up, &bp), &sa.neg());
            }
            lin.add_scaled(&up, &self.psi(a, &self.u(al)));
        }
        c0.add_assign(&eng.apply_t(&lin, 1));
        c0.add_scaled(&self.phi_upper(&self.data.br(&gr.f, a)), &sa);
        LambdaExpr::from_lam_coeffs(&[c0, lin])
    }

    /// Structural checks; returns the list of failures.
    pub fn verify(&self) -> Vec<String> {
        let eng = &self.eng;
        let reg = eng.reg();
        let mut bad = Vec::new();
        if self.d.parity(reg) != Some(Parity::Odd) {
            bad.push("d is not odd".into());
        }
        if self.d.monomials().any(|m| reg.mono_charge(m) != 1) {
            bad.push("d does not have charge 1".into());
        }
        if self.d.homogeneous_delta(reg) != Some(Rat::one()) {
            bad.push("d does not have weight 1".into());
        }
        let dd = eng.lambda_bracket(&self.d, &self.d);
        if !dd.is_zero() {
            bad.push(format!("[d_lam d] = {}", dd.display(reg)));
        }
        let dl = eng.nth_product(&self.d, 0, &self.em.l);
        if !dl.is_zero() {
            bad.push(format!("d_(0) L = {}", dl.display(reg)));
        }
        for g in 0..reg.len() {
            let got = eng.lambda_bracket(&self.d, &Expr::gen(g));
            if got != self.dgen_expected(g) {
                bad.push(format!("[d_lam {}] = {}", reg.name(g), got.display(reg)));
            }
            let dd = eng.nth_product(&self.d, 0, &eng.nth_product(&self.d, 0, &Expr::gen(g)));
            if !dd.is_zero() {
                bad.push(format!("d_(0)^2 {} = {}", reg.name(g), dd.display(reg)));
            }
        }
        for i in 0..self.data.dim() {
            let a = self.u(i);
            let got = eng.lambda_bracket(&self.d, &self.j_field(&a));
            if got != self.dj_expected(&a) {
                bad.push(format!("[d_lam J_{}] = {}", self.data.names[i], got.display(reg)));
            }
        }
        bad
    }
}

/// `psi_k(a|b)` with the supertrace over a basis of `g_+`.
pub fn psi_pair(data: &LieAlgData, gr: &GoodGrading, level: &Scalar, a: &Elem, b: &Elem) -> Scalar {
    let mut tr = Scalar::zero();
    for al in gr.plus() {
        let v = gr.pi_plus(&data.br(a, &gr.pi_plus(&data.br(b, &data.basis(al)))));
        if !v[al].is_zero() {
            tr = &tr + &(&v[al] * &sign(data.parity[al]));
        }
    }
    &(level * &data.pair(a, b)) + &tr
}

/// `c_k(g, x)`.
pub fn central_charge(data: &LieAlgData, gr: &GoodGrading, level: &Scalar) -> Result<Scalar, WError> {
    let kk = level + &data.dual_coxeter()?;
    let mut c = (&(level * &q(data.sdim())) / &kk).clone();
    c = &c - &(&(&q(12) * level) * &data.pair(&gr.x, &gr.x));
    for al in gr.plus() {
        let j = rs(&gr.j[al]);
        let t = &(&(&q(12) * &(&j * &j)) - &(&q(12) * &j)) + &q(2);
        c = &c - &(&t * &sign(data.parity[al]));
    }
    let sd_half: i64 = gr.half().iter().map(|&a| data.parity[a].sign()).sum();
    Ok(&c - &Scalar::from_frac(sd_half, 2))
}

/// Ordered monomials of total weight `target` in the given generators (all of positive weight).
pub fn ordered_monomials(reg: &Registry, gens: &[usize], target: &Rat) -> Vec<Monomial> {
    let mut pool: Vec<(Term, Rat)> = Vec::new();
    for &g in gens {
        let d = &reg.get(g).delta;
        if *d <= Rat::zero() {
            continue;
        }
        let mut k = 0u32;
        loop {
            let w = d + Rat::from_integer(k.into());
            if w > *target {
                break;
            }
            pool.push((Term::new(g, k), w));
            k += 1;
        }
    }
    pool.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(reg: &Registry, pool: &[(Term, Rat)], start: usize, rem: &Rat, cur: &mut Vec<Term>, out: &mut Vec<Monomial>) {
        if rem.is_zero() {
            out.push(Monomial(cur.iter().copied().collect()));
            return;
        }
        for idx in start..pool.len() {
            let (t, w) = &pool[idx];
            if w > rem {
                continue;
            }
            let next = if reg.parity(t.gen as usize).is_odd() { idx + 1 } else { idx };
            cur.push(*t);
            go(reg, pool, next, &(rem - w), cur, out);
            cur.pop();
        }
    }
    go(reg, &pool, 0, target, &mut cur, &mut out);
    out
}

/// The reduced spec `R = C[T](J_{g<=} + phi^{g_-} + Phi_{g_1/2})` with the action of `d`.
pub struct ReducedSpec {
    pub data: LieAlgData,
    pub grading: GoodGrading,
    pub level: Scalar,
    pub le: Vec<usize>,
    pub plus: Vec<usize>,
    pub half: Vec<usize>,
    pub spec: Arc<LcaSpec>,
    /// `d` of each generator of `R`.
    pub d_gen: Vec<Expr>,
    eng: Engine,
    d_cache: RefCell<HashMap<Monomial, Expr>>,
}

pub fn reduced_spec(cx: &WComplex) -> Result<ReducedSpec, WError> {
    let data = &cx.data;
    let gr = &cx.grading;
    let le = gr.le0();
    let plus = cx.plus.clone();
    let half = cx.half.clone();
    let one = Rat::one();
    let h = half_rat();
    let mut gens = Vec::new();
    for &a in &le {
        let j = &gr.j[a];
        gens.push(
            GeneratorDecl::new(&format!("J_{}", data.names[a]), data.parity[a], &one - j)
                .with_charge(0)
                .with_bigrade(j - &h, &h - j),
        );
    }
    for &a in &plus {
        let j = &gr.j[a];
        gens.push(
            GeneratorDecl::new(&format!("phiu_{}", data.names[a]), data.parity[a].flip(), j.clone())
                .with_charge(1)
                .with_bigrade(&h - j, j + &h),
        );
    }
    for &a in &half {
        gens.push(
            GeneratorDecl::new(&format!("Phi_{}", data.names[a]), data.parity[a], h.clone())
                .with_charge(0)
                .with_bigrade(Rat::zero(), Rat::zero()),
        );
    }
    let reg = Registry::new(gens.into_iter().map(|g| g.with_zeta(Rat::one())).collect())?;
    let mut red = ReducedSpec {
        data: data.clone(),
        grading: gr.clone(),
        level: cx.level.clone(),
        le,
        plus,
        half,
        spec: Arc::new(LcaSpec::new(reg.clone(), vec![], true)?),
        d_gen: Vec::new(),
        eng: Engine::new(Arc::new(LcaSpec::new(reg.clone(), vec![], true)?)),
        d_cache: RefCell::default(),
    };
    let nle = red.le.len();
    let mut entries = Vec::new();
    for (p1, &a) in red.le.iter().enumerate() {
        for (p2, &b) in red.le.iter().enumerate().skip(p1) {
            let ua = data.basis(a);
            let ub = data.basis(b);
            let l = LambdaExpr::from_lam_coeffs(&[red.j_elem(&data.br(&ua, &ub)), Expr::scalar(cx.psi(&ua, &ub))]);
            if !l.is_zero() {
                entries.push((p1, p2, l));
            }
        }
        for (p2, &b) in red.plus.iter().enumerate() {
            let e = red.phi_upper(&data.br(&data.basis(a), &cx.duals.up[b]));
            if !e.is_zero() {
                entries.push((p1, nle + p2, LambdaExpr::from_expr(e)));
            }
        }
    }
    let np = red.plus.len();
    for (p1, &a) in red.half.iter().enumerate() {
        for (p2, &b) in red.half.iter().enumerate().skip(p1) {
            let c = data.pair(&gr.f, &data.br(&data.basis(a), &data.basis(b)));
            if !c.is_zero() {
                entries.push((nle + np + p1, nle + np + p2, LambdaExpr::from_expr(Expr::scalar(c))));
            }
        }
    }
    let params: Vec<String> = cx.level.params().into_iter().map(|p| p.to_string()).collect();
    red.spec = Arc::new(LcaSpec::new(reg, entries, true)?.with_params(params));
    red.eng = Engine::new(red.spec.clone());
    red.d_gen = (0..red.spec.reg.len()).map(|g| red.d_generator(cx, g)).collect();
    Ok(red)
}

impl ReducedSpec {
    pub fn engine(&self) -> &Engine {
        &self.eng
    }

    /// `J_a` for `a` in `g_<=` (other components are dropped).
    pub fn j_elem(&self, a: &Elem) -> Expr {
        let mut e = Expr::zero();
        for (pos, &al) in self.le.iter().enumerate() {
            if !a[al].is_zero() {
                e.add_scaled(&Expr::gen(pos), &a[al]);
            }
        }
        e
    }

    pub fn phi_upper(&self, a: &Elem) -> Expr {
        let nle = self.le.len();
        let mut e = Expr::zero();
        for (pos, &al) in self.plus.iter().enumerate() {
            let c = self.data.pair(&self.data.basis(al), a);
            if !c.is_zero() {
                e.add_scaled(&Expr::gen(nle + pos), &c);
            }
        }
        e
    }

    pub fn big_phi(&self, a: &Elem) -> Expr {
        let off = self.le.len() + self.plus.len();
        let mut e = Expr::zero();
        for (pos, &al) in self.half.iter().enumerate() {
            if !a[al].is_zero() {
                e.add_scaled(&Expr::gen(off + pos), &a[al]);
            }
        }
        e
    }

    fn d_generator(&self, cx: &WComplex, g: usize) -> Expr {
        let data = &self.data;
        let gr = &self.grading;
        let eng = &self.eng;
        let nle = self.le.len();
        let np = self.plus.len();
        if g < nle {
            let a = data.basis(self.le[g]);
            let sa = sign(data.elem_parity(&a));
            let mut out = Expr::zero();
            let mut lin = Expr::zero();
            for (pos, &al) in self.plus.iter().enumerate() {
                let up = Expr::gen(nle + pos);
                let ua = data.br(&data.basis(al), &a);
                let jj = self.j_elem(&gr.pi_le(&ua));
                if !jj.is_zero() {
                    out.add_scaled(&eng.nop(&up, &jj), &sign(data.parity[al]));
                }
                let bp = self.big_phi(&ua);
                if !bp.is_zero() {
                    out.add_scaled(&eng.nop(&up, &bp), &sa.neg());
                }
                lin.add_scaled(&up, &cx.psi(&a, &data.basis(al)));
            }
            out.add_assign(&eng.apply_t(&lin, 1));
            out.add_scaled(&self.phi_upper(&data.br(&a, &gr.f)), &sa.neg());
            out
        } else if g < nle + np {
            let a = &cx.duals.up[self.plus[g - nle]];
            let mut out = Expr::zero();
            for (pos, &al) in self.plus.iter().enumerate() {
                let pu = self.phi_upper(&data.br(&data.basis(al), a));
                if !pu.is_zero() {
                    let t = eng.nop(&Expr::gen(nle + pos), &pu);
                    out.add_scaled(&t, &(&Scalar::from_frac(1, 2) * &sign(data.parity[al])));
                }
            }
            out
        } else {
            let a = data.basis(self.half[g - nle - np]);
            self.phi_upper(&data.br(&a, &gr.f))
        }
    }

    /// `d` on an ordered monomial: odd derivation of normally ordered products commuting with `T`.
    pub fn d_mono(&self, m: &Monomial) -> Expr {
        if m.is_vacuum() {
            return Expr::zero();
        }
        if let Some(e) = self.d_cache.borrow().get(m) {
            return e.clone();
        }
        let t = m.head();
        let rest = m.tail();
        let head = Expr::term(t);
        let rest_e = Expr::mono(rest.clone());
        let dt = self.eng.apply_t(&self.d_gen[t.gen as usize], t.tpow);
        let mut out = self.eng.nop(&dt, &rest_e);
        let dr = self.d_mono(&rest);
        if !dr.is_zero() {
            out.add_scaled(&self.eng.nop(&head, &dr), &sign(self.spec.reg.parity(t.gen as usize)));
        }
        self.d_cache.borrow_mut().insert(m.clone(), out.clone());
        out
    }

    pub fn d_expr(&self, x: &Expr) -> Expr {
        let mut out = Expr::zero();
        for (m, c) in x.iter() {
            out.add_scaled(&self.d_mono(m), c);
        }
        out
    }

    /// Filtration degree `p` of a monomial.
    pub fn p_degree(&self, m: &Monomial) -> Rat {
        self.spec.reg.mono_bigrade(m).map(|(p, _)| p).unwrap_or_else(Rat::zero)
    }

    /// Embedding `V(R) -> C_k(g, x)`.
    pub fn embed(&self, cx: &WComplex, x: &Expr) -> Expr {
        let nle = self.le.len();
        let np = self.plus.len();
        let ce = cx.engine();
        let image = |g: usize| -> Expr {
            if g < nle {
                cx.j_field(&self.data.basis(self.le[g]))
            } else if g < nle + np {
                Expr::gen(cx.phi_upper_id(g - nle))
            } else {
                Expr::gen(cx.big_phi_id(g - nle - np))
            }
        };
        let mut out = Expr::zero();
        for (m, c) in x.iter() {
            let mut acc = Expr::vacuum();
            for t in m.terms().iter().rev() {
                acc = ce.nop(&ce.apply_t(&image(t.gen as usize), t.tpow), &acc);
            }
            out.add_scaled(&acc, c);
        }
        out
    }

    /// Compare the brackets and the action of `d` with the complex; returns failures.
    pub fn check_against(&self, cx: &WComplex) -> Vec<String> {
        let reg = &self.spec.reg;
        let ce = cx.engine();
        let mut bad = Vec::new();
        let n = reg.len();
        let imgs: Vec<Expr> = (0..n).map(|g| self.embed(cx, &Expr::gen(g))).collect();
        for g in 0..n {
            let lhs = ce.nth_product(&cx.d, 0, &imgs[g]);
            if lhs != self.embed(cx, &self.d_gen[g]) {
                bad.push(format!("d({}) disagrees with the complex", reg.name(g)));
            }
            for h in g..n {
                let got = ce.lambda_bracket(&imgs[g], &imgs[h]);
                let mine = self.eng.lambda_bracket(&Expr::gen(g), &Expr::gen(h));
                let mapped = mine.map_exprs(|e| self.embed(cx, e));
                if got != mapped {
                    bad.push(format!("[{} lam {}] disagrees with the complex", reg.name(g), reg.name(h)));
                }
            }
        }
        bad
    }
}

/// Solved W-generators `E_i` in `V(R)`.
#[derive(Clone, Debug)]
pub struct WGenerators {
    pub names: Vec<String>,
    /// Basis vector `u_i` of `g^f` and its degree `j_i`.
    pub elems: Vec<Elem>,
    pub degree: Vec<Rat>,
    pub exprs: Vec<Expr>,
    /// Registry of the W-algebra on the `E_i`.
    pub reg: Registry,
    eval_cache: RefCell<HashMap<Monomial, Expr>>,
}

impl WGenerators {
    pub fn len(&self) -> usize {
        self.exprs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exprs.is_empty()
    }

    pub fn delta(&self, i: usize) -> Rat {
        Rat::one() - &self.degree[i]
    }

    /// Value in `V(R)` of an expression in the `E_i`.
    pub fn eval(&self, red: &ReducedSpec, x: &Expr) -> Expr {
        let mut out = Expr::zero();
        for (m, c) in x.iter() {
            out.add_scaled(&self.eval_mono(red, m), c);
        }
        out
    }

    fn eval_mono(&self, red: &ReducedSpec, m: &Monomial) -> Expr {
        if m.is_vacuum() {
            return Expr::vacuum();
        }
        if let Some(e) = self.eval_cache.borrow().get(m) {
            return e.clone();
        }
        let t = m.head();
        let eng = red.engine();
        let head = eng.apply_t(&self.exprs[t.gen as usize], t.tpow);
        let out = eng.nop(&head, &self.eval_mono(red, &m.tail()));
        self.eval_cache.borrow_mut().insert(m.clone(), out.clone());
        out
    }
}

/// Solve `d E_i = 0` with `E_i = J_{u_i} + (terms of higher filtration)` for `g^f` basis vectors of weight `<= max_delta`.
///
/// Free coefficients of the linear system are set to zero.
pub fn solve_generators(red: &ReducedSpec, max_delta: &Rat) -> Result<WGenerators, WError> {
    let gr = &red.grading;
    let reg = &red.spec.reg;
    let nle = red.le.len();
    let np = red.plus.len();
    let zero_charge: Vec<usize> = (0..nle).chain(nle + np..reg.len()).collect();
    let mut names = Vec::new();
    let mut elems = Vec::new();
    let mut degree = Vec::new();
    let mut exprs = Vec::new();
    let mut decls = Vec::new();
    for (i, u) in gr.gf.iter().enumerate() {
        let j = &gr.gf_degree[i];
        let delta = Rat::one() - j;
        if delta > *max_delta {
            continue;
        }
        let lead = red.j_elem(u);
        let pmin = j - half_rat();
        let monos: Vec<Monomial> =
            ordered_monomials(reg, &zero_charge, &delta).into_iter().filter(|m| red.p_degree(m) > pmin).collect();
        let cols: Vec<BTreeMap<Monomial, Scalar>> =
            monos.iter().map(|m| red.d_mono(m).iter().map(|(k, v)| (k.clone(), v.clone())).collect()).collect();
        let rhs: BTreeMap<Monomial, Scalar> =
            red.d_expr(&lead).neg().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let name = format!("E{}", names.len() + 1);
        let sol =
            linsolve::solve_sparse(&cols, &rhs).ok_or_else(|| WError::NoSolution(lead.display(reg).to_string()))?;
        let mut e = lead.clone();
        for (m, c) in monos.iter().zip(sol.iter()) {
            if !c.is_zero() {
                e.add_term(m.clone(), c.clone());
            }
        }
        if !red.d_expr(&e).is_zero() {
            return Err(WError::Inconsistent(format!("d({name}) != 0")));
        }
        decls.push(GeneratorDecl::new(&name, red.data.elem_parity(u), delta).with_charge(0));
        names.push(name);
        elems.push(u.clone());
        degree.push(j.clone());
        exprs.push(e);
    }
    Ok(WGenerators { names, elems, degree, exprs, reg: Registry::new(decls)?, eval_cache: RefCell::default() })
}

/// Express `x` in `V(R)`, homogeneous of weight `weight`, as a normally ordered polynomial in the `E_i`.
pub fn express_in_generators(red: &ReducedSpec, gens: &WGenerators, x: &Expr, weight: &Rat) -> Result<Expr, WError> {
    if x.is_zero() {
        return Ok(Expr::zero());
    }
    let all: Vec<usize> = (0..gens.len()).collect();
    let monos = if weight.is_zero() { vec![Monomial::vacuum()] } else { ordered_monomials(&gens.reg, &all, weight) };
    let cols: Vec<BTreeMap<Monomial, Scalar>> =
        monos.iter().map(|m| gens.eval_mono(red, m).iter().map(|(k, v)| (k.clone(), v.clone())).collect()).collect();
    let rhs: BTreeMap<Monomial, Scalar> = x.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    let sol = linsolve::solve_sparse(&cols, &rhs)
        .ok_or_else(|| WError::InsufficientGenerators(x.display(&red.spec.reg).to_string()))?;
    let mut out = Expr::zero();
    for (m, c) in monos.iter().zip(sol.iter()) {
        if !c.is_zero() {
            out.add_term(m.clone(), c.clone());
        }
    }
    Ok(out)
}

/// `[E_i lam E_j]` re-expressed in the `E`'s.
pub fn w_bracket(red: &ReducedSpec, gens: &WGenerators, i: usize, j: usize) -> Result<LambdaExpr, WError> {
    let lb = red.engine().lambda_bracket(&gens.exprs[i], &gens.exprs[j]);
    let base = gens.delta(i) + gens.delta(j);
    let mut cs = Vec::new();
    for (n, c) in lb.lam_coeffs().iter().enumerate() {
        let w = &base - Rat::from_integer((n as i64 + 1).into());
        cs.push(express_in_generators(red, gens, c, &w)?);
    }
    Ok(LambdaExpr::from_lam_coeffs(&cs))
}

/// The W-algebra as a non-linear Lie conformal algebra on the `E_i`.
pub fn w_spec(red: &ReducedSpec, gens: &WGenerators) -> Result<LcaSpec, WError> {
    let mut entries = Vec::new();
    for i in 0..gens.len() {
        for j in i..gens.len() {
            let l = w_bracket(red, gens, i, j)?;
            if !l.is_zero() {
                entries.push((i, j, l));
            }
        }
    }
    let params: Vec<String> = red.level.params().into_iter().map(|p| p.to_string()).collect();
    Ok(LcaSpec::new(gens.reg.clone(), entries, true)?.with_params(params))
}

/// `[E lam E] = a (T + 2 lam) E + b lam^3`: rescaling `E' = E / a` gives a Virasoro field of central charge `12 b / a^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct VirasoroShape {
    pub scale: Scalar,
    pub central_charge: Scalar,
}

pub fn virasoro_shape(br: &LambdaExpr, e: usize) -> Option<VirasoroShape> {
    let ee = Expr::gen(e);
    let te = Expr::term(Term::new(e, 1));
    let cs = br.lam_coeffs();
    if cs.len() > 4 {
        return None;
    }
    let get = |n: usize| cs.get(n).cloned().unwrap_or_else(Expr::zero);
    let a = get(1).coeff(&Monomial::gen(e)) * Scalar::from_frac(1, 2);
    if a.is_zero() || get(1) != ee.scale(&(&a * &q(2))) || get(0) != te.scale(&a) || !get(2).is_zero() {
        return None;
    }
    let b = get(3).as_scalar()?;
    Some(VirasoroShape { central_charge: &(&q(12) * &b) / &(&a * &a), scale: a })
}

/// The finite W-algebra computed two ways.
pub struct FiniteW {
    pub names: Vec<String>,
    /// `pi_Z(E_i)` inside `U(r-bar)`.
    pub images: Vec<ZhuExpr>,
    /// Commutators in `Zhu_H W` (words in the `E`'s).
    pub table_zhu: BTreeMap<(usize, usize), ZhuExpr>,
    /// Commutators computed in `U(r-bar)`.
    pub table_fin: BTreeMap<(usize, usize), ZhuExpr>,
    /// `d-bar pi_Z(E_i) = 0` for all `i`.
    pub cocycles: bool,
    /// The two tables agree under `E_i -> pi_Z(E_i)`.
    pub agree: bool,
    pub r_names: Vec<String>,
}

/// Odd derivation `d-bar` of `U(r-bar)` determined by `d-bar(x) = pi_Z(d x)` on generators.
pub struct FiniteDifferential<'a> {
    pub zhu: &'a ZhuAlgebra,
    pub on_gens: Vec<ZhuExpr>,
}

impl FiniteDifferential<'_> {
    pub fn apply(&self, z: &ZhuExpr) -> ZhuExpr {
        let reg = self.zhu.engine().reg();
        let mut out = ZhuExpr::zero();
        for (w, c) in &z.0 {
            let mut par = Parity::Even;
            for k in 0..w.len() {
                let mut left = ZhuExpr::zero();
                left.add_term(w[..k].to_vec(), Scalar::one());
                let mut right = ZhuExpr::zero();
                right.add_term(w[k + 1..].to_vec(), Scalar::one());
                let t = self.zhu.mul(&self.zhu.mul(&left, &self.on_gens[w[k]]), &right);
                out.add_scaled(&t, &(c * &sign(par)));
                par = par.add(reg.parity(w[k]));
            }
        }
        out
    }
}

pub fn finite_w(red: &ReducedSpec, gens: &WGenerators, wspec: &Arc<LcaSpec>) -> Result<FiniteW, WError> {
    let zw = ZhuAlgebra::new(Engine::new(wspec.clone()))?;
    let zr = ZhuAlgebra::new(Engine::new(red.spec.clone()))?;
    let dbar = FiniteDifferential { on_gens: red.d_gen.iter().map(|x| zr.pi_z(x)).collect(), zhu: &zr };
    let images: Vec<ZhuExpr> = gens.exprs.iter().map(|e| zr.pi_z(e)).collect();
    let cocycles = images.iter().all(|z| dbar.apply(z).is_zero());
    let to_fin = |z: &ZhuExpr| -> ZhuExpr {
        let mut out = ZhuExpr::zero();
        for (w, c) in &z.0 {
            let mut acc = ZhuExpr::one();
            for &g in w {
                acc = zr.mul(&acc, &images[g]);
            }
            out.add_scaled(&acc, c);
        }
        out
    };
    let mut table_zhu = BTreeMap::new();
    let mut table_fin = BTreeMap::new();
    let mut agree = true;
    for i in 0..gens.len() {
        for j in i..gens.len() {
            let tz = zw.commutator(i, j);
            let tf = zr.supercommutator(&images[i], &images[j]);
            if to_fin(&tz) != tf {
                agree = false;
            }
            if !tz.is_zero() {
                table_zhu.insert((i, j), tz);
            }
            if !tf.is_zero() {
                table_fin.insert((i, j), tf);
            }
        }
    }
    Ok(FiniteW { names: gens.names.clone(), images, table_zhu, table_fin, cocycles, agree, r_names: zr.names() })
}

/// Graded dimensions of the Whittaker invariants and of `S(g^f)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WhittakerDims {
    /// Degree spacing: 1 for even gradings, 1/2 otherwise.
    pub step: Rat,
    pub dims: Vec<usize>,
    pub slice: Vec<usize>,
}

impl WhittakerDims {
    pub fn matches(&self) -> bool {
        self.dims == self.slice
    }
}

/// `(M_l)^{n_l}` for `l` spanned by the given basis vectors of `g_1/2`, graded by the Kazhdan filtration up to `cutoff`.
pub fn whittaker_invariants(
    data: &LieAlgData,
    gr: &GoodGrading,
    l: &[usize],
    cutoff: &Rat,
) -> Result<WhittakerDims, WError> {
    let half = gr.half();
    let f = &gr.f;
    let omega = |a: usize, b: usize| data.pair(f, &data.br(&data.basis(a), &data.basis(b)));
    for &a in l {
        if !half.contains(&a) {
            return Err(WError::NotIsotropic(format!("{} not in g_1/2", data.names[a])));
        }
        for &b in l {
            if !omega(a, b).is_zero() {
                return Err(WError::NotIsotropic(format!("({}, {})", data.names[a], data.names[b])));
            }
        }
    }
    let mut m_idx: Vec<usize> = l.to_vec();
    m_idx.extend(gr.ge1());
    m_idx.sort();
    m_idx.dedup();
    let mut n_elems: Vec<Elem> = Vec::new();
    let rows: Vec<Vec<Scalar>> = l.iter().map(|&b| half.iter().map(|&a| omega(b, a)).collect()).collect();
    for v in linsolve::nullspace(&rows, half.len()) {
        let mut e = data.zero();
        for (t, &a) in half.iter().enumerate() {
            e[a] = v[t].clone();
        }
        n_elems.push(e);
    }
    n_elems.extend(gr.ge1().into_iter().map(|a| data.basis(a)));

    let non_m: Vec<usize> = (0..data.dim()).filter(|a| !m_idx.contains(a)).collect();
    let order: Vec<usize> = non_m.iter().chain(m_idx.iter()).copied().collect();
    let mut letter = vec![0; data.dim()];
    for (pos, &a) in order.iter().enumerate() {
        letter[a] = pos;
    }
    let to_z = |e: &Elem| -> ZhuExpr {
        let mut z = ZhuExpr::zero();
        for (a, c) in e.iter().enumerate() {
            if !c.is_zero() {
                z.add_term(vec![letter[a]], c.clone());
            }
        }
        z
    };
    let mut table = BTreeMap::new();
    for (li, &a) in order.iter().enumerate() {
        for (lj, &b) in order.iter().enumerate().skip(li) {
            if li == lj && !data.parity[a].is_odd() {
                continue;
            }
            let z = to_z(&data.bracket[a][b]);
            if !z.is_zero() {
                table.insert((li, lj), z);
            }
        }
    }
    let pbw = PbwAlgebra::new(TableSource { parity: order.iter().map(|&a| data.parity[a]).collect(), table });
    let nm = non_m.len();
    let chi: Vec<Scalar> = m_idx.iter().map(|&a| data.pair(f, &data.basis(a)).neg()).collect();
    let reduce = |z: &ZhuExpr| -> ZhuExpr {
        let mut out = ZhuExpr::zero();
        for (w, c) in &z.0 {
            let cut = w.iter().position(|&x| x >= nm).unwrap_or(w.len());
            let mut fac = c.clone();
            for &x in &w[cut..] {
                fac = &fac * &chi[x - nm];
            }
            if !fac.is_zero() {
                out.add_term(w[..cut].to_vec(), fac);
            }
        }
        out
    };

    let step = if gr.j.iter().any(|j| !j.is_integer()) { half_rat() } else { Rat::one() };
    let units = |r: &Rat| -> usize {
        let u = r / &step;
        u.to_integer().try_into().expect("nonnegative degree")
    };
    let top = units(cutoff);
    // Ordered words in the non-m letters, with their Kazhdan degree in units of `step`.
    let mut words: Vec<(Vec<usize>, usize)> = Vec::new();
    let wts: Vec<usize> = non_m.iter().map(|&a| units(&(Rat::one() - &gr.j[a]))).collect();
    fn enum_words(
        wts: &[usize],
        odd: &[bool],
        start: usize,
        rem: usize,
        used: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<(Vec<usize>, usize)>,
    ) {
        out.push((cur.clone(), used));
        for i in start..wts.len() {
            if wts[i] <= rem {
                cur.push(i);
                let next = if odd[i] { i + 1 } else { i };
                enum_words(wts, odd, next, rem - wts[i], used + wts[i], cur, out);
                cur.pop();
            }
        }
    }
    let odd: Vec<bool> = non_m.iter().map(|&a| data.parity[a].is_odd()).collect();
    enum_words(&wts, &odd, 0, top, 0, &mut Vec::new(), &mut words);
    let col_of: HashMap<Vec<usize>, usize> = words.iter().enumerate().map(|(i, (w, _))| (w.clone(), i)).collect();

    let mut row_of: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
    let mut entries: Vec<(usize, usize, Scalar)> = Vec::new();
    for (yi, y) in n_elems.iter().enumerate() {
        let yz = to_z(y);
        let py = data.elem_parity(y);
        for (ci, (w, _)) in words.iter().enumerate() {
            let mut wz = ZhuExpr::zero();
            wz.add_term(w.clone(), Scalar::one());
            let pw = pbw.word_parity(w);
            let img = reduce(&pbw.mul(&yz, &wz)).sub(&reduce(&pbw.mul(&wz, &yz)).scale(&q(psign(py, pw))));
            for (rw, c) in &img.0 {
                let nr = row_of.len();
                let r = *row_of.entry((yi, rw.clone())).or_insert(nr);
                entries.push((r, ci, c.clone()));
            }
        }
    }
    let nrows = row_of.len();
    let mut kernel = Vec::with_capacity(top + 1);
    for t in 0..=top {
        let cols: Vec<usize> = (0..words.len()).filter(|&c| words[c].1 <= t).collect();
        let pos: HashMap<usize, usize> = cols.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut mat = vec![vec![Scalar::zero(); cols.len()]; nrows];
        for (r, c, v) in &entries {
            if let Some(&i) = pos.get(c) {
                mat[*r][i] = &mat[*r][i] + v;
            }
        }
        kernel.push(cols.len() - linsolve::rank(&mat));
    }
    let _ = col_of;
    let dims: Vec<usize> = (0..=top).map(|t| if t == 0 { kernel[0] } else { kernel[t] - kernel[t - 1] }).collect();
    let mut slice = vec![0usize; top + 1];
    slice[0] = 1;
    for (i, u) in gr.gf.iter().enumerate() {
        let w = units(&(Rat::one() - &gr.gf_degree[i]));
        if data.elem_parity(u).is_odd() {
            for t in (w..=top).rev() {
                slice[t] += slice[t - w];
            }
        } else {
            for t in w..=top {
                slice[t] += slice[t - w];
            }
        }
    }
    Ok(WhittakerDims { step, dims, slice })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> Scalar {
        Scalar::param("k")
    }

    #[test]
    fn sl2_complex() {
        let (data, gr) = principal_setup("sl2").unwrap();
        let cx = build_complex(&data, &gr, &k()).unwrap();
        let reg = &cx.spec.reg;
        let names: Vec<&str> = (0..reg.len()).map(|i| reg.name(i)).collect();
        assert_eq!(names, ["e", "h", "f", "phi_e", "phiu_e"]);
        let deltas: Vec<String> = (0..reg.len()).map(|i| reg.get(i).delta.to_string()).collect();
        assert_eq!(deltas, ["0", "1", "2", "0", "1"]);
        let expected = Scalar::parse("(-6*k^2 - 11*k - 4)/(k + 2)").unwrap();
        assert_eq!(cx.em.central_charge, expected);
        assert_eq!(cx.verify(), Vec::<String>::new());
        let jh = cx.j_field(&data.basis(1));
        assert_eq!(jh, cx.engine().parse_expr("h - 2*:phiu_e phi_e:").unwrap());
        let h = data.basis(1);
        assert_eq!(cx.psi(&h, &h), Scalar::parse("2*k + 4").unwrap());
    }

    #[test]
    fn sl2_reduced_and_generator() {
        let (data, gr) = principal_setup("sl2").unwrap();
        let cx = build_complex(&data, &gr, &k()).unwrap();
        let red = reduced_spec(&cx).unwrap();
        assert_eq!(red.check_against(&cx), Vec::<String>::new());
        let none = solve_generators(&red, &Rat::one()).unwrap();
        assert!(none.is_empty());
        let gens = solve_generators(&red, &Rat::from_integer(2.into())).unwrap();
        assert_eq!(gens.len(), 1);
        assert!(red.d_expr(&gens.exprs[0]).is_zero());
        let br = w_bracket(&red, &gens, 0, 0).unwrap();
        let shape = virasoro_shape(&br, 0).expect("Virasoro shape");
        assert_eq!(shape.central_charge, cx.em.central_charge);
        let ws = Arc::new(w_spec(&red, &gens).unwrap());
        let fw = finite_w(&red, &gens, &ws).unwrap();
        assert!(fw.cocycles && fw.agree);
        assert!(fw.table_zhu.is_empty() && fw.table_fin.is_empty());
    }

    #[test]
    fn whittaker_sl2_sl3() {
        let (data, gr) = principal_setup("sl2").unwrap();
        let w = whittaker_invariants(&data, &gr, &[], &Rat::from_integer(4.into())).unwrap();
        assert_eq!(w.dims, [1, 0, 1, 0, 1]);
        assert!(w.matches());
        let w0 = whittaker_invariants(&data, &gr, &[], &Rat::zero()).unwrap();
        assert_eq!(w0.dims, [1]);
        let (data, gr) = principal_setup("sl3").unwrap();
        let w = whittaker_invariants(&data, &gr, &[], &Rat::from_integer(3.into())).unwrap();
        assert_eq!(w.dims, [1, 0, 1, 1]);
        assert!(w.matches());
    }
}

#[cfg(test)]
mod sl3_tests {
    use super::*;

    #[test]
    fn sl3_principal() {
        let (data, gr) = principal_setup("sl3").unwrap();
        let cx = build_complex(&data, &gr, &Scalar::param("k")).unwrap();
        assert_eq!(cx.verify(), Vec::<String>::new());
        let red = reduced_spec(&cx).unwrap();
        assert_eq!(red.check_against(&cx), Vec::<String>::new());
        let gens = solve_generators(&red, &Rat::from_integer(3.into())).unwrap();
        assert_eq!(gens.len(), 2);
        for e in &gens.exprs {
            assert!(red.d_expr(e).is_zero());
        }
        let ws = Arc::new(w_spec(&red, &gens).unwrap());
        let fw = finite_w(&red, &gens, &ws).unwrap();
        assert!(fw.cocycles && fw.agree);
    }
}


#[cfg(test)]
mod finite_tests {
    use super::*;

    fn word(w: &[usize]) -> ZhuExpr {
        let mut z = ZhuExpr::zero();
        z.add_term(w.to_vec(), Scalar::one());
        z
    }

    #[test]
    fn pi_z_of_ghost_pair() {
        let (data, gr) = principal_setup("sl2").unwrap();
        let cx = build_complex(&data, &gr, &Scalar::param("k")).unwrap();
        let z = ZhuAlgebra::new(Engine::new(cx.spec.clone())).unwrap();
        let (a, b) = (data.basis(2), data.basis(0));
        let lhs = z.pi_z(&cx.engine().nop(&cx.phi_upper(&a), &cx.phi_lower(&b)));
        let shift = data.pair(&gr.x, &data.br(&gr.pi_minus(&a), &gr.pi_plus(&b)));
        assert_eq!(shift, Scalar::from_int(-1));
        let rhs = z.mul(&z.pi_z(&cx.phi_upper(&a)), &z.pi_z(&cx.phi_lower(&b))).add(&ZhuExpr::scalar(shift));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn level_shift_isomorphism() {
        let (data, gr) = principal_setup("sl2").unwrap();
        let k = Scalar::param("k");
        let ck = build_complex(&data, &gr, &k).unwrap();
        let c0 = build_complex(&data, &gr, &Scalar::zero()).unwrap();
        let zk = ZhuAlgebra::new(Engine::new(ck.spec.clone())).unwrap();
        let z0 = ZhuAlgebra::new(Engine::new(c0.spec.clone())).unwrap();
        let n = data.dim();
        let sigma = |z: &ZhuExpr| -> ZhuExpr {
            let mut out = ZhuExpr::zero();
            for (w, c) in &z.0 {
                let mut acc = ZhuExpr::one();
                for &g in w {
                    let mut img = word(&[g]);
                    if g < n {
                        img = img.add(&ZhuExpr::scalar(&k * &data.pair(&gr.x, &data.basis(g))));
                    }
                    acc = z0.mul(&acc, &img);
                }
                out.add_scaled(&acc, c);
            }
            out
        };
        let m = ck.spec.reg.len();
        for i in 0..m {
            for j in 0..m {
                let lhs = sigma(&zk.supercommutator(&word(&[i]), &word(&[j])));
                let rhs = z0.supercommutator(&word(&[i]), &word(&[j]));
                assert_eq!(lhs, rhs, "({i}, {j})");
            }
        }
        assert_eq!(sigma(&zk.pi_z(&ck.d)), z0.pi_z(&c0.d));
    }
}
