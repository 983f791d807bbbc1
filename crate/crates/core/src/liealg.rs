//! Finite-dimensional Lie (super)algebras with an invariant form, good
//! gradings and the dual bases used by the reduction.

use crate::linsolve;
use crate::scalar::{Rat, Scalar};
use crate::terms::{psign, Parity};
use num_traits::{One, Zero};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LieError {
    #[error("Casimir operator is not scalar on the adjoint representation")]
    NotSemisimpleAmbiguity,
    #[error("pair (x, f) is not good: {0}")]
    NotGood(String),
    #[error("basis is not an eigenbasis of ad x: {0}")]
    NotAdapted(String),
    #[error("degenerate form: {0}")]
    DegenerateForm(String),
    #[error("unknown basis element '{0}'")]
    UnknownElement(String),
}

/// Coordinate vector in the fixed basis.
pub type Elem = Vec<Scalar>;

pub fn elem_add(a: &Elem, b: &Elem) -> Elem {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn elem_scale(a: &Elem, c: &Scalar) -> Elem {
    a.iter().map(|x| x * c).collect()
}

pub fn elem_is_zero(a: &Elem) -> bool {
    a.iter().all(|x| x.is_zero())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LieAlgData {
    pub names: Vec<String>,
    pub parity: Vec<Parity>,
    /// `bracket[i][j]` = coordinates of `[u_i, u_j]`.
    pub bracket: Vec<Vec<Elem>>,
    /// `form[i][j] = (u_i | u_j)`.
    pub form: Vec<Vec<Scalar>>,
}

impl LieAlgData {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn zero(&self) -> Elem {
        vec![Scalar::zero(); self.dim()]
    }

    pub fn basis(&self, i: usize) -> Elem {
        let mut v = self.zero();
        v[i] = Scalar::one();
        v
    }

    pub fn index(&self, name: &str) -> Result<usize, LieError> {
        self.names.iter().position(|n| n == name).ok_or_else(|| LieError::UnknownElement(name.into()))
    }

    pub fn elem(&self, name: &str) -> Result<Elem, LieError> {
        Ok(self.basis(self.index(name)?))
    }

    pub fn br(&self, a: &Elem, b: &Elem) -> Elem {
        let mut out = self.zero();
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                let c = x * y;
                for (k, s) in self.bracket[i][j].iter().enumerate() {
                    if !s.is_zero() {
                        out[k] = &out[k] + &(&c * s);
                    }
                }
            }
        }
        out
    }

    pub fn pair(&self, a: &Elem, b: &Elem) -> Scalar {
        let mut acc = Scalar::zero();
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                if !y.is_zero() && !self.form[i][j].is_zero() {
                    acc = &acc + &(&(x * y) * &self.form[i][j]);
                }
            }
        }
        acc
    }

    /// Super-dimension: `dim g_even - dim g_odd`.
    pub fn sdim(&self) -> i64 {
        self.parity.iter().map(|p| p.sign()).sum()
    }

    /// Parity of a homogeneous element (even for zero).
    pub fn elem_parity(&self, a: &Elem) -> Parity {
        a.iter().enumerate().find(|(_, x)| !x.is_zero()).map_or(Parity::Even, |(i, _)| self.parity[i])
    }

    /// Matrix of `ad a`: column j holds `[a, u_j]`.
    pub fn ad(&self, a: &Elem) -> Vec<Vec<Scalar>> {
        let n = self.dim();
        let cols: Vec<Elem> = (0..n).map(|j| self.br(a, &self.basis(j))).collect();
        (0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect()
    }

    /// Check all structural invariants; returns the list of violations.
    pub fn validate(&self) -> Vec<String> {
        let n = self.dim();
        let mut bad = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let p = psign(self.parity[i], self.parity[j]);
                let lhs = &self.bracket[j][i];
                let rhs = elem_scale(&self.bracket[i][j], &Scalar::from_int(-p));
                if *lhs != rhs {
                    bad.push(format!("antisymmetry fails for ({}, {})", self.names[i], self.names[j]));
                }
                let fs = &self.form[j][i];
                if *fs != &self.form[i][j] * &Scalar::from_int(p) {
                    bad.push(format!("form not supersymmetric on ({}, {})", self.names[i], self.names[j]));
                }
                if self.parity[i] != self.parity[j] && !self.form[i][j].is_zero() {
                    bad.push(format!("form pairs even with odd on ({}, {})", self.names[i], self.names[j]));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (a, b, c) = (self.basis(i), self.basis(j), self.basis(k));
                    let lhs = self.br(&a, &self.br(&b, &c));
                    let r1 = self.br(&self.br(&a, &b), &c);
                    let r2 = elem_scale(
                        &self.br(&b, &self.br(&a, &c)),
                        &Scalar::from_int(psign(self.parity[i], self.parity[j])),
                    );
                    if lhs != elem_add(&r1, &r2) {
                        bad.push(format!("Jacobi fails on ({}, {}, {})", self.names[i], self.names[j], self.names[k]));
                    }
                    if self.pair(&self.br(&a, &b), &c) != self.pair(&a, &self.br(&b, &c)) {
                        bad.push(format!(
                            "form not invariant on ({}, {}, {})",
                            self.names[i], self.names[j], self.names[k]
                        ));
                    }
                }
            }
        }
        if n > 0 && linsolve::inverse(&self.form).is_none() {
            bad.push("form is degenerate".into());
        }
        bad
    }

    /// Dual basis `u^i` with `(u_i | u^j) = delta_ij`.
    pub fn dual_basis(&self) -> Result<Vec<Elem>, LieError> {
        let inv = linsolve::inverse(&self.form).ok_or_else(|| LieError::DegenerateForm("invariant form".into()))?;
        // u^j = sum_k M_jk u_k with B M^T = 1, so M = (B^-1)^T
        let n = self.dim();
        Ok((0..n).map(|j| (0..n).map(|k| inv[k][j].clone()).collect()).collect())
    }

    /// Half the eigenvalue of the Casimir `sum_i u^i u_i` on the adjoint representation.
    pub fn dual_coxeter(&self) -> Result<Scalar, LieError> {
        let n = self.dim();
        let dual = self.dual_basis()?;
        let mut eig: Option<Scalar> = None;
        for k in 0..n {
            let x = self.basis(k);
            let mut acc = self.zero();
            for i in 0..n {
                acc = elem_add(&acc, &self.br(&dual[i], &self.br(&self.basis(i), &x)));
            }
            for (m, v) in acc.iter().enumerate() {
                if m != k && !v.is_zero() {
                    return Err(LieError::NotSemisimpleAmbiguity);
                }
            }
            match &eig {
                None => eig = Some(acc[k].clone()),
                Some(e) if *e != acc[k] => return Err(LieError::NotSemisimpleAmbiguity),
                _ => {}
            }
        }
        Ok(eig.map_or(Scalar::zero(), |e| &e * &Scalar::from_frac(1, 2)))
    }

    /// Lie algebra of matrices with the trace form.
    pub fn from_matrices(names: &[&str], mats: &[Vec<Vec<i64>>]) -> LieAlgData {
        let n = names.len();
        let size = mats[0].len();
        let flat = |m: &Vec<Vec<Scalar>>| -> Vec<Scalar> { m.iter().flatten().cloned().collect() };
        let sm: Vec<Vec<Vec<Scalar>>> =
            mats.iter().map(|m| m.iter().map(|r| r.iter().map(|&x| Scalar::from_int(x)).collect()).collect()).collect();
        let cols: Vec<Vec<Scalar>> = sm.iter().map(flat).collect();
        let mul = |a: &Vec<Vec<Scalar>>, b: &Vec<Vec<Scalar>>| -> Vec<Vec<Scalar>> {
            (0..size)
                .map(|i| {
                    (0..size).map(|j| (0..size).fold(Scalar::zero(), |acc, k| &acc + &(&a[i][k] * &b[k][j]))).collect()
                })
                .collect()
        };
        let mut bracket = vec![vec![Vec::new(); n]; n];
        let mut form = vec![vec![Scalar::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                let ab = mul(&sm[i], &sm[j]);
                let ba = mul(&sm[j], &sm[i]);
                let c: Vec<Vec<Scalar>> =
                    (0..size).map(|r| (0..size).map(|s| &ab[r][s] - &ba[r][s]).collect()).collect();
                bracket[i][j] = linsolve::solve_columns(&cols, &flat(&c)).expect("closed under bracket");
                form[i][j] = (0..size).fold(Scalar::zero(), |acc, r| &acc + &ab[r][r]);
            }
        }
        LieAlgData {
            names: names.iter().map(|s| s.to_string()).collect(),
            parity: vec![Parity::Even; n],
            bracket,
            form,
        }
    }

    /// `sl2` with basis `e, h, f`, `(e|f) = 1`, `(h|h) = 2`.
    pub fn sl2() -> LieAlgData {
        LieAlgData::from_matrices(
            &["e", "h", "f"],
            &[vec![vec![0, 1], vec![0, 0]], vec![vec![1, 0], vec![0, -1]], vec![vec![0, 0], vec![1, 0]]],
        )
    }

    /// `sl3` with the trace form; basis of matrix units and `h1, h2`.
    pub fn sl3() -> LieAlgData {
        let unit = |i: usize, j: usize| {
            let mut m = vec![vec![0i64; 3]; 3];
            m[i][j] = 1;
            m
        };
        let diag = |a: i64, b: i64, c: i64| vec![vec![a, 0, 0], vec![0, b, 0], vec![0, 0, c]];
        LieAlgData::from_matrices(
            &["e12", "e23", "e13", "h1", "h2", "e21", "e32", "e31"],
            &[unit(0, 1), unit(1, 2), unit(0, 2), diag(1, -1, 0), diag(0, 1, -1), unit(1, 0), unit(2, 1), unit(2, 0)],
        )
    }

    /// Abelian algebra with the identity form.
    pub fn abelian(n: usize) -> LieAlgData {
        let names: Vec<String> = (1..=n).map(|i| format!("a{i}")).collect();
        LieAlgData {
            names,
            parity: vec![Parity::Even; n],
            bracket: vec![vec![vec![Scalar::zero(); n]; n]; n],
            form: (0..n)
                .map(|i| (0..n).map(|j| if i == j { Scalar::one() } else { Scalar::zero() }).collect())
                .collect(),
        }
    }
}

/// Grading by `ad x` together with the nilpotent `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct GoodGrading {
    pub x: Elem,
    pub f: Elem,
    /// Eigenvalue of `ad x` on each basis vector.
    pub j: Vec<Rat>,
    /// Homogeneous basis of the centraliser of `f`.
    pub gf: Vec<Elem>,
    pub gf_degree: Vec<Rat>,
}

impl GoodGrading {
    pub fn indices(&self, pred: impl Fn(&Rat) -> bool) -> Vec<usize> {
        (0..self.j.len()).filter(|&i| pred(&self.j[i])).collect()
    }

    /// `S_+`: positive degrees.
    pub fn plus(&self) -> Vec<usize> {
        self.indices(|j| *j > Rat::zero())
    }

    pub fn minus(&self) -> Vec<usize> {
        self.indices(|j| *j < Rat::zero())
    }

    pub fn le0(&self) -> Vec<usize> {
        self.indices(|j| *j <= Rat::zero())
    }

    pub fn half(&self) -> Vec<usize> {
        let h = Rat::new(1.into(), 2.into());
        self.indices(|j| *j == h)
    }

    pub fn ge1(&self) -> Vec<usize> {
        self.indices(|j| *j >= Rat::one())
    }

    fn project(&self, a: &Elem, pred: impl Fn(&Rat) -> bool) -> Elem {
        a.iter().enumerate().map(|(i, x)| if pred(&self.j[i]) { x.clone() } else { Scalar::zero() }).collect()
    }

    pub fn pi_plus(&self, a: &Elem) -> Elem {
        self.project(a, |j| *j > Rat::zero())
    }

    pub fn pi_minus(&self, a: &Elem) -> Elem {
        self.project(a, |j| *j < Rat::zero())
    }

    pub fn pi_le(&self, a: &Elem) -> Elem {
        self.project(a, |j| *j <= Rat::zero())
    }

    pub fn pi_half(&self, a: &Elem) -> Elem {
        let h = Rat::new(1.into(), 2.into());
        self.project(a, |j| *j == h)
    }

    /// Degree of a homogeneous element.
    pub fn degree(&self, a: &Elem) -> Option<Rat> {
        let mut d = None;
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            match &d {
                None => d = Some(self.j[i].clone()),
                Some(e) if *e != self.j[i] => return None,
                _ => {}
            }
        }
        d
    }
}

/// Validate `(x, f)` and compute the centraliser of `f`.
pub fn grading_from_pair(data: &LieAlgData, x: &Elem, f: &Elem) -> Result<GoodGrading, LieError> {
    let n = data.dim();
    let two = Rat::from_integer(2.into());
    let mut j = Vec::with_capacity(n);
    for i in 0..n {
        let v = data.br(x, &data.basis(i));
        for (k, s) in v.iter().enumerate() {
            if k != i && !s.is_zero() {
                return Err(LieError::NotAdapted(format!("[x, {}] leaves the line", data.names[i])));
            }
        }
        let ev = v[i]
            .as_rat()
            .ok_or_else(|| LieError::NotAdapted(format!("eigenvalue on {} not rational", data.names[i])))?;
        if !(&ev * &two).is_integer() {
            return Err(LieError::NotAdapted(format!("eigenvalue {ev} on {} not in Z/2", data.names[i])));
        }
        j.push(ev);
    }
    let xf = data.br(x, f);
    if xf != elem_scale(f, &Scalar::from_int(-1)) {
        return Err(LieError::NotGood("[x, f] != -f".into()));
    }
    let mut degrees: Vec<Rat> = j.clone();
    degrees.sort();
    degrees.dedup();
    let adf = data.ad(f);
    let mut gf = Vec::new();
    let mut gf_degree = Vec::new();
    for d in degrees.iter().rev() {
        let idx: Vec<usize> = (0..n).filter(|&i| j[i] == *d).collect();
        let rows: Vec<Vec<Scalar>> = (0..n).map(|r| idx.iter().map(|&c| adf[r][c].clone()).collect()).collect();
        for v in linsolve::nullspace(&rows, idx.len()) {
            if *d > Rat::zero() {
                return Err(LieError::NotGood(format!("centraliser of f meets degree {d}")));
            }
            let mut e = data.zero();
            for (t, &c) in idx.iter().enumerate() {
                e[c] = v[t].clone();
            }
            gf.push(e);
            gf_degree.push(d.clone());
        }
    }
    Ok(GoodGrading { x: x.clone(), f: f.clone(), j, gf, gf_degree })
}

/// Dual bases used by the reduction.
#[derive(Clone, Debug)]
pub struct DualBases {
    /// `u^a` for every basis index `a`.
    pub up: Vec<Elem>,
    /// Indices of `g_{1/2}`.
    pub half: Vec<usize>,
    /// `v_a` for `a` in `half` (same order).
    pub v: Vec<Elem>,
}

impl DualBases {
    /// `v_a` for basis index `a` in `g_{1/2}`.
    pub fn v_of(&self, a: usize) -> &Elem {
        let pos = self.half.iter().position(|&h| h == a).expect("index in g_1/2");
        &self.v[pos]
    }
}

pub fn dual_bases(data: &LieAlgData, gr: &GoodGrading) -> Result<DualBases, LieError> {
    let up = data.dual_basis()?;
    let half = gr.half();
    let m: Vec<Vec<Scalar>> = half
        .iter()
        .map(|&a| half.iter().map(|&c| data.pair(&gr.f, &data.br(&data.basis(a), &data.basis(c)))).collect())
        .collect();
    let v = if half.is_empty() {
        vec![]
    } else {
        let inv = linsolve::inverse(&m).ok_or_else(|| LieError::DegenerateForm("(f|[a,b]) on g_1/2".into()))?;
        (0..half.len())
            .map(|b| {
                let mut e = data.zero();
                for (g, &c) in half.iter().enumerate() {
                    e[c] = inv[g][b].clone();
                }
                e
            })
            .collect()
    };
    let db = DualBases { up, half, v };
    for (pos, &a) in db.half.iter().enumerate() {
        if data.br(&db.v[pos], &gr.f) != db.up[a] {
            return Err(LieError::DegenerateForm(format!("[v, f] != u^a for {}", data.names[a])));
        }
    }
    Ok(db)
}

/// Built-in algebras by name.
pub fn builtin(name: &str) -> Option<LieAlgData> {
    match name {
        "sl2" => Some(LieAlgData::sl2()),
        "sl3" => Some(LieAlgData::sl3()),
        _ => None,
    }
}

/// Principal grading data for the built-in algebras: `(x, f)`.
pub fn principal_pair(data: &LieAlgData) -> Option<(Elem, Elem)> {
    let half = Scalar::from_frac(1, 2);
    match data.names.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["e", "h", "f"] => Some((elem_scale(&data.basis(1), &half), data.basis(2))),
        ["e12", "e23", "e13", "h1", "h2", "e21", "e32", "e31"] => {
            let x = elem_add(&data.basis(3), &data.basis(4));
            let f = elem_add(&data.basis(5), &data.basis(6));
            Some((x, f))
        }
        _ => None,
    }
}

/// Sparse printable form of an element.
pub fn elem_to_string(data: &LieAlgData, a: &Elem) -> String {
    let mut parts: BTreeMap<usize, String> = BTreeMap::new();
    for (i, x) in a.iter().enumerate() {
        if !x.is_zero() {
            let s = if x.is_one() { data.names[i].clone() } else { format!("{}*{}", x.display_atom(), data.names[i]) };
            parts.insert(i, s);
        }
    }
    if parts.is_empty() {
        "0".into()
    } else {
        parts.into_values().collect::<Vec<_>>().join(" + ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sl2_structure() {
        let g = LieAlgData::sl2();
        assert!(g.validate().is_empty());
        assert_eq!(g.br(&g.basis(0), &g.basis(2)), g.basis(1));
        assert_eq!(g.br(&g.basis(1), &g.basis(0)), elem_scale(&g.basis(0), &Scalar::from_int(2)));
        assert_eq!(g.dual_coxeter().unwrap(), Scalar::from_int(2));
        assert_eq!(LieAlgData::sl3().dual_coxeter().unwrap(), Scalar::from_int(3));
        assert_eq!(LieAlgData::abelian(1).dual_coxeter().unwrap(), Scalar::zero());
        assert!(LieAlgData::abelian(1).validate().is_empty());
    }

    #[test]
    fn bad_form_detected() {
        let mut g = LieAlgData::sl2();
        g.form[1][1] = Scalar::from_int(3);
        assert!(g.validate().iter().any(|s| s.contains("invariant")));
    }

    #[test]
    fn sl2_grading() {
        let g = LieAlgData::sl2();
        let (x, f) = principal_pair(&g).unwrap();
        let gr = grading_from_pair(&g, &x, &f).unwrap();
        assert_eq!(gr.j, vec![Rat::one(), Rat::zero(), -Rat::one()]);
        assert_eq!(gr.gf, vec![g.basis(2)]);
        assert!(matches!(grading_from_pair(&g, &x, &g.basis(0)), Err(LieError::NotGood(_))));
        let db = dual_bases(&g, &gr).unwrap();
        assert_eq!(db.up[0], g.basis(2));
        assert_eq!(db.up[1], elem_scale(&g.basis(1), &Scalar::from_frac(1, 2)));
        assert_eq!(db.up[2], g.basis(0));
    }

    #[test]
    fn sl3_principal() {
        let g = LieAlgData::sl3();
        assert!(g.validate().is_empty());
        let (x, f) = principal_pair(&g).unwrap();
        let gr = grading_from_pair(&g, &x, &f).unwrap();
        assert_eq!(gr.gf.len(), 2);
        assert_eq!(gr.gf_degree, vec![-Rat::one(), Rat::from_integer((-2).into())]);
        let db = dual_bases(&g, &gr).unwrap();
        assert!(db.half.is_empty());
    }
}
