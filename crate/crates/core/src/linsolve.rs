//! Dense exact linear algebra over [`Scalar`].

use crate::scalar::Scalar;
use std::collections::BTreeMap;

/// Row-reduce in place; returns pivot columns in order.
pub fn rref(m: &mut Vec<Vec<Scalar>>, ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..ncols {
        if row >= m.len() {
            break;
        }
        let Some(p) = (row..m.len()).find(|&r| !m[r][col].is_zero()) else { continue };
        m.swap(row, p);
        let inv = m[row][col].inv().unwrap();
        if !inv.is_one() {
            for c in col..m[row].len() {
                if !m[row][c].is_zero() {
                    m[row][c] = &m[row][c] * &inv;
                }
            }
        }
        let prow = m[row].clone();
        for (r, other) in m.iter_mut().enumerate() {
            if r == row || other[col].is_zero() {
                continue;
            }
            let f = other[col].clone();
            for c in col..prow.len() {
                if !prow[c].is_zero() {
                    other[c] = &other[c] - &(&f * &prow[c]);
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

pub fn rank(m: &[Vec<Scalar>]) -> usize {
    let ncols = m.first().map_or(0, |r| r.len());
    let mut a = m.to_vec();
    rref(&mut a, ncols).len()
}

/// Solve `A c = b` where `A` is given by its columns.  Free variables are set to zero.
pub fn solve_columns(cols: &[Vec<Scalar>], b: &[Scalar]) -> Option<Vec<Scalar>> {
    let n = cols.len();
    let nrows = b.len();
    let mut m: Vec<Vec<Scalar>> = (0..nrows)
        .map(|r| {
            let mut row: Vec<Scalar> = cols.iter().map(|c| c[r].clone()).collect();
            row.push(b[r].clone());
            row
        })
        .collect();
    let piv = rref(&mut m, n + 1);
    if piv.last() == Some(&n) {
        return None;
    }
    let mut x = vec![Scalar::zero(); n];
    for (r, &c) in piv.iter().enumerate() {
        x[c] = m[r][n].clone();
    }
    Some(x)
}

/// Sparse front end: columns and right-hand side indexed by arbitrary keys.
pub fn solve_sparse<K: Ord + Clone>(cols: &[BTreeMap<K, Scalar>], rhs: &BTreeMap<K, Scalar>) -> Option<Vec<Scalar>> {
    let mut keys: BTreeMap<K, usize> = BTreeMap::new();
    for c in cols.iter().chain(std::iter::once(rhs)) {
        for k in c.keys() {
            let l = keys.len();
            keys.entry(k.clone()).or_insert(l);
        }
    }
    let nrows = keys.len();
    let dense = |c: &BTreeMap<K, Scalar>| {
        let mut v = vec![Scalar::zero(); nrows];
        for (k, s) in c {
            v[keys[k]] = s.clone();
        }
        v
    };
    let dc: Vec<Vec<Scalar>> = cols.iter().map(dense).collect();
    solve_columns(&dc, &dense(rhs))
}

/// Basis of the right nullspace of a matrix given by rows.
pub fn nullspace(rows: &[Vec<Scalar>], ncols: usize) -> Vec<Vec<Scalar>> {
    let mut m = rows.to_vec();
    let piv = rref(&mut m, ncols);
    let mut out = Vec::new();
    for free in (0..ncols).filter(|c| !piv.contains(c)) {
        let mut v = vec![Scalar::zero(); ncols];
        v[free] = Scalar::one();
        for (r, &pc) in piv.iter().enumerate() {
            v[pc] = m[r][free].neg();
        }
        out.push(v);
    }
    out
}

/// Inverse of a square matrix, `None` if singular.
pub fn inverse(a: &[Vec<Scalar>]) -> Option<Vec<Vec<Scalar>>> {
    let n = a.len();
    let mut m: Vec<Vec<Scalar>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { Scalar::one() } else { Scalar::zero() }));
            row
        })
        .collect();
    let piv = rref(&mut m, n);
    if piv.len() < n {
        return None;
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}
