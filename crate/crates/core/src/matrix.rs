//! Small dense integer matrices.

use std::fmt;

use dashu_int::IBig;
use serde::{Deserialize, Serialize};

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged matrix");
        IntMatrix { rows: r, cols: c, data: rows.concat() }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_cols(cols: &[Vec<i64>]) -> Self {
        Self::from_rows(cols).transpose()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> Vec<i64> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<i64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Product, or `None` on i64 overflow.
    pub fn checked_mul(&self, o: &IntMatrix) -> Option<IntMatrix> {
        assert_eq!(self.cols, o.rows);
        let mut m = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for j in 0..o.cols {
                let mut acc: i64 = 0;
                for k in 0..self.cols {
                    acc = acc.checked_add(self.get(i, k).checked_mul(o.get(k, j))?)?;
                }
                m.set(i, j, acc);
            }
        }
        Some(m)
    }

    pub fn mul(&self, o: &IntMatrix) -> IntMatrix {
        self.checked_mul(o).expect("integer matrix product overflowed i64")
    }

    pub fn checked_pow(&self, k: u32) -> Option<IntMatrix> {
        assert!(self.is_square());
        let mut acc = Self::identity(self.rows);
        for _ in 0..k {
            acc = acc.checked_mul(self)?;
        }
        Some(acc)
    }

    pub fn mul_vec(&self, v: &[i64]) -> Vec<i64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| (0..self.cols).map(|j| self.get(i, j) * v[j]).sum()).collect()
    }

    pub fn mul_vec_big(&self, v: &[IBig]) -> Vec<IBig> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut acc = IBig::ZERO;
                for (j, x) in v.iter().enumerate() {
                    let a = self.get(i, j);
                    if a != 0 {
                        acc += x * IBig::from(a);
                    }
                }
                acc
            })
            .collect()
    }

    pub fn is_positive(&self) -> bool {
        self.data.iter().all(|&x| x > 0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&x| x >= 0)
    }

    /// Operator norm induced by the max norm: largest absolute row sum.
    pub fn inf_norm(&self) -> i64 {
        (0..self.rows).map(|i| self.row(i).iter().map(|x| x.abs()).sum()).max().unwrap_or(0)
    }

    pub fn max_abs(&self) -> i64 {
        self.data.iter().map(|x| x.abs()).max().unwrap_or(0)
    }

    pub fn to_big(&self) -> Vec<Vec<IBig>> {
        self.to_rows().into_iter().map(|r| r.into_iter().map(IBig::from).collect()).collect()
    }

    pub fn det(&self) -> IBig {
        assert!(self.is_square());
        det_big(self.to_big())
    }

    /// Exact inverse as (numerators, common denominator) with a positive denominator.
    pub fn inverse(&self) -> Option<(Vec<Vec<IBig>>, IBig)> {
        assert!(self.is_square());
        let n = self.rows;
        let det = self.det();
        if det == IBig::ZERO {
            return None;
        }
        // adjugate via cofactors; n is tiny
        let a = self.to_big();
        let mut adj = vec![vec![IBig::ZERO; n]; n];
        for i in 0..n {
            for j in 0..n {
                let minor: Vec<Vec<IBig>> = (0..n)
                    .filter(|&r| r != j)
                    .map(|r| (0..n).filter(|&c| c != i).map(|c| a[r][c].clone()).collect())
                    .collect();
                let cof = if n == 1 { IBig::ONE } else { det_big(minor) };
                adj[i][j] = if (i + j) % 2 == 0 { cof } else { -cof };
            }
        }
        if det < IBig::ZERO {
            for row in adj.iter_mut() {
                for x in row.iter_mut() {
                    *x = -x.clone();
                }
            }
            Some((adj, -det))
        } else {
            Some((adj, det))
        }
    }
}

/// Determinant by fraction-free (Bareiss) elimination.
pub fn det_big(mut a: Vec<Vec<IBig>>) -> IBig {
    let n = a.len();
    if n == 0 {
        return IBig::ONE;
    }
    let mut sign = IBig::ONE;
    let mut prev = IBig::ONE;
    for k in 0..n - 1 {
        if a[k][k] == IBig::ZERO {
            match (k + 1..n).find(|&r| a[r][k] != IBig::ZERO) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return IBig::ZERO,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * a[n - 1][n - 1].clone()
}

/// Hermite normal form basis of the integer span of `gens`.
///
/// Returns basis vectors (upper triangular when stacked as rows, positive pivots,
/// entries above each pivot reduced into [0, pivot)). The number of vectors is the rank.
pub fn hnf_basis(gens: &[Vec<i64>], dim: usize) -> Vec<Vec<i64>> {
    let mut rows: Vec<Vec<i128>> = gens
        .iter()
        .map(|g| g.iter().map(|&x| x as i128).collect())
        .filter(|g: &Vec<i128>| g.iter().any(|&x| x != 0))
        .collect();
    let mut basis: Vec<Vec<i128>> = Vec::new();
    for col in 0..dim {
        // gcd-reduce the column among the remaining rows
        loop {
            let mut nz: Vec<usize> = (0..rows.len()).filter(|&r| rows[r][col] != 0).collect();
            if nz.len() <= 1 {
                break;
            }
            nz.sort_by_key(|&r| rows[r][col].abs());
            let piv = nz[0];
            for &r in &nz[1..] {
                let q = rows[r][col].div_euclid(rows[piv][col]);
                let pr = rows[piv].clone();
                for (x, y) in rows[r].iter_mut().zip(pr.iter()) {
                    *x -= q * y;
                }
            }
        }
        if let Some(r) = (0..rows.len()).find(|&r| rows[r][col] != 0) {
            let mut v = rows.remove(r);
            if v[col] < 0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            basis.push(v);
        }
        rows.retain(|g| g.iter().any(|&x| x != 0));
    }
    // reduce entries above pivots
    for i in 0..basis.len() {
        let pc = basis[i].iter().position(|&x| x != 0).unwrap();
        let p = basis[i][pc];
        for k in 0..i {
            let q = basis[k][pc].div_euclid(p);
            if q != 0 {
                let bi = basis[i].clone();
                for (x, y) in basis[k].iter_mut().zip(bi.iter()) {
                    *x -= q * y;
                }
            }
        }
    }
    basis.into_iter().map(|v| v.into_iter().map(|x| i64::try_from(x).expect("HNF entry overflow")).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bareiss_matches_cofactor() {
        let m = IntMatrix::from_rows(&[vec![2, -1, 0], vec![1, 3, 4], vec![0, 5, -2]]);
        // 2(3*-2 - 20) + 1(1*-2 - 0) = -52 - 2
        assert_eq!(m.det(), IBig::from(-54));
        let z = IntMatrix::from_rows(&[vec![0, 1], vec![0, 2]]);
        assert_eq!(z.det(), IBig::ZERO);
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let m = IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]]);
        let (inv, den) = m.inverse().unwrap();
        assert_eq!(den, IBig::ONE);
        assert_eq!(inv, vec![vec![IBig::from(1), IBig::from(-1)], vec![IBig::from(-1), IBig::from(2)]]);
        let h = IntMatrix::from_rows(&[vec![2, 0], vec![0, 2]]);
        let (_, den) = h.inverse().unwrap();
        assert_eq!(den, IBig::from(4));
    }

    #[test]
    fn hnf_of_small_spans() {
        assert_eq!(hnf_basis(&[vec![1, 0], vec![1, 1]], 2), vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(hnf_basis(&[vec![2, 0], vec![0, 2]], 2), vec![vec![2, 0], vec![0, 2]]);
        assert_eq!(hnf_basis(&[vec![2, 4], vec![3, 6]], 2), vec![vec![1, 2]]);
        assert_eq!(hnf_basis(&[vec![4, 6], vec![6, 9], vec![0, 3]], 2), vec![vec![2, 0], vec![0, 3]]);
    }

    #[test]
    fn norms() {
        let m = IntMatrix::from_rows(&[vec![1, -3], vec![2, 0]]);
        assert_eq!(m.inf_norm(), 4);
        assert_eq!(m.transpose().inf_norm(), 3);
    }
}
