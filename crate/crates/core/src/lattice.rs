//! The return-word lattice Γ, its dual L = Γ*, metric constants and nearest points.

use std::borrow::Cow;

use dashu_int::IBig;
use serde::{Deserialize, Serialize};

use crate::hp::{self, Real};
use crate::matrix::{hnf_basis, IntMatrix};
use crate::subst::ReturnWordSet;

pub const DEFAULT_ENUM_BUDGET: u64 = 10_000_000;
pub const MAX_SEARCH_RADIUS: i64 = 3;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("population vectors span a rank {rank} subgroup of Z^{d}")]
    Rank { rank: usize, d: usize },
    #[error("Γ is not invariant under the substitution matrix")]
    NotInvariant,
    #[error("enumeration of {needed} points exceeds the budget of {budget}")]
    EnumerationBudget { needed: f64, budget: u64 },
    #[error("dual basis does not have an integral dual")]
    NotIntegral,
}

/// Exact nonnegative rational.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rational {
    pub num: String,
    pub den: String,
}

impl Rational {
    fn new(num: &IBig, den: &IBig) -> Self {
        let g = gcd(num, den);
        Rational { num: (num / &g).to_string(), den: (den / &g).to_string() }
    }

    pub fn num_big(&self) -> IBig {
        self.num.parse().unwrap()
    }

    pub fn den_big(&self) -> IBig {
        self.den.parse().unwrap()
    }

    pub fn to_real(&self, p: usize) -> Real {
        hp::big(p, &self.num_big()) / hp::big(p, &self.den_big())
    }

    pub fn to_f64(&self) -> f64 {
        hp::to_f64(&self.to_real(128))
    }
}

fn gcd(a: &IBig, b: &IBig) -> IBig {
    let (mut a, mut b) = (abs_big(a), abs_big(b));
    while b != IBig::ZERO {
        let r = &a % &b;
        a = b;
        b = r;
    }
    if a == IBig::ZERO {
        IBig::ONE
    } else {
        a
    }
}

fn abs_big(a: &IBig) -> IBig {
    if a < &IBig::ZERO {
        -a.clone()
    } else {
        a.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Metric {
    #[default]
    LInf,
    /// Euclidean distance, for diagnostics only.
    L2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticePair {
    /// Columns generate Γ (Hermite normal form).
    pub gamma: IntMatrix,
    /// Γ* basis: column j is `dual_num[.][j] / dual_den`.
    pub dual_num: Vec<Vec<String>>,
    pub dual_den: String,
    pub a_l: Rational,
    pub b_l: Rational,
    /// a_L / (4 ‖A‖∞).
    pub c_al: Rational,
    pub a_norm: i64,
    #[serde(skip)]
    cache: Cache,
}

#[derive(Debug, Clone, Default)]
struct Cache {
    num: Vec<Vec<IBig>>,
    den: IBig,
}

impl LatticePair {
    pub fn d(&self) -> usize {
        self.gamma.rows()
    }

    /// Γ = Z^d, L = Z^d.
    pub fn integer(d: usize, a: &IntMatrix) -> Result<Self, LatticeError> {
        Self::from_gamma(IntMatrix::identity(d), a, DEFAULT_ENUM_BUDGET)
    }

    pub fn from_gamma(gamma: IntMatrix, a: &IntMatrix, budget: u64) -> Result<Self, LatticeError> {
        let d = gamma.rows();
        let (inv, den) = gamma.inverse().ok_or(LatticeError::Rank { rank: 0, d })?;
        // dual basis matrix is the inverse transpose
        let num: Vec<Vec<IBig>> = (0..d).map(|i| (0..d).map(|j| inv[j][i].clone()).collect()).collect();
        Self::assemble(gamma, num, den, a, budget)
    }

    /// Lattice given by its dual basis `num / den` (columns); Γ must come out integral.
    pub fn from_dual(num: &[Vec<i64>], den: i64, a: &IntMatrix, budget: u64) -> Result<Self, LatticeError> {
        let d = num.len();
        let b = IntMatrix::from_rows(num);
        let (inv, det) = b.inverse().ok_or(LatticeError::Rank { rank: 0, d })?;
        // Γ = (B^{-1})^T with B = num/den, so Γ = den * inv^T / det
        let mut g = IntMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let v = &inv[j][i] * IBig::from(den);
                if &v % &det != IBig::ZERO {
                    return Err(LatticeError::NotIntegral);
                }
                g.set(i, j, i64::try_from(v / &det).map_err(|_| LatticeError::NotIntegral)?);
            }
        }
        let nb: Vec<Vec<IBig>> = num.iter().map(|r| r.iter().map(|&x| IBig::from(x)).collect()).collect();
        Self::assemble(g, nb, IBig::from(den), a, budget)
    }

    fn assemble(
        gamma: IntMatrix,
        num: Vec<Vec<IBig>>,
        den: IBig,
        a: &IntMatrix,
        budget: u64,
    ) -> Result<Self, LatticeError> {
        let col_inf = column_inf_norms(&num);
        let b_l = covering_radius_bound(&num, &den);
        let a_norm = a.inf_norm();
        let a_l_num = min_distance_num(&gamma, &num, &den, &col_inf, budget)?;
        let a_l = Rational::new(&a_l_num, &den);
        let c_al = Rational::new(&a_l_num, &(&den * IBig::from(4 * a_norm.max(1))));
        Ok(LatticePair {
            gamma,
            dual_num: num.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect(),
            dual_den: den.to_string(),
            a_l,
            b_l,
            c_al,
            a_norm,
            cache: Cache { num, den },
        })
    }

    fn cache(&self) -> Cow<'_, Cache> {
        if self.cache.num.is_empty() {
            Cow::Owned(Cache {
                num: self.dual_num.iter().map(|r| r.iter().map(|x| x.parse().unwrap()).collect()).collect(),
                den: self.dual_den.parse().unwrap(),
            })
        } else {
            Cow::Borrowed(&self.cache)
        }
    }

    /// Restores derived fields after deserialization.
    pub fn rehydrate(mut self) -> Self {
        self.cache = self.cache().into_owned();
        self
    }

    /// Point of L with lattice coordinates `c`.
    pub fn point(&self, c: &[IBig], p: usize) -> Vec<Real> {
        let cache = self.cache();
        let d = self.d();
        let den = hp::big(p, &cache.den);
        (0..d)
            .map(|i| {
                let mut acc = IBig::ZERO;
                for j in 0..d {
                    acc += &cache.num[i][j] * &c[j];
                }
                hp::big(p, &acc) / &den
            })
            .collect()
    }

    /// Dual basis as big floats, `[i][j]` = component i of basis vector j.
    pub fn dual_real(&self, p: usize) -> Vec<Vec<Real>> {
        let cache = self.cache();
        let den = hp::big(p, &cache.den);
        cache.num.iter().map(|r| r.iter().map(|x| hp::big(p, x) / &den).collect()).collect()
    }

    /// Lattice coordinates of x in the dual basis: Γ^T x.
    pub fn coords(&self, x: &[Real]) -> Vec<Real> {
        let d = self.d();
        let p = x[0].precision().max(hp::MIN_BITS);
        (0..d)
            .map(|j| {
                let mut acc = hp::int(p, 0);
                for i in 0..d {
                    let g = self.gamma.get(i, j);
                    if g != 0 {
                        acc += &x[i] * hp::int(p, g);
                    }
                }
                acc
            })
            .collect()
    }

    /// Integer matrix of a map M with M L ⊂ L, in lattice coordinates.
    pub fn action_in_coords(&self, m: &IntMatrix) -> Option<IntMatrix> {
        let cache = self.cache();
        let d = self.d();
        let mut out = IntMatrix::zeros(d, d);
        // Γ^T M B, with B = num/den
        let gt = self.gamma.transpose();
        let gm = gt.mul(m);
        for i in 0..d {
            for j in 0..d {
                let mut acc = IBig::ZERO;
                for k in 0..d {
                    acc += IBig::from(gm.get(i, k)) * &cache.num[k][j];
                }
                if &acc % &cache.den != IBig::ZERO {
                    return None;
                }
                out.set(i, j, i64::try_from(acc / &cache.den).ok()?);
            }
        }
        Some(out)
    }

    pub fn min_distance(&self) -> Real {
        self.a_l.to_real(128)
    }

    pub fn covering_radius_bound(&self) -> Real {
        self.b_l.to_real(128)
    }

    pub fn nearest_point(&self, x: &[Real]) -> TorusPoint {
        self.nearest_point_with(x, 1, Metric::LInf)
    }

    /// Babai rounding plus offsets in {-r..r}^d, widening r up to 3 while the best
    /// offset sits on the boundary of the searched box.
    pub fn nearest_point_with(&self, x: &[Real], radius: i64, metric: Metric) -> TorusPoint {
        let d = self.d();
        let p = x.iter().map(|v| v.precision()).max().unwrap_or(64).max(hp::MIN_BITS);
        let base: Vec<IBig> = self.coords(x).iter().map(hp::round_half_up).collect();
        let b = self.dual_real(p);
        let base_pt = self.point(&base, p);
        let resid: Vec<Real> = x.iter().zip(&base_pt).map(|(a, c)| a - c).collect();
        let mut r = radius.max(0);
        loop {
            let mut best: Option<(Real, Vec<i64>)> = None;
            let mut off = vec![-r; d];
            loop {
                let eps: Vec<Real> = (0..d)
                    .map(|i| {
                        let mut v = resid[i].clone();
                        for j in 0..d {
                            if off[j] != 0 {
                                v -= &b[i][j] * hp::int(p, off[j]);
                            }
                        }
                        v
                    })
                    .collect();
                let dist = norm(&eps, metric);
                // offsets are visited in lexicographic order, so strict improvement keeps the smallest on ties
                if best.as_ref().is_none_or(|(bd, _)| &dist < bd) {
                    best = Some((dist, off.clone()));
                }
                if !next_offset(&mut off, r) {
                    break;
                }
            }
            let (_, o) = best.unwrap();
            let on_boundary = r > 0 && o.iter().any(|v| v.abs() == r);
            if on_boundary && r < MAX_SEARCH_RADIUS {
                r += 1;
                continue;
            }
            let coords: Vec<IBig> = base.iter().zip(&o).map(|(c, v)| c + IBig::from(*v)).collect();
            let nearest = self.point(&coords, p);
            let frac: Vec<Real> = x.iter().zip(&nearest).map(|(a, c)| a - c).collect();
            let dist = norm(&frac, metric);
            return TorusPoint { coords, nearest, frac, dist, radius_used: r };
        }
    }

    /// ‖x‖ on R^d / L.
    pub fn torus_dist(&self, x: &[Real]) -> Real {
        self.nearest_point(x).dist
    }

    /// Checks S Γ ⊂ Γ for the substitution matrix S.
    pub fn is_invariant(&self, s: &IntMatrix) -> bool {
        let d = self.d();
        let (inv, det) = self.gamma.inverse().unwrap();
        let sg = s.mul(&self.gamma);
        for i in 0..d {
            for j in 0..d {
                let mut acc = IBig::ZERO;
                for k in 0..d {
                    acc += &inv[i][k] * IBig::from(sg.get(k, j));
                }
                if &acc % &det != IBig::ZERO {
                    return false;
                }
            }
        }
        true
    }
}

fn column_inf_norms(num: &[Vec<IBig>]) -> Vec<IBig> {
    let d = num.len();
    (0..d).map(|j| (0..d).map(|i| abs_big(&num[i][j])).max().unwrap()).collect()
}

/// ½ Σ_j ‖b_j‖∞ for the basis with columns `num[.][j] / den`, the Babai rounding bound.
pub fn covering_radius_bound(num: &[Vec<IBig>], den: &IBig) -> Rational {
    let sum = column_inf_norms(num).into_iter().fold(IBig::ZERO, |a, b| a + b);
    Rational::new(&sum, &(den * IBig::from(2)))
}

fn next_offset(off: &mut [i64], r: i64) -> bool {
    for i in (0..off.len()).rev() {
        if off[i] < r {
            off[i] += 1;
            for v in off[i + 1..].iter_mut() {
                *v = -r;
            }
            return true;
        }
    }
    false
}

pub fn norm(v: &[Real], metric: Metric) -> Real {
    let p = v.iter().map(|x| x.precision()).max().unwrap_or(64).max(hp::MIN_BITS);
    match metric {
        Metric::LInf => v.iter().fold(hp::int(p, 0), |m, x| hp::max(&m, &hp::abs(x))),
        Metric::L2 => v.iter().fold(hp::int(p, 0), |m, x| m + x * x).sqrt(),
    }
}

#[derive(Debug, Clone)]
pub struct TorusPoint {
    pub coords: Vec<IBig>,
    pub nearest: Vec<Real>,
    pub frac: Vec<Real>,
    pub dist: Real,
    pub radius_used: i64,
}

/// Numerator (over the dual denominator) of the smallest nonzero ℓ∞ norm in L.
///
/// If ‖Bc‖∞ <= t then c = Γ^T(Bc), so |c_i| <= t ‖column i of Γ‖₁; the box shrinks
/// as better vectors are found.
fn min_distance_num(
    gamma: &IntMatrix,
    num: &[Vec<IBig>],
    den: &IBig,
    col_inf: &[IBig],
    budget: u64,
) -> Result<IBig, LatticeError> {
    let d = gamma.rows();
    let mut best = col_inf.iter().min().unwrap().clone();
    let bounds: Vec<i64> = (0..d)
        .map(|i| {
            let l1: i64 = gamma.col(i).iter().map(|x| x.abs()).sum();
            i64::try_from(&best * IBig::from(l1) / den).unwrap_or(i64::MAX)
        })
        .collect();
    let needed: f64 = bounds.iter().map(|&b| 2.0 * b as f64 + 1.0).product();
    if needed > budget as f64 {
        return Err(LatticeError::EnumerationBudget { needed, budget });
    }
    let mut c: Vec<i64> = bounds.iter().map(|b| -b).collect();
    loop {
        if c.iter().any(|&x| x != 0) {
            let mut m = IBig::ZERO;
            for i in 0..d {
                let mut acc = IBig::ZERO;
                for j in 0..d {
                    if c[j] != 0 {
                        acc += &num[i][j] * IBig::from(c[j]);
                    }
                }
                m = m.max(abs_big(&acc));
            }
            if m < best {
                best = m;
            }
        }
        // odometer over the box
        let mut k = d;
        loop {
            if k == 0 {
                return Ok(best);
            }
            k -= 1;
            if c[k] < bounds[k] {
                c[k] += 1;
                for v in c[k + 1..].iter_mut().zip(&bounds[k + 1..]) {
                    *v.0 = -v.1;
                }
                break;
            }
        }
    }
}

/// Γ from the population vectors of return words, with L = Γ* and its constants.
///
/// `a` is the matrix acting on L (the transpose of the substitution matrix).
pub fn build_lattice(rws: &ReturnWordSet, a: &IntMatrix) -> Result<LatticePair, LatticeError> {
    build_lattice_from_populations(&rws.populations(), a, DEFAULT_ENUM_BUDGET)
}

pub fn build_lattice_from_populations(
    pops: &[Vec<i64>],
    a: &IntMatrix,
    budget: u64,
) -> Result<LatticePair, LatticeError> {
    let d = a.rows();
    let basis = hnf_basis(pops, d);
    if basis.len() < d {
        return Err(LatticeError::Rank { rank: basis.len(), d });
    }
    let gamma = IntMatrix::from_cols(&basis);
    let lp = LatticePair::from_gamma(gamma, a, budget)?;
    if !lp.is_invariant(&a.transpose()) {
        return Err(LatticeError::NotInvariant);
    }
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye(d: usize) -> IntMatrix {
        IntMatrix::identity(d)
    }

    fn r(p: usize, x: f64) -> Real {
        hp::from_f64(p, x)
    }

    #[test]
    fn duality_and_constants() {
        let z2 = build_lattice_from_populations(&[vec![1, 0], vec![1, 1]], &eye(2), 1000).unwrap();
        assert_eq!(z2.gamma, eye(2));
        assert_eq!(z2.a_l.to_f64(), 1.0);
        assert_eq!(z2.b_l.to_f64(), 1.0);
        let half = build_lattice_from_populations(&[vec![2, 0], vec![0, 2]], &eye(2), 1000).unwrap();
        assert_eq!(half.dual_real(64)[0][0], hp::ratio(64, 1, 2));
        assert_eq!(half.a_l.to_f64(), 0.5);
        assert_eq!(half.b_l.to_f64(), 0.5);
        assert!(matches!(
            build_lattice_from_populations(&[vec![1, 1]], &eye(2), 1000),
            Err(LatticeError::Rank { rank: 1, d: 2 })
        ));
        let tall = LatticePair::from_gamma(IntMatrix::from_rows(&[vec![1, 0], vec![0, 2]]), &eye(2), 1000).unwrap();
        // L = diag(1, 1/2)
        assert_eq!(tall.b_l.to_f64(), 0.75);
        let skew = LatticePair::from_dual(&[vec![2, 1], vec![0, 1]], 2, &eye(2), 1000).unwrap();
        assert_eq!(skew.a_l.to_f64(), 0.5);
        let big = |v: i64| IBig::from(v);
        let cov = covering_radius_bound(&[vec![big(1), big(0)], vec![big(0), big(2)]], &big(1));
        assert_eq!(cov.to_f64(), 1.5);
    }

    #[test]
    fn nearest_examples() {
        let z2 = LatticePair::integer(2, &eye(2)).unwrap();
        let t = z2.nearest_point(&[r(128, 0.4), r(128, -0.3)]);
        assert_eq!(t.coords, vec![IBig::ZERO, IBig::ZERO]);
        assert!((hp::to_f64(&t.dist) - 0.4).abs() < 1e-15);
        let t = z2.nearest_point(&[r(128, 0.5), r(128, 0.0)]);
        assert_eq!(t.coords, vec![IBig::ZERO, IBig::ZERO]);
        assert_eq!(hp::to_f64(&t.dist), 0.5);
        let half = LatticePair::from_dual(&[vec![1, 0], vec![0, 1]], 2, &eye(2), 1000).unwrap();
        let t = half.nearest_point(&[r(128, 0.6), r(128, 0.6)]);
        assert_eq!(hp::to_f64(&t.nearest[0]), 0.5);
        assert!((hp::to_f64(&t.dist) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn action_and_invariance() {
        let a = IntMatrix::from_rows(&[vec![1, 1], vec![1, 0]]);
        let lp = LatticePair::from_dual(&[vec![1, 0], vec![0, 1]], 2, &a, 1000).unwrap();
        assert_eq!(lp.action_in_coords(&a).unwrap(), a);
        assert!(lp.is_invariant(&a));
        // Γ spanned by (1,0),(0,2) is not invariant under [[1,1],[1,0]]
        let g = LatticePair::from_gamma(IntMatrix::from_rows(&[vec![1, 0], vec![0, 2]]), &a, 1000).unwrap();
        assert!(!g.is_invariant(&a));
    }
}
