//! Integer polynomials, certified roots, Pisot/Salem classification and eigenbases.

use dashu_int::IBig;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::hp::{self, Complex, Precision, PrecisionError, Real};
use crate::matrix::{det_big, IntMatrix};

pub const DEGREE_CAP: usize = 12;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("degree {0} exceeds the cap of {DEGREE_CAP}")]
    Degree(usize),
    #[error("polynomial must be monic with degree at least 1")]
    NotMonic,
    #[error("cannot parse polynomial: {0}")]
    Parse(String),
    #[error("root isolation failed: {0}")]
    RootIsolation(String),
    #[error("spectrum is degenerate: {0}")]
    DegenerateSpectrum(String),
    #[error("characteristic polynomial overflowed 128-bit arithmetic")]
    Overflow,
    #[error(transparent)]
    Precision(#[from] PrecisionError),
}

/// Integer polynomial, coefficients from the constant term up.
pub type Poly = Vec<i64>;

pub fn parse_poly(text: &str) -> Result<Poly, AlgebraError> {
    let p: Poly = text
        .split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|_| AlgebraError::Parse(format!("`{}`", t.trim()))))
        .collect::<Result<_, _>>()?;
    check_monic(&p)?;
    Ok(p)
}

pub fn poly_to_string(p: &[i64]) -> String {
    p.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

fn check_monic(p: &[i64]) -> Result<(), AlgebraError> {
    if p.len() < 2 || *p.last().unwrap() != 1 {
        return Err(AlgebraError::NotMonic);
    }
    Ok(())
}

pub fn degree(p: &[i64]) -> usize {
    p.len() - 1
}

pub fn height(p: &[i64]) -> i64 {
    p.iter().map(|c| c.abs()).max().unwrap_or(0)
}

pub fn is_palindromic(p: &[i64]) -> bool {
    let d = p.len() - 1;
    (0..=d).all(|i| p[i] == p[d - i])
}

/// det(xI - S) by Faddeev-LeVerrier in checked 128-bit arithmetic.
pub fn charpoly(s: &IntMatrix) -> Result<Poly, AlgebraError> {
    assert!(s.is_square());
    let n = s.rows();
    let a: Vec<Vec<i128>> = s.to_rows().into_iter().map(|r| r.into_iter().map(i128::from).collect()).collect();
    let mut c = vec![0i128; n + 1];
    c[n] = 1;
    let mut m = vec![vec![0i128; n]; n];
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = vec![vec![0i128; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc: i128 = 0;
                for l in 0..n {
                    acc = acc
                        .checked_add(a[i][l].checked_mul(m[l][j]).ok_or(AlgebraError::Overflow)?)
                        .ok_or(AlgebraError::Overflow)?;
                }
                if i == j {
                    acc = acc.checked_add(c[n - k + 1]).ok_or(AlgebraError::Overflow)?;
                }
                next[i][j] = acc;
            }
        }
        m = next;
        let mut tr: i128 = 0;
        for i in 0..n {
            for l in 0..n {
                tr = tr
                    .checked_add(a[i][l].checked_mul(m[l][i]).ok_or(AlgebraError::Overflow)?)
                    .ok_or(AlgebraError::Overflow)?;
            }
        }
        c[n - k] = -tr / k as i128;
    }
    c.into_iter().map(|x| i64::try_from(x).map_err(|_| AlgebraError::Overflow)).collect()
}

/// Companion matrix whose eigenvectors are the power vectors (1, r, ..., r^{d-1}).
pub fn companion(p: &[i64]) -> IntMatrix {
    let d = degree(p);
    let mut m = IntMatrix::zeros(d, d);
    for i in 0..d - 1 {
        m.set(i, i + 1, 1);
    }
    for j in 0..d {
        m.set(d - 1, j, -p[j]);
    }
    m
}

fn derivative(p: &[i64]) -> Poly {
    (1..p.len()).map(|i| p[i] * i as i64).collect()
}

/// Resultant of p and p'; zero exactly when p has a repeated root.
pub fn discriminant_resultant(p: &[i64]) -> IBig {
    let dp = derivative(p);
    let m = p.len() - 1;
    let n = dp.len() - 1;
    let size = m + n;
    if size == 0 {
        return IBig::ONE;
    }
    let mut syl = vec![vec![IBig::ZERO; size]; size];
    // rows hold coefficients from the leading term down
    for r in 0..n {
        for (k, c) in p.iter().rev().enumerate() {
            syl[r][r + k] = IBig::from(*c);
        }
    }
    for r in 0..m {
        for (k, c) in dp.iter().rev().enumerate() {
            syl[n + r][r + k] = IBig::from(*c);
        }
    }
    det_big(syl)
}

/// Landau-Mignotte bound: every coefficient of every monic integer factor is at most this.
pub fn landau_mignotte(p: &[i64]) -> f64 {
    let d = degree(p);
    let norm2 = p.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt();
    (0..=d).map(|k| binom(d, k) * norm2).fold(0.0, f64::max)
}

fn binom(n: usize, k: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b
}

/// Exact division of monic integer polynomials; returns the quotient when the remainder is zero.
pub fn divide_exact(p: &[i64], q: &[i64]) -> Option<Poly> {
    let dp = degree(p);
    let dq = degree(q);
    if dq > dp || *q.last()? != 1 {
        return None;
    }
    let mut r: Vec<i128> = p.iter().map(|&x| x as i128).collect();
    let mut quot = vec![0i128; dp - dq + 1];
    for k in (0..=dp - dq).rev() {
        let lead = r[k + dq];
        quot[k] = lead;
        for i in 0..=dq {
            r[k + i] -= lead * q[i] as i128;
        }
    }
    if r.iter().any(|&x| x != 0) {
        return None;
    }
    quot.into_iter().map(|x| i64::try_from(x).ok()).collect()
}

/// Decides irreducibility over Q for monic integer polynomials of degree at most 12.
///
/// A repeated root or a zero constant term settles it directly. Otherwise every monic
/// factor of degree k <= d/2 has as roots some k-subset of the roots of p; each subset
/// gives candidate coefficients that are rounded, screened against the Landau-Mignotte
/// bound and confirmed by exact division.
pub fn is_irreducible(p: &[i64]) -> Result<bool, AlgebraError> {
    check_monic(p)?;
    let d = degree(p);
    if d > DEGREE_CAP {
        return Err(AlgebraError::Degree(d));
    }
    if d == 1 {
        return Ok(true);
    }
    if p[0] == 0 || discriminant_resultant(p) == IBig::ZERO {
        return Ok(false);
    }
    Ok(find_factor(p)?.is_none())
}

/// A nontrivial monic factor of a squarefree p, if any.
pub fn find_factor(p: &[i64]) -> Result<Option<Poly>, AlgebraError> {
    let d = degree(p);
    let bits = 192;
    let roots = certified_roots(p, Precision::new(bits)?)?;
    let approx: Vec<(f64, f64)> = roots.roots.iter().map(|z| z.to_f64()).collect();
    let bound = landau_mignotte(p);
    let mut idx = Vec::new();
    for k in 1..=d / 2 {
        if let Some(f) = subsets(&approx, k, 0, &mut idx, p, bound) {
            return Ok(Some(f));
        }
    }
    Ok(None)
}

fn subsets(roots: &[(f64, f64)], k: usize, start: usize, idx: &mut Vec<usize>, p: &[i64], bound: f64) -> Option<Poly> {
    if idx.len() == k {
        return candidate_factor(roots, idx, p, bound);
    }
    for i in start..roots.len() {
        idx.push(i);
        if let Some(f) = subsets(roots, k, i + 1, idx, p, bound) {
            return Some(f);
        }
        idx.pop();
    }
    None
}

fn candidate_factor(roots: &[(f64, f64)], idx: &[usize], p: &[i64], bound: f64) -> Option<Poly> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &i in idx {
        let r = Complex64::new(roots[i].0, roots[i].1);
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (j, cj) in c.iter().enumerate() {
            next[j + 1] += cj;
            next[j] -= cj * r;
        }
        c = next;
    }
    let mut q = Vec::with_capacity(c.len());
    for z in &c {
        let re = z.re.round();
        if (z.re - re).abs() > 1e-6 * (1.0 + re.abs()) || z.im.abs() > 1e-6 * (1.0 + re.abs()) || re.abs() > bound {
            return None;
        }
        q.push(re as i64);
    }
    divide_exact(p, &q).map(|_| q)
}

fn eval_c64(p: &[i64], z: Complex64) -> (Complex64, Complex64) {
    let mut v = Complex64::new(0.0, 0.0);
    let mut dv = Complex64::new(0.0, 0.0);
    for &c in p.iter().rev() {
        dv = dv * z + v;
        v = v * z + c as f64;
    }
    (v, dv)
}

/// Simultaneous Aberth-Ehrlich iteration in double precision.
pub fn aberth_f64(p: &[i64]) -> Vec<Complex64> {
    let d = degree(p);
    let cauchy = 1.0 + p[..d].iter().map(|&c| (c as f64).abs()).fold(0.0, f64::max);
    let r0 = cauchy.min(1.0 + p[..d].iter().map(|&c| (c as f64).abs()).sum::<f64>()).max(1.0) * 0.9;
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| Complex64::from_polar(r0, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / d as f64 + 0.4))
        .collect();
    for _ in 0..2000 {
        let mut worst: f64 = 0.0;
        for i in 0..d {
            let (v, dv) = eval_c64(p, z[i]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / dv;
            let s: Complex64 = (0..d).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let w = ratio / (1.0 - ratio * s);
            z[i] -= w;
            worst = worst.max(w.norm() / (1.0 + z[i].norm()));
        }
        if worst < 1e-15 {
            break;
        }
    }
    z
}

fn eval_hp(p: &[i64], z: &Complex, prec: usize) -> Complex {
    let mut v = Complex::zero(prec);
    for &c in p.iter().rev() {
        v = &(&v * z) + &Complex::real(hp::int(prec, c));
    }
    v
}

/// Roots with disjoint inclusion discs D(z_i, d|W_i|), W_i the Weierstrass corrections.
#[derive(Debug, Clone)]
pub struct CertifiedRoots {
    pub roots: Vec<Complex>,
    pub radii: Vec<Real>,
}

pub fn certified_roots(p: &[i64], prec: Precision) -> Result<CertifiedRoots, AlgebraError> {
    check_monic(p)?;
    let d = degree(p);
    let bits = prec.bits();
    let wp = bits + 64;
    let mut z: Vec<Complex> = aberth_f64(p).into_iter().map(|c| Complex::from_f64(wp, c.re, c.im)).collect();
    let target = hp::pow2(wp, -(bits as isize) - 8);
    let mut w = vec![Complex::zero(wp); d];
    for _ in 0..200 {
        for i in 0..d {
            let mut den = Complex::one(wp);
            for j in 0..d {
                if j != i {
                    den = &den * &(&z[i] - &z[j]);
                }
            }
            if den.norm_sqr() == hp::int(wp, 0) {
                return Err(AlgebraError::RootIsolation("coincident approximations".into()));
            }
            w[i] = eval_hp(p, &z[i], wp).div(&den);
        }
        for i in 0..d {
            z[i] = &z[i] - &w[i];
        }
        let worst = w.iter().map(|x| x.abs()).fold(hp::int(wp, 0), |a, b| hp::max(&a, &b));
        if worst < target {
            break;
        }
    }
    // final corrections at the converged points give the certificate
    let mut radii = Vec::with_capacity(d);
    for i in 0..d {
        let mut den = Complex::one(wp);
        for j in 0..d {
            if j != i {
                den = &den * &(&z[i] - &z[j]);
            }
        }
        let wi = eval_hp(p, &z[i], wp).div(&den);
        radii.push(wi.abs() * hp::int(wp, d as i64) + hp::pow2(wp, -(wp as isize) + 8));
    }
    for i in 0..d {
        for j in i + 1..d {
            let gap = (&z[i] - &z[j]).abs();
            if gap <= &radii[i] + &radii[j] {
                return Err(AlgebraError::RootIsolation(format!("discs {i} and {j} overlap")));
            }
        }
    }
    let accuracy = prec.tol(2);
    if radii.iter().any(|r| r > &accuracy) {
        return Err(AlgebraError::RootIsolation("inclusion radius above 2^(-P/2)".into()));
    }
    // a disc that contains its own mirror image holds a real root
    for i in 0..d {
        if hp::abs(&z[i].im) <= radii[i] {
            z[i].im = hp::int(wp, 0);
        }
    }
    Ok(CertifiedRoots {
        roots: z.into_iter().map(|c| c.with_precision(bits)).collect(),
        radii: radii.into_iter().map(|r| r.with_precision(bits).value()).collect(),
    })
}

/// Dominant real root first, other real roots by decreasing modulus, then conjugate
/// pairs by decreasing modulus with the upper half-plane member first.
pub fn order_roots(roots: &CertifiedRoots) -> Result<(Vec<Complex>, Vec<Real>), AlgebraError> {
    let n = roots.roots.len();
    let zero = hp::int(64, 0);
    let mut real: Vec<usize> = (0..n).filter(|&i| roots.roots[i].im == zero).collect();
    let mut upper: Vec<usize> = (0..n).filter(|&i| roots.roots[i].im > zero).collect();
    let lower: Vec<usize> = (0..n).filter(|&i| roots.roots[i].im < zero).collect();
    if upper.len() != lower.len() {
        return Err(AlgebraError::RootIsolation("non-real roots do not pair up".into()));
    }
    let modulus = |i: usize| roots.roots[i].abs();
    real.sort_by(|&a, &b| modulus(b).partial_cmp(&modulus(a)).unwrap());
    // the dominant real root is the largest one, not the one of largest modulus
    if let Some(pos) =
        (0..real.len()).max_by(|&a, &b| roots.roots[real[a]].re.partial_cmp(&roots.roots[real[b]].re).unwrap())
    {
        let top = real.remove(pos);
        real.insert(0, top);
    }
    upper.sort_by(|&a, &b| {
        modulus(b).partial_cmp(&modulus(a)).unwrap().then(roots.roots[b].re.partial_cmp(&roots.roots[a].re).unwrap())
    });
    let mut order = real;
    for &u in &upper {
        let target = roots.roots[u].conj();
        let l = *lower
            .iter()
            .min_by(|&&a, &&b| {
                (&roots.roots[a] - &target).abs().partial_cmp(&(&roots.roots[b] - &target).abs()).unwrap()
            })
            .unwrap();
        order.push(u);
        order.push(l);
    }
    let mut out = Vec::with_capacity(n);
    let mut rad = Vec::with_capacity(n);
    for i in order {
        out.push(roots.roots[i].clone());
        rad.push(roots.radii[i].clone());
    }
    // make each pair exact conjugates of the upper member
    let first_pair = out.iter().take_while(|z| z.im == zero).count();
    let mut k = first_pair;
    while k + 1 < n {
        out[k + 1] = out[k].conj();
        k += 2;
    }
    Ok((out, rad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Pisot,
    Salem,
    Other,
    Reducible,
}

#[derive(Debug, Clone)]
pub struct NumberProfile {
    pub charpoly: Poly,
    /// Ordered roots; empty for reducible polynomials.
    pub roots: Vec<Complex>,
    pub radii: Vec<Real>,
    pub classification: Classification,
    pub height: i64,
    pub degree: usize,
    pub precision: Precision,
}

impl NumberProfile {
    pub fn alpha(&self) -> &Real {
        &self.roots[0].re
    }

    pub fn alpha_f64(&self) -> f64 {
        hp::to_f64(self.alpha())
    }

    pub fn log2_alpha(&self) -> f64 {
        self.alpha_f64().log2()
    }

    pub fn is_salem(&self) -> bool {
        self.classification == Classification::Salem
    }

    pub fn is_pisot(&self) -> bool {
        self.classification == Classification::Pisot
    }

    /// Roots recomputed at a new precision, keeping the ordering convention.
    pub fn at_precision(&self, prec: Precision) -> Result<NumberProfile, AlgebraError> {
        classify(&self.charpoly, prec)
    }

    pub fn roots_f64(&self) -> Vec<(f64, f64)> {
        self.roots.iter().map(|z| z.to_f64()).collect()
    }
}

pub fn classify(p: &[i64], prec: Precision) -> Result<NumberProfile, AlgebraError> {
    let d = degree(p);
    let base = NumberProfile {
        charpoly: p.to_vec(),
        roots: Vec::new(),
        radii: Vec::new(),
        classification: Classification::Reducible,
        height: height(p),
        degree: d,
        precision: prec,
    };
    if !is_irreducible(p)? {
        return Ok(base);
    }
    let cert = certified_roots(p, prec)?;
    let (roots, radii) = order_roots(&cert)?;
    let bits = prec.bits();
    let zero = hp::int(bits, 0);
    let one = hp::int(bits, 1);
    let margin = prec.tol(4);
    let alpha_ok = roots[0].im == zero && roots[0].re > &one + &margin;
    let moduli: Vec<Real> = roots.iter().skip(1).map(|z| z.abs()).collect();
    let classification = if !alpha_ok {
        Classification::Other
    } else if moduli.iter().all(|m| m < &(&one - &margin)) {
        Classification::Pisot
    } else if d >= 4
        && is_palindromic(p)
        && moduli.iter().all(|m| m <= &(&one + &margin))
        && moduli.iter().any(|m| hp::abs(&(m - &one)) <= margin)
    {
        Classification::Salem
    } else {
        Classification::Other
    };
    Ok(NumberProfile { roots, radii, classification, ..base })
}

/// σ_j(x) = Σ x_i α_j^i.
pub fn embed(x: &[IBig], profile: &NumberProfile, j: usize) -> Complex {
    let r = &profile.roots[j];
    let p = r.precision();
    let mut acc = Complex::zero(p);
    for c in x.iter().rev() {
        acc = &(&acc * r) + &Complex::real(hp::big(p, c));
    }
    acc
}

pub fn embed_i64(x: &[i64], profile: &NumberProfile, j: usize) -> Complex {
    let xb: Vec<IBig> = x.iter().map(|&c| IBig::from(c)).collect();
    embed(&xb, profile, j)
}

/// Coefficients of α^n in the power basis 1, α, ..., α^{d-1}.
pub fn power_basis_power(n: u64, p: &[i64]) -> Vec<IBig> {
    let d = degree(p);
    let mut v = vec![IBig::ZERO; d];
    v[0] = IBig::ONE;
    for _ in 0..n {
        v = times_alpha(&v, p);
    }
    v
}

/// Multiplies an element of Z[α] (power-basis coefficients) by α.
pub fn times_alpha(v: &[IBig], p: &[i64]) -> Vec<IBig> {
    let d = v.len();
    let top = v[d - 1].clone();
    let mut out = vec![IBig::ZERO; d];
    for i in (1..d).rev() {
        out[i] = v[i - 1].clone();
    }
    if top != IBig::ZERO {
        for i in 0..d {
            out[i] -= &top * IBig::from(p[i]);
        }
    }
    out
}

/// Power sums Tr(α^k) for k = 0..n, exact, by Newton's identities and the recurrence.
pub fn power_sums(p: &[i64], n: usize) -> Vec<IBig> {
    let d = degree(p);
    let a: Vec<IBig> = p.iter().map(|&c| IBig::from(c)).collect();
    let mut s = vec![IBig::ZERO; n + 1];
    s[0] = IBig::from(d);
    for k in 1..=n {
        let mut acc = IBig::ZERO;
        for i in 1..k.min(d + 1) {
            acc -= &a[d - i] * &s[k - i];
        }
        if k <= d {
            acc -= IBig::from(k) * &a[d - k];
        }
        s[k] = acc;
    }
    s
}

/// Eigenvectors e_j of A and e*_j of A^T with ⟨e_k, e*_j⟩ = δ_kj (bilinear pairing).
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub a: IntMatrix,
    pub values: Vec<Complex>,
    pub e: Vec<Vec<Complex>>,
    pub e_star: Vec<Vec<Complex>>,
    pub precision: Precision,
}

impl EigenSystem {
    pub fn d(&self) -> usize {
        self.values.len()
    }

    /// ⟨x, e*_j⟩ for a real vector x.
    pub fn coord(&self, x: &[Real], j: usize) -> Complex {
        let p = self.precision.bits();
        let mut acc = Complex::zero(p);
        for (xi, ei) in x.iter().zip(&self.e_star[j]) {
            acc = &acc + &ei.scale(xi);
        }
        acc
    }

    /// ℓ1 norm of e*_j.
    pub fn dual_l1(&self, j: usize) -> Real {
        let p = self.precision.bits();
        self.e_star[j].iter().fold(hp::int(p, 0), |acc, z| acc + z.abs())
    }

    /// Largest |⟨e_k, e*_j⟩ - δ_kj|.
    pub fn duality_residual(&self) -> Real {
        let p = self.precision.bits();
        let d = self.d();
        let mut worst = hp::int(p, 0);
        for k in 0..d {
            for j in 0..d {
                let mut acc = Complex::zero(p);
                for i in 0..d {
                    acc = &acc + &(&self.e[k][i] * &self.e_star[j][i]);
                }
                if k == j {
                    acc = &acc - &Complex::one(p);
                }
                worst = hp::max(&worst, &acc.abs());
            }
        }
        worst
    }

    /// Largest ‖A e_j - α_j e_j‖∞.
    pub fn eigen_residual(&self) -> Real {
        let p = self.precision.bits();
        let d = self.d();
        let mut worst = hp::int(p, 0);
        for j in 0..d {
            for i in 0..d {
                let mut acc = Complex::zero(p);
                for k in 0..d {
                    let a = self.a.get(i, k);
                    if a != 0 {
                        acc = &acc + &self.e[j][k].scale(&hp::int(p, a));
                    }
                }
                acc = &acc - &(&self.values[j] * &self.e[j][i]);
                worst = hp::max(&worst, &acc.abs());
            }
        }
        worst
    }
}

pub fn eigensystem(a: &IntMatrix, profile: &NumberProfile) -> Result<EigenSystem, AlgebraError> {
    if profile.roots.is_empty() {
        return Err(AlgebraError::DegenerateSpectrum("profile has no isolated roots".into()));
    }
    let cp = charpoly(a)?;
    if cp != profile.charpoly {
        return Err(AlgebraError::DegenerateSpectrum(format!(
            "matrix has characteristic polynomial {} but the profile is for {}",
            poly_to_string(&cp),
            poly_to_string(&profile.charpoly)
        )));
    }
    let prec = profile.precision;
    let p = prec.bits();
    let wp = p + 64;
    let at = a.transpose();
    let d = a.rows();
    let mut e = Vec::with_capacity(d);
    let mut es = Vec::with_capacity(d);
    for lam in &profile.roots {
        let lam = lam.with_precision(wp);
        let mut v = kernel_vector(a, &lam, wp)?;
        let first = v[0].clone();
        if first.abs() == hp::int(wp, 0) {
            return Err(AlgebraError::DegenerateSpectrum("eigenvector with a zero first entry".into()));
        }
        let inv = first.inv();
        v = v.iter().map(|x| x * &inv).collect();
        let mut w = kernel_vector(&at, &lam, wp)?;
        let mut dot = Complex::zero(wp);
        for i in 0..d {
            dot = &dot + &(&v[i] * &w[i]);
        }
        if dot.abs() == hp::int(wp, 0) {
            return Err(AlgebraError::DegenerateSpectrum("left and right eigenvectors are orthogonal".into()));
        }
        let inv = dot.inv();
        w = w.iter().map(|x| x * &inv).collect();
        e.push(v.into_iter().map(|x| x.with_precision(p)).collect());
        es.push(w.into_iter().map(|x| x.with_precision(p)).collect());
    }
    let sys = EigenSystem { a: a.clone(), values: profile.roots.clone(), e, e_star: es, precision: prec };
    let tol = prec.tol(2);
    if sys.duality_residual() > tol || sys.eigen_residual() > tol {
        return Err(AlgebraError::DegenerateSpectrum("eigenbasis residual above 2^(-P/2)".into()));
    }
    Ok(sys)
}

/// Null vector of A - λI by full-pivot elimination.
fn kernel_vector(a: &IntMatrix, lam: &Complex, wp: usize) -> Result<Vec<Complex>, AlgebraError> {
    let d = a.rows();
    let mut m: Vec<Vec<Complex>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let x = Complex::real(hp::int(wp, a.get(i, j)));
                    if i == j {
                        &x - lam
                    } else {
                        x
                    }
                })
                .collect()
        })
        .collect();
    let mut cols: Vec<usize> = (0..d).collect();
    for k in 0..d - 1 {
        let mut best = (k, k);
        let mut best_abs = hp::int(wp, -1);
        for i in k..d {
            for j in k..d {
                let v = m[i][j].norm_sqr();
                if v > best_abs {
                    best_abs = v;
                    best = (i, j);
                }
            }
        }
        if best_abs == hp::int(wp, 0) {
            return Err(AlgebraError::DegenerateSpectrum("eigenvalue has a multi-dimensional eigenspace".into()));
        }
        m.swap(k, best.0);
        for row in m.iter_mut() {
            row.swap(k, best.1);
        }
        cols.swap(k, best.1);
        let piv = m[k][k].inv();
        for i in k + 1..d {
            let f = &m[i][k] * &piv;
            for j in k..d {
                let t = &f * &m[k][j];
                m[i][j] = &m[i][j] - &t;
            }
        }
    }
    // last permuted coordinate is free
    let mut y = vec![Complex::zero(wp); d];
    y[d - 1] = Complex::one(wp);
    for k in (0..d - 1).rev() {
        let mut acc = Complex::zero(wp);
        for j in k + 1..d {
            acc = &acc + &(&m[k][j] * &y[j]);
        }
        y[k] = (-&acc).div(&m[k][k]);
    }
    let mut x = vec![Complex::zero(wp); d];
    for (k, &c) in cols.iter().enumerate() {
        x[c] = y[k].clone();
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SALEM: [i64; 5] = [1, -1, -1, -1, 1];

    #[test]
    fn charpoly_examples() {
        assert_eq!(charpoly(&IntMatrix::from_rows(&[vec![1, 1], vec![1, 0]])).unwrap(), vec![-1, -1, 1]);
        assert_eq!(charpoly(&IntMatrix::from_rows(&[vec![1, 1], vec![1, 1]])).unwrap(), vec![0, -2, 1]);
        assert_eq!(charpoly(&IntMatrix::from_rows(&[vec![2]])).unwrap(), vec![-2, 1]);
        assert_eq!(charpoly(&companion(&SALEM)).unwrap(), SALEM.to_vec());
    }

    #[test]
    fn parse_roundtrip() {
        assert_eq!(parse_poly("1,-1,-1,-1,1").unwrap(), SALEM.to_vec());
        assert!(parse_poly("1,2").is_err());
        assert!(parse_poly("1,x,1").is_err());
        assert_eq!(poly_to_string(&SALEM), "1,-1,-1,-1,1");
    }

    // brute force over monic quadratic and linear factors within the coefficient bound
    fn has_small_factor(p: &[i64]) -> bool {
        let b = landau_mignotte(p).ceil() as i64;
        for c0 in -b..=b {
            if divide_exact(p, &[c0, 1]).is_some() {
                return true;
            }
            for c1 in -b..=b {
                if divide_exact(p, &[c0, c1, 1]).is_some() {
                    return true;
                }
            }
        }
        false
    }

    #[test]
    fn irreducibility() {
        assert!(is_irreducible(&[-1, -1, 1]).unwrap());
        assert!(!is_irreducible(&[0, -2, 1]).unwrap());
        assert!(is_irreducible(&SALEM).unwrap());
        assert!(!has_small_factor(&SALEM));
        // (x^2+1)(x^2-x-1)
        let prod = [-1, -1, 0, -1, 1];
        assert!(!is_irreducible(&prod).unwrap());
        assert!(has_small_factor(&prod));
        assert_eq!(find_factor(&prod).unwrap().map(|f| f.len()), Some(3));
        // repeated root
        assert!(!is_irreducible(&[1, -2, 1]).unwrap());
        assert!(matches!(is_irreducible(&[1; 14]), Err(AlgebraError::Degree(13))));
    }

    #[test]
    fn classifications() {
        let prec = Precision::new(256).unwrap();
        let g = classify(&[-1, -1, 1], prec).unwrap();
        assert_eq!(g.classification, Classification::Pisot);
        assert!((g.alpha_f64() - 1.618_033_988_749_895).abs() < 1e-12);
        let s = classify(&SALEM, prec).unwrap();
        assert_eq!(s.classification, Classification::Salem);
        assert!((s.alpha_f64() - 1.722_083_805_739_042).abs() < 1e-12);
        let prod = &s.roots[0].re * &s.roots[1].re - hp::int(256, 1);
        assert!(hp::to_f64(&hp::abs(&prod)) < 1e-60);
        assert!(s.roots[2].im > hp::int(64, 0));
        assert_eq!(s.roots[3], s.roots[2].conj());
        assert_eq!(classify(&[0, -2, 1], prec).unwrap().classification, Classification::Reducible);
        // x^3 - x - 1, the smallest Pisot number
        assert_eq!(classify(&[-1, -1, 0, 1], prec).unwrap().classification, Classification::Pisot);
        // x^2 - 3x + 1 has conjugate 0.38.. so it is Pisot; x^2 - x - 3 is not
        assert_eq!(classify(&[-3, -1, 1], prec).unwrap().classification, Classification::Other);
    }

    #[test]
    fn trace_identity() {
        let prec = Precision::new(256).unwrap();
        let s = classify(&SALEM, prec).unwrap();
        let sum = s.roots.iter().fold(Complex::zero(256), |a, z| &a + z);
        assert!(hp::to_f64(&hp::abs(&(&sum.re - hp::int(256, 1)))) < 1e-60);
        // Tr(1 + α) = 4 + Tr(α) = 5
        let x = [1i64, 1, 0, 0];
        let tr = (0..4).fold(Complex::zero(256), |a, j| &a + &embed_i64(&x, &s, j));
        assert!((hp::to_f64(&tr.re) - 5.0).abs() < 1e-60);
    }

    #[test]
    fn power_basis() {
        assert_eq!(power_basis_power(0, &[-1, -1, 1]), vec![IBig::ONE, IBig::ZERO]);
        assert_eq!(power_basis_power(1, &[-1, -1, 1]), vec![IBig::ZERO, IBig::ONE]);
        assert_eq!(power_basis_power(5, &[-1, -1, 1]), vec![IBig::from(3), IBig::from(5)]);
    }

    #[test]
    fn newton_power_sums() {
        // golden ratio: Lucas numbers
        let s = power_sums(&[-1, -1, 1], 8);
        let lucas: Vec<IBig> = [2, 1, 3, 4, 7, 11, 18, 29, 47].iter().map(|&x| IBig::from(x)).collect();
        assert_eq!(s, lucas);
        // brute force against the numeric roots
        let prof = classify(&SALEM, Precision::new(128).unwrap()).unwrap();
        let s = power_sums(&SALEM, 12);
        for k in 0..=12u64 {
            let t = prof.roots.iter().fold(Complex::zero(128), |a, z| &a + &z.powu(k));
            assert!((hp::to_f64(&t.re) - s[k as usize].to_string().parse::<f64>().unwrap()).abs() < 1e-20, "k={k}");
        }
    }

    #[test]
    fn companion_eigensystem() {
        let prec = Precision::new(256).unwrap();
        let prof = classify(&SALEM, prec).unwrap();
        let sys = eigensystem(&companion(&SALEM), &prof).unwrap();
        assert!(hp::to_f64(&sys.duality_residual()) < 1e-30);
        for j in 0..4 {
            let r = &prof.roots[j];
            let diff = &sys.e[j][2] - &(r * r);
            assert!(hp::to_f64(&diff.abs()) < 1e-60);
        }
        let g = classify(&[-1, -1, 1], prec).unwrap();
        let sys = eigensystem(&companion(&[-1, -1, 1]), &g).unwrap();
        assert!((hp::to_f64(&sys.e[0][1].re) - 1.618_033_988_749_895).abs() < 1e-14);
    }
}
