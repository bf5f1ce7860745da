use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fourier::{fourier, BernoulliSpec};
use super::BernoulliError;
use crate::algebra::{eigensystem, EigenSystem, NumberProfile};
use crate::hp::{self, Complex, Precision, Real};
use crate::matrix::IntMatrix;

/// |det M| for M = (τ(1), τ(α), ..., τ(α^{d-1}))^T, next to the Vandermonde product it reduces to.
#[derive(Debug, Clone, Serialize)]
pub struct DetM {
    pub abs_det: f64,
    pub abs_det_decimal: String,
    /// Π_{i<j} |x_j - x_i| over the embeddings.
    pub vandermonde: f64,
    /// |Vandermonde| / |det M| = 2^m, m the number of complex pairs.
    pub column_factor: f64,
    /// Relative mismatch between |det M|·2^m and the Vandermonde product.
    pub relative_gap: f64,
}

/// Embedding columns for a power α^i given as the tuple of its conjugates x_k = σ_k(α)^i:
/// (x_0, C_2 x_0 - x_1, Re(C_3 x_0 - x_2), Im(C_3 x_0 - x_2), ...).
fn tau_columns(x: &[Complex], c: &[Complex]) -> Vec<Complex> {
    let d = x.len();
    let mut cols = Vec::with_capacity(d);
    cols.push(x[0].clone());
    cols.push(&(&c[1] * &x[0]) - &x[1]);
    let mut k = 2;
    while k + 1 < d + 1 && k < d {
        cols.push(&(&c[k] * &x[0]) - &x[k]);
        k += 2;
    }
    cols
}

fn tau_row_real(x: &[Complex], c: &[Complex]) -> Vec<Real> {
    let cols = tau_columns(x, c);
    let mut row = vec![cols[0].re.clone(), cols[1].re.clone()];
    for z in &cols[2..] {
        row.push(z.re.clone());
        row.push(z.im.clone());
    }
    row
}

fn det_real(mut m: Vec<Vec<Real>>, bits: usize) -> Real {
    let n = m.len();
    let mut det = hp::int(bits, 1);
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| hp::abs(&m[a][col]).partial_cmp(&hp::abs(&m[b][col])).unwrap()).unwrap();
        if m[piv][col] == hp::int(bits, 0) {
            return hp::int(bits, 0);
        }
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        det = &det * &m[col][col];
        for r in col + 1..n {
            let f = &m[r][col] / &m[col][col];
            for k in col..n {
                let t = &f * &m[col][k];
                m[r][k] = &m[r][k] - &t;
            }
        }
    }
    det
}

/// det M for an explicit list of embeddings: two real ones (α, then 1/α) followed by
/// complex pairs with the upper member first, and roof coefficients C_j in the same order.
pub fn det_m_nodes(nodes: &[Complex], c: &[Complex], bits: usize) -> Result<DetM, BernoulliError> {
    let d = nodes.len();
    if d < 2 || !d.is_multiple_of(2) || c.len() != d {
        return Err(BernoulliError::Domain(format!(
            "need an even number of embeddings and matching C, got {d} and {}",
            c.len()
        )));
    }
    let mut pows: Vec<Complex> = vec![Complex::one(bits); d];
    let mut rows = Vec::with_capacity(d);
    for _ in 0..d {
        rows.push(tau_row_real(&pows, c));
        pows = pows.iter().zip(nodes).map(|(p, x)| p * x).collect();
    }
    let det = hp::abs(&det_real(rows, bits));
    let mut vand = hp::int(bits, 1);
    for i in 0..d {
        for j in i + 1..d {
            vand = &vand * &(&nodes[j] - &nodes[i]).abs();
        }
    }
    let m = (d - 2) / 2;
    let factor = hp::pow2(bits, m as isize);
    let scaled = &det * &factor;
    let abs_det = hp::to_f64(&det);
    let vandermonde = hp::to_f64(&vand);
    let relative_gap =
        if vandermonde > 0.0 { hp::to_f64(&hp::abs(&(&scaled - &vand))) / vandermonde } else { f64::INFINITY };
    if det < Precision::new(bits)?.tol(2) {
        return Err(BernoulliError::Singularity { det: abs_det });
    }
    Ok(DetM {
        abs_det,
        abs_det_decimal: hp::to_decimal(&det, 64),
        vandermonde,
        column_factor: hp::to_f64(&factor),
        relative_gap,
    })
}

fn require_salem(profile: &NumberProfile) -> Result<(), BernoulliError> {
    if profile.degree < 4 {
        return Err(BernoulliError::Classification(format!(
            "Salem numbers have degree at least 4, got {}",
            profile.degree
        )));
    }
    if !profile.is_salem() {
        return Err(BernoulliError::Classification(format!("needs a Salem number, got {:?}", profile.classification)));
    }
    Ok(())
}

pub fn det_m(profile: &NumberProfile, c: &[Complex]) -> Result<DetM, BernoulliError> {
    require_salem(profile)?;
    det_m_nodes(&profile.roots, c, profile.precision.bits())
}

/// C_j = ⟨s, e*_j⟩ / ⟨s, e*_1⟩, entries below 2^{-P/4} snapped to zero.
pub fn roof_coefficients(sys: &EigenSystem, s: &[Real]) -> Result<Vec<Complex>, BernoulliError> {
    let bits = sys.precision.bits();
    let c1 = sys.coord(s, 0);
    if c1.abs() <= sys.precision.tol(4) {
        return Err(BernoulliError::Domain("roof has no component along e_1".into()));
    }
    let tiny = sys.precision.tol(4);
    let mut out = vec![Complex::one(bits)];
    for j in 1..sys.d() {
        let cj = sys.coord(s, j).div(&c1);
        out.push(if cj.abs() <= tiny { Complex::zero(bits) } else { cj });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    /// Reduced-lattice enumeration, then the box if that finds nothing.
    Auto,
    Lattice,
    Exhaustive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtaConfig {
    pub epsilon: f64,
    pub n_ver: usize,
    /// Cap on enumeration nodes or box points.
    pub budget: u64,
    pub method: SearchMethod,
    /// When positive, the box search only visits |n_i| <= box_radius.
    pub box_radius: i64,
}

impl Default for EtaConfig {
    fn default() -> Self {
        EtaConfig { epsilon: 0.1, n_ver: 500, budget: 20_000_000, method: SearchMethod::Auto, box_radius: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EtaResult {
    /// η = Σ n_i α^i, as exact decimal strings.
    pub coeffs: Vec<String>,
    pub epsilon: f64,
    /// Bound imposed on each |τ_j(η)| so that the distances stay below epsilon.
    pub epsilon_search: f64,
    pub e_bound: f64,
    pub abs_det_m: f64,
    /// η is searched in D·Z[α] so that traces against the eigenvector entries are integers.
    pub denominator: i64,
    pub k_s: f64,
    pub method: String,
    pub eta: f64,
    pub tau_abs: Vec<f64>,
    pub n_ver: usize,
    pub verify_bits: usize,
    pub max_dist: f64,
    pub argmax_n: usize,
    pub nodes: u64,
    /// Candidates that met the inequalities but failed the direct check.
    pub rejected: Vec<Vec<String>>,
    pub c: Vec<(f64, f64)>,
    #[serde(skip)]
    pub coeffs_i64: Vec<i64>,
}

impl EtaResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Smallest D <= 10^6 making every D·Σ_j (e_j)_i α_j^k an integer.
fn trace_denominator(sys: &EigenSystem) -> Result<i64, BernoulliError> {
    let d = sys.d();
    let mut traces = Vec::new();
    for i in 0..d {
        for k in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                let (er, ei) = sys.e[j][i].to_f64();
                let (pr, pi) = sys.values[j].powu(k as u64).to_f64();
                acc += er * pr - ei * pi;
            }
            traces.push(acc);
        }
    }
    for den in 1..=1_000_000i64 {
        let dd = den as f64;
        if traces.iter().all(|t| (t * dd - (t * dd).round()).abs() < 1e-7 * dd.max(1.0)) {
            return Ok(den);
        }
    }
    Err(BernoulliError::Domain("eigenvector entries have no small common denominator".into()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gram_schmidt(b: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = b.len();
    let mut bs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut norms = vec![0.0; n];
    let mut mu = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut v = b[i].clone();
        for j in 0..i {
            mu[i][j] = dot(&b[i], &bs[j]) / norms[j];
            for (t, x) in v.iter_mut().enumerate() {
                *x -= mu[i][j] * bs[j][t];
            }
        }
        norms[i] = dot(&v, &v);
        bs.push(v);
    }
    (norms, mu)
}

/// LLL with δ = 0.99; `u` tracks the unimodular change of basis.
fn lll(b: &mut [Vec<f64>], u: &mut [Vec<i64>]) {
    let n = b.len();
    let (mut norms, mut mu) = gram_schmidt(b);
    let mut k = 1;
    let mut guard = 0usize;
    while k < n && guard < 100_000 {
        guard += 1;
        for j in (0..k).rev() {
            let q = mu[k][j].round();
            if q != 0.0 {
                let (lo, hi) = b.split_at_mut(k);
                for (x, y) in hi[0].iter_mut().zip(&lo[j]) {
                    *x -= q * y;
                }
                let (lo, hi) = u.split_at_mut(k);
                for (x, y) in hi[0].iter_mut().zip(&lo[j]) {
                    *x -= q as i64 * y;
                }
                (norms, mu) = gram_schmidt(b);
            }
        }
        if norms[k] >= (0.99 - mu[k][k - 1] * mu[k][k - 1]) * norms[k - 1] {
            k += 1;
        } else {
            b.swap(k, k - 1);
            u.swap(k, k - 1);
            (norms, mu) = gram_schmidt(b);
            k = (k - 1).max(1);
        }
    }
}

/// All nonzero x with ‖Σ x_k b_k‖² <= r2, depth-first from the last coordinate.
fn enumerate(b: &[Vec<f64>], r2: f64, budget: u64, out: &mut Vec<Vec<i64>>) -> Result<u64, BernoulliError> {
    let n = b.len();
    let (norms, mu) = gram_schmidt(b);
    let mut x = vec![0i64; n];
    let mut nodes = 0u64;
    #[allow(clippy::too_many_arguments)]
    fn rec(
        k: usize,
        rho: f64,
        x: &mut Vec<i64>,
        norms: &[f64],
        mu: &[Vec<f64>],
        r2: f64,
        nodes: &mut u64,
        budget: u64,
        out: &mut Vec<Vec<i64>>,
    ) -> Result<(), BernoulliError> {
        let n = x.len();
        let c: f64 = -(k + 1..n).map(|j| x[j] as f64 * mu[j][k]).sum::<f64>();
        let w = ((r2 - rho).max(0.0) / norms[k]).sqrt();
        let lo = (c - w).ceil() as i64;
        let hi = (c + w).floor() as i64;
        for v in lo..=hi {
            *nodes += 1;
            if *nodes > budget {
                return Err(BernoulliError::SearchBudget { needed: format!("more than {budget}"), budget });
            }
            let r = rho + (v as f64 - c).powi(2) * norms[k];
            if r > r2 {
                continue;
            }
            x[k] = v;
            if k == 0 {
                if x.iter().any(|&t| t != 0) {
                    out.push(x.clone());
                }
            } else {
                rec(k - 1, r, x, norms, mu, r2, nodes, budget, out)?;
            }
        }
        x[k] = 0;
        Ok(())
    }
    rec(n - 1, 0.0, &mut x, &norms, &mu, r2, &mut nodes, budget, out)?;
    Ok(nodes)
}

fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())?;
        if a[piv][col] == 0.0 {
            return None;
        }
        a.swap(piv, col);
        inv.swap(piv, col);
        let p = a[col][col];
        for k in 0..n {
            a[col][k] /= p;
            inv[col][k] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                for k in 0..n {
                    a[r][k] -= f * a[col][k];
                    inv[r][k] -= f * inv[col][k];
                }
            }
        }
    }
    Some(inv)
}

/// Every nonzero n with ‖n B‖∞ < 1, walking the first d-1 coordinates over their box
/// and solving the last one from the column constraints.
fn box_search(b: &[Vec<f64>], radius: i64, budget: u64, out: &mut Vec<Vec<i64>>) -> Result<u64, BernoulliError> {
    let n = b.len();
    let w = invert(b).ok_or_else(|| BernoulliError::Domain("embedding matrix is singular".into()))?;
    let bounds: Vec<i64> = (0..n)
        .map(|t| {
            let h = (0..n).map(|k| w[k][t].abs()).sum::<f64>().floor().min(1e15) as i64;
            if radius > 0 {
                h.min(radius)
            } else {
                h
            }
        })
        .collect();
    let outer = &bounds[..n - 1];
    let count = outer.iter().try_fold(1u64, |acc, &h| acc.checked_mul(2 * h as u64 + 1));
    match count {
        Some(c) if c <= budget => {}
        _ => {
            let needed = outer.iter().map(|&h| (2 * h + 1) as f64).product::<f64>();
            return Err(BernoulliError::SearchBudget { needed: format!("{needed:.3e}"), budget });
        }
    }
    let dim = b[0].len();
    let last = &b[n - 1];
    let mut x: Vec<i64> = bounds.iter().map(|h| -h).collect();
    let mut nodes = 0u64;
    loop {
        nodes += 1;
        let partial: Vec<f64> =
            (0..dim).map(|t| x[..n - 1].iter().zip(b).map(|(&c, row)| c as f64 * row[t]).sum()).collect();
        // |partial_t + k last_t| < 1 for every column t
        let (mut lo, mut hi) = (-(bounds[n - 1] as f64), bounds[n - 1] as f64);
        for t in 0..dim {
            if last[t] == 0.0 {
                if partial[t].abs() >= 1.0 {
                    hi = lo - 1.0;
                }
                continue;
            }
            let (a, c) = ((-1.0 - partial[t]) / last[t], (1.0 - partial[t]) / last[t]);
            lo = lo.max(a.min(c));
            hi = hi.min(a.max(c));
        }
        if lo <= hi {
            for k in lo.floor() as i64..=hi.ceil() as i64 {
                x[n - 1] = k;
                if x.iter().any(|&t| t != 0) && inf_norm(&combine(&x, b)) < 1.0 {
                    out.push(x.clone());
                }
            }
        }
        x[n - 1] = 0;
        let mut i = 0;
        while i < n - 1 {
            if x[i] < bounds[i] {
                x[i] += 1;
                break;
            }
            x[i] = -bounds[i];
            i += 1;
        }
        if i == n - 1 {
            break;
        }
    }
    Ok(nodes)
}

fn combine(x: &[i64], b: &[Vec<f64>]) -> Vec<f64> {
    let dim = b[0].len();
    (0..dim).map(|t| x.iter().zip(b).map(|(&c, row)| c as f64 * row[t]).sum()).collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Sign with the first nonzero coefficient positive, so ±η count once.
fn canonical(mut x: Vec<i64>) -> Vec<i64> {
    if x.iter().find(|&&t| t != 0).is_some_and(|&t| t < 0) {
        x.iter_mut().for_each(|t| *t = -*t);
    }
    x
}

struct Verified {
    max_dist: f64,
    argmax: usize,
    ok: bool,
}

fn verify(
    coeffs: &[i64],
    den: i64,
    a: &IntMatrix,
    sys: &EigenSystem,
    c: &[Complex],
    n_ver: usize,
    eps: f64,
) -> Verified {
    let bits = sys.precision.bits();
    let d = sys.d();
    let alpha = &sys.values[0].re;
    let mut eta = hp::int(bits, 0);
    for &k in coeffs.iter().rev() {
        eta = &(&eta * alpha) + &hp::int(bits, k * den);
    }
    let mut v: Vec<Real> = (0..d)
        .map(|i| {
            let mut acc = Complex::zero(bits);
            for (j, cj) in c.iter().enumerate() {
                acc = &acc + &(&cj.with_precision(bits) * &sys.e[j][i]);
            }
            &acc.re * &eta
        })
        .collect();
    let (mut max_dist, mut argmax) = (0.0f64, 0usize);
    for n in 0..=n_ver {
        let dist = v.iter().map(|x| hp::to_f64(&hp::abs(&hp::signed_frac(x)))).fold(0.0, f64::max);
        if dist > max_dist {
            max_dist = dist;
            argmax = n;
        }
        if n < n_ver {
            v = (0..d)
                .map(|i| {
                    let mut acc = hp::int(bits, 0);
                    for (k, x) in v.iter().enumerate() {
                        let e = a.get(i, k);
                        if e != 0 {
                            acc = &acc + &(x * &hp::int(bits, e));
                        }
                    }
                    acc
                })
                .collect();
        }
    }
    Verified { max_dist, argmax, ok: max_dist < eps }
}

/// Rows D·τ(α^i), each coordinate divided by its half-width (E, ε', ε'/√2, ...).
fn scaled_basis(
    profile: &NumberProfile,
    c: &[Complex],
    den: i64,
    eps_s: f64,
    e_bound: f64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = profile.degree;
    let m = (d - 2) / 2;
    let bits = profile.precision.bits();
    let mut widths = vec![e_bound, eps_s];
    widths.extend(std::iter::repeat_n(eps_s / std::f64::consts::SQRT_2, 2 * m));
    let mut pows: Vec<Complex> = vec![Complex::one(bits); d];
    let mut basis = Vec::with_capacity(d);
    for _ in 0..d {
        let row = tau_row_real(&pows, c);
        basis.push(row.iter().zip(&widths).map(|(x, w)| den as f64 * hp::to_f64(x) / w).collect::<Vec<f64>>());
        pows = pows.iter().zip(&profile.roots).map(|(p, x)| p * x).collect();
    }
    (basis, widths)
}

fn lattice_candidates(basis: &[Vec<f64>], budget: u64) -> Result<(Vec<Vec<i64>>, u64), BernoulliError> {
    let d = basis.len();
    let mut reduced = basis.to_vec();
    let mut u: Vec<Vec<i64>> = (0..d).map(|i| (0..d).map(|j| i64::from(i == j)).collect()).collect();
    lll(&mut reduced, &mut u);
    let mut xs = Vec::new();
    // the open unit box sits inside the ball of radius sqrt(d)
    let nodes = enumerate(&reduced, d as f64, budget, &mut xs)?;
    let mut out = Vec::new();
    for x in xs {
        let n: Vec<i64> = (0..d).map(|t| (0..d).map(|k| x[k] * u[k][t]).sum()).collect();
        if inf_norm(&combine(&n, basis)) < 1.0 {
            out.push(canonical(n));
        }
    }
    out.sort();
    out.dedup();
    Ok((out, nodes))
}

/// Candidates sorted by ‖n B‖∞, then lexicographically.
fn find_candidates(basis: &[Vec<f64>], cfg: &EtaConfig) -> Result<(Vec<Vec<i64>>, u64, &'static str), BernoulliError> {
    let d = basis.len();
    let mut cands = Vec::new();
    let mut nodes = 0u64;
    let mut method = "lattice";
    if cfg.method != SearchMethod::Exhaustive {
        let (c, n) = lattice_candidates(basis, cfg.budget)?;
        cands = c;
        nodes += n;
    }
    if cands.is_empty() && cfg.method != SearchMethod::Lattice {
        if d > 6 {
            return Err(BernoulliError::SearchBudget { needed: "box search for d > 6".into(), budget: cfg.budget });
        }
        method = "exhaustive";
        let mut xs = Vec::new();
        nodes += box_search(basis, cfg.box_radius, cfg.budget, &mut xs)?;
        cands.extend(xs.into_iter().map(canonical));
    }
    let score = |n: &Vec<i64>| inf_norm(&combine(n, basis));
    cands.sort_by(|x, y| score(x).partial_cmp(&score(y)).unwrap().then(x.cmp(y)));
    cands.dedup();
    Ok((cands, nodes, method))
}

/// Nonzero η ∈ Z[α] with ‖ηA^n s‖_{R^d/Z^d} < ε for all n, found as a short vector of
/// the embedded lattice and then checked directly for n <= n_ver.
pub fn eta_search(
    profile: &NumberProfile,
    a: &IntMatrix,
    s: &[Real],
    cfg: &EtaConfig,
) -> Result<EtaResult, BernoulliError> {
    require_salem(profile)?;
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 0.5) {
        return Err(BernoulliError::Domain(format!("epsilon = {} is not in (0, 1/2)", cfg.epsilon)));
    }
    let d = profile.degree;
    if s.len() != d {
        return Err(BernoulliError::Domain(format!("roof has {} entries, expected {d}", s.len())));
    }
    let sys = eigensystem(a, profile)?;
    let c = roof_coefficients(&sys, s)?;
    let den = trace_denominator(&sys)?;
    // distance of coordinate i is at most Σ_{j>=1} |τ_j(η)| |(e_j)_i|
    let k_s =
        (0..d).map(|i| (1..d).map(|j| hp::to_f64(&sys.e[j][i].abs())).sum::<f64>()).fold(0.0, f64::max) * den as f64;
    let eps_s = cfg.epsilon / k_s * (1.0 - 1e-9);
    let det = det_m(profile, &c)?;
    let m = (d - 2) / 2;
    let dd = (den as f64).powi(d as i32);
    let e_bound = 2f64.powi(m as i32 + 1) * dd * det.abs_det * eps_s.powi(-(d as i32 - 1));

    let (basis, widths) = scaled_basis(profile, &c, den, eps_s, e_bound);

    let (cands, nodes, method) = find_candidates(&basis, cfg)?;
    if cands.is_empty() {
        return Err(BernoulliError::SearchBudget {
            needed: "no lattice point found in the box".into(),
            budget: cfg.budget,
        });
    }

    let log2_alpha = profile.log2_alpha();
    let need = Precision::required_for(cfg.n_ver, log2_alpha, 256 + e_bound.log2().max(0.0).ceil() as usize);
    let verify_bits = need.max(1100).div_ceil(64) * 64;
    let vprofile = profile.at_precision(Precision::new(verify_bits)?)?;
    let vsys = eigensystem(a, &vprofile)?;

    let mut rejected = Vec::new();
    let mut first_failure = None;
    for cand in cands.iter().take(64) {
        let v = verify(cand, den, a, &vsys, &c, cfg.n_ver, cfg.epsilon);
        if !v.ok {
            rejected.push(cand.iter().map(|x| (x * den).to_string()).collect());
            first_failure.get_or_insert((cand.clone(), v.max_dist, v.argmax));
            continue;
        }
        let coeffs_i64: Vec<i64> = cand.iter().map(|x| x * den).collect();
        let y = combine(cand, &basis);
        let mut tau_abs = vec![(y[1] * widths[1]).abs()];
        for t in 0..m {
            let (re, im) = (y[2 + 2 * t] * widths[2 + 2 * t], y[3 + 2 * t] * widths[3 + 2 * t]);
            tau_abs.push(re.hypot(im));
        }
        return Ok(EtaResult {
            coeffs: coeffs_i64.iter().map(|x| x.to_string()).collect(),
            epsilon: cfg.epsilon,
            epsilon_search: eps_s,
            e_bound,
            abs_det_m: det.abs_det,
            denominator: den,
            k_s,
            method: method.to_string(),
            eta: y[0] * widths[0],
            tau_abs,
            n_ver: cfg.n_ver,
            verify_bits,
            max_dist: v.max_dist,
            argmax_n: v.argmax,
            nodes,
            rejected,
            c: c.iter().map(|z| z.to_f64()).collect(),
            coeffs_i64,
        });
    }
    let (coeffs, max_dist, n) = first_failure.expect("at least one candidate was tried");
    Err(BernoulliError::VerificationFailure {
        coeffs: coeffs.iter().map(|x| x * den).collect(),
        max_dist,
        n,
        epsilon: cfg.epsilon,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbePoint {
    pub n: usize,
    pub epsilon: f64,
    pub coeffs: Vec<String>,
    /// L = log_α |ξ| for ξ = η α^n.
    pub log_alpha_xi: f64,
    pub abs_fourier: f64,
    pub error: f64,
}

/// |ν̂_{1/α}^p| at ξ = η_n α^n, where η_n comes from the η-search with ε_n = min(0.45, c/√n).
/// Along these frequencies the first n factors sit near 1, so they probe the slowest decay.
pub fn slow_decay_probe(
    profile: &NumberProfile,
    a: &IntMatrix,
    s: &[Real],
    p: f64,
    ns: &[usize],
    c_eps: f64,
    budget: u64,
) -> Result<Vec<ProbePoint>, BernoulliError> {
    require_salem(profile)?;
    if !(c_eps > 0.0) {
        return Err(BernoulliError::Domain(format!("ε scale must be positive, got {c_eps}")));
    }
    ns.par_iter()
        .map(|&n| {
            let eps = (c_eps / (n.max(1) as f64).sqrt()).min(0.45);
            let cfg = EtaConfig { epsilon: eps, n_ver: n, budget, ..EtaConfig::default() };
            let r = eta_search(profile, a, s, &cfg)?;
            let need =
                Precision::required_for(n, profile.log2_alpha(), 256 + r.e_bound.log2().max(0.0).ceil() as usize);
            let hi = profile.at_precision(Precision::new(need.max(profile.precision.bits()))?)?;
            let bits = hi.precision.bits();
            let mut eta = hp::int(bits, 0);
            for &k in r.coeffs_i64.iter().rev() {
                eta = &(&eta * hi.alpha()) + &hp::int(bits, k);
            }
            let xi = &eta * &hp::int(bits, 1);
            let mut x = xi;
            for _ in 0..n {
                x = &x * hi.alpha();
            }
            let spec = BernoulliSpec::from_profile(&hi, p)?;
            let v = fourier(&spec, &x, 1e-12)?;
            let l = n as f64 + r.eta.abs().ln() / profile.alpha_f64().ln();
            Ok(ProbePoint { n, epsilon: eps, coeffs: r.coeffs, log_alpha_xi: l, abs_fourier: v.abs, error: v.error })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{classify, companion};

    const SALEM: [i64; 5] = [1, -1, -1, -1, 1];

    fn setup() -> (NumberProfile, IntMatrix, Vec<Real>) {
        let prof = classify(&SALEM, Precision::default()).unwrap();
        let a = companion(&SALEM);
        let sys = eigensystem(&a, &prof).unwrap();
        let s: Vec<Real> = sys.e[0].iter().map(|z| z.re.clone()).collect();
        (prof, a, s)
    }

    #[test]
    fn det_matches_vandermonde() {
        let (prof, a, s) = setup();
        let sys = eigensystem(&a, &prof).unwrap();
        let c = roof_coefficients(&sys, &s).unwrap();
        assert!(c[1..].iter().all(|z| z.abs() == hp::int(256, 0)));
        let det = det_m(&prof, &c).unwrap();
        assert_eq!(det.column_factor, 2.0);
        assert!(det.relative_gap < 1e-60, "{det:?}");
        assert!(det.abs_det > 0.0);
    }

    #[test]
    fn duplicated_node_is_singular() {
        let bits = 256;
        let x = hp::from_f64(bits, 0.5);
        let nodes =
            vec![Complex::real(hp::int(bits, 2)), Complex::real(x.clone()), Complex::real(x.clone()), Complex::real(x)];
        let c = vec![Complex::one(bits), Complex::zero(bits), Complex::zero(bits), Complex::zero(bits)];
        assert!(matches!(det_m_nodes(&nodes, &c, bits), Err(BernoulliError::Singularity { .. })));
    }

    #[test]
    fn degree_guard() {
        let phi = classify(&[-1, -1, 1], Precision::default()).unwrap();
        let a = companion(&[-1, -1, 1]);
        let s = vec![hp::int(256, 1), hp::int(256, 1)];
        assert!(matches!(eta_search(&phi, &a, &s, &EtaConfig::default()), Err(BernoulliError::Classification(_))));
    }

    #[test]
    fn threshold_scales_with_epsilon() {
        let (prof, a, s) = setup();
        let cfg = EtaConfig { epsilon: 0.4, n_ver: 50, ..EtaConfig::default() };
        let r1 = eta_search(&prof, &a, &s, &cfg).unwrap();
        let r2 = eta_search(&prof, &a, &s, &EtaConfig { epsilon: 0.2, ..cfg }).unwrap();
        assert!(r2.e_bound >= 4.0 * r1.e_bound);
        assert!((r2.e_bound / r1.e_bound - 8.0).abs() < 1e-6);
    }

    fn basis_for(eps: f64) -> Vec<Vec<f64>> {
        let (prof, a, s) = setup();
        let sys = eigensystem(&a, &prof).unwrap();
        let c = roof_coefficients(&sys, &s).unwrap();
        let det = det_m(&prof, &c).unwrap();
        let e = 4.0 * det.abs_det * eps.powi(-3);
        scaled_basis(&prof, &c, 1, eps, e).0
    }

    #[test]
    fn lattice_agrees_with_box_search() {
        let basis = basis_for(0.15);
        let (lat, _) = lattice_candidates(&basis, 1_000_000).unwrap();
        assert!(!lat.is_empty());
        let h = 130;
        let mut bx = Vec::new();
        box_search(&basis, h, 100_000_000, &mut bx).unwrap();
        let mut bx: Vec<Vec<i64>> = bx.into_iter().map(canonical).collect();
        bx.sort();
        bx.dedup();
        let mut small: Vec<Vec<i64>> = lat.into_iter().filter(|n| n.iter().all(|x| x.abs() <= h)).collect();
        small.sort();
        assert_eq!(small, bx);
    }

    #[test]
    fn lll_keeps_the_lattice() {
        let mut b = vec![vec![1.0, 0.0, 0.0], vec![1000.0, 1.0, 0.0], vec![517.0, 33.0, 1.0]];
        let orig = b.clone();
        let mut u: Vec<Vec<i64>> = (0..3).map(|i| (0..3).map(|j| i64::from(i == j)).collect()).collect();
        lll(&mut b, &mut u);
        for (row, urow) in b.iter().zip(&u) {
            let back = combine(urow, &orig);
            assert!(row.iter().zip(&back).all(|(x, y)| (x - y).abs() < 1e-9));
        }
        assert!(b.iter().all(|r| dot(r, r) <= 3.0));
    }
}
