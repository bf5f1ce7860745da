use serde::{Deserialize, Serialize};

use super::{SpectralError, DEFAULT_LIP_NODES};
use crate::hp::{self, Precision, Real};
use crate::matrix::IntMatrix;
use crate::subst::{build_matrix, is_primitive, Substitution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoofMode {
    General,
    /// s is the Perron-Frobenius eigenvector of S^T.
    SelfSimilar,
    Unit,
}

/// Substitution plus roof vector. Letter frequencies μ and the mass Z = Σ μ_j s_j of
/// the unnormalized invariant measure are cached.
#[derive(Debug, Clone)]
pub struct SuspensionSpec {
    pub z: Substitution,
    pub s: Vec<Real>,
    pub mode: RoofMode,
    /// Set once s has been scaled so that ⟨s, e*_1⟩ = 1.
    pub normalized: bool,
    pub alpha: Real,
    pub mu: Vec<Real>,
    pub z_norm: Real,
    pub precision: Precision,
}

impl SuspensionSpec {
    pub fn general(z: &Substitution, s: Vec<Real>, prec: Precision) -> Result<Self, SpectralError> {
        if s.len() != z.d() {
            return Err(SpectralError::Invalid(format!("roof has {} entries for {} letters", s.len(), z.d())));
        }
        let p = prec.bits();
        let s: Vec<Real> = s.into_iter().map(|x| x.with_precision(p).value()).collect();
        Self::assemble(z, s, RoofMode::General, prec)
    }

    pub fn unit(z: &Substitution, prec: Precision) -> Result<Self, SpectralError> {
        let s = vec![hp::int(prec.bits(), 1); z.d()];
        Self::assemble(z, s, RoofMode::Unit, prec)
    }

    /// Roof s with S^T s = α s and s_1 = 1, which also gives ⟨s, e*_1⟩ = 1.
    pub fn self_similar(z: &Substitution, prec: Precision) -> Result<Self, SpectralError> {
        let st = build_matrix(z).transpose();
        let (s, _) = pf_vector(&st, prec)?;
        let mut spec = Self::assemble(z, s, RoofMode::SelfSimilar, prec)?;
        spec.normalized = true;
        let res = spec.self_similar_residual();
        if res > prec.tol(4) {
            return Err(SpectralError::Invalid(format!("PF residual {:e} above tolerance", hp::to_f64(&res))));
        }
        Ok(spec)
    }

    fn assemble(z: &Substitution, s: Vec<Real>, mode: RoofMode, prec: Precision) -> Result<Self, SpectralError> {
        let p = prec.bits();
        let zero = hp::int(p, 0);
        if s.iter().any(|x| x <= &zero) {
            return Err(SpectralError::Invalid("roof entries must be positive".into()));
        }
        let m = build_matrix(z);
        if !is_primitive(&m).primitive {
            return Err(SpectralError::Invalid("substitution is not primitive".into()));
        }
        let (mut mu, alpha) = pf_vector(&m, prec)?;
        let total = mu.iter().fold(zero.clone(), |a, x| a + x);
        for x in mu.iter_mut() {
            *x = &*x / &total;
        }
        let z_norm = mu.iter().zip(&s).fold(zero, |a, (m, s)| a + m * s);
        Ok(SuspensionSpec { z: z.clone(), s, mode, normalized: false, alpha, mu, z_norm, precision: prec })
    }

    pub fn d(&self) -> usize {
        self.z.d()
    }

    pub fn bits(&self) -> usize {
        self.precision.bits()
    }

    pub fn matrix(&self) -> IntMatrix {
        build_matrix(&self.z)
    }

    /// A = S^T, the matrix acting on roof vectors.
    pub fn a(&self) -> IntMatrix {
        self.matrix().transpose()
    }

    pub fn alpha_f64(&self) -> f64 {
        hp::to_f64(&self.alpha)
    }

    pub fn s_f64(&self) -> Vec<f64> {
        self.s.iter().map(hp::to_f64).collect()
    }

    /// ‖S^T s - α s‖∞.
    pub fn self_similar_residual(&self) -> Real {
        let p = self.bits();
        let v = mat_vec(&self.a(), &self.s, p);
        v.iter().zip(&self.s).fold(hp::int(p, 0), |m, (x, y)| hp::max(&m, &hp::abs(&(x - &self.alpha * y))))
    }

    /// Scales s so that ⟨s, e*_1⟩ = 1, where e_1 is the PF vector of S^T with first entry 1.
    pub fn normalize(&mut self) -> Result<(), SpectralError> {
        let p = self.bits();
        let (e1, _) = pf_vector(&self.a(), self.precision)?;
        let zero = hp::int(p, 0);
        let num = self.s.iter().zip(&self.mu).fold(zero.clone(), |a, (s, m)| a + s * m);
        let den = e1.iter().zip(&self.mu).fold(zero, |a, (s, m)| a + s * m);
        let k = num / den;
        for x in self.s.iter_mut() {
            *x = &*x / &k;
        }
        self.z_norm = &self.z_norm / &k;
        self.normalized = true;
        Ok(())
    }
}

pub(crate) fn mat_vec(a: &IntMatrix, v: &[Real], p: usize) -> Vec<Real> {
    (0..a.rows())
        .map(|i| {
            let mut acc = hp::int(p, 0);
            for (j, x) in v.iter().enumerate() {
                let c = a.get(i, j);
                if c != 0 {
                    acc += x * hp::int(p, c);
                }
            }
            acc
        })
        .collect()
}

/// PF eigenvector (first entry 1) and eigenvalue of a primitive matrix.
///
/// Repeated squaring of M + I, which has the same eigenvectors and a strictly
/// dominant eigenvalue, followed by plain iterations at the target precision.
fn pf_vector(m: &IntMatrix, prec: Precision) -> Result<(Vec<Real>, Real), SpectralError> {
    let p = prec.bits();
    let wp = p + 64;
    let d = m.rows();
    let mut b: Vec<Vec<Real>> =
        (0..d).map(|i| (0..d).map(|j| hp::int(wp, m.get(i, j) + i64::from(i == j))).collect()).collect();
    let ones_image = |b: &Vec<Vec<Real>>| -> Vec<Real> {
        let row0 = b.iter().map(|r| r.iter().fold(hp::int(wp, 0), |a, x| a + x)).collect::<Vec<_>>();
        let k = row0[0].clone();
        row0.iter().map(|x| x / &k).collect()
    };
    let tol = hp::pow2(wp, -(p as isize) - 8);
    let mut v = ones_image(&b);
    let mut converged = false;
    for _ in 0..64 {
        let mut sq = vec![vec![hp::int(wp, 0); d]; d];
        for i in 0..d {
            for k in 0..d {
                for j in 0..d {
                    sq[i][j] += &b[i][k] * &b[k][j];
                }
            }
        }
        let top = sq.iter().flatten().fold(hp::int(wp, 0), |a, x| hp::max(&a, x));
        b = sq.into_iter().map(|r| r.into_iter().map(|x| x / &top).collect()).collect();
        let nv = ones_image(&b);
        let diff = nv.iter().zip(&v).fold(hp::int(wp, 0), |a, (x, y)| hp::max(&a, &hp::abs(&(x - y))));
        v = nv;
        if diff < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SpectralError::Invalid("Perron-Frobenius iteration did not converge".into()));
    }
    for _ in 0..4 {
        let w = mat_vec(m, &v, wp);
        let k = w[0].clone();
        v = w.iter().map(|x| x / &k).collect();
    }
    let w = mat_vec(m, &v, wp);
    let alpha = w[0].clone().with_precision(p).value();
    Ok((v.into_iter().map(|x| x.with_precision(p).value()).collect(), alpha))
}

#[derive(Debug, Clone, PartialEq)]
pub enum CylKind {
    /// Constant c_j on the tile of letter j.
    Level0 { c: Vec<Real> },
    /// ψ_j sampled on a uniform grid of [0, s_j], linearly interpolated.
    Lip { samples: Vec<Vec<Real>>, lip: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylFunction {
    pub kind: CylKind,
    /// Mean under the invariant probability measure.
    pub mean: Real,
    pub mean_zero: bool,
    pub sup: Real,
    /// Trapezoid nodes per tile (Lip only).
    pub nodes: usize,
}

impl CylFunction {
    pub fn level0(spec: &SuspensionSpec, c: Vec<Real>) -> Result<Self, SpectralError> {
        if c.len() != spec.d() {
            return Err(SpectralError::Invalid(format!("{} constants for {} letters", c.len(), spec.d())));
        }
        let p = spec.bits();
        let c: Vec<Real> = c.into_iter().map(|x| x.with_precision(p).value()).collect();
        Ok(Self::finish(spec, CylKind::Level0 { c }, DEFAULT_LIP_NODES))
    }

    pub fn level0_f64(spec: &SuspensionSpec, c: &[f64]) -> Result<Self, SpectralError> {
        if c.iter().any(|x| !x.is_finite()) {
            return Err(SpectralError::Invalid("constants must be finite".into()));
        }
        Self::level0(spec, c.iter().map(|&x| hp::from_f64(spec.bits(), x)).collect())
    }

    pub fn one(spec: &SuspensionSpec) -> Self {
        Self::level0_f64(spec, &vec![1.0; spec.d()]).unwrap()
    }

    /// Samples of ψ_j at the points k s_j / (n_j - 1), k = 0..n_j.
    pub fn lip(spec: &SuspensionSpec, samples: &[Vec<f64>], nodes: usize) -> Result<Self, SpectralError> {
        if samples.len() != spec.d() {
            return Err(SpectralError::Invalid(format!("{} sample rows for {} letters", samples.len(), spec.d())));
        }
        if nodes == 0 {
            return Err(SpectralError::Invalid("at least one trapezoid node is needed".into()));
        }
        let p = spec.bits();
        let mut lip = 0.0f64;
        let mut rows = Vec::with_capacity(samples.len());
        for (j, row) in samples.iter().enumerate() {
            if row.len() < 2 || row.iter().any(|x| !x.is_finite()) {
                return Err(SpectralError::Invalid(format!("letter {} needs at least two finite samples", j + 1)));
            }
            let h = spec.s_f64()[j] / (row.len() - 1) as f64;
            for w in row.windows(2) {
                lip = lip.max((w[1] - w[0]).abs() / h);
            }
            rows.push(row.iter().map(|&x| hp::from_f64(p, x)).collect());
        }
        Ok(Self::finish(spec, CylKind::Lip { samples: rows, lip }, nodes))
    }

    fn finish(spec: &SuspensionSpec, kind: CylKind, nodes: usize) -> Self {
        let p = spec.bits();
        let zero = hp::int(p, 0);
        let (integrals, sup): (Vec<Real>, Real) = match &kind {
            CylKind::Level0 { c } => (
                c.iter().zip(&spec.s).map(|(c, s)| c * s).collect(),
                c.iter().fold(zero.clone(), |m, x| hp::max(&m, &hp::abs(x))),
            ),
            CylKind::Lip { samples, .. } => (
                samples.iter().zip(&spec.s).map(|(row, s)| piecewise_integral(row, s)).collect(),
                samples.iter().flatten().fold(zero.clone(), |m, x| hp::max(&m, &hp::abs(x))),
            ),
        };
        let mean = integrals.iter().zip(&spec.mu).fold(zero, |a, (i, m)| a + i * m) / &spec.z_norm;
        let mean_zero = hp::abs(&mean) <= spec.precision.tol(4);
        CylFunction { kind, mean, mean_zero, sup, nodes }
    }

    /// f minus its mean, which is mean-zero since the mean of 1 is 1.
    pub fn centered(&self, spec: &SuspensionSpec) -> Self {
        let kind = match &self.kind {
            CylKind::Level0 { c } => CylKind::Level0 { c: c.iter().map(|x| x - &self.mean).collect() },
            CylKind::Lip { samples, lip } => CylKind::Lip {
                samples: samples.iter().map(|r| r.iter().map(|x| x - &self.mean).collect()).collect(),
                lip: *lip,
            },
        };
        Self::finish(spec, kind, self.nodes)
    }

    pub fn sup_f64(&self) -> f64 {
        hp::to_f64(&self.sup)
    }

    pub fn is_level0(&self) -> bool {
        matches!(self.kind, CylKind::Level0 { .. })
    }

    /// ψ_j(t) for t in [0, s_j].
    pub fn value(&self, j: usize, t: &Real, s_j: &Real) -> Real {
        match &self.kind {
            CylKind::Level0 { c } => c[j].clone(),
            CylKind::Lip { samples, .. } => interpolate(&samples[j], s_j, t),
        }
    }
}

fn piecewise_integral(row: &[Real], s: &Real) -> Real {
    let p = s.precision();
    let h = s / hp::int(p, row.len() as i64 - 1);
    let two = hp::int(p, 2);
    let sum = row.iter().fold(hp::int(p, 0), |a, x| a + x);
    h * (sum - (&row[0] + &row[row.len() - 1]) / two)
}

fn interpolate(row: &[Real], s: &Real, t: &Real) -> Real {
    let p = s.precision();
    let n = row.len() - 1;
    let u = t * hp::int(p, n as i64) / s;
    let k = u.floor().to_int().value();
    let k = usize::try_from(k).unwrap_or(0).min(n - 1);
    let frac = &u - hp::int(p, k as i64);
    &row[k] + frac * (&row[k + 1] - &row[k])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitStart {
    /// Zero-based seed letter; ζ(letter) must begin with it.
    pub letter: usize,
    pub position: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    /// Zero-based letter.
    pub letter: usize,
    /// Offset from the orbit start.
    pub start: f64,
    pub duration: f64,
}

/// Tiles met by the flow on [0, T] from `start`, read off ζ^m(a) with m grown until
/// the word is long enough. The first and last tiles are clipped to the window.
pub fn orbit_tiles(
    spec: &SuspensionSpec,
    start: OrbitStart,
    horizon: f64,
    budget: usize,
) -> Result<Vec<Tile>, SpectralError> {
    let a = start.letter;
    if a >= spec.d() || !spec.z.fixed_point_seeds().contains(&a) {
        return Err(SpectralError::Invalid(format!("letter {} does not seed a fixed point", a + 1)));
    }
    if !(horizon >= 0.0 && start.position >= 0.0 && horizon.is_finite() && start.position.is_finite()) {
        return Err(SpectralError::Domain("position and horizon must be finite and nonnegative".into()));
    }
    let s = spec.s_f64();
    let end = start.position + horizon;
    let mut w = vec![a as u8];
    let mut total = s[a];
    while total < end {
        w = spec.z.apply(&w, budget).map_err(|_| SpectralError::Budget {
            what: "orbit word".into(),
            needed: format!("more than {budget} symbols"),
            budget: budget.to_string(),
        })?;
        total = w.iter().map(|&x| s[x as usize]).sum();
    }
    let mut out = Vec::new();
    let mut off = 0.0f64;
    for &x in &w {
        let len = s[x as usize];
        let (lo, hi) = (off.max(start.position), (off + len).min(end));
        if hi > lo {
            out.push(Tile { letter: x as usize, start: lo - start.position, duration: hi - lo });
        }
        off += len;
        if off >= end {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subst::parse_substitution;

    fn fib() -> Substitution {
        parse_substitution("1 -> 1,2\n2 -> 1").unwrap()
    }

    #[test]
    fn self_similar_fibonacci_roof() {
        let spec = SuspensionSpec::self_similar(&fib(), Precision::new(256).unwrap()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let s = spec.s_f64();
        assert_eq!(s[0], 1.0);
        assert!((s[1] - 1.0 / phi).abs() < 1e-15);
        assert!((spec.alpha_f64() - phi).abs() < 1e-15);
        assert!(spec.self_similar_residual() < hp::pow2(256, -200));
        // μ = (1/φ, 1/φ²)
        assert!((hp::to_f64(&spec.mu[0]) - 1.0 / phi).abs() < 1e-15);
    }

    #[test]
    fn tiles_single_letter() {
        let z = parse_substitution("1 -> 1,1").unwrap();
        let spec = SuspensionSpec::unit(&z, Precision::default()).unwrap();
        let t = orbit_tiles(&spec, OrbitStart { letter: 0, position: 0.0 }, 3.5, 1000).unwrap();
        let d: Vec<f64> = t.iter().map(|x| x.duration).collect();
        assert_eq!(d, vec![1.0, 1.0, 1.0, 0.5]);
    }

    #[test]
    fn tiles_fibonacci_prefix() {
        let spec = SuspensionSpec::unit(&fib(), Precision::default()).unwrap();
        let t = orbit_tiles(&spec, OrbitStart { letter: 0, position: 0.0 }, 5.0, 1000).unwrap();
        let letters: Vec<usize> = t.iter().map(|x| x.letter + 1).collect();
        assert_eq!(letters, vec![1, 2, 1, 1, 2]);
        assert!(t.iter().all(|x| x.duration == 1.0));
        assert!(orbit_tiles(&spec, OrbitStart { letter: 1, position: 0.0 }, 5.0, 1000).is_err());
        assert!(matches!(
            orbit_tiles(&spec, OrbitStart { letter: 0, position: 0.0 }, 1e9, 1000),
            Err(SpectralError::Budget { .. })
        ));
    }

    #[test]
    fn mean_zero_projection() {
        let spec = SuspensionSpec::self_similar(&fib(), Precision::default()).unwrap();
        let f = CylFunction::level0_f64(&spec, &[1.0, 0.0]).unwrap();
        assert!(!f.mean_zero);
        let g = f.centered(&spec);
        assert!(g.mean_zero);
        assert!(CylFunction::one(&spec).mean == hp::int(256, 1));
        let h = CylFunction::lip(&spec, &[vec![0.0, 1.0, 0.0], vec![1.0, 1.0]], 64).unwrap();
        assert!(h.centered(&spec).mean_zero);
    }
}
