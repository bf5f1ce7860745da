//! Vector digit expansion: A^n ω s = p_n + ε_n with p_n ∈ L.

use dashu_int::IBig;

use super::EkError;
use crate::algebra::EigenSystem;
use crate::hp::{self, Complex, Precision, PrecisionError, Real};
use crate::lattice::{norm, LatticePair, Metric};
use crate::matrix::IntMatrix;

#[derive(Debug, Clone)]
pub struct EkStep {
    pub n: usize,
    /// p_n in the coordinates of the basis of L.
    pub p_coords: Vec<IBig>,
    pub eps: Vec<Real>,
    pub z_coords: Vec<IBig>,
    pub z: Vec<Real>,
    /// b_n^(j) = ⟨z_n, e*_j⟩.
    pub digits: Vec<Complex>,
    /// ⟨ε_n, e*_j⟩.
    pub eps_coords: Vec<Complex>,
    pub eps_inf: Real,
    /// |ε_n|_3 = |⟨ε_n, e*_3⟩|, present when d >= 3.
    pub eps3_abs: Option<Real>,
    /// Index into `EkTrace::f_observed`; z_0 is not a digit and has none.
    pub z_index: Option<usize>,
}

impl EkStep {
    pub fn z_is_zero(&self) -> bool {
        self.z_coords.iter().all(|c| *c == IBig::ZERO)
    }
}

/// Bounds observed while the trace was built.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct TraceChecks {
    pub steps_checked: usize,
    pub max_eps_inf: f64,
    pub b_l: f64,
    pub max_z_inf: f64,
    pub z_bound: f64,
    pub c_al: f64,
    /// Steps where both remainders were below c_{A,L}, forcing z_n = 0.
    pub small_pairs: usize,
}

#[derive(Debug, Clone)]
pub struct EkTrace {
    pub omega: Real,
    pub s: Vec<Real>,
    pub precision: usize,
    pub a: IntMatrix,
    pub values: Vec<Complex>,
    /// ⟨s, e*_j⟩.
    pub s_coords: Vec<Complex>,
    pub steps: Vec<EkStep>,
    /// Distinct digits z_n (n >= 1) in lattice coordinates, in order of appearance.
    pub f_observed: Vec<Vec<IBig>>,
    pub b_l: Real,
    pub c_al: Real,
    /// max_j ‖e*_j‖₁.
    pub c0: Real,
    /// Index of the first eigenvalue on the unit circle.
    pub unit_index: Option<usize>,
    pub checks: TraceChecks,
}

impl EkTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn d(&self) -> usize {
        self.s.len()
    }

    /// C_1 = max(1, C_0 b_L).
    pub fn c1(&self) -> Real {
        hp::max(&hp::int(self.precision, 1), &(&self.c0 * &self.b_l))
    }

    /// C_2 = largest |b_k^(j)| over k <= n.
    pub fn c2(&self, n: usize) -> Real {
        let mut m = hp::int(self.precision, 0);
        for st in &self.steps[1..=n.min(self.len() - 1)] {
            for b in &st.digits {
                m = hp::max(&m, &b.abs());
            }
        }
        m
    }

    /// Φ_n^(j)(x) = -Σ_{k<=n} b_k^(j) x^k.
    pub fn phi(&self, j: usize, n: usize, x: &Complex) -> Complex {
        let mut acc = Complex::zero(self.precision);
        for st in self.steps[..=n].iter().rev() {
            acc = &(&acc * x) + &st.digits[j];
        }
        -&acc
    }

    pub fn alpha(&self) -> Real {
        self.values[0].re.clone()
    }
}

fn mat_vec(a: &IntMatrix, v: &[Real], p: usize) -> Vec<Real> {
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

fn mat_vec_big(a: &IntMatrix, v: &[IBig]) -> Vec<IBig> {
    a.mul_vec_big(v)
}

/// Builds the trace for n = 0..=steps by ε_n = Aε_{n-1} - q_n, z_n = -q_n with
/// q_n the nearest point of L to Aε_{n-1}.
pub fn ek_expand(
    omega: &Real,
    s: &[Real],
    lattice: &LatticePair,
    eig: &EigenSystem,
    steps: usize,
) -> Result<EkTrace, EkError> {
    let d = eig.d();
    if s.len() != d || lattice.d() != d {
        return Err(EkError::Invalid(format!(
            "dimension mismatch: s has {}, L has {}, A has {d}",
            s.len(),
            lattice.d()
        )));
    }
    if omega.repr().significand().is_zero() {
        return Err(EkError::Invalid("omega must be nonzero".into()));
    }
    let p = eig.precision.bits();
    let zero = hp::int(p, 0);
    if s.iter().any(|x| x <= &zero) {
        return Err(EkError::Invalid("roof vector must have positive entries".into()));
    }
    let log2a = hp::to_f64(&eig.values[0].abs()).log2();
    let need = Precision::required_for(steps, log2a, eig.precision.guard());
    if need > p {
        return Err(PrecisionError::Exhausted { required: need, available: p }.into());
    }
    let a = &eig.a;
    let m = lattice.action_in_coords(a).ok_or_else(|| EkError::Invalid("A does not map L into itself".into()))?;
    let tol = eig.precision.tol(2);
    let b_l = lattice.b_l.to_real(p);
    let c_al = lattice.c_al.to_real(p);
    let a_norm = a.inf_norm();
    let z_bound = hp::int(p, 1 + a_norm) * &b_l;
    let c0 = (0..d).fold(zero.clone(), |acc, j| hp::max(&acc, &eig.dual_l1(j)));
    let one = hp::int(p, 1);
    let unit_index = (0..d).find(|&j| hp::abs(&(eig.values[j].abs() - &one)) <= tol);
    let s: Vec<Real> = s.iter().map(|x| x.clone().with_precision(p).value()).collect();
    let omega = omega.clone().with_precision(p).value();

    let mut checks = TraceChecks {
        b_l: hp::to_f64(&b_l),
        z_bound: hp::to_f64(&z_bound),
        c_al: hp::to_f64(&c_al),
        ..Default::default()
    };
    let mut f_observed: Vec<Vec<IBig>> = Vec::new();
    let mut out: Vec<EkStep> = Vec::with_capacity(steps + 1);

    let x0: Vec<Real> = s.iter().map(|x| x * &omega).collect();
    let tp = lattice.nearest_point(&x0);
    let mut p_coords = tp.coords.clone();
    let mut eps = tp.frac;
    let z0_coords: Vec<IBig> = p_coords.iter().map(|c| -c.clone()).collect();
    let z0: Vec<Real> = tp.nearest.iter().map(|x| -x.clone()).collect();

    for n in 0..=steps {
        let (z_coords, z) = if n == 0 {
            (z0_coords.clone(), z0.clone())
        } else {
            let y = mat_vec(a, &eps, p);
            let tp = lattice.nearest_point(&y);
            let zc: Vec<IBig> = tp.coords.iter().map(|c| -c.clone()).collect();
            let zv: Vec<Real> = tp.nearest.iter().map(|x| -x.clone()).collect();
            let prev_inf = out[n - 1].eps_inf.clone();
            eps = tp.frac;
            p_coords = mat_vec_big(&m, &p_coords).into_iter().zip(&zc).map(|(x, z)| x - z).collect();
            let eps_inf = norm(&eps, Metric::LInf);
            let z_inf = norm(&zv, Metric::LInf);
            if z_inf > &z_bound + &tol {
                return Err(EkError::Certification {
                    step: n,
                    msg: format!("‖z_n‖ = {} exceeds (1+‖A‖)b_L = {}", hp::to_f64(&z_inf), checks.z_bound),
                });
            }
            checks.max_z_inf = checks.max_z_inf.max(hp::to_f64(&z_inf));
            if hp::max(&prev_inf, &eps_inf) < c_al {
                checks.small_pairs += 1;
                if zc.iter().any(|c| *c != IBig::ZERO) {
                    return Err(EkError::Certification {
                        step: n,
                        msg: "both remainders are below c_{A,L} but z_n is nonzero".into(),
                    });
                }
            }
            (zc, zv)
        };
        let eps_inf = norm(&eps, Metric::LInf);
        if eps_inf > &b_l + &tol {
            return Err(EkError::Certification {
                step: n,
                msg: format!("‖ε_n‖ = {} exceeds b_L = {}", hp::to_f64(&eps_inf), checks.b_l),
            });
        }
        checks.max_eps_inf = checks.max_eps_inf.max(hp::to_f64(&eps_inf));
        checks.steps_checked += 1;
        let digits: Vec<Complex> = (0..d).map(|j| eig.coord(&z, j)).collect();
        let eps_coords: Vec<Complex> = (0..d).map(|j| eig.coord(&eps, j)).collect();
        let eps3_abs = (d >= 3).then(|| eps_coords[2].abs());
        let z_index = (n > 0).then(|| match f_observed.iter().position(|f| f == &z_coords) {
            Some(i) => i,
            None => {
                f_observed.push(z_coords.clone());
                f_observed.len() - 1
            }
        });
        out.push(EkStep {
            n,
            p_coords: p_coords.clone(),
            eps: eps.clone(),
            z_coords,
            z,
            digits,
            eps_coords,
            eps_inf,
            eps3_abs,
            z_index,
        });
    }
    let s_coords = (0..d).map(|j| eig.coord(&s, j)).collect();
    Ok(EkTrace {
        omega,
        s,
        precision: p,
        a: a.clone(),
        values: eig.values.iter().map(|v| v.with_precision(p)).collect(),
        s_coords,
        steps: out,
        f_observed,
        b_l,
        c_al,
        c0,
        unit_index,
        checks,
    })
}

/// ‖A^n ωs‖ on R^d/L for n = 0..=steps, following only the remainders.
///
/// `log2_growth` is log2 of the spectral radius of A; the working precision of `s`
/// must cover `steps` such multiplications.
pub fn remainder_norms(
    omega: &Real,
    s: &[Real],
    lattice: &LatticePair,
    a: &IntMatrix,
    steps: usize,
    log2_growth: f64,
    prec: Precision,
) -> Result<Vec<Real>, EkError> {
    let d = a.rows();
    if s.len() != d || lattice.d() != d {
        return Err(EkError::Invalid(format!(
            "dimension mismatch: s has {}, L has {}, A has {d}",
            s.len(),
            lattice.d()
        )));
    }
    prec.check_powers(steps, log2_growth)?;
    let p = prec.bits();
    let omega = omega.clone().with_precision(p).value();
    let x0: Vec<Real> = s.iter().map(|x| x.clone().with_precision(p).value() * &omega).collect();
    let tp = lattice.nearest_point(&x0);
    let mut eps = tp.frac;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(tp.dist);
    for _ in 0..steps {
        let tp = lattice.nearest_point(&mat_vec(a, &eps, p));
        eps = tp.frac;
        out.push(tp.dist);
    }
    Ok(out)
}

/// ω⟨s,e*_j⟩ - Φ_n^(j)(1/α_j) - ⟨ε_n,e*_j⟩/α_j^n.
pub fn digit_polynomial_residual(trace: &EkTrace, j: usize, n: usize) -> Complex {
    let x = trace.values[j].inv();
    let phi = trace.phi(j, n, &x);
    let tail = &trace.steps[n].eps_coords[j] * &x.powu(n as u64);
    let lhs = trace.s_coords[j].scale(&trace.omega);
    &(&lhs - &phi) - &tail
}

/// ‖(-Σ_{k<=n} A^{-k} z_k + A^{-n} ε_n) - ωs‖∞, evaluated backwards with the exact inverse of A.
pub fn reconstruction_error(trace: &EkTrace, n: usize) -> Real {
    let p = trace.precision;
    let (adj, den) = trace.a.inverse().expect("A is invertible");
    let den = hp::big(p, &den);
    let inv: Vec<Vec<Real>> = adj.iter().map(|r| r.iter().map(|x| hp::big(p, x) / &den).collect()).collect();
    let mut x = trace.steps[n].eps.clone();
    for k in (1..=n).rev() {
        let y: Vec<Real> = x.iter().zip(&trace.steps[k].z).map(|(a, b)| a - b).collect();
        x = inv.iter().map(|row| row.iter().zip(&y).fold(hp::int(p, 0), |acc, (a, b)| acc + a * b)).collect();
    }
    let diff: Vec<Real> =
        x.iter().zip(&trace.steps[0].z).zip(&trace.s).map(|((x, z), s)| x - z - s * &trace.omega).collect();
    norm(&diff, Metric::LInf)
}

#[derive(Debug, Clone)]
pub struct ResidualGap {
    pub n: usize,
    pub lhs: Real,
    pub rhs: Real,
    pub c1: Real,
    pub c2: Real,
    pub holds: bool,
}

/// Compares |⟨s,e*_3⟩ - Φ^(3)_n(1/α_3)/Φ^(1)_n(1/α)| with
/// B|⟨ε_n,e*_3⟩| + C_1 C_2 B (n+1) / (α^n (B^{-1} - C_1 α^{-n})).
pub fn residual_gap(trace: &EkTrace, n: usize, b: &Real) -> Result<ResidualGap, EkError> {
    let d = trace.d();
    if d < 3 || trace.unit_index != Some(2) {
        return Err(EkError::NotSalem("no eigenvalue on the unit circle in the third slot".into()));
    }
    if n >= trace.len() {
        return Err(EkError::TraceTooShort { needed: n.to_string(), len: trace.len() });
    }
    let p = trace.precision;
    let tol = Precision::new(p).map_err(EkError::from)?.tol(2);
    let one = hp::int(p, 1);
    let binv = &one / b;
    let w = hp::abs(&trace.omega);
    if w < binv || &w > b {
        return Err(EkError::Domain(format!("|omega| = {} is outside [1/B, B]", hp::to_f64(&w))));
    }
    if (&trace.s_coords[0] - &Complex::one(p)).abs() > tol {
        return Err(EkError::Invalid("roof vector must satisfy <s, e*_1> = 1".into()));
    }
    let alpha = trace.alpha();
    let alpha_n = alpha.powi(IBig::from(n));
    let c1 = trace.c1();
    let c2 = trace.c2(n);
    let den = &binv - &c1 / &alpha_n;
    if den <= hp::int(p, 0) {
        return Err(EkError::Denominator { value: hp::to_f64(&den) });
    }
    let phi1 = trace.phi(0, n, &Complex::real(&one / &alpha));
    let phi3 = trace.phi(2, n, &trace.values[2].inv());
    let lhs = (&trace.s_coords[2] - &phi3.div(&phi1)).abs();
    let e3 = trace.steps[n].eps_coords[2].abs();
    let rhs = b * &e3 + &c1 * &c2 * b * hp::int(p, n as i64 + 1) / (&alpha_n * &den);
    let holds = lhs <= rhs;
    Ok(ResidualGap { n, lhs, rhs, c1, c2, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{classify, companion, eigensystem};

    const SALEM: [i64; 5] = [1, -1, -1, -1, 1];

    fn setup(poly: &[i64], steps: usize) -> (EigenSystem, LatticePair) {
        let bits = Precision::required_for(steps, 0.8, 128);
        let prof = classify(poly, Precision::new(bits).unwrap()).unwrap();
        let a = companion(poly);
        let eig = eigensystem(&a, &prof).unwrap();
        let l = LatticePair::integer(a.rows(), &a).unwrap();
        (eig, l)
    }

    fn self_similar(eig: &EigenSystem) -> Vec<Real> {
        eig.e[0].iter().map(|z| z.re.clone()).collect()
    }

    #[test]
    fn lattice_point_gives_zero_digits() {
        let (eig, l) = setup(&SALEM, 20);
        let p = eig.precision.bits();
        let s = vec![hp::int(p, 2), hp::int(p, 1), hp::int(p, 3), hp::int(p, 1)];
        let tr = ek_expand(&hp::int(p, 1), &s, &l, &eig, 20).unwrap();
        for st in &tr.steps[1..] {
            assert!(st.z_is_zero());
            assert!(st.eps_inf.repr().significand().is_zero());
        }
        assert_eq!(tr.f_observed.len(), 1);
    }

    #[test]
    fn remainder_norms_match_trace() {
        let (eig, l) = setup(&SALEM, 40);
        let p = eig.precision.bits();
        let s = self_similar(&eig);
        let w = hp::ratio(p, 1, 3);
        let tr = ek_expand(&w, &s, &l, &eig, 40).unwrap();
        let norms = remainder_norms(&w, &s, &l, &eig.a, 40, 0.8, eig.precision).unwrap();
        assert_eq!(norms.len(), tr.len());
        for (a, st) in norms.iter().zip(&tr.steps) {
            assert_eq!(a, &st.eps_inf);
        }
        assert!(remainder_norms(&w, &s, &l, &eig.a, 100_000, 0.8, eig.precision).is_err());
    }

    #[test]
    fn identities_on_salem_trace() {
        let (eig, l) = setup(&SALEM, 60);
        let p = eig.precision.bits();
        let s = self_similar(&eig);
        let tr = ek_expand(&hp::int(p, 1), &s, &l, &eig, 60).unwrap();
        let tol = hp::pow2(p, -((p / 2) as isize));
        for j in [0, 2] {
            assert!(digit_polynomial_residual(&tr, j, 50).abs() < tol);
        }
        assert!(digit_polynomial_residual(&tr, 1, 0).abs() < tol);
        assert!(reconstruction_error(&tr, 30) < hp::pow2(p, -80));
        // z_n = ε_n - Aε_{n-1}
        for n in 1..tr.len() {
            let ae = mat_vec(&tr.a, &tr.steps[n - 1].eps, p);
            for i in 0..4 {
                let r = &tr.steps[n].eps[i] - &ae[i] - &tr.steps[n].z[i];
                assert!(hp::abs(&r) < tol);
            }
        }
        // eps_3 modulus is preserved across zero digits
        for n in 1..tr.len() {
            if tr.steps[n].z_is_zero() {
                let a = tr.steps[n].eps3_abs.clone().unwrap();
                let b = tr.steps[n - 1].eps3_abs.clone().unwrap();
                assert!(hp::abs(&(a - b)) < tol);
            }
        }
    }

    #[test]
    fn residual_gap_small_n_and_pisot_guard() {
        let (eig, l) = setup(&SALEM, 60);
        let p = eig.precision.bits();
        let s = self_similar(&eig);
        let tr = ek_expand(&hp::int(p, 1), &s, &l, &eig, 60).unwrap();
        let b = hp::int(p, 16);
        assert!(matches!(residual_gap(&tr, 2, &b), Err(EkError::Denominator { .. })));
        let g = residual_gap(&tr, 60, &b).unwrap();
        assert!(g.holds, "lhs {:?} rhs {:?}", hp::to_f64(&g.lhs), hp::to_f64(&g.rhs));

        let (eig, l) = setup(&[-1, -1, 1], 10);
        let s = self_similar(&eig);
        let tr = ek_expand(&hp::int(p, 1), &s, &l, &eig, 10).unwrap();
        assert!(matches!(residual_gap(&tr, 10, &b), Err(EkError::NotSalem(_))));
    }

    #[test]
    fn precision_guard() {
        let (eig, l) = setup(&SALEM, 10);
        let s = self_similar(&eig);
        let e = ek_expand(&hp::int(64, 1), &s, &l, &eig, 5000).unwrap_err();
        assert!(matches!(e, EkError::Precision(_)));
    }
}
