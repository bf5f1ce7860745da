//! Rate functions: Ψ, h_β, the threshold R_0, log* and the constants of the log* checks.
//!
//! All logarithms are base 2 unless a base is given. Quantities such as R_0 are far
//! outside f64 range, so they are handled through their iterated logarithms.

use dashu_int::IBig;
use serde::{Deserialize, Serialize};

use super::predicates::factorial;
use super::EkError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub beta: f64,
    pub gamma: f64,
    pub upsilon: f64,
    pub k0: u32,
    pub b: u64,
    pub alpha: f64,
}

impl RateParams {
    /// γ = 4 max{k_0 + 1, Υ}.
    pub fn gamma_from(k0: u32, upsilon: f64) -> f64 {
        4.0 * (k0 as f64 + 1.0).max(upsilon)
    }

    /// β_1 = -¼ ln(1 - λ c_{A,L}^2), the exponent produced by the product bound.
    pub fn beta1(lambda: f64, c_al: f64) -> f64 {
        -0.25 * (1.0 - lambda * c_al * c_al).ln()
    }

    /// B(ω) = max{16, ⌈|ω|⌉, ⌈|ω|^{-1}⌉}.
    pub fn b_of_omega(omega: f64) -> u64 {
        let w = omega.abs();
        if w == 0.0 {
            return u64::MAX;
        }
        16u64.max(w.ceil() as u64).max((1.0 / w).ceil() as u64)
    }
}

/// Ψ(τ) = log τ / log log τ for τ >= 4.
pub fn psi(tau: f64) -> Result<f64, EkError> {
    if tau.is_nan() || tau < 4.0 {
        return Err(EkError::Domain(format!("Psi needs tau >= 4, got {tau}")));
    }
    let l = tau.log2();
    Ok(l / l.log2())
}

/// log2 of both sides of Ψ(B)^Ψ(B) >= B^{1/2}.
pub fn psi_power_sides(b: u64) -> Result<(f64, f64), EkError> {
    let p = psi(b as f64)?;
    Ok((p * p.log2(), 0.5 * (b as f64).log2()))
}

/// h_β(r) from τ = log log_α(1/2r): exp(-β log τ / log log τ) = exp(-β Ψ(τ)).
///
/// The denominator log log τ must exceed 1, so τ > 4.
pub fn rate_h_tower(tau: f64, beta: f64) -> Result<f64, EkError> {
    if tau.is_nan() || tau <= 4.0 {
        return Err(EkError::Domain(format!("log log_alpha(1/2r) = {tau} must exceed 4")));
    }
    Ok((-beta * psi(tau)?).exp())
}

/// h_β(r) for a radius representable as f64.
pub fn rate_h(r: f64, beta: f64, alpha: f64) -> Result<f64, EkError> {
    let r_max = 0.5 * alpha.powi(-16);
    if !(r > 0.0) || r >= r_max {
        return Err(EkError::Domain(format!("r = {r} must lie in (0, {r_max:e}), i.e. below (1/2) alpha^-16")));
    }
    let x = (0.5 / r).ln() / alpha.ln();
    rate_h_tower(x.log2(), beta)
}

/// log log_α R_0 = ⌊γ Ψ(B)⌋! for R_0 = α^{2^{⌊γΨ(B)⌋!}}.
pub fn r0_tower(b: u64, gamma: f64) -> Result<IBig, EkError> {
    if b < 16 || gamma < 1.0 {
        return Err(EkError::Domain(format!("R0 needs B >= 16 and gamma >= 1, got B = {b}, gamma = {gamma}")));
    }
    let m = (gamma * psi(b as f64)?).floor() as u32;
    Ok(factorial(m))
}

/// r <= r_0(ω) = ½ α^{-2^m}, compared through τ = log log_α(1/2r) >= m.
pub fn r0_exceeds(tau: f64, m: &IBig) -> bool {
    match f64::try_from(m.clone()) {
        Ok(mf) if mf.is_finite() => tau >= mf,
        _ => false,
    }
}

/// log*_base(x) = min{n >= 0 : log_base^n(x) <= 1}.
pub fn logstar(x: f64, base: f64) -> Result<u32, EkError> {
    if x.is_nan() || x < 1.0 {
        return Err(EkError::Domain(format!("log* needs x >= 1, got {x}")));
    }
    if base <= 1.0 {
        return Err(EkError::Domain(format!("log* base must exceed 1, got {base}")));
    }
    Ok(logstar_pos(x, base))
}

fn logstar_pos(mut x: f64, base: f64) -> u32 {
    let lb = base.log2();
    let mut n = 0;
    while x > 1.0 {
        x = x.log2() / lb;
        n += 1;
    }
    n
}

/// log*_base(x) for x = 2^{log2x}, which may be far beyond f64 range.
pub fn logstar_tower(log2x: f64, base: f64) -> Result<u32, EkError> {
    if log2x.is_nan() || log2x < 0.0 {
        return Err(EkError::Domain(format!("log* needs x >= 1, got 2^{log2x}")));
    }
    if log2x == 0.0 {
        return Ok(0);
    }
    Ok(1 + logstar_pos(log2x / base.log2(), base))
}

/// log2 of t_L, the largest solution of log t / log log t = log L.
///
/// u/log u is increasing for u >= e, where it takes the value e ln 2; below that
/// level there is no solution and `None` is returned.
pub fn t_l(l: f64) -> Option<f64> {
    let target = l.log2();
    let f = |u: f64| u / u.log2();
    let e = std::f64::consts::E;
    if target <= f(e) {
        return None;
    }
    let mut lo = e;
    let mut hi = 2.0 * e;
    while f(hi) < target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// log2 of K_L = max{4, t_L}.
pub fn k_l(l: f64) -> f64 {
    t_l(l).map_or(2.0, |u| u.max(2.0))
}

/// log*_L(x) >= ⌊½(log*(x) - log*(K_L))⌋ for x = 2^{log2x}.
pub fn logstar_comparison_holds(log2x: f64, l: f64) -> Result<bool, EkError> {
    let lhs = logstar_tower(log2x, l)? as i64;
    let full = logstar_tower(log2x, 2.0)? as i64;
    let kl = logstar_tower(k_l(l), 2.0)? as i64;
    Ok(lhs >= (full - kl).div_euclid(2))
}

/// k log k > T implies k > T / log T (T >= 2); returns whether the implication holds.
pub fn klogk_fact(k: u64, t: f64) -> bool {
    let kf = k as f64;
    let premise = k >= 2 && kf * kf.log2() > t;
    !premise || kf > t / t.log2()
}

/// Glueing implication for r in (r_0(ω), ρ_0) with ρ_0 = ½α^{-16}: B^{-1} < exp(-β Ψ(τ)).
///
/// Returns `None` when τ = log log_α(1/2r) is outside (4, ⌊γΨ(B)⌋!).
pub fn glue_implication(b: u64, tau: f64, beta: f64, gamma: f64) -> Result<Option<bool>, EkError> {
    let m = r0_tower(b, gamma)?;
    if tau <= 4.0 || r0_exceeds(tau, &m) {
        return Ok(None);
    }
    Ok(Some((b as f64).ln() > beta * psi(tau)?))
}

/// Constants (a, c) with value_i <= a exp(-c ℓ_i) at every point, ℓ_i = log*(r_i^{-1}).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogstarFit {
    pub a: f64,
    pub c: f64,
    /// Least-squares intercept before raising it to the upper envelope.
    pub ls_log_a: f64,
    pub points: usize,
}

impl LogstarFit {
    pub fn bound(&self, logstar: u32) -> f64 {
        self.a * (-self.c * logstar as f64).exp()
    }
}

/// Least-squares fit of ln v = ln a - c ℓ, then ln a raised so that every point lies
/// under the curve. Points with v = 0 carry no constraint and are skipped.
pub fn fit_logstar_envelope(points: &[(u32, f64)]) -> Result<LogstarFit, EkError> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(_, v)| *v > 0.0).map(|&(l, v)| (l as f64, v.ln())).collect();
    if pts.is_empty() {
        return Err(EkError::Invalid("log* fit needs at least one positive value".into()));
    }
    if points.iter().any(|(_, v)| !v.is_finite() || *v < 0.0) {
        return Err(EkError::Invalid("log* fit values must be finite and nonnegative".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let c = -slope;
    let ls_log_a = my - slope * mx;
    let log_a = pts.iter().map(|p| p.1 + c * p.0).fold(ls_log_a, f64::max);
    Ok(LogstarFit { a: log_a.exp(), c, ls_log_a, points: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_values() {
        assert_eq!(psi(16.0).unwrap(), 2.0);
        assert_eq!(psi(4.0).unwrap(), 2.0);
        assert!(psi(3.9).is_err());
        let (l, r) = psi_power_sides(16).unwrap();
        assert_eq!(l, r);
    }

    #[test]
    fn psi_power_fails_strictly_between_16_and_65536() {
        // log(Ψ^Ψ) - ½ log B = log B (½ - logloglog B / loglog B), negative for loglog B in (2, 4)
        for b in [17u64, 100, 1000, 10_000, 65_535] {
            let (l, r) = psi_power_sides(b).unwrap();
            assert!(l < r, "B = {b}");
        }
        for b in [65_536u64, 1 << 20, 1 << 40] {
            let (l, r) = psi_power_sides(b).unwrap();
            assert!(l >= r - 1e-12, "B = {b}");
        }
    }

    #[test]
    fn rate_domain_and_tower() {
        assert!(rate_h(0.5 * 1.5f64.powi(-16), 1.0, 1.5).is_err());
        // α = 2, r = 2^{-2^{2^16}}: log_2(1/2r) = 2^{65536} - 1, whose log is 65536 in f64
        let h = rate_h_tower(65536.0, 1.0).unwrap();
        assert!((h - (-4.0f64).exp()).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..200 {
            // r decreasing means τ increasing, h decreasing; Ψ is increasing once τ >= 2^e
            let tau = 7.0 * 1.05f64.powi(i);
            let h = rate_h_tower(tau, 0.7).unwrap();
            if i > 0 {
                assert!(h <= prev);
            }
            prev = h;
        }
    }

    #[test]
    fn r0_examples() {
        assert_eq!(r0_tower(16, 1.0).unwrap(), IBig::from(2));
        assert_eq!(r0_tower(16, 2.0).unwrap(), IBig::from(24));
        assert_eq!(r0_tower(256, 1.0).unwrap(), IBig::from(2));
        assert!(r0_exceeds(30.0, &IBig::from(24)));
        assert!(!r0_exceeds(23.9, &IBig::from(24)));
    }

    #[test]
    fn logstar_values() {
        assert_eq!(logstar(1.0, 2.0).unwrap(), 0);
        assert_eq!(logstar(2.0, 2.0).unwrap(), 1);
        assert_eq!(logstar(16.0, 2.0).unwrap(), 3);
        assert_eq!(logstar(65536.0, 2.0).unwrap(), 4);
        assert_eq!(logstar_tower(65536.0, 2.0).unwrap(), 5);
        assert_eq!(logstar_tower(4.0, 2.0).unwrap(), 3);
        assert!(logstar(0.5, 2.0).is_err());
    }

    #[test]
    fn t_l_solves_equation() {
        for l in [8.0, 77.0, 1000.0] {
            let u = t_l(l).unwrap();
            assert!((u / u.log2() - f64::log2(l)).abs() < 1e-9);
        }
        assert!(t_l(3.0).is_none());
        assert_eq!(k_l(3.0), 2.0);
    }

    #[test]
    fn logstar_fit_envelope() {
        let flat = fit_logstar_envelope(&[(3, 2.0), (4, 2.0), (5, 2.0)]).unwrap();
        assert_eq!(flat.c, 0.0);
        assert!((flat.a - 2.0).abs() < 1e-12);
        let pts = [(3, 1.0), (3, 0.5), (4, 0.2), (5, 0.05), (5, 0.09)];
        let fit = fit_logstar_envelope(&pts).unwrap();
        assert!(fit.c > 0.0);
        for (l, v) in pts {
            assert!(v <= fit.bound(l) * (1.0 + 1e-12));
        }
        assert!(fit_logstar_envelope(&[(3, 0.0)]).is_err());
    }
}
