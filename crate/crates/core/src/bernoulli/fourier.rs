use rayon::prelude::*;
use serde::Serialize;

use super::BernoulliError;
use crate::algebra::NumberProfile;
use crate::ekspansion::{fit_logstar_envelope, logstar, LogstarFit};
use crate::hp::{self, Complex, Precision, Real};

/// ν_λ^p, the law of Σ ±λ^n with P(+) = 1 - p.
#[derive(Debug, Clone)]
pub struct BernoulliSpec {
    pub lambda: Real,
    pub p: Real,
    pub precision: Precision,
}

impl BernoulliSpec {
    pub fn new(lambda: Real, p: Real, precision: Precision) -> Result<Self, BernoulliError> {
        let bits = precision.bits();
        let zero = hp::int(bits, 0);
        let one = hp::int(bits, 1);
        if lambda <= zero || lambda >= one {
            return Err(BernoulliError::Domain(format!("λ = {} is not in (0,1)", hp::to_f64(&lambda))));
        }
        if p <= zero || p >= one {
            return Err(BernoulliError::Domain(format!("p = {} is not in (0,1)", hp::to_f64(&p))));
        }
        let lambda = lambda.with_precision(bits).value();
        let p = p.with_precision(bits).value();
        Ok(BernoulliSpec { lambda, p, precision })
    }

    pub fn from_f64(lambda: f64, p: f64, precision: Precision) -> Result<Self, BernoulliError> {
        if !lambda.is_finite() || !p.is_finite() {
            return Err(BernoulliError::Domain("λ and p must be finite".into()));
        }
        let bits = precision.bits();
        Self::new(hp::from_f64(bits, lambda), hp::from_f64(bits, p), precision)
    }

    /// λ = 1/α for the profile's dominant root.
    pub fn from_profile(profile: &NumberProfile, p: f64) -> Result<Self, BernoulliError> {
        if profile.roots.is_empty() {
            return Err(BernoulliError::Classification("profile has no isolated roots".into()));
        }
        let bits = profile.precision.bits();
        let lambda = hp::int(bits, 1) / profile.alpha();
        if !p.is_finite() {
            return Err(BernoulliError::Domain("p must be finite".into()));
        }
        Self::new(lambda, hp::from_f64(bits, p), profile.precision)
    }

    pub fn lambda_f64(&self) -> f64 {
        hp::to_f64(&self.lambda)
    }

    pub fn p_f64(&self) -> f64 {
        hp::to_f64(&self.p)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FourierValue {
    pub re: f64,
    pub im: f64,
    pub abs: f64,
    /// Certified bound on |computed - true|, tail and rounding together.
    pub error: f64,
    pub factors: usize,
    /// Smallest factor modulus among the kept factors.
    pub min_factor: f64,
    /// Π (1 - ¼‖2λ^nξ‖²) over the kept factors; only for p = ½.
    pub chain_bound: Option<f64>,
    #[serde(skip)]
    pub value: Option<Complex>,
}

/// Number of factors N with 2π|ξ|λ^N/(1-λ) <= tol.
fn truncation(xi_abs: f64, lambda: f64, tol: f64) -> usize {
    if xi_abs == 0.0 {
        return 0;
    }
    let arg = 2.0 * std::f64::consts::PI * xi_abs / ((1.0 - lambda) * tol);
    if arg <= 1.0 {
        return 0;
    }
    // the +1e-12 keeps exact powers from landing one short after rounding
    (arg.ln() / (1.0 / lambda).ln() - 1e-12).ceil().max(0.0) as usize
}

/// ν̂(ξ) = Π_{n>=0} (p e^{-2πiλ^nξ} + (1-p) e^{2πiλ^nξ}) truncated at N factors.
pub fn fourier(spec: &BernoulliSpec, xi: &Real, tol: f64) -> Result<FourierValue, BernoulliError> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(BernoulliError::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let bits = spec.precision.bits();
    let xi = xi.clone().with_precision(bits).value();
    let xi_abs = hp::to_f64(&hp::abs(&xi));
    let lambda = spec.lambda_f64();
    let n = truncation(xi_abs, lambda, tol);
    let one = hp::int(bits, 1);
    let skew = &one - &(hp::int(bits, 2) * &spec.p);
    let half = spec.p == hp::ratio(bits, 1, 2);
    let mut acc = Complex::one(bits);
    let mut theta = xi.clone();
    let mut min_factor = 1.0f64;
    let mut chain = 1.0f64;
    for _ in 0..n {
        let z = Complex::cis_turns(&theta);
        let f = Complex::new(z.re, &z.im * &skew);
        min_factor = min_factor.min(hp::to_f64(&f.abs()));
        if half {
            let t = hp::to_f64(&hp::abs(&hp::signed_frac(&(&theta * &hp::int(bits, 2)))));
            chain *= 1.0 - 0.25 * t * t;
        }
        acc = &acc * &f;
        theta = &theta * &spec.lambda;
    }
    let tail = 2.0 * std::f64::consts::PI * xi_abs * lambda.powi(n as i32) / (1.0 - lambda);
    let abs = hp::to_f64(&acc.abs());
    // each θ_n carries relative error about (n+1)2^-bits, each product step another 2^-bits
    let ulp = (-(bits as f64)).exp2();
    let rounding = if n == 0 {
        0.0
    } else {
        8.0 * ulp * (n as f64 + 1.0) * (1.0 + 2.0 * std::f64::consts::PI * xi_abs / (1.0 - lambda))
    };
    let error = (abs * tail.exp_m1() + rounding) * (1.0 + 1e-12);
    let (re, im) = acc.to_f64();
    Ok(FourierValue {
        re,
        im,
        abs,
        error,
        factors: n,
        min_factor,
        chain_bound: half.then_some(chain),
        value: Some(acc),
    })
}

/// ξ = α^N for N = 0..=n_max, computed at the profile precision.
pub fn alpha_power_grid(profile: &NumberProfile, n_max: u32) -> Vec<Real> {
    let bits = profile.precision.bits();
    let mut out = Vec::with_capacity(n_max as usize + 1);
    let mut x = hp::int(bits, 1);
    for _ in 0..=n_max {
        out.push(x.clone());
        x = &x * profile.alpha();
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct PisotReport {
    pub w: f64,
    /// |ν̂(α^N w)| for N = 0..=n_max.
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    /// Running infimum after each N.
    pub running_inf: Vec<f64>,
    pub infimum: f64,
    pub argmin: usize,
}

/// |ν̂_{1/α}^{1/2}(α^N w)| along the Pisot orbit, where it stays away from 0.
pub fn pisot_nondecay(profile: &NumberProfile, n_max: u32, w: f64) -> Result<PisotReport, BernoulliError> {
    if !profile.is_pisot() {
        return Err(BernoulliError::Classification(format!(
            "pisot_nondecay needs a Pisot number, got {:?}",
            profile.classification
        )));
    }
    if !w.is_finite() {
        return Err(BernoulliError::Domain("w must be finite".into()));
    }
    let spec = BernoulliSpec::from_profile(profile, 0.5)?;
    let bits = profile.precision.bits();
    let wr = hp::from_f64(bits, w);
    let grid: Vec<Real> = alpha_power_grid(profile, n_max).into_iter().map(|x| x * &wr).collect();
    let vals: Vec<FourierValue> = grid.par_iter().map(|x| fourier(&spec, x, 1e-20)).collect::<Result<_, _>>()?;
    let values: Vec<f64> = vals.iter().map(|v| v.abs).collect();
    let errors: Vec<f64> = vals.iter().map(|v| v.error).collect();
    let mut running_inf = Vec::with_capacity(values.len());
    let (mut inf, mut argmin) = (f64::INFINITY, 0);
    for (i, &v) in values.iter().enumerate() {
        if v < inf {
            inf = v;
            argmin = i;
        }
        running_inf.push(inf);
    }
    Ok(PisotReport { w, values, errors, running_inf, infimum: inf, argmin })
}

/// |1 + e^{2πiτ}| <= 2 - ½‖τ‖², the elementary step behind the log* bound.
pub fn gap_inequality_holds(tau: f64) -> bool {
    let d = (tau - tau.round()).abs();
    let lhs = (2.0 * (1.0 + (2.0 * std::f64::consts::PI * tau).cos())).max(0.0).sqrt();
    lhs <= 2.0 - 0.5 * d * d + 1e-12
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayPoint {
    pub xi: f64,
    pub abs_fourier: f64,
    pub certified_err: f64,
    pub logstar_xi: u32,
    pub envelope_value: f64,
    pub chain_bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub p: f64,
    pub tol: f64,
    pub logstar_base: f64,
    pub fit: LogstarFit,
    pub points: Vec<DecayPoint>,
    /// Every point lies under A_c exp(-C_c log*ξ) up to its certified error.
    pub all_ok: bool,
    /// Every point lies under its elementary chain bound (p = ½ only).
    pub chain_ok: bool,
}

pub const DECAY_CSV_HEADER: &str = "xi,abs_fourier,certified_err,logstar_xi,envelope_value";

pub fn decay_csv(points: &[DecayPoint]) -> String {
    let mut out = String::from(DECAY_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{:?},{:?},{:?},{},{:?}\n",
            p.xi, p.abs_fourier, p.certified_err, p.logstar_xi, p.envelope_value
        ));
    }
    out
}

/// Evaluates |ν̂_{1/α}^p| on a grid of ξ >= 1 and fits A_c exp(-C_c log*_α ξ).
pub fn salem_logstar_decay(
    profile: &NumberProfile,
    p: f64,
    grid: &[Real],
    tol: f64,
) -> Result<DecayReport, BernoulliError> {
    if !profile.is_salem() {
        return Err(BernoulliError::Classification(format!(
            "salem_logstar_decay needs a Salem number, got {:?}",
            profile.classification
        )));
    }
    let spec = BernoulliSpec::from_profile(profile, p)?;
    let base = profile.alpha_f64();
    let vals: Vec<FourierValue> = grid.par_iter().map(|x| fourier(&spec, x, tol)).collect::<Result<_, _>>()?;
    let mut points = Vec::with_capacity(grid.len());
    for (x, v) in grid.iter().zip(&vals) {
        let xi = hp::to_f64(&hp::abs(x));
        let ls = logstar(xi, base)?;
        points.push(DecayPoint {
            xi,
            abs_fourier: v.abs,
            certified_err: v.error,
            logstar_xi: ls,
            envelope_value: 0.0,
            chain_bound: v.chain_bound,
        });
    }
    let pairs: Vec<(u32, f64)> = points.iter().map(|q| (q.logstar_xi, q.abs_fourier)).collect();
    let fit = fit_logstar_envelope(&pairs)?;
    let mut all_ok = true;
    let mut chain_ok = true;
    for q in &mut points {
        q.envelope_value = fit.bound(q.logstar_xi);
        all_ok &= q.abs_fourier - q.certified_err <= q.envelope_value * (1.0 + 1e-12);
        if let Some(c) = q.chain_bound {
            chain_ok &= q.abs_fourier - q.certified_err <= c * (1.0 + 1e-12);
        }
    }
    Ok(DecayReport { p, tol, logstar_base: base, fit, points, all_ok, chain_ok })
}

/// ½(d-1) log_α(1/(1-2p)), the largest γ compatible with (log_α ξ)^{-γ} decay.
pub fn biased_gamma_cap(profile: &NumberProfile, p: f64) -> Result<f64, BernoulliError> {
    if !profile.is_salem() {
        return Err(BernoulliError::Classification("gamma cap is for Salem numbers".into()));
    }
    if !(p > 0.0 && p < 0.5) {
        return Err(BernoulliError::Domain(format!("bias p = {p} is not in (0, 1/2)")));
    }
    let d = profile.degree as f64;
    Ok(0.5 * (d - 1.0) * (1.0 / (1.0 - 2.0 * p)).ln() / profile.alpha_f64().ln())
}

/// Cap on β in the unbiased envelope [log_α ξ]^{-γ (log_α log_α ξ)^β}.
pub fn unbiased_beta_cap() -> f64 {
    1.0
}

/// Running upper envelope max_{L' >= L} v(L') over the top decade L >= L_max/10.
fn top_decade_envelope(points: &[(f64, f64)], min_l: f64) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> =
        points.iter().copied().filter(|&(l, v)| l > min_l && l.is_finite() && v.is_finite()).collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let Some(&(top, _)) = pts.last() else { return Vec::new() };
    let mut env = Vec::with_capacity(pts.len());
    let mut m = 0.0f64;
    for &(l, v) in pts.iter().rev() {
        m = m.max(v.abs());
        if l >= top / 10.0 {
            env.push((l, m));
        }
    }
    env.reverse();
    env
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaFit {
    pub gamma: f64,
    pub log_c: f64,
    /// Range of L = log_α ξ used.
    pub window: (f64, f64),
    pub points: usize,
}

/// Least squares of ln M = ln C - γ ln L on points (L, |ν̂|) with L = log_α ξ, where M is
/// the running upper envelope and only the top decade of L is kept.
pub fn fit_gamma(points: &[(f64, f64)]) -> Result<GammaFit, BernoulliError> {
    let env = top_decade_envelope(points, 1.0);
    if env.len() < 2 {
        return Err(BernoulliError::Fit("need at least two points with L > 1".into()));
    }
    let window = (env[0].0, env[env.len() - 1].0);
    if env.iter().all(|&(_, m)| m >= 1.0 - 1e-15) {
        return Ok(GammaFit { gamma: 0.0, log_c: 0.0, window, points: env.len() });
    }
    if env.iter().any(|&(_, m)| m <= 0.0) {
        return Err(BernoulliError::Fit("envelope vanishes".into()));
    }
    let xy: Vec<(f64, f64)> = env.iter().map(|&(l, m)| (l.ln(), m.ln())).collect();
    let (slope, icpt) = least_squares(&xy)?;
    Ok(GammaFit { gamma: -slope, log_c: icpt, window, points: env.len() })
}

#[derive(Debug, Clone, Serialize)]
pub struct BetaFit {
    pub gamma: f64,
    pub beta: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Fits M = L^{-γ (log_α L)^β} on points (L, |ν̂|) through
/// ln(-ln M) - ln ln L = ln γ + β ln log_α L, top decade of L only.
pub fn fit_beta(points: &[(f64, f64)], alpha: f64) -> Result<BetaFit, BernoulliError> {
    if !(alpha > 1.0) {
        return Err(BernoulliError::Domain(format!("base must exceed 1, got {alpha}")));
    }
    // both logarithms on the left and right need to be positive
    let env = top_decade_envelope(points, alpha.max(std::f64::consts::E));
    if env.len() < 2 {
        return Err(BernoulliError::Fit("need at least two points with L > max(α, e)".into()));
    }
    let window = (env[0].0, env[env.len() - 1].0);
    if env.iter().all(|&(_, m)| m >= 1.0 - 1e-15) {
        return Ok(BetaFit { gamma: 0.0, beta: 0.0, window, points: env.len() });
    }
    if env.iter().any(|&(_, m)| m <= 0.0 || m >= 1.0) {
        return Err(BernoulliError::Fit("envelope must lie in (0,1) on the window".into()));
    }
    let la = alpha.ln();
    let xy: Vec<(f64, f64)> = env.iter().map(|&(l, m)| ((l.ln() / la).ln(), (-m.ln()).ln() - l.ln().ln())).collect();
    let (slope, icpt) = least_squares(&xy)?;
    Ok(BetaFit { gamma: icpt.exp(), beta: slope, window, points: env.len() })
}

fn least_squares(xy: &[(f64, f64)]) -> Result<(f64, f64), BernoulliError> {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(BernoulliError::Fit("abscissae do not vary".into()));
    }
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::classify;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn dyadic() -> BernoulliSpec {
        BernoulliSpec::from_f64(0.5, 0.5, Precision::default()).unwrap()
    }

    fn sinc4(xi: f64) -> f64 {
        (4.0 * PI * xi).sin() / (4.0 * PI * xi)
    }

    #[test]
    fn zero_frequency_is_one() {
        let v = fourier(&dyadic(), &hp::int(256, 0), 1e-12).unwrap();
        assert_eq!((v.re, v.im, v.error, v.factors), (1.0, 0.0, 0.0, 0));
    }

    #[test]
    fn dyadic_closed_form() {
        let s = dyadic();
        let q = fourier(&s, &hp::ratio(256, 1, 4), 1e-15).unwrap();
        assert!(q.abs <= q.error + 1e-15, "{q:?}");
        let v = fourier(&s, &hp::ratio(256, 1, 10), 1e-15).unwrap();
        assert!((v.re - sinc4(0.1)).abs() <= v.error + 1e-15);
        assert!(v.im.abs() <= v.error + 1e-15);
    }

    #[test]
    fn truncation_count() {
        // 2π/(½·2^-10) = 2^12 π, log2 of which is 13.65
        assert_eq!(truncation(1.0, 0.5, 2f64.powi(-10)), 14);
        assert_eq!(truncation(0.0, 0.5, 1e-9), 0);
    }

    #[test]
    fn certified_error_is_honest() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = BernoulliSpec::from_f64(0.6, 0.3, Precision::default()).unwrap();
        for _ in 0..20 {
            let xi = rng.gen_range(-50.0..50.0);
            let x = hp::from_f64(256, xi);
            let a = fourier(&s, &x, 1e-6).unwrap();
            let b = fourier(&s, &x, 1e-7).unwrap();
            let diff = ((a.re - b.re).powi(2) + (a.im - b.im).powi(2)).sqrt();
            assert!(diff < a.error, "ξ = {xi}: {diff} vs {}", a.error);
            assert!(a.abs <= 1.0 + 1e-15);
            let m = fourier(&s, &(-x), 1e-6).unwrap();
            assert!((m.re - a.re).abs() < 1e-15 && (m.im + a.im).abs() < 1e-15);
        }
    }

    #[test]
    fn biased_factor_floor() {
        let s = BernoulliSpec::from_f64(0.7, 0.25, Precision::default()).unwrap();
        let v = fourier(&s, &hp::from_f64(256, 37.3), 1e-8).unwrap();
        assert!(v.min_factor >= 0.5 - 1e-15);
        assert!(v.abs >= 0.5f64.powi(v.factors as i32) * (1.0 - 1e-8));
    }

    #[test]
    fn spec_domain() {
        assert!(BernoulliSpec::from_f64(1.0, 0.5, Precision::default()).is_err());
        assert!(BernoulliSpec::from_f64(0.5, 0.0, Precision::default()).is_err());
        assert!(fourier(&dyadic(), &hp::int(256, 1), 0.0).is_err());
    }

    #[test]
    fn pisot_guard_and_delegation() {
        let salem = classify(&[1, -1, -1, -1, 1], Precision::default()).unwrap();
        assert!(matches!(pisot_nondecay(&salem, 3, 1.0), Err(BernoulliError::Classification(_))));
        let phi = classify(&[-1, -1, 1], Precision::default()).unwrap();
        let r = pisot_nondecay(&phi, 0, 1.0).unwrap();
        let direct = fourier(&BernoulliSpec::from_profile(&phi, 0.5).unwrap(), &hp::int(256, 1), 1e-20).unwrap();
        assert_eq!(r.values, vec![direct.abs]);
    }

    #[test]
    fn gap_inequality_grid() {
        for i in 0..=10_000 {
            assert!(gap_inequality_holds(-2.0 + 4.0 * i as f64 / 10_000.0));
        }
    }

    #[test]
    fn salem_decay_envelope() {
        let salem = classify(&[1, -1, -1, -1, 1], Precision::default()).unwrap();
        let grid = alpha_power_grid(&salem, 64);
        let r = salem_logstar_decay(&salem, 0.5, &grid, 1e-12).unwrap();
        assert!(r.all_ok && r.chain_ok);
        assert!(r.fit.c > 0.0);
        for w in r.points.windows(2) {
            assert!(w[1].envelope_value <= w[0].envelope_value);
        }
        assert!(decay_csv(&r.points).starts_with(DECAY_CSV_HEADER));
    }

    #[test]
    fn constant_data_fits() {
        let ones: Vec<(u32, f64)> = (0..6).map(|l| (l, 1.0)).collect();
        assert_eq!(fit_logstar_envelope(&ones).unwrap().c, 0.0);
        let flat: Vec<(f64, f64)> = (1..200).map(|k| (k as f64, 1.0)).collect();
        let b = fit_beta(&flat, 1.5).unwrap();
        assert_eq!((b.gamma, b.beta), (0.0, 0.0));
        assert_eq!(fit_gamma(&flat).unwrap().gamma, 0.0);
    }

    #[test]
    fn gamma_cap_values() {
        let salem = classify(&[1, -1, -1, -1, 1], Precision::default()).unwrap();
        let cap = biased_gamma_cap(&salem, 0.25).unwrap();
        assert!((cap - 1.5 * 2f64.ln() / salem.alpha_f64().ln()).abs() < 1e-12);
        assert!((cap - 1.9126).abs() < 1e-3);
        assert!(biased_gamma_cap(&salem, 0.5 - 1e-12).unwrap() > 30.0);
        assert!(biased_gamma_cap(&salem, 0.5).is_err());
        assert_eq!(unbiased_beta_cap(), 1.0);
    }

    #[test]
    fn power_law_fit_recovers_gamma() {
        let pts: Vec<(f64, f64)> = (1..400).map(|k| (k as f64 * 0.5, (k as f64 * 0.5).powf(-1.5))).collect();
        let g = fit_gamma(&pts).unwrap();
        assert!((g.gamma - 1.5).abs() < 1e-9, "{g:?}");
        assert_eq!(g.window, (20.0, 199.5));
    }

    #[test]
    fn dyadic_beta_fit_is_capped() {
        // L = log_2 ξ for ξ up to 2^20, against the closed form envelope
        let pts: Vec<(f64, f64)> = (1..4000)
            .map(|k| {
                let l = 0.005 * k as f64;
                let xi = l.exp2();
                (l, ((4.0 * PI * xi).sin() / (4.0 * PI * xi)).abs())
            })
            .collect();
        let b = fit_beta(&pts, 2.0).unwrap();
        assert!(b.beta <= unbiased_beta_cap(), "{b:?}");
    }
}
