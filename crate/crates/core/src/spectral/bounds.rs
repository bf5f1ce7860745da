//! Hof, product and near-zero bounds and their combination over (ω, r).

use dashu_int::IBig;
use serde::{Deserialize, Serialize};

use super::suspension::{CylFunction, SuspensionSpec};
use super::SpectralError;
use crate::ekspansion::{r0_exceeds, r0_tower, rate_h_tower, remainder_norms, RateParams};
use crate::hp::{self, Real};
use crate::lattice::LatticePair;

/// A radius r in (0, 1/2] held through x = log_α(1/2r), so R = (2r)^{-1} = α^x.
///
/// Only log2 x is stored, which keeps radii far below f64 range comparable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Radius {
    pub log2_x: f64,
}

impl Radius {
    pub fn from_r(r: f64, alpha: f64) -> Result<Self, SpectralError> {
        if !(r > 0.0 && r <= 0.5) {
            return Err(SpectralError::Domain(format!("r = {r} must lie in (0, 1/2]")));
        }
        Ok(Radius { log2_x: ((0.5 / r).ln() / alpha.ln()).log2() })
    }

    pub fn from_big_r(r_big: f64, alpha: f64) -> Result<Self, SpectralError> {
        if !(r_big >= 1.0) {
            return Err(SpectralError::Domain(format!("R = {r_big} is below 1")));
        }
        Ok(Radius { log2_x: (r_big.ln() / alpha.ln()).log2() })
    }

    pub fn from_log_alpha(x: f64) -> Result<Self, SpectralError> {
        if !(x >= 0.0) {
            return Err(SpectralError::Domain(format!("log_alpha R = {x} is negative")));
        }
        Ok(Radius { log2_x: x.log2() })
    }

    /// τ = log2 log_α(1/2r).
    pub fn from_tower(tau: f64) -> Self {
        Radius { log2_x: tau }
    }

    pub fn x(&self) -> f64 {
        self.log2_x.exp2()
    }

    pub fn tau(&self) -> f64 {
        self.log2_x
    }

    pub fn big_r(&self, alpha: f64) -> f64 {
        alpha.powf(self.x())
    }

    pub fn log2_r(&self, alpha: f64) -> f64 {
        -1.0 - self.x() * alpha.log2()
    }

    pub fn r(&self, alpha: f64) -> f64 {
        self.log2_r(alpha).exp2()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HofBound {
    pub bound: Real,
    pub r: Real,
    pub r_big: Real,
}

/// σ_f(B_r(ω)) <= π² G_R / (4R) with r = 1/(2R).
pub fn hof_bound(g: &Real, r_big: &Real) -> Result<HofBound, SpectralError> {
    let p = g.precision().max(r_big.precision()).max(hp::MIN_BITS);
    let one = hp::int(p, 1);
    if r_big < &one {
        return Err(SpectralError::Domain(format!("R = {} is below 1", hp::to_f64(r_big))));
    }
    if g < &hp::int(p, 0) {
        return Err(SpectralError::Domain("G_R must be nonnegative".into()));
    }
    let pi = hp::pi(p);
    let bound = &pi * &pi * g / (hp::int(p, 4) * r_big);
    let r = one / (hp::int(p, 2) * r_big);
    Ok(HofBound { bound, r, r_big: r_big.clone() })
}

/// C1 min{1, 1/|ω|} R Π_{n<=⌊log_α R⌋} (1 - λ d_n²), a bound on |S_R| / ‖f‖∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductBound {
    pub value: f64,
    pub n_max: usize,
    pub product: f64,
    pub prefactor: f64,
    pub dists: Vec<f64>,
    pub factors: Vec<f64>,
}

impl ProductBound {
    /// Uses d_0..d_{n_max}; `dists` may be longer.
    pub fn from_dists(
        dists: &[f64],
        n_max: usize,
        omega_abs: f64,
        r_big: f64,
        lambda: f64,
        c1: f64,
    ) -> Result<Self, SpectralError> {
        check_lambda_c1(lambda, c1)?;
        if dists.len() <= n_max {
            return Err(SpectralError::Invalid(format!("{} distances for n_max = {n_max}", dists.len())));
        }
        let dists = dists[..=n_max].to_vec();
        let factors: Vec<f64> = dists.iter().map(|d| (1.0 - lambda * d * d).max(0.0)).collect();
        let product = factors.iter().product();
        let prefactor = c1 * omega_factor(omega_abs) * r_big;
        Ok(ProductBound { value: prefactor * product, n_max, product, prefactor, dists, factors })
    }
}

/// min{1, 1/|ω|}.
fn omega_factor(omega_abs: f64) -> f64 {
    if omega_abs > 1.0 {
        1.0 / omega_abs
    } else {
        1.0
    }
}

/// n_max = ⌊log_α R⌋, tolerating rounding when R is given as an exact power.
pub(crate) fn n_max_of(x: f64) -> usize {
    (x + 1e-9).floor() as usize
}

/// Torus distances ‖A^n ω s‖ on R^d/L for n = 0..=steps, A = S^T.
pub(crate) fn torus_distances(
    spec: &SuspensionSpec,
    lattice: &LatticePair,
    omega: &Real,
    steps: usize,
) -> Result<Vec<f64>, SpectralError> {
    let growth = spec.alpha_f64().log2();
    let v = remainder_norms(omega, &spec.s, lattice, &spec.a(), steps, growth, spec.precision)?;
    Ok(v.iter().map(hp::to_f64).collect())
}

pub fn product_bound(
    spec: &SuspensionSpec,
    lattice: &LatticePair,
    omega: &Real,
    radius: &Radius,
    lambda: f64,
    c1: f64,
) -> Result<ProductBound, SpectralError> {
    check_lambda_c1(lambda, c1)?;
    let alpha = spec.alpha_f64();
    let n_max = n_max_of(radius.x());
    let dists = torus_distances(spec, lattice, omega, n_max)?;
    ProductBound::from_dists(&dists, n_max, hp::to_f64(omega).abs(), radius.big_r(alpha), lambda, c1)
}

fn check_lambda_c1(lambda: f64, c1: f64) -> Result<(), SpectralError> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(SpectralError::Domain(format!("lambda = {lambda} must lie in [0, 1)")));
    }
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(SpectralError::Domain(format!("C1 = {c1} must be positive")));
    }
    Ok(())
}

/// log2 of C5 ‖f‖∞² min{(log 1/r)^{2d-2} r², r}, logarithms base 2.
pub fn near_zero_log2(c5: f64, sup: f64, d: usize, log2_r: f64) -> f64 {
    let l = -log2_r;
    let a = (2 * d - 2) as f64 * l.log2() + 2.0 * log2_r;
    (c5 * sup * sup).log2() + a.min(log2_r)
}

/// σ_f(B_r(0)) <= C5 ‖f‖∞² min{(log 1/r)^{2d-2} r², r} for mean-zero f.
pub fn near_zero_bound(f: &CylFunction, r: f64, c5: f64, d: usize) -> Result<f64, SpectralError> {
    if !f.mean_zero {
        return Err(SpectralError::MeanNotZero { mean: hp::to_f64(&f.mean) });
    }
    if !(r > 0.0 && r <= 0.5) {
        return Err(SpectralError::Domain(format!("r = {r} must lie in (0, 1/2]")));
    }
    if !(c5 > 0.0) || d == 0 {
        return Err(SpectralError::Domain("C5 must be positive and d at least 1".into()));
    }
    Ok(near_zero_log2(c5, f.sup_f64(), d, r.log2()).exp2())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// r > |ω| (or ω = 0): the ball sits inside B_{r+|ω|}(0).
    NearZero,
    /// r <= r_0(ω): product bound fed into the Hof bound.
    Main,
    /// r_0(ω) < r <= |ω|: near-zero bound at the enlarged ball.
    Glue,
}

impl Branch {
    pub fn tag(&self) -> &'static str {
        match self {
            Branch::NearZero => "near_zero",
            Branch::Main => "main",
            Branch::Glue => "glue",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedConstants {
    pub lambda: f64,
    pub c1: f64,
    pub c5: f64,
    /// Most product factors evaluated in the main branch.
    pub product_steps: usize,
}

impl Default for CombinedConstants {
    fn default() -> Self {
        CombinedConstants { lambda: 0.5, c1: 1.0, c5: 1.0, product_steps: 256 }
    }
}

/// Per-ω data shared by every radius: B(ω), the threshold tower and torus distances.
#[derive(Debug, Clone)]
pub struct OmegaContext {
    pub omega: f64,
    pub b: u64,
    /// ⌊γΨ(B)⌋!, so that r <= r_0(ω) iff log2 log_α(1/2r) >= m.
    pub m: Option<IBig>,
    pub dists: Vec<f64>,
    pub sup: f64,
    pub mean_zero: bool,
    pub mean: f64,
    pub d: usize,
    pub alpha: f64,
    pub params: RateParams,
    pub consts: CombinedConstants,
}

impl OmegaContext {
    pub fn new(
        spec: &SuspensionSpec,
        lattice: &LatticePair,
        f: &CylFunction,
        omega: &Real,
        params: RateParams,
        consts: CombinedConstants,
    ) -> Result<Self, SpectralError> {
        check_lambda_c1(consts.lambda, consts.c1)?;
        let w = hp::to_f64(omega);
        let alpha = spec.alpha_f64();
        let (b, m, dists) = if w == 0.0 {
            (u64::MAX, None, Vec::new())
        } else {
            let b = RateParams::b_of_omega(w);
            let m = r0_tower(b, params.gamma)?;
            // as many factors as the precision of s supports
            let prec = spec.precision;
            let usable = ((prec.bits().saturating_sub(prec.guard())) as f64 / alpha.log2()).floor() as usize;
            let steps = consts.product_steps.min(usable.saturating_sub(1));
            (b, Some(m), torus_distances(spec, lattice, omega, steps)?)
        };
        Ok(OmegaContext {
            omega: w,
            b,
            m,
            dists,
            sup: f.sup_f64(),
            mean_zero: f.mean_zero,
            mean: hp::to_f64(&f.mean),
            d: spec.d(),
            alpha,
            params,
            consts,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedBound {
    pub branch: Branch,
    pub value: f64,
    pub log2_value: f64,
    /// Set when the bound was clipped to the total mass ‖f‖∞².
    pub capped: bool,
    /// Main branch: number of product factors used.
    pub factors_used: Option<usize>,
    pub h_beta: Option<f64>,
}

/// Case analysis over (ω, r): near-zero when r > |ω|, main when r <= r_0(ω), glue otherwise.
pub fn combined_bound(ctx: &OmegaContext, radius: &Radius) -> Result<CombinedBound, SpectralError> {
    let w = ctx.omega.abs();
    let log2_r = radius.log2_r(ctx.alpha);
    if !(log2_r <= -1.0) {
        return Err(SpectralError::Domain("r must lie in (0, 1/2]".into()));
    }
    let cap_log2 = 2.0 * ctx.sup.log2();
    let near = |log2_rr: f64| -> Result<f64, SpectralError> {
        if !ctx.mean_zero {
            return Err(SpectralError::MeanNotZero { mean: ctx.mean });
        }
        // beyond r = 1/2 only the total mass is available
        if log2_rr > -1.0 {
            return Ok(cap_log2);
        }
        Ok(near_zero_log2(ctx.consts.c5, ctx.sup, ctx.d, log2_rr))
    };
    let shifted = |log2_r: f64| (log2_r.exp2() + w).log2();
    let (branch, raw, factors_used) = if w == 0.0 {
        (Branch::NearZero, near(log2_r)?, None)
    } else if log2_r > w.log2() {
        (Branch::NearZero, near(shifted(log2_r))?, None)
    } else if ctx.m.as_ref().is_some_and(|m| r0_exceeds(radius.tau(), m)) {
        let x = radius.x();
        let wanted = if x.is_finite() { n_max_of(x) + 1 } else { usize::MAX };
        let used = wanted.min(ctx.dists.len());
        // every factor is at most 1, so dropping the tail keeps the bound valid
        let log2_prod: f64 = ctx.dists[..used].iter().map(|d| (1.0 - ctx.consts.lambda * d * d).max(0.0).log2()).sum();
        let pi2 = std::f64::consts::PI.powi(2);
        let inner = ctx.consts.c1.log2() + ctx.sup.log2() + omega_factor(w).log2() + log2_prod;
        (Branch::Main, (pi2 / 4.0).log2() + 2.0 * inner, Some(used))
    } else {
        (Branch::Glue, near(shifted(log2_r))?, None)
    };
    let capped = raw > cap_log2;
    let log2_value = raw.min(cap_log2);
    let tau = radius.tau();
    let h_beta = if tau > 4.0 { rate_h_tower(tau, ctx.params.beta).ok() } else { None };
    Ok(CombinedBound { branch, value: log2_value.exp2(), log2_value, capped, factors_used, h_beta })
}
