//! Calibration of the product bound, the log* fit and grid sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::CombinedConstants;
use super::bounds::{combined_bound, hof_bound, n_max_of, torus_distances, OmegaContext, ProductBound, Radius};
use super::engine::{g_r, TwistEngine};
use super::suspension::{CylFunction, RoofMode, SuspensionSpec};
use super::SpectralError;
use crate::algebra::{charpoly, classify};
use crate::ekspansion::{fit_logstar_envelope, logstar, LogstarFit, RateParams};
use crate::hp::{self, Precision};
use crate::lattice::LatticePair;

/// Multiplier applied to the largest training ratio when setting C1.
pub const C1_SAFETY: f64 = 2.0;

fn point_seed(seed: u64, i: usize, j: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (j as u64 + 1).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub omega: f64,
    /// log_α R.
    pub x: f64,
    pub r_big: f64,
    /// max over sampled starts of |S_R| / ‖f‖∞.
    pub observed_max: f64,
    pub n_max: usize,
}

/// Per ω: the observations over the radius grid and the torus distances d_n.
type ObservedOmega = (Vec<Observation>, Vec<f64>);

fn observe(
    spec: &SuspensionSpec,
    lattice: &LatticePair,
    f: &CylFunction,
    omegas: &[f64],
    radii_x: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<ObservedOmega>, SpectralError> {
    if f.sup_f64() <= 0.0 {
        return Err(SpectralError::Invalid("f vanishes identically".into()));
    }
    if radii_x.is_empty() || radii_x.iter().any(|x| !(*x >= 0.0)) {
        return Err(SpectralError::Invalid("radii must be a nonempty list of log_alpha R >= 0".into()));
    }
    let p = spec.bits();
    let alpha = spec.alpha_f64();
    let x_max = radii_x.iter().cloned().fold(0.0, f64::max);
    let sup = f.sup_f64();
    omegas
        .par_iter()
        .enumerate()
        .map(|(i, &w)| {
            let wr = hp::from_f64(p, w);
            let r_max = hp::from_f64(p, alpha.powf(x_max));
            let eng = TwistEngine::for_window(spec, f, &wr, &r_max)?;
            let dists = torus_distances(spec, lattice, &wr, n_max_of(x_max))?;
            let mut rows = Vec::with_capacity(radii_x.len());
            for (j, &x) in radii_x.iter().enumerate() {
                let r_big = alpha.powf(x);
                let rr = hp::from_f64(p, r_big);
                let starts = eng.sample_starts(&rr, samples, point_seed(seed, i, j))?;
                let sums = eng.abs_sums(&starts, &rr)?;
                let m = sums.iter().map(hp::to_f64).fold(0.0, f64::max);
                rows.push(Observation { omega: w, x, r_big, observed_max: m / sup, n_max: n_max_of(x) });
            }
            Ok((rows, dists))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaCandidate {
    pub lambda: f64,
    pub c1: f64,
    /// Mean of ln(bound / observed) over the training points.
    pub mean_log_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductCalibration {
    pub lambda: f64,
    pub c1: f64,
    pub safety: f64,
    pub train_omegas: Vec<f64>,
    pub radii_x: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub candidates: Vec<LambdaCandidate>,
}

/// For each λ on the grid, C1 is the safety factor times the largest ratio of observed
/// |S_R| to the bound with C1 = 1; the λ with the smallest mean log-slack wins.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_product(
    spec: &SuspensionSpec,
    lattice: &LatticePair,
    f: &CylFunction,
    train_omegas: &[f64],
    radii_x: &[f64],
    lambda_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<ProductCalibration, SpectralError> {
    if lambda_grid.is_empty() {
        return Err(SpectralError::Invalid("empty lambda grid".into()));
    }
    let obs = observe(spec, lattice, f, train_omegas, radii_x, samples, seed)?;
    let mut candidates = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let mut pairs = Vec::new();
        for (rows, dists) in &obs {
            for o in rows {
                let base = ProductBound::from_dists(dists, o.n_max, o.omega.abs(), o.r_big, lambda, 1.0)?.value;
                pairs.push((o.observed_max, base));
            }
        }
        let worst = pairs.iter().map(|(o, b)| o / b).fold(0.0, f64::max);
        if worst <= 0.0 {
            return Err(SpectralError::Invalid("every observed twisted sum vanished".into()));
        }
        let c1 = C1_SAFETY * worst;
        let logs: Vec<f64> = pairs.iter().filter(|(o, _)| *o > 0.0).map(|(o, b)| (c1 * b / o).ln()).collect();
        let mean_log_slack = logs.iter().sum::<f64>() / logs.len() as f64;
        candidates.push(LambdaCandidate { lambda, c1, mean_log_slack });
    }
    let best = candidates.iter().min_by(|a, b| a.mean_log_slack.total_cmp(&b.mean_log_slack)).unwrap().clone();
    Ok(ProductCalibration {
        lambda: best.lambda,
        c1: best.c1,
        safety: C1_SAFETY,
        train_omegas: train_omegas.to_vec(),
        radii_x: radii_x.to_vec(),
        samples,
        seed,
        candidates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub omega: f64,
    pub x: f64,
    pub r_big: f64,
    pub observed_max: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductCheck {
    pub lambda: f64,
    pub c1: f64,
    pub rows: Vec<CheckRow>,
    pub all_ok: bool,
    /// Largest observed / bound.
    pub worst_ratio: f64,
}

/// Compares the calibrated bound with observed |S_R| on a fresh ω grid.
#[allow(clippy::too_many_arguments)]
pub fn validate_product(
    spec: &SuspensionSpec,
    lattice: &LatticePair,
    f: &CylFunction,
    test_omegas: &[f64],
    radii_x: &[f64],
    cal: &ProductCalibration,
    samples: usize,
    seed: u64,
) -> Result<ProductCheck, SpectralError> {
    let overlap = test_omegas.iter().any(|w| cal.train_omegas.contains(w));
    if overlap {
        return Err(SpectralError::Invalid("test and training omega grids overlap".into()));
    }
    let obs = observe(spec, lattice, f, test_omegas, radii_x, samples, seed)?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (list, dists) in &obs {
        for o in list {
            let bound = ProductBound::from_dists(dists, o.n_max, o.omega.abs(), o.r_big, cal.lambda, cal.c1)?.value;
            worst = worst.max(o.observed_max / bound);
            rows.push(CheckRow {
                omega: o.omega,
                x: o.x,
                r_big: o.r_big,
                observed_max: o.observed_max,
                bound,
                ok: o.observed_max <= bound,
            });
        }
    }
    let all_ok = rows.iter().all(|r| r.ok);
    Ok(ProductCheck { lambda: cal.lambda, c1: cal.c1, rows, all_ok, worst_ratio: worst })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogstarPoint {
    pub x: f64,
    pub r_big: f64,
    pub r: f64,
    pub g_r: f64,
    pub g_r_stderr: f64,
    pub hof: f64,
    /// log*(1/r), base 2.
    pub logstar: u32,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogstarCheck {
    pub omega: f64,
    pub fit: LogstarFit,
    pub points: Vec<LogstarPoint>,
    pub all_ok: bool,
}

/// Hof bounds over a radius grid fitted by a exp(-c log*(1/r)).
pub fn logstar_bound_check(
    spec: &SuspensionSpec,
    f: &CylFunction,
    omega: f64,
    radii_x: &[f64],
    samples: usize,
    seed: u64,
) -> Result<LogstarCheck, SpectralError> {
    if spec.mode != RoofMode::SelfSimilar {
        return Err(SpectralError::Mode("the log* check needs the self-similar roof".into()));
    }
    let cp = charpoly(&spec.matrix())?;
    if !classify(&cp, Precision::default())?.is_salem() {
        return Err(SpectralError::Mode("the substitution matrix does not have a Salem PF eigenvalue".into()));
    }
    if radii_x.is_empty() || radii_x.iter().any(|x| !(*x >= 0.0)) {
        return Err(SpectralError::Invalid("radii must be a nonempty list of log_alpha R >= 0".into()));
    }
    let p = spec.bits();
    let alpha = spec.alpha_f64();
    let x_max = radii_x.iter().cloned().fold(0.0, f64::max);
    let wr = hp::from_f64(p, omega);
    let eng = TwistEngine::for_window(spec, f, &wr, &hp::from_f64(p, alpha.powf(x_max)))?;
    let mut pts = Vec::with_capacity(radii_x.len());
    for (j, &x) in radii_x.iter().enumerate() {
        let r_big = alpha.powf(x);
        let rr = hp::from_f64(p, r_big);
        let g = g_r(&eng, &rr, samples, point_seed(seed, 0, j))?;
        let hof = hof_bound(&hp::from_f64(p, g.mean), &rr)?;
        let ls = logstar(2.0 * r_big, 2.0)?;
        pts.push((x, r_big, g, hp::to_f64(&hof.bound), hp::to_f64(&hof.r), ls));
    }
    let fit = fit_logstar_envelope(&pts.iter().map(|p| (p.5, p.3)).collect::<Vec<_>>())?;
    let points: Vec<LogstarPoint> = pts
        .into_iter()
        .map(|(x, r_big, g, hof, r, ls)| {
            let bound = fit.bound(ls);
            LogstarPoint {
                x,
                r_big,
                r,
                g_r: g.mean,
                g_r_stderr: g.stderr,
                hof,
                logstar: ls,
                bound,
                ok: hof <= bound * (1.0 + 1e-12),
            }
        })
        .collect();
    let all_ok = points.iter().all(|p| p.ok);
    Ok(LogstarCheck { omega, fit, points, all_ok })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub omegas: Vec<f64>,
    pub radii_x: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub consts: CombinedConstants,
    pub params: RateParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub omega: f64,
    pub r_big: f64,
    pub r: f64,
    pub g_r: f64,
    pub g_r_stderr: f64,
    pub hof_bound: f64,
    /// Bound on |S_R| / ‖f‖∞.
    pub product_bound: f64,
    pub combined_bound: f64,
    pub branch: String,
    pub h_beta_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub rows: Vec<ReportRow>,
    pub precision: usize,
    pub samples: usize,
    pub seed: u64,
    pub consts: CombinedConstants,
    pub params: RateParams,
    pub mode: RoofMode,
    pub s: Vec<f64>,
    pub mu: Vec<f64>,
    /// Z = Σ μ_j s_j, the factor turning μ × Lebesgue into a probability measure.
    pub mu_normalization: f64,
    pub lip_nodes: Option<usize>,
    pub f_sup: f64,
    /// Largest R / |ζ^M(a)| over the sweep, the scale of the sampling boundary bias.
    pub boundary_bias: f64,
}

impl SpectralReport {
    pub const CSV_HEADER: &'static str =
        "omega,R,r,G_R,G_R_stderr,hof_bound,product_bound,combined_bound,branch,h_beta_value";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let h = r.h_beta_value.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.omega, r.r_big, r.r, r.g_r, r.g_r_stderr, r.hof_bound, r.product_bound, r.combined_bound, r.branch, h
            ));
        }
        out
    }
}

/// Evaluates every (ω, R) point; ω rows run in parallel and are assembled in grid order.
pub fn spectral_sweep(
    spec: &SuspensionSpec,
    lattice: &LatticePair,
    f: &CylFunction,
    cfg: &SweepConfig,
) -> Result<SpectralReport, SpectralError> {
    if !f.mean_zero {
        return Err(SpectralError::MeanNotZero { mean: hp::to_f64(&f.mean) });
    }
    if cfg.samples == 0 || cfg.radii_x.is_empty() || cfg.radii_x.iter().any(|x| !(*x >= 0.0)) {
        return Err(SpectralError::Invalid("sweep needs samples >= 1 and radii log_alpha R >= 0".into()));
    }
    let p = spec.bits();
    let alpha = spec.alpha_f64();
    let x_max = cfg.radii_x.iter().cloned().fold(0.0, f64::max);
    let per_omega: Vec<(Vec<ReportRow>, f64)> = cfg
        .omegas
        .par_iter()
        .enumerate()
        .map(|(i, &w)| {
            let wr = hp::from_f64(p, w);
            let eng = TwistEngine::for_window(spec, f, &wr, &hp::from_f64(p, alpha.powf(x_max)))?;
            let ctx = OmegaContext::new(spec, lattice, f, &wr, cfg.params, cfg.consts)?;
            let dists = torus_distances(spec, lattice, &wr, n_max_of(x_max))?;
            let bias = alpha.powf(x_max) / hp::to_f64(eng.total_len());
            let mut rows = Vec::with_capacity(cfg.radii_x.len());
            for (j, &x) in cfg.radii_x.iter().enumerate() {
                let r_big = alpha.powf(x);
                let rr = hp::from_f64(p, r_big);
                let g = g_r(&eng, &rr, cfg.samples, point_seed(cfg.seed, i, j))?;
                let hof = hof_bound(&hp::from_f64(p, g.mean), &rr)?;
                let pb =
                    ProductBound::from_dists(&dists, n_max_of(x), w.abs(), r_big, cfg.consts.lambda, cfg.consts.c1)?;
                let cb = combined_bound(&ctx, &Radius::from_log_alpha(x)?)?;
                rows.push(ReportRow {
                    omega: w,
                    r_big,
                    r: hp::to_f64(&hof.r),
                    g_r: g.mean,
                    g_r_stderr: g.stderr,
                    hof_bound: hp::to_f64(&hof.bound),
                    product_bound: pb.value,
                    combined_bound: cb.value,
                    branch: cb.branch.tag().to_string(),
                    h_beta_value: cb.h_beta,
                });
            }
            Ok((rows, bias))
        })
        .collect::<Result<_, SpectralError>>()?;
    let boundary_bias = per_omega.iter().map(|x| x.1).fold(0.0, f64::max);
    let rows = per_omega.into_iter().flat_map(|x| x.0).collect();
    Ok(SpectralReport {
        rows,
        precision: p,
        samples: cfg.samples,
        seed: cfg.seed,
        consts: cfg.consts,
        params: cfg.params,
        mode: spec.mode,
        s: spec.s_f64(),
        mu: spec.mu.iter().map(hp::to_f64).collect(),
        mu_normalization: hp::to_f64(&spec.z_norm),
        lip_nodes: (!f.is_level0()).then_some(f.nodes),
        f_sup: f.sup_f64(),
        boundary_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subst::{build_matrix, parse_substitution};

    fn salem() -> (SuspensionSpec, LatticePair, CylFunction) {
        let z = parse_substitution("1 -> 1,4\n2 -> 3\n3 -> 4\n4 -> 2,1").unwrap();
        let spec = SuspensionSpec::self_similar(&z, Precision::new(256).unwrap()).unwrap();
        let l = LatticePair::integer(4, &build_matrix(&z).transpose()).unwrap();
        let f = CylFunction::level0_f64(&spec, &[1.0, 0.0, 0.0, 0.0]).unwrap().centered(&spec);
        (spec, l, f)
    }

    #[test]
    fn calibrated_bound_covers_training_points() {
        let (spec, l, f) = salem();
        let cal = calibrate_product(&spec, &l, &f, &[0.3, 1.1], &[4.0, 8.0], &[0.1, 0.5, 0.9], 8, 3).unwrap();
        assert_eq!(cal.candidates.len(), 3);
        let chk = validate_product(&spec, &l, &f, &[0.31, 1.13], &[4.0, 8.0], &cal, 8, 3).unwrap();
        assert_eq!(chk.rows.len(), 4);
        assert!(validate_product(&spec, &l, &f, &[0.3], &[4.0], &cal, 8, 3).is_err());
    }

    #[test]
    fn logstar_modes() {
        let (spec, _, f) = salem();
        let chk = logstar_bound_check(&spec, &f, 0.5, &[2.0, 4.0, 8.0, 16.0], 8, 1).unwrap();
        assert!(chk.all_ok);
        let z = parse_substitution("1 -> 1,2\n2 -> 1").unwrap();
        let fib = SuspensionSpec::self_similar(&z, Precision::default()).unwrap();
        let g = CylFunction::level0_f64(&fib, &[1.0, 0.0]).unwrap().centered(&fib);
        assert!(matches!(logstar_bound_check(&fib, &g, 0.5, &[2.0], 4, 1), Err(SpectralError::Mode(_))));
        let unit = SuspensionSpec::unit(&spec.z, Precision::default()).unwrap();
        assert!(matches!(logstar_bound_check(&unit, &f, 0.5, &[2.0], 4, 1), Err(SpectralError::Mode(_))));
    }

    #[test]
    fn sweep_is_ordered_and_deterministic() {
        let (spec, l, f) = salem();
        let cfg = SweepConfig {
            omegas: vec![0.0, 0.25, 1.5],
            radii_x: vec![2.0, 6.0, 20.0],
            samples: 4,
            seed: 9,
            consts: CombinedConstants::default(),
            params: RateParams { beta: 0.1, gamma: 8.0, upsilon: 2.0, k0: 1, b: 16, alpha: spec.alpha_f64() },
        };
        let a = spectral_sweep(&spec, &l, &f, &cfg).unwrap();
        let b = spectral_sweep(&spec, &l, &f, &cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.rows.len(), 9);
        assert_eq!(a.rows[3].omega, 0.25);
        assert!(a.rows.iter().all(|r| r.hof_bound >= 0.0 && r.combined_bound >= 0.0 && r.product_bound >= 0.0));
        assert_eq!(a.rows[0].branch, "near_zero");
        assert!(a.rows[8].h_beta_value.is_some());
        assert!((a.rows[0].r * 2.0 * a.rows[0].r_big - 1.0).abs() < 1e-15);
    }
}
