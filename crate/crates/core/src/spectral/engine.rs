//! Twisted integrals along a long orbit through the hierarchy of ζ^m-blocks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::suspension::{CylFunction, CylKind, SuspensionSpec};
use super::{SpectralError, MAX_LEVELS};
use crate::hp::{self, Complex, Real};

/// For each level m, block ζ^m(b) has length len[m][b] and twisted integral
/// Φ_m(b) = ∫ f e^{2πiωt} dt over the block, built bottom-up from
/// Φ_m(b) = Σ_k e^{2πiω off_k} Φ_{m-1}(ζ(b)_k).
#[derive(Debug, Clone)]
pub struct TwistEngine {
    pub omega: Real,
    pub seed: usize,
    pub levels: usize,
    p: usize,
    len: Vec<Vec<Real>>,
    phi: Vec<Vec<Complex>>,
    child_phase: Vec<Vec<Vec<Complex>>>,
    images: Vec<Vec<usize>>,
    s: Vec<Real>,
    f: CylFunction,
    /// 1/(2πiω), absent for ω = 0.
    inv_twist: Option<Complex>,
}

impl TwistEngine {
    /// Builds levels until the top block ζ^M(a) has length at least `min_len`.
    pub fn new(spec: &SuspensionSpec, f: &CylFunction, omega: &Real, min_len: &Real) -> Result<Self, SpectralError> {
        let seed = *spec
            .z
            .fixed_point_seeds()
            .first()
            .ok_or_else(|| SpectralError::Invalid("no letter a with ζ(a) starting with a".into()))?;
        let p = spec.bits();
        let omega = omega.clone().with_precision(p).value();
        let inv_twist = if omega.repr().significand().is_zero() {
            None
        } else {
            let t = hp::int(p, 2) * hp::pi(p) * &omega;
            Some(Complex::new(hp::int(p, 0), t).inv())
        };
        let d = spec.d();
        let images: Vec<Vec<usize>> = (0..d).map(|b| spec.z.image(b).iter().map(|&x| x as usize).collect()).collect();
        let mut eng = TwistEngine {
            omega,
            seed,
            levels: 0,
            p,
            len: vec![spec.s.clone()],
            phi: Vec::new(),
            child_phase: vec![Vec::new()],
            images,
            s: spec.s.clone(),
            f: f.clone(),
            inv_twist,
        };
        let phi0 = (0..d).map(|b| eng.partial_tile(b, &spec.s[b])).collect();
        eng.phi.push(phi0);
        while eng.len[eng.levels][seed] < *min_len {
            if eng.levels >= MAX_LEVELS {
                return Err(SpectralError::Budget {
                    what: "orbit hierarchy".into(),
                    needed: format!("length {:e}", hp::to_f64(min_len)),
                    budget: format!("{MAX_LEVELS} levels"),
                });
            }
            eng.push_level();
        }
        Ok(eng)
    }

    /// Engine whose top block is at least 64 R long, so windows of length R sit well inside.
    pub fn for_window(
        spec: &SuspensionSpec,
        f: &CylFunction,
        omega: &Real,
        r_big: &Real,
    ) -> Result<Self, SpectralError> {
        let min_len = r_big * hp::int(spec.bits(), 64);
        Self::new(spec, f, omega, &min_len)
    }

    fn push_level(&mut self) {
        let m = self.levels;
        let d = self.images.len();
        let mut len = Vec::with_capacity(d);
        let mut phi = Vec::with_capacity(d);
        let mut phases = Vec::with_capacity(d);
        for b in 0..d {
            let mut off = hp::int(self.p, 0);
            let mut acc = Complex::zero(self.p);
            let mut ph = Vec::with_capacity(self.images[b].len());
            for &c in &self.images[b] {
                let e = Complex::cis_turns(&(&self.omega * &off));
                acc = &acc + &(&e * &self.phi[m][c]);
                ph.push(e);
                off += &self.len[m][c];
            }
            len.push(off);
            phi.push(acc);
            phases.push(ph);
        }
        self.len.push(len);
        self.phi.push(phi);
        self.child_phase.push(phases);
        self.levels += 1;
    }

    pub fn total_len(&self) -> &Real {
        &self.len[self.levels][self.seed]
    }

    pub fn block_len(&self, m: usize, b: usize) -> &Real {
        &self.len[m][b]
    }

    pub fn block_integral(&self, m: usize, b: usize) -> &Complex {
        &self.phi[m][b]
    }

    /// ∫_0^x ψ_b(t) e^{2πiωt} dt over the first x units of a b-tile.
    fn partial_tile(&self, b: usize, x: &Real) -> Complex {
        let p = self.p;
        match &self.f.kind {
            CylKind::Level0 { c } => match &self.inv_twist {
                None => Complex::real(&c[b] * x),
                Some(inv) => {
                    let e = &Complex::cis_turns(&(&self.omega * x)) - &Complex::one(p);
                    (&e * inv).scale(&c[b])
                }
            },
            CylKind::Lip { .. } => {
                let n = self.f.nodes;
                let h = x / hp::int(p, n as i64);
                let mut acc = Complex::zero(p);
                for k in 0..=n {
                    let t = &h * hp::int(p, k as i64);
                    let mut v = self.f.value(b, &t, &self.s[b]);
                    if k == 0 || k == n {
                        v /= hp::int(p, 2);
                    }
                    acc = &acc + &Complex::cis_turns(&(&self.omega * &t)).scale(&v);
                }
                acc.scale(&h)
            }
        }
    }

    /// I(T) = ∫_0^T f(φ_t y_0) e^{2πiωt} dt with y_0 the start of the top block.
    pub fn prefix(&self, t: &Real) -> Result<Complex, SpectralError> {
        let zero = hp::int(self.p, 0);
        if t < &zero || t > self.total_len() {
            return Err(SpectralError::Budget {
                what: "orbit position".into(),
                needed: format!("{:e}", hp::to_f64(t)),
                budget: format!("top block length {:e}", hp::to_f64(self.total_len())),
            });
        }
        let mut acc = Complex::zero(self.p);
        let mut ph = Complex::one(self.p);
        let mut b = self.seed;
        let mut x = t.clone().with_precision(self.p).value();
        for m in (1..=self.levels).rev() {
            let mut entered = false;
            for (k, &c) in self.images[b].iter().enumerate() {
                let l = &self.len[m - 1][c];
                if &x >= l {
                    acc = &acc + &(&(&ph * &self.child_phase[m][b][k]) * &self.phi[m - 1][c]);
                    x -= l;
                } else {
                    ph = &ph * &self.child_phase[m][b][k];
                    b = c;
                    entered = true;
                    break;
                }
            }
            if !entered {
                return Ok(acc);
            }
        }
        Ok(&acc + &(&ph * &self.partial_tile(b, &x)))
    }

    /// S_R(y, ω) for y at distance t from the start of the top block.
    pub fn twisted_sum(&self, t: &Real, r_big: &Real) -> Result<Complex, SpectralError> {
        let diff = &self.prefix(&(t + r_big))? - &self.prefix(t)?;
        Ok(&Complex::cis_turns(&(-(&self.omega * t))) * &diff)
    }

    /// |S_R(y, ω)|, skipping the unimodular phase.
    pub fn abs_sum(&self, t: &Real, r_big: &Real) -> Result<Real, SpectralError> {
        Ok((&self.prefix(&(t + r_big))? - &self.prefix(t)?).abs())
    }

    /// Starts uniform on [0, len - R); uniform arc length along the top block
    /// approximates the invariant measure up to O(R / len).
    pub fn sample_starts(&self, r_big: &Real, samples: usize, seed: u64) -> Result<Vec<Real>, SpectralError> {
        let span = self.total_len() - r_big;
        if span <= hp::int(self.p, 0) {
            return Err(SpectralError::Budget {
                what: "start sampling".into(),
                needed: format!("window {:e}", hp::to_f64(r_big)),
                budget: format!("top block length {:e}", hp::to_f64(self.total_len())),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..samples).map(|_| hp::from_f64(self.p, rng.gen::<f64>()) * &span).collect())
    }

    pub fn abs_sums(&self, starts: &[Real], r_big: &Real) -> Result<Vec<Real>, SpectralError> {
        starts.par_iter().map(|t| self.abs_sum(t, r_big)).collect()
    }
}

/// Twisted integral from the point at arc length `start` along the seeded orbit.
pub fn twisted_sum(
    spec: &SuspensionSpec,
    f: &CylFunction,
    start: &Real,
    r_big: &Real,
    omega: &Real,
) -> Result<Complex, SpectralError> {
    let p = spec.bits();
    if r_big < &hp::int(p, 1) {
        return Err(SpectralError::Domain(format!("R = {} is below 1", hp::to_f64(r_big))));
    }
    let eng = TwistEngine::new(spec, f, omega, &(start + r_big))?;
    eng.twisted_sum(start, r_big)
}

/// Tile-by-tile evaluation over an explicitly expanded word; the oracle for the engine.
pub fn twisted_sum_direct(
    spec: &SuspensionSpec,
    f: &CylFunction,
    start: &Real,
    r_big: &Real,
    omega: &Real,
    budget: usize,
) -> Result<Complex, SpectralError> {
    let p = spec.bits();
    let seed = *spec
        .z
        .fixed_point_seeds()
        .first()
        .ok_or_else(|| SpectralError::Invalid("no letter a with ζ(a) starting with a".into()))?;
    let end = start + r_big;
    let mut w = vec![seed as u8];
    let tot = |w: &[u8]| w.iter().fold(hp::int(p, 0), |a, &x| a + &spec.s[x as usize]);
    while tot(&w) < end {
        w = spec.z.apply(&w, budget).map_err(|_| SpectralError::Budget {
            what: "direct evaluation".into(),
            needed: format!("more than {budget} tiles"),
            budget: budget.to_string(),
        })?;
    }
    let omega = omega.clone().with_precision(p).value();
    let zero_w = omega.repr().significand().is_zero();
    let inv = (!zero_w).then(|| Complex::new(hp::int(p, 0), hp::int(p, 2) * hp::pi(p) * &omega).inv());
    let mut acc = Complex::zero(p);
    let mut off = hp::int(p, 0);
    for &x in &w {
        let b = x as usize;
        let next = &off + &spec.s[b];
        let lo = hp::max(&off, start);
        let hi = if next < end { next.clone() } else { end.clone() };
        if hi > lo {
            match &f.kind {
                CylKind::Level0 { c } => {
                    let piece = match &inv {
                        None => Complex::real(&hi - &lo),
                        Some(inv) => {
                            let e = &Complex::cis_turns(&(&omega * &(&hi - start)))
                                - &Complex::cis_turns(&(&omega * &(&lo - start)));
                            &e * inv
                        }
                    };
                    acc = &acc + &piece.scale(&c[b]);
                }
                CylKind::Lip { .. } => {
                    let n = f.nodes;
                    let h = (&hi - &lo) / hp::int(p, n as i64);
                    let mut part = Complex::zero(p);
                    for k in 0..=n {
                        let u = &lo + &h * hp::int(p, k as i64);
                        let mut v = f.value(b, &(&u - &off), &spec.s[b]);
                        if k == 0 || k == n {
                            v /= hp::int(p, 2);
                        }
                        part = &part + &Complex::cis_turns(&(&omega * &(&u - start))).scale(&v);
                    }
                    acc = &acc + &part.scale(&h);
                }
            }
        }
        off = next;
        if off >= end {
            break;
        }
    }
    Ok(acc)
}

/// Monte Carlo estimate of G_R = (1/R) E|S_R|^2 with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
    pub max_abs: f64,
}

pub fn g_r(engine: &TwistEngine, r_big: &Real, samples: usize, seed: u64) -> Result<GrEstimate, SpectralError> {
    if samples == 0 {
        return Err(SpectralError::Invalid("at least one sample is needed".into()));
    }
    let starts = engine.sample_starts(r_big, samples, seed)?;
    let sums = engine.abs_sums(&starts, r_big)?;
    let vals: Vec<f64> = sums.iter().map(|x| hp::to_f64(&(x * x / r_big))).collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let stderr = if vals.len() > 1 {
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    let max_abs = sums.iter().map(hp::to_f64).fold(0.0, f64::max);
    Ok(GrEstimate { mean, stderr, samples, seed, max_abs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hp::Precision;
    use crate::subst::parse_substitution;

    fn salem_spec() -> SuspensionSpec {
        let z = parse_substitution("1 -> 1,4\n2 -> 3\n3 -> 4\n4 -> 2,1").unwrap();
        SuspensionSpec::self_similar(&z, Precision::new(256).unwrap()).unwrap()
    }

    #[test]
    fn constant_function_closed_forms() {
        let z = parse_substitution("1 -> 1,1").unwrap();
        let spec = SuspensionSpec::unit(&z, Precision::default()).unwrap();
        let one = CylFunction::one(&spec);
        let p = 256;
        let s = twisted_sum(&spec, &one, &hp::ratio(p, 1, 3), &hp::int(p, 5), &hp::int(p, 0)).unwrap();
        assert_eq!(s.re, hp::int(p, 5));
        let s = twisted_sum(&spec, &one, &hp::int(p, 0), &hp::int(p, 1), &hp::int(p, 1)).unwrap();
        assert!(s.abs() < hp::pow2(p, -200));
        let w = hp::ratio(p, 3, 10);
        let r = hp::int(p, 7);
        let s = twisted_sum(&spec, &one, &hp::int(p, 2), &r, &w).unwrap();
        let expect = (&Complex::cis_turns(&(&w * &r)) - &Complex::one(p)).abs() / (hp::int(p, 2) * hp::pi(p) * &w);
        assert!(hp::abs(&(s.abs() - expect)) < hp::pow2(p, -200));
        assert!(twisted_sum(&spec, &one, &hp::int(p, 0), &hp::ratio(p, 1, 2), &w).is_err());
    }

    #[test]
    fn engine_matches_direct_sum() {
        let spec = salem_spec();
        let p = spec.bits();
        let f = CylFunction::level0_f64(&spec, &[1.0, -0.5, 0.25, 0.0]).unwrap().centered(&spec);
        for (w, t, r) in [(0.37, 3.2, 40.0), (1.0, 0.0, 17.5), (2.9, 111.1, 300.0)] {
            let w = hp::from_f64(p, w);
            let t = hp::from_f64(p, t);
            let r = hp::from_f64(p, r);
            let a = twisted_sum(&spec, &f, &t, &r, &w).unwrap();
            let b = twisted_sum_direct(&spec, &f, &t, &r, &w, 1 << 20).unwrap();
            assert!((&a - &b).abs() < hp::pow2(p, -180));
        }
    }

    #[test]
    fn lip_engine_close_to_direct() {
        let spec = salem_spec();
        let p = spec.bits();
        let rows = vec![vec![0.0, 1.0, 0.0], vec![0.5, 0.5], vec![1.0, -1.0], vec![0.0, 0.2, 0.4, 0.2]];
        let f = CylFunction::lip(&spec, &rows, 64).unwrap();
        let w = hp::from_f64(p, 0.61);
        let (t, r) = (hp::from_f64(p, 1.5), hp::from_f64(p, 25.0));
        let a = twisted_sum(&spec, &f, &t, &r, &w).unwrap();
        let b = twisted_sum_direct(&spec, &f, &t, &r, &w, 1 << 20).unwrap();
        assert!(hp::to_f64(&(&a - &b).abs()) < 1e-2);
    }

    #[test]
    fn additivity_and_trivial_bound() {
        let spec = salem_spec();
        let p = spec.bits();
        let f = CylFunction::level0_f64(&spec, &[2.0, -1.0, 0.5, -0.25]).unwrap();
        let w = hp::from_f64(p, 0.731);
        let eng = TwistEngine::new(&spec, &f, &w, &hp::int(p, 10_000)).unwrap();
        let (t, r1, r2) = (hp::from_f64(p, 12.25), hp::from_f64(p, 100.5), hp::from_f64(p, 377.0));
        let whole = eng.twisted_sum(&t, &(&r1 + &r2)).unwrap();
        let a = eng.twisted_sum(&t, &r1).unwrap();
        let b = eng.twisted_sum(&(&t + &r1), &r2).unwrap();
        let glued = &a + &(&Complex::cis_turns(&(&w * &r1)) * &b);
        assert!((&whole - &glued).abs() < hp::pow2(p, -180));
        assert!(whole.abs() <= &f.sup * (&r1 + &r2));
        let full = eng.prefix(eng.total_len()).unwrap();
        assert_eq!(&full, eng.block_integral(eng.levels, eng.seed));
    }

    #[test]
    fn g_r_constant_and_determinism() {
        let spec = salem_spec();
        let p = spec.bits();
        let one = CylFunction::one(&spec);
        let r = hp::int(p, 50);
        let eng = TwistEngine::for_window(&spec, &one, &hp::int(p, 0), &r).unwrap();
        let g = g_r(&eng, &r, 16, 7).unwrap();
        assert!((g.mean - 50.0).abs() < 1e-12);
        assert!(g.stderr < 1e-12);
        let f = CylFunction::level0_f64(&spec, &[1.0, 0.0, 0.0, 0.0]).unwrap().centered(&spec);
        let w = hp::from_f64(p, 0.4);
        let eng = TwistEngine::for_window(&spec, &f, &w, &r).unwrap();
        assert_eq!(g_r(&eng, &r, 32, 11).unwrap(), g_r(&eng, &r, 32, 11).unwrap());
        assert!(g_r(&eng, &r, 0, 11).is_err());
    }
}
