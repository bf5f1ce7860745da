//! Scales n_k = 2^{k!} and the per-instance predicates (E1)-(E3).

use dashu_int::IBig;
use serde::Serialize;

use super::{EkError, EkTrace};
use crate::hp::{self, Real};

/// Largest k whose scale is materialized; 2^{k!} has k! bits.
const MAX_SCALE_K: u32 = 10;

pub(crate) fn factorial(k: u32) -> IBig {
    (1..=k).fold(IBig::ONE, |acc, i| acc * IBig::from(i))
}

/// n_k = 2^{k!}.
pub fn scales(k: u32) -> Result<IBig, EkError> {
    if k > MAX_SCALE_K {
        return Err(EkError::Budget { needed: format!("2^({k}!)"), budget: 1 << 22 });
    }
    let e: usize = factorial(k).try_into().unwrap();
    Ok(IBig::ONE << e)
}

#[derive(Debug, Clone, Serialize)]
pub struct BadSet {
    pub k: u32,
    pub n_k: u64,
    pub n_prev: u64,
    pub nonzero_digits: usize,
    pub e1: bool,
    pub e2: bool,
    pub e3: bool,
    pub eps3: f64,
    pub e3_threshold: f64,
    /// |ω| ∈ [B^{-1}, B], the range in which the predicates define E_k(B).
    pub omega_in_range: bool,
}

impl BadSet {
    pub fn all(&self) -> bool {
        self.e1 && self.e2 && self.e3
    }
}

/// (E1) #{1 <= l <= n_k : z_l != 0} < k/2, (E2) z_l = 0 on (n_{k-1}, n_k),
/// (E3) |ε_{n_{k-1}}|_3 < (2k/n_k)^{1/2}.
pub fn bad_set_predicates(trace: &EkTrace, k: u32, b: &Real) -> Result<BadSet, EkError> {
    if k == 0 {
        return Err(EkError::Domain("k must be at least 1".into()));
    }
    let nk = scales(k)?;
    let len = trace.len();
    let nk_u: usize = match usize::try_from(nk.clone()) {
        Ok(v) if v < len => v,
        _ => return Err(EkError::TraceTooShort { needed: format!("n_{k} = {nk}"), len }),
    };
    let np: usize = scales(k - 1)?.try_into().unwrap();
    let nonzero = trace.steps[1..=nk_u].iter().filter(|s| !s.z_is_zero()).count();
    let e1 = 2 * nonzero < k as usize;
    let e2 = trace.steps[(np + 1).min(nk_u)..nk_u].iter().all(|s| s.z_is_zero());
    let p = trace.precision;
    let eps3 = trace.steps[np].eps3_abs.clone().ok_or_else(|| EkError::Invalid("|ε|_3 needs d >= 3".into()))?;
    let thr2 = hp::int(p, 2 * k as i64) / hp::big(p, &nk);
    let e3 = &eps3 * &eps3 < thr2;
    let w = hp::abs(&trace.omega);
    let omega_in_range = w >= hp::int(p, 1) / b && &w <= b;
    Ok(BadSet {
        k,
        n_k: nk_u as u64,
        n_prev: np as u64,
        nonzero_digits: nonzero,
        e1,
        e2,
        e3,
        eps3: hp::to_f64(&eps3),
        e3_threshold: hp::to_f64(&thr2).sqrt(),
        omega_in_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_scales() {
        assert_eq!(scales(0).unwrap(), IBig::from(2));
        assert_eq!(scales(1).unwrap(), IBig::from(2));
        assert_eq!(scales(2).unwrap(), IBig::from(4));
        assert_eq!(scales(3).unwrap(), IBig::from(64));
        assert_eq!(scales(4).unwrap(), IBig::from(16_777_216));
        assert_eq!(scales(5).unwrap(), IBig::ONE << 120);
        assert!(scales(11).is_err());
    }

    #[test]
    fn first_scale_has_empty_gap() {
        // n_0 = n_1 = 2, so (E2) is vacuous at k = 1.
        use crate::algebra::{classify, companion, eigensystem, parse_poly};
        use crate::ekspansion::ek_expand;
        use crate::hp::Precision;
        use crate::lattice::LatticePair;
        let poly = parse_poly("1,-1,-1,-1,1").unwrap();
        let prof = classify(&poly, Precision::new(512).unwrap()).unwrap();
        let a = companion(&poly);
        let eig = eigensystem(&a, &prof).unwrap();
        let s: Vec<Real> = eig.e[0].iter().map(|z| z.re.clone()).collect();
        let lat = LatticePair::integer(4, &a).unwrap();
        let w = hp::ratio(512, 1, 3);
        let tr = ek_expand(&w, &s, &lat, &eig, 20).unwrap();
        let b = hp::int(512, 16);
        let bs = bad_set_predicates(&tr, 1, &b).unwrap();
        assert!(bs.e2);
        assert_eq!((bs.n_prev, bs.n_k), (2, 2));
    }
}
