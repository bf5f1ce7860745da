use proptest::prelude::*;

use salem_lab::algebra::{classify, companion, eigensystem, parse_poly};
use salem_lab::bernoulli::{fourier, BernoulliSpec};
use salem_lab::cli::{parse_real, RunConfig};
use salem_lab::ekspansion::ek_expand;
use salem_lab::hp::{self, Precision, Real};
use salem_lab::lattice::{build_lattice, LatticePair};
use salem_lab::spectral::hof_bound;
use salem_lab::subst::{
    build_matrix, find_good_power, parse_substitution, population, ReturnWordOptions, Substitution,
};

fn substitution() -> impl Strategy<Value = Substitution> {
    (2usize..=4).prop_flat_map(|d| {
        prop::collection::vec(prop::collection::vec(1..=d, 1..5), d).prop_map(|imgs| Substitution::new(&imgs).unwrap())
    })
}

fn salem_lattice() -> LatticePair {
    let z = parse_substitution(include_str!("../data/salem_quartic.txt")).unwrap();
    let g = find_good_power(&z, 12, 16, ReturnWordOptions::default()).unwrap().unwrap();
    build_lattice(&g.return_words, &build_matrix(&z).transpose()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_counts_populations(z in substitution(), w in prop::collection::vec(0u8..2, 1..12)) {
        let m = build_matrix(&z);
        let img = z.apply(&w, 1 << 16).unwrap();
        prop_assert_eq!(population(&img, z.d()), m.mul_vec(&population(&w, z.d())));
    }

    #[test]
    fn nearest_point_within_covering_bound(x in prop::collection::vec(-50.0f64..50.0, 4)) {
        let lat = salem_lattice();
        let xs: Vec<Real> = x.iter().map(|&v| hp::from_f64(256, v)).collect();
        let t = lat.nearest_point(&xs);
        prop_assert!(t.dist <= lat.covering_radius_bound());
        prop_assert!(t.dist == lat.torus_dist(&xs));
    }

    #[test]
    fn ek_remainders_stay_bounded(num in 1i64..500, den in 1i64..500) {
        let poly = parse_poly("1,-1,-1,-1,1").unwrap();
        let a = companion(&poly);
        let prof = classify(&poly, Precision::new(256).unwrap()).unwrap();
        let eig = eigensystem(&a, &prof).unwrap();
        let s: Vec<Real> = eig.e[0].iter().map(|z| z.re.clone()).collect();
        let lat = LatticePair::integer(4, &a).unwrap();
        let tr = ek_expand(&hp::ratio(256, num, den), &s, &lat, &eig, 60).unwrap();
        let half = hp::ratio(256, 1, 2);
        for st in &tr.steps {
            prop_assert!(st.eps_inf <= half);
        }
        for w in tr.steps.windows(2) {
            let av: Vec<Real> = (0..4)
                .map(|i| (0..4).fold(hp::int(256, 0), |acc, j| acc + hp::int(256, a.get(i, j)) * &w[0].eps[j]))
                .collect();
            for ((e, x), z) in w[1].eps.iter().zip(&av).zip(&w[1].z) {
                let gap = hp::to_f64(&(&(e - x) - z));
                prop_assert!(gap.abs() < 1e-40);
            }
        }
    }

    #[test]
    fn fourier_is_bounded_and_hermitian(l in 0.05f64..0.95, p in 0.01f64..0.99, xi in -200.0f64..200.0) {
        let spec = BernoulliSpec::from_f64(l, p, Precision::new(256).unwrap()).unwrap();
        let a = fourier(&spec, &hp::from_f64(256, xi), 1e-10).unwrap();
        let b = fourier(&spec, &hp::from_f64(256, -xi), 1e-10).unwrap();
        prop_assert!(a.abs <= 1.0 + a.error);
        prop_assert!((a.re - b.re).abs() <= a.error + b.error + 1e-15);
        prop_assert!((a.im + b.im).abs() <= a.error + b.error + 1e-15);
    }

    #[test]
    fn hof_bound_is_linear_in_g(g in 0.0f64..100.0, k in 1i64..50, r in 1.0f64..1e12) {
        let rb = hp::from_f64(256, r);
        let h1 = hof_bound(&hp::from_f64(256, g), &rb).unwrap();
        let hk = hof_bound(&(hp::from_f64(256, g) * hp::int(256, k)), &rb).unwrap();
        let diff = hp::to_f64(&(&hk.bound - &(h1.bound.clone() * hp::int(256, k))));
        prop_assert!(diff.abs() <= 1e-60 * (1.0 + hp::to_f64(&hk.bound)));
    }

    #[test]
    fn fractions_and_decimals_agree(n in -10_000i64..10_000, e in 0u32..6) {
        let den = 10i64.pow(e);
        let frac = parse_real(&format!("{n}/{den}"), 256).unwrap();
        let s = format!("{}{}e-{e}", if n < 0 { "-" } else { "" }, n.unsigned_abs());
        let dec = parse_real(&s, 256).unwrap();
        prop_assert!(hp::to_f64(&hp::abs(&(&frac - &dec))) < 1e-70);
    }

    #[test]
    fn config_hash_ignores_out_and_workers(seed in any::<u64>(), w in 1usize..64, prec in 128usize..2048) {
        let base = RunConfig { seed, precision: prec, ..RunConfig::default() };
        let moved = RunConfig { out: Some("elsewhere".into()), workers: Some(w), ..base.clone() };
        prop_assert_eq!(base.hash(), moved.hash());
        let back = RunConfig::from_json(&serde_json::to_string(&moved).unwrap()).unwrap();
        prop_assert_eq!(&back, &moved);
        let other = RunConfig { seed: seed.wrapping_add(1), ..base.clone() };
        prop_assert_ne!(base.hash(), other.hash());
    }
}
