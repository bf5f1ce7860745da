//! Fitted decay exponents against their caps, on slow-decay frequencies ξ = ηα^n where
//! η is chosen so that ηα^n is close to the lattice for ε_n = c/√n, pooled over c.

use salem_lab::algebra::{classify, companion, eigensystem, parse_poly, NumberProfile};
use salem_lab::bernoulli::{biased_gamma_cap, fit_beta, fit_gamma, slow_decay_probe, unbiased_beta_cap};
use salem_lab::hp::{Precision, Real};

const FIT_TOL: f64 = 0.05;

fn pooled(p: f64) -> (NumberProfile, Vec<(f64, f64)>) {
    let poly = parse_poly("1,-1,-1,-1,1").unwrap();
    let a = companion(&poly);
    let prof = classify(&poly, Precision::new(256).unwrap()).unwrap();
    let eig = eigensystem(&a, &prof).unwrap();
    let s: Vec<Real> = eig.e[0].iter().map(|z| z.re.clone()).collect();
    let ns: Vec<usize> = (1..=10).map(|i| 100 * i).collect();
    let mut pts = Vec::new();
    for c in [0.5, 1.0, 2.0] {
        for q in slow_decay_probe(&prof, &a, &s, p, &ns, c, 20_000_000).unwrap() {
            pts.push((q.log_alpha_xi, q.abs_fourier));
        }
    }
    (prof, pts)
}

#[test]
fn biased_gamma_below_cap() {
    let (prof, pts) = pooled(0.25);
    let cap = biased_gamma_cap(&prof, 0.25).unwrap();
    let fit = fit_gamma(&pts).unwrap();
    println!("p = 1/4: fitted gamma {:.3} over L in {:?}, cap {cap:.4}", fit.gamma, fit.window);
    assert!(fit.gamma <= cap + FIT_TOL);
    assert!(fit.window.1 <= 10.0 * fit.window.0 + 1e-9);
}

#[test]
fn unbiased_beta_below_one() {
    let (prof, pts) = pooled(0.5);
    let fit = fit_beta(&pts, prof.alpha_f64()).unwrap();
    println!("p = 1/2: fitted beta {:.3} (gamma {:.3}) over L in {:?}", fit.beta, fit.gamma, fit.window);
    assert!(fit.beta <= unbiased_beta_cap() + FIT_TOL);
}
