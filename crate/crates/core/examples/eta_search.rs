//! Lattice search for η with ‖ηA^n s‖ < 0.1 on the torus for n < 500.

use salem_lab::algebra::{classify, companion, eigensystem, parse_poly};
use salem_lab::bernoulli::{eta_search, EtaConfig};
use salem_lab::hp::{Precision, Real};

fn main() {
    let poly = parse_poly("1,-1,-1,-1,1").unwrap();
    let a = companion(&poly);
    let prof = classify(&poly, Precision::new(256).unwrap()).unwrap();
    let eig = eigensystem(&a, &prof).unwrap();
    let s: Vec<Real> = eig.e[0].iter().map(|z| z.re.clone()).collect();
    let r = eta_search(&prof, &a, &s, &EtaConfig::default()).unwrap();
    println!("coefficients {:?}", r.coeffs);
    println!("max distance {:.4} at n = {} ({} bits)", r.max_dist, r.argmax_n, r.verify_bits);
}
