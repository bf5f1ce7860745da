//! Vector digit expansion of ω = 1/3 for the companion of x^4 - x^3 - x^2 - x + 1.

use salem_lab::algebra::{classify, companion, eigensystem, parse_poly};
use salem_lab::ekspansion::{bad_set_predicates, ek_expand};
use salem_lab::hp::{self, Precision, Real};
use salem_lab::lattice::LatticePair;

fn main() {
    let steps = 300;
    let poly = parse_poly("1,-1,-1,-1,1").unwrap();
    let a = companion(&poly);
    let probe = classify(&poly, Precision::new(128).unwrap()).unwrap();
    let bits = Precision::required_for(steps, probe.log2_alpha(), 128);
    let prof = classify(&poly, Precision::new(bits).unwrap()).unwrap();
    let eig = eigensystem(&a, &prof).unwrap();
    let s: Vec<Real> = eig.e[0].iter().map(|z| z.re.clone()).collect();
    let lat = LatticePair::integer(4, &a).unwrap();
    let tr = ek_expand(&hp::ratio(bits, 1, 3), &s, &lat, &eig, steps).unwrap();
    println!("{bits} bits, checks: {:?}", tr.checks);
    let nonzero = tr.steps.iter().filter(|st| !st.z_is_zero()).count();
    println!("{nonzero} of {} digits nonzero", tr.len());
    for k in 1..=3 {
        let b = bad_set_predicates(&tr, k, &hp::int(bits, 16)).unwrap();
        println!("k={k} n_k={} E1={} E2={} E3={}", b.n_k, b.e1, b.e2, b.e3);
    }
}
