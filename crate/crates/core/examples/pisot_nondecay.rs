//! Running infimum of |ν̂(α^N)| for the golden mean, where the transform does not decay.

use salem_lab::algebra::{classify, parse_poly};
use salem_lab::bernoulli::pisot_nondecay;
use salem_lab::hp::Precision;

fn main() {
    let prof = classify(&parse_poly("-1,-1,1").unwrap(), Precision::new(256).unwrap()).unwrap();
    let r = pisot_nondecay(&prof, 40, 1.0).unwrap();
    for (n, v) in r.running_inf.iter().enumerate().step_by(5) {
        println!("N = {n:>2}  inf_(m<=N) |F(alpha^m)| = {v:.6e}");
    }
    println!("infimum {:.6e} at N = {}", r.infimum, r.argmin);
}
