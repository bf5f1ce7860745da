//! |ν̂_{λ,p}(α^N)| for λ = 1/α (quartic Salem), p = 1/4, with the log* envelope and γ cap.

use salem_lab::algebra::{classify, parse_poly};
use salem_lab::bernoulli::{alpha_power_grid, biased_gamma_cap, salem_logstar_decay};
use salem_lab::hp::Precision;

fn main() {
    let prof = classify(&parse_poly("1,-1,-1,-1,1").unwrap(), Precision::new(256).unwrap()).unwrap();
    let grid = alpha_power_grid(&prof, 48);
    let r = salem_logstar_decay(&prof, 0.25, &grid, 1e-12).unwrap();
    for p in r.points.iter().step_by(6) {
        println!("xi = {:>12.4e}  |F| = {:.6}  envelope = {:.6}", p.xi, p.abs_fourier, p.envelope_value);
    }
    println!("all under envelope: {}, gamma cap = {:.5}", r.all_ok, biased_gamma_cap(&prof, 0.25).unwrap());
}
