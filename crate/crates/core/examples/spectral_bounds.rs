//! Twisted sums against the Hof, product and combined bounds on the Salem suspension.

use salem_lab::ekspansion::RateParams;
use salem_lab::hp::Precision;
use salem_lab::lattice::LatticePair;
use salem_lab::spectral::{spectral_sweep, CombinedConstants, CylFunction, SuspensionSpec, SweepConfig};
use salem_lab::subst::{build_matrix, parse_substitution};

fn main() {
    let z = parse_substitution(include_str!("../data/salem_quartic.txt")).unwrap();
    let spec = SuspensionSpec::self_similar(&z, Precision::new(256).unwrap()).unwrap();
    let lat = LatticePair::integer(4, &build_matrix(&z).transpose()).unwrap();
    let f = CylFunction::level0_f64(&spec, &[1.0, 0.0, 0.0, 0.0]).unwrap().centered(&spec);
    let cfg = SweepConfig {
        omegas: vec![0.0, 0.3, 1.0],
        radii_x: vec![2.0, 4.0, 8.0],
        samples: 16,
        seed: 7,
        consts: CombinedConstants::default(),
        params: RateParams { beta: 1.0, gamma: 8.0, upsilon: 2.0, k0: 1, b: 16, alpha: spec.alpha_f64() },
    };
    let report = spectral_sweep(&spec, &lat, &f, &cfg).unwrap();
    print!("{}", report.to_csv());
}
