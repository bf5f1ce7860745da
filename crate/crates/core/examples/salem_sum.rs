//! Sum bound Σ_{n<L} ‖wα^n‖² >= δ_1 over a grid of w for the quartic Salem number.

use rayon::prelude::*;
use salem_lab::algebra::classify;
use salem_lab::ekspansion::{calibrate_c2, delta1, grid_weights, select_l, PowerTable};
use salem_lab::hp::{self, Precision};

fn main() {
    let prof = classify(&[1, -1, -1, -1, 1], Precision::new(512).unwrap()).unwrap();
    let grid = grid_weights(prof.degree, 1000);
    let c2 = calibrate_c2(&prof, &grid, 64).expect("no run of small windows observed");
    let l = select_l(&prof, c2);
    println!("delta1 = {}, c2 = {c2:.6}, L = {l}", delta1(&prof));
    let table = PowerTable::new(&prof, l as usize + prof.degree);
    let (min, at) = grid
        .par_iter()
        .map(|w| (hp::to_f64(&table.sum_of_squares(w, l as usize)), w.num[1]))
        .reduce(|| (f64::INFINITY, -1), |a, b| if b.0 < a.0 { b } else { a });
    println!("min over grid of sum_(n<L) = {min:.6} at i = {at}");
}
