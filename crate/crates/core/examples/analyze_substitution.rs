//! Matrix, classification, good power and return-word lattice for the quartic Salem substitution.

use salem_lab::algebra::{charpoly, classify};
use salem_lab::hp::Precision;
use salem_lab::lattice::build_lattice;
use salem_lab::subst::{build_matrix, find_good_power, is_primitive, parse_substitution, ReturnWordOptions};

fn main() {
    let z = parse_substitution(include_str!("../data/salem_quartic.txt")).unwrap();
    let m = build_matrix(&z);
    println!("S = {:?}, primitive = {:?}", m.to_rows(), is_primitive(&m).exponent);
    let prof = classify(&charpoly(&m).unwrap(), Precision::new(256).unwrap()).unwrap();
    println!("{:?}, alpha = {:.15}", prof.classification, prof.alpha_f64());

    let g = find_good_power(&z, 12, 16, ReturnWordOptions::default()).unwrap().expect("no good power");
    println!("good power k = {}", g.power);
    for r in g.return_words.all().take(8) {
        println!("  letter {} word {:?} pop {:?} good={}", r.letter + 1, r.one_based(), r.population, r.good);
    }
    let lat = build_lattice(&g.return_words, &m.transpose()).unwrap();
    println!(
        "a_L = {}/{}, b_L = {}/{}, c_AL = {}/{}",
        lat.a_l.num, lat.a_l.den, lat.b_l.num, lat.b_l.den, lat.c_al.num, lat.c_al.den
    );
}
