//! Ψ(B), the comparison Ψ(B)^Ψ(B) against B^{1/2}, and the tower height of R_0.

use salem_lab::ekspansion::{psi, psi_power_sides, r0_tower};

fn main() {
    println!("{:>6} {:>8} {:>10} {:>10} {:>6}  log2 log_a R0", "B", "psi", "lhs", "rhs", "holds");
    for b in [16u64, 17, 64, 256, 4096, 65535, 65536, 1 << 20] {
        let (l, r) = psi_power_sides(b).unwrap();
        println!(
            "{b:>6} {:>8.4} {l:>10.4} {r:>10.4} {:>6}  {}",
            psi(b as f64).unwrap(),
            l >= r,
            r0_tower(b, 1.0).unwrap()
        );
    }
}
