//! Impedance construction at a single sample: decompose p, pick a density,
//! solve for h, and confirm by back-substitution. Also shows that the
//! (h, N) pair is not unique: every density-ratio target below one gives
//! another valid solution.
//!
//! Run with `cargo run --example point_inversion`.

use std::f64::consts::PI;

use num_complex::Complex64;

use metamat::inversion::{forward_p, polar_decompose, solve_h_detailed};

fn main() {
    // A purely damping perturbation: p = -2 pi i.
    let p = Complex64::new(0.0, -2.0 * PI);
    let polar = polar_decompose(p);
    println!("p = {p}");
    println!("  modulus R = {:.6}, argument psi = {:.6} rad", polar.modulus, polar.argument);

    for rho_target in [0.3, 0.5, 0.9] {
        let density = polar.modulus / (4.0 * PI * rho_target);
        let sol = solve_h_detailed(p, density).unwrap();
        let back = forward_p(sol.impedance, density).unwrap();
        println!("\nrho target {rho_target}:");
        println!("  N = {density:.6}");
        println!(
            "  h = {:+.6} {:+.6}i   (r = {:.6}, cos phi = {:.6}, sin phi = {:.6})",
            sol.impedance.re, sol.impedance.im, sol.radius, sol.cos_phi, sol.sin_phi
        );
        println!(
            "  back-substituted 4 pi N h/(1+h) = {:+.6} {:+.6}i   |residual| = {:.3e}",
            back.re,
            back.im,
            (back - p).norm()
        );
        assert!(sol.impedance.im <= 0.0, "Im h must stay nonpositive");
    }

    println!("\nEvery target reproduces p; the impedance/density split is a free choice.");
}
