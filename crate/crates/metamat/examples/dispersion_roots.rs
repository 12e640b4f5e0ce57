//! Multi-branch dispersion: for n(omega) = 1/(1 + omega^2) the relation
//! omega n(omega) = k c has two roots for small k, and the upper branch
//! carries a group velocity opposite to the phase velocity.
//!
//! Run with `cargo run --example dispersion_roots`.

use metamat::dispersion::{
    group_velocity, negative_refraction_criterion, solve_dispersion, DispersionModel,
};
use metamat::fields::MediumConstants;

fn main() {
    let model = DispersionModel::inverse_quadratic(1.0).unwrap();
    let medium = MediumConstants::new(1.0).unwrap();

    for k in [0.4, 0.49, 0.6] {
        let roots = solve_dispersion(&model, k, &medium).unwrap();
        println!("k c = {k}: {} root(s) {roots:?}", roots.len());
        for &omega in &roots {
            let v = group_velocity(&model, omega, [1.0, 0.0, 0.0], &medium).unwrap();
            let criterion = negative_refraction_criterion(&model, omega).unwrap();
            println!(
                "  omega = {omega:.6}: v_p = {:+.4}, v_g = {:+.4}, criterion value {:+.4} ({})",
                v.phase_velocity[0],
                v.group_velocity[0],
                criterion.value,
                if criterion.holds { "negative refraction" } else { "normal" }
            );
        }
    }
    println!("\nAbove k c = 1/2 (the peak of omega/(1 + omega^2)) no propagating root exists.");
}
