//! Band analysis of the negative-refraction criterion
//! (omega/n) dn/domega < -1 for the analytic model n = 1/(1 + c omega^2):
//! the criterion holds at omega exactly when c omega^2 > 1, hence over a
//! whole band [w_min, w_max] exactly when c > 1/w_min^2.
//!
//! Run with `cargo run --example negative_refraction_band`.

use metamat::dispersion::{band_criterion, DispersionModel};
use metamat::fields::FrequencyGrid;

fn main() {
    let band = FrequencyGrid::linspace(1.0, 2.0, 6).unwrap();
    println!("band [1, 2], threshold coefficient 1/w_min^2 = 1\n");

    for c in [0.5, 0.9, 1.0, 1.5, 3.0] {
        let model = DispersionModel::inverse_quadratic(c).unwrap();
        let result = band_criterion(&model, &band).unwrap();
        println!(
            "c = {c}: criterion {} over the band",
            if result.all_hold { "HOLDS" } else { "does not hold" }
        );
        for row in &result.rows {
            println!(
                "    omega {:.2}: c omega^2 = {:>5.2}, value {:+.4} {}",
                row.omega,
                c * row.omega * row.omega,
                row.value,
                if row.holds { "<- holds" } else { "" }
            );
        }
    }
}
