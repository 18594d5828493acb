//! Monte-Carlo fourth moments of Haar unitaries against the exact Weingarten values.

use photon_shadow::haar::{fourth_moment_analytic, fourth_moments_mc, index_class_patterns, rational_to_f64, RngSeed};
use photon_shadow::matcore::C64;

fn main() -> photon_shadow::Result<()> {
    let d = 3;
    let patterns = index_class_patterns(d);
    let est = fourth_moments_mc(&patterns, d, 100_000, RngSeed::new(1, 0))?;
    let mut worst = 0.0f64;
    for (idx, e) in patterns.iter().zip(&est).take(8) {
        let exact = fourth_moment_analytic(idx, d)?;
        let z = e.z_score(C64::new(rational_to_f64(exact), 0.0));
        println!("{:<24} exact {:>8}  mc {:+.5} ± {:.5}  z {z:.2}", idx.label(), exact.to_string(), e.mean.re, e.stderr);
    }
    for (idx, e) in patterns.iter().zip(&est) {
        worst = worst.max(e.z_score(C64::new(rational_to_f64(fourth_moment_analytic(idx, d)?), 0.0)));
    }
    println!("{} patterns, max |z| = {worst:.2}", patterns.len());
    Ok(())
}
