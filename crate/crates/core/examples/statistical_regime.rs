//! Ideal Protocol I: mean squared error falls as 1/M.

use photon_shadow::haar::RngSeed;
use photon_shadow::shadow::{expected_mse, run_protocol, ProtocolKind, ProtocolSpec, SimulationPlan};

fn main() -> photon_shadow::Result<()> {
    let spec = ProtocolSpec::new(ProtocolKind::I, RngSeed::new(2024, 0), RngSeed::new(0, 0));
    let plan = SimulationPlan::default_for(5000).with_replications(10);
    let out = run_protocol(&spec, 5000, None, &plan)?;
    println!("{:>6} {:>12} {:>12}", "M", "mse", "theory");
    for p in &out.series.points {
        println!("{:>6} {:>12.4e} {:>12.4e}", p.m, p.mse_mean, expected_mse(spec.d_sub(), p.m, 1.0));
    }
    println!("final error {:.4}", out.result.frobenius_error);
    Ok(())
}
