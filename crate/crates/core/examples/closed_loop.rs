//! Simulate a known noise model and recover p and epsilon from the output.

use photon_shadow::analysis::closed_loop_recovery;
use photon_shadow::haar::RngSeed;

fn main() -> photon_shadow::Result<()> {
    let r = closed_loop_recovery(4, 0.05, 0.02, 20_000, 5, RngSeed::new(11, 0))?;
    let rec = r.recovery.expect("closed loop fills recovery");
    println!("p   true {:.4}  recovered {:.4}  |error| {:.1e}", rec.p_true, r.p_hat, rec.p_error);
    println!("eps true {:.4}  recovered {:.4}  |error| {:.1e}", rec.epsilon_true, r.epsilon_hat, rec.epsilon_error);
    Ok(())
}
