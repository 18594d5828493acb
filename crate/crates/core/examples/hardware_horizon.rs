//! Noisy Protocol I: the error saturates at the systematic floor past M_crit.

use photon_shadow::analysis::{detect_horizon, pure_state_floor};
use photon_shadow::haar::RngSeed;
use photon_shadow::noise::sample_coherent_distortion;
use photon_shadow::shadow::{log_spaced_grid, run_protocol, ProtocolKind, ProtocolSpec, SimulationPlan};

fn main() -> photon_shadow::Result<()> {
    let (d, p, eps) = (8, 0.10412, 0.01198);
    let floor = pure_state_floor(d, p, eps);
    println!("floor {floor:.5e}, M_crit {:.1}", detect_horizon(d, p, eps)?);

    let noise = sample_coherent_distortion(d, eps, RngSeed::new(5, 0))?.with_p(p)?;
    let spec = ProtocolSpec::new(ProtocolKind::I, RngSeed::new(55, 0), RngSeed::new(0, 0));
    let plan = SimulationPlan {
        m_grid: log_spaced_grid(10, 20_000, 10),
        ..SimulationPlan::default_for(20_000).with_replications(5)
    };
    let out = run_protocol(&spec, 20_000, Some(&noise), &plan)?;
    for pt in &out.series.points {
        println!("M {:>6}  mse {:.4e}  mse/floor {:.3}", pt.m, pt.mse_mean, pt.mse_mean / floor);
    }
    Ok(())
}
