//! Hardware parameters from a measured spectrum and scaled-error slope.

use photon_shadow::analysis::AnalysisReport;
use photon_shadow::shadow::log_spaced_grid;

fn main() -> photon_shadow::Result<()> {
    let rows = [
        ("I", vec![0.90889, -0.00820, -0.00075, 0.03102, 0.02638, 0.02146, 0.01411, 0.00707], 1.12873e-2),
        ("III", vec![0.95372, 0.00669, 0.02906, 0.01958], 3.80301e-3),
        ("IV", vec![0.98087, 0.02503, 0.01116, -0.01150], 1.43278e-3),
    ];
    let grid = log_spaced_grid(10, 100_000, 20);
    for (name, spectrum, slope) in rows {
        let d1 = spectrum.iter().copied().fold(f64::MIN, f64::max);
        let r = AnalysisReport::from_slope(spectrum.len(), d1, 1.0, slope, &grid)?;
        println!(
            "{name:<4} p {:.5}  eps {:.5}  floor {:.4e}  M_crit {:.0}",
            r.p_hat,
            r.epsilon_hat,
            r.floor,
            r.m_crit.unwrap_or(f64::INFINITY)
        );
    }
    Ok(())
}
