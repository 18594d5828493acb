//! Turn detector voltages and reported unitaries into a reconstruction.

use photon_shadow::haar::{sample_haar, RngSeed};
use photon_shadow::matcore::{frobenius_distance, DensityMatrix};
use photon_shadow::shadow::{born_probabilities, read_voltage_csv, reconstruct, snapshots_from_voltages};

fn main() -> photon_shadow::Result<()> {
    let rho = DensityMatrix::basis_state(8, 0)?;
    let unitaries: Vec<_> = (0..2000).map(|k| sample_haar(8, RngSeed::new(3, k))).collect::<Result<_, _>>()?;

    let mut csv = String::from("run_id,unitary_id,v0,v1,v2,v3,v4,v5,v6,v7\n");
    for (k, u) in unitaries.iter().enumerate() {
        let volts: Vec<String> = born_probabilities(&rho, u)?.iter().map(|p| format!("{:.6}", 3.3 * p)).collect();
        csv.push_str(&format!("{k},{k},{}\n", volts.join(",")));
    }

    let records = read_voltage_csv(csv.as_bytes())?;
    let snapshots = snapshots_from_voltages(&records, &unitaries, None)?;
    let estimate = reconstruct(&snapshots, 8)?;
    println!("{} snapshots, error {:.4}", snapshots.len(), frobenius_distance(&estimate, &rho)?);
    Ok(())
}
