//! Decompose a Haar unitary into a rectangular MZI mesh and compose it back.

use photon_shadow::haar::{sample_haar, RngSeed};
use photon_shadow::mesh::{compose_mesh, decompose_unitary, perturb_mesh};

fn main() -> photon_shadow::Result<()> {
    let u = sample_haar(8, RngSeed::new(7, 0))?;
    let mesh = decompose_unitary(&u)?;
    println!("{} cells in {} layers", mesh.cells().len(), mesh.depth());
    let back = compose_mesh(&mesh)?;
    println!("round-trip error {:.2e}", (u.matrix() - back.matrix()).frobenius_norm());

    for sigma in [1e-3, 1e-2, 1e-1] {
        let noisy = compose_mesh(&perturb_mesh(&mesh, sigma, RngSeed::new(8, 0))?)?;
        println!("phase noise {sigma:.0e}: deviation {:.3e}", (u.matrix() - noisy.matrix()).frobenius_norm());
    }
    Ok(())
}
