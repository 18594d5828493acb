//! Mach-Zehnder mesh model of the photonic processor.
//!
//! A unit cell acting on channels `(top, top + 1)` has the transfer matrix
//!
//! ```text
//! S(θ, φ) = ½ [ 1 − e^{−iθ}          −i(e^{−iθ} + 1) e^{−iφ} ]
//!             [ −i(e^{−iθ} + 1)      −(1 − e^{−iθ}) e^{−iφ}  ]
//! ```
//!
//! i.e. an external phase `e^{−iφ}` on the cell's lower input followed by two
//! 50:50 couplers around the internal phase `θ`. A [`MeshConfig`] is a list of
//! cells grouped into layers plus a final column of output phases; its
//! transfer matrix is `diag(output_phases) · C_last ⋯ C_first`.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::haar::{RngSeed, StreamDomain};
use crate::matcore::{ComplexMatrix, UnitaryMatrix, C64, UNITARY_TOL};

/// One MZI acting on channels `top` and `top + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MziCell {
    pub layer: usize,
    pub top: usize,
    pub theta: f64,
    pub phi: f64,
}

impl MziCell {
    pub fn new(layer: usize, top: usize, theta: f64, phi: f64) -> Self {
        Self {
            layer,
            top,
            theta: wrap_phase(theta),
            phi: wrap_phase(phi),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeshJson", into = "MeshJson")]
pub struct MeshConfig {
    d: usize,
    cells: Vec<MziCell>,
    output_phases: Vec<C64>,
}

impl MeshConfig {
    /// Validates channel ranges, phase finiteness, unit-modulus output phases
    /// and that no two cells in a layer share a channel. Phases are wrapped
    /// into `[0, 2π)`.
    pub fn new(d: usize, cells: Vec<MziCell>, output_phases: Vec<C64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if output_phases.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: output_phases.len(),
            });
        }
        if let Some(z) = output_phases.iter().find(|z| (z.norm() - 1.0).abs() > 1e-10) {
            return Err(Error::InvalidParameter(format!(
                "output phase {z} is not unit modulus"
            )));
        }
        let mut cells = cells;
        for c in &mut cells {
            if !(c.theta.is_finite() && c.phi.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite phase in cell {c:?}")));
            }
            if c.top + 1 >= d {
                return Err(Error::InvalidParameter(format!(
                    "cell on channels ({}, {}) does not fit in dimension {d}",
                    c.top,
                    c.top + 1
                )));
            }
            c.theta = wrap_phase(c.theta);
            c.phi = wrap_phase(c.phi);
        }
        let mut occupied = std::collections::HashSet::new();
        for c in &cells {
            for ch in [c.top, c.top + 1] {
                if !occupied.insert((c.layer, ch)) {
                    return Err(Error::InvalidParameter(format!(
                        "overlapping cells on channel {ch} in layer {}",
                        c.layer
                    )));
                }
            }
        }
        Ok(Self { d, cells, output_phases })
    }

    /// Mesh with no cells and unit output phases.
    pub fn identity(d: usize) -> Result<Self> {
        Self::new(d, Vec::new(), vec![C64::new(1.0, 0.0); d])
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn cells(&self) -> &[MziCell] {
        &self.cells
    }

    pub fn output_phases(&self) -> &[C64] {
        &self.output_phases
    }

    pub fn depth(&self) -> usize {
        self.cells.iter().map(|c| c.layer + 1).max().unwrap_or(0)
    }
}

pub fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

fn cell_entries(theta: f64, phi: f64) -> [[C64; 2]; 2] {
    let i = C64::i();
    let a = C64::from_polar(1.0, -theta);
    let e = C64::from_polar(1.0, -phi);
    let one = C64::new(1.0, 0.0);
    [
        [(one - a) * 0.5, -i * (a + one) * e * 0.5],
        [-i * (a + one) * 0.5, -(one - a) * e * 0.5],
    ]
}

/// The 2×2 transfer matrix of one cell.
pub fn unit_cell_matrix(theta: f64, phi: f64) -> UnitaryMatrix {
    let s = cell_entries(wrap_phase(theta), wrap_phase(phi));
    UnitaryMatrix::from_trusted(ComplexMatrix::from_fn(2, |r, c| s[r][c]))
}

/// `A <- S · A` on rows `(top, top + 1)`.
fn apply_rows(a: &mut ComplexMatrix, top: usize, s: &[[C64; 2]; 2]) {
    for col in 0..a.dim() {
        let x = a[(top, col)];
        let y = a[(top + 1, col)];
        a[(top, col)] = s[0][0] * x + s[0][1] * y;
        a[(top + 1, col)] = s[1][0] * x + s[1][1] * y;
    }
}

/// `A <- A · S^H` on columns `(top, top + 1)`.
fn apply_cols_adjoint(a: &mut ComplexMatrix, top: usize, s: &[[C64; 2]; 2]) {
    for row in 0..a.dim() {
        let x = a[(row, top)];
        let y = a[(row, top + 1)];
        a[(row, top)] = x * s[0][0].conj() + y * s[0][1].conj();
        a[(row, top + 1)] = x * s[1][0].conj() + y * s[1][1].conj();
    }
}

/// Transfer matrix of the mesh: cells applied in layer order, then the output phases.
pub fn compose_mesh(cfg: &MeshConfig) -> Result<UnitaryMatrix> {
    // Re-validate in case the config was assembled field by field elsewhere.
    let cfg = MeshConfig::new(cfg.d, cfg.cells.clone(), cfg.output_phases.clone())?;
    let mut order: Vec<&MziCell> = cfg.cells.iter().collect();
    order.sort_by_key(|c| c.layer);

    let mut u = ComplexMatrix::identity(cfg.d);
    for c in order {
        apply_rows(&mut u, c.top, &cell_entries(c.theta, c.phi));
    }
    for (i, z) in cfg.output_phases.iter().enumerate() {
        for col in 0..cfg.d {
            u[(i, col)] *= z;
        }
    }
    Ok(UnitaryMatrix::from_trusted(u))
}

fn arg(z: C64) -> f64 {
    if z.norm() == 0.0 {
        0.0
    } else {
        z.arg()
    }
}

/// Phases for `A · S(θ,φ)^H` to zero `A[r, top]` given `x = A[r, top]`, `y = A[r, top+1]`.
fn null_from_right(x: C64, y: C64) -> (f64, f64) {
    let theta = 2.0 * y.norm().atan2(x.norm());
    let phi = arg(x) - arg(y);
    (theta, phi)
}

/// Phases for `S(θ,φ) · A` to zero `A[top+1, col]` given `x = A[top, col]`, `y = A[top+1, col]`.
fn null_from_left(x: C64, y: C64) -> (f64, f64) {
    let theta = 2.0 * x.norm().atan2(y.norm());
    let phi = PI + arg(y) - arg(x);
    (theta, phi)
}

/// Rectangular-mesh decomposition of `u` into `d(d−1)/2` cells plus output phases.
///
/// Elements below the diagonal are nulled along anti-diagonals, alternately by
/// column operations (applied from the right) and row operations (applied
/// from the left). The row operations are then pushed through the remaining
/// diagonal, `S(θ,φ)^{-1} D = D' S(θ, φ')`, so every cell ends up on the
/// input side of a single output-phase column.
pub fn decompose_unitary(u: &UnitaryMatrix) -> Result<MeshConfig> {
    let d = u.dim();
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let err = u.unitarity_error();
    if err > UNITARY_TOL {
        return Err(Error::NotUnitary(err));
    }

    let mut a = u.matrix().clone();
    // (top, theta, phi) in the order they were applied.
    let mut right = Vec::new();
    let mut left = Vec::new();

    for i in 0..d - 1 {
        if i % 2 == 0 {
            for j in 0..=i {
                let row = d - 1 - j;
                let col = i - j;
                let (theta, phi) = null_from_right(a[(row, col)], a[(row, col + 1)]);
                apply_cols_adjoint(&mut a, col, &cell_entries(theta, phi));
                right.push((col, theta, phi));
            }
        } else {
            for j in 1..=i + 1 {
                let row = d + j - i - 2;
                let col = j - 1;
                let top = row - 1;
                let (theta, phi) = null_from_left(a[(top, col)], a[(row, col)]);
                apply_rows(&mut a, top, &cell_entries(theta, phi));
                left.push((top, theta, phi));
            }
        }
    }

    let mut diag: Vec<C64> = (0..d)
        .map(|k| {
            let z = a[(k, k)];
            z / z.norm()
        })
        .collect();

    // u = L_1^{-1} ⋯ L_k^{-1} · D · R_m ⋯ R_1; move D to the far left.
    let mut sequence: Vec<(usize, f64, f64)> = right;
    for &(top, theta, phi) in left.iter().rev() {
        let (d1, d2) = (diag[top], diag[top + 1]);
        let phi_new = arg(d1) - arg(d2);
        let lead = -C64::from_polar(1.0, theta);
        diag[top] = lead * d1;
        diag[top + 1] = lead * C64::from_polar(1.0, phi) * d1;
        sequence.push((top, theta, phi_new));
    }

    MeshConfig::new(d, assign_layers(d, &sequence), diag)
}

/// Earliest layer for each cell that keeps the application order on every channel.
fn assign_layers(d: usize, sequence: &[(usize, f64, f64)]) -> Vec<MziCell> {
    let mut next_free = vec![0usize; d];
    sequence
        .iter()
        .map(|&(top, theta, phi)| {
            let layer = next_free[top].max(next_free[top + 1]);
            next_free[top] = layer + 1;
            next_free[top + 1] = layer + 1;
            MziCell::new(layer, top, theta, phi)
        })
        .collect()
}

/// Placement of a `sub_dim` block at channels `offset..offset + sub_dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceEmbedding {
    pub sub_dim: usize,
    pub full_dim: usize,
    pub offset: usize,
}

impl SubspaceEmbedding {
    pub fn new(sub_dim: usize, full_dim: usize, offset: usize) -> Result<Self> {
        if sub_dim == 0 || offset + sub_dim > full_dim {
            return Err(Error::InvalidParameter(format!(
                "cannot embed {sub_dim} channels at offset {offset} into {full_dim}"
            )));
        }
        Ok(Self {
            sub_dim,
            full_dim,
            offset,
        })
    }

    pub fn channels(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.sub_dim
    }
}

/// Direct sum: `u_sub` on the embedded channels, identity elsewhere.
pub fn embed_unitary(u_sub: &UnitaryMatrix, emb: &SubspaceEmbedding) -> Result<UnitaryMatrix> {
    if u_sub.dim() != emb.sub_dim {
        return Err(Error::DimensionMismatch {
            expected: emb.sub_dim,
            found: u_sub.dim(),
        });
    }
    let range = emb.channels();
    let m = ComplexMatrix::from_fn(emb.full_dim, |i, j| {
        if range.contains(&i) && range.contains(&j) {
            u_sub[(i - emb.offset, j - emb.offset)]
        } else if i == j {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(UnitaryMatrix::from_trusted(m))
}

/// Adds independent `N(0, sigma²)` offsets to every `θ` and `φ`.
pub fn perturb_mesh(cfg: &MeshConfig, sigma: f64, rng: RngSeed) -> Result<MeshConfig> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(cfg.clone());
    }
    let mut gen = rng.rng_for(StreamDomain::Perturbation);
    let cells = cfg
        .cells
        .iter()
        .map(|c| {
            let dt: f64 = gen.sample(StandardNormal);
            let dp: f64 = gen.sample(StandardNormal);
            MziCell::new(c.layer, c.top, c.theta + sigma * dt, c.phi + sigma * dp)
        })
        .collect();
    MeshConfig::new(cfg.d, cells, cfg.output_phases.clone())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshJson {
    d: usize,
    cells: Vec<MziCell>,
    output_phases_re: Vec<f64>,
    output_phases_im: Vec<f64>,
}

impl TryFrom<MeshJson> for MeshConfig {
    type Error = Error;

    fn try_from(j: MeshJson) -> Result<Self> {
        if j.output_phases_re.len() != j.output_phases_im.len() {
            return Err(Error::Format(format!(
                "output_phases_re has {} entries but output_phases_im has {}",
                j.output_phases_re.len(),
                j.output_phases_im.len()
            )));
        }
        let phases = j
            .output_phases_re
            .iter()
            .zip(&j.output_phases_im)
            .map(|(&re, &im)| C64::new(re, im))
            .collect();
        MeshConfig::new(j.d, j.cells, phases)
    }
}

impl From<MeshConfig> for MeshJson {
    fn from(m: MeshConfig) -> Self {
        Self {
            d: m.d,
            output_phases_re: m.output_phases.iter().map(|z| z.re).collect(),
            output_phases_im: m.output_phases.iter().map(|z| z.im).collect(),
            cells: m.cells,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::sample_haar;
    use crate::matcore::{frobenius_distance, validate_unitary};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn unit_cell_examples() {
        let s = unit_cell_matrix(PI, 0.0);
        let diag = ComplexMatrix::from_real_diag(&[1.0, -1.0]);
        assert!(frobenius_distance(&s, &diag).unwrap() < 1e-15);

        let s = unit_cell_matrix(0.0, 0.0);
        let want = ComplexMatrix::from_rows(vec![vec![c(0.0, 0.0), c(0.0, -1.0)], vec![c(0.0, -1.0), c(0.0, 0.0)]])
            .unwrap();
        assert!(frobenius_distance(&s, &want).unwrap() < 1e-15);
    }

    #[test]
    fn unit_cell_is_unitary_on_a_grid() {
        for a in 0..24 {
            for b in 0..24 {
                let s = unit_cell_matrix(a as f64 * 0.3 - 1.0, b as f64 * 0.29 + 0.1);
                assert!(validate_unitary(s.matrix(), 1e-12));
            }
        }
    }

    #[test]
    fn empty_mesh_is_identity() {
        let u = compose_mesh(&MeshConfig::identity(5).unwrap()).unwrap();
        assert_eq!(u.matrix(), &ComplexMatrix::identity(5));
    }

    #[test]
    fn single_cell_embeds_as_block() {
        let cfg = MeshConfig::new(4, vec![MziCell::new(0, 0, PI, 0.0)], vec![c(1.0, 0.0); 4]).unwrap();
        let u = compose_mesh(&cfg).unwrap();
        let want = ComplexMatrix::from_real_diag(&[1.0, -1.0, 1.0, 1.0]);
        assert!(frobenius_distance(&u, &want).unwrap() < 1e-15);
    }

    #[test]
    fn overlapping_cells_rejected() {
        let cells = vec![MziCell::new(0, 0, 0.1, 0.2), MziCell::new(0, 1, 0.3, 0.4)];
        assert!(MeshConfig::new(4, cells, vec![c(1.0, 0.0); 4]).is_err());
        let cells = vec![MziCell::new(0, 3, 0.1, 0.2)];
        assert!(MeshConfig::new(4, cells, vec![c(1.0, 0.0); 4]).is_err());
    }

    #[test]
    fn identity_round_trip() {
        let id = UnitaryMatrix::identity(8);
        let mesh = decompose_unitary(&id).unwrap();
        assert_eq!(mesh.cells().len(), 28);
        let back = compose_mesh(&mesh).unwrap();
        assert!(frobenius_distance(&back, &id).unwrap() < 1e-12);
    }

    #[test]
    fn single_phase_round_trip() {
        let mut diag = vec![c(1.0, 0.0); 6];
        diag[0] = C64::from_polar(1.0, 0.7);
        let u = UnitaryMatrix::new(ComplexMatrix::from_diag(&diag)).unwrap();
        let back = compose_mesh(&decompose_unitary(&u).unwrap()).unwrap();
        assert!(frobenius_distance(&back, &u).unwrap() < 1e-12);
    }

    #[test]
    fn haar_round_trip_and_layout() {
        for d in [2, 3, 4, 5, 8] {
            for s in 0..20 {
                let u = sample_haar(d, RngSeed::new(s, d as u32)).unwrap();
                let mesh = decompose_unitary(&u).unwrap();
                assert_eq!(mesh.cells().len(), d * (d - 1) / 2);
                assert!(mesh.depth() <= d, "depth {} for d = {d}", mesh.depth());
                let back = compose_mesh(&mesh).unwrap();
                assert!(frobenius_distance(&back, &u).unwrap() < 1e-10);
                assert!(validate_unitary(back.matrix(), 1e-10));
            }
        }
    }

    #[test]
    fn decompose_rejects_non_unitary() {
        let m = ComplexMatrix::from_real_diag(&[1.0, 1.01]);
        let u = UnitaryMatrix::from_trusted(m);
        assert!(matches!(decompose_unitary(&u), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn embedding_examples() {
        let emb = SubspaceEmbedding::new(4, 8, 0).unwrap();
        let id = embed_unitary(&UnitaryMatrix::identity(4), &emb).unwrap();
        assert_eq!(id.matrix(), &ComplexMatrix::identity(8));

        let a = sample_haar(4, RngSeed::new(1, 0)).unwrap();
        let b = sample_haar(4, RngSeed::new(2, 0)).unwrap();
        let ea = embed_unitary(&a, &emb).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                if i < 4 && j < 4 {
                    assert_eq!(ea[(i, j)], a[(i, j)]);
                } else if i == j {
                    assert_eq!(ea[(i, j)], c(1.0, 0.0));
                } else {
                    assert_eq!(ea[(i, j)], c(0.0, 0.0));
                }
            }
        }
        let lhs = embed_unitary(&a.compose(&b).unwrap(), &emb).unwrap();
        let rhs = ea.compose(&embed_unitary(&b, &emb).unwrap()).unwrap();
        assert!(frobenius_distance(&lhs, &rhs).unwrap() < 1e-14);

        assert!(embed_unitary(&a, &SubspaceEmbedding::new(3, 8, 0).unwrap()).is_err());
        assert!(SubspaceEmbedding::new(4, 8, 5).is_err());
    }

    #[test]
    fn perturbation_zero_and_nonzero() {
        let u = sample_haar(8, RngSeed::new(5, 0)).unwrap();
        let mesh = decompose_unitary(&u).unwrap();
        assert_eq!(perturb_mesh(&mesh, 0.0, RngSeed::new(1, 0)).unwrap(), mesh);
        let noisy = perturb_mesh(&mesh, 0.01, RngSeed::new(1, 0)).unwrap();
        let d = frobenius_distance(&compose_mesh(&noisy).unwrap(), &compose_mesh(&mesh).unwrap()).unwrap();
        assert!(d > 0.0);
        assert!(perturb_mesh(&mesh, -1.0, RngSeed::new(1, 0)).is_err());
    }

    #[test]
    fn mesh_json_round_trip() {
        let u = sample_haar(4, RngSeed::new(11, 0)).unwrap();
        let mesh = decompose_unitary(&u).unwrap();
        let text = serde_json::to_string(&mesh).unwrap();
        assert!(text.contains("\"output_phases_re\""));
        let back: MeshConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, mesh);
    }
}
