//! Shadow-tomography estimators and ensemble reconstruction.
//!
//! With the full output distribution `p_k = (U ρ U^H)_kk` of one random
//! unitary, the single-snapshot estimator is
//! `ρ̂ = (d + 1) U^H diag(p) U − I`; averaging `M` of them gives the
//! reconstruction. Its Haar expectation is `ρ` and its mean squared Frobenius
//! error is `(d Tr(ρ²) − 1) / M`.

mod ingest;
mod protocol;

pub use ingest::{
    normalize_voltages, read_snapshot_file, read_unitary_list, read_voltage_csv, snapshots_from_voltages,
    write_snapshot_file, SnapshotFile, VoltageRecord,
};
pub use protocol::{
    log_spaced_grid, run_protocol, EstimatorKind, ProtocolKind, ProtocolOutcome, ProtocolSpec, ReconstructionResult,
    ScalingPoint, ScalingSeries, SimulationPlan,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::haar::{RngSeed, StreamDomain};
use crate::matcore::{ComplexMatrix, DensityMatrix, HermitianEstimate, UnitaryMatrix, C64};

/// Probabilities above this (negative) value are treated as rounding and clamped to 0.
pub const PROBABILITY_CLAMP_TOL: f64 = 1e-9;

/// Diagonal of `U ρ U^H`, real part only.
pub(crate) fn born_diagonal(u: &ComplexMatrix, rho: &ComplexMatrix) -> Vec<f64> {
    let d = u.dim();
    let mut w = vec![C64::new(0.0, 0.0); d];
    (0..d)
        .map(|i| {
            let row = u.row(i);
            // w = ρ · conj(row)^T
            for (j, wj) in w.iter_mut().enumerate() {
                *wj = rho.row(j).iter().zip(row).map(|(r, x)| r * x.conj()).sum();
            }
            row.iter().zip(&w).map(|(x, y)| (x * y).re).sum()
        })
        .collect()
}

/// Clamps rounding-level negatives to zero and renormalizes to unit sum.
///
/// Entries below `-PROBABILITY_CLAMP_TOL` or non-finite entries indicate a
/// modelling bug rather than rounding and are rejected.
pub fn sanitize_probabilities(mut probs: Vec<f64>) -> Result<Vec<f64>> {
    for (i, p) in probs.iter_mut().enumerate() {
        if !p.is_finite() || *p < -PROBABILITY_CLAMP_TOL {
            return Err(Error::InvalidState(format!("probability {i} is {p}")));
        }
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidState("probabilities sum to zero".into()));
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

/// Born-rule output distribution `(U ρ U^H)_ii`.
pub fn born_probabilities(rho: &DensityMatrix, u: &UnitaryMatrix) -> Result<Vec<f64>> {
    if rho.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: u.dim(),
        });
    }
    sanitize_probabilities(born_diagonal(u, rho))
}

/// One random unitary, as reported to the reconstruction, plus the measured distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub unitary_id: usize,
    pub reported_unitary: UnitaryMatrix,
    pub probabilities: Vec<f64>,
}

impl Snapshot {
    pub fn new(unitary_id: usize, reported_unitary: UnitaryMatrix, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() != reported_unitary.dim() {
            return Err(Error::DimensionMismatch {
                expected: reported_unitary.dim(),
                found: probabilities.len(),
            });
        }
        if let Some(p) = probabilities.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::InvalidState(format!("negative or NaN probability {p}")));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("probabilities sum to {total}")));
        }
        Ok(Self {
            unitary_id,
            reported_unitary,
            probabilities,
        })
    }

    pub fn dim(&self) -> usize {
        self.reported_unitary.dim()
    }
}

/// Running sum of `U^H diag(p) U` over snapshots.
#[derive(Clone, Debug)]
pub struct IntensityAccumulator {
    sum: ComplexMatrix,
    count: usize,
}

impl IntensityAccumulator {
    pub fn new(d: usize) -> Self {
        Self {
            sum: ComplexMatrix::zeros(d),
            count: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds `U^H diag(p) U`; only the upper triangle is accumulated.
    pub fn push(&mut self, u: &ComplexMatrix, probs: &[f64]) {
        let d = self.sum.dim();
        debug_assert_eq!(u.dim(), d);
        for (k, &pk) in probs.iter().enumerate() {
            if pk == 0.0 {
                continue;
            }
            let row = u.row(k);
            for a in 0..d {
                let left = row[a].conj() * pk;
                for b in a..d {
                    self.sum[(a, b)] += left * row[b];
                }
            }
        }
        self.count += 1;
    }

    /// Adds the rank-1 term `U^H |b><b| U`.
    pub fn push_outcome(&mut self, u: &ComplexMatrix, outcome: usize) {
        let d = self.sum.dim();
        let row = u.row(outcome);
        for a in 0..d {
            let left = row[a].conj();
            for b in a..d {
                self.sum[(a, b)] += left * row[b];
            }
        }
        self.count += 1;
    }

    pub fn merge(&mut self, other: &IntensityAccumulator) {
        self.sum = &self.sum + &other.sum;
        self.count += other.count;
    }

    /// `(d + 1) · mean − I`, or `None` before the first snapshot.
    pub fn estimate_matrix(&self) -> Option<ComplexMatrix> {
        if self.count == 0 {
            return None;
        }
        let d = self.sum.dim();
        let scale = (d + 1) as f64 / self.count as f64;
        Some(ComplexMatrix::from_fn(d, |a, b| {
            let v = if a <= b { self.sum[(a, b)] } else { self.sum[(b, a)].conj() };
            let v = if a == b { C64::new(v.re, 0.0) } else { v };
            v * scale - if a == b { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
        }))
    }

    pub fn estimate(&self) -> Result<HermitianEstimate> {
        let m = self
            .estimate_matrix()
            .ok_or_else(|| Error::InvalidParameter("no snapshots accumulated".into()))?;
        HermitianEstimate::new(m)
    }
}

/// `(d + 1) U^H diag(p) U − I` for one snapshot.
pub fn snapshot_intensity_estimator(s: &Snapshot) -> HermitianEstimate {
    let mut acc = IntensityAccumulator::new(s.dim());
    acc.push(s.reported_unitary.matrix(), &s.probabilities);
    acc.estimate().expect("a single valid snapshot has unit trace")
}

/// Draws an outcome index from `probs`.
pub fn sample_outcome<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let x: f64 = rng.random();
    let mut cumulative = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        cumulative += p;
        if x < cumulative {
            return k;
        }
    }
    // x landed in the rounding gap above the last cumulative value.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Rank-1 estimator `(d + 1) U^H |b><b| U − I` with `b` drawn from the snapshot's distribution.
pub fn snapshot_click_estimator(s: &Snapshot, rng: RngSeed) -> HermitianEstimate {
    snapshot_click_estimator_with(s, &mut rng.rng_for(StreamDomain::Outcome))
}

pub fn snapshot_click_estimator_with<R: Rng + ?Sized>(s: &Snapshot, rng: &mut R) -> HermitianEstimate {
    let b = sample_outcome(&s.probabilities, rng);
    let mut acc = IntensityAccumulator::new(s.dim());
    acc.push_outcome(s.reported_unitary.matrix(), b);
    acc.estimate().expect("a rank-1 snapshot estimator has unit trace")
}

/// Mean of the intensity estimators of `snapshots`.
pub fn reconstruct(snapshots: &[Snapshot], target_d: usize) -> Result<HermitianEstimate> {
    if snapshots.is_empty() {
        return Err(Error::InvalidParameter("cannot reconstruct from zero snapshots".into()));
    }
    let mut acc = IntensityAccumulator::new(target_d);
    for s in snapshots {
        if s.dim() != target_d {
            return Err(Error::DimensionMismatch {
                expected: target_d,
                found: s.dim(),
            });
        }
        acc.push(s.reported_unitary.matrix(), &s.probabilities);
    }
    acc.estimate()
}

/// `(d · purity − 1) / M`, the expected squared Frobenius error of an
/// `M`-snapshot intensity reconstruction.
pub fn expected_mse(d: usize, m: usize, purity: f64) -> f64 {
    debug_assert!(m >= 1);
    (d as f64 * purity - 1.0) / m as f64
}
