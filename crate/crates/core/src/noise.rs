//! Phenomenological device noise: a static coherent distortion `U_c` applied
//! after state preparation, and a depolarizing channel of strength `p`.
//!
//! The device realizes `U · U_c` instead of `U`, and its output is depolarized,
//! so the measured distribution is
//! `P_i = (1 − p) (U U_c ρ U_c^H U^H)_ii + p/d`. Reconstruction with the
//! ideal `U` then converges to `ρ̃ = (1 − p) U_c ρ U_c^H + (p/d) I`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::haar::{RngSeed, StreamDomain};
use crate::matcore::{purity, spectral_decompose, trace_product, ComplexMatrix, DensityMatrix, UnitaryMatrix, C64};
use crate::shadow::{born_diagonal, sanitize_probabilities};

/// Depolarization strength plus a fixed coherent distortion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseModelJson", into = "NoiseModelJson")]
pub struct NoiseModel {
    p: f64,
    u_c: UnitaryMatrix,
    epsilon: f64,
}

impl NoiseModel {
    pub fn new(p: f64, u_c: UnitaryMatrix) -> Result<Self> {
        check_p(p)?;
        let epsilon = distortion_magnitude(&u_c);
        Ok(Self { p, u_c, epsilon })
    }

    /// No depolarization and `U_c = I`.
    pub fn ideal(d: usize) -> Self {
        Self {
            p: 0.0,
            u_c: UnitaryMatrix::identity(d),
            epsilon: 0.0,
        }
    }

    pub fn depolarizing(d: usize, p: f64) -> Result<Self> {
        Self::new(p, UnitaryMatrix::identity(d))
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        check_p(p)?;
        Ok(Self { p, ..self.clone() })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn u_c(&self) -> &UnitaryMatrix {
        &self.u_c
    }

    /// RMS magnitude of the off-diagonal entries in the first row of `U_c`.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.u_c.dim()
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "depolarization p must lie in [0, 1], got {p}"
        )));
    }
    Ok(())
}

/// `sqrt( sum_{j≠1} |U_1j|² / (d − 1) )`; zero for `d = 1`.
pub fn distortion_magnitude(u_c: &ComplexMatrix) -> f64 {
    let d = u_c.dim();
    if d < 2 {
        return 0.0;
    }
    let off: f64 = u_c.row(0)[1..].iter().map(|z| z.norm_sqr()).sum();
    (off / (d - 1) as f64).sqrt()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseModelJson {
    p: f64,
    u_c: UnitaryMatrix,
    epsilon: f64,
}

impl TryFrom<NoiseModelJson> for NoiseModel {
    type Error = Error;

    fn try_from(j: NoiseModelJson) -> Result<Self> {
        let model = NoiseModel::new(j.p, j.u_c)?;
        if (model.epsilon - j.epsilon).abs() > 1e-12 {
            return Err(Error::Format(format!(
                "stored epsilon {} disagrees with u_c (computed {})",
                j.epsilon, model.epsilon
            )));
        }
        Ok(model)
    }
}

impl From<NoiseModel> for NoiseModelJson {
    fn from(m: NoiseModel) -> Self {
        Self {
            p: m.p,
            u_c: m.u_c,
            epsilon: m.epsilon,
        }
    }
}

/// `(1 − p) ρ + (p/d) I`
pub fn apply_depolarizing(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    check_p(p)?;
    let d = rho.dim();
    let mixed = ComplexMatrix::identity(d).scale_real(p / d as f64);
    Ok(DensityMatrix::from_trusted(&rho.scale_real(1.0 - p) + &mixed))
}

/// `(1 − p) U_c ρ U_c^H + (p/d) I`
pub fn distorted_state(rho: &DensityMatrix, noise: &NoiseModel) -> Result<DensityMatrix> {
    noise.check_dim(rho.dim())?;
    let rotated = DensityMatrix::from_trusted(noise.u_c.conjugate(rho)?);
    apply_depolarizing(&rotated, noise.p)
}

/// Output distribution of the noisy device for programmed unitary `u`.
pub fn noisy_probabilities(rho: &DensityMatrix, u: &UnitaryMatrix, noise: &NoiseModel) -> Result<Vec<f64>> {
    if u.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: u.dim(),
        });
    }
    noise.check_dim(rho.dim())?;
    let rotated = noise.u_c.conjugate(rho)?;
    let d = rho.dim() as f64;
    let probs = born_diagonal(u, &rotated)
        .into_iter()
        .map(|x| (1.0 - noise.p) * x + noise.p / d)
        .collect();
    sanitize_probabilities(probs)
}

/// Random `U_c = exp(iαH)` whose first-row off-diagonal RMS equals `epsilon_target`.
///
/// `H` is Hermitian with unit-variance complex off-diagonal entries and
/// standard normal diagonal; `α ≥ 0` is found by bracketing and bisection.
/// The returned model has `p = 0`.
pub fn sample_coherent_distortion(d: usize, epsilon_target: f64, rng: RngSeed) -> Result<NoiseModel> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let max_eps = if d > 1 { (1.0 / (d - 1) as f64).sqrt() } else { 0.0 };
    if !(0.0..=max_eps).contains(&epsilon_target) {
        return Err(Error::InvalidParameter(format!(
            "epsilon target {epsilon_target} outside [0, {max_eps}] for d = {d}"
        )));
    }
    if epsilon_target == 0.0 {
        return Ok(NoiseModel::ideal(d));
    }

    let mut gen = rng.rng_for(StreamDomain::Distortion);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut h = ComplexMatrix::zeros(d);
    for i in 0..d {
        h[(i, i)] = C64::new(gen.sample(StandardNormal), 0.0);
        for j in i + 1..d {
            let re: f64 = gen.sample(StandardNormal);
            let im: f64 = gen.sample(StandardNormal);
            let z = C64::new(re * half, im * half);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    let spectrum = spectral_decompose(&h)?;
    let w = spectrum.eigenvectors.matrix().clone();
    let w_adj = w.adjoint();
    let exp_ih = |alpha: f64| -> ComplexMatrix {
        let phases: Vec<C64> = spectrum
            .eigenvalues
            .iter()
            .map(|&l| C64::from_polar(1.0, alpha * l))
            .collect();
        let scaled = ComplexMatrix::from_fn(d, |i, j| w[(i, j)] * phases[j]);
        &scaled * &w_adj
    };
    let eps_at = |alpha: f64| distortion_magnitude(&exp_ih(alpha));

    let mut lo = 0.0;
    let mut hi = 1e-3;
    while eps_at(hi) < epsilon_target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::InvalidParameter(format!(
                "epsilon target {epsilon_target} not reachable for this generator"
            )));
        }
    }
    let mut alpha = hi;
    for _ in 0..200 {
        alpha = 0.5 * (lo + hi);
        let eps = eps_at(alpha);
        if ((eps - epsilon_target) / epsilon_target).abs() < 1e-10 {
            break;
        }
        if eps < epsilon_target {
            lo = alpha;
        } else {
            hi = alpha;
        }
    }
    let u_c = UnitaryMatrix::new(exp_ih(alpha))?;
    let model = NoiseModel::new(0.0, u_c)?;
    if ((model.epsilon - epsilon_target) / epsilon_target).abs() > 1e-4 {
        return Err(Error::InvalidParameter(format!(
            "bisection did not reach epsilon target {epsilon_target} (got {})",
            model.epsilon
        )));
    }
    Ok(model)
}

/// Coherent error `Tr(ρ²) − Tr(U_c ρ U_c^H ρ)` of a pure state, which equals
/// `1 − |<ψ|U_c|ψ>|²`. Both forms are evaluated and must agree.
pub fn coherent_error(psi_projector: &DensityMatrix, u_c: &UnitaryMatrix) -> Result<f64> {
    if u_c.dim() != psi_projector.dim() {
        return Err(Error::DimensionMismatch {
            expected: psi_projector.dim(),
            found: u_c.dim(),
        });
    }
    let pur = purity(psi_projector);
    if (pur - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!(
            "coherent error needs a pure state (purity {pur})"
        )));
    }
    let rho = psi_projector.matrix();
    let trace_form = pur - trace_product(&u_c.conjugate(rho)?, rho);

    let psi = spectral_decompose(rho)?.eigenvectors.column(0);
    let u_psi = u_c.apply(&psi);
    let overlap: C64 = psi.iter().zip(&u_psi).map(|(a, b)| a.conj() * b).sum();
    let overlap_form = 1.0 - overlap.norm_sqr();

    if (trace_form - overlap_form).abs() > 1e-12 {
        return Err(Error::ModelInconsistency(format!(
            "coherent error forms disagree: {trace_form} vs {overlap_form}"
        )));
    }
    Ok(trace_form)
}
