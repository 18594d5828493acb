//! Extraction of device parameters from reconstruction data.
//!
//! The pure-state error model is
//! `E‖ρ̂_M − ρ‖² = (1 − p)²(d − 1)/M + p²(1 − 1/d) + 2(1 − p)(d − 1)ε²`:
//! a statistical term that decays with `M` and a systematic floor that does
//! not. Multiplying by `M` turns the floor into the slope of a straight line,
//! which with a spectral estimate of `p` fixes `ε`.

use std::io::Write;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::haar::{RngSeed, StreamDomain};
use crate::matcore::{purity, spectral_decompose, trace_product, DensityMatrix};
use crate::noise::{distorted_state, sample_coherent_distortion, NoiseModel};
use crate::shadow::{log_spaced_grid, run_protocol, ProtocolKind, ProtocolSpec, ScalingSeries, SimulationPlan};

/// Slack below zero tolerated in `Slope − p²(1 − 1/d)` before the model is declared inconsistent.
pub const RADICAND_TOL: f64 = 1e-12;

fn sig9<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig9(*x))
}

fn sig9_opt<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&round_sig9(*v)),
        None => s.serialize_none(),
    }
}

/// Rounds to 9 significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    #[serde(serialize_with = "sig9")]
    pub slope: f64,
    #[serde(serialize_with = "sig9")]
    pub intercept: f64,
    #[serde(serialize_with = "sig9")]
    pub slope_stderr: f64,
    #[serde(serialize_with = "sig9")]
    pub intercept_stderr: f64,
    #[serde(serialize_with = "sig9")]
    pub r_squared: f64,
}

/// Weighted least squares of `y` on `x`.
///
/// Coefficient errors are scaled by the residual variance, so data lying
/// exactly on a line yields zero standard errors.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || n != w.len() {
        return Err(Error::InvalidParameter("fit inputs differ in length".into()));
    }
    if n < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 points to fit, got {n}")));
    }
    if w.iter().any(|wi| !(*wi > 0.0) || !wi.is_finite()) {
        return Err(Error::InvalidParameter("fit weights must be positive and finite".into()));
    }
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() / sw;
    let ym = w.iter().zip(y).map(|(wi, yi)| wi * yi).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(x).map(|(wi, xi)| wi * (xi - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidParameter("degenerate fit: all x values are equal".into()));
    }
    let sxy: f64 = (0..n).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = (0..n).map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let ss_tot: f64 = (0..n).map(|i| w[i] * (y[i] - ym).powi(2)).sum();
    let s2 = ss_res / (n - 2) as f64;
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr: (s2 / sxx).sqrt(),
        intercept_stderr: (s2 * (1.0 / sw + xm * xm / sxx)).sqrt(),
        r_squared,
    })
}

/// Fits `M · mse` against `M`; the slope is the systematic floor and the
/// intercept the statistical coefficient `(1 − p)²(d − 1)`.
///
/// Points are weighted by `1 / (M · stderr)²` when every stderr is positive.
pub fn scaled_error_fit(series: &ScalingSeries) -> Result<LinearFit> {
    let x: Vec<f64> = series.points.iter().map(|p| p.m as f64).collect();
    let y: Vec<f64> = series.points.iter().map(|p| p.m as f64 * p.mse_mean).collect();
    let weighted = series.points.iter().all(|p| p.mse_stderr > 0.0);
    let w: Vec<f64> = if weighted {
        series
            .points
            .iter()
            .map(|p| 1.0 / (p.m as f64 * p.mse_stderr).powi(2))
            .collect()
    } else {
        vec![1.0; x.len()]
    };
    weighted_linear_fit(&x, &y, &w)
}

/// `(λ₁ − D₁) / (λ₁ − 1/d)` clamped to `[0, 1]`, with `D₁` the leading
/// eigenvalue of the reconstruction and `λ₁` that of the ideal state.
pub fn estimate_p(d1: f64, lambda1: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let inv_d = 1.0 / d as f64;
    if !(lambda1 > inv_d) {
        return Err(Error::InvalidParameter(format!(
            "leading eigenvalue {lambda1} must exceed 1/d = {inv_d}"
        )));
    }
    if !(d1 <= lambda1 + 0.05) {
        return Err(Error::InvalidParameter(format!(
            "reconstructed eigenvalue {d1} exceeds the ideal {lambda1} by more than 0.05"
        )));
    }
    Ok(((lambda1 - d1) / (lambda1 - inv_d)).clamp(0.0, 1.0))
}

/// `sqrt( (slope − p²(1 − 1/d)) / (2(1 − p)(d − 1)) )`.
///
/// A numerator within `RADICAND_TOL` below zero gives 0; anything lower is a
/// model inconsistency.
pub fn estimate_epsilon(slope: f64, p: f64, d: usize) -> Result<f64> {
    estimate_epsilon_with_tolerance(slope, p, d, RADICAND_TOL)
}

/// [`estimate_epsilon`] with a caller-chosen tolerance on the numerator, e.g.
/// a few slope standard errors for fitted slopes.
pub fn estimate_epsilon_with_tolerance(slope: f64, p: f64, d: usize, tol: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p must lie in [0, 1), got {p}")));
    }
    let dd = d as f64;
    let numerator = slope - p * p * (1.0 - 1.0 / dd);
    if numerator < -tol.max(RADICAND_TOL) || numerator.is_nan() {
        return Err(Error::ModelInconsistency(format!(
            "slope {slope} is below the depolarizing floor p²(1 − 1/d) = {} (p = {p}, d = {d})",
            p * p * (1.0 - 1.0 / dd)
        )));
    }
    Ok((numerator.max(0.0) / (2.0 * (1.0 - p) * (dd - 1.0))).sqrt())
}

/// `E‖ρ̃ − ρ‖² = p²(Tr ρ² − 1/d) + 2(1 − p)(Tr ρ² − Tr(U_c ρ U_c^H ρ))`.
///
/// Cross-checked against the direct Frobenius distance of the distorted state.
pub fn systematic_floor(rho: &DensityMatrix, noise: &NoiseModel) -> Result<f64> {
    let distorted = distorted_state(rho, noise)?;
    let d = rho.dim() as f64;
    let p = noise.p();
    let tr2 = purity(rho);
    let overlap = trace_product(&noise.u_c().conjugate(rho)?, rho);
    let floor = p * p * (tr2 - 1.0 / d) + 2.0 * (1.0 - p) * (tr2 - overlap);
    let direct = (distorted.matrix() - rho.matrix()).frobenius_norm().powi(2);
    if (floor - direct).abs() > 1e-10 {
        return Err(Error::ModelInconsistency(format!(
            "floor formula {floor} disagrees with direct distance {direct}"
        )));
    }
    Ok(floor.max(0.0))
}

/// Pure-state floor `p²(1 − 1/d) + 2(1 − p)(d − 1)ε²`.
pub fn pure_state_floor(d: usize, p: f64, epsilon: f64) -> f64 {
    let dd = d as f64;
    p * p * (1.0 - 1.0 / dd) + 2.0 * (1.0 - p) * (dd - 1.0) * epsilon * epsilon
}

/// `(1 − p)²(d − 1)`, the coefficient of `1/M`.
pub fn statistical_coefficient(d: usize, p: f64) -> f64 {
    (1.0 - p).powi(2) * (d as f64 - 1.0)
}

/// Model MSE at each `M` for a pure target.
pub fn predict_mse_curve(d: usize, p: f64, epsilon: f64, m_grid: &[usize]) -> Vec<(usize, f64)> {
    let floor = pure_state_floor(d, p, epsilon);
    let stat = statistical_coefficient(d, p);
    m_grid.iter().map(|&m| (m, stat / m as f64 + floor)).collect()
}

/// Sample size where the statistical term equals the floor.
pub fn detect_horizon(d: usize, p: f64, epsilon: f64) -> Result<f64> {
    let floor = pure_state_floor(d, p, epsilon);
    if !(floor > 0.0) {
        return Err(Error::InvalidParameter(
            "no systematic floor: the error decays without a horizon".into(),
        ));
    }
    Ok(statistical_coefficient(d, p) / floor)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryPoint {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(serialize_with = "sig9")]
    pub predicted_mse: f64,
    #[serde(default, serialize_with = "sig9_opt", skip_serializing_if = "Option::is_none")]
    pub observed_mse: Option<f64>,
}

/// Injected parameters of a closed-loop run and the absolute recovery errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    #[serde(serialize_with = "sig9")]
    pub p_true: f64,
    #[serde(serialize_with = "sig9")]
    pub epsilon_true: f64,
    #[serde(serialize_with = "sig9")]
    pub p_error: f64,
    #[serde(serialize_with = "sig9")]
    pub epsilon_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub d: usize,
    /// Leading eigenvalue of the reconstruction.
    #[serde(serialize_with = "sig9")]
    pub d1: f64,
    /// Leading eigenvalue of the ideal state.
    #[serde(serialize_with = "sig9")]
    pub lambda1: f64,
    #[serde(serialize_with = "sig9")]
    pub p_hat: f64,
    #[serde(serialize_with = "sig9")]
    pub slope: f64,
    #[serde(serialize_with = "sig9")]
    pub epsilon_hat: f64,
    /// Present when the slope came from a scaling series.
    pub fit: Option<LinearFit>,
    #[serde(serialize_with = "sig9")]
    pub floor: f64,
    /// Absent when the floor is zero.
    #[serde(serialize_with = "sig9_opt")]
    pub m_crit: Option<f64>,
    pub theory_curve: Vec<TheoryPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery: Option<Recovery>,
}

impl AnalysisReport {
    /// Report from a known slope; the theory curve covers `m_grid`.
    pub fn from_slope(d: usize, d1: f64, lambda1: f64, slope: f64, m_grid: &[usize]) -> Result<Self> {
        let p_hat = estimate_p(d1, lambda1, d)?;
        let epsilon_hat = estimate_epsilon(slope, p_hat, d)?;
        Ok(Self::assemble(d, d1, lambda1, p_hat, slope, epsilon_hat, None, m_grid, None))
    }

    /// Report from a measured scaling series.
    ///
    /// A fitted slope within three standard errors of the depolarizing term
    /// is read as zero distortion.
    pub fn from_series(series: &ScalingSeries, d1: f64, lambda1: f64) -> Result<Self> {
        let d = series.d;
        let fit = scaled_error_fit(series)?;
        let p_hat = estimate_p(d1, lambda1, d)?;
        let tol = 3.0 * fit.slope_stderr;
        let excess = fit.slope - p_hat * p_hat * (1.0 - 1.0 / d as f64);
        let epsilon_hat = if excess.abs() <= tol {
            0.0
        } else {
            estimate_epsilon_with_tolerance(fit.slope, p_hat, d, tol)?
        };
        let observed: Vec<f64> = series.points.iter().map(|p| p.mse_mean).collect();
        Ok(Self::assemble(
            d,
            d1,
            lambda1,
            p_hat,
            fit.slope,
            epsilon_hat,
            Some(fit),
            &series.ms(),
            Some(&observed),
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        d: usize,
        d1: f64,
        lambda1: f64,
        p_hat: f64,
        slope: f64,
        epsilon_hat: f64,
        fit: Option<LinearFit>,
        m_grid: &[usize],
        observed: Option<&[f64]>,
    ) -> Self {
        let theory_curve = predict_mse_curve(d, p_hat, epsilon_hat, m_grid)
            .into_iter()
            .enumerate()
            .map(|(k, (m, predicted_mse))| TheoryPoint {
                m,
                predicted_mse,
                observed_mse: observed.map(|o| o[k]),
            })
            .collect();
        Self {
            d,
            d1,
            lambda1,
            p_hat,
            slope,
            epsilon_hat,
            fit,
            floor: pure_state_floor(d, p_hat, epsilon_hat),
            m_crit: detect_horizon(d, p_hat, epsilon_hat).ok(),
            theory_curve,
            recovery: None,
        }
    }

    /// `M,observed_mse,predicted_mse`; observed is empty when unknown.
    pub fn write_curve_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["M", "observed_mse", "predicted_mse"])?;
        for t in &self.theory_curve {
            out.write_record([
                t.m.to_string(),
                t.observed_mse.map(|o| format!("{o:.8e}")).unwrap_or_default(),
                format!("{:.8e}", t.predicted_mse),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Trivial-state protocol used for closed-loop runs: I on 8 channels, III for
/// smaller subspaces, I at native size above 8.
fn closed_loop_spec(d: usize, seed: RngSeed) -> Result<ProtocolSpec> {
    match d {
        8 => Ok(ProtocolSpec::new(ProtocolKind::I, seed, seed)),
        2..=7 => ProtocolSpec::with_dims(ProtocolKind::III, 8, d, seed, seed),
        _ => ProtocolSpec::with_dims(ProtocolKind::I, d, d, seed, seed),
    }
}

/// Injects `(p, ε)`, simulates, and re-extracts both from the data alone.
///
/// `p̂` comes from the leading eigenvalue of the estimate pooled over all
/// replications; `ε̂` from the scaled-error slope.
pub fn closed_loop_recovery(
    d: usize,
    p_true: f64,
    epsilon_true: f64,
    m: usize,
    replications: usize,
    rng: RngSeed,
) -> Result<AnalysisReport> {
    let spec = closed_loop_spec(d, rng)?;
    let distortion_seed = RngSeed::new(rng.seed ^ (StreamDomain::Distortion as u64), rng.stream_index);
    let noise = sample_coherent_distortion(d, epsilon_true, distortion_seed)?.with_p(p_true)?;
    let plan = SimulationPlan {
        m_grid: log_spaced_grid(10.min(m), m, SimulationPlan::DEFAULT_POINTS),
        ..SimulationPlan::default_for(m).with_replications(replications)
    };
    let outcome = run_protocol(&spec, m, Some(&noise), &plan)?;
    let d1 = spectral_decompose(&outcome.pooled_estimate)?.leading();
    let mut report = AnalysisReport::from_series(&outcome.series, d1, 1.0)?;
    report.recovery = Some(Recovery {
        p_true,
        epsilon_true,
        p_error: (report.p_hat - p_true).abs(),
        epsilon_error: (report.epsilon_hat - epsilon_true).abs(),
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::sample_haar;
    use crate::matcore::frobenius_distance;
    use crate::shadow::ScalingPoint;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn p_examples() {
        assert!(close(estimate_p(0.90889, 1.0, 8).unwrap(), 0.10413, 5e-6));
        assert!(close(estimate_p(0.95372, 1.0, 4).unwrap(), 0.06171, 5e-6));
        assert_eq!(estimate_p(0.7, 0.7, 8).unwrap(), 0.0);
        assert_eq!(estimate_p(1.02, 1.0, 8).unwrap(), 0.0);
        assert!(estimate_p(0.1, 0.125, 8).is_err());
        assert!(estimate_p(1.2, 1.0, 8).is_err());
    }

    #[test]
    fn epsilon_examples() {
        assert!(close(estimate_epsilon(1.12873e-2, 0.10412, 8).unwrap(), 0.01198, 5e-6));
        assert!(close(estimate_epsilon(1.43278e-3, 0.02550, 4).unwrap(), 0.01271, 5e-6));
        let p: f64 = 0.3;
        assert_eq!(estimate_epsilon(p * p * (1.0 - 1.0 / 8.0), p, 8).unwrap(), 0.0);
        assert!(matches!(estimate_epsilon(0.0, 0.3, 8), Err(Error::ModelInconsistency(_))));
        assert!(estimate_epsilon(0.1, 1.0, 8).is_err());
    }

    #[test]
    fn floor_examples() {
        let psi = DensityMatrix::basis_state(8, 0).unwrap();
        assert_eq!(systematic_floor(&psi, &NoiseModel::ideal(8)).unwrap(), 0.0);

        let want = 0.10412f64.powi(2) * 7.0 / 8.0 + 2.0 * 0.89588 * 7.0 * 0.01198f64.powi(2);
        assert!(close(want, 1.1287e-2, 2e-6));
        let noise = sample_coherent_distortion(8, 0.01198, RngSeed::new(3, 0))
            .unwrap()
            .with_p(0.10412)
            .unwrap();
        assert!(close(systematic_floor(&psi, &noise).unwrap(), want, 1e-10));

        let mixed = DensityMatrix::maximally_mixed(4).unwrap();
        let u = sample_haar(4, RngSeed::new(9, 0)).unwrap();
        let noise = NoiseModel::new(0.4, u).unwrap();
        assert!(systematic_floor(&mixed, &noise).unwrap().abs() < 1e-12);
    }

    #[test]
    fn curve_examples() {
        let grid = [10, 100, 1000];
        for (m, mse) in predict_mse_curve(8, 0.0, 0.0, &grid) {
            assert!(close(mse, 7.0 / m as f64, 1e-15));
        }
        let (_, at100) = predict_mse_curve(8, 0.10412, 0.01198, &[100])[0];
        assert!(close(at100, 0.06747, 5e-5));
        let (_, far) = predict_mse_curve(8, 0.10412, 0.01198, &[usize::MAX])[0];
        assert!(close(far, 1.1287e-2, 2e-6));
        assert!(close(far.sqrt(), 0.1062, 5e-5));
    }

    #[test]
    fn horizon_examples() {
        assert!(close(detect_horizon(8, 0.10412, 0.01198).unwrap(), 497.7, 0.2));
        assert!(detect_horizon(8, 0.0, 0.0).is_err());
        let eps_part = |e: f64| pure_state_floor(8, 0.0, e);
        assert!(close(eps_part(0.024), 4.0 * eps_part(0.012), 1e-15));
        assert!(detect_horizon(8, 0.1, 0.024).unwrap() < detect_horizon(8, 0.1, 0.012).unwrap());
    }

    fn synthetic(d: usize, slope: f64, intercept: f64) -> ScalingSeries {
        let points = log_spaced_grid(10, 100_000, 20)
            .into_iter()
            .map(|m| ScalingPoint {
                m,
                mse_mean: slope + intercept / m as f64,
                mse_stderr: 0.0,
                replications: 1,
            })
            .collect();
        ScalingSeries::new(d, points).unwrap()
    }

    #[test]
    fn fit_recovers_exact_lines() {
        let b = 7.0 * (1.0 - 0.10412f64).powi(2);
        let fit = scaled_error_fit(&synthetic(8, 1.12873e-2, b)).unwrap();
        assert!(close(fit.slope, 1.12873e-2, 1e-12));
        assert!(close(fit.intercept, b, 1e-8));
        assert!(fit.slope_stderr < 1e-12);
        assert!(close(fit.r_squared, 1.0, 1e-12));

        let fit = scaled_error_fit(&synthetic(4, 1.43278e-3, 3.0 * 0.9745f64.powi(2))).unwrap();
        assert!(close(fit.slope, 1.43278e-3, 1e-12));
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(weighted_linear_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], &[1.0; 3]).is_err());
        assert!(weighted_linear_fit(&[1.0, 2.0], &[1.0, 2.0], &[1.0; 2]).is_err());
    }

    #[test]
    fn table_ii_rows_from_slopes() {
        let r = AnalysisReport::from_slope(8, 0.90889, 1.0, 1.12873e-2, &[10, 100]).unwrap();
        assert!(close(r.p_hat, 0.1041, 5e-5) && close(r.epsilon_hat, 0.0120, 5e-5));
        let r = AnalysisReport::from_slope(4, 0.98087, 1.0, 1.43278e-3, &[10, 100]).unwrap();
        assert!(close(r.p_hat, 0.0255, 5e-5) && close(r.epsilon_hat, 0.0127, 5e-5));
        assert!(r.m_crit.is_some());
    }

    #[test]
    fn noiseless_report_has_no_horizon() {
        let r = AnalysisReport::from_series(&synthetic(8, 0.0, 7.0), 1.0, 1.0).unwrap();
        assert!(r.floor.abs() < 1e-12);
        assert!(r.m_crit.is_none());
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["m_crit"].is_null());
    }

    #[test]
    fn spectral_and_epsilon_recovery_are_exact_on_analytic_inputs() {
        let psi = DensityMatrix::basis_state(4, 0).unwrap();
        let noise = sample_coherent_distortion(4, 0.02, RngSeed::new(1, 1))
            .unwrap()
            .with_p(0.07)
            .unwrap();
        let rho_t = distorted_state(&psi, &noise).unwrap();
        let d1 = spectral_decompose(&rho_t).unwrap().leading();
        let p = estimate_p(d1, 1.0, 4).unwrap();
        assert!(close(p, 0.07, 1e-10));
        let eps = estimate_epsilon(systematic_floor(&psi, &noise).unwrap(), p, 4).unwrap();
        assert!(close(eps, noise.epsilon(), 1e-10));
    }

    #[test]
    fn floor_matches_direct_distance_for_rotated_pure_state() {
        let u = sample_haar(3, RngSeed::new(8, 0)).unwrap();
        let psi = DensityMatrix::pure(&u.column(0)).unwrap();
        let noise = NoiseModel::new(0.2, sample_haar(3, RngSeed::new(8, 1)).unwrap()).unwrap();
        let direct = frobenius_distance(&distorted_state(&psi, &noise).unwrap(), &psi).unwrap();
        assert!(close(systematic_floor(&psi, &noise).unwrap(), direct * direct, 1e-10));
    }

    #[test]
    fn noiseless_closed_loop() {
        let r = closed_loop_recovery(4, 0.0, 0.0, 10_000, 20, RngSeed::new(17, 0)).unwrap();
        assert!(r.p_hat <= 0.01, "{r:?}");
        assert!(r.epsilon_hat <= 0.002, "{r:?}");
    }

    #[test]
    fn report_json_uses_nine_digits() {
        let r = AnalysisReport::from_slope(8, 0.90889, 1.0, 1.12873e-2, &[100]).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"p_hat\":0.104125714"), "{json}");
        let mut buf = Vec::new();
        r.write_curve_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("M,observed_mse,predicted_mse\n100,,"));
    }
}
