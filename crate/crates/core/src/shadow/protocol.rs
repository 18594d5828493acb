//! The four measurement protocols and cumulative scaling-series simulation.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{born_diagonal, sample_outcome, IntensityAccumulator};
use crate::error::{Error, Result};
use crate::haar::{sample_haar_with, RngSeed, StreamDomain};
use crate::matcore::{frobenius_distance, ComplexMatrix, DensityMatrix, HermitianEstimate, UnitaryMatrix};
use crate::mesh::{embed_unitary, SubspaceEmbedding};
use crate::noise::{distorted_state, NoiseModel};

/// I: trivial state on all channels. II: I behind a hidden Haar randomizer.
/// III: trivial state on a 4-channel subspace. IV: III behind a hidden randomizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProtocolKind {
    I,
    II,
    III,
    IV,
}

impl ProtocolKind {
    pub fn is_randomized(self) -> bool {
        matches!(self, ProtocolKind::II | ProtocolKind::IV)
    }

    pub fn is_subspace(self) -> bool {
        matches!(self, ProtocolKind::III | ProtocolKind::IV)
    }

    /// Reconstruction dimension of the canonical 8-channel setup.
    pub fn default_sub_dim(self) -> usize {
        if self.is_subspace() {
            4
        } else {
            8
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProtocolKind::I => "I",
            ProtocolKind::II => "II",
            ProtocolKind::III => "III",
            ProtocolKind::IV => "IV",
        };
        f.write_str(s)
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(ProtocolKind::I),
            "II" | "2" => Ok(ProtocolKind::II),
            "III" | "3" => Ok(ProtocolKind::III),
            "IV" | "4" => Ok(ProtocolKind::IV),
            _ => Err(Error::InvalidParameter(format!("unknown protocol {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProtocolSpec {
    kind: ProtocolKind,
    d_full: usize,
    d_sub: usize,
    hidden_randomizer_seed: RngSeed,
    haar_seed: RngSeed,
}

impl ProtocolSpec {
    /// The 8-channel processor with a 4-channel subspace for III and IV.
    pub fn new(kind: ProtocolKind, haar_seed: RngSeed, hidden_randomizer_seed: RngSeed) -> Self {
        Self {
            kind,
            d_full: 8,
            d_sub: kind.default_sub_dim(),
            hidden_randomizer_seed,
            haar_seed,
        }
    }

    /// Arbitrary dimensions; I/II need `d_sub == d_full`, III/IV need `d_sub < d_full`.
    pub fn with_dims(
        kind: ProtocolKind,
        d_full: usize,
        d_sub: usize,
        haar_seed: RngSeed,
        hidden_randomizer_seed: RngSeed,
    ) -> Result<Self> {
        let ok = d_sub >= 2
            && if kind.is_subspace() {
                d_sub < d_full
            } else {
                d_sub == d_full
            };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "protocol {kind} cannot use d_full = {d_full}, d_sub = {d_sub}"
            )));
        }
        Ok(Self {
            kind,
            d_full,
            d_sub,
            hidden_randomizer_seed,
            haar_seed,
        })
    }

    pub fn kind(&self) -> ProtocolKind {
        self.kind
    }

    pub fn d_full(&self) -> usize {
        self.d_full
    }

    /// Dimension of the reconstructed state.
    pub fn d_sub(&self) -> usize {
        self.d_sub
    }

    pub fn haar_seed(&self) -> RngSeed {
        self.haar_seed
    }

    pub fn hidden_randomizer_seed(&self) -> RngSeed {
        self.hidden_randomizer_seed
    }

    /// Offset-0 embedding for III/IV.
    pub fn embedding(&self) -> Option<SubspaceEmbedding> {
        self.kind
            .is_subspace()
            .then(|| SubspaceEmbedding::new(self.d_sub, self.d_full, 0).expect("validated dims"))
    }

    /// State the reconstruction converges to in the noiseless limit.
    pub fn target_state(&self) -> Result<DensityMatrix> {
        let trivial = DensityMatrix::basis_state(self.d_sub, 0)?;
        match self.hidden_randomizer()? {
            Some(u) => Ok(DensityMatrix::from_trusted(u.conjugate(&trivial)?)),
            None => Ok(trivial),
        }
    }

    fn hidden_randomizer(&self) -> Result<Option<UnitaryMatrix>> {
        if !self.kind.is_randomized() {
            return Ok(None);
        }
        let mut rng = self.hidden_randomizer_seed.rng_for(StreamDomain::Randomizer);
        sample_haar_with(self.d_sub, &mut rng).map(Some)
    }
}

/// The simulated processor. Holds the hidden randomizer and noise; the
/// reconstruction only ever sees the intensities it returns.
struct Device {
    /// `U_rdm ρ̃ U_rdm^H` in the active subspace, with `ρ̃` the distorted input.
    effective_state: ComplexMatrix,
    embedding: Option<SubspaceEmbedding>,
}

impl Device {
    fn new(spec: &ProtocolSpec, noise: Option<&NoiseModel>) -> Result<Self> {
        let input = DensityMatrix::basis_state(spec.d_sub, 0)?;
        let distorted = match noise {
            Some(n) => distorted_state(&input, n)?,
            None => input,
        };
        let effective_state = match spec.hidden_randomizer()? {
            Some(u) => u.conjugate(&distorted)?,
            None => distorted.into_inner(),
        };
        let embedding = spec.embedding();
        let effective_state = match &embedding {
            Some(emb) => embed_state(&effective_state, emb),
            None => effective_state,
        };
        Ok(Self {
            effective_state,
            embedding,
        })
    }

    /// Normalized intensities over the active channels for programmed `u_haar`.
    fn measure(&self, u_haar: &UnitaryMatrix) -> Result<Vec<f64>> {
        let intensities = match &self.embedding {
            Some(emb) => born_diagonal(embed_unitary(u_haar, emb)?.matrix(), &self.effective_state),
            None => born_diagonal(u_haar.matrix(), &self.effective_state),
        };
        let window = match &self.embedding {
            Some(emb) => &intensities[emb.channels()],
            None => &intensities[..],
        };
        super::sanitize_probabilities(window.to_vec())
    }
}

/// `ρ ⊕ 0` placed on the embedded channels.
fn embed_state(rho: &ComplexMatrix, emb: &SubspaceEmbedding) -> ComplexMatrix {
    let range = emb.channels();
    let mut out = ComplexMatrix::zeros(emb.full_dim);
    for i in range.clone() {
        for j in range.clone() {
            out[(i, j)] = rho[(i - emb.offset, j - emb.offset)];
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    /// Full intensity vector per unitary.
    #[default]
    Intensity,
    /// One sampled outcome per unitary.
    Click,
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "intensity" => Ok(EstimatorKind::Intensity),
            "click" => Ok(EstimatorKind::Click),
            _ => Err(Error::InvalidParameter(format!("unknown estimator {s:?}"))),
        }
    }
}

/// Grid of `M` values at which cumulative reconstructions are scored.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationPlan {
    pub m_grid: Vec<usize>,
    pub replications: usize,
    pub estimator: EstimatorKind,
}

impl SimulationPlan {
    pub const DEFAULT_POINTS: usize = 20;
    pub const DEFAULT_REPLICATIONS: usize = 20;

    /// 20 log-spaced points from `min(10, m_max)` to `m_max`, 20 replications.
    pub fn default_for(m_max: usize) -> Self {
        Self {
            m_grid: log_spaced_grid(10.min(m_max), m_max, Self::DEFAULT_POINTS),
            replications: Self::DEFAULT_REPLICATIONS,
            estimator: EstimatorKind::Intensity,
        }
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_estimator(mut self, estimator: EstimatorKind) -> Self {
        self.estimator = estimator;
        self
    }
}

/// Up to `n` rounded log-spaced integers from `lo` to `hi`, deduplicated.
pub fn log_spaced_grid(lo: usize, hi: usize, n: usize) -> Vec<usize> {
    if n == 0 || hi == 0 {
        return Vec::new();
    }
    let lo = lo.clamp(1, hi);
    if n == 1 || lo == hi {
        return vec![hi];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut grid: Vec<usize> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp().round() as usize)
        .collect();
    grid[0] = lo;
    grid[n - 1] = hi;
    grid.dedup();
    grid
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReconstructionJson", into = "ReconstructionJson")]
pub struct ReconstructionResult {
    pub estimate: HermitianEstimate,
    pub m: usize,
    pub target: DensityMatrix,
    pub frobenius_error: f64,
}

impl ReconstructionResult {
    pub fn new(estimate: HermitianEstimate, m: usize, target: DensityMatrix) -> Result<Self> {
        let frobenius_error = frobenius_distance(&estimate, &target)?;
        Ok(Self {
            estimate,
            m,
            target,
            frobenius_error,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReconstructionJson {
    #[serde(rename = "M")]
    m: usize,
    frobenius_error: f64,
    estimate: HermitianEstimate,
    target: DensityMatrix,
}

impl TryFrom<ReconstructionJson> for ReconstructionResult {
    type Error = Error;

    fn try_from(j: ReconstructionJson) -> Result<Self> {
        let r = ReconstructionResult::new(j.estimate, j.m, j.target)?;
        if (r.frobenius_error - j.frobenius_error).abs() > 1e-12 {
            return Err(Error::Format(format!(
                "stored frobenius_error {} disagrees with estimate (computed {})",
                j.frobenius_error, r.frobenius_error
            )));
        }
        Ok(r)
    }
}

impl From<ReconstructionResult> for ReconstructionJson {
    fn from(r: ReconstructionResult) -> Self {
        Self {
            m: r.m,
            frobenius_error: r.frobenius_error,
            estimate: r.estimate,
            target: r.target,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    #[serde(rename = "M")]
    pub m: usize,
    pub mse_mean: f64,
    pub mse_stderr: f64,
    pub replications: usize,
}

/// Mean squared Frobenius error against `M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSeries {
    pub d: usize,
    pub points: Vec<ScalingPoint>,
}

impl ScalingSeries {
    pub fn new(d: usize, points: Vec<ScalingPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("empty scaling series".into()));
        }
        for w in points.windows(2) {
            if w[1].m <= w[0].m {
                return Err(Error::InvalidParameter(format!(
                    "M must be strictly increasing ({} then {})",
                    w[0].m, w[1].m
                )));
            }
        }
        for p in &points {
            if p.replications == 0 || p.m == 0 {
                return Err(Error::InvalidParameter(format!("invalid point at M = {}", p.m)));
            }
            if !(p.mse_mean >= 0.0 && p.mse_stderr >= 0.0) {
                return Err(Error::InvalidParameter(format!("negative or NaN mse at M = {}", p.m)));
            }
        }
        Ok(Self { d, points })
    }

    /// Aggregates per-replication squared errors (`errors[r][k]` at `grid[k]`).
    pub fn from_replications(d: usize, grid: &[usize], errors: &[Vec<f64>]) -> Result<Self> {
        let n = errors.len();
        let points = grid
            .iter()
            .enumerate()
            .map(|(k, &m)| {
                let mean = errors.iter().map(|e| e[k]).sum::<f64>() / n as f64;
                let stderr = if n > 1 {
                    let var = errors.iter().map(|e| (e[k] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                    (var / n as f64).sqrt()
                } else {
                    0.0
                };
                ScalingPoint {
                    m,
                    mse_mean: mean,
                    mse_stderr: stderr,
                    replications: n,
                }
            })
            .collect();
        Self::new(d, points)
    }

    pub fn ms(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.m).collect()
    }

    pub fn point_at(&self, m: usize) -> Option<&ScalingPoint> {
        self.points.iter().find(|p| p.m == m)
    }

    /// CSV with header `M,mse_mean,mse_stderr,replications`, 9 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["M", "mse_mean", "mse_stderr", "replications"])?;
        for p in &self.points {
            out.write_record([
                p.m.to_string(),
                format!("{:.8e}", p.mse_mean),
                format!("{:.8e}", p.mse_stderr),
                p.replications.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, d: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["M", "mse_mean", "mse_stderr", "replications"] {
            return Err(Error::Format(format!(
                "expected header M,mse_mean,mse_stderr,replications, found {}",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut points = Vec::new();
        for (i, row) in rdr.deserialize::<ScalingPoint>().enumerate() {
            points.push(row.map_err(|e| Error::Format(format!("scaling series row {}: {e}", i + 1)))?);
        }
        Self::new(d, points)
    }
}

/// Replication 0's reconstruction at the full `M`, plus the series over all replications.
#[derive(Clone, Debug)]
pub struct ProtocolOutcome {
    pub result: ReconstructionResult,
    pub series: ScalingSeries,
    /// Mean of every replication's final estimate (`M · replications` snapshots).
    pub pooled_estimate: HermitianEstimate,
}

/// Simulates `plan.replications` independent runs of `m` snapshots each and
/// scores cumulative reconstructions at every grid point.
///
/// Replication `r` draws its unitaries from stream `haar_seed.stream_index + r`,
/// so results do not depend on the rayon worker count.
pub fn run_protocol(
    spec: &ProtocolSpec,
    m: usize,
    noise: Option<&NoiseModel>,
    plan: &SimulationPlan,
) -> Result<ProtocolOutcome> {
    validate_grid(&plan.m_grid, m)?;
    if plan.replications == 0 {
        return Err(Error::InvalidParameter("replications must be at least 1".into()));
    }
    if let Some(n) = noise {
        if n.dim() != spec.d_sub {
            return Err(Error::DimensionMismatch {
                expected: spec.d_sub,
                found: n.dim(),
            });
        }
    }
    let device = Device::new(spec, noise)?;
    let target = spec.target_state()?;

    let runs: Vec<(Vec<f64>, IntensityAccumulator)> = (0..plan.replications)
        .into_par_iter()
        .map(|r| run_replication(spec, &device, &target, m, plan, r))
        .collect::<Result<_>>()?;

    let errors: Vec<Vec<f64>> = runs.iter().map(|(e, _)| e.clone()).collect();
    let series = ScalingSeries::from_replications(spec.d_sub, &plan.m_grid, &errors)?;
    let mut pooled = IntensityAccumulator::new(spec.d_sub);
    for (_, acc) in &runs {
        pooled.merge(acc);
    }
    let result = ReconstructionResult::new(runs[0].1.estimate()?, m, target)?;
    Ok(ProtocolOutcome {
        result,
        series,
        pooled_estimate: pooled.estimate()?,
    })
}

fn validate_grid(grid: &[usize], m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidParameter("M must be at least 1".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty M grid".into()));
    }
    if grid[0] < 1 || *grid.last().unwrap() > m || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(format!(
            "M grid must be strictly increasing within [1, {m}]"
        )));
    }
    Ok(())
}

fn run_replication(
    spec: &ProtocolSpec,
    device: &Device,
    target: &DensityMatrix,
    m: usize,
    plan: &SimulationPlan,
    r: usize,
) -> Result<(Vec<f64>, IntensityAccumulator)> {
    let seed = spec.haar_seed.with_stream(spec.haar_seed.stream_index.wrapping_add(r as u32));
    let mut haar_rng = seed.rng_for(StreamDomain::Haar);
    let mut outcome_rng = seed.rng_for(StreamDomain::Outcome);
    let mut acc = IntensityAccumulator::new(spec.d_sub);
    let mut errors = Vec::with_capacity(plan.m_grid.len());
    let mut next = plan.m_grid.iter().peekable();

    for k in 1..=m {
        let u = sample_haar_with(spec.d_sub, &mut haar_rng)?;
        let probs = device.measure(&u)?;
        match plan.estimator {
            EstimatorKind::Intensity => acc.push(u.matrix(), &probs),
            EstimatorKind::Click => acc.push_outcome(u.matrix(), sample_outcome(&probs, &mut outcome_rng)),
        }
        if next.peek() == Some(&&k) {
            next.next();
            let est = acc.estimate_matrix().expect("k >= 1");
            errors.push((&est - target.matrix()).frobenius_norm().powi(2));
        }
    }
    Ok((errors, acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shadow::expected_mse;

    fn spec(kind: ProtocolKind) -> ProtocolSpec {
        ProtocolSpec::new(kind, RngSeed::new(11, 0), RngSeed::new(99, 0))
    }

    #[test]
    fn grid_shapes() {
        let g = log_spaced_grid(10, 100_000, 20);
        assert_eq!(g.len(), 20);
        assert_eq!((g[0], g[19]), (10, 100_000));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(log_spaced_grid(1, 3, 20), vec![1, 2, 3]);
    }

    #[test]
    fn invalid_grids_rejected() {
        let s = spec(ProtocolKind::I);
        for grid in [vec![], vec![0, 5], vec![5, 5], vec![10, 200]] {
            let plan = SimulationPlan {
                m_grid: grid,
                replications: 1,
                estimator: EstimatorKind::Intensity,
            };
            assert!(run_protocol(&s, 100, None, &plan).is_err());
        }
    }

    #[test]
    fn protocol_dims_and_targets() {
        assert_eq!(spec(ProtocolKind::III).d_sub(), 4);
        assert_eq!(spec(ProtocolKind::II).d_sub(), 8);
        assert!(ProtocolSpec::with_dims(ProtocolKind::I, 8, 4, RngSeed::new(0, 0), RngSeed::new(0, 0)).is_err());
        assert!(ProtocolSpec::with_dims(ProtocolKind::III, 4, 4, RngSeed::new(0, 0), RngSeed::new(0, 0)).is_err());
        let t = spec(ProtocolKind::I).target_state().unwrap();
        assert_eq!(t, DensityMatrix::basis_state(8, 0).unwrap());
        let t2 = spec(ProtocolKind::IV).target_state().unwrap();
        assert_eq!(t2.dim(), 4);
        assert!(frobenius_distance(&t2, &DensityMatrix::basis_state(4, 0).unwrap()).unwrap() > 1e-3);
    }

    #[test]
    fn subspace_device_ignores_outer_channels() {
        let s = spec(ProtocolKind::III);
        let dev = Device::new(&s, None).unwrap();
        assert_eq!(dev.effective_state.dim(), 8);
        let u = UnitaryMatrix::identity(4);
        assert_eq!(dev.measure(&u).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn reproducible_and_worker_independent() {
        let s = spec(ProtocolKind::II);
        let plan = SimulationPlan {
            m_grid: vec![10, 50, 200],
            replications: 4,
            estimator: EstimatorKind::Intensity,
        };
        let a = run_protocol(&s, 200, None, &plan).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_protocol(&s, 200, None, &plan).unwrap());
        assert_eq!(a.series, b.series);
        assert_eq!(a.result, b.result);
        assert!((a.result.frobenius_error.powi(2) - a.series.points[2].mse_mean).abs() < 10.0);
    }

    #[test]
    fn protocol_ii_converges_to_rotated_state() {
        let s = spec(ProtocolKind::II);
        let plan = SimulationPlan {
            m_grid: vec![10_000],
            replications: 20,
            estimator: EstimatorKind::Intensity,
        };
        let out = run_protocol(&s, 10_000, None, &plan).unwrap();
        let p = out.series.points[0];
        let want = expected_mse(8, 10_000, 1.0);
        assert!((p.mse_mean - want).abs() < 3.0 * p.mse_stderr, "{p:?} vs {want}");
    }

    #[test]
    fn series_csv_round_trip() {
        let series = ScalingSeries::new(
            8,
            vec![
                ScalingPoint {
                    m: 10,
                    mse_mean: 0.7,
                    mse_stderr: 0.01,
                    replications: 20,
                },
                ScalingPoint {
                    m: 100,
                    mse_mean: 0.07,
                    mse_stderr: 0.001,
                    replications: 20,
                },
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        series.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("M,mse_mean,mse_stderr,replications\n10,7.00000000e-1,"));
        assert_eq!(ScalingSeries::read_csv(&buf[..], 8).unwrap(), series);
    }

    #[test]
    fn reconstruction_json_checks_error() {
        let target = DensityMatrix::basis_state(2, 0).unwrap();
        let est = HermitianEstimate::from(DensityMatrix::maximally_mixed(2).unwrap());
        let r = ReconstructionResult::new(est, 5, target).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<ReconstructionResult>(&json).unwrap(), r);
        let tampered = json.replace(&format!("{}", r.frobenius_error), "0.5");
        assert!(serde_json::from_str::<ReconstructionResult>(&tampered).is_err());
    }
}
