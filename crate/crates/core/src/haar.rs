//! Haar-random unitaries and the second-order Weingarten moments.
//!
//! # Randomness
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream keyed by
//! an [`RngSeed`]: the 64-bit seed is expanded with `SeedableRng::seed_from_u64`
//! and the 64-bit ChaCha stream id is `(domain << 32) | stream_index`, where the
//! domain separates unrelated uses (Haar draws, click outcomes, hidden
//! randomizers, ...). Standard normal variates come from
//! `rand_distr::StandardNormal`, which uses the Ziggurat transform of uniform
//! 64-bit draws.

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{ComplexMatrix, UnitaryMatrix, C64};

/// Reproducibility key: `(seed, stream_index)` fixes the entire sample sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream_index: u32,
}

/// Independent uses of the same seed draw from disjoint ChaCha streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamDomain {
    Haar = 0,
    Outcome = 1,
    Randomizer = 2,
    Distortion = 3,
    Perturbation = 4,
}

impl RngSeed {
    pub const fn new(seed: u64, stream_index: u32) -> Self {
        Self { seed, stream_index }
    }

    pub const fn with_stream(self, stream_index: u32) -> Self {
        Self {
            seed: self.seed,
            stream_index,
        }
    }

    /// Generator for the Haar domain.
    pub fn rng(&self) -> ChaCha8Rng {
        self.rng_for(StreamDomain::Haar)
    }

    pub fn rng_for(&self, domain: StreamDomain) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((domain as u64) << 32) | self.stream_index as u64);
        rng
    }
}

/// Draws one Haar unitary from the stream `seed` points at.
pub fn sample_haar(d: usize, seed: RngSeed) -> Result<UnitaryMatrix> {
    sample_haar_with(d, &mut seed.rng())
}

/// Draws a Haar unitary from `rng`:
///
/// 1. fill `Z` with `x + iy`, `x, y ~ N(0, 1)` i.i.d.;
/// 2. factor `Z = QR` (Householder);
/// 3. `D_kk = R_kk / |R_kk|`, or 1 when `R_kk = 0`;
/// 4. return `QD`.
pub fn sample_haar_with<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<UnitaryMatrix> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let z = ComplexMatrix::from_fn(d, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let (mut q, r_diag) = householder_qr(z);
    for (k, r) in r_diag.iter().enumerate() {
        let n = r.norm();
        let phase = if n == 0.0 { C64::new(1.0, 0.0) } else { r / n };
        for i in 0..d {
            q[(i, k)] *= phase;
        }
    }
    Ok(UnitaryMatrix::from_trusted(q))
}

/// Householder QR. Returns `Q` and the diagonal of `R`.
fn householder_qr(mut a: ComplexMatrix) -> (ComplexMatrix, Vec<C64>) {
    let d = a.dim();
    let mut q = ComplexMatrix::identity(d);
    let mut r_diag = vec![C64::new(0.0, 0.0); d];
    let mut v = vec![C64::new(0.0, 0.0); d];

    for k in 0..d {
        let norm_x = (k..d).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm_x == 0.0 {
            r_diag[k] = C64::new(0.0, 0.0);
            continue;
        }
        let x0 = a[(k, k)];
        let phase = if x0.norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * norm_x;
        for i in k..d {
            v[i] = a[(i, k)];
        }
        v[k] -= alpha;
        let vnorm = (k..d).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            r_diag[k] = a[(k, k)];
            continue;
        }
        for vi in v.iter_mut().take(d).skip(k) {
            *vi /= vnorm;
        }

        // A <- (I - 2 v v^H) A on rows k..d
        for j in k..d {
            let s: C64 = (k..d).map(|i| v[i].conj() * a[(i, j)]).sum();
            for i in k..d {
                a[(i, j)] -= v[i] * s * 2.0;
            }
        }
        // Q <- Q (I - 2 v v^H) on columns k..d
        for i in 0..d {
            let s: C64 = (k..d).map(|j| q[(i, j)] * v[j]).sum();
            for j in k..d {
                q[(i, j)] -= s * v[j].conj() * 2.0;
            }
        }
        r_diag[k] = alpha;
    }
    (q, r_diag)
}

/// Cycle type of `σ τ^{-1}` in `S_2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Partition {
    /// Identity permutation, `Wg(1^2, d) = 1/(d^2 - 1)`.
    OneOne,
    /// Transposition, `Wg(2, d) = -1/(d(d^2 - 1))`.
    Two,
}

pub fn weingarten_value(partition: Partition, d: usize) -> Result<Rational64> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "Weingarten function for q = 2 is singular at d = {d}; need d >= 2"
        )));
    }
    let d = d as i64;
    Ok(match partition {
        Partition::OneOne => Rational64::new(1, d * d - 1),
        Partition::Two => Rational64::new(-1, d * (d * d - 1)),
    })
}

/// Indices of `E[U_{i1 j1} U_{i2 j2} conj(U_{i1' j1'}) conj(U_{i2' j2'})]`, zero-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MomentIndex {
    pub i1: usize,
    pub j1: usize,
    pub i2: usize,
    pub j2: usize,
    pub i1p: usize,
    pub j1p: usize,
    pub i2p: usize,
    pub j2p: usize,
}

impl MomentIndex {
    /// Builds an index from row labels `(i1, i2, i1', i2')` and column labels
    /// `(j1, j2, j1', j2')`.
    pub fn from_rows_cols(rows: [usize; 4], cols: [usize; 4]) -> Self {
        Self {
            i1: rows[0],
            i2: rows[1],
            i1p: rows[2],
            i2p: rows[3],
            j1: cols[0],
            j2: cols[1],
            j1p: cols[2],
            j2p: cols[3],
        }
    }

    pub fn rows(&self) -> [usize; 4] {
        [self.i1, self.i2, self.i1p, self.i2p]
    }

    pub fn cols(&self) -> [usize; 4] {
        [self.j1, self.j2, self.j1p, self.j2p]
    }

    fn check(&self, d: usize) -> Result<()> {
        if self.rows().iter().chain(self.cols().iter()).any(|&x| x >= d) {
            return Err(Error::InvalidParameter(format!(
                "moment index {self:?} out of range for d = {d}"
            )));
        }
        Ok(())
    }

    /// Compact label such as `r0101-c0011`: the row and column index classes.
    pub fn label(&self) -> String {
        let fmt = |xs: [usize; 4]| xs.iter().map(|x| x.to_string()).collect::<String>();
        format!("r{}-c{}", fmt(self.rows()), fmt(self.cols()))
    }

    /// The indexed product for one unitary.
    pub fn evaluate(&self, u: &ComplexMatrix) -> C64 {
        u[(self.i1, self.j1)]
            * u[(self.i2, self.j2)]
            * u[(self.i1p, self.j1p)].conj()
            * u[(self.i2p, self.j2p)].conj()
    }
}

/// Exact Haar average of the indexed product:
/// `sum_{σ,τ ∈ S_2} δ(i', i∘σ) δ(j, j'∘τ) Wg(σ τ^{-1}, d)`.
pub fn fourth_moment_analytic(idx: &MomentIndex, d: usize) -> Result<Rational64> {
    idx.check(d)?;
    let wg_id = weingarten_value(Partition::OneOne, d)?;
    let wg_swap = weingarten_value(Partition::Two, d)?;

    let (rows, cols) = (idx.rows(), idx.cols());
    // Whether primed labels match unprimed ones through the identity / the swap.
    let rows_id = rows[0] == rows[2] && rows[1] == rows[3];
    let rows_sw = rows[0] == rows[3] && rows[1] == rows[2];
    let cols_id = cols[0] == cols[2] && cols[1] == cols[3];
    let cols_sw = cols[0] == cols[3] && cols[1] == cols[2];

    let mut total = Rational64::from_integer(0);
    for (sigma_fires, sigma_swap) in [(rows_id, false), (rows_sw, true)] {
        for (tau_fires, tau_swap) in [(cols_id, false), (cols_sw, true)] {
            if sigma_fires && tau_fires {
                total += if sigma_swap == tau_swap { wg_id } else { wg_swap };
            }
        }
    }
    Ok(total)
}

/// `E[conj(U_{ia}) U_{ij} conj(U_{ik}) U_{ib}]` for a fixed row `i`:
/// `(δ_ja δ_bk + δ_jk δ_ba) / (d(d+1))`.
pub fn reduced_fourth_moment(a: usize, j: usize, k: usize, b: usize, d: usize) -> Result<Rational64> {
    if [a, j, k, b].iter().any(|&x| x >= d) || d == 0 {
        return Err(Error::InvalidParameter(format!(
            "indices ({a}, {j}, {k}, {b}) out of range for d = {d}"
        )));
    }
    let fires = (j == a && b == k) as i64 + (j == k && b == a) as i64;
    let d = d as i64;
    Ok(Rational64::new(fires, d * (d + 1)))
}

/// [`reduced_fourth_moment`] summed over the row index: `(δ_aj δ_kb + δ_ak δ_jb) / (d + 1)`.
pub fn reduced_fourth_moment_summed(a: usize, j: usize, k: usize, b: usize, d: usize) -> Result<Rational64> {
    Ok(reduced_fourth_moment(a, j, k, b, d)? * Rational64::from_integer(d as i64))
}

pub fn rational_to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Monte-Carlo estimate of one moment with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentEstimate {
    pub mean: C64,
    /// Standard error of the complex mean, `sqrt((var_re + var_im) / n)`.
    pub stderr: f64,
    pub samples: usize,
}

impl MomentEstimate {
    /// `|mean - expected| / stderr`. Zero when both deviation and stderr vanish.
    pub fn z_score(&self, expected: C64) -> f64 {
        let dev = (self.mean - expected).norm();
        if dev == 0.0 {
            0.0
        } else {
            dev / self.stderr
        }
    }
}

#[derive(Clone, Default)]
struct MomentAccumulator {
    sum: Vec<C64>,
    sum_sq: Vec<f64>,
    n: usize,
}

impl MomentAccumulator {
    fn new(k: usize) -> Self {
        Self {
            sum: vec![C64::new(0.0, 0.0); k],
            sum_sq: vec![0.0; k],
            n: 0,
        }
    }

    fn push(&mut self, idx: &[MomentIndex], u: &ComplexMatrix) {
        for ((s, sq), m) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(idx) {
            let v = m.evaluate(u);
            *s += v;
            *sq += v.norm_sqr();
        }
        self.n += 1;
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.sum.iter_mut().zip(other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(other.sum_sq) {
            *a += b;
        }
        self.n += other.n;
        self
    }

    fn finish(self) -> Vec<MomentEstimate> {
        let n = self.n as f64;
        self.sum
            .into_iter()
            .zip(self.sum_sq)
            .map(|(s, sq)| {
                let mean = s / n;
                // Sum of the real- and imaginary-part sample variances.
                let var = ((sq - n * mean.norm_sqr()) / (n - 1.0)).max(0.0);
                MomentEstimate {
                    mean,
                    stderr: (var / n).sqrt(),
                    samples: self.n,
                }
            })
            .collect()
    }
}

/// Samples drawn per ChaCha stream in [`fourth_moments_mc`].
pub const MC_CHUNK: usize = 1 << 14;

/// Monte-Carlo estimates of several moments from one shared sequence of
/// Haar draws.
///
/// Draws are split into chunks of [`MC_CHUNK`]; chunk `c` uses stream
/// `rng.stream_index + c`. The result does not depend on the rayon worker count.
pub fn fourth_moments_mc(
    indices: &[MomentIndex],
    d: usize,
    samples: usize,
    rng: RngSeed,
) -> Result<Vec<MomentEstimate>> {
    if samples < 1000 {
        return Err(Error::InvalidParameter(format!(
            "need at least 1000 samples, got {samples}"
        )));
    }
    for idx in indices {
        idx.check(d)?;
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let partials: Vec<Result<MomentAccumulator>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = MC_CHUNK.min(samples - c * MC_CHUNK);
            let stream = rng.stream_index.wrapping_add(c as u32);
            let mut gen = rng.with_stream(stream).rng();
            let mut acc = MomentAccumulator::new(indices.len());
            for _ in 0..n {
                let u = sample_haar_with(d, &mut gen)?;
                acc.push(indices, u.matrix());
            }
            Ok(acc)
        })
        .collect();
    let mut total = MomentAccumulator::new(indices.len());
    for p in partials {
        total = total.merge(p?);
    }
    Ok(total.finish())
}

pub fn fourth_moment_mc(idx: &MomentIndex, d: usize, samples: usize, rng: RngSeed) -> Result<MomentEstimate> {
    Ok(fourth_moments_mc(std::slice::from_ref(idx), d, samples, rng)?[0])
}

/// Set partitions of four slots as restricted growth strings
/// (`x[0] = 0`, `x[k] <= 1 + max(x[..k])`).
fn set_partitions_of_four() -> Vec<[usize; 4]> {
    fn extend(prefix: &mut Vec<usize>, max: usize, out: &mut Vec<[usize; 4]>) {
        if prefix.len() == 4 {
            out.push([prefix[0], prefix[1], prefix[2], prefix[3]]);
            return;
        }
        for x in 0..=max + 1 {
            prefix.push(x);
            extend(prefix, max.max(x), out);
            prefix.pop();
        }
    }
    let mut out = Vec::with_capacity(15);
    extend(&mut vec![0], 0, &mut out);
    out
}

/// Every distinct equality pattern of row labels and of column labels that
/// fits in dimension `d` (at most 15 × 15 patterns).
pub fn index_class_patterns(d: usize) -> Vec<MomentIndex> {
    let parts: Vec<[usize; 4]> = set_partitions_of_four()
        .into_iter()
        .filter(|p| p.iter().max().copied().unwrap_or(0) < d)
        .collect();
    let mut out = Vec::with_capacity(parts.len() * parts.len());
    for rows in &parts {
        for cols in &parts {
            out.push(MomentIndex::from_rows_cols(*rows, *cols));
        }
    }
    out
}
