//! Dense complex matrices and the validated wrappers built on them.
//!
//! [`ComplexMatrix`] is a plain square row-major container. The newtypes
//! [`DensityMatrix`], [`HermitianEstimate`] and [`UnitaryMatrix`] check their
//! invariants on construction, so downstream code can rely on them without
//! re-validating. Reconstruction output is a [`HermitianEstimate`]: Hermitian
//! and unit trace, but allowed to have negative eigenvalues.

use std::fmt;
use std::ops::{Add, Deref, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Entrywise tolerance on `|A - A^H|` for states and estimates.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `|Tr(A) - 1|`.
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted for a physical state.
pub const PSD_TOL: f64 = 1e-12;
/// Frobenius tolerance on `U U^H - I`.
pub const UNITARY_TOL: f64 = 1e-10;
/// Asymmetry the eigensolver tolerates before refusing its input.
pub const SOLVER_HERMITIAN_TOL: f64 = 1e-8;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Square complex matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Builds a matrix from rows, rejecting ragged or non-square input.
    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Format(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(Self { dim, data })
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// Outer product `|v><v|`.
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Largest entrywise `|A_ij - conj(A_ji)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(A + A^H) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| {
            if i == j {
                C64::new(self[(i, i)].re, 0.0)
            } else {
                (self[(i, j)] + self[(j, i)].conj()) * 0.5
            }
        })
    }

    /// `||A A^H - I||_F`
    pub fn unitarity_error(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let dot: C64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| a * b.conj())
                    .sum();
                let target = if i == j { ONE } else { ZERO };
                acc += (dot - target).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// `self * v`
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim, "vector length must match matrix dimension");
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self[(i, j)])
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = self
                .row(i)
                .iter()
                .map(|v| format!("{:+.4}{:+.4}i", v.re, v.im))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let d = self.dim;
        let mut out = ComplexMatrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * d..(i + 1) * d];
                for (o, b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix sum dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix difference dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl AsRef<ComplexMatrix> for ComplexMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        self
    }
}

/// Wire form of a matrix: `{"d": int, "re": [[...]], "im": [[...]]}`, row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub d: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl TryFrom<MatrixJson> for ComplexMatrix {
    type Error = Error;

    fn try_from(json: MatrixJson) -> Result<Self> {
        let d = json.d;
        if d == 0 {
            return Err(Error::Format("matrix dimension d must be positive".into()));
        }
        for (name, part) in [("re", &json.re), ("im", &json.im)] {
            if part.len() != d {
                return Err(Error::Format(format!(
                    "field '{name}' has {} rows, expected {d}",
                    part.len()
                )));
            }
            if let Some((i, row)) = part.iter().enumerate().find(|(_, r)| r.len() != d) {
                return Err(Error::Format(format!(
                    "field '{name}' row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
        }
        let m = ComplexMatrix::from_fn(d, |i, j| C64::new(json.re[i][j], json.im[i][j]));
        if !m.is_finite() {
            return Err(Error::Format("matrix has non-finite entries".into()));
        }
        Ok(m)
    }
}

impl From<ComplexMatrix> for MatrixJson {
    fn from(m: ComplexMatrix) -> Self {
        let d = m.dim;
        Self {
            d,
            re: (0..d).map(|i| m.row(i).iter().map(|v| v.re).collect()).collect(),
            im: (0..d).map(|i| m.row(i).iter().map(|v| v.im).collect()).collect(),
        }
    }
}

/// Marker for wrappers whose matrix is Hermitian by construction.
pub trait Hermitian: AsRef<ComplexMatrix> {}

macro_rules! matrix_newtype {
    ($name:ident) => {
        impl Deref for $name {
            type Target = ComplexMatrix;

            fn deref(&self) -> &ComplexMatrix {
                &self.0
            }
        }

        impl AsRef<ComplexMatrix> for $name {
            fn as_ref(&self) -> &ComplexMatrix {
                &self.0
            }
        }

        impl From<$name> for ComplexMatrix {
            fn from(v: $name) -> ComplexMatrix {
                v.0
            }
        }

        impl TryFrom<ComplexMatrix> for $name {
            type Error = Error;

            fn try_from(m: ComplexMatrix) -> Result<Self> {
                $name::new(m)
            }
        }

        impl $name {
            pub fn matrix(&self) -> &ComplexMatrix {
                &self.0
            }

            pub fn into_inner(self) -> ComplexMatrix {
                self.0
            }
        }
    };
}

/// Physical state: Hermitian, unit trace, positive semi-definite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct DensityMatrix(ComplexMatrix);

matrix_newtype!(DensityMatrix);
impl Hermitian for DensityMatrix {}

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        check_hermitian_unit_trace(&m)?;
        let m = m.hermitian_part();
        let spectrum = spectral_decompose(&m)?;
        let min = spectrum.eigenvalues.last().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:e} in density matrix"
            )));
        }
        Ok(Self(m))
    }

    /// `|i><i|` in dimension `dim` (zero-based `i`).
    pub fn basis_state(dim: usize, i: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        if i >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {i} out of range for dimension {dim}"
            )));
        }
        let mut m = ComplexMatrix::zeros(dim);
        m[(i, i)] = ONE;
        Ok(Self(m))
    }

    /// Projector onto `psi`, normalized first.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm = psi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if psi.is_empty() || !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("state vector must be nonzero".into()));
        }
        let v: Vec<C64> = psi.iter().map(|&x| x / norm).collect();
        Ok(Self(ComplexMatrix::outer(&v).hermitian_part()))
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self(ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64)))
    }

    /// Skips the eigenvalue check; for states produced by trace- and
    /// positivity-preserving maps of an already valid state.
    pub(crate) fn from_trusted(m: ComplexMatrix) -> Self {
        Self(m.hermitian_part())
    }
}

/// Reconstruction output: Hermitian with unit trace, possibly indefinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct HermitianEstimate(ComplexMatrix);

matrix_newtype!(HermitianEstimate);
impl Hermitian for HermitianEstimate {}

impl HermitianEstimate {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        check_hermitian_unit_trace(&m)?;
        Ok(Self(m.hermitian_part()))
    }
}

impl From<DensityMatrix> for HermitianEstimate {
    fn from(rho: DensityMatrix) -> Self {
        Self(rho.0)
    }
}

fn check_hermitian_unit_trace(m: &ComplexMatrix) -> Result<()> {
    if m.dim() == 0 {
        return Err(Error::InvalidDimension(0));
    }
    if !m.is_finite() {
        return Err(Error::InvalidState("matrix has non-finite entries".into()));
    }
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let tr = m.trace();
    if (tr - ONE).norm() > TRACE_TOL {
        return Err(Error::InvalidState(format!(
            "trace {:.3e}{:+.3e}i differs from 1",
            tr.re, tr.im
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct UnitaryMatrix(ComplexMatrix);

matrix_newtype!(UnitaryMatrix);

impl UnitaryMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.dim() == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if !m.is_finite() {
            return Err(Error::NotUnitary(f64::NAN));
        }
        let err = m.unitarity_error();
        if err > UNITARY_TOL {
            return Err(Error::NotUnitary(err));
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim))
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// Product of two unitaries; unitarity is closed under multiplication.
    pub fn compose(&self, rhs: &UnitaryMatrix) -> Result<Self> {
        self.0.check_same_dim(&rhs.0)?;
        Ok(Self(&self.0 * &rhs.0))
    }

    /// `U A U^H`
    pub fn conjugate(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.0.check_same_dim(a)?;
        Ok(&(&self.0 * a) * &self.0.adjoint())
    }

    pub(crate) fn from_trusted(m: ComplexMatrix) -> Self {
        Self(m)
    }
}

/// Eigendecomposition `W diag(λ) W^H` with eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the eigenvector for `eigenvalues[k]`.
    pub eigenvectors: UnitaryMatrix,
}

impl Spectrum {
    pub fn leading(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let w = self.eigenvectors.matrix();
        let scaled = ComplexMatrix::from_fn(w.dim(), |i, j| w[(i, j)] * self.eigenvalues[j]);
        &scaled * &w.adjoint()
    }
}

/// Hermitian eigendecomposition of `m`, symmetrized as `(A + A^H)/2` first.
///
/// Eigenvalues come back descending and are never clipped. Each eigenvector
/// is rephased so that its first non-negligible component is real positive.
pub fn spectral_decompose<M: AsRef<ComplexMatrix>>(m: &M) -> Result<Spectrum> {
    let m = m.as_ref();
    if m.dim() == 0 {
        return Err(Error::InvalidDimension(0));
    }
    if !m.is_finite() {
        return Err(Error::InvalidState("matrix has non-finite entries".into()));
    }
    let dev = m.hermitian_deviation();
    if dev > SOLVER_HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let d = m.dim();
    let eig = m.hermitian_part().to_nalgebra().symmetric_eigen();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut w = ComplexMatrix::zeros(d);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let pivot = v
            .iter()
            .find(|c| c.norm() > 1e-12)
            .copied()
            .unwrap_or(ONE);
        let phase = pivot.conj() / pivot.norm();
        for i in 0..d {
            w[(i, col)] = v[i] * phase;
        }
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: UnitaryMatrix::from_trusted(w),
    })
}

/// `sqrt(sum |a_ij - b_ij|^2)`
pub fn frobenius_distance<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: AsRef<ComplexMatrix> + ?Sized,
    B: AsRef<ComplexMatrix> + ?Sized,
{
    let (a, b) = (a.as_ref(), b.as_ref());
    a.check_same_dim(b)?;
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// `Tr(rho^2)`, computed as `sum |rho_ij|^2`.
pub fn purity<H: Hermitian>(rho: &H) -> f64 {
    rho.as_ref().data.iter().map(|v| v.norm_sqr()).sum()
}

/// `Tr(A B)` for Hermitian `A`, `B`; real by construction.
pub(crate) fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let d = a.dim();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// True iff `||m m^H - I||_F <= tol`.
pub fn validate_unitary(m: &ComplexMatrix, tol: f64) -> bool {
    m.is_finite() && m.unitarity_error() <= tol
}
