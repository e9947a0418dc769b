//! Dense complex-matrix kernel.
//!
//! Matrices are small (2x2 for the single-qubit channels, up to roughly 8x8
//! for generic tests) and stored row-major in a flat `Vec`. Checked entry
//! points (`multiply`, `hs_product`, `validate_density`, ...) return
//! [`Error`]s; the arithmetic operator impls panic on dimension mismatch and
//! are meant for internal use where dimensions are already known to agree.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hermiticity and unit-trace tolerance for density matrices.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Minimum eigenvalue accepted for a positive semidefinite state.
pub const PSD_FLOOR: f64 = -1e-10;
/// Hermiticity tolerance for inputs of `hs_product` and `expm_unitary`.
pub const INPUT_HERMITIAN_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a `dim x dim` matrix from row-major entries.
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if entries.len() != dim * dim {
            return Err(Error::EntryCount {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        if let Some(k) = entries.iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFinite(k / dim, k % dim));
        }
        Ok(Self { dim, data: entries })
    }

    /// Builds a matrix whose side length is inferred from the entry count.
    pub fn from_entries(entries: Vec<Complex64>) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        Self::new(dim, entries)
    }

    pub fn from_rows<const N: usize>(rows: [[Complex64; N]; N]) -> Self {
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self { dim: N, data }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m[(k, k)] = ONE;
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (k, &d) in diag.iter().enumerate() {
            m[(k, k)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Real symmetric matrix embedded with zero imaginary part.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::EntryCount {
                    expected: dim * dim,
                    got: rows.iter().map(Vec::len).sum(),
                });
            }
            data.extend(row.iter().map(|&x| Complex64::new(x, 0.0)));
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_entries(self) -> Vec<Complex64> {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|k| self[(k, k)]).sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    /// `a * self * b`, the sandwich product used for Kraus conjugation.
    pub fn sandwich(&self, a: &Self, b: &Self) -> Self {
        &(a * self) * b
    }

    /// `[self, other] = self*other - other*self`.
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// max |M - M^dag|.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Projects onto the Hermitian part, `(M + M^dag) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let n = self.dim;
        let mut out = self.clone();
        for r in 0..n {
            out[(r, r)] = Complex64::new(self[(r, r)].re, 0.0);
            for c in (r + 1)..n {
                let z = (self[(r, c)] + self[(c, r)].conj()) * 0.5;
                out[(r, c)] = z;
                out[(c, r)] = z.conj();
            }
        }
        out
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.dim + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] += a * rhs.data[k * n + c];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// Pauli matrices and the raising/lowering operators.
pub mod pauli {
    use super::{ComplexMatrix, I, ONE, ZERO};

    pub fn identity() -> ComplexMatrix {
        ComplexMatrix::identity(2)
    }

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_rows([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn y() -> ComplexMatrix {
        ComplexMatrix::from_rows([[ZERO, -I], [I, ZERO]])
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_rows([[ONE, ZERO], [ZERO, -ONE]])
    }

    /// σ+ = (σx + iσy)/2 = |0⟩⟨1|.
    pub fn plus() -> ComplexMatrix {
        ComplexMatrix::from_rows([[ZERO, ONE], [ZERO, ZERO]])
    }

    /// σ- = (σx - iσy)/2 = |1⟩⟨0|.
    pub fn minus() -> ComplexMatrix {
        ComplexMatrix::from_rows([[ZERO, ZERO], [ONE, ZERO]])
    }

    /// σ_i for i = 0..3 with σ_0 = I.
    pub fn sigma(i: usize) -> ComplexMatrix {
        match i {
            0 => identity(),
            1 => x(),
            2 => y(),
            3 => z(),
            _ => panic!("Pauli index {i} out of range"),
        }
    }
}

/// A validated quantum state: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates with the default tolerances (`HERMITIAN_TOL`, `PSD_FLOOR`).
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        validate_with(mat, HERMITIAN_TOL, PSD_FLOOR)
    }

    /// Pure state |k⟩⟨k| of the computational basis.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut m = ComplexMatrix::zeros(dim);
        m[(k, k)] = ONE;
        Self { mat: m }
    }

    /// The maximally mixed state I/dim.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            mat: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) nonzero state vector.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        let dim = psi.len();
        let norm_sq: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if dim == 0 || norm_sq == 0.0 {
            return Err(Error::ZeroDimension);
        }
        let mut m = ComplexMatrix::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] = psi[r] * psi[c].conj() / norm_sq;
            }
        }
        Self::new(m.hermitian_part())
    }

    pub fn dim(&self) -> usize {
        self.mat.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }
}

impl AsRef<ComplexMatrix> for DensityMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.mat
    }
}

/// Checked matrix product.
pub fn multiply(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.check_dim(b)?;
    Ok(a * b)
}

pub fn adjoint(a: &ComplexMatrix) -> ComplexMatrix {
    a.adjoint()
}

pub fn trace(a: &ComplexMatrix) -> Complex64 {
    a.trace()
}

/// tr(a b) without building the product.
pub(crate) fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let n = a.dim;
    let mut acc = ZERO;
    for r in 0..n {
        for c in 0..n {
            acc += a.data[r * n + c] * b.data[c * n + r];
        }
    }
    acc
}

/// Hilbert-Schmidt product Re tr(a b) of two Hermitian matrices.
pub fn hs_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    a.check_dim(b)?;
    for m in [a, b] {
        let defect = m.hermitian_defect();
        if defect > INPUT_HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
    }
    let t = trace_of_product(a, b);
    if t.im.abs() > INPUT_HERMITIAN_TOL {
        return Err(Error::NotHermitian(t.im.abs()));
    }
    Ok(t.re)
}

/// tr ρ².
pub fn purity(rho: &DensityMatrix) -> f64 {
    trace_of_product(&rho.mat, &rho.mat).re
}

/// sin(x)/x, accurate near zero.
pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// U = exp(i s H) for Hermitian H.
///
/// 2x2 generators use the Pauli closed form
/// `exp(i s (a0 I + a·σ)) = e^{i s a0} (cos(s|a|) I + i sin(s|a|) a·σ/|a|)`;
/// larger ones go through the Hermitian eigendecomposition.
pub fn expm_unitary(h: &ComplexMatrix, s: f64) -> Result<ComplexMatrix> {
    let defect = h.hermitian_defect();
    if defect > INPUT_HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    if h.dim == 2 {
        let a0 = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
        let az = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
        let lower = 0.5 * (h[(1, 0)] + h[(0, 1)].conj());
        let (ax, ay) = (lower.re, lower.im);
        let norm = (ax * ax + ay * ay + az * az).sqrt();
        let cos = (s * norm).cos();
        // sin(s|a|)/|a|
        let sin_over = s * sinc(s * norm);
        let phase = Complex64::from_polar(1.0, s * a0);
        let u = ComplexMatrix::from_rows([
            [
                Complex64::new(cos, sin_over * az),
                I * sin_over * Complex64::new(ax, -ay),
            ],
            [
                I * sin_over * Complex64::new(ax, ay),
                Complex64::new(cos, -sin_over * az),
            ],
        ]);
        return Ok(u.scale(phase));
    }
    let (values, vectors) = hermitian_eigen(h);
    let n = h.dim;
    let mut out = ComplexMatrix::zeros(n);
    for r in 0..n {
        for c in 0..n {
            let mut acc = ZERO;
            for (k, &lam) in values.iter().enumerate() {
                acc +=
                    vectors[(r, k)] * Complex64::from_polar(1.0, s * lam) * vectors[(c, k)].conj();
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

/// ρ = (I + v·σ)/2.
pub fn bloch_to_density(v: [f64; 3]) -> Result<DensityMatrix> {
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if !norm.is_finite() || norm > 1.0 + 1e-12 {
        return Err(Error::BlochNorm(norm));
    }
    let half = |x: f64| Complex64::new(0.5 * x, 0.0);
    let mat = ComplexMatrix::from_rows([
        [half(1.0 + v[2]), Complex64::new(0.5 * v[0], -0.5 * v[1])],
        [Complex64::new(0.5 * v[0], 0.5 * v[1]), half(1.0 - v[2])],
    ]);
    Ok(DensityMatrix { mat })
}

/// Accepts `m` as a density matrix if it is Hermitian and has unit trace
/// within `tol` and no eigenvalue below `-tol`.
pub fn validate_density(m: ComplexMatrix, tol: f64) -> Result<DensityMatrix> {
    validate_with(m, tol, -tol)
}

fn validate_with(m: ComplexMatrix, tol: f64, psd_floor: f64) -> Result<DensityMatrix> {
    let defect = m.hermitian_defect();
    if defect > tol {
        return Err(Error::NotHermitian(defect));
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
        return Err(Error::InvalidTrace {
            re: tr.re,
            im: tr.im,
        });
    }
    let min_eig = hermitian_eigenvalues(&m)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if min_eig < psd_floor {
        return Err(Error::NegativeEigenvalue(min_eig));
    }
    Ok(DensityMatrix { mat: m })
}

/// Ascending eigenvalues of a Hermitian matrix. Closed form for 2x2,
/// cyclic Jacobi otherwise.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    if m.dim == 1 {
        return vec![m[(0, 0)].re];
    }
    if m.dim == 2 {
        let a = m[(0, 0)].re;
        let d = m[(1, 1)].re;
        let b = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        return vec![mean - radius, mean + radius];
    }
    hermitian_eigen(m).0
}

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Returns ascending eigenvalues and the unitary whose columns
/// are the matching eigenvectors.
pub fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = m.dim;
    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let phase = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // rotation V = diag(1, e^{-iα}) · [[c, s], [-s, c]] on (p, q)
                let vpp = Complex64::new(c, 0.0);
                let vpq = Complex64::new(s, 0.0);
                let vqp = -phase.conj() * s;
                let vqq = phase.conj() * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * vpp + akq * vqp;
                    a[(k, q)] = akp * vpq + akq * vqq;
                    let ekp = v[(k, p)];
                    let ekq = v[(k, q)];
                    v[(k, p)] = ekp * vpp + ekq * vqp;
                    v[(k, q)] = ekp * vpq + ekq * vqq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = vpp.conj() * apk + vqp.conj() * aqk;
                    a[(q, k)] = vpq.conj() * apk + vqq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&k| a[(k, k)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, col)] = v[(r, k)];
        }
    }
    (values, vectors)
}
