// Copyright 2026 trajkrotov Contributors
// SPDX-License-Identifier: Apache-2.0

//! Complex linear algebra over the model's finite Hilbert space.
//!
//! The model dimension never exceeds a few dozen, so operators are stored in
//! compressed sparse row form for fast matrix-vector products and converted
//! to dense storage (or to `nalgebra` matrices) whenever an exact dense
//! computation such as an eigendecomposition is needed.

use std::borrow::Cow;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{check_dim, Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerance used for the hermiticity flag on [`Operator`].
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A pure state (or co-state) as a vector of complex amplitudes.
///
/// Trajectory states between jumps are deliberately allowed to be
/// sub-normalized; nothing here enforces a unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        Self { amplitudes }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            amplitudes: vec![ZERO; dim],
        }
    }

    /// The computational basis vector `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut psi = Self::zeros(dim);
        psi.amplitudes[index] = ONE;
        psi
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.amplitudes.iter().all(|a| *a == ZERO)
    }

    /// `⟨self|other⟩`. Panics on a dimension mismatch.
    pub fn inner(&self, other: &StateVector) -> C64 {
        assert_eq!(self.dim(), other.dim(), "inner product of unequal dimensions");
        inner(&self.amplitudes, &other.amplitudes)
    }

    pub fn scaled(&self, factor: C64) -> StateVector {
        Self::new(self.amplitudes.iter().map(|a| a * factor).collect())
    }

    pub fn scale_mut(&mut self, factor: f64) {
        for a in &mut self.amplitudes {
            *a *= factor;
        }
    }

    /// `|ψ⟩⟨ψ|` without renormalization.
    pub fn projector(&self) -> DensityMatrix {
        let d = self.dim();
        let mut data = vec![ZERO; d * d];
        for (r, ar) in self.amplitudes.iter().enumerate() {
            for (c, ac) in self.amplitudes.iter().enumerate() {
                data[r * d + c] = ar * ac.conj();
            }
        }
        DensityMatrix { dim: d, data }
    }

    /// Largest elementwise distance to `other`.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

#[inline]
pub(crate) fn inner(bra: &[C64], ket: &[C64]) -> C64 {
    bra.iter().zip(ket).map(|(b, k)| b.conj() * k).sum()
}

/// Sparse complex square matrix in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    hermitian: bool,
}

impl Operator {
    /// Builds an operator from `(row, col, value)` triplets. Duplicate entries
    /// are summed and exact zeros dropped.
    pub fn from_triplets<T>(dim: usize, triplets: T) -> Operator
    where
        T: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut dense = vec![ZERO; dim * dim];
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            dense[r * dim + c] += v;
        }
        Self::from_dense(dim, &dense)
    }

    /// Builds an operator from a row-major dense matrix.
    pub fn from_dense(dim: usize, dense: &[C64]) -> Operator {
        assert_eq!(dense.len(), dim * dim);
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in 0..dim {
            for c in 0..dim {
                let v = dense[r * dim + c];
                if v != ZERO {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        let mut op = Operator {
            dim,
            row_ptr,
            cols,
            vals,
            hermitian: false,
        };
        op.hermitian = op.hermiticity_deviation() <= HERMITIAN_TOL;
        op
    }

    pub fn zeros(dim: usize) -> Operator {
        Self::from_triplets(dim, std::iter::empty())
    }

    pub fn identity(dim: usize) -> Operator {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, ONE)))
    }

    /// `|bra_index⟩⟨ket_index|`-style elementary matrix scaled by `value`.
    pub fn elementary(dim: usize, row: usize, col: usize, value: C64) -> Operator {
        Self::from_triplets(dim, [(row, col, value)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Iterates the stored nonzeros as `(row, col, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        (self.row_ptr[row]..self.row_ptr[row + 1])
            .find(|&k| self.cols[k] == col)
            .map_or(ZERO, |k| self.vals[k])
    }

    pub fn to_dense(&self) -> Vec<C64> {
        let mut dense = vec![ZERO; self.dim * self.dim];
        for (r, c, v) in self.iter() {
            dense[r * self.dim + c] = v;
        }
        dense
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.to_dense())
    }

    pub fn adjoint(&self) -> Operator {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scaled(&self, factor: C64) -> Operator {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (r, c, v * factor)))
    }

    /// `self + factor·other`.
    pub fn add_scaled(&self, other: &Operator, factor: C64) -> Result<Operator> {
        check_dim("operator sum", self.dim, other.dim)?;
        Ok(Self::from_triplets(
            self.dim,
            self.iter()
                .chain(other.iter().map(|(r, c, v)| (r, c, v * factor))),
        ))
    }

    /// Matrix product `self·other`.
    pub fn matmul(&self, other: &Operator) -> Result<Operator> {
        check_dim("operator product", self.dim, other.dim)?;
        let d = self.dim;
        let mut dense = vec![ZERO; d * d];
        for (r, k, a) in self.iter() {
            for j in other.row_ptr[k]..other.row_ptr[k + 1] {
                dense[r * d + other.cols[j]] += a * other.vals[j];
            }
        }
        Ok(Self::from_dense(d, &dense))
    }

    /// Largest elementwise deviation `max|A − A†|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        self.iter()
            .map(|(r, c, v)| (v - self.entry(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn one_norm(&self) -> f64 {
        let mut col_sums = vec![0.0; self.dim];
        for (_, c, v) in self.iter() {
            col_sums[c] += v.norm();
        }
        col_sums.into_iter().fold(0.0, f64::max)
    }

    /// `out = self·x`.
    #[inline]
    pub fn apply_into(&self, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }

    /// `out += factor·self·x`.
    #[inline]
    pub fn apply_add(&self, factor: C64, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o += factor * acc;
        }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        check_dim("operator application", self.dim, psi.dim())?;
        let mut out = StateVector::zeros(self.dim);
        self.apply_into(psi.amplitudes(), out.amplitudes_mut());
        Ok(out)
    }

    /// `out += factor·self·M` for a dense row-major `M`.
    #[inline]
    pub(crate) fn mul_dense_add(&self, factor: C64, m: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for r in 0..d {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let a = factor * self.vals[k];
                let src = &m[self.cols[k] * d..(self.cols[k] + 1) * d];
                let dst = &mut out[r * d..(r + 1) * d];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += a * s;
                }
            }
        }
    }

    /// `out += factor·A·M·A†` for a dense row-major `M`, with `A = self`.
    pub(crate) fn sandwich_add(&self, factor: C64, m: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for (r, k, a) in self.iter() {
            for (c, l, b) in self.iter() {
                out[r * d + c] += factor * a * m[k * d + l] * b.conj();
            }
        }
    }
}

/// A dense density matrix (or any operator-valued co-state) in row-major
/// layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    pub fn new(dim: usize, data: Vec<C64>) -> Result<Self> {
        check_dim("density matrix storage", dim * dim, data.len())?;
        Ok(Self { dim, data })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(psi: &StateVector) -> Self {
        psi.projector()
    }

    pub fn from_operator(op: &Operator) -> Self {
        Self {
            dim: op.dim(),
            data: op.to_dense(),
        }
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        let d = m.nrows();
        let mut data = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                data.push(m[(r, c)]);
            }
        }
        Self { dim: d, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for r in 0..d {
            for c in 0..d {
                out.data[c * d + r] = self.data[r * d + c].conj();
            }
        }
        out
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0_f64;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.data[r * d + c] - self.data[c * d + r].conj()).norm());
            }
        }
        worst
    }

    pub fn add_scaled(&mut self, other: &DensityMatrix, factor: C64) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    pub fn scale_mut(&mut self, factor: f64) {
        for a in &mut self.data {
            *a *= factor;
        }
    }

    /// Accumulates `weight·|ψ⟩⟨ψ|`.
    pub fn add_projector(&mut self, psi: &StateVector, weight: f64) {
        let d = self.dim;
        let amps = psi.amplitudes();
        for r in 0..d {
            let ar = amps[r] * weight;
            for c in 0..d {
                self.data[r * d + c] += ar * amps[c].conj();
            }
        }
    }

    /// `tr[A ρ]`.
    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        check_dim("density expectation", self.dim, op.dim())?;
        let d = self.dim;
        Ok(op.iter().map(|(r, c, v)| v * self.data[c * d + r]).sum())
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.to_nalgebra();
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Trace distance `½‖ρ − σ‖₁` between two Hermitian matrices.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        check_dim("trace distance", self.dim, other.dim)?;
        let mut diff = self.clone();
        diff.add_scaled(other, -ONE);
        Ok(0.5 * diff.eigenvalues().iter().map(|e| e.abs()).sum::<f64>())
    }
}

/// Anything that can enter a Hilbert-Schmidt overlap.
pub trait HsOperand {
    fn hs_dim(&self) -> usize;
    fn dense(&self) -> Cow<'_, [C64]>;
}

impl HsOperand for DensityMatrix {
    fn hs_dim(&self) -> usize {
        self.dim
    }
    fn dense(&self) -> Cow<'_, [C64]> {
        Cow::Borrowed(&self.data)
    }
}

impl HsOperand for Operator {
    fn hs_dim(&self) -> usize {
        self.dim
    }
    fn dense(&self) -> Cow<'_, [C64]> {
        Cow::Owned(self.to_dense())
    }
}

/// Hilbert-Schmidt overlap `tr[a†b]`.
pub fn hs_overlap(a: &impl HsOperand, b: &impl HsOperand) -> Result<C64> {
    check_dim("Hilbert-Schmidt overlap", a.hs_dim(), b.hs_dim())?;
    let (a, b) = (a.dense(), b.dense());
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// `⟨Ψ|A|Ψ⟩`.
pub fn expectation(op: &Operator, psi: &StateVector) -> Result<C64> {
    check_dim("expectation", op.dim(), psi.dim())?;
    let mut tmp = vec![ZERO; op.dim()];
    op.apply_into(psi.amplitudes(), &mut tmp);
    Ok(inner(psi.amplitudes(), &tmp))
}

/// Returns the unit-norm state together with the squared norm it had before.
pub fn normalize(psi: &StateVector) -> Result<(StateVector, f64)> {
    let norm_sqr = psi.norm_sqr();
    if norm_sqr <= 0.0 || !norm_sqr.is_finite() {
        return Err(Error::ZeroNorm);
    }
    let mut out = psi.clone();
    out.scale_mut(1.0 / norm_sqr.sqrt());
    Ok((out, norm_sqr))
}
