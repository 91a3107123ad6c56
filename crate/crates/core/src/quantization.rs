//! Toeplitz operators on the Bohr–Sommerfeld bases.
//!
//! The quantum Hilbert space at level `k` has the orthonormal basis
//! `sigma^[m]`, `[m] in Z_k^n`. For the polarization pair whose basis is
//! `sigma` ([`Polarization::PT`]) the Toeplitz operator of `f` acts by
//!
//! ```text
//! (Q_f s)_[m] = sum_{m' in Z^n} f^_{m - m'}(hbar m') s_[m'],
//! ```
//!
//! and for the opposite pair ([`Polarization::PTCheck`]) the fibrewise
//! coefficient is evaluated at `hbar m` instead. Because `f^_r` is 1-periodic,
//! entry `([m], [m'])` is the finite sum of `f^_r` over the representatives
//! `r = m - m' (mod k)` in the x-support of `f`.
//!
//! States are flattened row-major: `index(m) = sum_i m_i k^{n-i}`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::trig_poly::{FibrewiseCoefficient, TrigPoly};

/// Largest `k^n` for which dense matrices are built.
pub const MAX_DENSE_DIM: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    /// Basis `sigma^m`; Toeplitz operators evaluate at the column index.
    #[serde(rename = "P_T")]
    PT,
    /// Basis `sigma-check^m`; Toeplitz operators evaluate at the row index.
    #[serde(rename = "P_Tcheck")]
    PTCheck,
}

impl Polarization {
    pub fn name(self) -> &'static str {
        match self {
            Polarization::PT => "P_T",
            Polarization::PTCheck => "P_Tcheck",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HilbertSpec {
    n: usize,
    k: usize,
    polarization: Polarization,
}

impl HilbertSpec {
    pub fn new(n: usize, k: usize, polarization: Polarization) -> Result<Self> {
        if n == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if k == 0 {
            return Err(Error::InvalidLevel);
        }
        Ok(HilbertSpec { n, k, polarization })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn hbar(&self) -> f64 {
        1.0 / self.k as f64
    }

    pub fn polarization(&self) -> Polarization {
        self.polarization
    }

    pub fn with_polarization(&self, polarization: Polarization) -> Self {
        HilbertSpec {
            polarization,
            ..*self
        }
    }

    /// `k^n`, saturating on overflow.
    pub fn dim(&self) -> usize {
        (0..self.n).fold(1usize, |acc, _| acc.saturating_mul(self.k))
    }

    /// Flat index of the residue class of `m` (entries may be any integers).
    pub fn index(&self, m: &[i64]) -> usize {
        let k = self.k as i64;
        m.iter()
            .fold(0usize, |acc, &v| acc * self.k + v.rem_euclid(k) as usize)
    }

    /// Canonical representative in `{0..k-1}^n` of the flat index.
    pub fn residues(&self, index: usize) -> Vec<i64> {
        let mut out = vec![0i64; self.n];
        let mut rest = index;
        for slot in out.iter_mut().rev() {
            *slot = (rest % self.k) as i64;
            rest /= self.k;
        }
        out
    }

    fn check_dense(&self) -> Result<usize> {
        let dim = self.dim();
        if dim > MAX_DENSE_DIM {
            Err(Error::TooLarge {
                dim,
                cap: MAX_DENSE_DIM,
            })
        } else {
            Ok(dim)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    spec: HilbertSpec,
    amplitudes: DVector<Complex64>,
}

impl QuantumState {
    pub fn new(spec: HilbertSpec, amplitudes: DVector<Complex64>) -> Result<Self> {
        ensure_dim(spec.dim(), amplitudes.len())?;
        Ok(QuantumState { spec, amplitudes })
    }

    /// The basis vector `sigma^[m]`.
    pub fn basis(spec: HilbertSpec, m: &[i64]) -> Result<Self> {
        ensure_dim(spec.n(), m.len())?;
        let mut amplitudes = DVector::zeros(spec.dim());
        amplitudes[spec.index(m)] = Complex64::new(1.0, 0.0);
        Ok(QuantumState { spec, amplitudes })
    }

    pub fn spec(&self) -> &HilbertSpec {
        &self.spec
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumOperator {
    spec: HilbertSpec,
    matrix: DMatrix<Complex64>,
}

impl QuantumOperator {
    pub fn new(spec: HilbertSpec, matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = spec.dim();
        ensure_dim(dim, matrix.nrows())?;
        ensure_dim(dim, matrix.ncols())?;
        Ok(QuantumOperator { spec, matrix })
    }

    pub fn identity(spec: HilbertSpec) -> Result<Self> {
        let dim = spec.check_dense()?;
        Ok(QuantumOperator {
            spec,
            matrix: DMatrix::identity(dim, dim),
        })
    }

    pub fn spec(&self) -> &HilbertSpec {
        &self.spec
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn check_compatible(&self, other: &QuantumOperator) -> Result<()> {
        if self.spec.polarization != other.spec.polarization {
            return Err(Error::WrongPolarization {
                expected: self.spec.polarization.name(),
                found: other.spec.polarization.name(),
            });
        }
        ensure_dim(self.dim(), other.dim())
    }

    pub fn compose(&self, other: &QuantumOperator) -> Result<QuantumOperator> {
        self.check_compatible(other)?;
        Ok(QuantumOperator {
            spec: self.spec,
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn sub(&self, other: &QuantumOperator) -> Result<QuantumOperator> {
        self.check_compatible(other)?;
        Ok(QuantumOperator {
            spec: self.spec,
            matrix: &self.matrix - &other.matrix,
        })
    }

    pub fn scale(&self, s: Complex64) -> QuantumOperator {
        QuantumOperator {
            spec: self.spec,
            matrix: &self.matrix * s,
        }
    }

    pub fn adjoint(&self) -> QuantumOperator {
        QuantumOperator {
            spec: self.spec,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn apply(&self, s: &QuantumState) -> Result<QuantumState> {
        ensure_dim(self.dim(), s.amplitudes.len())?;
        Ok(QuantumState {
            spec: self.spec,
            amplitudes: &self.matrix * &s.amplitudes,
        })
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &QuantumOperator) -> Result<f64> {
        ensure_dim(self.dim(), other.dim())?;
        Ok(self
            .matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Nonzero entries as `row,col,re,im` lines in lexicographic `(row, col)` order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,re,im\n");
        let dim = self.dim();
        for r in 0..dim {
            for c in 0..dim {
                let v = self.matrix[(r, c)];
                if v.re != 0.0 || v.im != 0.0 {
                    writeln!(out, "{},{},{},{}", r, c, v.re, v.im).expect("string write");
                }
            }
        }
        out
    }
}

fn evaluation_point<'a>(spec: &HilbertSpec, row: &'a [i64], col: &'a [i64]) -> &'a [i64] {
    match spec.polarization {
        Polarization::PT => col,
        Polarization::PTCheck => row,
    }
}

fn shifted_row(spec: &HilbertSpec, col: &[i64], fc: &FibrewiseCoefficient) -> Vec<i64> {
    let k = spec.k as i64;
    col.iter()
        .zip(fc.m.as_slice())
        .map(|(a, b)| (a + b).rem_euclid(k))
        .collect()
}

/// Dense Toeplitz matrix of `f` on the space described by `spec`.
pub fn assemble_toeplitz(f: &TrigPoly, spec: HilbertSpec) -> Result<QuantumOperator> {
    ensure_dim(spec.n, f.dim())?;
    let dim = spec.check_dense()?;
    let fibres = f.fibrewise_decomposition();
    let k = spec.k as i64;
    let mut matrix = DMatrix::<Complex64>::zeros(dim, dim);
    // column-major storage: each chunk is one column [m']
    matrix
        .as_mut_slice()
        .par_chunks_mut(dim)
        .enumerate()
        .for_each(|(col_index, column)| {
            let col = spec.residues(col_index);
            for fc in &fibres {
                let row = shifted_row(&spec, &col, fc);
                let at = evaluation_point(&spec, &row, &col);
                column[spec.index(&row)] += fc.evaluate_at_lattice(at, k);
            }
        });
    Ok(QuantumOperator { spec, matrix })
}

/// Matrix-free `Q_f s`, cost `O(k^n supp(f))`.
pub fn apply_toeplitz(f: &TrigPoly, s: &QuantumState) -> Result<QuantumState> {
    let spec = s.spec;
    ensure_dim(spec.n, f.dim())?;
    let fibres = f.fibrewise_decomposition();
    let k = spec.k as i64;
    let mut out = DVector::<Complex64>::zeros(spec.dim());
    for (col_index, amp) in s.amplitudes.iter().enumerate() {
        if *amp == Complex64::default() {
            continue;
        }
        let col = spec.residues(col_index);
        for fc in &fibres {
            let row = shifted_row(&spec, &col, fc);
            let at = evaluation_point(&spec, &row, &col);
            out[spec.index(&row)] += fc.evaluate_at_lattice(at, k) * amp;
        }
    }
    Ok(QuantumState {
        spec,
        amplitudes: out,
    })
}

/// `tr Q_f` without building the matrix: only `r = 0 (mod k)` reaches the diagonal.
pub fn toeplitz_trace(f: &TrigPoly, spec: HilbertSpec) -> Result<Complex64> {
    ensure_dim(spec.n, f.dim())?;
    let k = spec.k as i64;
    let diagonal: Vec<FibrewiseCoefficient> = f
        .fibrewise_decomposition()
        .into_iter()
        .filter(|fc| fc.m.as_slice().iter().all(|v| v.rem_euclid(k) == 0))
        .collect();
    let mut total = Complex64::default();
    for index in 0..spec.dim() {
        let m = spec.residues(index);
        for fc in &diagonal {
            total += fc.evaluate_at_lattice(&m, k);
        }
    }
    Ok(total)
}

/// Conjugation by the pairing map `sigma-check^m -> sigma^m`. The basis vectors
/// correspond index by index, so only the space tag changes.
pub fn intertwine_fgq(a: &QuantumOperator) -> Result<QuantumOperator> {
    if a.spec.polarization != Polarization::PTCheck {
        return Err(Error::WrongPolarization {
            expected: Polarization::PTCheck.name(),
            found: a.spec.polarization.name(),
        });
    }
    Ok(QuantumOperator {
        spec: a.spec.with_polarization(Polarization::PT),
        matrix: a.matrix.clone(),
    })
}

/// `(U_i, V_i)`: the Toeplitz operators of `exp(2 pi i x_i)` and `exp(2 pi i y_i)`. Axis is 1-based.
pub fn quantum_torus_generators(
    spec: HilbertSpec,
    axis: usize,
) -> Result<(QuantumOperator, QuantumOperator)> {
    if axis == 0 || axis > spec.n {
        return Err(Error::AxisOutOfRange { axis, n: spec.n });
    }
    let u = assemble_toeplitz(&TrigPoly::exp_x(spec.n, axis - 1), spec)?;
    let v = assemble_toeplitz(&TrigPoly::exp_y(spec.n, axis - 1), spec)?;
    Ok((u, v))
}

pub fn operator_trace(a: &QuantumOperator) -> Complex64 {
    a.matrix.trace()
}
