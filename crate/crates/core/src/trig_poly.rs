//! Trigonometric polynomials on the torus `R^{2n} / Z^{2n}`.
//!
//! A [`TrigPoly`] stores a finite map `(p, q) -> c_{p,q}` and represents
//!
//! ```text
//! f(x, y) = sum c_{p,q} exp(2 pi i (p.x + q.y)),    p, q in Z^n.
//! ```
//!
//! The `x` variables are the base coordinates of the fibration onto `T` and
//! the `y` variables those onto the dual torus. Grouping the terms by `p`
//! gives the fibrewise Fourier coefficients `f^_p(y)`, which is how every
//! Toeplitz matrix entry is computed.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

/// Relative threshold below which amplitudes are dropped after every operation.
pub const PRUNE_RELATIVE: f64 = 1e-14;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `exp(2 pi i t)`, with `t` reduced modulo 1 first.
pub fn unit_phase(t: f64) -> Complex64 {
    let frac = t - t.round();
    let (s, c) = (2.0 * PI * frac).sin_cos();
    Complex64::new(c, s)
}

/// `exp(2 pi i num / den)` computed from the exact residue of `num` mod `den`.
pub fn rational_phase(num: i64, den: i64) -> Complex64 {
    let r = num.rem_euclid(den);
    unit_phase(r as f64 / den as f64)
}

/// A frequency multi-index `m in Z^n`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FreqVector(Vec<i64>);

impl FreqVector {
    pub fn new(entries: Vec<i64>) -> Self {
        FreqVector(entries)
    }

    pub fn zero(n: usize) -> Self {
        FreqVector(vec![0; n])
    }

    /// The unit vector along `axis` (0-based).
    pub fn unit(n: usize, axis: usize) -> Self {
        let mut v = vec![0; n];
        v[axis] = 1;
        FreqVector(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }

    pub fn dot(&self, other: &FreqVector) -> i64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Dot product against a real vector.
    pub fn dot_real(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(&a, &b)| a as f64 * b).sum()
    }

    pub fn max_abs(&self) -> u64 {
        self.0.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn plus(&self, other: &FreqVector) -> FreqVector {
        FreqVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn minus(&self, other: &FreqVector) -> FreqVector {
        FreqVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> FreqVector {
        FreqVector(self.0.iter().map(|a| -a).collect())
    }
}

impl fmt::Debug for FreqVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<Vec<i64>> for FreqVector {
    fn from(v: Vec<i64>) -> Self {
        FreqVector(v)
    }
}

impl<const N: usize> From<[i64; N]> for FreqVector {
    fn from(v: [i64; N]) -> Self {
        FreqVector(v.to_vec())
    }
}

/// Key of one Fourier mode `exp(2 pi i (p.x + q.y))`. Ordered lexicographically on `(p, q)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Mode {
    pub p: FreqVector,
    pub q: FreqVector,
}

impl Mode {
    pub fn new(p: FreqVector, q: FreqVector) -> Self {
        Mode { p, q }
    }
}

/// Serialized form of one coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermRecord {
    pub p: Vec<i64>,
    pub q: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, PartialEq)]
pub struct TrigPoly {
    n: usize,
    coeffs: BTreeMap<Mode, Complex64>,
}

/// The `m`-th fibrewise Fourier coefficient `f^_m(y) = sum_q c_{m,q} exp(2 pi i q.y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FibrewiseCoefficient {
    pub m: FreqVector,
    pub profile: BTreeMap<FreqVector, Complex64>,
}

impl FibrewiseCoefficient {
    pub fn is_empty(&self) -> bool {
        self.profile.is_empty()
    }

    pub fn evaluate(&self, y: &[f64]) -> Complex64 {
        self.profile
            .iter()
            .map(|(q, c)| c * unit_phase(q.dot_real(y)))
            .sum()
    }

    /// Evaluates at the lattice point `y = m / k` using exact integer phases.
    pub fn evaluate_at_lattice(&self, m: &[i64], k: i64) -> Complex64 {
        self.profile
            .iter()
            .map(|(q, c)| {
                let num: i64 = q.as_slice().iter().zip(m).map(|(a, b)| a * b).sum();
                c * rational_phase(num, k)
            })
            .sum()
    }

    /// Sup of `|f^_m(y)|` bounded by the coefficient l1 norm.
    pub fn l1_norm(&self) -> f64 {
        self.profile.values().fold(0.0, |acc, c| acc + c.norm())
    }
}

impl TrigPoly {
    pub fn zero(n: usize) -> Self {
        assert!(n >= 1, "dimension must be at least 1");
        TrigPoly {
            n,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: Complex64) -> Self {
        let mut t = TrigPoly::zero(n);
        t.coeffs
            .insert(Mode::new(FreqVector::zero(n), FreqVector::zero(n)), c);
        t.pruned()
    }

    pub fn one(n: usize) -> Self {
        TrigPoly::constant(n, Complex64::new(1.0, 0.0))
    }

    pub fn monomial(p: FreqVector, q: FreqVector, c: Complex64) -> Result<Self> {
        ensure_dim(p.len(), q.len())?;
        let n = p.len();
        if n == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        let mut t = TrigPoly::zero(n);
        t.coeffs.insert(Mode::new(p, q), c);
        Ok(t.pruned())
    }

    /// `exp(2 pi i x_axis)`, axis 0-based.
    pub fn exp_x(n: usize, axis: usize) -> Self {
        TrigPoly::monomial(
            FreqVector::unit(n, axis),
            FreqVector::zero(n),
            Complex64::new(1.0, 0.0),
        )
        .expect("valid monomial")
    }

    /// `exp(2 pi i y_axis)`, axis 0-based.
    pub fn exp_y(n: usize, axis: usize) -> Self {
        TrigPoly::monomial(
            FreqVector::zero(n),
            FreqVector::unit(n, axis),
            Complex64::new(1.0, 0.0),
        )
        .expect("valid monomial")
    }

    /// Builds a polynomial from `(p, q, c)` triples, summing repeated modes.
    pub fn from_terms<It>(n: usize, terms: It) -> Result<Self>
    where
        It: IntoIterator<Item = (FreqVector, FreqVector, Complex64)>,
    {
        let mut t = TrigPoly::zero(n);
        for (p, q, c) in terms {
            ensure_dim(n, p.len())?;
            ensure_dim(n, q.len())?;
            *t.coeffs.entry(Mode::new(p, q)).or_default() += c;
        }
        Ok(t.pruned())
    }

    pub fn from_records(n: usize, records: &[TermRecord]) -> Result<Self> {
        TrigPoly::from_terms(
            n,
            records.iter().map(|r| {
                (
                    FreqVector::new(r.p.clone()),
                    FreqVector::new(r.q.clone()),
                    Complex64::new(r.re, r.im),
                )
            }),
        )
    }

    pub fn to_records(&self) -> Vec<TermRecord> {
        self.coeffs
            .iter()
            .map(|(mode, c)| TermRecord {
                p: mode.p.as_slice().to_vec(),
                q: mode.q.as_slice().to_vec(),
                re: c.re,
                im: c.im,
            })
            .collect()
    }

    fn pruned(mut self) -> Self {
        let max = self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max);
        let threshold = PRUNE_RELATIVE * max;
        self.coeffs.retain(|_, c| {
            let a = c.norm();
            a > 0.0 && a >= threshold
        });
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored modes.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mode, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn coefficient(&self, p: &FreqVector, q: &FreqVector) -> Complex64 {
        self.coeffs
            .get(&Mode::new(p.clone(), q.clone()))
            .copied()
            .unwrap_or_default()
    }

    /// `c_{0,0}`, the mean of `f` over the torus.
    pub fn constant_term(&self) -> Complex64 {
        let z = FreqVector::zero(self.n);
        self.coefficient(&z, &z)
    }

    pub fn bandwidth(&self) -> u64 {
        self.x_bandwidth().max(self.y_bandwidth())
    }

    pub fn x_bandwidth(&self) -> u64 {
        self.coeffs.keys().map(|m| m.p.max_abs()).max().unwrap_or(0)
    }

    pub fn y_bandwidth(&self) -> u64 {
        self.coeffs.keys().map(|m| m.q.max_abs()).max().unwrap_or(0)
    }

    /// `sum |c_{p,q}|`, an upper bound for `sup |f|`.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().fold(0.0, |acc, c| acc + c.norm())
    }

    pub fn depends_on_x(&self) -> bool {
        self.coeffs.keys().any(|m| !m.p.is_zero())
    }

    pub fn depends_on_y(&self) -> bool {
        self.coeffs.keys().any(|m| !m.q.is_zero())
    }

    fn check_same_dim(&self, other: &TrigPoly) -> Result<()> {
        ensure_dim(self.n, other.n)
    }

    pub fn add(&self, other: &TrigPoly) -> Result<TrigPoly> {
        self.check_same_dim(other)?;
        let mut out = self.clone();
        for (mode, c) in &other.coeffs {
            *out.coeffs.entry(mode.clone()).or_default() += c;
        }
        Ok(out.pruned())
    }

    pub fn sub(&self, other: &TrigPoly) -> Result<TrigPoly> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> TrigPoly {
        self.map_terms(|_, c| c * s)
    }

    /// Replaces every coefficient by `f(mode, c)`.
    pub fn map_terms<F>(&self, mut f: F) -> TrigPoly
    where
        F: FnMut(&Mode, Complex64) -> Complex64,
    {
        TrigPoly {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .map(|(mode, &c)| (mode.clone(), f(mode, c)))
                .collect(),
        }
        .pruned()
    }

    /// Pointwise product, i.e. convolution of the coefficient maps.
    pub fn multiply(&self, other: &TrigPoly) -> Result<TrigPoly> {
        self.check_same_dim(other)?;
        let mut out = TrigPoly::zero(self.n);
        for (ma, ca) in &self.coeffs {
            for (mb, cb) in &other.coeffs {
                let key = Mode::new(ma.p.plus(&mb.p), ma.q.plus(&mb.q));
                *out.coeffs.entry(key).or_default() += ca * cb;
            }
        }
        Ok(out.pruned())
    }

    /// Applies `d^{|ix|} / dx^{ix}` and `d^{|iy|} / dy^{iy}`.
    pub fn differentiate(&self, ix: &[usize], iy: &[usize]) -> Result<TrigPoly> {
        ensure_dim(self.n, ix.len())?;
        ensure_dim(self.n, iy.len())?;
        let order: usize = ix.iter().chain(iy).sum();
        if order == 0 {
            return Ok(self.clone());
        }
        let two_pi_i_pow = (I * 2.0 * PI).powi(order as i32);
        Ok(self.map_terms(|mode, c| {
            let mut factor = 1.0;
            for (i, &e) in ix.iter().enumerate() {
                factor *= (mode.p.as_slice()[i] as f64).powi(e as i32);
            }
            for (i, &e) in iy.iter().enumerate() {
                factor *= (mode.q.as_slice()[i] as f64).powi(e as i32);
            }
            c * two_pi_i_pow * factor
        }))
    }

    /// First derivative along `x_axis` (0-based).
    pub fn d_x(&self, axis: usize) -> TrigPoly {
        let mut ix = vec![0; self.n];
        ix[axis] = 1;
        self.differentiate(&ix, &vec![0; self.n])
            .expect("dimensions match")
    }

    /// First derivative along `y_axis` (0-based).
    pub fn d_y(&self, axis: usize) -> TrigPoly {
        let mut iy = vec![0; self.n];
        iy[axis] = 1;
        self.differentiate(&vec![0; self.n], &iy)
            .expect("dimensions match")
    }

    pub fn fibrewise_coefficient(&self, m: &FreqVector) -> FibrewiseCoefficient {
        let profile = self
            .coeffs
            .iter()
            .filter(|(mode, _)| &mode.p == m)
            .map(|(mode, &c)| (mode.q.clone(), c))
            .collect();
        FibrewiseCoefficient {
            m: m.clone(),
            profile,
        }
    }

    /// All non-empty fibrewise coefficients, in increasing order of `m`.
    pub fn fibrewise_decomposition(&self) -> Vec<FibrewiseCoefficient> {
        let mut out: Vec<FibrewiseCoefficient> = Vec::new();
        for (mode, &c) in &self.coeffs {
            match out.last_mut() {
                Some(last) if last.m == mode.p => {
                    last.profile.insert(mode.q.clone(), c);
                }
                _ => {
                    let mut profile = BTreeMap::new();
                    profile.insert(mode.q.clone(), c);
                    out.push(FibrewiseCoefficient {
                        m: mode.p.clone(),
                        profile,
                    });
                }
            }
        }
        out
    }

    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<Complex64> {
        ensure_dim(self.n, x.len())?;
        ensure_dim(self.n, y.len())?;
        Ok(self
            .coeffs
            .iter()
            .map(|(mode, c)| c * unit_phase(mode.p.dot_real(x) + mode.q.dot_real(y)))
            .sum())
    }

    /// `{f, g} = sum_i (df/dx_i dg/dy_i - df/dy_i dg/dx_i)`.
    pub fn poisson_bracket(&self, other: &TrigPoly) -> Result<TrigPoly> {
        self.check_same_dim(other)?;
        let mut out = TrigPoly::zero(self.n);
        for i in 0..self.n {
            let a = self.d_x(i).multiply(&other.d_y(i))?;
            let b = self.d_y(i).multiply(&other.d_x(i))?;
            out = out.add(&a)?.sub(&b)?;
        }
        Ok(out)
    }

    /// Coefficientwise l1 distance.
    pub fn distance_l1(&self, other: &TrigPoly) -> Result<f64> {
        self.check_same_dim(other)?;
        let mut total = 0.0;
        for (mode, c) in &self.coeffs {
            let d = other.coeffs.get(mode).copied().unwrap_or_default();
            total += (c - d).norm();
        }
        for (mode, d) in &other.coeffs {
            if !self.coeffs.contains_key(mode) {
                total += d.norm();
            }
        }
        Ok(total)
    }

    /// Equality up to `tol` in the coefficient l1 norm; false on dimension mismatch.
    pub fn approx_eq(&self, other: &TrigPoly, tol: f64) -> bool {
        self.distance_l1(other).map(|d| d <= tol).unwrap_or(false)
    }

    pub fn conj(&self) -> TrigPoly {
        TrigPoly {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .map(|(m, c)| (Mode::new(m.p.neg(), m.q.neg()), c.conj()))
                .collect(),
        }
    }
}

impl fmt::Debug for TrigPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TrigPoly(n={}) {{", self.n)?;
        for (i, (mode, c)) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, " {:?},{:?}: {}", mode.p, mode.q, c)?;
        }
        write!(f, " }}")
    }
}
