//! Deformation quantization on the torus.
//!
//! Three star products are provided, all of the form `Mult . exp(hbar alpha)`
//! for a constant bivector
//!
//! ```text
//! alpha = xy * sum_i d/dx_i (x) d/dy_i  +  yx * sum_i d/dy_i (x) d/dx_i
//! ```
//!
//! * [`Orientation::Star`]: `xy = 0`, `yx = 1 / (2 pi i)`; `f * g = fg` when `f`
//!   is constant along the fibres in `y` or `g` along those in `x`.
//! * [`Orientation::CheckStar`]: `xy = i / (2 pi)`, `yx = 0`; the opposite product.
//! * [`Orientation::Moyal`]: `xy = i / (4 pi)`, `yx = -i / (4 pi)`.
//!
//! [`bidiff`] evaluates the order-`k` term by differentiating, [`star_exact`]
//! sums the whole series on each pair of monomials in closed form.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::trig_poly::{rational_phase, FreqVector, TrigPoly};

/// Largest truncation order accepted anywhere in the crate.
pub const MAX_ORDER: usize = 16;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Star,
    CheckStar,
    Moyal,
}

impl Orientation {
    pub const ALL: [Orientation; 3] = [Orientation::Star, Orientation::CheckStar, Orientation::Moyal];

    /// Coefficients `(xy, yx)` of the defining bivector.
    pub fn bivector(self) -> (Complex64, Complex64) {
        match self {
            Orientation::Star => (ZERO, 1.0 / (2.0 * PI * I)),
            Orientation::CheckStar => (I / (2.0 * PI), ZERO),
            Orientation::Moyal => (I / (4.0 * PI), -I / (4.0 * PI)),
        }
    }

    /// The bivector as a `2n x 2n` tensor over the coordinates `(x_1..x_n, y_1..y_n)`.
    pub fn tensor(self, n: usize) -> DMatrix<Complex64> {
        let (xy, yx) = self.bivector();
        let mut t = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            t[(i, n + i)] = xy;
            t[(n + i, i)] = yx;
        }
        t
    }

    /// Phase of the closed-form product of `exp 2 pi i (p.x + a.y)` and
    /// `exp 2 pi i (q.x + b.y)`: returns `(num, den_factor)` with the factor
    /// equal to `exp(2 pi i num / (den_factor k))` at `hbar = 1 / k`.
    fn phase_numerator(self, p: &FreqVector, a: &FreqVector, q: &FreqVector, b: &FreqVector) -> (i64, i64) {
        match self {
            Orientation::Star => (a.dot(q), 1),
            Orientation::CheckStar => (-b.dot(p), 1),
            Orientation::Moyal => (a.dot(q) - b.dot(p), 2),
        }
    }
}

/// `hbar = 1 / k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HbarValue {
    k: u64,
}

impl HbarValue {
    pub fn new(k: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidLevel);
        }
        Ok(HbarValue { k })
    }

    pub fn k(self) -> u64 {
        self.k
    }

    pub fn hbar(self) -> f64 {
        1.0 / self.k as f64
    }
}

/// A polynomial `sum_{i <= N} hbar^i f_i` with trigonometric-polynomial coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct FormalSeries {
    n: usize,
    coeffs: Vec<TrigPoly>,
}

impl FormalSeries {
    pub fn new(coeffs: Vec<TrigPoly>) -> Result<Self> {
        let n = coeffs
            .first()
            .map(TrigPoly::dim)
            .ok_or(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            })?;
        for c in &coeffs {
            ensure_dim(n, c.dim())?;
        }
        Ok(FormalSeries { n, coeffs })
    }

    /// The constant series `f` padded with zeros up to `order`.
    pub fn constant(f: &TrigPoly, order: usize) -> Self {
        let mut coeffs = vec![f.clone()];
        coeffs.resize(order + 1, TrigPoly::zero(f.dim()));
        FormalSeries { n: f.dim(), coeffs }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficient(&self, i: usize) -> &TrigPoly {
        &self.coeffs[i]
    }

    pub fn coefficients(&self) -> &[TrigPoly] {
        &self.coeffs
    }

    /// Substitutes a numerical value of `hbar`.
    pub fn evaluate(&self, hbar: f64) -> TrigPoly {
        let mut out = TrigPoly::zero(self.n);
        let mut power = 1.0;
        for c in &self.coeffs {
            out = out
                .add(&c.scale(Complex64::new(power, 0.0)))
                .expect("coefficients share a dimension");
            power *= hbar;
        }
        out
    }

    /// Largest coefficientwise l1 distance over the orders both series share.
    pub fn distance_l1(&self, other: &FormalSeries) -> Result<f64> {
        ensure_dim(self.n, other.n)?;
        let len = self.coeffs.len().max(other.coeffs.len());
        let zero = TrigPoly::zero(self.n);
        let mut worst: f64 = 0.0;
        for i in 0..len {
            let a = self.coeffs.get(i).unwrap_or(&zero);
            let b = other.coeffs.get(i).unwrap_or(&zero);
            worst = worst.max(a.distance_l1(b)?);
        }
        Ok(worst)
    }

    /// `self * other` truncated at `order`, with `*` extended `C[[hbar]]`-bilinearly.
    pub fn star(&self, other: &FormalSeries, o: Orientation, order: usize) -> Result<FormalSeries> {
        ensure_dim(self.n, other.n)?;
        check_order(order)?;
        let mut coeffs = vec![TrigPoly::zero(self.n); order + 1];
        for (i, fi) in self.coeffs.iter().enumerate().take(order + 1) {
            for (j, gj) in other.coeffs.iter().enumerate().take(order + 1 - i) {
                for l in 0..=(order - i - j) {
                    coeffs[i + j + l] = coeffs[i + j + l].add(&bidiff(l, fi, gj, o)?)?;
                }
            }
        }
        FormalSeries::new(coeffs)
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        Err(Error::OrderTooLarge {
            order,
            cap: MAX_ORDER,
        })
    } else {
        Ok(())
    }
}

/// All multi-indices in `N^n` with entries summing to `total`.
pub(crate) fn multi_indices(n: usize, total: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, total: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == n {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=total {
            prefix.push(first);
            rec(n, total - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(n, total, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

fn multi_factorial(index: &[usize]) -> f64 {
    index
        .iter()
        .map(|&e| (1..=e).map(|v| v as f64).product::<f64>())
        .product()
}

/// The order-`order` bidifferential term of the chosen star product.
///
/// Evaluated from the multinomial expansion of `alpha^k / k!`:
/// `sum_{|A|+|B|=k} xy^|A| yx^|B| / (A! B!) (d_x^A d_y^B f)(d_y^A d_x^B g)`.
pub fn bidiff(order: usize, f: &TrigPoly, g: &TrigPoly, o: Orientation) -> Result<TrigPoly> {
    ensure_dim(f.dim(), g.dim())?;
    check_order(order)?;
    let n = f.dim();
    if order == 0 {
        return f.multiply(g);
    }
    let (xy, yx) = o.bivector();
    let mut out = TrigPoly::zero(n);
    for a_total in 0..=order {
        let b_total = order - a_total;
        if (a_total > 0 && xy == ZERO) || (b_total > 0 && yx == ZERO) {
            continue;
        }
        let weight = xy.powi(a_total as i32) * yx.powi(b_total as i32);
        for a in multi_indices(n, a_total) {
            for b in multi_indices(n, b_total) {
                let fd = f.differentiate(&a, &b)?;
                if fd.is_zero() {
                    continue;
                }
                let gd = g.differentiate(&b, &a)?;
                let scale = weight / (multi_factorial(&a) * multi_factorial(&b));
                out = out.add(&fd.multiply(&gd)?.scale(scale))?;
            }
        }
    }
    Ok(out)
}

/// `[bidiff(0, f, g), ..., bidiff(order, f, g)]`.
pub fn star_truncated(f: &TrigPoly, g: &TrigPoly, order: usize, o: Orientation) -> Result<FormalSeries> {
    ensure_dim(f.dim(), g.dim())?;
    check_order(order)?;
    let coeffs = (0..=order)
        .map(|i| bidiff(i, f, g, o))
        .collect::<Result<Vec<_>>>()?;
    FormalSeries::new(coeffs)
}

/// The full series summed at `hbar = 1/k`, monomial pair by monomial pair.
pub fn star_exact(f: &TrigPoly, g: &TrigPoly, h: HbarValue, o: Orientation) -> Result<TrigPoly> {
    ensure_dim(f.dim(), g.dim())?;
    let k = h.k() as i64;
    let terms = f.terms().flat_map(|(mf, cf)| {
        g.terms().map(move |(mg, cg)| {
            let (num, den) = o.phase_numerator(&mf.p, &mf.q, &mg.p, &mg.q);
            (
                mf.p.plus(&mg.p),
                mf.q.plus(&mg.q),
                cf * cg * rational_phase(num, den * k),
            )
        })
    });
    TrigPoly::from_terms(f.dim(), terms)
}

/// `Delta = (i / 2 pi) sum_i d^2 / dx_i dy_i`.
pub fn laplacian(f: &TrigPoly) -> TrigPoly {
    let n = f.dim();
    let mut out = TrigPoly::zero(n);
    for i in 0..n {
        out = out.add(&f.d_x(i).d_y(i)).expect("same dimension");
    }
    out.scale(I / (2.0 * PI))
}

/// `sum_{i <= order} hbar^i (sign Delta)^i f / i!`, i.e. `exp(sign hbar Delta)` truncated.
pub fn heat_flow_truncated(f: &TrigPoly, sign: f64, order: usize) -> Result<FormalSeries> {
    check_order(order)?;
    let mut coeffs = Vec::with_capacity(order + 1);
    let mut current = f.clone();
    for i in 0..=order {
        if i > 0 {
            current = laplacian(&current).scale(Complex64::new(sign / i as f64, 0.0));
        }
        coeffs.push(current.clone());
    }
    FormalSeries::new(coeffs)
}

/// `exp(sign hbar Delta) f`: the monomial `exp 2 pi i (p.x + a.y)` is scaled by
/// `exp(-sign 2 pi i hbar p.a)`.
pub fn heat_flow_exact(f: &TrigPoly, sign: i64, h: HbarValue) -> TrigPoly {
    let k = h.k() as i64;
    f.map_terms(|mode, c| c * rational_phase(-sign * mode.p.dot(&mode.q), k))
}

/// Truncated formal Berezin transform `F_N = sum_{i <= N} (-hbar Delta)^i / i!`.
pub fn berezin_transform(f: &TrigPoly, order: usize) -> Result<FormalSeries> {
    heat_flow_truncated(f, -1.0, order)
}

/// `exp(-hbar Delta) f` at `hbar = 1/k`: monomials scaled by `exp(2 pi i hbar p.a)`.
pub fn berezin_transform_exact(f: &TrigPoly, h: HbarValue) -> TrigPoly {
    heat_flow_exact(f, -1, h)
}

/// A symmetric constant 2-tensor on the `2n` coordinates `(x_1..x_n, y_1..y_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricTensor {
    n: usize,
    entries: DMatrix<Complex64>,
}

impl SymmetricTensor {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        let size = entries.nrows();
        ensure_dim(size, entries.ncols())?;
        if size == 0 || size % 2 != 0 {
            return Err(Error::DimensionMismatch {
                expected: size + size % 2,
                found: size,
            });
        }
        for r in 0..size {
            for c in (r + 1)..size {
                if (entries[(r, c)] - entries[(c, r)]).norm() > 1e-14 * (1.0 + entries[(r, c)].norm()) {
                    return Err(Error::NonSymmetric { row: r, col: c });
                }
            }
        }
        Ok(SymmetricTensor { n: size / 2, entries })
    }

    /// `beta - alpha` for the bivectors of two orientations.
    pub fn between(from: Orientation, to: Orientation, n: usize) -> Result<Self> {
        SymmetricTensor::new(to.tensor(n) - from.tensor(n))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `d_gamma f = sum_{ij} gamma^{ij} d^2 f / du_i du_j`.
    pub fn apply(&self, f: &TrigPoly) -> Result<TrigPoly> {
        ensure_dim(self.n, f.dim())?;
        let n = self.n;
        let mut out = TrigPoly::zero(n);
        for r in 0..2 * n {
            for c in 0..2 * n {
                let g = self.entries[(r, c)];
                if g == ZERO {
                    continue;
                }
                let mut ix = vec![0; n];
                let mut iy = vec![0; n];
                for u in [r, c] {
                    if u < n {
                        ix[u] += 1;
                    } else {
                        iy[u - n] += 1;
                    }
                }
                out = out.add(&f.differentiate(&ix, &iy)?.scale(g))?;
            }
        }
        Ok(out)
    }
}

/// `exp(hbar d_gamma / 2) f` truncated at `order`.
pub fn equivalence_map(gamma: &SymmetricTensor, order: usize, f: &TrigPoly) -> Result<FormalSeries> {
    check_order(order)?;
    ensure_dim(gamma.dim(), f.dim())?;
    let mut coeffs = Vec::with_capacity(order + 1);
    let mut current = f.clone();
    for i in 0..=order {
        if i > 0 {
            current = gamma
                .apply(&current)?
                .scale(Complex64::new(0.5 / i as f64, 0.0));
        }
        coeffs.push(current.clone());
    }
    FormalSeries::new(coeffs)
}

/// Applies [`equivalence_map`] `C[[hbar]]`-linearly to a series, truncated at `order`.
pub fn equivalence_map_series(
    gamma: &SymmetricTensor,
    order: usize,
    series: &FormalSeries,
) -> Result<FormalSeries> {
    let mut coeffs = vec![TrigPoly::zero(series.dim()); order + 1];
    for (j, fj) in series.coefficients().iter().enumerate().take(order + 1) {
        let mapped = equivalence_map(gamma, order - j, fj)?;
        for (i, c) in mapped.coefficients().iter().enumerate() {
            coeffs[i + j] = coeffs[i + j].add(c)?;
        }
    }
    FormalSeries::new(coeffs)
}

/// `Tr(f) = hbar^{-n} c_{0,0}(f)` on the torus of unit symplectic volume.
pub fn trace_dq(f: &TrigPoly, h: HbarValue) -> Complex64 {
    f.constant_term() * (h.k() as f64).powi(f.dim() as i32)
}
