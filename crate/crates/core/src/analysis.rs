//! Operator norms, error operators and the convergence experiments.
//!
//! Every experiment sweeps `k` over the configured levels, measures one error
//! per level (and per norm kind for operator errors), and then decides pass or
//! fail either as an exact identity (all errors below a tolerance) or as a
//! rate: the least-squares slope of `log error` against `log hbar` must land in
//! `[expected - 0.2, expected + 1.2]`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind, FunctionSource, Order};
use crate::error::{ensure_dim, Error, Result};
use crate::func_expr::{Axis, Expr};
use crate::quantization::{
    assemble_toeplitz, intertwine_fgq, quantum_torus_generators, toeplitz_trace, HilbertSpec,
    Polarization, QuantumOperator,
};
use crate::star_products::{heat_flow_exact, heat_flow_truncated, star_exact, star_truncated, HbarValue, Orientation};
use crate::trig_poly::{rational_phase, FreqVector, TrigPoly};

/// Errors at or below this are exact zeros.
pub const ERROR_FLOOR: f64 = 1e-13;
/// Relative stopping tolerance of the 2-norm iteration.
pub const NORM_TOLERANCE: f64 = 1e-10;
pub const WINDOW_BELOW: f64 = 0.2;
pub const WINDOW_ABOVE: f64 = 1.2;
/// Tolerance for identities that hold exactly in exact arithmetic.
pub const EXACT_TOLERANCE: f64 = 1e-10;
/// Tolerance for the quantum torus relations.
pub const RELATION_TOLERANCE: f64 = 1e-12;
/// Riemann sums of band-limited profiles past their bandwidth.
pub const RIEMANN_EXACT_TOLERANCE: f64 = 1e-12;

const NORM_SEED: u64 = 0x6e6f_726d;
const MIN_NORM_ITERATIONS: usize = 1000;
/// Reference grid for the mean of a sampled profile: `M^n <= 2^22`.
const RIEMANN_REFERENCE_SAMPLES_LOG2: u32 = 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NormKind {
    #[serde(rename = "l1_operator", alias = "l1")]
    L1Operator,
    #[serde(rename = "linf_operator", alias = "linf")]
    LinfOperator,
    #[serde(rename = "l2_operator", alias = "l2")]
    L2Operator,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [NormKind::L2Operator, NormKind::L1Operator, NormKind::LinfOperator];

    pub fn name(self) -> &'static str {
        match self {
            NormKind::L1Operator => "l1_operator",
            NormKind::LinfOperator => "linf_operator",
            NormKind::L2Operator => "l2_operator",
        }
    }
}

pub fn operator_norm(a: &QuantumOperator, kind: NormKind) -> Result<f64> {
    matrix_norm(a.matrix(), kind)
}

/// Induced norm of a dense matrix: max column sum, max row sum, or largest singular value.
pub fn matrix_norm(a: &DMatrix<Complex64>, kind: NormKind) -> Result<f64> {
    Ok(match kind {
        NormKind::L1Operator => a
            .column_iter()
            .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::LinfOperator => a
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::L2Operator => spectral_norm(a)?,
    })
}

/// Largest singular value by Lanczos iteration on `A* A` from a seeded start
/// vector, with full reorthogonalisation. Stops once the top Ritz value moves
/// by at most `NORM_TOLERANCE` (relative) on two consecutive steps.
pub fn spectral_norm(a: &DMatrix<Complex64>) -> Result<f64> {
    let cols = a.ncols();
    if cols == 0 || a.nrows() == 0 || a.iter().all(|z| z.norm_sqr() == 0.0) {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(NORM_SEED);
    let mut q = DVector::from_fn(cols, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    q /= Complex64::from(q.norm());

    let cap = (10 * cols).max(MIN_NORM_ITERATIONS);
    let mut basis: Vec<DVector<Complex64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut previous = 0.0;
    let mut stable = 0;
    let mut change = f64::INFINITY;
    for step in 0..cap {
        let mut w = a.ad_mul(&(a * &q));
        let alpha_j = q.dotc(&w).re;
        basis.push(q.clone());
        alpha.push(alpha_j);
        for _ in 0..2 {
            for v in &basis {
                let c = v.dotc(&w);
                w.axpy(-c, v, Complex64::new(1.0, 0.0));
            }
        }
        let theta = top_ritz_value(&alpha, &beta);
        let beta_j = w.norm();
        if step > 0 {
            change = (theta - previous).abs() / theta.abs().max(f64::MIN_POSITIVE);
            stable = if change <= NORM_TOLERANCE { stable + 1 } else { 0 };
        }
        // an invariant subspace makes the Ritz value exact
        let exhausted = beta_j <= 1e-14 * theta.abs().sqrt().max(f64::MIN_POSITIVE) || basis.len() == cols;
        if stable >= 2 || exhausted {
            return Ok(theta.max(0.0).sqrt());
        }
        previous = theta;
        beta.push(beta_j);
        q = w / Complex64::from(beta_j);
    }
    Err(Error::NonConvergence {
        iterations: cap,
        change,
    })
}

fn top_ritz_value(alpha: &[f64], beta: &[f64]) -> f64 {
    let j = alpha.len();
    let t = DMatrix::<f64>::from_fn(j, j, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    t.symmetric_eigenvalues().max()
}

/// `sqrt(||A||_1 ||A||_inf) - ||A||_2`; never negative beyond rounding.
pub fn holder_slack(a: &DMatrix<Complex64>) -> Result<f64> {
    let l1 = matrix_norm(a, NormKind::L1Operator)?;
    let linf = matrix_norm(a, NormKind::LinfOperator)?;
    Ok((l1 * linf).sqrt() - spectral_norm(a)?)
}

fn pt(n: usize, k: usize) -> Result<HilbertSpec> {
    HilbertSpec::new(n, k, Polarization::PT)
}

fn level(k: usize) -> Result<HbarValue> {
    HbarValue::new(k as u64)
}

/// `E = Q_f Q_g - Q_{f *_N g}` on `P_T`, the truncated product evaluated at `hbar = 1/k`.
pub fn error_product(f: &TrigPoly, g: &TrigPoly, order: usize, k: usize) -> Result<QuantumOperator> {
    error_product_on(f, g, Some(order), k, Polarization::PT)
}

/// `Q_f Q_g - Q_{f *_hbar g}` with the untruncated product.
pub fn error_product_exact(f: &TrigPoly, g: &TrigPoly, k: usize) -> Result<QuantumOperator> {
    error_product_on(f, g, None, k, Polarization::PT)
}

/// The product error on either polarization; `P_Tcheck` pairs with the opposite product.
pub fn error_product_on(
    f: &TrigPoly,
    g: &TrigPoly,
    order: Option<usize>,
    k: usize,
    polarization: Polarization,
) -> Result<QuantumOperator> {
    ensure_dim(f.dim(), g.dim())?;
    let spec = HilbertSpec::new(f.dim(), k, polarization)?;
    let orientation = paired_orientation(polarization);
    let h = level(k)?;
    let target = match order {
        Some(order) => star_truncated(f, g, order, orientation)?.evaluate(h.hbar()),
        None => star_exact(f, g, h, orientation)?,
    };
    let qf = assemble_toeplitz(f, spec)?;
    let qg = assemble_toeplitz(g, spec)?;
    qf.compose(&qg)?.sub(&assemble_toeplitz(&target, spec)?)
}

/// The product realised by Toeplitz operators on each polarization.
pub fn paired_orientation(polarization: Polarization) -> Orientation {
    match polarization {
        Polarization::PT => Orientation::Star,
        Polarization::PTCheck => Orientation::CheckStar,
    }
}

/// `intertwine(Q-check_f) - Q_{F_N f}` with the Berezin transform truncated at order `N`.
pub fn error_intertwine(f: &TrigPoly, order: usize, k: usize) -> Result<QuantumOperator> {
    error_intertwine_signed(f, -1, Some(order), k)
}

/// Intertwining defect against `exp(sign hbar Laplacian)`, truncated or (`None`) exact.
pub fn error_intertwine_signed(
    f: &TrigPoly,
    sign: i64,
    order: Option<usize>,
    k: usize,
) -> Result<QuantumOperator> {
    let n = f.dim();
    let h = level(k)?;
    let check = assemble_toeplitz(f, HilbertSpec::new(n, k, Polarization::PTCheck)?)?;
    let transformed = match order {
        Some(order) => heat_flow_truncated(f, sign as f64, order)?.evaluate(h.hbar()),
        None => heat_flow_exact(f, sign, h),
    };
    intertwine_fgq(&check)?.sub(&assemble_toeplitz(&transformed, pt(n, k)?)?)
}

/// `|hbar^n tr Q_f - c_00(f)|`, using the matrix-free trace.
pub fn trace_error(f: &TrigPoly, k: usize) -> Result<f64> {
    let n = f.dim();
    let trace = toeplitz_trace(f, pt(n, k)?)?;
    let hbar_n = (k as f64).powi(-(n as i32));
    Ok((trace * hbar_n - f.constant_term()).norm())
}

/// A function of `y` alone for [`riemann_sum_error`].
#[derive(Clone, Debug)]
pub enum Profile {
    Poly(TrigPoly),
    Sampled { expr: Expr, n: usize },
}

/// `|g^_0 - k^{-n} sum_{[m]} g(m / k)|`.
///
/// For a sampled profile `g^_0` is the mean over a fine reference grid, which
/// is exact to rounding for analytic periodic input.
pub fn riemann_sum_error(g: &Profile, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidLevel);
    }
    match g {
        Profile::Poly(p) => {
            if p.depends_on_x() {
                return Err(Error::InvalidProjection(
                    "a Riemann-sum profile must not depend on x".into(),
                ));
            }
            let n = p.dim();
            let fibre = p.fibrewise_coefficient(&FreqVector::zero(n));
            let sum = lattice_points(n, k)
                .map(|m| fibre.evaluate_at_lattice(&m, k as i64))
                .sum::<Complex64>();
            let mean = sum / (k as f64).powi(n as i32);
            Ok((p.constant_term() - mean).norm())
        }
        Profile::Sampled { expr, n } => {
            if expr.uses_axis(Axis::X) {
                return Err(Error::InvalidProjection(
                    "a Riemann-sum profile must not depend on x".into(),
                ));
            }
            if expr.required_dim() > *n {
                return Err(Error::VariableOutOfRange {
                    name: expr.to_string(),
                    required: expr.required_dim(),
                    n: *n,
                });
            }
            let reference_grid = 1usize << (RIEMANN_REFERENCE_SAMPLES_LOG2 / *n as u32);
            let reference = grid_mean(expr, *n, reference_grid)?;
            let sum = grid_mean(expr, *n, k)?;
            Ok((reference - sum).abs())
        }
    }
}

fn lattice_points(n: usize, k: usize) -> impl Iterator<Item = Vec<i64>> {
    let total = k.pow(n as u32);
    (0..total).map(move |mut index| {
        let mut m = vec![0i64; n];
        for slot in m.iter_mut().rev() {
            *slot = (index % k) as i64;
            index /= k;
        }
        m
    })
}

fn grid_mean(expr: &Expr, n: usize, k: usize) -> Result<f64> {
    let x = vec![0.0; n];
    let total = k.pow(n as u32);
    let sum = (0..total)
        .into_par_iter()
        .map(|mut index| {
            let mut y = vec![0.0; n];
            for slot in y.iter_mut().rev() {
                *slot = (index % k) as f64 / k as f64;
                index /= k;
            }
            expr.eval(&x, &y)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum::<f64>();
    Ok(sum / total as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// RMS of the log-log residuals.
    pub residual: f64,
    pub used: usize,
    /// `hbar` values whose error was at or below the floor.
    pub excluded: Vec<f64>,
}

/// Least-squares slope of `log error` against `log hbar` over the points above [`ERROR_FLOOR`].
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let (used, excluded): (Vec<_>, Vec<_>) = points
        .iter()
        .partition(|(_, e)| e.is_finite() && *e > ERROR_FLOOR);
    let distinct = {
        let mut hs: Vec<f64> = used.iter().map(|(h, _)| *h).collect();
        hs.sort_by(f64::total_cmp);
        hs.dedup();
        hs.len()
    };
    if used.len() < 3 || distinct < 2 {
        return Err(Error::TooFewPoints { usable: used.len() });
    }
    let xs: Vec<f64> = used.iter().map(|(h, _)| h.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|(_, e)| e.ln()).collect();
    let count = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / count;
    let my = ys.iter().sum::<f64>() / count;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / count)
        .sqrt();
    Ok(SlopeFit {
        slope,
        residual,
        used: used.len(),
        excluded: excluded.iter().map(|(h, _)| *h).collect(),
    })
}

/// Result of checking that `error(k) k^p` decreases along a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    pub power: u32,
    pub pass: bool,
    pub scaled: Vec<f64>,
    /// First level from which every error is at the floor.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_from: Option<usize>,
}

/// `e(k) k^p` must strictly decrease while above the floor; once an error
/// reaches the floor it counts as an exact zero and must stay there.
pub fn decay_check(points: &[(usize, f64)], power: u32) -> DecayCheck {
    let scaled: Vec<f64> = points
        .iter()
        .map(|&(k, e)| e * (k as f64).powi(power as i32))
        .collect();
    let zero: Vec<bool> = points.iter().map(|&(_, e)| e <= ERROR_FLOOR).collect();
    let mut pass = points.iter().all(|&(_, e)| e.is_finite());
    for i in 1..points.len() {
        let ok = match (zero[i - 1], zero[i]) {
            (_, true) => true,
            (true, false) => false,
            (false, false) => scaled[i] < scaled[i - 1],
        };
        pass &= ok;
    }
    let exact_from = zero
        .iter()
        .rposition(|z| !z)
        .map_or(Some(0), |last| (last + 1 < points.len()).then_some(last + 1))
        .map(|i| points[i].0);
    DecayCheck {
        power,
        pass,
        scaled,
        exact_from,
    }
}

/// A polynomial with every mode in `[-B, B]^{2n}` and coefficients uniform on the unit disc.
pub fn random_trig_poly<R: Rng + ?Sized>(n: usize, bandwidth: usize, rng: &mut R) -> TrigPoly {
    let b = bandwidth as i64;
    let width = (2 * b + 1) as usize;
    let count = width.pow(2 * n as u32);
    let terms = (0..count).map(|mut index| {
        let mut digits = vec![0i64; 2 * n];
        for slot in digits.iter_mut().rev() {
            *slot = (index % width) as i64 - b;
            index /= width;
        }
        let radius = rng.random::<f64>().sqrt();
        let angle = std::f64::consts::TAU * rng.random::<f64>();
        let (p, q) = digits.split_at(n);
        (
            FreqVector::new(p.to_vec()),
            FreqVector::new(q.to_vec()),
            Complex64::from_polar(radius, angle),
        )
    });
    let terms: Vec<_> = terms.collect();
    TrigPoly::from_terms(n, terms).expect("dimensions agree")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub k: usize,
    pub hbar: f64,
    pub error: f64,
    pub norm_kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub norm_kind: String,
    pub outcome: String,
    pub pass: bool,
    pub expected_slope: f64,
    pub window_low: f64,
    pub window_high: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    pub used: usize,
    pub excluded_k: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarTableRow {
    pub order: usize,
    pub p: Vec<i64>,
    pub q: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub id: String,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub pass: bool,
    pub outcome: String,
    /// Sign convention detected by intertwine and torus_relations sweeps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign: Option<i64>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayCheck>,
    pub rows: Vec<ErrorRow>,
    pub fits: Vec<FitSummary>,
    pub table: Vec<StarTableRow>,
}

impl ConvergenceReport {
    fn new(config: &ExperimentConfig) -> Self {
        ConvergenceReport {
            id: config.id.clone(),
            experiment: config.experiment,
            seed: config.seed,
            pass: true,
            outcome: String::new(),
            sign: None,
            notes: Vec::new(),
            decay: None,
            rows: Vec::new(),
            fits: Vec::new(),
            table: Vec::new(),
        }
    }

    /// Largest error in the rows of one norm kind.
    pub fn max_error(&self, norm_kind: &str) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.norm_kind == norm_kind)
            .map(|r| r.error)
            .fold(0.0, f64::max)
    }
}

/// Fits one norm's errors and judges the slope against `expected`.
pub fn summarise_rate(rows: &[ErrorRow], norm_kind: &str, expected: f64) -> Result<FitSummary> {
    let selected: Vec<&ErrorRow> = rows.iter().filter(|r| r.norm_kind == norm_kind).collect();
    let points: Vec<(f64, f64)> = selected.iter().map(|r| (r.hbar, r.error)).collect();
    let excluded_k = selected
        .iter()
        .filter(|r| !(r.error > ERROR_FLOOR))
        .map(|r| r.k)
        .collect();
    let low = expected - WINDOW_BELOW;
    let high = expected + WINDOW_ABOVE;
    let base = FitSummary {
        norm_kind: norm_kind.to_string(),
        outcome: String::new(),
        pass: false,
        expected_slope: expected,
        window_low: low,
        window_high: high,
        slope: None,
        residual: None,
        used: 0,
        excluded_k,
    };
    match fit_slope(&points) {
        Ok(fit) => {
            let pass = fit.slope >= low && fit.slope <= high;
            Ok(FitSummary {
                outcome: "rate".into(),
                pass,
                slope: Some(fit.slope),
                residual: Some(fit.residual),
                used: fit.used,
                ..base
            })
        }
        Err(Error::TooFewPoints { usable }) => {
            let exact = points.iter().all(|(_, e)| *e <= EXACT_TOLERANCE);
            Ok(FitSummary {
                outcome: if exact { "exact identity" } else { "too few points" }.into(),
                pass: exact,
                used: usable,
                ..base
            })
        }
        Err(e) => Err(e),
    }
}

/// Runs one configured sweep.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    let name = config.experiment.name();
    run_inner(config).map_err(|e| e.in_experiment(name))
}

fn run_inner(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    let mut report = ConvergenceReport::new(config);
    let (f, g) = config.functions()?;
    let required = |p: Option<TrigPoly>, path: &str| {
        p.ok_or_else(|| Error::config(path, "required for this experiment"))
    };
    match config.experiment {
        ExperimentKind::Product => run_product(config, required(f, "f")?, required(g, "g")?, &mut report)?,
        ExperimentKind::Intertwine => run_intertwine(config, required(f, "f")?, &mut report)?,
        ExperimentKind::Trace => run_trace(config, required(f, "f")?, &mut report)?,
        ExperimentKind::Riemann => run_riemann(config, f, &mut report)?,
        ExperimentKind::NormBound => run_norm_bound(config, required(f, "f")?, &mut report)?,
        ExperimentKind::TorusRelations => run_torus(config, &mut report)?,
        ExperimentKind::StarTable => run_star_table(config, required(f, "f")?, required(g, "g")?, &mut report)?,
    }
    Ok(report)
}

fn hbar_of(k: usize) -> f64 {
    1.0 / k as f64
}

fn norm_rows(k: usize, e: &QuantumOperator, norms: &[NormKind], tolerance: Option<f64>) -> Result<Vec<ErrorRow>> {
    norms
        .iter()
        .map(|&kind| {
            Ok(ErrorRow {
                k,
                hbar: hbar_of(k),
                error: operator_norm(e, kind)?,
                norm_kind: kind.name().into(),
                tolerance,
            })
        })
        .collect()
}

fn sweep<T, F>(levels: &[usize], cell: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    levels.par_iter().map(|&k| cell(k)).collect()
}

fn judge_rates(config: &ExperimentConfig, expected: f64, report: &mut ConvergenceReport) -> Result<()> {
    for kind in &config.norms {
        let fit = summarise_rate(&report.rows, kind.name(), expected)?;
        report.pass &= fit.pass;
        report.fits.push(fit);
    }
    let all_exact = report.fits.iter().all(|f| f.outcome == "exact identity");
    report.outcome = if all_exact { "exact identity" } else { "rate" }.into();
    Ok(())
}

fn run_product(config: &ExperimentConfig, f: TrigPoly, g: TrigPoly, report: &mut ConvergenceReport) -> Result<()> {
    let levels = config.levels();
    let polarization = config.polarization;
    report.notes.push(format!(
        "product {:?} on {}",
        paired_orientation(polarization),
        polarization.name()
    ));
    match config.order {
        Order::Exact(_) => {
            let rows = sweep(&levels, |k| {
                let spec = HilbertSpec::new(config.n, k, polarization)?;
                let qf = operator_norm(&assemble_toeplitz(&f, spec)?, NormKind::L2Operator)?;
                let qg = operator_norm(&assemble_toeplitz(&g, spec)?, NormKind::L2Operator)?;
                let e = error_product_on(&f, &g, None, k, polarization)?;
                norm_rows(k, &e, &config.norms, Some(EXACT_TOLERANCE * (1.0 + qf * qg)))
            })?;
            report.rows = rows.into_iter().flatten().collect();
            report.pass = report.rows.iter().all(|r| r.error <= r.tolerance.unwrap_or(0.0));
            report.outcome = "exact identity".into();
        }
        Order::Truncated(order) => {
            let rows = sweep(&levels, |k| {
                let e = error_product_on(&f, &g, Some(order), k, polarization)?;
                norm_rows(k, &e, &config.norms, None)
            })?;
            report.rows = rows.into_iter().flatten().collect();
            judge_rates(config, order as f64 + 1.0, report)?;
        }
    }
    Ok(())
}

fn run_intertwine(config: &ExperimentConfig, f: TrigPoly, report: &mut ConvergenceReport) -> Result<()> {
    let levels = config.levels();
    let exact = sweep(&levels, |k| {
        let minus = operator_norm(&error_intertwine_signed(&f, -1, None, k)?, NormKind::L2Operator)?;
        let plus = operator_norm(&error_intertwine_signed(&f, 1, None, k)?, NormKind::L2Operator)?;
        Ok((minus, plus))
    })?;
    let worst_minus = exact.iter().map(|e| e.0).fold(0.0, f64::max);
    let worst_plus = exact.iter().map(|e| e.1).fold(0.0, f64::max);
    let minus_ok = worst_minus <= EXACT_TOLERANCE;
    let plus_ok = worst_plus <= EXACT_TOLERANCE;
    report.notes.push(format!(
        "exact intertwining defect: exp(-hbar Laplacian) {:e}, exp(+hbar Laplacian) {:e}",
        worst_minus, worst_plus
    ));
    let sign = match (minus_ok, plus_ok) {
        (true, false) => -1,
        (false, true) => 1,
        (true, true) => {
            report.notes.push("both signs exact (Laplacian of f vanishes)".into());
            -1
        }
        (false, false) => {
            report.pass = false;
            report.outcome = "no exact sign".into();
            return Ok(());
        }
    };
    if minus_ok != plus_ok {
        report.sign = Some(sign);
    }
    match config.order {
        Order::Exact(_) => {
            let rows = sweep(&levels, |k| {
                norm_rows(k, &error_intertwine_signed(&f, sign, None, k)?, &config.norms, Some(EXACT_TOLERANCE))
            })?;
            report.rows = rows.into_iter().flatten().collect();
            report.pass = report.rows.iter().all(|r| r.error <= EXACT_TOLERANCE);
            report.outcome = "exact identity".into();
        }
        Order::Truncated(order) => {
            let rows = sweep(&levels, |k| {
                norm_rows(k, &error_intertwine_signed(&f, sign, Some(order), k)?, &config.norms, None)
            })?;
            report.rows = rows.into_iter().flatten().collect();
            judge_rates(config, order as f64 + 1.0, report)?;
        }
    }
    Ok(())
}

fn scalar_rows(levels: &[usize], errors: &[f64], tolerance: Option<f64>) -> Vec<ErrorRow> {
    levels
        .iter()
        .zip(errors)
        .map(|(&k, &error)| ErrorRow {
            k,
            hbar: hbar_of(k),
            error,
            norm_kind: "abs".into(),
            tolerance,
        })
        .collect()
}

fn apply_decay(config: &ExperimentConfig, report: &mut ConvergenceReport) {
    if let Some(power) = config.decay_power {
        let points: Vec<(usize, f64)> = report.rows.iter().map(|r| (r.k, r.error)).collect();
        let check = decay_check(&points, power);
        report.notes.push(format!(
            "decay faster than k^-{} is checked on the sweep as a finite-range proxy for O(hbar^inf)",
            power
        ));
        report.pass &= check.pass;
        report.decay = Some(check);
    }
}

fn run_trace(config: &ExperimentConfig, f: TrigPoly, report: &mut ConvergenceReport) -> Result<()> {
    let levels = config.levels();
    let errors = sweep(&levels, |k| trace_error(&f, k))?;
    let bandwidth = f.bandwidth() as usize;
    let tolerance = EXACT_TOLERANCE * f.constant_term().norm() + 1e-12;
    report.rows = scalar_rows(&levels, &errors, None);
    for row in report.rows.iter_mut().filter(|r| r.k > bandwidth) {
        row.tolerance = Some(tolerance);
    }
    let exact_ok = report
        .rows
        .iter()
        .all(|r| r.tolerance.is_none_or(|t| r.error <= t));
    report.pass = exact_ok;
    report.notes.push(format!("bandwidth {}; exact for k > {}", bandwidth, bandwidth));
    apply_decay(config, report);
    report.outcome = if errors.iter().all(|e| *e <= ERROR_FLOOR) {
        "exact identity"
    } else {
        "decay"
    }
    .into();
    Ok(())
}

fn run_riemann(config: &ExperimentConfig, f: Option<TrigPoly>, report: &mut ConvergenceReport) -> Result<()> {
    let levels = config.levels();
    let profile = match config.f_source()? {
        Some(FunctionSource::Expr { re, im: None, .. }) => Profile::Sampled { expr: re, n: config.n },
        Some(FunctionSource::Expr { im: Some(_), .. }) => {
            return Err(Error::config("f.expr_im", "a Riemann-sum profile is real"))
        }
        _ => Profile::Poly(f.ok_or_else(|| Error::config("f", "required for this experiment"))?),
    };
    let errors = sweep(&levels, |k| riemann_sum_error(&profile, k))?;
    report.rows = scalar_rows(&levels, &errors, None);
    if let Profile::Poly(p) = &profile {
        let bandwidth = p.y_bandwidth() as usize;
        for row in report.rows.iter_mut().filter(|r| r.k > bandwidth) {
            row.tolerance = Some(RIEMANN_EXACT_TOLERANCE);
        }
        report.pass = report
            .rows
            .iter()
            .all(|r| r.tolerance.is_none_or(|t| r.error <= t));
        report.notes.push(format!("bandwidth {}; exact for k > {}", bandwidth, bandwidth));
    }
    apply_decay(config, report);
    report.outcome = if errors.iter().all(|e| *e <= ERROR_FLOOR) {
        "exact identity"
    } else {
        "decay"
    }
    .into();
    Ok(())
}

fn run_norm_bound(config: &ExperimentConfig, f: TrigPoly, report: &mut ConvergenceReport) -> Result<()> {
    let levels = config.levels();
    let bound = f.l1_norm();
    let rows = sweep(&levels, |k| {
        let q = assemble_toeplitz(&f, pt(config.n, k)?)?;
        norm_rows(k, &q, &[NormKind::L2Operator], Some(bound))
    })?;
    report.rows = rows.into_iter().flatten().collect();
    report.pass = report.rows.iter().all(|r| r.error <= bound * (1.0 + 1e-12));
    report.notes.push(format!("coefficient l1 bound {}", bound));
    report.outcome = "bounded".into();
    Ok(())
}

/// Largest relation defects at one level: `(commutators, U_i V_j - e^{+..} V_j U_i, U_i V_j - e^{-..} V_j U_i)`.
pub fn torus_defects(n: usize, k: usize) -> Result<(f64, f64, f64)> {
    let spec = pt(n, k)?;
    let generators: Vec<(QuantumOperator, QuantumOperator)> = (1..=n)
        .map(|axis| quantum_torus_generators(spec, axis))
        .collect::<Result<_>>()?;
    let norm = |a: &QuantumOperator| operator_norm(a, NormKind::L2Operator);
    let mut commutators = 0.0f64;
    let mut plus = 0.0f64;
    let mut minus = 0.0f64;
    for (i, (ui, vi)) in generators.iter().enumerate() {
        for (j, (uj, vj)) in generators.iter().enumerate() {
            let uu = ui.compose(uj)?.sub(&uj.compose(ui)?)?;
            let vv = vi.compose(vj)?.sub(&vj.compose(vi)?)?;
            commutators = commutators.max(norm(&uu)?).max(norm(&vv)?);
            let uv = ui.compose(vj)?;
            let vu = vj.compose(ui)?;
            let delta = i64::from(i == j);
            for (sign, slot) in [(1i64, &mut plus), (-1, &mut minus)] {
                let phase = rational_phase(sign * delta, k as i64);
                let d = norm(&uv.sub(&vu.scale(phase))?)?;
                *slot = slot.max(d);
            }
        }
    }
    Ok((commutators, plus, minus))
}

fn run_torus(config: &ExperimentConfig, report: &mut ConvergenceReport) -> Result<()> {
    let levels = config.levels();
    let defects = sweep(&levels, |k| torus_defects(config.n, k))?;
    let worst = |pick: fn(&(f64, f64, f64)) -> f64| defects.iter().map(pick).fold(0.0, f64::max);
    let commutators = worst(|d| d.0);
    let plus = worst(|d| d.1);
    let minus = worst(|d| d.2);
    report.notes.push(format!(
        "max commutator defect {:e}; mixed defect with sign +1 {:e}, with sign -1 {:e}",
        commutators, plus, minus
    ));
    let sign = match (plus <= RELATION_TOLERANCE, minus <= RELATION_TOLERANCE) {
        (true, false) => Some(1),
        (false, true) => Some(-1),
        _ => None,
    };
    report.sign = sign;
    report.pass = sign.is_some() && commutators <= RELATION_TOLERANCE;
    report.rows = levels
        .iter()
        .zip(&defects)
        .map(|(&k, d)| ErrorRow {
            k,
            hbar: hbar_of(k),
            error: d.0.max(if sign == Some(1) { d.1 } else { d.2 }),
            norm_kind: NormKind::L2Operator.name().into(),
            tolerance: Some(RELATION_TOLERANCE),
        })
        .collect();
    report.outcome = match sign {
        Some(_) => "exact identity".into(),
        None => "no consistent sign".into(),
    };
    Ok(())
}

fn run_star_table(config: &ExperimentConfig, f: TrigPoly, g: TrigPoly, report: &mut ConvergenceReport) -> Result<()> {
    let order = config
        .order
        .truncation()
        .ok_or_else(|| Error::config("order", "the star table needs a finite order"))?;
    let series = star_truncated(&f, &g, order, config.orientation)?;
    for (i, c) in series.coefficients().iter().enumerate() {
        report.table.extend(c.to_records().into_iter().map(|r| StarTableRow {
            order: i,
            p: r.p,
            q: r.q,
            re: r.re,
            im: r.im,
        }));
    }
    report.outcome = "table".into();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(rows, cols, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn svd_norm(a: &DMatrix<Complex64>) -> f64 {
        a.clone().svd(false, false).singular_values.max()
    }

    #[test]
    fn identity_has_unit_norms() {
        let id = DMatrix::<Complex64>::identity(7, 7);
        for kind in NormKind::ALL {
            assert_relative_eq!(matrix_norm(&id, kind).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn diagonal_spectral_norm() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]));
        assert_relative_eq!(spectral_norm(&d).unwrap(), 3.0, epsilon = 1e-12);
        assert_eq!(spectral_norm(&DMatrix::zeros(4, 4)).unwrap(), 0.0);
    }

    #[test]
    fn spectral_norm_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for size in [1, 2, 5, 17, 50, 64] {
            let a = random_matrix(&mut rng, size, size);
            assert_relative_eq!(spectral_norm(&a).unwrap(), svd_norm(&a), max_relative = 1e-9);
        }
        let tall = random_matrix(&mut rng, 9, 4);
        assert_relative_eq!(spectral_norm(&tall).unwrap(), svd_norm(&tall), max_relative = 1e-9);
    }

    #[test]
    fn spectral_norm_of_clustered_error_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_trig_poly(1, 1, &mut rng);
        let g = random_trig_poly(1, 1, &mut rng);
        for (order, k) in [(0, 128), (2, 128), (1, 256)] {
            let e = error_product(&f, &g, order, k).unwrap();
            assert_relative_eq!(
                spectral_norm(e.matrix()).unwrap(),
                svd_norm(e.matrix()),
                max_relative = 1e-8
            );
        }
    }

    #[test]
    fn holder_inequality_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_matrix(&mut rng, 50, 50);
        assert!(holder_slack(&a).unwrap() >= -1e-9);
        let id = DMatrix::<Complex64>::identity(6, 6);
        assert!(holder_slack(&id).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fit_slope_recovers_power_law() {
        let points: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0]
            .iter()
            .map(|k: &f64| (1.0 / k, 3.5 / (k * k)))
            .collect();
        let fit = fit_slope(&points).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-6);
        assert!(fit.residual < 1e-12);
        let scaled: Vec<(f64, f64)> = points.iter().map(|&(h, e)| (h, 1e3 * e)).collect();
        assert!((fit_slope(&scaled).unwrap().slope - fit.slope).abs() < 1e-12);
    }

    #[test]
    fn fit_slope_excludes_floor() {
        let points = [(0.5, 1e-20), (0.25, 0.0), (0.125, 1e-14)];
        assert_eq!(fit_slope(&points).unwrap_err(), Error::TooFewPoints { usable: 0 });
        let points = [(0.5, 1.0), (0.25, 0.25), (0.125, 1.0 / 16.0), (0.0625, 1e-15)];
        let fit = fit_slope(&points).unwrap();
        assert_eq!(fit.excluded, vec![0.0625]);
        assert!((fit.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn decay_check_semantics() {
        let falling = [(8, 1e-3), (16, 1e-5), (32, 1e-8)];
        assert!(decay_check(&falling, 4).pass);
        let slow = [(8, 1e-3), (16, 1e-4)];
        assert!(!decay_check(&slow, 4).pass);
        let then_exact = [(8, 1e-3), (16, 1e-6), (32, 0.0), (64, 1e-15)];
        let check = decay_check(&then_exact, 4);
        assert!(check.pass);
        assert_eq!(check.exact_from, Some(32));
        let revived = [(8, 1e-3), (16, 0.0), (32, 1e-9)];
        assert!(!decay_check(&revived, 4).pass);
    }

    #[test]
    fn product_error_examples() {
        let n = 1;
        let f = TrigPoly::exp_y(n, 0);
        let g = TrigPoly::exp_x(n, 0);
        let e = error_product(&f, &g, 0, 4).unwrap();
        let expected = (rational_phase(1, 4) - Complex64::from(1.0)).norm();
        assert_relative_eq!(operator_norm(&e, NormKind::L2Operator).unwrap(), expected, epsilon = 1e-12);

        let constant = TrigPoly::constant(n, c(2.0, -1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_trig_poly(n, 2, &mut rng);
        for order in 0..3 {
            assert!(error_product(&constant, &r, order, 8).unwrap().matrix().camax() < 1e-13);
            assert!(error_product(&r, &constant, order, 8).unwrap().matrix().camax() < 1e-13);
            let x_only = TrigPoly::from_terms(n, [([2].into(), [0].into(), c(0.3, 0.1))]).unwrap();
            assert!(error_product(&x_only, &r, order, 8).unwrap().matrix().camax() < 1e-13);
        }
    }

    #[test]
    fn exact_product_error_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_trig_poly(1, 3, &mut rng);
        let g = random_trig_poly(1, 3, &mut rng);
        for k in [4, 8, 32] {
            assert!(error_product_exact(&f, &g, k).unwrap().matrix().camax() < 1e-11);
            let check = error_product_on(&f, &g, None, k, Polarization::PTCheck).unwrap();
            assert!(check.matrix().camax() < 1e-11);
        }
    }

    #[test]
    fn intertwine_error_examples() {
        let n = 1;
        for f in [TrigPoly::exp_x(n, 0), TrigPoly::exp_y(n, 0), TrigPoly::constant(n, c(1.5, 0.0))] {
            assert!(error_intertwine(&f, 0, 8).unwrap().matrix().camax() < 1e-13);
        }
        let f = TrigPoly::from_terms(n, [([1].into(), [1].into(), c(1.0, 0.0))]).unwrap();
        let e = error_intertwine(&f, 0, 8).unwrap();
        let expected = (rational_phase(1, 8) - Complex64::from(1.0)).norm();
        assert_relative_eq!(operator_norm(&e, NormKind::L2Operator).unwrap(), expected, epsilon = 1e-12);
        assert!(error_intertwine_signed(&f, -1, None, 8).unwrap().matrix().camax() < 1e-13);
        assert!(error_intertwine_signed(&f, 1, None, 8).unwrap().matrix().camax() > 0.1);
    }

    #[test]
    fn trace_error_band_limited() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = random_trig_poly(1, 3, &mut rng);
        for k in 4..12 {
            assert!(trace_error(&f, k).unwrap() <= 1e-10 * f.constant_term().norm() + 1e-12);
        }
        assert!(trace_error(&TrigPoly::one(2), 3).unwrap() < 1e-15);
        // aliasing below the bandwidth: the oracle is the sum of c_{p,0}-type terms with p, q = 0 mod k
        let k = 2;
        let mut alias = Complex64::default();
        for (mode, coeff) in f.terms() {
            let p = mode.p.as_slice()[0];
            if p.rem_euclid(k) == 0 && mode.q.as_slice()[0].rem_euclid(k) == 0 && !(p == 0 && mode.q.is_zero()) {
                alias += coeff;
            }
        }
        assert_relative_eq!(trace_error(&f, k as usize).unwrap(), alias.norm(), epsilon = 1e-12);
    }

    #[test]
    fn riemann_examples() {
        let one = Profile::Poly(TrigPoly::one(1));
        assert!(riemann_sum_error(&one, 5).unwrap() < 1e-15);
        let g = TrigPoly::from_terms(
            1,
            [
                ([0].into(), [0].into(), c(0.5, 0.0)),
                ([0].into(), [3].into(), c(0.25, 0.1)),
                ([0].into(), [-2].into(), c(-0.3, 0.0)),
            ],
        )
        .unwrap();
        let g = Profile::Poly(g);
        for k in 4..10 {
            assert!(riemann_sum_error(&g, k).unwrap() <= 1e-12);
        }
        // k = 3 aliases q = 3 onto the mean
        assert_relative_eq!(riemann_sum_error(&g, 3).unwrap(), c(0.25, 0.1).norm(), epsilon = 1e-12);

        let expr = crate::func_expr::parse("exp(cos(2*pi*y1))").unwrap();
        let sampled = Profile::Sampled { expr, n: 1 };
        // oracle: the k-point rule for exp(cos 2 pi y) errs by 2 sum_j I_{jk}(1)
        let e8 = riemann_sum_error(&sampled, 8).unwrap();
        let bessel = |order: i32| -> f64 {
            (0..30)
                .map(|m| 0.5f64.powi(2 * m + order) / (factorial(m) * factorial(m + order)))
                .sum()
        };
        assert_relative_eq!(e8, 2.0 * (bessel(8) + bessel(16)), max_relative = 1e-6);
    }

    fn factorial(m: i32) -> f64 {
        (1..=m).map(f64::from).product()
    }

    #[test]
    fn torus_relations_have_negative_phase() {
        let (comm, plus, minus) = torus_defects(1, 8).unwrap();
        assert!(comm < 1e-14 && minus < 1e-13);
        assert!(plus > 0.1);
        let (comm, _, minus) = torus_defects(2, 4).unwrap();
        assert!(comm < 1e-14 && minus < 1e-13);
    }

    #[test]
    fn random_polys_fill_the_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = random_trig_poly(2, 1, &mut rng);
        assert_eq!(f.len(), 81);
        assert!(f.terms().all(|(_, c)| c.norm() <= 1.0));
    }
}
