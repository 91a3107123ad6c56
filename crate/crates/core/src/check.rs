//! The built-in verification suite behind the `check` subcommand.
//!
//! Criteria 1-6 and 8 are ordinary experiment configs run through
//! [`crate::cli::run`]; 7 and 9 are direct algebraic checks. Every criterion
//! writes its reports under `<out>/cNN/`, and [`run_check`] adds
//! `check_summary.toml`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{holder_slack, random_trig_poly, NormKind};
use crate::cli::{run, ReportFile};
use crate::config::{parse_config, ExperimentConfig};
use crate::error::Result;
use crate::star_products::{star_exact, star_truncated, HbarValue, Orientation};
use crate::trig_poly::{FreqVector, TrigPoly};

pub const CRITERIA: [u8; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub number: u8,
    pub title: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub pass: bool,
    pub criteria: Vec<CriterionResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SuiteCheck {
    name: String,
    pass: bool,
    worst: f64,
    count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SuiteReport {
    id: String,
    pass: bool,
    checks: Vec<SuiteCheck>,
}

pub fn title(number: u8) -> &'static str {
    match number {
        1 => "exact homomorphism",
        2 => "product error rate",
        3 => "intertwining",
        4 => "trace",
        5 => "quantum torus relations",
        6 => "uniform norm bound",
        7 => "Holder-type norm inequality",
        8 => "Riemann sums",
        9 => "star-product algebra",
        _ => "unknown",
    }
}

/// Runs criteria 1-9 and writes `check_summary.toml` into `out_dir`.
pub fn run_check(out_dir: &Path) -> Result<CheckSummary> {
    let criteria = CRITERIA
        .iter()
        .map(|&c| run_criterion(c, out_dir))
        .collect::<Result<Vec<_>>>()?;
    let summary = CheckSummary {
        pass: criteria.iter().all(|c| c.pass),
        criteria,
    };
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("check_summary.toml"),
        toml::to_string(&summary).expect("summary serialises"),
    )?;
    Ok(summary)
}

pub fn run_criterion(number: u8, out_dir: &Path) -> Result<CriterionResult> {
    let dir = out_dir.join(format!("c{:02}", number));
    let (pass, detail) = match number {
        1 => homomorphism(&dir)?,
        2 => product_rates(&dir)?,
        3 => intertwining(&dir)?,
        4 => trace(&dir)?,
        5 => torus(&dir)?,
        6 => norm_bound(&dir)?,
        7 => holder(&dir)?,
        8 => riemann(&dir)?,
        9 => algebra(&dir)?,
        _ => (false, format!("no criterion {}", number)),
    };
    Ok(CriterionResult {
        number,
        title: title(number).into(),
        pass,
        detail,
    })
}

fn config(id: &str, body: &str) -> Result<ExperimentConfig> {
    let text = format!(
        "id = \"{id}\"\n{body}\n[output]\nreport = \"{id}.toml\"\ncsv = \"{id}.csv\"\n"
    );
    parse_config(&text)
}

fn run_all(dir: &Path, configs: &[ExperimentConfig]) -> Result<Vec<ReportFile>> {
    configs
        .iter()
        .map(|c| run(c, dir).map(|out| out.report))
        .collect()
}

fn random_pair(kind: &str, order: &str, seed: u64, bandwidth: usize, norms: &str) -> String {
    format!(
        "experiment = \"{kind}\"\norder = {order}\nseed = {seed}\nk_min = 8\nk_max = 256\nnorms = [{norms}]\n\
         [f]\nrandom_bandwidth = {bandwidth}\n[g]\nrandom_bandwidth = {bandwidth}\n"
    )
}

fn homomorphism(dir: &Path) -> Result<(bool, String)> {
    let configs = (1..=10)
        .map(|seed| {
            config(
                &format!("product_exact_seed{}", seed),
                &random_pair("product", "\"exact\"", seed, 3, "\"l2_operator\""),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let reports = run_all(dir, &configs)?;
    let worst = reports
        .iter()
        .flat_map(|r| &r.rows)
        .map(|row| row.error / row.tolerance.unwrap_or(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok((
        reports.iter().all(|r| r.report.pass),
        format!("10 pairs, bandwidth 3, k = 8..256; worst error/tolerance {:.3e}", worst),
    ))
}

fn slope_span(reports: &[ReportFile], norm: &str) -> (f64, f64) {
    reports
        .iter()
        .flat_map(|r| &r.fits)
        .filter(|f| f.norm_kind == norm)
        .filter_map(|f| f.slope)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)))
}

fn product_rates(dir: &Path) -> Result<(bool, String)> {
    let mut pass = true;
    let mut detail = Vec::new();
    for order in 0..=2 {
        let configs = (1..=5)
            .map(|seed| {
                config(
                    &format!("product_N{}_seed{}", order, seed),
                    &random_pair(
                        "product",
                        &order.to_string(),
                        seed,
                        1,
                        "\"l2_operator\", \"l1_operator\", \"linf_operator\"",
                    ),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let reports = run_all(dir, &configs)?;
        pass &= reports.iter().all(|r| r.report.pass);
        for kind in NormKind::ALL {
            let (lo, hi) = slope_span(&reports, kind.name());
            detail.push(format!("N={} {} slopes [{:.3}, {:.3}]", order, kind.name(), lo, hi));
        }
    }
    Ok((pass, detail.join("; ")))
}

fn intertwining(dir: &Path) -> Result<(bool, String)> {
    let exact = (1..=5)
        .map(|seed| {
            config(
                &format!("intertwine_exact_seed{}", seed),
                &format!(
                    "experiment = \"intertwine\"\norder = \"exact\"\nseed = {seed}\nk_min = 8\nk_max = 256\n\
                     [f]\nrandom_bandwidth = 3\n"
                ),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let exact = run_all(dir, &exact)?;
    let signs: Vec<Option<i64>> = exact.iter().map(|r| r.report.sign).collect();
    let sign = signs[0];
    let mut pass = exact.iter().all(|r| r.report.pass) && sign.is_some() && signs.iter().all(|s| *s == sign);
    let mut detail = vec![format!(
        "exact identity with exp({}hbar Laplacian), worst defect {:.3e}",
        match sign {
            Some(1) => "+",
            Some(_) => "-",
            None => "?",
        },
        exact.iter().flat_map(|r| &r.rows).map(|r| r.error).fold(0.0, f64::max)
    )];
    for order in 0..=2 {
        let configs = (1..=5)
            .map(|seed| {
                config(
                    &format!("intertwine_N{}_seed{}", order, seed),
                    &format!(
                        "experiment = \"intertwine\"\norder = {order}\nseed = {seed}\nk_min = 8\nk_max = 256\n\
                         [f]\nrandom_bandwidth = 1\n"
                    ),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let reports = run_all(dir, &configs)?;
        pass &= reports.iter().all(|r| r.report.pass && r.report.sign == sign);
        let (lo, hi) = slope_span(&reports, NormKind::L2Operator.name());
        detail.push(format!("N={} slopes [{:.3}, {:.3}]", order, lo, hi));
    }
    Ok((pass, detail.join("; ")))
}

fn trace(dir: &Path) -> Result<(bool, String)> {
    let mut configs = (1..=5)
        .map(|seed| {
            config(
                &format!("trace_band_limited_seed{}", seed),
                &format!(
                    "experiment = \"trace\"\nseed = {seed}\nk_min = 2\nk_max = 64\nk_rule = \"linear\"\n\
                     [f]\nrandom_bandwidth = 3\n"
                ),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    configs.push(config(
        "trace_band_limited_n2",
        "experiment = \"trace\"\nn = 2\nseed = 1\nk_min = 2\nk_max = 16\nk_rule = \"linear\"\n\
         [f]\nrandom_bandwidth = 1\n",
    )?);
    let band_limited = run_all(dir, &configs)?;
    let smooth = config(
        "trace_smooth",
        "experiment = \"trace\"\nk_min = 16\nk_max = 256\ndecay_power = 4\n\
         [f]\nexpr = \"exp(cos(2*pi*x1))*cos(2*pi*y1)\"\nbandwidth = 12\ngrid = 64\n",
    )?;
    let smooth = run(&smooth, dir)?.report;
    let a = band_limited.iter().all(|r| r.report.pass);
    let b = smooth.report.pass;
    let raw: Vec<String> = smooth.rows.iter().map(|r| format!("{:.2e}", r.error)).collect();
    Ok((
        a && b,
        format!(
            "(a) band-limited exact for k > bandwidth: {}; (b) error k^4 decreasing to the floor: {} (errors {})",
            a,
            b,
            raw.join(", ")
        ),
    ))
}

fn torus(dir: &Path) -> Result<(bool, String)> {
    let configs = [1, 2]
        .iter()
        .map(|n| {
            config(
                &format!("torus_n{}", n),
                &format!("experiment = \"torus_relations\"\nn = {n}\nk_min = 2\nk_max = 16\nk_rule = \"linear\"\n"),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let reports = run_all(dir, &configs)?;
    let sign = reports[0].report.sign;
    let pass = sign.is_some() && reports.iter().all(|r| r.report.pass && r.report.sign == sign);
    let worst = reports.iter().flat_map(|r| &r.rows).map(|r| r.error).fold(0.0, f64::max);
    Ok((
        pass,
        format!("sign s = {:?}, worst defect {:.3e}", sign, worst),
    ))
}

fn norm_bound(dir: &Path) -> Result<(bool, String)> {
    let mut configs = Vec::new();
    for bandwidth in 1..=3 {
        for seed in 1..=3 {
            configs.push(config(
                &format!("norm_bound_B{}_seed{}", bandwidth, seed),
                &format!(
                    "experiment = \"norm_bound\"\nseed = {seed}\nk_min = 8\nk_max = 256\n\
                     [f]\nrandom_bandwidth = {bandwidth}\n"
                ),
            )?);
        }
    }
    for seed in 1..=2 {
        configs.push(config(
            &format!("norm_bound_n2_seed{}", seed),
            &format!(
                "experiment = \"norm_bound\"\nn = 2\nseed = {seed}\nk_min = 4\nk_max = 32\n\
                 [f]\nrandom_bandwidth = 1\n"
            ),
        )?);
    }
    let reports = run_all(dir, &configs)?;
    let worst = reports
        .iter()
        .flat_map(|r| &r.rows)
        .map(|r| r.error / r.tolerance.unwrap_or(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok((
        reports.iter().all(|r| r.report.pass),
        format!("{} functions; largest ||Q_f||_2 / sum |c| = {:.4}", reports.len(), worst),
    ))
}

fn write_suite(dir: &Path, report: &SuiteReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join(format!("{}.toml", report.id)),
        toml::to_string(report).expect("suite serialises"),
    )?;
    Ok(())
}

fn unit_disc(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(rng.random::<f64>().sqrt(), std::f64::consts::TAU * rng.random::<f64>())
}

fn holder(dir: &Path) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(65);
    let mut worst = f64::INFINITY;
    for i in 0..200 {
        let size = 2 + (i * 31) % 63;
        let a = DMatrix::from_fn(size, size, |_, _| unit_disc(&mut rng));
        worst = worst.min(holder_slack(&a)?);
    }
    let identity_gap = holder_slack(&DMatrix::<Complex64>::identity(16, 16))?.abs();
    let checks = vec![
        SuiteCheck {
            name: "random_matrices_min_slack".into(),
            pass: worst >= -1e-9,
            worst,
            count: 200,
        },
        SuiteCheck {
            name: "identity_equality".into(),
            pass: identity_gap <= 1e-12,
            worst: identity_gap,
            count: 1,
        },
    ];
    let pass = checks.iter().all(|c| c.pass);
    write_suite(
        dir,
        &SuiteReport {
            id: "holder".into(),
            pass,
            checks,
        },
    )?;
    Ok((
        pass,
        format!("200 matrices of sizes 2..64, minimum slack {:.3e}; identity gap {:.1e}", worst, identity_gap),
    ))
}

fn riemann(dir: &Path) -> Result<(bool, String)> {
    let smooth = config(
        "riemann_smooth",
        "experiment = \"riemann\"\nk_min = 8\nk_max = 128\ndecay_power = 4\n\
         [f]\nexpr = \"exp(cos(2*pi*y1))\"\nbandwidth = 1\n",
    )?;
    let band_limited = config(
        "riemann_band_limited",
        "experiment = \"riemann\"\nk_min = 2\nk_max = 32\nk_rule = \"linear\"\n[f]\nterms = [\n\
         { p = [0], q = [0], re = 0.7, im = 0.0 },\n\
         { p = [0], q = [1], re = 0.2, im = -0.4 },\n\
         { p = [0], q = [-3], re = -0.5, im = 0.1 },\n\
         { p = [0], q = [5], re = 0.3, im = 0.3 },\n]\n",
    )?;
    let band_limited_2d = config(
        "riemann_band_limited_n2",
        "experiment = \"riemann\"\nn = 2\nk_min = 2\nk_max = 12\nk_rule = \"linear\"\n[f]\nterms = [\n\
         { p = [0, 0], q = [0, 0], re = 1.0, im = 0.0 },\n\
         { p = [0, 0], q = [2, -1], re = 0.4, im = 0.2 },\n\
         { p = [0, 0], q = [0, 2], re = -0.3, im = 0.0 },\n]\n",
    )?;
    let reports = run_all(dir, &[smooth, band_limited, band_limited_2d])?;
    let raw: Vec<String> = reports[0].rows.iter().map(|r| format!("{:.2e}", r.error)).collect();
    Ok((
        reports.iter().all(|r| r.report.pass),
        format!(
            "smooth decay: {}; band-limited exact: {} (smooth errors {})",
            reports[0].report.pass,
            reports[1].report.pass && reports[2].report.pass,
            raw.join(", ")
        ),
    ))
}

fn restrict(f: &TrigPoly, keep: impl Fn(&FreqVector, &FreqVector) -> bool) -> TrigPoly {
    let terms: Vec<_> = f
        .terms()
        .filter(|(m, _)| keep(&m.p, &m.q))
        .map(|(m, c)| (m.p.clone(), m.q.clone(), *c))
        .collect();
    TrigPoly::from_terms(f.dim(), terms).expect("dimensions agree")
}

struct Tally {
    pass: bool,
    worst: f64,
    count: usize,
}

impl Tally {
    fn new() -> Self {
        Tally {
            pass: true,
            worst: 0.0,
            count: 0,
        }
    }

    /// Records `defect` against the relative tolerance `1e-10 scale`.
    fn record(&mut self, defect: f64, scale: f64) {
        let relative = defect / scale.max(1.0);
        self.worst = self.worst.max(relative);
        self.pass &= relative <= 1e-10;
        self.count += 1;
    }

    fn into_check(self, name: &str) -> SuiteCheck {
        SuiteCheck {
            name: name.into(),
            pass: self.pass,
            worst: self.worst,
            count: self.count,
        }
    }
}

fn algebra(dir: &Path) -> Result<(bool, String)> {
    const ORDER: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut separation = Tally::new();
    let mut poisson = Tally::new();
    let mut cyclic = Tally::new();
    let mut associative = Tally::new();
    for n in [1, 2] {
        for _ in 0..4 {
            let f = random_trig_poly(n, 2, &mut rng);
            let g = random_trig_poly(n, 2, &mut rng);
            let x_only = restrict(&f, |_, q| q.is_zero());
            let y_only = restrict(&g, |p, _| p.is_zero());
            // star: f constant in y on the left, or g constant in x on the right
            for (o, left, right) in [
                (Orientation::Star, &x_only, &g),
                (Orientation::Star, &f, &y_only),
                (Orientation::CheckStar, &y_only, &g),
                (Orientation::CheckStar, &f, &x_only),
            ] {
                let series = star_truncated(left, right, ORDER, o)?;
                let scale = left.l1_norm() * right.l1_norm();
                for c in &series.coefficients()[1..] {
                    separation.record(c.l1_norm(), scale);
                }
            }
            let bracket = f.poisson_bracket(&g)?.scale(Complex64::new(0.0, 0.5 / std::f64::consts::PI));
            for o in Orientation::ALL {
                let fg = star_truncated(&f, &g, ORDER, o)?;
                let gf = star_truncated(&g, &f, ORDER, o)?;
                let commutator = fg.coefficient(1).sub(gf.coefficient(1))?;
                poisson.record(commutator.distance_l1(&bracket)?, bracket.l1_norm());
                for i in 0..=ORDER {
                    let a = fg.coefficient(i).constant_term();
                    let b = gf.coefficient(i).constant_term();
                    cyclic.record((a - b).norm(), fg.coefficient(i).l1_norm());
                }
            }
        }
    }
    for _ in 0..50 {
        let n = rng.random_range(1..=2);
        let monomial = |rng: &mut ChaCha8Rng| {
            let p: Vec<i64> = (0..n).map(|_| rng.random_range(-3..=3)).collect();
            let q: Vec<i64> = (0..n).map(|_| rng.random_range(-3..=3)).collect();
            TrigPoly::monomial(p.into(), q.into(), unit_disc(rng))
        };
        let (f, g, h) = (monomial(&mut rng)?, monomial(&mut rng)?, monomial(&mut rng)?);
        let level = HbarValue::new(rng.random_range(2..=64))?;
        for o in Orientation::ALL {
            let left = star_exact(&star_exact(&f, &g, level, o)?, &h, level, o)?;
            let right = star_exact(&f, &star_exact(&g, &h, level, o)?, level, o)?;
            associative.record(left.distance_l1(&right)?, f.l1_norm() * g.l1_norm() * h.l1_norm());
        }
    }
    let checks = vec![
        separation.into_check("separation_of_variables"),
        poisson.into_check("poisson_compatibility"),
        cyclic.into_check("trace_cyclicity"),
        associative.into_check("exact_associativity"),
    ];
    let pass = checks.iter().all(|c| c.pass);
    let detail = checks
        .iter()
        .map(|c| format!("{} {} ({} cases, worst {:.1e})", c.name, if c.pass { "ok" } else { "FAILED" }, c.count, c.worst))
        .collect::<Vec<_>>()
        .join("; ");
    write_suite(
        dir,
        &SuiteReport {
            id: "algebra".into(),
            pass,
            checks,
        },
    )?;
    Ok((pass, detail))
}
