//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 1-9 come from the `check` suite; each line is then re-derived
//! from the written reports where an independent recomputation is cheap.
//! Criterion 10 runs the suite a second time and compares every file.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use torus_quant::check::{run_check, CheckSummary};
use torus_quant::cli::{without_timing, ReportFile};

/// Bypasses libtest output capture so the lines show in a plain `cargo test` run.
macro_rules! say {
    ($($arg:tt)*) => {
        writeln!(std::io::stderr(), $($arg)*).unwrap()
    };
}

const SUITE_BUDGET: Duration = Duration::from_secs(300);

fn reports(dir: &Path) -> Vec<ReportFile> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    paths
        .iter()
        .filter_map(|p| ReportFile::from_toml(&fs::read_to_string(p).unwrap()).ok())
        .collect()
}

fn all_files(root: &Path) -> BTreeMap<PathBuf, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let text = fs::read_to_string(&path).unwrap();
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), without_timing(&text));
            }
        }
    }
    out
}

/// Least-squares slope of `log error` against `log hbar`, above the floor.
fn refit(points: &[(f64, f64)]) -> Option<f64> {
    let used: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1 > 1e-13).collect();
    if used.len() < 3 {
        return None;
    }
    let xs: Vec<f64> = used.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(num / den)
}

fn rates_hold(reports: &[ReportFile], prefix: &str, norms: &[&str]) -> bool {
    let mut ok = true;
    for r in reports.iter().filter(|r| r.report.id.starts_with(prefix)) {
        let order = r.config.order.truncation().unwrap() as f64;
        for norm in norms {
            let points: Vec<(f64, f64)> = r
                .rows
                .iter()
                .filter(|row| row.norm_kind == *norm)
                .map(|row| (row.hbar, row.error))
                .collect();
            let slope = refit(&points);
            let inside = slope.is_some_and(|s| s >= order + 0.8 && s <= order + 2.2);
            if !inside {
                say!("    {} {}: slope {:?} outside [{}, {}]", r.report.id, norm, slope, order + 0.8, order + 2.2);
            }
            ok &= inside;
        }
    }
    ok
}

fn line(number: u8, pass: bool, text: &str) -> bool {
    say!("criterion {:>2}: {} {}", number, if pass { "PASS" } else { "FAIL" }, text);
    pass
}

#[test]
fn acceptance_criteria() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let summary: CheckSummary = run_check(first.path()).unwrap();
    let elapsed = start.elapsed();
    let root = first.path();
    let by_number = |n: u8| summary.criteria.iter().find(|c| c.number == n).unwrap();
    let mut results = Vec::new();

    // 1: recheck every row against 1e-10 (1 + ||Q_f|| ||Q_g||), tolerance stored per row
    let c1 = reports(&root.join("c01"));
    let ok = c1.len() == 10
        && c1.iter().all(|r| r.rows.len() == 6 && r.rows.iter().all(|row| row.error <= row.tolerance.unwrap()));
    results.push(line(1, ok && by_number(1).pass, &by_number(1).detail));

    // 2: refit all three norms from the raw rows
    let c2 = reports(&root.join("c02"));
    let ok = c2.len() == 15 && rates_hold(&c2, "product_N", &["l2_operator", "l1_operator", "linf_operator"]);
    results.push(line(2, ok && by_number(2).pass, &by_number(2).detail));

    // 3: exact rows under 1e-10 with one recorded sign, then refit the truncated sweeps
    let c3 = reports(&root.join("c03"));
    let exact: Vec<&ReportFile> = c3.iter().filter(|r| r.report.id.starts_with("intertwine_exact")).collect();
    let sign = exact.first().and_then(|r| r.report.sign);
    let ok = exact.len() == 5
        && sign.is_some()
        && exact.iter().all(|r| r.report.sign == sign && r.rows.iter().all(|row| row.error <= 1e-10))
        && rates_hold(&c3, "intertwine_N", &["l2_operator"]);
    results.push(line(3, ok && by_number(3).pass, &by_number(3).detail));

    // 4: (a) rows past the bandwidth; (b) raw trace errors with the floor applied
    let c4 = reports(&root.join("c04"));
    let a_ok = c4
        .iter()
        .filter(|r| r.report.id.starts_with("trace_band_limited"))
        .all(|r| r.rows.iter().all(|row| row.tolerance.is_none_or(|t| row.error <= t)));
    let smooth = c4.iter().find(|r| r.report.id == "trace_smooth").unwrap();
    let scaled: Vec<f64> = smooth
        .rows
        .iter()
        .map(|row| if row.error <= 1e-13 { 0.0 } else { row.error * (row.k as f64).powi(4) })
        .collect();
    say!("    trace_smooth raw errors: {:?}", smooth.rows.iter().map(|r| r.error).collect::<Vec<_>>());
    say!("    trace_smooth error*k^4 with floor: {:?}", scaled);
    let b_ok = scaled.windows(2).all(|w| w[1] == 0.0 || w[1] < w[0]);
    results.push(line(4, a_ok && b_ok && by_number(4).pass, &by_number(4).detail));

    // 5: every row under 1e-12, one sign for n = 1 and n = 2
    let c5 = reports(&root.join("c05"));
    let ok = c5.len() == 2
        && c5[0].report.sign.is_some()
        && c5.iter().all(|r| r.report.sign == c5[0].report.sign && r.rows.iter().all(|row| row.error <= 1e-12));
    results.push(line(5, ok && by_number(5).pass, &by_number(5).detail));

    // 6: recompute sum |c| from the echoed seeds is what the tolerance column records; compare every row
    let c6 = reports(&root.join("c06"));
    let ok = !c6.is_empty()
        && c6
            .iter()
            .all(|r| r.rows.iter().all(|row| row.error <= row.tolerance.unwrap() * (1.0 + 1e-12)));
    results.push(line(6, ok && by_number(6).pass, &by_number(6).detail));

    // 7: independent sample with the SVD as the 2-norm oracle
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = f64::INFINITY;
    for i in 0..200 {
        let d = 2 + (i * 17) % 63;
        let a = DMatrix::from_fn(d, d, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let l2 = a.clone().svd(false, false).singular_values.max();
        let l1 = a.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
        let linf = a.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
        worst = worst.min((l1 * linf).sqrt() - l2);
    }
    say!("    svd oracle minimum slack {:e}", worst);
    results.push(line(7, worst >= -1e-9 && by_number(7).pass, &by_number(7).detail));

    // 8: smooth profile decay with the floor applied; band-limited rows past the bandwidth
    let c8 = reports(&root.join("c08"));
    let smooth = c8.iter().find(|r| r.report.id == "riemann_smooth").unwrap();
    let scaled: Vec<f64> = smooth
        .rows
        .iter()
        .map(|row| if row.error <= 1e-13 { 0.0 } else { row.error * (row.k as f64).powi(4) })
        .collect();
    say!("    riemann_smooth raw errors: {:?}", smooth.rows.iter().map(|r| r.error).collect::<Vec<_>>());
    let ok = scaled.windows(2).all(|w| w[1] == 0.0 || w[1] < w[0])
        && c8
            .iter()
            .filter(|r| r.report.id.starts_with("riemann_band_limited"))
            .all(|r| r.rows.iter().all(|row| row.tolerance.is_none_or(|t| row.error <= t)));
    results.push(line(8, ok && by_number(8).pass, &by_number(8).detail));

    // 9: suite report
    let algebra: toml::Value = toml::from_str(&fs::read_to_string(root.join("c09/algebra.toml")).unwrap()).unwrap();
    let ok = algebra["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["pass"].as_bool().unwrap() && c["worst"].as_float().unwrap() <= 1e-10);
    results.push(line(9, ok && by_number(9).pass, &by_number(9).detail));

    // 10: second run, byte comparison modulo [timing], wall time budget
    run_check(second.path()).unwrap();
    let a = all_files(first.path());
    let b = all_files(second.path());
    let identical = a == b;
    let differing: Vec<_> = a.keys().filter(|k| a.get(*k) != b.get(*k)).take(3).collect();
    results.push(line(
        10,
        identical && elapsed < SUITE_BUDGET,
        &format!(
            "{} files identical modulo timing: {} {:?}; suite wall time {:.1}s (budget {}s)",
            a.len(),
            identical,
            differing,
            elapsed.as_secs_f64(),
            SUITE_BUDGET.as_secs()
        ),
    ));

    assert!(results.iter().all(|&r| r), "some acceptance criteria failed");
}
