use std::fs;
use std::path::Path;
use std::process::Command;

use torus_quant::cli::{run, without_timing, ReportFile, CSV_HEADER};
use torus_quant::config::parse_config;

const FULL_CONFIG: &str = r#"
experiment = "product"
id = "golden"
n = 1
k_min = 4
k_max = 16
order = 2
seed = 42
polarization = "P_T"
norms = ["l2", "l1_operator"]

[f]
expr = "cos(2*pi*(x1 + y1))"
expr_im = "sin(2*pi*y1)"
bandwidth = 2

[g]
terms = [{ p = [1], q = [0], re = 0.5, im = -0.5 }]

[output]
report = "golden.toml"
csv = "golden.csv"
"#;

const CANONICAL: &str = r#"experiment = "product"
id = "golden"
n = 1
k_min = 4
k_max = 16
k_rule = "powers_of_two"
k_step = 1
order = 2
seed = 42
orientation = "star"
polarization = "P_T"
norms = ["l2_operator", "l1_operator"]

[f]
expr = "cos(2*pi*(x1 + y1))"
expr_im = "sin(2*pi*y1)"
bandwidth = 2
grid = 16

[[g.terms]]
p = [1]
q = [0]
re = 0.5
im = -0.5

[output]
report = "golden.toml"
csv = "golden.csv"
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_torus-quant"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn keys(table: &toml::Value) -> Vec<String> {
    table.as_table().unwrap().keys().cloned().collect()
}

#[test]
fn config_schema_is_frozen() {
    let config = parse_config(FULL_CONFIG).unwrap();
    assert_eq!(config.canonical_toml(), CANONICAL);
    assert_eq!(parse_config(CANONICAL).unwrap(), config);
}

#[test]
fn report_schema_is_frozen() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&parse_config(FULL_CONFIG).unwrap(), dir.path()).unwrap();
    let text = fs::read_to_string(&out.report_path).unwrap();
    let value: toml::Value = toml::from_str(&text).unwrap();
    let mut top = keys(&value);
    top.sort();
    assert_eq!(top, ["config", "fits", "report", "rows", "timing"]);
    let mut header = keys(&value["report"]);
    header.sort();
    assert_eq!(header, ["config_hash", "experiment", "id", "notes", "outcome", "pass", "seed"]);
    let mut row = keys(&value["rows"][0]);
    row.sort();
    assert_eq!(row, ["error", "hbar", "k", "norm_kind"]);
    let mut fit = keys(&value["fits"][0]);
    fit.sort();
    assert_eq!(
        fit,
        ["excluded_k", "expected_slope", "norm_kind", "outcome", "pass", "residual", "slope", "used", "window_high", "window_low"]
    );
    let mut timing = keys(&value["timing"]);
    timing.sort();
    assert_eq!(timing, ["timestamp", "wall_time_s"]);

    let report = ReportFile::from_toml(&text).unwrap();
    assert!(report.hash_matches());
    let ks: Vec<usize> = report.rows.iter().map(|r| r.k).collect();
    assert!(ks.windows(2).all(|w| w[0] <= w[1]));

    let csv = fs::read_to_string(&out.csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), report.rows.len());
}

#[test]
fn tampered_config_breaks_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&parse_config(FULL_CONFIG).unwrap(), dir.path()).unwrap();
    let mut report = out.report;
    report.config.seed += 1;
    assert!(!report.hash_matches());
}

#[test]
fn runs_are_deterministic_modulo_timing() {
    let config = parse_config(FULL_CONFIG).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run(&config, a.path()).unwrap();
    let rb = run(&config, b.path()).unwrap();
    let ta = fs::read_to_string(&ra.report_path).unwrap();
    let tb = fs::read_to_string(&rb.report_path).unwrap();
    assert!(ta.contains("[timing]"));
    assert!(!without_timing(&ta).contains("wall_time_s"));
    assert_eq!(without_timing(&ta), without_timing(&tb));
    assert_eq!(fs::read(&ra.csv_path).unwrap(), fs::read(&rb.csv_path).unwrap());
}

#[test]
fn torus_relations_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "torus.toml",
        "experiment = \"torus_relations\"\nn = 1\nk_min = 2\nk_max = 64\nk_rule = \"linear\"\n",
    );
    let out = dir.path().join("out");
    let status = bin().arg("run").arg(&config).arg("--out").arg(&out).arg("--quiet").status().unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("errors.csv")).unwrap();
    let defects: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(defects.len(), 63);
    assert!(defects.iter().all(|d| *d <= 1e-12));
    let report = ReportFile::from_toml(&fs::read_to_string(out.join("report.toml")).unwrap()).unwrap();
    assert_eq!(report.report.sign, Some(-1));
}

#[test]
fn trace_run_on_band_limited_input() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "trace.toml",
        "experiment = \"trace\"\nk_min = 2\nk_max = 12\nk_rule = \"linear\"\n[f]\nterms = [\n\
         { p = [0], q = [0], re = 1.5, im = 0.0 },\n\
         { p = [3], q = [0], re = 0.5, im = 0.0 },\n\
         { p = [0], q = [-3], re = 0.0, im = 2.0 },\n]\n",
    );
    let out = dir.path().join("out");
    let status = bin().args(["run", "--quiet", "--config"]).arg(&config).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let report = ReportFile::from_toml(&fs::read_to_string(out.join("report.toml")).unwrap()).unwrap();
    for row in &report.rows {
        if row.k > 3 {
            assert!(row.error <= 1e-12, "k = {}: {}", row.k, row.error);
        }
    }
    // k = 3 aliases the p = 3 and q = -3 modes onto the diagonal and the mean
    let k3 = report.rows.iter().find(|r| r.k == 3).unwrap();
    assert!(k3.error > 0.1);
}

#[test]
fn product_with_constant_is_an_exact_identity() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "product.toml",
        "experiment = \"product\"\norder = 1\nk_min = 8\nk_max = 64\n\
         [f]\nterms = [{ p = [0], q = [0], re = 2.0, im = 0.0 }]\n[g]\nrandom_bandwidth = 2\n",
    );
    let out = dir.path().join("out");
    assert!(bin().arg("run").arg(&config).arg("--out").arg(&out).arg("--quiet").status().unwrap().success());
    let report = ReportFile::from_toml(&fs::read_to_string(out.join("report.toml")).unwrap()).unwrap();
    assert_eq!(report.report.outcome, "exact identity");
    assert!(report.report.pass);
}

#[test]
fn assemble_writes_golden_shift_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "shift.toml",
        "experiment = \"norm_bound\"\nk_min = 3\nk_max = 3\n[f]\nterms = [{ p = [1], q = [0], re = 1.0, im = 0.0 }]\n",
    );
    let out = dir.path().join("out");
    assert!(bin().arg("assemble").arg(&config).arg("--out").arg(&out).arg("--quiet").status().unwrap().success());
    assert_eq!(
        fs::read_to_string(out.join("toeplitz_k3.csv")).unwrap(),
        "row,col,re,im\n0,2,1,0\n1,0,1,0\n2,1,1,0\n"
    );
}

#[test]
fn star_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "star.toml",
        "experiment = \"star_table\"\norder = 1\n\
         [f]\nterms = [{ p = [0], q = [1], re = 1.0, im = 0.0 }]\n\
         [g]\nterms = [{ p = [1], q = [0], re = 1.0, im = 0.0 }]\n",
    );
    let output = bin().arg("star").arg(&config).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "order\tp\tq\tre\tim");
    // C_1(e^{2 pi i y}, e^{2 pi i x}) = (1 / 2 pi i) (2 pi i)(2 pi i) e^{2 pi i (x + y)} = 2 pi i e^{...}
    assert_eq!(rows[1], "0\t[1]\t[1]\t1\t0");
    let last: Vec<&str> = rows[2].split('\t').collect();
    assert_eq!(&last[..3], ["1", "[1]", "[1]"]);
    assert!(last[3].parse::<f64>().unwrap().abs() < 1e-12);
    assert!((last[4].parse::<f64>().unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "bad.toml", "experiment = \"torus_relations\"\nk_min = 1\n");
    let output = bin().arg("run").arg(&config).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8(output.stderr).unwrap();
    assert!(err.contains("k_min"), "{}", err);
}

#[test]
fn failing_run_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // random full-box bandwidth-3 input is pre-asymptotic at k = 8, so the N = 0 rate fit misses its window
    let config = write(
        dir.path(),
        "slow.toml",
        "experiment = \"product\"\nseed = 3\nk_min = 8\nk_max = 32\n[f]\nrandom_bandwidth = 3\n[g]\nrandom_bandwidth = 3\n",
    );
    let output = bin().arg("run").arg(&config).arg("--out").arg(dir.path()).arg("--quiet").output().unwrap();
    let report = ReportFile::from_toml(&fs::read_to_string(dir.path().join("report.toml")).unwrap()).unwrap();
    assert_eq!(output.status.code(), Some(if report.report.pass { 0 } else { 1 }));
}
