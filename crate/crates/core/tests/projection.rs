use num_complex::Complex64;
use proptest::collection::vec;
use proptest::prelude::*;

use torus_quant::func_expr::{parse, project, ProjectionSpec};
use torus_quant::trig_poly::{FreqVector, TrigPoly};

/// `a cos(2 pi (p.x + q.y)) + b sin(2 pi (p.x + q.y))` as source text and as coefficients.
fn real_term(p: &[i64], q: &[i64], a: f64, b: f64) -> (String, TrigPoly) {
    let n = p.len();
    let mut phase = Vec::new();
    for (axis, (pi, qi)) in p.iter().zip(q).enumerate() {
        phase.push(format!("{}*x{}", pi, axis + 1));
        phase.push(format!("{}*y{}", qi, axis + 1));
    }
    let phase = phase.join(" + ");
    let text = format!("({a})*cos(2*pi*({phase})) + ({b})*sin(2*pi*({phase}))");
    let pv = FreqVector::new(p.to_vec());
    let qv = FreqVector::new(q.to_vec());
    // cos t = (e^{it} + e^{-it}) / 2, sin t = (e^{it} - e^{-it}) / 2i
    let plus = Complex64::new(a / 2.0, -b / 2.0);
    let minus = Complex64::new(a / 2.0, b / 2.0);
    let poly = TrigPoly::from_terms(n, [(pv.clone(), qv.clone(), plus), (pv.neg(), qv.neg(), minus)]).unwrap();
    (text, poly)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_is_exact_on_band_limited_input(
        n in 1..=2usize,
        terms in vec((vec(-3i64..=3, 2), vec(-3i64..=3, 2), -1.0..1.0f64, -1.0..1.0f64), 1..4),
    ) {
        let mut text = Vec::new();
        let mut expected = TrigPoly::zero(n);
        for (p, q, a, b) in &terms {
            let (t, poly) = real_term(&p[..n], &q[..n], *a, *b);
            text.push(t);
            expected = expected.add(&poly).unwrap();
        }
        let ast = parse(&text.join(" + ")).unwrap();
        let spec = ProjectionSpec::new(3, if n == 1 { 16 } else { 8 }).unwrap();
        let got = project(&ast, n, &spec).unwrap();
        prop_assert!(got.distance_l1(&expected).unwrap() <= 1e-12 * (1.0 + expected.len() as f64));
    }
}

#[test]
fn smooth_coefficients_decay_super_polynomially() {
    let ast = parse("exp(cos(2*pi*x1))").unwrap();
    let f = project(&ast, 1, &ProjectionSpec::new(12, 64).unwrap()).unwrap();
    let scaled: Vec<f64> = (4..=12)
        .map(|p| f.coefficient(&FreqVector::new(vec![p]), &FreqVector::zero(1)).norm() * (p as f64).powi(6))
        .collect();
    assert!(scaled.windows(2).all(|w| w[1] < w[0]), "{:?}", scaled);
    // oracle: exp(cos t) = I_0(1) + 2 sum_p I_p(1) cos(p t)
    let bessel = |order: i32| -> f64 {
        (0..30)
            .map(|m| 0.5f64.powi(2 * m + order) / (factorial(m) * factorial(m + order)))
            .sum()
    };
    for p in 0..=6 {
        let c = f.coefficient(&FreqVector::new(vec![p]), &FreqVector::zero(1));
        assert!((c.re - bessel(p as i32)).abs() < 1e-14, "p = {}", p);
    }
}

fn factorial(m: i32) -> f64 {
    (1..=m).map(f64::from).product()
}

#[test]
fn doubling_the_grid_changes_little() {
    for (src, n, b) in [
        ("exp(cos(2*pi*x1))*cos(2*pi*y1)", 1, 12),
        ("exp(sin(2*pi*x1) + cos(2*pi*y1))", 1, 12),
        ("exp(cos(2*pi*x1))", 1, 12),
        ("cos(2*pi*(x1 + y2))*exp(sin(2*pi*x2)/2)", 2, 4),
    ] {
        let ast = parse(src).unwrap();
        let coarse = project(&ast, n, &ProjectionSpec::with_default_grid(b)).unwrap();
        let fine = project(&ast, n, &ProjectionSpec::new(b, 2 * ProjectionSpec::with_default_grid(b).grid).unwrap()).unwrap();
        let worst = coarse
            .terms()
            .chain(fine.terms())
            .map(|(m, _)| (coarse.coefficient(&m.p, &m.q) - fine.coefficient(&m.p, &m.q)).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "{}: {}", src, worst);
    }
}
