use num_complex::Complex64;
use proptest::collection::vec;
use proptest::prelude::*;

use torus_quant::star_products::{
    berezin_transform_exact, bidiff, heat_flow_exact, star_exact, star_truncated, HbarValue, Orientation,
};
use torus_quant::trig_poly::{FreqVector, TrigPoly};

const MAX_FREQ: i64 = 2;

fn poly_in(n: usize, max_terms: usize) -> impl Strategy<Value = TrigPoly> {
    vec(
        (
            vec(-MAX_FREQ..=MAX_FREQ, n),
            vec(-MAX_FREQ..=MAX_FREQ, n),
            -1.0..1.0f64,
            -1.0..1.0f64,
        ),
        1..=max_terms,
    )
    .prop_map(move |terms| {
        TrigPoly::from_terms(
            n,
            terms
                .into_iter()
                .map(|(p, q, re, im)| (FreqVector::new(p), FreqVector::new(q), Complex64::new(re, im))),
        )
        .unwrap()
    })
}

fn pair() -> impl Strategy<Value = (TrigPoly, TrigPoly)> {
    (1..=2usize).prop_flat_map(|n| (poly_in(n, 5), poly_in(n, 5)))
}

fn triple() -> impl Strategy<Value = (TrigPoly, TrigPoly, TrigPoly)> {
    (1..=2usize).prop_flat_map(|n| (poly_in(n, 4), poly_in(n, 4), poly_in(n, 4)))
}

fn close(a: &TrigPoly, b: &TrigPoly, scale: f64) -> bool {
    a.distance_l1(b).unwrap() <= 1e-10 * scale.max(1.0)
}

fn orientation() -> impl Strategy<Value = Orientation> {
    prop_oneof![
        Just(Orientation::Star),
        Just(Orientation::CheckStar),
        Just(Orientation::Moyal)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multiplication_is_a_commutative_ring((f, g, h) in triple()) {
        let scale = f.l1_norm() * g.l1_norm() * h.l1_norm();
        prop_assert!(close(&f.multiply(&g).unwrap(), &g.multiply(&f).unwrap(), scale));
        let left = f.multiply(&g).unwrap().multiply(&h).unwrap();
        let right = f.multiply(&g.multiply(&h).unwrap()).unwrap();
        prop_assert!(close(&left, &right, scale));
        let distributed = f.multiply(&g).unwrap().add(&f.multiply(&h).unwrap()).unwrap();
        prop_assert!(close(&f.multiply(&g.add(&h).unwrap()).unwrap(), &distributed, scale));
        prop_assert!(close(&f.multiply(&TrigPoly::one(f.dim())).unwrap(), &f, 1.0));
    }

    #[test]
    fn leibniz_rule((f, g) in pair()) {
        let fg = f.multiply(&g).unwrap();
        let scale = (1.0 + f.l1_norm() * g.l1_norm()) * 50.0;
        for axis in 0..f.dim() {
            let dx = f.d_x(axis).multiply(&g).unwrap().add(&f.multiply(&g.d_x(axis)).unwrap()).unwrap();
            prop_assert!(close(&fg.d_x(axis), &dx, scale));
            let dy = f.d_y(axis).multiply(&g).unwrap().add(&f.multiply(&g.d_y(axis)).unwrap()).unwrap();
            prop_assert!(close(&fg.d_y(axis), &dy, scale));
        }
    }

    #[test]
    fn poisson_bracket_is_a_lie_bracket((f, g, h) in triple()) {
        let fg = f.poisson_bracket(&g).unwrap();
        let gf = g.poisson_bracket(&f).unwrap();
        let scale = 1e3 * (1.0 + f.l1_norm() * g.l1_norm() * h.l1_norm());
        prop_assert!(close(&fg.add(&gf).unwrap(), &TrigPoly::zero(f.dim()), scale));
        let jacobi = f.poisson_bracket(&g.poisson_bracket(&h).unwrap()).unwrap()
            .add(&g.poisson_bracket(&h.poisson_bracket(&f).unwrap()).unwrap()).unwrap()
            .add(&h.poisson_bracket(&f.poisson_bracket(&g).unwrap()).unwrap()).unwrap();
        prop_assert!(close(&jacobi, &TrigPoly::zero(f.dim()), 1e3 * scale));
    }

    #[test]
    fn evaluation_is_periodic(f in (1..=2usize).prop_flat_map(|n| poly_in(n, 6)), seed in vec(0.0..1.0f64, 4), axis in 0..2usize) {
        let n = f.dim();
        let x: Vec<f64> = seed[..n].to_vec();
        let y: Vec<f64> = seed[2..2 + n].to_vec();
        let axis = axis % n;
        let base = f.evaluate(&x, &y).unwrap();
        let mut shifted = x.clone();
        shifted[axis] += 1.0;
        prop_assert!((f.evaluate(&shifted, &y).unwrap() - base).norm() <= 1e-12 * (1.0 + f.l1_norm()));
        let mut shifted = y.clone();
        shifted[axis] -= 1.0;
        prop_assert!((f.evaluate(&x, &shifted).unwrap() - base).norm() <= 1e-12 * (1.0 + f.l1_norm()));
    }

    #[test]
    fn fibrewise_decomposition_reconstructs(f in (1..=2usize).prop_flat_map(|n| poly_in(n, 8))) {
        let n = f.dim();
        let mut rebuilt = TrigPoly::zero(n);
        for fibre in f.fibrewise_decomposition() {
            let terms: Vec<_> = fibre
                .profile
                .iter()
                .map(|(q, c)| (fibre.m.clone(), q.clone(), *c))
                .collect();
            rebuilt = rebuilt.add(&TrigPoly::from_terms(n, terms).unwrap()).unwrap();
        }
        prop_assert_eq!(rebuilt, f);
    }

    #[test]
    fn separation_of_variables((f, g) in pair()) {
        let x_only = keep(&f, |_, q| q.is_zero());
        let y_only = keep(&g, |p, _| p.is_zero());
        for (o, left, right) in [
            (Orientation::Star, &x_only, &g),
            (Orientation::Star, &f, &y_only),
            (Orientation::CheckStar, &y_only, &g),
            (Orientation::CheckStar, &f, &x_only),
        ] {
            let series = star_truncated(left, right, 4, o).unwrap();
            for c in &series.coefficients()[1..] {
                prop_assert!(c.is_zero() || c.l1_norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn first_order_commutator_is_poisson((f, g) in pair(), o in orientation()) {
        let commutator = bidiff(1, &f, &g, o).unwrap().sub(&bidiff(1, &g, &f, o).unwrap()).unwrap();
        let bracket = f.poisson_bracket(&g).unwrap().scale(Complex64::new(0.0, 0.5 / std::f64::consts::PI));
        prop_assert!(close(&commutator, &bracket, 1e2 * (1.0 + bracket.l1_norm())));
    }

    #[test]
    fn trace_is_cyclic_order_by_order((f, g) in pair(), o in orientation()) {
        for order in 0..=4 {
            let a = bidiff(order, &f, &g, o).unwrap();
            let b = bidiff(order, &g, &f, o).unwrap();
            let scale = 1.0 + a.l1_norm();
            prop_assert!((a.constant_term() - b.constant_term()).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn exact_star_is_associative((f, g, h) in triple(), k in 2u64..=64, o in orientation()) {
        let level = HbarValue::new(k).unwrap();
        let left = star_exact(&star_exact(&f, &g, level, o).unwrap(), &h, level, o).unwrap();
        let right = star_exact(&f, &star_exact(&g, &h, level, o).unwrap(), level, o).unwrap();
        prop_assert!(close(&left, &right, f.l1_norm() * g.l1_norm() * h.l1_norm()));
    }

    #[test]
    fn berezin_transform_maps_check_star_to_star((f, g) in pair(), k in 2u64..=64) {
        // exp(-hbar Laplacian)(f *check g) = (exp(-hbar Laplacian) f) * (exp(-hbar Laplacian) g)
        let level = HbarValue::new(k).unwrap();
        let left = berezin_transform_exact(&star_exact(&f, &g, level, Orientation::CheckStar).unwrap(), level);
        let right = star_exact(
            &berezin_transform_exact(&f, level),
            &berezin_transform_exact(&g, level),
            level,
            Orientation::Star,
        )
        .unwrap();
        prop_assert!(close(&left, &right, f.l1_norm() * g.l1_norm()));
        let back = heat_flow_exact(&berezin_transform_exact(&f, level), 1, level);
        prop_assert!(close(&back, &f, f.l1_norm()));
    }
}

fn keep(f: &TrigPoly, pred: impl Fn(&FreqVector, &FreqVector) -> bool) -> TrigPoly {
    let terms: Vec<_> = f
        .terms()
        .filter(|(m, _)| pred(&m.p, &m.q))
        .map(|(m, c)| (m.p.clone(), m.q.clone(), *c))
        .collect();
    TrigPoly::from_terms(f.dim(), terms).unwrap()
}

/// Least-squares slope of `log y` against `log x`.
fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

#[test]
fn truncation_is_the_taylor_expansion_of_the_exact_product() {
    let f = TrigPoly::from_terms(
        1,
        [
            ([1].into(), [2].into(), Complex64::new(0.7, 0.1)),
            ([-1].into(), [1].into(), Complex64::new(-0.2, 0.4)),
            ([0].into(), [-1].into(), Complex64::new(0.3, 0.0)),
        ],
    )
    .unwrap();
    let g = TrigPoly::from_terms(
        1,
        [
            ([2].into(), [-1].into(), Complex64::new(0.5, -0.5)),
            ([1].into(), [1].into(), Complex64::new(0.1, 0.9)),
            ([-1].into(), [0].into(), Complex64::new(0.6, 0.0)),
        ],
    )
    .unwrap();
    for o in Orientation::ALL {
        for order in 0..=3 {
            let series = star_truncated(&f, &g, order, o).unwrap();
            let points: Vec<(f64, f64)> = (4..=10)
                .map(|e| {
                    let k = 1u64 << e;
                    let level = HbarValue::new(k).unwrap();
                    let exact = star_exact(&f, &g, level, o).unwrap();
                    (level.hbar(), exact.distance_l1(&series.evaluate(level.hbar())).unwrap())
                })
                .filter(|p| p.1 > 1e-13)
                .collect();
            assert!(points.len() >= 3, "{:?} N={} too few points", o, order);
            let slope = loglog_slope(&points);
            assert!(slope >= order as f64 + 0.8, "{:?} N={} slope {}", o, order, slope);
        }
    }
}
