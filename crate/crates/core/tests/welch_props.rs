mod common;

use common::tdist;
use patchgauge::analytics::{student_t_two_tailed, welch_t};
use proptest::prelude::*;

#[test]
fn worked_example() {
    let r = welch_t(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap();
    assert!((r.t - (-1.224745)).abs() < 1e-6, "{}", r.t);
    assert_eq!(r.df, 4.0);
    assert!((r.p - tdist::two_tailed(r.t, 4)).abs() < 1e-6);
}

#[test]
fn p_matches_quadrature() {
    let mut worst: f64 = 0.0;
    for df in [1u32, 2, 4, 10, 30, 100] {
        for i in -100..=100 {
            let t = i as f64 / 10.0;
            let diff = (student_t_two_tailed(t, df as f64) - tdist::two_tailed(t, df)).abs();
            worst = worst.max(diff);
            assert!(diff < 1e-6, "df={df} t={t} diff={diff}");
        }
    }
    assert!(worst < 1e-6);
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1000.0f64..1000.0, 2..30)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-7 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn symmetry_shift_and_scale(a in sample(), b in sample(), shift in -500.0f64..500.0, scale in 0.01f64..100.0) {
        let base = welch_t(&a, &b);
        prop_assume!(base.is_ok());
        let base = base.unwrap();
        prop_assume!(!base.degenerate);

        let swapped = welch_t(&b, &a).unwrap();
        prop_assert!(close(swapped.t, -base.t));
        prop_assert!(close(swapped.df, base.df));
        prop_assert!(close(swapped.p, base.p));

        let sh = |xs: &[f64]| xs.iter().map(|x| x + shift).collect::<Vec<_>>();
        let shifted = welch_t(&sh(&a), &sh(&b)).unwrap();
        prop_assert!((shifted.t - base.t).abs() <= 1e-6 * (1.0 + base.t.abs()));
        prop_assert!((shifted.df - base.df).abs() <= 1e-6 * base.df);
        prop_assert!((shifted.p - base.p).abs() <= 1e-6);

        let sc = |xs: &[f64]| xs.iter().map(|x| x * scale).collect::<Vec<_>>();
        let scaled = welch_t(&sc(&a), &sc(&b)).unwrap();
        prop_assert!(close(scaled.t, base.t));
        prop_assert!(close(scaled.df, base.df));
        prop_assert!(close(scaled.p, base.p));

        prop_assert!((0.0..=1.0).contains(&base.p));
        prop_assert!(base.df >= (a.len().min(b.len()) - 1) as f64 - 1e-9);
        prop_assert!(base.df <= (a.len() + b.len() - 2) as f64 + 1e-9);
    }
}
