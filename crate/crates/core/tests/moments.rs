use holomoment::besselx::SmoothWindow;
use holomoment::forms::{hecke_eigenforms, EigenformStore};
use holomoment::lfun::{f_truncation, g_truncation};
use holomoment::moments::*;
use proptest::prelude::*;

#[test]
fn watson_identity_at_weight_12() {
    let f = &hecke_eigenforms(12, f_truncation(12).unwrap()).unwrap()[0];
    let gs = hecke_eigenforms(24, g_truncation(24).unwrap()).unwrap();
    let mut total = 0.0;
    for g in &gs {
        let w = watson_check(f, g, QUAD_TOL).unwrap();
        let ratio = w.ratio.unwrap();
        assert!((ratio - 1.0).abs() < 1e-6, "g={}: ratio {ratio}", g.index);
        total += w.lhs;
    }
    let direct = fourth_moment_direct(f, QUAD_TOL).unwrap();
    assert!((total - direct).abs() < 1e-6 * direct);
    assert!((direct - 2.6604595205889).abs() < 1e-9);
}

#[test]
fn spectral_and_direct_agree() {
    let store = EigenformStore::in_memory();
    for k in [12u32, 16] {
        let f = &store.get(k, f_truncation(k).unwrap()).unwrap()[0];
        let r = fourth_moment_report(f, &store, QUAD_TOL).unwrap();
        assert!(r.discrepancy.unwrap() < 1e-8, "k={k}: {r:?}");
        assert_eq!(r.negative_count, 0);
        assert_eq!(r.contributions.len(), holomoment::forms::cusp_dimension(2 * k));
    }
}

#[test]
fn direct_moment_is_scale_invariant() {
    let f = hecke_eigenforms(12, f_truncation(12).unwrap()).unwrap().remove(0);
    let mut scaled = f.clone();
    for a in &mut scaled.a {
        *a *= 3.7;
    }
    let a = fourth_moment_direct(&f, QUAD_TOL).unwrap();
    let b = fourth_moment_direct(&scaled, QUAD_TOL).unwrap();
    assert!((a - b).abs() < 1e-10 * a);
}

#[test]
fn window_with_one_weight_reduces_to_one_moment() {
    let store = EigenformStore::in_memory();
    let w = SmoothWindow::bump01(11.0, 2.0).unwrap();
    let avg = weight_window_average(&w, &store, QUAD_TOL).unwrap();
    assert_eq!(avg.terms.len(), 1);
    let f = &store.get(12, f_truncation(12).unwrap()).unwrap()[0];
    let single = fourth_moment_spectral(f, &store).unwrap().spectral_total;
    let want = 2.0 / 2.0 * w.eval(12.0) * single;
    assert!((avg.average - want).abs() < 1e-10 * want);
}

#[test]
fn window_without_even_weights_is_an_error() {
    let store = EigenformStore::in_memory();
    let w = SmoothWindow::bump01(12.2, 0.5).unwrap();
    assert!(matches!(weight_window_average(&w, &store, QUAD_TOL), Err(holomoment::Error::Domain(_))));
}

#[test]
fn main_term_ablation_changes_the_sum() {
    for k in [12u32, 16, 20] {
        let f = &hecke_eigenforms(k, f_truncation(k).unwrap()).unwrap()[0];
        let m = main_term_check(f).unwrap();
        assert!(m.defect.is_finite() && m.target > 0.0);
        assert!((m.sum_value - m.r1_only).abs() > 1e-4, "k={k}");
    }
}

#[test]
fn e1_modes_agree_within_budget() {
    let big_k: f64 = 40.0;
    let w = SmoothWindow::bump01(big_k, big_k.powf(0.8)).unwrap();
    for beta in [1u64, 4] {
        let p = E1Params { beta, ..E1Params::default() };
        let d = error_e1(&w, p, E1Mode::Direct, E1Config::default()).unwrap();
        let s = error_e1(&w, p, E1Mode::Smoothed, E1Config::default()).unwrap();
        assert!((d.value - s.value).abs() <= s.budget, "beta={beta}: {} vs {} (budget {})", d.value, s.value, s.budget);
    }
}

#[test]
fn e1_with_no_even_weight_is_zero() {
    let w = SmoothWindow::bump01(40.2, 0.5).unwrap();
    let d = error_e1(&w, E1Params::default(), E1Mode::Direct, E1Config::default()).unwrap();
    assert_eq!(d.value, 0.0);
}

#[test]
fn e1_rejects_oversized_windows() {
    let w = SmoothWindow::bump01(80.0, 20.0).unwrap();
    assert!(error_e1(&w, E1Params::default(), E1Mode::Direct, E1Config::default()).is_err());
}

#[test]
fn sweep_labels_every_point_once() {
    let big_k: f64 = 40.0;
    let w = SmoothWindow::bump01(big_k, big_k.powf(0.8)).unwrap();
    let grid = default_grid(big_k);
    let (rows, summaries) = region_sweep(&w, &grid, DEFAULT_EPSILON, &DEFAULT_B_EXPONENTS).unwrap();
    for p in &grid {
        let labels: std::collections::BTreeSet<_> = rows.iter().filter(|r| r.region.point == *p).map(|r| r.region.label).collect();
        assert_eq!(labels.len(), 1);
    }
    for r in rows.iter().filter(|r| r.region.label == Region::E1) {
        assert!((r.region.point.n * r.region.point.r1) as f64 / r.region.point.c2 as f64 > big_k.powf(1.95));
    }
    assert!(summaries.iter().any(|s| s.bound_kind == BoundKind::LargeX));
}

proptest! {
    #[test]
    fn classifier_is_total(n in 1u64..100_000, m in 1u64..100_000, c1 in 1u64..5, c2 in 1u64..5, r1 in 1u64..4, k in 12.0f64..100.0) {
        let p = GridPoint { n, m, c1, c2, r1, alpha: 1, beta: 1, gamma: 1 };
        let l = classify(&p, k, DEFAULT_EPSILON).label;
        let u = (n * r1) as f64 / c2 as f64;
        prop_assert_eq!(l == Region::E1, u > k.powf(2.0 - DEFAULT_EPSILON));
        if l == Region::E2 {
            prop_assert!(u > k.powf(4.0 / 3.0 - DEFAULT_EPSILON));
        }
    }
}
