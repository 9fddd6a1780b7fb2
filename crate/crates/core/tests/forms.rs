use std::sync::Arc;

use holomoment::arith::tau;
use holomoment::forms::*;
use holomoment::lfun::{f_truncation, l_sym2_at1, Sym2Method};
use num_integer::Integer;

fn hecke_violations(f: &EigenformRecord, limit: usize, tol: f64) -> Vec<String> {
    let mut bad = Vec::new();
    for n in 1..=limit {
        if f.a[n].abs() > tau(n as u64) as f64 * (1.0 + tol) {
            bad.push(format!("k={} f={} Deligne at n={n}: {}", f.weight, f.index, f.a[n]));
        }
        for m in 1..=limit / n {
            let g = n.gcd(&m);
            let rhs: f64 = (1..=g).filter(|d| g % d == 0).map(|d| f.a[n * m / (d * d)]).sum();
            let lhs = f.a[n] * f.a[m];
            if (lhs - rhs).abs() > tol * (1.0 + rhs.abs()) {
                bad.push(format!("k={} f={} Hecke at ({n},{m}): {lhs} vs {rhs}", f.weight, f.index));
            }
        }
    }
    bad
}

#[test]
fn hecke_relations_and_deligne_up_to_weight_60() {
    let mut bad = Vec::new();
    for k in (12..=60).step_by(2) {
        if cusp_dimension(k) == 0 {
            continue;
        }
        for f in hecke_eigenforms(k, 200).unwrap() {
            assert_eq!(f.a[1], 1.0);
            bad.extend(hecke_violations(&f, 200, 1e-9));
        }
    }
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn ramanujan_tau() {
    let f = &hecke_eigenforms(12, 30).unwrap()[0];
    for (n, t) in [(2u64, -24.0), (3, 252.0), (5, 4830.0), (23, 18643272.0), (30, -29_211_840.0)] {
        let raw = f.raw_coefficient(n).unwrap();
        assert!((raw - t).abs() <= 1e-9 * t.abs(), "tau({n}) = {raw}");
    }
}

#[test]
fn weight_24_eigenvalues_are_conjugate() {
    // a(2) raw = 540 ± 12√144169
    let fs = hecke_eigenforms(24, 48).unwrap();
    let s = 12.0 * 144169f64.sqrt();
    let raw: Vec<f64> = fs.iter().map(|f| f.raw_coefficient(2).unwrap()).collect();
    assert!((raw[0] - (540.0 - s)).abs() < 1e-6 * s);
    assert!((raw[1] - (540.0 + s)).abs() < 1e-6 * s);
}

#[test]
fn basis_errors() {
    assert!(cusp_basis(13, 10).is_err());
    assert!(cusp_basis(2, 10).is_err());
    assert!(cusp_basis(24, 2).is_err());
    assert!(hecke_eigenforms(10, 10).unwrap().is_empty());
}

#[test]
fn gl3_coefficients_are_symmetric_and_multiplicative() {
    for k in [12u32, 24, 36] {
        for f in hecke_eigenforms(k, 200).unwrap() {
            let c = gl3_coefficients(&f, 60, 60).unwrap();
            let a1 = sym2_coefficients(&f, 60).unwrap();
            for n in 1..=60 {
                assert!((c.get(n, 1).unwrap() - a1[n]).abs() < 1e-12);
                for r in 1..=60 {
                    // level-one self-dual lift: A(n, r) = A(r, n)
                    assert!((c.get(n, r).unwrap() - c.get(r, n).unwrap()).abs() < 1e-9 * (1.0 + c.get(n, r).unwrap().abs()));
                }
            }
            // A(n,1) = Σ_{d² | n} a_f(n/d²)² − ..., checked via A(p,1) = a(p)² − 1
            for p in [2usize, 3, 5, 7, 11, 13] {
                assert!((a1[p] - (f.a[p] * f.a[p] - 1.0)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn petersson_small_grid() {
    for k in [4u32, 6, 12, 24] {
        for n in 1..=5 {
            for m in 1..=5 {
                let s = petersson_sides(k, n, m, 200).unwrap();
                assert!((s.lhs - s.rhs).abs() <= 1e-8 + s.tail_bound, "k={k} n={n} m={m}: {s:?}");
            }
        }
    }
}

#[test]
fn domain_volume_and_norm_formula() {
    let vol = fundamental_domain_integral(0, Integrand::One, 1e-12).unwrap();
    assert!((vol.value.re - std::f64::consts::PI / 3.0).abs() < 1e-11);
    let f = &hecke_eigenforms(12, f_truncation(12).unwrap()).unwrap()[0];
    let quad = fundamental_domain_integral(24, Integrand::Abs2(f), 1e-11).unwrap().value.re;
    let formula = petersson_norm_sq(f).unwrap();
    assert!((quad - formula).abs() < 1e-9 * formula, "{quad} vs {formula}");
    assert!((formula - 1.035362056801802e-6).abs() < 1e-15);
}

#[test]
fn l1_feeds_the_norm_formula() {
    let f = &hecke_eigenforms(16, f_truncation(16).unwrap()).unwrap()[0];
    let l1 = l_sym2_at1(f, Sym2Method::Dirichlet).unwrap().value;
    let quad = fundamental_domain_integral(32, Integrand::Abs2(f), 1e-11).unwrap().value.re;
    let norm = petersson_norm_sq(f).unwrap();
    assert!((quad - norm).abs() < 1e-9 * norm);
    assert!(l1 > 0.0);
}

#[test]
fn cache_mismatch_triggers_rebuild() {
    let dir = tempfile::tempdir().unwrap();
    let store = EigenformStore::with_dir(dir.path(), false).unwrap();
    let a = store.get(24, 60).unwrap();
    let path = store.cache_path(24).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with(CACHE_MAGIC));
    std::fs::write(&path, text.replacen(CACHE_MAGIC, "holomoment-eigenforms v0", 1)).unwrap();
    assert!(matches!(read_eigenform_cache(&path), Err(holomoment::Error::Cache(_))));
    let fresh = EigenformStore::with_dir(dir.path(), false).unwrap();
    let b = fresh.get(24, 60).unwrap();
    assert_eq!(a, b);
    assert!(std::fs::read_to_string(&path).unwrap().starts_with(CACHE_MAGIC));
}

#[test]
fn warm_cache_reproduces_values_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cold = EigenformStore::with_dir(dir.path(), false).unwrap().get(36, 100).unwrap();
    let warm = EigenformStore::with_dir(dir.path(), false).unwrap().get(36, 100).unwrap();
    assert_eq!(cold, warm);
}

#[test]
fn store_is_safe_under_concurrent_readers() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(EigenformStore::with_dir(dir.path(), false).unwrap());
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let s = store.clone();
            std::thread::spawn(move || s.get(if i % 2 == 0 { 24 } else { 36 }, 80).unwrap())
        })
        .collect();
    let got: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    for pair in got.chunks(2).collect::<Vec<_>>().windows(2) {
        assert_eq!(pair[0][0], pair[1][0]);
        assert_eq!(pair[0][1], pair[1][1]);
    }
    assert!(read_eigenform_cache(&store.cache_path(24).unwrap()).is_ok());
}
