use holomoment::forms::hecke_eigenforms;
use holomoment::lfun::*;
use holomoment::moments::main_term_check;

#[test]
fn afe_weights_start_at_one_and_decay() {
    for k in [12u32, 24, 40] {
        for j in [1u32, 2] {
            let v = AfeWeight::shared(k, j).unwrap();
            assert!((v.eval(1e-8).unwrap() - 1.0).abs() < 1e-4, "k={k} j={j}");
            let kj = f64::from(k).powi(j as i32);
            for a in [1, 2] {
                let worst = (-60..=40)
                    .map(|e| {
                        let xi = kj * 10f64.powf(f64::from(e) / 10.0);
                        v.eval(xi).unwrap().abs() * (1.0 + xi / kj).powi(a)
                    })
                    .fold(0.0, f64::max);
                assert!(worst < 2.0, "k={k} j={j} A={a}: {worst}");
            }
        }
    }
}

#[test]
fn afe_support_is_where_the_weight_vanishes() {
    let v = AfeWeight::shared(24, 2).unwrap();
    let m = v.support(1e-15).unwrap();
    assert!(v.eval(m as f64).unwrap().abs() < 1e-15);
    assert!(v.eval(m as f64 / 2.0).unwrap().abs() > 1e-15);
}

#[test]
fn real_weight_interpolates_integral_weights() {
    let a = AfeWeight::new(20, 2, 1e-10).unwrap();
    let b = AfeWeight::new_real(20.0, 2, 1e-10).unwrap();
    for xi in [1.0, 50.0, 400.0, 3000.0] {
        assert_eq!(a.eval(xi).unwrap(), b.eval(xi).unwrap());
    }
    let c = AfeWeight::new_real(20.5, 2, 1e-10).unwrap();
    let d = AfeWeight::new(21, 2, 1e-10).unwrap();
    let x = 60.0;
    let (lo, mid, hi) = (a.eval(x).unwrap(), c.eval(x).unwrap(), d.eval(x).unwrap());
    assert!(lo.min(hi) <= mid && mid <= lo.max(hi));
}

#[test]
fn sym2_at_one_routes_agree_on_one_dimensional_spaces() {
    for k in [12u32, 16, 18, 20, 22, 26] {
        let f = &hecke_eigenforms(k, f_truncation(k).unwrap()).unwrap()[0];
        let d = l_sym2_at1(f, Sym2Method::Dirichlet).unwrap();
        let t = l_sym2_at1(f, Sym2Method::TraceInversion).unwrap();
        assert!((d.value - t.value).abs() <= 1e-6 * d.value, "k={k}: {} vs {}", d.value, t.value);
        assert!(d.stability_delta < 1e-10);
    }
}

#[test]
fn trace_inversion_needs_dimension_one() {
    let f = &hecke_eigenforms(24, f_truncation(24).unwrap()).unwrap()[0];
    assert!(matches!(l_sym2_at1(f, Sym2Method::TraceInversion), Err(holomoment::Error::Domain(_))));
    assert!(l_sym2_at1(f, Sym2Method::Mollified { delta: 0.2 }).is_err());
}

#[test]
fn weight_24_values() {
    let fs = hecke_eigenforms(24, f_truncation(24).unwrap()).unwrap();
    let want = [1.575535344802385, 1.8846367590316964];
    for (f, w) in fs.iter().zip(want) {
        let v = l_sym2_at1(f, Sym2Method::Dirichlet).unwrap().value;
        assert!((v - w).abs() < 1e-11, "{v}");
    }
}

#[test]
fn central_values_are_nonnegative() {
    let f = &hecke_eigenforms(12, f_truncation(12).unwrap()).unwrap()[0];
    for g in hecke_eigenforms(24, g_truncation(24).unwrap()).unwrap() {
        let lg = l_central_g(&g).unwrap();
        let ls = l_central_sym2fg(f, &g).unwrap();
        assert!(lg.value >= 0.0 && ls.value >= 0.0);
        assert!(lg.stability_delta < 1e-10 && ls.stability_delta < 1e-10);
    }
}

#[test]
fn main_term_sum_matches_mellin_integral() {
    // the double Mellin integral over Re s₁ = Re s₂ = 1, evaluated with an
    // Euler product for L(s, sym²Δ): 0.33643067009
    let f = &hecke_eigenforms(12, f_truncation(12).unwrap()).unwrap()[0];
    let m = main_term_check(f).unwrap();
    assert!((m.sum_value - 0.33643067009).abs() < 2e-9, "{}", m.sum_value);
    assert!((m.sum_value - m.r1_only).abs() > 1e-3);
}
