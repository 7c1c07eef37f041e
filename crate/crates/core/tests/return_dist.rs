use fracvol::numeric::{mean, variance};
use fracvol::returns::{sample_returns, ReturnDist, ReturnDistParams};
use proptest::prelude::*;

#[test]
fn quadrature_moments_match_samples() {
    let p = ReturnDistParams::new(-5.0, 0.4, 1.0, 0.83, 0.0, 4.0).unwrap();
    let d = ReturnDist::new(p).unwrap();
    let xs = sample_returns(&p, 400_000, 12).unwrap();
    let (m, v) = d.moments();
    let sv = variance(&xs);
    assert!((mean(&xs) - m).abs() < 4.0 * (v / xs.len() as f64).sqrt());
    assert!((sv / v - 1.0).abs() < 0.03, "{sv} vs {v}");
}

#[test]
fn tail_prefactor_is_positive_and_finite() {
    let p = ReturnDistParams::new(-5.0, 0.59, 1.0, 0.83, 0.0, 1.0).unwrap();
    let d = ReturnDist::new(p).unwrap();
    let rs: Vec<f64> = (1..20).map(|i| p.r0() + 0.01 * i as f64).filter(|&r| p.lambda(r) > 1.0).collect();
    let c = d.fit_tail_prefactor(&rs).unwrap();
    assert!(c.is_finite() && c > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quantile_inverts_cdf(k in 0.05f64..0.8, h in 0.55f64..0.95, prob in 0.001f64..0.999) {
        let d = ReturnDist::new(ReturnDistParams::new(-5.0, k, 1.0, h, 0.0, 1.0).unwrap()).unwrap();
        let r = d.quantile(prob);
        prop_assert!((d.cdf(r) - prob).abs() < 1e-7);
    }

    #[test]
    fn density_is_nonnegative(k in 0.0f64..1.0, z in -50.0f64..50.0) {
        let p = ReturnDistParams::new(-5.0, k, 1.0, 0.8, 0.0, 1.0).unwrap();
        let d = ReturnDist::new(p).unwrap();
        let v = d.pdf(p.r0() + z * p.theta());
        prop_assert!(v >= 0.0 && v.is_finite());
    }
}
