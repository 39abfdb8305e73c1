use varheat_core::estimators::{estimate_alpha, estimate_theta_power, estimate_theta_quadratic};
use varheat_core::gaussian::{b0_alpha, c0_alpha, FbmSampler, U0Sampler};
use varheat_core::path::{Path, PathKind};
use varheat_core::spde::FineSeries;
use varheat_core::variations::{
    fbm_normalized_variation, mean_and_se, median, power_variation, quad_variation_renorm,
    riemann_sigma_sum,
};
use varheat_core::{KernelParams, SigmaSpec};

#[test]
fn fbm_variation_mean_is_one() {
    let s = FbmSampler::new(0.25, 4096).unwrap();
    let v: Vec<f64> = (0..200)
        .map(|r| fbm_normalized_variation(&s.sample(1, r), 0.25).unwrap().statistic)
        .collect();
    let (m, se) = mean_and_se(&v);
    assert!((m - 1.0).abs() < 3.0 * se, "{m} {se}");
}

#[test]
fn u0_limits_match_derived_constants() {
    let params = KernelParams::new(2.0).unwrap();
    let c0 = c0_alpha(&params).unwrap();
    let b0 = b0_alpha(&params).unwrap();
    let s = U0Sampler::new(&params, 1024).unwrap();
    let paths = s.sample_batch(3, 0, 200);
    let v: Vec<f64> = paths.iter().map(|p| quad_variation_renorm(p, 2.0).unwrap().statistic).collect();
    let u: Vec<f64> = paths.iter().map(|p| power_variation(p, 4.0).unwrap().statistic).collect();
    let (mv, sev) = mean_and_se(&v);
    let (mu, seu) = mean_and_se(&u);
    // O(1/N) bias from the nonstationary part
    assert!((mv - c0 * c0).abs() < 3.0 * sev + 2.0 / 1024.0, "{mv} {}", c0 * c0);
    assert!((mu - b0).abs() < 3.0 * seu + 4.0 / 1024.0, "{mu} {b0}");
}

/// On `[0, 1/2]` the limit of `V_N` picks up `(1/2)^{2H-1}` in front of
/// `int_0^{1/2} sigma^2 = 1/2`.
#[test]
fn interval_generalization() {
    let alpha = 2.0;
    let params = KernelParams::new(alpha).unwrap();
    let h = params.hurst();
    let c0 = c0_alpha(&params).unwrap();
    let n = 512;
    let s = U0Sampler::new(&params, 2 * n).unwrap();
    let v: Vec<f64> = s
        .sample_batch(5, 0, 300)
        .into_iter()
        .map(|p| {
            let half = p.values()[..=n].to_vec();
            let q = Path::on_interval(half, 0.0, 0.0, 0.5, PathKind::U0Exact).unwrap();
            quad_variation_renorm(&q, alpha).unwrap().statistic
        })
        .collect();
    let (m, se) = mean_and_se(&v);
    let limit = c0 * c0 * 0.5f64.powf(2.0 * h - 1.0) * 0.5;
    assert!((m - limit).abs() < 3.0 * se + 2.0 / n as f64, "{m} {limit} {se}");
    // the unit-interval limit would be off by a factor 2^{2H}
    assert!((m - c0 * c0).abs() > 10.0 * se);
}

#[test]
fn riemann_sum_matches_fine_grid_integral() {
    let params = KernelParams::new(2.0).unwrap();
    let sigma = SigmaSpec::Sinusoidal { a: 1.0, b: 0.5, omega: 1.0 };
    let fine_n = 4096;
    let s = U0Sampler::new(&params, fine_n).unwrap();
    for r in 0..5 {
        let fine = s.sample(11, r);
        let coarse = fine.subsample(16).unwrap();
        let riemann = riemann_sigma_sum(&coarse, &sigma, 2.0).unwrap();
        let oracle = FineSeries {
            dt: 1.0 / fine_n as f64,
            values: fine.values().to_vec(),
        }
        .sigma_integral(&sigma, 2.0);
        assert!((riemann / oracle - 1.0).abs() < 0.02, "{riemann} {oracle}");
    }
}

#[test]
fn estimators_on_exact_u0() {
    let params = KernelParams::new(2.0).unwrap();
    let c0 = c0_alpha(&params).unwrap();
    let b0 = b0_alpha(&params).unwrap();
    let s = U0Sampler::new(&params, 2048).unwrap();
    let paths = s.sample_batch(9, 0, 100);
    let one = SigmaSpec::ONE;
    let t1: Vec<f64> = paths
        .iter()
        .map(|p| estimate_theta_quadratic(p, 2.0, &one, c0).unwrap().estimate)
        .collect();
    let t2: Vec<f64> = paths
        .iter()
        .map(|p| estimate_theta_power(p, 2.0, &one, b0).unwrap().estimate)
        .collect();
    assert!((median(&t1) - 1.0).abs() < 0.1);
    assert!((median(&t2) - 1.0).abs() < 0.15);
    assert!((median(&t1) - median(&t2)).abs() < 0.1);
    let a: Vec<f64> = paths
        .iter()
        .map(|p| estimate_alpha(p, &one).unwrap().estimate)
        .collect();
    // log-ratio estimator carries a log(C_0^2)/log N bias at finite N
    assert!(median(&a) > 2.0 && median(&a) < 2.5);
}
