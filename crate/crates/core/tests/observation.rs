use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::Gamma;
use rarhsmm::observation::{ar_predict, gen_t_logpdf, tau_mean, tau_mean_log};

/// Midpoint rule over `y = σ tan θ`, which maps the real line onto a finite
/// interval with a bounded integrand.
fn integrate(sigma: f64, nu: f64, g: impl Fn(f64) -> f64) -> f64 {
    let n = 200_000;
    let h = std::f64::consts::PI / n as f64;
    (0..n)
        .map(|i| {
            let theta = -std::f64::consts::FRAC_PI_2 + (i as f64 + 0.5) * h;
            let y = sigma * theta.tan();
            let c = theta.cos();
            gen_t_logpdf(y, 0.0, sigma, nu).unwrap().exp() * g(y) * sigma / (c * c)
        })
        .sum::<f64>()
        * h
}

#[test]
fn density_integrates_to_one() {
    for sigma in [0.5, 1.0, 2.0] {
        for nu in [2.0, 4.0, 9.0] {
            let mass = integrate(sigma, nu, |_| 1.0);
            assert!((mass - 1.0).abs() < 1e-6, "σ={sigma} ν={nu}: {mass}");
        }
    }
}

#[test]
fn density_second_moment() {
    // Var = σ² ν / (ν − 2) for ν > 2; the y² integrand decays like y^{-ν+1},
    // so only ν = 9 is well conditioned under the midpoint rule.
    let (sigma, nu) = (1.5, 9.0);
    let var = integrate(sigma, nu, |y| y * y);
    assert!((var - sigma * sigma * nu / (nu - 2.0)).abs() < 1e-5, "{var}");
}

#[test]
fn location_shift() {
    let a = gen_t_logpdf(3.5f64, 1.0, 0.7, 4.0).unwrap();
    let b = gen_t_logpdf(2.5f64, 0.0, 0.7, 4.0).unwrap();
    assert!((a - b).abs() < 1e-14);
}

#[test]
fn rejects_bad_parameters() {
    assert!(gen_t_logpdf(0.0, 0.0, 0.0, 4.0).is_err());
    assert!(gen_t_logpdf(0.0, 0.0, 1.0, -1.0).is_err());
}

#[test]
fn ar_prediction_ordering() {
    // Context oldest first: (y_{n-2}, y_{n-1}) = (2, 4).
    assert_eq!(ar_predict(&[2.0, 4.0], &[0.5, -0.25]).unwrap(), 1.5);
    assert!(ar_predict(&[1.0], &[0.5, 0.5]).is_err());
    assert_eq!(ar_predict::<f64>(&[], &[]).unwrap(), 0.0);
}

/// The precision posterior given a residual r is
/// Gamma(shape (ν+1)/2, rate (ν + r²/σ²)/2); sample it directly.
#[test]
fn precision_moments_match_monte_carlo() {
    let mut rng = StdRng::seed_from_u64(3);
    for (r, sigma, nu) in [(0.0, 1.0, 4.0), (2.5, 0.8, 3.0), (10.0, 1.0, 9.0)] {
        let rate = (nu + r * r / (sigma * sigma)) / 2.0;
        let post = Gamma::new((nu + 1.0) / 2.0, 1.0 / rate).unwrap();
        let n = 1_000_000;
        let (mut s, mut s2, mut l, mut l2) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let tau: f64 = rng.sample(post);
            s += tau;
            s2 += tau * tau;
            l += tau.ln();
            l2 += tau.ln().powi(2);
        }
        let nf = n as f64;
        let se = |sum: f64, sq: f64| ((sq / nf - (sum / nf).powi(2)) / nf).sqrt();
        let (m, ml) = (s / nf, l / nf);
        let want = tau_mean(r, sigma, nu);
        assert!((m - want).abs() < 3.0 * se(s, s2), "E[τ] {m} vs {want}");
        let want = tau_mean_log(r, sigma, nu);
        assert!((ml - want).abs() < 3.0 * se(l, l2), "E[log τ] {ml} vs {want}");
    }
}
