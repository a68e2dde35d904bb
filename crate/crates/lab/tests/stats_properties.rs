use proptest::prelude::*;
use qpnn_lab::stats::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal};

#[test]
fn lognormal_recovers_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dist = LogNormal::new(-0.01, 0.002).unwrap();
    let xs: Vec<f64> = (0..10_000).map(|_| dist.sample(&mut rng)).collect();
    let fit = fit_lognormal(&xs).unwrap();
    assert_eq!(fit.family, FitFamily::Lognormal);
    assert!((fit.params[0] - -0.01).abs() / 0.01 < 0.05, "mu {}", fit.params[0]);
    assert!((fit.params[1] - 0.002).abs() / 0.002 < 0.05, "sigma {}", fit.params[1]);
    assert!(fit.ci95.0 <= fit.mean && fit.mean <= fit.ci95.1);
}

#[test]
fn beta_recovers_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dist = Beta::new(200.0, 2.0).unwrap();
    let xs: Vec<f64> = (0..10_000).map(|_| dist.sample(&mut rng)).collect();
    let fit = fit_beta(&xs).unwrap();
    assert!((fit.params[0] - 200.0).abs() / 200.0 < 0.10, "a {}", fit.params[0]);
    assert!((fit.params[1] - 2.0).abs() / 2.0 < 0.10, "b {}", fit.params[1]);
    assert!(fit.ci95.0 <= fit.mean && fit.mean <= fit.ci95.1);
}

#[test]
fn beta_fit_is_a_likelihood_maximum() {
    // The MLE log-likelihood is at least that of any nearby shape pair.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dist = Beta::new(3.0, 7.0).unwrap();
    let xs: Vec<f64> = (0..2000).map(|_| dist.sample(&mut rng)).collect();
    let fit = fit_beta(&xs).unwrap();
    let ll = |a: f64, b: f64| {
        let d = beta_ln_pdf(a, b);
        xs.iter().map(|&x| d(x)).sum::<f64>()
    };
    let (a, b) = (fit.params[0], fit.params[1]);
    let best = ll(a, b);
    for (da, db) in [(1.01, 1.0), (0.99, 1.0), (1.0, 1.01), (1.0, 0.99), (1.01, 1.01)] {
        assert!(ll(a * da, b * db) <= best + 1e-9);
    }
}

fn beta_ln_pdf(a: f64, b: f64) -> impl Fn(f64) -> f64 {
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    move |x: f64| (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta
}

fn ln_gamma(x: f64) -> f64 {
    // Stirling series after shifting x above 10.
    let mut shift = 0.0;
    let mut x = x;
    while x < 10.0 {
        shift -= x.ln();
        x += 1.0;
    }
    shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x.powi(3))
}

#[test]
fn trimodal_plateaus_recovered_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let centres = [1e-5, 1e-3, 1e-1];
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for k in 0..60 {
        let c = k % 3;
        values.push(centres[c] * 10f64.powf(rng.random_range(-0.3..0.3)));
        labels.push(c);
    }
    let got = isolate_max_plateau(&values, PLATEAU_GAP_DECADES);
    let expected: Vec<usize> = (0..60).filter(|&i| labels[i] == 0).collect();
    assert_eq!(got, expected);
    let got = isolate_max_plateau(&values, 0.5);
    assert_eq!(got, expected);
}

proptest! {
    #[test]
    fn lognormal_mean_in_range(xs in prop::collection::vec(0.05f64..1.0, 3..40)) {
        // exp(mu + sigma^2/2) can exceed the sample maximum when the spread
        // is extreme; within a factor e^2 it cannot.
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(hi / lo <= std::f64::consts::E.powi(2));
        let fit = fit_lognormal(&xs).unwrap();
        prop_assert!(lo <= fit.mean + 1e-12 && fit.mean <= hi + 1e-12);
        prop_assert!(fit.ci95.0 <= fit.mean && fit.mean <= fit.ci95.1);
    }

    #[test]
    fn beta_mean_in_range(xs in prop::collection::vec(0.01f64..0.99, 3..40)) {
        let fit = fit_beta(&xs).unwrap();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-9 <= fit.mean && fit.mean <= hi + 1e-9, "{} not in [{lo}, {hi}]", fit.mean);
        prop_assert!(fit.ci95.0 <= fit.mean && fit.mean <= fit.ci95.1);
    }

    #[test]
    fn threshold_filtering_narrows_range(xs in prop::collection::vec(0.0f64..1.0, 2..50), off in prop::collection::vec(0.0f64..1.0, 2..20)) {
        let t = success_threshold(&off).unwrap();
        let kept: Vec<f64> = successful(&xs, t).into_iter().map(|i| xs[i]).collect();
        prop_assume!(!kept.is_empty());
        let range = |v: &[f64]| {
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
        };
        prop_assert!(range(&kept) <= range(&xs));
        prop_assert!(kept.iter().all(|&x| x >= t));
    }
}

#[test]
fn threshold_filtering_can_raise_std() {
    // Truncating from below does not bound the standard deviation.
    let xs = [0.12, 0.15, 0.93];
    let kept: Vec<f64> = successful(&xs, 0.13).into_iter().map(|i| xs[i]).collect();
    assert!(population_std(&kept) > population_std(&xs));
}
