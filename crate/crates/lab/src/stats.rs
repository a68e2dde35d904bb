//! Post-processing of trial populations: success thresholds, plateau
//! isolation, lognormal and beta fits, and Welch's t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, LogNormal, StudentsT};
use statrs::function::gamma::digamma;

use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitFamily {
    Lognormal,
    Beta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: FitFamily,
    /// `(mu, sigma)` of the log-values, or the beta shapes `(a, b)`.
    /// Empty for a point mass.
    pub params: Vec<f64>,
    pub mean: f64,
    pub ci95: (f64, f64),
}

impl FitResult {
    fn point_mass(family: FitFamily, value: f64) -> Self {
        FitResult {
            family,
            params: Vec::new(),
            mean: value,
            ci95: (value, value),
        }
    }

    pub fn is_point_mass(&self) -> bool {
        self.params.is_empty()
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation (divides by `n`).
pub fn population_std(values: &[f64]) -> f64 {
    let mu = mean(values);
    (values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Sample variance (divides by `n - 1`).
pub fn sample_variance(values: &[f64]) -> f64 {
    let mu = mean(values);
    values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

/// Lower bound of offline training, `mean - std` with the population
/// standard deviation. In-situ trials at or above it count as successful.
pub fn success_threshold(offline: &[f64]) -> Result<f64> {
    if offline.len() < 2 {
        return Err(LabError::Stats(format!(
            "success threshold needs at least 2 offline values, got {}",
            offline.len()
        )));
    }
    Ok(mean(offline) - population_std(offline))
}

/// Indices of values at or above `threshold`.
pub fn successful(values: &[f64], threshold: f64) -> Vec<usize> {
    (0..values.len()).filter(|&i| values[i] >= threshold).collect()
}

/// Default gap between infidelity plateaus, in decades.
pub const PLATEAU_GAP_DECADES: f64 = 0.15;

/// Floor applied to infidelities before taking logarithms.
const INFIDELITY_FLOOR: f64 = 1e-16;

/// Indices of the lowest-infidelity cluster. Infidelities are sorted on a
/// log10 scale and split wherever consecutive values are more than
/// `gap_decades` apart. Without any such gap every index is returned.
pub fn isolate_max_plateau(infidelities: &[f64], gap_decades: f64) -> Vec<usize> {
    if infidelities.is_empty() {
        return Vec::new();
    }
    let logs: Vec<f64> = infidelities.iter().map(|c| c.max(INFIDELITY_FLOOR).log10()).collect();
    let mut order: Vec<usize> = (0..logs.len()).collect();
    order.sort_by(|&a, &b| logs[a].total_cmp(&logs[b]).then(a.cmp(&b)));
    let cut = order
        .windows(2)
        .position(|w| logs[w[1]] - logs[w[0]] > gap_decades)
        .map_or(order.len(), |p| p + 1);
    let mut plateau = order[..cut].to_vec();
    plateau.sort_unstable();
    plateau
}

fn check_fit_input(values: &[f64]) -> Result<()> {
    if values.len() < 3 {
        return Err(LabError::Stats(format!("fit needs at least 3 values, got {}", values.len())));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(LabError::Stats(format!("non-finite value {v}")));
    }
    Ok(())
}

/// Two-parameter maximum-likelihood lognormal fit. The mean is the
/// distribution mean `exp(mu + sigma^2 / 2)`, the interval its 2.5% and
/// 97.5% quantiles.
pub fn fit_lognormal(values: &[f64]) -> Result<FitResult> {
    check_fit_input(values)?;
    if let Some(v) = values.iter().find(|v| **v <= 0.0) {
        return Err(LabError::Stats(format!("lognormal fit needs positive values, got {v}")));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mu = mean(&logs);
    let sigma = population_std(&logs);
    if sigma <= 1e-14 * mu.abs().max(1.0) {
        return Ok(FitResult::point_mass(FitFamily::Lognormal, mu.exp()));
    }
    let dist = LogNormal::new(mu, sigma).map_err(|e| LabError::Stats(e.to_string()))?;
    Ok(FitResult {
        family: FitFamily::Lognormal,
        params: vec![mu, sigma],
        mean: (mu + 0.5 * sigma * sigma).exp(),
        ci95: (dist.inverse_cdf(0.025), dist.inverse_cdf(0.975)),
    })
}

/// Values are clipped into `[BETA_CLIP, 1 - BETA_CLIP]` before fitting.
pub const BETA_CLIP: f64 = 1e-9;

/// Trigamma function: recurrence up to `x >= 12`, then the asymptotic series.
fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x
        + x2 / 2.0
        + (1.0 / x) * x2 * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 * (1.0 / 30.0 - x2 * 5.0 / 66.0))))
}

/// Maximum-likelihood beta fit. Newton iterations on the score equations
/// `psi(a) - psi(a+b) = mean ln x`, `psi(b) - psi(a+b) = mean ln(1-x)`,
/// started from the method-of-moments estimate.
pub fn fit_beta(values: &[f64]) -> Result<FitResult> {
    check_fit_input(values)?;
    let clipped: Vec<f64> = values.iter().map(|v| v.clamp(BETA_CLIP, 1.0 - BETA_CLIP)).collect();
    let m = mean(&clipped);
    let var = sample_variance(&clipped);
    if var <= 1e-28 {
        return Ok(FitResult::point_mass(FitFamily::Beta, m));
    }
    let s1 = mean(&clipped.iter().map(|v| v.ln()).collect::<Vec<_>>());
    let s2 = mean(&clipped.iter().map(|v| (-v).ln_1p()).collect::<Vec<_>>());

    let common = (m * (1.0 - m) / var - 1.0).max(1e-3);
    let (mut a, mut b) = (m * common, (1.0 - m) * common);
    for _ in 0..200 {
        let dab = digamma(a + b);
        let g1 = digamma(a) - dab - s1;
        let g2 = digamma(b) - dab - s2;
        let tab = trigamma(a + b);
        let (j11, j12, j22) = (trigamma(a) - tab, -tab, trigamma(b) - tab);
        let det = j11 * j22 - j12 * j12;
        let da = (j22 * g1 - j12 * g2) / det;
        let db = (j11 * g2 - j12 * g1) / det;
        // Halve the step until both shapes stay positive.
        let mut step = 1.0;
        while a - step * da <= 0.0 || b - step * db <= 0.0 {
            step *= 0.5;
        }
        a -= step * da;
        b -= step * db;
        if (step * da).abs() <= 1e-12 * a && (step * db).abs() <= 1e-12 * b {
            break;
        }
    }
    let dist = Beta::new(a, b).map_err(|e| LabError::Stats(e.to_string()))?;
    Ok(FitResult {
        family: FitFamily::Beta,
        params: vec![a, b],
        mean: a / (a + b),
        ci95: (dist.inverse_cdf(0.025), dist.inverse_cdf(0.975)),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub dof: f64,
    /// One-sided p-value for `mean(a) > mean(b)`.
    pub p_greater: f64,
}

/// Welch's unequal-variance t-test of `mean(a) > mean(b)`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(LabError::Stats("Welch test needs at least 2 values per sample".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let diff = mean(a) - mean(b);
    let se2 = va + vb;
    if se2 == 0.0 {
        let p = if diff > 0.0 { 0.0 } else { 1.0 };
        return Ok(WelchResult {
            t: diff.signum() * f64::INFINITY,
            dof: na + nb - 2.0,
            p_greater: p,
        });
    }
    let t = diff / se2.sqrt();
    let dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, dof).map_err(|e| LabError::Stats(e.to_string()))?;
    Ok(WelchResult {
        t,
        dof,
        p_greater: 1.0 - dist.cdf(t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_examples() {
        assert!((success_threshold(&[0.7, 0.7, 0.7]).unwrap() - 0.7).abs() < 1e-15);
        assert!((success_threshold(&[0.9, 0.8]).unwrap() - 0.80).abs() < 1e-15);
        assert!(success_threshold(&[0.9]).is_err());
        assert_eq!(successful(&[0.5, 0.8, 0.81], 0.8), vec![1, 2]);
    }

    #[test]
    fn plateau_examples() {
        assert_eq!(isolate_max_plateau(&[0.1, 0.11, 0.105], 0.5), vec![0, 1, 2]);
        assert_eq!(isolate_max_plateau(&[0.5, 0.05, 0.052, 0.49], 0.5), vec![1, 2]);
        assert_eq!(isolate_max_plateau(&[0.0, 0.3], 0.5), vec![0]);
        assert!(isolate_max_plateau(&[], 0.5).is_empty());
    }

    #[test]
    fn trigamma_values() {
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((trigamma(1.0) - pi2_6).abs() < 1e-12);
        assert!((trigamma(0.5) - 3.0 * pi2_6).abs() < 1e-12);
        assert!((trigamma(2.0) - (pi2_6 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn constant_inputs_are_point_masses() {
        let l = fit_lognormal(&[0.9; 5]).unwrap();
        assert!(l.is_point_mass() && (l.mean - 0.9).abs() < 1e-15 && l.ci95.0 == l.ci95.1);
        let b = fit_beta(&[0.3; 4]).unwrap();
        assert!(b.is_point_mass() && (b.mean - 0.3).abs() < 1e-15 && b.ci95.0 == b.ci95.1);
    }

    #[test]
    fn fit_input_errors() {
        assert!(fit_lognormal(&[0.5, 0.6]).is_err());
        assert!(fit_lognormal(&[0.5, 0.0, 0.3]).is_err());
        assert!(fit_beta(&[0.5, f64::NAN, 0.3]).is_err());
    }

    #[test]
    fn welch_detects_shift() {
        let a: Vec<f64> = (0..30).map(|i| 1.0 + 0.01 * (i % 7) as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| 0.9 + 0.01 * (i % 5) as f64).collect();
        let r = welch_t_test(&a, &b).unwrap();
        assert!(r.t > 0.0 && r.p_greater < 1e-6);
        let r = welch_t_test(&b, &a).unwrap();
        assert!(r.p_greater > 0.99);
    }
}
