use serde::Serialize;

use super::LabError;

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64, LabError> {
    if a.is_empty() || b.is_empty() {
        return Err(LabError::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic two-sample KS critical value at level `alpha`:
/// `√(−½ ln(α/2)) · √((n+m)/(nm))`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    (-0.5 * (alpha / 2.0).ln()).sqrt() * ((n + m) / (n * m)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares of `log error` against `log ε`.
pub fn rate_fit(errors: &[f64], epsilons: &[f64]) -> Result<RateFit, LabError> {
    if errors.len() != epsilons.len() || errors.len() < 3 {
        return Err(LabError::DegenerateFit(format!(
            "{} errors for {} rungs (need ≥ 3)",
            errors.len(),
            epsilons.len()
        )));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(LabError::DegenerateFit(format!(
            "error {e} is not positive"
        )));
    }
    let xs: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::DegenerateFit("all ε equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::path_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn ks_edge_cases() {
        let a = [0.3, 1.0, -2.0, 0.3];
        assert_eq!(ks_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_distance(&[0.0, 1.0], &[2.0, 3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(ks_distance(&[], &a), Err(LabError::EmptySample));
        // hand value: F_a jumps at 1,2; F_b at 1.5
        assert_eq!(ks_distance(&[1.0, 2.0], &[1.5]).unwrap(), 0.5);
    }

    #[test]
    fn ks_critical_matches_table() {
        // 1% two-sided coefficient 1.628
        let c = ks_critical(10_000, 10_000, 0.01);
        assert!((c - 1.6276 * (2.0f64 / 1e4).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn ks_same_law_below_critical_value() {
        let n = 10_000;
        let crit = ks_critical(n, n, 0.01);
        let passes = (0..100u64)
            .filter(|&s| {
                let mut r1 = path_rng(s, 0);
                let mut r2 = path_rng(s, 1);
                let a: Vec<f64> = (0..n).map(|_| r1.sample(StandardNormal)).collect();
                let b: Vec<f64> = (0..n).map(|_| r2.sample(StandardNormal)).collect();
                ks_distance(&a, &b).unwrap() < crit
            })
            .count();
        assert!(passes >= 95, "{passes}/100");
    }

    #[test]
    fn rate_fit_synthetic() {
        let eps = [0.4, 0.2, 0.1, 0.05];
        let f = rate_fit(&eps, &eps).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let sq: Vec<f64> = eps.iter().map(|e| 3.0 * e * e).collect();
        let f = rate_fit(&sq, &eps).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(rate_fit(&[0.1, 0.0, 0.2], &[0.4, 0.2, 0.1]).is_err());
        assert!(rate_fit(&[0.1, 0.2], &[0.4, 0.2]).is_err());
    }
}
