//! Sample statistics with standard errors, computed sequentially so results
//! are reproducible bit for bit.

use nalgebra::DMatrix;

/// Mean and its standard error `sd/√n`.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Unbiased variance and its large-sample standard error `√((m₄ - s⁴)/n)`.
pub fn variance_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (v, ((m4 - v * v).max(0.0) / n).sqrt())
}

/// Sample covariance of row vectors and the standard error of each entry
/// (standard error of the mean of centered products).
pub fn covariance_with_se(rows: &[Vec<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = rows.len();
    let d = rows.first().map_or(0, |r| r.len());
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);
    let mut cov = DMatrix::zeros(d, d);
    let mut se = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let prods: Vec<f64> = rows
                .iter()
                .map(|r| (r[i] - mean[i]) * (r[j] - mean[j]))
                .collect();
            let s = prods.iter().sum::<f64>();
            let c = s / (nf - 1.0);
            let pm = s / nf;
            let pv = prods.iter().map(|p| (p - pm).powi(2)).sum::<f64>() / (nf - 1.0);
            let e = (pv / nf).sqrt();
            cov[(i, j)] = c;
            cov[(j, i)] = c;
            se[(i, j)] = e;
            se[(j, i)] = e;
        }
    }
    (cov, se)
}

pub fn combined_se(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}
