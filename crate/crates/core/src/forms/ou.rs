use std::f64::consts::{E, FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::periodic::TrigPoly;

/// Default cap on series terms for [`ou_integrated_form`].
pub const OU_SERIES_MAX_TERMS: usize = 400;

/// `⟨e^{iℓm}, e^{ikm}⟩_{M,Z}` for `dM = Z dt`, `dZ = −Z dt + dW`:
/// `e^{k²/2} δ_{kℓ} Σ_n (−1)ⁿ k^{2n} / ((n + k²/2) 2ⁿ n!)`.
///
/// Summation stops once the next term is below `1e−14` of the partial sum,
/// or after `n_terms` terms. For `|k| ≥ 4` the alternating terms grow to
/// about `e^{k²/2}` before decaying, so the equal closed form
/// `e^a a^{−a} Γ(a) P(a, a)` with `a = k²/2` is used instead.
pub fn ou_integrated_form(k: i64, l: i64, n_terms: usize) -> Complex64 {
    if k != l || k == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let a = (k * k) as f64 / 2.0;
    let v = if k.abs() < 4 {
        a.exp() * series(a, n_terms)
    } else {
        incomplete_gamma_form(a)
    };
    Complex64::new(v, 0.0)
}

/// `Σ_n (−a)ⁿ / (n! (n + a))` with compensated summation.
fn series(a: f64, n_terms: usize) -> f64 {
    let mut t = 1.0; // (−a)ⁿ/n!
    let mut sum = 0.0;
    let mut comp = 0.0;
    for n in 0..n_terms.max(1) {
        let term = t / (n as f64 + a);
        let s = sum + term;
        comp += if sum.abs() >= term.abs() {
            (sum - s) + term
        } else {
            (term - s) + sum
        };
        sum = s;
        t *= -a / (n as f64 + 1.0);
        let next = t / (n as f64 + 1.0 + a);
        if n as f64 > a && next.abs() < 1e-14 * (sum + comp).abs() {
            break;
        }
    }
    sum + comp
}

fn incomplete_gamma_form(a: f64) -> f64 {
    (a - a * a.ln() + ln_gamma(a)).exp() * gamma_lr(a, a)
}

/// `√(2eπ) erf(1/√2)`.
pub fn ou_closed_form_k1() -> f64 {
    (2.0 * E * PI).sqrt() * libm::erf(FRAC_1_SQRT_2)
}

/// Real matrix `Σ_k conj(φ̂_α(k)) φ̂_β(k) ⟨e^{ikm}, e^{ikm}⟩` in the OU case.
pub fn ou_form_matrix(phi: &[TrigPoly]) -> DMatrix<f64> {
    let d = phi.len();
    DMatrix::from_fn(d, d, |a, b| {
        phi[b]
            .coeffs()
            .iter()
            .map(|(&k, &cb)| {
                (phi[a].coeff(k).conj() * cb * ou_integrated_form(k, k, OU_SERIES_MAX_TERMS)).re
            })
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    /// `∫₀^∞ exp(−a(t − 1 + e^{−t})) dt` by composite Simpson on `[0, 60]`.
    fn integral_oracle(a: f64) -> f64 {
        let n = 600_000;
        let h = 60.0 / n as f64;
        let f = |t: f64| (-a * (t - 1.0 + (-t).exp())).exp();
        let mut s = f(0.0) + f(60.0);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn k1_equals_erf_closed_form() {
        let v = ou_integrated_form(1, 1, OU_SERIES_MAX_TERMS);
        assert!((v.re - ou_closed_form_k1()).abs() < 1e-10);
        assert!((v.re - 2.821_372_27).abs() < 1e-7);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn kronecker_delta_and_zero_frequency() {
        assert_eq!(ou_integrated_form(1, 2, 100), Complex64::new(0.0, 0.0));
        assert_eq!(ou_integrated_form(0, 0, 100), Complex64::new(0.0, 0.0));
        assert_eq!(
            ou_integrated_form(-3, -3, 100),
            ou_integrated_form(3, 3, 100)
        );
    }

    #[test]
    fn series_matches_time_integral_and_gamma_form() {
        for k in 1..=6i64 {
            let a = (k * k) as f64 / 2.0;
            let v = ou_integrated_form(k, k, OU_SERIES_MAX_TERMS).re;
            let oracle = integral_oracle(a);
            assert!((v - oracle).abs() < 1e-9 * oracle, "k={k}: {v} vs {oracle}");
            if k < 4 {
                let g = incomplete_gamma_form(a);
                assert!((v - g).abs() < 1e-12 * g);
            }
        }
    }

    #[test]
    fn cos_matrix() {
        let m = ou_form_matrix(&[TrigPoly::cos(1, TAU), TrigPoly::sin(1, TAU)]);
        assert!((m[(0, 0)] - 0.5 * ou_closed_form_k1()).abs() < 1e-12);
        assert!(m[(0, 1)].abs() < 1e-15);
    }
}
