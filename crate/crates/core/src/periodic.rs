//! Periodic drivers as trigonometric polynomials.
//!
//! A [`TrigPoly`] stores a finite set of complex Fourier coefficients against
//! the base frequency `2π/P`. Everything the amplitude-scaling limit needs
//! from the drivers (mean-zero antiderivatives, Gram matrices of those
//! antiderivatives, period averages) is computed exactly from the
//! coefficients.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeriodicError {
    #[error("driver has non-zero mean {0:e}")]
    NonZeroMean(f64),
    #[error("period mismatch: {0} vs {1}")]
    PeriodMismatch(f64, f64),
    #[error("invalid period {0}")]
    InvalidPeriod(f64),
    #[error("coefficients at frequency ±{0} are not conjugate-symmetric")]
    NotConjugateSymmetric(i64),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error(
        "matrix is not positive semi-definite: eigenvalue {eigenvalue:e} below -{tolerance:e}"
    )]
    NotPsd { eigenvalue: f64, tolerance: f64 },
    #[error("driver is complex-valued where a real driver is required")]
    NotReal,
}

/// Finite Fourier series `Σ_k ĉ(k) exp(i k (2π/P) θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrigPolyRepr", into = "TrigPolyRepr")]
pub struct TrigPoly {
    period: f64,
    coeffs: BTreeMap<i64, Complex64>,
    real_valued: bool,
}

/// Wire form: the period plus `(k, re, im)` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigPolyRepr {
    pub period: f64,
    pub coeffs: Vec<(i64, f64, f64)>,
}

impl TryFrom<TrigPolyRepr> for TrigPoly {
    type Error = PeriodicError;

    fn try_from(r: TrigPolyRepr) -> Result<Self, Self::Error> {
        TrigPoly::from_triples(r.period, &r.coeffs)
    }
}

impl From<TrigPoly> for TrigPolyRepr {
    fn from(p: TrigPoly) -> Self {
        TrigPolyRepr {
            period: p.period,
            coeffs: p.triples(),
        }
    }
}

fn check_period(period: f64) -> Result<(), PeriodicError> {
    if period.is_finite() && period > 0.0 {
        Ok(())
    } else {
        Err(PeriodicError::InvalidPeriod(period))
    }
}

fn periods_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

impl TrigPoly {
    /// General (possibly complex-valued) polynomial. Zero coefficients are dropped.
    pub fn complex(
        period: f64,
        coeffs: impl IntoIterator<Item = (i64, Complex64)>,
    ) -> Result<Self, PeriodicError> {
        check_period(period)?;
        let mut map = BTreeMap::new();
        for (k, c) in coeffs {
            *map.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        map.retain(|_, c| c.norm() != 0.0);
        Ok(TrigPoly {
            period,
            coeffs: map,
            real_valued: false,
        })
    }

    /// Real-valued polynomial. Conjugate symmetry `ĉ(-k) = ĉ(k)*` is checked to
    /// a relative tolerance of 1e-12 and then imposed exactly.
    pub fn real(
        period: f64,
        coeffs: impl IntoIterator<Item = (i64, Complex64)>,
    ) -> Result<Self, PeriodicError> {
        let raw = Self::complex(period, coeffs)?;
        let scale = raw.l1_norm().max(f64::MIN_POSITIVE);
        let mut map = BTreeMap::new();
        for (&k, &c) in raw.coeffs.iter().filter(|(&k, _)| k >= 0) {
            if k == 0 {
                if c.im.abs() > 1e-12 * scale {
                    return Err(PeriodicError::NotConjugateSymmetric(0));
                }
                map.insert(0, Complex64::new(c.re, 0.0));
                continue;
            }
            let partner = raw.coeff(-k);
            if (partner - c.conj()).norm() > 1e-12 * scale {
                return Err(PeriodicError::NotConjugateSymmetric(k));
            }
            let avg = (c + partner.conj()) * 0.5;
            map.insert(k, avg);
            map.insert(-k, avg.conj());
        }
        for &k in raw.coeffs.keys().filter(|&&k| k < 0) {
            if !map.contains_key(&k) {
                return Err(PeriodicError::NotConjugateSymmetric(-k));
            }
        }
        map.retain(|_, c| c.norm() != 0.0);
        Ok(TrigPoly {
            period,
            coeffs: map,
            real_valued: true,
        })
    }

    /// Builds from `(k, re, im)` triples; real-valued when the triples are
    /// conjugate-symmetric, complex otherwise.
    pub fn from_triples(period: f64, triples: &[(i64, f64, f64)]) -> Result<Self, PeriodicError> {
        let it = triples
            .iter()
            .map(|&(k, re, im)| (k, Complex64::new(re, im)));
        match Self::real(period, it.clone()) {
            Ok(p) => Ok(p),
            Err(PeriodicError::NotConjugateSymmetric(_)) => Self::complex(period, it),
            Err(e) => Err(e),
        }
    }

    pub fn zero(period: f64) -> Self {
        Self::real(period, []).expect("zero polynomial")
    }

    pub fn constant(value: f64, period: f64) -> Self {
        Self::real(period, [(0, Complex64::new(value, 0.0))]).expect("constant polynomial")
    }

    /// `cos(k·2πθ/P)`.
    pub fn cos(k: i64, period: f64) -> Self {
        if k == 0 {
            return Self::constant(1.0, period);
        }
        let h = Complex64::new(0.5, 0.0);
        Self::real(period, [(k, h), (-k, h)]).expect("cosine")
    }

    /// `sin(k·2πθ/P)`.
    pub fn sin(k: i64, period: f64) -> Self {
        if k == 0 {
            return Self::zero(period);
        }
        Self::real(
            period,
            [
                (k, Complex64::new(0.0, -0.5)),
                (-k, Complex64::new(0.0, 0.5)),
            ],
        )
        .expect("sine")
    }

    /// `exp(i k·2πθ/P)`, complex-valued.
    pub fn exp_i(k: i64, period: f64) -> Self {
        Self::complex(period, [(k, Complex64::new(1.0, 0.0))]).expect("exponential")
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn is_real(&self) -> bool {
        self.real_valued
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        self.coeffs.get(&k).copied().unwrap_or_default()
    }

    pub fn coeffs(&self) -> &BTreeMap<i64, Complex64> {
        &self.coeffs
    }

    pub fn frequencies(&self) -> impl Iterator<Item = i64> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn max_frequency(&self) -> i64 {
        self.coeffs.keys().map(|k| k.abs()).max().unwrap_or(0)
    }

    pub fn triples(&self) -> Vec<(i64, f64, f64)> {
        self.coeffs.iter().map(|(&k, c)| (k, c.re, c.im)).collect()
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    /// Mean over one period, `ĉ(0)`.
    pub fn mean(&self) -> Complex64 {
        self.coeff(0)
    }

    pub fn is_mean_zero(&self) -> bool {
        !self.coeffs.contains_key(&0)
    }

    fn omega(&self) -> f64 {
        TAU / self.period
    }

    pub fn eval_complex(&self, theta: f64) -> Complex64 {
        let t = theta.rem_euclid(self.period) * self.omega();
        self.coeffs
            .iter()
            .map(|(&k, &c)| c * Complex64::from_polar(1.0, k as f64 * t))
            .sum()
    }

    /// Real value at `θ`. Only valid for real-valued polynomials.
    pub fn eval(&self, theta: f64) -> f64 {
        assert!(self.real_valued, "eval on a complex-valued TrigPoly");
        let t = theta.rem_euclid(self.period) * self.omega();
        let mut acc = self.coeff(0).re;
        for (&k, &c) in self.coeffs.range(1..) {
            let (s, co) = (k as f64 * t).sin_cos();
            acc += 2.0 * (c.re * co - c.im * s);
        }
        acc
    }

    /// Derivative in θ.
    pub fn derivative(&self) -> Self {
        let w = self.omega();
        TrigPoly {
            period: self.period,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(&k, _)| k != 0)
                .map(|(&k, &c)| (k, c * Complex64::new(0.0, k as f64 * w)))
                .collect(),
            real_valued: self.real_valued,
        }
    }

    /// Mean-zero antiderivative `Φ` with `Φ' = φ`; requires `φ̂(0) = 0`.
    pub fn antiderivative_mean_zero(&self) -> Result<Self, PeriodicError> {
        let m = self.mean();
        if m.norm() != 0.0 {
            return Err(PeriodicError::NonZeroMean(m.norm()));
        }
        let w = self.omega();
        Ok(TrigPoly {
            period: self.period,
            coeffs: self
                .coeffs
                .iter()
                .map(|(&k, &c)| (k, c / Complex64::new(0.0, k as f64 * w)))
                .collect(),
            real_valued: self.real_valued,
        })
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.values_mut().for_each(|c| *c *= a);
        out.coeffs.retain(|_, c| c.norm() != 0.0);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self, PeriodicError> {
        if !periods_match(self.period, other.period) {
            return Err(PeriodicError::PeriodMismatch(self.period, other.period));
        }
        let mut coeffs = self.coeffs.clone();
        for (&k, &c) in &other.coeffs {
            *coeffs.entry(k).or_default() += c;
        }
        coeffs.retain(|_, c| c.norm() != 0.0);
        Ok(TrigPoly {
            period: self.period,
            coeffs,
            real_valued: self.real_valued && other.real_valued,
        })
    }

    /// Pointwise product (coefficient convolution).
    pub fn mul(&self, other: &Self) -> Result<Self, PeriodicError> {
        if !periods_match(self.period, other.period) {
            return Err(PeriodicError::PeriodMismatch(self.period, other.period));
        }
        let mut coeffs: BTreeMap<i64, Complex64> = BTreeMap::new();
        for (&k, &a) in &self.coeffs {
            for (&l, &b) in &other.coeffs {
                *coeffs.entry(k + l).or_default() += a * b;
            }
        }
        if self.real_valued && other.real_valued {
            Self::real(self.period, coeffs)
        } else {
            Self::complex(self.period, coeffs)
        }
    }
}

/// Covariance matrix `C` of a limiting Wiener driver with its symmetric PSD
/// square root `S` (`S·S = C`).
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceForm {
    c: DMatrix<f64>,
    s: DMatrix<f64>,
}

impl CovarianceForm {
    /// Symmetrizes `c` and computes its square root.
    pub fn from_matrix(c: DMatrix<f64>) -> Result<Self, PeriodicError> {
        let c = symmetrize(&c)?;
        let s = psd_sqrt(&c)?;
        Ok(CovarianceForm { c, s })
    }

    pub fn zeros(dim: usize) -> Self {
        CovarianceForm {
            c: DMatrix::zeros(dim, dim),
            s: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.s
    }
}

fn symmetrize(c: &DMatrix<f64>) -> Result<DMatrix<f64>, PeriodicError> {
    if c.nrows() != c.ncols() {
        return Err(PeriodicError::NotSymmetric(f64::INFINITY));
    }
    let scale = 1.0 + c.amax();
    let asym = (c - c.transpose()).amax();
    if asym > 1e-8 * scale {
        return Err(PeriodicError::NotSymmetric(asym));
    }
    Ok((c + c.transpose()) * 0.5)
}

/// PSD tolerance `1e-10·(1 + ‖C‖_max)`.
pub fn psd_tolerance(c: &DMatrix<f64>) -> f64 {
    1e-10 * (1.0 + c.amax())
}

/// Symmetric PSD square root by eigendecomposition; eigenvalues within
/// [`psd_tolerance`] below zero are clamped.
pub fn psd_sqrt(c: &DMatrix<f64>) -> Result<DMatrix<f64>, PeriodicError> {
    let n = c.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let c = symmetrize(c)?;
    let tol = psd_tolerance(&c);
    let eig = c.symmetric_eigen();
    let mut roots = eig.eigenvalues.clone();
    for l in roots.iter_mut() {
        if *l < -tol {
            return Err(PeriodicError::NotPsd {
                eigenvalue: *l,
                tolerance: tol,
            });
        }
        *l = l.max(0.0).sqrt();
    }
    let q = &eig.eigenvectors;
    let s = q * DMatrix::from_diagonal(&roots) * q.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// Gram matrix `c_{αβ} = (1/P)∫Φ_αΦ_β = Σ_k Φ̂_α(-k)Φ̂_β(k)`.
pub fn gram_matrix(list: &[TrigPoly]) -> Result<CovarianceForm, PeriodicError> {
    if let Some(first) = list.first() {
        for p in list {
            if !periods_match(first.period, p.period) {
                return Err(PeriodicError::PeriodMismatch(first.period, p.period));
            }
            if !p.real_valued {
                return Err(PeriodicError::NotReal);
            }
            if !p.is_mean_zero() {
                return Err(PeriodicError::NonZeroMean(p.mean().norm()));
            }
        }
    }
    let d = list.len();
    let c = DMatrix::from_fn(d, d, |a, b| {
        list[b]
            .coeffs
            .iter()
            .map(|(&k, &cb)| (list[a].coeff(-k) * cb).re)
            .sum::<f64>()
    });
    CovarianceForm::from_matrix(c)
}

/// Rectangle rule on the periodic grid `θ_j = jP/n`; exact for trigonometric
/// polynomials of degree below `n`.
pub fn average_over_period(g: impl Fn(f64) -> f64, period: f64, n: usize) -> f64 {
    assert!(n >= 2, "average_over_period needs at least 2 nodes");
    let h = period / n as f64;
    (0..n).map(|j| g(j as f64 * h)).sum::<f64>() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    /// Independent oracle: midpoint quadrature of (1/P)∫ f g over one period.
    fn quad(f: impl Fn(f64) -> f64, p: f64, n: usize) -> f64 {
        let h = p / n as f64;
        (0..n).map(|j| f((j as f64 + 0.5) * h)).sum::<f64>() * h / p
    }

    #[test]
    fn eval_basics() {
        assert_abs_diff_eq!(TrigPoly::cos(1, TAU).eval(0.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(TrigPoly::sin(1, TAU).eval(PI / 2.0), 1.0, epsilon = 1e-15);
        let f = TrigPoly::cos(2, TAU).add(&TrigPoly::sin(3, TAU)).unwrap();
        assert!(quad(|t| f.eval(t), TAU, 1000).abs() < 1e-12);
    }

    #[test]
    fn antiderivatives() {
        let phi = TrigPoly::cos(1, TAU).antiderivative_mean_zero().unwrap();
        for t in [0.0, 0.3, 2.0, 5.5] {
            assert_abs_diff_eq!(phi.eval(t), t.sin(), epsilon = 1e-14);
        }
        let phi = TrigPoly::sin(1, TAU).antiderivative_mean_zero().unwrap();
        for t in [0.0, 0.3, 2.0, 5.5] {
            assert_abs_diff_eq!(phi.eval(t), -t.cos(), epsilon = 1e-14);
        }
        let f = TrigPoly::cos(2, TAU).add(&TrigPoly::sin(3, TAU)).unwrap();
        let big_phi = f.antiderivative_mean_zero().unwrap();
        let h = 1e-4;
        for t in [0.1, 1.0, 2.5, 4.0] {
            assert_abs_diff_eq!(
                big_phi.eval(t),
                (2.0 * t).sin() / 2.0 - (3.0 * t).cos() / 3.0,
                epsilon = 1e-14
            );
            // central difference of Φ recovers φ (truncation ~ h²·|Φ'''|/6)
            let fd = (big_phi.eval(t + h) - big_phi.eval(t - h)) / (2.0 * h);
            assert_abs_diff_eq!(fd, f.eval(t), epsilon = 1e-7);
        }
        // second antiderivative: Ψ'' = φ, zero mean
        let psi = big_phi.antiderivative_mean_zero().unwrap();
        assert!(psi.is_mean_zero());
        assert_eq!(psi.derivative().derivative(), f);
    }

    #[test]
    fn nonzero_mean_rejected() {
        let f = TrigPoly::cos(1, TAU)
            .add(&TrigPoly::constant(0.5, TAU))
            .unwrap();
        assert!(matches!(
            f.antiderivative_mean_zero(),
            Err(PeriodicError::NonZeroMean(_))
        ));
    }

    #[test]
    fn gram_of_cos_sin() {
        let list: Vec<_> = [TrigPoly::cos(1, TAU), TrigPoly::sin(1, TAU)]
            .iter()
            .map(|p| p.antiderivative_mean_zero().unwrap())
            .collect();
        let form = gram_matrix(&list).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let oracle = quad(|t| list[a].eval(t) * list[b].eval(t), TAU, 10_000);
                assert_abs_diff_eq!(form.matrix()[(a, b)], oracle, epsilon = 1e-10);
            }
        }
        assert_abs_diff_eq!(form.matrix()[(0, 0)], 0.5, epsilon = 1e-15);

        let single = gram_matrix(&list[1..]).unwrap();
        assert_abs_diff_eq!(single.matrix()[(0, 0)], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(single.sqrt()[(0, 0)], FRAC_1_SQRT_2, epsilon = 1e-10);

        assert_eq!(gram_matrix(&[]).unwrap().dim(), 0);
    }

    #[test]
    fn gram_period_mismatch() {
        let a = TrigPoly::sin(1, TAU);
        let b = TrigPoly::sin(1, 1.0);
        assert!(matches!(
            gram_matrix(&[a, b]),
            Err(PeriodicError::PeriodMismatch(..))
        ));
    }

    #[test]
    fn psd_sqrt_cases() {
        let d = DMatrix::from_diagonal_element(2, 2, 0.5);
        let s = psd_sqrt(&d).unwrap();
        assert!((s - DMatrix::from_diagonal_element(2, 2, FRAC_1_SQRT_2)).amax() < 1e-15);
        let i = DMatrix::<f64>::identity(3, 3);
        assert!((psd_sqrt(&i).unwrap() - &i).amax() < 1e-15);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let s = psd_sqrt(&m).unwrap();
        assert!((&s * &s - &m).amax() < 1e-12);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(psd_sqrt(&bad), Err(PeriodicError::NotPsd { .. })));
        // tiny negative eigenvalue is clamped
        let nearly = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-13]);
        let s = psd_sqrt(&nearly).unwrap();
        assert_eq!(s[(1, 1)], 0.0);
    }

    #[test]
    fn period_averages() {
        assert_abs_diff_eq!(
            average_over_period(|t| t.cos().powi(2), TAU, 64),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            average_over_period(|t| t.cos() * t.sin(), TAU, 64),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            average_over_period(|t| 1.0 + (3.0 * t).cos(), TAU, 64),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn products_and_serde() {
        let c = TrigPoly::cos(1, TAU);
        let c2 = c.mul(&c).unwrap();
        assert_abs_diff_eq!(c2.mean().re, 0.5, epsilon = 1e-15);
        for t in [0.2, 1.7] {
            assert_abs_diff_eq!(c2.eval(t), t.cos().powi(2), epsilon = 1e-14);
        }
        let json = serde_json::to_string(&c).unwrap();
        let back: TrigPoly = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        let e = TrigPoly::exp_i(1, TAU);
        assert!(!e.is_real());
        let back: TrigPoly = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert!(!back.is_real());
    }

    fn arb_poly() -> impl Strategy<Value = TrigPoly> {
        prop::collection::vec((1i64..6, -1.0f64..1.0, -1.0f64..1.0), 1..5).prop_map(|terms| {
            let mut coeffs = Vec::new();
            for (k, re, im) in terms {
                coeffs.push((k, Complex64::new(re, im)));
                coeffs.push((-k, Complex64::new(re, -im)));
            }
            TrigPoly::real(TAU, coeffs).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn antiderivative_differentiates_back(f in arb_poly(), ts in prop::collection::vec(0.0f64..TAU, 100)) {
            let big = f.antiderivative_mean_zero().unwrap();
            let h = 1e-5 * TAU;
            for t in ts {
                let fd = (big.eval(t + h) - big.eval(t - h)) / (2.0 * h);
                prop_assert!((fd - f.eval(t)).abs() < 1e-6);
            }
        }

        #[test]
        fn periodic_to_few_ulps(f in arb_poly(), t in -50.0f64..50.0) {
            let scale = f.l1_norm().max(1.0);
            prop_assert!((f.eval(t + TAU) - f.eval(t)).abs() <= 4.0 * f64::EPSILON * scale * (1.0 + t.abs()));
        }

        #[test]
        fn gram_is_psd_and_matches_quadrature(fam in prop::collection::vec(arb_poly(), 1..7)) {
            let anti: Vec<_> = fam.iter().map(|p| p.antiderivative_mean_zero().unwrap()).collect();
            let form = gram_matrix(&anti).unwrap();
            let eig = form.matrix().clone().symmetric_eigen();
            prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-12));
            let d = anti.len();
            for a in 0..d {
                for b in 0..d {
                    let q = quad(|t| anti[a].eval(t) * anti[b].eval(t), TAU, 256);
                    prop_assert!((form.matrix()[(a, b)] - q).abs() < 1e-9);
                    // integration by parts: c_ab = -(1/P)∫ φ_a Ψ_b
                    let psi_b = anti[b].antiderivative_mean_zero().unwrap();
                    let ibp = -quad(|t| fam[a].eval(t) * psi_b.eval(t), TAU, 256);
                    prop_assert!((form.matrix()[(a, b)] - ibp).abs() < 1e-9);
                }
            }
            let s = form.sqrt();
            prop_assert!((s * s - form.matrix()).amax() <= 1e-10 * (1.0 + form.matrix().amax()));
        }
    }
}
