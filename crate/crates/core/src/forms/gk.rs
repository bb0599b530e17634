use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::grid::{discrete_potential, SchrodingerGrid1D};
use super::FormsError;
use crate::periodic::{PeriodicError, TrigPoly};

/// Solution of `(½∂² − U'∂ + ikρ) g_k = 1` and its invariant average `ḡ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GkSolution {
    pub k: i64,
    pub gbar: Complex64,
    /// `g_k` at the grid nodes (zero at the Dirichlet ends).
    pub g: Vec<Complex64>,
}

/// With `φ = q g` the equation becomes `(H_h − ikρ) φ = −q`, a complex
/// tridiagonal system solved directly; `ḡ_k = Σ q φ / Σ q²`.
pub fn solve_gk(
    grid: &SchrodingerGrid1D,
    rho: impl Fn(f64) -> f64,
    k: i64,
) -> Result<GkSolution, FormsError> {
    if k == 0 {
        return Err(FormsError::SolverSingular { k });
    }
    let rho_vals: Vec<f64> = grid.nodes().iter().map(|&z| rho(z)).collect();
    let (q, h) = grid.sub(1);
    let phi = solve_on(&q, &rho_vals, h, k)?;
    let fine = average(&q, &phi);
    let gbar = if grid.richardson() {
        let (q2, h2) = grid.sub(2);
        let r2: Vec<f64> = rho_vals.iter().step_by(2).copied().collect();
        let coarse = average(&q2, &solve_on(&q2, &r2, h2, k)?);
        (fine * 4.0 - coarse) / 3.0
    } else {
        fine
    };
    if !(gbar.re.is_finite() && gbar.im.is_finite()) {
        return Err(FormsError::SolverSingular { k });
    }
    let g = phi.iter().zip(&q).map(|(p, q)| p / q).collect();
    Ok(GkSolution { k, gbar, g })
}

fn average(q: &[f64], phi: &[Complex64]) -> Complex64 {
    let num: Complex64 = q.iter().zip(phi).map(|(q, p)| p * q).sum();
    num / q.iter().map(|q| q * q).sum::<f64>()
}

fn solve_on(q: &[f64], rho: &[f64], h: f64, k: i64) -> Result<Vec<Complex64>, FormsError> {
    let n = q.len();
    let vh = discrete_potential(q, h);
    let off = Complex64::new(-0.5 / (h * h), 0.0);
    let m = n - 2;
    let diag: Vec<Complex64> = (0..m)
        .map(|i| Complex64::new(1.0 / (h * h) + vh[i], -(k as f64) * rho[i + 1]))
        .collect();
    let rhs: Vec<Complex64> = (0..m).map(|i| Complex64::new(-q[i + 1], 0.0)).collect();
    let interior = thomas(&diag, off, &rhs).ok_or(FormsError::SolverSingular { k })?;
    let mut phi = vec![Complex64::new(0.0, 0.0); n];
    phi[1..n - 1].copy_from_slice(&interior);
    Ok(phi)
}

/// Tridiagonal solve with constant off-diagonals.
fn thomas(diag: &[Complex64], off: Complex64, rhs: &[Complex64]) -> Option<Vec<Complex64>> {
    let m = diag.len();
    let mut c = vec![Complex64::new(0.0, 0.0); m];
    let mut d = vec![Complex64::new(0.0, 0.0); m];
    let mut piv = diag[0];
    if piv.norm() < 1e-300 {
        return None;
    }
    c[0] = off / piv;
    d[0] = rhs[0] / piv;
    for i in 1..m {
        piv = diag[i] - off * c[i - 1];
        if piv.norm() < 1e-300 || !piv.re.is_finite() {
            return None;
        }
        c[i] = off / piv;
        d[i] = (rhs[i] - off * d[i - 1]) / piv;
    }
    let mut x = d;
    for i in (0..m - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    x.iter()
        .all(|v| v.re.is_finite() && v.im.is_finite())
        .then_some(x)
}

/// `ḡ_k` for a set of frequencies; `k` and `−k` are solved independently.
#[derive(Debug, Clone)]
pub struct GkTable {
    entries: BTreeMap<i64, GkSolution>,
    /// `max |ρ|² / (V + c_V)` on the grid, with `c_V = max(0, −min V) + 1`.
    pub a_v: f64,
    pub c_v: f64,
}

impl GkTable {
    pub fn build(
        grid: &SchrodingerGrid1D,
        rho: impl Fn(f64) -> f64,
        ks: impl IntoIterator<Item = i64>,
    ) -> Result<Self, FormsError> {
        let mut entries = BTreeMap::new();
        for k in ks {
            for kk in [k.abs(), -k.abs()] {
                if kk != 0 && !entries.contains_key(&kk) {
                    entries.insert(kk, solve_gk(grid, &rho, kk)?);
                }
            }
        }
        let c_v = grid.c_v() + 1.0;
        let a_v = grid
            .nodes()
            .iter()
            .zip(grid.v())
            .map(|(&z, &v)| rho(z).powi(2) / (v + c_v))
            .fold(0.0, f64::max);
        Ok(GkTable { entries, a_v, c_v })
    }

    /// Table covering every nonzero frequency of the given drivers.
    pub fn for_drivers(
        grid: &SchrodingerGrid1D,
        rho: impl Fn(f64) -> f64,
        drivers: &[TrigPoly],
    ) -> Result<Self, FormsError> {
        let ks: Vec<i64> = drivers
            .iter()
            .flat_map(|p| p.frequencies().collect::<Vec<_>>())
            .collect();
        GkTable::build(grid, rho, ks)
    }

    pub fn gbar(&self, k: i64) -> Option<Complex64> {
        self.entries.get(&k).map(|s| s.gbar)
    }

    pub fn solution(&self, k: i64) -> Option<&GkSolution> {
        self.entries.get(&k)
    }

    pub fn frequencies(&self) -> impl Iterator<Item = i64> + '_ {
        self.entries.keys().copied()
    }

    /// CSV `k,re,im`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["k", "re", "im"])?;
        for (k, s) in &self.entries {
            wr.write_record([k.to_string(), s.gbar.re.to_string(), s.gbar.im.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `⟨φ₁,φ₂⟩_{M,Z} = −Σ_k conj(φ̂₁(k)) φ̂₂(k) ḡ_k` for 2π-periodic, mean-zero drivers.
pub fn form_integrated(
    phi1: &TrigPoly,
    phi2: &TrigPoly,
    table: &GkTable,
) -> Result<Complex64, FormsError> {
    for p in [phi1, phi2] {
        if (p.period() - TAU).abs() > 1e-12 * TAU {
            return Err(PeriodicError::PeriodMismatch(TAU, p.period()).into());
        }
        if !p.is_mean_zero() {
            return Err(PeriodicError::NonZeroMean(p.mean().norm()).into());
        }
    }
    let mut s = Complex64::new(0.0, 0.0);
    for (&k, &c2) in phi2.coeffs() {
        let c1 = phi1.coeff(k);
        if c1.norm() == 0.0 {
            continue;
        }
        let g = table.gbar(k).ok_or(FormsError::MissingFrequency(k))?;
        s -= c1.conj() * c2 * g;
    }
    Ok(s)
}

/// Real covariance matrix `Re⟨φ_α, φ_β⟩_{M,Z}` for real drivers.
pub fn integrated_covariance(
    phi: &[TrigPoly],
    table: &GkTable,
) -> Result<DMatrix<f64>, FormsError> {
    let d = phi.len();
    let mut c = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            c[(a, b)] = form_integrated(&phi[a], &phi[b], table)?.re;
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::ou::{ou_closed_form_k1, ou_integrated_form};
    use crate::systems::Potential;

    fn ou_grid() -> SchrodingerGrid1D {
        SchrodingerGrid1D::new(&Potential::Quadratic { c: 1.0 }.field(), -8.0, 8.0, 4000).unwrap()
    }

    #[test]
    fn ou_gbar_matches_series() {
        let g = ou_grid();
        let t = GkTable::build(&g, |z| z, 1..=2).unwrap();
        let g1 = t.gbar(1).unwrap();
        let want = ou_closed_form_k1();
        assert!(((-g1.re) - want).abs() < 1e-6 * want, "{g1}");
        assert!(g1.im.abs() < 1e-9);
        let s2 = ou_integrated_form(2, 2, 400).re;
        assert!(((-t.gbar(2).unwrap().re) - s2).abs() < 1e-6 * s2);
    }

    #[test]
    fn conjugation_and_sign() {
        let g = ou_grid();
        // asymmetric ρ so that ḡ_k is genuinely complex
        let t = GkTable::build(&g, |z| z + 0.3 * z * z - 0.15, 1..=5).unwrap();
        for k in 1..=5 {
            let (p, m) = (t.gbar(k).unwrap(), t.gbar(-k).unwrap());
            assert!((p - m.conj()).norm() <= 1e-10);
            assert!(p.re <= 1e-10);
        }
        assert!(t.gbar(1).unwrap().im.abs() > 1e-6);
        assert!(t.a_v.is_finite());
    }

    #[test]
    fn cos_cos_and_cos_sin() {
        let g = ou_grid();
        let (c, s) = (TrigPoly::cos(1, TAU), TrigPoly::sin(1, TAU));
        let t = GkTable::for_drivers(&g, |z| z, &[c.clone(), s.clone()]).unwrap();
        let cc = form_integrated(&c, &c, &t).unwrap();
        assert!((cc.re - 0.5 * ou_closed_form_k1()).abs() < 1e-6);
        assert!(cc.im.abs() < 1e-12);
        assert!(form_integrated(&c, &s, &t).unwrap().norm() < 1e-9);
        let z = TrigPoly::zero(TAU);
        assert_eq!(
            form_integrated(&z, &c, &t).unwrap(),
            Complex64::new(0.0, 0.0)
        );
        let cov = integrated_covariance(&[c, s], &t).unwrap();
        assert!((cov[(0, 0)] - cov[(1, 1)]).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let g = ou_grid();
        let t = GkTable::build(&g, |z| z, [1]).unwrap();
        let c2 = TrigPoly::cos(2, TAU);
        assert_eq!(
            form_integrated(&c2, &c2, &t),
            Err(FormsError::MissingFrequency(-2))
        );
        let bad = TrigPoly::constant(1.0, TAU);
        assert!(matches!(
            form_integrated(&bad, &bad, &t),
            Err(FormsError::Periodic(_))
        ));
        let p = TrigPoly::cos(1, 1.0);
        assert!(matches!(
            form_integrated(&p, &p, &t),
            Err(FormsError::Periodic(_))
        ));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,re,im\n-1,"));
    }
}
