use serde::Serialize;

use super::grid::{SchrodingerGrid1D, GROUND_STATE_TOL};
use super::FormsError;

/// Value of `⟨φ,ψ⟩_M` with the invariant means removed from the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErgodicForm {
    pub value: f64,
    /// Spacing-`h` value before extrapolation.
    pub fine: f64,
    /// Spacing-`2h` value, when Richardson extrapolation is on.
    pub coarse: Option<f64>,
    pub removed_mean_phi: f64,
    pub removed_mean_psi: f64,
}

/// `⟨φ,ψ⟩_M = (1/K) ∫ (e^{−U}φ) H⁻¹ (e^{−U}ψ) dz` for `dM = −U'(M)dt + dW`.
///
/// On the grid, `H_h(q g) = −(1/(2h²q_i)) [q_i q_{i+1}(g_{i+1} − g_i) − q_{i−1}q_i(g_i − g_{i−1})]`,
/// so the solve reduces to summing fluxes and
/// `⟨φ,ψ⟩ = 2h² Σ_i A_φ(i) A_ψ(i) / (q_i q_{i+1}) / Σ_j q_j²` with
/// `A_φ(i) = Σ_{j≤i} q_j² φ̃_j`.
pub fn form_ergodic_1d(
    phi: impl Fn(f64) -> f64,
    psi: impl Fn(f64) -> f64,
    grid: &SchrodingerGrid1D,
) -> Result<ErgodicForm, FormsError> {
    let a: Vec<f64> = grid.nodes().iter().map(|&z| phi(z)).collect();
    let b: Vec<f64> = grid.nodes().iter().map(|&z| psi(z)).collect();
    form_ergodic_values(&a, &b, grid)
}

/// [`form_ergodic_1d`] for functions given by their node values.
pub fn form_ergodic_values(
    phi: &[f64],
    psi: &[f64],
    grid: &SchrodingerGrid1D,
) -> Result<ErgodicForm, FormsError> {
    let n = grid.nodes().len();
    if phi.len() != n || psi.len() != n {
        return Err(FormsError::InvalidGrid(format!(
            "grid functions have {} and {} values for {n} nodes",
            phi.len(),
            psi.len()
        )));
    }
    grid.check_ground_state(GROUND_STATE_TOL)?;
    let (q, h) = grid.sub(1);
    let (fine, mean_phi, mean_psi) = flux_form(&q, phi, psi, h);
    let (value, coarse) = if grid.richardson() {
        let (q2, h2) = grid.sub(2);
        let p2: Vec<f64> = phi.iter().step_by(2).copied().collect();
        let s2: Vec<f64> = psi.iter().step_by(2).copied().collect();
        let (c, _, _) = flux_form(&q2, &p2, &s2, h2);
        ((4.0 * fine - c) / 3.0, Some(c))
    } else {
        (fine, None)
    };
    if !value.is_finite() {
        return Err(FormsError::NotConverged(format!("form value {value}")));
    }
    Ok(ErgodicForm {
        value,
        fine,
        coarse,
        removed_mean_phi: mean_phi,
        removed_mean_psi: mean_psi,
    })
}

fn flux_form(q: &[f64], phi: &[f64], psi: &[f64], h: f64) -> (f64, f64, f64) {
    let w: Vec<f64> = q.iter().map(|q| q * q).collect();
    let total: f64 = w.iter().sum();
    let mean = |f: &[f64]| w.iter().zip(f).map(|(w, f)| w * f).sum::<f64>() / total;
    let (mp, ms) = (mean(phi), mean(psi));
    let a = partial_sums(&w, phi, mp, q);
    let b = if std::ptr::eq(phi, psi) {
        a.clone()
    } else {
        partial_sums(&w, psi, ms, q)
    };
    let s: f64 = (0..q.len() - 1)
        .map(|i| a[i] * b[i] / (q[i] * q[i + 1]))
        .sum();
    (2.0 * h * h * s / total, mp, ms)
}

/// `A(i) = Σ_{j≤i} w_j (f_j − m)`, accumulated from the nearer end so the
/// tails are not left as differences of large numbers.
fn partial_sums(w: &[f64], f: &[f64], m: f64, q: &[f64]) -> Vec<f64> {
    let n = w.len();
    let peak = q
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > q[best] { i } else { best });
    let mut a = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..peak {
        acc += w[i] * (f[i] - m);
        a[i] = acc;
    }
    let mut acc = 0.0;
    for i in (peak..n).rev() {
        a[i] = -acc;
        acc += w[i] * (f[i] - m);
    }
    a
}
