use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

pub type FieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

const INLINE: usize = 16;

/// Zeroed `f64` buffer kept on the stack for short lengths.
pub(crate) enum Scratch {
    Inline([f64; INLINE], usize),
    Heap(Vec<f64>),
}

impl Scratch {
    #[inline]
    pub(crate) fn zeros(n: usize) -> Self {
        if n <= INLINE {
            Scratch::Inline([0.0; INLINE], n)
        } else {
            Scratch::Heap(vec![0.0; n])
        }
    }

    #[inline]
    pub(crate) fn copy_of(x: &[f64]) -> Self {
        let mut s = Scratch::zeros(x.len());
        s.copy_from_slice(x);
        s
    }
}

impl std::ops::Deref for Scratch {
    type Target = [f64];
    #[inline]
    fn deref(&self) -> &[f64] {
        match self {
            Scratch::Inline(a, n) => &a[..*n],
            Scratch::Heap(v) => v,
        }
    }
}

impl std::ops::DerefMut for Scratch {
    #[inline]
    fn deref_mut(&mut self) -> &mut [f64] {
        match self {
            Scratch::Inline(a, n) => &mut a[..*n],
            Scratch::Heap(v) => v,
        }
    }
}

impl<'a> IntoIterator for &'a Scratch {
    type Item = &'a f64;
    type IntoIter = std::slice::Iter<'a, f64>;
    fn into_iter(self) -> Self::IntoIter {
        self.iter()
    }
}

/// Central-difference step for coordinate value `x`.
#[inline]
pub fn jacobian_step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

/// A map `R^{dim_in} → R^{dim_out}` with an optional analytic Jacobian.
///
/// Jacobians are row-major `dim_out × dim_in`. Without an analytic handle
/// they fall back to central differences with step [`jacobian_step`].
#[derive(Clone)]
pub struct VectorField {
    dim_in: usize,
    dim_out: usize,
    eval: FieldFn,
    jacobian: Option<FieldFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("dim_in", &self.dim_in)
            .field("dim_out", &self.dim_out)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl VectorField {
    /// `f(x, out)` must overwrite every entry of `out`.
    pub fn new(
        dim_in: usize,
        dim_out: usize,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        VectorField {
            dim_in,
            dim_out,
            eval: Arc::new(f),
            jacobian: None,
        }
    }

    /// Attaches an analytic Jacobian writing `dim_out × dim_in` row-major.
    pub fn with_jacobian(mut self, j: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(j));
        self
    }

    pub fn zero(dim_in: usize, dim_out: usize) -> Self {
        VectorField::new(dim_in, dim_out, |_, out| out.fill(0.0)).with_jacobian(|_, j| j.fill(0.0))
    }

    pub fn constant(dim_in: usize, value: Vec<f64>) -> Self {
        let dim_out = value.len();
        VectorField::new(dim_in, dim_out, move |_, out| out.copy_from_slice(&value))
            .with_jacobian(|_, j| j.fill(0.0))
    }

    /// Linear field `x ↦ A x`.
    pub fn linear(a: DMatrix<f64>) -> Self {
        let (rows, cols) = a.shape();
        let a2 = a.clone();
        VectorField::new(cols, rows, move |x, out| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = (0..cols).map(|j| a[(i, j)] * x[j]).sum();
            }
        })
        .with_jacobian(move |_, j| {
            for r in 0..rows {
                for c in 0..cols {
                    j[r * cols + c] = a2[(r, c)];
                }
            }
        })
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.eval)(x, out)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_out];
        self.eval_into(x, &mut out);
        out
    }

    /// Jacobian into a row-major buffer of length `dim_out·dim_in`.
    pub fn jacobian_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.jacobian {
            Some(j) => j(x, out),
            None => self.fd_jacobian_into(x, out),
        }
    }

    pub fn fd_jacobian_into(&self, x: &[f64], out: &mut [f64]) {
        let mut xp = Scratch::copy_of(x);
        let mut fp = Scratch::zeros(self.dim_out);
        let mut fm = Scratch::zeros(self.dim_out);
        for c in 0..self.dim_in {
            let h = jacobian_step(x[c]);
            xp[c] = x[c] + h;
            self.eval_into(&xp, &mut fp);
            xp[c] = x[c] - h;
            self.eval_into(&xp, &mut fm);
            xp[c] = x[c];
            for r in 0..self.dim_out {
                out[r * self.dim_in + c] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut buf = vec![0.0; self.dim_out * self.dim_in];
        self.jacobian_into(x, &mut buf);
        DMatrix::from_row_slice(self.dim_out, self.dim_in, &buf)
    }

    pub fn fd_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut buf = vec![0.0; self.dim_out * self.dim_in];
        self.fd_jacobian_into(x, &mut buf);
        DMatrix::from_row_slice(self.dim_out, self.dim_in, &buf)
    }

    /// `Σ_i w_i f_i`; the Jacobian is analytic when every part has one.
    pub fn linear_combination(weights: &[f64], fields: &[VectorField]) -> Self {
        assert_eq!(weights.len(), fields.len());
        assert!(!fields.is_empty(), "empty linear combination");
        let (di, dout) = (fields[0].dim_in, fields[0].dim_out);
        assert!(fields.iter().all(|f| f.dim_in == di && f.dim_out == dout));
        let parts: Vec<(f64, VectorField)> = weights
            .iter()
            .copied()
            .zip(fields.iter().cloned())
            .filter(|(w, _)| *w != 0.0)
            .collect();
        let analytic = parts.iter().all(|(_, f)| f.has_analytic_jacobian());
        let ev = parts.clone();
        let field = VectorField::new(di, dout, move |x, out| {
            out.fill(0.0);
            let mut tmp = Scratch::zeros(dout);
            for (w, f) in &ev {
                f.eval_into(x, &mut tmp);
                out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += w * t);
            }
        });
        if analytic {
            field.with_jacobian(move |x, j| {
                j.fill(0.0);
                let mut tmp = Scratch::zeros(di * dout);
                for (w, f) in &parts {
                    f.jacobian_into(x, &mut tmp);
                    j.iter_mut().zip(&tmp).for_each(|(o, t)| *o += w * t);
                }
            })
        } else {
            field
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        VectorField::linear_combination(&[a], std::slice::from_ref(self))
    }
}

/// Scalar function with optional analytic gradient and Hessian (row-major).
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    f: ScalarFn,
    grad: Option<FieldFn>,
    hess: Option<FieldFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("analytic_gradient", &self.grad.is_some())
            .field("analytic_hessian", &self.hess.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField {
            dim,
            f: Arc::new(f),
            grad: None,
            hess: None,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(g));
        self
    }

    pub fn with_hessian(mut self, h: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.hess = Some(Arc::new(h));
        self
    }

    /// `x ↦ c·x` (exact derivatives).
    pub fn linear(coeffs: Vec<f64>) -> Self {
        let dim = coeffs.len();
        let c2 = coeffs.clone();
        ScalarField::new(dim, move |x| coeffs.iter().zip(x).map(|(a, b)| a * b).sum())
            .with_gradient(move |_, g| g.copy_from_slice(&c2))
            .with_hessian(|_, h| h.fill(0.0))
    }

    /// One-dimensional function with first and second derivatives.
    pub fn univariate(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarField::new(1, move |x| f(x[0]))
            .with_gradient(move |x, g| g[0] = df(x[0]))
            .with_hessian(move |x, h| h[0] = d2f(x[0]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.grad {
            Some(g) => g(x, out),
            None => {
                let mut xp = Scratch::copy_of(x);
                for i in 0..self.dim {
                    let h = jacobian_step(x[i]);
                    xp[i] = x[i] + h;
                    let fp = self.eval(&xp);
                    xp[i] = x[i] - h;
                    let fm = self.eval(&xp);
                    xp[i] = x[i];
                    out[i] = (fp - fm) / (2.0 * h);
                }
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.gradient_into(x, &mut g);
        g
    }

    pub fn hessian_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.hess {
            Some(h) => h(x, out),
            None => {
                // differentiate the gradient
                let d = self.dim;
                let mut xp = Scratch::copy_of(x);
                let mut gp = Scratch::zeros(d);
                let mut gm = Scratch::zeros(d);
                for j in 0..d {
                    let h = 1e2 * jacobian_step(x[j]);
                    xp[j] = x[j] + h;
                    self.gradient_into(&xp, &mut gp);
                    xp[j] = x[j] - h;
                    self.gradient_into(&xp, &mut gm);
                    xp[j] = x[j];
                    for i in 0..d {
                        out[i * d + j] = (gp[i] - gm[i]) / (2.0 * h);
                    }
                }
                for i in 0..d {
                    for j in 0..i {
                        let s = 0.5 * (out[i * d + j] + out[j * d + i]);
                        out[i * d + j] = s;
                        out[j * d + i] = s;
                    }
                }
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.dim * self.dim];
        self.hessian_into(x, &mut h);
        h
    }
}
