//! The finite-dimensional problem `L x + eps N(x) = lambda C x`, `x` on the
//! unit sphere of a Gram metric, with its residual and Jacobian.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{check_finite, DenseMatrix, GramMetric, Vector};

pub type VectorFn = dyn Fn(&Vector) -> Result<Vector> + Send + Sync;
pub type MatrixFn = dyn Fn(&Vector) -> Result<DenseMatrix> + Send + Sync;

/// The perturbation `N`.
#[derive(Clone)]
pub enum NonlinearTerm {
    Zero,
    Linear(DenseMatrix),
    /// `N(x) = n` for every `x`.
    Constant(Vector),
    Custom {
        eval: Arc<VectorFn>,
        jacobian: Option<Arc<MatrixFn>>,
    },
}

impl fmt::Debug for NonlinearTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Linear(m) => write!(f, "Linear({}x{})", m.nrows(), m.ncols()),
            Self::Constant(v) => write!(f, "Constant({})", v.len()),
            Self::Custom { jacobian, .. } => {
                write!(f, "Custom(analytic_jacobian = {})", jacobian.is_some())
            }
        }
    }
}

impl NonlinearTerm {
    pub fn custom<F>(eval: F) -> Self
    where
        F: Fn(&Vector) -> Result<Vector> + Send + Sync + 'static,
    {
        Self::Custom {
            eval: Arc::new(eval),
            jacobian: None,
        }
    }

    pub fn custom_with_jacobian<F, J>(eval: F, jacobian: J) -> Self
    where
        F: Fn(&Vector) -> Result<Vector> + Send + Sync + 'static,
        J: Fn(&Vector) -> Result<DenseMatrix> + Send + Sync + 'static,
    {
        Self::Custom {
            eval: Arc::new(eval),
            jacobian: Some(Arc::new(jacobian)),
        }
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        match self {
            Self::Zero => Ok(Vector::zeros(x.len())),
            Self::Linear(m) => Ok(m * x),
            Self::Constant(v) => Ok(v.clone()),
            Self::Custom { eval, .. } => {
                let y = eval(x)?;
                if y.len() != x.len() {
                    return Err(Error::DimensionMismatch {
                        expected: x.len(),
                        got: y.len(),
                    });
                }
                if !y.iter().all(|v| v.is_finite()) {
                    return Err(Error::Evaluation("N(x) has non-finite entries".into()));
                }
                Ok(y)
            }
        }
    }

    /// Analytic derivative when one is known.
    pub fn analytic_jacobian(&self, x: &Vector) -> Option<Result<DenseMatrix>> {
        let n = x.len();
        match self {
            Self::Zero | Self::Constant(_) => Some(Ok(DenseMatrix::zeros(n, n))),
            Self::Linear(m) => Some(Ok(m.clone())),
            Self::Custom { jacobian, .. } => jacobian.as_ref().map(|j| j(x)),
        }
    }

    /// Matrix of `N` when it is linear; custom maps are spot-checked for additivity
    /// and homogeneity before their matrix is sampled from the standard basis.
    pub fn linear_matrix(&self, dim: usize) -> Result<DenseMatrix> {
        match self {
            Self::Zero => Ok(DenseMatrix::zeros(dim, dim)),
            Self::Linear(m) => Ok(m.clone()),
            Self::Constant(v) if v.iter().all(|&c| c == 0.0) => Ok(DenseMatrix::zeros(dim, dim)),
            Self::Constant(_) => Err(Error::Unsupported(
                "constant (affine) N is not linear; eigenpair scan needs linear N".into(),
            )),
            Self::Custom { .. } => {
                let probes = probe_vectors(dim);
                for pair in probes.windows(2) {
                    let (a, b) = (&pair[0], &pair[1]);
                    let lhs = self.eval(&(a + b))?;
                    let rhs = self.eval(a)? + self.eval(b)?;
                    let scaled = self.eval(&(a * 2.5))? - self.eval(a)? * 2.5;
                    let scale = 1.0 + lhs.amax();
                    if (lhs - rhs).amax() > 1e-10 * scale || scaled.amax() > 1e-10 * scale {
                        return Err(Error::Unsupported(
                            "N failed the linearity spot-check; eigenpair scan needs linear N".into(),
                        ));
                    }
                }
                let cols: Result<Vec<Vector>> = (0..dim)
                    .map(|j| {
                        let mut e = Vector::zeros(dim);
                        e[j] = 1.0;
                        self.eval(&e)
                    })
                    .collect();
                Ok(DenseMatrix::from_columns(&cols?))
            }
        }
    }
}

// Deterministic, irregular probe vectors for the linearity spot-check.
fn probe_vectors(dim: usize) -> Vec<Vector> {
    (0..4)
        .map(|k| {
            Vector::from_fn(dim, |i, _| {
                let t = (i as f64 + 1.0) * (k as f64 + 1.7);
                (t * 1.618_033_988_7).sin() + 0.25 * (t * 0.377).cos()
            })
        })
        .collect()
}

/// A triple `(x, eps, lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPoint {
    pub x: Vector,
    pub eps: f64,
    pub lambda: f64,
}

impl SolutionPoint {
    pub fn new(x: Vector, eps: f64, lambda: f64) -> Self {
        Self { x, eps, lambda }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Stacks `(x, eps, lambda)` into one vector of length `dim + 2`.
    pub fn to_state(&self) -> Vector {
        let n = self.x.len();
        let mut z = Vector::zeros(n + 2);
        z.rows_mut(0, n).copy_from(&self.x);
        z[n] = self.eps;
        z[n + 1] = self.lambda;
        z
    }

    pub fn from_state(z: &Vector) -> Self {
        let n = z.len() - 2;
        Self {
            x: z.rows(0, n).into_owned(),
            eps: z[n],
            lambda: z[n + 1],
        }
    }

    /// Euclidean distance between stacked states.
    pub fn distance(&self, other: &SolutionPoint) -> f64 {
        (self.to_state() - other.to_state()).norm()
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    label: String,
    l: DenseMatrix,
    c: DenseMatrix,
    n: NonlinearTerm,
    gram_g: GramMetric,
    gram_h: GramMetric,
    fd_step: Option<f64>,
}

impl Problem {
    pub fn new(
        label: impl Into<String>,
        l: DenseMatrix,
        c: DenseMatrix,
        n: NonlinearTerm,
        gram_g: GramMetric,
        gram_h: GramMetric,
    ) -> Result<Self> {
        let dim = l.nrows();
        let square = |m: &DenseMatrix, what: &str| -> Result<()> {
            if m.shape() != (dim, dim) {
                return Err(Error::InvalidInput(format!(
                    "{what} is {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            check_finite(m, what)
        };
        square(&l, "L")?;
        square(&c, "C")?;
        square(gram_g.matrix(), "gram_g")?;
        square(gram_h.matrix(), "gram_h")?;
        match &n {
            NonlinearTerm::Linear(m) => square(m, "N")?,
            NonlinearTerm::Constant(v) if v.len() != dim => {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                })
            }
            _ => {}
        }
        Ok(Self {
            label: label.into(),
            l,
            c,
            n,
            gram_g,
            gram_h,
            fd_step: None,
        })
    }

    /// Problem with Euclidean sphere and residual metrics.
    pub fn euclidean(
        label: impl Into<String>,
        l: DenseMatrix,
        c: DenseMatrix,
        n: NonlinearTerm,
    ) -> Result<Self> {
        let dim = l.nrows();
        Self::new(label, l, c, n, GramMetric::identity(dim), GramMetric::identity(dim))
    }

    pub fn with_fd_step(mut self, h: Option<f64>) -> Self {
        self.fd_step = h;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }
    pub fn l_matrix(&self) -> &DenseMatrix {
        &self.l
    }
    pub fn c_matrix(&self) -> &DenseMatrix {
        &self.c
    }
    pub fn nonlinear(&self) -> &NonlinearTerm {
        &self.n
    }
    pub fn gram_g(&self) -> &GramMetric {
        &self.gram_g
    }
    pub fn gram_h(&self) -> &GramMetric {
        &self.gram_h
    }

    fn check_dim(&self, s: &SolutionPoint) -> Result<()> {
        if s.x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: s.x.len(),
            });
        }
        if !s.x.iter().all(|v| v.is_finite()) || !s.eps.is_finite() || !s.lambda.is_finite() {
            return Err(Error::InvalidInput("solution point has non-finite entries".into()));
        }
        Ok(())
    }

    /// `L x + eps N(x) - lambda C x`.
    pub fn phi(&self, s: &SolutionPoint) -> Result<Vector> {
        self.check_dim(s)?;
        let mut r = &self.l * &s.x - (&self.c * &s.x) * s.lambda;
        if s.eps != 0.0 {
            r += self.n.eval(&s.x)? * s.eps;
        }
        Ok(r)
    }

    /// `phi` stacked with the sphere defect `(x^T W_G x - 1) / 2`.
    pub fn augmented_residual(&self, s: &SolutionPoint) -> Result<Vector> {
        let phi = self.phi(s)?;
        let n = self.dim();
        let mut r = Vector::zeros(n + 1);
        r.rows_mut(0, n).copy_from(&phi);
        r[n] = 0.5 * (self.gram_g.inner(&s.x, &s.x)? - 1.0);
        Ok(r)
    }

    /// Size of an augmented residual: `phi` in the `gram_h` norm, combined with the sphere defect.
    pub fn residual_norm(&self, r: &Vector) -> Result<f64> {
        let n = self.dim();
        let phi = r.rows(0, n).into_owned();
        let h = self.gram_h.inner(&phi, &phi)?;
        Ok((h + r[n] * r[n]).sqrt())
    }

    pub fn phi_norm(&self, s: &SolutionPoint) -> Result<f64> {
        self.gram_h.norm(&self.phi(s)?)
    }

    pub fn sphere_defect(&self, x: &Vector) -> Result<f64> {
        Ok(self.gram_g.inner(x, x)? - 1.0)
    }

    pub fn project_to_sphere(&self, x: &Vector) -> Result<Vector> {
        self.gram_g.normalize(x)
    }

    fn default_fd_step(x: &Vector) -> f64 {
        1e-6 * (1.0 + x.norm())
    }

    /// Derivative of `N`: analytic if available, otherwise central differences.
    pub fn n_jacobian(&self, x: &Vector, fd_step: Option<f64>) -> Result<DenseMatrix> {
        if let Some(j) = self.n.analytic_jacobian(x) {
            return j;
        }
        let n = x.len();
        let h = fd_step.or(self.fd_step).unwrap_or_else(|| Self::default_fd_step(x));
        let mut out = DenseMatrix::zeros(n, n);
        let mut xp = x.clone();
        for j in 0..n {
            xp[j] = x[j] + h;
            let fp = self.n.eval(&xp)?;
            xp[j] = x[j] - h;
            let fm = self.n.eval(&xp)?;
            xp[j] = x[j];
            out.set_column(j, &((fp - fm) / (2.0 * h)));
        }
        Ok(out)
    }

    /// `(dim+1) x (dim+2)` Jacobian of the augmented residual in `(x, eps, lambda)`.
    pub fn jacobian(&self, s: &SolutionPoint) -> Result<DenseMatrix> {
        self.jacobian_with(s, None)
    }

    pub fn jacobian_with(&self, s: &SolutionPoint, fd_step: Option<f64>) -> Result<DenseMatrix> {
        self.check_dim(s)?;
        let n = self.dim();
        let mut j = DenseMatrix::zeros(n + 1, n + 2);
        let mut block = &self.l - &self.c * s.lambda;
        if s.eps != 0.0 {
            block += self.n_jacobian(&s.x, fd_step)? * s.eps;
        }
        j.view_mut((0, 0), (n, n)).copy_from(&block);
        j.view_mut((0, n), (n, 1)).copy_from(&self.n.eval(&s.x)?);
        j.view_mut((0, n + 1), (n, 1)).copy_from(&(-(&self.c * &s.x)));
        let wx = self.gram_g.matrix() * &s.x;
        j.view_mut((n, 0), (1, n)).copy_from(&wx.transpose());
        Ok(j)
    }

    /// Central-difference Jacobian of the augmented residual in all `dim + 2` directions.
    pub fn fd_jacobian(&self, s: &SolutionPoint, h: f64) -> Result<DenseMatrix> {
        if h.is_nan() || h <= 0.0 {
            return Err(Error::InvalidInput(format!("finite-difference step {h} must be positive")));
        }
        let n = self.dim();
        let z = s.to_state();
        let mut out = DenseMatrix::zeros(n + 1, n + 2);
        let mut zp = z.clone();
        for k in 0..n + 2 {
            zp[k] = z[k] + h;
            let fp = self.augmented_residual(&SolutionPoint::from_state(&zp))?;
            zp[k] = z[k] - h;
            let fm = self.augmented_residual(&SolutionPoint::from_state(&zp))?;
            zp[k] = z[k];
            out.set_column(k, &((fp - fm) / (2.0 * h)));
        }
        Ok(out)
    }
}

/// Largest entrywise relative deviation `|a - b| / |a|` over entries with `|a| >= floor`.
pub fn max_relative_deviation(analytic: &DenseMatrix, approx: &DenseMatrix, floor: f64) -> f64 {
    analytic
        .iter()
        .zip(approx.iter())
        .filter(|(a, _)| a.abs() >= floor)
        .map(|(a, b)| (a - b).abs() / a.abs())
        .fold(0.0, f64::max)
}
