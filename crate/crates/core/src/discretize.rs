//! Fourier-Galerkin truncation of the periodic boundary-value problems.
//!
//! Coordinates per component are ordered `[1, cos t, sin t, ..., cos Mt, sin Mt]`
//! over the unnormalized trigonometric basis; the metrics carry the weights.

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, GramMetric, Vector};
use crate::problem::{NonlinearTerm, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FourierBasis {
    pub modes: usize,
    pub components: usize,
}

impl FourierBasis {
    pub fn new(modes: usize, components: usize) -> Self {
        Self { modes, components }
    }

    /// Coordinates per component, `2M + 1`.
    pub fn block(&self) -> usize {
        2 * self.modes + 1
    }

    pub fn dim(&self) -> usize {
        self.components * self.block()
    }

    pub fn cos_index(&self, component: usize, k: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.modes);
        component * self.block() + 2 * k - 1
    }

    pub fn sin_index(&self, component: usize, k: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.modes);
        component * self.block() + 2 * k
    }

    pub fn const_index(&self, component: usize) -> usize {
        component * self.block()
    }

    /// `d/dt` on one component block.
    pub fn derivative_block(&self) -> DenseMatrix {
        let b = self.block();
        let mut d = DenseMatrix::zeros(b, b);
        for k in 1..=self.modes {
            let (ci, si) = (2 * k - 1, 2 * k);
            // cos kt -> -k sin kt, sin kt -> k cos kt
            d[(si, ci)] = -(k as f64);
            d[(ci, si)] = k as f64;
        }
        d
    }

    /// Weights of `(1/2pi) int (x y + x' y')` per component block.
    pub fn h1_weights(&self) -> Vec<f64> {
        self.weights(|k| (1.0 + (k * k) as f64) / 2.0)
    }

    /// Weights of `(1/2pi) int x y` per component block.
    pub fn l2_weights(&self) -> Vec<f64> {
        self.weights(|_| 0.5)
    }

    fn weights(&self, per_mode: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut block = vec![1.0];
        for k in 1..=self.modes {
            block.push(per_mode(k));
            block.push(per_mode(k));
        }
        block.repeat(self.components)
    }

    /// Evaluates the represented function at `t` (one value per component).
    pub fn evaluate(&self, coords: &Vector, t: f64) -> Vec<f64> {
        (0..self.components)
            .map(|c| {
                let mut v = coords[self.const_index(c)];
                for k in 1..=self.modes {
                    let kt = k as f64 * t;
                    v += coords[self.cos_index(c, k)] * kt.cos() + coords[self.sin_index(c, k)] * kt.sin();
                }
                v
            })
            .collect()
    }
}

fn block_diag(blocks: &[DenseMatrix]) -> DenseMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DenseMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((off, off), (k, k)).copy_from(b);
        off += k;
    }
    out
}

/// `x' + eps sin t = lambda x`, periodic, on the H1 unit sphere.
pub fn fourier_problem_scalar(modes: usize) -> Result<Problem> {
    if modes == 0 {
        return Err(Error::InvalidInput("need at least one Fourier mode".into()));
    }
    let basis = FourierBasis::new(modes, 1);
    let dim = basis.dim();
    let mut forcing = Vector::zeros(dim);
    forcing[basis.sin_index(0, 1)] = 1.0;
    Problem::new(
        format!("ex42(M={modes})"),
        basis.derivative_block(),
        DenseMatrix::identity(dim, dim),
        NonlinearTerm::Constant(forcing),
        GramMetric::diagonal(&basis.h1_weights())?,
        GramMetric::diagonal(&basis.l2_weights())?,
    )
}

/// The coupled system `(x1' + x1, x2' - x2) - eps (x1, x2) = lambda (x2, -x1)`, periodic.
pub fn fourier_problem_system(modes: usize) -> Result<Problem> {
    if modes == 0 {
        return Err(Error::InvalidInput("need at least one Fourier mode".into()));
    }
    let basis = FourierBasis::new(modes, 2);
    let b = basis.block();
    let dim = basis.dim();
    let d = basis.derivative_block();
    let id = DenseMatrix::identity(b, b);
    let l = block_diag(&[&d + &id, &d - &id]);
    let mut c = DenseMatrix::zeros(dim, dim);
    c.view_mut((0, b), (b, b)).copy_from(&id);
    c.view_mut((b, 0), (b, b)).copy_from(&(-&id));
    Problem::new(
        format!("ex43(M={modes})"),
        l,
        c,
        NonlinearTerm::Linear(-DenseMatrix::identity(dim, dim)),
        GramMetric::diagonal(&basis.h1_weights())?,
        GramMetric::diagonal(&basis.l2_weights())?,
    )
}
