//! Simplicity of trivial solutions `(x*, 0, lambda*)`.
//!
//! With `A = L - lambda* C`, a trivial solution is simple when `Ker A` is the
//! line through `x*`, `C x* != 0`, and `A x = C x*` has no solution. The
//! last condition stands in for the direct-sum condition on `Im A`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{kernel_basis, least_squares, min_singular_values, DenseMatrix, Vector};
use crate::problem::{Problem, SolutionPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimplicityTolerances {
    /// Relative rank cut for the kernel of `A`.
    pub rel_tol: f64,
    pub align_tol: f64,
    pub c_tol: f64,
    pub solvable_tol: f64,
    pub margin_tol: f64,
    /// Admissible `gram_h` residual / sphere defect of the input point.
    pub residual: f64,
}

impl Default for SimplicityTolerances {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            align_tol: 1e-8,
            c_tol: 1e-10,
            solvable_tol: 1e-6,
            margin_tol: 1e-8,
            residual: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Simple,
    #[serde(rename = "NotSimple_KernelDim")]
    NotSimpleKernelDim,
    #[serde(rename = "NotSimple_CxZero")]
    NotSimpleCxZero,
    #[serde(rename = "NotSimple_Solvable")]
    NotSimpleSolvable,
}

impl Verdict {
    pub fn is_simple(self) -> bool {
        self == Verdict::Simple
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Simple => "Simple",
            Verdict::NotSimpleKernelDim => "NotSimple_KernelDim",
            Verdict::NotSimpleCxZero => "NotSimple_CxZero",
            Verdict::NotSimpleSolvable => "NotSimple_Solvable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplicityReport {
    pub kernel_dim: usize,
    /// `|cos|` between the kernel vector and `x*`; only defined for a one-dimensional kernel.
    pub kernel_alignment: Option<f64>,
    pub c_xstar_norm: f64,
    pub ls_residual: f64,
    pub dpsi_margin: f64,
    pub verdict: Verdict,
    pub tolerances: SimplicityTolerances,
}

pub fn check_simple(
    p: &Problem,
    x_star: &Vector,
    lambda_star: f64,
    tols: &SimplicityTolerances,
) -> Result<SimplicityReport> {
    let s = SolutionPoint::new(x_star.clone(), 0.0, lambda_star);
    let residual = p.phi_norm(&s)?;
    let sphere = p.sphere_defect(x_star)?.abs();
    if residual > tols.residual || sphere > tols.residual {
        return Err(Error::NotTrivial {
            residual,
            sphere,
            eps: 0.0,
        });
    }

    let a = p.l_matrix() - p.c_matrix() * lambda_star;
    let kernel = kernel_basis(&a, tols.rel_tol)?;
    let kernel_dim = kernel.len();
    let kernel_alignment = (kernel_dim == 1).then(|| {
        let k = &kernel[0];
        (k.dot(x_star) / (k.norm() * x_star.norm())).abs().min(1.0)
    });
    let cx = p.c_matrix() * x_star;
    let c_xstar_norm = p.gram_h().norm(&cx)?;
    let ls_residual = least_squares(&a, &cx, tols.rel_tol)?.residual_norm;
    let dpsi_margin = dpsi_min_singular(p, x_star, lambda_star)?;

    let verdict = if kernel_dim != 1 || kernel_alignment.is_some_and(|c| c < 1.0 - tols.align_tol) {
        Verdict::NotSimpleKernelDim
    } else if c_xstar_norm <= tols.c_tol {
        Verdict::NotSimpleCxZero
    } else if ls_residual <= tols.solvable_tol {
        Verdict::NotSimpleSolvable
    } else {
        Verdict::Simple
    };

    Ok(SimplicityReport {
        kernel_dim,
        kernel_alignment,
        c_xstar_norm,
        ls_residual,
        dpsi_margin,
        verdict,
        tolerances: *tols,
    })
}

/// Smallest singular value of `[A T | -C x*]`, the differential of
/// `(x, lambda) -> L x - lambda C x` restricted to the sphere at `(x*, lambda*)`.
/// `T` is a `gram_g`-orthonormal basis of the tangent space of the sphere at `x*`.
pub fn dpsi_min_singular(p: &Problem, x_star: &Vector, lambda_star: f64) -> Result<f64> {
    let n = p.dim();
    let t = p.gram_g().orthogonal_complement(x_star)?;
    let a = p.l_matrix() - p.c_matrix() * lambda_star;
    let mut m = DenseMatrix::zeros(n, t.ncols() + 1);
    m.view_mut((0, 0), (n, t.ncols())).copy_from(&(&a * &t));
    m.set_column(t.ncols(), &(-(p.c_matrix() * x_star)));
    Ok(min_singular_values(&m, 1)?[0])
}
