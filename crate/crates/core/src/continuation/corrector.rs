//! Newton corrector on the bordered system and kernel/tangent computations.

use crate::error::{Error, Result};
use crate::numerics::{pad_rows, svd, DenseMatrix, Vector};
use crate::problem::{Problem, SolutionPoint};

use super::ContinuationSettings;

#[derive(Debug, Clone)]
pub struct Corrected {
    pub point: SolutionPoint,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `augmented_residual(q) = 0`, `<normal, q - plane_point> = 0` by Newton from `guess`.
pub fn newton_correct(
    p: &Problem,
    guess: &SolutionPoint,
    plane_point: &Vector,
    normal: &Vector,
    cfg: &ContinuationSettings,
) -> Result<Corrected> {
    correct_state(
        p,
        guess.to_state(),
        plane_point,
        normal,
        cfg.newton_tol,
        cfg.newton_max_iter,
        cfg.fd_step,
    )
}

pub(crate) fn correct_state(
    p: &Problem,
    mut z: Vector,
    plane_point: &Vector,
    normal: &Vector,
    tol: f64,
    max_iter: usize,
    fd_step: Option<f64>,
) -> Result<Corrected> {
    let n = p.dim();
    if normal.len() != n + 2 || plane_point.len() != n + 2 || z.len() != n + 2 {
        return Err(Error::DimensionMismatch {
            expected: n + 2,
            got: normal.len(),
        });
    }
    let mut residual = f64::INFINITY;
    for it in 0..=max_iter {
        let s = SolutionPoint::from_state(&z);
        let r = p.augmented_residual(&s)?;
        let plane = normal.dot(&(&z - plane_point));
        residual = p.residual_norm(&r)?;
        if residual <= tol && plane.abs() <= tol {
            return Ok(Corrected {
                point: s,
                iterations: it,
                residual,
            });
        }
        if it == max_iter || !residual.is_finite() || residual > 1e8 {
            break;
        }
        let j = p.jacobian_with(&s, fd_step)?;
        let mut bordered = DenseMatrix::zeros(n + 2, n + 2);
        bordered.view_mut((0, 0), (n + 1, n + 2)).copy_from(&j);
        bordered.view_mut((n + 1, 0), (1, n + 2)).copy_from(&normal.transpose());
        let mut rhs = Vector::zeros(n + 2);
        rhs.rows_mut(0, n + 1).copy_from(&r);
        rhs[n + 1] = plane;
        let Some(delta) = bordered.lu().solve(&rhs) else {
            break;
        };
        if !delta.iter().all(|v| v.is_finite()) {
            break;
        }
        z -= delta;
    }
    Err(Error::CorrectionFailure {
        residual,
        iterations: max_iter,
    })
}

/// Right singular structure of the augmented Jacobian at a point.
#[derive(Debug, Clone)]
pub(crate) struct KernelInfo {
    /// Right singular vectors of the zero-padded square Jacobian, smallest singular value first.
    pub smallest: Vector,
    pub second: Vector,
    /// Numerical kernel dimension under the relative rank cut.
    pub kernel_dim: usize,
    /// Smallest singular value of the `(dim+1) x (dim+2)` Jacobian itself.
    pub sigma_min: f64,
    pub sigma_max: f64,
}

pub(crate) fn kernel_info(p: &Problem, s: &SolutionPoint, cfg: &ContinuationSettings) -> Result<KernelInfo> {
    let j = p.jacobian_with(s, cfg.fd_step)?;
    kernel_info_of(&j, cfg.rank_rel_tol)
}

pub(crate) fn kernel_info_of(j: &DenseMatrix, rel_tol: f64) -> Result<KernelInfo> {
    let dec = svd(&pad_rows(j))?;
    let k = dec.singular_values.len();
    let smax = dec.sigma_max();
    let kernel_dim = dec
        .singular_values
        .iter()
        .filter(|&&s| smax == 0.0 || s <= rel_tol * smax)
        .count();
    // the padded matrix has one structural zero; the genuine values are the first k-1
    let sigma_min = dec.singular_values[k - 2];
    Ok(KernelInfo {
        smallest: dec.v.column(k - 1).into_owned(),
        second: dec.v.column(k - 2).into_owned(),
        kernel_dim,
        sigma_min,
        sigma_max: smax,
    })
}

pub(crate) fn orient(t: Vector, reference: &Vector) -> Vector {
    if t.dot(reference) < 0.0 {
        -t
    } else {
        t
    }
}

/// Unit tangent at a regular point, oriented along `reference`.
pub(crate) fn tangent_along(
    p: &Problem,
    s: &SolutionPoint,
    reference: &Vector,
    cfg: &ContinuationSettings,
) -> Result<(Vector, KernelInfo)> {
    let info = kernel_info(p, s, cfg)?;
    let t = orient(info.smallest.normalize(), reference);
    Ok((t, info))
}

/// Determinant of the Jacobian bordered by the tangent row; changes sign at simple branch points.
pub(crate) fn bordered_determinant(
    p: &Problem,
    s: &SolutionPoint,
    t: &Vector,
    cfg: &ContinuationSettings,
) -> Result<f64> {
    let n = p.dim();
    let j = p.jacobian_with(s, cfg.fd_step)?;
    let mut m = DenseMatrix::zeros(n + 2, n + 2);
    m.view_mut((0, 0), (n + 1, n + 2)).copy_from(&j);
    m.view_mut((n + 1, 0), (1, n + 2)).copy_from(&t.transpose());
    Ok(m.lu().determinant())
}
