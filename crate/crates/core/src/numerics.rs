//! Dense linear algebra for the small matrices that surrogate the operators:
//! SVD, relative-rank kernels, pseudo-inverse least squares, Gram metrics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default relative rank cut `sigma_i <= rel_tol * sigma_max`.
pub const DEFAULT_REL_TOL: f64 = 1e-8;

const SVD_EPS: f64 = 1e-15;
const SVD_MAX_ITER: usize = 10_000;
const SYMMETRY_TOL: f64 = 1e-12;

/// Thin singular value decomposition with singular values in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows x k` left singular vectors, `k = min(rows, cols)`.
    pub u: DenseMatrix,
    pub singular_values: Vector,
    /// `cols x k` right singular vectors.
    pub v: DenseMatrix,
}

impl Svd {
    pub fn sigma_max(&self) -> f64 {
        if self.singular_values.is_empty() {
            0.0
        } else {
            self.singular_values[0]
        }
    }
}

pub fn check_finite(m: &DenseMatrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

/// Builds a matrix from nested rows, validating shape and finiteness.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DenseMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::InvalidInput(format!(
            "ragged matrix: row of length {} in a matrix with {} columns",
            bad.len(),
            ncols
        )));
    }
    let m = DenseMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    check_finite(&m, "matrix")?;
    Ok(m)
}

pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    check_finite(m, "svd input")?;
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd {
            u: DenseMatrix::zeros(rows, 0),
            singular_values: Vector::zeros(0),
            v: DenseMatrix::zeros(cols, 0),
        });
    }
    if m.iter().all(|&v| v == 0.0) {
        return Ok(Svd {
            u: DenseMatrix::identity(rows, k),
            singular_values: Vector::zeros(k),
            v: DenseMatrix::identity(cols, k),
        });
    }
    let dec = nalgebra::SVD::try_new(m.clone(), true, true, SVD_EPS, SVD_MAX_ITER)
        .ok_or_else(|| Error::Numerical(format!("SVD of {rows}x{cols} matrix did not converge")))?;
    let u = dec.u.expect("u requested");
    let v = dec.v_t.expect("v requested").transpose();
    Ok(Svd {
        u,
        singular_values: dec.singular_values,
        v,
    })
}

/// Orthonormal basis of the numerical kernel of `m`.
///
/// Wide matrices are padded with zero rows so the trailing right singular
/// vectors are available.
pub fn kernel_basis(m: &DenseMatrix, rel_tol: f64) -> Result<Vec<Vector>> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidInput(format!("rel_tol {rel_tol} not in (0, 1)")));
    }
    let square = pad_rows(m);
    let dec = svd(&square)?;
    let smax = dec.sigma_max();
    let cut = rel_tol * smax;
    Ok((0..dec.singular_values.len())
        .filter(|&i| smax == 0.0 || dec.singular_values[i] <= cut)
        .map(|i| dec.v.column(i).into_owned())
        .collect())
}

/// Pads a wide matrix with zero rows until it is square; leaves tall or
/// square matrices untouched.
pub(crate) fn pad_rows(m: &DenseMatrix) -> DenseMatrix {
    let (rows, cols) = m.shape();
    if rows >= cols {
        return m.clone();
    }
    let mut out = DenseMatrix::zeros(cols, cols);
    out.rows_mut(0, rows).copy_from(m);
    out
}

/// Solution of `min_x |a x - b|` via the rank-truncated pseudo-inverse.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub minimizer: Vector,
    pub residual_norm: f64,
}

pub fn least_squares(a: &DenseMatrix, b: &Vector, rel_tol: f64) -> Result<LeastSquares> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    let dec = svd(a)?;
    let cut = rel_tol * dec.sigma_max();
    let utb = dec.u.transpose() * b;
    let mut coeffs = Vector::zeros(dec.singular_values.len());
    for (i, &s) in dec.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            coeffs[i] = utb[i] / s;
        }
    }
    let minimizer = &dec.v * coeffs;
    let residual_norm = (a * &minimizer - b).norm();
    Ok(LeastSquares {
        minimizer,
        residual_norm,
    })
}

/// The `k` smallest singular values, ascending.
pub fn min_singular_values(m: &DenseMatrix, k: usize) -> Result<Vec<f64>> {
    let n = m.nrows().min(m.ncols());
    if k > n {
        return Err(Error::InvalidInput(format!(
            "requested {k} singular values of a matrix with only {n}"
        )));
    }
    let dec = svd(m)?;
    Ok(dec.singular_values.iter().rev().take(k).copied().collect())
}

/// Sign of the determinant of a square matrix (0 when LU finds an exact zero pivot).
pub fn det_sign(m: &DenseMatrix) -> f64 {
    let d = m.clone().lu().determinant();
    if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Symmetric positive-definite matrix realizing an inner product in basis coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMetric {
    matrix: DenseMatrix,
}

impl GramMetric {
    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        let (r, c) = matrix.shape();
        if r != c {
            return Err(Error::InvalidInput(format!("Gram matrix is {r}x{c}, not square")));
        }
        check_finite(&matrix, "Gram matrix")?;
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InvalidInput(format!(
                "Gram matrix not symmetric (max asymmetry {asym:.3e})"
            )));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        // smallest singular value of a symmetric matrix is |lambda_min|; the
        // Cholesky factorization settles the sign.
        let smin = min_singular_values(&sym, 1.min(r))?.first().copied().unwrap_or(0.0);
        if r > 0 && (smin <= 0.0 || sym.clone().cholesky().is_none()) {
            return Err(Error::InvalidInput("Gram matrix not positive definite".into()));
        }
        Ok(Self { matrix: sym })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DenseMatrix::identity(dim, dim),
        }
    }

    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        Self::new(DenseMatrix::from_diagonal(&Vector::from_column_slice(weights)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// `x^T W y`.
    pub fn inner(&self, x: &Vector, y: &Vector) -> Result<f64> {
        let n = self.dim();
        for v in [x, y] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        Ok(x.dot(&(&self.matrix * y)))
    }

    pub fn norm(&self, x: &Vector) -> Result<f64> {
        Ok(self.inner(x, x)?.max(0.0).sqrt())
    }

    /// Rescales `x` onto the unit sphere of this metric.
    pub fn normalize(&self, x: &Vector) -> Result<Vector> {
        let n = self.norm(x)?;
        if n == 0.0 {
            return Err(Error::InvalidInput("cannot normalize the zero vector".into()));
        }
        Ok(x / n)
    }

    /// Basis of the W-orthogonal complement of `x`, orthonormal in this metric.
    pub fn orthogonal_complement(&self, x: &Vector) -> Result<DenseMatrix> {
        let n = self.dim();
        let wx = (&self.matrix * x).transpose();
        let euclid = kernel_basis(&DenseMatrix::from_row_slice(1, n, wx.as_slice()), DEFAULT_REL_TOL)?;
        let mut basis: Vec<Vector> = Vec::with_capacity(n.saturating_sub(1));
        for mut v in euclid {
            for b in &basis {
                let c = self.inner(b, &v)?;
                v -= b * c;
            }
            let nv = self.norm(&v)?;
            if nv > 1e-12 {
                basis.push(v / nv);
            }
        }
        Ok(DenseMatrix::from_columns(&basis).resize(n, basis.len(), 0.0))
    }
}

/// `x^T W y` for a Gram metric `W`.
pub fn gram_inner(w: &GramMetric, x: &Vector, y: &Vector) -> Result<f64> {
    w.inner(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    macro_rules! assert_close {
        ($a:expr, $b:expr, $tol:expr) => {{
            let (a, b): (f64, f64) = ($a, $b);
            assert!((a - b).abs() <= $tol, "{} vs {} (tol {})", a, b, $tol);
        }};
    }

    fn ex44_l() -> DenseMatrix {
        DenseMatrix::from_row_slice(2, 2, &[0.0, 0.0, -2.0, 0.0])
    }

    #[test]
    fn svd_of_zero_matrix() {
        let d = svd(&DenseMatrix::zeros(2, 2)).unwrap();
        assert_eq!(d.singular_values.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn svd_of_identity() {
        let d = svd(&DenseMatrix::identity(3, 3)).unwrap();
        for s in d.singular_values.iter() {
            assert_close!(*s, 1.0, 1e-15);
        }
    }

    #[test]
    fn svd_of_nilpotent_l() {
        let d = svd(&ex44_l()).unwrap();
        assert_close!(d.singular_values[0], 2.0, 1e-14);
        assert_close!(d.singular_values[1], 0.0, 1e-14);
        let rec = &d.u * DenseMatrix::from_diagonal(&d.singular_values) * d.v.transpose();
        assert!((rec - ex44_l()).amax() <= 1e-12 * 3.0);
    }

    #[test]
    fn kernel_of_nilpotent_l_is_e2() {
        let k = kernel_basis(&ex44_l(), 1e-8).unwrap();
        assert_eq!(k.len(), 1);
        assert_close!(k[0][0], 0.0, 1e-14);
        assert_close!(k[0][1].abs(), 1.0, 1e-14);
    }

    #[test]
    fn kernel_of_identity_is_empty() {
        assert!(kernel_basis(&DenseMatrix::identity(2, 2), 1e-8).unwrap().is_empty());
    }

    #[test]
    fn kernel_of_zero_is_full_basis() {
        let k = kernel_basis(&DenseMatrix::zeros(3, 3), 1e-8).unwrap();
        assert_eq!(k.len(), 3);
    }

    #[test]
    fn kernel_of_wide_matrix_includes_trailing_directions() {
        let m = DenseMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let k = kernel_basis(&m, 1e-8).unwrap();
        assert_eq!(k.len(), 2);
        for v in &k {
            assert_close!(v[0], 0.0, 1e-14);
        }
    }

    #[test]
    fn kernel_rejects_bad_tolerance() {
        assert!(kernel_basis(&DenseMatrix::identity(2, 2), 0.0).is_err());
        assert!(kernel_basis(&DenseMatrix::identity(2, 2), 1.0).is_err());
    }

    #[test]
    fn least_squares_solvable_nilpotent() {
        let ls = least_squares(&ex44_l(), &Vector::from_vec(vec![0.0, 1.0]), 1e-8).unwrap();
        assert_close!(ls.residual_norm, 0.0, 1e-14);
        assert_close!(ls.minimizer[0], -0.5, 1e-14);
    }

    #[test]
    fn least_squares_unreachable_component() {
        let a = DenseMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -2.0]);
        let ls = least_squares(&a, &Vector::from_vec(vec![1.0, 0.0]), 1e-8).unwrap();
        assert_close!(ls.residual_norm, 1.0, 1e-14);
    }

    #[test]
    fn least_squares_zero_rhs() {
        let a = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let ls = least_squares(&a, &Vector::zeros(2), 1e-8).unwrap();
        assert_eq!(ls.residual_norm, 0.0);
        assert_eq!(ls.minimizer.norm(), 0.0);
    }

    #[test]
    fn least_squares_dimension_mismatch() {
        assert!(matches!(
            least_squares(&DenseMatrix::identity(2, 2), &Vector::zeros(3), 1e-8),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gram_inner_cases() {
        let e = GramMetric::identity(2);
        let x = Vector::from_vec(vec![1.0, 0.0]);
        assert_eq!(gram_inner(&e, &x, &x).unwrap(), 1.0);
        // H1 weights over {1, cos t, sin t}
        let w = GramMetric::diagonal(&[1.0, 1.0, 1.0]).unwrap();
        let cos = Vector::from_vec(vec![0.0, 1.0, 0.0]);
        assert_close!(gram_inner(&w, &cos, &cos).unwrap(), 1.0, 1e-15);
        let one = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        assert_close!(gram_inner(&w, &one, &one).unwrap(), 1.0, 1e-15);
        assert!(gram_inner(&w, &one, &x).is_err());
    }

    #[test]
    fn min_singular_values_cases() {
        assert_eq!(min_singular_values(&DenseMatrix::identity(2, 2), 1).unwrap(), vec![1.0]);
        let s = min_singular_values(&ex44_l(), 2).unwrap();
        assert_close!(s[0], 0.0, 1e-14);
        assert_close!(s[1], 2.0, 1e-14);
        assert_eq!(min_singular_values(&DenseMatrix::zeros(2, 2), 2).unwrap(), vec![0.0, 0.0]);
        assert!(min_singular_values(&DenseMatrix::zeros(2, 2), 3).is_err());
    }

    #[test]
    fn gram_metric_validation() {
        assert!(GramMetric::new(DenseMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).is_err());
        assert!(GramMetric::new(DenseMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
        assert!(GramMetric::new(DenseMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).is_ok());
    }

    #[test]
    fn orthogonal_complement_is_w_orthonormal() {
        let w = GramMetric::new(DenseMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5]))
            .unwrap();
        let x = w.normalize(&Vector::from_vec(vec![1.0, -2.0, 0.5])).unwrap();
        let t = w.orthogonal_complement(&x).unwrap();
        assert_eq!(t.ncols(), 2);
        let gram = t.transpose() * w.matrix() * &t;
        assert!((gram - DenseMatrix::identity(2, 2)).amax() < 1e-12);
        assert!((t.transpose() * w.matrix() * &x).amax() < 1e-12);
    }

    #[test]
    fn det_sign_cases() {
        assert_eq!(det_sign(&DenseMatrix::identity(2, 2)), 1.0);
        assert_eq!(det_sign(&DenseMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])), -1.0);
        assert_eq!(det_sign(&DenseMatrix::zeros(2, 2)), 0.0);
    }
}
