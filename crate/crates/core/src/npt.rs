//! Non-linear projection trick: an explicit finite-dimensional embedding of
//! RBF kernel data, obtained from the eigendecomposition of the centered
//! training kernel, plus the matching map for unseen points.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::linalg::{self, row_major};

/// Eigenvalues below this fraction of the largest one are dropped.
pub const EIGEN_REL_TOL: f64 = 1e-10;
/// Singular-value cutoff (relative) for general pseudo-inverses.
pub const PINV_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NptModel {
    pub sigma: f64,
    /// `D x N` training inputs.
    #[serde(with = "row_major")]
    pub train_inputs: DMatrix<f64>,
    /// Row means of the raw training kernel, `K 1 / N`.
    pub kernel_row_means: Vec<f64>,
    #[serde(with = "row_major")]
    pub centered_kernel: DMatrix<f64>,
    /// `N x r`, one retained eigenvector per column.
    #[serde(with = "row_major")]
    pub eigenvectors: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// `r x N` embedded training data.
    #[serde(with = "row_major")]
    pub phi_train: DMatrix<f64>,
    /// `r x N` pseudo-inverse of `phi_train^T`.
    #[serde(with = "row_major")]
    pub phi_pinv: DMatrix<f64>,
}

impl NptModel {
    pub fn rank(&self) -> usize {
        self.phi_train.nrows()
    }
}

/// `K[i, j] = exp(-|a_i - b_j|^2 / (2 sigma^2))` for columns of `a` and `b`.
pub fn rbf_kernel(a: &DMatrix<f64>, b: &DMatrix<f64>, sigma: f64) -> Result<DMatrix<f64>> {
    if !(sigma > 0.0) {
        return invalid(format!("kernel width must be positive, got {sigma}"));
    }
    if a.nrows() != b.nrows() {
        return shape(format!(
            "kernel inputs have {} and {} rows",
            a.nrows(),
            b.nrows()
        ));
    }
    let scale = 1.0 / (2.0 * sigma * sigma);
    Ok(DMatrix::from_fn(a.ncols(), b.ncols(), |i, j| {
        let d2 = a.column(i).metric_distance(&b.column(j)).powi(2);
        (-d2 * scale).exp()
    }))
}

/// `(I - J/N) K (I - J/N)`.
pub fn center_kernel(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !k.is_square() {
        return shape(format!("kernel must be square, got {:?}", k.shape()));
    }
    let n = k.nrows();
    if n == 0 {
        return Ok(k.clone());
    }
    let h = centering_matrix(n);
    Ok(&h * k * &h)
}

fn centering_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64)
}

/// Fit the embedding on the `D x N` training matrix.
///
/// With `K_c = U A U^T`, the embedding `(A^1/2)^+ U^+ U A U^T` reduces to
/// `A^1/2 U^T` on the retained eigenpairs, which is what gets stored.
pub fn fit_npt(x: &DMatrix<f64>, sigma: f64) -> Result<NptModel> {
    let n = x.ncols();
    if n < 2 {
        return invalid(format!("NPT needs at least 2 training points, got {n}"));
    }
    let k = rbf_kernel(x, x, sigma)?;
    let kernel_row_means: Vec<f64> = k.row_iter().map(|r| r.sum() / n as f64).collect();
    let centered = center_kernel(&k)?;
    let (vals, vecs) = linalg::sym_eigen_desc(&centered);
    let largest = vals[0];
    if !(largest > 1e-12) {
        return Err(Error::DegenerateKernel(format!(
            "centered kernel has no positive eigenvalue (largest {largest:e})"
        )));
    }
    let cutoff = EIGEN_REL_TOL * largest;
    let r = vals.iter().take_while(|&&v| v > cutoff).count();
    let eigenvalues: Vec<f64> = vals.iter().take(r).map(|v| v.max(0.0)).collect();
    let eigenvectors = vecs.columns(0, r).into_owned();
    let sqrt_a = DMatrix::from_diagonal(&DVector::from_iterator(r, eigenvalues.iter().map(|v| v.sqrt())));
    let phi_train = sqrt_a * eigenvectors.transpose();
    // U has orthonormal columns, so (Phi^T)^+ = A^-1/2 U^T exactly; a general
    // SVD loses ~1e-6 when singular values cluster
    let inv_sqrt_a = DMatrix::from_diagonal(&DVector::from_iterator(r, eigenvalues.iter().map(|v| 1.0 / v.sqrt())));
    let phi_pinv = inv_sqrt_a * eigenvectors.transpose();
    Ok(NptModel {
        sigma,
        train_inputs: x.clone(),
        kernel_row_means,
        centered_kernel: centered,
        eigenvectors,
        eigenvalues,
        phi_train,
        phi_pinv,
    })
}

/// Embed a `D x P` batch: `(Phi^T)^+ (I - J/N) (K_* - K 1/N)`.
pub fn map_test(model: &NptModel, x_star: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x_star.nrows() != model.train_inputs.nrows() {
        return shape(format!(
            "NPT model expects {} features, got {}",
            model.train_inputs.nrows(),
            x_star.nrows()
        ));
    }
    let p = x_star.ncols();
    if p == 0 {
        return Ok(DMatrix::zeros(model.rank(), 0));
    }
    let n = model.train_inputs.ncols();
    let mut kstar = rbf_kernel(&model.train_inputs, x_star, model.sigma)?;
    for mut col in kstar.column_iter_mut() {
        for (v, mean) in col.iter_mut().zip(&model.kernel_row_means) {
            *v -= mean;
        }
    }
    let centered = centering_matrix(n) * kstar;
    Ok(&model.phi_pinv * centered)
}
