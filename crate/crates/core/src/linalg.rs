use nalgebra::{DMatrix, SMatrix};

/// Lower-triangular `L` with `L Lᵀ = m` for a symmetric positive semidefinite `m`.
///
/// Pivots at or below `tol · max diag` are treated as zero and their column
/// is zeroed, so singular (and all-zero) covariance matrices factor cleanly.
/// Returns `None` when a pivot is clearly negative.
pub fn psd_cholesky<const N: usize>(m: &SMatrix<f64, N, N>, tol: f64) -> Option<SMatrix<f64, N, N>> {
    let scale = (0..N).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
    let floor = tol * scale.max(f64::MIN_POSITIVE);
    let mut l = SMatrix::<f64, N, N>::zeros();
    for j in 0..N {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -1e3 * floor {
            return None;
        }
        if d <= floor {
            continue;
        }
        let pivot = d.sqrt();
        l[(j, j)] = pivot;
        for i in (j + 1)..N {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / pivot;
        }
    }
    Some(l)
}

/// What [`regularize_covariance`] changed.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceAdjustment {
    /// Largest |Σᵢⱼ − Σⱼᵢ| of the raw input.
    pub max_asymmetry: f64,
    /// Eigenvalues of the symmetrised matrix, ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues that were negative and clipped to zero.
    pub clipped: Vec<f64>,
    /// Frobenius norm of (output − raw input).
    pub frobenius_change: f64,
}

impl CovarianceAdjustment {
    pub fn is_noop(&self) -> bool {
        self.max_asymmetry == 0.0 && self.clipped.is_empty()
    }
}

/// Relative eigenvalue floor below which a matrix is rejected rather than projected.
pub const PROJECTION_TOLERANCE: f64 = 1e-3;

/// Symmetrise `(Σ + Σᵀ)/2` and clip negative eigenvalues to zero.
///
/// Negative eigenvalues larger in magnitude than
/// `PROJECTION_TOLERANCE · λ_max` mean the input is not a covariance matrix up
/// to rounding, and yield `Err` with the offending eigenvalue.
pub fn regularize_covariance<const N: usize>(
    raw: &SMatrix<f64, N, N>,
) -> Result<(SMatrix<f64, N, N>, CovarianceAdjustment), f64> {
    let sym = (raw + raw.transpose()) * 0.5;
    let max_asymmetry = (raw - raw.transpose()).abs().max();
    let eig = DMatrix::from_column_slice(N, N, sym.as_slice()).symmetric_eigen();
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let lambda_max = eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    let lambda_min = eigenvalues.first().copied().unwrap_or(0.0);
    if lambda_min < -PROJECTION_TOLERANCE * lambda_max.max(f64::MIN_POSITIVE) {
        return Err(lambda_min);
    }
    let clipped: Vec<f64> = eigenvalues.iter().copied().filter(|&l| l < 0.0).collect();
    let out = if clipped.is_empty() {
        sym
    } else {
        let mut d = eig.eigenvalues.clone();
        d.iter_mut().for_each(|l| *l = l.max(0.0));
        let v = &eig.eigenvectors;
        let p = v * DMatrix::from_diagonal(&d) * v.transpose();
        let p = SMatrix::<f64, N, N>::from_column_slice(p.as_slice());
        (p + p.transpose()) * 0.5
    };
    let frobenius_change = (out - raw).norm();
    Ok((
        out,
        CovarianceAdjustment {
            max_asymmetry,
            eigenvalues,
            clipped,
            frobenius_change,
        },
    ))
}
