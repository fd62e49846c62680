//! Dense helpers: Householder QR with column pivoting, singular-value
//! diagnostics and an orthogonal least-squares solver.

use nalgebra::{DMatrix, DVector, SVD};

/// `A·P = Q·R` with columns chosen greedily by largest remaining norm.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// Upper-trapezoidal factor, `min(m, n) × n`, in permuted column order.
    pub r: DMatrix<f64>,
    /// `perm[k]` is the original column placed at position `k`.
    pub perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let (m, n) = a.shape();
        let mut work = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let steps = m.min(n);
        for k in 0..steps {
            // exact recomputation keeps pivot choice robust after cancellation
            let (best, _) = (k..n)
                .map(|j| (j, work.view((k, j), (m - k, 1)).norm_squared()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best != k {
                work.swap_columns(k, best);
                perm.swap(k, best);
            }
            let x = work.view((k, k), (m - k, 1)).clone_owned();
            let alpha = x.norm();
            if alpha == 0.0 {
                continue;
            }
            let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
            let mut v = x;
            v[0] += sign * alpha;
            let vnorm2 = v.norm_squared();
            let mut tail = work.view_mut((k, k), (m - k, n - k));
            let proj = v.transpose() * &tail;
            tail -= &v * (proj * (2.0 / vnorm2));
        }
        let mut r = work.rows(0, steps).clone_owned();
        for i in 0..steps {
            for j in 0..i.min(n) {
                r[(i, j)] = 0.0;
            }
        }
        PivotedQr { r, perm }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.r.nrows().min(self.r.ncols()))
            .map(|i| self.r[(i, i)].abs())
            .collect()
    }
}

pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    SVD::new(a.clone(), false, false).singular_values
}

/// Number of singular values above `tol · σ_max`.
pub fn numerical_rank(a: &DMatrix<f64>, tol: f64) -> usize {
    let sv = singular_values(a);
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Ratio of extreme singular values; infinite when the smallest one is at
/// round-off level relative to the largest.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = singular_values(a);
    let smax = sv.max();
    let smin = sv.min();
    let floor = smax * f64::EPSILON * a.nrows().max(a.ncols()) as f64;
    if smax == 0.0 || smin <= floor {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Least-squares solution and diagnostics from a thin SVD.
#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub x: DVector<f64>,
    pub singular_values: DVector<f64>,
    /// Right singular vectors as columns.
    pub v: DMatrix<f64>,
    pub residual: DVector<f64>,
}

impl LstsqSolution {
    pub fn condition_number(&self) -> f64 {
        let smin = self.singular_values.min();
        if smin == 0.0 {
            f64::INFINITY
        } else {
            self.singular_values.max() / smin
        }
    }

    pub fn residual_rms(&self) -> f64 {
        if self.residual.is_empty() {
            0.0
        } else {
            (self.residual.norm_squared() / self.residual.len() as f64).sqrt()
        }
    }

    /// `(AᵀA)⁻¹ = V Σ⁻² Vᵀ`.
    pub fn unscaled_covariance(&self) -> DMatrix<f64> {
        let inv_sq = self.singular_values.map(|s| 1.0 / (s * s));
        &self.v * DMatrix::from_diagonal(&inv_sq) * self.v.transpose()
    }

    /// Indices (into the columns of `A`) of right singular vectors whose
    /// singular value falls below `tol · σ_max`, paired with those vectors.
    pub fn weak_directions(&self, tol: f64) -> Vec<(f64, DVector<f64>)> {
        let smax = self.singular_values.max();
        self.singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= tol * smax)
            .map(|(k, &s)| (s / smax, self.v.column(k).clone_owned()))
            .collect()
    }
}

/// Minimize `‖b − A x‖²` through the SVD of `A`; never forms `AᵀA`.
///
/// Columns are equilibrated before factorizing so the rank test is not
/// dominated by unit choices; the returned singular values and vectors refer
/// to the scaled problem.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> LstsqSolution {
    let n = a.ncols();
    let scale = DVector::from_iterator(
        n,
        a.column_iter().map(|c| {
            let s = c.norm();
            if s > 0.0 {
                1.0 / s
            } else {
                1.0
            }
        }),
    );
    let scaled = a * DMatrix::from_diagonal(&scale);
    let svd = SVD::new(scaled, true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let sv = svd.singular_values.clone();
    let smax = sv.max();
    let utb = u.transpose() * b;
    let mut coeff = DVector::zeros(sv.len());
    for k in 0..sv.len() {
        if sv[k] > smax * 1e-15 {
            coeff[k] = utb[k] / sv[k];
        }
    }
    let z = vt.transpose() * coeff;
    let x = z.component_mul(&scale);
    let residual = b - a * &x;
    // undo the column scaling on V so covariance refers to the original x
    let v = DMatrix::from_diagonal(&scale) * vt.transpose();
    LstsqSolution {
        x,
        singular_values: sv,
        v,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            5,
            4,
            &[
                1.0, 2.0, 0.0, 3.0, //
                0.5, -1.0, 0.0, -0.5, //
                2.0, 0.1, 0.0, 2.1, //
                -1.0, 4.0, 0.0, 3.0, //
                0.3, 0.3, 0.0, 0.6,
            ],
        )
    }

    #[test]
    fn pivoted_qr_reconstructs_columns() {
        let a = sample();
        let qr = PivotedQr::new(&a);
        // RᵀR equals the permuted Gram matrix
        let mut ap = DMatrix::zeros(5, 4);
        for (k, &c) in qr.perm.iter().enumerate() {
            ap.set_column(k, &a.column(c));
        }
        let gram = ap.transpose() * &ap;
        assert!((qr.r.transpose() * &qr.r - gram).amax() < 1e-12);
        let d = qr.diagonal();
        assert!(d.windows(2).all(|w| w[0] >= w[1] - 1e-12));
        // col 3 = col 0 + col 1 and col 2 = 0: rank 2
        assert!(d[2] < 1e-12 && d[3] < 1e-12);
        assert_eq!(numerical_rank(&a, 1e-9), 2);
    }

    #[test]
    fn lstsq_recovers_exact_solution() {
        let a = DMatrix::from_fn(30, 3, |i, j| {
            (((i + 1) * (j + 1)) as f64 * 0.37).sin() * (j as f64 + 1.0) * 10f64.powi(j as i32)
        });
        let x = DVector::from_vec(vec![1.5, -2.0, 0.25]);
        let sol = lstsq(&a, &(&a * &x));
        assert!((&sol.x - x).amax() < 1e-10);
        assert!(sol.residual_rms() < 1e-10);
        let cov = sol.unscaled_covariance();
        let direct = (a.transpose() * &a).try_inverse().unwrap();
        assert!((cov - &direct).amax() < 1e-9 * direct.amax());
    }

    #[test]
    fn condition_number_of_singular_matrix_is_infinite() {
        assert!(condition_number(&sample()).is_infinite());
        assert!((condition_number(&DMatrix::identity(4, 4)) - 1.0).abs() < 1e-12);
    }
}
