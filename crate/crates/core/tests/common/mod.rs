//! Independent numeric oracles shared by the integration tests.
//!
//! CCA here whitens with Cholesky factors and takes singular values by
//! one-sided Jacobi rotations, sharing no code with the library's
//! eigendecomposition route.

#![allow(dead_code)]

pub type Mat = Vec<Vec<f64>>;

fn covariance(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mean = |m: &Mat, j: usize| m.iter().map(|r| r[j]).sum::<f64>() / n as f64;
    let (da, db) = (a[0].len(), b[0].len());
    let ma: Vec<f64> = (0..da).map(|j| mean(a, j)).collect();
    let mb: Vec<f64> = (0..db).map(|j| mean(b, j)).collect();
    (0..da)
        .map(|i| {
            (0..db)
                .map(|j| (0..n).map(|t| (a[t][i] - ma[i]) * (b[t][j] - mb[j])).sum::<f64>() / (n - 1) as f64)
                .collect()
        })
        .collect()
}

fn cholesky(a: &Mat) -> Mat {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][j] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Inverse of a lower-triangular matrix by forward substitution.
#[allow(clippy::needless_range_loop)]
fn lower_inverse(l: &Mat) -> Mat {
    let n = l.len();
    let mut inv = vec![vec![0.0; n]; n];
    for c in 0..n {
        for i in 0..n {
            let rhs = if i == c { 1.0 } else { 0.0 };
            let s: f64 = (0..i).map(|k| l[i][k] * inv[k][c]).sum();
            inv[i][c] = (rhs - s) / l[i][i];
        }
    }
    inv
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    (0..a.len())
        .map(|i| (0..b[0].len()).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

fn transpose(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Singular values by one-sided Jacobi rotations on the columns.
pub fn jacobi_singular_values(a: &Mat) -> Vec<f64> {
    let mut u = a.clone();
    let (m, n) = (u.len(), u[0].len());
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = (0..m).map(|i| u[i][p] * u[i][p]).sum();
                let beta: f64 = (0..m).map(|i| u[i][q] * u[i][q]).sum();
                let gamma: f64 = (0..m).map(|i| u[i][p] * u[i][q]).sum();
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for row in u.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = c * x - s * y;
                    row[q] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n).map(|j| (0..m).map(|i| u[i][j] * u[i][j]).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn oracle_cca(x: &Mat, y: &Mat, reg: f64) -> f64 {
    let mut cxx = covariance(x, x);
    let mut cyy = covariance(y, y);
    for (i, row) in cxx.iter_mut().enumerate() {
        row[i] += reg;
    }
    for (i, row) in cyy.iter_mut().enumerate() {
        row[i] += reg;
    }
    let cxy = covariance(x, y);
    let lx = lower_inverse(&cholesky(&cxx));
    let ly = lower_inverse(&cholesky(&cyy));
    // Lx^-1 Cxy Ly^-T has the same singular values as Cxx^-1/2 Cxy Cyy^-1/2.
    let m = matmul(&matmul(&lx, &cxy), &transpose(&ly));
    let sv = jacobi_singular_values(&m);
    let r = x[0].len().min(y[0].len());
    sv[..r].iter().map(|s| s.clamp(0.0, 1.0)).sum::<f64>() / r as f64
}
