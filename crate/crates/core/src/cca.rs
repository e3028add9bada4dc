//! Canonical correlation analysis between layer features and label
//! representations, used to pick the layer to discretize.
//!
//! The score is the mean of the top `r` canonical correlations, i.e. the
//! singular values of `Cxx^-1/2 Cxy Cyy^-1/2` after ridge regularisation,
//! where `r` is bounded by the numerical ranks of both centred inputs.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{bail, Result};
use crate::feature_io::FeatureMatrix;

pub const DEFAULT_REG_EPS: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct CcaInput {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    reg_eps: f64,
}

fn to_dmatrix(m: &FeatureMatrix) -> DMatrix<f64> {
    DMatrix::from_row_iterator(m.n_frames(), m.n_dims(), m.data().iter().map(|&v| v as f64))
}

impl CcaInput {
    /// `x` and `y` hold one aligned observation per row.
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            bail!(Value, "X has {} rows but Y has {}", x.nrows(), y.nrows());
        }
        if x.nrows() < 2 {
            bail!(Value, "CCA needs at least two observations, got {}", x.nrows());
        }
        if x.ncols() == 0 || y.ncols() == 0 {
            bail!(Value, "CCA inputs need at least one column");
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            bail!(Value, "CCA inputs must be finite");
        }
        Ok(Self {
            x,
            y,
            reg_eps: DEFAULT_REG_EPS,
        })
    }

    pub fn from_features(x: &FeatureMatrix, y: &FeatureMatrix) -> Result<Self> {
        Self::new(to_dmatrix(x), to_dmatrix(y))
    }

    /// Builds row-major inputs from flat slices.
    pub fn from_row_major(n: usize, dx: usize, x: &[f64], dy: usize, y: &[f64]) -> Result<Self> {
        if x.len() != n * dx || y.len() != n * dy {
            bail!(Value, "CCA buffers do not match the declared shapes");
        }
        Self::new(
            DMatrix::from_row_slice(n, dx, x),
            DMatrix::from_row_slice(n, dy, y),
        )
    }

    pub fn with_reg_eps(mut self, reg_eps: f64) -> Result<Self> {
        if !(reg_eps >= 0.0 && reg_eps.is_finite()) {
            bail!(Value, "reg_eps must be finite and non-negative");
        }
        self.reg_eps = reg_eps;
        Ok(self)
    }

    pub fn reg_eps(&self) -> f64 {
        self.reg_eps
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }
}

fn centered(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = m.clone();
    for mut col in c.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    c
}

/// Regularised inverse square root of a covariance and the numerical rank
/// of the unregularised covariance.
fn inv_sqrt(cov: DMatrix<f64>, reg_eps: f64, n_obs: usize) -> (DMatrix<f64>, usize) {
    let d = cov.nrows();
    let eig = SymmetricEigen::new(cov);
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let tol = max_eig * n_obs.max(d) as f64 * f64::EPSILON;
    let rank = eig.eigenvalues.iter().filter(|&&l| l > tol).count();
    let floor = reg_eps.max(f64::MIN_POSITIVE);
    let scale = eig
        .eigenvalues
        .map(|l| 1.0 / (l + reg_eps).max(floor).sqrt());
    let v = &eig.eigenvectors;
    (v * DMatrix::from_diagonal(&scale) * v.transpose(), rank)
}

/// All canonical correlations in descending order, clipped to `[0, 1]`,
/// truncated to the number the input ranks support.
pub fn canonical_correlations(inp: &CcaInput) -> Vec<f64> {
    let n = inp.x.nrows();
    let xc = centered(&inp.x);
    let yc = centered(&inp.y);
    let denom = (n - 1) as f64;
    let cxx = xc.transpose() * &xc / denom;
    let cyy = yc.transpose() * &yc / denom;
    let cxy = xc.transpose() * &yc / denom;
    let (wx, rank_x) = inv_sqrt(cxx, inp.reg_eps, n);
    let (wy, rank_y) = inv_sqrt(cyy, inp.reg_eps, n);
    let m = wx * cxy * wy;
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let r = rank_x.min(rank_y).min(inp.x.ncols()).min(inp.y.ncols());
    sv.truncate(r);
    sv.iter().map(|s| s.clamp(0.0, 1.0)).collect()
}

/// Mean canonical correlation in `[0, 1]`.
pub fn cca_score(inp: &CcaInput) -> f64 {
    let cc = canonical_correlations(inp);
    if cc.is_empty() {
        0.0
    } else {
        cc.iter().sum::<f64>() / cc.len() as f64
    }
}

/// Layer with the highest score; the lowest layer ID wins ties.
pub fn select_layer(scores: &[(u32, f64)]) -> Result<u32> {
    if scores.is_empty() {
        bail!(Value, "no layer scores to select from");
    }
    if let Some((layer, s)) = scores.iter().find(|(_, s)| !s.is_finite()) {
        bail!(Value, "layer {layer} has non-finite score {s}");
    }
    let mut best = scores[0];
    for &(layer, score) in &scores[1..] {
        if score > best.1 || (score == best.1 && layer < best.0) {
            best = (layer, score);
        }
    }
    Ok(best.0)
}
