//! Response/design representation, covariate subsets, and per-model least
//! squares quantities.
//!
//! The design matrix is always held with unit-norm columns; everything
//! downstream (admissibility thresholds, model scores, proposal weights)
//! assumes that normalization.

use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Response vector and unit-norm design matrix, plus the metadata needed to
/// map fitted coefficients back to the raw scale.
#[derive(Debug, Clone)]
pub struct StandardizedDesign {
    y: Array1<f64>,
    x: Array2<f64>,
    col_norms: Array1<f64>,
    col_means: Array1<f64>,
    y_mean: f64,
    centered: bool,
    // lambda_max(X'X) and X'X itself, computed once on first use
    spectral_max: OnceLock<f64>,
    gram: OnceLock<Array2<f64>>,
}

impl StandardizedDesign {
    pub fn y(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn col_norms(&self) -> ArrayView1<'_, f64> {
        self.col_norms.view()
    }

    pub fn col_means(&self) -> ArrayView1<'_, f64> {
        self.col_means.view()
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn centered(&self) -> bool {
        self.centered
    }

    /// lambda_max(X'X), memoized after the first call.
    pub fn gram_spectral_max(&self) -> f64 {
        *self
            .spectral_max
            .get_or_init(|| linalg::gram_spectral_max(&self.x.view()))
    }

    /// X'X, memoized; the admissibility objective lives entirely in this
    /// metric.
    pub fn gram(&self) -> &Array2<f64> {
        self.gram.get_or_init(|| self.x.t().dot(&self.x))
    }

    /// Columns of the design restricted to `m`, as a fresh n x |m| matrix.
    pub fn columns(&self, m: &ModelIndex) -> Array2<f64> {
        let n = self.n();
        let mut out = Array2::<f64>::zeros((n, m.len()));
        for (k, &j) in m.indices().iter().enumerate() {
            out.column_mut(k).assign(&self.x.column(j));
        }
        out
    }

    /// Reconstructs the raw-scale data this design was built from.
    pub fn raw_data(&self) -> (Array1<f64>, Array2<f64>) {
        let y_raw = &self.y + self.y_mean;
        let mut x_raw = self.x.clone();
        for j in 0..self.p() {
            let (norm, mean) = (self.col_norms[j], self.col_means[j]);
            x_raw.column_mut(j).mapv_inplace(|v| v * norm + mean);
        }
        (y_raw, x_raw)
    }

    /// Applies this design's centering/scaling to new raw rows (for held-out
    /// prediction with training-fit coefficients).
    pub fn transform_rows(&self, x_raw: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if x_raw.ncols() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} columns, got {}",
                self.p(),
                x_raw.ncols()
            )));
        }
        let mut out = x_raw.to_owned();
        for j in 0..self.p() {
            let (norm, mean) = (self.col_norms[j], self.col_means[j]);
            out.column_mut(j).mapv_inplace(|v| (v - mean) / norm);
        }
        Ok(out)
    }

    /// Predicts responses for standardized rows restricted to `m`, adding the
    /// training response mean back when the design was centered.
    pub fn predict(
        &self,
        x_std: &ArrayView2<f64>,
        m: &ModelIndex,
        beta: &ArrayView1<f64>,
    ) -> Array1<f64> {
        let mut yhat = Array1::<f64>::from_elem(x_std.nrows(), self.y_mean);
        for (k, &j) in m.indices().iter().enumerate() {
            yhat.scaled_add(beta[k], &x_std.column(j));
        }
        yhat
    }

    /// Maps standardized-scale coefficients for `m` back to the raw scale,
    /// together with the implied intercept (0 for uncentered designs).
    pub fn raw_scale_coefficients(
        &self,
        m: &ModelIndex,
        beta: &ArrayView1<f64>,
    ) -> (Array1<f64>, f64) {
        let raw: Array1<f64> = m
            .indices()
            .iter()
            .zip(beta.iter())
            .map(|(&j, &b)| b / self.col_norms[j])
            .collect();
        let intercept = if self.centered {
            let shift: f64 = m
                .indices()
                .iter()
                .zip(raw.iter())
                .map(|(&j, &b)| b * self.col_means[j])
                .sum();
            self.y_mean - shift
        } else {
            0.0
        };
        (raw, intercept)
    }
}

/// Centers (optionally) and scales every column of `x_raw` to unit L2 norm.
///
/// When `center` is on, `y` and each column are mean-centered before scaling,
/// which also rejects all-constant columns (they scale to zero norm).
pub fn standardize(
    y_raw: &ArrayView1<f64>,
    x_raw: &ArrayView2<f64>,
    center: bool,
) -> Result<StandardizedDesign> {
    let n = x_raw.nrows();
    let p = x_raw.ncols();
    if y_raw.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "response has {} rows, design has {}",
            y_raw.len(),
            n
        )));
    }
    if n < 2 {
        return Err(Error::DimensionMismatch(format!(
            "need at least 2 observations, got {n}"
        )));
    }
    if p == 0 {
        return Err(Error::DimensionMismatch("design has no columns".into()));
    }

    let y_mean = if center { y_raw.mean().unwrap() } else { 0.0 };
    let y = y_raw.mapv(|v| v - y_mean);

    let mut x = x_raw.to_owned();
    let col_means = if center {
        let means = x.mean_axis(Axis(0)).unwrap();
        for j in 0..p {
            let mu = means[j];
            x.column_mut(j).mapv_inplace(|v| v - mu);
        }
        means
    } else {
        Array1::zeros(p)
    };

    let mut col_norms = Array1::<f64>::zeros(p);
    for j in 0..p {
        let nrm = x.column(j).dot(&x.column(j)).sqrt();
        if nrm == 0.0 {
            return Err(Error::ZeroNormColumn { index: j });
        }
        col_norms[j] = nrm;
        x.column_mut(j).mapv_inplace(|v| v / nrm);
    }

    Ok(StandardizedDesign {
        y,
        x,
        col_norms,
        col_means,
        y_mean,
        centered: center,
        spectral_max: OnceLock::new(),
        gram: OnceLock::new(),
    })
}

/// An ordered covariate subset M of {0, .., p-1}.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModelIndex(Vec<usize>);

impl ModelIndex {
    /// Builds a subset from arbitrary order; rejects duplicates.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidModel("duplicate covariate index".into()));
        }
        Ok(Self(indices))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    /// New subset with `j` inserted (no-op error if already present).
    pub fn with(&self, j: usize) -> Self {
        debug_assert!(!self.contains(j));
        let pos = self.0.partition_point(|&k| k < j);
        let mut v = self.0.clone();
        v.insert(pos, j);
        Self(v)
    }

    /// New subset with `j` removed.
    pub fn without(&self, j: usize) -> Self {
        let mut v = self.0.clone();
        v.retain(|&k| k != j);
        Self(v)
    }

    pub fn is_subset_of(&self, other: &ModelIndex) -> bool {
        self.0.iter().all(|&j| other.contains(j))
    }
}

impl std::fmt::Display for ModelIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

/// Per-model least squares artifacts.
#[derive(Debug, Clone)]
pub struct ModelFit {
    /// Least squares coefficients on the standardized scale.
    pub beta_hat: Array1<f64>,
    /// Residual sum of squares y'(I - H_M)y.
    pub rss: f64,
    /// RSS / (n - |M|).
    pub sigma2_hat: f64,
    /// trace((H_M X)' H_M X), the collinearity-sensitive scale factor.
    pub lambda: f64,
    /// Lower Cholesky factor of X_M' X_M.
    pub chol: Array2<f64>,
    /// log det X_M' X_M.
    pub logdet: f64,
}

/// Least squares fit of the model `m`, with the admissibility scale factor.
///
/// Rank deficiency (Cholesky pivot under 1e-10) is an error; callers treat it
/// as h = 0 since linearly dependent columns are never admissible.
pub fn fit_model(d: &StandardizedDesign, m: &ModelIndex) -> Result<ModelFit> {
    let n = d.n();
    let k = m.len();
    if k == 0 {
        return Err(Error::InvalidModel("empty model".into()));
    }
    if k > n {
        // more columns than rows are always linearly dependent
        return Err(Error::RankDeficient);
    }
    let xm = d.columns(m);
    let gram = xm.t().dot(&xm);
    let chol = linalg::cholesky_lower(&gram.view())?;
    let xty = xm.t().dot(&d.y());
    let beta_hat = linalg::solve_spd(&chol.view(), &xty.view());

    let resid = &d.y() - &xm.dot(&beta_hat);
    let rss = resid.dot(&resid).max(0.0);
    // sigma2 needs residual degrees of freedom; a saturated fit has none
    let sigma2_hat = if k < n { rss / (n - k) as f64 } else { f64::NAN };

    // Lambda_M = || X'X_M L^{-T} ||_F^2: forward-solve each row of X'X_M
    let b = d.x().t().dot(&xm); // p x k
    let mut lambda = 0.0;
    for i in 0..b.nrows() {
        let w = linalg::solve_lower(&chol.view(), &b.row(i));
        lambda += w.dot(&w);
    }

    let logdet = 2.0 * chol.diag().iter().map(|v| v.ln()).sum::<f64>();

    Ok(ModelFit {
        beta_hat,
        rss,
        sigma2_hat,
        lambda,
        chol,
        logdet,
    })
}

/// Squared distance between the mean vector X_{M_o} beta0 and its projection
/// onto span(X_M); a diagnostic of how distinguishable M is from the truth.
pub fn delta_m(
    d: &StandardizedDesign,
    m: &ModelIndex,
    m_o: &ModelIndex,
    beta0: &ArrayView1<f64>,
) -> Result<f64> {
    if beta0.len() != m_o.len() {
        return Err(Error::DimensionMismatch(format!(
            "beta0 has {} entries for a model of size {}",
            beta0.len(),
            m_o.len()
        )));
    }
    let mu = d.columns(m_o).dot(beta0);
    let xm = d.columns(m);
    let gram = xm.t().dot(&xm);
    let chol = linalg::cholesky_lower(&gram.view())?;
    let coef = linalg::solve_spd(&chol.view(), &xm.t().dot(&mu).view());
    let resid = &mu - &xm.dot(&coef);
    Ok(resid.dot(&resid))
}
