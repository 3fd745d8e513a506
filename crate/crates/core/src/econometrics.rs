//! OLS and maximum-likelihood logit with the diagnostics the tables report.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::stats::{chi2_sf, normal_two_sided_p, stars, t_two_sided_p};

/// Name of the intercept column added by [`DesignMatrix::new`].
pub const CONSTANT: &str = "const";

/// Regressors (with names) and response. No missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl DesignMatrix {
    /// Builds a design from named columns, optionally prepending a constant.
    pub fn new(y: Vec<f64>, columns: Vec<(String, Vec<f64>)>, constant: bool) -> Result<Self> {
        let n = y.len();
        let mut names = Vec::with_capacity(columns.len() + 1);
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(columns.len() + 1);
        if constant {
            names.push(CONSTANT.to_string());
            cols.push(vec![1.0; n]);
        }
        for (name, col) in columns {
            if col.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "column `{name}` has {} rows, response has {n}",
                    col.len()
                )));
            }
            if names.contains(&name) {
                return Err(Error::Input(format!("duplicate column name `{name}`")));
            }
            names.push(name);
            cols.push(col);
        }
        if let Some(bad) = y.iter().chain(cols.iter().flatten()).find(|v| !v.is_finite()) {
            return Err(Error::Input(format!("design contains non-finite value {bad}")));
        }
        let k = cols.len();
        let x = DMatrix::from_fn(n, k, |i, c| cols[c][i]);
        Ok(DesignMatrix {
            names,
            x,
            y: DVector::from_vec(y),
        })
    }

    pub fn n_obs(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    Ols,
    Logit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub kind: FitKind,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Two-sided; t distribution for OLS, normal for logit.
    pub p_values: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub log_likelihood: Option<f64>,
    /// Log-likelihood of the intercept-only model on the same response (logit).
    pub null_log_likelihood: Option<f64>,
    pub rss: Option<f64>,
    pub r_squared: Option<f64>,
    pub pseudo_r_squared: Option<f64>,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Max-norm of the score at the estimate (logit).
    pub max_gradient: Option<f64>,
    /// OLS fitted values, or logit fitted probabilities.
    pub fitted: Vec<f64>,
    /// `y - fitted`.
    pub residuals: Vec<f64>,
}

impl FitResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.coefficients[i])
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.std_errors[i])
    }

    pub fn stars(&self, i: usize) -> &'static str {
        stars(self.p_values[i])
    }

    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }

    /// Linear predictor `βQ` for every row of `d`.
    pub fn linear_predictor(&self, d: &DesignMatrix) -> Result<Vec<f64>> {
        if d.names != self.names {
            return Err(Error::Input(format!(
                "design columns {:?} do not match fit columns {:?}",
                d.names, self.names
            )));
        }
        let beta = DVector::from_column_slice(&self.coefficients);
        Ok((&d.x * beta).iter().copied().collect())
    }
}

/// Column scaling and triangular factor of a QR decomposition, with rank check.
struct ScaledQr {
    scale: Vec<f64>,
    qr: nalgebra::linalg::QR<f64, nalgebra::Dyn, nalgebra::Dyn>,
    r: DMatrix<f64>,
}

const RANK_TOL: f64 = 1e-10;

fn scaled_qr(x: &DMatrix<f64>, names: &[String]) -> Result<ScaledQr> {
    let scale: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    let zero: Vec<String> = scale
        .iter()
        .zip(names)
        .filter(|(&s, _)| s == 0.0)
        .map(|(_, n)| n.clone())
        .collect();
    if !zero.is_empty() {
        return Err(Error::RankDeficient { columns: zero });
    }
    let mut xs = x.clone();
    for (mut col, s) in xs.column_iter_mut().zip(&scale) {
        col.unscale_mut(*s);
    }
    let qr = xs.qr();
    let r = qr.r();
    let dependent: Vec<String> = (0..r.ncols())
        .filter(|&k| r[(k, k)].abs() <= RANK_TOL)
        .map(|k| names[k].clone())
        .collect();
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent });
    }
    Ok(ScaledQr { scale, qr, r })
}

/// Least squares through a QR decomposition of the column-scaled design.
pub fn ols_fit(d: &DesignMatrix) -> Result<FitResult> {
    let (n, k) = d.x.shape();
    if n <= k {
        return Err(Error::Input(format!(
            "OLS needs more observations ({n}) than columns ({k})"
        )));
    }
    let sq = scaled_qr(&d.x, &d.names)?;
    let mut qty = d.y.clone();
    sq.qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, k).into_owned();
    let beta_scaled = sq
        .r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let beta: Vec<f64> = beta_scaled
        .iter()
        .zip(&sq.scale)
        .map(|(b, s)| b / s)
        .collect();

    let fitted_v = &d.x * DVector::from_column_slice(&beta);
    let fitted: Vec<f64> = fitted_v.iter().copied().collect();
    let residuals: Vec<f64> = d.y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let ybar = d.y.mean();
    let tss: f64 = d.y.iter().map(|y| (y - ybar).powi(2)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { f64::NAN };

    let df = (n - k) as f64;
    let sigma2 = rss / df;
    let r_inv = sq
        .r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Numerical("triangular inverse failed".into()))?;
    let xtx_inv_scaled = &r_inv * r_inv.transpose();
    let covariance =
        DMatrix::from_fn(k, k, |a, b| sigma2 * xtx_inv_scaled[(a, b)] / (sq.scale[a] * sq.scale[b]));
    let std_errors: Vec<f64> = (0..k).map(|a| covariance[(a, a)].sqrt()).collect();
    let p_values = beta
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| t_two_sided_p(b / se, df))
        .collect();

    Ok(FitResult {
        kind: FitKind::Ols,
        names: d.names.clone(),
        coefficients: beta,
        std_errors,
        p_values,
        covariance,
        log_likelihood: None,
        null_log_likelihood: None,
        rss: Some(rss),
        r_squared: Some(r_squared),
        pseudo_r_squared: None,
        n,
        converged: true,
        iterations: 1,
        max_gradient: None,
        fitted,
        residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitOptions {
    pub max_iter: usize,
    /// Convergence threshold on the max-norm of the score.
    pub tol: f64,
    /// Separation is declared once `|β_k|·max|x_k|` exceeds this while the
    /// score has not yet vanished.
    pub separation_bound: f64,
}

impl Default for LogitOptions {
    fn default() -> Self {
        LogitOptions {
            max_iter: 50,
            tol: 1e-8,
            separation_bound: 30.0,
        }
    }
}

#[inline]
pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

fn log_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    let mut acc = Neumaier::default();
    for (e, yi) in eta.iter().zip(y.iter()) {
        acc.add(yi * e - softplus(*e));
    }
    acc.sum()
}

/// Compensated summation so the score stays accurate over large samples.
#[derive(Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn sum(self) -> f64 {
        self.sum + self.comp
    }
}

fn score(x: &DMatrix<f64>, y: &DVector<f64>, p: &[f64]) -> DVector<f64> {
    let k = x.ncols();
    let mut acc = vec![Neumaier::default(); k];
    for i in 0..x.nrows() {
        let resid = y[i] - p[i];
        for (c, a) in acc.iter_mut().enumerate() {
            a.add(x[(i, c)] * resid);
        }
    }
    DVector::from_iterator(k, acc.into_iter().map(Neumaier::sum))
}

fn information(x: &DMatrix<f64>, p: &[f64]) -> DMatrix<f64> {
    let mut xw = x.clone();
    for (i, mut row) in xw.row_iter_mut().enumerate() {
        row.scale_mut(p[i] * (1.0 - p[i]));
    }
    x.transpose() * xw
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Maximum-likelihood logit by Newton–Raphson (IRLS) with step halving.
pub fn logit_fit(d: &DesignMatrix, opts: LogitOptions) -> Result<FitResult> {
    let (n, k) = d.x.shape();
    if d.y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Input("logit response must be 0/1".into()));
    }
    let successes = d.y.iter().filter(|&&v| v == 1.0).count();
    if successes == 0 || successes == n {
        return Err(Error::Input(format!(
            "logit response has a single class ({successes} successes in {n})"
        )));
    }
    if n <= k {
        return Err(Error::Input(format!(
            "logit needs more observations ({n}) than columns ({k})"
        )));
    }
    // rank check on the design itself
    scaled_qr(&d.x, &d.names)?;

    let col_scale: Vec<f64> = d
        .x
        .column_iter()
        .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    let rate = successes as f64 / n as f64;
    let null_ll = successes as f64 * rate.ln() + (n - successes) as f64 * (1.0 - rate).ln();

    let mut beta = DVector::zeros(k);
    if let Some(c) = d.column_index(CONSTANT) {
        beta[c] = (rate / (1.0 - rate)).ln();
    }
    let mut ll = log_likelihood(&d.x, &d.y, &beta);
    let mut converged = false;
    let mut iterations = 0;
    let mut grad_norm;
    let mut probs: Vec<f64>;

    loop {
        let eta = &d.x * &beta;
        probs = eta.iter().map(|&e| logistic(e)).collect();
        let g = score(&d.x, &d.y, &probs);
        grad_norm = max_abs(&g);
        if grad_norm <= opts.tol {
            converged = true;
            break;
        }
        let effect = beta
            .iter()
            .zip(&col_scale)
            .fold(0.0f64, |m, (b, s)| m.max((b * s).abs()));
        if effect > opts.separation_bound {
            return Err(Error::Separation(format!(
                "coefficients diverging (max |beta*x| = {effect:.3}) with score {grad_norm:.3e}"
            )));
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let h = information(&d.x, &probs);
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => {
                return Err(Error::Separation(
                    "information matrix lost positive definiteness".into(),
                ))
            }
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let candidate = &beta + &step * t;
            let cand_ll = log_likelihood(&d.x, &d.y, &candidate);
            if cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                let size = max_abs(&(&step * t));
                moved = cand_ll > ll || size > 1e-15 * (1.0 + max_abs(&beta));
                beta = candidate;
                ll = cand_ll;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // stalled at working precision
            break;
        }
    }

    let h = information(&d.x, &probs);
    let covariance = h
        .clone()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::from_element(k, k, f64::NAN));
    let std_errors: Vec<f64> = (0..k).map(|a| covariance[(a, a)].sqrt()).collect();
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let p_values = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| normal_two_sided_p(b / se))
        .collect();
    let residuals = d.y.iter().zip(&probs).map(|(y, p)| y - p).collect();

    Ok(FitResult {
        kind: FitKind::Logit,
        names: d.names.clone(),
        coefficients,
        std_errors,
        p_values,
        covariance,
        log_likelihood: Some(ll),
        null_log_likelihood: Some(null_ll),
        rss: None,
        r_squared: None,
        pseudo_r_squared: Some(1.0 - ll / null_ll),
        n,
        converged,
        iterations,
        max_gradient: Some(grad_norm),
        fitted: probs,
        residuals,
    })
}

/// McFadden's pseudo-R²: `1 - lnL / lnL_null`.
pub fn pseudo_r2(fit: &FitResult, null_fit: &FitResult) -> Result<f64> {
    let (Some(ll), Some(ll0)) = (fit.log_likelihood, null_fit.log_likelihood) else {
        return Err(Error::Input("pseudo-R² needs two likelihood-based fits".into()));
    };
    if fit.n != null_fit.n {
        return Err(Error::Input(format!(
            "fits use different samples ({} vs {})",
            fit.n, null_fit.n
        )));
    }
    if ll0 == 0.0 {
        return Err(Error::Numerical("null log-likelihood is zero".into()));
    }
    Ok(1.0 - ll / ll0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Likelihood-ratio test of a restricted model nested in a general one.
pub fn lr_test(restricted: &FitResult, general: &FitResult) -> Result<LrTest> {
    let (Some(l0), Some(l1)) = (restricted.log_likelihood, general.log_likelihood) else {
        return Err(Error::Input("LR test needs two likelihood-based fits".into()));
    };
    if general.n_params() < restricted.n_params() {
        return Err(Error::Input(
            "general model has fewer parameters than the restricted one".into(),
        ));
    }
    let raw = 2.0 * (l1 - l0);
    if raw < -1e-8 {
        return Err(Error::Numerical(format!(
            "negative LR statistic {raw:.3e}; models not nested or not converged"
        )));
    }
    let statistic = raw.max(0.0);
    let df = general.n_params() - restricted.n_params();
    Ok(LrTest {
        statistic,
        df,
        p_value: chi2_sf(statistic, df),
    })
}

/// Direct chi-square tail, exposed for callers holding only a statistic.
pub fn lr_p_value(statistic: f64, df: usize) -> f64 {
    chi2_sf(statistic, df)
}

/// Per-observation elasticity of the fitted probability: `β·x·(1 − P̂)`.
pub fn probability_elasticity(fit: &FitResult, d: &DesignMatrix, column: &str) -> Result<Vec<f64>> {
    if fit.kind != FitKind::Logit {
        return Err(Error::Input("elasticities need a logit fit".into()));
    }
    let c = fit
        .index(column)
        .ok_or_else(|| Error::Input(format!("column `{column}` not in fit")))?;
    let eta = fit.linear_predictor(d)?;
    let b = fit.coefficients[c];
    Ok(eta
        .iter()
        .enumerate()
        .map(|(i, &e)| b * d.x[(i, c)] * (1.0 - logistic(e)))
        .collect())
}

/// Mean elasticity for a group, negated when the regressor's mean is negative
/// so the sign follows the coefficient.
pub fn signed_mean_elasticity(elasticities: &[f64], regressor: &[f64]) -> Option<f64> {
    let e = crate::stats::mean(elasticities)?;
    let x = crate::stats::mean(regressor)?;
    Some(if x < 0.0 { -e } else { e })
}
