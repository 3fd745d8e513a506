//! Local polynomial regression with pointwise 95% bands.
//!
//! At each grid point `x0` the fit is a kernel-weighted least squares of `y`
//! on `(1, x − x0, …, (x − x0)^p)`; the intercept is the smoothed value.
//! The band uses the equivalent-kernel weights `ℓ(x0)` of that fit and a
//! local residual variance estimated with the wider standard-error
//! bandwidth: `se = σ̂(x0) · ‖ℓ(x0)‖`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Epanechnikov,
    Triangular,
    Uniform,
    Gaussian,
}

impl Kernel {
    pub fn weight(self, u: f64) -> f64 {
        let a = u.abs();
        match self {
            Kernel::Epanechnikov => {
                if a < 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Triangular => (1.0 - a).max(0.0),
            Kernel::Uniform => {
                if a <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        }
    }

    pub fn parse(name: &str) -> Result<Kernel> {
        match name.to_ascii_lowercase().as_str() {
            "epanechnikov" | "epan" => Ok(Kernel::Epanechnikov),
            "triangular" | "tri" => Ok(Kernel::Triangular),
            "uniform" | "rectangle" => Ok(Kernel::Uniform),
            "gaussian" | "normal" => Ok(Kernel::Gaussian),
            other => Err(Error::Input(format!("unknown kernel `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Triangular => "triangular",
            Kernel::Uniform => "uniform",
            Kernel::Gaussian => "gaussian",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothSpec {
    pub degree: usize,
    pub bandwidth: f64,
    pub se_bandwidth: f64,
    pub kernel: Kernel,
    /// Evaluation points; sorted unique `x` when `None`.
    pub grid: Option<Vec<f64>>,
}

impl Default for SmoothSpec {
    fn default() -> Self {
        SmoothSpec {
            degree: 1,
            bandwidth: 50.0,
            se_bandwidth: 75.0,
            kernel: Kernel::Epanechnikov,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothResult {
    pub x: Vec<f64>,
    pub fitted: Vec<Option<f64>>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    /// Number of observations with positive kernel weight at each grid point.
    pub effective_n: Vec<usize>,
}

/// Smoothed value at `x0` and the equivalent-kernel weights producing it.
pub fn local_fit(
    x: &[f64],
    y: &[f64],
    x0: f64,
    degree: usize,
    bandwidth: f64,
    kernel: Kernel,
) -> Option<(f64, Vec<f64>)> {
    let p = degree + 1;
    let support: Vec<(usize, f64)> = x
        .iter()
        .enumerate()
        .map(|(i, &xi)| (i, kernel.weight((xi - x0) / bandwidth)))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    if support.len() < p {
        return None;
    }
    // sqrt-weighted local design; scaling by the bandwidth keeps powers O(1)
    let rows = support.len();
    let mut a = DMatrix::zeros(rows, p);
    let mut b = DVector::zeros(rows);
    for (r, &(i, w)) in support.iter().enumerate() {
        let sw = w.sqrt();
        let u = (x[i] - x0) / bandwidth;
        let mut pow = 1.0;
        for c in 0..p {
            a[(r, c)] = sw * pow;
            pow *= u;
        }
        b[r] = sw * y[i];
    }
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let qr = a.clone().qr();
    let rmat = qr.r();
    for k in 0..p {
        if rmat[(k, k)].abs() <= 1e-10 * norms[k].max(f64::MIN_POSITIVE) {
            return None;
        }
    }
    // e1ᵀ R⁻¹ Qᵀ gives the intercept as a linear map of the weighted responses
    let mut e1 = DVector::zeros(p);
    e1[0] = 1.0;
    let z = rmat.transpose().solve_lower_triangular(&e1)?;
    let q = qr.q();
    let lw = &q * z;
    let mut ell = vec![0.0; x.len()];
    let mut fit = 0.0;
    for (r, &(i, w)) in support.iter().enumerate() {
        ell[i] = lw[r] * w.sqrt();
        fit += lw[r] * b[r];
    }
    Some((fit, ell))
}

pub fn lpoly(x: &[f64], y: &[f64], spec: &SmoothSpec) -> Result<SmoothResult> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} x values for {} y values",
            x.len(),
            y.len()
        )));
    }
    if x.len() < spec.degree + 1 {
        return Err(Error::Input(format!(
            "degree {} smoother needs at least {} points, got {}",
            spec.degree,
            spec.degree + 1,
            x.len()
        )));
    }
    if !(spec.bandwidth > 0.0) || !(spec.se_bandwidth > 0.0) {
        return Err(Error::Input("bandwidths must be positive".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Input("smoother input contains non-finite values".into()));
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::Degenerate("all x values are identical".into()));
    }
    let grid = match &spec.grid {
        Some(g) => g.clone(),
        None => unique_sorted(x),
    };

    // residuals at the observations, for the local variance
    let resid: Vec<Option<f64>> = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            local_fit(x, y, xi, spec.degree, spec.bandwidth, spec.kernel).map(|(f, _)| yi - f)
        })
        .collect();

    let mut out = SmoothResult {
        x: grid.clone(),
        fitted: Vec::with_capacity(grid.len()),
        lower: Vec::with_capacity(grid.len()),
        upper: Vec::with_capacity(grid.len()),
        effective_n: Vec::with_capacity(grid.len()),
    };
    for &x0 in &grid {
        out.effective_n.push(
            x.iter()
                .filter(|&&xi| spec.kernel.weight((xi - x0) / spec.bandwidth) > 0.0)
                .count(),
        );
        match local_fit(x, y, x0, spec.degree, spec.bandwidth, spec.kernel) {
            Some((f, ell)) => {
                out.fitted.push(Some(f));
                let se = local_variance(x, &resid, x0, spec)
                    .map(|s2| (s2 * ell.iter().map(|l| l * l).sum::<f64>()).sqrt());
                out.lower.push(se.map(|s| f - Z95 * s));
                out.upper.push(se.map(|s| f + Z95 * s));
            }
            None => {
                out.fitted.push(None);
                out.lower.push(None);
                out.upper.push(None);
            }
        }
    }
    Ok(out)
}

fn local_variance(x: &[f64], resid: &[Option<f64>], x0: f64, spec: &SmoothSpec) -> Option<f64> {
    let mut sw = 0.0;
    let mut swr = 0.0;
    for (xi, r) in x.iter().zip(resid) {
        let Some(r) = r else { continue };
        let w = spec.kernel.weight((xi - x0) / spec.se_bandwidth);
        sw += w;
        swr += w * r * r;
    }
    (sw > 0.0).then(|| swr / sw)
}

fn unique_sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}
