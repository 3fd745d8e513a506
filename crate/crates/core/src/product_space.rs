//! Conditional co-specialization probabilities, proximity and density.
//!
//! `c = S⁻¹XXᵀ` with `S = diag(ubiquity)`, so `c[(p, q)] = k_pq / s_p` is the
//! probability of RCA in `q` given RCA in `p`. Proximity is the elementwise
//! minimum of `c` and its transpose. Density divides proximity-weighted
//! specializations by the full proximity row sum.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::specialization::RcaMatrix;
use crate::stats::fmt_g6;

#[derive(Debug, Clone, PartialEq)]
pub struct ProximityBundle {
    /// Conditional probabilities, rows conditioned on.
    pub c: DMatrix<f64>,
    /// Symmetric proximity `min(c, cᵀ)`.
    pub c_min: DMatrix<f64>,
    /// Co-occurrence counts `XXᵀ`.
    pub co_occurrence: DMatrix<u32>,
    /// Row sums of `c_min`, diagonal included.
    pub row_sums: Vec<f64>,
}

impl ProximityBundle {
    pub fn n_products(&self) -> usize {
        self.c.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DensityOptions {
    /// Keep the unit diagonal of the proximity matrix in numerator and denominator.
    pub include_diagonal: bool,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions {
            include_diagonal: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    /// m×n, entries in [0, 1].
    pub d: DMatrix<f64>,
}

pub fn conditional_probabilities(rca: &RcaMatrix) -> Result<ProximityBundle> {
    if let Some(i) = rca.ubiquity.iter().position(|&s| s == 0) {
        return Err(Error::Singular(format!(
            "product `{}` has zero ubiquity",
            rca.products[i]
        )));
    }
    let k = &rca.x * rca.x.transpose();
    let m = k.nrows();
    let c = DMatrix::from_fn(m, m, |p, q| k[(p, q)] / rca.ubiquity[p] as f64);
    let c_min = DMatrix::from_fn(m, m, |p, q| c[(p, q)].min(c[(q, p)]));
    let row_sums = (0..m).map(|i| c_min.row(i).sum()).collect();
    Ok(ProximityBundle {
        co_occurrence: k.map(|v| v as u32),
        c,
        c_min,
        row_sums,
    })
}

/// `D = (Cᵐⁱⁿ X) ⊘ (Cᵐⁱⁿ O)` with the default options.
pub fn density(rca: &RcaMatrix, prox: &ProximityBundle) -> Result<DensityMatrix> {
    density_with(rca, prox, DensityOptions::default())
}

pub fn density_with(
    rca: &RcaMatrix,
    prox: &ProximityBundle,
    opts: DensityOptions,
) -> Result<DensityMatrix> {
    let m = rca.n_products();
    if prox.n_products() != m {
        return Err(Error::DimensionMismatch(format!(
            "proximity covers {} products, RCA matrix {}",
            prox.n_products(),
            m
        )));
    }
    let (weights, sums) = if opts.include_diagonal {
        (prox.c_min.clone(), prox.row_sums.clone())
    } else {
        let mut w = prox.c_min.clone();
        w.fill_diagonal(0.0);
        let s = (0..m).map(|i| w.row(i).sum()).collect();
        (w, s)
    };
    if let Some(i) = sums.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::Singular(format!(
            "proximity row of product `{}` sums to zero",
            rca.products[i]
        )));
    }
    // numerator accumulated in the same order as the row sums, so a fully
    // specialized country gets exactly 1
    let wt = weights.transpose();
    let n = rca.n_countries();
    let mut d = DMatrix::zeros(m, n);
    for j in 0..n {
        let held: Vec<usize> = (0..m).filter(|&k| rca.x[(k, j)] == 1.0).collect();
        for i in 0..m {
            let row = wt.column(i);
            let num: f64 = held.iter().map(|&k| row[k]).sum();
            d[(i, j)] = num / sums[i];
        }
    }
    Ok(DensityMatrix { d })
}

/// Writes a labelled square or rectangular matrix as CSV.
pub fn write_matrix_csv<W: Write>(
    out: W,
    row_labels: &[String],
    col_labels: &[String],
    m: &DMatrix<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![String::new()];
    header.extend(col_labels.iter().cloned());
    w.write_record(&header)?;
    for (i, label) in row_labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend(m.row(i).iter().map(|&v| fmt_g6(v)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
