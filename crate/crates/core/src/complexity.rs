//! Country and product complexity, and the complexity outlook indicators.
//!
//! ECI is the eigenvector for the second-largest eigenvalue of the
//! row-stochastic country matrix `M̃ = Q⁻¹XᵀS⁻¹X`. It is computed through
//! the symmetric similar matrix `A = ZᵀZ` with `Z = S^{-1/2} X Q^{-1/2}`;
//! the product-side eigenvector then follows from the left singular vector
//! `Z u / σ`, which is the matching eigenvector of the product matrix
//! `S⁻¹XQ⁻¹Xᵀ` up to the `S^{-1/2}` similarity.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::product_space::DensityMatrix;
use crate::econometrics::{ols_fit, DesignMatrix, FitResult};
use crate::error::{Error, Result};
use crate::specialization::RcaMatrix;
use crate::stats::{correlation, mean, standardize};

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityScores {
    /// Standardized product complexity (mean 0, population sd 1).
    pub pci: Vec<f64>,
    /// Standardized country complexity.
    pub eci: Vec<f64>,
    /// Sign-fixed eigenvector entries before standardization.
    pub pci_raw: Vec<f64>,
    pub eci_raw: Vec<f64>,
    /// Eigenvalue paired with the complexity eigenvector.
    pub eigenvalue: f64,
    /// Gap between the leading (unit) eigenvalue and `eigenvalue`.
    pub spectral_gap: f64,
}

/// Connected components of the bipartite product–country graph, as country index lists.
pub fn country_components(rca: &RcaMatrix) -> Vec<Vec<usize>> {
    let (m, n) = rca.x.shape();
    // nodes 0..n are countries, n..n+m products
    let mut parent: Vec<usize> = (0..n + m).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    for i in 0..m {
        for j in 0..n {
            if rca.has(i, j) {
                let (a, b) = (find(&mut parent, j), find(&mut parent, n + i));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for j in 0..n {
        let root = find(&mut parent, j);
        groups.entry(root).or_default().push(j);
    }
    groups.into_values().collect()
}

pub fn complexity_scores(rca: &RcaMatrix) -> Result<ComplexityScores> {
    let (m, n) = rca.x.shape();
    if let Some(j) = rca.diversity.iter().position(|&q| q == 0) {
        return Err(Error::Singular(format!(
            "country `{}` has zero diversity",
            rca.countries[j]
        )));
    }
    if let Some(i) = rca.ubiquity.iter().position(|&s| s == 0) {
        return Err(Error::Singular(format!(
            "product `{}` has zero ubiquity",
            rca.products[i]
        )));
    }
    if n < 2 {
        return Err(Error::Degenerate("complexity needs at least two countries".into()));
    }
    let comps = country_components(rca);
    if comps.len() > 1 {
        let listed: Vec<String> = comps
            .iter()
            .map(|c| {
                let names: Vec<&str> = c.iter().map(|&j| rca.countries[j].as_str()).collect();
                format!("[{}]", names.join(" "))
            })
            .collect();
        return Err(Error::Degenerate(format!(
            "RCA graph splits into {} components, second eigenvector is ambiguous: {}",
            comps.len(),
            listed.join(", ")
        )));
    }

    let q: Vec<f64> = rca.diversity_f64();
    let s: Vec<f64> = rca.ubiquity_f64();
    let z = DMatrix::from_fn(m, n, |i, j| rca.x[(i, j)] / (s[i] * q[j]).sqrt());
    let a = z.transpose() * &z;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&u, &v| eig.eigenvalues[v].total_cmp(&eig.eigenvalues[u]));
    let (l1, l2) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    let gap = l1 - l2;
    if gap <= 1e-10 || l2 <= 1e-12 {
        return Err(Error::Degenerate(format!(
            "second eigenvalue {l2:.3e} is not separated (leading {l1:.3e})"
        )));
    }
    if n > 2 && l2 - eig.eigenvalues[order[2]] <= 1e-10 {
        return Err(Error::Degenerate(format!(
            "second eigenvalue {l2:.3e} is repeated, its eigenvector is not unique"
        )));
    }
    let u: DVector<f64> = eig.eigenvectors.column(order[1]).into_owned();

    let mut eci_raw: Vec<f64> = (0..n).map(|j| u[j] / q[j].sqrt()).collect();
    let w = (&z * &u) / l2.sqrt();
    let mut pci_raw: Vec<f64> = (0..m).map(|i| w[i] / s[i].sqrt()).collect();

    if correlation(&eci_raw, &q).unwrap_or(0.0) < 0.0 {
        eci_raw.iter_mut().for_each(|v| *v = -*v);
    }
    // orient products by the mean complexity of the countries exporting them
    let exporter_mean: Vec<f64> = (0..m)
        .map(|i| {
            let vals: Vec<f64> = (0..n).filter(|&j| rca.has(i, j)).map(|j| eci_raw[j]).collect();
            mean(&vals).unwrap_or(0.0)
        })
        .collect();
    if correlation(&pci_raw, &exporter_mean).unwrap_or(0.0) < 0.0 {
        pci_raw.iter_mut().for_each(|v| *v = -*v);
    }

    let eci = standardize(&eci_raw)
        .ok_or_else(|| Error::Degenerate("country complexity has zero variance".into()))?;
    let pci = standardize(&pci_raw)
        .ok_or_else(|| Error::Degenerate("product complexity has zero variance".into()))?;
    Ok(ComplexityScores {
        pci,
        eci,
        pci_raw,
        eci_raw,
        eigenvalue: l2,
        spectral_gap: gap,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlookIndicators {
    /// Σ_i d_ij (1 − x_ij) Γ_i
    pub ecoi: Vec<f64>,
    /// Σ_i (1 − d_ij) x_ij Γ_i
    pub ecoi_bar: Vec<f64>,
    /// `ecoi − ecoi_bar`
    pub ecoi_net: Vec<f64>,
    /// Mean ubiquity over products where the country has no RCA.
    pub mean_ubiquity_rca0: Vec<Option<f64>>,
    /// Mean ubiquity over products where it has RCA.
    pub mean_ubiquity_rca1: Vec<Option<f64>>,
}

pub fn ecoi(rca: &RcaMatrix, d: &DensityMatrix, pci: &[f64]) -> Result<OutlookIndicators> {
    let (m, n) = rca.x.shape();
    if d.d.shape() != (m, n) || pci.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "RCA {}x{}, density {}x{}, complexity length {}",
            m,
            n,
            d.d.nrows(),
            d.d.ncols(),
            pci.len()
        )));
    }
    let gamma = DVector::from_column_slice(pci);
    let gain_w = d.d.zip_map(&rca.x, |dv, x| dv * (1.0 - x));
    let loss_w = d.d.zip_map(&rca.x, |dv, x| (1.0 - dv) * x);
    let ecoi: Vec<f64> = (gain_w.transpose() * &gamma).iter().copied().collect();
    let ecoi_bar: Vec<f64> = (loss_w.transpose() * &gamma).iter().copied().collect();
    let ecoi_net = ecoi.iter().zip(&ecoi_bar).map(|(a, b)| a - b).collect();

    let s = rca.ubiquity_f64();
    let split_mean = |j: usize, want: bool| {
        let vals: Vec<f64> = (0..m).filter(|&i| rca.has(i, j) == want).map(|i| s[i]).collect();
        mean(&vals)
    };
    Ok(OutlookIndicators {
        ecoi,
        ecoi_bar,
        ecoi_net,
        mean_ubiquity_rca0: (0..n).map(|j| split_mean(j, false)).collect(),
        mean_ubiquity_rca1: (0..n).map(|j| split_mean(j, true)).collect(),
    })
}

/// One column of the outlook regression table.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlookRegression {
    pub label: &'static str,
    pub dependent: &'static str,
    pub fit: FitResult,
    /// Countries used after dropping rows with an undefined regressor.
    pub countries_used: usize,
}

pub const DIVERSITY: &str = "diversity";
pub const UBIQUITY: &str = "ubiquity";
pub const UBIQUITY_STAR: &str = "ubiquity_star";

/// Six OLS specifications of ECOI and ECOI-bar on diversity and mean ubiquity.
///
/// `ubiquity` averages over products without RCA, `ubiquity_star` over
/// products with RCA.
pub fn outlook_regressions(out: &OutlookIndicators, diversity: &[f64]) -> Result<Vec<OutlookRegression>> {
    let n = diversity.len();
    if out.ecoi.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} outlook values for {} countries",
            out.ecoi.len(),
            n
        )));
    }
    type Spec = (&'static str, &'static str, &'static [&'static str]);
    const SPECS: [Spec; 6] = [
        ("(1)", "ecoi", &[DIVERSITY]),
        ("(2)", "ecoi", &[UBIQUITY]),
        ("(3)", "ecoi", &[DIVERSITY, UBIQUITY]),
        ("(4)", "ecoi_bar", &[DIVERSITY]),
        ("(5)", "ecoi_bar", &[UBIQUITY, UBIQUITY_STAR]),
        ("(6)", "ecoi_bar", &[DIVERSITY, UBIQUITY, UBIQUITY_STAR]),
    ];

    let mut result = Vec::with_capacity(SPECS.len());
    for (label, dep, regs) in SPECS {
        let rows: Vec<usize> = (0..n)
            .filter(|&j| {
                regs.iter().all(|r| match *r {
                    UBIQUITY => out.mean_ubiquity_rca0[j].is_some(),
                    UBIQUITY_STAR => out.mean_ubiquity_rca1[j].is_some(),
                    _ => true,
                })
            })
            .collect();
        if rows.len() < regs.len() + 2 {
            return Err(Error::Input(format!(
                "outlook regression {label} has {} usable countries for {} regressors",
                rows.len(),
                regs.len()
            )));
        }
        let yvec = if dep == "ecoi" { &out.ecoi } else { &out.ecoi_bar };
        let y = rows.iter().map(|&j| yvec[j]).collect();
        let cols = regs
            .iter()
            .map(|r| {
                let col = rows
                    .iter()
                    .map(|&j| match *r {
                        UBIQUITY => out.mean_ubiquity_rca0[j].expect("filtered"),
                        UBIQUITY_STAR => out.mean_ubiquity_rca1[j].expect("filtered"),
                        _ => diversity[j],
                    })
                    .collect();
                (r.to_string(), col)
            })
            .collect();
        let design = DesignMatrix::new(y, cols, true)?;
        result.push(OutlookRegression {
            label,
            dependent: dep,
            fit: ols_fit(&design)?,
            countries_used: rows.len(),
        });
    }
    Ok(result)
}
