//! Splitting density into a part explained by diversity and ubiquity and a
//! residual, and carrying that split through the transition logits.
//!
//! The full-sample regression `d_ij = c + δ q_j + ν s_i + r_ij` runs over every
//! product–country cell. Its residual `r` is the related-variety regressor of
//! the three-variable logit; the fitted part is the unrelated component.

use nalgebra::DMatrix;

use crate::econometrics::{
    logit_fit, lr_test, ols_fit, probability_elasticity, signed_mean_elasticity, DesignMatrix,
    FitResult, LogitOptions, LrTest, CONSTANT,
};
use crate::error::{Error, Result};
use crate::product_space::DensityMatrix;
use crate::specialization::{Cell, Event, RcaMatrix, TransitionSet};
use crate::stats::mean;

pub const DENSITY: &str = "density";
pub const DIVERSITY: &str = "diversity";
pub const UBIQUITY: &str = "ubiquity";
pub const RESIDUAL: &str = "residual";

#[derive(Debug, Clone, PartialEq)]
pub struct DensityDecomposition {
    pub c_hat: f64,
    pub delta: f64,
    pub nu: f64,
    /// m×n residual of the full-sample regression.
    pub residuals: DMatrix<f64>,
    pub density: DMatrix<f64>,
    pub diversity: Vec<f64>,
    pub ubiquity: Vec<f64>,
    /// Density on constant, diversity and ubiquity.
    pub source_fit: FitResult,
    pub diversity_only: FitResult,
    pub ubiquity_only: FitResult,
}

impl DensityDecomposition {
    /// `c + δ q_j + ν s_i`
    pub fn unrelated(&self, product: usize, country: usize) -> f64 {
        self.c_hat + self.delta * self.diversity[country] + self.nu * self.ubiquity[product]
    }

    pub fn residual(&self, cell: Cell) -> f64 {
        self.residuals[(cell.product, cell.country)]
    }

    /// R²(both) − R²(diversity) − R²(ubiquity); zero when the regressors are orthogonal.
    pub fn r2_additivity_gap(&self) -> f64 {
        let r2 = |f: &FitResult| f.r_squared.unwrap_or(f64::NAN);
        r2(&self.source_fit) - r2(&self.diversity_only) - r2(&self.ubiquity_only)
    }
}

fn full_sample_design(
    d: &DMatrix<f64>,
    q: &[f64],
    s: &[f64],
    cols: &[&str],
) -> Result<DesignMatrix> {
    let (m, n) = d.shape();
    let y: Vec<f64> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| d[(i, j)]).collect();
    let columns = cols
        .iter()
        .map(|&c| {
            let v: Vec<f64> = (0..m)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| if c == DIVERSITY { q[j] } else { s[i] })
                .collect();
            (c.to_string(), v)
        })
        .collect();
    DesignMatrix::new(y, columns, true)
}

/// Regresses density on diversity and ubiquity over all cells.
pub fn decompose_density(d: &DensityMatrix, rca: &RcaMatrix) -> Result<DensityDecomposition> {
    let (m, n) = rca.x.shape();
    if d.d.shape() != (m, n) {
        return Err(Error::DimensionMismatch(format!(
            "density is {:?}, RCA {:?}",
            d.d.shape(),
            (m, n)
        )));
    }
    let q = rca.diversity_f64();
    let s = rca.ubiquity_f64();
    let both = ols_fit(&full_sample_design(&d.d, &q, &s, &[DIVERSITY, UBIQUITY])?)?;
    let diversity_only = ols_fit(&full_sample_design(&d.d, &q, &s, &[DIVERSITY])?)?;
    let ubiquity_only = ols_fit(&full_sample_design(&d.d, &q, &s, &[UBIQUITY])?)?;

    let residuals = DMatrix::from_fn(m, n, |i, j| both.residuals[i * n + j]);
    Ok(DensityDecomposition {
        c_hat: both.coef(CONSTANT).expect("constant"),
        delta: both.coef(DIVERSITY).expect("diversity"),
        nu: both.coef(UBIQUITY).expect("ubiquity"),
        residuals,
        density: d.d.clone(),
        diversity: q,
        ubiquity: s,
        source_fit: both,
        diversity_only,
        ubiquity_only,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelTag {
    /// Constant and density.
    DensityOnly,
    /// Constant, diversity, ubiquity and residual.
    ThreeVariable,
}

impl ModelTag {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            ModelTag::DensityOnly => &[CONSTANT, DENSITY],
            ModelTag::ThreeVariable => &[CONSTANT, DIVERSITY, UBIQUITY, RESIDUAL],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelTag::DensityOnly => "density",
            ModelTag::ThreeVariable => "three_variable",
        }
    }
}

/// Logit design for `event` on the at-risk sample of `t`.
pub fn transition_design(
    t: &TransitionSet,
    dec: &DensityDecomposition,
    event: Event,
    tag: ModelTag,
) -> Result<(Vec<Cell>, DesignMatrix)> {
    let (cells, realized) = t.sample(event);
    design_for_cells(cells, realized, dec, tag)
}

fn design_for_cells(
    cells: &[Cell],
    realized: &[bool],
    dec: &DensityDecomposition,
    tag: ModelTag,
) -> Result<(Vec<Cell>, DesignMatrix)> {
    if dec.residuals.shape() != (dec.ubiquity.len(), dec.diversity.len()) {
        return Err(Error::DimensionMismatch("decomposition is inconsistent".into()));
    }
    let y: Vec<f64> = realized.iter().map(|&r| r as u8 as f64).collect();
    let col = |name: &str| -> (String, Vec<f64>) {
        let v = cells
            .iter()
            .map(|c| match name {
                DENSITY => dec.density[(c.product, c.country)],
                DIVERSITY => dec.diversity[c.country],
                UBIQUITY => dec.ubiquity[c.product],
                _ => dec.residuals[(c.product, c.country)],
            })
            .collect();
        (name.to_string(), v)
    };
    let cols = tag.columns()[1..].iter().map(|n| col(n)).collect();
    Ok((cells.to_vec(), DesignMatrix::new(y, cols, true)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModels {
    pub event: Event,
    pub cells: Vec<Cell>,
    pub realized: Vec<bool>,
    pub fit_density: FitResult,
    pub fit_three: FitResult,
    /// Test of the restrictions that collapse the three-variable model to density only.
    pub lr: LrTest,
}

/// Density-only and three-variable logits on the same at-risk sample.
pub fn fit_transition_models(
    t: &TransitionSet,
    dec: &DensityDecomposition,
    event: Event,
    opts: LogitOptions,
) -> Result<TransitionModels> {
    let (cells, d1) = transition_design(t, dec, event, ModelTag::DensityOnly)?;
    let (_, d2) = transition_design(t, dec, event, ModelTag::ThreeVariable)?;
    let fit_density = logit_fit(&d1, opts)?;
    let fit_three = logit_fit(&d2, opts)?;
    let lr = lr_test(&fit_density, &fit_three)?;
    Ok(TransitionModels {
        event,
        realized: t.sample(event).1.to_vec(),
        cells,
        fit_density,
        fit_three,
        lr,
    })
}

/// Three-variable coefficients implied by the density-only fit:
/// `(β0 + β1 c, β1 δ, β1 ν, β1)`.
pub fn implied_three_variable_coefficients(
    fit_density: &FitResult,
    dec: &DensityDecomposition,
) -> Result<[f64; 4]> {
    check_tag(fit_density, ModelTag::DensityOnly)?;
    let b0 = fit_density.coefficients[0];
    let b1 = fit_density.coefficients[1];
    Ok([b0 + b1 * dec.c_hat, b1 * dec.delta, b1 * dec.nu, b1])
}

fn check_tag(fit: &FitResult, tag: ModelTag) -> Result<()> {
    let expected = tag.columns();
    if fit.names.len() != expected.len() || fit.names.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(Error::Input(format!(
            "fit columns {:?} do not match model {}",
            fit.names,
            tag.name()
        )));
    }
    Ok(())
}

/// Per-observation log-odds and its four additive parts.
#[derive(Debug, Clone, PartialEq)]
pub struct LorDecomposition {
    pub model: ModelTag,
    pub cells: Vec<Cell>,
    /// `βQ` evaluated directly on the model's own regressors.
    pub lor: Vec<f64>,
    pub constant_part: Vec<f64>,
    pub diversity_part: Vec<f64>,
    pub ubiquity_part: Vec<f64>,
    pub residual_part: Vec<f64>,
    /// Multiplier on ubiquity (`β1 ν` or `β4`).
    pub ubiquity_coef: f64,
    /// Multiplier on the residual (`β1` or `β5`).
    pub residual_coef: f64,
}

pub fn lor_decompose(
    fit: &FitResult,
    dec: &DensityDecomposition,
    cells: &[Cell],
    tag: ModelTag,
) -> Result<LorDecomposition> {
    check_tag(fit, tag)?;
    let b = &fit.coefficients;
    let len = cells.len();
    let mut out = LorDecomposition {
        model: tag,
        cells: cells.to_vec(),
        lor: Vec::with_capacity(len),
        constant_part: Vec::with_capacity(len),
        diversity_part: Vec::with_capacity(len),
        ubiquity_part: Vec::with_capacity(len),
        residual_part: Vec::with_capacity(len),
        ubiquity_coef: 0.0,
        residual_coef: 0.0,
    };
    let (konst, cq, cs, cr) = match tag {
        ModelTag::DensityOnly => (b[0] + b[1] * dec.c_hat, b[1] * dec.delta, b[1] * dec.nu, b[1]),
        ModelTag::ThreeVariable => (b[0], b[1], b[2], b[3]),
    };
    out.ubiquity_coef = cs;
    out.residual_coef = cr;
    for &c in cells {
        let q = dec.diversity[c.country];
        let s = dec.ubiquity[c.product];
        let r = dec.residual(c);
        out.lor.push(match tag {
            ModelTag::DensityOnly => b[0] + b[1] * dec.density[(c.product, c.country)],
            ModelTag::ThreeVariable => b[0] + b[1] * q + b[2] * s + b[3] * r,
        });
        out.constant_part.push(konst);
        out.diversity_part.push(cq * q);
        out.ubiquity_part.push(cs * s);
        out.residual_part.push(cr * r);
    }
    Ok(out)
}

impl LorDecomposition {
    pub fn parts_sum(&self, k: usize) -> f64 {
        self.constant_part[k] + self.diversity_part[k] + self.ubiquity_part[k] + self.residual_part[k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessBonus {
    /// `ubiquity_part + residual_part`: the constant and diversity terms cancel
    /// within a country.
    pub b: f64,
    /// Mean LOR of realized minus non-realized observations, computed directly.
    pub b_direct: f64,
    pub ubiquity_part: f64,
    pub residual_part: f64,
    pub lor_plus: f64,
    pub lor_minus: f64,
    pub ubiquity_gap: f64,
    pub residual_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountryBonus {
    pub country: String,
    pub diversity: f64,
    pub n_success: usize,
    pub n_failure: usize,
    /// Missing when either group is empty.
    pub bonus: Option<SuccessBonus>,
}

fn realized_for<'a>(lor: &LorDecomposition, t: &'a TransitionSet, event: Event) -> Result<&'a [bool]> {
    let (cells, realized) = t.sample(event);
    if cells != lor.cells.as_slice() {
        return Err(Error::Input(format!(
            "LOR decomposition does not cover the at-risk {} sample",
            event.name()
        )));
    }
    Ok(realized)
}

/// Per-country success bonus split into ubiquity and residual parts.
pub fn success_bonus(
    lor: &LorDecomposition,
    dec: &DensityDecomposition,
    t: &TransitionSet,
    event: Event,
) -> Result<Vec<CountryBonus>> {
    let realized = realized_for(lor, t, event)?;
    let n = t.n_countries();
    #[derive(Default, Clone)]
    struct Groups {
        lor: [Vec<f64>; 2],
        s: [Vec<f64>; 2],
        r: [Vec<f64>; 2],
    }
    let mut by_country = vec![Groups::default(); n];
    for (k, (&c, &hit)) in lor.cells.iter().zip(realized).enumerate() {
        let g = &mut by_country[c.country];
        let side = hit as usize;
        g.lor[side].push(lor.lor[k]);
        g.s[side].push(dec.ubiquity[c.product]);
        g.r[side].push(dec.residual(c));
    }
    Ok((0..n)
        .filter(|&j| t.included_countries[j])
        .map(|j| {
            let g = &by_country[j];
            let bonus = (|| {
                let lor_plus = mean(&g.lor[1])?;
                let lor_minus = mean(&g.lor[0])?;
                let ubiquity_gap = mean(&g.s[1])? - mean(&g.s[0])?;
                let residual_gap = mean(&g.r[1])? - mean(&g.r[0])?;
                let ubiquity_part = lor.ubiquity_coef * ubiquity_gap;
                let residual_part = lor.residual_coef * residual_gap;
                Some(SuccessBonus {
                    b: ubiquity_part + residual_part,
                    b_direct: lor_plus - lor_minus,
                    ubiquity_part,
                    residual_part,
                    lor_plus,
                    lor_minus,
                    ubiquity_gap,
                    residual_gap,
                })
            })();
            CountryBonus {
                country: t.countries[j].clone(),
                diversity: dec.diversity[j],
                n_success: g.lor[1].len(),
                n_failure: g.lor[0].len(),
                bonus,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopKConfusion {
    pub n: usize,
    pub realized: usize,
    /// Size of the predicted-positive slice; equals `realized`.
    pub top: usize,
    pub correct_positives: usize,
    pub correct_negatives: usize,
    /// Correct positives as a share of the top slice.
    pub correct_positive_share: Option<f64>,
    /// Correct negatives as a share of the bottom slice.
    pub correct_negative_share: Option<f64>,
}

/// Ranks scores descending, input order breaking ties, and takes the top
/// slice as large as the number of realized events.
pub fn rank_confusion(scores: &[f64], realized: &[bool]) -> Result<TopKConfusion> {
    if scores.len() != realized.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} outcomes",
            scores.len(),
            realized.len()
        )));
    }
    let n = scores.len();
    let k = realized.iter().filter(|&&r| r).count();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let correct_positives = order[..k].iter().filter(|&&i| realized[i]).count();
    let correct_negatives = order[k..].iter().filter(|&&i| !realized[i]).count();
    Ok(TopKConfusion {
        n,
        realized: k,
        top: k,
        correct_positives,
        correct_negatives,
        correct_positive_share: (k > 0).then(|| correct_positives as f64 / k as f64),
        correct_negative_share: (k < n).then(|| correct_negatives as f64 / (n - k) as f64),
    })
}

/// Top-slice confusion on the at-risk sample, ties broken by product then country code.
pub fn topk_confusion(lor: &LorDecomposition, t: &TransitionSet, event: Event) -> Result<TopKConfusion> {
    let realized = realized_for(lor, t, event)?;
    // cells are in (product, country) index order, which is code order
    rank_confusion(&lor.lor, realized)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountryFit {
    pub pseudo_r2: f64,
    pub beta_ubiquity: f64,
    pub beta_residual: f64,
    /// Mean elasticity of the fitted probability w.r.t. ubiquity.
    pub elasticity_ubiquity: f64,
    /// Mean elasticity w.r.t. the residual, sign-adjusted to follow its coefficient.
    pub elasticity_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountryModel {
    pub country: String,
    pub diversity: f64,
    pub n: usize,
    pub n_realized: usize,
    pub outcome: std::result::Result<CountryFit, String>,
}

/// Logit of the event on ubiquity and residual, one country at a time.
pub fn per_country_models(
    t: &TransitionSet,
    dec: &DensityDecomposition,
    event: Event,
    opts: LogitOptions,
) -> Vec<CountryModel> {
    let (cells, realized) = t.sample(event);
    let n = t.n_countries();
    let mut buckets: Vec<(Vec<Cell>, Vec<bool>)> = vec![(Vec::new(), Vec::new()); n];
    for (&c, &r) in cells.iter().zip(realized) {
        buckets[c.country].0.push(c);
        buckets[c.country].1.push(r);
    }
    (0..n)
        .filter(|&j| t.included_countries[j])
        .map(|j| {
            let (cells, realized) = &buckets[j];
            let n_realized = realized.iter().filter(|&&r| r).count();
            CountryModel {
                country: t.countries[j].clone(),
                diversity: dec.diversity[j],
                n: cells.len(),
                n_realized,
                outcome: country_fit(cells, realized, dec, opts),
            }
        })
        .collect()
}

fn country_fit(
    cells: &[Cell],
    realized: &[bool],
    dec: &DensityDecomposition,
    opts: LogitOptions,
) -> std::result::Result<CountryFit, String> {
    if cells.is_empty() {
        return Err("no_observations".into());
    }
    let hits = realized.iter().filter(|&&r| r).count();
    if hits == 0 || hits == cells.len() {
        return Err("one_class".into());
    }
    let y: Vec<f64> = realized.iter().map(|&r| r as u8 as f64).collect();
    let s: Vec<f64> = cells.iter().map(|c| dec.ubiquity[c.product]).collect();
    let r: Vec<f64> = cells.iter().map(|&c| dec.residual(c)).collect();
    let design = DesignMatrix::new(
        y,
        vec![(UBIQUITY.to_string(), s.clone()), (RESIDUAL.to_string(), r.clone())],
        true,
    )
    .map_err(|e| format!("failed: {e}"))?;
    let fit = logit_fit(&design, opts).map_err(|e| match e {
        Error::Separation(_) => "separation".to_string(),
        Error::RankDeficient { .. } => "rank_deficient".to_string(),
        Error::Input(_) => "too_few_observations".to_string(),
        other => format!("failed: {other}"),
    })?;
    if !fit.converged {
        return Err("not_converged".into());
    }
    let e_s = probability_elasticity(&fit, &design, UBIQUITY).map_err(|e| e.to_string())?;
    let e_r = probability_elasticity(&fit, &design, RESIDUAL).map_err(|e| e.to_string())?;
    Ok(CountryFit {
        pseudo_r2: fit.pseudo_r_squared.unwrap_or(f64::NAN),
        beta_ubiquity: fit.coef(UBIQUITY).expect("column"),
        beta_residual: fit.coef(RESIDUAL).expect("column"),
        elasticity_ubiquity: signed_mean_elasticity(&e_s, &s).unwrap_or(f64::NAN),
        elasticity_residual: signed_mean_elasticity(&e_r, &r).unwrap_or(f64::NAN),
        converged: fit.converged,
    })
}
