//! Binary revealed comparative advantage and specialization transitions.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::ExportPanel;
use crate::stats::mean;

/// Binary RCA indicator for one year, products in rows and countries in columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RcaMatrix {
    pub year: i32,
    pub products: Vec<String>,
    pub countries: Vec<String>,
    /// Entries are exactly 0.0 or 1.0.
    pub x: DMatrix<f64>,
    /// Column sums q_j.
    pub diversity: Vec<usize>,
    /// Row sums s_i.
    pub ubiquity: Vec<usize>,
    /// Products with positive world exports this year.
    pub active_products: Vec<bool>,
    /// Countries with positive total exports this year.
    pub active_countries: Vec<bool>,
}

impl RcaMatrix {
    /// Wraps a ready-made 0/1 matrix; every product and country counts as active.
    pub fn from_indicator(
        year: i32,
        products: Vec<String>,
        countries: Vec<String>,
        x: DMatrix<f64>,
    ) -> Result<Self> {
        if x.nrows() != products.len() || x.ncols() != countries.len() {
            return Err(Error::DimensionMismatch(format!(
                "indicator is {}x{} but labels are {}x{}",
                x.nrows(),
                x.ncols(),
                products.len(),
                countries.len()
            )));
        }
        if let Some(v) = x.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::Input(format!("RCA indicator entries must be 0 or 1, got {v}")));
        }
        let (m, n) = x.shape();
        let mut rca = RcaMatrix {
            year,
            products,
            countries,
            x,
            diversity: Vec::new(),
            ubiquity: Vec::new(),
            active_products: vec![true; m],
            active_countries: vec![true; n],
        };
        rca.recount();
        Ok(rca)
    }

    /// Indicator with generated labels `P0000..` and `C0000..`, sorted like their indices.
    pub fn unlabeled(year: i32, x: DMatrix<f64>) -> Result<Self> {
        let (m, n) = x.shape();
        Self::from_indicator(year, product_labels(m), country_labels(n), x)
    }

    fn recount(&mut self) {
        let (m, n) = self.x.shape();
        self.diversity = (0..n)
            .map(|j| self.x.column(j).iter().filter(|&&v| v == 1.0).count())
            .collect();
        self.ubiquity = (0..m)
            .map(|i| self.x.row(i).iter().filter(|&&v| v == 1.0).count())
            .collect();
    }

    pub fn n_products(&self) -> usize {
        self.products.len()
    }

    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    #[inline]
    pub fn has(&self, product: usize, country: usize) -> bool {
        self.x[(product, country)] == 1.0
    }

    pub fn diversity_f64(&self) -> Vec<f64> {
        self.diversity.iter().map(|&q| q as f64).collect()
    }

    pub fn ubiquity_f64(&self) -> Vec<f64> {
        self.ubiquity.iter().map(|&s| s as f64).collect()
    }

    /// Total number of specializations.
    pub fn count(&self) -> usize {
        self.diversity.iter().sum()
    }

    /// Sub-matrix on the given product and country indices. RCA values are
    /// kept as computed on the full panel.
    pub fn select(&self, products: &[usize], countries: &[usize]) -> RcaMatrix {
        let mut rca = RcaMatrix {
            year: self.year,
            products: products.iter().map(|&i| self.products[i].clone()).collect(),
            countries: countries.iter().map(|&j| self.countries[j].clone()).collect(),
            x: DMatrix::from_fn(products.len(), countries.len(), |a, b| self.x[(products[a], countries[b])]),
            diversity: Vec::new(),
            ubiquity: Vec::new(),
            active_products: products.iter().map(|&i| self.active_products[i]).collect(),
            active_countries: countries.iter().map(|&j| self.active_countries[j]).collect(),
        };
        rca.recount();
        rca
    }

    fn same_layout(&self, other: &RcaMatrix) -> Result<()> {
        if self.x.shape() != other.x.shape() {
            return Err(Error::DimensionMismatch(format!(
                "RCA matrices are {:?} and {:?}",
                self.x.shape(),
                other.x.shape()
            )));
        }
        if self.products != other.products || self.countries != other.countries {
            return Err(Error::DimensionMismatch(
                "RCA matrices use different product/country orderings".into(),
            ));
        }
        Ok(())
    }
}

pub fn product_labels(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("P{i:04}")).collect()
}

pub fn country_labels(n: usize) -> Vec<String> {
    (0..n).map(|j| format!("C{j:04}")).collect()
}

/// x_ij = 1 iff (E_ij/E_j)/(E_i/E) ≥ threshold.
///
/// Products or countries with zero totals in `year` get an all-zero row or
/// column and are marked inactive.
pub fn compute_rca(panel: &ExportPanel, year: i32, threshold: f64) -> Result<RcaMatrix> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::Input(format!("RCA threshold must be positive, got {threshold}")));
    }
    let e = panel.values_for(year)?;
    let world: f64 = e.sum();
    if world <= 0.0 {
        return Err(Error::Input(format!("world export total for {year} is zero")));
    }
    let (m, n) = e.shape();
    let product_tot: Vec<f64> = (0..m).map(|i| e.row(i).sum()).collect();
    let country_tot: Vec<f64> = (0..n).map(|j| e.column(j).sum()).collect();

    let x = DMatrix::from_fn(m, n, |i, j| {
        if product_tot[i] <= 0.0 || country_tot[j] <= 0.0 {
            return 0.0;
        }
        let ratio = (e[(i, j)] / country_tot[j]) / (product_tot[i] / world);
        if ratio >= threshold {
            1.0
        } else {
            0.0
        }
    });
    let mut rca = RcaMatrix {
        year,
        products: panel.products.clone(),
        countries: panel.countries.clone(),
        x,
        diversity: Vec::new(),
        ubiquity: Vec::new(),
        active_products: product_tot.iter().map(|&t| t > 0.0).collect(),
        active_countries: country_tot.iter().map(|&t| t > 0.0).collect(),
    };
    rca.recount();
    Ok(rca)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Cell {
    pub product: usize,
    pub country: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Event {
    Gain,
    Loss,
}

impl Event {
    pub fn name(self) -> &'static str {
        match self {
            Event::Gain => "gains",
            Event::Loss => "losses",
        }
    }
}

/// Gains, losses and the cells at risk of each between two years.
///
/// Cells are kept in (product, country) index order. Only products and
/// countries active in both years take part.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSet {
    pub products: Vec<String>,
    pub countries: Vec<String>,
    pub included_products: Vec<bool>,
    pub included_countries: Vec<bool>,
    pub at_risk_gain: Vec<Cell>,
    /// Aligned with `at_risk_gain`.
    pub gain_realized: Vec<bool>,
    pub at_risk_loss: Vec<Cell>,
    /// Aligned with `at_risk_loss`.
    pub loss_realized: Vec<bool>,
}

impl TransitionSet {
    pub fn gains(&self) -> Vec<Cell> {
        realized(&self.at_risk_gain, &self.gain_realized)
    }

    pub fn losses(&self) -> Vec<Cell> {
        realized(&self.at_risk_loss, &self.loss_realized)
    }

    pub fn n_gains(&self) -> usize {
        self.gain_realized.iter().filter(|&&r| r).count()
    }

    pub fn n_losses(&self) -> usize {
        self.loss_realized.iter().filter(|&&r| r).count()
    }

    /// At-risk cells for `event` and whether each one was realized.
    pub fn sample(&self, event: Event) -> (&[Cell], &[bool]) {
        match event {
            Event::Gain => (&self.at_risk_gain, &self.gain_realized),
            Event::Loss => (&self.at_risk_loss, &self.loss_realized),
        }
    }

    pub fn n_products(&self) -> usize {
        self.products.len()
    }

    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    /// Countries excluded because they are inactive in one of the years.
    pub fn excluded_countries(&self) -> Vec<&str> {
        self.countries
            .iter()
            .zip(&self.included_countries)
            .filter(|(_, &inc)| !inc)
            .map(|(c, _)| c.as_str())
            .collect()
    }

    pub fn excluded_products(&self) -> Vec<&str> {
        self.products
            .iter()
            .zip(&self.included_products)
            .filter(|(_, &inc)| !inc)
            .map(|(p, _)| p.as_str())
            .collect()
    }
}

fn realized(cells: &[Cell], flags: &[bool]) -> Vec<Cell> {
    cells
        .iter()
        .zip(flags)
        .filter(|(_, &r)| r)
        .map(|(c, _)| *c)
        .collect()
}

pub fn transitions(rca_t0: &RcaMatrix, rca_t1: &RcaMatrix) -> Result<TransitionSet> {
    rca_t0.same_layout(rca_t1)?;
    let (m, n) = rca_t0.x.shape();
    let included_products: Vec<bool> = (0..m)
        .map(|i| rca_t0.active_products[i] && rca_t1.active_products[i])
        .collect();
    let included_countries: Vec<bool> = (0..n)
        .map(|j| rca_t0.active_countries[j] && rca_t1.active_countries[j])
        .collect();

    let mut set = TransitionSet {
        products: rca_t0.products.clone(),
        countries: rca_t0.countries.clone(),
        included_products,
        included_countries,
        at_risk_gain: Vec::new(),
        gain_realized: Vec::new(),
        at_risk_loss: Vec::new(),
        loss_realized: Vec::new(),
    };
    for i in (0..m).filter(|&i| set.included_products[i]) {
        for j in (0..n).filter(|&j| set.included_countries[j]) {
            let cell = Cell { product: i, country: j };
            let after = rca_t1.has(i, j);
            if rca_t0.has(i, j) {
                set.at_risk_loss.push(cell);
                set.loss_realized.push(!after);
            } else {
                set.at_risk_gain.push(cell);
                set.gain_realized.push(after);
            }
        }
    }
    Ok(set)
}

/// (gain rate, loss rate) over the at-risk cells.
pub fn transition_rates(t: &TransitionSet) -> Result<(f64, f64)> {
    if t.at_risk_gain.is_empty() || t.at_risk_loss.is_empty() {
        return Err(Error::Degenerate(format!(
            "empty at-risk set ({} gain cells, {} loss cells)",
            t.at_risk_gain.len(),
            t.at_risk_loss.len()
        )));
    }
    Ok((
        t.n_gains() as f64 / t.at_risk_gain.len() as f64,
        t.n_losses() as f64 / t.at_risk_loss.len() as f64,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountryTransitionStats {
    pub country: String,
    pub diversity: usize,
    pub at_risk_gain: usize,
    pub n_gains: usize,
    pub p_gain: Option<f64>,
    pub at_risk_loss: usize,
    pub n_losses: usize,
    pub p_loss: Option<f64>,
}

/// Per-country counts and probabilities of gains and losses.
pub fn per_country_transition_stats(
    t: &TransitionSet,
    rca_t0: &RcaMatrix,
) -> Vec<CountryTransitionStats> {
    let n = t.n_countries();
    let tally = |cells: &[Cell], flags: &[bool]| {
        let mut at_risk = vec![0usize; n];
        let mut hits = vec![0usize; n];
        for (c, &r) in cells.iter().zip(flags) {
            at_risk[c.country] += 1;
            hits[c.country] += r as usize;
        }
        (at_risk, hits)
    };
    let (gr, gh) = tally(&t.at_risk_gain, &t.gain_realized);
    let (lr, lh) = tally(&t.at_risk_loss, &t.loss_realized);
    let ratio = |h: usize, r: usize| (r > 0).then(|| h as f64 / r as f64);

    (0..n)
        .filter(|&j| t.included_countries[j])
        .map(|j| CountryTransitionStats {
            country: t.countries[j].clone(),
            diversity: rca_t0.diversity[j],
            at_risk_gain: gr[j],
            n_gains: gh[j],
            p_gain: ratio(gh[j], gr[j]),
            at_risk_loss: lr[j],
            n_losses: lh[j],
            p_loss: ratio(lh[j], lr[j]),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UbiquityGap {
    pub country: String,
    pub diversity: usize,
    /// Mean ubiquity of realized gains minus that of non-realized gains.
    pub gain_gap: Option<f64>,
    pub loss_gap: Option<f64>,
}

/// Difference in mean t0 ubiquity between realized and non-realized transitions.
pub fn ubiquity_gap(t: &TransitionSet, rca_t0: &RcaMatrix) -> Vec<UbiquityGap> {
    let n = t.n_countries();
    let gaps = |cells: &[Cell], flags: &[bool]| {
        let mut hit: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut miss: Vec<Vec<f64>> = vec![Vec::new(); n];
        for (c, &r) in cells.iter().zip(flags) {
            let s = rca_t0.ubiquity[c.product] as f64;
            if r {
                hit[c.country].push(s);
            } else {
                miss[c.country].push(s);
            }
        }
        (0..n)
            .map(|j| Some(mean(&hit[j])? - mean(&miss[j])?))
            .collect::<Vec<_>>()
    };
    let g = gaps(&t.at_risk_gain, &t.gain_realized);
    let l = gaps(&t.at_risk_loss, &t.loss_realized);
    (0..n)
        .filter(|&j| t.included_countries[j])
        .map(|j| UbiquityGap {
            country: t.countries[j].clone(),
            diversity: rca_t0.diversity[j],
            gain_gap: g[j],
            loss_gap: l[j],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityTransition {
    pub country: String,
    pub eci: f64,
    pub mean_pci_gained: Option<f64>,
    pub mean_pci_lost: Option<f64>,
}

impl ComplexityTransition {
    /// Lost specializations were on average more complex than gained ones.
    pub fn above_diagonal(&self) -> Option<bool> {
        Some(self.mean_pci_lost? > self.mean_pci_gained?)
    }
}

/// Mean product complexity of gained and lost specializations per country.
pub fn transition_complexity_summary(
    t: &TransitionSet,
    pci: &[f64],
    eci: &[f64],
) -> Result<Vec<ComplexityTransition>> {
    if pci.len() != t.n_products() || eci.len() != t.n_countries() {
        return Err(Error::DimensionMismatch(format!(
            "complexity vectors have lengths {}/{} for a {}x{} transition set",
            pci.len(),
            eci.len(),
            t.n_products(),
            t.n_countries()
        )));
    }
    let n = t.n_countries();
    let per_country = |cells: Vec<Cell>| {
        let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); n];
        for c in cells {
            buckets[c.country].push(pci[c.product]);
        }
        buckets.into_iter().map(|b| mean(&b)).collect::<Vec<_>>()
    };
    let gained = per_country(t.gains());
    let lost = per_country(t.losses());
    Ok((0..n)
        .filter(|&j| t.included_countries[j])
        .map(|j| ComplexityTransition {
            country: t.countries[j].clone(),
            eci: eci[j],
            mean_pci_gained: gained[j],
            mean_pci_lost: lost[j],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ExportRecord;

    fn panel(e0: &[&[f64]], e1: &[&[f64]]) -> ExportPanel {
        let mut recs = Vec::new();
        for (year, e) in [(2012, e0), (2018, e1)] {
            for (i, row) in e.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    recs.push(ExportRecord {
                        country: format!("C{j}"),
                        product: format!("P{i}"),
                        year,
                        value: v,
                    });
                }
            }
        }
        ExportPanel::from_records(recs, (2012, 2018)).unwrap()
    }

    fn rca(rows: &[&[u8]]) -> RcaMatrix {
        let m = rows.len();
        let n = rows[0].len();
        RcaMatrix::unlabeled(2012, DMatrix::from_fn(m, n, |i, j| rows[i][j] as f64)).unwrap()
    }

    #[test]
    fn diagonal_exports_give_identity() {
        let p = panel(&[&[10.0, 0.0], &[0.0, 10.0]], &[&[1.0, 1.0], &[1.0, 1.0]]);
        let r = compute_rca(&p, 2012, 1.0).unwrap();
        assert_eq!(r.x, DMatrix::identity(2, 2));
    }

    #[test]
    fn equal_exports_meet_weak_threshold() {
        let p = panel(&[&[3.0; 3], &[3.0; 3]], &[&[1.0; 3], &[1.0; 3]]);
        let r = compute_rca(&p, 2012, 1.0).unwrap();
        assert!(r.x.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn hand_evaluated_ratio() {
        // country B (col 1): P1 ratio (10/10)/(20/30) = 1.5
        let p = panel(&[&[10.0, 10.0], &[10.0, 0.0]], &[&[1.0, 1.0], &[1.0, 1.0]]);
        let r = compute_rca(&p, 2012, 1.0).unwrap();
        assert_eq!(r.x[(0, 1)], 1.0);
        assert_eq!(r.x[(1, 1)], 0.0);
        // A: P1 (10/20)/(20/30)=0.75, P2 (10/20)/(10/30)=1.5
        assert_eq!(r.x[(0, 0)], 0.0);
        assert_eq!(r.x[(1, 0)], 1.0);
    }

    #[test]
    fn rca_rejects_bad_threshold_and_year() {
        let p = panel(&[&[1.0]], &[&[1.0]]);
        assert!(compute_rca(&p, 2012, 0.0).is_err());
        assert!(compute_rca(&p, 2015, 1.0).is_err());
    }

    #[test]
    fn gain_is_zero_then_one() {
        let t0 = rca(&[&[0, 1], &[1, 0]]);
        let t1 = rca(&[&[1, 1], &[0, 0]]);
        let t = transitions(&t0, &t1).unwrap();
        assert_eq!(t.gains(), vec![Cell { product: 0, country: 0 }]);
        assert_eq!(t.losses(), vec![Cell { product: 1, country: 0 }]);
        assert_eq!(t.at_risk_gain.len() + t.at_risk_loss.len(), 4);
    }

    #[test]
    fn identical_years_have_no_transitions() {
        let a = rca(&[&[0, 1, 1], &[1, 0, 1]]);
        let t = transitions(&a, &a).unwrap();
        assert!(t.gains().is_empty() && t.losses().is_empty());
    }

    #[test]
    fn transitions_reject_mismatch() {
        let a = rca(&[&[0, 1], &[1, 0]]);
        let b = rca(&[&[0, 1, 1], &[1, 0, 1]]);
        assert!(matches!(transitions(&a, &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn inactive_country_excluded() {
        let mut t1 = rca(&[&[1, 0], &[1, 0]]);
        t1.active_countries[1] = false;
        let t0 = rca(&[&[0, 1], &[1, 1]]);
        let t = transitions(&t0, &t1).unwrap();
        assert_eq!(t.excluded_countries(), vec!["C0001"]);
        assert_eq!(t.at_risk_gain.len() + t.at_risk_loss.len(), 2);
        assert_eq!(t.n_losses(), 0);
    }

    #[test]
    fn rates_arithmetic() {
        let t0 = rca(&[&[0, 0], &[0, 1]]);
        let t1 = rca(&[&[1, 0], &[0, 1]]);
        let t = transitions(&t0, &t1).unwrap();
        assert_eq!(transition_rates(&t).unwrap(), (1.0 / 3.0, 0.0));

        let t0 = rca(&[&[0, 0], &[0, 0], &[0, 1]]);
        let t1 = rca(&[&[1, 0], &[0, 0], &[0, 0]]);
        let t = transitions(&t0, &t1).unwrap();
        let (g, l) = transition_rates(&t).unwrap();
        assert!((g - 0.2).abs() < 1e-15 && l == 1.0);

        let all_gain = transitions(&rca(&[&[0, 1]]), &rca(&[&[1, 1]])).unwrap();
        assert_eq!(transition_rates(&all_gain).unwrap().0, 1.0);

        let t0 = rca(&[&[0, 0], &[0, 0]]);
        let t = transitions(&t0, &t0).unwrap();
        assert!(matches!(transition_rates(&t), Err(Error::Degenerate(_))));
    }

    #[test]
    fn per_country_missing_loss_probability() {
        let t0 = rca(&[&[0, 1], &[0, 0]]);
        let t1 = rca(&[&[1, 1], &[0, 0]]);
        let t = transitions(&t0, &t1).unwrap();
        let stats = per_country_transition_stats(&t, &t0);
        assert_eq!(stats[0].p_loss, None);
        assert_eq!(stats[0].p_gain, Some(0.5));
        assert_eq!(stats[1].p_loss, Some(0.0));
    }

    #[test]
    fn ubiquity_gap_arithmetic() {
        // ubiquities via t0 rows: P0=1, P1=2, P2=0... build a one-country case by hand
        let t0 = rca(&[&[0, 1, 1], &[0, 1, 0], &[0, 0, 0]]);
        let t1 = rca(&[&[1, 1, 1], &[1, 1, 0], &[0, 0, 0]]);
        let t = transitions(&t0, &t1).unwrap();
        let gaps = ubiquity_gap(&t, &t0);
        // country 0: realized {P0 (s=2), P1 (s=1)}, non-realized {P2 (s=0)}
        assert_eq!(gaps[0].gain_gap, Some(1.5));
        // country 2: realized none → missing
        assert_eq!(gaps[2].gain_gap, None);
    }

    #[test]
    fn complexity_summary_means() {
        let t0 = rca(&[&[0], &[0], &[1]]);
        let t1 = rca(&[&[1], &[1], &[1]]);
        let t = transitions(&t0, &t1).unwrap();
        let rows = transition_complexity_summary(&t, &[1.0, 3.0, 9.0], &[0.5]).unwrap();
        assert_eq!(rows[0].mean_pci_gained, Some(2.0));
        assert_eq!(rows[0].mean_pci_lost, None);
        assert_eq!(rows[0].above_diagonal(), None);
        assert!(transition_complexity_summary(&t, &[1.0], &[0.5]).is_err());
    }
}
