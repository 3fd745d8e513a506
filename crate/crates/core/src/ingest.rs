//! Loading raw export records into a dense product-by-country panel.
//!
//! The panel always holds exactly two reference years. Products and countries
//! are the union of codes with a positive value in either year, sorted
//! lexicographically so every downstream matrix has a reproducible layout.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// One row of the long-form input.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportRecord {
    pub country: String,
    pub product: String,
    pub year: i32,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub years: (i32, i32),
    pub delimiter: u8,
    /// Truncate product codes to this many leading characters after loading.
    pub digits: Option<usize>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            years: (2012, 2018),
            delimiter: b',',
            digits: Some(4),
        }
    }
}

/// Bookkeeping about what loading dropped or flagged.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub records_read: usize,
    pub records_other_years: usize,
    pub zero_records_dropped: usize,
    pub duplicate_records_merged: usize,
    /// Codes that only ever appeared with zero value.
    pub removed_products: Vec<String>,
    pub removed_countries: Vec<String>,
    /// Codes with positive exports in one reference year but not the other.
    pub countries_missing_in_year: Vec<(String, i32)>,
    pub products_missing_in_year: Vec<(String, i32)>,
}

/// Export values for two reference years on a shared product/country index.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportPanel {
    pub products: Vec<String>,
    pub countries: Vec<String>,
    pub years: (i32, i32),
    /// `values[0]` is the first reference year, `values[1]` the second; both m×n.
    pub values: [DMatrix<f64>; 2],
    pub report: IngestReport,
}

impl ExportPanel {
    /// Builds a panel from records, aggregating duplicates and dropping zeros.
    pub fn from_records<I>(records: I, years: (i32, i32)) -> Result<Self>
    where
        I: IntoIterator<Item = ExportRecord>,
    {
        if years.0 == years.1 {
            return Err(Error::Input(format!(
                "reference years must differ, got {} twice",
                years.0
            )));
        }
        let mut report = IngestReport::default();
        let mut cells: BTreeMap<(String, String, usize), f64> = BTreeMap::new();
        let mut seen_products = BTreeSet::new();
        let mut seen_countries = BTreeSet::new();
        let mut year_seen = [false, false];

        for rec in records {
            report.records_read += 1;
            let slot = if rec.year == years.0 {
                0
            } else if rec.year == years.1 {
                1
            } else {
                report.records_other_years += 1;
                continue;
            };
            if !rec.value.is_finite() || rec.value < 0.0 {
                return Err(Error::Input(format!(
                    "export value must be finite and non-negative, got {} for ({}, {}, {})",
                    rec.value, rec.country, rec.product, rec.year
                )));
            }
            year_seen[slot] = true;
            seen_products.insert(rec.product.clone());
            seen_countries.insert(rec.country.clone());
            if rec.value == 0.0 {
                report.zero_records_dropped += 1;
                continue;
            }
            let key = (rec.product, rec.country, slot);
            match cells.get_mut(&key) {
                Some(v) => {
                    *v += rec.value;
                    report.duplicate_records_merged += 1;
                }
                None => {
                    cells.insert(key, rec.value);
                }
            }
        }
        for (slot, year) in [years.0, years.1].into_iter().enumerate() {
            if !year_seen[slot] {
                return Err(Error::Input(format!("year {year} absent from data")));
            }
        }

        let products: Vec<String> = cells
            .keys()
            .map(|(p, _, _)| p.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let countries: Vec<String> = cells
            .keys()
            .map(|(_, c, _)| c.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        report.removed_products = seen_products
            .into_iter()
            .filter(|p| products.binary_search(p).is_err())
            .collect();
        report.removed_countries = seen_countries
            .into_iter()
            .filter(|c| countries.binary_search(c).is_err())
            .collect();

        let (m, n) = (products.len(), countries.len());
        let mut values = [DMatrix::zeros(m, n), DMatrix::zeros(m, n)];
        for ((p, c, slot), v) in cells {
            let i = products.binary_search(&p).expect("indexed product");
            let j = countries.binary_search(&c).expect("indexed country");
            values[slot][(i, j)] = v;
        }

        let mut panel = ExportPanel {
            products,
            countries,
            years,
            values,
            report,
        };
        panel.flag_missing();
        Ok(panel)
    }

    fn flag_missing(&mut self) {
        let years = [self.years.0, self.years.1];
        self.report.countries_missing_in_year.clear();
        self.report.products_missing_in_year.clear();
        for (slot, &year) in years.iter().enumerate() {
            let v = &self.values[slot];
            for (j, c) in self.countries.iter().enumerate() {
                if v.column(j).iter().all(|&e| e == 0.0) {
                    self.report.countries_missing_in_year.push((c.clone(), year));
                }
            }
            for (i, p) in self.products.iter().enumerate() {
                if v.row(i).iter().all(|&e| e == 0.0) {
                    self.report.products_missing_in_year.push((p.clone(), year));
                }
            }
        }
    }

    pub fn n_products(&self) -> usize {
        self.products.len()
    }

    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    /// Position of `year` within the panel's reference pair.
    pub fn year_slot(&self, year: i32) -> Result<usize> {
        if year == self.years.0 {
            Ok(0)
        } else if year == self.years.1 {
            Ok(1)
        } else {
            Err(Error::Input(format!(
                "year {year} is not one of the panel years {}/{}",
                self.years.0, self.years.1
            )))
        }
    }

    pub fn values_for(&self, year: i32) -> Result<&DMatrix<f64>> {
        Ok(&self.values[self.year_slot(year)?])
    }

    /// World export total for one year.
    pub fn total(&self, year: i32) -> Result<f64> {
        Ok(self.values_for(year)?.sum())
    }

    /// Restricts the panel to products and countries with positive exports in
    /// both reference years.
    pub fn common_support(&self) -> ExportPanel {
        let active = |slot: usize| {
            let v = &self.values[slot];
            let rows: Vec<bool> = (0..v.nrows()).map(|i| v.row(i).sum() > 0.0).collect();
            let cols: Vec<bool> = (0..v.ncols()).map(|j| v.column(j).sum() > 0.0).collect();
            (rows, cols)
        };
        let (r0, c0) = active(0);
        let (r1, c1) = active(1);
        let keep_rows: Vec<usize> = (0..self.n_products()).filter(|&i| r0[i] && r1[i]).collect();
        let keep_cols: Vec<usize> = (0..self.n_countries())
            .filter(|&j| c0[j] && c1[j])
            .collect();
        self.select(&keep_rows, &keep_cols)
    }

    /// Sub-panel on the given (ascending) product and country indices.
    pub fn select(&self, products: &[usize], countries: &[usize]) -> ExportPanel {
        let pick = |m: &DMatrix<f64>| {
            DMatrix::from_fn(products.len(), countries.len(), |a, b| {
                m[(products[a], countries[b])]
            })
        };
        let mut panel = ExportPanel {
            products: products.iter().map(|&i| self.products[i].clone()).collect(),
            countries: countries.iter().map(|&j| self.countries[j].clone()).collect(),
            years: self.years,
            values: [pick(&self.values[0]), pick(&self.values[1])],
            report: self.report.clone(),
        };
        panel.flag_missing();
        panel
    }

    /// Writes the panel back out as long-form CSV, positive cells only.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["country", "product", "year", "value"])?;
        for (slot, year) in [self.years.0, self.years.1].into_iter().enumerate() {
            let year = year.to_string();
            for (j, c) in self.countries.iter().enumerate() {
                for (i, p) in self.products.iter().enumerate() {
                    let v = self.values[slot][(i, j)];
                    if v > 0.0 {
                        w.write_record([c.as_str(), p.as_str(), &year, &v.to_string()])?;
                    }
                }
            }
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Reads a headered delimited file with `country,product,year,value` columns.
pub fn load_panel(path: impl AsRef<Path>, config: &IngestConfig) -> Result<ExportPanel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_panel(file, config)
}

pub fn read_panel<R: Read>(reader: R, config: &IngestConfig) -> Result<ExportPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(config.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Schema(name.to_string()))
    };
    let (ci, pi, yi, vi) = (
        column("country")?,
        column("product")?,
        column("year")?,
        column("value")?,
    );

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |k: usize, name: &str| {
            row.get(k).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing field `{name}`"),
            })
        };
        let year_raw = field(yi, "year")?;
        let year: i32 = year_raw.parse().map_err(|_| Error::Parse {
            line,
            message: format!("year `{year_raw}` is not an integer"),
        })?;
        let value_raw = field(vi, "value")?;
        let value: f64 = value_raw.parse().map_err(|_| Error::Parse {
            line,
            message: format!("value `{value_raw}` is not numeric"),
        })?;
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("value `{value_raw}` must be finite and non-negative"),
            });
        }
        records.push(ExportRecord {
            country: field(ci, "country")?.to_string(),
            product: field(pi, "product")?.to_string(),
            year,
            value,
        });
    }

    let panel = ExportPanel::from_records(records, config.years)?;
    match config.digits {
        Some(d) => truncate_product_level(&panel, d),
        None => Ok(panel),
    }
}

/// Merges product codes sharing the same leading `digits` characters.
pub fn truncate_product_level(panel: &ExportPanel, digits: usize) -> Result<ExportPanel> {
    if !matches!(digits, 2 | 4 | 6) {
        return Err(Error::Input(format!(
            "product digits must be 2, 4 or 6, got {digits}"
        )));
    }
    let mut merged: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, code) in panel.products.iter().enumerate() {
        if code.chars().count() < digits {
            return Err(Error::Input(format!(
                "product code `{code}` is shorter than {digits} characters"
            )));
        }
        let prefix: String = code.chars().take(digits).collect();
        merged.entry(prefix).or_default().push(i);
    }
    if merged.len() == panel.n_products() && merged.keys().eq(panel.products.iter()) {
        return Ok(panel.clone());
    }

    let n = panel.n_countries();
    let sum_rows = |m: &DMatrix<f64>| {
        let mut out = DMatrix::zeros(merged.len(), n);
        for (a, rows) in merged.values().enumerate() {
            for &i in rows {
                for j in 0..n {
                    out[(a, j)] += m[(i, j)];
                }
            }
        }
        out
    };
    let mut out = ExportPanel {
        products: merged.keys().cloned().collect(),
        countries: panel.countries.clone(),
        years: panel.years,
        values: [sum_rows(&panel.values[0]), sum_rows(&panel.values[1])],
        report: panel.report.clone(),
    };
    out.flag_missing();
    Ok(out)
}
