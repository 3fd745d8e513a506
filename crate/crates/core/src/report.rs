//! CSV table builders shared by the pipeline artifacts.
//!
//! Reals are written with six significant digits, counts as exact integers,
//! and missing values as `NA`.

use crate::econometrics::{FitKind, FitResult};
use crate::error::{Error, Result};
use crate::stats::{fmt_g6, fmt_opt};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(Into::into).collect());
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().flexible(false).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner()
            .map_err(|e| Error::Input(format!("csv buffer: {}", e.error())))
    }
}

pub fn num(x: f64) -> String {
    fmt_g6(x)
}

pub fn opt(x: Option<f64>) -> String {
    fmt_opt(x)
}

/// One coefficient cell: estimate with significance stars.
pub fn coef_cell(fit: &FitResult, name: &str) -> (String, String) {
    match fit.index(name) {
        Some(i) => (
            format!("{}{}", fmt_g6(fit.coefficients[i]), fit.stars(i)),
            format!("({})", fmt_g6(fit.std_errors[i])),
        ),
        None => (String::new(), String::new()),
    }
}

/// Regression table with an estimate row and a parenthesized standard-error
/// row per variable, followed by `N` and the fit statistic.
///
/// `variables` pairs the design column name with its printed label.
pub fn regression_table(columns: &[(String, &FitResult)], variables: &[(&str, &str)]) -> Table {
    let mut t = Table::new(
        std::iter::once("variable".to_string()).chain(columns.iter().map(|(c, _)| c.clone())),
    );
    for &(name, label) in variables {
        let cells: Vec<(String, String)> = columns.iter().map(|(_, f)| coef_cell(f, name)).collect();
        t.push(std::iter::once(label.to_string()).chain(cells.iter().map(|c| c.0.clone())));
        t.push(std::iter::once(String::new()).chain(cells.iter().map(|c| c.1.clone())));
    }
    t.push(std::iter::once("N".to_string()).chain(columns.iter().map(|(_, f)| f.n.to_string())));
    let stat_row: Vec<String> = columns
        .iter()
        .map(|(_, f)| match f.kind {
            FitKind::Ols => opt(f.r_squared),
            FitKind::Logit => opt(f.pseudo_r_squared),
        })
        .collect();
    let label = if columns.iter().all(|(_, f)| f.kind == FitKind::Logit) {
        "Pseudo-R2"
    } else {
        "R2"
    };
    t.push(std::iter::once(label.to_string()).chain(stat_row));
    t
}
