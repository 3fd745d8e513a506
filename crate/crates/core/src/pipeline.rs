//! End-to-end run: ingest through the outlook regressions.
//!
//! Every artifact is rendered in memory first; files are written only after
//! all requested stages succeed, so a failed run leaves no partial output.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::complexity::{self, complexity_scores, ecoi, outlook_regressions, OutlookIndicators};
use crate::decomposition::{
    self, decompose_density, fit_transition_models, lor_decompose, per_country_models, success_bonus,
    topk_confusion, DensityDecomposition, ModelTag, TransitionModels,
};
use crate::econometrics::{FitResult, LogitOptions, CONSTANT};
use crate::error::{Error, Result};
use crate::ingest::{load_panel, truncate_product_level, ExportPanel, IngestConfig, IngestReport};
use crate::product_space::{conditional_probabilities, density_with, write_matrix_csv, DensityOptions};
use crate::report::{num, opt, regression_table, Table};
use crate::smoothing::{lpoly, SmoothSpec};
use crate::specialization::{
    compute_rca, per_country_transition_stats, transition_complexity_summary, transition_rates,
    transitions, ubiquity_gap, Event, RcaMatrix, TransitionSet,
};
use crate::synthetic::{generate_synthetic, SyntheticModel, SyntheticSpec};

/// Pipeline stages in execution order; a run covers a prefix ending at the
/// configured stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Rca,
    Density,
    Complexity,
    Decompose,
    Logit,
    Confusion,
    Figures,
    Outlook,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Rca,
        Stage::Density,
        Stage::Complexity,
        Stage::Decompose,
        Stage::Logit,
        Stage::Confusion,
        Stage::Figures,
        Stage::Outlook,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Rca => "rca",
            Stage::Density => "density",
            Stage::Complexity => "complexity",
            Stage::Decompose => "decompose",
            Stage::Logit => "logit",
            Stage::Confusion => "confusion",
            Stage::Figures => "figures",
            Stage::Outlook => "outlook",
        }
    }

    pub fn parse(s: &str) -> Result<Stage> {
        let s = s.to_ascii_lowercase();
        if s == "all" {
            return Ok(Stage::Outlook);
        }
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown stage `{s}`")))
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    File(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: InputSource,
    pub years: (i32, i32),
    pub digits: Option<usize>,
    pub delimiter: u8,
    pub rca_threshold: f64,
    pub include_diagonal: bool,
    /// Aggregate standardized rather than raw product complexity in ECOI.
    pub standardize_pci: bool,
    pub smooth: SmoothSpec,
    pub logit: LogitOptions,
    pub output_dir: PathBuf,
    pub stage: Stage,
    /// Also write the RCA, proximity and density matrices.
    pub write_matrices: bool,
}

impl RunConfig {
    pub fn new(input: InputSource, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            input,
            years: (2012, 2018),
            digits: Some(4),
            delimiter: b',',
            rca_threshold: 1.0,
            include_diagonal: true,
            standardize_pci: true,
            smooth: SmoothSpec::default(),
            logit: LogitOptions::default(),
            output_dir: output_dir.into(),
            stage: Stage::Outlook,
            write_matrices: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counts {
    pub products: usize,
    pub countries: usize,
    pub specializations_t0: usize,
    pub specializations_t1: usize,
    pub at_risk_gain: usize,
    pub gains: usize,
    pub at_risk_loss: usize,
    pub losses: usize,
    pub gain_rate: f64,
    pub loss_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Support {
    /// Products or countries without positive exports in both years.
    pub excluded_products: Vec<String>,
    pub excluded_countries: Vec<String>,
    /// Products whose only first-year specializations are in excluded countries.
    pub unspecialized_products: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complexity_eigenvalue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complexity_spectral_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_r2: Option<f64>,
    /// Joint R² minus the sum of single-regressor R² values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_r2_additivity_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub stage: Stage,
    pub counts: Option<Counts>,
    pub support: Support,
    pub ingest: IngestReport,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
    pub artifacts: Vec<ArtifactEntry>,
    pub output_dir: PathBuf,
}

pub const MANIFEST: &str = "manifest.json";

#[derive(Serialize)]
struct ConfigEcho<'a> {
    input: String,
    years: (i32, i32),
    digits: Option<usize>,
    delimiter: String,
    rca_threshold: f64,
    include_diagonal: bool,
    standardize_pci: bool,
    smoothing: SmoothEcho,
    logit: LogitEcho,
    stage: &'a str,
    write_matrices: bool,
}

#[derive(Serialize)]
struct SmoothEcho {
    degree: usize,
    bandwidth: f64,
    se_bandwidth: f64,
    kernel: &'static str,
}

#[derive(Serialize)]
struct LogitEcho {
    max_iter: usize,
    tol: f64,
    separation_bound: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: ConfigEcho<'a>,
    ingest: &'a IngestReport,
    support: &'a Support,
    counts: &'a Option<Counts>,
    diagnostics: &'a Diagnostics,
    warnings: &'a [String],
    artifacts: &'a [ArtifactEntry],
}

fn echo(config: &RunConfig) -> ConfigEcho<'_> {
    let input = match &config.input {
        InputSource::File(p) => p.display().to_string(),
        InputSource::Synthetic(s) => {
            let model = match s.model {
                SyntheticModel::Random => "random".to_string(),
                SyntheticModel::Capability { groups } => format!("capability/{groups}"),
            };
            format!(
                "synthetic:seed={},products={},countries={},model={model}",
                s.seed, s.products, s.countries
            )
        }
    };
    ConfigEcho {
        input,
        years: config.years,
        digits: config.digits,
        delimiter: (config.delimiter as char).to_string(),
        rca_threshold: config.rca_threshold,
        include_diagonal: config.include_diagonal,
        standardize_pci: config.standardize_pci,
        smoothing: SmoothEcho {
            degree: config.smooth.degree,
            bandwidth: config.smooth.bandwidth,
            se_bandwidth: config.smooth.se_bandwidth,
            kernel: config.smooth.kernel.name(),
        },
        logit: LogitEcho {
            max_iter: config.logit.max_iter,
            tol: config.logit.tol,
            separation_bound: config.logit.separation_bound,
        },
        stage: config.stage.name(),
        write_matrices: config.write_matrices,
    }
}

/// Loads (or generates) the panel and applies product-level truncation.
pub fn load_input(config: &RunConfig) -> Result<ExportPanel> {
    match &config.input {
        InputSource::File(path) => load_panel(
            path,
            &IngestConfig {
                years: config.years,
                delimiter: config.delimiter,
                digits: config.digits,
            },
        ),
        InputSource::Synthetic(spec) => {
            let spec = SyntheticSpec { years: config.years, ..spec.clone() };
            let panel = generate_synthetic(&spec)?;
            match config.digits {
                Some(d) => truncate_product_level(&panel, d),
                None => Ok(panel),
            }
        }
    }
}

/// Round-trips through the six-significant-digit text form.
fn sig6(x: f64) -> f64 {
    num(x).parse().unwrap_or(x)
}

struct Artifacts(Vec<(String, Vec<u8>)>);

impl Artifacts {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.0.push((name.to_string(), bytes));
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        self.add(name, t.to_csv()?);
        Ok(())
    }

    fn matrix(&mut self, name: &str, rows: &[String], cols: &[String], m: &nalgebra::DMatrix<f64>) -> Result<()> {
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, rows, cols, m)?;
        self.add(name, buf);
        Ok(())
    }
}

/// First-year and second-year RCA on the full panel and on the analysis sample.
#[derive(Debug, Clone)]
pub struct AnalysisSample {
    pub full0: RcaMatrix,
    pub full1: RcaMatrix,
    /// Restricted to products and countries active in both years.
    pub rca0: RcaMatrix,
    pub rca1: RcaMatrix,
    pub support: Support,
}

/// Computes RCA on the full panel, then keeps the entities every later stage
/// can use.
pub fn analysis_sample(raw: &ExportPanel, years: (i32, i32), threshold: f64) -> Result<AnalysisSample> {
    // RCA on the full panel: an entity missing in one year keeps a zero
    // column or row there and drops out of everything downstream
    let (t0, t1) = years;
    let full0 = compute_rca(raw, t0, threshold)?;
    let full1 = compute_rca(raw, t1, threshold)?;
    let keep_countries: Vec<usize> = (0..raw.n_countries())
        .filter(|&j| full0.active_countries[j] && full1.active_countries[j])
        .collect();
    let both_years: Vec<usize> = (0..raw.n_products())
        .filter(|&i| full0.active_products[i] && full1.active_products[i])
        .collect();
    // proximity needs at least one specialized country among those kept
    let (keep_products, unspecialized): (Vec<usize>, Vec<usize>) = both_years
        .into_iter()
        .partition(|&i| keep_countries.iter().any(|&j| full0.has(i, j)));
    let support = Support {
        excluded_products: (0..raw.n_products())
            .filter(|&i| !(full0.active_products[i] && full1.active_products[i]))
            .map(|i| raw.products[i].clone())
            .collect(),
        excluded_countries: (0..raw.n_countries())
            .filter(|j| keep_countries.binary_search(j).is_err())
            .map(|j| raw.countries[j].clone())
            .collect(),
        unspecialized_products: unspecialized.iter().map(|&i| raw.products[i].clone()).collect(),
    };
    if keep_products.len() < 2 || keep_countries.len() < 2 {
        return Err(Error::Input(format!(
            "need at least 2 products and 2 countries active in both years, found {}x{}",
            keep_products.len(),
            keep_countries.len()
        )));
    }

    Ok(AnalysisSample {
        rca0: full0.select(&keep_products, &keep_countries),
        rca1: full1.select(&keep_products, &keep_countries),
        full0,
        full1,
        support,
    })
}

/// Runs the configured prefix of the pipeline and writes its artifacts.
pub fn run_pipeline(config: &RunConfig) -> Result<RunReport> {
    let (report, files) = build(config)?;
    write_outputs(&config.output_dir, &files)?;
    Ok(report)
}

/// Runs the pipeline in memory, returning the report and the rendered files
/// (manifest last).
pub fn build(config: &RunConfig) -> Result<(RunReport, Vec<(String, Vec<u8>)>)> {
    let mut art = Artifacts(Vec::new());
    let mut warnings = Vec::new();
    let mut diagnostics = Diagnostics::default();
    let stop = config.stage;

    let raw = load_input(config)?;
    let sample = analysis_sample(&raw, config.years, config.rca_threshold)?;
    let support = sample.support.clone();

    let mut counts = None;
    if stop >= Stage::Rca {
        let AnalysisSample { full0, full1, rca0, rca1, .. } = sample;
        let t = transitions(&rca0, &rca1)?;
        let (gain_rate, loss_rate) = transition_rates(&t)?;
        counts = Some(Counts {
            products: rca0.n_products(),
            countries: rca0.n_countries(),
            specializations_t0: rca0.count(),
            specializations_t1: rca1.count(),
            at_risk_gain: t.at_risk_gain.len(),
            gains: t.n_gains(),
            at_risk_loss: t.at_risk_loss.len(),
            losses: t.n_losses(),
            gain_rate: sig6(gain_rate),
            loss_rate: sig6(loss_rate),
        });
        if config.write_matrices {
            art.matrix("rca_t0.csv", &full0.products, &full0.countries, &full0.x)?;
            art.matrix("rca_t1.csv", &full1.products, &full1.countries, &full1.x)?;
        }
        if stop >= Stage::Density {
            analyze(config, &rca0, &t, stop, &mut art, &mut warnings, &mut diagnostics)?;
        }
    }

    let ingest = raw.report.clone();
    let mut report = RunReport {
        stage: stop,
        counts,
        support,
        ingest,
        diagnostics,
        warnings,
        artifacts: art
            .0
            .iter()
            .map(|(name, bytes)| ArtifactEntry {
                file: name.clone(),
                bytes: bytes.len(),
                sha256: hex::encode(Sha256::digest(bytes)),
            })
            .collect(),
        output_dir: config.output_dir.clone(),
    };
    let manifest = Manifest {
        config: echo(config),
        ingest: &report.ingest,
        support: &report.support,
        counts: &report.counts,
        diagnostics: &report.diagnostics,
        warnings: &report.warnings,
        artifacts: &report.artifacts,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| Error::Input(format!("manifest serialization: {e}")))?;
    json.push(b'\n');
    report.artifacts.sort_by(|a, b| a.file.cmp(&b.file));
    let mut files = art.0;
    files.push((MANIFEST.to_string(), json));
    Ok((report, files))
}

fn write_outputs(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn analyze(
    config: &RunConfig,
    rca0: &RcaMatrix,
    t: &TransitionSet,
    stop: Stage,
    art: &mut Artifacts,
    warnings: &mut Vec<String>,
    diag: &mut Diagnostics,
) -> Result<()> {
    let prox = conditional_probabilities(rca0)?;
    let dens = density_with(
        rca0,
        &prox,
        DensityOptions {
            include_diagonal: config.include_diagonal,
        },
    )?;
    if config.write_matrices {
        art.matrix("proximity.csv", &rca0.products, &rca0.products, &prox.c_min)?;
        art.matrix("density.csv", &rca0.products, &rca0.countries, &dens.d)?;
    }
    if stop < Stage::Complexity {
        return Ok(());
    }

    let scores = complexity_scores(rca0)?;
    diag.complexity_eigenvalue = Some(sig6(scores.eigenvalue));
    diag.complexity_spectral_gap = Some(sig6(scores.spectral_gap));
    let gamma = if config.standardize_pci { &scores.pci } else { &scores.pci_raw };
    let outlook = ecoi(rca0, &dens, gamma)?;
    art.table("pci.csv", &pci_table(rca0, &scores.pci, &scores.pci_raw))?;
    art.table("countries.csv", &country_table(rca0, &scores.eci, &outlook))?;
    if stop < Stage::Decompose {
        return Ok(());
    }

    let dec = decompose_density(&dens, rca0)?;
    diag.density_r2 = dec.source_fit.r_squared.map(sig6);
    diag.density_r2_additivity_gap = Some(sig6(dec.r2_additivity_gap()));
    art.table("table1.csv", &table1(&dec))?;
    if stop < Stage::Logit {
        return Ok(());
    }

    let gains = fit_transition_models(t, &dec, Event::Gain, config.logit)?;
    let losses = fit_transition_models(t, &dec, Event::Loss, config.logit)?;
    for m in [&gains, &losses] {
        for (tag, f) in [(ModelTag::DensityOnly, &m.fit_density), (ModelTag::ThreeVariable, &m.fit_three)] {
            if !f.converged {
                warnings.push(format!("{} {} logit did not converge", m.event.name(), tag.name()));
            }
        }
    }
    art.table("table2.csv", &table2(&gains, &losses))?;
    if stop < Stage::Confusion {
        return Ok(());
    }

    let mut lors = Vec::new();
    for m in [&gains, &losses] {
        for (tag, f) in [(ModelTag::DensityOnly, &m.fit_density), (ModelTag::ThreeVariable, &m.fit_three)] {
            lors.push((m.event, tag, lor_decompose(f, &dec, &m.cells, tag)?));
        }
    }
    let mut t3 = Table::new(["measure", "gains_density", "gains_three_variable", "losses_density", "losses_three_variable"]);
    let confusions = lors
        .iter()
        .map(|(ev, _, lor)| topk_confusion(lor, t, *ev))
        .collect::<Result<Vec<_>>>()?;
    let pct = |x: Option<f64>| opt(x.map(|v| 100.0 * v));
    t3.push(std::iter::once("correct_positives_pct".to_string()).chain(confusions.iter().map(|c| pct(c.correct_positive_share))));
    t3.push(std::iter::once("correct_negatives_pct".to_string()).chain(confusions.iter().map(|c| pct(c.correct_negative_share))));
    t3.push(std::iter::once("observations".to_string()).chain(confusions.iter().map(|c| c.n.to_string())));
    t3.push(std::iter::once("realized".to_string()).chain(confusions.iter().map(|c| c.realized.to_string())));
    art.table("table3.csv", &t3)?;
    if stop < Stage::Figures {
        return Ok(());
    }

    // figure 1: complexity of gained versus lost specializations
    let summary = transition_complexity_summary(t, &scores.pci, &scores.eci)?;
    let mut f1 = Table::new(["country", "eci", "mean_pci_gained", "mean_pci_lost", "above_diagonal"]);
    for s in &summary {
        f1.push([
            s.country.clone(),
            num(s.eci),
            opt(s.mean_pci_gained),
            opt(s.mean_pci_lost),
            s.above_diagonal().map(|b| b.to_string()).unwrap_or_else(|| "NA".into()),
        ]);
    }
    art.table("fig1.csv", &f1)?;

    let mut fig = FigureTable::new(&config.smooth);
    let stats = per_country_transition_stats(t, rca0);
    let xs: Vec<(String, f64)> = stats.iter().map(|s| (s.country.clone(), s.diversity as f64)).collect();
    fig.panel("p_gain", &xs, stats.iter().map(|s| s.p_gain).collect(), warnings)?;
    fig.panel("n_gains", &xs, stats.iter().map(|s| Some(s.n_gains as f64)).collect(), warnings)?;
    fig.panel("p_loss", &xs, stats.iter().map(|s| s.p_loss).collect(), warnings)?;
    fig.panel("n_losses", &xs, stats.iter().map(|s| Some(s.n_losses as f64)).collect(), warnings)?;
    art.table("fig2.csv", &fig.finish())?;

    let mut fig = FigureTable::new(&config.smooth);
    let gaps = ubiquity_gap(t, rca0);
    let xs: Vec<(String, f64)> = gaps.iter().map(|g| (g.country.clone(), g.diversity as f64)).collect();
    fig.panel("gain_ubiquity_gap", &xs, gaps.iter().map(|g| g.gain_gap).collect(), warnings)?;
    fig.panel("loss_ubiquity_gap", &xs, gaps.iter().map(|g| g.loss_gap).collect(), warnings)?;
    art.table("fig3.csv", &fig.finish())?;

    let mut fig = FigureTable::new(&config.smooth);
    for (ev, tag, lor) in &lors {
        let bonus = success_bonus(lor, &dec, t, *ev)?;
        let xs: Vec<(String, f64)> = bonus.iter().map(|b| (b.country.clone(), b.diversity)).collect();
        let prefix = format!("{}_{}", ev.name(), tag.name());
        fig.panel(&format!("{prefix}_bonus"), &xs, bonus.iter().map(|b| b.bonus.as_ref().map(|v| v.b)).collect(), warnings)?;
        fig.panel(
            &format!("{prefix}_ubiquity_part"),
            &xs,
            bonus.iter().map(|b| b.bonus.as_ref().map(|v| v.ubiquity_part)).collect(),
            warnings,
        )?;
        fig.panel(
            &format!("{prefix}_residual_part"),
            &xs,
            bonus.iter().map(|b| b.bonus.as_ref().map(|v| v.residual_part)).collect(),
            warnings,
        )?;
    }
    art.table("fig4.csv", &fig.finish())?;

    let mut fig = FigureTable::new(&config.smooth);
    for ev in [Event::Gain, Event::Loss] {
        let models = per_country_models(t, &dec, ev, config.logit);
        let xs: Vec<(String, f64)> = models.iter().map(|m| (m.country.clone(), m.diversity)).collect();
        let pick = |f: fn(&decomposition::CountryFit) -> f64| -> Vec<Option<f64>> {
            models.iter().map(|m| m.outcome.as_ref().ok().map(f)).collect()
        };
        fig.panel(&format!("{}_pseudo_r2", ev.name()), &xs, pick(|c| c.pseudo_r2), warnings)?;
        fig.panel(&format!("{}_elasticity_ubiquity", ev.name()), &xs, pick(|c| c.elasticity_ubiquity), warnings)?;
        fig.panel(&format!("{}_elasticity_residual", ev.name()), &xs, pick(|c| c.elasticity_residual), warnings)?;
        for m in &models {
            if let Err(reason) = &m.outcome {
                fig.skipped(&format!("{}_model", ev.name()), &m.country, m.diversity, reason);
            }
        }
    }
    art.table("fig5.csv", &fig.finish())?;
    if stop < Stage::Outlook {
        return Ok(());
    }

    art.table("tableA1.csv", &table_a1(&outlook, &rca0.diversity_f64())?)?;
    Ok(())
}

fn pci_table(rca: &RcaMatrix, pci: &[f64], raw: &[f64]) -> Table {
    let mut t = Table::new(["product", "ubiquity", "pci", "pci_raw"]);
    for i in 0..rca.n_products() {
        t.push([rca.products[i].clone(), rca.ubiquity[i].to_string(), num(pci[i]), num(raw[i])]);
    }
    t
}

fn country_table(rca: &RcaMatrix, eci: &[f64], o: &OutlookIndicators) -> Table {
    let mut t = Table::new([
        "country",
        "diversity",
        "eci",
        "ecoi",
        "ecoi_bar",
        "ecoi_net",
        "mean_ubiquity",
        "mean_ubiquity_star",
    ]);
    for j in 0..rca.n_countries() {
        t.push([
            rca.countries[j].clone(),
            rca.diversity[j].to_string(),
            num(eci[j]),
            num(o.ecoi[j]),
            num(o.ecoi_bar[j]),
            num(o.ecoi_net[j]),
            opt(o.mean_ubiquity_rca0[j]),
            opt(o.mean_ubiquity_rca1[j]),
        ]);
    }
    t
}

fn table1(dec: &DensityDecomposition) -> Table {
    let cols: Vec<(String, &FitResult)> = vec![
        ("(1)".into(), &dec.source_fit),
        ("(2)".into(), &dec.diversity_only),
        ("(3)".into(), &dec.ubiquity_only),
    ];
    regression_table(
        &cols,
        &[
            (decomposition::DIVERSITY, "Diversity"),
            (decomposition::UBIQUITY, "Ubiquity"),
            (CONSTANT, "Constant"),
        ],
    )
}

fn table2(gains: &TransitionModels, losses: &TransitionModels) -> Table {
    let cols: Vec<(String, &FitResult)> = vec![
        ("gains_density".into(), &gains.fit_density),
        ("gains_three_variable".into(), &gains.fit_three),
        ("losses_density".into(), &losses.fit_density),
        ("losses_three_variable".into(), &losses.fit_three),
    ];
    let mut t = regression_table(
        &cols,
        &[
            (decomposition::DENSITY, "Density"),
            (decomposition::DIVERSITY, "Diversity"),
            (decomposition::UBIQUITY, "Ubiquity"),
            (decomposition::RESIDUAL, "Residual"),
            (CONSTANT, "Constant"),
        ],
    );
    let lr = |m: &TransitionModels, f: fn(&TransitionModels) -> String| ["".to_string(), f(m)];
    let row = |label: &str, f: fn(&TransitionModels) -> String| {
        std::iter::once(label.to_string())
            .chain(lr(gains, f))
            .chain(lr(losses, f))
            .collect::<Vec<_>>()
    };
    t.push(row("LR statistic", |m| num(m.lr.statistic)));
    t.push(row("LR df", |m| m.lr.df.to_string()));
    t.push(row("LR p-value", |m| num(m.lr.p_value)));
    t
}

fn table_a1(o: &OutlookIndicators, diversity: &[f64]) -> Result<Table> {
    let regs = outlook_regressions(o, diversity)?;
    let cols: Vec<(String, &FitResult)> = regs
        .iter()
        .map(|r| (format!("{} {}", r.label, r.dependent), &r.fit))
        .collect();
    Ok(regression_table(
        &cols,
        &[
            (complexity::DIVERSITY, "Diversity"),
            (complexity::UBIQUITY, "Ubiquity"),
            (complexity::UBIQUITY_STAR, "Ubiquity*"),
            (CONSTANT, "Constant"),
        ],
    ))
}

/// Long-format figure data: raw country points plus smoothed trend rows.
struct FigureTable<'a> {
    spec: &'a SmoothSpec,
    table: Table,
}

impl<'a> FigureTable<'a> {
    fn new(spec: &'a SmoothSpec) -> Self {
        FigureTable {
            spec,
            table: Table::new(["panel", "kind", "country", "x", "y", "fitted", "lower", "upper", "note"]),
        }
    }

    fn panel(&mut self, name: &str, xs: &[(String, f64)], ys: Vec<Option<f64>>, warnings: &mut Vec<String>) -> Result<()> {
        let mut px = Vec::new();
        let mut py = Vec::new();
        for ((country, x), y) in xs.iter().zip(&ys) {
            if let Some(y) = y.filter(|v| v.is_finite()) {
                self.table.push([name, "point", country, &num(*x), &num(y), "", "", "", ""]);
                px.push(*x);
                py.push(y);
            }
        }
        match lpoly(&px, &py, self.spec) {
            Ok(s) => {
                for k in 0..s.x.len() {
                    self.table.push([
                        name.to_string(),
                        "smooth".into(),
                        String::new(),
                        num(s.x[k]),
                        String::new(),
                        opt(s.fitted[k]),
                        opt(s.lower[k]),
                        opt(s.upper[k]),
                        String::new(),
                    ]);
                }
            }
            Err(e @ (Error::Input(_) | Error::Degenerate(_))) => {
                warnings.push(format!("panel {name}: no smooth ({e})"));
            }
            Err(e) => return Err(e),
        }
        Ok(())
    }

    fn skipped(&mut self, name: &str, country: &str, x: f64, reason: &str) {
        self.table.push([name, "skipped", country, &num(x), "", "", "", "", reason]);
    }

    fn finish(self) -> Table {
        self.table
    }
}
