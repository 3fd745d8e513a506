use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use relvar::econometrics::LogitOptions;
use relvar::pipeline::{run_pipeline, InputSource, RunConfig, RunReport, Stage};
use relvar::report::{num, opt, Table};
use relvar::smoothing::{lpoly, Kernel, SmoothSpec};
use relvar::synthetic::{generate_synthetic, SyntheticModel, SyntheticSpec};

#[derive(Parser)]
#[command(name = "relvar", version, about = "Product-space relatedness analysis of export specializations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline, optionally stopping after a stage.
    Run {
        #[command(flatten)]
        common: Common,
        /// Last stage to run: ingest, rca, density, complexity, decompose,
        /// logit, confusion, figures, outlook (or all).
        #[arg(long, default_value = "all")]
        stage: String,
        /// Also write the RCA, proximity and density matrices.
        #[arg(long)]
        write_matrices: bool,
    },
    /// Write a synthetic export panel as CSV.
    Synth {
        #[command(flatten)]
        synth: SynthArgs,
        #[arg(long, value_parser = parse_years, default_value = "2012,2018")]
        years: (i32, i32),
        /// Output CSV path.
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Compute RCA matrices and transition counts.
    Rca {
        #[command(flatten)]
        common: Common,
    },
    /// Compute proximity and density matrices.
    Density {
        #[command(flatten)]
        common: Common,
    },
    /// Regress density on diversity and ubiquity.
    Decompose {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the gain and loss logit models.
    Logit {
        #[command(flatten)]
        common: Common,
    },
    /// Local polynomial smooth of a two-column x,y CSV.
    Smooth {
        /// CSV with columns x and y.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        smooth: SmoothArgs,
        /// Output CSV path (x, fitted, lower, upper).
        #[arg(long, short)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Headered CSV with country, product, year, value columns.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Use a generated panel instead of an input file.
    #[arg(long)]
    synthetic: bool,
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long, value_parser = parse_years, default_value = "2012,2018")]
    years: (i32, i32),
    /// Product code level (2, 4 or 6); 0 keeps codes as given.
    #[arg(long, default_value_t = 4)]
    digits: usize,
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
    /// RCA threshold (specialized when RCA >= threshold).
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    /// Exclude the proximity diagonal from density.
    #[arg(long)]
    zero_diagonal: bool,
    /// Aggregate raw instead of standardized product complexity in ECOI.
    #[arg(long)]
    raw_pci: bool,
    #[command(flatten)]
    smooth: SmoothArgs,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Output directory.
    #[arg(long, short, env = "RELVAR_OUTPUT_DIR", default_value = "relvar-output")]
    output: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    products: usize,
    #[arg(long, default_value_t = 12)]
    countries: usize,
    #[arg(long, value_enum, default_value_t = ModelArg::Capability)]
    model: ModelArg,
    /// Latent capability groups for the capability model.
    #[arg(long, default_value_t = 4)]
    groups: usize,
}

#[derive(Args)]
struct SmoothArgs {
    #[arg(long, default_value_t = 1)]
    degree: usize,
    #[arg(long, default_value_t = 50.0)]
    bandwidth: f64,
    #[arg(long, default_value_t = 75.0)]
    se_bandwidth: f64,
    #[arg(long, default_value = "epanechnikov")]
    kernel: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Random,
    Capability,
}

fn parse_years(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s.split_once(',').ok_or("expected T0,T1")?;
    let a: i32 = a.trim().parse().map_err(|_| format!("bad year `{a}`"))?;
    let b: i32 = b.trim().parse().map_err(|_| format!("bad year `{b}`"))?;
    if a == b {
        return Err("the two years must differ".into());
    }
    Ok((a, b))
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s {
        "\\t" | "tab" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(format!("delimiter must be a single ASCII character, got `{s}`")),
    }
}

impl SynthArgs {
    fn spec(&self, years: (i32, i32)) -> SyntheticSpec {
        SyntheticSpec {
            seed: self.seed,
            products: self.products,
            countries: self.countries,
            model: match self.model {
                ModelArg::Random => SyntheticModel::Random,
                ModelArg::Capability => SyntheticModel::Capability { groups: self.groups },
            },
            years,
        }
    }
}

impl SmoothArgs {
    fn spec(&self) -> Result<SmoothSpec> {
        Ok(SmoothSpec {
            degree: self.degree,
            bandwidth: self.bandwidth,
            se_bandwidth: self.se_bandwidth,
            kernel: Kernel::parse(&self.kernel)?,
            grid: None,
        })
    }
}

impl Common {
    fn config(&self, stage: Stage, write_matrices: bool) -> Result<RunConfig> {
        let input = match &self.input {
            Some(p) => InputSource::File(p.clone()),
            None => InputSource::Synthetic(self.synth.spec(self.years)),
        };
        let mut c = RunConfig::new(input, &self.output);
        c.years = self.years;
        c.digits = (self.digits != 0).then_some(self.digits);
        c.delimiter = self.delimiter;
        c.rca_threshold = self.threshold;
        c.include_diagonal = !self.zero_diagonal;
        c.standardize_pci = !self.raw_pci;
        c.smooth = self.smooth.spec()?;
        c.logit = LogitOptions {
            max_iter: self.max_iter,
            tol: self.tol,
            ..LogitOptions::default()
        };
        c.stage = stage;
        c.write_matrices = write_matrices;
        Ok(c)
    }
}

fn summarize(r: &RunReport) {
    println!("stage: {}", r.stage);
    if let Some(c) = &r.counts {
        println!(
            "{} products x {} countries; gains {}/{} ({}), losses {}/{} ({})",
            c.products,
            c.countries,
            c.gains,
            c.at_risk_gain,
            num(c.gain_rate),
            c.losses,
            c.at_risk_loss,
            num(c.loss_rate)
        );
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} artifacts to {}", r.artifacts.len() + 1, r.output_dir.display());
}

fn run_stage(common: &Common, stage: Stage, matrices: bool) -> Result<()> {
    let report = run_pipeline(&common.config(stage, matrices)?)?;
    summarize(&report);
    Ok(())
}

fn smooth_file(input: &PathBuf, spec: &SmoothSpec, output: &PathBuf) -> Result<()> {
    let mut rdr = csv::Reader::from_path(input).with_context(|| format!("reading {}", input.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |n: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(n));
    let (Some(xi), Some(yi)) = (col("x"), col("y")) else {
        bail!("{} must have x and y columns", input.display());
    };
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (k, row) in rdr.records().enumerate() {
        let row = row?;
        let parse = |i: usize| -> Result<f64> {
            let s = row.get(i).unwrap_or("").trim();
            s.parse().with_context(|| format!("row {}: `{s}` is not numeric", k + 2))
        };
        x.push(parse(xi)?);
        y.push(parse(yi)?);
    }
    let s = lpoly(&x, &y, spec)?;
    let mut t = Table::new(["x", "fitted", "lower", "upper"]);
    for k in 0..s.x.len() {
        t.push([num(s.x[k]), opt(s.fitted[k]), opt(s.lower[k]), opt(s.upper[k])]);
    }
    fs::write(output, t.to_csv()?).with_context(|| format!("writing {}", output.display()))?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, stage, write_matrices } => run_stage(&common, Stage::parse(&stage)?, write_matrices),
        Command::Rca { common } => run_stage(&common, Stage::Rca, true),
        Command::Density { common } => run_stage(&common, Stage::Density, true),
        Command::Decompose { common } => run_stage(&common, Stage::Decompose, false),
        Command::Logit { common } => run_stage(&common, Stage::Logit, false),
        Command::Synth { synth, years, output } => {
            let panel = generate_synthetic(&synth.spec(years))?;
            let file = fs::File::create(&output).with_context(|| format!("creating {}", output.display()))?;
            panel.write_csv(file)?;
            Ok(())
        }
        Command::Smooth { input, smooth, output } => smooth_file(&input, &smooth.spec()?, &output),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
