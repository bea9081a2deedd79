//! `metaparadox` command-line interface.
//!
//! Exit codes: 0 success, 1 parse or validation failure, 2 I/O failure,
//! 3 paradox detected (`detect` only).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::effect::{EffectMeasure, StudyEffect};
use crate::error::{Error, Result};
use crate::forest::{forest_rows, render_forest_svg, render_forest_text, SvgOptions};
use crate::ingest::{parse_studies, StudyFormat};
use crate::paradox::{detect_paradox, Classification, ParadoxVerdict};
use crate::pooling::{meta_analyze, to_display_scale, DisplayEffect, ModelKind, PooledResult};
use crate::simulate::{simulate_scenario, sweep_grid, SimulationResult, SimulationScenario, SweepTable};
use crate::stats::Probability;

pub const SCHEMA: &str = "metaparadox/v1";
pub const SEED_ENV: &str = "METAPARADOX_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_PARADOX: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "metaparadox",
    version,
    about = "Meta-analysis pooling and significance-reversal paradox auditing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pool a study file and print the result as JSON.
    Pool {
        #[command(flatten)]
        input: StudyInput,
        #[arg(long, value_enum, default_value_t = ModelArg::Re)]
        model: ModelArg,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Audit a study file for the paradox. Exits 3 when it is present.
    Detect {
        #[command(flatten)]
        input: StudyInput,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = ModelArg::Re)]
        model: ModelArg,
    },
    /// Estimate the conditional paradox probability by simulation.
    Simulate {
        scenario: PathBuf,
        /// Comma-separated k values; with --grid-tau2 runs a sweep.
        #[arg(long, value_delimiter = ',')]
        grid_k: Vec<usize>,
        /// Comma-separated tau2 values.
        #[arg(long, value_delimiter = ',')]
        grid_tau2: Vec<f64>,
        #[arg(long, value_enum, default_value_t = TableFormat::Json)]
        format: TableFormat,
        /// Worker threads (0 = rayon default). Does not affect results.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a forest plot.
    Forest {
        #[command(flatten)]
        input: StudyInput,
        #[arg(long, value_enum, default_value_t = PlotFormat::Text)]
        format: PlotFormat,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModelArg::Re)]
        model: ModelArg,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Characters for text, pixels for SVG.
        #[arg(long)]
        width: Option<u32>,
    },
}

#[derive(Debug, Args)]
struct StudyInput {
    /// CSV or JSON study file.
    file: PathBuf,
    /// Overrides the format guessed from the file extension.
    #[arg(long, value_enum)]
    input_format: Option<InputFormatArg>,
    /// Level assumed for `ci` rows that carry none.
    #[arg(long, default_value_t = 0.95)]
    ci_level: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Fe,
    Re,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Fe => ModelKind::FixedEffect,
            ModelArg::Re => ModelKind::RandomEffects,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InputFormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlotFormat {
    Text,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolOutput {
    pub schema: String,
    pub labels: Vec<String>,
    #[serde(flatten)]
    pub result: PooledResult,
    pub display: DisplayEffect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectOutput {
    pub schema: String,
    pub labels: Vec<String>,
    pub measure: EffectMeasure,
    #[serde(flatten)]
    pub verdict: ParadoxVerdict,
    pub pooled_display: DisplayEffect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub schema: String,
    pub scenario: SimulationScenario,
    pub result: SimulationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub schema: String,
    pub base: SimulationScenario,
    #[serde(flatten)]
    pub table: SweepTable,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

fn io_context(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn read_studies(input: &StudyInput) -> Result<Vec<StudyEffect>> {
    let bytes = fs::read(&input.file).map_err(|e| io_context(&input.file, e))?;
    let format = match input.input_format {
        Some(InputFormatArg::Csv) => StudyFormat::Csv,
        Some(InputFormatArg::Json) => StudyFormat::Json,
        None => StudyFormat::from_path(&input.file),
    };
    parse_studies(bytes.as_slice(), format, Probability::open(input.ci_level)?)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("cannot serialize output: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn emit(text: &str, out_path: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match out_path {
        Some(p) => fs::write(p, text).map_err(|e| io_context(p, e)),
        None => stdout.write_all(text.as_bytes()).map_err(Error::Io),
    }
}

fn load_scenario(path: &Path, seed_override: Option<&str>) -> Result<SimulationScenario> {
    let text = fs::read_to_string(path).map_err(|e| io_context(path, e))?;
    let mut scenario: SimulationScenario = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("invalid scenario {}: {e}", path.display())))?;
    if let Some(seed) = seed_override {
        scenario.seed = seed.trim().parse().map_err(|_| {
            Error::domain(format!("{SEED_ENV} must be an unsigned 64-bit integer, got {seed:?}"))
        })?;
    }
    scenario.validate()?;
    Ok(scenario)
}

fn single_row_csv(s: &SimulationScenario, r: &SimulationResult) -> String {
    let table = SweepTable {
        k_values: vec![s.k],
        tau2_values: vec![s.tau2],
        variance_policy: "as given".into(),
        cells: vec![crate::simulate::SweepCell {
            k: s.k,
            tau2: s.tau2,
            draws_used: r.draws_used,
            result: Some(r.clone()),
            error: None,
        }],
    };
    table.to_csv()
}

fn execute(cli: Cli, seed_override: Option<&str>, stdout: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Pool { input, model, level } => {
            let studies = read_studies(&input)?;
            let result = meta_analyze(&studies, Probability::open(level)?, model.into())?;
            let output = PoolOutput {
                schema: SCHEMA.into(),
                labels: studies.iter().map(|s| s.label.clone()).collect(),
                display: to_display_scale(&result, result.measure),
                result,
            };
            emit(&to_json(&output)?, None, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Detect { input, alpha, model } => {
            let studies = read_studies(&input)?;
            let verdict = detect_paradox(&studies, Probability::open(alpha)?, model.into())?;
            let measure = studies[0].measure;
            let pooled_display = DisplayEffect {
                estimate: measure.to_display(verdict.pooled_estimate),
                ci: crate::effect::ConfidenceInterval {
                    lo: measure.to_display(verdict.pooled_ci.lo),
                    hi: measure.to_display(verdict.pooled_ci.hi),
                    level: verdict.pooled_ci.level,
                },
            };
            let paradox = verdict.classification == Classification::Paradox;
            let output = DetectOutput {
                schema: SCHEMA.into(),
                labels: studies.iter().map(|s| s.label.clone()).collect(),
                measure,
                verdict,
                pooled_display,
            };
            emit(&to_json(&output)?, None, stdout)?;
            Ok(if paradox { EXIT_PARADOX } else { EXIT_OK })
        }
        Command::Simulate {
            scenario,
            grid_k,
            grid_tau2,
            format,
            threads,
            out,
        } => {
            let scenario = load_scenario(&scenario, seed_override)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::domain(format!("cannot start worker threads: {e}")))?;
            let text = if grid_k.is_empty() && grid_tau2.is_empty() {
                let result = pool.install(|| simulate_scenario(&scenario))?;
                match format {
                    TableFormat::Json => to_json(&SimulateOutput {
                        schema: SCHEMA.into(),
                        scenario,
                        result,
                    })?,
                    TableFormat::Csv => single_row_csv(&scenario, &result),
                }
            } else {
                let ks = if grid_k.is_empty() { vec![scenario.k] } else { grid_k };
                let taus = if grid_tau2.is_empty() { vec![scenario.tau2] } else { grid_tau2 };
                let table = pool.install(|| sweep_grid(&scenario, &ks, &taus))?;
                match format {
                    TableFormat::Json => to_json(&SweepOutput {
                        schema: SCHEMA.into(),
                        base: scenario,
                        table,
                    })?,
                    TableFormat::Csv => table.to_csv(),
                }
            };
            emit(&text, out.as_deref(), stdout)?;
            Ok(EXIT_OK)
        }
        Command::Forest {
            input,
            format,
            out,
            model,
            level,
            width,
        } => {
            let studies = read_studies(&input)?;
            let result = meta_analyze(&studies, Probability::open(level)?, model.into())?;
            let rows = forest_rows(&studies, &result)?;
            let text = match format {
                PlotFormat::Text => render_forest_text(&rows, width.unwrap_or(100) as usize)?,
                PlotFormat::Svg => {
                    let mut opts = SvgOptions::default();
                    if let Some(w) = width {
                        opts.width = w;
                    }
                    render_forest_svg(&rows, &opts)?
                }
            };
            emit(&text, out.as_deref(), stdout)?;
            Ok(EXIT_OK)
        }
    }
}

/// Runs the CLI on `args` (including the program name). `seed_override`
/// is the value of `METAPARADOX_SEED`, if set.
pub fn run<I, T>(args: I, seed_override: Option<&str>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    EXIT_INVALID
                }
            };
        }
    };
    match execute(cli, seed_override, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
