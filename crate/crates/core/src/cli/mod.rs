//! Command-line front end: `ingest`, `analyze`, `generate` and `export`.
//!
//! Every command reads the run config (`--config` or `GRIDSCEN_CONFIG`),
//! applies flag overrides, and writes its artifacts into the output
//! directory. Later stages read the artifacts of earlier ones, so a study is
//! `ingest` → `analyze` / `generate` → `export`.

mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{RunConfig, CONFIG_ENV};

use crate::error::Error;

pub mod artifacts {
    pub const EV_SESSIONS: &str = "ev_sessions.csv";
    pub const EV_REJECTIONS: &str = "ev_rejections.csv";
    pub const PV_RECORDS: &str = "pv_records.csv";
    pub const PV_REJECTIONS: &str = "pv_rejections.csv";
    pub const LOAD_STORE: &str = "load.gslp";
    pub const LOAD_REJECTIONS: &str = "load_rejections.csv";
    pub const LOAD_REJECTED_PROFILES: &str = "load_rejected_profiles.csv";
    pub const WEATHER: &str = "weather.csv";
    pub const WEATHER_REJECTIONS: &str = "weather_rejections.csv";
    pub const EV_MODEL: &str = "ev_model.json";
    pub const EV_MARGINALS: &str = "ev_marginals.csv";
    pub const EV_SCENARIOS: &str = "ev_scenarios.csv";
    pub const EV_FANCHART: &str = "ev_fanchart.csv";
    pub const PV_QUARTILES: &str = "pv_quartiles.json";
    pub const PV_QUARTILES_TABLE: &str = "pv_quartiles.csv";
    pub const PV_FORECAST: &str = "pv_forecast.json";
    pub const PV_SCENARIOS: &str = "pv_scenarios.csv";
    pub const LOAD_METADATA: &str = "load_metadata.csv";
    pub const TABLE1: &str = "table1.json";
    pub const TABLE1_TABLE: &str = "table1.csv";
    pub const WEATHER_SLICE: &str = "weather_slice.csv";
    pub const WEATHER_DAILY: &str = "weather_daily.csv";

    pub fn peak_days(kind: &str) -> String {
        format!("peak_days_{kind}.csv")
    }

    pub fn worst_week(kind: &str) -> String {
        format!("worst_week_{kind}.json")
    }
}

#[derive(Debug, Parser)]
#[command(name = "gridscen", version, about = "Empirical scenario generation for EV, PV and consumer load studies")]
pub struct Cli {
    /// Run config (JSON). Flags override its fields.
    #[arg(long, global = true, env = "GRIDSCEN_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Analysis year.
    #[arg(long, global = true)]
    pub year: Option<i32>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a provider file and store it in canonical form.
    Ingest {
        #[command(subcommand)]
        what: IngestCmd,
    },
    /// Fit distributions and compute summaries from ingested data.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCmd,
    },
    /// Draw Monte Carlo scenarios.
    Generate {
        #[command(subcommand)]
        what: GenerateCmd,
    },
    /// Turn analysis artifacts into delimited tables.
    Export {
        #[command(subcommand)]
        what: ExportCmd,
    },
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Input file; defaults to the config's input path.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Columns are named after the record fields instead of the provider's.
    #[arg(long)]
    pub canonical: bool,
}

#[derive(Debug, Subcommand)]
pub enum IngestCmd {
    Ev(IngestArgs),
    Pv(IngestArgs),
    Load(IngestArgs),
    Weather(IngestArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Month,
    Annual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Peak,
    Reverse,
}

impl KindArg {
    fn as_str(self) -> &'static str {
        match self {
            KindArg::Peak => "peak",
            KindArg::Reverse => "reverse",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PeakSamplingArg {
    Marginal,
    Uniform,
}

#[derive(Debug, Args)]
pub struct QuartileArgs {
    #[arg(long, value_enum, default_value = "month")]
    pub scope: ScopeArg,
    /// Restrict `--scope month` to one month; all twelve otherwise.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=12))]
    pub month: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCmd {
    /// Fit the EV session model and write its marginals.
    EvDists,
    /// Per-slot quantiles of normalized PV generation.
    PvQuartiles(QuartileArgs),
    /// Forecast MSE per horizon and P10-P90 coverage.
    PvForecast {
        /// Only intervals with measured generation above zero.
        #[arg(long)]
        daylight_only: bool,
    },
    /// Per-consumer metadata and the pool summary table.
    LoadMeta,
    /// Day-of-year distribution of annual peaks and the worst window.
    Peaks {
        #[arg(long, value_enum, default_value = "peak")]
        kind: KindArg,
        /// Window length in days.
        #[arg(long)]
        window: Option<u32>,
    },
    /// Weather records and daily aggregates for a window of days.
    Weather {
        /// `start:end` days of year, inclusive. Defaults to the worst peak window.
        #[arg(long)]
        week: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum GenerateCmd {
    /// EV charging sessions.
    Ev {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum)]
        peak_sampling: Option<PeakSamplingArg>,
    },
    /// PV day profiles scaled by a sampled installed capacity.
    Pv {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=12))]
        month: Option<u32>,
        #[arg(long)]
        n: Option<usize>,
        /// `point:5`, `tri:2,5,10` or `discrete:3=0.2,5=0.5,8=0.3` (kWp).
        #[arg(long)]
        kwp_dist: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExportCmd {
    /// Percentile bands of the generated EV power profiles.
    Fanchart {
        /// Profile resolution in minutes.
        #[arg(long)]
        resolution: Option<u32>,
        /// Keep the day after arrival as separate slots.
        #[arg(long)]
        unfolded: bool,
    },
    /// The quantile profiles of `analyze pv-quartiles` as a table.
    Quartiles,
    /// The pool summary of `analyze load-meta` as a table.
    Table1,
}

fn error_line(kind: &str, module: &str, detail: &str) -> String {
    serde_json::json!({ "error": kind, "module": module, "detail": detail }).to_string()
}

/// Runs the tool on `args` (including the program name). Returns the exit
/// status; errors are reported as one JSON line on `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{}", e.render());
                return 0;
            }
            let rendered = e.render().to_string();
            let detail = rendered
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ")
                .to_string();
            let _ = writeln!(stderr, "{}", error_line("usage", "cli", &detail));
            return 2;
        }
    };
    match commands::dispatch(cli) {
        Ok(summary) => {
            let _ = writeln!(stdout, "{summary}");
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_line(e.kind(), e.module(), &e.to_string()));
            1
        }
    }
}

pub(crate) fn parse_week(raw: &str) -> Result<(u32, u32), Error> {
    let bad = || Error::InvalidArgument(format!("week {raw:?}, expected start:end"));
    let (a, b) = raw.split_once(':').ok_or_else(bad)?;
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || a > b {
        return Err(bad());
    }
    Ok((a, b))
}
