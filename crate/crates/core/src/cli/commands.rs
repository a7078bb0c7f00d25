use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::artifacts as art;
use super::output::{num, read_csv_rows, read_json_data, Meta, Outputs};
use super::{
    parse_week, AnalyzeCmd, Cli, Command, ExportCmd, GenerateCmd, IngestArgs, IngestCmd, KindArg,
    PeakSamplingArg, QuartileArgs, RunConfig, ScopeArg,
};
use crate::calendar::{SLOTS_PER_DAY, SLOT_MINUTES};
use crate::error::{Error, Result};
use crate::ev_scenario::{
    fanchart, fit_session_model, generate_batch, synthesize_power_profile, ChargingSession, FanchartTable,
    PeakSampling,
};
use crate::ingest::{
    compact_store, load_ev_dataset, load_fluvius, load_pv_dataset, load_weather, read_store, EvSchema,
    FluviusSchema, LoadReport, PvSchema, RawPVRecord, Rejection, WeatherRecord, WeatherSchema,
};
use crate::load_analytics::{
    align_weather, derived_pools, peak_day_distribution, pool_metadata, summarize, ConsumerMetadata, PeakKind,
    PoolSummary, RepresentativeWeek,
};
use crate::pv_scenario::{
    forecast_errors, generate_pv_batch, monthly_quartiles, normalize_generation, KwpDistribution,
    QuartileProfiles, QuartileScope,
};

struct Ctx {
    config: RunConfig,
    out: Outputs,
}

impl Ctx {
    fn artifact(&self, name: &str) -> PathBuf {
        self.out.path(name)
    }

    fn finish(self, mut extra: Value) -> String {
        let outputs: Vec<String> = self.out.written.iter().map(|p| p.display().to_string()).collect();
        let obj = extra.as_object_mut().expect("summary is an object");
        obj.insert("command".into(), json!(self.out.meta.command));
        obj.insert("seed".into(), json!(self.config.seed));
        obj.insert("outputs".into(), json!(outputs));
        extra.to_string()
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Ingest { what } => match what {
            IngestCmd::Ev(_) => "ingest ev",
            IngestCmd::Pv(_) => "ingest pv",
            IngestCmd::Load(_) => "ingest load",
            IngestCmd::Weather(_) => "ingest weather",
        },
        Command::Analyze { what } => match what {
            AnalyzeCmd::EvDists => "analyze ev-dists",
            AnalyzeCmd::PvQuartiles(_) => "analyze pv-quartiles",
            AnalyzeCmd::PvForecast { .. } => "analyze pv-forecast",
            AnalyzeCmd::LoadMeta => "analyze load-meta",
            AnalyzeCmd::Peaks { .. } => "analyze peaks",
            AnalyzeCmd::Weather { .. } => "analyze weather",
        },
        Command::Generate { what } => match what {
            GenerateCmd::Ev { .. } => "generate ev",
            GenerateCmd::Pv { .. } => "generate pv",
        },
        Command::Export { what } => match what {
            ExportCmd::Fanchart { .. } => "export fanchart",
            ExportCmd::Quartiles => "export quartiles",
            ExportCmd::Table1 => "export table1",
        },
    }
}

/// Applies the flags that override config fields.
fn apply_overrides(config: &mut RunConfig, cli: &Cli) -> Result<()> {
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(year) = cli.year {
        config.year = year;
    }
    match &cli.command {
        Command::Ingest { what } => {
            let (args, slot) = match what {
                IngestCmd::Ev(a) => (a, &mut config.inputs.ev),
                IngestCmd::Pv(a) => (a, &mut config.inputs.pv),
                IngestCmd::Load(a) => (a, &mut config.inputs.load),
                IngestCmd::Weather(a) => (a, &mut config.inputs.weather),
            };
            if let Some(p) = &args.input {
                *slot = Some(p.clone());
            }
            if args.canonical {
                match what {
                    IngestCmd::Ev(_) => config.schemas.ev = EvSchema::canonical(),
                    IngestCmd::Pv(_) => config.schemas.pv = PvSchema::canonical(),
                    IngestCmd::Load(_) => config.schemas.load = FluviusSchema::canonical(),
                    IngestCmd::Weather(_) => config.schemas.weather = WeatherSchema::default(),
                }
            }
        }
        Command::Analyze { what } => match what {
            AnalyzeCmd::PvForecast { daylight_only } if *daylight_only => config.daylight_only = true,
            AnalyzeCmd::Peaks { window: Some(w), .. } => config.window_days = *w,
            _ => {}
        },
        Command::Generate { what } => match what {
            GenerateCmd::Ev { n, peak_sampling } => {
                if let Some(n) = n {
                    config.scenarios = *n;
                }
                if let Some(p) = peak_sampling {
                    config.generation.peak_sampling = match p {
                        PeakSamplingArg::Marginal => PeakSampling::Marginal,
                        PeakSamplingArg::Uniform => PeakSampling::Uniform,
                    };
                }
            }
            GenerateCmd::Pv { month, n, kwp_dist } => {
                if let Some(n) = n {
                    config.scenarios = *n;
                }
                if let Some(m) = month {
                    config.pv_month = *m;
                }
                if let Some(k) = kwp_dist {
                    config.kwp_dist = k.clone();
                }
            }
        },
        Command::Export { what } => {
            if let ExportCmd::Fanchart { resolution, unfolded } = what {
                if let Some(r) = resolution {
                    config.resolution_min = *r;
                }
                if *unfolded {
                    config.fold_profiles = false;
                }
            }
        }
    }
    Ok(())
}

pub(super) fn dispatch(cli: Cli) -> Result<String> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut config, &cli)?;
    if let Some(n) = cli.threads {
        // A pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let name = command_name(&cli.command);
    let meta = Meta::new(name, config.seed, config.hash());
    let out = Outputs::new(config.output_dir.clone(), meta)?;
    let mut ctx = Ctx { config, out };
    let extra = match cli.command {
        Command::Ingest { what } => match what {
            IngestCmd::Ev(a) => ingest_ev(&mut ctx, &a)?,
            IngestCmd::Pv(a) => ingest_pv(&mut ctx, &a)?,
            IngestCmd::Load(a) => ingest_load(&mut ctx, &a)?,
            IngestCmd::Weather(a) => ingest_weather(&mut ctx, &a)?,
        },
        Command::Analyze { what } => match what {
            AnalyzeCmd::EvDists => analyze_ev(&mut ctx)?,
            AnalyzeCmd::PvQuartiles(q) => analyze_quartiles(&mut ctx, &q)?,
            AnalyzeCmd::PvForecast { .. } => analyze_forecast(&mut ctx)?,
            AnalyzeCmd::LoadMeta => analyze_load_meta(&mut ctx)?,
            AnalyzeCmd::Peaks { kind, .. } => analyze_peaks(&mut ctx, kind)?,
            AnalyzeCmd::Weather { week } => analyze_weather(&mut ctx, week.as_deref())?,
        },
        Command::Generate { what } => match what {
            GenerateCmd::Ev { .. } => generate_ev(&mut ctx)?,
            GenerateCmd::Pv { .. } => generate_pv(&mut ctx)?,
        },
        Command::Export { what } => match what {
            ExportCmd::Fanchart { .. } => export_fanchart(&mut ctx)?,
            ExportCmd::Quartiles => export_quartiles(&mut ctx)?,
            ExportCmd::Table1 => export_table1(&mut ctx)?,
        },
    };
    Ok(ctx.finish(extra))
}

fn input_path(configured: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    configured
        .clone()
        .ok_or_else(|| Error::MissingInput(format!("no {what} input given (--in or config inputs.{what})")))
}

/// Refuses to overwrite the file being read.
fn check_distinct(input: &Path, output: &Path) -> Result<()> {
    if let (Ok(a), Ok(b)) = (input.canonicalize(), output.canonicalize()) {
        if a == b {
            return Err(Error::InvalidArgument(format!(
                "output {} would overwrite the input",
                output.display()
            )));
        }
    }
    Ok(())
}

fn write_rejections(ctx: &mut Ctx, name: &str, rejected: &[Rejection]) -> Result<()> {
    ctx.out.csv(
        name,
        &["row", "reason"],
        rejected.iter().map(|r| [r.row.to_string(), r.reason.clone()]),
    )?;
    Ok(())
}

fn report_summary<T>(rep: &LoadReport<T>) -> Value {
    json!({
        "input_rows": rep.input_rows,
        "accepted": rep.records.len(),
        "rejected": rep.rejected.len(),
        "filtered": rep.filtered,
        "warnings": rep.warnings,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn ingest_ev(ctx: &mut Ctx, _: &IngestArgs) -> Result<Value> {
    let input = input_path(&ctx.config.inputs.ev, "ev")?;
    check_distinct(&input, &ctx.artifact(art::EV_SESSIONS))?;
    let rep = load_ev_dataset(&input, &ctx.config.schemas.ev)?;
    let c = EvSchema::canonical();
    ctx.out.csv(
        art::EV_SESSIONS,
        &[
            &c.session_id,
            &c.arrival,
            &c.departure,
            &c.connection_time,
            &c.charge_time,
            &c.peak_power,
            &c.charged_energy,
        ],
        rep.records.iter().map(|r| {
            [
                r.session_id.clone(),
                r.arrival.to_string(),
                r.departure.to_string(),
                num(r.connection_time),
                num(r.charge_time),
                num(r.peak_power),
                num(r.charged_energy),
            ]
        }),
    )?;
    write_rejections(ctx, art::EV_REJECTIONS, &rep.rejected)?;
    Ok(report_summary(&rep))
}

fn load_canonical_pv(ctx: &Ctx) -> Result<Vec<RawPVRecord>> {
    let path = ctx.artifact(art::PV_RECORDS);
    if !path.exists() {
        return Err(Error::MissingInput(format!("{}; run `ingest pv` first", path.display())));
    }
    Ok(load_pv_dataset(&path, &PvSchema::canonical(), &ctx.config.calendar())?.records)
}

fn ingest_pv(ctx: &mut Ctx, _: &IngestArgs) -> Result<Value> {
    let input = input_path(&ctx.config.inputs.pv, "pv")?;
    check_distinct(&input, &ctx.artifact(art::PV_RECORDS))?;
    let rep = load_pv_dataset(&input, &ctx.config.schemas.pv, &ctx.config.calendar())?;
    let c = PvSchema::canonical();
    let name = |o: &Option<String>| o.clone().unwrap_or_default();
    let columns = [
        c.timestamp.clone(),
        c.measured_upscaled.clone(),
        name(&c.forecast_week_ahead),
        name(&c.forecast_day_ahead),
        name(&c.forecast_hour_ahead),
        name(&c.p10),
        name(&c.p90),
        c.monitored_capacity.clone(),
        name(&c.load_factor),
    ];
    let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
    ctx.out.csv(
        art::PV_RECORDS,
        &columns,
        rep.records.iter().map(|r| {
            [
                r.timestamp.to_string(),
                num(r.measured_upscaled),
                opt(r.forecast_week_ahead),
                opt(r.forecast_day_ahead),
                opt(r.forecast_hour_ahead),
                opt(r.p10),
                opt(r.p90),
                num(r.monitored_capacity),
                opt(r.load_factor),
            ]
        }),
    )?;
    write_rejections(ctx, art::PV_REJECTIONS, &rep.rejected)?;
    Ok(report_summary(&rep))
}

fn ingest_load(ctx: &mut Ctx, _: &IngestArgs) -> Result<Value> {
    let input = input_path(&ctx.config.inputs.load, "load")?;
    let store = ctx.artifact(art::LOAD_STORE);
    check_distinct(&input, &store)?;
    let cal = ctx.config.calendar();
    let loaded = load_fluvius(&input, &ctx.config.schemas.load, &cal)?;
    let m = &ctx.out.meta;
    let meta: BTreeMap<String, String> = [
        ("tool", m.tool.clone()),
        ("command", m.command.clone()),
        ("seed", m.seed.to_string()),
        ("config", m.config.clone()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let manifest = compact_store(&loaded.profiles, &cal, &store, meta)?;
    ctx.out.record(store.clone());
    ctx.out.record(crate::ingest::store::manifest_path(&store));
    write_rejections(ctx, art::LOAD_REJECTIONS, &loaded.rejected_rows)?;
    ctx.out.csv(
        art::LOAD_REJECTED_PROFILES,
        &["consumer_id", "first_missing", "intervals_present"],
        loaded.rejected_profiles.iter().map(|p| {
            [
                p.consumer_id.clone(),
                p.first_missing.to_string(),
                p.intervals_present.to_string(),
            ]
        }),
    )?;
    Ok(json!({
        "input_rows": loaded.input_rows,
        "consumers": manifest.consumer_count,
        "type_counts": manifest.type_counts,
        "rejected_rows": loaded.rejected_rows.len(),
        "rejected_profiles": loaded.rejected_profiles.len(),
        "store_bytes": manifest.store_bytes,
    }))
}

const WEATHER_COLUMNS: [&str; 8] = [
    "timestamp",
    "ambient_temp",
    "wind_speed",
    "humidity",
    "wind_direction",
    "ghi",
    "dhi",
    "rainfall",
];

fn weather_row(r: &WeatherRecord) -> [String; 8] {
    [
        r.timestamp.to_string(),
        num(r.ambient_temp),
        num(r.wind_speed),
        num(r.humidity),
        num(r.wind_direction),
        num(r.ghi),
        num(r.dhi),
        num(r.rainfall),
    ]
}

fn ingest_weather(ctx: &mut Ctx, _: &IngestArgs) -> Result<Value> {
    let input = input_path(&ctx.config.inputs.weather, "weather")?;
    check_distinct(&input, &ctx.artifact(art::WEATHER))?;
    let rep = load_weather(&input, &ctx.config.schemas.weather)?;
    ctx.out.csv(art::WEATHER, &WEATHER_COLUMNS, rep.records.iter().map(weather_row))?;
    write_rejections(ctx, art::WEATHER_REJECTIONS, &rep.rejected)?;
    Ok(report_summary(&rep))
}

fn ingested_sessions(ctx: &Ctx) -> Result<Vec<crate::ingest::RawSessionRecord>> {
    let path = ctx.artifact(art::EV_SESSIONS);
    if !path.exists() {
        return Err(Error::MissingInput(format!("{}; run `ingest ev` first", path.display())));
    }
    Ok(load_ev_dataset(&path, &EvSchema::canonical())?.records)
}

fn analyze_ev(ctx: &mut Ctx) -> Result<Value> {
    let records = ingested_sessions(ctx)?;
    let (model, summary) = fit_session_model(&records, &ctx.config.bins)?;
    ctx.out.json(art::EV_MODEL, &model)?;
    let mut rows = Vec::new();
    for (name, hist) in [
        ("arrival", &model.pdf_arrival),
        ("peak_power", &model.pdf_peak_power),
    ] {
        let t = hist.to_table();
        for i in 0..t.counts.len() {
            rows.push([
                name.to_string(),
                num(t.edges[i]),
                num(t.edges[i + 1]),
                t.counts[i].to_string(),
                num(t.probabilities[i]),
            ]);
        }
    }
    ctx.out.csv(
        art::EV_MARGINALS,
        &["variable", "bin_lower", "bin_upper", "count", "probability"],
        rows,
    )?;
    Ok(serde_json::to_value(summary).expect("summary serializes"))
}

#[derive(Serialize, Deserialize)]
struct SessionRow {
    scenario: usize,
    #[serde(flatten)]
    session: ChargingSession,
}

const SESSION_COLUMNS: [&str; 7] = [
    "scenario",
    "arrival_h",
    "departure_h",
    "connection_h",
    "charge_h",
    "peak_kw",
    "energy_kwh",
];

fn generate_ev(ctx: &mut Ctx) -> Result<Value> {
    let records = ingested_sessions(ctx)?;
    let (model, _) = fit_session_model(&records, &ctx.config.bins)?;
    let batch = generate_batch(&model, ctx.config.scenarios, ctx.config.seed, &ctx.config.generation)?;
    ctx.out.csv(
        art::EV_SCENARIOS,
        &SESSION_COLUMNS,
        batch.sessions.iter().enumerate().map(|(i, s)| {
            [
                i.to_string(),
                num(s.arrival_h),
                num(s.departure_h),
                num(s.connection_h),
                num(s.charge_h),
                num(s.peak_kw),
                num(s.energy_kwh),
            ]
        }),
    )?;
    Ok(json!({
        "scenarios": batch.sessions.len(),
        "attempts": batch.stats.attempts,
        "restarts_no_occurrence": batch.stats.no_occurrence,
        "restarts_inconsistent": batch.stats.inconsistent,
        "max_attempts_single": batch.max_attempts_used,
    }))
}

fn slot_time(slot: usize, minutes: u32) -> String {
    let m = slot as u32 * minutes;
    format!("{:02}:{:02}", (m / 60) % 24 + 24 * (m / 1440), m % 60)
}

fn level_column(l: f64) -> String {
    format!("p{}", num(l))
}

fn export_fanchart(ctx: &mut Ctx) -> Result<Value> {
    let path = ctx.artifact(art::EV_SCENARIOS);
    if !path.exists() {
        return Err(Error::MissingInput(format!("{}; run `generate ev` first", path.display())));
    }
    let rows: Vec<SessionRow> = read_csv_rows(&path)?;
    let res = ctx.config.resolution_min;
    let profiles = rows
        .iter()
        .map(|r| {
            synthesize_power_profile(&r.session, res).map(|p| if ctx.config.fold_profiles { p.folded() } else { p })
        })
        .collect::<Result<Vec<_>>>()?;
    let FanchartTable { levels, values, .. } = fanchart(&profiles, &ctx.config.fan_levels)?;
    let mut columns = vec!["slot".to_string(), "time".to_string()];
    columns.extend(levels.iter().map(|&l| level_column(l)));
    let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
    let slots = values.first().map_or(0, Vec::len);
    ctx.out.csv(
        art::EV_FANCHART,
        &columns,
        (0..slots).map(|k| {
            let mut row = vec![k.to_string(), slot_time(k, res)];
            row.extend(values.iter().map(|v| num(v[k])));
            row
        }),
    )?;
    Ok(json!({ "profiles": profiles.len(), "slots": slots, "resolution_min": res }))
}

fn quartile_scopes(q: &QuartileArgs) -> Vec<QuartileScope> {
    match (q.scope, q.month) {
        (ScopeArg::Annual, _) => vec![QuartileScope::Annual],
        (ScopeArg::Month, Some(m)) => vec![QuartileScope::Month(m)],
        (ScopeArg::Month, None) => (1..=12).map(QuartileScope::Month).collect(),
    }
}

fn analyze_quartiles(ctx: &mut Ctx, q: &QuartileArgs) -> Result<Value> {
    let records = load_canonical_pv(ctx)?;
    let series = normalize_generation(&records, &ctx.config.calendar())?;
    let scopes = quartile_scopes(q);
    let single = scopes.len() == 1;
    let mut profiles = Vec::new();
    let mut skipped = Vec::new();
    for scope in scopes {
        match monthly_quartiles(&series, scope, &ctx.config.pv_levels) {
            Ok(p) => profiles.push(p),
            Err(Error::EmptyScope(_)) if !single => skipped.push(scope.to_string()),
            Err(e) => return Err(e),
        }
    }
    if profiles.is_empty() {
        return Err(Error::EmptyScope("PV months".into()));
    }
    ctx.out.json(art::PV_QUARTILES, &profiles)?;
    Ok(json!({
        "days": series.days.len(),
        "dropped_days": series.dropped_days,
        "fraction_above_one": series.fraction_above_one(),
        "load_factor_discrepancies": series.load_factor_discrepancies,
        "scopes": profiles.len(),
        "empty_scopes": skipped,
    }))
}

fn export_quartiles(ctx: &mut Ctx) -> Result<Value> {
    let path = ctx.artifact(art::PV_QUARTILES);
    let profiles: Vec<QuartileProfiles> = read_json_data(&path)
        .map_err(|e| match e {
            Error::MissingInput(p) => Error::MissingInput(format!("{p}; run `analyze pv-quartiles` first")),
            e => e,
        })?;
    let levels = profiles.first().map(|p| p.levels.clone()).unwrap_or_default();
    let mut columns = vec!["scope".to_string(), "slot".to_string(), "time".to_string()];
    columns.extend(levels.iter().map(|&l| level_column(l)));
    let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    for p in &profiles {
        let scope = match p.scope {
            QuartileScope::Month(m) => format!("month-{m:02}"),
            QuartileScope::Annual => "annual".into(),
        };
        for slot in 0..SLOTS_PER_DAY {
            let mut row = vec![scope.clone(), slot.to_string(), slot_time(slot, SLOT_MINUTES as u32)];
            row.extend(p.values.iter().map(|v| num(v[slot])));
            rows.push(row);
        }
    }
    ctx.out.csv(art::PV_QUARTILES_TABLE, &columns, rows)?;
    Ok(json!({ "scopes": profiles.len() }))
}

fn analyze_forecast(ctx: &mut Ctx) -> Result<Value> {
    let records = load_canonical_pv(ctx)?;
    let report = forecast_errors(&records, ctx.config.daylight_only)?;
    ctx.out.json(art::PV_FORECAST, &report)?;
    Ok(serde_json::to_value(report).expect("report serializes"))
}

fn generate_pv(ctx: &mut Ctx) -> Result<Value> {
    let kwp: KwpDistribution = ctx.config.kwp_dist.parse()?;
    let records = load_canonical_pv(ctx)?;
    let series = normalize_generation(&records, &ctx.config.calendar())?;
    let month = ctx.config.pv_month;
    let batch = generate_pv_batch(&series, month, &kwp, ctx.config.scenarios, ctx.config.seed)?;
    let mut rows = Vec::with_capacity(batch.len() * SLOTS_PER_DAY);
    for (i, s) in batch.iter().enumerate() {
        for (slot, p) in s.power_kw.iter().enumerate() {
            rows.push([
                i.to_string(),
                s.source_day.to_string(),
                s.month.to_string(),
                num(s.kwp),
                slot.to_string(),
                num(*p),
            ]);
        }
    }
    ctx.out.csv(
        art::PV_SCENARIOS,
        &["scenario", "source_day", "month", "kwp", "slot", "power_kw"],
        rows,
    )?;
    let mean_kwp = batch.iter().map(|s| s.kwp).sum::<f64>() / batch.len() as f64;
    Ok(json!({
        "scenarios": batch.len(),
        "month": month,
        "kwp_dist": kwp.to_string(),
        "mean_kwp": mean_kwp,
        "pool_days": series.month_pool(month).len(),
    }))
}

fn store_metadata(ctx: &Ctx) -> Result<Vec<ConsumerMetadata>> {
    let (cal, profiles) = read_store(&ctx.artifact(art::LOAD_STORE))?;
    Ok(pool_metadata(&profiles, &cal))
}

fn summary_rows(all: &[ConsumerMetadata]) -> Result<Vec<PoolSummary>> {
    derived_pools(all)
        .iter()
        .filter(|p| !p.members.is_empty())
        .map(|p| summarize(&p.label, &p.members, p.denominator))
        .collect()
}

fn analyze_load_meta(ctx: &mut Ctx) -> Result<Value> {
    let meta = store_metadata(ctx)?;
    ctx.out.csv(
        art::LOAD_METADATA,
        &[
            "consumer_id",
            "consumer_type",
            "annual_net_kwh",
            "peak_kw",
            "peak_time",
            "peak_month",
            "peak_day_of_year",
            "reverse_peak_kw",
            "reverse_peak_time",
            "reverse_peak_month",
            "reverse_peak_day_of_year",
        ],
        meta.iter().map(|m| {
            [
                m.consumer_id.clone(),
                m.consumer_type.code().to_string(),
                num(m.annual_net_kwh),
                num(m.peak_kw),
                num(m.peak_time),
                m.peak_month.to_string(),
                m.peak_day_of_year.to_string(),
                num(m.reverse_peak_kw),
                num(m.reverse_peak_time),
                m.reverse_peak_month.to_string(),
                m.reverse_peak_day_of_year.to_string(),
            ]
        }),
    )?;
    let table = summary_rows(&meta)?;
    ctx.out.json(art::TABLE1, &table)?;
    Ok(json!({ "consumers": meta.len(), "pools": table.len() }))
}

fn export_table1(ctx: &mut Ctx) -> Result<Value> {
    let table: Vec<PoolSummary> = read_json_data(&ctx.artifact(art::TABLE1)).map_err(|e| match e {
        Error::MissingInput(p) => Error::MissingInput(format!("{p}; run `analyze load-meta` first")),
        e => e,
    })?;
    ctx.out.csv(
        art::TABLE1_TABLE,
        &PoolSummary::COLUMNS,
        table.iter().map(|s| {
            [
                s.label.clone(),
                s.consumer_count.to_string(),
                num(s.probability),
                num(s.mean_net_kwh),
                num(s.max_net_kwh),
                num(s.min_net_kwh),
                num(s.mean_peak_kw),
                num(s.mean_reverse_kw),
                num(s.mode_peak_time),
                s.mode_peak_month.to_string(),
                num(s.mode_reverse_peak_time),
                s.mode_reverse_peak_month.to_string(),
            ]
        }),
    )?;
    Ok(json!({ "rows": table.len() }))
}

fn analyze_peaks(ctx: &mut Ctx, kind: KindArg) -> Result<Value> {
    let meta = store_metadata(ctx)?;
    let cal = ctx.config.calendar();
    let refs: Vec<&ConsumerMetadata> = meta.iter().collect();
    let peak_kind = match kind {
        KindArg::Peak => PeakKind::Peak,
        KindArg::Reverse => PeakKind::Reverse,
    };
    let hist = peak_day_distribution(&refs, peak_kind, &cal);
    let week = crate::load_analytics::worst_week(&hist, ctx.config.window_days)?;
    ctx.out.csv(
        &art::peak_days(kind.as_str()),
        &["day_of_year", "count"],
        hist.counts
            .iter()
            .enumerate()
            .map(|(i, c)| [(i + 1).to_string(), c.to_string()]),
    )?;
    ctx.out.json(&art::worst_week(kind.as_str()), &week)?;
    Ok(json!({
        "kind": kind.as_str(),
        "window_days": ctx.config.window_days,
        "start_day": week.start_day,
        "end_day": week.end_day,
        "fraction": week.fraction,
    }))
}

fn analyze_weather(ctx: &mut Ctx, week: Option<&str>) -> Result<Value> {
    let cal = ctx.config.calendar();
    let window = match week {
        Some(raw) => {
            let (start_day, end_day) = parse_week(raw)?;
            if end_day > cal.days() {
                return Err(Error::InvalidArgument(format!("week {raw:?} beyond day {}", cal.days())));
            }
            RepresentativeWeek {
                start_day,
                end_day,
                fraction: 0.0,
            }
        }
        None => read_json_data(&ctx.artifact(&art::worst_week("peak"))).map_err(|e| match e {
            Error::MissingInput(p) => {
                Error::MissingInput(format!("{p}; give --week or run `analyze peaks` first"))
            }
            e => e,
        })?,
    };
    let path = ctx.artifact(art::WEATHER);
    if !path.exists() {
        return Err(Error::MissingInput(format!("{}; run `ingest weather` first", path.display())));
    }
    let weather = load_weather(&path, &WeatherSchema::default())?.records;
    let slice = align_weather(&weather, &window, &cal)?;
    ctx.out.csv(art::WEATHER_SLICE, &WEATHER_COLUMNS, slice.records.iter().map(weather_row))?;
    ctx.out.csv(
        art::WEATHER_DAILY,
        &["day_of_year", "records", "mean_temp", "total_rainfall", "daylight_ghi_wh_m2"],
        slice.daily.iter().map(|d| {
            [
                d.day_of_year.to_string(),
                d.records.to_string(),
                num(d.mean_temp),
                num(d.total_rainfall),
                num(d.daylight_ghi_wh_m2),
            ]
        }),
    )?;
    Ok(json!({
        "start_day": window.start_day,
        "end_day": window.end_day,
        "records": slice.records.len(),
        "days": slice.daily.len(),
    }))
}
