use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::{
    check_rejections, field, optional_number, required_number, Delimited, LoadReport, Rejection,
    TextFormat,
};
use crate::calendar::{parse_timestamp, Calendar};
use crate::error::Result;

/// One quarter-hour of the national PV generation record (MW).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawPVRecord {
    pub timestamp: NaiveDateTime,
    pub measured_upscaled: f64,
    pub forecast_week_ahead: Option<f64>,
    pub forecast_day_ahead: Option<f64>,
    pub forecast_hour_ahead: Option<f64>,
    pub p10: Option<f64>,
    pub p90: Option<f64>,
    pub monitored_capacity: f64,
    /// Published generation / capacity ratio, as a fraction.
    pub load_factor: Option<f64>,
}

impl RawPVRecord {
    pub fn violation(&self) -> Option<String> {
        if !(self.monitored_capacity > 0.0) {
            return Some("non-positive capacity".into());
        }
        if self.measured_upscaled < 0.0 {
            return Some("negative measured generation".into());
        }
        if let (Some(lo), Some(hi)) = (self.p10, self.p90) {
            if lo > hi {
                return Some("p10 exceeds p90".into());
            }
        }
        None
    }
}

/// Keep only rows whose `column` equals `value`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFilter {
    pub column: String,
    pub value: String,
}

/// Column roles for the PV generation file. Defaults follow Elia's solar
/// generation open-data export (semicolon separated, one row per region and
/// quarter-hour, filtered to the national aggregate).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PvSchema {
    #[serde(flatten)]
    pub format: TextFormat,
    pub timestamp: String,
    pub measured_upscaled: String,
    pub forecast_week_ahead: Option<String>,
    pub forecast_day_ahead: Option<String>,
    pub forecast_hour_ahead: Option<String>,
    pub p10: Option<String>,
    pub p90: Option<String>,
    pub monitored_capacity: String,
    pub load_factor: Option<String>,
    /// The load-factor column is published in percent.
    pub load_factor_percent: bool,
    pub filter: Option<RowFilter>,
}

impl Default for PvSchema {
    fn default() -> Self {
        PvSchema {
            format: TextFormat::with_delimiter(';'),
            timestamp: "Datetime".into(),
            measured_upscaled: "Measured & Upscaled".into(),
            forecast_week_ahead: Some("Week-ahead forecast".into()),
            forecast_day_ahead: Some("Day Ahead 11AM forecast".into()),
            forecast_hour_ahead: Some("Most recent forecast".into()),
            p10: Some("Most recent P10".into()),
            p90: Some("Most recent P90".into()),
            monitored_capacity: "Monitored capacity".into(),
            load_factor: Some("Load factor".into()),
            load_factor_percent: true,
            filter: Some(RowFilter {
                column: "Region".into(),
                value: "Belgium".into(),
            }),
        }
    }
}

impl PvSchema {
    pub fn canonical() -> Self {
        PvSchema {
            format: TextFormat::default(),
            timestamp: "timestamp".into(),
            measured_upscaled: "measured_upscaled".into(),
            forecast_week_ahead: Some("forecast_week_ahead".into()),
            forecast_day_ahead: Some("forecast_day_ahead".into()),
            forecast_hour_ahead: Some("forecast_hour_ahead".into()),
            p10: Some("p10".into()),
            p90: Some("p90".into()),
            monitored_capacity: "monitored_capacity".into(),
            load_factor: Some("load_factor".into()),
            load_factor_percent: false,
            filter: None,
        }
    }
}

/// Loads PV records in the analysis year, sorted by timestamp (stable with
/// respect to file order). A year that is not exactly complete produces a
/// warning, not an error.
pub fn load_pv_dataset(
    path: &Path,
    schema: &PvSchema,
    calendar: &Calendar,
) -> Result<LoadReport<RawPVRecord>> {
    let mut table = Delimited::open(path, &schema.format)?;
    let req = table.require(&[
        &schema.timestamp,
        &schema.measured_upscaled,
        &schema.monitored_capacity,
    ])?;
    let opt = [
        &schema.forecast_week_ahead,
        &schema.forecast_day_ahead,
        &schema.forecast_hour_ahead,
        &schema.p10,
        &schema.p90,
        &schema.load_factor,
    ]
    .into_iter()
    .map(|c| table.optional(c.as_deref()))
    .collect::<Result<Vec<_>>>()?;
    let filter = match &schema.filter {
        Some(f) => Some((table.require(&[&f.column])?[0], f.value.as_str())),
        None => None,
    };
    let fmt = &schema.format;
    let lf_scale = if schema.load_factor_percent { 0.01 } else { 1.0 };

    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let mut filtered = 0;
    let input_rows = table.for_each_row(|row, rec| {
        if let Some((col, want)) = filter {
            if field(rec, col) != want {
                filtered += 1;
                return Ok(());
            }
        }
        let parsed = (|| {
            let raw_ts = field(rec, req[0]);
            let timestamp = parse_timestamp(raw_ts, &fmt.datetime_formats)
                .ok_or_else(|| format!("unparsable timestamp {raw_ts:?}"))?;
            if calendar.day_of_year(&timestamp).is_none() {
                return Err(format!("outside analysis year {}", calendar.year));
            }
            let num = |i: Option<usize>, role: &str| optional_number(rec, i, role, fmt.decimal_comma);
            Ok(RawPVRecord {
                timestamp,
                measured_upscaled: required_number(rec, req[1], "measured generation", fmt.decimal_comma)?,
                monitored_capacity: required_number(rec, req[2], "monitored capacity", fmt.decimal_comma)?,
                forecast_week_ahead: num(opt[0], "week-ahead forecast")?,
                forecast_day_ahead: num(opt[1], "day-ahead forecast")?,
                forecast_hour_ahead: num(opt[2], "hour-ahead forecast")?,
                p10: num(opt[3], "p10")?,
                p90: num(opt[4], "p90")?,
                load_factor: num(opt[5], "load factor")?.map(|v| v * lf_scale),
            })
        })();
        match parsed {
            Ok(r) => match r.violation() {
                None => records.push(r),
                Some(reason) => rejected.push(Rejection { row, reason }),
            },
            Err(reason) => rejected.push(Rejection { row, reason }),
        }
        Ok(())
    })?;
    check_rejections(&rejected, input_rows - filtered, fmt.max_reject_fraction)?;
    records.sort_by_key(|r| r.timestamp);

    let mut warnings = Vec::new();
    let expected = calendar.intervals();
    if records.len() != expected {
        warnings.push(format!(
            "{} records for {}, expected {expected} quarter-hours",
            records.len(),
            calendar.year
        ));
    }
    Ok(LoadReport {
        records,
        rejected,
        filtered,
        input_rows,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    const HEADER: &str = "timestamp,measured_upscaled,forecast_week_ahead,forecast_day_ahead,\
forecast_hour_ahead,p10,p90,monitored_capacity,load_factor";

    fn load(body: &str) -> LoadReport<RawPVRecord> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{HEADER}").unwrap();
        f.write_all(body.as_bytes()).unwrap();
        load_pv_dataset(f.path(), &PvSchema::canonical(), &Calendar::default()).unwrap()
    }

    fn ok_rows(n: usize) -> String {
        (0..n)
            .map(|i| format!("2022-06-01 {:02}:{:02},1,1,1,1,0.5,1.5,10,0.1\n", i / 4, (i % 4) * 15))
            .collect()
    }

    #[test]
    fn zero_capacity_rejected() {
        let rep = load(&(ok_rows(10) + "2022-06-02 00:00,1,1,1,1,0.5,1.5,0,0.1\n"));
        assert_eq!(rep.rejected.len(), 1);
        assert_eq!(rep.rejected[0].reason, "non-positive capacity");
    }

    #[test]
    fn inverted_interval_rejected() {
        let rep = load(&(ok_rows(10) + "2022-06-02 00:00,1,1,1,1,2,1.5,10,0.1\n"));
        assert_eq!(rep.rejected[0].reason, "p10 exceeds p90");
    }

    #[test]
    fn partial_year_warns_and_empty_optionals_are_none() {
        let rep = load(&(ok_rows(4) + "2022-06-02 00:00,0,,,,,,10,\n"));
        assert_eq!(rep.records.len(), 5);
        assert_eq!(rep.warnings.len(), 1);
        assert!(rep.warnings[0].contains("expected 35040"));
        assert_eq!(rep.records[4].forecast_day_ahead, None);
        assert_eq!(rep.records[4].load_factor, None);
    }

    #[test]
    fn full_year_has_no_warning() {
        let cal = Calendar::default();
        let mut body = String::new();
        for ts in cal.expected_timestamps(crate::calendar::ClockConvention::Uniform) {
            body += &format!("{},0,0,0,0,0,0,1,0\n", ts.format("%Y-%m-%d %H:%M"));
        }
        let rep = load(&body);
        assert_eq!(rep.records.len(), 35_040);
        assert!(rep.warnings.is_empty());
    }

    #[test]
    fn provider_layout_with_region_filter() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "Datetime;Resolution code;Region;Measured & Upscaled;Most recent forecast;Most recent P10;Most recent P90;Day Ahead 11AM forecast;Week-ahead forecast;Monitored capacity;Load factor").unwrap();
        writeln!(f, "2022-06-01T12:00:00+02:00;PT15M;Belgium;2500;2400;2000;2800;2300;2100;6000;41.67").unwrap();
        writeln!(f, "2022-06-01T12:00:00+02:00;PT15M;Antwerp;300;290;250;320;280;260;700;42.86").unwrap();
        let rep = load_pv_dataset(f.path(), &PvSchema::default(), &Calendar::default()).unwrap();
        assert_eq!(rep.input_rows, 2);
        assert_eq!(rep.filtered, 1);
        assert_eq!(rep.records.len(), 1);
        let r = &rep.records[0];
        assert_eq!(r.measured_upscaled, 2500.0);
        assert!((r.load_factor.unwrap() - 0.4167).abs() < 1e-12);
        assert_eq!(r.forecast_week_ahead, Some(2100.0));
    }
}
