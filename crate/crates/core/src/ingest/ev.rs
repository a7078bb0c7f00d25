use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::{check_rejections, field, required_number, Delimited, LoadReport, Rejection, TextFormat};
use crate::calendar::parse_timestamp;
use crate::error::Result;

/// Largest peak power a session may report.
pub const MAX_PEAK_KW: f64 = 23.0;
/// Slack allowed when charge time is compared with connection time.
pub const CHARGE_SLACK_H: f64 = 0.01;

/// One charging event as published.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSessionRecord {
    pub session_id: String,
    pub arrival: NaiveDateTime,
    pub departure: NaiveDateTime,
    /// Hours.
    pub connection_time: f64,
    /// Hours.
    pub charge_time: f64,
    /// kW.
    pub peak_power: f64,
    /// kWh.
    pub charged_energy: f64,
}

impl RawSessionRecord {
    /// Connection span derived from the timestamps, in hours.
    pub fn span_hours(&self) -> f64 {
        (self.departure - self.arrival).num_seconds() as f64 / 3600.0
    }

    /// The first violated invariant, if any.
    pub fn violation(&self) -> Option<String> {
        if self.departure < self.arrival {
            return Some("departure before arrival".into());
        }
        let span = self.span_hours();
        if span >= 24.0 {
            return Some(format!("multi-day session ({span:.2} h) outside model range"));
        }
        if self.connection_time < 0.0 || self.charge_time < 0.0 {
            return Some("negative duration".into());
        }
        if self.charge_time > self.connection_time + CHARGE_SLACK_H {
            return Some("charge exceeds connection".into());
        }
        if !(0.0..=MAX_PEAK_KW).contains(&self.peak_power) {
            return Some(format!("peak power {} outside [0, {MAX_PEAK_KW}] kW", self.peak_power));
        }
        if self.charged_energy < 0.0 {
            return Some("negative charged energy".into());
        }
        None
    }
}

/// Column roles for the EV session file. Defaults follow the ElaadNL open
/// charging-session export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvSchema {
    #[serde(flatten)]
    pub format: TextFormat,
    pub session_id: String,
    pub arrival: String,
    pub departure: String,
    pub connection_time: String,
    pub charge_time: String,
    pub peak_power: String,
    pub charged_energy: String,
}

impl Default for EvSchema {
    fn default() -> Self {
        EvSchema {
            format: TextFormat::default(),
            session_id: "TransactionId".into(),
            arrival: "UTCTransactionStart".into(),
            departure: "UTCTransactionStop".into(),
            connection_time: "ConnectedTime".into(),
            charge_time: "ChargeTime".into(),
            peak_power: "MaxPower".into(),
            charged_energy: "TotalEnergy".into(),
        }
    }
}

impl EvSchema {
    /// Column names equal to the record field names.
    pub fn canonical() -> Self {
        EvSchema {
            format: TextFormat::default(),
            session_id: "session_id".into(),
            arrival: "arrival".into(),
            departure: "departure".into(),
            connection_time: "connection_time".into(),
            charge_time: "charge_time".into(),
            peak_power: "peak_power".into(),
            charged_energy: "charged_energy".into(),
        }
    }
}

pub fn load_ev_dataset(path: &Path, schema: &EvSchema) -> Result<LoadReport<RawSessionRecord>> {
    let mut table = Delimited::open(path, &schema.format)?;
    let cols = table.require(&[
        &schema.session_id,
        &schema.arrival,
        &schema.departure,
        &schema.connection_time,
        &schema.charge_time,
        &schema.peak_power,
        &schema.charged_energy,
    ])?;
    let fmt = &schema.format;
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let input_rows = table.for_each_row(|row, rec| {
        match parse_session(rec, &cols, fmt) {
            Ok(r) => match r.violation() {
                None => records.push(r),
                Some(reason) => rejected.push(Rejection { row, reason }),
            },
            Err(reason) => rejected.push(Rejection { row, reason }),
        }
        Ok(())
    })?;
    check_rejections(&rejected, input_rows, fmt.max_reject_fraction)?;
    Ok(LoadReport {
        records,
        rejected,
        filtered: 0,
        input_rows,
        warnings: Vec::new(),
    })
}

fn parse_session(
    rec: &csv::StringRecord,
    cols: &[usize],
    fmt: &TextFormat,
) -> std::result::Result<RawSessionRecord, String> {
    let time = |idx: usize, role: &str| {
        let raw = field(rec, idx);
        parse_timestamp(raw, &fmt.datetime_formats).ok_or_else(|| format!("unparsable {role} {raw:?}"))
    };
    let num = |idx: usize, role: &str| required_number(rec, idx, role, fmt.decimal_comma);
    let session_id = field(rec, cols[0]).to_string();
    if session_id.is_empty() {
        return Err("empty session id".into());
    }
    Ok(RawSessionRecord {
        session_id,
        arrival: time(cols[1], "arrival")?,
        departure: time(cols[2], "departure")?,
        connection_time: num(cols[3], "connection time")?,
        charge_time: num(cols[4], "charge time")?,
        peak_power: num(cols[5], "peak power")?,
        charged_energy: num(cols[6], "charged energy")?,
    })
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;
    use crate::error::Error;

    const HEADER: &str =
        "session_id,arrival,departure,connection_time,charge_time,peak_power,charged_energy";

    fn write(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{HEADER}").unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn consistent_row_is_accepted() {
        let f = write("s1,2019-03-04 08:15:00,2019-03-04 12:15:00,4.0,2.0,7.4,11\n");
        let rep = load_ev_dataset(f.path(), &EvSchema::canonical()).unwrap();
        assert_eq!(rep.records.len(), 1);
        assert!(rep.rejected.is_empty());
        let r = &rep.records[0];
        assert_eq!(r.span_hours(), 4.0);
        assert_eq!((r.peak_power, r.charged_energy), (7.4, 11.0));
    }

    #[test]
    fn charge_longer_than_connection_is_rejected() {
        let mut body = String::new();
        for i in 0..10 {
            body += &format!("ok{i},2019-03-04 08:00,2019-03-04 12:00,4.0,2.0,7.4,11\n");
        }
        body += "bad,2019-03-04 08:00,2019-03-04 12:00,4.0,5.0,7.4,11\n";
        let f = write(&body);
        let rep = load_ev_dataset(f.path(), &EvSchema::canonical()).unwrap();
        assert_eq!(rep.records.len(), 10);
        assert_eq!(
            rep.rejected,
            vec![Rejection {
                row: 11,
                reason: "charge exceeds connection".into()
            }]
        );
    }

    #[test]
    fn hundred_rows_three_malformed() {
        let mut body = String::new();
        for i in 1..=100 {
            match i {
                17 => body += "s17,not-a-time,2019-01-01 10:00,1,1,3,3\n",
                42 => body += "s42,2019-01-01 09:00,2019-01-01 10:00,1,1,abc,3\n",
                99 => body += "s99,2019-01-01 09:00,2019-01-01 10:00,1,1,30,3\n",
                _ => {
                    body += &format!("s{i},2019-01-01 09:00,2019-01-01 10:00,1,0.5,3.7,1.8\n")
                }
            }
        }
        let f = write(&body);
        let rep = load_ev_dataset(f.path(), &EvSchema::canonical()).unwrap();
        assert_eq!(rep.input_rows, 100);
        assert_eq!(rep.records.len(), 97);
        let rows: Vec<usize> = rep.rejected.iter().map(|r| r.row).collect();
        assert_eq!(rows, vec![17, 42, 99]);
        assert_eq!(rep.records.len() + rep.rejected.len(), rep.input_rows);
    }

    #[test]
    fn too_many_rejections_abort() {
        let mut body = String::new();
        for i in 0..10 {
            let charge = if i < 2 { 9.0 } else { 1.0 };
            body += &format!("s{i},2019-01-01 09:00,2019-01-01 11:00,2,{charge},3,3\n");
        }
        let f = write(&body);
        let err = load_ev_dataset(f.path(), &EvSchema::canonical()).unwrap_err();
        assert!(matches!(err, Error::TooManyRejections { rejected: 2, total: 10, .. }));
    }

    #[test]
    fn multi_day_and_reversed_sessions_rejected() {
        let mut r = RawSessionRecord {
            session_id: "x".into(),
            arrival: parse_timestamp("2019-01-01 09:00", &[]).unwrap(),
            departure: parse_timestamp("2019-01-02 09:30", &[]).unwrap(),
            connection_time: 24.5,
            charge_time: 2.0,
            peak_power: 3.0,
            charged_energy: 5.0,
        };
        assert!(r.violation().unwrap().contains("multi-day"));
        r.departure = parse_timestamp("2019-01-01 08:00", &[]).unwrap();
        assert_eq!(r.violation().unwrap(), "departure before arrival");
    }

    #[test]
    fn header_mismatch_and_missing_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a,b,c").unwrap();
        let err = load_ev_dataset(f.path(), &EvSchema::canonical()).unwrap_err();
        assert!(matches!(err, Error::HeaderMismatch { .. }));
        let err = load_ev_dataset(Path::new("/nonexistent/ev.csv"), &EvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::MissingInput(_)));
    }

    #[test]
    fn semicolon_decimal_comma_provider_layout() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            "TransactionId;ChargePoint;UTCTransactionStart;UTCTransactionStop;ConnectedTime;ChargeTime;TotalEnergy;MaxPower"
        )
        .unwrap();
        writeln!(f, "7;cp1;01/02/2019 10:30;01/02/2019 13:00;2,5;1,25;8,75;7,4").unwrap();
        let mut schema = EvSchema::default();
        schema.format.delimiter = ';';
        schema.format.decimal_comma = true;
        let rep = load_ev_dataset(f.path(), &schema).unwrap();
        assert_eq!(rep.records.len(), 1);
        assert_eq!(rep.records[0].charge_time, 1.25);
        assert_eq!(rep.records[0].charged_energy, 8.75);
    }

    #[test]
    fn loading_is_deterministic() {
        let f = write("a,2019-01-01 09:00,2019-01-01 10:00,1,1,3,3\nb,2019-01-01 11:00,2019-01-01 12:00,1,1,3,3\n");
        let a = load_ev_dataset(f.path(), &EvSchema::canonical()).unwrap();
        let b = load_ev_dataset(f.path(), &EvSchema::canonical()).unwrap();
        assert_eq!(a, b);
    }
}
