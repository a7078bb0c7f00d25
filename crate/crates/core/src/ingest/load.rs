use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::{check_rejections, decimal_places, field, parse_number, Delimited, Rejection, TextFormat};
use crate::calendar::{parse_timestamp, Calendar, ClockConvention};
use crate::error::{Error, Result};
use crate::load_analytics::{ConsumerProfile, ConsumerType};

/// Where the consumer type comes from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeSource {
    /// A column holding the type code 1-5.
    Column(String),
    /// Three boolean indicator columns; the type follows from the
    /// installed PV / EV / heat-pump combination.
    Indicators { pv: String, ev: String, hp: String },
}

/// Meaning of the offtake and injection columns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyUnits {
    /// Energy per quarter-hour, kWh.
    #[default]
    KwhPerInterval,
    /// Average power over the quarter-hour, kW.
    KwAverage,
}

/// Column roles for the smart-meter file. Defaults follow the Fluvius
/// 15-minute consumption export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FluviusSchema {
    #[serde(flatten)]
    pub format: TextFormat,
    pub consumer_id: String,
    pub interval_start: String,
    pub offtake: String,
    pub injection: String,
    pub consumer_type: TypeSource,
    pub units: EnergyUnits,
    pub clock: ClockConvention,
}

impl Default for FluviusSchema {
    fn default() -> Self {
        FluviusSchema {
            format: TextFormat::with_delimiter(';'),
            consumer_id: "EAN_ID".into(),
            interval_start: "Datum_Startuur".into(),
            offtake: "Volume_Afname_kWh".into(),
            injection: "Volume_Injectie_kWh".into(),
            consumer_type: TypeSource::Indicators {
                pv: "PV-Installatie_Indicator".into(),
                ev: "Elektrisch_Voertuig_Indicator".into(),
                hp: "Warmtepomp_Indicator".into(),
            },
            units: EnergyUnits::KwhPerInterval,
            clock: ClockConvention::Local,
        }
    }
}

impl FluviusSchema {
    pub fn canonical() -> Self {
        FluviusSchema {
            format: TextFormat::default(),
            consumer_id: "consumer_id".into(),
            interval_start: "interval_start".into(),
            offtake: "offtake".into(),
            injection: "injection".into(),
            consumer_type: TypeSource::Column("consumer_type".into()),
            units: EnergyUnits::KwhPerInterval,
            clock: ClockConvention::Local,
        }
    }
}

/// A consumer dropped because its year is incomplete.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileRejection {
    pub consumer_id: String,
    pub first_missing: NaiveDateTime,
    pub intervals_present: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluviusLoad {
    /// Complete profiles, sorted by consumer id.
    pub profiles: Vec<ConsumerProfile>,
    pub rejected_rows: Vec<Rejection>,
    pub rejected_profiles: Vec<ProfileRejection>,
    pub input_rows: usize,
}

struct Row {
    ts: NaiveDateTime,
    net: f64,
}

struct Pending {
    consumer_type: ConsumerType,
    rows: Vec<Row>,
}

fn parse_flag(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" | "ja" | "j" => Some(true),
        "0" | "false" | "no" | "n" | "nee" | "" => Some(false),
        _ => None,
    }
}

/// Net energy per interval rounded to the precision of the source text, so
/// `offtake - injection` carries no binary round-off.
fn net_energy(offtake: f64, injection: f64, decimals: u32, units: EnergyUnits) -> f64 {
    let decimals = decimals.min(12) as i32;
    let scale = 10f64.powi(decimals);
    let net = ((offtake - injection) * scale).round() / scale;
    match units {
        EnergyUnits::KwhPerInterval => net,
        EnergyUnits::KwAverage => net / 4.0,
    }
}

/// Reads per-interval rows, groups them by consumer, and keeps consumers
/// whose year is complete. Net load is offtake minus injection, so export
/// shows up negative.
///
/// Duplicate intervals and unknown type labels abort the load; a consumer
/// with a missing interval is rejected on its own, reporting the first gap.
pub fn load_fluvius(path: &Path, schema: &FluviusSchema, calendar: &Calendar) -> Result<FluviusLoad> {
    let mut table = Delimited::open(path, &schema.format)?;
    let cols = table.require(&[
        &schema.consumer_id,
        &schema.interval_start,
        &schema.offtake,
        &schema.injection,
    ])?;
    let type_cols = match &schema.consumer_type {
        TypeSource::Column(c) => table.require(&[c])?,
        TypeSource::Indicators { pv, ev, hp } => table.require(&[pv, ev, hp])?,
    };
    let fmt = &schema.format;

    let mut pending: HashMap<String, Pending> = HashMap::new();
    let mut rejected_rows = Vec::new();
    let input_rows = table.for_each_row(|row, rec| {
        let consumer_type = match &schema.consumer_type {
            TypeSource::Column(_) => {
                let raw = field(rec, type_cols[0]);
                raw.trim()
                    .parse::<u8>()
                    .ok()
                    .and_then(ConsumerType::from_code)
                    .ok_or_else(|| Error::UnknownConsumerType(raw.to_string()))?
            }
            TypeSource::Indicators { .. } => {
                let raw: Vec<&str> = type_cols.iter().map(|&c| field(rec, c)).collect();
                let flags: Option<Vec<bool>> = raw.iter().map(|r| parse_flag(r)).collect();
                flags
                    .and_then(|f| ConsumerType::from_assets(f[0], f[1], f[2]))
                    .ok_or_else(|| {
                        Error::UnknownConsumerType(format!("pv={} ev={} hp={}", raw[0], raw[1], raw[2]))
                    })?
            }
        };
        let parsed = (|| {
            let id = field(rec, cols[0]);
            if id.is_empty() {
                return Err("empty consumer id".to_string());
            }
            let raw_ts = field(rec, cols[1]);
            let ts = parse_timestamp(raw_ts, &fmt.datetime_formats)
                .ok_or_else(|| format!("unparsable interval start {raw_ts:?}"))?;
            if calendar.day_of_year(&ts).is_none() {
                return Err(format!("outside analysis year {}", calendar.year));
            }
            let (raw_off, raw_inj) = (field(rec, cols[2]), field(rec, cols[3]));
            let off = parse_number(raw_off, fmt.decimal_comma)
                .ok_or_else(|| format!("unparsable offtake {raw_off:?}"))?;
            // blank injection is common for consumers without generation
            let inj = if raw_inj.is_empty() {
                0.0
            } else {
                parse_number(raw_inj, fmt.decimal_comma)
                    .ok_or_else(|| format!("unparsable injection {raw_inj:?}"))?
            };
            if off < 0.0 || inj < 0.0 {
                return Err("negative offtake or injection".to_string());
            }
            let decimals = decimal_places(raw_off, fmt.decimal_comma)
                .max(decimal_places(raw_inj, fmt.decimal_comma));
            Ok((id, ts, net_energy(off, inj, decimals, schema.units)))
        })();
        match parsed {
            Ok((id, ts, net)) => {
                let entry = pending.entry(id.to_string()).or_insert_with(|| Pending {
                    consumer_type,
                    rows: Vec::with_capacity(calendar.intervals()),
                });
                if entry.consumer_type != consumer_type {
                    rejected_rows.push(Rejection {
                        row,
                        reason: format!("type label changes for consumer {id}"),
                    });
                } else {
                    entry.rows.push(Row { ts, net });
                }
            }
            Err(reason) => rejected_rows.push(Rejection { row, reason }),
        }
        Ok(())
    })?;
    check_rejections(&rejected_rows, input_rows, fmt.max_reject_fraction)?;

    let expected = calendar.expected_timestamps(schema.clock);
    let mut ids: Vec<String> = pending.keys().cloned().collect();
    ids.sort();
    let mut profiles = Vec::new();
    let mut rejected_profiles = Vec::new();
    for id in ids {
        let Pending {
            consumer_type,
            mut rows,
        } = pending.remove(&id).expect("id from key set");
        // stable: repeated autumn hours keep file order
        rows.sort_by_key(|r| r.ts);
        match check_sequence(&rows, &expected) {
            Sequence::Complete => {
                let net = rows.into_iter().map(|r| r.net).collect();
                profiles.push(ConsumerProfile::new(id, consumer_type, net, calendar)?);
            }
            Sequence::Duplicate(ts) => {
                return Err(Error::DuplicateInterval {
                    consumer_id: id,
                    timestamp: ts.to_string(),
                })
            }
            Sequence::Missing(ts) => rejected_profiles.push(ProfileRejection {
                consumer_id: id,
                first_missing: ts,
                intervals_present: rows.len(),
            }),
        }
    }
    Ok(FluviusLoad {
        profiles,
        rejected_rows,
        rejected_profiles,
        input_rows,
    })
}

enum Sequence {
    Complete,
    Missing(NaiveDateTime),
    Duplicate(NaiveDateTime),
}

fn check_sequence(rows: &[Row], expected: &[NaiveDateTime]) -> Sequence {
    let mut missing = None;
    let (mut i, mut j) = (0, 0);
    while i < rows.len() && j < expected.len() {
        let (got, want) = (rows[i].ts, expected[j]);
        if got == want {
            i += 1;
            j += 1;
        } else if got < want {
            return Sequence::Duplicate(got);
        } else {
            missing.get_or_insert(want);
            j += 1;
        }
    }
    if i < rows.len() {
        return Sequence::Duplicate(rows[i].ts);
    }
    if j < expected.len() {
        missing.get_or_insert(expected[j]);
    }
    match missing {
        Some(ts) => Sequence::Missing(ts),
        None => Sequence::Complete,
    }
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn ts(s: &str) -> NaiveDateTime {
        parse_timestamp(s, &[]).unwrap()
    }

    fn write_consumer(f: &mut impl Write, id: &str, ty: u8, skip: Option<NaiveDateTime>) {
        let cal = Calendar::default();
        for (k, t) in cal.expected_timestamps(ClockConvention::Local).iter().enumerate() {
            if Some(*t) == skip {
                continue;
            }
            let (off, inj) = if k % 96 == 48 { ("0", "0.300") } else { ("0.125", "0") };
            writeln!(f, "{id},{ty},{},{off},{inj}", t.format("%Y-%m-%d %H:%M:%S")).unwrap();
        }
    }

    fn file_with(consumers: &[(&str, u8, Option<NaiveDateTime>)]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "consumer_id,consumer_type,interval_start,offtake,injection").unwrap();
        {
            let mut w = std::io::BufWriter::new(f.as_file_mut());
            for (id, ty, skip) in consumers {
                write_consumer(&mut w, id, *ty, *skip);
            }
        }
        f
    }

    #[test]
    fn complete_consumer_yields_one_profile() {
        let f = file_with(&[("c1", 2, None)]);
        let out = load_fluvius(f.path(), &FluviusSchema::canonical(), &Calendar::default()).unwrap();
        assert_eq!(out.profiles.len(), 1);
        let p = &out.profiles[0];
        assert_eq!(p.consumer_type, ConsumerType::Pv);
        assert_eq!(p.net_kwh.len(), 35_040);
        assert_eq!(p.net_kwh[0], 0.125);
        assert_eq!(p.net_kwh[48], -0.3);
        assert_eq!(out.input_rows, 35_040);
    }

    #[test]
    fn missing_interval_rejects_consumer_with_first_gap() {
        let gap = ts("2022-05-10 13:45");
        let f = file_with(&[("c1", 1, Some(gap)), ("c2", 3, None)]);
        let out = load_fluvius(f.path(), &FluviusSchema::canonical(), &Calendar::default()).unwrap();
        assert_eq!(out.profiles.len(), 1);
        assert_eq!(out.profiles[0].consumer_id, "c2");
        assert_eq!(out.rejected_profiles.len(), 1);
        assert_eq!(out.rejected_profiles[0].first_missing, gap);
        assert_eq!(out.rejected_profiles[0].intervals_present, 35_039);
    }

    #[test]
    fn three_consumers_pool_by_label() {
        let f = file_with(&[("b", 5, None), ("a", 1, None), ("c", 5, None)]);
        let out = load_fluvius(f.path(), &FluviusSchema::canonical(), &Calendar::default()).unwrap();
        let ids: Vec<&str> = out.profiles.iter().map(|p| p.consumer_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        let fives = out
            .profiles
            .iter()
            .filter(|p| p.consumer_type == ConsumerType::PvEv)
            .count();
        assert_eq!(fives, 2);
    }

    #[test]
    fn duplicate_interval_is_an_error() {
        let mut f = file_with(&[("c1", 1, None)]);
        writeln!(f, "c1,1,2022-01-01 00:00:00,0.1,0").unwrap();
        let err = load_fluvius(f.path(), &FluviusSchema::canonical(), &Calendar::default()).unwrap_err();
        assert!(matches!(err, Error::DuplicateInterval { .. }), "{err}");
    }

    #[test]
    fn unknown_type_is_an_error() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "consumer_id,consumer_type,interval_start,offtake,injection").unwrap();
        writeln!(f, "c1,7,2022-01-01 00:00,0.1,0").unwrap();
        let err = load_fluvius(f.path(), &FluviusSchema::canonical(), &Calendar::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownConsumerType(_)));
    }

    #[test]
    fn indicator_columns_map_to_types() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "EAN_ID;Datum_Startuur;Volume_Afname_kWh;Volume_Injectie_kWh;PV-Installatie_Indicator;Elektrisch_Voertuig_Indicator;Warmtepomp_Indicator").unwrap();
        for t in Calendar::default().expected_timestamps(ClockConvention::Local) {
            writeln!(f, "x;{}.000Z;0,25;;1;0;1", t.format("%Y-%m-%dT%H:%M:%S")).unwrap();
        }
        let mut schema = FluviusSchema::default();
        schema.format.decimal_comma = true;
        let out = load_fluvius(f.path(), &schema, &Calendar::default()).unwrap();
        assert_eq!(out.profiles[0].consumer_type, ConsumerType::PvHeatPump);
        assert_eq!(out.profiles[0].net_kwh[0], 0.25);
    }

    #[test]
    fn net_energy_has_no_roundoff() {
        assert_eq!(net_energy(0.3, 0.1, 1, EnergyUnits::KwhPerInterval), 0.2);
        assert_eq!(net_energy(0.1, 0.3, 3, EnergyUnits::KwhPerInterval), -0.2);
        assert_eq!(net_energy(2.0, 0.0, 0, EnergyUnits::KwAverage), 0.5);
    }
}
