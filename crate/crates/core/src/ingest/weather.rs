use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::{check_rejections, field, required_number, Delimited, LoadReport, Rejection, TextFormat};
use crate::calendar::parse_timestamp;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub timestamp: NaiveDateTime,
    /// °C
    pub ambient_temp: f64,
    /// m/s
    pub wind_speed: f64,
    /// %
    pub humidity: f64,
    /// Degrees in [0, 360).
    pub wind_direction: f64,
    /// W/m²
    pub ghi: f64,
    /// W/m²
    pub dhi: f64,
    /// mm
    pub rainfall: f64,
}

impl WeatherRecord {
    pub fn violation(&self) -> Option<String> {
        if !(0.0..=100.0).contains(&self.humidity) {
            return Some(format!("humidity {} outside [0, 100]", self.humidity));
        }
        if self.dhi < 0.0 || self.ghi < 0.0 {
            return Some("negative irradiance".into());
        }
        if self.dhi > self.ghi {
            return Some("diffuse exceeds global".into());
        }
        if !(0.0..360.0).contains(&self.wind_direction) {
            return Some(format!("wind direction {} outside [0, 360)", self.wind_direction));
        }
        if self.wind_speed < 0.0 || self.rainfall < 0.0 {
            return Some("negative wind speed or rainfall".into());
        }
        None
    }
}

/// Column roles for the weather-station log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeatherSchema {
    #[serde(flatten)]
    pub format: TextFormat,
    pub timestamp: String,
    pub ambient_temp: String,
    pub wind_speed: String,
    pub humidity: String,
    pub wind_direction: String,
    pub ghi: String,
    pub dhi: String,
    pub rainfall: String,
    /// Pyranometer night offsets down to this value (W/m², ≤ 0) are read
    /// as zero instead of rejected.
    pub irradiance_zero_floor: f64,
}

impl Default for WeatherSchema {
    fn default() -> Self {
        WeatherSchema {
            format: TextFormat::default(),
            timestamp: "timestamp".into(),
            ambient_temp: "ambient_temp".into(),
            wind_speed: "wind_speed".into(),
            humidity: "humidity".into(),
            wind_direction: "wind_direction".into(),
            ghi: "ghi".into(),
            dhi: "dhi".into(),
            rainfall: "rainfall".into(),
            irradiance_zero_floor: -10.0,
        }
    }
}

pub fn load_weather(path: &Path, schema: &WeatherSchema) -> Result<LoadReport<WeatherRecord>> {
    let mut table = Delimited::open(path, &schema.format)?;
    let c = table.require(&[
        &schema.timestamp,
        &schema.ambient_temp,
        &schema.wind_speed,
        &schema.humidity,
        &schema.wind_direction,
        &schema.ghi,
        &schema.dhi,
        &schema.rainfall,
    ])?;
    let fmt = &schema.format;
    let floor = schema.irradiance_zero_floor.min(0.0);
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let mut clipped = 0usize;
    let input_rows = table.for_each_row(|row, rec| {
        let parsed = (|| {
            let raw_ts = field(rec, c[0]);
            let timestamp = parse_timestamp(raw_ts, &fmt.datetime_formats)
                .ok_or_else(|| format!("unparsable timestamp {raw_ts:?}"))?;
            let num = |i: usize, role: &str| required_number(rec, c[i], role, fmt.decimal_comma);
            let mut irradiance = |v: f64| {
                if v < 0.0 && v >= floor {
                    clipped += 1;
                    0.0
                } else {
                    v
                }
            };
            let ghi = irradiance(num(5, "ghi")?);
            let dhi = irradiance(num(6, "dhi")?);
            Ok::<_, String>(WeatherRecord {
                timestamp,
                ambient_temp: num(1, "ambient temperature")?,
                wind_speed: num(2, "wind speed")?,
                humidity: num(3, "humidity")?,
                wind_direction: num(4, "wind direction")?,
                ghi,
                dhi,
                rainfall: num(7, "rainfall")?,
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
    check_rejections(&rejected, input_rows, fmt.max_reject_fraction)?;
    records.sort_by_key(|r| r.timestamp);
    let mut warnings = Vec::new();
    if clipped > 0 {
        warnings.push(format!("{clipped} small negative irradiance values read as 0"));
    }
    Ok(LoadReport {
        records,
        rejected,
        filtered: 0,
        input_rows,
        warnings,
    })
}
