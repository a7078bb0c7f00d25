//! Normalized PV generation, seasonal quantile envelopes, forecast accuracy
//! and Monte Carlo PV scenarios.
//!
//! A scenario combines a whole historical day of normalized generation with
//! an installed capacity drawn independently, so intra-day correlation of
//! the source day is kept.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::Timelike;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calendar::{Calendar, SLOTS_PER_DAY, SLOT_MINUTES};
use crate::empdist::{quantile_sorted, select_weighted, SeededSampler};
use crate::error::{Error, Result};
use crate::ingest::RawPVRecord;

/// Largest published/computed load-factor gap that is not reported.
pub const LOAD_FACTOR_TOLERANCE: f64 = 0.01;
/// Longest run of missing slots inside a day that is filled by linear
/// interpolation (the spring clock change removes four).
pub const MAX_FILLED_GAP: usize = 4;

pub const DEFAULT_PV_LEVELS: [f64; 5] = [10.0, 25.0, 50.0, 75.0, 90.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvDay {
    pub day_of_year: u32,
    pub month: u32,
    /// Generation / capacity per quarter hour of the day.
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPVSeries {
    pub year: i32,
    /// Complete days in calendar order.
    pub days: Vec<PvDay>,
    /// Samples with normalized generation above 1.
    pub above_one: usize,
    /// Records whose published load factor differs by more than
    /// [`LOAD_FACTOR_TOLERANCE`].
    pub load_factor_discrepancies: usize,
    pub max_load_factor_deviation: f64,
    /// Slots filled by interpolation.
    pub filled_slots: usize,
    /// Repeated wall-clock slots; the first reading is kept.
    pub duplicate_slots: usize,
    /// Days left out because of gaps longer than [`MAX_FILLED_GAP`].
    pub dropped_days: Vec<u32>,
}

impl NormalizedPVSeries {
    pub fn sample_count(&self) -> usize {
        self.days.len() * SLOTS_PER_DAY
    }

    pub fn fraction_above_one(&self) -> f64 {
        if self.days.is_empty() {
            0.0
        } else {
            self.above_one as f64 / self.sample_count() as f64
        }
    }

    pub fn month_pool(&self, month: u32) -> Vec<&PvDay> {
        self.days.iter().filter(|d| d.month == month).collect()
    }

    pub fn day(&self, day_of_year: u32) -> Option<&PvDay> {
        self.days.iter().find(|d| d.day_of_year == day_of_year)
    }
}

/// Divide each measurement by the capacity monitored at that interval and
/// arrange the result into complete days.
pub fn normalize_generation(records: &[RawPVRecord], calendar: &Calendar) -> Result<NormalizedPVSeries> {
    let mut by_day: BTreeMap<u32, Vec<Option<f64>>> = BTreeMap::new();
    let mut series = NormalizedPVSeries {
        year: calendar.year,
        days: Vec::new(),
        above_one: 0,
        load_factor_discrepancies: 0,
        max_load_factor_deviation: 0.0,
        filled_slots: 0,
        duplicate_slots: 0,
        dropped_days: Vec::new(),
    };
    for r in records {
        if let Some(reason) = r.violation() {
            return Err(Error::InvalidArgument(format!("PV record at {}: {reason}", r.timestamp)));
        }
        let Some(day) = calendar.day_of_year(&r.timestamp) else {
            continue;
        };
        let value = r.measured_upscaled / r.monitored_capacity;
        if let Some(lf) = r.load_factor {
            let dev = (value - lf).abs();
            series.max_load_factor_deviation = series.max_load_factor_deviation.max(dev);
            if dev > LOAD_FACTOR_TOLERANCE {
                series.load_factor_discrepancies += 1;
            }
        }
        let slot = ((r.timestamp.hour() * 60 + r.timestamp.minute()) as i64 / SLOT_MINUTES) as usize;
        let slots = by_day.entry(day).or_insert_with(|| vec![None; SLOTS_PER_DAY]);
        if slots[slot].is_some() {
            series.duplicate_slots += 1;
        } else {
            slots[slot] = Some(value);
        }
    }
    for (day, slots) in by_day {
        match fill_day(&slots) {
            Some((values, filled)) => {
                series.filled_slots += filled;
                series.above_one += values.iter().filter(|&&v| v > 1.0).count();
                series.days.push(PvDay {
                    day_of_year: day,
                    month: calendar.month_of_day(day),
                    values,
                });
            }
            None => series.dropped_days.push(day),
        }
    }
    Ok(series)
}

fn fill_day(slots: &[Option<f64>]) -> Option<(Vec<f64>, usize)> {
    let mut values = vec![0.0; slots.len()];
    let mut filled = 0;
    let mut i = 0;
    while i < slots.len() {
        if let Some(v) = slots[i] {
            values[i] = v;
            i += 1;
            continue;
        }
        let start = i;
        while i < slots.len() && slots[i].is_none() {
            i += 1;
        }
        let gap = i - start;
        if gap > MAX_FILLED_GAP || start == 0 || i == slots.len() {
            return None;
        }
        let (a, b) = (values[start - 1], slots[i].unwrap());
        for k in 0..gap {
            let t = (k + 1) as f64 / (gap + 1) as f64;
            values[start + k] = a + t * (b - a);
        }
        filled += gap;
    }
    Some((values, filled))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "scope", content = "month")]
pub enum QuartileScope {
    Month(u32),
    Annual,
}

impl fmt::Display for QuartileScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuartileScope::Month(m) => write!(f, "month {m}"),
            QuartileScope::Annual => f.write_str("annual"),
        }
    }
}

/// Per-slot quantiles of normalized generation over the days in scope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuartileProfiles {
    pub scope: QuartileScope,
    /// Percent, ascending.
    pub levels: Vec<f64>,
    pub days_in_pool: usize,
    /// `values[level][slot]`.
    pub values: Vec<Vec<f64>>,
}

pub fn monthly_quartiles(
    series: &NormalizedPVSeries,
    scope: QuartileScope,
    levels: &[f64],
) -> Result<QuartileProfiles> {
    let pool: Vec<&PvDay> = match scope {
        QuartileScope::Month(m) if !(1..=12).contains(&m) => {
            return Err(Error::InvalidArgument(format!("month {m}")));
        }
        QuartileScope::Month(m) => series.month_pool(m),
        QuartileScope::Annual => series.days.iter().collect(),
    };
    if pool.is_empty() {
        return Err(Error::EmptyScope(format!("PV {scope}")));
    }
    if levels.is_empty() || levels.iter().any(|l| !(0.0..=100.0).contains(l)) {
        return Err(Error::InvalidArgument(format!("quantile levels {levels:?}")));
    }
    let mut levels = levels.to_vec();
    levels.sort_by(f64::total_cmp);
    let mut values = vec![vec![0.0; SLOTS_PER_DAY]; levels.len()];
    let mut column = Vec::with_capacity(pool.len());
    for slot in 0..SLOTS_PER_DAY {
        column.clear();
        column.extend(pool.iter().map(|d| d.values[slot]));
        column.sort_by(f64::total_cmp);
        for (li, l) in levels.iter().enumerate() {
            values[li][slot] = quantile_sorted(&column, l / 100.0)?;
        }
    }
    Ok(QuartileProfiles {
        scope,
        levels,
        days_in_pool: pool.len(),
        values,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastErrorReport {
    /// MW².
    pub mse_week_ahead: f64,
    pub mse_day_ahead: f64,
    pub mse_hour_ahead: f64,
    pub ratio_wa_da: Option<f64>,
    pub ratio_da_ha: Option<f64>,
    /// Share of intervals with the measurement inside [P10, P90].
    pub p10_p90_coverage: Option<f64>,
    pub intervals_used: usize,
    pub intervals_skipped: usize,
    pub daylight_only: bool,
}

/// Mean squared forecast error per horizon over the intervals where all
/// three forecasts are published. With `daylight_only`, intervals with zero
/// measured generation are left out.
pub fn forecast_errors(records: &[RawPVRecord], daylight_only: bool) -> Result<ForecastErrorReport> {
    let mut missing = Vec::new();
    for (name, present) in [
        ("week-ahead", records.iter().any(|r| r.forecast_week_ahead.is_some())),
        ("day-ahead", records.iter().any(|r| r.forecast_day_ahead.is_some())),
        ("hour-ahead", records.iter().any(|r| r.forecast_hour_ahead.is_some())),
    ] {
        if !present {
            missing.push(name);
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingForecast(missing.join(", ")));
    }
    let mut sums = [0.0f64; 3];
    let mut used = 0usize;
    let mut skipped = 0usize;
    let (mut covered, mut with_band) = (0usize, 0usize);
    for r in records {
        let (Some(wa), Some(da), Some(ha)) = (r.forecast_week_ahead, r.forecast_day_ahead, r.forecast_hour_ahead)
        else {
            skipped += 1;
            continue;
        };
        if daylight_only && r.measured_upscaled <= 0.0 {
            skipped += 1;
            continue;
        }
        let m = r.measured_upscaled;
        for (s, f) in sums.iter_mut().zip([wa, da, ha]) {
            *s += (f - m) * (f - m);
        }
        used += 1;
        if let (Some(lo), Some(hi)) = (r.p10, r.p90) {
            with_band += 1;
            if (lo..=hi).contains(&m) {
                covered += 1;
            }
        }
    }
    if used == 0 {
        return Err(Error::EmptyScope("intervals with all three forecasts".into()));
    }
    let [wa, da, ha] = sums.map(|s| s / used as f64);
    let ratio = |a: f64, b: f64| (b > 0.0).then(|| a / b);
    Ok(ForecastErrorReport {
        mse_week_ahead: wa,
        mse_day_ahead: da,
        mse_hour_ahead: ha,
        ratio_wa_da: ratio(wa, da),
        ratio_da_ha: ratio(da, ha),
        p10_p90_coverage: (with_band > 0).then(|| covered as f64 / with_band as f64),
        intervals_used: used,
        intervals_skipped: skipped,
        daylight_only,
    })
}

/// Installed PV capacity distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum KwpDistribution {
    /// `(kWp, weight)` pairs, weights summing to 1.
    Discrete { points: Vec<(f64, f64)> },
    Triangular { min: f64, mode: f64, max: f64 },
}

impl KwpDistribution {
    pub fn point(kwp: f64) -> Result<Self> {
        Self::discrete(vec![(kwp, 1.0)])
    }

    /// Weights are rescaled to sum to 1.
    pub fn discrete(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("empty kWp distribution".into()));
        }
        if points.iter().any(|&(k, w)| !(k > 0.0) || !(w >= 0.0) || !k.is_finite() || !w.is_finite()) {
            return Err(Error::InvalidArgument("kWp must be > 0 and weights >= 0".into()));
        }
        let total: f64 = points.iter().map(|p| p.1).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("kWp weights sum to zero".into()));
        }
        Ok(KwpDistribution::Discrete {
            points: points.into_iter().map(|(k, w)| (k, w / total)).collect(),
        })
    }

    pub fn triangular(min: f64, mode: f64, max: f64) -> Result<Self> {
        if !(min > 0.0 && min <= mode && mode <= max && max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "triangular kWp needs 0 < min <= mode <= max, got ({min}, {mode}, {max})"
            )));
        }
        Ok(KwpDistribution::Triangular { min, mode, max })
    }

    pub fn mean(&self) -> f64 {
        match self {
            KwpDistribution::Discrete { points } => points.iter().map(|(k, w)| k * w).sum(),
            KwpDistribution::Triangular { min, mode, max } => (min + mode + max) / 3.0,
        }
    }

    /// One draw: roulette wheel over the points, or the inverse CDF of the
    /// triangle. Consumes one variate.
    pub fn sample(&self, sampler: &mut SeededSampler) -> f64 {
        let u = sampler.uniform();
        match self {
            KwpDistribution::Discrete { points } => {
                let weights: Vec<f64> = points.iter().map(|p| p.1).collect();
                points[select_weighted(&weights, u).expect("validated weights")].0
            }
            &KwpDistribution::Triangular { min, mode, max } => {
                let span = max - min;
                if span == 0.0 {
                    return min;
                }
                let split = (mode - min) / span;
                if u < split {
                    min + (u * span * (mode - min)).sqrt()
                } else {
                    max - ((1.0 - u) * span * (max - mode)).sqrt()
                }
            }
        }
    }
}

impl FromStr for KwpDistribution {
    type Err = Error;

    /// `point:5`, `tri:2,5,10` or `discrete:3=0.2,5=0.5,8=0.3`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("kWp distribution {s:?}"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let (form, body) = s.split_once(':').ok_or_else(bad)?;
        match form.trim() {
            "point" => Self::point(num(body)?),
            "tri" | "triangular" => {
                let v = body.split(',').map(num).collect::<Result<Vec<_>>>()?;
                let [a, b, c] = v[..] else {
                    return Err(bad());
                };
                Self::triangular(a, b, c)
            }
            "discrete" => {
                let points = body
                    .split(',')
                    .map(|p| {
                        let (k, w) = p.split_once('=').ok_or_else(bad)?;
                        Ok((num(k)?, num(w)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::discrete(points)
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for KwpDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KwpDistribution::Discrete { points } => {
                f.write_str("discrete:")?;
                for (i, (k, w)) in points.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{k}={w}")?;
                }
                Ok(())
            }
            KwpDistribution::Triangular { min, mode, max } => write!(f, "tri:{min},{mode},{max}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PVScenario {
    pub source_day: u32,
    pub month: u32,
    pub kwp: f64,
    /// kW per quarter hour.
    pub power_kw: Vec<f64>,
}

/// One scenario: a day drawn uniformly from the month's pool, scaled by a
/// drawn capacity.
pub fn generate_pv_scenario(
    series: &NormalizedPVSeries,
    month: u32,
    kwp_dist: &KwpDistribution,
    sampler: &mut SeededSampler,
) -> Result<PVScenario> {
    let pool = series.month_pool(month);
    if pool.is_empty() {
        return Err(Error::EmptyScope(format!("PV month {month}")));
    }
    let day = pool[sampler.index(pool.len())];
    let kwp = kwp_dist.sample(sampler);
    Ok(PVScenario {
        source_day: day.day_of_year,
        month,
        kwp,
        power_kw: day.values.iter().map(|v| kwp * v).collect(),
    })
}

/// `n` scenarios; scenario `i` uses sampler stream `i`.
pub fn generate_pv_batch(
    series: &NormalizedPVSeries,
    month: u32,
    kwp_dist: &KwpDistribution,
    n: usize,
    seed: u64,
) -> Result<Vec<PVScenario>> {
    if n == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    if series.month_pool(month).is_empty() {
        return Err(Error::EmptyScope(format!("PV month {month}")));
    }
    (0..n)
        .into_par_iter()
        .map(|i| generate_pv_scenario(series, month, kwp_dist, &mut SeededSampler::new(seed, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use chrono::Duration;

    use super::*;

    fn record(ts: chrono::NaiveDateTime, measured: f64, capacity: f64) -> RawPVRecord {
        RawPVRecord {
            timestamp: ts,
            measured_upscaled: measured,
            forecast_week_ahead: None,
            forecast_day_ahead: None,
            forecast_hour_ahead: None,
            p10: None,
            p90: None,
            monitored_capacity: capacity,
            load_factor: None,
        }
    }

    fn day_records(cal: &Calendar, day: u32, shape: impl Fn(usize) -> f64) -> Vec<RawPVRecord> {
        let start = cal.start() + Duration::days(day as i64 - 1);
        (0..SLOTS_PER_DAY)
            .map(|s| record(start + Duration::minutes(15 * s as i64), shape(s), 10.0))
            .collect()
    }

    fn series_of(days: &[(u32, f64)]) -> NormalizedPVSeries {
        let cal = Calendar::default();
        let recs: Vec<RawPVRecord> = days
            .iter()
            .flat_map(|&(d, noon)| day_records(&cal, d, move |s| if s == 48 { noon * 10.0 } else { 0.0 }))
            .collect();
        normalize_generation(&recs, &cal).unwrap()
    }

    #[test]
    fn normalization_ratios() {
        let cal = Calendar::default();
        let recs = day_records(&cal, 1, |s| match s {
            40 => 10.0,
            41 => 2.5,
            _ => 0.0,
        });
        let s = normalize_generation(&recs, &cal).unwrap();
        let v = &s.days[0].values;
        assert_eq!((v[40], v[41], v[0]), (1.0, 0.25, 0.0));
        assert_eq!(s.above_one, 0);
    }

    #[test]
    fn load_factor_cross_check_and_overshoot() {
        let cal = Calendar::default();
        let mut recs = day_records(&cal, 1, |s| if s == 50 { 11.0 } else { 0.0 });
        recs[50].load_factor = Some(1.1);
        recs[10].load_factor = Some(0.05);
        let s = normalize_generation(&recs, &cal).unwrap();
        assert_eq!(s.above_one, 1);
        assert_eq!(s.load_factor_discrepancies, 1);
        assert!((s.max_load_factor_deviation - 0.05).abs() < 1e-12);
    }

    #[test]
    fn spring_gap_filled_long_gap_dropped() {
        let cal = Calendar::default();
        let mut recs = day_records(&cal, 86, |_| 0.0);
        recs.drain(8..12);
        let mut other = day_records(&cal, 87, |_| 0.0);
        other.drain(40..50);
        recs.extend(other);
        let s = normalize_generation(&recs, &cal).unwrap();
        assert_eq!(s.days.len(), 1);
        assert_eq!(s.filled_slots, 4);
        assert_eq!(s.dropped_days, vec![87]);
    }

    #[test]
    fn median_of_three_days() {
        let s = series_of(&[(152, 0.1), (153, 0.6), (154, 0.2)]);
        let q = monthly_quartiles(&s, QuartileScope::Month(6), &DEFAULT_PV_LEVELS).unwrap();
        assert!((q.values[2][48] - 0.2).abs() < 1e-12);
        assert!(q.values.iter().all(|row| row[0] == 0.0));
        assert_eq!(q.days_in_pool, 3);
    }

    #[test]
    fn identical_days_give_flat_levels() {
        let s = series_of(&[(1, 0.3), (2, 0.3)]);
        let q = monthly_quartiles(&s, QuartileScope::Annual, &DEFAULT_PV_LEVELS).unwrap();
        for row in &q.values {
            assert_eq!(row, &s.days[0].values);
        }
        assert!(matches!(
            monthly_quartiles(&s, QuartileScope::Month(7), &DEFAULT_PV_LEVELS),
            Err(Error::EmptyScope(_))
        ));
    }

    #[test]
    fn forecast_mse_by_hand() {
        let cal = Calendar::default();
        let mut recs = day_records(&cal, 1, |s| s as f64);
        for r in &mut recs {
            r.forecast_week_ahead = Some(r.measured_upscaled + 3.0);
            r.forecast_day_ahead = Some(r.measured_upscaled - 1.5);
            r.forecast_hour_ahead = Some(r.measured_upscaled);
            r.p10 = Some(r.measured_upscaled - 1.0);
            r.p90 = Some(r.measured_upscaled + if r.measured_upscaled < 48.0 { 1.0 } else { -0.5 });
        }
        let rep = forecast_errors(&recs, false).unwrap();
        assert_eq!((rep.mse_week_ahead, rep.mse_day_ahead, rep.mse_hour_ahead), (9.0, 2.25, 0.0));
        assert_eq!(rep.ratio_wa_da, Some(4.0));
        assert_eq!(rep.ratio_da_ha, None);
        assert_eq!(rep.p10_p90_coverage, Some(0.5));
        let day = forecast_errors(&recs, true).unwrap();
        assert_eq!(day.intervals_used, 95);

        for r in &mut recs {
            r.forecast_hour_ahead = None;
        }
        assert!(matches!(forecast_errors(&recs, false), Err(Error::MissingForecast(_))));
    }

    #[test]
    fn kwp_spec_parsing() {
        assert_eq!("point:5".parse::<KwpDistribution>().unwrap().mean(), 5.0);
        let tri: KwpDistribution = "tri:2,5,10".parse().unwrap();
        assert!((tri.mean() - 17.0 / 3.0).abs() < 1e-12);
        let d: KwpDistribution = "discrete:3=2,5=2".parse().unwrap();
        assert_eq!(d.mean(), 4.0);
        assert_eq!(d.to_string().parse::<KwpDistribution>().unwrap(), d);
        for bad in ["tri:5,2,10", "point:0", "discrete:3=0", "gauss:1", "tri:1,2"] {
            assert!(bad.parse::<KwpDistribution>().is_err(), "{bad}");
        }
    }

    #[test]
    fn point_mass_scenario_is_scaled_day() {
        let s = series_of(&[(10, 0.8)]);
        let kwp = KwpDistribution::discrete(vec![(3.0, 0.0), (10.0, 1.0)]).unwrap();
        let sc = generate_pv_scenario(&s, 1, &kwp, &mut SeededSampler::new(1, 0)).unwrap();
        assert_eq!(sc.source_day, 10);
        assert_eq!(sc.kwp, 10.0);
        assert!((sc.power_kw[48] - 8.0).abs() < 1e-12);
        assert!(generate_pv_scenario(&s, 2, &kwp, &mut SeededSampler::new(1, 0)).is_err());
    }

    #[test]
    fn triangular_mean_converges() {
        let s = series_of(&[(152, 0.7), (160, 0.5)]);
        let kwp = KwpDistribution::triangular(2.0, 5.0, 10.0).unwrap();
        let batch = generate_pv_batch(&s, 6, &kwp, 1000, 17).unwrap();
        let mean = batch.iter().map(|b| b.kwp).sum::<f64>() / 1000.0;
        assert!((mean / (17.0 / 3.0) - 1.0).abs() < 0.02, "{mean}");
        assert!(batch.iter().all(|b| (2.0..=10.0).contains(&b.kwp)));
        assert_eq!(batch, generate_pv_batch(&s, 6, &kwp, 1000, 17).unwrap());
    }
}
