//! Consumer pools: per-consumer peak metadata, pool summaries in the
//! column layout of the published load-profile summary table, annual-peak
//! day distributions, worst-week detection and weather slicing.

use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::calendar::Calendar;
use crate::error::{Error, Result};
use crate::ingest::WeatherRecord;

/// Quarter-hour energy to average power.
pub const KWH_PER_INTERVAL_TO_KW: f64 = 4.0;

/// The five disjoint consumer categories, by installed assets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum ConsumerType {
    /// Type 1: no PV, EV or heat pump.
    Plain,
    /// Type 2: PV only.
    Pv,
    /// Type 3: EV only.
    Ev,
    /// Type 4: PV and heat pump.
    PvHeatPump,
    /// Type 5: PV and EV.
    PvEv,
}

impl ConsumerType {
    pub const ALL: [ConsumerType; 5] = [
        ConsumerType::Plain,
        ConsumerType::Pv,
        ConsumerType::Ev,
        ConsumerType::PvHeatPump,
        ConsumerType::PvEv,
    ];

    pub fn code(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get((code as usize).checked_sub(1)?).copied()
    }

    /// Type for an asset combination; combinations outside the five
    /// categories have none.
    pub fn from_assets(pv: bool, ev: bool, hp: bool) -> Option<Self> {
        match (pv, ev, hp) {
            (false, false, false) => Some(ConsumerType::Plain),
            (true, false, false) => Some(ConsumerType::Pv),
            (false, true, false) => Some(ConsumerType::Ev),
            (true, false, true) => Some(ConsumerType::PvHeatPump),
            (true, true, false) => Some(ConsumerType::PvEv),
            _ => None,
        }
    }

    pub fn has_pv(self) -> bool {
        matches!(self, ConsumerType::Pv | ConsumerType::PvHeatPump | ConsumerType::PvEv)
    }

    pub fn has_ev(self) -> bool {
        matches!(self, ConsumerType::Ev | ConsumerType::PvEv)
    }

    pub fn has_hp(self) -> bool {
        self == ConsumerType::PvHeatPump
    }

    pub fn label(self) -> &'static str {
        match self {
            ConsumerType::Plain => "Type 1: no PV, EV, HP",
            ConsumerType::Pv => "Type 2: only PV",
            ConsumerType::Ev => "Type 3: only EV",
            ConsumerType::PvHeatPump => "Type 4: with HP, PV",
            ConsumerType::PvEv => "Type 5: with EV, PV",
        }
    }
}

impl From<ConsumerType> for u8 {
    fn from(t: ConsumerType) -> u8 {
        t.code()
    }
}

impl TryFrom<u8> for ConsumerType {
    type Error = String;

    fn try_from(code: u8) -> std::result::Result<Self, String> {
        ConsumerType::from_code(code).ok_or_else(|| format!("consumer type {code} not in 1..=5"))
    }
}

/// One consumer's year of quarter-hour net energy (kWh, export negative).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsumerProfile {
    pub consumer_id: String,
    pub consumer_type: ConsumerType,
    pub net_kwh: Vec<f64>,
}

impl ConsumerProfile {
    pub fn new(
        consumer_id: String,
        consumer_type: ConsumerType,
        net_kwh: Vec<f64>,
        calendar: &Calendar,
    ) -> Result<Self> {
        if net_kwh.len() != calendar.intervals() {
            return Err(Error::InvalidArgument(format!(
                "profile {consumer_id} has {} intervals, {} expected for {}",
                net_kwh.len(),
                calendar.intervals(),
                calendar.year
            )));
        }
        Ok(ConsumerProfile {
            consumer_id,
            consumer_type,
            net_kwh,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsumerMetadata {
    pub consumer_id: String,
    pub consumer_type: ConsumerType,
    pub annual_net_kwh: f64,
    pub peak_kw: f64,
    /// Hour of day of the peak interval's start.
    pub peak_time: f64,
    pub peak_month: u32,
    pub peak_day_of_year: u32,
    /// Most negative (or least positive) power of the year.
    pub reverse_peak_kw: f64,
    pub reverse_peak_time: f64,
    pub reverse_peak_month: u32,
    pub reverse_peak_day_of_year: u32,
}

/// Annual net energy and the (reverse) peak intervals, earliest interval
/// winning ties.
pub fn consumer_metadata(profile: &ConsumerProfile, calendar: &Calendar) -> ConsumerMetadata {
    let net = &profile.net_kwh;
    let mut max_i = 0;
    let mut min_i = 0;
    for (i, &v) in net.iter().enumerate() {
        if v > net[max_i] {
            max_i = i;
        }
        if v < net[min_i] {
            min_i = i;
        }
    }
    let peak = calendar.key_of_index(max_i);
    let reverse = calendar.key_of_index(min_i);
    ConsumerMetadata {
        consumer_id: profile.consumer_id.clone(),
        consumer_type: profile.consumer_type,
        annual_net_kwh: net.iter().sum(),
        peak_kw: net.get(max_i).copied().unwrap_or(0.0) * KWH_PER_INTERVAL_TO_KW,
        peak_time: peak.hour_of_day(),
        peak_month: calendar.month_of_day(peak.day_of_year),
        peak_day_of_year: peak.day_of_year,
        reverse_peak_kw: net.get(min_i).copied().unwrap_or(0.0) * KWH_PER_INTERVAL_TO_KW,
        reverse_peak_time: reverse.hour_of_day(),
        reverse_peak_month: calendar.month_of_day(reverse.day_of_year),
        reverse_peak_day_of_year: reverse.day_of_year,
    }
}

/// Metadata for every profile, in input order.
pub fn pool_metadata(profiles: &[ConsumerProfile], calendar: &Calendar) -> Vec<ConsumerMetadata> {
    use rayon::prelude::*;
    profiles
        .par_iter()
        .map(|p| consumer_metadata(p, calendar))
        .collect()
}

/// One row of the pool summary table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolSummary {
    pub label: String,
    pub consumer_count: usize,
    pub probability: f64,
    pub mean_net_kwh: f64,
    pub max_net_kwh: f64,
    pub min_net_kwh: f64,
    pub mean_peak_kw: f64,
    pub mean_reverse_kw: f64,
    /// Most common peak hour (1-hour bins, smallest hour on ties).
    pub mode_peak_time: f64,
    pub mode_peak_month: u32,
    pub mode_reverse_peak_time: f64,
    pub mode_reverse_peak_month: u32,
    pub mean_peak_time: f64,
    pub mean_reverse_peak_time: f64,
}

impl PoolSummary {
    pub const COLUMNS: [&'static str; 12] = [
        "pool",
        "consumers",
        "probability",
        "mean_net_kwh",
        "max_net_kwh",
        "min_net_kwh",
        "mean_peak_kw",
        "mean_reverse_kw",
        "mode_peak_time",
        "peak_month",
        "reverse_peak_time",
        "reverse_peak_month",
    ];
}

fn mode<T: Ord + Copy>(values: impl Iterator<Item = T>) -> Option<T> {
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_insert(0) += 1;
    }
    // first maximal entry in key order: ties go to the smallest value
    counts
        .iter()
        .fold(None, |best: Option<(T, usize)>, (&k, &c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((k, c)),
        })
        .map(|(k, _)| k)
}

/// Summary of a pool from precomputed metadata. `denominator` is the
/// population the probability column is relative to.
pub fn summarize(label: &str, pool: &[&ConsumerMetadata], denominator: usize) -> Result<PoolSummary> {
    if pool.is_empty() {
        return Err(Error::EmptyScope(format!("pool {label:?}")));
    }
    if denominator < pool.len() {
        return Err(Error::InvalidArgument(format!(
            "population {denominator} smaller than pool {label:?} of {}",
            pool.len()
        )));
    }
    let n = pool.len() as f64;
    let mean = |f: fn(&ConsumerMetadata) -> f64| pool.iter().map(|m| f(m)).sum::<f64>() / n;
    let nets = pool.iter().map(|m| m.annual_net_kwh);
    let hour_bin = |h: f64| h.floor() as u32;
    Ok(PoolSummary {
        label: label.to_string(),
        consumer_count: pool.len(),
        probability: pool.len() as f64 / denominator as f64,
        mean_net_kwh: mean(|m| m.annual_net_kwh),
        max_net_kwh: nets.clone().fold(f64::NEG_INFINITY, f64::max),
        min_net_kwh: nets.fold(f64::INFINITY, f64::min),
        mean_peak_kw: mean(|m| m.peak_kw),
        mean_reverse_kw: mean(|m| m.reverse_peak_kw),
        mode_peak_time: mode(pool.iter().map(|m| hour_bin(m.peak_time))).unwrap_or(0) as f64,
        mode_peak_month: mode(pool.iter().map(|m| m.peak_month)).unwrap_or(1),
        mode_reverse_peak_time: mode(pool.iter().map(|m| hour_bin(m.reverse_peak_time))).unwrap_or(0)
            as f64,
        mode_reverse_peak_month: mode(pool.iter().map(|m| m.reverse_peak_month)).unwrap_or(1),
        mean_peak_time: mean(|m| m.peak_time),
        mean_reverse_peak_time: mean(|m| m.reverse_peak_time),
    })
}

/// Summary of a pool of profiles relative to `total_population`.
pub fn pool_summary(
    label: &str,
    pool: &[ConsumerProfile],
    total_population: usize,
    calendar: &Calendar,
) -> Result<PoolSummary> {
    let meta = pool_metadata(pool, calendar);
    let refs: Vec<&ConsumerMetadata> = meta.iter().collect();
    summarize(label, &refs, total_population)
}

/// A named subset of the population, with the population its probability
/// is conditioned on.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedPool<'a> {
    pub label: String,
    pub members: Vec<&'a ConsumerMetadata>,
    pub denominator: usize,
}

/// The summary-table pools in table order: everyone, each type, then the
/// asset-derived pools. The two conditional pools ("no EV given PV", "no HP
/// given PV") take the PV pool as their denominator.
pub fn derived_pools(all: &[ConsumerMetadata]) -> Vec<NamedPool<'_>> {
    let total = all.len();
    let select = |f: &dyn Fn(ConsumerType) -> bool| -> Vec<&ConsumerMetadata> {
        all.iter().filter(|m| f(m.consumer_type)).collect()
    };
    let pv = select(&|t| t.has_pv());
    let pv_count = pv.len();
    let mut pools = vec![NamedPool {
        label: "Total # consumers".into(),
        members: all.iter().collect(),
        denominator: total,
    }];
    for t in ConsumerType::ALL {
        pools.push(NamedPool {
            label: t.label().into(),
            members: select(&|x| x == t),
            denominator: total,
        });
    }
    pools.push(NamedPool {
        label: "Consumers with PV".into(),
        members: pv,
        denominator: total,
    });
    pools.push(NamedPool {
        label: "Consumers with EV".into(),
        members: select(&|t| t.has_ev()),
        denominator: total,
    });
    pools.push(NamedPool {
        label: "P(no EV given PV)".into(),
        members: select(&|t| t.has_pv() && !t.has_ev()),
        denominator: pv_count,
    });
    pools.push(NamedPool {
        label: "P(no HP given PV)".into(),
        members: select(&|t| t.has_pv() && !t.has_hp()),
        denominator: pv_count,
    });
    pools
}

/// Summaries for every non-empty derived pool, in table order.
pub fn summary_table(all: &[ConsumerMetadata]) -> Result<Vec<PoolSummary>> {
    derived_pools(all)
        .iter()
        .filter(|p| !p.members.is_empty())
        .map(|p| summarize(&p.label, &p.members, p.denominator))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakKind {
    Peak,
    Reverse,
}

/// How many consumers have their annual (reverse) peak on each day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayHistogram {
    pub kind: PeakKind,
    /// `counts[d - 1]` is the count for day of year `d`.
    pub counts: Vec<u64>,
    pub pool_size: usize,
}

impl DayHistogram {
    pub fn count(&self, day_of_year: u32) -> u64 {
        self.counts[day_of_year as usize - 1]
    }

    /// Share of the pool peaking within `start..=end`.
    pub fn fraction_within(&self, start: u32, end: u32) -> f64 {
        if self.pool_size == 0 {
            return 0.0;
        }
        let s: u64 = (start..=end).map(|d| self.count(d)).sum();
        s as f64 / self.pool_size as f64
    }
}

pub fn peak_day_distribution(
    pool: &[&ConsumerMetadata],
    kind: PeakKind,
    calendar: &Calendar,
) -> DayHistogram {
    let mut counts = vec![0u64; calendar.days() as usize];
    for m in pool {
        let day = match kind {
            PeakKind::Peak => m.peak_day_of_year,
            PeakKind::Reverse => m.reverse_peak_day_of_year,
        };
        counts[day as usize - 1] += 1;
    }
    DayHistogram {
        kind,
        counts,
        pool_size: pool.len(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeWeek {
    pub start_day: u32,
    /// Inclusive.
    pub end_day: u32,
    pub fraction: f64,
}

/// The window of `window_days` consecutive days with the most peaks;
/// earliest start wins ties. Windows do not wrap around the year end.
pub fn worst_week(hist: &DayHistogram, window_days: u32) -> Result<RepresentativeWeek> {
    if window_days == 0 {
        return Err(Error::InvalidArgument("window must span at least one day".into()));
    }
    let days = hist.counts.len();
    let w = (window_days as usize).min(days);
    let mut sum: u64 = hist.counts[..w].iter().sum();
    let (mut best, mut best_start) = (sum, 0usize);
    for start in 1..=days - w {
        sum = sum + hist.counts[start + w - 1] - hist.counts[start - 1];
        if sum > best {
            best = sum;
            best_start = start;
        }
    }
    Ok(RepresentativeWeek {
        start_day: best_start as u32 + 1,
        end_day: (best_start + w) as u32,
        fraction: if hist.pool_size == 0 {
            0.0
        } else {
            best as f64 / hist.pool_size as f64
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyWeather {
    pub day_of_year: u32,
    pub records: usize,
    pub mean_temp: f64,
    pub total_rainfall: f64,
    /// Irradiation over the records with GHI > 0, Wh/m².
    pub daylight_ghi_wh_m2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeatherSlice {
    pub week: RepresentativeWeek,
    pub records: Vec<WeatherRecord>,
    pub daily: Vec<DailyWeather>,
}

fn record_step_hours(records: &[WeatherRecord]) -> f64 {
    records
        .windows(2)
        .map(|w| (w[1].timestamp - w[0].timestamp).num_seconds())
        .filter(|&s| s > 0)
        .min()
        .map(|s| s as f64 / 3600.0)
        .unwrap_or(0.25)
}

/// Weather records inside the window plus per-day aggregates.
pub fn align_weather(
    weather: &[WeatherRecord],
    week: &RepresentativeWeek,
    calendar: &Calendar,
) -> Result<WeatherSlice> {
    let in_window = |ts: &NaiveDateTime| {
        calendar
            .day_of_year(ts)
            .is_some_and(|d| (week.start_day..=week.end_day).contains(&d))
    };
    let mut records: Vec<WeatherRecord> = weather
        .iter()
        .filter(|r| in_window(&r.timestamp))
        .cloned()
        .collect();
    if records.is_empty() {
        return Err(Error::NoWeatherOverlap {
            start: week.start_day,
            end: week.end_day,
        });
    }
    records.sort_by_key(|r| r.timestamp);
    let step = record_step_hours(&records);
    let mut by_day: BTreeMap<u32, Vec<&WeatherRecord>> = BTreeMap::new();
    for r in &records {
        let d = calendar.day_of_year(&r.timestamp).expect("filtered to year");
        by_day.entry(d).or_default().push(r);
    }
    let daily = by_day
        .into_iter()
        .map(|(day, rs)| DailyWeather {
            day_of_year: day,
            records: rs.len(),
            mean_temp: rs.iter().map(|r| r.ambient_temp).sum::<f64>() / rs.len() as f64,
            total_rainfall: rs.iter().map(|r| r.rainfall).sum(),
            daylight_ghi_wh_m2: rs.iter().filter(|r| r.ghi > 0.0).map(|r| r.ghi * step).sum(),
        })
        .collect();
    Ok(WeatherSlice {
        week: *week,
        records,
        daily,
    })
}
