//! Calendar arithmetic for the analysis year.
//!
//! Analytics key everything by `(day_of_year, quarter_hour_slot)`. Source
//! files publish local Belgian wall-clock time, so a complete year contains a
//! missing hour in March and a repeated hour in October. Assigning slots by
//! sorted interval order turns that sequence into a uniform 96-slot grid.

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

pub const SLOTS_PER_DAY: usize = 96;
pub const SLOT_MINUTES: i64 = 15;

/// Timestamp formats tried, in order, after RFC 3339.
pub const DEFAULT_DATETIME_FORMATS: &[&str] = &[
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M",
    "%d/%m/%Y %H:%M:%S",
    "%d/%m/%Y %H:%M",
    "%d-%m-%Y %H:%M:%S",
    "%d-%m-%Y %H:%M",
];

/// How the published timestamps relate to the clock.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockConvention {
    /// Belgian local time with the EU summer-time switch.
    #[default]
    Local,
    /// A fixed offset: exactly 96 quarter-hours every day.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub year: i32,
}

impl Default for Calendar {
    fn default() -> Self {
        Calendar { year: 2022 }
    }
}

/// Position of a quarter-hour within the analysis year.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IntervalKey {
    /// 1-based day of year.
    pub day_of_year: u32,
    /// 0-based quarter-hour slot within the day.
    pub slot: u32,
}

impl IntervalKey {
    pub fn hour_of_day(&self) -> f64 {
        self.slot as f64 * SLOT_MINUTES as f64 / 60.0
    }
}

impl Calendar {
    pub fn new(year: i32) -> Self {
        Calendar { year }
    }

    pub fn days(&self) -> u32 {
        if NaiveDate::from_ymd_opt(self.year, 2, 29).is_some() {
            366
        } else {
            365
        }
    }

    /// Quarter-hour intervals in the year (35,040 for 2022).
    pub fn intervals(&self) -> usize {
        self.days() as usize * SLOTS_PER_DAY
    }

    pub fn start(&self) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(self.year, 1, 1)
            .expect("valid year")
            .and_hms_opt(0, 0, 0)
            .unwrap()
    }

    pub fn date_of_day(&self, day_of_year: u32) -> Option<NaiveDate> {
        NaiveDate::from_yo_opt(self.year, day_of_year)
    }

    /// Month (1-12) containing the given 1-based day of year.
    pub fn month_of_day(&self, day_of_year: u32) -> u32 {
        self.date_of_day(day_of_year.clamp(1, self.days()))
            .map(|d| d.month())
            .unwrap_or(1)
    }

    /// Day of year of a wall-clock timestamp, if it lies in this year.
    pub fn day_of_year(&self, ts: &NaiveDateTime) -> Option<u32> {
        (ts.year() == self.year).then(|| ts.ordinal())
    }

    /// Key of the interval at position `index` in year order.
    pub fn key_of_index(&self, index: usize) -> IntervalKey {
        IntervalKey {
            day_of_year: (index / SLOTS_PER_DAY) as u32 + 1,
            slot: (index % SLOTS_PER_DAY) as u32,
        }
    }

    /// Wall-clock key, ignoring any summer-time shift.
    pub fn wall_clock_key(&self, ts: &NaiveDateTime) -> Option<IntervalKey> {
        let day_of_year = self.day_of_year(ts)?;
        let slot = (ts.hour() * 60 + ts.minute()) / SLOT_MINUTES as u32;
        Some(IntervalKey { day_of_year, slot })
    }

    /// The local-time hours skipped in spring and repeated in autumn, each
    /// given by its 02:00 start.
    pub fn dst_hours(&self) -> (NaiveDateTime, NaiveDateTime) {
        let at_two = |month| {
            last_sunday(self.year, month)
                .and_hms_opt(2, 0, 0)
                .expect("02:00 exists")
        };
        (at_two(3), at_two(10))
    }

    /// The complete, sorted sequence of interval-start timestamps a gap-free
    /// file for this year contains under the given clock convention.
    pub fn expected_timestamps(&self, clock: ClockConvention) -> Vec<NaiveDateTime> {
        let step = Duration::minutes(SLOT_MINUTES);
        let (spring, autumn) = self.dst_hours();
        let hour = Duration::hours(1);
        let mut out = Vec::with_capacity(self.intervals() + 4);
        let mut ts = self.start();
        for _ in 0..self.intervals() {
            match clock {
                ClockConvention::Uniform => out.push(ts),
                ClockConvention::Local => {
                    if ts >= spring && ts < spring + hour {
                        // skipped hour
                    } else if ts >= autumn && ts < autumn + hour {
                        out.push(ts);
                        out.push(ts);
                    } else {
                        out.push(ts);
                    }
                }
            }
            ts += step;
        }
        out
    }
}

fn last_sunday(year: i32, month: u32) -> NaiveDate {
    let first_next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    let mut d = first_next.pred_opt().unwrap();
    while d.weekday() != Weekday::Sun {
        d = d.pred_opt().unwrap();
    }
    d
}

/// Parse a published timestamp as wall-clock time. An explicit UTC offset or
/// `Z` suffix is accepted and dropped: the local reading as published is kept.
pub fn parse_timestamp(raw: &str, formats: &[String]) -> Option<NaiveDateTime> {
    let s = raw.trim();
    if s.is_empty() {
        return None;
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_local());
    }
    let s = s.strip_suffix('Z').unwrap_or(s);
    let try_all = |s: &str| {
        let custom = formats.iter().map(String::as_str);
        custom
            .chain(DEFAULT_DATETIME_FORMATS.iter().copied())
            .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
    };
    if let Some(ts) = try_all(s) {
        return Some(ts);
    }
    // "+01:00" / "+0100" suffix not covered by RFC 3339 (e.g. space separated)
    let cut = s.rfind(['+', '-'])?;
    let (head, tail) = s.split_at(cut);
    let digits = tail[1..].replace(':', "");
    if digits.len() == 4 && digits.bytes().all(|b| b.is_ascii_digit()) && head.contains(':') {
        try_all(head.trim_end())
    } else {
        None
    }
}

/// Fractional hour of day of a timestamp.
pub fn hour_of_day(ts: &NaiveDateTime) -> f64 {
    ts.hour() as f64 + ts.minute() as f64 / 60.0 + ts.second() as f64 / 3600.0
}
