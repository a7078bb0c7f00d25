//! Brute-force oracles shared by the integration suites. They recount from
//! raw samples with plain loops and never call the library's binning.

#![allow(dead_code)]

use std::collections::BTreeMap;

use gridscen::calendar::Calendar;
use gridscen::ev_scenario::ChargingSession;
use gridscen::ingest::RawSessionRecord;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Bin index of `x` for bins `[lo + i*w, lo + (i+1)*w)`, `n` bins.
pub fn bin(x: f64, lo: f64, w: f64, n: usize) -> Option<usize> {
    (0..n).find(|&i| {
        let a = lo + i as f64 * w;
        let b = lo + (i + 1) as f64 * w;
        x >= a && x < b
    })
}

pub fn count_1d(xs: &[f64], lo: f64, w: f64, n: usize) -> Vec<u64> {
    let mut c = vec![0; n];
    for &x in xs {
        if let Some(i) = bin(x, lo, w, n) {
            c[i] += 1;
        }
    }
    c
}

pub fn count_2d(pairs: &[(f64, f64)], a: (f64, f64, usize), b: (f64, f64, usize)) -> Vec<Vec<u64>> {
    let mut c = vec![vec![0; b.2]; a.2];
    for &(x, y) in pairs {
        if let (Some(i), Some(j)) = (bin(x, a.0, a.1, a.2), bin(y, b.0, b.1, b.2)) {
            c[i][j] += 1;
        }
    }
    c
}

pub fn count_joint(
    rows: &[([f64; 3], f64)],
    conds: [(f64, f64, usize); 3],
    target: (f64, f64, usize),
) -> BTreeMap<Vec<usize>, Vec<u64>> {
    let mut out: BTreeMap<Vec<usize>, Vec<u64>> = BTreeMap::new();
    for (c, t) in rows {
        let key: Option<Vec<usize>> = c
            .iter()
            .zip(conds.iter())
            .map(|(&x, s)| bin(x, s.0, s.1, s.2))
            .collect();
        let (Some(key), Some(j)) = (key, bin(*t, target.0, target.1, target.2)) else {
            continue;
        };
        out.entry(key).or_insert_with(|| vec![0; target.2])[j] += 1;
    }
    out
}

/// Start (1-based) and count of the best window, earliest on ties, found
/// by summing every window from scratch.
pub fn exhaustive_window(counts: &[u64], w: usize) -> (u32, u64) {
    let w = w.min(counts.len());
    let mut best = (1u32, 0u64);
    let mut first = true;
    for start in 0..=counts.len() - w {
        let s: u64 = counts[start..start + w].iter().sum();
        if first || s > best.1 {
            best = (start as u32 + 1, s);
            first = false;
        }
    }
    best
}

/// Type-7 quantile by definition.
pub fn quantile7(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// A session from archetypes (commuter, evening, fleet) with jitter: dense
/// enough joint tables that restarts stay rare.
pub fn archetype_session(r: &mut StdRng) -> ChargingSession {
    let (arr, conn, peak) = match r.random_range(0..3) {
        0 => (r.random_range(7.0..9.0), r.random_range(8.0..10.0), 11.0),
        1 => (r.random_range(17.0..19.0), r.random_range(12.0..14.0), 3.7),
        _ => (r.random_range(12.0..13.0), r.random_range(2.0..3.0), 7.4),
    };
    let peak = peak + r.random_range(-0.3..0.3);
    let charge = conn * r.random_range(0.2..0.5);
    let energy = (peak * charge * r.random_range(0.5f64..0.95)).min(89.0);
    let dep = (arr + conn) % 24.0;
    ChargingSession {
        arrival_h: arr,
        departure_h: dep,
        connection_h: (dep - arr).rem_euclid(24.0),
        charge_h: charge,
        peak_kw: peak,
        energy_kwh: energy,
    }
}

pub fn session_record(id: usize, s: &ChargingSession) -> RawSessionRecord {
    let day = chrono::NaiveDate::from_ymd_opt(2019, 3, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let arrival = day + chrono::Duration::seconds((s.arrival_h * 3600.0).round() as i64);
    let departure = arrival + chrono::Duration::seconds((s.connection_h * 3600.0).round() as i64);
    RawSessionRecord {
        session_id: format!("s{id}"),
        arrival,
        departure,
        connection_time: s.connection_h,
        charge_time: s.charge_h,
        peak_power: s.peak_kw,
        charged_energy: s.energy_kwh,
    }
}

/// Interval index of day-of-year `day` (1-based) at `hour:minute`.
pub fn interval(day: u32, hour: u32, minute: u32) -> usize {
    (day as usize - 1) * 96 + (hour * 4 + minute / 15) as usize
}

pub fn year() -> Calendar {
    Calendar::new(2022)
}
