//! EV charging-session model and scenario generator.
//!
//! The model holds five empirical distributions fitted on one session set:
//! arrival hour, departure hour given arrival, peak power, charged energy
//! given peak power, and charge time given (connection time, peak power,
//! energy). A scenario is drawn stage by stage with roulette-wheel sampling:
//!
//! 1. arrival from its marginal;
//! 2. departure from the row of the arrival bin, connection time being the
//!    difference modulo 24 h;
//! 3. peak power, then energy from the row of the peak-power bin;
//! 4. charge time from the joint cell of (connection, peak, energy).
//!
//! When the joint cell was never observed the draw is discarded and the
//! pipeline restarts from step 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::empdist::{
    build_conditional, build_histogram, build_joint_conditional, rws_sample_bin, sample_in_bin,
    BinSpec, ConditionalTable, Histogram1D, JointConditionalTable, JointLookup, SeededSampler,
    Unit, WithinBin,
};
use crate::error::{Error, Result};
use crate::ingest::RawSessionRecord;

/// Slack on `E_ch <= P_peak * Δt_ch`.
pub const ENERGY_SLACK_KWH: f64 = 1e-6;
/// Within-bin redraws tried before a scenario is restarted.
pub const WITHIN_BIN_RETRIES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargingSession {
    /// Hour of day in [0, 24).
    pub arrival_h: f64,
    pub departure_h: f64,
    pub connection_h: f64,
    pub charge_h: f64,
    pub peak_kw: f64,
    pub energy_kwh: f64,
}

fn hours_between(arrival_h: f64, departure_h: f64) -> f64 {
    let d = (departure_h - arrival_h).rem_euclid(24.0);
    if d >= 24.0 {
        0.0
    } else {
        d
    }
}

impl ChargingSession {
    /// Session in hour-of-day terms. Connection time is taken from the
    /// timestamps so that it equals departure minus arrival modulo 24 h.
    pub fn from_record(r: &RawSessionRecord) -> Self {
        let arrival_h = crate::calendar::hour_of_day(&r.arrival);
        let departure_h = crate::calendar::hour_of_day(&r.departure);
        ChargingSession {
            arrival_h,
            departure_h,
            connection_h: hours_between(arrival_h, departure_h),
            charge_h: r.charge_time,
            peak_kw: r.peak_power,
            energy_kwh: r.charged_energy,
        }
    }

    /// Charge fits in the connection and energy fits under the peak.
    pub fn is_consistent(&self) -> bool {
        self.charge_h <= self.connection_h
            && self.energy_kwh <= self.peak_kw * self.charge_h + ENERGY_SLACK_KWH
            && (self.charge_h > 0.0 || self.energy_kwh == 0.0)
    }
}

/// Discretization of the six session variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionBins {
    pub arrival: BinSpec,
    pub departure: BinSpec,
    pub connection: BinSpec,
    pub charge: BinSpec,
    pub peak_power: BinSpec,
    pub energy: BinSpec,
}

impl Default for SessionBins {
    fn default() -> Self {
        let spec = |lo, w, n, u| BinSpec::new(lo, w, n, u).expect("valid default bins");
        SessionBins {
            arrival: spec(0.0, 1.0, 24, Unit::Hours),
            departure: spec(0.0, 1.0, 24, Unit::Hours),
            connection: spec(0.0, 0.5, 48, Unit::Hours),
            charge: spec(0.0, 0.5, 48, Unit::Hours),
            peak_power: spec(0.0, 1.0, 23, Unit::Kw),
            energy: spec(0.0, 2.0, 45, Unit::Kwh),
        }
    }
}

impl SessionBins {
    fn contains(&self, s: &ChargingSession) -> bool {
        self.arrival.bin_of(s.arrival_h).is_some()
            && self.departure.bin_of(s.departure_h).is_some()
            && self.connection.bin_of(s.connection_h).is_some()
            && self.charge.bin_of(s.charge_h).is_some()
            && self.peak_power.bin_of(s.peak_kw).is_some()
            && self.energy.bin_of(s.energy_kwh).is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionModel {
    pub bins: SessionBins,
    pub pdf_arrival: Histogram1D,
    pub cond_departure: ConditionalTable,
    pub pdf_peak_power: Histogram1D,
    pub cond_energy: ConditionalTable,
    pub joint_charge_time: JointConditionalTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub sessions_used: usize,
    /// Sessions with a variable outside its bin range.
    pub sessions_excluded: usize,
    pub occupied_arrival_bins: usize,
    pub occupied_peak_bins: usize,
    pub empty_departure_rows: usize,
    pub empty_energy_rows: usize,
    pub joint_cells: usize,
}

pub fn fit_session_model(
    records: &[RawSessionRecord],
    bins: &SessionBins,
) -> Result<(SessionModel, FitSummary)> {
    let sessions: Vec<ChargingSession> = records.iter().map(ChargingSession::from_record).collect();
    fit_sessions(&sessions, bins)
}

/// Fit all five distributions on the sessions that lie inside every bin
/// range, so the tables share one session set.
pub fn fit_sessions(
    sessions: &[ChargingSession],
    bins: &SessionBins,
) -> Result<(SessionModel, FitSummary)> {
    if sessions.is_empty() {
        return Err(Error::EmptyDistribution("no sessions to fit".into()));
    }
    let used: Vec<&ChargingSession> = sessions.iter().filter(|s| bins.contains(s)).collect();
    if used.is_empty() {
        return Err(Error::EmptyDistribution(format!(
            "none of {} sessions lies inside the bin ranges",
            sessions.len()
        )));
    }
    let arrivals: Vec<f64> = used.iter().map(|s| s.arrival_h).collect();
    let peaks: Vec<f64> = used.iter().map(|s| s.peak_kw).collect();
    let arr_dep: Vec<(f64, f64)> = used.iter().map(|s| (s.arrival_h, s.departure_h)).collect();
    let peak_energy: Vec<(f64, f64)> = used.iter().map(|s| (s.peak_kw, s.energy_kwh)).collect();
    let joint: Vec<([f64; 3], f64)> = used
        .iter()
        .map(|s| ([s.connection_h, s.peak_kw, s.energy_kwh], s.charge_h))
        .collect();

    let model = SessionModel {
        bins: bins.clone(),
        pdf_arrival: build_histogram(&arrivals, bins.arrival)?,
        cond_departure: build_conditional(&arr_dep, bins.arrival, bins.departure),
        pdf_peak_power: build_histogram(&peaks, bins.peak_power)?,
        cond_energy: build_conditional(&peak_energy, bins.peak_power, bins.energy),
        joint_charge_time: build_joint_conditional(
            &joint,
            [bins.connection, bins.peak_power, bins.energy],
            bins.charge,
        ),
    };
    let summary = FitSummary {
        sessions_used: used.len(),
        sessions_excluded: sessions.len() - used.len(),
        occupied_arrival_bins: model.pdf_arrival.nonempty_bins().len(),
        occupied_peak_bins: model.pdf_peak_power.nonempty_bins().len(),
        empty_departure_rows: model.cond_departure.empty_rows().len(),
        empty_energy_rows: model.cond_energy.empty_rows().len(),
        joint_cells: model.joint_charge_time.cell_count(),
    };
    Ok((model, summary))
}

/// How peak power is drawn in step 3.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakSampling {
    /// Roulette wheel over the fitted marginal.
    #[default]
    Marginal,
    /// Uniform over the occupied peak-power bins.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationOptions {
    pub peak_sampling: PeakSampling,
    pub within_bin: WithinBin,
    pub max_attempts: usize,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        GenerationOptions {
            peak_sampling: PeakSampling::Marginal,
            within_bin: WithinBin::Uniform,
            max_attempts: 1000,
        }
    }
}

/// Per-scenario attempt accounting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptStats {
    pub attempts: usize,
    /// Restarts caused by an unobserved joint cell.
    pub no_occurrence: usize,
    /// Restarts after within-bin redraws stayed inconsistent.
    pub inconsistent: usize,
}

impl AttemptStats {
    fn absorb(&mut self, other: &AttemptStats) {
        self.attempts += other.attempts;
        self.no_occurrence += other.no_occurrence;
        self.inconsistent += other.inconsistent;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSession {
    pub session: ChargingSession,
    pub stats: AttemptStats,
}

fn sample_peak(
    model: &SessionModel,
    sampler: &mut SeededSampler,
    opts: &GenerationOptions,
) -> Result<(usize, f64)> {
    let pdf = &model.pdf_peak_power;
    match opts.peak_sampling {
        PeakSampling::Marginal => rws_sample_bin(pdf, sampler, opts.within_bin),
        PeakSampling::Uniform => {
            let occupied = pdf.nonempty_bins();
            if occupied.is_empty() {
                return Err(Error::EmptyDistribution("peak-power marginal".into()));
            }
            let bin = occupied[sampler.index(occupied.len())];
            Ok((bin, sample_in_bin(pdf.spec(), bin, sampler, opts.within_bin)))
        }
    }
}

/// Draw one session through the staged pipeline.
pub fn generate_session(
    model: &SessionModel,
    sampler: &mut SeededSampler,
    opts: &GenerationOptions,
) -> Result<GeneratedSession> {
    let bins = &model.bins;
    let within = opts.within_bin;
    let mut stats = AttemptStats::default();
    while stats.attempts < opts.max_attempts {
        stats.attempts += 1;

        let (arr_bin, arrival_h) = rws_sample_bin(&model.pdf_arrival, sampler, within)?;
        let dep_row = model
            .cond_departure
            .row(arr_bin)
            .ok_or_else(|| Error::EmptyDistribution(format!("departure row for arrival bin {arr_bin}")))?;
        let departure_h = rws_sample_bin(dep_row, sampler, within)?.1;
        let connection_h = hours_between(arrival_h, departure_h);

        let (peak_bin, mut peak_kw) = sample_peak(model, sampler, opts)?;
        let energy_row = model
            .cond_energy
            .row(peak_bin)
            .ok_or_else(|| Error::EmptyDistribution(format!("energy row for peak bin {peak_bin}")))?;
        let (energy_bin, mut energy_kwh) = rws_sample_bin(energy_row, sampler, within)?;

        let cell = match bins.connection.bin_of(connection_h) {
            Some(conn_bin) => model
                .joint_charge_time
                .lookup_bins(&[conn_bin, peak_bin, energy_bin]),
            None => JointLookup::NoOccurrence,
        };
        let JointLookup::Found(charge_dist) = cell else {
            stats.no_occurrence += 1;
            continue;
        };
        let (charge_bin, mut charge_h) = rws_sample_bin(charge_dist, sampler, within)?;

        for retry in 0..=WITHIN_BIN_RETRIES {
            if retry > 0 {
                peak_kw = sample_in_bin(&bins.peak_power, peak_bin, sampler, within);
                energy_kwh = sample_in_bin(&bins.energy, energy_bin, sampler, within);
                charge_h = sample_in_bin(&bins.charge, charge_bin, sampler, within);
            }
            let session = ChargingSession {
                arrival_h,
                departure_h,
                connection_h,
                charge_h,
                peak_kw,
                energy_kwh,
            };
            if session.is_consistent() {
                return Ok(GeneratedSession { session, stats });
            }
        }
        stats.inconsistent += 1;
    }
    Err(Error::AttemptsExhausted {
        attempts: stats.attempts,
        no_occurrence: stats.no_occurrence,
        inconsistent: stats.inconsistent,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionBatch {
    pub seed: u64,
    pub sessions: Vec<ChargingSession>,
    pub stats: AttemptStats,
    /// Largest number of attempts any single scenario needed.
    pub max_attempts_used: usize,
}

/// `n` sessions; scenario `i` uses sampler stream `i`, so the batch does
/// not depend on how the work is scheduled across threads.
pub fn generate_batch(
    model: &SessionModel,
    n: usize,
    seed: u64,
    opts: &GenerationOptions,
) -> Result<SessionBatch> {
    if n == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    let results: Vec<Result<GeneratedSession>> = (0..n)
        .into_par_iter()
        .map(|i| generate_session(model, &mut SeededSampler::new(seed, i as u64), opts))
        .collect();
    let mut sessions = Vec::with_capacity(n);
    let mut stats = AttemptStats::default();
    let mut max_attempts_used = 0;
    for r in results {
        let g = r?;
        stats.absorb(&g.stats);
        max_attempts_used = max_attempts_used.max(g.stats.attempts);
        sessions.push(g.session);
    }
    Ok(SessionBatch {
        seed,
        sessions,
        stats,
        max_attempts_used,
    })
}

/// Charging power per time slot over the arrival day and the following day
/// (for sessions running past midnight).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub resolution_min: u32,
    pub power_kw: Vec<f64>,
}

impl PowerProfile {
    pub fn slot_hours(&self) -> f64 {
        self.resolution_min as f64 / 60.0
    }

    pub fn slots_per_day(&self) -> usize {
        (24 * 60 / self.resolution_min) as usize
    }

    /// Energy delivered over the profile, kWh.
    pub fn energy_kwh(&self) -> f64 {
        self.power_kw.iter().sum::<f64>() * self.slot_hours()
    }

    /// Wraps the spill-over day onto the arrival day: the 24 h view of a
    /// daily recurring session.
    pub fn folded(&self) -> PowerProfile {
        let n = self.slots_per_day();
        let mut day = self.power_kw[..n.min(self.power_kw.len())].to_vec();
        for (i, p) in self.power_kw.iter().enumerate().skip(n) {
            day[i % n] += p;
        }
        PowerProfile {
            resolution_min: self.resolution_min,
            power_kw: day,
        }
    }
}

fn check_resolution(resolution_min: u32) -> Result<()> {
    if resolution_min == 0 || 1440 % resolution_min != 0 {
        return Err(Error::InvalidArgument(format!(
            "resolution {resolution_min} min does not divide a day"
        )));
    }
    Ok(())
}

/// Non-smart charging: constant power `E / Δt_ch` from arrival until the
/// energy is delivered, capped at the session peak, zero afterwards. Slots
/// cut by the start or end get the prorated share.
pub fn synthesize_power_profile(session: &ChargingSession, resolution_min: u32) -> Result<PowerProfile> {
    check_resolution(resolution_min)?;
    let slots_per_day = (1440 / resolution_min) as usize;
    let mut power_kw = vec![0.0; 2 * slots_per_day];
    let s = session;
    if s.energy_kwh < 0.0 || s.charge_h < 0.0 || !(0.0..24.0).contains(&s.arrival_h) {
        return Err(Error::InvalidSession(format!("{s:?}")));
    }
    if s.energy_kwh == 0.0 {
        return Ok(PowerProfile {
            resolution_min,
            power_kw,
        });
    }
    if s.charge_h == 0.0 {
        return Err(Error::InvalidSession(format!(
            "{} kWh delivered in zero charge time",
            s.energy_kwh
        )));
    }
    let avg_kw = (s.energy_kwh / s.charge_h).min(s.peak_kw.max(0.0));
    let slot_h = resolution_min as f64 / 60.0;
    let (start, end) = (s.arrival_h, s.arrival_h + s.charge_h);
    let first = (start / slot_h).floor() as usize;
    for (k, p) in power_kw.iter_mut().enumerate().skip(first) {
        let (a, b) = (k as f64 * slot_h, (k + 1) as f64 * slot_h);
        if a >= end {
            break;
        }
        let overlap = b.min(end) - a.max(start);
        if overlap > 0.0 {
            *p = avg_kw * (overlap / slot_h).min(1.0);
        }
    }
    Ok(PowerProfile {
        resolution_min,
        power_kw,
    })
}

/// Per-slot percentile bands across an ensemble of profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanchartTable {
    pub resolution_min: u32,
    /// Percent, ascending.
    pub levels: Vec<f64>,
    /// `values[level][slot]`, kW.
    pub values: Vec<Vec<f64>>,
}

pub const DEFAULT_FAN_LEVELS: [f64; 5] = [5.0, 25.0, 50.0, 75.0, 95.0];

pub fn fanchart(profiles: &[PowerProfile], levels: &[f64]) -> Result<FanchartTable> {
    let first = profiles
        .first()
        .ok_or_else(|| Error::EmptyDistribution("fanchart of no profiles".into()))?;
    for p in profiles {
        if p.resolution_min != first.resolution_min {
            return Err(Error::MixedResolution(first.resolution_min, p.resolution_min));
        }
        if p.power_kw.len() != first.power_kw.len() {
            return Err(Error::InvalidArgument("profiles of different lengths".into()));
        }
    }
    let mut levels = levels.to_vec();
    if levels.iter().any(|l| !(0.0..=100.0).contains(l)) {
        return Err(Error::InvalidArgument(format!("percentile levels {levels:?}")));
    }
    levels.sort_by(f64::total_cmp);
    let slots = first.power_kw.len();
    let per_slot: Vec<Vec<f64>> = (0..slots)
        .into_par_iter()
        .map(|k| {
            let mut column: Vec<f64> = profiles.iter().map(|p| p.power_kw[k]).collect();
            column.sort_by(f64::total_cmp);
            levels
                .iter()
                .map(|l| crate::empdist::quantile_sorted(&column, l / 100.0))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let values = (0..levels.len())
        .map(|li| per_slot.iter().map(|v| v[li]).collect())
        .collect();
    Ok(FanchartTable {
        resolution_min: first.resolution_min,
        levels,
        values,
    })
}
