//! C interface to the gridscen toolkit.
//!
//! Objects are opaque handles created by `gs_*_new`/`gs_*_open` style
//! functions and released with the matching `gs_*_free`. Every fallible
//! function returns a [`GsStatus`]; on failure the message is available from
//! [`gs_last_error_message`] on the same thread until the next call.
//! Output buffers are caller-allocated; their capacity is passed alongside.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use gridscen::calendar::Calendar;
use gridscen::empdist::SeededSampler;
use gridscen::ev_scenario::{
    fit_session_model, generate_batch, synthesize_power_profile, ChargingSession, GenerationOptions,
    PeakSampling, SessionBins, SessionModel,
};
use gridscen::ingest::{load_ev_dataset, load_pv_dataset, read_store, EvSchema, PvSchema};
use gridscen::load_analytics::{
    consumer_metadata, peak_day_distribution, pool_metadata, worst_week, ConsumerMetadata, ConsumerProfile,
    PeakKind,
};
use gridscen::pv_scenario::{generate_pv_scenario, normalize_generation, KwpDistribution, NormalizedPVSeries};
use gridscen::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    MissingInput = 4,
    MalformedInput = 5,
    InvalidArgument = 6,
    EmptyDistribution = 7,
    AttemptsExhausted = 8,
    StoreFormat = 9,
    BufferTooSmall = 10,
    OutOfRange = 11,
    Panic = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GsPeakSampling {
    Marginal = 0,
    Uniform = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GsPeakKind {
    Peak = 0,
    Reverse = 1,
}

/// One EV charging session in hour-of-day terms.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GsChargingSession {
    pub arrival_h: f64,
    pub departure_h: f64,
    pub connection_h: f64,
    pub charge_h: f64,
    pub peak_kw: f64,
    pub energy_kwh: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GsConsumerMetadata {
    /// 1 to 5.
    pub consumer_type: u8,
    pub annual_net_kwh: f64,
    pub peak_kw: f64,
    pub peak_time: f64,
    pub peak_month: u32,
    pub peak_day_of_year: u32,
    pub reverse_peak_kw: f64,
    pub reverse_peak_time: f64,
    pub reverse_peak_month: u32,
    pub reverse_peak_day_of_year: u32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GsWeek {
    pub start_day: u32,
    pub end_day: u32,
    pub fraction: f64,
}

/// Fitted EV session model.
pub struct GsSessionModel(SessionModel);

/// Normalized PV generation arranged in days.
pub struct GsPvSeries(NormalizedPVSeries);

/// Consumer load profiles with their metadata.
pub struct GsLoadPool {
    calendar: Calendar,
    profiles: Vec<ConsumerProfile>,
    metadata: Vec<ConsumerMetadata>,
    ids: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> GsStatus {
    match e {
        Error::Io { .. } => GsStatus::Io,
        Error::MissingInput(_) => GsStatus::MissingInput,
        Error::HeaderMismatch { .. }
        | Error::Csv { .. }
        | Error::TooManyRejections { .. }
        | Error::DuplicateInterval { .. }
        | Error::UnknownConsumerType(_)
        | Error::MissingForecast(_) => GsStatus::MalformedInput,
        Error::StoreFormat(_) | Error::Checksum { .. } => GsStatus::StoreFormat,
        Error::EmptyDistribution(_) | Error::EmptyScope(_) | Error::NoWeatherOverlap { .. } => {
            GsStatus::EmptyDistribution
        }
        Error::AttemptsExhausted { .. } => GsStatus::AttemptsExhausted,
        Error::BinSpec(_)
        | Error::InvalidArgument(_)
        | Error::MixedResolution(..)
        | Error::InvalidSession(_)
        | Error::Config(_) => GsStatus::InvalidArgument,
    }
}

struct Fail(GsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), format!("{}: {e}", e.module()))
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            GsStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GsStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(GsStatus::NullArgument, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(GsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, needed: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < needed {
        return Err(Fail(
            GsStatus::BufferTooSmall,
            format!("{what} holds {len}, needs {needed}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread; empty after success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn gs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn gs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fits a session model on a session file. `canonical` selects column names
/// equal to the record fields; otherwise the ElaadNL export names apply.
#[no_mangle]
pub unsafe extern "C" fn gs_session_model_fit_csv(
    path: *const c_char,
    canonical: bool,
    out_model: *mut *mut GsSessionModel,
) -> GsStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        if out_model.is_null() {
            return Err(null("out_model"));
        }
        let schema = if canonical {
            EvSchema::canonical()
        } else {
            EvSchema::default()
        };
        let report = load_ev_dataset(&path, &schema)?;
        let (model, _) = fit_session_model(&report.records, &SessionBins::default())?;
        put(out_model, Box::into_raw(Box::new(GsSessionModel(model))), "out_model")
    })
}

/// Fits a session model on sessions held in memory.
#[no_mangle]
pub unsafe extern "C" fn gs_session_model_fit(
    sessions: *const GsChargingSession,
    count: usize,
    out_model: *mut *mut GsSessionModel,
) -> GsStatus {
    guard(|| {
        if sessions.is_null() {
            return Err(null("sessions"));
        }
        if out_model.is_null() {
            return Err(null("out_model"));
        }
        let sessions: Vec<ChargingSession> = std::slice::from_raw_parts(sessions, count)
            .iter()
            .map(|s| ChargingSession {
                arrival_h: s.arrival_h,
                departure_h: s.departure_h,
                connection_h: s.connection_h,
                charge_h: s.charge_h,
                peak_kw: s.peak_kw,
                energy_kwh: s.energy_kwh,
            })
            .collect();
        let (model, _) = gridscen::ev_scenario::fit_sessions(&sessions, &SessionBins::default())?;
        put(out_model, Box::into_raw(Box::new(GsSessionModel(model))), "out_model")
    })
}

#[no_mangle]
pub unsafe extern "C" fn gs_session_model_free(model: *mut GsSessionModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

fn to_c(s: &ChargingSession) -> GsChargingSession {
    GsChargingSession {
        arrival_h: s.arrival_h,
        departure_h: s.departure_h,
        connection_h: s.connection_h,
        charge_h: s.charge_h,
        peak_kw: s.peak_kw,
        energy_kwh: s.energy_kwh,
    }
}

/// Generates `n` sessions into `out` (capacity `out_len`). Identical
/// arguments give identical sessions.
#[no_mangle]
pub unsafe extern "C" fn gs_session_model_generate(
    model: *const GsSessionModel,
    n: usize,
    seed: u64,
    peak_sampling: GsPeakSampling,
    out: *mut GsChargingSession,
    out_len: usize,
) -> GsStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let out = out_slice(out, out_len, n, "out")?;
        let opts = GenerationOptions {
            peak_sampling: match peak_sampling {
                GsPeakSampling::Marginal => PeakSampling::Marginal,
                GsPeakSampling::Uniform => PeakSampling::Uniform,
            },
            ..Default::default()
        };
        let batch = generate_batch(&model.0, n, seed, &opts)?;
        for (slot, s) in out.iter_mut().zip(&batch.sessions) {
            *slot = to_c(s);
        }
        Ok(())
    })
}

/// Non-smart charging profile of one session over two days, kW per slot.
/// `out` needs `2 * 1440 / resolution_min` entries; the count is written
/// to `out_written`.
#[no_mangle]
pub unsafe extern "C" fn gs_power_profile(
    session: *const GsChargingSession,
    resolution_min: u32,
    out: *mut f64,
    out_len: usize,
    out_written: *mut usize,
) -> GsStatus {
    guard(|| {
        let s = ref_arg(session, "session")?;
        let session = ChargingSession {
            arrival_h: s.arrival_h,
            departure_h: s.departure_h,
            connection_h: s.connection_h,
            charge_h: s.charge_h,
            peak_kw: s.peak_kw,
            energy_kwh: s.energy_kwh,
        };
        let profile = synthesize_power_profile(&session, resolution_min)?;
        let dst = out_slice(out, out_len, profile.power_kw.len(), "out")?;
        dst.copy_from_slice(&profile.power_kw);
        put(out_written, profile.power_kw.len(), "out_written")
    })
}

/// Loads and normalizes a PV generation file for `year`.
#[no_mangle]
pub unsafe extern "C" fn gs_pv_series_load_csv(
    path: *const c_char,
    canonical: bool,
    year: i32,
    out_series: *mut *mut GsPvSeries,
) -> GsStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        if out_series.is_null() {
            return Err(null("out_series"));
        }
        let schema = if canonical {
            PvSchema::canonical()
        } else {
            PvSchema::default()
        };
        let cal = Calendar::new(year);
        let report = load_pv_dataset(&path, &schema, &cal)?;
        let series = normalize_generation(&report.records, &cal)?;
        put(out_series, Box::into_raw(Box::new(GsPvSeries(series))), "out_series")
    })
}

#[no_mangle]
pub unsafe extern "C" fn gs_pv_series_free(series: *mut GsPvSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Number of complete days in the series; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn gs_pv_series_day_count(series: *const GsPvSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.days.len())
}

/// Generates `n` PV scenarios for `month`. `kwp_spec` is e.g. `tri:2,5,10`.
/// `out_power` receives `n * 96` values (scenario-major), `out_kwp` and
/// `out_source_day` `n` values each (either may be null).
#[no_mangle]
pub unsafe extern "C" fn gs_pv_generate(
    series: *const GsPvSeries,
    month: u32,
    kwp_spec: *const c_char,
    n: usize,
    seed: u64,
    out_power: *mut f64,
    out_power_len: usize,
    out_kwp: *mut f64,
    out_source_day: *mut u32,
) -> GsStatus {
    guard(|| {
        let series = ref_arg(series, "series")?;
        let kwp: KwpDistribution = str_arg(kwp_spec, "kwp_spec")?.parse()?;
        let slots = gridscen::calendar::SLOTS_PER_DAY;
        let power = out_slice(out_power, out_power_len, n * slots, "out_power")?;
        for i in 0..n {
            let mut sampler = SeededSampler::new(seed, i as u64);
            let sc = generate_pv_scenario(&series.0, month, &kwp, &mut sampler)?;
            power[i * slots..(i + 1) * slots].copy_from_slice(&sc.power_kw);
            if !out_kwp.is_null() {
                out_kwp.add(i).write(sc.kwp);
            }
            if !out_source_day.is_null() {
                out_source_day.add(i).write(sc.source_day);
            }
        }
        Ok(())
    })
}

/// Opens a compact load store and computes per-consumer metadata.
#[no_mangle]
pub unsafe extern "C" fn gs_load_pool_open(path: *const c_char, out_pool: *mut *mut GsLoadPool) -> GsStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        if out_pool.is_null() {
            return Err(null("out_pool"));
        }
        let (calendar, profiles) = read_store(&path)?;
        let metadata = pool_metadata(&profiles, &calendar);
        let ids = profiles
            .iter()
            .map(|p| CString::new(p.consumer_id.replace('\0', " ")).expect("no interior nul"))
            .collect();
        let pool = GsLoadPool {
            calendar,
            profiles,
            metadata,
            ids,
        };
        put(out_pool, Box::into_raw(Box::new(pool)), "out_pool")
    })
}

#[no_mangle]
pub unsafe extern "C" fn gs_load_pool_free(pool: *mut GsLoadPool) {
    if !pool.is_null() {
        drop(Box::from_raw(pool));
    }
}

/// Number of consumers; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn gs_load_pool_len(pool: *const GsLoadPool) -> usize {
    pool.as_ref().map_or(0, |p| p.profiles.len())
}

/// Consumer id at `index`, owned by the pool; null when out of range.
#[no_mangle]
pub unsafe extern "C" fn gs_load_pool_consumer_id(pool: *const GsLoadPool, index: usize) -> *const c_char {
    pool.as_ref()
        .and_then(|p| p.ids.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn gs_load_pool_metadata(
    pool: *const GsLoadPool,
    index: usize,
    out: *mut GsConsumerMetadata,
) -> GsStatus {
    guard(|| {
        let pool = ref_arg(pool, "pool")?;
        let m = match pool.metadata.get(index) {
            Some(m) => m.clone(),
            None => match pool.profiles.get(index) {
                Some(p) => consumer_metadata(p, &pool.calendar),
                None => {
                    return Err(Fail(
                        GsStatus::OutOfRange,
                        format!("index {index} of {} consumers", pool.profiles.len()),
                    ))
                }
            },
        };
        put(
            out,
            GsConsumerMetadata {
                consumer_type: m.consumer_type.code(),
                annual_net_kwh: m.annual_net_kwh,
                peak_kw: m.peak_kw,
                peak_time: m.peak_time,
                peak_month: m.peak_month,
                peak_day_of_year: m.peak_day_of_year,
                reverse_peak_kw: m.reverse_peak_kw,
                reverse_peak_time: m.reverse_peak_time,
                reverse_peak_month: m.reverse_peak_month,
                reverse_peak_day_of_year: m.reverse_peak_day_of_year,
            },
            "out",
        )
    })
}

/// Window of `window_days` days holding the most annual (reverse) peaks of
/// the whole pool.
#[no_mangle]
pub unsafe extern "C" fn gs_load_pool_worst_week(
    pool: *const GsLoadPool,
    kind: GsPeakKind,
    window_days: u32,
    out: *mut GsWeek,
) -> GsStatus {
    guard(|| {
        let pool = ref_arg(pool, "pool")?;
        let refs: Vec<&ConsumerMetadata> = pool.metadata.iter().collect();
        let kind = match kind {
            GsPeakKind::Peak => PeakKind::Peak,
            GsPeakKind::Reverse => PeakKind::Reverse,
        };
        let hist = peak_day_distribution(&refs, kind, &pool.calendar);
        let w = worst_week(&hist, window_days)?;
        put(
            out,
            GsWeek {
                start_day: w.start_day,
                end_day: w.end_day,
                fraction: w.fraction,
            },
            "out",
        )
    })
}

/// Type-7 quantile of `count` values at level `q` in [0, 1].
#[no_mangle]
pub unsafe extern "C" fn gs_quantile(values: *const f64, count: usize, q: f64, out: *mut f64) -> GsStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let v = gridscen::empdist::quantile(std::slice::from_raw_parts(values, count), q)?;
        put(out, v, "out")
    })
}
