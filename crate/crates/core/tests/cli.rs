//! End-to-end runs of the `gridscen` binary on small synthetic inputs.

mod common;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gridscen::calendar::{Calendar, ClockConvention};
use serde_json::Value;

fn gs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridscen"))
        .current_dir(dir)
        .env_remove("GRIDSCEN_CONFIG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = gs(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let line = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(line.trim()).expect("one-line JSON summary")
}

fn err_line(out: &Output) -> Value {
    let line = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(line.trim()).expect("one-line JSON error")
}

fn ev_file(dir: &Path, n: usize) -> PathBuf {
    let mut r = common::rng(11);
    let mut text = String::from(
        "session_id,arrival,departure,connection_time,charge_time,peak_power,charged_energy\n",
    );
    for i in 0..n {
        let rec = common::session_record(i, &common::archetype_session(&mut r));
        writeln!(
            text,
            "{},{},{},{},{},{},{}",
            rec.session_id,
            rec.arrival.format("%Y-%m-%d %H:%M:%S"),
            rec.departure.format("%Y-%m-%d %H:%M:%S"),
            rec.connection_time,
            rec.charge_time,
            rec.peak_power,
            rec.charged_energy
        )
        .unwrap();
    }
    let path = dir.join("sessions.csv");
    fs::write(&path, text).unwrap();
    path
}

/// Three consumers with flat offtake, one shared import spike on day 200
/// and one shared export dip on day 30.
fn load_file(dir: &Path) -> PathBuf {
    let cal = Calendar::new(2022);
    let mut text = String::from("consumer_id,consumer_type,interval_start,offtake,injection\n");
    for (id, ty) in [("c", 5), ("a", 1), ("b", 2)] {
        for t in cal.expected_timestamps(ClockConvention::Local) {
            let day = cal.day_of_year(&t).unwrap();
            let noon = t.format("%H:%M").to_string() == "12:00";
            let (off, inj) = match (day, noon) {
                (200, true) => ("2.500", "0"),
                (30, true) => ("0", "1.750"),
                _ => ("0.125", "0"),
            };
            writeln!(text, "{id},{ty},{},{off},{inj}", t.format("%Y-%m-%d %H:%M:%S")).unwrap();
        }
    }
    let path = dir.join("fluvius.csv");
    fs::write(&path, text).unwrap();
    path
}

fn pv_file(dir: &Path) -> PathBuf {
    let start = Calendar::new(2022).start();
    let mut text = String::from(
        "timestamp,measured_upscaled,forecast_week_ahead,forecast_day_ahead,forecast_hour_ahead,\
         p10,p90,monitored_capacity,load_factor\n",
    );
    for k in 0..35_040i64 {
        let t = start + chrono::Duration::minutes(15 * k);
        let h = (k % 96) as f64 / 4.0;
        let m = if (6.0..18.0).contains(&h) {
            50.0 * (std::f64::consts::PI * (h - 6.0) / 12.0).sin()
        } else {
            0.0
        };
        writeln!(
            text,
            "{},{m},{},{},{},{},{},100,{}",
            t.format("%Y-%m-%d %H:%M:%S"),
            m * 1.2,
            m * 1.1,
            m * 1.05,
            m * 0.8,
            m * 1.2,
            m / 100.0
        )
        .unwrap();
    }
    let path = dir.join("pv.csv");
    fs::write(&path, text).unwrap();
    path
}

fn weather_file(dir: &Path) -> PathBuf {
    let start = Calendar::new(2022).start();
    let mut text = String::from("timestamp,ambient_temp,wind_speed,humidity,wind_direction,ghi,dhi,rainfall\n");
    for hour in (189 * 24)..(211 * 24) {
        let t = start + chrono::Duration::hours(hour);
        let h = hour % 24;
        let ghi = if (8..18).contains(&h) { 400.0 } else { 0.0 };
        writeln!(
            text,
            "{},{},3.5,70,180,{ghi},{},0.1",
            t.format("%Y-%m-%d %H:%M:%S"),
            15.0 + h as f64 / 4.0,
            ghi / 4.0
        )
        .unwrap();
    }
    let path = dir.join("weather.csv");
    fs::write(&path, text).unwrap();
    path
}

fn header_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn ev_pipeline_is_reproducible_and_thread_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let input = ev_file(dir, 400);
    let s = ok(dir, &["--out", "o", "ingest", "ev", "--canonical", "--in", input.to_str().unwrap()]);
    assert_eq!(s["command"], "ingest ev");
    ok(dir, &["--out", "o", "analyze", "ev-dists"]);

    let scen = dir.join("o/ev_scenarios.csv");
    let run = |threads: &str| {
        ok(dir, &["--out", "o", "--seed", "5", "--threads", threads, "generate", "ev", "--n", "300"]);
        fs::read(&scen).unwrap()
    };
    let first = run("1");
    assert_eq!(first, run("1"));
    assert_eq!(first, run("4"));

    let heads = header_lines(&scen);
    assert_eq!(heads.len(), 4);
    assert!(heads[0].starts_with("# tool=gridscen "));
    assert_eq!(heads[1], "# command=generate ev");
    assert_eq!(heads[2], "# seed=5");
    let hash = heads[3].strip_prefix("# config=").unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.bytes().all(|b| b.is_ascii_hexdigit()));

    let rows = fs::read_to_string(&scen).unwrap().lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 301);

    ok(dir, &["--out", "o", "export", "fanchart"]);
    assert!(dir.join("o/ev_fanchart.csv").exists());
}

#[test]
fn seeds_change_scenarios() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let input = ev_file(dir, 200);
    ok(dir, &["--out", "o", "ingest", "ev", "--canonical", "--in", input.to_str().unwrap()]);
    let body = |seed: &str| {
        ok(dir, &["--out", "o", "--seed", seed, "generate", "ev", "--n", "50"]);
        fs::read_to_string(dir.join("o/ev_scenarios.csv"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_ne!(body("1"), body("2"));
}

#[test]
fn load_meta_without_store_is_missing_input() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gs(tmp.path(), &["--out", "o", "analyze", "load-meta"]);
    assert_eq!(out.status.code(), Some(1));
    let e = err_line(&out);
    assert_eq!(e["error"], "missing-input");
    assert!(e["detail"].as_str().unwrap().contains("load.gslp"));
}

#[test]
fn unknown_flag_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gs(tmp.path(), &["--bogus", "analyze", "load-meta"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(err_line(&out)["error"], "usage");
    assert!(gs(tmp.path(), &["--help"]).status.success());
    assert!(gs(tmp.path(), &["--version"]).status.success());
}

#[test]
fn config_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let input = ev_file(dir, 50);
    let cfg = dir.join("run.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"seed": 77, "output_dir": "envout", "inputs": {{"ev": {:?}}}}}"#,
            input.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gridscen"))
        .current_dir(dir)
        .env("GRIDSCEN_CONFIG", &cfg)
        .args(["ingest", "ev", "--canonical"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let heads = header_lines(&dir.join("envout/ev_sessions.csv"));
    assert_eq!(heads[2], "# seed=77");

    fs::write(&cfg, r#"{"sede": 1}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gridscen"))
        .current_dir(dir)
        .env("GRIDSCEN_CONFIG", &cfg)
        .args(["analyze", "load-meta"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn load_pipeline_with_store_peaks_and_weather() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let input = load_file(dir);
    let s = ok(dir, &["--out", "o", "ingest", "load", "--canonical", "--in", input.to_str().unwrap()]);
    assert_eq!(s["consumers"], 3);
    assert!(dir.join("o/load.gslp").exists());
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("o/load.gslp.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["consumer_count"], 3);
    let ids: Vec<&str> = manifest["consumers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["consumer_id"].as_str().unwrap())
        .collect();
    assert_eq!(ids, ["a", "b", "c"]);

    ok(dir, &["--out", "o", "analyze", "load-meta"]);
    assert!(dir.join("o/load_metadata.csv").exists());
    ok(dir, &["--out", "o", "export", "table1"]);
    assert!(dir.join("o/table1.csv").exists());

    let peak = ok(dir, &["--out", "o", "analyze", "peaks"]);
    assert_eq!((peak["start_day"].as_u64(), peak["end_day"].as_u64()), (Some(194), Some(200)));
    assert_eq!(peak["fraction"].as_f64(), Some(1.0));
    let rev = ok(dir, &["--out", "o", "analyze", "peaks", "--kind", "reverse", "--window", "3"]);
    assert_eq!((rev["start_day"].as_u64(), rev["end_day"].as_u64()), (Some(28), Some(30)));

    let w = weather_file(dir);
    ok(dir, &["--out", "o", "ingest", "weather", "--in", w.to_str().unwrap()]);
    let s = ok(dir, &["--out", "o", "analyze", "weather"]);
    assert_eq!(s["days"], 7);
    assert_eq!(s["records"], 7 * 24);
    let s = ok(dir, &["--out", "o", "analyze", "weather", "--week", "190:191"]);
    assert_eq!(s["days"], 2);
    let out = gs(dir, &["--out", "o", "analyze", "weather", "--week", "1:7"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pv_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let input = pv_file(dir);
    ok(dir, &["--out", "o", "ingest", "pv", "--canonical", "--in", input.to_str().unwrap()]);
    ok(dir, &["--out", "o", "analyze", "pv-quartiles"]);
    ok(dir, &["--out", "o", "export", "quartiles"]);
    assert!(dir.join("o/pv_quartiles.csv").exists());
    ok(dir, &["--out", "o", "analyze", "pv-forecast", "--daylight-only"]);
    let forecast: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("o/pv_forecast.json")).unwrap()).unwrap();
    assert!(forecast.get("meta").is_some() && forecast.get("data").is_some());

    let s = ok(dir, &["--out", "o", "--seed", "3", "generate", "pv", "--month", "6", "--n", "20"]);
    assert_eq!(s["command"], "generate pv");
    let first = fs::read(dir.join("o/pv_scenarios.csv")).unwrap();
    ok(dir, &["--out", "o", "--seed", "3", "generate", "pv", "--month", "6", "--n", "20"]);
    assert_eq!(first, fs::read(dir.join("o/pv_scenarios.csv")).unwrap());

    let out = gs(dir, &["--out", "o", "generate", "pv", "--kwp-dist", "tri:5,2,1"]);
    assert_eq!(out.status.code(), Some(1));
}
