use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const EA0: f64 = 8.478_353_625_5e-30;
const H: f64 = 6.626_070_15e-34;
const WEAK: [&str; 6] = ["--rabi", "probe=0.1MHz", "--rabi", "dressing=0.5MHz", "--rabi", "coupling=0.5MHz"];

fn rydtool(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rydtool"))
        .current_dir(dir)
        .env_remove("RYDTOOL_SCHEME")
        .args(args)
        .output()
        .expect("binary runs")
}

fn diagnostic(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr has a diagnostic");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not JSON ({e}): {line}"))
}

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn no_arguments_prints_usage_and_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = rydtool(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage:"));
    assert_eq!(diagnostic(&out)["error"], "usage");
}

#[test]
fn help_and_version_exit_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    for flag in ["--help", "--version"] {
        assert_eq!(rydtool(dir.path(), &[flag]).status.code(), Some(0), "{flag}");
    }
}

#[test]
fn values_without_units_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["spectrum", "--sweep", "coupling-detuning:-30:30:11"][..],
        &["spectrum", "--sweep", "rf-field:0V/m:1V/m:3", "--rf-field", "20"],
        &["bandwidth", "--simulate", "--period", "40"],
    ] {
        let out = rydtool(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let d = diagnostic(&out);
        assert_eq!(d["exit_code"], 2);
        assert!(d["message"].as_str().unwrap().contains("unit"), "{d}");
    }
}

#[test]
fn strong_rf_doublet_matches_rf_rabi_rate() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "spectrum",
        "--sweep",
        "coupling-detuning:-15MHz:15MHz:601",
        "--channel",
        "fluorescence",
        "--rf-field",
        "1.3V/m",
        "--doppler-points",
        "1",
        "--format",
        "json",
    ];
    args.extend(WEAK);
    let v = json_stdout(&rydtool(dir.path(), &args));
    let expected = 600.0 * EA0 * 1.3 / H;
    let got = v["at_splitting"]["splitting_hz"].as_f64().expect("split");
    assert!((got / expected - 1.0).abs() < 5e-3, "{got} vs {expected}");
    assert_eq!(v["trace"]["axis"].as_array().unwrap().len(), 601);
}

#[test]
fn equal_manifests_give_identical_outputs_for_any_thread_cap() {
    let runs: Vec<(Vec<u8>, Vec<u8>)> = ["1", "4"]
        .iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            let out = rydtool(
                dir.path(),
                &[
                    "spectrum",
                    "--threads",
                    threads,
                    "--sweep",
                    "coupling-detuning:-20MHz:20MHz:41",
                    "--rf-field",
                    "0.5V/m",
                    "--doppler-points",
                    "31",
                    "-o",
                    "trace.csv",
                ],
            );
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            assert!(out.stdout.is_empty());
            (
                std::fs::read(dir.path().join("trace.csv")).unwrap(),
                std::fs::read(dir.path().join("trace.csv.manifest.json")).unwrap(),
            )
        })
        .collect();
    assert_eq!(runs[0].1, runs[1].1);
    assert_eq!(runs[0].0, runs[1].0);

    let m: Value = serde_json::from_slice(&runs[0].1).unwrap();
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["subcommand"], "spectrum");
    assert_eq!(m["outputs"][0], "trace.csv");
    assert_eq!(m["scheme"]["source"], "builtin:cs5");
    assert_eq!(m["parameters"]["sweep"]["n"], 41);
    assert_eq!(m["parameters"]["doppler"]["points"], 31);
    assert_eq!(m["parameters"]["scenario"]["rf_field_v_per_m"], 0.5);
    let toml = m["scheme"]["resolved_toml"].as_str().unwrap();
    let digest = m["scheme"]["sha256"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert!(toml.contains("[[drives]]"));
}

#[test]
fn simulated_bandwidth_reports_tau_and_bandwidth() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_stdout(&rydtool(
        dir.path(),
        &["bandwidth", "--simulate", "--channel", "transmission", "--doppler-points", "11"],
    ));
    let (rise, fall) = (v["tau_rise"].as_f64().unwrap(), v["tau_fall"].as_f64().unwrap());
    assert!(rise > 0.0 && fall > 0.0);
    assert_eq!(v["bw_rise"].as_f64().unwrap(), 0.35 / rise);
    assert_eq!(v["bw_fall"].as_f64().unwrap(), 0.35 / fall);
    assert_eq!(v["bw"].as_f64().unwrap(), (0.35 / rise).min(0.35 / fall));
    assert_eq!(v["rises"].as_array().unwrap().len(), 2);
}

#[test]
fn measured_trace_bandwidth_with_decay_budget() {
    let dir = tempfile::tempdir().unwrap();
    // First-order response with tau = 2 us, RF on for the first 20 us of each 40 us.
    let tau = 2e-6_f64;
    let mut csv = String::from("time_us,signal\n");
    for k in 0..4000 {
        let t = k as f64 * 0.02e-6;
        let u = t % 40e-6;
        let top = 1.0 - (-20e-6 / tau).exp();
        let v = if u < 20e-6 { 1.0 - (-u / tau).exp() } else { top * (-(u - 20e-6) / tau).exp() };
        csv.push_str(&format!("{},{}\n", t * 1e6, v));
    }
    std::fs::write(dir.path().join("scope.csv"), csv).unwrap();
    let v = json_stdout(&rydtool(
        dir.path(),
        &[
            "bandwidth", "--trace", "scope.csv", "--time-column", "time_us", "--time-unit", "us",
            "--period", "40us", "--t-bbr", "100us", "--t-rydryd", "50us",
        ],
    ));
    let expected = tau * 9f64.ln();
    for key in ["tau_rise", "tau_fall"] {
        let got = v[key].as_f64().unwrap();
        assert!((got / expected - 1.0).abs() < 1e-3, "{key}: {got} vs {expected}");
    }
    let gamma = v["decay_budget"]["gamma_col"].as_f64().unwrap();
    let want = 1.0 / v["tau_fall"].as_f64().unwrap() - 1.0 / 100e-6 - 1.0 / 50e-6;
    assert!((gamma / want - 1.0).abs() < 1e-12);
    assert_eq!(v["decay_budget"]["consistent"], true);
}

#[test]
fn malformed_trace_reports_parse_code_and_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "# rbw=1\ntime,signal\n0,1\n1,oops\n").unwrap();
    let out = rydtool(dir.path(), &["bandwidth", "--trace", "bad.csv"]);
    assert_eq!(out.status.code(), Some(3));
    let d = diagnostic(&out);
    assert_eq!(d["error"], "parse");
    assert_eq!(d["line"], 4);
    assert_eq!(d["path"], "bad.csv");
}

#[test]
fn scheme_comes_from_the_environment_and_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("broken.toml"), "[cell]\natom_mass = \"heavy\"\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rydtool"))
        .current_dir(dir.path())
        .env("RYDTOOL_SCHEME", "broken.toml")
        .args(["spectrum", "--sweep", "probe-detuning:-1MHz:1MHz:3", "--doppler-points", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(diagnostic(&out)["path"], "broken.toml");

    let out = rydtool(dir.path(), &["spectrum", "--scheme", "missing.toml", "--sweep", "rf-field:0V/m:1V/m:2"]);
    assert_eq!(out.status.code(), Some(7));
}

#[test]
fn unknown_drive_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = rydtool(dir.path(), &["spectrum", "--sweep", "pump-detuning:-1MHz:1MHz:3", "--doppler-points", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(diagnostic(&out)["error"], "validation");
}

#[test]
fn unresolved_doublet_is_an_analysis_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = rydtool(
        dir.path(),
        &["calibrate", "--simulate", "--inject-c-cal", "0.07", "--powers=-40dBm", "--doppler-points", "1"],
    );
    assert_eq!(out.status.code(), Some(6));
    assert_eq!(diagnostic(&out)["error"], "analysis");
}

#[test]
fn simulated_calibration_feeds_the_sensitivity_map() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "calibrate", "--simulate", "--channel", "fluorescence", "--inject-c-cal", "0.07",
        "--powers=20dBm,24dBm,27dBm,30dBm", "--doppler-points", "1", "-o", "cal.json",
    ];
    args.extend(WEAK);
    let out = rydtool(dir.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cal = read_json(&dir.path().join("cal.json"));
    let c_cal = cal["fit"]["c_cal"].as_f64().unwrap();
    assert!((c_cal / 0.07 - 1.0).abs() < 1e-2, "{c_cal}");
    assert_eq!(read_json(&dir.path().join("cal.json.manifest.json"))["summary"]["c_cal"], c_cal);

    let out = rydtool(
        dir.path(),
        &[
            "sensitivity-map", "--calibration", "cal.json", "--probe-powers", "10uW:100uW:2:log",
            "--lo-fields", "10mV/m:100mV/m:2:log", "--sig-field", "100uV/m", "--channel", "fluorescence",
            "--doppler-points", "1", "-o", "map.csv",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("map.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().nth(1).unwrap().starts_with("1e-5,0.01,"), "{csv}");
    let m = read_json(&dir.path().join("map.csv.manifest.json"));
    assert_eq!(m["inputs"][0]["path"], "cal.json");
    assert_eq!(m["parameters"]["c_cal"], c_cal);
}

#[test]
fn measured_snr_table_gives_the_noise_equivalent_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("snr.csv"),
        "# rbw=10\npower_uW,lo_mV_m,snr\n20,5,25\n20,40,30\n50,5,28\n50,40,35\n",
    )
    .unwrap();
    let out = rydtool(
        dir.path(),
        &[
            "sensitivity-map", "--snr-table", "snr.csv", "--p-sig=-60dBm", "--rbw", "10Hz",
            "--c-cal", "0.2137", "--probe-power-column", "power_uW", "--probe-power-unit", "uW",
            "--lo-field-column", "lo_mV_m", "--lo-field-unit", "mV/m", "--snr-column", "snr",
            "-o", "map.csv",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = read_json(&dir.path().join("map.csv.manifest.json"));
    let best = m["summary"]["minimum"]["sensitivity"].as_f64().unwrap();
    let expected = 0.2137 * (10f64.powf((-60.0 - 35.0) / 10.0) * 10.0).sqrt();
    assert!((best / expected - 1.0).abs() < 1e-12, "{best} vs {expected}");
}

#[test]
fn ingest_is_idempotent_and_maps_columns() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("raw.tsv"),
        "# operator=lab\r\n# rbw=1\r\nfreq_MHz\tsignal\r\n-1.5\t0.25\r\n0\t1e-7\r\n1.5\t0.5\r\n",
    )
    .unwrap();
    let first = rydtool(dir.path(), &["ingest", "raw.tsv", "-o", "a.csv"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let again = rydtool(dir.path(), &["ingest", "a.csv"]);
    let canonical = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(String::from_utf8(again.stdout).unwrap(), canonical);
    assert_eq!(canonical, "# operator=lab\n# rbw=1\nfreq_MHz,signal\n-1.5,0.25\n0.0,1e-7\n1.5,0.5\n");

    let mapped = rydtool(
        dir.path(),
        &["ingest", "raw.tsv", "--kind", "spectrum", "--axis-column", "freq_MHz", "--value-column", "signal",
          "--axis-scale", "1e6"],
    );
    let text = String::from_utf8(mapped.stdout).unwrap();
    assert_eq!(text.lines().nth(3).unwrap(), "-1500000.0,0.25");
}

#[test]
fn heterodyne_scan_finds_an_interior_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_stdout(&rydtool(
        dir.path(),
        &[
            "heterodyne", "--lo-scan", "1mV/m:1V/m:31:log", "--sig-field", "100uV/m", "--channel",
            "fluorescence", "--doppler-points", "1",
        ],
    ));
    let lo = v["optimum"]["lo_field"].as_f64().unwrap();
    assert!(lo > 1e-3 && lo < 1.0, "{lo}");
    let scan = v["lo_scan"].as_array().unwrap();
    let best = scan
        .iter()
        .map(|r| r["response"]["snr_db"].as_f64().unwrap_or(f64::NEG_INFINITY))
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(v["optimum"]["snr_db"].as_f64().unwrap(), best);
}
