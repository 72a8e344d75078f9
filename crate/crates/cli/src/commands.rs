use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rydberg_core::calibrate::{
    calibrate_scan_axis, extract_at_splitting, fit_field_calibration, heterodyne_scan, optimal_lo,
    sensitivity_map, simulate_heterodyne, simulate_two_tone, CalibrationFit, HeterodyneSetup, NoiseModel,
    SensitivityMap,
};
use rydberg_core::doppler::make_grid_with;
use rydberg_core::dynamics::{
    bandwidth_from_tau, decay_decomposition, extract_rise_fall, simulate_square_wave, Edge, EdgeKind,
    SquareWave, TimeTrace,
};
use rydberg_core::ingest::{
    map_from_snr_records, parse_raw, parse_snr_table, trace_from_raw, write_canonical, ColumnMapping,
    SnrColumns, TraceKind,
};
use rydberg_core::observables::{sweep, sweep_map, Channel, Readout, SpectrumTrace, SweepTarget};
use rydberg_core::scheme::{load_scheme, LadderScheme};
use serde_json::{json, Value};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::manifest::{sha256_hex, InputRecord, SchemeRecord};
use crate::units::{self, Range, SweepAxis};

pub const BUILTIN_SCHEME: &str = "builtin:cs5";

/// Primary output plus everything the manifest records about the run.
pub struct Outcome {
    pub data: String,
    pub parameters: Value,
    pub scheme: Option<SchemeRecord>,
    pub inputs: Vec<InputRecord>,
    pub extra_outputs: Vec<(PathBuf, String)>,
    pub summary: Value,
}

impl Outcome {
    fn new(data: String, parameters: Value, summary: Value) -> Self {
        Outcome {
            data,
            parameters,
            scheme: None,
            inputs: Vec::new(),
            extra_outputs: Vec::new(),
            summary,
        }
    }
}

pub struct Context<'a> {
    pub global: &'a GlobalArgs,
    inputs: Vec<InputRecord>,
}

impl<'a> Context<'a> {
    pub fn new(global: &'a GlobalArgs) -> Self {
        Context {
            global,
            inputs: Vec::new(),
        }
    }

    fn read(&mut self, path: &Path) -> CliResult<String> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(InputRecord {
            path: path.display().to_string(),
            sha256: sha256_hex(text.as_bytes()),
        });
        Ok(text)
    }

    fn base_scheme(&mut self) -> CliResult<(String, LadderScheme)> {
        match self.global.scheme.clone() {
            None => Ok((BUILTIN_SCHEME.to_string(), LadderScheme::cesium_default())),
            Some(path) => {
                let text = self.read(&path)?;
                let scheme = load_scheme(&text).map_err(|e| CliError::input(&path, e))?;
                Ok((path.display().to_string(), scheme))
            }
        }
    }

    /// Base scheme with the scenario overrides applied.
    fn scheme(&mut self, sc: &Scenario) -> CliResult<(SchemeRecord, LadderScheme)> {
        let (source, mut s) = self.base_scheme()?;
        if let Some(p) = sc.probe_power {
            s = SweepTarget::ProbePower.apply(&s, p)?;
        }
        for (name, v) in &sc.rabi {
            s = SweepTarget::Rabi(name.clone()).apply(&s, *v)?;
        }
        for (name, v) in &sc.detuning {
            s = SweepTarget::Detuning(name.clone()).apply(&s, *v)?;
        }
        if let Some(f) = sc.rf_field {
            s = SweepTarget::RfField.apply(&s, f)?;
        }
        s.validate()?;
        Ok((SchemeRecord::new(source, s.to_toml()), s))
    }

    fn readout(&self, scheme: &LadderScheme, channel: ChannelArg) -> CliResult<Readout> {
        let g = self.global;
        let grid = make_grid_with(
            g.quadrature.into(),
            scheme.cell.temperature,
            scheme.cell.atom_mass,
            g.doppler_points,
            g.doppler_span,
        )?;
        Ok(Readout::new(channel.into(), grid))
    }

    fn doppler_json(&self) -> Value {
        let g = self.global;
        json!({
            "points": g.doppler_points,
            "span_sigmas": g.doppler_span,
            "quadrature": format!("{:?}", g.quadrature).to_lowercase(),
        })
    }

    fn finish(self, mut out: Outcome, scheme: Option<SchemeRecord>) -> Outcome {
        out.scheme = scheme;
        out.inputs = self.inputs;
        out
    }
}

fn scenario_json(sc: &Scenario) -> Value {
    let named = |v: &[(String, f64)]| -> BTreeMap<String, f64> { v.iter().cloned().collect() };
    json!({
        "channel": channel_name(sc.channel),
        "rf_field_v_per_m": sc.rf_field,
        "probe_power_w": sc.probe_power,
        "rabi_rad_per_s": named(&sc.rabi),
        "detuning_rad_per_s": named(&sc.detuning),
    })
}

fn channel_name(c: ChannelArg) -> String {
    Channel::from(c).to_string()
}

fn range_json(r: &Range) -> Value {
    json!({"start": r.start, "stop": r.stop, "n": r.n, "log": r.log})
}

fn sweep_json(s: &SweepAxis) -> Value {
    let mut v = range_json(&s.range);
    v["target"] = json!(s.target.name());
    v["units"] = json!(s.target.units());
    v
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn extent(values: impl Iterator<Item = f64>) -> Value {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    json!({"min": lo, "max": hi})
}

/// Scale factor of a column unit, found by parsing `1<unit>`.
fn unit_scale(unit: &str, parser: units::ValueParser, flag: &str) -> CliResult<f64> {
    parser(&format!("1{unit}")).map_err(|e| CliError::Usage(format!("--{flag}: {e}")))
}

fn rf_dipole(scheme: &LadderScheme) -> CliResult<f64> {
    scheme
        .rf_index()
        .and_then(|i| scheme.drives[i].dipole_moment)
        .ok_or_else(|| CliError::validation("scheme has no RF drive with a dipole_moment"))
}

pub fn run(cmd: &Command, ctx: Context) -> CliResult<Outcome> {
    match cmd {
        Command::Spectrum(a) => spectrum(a, ctx),
        Command::Map(a) => map(a, ctx),
        Command::Calibrate(a) => calibrate(a, ctx),
        Command::Heterodyne(a) => heterodyne(a, ctx),
        Command::SensitivityMap(a) => sensitivity(a, ctx),
        Command::Bandwidth(a) => bandwidth(a, ctx),
        Command::Ingest(a) => ingest(a, ctx),
    }
}

fn splitting_json(trace: &SpectrumTrace, target: &SweepTarget) -> Value {
    if !matches!(target, SweepTarget::Detuning(_)) {
        return Value::Null;
    }
    let at = extract_at_splitting(trace);
    json!({"splitting_hz": if at.unsplit { Value::Null } else { json!(at.splitting) }, "unsplit": at.unsplit})
}

fn spectrum(a: &SpectrumArgs, mut ctx: Context) -> CliResult<Outcome> {
    let (record, scheme) = ctx.scheme(&a.scenario)?;
    let readout = ctx.readout(&scheme, a.scenario.channel)?;
    let trace = sweep(&scheme, &a.sweep.target, &a.sweep.range.values(), &readout)?;
    let mut summary = json!({
        "points": trace.len(),
        "units": trace.units,
        "signal": extent(trace.values.iter().copied()),
    });
    let at = splitting_json(&trace, &a.sweep.target);
    if !at.is_null() {
        summary["at_splitting"] = at.clone();
    }
    let data = match a.format {
        Format::Csv => trace.to_csv(),
        Format::Json => pretty(&json!({"trace": trace, "at_splitting": at})),
    };
    let params = json!({
        "sweep": sweep_json(&a.sweep),
        "scenario": scenario_json(&a.scenario),
        "doppler": ctx.doppler_json(),
        "format": format_name(a.format),
    });
    Ok(ctx.finish(Outcome::new(data, params, summary), Some(record)))
}

fn map(a: &MapArgs, mut ctx: Context) -> CliResult<Outcome> {
    let (record, scheme) = ctx.scheme(&a.scenario)?;
    let readout = ctx.readout(&scheme, a.scenario.channel)?;
    let m = sweep_map(
        &scheme,
        &a.x.target,
        &a.x.range.values(),
        &a.y.target,
        &a.y.range.values(),
        &readout,
    )?;
    let summary = json!({
        "shape": [m.y.len(), m.x.len()],
        "units": m.units,
        "signal": extent(m.values.iter().flatten().copied()),
    });
    let data = match a.format {
        Format::Csv => m.to_csv(),
        Format::Json => pretty(&json!(m)),
    };
    let params = json!({
        "x": sweep_json(&a.x),
        "y": sweep_json(&a.y),
        "scenario": scenario_json(&a.scenario),
        "doppler": ctx.doppler_json(),
        "format": format_name(a.format),
    });
    Ok(ctx.finish(Outcome::new(data, params, summary), Some(record)))
}

fn calibrate(a: &CalibrateArgs, mut ctx: Context) -> CliResult<Outcome> {
    if let Some(path) = &a.scan_trace {
        let text = ctx.read(path)?;
        let raw = parse_raw(&text).map_err(|e| CliError::input(path, e))?;
        let mapping = ColumnMapping::new(TraceKind::Spectrum, &a.time_column, &a.value_column);
        let trace = trace_from_raw(&raw, &mapping)
            .and_then(|t| t.into_spectrum())
            .map_err(|e| CliError::input(path, e))?;
        let sideband = a.sideband_frequency.expect("clap requires it");
        let scale = calibrate_scan_axis(&trace, sideband)?;
        let params = json!({
            "mode": "scan-axis",
            "time_column": a.time_column,
            "value_column": a.value_column,
            "sideband_frequency_hz": sideband,
        });
        let result = json!({"mode": "scan-axis", "hz_per_second": scale});
        return Ok(ctx.finish(Outcome::new(pretty(&result), params, result.clone()), None));
    }

    let (record, scheme) = ctx.scheme(&a.scenario)?;
    let dipole = rf_dipole(&scheme)?;
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut sources: Vec<String> = Vec::new();
    let mut params = json!({});
    if let Some(path) = &a.points {
        let text = ctx.read(path)?;
        let raw = parse_raw(&text).map_err(|e| CliError::input(path, e))?;
        let (p, s) = (
            raw.column(&a.power_column).map_err(|e| CliError::input(path, e))?,
            raw.column(&a.splitting_column).map_err(|e| CliError::input(path, e))?,
        );
        for row in &raw.rows {
            points.push((row[p], row[s]));
            sources.push(path.display().to_string());
        }
        params = json!({
            "mode": "points",
            "power_column": a.power_column,
            "splitting_column": a.splitting_column,
        });
    } else if !a.trace.is_empty() {
        let mut mapping = ColumnMapping::new(TraceKind::Spectrum, &a.axis_column, &a.value_column);
        mapping.axis_scale = unit_scale(&a.axis_unit, units::angular, "axis-unit")?;
        for (file, power) in &a.trace {
            let path = PathBuf::from(file);
            let text = ctx.read(&path)?;
            let trace = rydberg_core::ingest::parse_trace(&text, &mapping)
                .and_then(|t| t.into_spectrum())
                .map_err(|e| CliError::input(&path, e))?;
            let at = extract_at_splitting(&trace);
            if at.unsplit {
                return Err(CliError::input(
                    &path,
                    rydberg_core::Error::Analysis("no resolvable AT doublet in the trace".into()),
                ));
            }
            points.push((*power, at.splitting));
            sources.push(file.clone());
        }
        params = json!({
            "mode": "traces",
            "axis_column": a.axis_column,
            "value_column": a.value_column,
            "axis_scale": mapping.axis_scale,
            "powers_dbm": a.trace.iter().map(|t| t.1).collect::<Vec<_>>(),
        });
    } else if a.simulate {
        let c_cal = a.inject_c_cal.expect("clap requires it");
        let truth = CalibrationFit::from_c_cal(c_cal, dipole)?;
        let readout = ctx.readout(&scheme, a.scenario.channel)?;
        let axis = a.sweep.range.values();
        for &p in &a.powers {
            let at_power = SweepTarget::RfField.apply(&scheme, truth.field_for_power(p))?;
            let trace = sweep(&at_power, &a.sweep.target, &axis, &readout)?;
            let at = extract_at_splitting(&trace);
            if at.unsplit {
                return Err(CliError::Core(rydberg_core::Error::Analysis(format!(
                    "no resolvable AT doublet at {p} dBm"
                ))));
            }
            points.push((p, at.splitting));
            sources.push(format!("simulated:{p}dBm"));
        }
        params = json!({
            "mode": "simulate",
            "inject_c_cal": c_cal,
            "powers_dbm": a.powers,
            "sweep": sweep_json(&a.sweep),
            "scenario": scenario_json(&a.scenario),
            "doppler": ctx.doppler_json(),
        });
    } else {
        return Err(CliError::Usage(
            "calibrate needs one of --points, --trace, --simulate or --scan-trace".into(),
        ));
    }
    let fit = fit_field_calibration(&points, dipole)?;
    let splittings: Vec<Value> = points
        .iter()
        .zip(&sources)
        .map(|(&(p, s), src)| json!({"power_dbm": p, "splitting_hz": s, "source": src}))
        .collect();
    let result = json!({"fit": fit, "rf_dipole_c_m": dipole, "splittings": splittings});
    let summary = json!({"c_cal": fit.c_cal, "slope_hz_per_sqrt_mw": fit.slope, "residual_rms_hz": fit.residual_rms});
    Ok(ctx.finish(Outcome::new(pretty(&result), params, summary), Some(record)))
}

fn noise_floor(explicit: Option<f64>, channel: ChannelArg) -> f64 {
    explicit.unwrap_or_else(|| NoiseModel::default().floor(channel.into()))
}

fn heterodyne(a: &HeterodyneArgs, mut ctx: Context) -> CliResult<Outcome> {
    if a.scenario.rf_field.is_some() {
        return Err(CliError::Usage("heterodyne sets the RF field from --lo-field; drop --rf-field".into()));
    }
    let (record, scheme) = ctx.scheme(&a.scenario)?;
    let readout = ctx.readout(&scheme, a.scenario.channel)?;
    let floor = noise_floor(a.het.noise_floor, a.scenario.channel);
    let setup = HeterodyneSetup {
        lo_field: a.lo_field.or(a.lo_scan.as_ref().map(|r| r.start)).expect("clap requires one"),
        sig_field: a.het.sig_field,
        beat_frequency: a.het.beat,
        rbw: a.het.rbw,
        noise_floor: floor,
    };
    let mut result = json!({});
    let mut summary = json!({});
    if a.lo_field.is_some() {
        let r = simulate_heterodyne(&scheme, &setup, &readout)?;
        result["response"] = json!(r);
        summary["snr_db"] = json!(r.snr_db);
        summary["beat_amplitude"] = json!(r.beat_amplitude);
        if a.two_tone {
            let t = simulate_two_tone(&scheme, &setup, &readout, a.steps, a.periods)?;
            let deviation = if r.beat_amplitude > 0.0 {
                json!(t.beat_amplitude / r.beat_amplitude - 1.0)
            } else {
                Value::Null
            };
            result["two_tone"] = json!({
                "beat_amplitude": t.beat_amplitude,
                "relative_deviation": deviation,
                "trace": t.trace,
            });
            summary["two_tone_relative_deviation"] = deviation;
        }
    }
    if let Some(range) = &a.lo_scan {
        let fields = range.values();
        let scan = heterodyne_scan(&scheme, &setup, &readout, &fields)?;
        let best = optimal_lo(&scan);
        let rows: Vec<Value> = fields
            .iter()
            .zip(&scan)
            .map(|(e, r)| json!({"lo_field": e, "response": r}))
            .collect();
        let optimum = best.map(|(i, unimodal)| json!({"lo_field": fields[i], "snr_db": scan[i].snr_db, "unimodal": unimodal}));
        result["lo_scan"] = json!(rows);
        result["optimum"] = json!(optimum);
        summary["optimum"] = json!(optimum);
    }
    let params = json!({
        "lo_field_v_per_m": a.lo_field,
        "lo_scan": a.lo_scan.as_ref().map(range_json),
        "sig_field_v_per_m": a.het.sig_field,
        "beat_hz": a.het.beat,
        "rbw_hz": a.het.rbw,
        "noise_floor": floor,
        "two_tone": a.two_tone.then(|| json!({"steps": a.steps, "periods": a.periods})),
        "scenario": scenario_json(&a.scenario),
        "doppler": ctx.doppler_json(),
    });
    Ok(ctx.finish(Outcome::new(pretty(&result), params, summary), Some(record)))
}

fn load_fit(ctx: &mut Context, path: &Path) -> CliResult<CalibrationFit> {
    let text = ctx.read(path)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| {
        CliError::input(
            path,
            rydberg_core::Error::Parse {
                line: e.line(),
                field: "<document>".into(),
                message: e.to_string(),
            },
        )
    })?;
    // Accept both a bare fit and the full `calibrate` output.
    let fit = v.get("fit").cloned().unwrap_or(v);
    serde_json::from_value(fit).map_err(|e| {
        CliError::input(
            path,
            rydberg_core::Error::Parse {
                line: 0,
                field: "fit".into(),
                message: e.to_string(),
            },
        )
    })
}

fn map_summary(m: &SensitivityMap) -> Value {
    let minimum = m.minimum().map(|(i, j, v)| {
        json!({"probe_power_w": m.probe_powers[i], "lo_field_v_per_m": m.lo_fields[j], "sensitivity": v})
    });
    json!({
        "shape": [m.probe_powers.len(), m.lo_fields.len()],
        "minimum": minimum,
        "failed_cells": m.failures.len(),
    })
}

fn sensitivity(a: &SensitivityArgs, mut ctx: Context) -> CliResult<Outcome> {
    let mut scheme_record = None;
    let fit = match (&a.calibration, a.c_cal) {
        (Some(path), _) => load_fit(&mut ctx, path)?,
        (None, Some(c)) => {
            let (record, scheme) = ctx.scheme(&a.scenario)?;
            scheme_record = Some(record);
            CalibrationFit::from_c_cal(c, rf_dipole(&scheme)?)?
        }
        (None, None) => unreachable!("clap requires one"),
    };
    let mut params = json!({
        "c_cal": fit.c_cal,
        "rbw_hz": a.rbw,
        "format": format_name(a.format),
    });
    let (m, warnings) = if let Some(path) = &a.snr_table {
        let p_sig = a
            .p_sig
            .ok_or_else(|| CliError::Usage("--snr-table needs --p-sig".into()))?;
        let columns = SnrColumns {
            probe_power: a.probe_power_column.clone(),
            lo_field: a.lo_field_column.clone(),
            snr: a.snr_column.clone(),
            probe_power_scale: unit_scale(&a.probe_power_unit, units::power_linear, "probe-power-unit")?,
            lo_field_scale: unit_scale(&a.lo_field_unit, units::field, "lo-field-unit")?,
        };
        let text = ctx.read(path)?;
        let table = parse_snr_table(&text, &columns).map_err(|e| CliError::input(path, e))?;
        params["mode"] = json!("measured");
        params["p_sig_dbm"] = json!(p_sig);
        params["columns"] = json!(columns);
        let m = map_from_snr_records(&table.records, p_sig, a.rbw, &fit)?;
        (m, table.warnings)
    } else {
        let (record, scheme) = ctx.scheme(&a.scenario)?;
        scheme_record = Some(record);
        let readout = ctx.readout(&scheme, a.scenario.channel)?;
        let (powers, fields) = (
            a.probe_powers.as_ref().expect("clap requires it"),
            a.lo_fields.as_ref().expect("clap requires it"),
        );
        let setup = HeterodyneSetup {
            lo_field: fields.start,
            sig_field: a.sig_field.expect("clap requires it"),
            beat_frequency: a.beat,
            rbw: a.rbw,
            noise_floor: noise_floor(a.noise_floor, a.scenario.channel),
        };
        params["mode"] = json!("simulated");
        params["probe_powers"] = range_json(powers);
        params["lo_fields"] = range_json(fields);
        params["sig_field_v_per_m"] = json!(setup.sig_field);
        params["beat_hz"] = json!(setup.beat_frequency);
        params["noise_floor"] = json!(setup.noise_floor);
        params["scenario"] = scenario_json(&a.scenario);
        params["doppler"] = ctx.doppler_json();
        let m = sensitivity_map(&scheme, &powers.values(), &fields.values(), &setup, &readout, &fit)?;
        (m, Vec::new())
    };
    for f in &m.failures {
        log::warn!("cell ({}, {}) failed: {}", f.row, f.col, f.reason);
    }
    let mut summary = map_summary(&m);
    summary["warnings"] = json!(warnings);
    let data = match a.format {
        Format::Csv => m.to_csv(),
        Format::Json => pretty(&json!(m)),
    };
    Ok(ctx.finish(Outcome::new(data, params, summary), scheme_record))
}

/// Alternating turn-on and turn-off edges every half period from `first`.
fn square_edges(first: f64, period: f64, last: f64) -> Vec<Edge> {
    let mut edges = Vec::new();
    let mut k = 0usize;
    loop {
        let time = first + 0.5 * period * k as f64;
        if time >= last {
            break;
        }
        let kind = if k.is_multiple_of(2) { EdgeKind::Rise } else { EdgeKind::Fall };
        edges.push(Edge { time, kind });
        k += 1;
    }
    edges
}

fn bandwidth(a: &BandwidthArgs, mut ctx: Context) -> CliResult<Outcome> {
    let mut params = json!({"period_s": a.period});
    let mut scheme_record = None;
    let (trace, edges): (TimeTrace, Vec<Edge>) = if let Some(path) = &a.trace {
        let mut mapping = ColumnMapping::new(TraceKind::Time, &a.time_column, &a.value_column);
        mapping.axis_scale = unit_scale(&a.time_unit, units::time, "time-unit")?;
        let text = ctx.read(path)?;
        let trace = rydberg_core::ingest::parse_trace(&text, &mapping)
            .and_then(|t| t.into_time())
            .map_err(|e| CliError::input(path, e))?;
        let last = *trace.times.last().expect("validated trace");
        let edges = square_edges(a.first_edge, a.period, last);
        params["mode"] = json!("trace");
        params["time_column"] = json!(a.time_column);
        params["value_column"] = json!(a.value_column);
        params["time_scale"] = json!(mapping.axis_scale);
        params["first_edge_s"] = json!(a.first_edge);
        (trace, edges)
    } else {
        let (record, scheme) = ctx.scheme(&a.scenario)?;
        scheme_record = Some(record);
        let readout = ctx.readout(&scheme, a.scenario.channel)?;
        let wave = SquareWave {
            on_field: a.on_field,
            period: a.period,
            samples: a.samples,
            cycles: a.cycles,
        };
        params["mode"] = json!("simulate");
        params["wave"] = json!(wave);
        params["scenario"] = scenario_json(&a.scenario);
        params["doppler"] = ctx.doppler_json();
        (simulate_square_wave(&scheme, &readout, &wave)?, wave.edges())
    };
    let rf = extract_rise_fall(&trace, &edges)?;
    let bw_rise = bandwidth_from_tau(rf.tau_rise)?;
    let bw_fall = bandwidth_from_tau(rf.tau_fall)?;
    let bw = bw_rise.min(bw_fall);
    let mut result = json!({
        "tau_rise": rf.tau_rise,
        "tau_rise_std": rf.tau_rise_std,
        "tau_fall": rf.tau_fall,
        "tau_fall_std": rf.tau_fall_std,
        "bw_rise": bw_rise,
        "bw_fall": bw_fall,
        "bw": bw,
        "rises": rf.rises,
        "falls": rf.falls,
    });
    if let (Some(t_bbr), Some(t_rr)) = (a.t_bbr, a.t_rydryd) {
        let budget = decay_decomposition(rf.tau_fall, t_bbr, t_rr)?;
        if !budget.consistent {
            log::warn!(
                "decay budget is inconsistent: 1/tau_fall is below 1/T_BBR + 1/T_ryd-ryd (gamma_col = {} 1/s)",
                budget.gamma_col
            );
        }
        params["t_bbr_s"] = json!(t_bbr);
        params["t_rydryd_s"] = json!(t_rr);
        result["decay_budget"] = json!(budget);
    }
    let summary = json!({"tau_rise": rf.tau_rise, "tau_fall": rf.tau_fall, "bw": bw});
    let mut out = Outcome::new(pretty(&result), params, summary);
    if let Some(p) = &a.trace_output {
        out.extra_outputs.push((p.clone(), trace.to_csv()));
    }
    Ok(ctx.finish(out, scheme_record))
}

fn ingest(a: &IngestArgs, mut ctx: Context) -> CliResult<Outcome> {
    let text = ctx.read(&a.input)?;
    let raw = parse_raw(&text).map_err(|e| CliError::input(&a.input, e))?;
    let mut params = json!({"input": a.input.display().to_string()});
    let canonical = match a.kind {
        None => write_canonical(&raw),
        Some(kind) => {
            let kind = match kind {
                KindArg::Spectrum => TraceKind::Spectrum,
                KindArg::Time => TraceKind::Time,
            };
            let (axis, value) = (
                a.axis_column.as_deref().expect("clap requires it"),
                a.value_column.as_deref().expect("clap requires it"),
            );
            let mut mapping = ColumnMapping::new(kind, axis, value);
            mapping.axis_scale = a.axis_scale;
            mapping.value_scale = a.value_scale;
            let parsed = trace_from_raw(&raw, &mapping).map_err(|e| CliError::input(&a.input, e))?;
            params["mapping"] = json!(mapping);
            write_canonical(&parsed.to_raw(raw.metadata.clone()))
        }
    };
    let summary = json!({"rows": raw.rows.len(), "columns": raw.columns, "metadata_keys": raw.metadata.len()});
    Ok(ctx.finish(Outcome::new(canonical, params, summary), None))
}
