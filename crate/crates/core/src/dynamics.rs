//! Square-wave RF response, 90/10 edge timing, bandwidth and the residual
//! fluorescence decay budget.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doppler::weighted_sum;
use crate::error::{Error, Result};
use crate::lindblad::{build_hamiltonian, build_liouvillian, max_abs, steady_state, Propagator};
use crate::observables::{check_strictly_monotone, format_float, Readout};
use crate::scheme::LadderScheme;

/// Sampled signal against time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeTrace {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::validation(format!(
                "times has {} points but values has {}",
                times.len(),
                values.len()
            )));
        }
        check_strictly_monotone(&times)?;
        if times.len() > 1 && times[1] < times[0] {
            return Err(Error::validation("times must be increasing"));
        }
        Ok(TimeTrace { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time[s],value\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            out.push_str(&format!("{},{}\n", format_float(*t), format_float(*v)));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    /// RF switched on.
    Rise,
    /// RF switched off.
    Fall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub time: f64,
    pub kind: EdgeKind,
}

/// RF square wave: on for the first half of each period, off for the second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquareWave {
    /// RF field while on, V/m.
    pub on_field: f64,
    pub period: f64,
    /// Samples per period; must be even.
    pub samples: usize,
    /// Settled cycles written to the output trace.
    pub cycles: usize,
}

impl SquareWave {
    pub const MAX_SETTLING_CYCLES: usize = 10_000;
    pub const CYCLE_TOLERANCE: f64 = 1e-6;

    pub fn edges(&self) -> Vec<Edge> {
        (0..self.cycles)
            .flat_map(|c| {
                let t0 = c as f64 * self.period;
                [
                    Edge { time: t0, kind: EdgeKind::Rise },
                    Edge { time: t0 + 0.5 * self.period, kind: EdgeKind::Fall },
                ]
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.on_field >= 0.0) {
            return Err(Error::validation("on_field must be >= 0"));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::validation("period must be > 0"));
        }
        if self.samples < 4 || !self.samples.is_multiple_of(2) {
            return Err(Error::validation("samples per period must be even and >= 4"));
        }
        if self.cycles == 0 {
            return Err(Error::validation("cycles must be >= 1"));
        }
        Ok(())
    }
}

/// Signal under a square-wave RF drive once the response is periodic.
///
/// Each velocity class starts from the RF-off steady state and is stepped
/// with exact propagators until the state at the end of two consecutive
/// cycles agrees within [`SquareWave::CYCLE_TOLERANCE`]. The returned trace
/// holds `cycles` copies of the settled cycle sampled at `t = k·period/samples`;
/// the RF switches on at every multiple of the period.
pub fn simulate_square_wave(
    scheme: &LadderScheme,
    readout: &Readout,
    wave: &SquareWave,
) -> Result<TimeTrace> {
    wave.validate()?;
    scheme.validate()?;
    if readout.channel == crate::observables::Channel::Fluorescence {
        readout.fluorescence.validate(scheme)?;
    }
    let mut on = scheme.clone();
    on.set_rf_field(wave.on_field)?;
    let mut off = scheme.clone();
    off.set_rf_field(0.0)?;
    let n = wave.samples;
    let dt = wave.period / n as f64;

    let per_velocity: Vec<Result<Vec<f64>>> = readout
        .grid
        .nodes()
        .par_iter()
        .map(|&(v, _)| settled_cycle(&on, &off, readout, v, n, dt))
        .collect();
    let mut columns = Vec::with_capacity(per_velocity.len());
    for r in per_velocity {
        columns.push(r?);
    }
    let cycle: Vec<f64> = (0..n)
        .map(|k| {
            let vals: Vec<f64> = columns.iter().map(|c| c[k]).collect();
            readout.finish(weighted_sum(&readout.grid, &vals), scheme)
        })
        .collect();
    let total = n * wave.cycles;
    let times = (0..total).map(|k| k as f64 * dt).collect();
    let values = (0..total).map(|k| cycle[k % n]).collect();
    TimeTrace::new(times, values)
}

fn settled_cycle(
    on: &LadderScheme,
    off: &LadderScheme,
    readout: &Readout,
    velocity: f64,
    n: usize,
    dt: f64,
) -> Result<Vec<f64>> {
    let l_on = build_liouvillian(&build_hamiltonian(on, velocity), on, &readout.extra);
    let l_off = build_liouvillian(&build_hamiltonian(off, velocity), off, &readout.extra);
    let p_on = Propagator::new(&l_on, dt)?;
    let p_off = Propagator::new(&l_off, dt)?;
    let dim = on.dim();
    let mut v = steady_state(&l_off)?.vectorized();
    let half = n / 2;
    let run = |v: &mut nalgebra::DVector<num_complex::Complex64>, record: Option<&mut Vec<f64>>| {
        let mut rec = record;
        for k in 0..n {
            if let Some(r) = rec.as_deref_mut() {
                let rho = crate::lindblad::DensityMatrix::from_vectorized(v, dim);
                r.push(readout.linear_value(&rho, on));
            }
            *v = if k < half { p_on.apply(v) } else { p_off.apply(v) };
        }
    };
    for cycle in 0..SquareWave::MAX_SETTLING_CYCLES {
        let prev = v.clone();
        run(&mut v, None);
        if max_abs(&(&v - &prev)) <= SquareWave::CYCLE_TOLERANCE {
            let mut values = Vec::with_capacity(n);
            run(&mut v, Some(&mut values));
            let rho = crate::lindblad::DensityMatrix::from_vectorized(&v, dim);
            rho.check().map_err(|e| Error::StepFailure {
                start: 0.0,
                end: (cycle + 2) as f64 * n as f64 * dt,
                reason: e.to_string(),
            })?;
            return Ok(values);
        }
    }
    Err(Error::Solver(format!(
        "square-wave response at v = {velocity} m/s did not become periodic within {} cycles",
        SquareWave::MAX_SETTLING_CYCLES
    )))
}

/// 90/10 timing of every edge plus per-kind mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiseFall {
    pub tau_rise: f64,
    pub tau_rise_std: f64,
    pub tau_fall: f64,
    pub tau_fall_std: f64,
    pub rises: Vec<f64>,
    pub falls: Vec<f64>,
}

/// Fraction of each segment averaged to estimate its settled level.
const PLATEAU_FRACTION: f64 = 0.1;

/// Mean over the last part of `[start, end]`; `slack` widens (positive) or
/// narrows (negative) the closing bound.
fn plateau(trace: &TimeTrace, start: f64, end: f64, slack: f64) -> Option<f64> {
    let from = end - PLATEAU_FRACTION * (end - start);
    let vals: Vec<f64> = trace
        .times
        .iter()
        .zip(&trace.values)
        .filter(|(&t, _)| t >= from - slack.abs() && t <= end + slack)
        .map(|(_, &v)| v)
        .collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Time at which the normalised signal first reaches `level`, interpolated
/// between samples.
fn crossing(times: &[f64], u: &[f64], level: f64) -> Option<f64> {
    if u.first().is_some_and(|&x| x >= level) {
        return Some(times[0]);
    }
    u.windows(2).zip(times.windows(2)).find_map(|(w, t)| {
        (w[0] < level && w[1] >= level).then(|| t[0] + (level - w[0]) / (w[1] - w[0]) * (t[1] - t[0]))
    })
}

/// 10 %→90 % transition time after each edge, measured against the local
/// plateaus before and after that edge.
pub fn extract_rise_fall(trace: &TimeTrace, edges: &[Edge]) -> Result<RiseFall> {
    if trace.len() < 3 {
        return Err(Error::analysis("trace too short for edge timing"));
    }
    if !edges.iter().any(|e| e.kind == EdgeKind::Rise) || !edges.iter().any(|e| e.kind == EdgeKind::Fall) {
        return Err(Error::analysis("need at least one rising and one falling edge"));
    }
    let t_first = trace.times[0];
    let t_last = *trace.times.last().expect("non-empty");
    // Samples within this distance of an edge time count as on the edge.
    let tol = 1e-6 * (t_last - t_first) / (trace.len() - 1) as f64;
    let mut rises = Vec::new();
    let mut falls = Vec::new();
    for (i, e) in edges.iter().enumerate() {
        let name = || format!("{:?} edge at t = {} s", e.kind, e.time).to_lowercase();
        let prev = if i == 0 { t_first } else { edges[i - 1].time };
        let next = edges.get(i + 1).map_or(t_last, |n| n.time);
        if !(e.time > prev || (i == 0 && e.time >= prev)) || !(next > e.time) {
            return Err(Error::analysis(format!("{}: edges out of order or outside the trace", name())));
        }
        // Sample at the edge itself still belongs to the preceding segment.
        let before = plateau(trace, prev, e.time, tol);
        let after = plateau(trace, e.time, next, if i + 1 < edges.len() { -tol } else { tol });
        let (Some(before), Some(after)) = (before, after) else {
            return Err(Error::analysis(format!("{}: no samples on a plateau", name())));
        };
        let amp = after - before;
        let scale = before.abs().max(after.abs());
        if !(amp.abs() > 1e-12 * scale) || !amp.is_finite() {
            return Err(Error::analysis(format!("{}: no step between the plateaus", name())));
        }
        let (ts, us): (Vec<f64>, Vec<f64>) = trace
            .times
            .iter()
            .zip(&trace.values)
            .filter(|(&t, _)| t >= e.time - tol && t < next - tol)
            .map(|(&t, &v)| (t, (v - before) / amp))
            .unzip();
        let t10 = crossing(&ts, &us, 0.1);
        let t90 = t10.and_then(|t10| {
            let k = ts.partition_point(|&t| t < t10).saturating_sub(1);
            crossing(&ts[k..], &us[k..], 0.9)
        });
        match (t10, t90) {
            (Some(a), Some(b)) => match e.kind {
                EdgeKind::Rise => rises.push(b - a),
                EdgeKind::Fall => falls.push(b - a),
            },
            _ => {
                return Err(Error::analysis(format!(
                    "{}: missing {} crossing",
                    name(),
                    if t10.is_none() { "10%" } else { "90%" }
                )))
            }
        }
    }
    let (tau_rise, tau_rise_std) = mean_std(&rises);
    let (tau_fall, tau_fall_std) = mean_std(&falls);
    Ok(RiseFall {
        tau_rise,
        tau_rise_std,
        tau_fall,
        tau_fall_std,
        rises,
        falls,
    })
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Bandwidth in Hz from a 10/90 transition time: `0.35 / τ`.
pub fn bandwidth_from_tau(tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::validation("tau must be > 0"));
    }
    Ok(0.35 / tau)
}

/// Split of a measured decay rate into ground-Rydberg collisions and the
/// separately supplied BBR and Rydberg-Rydberg lifetimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayBudget {
    pub tau_meas: f64,
    pub t_bbr: f64,
    pub t_rydryd: f64,
    /// `1/τ_meas − 1/T_BBR − 1/T_ryd-ryd`, s⁻¹.
    pub gamma_col: f64,
    /// False when `gamma_col` is negative, i.e. the inputs are mutually inconsistent.
    pub consistent: bool,
}

pub fn decay_decomposition(tau_meas: f64, t_bbr: f64, t_rydryd: f64) -> Result<DecayBudget> {
    for (name, v) in [("tau_meas", tau_meas), ("t_bbr", t_bbr), ("t_rydryd", t_rydryd)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::validation(format!("{name} must be > 0")));
        }
    }
    let gamma_col = 1.0 / tau_meas - (1.0 / t_bbr + 1.0 / t_rydryd);
    Ok(DecayBudget {
        tau_meas,
        t_bbr,
        t_rydryd,
        gamma_col,
        consistent: gamma_col >= 0.0,
    })
}
