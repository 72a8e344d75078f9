//! Probe transmission and 510 nm fluorescence readouts, and the parameter
//! sweeps that turn them into spectra and maps.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{EPSILON_0, HBAR, TWO_PI};
use crate::doppler::{weighted_sum, VelocityGrid};
use crate::error::{Error, Result};
use crate::lindblad::{solve_steady, DensityMatrix, IncoherentTransfer};
use crate::scheme::LadderScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Transmission,
    Fluorescence,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Transmission => "transmission",
            Channel::Fluorescence => "fluorescence",
        })
    }
}

impl FromStr for Channel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transmission" | "eit" | "eia" => Ok(Channel::Transmission),
            "fluorescence" | "flo" => Ok(Channel::Fluorescence),
            other => Err(Error::validation(format!(
                "unknown channel `{other}` (expected transmission or fluorescence)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluorescenceConfig {
    /// Fraction of emitted photons reaching the detector, 0–1.
    pub collection_efficiency: f64,
    /// Levels whose decay photons pass the filter.
    pub filter_passband: Vec<usize>,
    /// Only branches with this label are counted; all branches when `None`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_label: Option<String>,
    /// Counts per detected photon.
    pub detector_gain: f64,
}

impl FluorescenceConfig {
    /// 510 nm branch of the upper Rydberg level in the bundled scheme.
    pub fn cesium_510nm() -> Self {
        FluorescenceConfig {
            collection_efficiency: 1e-3,
            filter_passband: vec![4],
            branch_label: Some("510nm".into()),
            detector_gain: 1.0,
        }
    }

    pub fn validate(&self, scheme: &LadderScheme) -> Result<()> {
        if !(0.0..=1.0).contains(&self.collection_efficiency) {
            return Err(Error::validation("collection_efficiency must lie in [0, 1]"));
        }
        if !(self.detector_gain >= 0.0) {
            return Err(Error::validation("detector_gain must be >= 0"));
        }
        if let Some(&bad) = self.filter_passband.iter().find(|&&l| l >= scheme.dim()) {
            return Err(Error::validation(format!(
                "fluorescence source level {bad} does not exist"
            )));
        }
        Ok(())
    }

    /// Σ over counted branches of the rate leaving each source level, s⁻¹.
    fn branch_rates(&self, scheme: &LadderScheme) -> Vec<(usize, f64)> {
        self.filter_passband
            .iter()
            .map(|&src| {
                let rate = scheme.levels[src]
                    .decays
                    .iter()
                    .filter(|b| match &self.branch_label {
                        Some(label) => b.label.as_deref() == Some(label.as_str()),
                        None => true,
                    })
                    .map(|b| b.rate)
                    .sum();
                (src, rate)
            })
            .collect()
    }
}

/// Intensity absorption coefficient of the probe, m⁻¹:
/// `α = k_p · 2N d² / (ε₀ ħ Ω_p) · Im ρ_gu` with g, u the probe's lower and
/// upper levels. Zero when the probe Rabi rate or dipole moment is zero.
pub fn probe_absorption(rho: &DensityMatrix, scheme: &LadderScheme) -> f64 {
    let probe = scheme.probe();
    let d = probe.dipole_moment.unwrap_or(0.0);
    if probe.rabi == 0.0 || d == 0.0 || scheme.cell.number_density == 0.0 {
        return 0.0;
    }
    let k = TWO_PI / probe.wavelength;
    let prefactor = k * 2.0 * scheme.cell.number_density * d * d / (EPSILON_0 * HBAR * probe.rabi);
    prefactor * rho.coherence(probe.lower, probe.upper).im
}

/// Beer-Lambert transmission `exp(−α L)` through the cell.
pub fn probe_transmission(rho: &DensityMatrix, scheme: &LadderScheme) -> f64 {
    transmission_from_absorption(probe_absorption(rho, scheme), scheme)
}

pub fn transmission_from_absorption(alpha: f64, scheme: &LadderScheme) -> f64 {
    (-alpha * scheme.cell.length).exp()
}

/// Detected 510 nm count rate: Σ Γ_branch·ρ_ss·N_interrogated·η·gain.
pub fn fluorescence_rate(
    rho: &DensityMatrix,
    scheme: &LadderScheme,
    cfg: &FluorescenceConfig,
) -> f64 {
    let per_atom: f64 = cfg
        .branch_rates(scheme)
        .into_iter()
        .map(|(src, rate)| rate * rho.population(src).max(0.0))
        .sum();
    per_atom * scheme.cell.interrogated_atoms() * cfg.collection_efficiency * cfg.detector_gain
}

/// Everything needed to turn a scheme into one scalar signal.
#[derive(Debug, Clone)]
pub struct Readout {
    pub channel: Channel,
    pub fluorescence: FluorescenceConfig,
    pub grid: VelocityGrid,
    pub extra: Vec<IncoherentTransfer>,
}

impl Readout {
    pub fn new(channel: Channel, grid: VelocityGrid) -> Self {
        Readout {
            channel,
            fluorescence: FluorescenceConfig::cesium_510nm(),
            grid,
            extra: Vec::new(),
        }
    }

    pub fn with_fluorescence(mut self, cfg: FluorescenceConfig) -> Self {
        self.fluorescence = cfg;
        self
    }

    pub fn with_transfers(mut self, extra: Vec<IncoherentTransfer>) -> Self {
        self.extra = extra;
        self
    }

    /// Quantity that is additive over velocity classes: α for transmission,
    /// count rate for fluorescence.
    pub fn velocity_class_value(&self, scheme: &LadderScheme, velocity: f64) -> Result<f64> {
        let rho = solve_steady(scheme, velocity, &self.extra)?;
        Ok(self.linear_value(&rho, scheme))
    }

    pub fn linear_value(&self, rho: &DensityMatrix, scheme: &LadderScheme) -> f64 {
        match self.channel {
            Channel::Transmission => probe_absorption(rho, scheme),
            Channel::Fluorescence => fluorescence_rate(rho, scheme, &self.fluorescence),
        }
    }

    /// Maps the velocity-averaged linear value to the reported signal.
    pub fn finish(&self, averaged: f64, scheme: &LadderScheme) -> f64 {
        match self.channel {
            Channel::Transmission => transmission_from_absorption(averaged, scheme),
            Channel::Fluorescence => averaged,
        }
    }

    /// Doppler-averaged steady-state signal.
    pub fn signal(&self, scheme: &LadderScheme) -> Result<f64> {
        if self.channel == Channel::Fluorescence {
            self.fluorescence.validate(scheme)?;
        }
        let values: Result<Vec<f64>> = self
            .grid
            .nodes()
            .par_iter()
            .map(|&(v, _)| self.velocity_class_value(scheme, v))
            .collect();
        Ok(self.finish(weighted_sum(&self.grid, &values?), scheme))
    }

    pub fn units(&self) -> &'static str {
        match self.channel {
            Channel::Transmission => "1",
            Channel::Fluorescence => "counts/s",
        }
    }
}

/// What a sweep varies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "drive", rename_all = "kebab-case")]
pub enum SweepTarget {
    /// Detuning of the named drive, rad/s.
    Detuning(String),
    /// Rabi rate of the named drive, rad/s.
    Rabi(String),
    /// RF field amplitude, V/m.
    RfField,
    /// Probe optical power, W.
    ProbePower,
}

impl SweepTarget {
    /// Parses `<drive>-detuning`, `<drive>-rabi`, `rf-field` or `probe-power`.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "rf-field" => Ok(SweepTarget::RfField),
            "probe-power" => Ok(SweepTarget::ProbePower),
            _ => {
                if let Some(d) = name.strip_suffix("-detuning") {
                    Ok(SweepTarget::Detuning(d.to_string()))
                } else if let Some(d) = name.strip_suffix("-rabi") {
                    Ok(SweepTarget::Rabi(d.to_string()))
                } else {
                    Err(Error::validation(format!(
                        "unknown sweep parameter `{name}` \
                         (expected <drive>-detuning, <drive>-rabi, rf-field or probe-power)"
                    )))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            SweepTarget::Detuning(d) => format!("{d}-detuning"),
            SweepTarget::Rabi(d) => format!("{d}-rabi"),
            SweepTarget::RfField => "rf-field".into(),
            SweepTarget::ProbePower => "probe-power".into(),
        }
    }

    pub fn units(&self) -> &'static str {
        match self {
            SweepTarget::Detuning(_) | SweepTarget::Rabi(_) => "rad/s",
            SweepTarget::RfField => "V/m",
            SweepTarget::ProbePower => "W",
        }
    }

    /// Copy of `scheme` with the parameter set to `value`.
    pub fn apply(&self, scheme: &LadderScheme, value: f64) -> Result<LadderScheme> {
        let mut s = scheme.clone();
        match self {
            SweepTarget::Detuning(name) | SweepTarget::Rabi(name) => {
                let idx = s
                    .drive_index(name)
                    .ok_or_else(|| Error::validation(format!("scheme has no drive `{name}`")))?;
                if matches!(self, SweepTarget::Detuning(_)) {
                    s.drives[idx].detuning = value;
                } else {
                    if !(value >= 0.0) {
                        return Err(Error::validation("Rabi rate must be >= 0"));
                    }
                    s.drives[idx].rabi = value;
                }
            }
            SweepTarget::RfField => s.set_rf_field(value)?,
            SweepTarget::ProbePower => s.set_probe_power(value)?,
        }
        Ok(s)
    }
}

/// Observable sampled along a swept axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    pub axis_name: String,
    pub axis: Vec<f64>,
    pub values: Vec<f64>,
    pub units: String,
}

impl SpectrumTrace {
    pub fn new(
        axis_name: impl Into<String>,
        axis: Vec<f64>,
        values: Vec<f64>,
        units: impl Into<String>,
    ) -> Result<Self> {
        if axis.len() != values.len() {
            return Err(Error::validation(format!(
                "axis has {} points but values has {}",
                axis.len(),
                values.len()
            )));
        }
        check_strictly_monotone(&axis)?;
        Ok(SpectrumTrace {
            axis_name: axis_name.into(),
            axis,
            values,
            units: units.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    /// CSV with a header row; floats as [`format_float`].
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{}\n", self.axis_name, self.units_header());
        for (x, y) in self.axis.iter().zip(&self.values) {
            out.push_str(&format!("{},{}\n", format_float(*x), format_float(*y)));
        }
        out
    }

    fn units_header(&self) -> String {
        format!("value[{}]", self.units)
    }
}

pub(crate) fn check_strictly_monotone(axis: &[f64]) -> Result<()> {
    if axis.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("axis contains non-finite values"));
    }
    if axis.len() < 2 {
        return Ok(());
    }
    let increasing = axis[1] > axis[0];
    for (i, w) in axis.windows(2).enumerate() {
        let ok = if increasing { w[1] > w[0] } else { w[1] < w[0] };
        if !ok {
            return Err(Error::validation(format!(
                "axis is not strictly monotone at index {}",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Shortest decimal text that parses back to the same `f64`, with an
/// exponent for very large or small magnitudes.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// Evenly spaced grid including both ends.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    stop
                } else {
                    start + (stop - start) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Logarithmically spaced grid including both ends.
pub fn logspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = linspace(start.ln(), stop.ln(), n)
        .into_iter()
        .map(f64::exp)
        .collect();
    if let Some(first) = v.first_mut() {
        *first = start;
    }
    if n > 1 {
        v[n - 1] = stop;
    }
    v
}

/// Solves every (grid point, velocity node) pair in parallel and reduces in
/// a fixed order, so results are identical for any thread count. Each grid
/// point succeeds or fails on its own; a failure carries the first failing
/// velocity node of that point.
pub(crate) fn evaluate_each(schemes: &[LadderScheme], readout: &Readout) -> Vec<Result<f64>> {
    let nv = readout.grid.len();
    let tasks: Vec<Result<f64>> = (0..schemes.len() * nv)
        .into_par_iter()
        .map(|t| {
            let (p, k) = (t / nv, t % nv);
            let v = readout.grid.nodes()[k].0;
            readout.velocity_class_value(&schemes[p], v)
        })
        .collect();
    let mut it = tasks.into_iter();
    schemes
        .iter()
        .map(|s| {
            let chunk: Vec<Result<f64>> = it.by_ref().take(nv).collect();
            let chunk: Result<Vec<f64>> = chunk.into_iter().collect();
            chunk.map(|c| readout.finish(weighted_sum(&readout.grid, &c), s))
        })
        .collect()
}

fn evaluate_points(
    schemes: &[LadderScheme],
    readout: &Readout,
    labels: &(dyn Fn(usize) -> String + Sync),
) -> Result<Vec<f64>> {
    if readout.channel == Channel::Fluorescence {
        if let Some(s) = schemes.first() {
            readout.fluorescence.validate(s)?;
        }
    }
    evaluate_each(schemes, readout)
        .into_iter()
        .enumerate()
        .map(|(p, r)| r.map_err(|e| Error::Solver(format!("grid point {p} ({}): {e}", labels(p)))))
        .collect()
}

/// One Doppler-averaged steady-state signal per grid value.
pub fn sweep(
    scheme: &LadderScheme,
    target: &SweepTarget,
    grid: &[f64],
    readout: &Readout,
) -> Result<SpectrumTrace> {
    let schemes: Result<Vec<_>> = grid.iter().map(|&x| target.apply(scheme, x)).collect();
    let schemes = schemes?;
    let name = target.name();
    let values = evaluate_points(&schemes, readout, &|p| format!("{name}={}", grid[p]))?;
    SpectrumTrace::new(name, grid.to_vec(), values, readout.units())
}

/// Two-parameter surface, `values[row][col]` with rows along `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMap {
    pub x_name: String,
    pub x: Vec<f64>,
    pub y_name: String,
    pub y: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub units: String,
}

impl SweepMap {
    /// Long-format CSV: one `y,x,value` row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{},value[{}]\n", self.y_name, self.x_name, self.units);
        for (yi, row) in self.y.iter().zip(&self.values) {
            for (xi, v) in self.x.iter().zip(row) {
                out.push_str(&format!("{},{},{}\n", format_float(*yi), format_float(*xi), format_float(*v)));
            }
        }
        out
    }
}

pub fn sweep_map(
    scheme: &LadderScheme,
    x_target: &SweepTarget,
    x: &[f64],
    y_target: &SweepTarget,
    y: &[f64],
    readout: &Readout,
) -> Result<SweepMap> {
    let mut schemes = Vec::with_capacity(x.len() * y.len());
    for &yv in y {
        let sy = y_target.apply(scheme, yv)?;
        for &xv in x {
            schemes.push(x_target.apply(&sy, xv)?);
        }
    }
    let (xn, yn) = (x_target.name(), y_target.name());
    let nx = x.len().max(1);
    let flat = evaluate_points(&schemes, readout, &|p| {
        format!("{yn}={}, {xn}={}", y[p / nx], x[p % nx])
    })?;
    Ok(SweepMap {
        x_name: xn.clone(),
        x: x.to_vec(),
        y_name: yn.clone(),
        y: y.to_vec(),
        values: flat.chunks(nx).map(<[f64]>::to_vec).collect(),
        units: readout.units().into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FeatureKind {
    Eit,
    Eia,
    Flat,
}

/// Resonant feature of a transmission scan relative to its off-resonant
/// baseline (mean of the two grid edges). Positive amplitude is EIT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonantFeature {
    pub amplitude: f64,
    pub baseline: f64,
    pub kind: FeatureKind,
}

/// Classifies the feature at the axis point closest to `center`.
pub fn classify_feature(trace: &SpectrumTrace, center: f64) -> Result<ResonantFeature> {
    if trace.len() < 3 {
        return Err(Error::analysis("feature classification needs at least three points"));
    }
    let baseline = 0.5 * (trace.values[0] + trace.values[trace.len() - 1]);
    let (ic, _) = trace
        .axis
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - center).abs().total_cmp(&(b.1 - center).abs()))
        .expect("non-empty");
    let amplitude = trace.values[ic] - baseline;
    let scale = trace.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let kind = if amplitude.abs() <= 1e-12 * scale {
        FeatureKind::Flat
    } else if amplitude > 0.0 {
        FeatureKind::Eit
    } else {
        FeatureKind::Eia
    };
    Ok(ResonantFeature {
        amplitude,
        baseline,
        kind,
    })
}
