//! Scan-axis calibration from modulation sidebands, Autler-Townes field
//! calibration, noise-equivalent field, heterodyne SNR and sensitivity maps.
//!
//! Spectrum axes are angular frequencies (rad/s); splittings and beat
//! frequencies are reported in Hz. Powers in dBm are referenced to 1 mW and
//! convert to field only through a [`CalibrationFit`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, TWO_PI};
use crate::doppler::weighted_sum;
use crate::dynamics::TimeTrace;
use crate::error::{Error, Result};
use crate::lindblad::{build_hamiltonian, build_liouvillian, steady_state, DensityMatrix, Propagator};
use crate::observables::{evaluate_each, format_float, Channel, Readout, SpectrumTrace, SweepTarget};
use crate::peaks::{find_peaks, Peak, PeakFinder};
use crate::scheme::LadderScheme;

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Converts a scan recorded against time into frequency: Hz per second of
/// scan, from a carrier and two sidebands at ±`sideband_frequency`.
pub fn calibrate_scan_axis(trace: &SpectrumTrace, sideband_frequency: f64) -> Result<f64> {
    calibrate_scan_axis_with(trace, sideband_frequency, &PeakFinder::default())
}

pub fn calibrate_scan_axis_with(
    trace: &SpectrumTrace,
    sideband_frequency: f64,
    finder: &PeakFinder,
) -> Result<f64> {
    if !(sideband_frequency > 0.0) {
        return Err(Error::validation("sideband_frequency must be > 0"));
    }
    let peaks = find_peaks(&trace.axis, &trace.values, finder);
    if peaks.len() != 3 {
        return Err(Error::analysis(format!(
            "scan calibration failed: found {} peaks, expected carrier and two sidebands",
            peaks.len()
        )));
    }
    let mut c: Vec<f64> = peaks.iter().map(|p| p.center).collect();
    c.sort_by(f64::total_cmp);
    let mean_sep = 0.5 * ((c[1] - c[0]).abs() + (c[2] - c[1]).abs());
    Ok(sideband_frequency / mean_sep)
}

/// Result of a doublet measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtSplitting {
    /// Peak separation in Hz; 0 when unsplit.
    pub splitting: f64,
    pub unsplit: bool,
    /// Refined centres of the two dominant peaks (rad/s), ascending.
    pub centers: Vec<f64>,
}

pub fn extract_at_splitting(trace: &SpectrumTrace) -> AtSplitting {
    extract_at_splitting_with(trace, &PeakFinder::default())
}

/// Separation of the two most prominent peaks of a trace whose axis is in rad/s.
pub fn extract_at_splitting_with(trace: &SpectrumTrace, finder: &PeakFinder) -> AtSplitting {
    let mut peaks: Vec<Peak> = find_peaks(&trace.axis, &trace.values, finder);
    peaks.sort_by(|a, b| b.prominence.total_cmp(&a.prominence));
    if peaks.len() < 2 {
        return AtSplitting {
            splitting: 0.0,
            unsplit: true,
            centers: peaks.iter().map(|p| p.center).collect(),
        };
    }
    let mut centers = vec![peaks[0].center, peaks[1].center];
    centers.sort_by(f64::total_cmp);
    AtSplitting {
        splitting: (centers[1] - centers[0]) / TWO_PI,
        unsplit: false,
        centers,
    }
}

/// Straight-line-through-origin fit of AT splitting against √(power in mW).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    /// (V/m) per √mW.
    pub c_cal: f64,
    /// Hz per √mW.
    pub slope: f64,
    /// Hz.
    pub residual_rms: f64,
    /// (power dBm, splitting Hz).
    pub points: Vec<(f64, f64)>,
}

impl CalibrationFit {
    /// Fit consistent with a given calibration factor, for a transition dipole in C·m.
    pub fn from_c_cal(c_cal: f64, dipole: f64) -> Result<Self> {
        if !(c_cal > 0.0 && dipole > 0.0) {
            return Err(Error::validation("c_cal and dipole must be > 0"));
        }
        let slope = c_cal * dipole / (TWO_PI * HBAR);
        let points = [-60.0, -40.0]
            .iter()
            .map(|&p| (p, slope * dbm_to_mw(p).sqrt()))
            .collect();
        Ok(CalibrationFit {
            c_cal,
            slope,
            residual_rms: 0.0,
            points,
        })
    }

    /// Calibration pinned by one known (power, field) pair.
    pub fn from_anchor(power_dbm: f64, field: f64, dipole: f64) -> Result<Self> {
        Self::from_c_cal(field / dbm_to_mw(power_dbm).sqrt(), dipole)
    }

    /// Field in V/m at the atoms for an applied power in dBm.
    pub fn field_for_power(&self, power_dbm: f64) -> f64 {
        self.c_cal * dbm_to_mw(power_dbm).sqrt()
    }

    /// Applied power in dBm that yields `field` V/m.
    pub fn power_for_field(&self, field: f64) -> f64 {
        20.0 * (field / self.c_cal).log10()
    }
}

/// Least-squares slope of splitting against √mW with zero intercept;
/// `c_cal = 2πħ·slope/d`.
pub fn fit_field_calibration(points: &[(f64, f64)], dipole: f64) -> Result<CalibrationFit> {
    if points.len() < 2 {
        return Err(Error::analysis("field calibration needs at least two points"));
    }
    if !(dipole > 0.0 && dipole.is_finite()) {
        return Err(Error::validation("dipole must be > 0"));
    }
    if points.iter().any(|(p, s)| !p.is_finite() || !s.is_finite()) {
        return Err(Error::analysis("calibration points must be finite"));
    }
    // Sort so the sums do not depend on input order.
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let xs: Vec<f64> = sorted.iter().map(|&(p, _)| dbm_to_mw(p).sqrt()).collect();
    let sxy: f64 = xs.iter().zip(&sorted).map(|(x, (_, y))| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let slope = sxy / sxx;
    if !(slope > 0.0 && slope.is_finite()) {
        return Err(Error::analysis(format!(
            "field calibration slope {slope} Hz/sqrt(mW) is not positive"
        )));
    }
    let rss: f64 = xs.iter().zip(&sorted).map(|(x, (_, y))| (y - slope * x).powi(2)).sum();
    Ok(CalibrationFit {
        c_cal: TWO_PI * HBAR * slope / dipole,
        slope,
        residual_rms: (rss / sorted.len() as f64).sqrt(),
        points: points.to_vec(),
    })
}

/// Noise-equivalent field `√(10^((P_sig − SNR)/10)·RBW)·C_cal` in V·m⁻¹·Hz⁻½.
pub fn sensitivity_from_snr(p_sig: f64, snr: f64, rbw: f64, fit: &CalibrationFit) -> Result<f64> {
    if !(rbw > 0.0) {
        return Err(Error::validation("rbw must be > 0"));
    }
    Ok((10f64.powf((p_sig - snr) / 10.0) * rbw).sqrt() * fit.c_cal)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeterodyneSetup {
    /// V/m.
    pub lo_field: f64,
    /// V/m.
    pub sig_field: f64,
    /// Hz.
    pub beat_frequency: f64,
    /// Hz.
    pub rbw: f64,
    /// Flat one-sided noise density in signal units² per Hz.
    pub noise_floor: f64,
}

impl HeterodyneSetup {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lo_field", self.lo_field),
            ("beat_frequency", self.beat_frequency),
            ("rbw", self.rbw),
            ("noise_floor", self.noise_floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be > 0")));
            }
        }
        if !(self.sig_field >= 0.0 && self.sig_field.is_finite()) {
            return Err(Error::validation("sig_field must be >= 0"));
        }
        if self.sig_field > self.lo_field {
            log::warn!(
                "signal field {} V/m exceeds LO field {} V/m; the small-signal model is outside its regime",
                self.sig_field,
                self.lo_field
            );
        }
        Ok(())
    }
}

/// Default flat noise densities for the two readouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Transmission (dimensionless)² per Hz: photodetector and laser
    /// intensity noise of 1e-6/√Hz relative to full transmission.
    pub transmission: f64,
    /// (counts/s)² per Hz: shot noise 2·R_dark of the PMT dark rate.
    pub fluorescence: f64,
}

impl NoiseModel {
    pub const PMT_DARK_RATE: f64 = 100.0;

    pub fn floor(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Transmission => self.transmission,
            Channel::Fluorescence => self.fluorescence,
        }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            transmission: 1e-12,
            fluorescence: 2.0 * Self::PMT_DARK_RATE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeterodyneResult {
    /// dS/dE at the LO field, signal units per V/m.
    pub slope: f64,
    /// Steady-state signal at the LO field.
    pub bias_signal: f64,
    /// |dS/dE|·E_sig.
    pub beat_amplitude: f64,
    /// `10·log10(A²/(noise_floor·rbw))`; −∞ for a zero amplitude.
    pub snr_db: f64,
    /// The bias point has no measurable slope.
    pub zero_slope: bool,
}

/// Relative step of the centred difference in field.
const FIELD_STEP: f64 = 1e-3;

fn signals_at_fields(scheme: &LadderScheme, readout: &Readout, fields: &[f64]) -> Vec<Result<f64>> {
    let schemes: Vec<Result<LadderScheme>> =
        fields.iter().map(|&f| SweepTarget::RfField.apply(scheme, f)).collect();
    let ok: Vec<LadderScheme> = schemes.iter().filter_map(|s| s.as_ref().ok().cloned()).collect();
    let mut solved = evaluate_each(&ok, readout).into_iter();
    schemes
        .into_iter()
        .map(|s| match s {
            Ok(_) => solved.next().expect("one result per scheme"),
            Err(e) => Err(e),
        })
        .collect()
}

fn heterodyne_from_samples(setup: &HeterodyneSetup, lo: f64, lo_minus: f64, lo_plus: f64) -> HeterodyneResult {
    let h = FIELD_STEP * setup.lo_field;
    let slope = (lo_plus - lo_minus) / (2.0 * h);
    let scale = lo.abs().max(lo_plus.abs()).max(lo_minus.abs());
    let zero_slope = (lo_plus - lo_minus).abs() <= 1e-12 * scale;
    let beat_amplitude = if zero_slope { 0.0 } else { slope.abs() * setup.sig_field };
    HeterodyneResult {
        slope,
        bias_signal: lo,
        beat_amplitude,
        snr_db: 10.0 * (beat_amplitude.powi(2) / (setup.noise_floor * setup.rbw)).log10(),
        zero_slope,
    }
}

fn check_readout(scheme: &LadderScheme, readout: &Readout) -> Result<()> {
    scheme.validate()?;
    if readout.channel == Channel::Fluorescence {
        readout.fluorescence.validate(scheme)?;
    }
    Ok(())
}

/// Small-signal heterodyne response: the steady-state slope at the LO field
/// transduces the signal field into a beat amplitude.
pub fn simulate_heterodyne(
    scheme: &LadderScheme,
    setup: &HeterodyneSetup,
    readout: &Readout,
) -> Result<HeterodyneResult> {
    setup.validate()?;
    check_readout(scheme, readout)?;
    let h = FIELD_STEP * setup.lo_field;
    let s = signals_at_fields(scheme, readout, &[setup.lo_field, setup.lo_field - h, setup.lo_field + h]);
    let mut it = s.into_iter();
    let (lo, lm, lp) = (it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?);
    Ok(heterodyne_from_samples(setup, lo, lm, lp))
}

/// Heterodyne response at each LO field, evaluated as one parallel batch.
pub fn heterodyne_scan(
    scheme: &LadderScheme,
    setup: &HeterodyneSetup,
    readout: &Readout,
    lo_fields: &[f64],
) -> Result<Vec<HeterodyneResult>> {
    check_readout(scheme, readout)?;
    let mut fields = Vec::with_capacity(3 * lo_fields.len());
    for &e in lo_fields {
        let h = FIELD_STEP * e;
        fields.extend([e, e - h, e + h]);
    }
    let samples: Result<Vec<f64>> = signals_at_fields(scheme, readout, &fields).into_iter().collect();
    let samples = samples?;
    lo_fields
        .iter()
        .zip(samples.chunks(3))
        .map(|(&e, c)| {
            let s = HeterodyneSetup { lo_field: e, ..*setup };
            s.validate()?;
            Ok(heterodyne_from_samples(&s, c[0], c[1], c[2]))
        })
        .collect()
}

/// Index of the SNR maximum and whether SNR rises strictly to it and falls
/// strictly after it.
pub fn optimal_lo(results: &[HeterodyneResult]) -> Option<(usize, bool)> {
    let snr: Vec<f64> = results.iter().map(|r| r.snr_db).collect();
    let best = snr
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))?
        .0;
    let rising = snr[..=best].windows(2).all(|w| w[1] > w[0]);
    let falling = snr[best..].windows(2).all(|w| w[1] < w[0]);
    Some((best, rising && falling))
}

/// Two-tone time-domain reference for the small-signal model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoToneResult {
    /// Fourier amplitude of the signal at the beat frequency over the last period.
    pub beat_amplitude: f64,
    pub trace: TimeTrace,
}

/// Steps the master equation through `periods` beat periods with the RF
/// amplitude held at the two-tone envelope `|E_LO + E_sig·e^{i2πf t}|` over
/// each of `steps` sub-intervals per period.
pub fn simulate_two_tone(
    scheme: &LadderScheme,
    setup: &HeterodyneSetup,
    readout: &Readout,
    steps: usize,
    periods: usize,
) -> Result<TwoToneResult> {
    setup.validate()?;
    check_readout(scheme, readout)?;
    if steps < 8 || periods < 2 {
        return Err(Error::validation("two-tone solve needs >= 8 steps and >= 2 periods"));
    }
    let period = 1.0 / setup.beat_frequency;
    let dt = period / steps as f64;
    let envelope = |k: usize| {
        let phase = TWO_PI * setup.beat_frequency * (k as f64 + 0.5) * dt;
        let (s, c) = phase.sin_cos();
        let (e, f) = (setup.lo_field, setup.sig_field);
        ((e + f * c).powi(2) + (f * s).powi(2)).sqrt()
    };
    let step_schemes: Result<Vec<LadderScheme>> = (0..steps)
        .map(|k| SweepTarget::RfField.apply(scheme, envelope(k)))
        .collect();
    let step_schemes = step_schemes?;
    let start = SweepTarget::RfField.apply(scheme, envelope(steps - 1))?;
    let dim = scheme.dim();

    let per_velocity: Vec<Result<Vec<f64>>> = readout
        .grid
        .nodes()
        .par_iter()
        .map(|&(v, _)| -> Result<Vec<f64>> {
            let props: Result<Vec<Propagator>> = step_schemes
                .iter()
                .map(|s| Propagator::new(&build_liouvillian(&build_hamiltonian(s, v), s, &readout.extra), dt))
                .collect();
            let props = props?;
            let l0 = build_liouvillian(&build_hamiltonian(&start, v), &start, &readout.extra);
            let mut state = steady_state(&l0)?.vectorized();
            let mut out = Vec::with_capacity(steps * periods);
            for _ in 0..periods {
                for (k, p) in props.iter().enumerate() {
                    state = p.apply(&state);
                    let rho = DensityMatrix::from_vectorized(&state, dim);
                    out.push(readout.linear_value(&rho, &step_schemes[k]));
                }
            }
            Ok(out)
        })
        .collect();
    let mut columns = Vec::with_capacity(per_velocity.len());
    for r in per_velocity {
        columns.push(r?);
    }
    let total = steps * periods;
    let values: Vec<f64> = (0..total)
        .map(|i| {
            let vals: Vec<f64> = columns.iter().map(|c| c[i]).collect();
            readout.finish(weighted_sum(&readout.grid, &vals), scheme)
        })
        .collect();
    let times: Vec<f64> = (1..=total).map(|i| i as f64 * dt).collect();
    let last = &values[total - steps..];
    let (mut a, mut b) = (0.0, 0.0);
    for (k, v) in last.iter().enumerate() {
        // Samples sit at the end of each step; the drive was centred half a step earlier.
        let phase = TWO_PI * (k as f64 + 0.5) / steps as f64;
        a += v * phase.cos();
        b += v * phase.sin();
    }
    let norm = 2.0 / steps as f64;
    Ok(TwoToneResult {
        beat_amplitude: norm * (a * a + b * b).sqrt(),
        trace: TimeTrace::new(times, values)?,
    })
}

/// Noise-equivalent field over a probe-power × LO-field grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityMap {
    /// W.
    pub probe_powers: Vec<f64>,
    /// V/m.
    pub lo_fields: Vec<f64>,
    /// V·m⁻¹·Hz⁻½, `[power][lo]`; `None` where the cell failed.
    pub sensitivity: Vec<Vec<Option<f64>>>,
    pub failures: Vec<CellFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub row: usize,
    pub col: usize,
    pub reason: String,
}

impl SensitivityMap {
    /// Smallest successful entry with its (row, col).
    pub fn minimum(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, row) in self.sensitivity.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = *v {
                    if best.is_none_or(|b| v < b.2) {
                        best = Some((i, j, v));
                    }
                }
            }
        }
        best
    }

    /// Long-format CSV `probe_power,lo_field,sensitivity`; failed cells are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("probe_power[W],lo_field[V/m],sensitivity[V/m/sqrt(Hz)]\n");
        for (p, row) in self.probe_powers.iter().zip(&self.sensitivity) {
            for (e, v) in self.lo_fields.iter().zip(row) {
                match v {
                    Some(v) => out.push_str(&format!("{},{},{}\n", format_float(*p), format_float(*e), format_float(*v))),
                    None => out.push_str(&format!("{},{},\n", format_float(*p), format_float(*e))),
                }
            }
        }
        out
    }
}

/// Applies the heterodyne model and the noise-equivalent-field formula to
/// every (probe power, LO field) cell. `setup.lo_field` is replaced by each
/// grid value; the signal power fed to the formula is the calibrated power of
/// `setup.sig_field`.
pub fn sensitivity_map(
    scheme: &LadderScheme,
    probe_powers: &[f64],
    lo_fields: &[f64],
    setup: &HeterodyneSetup,
    readout: &Readout,
    fit: &CalibrationFit,
) -> Result<SensitivityMap> {
    if probe_powers.is_empty() || lo_fields.is_empty() {
        return Err(Error::validation("sensitivity map grids must be non-empty"));
    }
    check_readout(scheme, readout)?;
    setup.validate()?;
    if !(setup.sig_field > 0.0) {
        return Err(Error::validation("sig_field must be > 0 for a sensitivity map"));
    }
    let p_sig = fit.power_for_field(setup.sig_field);

    // (row, col, side) → field-perturbed scheme, solved as one batch.
    let mut schemes = Vec::new();
    let mut prep_errors: Vec<Option<Error>> = Vec::new();
    for &p in probe_powers {
        let row = SweepTarget::ProbePower.apply(scheme, p);
        for &e in lo_fields {
            let h = FIELD_STEP * e;
            match &row {
                Ok(base) => {
                    let cell: Result<Vec<LadderScheme>> = [e, e - h, e + h]
                        .iter()
                        .map(|&f| SweepTarget::RfField.apply(base, f))
                        .collect();
                    match cell {
                        Ok(c) => {
                            schemes.extend(c);
                            prep_errors.push(None);
                        }
                        Err(err) => prep_errors.push(Some(err)),
                    }
                }
                Err(err) => prep_errors.push(Some(Error::validation(err.to_string()))),
            }
        }
    }
    let mut solved = evaluate_each(&schemes, readout).into_iter();
    let ncol = lo_fields.len();
    let mut sensitivity = vec![vec![None; ncol]; probe_powers.len()];
    let mut failures = Vec::new();
    for (idx, prep) in prep_errors.into_iter().enumerate() {
        let (row, col) = (idx / ncol, idx % ncol);
        let cell: Result<f64> = match prep {
            Some(err) => Err(err),
            None => {
                let vals: Vec<Result<f64>> = solved.by_ref().take(3).collect();
                let vals: Result<Vec<f64>> = vals.into_iter().collect();
                vals.and_then(|v| {
                    let s = HeterodyneSetup { lo_field: lo_fields[col], ..*setup };
                    s.validate()?;
                    let r = heterodyne_from_samples(&s, v[0], v[1], v[2]);
                    if r.zero_slope {
                        return Err(Error::analysis("zero slope at this LO field"));
                    }
                    sensitivity_from_snr(p_sig, r.snr_db, s.rbw, fit)
                })
            }
        };
        match cell {
            Ok(v) if v > 0.0 && v.is_finite() => sensitivity[row][col] = Some(v),
            Ok(v) => failures.push(CellFailure { row, col, reason: format!("non-positive sensitivity {v}") }),
            Err(e) => failures.push(CellFailure { row, col, reason: e.to_string() }),
        }
    }
    Ok(SensitivityMap {
        probe_powers: probe_powers.to_vec(),
        lo_fields: lo_fields.to_vec(),
        sensitivity,
        failures,
    })
}

/// Smallest field on `fields` (ascending) whose steady-state signal change
/// from zero field reaches the noise amplitude √(noise_floor·rbw).
pub fn response_threshold(
    scheme: &LadderScheme,
    readout: &Readout,
    fields: &[f64],
    noise_floor: f64,
    rbw: f64,
) -> Result<Option<f64>> {
    check_readout(scheme, readout)?;
    if !(noise_floor > 0.0 && rbw > 0.0) {
        return Err(Error::validation("noise_floor and rbw must be > 0"));
    }
    let mut all = vec![0.0];
    all.extend_from_slice(fields);
    let s: Result<Vec<f64>> = signals_at_fields(scheme, readout, &all).into_iter().collect();
    let s = s?;
    let noise = (noise_floor * rbw).sqrt();
    Ok(fields
        .iter()
        .zip(&s[1..])
        .find(|(_, v)| (*v - s[0]).abs() >= noise)
        .map(|(f, _)| *f))
}
