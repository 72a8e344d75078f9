//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as part of `cargo test`. Pass criterion numbers to run a subset:
//!
//! ```text
//! cargo test -p rydberg-core --test acceptance -- 3 8
//! ```
//!
//! Criteria listed in `KNOWN_RED` are reported as FAIL but do not fail the
//! run; set `ACCEPTANCE_STRICT=1` to make them fatal. A known-red criterion
//! that starts passing fails the run so the list gets updated.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rydberg_core::calibrate::{
    extract_at_splitting, fit_field_calibration, heterodyne_scan, optimal_lo, response_threshold,
    sensitivity_from_snr, sensitivity_map, CalibrationFit, HeterodyneSetup, NoiseModel,
};
use rydberg_core::constants::{CS133_MASS, HBAR, TWO_PI};
use rydberg_core::doppler::{doppler_average, make_grid, VelocityGrid};
use rydberg_core::dynamics::{
    bandwidth_from_tau, decay_decomposition, extract_rise_fall, simulate_square_wave, SquareWave,
    TimeTrace,
};
use rydberg_core::lindblad::{
    build_hamiltonian, build_liouvillian, solve_steady, steady_state_unchecked, time_evolve,
    DensityMatrix, IncoherentTransfer,
};
use rydberg_core::observables::{
    classify_feature, linspace, logspace, sweep, sweep_map, Channel, FeatureKind, Readout,
    SweepTarget,
};
use rydberg_core::scheme::{CellParams, Drive, DriveRole, LadderScheme, Level};

const KNOWN_RED: &[u32] = &[4];

const MHZ: f64 = TWO_PI * 1e6;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn cesium() -> LadderScheme {
    LadderScheme::cesium_default()
}

fn thermal(points: usize) -> VelocityGrid {
    make_grid(295.0, CS133_MASS, points, 4.0).unwrap()
}

fn cell() -> CellParams {
    CellParams {
        atom_mass: CS133_MASS,
        temperature: 295.0,
        number_density: 0.0,
        length: 0.01,
        beam_radius: 1e-3,
        transit_rate: 0.0,
    }
}

fn drive(name: &str, role: DriveRole, lower: usize, rabi: f64, detuning: f64) -> Drive {
    Drive {
        name: name.into(),
        role,
        lower,
        upper: lower + 1,
        rabi,
        detuning,
        wavelength: 895e-9,
        propagation_sign: 1,
        dipole_moment: None,
        waist_radius: None,
    }
}

fn two_level(gamma: f64, rabi: f64, detuning: f64) -> LadderScheme {
    LadderScheme {
        cell: cell(),
        levels: vec![Level::new("g"), Level::new("e").with_decay(0, gamma)],
        drives: vec![drive("probe", DriveRole::Probe, 0, rabi, detuning)],
        transfers: vec![],
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let out = f();
    (out, t0.elapsed())
}

fn solver_correctness() -> Outcome {
    let ((lineshape_err, rho_ee), elapsed) = timed(|| {
        let gamma = TWO_PI * 5.2e6;
        let rabi = 1e-4 * gamma;
        let mut worst = 0.0f64;
        for det in linspace(-5.0 * gamma, 5.0 * gamma, 201) {
            let rho = solve_steady(&two_level(gamma, rabi, det), 0.0, &[]).unwrap();
            let lorentzian = 0.5 * rabi * 0.5 * gamma / (det * det + 0.25 * gamma * gamma);
            worst = worst.max(rel(rho.coherence(0, 1).im.abs(), lorentzian));
        }
        let rho = solve_steady(&two_level(gamma, gamma, 0.0), 0.0, &[]).unwrap();
        (worst, rho.population(1))
    });
    let ee_err = (rho_ee - 1.0 / 3.0).abs();
    Outcome::new(
        lineshape_err < 1e-6 && ee_err < 1e-8 && elapsed < Duration::from_secs(1),
        format!(
            "lineshape rel err {lineshape_err:.2e} (< 1e-6), |rho_ee - 1/3| {ee_err:.2e} (< 1e-8), {:.3} s (< 1 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn random_scheme(rng: &mut ChaCha8Rng) -> (LadderScheme, f64) {
    let n = rng.gen_range(2..=5);
    let mut levels = vec![Level::new("L0")];
    for i in 1..n {
        let mut level = Level::new(format!("L{i}")).with_decay(i - 1, 10f64.powf(rng.gen_range(3.0..8.0)));
        if i >= 2 && rng.gen_bool(0.5) {
            level = level.with_decay(rng.gen_range(0..i - 1), 10f64.powf(rng.gen_range(3.0..7.0)));
        }
        if rng.gen_bool(0.3) {
            level = level.with_dephasing(10f64.powf(rng.gen_range(3.0..7.0)));
        }
        levels.push(level);
    }
    let drives = (0..n - 1)
        .map(|i| {
            let role = if i == 0 { DriveRole::Probe } else { DriveRole::Optical };
            let mut d = drive(
                &format!("d{i}"),
                role,
                i,
                10f64.powf(rng.gen_range(4.0..8.5)),
                rng.gen_range(-1.0..1.0) * 5e7,
            );
            d.wavelength = rng.gen_range(4e-7..3e-6);
            d.propagation_sign = if rng.gen_bool(0.5) { 1 } else { -1 };
            d
        })
        .collect();
    let mut c = cell();
    if rng.gen_bool(0.5) {
        c.transit_rate = 10f64.powf(rng.gen_range(3.0..5.0));
    }
    let mut transfers = Vec::new();
    if n >= 3 && rng.gen_bool(0.3) {
        transfers.push(IncoherentTransfer {
            source: n - 2,
            target: n - 1,
            rate: 10f64.powf(rng.gen_range(2.0..5.0)),
        });
    }
    let scheme = LadderScheme {
        cell: c,
        levels,
        drives,
        transfers,
    };
    (scheme, rng.gen_range(-400.0..400.0))
}

fn state_errors(rho: &DensityMatrix) -> (f64, f64, f64) {
    let m: &DMatrix<Complex64> = rho.entries();
    let herm = (m - m.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    let tr = m.trace();
    let trace_err = (tr - Complex64::new(1.0, 0.0)).norm();
    let hermitian_part = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let min_ev = hermitian_part
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v));
    (herm, trace_err, min_ev)
}

fn state_validity() -> Outcome {
    let (result, elapsed) = timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_2024);
        let (mut herm, mut trace, mut min_ev) = (0.0f64, 0.0f64, f64::INFINITY);
        let mut states = 0usize;
        for _ in 0..1000 {
            let (scheme, v) = random_scheme(&mut rng);
            scheme.validate().unwrap();
            let l = build_liouvillian(&build_hamiltonian(&scheme, v), &scheme, &[]);
            let mut all = vec![steady_state_unchecked(&l).unwrap()];
            let ground = DensityMatrix::pure(scheme.dim(), 0);
            all.extend(time_evolve(&l, &ground, &[1e-9, 1e-7, 1e-5]).unwrap());
            for rho in &all {
                let (h, t, e) = state_errors(rho);
                herm = herm.max(h);
                trace = trace.max(t);
                min_ev = min_ev.min(e);
                states += 1;
            }
        }
        (herm, trace, min_ev, states)
    });
    let (herm, trace, min_ev, states) = result;
    Outcome::new(
        herm <= 1e-10 && trace <= 1e-9 && min_ev >= -1e-9 && elapsed < Duration::from_secs(60),
        format!(
            "{states} states from 1000 schemes: hermiticity {herm:.1e} (<= 1e-10), trace {trace:.1e} (<= 1e-9), \
             min eigenvalue {min_ev:.1e} (>= -1e-9), {:.1} s (< 60 s)",
            elapsed.as_secs_f64()
        ),
    )
}

/// Weak optical drives so the Rydberg lines are narrow against the splitting.
fn at_scheme() -> LadderScheme {
    let mut s = cesium();
    s.drives[0].rabi = 0.1 * MHZ;
    s.drives[1].rabi = 0.5 * MHZ;
    s.drives[2].rabi = 0.5 * MHZ;
    s
}

fn at_calibration_loop() -> Outcome {
    let base = at_scheme();
    let dipole = base.drives[base.rf_index().unwrap()].dipole_moment.unwrap();
    let c_cal = 0.07;
    let readout = Readout::new(Channel::Fluorescence, thermal(201));
    let axis = linspace(-15.0 * MHZ, 15.0 * MHZ, 601);
    let injected = CalibrationFit::from_c_cal(c_cal, dipole).unwrap();
    let mut points = Vec::new();
    let mut pass = true;
    let mut detail = Vec::new();
    for f_mhz in [5.0, 7.5, 10.0, 15.0, 20.0] {
        let expected = f_mhz * 1e6;
        let field = expected * TWO_PI * HBAR / dipole;
        let power = 20.0 * (field / c_cal).log10();
        let mut s = base.clone();
        s.set_rf_field(injected.field_for_power(power)).unwrap();
        let trace = sweep(&s, &SweepTarget::Detuning("coupling".into()), &axis, &readout).unwrap();
        let at = extract_at_splitting(&trace);
        let err = rel(at.splitting, expected);
        if [5.0, 10.0, 20.0].contains(&f_mhz) {
            pass &= !at.unsplit && err < 5e-3;
            detail.push(format!("{f_mhz} MHz: {err:.1e}"));
        }
        points.push((power, at.splitting));
    }
    let fit = fit_field_calibration(&points, dipole).unwrap();
    let c_err = rel(fit.c_cal, c_cal);
    pass &= c_err < 1e-2;
    Outcome::new(
        pass,
        format!(
            "splitting rel err {} (< 5e-3); C_cal {:.5} vs {c_cal} rel err {c_err:.1e} (< 1e-2)",
            detail.join(", "),
            fit.c_cal
        ),
    )
}

/// Resonant transmission change relative to the scan edges, ±30 MHz coupling detuning.
fn resonant_amplitude(base: &LadderScheme, readout: &Readout, ratio: f64) -> f64 {
    let mut s = base.clone();
    s.drives[0].rabi = ratio * s.drives[2].rabi;
    let edge = 30.0 * MHZ;
    let trace = sweep(&s, &SweepTarget::Detuning("coupling".into()), &[-edge, 0.0, edge], readout).unwrap();
    classify_feature(&trace, 0.0).unwrap().amplitude
}

fn eit_eia_crossover() -> Outcome {
    let (result, elapsed) = timed(|| {
        let mut s = cesium();
        s.set_rf_field(1e-3).unwrap();
        let readout = Readout::new(Channel::Transmission, thermal(201));
        let ratios: Vec<f64> = (1..=40).map(|i| 0.05 * f64::from(i)).collect();
        let mut prev = (ratios[0], resonant_amplitude(&s, &readout, ratios[0]));
        for &r in &ratios[1..] {
            let a = resonant_amplitude(&s, &readout, r);
            if a.signum() != prev.1.signum() {
                let (mut lo, mut hi) = (prev.0, r);
                for _ in 0..30 {
                    let mid = 0.5 * (lo + hi);
                    if resonant_amplitude(&s, &readout, mid).signum() == prev.1.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let kind = |a: f64| if a > 0.0 { FeatureKind::Eit } else { FeatureKind::Eia };
                return Some((0.5 * (lo + hi), kind(prev.1), kind(a)));
            }
            prev = (r, a);
        }
        None
    });
    let secs = elapsed.as_secs_f64();
    match result {
        Some((ratio, from, to)) => Outcome::new(
            rel(ratio, 0.6) <= 0.15 && elapsed < Duration::from_secs(300),
            format!(
                "flip {from:?} -> {to:?} at Omega_p/Omega_c = {ratio:.4} (target 0.6 +/- 15%), {secs:.1} s (< 300 s)"
            ),
        ),
        None => Outcome::new(false, format!("no sign change for Omega_p/Omega_c in [0.05, 2], {secs:.1} s")),
    }
}

fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

fn rf_gated_fluorescence() -> Outcome {
    let grid = thermal(201);
    let readout = Readout::new(Channel::Fluorescence, grid.clone());
    let mut s = cesium();
    s.set_rf_field(0.0).unwrap();
    let dark = readout.signal(&s).unwrap();
    let mut on = cesium();
    on.set_rf_field(0.65).unwrap();
    let axis = linspace(-10.0 * MHZ, 10.0 * MHZ, 81);
    let scan = sweep(&on, &SweepTarget::Detuning("coupling".into()), &axis, &readout).unwrap();
    let peak = scan.values.iter().fold(0.0f64, |a, &v| a.max(v));
    let gated = dark.abs() / peak;

    let bbr = vec![IncoherentTransfer {
        source: 3,
        target: 4,
        rate: TWO_PI * 1e3,
    }];
    let with_bbr = Readout::new(Channel::Fluorescence, grid.clone()).with_transfers(bbr.clone());
    let (mut pop, mut counts) = (Vec::new(), Vec::new());
    for p in logspace(1e-5, 1e-4, 8) {
        let mut sp = s.clone();
        sp.set_probe_power(p).unwrap();
        pop.push(doppler_average(|v| solve_steady(&sp, v, &bbr).unwrap().population(3), &grid));
        counts.push(with_bbr.signal(&sp).unwrap());
    }
    let r2 = r_squared(&pop, &counts);
    let varies = pop.last().unwrap() / pop[0];
    Outcome::new(
        gated < 1e-12 && r2 > 0.999 && varies > 1.5,
        format!(
            "RF-off/RF-on peak {gated:.1e} (< 1e-12); BBR background vs 35P population R^2 = {r2:.8} (> 0.999) \
             over 10-100 uW, population span x{varies:.2}"
        ),
    )
}

fn eq1_arithmetic() -> Outcome {
    let dipole = cesium().drives[3].dipole_moment.unwrap();
    let worked = CalibrationFit::from_c_cal(0.2137, dipole).unwrap();
    let s = sensitivity_from_snr(-60.0, 25.0, 10.0, &worked).unwrap();
    let oracle = 0.2137 * (10.0f64 * 10f64.powf(-8.5)).sqrt();
    let worked_ok = (s - 38e-6).abs() < 0.05e-6 && rel(s, oracle) < 1e-14;

    let direct = sensitivity_from_snr(-60.0, 25.0 + 10.0 * 2f64.log10(), 10.0, &worked).unwrap() / s;

    let scheme = cesium();
    let readout = Readout::new(Channel::Transmission, VelocityGrid::stationary());
    let setup = HeterodyneSetup {
        lo_field: 0.05,
        sig_field: 1e-4,
        beat_frequency: 1e3,
        rbw: 1.0,
        noise_floor: 1e-12,
    };
    let half = HeterodyneSetup {
        noise_floor: 0.5e-12,
        ..setup
    };
    let fit = CalibrationFit::from_anchor(-60.0, 70e-6, dipole).unwrap();
    let powers = [2e-5, 5e-5];
    let lo = [0.02, 0.05, 0.1];
    let full_map = sensitivity_map(&scheme, &powers, &lo, &setup, &readout, &fit).unwrap();
    let half_map = sensitivity_map(&scheme, &powers, &lo, &half, &readout, &fit).unwrap();
    let mut worst = rel(direct, 0.5f64.sqrt());
    for (a, b) in full_map.sensitivity.iter().flatten().zip(half_map.sensitivity.iter().flatten()) {
        worst = worst.max(rel(b.unwrap() / a.unwrap(), 0.5f64.sqrt()));
    }
    Outcome::new(
        worked_ok && worst < 1e-12,
        format!(
            "worked example {:.3} uV/m/rtHz (38.0 to 3 s.f.); half noise floor ratio rel err {worst:.1e} vs 1/sqrt(2)",
            s * 1e6
        ),
    )
}

fn exponential_square_wave(tau: f64, period: f64, samples: usize, cycles: usize) -> TimeTrace {
    let dt = period / samples as f64;
    let times: Vec<f64> = (0..samples * cycles).map(|k| k as f64 * dt).collect();
    let half = 0.5 * period;
    let top = 1.0 - (-half / tau).exp();
    let values = times
        .iter()
        .map(|&t| {
            let u = t % period;
            if u < half {
                1.0 - (-u / tau).exp()
            } else {
                top * (-(u - half) / tau).exp()
            }
        })
        .collect();
    TimeTrace::new(times, values).unwrap()
}

fn dynamics_analysis() -> Outcome {
    let tau = 1e-6;
    let wave = SquareWave {
        on_field: 1.0,
        period: 100e-6,
        samples: 20_000,
        cycles: 3,
    };
    let trace = exponential_square_wave(tau, wave.period, wave.samples, wave.cycles);
    let rf = extract_rise_fall(&trace, &wave.edges()).unwrap();
    let expected = 9f64.ln() * tau;
    let (rise_err, fall_err) = (rel(rf.tau_rise, expected), rel(rf.tau_fall, expected));

    let bw_exact = [150e-9, 12e-6, 0.35, 1.7e-3]
        .iter()
        .all(|&t| bandwidth_from_tau(t).unwrap() == 0.35 / t);

    let derived = decay_decomposition(12e-6, 100e-6, 100e-6).unwrap();
    let oracle = 1.0 / 12e-6 - 2.0 / 100e-6;
    let derived_ok = rel(derived.gamma_col, oracle) < 1e-12 && (derived.gamma_col - 63_333.3).abs() < 0.1;
    let reading = rel(derived.gamma_col, 60e3);
    let literal = decay_decomposition(12e-6, 1.0 / (TWO_PI * 10e3), 1.0 / (TWO_PI * 10e3)).unwrap();

    Outcome::new(
        rise_err < 1e-3 && fall_err < 1e-3 && bw_exact && derived_ok && reading < 0.1 && !literal.consistent,
        format!(
            "90/10 vs ln9*tau rel err rise {rise_err:.1e} fall {fall_err:.1e} (< 1e-3); bandwidth exact: {bw_exact}; \
             gamma_col {:.1} Hz ({:.1}% from 60 kHz, < 10%); angular-rate reading flagged: {:.0} Hz",
            derived.gamma_col,
            100.0 * reading,
            literal.gamma_col
        ),
    )
}

fn channel_ordering() -> Outcome {
    let scheme = cesium();
    let noise = NoiseModel::default();
    let grid = thermal(201);
    let trans = Readout::new(Channel::Transmission, grid.clone());
    let fluor = Readout::new(Channel::Fluorescence, grid);

    let fields = logspace(1e-6, 1.0, 121);
    let threshold = |r: &Readout| {
        response_threshold(&scheme, r, &fields, noise.floor(r.channel), 1.0)
            .unwrap()
            .unwrap_or(f64::INFINITY)
    };
    let (th_t, th_f) = (threshold(&trans), threshold(&fluor));

    let lo_fields = logspace(1e-3, 1.0, 31);
    let best_lo = |r: &Readout| {
        let setup = HeterodyneSetup {
            lo_field: lo_fields[0],
            sig_field: 1e-4,
            beat_frequency: 1e3,
            rbw: 1.0,
            noise_floor: noise.floor(r.channel),
        };
        let scan = heterodyne_scan(&scheme, &setup, r, &lo_fields).unwrap();
        lo_fields[optimal_lo(&scan).unwrap().0]
    };
    let (lo_t, lo_f) = (best_lo(&trans), best_lo(&fluor));

    let wave = SquareWave {
        on_field: 0.65,
        period: 100e-6,
        samples: 4000,
        cycles: 1,
    };
    let settle = |channel: Channel| {
        let r = Readout::new(channel, thermal(51));
        let trace = simulate_square_wave(&scheme, &r, &wave).unwrap();
        let rf = extract_rise_fall(&trace, &wave.edges()).unwrap();
        rf.tau_rise.max(rf.tau_fall)
    };
    let (st_t, st_f) = (settle(Channel::Transmission), settle(Channel::Fluorescence));

    Outcome::new(
        th_f < th_t && lo_f < lo_t && st_t < st_f,
        format!(
            "(a) threshold fluorescence {th_f:.2e} < transmission {th_t:.2e} V/m; \
             (b) optimal LO fluorescence {lo_f:.3} < transmission {lo_t:.3} V/m; \
             (c) settling transmission {st_t:.2e} < fluorescence {st_f:.2e} s"
        ),
    )
}

fn determinism() -> Outcome {
    let run = || {
        let scheme = cesium();
        let readout = Readout::new(Channel::Transmission, thermal(51));
        let det = SweepTarget::Detuning("coupling".into());
        let spectrum = sweep(&scheme, &det, &linspace(-20.0 * MHZ, 20.0 * MHZ, 41), &readout).unwrap();
        let map = sweep_map(
            &scheme,
            &det,
            &linspace(-10.0 * MHZ, 10.0 * MHZ, 7),
            &SweepTarget::RfField,
            &[0.0, 0.1, 0.5],
            &readout,
        )
        .unwrap();
        let dipole = scheme.drives[3].dipole_moment.unwrap();
        let fit = CalibrationFit::from_anchor(-60.0, 70e-6, dipole).unwrap();
        let setup = HeterodyneSetup {
            lo_field: 0.05,
            sig_field: 1e-4,
            beat_frequency: 1e3,
            rbw: 1.0,
            noise_floor: 1e-12,
        };
        let sens = sensitivity_map(&scheme, &[2e-5, 5e-5], &[0.02, 0.1], &setup, &readout, &fit).unwrap();
        format!("{}{}{}", spectrum.to_csv(), map.to_csv(), sens.to_csv())
    };
    let in_pool = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(run)
    };
    let (one, four) = (in_pool(1), in_pool(4));
    Outcome::new(
        one == four,
        format!("sweep, sweep map and sensitivity map CSV ({} bytes) identical under 1 and 4 threads", one.len()),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "solver correctness", solver_correctness),
        (2, "state validity", state_validity),
        (3, "AT calibration loop", at_calibration_loop),
        (4, "EIT/EIA crossover", eit_eia_crossover),
        (5, "RF-gated fluorescence", rf_gated_fluorescence),
        (6, "heterodyne sensitivity arithmetic", eq1_arithmetic),
        (7, "dynamics analysis", dynamics_analysis),
        (8, "channel ordering", channel_ordering),
        (9, "determinism", determinism),
    ];
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut fatal = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let outcome = run();
        let known_red = KNOWN_RED.contains(&id);
        let tag = match (outcome.pass, known_red) {
            (true, false) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (known red)",
            (true, true) => "PASS (unexpected, update KNOWN_RED)",
        };
        println!("{tag} [{id}] {name}: {}", outcome.detail);
        if outcome.pass == known_red || (known_red && strict) {
            fatal += 1;
        }
    }
    if fatal > 0 {
        println!("acceptance: {fatal} fatal result(s)");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
