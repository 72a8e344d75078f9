use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rydberg_core::doppler::QuadratureRule;
use rydberg_core::observables::Channel;

use crate::units::{self, Range, SweepAxis};

#[derive(Debug, Parser)]
#[command(name = "rydtool", version, about = "Three-photon Rydberg RF electrometry simulator")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Scheme TOML file; the bundled Cs ladder when absent.
    #[arg(long, global = true, env = "RYDTOOL_SCHEME")]
    pub scheme: Option<PathBuf>,
    /// Worker thread cap; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Velocity classes in the Doppler average (1 = atoms at rest).
    #[arg(long, global = true, default_value_t = 201)]
    pub doppler_points: usize,
    /// Half-width of the trapezoid velocity grid in thermal widths.
    #[arg(long, global = true, default_value_t = 4.0)]
    pub doppler_span: f64,
    #[arg(long, global = true, value_enum, default_value_t = Quadrature::Trapezoid)]
    pub quadrature: Quadrature,
    /// Output file; stdout when absent.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    /// Manifest path; defaults to `<output>.manifest.json` when writing a file.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quadrature {
    Trapezoid,
    GaussHermite,
}

impl From<Quadrature> for QuadratureRule {
    fn from(q: Quadrature) -> Self {
        match q {
            Quadrature::Trapezoid => QuadratureRule::Trapezoid,
            Quadrature::GaussHermite => QuadratureRule::GaussHermite,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    Transmission,
    Fluorescence,
}

impl From<ChannelArg> for Channel {
    fn from(c: ChannelArg) -> Self {
        match c {
            ChannelArg::Transmission => Channel::Transmission,
            ChannelArg::Fluorescence => Channel::Fluorescence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Spectrum,
    Time,
}

/// Readout channel and scheme overrides shared by simulating commands.
#[derive(Debug, Clone, Args)]
pub struct Scenario {
    #[arg(long, value_enum, default_value_t = ChannelArg::Transmission)]
    pub channel: ChannelArg,
    /// RF field amplitude, e.g. `20mV/m`.
    #[arg(long, value_parser = units::field)]
    pub rf_field: Option<f64>,
    /// Probe optical power, e.g. `20uW`.
    #[arg(long, value_parser = units::power)]
    pub probe_power: Option<f64>,
    /// Rabi rate of a drive, `DRIVE=2MHz` (repeatable).
    #[arg(long, value_parser = units::named_angular)]
    pub rabi: Vec<(String, f64)>,
    /// Detuning of a drive, `DRIVE=-1MHz` (repeatable).
    #[arg(long, value_parser = units::named_angular, allow_hyphen_values = true)]
    pub detuning: Vec<(String, f64)>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady-state signal along one swept parameter.
    Spectrum(SpectrumArgs),
    /// Steady-state signal over two swept parameters.
    Map(MapArgs),
    /// Field calibration from AT splittings, or scan-axis calibration from sidebands.
    Calibrate(CalibrateArgs),
    /// Small-signal heterodyne response.
    Heterodyne(HeterodyneArgs),
    /// Noise-equivalent field over probe power and LO field.
    SensitivityMap(SensitivityArgs),
    /// Rise and fall times and bandwidth under a square-wave RF drive.
    Bandwidth(BandwidthArgs),
    /// Rewrites a delimited trace file in canonical form.
    Ingest(IngestArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::Map(_) => "map",
            Command::Calibrate(_) => "calibrate",
            Command::Heterodyne(_) => "heterodyne",
            Command::SensitivityMap(_) => "sensitivity-map",
            Command::Bandwidth(_) => "bandwidth",
            Command::Ingest(_) => "ingest",
        }
    }
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// `TARGET:START:STOP:N[:log]`, e.g. `coupling-detuning:-30MHz:30MHz:601`.
    #[arg(long, value_parser = SweepAxis::parse, allow_hyphen_values = true)]
    pub sweep: SweepAxis,
    #[command(flatten)]
    pub scenario: Scenario,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Column axis, `TARGET:START:STOP:N[:log]`.
    #[arg(long, value_parser = SweepAxis::parse, allow_hyphen_values = true)]
    pub x: SweepAxis,
    /// Row axis, `TARGET:START:STOP:N[:log]`.
    #[arg(long, value_parser = SweepAxis::parse, allow_hyphen_values = true)]
    pub y: SweepAxis,
    #[command(flatten)]
    pub scenario: Scenario,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Table of measured (power, splitting) pairs.
    #[arg(long, conflicts_with_all = ["trace", "simulate", "scan_trace"])]
    pub points: Option<PathBuf>,
    /// Power column of `--points`, in dBm.
    #[arg(long, default_value = "power_dbm")]
    pub power_column: String,
    /// Splitting column of `--points`, in Hz.
    #[arg(long, default_value = "splitting_hz")]
    pub splitting_column: String,

    /// Spectrum recorded at an RF power, `FILE@-20dBm` (repeatable).
    #[arg(long, value_parser = units::trace_at_power, allow_hyphen_values = true)]
    pub trace: Vec<(String, f64)>,
    #[arg(long, default_value = "detuning")]
    pub axis_column: String,
    #[arg(long, default_value = "signal")]
    pub value_column: String,
    /// Unit of the trace axis column, e.g. `MHz` or `rad/s`.
    #[arg(long, default_value = "MHz")]
    pub axis_unit: String,

    /// Simulate the splittings instead of reading them.
    #[arg(long, requires = "inject_c_cal")]
    pub simulate: bool,
    /// RF powers to simulate, in dBm or W units (comma separated).
    #[arg(long, value_parser = units::dbm, value_delimiter = ',', allow_hyphen_values = true,
          default_value = "-50dBm,-45dBm,-40dBm,-35dBm,-30dBm")]
    pub powers: Vec<f64>,
    /// Calibration factor in (V/m)/√mW that maps power to field at the atoms.
    #[arg(long, value_parser = units::plain)]
    pub inject_c_cal: Option<f64>,
    /// Detuning scan for simulated spectra.
    #[arg(long, value_parser = SweepAxis::parse, allow_hyphen_values = true,
          default_value = "coupling-detuning:-15MHz:15MHz:601")]
    pub sweep: SweepAxis,
    #[command(flatten)]
    pub scenario: Scenario,

    /// Scan recorded against time with a carrier and two sidebands.
    #[arg(long, requires = "sideband_frequency")]
    pub scan_trace: Option<PathBuf>,
    /// Sideband offset of `--scan-trace`, e.g. `5MHz`.
    #[arg(long, value_parser = units::frequency)]
    pub sideband_frequency: Option<f64>,
    #[arg(long, default_value = "time")]
    pub time_column: String,
}

#[derive(Debug, Args)]
pub struct Heterodyne {
    /// Signal field, e.g. `100uV/m`.
    #[arg(long, value_parser = units::field)]
    pub sig_field: f64,
    #[arg(long, value_parser = units::frequency, default_value = "1kHz")]
    pub beat: f64,
    /// Resolution bandwidth.
    #[arg(long, value_parser = units::frequency, default_value = "1Hz")]
    pub rbw: f64,
    /// Flat noise density in signal units² per Hz; a channel default when absent.
    #[arg(long, value_parser = units::plain)]
    pub noise_floor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HeterodyneArgs {
    /// LO field, e.g. `50mV/m`.
    #[arg(long, value_parser = units::field, required_unless_present = "lo_scan")]
    pub lo_field: Option<f64>,
    /// LO scan `START:STOP:N[:log]`, reporting the SNR optimum.
    #[arg(long, value_parser = |s: &str| Range::parse(s, units::field))]
    pub lo_scan: Option<Range>,
    #[command(flatten)]
    pub het: Heterodyne,
    /// Also integrate the two-tone master equation at `--lo-field`.
    #[arg(long, requires = "lo_field")]
    pub two_tone: bool,
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    #[arg(long, default_value_t = 3)]
    pub periods: usize,
    #[command(flatten)]
    pub scenario: Scenario,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    /// Probe powers `START:STOP:N[:log]`.
    #[arg(long, value_parser = |s: &str| Range::parse(s, units::power), required_unless_present = "snr_table")]
    pub probe_powers: Option<Range>,
    /// LO fields `START:STOP:N[:log]`.
    #[arg(long, value_parser = |s: &str| Range::parse(s, units::field), required_unless_present = "snr_table")]
    pub lo_fields: Option<Range>,
    #[arg(long, value_parser = units::field, required_unless_present = "snr_table")]
    pub sig_field: Option<f64>,
    #[arg(long, value_parser = units::frequency, default_value = "1kHz")]
    pub beat: f64,
    #[arg(long, value_parser = units::frequency, default_value = "1Hz")]
    pub rbw: f64,
    #[arg(long, value_parser = units::plain)]
    pub noise_floor: Option<f64>,

    /// Calibration factor in (V/m)/√mW.
    #[arg(long, value_parser = units::plain, required_unless_present = "calibration")]
    pub c_cal: Option<f64>,
    /// Calibration JSON written by `calibrate`.
    #[arg(long, conflicts_with = "c_cal")]
    pub calibration: Option<PathBuf>,

    /// Measured SNR table instead of simulation.
    #[arg(long, conflicts_with_all = ["probe_powers", "lo_fields", "sig_field", "noise_floor"])]
    pub snr_table: Option<PathBuf>,
    /// Signal power behind the measured SNR.
    #[arg(long, value_parser = units::dbm, allow_hyphen_values = true, requires = "snr_table")]
    pub p_sig: Option<f64>,
    #[arg(long, default_value = "probe_power")]
    pub probe_power_column: String,
    #[arg(long, default_value = "lo_field")]
    pub lo_field_column: String,
    #[arg(long, default_value = "snr_db")]
    pub snr_column: String,
    /// Unit of the probe power column.
    #[arg(long, default_value = "W")]
    pub probe_power_unit: String,
    /// Unit of the LO field column.
    #[arg(long, default_value = "V/m")]
    pub lo_field_unit: String,

    #[command(flatten)]
    pub scenario: Scenario,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BandwidthArgs {
    /// Simulate the square-wave response.
    #[arg(long, conflicts_with = "trace", required_unless_present = "trace")]
    pub simulate: bool,
    /// Measured time trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value = "time")]
    pub time_column: String,
    #[arg(long, default_value = "signal")]
    pub value_column: String,
    /// Unit of the time column.
    #[arg(long, default_value = "s")]
    pub time_unit: String,
    /// Time of the first RF turn-on edge in the trace.
    #[arg(long, value_parser = units::time, default_value = "0s", allow_hyphen_values = true)]
    pub first_edge: f64,

    /// Square-wave period; the RF is on for the first half.
    #[arg(long, value_parser = units::time, default_value = "40us")]
    pub period: f64,
    /// RF field while on.
    #[arg(long, value_parser = units::field, default_value = "0.65V/m")]
    pub on_field: f64,
    /// Samples per period.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Settled cycles in the simulated trace.
    #[arg(long, default_value_t = 2)]
    pub cycles: usize,

    /// Black-body-limited lifetime for the decay budget.
    #[arg(long, value_parser = units::time, requires = "t_rydryd")]
    pub t_bbr: Option<f64>,
    /// Rydberg-Rydberg-collision-limited lifetime for the decay budget.
    #[arg(long, value_parser = units::time, requires = "t_bbr")]
    pub t_rydryd: Option<f64>,
    /// Write the trace CSV next to the JSON result.
    #[arg(long)]
    pub trace_output: Option<PathBuf>,

    #[command(flatten)]
    pub scenario: Scenario,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub input: PathBuf,
    /// Keep only a mapped two-column trace of this kind.
    #[arg(long, value_enum, requires_all = ["axis_column", "value_column"])]
    pub kind: Option<KindArg>,
    #[arg(long)]
    pub axis_column: Option<String>,
    #[arg(long)]
    pub value_column: Option<String>,
    /// Multiplies the axis column.
    #[arg(long, value_parser = units::plain, default_value = "1")]
    pub axis_scale: f64,
    /// Multiplies the value column.
    #[arg(long, value_parser = units::plain, default_value = "1")]
    pub value_scale: f64,
}
