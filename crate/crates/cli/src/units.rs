//! Strict unit-suffixed values. Every quantity needs an explicit unit; the
//! parsers return SI values (angular rates in rad/s, powers in W).

use std::f64::consts::TAU;

use rydberg_core::observables::{linspace, logspace, SweepTarget};

// Decimal exponent of each unit. Longer units sharing a suffix come first.
const FREQUENCY: &[(&str, i32)] = &[("GHz", 9), ("MHz", 6), ("kHz", 3), ("Hz", 0)];
const FIELD: &[(&str, i32)] = &[("uV/m", -6), ("µV/m", -6), ("mV/m", -3), ("V/m", 0)];
const POWER: &[(&str, i32)] = &[("nW", -9), ("uW", -6), ("µW", -6), ("mW", -3), ("W", 0)];
const TIME: &[(&str, i32)] = &[("ns", -9), ("us", -6), ("µs", -6), ("ms", -3), ("s", 0)];

fn number(text: &str, original: &str) -> Result<f64, String> {
    let v: f64 = text
        .parse()
        .map_err(|_| format!("`{original}` is not a number followed by a unit"))?;
    if !v.is_finite() {
        return Err(format!("`{original}` is not finite"));
    }
    Ok(v)
}

/// `v·10^exp`, dividing for negative exponents so `5uW` is exactly `5e-6`.
fn scaled(v: f64, exp: i32) -> f64 {
    if exp >= 0 {
        v * 10f64.powi(exp)
    } else {
        v / 10f64.powi(-exp)
    }
}

fn with_table(s: &str, table: &[(&str, i32)], what: &str) -> Result<f64, String> {
    let units: Vec<&str> = table.iter().map(|u| u.0).collect();
    for &(suffix, exp) in table {
        if let Some(head) = s.strip_suffix(suffix) {
            if head.is_empty() || head.ends_with(|c: char| c.is_alphabetic() && c != 'e' && c != 'E') {
                continue;
            }
            return Ok(scaled(number(head, s)?, exp));
        }
    }
    Err(format!("`{s}`: {what} needs one of the units {}", units.join(", ")))
}

/// Frequency in Hz.
pub fn frequency(s: &str) -> Result<f64, String> {
    with_table(s, FREQUENCY, "frequency")
}

/// Angular rate in rad/s from a frequency (×2π) or an explicit `rad/s` value.
pub fn angular(s: &str) -> Result<f64, String> {
    if let Some(head) = s.strip_suffix("rad/s") {
        return number(head, s);
    }
    Ok(TAU * with_table(s, FREQUENCY, "angular rate (or rad/s)")?)
}

/// Field in V/m.
pub fn field(s: &str) -> Result<f64, String> {
    with_table(s, FIELD, "field")
}

/// Optical or RF power in W; `dBm` is converted.
pub fn power(s: &str) -> Result<f64, String> {
    if let Some(head) = s.strip_suffix("dBm") {
        return Ok(1e-3 * 10f64.powf(number(head, s)? / 10.0));
    }
    with_table(s, POWER, "power (or dBm)")
}

/// Power in W from W-family units only.
pub fn power_linear(s: &str) -> Result<f64, String> {
    with_table(s, POWER, "linear power")
}

/// Power in dBm; W-family values are converted.
pub fn dbm(s: &str) -> Result<f64, String> {
    if let Some(head) = s.strip_suffix("dBm") {
        return number(head, s);
    }
    let w = with_table(s, POWER, "power (dBm or W)")?;
    if !(w > 0.0) {
        return Err(format!("`{s}`: power must be > 0 to express in dBm"));
    }
    Ok(10.0 * (w / 1e-3).log10())
}

/// Time in s.
pub fn time(s: &str) -> Result<f64, String> {
    with_table(s, TIME, "time")
}

/// Bare number for dimensionless or explicitly documented quantities.
pub fn plain(s: &str) -> Result<f64, String> {
    number(s, s)
}

pub type ValueParser = fn(&str) -> Result<f64, String>;

/// `START:STOP:N` or `START:STOP:N:log`.
#[derive(Debug, Clone, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
    pub log: bool,
}

impl Range {
    pub fn parse(s: &str, value: ValueParser) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let log = match parts.get(3) {
            None => false,
            Some(&"log") => true,
            Some(&"lin") => false,
            Some(other) => return Err(format!("`{s}`: unknown spacing `{other}` (expected lin or log)")),
        };
        if !(parts.len() == 3 || parts.len() == 4) {
            return Err(format!("`{s}`: expected START:STOP:N[:log]"));
        }
        let start = value(parts[0])?;
        let stop = value(parts[1])?;
        let n: usize = parts[2]
            .parse()
            .map_err(|_| format!("`{s}`: point count `{}` is not a positive integer", parts[2]))?;
        if n == 0 {
            return Err(format!("`{s}`: point count must be >= 1"));
        }
        if log && !(start > 0.0 && stop > 0.0) {
            return Err(format!("`{s}`: log spacing needs positive end points"));
        }
        Ok(Range { start, stop, n, log })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.log {
            logspace(self.start, self.stop, self.n)
        } else {
            linspace(self.start, self.stop, self.n)
        }
    }
}

/// `TARGET:START:STOP:N[:log]` with the unit family chosen by the target.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub target: SweepTarget,
    pub range: Range,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self, String> {
        let (name, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("`{s}`: expected TARGET:START:STOP:N[:log]"))?;
        let target = SweepTarget::parse(name).map_err(|e| e.to_string())?;
        let value: ValueParser = match target {
            SweepTarget::Detuning(_) | SweepTarget::Rabi(_) => angular,
            SweepTarget::RfField => field,
            SweepTarget::ProbePower => power,
        };
        Ok(SweepAxis {
            target,
            range: Range::parse(rest, value)?,
        })
    }
}

/// `NAME=VALUE` with an angular-rate value.
pub fn named_angular(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("`{s}`: expected DRIVE=VALUE"))?;
    if name.is_empty() {
        return Err(format!("`{s}`: empty drive name"));
    }
    Ok((name.to_string(), angular(value)?))
}

/// `FILE@POWER` with the power in dBm.
pub fn trace_at_power(s: &str) -> Result<(String, f64), String> {
    let (path, p) = s
        .rsplit_once('@')
        .ok_or_else(|| format!("`{s}`: expected FILE@POWER"))?;
    if path.is_empty() {
        return Err(format!("`{s}`: empty file name"));
    }
    Ok((path.to_string(), dbm(p)?))
}
