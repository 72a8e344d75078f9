//! Delimited-text readers for measured spectra, time traces and SNR tables.
//!
//! File layout: optional `# key=value` metadata lines (other `#` lines are
//! comments), one header row, then numeric rows. Fields are separated by
//! commas, or by tabs when the header contains a tab. Numbers use a decimal
//! point regardless of locale.
//!
//! The canonical form written by [`write_canonical`] is UTF-8 with LF line
//! endings: metadata lines sorted by key, a comma-separated header row and
//! one row per sample with every float in shortest round-trip decimal form
//! (an exponent is used below 1e-5 and from 1e16 upward).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::calibrate::{sensitivity_from_snr, CalibrationFit, CellFailure, SensitivityMap};
use crate::dynamics::TimeTrace;
use crate::error::{Error, Result};
use crate::observables::{format_float, SpectrumTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTrace {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// 1-based line number of each row in the source text.
    #[serde(skip)]
    pub lines: Vec<usize>,
    pub metadata: BTreeMap<String, String>,
}

impl RawTrace {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| Error::Parse {
            line: 0,
            field: name.to_string(),
            message: format!("missing column `{name}` (have: {})", self.columns.join(", ")),
        })
    }

    fn values(&self, col: usize, scale: f64) -> Vec<f64> {
        self.rows.iter().map(|r| r[col] * scale).collect()
    }
}

/// Reads the generic delimited layout.
pub fn parse_raw(text: &str) -> Result<RawTrace> {
    let mut metadata = BTreeMap::new();
    let mut columns: Option<(Vec<String>, char)> = None;
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if columns.is_none() {
                if let Some((k, v)) = rest.split_once('=') {
                    let key = k.trim();
                    if !key.is_empty() && !key.contains(char::is_whitespace) {
                        metadata.insert(key.to_string(), v.trim().to_string());
                    }
                }
            }
            continue;
        }
        match &columns {
            None => {
                let delim = if trimmed.contains('\t') { '\t' } else { ',' };
                let names: Vec<String> = trimmed.split(delim).map(|s| s.trim().to_string()).collect();
                if let Some(dup) = names.iter().enumerate().find(|(k, n)| names[..*k].contains(n)) {
                    return Err(Error::Parse {
                        line: lineno,
                        field: dup.1.clone(),
                        message: "duplicate column name in header".into(),
                    });
                }
                if names.iter().any(String::is_empty) {
                    return Err(Error::Parse {
                        line: lineno,
                        field: "header".into(),
                        message: "empty column name".into(),
                    });
                }
                columns = Some((names, delim));
            }
            Some((names, delim)) => {
                let fields: Vec<&str> = trimmed.split(*delim).map(str::trim).collect();
                if fields.len() != names.len() {
                    return Err(Error::Parse {
                        line: lineno,
                        field: "row".into(),
                        message: format!(
                            "expected {} fields, found {}: `{trimmed}`",
                            names.len(),
                            fields.len()
                        ),
                    });
                }
                let mut row = Vec::with_capacity(fields.len());
                for (name, f) in names.iter().zip(&fields) {
                    match f.parse::<f64>() {
                        Ok(v) if v.is_finite() => row.push(v),
                        _ => {
                            return Err(Error::Parse {
                                line: lineno,
                                field: name.clone(),
                                message: format!("`{f}` is not a finite number in row `{trimmed}`"),
                            })
                        }
                    }
                }
                rows.push(row);
                lines.push(lineno);
            }
        }
    }
    let (columns, _) = columns.ok_or_else(|| Error::Parse {
        line: 0,
        field: "header".into(),
        message: "no header row".into(),
    })?;
    Ok(RawTrace {
        columns,
        rows,
        lines,
        metadata,
    })
}

/// Canonical serialization; [`parse_raw`] reads it back exactly.
pub fn write_canonical(raw: &RawTrace) -> String {
    let mut out = String::new();
    for (k, v) in &raw.metadata {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out.push_str(&raw.columns.join(","));
    out.push('\n');
    for row in &raw.rows {
        let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Spectrum,
    Time,
}

/// Which columns hold the axis and the signal, and how to scale them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub kind: TraceKind,
    pub axis: String,
    pub value: String,
    /// Multiplies the axis column, e.g. 2π·1e6 for a column in MHz to rad/s.
    #[serde(default = "one")]
    pub axis_scale: f64,
    #[serde(default = "one")]
    pub value_scale: f64,
    #[serde(default)]
    pub units: Option<String>,
}

fn one() -> f64 {
    1.0
}

impl ColumnMapping {
    pub fn new(kind: TraceKind, axis: &str, value: &str) -> Self {
        ColumnMapping {
            kind,
            axis: axis.into(),
            value: value.into(),
            axis_scale: 1.0,
            value_scale: 1.0,
            units: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ParsedTrace {
    Spectrum(SpectrumTrace),
    Time(TimeTrace),
}

impl ParsedTrace {
    pub fn into_spectrum(self) -> Result<SpectrumTrace> {
        match self {
            ParsedTrace::Spectrum(s) => Ok(s),
            ParsedTrace::Time(_) => Err(Error::validation("expected a spectrum, got a time trace")),
        }
    }

    pub fn into_time(self) -> Result<TimeTrace> {
        match self {
            ParsedTrace::Time(t) => Ok(t),
            ParsedTrace::Spectrum(_) => Err(Error::validation("expected a time trace, got a spectrum")),
        }
    }

    /// Two-column canonical table of the trace.
    pub fn to_raw(&self, metadata: BTreeMap<String, String>) -> RawTrace {
        let (columns, x, y) = match self {
            ParsedTrace::Spectrum(s) => (
                vec![s.axis_name.clone(), format!("value[{}]", s.units)],
                &s.axis,
                &s.values,
            ),
            ParsedTrace::Time(t) => (vec!["time".to_string(), "value".to_string()], &t.times, &t.values),
        };
        RawTrace {
            columns,
            rows: x.iter().zip(y).map(|(&a, &b)| vec![a, b]).collect(),
            lines: Vec::new(),
            metadata,
        }
    }
}

fn check_axis(raw: &RawTrace, axis: &[f64], kind: TraceKind) -> Result<()> {
    if axis.len() < 2 {
        return Ok(());
    }
    let increasing = kind == TraceKind::Time || axis[1] > axis[0];
    for (k, w) in axis.windows(2).enumerate() {
        let ok = if increasing { w[1] > w[0] } else { w[1] < w[0] };
        if !ok {
            let row = k + 1;
            return Err(Error::Parse {
                line: raw.lines.get(row).copied().unwrap_or(0),
                field: "axis".into(),
                message: format!(
                    "axis is not strictly {} at data row {row}",
                    if increasing { "increasing" } else { "decreasing" }
                ),
            });
        }
    }
    Ok(())
}

/// Builds a validated trace from the mapped columns of a delimited file.
pub fn parse_trace(text: &str, mapping: &ColumnMapping) -> Result<ParsedTrace> {
    let raw = parse_raw(text)?;
    trace_from_raw(&raw, mapping)
}

pub fn trace_from_raw(raw: &RawTrace, mapping: &ColumnMapping) -> Result<ParsedTrace> {
    let (ax, val) = (raw.column(&mapping.axis)?, raw.column(&mapping.value)?);
    let axis = raw.values(ax, mapping.axis_scale);
    let values = raw.values(val, mapping.value_scale);
    check_axis(raw, &axis, mapping.kind)?;
    Ok(match mapping.kind {
        TraceKind::Spectrum => ParsedTrace::Spectrum(SpectrumTrace::new(
            mapping.axis.clone(),
            axis,
            values,
            mapping.units.clone().unwrap_or_else(|| mapping.value.clone()),
        )?),
        TraceKind::Time => ParsedTrace::Time(TimeTrace::new(axis, values)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrRecord {
    /// W.
    pub probe_power: f64,
    /// V/m.
    pub lo_field: f64,
    /// dB.
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrColumns {
    pub probe_power: String,
    pub lo_field: String,
    pub snr: String,
    #[serde(default = "one")]
    pub probe_power_scale: f64,
    #[serde(default = "one")]
    pub lo_field_scale: f64,
}

impl Default for SnrColumns {
    fn default() -> Self {
        SnrColumns {
            probe_power: "probe_power".into(),
            lo_field: "lo_field".into(),
            snr: "snr_db".into(),
            probe_power_scale: 1.0,
            lo_field_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrTable {
    pub records: Vec<SnrRecord>,
    pub warnings: Vec<String>,
}

/// Reads (probe power, LO field, SNR) records. A repeated grid cell keeps
/// the last value and adds a warning.
pub fn parse_snr_table(text: &str, columns: &SnrColumns) -> Result<SnrTable> {
    let raw = parse_raw(text)?;
    let (p, e, s) = (
        raw.column(&columns.probe_power)?,
        raw.column(&columns.lo_field)?,
        raw.column(&columns.snr)?,
    );
    let mut records: Vec<SnrRecord> = Vec::new();
    let mut warnings = Vec::new();
    for (row, &line) in raw.rows.iter().zip(&raw.lines) {
        let rec = SnrRecord {
            probe_power: row[p] * columns.probe_power_scale,
            lo_field: row[e] * columns.lo_field_scale,
            snr_db: row[s],
        };
        if let Some(prev) = records
            .iter_mut()
            .find(|r| r.probe_power == rec.probe_power && r.lo_field == rec.lo_field)
        {
            let msg = format!(
                "line {line}: duplicate cell (probe_power={}, lo_field={}); keeping the later value",
                rec.probe_power, rec.lo_field
            );
            log::warn!("{msg}");
            warnings.push(msg);
            *prev = rec;
        } else {
            records.push(rec);
        }
    }
    Ok(SnrTable { records, warnings })
}

/// Sensitivity map from measured SNR records; grid axes are the sorted
/// distinct powers and fields, and absent cells are recorded as failures.
pub fn map_from_snr_records(
    records: &[SnrRecord],
    p_sig: f64,
    rbw: f64,
    fit: &CalibrationFit,
) -> Result<SensitivityMap> {
    if records.is_empty() {
        return Err(Error::validation("no SNR records"));
    }
    let mut powers: Vec<f64> = records.iter().map(|r| r.probe_power).collect();
    let mut fields: Vec<f64> = records.iter().map(|r| r.lo_field).collect();
    for v in [&mut powers, &mut fields] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let mut sensitivity = vec![vec![None; fields.len()]; powers.len()];
    for r in records {
        let i = powers.partition_point(|&p| p < r.probe_power);
        let j = fields.partition_point(|&f| f < r.lo_field);
        sensitivity[i][j] = Some(sensitivity_from_snr(p_sig, r.snr_db, rbw, fit)?);
    }
    let mut failures = Vec::new();
    for (i, row) in sensitivity.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if v.is_none() {
                failures.push(CellFailure {
                    row: i,
                    col: j,
                    reason: "no measurement for this cell".into(),
                });
            }
        }
    }
    Ok(SensitivityMap {
        probe_powers: powers,
        lo_fields: fields,
        sensitivity,
        failures,
    })
}
