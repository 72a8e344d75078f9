//! Atomic level structure, drives and beam geometry of a ladder excitation
//! scheme, plus conversions from laboratory beam parameters to Rabi rates.
//!
//! Conventions used throughout the crate:
//!
//! * all rates and Rabi frequencies are angular (rad/s);
//! * a drive's detuning is `Δ = ω_laser − ω_transition`;
//! * a level's population decay branches always point to a level listed
//!   earlier in the scheme; upward or sideways incoherent pumping goes in
//!   `transfers` instead.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::constants::{EPSILON_0, HBAR, SPEED_OF_LIGHT, TWO_PI};
use crate::error::{Error, Result};
use crate::lindblad::IncoherentTransfer;

const BRANCH_SUM_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayBranch {
    pub target: usize,
    /// Population decay rate into `target`, s⁻¹.
    pub rate: f64,
    /// Optional channel tag (e.g. `"510nm"`) used to select fluorescence branches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    pub label: String,
    #[serde(default)]
    pub decays: Vec<DecayBranch>,
    /// Declared total population decay rate; when present it must equal the
    /// sum of the branch rates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_decay: Option<f64>,
    /// Pure dephasing added to every coherence involving this level, rad/s.
    #[serde(default)]
    pub extra_dephasing: f64,
}

impl Level {
    pub fn new(label: impl Into<String>) -> Self {
        Level {
            label: label.into(),
            decays: Vec::new(),
            total_decay: None,
            extra_dephasing: 0.0,
        }
    }

    pub fn with_decay(mut self, target: usize, rate: f64) -> Self {
        self.decays.push(DecayBranch {
            target,
            rate,
            label: None,
        });
        self
    }

    pub fn with_labeled_decay(mut self, target: usize, rate: f64, label: &str) -> Self {
        self.decays.push(DecayBranch {
            target,
            rate,
            label: Some(label.to_string()),
        });
        self
    }

    pub fn with_dephasing(mut self, rate: f64) -> Self {
        self.extra_dephasing = rate;
        self
    }

    pub fn branch_sum(&self) -> f64 {
        self.decays.iter().map(|b| b.rate).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriveRole {
    Probe,
    Optical,
    Rf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Drive {
    /// Unique name; sweep parameters address drives by it (`coupling-detuning`).
    pub name: String,
    pub role: DriveRole,
    pub lower: usize,
    pub upper: usize,
    /// Ω, rad/s.
    pub rabi: f64,
    /// Δ = ω_laser − ω_transition, rad/s.
    #[serde(default)]
    pub detuning: f64,
    /// Vacuum wavelength in m; 0 for drives treated as Doppler-free.
    #[serde(default)]
    pub wavelength: f64,
    /// Beam direction along the cell axis: −1, 0 (Doppler-free) or +1.
    #[serde(default)]
    pub propagation_sign: i8,
    /// Transition dipole moment, C·m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dipole_moment: Option<f64>,
    /// 1/e² intensity radius, m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waist_radius: Option<f64>,
}

impl Drive {
    /// Signed wavevector projection on the cell axis, rad/m.
    pub fn signed_wavevector(&self) -> f64 {
        if self.propagation_sign == 0 || self.wavelength <= 0.0 {
            0.0
        } else {
            f64::from(self.propagation_sign) * TWO_PI / self.wavelength
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellParams {
    /// kg
    pub atom_mass: f64,
    /// K
    pub temperature: f64,
    /// m⁻³
    pub number_density: f64,
    /// m
    pub length: f64,
    /// Radius of the interrogated cylinder, m.
    pub beam_radius: f64,
    /// Uniform population loss from every excited level to level 0, s⁻¹.
    #[serde(default)]
    pub transit_rate: f64,
}

impl CellParams {
    /// Atoms inside the interrogated cylinder (density × π r² × length).
    pub fn interrogated_atoms(&self) -> f64 {
        self.number_density * std::f64::consts::PI * self.beam_radius.powi(2) * self.length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderScheme {
    pub cell: CellParams,
    pub levels: Vec<Level>,
    pub drives: Vec<Drive>,
    #[serde(default)]
    pub transfers: Vec<IncoherentTransfer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamParams {
    /// W
    pub power: f64,
    /// 1/e² radius, m.
    pub waist_radius: f64,
    /// C·m
    pub dipole_moment: f64,
}

/// Peak Rabi rate of a Gaussian beam, Ω = d·E₀/ħ with E₀ = √(4P / (π w² c ε₀)).
pub fn rabi_from_power(beam: &BeamParams) -> Result<f64> {
    let BeamParams {
        power,
        waist_radius,
        dipole_moment,
    } = *beam;
    for (name, v) in [
        ("power", power),
        ("waist_radius", waist_radius),
        ("dipole_moment", dipole_moment),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::validation(format!(
                "beam {name} must be strictly positive, got {v}"
            )));
        }
    }
    Ok(dipole_moment * peak_field(power, waist_radius) / HBAR)
}

/// Inverse of [`rabi_from_power`]: optical power giving `rabi` for the beam
/// geometry and dipole moment in `beam` (its `power` field is ignored).
pub fn power_from_rabi(rabi: f64, beam: &BeamParams) -> f64 {
    let field = rabi * HBAR / beam.dipole_moment;
    field * field * std::f64::consts::PI * beam.waist_radius.powi(2) * SPEED_OF_LIGHT * EPSILON_0
        / 4.0
}

fn peak_field(power: f64, waist: f64) -> f64 {
    (4.0 * power / (std::f64::consts::PI * waist * waist * SPEED_OF_LIGHT * EPSILON_0)).sqrt()
}

/// Parses and validates a scheme from TOML text.
pub fn load_scheme(text: &str) -> Result<LadderScheme> {
    let scheme: LadderScheme = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    scheme.validate()?;
    Ok(scheme)
}

fn toml_error(text: &str, err: &toml::de::Error) -> Error {
    let line = err
        .span()
        .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    let message = err.message().to_string();
    // serde reports field names in backticks: "missing field `rabi`"
    let field = message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "<document>".to_string());
    Error::Parse {
        line,
        field,
        message,
    }
}

const DEFAULT_SCHEME_TOML: &str = include_str!("../schemes/cs5.toml");

impl LadderScheme {
    /// Five-level 133Cs ladder 6S₁/₂ → 6P₁/₂ → 9S₁/₂ → 35P₃/₂ → 34D₅/₂.
    pub fn cesium_default() -> Self {
        load_scheme(DEFAULT_SCHEME_TOML).expect("bundled scheme is valid")
    }

    pub fn default_toml() -> &'static str {
        DEFAULT_SCHEME_TOML
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scheme serializes")
    }

    pub fn probe_index(&self) -> usize {
        self.drives
            .iter()
            .position(|d| d.role == DriveRole::Probe)
            .expect("validated scheme has a probe")
    }

    pub fn probe(&self) -> &Drive {
        &self.drives[self.probe_index()]
    }

    pub fn rf_index(&self) -> Option<usize> {
        self.drives.iter().position(|d| d.role == DriveRole::Rf)
    }

    pub fn drive_index(&self, name: &str) -> Option<usize> {
        self.drives.iter().position(|d| d.name == name)
    }

    pub fn level_index(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.label == label)
    }

    /// Rabi rate the RF drive produces for a field amplitude in V/m.
    pub fn rf_rabi_for_field(&self, field: f64) -> Result<f64> {
        let rf = self
            .rf_index()
            .ok_or_else(|| Error::validation("scheme has no RF drive"))?;
        let d = self.drives[rf]
            .dipole_moment
            .ok_or_else(|| Error::validation("RF drive has no dipole_moment"))?;
        Ok(d * field / HBAR)
    }

    /// Sets the RF drive's Rabi rate from a field amplitude in V/m.
    pub fn set_rf_field(&mut self, field: f64) -> Result<()> {
        let rabi = self.rf_rabi_for_field(field)?;
        let rf = self.rf_index().expect("checked above");
        self.drives[rf].rabi = rabi;
        Ok(())
    }

    /// Beam parameters of a drive at the given power, if its geometry is configured.
    pub fn beam_for(&self, drive: usize, power: f64) -> Result<BeamParams> {
        let d = &self.drives[drive];
        match (d.dipole_moment, d.waist_radius) {
            (Some(dipole_moment), Some(waist_radius)) => Ok(BeamParams {
                power,
                waist_radius,
                dipole_moment,
            }),
            _ => Err(Error::validation(format!(
                "drive `{}` needs dipole_moment and waist_radius for power conversion",
                d.name
            ))),
        }
    }

    /// Sets the probe Rabi rate from an optical power in W.
    pub fn set_probe_power(&mut self, power: f64) -> Result<()> {
        let idx = self.probe_index();
        let beam = self.beam_for(idx, power)?;
        self.drives[idx].rabi = rabi_from_power(&beam)?;
        Ok(())
    }

    /// Drives ordered so that each drive's lower level is reached before it.
    pub(crate) fn drive_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.drives.len());
        let mut queue = VecDeque::from([0usize]);
        while let Some(level) = queue.pop_front() {
            for (i, d) in self.drives.iter().enumerate() {
                if d.lower == level {
                    order.push(i);
                    queue.push_back(d.upper);
                }
            }
        }
        order
    }

    /// Sum of drive detunings along the chain from level 0 to each level.
    pub fn cumulative_detunings(&self) -> Vec<f64> {
        let mut cum = vec![0.0; self.dim()];
        for i in self.drive_order() {
            let d = &self.drives[i];
            cum[d.upper] = cum[d.lower] + d.detuning;
        }
        cum
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.levels.len();
        if n < 2 {
            return Err(Error::validation("scheme needs at least two levels"));
        }
        let c = &self.cell;
        if !(c.temperature > 0.0) {
            return Err(Error::validation("cell.temperature must be > 0"));
        }
        if !(c.number_density >= 0.0) {
            return Err(Error::validation("cell.number_density must be >= 0"));
        }
        for (name, v) in [
            ("atom_mass", c.atom_mass),
            ("length", c.length),
            ("beam_radius", c.beam_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("cell.{name} must be > 0")));
            }
        }
        if !(c.transit_rate >= 0.0) {
            return Err(Error::validation("cell.transit_rate must be >= 0"));
        }

        for (i, level) in self.levels.iter().enumerate() {
            if !(level.extra_dephasing >= 0.0) {
                return Err(Error::validation(format!(
                    "level {i} ({}): extra_dephasing must be >= 0",
                    level.label
                )));
            }
            for b in &level.decays {
                if b.target >= n {
                    return Err(Error::validation(format!(
                        "level {i} ({}): decay target {} does not exist",
                        level.label, b.target
                    )));
                }
                if b.target >= i {
                    return Err(Error::validation(format!(
                        "level {i} ({}): decay target {} is not lower in the chain; \
                         use an incoherent transfer instead",
                        level.label, b.target
                    )));
                }
                if !(b.rate >= 0.0 && b.rate.is_finite()) {
                    return Err(Error::validation(format!(
                        "level {i} ({}): decay rate must be >= 0",
                        level.label
                    )));
                }
            }
            if let Some(total) = level.total_decay {
                let sum = level.branch_sum();
                if (sum - total).abs() > BRANCH_SUM_RTOL * total.abs().max(sum.abs()) {
                    return Err(Error::validation(format!(
                        "level {i} ({}): branch rates sum to {sum} but total_decay is {total}",
                        level.label
                    )));
                }
            }
        }

        let mut names = HashSet::new();
        let mut probes = 0;
        let mut rfs = 0;
        let mut upper_seen = vec![false; n];
        for d in &self.drives {
            if !names.insert(d.name.as_str()) {
                return Err(Error::validation(format!("duplicate drive name `{}`", d.name)));
            }
            if d.lower >= n || d.upper >= n {
                return Err(Error::validation(format!(
                    "drive `{}` references missing level ({} -> {}, scheme has {n})",
                    d.name, d.lower, d.upper
                )));
            }
            if d.lower == d.upper {
                return Err(Error::validation(format!(
                    "drive `{}` couples a level to itself",
                    d.name
                )));
            }
            if d.upper == 0 {
                return Err(Error::validation(format!(
                    "drive `{}` targets the ground level",
                    d.name
                )));
            }
            if upper_seen[d.upper] {
                return Err(Error::validation(format!(
                    "level {} is the upper level of more than one drive",
                    d.upper
                )));
            }
            upper_seen[d.upper] = true;
            if !(d.rabi >= 0.0 && d.rabi.is_finite()) {
                return Err(Error::validation(format!("drive `{}`: rabi must be >= 0", d.name)));
            }
            if !d.detuning.is_finite() {
                return Err(Error::validation(format!("drive `{}`: detuning must be finite", d.name)));
            }
            if !matches!(d.propagation_sign, -1..=1) {
                return Err(Error::validation(format!(
                    "drive `{}`: propagation_sign must be -1, 0 or +1",
                    d.name
                )));
            }
            if d.propagation_sign != 0 && !(d.wavelength > 0.0) {
                return Err(Error::validation(format!(
                    "drive `{}`: wavelength must be > 0 when propagation_sign is nonzero",
                    d.name
                )));
            }
            for (field, v) in [("dipole_moment", d.dipole_moment), ("waist_radius", d.waist_radius)] {
                if let Some(v) = v {
                    if !(v > 0.0) {
                        return Err(Error::validation(format!(
                            "drive `{}`: {field} must be > 0",
                            d.name
                        )));
                    }
                }
            }
            match d.role {
                DriveRole::Probe => probes += 1,
                DriveRole::Rf => rfs += 1,
                DriveRole::Optical => {}
            }
        }
        if probes != 1 {
            return Err(Error::validation(format!(
                "exactly one drive must have role `probe`, found {probes}"
            )));
        }
        if rfs > 1 {
            return Err(Error::validation("at most one drive may have role `rf`"));
        }

        let order = self.drive_order();
        let reached: HashSet<usize> = std::iter::once(0)
            .chain(order.iter().map(|&i| self.drives[i].upper))
            .collect();
        if order.len() != self.drives.len() || reached.len() != n {
            let missing: Vec<_> = (0..n).filter(|i| !reached.contains(i)).collect();
            return Err(Error::validation(format!(
                "drives do not form a connected chain from level 0 (unreached levels: {missing:?})"
            )));
        }

        for t in &self.transfers {
            if t.source >= n || t.target >= n || t.source == t.target {
                return Err(Error::validation(format!(
                    "incoherent transfer {} -> {} references an invalid level pair",
                    t.source, t.target
                )));
            }
            if !(t.rate >= 0.0 && t.rate.is_finite()) {
                return Err(Error::validation("incoherent transfer rate must be >= 0"));
            }
        }
        Ok(())
    }
}

/// Cumulative signed wavevector k₁s₁ + k₂s₂ + … along the chain, indexed by
/// level (entry 0 is the ground level and always 0). An atom moving at `v`
/// along the axis sees level `j` shifted by `−k_res[j]·v` in the rotating frame.
pub fn residual_wavevector(scheme: &LadderScheme) -> Vec<f64> {
    let mut k = vec![0.0; scheme.dim()];
    for i in scheme.drive_order() {
        let d = &scheme.drives[i];
        k[d.upper] = k[d.lower] + d.signed_wavevector();
    }
    k
}
