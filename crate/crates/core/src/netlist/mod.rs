//! Circuit data model, SPICE-subset text format and comparator generators.
//!
//! Text format, one element or card per line (keywords case-insensitive):
//!
//! ```text
//! * comment
//! .title <free text>
//! Mxxx nd ng ns nb model W=<val> L=<val>
//! Rxxx n1 n2 <val>
//! Cxxx n1 n2 <val>
//! Vxxx n+ n- DC <val> | PULSE(v1 v2 td tr tf pw per) | PWL(t1 v1 t2 v2 ...)
//! .model <name> nmos|pmos (VT0=<v> KP=<v> LAMBDA=<v> CGSO=<v> CGDO=<v> COX=<v>)
//! .tran <tstep> <tstop>
//! .op
//! .end
//! ```
//!
//! Values accept the suffixes f, p, n, u, m, k and meg. Node `0` is ground.

mod parse;
mod print;
pub mod topology;
pub mod value;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devmodel::ModelCard;

pub use parse::{parse, parse_element};
pub use print::print;
pub use topology::{generate_topology, SizingOverride, TopologyId};

pub const GROUND: &str = "0";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetlistError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("device {device} references undefined model {model}")]
    UndefinedModel { device: String, model: String },
    #[error("duplicate device name {0}")]
    DuplicateDevice(String),
    #[error("netlist has devices but no ground node \"0\"")]
    MissingGround,
    #[error("device {device}: {message}")]
    InvalidDevice { device: String, message: String },
    #[error("model {model}: {message}")]
    InvalidModel { model: String, message: String },
    #[error("invalid analysis directive: {0}")]
    InvalidDirective(String),
    #[error("unknown topology {0}")]
    UnknownTopology(String),
    #[error("sizing override references nonexistent device {0}")]
    UnknownOverrideDevice(String),
}

/// Source waveform. Times in seconds, levels in volts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Waveform {
    Dc {
        volts: f64,
    },
    Pulse {
        v1: f64,
        v2: f64,
        delay_s: f64,
        rise_s: f64,
        fall_s: f64,
        width_s: f64,
        period_s: f64,
    },
    Pwl {
        points: Vec<(f64, f64)>,
    },
}

impl Waveform {
    /// Value at time `t`. PULSE repeats with its period after the delay;
    /// PWL holds its first/last level outside the knot span.
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            Waveform::Dc { volts } => *volts,
            Waveform::Pulse {
                v1,
                v2,
                delay_s,
                rise_s,
                fall_s,
                width_s,
                period_s,
            } => {
                if t < *delay_s {
                    return *v1;
                }
                let local = (t - delay_s) % period_s;
                if local < *rise_s {
                    v1 + (v2 - v1) * local / rise_s
                } else if local < rise_s + width_s {
                    *v2
                } else if local < rise_s + width_s + fall_s {
                    v2 + (v1 - v2) * (local - rise_s - width_s) / fall_s
                } else {
                    *v1
                }
            }
            Waveform::Pwl { points } => {
                let first = points[0];
                if t <= first.0 {
                    return first.1;
                }
                for w in points.windows(2) {
                    let (t0, v0) = w[0];
                    let (t1, v1) = w[1];
                    if t <= t1 {
                        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
                    }
                }
                points[points.len() - 1].1
            }
        }
    }

    /// Corner times within `[0, tstop]`, sorted and deduplicated.
    pub fn breakpoints(&self, tstop: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            Waveform::Dc { .. } => {}
            Waveform::Pulse {
                delay_s,
                rise_s,
                fall_s,
                width_s,
                period_s,
                ..
            } => {
                let mut k = 0u64;
                loop {
                    let base = delay_s + k as f64 * period_s;
                    if base > tstop {
                        break;
                    }
                    for t in [
                        base,
                        base + rise_s,
                        base + rise_s + width_s,
                        base + rise_s + width_s + fall_s,
                    ] {
                        if t <= tstop {
                            out.push(t);
                        }
                    }
                    k += 1;
                }
            }
            Waveform::Pwl { points } => {
                out.extend(points.iter().map(|p| p.0).filter(|t| *t <= tstop));
            }
        }
        out.retain(|t| *t >= 0.0);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        match self {
            Waveform::Dc { volts } if !volts.is_finite() => Err("non-finite DC level".into()),
            Waveform::Dc { .. } => Ok(()),
            Waveform::Pulse {
                delay_s,
                rise_s,
                fall_s,
                width_s,
                period_s,
                ..
            } => {
                if *rise_s <= 0.0 || *fall_s <= 0.0 {
                    Err("PULSE rise and fall times must be > 0".into())
                } else if *delay_s < 0.0 || *width_s < 0.0 {
                    Err("PULSE delay and width must be >= 0".into())
                } else if *period_s < rise_s + width_s + fall_s {
                    Err("PULSE period shorter than rise + width + fall".into())
                } else {
                    Ok(())
                }
            }
            Waveform::Pwl { points } => {
                if points.is_empty() {
                    return Err("PWL needs at least one point".into());
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err("PWL times must be strictly increasing".into());
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Device {
    Mosfet {
        name: String,
        drain: String,
        gate: String,
        source: String,
        bulk: String,
        model: String,
        width_m: f64,
        length_m: f64,
    },
    Resistor {
        name: String,
        n1: String,
        n2: String,
        ohms: f64,
    },
    Capacitor {
        name: String,
        n1: String,
        n2: String,
        farads: f64,
    },
    VSource {
        name: String,
        pos: String,
        neg: String,
        waveform: Waveform,
    },
}

impl Device {
    pub fn name(&self) -> &str {
        match self {
            Device::Mosfet { name, .. }
            | Device::Resistor { name, .. }
            | Device::Capacitor { name, .. }
            | Device::VSource { name, .. } => name,
        }
    }

    pub fn nodes(&self) -> Vec<&str> {
        match self {
            Device::Mosfet {
                drain,
                gate,
                source,
                bulk,
                ..
            } => vec![drain, gate, source, bulk],
            Device::Resistor { n1, n2, .. } | Device::Capacitor { n1, n2, .. } => vec![n1, n2],
            Device::VSource { pos, neg, .. } => vec![pos, neg],
        }
    }

    fn kind_letter(&self) -> char {
        match self {
            Device::Mosfet { .. } => 'M',
            Device::Resistor { .. } => 'R',
            Device::Capacitor { .. } => 'C',
            Device::VSource { .. } => 'V',
        }
    }

    fn validate(&self) -> Result<(), NetlistError> {
        let fail = |message: String| NetlistError::InvalidDevice {
            device: self.name().to_string(),
            message,
        };
        let first = self.name().chars().next().map(|c| c.to_ascii_uppercase());
        if first != Some(self.kind_letter()) {
            return Err(fail(format!("name must start with {}", self.kind_letter())));
        }
        let positive = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(fail(format!("{what} must be strictly positive, got {v}")))
            }
        };
        match self {
            Device::Mosfet {
                width_m, length_m, ..
            } => {
                positive("W", *width_m)?;
                positive("L", *length_m)
            }
            Device::Resistor { ohms, .. } => positive("resistance", *ohms),
            Device::Capacitor { farads, .. } => positive("capacitance", *farads),
            Device::VSource { waveform, .. } => waveform.validate().map_err(fail),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AnalysisDirective {
    Tran { tstop_s: f64, tstep_max_s: f64 },
    Op,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Netlist {
    pub title: String,
    pub devices: Vec<Device>,
    pub models: BTreeMap<String, ModelCard>,
    pub directives: Vec<AnalysisDirective>,
}

impl Netlist {
    pub fn new(title: impl Into<String>) -> Self {
        Netlist {
            title: title.into(),
            ..Default::default()
        }
    }

    pub fn device(&self, name: &str) -> Option<&Device> {
        self.devices
            .iter()
            .find(|d| d.name().eq_ignore_ascii_case(name))
    }

    pub fn device_mut(&mut self, name: &str) -> Option<&mut Device> {
        self.devices
            .iter_mut()
            .find(|d| d.name().eq_ignore_ascii_case(name))
    }

    pub fn mosfet_count(&self) -> usize {
        self.devices
            .iter()
            .filter(|d| matches!(d, Device::Mosfet { .. }))
            .count()
    }

    /// Node names in first-appearance order, ground first.
    pub fn nodes(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = vec![GROUND.to_string()];
        seen.insert(GROUND.to_string());
        for d in &self.devices {
            for n in d.nodes() {
                if seen.insert(n.to_string()) {
                    out.push(n.to_string());
                }
            }
        }
        out
    }

    pub fn tran(&self) -> Option<(f64, f64)> {
        self.directives.iter().find_map(|d| match d {
            AnalysisDirective::Tran {
                tstop_s,
                tstep_max_s,
            } => Some((*tstop_s, *tstep_max_s)),
            AnalysisDirective::Op => None,
        })
    }

    /// Replaces any existing `.tran` directive.
    pub fn set_tran(&mut self, tstop_s: f64, tstep_max_s: f64) {
        self.directives
            .retain(|d| !matches!(d, AnalysisDirective::Tran { .. }));
        self.directives.push(AnalysisDirective::Tran {
            tstop_s,
            tstep_max_s,
        });
    }

    /// True if some resistor has `node` as one terminal.
    pub fn has_resistor_on(&self, node: &str) -> bool {
        self.devices.iter().any(|d| match d {
            Device::Resistor { n1, n2, .. } => n1 == node || n2 == node,
            _ => false,
        })
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<(), NetlistError> {
        let mut names = HashSet::new();
        for d in &self.devices {
            if !names.insert(d.name().to_ascii_uppercase()) {
                return Err(NetlistError::DuplicateDevice(d.name().to_string()));
            }
            d.validate()?;
            if let Device::Mosfet { name, model, .. } = d {
                if !self.models.contains_key(model) {
                    return Err(NetlistError::UndefinedModel {
                        device: name.clone(),
                        model: model.clone(),
                    });
                }
            }
        }
        if !self.devices.is_empty() && !self.devices.iter().any(|d| d.nodes().contains(&GROUND)) {
            return Err(NetlistError::MissingGround);
        }
        for (name, m) in &self.models {
            m.validate().map_err(|e| NetlistError::InvalidModel {
                model: name.clone(),
                message: e.to_string(),
            })?;
        }
        for d in &self.directives {
            if let AnalysisDirective::Tran {
                tstop_s,
                tstep_max_s,
            } = d
            {
                if !(*tstop_s > 0.0 && *tstep_max_s > 0.0 && tstep_max_s < tstop_s) {
                    return Err(NetlistError::InvalidDirective(format!(
                        ".tran needs 0 < tstep < tstop (tstep={tstep_max_s}, tstop={tstop_s})"
                    )));
                }
            }
        }
        Ok(())
    }
}
