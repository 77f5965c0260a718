//! Comparator topology generators.
//!
//! Every topology shares the same port names: `vdd`, `clk`, `vinp` (positive
//! input), `vinn` (reference input), `voutp`, `voutn`. The clocked tail
//! device always drains node `tail`. With `vinp > vinn` the comparator pulls
//! `voutn` to ground and leaves `voutp` at the supply. Connectivity of each
//! reconstruction is described in `docs/topologies.md`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Device, Netlist, NetlistError, Waveform};
use crate::devmodel::ModelCard;

pub const NMOS_MODEL: &str = "nch";
pub const PMOS_MODEL: &str = "pch";

pub const L_MIN: f64 = 180e-9;
pub const W_720N: f64 = 720e-9;
pub const W_1U13: f64 = 1.13e-6;
pub const W_240N: f64 = 240e-9;
pub const W_360N: f64 = 360e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TopologyId {
    /// Charge-sharing dynamic latch comparator (baseline).
    Csdlc,
    /// Modified StrongARM dynamic latch comparator (baseline).
    Msadlc,
    /// StrongARM latch with clocked cascodes above the input pair.
    Design1Cascode,
    /// StrongARM front end with a pseudo-NMOS latch.
    Design2PseudoNmos,
    /// Clocked cascodes plus pseudo-NMOS latch.
    Design3CascodePseudoNmos,
}

impl TopologyId {
    pub const ALL: [TopologyId; 5] = [
        TopologyId::Csdlc,
        TopologyId::Msadlc,
        TopologyId::Design1Cascode,
        TopologyId::Design2PseudoNmos,
        TopologyId::Design3CascodePseudoNmos,
    ];

    /// Short command-line name.
    pub fn key(self) -> &'static str {
        match self {
            TopologyId::Csdlc => "csdlc",
            TopologyId::Msadlc => "msadlc",
            TopologyId::Design1Cascode => "design1",
            TopologyId::Design2PseudoNmos => "design2",
            TopologyId::Design3CascodePseudoNmos => "design3",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TopologyId::Csdlc => "CSDLC",
            TopologyId::Msadlc => "MSADLC",
            TopologyId::Design1Cascode => "Design-1: MSADLC with Cascode",
            TopologyId::Design2PseudoNmos => "Design-2: MSADLC with Pseudo NMOS",
            TopologyId::Design3CascodePseudoNmos => "Design-3: MSADLC with Cascode and Pseudo-NMOS",
        }
    }
}

impl fmt::Display for TopologyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for TopologyId {
    type Err = NetlistError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = s.to_ascii_lowercase().replace(['-', '_'], "");
        Ok(match k.as_str() {
            "csdlc" => TopologyId::Csdlc,
            "msadlc" => TopologyId::Msadlc,
            "design1" | "design1cascode" | "d1" => TopologyId::Design1Cascode,
            "design2" | "design2pseudonmos" | "d2" => TopologyId::Design2PseudoNmos,
            "design3" | "design3cascodepseudonmos" | "d3" => TopologyId::Design3CascodePseudoNmos,
            _ => return Err(NetlistError::UnknownTopology(s.to_string())),
        })
    }
}

/// Replaces the width and/or length of one named transistor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizingOverride {
    pub device: String,
    pub width_m: Option<f64>,
    pub length_m: Option<f64>,
}

fn n(name: &str, d: &str, g: &str, s: &str, w: f64) -> Device {
    Device::Mosfet {
        name: name.into(),
        drain: d.into(),
        gate: g.into(),
        source: s.into(),
        bulk: "0".into(),
        model: NMOS_MODEL.into(),
        width_m: w,
        length_m: L_MIN,
    }
}

fn p(name: &str, d: &str, g: &str, s: &str, w: f64) -> Device {
    Device::Mosfet {
        name: name.into(),
        drain: d.into(),
        gate: g.into(),
        source: s.into(),
        bulk: "vdd".into(),
        model: PMOS_MODEL.into(),
        width_m: w,
        length_m: L_MIN,
    }
}

fn devices(id: TopologyId) -> Vec<Device> {
    match id {
        TopologyId::Csdlc => vec![
            n("M1", "x1", "vinp", "tail", W_720N),
            n("M2", "x2", "vinn", "tail", W_720N),
            n("M3", "voutn", "voutp", "x1", W_720N),
            n("M4", "voutp", "voutn", "x2", W_720N),
            p("M5", "voutn", "voutp", "vdd", W_1U13),
            p("M6", "voutp", "voutn", "vdd", W_1U13),
            n("M7", "tail", "clk", "0", W_720N),
            // Equalizer: shares charge between the outputs while clk is low.
            p("M8", "voutn", "clk", "voutp", W_1U13),
        ],
        TopologyId::Msadlc => vec![
            n("M1", "x1", "vinp", "tail", W_720N),
            n("M2", "x2", "vinn", "tail", W_720N),
            p("M3", "x1", "clk", "vdd", W_720N),
            p("M4", "x2", "clk", "vdd", W_720N),
            n("M5", "tail", "clk", "0", W_720N),
            p("M6", "voutn", "clk", "vdd", W_1U13),
            p("M7", "voutp", "clk", "vdd", W_1U13),
            p("M8", "voutn", "voutp", "vdd", W_1U13),
            n("M9", "voutn", "voutp", "x1", W_720N),
            n("M10", "voutp", "voutn", "x2", W_720N),
            p("M11", "voutp", "voutn", "vdd", W_1U13),
        ],
        TopologyId::Design1Cascode => vec![
            n("M1", "x1", "vinp", "tail", W_720N),
            n("M2", "x2", "vinn", "tail", W_720N),
            p("M3", "x3", "clk", "vdd", W_720N),
            p("M4", "x4", "clk", "vdd", W_720N),
            n("M5", "tail", "clk", "0", W_720N),
            p("M6", "voutn", "clk", "vdd", W_1U13),
            p("M7", "voutp", "clk", "vdd", W_1U13),
            p("M8", "voutn", "voutp", "vdd", W_1U13),
            n("M9", "voutn", "voutp", "x3", W_720N),
            n("M10", "voutp", "voutn", "x4", W_720N),
            p("M11", "voutp", "voutn", "vdd", W_1U13),
            n("M12", "x3", "clk", "x1", W_720N),
            n("M13", "x4", "clk", "x2", W_720N),
        ],
        TopologyId::Design2PseudoNmos => vec![
            n("M1", "x1", "vinp", "tail", W_720N),
            n("M2", "x2", "vinn", "tail", W_720N),
            n("M3", "voutn", "vdd", "x1", W_720N),
            n("M4", "voutp", "vdd", "x2", W_720N),
            n("M5", "tail", "clk", "0", W_720N),
            p("M6", "voutn", "clk", "vdd", W_1U13),
            p("M7", "voutp", "clk", "vdd", W_1U13),
            n("M8", "voutn", "voutp", "tail", W_1U13),
            p("M9", "voutn", "0", "vdd", W_240N),
            p("M10", "voutp", "0", "vdd", W_240N),
            n("M11", "voutp", "voutn", "tail", W_1U13),
        ],
        TopologyId::Design3CascodePseudoNmos => vec![
            n("M1", "x1", "vinp", "tail", W_720N),
            n("M2", "x2", "vinn", "tail", W_720N),
            n("M3", "voutn", "vdd", "x3", W_720N),
            n("M4", "voutp", "vdd", "x4", W_720N),
            n("M5", "tail", "clk", "0", W_720N),
            p("M6", "voutn", "clk", "vdd", W_1U13),
            p("M7", "voutp", "clk", "vdd", W_1U13),
            n("M8", "voutn", "voutp", "tail", W_1U13),
            n("M9", "voutp", "voutn", "tail", W_1U13),
            p("M10", "voutn", "0", "vdd", W_360N),
            p("M11", "voutp", "0", "vdd", W_360N),
            n("M13", "x3", "vdd", "x1", W_720N),
            n("M14", "x4", "vdd", "x2", W_720N),
        ],
    }
}

/// Builds the bare comparator (no sources) with the default model cards.
pub fn generate_topology(
    id: TopologyId,
    overrides: &[SizingOverride],
) -> Result<Netlist, NetlistError> {
    let mut netlist = Netlist::new(format!("{} comparator", id.label()));
    netlist.devices = devices(id);
    netlist
        .models
        .insert(NMOS_MODEL.into(), ModelCard::default_nmos());
    netlist
        .models
        .insert(PMOS_MODEL.into(), ModelCard::default_pmos());
    for o in overrides {
        match netlist.device_mut(&o.device) {
            Some(Device::Mosfet {
                width_m, length_m, ..
            }) => {
                if let Some(w) = o.width_m {
                    *width_m = w;
                }
                if let Some(l) = o.length_m {
                    *length_m = l;
                }
            }
            _ => return Err(NetlistError::UnknownOverrideDevice(o.device.clone())),
        }
    }
    netlist.validate()?;
    Ok(netlist)
}

/// Stimulus levels for [`attach_sources`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceLevels {
    pub vdd: f64,
    pub vref: f64,
    pub vin: f64,
    pub f_clk: f64,
    pub clk_edge_s: f64,
}

impl Default for SourceLevels {
    fn default() -> Self {
        SourceLevels {
            vdd: 1.8,
            vref: 0.8,
            vin: 1.0,
            f_clk: 100e6,
            clk_edge_s: 50e-12,
        }
    }
}

/// Clock: low for the first half period, then high for the second. The
/// comparator starts in its reset phase.
pub fn clock_waveform(vdd: f64, f_clk: f64, edge_s: f64) -> Waveform {
    let period = 1.0 / f_clk;
    Waveform::Pulse {
        v1: 0.0,
        v2: vdd,
        delay_s: period / 2.0,
        rise_s: edge_s,
        fall_s: edge_s,
        width_s: period / 2.0 - edge_s,
        period_s: period,
    }
}

/// Adds supply, clock, reference and DC input sources plus a three-period
/// `.tran`.
pub fn attach_sources(netlist: &mut Netlist, levels: &SourceLevels) {
    let src = |name: &str, pos: &str, waveform: Waveform| Device::VSource {
        name: name.into(),
        pos: pos.into(),
        neg: "0".into(),
        waveform,
    };
    netlist
        .devices
        .push(src("VDD", "vdd", Waveform::Dc { volts: levels.vdd }));
    netlist.devices.push(src(
        "VCLK",
        "clk",
        clock_waveform(levels.vdd, levels.f_clk, levels.clk_edge_s),
    ));
    netlist
        .devices
        .push(src("VINP", "vinp", Waveform::Dc { volts: levels.vin }));
    netlist
        .devices
        .push(src("VREF", "vinn", Waveform::Dc { volts: levels.vref }));
    netlist.set_tran(3.0 / levels.f_clk, 10e-12);
}

/// [`generate_topology`] followed by [`attach_sources`] with default levels.
pub fn generate_with_testbench(
    id: TopologyId,
    overrides: &[SizingOverride],
) -> Result<Netlist, NetlistError> {
    let mut n = generate_topology(id, overrides)?;
    n.title = format!("{} testbench", id.label());
    attach_sources(&mut n, &SourceLevels::default());
    n.validate()?;
    Ok(n)
}
