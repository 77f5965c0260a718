use std::fmt::Write;

use super::value::format_value as fv;
use super::{AnalysisDirective, Device, Netlist, Waveform};

/// Canonical text form. `parse(&print(n))` reproduces `n` exactly.
pub fn print(netlist: &Netlist) -> String {
    let mut out = String::new();
    // Infallible: writing into a String.
    let _ = writeln!(out, ".title {}", netlist.title);
    for d in &netlist.devices {
        let _ = match d {
            Device::Mosfet {
                name,
                drain,
                gate,
                source,
                bulk,
                model,
                width_m,
                length_m,
            } => writeln!(
                out,
                "{name} {drain} {gate} {source} {bulk} {model} W={} L={}",
                fv(*width_m),
                fv(*length_m)
            ),
            Device::Resistor { name, n1, n2, ohms } => {
                writeln!(out, "{name} {n1} {n2} {}", fv(*ohms))
            }
            Device::Capacitor {
                name,
                n1,
                n2,
                farads,
            } => writeln!(out, "{name} {n1} {n2} {}", fv(*farads)),
            Device::VSource {
                name,
                pos,
                neg,
                waveform,
            } => writeln!(out, "{name} {pos} {neg} {}", waveform_text(waveform)),
        };
    }
    for (name, m) in &netlist.models {
        let _ = writeln!(
            out,
            ".model {name} {} (VT0={} KP={} LAMBDA={} CGSO={} CGDO={} COX={})",
            m.polarity.keyword(),
            fv(m.vt0),
            fv(m.kp),
            fv(m.lambda),
            fv(m.cgso),
            fv(m.cgdo),
            fv(m.cox)
        );
    }
    for d in &netlist.directives {
        let _ = match d {
            AnalysisDirective::Tran {
                tstop_s,
                tstep_max_s,
            } => writeln!(out, ".tran {} {}", fv(*tstep_max_s), fv(*tstop_s)),
            AnalysisDirective::Op => writeln!(out, ".op"),
        };
    }
    out.push_str(".end\n");
    out
}

fn waveform_text(w: &Waveform) -> String {
    match w {
        Waveform::Dc { volts } => format!("DC {}", fv(*volts)),
        Waveform::Pulse {
            v1,
            v2,
            delay_s,
            rise_s,
            fall_s,
            width_s,
            period_s,
        } => format!(
            "PULSE({} {} {} {} {} {} {})",
            fv(*v1),
            fv(*v2),
            fv(*delay_s),
            fv(*rise_s),
            fv(*fall_s),
            fv(*width_s),
            fv(*period_s)
        ),
        Waveform::Pwl { points } => {
            let body: Vec<String> = points
                .iter()
                .map(|(t, v)| format!("{} {}", fv(*t), fv(*v)))
                .collect();
            format!("PWL({})", body.join(" "))
        }
    }
}
