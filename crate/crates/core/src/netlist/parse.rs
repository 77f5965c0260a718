use std::collections::BTreeMap;

use super::value::parse_value;
use super::{AnalysisDirective, Device, Netlist, NetlistError, Waveform};
use crate::devmodel::{ModelCard, Polarity};

/// Parses netlist text. Blank lines and `*` comments are skipped; parsing
/// stops at `.end`.
pub fn parse(text: &str) -> Result<Netlist, NetlistError> {
    let mut netlist = Netlist::default();
    let mut models = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('*') {
            continue;
        }
        let syntax = |message: String| NetlistError::Syntax {
            line: line_no,
            message,
        };
        if line.starts_with('.') {
            let lower = line.to_ascii_lowercase();
            let keyword = lower.split_whitespace().next().unwrap_or("");
            match keyword {
                ".end" => break,
                ".title" => netlist.title = line[6..].trim().to_string(),
                ".op" => netlist.directives.push(AnalysisDirective::Op),
                ".tran" => {
                    let toks = tokens(line);
                    if toks.len() != 3 {
                        return Err(syntax(".tran expects <tstep> <tstop>".into()));
                    }
                    let tstep = value(&toks[1]).map_err(syntax)?;
                    let tstop = value(&toks[2]).map_err(syntax)?;
                    netlist.directives.push(AnalysisDirective::Tran {
                        tstop_s: tstop,
                        tstep_max_s: tstep,
                    });
                }
                ".model" => {
                    let (name, card) = parse_model(line).map_err(syntax)?;
                    models.insert(name, card);
                }
                other => return Err(syntax(format!("unsupported card {other}"))),
            }
            continue;
        }
        let device = parse_element(line).map_err(syntax)?;
        netlist.devices.push(device);
    }
    netlist.models = models;
    netlist.validate()?;
    Ok(netlist)
}

/// Splits on whitespace, treating parentheses and commas as separators and
/// gluing `KEY = value` into `KEY=value`.
fn tokens(line: &str) -> Vec<String> {
    let spaced: String = line
        .chars()
        .map(|c| if matches!(c, '(' | ')' | ',') { ' ' } else { c })
        .collect();
    let mut out: Vec<String> = Vec::new();
    let mut raw = spaced.split_whitespace().peekable();
    while let Some(tok) = raw.next() {
        if tok == "=" {
            if let (Some(prev), Some(next)) = (out.last_mut(), raw.next()) {
                prev.push('=');
                prev.push_str(next);
            }
        } else if let Some(stripped) = tok.strip_prefix('=') {
            if let Some(prev) = out.last_mut() {
                prev.push('=');
                prev.push_str(stripped);
            }
        } else if tok.ends_with('=') {
            let mut t = tok.to_string();
            if let Some(next) = raw.next() {
                t.push_str(next);
            }
            out.push(t);
        } else {
            out.push(tok.to_string());
        }
    }
    out
}

fn value(tok: &str) -> Result<f64, String> {
    parse_value(tok).ok_or_else(|| format!("invalid numeric value {tok:?}"))
}

/// Parses one element line (`M`, `R`, `C` or `V`).
pub fn parse_element(line: &str) -> Result<Device, String> {
    let toks = tokens(line);
    let name = toks.first().ok_or("empty element line")?.clone();
    let kind = name.chars().next().unwrap().to_ascii_uppercase();
    match kind {
        'M' => {
            if toks.len() != 8 {
                return Err(format!(
                    "MOSFET {name} expects `nd ng ns nb model W=<val> L=<val>`, got {} fields",
                    toks.len() - 1
                ));
            }
            let mut width = None;
            let mut length = None;
            for kv in &toks[6..] {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| format!("expected KEY=value, got {kv:?}"))?;
                match k.to_ascii_uppercase().as_str() {
                    "W" => width = Some(value(v)?),
                    "L" => length = Some(value(v)?),
                    other => return Err(format!("unknown MOSFET parameter {other}")),
                }
            }
            Ok(Device::Mosfet {
                name,
                drain: toks[1].clone(),
                gate: toks[2].clone(),
                source: toks[3].clone(),
                bulk: toks[4].clone(),
                model: toks[5].clone(),
                width_m: width.ok_or("missing W")?,
                length_m: length.ok_or("missing L")?,
            })
        }
        'R' | 'C' => {
            if toks.len() != 4 {
                return Err(format!("{name} expects `n1 n2 <value>`"));
            }
            let v = value(&toks[3])?;
            let (n1, n2) = (toks[1].clone(), toks[2].clone());
            Ok(if kind == 'R' {
                Device::Resistor {
                    name,
                    n1,
                    n2,
                    ohms: v,
                }
            } else {
                Device::Capacitor {
                    name,
                    n1,
                    n2,
                    farads: v,
                }
            })
        }
        'V' => {
            if toks.len() < 4 {
                return Err(format!("{name} expects `n+ n- <waveform>`"));
            }
            let waveform = parse_waveform(&toks[3..])?;
            Ok(Device::VSource {
                name,
                pos: toks[1].clone(),
                neg: toks[2].clone(),
                waveform,
            })
        }
        other => Err(format!("unsupported element kind {other:?}")),
    }
}

fn parse_waveform(toks: &[String]) -> Result<Waveform, String> {
    let head = toks[0].to_ascii_uppercase();
    let nums = |rest: &[String]| rest.iter().map(|t| value(t)).collect::<Result<Vec<_>, _>>();
    match head.as_str() {
        "DC" => {
            if toks.len() != 2 {
                return Err("DC expects one value".into());
            }
            Ok(Waveform::Dc {
                volts: value(&toks[1])?,
            })
        }
        "PULSE" => {
            let v = nums(&toks[1..])?;
            if v.len() != 7 {
                return Err(format!("PULSE expects 7 values, got {}", v.len()));
            }
            Ok(Waveform::Pulse {
                v1: v[0],
                v2: v[1],
                delay_s: v[2],
                rise_s: v[3],
                fall_s: v[4],
                width_s: v[5],
                period_s: v[6],
            })
        }
        "PWL" => {
            let v = nums(&toks[1..])?;
            if v.is_empty() || v.len() % 2 != 0 {
                return Err("PWL expects time/value pairs".into());
            }
            Ok(Waveform::Pwl {
                points: v.chunks(2).map(|c| (c[0], c[1])).collect(),
            })
        }
        _ if toks.len() == 1 => Ok(Waveform::Dc {
            volts: value(&toks[0])?,
        }),
        _ => Err(format!(
            "unrecognized source specification {:?}",
            toks.join(" ")
        )),
    }
}

fn parse_model(line: &str) -> Result<(String, ModelCard), String> {
    let toks = tokens(line);
    if toks.len() < 3 {
        return Err(".model expects <name> <nmos|pmos> (params)".into());
    }
    let polarity = match toks[2].to_ascii_lowercase().as_str() {
        "nmos" => Polarity::Nmos,
        "pmos" => Polarity::Pmos,
        other => return Err(format!("unknown model type {other}")),
    };
    // Unspecified parameters fall back to the generic defaults.
    let mut card = ModelCard::default_for(polarity);
    for kv in &toks[3..] {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| format!("expected KEY=value, got {kv:?}"))?;
        let v = value(v)?;
        match k.to_ascii_uppercase().as_str() {
            "VT0" => card.vt0 = v,
            "KP" => card.kp = v,
            "LAMBDA" => card.lambda = v,
            "CGSO" => card.cgso = v,
            "CGDO" => card.cgdo = v,
            "COX" => card.cox = v,
            other => return Err(format!("unknown model parameter {other}")),
        }
    }
    Ok((toks[1].clone(), card))
}
