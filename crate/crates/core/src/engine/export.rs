use std::io::{self, Write};

use super::TransientResult;
use crate::netlist::GROUND;
use crate::Scalar;

/// Writes `result` as CSV: `time_s`, one column per non-ground node, then
/// one `I(Vname)` column per source. Values carry 17 significant digits.
pub fn write_csv<T: Scalar, W: Write>(result: &TransientResult<T>, mut out: W) -> io::Result<()> {
    let nodes: Vec<(usize, &str)> = result
        .node_names()
        .into_iter()
        .enumerate()
        .filter(|(_, n)| *n != GROUND)
        .collect();
    let sources = result.source_names();
    let mut header = vec!["time_s".to_string()];
    header.extend(nodes.iter().map(|(_, n)| n.to_string()));
    header.extend(sources.iter().map(|s| format!("I({s})")));
    writeln!(out, "{}", header.join(","))?;
    for (k, t) in result.times.iter().enumerate() {
        let mut row = String::with_capacity(24 * header.len());
        row.push_str(&num(*t));
        for (c, _) in &nodes {
            row.push(',');
            row.push_str(&num(result.node_voltages[k][*c]));
        }
        for v in &result.source_currents[k] {
            row.push(',');
            row.push_str(&num(*v));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

fn num<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}
