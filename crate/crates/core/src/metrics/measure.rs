use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::engine::{interpolate, supply_current_integral, TransientResult};
use crate::netlist::Netlist;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayMeasurement<T = f64> {
    pub tphl_s: T,
    pub tplh_s: T,
    pub avg_s: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Rising,
    Falling,
}

/// Times at which `values` crosses `level` in the given direction, located
/// by linear interpolation between samples.
pub fn crossings<T: Scalar>(times: &[T], values: &[T], level: T, edge: Edge) -> Vec<T> {
    let mut out = Vec::new();
    for i in 1..values.len() {
        let (a, b) = (values[i - 1], values[i]);
        let hit = match edge {
            Edge::Rising => a < level && b >= level,
            Edge::Falling => a > level && b <= level,
        };
        if hit {
            let f = (level - a) / (b - a);
            out.push(times[i - 1] + f * (times[i] - times[i - 1]));
        }
    }
    out
}

fn column<T: Scalar>(result: &TransientResult<T>, node: &str) -> Result<Vec<T>, MetricsError> {
    result
        .node(node)
        .map_err(|_| MetricsError::UnknownNode(node.to_string()))
}

/// Propagation delays on the last clock cycle that shows both transitions:
/// `tphl` from the clock rising through `vdd/2` to `vout` falling through
/// `vdd/2`, `tplh` from the clock falling to `vout` rising.
pub fn measure_delay<T: Scalar>(
    result: &TransientResult<T>,
    clk_node: &str,
    vout_node: &str,
    vdd: T,
) -> Result<DelayMeasurement<T>, MetricsError> {
    let half = vdd * T::lit(0.5);
    let clk = column(result, clk_node)?;
    let out = column(result, vout_node)?;
    let t = &result.times;
    let clk_up = crossings(t, &clk, half, Edge::Rising);
    let clk_down = crossings(t, &clk, half, Edge::Falling);
    let out_down = crossings(t, &out, half, Edge::Falling);
    let out_up = crossings(t, &out, half, Edge::Rising);
    let first_after = |xs: &[T], t0: T, t1: Option<T>| {
        xs.iter()
            .copied()
            .find(|x| *x > t0 && t1.is_none_or(|e| *x <= e))
    };
    for (i, &up) in clk_up.iter().enumerate().rev() {
        let next_up = clk_up.get(i + 1).copied();
        let Some(down) = first_after(&clk_down, up, next_up) else {
            continue;
        };
        let Some(fall) = first_after(&out_down, up, Some(down)) else {
            continue;
        };
        let Some(rise) = first_after(&out_up, down, next_up) else {
            continue;
        };
        let tphl = fall - up;
        let tplh = rise - down;
        return Ok(DelayMeasurement {
            tphl_s: tphl,
            tplh_s: tplh,
            avg_s: (tphl + tplh) * T::lit(0.5),
        });
    }
    Err(MetricsError::MissingTransition(vout_node.to_string()))
}

/// Average supply power over `[t0, t1]`: the charge drawn is scaled to one
/// clock period and fed to `P = f_clk VDD Q`.
pub fn measure_average_power<T: Scalar>(
    result: &TransientResult<T>,
    vdd_source: &str,
    vdd: T,
    f_clk: T,
    t0: T,
    t1: T,
) -> Result<T, MetricsError> {
    let eps = T::lit(1e-9) * result.t_end();
    if !(t1 > t0) || t0 < -eps || t1 > result.t_end() + eps {
        return Err(MetricsError::WindowOutsideSpan {
            t0: t0.as_f64(),
            t1: t1.as_f64(),
        });
    }
    let q = supply_current_integral(result, vdd_source, t0, t1.min(result.t_end()))
        .map_err(|e| MetricsError::Measurement(e.to_string()))?;
    let q_per_period = q / ((t1 - t0) * f_clk);
    crate::analytic::average_power(q_per_period, vdd, f_clk)
        .map_err(|e| MetricsError::Measurement(e.to_string()))
}

/// Peak `|v(node) - level|` over `[t0, t1]`. The node must sit behind a
/// source resistor in `netlist`.
pub fn measure_kickback<T: Scalar>(
    netlist: &Netlist,
    result: &TransientResult<T>,
    node: &str,
    level: T,
    t0: T,
    t1: T,
) -> Result<T, MetricsError> {
    if !netlist.has_resistor_on(node) {
        return Err(MetricsError::MissingSourceResistor(node.to_string()));
    }
    let v = column(result, node)?;
    Ok(result
        .times
        .iter()
        .zip(&v)
        .filter(|(t, _)| **t >= t0 && **t <= t1)
        .fold(T::zero(), |m, (_, x)| m.max((*x - level).abs())))
}

/// Mean of per-input kickback peaks.
pub fn mean_kickback<T: Scalar>(peaks: &[T]) -> T {
    if peaks.is_empty() {
        return T::zero();
    }
    peaks.iter().fold(T::zero(), |a, b| a + *b) / T::lit(peaks.len() as f64)
}

/// Largest excursion of any output above `vdd`, or zero.
pub fn measure_clock_feedthrough<T: Scalar>(
    result: &TransientResult<T>,
    vout_nodes: &[&str],
    vdd: T,
) -> Result<T, MetricsError> {
    let mut peak = T::zero();
    for n in vout_nodes {
        for v in column(result, n)? {
            peak = peak.max(v - vdd);
        }
    }
    Ok(peak)
}

/// One sampled decision: input at the clock's rising edge and the output
/// level just before the clock falls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision<T> {
    pub vin: T,
    /// `true` when `vout` was below `vdd/2`, i.e. the comparator judged the
    /// input above the reference.
    pub high: bool,
}

/// Decisions of every complete evaluation phase in `result`.
pub fn sample_decisions<T: Scalar>(
    result: &TransientResult<T>,
    vin_node: &str,
    vout_node: &str,
    clk_node: &str,
    vdd: T,
) -> Result<Vec<Decision<T>>, MetricsError> {
    let half = vdd * T::lit(0.5);
    let clk = column(result, clk_node)?;
    let vin = column(result, vin_node)?;
    let out = column(result, vout_node)?;
    let t = &result.times;
    let ups = crossings(t, &clk, half, Edge::Rising);
    let downs = crossings(t, &clk, half, Edge::Falling);
    let mut out_d = Vec::new();
    for &up in &ups {
        let Some(&down) = downs.iter().find(|d| **d > up) else {
            break;
        };
        let sample_t = down - (down - up) * T::lit(0.01);
        out_d.push(Decision {
            vin: interpolate(t, |i| vin[i], up),
            high: interpolate(t, |i| out[i], sample_t) < half,
        });
    }
    Ok(out_d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionFlip<T = f64> {
    /// Last input judged on the old side.
    pub vin_before: T,
    /// First input judged on the new side.
    pub vin_after: T,
    /// Midpoint of the bracket minus the reference.
    pub offset: T,
}

/// First flip of the decision sequence in the ramp direction: low-to-high
/// for a rising input, high-to-low for a falling one.
pub fn find_flip<T: Scalar>(
    decisions: &[Decision<T>],
    vref: T,
    rising: bool,
) -> Result<DecisionFlip<T>, MetricsError> {
    for w in decisions.windows(2) {
        let flipped = if rising {
            !w[0].high && w[1].high
        } else {
            w[0].high && !w[1].high
        };
        if flipped {
            let mid = (w[0].vin + w[1].vin) * T::lit(0.5);
            return Ok(DecisionFlip {
                vin_before: w[0].vin,
                vin_after: w[1].vin,
                offset: mid - vref,
            });
        }
    }
    Err(MetricsError::NoDecisionFlip)
}

/// Input at which the sampled decision flips on a rising ramp, minus `vref`.
pub fn measure_offset<T: Scalar>(
    result: &TransientResult<T>,
    vin_node: &str,
    vref: T,
    vout_node: &str,
    clk_node: &str,
    vdd: T,
) -> Result<DecisionFlip<T>, MetricsError> {
    let d = sample_decisions(result, vin_node, vout_node, clk_node, vdd)?;
    find_flip(&d, vref, true)
}
