//! Comparator measurements.
//!
//! [`measure`] holds the waveform-level procedures, generic over the scalar.
//! [`characterize`] wraps a bare comparator netlist in the five stimulus
//! configurations (delay, power, offset, clock feedthrough, kickback),
//! simulates each and fills a [`ComparatorMetrics`].
//!
//! Stimulus summary, with `T = 1/f_clk` and the clock low for the first half
//! of every period:
//!
//! | metric | stimulus | reading |
//! |---|---|---|
//! | delay | `vinp` = `vin`, `delay_periods` periods | last complete cycle on `voutn` |
//! | power | `vinp` ramps 0 -> VDD -> 0, `power_ramp_s` per leg, after one idle period | supply charge over the ramp window |
//! | offset | rising `vinp` ramps, refined over `offset_stages` | bracket midpoint minus `vref` |
//! | feedthrough | slow `vinp` ramp up and down while the clock runs | peak output above VDD |
//! | kickback | one input stepped `kickback_low_v` -> `kickback_high_v` at `T/2` behind `kickback_rsource` | peak deviation after `3T/4`, both inputs averaged |

pub mod measure;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{transient, EngineError, SolverOptions};
use crate::netlist::topology::{clock_waveform, generate_topology};
use crate::netlist::{Device, Netlist, NetlistError, TopologyId, Waveform, GROUND};

pub use measure::{
    crossings, find_flip, mean_kickback, measure_average_power, measure_clock_feedthrough,
    measure_delay, measure_kickback, measure_offset, sample_decisions, Decision, DecisionFlip,
    DelayMeasurement, Edge,
};

pub const NODE_CLK: &str = "clk";
pub const NODE_VINP: &str = "vinp";
pub const NODE_VINN: &str = "vinn";
pub const NODE_VOUTP: &str = "voutp";
pub const NODE_VOUTN: &str = "voutn";
pub const SOURCE_VDD: &str = "VDD";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("output {0} never crosses VDD/2 in the measurement window")]
    MissingTransition(String),
    #[error("decision never flips across the input ramp")]
    NoDecisionFlip,
    #[error("input {0} has no source resistor")]
    MissingSourceResistor(String),
    #[error("window [{t0:e}, {t1:e}] s lies outside the simulated span")]
    WindowOutsideSpan { t0: f64, t1: f64 },
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("{0}")]
    Measurement(String),
    #[error("{procedure} simulation failed: {source}")]
    Simulation {
        procedure: &'static str,
        source: EngineError,
    },
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error("invalid testbench: {0}")]
    InvalidBench(String),
}

/// Stimulus settings. Defaults are the standard 1.8 V / 100 MHz bench with
/// `Vref+` = 800 mV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestbenchSpec {
    pub vdd: f64,
    pub vref: f64,
    /// Positive input during the delay measurement.
    pub vin: f64,
    pub f_clk: f64,
    pub clk_edge_s: f64,
    pub delay_periods: usize,
    pub kickback_rsource: f64,
    /// Load capacitance on each output; zero leaves the outputs unloaded.
    pub c_load_f: f64,
    pub kickback_low_v: f64,
    pub kickback_high_v: f64,
    pub ramp_low_v: f64,
    pub ramp_high_v: f64,
    /// Duration of each leg of the power ramp.
    pub power_ramp_s: f64,
    /// Duration of each leg of the feedthrough ramp.
    pub feedthrough_ramp_s: f64,
    pub offset_stages: usize,
    /// Evaluations per offset refinement stage.
    pub offset_cycles: usize,
}

impl Default for TestbenchSpec {
    fn default() -> Self {
        TestbenchSpec {
            vdd: 1.8,
            vref: 0.8,
            vin: 1.0,
            f_clk: 100e6,
            clk_edge_s: 50e-12,
            delay_periods: 3,
            kickback_rsource: 1000.0,
            c_load_f: 10e-15,
            kickback_low_v: 0.6,
            kickback_high_v: 1.0,
            ramp_low_v: 0.0,
            ramp_high_v: 1.8,
            power_ramp_s: 5e-9,
            feedthrough_ramp_s: 20e-9,
            offset_stages: 4,
            offset_cycles: 20,
        }
    }
}

impl TestbenchSpec {
    pub fn period(&self) -> f64 {
        1.0 / self.f_clk
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        let positive = [
            ("vdd", self.vdd),
            ("f_clk", self.f_clk),
            ("clk_edge_s", self.clk_edge_s),
            ("kickback_rsource", self.kickback_rsource),
            ("power_ramp_s", self.power_ramp_s),
            ("feedthrough_ramp_s", self.feedthrough_ramp_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MetricsError::InvalidBench(format!(
                    "{name} must be positive"
                )));
            }
        }
        if self.clk_edge_s * 4.0 >= self.period() {
            return Err(MetricsError::InvalidBench(
                "clock edge too slow for the period".into(),
            ));
        }
        if !(self.c_load_f >= 0.0 && self.c_load_f.is_finite()) {
            return Err(MetricsError::InvalidBench(
                "c_load_f must be non-negative".into(),
            ));
        }
        if self.delay_periods < 2 || self.offset_stages < 1 || self.offset_cycles < 3 {
            return Err(MetricsError::InvalidBench(
                "need delay_periods >= 2, offset_stages >= 1, offset_cycles >= 3".into(),
            ));
        }
        if !(self.ramp_high_v > self.ramp_low_v) {
            return Err(MetricsError::InvalidBench(
                "ramp_high_v must exceed ramp_low_v".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the performance table. SI units throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparatorMetrics {
    pub topology: String,
    pub avg_delay_s: f64,
    pub avg_power_w: f64,
    pub pdp_j: f64,
    /// Magnitude of the input-referred offset.
    pub offset_v: f64,
    pub clock_feedthrough_v: f64,
    pub kickback_v: f64,
}

impl ComparatorMetrics {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::AvgDelay => self.avg_delay_s,
            Metric::AvgPower => self.avg_power_w,
            Metric::Pdp => self.pdp_j,
            Metric::Offset => self.offset_v,
            Metric::ClockFeedthrough => self.clock_feedthrough_v,
            Metric::Kickback => self.kickback_v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "avg_delay_s")]
    AvgDelay,
    #[serde(rename = "avg_power_w")]
    AvgPower,
    #[serde(rename = "pdp_j")]
    Pdp,
    #[serde(rename = "offset_v")]
    Offset,
    #[serde(rename = "clock_feedthrough_v")]
    ClockFeedthrough,
    #[serde(rename = "kickback_v")]
    Kickback,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::AvgDelay,
        Metric::AvgPower,
        Metric::Pdp,
        Metric::Offset,
        Metric::ClockFeedthrough,
        Metric::Kickback,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Metric::AvgDelay => "avg_delay_s",
            Metric::AvgPower => "avg_power_w",
            Metric::Pdp => "pdp_j",
            Metric::Offset => "offset_v",
            Metric::ClockFeedthrough => "clock_feedthrough_v",
            Metric::Kickback => "kickback_v",
        }
    }

    /// Display unit and scale from SI.
    pub fn unit(self) -> (&'static str, f64) {
        match self {
            Metric::AvgDelay => ("ps", 1e12),
            Metric::AvgPower => ("uW", 1e6),
            Metric::Pdp => ("fJ", 1e15),
            Metric::Offset => ("mV", 1e3),
            Metric::ClockFeedthrough | Metric::Kickback => ("V", 1.0),
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        let k = s.trim().to_ascii_lowercase();
        Metric::ALL.into_iter().find(|m| {
            m.key() == k || m.key().rsplit_once('_').map(|(head, _)| head) == Some(k.as_str())
        })
    }
}

/// Comparator netlist (no sources) plus the bench it is driven with.
#[derive(Debug, Clone)]
pub struct Bench<'a> {
    pub comparator: &'a Netlist,
    pub spec: &'a TestbenchSpec,
}

fn vsource(name: &str, pos: &str, waveform: Waveform) -> Device {
    Device::VSource {
        name: name.into(),
        pos: pos.into(),
        neg: GROUND.into(),
        waveform,
    }
}

impl Bench<'_> {
    /// Adds the supply, the clock and the two inputs. With `rsource` set,
    /// each input source drives its node through that resistance.
    pub fn build(
        &self,
        clk: Waveform,
        vinp: Waveform,
        vinn: Waveform,
        rsource: Option<f64>,
        tstop: f64,
        dt: f64,
    ) -> Netlist {
        let mut n = self.comparator.clone();
        n.devices.push(vsource(
            SOURCE_VDD,
            "vdd",
            Waveform::Dc {
                volts: self.spec.vdd,
            },
        ));
        n.devices.push(vsource("VCLK", NODE_CLK, clk));
        match rsource {
            Some(r) => {
                n.devices.push(vsource("VINP", "vinp_src", vinp));
                n.devices.push(vsource("VREF", "vinn_src", vinn));
                n.devices.push(Device::Resistor {
                    name: "RINP".into(),
                    n1: "vinp_src".into(),
                    n2: NODE_VINP.into(),
                    ohms: r,
                });
                n.devices.push(Device::Resistor {
                    name: "RINN".into(),
                    n1: "vinn_src".into(),
                    n2: NODE_VINN.into(),
                    ohms: r,
                });
            }
            None => {
                n.devices.push(vsource("VINP", NODE_VINP, vinp));
                n.devices.push(vsource("VREF", NODE_VINN, vinn));
            }
        }
        if self.spec.c_load_f > 0.0 {
            for (name, node) in [("CLP", NODE_VOUTP), ("CLN", NODE_VOUTN)] {
                n.devices.push(Device::Capacitor {
                    name: name.into(),
                    n1: node.into(),
                    n2: GROUND.into(),
                    farads: self.spec.c_load_f,
                });
            }
        }
        n.set_tran(tstop, dt);
        n
    }

    /// Free-running bench clock, low for the first half period.
    pub fn clock(&self) -> Waveform {
        clock_waveform(self.spec.vdd, self.spec.f_clk, self.spec.clk_edge_s)
    }

    pub fn dc(v: f64) -> Waveform {
        Waveform::Dc { volts: v }
    }

    /// Delay bench: constant `vin`, `delay_periods` clock periods.
    pub fn delay_netlist(&self, dt: f64) -> Netlist {
        let s = self.spec;
        self.build(
            self.clock(),
            Self::dc(s.vin),
            Self::dc(s.vref),
            None,
            s.delay_periods as f64 * s.period(),
            dt,
        )
    }

    /// Power bench and its averaging window.
    pub fn power_netlist(&self, dt: f64) -> (Netlist, f64, f64) {
        let s = self.spec;
        let t0 = s.period();
        let t1 = t0 + 2.0 * s.power_ramp_s;
        let ramp = Waveform::Pwl {
            points: vec![
                (0.0, s.ramp_low_v),
                (t0, s.ramp_low_v),
                (t0 + s.power_ramp_s, s.ramp_high_v),
                (t1, s.ramp_low_v),
            ],
        };
        let n = self.build(self.clock(), ramp, Self::dc(s.vref), None, t1, dt);
        (n, t0, t1)
    }

    /// Feedthrough bench: input ramped slowly up then down while the clock
    /// runs; overshoot appears when the clock rises to VDD.
    pub fn feedthrough_netlist(&self, dt: f64) -> Netlist {
        let s = self.spec;
        let leg = s.feedthrough_ramp_s;
        let ramp = Waveform::Pwl {
            points: vec![
                (0.0, s.ramp_low_v),
                (leg, s.ramp_high_v),
                (2.0 * leg, s.ramp_low_v),
            ],
        };
        self.build(self.clock(), ramp, Self::dc(s.vref), None, 2.0 * leg, dt)
    }

    /// Kickback bench for one input (`positive` selects `vinp`), the node to
    /// observe and the observation window.
    pub fn kickback_netlist(&self, positive: bool, dt: f64) -> (Netlist, &'static str, f64, f64) {
        let s = self.spec;
        let t = s.period();
        let step = Waveform::Pwl {
            points: vec![
                (0.0, s.kickback_low_v),
                (t / 2.0, s.kickback_low_v),
                (t / 2.0 + s.clk_edge_s, s.kickback_high_v),
            ],
        };
        let other = Self::dc(s.vref);
        let (vinp, vinn, node) = if positive {
            (step, other, NODE_VINP)
        } else {
            (other, step, NODE_VINN)
        };
        let tstop = 2.0 * t;
        let n = self.build(
            self.clock(),
            vinp,
            vinn,
            Some(s.kickback_rsource),
            tstop,
            dt,
        );
        (n, node, 0.75 * t, tstop)
    }

    /// Offset ramp: one settling period at `lo`, then `cycles` evaluations
    /// whose inputs step evenly from `lo` to `hi` (or back when falling).
    pub fn offset_ramp_netlist(&self, lo: f64, hi: f64, rising: bool, dt: f64) -> Netlist {
        let s = self.spec;
        let t = s.period();
        let n_eval = s.offset_cycles;
        let (a, b) = if rising { (lo, hi) } else { (hi, lo) };
        // Mid-point of the clock's rising edge in the first evaluated period.
        let first = t + t / 2.0 + s.clk_edge_s / 2.0;
        let last = first + (n_eval - 1) as f64 * t;
        let ramp = Waveform::Pwl {
            points: vec![(0.0, a), (first, a), (last, b)],
        };
        let tstop = (n_eval + 1) as f64 * t + t / 4.0;
        self.build(self.clock(), ramp, Self::dc(s.vref), None, tstop, dt)
    }
}

fn sim(
    procedure: &'static str,
    n: &Netlist,
    options: &SolverOptions<f64>,
) -> Result<crate::engine::TransientResult<f64>, MetricsError> {
    transient(n, options).map_err(|source| MetricsError::Simulation { procedure, source })
}

pub fn run_delay(
    bench: &Bench,
    options: &SolverOptions<f64>,
) -> Result<DelayMeasurement<f64>, MetricsError> {
    let n = bench.delay_netlist(options.dt_max);
    let r = sim("delay", &n, options)?;
    measure_delay(&r, NODE_CLK, NODE_VOUTN, bench.spec.vdd)
}

pub fn run_power(bench: &Bench, options: &SolverOptions<f64>) -> Result<f64, MetricsError> {
    let (n, t0, t1) = bench.power_netlist(options.dt_max);
    let r = sim("power", &n, options)?;
    measure_average_power(&r, SOURCE_VDD, bench.spec.vdd, bench.spec.f_clk, t0, t1)
}

pub fn run_feedthrough(bench: &Bench, options: &SolverOptions<f64>) -> Result<f64, MetricsError> {
    let n = bench.feedthrough_netlist(options.dt_max);
    let r = sim("clock feedthrough", &n, options)?;
    measure_clock_feedthrough(&r, &[NODE_VOUTP, NODE_VOUTN], bench.spec.vdd)
}

pub fn run_kickback(bench: &Bench, options: &SolverOptions<f64>) -> Result<f64, MetricsError> {
    let mut peaks = Vec::with_capacity(2);
    for positive in [true, false] {
        let (n, node, t0, t1) = bench.kickback_netlist(positive, options.dt_max);
        let r = sim("kickback", &n, options)?;
        peaks.push(measure_kickback(
            &n,
            &r,
            node,
            bench.spec.kickback_high_v,
            t0,
            t1,
        )?);
    }
    Ok(mean_kickback(&peaks))
}

/// Ramp-refined decision flip. Each stage ramps across the previous
/// stage's bracket widened by a quarter on each side; a stage that misses the flip widens its window by the
/// bracket width on both sides and retries once.
pub fn run_offset_flip(
    bench: &Bench,
    options: &SolverOptions<f64>,
    rising: bool,
) -> Result<DecisionFlip<f64>, MetricsError> {
    let s = bench.spec;
    let (mut lo, mut hi) = (s.ramp_low_v, s.ramp_high_v);
    let mut flip = None;
    for _ in 0..s.offset_stages {
        let mut found = None;
        for attempt in 0..2 {
            let n = bench.offset_ramp_netlist(lo, hi, rising, options.dt_max);
            let r = sim("offset", &n, options)?;
            let d = sample_decisions(&r, NODE_VINP, NODE_VOUTN, NODE_CLK, s.vdd)?;
            // The first evaluation starts from the DC operating point rather
            // than from a reset, so it is not representative.
            match find_flip(d.get(1..).unwrap_or(&[]), s.vref, rising) {
                Ok(f) => {
                    found = Some(f);
                    break;
                }
                Err(e) if attempt == 1 || flip.is_none() => return Err(e),
                Err(_) => {
                    let w = hi - lo;
                    lo = (lo - w).max(s.ramp_low_v);
                    hi = (hi + w).min(s.ramp_high_v);
                }
            }
        }
        let f = found.expect("flip found or returned");
        // Pad the bracket so the next grid neither starts on an old sample
        // nor loses a flip shifted by the previous decision.
        let a = f.vin_before.min(f.vin_after);
        let b = f.vin_before.max(f.vin_after);
        let pad = 0.25 * (b - a);
        lo = (a - pad).max(s.ramp_low_v);
        hi = (b + pad).min(s.ramp_high_v);
        flip = Some(f);
    }
    Ok(flip.expect("at least one stage"))
}

/// Signed offset read on the rising ramp.
pub fn run_offset(bench: &Bench, options: &SolverOptions<f64>) -> Result<f64, MetricsError> {
    run_offset_flip(bench, options, true).map(|f| f.offset)
}

/// Flip points on rising and falling ramps; their difference is the
/// hysteresis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetReport {
    pub offset_v: f64,
    pub falling_offset_v: f64,
    pub hysteresis_v: f64,
}

pub fn run_offset_report(
    bench: &Bench,
    options: &SolverOptions<f64>,
) -> Result<OffsetReport, MetricsError> {
    let up = run_offset_flip(bench, options, true)?.offset;
    let down = run_offset_flip(bench, options, false)?.offset;
    Ok(OffsetReport {
        offset_v: up,
        falling_offset_v: down,
        hysteresis_v: up - down,
    })
}

/// Metrics that were requested; the rest stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PartialMetrics {
    pub avg_delay_s: Option<f64>,
    pub avg_power_w: Option<f64>,
    pub pdp_j: Option<f64>,
    /// Signed.
    pub offset_v: Option<f64>,
    pub clock_feedthrough_v: Option<f64>,
    pub kickback_v: Option<f64>,
}

impl PartialMetrics {
    /// Value of `m`; offsets keep their sign.
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::AvgDelay => self.avg_delay_s,
            Metric::AvgPower => self.avg_power_w,
            Metric::Pdp => self.pdp_j,
            Metric::Offset => self.offset_v,
            Metric::ClockFeedthrough => self.clock_feedthrough_v,
            Metric::Kickback => self.kickback_v,
        }
    }
}

/// Runs only the procedures needed for `selection`.
pub fn characterize_netlist(
    comparator: &Netlist,
    spec: &TestbenchSpec,
    options: &SolverOptions<f64>,
    selection: &[Metric],
) -> Result<PartialMetrics, MetricsError> {
    spec.validate()?;
    let bench = Bench { comparator, spec };
    let wants = |m: Metric| selection.contains(&m);
    let mut out = PartialMetrics::default();
    if wants(Metric::AvgDelay) || wants(Metric::Pdp) {
        out.avg_delay_s = Some(run_delay(&bench, options)?.avg_s);
    }
    if wants(Metric::AvgPower) || wants(Metric::Pdp) {
        out.avg_power_w = Some(run_power(&bench, options)?);
    }
    if let (Some(d), Some(p)) = (out.avg_delay_s, out.avg_power_w) {
        out.pdp_j = Some(d * p);
    }
    if wants(Metric::Offset) {
        out.offset_v = Some(run_offset(&bench, options)?);
    }
    if wants(Metric::ClockFeedthrough) {
        out.clock_feedthrough_v = Some(run_feedthrough(&bench, options)?);
    }
    if wants(Metric::Kickback) {
        out.kickback_v = Some(run_kickback(&bench, options)?);
    }
    Ok(out)
}

/// Full characterization of a comparator netlist.
pub fn characterize_comparator(
    label: &str,
    comparator: &Netlist,
    spec: &TestbenchSpec,
    options: &SolverOptions<f64>,
) -> Result<ComparatorMetrics, MetricsError> {
    let p = characterize_netlist(comparator, spec, options, &Metric::ALL)?;
    let delay = p.avg_delay_s.unwrap_or_default();
    let power = p.avg_power_w.unwrap_or_default();
    Ok(ComparatorMetrics {
        topology: label.to_string(),
        avg_delay_s: delay,
        avg_power_w: power,
        pdp_j: delay * power,
        offset_v: p.offset_v.unwrap_or_default().abs(),
        clock_feedthrough_v: p.clock_feedthrough_v.unwrap_or_default(),
        kickback_v: p.kickback_v.unwrap_or_default(),
    })
}

/// Generates `topology` with default sizing and characterizes it.
pub fn characterize(
    topology: TopologyId,
    spec: &TestbenchSpec,
    options: &SolverOptions<f64>,
) -> Result<ComparatorMetrics, MetricsError> {
    let n = generate_topology(topology, &[])?;
    characterize_comparator(topology.key(), &n, spec, options)
}
