mod common;

use std::collections::BTreeMap;

use common::{check_decisions, DESIGNS};
use latchsim::engine::{transient, RunStats};
use latchsim::metrics::*;
use latchsim::netlist::generate_topology;
use latchsim::variation::{apply_shifts, DeviceShift};
use latchsim::{Netlist, Options64, TestbenchSpec, TopologyId, TransientResult};

/// Waveform record built from columns sampled on `times`.
fn synthetic(
    times: Vec<f64>,
    nodes: &[(&str, Vec<f64>)],
    sources: &[(&str, Vec<f64>)],
) -> TransientResult {
    let mut node_index = BTreeMap::from([("0".to_string(), 0)]);
    for (i, (n, _)) in nodes.iter().enumerate() {
        node_index.insert(n.to_string(), i + 1);
    }
    let source_index = sources
        .iter()
        .enumerate()
        .map(|(i, (n, _))| (n.to_string(), i))
        .collect();
    let rows = times.len();
    TransientResult {
        node_voltages: (0..rows)
            .map(|k| {
                std::iter::once(0.0)
                    .chain(nodes.iter().map(|c| c.1[k]))
                    .collect()
            })
            .collect(),
        source_currents: (0..rows)
            .map(|k| sources.iter().map(|c| c.1[k]).collect())
            .collect(),
        times,
        node_index,
        source_index,
        stats: RunStats::default(),
    }
}

fn grid(t_end: f64, dt: f64) -> Vec<f64> {
    (0..=((t_end / dt).round() as usize))
        .map(|k| k as f64 * dt)
        .collect()
}

/// Clock edges at 5 ns (up) and 10 ns (down) with 10 ps ramps; output
/// falls `tphl` after the up edge and rises `tplh` after the down edge.
fn delay_record(tphl: f64, tplh: f64) -> TransientResult {
    let t = grid(15e-9, 1e-12);
    let ramp = |x: f64, t0: f64| ((x - t0) / 10e-12 + 0.5).clamp(0.0, 1.0);
    let clk: Vec<f64> = t
        .iter()
        .map(|x| 1.8 * (ramp(*x, 5e-9) - ramp(*x, 10e-9)))
        .collect();
    let out: Vec<f64> = t
        .iter()
        .map(|x| 1.8 * (1.0 - ramp(*x, 5e-9 + tphl) + ramp(*x, 10e-9 + tplh)))
        .collect();
    synthetic(t, &[("clk", clk), ("voutn", out)], &[])
}

#[test]
fn synthetic_delay() {
    let r = delay_record(62.8e-12, 62.8e-12);
    let d = measure_delay(&r, "clk", "voutn", 1.8).unwrap();
    assert!((d.tphl_s - 62.8e-12).abs() < 1e-15);
    assert!((d.tphl_s - d.tplh_s).abs() < 1e-20);
    assert!((d.avg_s - d.tphl_s).abs() < 1e-20);
    let r = delay_record(40e-12, 80e-12);
    let d = measure_delay(&r, "clk", "voutn", 1.8).unwrap();
    assert!((d.avg_s - 60e-12).abs() < 1e-15);
}

#[test]
fn stuck_output_has_no_transition() {
    let t = grid(15e-9, 1e-11);
    let clk: Vec<f64> = t
        .iter()
        .map(|x| if *x > 5e-9 && *x < 10e-9 { 1.8 } else { 0.0 })
        .collect();
    let out = vec![1.8; t.len()];
    let r = synthetic(t, &[("clk", clk), ("voutn", out)], &[]);
    assert!(matches!(
        measure_delay(&r, "clk", "voutn", 1.8),
        Err(MetricsError::MissingTransition(_))
    ));
}

#[test]
fn clock_held_low_has_no_transition() {
    let n = generate_topology(TopologyId::Design1Cascode, &[]).unwrap();
    let spec = TestbenchSpec::default();
    let bench = Bench {
        comparator: &n,
        spec: &spec,
    };
    let net = bench.build(
        Bench::dc(0.0),
        Bench::dc(1.0),
        Bench::dc(0.8),
        None,
        20e-9,
        10e-12,
    );
    let r = transient(&net, &Options64::default()).unwrap();
    assert!(matches!(
        measure_delay(&r, NODE_CLK, NODE_VOUTN, 1.8),
        Err(MetricsError::MissingTransition(_))
    ));
}

#[test]
fn synthetic_power() {
    let t = grid(20e-9, 1e-11);
    let i = vec![2.267e-6; t.len()];
    let r = synthetic(t.clone(), &[], &[("VDD", i)]);
    let p = measure_average_power(&r, "VDD", 1.8, 100e6, 0.0, 10e-9).unwrap();
    assert!((p - 4.08e-6).abs() < 1e-9);
    let p2 = measure_average_power(&r, "VDD", 1.8, 100e6, 0.0, 20e-9).unwrap();
    assert!((p - p2).abs() < 1e-15);
    let r0 = synthetic(t, &[], &[("VDD", vec![0.0; 2001])]);
    assert_eq!(
        measure_average_power(&r0, "VDD", 1.8, 100e6, 0.0, 10e-9).unwrap(),
        0.0
    );
}

#[test]
fn synthetic_kickback() {
    let t = grid(10e-9, 1e-11);
    let spike = |amp: f64| -> Vec<f64> {
        t.iter()
            .map(|x| 1.0 + if (*x - 6e-9).abs() < 5e-12 { amp } else { 0.0 })
            .collect()
    };
    let r = synthetic(
        t.clone(),
        &[("vinp", spike(5e-3)), ("vinn", spike(-5e-3))],
        &[],
    );
    let mut n = Netlist::new("k");
    n.devices = vec![
        common::vsource("V1", "s1", latchsim::Waveform::Dc { volts: 1.0 }),
        latchsim::Device::Resistor {
            name: "R1".into(),
            n1: "s1".into(),
            n2: "vinp".into(),
            ohms: 1e3,
        },
        latchsim::Device::Resistor {
            name: "R2".into(),
            n1: "s1".into(),
            n2: "vinn".into(),
            ohms: 1e3,
        },
    ];
    let a = measure_kickback(&n, &r, "vinp", 1.0, 0.0, 10e-9).unwrap();
    let b = measure_kickback(&n, &r, "vinn", 1.0, 0.0, 10e-9).unwrap();
    assert!((a - 5e-3).abs() < 1e-12 && (b - 5e-3).abs() < 1e-12);
    assert!((mean_kickback(&[4e-3f64, 6e-3]) - 5e-3).abs() < 1e-15);
    assert!(matches!(
        measure_kickback(&Netlist::new("none"), &r, "vinp", 1.0, 0.0, 10e-9),
        Err(MetricsError::MissingSourceResistor(_))
    ));
}

#[test]
fn synthetic_feedthrough() {
    let t = grid(1e-9, 1e-11);
    let bump = |peak: f64| -> Vec<f64> {
        t.iter()
            .map(|x| 1.8 + (peak - 1.8) * (-(x - 5e-10).powi(2) / 1e-22).exp())
            .collect()
    };
    let r = synthetic(
        t.clone(),
        &[("voutp", bump(1.85)), ("voutn", bump(1.89))],
        &[],
    );
    let f = measure_clock_feedthrough(&r, &["voutp", "voutn"], 1.8).unwrap();
    assert!((f - 0.09).abs() < 1e-6);
    let r = synthetic(t.clone(), &[("voutp", bump(1.892))], &[]);
    assert!((measure_clock_feedthrough(&r, &["voutp"], 1.8).unwrap() - 0.092).abs() < 1e-6);
    let flat = synthetic(t.clone(), &[("voutp", vec![1.7; t.len()])], &[]);
    assert_eq!(
        measure_clock_feedthrough(&flat, &["voutp"], 1.8).unwrap(),
        0.0
    );
}

#[test]
fn synthetic_offset() {
    // Ideal comparator on a rising input ramp; decisions read before each clock fall.
    let period = 10e-9;
    let t = grid(21.0 * period, 1e-10);
    let flip = 0.8027;
    let vin_at = |x: f64| 0.795 + 0.0005 * (x / period).floor();
    let clk: Vec<f64> = t
        .iter()
        .map(|x| {
            if (x % period) >= period / 2.0 {
                1.8
            } else {
                0.0
            }
        })
        .collect();
    let vin: Vec<f64> = t.iter().map(|x| vin_at(*x)).collect();
    let out: Vec<f64> = t
        .iter()
        .map(|x| if vin_at(*x) >= flip { 0.0 } else { 1.8 })
        .collect();
    let r = synthetic(t, &[("clk", clk), ("vinp", vin), ("voutn", out)], &[]);
    let f = measure_offset(&r, "vinp", 0.8, "voutn", "clk", 1.8).unwrap();
    assert!((f.offset - 2.7e-3).abs() <= 0.25e-3 + 1e-12, "{f:?}");
    assert!(f.vin_before < flip && f.vin_after >= flip);
}

#[test]
fn decisions_for_all_designs() {
    for id in DESIGNS {
        for dv in [0.01, 0.1, 0.5] {
            check_decisions(id, dv).unwrap_or_else(|e| panic!("{}: {e}", id.key()));
        }
    }
}

#[test]
fn pdp_is_delay_times_power() {
    let m = characterize(
        TopologyId::Msadlc,
        &TestbenchSpec::default(),
        &Options64::default(),
    )
    .unwrap();
    assert_eq!(m.pdp_j, m.avg_delay_s * m.avg_power_w);
    assert!(m.avg_delay_s > 0.0 && m.avg_power_w > 0.0 && m.kickback_v > 0.0);
    assert!(m.clock_feedthrough_v >= 0.0 && m.offset_v >= 0.0);
}

#[test]
fn delay_is_grid_independent() {
    let n = generate_topology(TopologyId::Design1Cascode, &[]).unwrap();
    let spec = TestbenchSpec::default();
    let bench = Bench {
        comparator: &n,
        spec: &spec,
    };
    let coarse = run_delay(&bench, &Options64::default()).unwrap().avg_s;
    let fine = run_delay(
        &bench,
        &Options64 {
            dt_max: 5e-12,
            ..Options64::default()
        },
    )
    .unwrap()
    .avg_s;
    assert!(
        (coarse - fine).abs() / fine < 0.01,
        "{coarse:e} vs {fine:e}"
    );
}

#[test]
fn feedthrough_vanishes_without_gate_capacitance() {
    let mut n = generate_topology(TopologyId::Design1Cascode, &[]).unwrap();
    for card in n.models.values_mut() {
        card.cgso = 0.0;
        card.cgdo = 0.0;
        card.cox = 0.0;
    }
    let spec = TestbenchSpec::default();
    let bench = Bench {
        comparator: &n,
        spec: &spec,
    };
    let f = run_feedthrough(&bench, &Options64::default()).unwrap();
    assert!(f < 1e-9, "{f:e}");
}

#[test]
fn injected_threshold_shift_is_recovered() {
    let n = generate_topology(TopologyId::Design1Cascode, &[]).unwrap();
    let spec = TestbenchSpec::default();
    let opts = Options64::default();
    let nominal = run_offset(
        &Bench {
            comparator: &n,
            spec: &spec,
        },
        &opts,
    )
    .unwrap();
    for x in [2e-3, 5e-3, 10e-3] {
        let shifted = apply_shifts(
            &n,
            &[DeviceShift {
                device: "M1".into(),
                d_vt: x,
                d_beta_rel: 0.0,
            }],
        );
        let v = run_offset(
            &Bench {
                comparator: &shifted,
                spec: &spec,
            },
            &opts,
        )
        .unwrap();
        // Only the threshold term of the offset model is non-zero.
        let measured = v - nominal;
        assert!(
            (measured - x).abs() <= 0.2 * x,
            "x={x:e} measured {measured:e}"
        );
    }
}
