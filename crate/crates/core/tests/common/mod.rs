//! Circuits and checks shared by the integration tests and the acceptance
//! runner.

#![allow(dead_code)]

use latchsim::devmodel::evaluate_mosfet;
use latchsim::engine::{dc_operating_point, transient, transient_from};
use latchsim::metrics::{Bench, NODE_VOUTN, NODE_VOUTP};
use latchsim::netlist::topology::{generate_with_testbench, NMOS_MODEL, PMOS_MODEL};
use latchsim::netlist::{generate_topology, parse, print};
use latchsim::{
    Device, Integration, ModelCard, Netlist, Options64, TestbenchSpec, TopologyId, Waveform,
};

pub const TAU: f64 = 1e-9;

pub fn mosfet(
    name: &str,
    d: &str,
    g: &str,
    s: &str,
    b: &str,
    model: &str,
    w: f64,
    l: f64,
) -> Device {
    Device::Mosfet {
        name: name.into(),
        drain: d.into(),
        gate: g.into(),
        source: s.into(),
        bulk: b.into(),
        model: model.into(),
        width_m: w,
        length_m: l,
    }
}

pub fn vsource(name: &str, pos: &str, waveform: Waveform) -> Device {
    Device::VSource {
        name: name.into(),
        pos: pos.into(),
        neg: "0".into(),
        waveform,
    }
}

/// R = 1k, C = 1p driven by a 0 -> 1 V ramp of duration `rise`.
pub fn rc_netlist(rise: f64, tstop: f64) -> Netlist {
    let text = format!(
        ".title RC low-pass\nV1 in 0 PWL(0 0 {rise:e} 1)\nR1 in out 1k\nC1 out 0 1p\n.tran {:e} {tstop:e}\n.end\n",
        tstop / 10.0
    );
    parse(&text).expect("rc netlist parses")
}

/// Exact response of the RC low-pass to a unit ramp of duration `rise`.
pub fn rc_exact(t: f64, rise: f64) -> f64 {
    if t <= rise {
        (t - TAU * (1.0 - (-t / TAU).exp())) / rise
    } else {
        1.0 - TAU / rise * ((rise / TAU).exp() - 1.0) * (-t / TAU).exp()
    }
}

/// Largest deviation from the exact RC response over five time constants.
pub fn rc_max_error(integration: Integration, dt: f64, rise: f64) -> f64 {
    let n = rc_netlist(rise, 5.0 * TAU);
    let opts = Options64 {
        integration,
        dt_max: dt,
        ..Options64::default()
    };
    let r = transient(&n, &opts).expect("rc transient");
    let v = r.node("out").unwrap();
    r.times
        .iter()
        .zip(&v)
        .map(|(t, v)| (v - rc_exact(*t, rise)).abs())
        .fold(0.0, f64::max)
}

/// Least-squares slope of log(error) against log(dt) over one decade.
pub fn observed_order(integration: Integration) -> f64 {
    let rise = TAU / 10.0;
    let pts: Vec<(f64, f64)> = [10.0, 20.0, 50.0, 100.0]
        .iter()
        .map(|k| {
            let dt = TAU / k;
            (dt.ln(), rc_max_error(integration, dt, rise).ln())
        })
        .collect();
    slope(&pts)
}

pub fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

pub const REGEN_C: f64 = 100e-15;
const REGEN_WN: f64 = 1e-6;
/// Balances the PMOS current factor against the NMOS one.
const REGEN_WP: f64 = 2.83e-6;
const REGEN_L: f64 = 180e-9;

/// Symmetric cross-coupled CMOS inverter pair with a capacitor on each node.
pub fn regen_pair(tstop: f64) -> Netlist {
    let mut n = Netlist::new("cross-coupled inverter pair");
    n.models
        .insert(NMOS_MODEL.into(), ModelCard::default_nmos());
    n.models
        .insert(PMOS_MODEL.into(), ModelCard::default_pmos());
    n.devices = vec![
        vsource("VDD", "vdd", Waveform::Dc { volts: 1.8 }),
        mosfet("MN1", "b", "a", "0", "0", NMOS_MODEL, REGEN_WN, REGEN_L),
        mosfet("MP1", "b", "a", "vdd", "vdd", PMOS_MODEL, REGEN_WP, REGEN_L),
        mosfet("MN2", "a", "b", "0", "0", NMOS_MODEL, REGEN_WN, REGEN_L),
        mosfet("MP2", "a", "b", "vdd", "vdd", PMOS_MODEL, REGEN_WP, REGEN_L),
        Device::Capacitor {
            name: "CA".into(),
            n1: "a".into(),
            n2: "0".into(),
            farads: REGEN_C,
        },
        Device::Capacitor {
            name: "CB".into(),
            n1: "b".into(),
            n2: "0".into(),
            farads: REGEN_C,
        },
    ];
    n.set_tran(tstop, 1e-12);
    n
}

#[derive(Debug, Clone, Copy)]
pub struct Regeneration {
    pub v_meta: f64,
    pub gm_eff: f64,
    pub c_node: f64,
    pub fitted_rate: f64,
    pub predicted_rate: f64,
    pub t_latch: f64,
    pub predicted_t_latch: f64,
}

/// Seeds the pair 1 mV apart about its metastable point and compares the
/// divergence with `gm_eff / C_node`.
pub fn regeneration() -> Regeneration {
    let vdd = 1.8;
    let n = regen_pair(2.5e-9);
    let opts = Options64 {
        dt_max: 1e-12,
        ..Options64::default()
    };
    let op = dc_operating_point(&n, &opts).expect("dc");
    let vm = op["a"];
    assert!((op["a"] - op["b"]).abs() < 1e-6, "dc point not metastable");

    let nm = ModelCard::default_nmos();
    let pm = ModelCard::default_pmos();
    let on = evaluate_mosfet(&nm, REGEN_WN, REGEN_L, vm, vm, 0.0);
    let opp = evaluate_mosfet(&pm, REGEN_WP, REGEN_L, vm - vdd, vm - vdd, 0.0);
    let gm_eff = on.gm + opp.gm;
    // Node a: drains of one inverter, gates of the other.
    let c_node = REGEN_C + on.cgd + opp.cgd + on.cgs + on.cgd + opp.cgs + opp.cgd;

    let r =
        transient_from(&n, &opts, &[("a", vm + 0.5e-3), ("b", vm - 0.5e-3)]).expect("transient");
    let a = r.node("a").unwrap();
    let b = r.node("b").unwrap();
    let dv: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let window: Vec<(f64, f64)> = r
        .times
        .iter()
        .zip(&dv)
        .filter(|(_, d)| **d >= 2e-3 && **d <= 100e-3)
        .map(|(t, d)| (*t, d.ln()))
        .collect();
    let fitted_rate = slope(&window);
    let i = dv
        .iter()
        .position(|d| *d >= vdd / 2.0)
        .expect("pair resolves");
    let (t0, t1, d0, d1) = (r.times[i - 1], r.times[i], dv[i - 1], dv[i]);
    let t_latch = t0 + (vdd / 2.0 - d0) / (d1 - d0) * (t1 - t0);
    Regeneration {
        v_meta: vm,
        gm_eff,
        c_node,
        fitted_rate,
        predicted_rate: gm_eff / c_node,
        t_latch,
        predicted_t_latch: c_node / gm_eff * (vdd / 2.0 / 1e-3).ln(),
    }
}

pub const DESIGNS: [TopologyId; 3] = [
    TopologyId::Design1Cascode,
    TopologyId::Design2PseudoNmos,
    TopologyId::Design3CascodePseudoNmos,
];

/// Alternating-sign input of magnitude `dv` about the reference for five
/// evaluations; checks the decision polarity at the end of each evaluation
/// and that both outputs are back at VDD at the end of each reset.
pub fn check_decisions(topology: TopologyId, dv: f64) -> Result<(), String> {
    let comparator = generate_topology(topology, &[]).map_err(|e| e.to_string())?;
    let spec = TestbenchSpec::default();
    let bench = Bench {
        comparator: &comparator,
        spec: &spec,
    };
    let t = spec.period();
    let periods = 6;
    let sign = |k: usize| if k % 2 == 1 { 1.0 } else { -1.0 };
    // Inputs change a fifth of the way into each reset phase.
    let mut points = vec![(0.0, spec.vref + sign(0) * dv)];
    for k in 1..periods {
        let tk = k as f64 * t + 0.2 * t;
        points.push((tk - 1e-10, spec.vref + sign(k - 1) * dv));
        points.push((tk, spec.vref + sign(k) * dv));
    }
    let vinp = Waveform::Pwl { points };
    let opts = Options64::default();
    let n = bench.build(
        bench.clock(),
        vinp,
        Bench::dc(spec.vref),
        None,
        periods as f64 * t,
        opts.dt_max,
    );
    let r = transient(&n, &opts).map_err(|e| e.to_string())?;
    for k in 1..periods {
        let reset_end = k as f64 * t + 0.48 * t;
        for node in [NODE_VOUTP, NODE_VOUTN] {
            let v = r.voltage_at(node, reset_end).unwrap();
            if (v - spec.vdd).abs() > 0.01 {
                return Err(format!("{node} at {v:.4} V at the end of reset {k}"));
            }
        }
        let eval_end = k as f64 * t + 0.98 * t;
        let vp = r.voltage_at(NODE_VOUTP, eval_end).unwrap();
        let vn = r.voltage_at(NODE_VOUTN, eval_end).unwrap();
        let (hi, lo) = if sign(k) > 0.0 { (vp, vn) } else { (vn, vp) };
        let half = spec.vdd / 2.0;
        if !(hi > half && lo < half) {
            return Err(format!(
                "dv={:+} mV evaluation {k}: voutp {vp:.3} V, voutn {vn:.3} V",
                sign(k) * dv * 1e3
            ));
        }
    }
    Ok(())
}

/// Netlists exercising every element kind, waveform and directive.
pub fn corpus() -> Vec<(String, Netlist)> {
    let mut out = Vec::new();
    for id in TopologyId::ALL {
        out.push((
            format!("{} bare", id.key()),
            generate_topology(id, &[]).unwrap(),
        ));
        out.push((
            format!("{} testbench", id.key()),
            generate_with_testbench(id, &[]).unwrap(),
        ));
    }
    out.push(("rc".into(), rc_netlist(1e-11, 5e-9)));
    out.push(("regen pair".into(), regen_pair(1e-9)));
    let text = "\
* divider with an operating-point card
.title divider
V1 top 0 DC 1.8
R1 top mid 1k
R2 mid 0 1k
C1 mid 0 2.5f
.op
.end
";
    out.push(("divider".into(), parse(text).unwrap()));
    let text = "\
.title odd values
V1 a 0 PULSE(0 1.8 1.5n 37p 41p 4.9n 10n)
V2 b 0 PWL(0 0.123456789 1.1n 0.7 3.3meg 1.8)
R1 a b 4.7meg
C1 b 0 0.333p
.tran 1p 20n
.end
";
    out.push(("odd values".into(), parse(text).unwrap()));
    out
}

pub fn round_trips(n: &Netlist) -> Result<(), String> {
    let text = print(n);
    let back = parse(&text).map_err(|e| format!("{e}\n{text}"))?;
    if &back != n {
        return Err(format!("structural mismatch after round trip:\n{text}"));
    }
    if print(&back) != text {
        return Err("printed text not stable".into());
    }
    Ok(())
}
