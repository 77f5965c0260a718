//! Modified nodal analysis with Newton iteration.
//!
//! Unknowns are the non-ground node voltages followed by one branch current
//! per voltage source. Every node carries a `gmin` conductance to ground.
//! Capacitors (explicit and MOSFET gate capacitances) use backward-Euler or
//! trapezoidal companion models; MOSFET capacitances are re-evaluated at
//! each accepted time point and held fixed during the next step's Newton
//! solve.
//!
//! Source currents are reported as the current a source delivers into the
//! circuit from its positive terminal, so a supply feeding a load reads
//! positive.

mod export;
mod linalg;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devmodel::{evaluate_mosfet, ModelCard, OperatingPoint};
use crate::netlist::{Device, Netlist, NetlistError, Waveform, GROUND};
use crate::Scalar;

pub use export::write_csv;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integration {
    Trapezoidal,
    BackwardEuler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    pub reltol: T,
    pub vabstol: T,
    pub iabstol: T,
    pub max_newton_iters: usize,
    pub gmin: T,
    pub integration: Integration,
    pub dt_max: T,
    /// Largest node-voltage change applied per Newton iteration.
    pub max_voltage_step: T,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions {
            reltol: T::lit(1e-4),
            vabstol: T::lit(1e-6),
            iabstol: T::lit(1e-12).max(T::epsilon() * T::lit(1e-3)),
            max_newton_iters: 100,
            gmin: T::lit(1e-12),
            integration: Integration::Trapezoidal,
            dt_max: T::lit(10e-12),
            max_voltage_step: T::lit(0.5),
        }
    }
}

impl<T: Scalar> SolverOptions<T> {
    pub fn validate(&self) -> Result<(), EngineError> {
        let z = T::zero();
        let ok = self.reltol > z
            && self.vabstol > z
            && self.iabstol > z
            && self.gmin > z
            && self.dt_max > z
            && self.max_voltage_step > z
            && self.max_newton_iters >= 1;
        if ok {
            Ok(())
        } else {
            Err(EngineError::InvalidOptions)
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error("solver options out of range")]
    InvalidOptions,
    #[error("netlist has no .tran directive")]
    NoTranDirective,
    #[error("Newton failed to converge{}; worst node {node}", .time.map(|t| format!(" at t={t:e} s")).unwrap_or_default())]
    NonConvergence { time: Option<f64>, node: String },
    #[error("time step underflow at t={time:e} s (dt={dt:e} s)")]
    StepUnderflow { time: f64, dt: f64 },
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("unknown voltage source {0}")]
    UnknownSource(String),
    #[error("invalid interval [{0:e}, {1:e}]")]
    InvalidInterval(f64, f64),
}

/// Waveform record of one transient run.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientResult<T = f64> {
    pub times: Vec<T>,
    /// Row per time point, column per node (column 0 is ground).
    pub node_voltages: Vec<Vec<T>>,
    /// Row per time point, column per voltage source.
    pub source_currents: Vec<Vec<T>>,
    pub node_index: BTreeMap<String, usize>,
    pub source_index: BTreeMap<String, usize>,
    pub stats: RunStats,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub steps: usize,
    pub newton_iterations: usize,
    pub be_fallbacks: usize,
    pub step_halvings: usize,
}

impl<T: Scalar> TransientResult<T> {
    /// Node names ordered by column.
    pub fn node_names(&self) -> Vec<&str> {
        ordered(&self.node_index)
    }

    pub fn source_names(&self) -> Vec<&str> {
        ordered(&self.source_index)
    }

    pub fn node(&self, name: &str) -> Result<Vec<T>, EngineError> {
        let c = *self
            .node_index
            .get(name)
            .ok_or_else(|| EngineError::UnknownNode(name.to_string()))?;
        Ok(self.node_voltages.iter().map(|r| r[c]).collect())
    }

    pub fn source_current(&self, name: &str) -> Result<Vec<T>, EngineError> {
        let c = *self
            .source_index
            .get(name)
            .ok_or_else(|| EngineError::UnknownSource(name.to_string()))?;
        Ok(self.source_currents.iter().map(|r| r[c]).collect())
    }

    /// Linear interpolation of a node voltage at `t` (clamped to the span).
    pub fn voltage_at(&self, name: &str, t: T) -> Result<T, EngineError> {
        let c = *self
            .node_index
            .get(name)
            .ok_or_else(|| EngineError::UnknownNode(name.to_string()))?;
        Ok(interpolate(&self.times, |i| self.node_voltages[i][c], t))
    }

    pub fn t_end(&self) -> T {
        *self.times.last().expect("non-empty result")
    }
}

fn ordered(index: &BTreeMap<String, usize>) -> Vec<&str> {
    let mut v: Vec<(&str, usize)> = index.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    v.sort_by_key(|x| x.1);
    v.into_iter().map(|x| x.0).collect()
}

pub(crate) fn interpolate<T: Scalar>(times: &[T], value: impl Fn(usize) -> T, t: T) -> T {
    if t <= times[0] {
        return value(0);
    }
    let last = times.len() - 1;
    if t >= times[last] {
        return value(last);
    }
    let i = times.partition_point(|x| *x <= t);
    let (t0, t1) = (times[i - 1], times[i]);
    let (v0, v1) = (value(i - 1), value(i));
    if t1 == t0 {
        return v1;
    }
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

/// Charge delivered by `source` over `[t0, t1]` (trapezoidal quadrature).
pub fn supply_current_integral<T: Scalar>(
    result: &TransientResult<T>,
    source: &str,
    t0: T,
    t1: T,
) -> Result<T, EngineError> {
    let col = *result
        .source_index
        .get(source)
        .ok_or_else(|| EngineError::UnknownSource(source.to_string()))?;
    let times = &result.times;
    let eps = T::lit(1e-6) * (result.t_end() - times[0]).max(T::min_positive_value());
    if t1 < t0 || t0 < times[0] - eps || t1 > result.t_end() + eps {
        return Err(EngineError::InvalidInterval(t0.as_f64(), t1.as_f64()));
    }
    let cur = |i: usize| result.source_currents[i][col];
    let mut pts: Vec<(T, T)> = vec![(t0, interpolate(times, cur, t0))];
    for (i, &t) in times.iter().enumerate() {
        if t > t0 && t < t1 {
            pts.push((t, cur(i)));
        }
    }
    pts.push((t1, interpolate(times, cur, t1)));
    let half = T::lit(0.5);
    Ok(pts.windows(2).fold(T::zero(), |acc, w| {
        acc + half * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)
    }))
}

struct Mos<T> {
    d: usize,
    g: usize,
    s: usize,
    model: ModelCard<T>,
    w: T,
    l: T,
}

struct Source {
    name: String,
    p: usize,
    n: usize,
    waveform: Waveform,
}

/// Netlist lowered to index form.
struct Circuit<T> {
    node_names: Vec<String>,
    resistors: Vec<(usize, usize, T)>,
    caps: Vec<(usize, usize, T)>,
    mosfets: Vec<Mos<T>>,
    sources: Vec<Source>,
}

impl<T: Scalar> Circuit<T> {
    fn compile(netlist: &Netlist) -> Result<Self, EngineError> {
        netlist.validate()?;
        let node_names = netlist.nodes();
        let idx: BTreeMap<&str, usize> = node_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut c = Circuit {
            node_names: node_names.clone(),
            resistors: vec![],
            caps: vec![],
            mosfets: vec![],
            sources: vec![],
        };
        for d in &netlist.devices {
            match d {
                Device::Resistor { n1, n2, ohms, .. } => {
                    c.resistors
                        .push((idx[n1.as_str()], idx[n2.as_str()], T::lit(1.0 / ohms)))
                }
                Device::Capacitor { n1, n2, farads, .. } => {
                    c.caps
                        .push((idx[n1.as_str()], idx[n2.as_str()], T::lit(*farads)))
                }
                Device::Mosfet {
                    drain,
                    gate,
                    source,
                    model,
                    width_m,
                    length_m,
                    ..
                } => c.mosfets.push(Mos {
                    d: idx[drain.as_str()],
                    g: idx[gate.as_str()],
                    s: idx[source.as_str()],
                    model: netlist.models[model].cast(),
                    w: T::lit(*width_m),
                    l: T::lit(*length_m),
                }),
                Device::VSource {
                    name,
                    pos,
                    neg,
                    waveform,
                } => c.sources.push(Source {
                    name: name.clone(),
                    p: idx[pos.as_str()],
                    n: idx[neg.as_str()],
                    waveform: waveform.clone(),
                }),
            }
        }
        Ok(c)
    }

    fn n_nodes(&self) -> usize {
        self.node_names.len() - 1
    }

    fn dim(&self) -> usize {
        self.n_nodes() + self.sources.len()
    }

    /// Terminal voltage from the unknown vector (ground is node 0).
    #[inline]
    fn v(x: &[T], node: usize) -> T {
        if node == 0 {
            T::zero()
        } else {
            x[node - 1]
        }
    }

    fn mos_op(&self, m: &Mos<T>, x: &[T]) -> OperatingPoint<T> {
        let (vd, vg, vs) = (Self::v(x, m.d), Self::v(x, m.g), Self::v(x, m.s));
        evaluate_mosfet(&m.model, m.w, m.l, vg - vs, vd - vs, T::zero())
    }

    fn total_cap_count(&self) -> usize {
        self.caps.len() + 2 * self.mosfets.len()
    }

    /// Capacitors for the next step: explicit ones, then (cgs, cgd) per MOSFET
    /// evaluated at `x`.
    fn step_caps(&self, x: &[T]) -> Vec<(usize, usize, T)> {
        let mut out = self.caps.clone();
        for m in &self.mosfets {
            let op = self.mos_op(m, x);
            out.push((m.g, m.s, op.cgs));
            out.push((m.g, m.d, op.cgd));
        }
        out
    }
}

/// Companion-model context for one transient step.
struct StepCtx<'a, T> {
    h: T,
    method: Integration,
    caps: &'a [(usize, usize, T)],
    x_prev: &'a [T],
    i_prev: &'a [T],
}

enum Mode<'a, T> {
    Dc { source_scale: T, extra_gmin: T },
    Tran(StepCtx<'a, T>),
}

struct Assembler<T> {
    n: usize,
    a: Vec<T>,
    b: Vec<T>,
}

impl<T: Scalar> Assembler<T> {
    fn new(n: usize) -> Self {
        Assembler {
            n,
            a: vec![T::zero(); n * n],
            b: vec![T::zero(); n],
        }
    }

    fn clear(&mut self) {
        self.a.iter_mut().for_each(|v| *v = T::zero());
        self.b.iter_mut().for_each(|v| *v = T::zero());
    }

    #[inline]
    fn add(&mut self, r: usize, c: usize, v: T) {
        // Node indices are 1-based with 0 = ground; rows >= 1 are MNA rows.
        if r != 0 && c != 0 {
            self.a[(r - 1) * self.n + (c - 1)] += v;
        }
    }

    #[inline]
    fn rhs(&mut self, r: usize, v: T) {
        if r != 0 {
            self.b[r - 1] += v;
        }
    }

    fn conductance(&mut self, p: usize, q: usize, g: T) {
        self.add(p, p, g);
        self.add(q, q, g);
        self.add(p, q, -g);
        self.add(q, p, -g);
    }

    /// Current `i` flowing from `p` to `q` through the element.
    fn current(&mut self, p: usize, q: usize, i: T) {
        self.rhs(p, -i);
        self.rhs(q, i);
    }
}

struct NewtonFail {
    worst: usize,
}

impl<T: Scalar> Circuit<T> {
    fn assemble(
        &self,
        asm: &mut Assembler<T>,
        x: &[T],
        t: f64,
        mode: &Mode<T>,
        opts: &SolverOptions<T>,
    ) {
        asm.clear();
        let nn = self.n_nodes();
        let gmin = match mode {
            Mode::Dc { extra_gmin, .. } => opts.gmin + *extra_gmin,
            Mode::Tran(_) => opts.gmin,
        };
        for i in 1..=nn {
            asm.add(i, i, gmin);
        }
        for &(p, q, g) in &self.resistors {
            asm.conductance(p, q, g);
        }
        let scale = match mode {
            Mode::Dc { source_scale, .. } => *source_scale,
            Mode::Tran(_) => T::one(),
        };
        for (k, s) in self.sources.iter().enumerate() {
            let br = nn + k + 1;
            asm.add(s.p, br, T::one());
            asm.add(s.n, br, -T::one());
            asm.add(br, s.p, T::one());
            asm.add(br, s.n, -T::one());
            asm.rhs(br, scale * T::lit(s.waveform.value_at(t)));
        }
        for m in &self.mosfets {
            let (vd, vg, vs) = (Self::v(x, m.d), Self::v(x, m.g), Self::v(x, m.s));
            let vgs = vg - vs;
            let vds = vd - vs;
            let op = evaluate_mosfet(&m.model, m.w, m.l, vgs, vds, T::zero());
            let (gmv, gdv) = op.terminal_partials();
            let ieq = op.ids - gmv * vgs - gdv * vds;
            asm.add(m.d, m.g, gmv);
            asm.add(m.d, m.s, -(gmv + gdv));
            asm.add(m.d, m.d, gdv);
            asm.add(m.s, m.g, -gmv);
            asm.add(m.s, m.s, gmv + gdv);
            asm.add(m.s, m.d, -gdv);
            asm.current(m.d, m.s, ieq);
        }
        if let Mode::Tran(ctx) = mode {
            let two = T::lit(2.0);
            for (k, &(p, q, c)) in ctx.caps.iter().enumerate() {
                let vprev = Self::v(ctx.x_prev, p) - Self::v(ctx.x_prev, q);
                let (g, ieq) = match ctx.method {
                    Integration::BackwardEuler => {
                        let g = c / ctx.h;
                        (g, -g * vprev)
                    }
                    Integration::Trapezoidal => {
                        let g = two * c / ctx.h;
                        (g, -g * vprev - ctx.i_prev[k])
                    }
                };
                asm.conductance(p, q, g);
                asm.current(p, q, ieq);
            }
        }
    }

    fn newton(
        &self,
        x0: &[T],
        t: f64,
        mode: &Mode<T>,
        opts: &SolverOptions<T>,
        asm: &mut Assembler<T>,
        iters: &mut usize,
    ) -> Result<Vec<T>, NewtonFail> {
        let nn = self.n_nodes();
        let dim = self.dim();
        let mut x = x0.to_vec();
        let mut worst = 0;
        for _ in 0..opts.max_newton_iters {
            *iters += 1;
            self.assemble(asm, &x, t, mode, opts);
            if !linalg::lu_solve(&mut asm.a, &mut asm.b, dim) {
                return Err(NewtonFail { worst });
            }
            let mut converged = true;
            let mut worst_ratio = T::zero();
            for i in 0..dim {
                let new = asm.b[i];
                if !new.is_finite() {
                    return Err(NewtonFail { worst: i });
                }
                let mut delta = new - x[i];
                let abstol = if i < nn { opts.vabstol } else { opts.iabstol };
                let tol = opts.reltol * new.abs().max(x[i].abs()) + abstol;
                let ratio = delta.abs() / tol;
                if ratio > T::one() {
                    converged = false;
                }
                if ratio > worst_ratio {
                    worst_ratio = ratio;
                    worst = i;
                }
                if i < nn && delta.abs() > opts.max_voltage_step {
                    converged = false;
                    delta = opts.max_voltage_step.copysign(delta);
                }
                x[i] += delta;
            }
            if converged {
                return Ok(x);
            }
        }
        Err(NewtonFail { worst })
    }

    fn name_of(&self, unknown: usize) -> String {
        let nn = self.n_nodes();
        if unknown < nn {
            self.node_names[unknown + 1].clone()
        } else {
            format!("I({})", self.sources[unknown - nn].name)
        }
    }

    /// Largest KCL residual over node rows at `x`.
    fn kcl_residual(
        &self,
        x: &[T],
        t: f64,
        mode: &Mode<T>,
        opts: &SolverOptions<T>,
        asm: &mut Assembler<T>,
    ) -> T {
        self.assemble(asm, x, t, mode, opts);
        let dim = self.dim();
        let mut worst = T::zero();
        for r in 0..self.n_nodes() {
            let mut s = -asm.b[r];
            for c in 0..dim {
                s += asm.a[r * dim + c] * x[c];
            }
            worst = worst.max(s.abs());
        }
        worst
    }

    fn dc(
        &self,
        t: f64,
        opts: &SolverOptions<T>,
        iters: &mut usize,
    ) -> Result<Vec<T>, EngineError> {
        let mut asm = Assembler::new(self.dim());
        let zero = vec![T::zero(); self.dim()];
        let plain = Mode::Dc {
            source_scale: T::one(),
            extra_gmin: T::zero(),
        };
        let polish =
            |x: Vec<T>, asm: &mut Assembler<T>, iters: &mut usize| -> Result<Vec<T>, NewtonFail> {
                // Newton is stopped on the update norm; keep iterating until the
                // KCL residual is also within tolerance.
                let mut x = x;
                for _ in 0..5 {
                    if self.kcl_residual(&x, t, &plain, opts, asm) <= opts.iabstol {
                        return Ok(x);
                    }
                    x = self.newton(&x, t, &plain, opts, asm, iters)?;
                }
                if self.kcl_residual(&x, t, &plain, opts, asm) <= opts.iabstol {
                    Ok(x)
                } else {
                    Err(NewtonFail { worst: 0 })
                }
            };

        let mut worst = match self
            .newton(&zero, t, &plain, opts, &mut asm, iters)
            .and_then(|x| polish(x, &mut asm, iters))
        {
            Ok(x) => return Ok(x),
            Err(f) => f.worst,
        };

        // gmin stepping
        let mut x = zero.clone();
        let mut g = T::lit(1e-3);
        let mut ok = true;
        while g > opts.gmin {
            let mode = Mode::Dc {
                source_scale: T::one(),
                extra_gmin: g,
            };
            match self.newton(&x, t, &mode, opts, &mut asm, iters) {
                Ok(nx) => x = nx,
                Err(f) => {
                    worst = f.worst;
                    ok = false;
                    break;
                }
            }
            g = g * T::lit(0.1);
        }
        if ok {
            if let Ok(x) = self
                .newton(&x, t, &plain, opts, &mut asm, iters)
                .and_then(|x| polish(x, &mut asm, iters))
            {
                return Ok(x);
            }
        }

        // source stepping
        let mut x = zero;
        let mut scale = T::zero();
        let mut step = T::lit(0.1);
        while scale < T::one() {
            let next = (scale + step).min(T::one());
            let mode = Mode::Dc {
                source_scale: next,
                extra_gmin: T::zero(),
            };
            match self.newton(&x, t, &mode, opts, &mut asm, iters) {
                Ok(nx) => {
                    x = nx;
                    scale = next;
                    step = (step * T::lit(1.5)).min(T::lit(0.25));
                }
                Err(f) => {
                    worst = f.worst;
                    step = step * T::lit(0.25);
                    if step < T::lit(1e-6) {
                        return Err(EngineError::NonConvergence {
                            time: None,
                            node: self.name_of(worst),
                        });
                    }
                }
            }
        }
        polish(x, &mut asm, iters).map_err(|f| EngineError::NonConvergence {
            time: None,
            node: self.name_of(f.worst.max(worst).min(self.dim() - 1)),
        })
    }

    fn record(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let nn = self.n_nodes();
        let mut v = Vec::with_capacity(nn + 1);
        v.push(T::zero());
        v.extend_from_slice(&x[..nn]);
        let i = x[nn..].iter().map(|j| -*j).collect();
        (v, i)
    }
}

/// DC operating point: capacitors open, sources at their t=0 values.
/// Returns node voltages keyed by node name (ground included).
pub fn dc_operating_point<T: Scalar>(
    netlist: &Netlist,
    options: &SolverOptions<T>,
) -> Result<BTreeMap<String, T>, EngineError> {
    options.validate()?;
    let c = Circuit::<T>::compile(netlist)?;
    let mut iters = 0;
    let x = c.dc(0.0, options, &mut iters)?;
    let mut out = BTreeMap::new();
    out.insert(GROUND.to_string(), T::zero());
    for (i, name) in c.node_names.iter().enumerate().skip(1) {
        out.insert(name.clone(), x[i - 1]);
    }
    Ok(out)
}

/// Transient analysis over the netlist's `.tran` span.
pub fn transient<T: Scalar>(
    netlist: &Netlist,
    options: &SolverOptions<T>,
) -> Result<TransientResult<T>, EngineError> {
    transient_from(netlist, options, &[])
}

/// Transient analysis whose initial state is the DC operating point with the
/// listed node voltages overridden.
pub fn transient_from<T: Scalar>(
    netlist: &Netlist,
    options: &SolverOptions<T>,
    initial: &[(&str, T)],
) -> Result<TransientResult<T>, EngineError> {
    options.validate()?;
    let (tstop, tstep) = netlist.tran().ok_or(EngineError::NoTranDirective)?;
    let c = Circuit::<T>::compile(netlist)?;
    let mut stats = RunStats::default();
    let mut x = c.dc(0.0, options, &mut stats.newton_iterations)?;
    for (name, v) in initial {
        let i = c
            .node_names
            .iter()
            .position(|n| n == name)
            .filter(|i| *i > 0)
            .ok_or_else(|| EngineError::UnknownNode(name.to_string()))?;
        x[i - 1] = *v;
    }

    let h_nom = options.dt_max.as_f64().min(tstep);
    let mut bps: Vec<f64> = c
        .sources
        .iter()
        .flat_map(|s| s.waveform.breakpoints(tstop))
        .collect();
    bps.push(tstop);
    bps.sort_by(f64::total_cmp);
    bps.dedup();

    let node_index = c
        .node_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();
    let source_index = c
        .sources
        .iter()
        .enumerate()
        .map(|(i, s)| (s.name.clone(), i))
        .collect();
    let mut result = TransientResult {
        times: vec![T::zero()],
        node_voltages: vec![],
        source_currents: vec![],
        node_index,
        source_index,
        stats,
    };
    let (v0, i0) = c.record(&x);
    result.node_voltages.push(v0);
    result.source_currents.push(i0);

    let mut asm = Assembler::new(c.dim());
    let mut i_prev = vec![T::zero(); c.total_cap_count()];
    let mut t = 0.0f64;
    let mut bp_i = 0;
    // First step and any step leaving a breakpoint use backward Euler.
    let mut at_breakpoint = true;
    let snap = h_nom * 1e-6;

    while t < tstop - snap {
        while bp_i < bps.len() && bps[bp_i] <= t + snap {
            bp_i += 1;
        }
        let next_bp = bps.get(bp_i).copied().unwrap_or(tstop);
        let caps = c.step_caps(&x);
        let mut h = h_nom;
        loop {
            let (t_new, lands) = if t + h >= next_bp - snap {
                (next_bp, true)
            } else {
                (t + h, false)
            };
            let hh = T::lit(t_new - t);
            let preferred = if at_breakpoint {
                Integration::BackwardEuler
            } else {
                options.integration
            };
            let mut attempt = |method: Integration, stats: &mut RunStats| {
                let ctx = StepCtx {
                    h: hh,
                    method,
                    caps: &caps,
                    x_prev: &x,
                    i_prev: &i_prev,
                };
                c.newton(
                    &x,
                    t_new,
                    &Mode::Tran(ctx),
                    options,
                    &mut asm,
                    &mut stats.newton_iterations,
                )
                .map(|xn| (xn, method))
            };
            let mut outcome = attempt(preferred, &mut result.stats);
            if outcome.is_err() && preferred == Integration::Trapezoidal {
                result.stats.be_fallbacks += 1;
                outcome = attempt(Integration::BackwardEuler, &mut result.stats);
            }
            match outcome {
                Ok((xn, method)) => {
                    // Update capacitor currents for the trapezoidal history.
                    let two = T::lit(2.0);
                    for (k, &(p, q, cap)) in caps.iter().enumerate() {
                        let dv_new = Circuit::v(&xn, p) - Circuit::v(&xn, q);
                        let dv_old = Circuit::v(&x, p) - Circuit::v(&x, q);
                        i_prev[k] = match method {
                            Integration::BackwardEuler => cap / hh * (dv_new - dv_old),
                            Integration::Trapezoidal => {
                                two * cap / hh * (dv_new - dv_old) - i_prev[k]
                            }
                        };
                    }
                    x = xn;
                    t = t_new;
                    at_breakpoint = lands;
                    result.stats.steps += 1;
                    result.times.push(T::lit(t));
                    let (v, i) = c.record(&x);
                    result.node_voltages.push(v);
                    result.source_currents.push(i);
                    break;
                }
                Err(fail) => {
                    h *= 0.5;
                    result.stats.step_halvings += 1;
                    if h < h_nom * 1e-6 {
                        let _ = fail;
                        return Err(EngineError::StepUnderflow { time: t, dt: h });
                    }
                }
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse;

    #[test]
    fn divider_midpoint() {
        let n = parse("V1 in 0 DC 1.8\nR1 in mid 1k\nR2 mid 0 1k\n").unwrap();
        let op = dc_operating_point::<f64>(&n, &SolverOptions::default()).unwrap();
        assert!((op["mid"] - 0.9).abs() < 1e-9);
        assert_eq!(op["0"], 0.0);
    }

    #[test]
    fn no_tran_is_error() {
        let n = parse("V1 in 0 DC 1\nR1 in 0 1k\n").unwrap();
        assert_eq!(
            transient::<f64>(&n, &SolverOptions::default()).unwrap_err(),
            EngineError::NoTranDirective
        );
    }

    #[test]
    fn floating_capacitor_node_leaks_through_gmin() {
        // `top` only connects through a capacitor; gmin keeps the matrix regular.
        let n = parse("V1 in 0 PWL(0 0 1n 1)\nC1 in top 1p\nC2 top 0 1p\n.tran 10p 2n\n").unwrap();
        let r = transient::<f64>(&n, &SolverOptions::default()).unwrap();
        let top = r.node("top").unwrap();
        // Capacitive divider halves the step.
        assert!((top.last().unwrap() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn breakpoints_are_hit_exactly() {
        let n =
            parse("V1 in 0 PULSE(0 1 0.333n 0.1n 0.1n 1.017n 3n)\nR1 in 0 1k\n.tran 0.07n 6n\n")
                .unwrap();
        let r = transient::<f64>(&n, &SolverOptions::default()).unwrap();
        let w = match &n.devices[0] {
            Device::VSource { waveform, .. } => waveform.clone(),
            _ => unreachable!(),
        };
        for bp in w.breakpoints(6e-9) {
            assert!(r.times.contains(&bp), "missing breakpoint {bp:e}");
        }
        assert!(r.times.windows(2).all(|w| w[1] > w[0]));
        assert!(r
            .times
            .windows(2)
            .all(|w| w[1] - w[0] <= 0.07e-9 * (1.0 + 1e-9)));
    }

    #[test]
    fn charge_integral_cases() {
        let mut r = TransientResult::<f64> {
            times: vec![0.0, 1e-9, 2e-9],
            node_voltages: vec![vec![0.0]; 3],
            source_currents: vec![vec![0.0], vec![1e-6], vec![0.0]],
            node_index: [("0".to_string(), 0)].into_iter().collect(),
            source_index: [("V1".to_string(), 0)].into_iter().collect(),
            stats: RunStats::default(),
        };
        let q = supply_current_integral(&r, "V1", 0.0, 2e-9).unwrap();
        assert!((q - 1e-15).abs() < 1e-27);
        r.source_currents = vec![vec![10e-6]; 3];
        r.times = vec![0.0, 5e-9, 10e-9];
        let q = supply_current_integral(&r, "V1", 0.0, 10e-9).unwrap();
        assert!((q - 1e-13).abs() < 1e-25);
        r.source_currents = vec![vec![0.0]; 3];
        assert_eq!(supply_current_integral(&r, "V1", 0.0, 10e-9).unwrap(), 0.0);
        assert!(matches!(
            supply_current_integral(&r, "VX", 0.0, 1e-9),
            Err(EngineError::UnknownSource(_))
        ));
        assert!(matches!(
            supply_current_integral(&r, "V1", 5e-9, 1e-9),
            Err(EngineError::InvalidInterval(..))
        ));
    }
}
