//! `latchsim` command-line tool.
//!
//! Exit codes: 0 on success, 1 on runtime or I/O failure, 2 on usage error.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use latchsim::analytic::{self, AnalyticError, DelayModelInputs, OffsetModelInputs};
use latchsim::engine::{self, EngineError, Integration, SolverOptions};
use latchsim::metrics::{
    characterize_comparator, characterize_netlist, ComparatorMetrics, Metric, TestbenchSpec,
};
use latchsim::netlist::topology::{generate_topology, generate_with_testbench};
use latchsim::netlist::value::parse_value;
use latchsim::netlist::{self, Netlist, TopologyId};
use latchsim::report::{BenchmarkReport, SimulatedRow};
use latchsim::variation::{self, Corner, MismatchSpec, VariationError};

use config::Config;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "latchsim",
    version,
    about = "Dynamic-latch comparator simulator and characterization tool"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Largest transient step, e.g. 10p.
    #[arg(long, global = true, value_parser = parse_time)]
    dt_max: Option<f64>,
    #[arg(long, global = true, value_enum)]
    integration: Option<IntegrationArg>,
    /// Output file (default: standard output).
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// TOML file with defaults for the flags above and a [bench] table.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IntegrationArg {
    Trap,
    Be,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Topology {
    Csdlc,
    Msadlc,
    Design1,
    Design2,
    Design3,
}

impl Topology {
    fn id(self) -> TopologyId {
        match self {
            Topology::Csdlc => TopologyId::Csdlc,
            Topology::Msadlc => TopologyId::Msadlc,
            Topology::Design1 => TopologyId::Design1Cascode,
            Topology::Design2 => TopologyId::Design2PseudoNmos,
            Topology::Design3 => TopologyId::Design3CascodePseudoNmos,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a topology's netlist.
    Gen {
        #[arg(value_enum)]
        topology: Topology,
        /// Add supply, clock and input sources plus a .tran card.
        #[arg(long)]
        with_testbench: bool,
    },
    /// Run the .tran analysis of a netlist file and write waveforms as CSV.
    Tran { netlist: PathBuf },
    /// Characterize a topology, or a comparator netlist file without sources.
    Measure {
        /// Topology name or netlist path.
        target: String,
        /// Restrict to these metrics (repeatable).
        #[arg(long, value_parser = parse_metric)]
        metric: Vec<Metric>,
    },
    /// Benchmark table: simulated rows beside the published figures.
    Report {
        /// Topologies to simulate (default: all five).
        #[arg(value_enum)]
        topologies: Vec<Topology>,
    },
    /// Evaluate the closed-form delay, power and offset models.
    Analytic(AnalyticArgs),
    /// Monte-Carlo mismatch analysis of one metric.
    Mc {
        #[arg(value_enum)]
        topology: Topology,
        #[arg(long, default_value = "offset_v", value_parser = parse_metric)]
        metric: Metric,
        /// Number of samples.
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Threshold mismatch coefficient in V*m.
        #[arg(long, default_value = "5n", value_parser = parse_nonneg)]
        a_vt: f64,
        /// Current-factor mismatch coefficient in m.
        #[arg(long, default_value = "10n", value_parser = parse_nonneg)]
        a_beta: f64,
        /// Perturb only these devices, comma separated.
        #[arg(long, value_delimiter = ',')]
        devices: Option<Vec<String>>,
        /// Also write the JSON summary to this path.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Include this many histogram bins in the JSON summary.
        #[arg(long)]
        histogram: Option<usize>,
    },
    /// Characterize at the TT, FF, SS, FS and SF corners.
    Corners {
        #[arg(value_enum)]
        topology: Topology,
    },
    /// Characterize over a list of parameter values.
    Sweep {
        #[arg(value_enum)]
        topology: Topology,
        /// `M5.W`, `nch.VT0`, `bench.vdd`, ...
        #[arg(long)]
        param: String,
        /// Comma-separated values with optional suffixes.
        #[arg(long, value_delimiter = ',', value_parser = parse_number)]
        values: Vec<f64>,
        #[arg(long, default_value = "avg_delay_s", value_parser = parse_metric)]
        metric: Vec<Metric>,
    },
}

#[derive(Debug, Args)]
struct AnalyticArgs {
    /// Output load capacitance, F.
    #[arg(long, default_value = "10f", value_parser = parse_number)]
    c_load: f64,
    /// PMOS threshold magnitude, V.
    #[arg(long, default_value = "0.45", value_parser = parse_number)]
    v_thp: f64,
    /// Tail current, A.
    #[arg(long, default_value = "100u", value_parser = parse_number)]
    i_tail: f64,
    /// Effective latch transconductance, S.
    #[arg(long, default_value = "200u", value_parser = parse_number)]
    gm_eff: f64,
    /// Supply, V.
    #[arg(long, default_value = "1.8", value_parser = parse_number)]
    vdd: f64,
    /// Input-pair current factor, A/V^2.
    #[arg(long, default_value = "680u", value_parser = parse_number)]
    beta: f64,
    /// Input difference, V.
    #[arg(long, default_value = "10m", value_parser = parse_number)]
    dv_in: f64,
    /// Supply charge per clock period, C.
    #[arg(long, default_value = "100f", value_parser = parse_number)]
    charge: f64,
    /// Clock frequency, Hz.
    #[arg(long, default_value = "100meg", value_parser = parse_number)]
    f_clk: f64,
    /// Input-pair threshold mismatch, V.
    #[arg(long, default_value = "2m", value_parser = parse_number)]
    d_vt: f64,
    /// Input-pair overdrive VGS - VT, V.
    #[arg(long, default_value = "0.2", value_parser = parse_number)]
    vov: f64,
    /// Relative load mismatch.
    #[arg(long, default_value = "0.02", value_parser = parse_number)]
    d_rl: f64,
    /// Relative current-factor mismatch.
    #[arg(long, default_value = "0.01", value_parser = parse_number)]
    d_beta: f64,
}

fn parse_number(s: &str) -> Result<f64, String> {
    parse_value(s).ok_or_else(|| format!("not a number: {s:?}"))
}

fn parse_time(s: &str) -> Result<f64, String> {
    let v = parse_number(s)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive: {s:?}"))
    }
}

fn parse_nonneg(s: &str) -> Result<f64, String> {
    let v = parse_number(s)?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be non-negative: {s:?}"))
    }
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    Metric::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Metric::ALL.iter().map(|m| m.key()).collect();
        format!("unknown metric {s:?}; expected one of {}", names.join(", "))
    })
}

/// Global settings after merging flags over the config file.
struct Settings {
    seed: u64,
    options: SolverOptions<f64>,
    bench: TestbenchSpec,
    format: Option<Format>,
    output: Option<PathBuf>,
}

impl Settings {
    fn resolve(g: &Global) -> CliResult<Settings> {
        let cfg = match &g.config {
            Some(p) => Config::load(p).map_err(CliError::Usage)?,
            None => Config::default(),
        };
        let mut options = SolverOptions::<f64>::default();
        if let Some(dt) = g.dt_max.or(cfg.dt_max().map_err(CliError::Usage)?) {
            options.dt_max = dt;
        }
        let integration = match (g.integration, cfg.integration.as_deref()) {
            (Some(i), _) => Some(i),
            (None, Some(s)) => Some(
                IntegrationArg::from_str(s, true)
                    .map_err(|_| CliError::Usage(format!("config integration: {s:?}")))?,
            ),
            (None, None) => None,
        };
        if let Some(i) = integration {
            options.integration = match i {
                IntegrationArg::Trap => Integration::Trapezoidal,
                IntegrationArg::Be => Integration::BackwardEuler,
            };
        }
        options
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let format = match (g.format, cfg.format.as_deref()) {
            (Some(f), _) => Some(f),
            (None, Some(s)) => Some(
                Format::from_str(s, true)
                    .map_err(|_| CliError::Usage(format!("config format: {s:?}")))?,
            ),
            (None, None) => None,
        };
        let bench = cfg.bench.unwrap_or_default();
        bench
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(Settings {
            seed: g.seed.or(cfg.seed).unwrap_or(0),
            options,
            bench,
            format,
            output: g.output.clone(),
        })
    }

    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn emit(&self, text: &str) -> CliResult {
        write_to(self.output.as_deref(), text)
    }
}

fn write_to(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(runtime)
        }
    }
}

fn to_json(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Usage(m) | CliError::Runtime(m)) = &e;
            eprintln!("error: {m}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> CliResult {
    let s = Settings::resolve(&cli.global)?;
    match cli.command {
        Command::Gen {
            topology,
            with_testbench,
        } => cmd_gen(&s, topology, with_testbench),
        Command::Tran { netlist } => cmd_tran(&s, &netlist),
        Command::Measure { target, metric } => cmd_measure(&s, &target, &metric),
        Command::Report { topologies } => cmd_report(&s, &topologies),
        Command::Analytic(a) => cmd_analytic(&s, &a),
        Command::Mc {
            topology,
            metric,
            n,
            a_vt,
            a_beta,
            devices,
            summary,
            histogram,
        } => {
            let spec = MismatchSpec {
                a_vt,
                a_beta,
                seed: s.seed,
                n_samples: n,
                devices,
            };
            cmd_mc(&s, topology, metric, &spec, summary.as_deref(), histogram)
        }
        Command::Corners { topology } => cmd_corners(&s, topology),
        Command::Sweep {
            topology,
            param,
            values,
            metric,
        } => cmd_sweep(&s, topology, &param, &values, &metric),
    }
}

fn cmd_gen(s: &Settings, topology: Topology, with_testbench: bool) -> CliResult {
    let n = if with_testbench {
        generate_with_testbench(topology.id(), &[])
    } else {
        generate_topology(topology.id(), &[])
    }
    .map_err(runtime)?;
    s.emit(&netlist::print(&n))
}

fn read_netlist(path: &Path) -> CliResult<Netlist> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    netlist::parse(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn cmd_tran(s: &Settings, path: &Path) -> CliResult {
    if matches!(s.format, Some(Format::Table | Format::Json)) {
        return Err(CliError::Usage("tran writes CSV only".into()));
    }
    let n = read_netlist(path)?;
    let start = Instant::now();
    let r = engine::transient(&n, &s.options).map_err(|e| match e {
        EngineError::NoTranDirective => CliError::Usage(format!("{}: {e}", path.display())),
        e => runtime(e),
    })?;
    let wall = start.elapsed().as_secs_f64();
    let mut buf = Vec::new();
    engine::write_csv(&r, &mut buf).map_err(runtime)?;
    s.emit(std::str::from_utf8(&buf).expect("ascii csv"))?;
    eprintln!(
        "tran: {} steps, {} Newton iterations, {} BE fallbacks, {:.3} s",
        r.stats.steps, r.stats.newton_iterations, r.stats.be_fallbacks, wall
    );
    Ok(())
}

/// Metric values as JSON, SI fields plus a `display` block in human units.
fn metrics_json(topology: &str, values: &[(Metric, Option<f64>)]) -> Value {
    let mut obj = Map::new();
    obj.insert("topology".into(), json!(topology));
    let mut display = Map::new();
    for (m, v) in values {
        obj.insert(m.key().into(), json!(v));
        if let Some(v) = v {
            let (unit, scale) = m.unit();
            display.insert(m.key().into(), json!({ "value": v * scale, "unit": unit }));
        }
    }
    obj.insert("display".into(), Value::Object(display));
    Value::Object(obj)
}

fn full_values(m: &ComparatorMetrics) -> Vec<(Metric, Option<f64>)> {
    Metric::ALL.iter().map(|k| (*k, Some(m.get(*k)))).collect()
}

fn render_metrics(format: Format, topology: &str, values: &[(Metric, Option<f64>)]) -> String {
    match format {
        Format::Json => to_json(&metrics_json(topology, values)),
        Format::Csv => {
            let keys: Vec<&str> = values.iter().map(|(m, _)| m.key()).collect();
            let vals: Vec<String> = values
                .iter()
                .map(|(_, v)| v.map(|x| format!("{x:e}")).unwrap_or_default())
                .collect();
            format!(
                "topology,{}\n{topology},{}\n",
                keys.join(","),
                vals.join(",")
            )
        }
        Format::Table => {
            let mut out = format!("topology             {topology}\n");
            for (m, v) in values {
                let (unit, scale) = m.unit();
                let shown = v.map_or("-".to_string(), |x| format!("{:.4} {unit}", x * scale));
                out.push_str(&format!("{:<20} {shown}\n", m.key()));
            }
            out
        }
    }
}

fn cmd_measure(s: &Settings, target: &str, selection: &[Metric]) -> CliResult {
    let (label, n) = match Topology::from_str(target, true) {
        Ok(t) => (
            t.id().key().to_string(),
            generate_topology(t.id(), &[]).map_err(runtime)?,
        ),
        Err(_) => {
            let p = Path::new(target);
            if !p.exists() {
                return Err(CliError::Usage(format!(
                    "{target:?} is neither a topology nor a file"
                )));
            }
            (target.to_string(), read_netlist(p)?)
        }
    };
    let values = if selection.is_empty() {
        let m = characterize_comparator(&label, &n, &s.bench, &s.options).map_err(runtime)?;
        full_values(&m)
    } else {
        let p = characterize_netlist(&n, &s.bench, &s.options, selection).map_err(runtime)?;
        Metric::ALL
            .iter()
            .filter(|m| selection.contains(m))
            .map(|m| {
                let v = p.get(*m);
                (
                    *m,
                    if *m == Metric::Offset {
                        v.map(f64::abs)
                    } else {
                        v
                    },
                )
            })
            .collect()
    };
    s.emit(&render_metrics(s.format_or(Format::Table), &label, &values))
}

fn cmd_report(s: &Settings, topologies: &[Topology]) -> CliResult {
    let ids: Vec<TopologyId> = if topologies.is_empty() {
        TopologyId::ALL.to_vec()
    } else {
        topologies.iter().map(|t| t.id()).collect()
    };
    let rows = ids
        .into_iter()
        .map(
            |id| match latchsim::metrics::characterize(id, &s.bench, &s.options) {
                Ok(m) => SimulatedRow {
                    topology: id,
                    metrics: Some(m),
                    error: None,
                },
                Err(e) => {
                    eprintln!("warning: {}: {e}", id.key());
                    SimulatedRow {
                        topology: id,
                        metrics: None,
                        error: Some(e.to_string()),
                    }
                }
            },
        )
        .collect();
    let r = BenchmarkReport::new(rows);
    let text = match s.format_or(Format::Table) {
        Format::Table => r.render_table(),
        Format::Json => to_json(&r),
        Format::Csv => r.render_csv(),
    };
    s.emit(&text)
}

fn analytic_flag(e: &AnalyticError) -> String {
    match e {
        AnalyticError::NonPositive { name, .. } => format!("--{}", name.replace('_', "-")),
        AnalyticError::InputExceedsSupply { .. } | AnalyticError::DegenerateImbalance(_) => {
            "--dv-in".into()
        }
        AnalyticError::NegativeOverdrive(_) => "--vov".into(),
    }
}

fn cmd_analytic(s: &Settings, a: &AnalyticArgs) -> CliResult {
    let usage = |e: AnalyticError| CliError::Usage(format!("{}: {e}", analytic_flag(&e)));
    let inp = DelayModelInputs {
        c_load: a.c_load,
        v_thp: a.v_thp,
        i_tail: a.i_tail,
        gm_eff: a.gm_eff,
        vdd: a.vdd,
        beta: a.beta,
        dv_in: a.dv_in,
    };
    let b = inp.breakdown().map_err(usage)?;
    let p = analytic::average_power(a.charge, a.vdd, a.f_clk).map_err(|e| match e {
        AnalyticError::NonPositive { .. } => CliError::Usage(format!("--f-clk: {e}")),
        e => usage(e),
    })?;
    let vos = analytic::offset_voltage(&OffsetModelInputs {
        d_vt: a.d_vt,
        vgs_minus_vt: a.vov,
        d_rl_over_r: a.d_rl,
        d_beta_over_beta: a.d_beta,
    })
    .map_err(usage)?;
    let rows = [
        ("t0_s", b.t0, "ps", 1e12),
        ("dv0_v", b.dv0, "mV", 1e3),
        ("t_latch_s", b.t_latch, "ps", 1e12),
        ("t_total_s", b.total, "ps", 1e12),
        ("p_avg_w", p, "uW", 1e6),
        ("v_os_v", vos, "mV", 1e3),
    ];
    let text = match s.format_or(Format::Table) {
        Format::Json => {
            let obj: Map<String, Value> = rows
                .iter()
                .map(|(k, v, _, _)| (k.to_string(), json!(v)))
                .collect();
            to_json(&obj)
        }
        Format::Csv => {
            let keys: Vec<&str> = rows.iter().map(|r| r.0).collect();
            let vals: Vec<String> = rows.iter().map(|r| format!("{:e}", r.1)).collect();
            format!("{}\n{}\n", keys.join(","), vals.join(","))
        }
        Format::Table => rows
            .iter()
            .map(|(k, v, unit, scale)| format!("{k:<10} {:.4} {unit}\n", v * scale))
            .collect(),
    };
    s.emit(&text)
}

fn variation_error(e: VariationError) -> CliError {
    match e {
        VariationError::UnknownParameter(_) | VariationError::InvalidSpec(_) => {
            CliError::Usage(e.to_string())
        }
        e => runtime(e),
    }
}

fn cmd_mc(
    s: &Settings,
    topology: Topology,
    metric: Metric,
    spec: &MismatchSpec,
    summary_path: Option<&Path>,
    bins: Option<usize>,
) -> CliResult {
    let n = generate_topology(topology.id(), &[]).map_err(runtime)?;
    if let Some(devs) = &spec.devices {
        for d in devs {
            if n.device(d).is_none() {
                return Err(CliError::Usage(format!(
                    "--devices: no device {d} in {}",
                    topology.id().key()
                )));
            }
        }
    }
    let d =
        variation::monte_carlo(&n, &s.bench, &s.options, spec, metric).map_err(variation_error)?;
    if !d.failures.is_empty() {
        eprintln!(
            "warning: {} of {} samples failed",
            d.failures.len(),
            spec.n_samples
        );
    }
    let summary = {
        let mut v = serde_json::to_value(d.summary()).expect("serializable");
        v["seed"] = json!(spec.seed);
        v["failures"] = json!(d
            .failures
            .iter()
            .map(|(i, e)| json!({ "sample_index": i, "error": e }))
            .collect::<Vec<_>>());
        if let Some(b) = bins {
            v["histogram"] = serde_json::to_value(d.histogram(b)).expect("serializable");
        }
        to_json(&v)
    };
    if let Some(p) = summary_path {
        write_to(Some(p), &summary)?;
    }
    let text = match s.format_or(Format::Csv) {
        Format::Json => summary,
        Format::Csv => {
            let mut buf = Vec::new();
            d.write_csv(&mut buf).map_err(runtime)?;
            String::from_utf8(buf).expect("ascii csv")
        }
        Format::Table => {
            let (unit, scale) = metric.unit();
            format!(
                "metric   {}\nn        {}\nn_failed {}\nmean     {:.4} {unit}\nstd      {:.4} {unit}\nmin      {:.4} {unit}\nmax      {:.4} {unit}\n",
                metric.key(),
                d.samples.len(),
                d.failures.len(),
                d.mean * scale,
                d.std * scale,
                d.min * scale,
                d.max * scale
            )
        }
    };
    s.emit(&text)
}

fn cmd_corners(s: &Settings, topology: Topology) -> CliResult {
    let n = generate_topology(topology.id(), &[]).map_err(runtime)?;
    let rows = variation::corners(
        topology.id().key(),
        &n,
        &s.bench,
        &s.options,
        &Corner::standard_set(),
    )
    .map_err(variation_error)?;
    let text = match s.format_or(Format::Table) {
        Format::Json => to_json(&rows),
        Format::Csv => {
            let mut out = String::from(
                "corner,avg_delay_s,avg_power_w,pdp_j,offset_v,clock_feedthrough_v,kickback_v\n",
            );
            for r in &rows {
                let vals: Vec<String> = Metric::ALL
                    .iter()
                    .map(|m| format!("{:e}", r.metrics.get(*m)))
                    .collect();
                out.push_str(&format!("{},{}\n", r.corner.as_str(), vals.join(",")));
            }
            out
        }
        Format::Table => {
            let mut out = format!(
                "{:<6} {:>11} {:>11} {:>9} {:>11} {:>10} {:>10}\n",
                "corner", "delay(ps)", "power(uW)", "PDP(fJ)", "offset(mV)", "clk-ft(V)", "kick(V)"
            );
            for r in &rows {
                let m = &r.metrics;
                out.push_str(&format!(
                    "{:<6} {:>11.2} {:>11.3} {:>9.4} {:>11.3} {:>10.4} {:>10.4}\n",
                    r.corner.as_str(),
                    m.avg_delay_s * 1e12,
                    m.avg_power_w * 1e6,
                    m.pdp_j * 1e15,
                    m.offset_v * 1e3,
                    m.clock_feedthrough_v,
                    m.kickback_v
                ));
            }
            out
        }
    };
    s.emit(&text)
}

fn cmd_sweep(
    s: &Settings,
    topology: Topology,
    param: &str,
    values: &[f64],
    metrics: &[Metric],
) -> CliResult {
    let n = generate_topology(topology.id(), &[]).map_err(runtime)?;
    let points = variation::sweep(&n, &s.bench, &s.options, param, values, metrics)
        .map_err(variation_error)?;
    let text = match s.format_or(Format::Csv) {
        Format::Json => {
            let rows: Vec<Value> = points
                .iter()
                .map(|p| {
                    let mut o = Map::new();
                    o.insert("value".into(), json!(p.value));
                    for m in metrics {
                        o.insert(m.key().into(), json!(p.metrics.get(*m)));
                    }
                    Value::Object(o)
                })
                .collect();
            to_json(&json!({ "param": param, "points": rows }))
        }
        Format::Csv | Format::Table => {
            let keys: Vec<&str> = metrics.iter().map(|m| m.key()).collect();
            let mut out = format!("value,{}\n", keys.join(","));
            for p in &points {
                let vals: Vec<String> = metrics
                    .iter()
                    .map(|m| {
                        p.metrics
                            .get(*m)
                            .map(|v| format!("{v:.16e}"))
                            .unwrap_or_default()
                    })
                    .collect();
                out.push_str(&format!("{:e},{}\n", p.value, vals.join(",")));
            }
            out
        }
    };
    s.emit(&text)
}
