use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use latchsim::netlist::topology::generate_with_testbench;
use latchsim::netlist::{parse, Device, TopologyId};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latchsim"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn schema_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(name)
}

fn assert_valid(schema: &str, doc: &str) {
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(schema_path(schema)).unwrap()).unwrap();
    let doc: Value = serde_json::from_str(doc).expect("output is JSON");
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    if let Err(errors) = compiled.validate(&doc) {
        let msgs: Vec<String> = errors
            .map(|e| format!("{} at {}", e, e.instance_path))
            .collect();
        panic!("schema violations: {msgs:?}");
    };
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn gen_unknown_topology_is_usage_error() {
    let o = run(&["gen", "bogus"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("possible values"));
}

#[test]
fn gen_with_testbench_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d3.cir");
    let o = run(&[
        "gen",
        "design3",
        "--with-testbench",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    let expected = generate_with_testbench(TopologyId::Design3CascodePseudoNmos, &[]).unwrap();
    assert_eq!(parse(&text).unwrap(), expected);
}

#[test]
fn gen_bare_topology_has_no_sources() {
    let o = run(&["gen", "msadlc"]);
    assert_eq!(code(&o), 0);
    let n = parse(&stdout(&o)).unwrap();
    assert!(n
        .devices
        .iter()
        .all(|d| !matches!(d, Device::VSource { .. })));
    assert!(n.tran().is_none());
}

#[test]
fn gen_unwritable_path_is_runtime_error() {
    let o = run(&["gen", "msadlc", "-o", "/nonexistent-dir/x.cir"]);
    assert_eq!(code(&o), 1);
}

const RC: &str = "* RC step, tau = 1 us\nV1 in 0 PULSE(0 1 0 1p 1p 1 2)\nR1 in out 1k\nC1 out 0 1n\n.tran 100n 2u\n";

/// `v(out)` at `t` from the CSV, linearly interpolated.
fn v_out_at(csv: &str, t: f64) -> f64 {
    let rows = csv_rows(csv);
    let col = rows[0].iter().position(|h| h == "out").unwrap();
    let pts: Vec<(f64, f64)> = rows[1..]
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[col].parse().unwrap()))
        .collect();
    let k = pts.iter().position(|p| p.0 >= t).unwrap();
    let (a, b) = (pts[k - 1], pts[k]);
    a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
}

fn tran_rc(extra: &[&str]) -> String {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rc.cir");
    std::fs::write(&path, RC).unwrap();
    let mut args = vec!["tran", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("steps"));
    stdout(&o)
}

#[test]
fn tran_rc_matches_exponential() {
    let csv = tran_rc(&["--dt-max", "10n"]);
    assert!(csv.starts_with("time_s,in,out,I(V1)\n"));
    let exact = 1.0 - (-1.0f64).exp();
    let v = v_out_at(&csv, 1e-6);
    assert!(((v - exact) / exact).abs() < 1e-3, "{v}");
}

#[test]
fn tran_backward_euler_is_first_order() {
    let exact = 1.0 - (-1.0f64).exp();
    let err = |dt: &str, method: &str| {
        (v_out_at(&tran_rc(&["--dt-max", dt, "--integration", method]), 1e-6) - exact).abs()
    };
    let be_ratio = err("10n", "be") / err("5n", "be");
    assert!((be_ratio - 2.0).abs() < 0.3, "{be_ratio}");
    let trap_ratio = err("10n", "trap") / err("5n", "trap");
    assert!((trap_ratio - 4.0).abs() < 0.6, "{trap_ratio}");
    assert!(err("10n", "be") > 10.0 * err("10n", "trap"));
}

#[test]
fn tran_without_directive_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("op.cir");
    std::fs::write(&path, "V1 a 0 DC 1\nR1 a 0 1k\n").unwrap();
    let o = run(&["tran", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains(".tran"));
}

#[test]
fn tran_parse_error_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cir");
    std::fs::write(&path, "R1 a\n").unwrap();
    let o = run(&["tran", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn analytic_defaults_and_schema() {
    let o = run(&["analytic", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_valid("analytic.schema.json", &text);
    let v: Value = serde_json::from_str(&text).unwrap();
    let total = v["t_total_s"].as_f64().unwrap();
    assert!((total - 272.4e-12).abs() < 0.1e-12, "{total:e}");
    let table = stdout(&run(&["analytic"]));
    assert!(table.contains("t_total_s") && table.contains("ps"));
}

#[test]
fn analytic_domain_error_names_flag() {
    let o = run(&["analytic", "--dv-in", "0"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--dv-in"));
    let o = run(&["analytic", "--i-tail=-1u"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--i-tail"));
}

#[test]
fn analytic_help_lists_flags() {
    let o = run(&["analytic", "--help"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for flag in [
        "--c-load", "--v-thp", "--i-tail", "--gm-eff", "--vdd", "--beta", "--dv-in", "--charge",
        "--f-clk", "--d-vt", "--vov", "--d-rl", "--d-beta",
    ] {
        assert!(text.contains(flag), "{flag}");
    }
}

#[test]
fn measure_json_validates() {
    let o = run(&[
        "measure",
        "msadlc",
        "--metric",
        "avg_delay_s",
        "--metric",
        "avg_power_w",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_valid("metrics.schema.json", &text);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["topology"], "msadlc");
    assert_eq!(v["display"]["avg_delay_s"]["unit"], "ps");
    assert!(v.get("kickback_v").is_none());
}

#[test]
fn measure_netlist_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.cir");
    std::fs::write(&path, stdout(&run(&["gen", "design1"]))).unwrap();
    let by_file = run(&[
        "measure",
        path.to_str().unwrap(),
        "--metric",
        "avg_delay_s",
        "--format",
        "csv",
    ]);
    let by_name = run(&[
        "measure",
        "design1",
        "--metric",
        "avg_delay_s",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&by_file), 0);
    let a = csv_rows(&stdout(&by_file));
    let b = csv_rows(&stdout(&by_name));
    assert_eq!(a[1][1], b[1][1]);
    assert_eq!(code(&run(&["measure", "no-such-thing"])), 2);
}

#[test]
fn report_json_validates_and_flags_pdp() {
    let o = run(&["report", "msadlc", "design3", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_valid("report.schema.json", &text);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["simulated"].as_array().unwrap().len(), 2);
    let table = stdout(&run(&["report", "msadlc", "design3"]));
    assert!(table.contains("Simulated") && table.contains("Reference"));
    assert!(table.contains("34.2*"));
}

#[test]
fn mc_is_deterministic_and_summary_validates() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let summary = dir.path().join("s.json");
    for p in [&a, &b] {
        let o = run(&[
            "mc",
            "msadlc",
            "--metric",
            "offset_v",
            "--n",
            "24",
            "--seed",
            "7",
            "-o",
            p.to_str().unwrap(),
            "--summary",
            summary.to_str().unwrap(),
            "--histogram",
            "10",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let rows = csv_rows(&String::from_utf8(ta).unwrap());
    assert_eq!(rows[0], ["sample_index", "value"]);
    let s = std::fs::read_to_string(&summary).unwrap();
    assert_valid("distribution_summary.schema.json", &s);
    let v: Value = serde_json::from_str(&s).unwrap();
    assert_eq!(rows.len() as u64, v["n"].as_u64().unwrap() + 1);
    assert_eq!(
        v["n"].as_u64().unwrap() + v["n_failed"].as_u64().unwrap(),
        24
    );
    let counted: u64 = v["histogram"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["count"].as_u64().unwrap())
        .sum();
    assert_eq!(counted, v["n"].as_u64().unwrap());
}

#[test]
fn mc_rejects_unknown_device() {
    assert_eq!(
        code(&run(&["mc", "msadlc", "--n", "2", "--devices", "M99"])),
        2
    );
}

#[test]
fn corners_five_rows() {
    let o = run(&["corners", "design1", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&stdout(&o));
    let names: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["TT", "FF", "SS", "FS", "SF"]);
    let o = run(&["corners", "design1", "--format", "json"]);
    assert_valid("corners.schema.json", &stdout(&o));
}

#[test]
fn sweep_tail_width() {
    let o = run(&[
        "sweep",
        "design1",
        "--param",
        "M5.W",
        "--values",
        "720n,1.44u",
        "--metric",
        "avg_delay_s",
    ]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows[0], ["value", "avg_delay_s"]);
    assert_eq!(rows.len(), 3);
    let d: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(d[1] < d[0], "{d:?}");
    let o = run(&[
        "sweep", "design1", "--param", "M5.W", "--values", "720n", "--format", "json",
    ]);
    assert_valid("sweep.schema.json", &stdout(&o));
    assert_eq!(
        code(&run(&[
            "sweep", "design1", "--param", "M99.W", "--values", "1u"
        ])),
        2
    );
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "format = \"json\"\n[bench]\nvdd = 1.8\n").unwrap();
    let o = run(&["analytic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(serde_json::from_str::<Value>(&stdout(&o)).is_ok());
    // Flags win over the file.
    let o = run(&[
        "analytic",
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(stdout(&o).starts_with("t0_s,"));
    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    assert_eq!(
        code(&run(&["analytic", "--config", cfg.to_str().unwrap()])),
        2
    );
}

#[test]
fn config_seed_matches_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "seed = 11\n").unwrap();
    let args = ["mc", "msadlc", "--n", "3", "--devices", "M1,M2"];
    let mut with_cfg = args.to_vec();
    with_cfg.extend(["--config", cfg.to_str().unwrap()]);
    let mut with_flag = args.to_vec();
    with_flag.extend(["--seed", "11"]);
    assert_eq!(stdout(&run(&with_cfg)), stdout(&run(&with_flag)));
    assert_ne!(stdout(&run(&with_cfg)), stdout(&run(&args)));
}
