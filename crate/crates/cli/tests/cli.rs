use std::path::Path;
use std::process::{Command, Output};

use manicon_core::presets;

fn manicon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_manicon"))
        .args(args)
        .output()
        .expect("spawn manicon")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn report_value(dir: &Path, key: &str) -> String {
    let mut rd = csv::Reader::from_path(dir.join("report.csv")).unwrap();
    for rec in rd.records() {
        let rec = rec.unwrap();
        if &rec[0] == key {
            return rec[1].to_string();
        }
    }
    panic!("no `{key}` in report.csv");
}

fn write_json(dir: &Path, name: &str, mutate: impl FnOnce(&mut manicon_core::ScenarioConfig)) -> String {
    let mut cfg = presets::sec5a_consensus();
    mutate(&mut cfg);
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_json()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_preset_writes_three_files_and_settles() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let o = manicon(&["run", "sec5a-consensus", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["trace.csv", "report.csv", "scenario.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert!(!out.join("sweep.csv").exists());
    assert_eq!(report_value(&out, "settled"), "true");
    assert!(stdout(&o).contains("settled = true"));
}

#[test]
fn trace_has_documented_width_and_one_row_per_step() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let o = manicon(&["run", "sec5a-consensus", "--t-end", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rd = csv::Reader::from_path(out.join("trace.csv")).unwrap();
    let width = rd.headers().unwrap().len();
    assert_eq!(width, 1 + 6 * (2 + 2 + 2 + 2 + 2 + 2 + 3 + 2 + 1 + 1));
    let rows: Vec<_> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 201);
    assert!(rows.iter().all(|r| r.len() == width));
    assert_eq!(rows[200][0].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn missing_dt_is_a_parse_error_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("no_dt.json");
    let mut v = presets::sec5a_consensus().to_json();
    let start = v.find("\"dt\"").unwrap();
    let end = start + v[start..].find('\n').unwrap();
    v.replace_range(start..=end, "");
    std::fs::write(&path, v).unwrap();
    for cmd in ["run", "validate"] {
        let o = manicon(&[cmd, path.to_str().unwrap()]);
        assert!(!o.status.success());
        assert!(stderr(&o).contains("missing field `dt`"), "{}", stderr(&o));
        assert!(stderr(&o).contains("line"), "{}", stderr(&o));
    }
}

#[test]
fn validate_preset_prints_ok_and_prediction() {
    let o = manicon(&["validate", "sec5a-consensus"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("ok\n"), "{text}");
    assert!(text.contains("predicted consensus = [1.76266"), "{text}");
}

#[test]
fn validate_lists_each_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_json(tmp.path(), "bad.json", |cfg| {
        // cut the ring twice: two disjoint chains, no common root
        cfg.graph.weights[5][0] = 0.0;
        cfg.graph.weights[2][3] = 0.0;
        cfg.gains.lambda_kin = [[1.0, 2.0], [2.0, 1.0]];
    });
    let o = manicon(&["validate", &path]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("violation: graph"), "{err}");
    assert!(err.contains("spanning tree"), "{err}");
    assert!(err.contains("violation: gains.lambda_kin"), "{err}");
    assert!(err.contains("2 violation(s)"), "{err}");
}

#[test]
fn emitted_config_reproduces_the_trace_bit_for_bit() {
    let tmp = tempfile::tempdir().unwrap();
    let o = manicon(&["validate", "sec5c-noise", "--emit"]);
    assert!(o.status.success());
    let cfg = tmp.path().join("noise.json");
    std::fs::write(&cfg, &o.stdout).unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (src, out) in [("sec5c-noise", &a), (cfg.to_str().unwrap(), &b)] {
        let o = manicon(&["run", src, "--t-end", "2", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ta = std::fs::read(a.join("trace.csv")).unwrap();
    assert_eq!(ta, std::fs::read(b.join("trace.csv")).unwrap());
    let c = tmp.path().join("c");
    manicon(&["run", "sec5c-noise", "--t-end", "2", "--seed", "7", "--out", c.to_str().unwrap()]);
    assert_ne!(ta, std::fs::read(c.join("trace.csv")).unwrap());
}

#[test]
fn alpha_zero_run_reports_its_sweep_row() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let o = manicon(&["run", "sec5b-alpha0", "--every", "50", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rd = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    assert_eq!(&rd.headers().unwrap()[0], "alpha");
    let rows: Vec<_> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    let x: f64 = rows[0][1].parse().unwrap();
    assert!((x - 2.6).abs() <= 0.026, "{x}");
    assert_eq!(report_value(out, "final_mean_x"), rows[0][1].to_string());
}

#[test]
fn damping_sweep_is_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let o = manicon(&["sweep", "damping", "--jobs", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rd = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let d: Vec<f64> = rd.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(d.len(), 4);
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
}

#[test]
fn run_failure_names_time_and_signal() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_json(tmp.path(), "coarse.json", |cfg| {
        cfg.graph.delays = vec![vec![0.0; 6]; 6];
        cfg.dt = 0.6;
        cfg.t_end = 30.0;
    });
    let o = manicon(&["run", &path, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.starts_with("error: run failed at t = "), "{err}");
    assert!(err.contains("numerical blowup in `"), "{err}");
    assert_eq!(err.matches("numerical blowup").count(), 1, "{err}");
}

#[test]
fn unknown_inputs_are_rejected() {
    let o = manicon(&["run", "no-such-preset"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("neither a preset"));
    let o = manicon(&["run", "sec5a-consensus", "--integrator", "rk5"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown integrator"));
    let o = manicon(&["list"]);
    assert_eq!(stdout(&o).lines().count(), presets::NAMES.len());
}
