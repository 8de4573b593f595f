use std::path::Path;
use std::process::{Command, Output};

use hcran_cli::config::DEFAULT_CONFIG;

fn hcran(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hcran"));
    cmd.args(args);
    for var in [
        "HCRAN_CONFIG",
        "HCRAN_SEED",
        "HCRAN_SLOTS",
        "HCRAN_WARMUP",
        "HCRAN_BASELINE",
        "HCRAN_STRICT_BOUNDS",
        "HCRAN_STRICT",
        "HCRAN_OUT",
        "HCRAN_SWEEP",
    ] {
        cmd.env_remove(var);
    }
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, edits: &[(&str, &str)]) -> std::path::PathBuf {
    let mut text = DEFAULT_CONFIG.to_string();
    for (from, to) in edits {
        assert!(text.contains(from), "{from}");
        text = text.replace(from, to);
    }
    let p = dir.join("exp.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("not JSON: {text}"))
}

#[test]
fn sweep_writes_one_summary_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &[]);
    let o = hcran(
        &[
            "run",
            "--config",
            path(&cfg),
            "--sweep",
            "V",
            "10,100,1000",
            "--slots",
            "30",
            "--out",
            path(&out),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("run_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    for name in ["jccro_V_10", "jccro_V_100", "jccro_V_1000"] {
        let trace = std::fs::read_to_string(out.join(format!("trace_{name}.csv"))).unwrap();
        assert_eq!(trace.lines().count(), 31);
    }
    for fig in ["utility", "delay", "ee"] {
        let f = std::fs::read_to_string(out.join(format!("figdata_{fig}_vs_V.csv"))).unwrap();
        assert_eq!(f.lines().next().unwrap(), "V,jccro");
        assert_eq!(f.lines().count(), 4);
    }
}

#[test]
fn lambda_sweep_figdata_has_one_column_per_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = hcran(
        &[
            "run",
            "--sweep",
            "lambda",
            "250,500",
            "--slots",
            "20",
            "--baseline",
            "msr",
            "--out",
            path(&out),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for fig in ["rate", "delay", "power"] {
        let f = std::fs::read_to_string(out.join(format!("figdata_{fig}_vs_lambda.csv"))).unwrap();
        let lines: Vec<&str> = f.lines().collect();
        assert_eq!(lines[0], "lambda,jccro,msr");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("2.50000000e2,"));
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = hcran(
            &[
                "run",
                "--sweep",
                "V",
                "10,1000",
                "--slots",
                "40",
                "--seed",
                "9",
                "--out",
                path(out),
            ],
            &[],
        );
        assert!(o.status.success());
    }
    let mut files: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    assert_eq!(files.len(), 6);
    for f in files {
        assert_eq!(
            std::fs::read(a.join(&f)).unwrap(),
            std::fs::read(b.join(&f)).unwrap(),
            "{f:?}"
        );
    }
}

#[test]
fn environment_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = hcran(
        &["run"],
        &[
            ("HCRAN_SLOTS", "12"),
            ("HCRAN_OUT", path(&out)),
            ("HCRAN_SWEEP", "ee_req 0,0.1"),
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = std::fs::read_to_string(out.join("trace_jccro_ee_req_0.1.csv")).unwrap();
    assert_eq!(trace.lines().count(), 13);
    // flags win over the environment
    let o = hcran(&["run", "--slots", "5", "--out", path(&out)], &[("HCRAN_SLOTS", "12")]);
    assert!(o.status.success());
    let trace = std::fs::read_to_string(out.join("trace_jccro.csv")).unwrap();
    assert_eq!(trace.lines().count(), 6);
}

#[test]
fn schema_violation_exits_2_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &[("num_rrh = 4", "num_rrh = \"four\"")]);
    let o = hcran(&["run", "--config", path(&cfg), "--out", path(dir.path())], &[]);
    assert_eq!(o.status.code(), Some(2));
    let j = stderr_json(&o);
    assert_eq!(j["error"], "config");
    assert_eq!(j["exit_code"], 2);

    let o = hcran(&["run", "--sweep", "V", "100,10", "--out", path(dir.path())], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = hcran(&["run", "--config", path(&dir.path().join("missing.cfg"))], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = hcran(&["run", "--sweep", "bogus", "1"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = hcran(&["run", "--slots", "5", "--out", path(&blocker.join("sub"))], &[]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "output");
}

#[test]
fn strict_bounds_covers_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    // MSR admits everything, so an overloaded low-V run exceeds the bound
    let args = [
        "run",
        "--sweep",
        "V",
        "10",
        "--slots",
        "300",
        "--baseline",
        "msr",
        "--out",
        path(dir.path()),
    ];
    let o = hcran(&args, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = hcran(&[&args[..], &["--strict-bounds"]].concat(), &[]);
    assert_eq!(o.status.code(), Some(4));
    let j = stderr_json(&o);
    assert_eq!(j["error"], "bound_breach");
    assert_eq!(j["runs"][0], "msr_V_10");
}

#[test]
fn strict_mode_fails_flagged_runs() {
    let dir = tempfile::tempdir().unwrap();
    // an EE floor no allocation reaches leaves every MSR slot infeasible
    let cfg = write_config(
        dir.path(),
        &[
            ("ee_required = 0.0", "ee_required = 50.0"),
            ("jccro = true\nmsr = false", "jccro = false\nmsr = true"),
        ],
    );
    let base = [
        "run",
        "--config",
        path(&cfg),
        "--slots",
        "10",
        "--out",
        path(dir.path()),
    ];
    let o = hcran(&base, &[]);
    assert!(o.status.success());
    assert_eq!(stderr_json(&o)["warning"], "flagged");
    let o = hcran(&[&base[..], &["--strict"]].concat(), &[]);
    assert_eq!(o.status.code(), Some(5));
    let o = hcran(&base, &[("HCRAN_STRICT", "true")]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn default_config_round_trips() {
    let o = hcran(&["default-config"], &[]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap(), DEFAULT_CONFIG);
    let shipped = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/paper_vi.cfg")).unwrap();
    assert_eq!(shipped, DEFAULT_CONFIG);
}
