use std::path::Path;
use std::process::Command;

use hysterix_cli::{
    cmd_parse_check, cmd_reproduce_paper, cmd_simulate, cmd_synthesize, cmd_verify, effective_seed,
    load_config, CommonArgs, Exit, ParseCheckArgs, ReproduceArgs,
};
use hysterix_core::config::RunConfig;
use hysterix_core::verify::VerificationReport;

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

fn args(dir: &Path, set: &[&str]) -> CommonArgs {
    CommonArgs {
        out: Some(dir.to_path_buf()),
        samples: Some(2000),
        set: set.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    }
}

fn run<F: FnOnce(&mut Vec<u8>) -> Exit>(f: F) -> (Exit, String) {
    let mut buf = Vec::new();
    let code = f(&mut buf);
    (code, String::from_utf8(buf).unwrap())
}

#[test]
fn golden_csv_header_and_float_format() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(|o| cmd_simulate(&args(dir.path(), &[]), o));
    assert_eq!(code, Exit::Ok);
    let text = std::fs::read_to_string(dir.path().join("run_000.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,j,q,x1_1,x2,u,V1,V,V_ell");
    assert_eq!(
        lines.next().unwrap(),
        "0.0000000000000000e0,0,1,5.0000000000000000e-1,1.0000000000000001e-1,NaN,\
         1.2500000000000000e-1,2.4627667218945315e-1,7.2973002500000006e-1"
    );
    let second = lines.next().unwrap();
    assert!(second.starts_with("0.0000000000000000e0,1,2,5.0000000000000000e-1,1.0000000000000001e-1,"));
    for line in text.lines().skip(1) {
        for field in line.split(',') {
            assert!(field == "NaN" || field.parse::<f64>().is_ok(), "{field}");
        }
    }
}

#[test]
fn simulate_writes_summary_with_switch_near_published_time() {
    let dir = tempfile::tempdir().unwrap();
    let a = CommonArgs {
        config: Some(configs().join("paper_example.json")),
        ..args(dir.path(), &[])
    };
    let (code, stdout) = run(|o| cmd_simulate(&a, o));
    assert_eq!(code, Exit::Ok, "{stdout}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("paper_000.json")).unwrap()).unwrap();
    assert_eq!(summary["termination"], "converged");
    let jumps = summary["jumps"].as_array().unwrap();
    assert_eq!(jumps.len(), 2);
    let t = jumps[1]["t"].as_f64().unwrap();
    assert!((t - 0.5314).abs() < 0.2 * 0.5314, "{t}");
    assert_eq!(jumps[1]["q_from"], 2);
    assert_eq!(jumps[1]["q_to"], 1);
}

#[test]
fn simulate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(|o| cmd_simulate(&args(dir.path(), &["initial_conditions=[]"]), o));
    assert_eq!(code, Exit::Config);
    let (code, _) = run(|o| cmd_simulate(&args(dir.path(), &["plant=nonsense"]), o));
    assert_eq!(code, Exit::Config);
    let (code, _) = run(|o| cmd_simulate(&args(dir.path(), &["local.phi_ell=x1 +"]), o));
    assert_eq!(code, Exit::Config);
    // The unforced plant is unstable: the state leaves every bound.
    let (code, stdout) = run(|o| {
        cmd_simulate(
            &args(dir.path(), &["controller=local", "local.phi_ell=0", "initial_conditions=[{\"x\":[1,0],\"q\":1}]"]),
            o,
        )
    });
    assert_eq!(code, Exit::Runtime, "{stdout}");
    assert!(stdout.contains("escape"));
}

#[test]
fn classical_backstepping_run_converges_without_jumps() {
    let dir = tempfile::tempdir().unwrap();
    let a = CommonArgs {
        config: Some(configs().join("classical.json")),
        ..args(dir.path(), &[])
    };
    let (code, stdout) = run(|o| cmd_simulate(&a, o));
    assert_eq!(code, Exit::Ok, "{stdout}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("classical_000.json")).unwrap()).unwrap();
    assert_eq!(summary["termination"], "converged");
    assert!(summary["jumps"].as_array().unwrap().is_empty());
}

#[test]
fn custom_three_state_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = CommonArgs {
        config: Some(configs().join("custom_plant.json")),
        ..args(dir.path(), &[])
    };
    let (code, _) = run(|o| cmd_simulate(&a, o));
    assert_eq!(code, Exit::Ok);
    let text = std::fs::read_to_string(dir.path().join("custom_000.csv")).unwrap();
    assert!(text.starts_with("t,j,q,x1_1,x1_2,x2,u,V1,V,V_ell\n"));
    let (code, out) = run(|o| cmd_verify(&a, o));
    assert_eq!(code, Exit::Ok, "{out}");
}

#[test]
fn verify_paper_preset_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout) = run(|o| cmd_verify(&args(dir.path(), &[]), o));
    assert_eq!(code, Exit::Ok, "{stdout}");
    assert!(stdout.contains("c1 = 1.002"));
    let report: VerificationReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify_report.json")).unwrap()).unwrap();
    for name in ["assumption1.decrease", "assumption3.covering", "assumption2.item4"] {
        assert!(report.get(name).unwrap().pass, "{name}");
    }
}

fn failing_with_witness(set: &[&str], check: &str) {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout) = run(|o| cmd_verify(&args(dir.path(), set), o));
    assert_eq!(code, Exit::CheckFailed, "{stdout}");
    let report: VerificationReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify_report.json")).unwrap()).unwrap();
    let e = report.get(check).unwrap();
    assert!(!e.pass && e.witness.is_some(), "{e:?}");
}

#[test]
fn verify_negative_controls() {
    failing_with_witness(&["plant.f2=x1"], "f2.nonvanishing");
    failing_with_witness(&["local.phi_ell=0"], "assumption1.decrease");
    failing_with_witness(&["local.v_ell=1e-5", "local.v_ell_tilde=5e-6"], "assumption3.covering");
}

#[test]
fn synthesize_reports_constants() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout) = run(|o| cmd_synthesize(&args(dir.path(), &[]), o));
    assert_eq!(code, Exit::Ok, "{stdout}");
    assert!(stdout.contains("k       = 2.0000250000000000e-1"), "{stdout}");
    assert!(stdout.contains("c       = 1.0000000000000000e1"));
    assert!(stdout.contains("phi_g(x1, x2) = "));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("synthesis.json")).unwrap()).unwrap();
    assert_eq!(doc["params"]["c_g"], 1.0);
    assert_eq!(doc["a_for_tube_condition"]["status"], "feasible");

    let (code, stdout) = run(|o| cmd_synthesize(&args(dir.path(), &["synthesis.c=auto"]), o));
    assert_eq!(code, Exit::Ok);
    assert!(stdout.contains("c       = 1.0100000000000000e0"), "{stdout}");

    // M = a = 1 gives k = 2(M + a)/a² = 4.
    let (code, stdout) = run(|o| cmd_synthesize(&args(dir.path(), &["certificate.M=1", "synthesis.a=1"]), o));
    assert_eq!(code, Exit::Ok);
    assert!(stdout.contains("k       = 4.0000000000000000e0"), "{stdout}");
}

#[test]
fn reproduce_paper_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let a = ReproduceArgs {
        out: Some(dir.path().to_path_buf()),
        set: vec![],
    };
    let (code, stdout) = run(|o| cmd_reproduce_paper(&a, o));
    assert_eq!(code, Exit::Ok);
    assert!(stdout.contains("1 -> 2") && stdout.contains("2 -> 1"));
    for f in ["paper_trajectory.csv", "paper_plot.dat", "paper_summary.json", "paper_literal_trajectory.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let plot = std::fs::read_to_string(dir.path().join("paper_plot.dat")).unwrap();
    assert!(plot.contains("# x1(t)") && plot.contains("# x2(t)") && plot.contains("# q(t)"));
}

#[test]
fn parse_check() {
    let a = ParseCheckArgs {
        exprs: vec!["x1 + theta".into(), "sin(x2)*u".into()],
        vars: "x1,x2,u".into(),
        config: None,
    };
    let (code, out) = run(|o| cmd_parse_check(&a, o));
    assert_eq!(code, Exit::CheckFailed);
    assert!(out.contains("error x1 + theta"));
    let a = ParseCheckArgs {
        exprs: vec!["x1^2/2 - abs(x2)".into()],
        vars: "x1,x2".into(),
        config: Some(configs().join("paper_example.json")),
    };
    let (code, out) = run(|o| cmd_parse_check(&a, o));
    assert_eq!(code, Exit::Ok, "{out}");
}

#[test]
fn seed_precedence() {
    assert_eq!(effective_seed(Some(3), None).unwrap(), Some(3));
    assert_eq!(effective_seed(Some(3), Some("9")).unwrap(), Some(9));
    assert_eq!(effective_seed(None, Some(" ")).unwrap(), None);
    assert!(effective_seed(None, Some("x")).is_err());
    let a = CommonArgs {
        seed: Some(3),
        env_seed: Some("11".into()),
        ..Default::default()
    };
    assert_eq!(load_config(&a).unwrap().verify.seed, 11);
}

#[test]
fn shipped_config_round_trips() {
    for name in ["paper_example.json", "classical.json", "custom_plant.json"] {
        let cfg = RunConfig::load(&configs().join(name)).unwrap();
        let back = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg, back, "{name}");
        cfg.build().unwrap();
    }
}

#[test]
fn binary_exit_codes_and_env_seed() {
    let bin = env!("CARGO_BIN_EXE_hysterix");
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(bin)
        .args(["simulate", "--out"])
        .arg(dir.path())
        .args(["--set", "initial_conditions=[]"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Command::new(bin)
        .args(["verify", "--samples", "1000", "--set", "plant.f2=x1", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let status = Command::new(bin)
        .args(["verify", "--samples", "1000", "--out"])
        .arg(dir.path())
        .env("HYSTERIX_SEED", "not-a-number")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let out = Command::new(bin).args(["parse-check", "--vars", "x1", "x1*(1 + x1)"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}
