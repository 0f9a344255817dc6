use std::path::Path;
use std::process::{Command, Output};

fn agpr(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_agpr"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "agpr {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn short_config(dir: &Path) -> String {
    let text = String::from_utf8(agpr(&["preset", "analytic1d"]).stdout).unwrap();
    let text = text
        .replace("budget = 500.0", "budget = 135.0")
        .replace("max_iterations = 12", "max_iterations = 3");
    let path = dir.join("short.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn bench_writes_all_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_config(tmp.path());
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    let stdout = agpr(&["bench", "--config", &cfg, "--seeds", "1,2", "--out", out_s]).stdout;
    let stdout = String::from_utf8(stdout).unwrap();
    for s in ["adaptive_full", "adaptive_position_only", "lhs"] {
        assert!(stdout.contains(s));
        for seed in [1, 2] {
            assert!(out.join(format!("chains/{s}_seed{seed}.csv")).is_file());
            assert!(out.join(format!("designs/{s}_seed{seed}.json")).is_file());
        }
    }
    let curve = std::fs::read_to_string(out.join("klcurve.csv")).unwrap();
    assert!(curve.starts_with("strategy,seed,iteration,work,kl\n"));
    let design: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("designs/lhs_seed1.json")).unwrap())
            .unwrap();
    for key in ["iteration", "points", "tolerances", "work_spent"] {
        assert!(design[0].get(key).is_some(), "missing {key}");
    }
    assert!(out.join("summary.json").is_file());

    let kl = agpr(&[
        "kl",
        "--config",
        &cfg,
        "--snapshot",
        out.join("designs/adaptive_full_seed1.json")
            .to_str()
            .unwrap(),
        "--iteration",
        "3",
    ])
    .stdout;
    let kl = String::from_utf8(kl).unwrap();
    let lines: Vec<&str> = kl.lines().collect();
    assert_eq!(lines[0], "iteration,work,kl");
    assert_eq!(lines.len(), 2);
    let value: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!(curve.contains("adaptive_full,1,3,"));
    assert!(value.is_finite() && value >= 0.0);
}

#[test]
fn run_is_identical_in_sequential_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_config(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let base = [
        "run",
        "--config",
        &cfg,
        "--strategy",
        "adaptive_full",
        "--seeds",
        "1",
    ];
    agpr(&[&base[..], &["--out", a.to_str().unwrap()]].concat());
    agpr(
        &[
            &["--sequential"][..],
            &base[..],
            &["--out", b.to_str().unwrap()],
        ]
        .concat(),
    );
    for f in [
        "chains/adaptive_full_seed1.csv",
        "designs/adaptive_full_seed1.json",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn demo_likelihood_and_bad_input() {
    let text = String::from_utf8(agpr(&["demo-likelihood"]).stdout).unwrap();
    assert!(text.starts_with("p,exact,surrogate_mean"));
    assert_eq!(text.lines().count(), 1001);

    let st = Command::new(env!("CARGO_BIN_EXE_agpr"))
        .args(["run", "--preset", "analytic1d", "--strategy", "nope"])
        .output()
        .unwrap();
    assert!(!st.status.success());
    let st = Command::new(env!("CARGO_BIN_EXE_agpr"))
        .args(["bench", "--preset", "analytic1d", "--kl-method", "simpson"])
        .output()
        .unwrap();
    assert!(!st.status.success());
}
