use std::path::PathBuf;
use std::process::Command;

fn rmpc(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_rmpc"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "rmpc {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rmpc-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn horizon_rule_and_build() {
    assert!(rmpc(&["horizon-rule"]).contains("N_hat = 5"));
    assert!(rmpc(&[
        "horizon-rule",
        "--s",
        "2",
        "--q-rpi",
        "64",
        "--q-tm",
        "6",
        "--q-tt",
        "6"
    ])
    .contains("N_hat = 2"));
    assert!(rmpc(&["build", "--approach", "tube", "--N", "10"]).contains("q=116 p=12"));
    let dir = scratch("build");
    let path = dir.join("qp.json");
    rmpc(&[
        "build",
        "--approach",
        "minmax",
        "--N",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    let qp: regional_mpc::condense::CondensedQp =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!((qp.num_rows(), qp.num_vars()), (32, 4));
}

#[test]
fn sets_against_fixtures() {
    let out = rmpc(&["sets", "--fixtures"]);
    assert!(out.contains("terminal set vs published"));
    assert!(out.contains("published RPI set"));
}

#[test]
fn simulate_writes_a_plot() {
    let dir = scratch("sim");
    let svg = dir.join("run.svg");
    let out = rmpc(&[
        "simulate",
        "--variant",
        "asu",
        "--x0=-7,2",
        "--seed",
        "4",
        "--plot",
        svg.to_str().unwrap(),
    ]);
    assert!(out.contains("QPs solved"));
    let text = std::fs::read_to_string(svg).unwrap();
    assert!(text.starts_with("<svg") && text.contains("polygon"));
}

#[test]
fn bench_output_is_byte_identical_across_runs() {
    let args = |dir: &PathBuf| {
        vec![
            "bench".to_string(),
            "--approach".into(),
            "minmax,nominal".into(),
            "--N".into(),
            "3".into(),
            "--samples".into(),
            "25".into(),
            "--seed".into(),
            "9".into(),
            "--out".into(),
            dir.to_str().unwrap().into(),
        ]
    };
    let (a, b) = (scratch("bench-a"), scratch("bench-b"));
    let run = |dir: &PathBuf| {
        let v = args(dir);
        rmpc(&v.iter().map(String::as_str).collect::<Vec<_>>());
        std::fs::read(dir.join("bench.csv")).unwrap()
    };
    let first = run(&a);
    assert_eq!(first, run(&b));
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with(
        "approach,variant,N,q,p,mean_steps,mean_dqp,mean_dqp_pct,rel_time,n_traj,seed"
    ));
    assert_eq!(text.lines().count(), 7);
}
