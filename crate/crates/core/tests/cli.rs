use std::fs;
use std::process::{Command, Output};

fn ksreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksreg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn ks_map_of_a_single_point() {
    let o = ksreg(&["map", "--via", "ks", "--dv", "+k", "--point", "1,0,0,0,0,0,2,0"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# format_version=1"));
    assert_eq!(lines[1], "x1,x2,x3,y1,y2,y3,real_defect");
    assert_eq!(lines[2], "0,0,1,-1,0,0,0");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(ksreg(&["verify", "--suite", "bogus"]).status.code(), Some(2));
    assert_eq!(ksreg(&["map", "--via", "bogus", "--point", "1"]).status.code(), Some(2));
    assert_eq!(
        ksreg(&["propagate", "--system", "bogus", "--ic", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(ksreg(&["sample", "--manifold", "bogus"]).status.code(), Some(2));
    assert_eq!(
        ksreg(&[
            "propagate",
            "--system",
            "kepler3",
            "--ic",
            "1,0,0,0,1,0",
            "--span",
            "inf"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn domain_and_malformed_input() {
    let o = ksreg(&["map", "--via", "euler", "--point", "0,0,0,0,1,1,1,1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(o.stdout.is_empty());
    assert_eq!(ksreg(&["map", "--via", "ks", "--point", "1,2"]).status.code(), Some(5));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "a,b\n1,2\n").unwrap();
    let o = ksreg(&["map", "--via", "ks", "--input", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));

    let rows = dir.path().join("rows.csv");
    fs::write(
        &rows,
        "# comment\nq1,q2,q3,q4,p1,p2,p3,p4\n1,0,0,0,0,0,2,0\n1,x,0,0,0,0,0,0\n",
    )
    .unwrap();
    let o = ksreg(&["map", "--via", "ks", "--input", rows.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn radial_fall_collapses_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("radial.csv");
    let o = ksreg(&[
        "propagate",
        "--system",
        "kepler3",
        "--ic",
        "1,0,0,0,0,0",
        "--span",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().count() > 100);
    assert!(text.lines().nth(1).unwrap().starts_with("s,t,x1,x2,x3,y1,y2,y3,H"));
}

#[test]
fn regularized_near_collision_completes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("reg.csv");
    let o = ksreg(&[
        "propagate",
        "--system",
        "kepler3-regularized",
        "--ic",
        "1,0,0,0,1e-3,0",
        "--revs",
        "1",
        "--rtol",
        "1e-13",
        "--atol",
        "1e-15",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(&out).unwrap();
    let h_col = reader.headers().unwrap().iter().position(|c| c == "H").unwrap();
    let energies: Vec<f64> = reader.records().map(|r| r.unwrap()[h_col].parse().unwrap()).collect();
    let drift = energies.iter().map(|e| (e - energies[0]).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-8, "drift {drift}");
}

#[test]
fn sample_is_reproducible_and_config_merges() {
    let a = ksreg(&["sample", "--manifold", "xi0-zero", "--count", "10", "--seed", "7"]);
    let b = ksreg(&["sample", "--manifold", "xi0-zero", "--count", "10", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 12);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ksreg.toml");
    fs::write(&cfg, "[sample]\nmanifold = \"euler-domain\"\ncount = 4\nseed = 7\n").unwrap();
    let o = ksreg(&["--config", cfg.to_str().unwrap(), "sample", "--count", "2"]);
    let text = stdout(&o);
    assert!(text.starts_with("# format_version=1 manifold=euler-domain"));
    assert_eq!(text.lines().count(), 4);

    let o = ksreg(&["--config", cfg.to_str().unwrap(), "--print-config", "sample"]);
    assert!(stdout(&o).contains("manifold = \"euler-domain\""));
}

#[test]
fn verify_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = ksreg(&[
        "verify",
        "--suite",
        "fibers",
        "--samples",
        "50",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o)
        .lines()
        .all(|l| l.starts_with("PASS") || l.starts_with("REPORT")));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fibers.json")).unwrap()).unwrap();
    assert_eq!(json["suite"], "fibers");
    assert_eq!(json["format_version"], 1);
}
