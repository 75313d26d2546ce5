use std::path::Path;
use std::process::{Command, Output};

fn fracvis(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracvis"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = fracvis(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn gen_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen", "--p", "0.75", "--depth", "10", "--seed", "7", "--out"];
    ok(dir.path(), &[&args[..], &["a.json"]].concat());
    ok(dir.path(), &[&args[..], &["b.json"]].concat());
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.json")).unwrap());
    assert!(!a.is_empty());
}

#[test]
fn vis_then_certify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--p", "0.75", "--depth", "10", "--seed", "7", "--out", "t.json"]);
    let counts = ok(d, &["vis", "--tree", "t.json", "--line", "1,1,+", "--level", "10", "--out", "c.json"]);
    assert!(counts.starts_with("k,N_k\n0,1\n"));
    assert_eq!(counts.lines().count(), 12);
    let report = ok(d, &["certify", "--cover", "c.json", "--tree", "t.json"]);
    assert!(report.contains(" 0 failures"), "{report}");

    ok(d, &["vis", "--tree", "t.json", "--point", "-1,1/3", "--level", "5", "--out", "p.json", "--csv", "p.csv"]);
    let report = ok(d, &["certify", "--cover", "p.json"]);
    assert!(report.contains("0 outside the cover"), "{report}");
    assert!(std::fs::read_to_string(d.join("p.csv")).unwrap().starts_with("k,N_k\n"));
}

#[test]
fn tampered_cover_fails_certification() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--p", "1", "--depth", "3", "--out", "t.json"]);
    ok(d, &["vis", "--tree", "t.json", "--line", "1,1,+", "--out", "c.json", "--csv", "c.csv"]);
    let text = std::fs::read_to_string(d.join("c.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    // swap the windows of the first two marked squares
    let w = v["windows"].as_array_mut().unwrap();
    w.swap(0, 1);
    std::fs::write(d.join("bad.json"), v.to_string()).unwrap();
    let out = fracvis(d, &["certify", "--cover", "bad.json", "--tree", "t.json", "--rays", "0"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn boxdim_of_full_tree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--p", "1", "--depth", "10", "--out", "t.json"]);
    let out = ok(d, &["boxdim", "--tree", "t.json", "--set", "E", "--krange", "4:10", "--csv", "e.csv"]);
    assert_eq!(out.trim(), "slope=2.000000 intercept=0.000000 max_residual=0.000000 points=7");
    let table = std::fs::read_to_string(d.join("e.csv")).unwrap();
    assert!(table.ends_with("10,1048576\n"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        &["frobnicate"][..],
        &["gen", "--p", "0.5", "--depth", "3"],
        &["gen", "--p", "0.5", "--depth", "3", "--out", "x.json", "--colour", "red"],
        &["gen", "--p", "3/2", "--depth", "3", "--out", "x.json"],
        &["vis", "--tree", "missing.json", "--line", "1,1,+", "--out", "c.json"],
        &["boxdim", "--p", "1", "--depth", "3", "--krange", "3-1"],
    ] {
        assert_eq!(fracvis(d, args).status.code(), Some(1), "{args:?}");
    }
    std::fs::write(d.join("junk.json"), "{not json").unwrap();
    assert_eq!(fracvis(d, &["certify", "--cover", "junk.json"]).status.code(), Some(1));
    assert_eq!(fracvis(d, &["--help"]).status.code(), Some(0));
}

#[test]
fn stripes_coverage_and_passed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--p", "1", "--depth", "6", "--out", "t.json"]);
    let out = ok(d, &["stripes", "--tree", "t.json", "--line", "1,1,+", "--level", "5", "--eps", "1/8"]);
    assert!(out.starts_with("j,Q_I,C_I,Y,first_block\n"));
    assert!(out.lines().last().unwrap().starts_with("S_n="));

    let out = ok(d, &["coverage", "--tree", "t.json", "--line", "1,2,+", "--levels", "1:6"]);
    assert_eq!(out, "m,covered\n1,1\n2,1\n3,1\n4,1\n5,1\n6,1\n");

    let out = ok(d, &["passed", "--tree", "t.json", "--through", "0,1/3,1,2/5", "--through", "0,1/2,1,1/2", "--levels", "6:6"]);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "line,k,V_k");
    let v: u64 = rows[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!((63..=65).contains(&v), "{out}");
    // an interior grid line passes both rows of squares along it
    assert_eq!(rows[2], "1,6,128");
}

#[test]
fn mc_is_reproducible_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = r#"{"kind":"dimension","p":["3/4"],"depth":6,"trials":40,"seed":5}"#;
    std::fs::write(d.join("cfg.json"), cfg).unwrap();
    let run = |threads: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_fracvis"))
            .current_dir(d)
            .env("FRACVIS_THREADS", threads)
            .args(["mc", "--config", "cfg.json", "--out", out, "--csv", &format!("{out}.csv")])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(d.join(out)).unwrap()
    };
    let a = run("1", "a.json");
    assert_eq!(a, run("4", "b.json"));
    assert_eq!(a, run("1", "c.json"));
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["format"], 1);
    assert_eq!(report["seeds"].as_array().unwrap().len(), 40);

    std::fs::write(d.join("bad.json"), r#"{"kind":"dimension","p":[0.5],"depth":6,"trials":0,"seed":5}"#).unwrap();
    assert_eq!(fracvis(d, &["mc", "--config", "bad.json"]).status.code(), Some(1));
}
