use std::path::Path;
use std::process::{Command, Output};

fn knperc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_knperc"))
        .args(args)
        .env_remove("KNPERC_BUDGET")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = knperc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn report(args: &[&str]) -> serde_json::Value {
    let v: serde_json::Value = serde_json::from_str(&stdout(args)).unwrap();
    assert!(v["knperc"].is_string());
    v["report"].clone()
}

#[test]
fn estimate_csv_has_one_row_per_n() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("est.csv");
    let p = path.to_str().unwrap();
    stdout(&["estimate", "--variant", "ung", "--d", "2", "--k", "2", "--n", "5,15,25", "--trials", "100", "--seed", "3", "--out", p]);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with("# knperc ") && comment.contains("\"seed\":3"));
    let body = lines.collect::<Vec<_>>().join("\n");
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["variant", "d", "k", "n", "trials", "seed", "estimate", "stderr"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for (row, n) in rows.iter().zip(["5", "15", "25"]) {
        assert_eq!(&row[0], "ung");
        assert_eq!(&row[3], n);
        assert_eq!(&row[4], "100");
        let p: f64 = row[6].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn estimate_json_format() {
    let r = report(&["estimate", "--d", "2", "--k", "2", "--n", "4..6", "--trials", "20", "--format", "json"]);
    let rows = r.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["variant"], "dng");
    assert_eq!(rows[2]["n"], 6);
}

#[test]
fn tau_fractions_are_exact() {
    let r = report(&["tau", "--d", "2", "--cutoff", "5"]);
    let vals: Vec<&str> = r["values"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(vals[2], "1/16");
    assert_eq!(vals[3], "1/32");
    assert_eq!(vals[4], "7/256");
    let r = report(&["tau", "--d", "3", "--cutoff", "4"]);
    assert_eq!(r["values"][2], "2/81");
}

#[test]
fn bounds_table_over_a_range() {
    let r = report(&["bounds", "--d", "4..7"]);
    let dims = r["dimensions"].as_array().unwrap();
    assert_eq!(dims.len(), 4);
    let ds: Vec<u64> = dims.iter().map(|x| x["d"].as_u64().unwrap()).collect();
    assert_eq!(ds, [4, 5, 6, 7]);
    let cd: Vec<f64> = dims.iter().map(|x| x["cdub"].as_f64().unwrap()).collect();
    assert!(cd.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn bounds_with_refinement_and_induction() {
    let r = report(&["bounds", "--d", "4", "--k", "6", "--cutoff", "6"]);
    assert_eq!(r["dimensions"][0]["report"]["verdict"], "percolates");
    let r = report(&["bounds", "--largedmon", "16"]);
    assert_eq!(r["induction"]["holds"], true);
}

#[test]
fn invalid_input_exits_2() {
    for args in [
        &["estimate", "--d", "2", "--k", "5", "--n", "3"][..],
        &["estimate", "--d", "2", "--k", "2", "--n", "3", "--variant", "nope"],
        &["bounds", "--d", "3"],
        &["bounds"],
        &["peierls", "--closed-prob", "1/2", "--growth", "3"],
        &["no-such-command"],
    ] {
        let out = knperc(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn exceeded_budget_exits_3() {
    let out = Command::new(env!("CARGO_BIN_EXE_knperc"))
        .args(["saw", "--n-max", "14"])
        .env("KNPERC_BUDGET", "1000")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn unwritable_output_exits_1() {
    let out = knperc(&["tau", "--d", "2", "--cutoff", "3", "--out", "/nonexistent/dir/x.json"]);
    assert_eq!(out.status.code(), Some(1));
}

fn run_to(dir: &Path, name: &str, extra: &[&str]) -> Vec<u8> {
    let path = dir.join(name);
    let mut args = vec!["estimate", "--variant", "ung", "--d", "2", "--k", "2", "--n", "4,8", "--trials", "300", "--seed", "11"];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--out", path.to_str().unwrap()]);
    stdout(&args);
    std::fs::read(path).unwrap()
}

#[test]
fn output_does_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let seq = run_to(dir.path(), "seq.csv", &["--sequential"]);
    let one = run_to(dir.path(), "one.csv", &["--workers", "1"]);
    let four = run_to(dir.path(), "four.csv", &["--workers", "4"]);
    assert_eq!(seq, one);
    assert_eq!(seq, four);
}

#[test]
fn other_subcommands_produce_reports() {
    let r = report(&["dual", "--d", "2", "--k", "2"]);
    let joint: Vec<&str> = r.as_array().unwrap().iter().map(|x| x["joint"].as_str().unwrap()).collect();
    assert_eq!(joint[0], "1/24");
    let r = report(&["saw", "--n-max", "6", "--circuits", "4,6"]);
    assert_eq!(r["counts"]["counts"][2], 36);
    assert_eq!(r["circuits"][0]["count"], 1);
    let r = report(&["peierls", "--n-exact", "10"]);
    assert!(r["total_bound"].as_f64().unwrap() < 1.0);
    let r = report(&["couple", "--k", "1", "--d", "2", "--n", "5", "--trials", "20"]);
    assert_eq!(r["violations"], 0);
    let r = report(&["growth", "--d", "2", "--k", "3", "--generations", "8", "--seeds", "0..3"]);
    assert_eq!(r["violations"], 0);
    let r = report(&["mass-transport", "--d", "2", "--k", "2", "--side", "5", "--trials", "20"]);
    assert!(r["out_component"]["mean"].as_f64().unwrap() > 0.0);
    let text = stdout(&["sample", "--d", "2", "--k", "2", "--n", "3", "--format", "csv"]);
    assert_eq!(text.lines().nth(1), Some("x0,x1"));
    assert_eq!(text.lines().nth(2), Some("0,0"));
}
