use std::path::Path;
use std::process::{Command, Output};

use compandor::report::{linear_spline_table, sqnr_table, TABLE_LEVELS};
use compandor_cli::output::{format_sig, RunManifest, Table};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compandor"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn table(args: &[&str]) -> Table {
    Table::from_csv(stdout(args).as_bytes()).unwrap()
}

fn column(t: &Table, name: &str) -> usize {
    t.header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

fn row_for(t: &Table, levels: usize) -> &Vec<String> {
    t.rows.iter().find(|r| r[0] == levels.to_string()).unwrap()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["design", "--levels", "16"]), 0);
    assert_eq!(code(&["design", "--levels", "7"]), 2);
    assert_eq!(code(&["design", "--levels", "16", "--model", "cubic"]), 2);
    assert_eq!(code(&["design", "--levels", "16", "--sigma", "-1"]), 2);
    assert_eq!(code(&["tables", "--which", "4"]), 2);
    assert_eq!(code(&["montecarlo", "--samples", "0"]), 2);
    assert_eq!(code(&["sweep", "--models", ""]), 2);
    assert_eq!(
        code(&["sweep", "--levels", "7,16", "--models", "linear"]),
        1
    );
    assert_eq!(
        code(&["tables", "--which", "1", "--out", "/nonexistent-dir/t1.csv"]),
        4
    );
    assert_eq!(
        code(&[
            "--config",
            "/nonexistent-dir/c.txt",
            "tables",
            "--which",
            "1"
        ]),
        4
    );
}

#[test]
fn design_json_reports_quadratic_sqnr() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&[
        "design",
        "--levels",
        "128",
        "--model",
        "quadratic",
        "--format",
        "json",
    ]))
    .unwrap();
    let sqnr = v["report"]["sqnr_db"].as_f64().unwrap();
    assert!((sqnr - 37.80).abs() <= 0.2, "sqnr {sqnr}");
    assert_eq!(v["model"]["kind"], "quadratic_spline");
    assert_eq!(v["codebook"]["levels"].as_array().unwrap().len(), 63);
}

#[test]
fn design_csv_is_one_row() {
    let t = table(&[
        "design", "--levels", "16", "--model", "linear", "--format", "csv",
    ]);
    assert_eq!(t.rows.len(), 1);
    let sqnr = num(&t.rows[0][column(&t, "sqnr_db")]);
    assert!((sqnr - 19.51).abs() <= 0.2, "sqnr {sqnr}");
}

#[test]
fn design_writes_dumps_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    let model = dir.path().join("model.json");
    let codebook = dir.path().join("codebook.json");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let (o, m, c) = (s(&out), s(&model), s(&codebook));
    assert_eq!(
        code(&[
            "design",
            "-n",
            "32",
            "--out",
            &o,
            "--dump-model",
            &m,
            "--dump-codebook",
            &c
        ]),
        0
    );
    let manifest: RunManifest =
        serde_json::from_slice(&std::fs::read(RunManifest::path_for(&out)).unwrap()).unwrap();
    assert_eq!(manifest.command, "design");
    assert_eq!(manifest.config.unwrap().levels, 32);
    assert_eq!(manifest.outputs.len(), 3);
    for p in &manifest.outputs {
        assert!(p.exists(), "{p:?} missing");
    }
    let dump: serde_json::Value = serde_json::from_slice(&std::fs::read(&model).unwrap()).unwrap();
    assert_eq!(dump["knots"].as_array().unwrap().len(), 3);
}

#[test]
fn config_file_fills_unset_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "levels = 16\nmodel = linear\nformat = csv\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let t = table(&["--config", cfg, "design"]);
    assert_eq!(t.rows[0][0], "16");
    assert_eq!(t.rows[0][1], "linear");
    let t = table(&["--config", cfg, "design", "--levels", "32"]);
    assert_eq!(t.rows[0][0], "32");

    std::fs::write(dir.path().join("bad.cfg"), "colour = red\n").unwrap();
    assert_eq!(
        code(&[
            "--config",
            dir.path().join("bad.cfg").to_str().unwrap(),
            "design"
        ]),
        2
    );
}

#[test]
fn table_one_row() {
    let t = table(&["tables", "--which", "1"]);
    assert_eq!(t.rows.len(), 4);
    let r = row_for(&t, 64);
    assert!((num(&r[column(&t, "x1")]) - 1.7819).abs() < 5e-4);
    assert!((num(&r[column(&t, "m1")]) - 1.4503).abs() < 5e-4);
}

#[test]
fn table_two_carries_signed_and_magnitude_columns() {
    let t = table(&["tables", "--which", "2"]);
    let r = row_for(&t, 32);
    assert!((num(&r[column(&t, "abs_d2")]) - 0.4269).abs() < 5e-4);
    assert_eq!(r[column(&t, "sign_d2")], "-");
    assert_eq!(num(&r[column(&t, "d2")]), -num(&r[column(&t, "abs_d2")]));
}

#[test]
fn table_three_matches_library_and_labels_reference() {
    let t = table(&["tables", "--which", "3"]);
    let reference = column(&t, "sqnr_rs_db_published_reference");
    for (lib, row) in sqnr_table(&TABLE_LEVELS).unwrap().iter().zip(&t.rows) {
        assert_eq!(row[column(&t, "sqnr_qs_db")], format_sig(lib.quadratic_db));
        assert_eq!(row[column(&t, "sqnr_fds_db")], format_sig(lib.linear_db));
        assert_eq!(row[column(&t, "sqnr_oc_db")], format_sig(lib.optimal_db));
        assert_eq!(num(&row[reference]), lib.reference_published_db);
    }
}

#[test]
fn csv_round_trip_is_byte_identical() {
    for which in ["1", "2", "3"] {
        let text = stdout(&["tables", "--which", which]);
        let mut t = Table::from_csv(text.as_bytes()).unwrap();
        for row in &mut t.rows {
            for f in row.iter_mut().skip(1) {
                if let Ok(v) = f.parse::<f64>() {
                    *f = format_sig(v);
                }
            }
        }
        assert_eq!(
            String::from_utf8(t.to_csv().unwrap()).unwrap(),
            text,
            "table {which}"
        );
    }
}

#[test]
fn tables_json_is_one_object() {
    let v: serde_json::Value =
        serde_json::from_str(&stdout(&["tables", "--which", "1", "--format", "json"])).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let lib = linear_spline_table(&[16]).unwrap()[0];
    assert!((rows[0]["m2"].as_f64().unwrap() - lib.m2).abs() < 1e-5);
}

#[test]
fn figure_one_endpoints() {
    let t = table(&["figure", "--which", "1", "--samples", "201"]);
    assert_eq!(t.header, ["x", "c", "g_s1", "g_s2"]);
    assert_eq!(t.rows.len(), 201);
    assert!(t.rows[0].iter().all(|v| num(v) == 0.0));
    for v in t.rows.last().unwrap() {
        assert!((num(v) - 4.0274).abs() < 1e-3);
    }
    assert_eq!(code(&["figure", "--which", "1", "--samples", "1"]), 2);
}

#[test]
fn figure_two_is_four_by_four_and_increasing() {
    let t = table(&["figure", "--which", "2"]);
    assert_eq!(t.rows.len(), 4);
    assert!(t.rows.iter().all(|r| r.len() == 4));
    for c in 1..4 {
        for w in t.rows.windows(2) {
            assert!(num(&w[1][c]) > num(&w[0][c]));
        }
    }
}

fn without_timestamp(s: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(s).unwrap();
    v.as_object_mut()
        .unwrap()
        .remove("timestamp")
        .expect("timestamp present");
    v
}

#[test]
fn montecarlo_is_deterministic_modulo_timestamp() {
    let args = [
        "montecarlo",
        "-n",
        "32",
        "--model",
        "optimal",
        "--samples",
        "200000",
        "--seed",
        "9",
        "--shards",
        "4",
    ];
    let a = without_timestamp(&stdout(&args));
    let b = without_timestamp(&stdout(&args));
    assert_eq!(a, b);
    assert_eq!(a["monte_carlo"]["shards"], 4);
    let diff = a["difference_db"].as_f64().unwrap();
    assert!(diff.abs() < 0.2, "difference {diff}");
}

#[test]
fn sweep_covers_product_in_order() {
    let t = table(&[
        "sweep",
        "--levels",
        "128,16,64,32",
        "--models",
        "optimal,linear,quadratic",
    ]);
    assert_eq!(t.rows.len(), 12);
    let keys: Vec<(String, String)> = t
        .rows
        .iter()
        .map(|r| (r[0].clone(), r[1].clone()))
        .collect();
    let mut expected = Vec::new();
    for n in TABLE_LEVELS {
        for m in ["linear", "quadratic", "optimal"] {
            expected.push((n.to_string(), m.to_string()));
        }
    }
    assert_eq!(keys, expected);
    assert!(t.rows.iter().all(|r| r[column(&t, "status")] == "ok"));

    let lib = sqnr_table(&[64]).unwrap()[0];
    let r = &t.rows[7];
    assert_eq!(num(&r[column(&t, "sqnr_db")]), lib.quadratic_db);
}

#[test]
fn sweep_warns_on_duplicates() {
    let out = run(&["sweep", "--levels", "16,16", "--models", "linear"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate level count 16"));
    let t = Table::from_csv(&out.stdout).unwrap();
    assert_eq!(t.rows.len(), 1);
}
