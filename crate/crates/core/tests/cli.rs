mod common;

use std::fs;
use std::process::{Command, Output};

use common::fixture_path;

fn xshred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xshred"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn univ_dtd() -> String {
    fixture_path("univ.dtd").to_string_lossy().into_owned()
}

fn univ_xml() -> String {
    fixture_path("univ.xml").to_string_lossy().into_owned()
}

#[test]
fn schema_writes_ddl_and_mapping() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.sql");
    let o = xshred(&[
        "schema",
        &univ_dtd(),
        "--strategy",
        "dtdmap",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ddl = fs::read_to_string(&out).unwrap();
    assert_eq!(
        ddl.lines()
            .filter(|l| l.starts_with("CREATE TABLE "))
            .count(),
        5
    );
    assert!(stdout(&o).contains("website -> Dep.website"));
}

#[test]
fn schema_shared_has_no_edge_table() {
    let o = xshred(&["schema", &univ_dtd(), "--strategy", "shared"]);
    assert_eq!(o.status.code(), Some(0));
    let ddl = stdout(&o);
    assert_eq!(ddl.lines().count(), 4);
    assert!(!ddl.contains("Edge"));
    assert!(ddl.contains(
        "CREATE TABLE Dep (ID INTEGER, parentID INTEGER, parentType TEXT, nodeType TEXT,"
    ));
}

#[test]
fn missing_files_exit_1() {
    let o = xshred(&["schema", "/nonexistent/x.dtd"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("x.dtd"));
    let o = xshred(&[
        "shred",
        &univ_dtd(),
        "/nonexistent/x.xml",
        "--out",
        "/tmp/unused",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn shred_univ_reports_counts_and_lemmas() {
    let dir = tempfile::tempdir().unwrap();
    let o = xshred(&[
        "shred",
        &univ_dtd(),
        &univ_xml(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    for line in ["Univ: 1", "College: 3", "School: 0", "Dep: 3", "Edge: 6"] {
        assert!(
            text.lines().any(|l| l == line),
            "missing `{line}` in\n{text}"
        );
    }
    assert!(text.contains("q lemma PASS"));
    assert!(text.contains("r lemma PASS"));
    // School received no rows and --emit-empty was not given.
    assert!(!dir.path().join("School.csv").exists());
    assert!(dir.path().join("Dep.csv").exists());
}

#[test]
fn shred_shared_links_deps_to_colleges() {
    let dir = tempfile::tempdir().unwrap();
    let o = xshred(&[
        "shred",
        &univ_dtd(),
        &univ_xml(),
        "--strategy",
        "shared",
        "--emit-empty",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dep = fs::read_to_string(dir.path().join("Dep.csv")).unwrap();
    let parents: Vec<&str> = dep
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(parents, ["2", "3", "3"]);
    assert!(!dir.path().join("Edge.csv").exists());
    assert_eq!(
        fs::read_to_string(dir.path().join("School.csv")).unwrap(),
        "ID,parentID,parentType,sName\n"
    );
}

#[test]
fn shred_sql_to_named_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("univ.sql");
    let o = xshred(&[
        "shred",
        &univ_dtd(),
        &univ_xml(),
        "--format",
        "sql",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let sql = fs::read_to_string(&path).unwrap();
    assert!(sql.contains(
        "INSERT INTO Dep (ID,nodeType,dName,tel,fax,website) VALUES (5,'dep','CS',NULL,NULL,'www.cs.wayne.edu');"
    ));
    assert_eq!(
        sql.lines()
            .filter(|l| l.starts_with("INSERT INTO "))
            .count(),
        13
    );
}

#[test]
fn undeclared_element_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let xml = dir.path().join("bad.xml");
    fs::write(&xml, "<univ uName='x'><campus/></univ>").unwrap();
    let o = xshred(&[
        "shred",
        &univ_dtd(),
        xml.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("campus"));
    assert!(!dir.path().join("o").join("Univ.csv").exists());
}

#[test]
fn generate_is_deterministic() {
    let a = xshred(&["generate", &univ_dtd(), "--size", "8k", "--seed", "9"]);
    let b = xshred(&["generate", &univ_dtd(), "--size", "8k", "--seed", "9"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let len = a.stdout.len() as f64;
    assert!((len - 8192.0).abs() <= 819.2, "{len}");
    let tiny = xshred(&["generate", &univ_dtd(), "--size", "10"]);
    assert_eq!(tiny.status.code(), Some(1));
}

#[test]
fn bench_writes_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("bench.json");
    let o = xshred(&[
        "bench",
        &univ_dtd(),
        "--sizes",
        "16k,32k,64k",
        "--reps",
        "3",
        "--seed",
        "4",
        "--strategy",
        "dtdmap,shared",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict:"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let cells = json["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 6);
    for c in cells {
        assert_eq!(c["rep_seconds"].as_array().unwrap().len(), 3);
        assert_eq!(c["lemmas_hold"], true);
    }
    assert_eq!(json["fits"].as_array().unwrap().len(), 2);
}

#[test]
fn bench_single_size_and_bad_config() {
    let o = xshred(&["bench", &univ_dtd(), "--sizes", "16k", "--reps", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict: N/A"));
    let o = xshred(&["bench", &univ_dtd(), "--sizes", "32k,16k"]);
    assert_eq!(o.status.code(), Some(1));
    let o = xshred(&["bench", &univ_dtd(), "--sizes", "16k", "--reps", "0"]);
    assert_eq!(o.status.code(), Some(1));
}
