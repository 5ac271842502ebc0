use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn boxcouple(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boxcouple"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const PATH3: &str = r#"{"labels":["p","q","r"],"matrix":[[0,1,2],[1,0,1],[2,1,0]]}"#;

#[test]
fn cyclic_chain_orders() {
    let dir = tempfile::tempdir().unwrap();
    let out = boxcouple(dir.path(), &["chain", "build", "--family", "cyclic:2", "--depth", "3"]);
    let chain = stdout_json(&out);
    let orders: Vec<u64> = chain["quotients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|q| q["order"].as_u64().unwrap())
        .collect();
    assert_eq!(orders, [2, 4, 8]);
}

#[test]
fn dot_output_draws_the_cayley_graph() {
    let dir = tempfile::tempdir().unwrap();
    let out = boxcouple(
        dir.path(),
        &["chain", "build", "--family", "cyclic:2", "--depth", "2", "--format", "dot"],
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("graph"));
}

#[test]
fn isometric_self_maps_of_c4() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(boxcouple(d, &["chain", "build", "--family", "cyclic:2", "--depth", "2", "-o", "c.json"])
        .status
        .success());
    let out = boxcouple(
        d,
        &[
            "maps", "enumerate", "--domain", "c.json:2", "--codomain", "c.json:2",
            "--controls", "affine:1,0/affine:1,0/0", "--basepointed", "--injective",
        ],
    );
    let space = stdout_json(&out);
    assert_eq!(space["members"].as_array().unwrap().len(), 2);
    assert_eq!(space["complete"], true);

    let out = boxcouple(
        d,
        &[
            "maps", "verify", "--domain", "c.json:2", "--codomain", "c.json:2",
            "--controls", "affine:1,0/affine:1,0/0", "--map", "0,1,2,3",
        ],
    );
    assert!(out.status.success());
}

#[test]
fn identical_spaces_have_zero_gh_bounds() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "x.json", PATH3);
    let v = stdout_json(&boxcouple(dir.path(), &["gh", "bounds", "x.json", "x.json"]));
    assert_eq!(v["lower"], 0.0);
    assert_eq!(v["upper"], 0.0);
    assert_eq!(v["exact"], true);
}

#[test]
fn point_mass_prokhorov() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "x.json", PATH3);
    write(d, "a.json", r#"{"p":1,"q":0,"r":0}"#);
    write(d, "b.json", r#"{"p":0,"q":0,"r":1}"#);
    let v = stdout_json(&boxcouple(d, &["measure", "prokhorov", "--space", "x.json", "a.json", "b.json"]));
    assert_eq!(v["value"], 1.0);
}

#[test]
fn rotation_defect_of_the_identity_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        d,
        "c3.json",
        r#"{"labels":["0","1","2"],"matrix":[[0,1,1],[1,0,1],[1,1,0]]}"#,
    );
    write(
        d,
        "rot.json",
        r#"{"symbols":["a","A"],"inverse":[1,0],"perms":[[1,2,0],[2,0,1]]}"#,
    );
    let v = stdout_json(&boxcouple(
        d,
        &[
            "couple", "defect", "--domain", "c3.json", "--domain-action", "rot.json",
            "--codomain", "c3.json", "--codomain-action", "rot.json", "--map", "0,1,2",
        ],
    ));
    assert_eq!(v["max_xi"], 0.0);
    assert_eq!(v["epsilon"], 0.0);
}

#[test]
fn generated_preimage_checks_pass() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&boxcouple(dir.path(), &["couple", "check", "--instances", "10", "--seed", "3"]));
    assert_eq!(v["failed_seeds"].as_array().unwrap().len(), 0);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/configs/doubling.json");
    for t in ["1", "4"] {
        let out = boxcouple(d, &["--threads", t, "pipeline", "run", config, "--out", t]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["report.json", "maps_level_2.json", "partial_map.json", "manifest.json"] {
        let a = std::fs::read(d.join("1").join(f)).unwrap();
        let b = std::fs::read(d.join("4").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let x = tempfile::tempdir().unwrap();
    write(x.path(), "x.json", PATH3);
    let one = boxcouple(x.path(), &["--threads", "1", "gh", "bounds", "x.json", "x.json"]);
    let four = boxcouple(x.path(), &["--threads", "4", "gh", "bounds", "x.json", "x.json"]);
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn errors_carry_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = boxcouple(d, &["--error-json", "box", "diagnostics", "missing.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "validation");

    let out = boxcouple(d, &["chain", "build", "--family", "cyclic:2", "--depth", "6", "--budget", "10"]);
    assert_eq!(out.status.code(), Some(3));

    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/configs/sl2_vs_cyclic.json");
    let out = boxcouple(d, &["pipeline", "run", config, "--out", "sl2"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(d.join("sl2/report.json").exists());
}
