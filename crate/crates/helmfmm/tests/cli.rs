//! Runs the `helmfmm` binary and checks exit codes, files and schemas.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use helmfmm::mesh_io::{write_gmsh, HEADER_BYTES, RECORD_BYTES};
use helmfmm_core::mesh::icosphere;
use jsonschema::JSONSchema;
use serde_json::Value;

fn helmfmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_helmfmm"))
        .args(args)
        .env_remove("HELMFMM_THREADS")
        .output()
        .expect("binary runs")
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(file: &Path, schema: &str) {
    let mut options = JSONSchema::options();
    for shared in ["fmm_stats.schema.json", "exchange_stats.schema.json"] {
        options.with_document(format!("json-schema:///{shared}"), read_json(&schema_dir().join(shared)));
    }
    let compiled = options.compile(&read_json(&schema_dir().join(schema))).expect("schema compiles");
    let doc = read_json(file);
    if let Err(errors) = compiled.validate(&doc) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("{} violates {schema}: {msgs:?}", file.display());
    };
}

fn csv_header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn sphere_gmsh(dir: &Path, subdivisions: usize) -> PathBuf {
    let path = dir.join("sphere.msh");
    let mesh = icosphere(1.0, subdivisions).unwrap();
    write_gmsh(&mesh, std::fs::File::create(&path).unwrap()).unwrap();
    path
}

#[test]
fn convert_is_idempotent_and_sized() {
    let dir = tempfile::tempdir().unwrap();
    let msh = sphere_gmsh(dir.path(), 2);
    let a = dir.path().join("a.bin");
    let b = dir.path().join("b.bin");
    for out in [&a, &b] {
        let o = helmfmm(&["convert", msh.to_str().unwrap(), out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert_eq!(bytes.len() as u64, HEADER_BYTES + RECORD_BYTES * 80);
}

#[test]
fn convert_missing_file_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let o = helmfmm(&["convert", dir.path().join("nope.msh").to_str().unwrap(), dir.path().join("x.bin").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn solve_writes_valid_outputs_and_reads_binary_meshes() {
    let dir = tempfile::tempdir().unwrap();
    let msh = sphere_gmsh(dir.path(), 3);
    let bin = dir.path().join("sphere.bin");
    assert!(helmfmm(&["convert", msh.to_str().unwrap(), bin.to_str().unwrap()]).status.success());
    let out = dir.path().join("solve");
    let o = helmfmm(&["solve", "--mesh", bin.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_valid(&out.join("report.json"), "solve_report.schema.json");
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["converged"], Value::Bool(true));
    assert!(report["true_residual"].as_f64().unwrap() <= 1e-4);
    assert_eq!(report["grain"], 256);
    assert_eq!(report["ncrit"], 128);
    assert_eq!(csv_header(&out.join("residuals.csv")), "iteration,residual,seconds");
    assert_eq!(csv_header(&out.join("field.csv")), "theta,re,im,magnitude");
    assert_eq!(std::fs::read_to_string(out.join("field.csv")).unwrap().lines().count(), 182);
}

#[test]
fn solve_reports_non_convergence_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = helmfmm(&["solve", "--sphere", "2", "--max-iterations", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(read_json(&out.join("report.json"))["converged"], Value::Bool(false));
}

#[test]
fn solve_records_thread_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = Command::new(env!("CARGO_BIN_EXE_helmfmm"))
        .args(["solve", "--sphere", "1", "--out", out.to_str().unwrap()])
        .env("HELMFMM_THREADS", "3")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(read_json(&out.join("report.json"))["threads"], 3);
    let bad = Command::new(env!("CARGO_BIN_EXE_helmfmm"))
        .args(["solve", "--sphere", "1", "--out", out.to_str().unwrap()])
        .env("HELMFMM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(64));
}

#[test]
fn usage_errors_exit_64() {
    let cases: &[&[&str]] = &[
        &["solve", "--sphere", "1", "--frequency", "100", "--wavenumber", "2"],
        &["solve", "--sphere", "1", "--frequency", "0"],
        &["solve", "--sphere", "1", "--wavenumber", "-1"],
        &["solve", "--sphere", "1", "--order", "4"],
        &["solve", "--sphere", "1", "--rtol", "2"],
        &["solve", "--sphere", "1", "--grain", "64"],
        &["solve", "--sphere", "1", "--grain", "16", "--ncrit", "64"],
        &["solve"],
        &["solve", "--sphere", "1", "--singularity", "sometimes"],
        &["verify", "--sphere", "1", "--frequency", "0"],
        &["partition-sim", "--ranks", "0"],
        &["partition-sim", "--alpha", "lots"],
        &["tune", "--grains", "16", "--ncrits", "32"],
        &["frobnicate"],
    ];
    for args in cases {
        let o = helmfmm(args);
        assert_eq!(o.status.code(), Some(64), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn singularity_none_needs_more_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let mut its = Vec::new();
    for mode in ["none", "self+near"] {
        let out = dir.path().join(mode);
        let o = helmfmm(&["solve", "--sphere", "3", "--singularity", mode, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        its.push(read_json(&out.join("report.json"))["iterations"].as_u64().unwrap());
    }
    assert!(its[0] > its[1], "{its:?}");
}

#[test]
fn verify_writes_reference_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = helmfmm(&["verify", "--sphere", "2", "--orders", "1,2", "--observation-count", "19", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_valid(&out.join("verify.json"), "verify_report.schema.json");
    assert_valid(&out.join("order2_report.json"), "solve_report.schema.json");
    assert_eq!(
        csv_header(&out.join("order1_field.csv")),
        "theta,re,im,magnitude,reference_re,reference_im,reference_magnitude"
    );
    let v = read_json(&out.join("verify.json"));
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    let err = v["rows"][1]["max_relative_error"].as_f64().unwrap();
    assert!(err > 0.0 && err < 1e-2, "{err}");
}

#[test]
fn scaling_pools_duplicate_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sc");
    let o = helmfmm(&["scaling", "--sizes", "500,500,1000", "--repeats", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_valid(&out.join("scaling.json"), "scaling_report.schema.json");
    let csv = std::fs::read_to_string(out.join("scaling.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "n,seconds,count");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("500,") && rows[1].ends_with(",2"));
    assert!(rows[2].starts_with("1000,") && rows[2].ends_with(",1"));

    let single = dir.path().join("one");
    assert!(helmfmm(&["scaling", "--sizes", "800", "--repeats", "1", "--out", single.to_str().unwrap()]).status.success());
    assert_eq!(std::fs::read_to_string(single.join("scaling.csv")).unwrap().lines().count(), 2);
    assert_eq!(read_json(&single.join("scaling.json"))["slope"], Value::Null);
}

#[test]
fn partition_sim_outputs_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = helmfmm(&["partition-sim", "--ranks", "64", "--seed", "7", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["partition.json", "trace.csv", "balance.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_valid(&a.join("partition.json"), "partition_report.schema.json");
    assert_eq!(csv_header(&a.join("trace.csv")), "stage,src,dst,bytes,hops");
    assert_eq!(csv_header(&a.join("balance.csv")), "alpha,imbalance,runtime,imbalance_ratio");
    let r = read_json(&a.join("partition.json"));
    assert!(r["hsdx"]["hop_bytes"].as_u64() < r["alltoall"]["hop_bytes"].as_u64());
    assert!(r["balance"]["imbalance_ratio"].as_f64().unwrap() <= 1.0);

    let one = dir.path().join("one");
    assert!(helmfmm(&["partition-sim", "--ranks", "1", "--out", one.to_str().unwrap()]).status.success());
    assert_eq!(std::fs::read_to_string(one.join("trace.csv")).unwrap().lines().count(), 1);
    assert_valid(&one.join("partition.json"), "partition_report.schema.json");
}

#[test]
fn solve_is_reproducible_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        assert!(helmfmm(&["solve", "--sphere", "2", "--out", out.to_str().unwrap()]).status.success());
        let mut r = read_json(&out.join("report.json"));
        r["assembly_seconds"] = Value::Null;
        r["solve_seconds"] = Value::Null;
        reports.push(r);
        let field = std::fs::read(out.join("field.csv")).unwrap();
        reports.push(Value::String(String::from_utf8(field).unwrap()));
    }
    assert_eq!(reports[0], reports[2]);
    assert_eq!(reports[1], reports[3]);
}

#[test]
fn tune_presets_singletons_and_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    for preset in ["skylake", "knl"] {
        let o = helmfmm(&["tune", "--preset", preset, "--out", path.to_str().unwrap()]);
        assert!(o.status.success());
        assert_valid(&path, "tune_report.schema.json");
        assert_eq!(read_json(&path)["c"], 128);
    }
    assert!(helmfmm(&["tune", "--grains", "64", "--ncrits", "32", "--out", path.to_str().unwrap()]).status.success());
    let t = read_json(&path);
    assert_eq!((t["s"].clone(), t["c"].clone()), (Value::from(64), Value::from(32)));
    assert_eq!(t["warning"], Value::Null);

    let o = helmfmm(&["tune", "--grains", "1024", "--ncrits", "1024", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert_valid(&path, "tune_report.schema.json");
    assert!(read_json(&path)["warning"].is_string());
}

#[test]
fn schemas_reject_malformed_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    assert!(helmfmm(&["solve", "--sphere", "1", "--out", out.to_str().unwrap()]).status.success());
    let mut r = read_json(&out.join("report.json"));
    r["fmm"]["order"] = Value::from("six");
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r.to_string()).unwrap();
    let caught = std::panic::catch_unwind(|| assert_valid(&bad, "solve_report.schema.json"));
    assert!(caught.is_err(), "nested schema reference was not enforced");
}
