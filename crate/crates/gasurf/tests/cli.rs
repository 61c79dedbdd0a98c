//! End-to-end tests of the command-line interface: artifact schemas,
//! exit codes, and byte-level determinism across runs and thread counts.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gasurf"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn gasurf")
}

fn write_cfg(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {path:?}: {e}"))
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines
        .next()
        .expect("CSV needs a header row")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

const FLAT_CFG: &str = r#"
[collision]
kind = "constant"
nu = 1.0

[grid]
v_max = 6.0
n_vx = 12
n_vz = 12

[bc]
regime = "maxwell-like"
"#;

// ---------------------------------------------------------------------
// Exit codes
// ---------------------------------------------------------------------

#[test]
fn help_exits_zero_and_missing_config_is_a_usage_error() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let out = run(&["flat-kernel"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("--config"), "stderr explains the fix: {msg}");
}

#[test]
fn unknown_config_key_is_rejected_with_a_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "potenial = 1\n");
    let out = run(&["flat-kernel", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(
        msg.contains("potenial") && msg.contains("potential"),
        "rejection names the bad key and the correction: {msg}"
    );
}

#[test]
fn invalid_values_name_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    for (text, field) in [
        ("[potential]\nw_m = -1.0\n", "potential.w_m"),
        ("[grid]\nv_max = 0.0\n", "grid.v_max"),
        ("[bc]\nregime = \"telepathic\"\n", "bc.regime"),
    ] {
        let cfg = write_cfg(dir.path(), text);
        let out = run(&["validate-potential", "--config", &cfg]);
        assert_eq!(out.status.code(), Some(2), "config: {text}");
        let msg = String::from_utf8_lossy(&out.stderr);
        assert!(msg.contains(field), "message names {field}: {msg}");
    }
}

#[test]
fn numerical_failure_exits_three_with_structured_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "[collision]\nkind = \"constant\"\n[solver]\nmax_iterations = 1\n",
    );
    let out = run(&["lksl", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let msg: serde_json::Value =
        serde_json::from_slice(&out.stderr).expect("stderr is one JSON object");
    assert_eq!(msg["error"], "non-convergence");
}

#[test]
fn invariant_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "[collision]\nkind = \"constant\"\n[solver]\ncheck_tol = 1e-16\n",
    );
    let out = run(&["flat-kernel", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

// ---------------------------------------------------------------------
// Artifact schemas
// ---------------------------------------------------------------------

#[test]
fn flat_kernel_emits_column_stochastic_masses_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), FLAT_CFG);
    let out_dir = dir.path().join("out");
    let out = run(&["flat-kernel", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    let (header, rows) = parse_csv(&read(&out_dir.join("kernel.csv")));
    assert_eq!(header, ["out_index", "in_index", "mass"]);
    let n = 12 * 12;
    assert_eq!(rows.len(), n * n);
    let mut col_sums = vec![0.0f64; n];
    for row in &rows {
        let j: usize = row[1].parse().unwrap();
        let mass: f64 = row[2].parse().unwrap();
        assert!(mass >= 0.0);
        col_sums[j] += mass;
    }
    for (j, s) in col_sums.iter().enumerate() {
        assert!((s - 1.0).abs() < 1e-8, "column {j} mass {s}");
    }

    let meta: serde_json::Value =
        serde_json::from_str(&read(&out_dir.join("kernel.meta.json"))).unwrap();
    let hash = meta["config_sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert!(meta["report"]["reciprocity"].as_f64().unwrap() < 1e-8);
    assert_eq!(meta["grid"]["n_vx"], 12);
}

#[test]
fn accommodation_table_has_the_documented_columns_and_symmetries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), FLAT_CFG);
    let out_dir = dir.path().join("out");
    let out = run(&["accommodation", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    let (header, rows) = parse_csv(&read(&out_dir.join("a_of_v.csv")));
    assert_eq!(header, ["v_x", "v_z", "tau_z", "tau_ms_bar", "a", "a_pade"]);
    assert_eq!(rows.len(), 12 * 12);
    use std::collections::HashMap;
    let mut by_key: HashMap<(String, String), &Vec<String>> = HashMap::new();
    for row in &rows {
        let a: f64 = row[4].parse().unwrap();
        let ap: f64 = row[5].parse().unwrap();
        let vz: f64 = row[1].parse().unwrap();
        assert!(a > 0.0 && a < 1.0 && ap > 0.0 && ap < 1.0);
        assert!(vz > 0.0, "v_z column is the incoming speed magnitude");
        by_key.insert((row[0].clone(), row[1].clone()), row);
    }
    // Evenness in v_x is bitwise: the mirrored row differs only in sign.
    for row in &rows {
        let mirrored = (format!("-{}", row[0]), row[1].clone());
        if let Some(twin) = by_key.get(&mirrored) {
            assert_eq!(&row[2..], &twin[2..], "rows for ±v_x agree bitwise");
        }
    }
    // Every float round-trips through shortest formatting.
    for row in &rows {
        for cell in row {
            let x: f64 = cell.parse().unwrap();
            assert_eq!(&format!("{x}"), cell, "shortest round-trip formatting");
        }
    }
}

#[test]
fn lksl_and_apply_bc_emit_outgoing_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), FLAT_CFG);
    let out_dir = dir.path().join("out");
    let out = run(&["lksl", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = parse_csv(&read(&out_dir.join("lksl_outgoing.csv")));
    assert_eq!(header, ["v_x", "v_z", "f_in", "f_out"]);
    assert_eq!(rows.len(), 12 * 12);
    for row in &rows {
        assert!(row[3].parse::<f64>().unwrap() >= 0.0);
    }
    let meta: serde_json::Value =
        serde_json::from_str(&read(&out_dir.join("lksl_outgoing.meta.json"))).unwrap();
    assert!(meta["iterations"].as_u64().unwrap() > 0);

    // Specular apply returns the inflow bitwise.
    let cfg2 = write_cfg(
        dir.path(),
        "[grid]\nv_max = 6.0\nn_vx = 12\nn_vz = 12\n[bc]\nregime = \"specular\"\n",
    );
    let out = run(&["apply-bc", "--config", &cfg2, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = parse_csv(&read(&out_dir.join("outgoing.csv")));
    assert_eq!(header, ["v_x", "v_z", "f_in", "f_out"]);
    for row in &rows {
        assert_eq!(row[2], row[3], "specular reflection is exact");
    }
}

#[test]
fn rough_trace_budget_accounting_is_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        r#"
[potential]
s0 = 0.7
s1 = 0.12

[collision]
kind = "constant"

[solver]
trace_count = 150
"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&["rough-trace", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = parse_csv(&read(&out_dir.join("trace.csv")));
    assert_eq!(
        header,
        ["y_in", "v_x_in", "v_z_in", "y_out", "v_x_out", "v_z_out", "tau_fl", "r", "energy_drift", "steps"]
    );
    let meta: serde_json::Value =
        serde_json::from_str(&read(&out_dir.join("trace.meta.json"))).unwrap();
    let requested = meta["requested"].as_u64().unwrap();
    let below = meta["below_cutoff"].as_u64().unwrap();
    let traced = meta["traced"].as_u64().unwrap();
    let failed = meta["failed"].as_u64().unwrap();
    assert_eq!(requested, 150);
    assert_eq!(below + traced + failed, requested);
    assert_eq!(rows.len() as u64, traced);
    for row in &rows {
        let vz_in: f64 = row[2].parse().unwrap();
        let vz_out: f64 = row[5].parse().unwrap();
        assert!(vz_in > 0.0 && vz_out < 0.0, "entry ascends, exit descends");
    }
}

#[test]
fn smooth_limit_rough_kernel_records_the_mirror_mass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        r#"
[potential]
s0 = 0.8
s1 = 0.0

[grid]
v_max = 5.0
n_vx = 8
n_vz = 8

[solver]
samples_per_cell = 32

[bc]
regime = "rough-specular"
"#,
    );
    let out_dir = dir.path().join("out");
    let out = run(&["rough-kernel", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let meta: serde_json::Value =
        serde_json::from_str(&read(&out_dir.join("kernel.meta.json"))).unwrap();
    assert!(
        meta["specular_mirror_cell_mass_min"].as_f64().unwrap() >= 0.99,
        "flat scaling concentrates every column in the mirror cell"
    );
    assert_eq!(meta["regime"], "rough-specular");
}

// ---------------------------------------------------------------------
// Determinism
// ---------------------------------------------------------------------

#[test]
fn artifacts_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        r#"
[potential]
s0 = 0.7
s1 = 0.12

[collision]
kind = "constant"

[grid]
v_max = 5.0
n_vx = 8
n_vz = 8

[solver]
samples_per_cell = 32
trace_count = 120

[bc]
regime = "rough-maxwell-like"
"#,
    );
    let mut artifacts: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for threads in ["1", "4", "4"] {
        let out_dir = dir.path().join(format!("out{}", artifacts.len()));
        for cmd in ["rough-kernel", "rough-trace", "accommodation"] {
            let out = run(&[
                cmd,
                "--config",
                &cfg,
                "--out",
                out_dir.to_str().unwrap(),
                "--threads",
                threads,
            ]);
            assert_eq!(out.status.code(), Some(0), "{cmd} with {threads} threads");
        }
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        artifacts.push(files);
    }
    assert!(artifacts[0].len() >= 6, "three commands, CSV + metadata each");
    for later in &artifacts[1..] {
        assert_eq!(artifacts[0].len(), later.len());
        for (a, b) in artifacts[0].iter().zip(later) {
            assert_eq!(a.0, b.0);
            assert!(a.1 == b.1, "{} differs between runs", a.0);
        }
    }
}

// ---------------------------------------------------------------------
// Shipped configurations
// ---------------------------------------------------------------------

#[test]
fn shipped_flat_config_verifies_clean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/flat.toml");
    let out = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("report.json"))).unwrap();
    assert_eq!(report["passed"], true);
    for name in ["nonneg", "normalization", "mass_flux", "reciprocity"] {
        assert!(
            report["kernel_report"][name].as_f64().unwrap() < 1e-8,
            "{name} below 1e-8"
        );
    }
}
