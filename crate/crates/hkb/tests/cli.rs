use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn hkb(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hkb")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn field(json: &str, key: &str) -> f64 {
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    v[key].as_f64().unwrap()
}

#[test]
fn dist_of_single_atoms_at_quarter_period_is_the_total_mass() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "# x,mass\n0.0,1\n");
    let b = write(dir.path(), "b.csv", &format!("# x,mass\n{},1\n", std::f64::consts::FRAC_PI_2));
    let (code, out, _) = hkb(&["dist", &a, &b, "--json"]);
    assert_eq!(code, 0);
    assert!((field(&out, "hk2") - 2.0).abs() < 1e-12, "{out}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    for key in ["hk2", "hk", "converged", "method"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn dist_of_identical_clouds_is_nearly_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "# x,mass\n0.0,1\n0.4,0.5\n1.0,2\n");
    let (code, out, _) = hkb(&["dist", &a, &a, "--json"]);
    assert_eq!(code, 0);
    assert!(field(&out, "hk2").abs() < 1e-3, "{out}");
}

#[test]
fn dirac_reports_the_regime_of_each_bundled_configuration() {
    let dir = tempfile::tempdir().unwrap();
    for (name, want) in [("a", "single"), ("b", "far-product"), ("c", "split"), ("d_single", "single"), ("d_split", "split"), ("d_diffuse", "diffuse")] {
        let r = configs().join("regimes").join(name);
        let inputs: Vec<String> = ["x1.csv", "x2.csv", "x3.csv"].iter().map(|f| r.join(f).to_str().unwrap().to_string()).collect();
        let stem = dir.path().join(name);
        let (code, out, err) = hkb(&["dirac", &inputs[0], &inputs[1], &inputs[2], "--out", stem.to_str().unwrap(), "--json"]);
        assert_eq!(code, 0, "{err}");
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["regime"], want, "{name}");
        assert_eq!(v["valid"], true, "{name}");
    }
}

#[test]
fn bary_of_identical_inputs_returns_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "# x,y,mass\n0.3,-0.2,1.5\n");
    let stem = dir.path().join("nu");
    let (code, _, err) = hkb(&["bary", &a, &a, &a, "--exact", "--out", stem.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(dir.path().join("nu.csv")).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert!((row[0] - 0.3).abs() < 1e-12 && (row[1] + 0.2).abs() < 1e-12 && (row[2] - 1.5).abs() < 1e-12, "{row:?}");
}

#[test]
fn cmm_accepts_the_original_and_rejects_the_permuted_dual_vector() {
    let (code, out, _) = hkb(&["cmm", configs().join("cmm_counterexample.json").to_str().unwrap(), "--json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["contained"], true);
    let (code, out, _) = hkb(&["cmm", configs().join("cmm_counterexample_permuted.json").to_str().unwrap(), "--json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["contained"], false);
}

#[test]
fn tree_of_a_single_dirac_has_one_component_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "# x,mass\n1.0,2\n");
    let out_dir = dir.path().join("tree");
    let (code, _, err) = hkb(&["tree", &a, "--scales", "0.001:1000:9", "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(out_dir.join("tree.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("1")), "{csv}");
}

#[test]
fn tree_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("tree_mixture_1d.json");
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out_dir = dir.path().join(format!("run{k}"));
        let (code, stdout, err) = hkb(&["tree", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        assert!(stdout.contains("longest plateau: n0 = 3"), "{stdout}");
        outputs.push(fs::read(out_dir.join("tree.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn thread_cap_does_not_change_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("tree_mixture_1d.json");
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out_dir = dir.path().join(format!("run{threads}"));
        let out = Command::new(env!("CARGO_BIN_EXE_hkb"))
            .args(["tree", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()])
            .env("HKB_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        outputs.push(fs::read(out_dir.join("tree.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn usage_and_parse_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "# x,mass\n0.0,abc\n");
    let good = write(dir.path(), "good.csv", "# x,mass\n0.0,1\n");
    assert_eq!(hkb(&["dist", &bad, &good]).0, 2);
    assert_eq!(hkb(&["dist", &good, "/nonexistent/file.csv"]).0, 2);
    assert_eq!(hkb(&["frobnicate"]).0, 2);
    let (code, _, err) = hkb(&["dist", &good, &good, "--eps-final=-1"]);
    assert_eq!(code, 2);
    assert!(err.contains("eps"), "{err}");
    let (code, _, err) = hkb(&["tree", &good, "--scales", "5:1:3"]);
    assert_eq!(code, 2, "{err}");
    let (code, _, err) = hkb(&["bary", &good, &good, "--weights", "1,-2"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn negative_masses_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let neg = write(dir.path(), "neg.csv", "# x,mass\n0.0,-1\n");
    assert_eq!(hkb(&["dist", &neg, &neg]).0, 2);
}
