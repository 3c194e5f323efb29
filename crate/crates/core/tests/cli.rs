//! End-to-end runs of the `choquard-lab` binary: exit statuses, artifact
//! formats, reproducibility and kernel-cache transparency.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_choquard-lab");

const SOLVE: &str = r#"mode = "solve"

[problem]
dim_n = 3
alpha = 2.0
regime = "lower-critical"
q = 2.8
a_coef = 1.0
epsilon = 100.0

[grid]
r_max = 60.0
node_count = 200
stretch = 10.0

[output]
dir = "out"
"#;

fn sweep_config() -> String {
    SOLVE
        .replace("mode = \"solve\"", "mode = \"sweep\"")
        .replace("r_max = 60.0\nnode_count = 200\nstretch = 10.0", "r_max = 200.0\nnode_count = 300\nstretch = 20.0")
        .replace("[output]", "[schedule]\neps_min = 1e2\neps_max = 1e7\npoints = 6\nmultistart = 1\n\n[output]")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], cache: Option<&Path>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("CHOQUARD_CACHE_DIR");
    if let Some(c) = cache {
        cmd.env("CHOQUARD_CACHE_DIR", c);
    }
    cmd.output().unwrap()
}

fn run_config(config: &Path, out: &Path, extra: &[&str], cache: Option<&Path>) -> Output {
    let mut args = vec!["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args, cache)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_writes_artifacts_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "solve.toml", SOLVE);
    let out = tmp.path().join("run");
    let o = run_config(&cfg, &out, &[], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in ["config.toml", "ground_state.json", "profile.csv", "manifest.json"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    assert_eq!(fs::read_to_string(out.join("config.toml")).unwrap(), SOLVE);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema"], "choquard-manifest/1");
    assert_eq!(manifest["config"], SOLVE);
    assert_eq!(manifest["code_version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["wall_seconds"].as_f64().unwrap() >= 0.0);
    let gs: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("ground_state.json")).unwrap()).unwrap();
    assert_eq!(gs["status"], "converged");
    assert!(gs["energy"].as_f64().unwrap() > 0.0);
}

#[test]
fn malformed_q_exits_2_naming_the_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", &SOLVE.replace("q = 2.8", "q = 1.5"));
    let o = run_config(&cfg, &tmp.path().join("run"), &[], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("2 < q < 2 + 4/N"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_and_missing_sections_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        SOLVE.replace("a_coef = 1.0", "a_coef = 1.0\nbeta = 2.0"),
        SOLVE.replace("[output]", "[extra]\nx = 1\n\n[output]"),
        SOLVE.replace("mode = \"solve\"", "mode = \"sweep\""),
        SOLVE.replace("mode = \"solve\"", "mode = \"fly\""),
    ];
    for (k, text) in cases.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("bad{k}.toml"), text);
        let o = run_config(&cfg, &tmp.path().join("run"), &[], None);
        assert_eq!(o.status.code(), Some(2), "case {k}: {}", stderr(&o));
    }
    let o = run(&["--config", tmp.path().join("absent.toml").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn nonconvergence_exits_3_only_in_strict_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SOLVE.replace("[output]", "[solver]\nmax_iter = 1\nnewton_max_iter = 0\n\n[output]");
    let cfg = write_config(tmp.path(), "starved.toml", &text);
    let lax = run_config(&cfg, &tmp.path().join("lax"), &[], None);
    assert_eq!(lax.status.code(), Some(0), "{}", stderr(&lax));
    let gs = fs::read_to_string(tmp.path().join("lax/ground_state.json")).unwrap();
    assert!(gs.contains("\"status\": \"failed\""));
    let strict = run_config(&cfg, &tmp.path().join("strict"), &["--strict"], None);
    assert_eq!(strict.status.code(), Some(3), "{}", stderr(&strict));
}

#[test]
fn unwritable_output_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "solve.toml", SOLVE);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, b"not a directory").unwrap();
    let o = run_config(&cfg, &blocker.join("run"), &[], None);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

fn artifact_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "json")))
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn sweeps_are_byte_identical_and_cache_transparent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sweep.toml", &sweep_config());
    let cache = tmp.path().join("cache");
    let plain = tmp.path().join("plain");
    let again = tmp.path().join("again");
    let cold = tmp.path().join("cold");
    let warm = tmp.path().join("warm");
    for (out, cache) in [(&plain, None), (&again, None), (&cold, Some(cache.as_path())), (&warm, Some(cache.as_path()))] {
        let o = run_config(&cfg, out, &["--threads", "1"], cache);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert!(fs::read_dir(&cache).unwrap().count() > 0, "the cold run populates the cache");
    let reference = artifact_bytes(&plain);
    let names: Vec<&str> = reference.iter().map(|(n, _)| n.as_str()).collect();
    for name in ["sweep.csv", "sweep.json", "report.csv", "report.json", "mass_curve.csv"] {
        assert!(names.contains(&name), "missing {name} in {names:?}");
    }
    for other in [&again, &cold, &warm] {
        assert_eq!(artifact_bytes(other), reference, "{} differs", other.display());
    }
}

#[test]
fn csv_artifacts_use_lf_and_17_significant_digits() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "solve.toml", SOLVE);
    let out = tmp.path().join("run");
    assert_eq!(run_config(&cfg, &out, &[], None).status.code(), Some(0));
    let text = fs::read_to_string(out.join("profile.csv")).unwrap();
    assert!(!text.contains('\r') && text.ends_with('\n'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r_frame,w,r,u"));
    for line in lines {
        for cell in line.split(',') {
            let mantissa = cell.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
            assert_eq!(mantissa.len(), 17, "{cell}");
            assert!(cell.parse::<f64>().is_ok());
        }
    }
}

#[test]
fn mode_and_threads_flags_are_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "solve.toml", SOLVE);
    let o = run_config(&cfg, &tmp.path().join("run"), &["--threads", "0"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = run_config(&cfg, &tmp.path().join("run"), &["--mode", "sweep"], None);
    assert_eq!(o.status.code(), Some(2), "sweep mode needs a schedule");
    let o = run(&["--mode", "solve"], None);
    assert_eq!(o.status.code(), Some(2));
}
