use std::path::{Path, PathBuf};
use std::sync::Mutex;

use hypobridge::cli::{run, ExperimentManifest, EXIT_ERROR, EXIT_PASS, EXIT_USAGE};

// the cache directory variable is process-wide
static ENV: Mutex<()> = Mutex::new(());

fn hb(out: &Path, args: &[&str]) -> i32 {
    let mut all = vec!["hypobridge".to_string(), "--out".into(), out.display().to_string()];
    all.extend(args.iter().map(|s| s.to_string()));
    run(all)
}

fn runs(out: &Path, experiment: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(out.join(experiment))
        .map(|d| d.map(|e| e.unwrap().path()).collect())
        .unwrap_or_default();
    v.sort();
    v
}

fn manifest(dir: &Path) -> ExperimentManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn files_under(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().display().to_string());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn bracket_check_reports_level_two_everywhere_on_heisenberg() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(hb(tmp.path(), &["bracket-check", "--model", "heisenberg", "--set", "grid_points=4"]), EXIT_PASS);
    let dir = &runs(tmp.path(), "bracket-check")[0];
    let text = std::fs::read_to_string(dir.join("levels.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 64);
    assert!(rows.iter().all(|r| r.ends_with(",2")));
    assert!(text.lines().next().unwrap().starts_with("point,x0,x1,x2,level"));
}

#[test]
fn every_output_is_listed_in_the_manifest() {
    let _g = ENV.lock().unwrap_or_else(|e| e.into_inner());
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        hb(tmp.path(), &["bridge", "--model", "torus-grushin", "--from", "0.3,0.2", "--to", "0.7,0.6", "--paths", "40"]),
        EXIT_PASS
    );
    let dir = &runs(tmp.path(), "bridge")[0];
    let m = manifest(dir);
    let mut listed = m.outputs.clone();
    listed.push("manifest.json".into());
    listed.sort();
    assert_eq!(files_under(dir), listed);
    let acc = m.path_accounting.unwrap();
    assert_eq!(acc.requested, 40);
    assert!(acc.failure_fraction < 0.1);
    assert_eq!(m.config.from, vec![0.3, 0.2]);
    assert_eq!(m.pass, Some(true));
    let csv = std::fs::read_to_string(dir.join("paths.csv")).unwrap();
    assert!(csv.starts_with("path_id,step,t,x0,x1,clamped\n"));
    assert!(!csv.contains('\r'));
}

#[test]
fn kernel_cache_is_reused() {
    let _g = ENV.lock().unwrap_or_else(|e| e.into_inner());
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("k.hbk");
    let c = cache.display().to_string();
    let args = ["heat-solve", "--model", "torus-elliptic", "--set", "mesh=16", "--kernel-cache", &c];
    assert_eq!(hb(tmp.path(), &args), EXIT_PASS);
    assert!(cache.exists());
    assert_eq!(hb(tmp.path(), &args), EXIT_PASS);
    let dirs = runs(tmp.path(), "heat-solve");
    assert_eq!(dirs.len(), 2);
    let (first, second) = (manifest(&dirs[0]), manifest(&dirs[1]));
    assert!(first.outputs.contains(&c) && first.inputs.is_empty());
    assert_eq!(second.inputs.len(), 1);
    assert_eq!(second.inputs[0].sha256.len(), 64);
    assert_eq!(
        std::fs::read(dirs[0].join("kernel.csv")).unwrap(),
        std::fs::read(dirs[1].join("kernel.csv")).unwrap()
    );

    // a cache for another model is refused
    let args = ["heat-solve", "--model", "torus-grushin", "--kernel-cache", &c];
    assert_eq!(hb(tmp.path(), &args), EXIT_USAGE);
}

#[test]
fn cache_directory_variable_is_honoured() {
    let _g = ENV.lock().unwrap_or_else(|e| e.into_inner());
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("shared");
    std::env::set_var("HYPOBRIDGE_CACHE_DIR", &cache);
    let code = hb(tmp.path(), &["heat-solve", "--set", "mesh=16"]);
    std::env::remove_var("HYPOBRIDGE_CACHE_DIR");
    assert_eq!(code, EXIT_PASS);
    let cached: Vec<_> = std::fs::read_dir(&cache).unwrap().collect();
    assert_eq!(cached.len(), 1);
    assert!(!runs(tmp.path(), "heat-solve")[0].join("cache").exists());
}

#[test]
fn usage_errors_have_their_own_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(hb(tmp.path(), &["bridge", "--model", "klein-bottle"]), EXIT_USAGE);
    assert_eq!(hb(tmp.path(), &["no-such-command"]), EXIT_USAGE);
    assert_eq!(hb(tmp.path(), &["verify", "--suite", "everything"]), EXIT_USAGE);
    assert_eq!(hb(tmp.path(), &["simulate", "--set", "colour=blue"]), EXIT_USAGE);
    assert_eq!(hb(tmp.path(), &["ccdist", "--model", "heisenberg", "--to", "1,2"]), EXIT_USAGE);
    assert_eq!(hb(tmp.path(), &["--help"]), EXIT_PASS);
}

#[test]
fn execution_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    // no bridge kernel exists for SU(2)
    assert_eq!(hb(tmp.path(), &["bridge", "--model", "su2", "--paths", "2"]), EXIT_ERROR);
}

#[test]
fn ccdist_writes_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(hb(tmp.path(), &["ccdist", "--model", "heisenberg", "--from", "0,0,0", "--to", "0.3,0,0"]), EXIT_PASS);
    let dir = &runs(tmp.path(), "ccdist")[0];
    let text = std::fs::read_to_string(dir.join("ccdist.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,y,d_upper,endpoint_residual,n_segments,restarts");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let d: f64 = row[2].parse().unwrap();
    assert!((d - 0.3).abs() < 3e-3);
}

#[test]
fn report_groups_by_seed_and_rejects_schema_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    assert_eq!(hb(out, &["report"]), EXIT_PASS);
    let empty = &runs(out, "report")[0];
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(empty.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["groups"].as_array().unwrap().len(), 0);

    for seed in ["1", "2", "1"] {
        assert_eq!(hb(out, &["bracket-check", "--seed", seed, "--set", "grid_points=2"]), EXIT_PASS);
    }
    let dirs: Vec<String> = runs(out, "bracket-check").iter().map(|p| p.display().to_string()).collect();
    let mut args = vec!["report", "--set", "experiment=\"merged\""];
    args.extend(dirs.iter().map(String::as_str));
    assert_eq!(hb(out, &args), EXIT_PASS);
    let merged = &runs(out, "merged")[0];
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(merged.join("summary.json")).unwrap()).unwrap();
    let groups = summary["groups"].as_array().unwrap();
    assert_eq!(groups.len(), 2);
    assert_eq!(groups[0]["seed"], 1);
    assert_eq!(groups[0]["runs"].as_array().unwrap().len(), 2);
    assert_eq!(groups[1]["runs"].as_array().unwrap().len(), 1);
    for f in ["sweeps.csv", "fits.csv", "residuals.csv"] {
        assert!(merged.join(f).exists());
    }

    let bad = PathBuf::from(&dirs[0]);
    let mut m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(bad.join("manifest.json")).unwrap()).unwrap();
    m["schema_version"] = 99.into();
    std::fs::write(bad.join("manifest.json"), m.to_string()).unwrap();
    let args = ["report", dirs[0].as_str(), dirs[1].as_str()];
    assert_eq!(hb(out, &args), EXIT_ERROR);
}
