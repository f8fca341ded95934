use std::path::Path;
use std::process::{Command, Output};

use rtmixed_cli::{StudyConfig, CSV_HEADER};

fn rtmixed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtmixed"))
        .args(args)
        .env_remove("RTMIXED_THREADS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const SMALL: &str = "[study]\nmode = convergence\nexample = allen_cahn_2d\nr = 0\nM = 4, 8, 16\n";

#[test]
fn convergence_table_has_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.ini", SMALL);
    let out = rtmixed(&["--config", &config]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 4);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first.len(), 13);
    assert_eq!(first[0], "4");
    assert_eq!(first[1], "2.5000000000e-1");
    assert!(first[5].is_empty() && first[6].is_empty());
    assert!(first[12].is_empty(), "wall time is opt-in");
    let last: Vec<&str> = lines[3].split(',').collect();
    let order: f64 = last[5].parse().unwrap();
    assert!((order - 1.0).abs() < 0.1);
}

#[test]
fn identical_runs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.ini", SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    assert_eq!(rtmixed(&["--config", &config, "--out", a.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(rtmixed(&["--config", &config, "--out", b.to_str().unwrap()]).status.code(), Some(0));
    let parallel = rtmixed(&["--config", &config, "--out", c.to_str().unwrap(), "--parallel", "--threads", "2"]);
    assert_eq!(parallel.status.code(), Some(0));
    let a = std::fs::read(a).unwrap();
    assert_eq!(a, std::fs::read(b).unwrap());
    assert_eq!(a, std::fs::read(c).unwrap());
}

#[test]
fn timing_fills_the_last_column() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.ini", SMALL);
    let out = rtmixed(&["--config", &config, "--timing"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert!(row[12].parse::<f64>().unwrap() >= 0.0);
}

#[test]
fn unsupported_degree_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.ini", &SMALL.replace("r = 0", "r = 3"));
    let out = rtmixed(&["--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("RT_0, RT_1, RT_2 in 2D") && stderr.contains("RT_0, RT_1 in 3D"), "{stderr}");
}

#[test]
fn bad_inputs_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.ini", SMALL);
    assert_eq!(rtmixed(&["--config", "/nonexistent/study.ini"]).status.code(), Some(2));
    assert_eq!(rtmixed(&["--config", &config, "--mode", "fastest"]).status.code(), Some(2));
    assert_eq!(rtmixed(&["--config", &config, "--threads", "0"]).status.code(), Some(2));
    assert_eq!(rtmixed(&["--config", &config, "--vtk-stride", "0"]).status.code(), Some(2));
    assert_eq!(rtmixed(&["--bogus"]).status.code(), Some(2));
    // A stability sweep needs fixed time steps.
    assert_eq!(rtmixed(&["--config", &config, "--mode", "stability"]).status.code(), Some(2));
}

#[test]
fn blow_up_exits_with_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[study]\nmode = solve\nexample = custom\ndim = 2\nr = 0\nM = 2\ntau = 0.25\n\
                [custom]\nsource = 1e200\ncubic = pure\n";
    let config = write_config(dir.path(), "c.ini", text);
    let out = rtmixed(&["--config", &config]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step 2"));
}

#[test]
fn embedding_mode_reports_the_chain() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("convergence", "embedding");
    let config = write_config(dir.path(), "c.ini", &text);
    let out = rtmixed(&["--config", &config]);
    assert_eq!(out.status.code(), Some(0));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.matches(" ok").count(), 3, "{stderr}");
    let csv = String::from_utf8(out.stdout).unwrap();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert!(cols[8..12].iter().all(|c| c.parse::<f64>().unwrap() > 0.0));
    }
}

#[test]
fn custom_problem_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let vtk = dir.path().join("vtk");
    let text = format!(
        "[study]\nmode = solve\nexample = custom\ndim = 2\nr = 1\nM = 4\ntau = 0.1\nT = 0.5\n\
         [custom]\nsource = 1\nadvection = 1, 1, 0\ncubic = allen_cahn\n\
         [output]\nvtk_dir = {}\n",
        vtk.display()
    );
    let config = write_config(dir.path(), "c.ini", &text);
    let out = rtmixed(&["--config", &config, "--vtk-stride", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert!(row[3].is_empty() && row[4].is_empty(), "no exact solution, no errors");
    assert_eq!(std::fs::read_dir(&vtk).unwrap().count(), 4);
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        StudyConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 6);
}
