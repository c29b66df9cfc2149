use std::path::Path;
use std::process::{Command, Output};

fn swe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swe")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_snapshots_probe_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "rain.cfg",
        "[scenario]\nname = rain_test3\nfinal_time = 20\n[mesh]\ncells = 40\n[output]\ncadence = 10\nformat = both\n",
    );
    let out_dir = dir.path().join("out");
    let out = swe(&["run", &cfg, "--output", out_dir.to_str().unwrap(), "--cfl", "0.4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("scenario=rain_test3") && stdout.contains("nodes=41"), "{stdout}");
    for f in ["rain_test3_0000.csv", "rain_test3_0002.csv", "rain_test3_0002.vtk", "rain_test3_probe.csv", "report.txt"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let snap = std::fs::read_to_string(out_dir.join("rain_test3_0002.csv")).unwrap();
    assert_eq!(snap.lines().next(), Some("x,y,h,qx,qy,z"));
    assert_eq!(snap.lines().count(), 42);
}

#[test]
fn mesh_and_scheme_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.cfg", "[scenario]\nname = vortex\nfinal_time = 0.05\n[output]\nerrors = false\n");
    let out = swe(&["run", &cfg, "--mesh", "8", "--scheme", "ssp33"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("nodes=81") && stdout.contains("scheme=RK(3,3;1/3)"), "{stdout}");
    assert!(!stdout.contains("delta_1="));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for text in ["[scenario]\nname = vortex\n[time]\nspeed = 1\n", "[time]\ncfl = 0.5\n", "[scenario]\nname = lake\n"] {
        let cfg = write(dir.path(), "bad.cfg", text);
        let out = swe(&["run", &cfg]);
        assert_eq!(out.status.code(), Some(2), "{text}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
    assert_eq!(swe(&["run", "/nonexistent/run.cfg"]).status.code(), Some(2));
    let cfg = write(dir.path(), "ok.cfg", "[scenario]\nname = vortex\n");
    assert_eq!(swe(&["run", &cfg, "--cfl", "2"]).status.code(), Some(2));
    assert_eq!(swe(&["run", &cfg, "--scheme", "RK(9,9;1)"]).status.code(), Some(2));
    assert_eq!(swe(&["verify", "everything"]).status.code(), Some(2));
}

#[test]
fn inadmissible_result_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "u.cfg",
        "[scenario]\nname = paraboloid\nfinal_time = 2\n[mesh]\ncells = 16\n[solver]\nlimiter = unlimited\n",
    );
    let out = swe(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not admissible"));
}

#[test]
fn verify_single_criterion() {
    let out = swe(&["verify", "wave_speed"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("PASS wave_speed:"), "{stdout}");
    assert!(stdout.contains("1 passed, 0 failed"));
}
