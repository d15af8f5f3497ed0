use std::path::Path;
use std::process::{Command, Output};

fn gadm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gadm")).args(args).env("GADM_THREADS", "2").output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn invalid_config_exits_2_with_line() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "bad.toml",
        "[scenario]\nname = \"kasner\"\n[grid]\nn = [8, 8, 8]\n[time]\nt_end = 2.0\ncfl_factor = 3.0\n",
    );
    let o = gadm(&["evolve", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("cfl_factor") && err.contains("line 7"), "{err}");
}

#[test]
fn geodesic_boundary_on_periodic_grid_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "bad.toml",
        "[scenario]\nname = \"kasner\"\n[grid]\nn = [8, 8, 8]\n[time]\nt_end = 1.1\n[boundary]\nkind = \"geodesic\"\n",
    );
    assert_eq!(gadm(&["evolve", &cfg]).status.code(), Some(2));
}

#[test]
fn missing_snapshot_exits_1() {
    assert_eq!(gadm(&["inspect", "/nonexistent/snap.gadm"]).status.code(), Some(1));
}

#[test]
fn bad_thread_count_exits_2() {
    let o = Command::new(env!("CARGO_BIN_EXE_gadm"))
        .args(["check-hyperbolicity"])
        .env("GADM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hyperbolicity_checks_pass() {
    let o = gadm(&["check-hyperbolicity"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(!out.contains("FAIL"), "{out}");
    assert!(out.contains("good:") && out.contains("bad:"));
    let j = gadm(&["check-hyperbolicity", "--json"]);
    for line in stdout(&j).lines() {
        serde_json::from_str::<serde_json::Value>(line).expect("json line");
    }
}

#[test]
fn evolve_then_inspect_and_norms() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("run");
    let cfg = write(
        d.path(),
        "mink.toml",
        "[scenario]\nname = \"minkowski\"\n[grid]\nn = [6, 6, 9]\ntopology = \"slab\"\n[time]\nt_end = 0.1\noutput_interval = 0.05\n[boundary]\nkind = \"geodesic\"\n",
    );
    let o = gadm(&["evolve", &cfg, "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.resolved.toml", "residuals.csv", "final.gadm"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let snap = out.join("final.gadm");
    let i = gadm(&["inspect", snap.to_str().unwrap()]);
    assert_eq!(i.status.code(), Some(0));
    assert!(stdout(&i).contains("t = 0.1"), "{}", stdout(&i));
    let n = gadm(&["norms", snap.to_str().unwrap(), "--s", "2"]);
    assert_eq!(n.status.code(), Some(0));
    assert!(stdout(&n).contains("energy = 0.000000000000e0"), "{}", stdout(&n));
    let resolved = std::fs::read_to_string(out.join("config.resolved.toml")).unwrap();
    let again = write(d.path(), "again.toml", &resolved);
    assert_eq!(gadm(&["evolve", &again, "--output", d.path().join("b").to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn sample_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let text = std::fs::read_to_string(&p).unwrap();
        gadm::config::parse_config(&text).unwrap_or_else(|err| panic!("{}: {err}", p.display()));
        seen += 1;
    }
    assert!(seen >= 3);
}
