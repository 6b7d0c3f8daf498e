use std::path::Path;
use std::process::{Command, Output};

use gridsync::linalg::eigenvalues;
use gridsync::network::{assemble, ieee14, Ieee14Options};
use gridsync::smallsignal::ModeReport;
use gridsync_cli::config::load_topology;
use gridsync_cli::default_data_dir;

fn gridsync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridsync")).args(args).env_remove("GRIDSYNC_OUT_DIR").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest_files(dir: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mut files: Vec<String> =
        v["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap().to_owned()).collect();
    files.sort();
    files
}

fn files_on_disk(dir: &Path) -> Vec<String> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

#[test]
fn shipped_ieee14_matches_the_builtin_system() {
    let (top, devs) = load_topology(&default_data_dir().join("ieee14.json")).unwrap();
    let (want_top, want_devs) = ieee14(&Ieee14Options::default());
    assert_eq!(top.buses.len(), want_top.buses.len());
    assert_eq!(top.lines.len(), want_top.lines.len());
    for (a, b) in top.lines.iter().zip(&want_top.lines) {
        assert_eq!((a.from, a.to), (b.from, b.to));
        assert!((a.r - b.r).abs() < 1e-12 && (a.x - b.x).abs() < 1e-12 && (a.b - b.b).abs() < 1e-12, "{a:?} vs {b:?}");
    }
    for (a, b) in top.buses.iter().zip(&want_top.buses) {
        assert_eq!(a.id, b.id);
        assert!((a.shunt_b - b.shunt_b).abs() < 1e-12);
    }
    let names = |d: &[gridsync::network::Device]| d.iter().map(|d| (d.name.clone(), d.bus)).collect::<Vec<_>>();
    assert_eq!(names(&devs), names(&want_devs));

    let dominant = |top, devs| {
        let m = assemble(top, devs).unwrap();
        ModeReport::from_poles(eigenvalues(&m.a).unwrap()).unwrap().dominant
    };
    let (a, b) = (dominant(top, devs), dominant(want_top, want_devs));
    assert!((a - b).norm() / b.norm() < 1e-3, "{a} vs {b}");
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(gridsync(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn malformed_json_reports_position_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"buses": [{"id": 1, "lod": 3}], "lines": [], "devices": []}"#).unwrap();
    let out = dir.path().join("out");
    let o = gridsync(&["--out", out.to_str().unwrap(), "poles", "--topology", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("bad.json:1:"), "{msg}");
    assert!(msg.contains("buses[0].lod"), "{msg}");
}

#[test]
fn missing_file_exits_2() {
    let o = gridsync(&["poles", "--topology", "/nonexistent/topology.json"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn nonconverging_sweep_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridsync(&[
        "--out",
        dir.path().to_str().unwrap(),
        "rootlocus",
        "--param",
        "grid_scale",
        "--start",
        "0.4",
        "--end",
        "2",
        "--kind",
        "gfl",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn manifests_list_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let rl = dir.path().join("rl");
    let o = gridsync(&["--out", rl.to_str().unwrap(), "rootlocus", "--preset", "gfm-droop", "--points", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(manifest_files(&rl), files_on_disk(&rl));

    let sim = dir.path().join("sim");
    let scenario = default_data_dir().join("two_gfl_fault.json");
    let o = gridsync(&[
        "--out",
        sim.to_str().unwrap(),
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--duration",
        "0.5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(manifest_files(&sim), files_on_disk(&sim));
}

#[test]
fn env_var_root_gets_a_dated_subfolder() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gridsync"))
        .args(["rootlocus", "--preset", "gfl-pll-bandwidth", "--points", "3"])
        .env("GRIDSYNC_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let subs: Vec<String> =
        std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert_eq!(subs.len(), 1, "{subs:?}");
    let name = &subs[0];
    assert!(name.ends_with("_rootlocus"), "{name}");
    // YYYY-MM-DD_HHMMSS
    let stamp = &name[..17];
    assert!(stamp.chars().enumerate().all(|(i, c)| match i {
        4 | 7 => c == '-',
        10 => c == '_',
        _ => c.is_ascii_digit(),
    }));
    assert!(dir.path().join(name).join("manifest.json").exists());
}

#[test]
fn missing_topology_fails_only_the_figures_that_need_it() {
    let data = tempfile::tempdir().unwrap();
    for f in ["island_gfl.json", "two_gfl_fault.json"] {
        std::fs::copy(default_data_dir().join(f), data.path().join(f)).unwrap();
    }
    let out = tempfile::tempdir().unwrap();
    let o = gridsync(&[
        "--out",
        out.path().to_str().unwrap(),
        "paper-figs",
        "--only",
        "fig11,fig12,fig15",
        "--data",
        data.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    let verdict = |name: &str| {
        text.lines()
            .find(|l| l.starts_with(name))
            .map(|l| l.contains("PASS"))
            .unwrap_or_else(|| panic!("{name}: {text}"))
    };
    assert!(verdict("fig11"));
    assert!(!verdict("fig12"));
    assert!(!verdict("fig15"));
}

#[test]
fn unknown_figure_name_exits_2() {
    let out = tempfile::tempdir().unwrap();
    let o = gridsync(&["--out", out.path().to_str().unwrap(), "paper-figs", "--only", "fig99"]);
    assert_eq!(o.status.code(), Some(2));
}
