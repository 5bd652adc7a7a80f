use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "preset,eps_over_omega,phi,t_d,eta,rd_over_qkappa,r_s,r_t,f_eps,f_min";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paintbrush"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn small_dicke(dir: &Path) -> String {
    write(
        dir,
        "dicke.toml",
        "[[axis]]\nname = \"eps_over_omega\"\nvalues = [1e-3, 0.1]\n\n[[axis]]\nname = \"rd_over_qkappa\"\nvalues = [0.0, 1e-3]\n",
    )
}

#[test]
fn preset_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_dicke(tmp.path());
    for out in ["a", "b"] {
        let o = run(tmp.path(), &["dicke", "--config", &cfg, "--out", out, "--jobs", "2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["results.csv", "results.json"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between reruns");
    }
    let a = fs::read_to_string(tmp.path().join("a/resolved_config.toml")).unwrap();
    let b = fs::read_to_string(tmp.path().join("b/resolved_config.toml")).unwrap();
    assert_eq!(a.replace("directory = \"a\"", ""), b.replace("directory = \"b\"", ""));
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("a/meta.json")).unwrap()).unwrap();
    assert_eq!(meta["cells"], 4);
    assert_eq!(meta["failed_cells"], 0);
    assert!(meta["created"].is_string());
}

#[test]
fn job_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_dicke(tmp.path());
    for (out, jobs) in [("one", "1"), ("four", "4")] {
        let o = run(tmp.path(), &["dicke", "--config", &cfg, "--out", out, "--jobs", jobs, "--format", "csv"]);
        assert!(o.status.success());
    }
    assert_eq!(fs::read(tmp.path().join("one/results.csv")).unwrap(), fs::read(tmp.path().join("four/results.csv")).unwrap());
    assert!(!tmp.path().join("one/results.json").exists());
}

#[test]
fn grid_rows_are_row_major() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = write(
        tmp.path(),
        "plan.toml",
        "preset = \"dicke\"\n[[axis]]\nname = \"eps_over_omega\"\nvalues = [1e-3, 1e-2]\n[[axis]]\nname = \"rd_over_qkappa\"\nvalues = [1e-5, 1e-4]\n",
    );
    let o = run(tmp.path(), &["sweep", &plan, "--out", "s"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("s/results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], HEADER);
    assert_eq!(lines.len(), 5);
    let key = |l: &str| {
        let f: Vec<f64> = l.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        (f[0], f[4])
    };
    let got: Vec<(f64, f64)> = lines[1..].iter().map(|l| key(l)).collect();
    assert_eq!(got, vec![(1e-3, 1e-5), (1e-3, 1e-4), (1e-2, 1e-5), (1e-2, 1e-4)]);
    for l in &lines[1..] {
        assert!(l.starts_with("dicke,"));
        assert!(!l.contains("NaN,NaN,NaN"), "{l}");
    }
}

#[test]
fn empty_plan_gives_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = write(tmp.path(), "plan.toml", "preset = \"cat-spin\"\n");
    let o = run(tmp.path(), &["sweep", &plan, "--out", "e"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(tmp.path().join("e/results.csv")).unwrap(), format!("{HEADER}\n"));
}

#[test]
fn resolved_config_is_echoed_and_reusable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "[cavity]\nkappa = \"1 MHz\"\n[system.spin]\nn_atoms = 6\nomega_s = \"1 MHz\"\n[[axis]]\nname = \"eps_over_omega\"\nvalues = [1e-3]\n");
    let o = run(tmp.path(), &["dicke", "--config", &cfg, "--out", "r"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let echoed = fs::read_to_string(tmp.path().join("r/resolved_config.toml")).unwrap();
    let v: toml::Table = echoed.parse().unwrap();
    assert_eq!(v["preset"].as_str(), Some("dicke"));
    assert!((v["cavity"]["kappa"].as_float().unwrap() - 2e6 * std::f64::consts::PI).abs() < 1e-6);
    assert_eq!(v["system"]["spin"]["n_atoms"].as_integer(), Some(6));
    assert!(v["detector"]["q"].as_float().is_some());

    let again = run(tmp.path(), &["dicke", "--config", "r/resolved_config.toml", "--out", "r2"]);
    assert!(again.status.success());
    assert_eq!(fs::read(tmp.path().join("r/results.csv")).unwrap(), fs::read(tmp.path().join("r2/results.csv")).unwrap());
}

#[test]
fn bad_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    for text in ["[cavity]\nkappa = \"3 furlongs\"\n", "[cavity]\nkapa = 1.0\n", "not toml ["] {
        let cfg = write(tmp.path(), "bad.toml", text);
        let o = run(tmp.path(), &["cat-spin", "--config", &cfg, "--out", "x"]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(!o.stderr.is_empty());
    }
    let o = run(tmp.path(), &["sweep", "missing.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(tmp.path(), &["dicke", "--jobs", "0", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn small_cutoff_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "[system.mech]\nomega_m = 1.0\ng0 = 2.0\nn_ph_max = 4\n[[axis]]\nname = \"eps_over_omega\"\nvalues = [1e-3]\n");
    let o = run(tmp.path(), &["fock", "--config", &cfg, "--out", "f"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_records_failed_cells_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = write(tmp.path(), "plan.toml", "preset = \"fock\"\n[[axis]]\nname = \"eps_over_omega\"\nvalues = [1e-3]\n");
    let cfg = write(tmp.path(), "c.toml", "[system.mech]\nomega_m = 1.0\ng0 = 2.0\nn_ph_max = 4\n");
    let o = run(tmp.path(), &["sweep", &plan, "--config", &cfg, "--out", "s"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("s/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().ends_with("NaN,NaN,NaN,NaN"));
    let meta: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("s/meta.json")).unwrap()).unwrap();
    assert_eq!(meta["failed_cells"], 1);
}

#[test]
fn husimi_and_svg_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "[system.spin]\nn_atoms = 8\nomega_s = 1.0\n");
    let o = run(tmp.path(), &["husimi", "--preset", "dicke", "--config", &cfg, "--out", "h", "--format", "svg", "--n-theta", "32", "--n-phi", "64"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = fs::read_to_string(tmp.path().join("h/husimi.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    let csv = fs::read_to_string(tmp.path().join("h/husimi.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 32 * 64);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("h/results.json")).unwrap()).unwrap();
    assert!((summary["integral"].as_f64().unwrap() - 1.0).abs() < 1e-2);

    let o = run(tmp.path(), &["wigner", "--preset", "dicke", "--config", &cfg, "--out", "w"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn wigner_of_fock_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["wigner", "--preset", "fock", "--points", "41", "--out", "w"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("w/results.json")).unwrap()).unwrap();
    assert!((summary["integral"].as_f64().unwrap() - 1.0).abs() < 1e-2);
    assert!(summary["min"].as_f64().unwrap() < -0.1);
}
