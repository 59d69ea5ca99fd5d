use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dipole_core::model::validate_scenario;
use dipole_sim::scenario::{bundled_names, read_document};
use dipole_sim::{bundled_path, load_scenario, SimError};
use serde_json::Value;

fn sim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sim")).current_dir(dir).args(args).output().expect("sim runs")
}

fn scenario(name: &str) -> String {
    bundled_path(name).to_str().unwrap().to_string()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn spectrum_on_solid_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(dir.path(), &["spectrum", &scenario("fig1c_solid"), "--out", "s.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "nu1_minus_omega_ac_over_gamma,re_chi,im_chi");
    assert_eq!(lines.len(), 202);
    assert_eq!(lines[1].split(',').next().unwrap(), "-8.0000000000000000e0");
    for field in lines[101].split(',') {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
        assert!(field.parse::<f64>().is_ok());
    }

    let extrema = json(dir.path().join("s.extrema.json"));
    let maxima: Vec<f64> = extrema
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["kind"] == "maximum")
        .map(|e| e["position"].as_f64().unwrap())
        .collect();
    assert_eq!(maxima.len(), 3);
    assert!((maxima[2] - 17f64.sqrt()).abs() < 0.08);

    let manifest = json(dir.path().join("s.manifest.json"));
    assert_eq!(manifest["command"], "spectrum");
    assert_eq!(manifest["metadata"]["grid"]["n"], 201);
    assert_eq!(manifest["scenario"]["coupling"]["g_value"], 4.0);
}

#[test]
fn dressed_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(dir.path(), &["dressed", &scenario("fig1c_solid"), "--format", "json", "--out", "d.json"]);
    assert!(out.status.success());
    let d = json(dir.path().join("d.json"));
    let ev: Vec<f64> = d["eigenvalues"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let r = 17f64.sqrt();
    assert!((ev[0] + r).abs() < 1e-12 && ev[1].abs() < 1e-12 && (ev[2] - r).abs() < 1e-12);
}

#[test]
fn overrides_reach_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(dir.path(), &["dressed", &scenario("fig1c_solid"), "--set", "coupling.g_value=20", "--format", "json"]);
    assert!(out.status.success());
    let d = json(dir.path().join("fig1c_solid.dressed.json"));
    let top = d["eigenvalues"][2].as_f64().unwrap();
    assert!((top - 401f64.sqrt()).abs() < 1e-12);
    let m = json(dir.path().join("fig1c_solid.dressed.manifest.json"));
    assert_eq!(m["overrides"][0], "coupling.g_value=20");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(dir.path(), &["transmogrify", &scenario("fig1c_solid")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = sim(dir.path(), &["spectrum", &scenario("fig1c_solid"), "--set", "coupling.strength=3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("coupling.g_value"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(sim(dir.path(), &["spectrum", bad.to_str().unwrap()]).status.code(), Some(2));

    let out = sim(dir.path(), &["spectrum", &scenario("fig1c_solid"), "--set", "drives.0.lower=zz"]);
    assert_eq!(out.status.code(), Some(3));

    // no linewidth at all: the free-atom response has a pole on the grid
    let out = sim(
        dir.path(),
        &["spectrum", &scenario("fig1c_dotted"), "--set", "atoms.0.dephasing.0.rate=0", "--set", "atoms.1.dephasing.0.rate=0"],
    );
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_is_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("fig3a_curve_ii");
    for (jobs, name) in [("1", "a.csv"), ("3", "b.csv")] {
        let out = sim(dir.path(), &["sweep", &s, "--grid", "0.8:2.4:5", "--jobs", jobs, "--out", name]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), "protocol.omega,fidelity,analytic,argmin");
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn evolve_and_protocol_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim(dir.path(), &["evolve", &scenario("fig1c_inset"), "--set", "evolution.samples=11", "--out", "e.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "time,sigma_bc_A_re,sigma_bc_A_im,sigma_bc_B_re,sigma_bc_B_im");
    assert_eq!(text.lines().count(), 12);

    let out = sim(dir.path(), &["protocol", &scenario("fig2a_gate"), "--format", "json", "--out", "p.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let f = json(dir.path().join("p.json"));
    assert_eq!(f["fidelities"].as_array().unwrap().len(), 16);
    assert!(f["analytic"].as_f64().unwrap() > 0.89);
}

#[test]
fn bundled_scenarios_round_trip() {
    let names = bundled_names();
    assert_eq!(names.len(), 11);
    for name in names {
        let path = bundled_path(&name);
        let spec = load_scenario::<&str>(&path, &[]).unwrap();
        let v = validate_scenario(&spec).unwrap_or_else(|e| panic!("{name}: {e}"));
        let text = serde_json::to_string(v.spec()).unwrap();
        let again: dipole_core::model::ScenarioSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(&again, v.spec(), "{name}");
        assert_eq!(again, spec, "{name}");
    }
}

#[test]
fn empty_overrides_equal_file_contents() {
    let path = bundled_path("fig1c_solid");
    let spec = load_scenario::<&str>(&path, &[]).unwrap();
    let direct: dipole_core::model::ScenarioSpec = serde_json::from_value(read_document(&path).unwrap()).unwrap();
    assert_eq!(spec, direct);
    let g20 = load_scenario(&path, &["coupling.g_value=20"]).unwrap();
    assert_eq!(g20.coupling.g_value.unwrap().re, 20.0);
    assert!(matches!(load_scenario(&path, &["coupling.nope=1"]), Err(SimError::UnknownPath { .. })));
}
