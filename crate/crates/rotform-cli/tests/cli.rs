//! End-to-end tests of the command-line interface: output contracts,
//! determinism, and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn rotform(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rotform"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_temp(name: &str, content: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join("rotform-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

#[test]
fn tpt_reproduces_published_relation_layout() {
    let start = std::time::Instant::now();
    // d=4 simultaneously fast double rotation
    let out = rotform(&["tpt", "--dim", "4", "--rates", "1,1", "--orders", "1,1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for relation in [
        "u_{1,1} + u_{2,2} = 0",
        "u_{3,3} + u_{4,4} = 0",
        "u_{1,3} + u_{4,2} = 0",
        "u_{2,3} - u_{4,1} = 0",
        "u_{1,4} - u_{3,2} = 0",
        "u_{2,4} + u_{3,1} = 0",
    ] {
        assert!(text.contains(relation), "missing '{relation}' in:\n{text}");
    }

    // d=4 simple rotation: cylinder conditions, u_3 and u_4 free
    let out = rotform(&["tpt", "--dim", "4", "--rates", "1,0"]);
    let text = stdout(&out);
    for relation in ["u_{1,3} = 0", "u_{1,4} = 0", "u_{2,3} = 0", "u_{2,4} = 0"] {
        assert!(text.contains(relation));
    }
    assert!(text.contains("u_3: unconstrained"));
    assert!(text.contains("u_4: unconstrained"));

    // d=5 independently fast: the finer set plus the axis cylinder
    let out = rotform(&["tpt", "--dim", "5", "--rates", "1,1", "--orders", "2,1"]);
    let text = stdout(&out);
    for relation in ["u_{1,5} = 0", "u_{2,5} = 0", "u_{3,5} = 0", "u_{4,5} = 0", "u_{3,1} = 0"] {
        assert!(text.contains(relation));
    }

    // d=3 classical set
    let out = rotform(&["tpt", "--dim", "3", "--rates", "1"]);
    let text = stdout(&out);
    assert!(text.contains("u_{1,1} + u_{2,2} = 0"));
    assert!(text.contains("u_{1,3} = 0") && text.contains("u_{2,3} = 0"));

    assert!(start.elapsed().as_secs_f64() < 1.0, "golden derivations must stay fast");
}

#[test]
fn tpt_rejects_bad_input() {
    let out = rotform(&["tpt", "--dim", "4", "--rates", "1,1", "--balance", "sideways"]);
    assert_eq!(out.status.code(), Some(2));
    let out = rotform(&["tpt", "--dim", "3", "--rates", "1,1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = rotform(&["tpt", "--dim", "4", "--rates", "0,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn decompose_canonical_and_error_paths() {
    // canonical d=5 block matrix: two planes plus a zero axis
    let m = write_temp(
        "d5.txt",
        "0 3 0 0 0\n-3 0 0 0 0\n0 0 0 1 0\n0 0 -1 0 0\n0 0 0 0 0\n",
    );
    let out = rotform(&["decompose", m.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["rates"].as_array().unwrap().len(), 2);
    assert_eq!(v["zero_axes"].as_array().unwrap().len(), 1);
    assert!((v["rates"][0].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert!(v["residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["header"]["version"], env!("CARGO_PKG_VERSION"));

    // zero matrix: exit 0 with a warning on stderr
    let z = write_temp("zero.txt", "0 0\n0 0\n");
    let out = rotform(&["decompose", z.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));

    // non-skew matrix: exit 2 with a diagnostic
    let bad = write_temp("bad.txt", "0 1\n1 0\n");
    let out = rotform(&["decompose", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("skew"));
}

#[test]
fn dispersion_pinned_roots_and_determinism() {
    let out = rotform(&["dispersion", "--dim", "4", "--rates", "1,1", "--k", "1,0,0,0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("1,0,0,0,-2,wave"));
    assert!(text.contains("1,0,0,0,0,natural_vortical"));
    assert!(text.contains("1,0,0,0,2,wave"));

    // identical config (including seed) gives byte-identical output
    let a = rotform(&["dispersion", "--dim", "5", "--rates", "2,1", "--k-grid", "4", "--seed", "11"]);
    let b = rotform(&["dispersion", "--dim", "5", "--rates", "2,1", "--k-grid", "4", "--seed", "11"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    // a different seed samples different wavevectors
    let c = rotform(&["dispersion", "--dim", "5", "--rates", "2,1", "--k-grid", "4", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn dispersion_e5_verification_flag() {
    let out = rotform(&[
        "dispersion", "--dim", "5", "--rates", "2,1", "--k-grid", "5",
        "--verify-e5-formula", "--seed", "3", "--format", "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let dev = v["e5_formula_max_relative_deviation"].as_f64().unwrap();
    assert!(dev < 1e-10, "deviation {dev}");
    // exact rational polynomial coefficients are part of the table
    assert!(v["results"][0]["poly"][0].is_string());

    let out = rotform(&["dispersion", "--dim", "4", "--rates", "1,1", "--k", "1,0,0,0", "--verify-e5-formula"]);
    assert_eq!(out.status.code(), Some(2), "E5 check needs dim 5");
}

#[test]
fn kelvin_scenarios_and_exit_codes() {
    let scenarios = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");

    // conserving scenario, fast variant
    let quick = write_temp(
        "tg_quick.txt",
        "object = circuit\nflow = taylor_green_plane(1)\ndim = 3\nrates = 2\n\
         center = 0.4, -0.3, 0.2\nradius = 0.9\nplane = 1, 2\nnodes = 256\n\
         dt = 1e-3\nt_end = 0.2\ndrift_tol = 1e-8\nsample_every = 50\n",
    );
    let out = rotform(&["kelvin", quick.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("t,circulation,A1,drift"));
    assert!(text.contains("\"pass\": true"));

    // non-solution control: reports the drift but exits 0
    let out = rotform(&[
        "kelvin",
        scenarios.join("nonsolution_control_d3.txt").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("\"is_rotating_frame_euler_solution\": false"));

    // an Euler-flagged flow failing its conservation assertion exits 1
    let strict = write_temp(
        "tg_strict.txt",
        "object = circuit\nflow = taylor_green_plane(1)\ndim = 3\nrates = 2\n\
         center = 0.4, -0.3, 0.2\nradius = 0.9\nplane = 1, 2\nnodes = 64\n\
         dt = 1e-2\nt_end = 0.2\ndrift_tol = 1e-22\nsample_every = 50\n",
    );
    let out = rotform(&["kelvin", strict.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    // malformed scenario: exit 2
    let broken = write_temp("broken.txt", "object circuit\n");
    let out = rotform(&["kelvin", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kelvin_chain_scenario_writes_outputs() {
    let fast_chain = write_temp(
        "chain_quick.txt",
        "object = chain3\nflow = taylor_green_plane(1)\ndim = 5\nrates = 2, 1\n\
         m = 8\nchain_radii = 1.6, 0.8, 0.35\ndt = 1e-2\nt_end = 0.1\ndrift_tol = 1e-1\n",
    );
    let out_dir = std::env::temp_dir().join("rotform-cli-tests/chain_out");
    let out = rotform(&[
        "kelvin",
        fast_chain.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let series = std::fs::read_to_string(out_dir.join("series.csv")).unwrap();
    assert!(series.starts_with("# rotform"));
    assert!(series.contains("t,invariant,drift"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["object"], "chain3");
    assert_eq!(summary["pass"], true);
}

#[test]
fn selfcheck_filter_and_fault_injection() {
    let out = rotform(&["selfcheck", "--filter", "golden"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("[PASS]  1. golden_constraint_sets"));

    let out = rotform(&["selfcheck", "--filter", "golden", "--inject-fault", "golden"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("[FAIL]  1. golden_constraint_sets"));

    let out = rotform(&["selfcheck", "--filter", "no_such_criterion"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_outputs_embed_version_hash_and_seed() {
    let out = rotform(&[
        "tpt", "--dim", "3", "--rates", "1", "--format", "json", "--seed", "9",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["header"]["seed"], 9);
    assert_eq!(v["header"]["version"], env!("CARGO_PKG_VERSION"));
    assert!(v["header"]["config_hash"].as_str().unwrap().len() == 16);
    // byte-identical across runs
    let again = rotform(&[
        "tpt", "--dim", "3", "--rates", "1", "--format", "json", "--seed", "9",
    ]);
    assert_eq!(out.stdout, again.stdout);
}
