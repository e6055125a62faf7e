use std::fs;
use std::path::Path;
use std::process::Command;

use dsr_sim::dsr::{simulate, DsrParams, SourceSignal, Trajectory};
use dsr_sim::harness::io::write_trajectory_csv;
use dsr_sim::harness::{find_preset, parse_config, run_config, run_preset};
use dsr_sim::topology::{build_lattice, NetworkTopology, Position};
use dsr_sim::NoiseStream;
use tempfile::tempdir;

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|f| f.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn config_errors_name_their_keys() {
    let text = r#"
        kind = "lattice-info"
        topology = "lattice"
        rows = 5
        cols = 5
        leader = 3
        sensing_radius = 1.2
        ks = 100
        beta = 1.0
        dt = 0
        n_steps = 10
        noise = 0.01
    "#;
    let err = parse_config(text).unwrap_err();
    for key in ["beta", "dt", "seed"] {
        assert!(err.mentions(key), "{err}");
    }
    assert_eq!(err.violations.len(), 3, "{err}");
}

#[test]
fn one_agent_one_step_csv() {
    let dir = tempdir().unwrap();
    let mut t = Trajectory::new(1, 0.01);
    t.push(0, &[0.0]);
    t.push(1, &[0.25]);
    let path = dir.path().join("t.csv");
    write_trajectory_csv(&path, &t).unwrap();
    assert_eq!(
        fs::read_to_string(&path).unwrap(),
        "t,agent_0\n0,0\n0.01,0.25\n"
    );
}

#[test]
fn trajectory_csv_round_trip() {
    let topo = NetworkTopology::new(build_lattice(6, 6, 1.0).unwrap(), 1.2, vec![7]).unwrap();
    let p = DsrParams::new(100.0, 0.98, 0.01, SourceSignal::step(0.0, 1.0, 0));
    let traj = simulate(&topo, &p, &[0.0; 36], 500, &NoiseStream::new(0)).unwrap();
    let dir = tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    write_trajectory_csv(&path, &traj).unwrap();

    let text = fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'));
    let (header, rows) = read_csv(&path);
    assert_eq!(header[0], "t");
    assert_eq!(header[36], "agent_35");
    assert_eq!(rows.len(), 501);
    let mut worst_abs = 0.0_f64;
    for (r, row) in rows.iter().enumerate() {
        assert!((row[0] - traj.time(r)).abs() <= 1e-9 * traj.time(r).max(1.0));
        for (a, b) in row[1..].iter().zip(traj.row(r)) {
            // nine significant digits: half a unit in the ninth digit
            assert!((a - b).abs() <= 5e-9 * b.abs(), "{a} vs {b}");
            worst_abs = worst_abs.max((a - b).abs());
        }
    }
    assert!(worst_abs <= 1e-8, "{worst_abs}");
}

#[test]
fn fig1c_artifacts() {
    let dir = tempdir().unwrap();
    let run = run_preset("fig1c", None, dir.path()).unwrap();
    for name in [
        "manifest.toml",
        "metrics.json",
        "trajectory.csv",
        "delays.csv",
    ] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let (header, rows) = read_csv(&dir.path().join("trajectory.csv"));
    assert_eq!(header.len(), 226);
    assert!(rows[0].iter().all(|&v| v == 0.0));
    let ts = run.metrics.settling_time_s.unwrap();
    assert!((ts - 1.72).abs() <= 0.172, "{ts}");

    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("metrics.json")).unwrap()).unwrap();
    for key in [
        "settling_time_s",
        "transfer_speed_mps",
        "scaling_exponent",
        "diverged",
        "overshoot",
    ] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    for name in ["fig1c", "fig2_lattice_noise", "fig2_disc_noise"] {
        let a = tempdir().unwrap();
        let b = tempdir().unwrap();
        run_preset(name, Some(5), a.path()).unwrap();
        run_preset(name, Some(5), b.path()).unwrap();
        assert_eq!(dir_files(a.path()), dir_files(b.path()), "{name}");
    }
    let a = tempdir().unwrap();
    let b = tempdir().unwrap();
    run_preset("fig2_lattice_noise", Some(5), a.path()).unwrap();
    run_preset("fig2_lattice_noise", Some(6), b.path()).unwrap();
    assert_ne!(
        fs::read(a.path().join("trajectory.csv")).unwrap(),
        fs::read(b.path().join("trajectory.csv")).unwrap()
    );
}

#[test]
fn manifest_alone_reproduces_run() {
    for name in ["fig1d", "fig2_disc_noise", "fig1_stability_sweep"] {
        let a = tempdir().unwrap();
        let b = tempdir().unwrap();
        run_preset(name, Some(3), a.path()).unwrap();
        let manifest = fs::read_to_string(a.path().join("manifest.toml")).unwrap();
        let cfg = parse_config(&manifest).unwrap();
        run_config(&cfg, b.path()).unwrap();
        assert_eq!(dir_files(a.path()), dir_files(b.path()), "{name}");
    }
}

#[test]
fn unknown_preset_is_an_error() {
    let dir = tempdir().unwrap();
    let err = run_preset("fig7", None, dir.path()).unwrap_err();
    assert!(err.to_string().contains("fig7"));
}

#[test]
fn disc_preset_starts_connected() {
    let cfg = find_preset("fig2_disc_noise").unwrap().config();
    let (positions, _) = dsr_sim::harness::run::build_formation(&cfg).unwrap();
    assert_eq!(positions.len(), 225);
    assert!(positions
        .iter()
        .all(|p| p.distance(&Position::new(0.0, 0.0)) <= 25.0 / 3.0));
    let topo = NetworkTopology::new(positions, 1.2, vec![0]).unwrap();
    let mut seen = vec![false; 225];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for &j in topo.neighbors(i) {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    assert!(seen.iter().all(|&s| s));
    assert!(topo.neighbor_sets().iter().all(|s| s.len() >= 2));
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dsr-sim"))
}

#[test]
fn cli_exit_status_follows_expectation() {
    let dir = tempdir().unwrap();
    let status = cli()
        .args(["run", "--preset", "fig1_unstable", "--out"])
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());

    let manifest = fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    let surprise = dir.path().join("surprise.toml");
    fs::write(
        &surprise,
        manifest.replace("expect_divergence = true", "expect_divergence = false"),
    )
    .unwrap();
    let status = cli()
        .args(["run", "--config"])
        .arg(&surprise)
        .arg("--out")
        .arg(dir.path().join("b"))
        .output()
        .unwrap()
        .status;
    assert!(!status.success());
}

#[test]
fn cli_rejects_bad_config_and_lists_presets() {
    let dir = tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "kind = \"lattice-info\"\nbeta = 1.5\n").unwrap();
    let out = cli().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("beta") && err.contains("topology"), "{err}");

    let out = cli().arg("list-presets").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for name in [
        "fig1b",
        "fig1c",
        "fig1d",
        "fig1_unstable",
        "fig2_lattice",
        "fig2_disc_noise",
        "fig3a_diffusion",
        "fig3b_second_order",
        "fig3b_unstable",
    ] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn cli_sweep() {
    let dir = tempdir().unwrap();
    let out = cli()
        .args([
            "sweep", "--preset", "fig1b", "--ks", "100,101", "--seed", "4", "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("stability.csv")).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "100,0,nan");
    assert!(text.lines().nth(2).unwrap().starts_with("101,1,"));
    assert!(fs::read_to_string(dir.path().join("manifest.toml"))
        .unwrap()
        .contains("seed = 4"));
}
