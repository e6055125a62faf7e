//! Executes an [`ExperimentConfig`] and writes its artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, ExperimentKind, LeaderSpec, TopologySpec};
use super::io::{agent_header, write_metrics_json, write_table_csv, write_trajectory_csv};
use super::presets::{find_preset, DEFAULT_SEED};
use crate::analysis::{
    correlation_lag, fit_scaling_exponent, formation_distortion, max_deviation, moving_average,
    near_leader, radial_acceleration, stability_sweep, CrossingMonitor, MetricsReport,
    OvershootMonitor, SettlingMonitor,
};
use crate::continuum::{run_diffusion, run_second_order, ContinuumParams, DiffusionParams};
use crate::dsr::{simulate_with, DsrParams, RunSummary, StridedRecorder, Trajectory};
use crate::error::SimError;
use crate::flocking::{run_maneuver, FlockParams, FlockTrajectory, MIN_START_NEIGHBORS};
use crate::noise::NoiseStream;
use crate::topology::{build_lattice, nearest_agent, sample_disc, NetworkTopology, Position};

/// Horizon doublings allowed while confirming settling.
const MAX_EXTENSIONS: usize = 3;
/// Redraw rounds allowed when repairing a sparse disc placement.
const MAX_REPAIR_ROUNDS: usize = 10_000;
/// Window of the moving average applied before comparing turn peaks, s.
const PEAK_SMOOTHING_S: f64 = 0.1;
/// RNG stream reserved for initial placement; agent noise uses streams
/// `0..n_agents`.
const PLACEMENT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub metrics: MetricsReport,
    pub artifacts: Vec<PathBuf>,
}

impl RunOutput {
    /// True unless the run's divergence verdict contradicts the config's
    /// expectation.
    pub fn as_expected(&self) -> bool {
        self.config.kind == ExperimentKind::StabilitySweep
            || self.metrics.diverged == self.config.expect_divergence
    }
}

/// Runs a named preset; `seed` replaces the preset's default.
pub fn run_preset(name: &str, seed: Option<u64>, out_dir: &Path) -> Result<RunOutput> {
    let preset = find_preset(name).with_context(|| format!("unknown preset `{name}`"))?;
    let mut cfg = preset.config();
    cfg.seed = Some(seed.unwrap_or(DEFAULT_SEED));
    run_config(&cfg, out_dir)
}

/// Converts a lattice-info config into a stability sweep over `ks_values`.
pub fn as_sweep(cfg: &ExperimentConfig, ks_values: Option<Vec<f64>>) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    match c.kind {
        ExperimentKind::StabilitySweep | ExperimentKind::LatticeInfo => {}
        other => bail!("cannot sweep a `{}` experiment", other.as_str()),
    }
    if let Some(ks) = ks_values {
        c.ks_values = ks;
    } else if c.ks_values.is_empty() {
        c.ks_values = vec![c.ks];
    }
    c.kind = ExperimentKind::StabilitySweep;
    c.expect_divergence = false;
    Ok(c)
}

pub fn run_config(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let (positions, leader) = build_formation(cfg)?;
    let noise = NoiseStream::new(cfg.seed.unwrap_or(0));
    let mut artifacts = Vec::new();

    let manifest = out_dir.join("manifest.toml");
    fs::write(&manifest, cfg.to_manifest())?;
    artifacts.push(manifest);

    let metrics = match cfg.kind {
        ExperimentKind::Flocking => {
            run_flock(cfg, &positions, leader, &noise, out_dir, &mut artifacts)?
        }
        ExperimentKind::StabilitySweep => {
            run_sweep(cfg, positions, leader, &noise, out_dir, &mut artifacts)?
        }
        _ => run_information(cfg, positions, leader, &noise, out_dir, &mut artifacts)?,
    };

    let path = out_dir.join("metrics.json");
    write_metrics_json(&path, &metrics)?;
    artifacts.push(path);
    Ok(RunOutput {
        config: cfg.clone(),
        metrics,
        artifacts,
    })
}

/// Initial positions and leader index.
pub fn build_formation(cfg: &ExperimentConfig) -> Result<(Vec<Position<f64>>, usize)> {
    let positions = match &cfg.topology {
        TopologySpec::Lattice {
            rows,
            cols,
            spacing,
        } => build_lattice(*rows, *cols, *spacing)?,
        TopologySpec::Disc {
            n_agents,
            disc_radius,
            sampling,
        } => {
            let mut rng =
                ChaCha8Rng::seed_from_u64(cfg.seed.context("disc placement needs a seed")?);
            rng.set_stream(PLACEMENT_STREAM);
            let mut p = sample_disc(*n_agents, *disc_radius, *sampling, &mut rng)?;
            if cfg.kind == ExperimentKind::Flocking {
                repair_sparse(&mut p, cfg, &mut rng)?;
            }
            p
        }
    };
    let leader = match cfg.leader {
        LeaderSpec::Index(i) => i,
        LeaderSpec::Cell { row, col } => match cfg.topology {
            TopologySpec::Lattice { cols, .. } => row * cols + col,
            TopologySpec::Disc { .. } => bail!("leader cells need a lattice topology"),
        },
        LeaderSpec::Near { x, y } => {
            nearest_agent(&positions, Position::new(x, y)).context("no agents")?
        }
    };
    if leader >= positions.len() {
        bail!(
            "leader {leader} out of range for {} agents",
            positions.len()
        );
    }
    Ok((positions, leader))
}

/// Redraws agents until every agent has at least [`MIN_START_NEIGHBORS`]
/// neighbors and the network is connected; stray agents (outside the
/// largest component) are redrawn like sparse ones.
fn repair_sparse(
    p: &mut [Position<f64>],
    cfg: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let TopologySpec::Disc {
        disc_radius,
        sampling,
        ..
    } = cfg.topology
    else {
        return Ok(());
    };
    for _ in 0..MAX_REPAIR_ROUNDS {
        let sets = crate::topology::compute_neighbors(p, cfg.sensing_radius)?;
        let main = largest_component(&sets);
        let sparse: Vec<usize> = (0..p.len())
            .filter(|&i| sets[i].len() < MIN_START_NEIGHBORS || !main[i])
            .collect();
        if sparse.is_empty() {
            return Ok(());
        }
        for i in sparse {
            p[i] = crate::topology::sample_disc_point(disc_radius, sampling, rng);
        }
    }
    bail!(
        "could not place {} agents with at least {MIN_START_NEIGHBORS} neighbors each",
        p.len()
    )
}

fn largest_component(sets: &[Vec<usize>]) -> Vec<bool> {
    let mut label = vec![usize::MAX; sets.len()];
    let mut sizes = Vec::new();
    for start in 0..sets.len() {
        if label[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut stack = vec![start];
        label[start] = id;
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            for &j in &sets[i] {
                if label[j] == usize::MAX {
                    label[j] = id;
                    stack.push(j);
                }
            }
        }
        sizes.push(size);
    }
    // ties go to the component found first
    let best = (0..sizes.len()).fold(0, |b, c| if sizes[c] > sizes[b] { c } else { b });
    label.iter().map(|&l| l == best).collect()
}

fn formation_diameter(p: &[Position<f64>]) -> f64 {
    let mut d = 0.0_f64;
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            d = d.max(p[i].distance(&p[j]));
        }
    }
    d
}

/// Far-agent transfer speed and near-leader scaling fit.
fn delay_metrics(
    metrics: &mut MetricsReport,
    points: Vec<(f64, f64)>,
    positions: &[Position<f64>],
    leader: usize,
    delays: &[Option<f64>],
    near_fraction: f64,
) {
    let distances: Vec<f64> = positions
        .iter()
        .map(|p| p.distance(&positions[leader]))
        .collect();
    let far = (0..positions.len())
        .filter(|&i| i != leader)
        .max_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(b.cmp(&a)));
    if let Some(far) = far {
        metrics.extra.insert("far_agent_index".into(), far as f64);
        metrics
            .extra
            .insert("far_agent_distance_m".into(), distances[far]);
        if let Some(t) = delays[far].filter(|&t| t > 0.0) {
            metrics.extra.insert("far_agent_delay_s".into(), t);
            metrics.transfer_speed_mps = Some(distances[far] / t);
        }
    }
    let cutoff = near_fraction * formation_diameter(positions);
    let near = near_leader(&points, cutoff);
    metrics.extra.insert("near_cutoff_m".into(), cutoff);
    metrics
        .extra
        .insert("near_points".into(), near.len() as f64);
    metrics.scaling_exponent = fit_scaling_exponent(&near).ok();
    metrics.per_agent_delay = points;
}

fn write_delays(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let header = ["distance_m".to_string(), "delay_s".to_string()];
    write_table_csv(path, &header, points.iter().map(|&(d, t)| vec![d, t]))?;
    Ok(())
}

type Observer<'a> = &'a mut dyn FnMut(usize, &[f64]);
type Runner<'a> = Box<dyn Fn(usize, Observer) -> Result<RunSummary, SimError> + 'a>;

fn run_information(
    cfg: &ExperimentConfig,
    positions: Vec<Position<f64>>,
    leader: usize,
    noise: &NoiseStream,
    out_dir: &Path,
    artifacts: &mut Vec<PathBuf>,
) -> Result<MetricsReport> {
    let topo = NetworkTopology::new(positions, cfg.sensing_radius, vec![leader])?;
    let source = cfg.source();
    let initial = vec![cfg.initial_value; topo.n_agents()];
    let (step_len, runner): (f64, Runner) = match cfg.kind {
        ExperimentKind::LatticeInfo => {
            let p = DsrParams::new(cfg.ks, cfg.beta, cfg.dt, source).with_noise(cfg.noise);
            let (topo, initial) = (&topo, &initial);
            (
                cfg.dt,
                Box::new(move |n, obs| simulate_with(topo, &p, initial, n, noise, obs)),
            )
        }
        ExperimentKind::ContinuumDiffusion => {
            let p = DiffusionParams {
                alignment_strength: cfg.ks,
                update_interval: cfg.dt,
                source,
            };
            let (topo, initial) = (&topo, &initial);
            (
                cfg.dt,
                Box::new(move |n, obs| run_diffusion(topo, &p, initial, n, obs)),
            )
        }
        ExperimentKind::ContinuumSecondOrder => {
            let h = cfg.integrator_dt.context("integrator_dt missing")?;
            let p = ContinuumParams {
                alignment_strength: cfg.ks,
                dsr_gain: cfg.beta,
                model_interval: cfg.dt,
                integrator_step: h,
                source,
            };
            let (topo, initial) = (&topo, &initial);
            (
                h,
                Box::new(move |n, obs| run_second_order(topo, &p, initial, n, obs)),
            )
        }
        _ => unreachable!("not an information experiment"),
    };

    let target = cfg.source_final;
    let level = cfg.source_initial + cfg.threshold * (cfg.source_final - cfg.source_initial);
    let mut n_steps = cfg.n_steps;
    let mut extensions = 0;
    let (traj, settling, overshoot, crossings) = loop {
        let mut rec = StridedRecorder::new(topo.n_agents(), step_len, cfg.csv_stride);
        let mut settle = SettlingMonitor::new(target, cfg.band);
        let mut over = OvershootMonitor::new(target);
        let mut cross = CrossingMonitor::new(topo.n_agents(), level);
        let summary = runner(n_steps, &mut |k, v| {
            rec.observe(k, v);
            settle.observe(k, v);
            over.observe(k, v);
            cross.observe(k, v);
        })?;
        let diverged = summary.divergence_step.is_some();
        let confirmed = match settle.settled_step() {
            Some(k) => 2 * n_steps >= 3 * k,
            None => false,
        };
        if diverged || confirmed || !cfg.confirm_settling || extensions == MAX_EXTENSIONS {
            break (rec.finish(summary), settle, over, cross);
        }
        n_steps *= 2;
        extensions += 1;
    };

    let mut m = MetricsReport {
        diverged: traj.diverged(),
        ..Default::default()
    };
    m.extra.insert("leader_index".into(), leader as f64);
    m.extra.insert("n_steps_run".into(), n_steps as f64);
    m.extra.insert("step_s".into(), step_len);
    if let Some(k) = traj.divergence_step() {
        m.divergence_time_s = Some(k as f64 * step_len);
    } else {
        m.settling_time_s = settling.settling_time(step_len);
        m.overshoot = Some(overshoot.overshoot());
        let delays = crossings.delays(leader, step_len);
        let distances = topo.distances_from(leader);
        let points = delays.distance_delay_points(&distances);
        delay_metrics(
            &mut m,
            points,
            topo.positions(),
            leader,
            &delays.delay,
            cfg.near_fraction,
        );
    }

    let path = out_dir.join("trajectory.csv");
    write_trajectory_csv(&path, &traj)?;
    artifacts.push(path);
    let path = out_dir.join("delays.csv");
    write_delays(&path, &m.per_agent_delay)?;
    artifacts.push(path);
    Ok(m)
}

fn run_sweep(
    cfg: &ExperimentConfig,
    positions: Vec<Position<f64>>,
    leader: usize,
    noise: &NoiseStream,
    out_dir: &Path,
    artifacts: &mut Vec<PathBuf>,
) -> Result<MetricsReport> {
    let topo = NetworkTopology::new(positions, cfg.sensing_radius, vec![leader])?;
    let base = DsrParams::new(cfg.ks, cfg.beta, cfg.dt, cfg.source()).with_noise(cfg.noise);
    let initial = vec![cfg.initial_value; topo.n_agents()];
    let verdicts = stability_sweep(&topo, &base, &initial, &cfg.ks_values, cfg.n_steps, noise)?;

    let header = ["ks", "diverged", "divergence_time_s"].map(String::from);
    let path = out_dir.join("stability.csv");
    write_table_csv(
        &path,
        &header,
        verdicts.iter().map(|v| {
            vec![
                v.alignment_strength,
                if v.diverged { 1.0 } else { 0.0 },
                v.divergence_step.map_or(f64::NAN, |k| k as f64 * cfg.dt),
            ]
        }),
    )?;
    artifacts.push(path);

    let mut m = MetricsReport {
        diverged: verdicts.iter().any(|v| v.diverged),
        ..Default::default()
    };
    let stable_max = verdicts
        .iter()
        .filter(|v| !v.diverged)
        .map(|v| v.alignment_strength)
        .fold(f64::NEG_INFINITY, f64::max);
    let unstable_min = verdicts
        .iter()
        .filter(|v| v.diverged)
        .map(|v| v.alignment_strength)
        .fold(f64::INFINITY, f64::min);
    if stable_max.is_finite() {
        m.extra.insert("largest_stable_ks".into(), stable_max);
    }
    if unstable_min.is_finite() {
        m.extra.insert("smallest_divergent_ks".into(), unstable_min);
    }
    m.extra.insert("ks_count".into(), verdicts.len() as f64);
    Ok(m)
}

fn run_flock(
    cfg: &ExperimentConfig,
    positions: &[Position<f64>],
    leader: usize,
    noise: &NoiseStream,
    out_dir: &Path,
    artifacts: &mut Vec<PathBuf>,
) -> Result<MetricsReport> {
    let params = FlockParams {
        speed: cfg.speed.context("speed missing")?,
        alignment_strength: cfg.ks,
        dsr_gain: cfg.beta,
        update_interval: cfg.dt,
        noise_amplitude: cfg.noise,
        sensing_radius: cfg.sensing_radius,
        initial_heading: cfg.source_initial,
        target_heading: cfg.source_final,
        switch_step: cfg.switch_step,
        n_steps: cfg.n_steps,
    };
    let flock = run_maneuver(positions, &[leader], &params, noise)?;
    let headings = &flock.headings;
    let mut m = flock_metrics(&flock, leader, cfg)?;

    let mut headings_out = Trajectory::new(headings.n_agents(), headings.time_step());
    for r in
        (0..headings.n_rows()).filter(|r| r % cfg.csv_stride == 0 || r + 1 == headings.n_rows())
    {
        headings_out.push(headings.step_index(r), headings.row(r));
    }
    let path = out_dir.join("trajectory.csv");
    write_trajectory_csv(&path, &headings_out)?;
    artifacts.push(path);

    let n = flock.n_agents();
    let mut header = vec!["t".to_string()];
    for i in 0..n {
        header.push(format!("x_{i}"));
        header.push(format!("y_{i}"));
    }
    let path = out_dir.join("positions.csv");
    write_table_csv(
        &path,
        &header,
        (0..flock.n_rows())
            .filter(|r| r % cfg.csv_stride == 0 || r + 1 == flock.n_rows())
            .map(|r| {
                let mut row = vec![headings.time(r)];
                row.extend(flock.positions_at(r).iter().flat_map(|p| [p.x, p.y]));
                row
            }),
    )?;
    artifacts.push(path);

    let accel = radial_acceleration(&flock)?;
    let path = out_dir.join("radial_acceleration.csv");
    let samples = accel.first().map_or(0, Vec::len);
    write_table_csv(
        &path,
        &agent_header(n),
        (0..samples).map(|k| {
            let mut row = vec![headings.time(k + 1)];
            row.extend(accel.iter().map(|a| a[k]));
            row
        }),
    )?;
    artifacts.push(path);

    let path = out_dir.join("delays.csv");
    write_delays(&path, &m.per_agent_delay)?;
    artifacts.push(path);

    m.extra.insert("leader_index".into(), leader as f64);
    Ok(m)
}

/// Maneuver metrics: correlation delays of radial acceleration, cohesion
/// and heading accuracy.
pub fn flock_metrics(
    flock: &FlockTrajectory<f64>,
    leader: usize,
    cfg: &ExperimentConfig,
) -> Result<MetricsReport> {
    let headings = &flock.headings;
    let dt = flock.time_step();
    let target = cfg.source_final;
    let mut m = MetricsReport {
        diverged: headings.rows().any(crate::dsr::values_diverged),
        ..Default::default()
    };

    let mut settle = SettlingMonitor::new(target, cfg.band);
    let mut over = OvershootMonitor::new(target);
    for r in 0..headings.n_rows() {
        settle.observe(headings.step_index(r), headings.row(r));
        over.observe(headings.step_index(r), headings.row(r));
    }
    m.settling_time_s = settle.settling_time(dt);
    m.overshoot = Some(over.overshoot());

    let last = headings.last_row().context("empty trajectory")?;
    let mean = last.iter().sum::<f64>() / last.len() as f64;
    m.extra.insert(
        "max_final_heading_error_rad".into(),
        max_deviation(last, target),
    );
    m.extra
        .insert("final_heading_spread_rad".into(), max_deviation(last, mean));
    m.extra
        .insert("mean_final_heading_error_rad".into(), (mean - target).abs());
    let start = flock.positions_at(0);
    let end = flock.positions_at(flock.n_rows() - 1);
    m.extra.insert(
        "formation_distortion".into(),
        formation_distortion(start, end),
    );

    let accel = radial_acceleration(flock)?;
    let max_lag = cfg.n_steps / 2;
    let lag_of = |i: usize| correlation_lag(&accel[i], &accel[leader], max_lag).ok();
    let delays: Vec<Option<f64>> = (0..flock.n_agents())
        .map(|i| {
            if i == leader {
                Some(0.0)
            } else {
                lag_of(i).map(|l| l as f64 * dt)
            }
        })
        .collect();
    let distances: Vec<f64> = start.iter().map(|p| p.distance(&start[leader])).collect();
    let points: Vec<(f64, f64)> = delays
        .iter()
        .zip(&distances)
        .filter_map(|(t, &d)| t.filter(|&t| t > 0.0).map(|t| (d, t)))
        .collect();
    delay_metrics(&mut m, points, start, leader, &delays, cfg.near_fraction);

    if let Some(far) = m.extra.get("far_agent_index").map(|&f| f as usize) {
        let window = ((PEAK_SMOOTHING_S / dt).round() as usize).max(1);
        let peak = |i: usize| {
            moving_average(&accel[i], window)
                .into_iter()
                .map(f64::abs)
                .fold(0.0, f64::max)
        };
        let lead_peak = peak(leader);
        if lead_peak > 0.0 {
            m.extra
                .insert("far_peak_ratio".into(), peak(far) / lead_peak);
        }
        m.extra.insert(
            "far_final_heading_error_rad".into(),
            (last[far] - target).abs(),
        );
    }
    Ok(m)
}
