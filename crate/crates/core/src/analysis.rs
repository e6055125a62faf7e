//! Observables computed from recorded runs: settling, threshold-crossing
//! delays, radial acceleration, correlation delays, transfer speed,
//! scaling exponents and Ks stability sweeps.

use serde::{Deserialize, Serialize};

use crate::dsr::{simulate_with, DsrParams, Trajectory};
use crate::error::SimError;
use crate::flocking::FlockTrajectory;
use crate::noise::NoiseStream;
use crate::scalar::Scalar;
use crate::topology::{NetworkTopology, Position};

/// Default settling band, as a fraction of the final value.
pub const SETTLING_BAND: f64 = 0.02;

/// Default information level that marks arrival of the transferred signal.
pub const ARRIVAL_THRESHOLD: f64 = 0.1;

/// Metrics document written next to every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricsReport {
    pub settling_time_s: Option<f64>,
    pub transfer_speed_mps: Option<f64>,
    pub scaling_exponent: Option<f64>,
    pub diverged: bool,
    pub overshoot: Option<f64>,
    pub divergence_time_s: Option<f64>,
    /// `(distance from leader in m, delay in s)` per agent that registered a delay.
    pub per_agent_delay: Vec<(f64, f64)>,
    /// Experiment-specific extras, keyed by name.
    pub extra: std::collections::BTreeMap<String, f64>,
}

/// Streaming settling-time tracker; feed it every step in order.
#[derive(Debug, Clone)]
pub struct SettlingMonitor<T> {
    target: T,
    tolerance: T,
    last_bad: Option<usize>,
    last_step: Option<usize>,
}

impl<T: Scalar> SettlingMonitor<T> {
    pub fn new(target: T, band: T) -> Self {
        Self {
            target,
            tolerance: band * target.abs(),
            last_bad: None,
            last_step: None,
        }
    }

    pub fn observe(&mut self, step: usize, values: &[T]) {
        let outside = values
            .iter()
            .any(|&v| !((v - self.target).abs() <= self.tolerance));
        if outside {
            self.last_bad = Some(step);
        }
        self.last_step = Some(step);
    }

    /// First step from which every observed row stays in the band.
    pub fn settled_step(&self) -> Option<usize> {
        match (self.last_bad, self.last_step) {
            (_, None) => None,
            (None, Some(_)) => Some(0),
            (Some(bad), Some(last)) if bad < last => Some(bad + 1),
            _ => None,
        }
    }

    pub fn settling_time(&self, dt: T) -> Option<T> {
        self.settled_step().map(|k| T::of_count(k) * dt)
    }
}

/// Smallest recorded time after which every agent stays within
/// `band · |final_value|` of `final_value` to the end of the trajectory.
/// `None` when the band is never held through the last row, or when the
/// run diverged.
pub fn settling_time<T: Scalar>(traj: &Trajectory<T>, final_value: T, band: T) -> Option<T> {
    if traj.diverged() || traj.n_rows() == 0 {
        return None;
    }
    let tol = band * final_value.abs();
    let bad = |row: &[T]| row.iter().any(|&v| !((v - final_value).abs() <= tol));
    let last = traj.n_rows() - 1;
    match (0..traj.n_rows()).rev().find(|&r| bad(traj.row(r))) {
        None => Some(traj.time(0)),
        Some(r) if r == last => None,
        Some(r) => Some(traj.time(r + 1)),
    }
}

/// Streaming overshoot tracker.
#[derive(Debug, Clone)]
pub struct OvershootMonitor<T> {
    target: T,
    direction: Vec<T>,
    worst: T,
}

impl<T: Scalar> OvershootMonitor<T> {
    pub fn new(target: T) -> Self {
        Self {
            target,
            direction: Vec::new(),
            worst: T::zero(),
        }
    }

    pub fn observe(&mut self, _step: usize, values: &[T]) {
        if self.direction.is_empty() {
            // approach direction per agent, fixed by the first row
            self.direction = values
                .iter()
                .map(|&v| {
                    let d = self.target - v;
                    if d > T::zero() {
                        T::one()
                    } else if d < T::zero() {
                        -T::one()
                    } else {
                        T::zero()
                    }
                })
                .collect();
        }
        for (&v, &s) in values.iter().zip(&self.direction) {
            let excess = if s == T::zero() {
                (v - self.target).abs()
            } else {
                s * (v - self.target)
            };
            if excess > self.worst {
                self.worst = excess;
            }
        }
    }

    pub fn overshoot(&self) -> T {
        if self.target == T::zero() {
            self.worst
        } else {
            self.worst / self.target.abs()
        }
    }
}

/// Largest excursion past `final_value` (in each agent's approach
/// direction), relative to `|final_value|`.
pub fn overshoot<T: Scalar>(traj: &Trajectory<T>, final_value: T) -> T {
    let mut m = OvershootMonitor::new(final_value);
    for r in 0..traj.n_rows() {
        m.observe(traj.step_index(r), traj.row(r));
    }
    m.overshoot()
}

/// Streaming first-crossing tracker: first step with `I_i >= threshold`.
#[derive(Debug, Clone)]
pub struct CrossingMonitor<T> {
    threshold: T,
    first: Vec<Option<usize>>,
}

impl<T: Scalar> CrossingMonitor<T> {
    pub fn new(n_agents: usize, threshold: T) -> Self {
        Self {
            threshold,
            first: vec![None; n_agents],
        }
    }

    pub fn observe(&mut self, step: usize, values: &[T]) {
        for (slot, &v) in self.first.iter_mut().zip(values) {
            if slot.is_none() && v >= self.threshold {
                *slot = Some(step);
            }
        }
    }

    pub fn delays(&self, leader: usize, dt: T) -> ThresholdDelays<T> {
        ThresholdDelays::from_steps(self.first.clone(), leader, dt)
    }
}

/// Per-agent arrival times and delays relative to the leader.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdDelays<T> {
    pub crossing_step: Vec<Option<usize>>,
    /// `t_i - t_leader`; absent when the agent or the leader never crossed.
    pub delay: Vec<Option<T>>,
}

impl<T: Scalar> ThresholdDelays<T> {
    fn from_steps(crossing_step: Vec<Option<usize>>, leader: usize, dt: T) -> Self {
        let lead = crossing_step.get(leader).copied().flatten();
        let delay = crossing_step
            .iter()
            .map(|c| match (c, lead) {
                (Some(k), Some(l)) => Some((T::of_count(*k) - T::of_count(l)) * dt),
                _ => None,
            })
            .collect();
        Self {
            crossing_step,
            delay,
        }
    }

    /// `(distance, delay)` pairs for agents with a strictly positive delay.
    pub fn distance_delay_points(&self, distances: &[T]) -> Vec<(T, T)> {
        self.delay
            .iter()
            .zip(distances)
            .filter_map(|(d, &dist)| d.filter(|&d| d > T::zero()).map(|d| (dist, d)))
            .collect()
    }
}

/// First crossing of `threshold` per agent and its delay behind `leader`.
/// Requires a densely recorded trajectory for step-exact results.
pub fn threshold_delay<T: Scalar>(
    traj: &Trajectory<T>,
    leader: usize,
    threshold: T,
) -> ThresholdDelays<T> {
    let mut m = CrossingMonitor::new(traj.n_agents(), threshold);
    for r in 0..traj.n_rows() {
        m.observe(traj.step_index(r), traj.row(r));
    }
    m.delays(leader, traj.time_step())
}

/// Radial acceleration of every agent, from central differences of
/// position. Element `k` of each series belongs to recorded row `k + 1`.
/// Positive values turn left (counter-clockwise).
pub fn radial_acceleration<T: Scalar>(flock: &FlockTrajectory<T>) -> Result<Vec<Vec<T>>, SimError> {
    let paths: Vec<Vec<Position<T>>> = (0..flock.n_agents()).map(|a| flock.agent_path(a)).collect();
    paths
        .iter()
        .map(|p| radial_acceleration_of_path(p, flock.time_step()))
        .collect()
}

pub fn radial_acceleration_of_path<T: Scalar>(
    path: &[Position<T>],
    dt: T,
) -> Result<Vec<T>, SimError> {
    if path.len() < 3 {
        return Err(SimError::InvalidArgument(format!(
            "radial acceleration needs at least 3 samples, got {}",
            path.len()
        )));
    }
    let two = T::of(2.0);
    Ok(path
        .windows(3)
        .map(|w| {
            let vx = (w[2].x - w[0].x) / (two * dt);
            let vy = (w[2].y - w[0].y) / (two * dt);
            let ax = (w[2].x - two * w[1].x + w[0].x) / (dt * dt);
            let ay = (w[2].y - two * w[1].y + w[0].y) / (dt * dt);
            let speed = vx.hypot(vy);
            if speed == T::zero() {
                T::zero()
            } else {
                (ax * -vy + ay * vx) / speed
            }
        })
        .collect())
}

/// Lag (in samples) maximizing the mean-removed cross-correlation of
/// `series` against `reference` over the full window. Positive lags mean
/// `series` trails `reference`. Lags run over `[-max_lag, max_lag]`; ties
/// go to the smallest `|lag|`, then to the positive one.
pub fn correlation_lag<T: Scalar>(
    series: &[T],
    reference: &[T],
    max_lag: usize,
) -> Result<isize, SimError> {
    if series.len() != reference.len() {
        return Err(SimError::InvalidArgument(format!(
            "series lengths differ: {} vs {}",
            series.len(),
            reference.len()
        )));
    }
    let n = series.len();
    if n < 2 {
        return Err(SimError::UndefinedCorrelation(
            "need at least two samples".into(),
        ));
    }
    let centered = |x: &[T]| -> Option<Vec<f64>> {
        let xs: Vec<f64> = x.iter().map(|v| v.to_f64_lossy()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let c: Vec<f64> = xs.iter().map(|v| v - mean).collect();
        (c.iter().any(|&v| v != 0.0)).then_some(c)
    };
    let s = centered(series)
        .ok_or_else(|| SimError::UndefinedCorrelation("series has zero variance".into()))?;
    let r = centered(reference)
        .ok_or_else(|| SimError::UndefinedCorrelation("reference has zero variance".into()))?;
    let max_lag = max_lag.min(n - 1) as isize;
    let corr = |lag: isize| -> f64 {
        let mut acc = 0.0;
        for t in 0..n as isize {
            let u = t + lag;
            if u >= 0 && (u as usize) < n {
                acc += s[u as usize] * r[t as usize];
            }
        }
        acc
    };
    let mut best_lag = 0isize;
    let mut best = corr(0);
    for m in 1..=max_lag {
        for lag in [m, -m] {
            let c = corr(lag);
            if c > best {
                best = c;
                best_lag = lag;
            }
        }
    }
    Ok(best_lag)
}

/// [`correlation_lag`] expressed in seconds.
pub fn correlation_delay<T: Scalar>(
    series: &[T],
    reference: &[T],
    dt: T,
    max_lag: usize,
) -> Result<T, SimError> {
    let lag = correlation_lag(series, reference, max_lag)?;
    Ok(T::of(lag as f64) * dt)
}

fn sorted_points<T: Scalar>(points: &[(T, T)]) -> Vec<(T, T)> {
    // summation order fixed by value, so reordering inputs cannot move a bit
    let mut p = points.to_vec();
    p.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
    });
    p
}

/// Least-squares slope of distance against delay through the origin, m/s.
pub fn transfer_speed<T: Scalar>(points: &[(T, T)]) -> Result<T, SimError> {
    if points.len() < 2 {
        return Err(SimError::InvalidArgument(
            "transfer speed needs at least two points".into(),
        ));
    }
    if points.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(SimError::InvalidArgument("non-finite point".into()));
    }
    if points.iter().all(|p| p.1 == points[0].1) {
        return Err(SimError::InfiniteSpeed);
    }
    let p = sorted_points(points);
    let num = p.iter().fold(T::zero(), |acc, &(d, t)| acc + d * t);
    let den = p.iter().fold(T::zero(), |acc, &(_, t)| acc + t * t);
    Ok(num / den)
}

/// Exponent `p` in `d ∝ Δt^p`, from the log-log regression of delay on
/// distance.
pub fn fit_scaling_exponent<T: Scalar>(points: &[(T, T)]) -> Result<T, SimError> {
    if points.len() < 3 {
        return Err(SimError::InvalidArgument(
            "scaling fit needs at least three points".into(),
        ));
    }
    if points.iter().any(|p| !(p.0 > T::zero() && p.1 > T::zero())) {
        return Err(SimError::InvalidArgument(
            "distances and delays must be positive".into(),
        ));
    }
    let p = sorted_points(points);
    let xs: Vec<f64> = p.iter().map(|q| q.0.to_f64_lossy().ln()).collect();
    let ys: Vec<f64> = p.iter().map(|q| q.1.to_f64_lossy().ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(SimError::InvalidArgument("all distances are equal".into()));
    }
    let slope = sxy / sxx;
    if slope == 0.0 {
        return Err(SimError::InvalidArgument(
            "delay does not vary with distance".into(),
        ));
    }
    Ok(T::of(1.0 / slope))
}

/// Keeps points within `cutoff` meters of the leader.
pub fn near_leader<T: Scalar>(points: &[(T, T)], cutoff: T) -> Vec<(T, T)> {
    points.iter().copied().filter(|p| p.0 <= cutoff).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityVerdict<T> {
    pub alignment_strength: T,
    pub diverged: bool,
    pub divergence_step: Option<usize>,
}

/// Runs the base configuration once per Ks for `n_steps` and reports
/// which runs diverged.
pub fn stability_sweep<T: Scalar>(
    topology: &NetworkTopology<T>,
    base: &DsrParams<T>,
    initial: &[T],
    ks_values: &[T],
    n_steps: usize,
    noise: &NoiseStream,
) -> Result<Vec<StabilityVerdict<T>>, SimError> {
    if ks_values.is_empty() {
        return Err(SimError::InvalidArgument("Ks list is empty".into()));
    }
    ks_values
        .iter()
        .map(|&ks| {
            let mut params = base.clone();
            params.alignment_strength = ks;
            let summary = simulate_with(topology, &params, initial, n_steps, noise, |_, _| {})?;
            Ok(StabilityVerdict {
                alignment_strength: ks,
                diverged: summary.divergence_step.is_some(),
                divergence_step: summary.divergence_step,
            })
        })
        .collect()
}

/// Trailing-window mean; output has `len - window + 1` samples.
pub fn moving_average<T: Scalar>(series: &[T], window: usize) -> Vec<T> {
    if window == 0 || window > series.len() {
        return Vec::new();
    }
    let w = T::of_count(window);
    series
        .windows(window)
        .map(|s| s.iter().fold(T::zero(), |a, &b| a + b) / w)
        .collect()
}

/// Largest relative change of any pairwise distance between two formations.
pub fn formation_distortion<T: Scalar>(initial: &[Position<T>], later: &[Position<T>]) -> T {
    assert_eq!(initial.len(), later.len(), "formations differ in size");
    let mut worst = T::zero();
    for i in 0..initial.len() {
        for j in (i + 1)..initial.len() {
            let d0 = initial[i].distance(&initial[j]);
            if d0 > T::zero() {
                let d1 = later[i].distance(&later[j]);
                worst = worst.max((d1 - d0).abs() / d0);
            }
        }
    }
    worst
}

/// Largest deviation of any value from `target`.
pub fn max_deviation<T: Scalar>(values: &[T], target: T) -> T {
    values
        .iter()
        .fold(T::zero(), |m, &v| m.max((v - target).abs()))
}
