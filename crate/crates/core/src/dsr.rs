//! Delayed self-reinforcement information update.
//!
//! Every agent corrects its information toward its neighbors' average and
//! adds `β` times its own previous increment:
//!
//! ```text
//! I_i(k+1) = I_i(k) - Ks (Δ_i(k) + η_i(k)) δt + β (I_i(k) - I_i(k-1))
//! Δ_i(k)   = 1/|N_i| Σ_{j ∈ N_i} (I_i(k) - I_j(k))
//! ```
//!
//! Leaders count the external source as one extra member of `N_i`. Updates
//! are synchronous: all discrepancies read the frozen step-`k` vector.

use crate::error::SimError;
use crate::noise::NoiseStream;
use crate::scalar::Scalar;
use crate::topology::NetworkTopology;

/// Magnitude past which a run is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Piecewise-constant source value as a function of the step index.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSignal<T> {
    // (first step, value), strictly increasing first steps, first entry at 0
    segments: Vec<(usize, T)>,
}

impl<T: Scalar> SourceSignal<T> {
    pub fn constant(value: T) -> Self {
        Self {
            segments: vec![(0, value)],
        }
    }

    /// `initial` before `switch_step`, `target` from `switch_step` on.
    pub fn step(initial: T, target: T, switch_step: usize) -> Self {
        if switch_step == 0 {
            Self::constant(target)
        } else {
            Self {
                segments: vec![(0, initial), (switch_step, target)],
            }
        }
    }

    pub fn from_segments(mut segments: Vec<(usize, T)>) -> Result<Self, SimError> {
        segments.sort_by_key(|s| s.0);
        if segments.is_empty() {
            return Err(SimError::InvalidArgument(
                "source needs at least one segment".into(),
            ));
        }
        if segments.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(SimError::InvalidArgument(
                "duplicate source segment start".into(),
            ));
        }
        segments[0].0 = 0;
        Ok(Self { segments })
    }

    pub fn value_at(&self, step: usize) -> T {
        let idx = self.segments.partition_point(|s| s.0 <= step);
        self.segments[idx.saturating_sub(1)].1
    }

    /// Value held after the last switch.
    pub fn final_value(&self) -> T {
        self.segments.last().map(|s| s.1).unwrap_or_else(T::zero)
    }

    pub fn segments(&self) -> &[(usize, T)] {
        &self.segments
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsrParams<T> {
    /// `Ks`, 1/s.
    pub alignment_strength: T,
    /// `β`, in `[0, 1)`.
    pub dsr_gain: T,
    /// `δt`, s.
    pub update_interval: T,
    /// Half-width of the uniform noise added to every discrepancy.
    pub noise_amplitude: T,
    pub source: SourceSignal<T>,
}

impl<T: Scalar> DsrParams<T> {
    pub fn new(
        alignment_strength: T,
        dsr_gain: T,
        update_interval: T,
        source: SourceSignal<T>,
    ) -> Self {
        Self {
            alignment_strength,
            dsr_gain,
            update_interval,
            noise_amplitude: T::zero(),
            source,
        }
    }

    pub fn with_noise(mut self, amplitude: T) -> Self {
        self.noise_amplitude = amplitude;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |name, reason: &str| {
            Err(SimError::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.update_interval > T::zero()) || !self.update_interval.is_finite() {
            return bad("dt", "update interval must be positive and finite");
        }
        if !(self.alignment_strength >= T::zero()) || !self.alignment_strength.is_finite() {
            return bad("ks", "alignment strength must be non-negative and finite");
        }
        if !(self.dsr_gain >= T::zero()) {
            return bad("beta", "DSR gain must be non-negative");
        }
        if !(self.dsr_gain < T::one()) {
            return bad(
                "beta",
                "DSR gain must be below 1 (the response is undamped at 1)",
            );
        }
        if !(self.noise_amplitude >= T::zero()) || !self.noise_amplitude.is_finite() {
            return bad("noise", "noise amplitude must be non-negative and finite");
        }
        Ok(())
    }
}

/// Information at steps `k` and `k - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoState<T> {
    pub current: Vec<T>,
    pub previous: Vec<T>,
    pub step: usize,
}

impl<T: Scalar> InfoState<T> {
    /// Starts at rest: `I(-1) = I(0)`.
    pub fn at_rest(initial: Vec<T>) -> Self {
        Self {
            previous: initial.clone(),
            current: initial,
            step: 0,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.current.len()
    }
}

/// What an agent with an empty neighborhood does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsolationPolicy {
    #[default]
    Error,
    /// Keep only the momentum term `β (I(k) - I(k-1))`.
    HoldMomentum,
}

/// Recorded run: one row of per-agent values per recorded step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    n_agents: usize,
    time_step: T,
    steps: Vec<usize>,
    values: Vec<T>,
    divergence_step: Option<usize>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(n_agents: usize, time_step: T) -> Self {
        Self {
            n_agents,
            time_step,
            steps: Vec::new(),
            values: Vec::new(),
            divergence_step: None,
        }
    }

    pub fn push(&mut self, step: usize, row: &[T]) {
        assert_eq!(row.len(), self.n_agents, "row width mismatch");
        self.steps.push(step);
        self.values.extend_from_slice(row);
    }

    pub fn mark_diverged(&mut self, step: usize) {
        self.divergence_step = Some(step);
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_rows(&self) -> usize {
        self.steps.len()
    }

    /// Interval between consecutive step indices, s.
    pub fn time_step(&self) -> T {
        self.time_step
    }

    pub fn step_index(&self, row: usize) -> usize {
        self.steps[row]
    }

    pub fn time(&self, row: usize) -> T {
        T::of_count(self.steps[row]) * self.time_step
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.n_rows()).map(|r| self.time(r)).collect()
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.values[row * self.n_agents..(row + 1) * self.n_agents]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.values
            .chunks_exact(self.n_agents.max(1))
            .take(self.n_rows())
    }

    /// Time series of one agent.
    pub fn agent_series(&self, agent: usize) -> Vec<T> {
        self.rows().map(|r| r[agent]).collect()
    }

    pub fn last_row(&self) -> Option<&[T]> {
        self.n_rows().checked_sub(1).map(|r| self.row(r))
    }

    pub fn diverged(&self) -> bool {
        self.divergence_step.is_some()
    }

    pub fn divergence_step(&self) -> Option<usize> {
        self.divergence_step
    }

    /// True when every step from 0 to the last one is recorded.
    pub fn is_dense(&self) -> bool {
        self.steps.iter().enumerate().all(|(i, &s)| i == s)
    }
}

/// Outcome of an unrecorded run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub steps_taken: usize,
    pub divergence_step: Option<usize>,
}

fn discrepancy<T: Scalar>(
    i: usize,
    values: &[T],
    neighbors: &[usize],
    is_leader: bool,
    source_value: T,
) -> Option<T> {
    let own = values[i];
    let mut sum = T::zero();
    for &j in neighbors {
        sum += own - values[j];
    }
    let mut count = neighbors.len();
    if is_leader {
        sum += own - source_value;
        count += 1;
    }
    if count == 0 {
        None
    } else {
        Some(sum / T::of_count(count))
    }
}

/// Average difference between agent `i` and its neighbors (the source
/// included for leaders).
pub fn neighbor_discrepancy<T: Scalar>(
    i: usize,
    state: &InfoState<T>,
    topology: &NetworkTopology<T>,
    source_value: T,
) -> Result<T, SimError> {
    discrepancy(
        i,
        &state.current,
        topology.neighbors(i),
        topology.is_leader(i),
        source_value,
    )
    .ok_or(SimError::IsolatedAgent { agent: i })
}

/// Discrepancy of every agent at once.
pub fn discrepancies<T: Scalar>(
    values: &[T],
    topology: &NetworkTopology<T>,
    source_value: T,
) -> Result<Vec<T>, SimError> {
    (0..values.len())
        .map(|i| {
            discrepancy(
                i,
                values,
                topology.neighbors(i),
                topology.is_leader(i),
                source_value,
            )
            .ok_or(SimError::IsolatedAgent { agent: i })
        })
        .collect()
}

/// Advances `state` one step in place. `scratch` is reused between calls.
pub fn advance<T: Scalar>(
    state: &mut InfoState<T>,
    topology: &NetworkTopology<T>,
    params: &DsrParams<T>,
    noise: &NoiseStream,
    policy: IsolationPolicy,
    scratch: &mut Vec<T>,
) -> Result<(), SimError> {
    let n = state.n_agents();
    if topology.n_agents() != n || state.previous.len() != n {
        return Err(SimError::InvalidArgument(format!(
            "state has {n} agents, topology has {}",
            topology.n_agents()
        )));
    }
    let k = state.step;
    let source = params.source.value_at(k);
    let gain = params.alignment_strength;
    let dt = params.update_interval;
    let beta = params.dsr_gain;
    scratch.clear();
    for i in 0..n {
        let now = state.current[i];
        let momentum = beta * (now - state.previous[i]);
        let d = discrepancy(
            i,
            &state.current,
            topology.neighbors(i),
            topology.is_leader(i),
            source,
        );
        let next = match (d, policy) {
            (Some(d), _) => {
                let eta = noise.symmetric(i, k, params.noise_amplitude);
                now - gain * (d + eta) * dt + momentum
            }
            (None, IsolationPolicy::HoldMomentum) => now + momentum,
            (None, IsolationPolicy::Error) => return Err(SimError::IsolatedAgent { agent: i }),
        };
        scratch.push(next);
    }
    std::mem::swap(&mut state.previous, &mut state.current);
    std::mem::swap(&mut state.current, scratch);
    state.step += 1;
    Ok(())
}

/// One synchronous update; the input state is left untouched.
pub fn dsr_step<T: Scalar>(
    state: &InfoState<T>,
    topology: &NetworkTopology<T>,
    params: &DsrParams<T>,
    noise: &NoiseStream,
) -> Result<InfoState<T>, SimError> {
    let mut next = state.clone();
    let mut scratch = Vec::with_capacity(state.n_agents());
    advance(
        &mut next,
        topology,
        params,
        noise,
        IsolationPolicy::Error,
        &mut scratch,
    )?;
    Ok(next)
}

/// True iff any value is non-finite or exceeds the divergence threshold.
pub fn values_diverged<T: Scalar>(values: &[T]) -> bool {
    let limit = T::of(DIVERGENCE_THRESHOLD);
    values.iter().any(|v| !v.is_finite() || v.abs() > limit)
}

pub fn detect_divergence<T: Scalar>(state: &InfoState<T>) -> bool {
    values_diverged(&state.current)
}

/// Runs `n_steps` updates, calling `observe(step, values)` for the initial
/// row and after every step. Stops at the first divergent step.
pub fn simulate_with<T: Scalar, F: FnMut(usize, &[T])>(
    topology: &NetworkTopology<T>,
    params: &DsrParams<T>,
    initial: &[T],
    n_steps: usize,
    noise: &NoiseStream,
    mut observe: F,
) -> Result<RunSummary, SimError> {
    params.validate()?;
    if initial.len() != topology.n_agents() {
        return Err(SimError::InvalidArgument(format!(
            "initial vector has {} entries, topology has {} agents",
            initial.len(),
            topology.n_agents()
        )));
    }
    let mut state = InfoState::at_rest(initial.to_vec());
    let mut scratch = Vec::with_capacity(initial.len());
    observe(0, &state.current);
    if values_diverged(&state.current) {
        return Ok(RunSummary {
            steps_taken: 0,
            divergence_step: Some(0),
        });
    }
    for _ in 0..n_steps {
        advance(
            &mut state,
            topology,
            params,
            noise,
            IsolationPolicy::Error,
            &mut scratch,
        )?;
        observe(state.step, &state.current);
        if detect_divergence(&state) {
            return Ok(RunSummary {
                steps_taken: state.step,
                divergence_step: Some(state.step),
            });
        }
    }
    Ok(RunSummary {
        steps_taken: state.step,
        divergence_step: None,
    })
}

/// Full trajectory of a DSR run; every step is recorded.
pub fn simulate<T: Scalar>(
    topology: &NetworkTopology<T>,
    params: &DsrParams<T>,
    initial: &[T],
    n_steps: usize,
    noise: &NoiseStream,
) -> Result<Trajectory<T>, SimError> {
    simulate_strided(topology, params, initial, n_steps, noise, 1)
}

/// Like [`simulate`] but keeps only every `stride`-th row (plus the last).
pub fn simulate_strided<T: Scalar>(
    topology: &NetworkTopology<T>,
    params: &DsrParams<T>,
    initial: &[T],
    n_steps: usize,
    noise: &NoiseStream,
    stride: usize,
) -> Result<Trajectory<T>, SimError> {
    let mut rec = StridedRecorder::new(topology.n_agents(), params.update_interval, stride);
    let summary = simulate_with(topology, params, initial, n_steps, noise, |k, v| {
        rec.observe(k, v)
    })?;
    Ok(rec.finish(summary))
}

/// Observer that records every `stride`-th row and always the final one.
pub struct StridedRecorder<T> {
    traj: Trajectory<T>,
    stride: usize,
    pending: Option<(usize, Vec<T>)>,
}

impl<T: Scalar> StridedRecorder<T> {
    pub fn new(n_agents: usize, time_step: T, stride: usize) -> Self {
        Self {
            traj: Trajectory::new(n_agents, time_step),
            stride: stride.max(1),
            pending: None,
        }
    }

    pub fn observe(&mut self, step: usize, values: &[T]) {
        if step.is_multiple_of(self.stride) {
            self.traj.push(step, values);
            self.pending = None;
        } else {
            match &mut self.pending {
                Some((s, buf)) => {
                    *s = step;
                    buf.clear();
                    buf.extend_from_slice(values);
                }
                None => self.pending = Some((step, values.to_vec())),
            }
        }
    }

    pub fn finish(mut self, summary: RunSummary) -> Trajectory<T> {
        if let Some((s, buf)) = self.pending.take() {
            self.traj.push(s, &buf);
        }
        if let Some(k) = summary.divergence_step {
            self.traj.mark_diverged(k);
        }
        self.traj
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_lattice, NetworkTopology, Position};

    fn chain3() -> NetworkTopology<f64> {
        let p = vec![
            Position::new(0.0, 0.0),
            Position::new(1.0, 0.0),
            Position::new(2.0, 0.0),
        ];
        NetworkTopology::new(p, 1.2, vec![0]).unwrap()
    }

    fn corner_leader() -> NetworkTopology<f64> {
        NetworkTopology::new(build_lattice(3, 3, 1.0).unwrap(), 1.2, vec![0]).unwrap()
    }

    #[test]
    fn source_signal_lookup() {
        let s = SourceSignal::step(-1.0, 2.0, 5);
        assert_eq!(s.value_at(0), -1.0);
        assert_eq!(s.value_at(4), -1.0);
        assert_eq!(s.value_at(5), 2.0);
        assert_eq!(s.value_at(500), 2.0);
        assert_eq!(s.final_value(), 2.0);
        assert_eq!(SourceSignal::step(0.0, 1.0, 0).value_at(0), 1.0);
        let s = SourceSignal::from_segments(vec![(10, 3.0), (2, 1.0)]).unwrap();
        assert_eq!(s.value_at(0), 1.0);
        assert_eq!(s.value_at(10), 3.0);
        assert!(SourceSignal::<f64>::from_segments(vec![]).is_err());
    }

    #[test]
    fn params_validation() {
        let base = DsrParams::new(100.0, 0.96, 0.01, SourceSignal::constant(1.0));
        assert!(base.validate().is_ok());
        let mut p = base.clone();
        p.dsr_gain = 1.0;
        assert!(matches!(
            p.validate(),
            Err(SimError::InvalidParameter { name: "beta", .. })
        ));
        let mut p = base.clone();
        p.update_interval = 0.0;
        assert!(matches!(
            p.validate(),
            Err(SimError::InvalidParameter { name: "dt", .. })
        ));
        let mut p = base.clone();
        p.alignment_strength = -1.0;
        assert!(p.validate().is_err());
        let p = base.with_noise(-0.1);
        assert!(p.validate().is_err());
    }

    #[test]
    fn discrepancy_examples() {
        let t = corner_leader();
        let st = InfoState::at_rest(vec![0.0; 9]);
        assert_eq!(neighbor_discrepancy(4, &st, &t, 1.0).unwrap(), 0.0);
        // leader at 0 with two neighbors at 0 and source 1
        assert_eq!(neighbor_discrepancy(0, &st, &t, 1.0).unwrap(), -1.0 / 3.0);

        let t = chain3();
        let st = InfoState::at_rest(vec![0.0, 0.5, 1.0]);
        assert_eq!(neighbor_discrepancy(1, &st, &t, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn isolated_agent_is_an_error() {
        let p = vec![Position::new(0.0, 0.0), Position::new(5.0, 0.0)];
        let t = NetworkTopology::new(p, 1.0, vec![0]).unwrap();
        let st = InfoState::at_rest(vec![0.0, 0.0]);
        // the leader alone is fine: the source is its neighbor
        assert_eq!(neighbor_discrepancy(0, &st, &t, 1.0).unwrap(), -1.0);
        assert_eq!(
            neighbor_discrepancy(1, &st, &t, 1.0),
            Err(SimError::IsolatedAgent { agent: 1 })
        );
        let params = DsrParams::new(1.0, 0.0, 0.1, SourceSignal::constant(1.0));
        assert!(dsr_step(&st, &t, &params, &NoiseStream::new(0)).is_err());
    }

    #[test]
    fn hold_momentum_for_isolated_agents() {
        let p = vec![Position::new(0.0, 0.0), Position::new(5.0, 0.0)];
        let t = NetworkTopology::new(p, 1.0, vec![0]).unwrap();
        let mut st = InfoState {
            current: vec![0.0, 2.0],
            previous: vec![0.0, 1.5],
            step: 3,
        };
        let params = DsrParams::new(1.0, 0.5, 0.1, SourceSignal::constant(1.0));
        let mut scratch = Vec::new();
        advance(
            &mut st,
            &t,
            &params,
            &NoiseStream::new(0),
            IsolationPolicy::HoldMomentum,
            &mut scratch,
        )
        .unwrap();
        assert_eq!(st.current[1], 2.25);
        assert_eq!(st.step, 4);
    }

    #[test]
    fn zero_gains_are_identity() {
        let t = corner_leader();
        let st = InfoState {
            current: (0..9).map(|i| i as f64 * 0.1).collect(),
            previous: vec![0.3; 9],
            step: 0,
        };
        let params = DsrParams::new(0.0, 0.0, 0.01, SourceSignal::constant(1.0));
        let next = dsr_step(&st, &t, &params, &NoiseStream::new(0)).unwrap();
        assert_eq!(next.current, st.current);
        assert_eq!(next.previous, st.current);
        assert_eq!(next.step, 1);
    }

    #[test]
    fn leader_first_step() {
        let t = corner_leader();
        let st = InfoState::at_rest(vec![0.0; 9]);
        let params = DsrParams::new(100.0, 0.0, 0.01, SourceSignal::constant(1.0));
        let next = dsr_step(&st, &t, &params, &NoiseStream::new(0)).unwrap();
        assert!((next.current[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!(next.current[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn divergence_detection() {
        let mk = |v: Vec<f64>| InfoState::at_rest(v);
        assert!(!detect_divergence(&mk(vec![0.0, 0.5, 1.0])));
        assert!(detect_divergence(&mk(vec![0.0, f64::NAN])));
        assert!(detect_divergence(&mk(vec![1e7])));
        assert!(detect_divergence(&mk(vec![f64::NEG_INFINITY])));
        assert!(!detect_divergence(&mk(vec![-1e6])));
    }

    #[test]
    fn zero_steps_keeps_initial_row() {
        let t = chain3();
        let params = DsrParams::new(100.0, 0.96, 0.01, SourceSignal::constant(1.0));
        let tr = simulate(&t, &params, &[0.0, 0.2, 0.4], 0, &NoiseStream::new(0)).unwrap();
        assert_eq!(tr.n_rows(), 1);
        assert_eq!(tr.row(0), &[0.0, 0.2, 0.4]);
        assert!(!tr.diverged());
    }

    #[test]
    fn strided_recording_keeps_last_row() {
        let t = chain3();
        let params = DsrParams::new(10.0, 0.5, 0.01, SourceSignal::constant(1.0));
        let noise = NoiseStream::new(0);
        let full = simulate(&t, &params, &[0.0; 3], 10, &noise).unwrap();
        let sparse = simulate_strided(&t, &params, &[0.0; 3], 10, &noise, 4).unwrap();
        assert_eq!(
            (0..sparse.n_rows())
                .map(|r| sparse.step_index(r))
                .collect::<Vec<_>>(),
            vec![0, 4, 8, 10]
        );
        assert_eq!(sparse.row(3), full.row(10));
        assert!(full.is_dense() && !sparse.is_dense());
    }

    #[test]
    fn runaway_gain_is_flagged_and_truncated() {
        let t = chain3();
        let params = DsrParams::new(300.0, 0.0, 0.01, SourceSignal::constant(1.0));
        let tr = simulate(&t, &params, &[0.0; 3], 10_000, &NoiseStream::new(0)).unwrap();
        assert!(tr.diverged());
        let k = tr.divergence_step().unwrap();
        assert_eq!(tr.n_rows(), k + 1);
        assert!(values_diverged(tr.last_row().unwrap()));
    }

    #[test]
    fn works_in_single_precision() {
        let t32 =
            NetworkTopology::new(build_lattice(3, 3, 1.0_f32).unwrap(), 1.2, vec![0]).unwrap();
        let params = DsrParams::new(100.0_f32, 0.96, 0.01, SourceSignal::constant(1.0));
        let tr = simulate(&t32, &params, &[0.0; 9], 500, &NoiseStream::new(0)).unwrap();
        assert!(tr
            .last_row()
            .unwrap()
            .iter()
            .all(|v| (v - 1.0).abs() < 1e-3));
    }
}
