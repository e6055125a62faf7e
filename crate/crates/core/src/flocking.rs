//! Constant-speed planar flocking with heading as the transferred
//! information. Neighborhoods are recomputed from current positions at every
//! step, so the interaction graph changes as the flock turns.

use crate::dsr::{advance, DsrParams, InfoState, IsolationPolicy, SourceSignal, Trajectory};
use crate::error::SimError;
use crate::noise::NoiseStream;
use crate::scalar::Scalar;
use crate::topology::{min_neighbor_count, NetworkTopology, Position};

/// Neighbors every agent needs at the start of a maneuver.
pub const MIN_START_NEIGHBORS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct FlockParams<T> {
    /// Fixed speed `v`, m/s.
    pub speed: T,
    pub alignment_strength: T,
    pub dsr_gain: T,
    pub update_interval: T,
    pub noise_amplitude: T,
    pub sensing_radius: T,
    /// Source heading before `switch_step`; also every agent's start heading.
    pub initial_heading: T,
    /// Source heading from `switch_step` on.
    pub target_heading: T,
    pub switch_step: usize,
    pub n_steps: usize,
}

impl<T: Scalar> FlockParams<T> {
    pub fn source(&self) -> SourceSignal<T> {
        SourceSignal::step(self.initial_heading, self.target_heading, self.switch_step)
    }

    pub fn dsr_params(&self) -> DsrParams<T> {
        DsrParams::new(
            self.alignment_strength,
            self.dsr_gain,
            self.update_interval,
            self.source(),
        )
        .with_noise(self.noise_amplitude)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.speed > T::zero()) || !self.speed.is_finite() {
            return Err(SimError::InvalidParameter {
                name: "speed",
                reason: "speed must be positive".into(),
            });
        }
        if !(self.sensing_radius > T::zero()) {
            return Err(SimError::InvalidParameter {
                name: "sensing_radius",
                reason: "sensing radius must be positive".into(),
            });
        }
        self.dsr_params().validate()
    }
}

/// Positions and headings of every agent at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct FlockTrajectory<T> {
    n_agents: usize,
    positions: Vec<Position<T>>,
    pub headings: Trajectory<T>,
    pub params: FlockParams<T>,
    pub leader_ids: Vec<usize>,
}

impl<T: Scalar> FlockTrajectory<T> {
    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_rows(&self) -> usize {
        self.headings.n_rows()
    }

    pub fn time_step(&self) -> T {
        self.params.update_interval
    }

    pub fn positions_at(&self, row: usize) -> &[Position<T>] {
        &self.positions[row * self.n_agents..(row + 1) * self.n_agents]
    }

    pub fn agent_path(&self, agent: usize) -> Vec<Position<T>> {
        (0..self.n_rows())
            .map(|r| self.positions_at(r)[agent])
            .collect()
    }

    /// Synthetic trajectory from explicit per-step positions; headings are
    /// taken from the displacement direction.
    pub fn from_paths(paths: &[Vec<Position<T>>], time_step: T) -> Result<Self, SimError> {
        let n_agents = paths.len();
        let n_rows = paths.first().map(Vec::len).unwrap_or(0);
        if paths.iter().any(|p| p.len() != n_rows) {
            return Err(SimError::InvalidArgument("paths differ in length".into()));
        }
        let mut positions = Vec::with_capacity(n_agents * n_rows);
        let mut headings = Trajectory::new(n_agents, time_step);
        let mut row = vec![T::zero(); n_agents];
        for k in 0..n_rows {
            for (a, p) in paths.iter().enumerate() {
                positions.push(p[k]);
                let (from, to) = if k + 1 < n_rows {
                    (p[k], p[k + 1])
                } else if k > 0 {
                    (p[k - 1], p[k])
                } else {
                    (p[k], p[k])
                };
                row[a] = (to.y - from.y).atan2(to.x - from.x);
            }
            headings.push(k, &row);
        }
        let params = FlockParams {
            speed: T::one(),
            alignment_strength: T::zero(),
            dsr_gain: T::zero(),
            update_interval: time_step,
            noise_amplitude: T::zero(),
            sensing_radius: T::one(),
            initial_heading: T::zero(),
            target_heading: T::zero(),
            switch_step: 0,
            n_steps: n_rows.saturating_sub(1),
        };
        Ok(Self {
            n_agents,
            positions,
            headings,
            params,
            leader_ids: Vec::new(),
        })
    }
}

/// Moves every agent `v δt` along its heading.
pub fn kinematic_step<T: Scalar>(positions: &mut [Position<T>], headings: &[T], speed: T, dt: T) {
    assert_eq!(
        positions.len(),
        headings.len(),
        "positions and headings differ in length"
    );
    let stride = speed * dt;
    for (p, &h) in positions.iter_mut().zip(headings) {
        let (s, c) = h.sin_cos();
        p.x += stride * c;
        p.y += stride * s;
    }
}

/// Runs a turn maneuver. Each step recomputes neighborhoods, updates
/// headings with DSR, then moves the agents along the new headings.
/// Non-leaders that lose every neighbor keep only their momentum term.
pub fn run_maneuver<T: Scalar>(
    initial_positions: &[Position<T>],
    leader_ids: &[usize],
    params: &FlockParams<T>,
    noise: &NoiseStream,
) -> Result<FlockTrajectory<T>, SimError> {
    params.validate()?;
    let mut topology = NetworkTopology::new(
        initial_positions.to_vec(),
        params.sensing_radius,
        leader_ids.to_vec(),
    )?;
    let found = min_neighbor_count(&topology);
    if found < MIN_START_NEIGHBORS {
        return Err(SimError::InsufficientNeighbors {
            required: MIN_START_NEIGHBORS,
            found,
        });
    }
    let n = initial_positions.len();
    let dsr = params.dsr_params();
    let mut state = InfoState::at_rest(vec![params.initial_heading; n]);
    let mut positions = initial_positions.to_vec();
    let mut scratch = Vec::with_capacity(n);

    let mut all_positions = Vec::with_capacity(n * (params.n_steps + 1));
    let mut headings = Trajectory::new(n, params.update_interval);
    all_positions.extend_from_slice(&positions);
    headings.push(0, &state.current);

    for _ in 0..params.n_steps {
        if state.step > 0 {
            topology.update_positions(&positions);
        }
        advance(
            &mut state,
            &topology,
            &dsr,
            noise,
            IsolationPolicy::HoldMomentum,
            &mut scratch,
        )?;
        kinematic_step(
            &mut positions,
            &state.current,
            params.speed,
            params.update_interval,
        );
        all_positions.extend_from_slice(&positions);
        headings.push(state.step, &state.current);
    }

    Ok(FlockTrajectory {
        n_agents: n,
        positions: all_positions,
        headings,
        params: params.clone(),
        leader_ids: topology.leader_ids().to_vec(),
    })
}
