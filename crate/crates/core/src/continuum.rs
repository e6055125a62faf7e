//! Continuum-limit models integrated on the agent graph.
//!
//! The small-interval approximation of the DSR update is
//!
//! ```text
//! β δt Ï + (1 - β) İ = (a²/4) Ks ∇²I
//! ```
//!
//! with the graph operator `-(4/a²) Δ_i` standing in for `∇²`. Two limits
//! are built here: plain diffusion (`β → 0`) and the second-order model,
//! integrated with the explicit scheme
//!
//! ```text
//! I(k+1) = I(k) + İ(k) δ̂t
//! İ(k+1) = İ(k) - (1-β)/(β δt) İ(k) δ̂t - Ks/(β δt) Δ_i(k) δ̂t
//! ```
//!
//! where `δ̂t` is the integrator step and `δt` the DSR update interval that
//! only enters the coefficients. The drive carries `-Δ_i` so that the
//! uniform state at the source value is an attracting fixed point.

use crate::dsr::{
    discrepancies, values_diverged, RunSummary, SourceSignal, StridedRecorder, Trajectory,
};
use crate::error::SimError;
use crate::scalar::Scalar;
use crate::topology::NetworkTopology;

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumParams<T> {
    pub alignment_strength: T,
    pub dsr_gain: T,
    /// DSR update interval `δt` in the model coefficients, s.
    pub model_interval: T,
    /// Integration step `δ̂t`, s.
    pub integrator_step: T,
    pub source: SourceSignal<T>,
}

impl<T: Scalar> ContinuumParams<T> {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |name, reason: &str| {
            Err(SimError::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.integrator_step > T::zero()) || !self.integrator_step.is_finite() {
            return bad("integrator_dt", "integrator step must be positive");
        }
        if !(self.model_interval > T::zero()) || !self.model_interval.is_finite() {
            return bad("dt", "model interval must be positive");
        }
        if !(self.dsr_gain > T::zero()) {
            return bad("beta", "second-order model needs beta > 0");
        }
        if !(self.dsr_gain < T::one()) {
            return bad("beta", "DSR gain must be below 1");
        }
        if !(self.alignment_strength >= T::zero()) {
            return bad("ks", "alignment strength must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionParams<T> {
    pub alignment_strength: T,
    pub update_interval: T,
    pub source: SourceSignal<T>,
}

impl<T: Scalar> DiffusionParams<T> {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.update_interval > T::zero()) || !self.update_interval.is_finite() {
            return Err(SimError::InvalidParameter {
                name: "dt",
                reason: "update interval must be positive".into(),
            });
        }
        if !(self.alignment_strength >= T::zero()) {
            return Err(SimError::InvalidParameter {
                name: "ks",
                reason: "alignment strength must be non-negative".into(),
            });
        }
        Ok(())
    }
}

/// Value and rate of every agent.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderState<T> {
    pub value: Vec<T>,
    pub rate: Vec<T>,
    pub step: usize,
}

impl<T: Scalar> SecondOrderState<T> {
    pub fn at_rest(value: Vec<T>) -> Self {
        Self {
            rate: vec![T::zero(); value.len()],
            value,
            step: 0,
        }
    }
}

pub fn second_order_step<T: Scalar>(
    state: &SecondOrderState<T>,
    topology: &NetworkTopology<T>,
    params: &ContinuumParams<T>,
) -> Result<SecondOrderState<T>, SimError> {
    params.validate()?;
    let delta = discrepancies(&state.value, topology, params.source.value_at(state.step))?;
    let h = params.integrator_step;
    let scale = params.dsr_gain * params.model_interval;
    let damping = (T::one() - params.dsr_gain) / scale;
    let drive = params.alignment_strength / scale;
    let value = state
        .value
        .iter()
        .zip(&state.rate)
        .map(|(&v, &r)| v + r * h)
        .collect();
    let rate = state
        .rate
        .iter()
        .zip(&delta)
        .map(|(&r, &d)| r - damping * r * h - drive * d * h)
        .collect();
    Ok(SecondOrderState {
        value,
        rate,
        step: state.step + 1,
    })
}

/// `I(k+1) = I(k) - Ks Δ_i(k) δt`.
pub fn diffusion_step<T: Scalar>(
    values: &[T],
    step: usize,
    topology: &NetworkTopology<T>,
    params: &DiffusionParams<T>,
) -> Result<Vec<T>, SimError> {
    let delta = discrepancies(values, topology, params.source.value_at(step))?;
    let gain = params.alignment_strength;
    let dt = params.update_interval;
    Ok(values
        .iter()
        .zip(&delta)
        .map(|(&v, &d)| v - gain * d * dt)
        .collect())
}

/// Wave speed of the undamped limit, `c = sqrt(a² Ks / (4 δt))`.
pub fn predicted_wave_speed<T: Scalar>(neighbor_distance: T, alignment_strength: T, dt: T) -> T {
    (neighbor_distance * neighbor_distance * alignment_strength / (T::of(4.0) * dt)).sqrt()
}

/// Graph estimate of `∇²I`: `-(4/a²) Δ_i`.
pub fn graph_laplacian<T: Scalar>(
    values: &[T],
    topology: &NetworkTopology<T>,
    neighbor_distance: T,
    source_value: T,
) -> Result<Vec<T>, SimError> {
    let scale = T::of(4.0) / (neighbor_distance * neighbor_distance);
    Ok(discrepancies(values, topology, source_value)?
        .into_iter()
        .map(|d| -scale * d)
        .collect())
}

fn check_len<T: Scalar>(initial: &[T], topology: &NetworkTopology<T>) -> Result<(), SimError> {
    if initial.len() != topology.n_agents() {
        return Err(SimError::InvalidArgument(format!(
            "initial vector has {} entries, topology has {} agents",
            initial.len(),
            topology.n_agents()
        )));
    }
    Ok(())
}

/// Integrates the second-order model, observing the value vector at every step.
pub fn run_second_order<T: Scalar, F: FnMut(usize, &[T])>(
    topology: &NetworkTopology<T>,
    params: &ContinuumParams<T>,
    initial: &[T],
    n_steps: usize,
    mut observe: F,
) -> Result<RunSummary, SimError> {
    params.validate()?;
    check_len(initial, topology)?;
    let mut state = SecondOrderState::at_rest(initial.to_vec());
    observe(0, &state.value);
    for _ in 0..n_steps {
        state = second_order_step(&state, topology, params)?;
        observe(state.step, &state.value);
        if values_diverged(&state.value) || values_diverged(&state.rate) {
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

/// Integrates plain diffusion, observing the value vector at every step.
pub fn run_diffusion<T: Scalar, F: FnMut(usize, &[T])>(
    topology: &NetworkTopology<T>,
    params: &DiffusionParams<T>,
    initial: &[T],
    n_steps: usize,
    mut observe: F,
) -> Result<RunSummary, SimError> {
    params.validate()?;
    check_len(initial, topology)?;
    let mut values = initial.to_vec();
    observe(0, &values);
    for k in 0..n_steps {
        values = diffusion_step(&values, k, topology, params)?;
        observe(k + 1, &values);
        if values_diverged(&values) {
            return Ok(RunSummary {
                steps_taken: k + 1,
                divergence_step: Some(k + 1),
            });
        }
    }
    Ok(RunSummary {
        steps_taken: n_steps,
        divergence_step: None,
    })
}

pub fn simulate_second_order<T: Scalar>(
    topology: &NetworkTopology<T>,
    params: &ContinuumParams<T>,
    initial: &[T],
    n_steps: usize,
    stride: usize,
) -> Result<Trajectory<T>, SimError> {
    let mut rec = StridedRecorder::new(topology.n_agents(), params.integrator_step, stride);
    let summary = run_second_order(topology, params, initial, n_steps, |k, v| rec.observe(k, v))?;
    Ok(rec.finish(summary))
}

pub fn simulate_diffusion<T: Scalar>(
    topology: &NetworkTopology<T>,
    params: &DiffusionParams<T>,
    initial: &[T],
    n_steps: usize,
    stride: usize,
) -> Result<Trajectory<T>, SimError> {
    let mut rec = StridedRecorder::new(topology.n_agents(), params.update_interval, stride);
    let summary = run_diffusion(topology, params, initial, n_steps, |k, v| rec.observe(k, v))?;
    Ok(rec.finish(summary))
}
