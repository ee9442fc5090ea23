//! Gradient-descent surface evolution with backtracking.

use log::debug;
use serde::{Deserialize, Serialize};

use super::{total_energy, total_gradient, EnergyBreakdown, EnergyWeights, Formulation, Observations, ViewState};
use crate::error::{Error, Result};
use crate::mesh::{AdjacencyIndex, LabeledMesh};

/// Step control of the descent loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    /// Nominal step width, applied to the raw gradient.
    pub step_size: f64,
    pub max_iters: usize,
    #[serde(default = "default_halvings")]
    pub max_halvings: usize,
    /// Stop when the energy dropped by less than this fraction over the last
    /// `patience` iterations.
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
}

fn default_halvings() -> usize {
    8
}

fn default_rel_tol() -> f64 {
    1e-5
}

fn default_patience() -> usize {
    5
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            step_size: 1e-3,
            max_iters: 10,
            max_halvings: default_halvings(),
            rel_tol: default_rel_tol(),
            patience: default_patience(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    Converged,
    /// No step size within the halving budget decreased the energy.
    NoDescent,
    /// The gradient vanished on all free vertices.
    Stationary,
}

#[derive(Debug, Clone)]
pub struct RefineResult {
    pub mesh: LabeledMesh,
    /// Energy before the first step and after every accepted step.
    pub trace: Vec<EnergyBreakdown>,
    pub stop: StopReason,
}

/// Runs `x <- x - step * dE/dx` on the free vertices. A step that increases
/// the energy is halved until it does not; visibility is recomputed for every
/// candidate surface. Labels are left untouched.
#[allow(clippy::too_many_arguments)]
pub fn refine(
    mesh: &LabeledMesh,
    adj: &AdjacencyIndex,
    obs: &Observations,
    weights: &EnergyWeights,
    mode: Formulation,
    schedule: &Schedule,
    frozen: &[bool],
) -> Result<RefineResult> {
    weights.validate()?;
    if !(schedule.step_size > 0.0 && schedule.step_size.is_finite()) {
        return Err(Error::Config(format!(
            "step_size must be positive, got {}",
            schedule.step_size
        )));
    }
    let mut current = mesh.clone();
    let mut state = ViewState::new(&current, &obs.cameras);
    let mut energy = total_energy(&current, adj, obs, &state, weights, mode);
    let mut trace = vec![energy];
    let mut stop = StopReason::MaxIters;
    for iter in 0..schedule.max_iters {
        let grad = total_gradient(&current, adj, obs, &state, weights, mode, frozen);
        if let Some(vertex) = grad.first_non_finite() {
            return Err(Error::NonFiniteGradient { vertex });
        }
        if grad.max_norm() == 0.0 {
            stop = StopReason::Stationary;
            break;
        }
        let mut step = schedule.step_size;
        let mut accepted = None;
        for _ in 0..=schedule.max_halvings {
            let moved = current
                .vertices
                .iter()
                .zip(&grad.0)
                .map(|(p, g)| p - g * step)
                .collect();
            let candidate = current.with_vertices(moved);
            let cand_state = ViewState::new(&candidate, &obs.cameras);
            let e = total_energy(&candidate, adj, obs, &cand_state, weights, mode);
            if e.e_total.is_finite() && e.e_total <= energy.e_total {
                accepted = Some((candidate, cand_state, e));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, cand_state, e)) = accepted else {
            stop = StopReason::NoDescent;
            break;
        };
        debug!("iteration {iter}: step {step:.3e}, energy {:.6e}", e.e_total);
        current = candidate;
        state = cand_state;
        energy = e;
        trace.push(energy);
        if trace.len() > schedule.patience {
            let past = trace[trace.len() - 1 - schedule.patience].e_total;
            if past - energy.e_total <= schedule.rel_tol * past.abs() {
                stop = StopReason::Converged;
                break;
            }
        }
    }
    Ok(RefineResult {
        mesh: current,
        trace,
        stop,
    })
}
