//! Semantic relabeling of mesh faces by MAP inference on the face graph.
//!
//! Each face is a node with a likelihood data cost and a normal-direction
//! prior; adjacent faces are coupled by an area-weighted Potts term.

mod mrf;
mod prior;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{Observations, ViewState};
use crate::error::{Error, Result};
use crate::mesh::{AdjacencyIndex, Label, LabeledMesh};

pub use mrf::{brute_force_map, loopy_bp, BpOptions, BpResult, LabelAssignment, MrfProblem};
pub use prior::{geo_prior, AngleBand, GeoPriorParams};

/// Added inside the logarithm of the data cost so that invisible faces get a
/// finite, label-independent cost.
pub const LIKELIHOOD_EPS: f64 = 1e-9;

/// Weights and solver settings of the relabeling step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelabelParams {
    #[serde(default = "default_mu1")]
    pub mu1: f64,
    #[serde(default = "default_mu2")]
    pub mu2: f64,
    #[serde(default)]
    pub geo: GeoPriorParams,
    #[serde(default)]
    pub bp: BpOptions,
}

fn default_mu1() -> f64 {
    0.35
}

fn default_mu2() -> f64 {
    0.5
}

impl Default for RelabelParams {
    fn default() -> Self {
        RelabelParams {
            mu1: default_mu1(),
            mu2: default_mu2(),
            geo: GeoPriorParams::default(),
            bp: BpOptions::default(),
        }
    }
}

impl RelabelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu1 >= 0.0 && self.mu1.is_finite() && self.mu2 >= 0.0 && self.mu2.is_finite()) {
            return Err(Error::Config(format!(
                "mu1 and mu2 must be non-negative, got {} and {}",
                self.mu1, self.mu2
            )));
        }
        if !(0.0..1.0).contains(&self.bp.damping) {
            return Err(Error::Config(format!(
                "bp damping must lie in [0, 1), got {}",
                self.bp.damping
            )));
        }
        self.geo.validate()
    }
}

/// Per-face data costs `-log(sum of likelihood over the face's pixels + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceDataTerms {
    pub num_labels: usize,
    /// `num_faces * num_labels`, label fastest.
    pub costs: Vec<f64>,
    /// Faces not visible in any view; their costs are uniform.
    pub invisible: Vec<bool>,
}

impl FaceDataTerms {
    pub fn face(&self, f: usize) -> &[f64] {
        &self.costs[f * self.num_labels..(f + 1) * self.num_labels]
    }
}

/// Integrates the raw per-pixel likelihoods over every face's footprint in
/// every view.
pub fn face_data_terms(mesh: &LabeledMesh, obs: &Observations, state: &ViewState) -> FaceDataTerms {
    let nl = obs.num_labels();
    let nf = mesh.num_faces();
    let mut sums = vec![0.0; nf * nl];
    let mut seen = vec![false; nf];
    for (raster, lik) in state.rasters.iter().zip(&obs.likelihoods) {
        for idx in 0..raster.width() * raster.height() {
            if let Some(f) = raster.face_at(idx) {
                seen[f] = true;
                let px = &lik.data()[idx * nl..(idx + 1) * nl];
                for (s, p) in sums[f * nl..(f + 1) * nl].iter_mut().zip(px) {
                    *s += p;
                }
            }
        }
    }
    FaceDataTerms {
        num_labels: nl,
        costs: sums.iter().map(|s| -(s + LIKELIHOOD_EPS).ln()).collect(),
        invisible: seen.iter().map(|s| !s).collect(),
    }
}

/// Data costs of a single face.
pub fn face_data_term(f: usize, mesh: &LabeledMesh, obs: &Observations, state: &ViewState) -> Vec<f64> {
    face_data_terms(mesh, obs, state).face(f).to_vec()
}

/// Assembles unary costs `E_data + mu1 E_geo` and Potts edges. The ordered
/// pair sum charges `mu2 A_f` from `f`'s side and `mu2 A_g` from `g`'s side,
/// so a disagreeing edge costs `mu2 (A_f + A_g)`.
pub fn build_mrf(
    mesh: &LabeledMesh,
    adj: &AdjacencyIndex,
    data: &FaceDataTerms,
    params: &RelabelParams,
) -> Result<MrfProblem> {
    let nl = data.num_labels;
    let geom: Vec<(nalgebra::Vector3<f64>, f64)> = (0..mesh.num_faces())
        .map(|f| mesh.normal_area(f).ok_or(Error::DegenerateFace { face: f }))
        .collect::<Result<_>>()?;
    let unary: Vec<f64> = (0..mesh.num_faces())
        .into_par_iter()
        .flat_map_iter(|f| {
            let (n, a) = geom[f];
            let d = data.face(f);
            (0..nl).map(move |l| d[l] + params.mu1 * geo_prior(&n, l as Label + 1, a, &params.geo))
        })
        .collect();
    let edges = adj
        .face_pairs()
        .into_iter()
        .map(|(f, g)| (f, g, params.mu2 * (geom[f].1 + geom[g].1)))
        .collect();
    MrfProblem::new(nl, unary, edges)
}

/// Outcome of one relabeling pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelabelReport {
    pub energy_before: f64,
    pub energy_after: f64,
    /// Set when BP found a worse labeling than the input and the input was kept.
    pub guard_triggered: bool,
    pub bp_converged: bool,
    pub bp_iterations: usize,
    pub invisible_faces: usize,
    pub changed_faces: usize,
}

/// Replaces the face labels by the BP solution of the face MRF; geometry is
/// untouched. The input labeling is kept when it has lower MRF energy.
pub fn relabel(
    mesh: &LabeledMesh,
    adj: &AdjacencyIndex,
    obs: &Observations,
    state: &ViewState,
    params: &RelabelParams,
) -> Result<(LabeledMesh, RelabelReport)> {
    params.validate()?;
    let nl = obs.num_labels();
    if nl == 0 {
        return Err(Error::Config("relabeling needs likelihood maps".into()));
    }
    if mesh.max_label() as usize > nl {
        return Err(Error::Config(format!(
            "mesh uses label {} but the likelihood maps have {nl} classes",
            mesh.max_label()
        )));
    }
    let data = face_data_terms(mesh, obs, state);
    let invisible_faces = data.invisible.iter().filter(|&&v| v).count();
    if invisible_faces > 0 {
        warn!("{invisible_faces} faces are not visible in any view; their labels follow the priors");
    }
    let problem = build_mrf(mesh, adj, &data, params)?;
    let energy_before = problem.energy(&mesh.labels);
    let bp = loopy_bp(&problem, &params.bp);
    if !bp.converged {
        warn!("belief propagation did not converge in {} sweeps", bp.iterations);
    }
    let guard_triggered = bp.assignment.energy > energy_before;
    let (labels, energy_after) = if guard_triggered {
        (mesh.labels.clone(), energy_before)
    } else {
        (bp.assignment.labels, bp.assignment.energy)
    };
    let changed_faces = labels.iter().zip(&mesh.labels).filter(|(a, b)| a != b).count();
    Ok((
        mesh.with_labels(labels),
        RelabelReport {
            energy_before,
            energy_after,
            guard_triggered,
            bp_converged: bp.converged,
            bp_iterations: bp.iterations,
            invisible_faces,
            changed_faces,
        },
    ))
}
