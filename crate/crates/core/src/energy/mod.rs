//! Variational energy of a labeled surface and gradient-descent refinement.
//!
//! The total energy is `E = E_photo + l1 E_sem + l2 E_intra + l3 E_inter`:
//! two multiview data terms integrated over image pairs and two
//! label-dependent smoothness terms evaluated on the mesh.

mod data;
mod descent;
mod smooth;
pub mod zncc;

use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::{ImageView, LikelihoodStack};
use crate::mesh::{AdjacencyIndex, Label, LabeledMesh, Vec3};
use crate::raster::{rasterize_all, RasterBuffers};

pub use data::{
    data_terms, photo_energy, photo_gradient, semantic_energy, semantic_gradient, DataEvaluation, DataOptions, DataTerm,
};
pub use descent::{refine, RefineResult, Schedule, StopReason};
pub use smooth::{baseline_smooth_energy, inter_energy, intra_energy, smoothness_gradients, thin_plate_density};
pub use zncc::{zncc_cost, ZnccCost};

/// Relative weights of the energy terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Per-label smoothness factor; entry `l - 1` belongs to label `l`.
    /// Labels beyond the list use 1.
    #[serde(default)]
    pub omega: Vec<f64>,
    /// Side of the ZNCC window; configured at the pipeline level.
    #[serde(skip, default = "default_window")]
    pub zncc_window: usize,
}

fn default_window() -> usize {
    7
}

impl Default for EnergyWeights {
    fn default() -> Self {
        EnergyWeights {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            omega: Vec::new(),
            zncc_window: default_window(),
        }
    }
}

impl EnergyWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be a finite non-negative number, got {v}"
                )));
            }
        }
        if let Some(w) = self.omega.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::Config(format!("omega entries must be non-negative, got {w}")));
        }
        if self.zncc_window < 3 || self.zncc_window.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "zncc_window must be odd and at least 3, got {}",
                self.zncc_window
            )));
        }
        Ok(())
    }

    pub fn omega(&self, label: Label) -> f64 {
        self.omega.get(label as usize - 1).copied().unwrap_or(1.0)
    }
}

/// Which smoothness formulation drives the geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    /// Label-aware terms: semantic consistency, per-class curvature and
    /// boundary straightness.
    #[default]
    Semantic,
    /// Photo-consistency plus uniform curvature smoothing over all vertices;
    /// labels are ignored.
    Baseline,
}

/// Values of the individual terms and their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct EnergyBreakdown {
    pub e_photo: f64,
    pub e_sem: f64,
    pub e_intra: f64,
    pub e_inter: f64,
    pub e_total: f64,
}

/// Per-vertex energy gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexGradientField(pub Vec<Vec3>);

impl VertexGradientField {
    pub fn zeros(n: usize) -> Self {
        VertexGradientField(vec![Vec3::zeros(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add_scaled(&mut self, other: &VertexGradientField, s: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b * s;
        }
    }

    pub fn zero_frozen(&mut self, frozen: &[bool]) {
        for (g, &f) in self.0.iter_mut().zip(frozen) {
            if f {
                *g = Vec3::zeros();
            }
        }
    }

    /// Largest per-vertex gradient norm.
    pub fn max_norm(&self) -> f64 {
        self.0.iter().map(|g| g.norm()).fold(0.0, f64::max)
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.0.iter().position(|g| !g.iter().all(|c| c.is_finite()))
    }
}

/// Calibrated views with their intensity images and (optionally) class
/// likelihoods.
#[derive(Debug, Clone)]
pub struct Observations {
    pub cameras: Vec<Camera>,
    pub images: Vec<ImageView>,
    pub likelihoods: Vec<LikelihoodStack>,
}

impl Observations {
    pub fn new(cameras: Vec<Camera>, images: Vec<ImageView>, likelihoods: Vec<LikelihoodStack>) -> Result<Self> {
        if cameras.len() != images.len() {
            return Err(Error::Config(format!(
                "{} cameras but {} images",
                cameras.len(),
                images.len()
            )));
        }
        if !likelihoods.is_empty() && likelihoods.len() != cameras.len() {
            return Err(Error::Config(format!(
                "{} cameras but {} likelihood maps",
                cameras.len(),
                likelihoods.len()
            )));
        }
        for (v, (c, img)) in cameras.iter().zip(&images).enumerate() {
            if (c.width, c.height) != (img.width(), img.height()) {
                return Err(Error::Config(format!(
                    "view {v}: camera is {}x{} but image is {}x{}",
                    c.width,
                    c.height,
                    img.width(),
                    img.height()
                )));
            }
            if img.channels() != images[0].channels() {
                return Err(Error::Config(format!("view {v}: channel count differs from view 0")));
            }
            if let Some(l) = likelihoods.get(v) {
                if (l.width(), l.height()) != (img.width(), img.height()) {
                    return Err(Error::Config(format!(
                        "view {v}: likelihood size differs from image size"
                    )));
                }
                if l.num_labels() != likelihoods[0].num_labels() {
                    return Err(Error::Config(format!("view {v}: label count differs from view 0")));
                }
            }
        }
        Ok(Observations {
            cameras,
            images,
            likelihoods,
        })
    }

    pub fn num_views(&self) -> usize {
        self.cameras.len()
    }

    pub fn num_labels(&self) -> usize {
        self.likelihoods.first().map_or(0, |l| l.num_labels())
    }

    /// Ordered view pairs `(i, j)`, `i != j`, in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.num_views();
        (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect()
    }
}

/// Visibility of the current mesh in every view.
#[derive(Debug, Clone)]
pub struct ViewState {
    pub rasters: Vec<RasterBuffers>,
    /// Unit face normals; `None` for degenerate faces.
    pub normals: Vec<Option<Vec3>>,
    /// Occlusion slack for cross-view depth tests.
    pub depth_tol: f64,
}

impl ViewState {
    pub fn new(mesh: &LabeledMesh, cameras: &[Camera]) -> Self {
        ViewState {
            rasters: rasterize_all(mesh, cameras),
            normals: (0..mesh.num_faces())
                .map(|f| mesh.normal_area(f).map(|(n, _)| n))
                .collect(),
            depth_tol: 1e-3 * mesh.diagonal(),
        }
    }
}

/// Vertices excluded from refinement: boundary vertices plus every vertex
/// touching a face whose label is in `frozen_labels`.
pub fn frozen_vertices(mesh: &LabeledMesh, adj: &AdjacencyIndex, frozen_labels: &[Label]) -> Vec<bool> {
    (0..mesh.num_vertices())
        .map(|v| {
            adj.is_boundary(v)
                || adj
                    .ring_faces(v)
                    .iter()
                    .any(|&f| frozen_labels.contains(&mesh.labels[f]))
        })
        .collect()
}

/// Evaluates every term of the energy on the current mesh.
///
/// Terms with zero weight that are expensive to evaluate (semantic
/// consistency) are skipped and reported as 0; in baseline mode the semantic
/// and boundary terms are 0 and `e_intra` holds the uniform curvature sum.
pub fn total_energy(
    mesh: &LabeledMesh,
    adj: &AdjacencyIndex,
    obs: &Observations,
    state: &ViewState,
    weights: &EnergyWeights,
    mode: Formulation,
) -> EnergyBreakdown {
    let semantic = mode == Formulation::Semantic;
    let opts = DataOptions {
        window: weights.zncc_window,
        photo_weight: Some(1.0),
        semantic_weight: (semantic && weights.lambda1 > 0.0 && !obs.likelihoods.is_empty()).then_some(weights.lambda1),
        gradient: false,
    };
    let data = data_terms(mesh, obs, state, &opts);
    let e_intra = match mode {
        Formulation::Semantic => intra_energy(mesh, adj, weights),
        Formulation::Baseline => baseline_smooth_energy(mesh, adj),
    };
    let e_inter = if semantic { inter_energy(mesh, adj) } else { 0.0 };
    let e_photo = data.photo.value;
    let e_sem = data.semantic.value;
    EnergyBreakdown {
        e_photo,
        e_sem,
        e_intra,
        e_inter,
        e_total: e_photo + weights.lambda1 * e_sem + weights.lambda2 * e_intra + weights.lambda3 * e_inter,
    }
}

/// Gradient of [`total_energy`] with respect to the vertex positions, zero on
/// `frozen` vertices.
pub fn total_gradient(
    mesh: &LabeledMesh,
    adj: &AdjacencyIndex,
    obs: &Observations,
    state: &ViewState,
    weights: &EnergyWeights,
    mode: Formulation,
    frozen: &[bool],
) -> VertexGradientField {
    let semantic = mode == Formulation::Semantic;
    let opts = DataOptions {
        window: weights.zncc_window,
        photo_weight: Some(1.0),
        semantic_weight: (semantic && weights.lambda1 > 0.0 && !obs.likelihoods.is_empty()).then_some(weights.lambda1),
        gradient: true,
    };
    let data = data_terms(mesh, obs, state, &opts);
    let mut grad = data
        .gradient
        .unwrap_or_else(|| VertexGradientField::zeros(mesh.num_vertices()));
    let smooth = smoothness_gradients(mesh, adj, weights, mode);
    for (g, s) in grad.0.iter_mut().zip(&smooth.0) {
        *g += s;
    }
    grad.zero_frozen(frozen);
    grad
}
