//! Synthetic worlds with known geometry, labels and cameras, plus the
//! evaluation metrics.

mod metrics;
mod scene;
pub mod shapes;

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub use metrics::{
    closest_point_on_triangle, geometric_error, label_accuracy, point_mesh_distance, sample_surface, EvalReport,
    GeometricError, LabelAccuracy,
};
pub use scene::{
    make_scene, render_views, BlobSpec, CameraRing, Layout, NoiseSpec, RenderedViews, Scene, SceneSpec, Texture,
    TextureKind, TextureSpec,
};

use crate::classes::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::mesh::{build_adjacency, Label, LabeledMesh};

const STREAM_PERTURB: u64 = 3 << 20;
const STREAM_SCRAMBLE: u64 = 4 << 20;

/// Displaces interior vertices by an isotropic Gaussian with per-coordinate
/// deviation `vertex_sigma * diagonal` and gives a `label_scramble_rate`
/// fraction of faces a random wrong label. Boundary vertices stay put.
pub fn perturb_mesh(mesh: &LabeledMesh, noise: &NoiseSpec) -> Result<LabeledMesh> {
    noise.validate()?;
    let adj = build_adjacency(mesh)?;
    let sigma = noise.vertex_sigma * mesh.diagonal();
    let mut vertices = mesh.vertices.clone();
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
        let mut rng = noise.rng(STREAM_PERTURB);
        for (v, p) in vertices.iter_mut().enumerate() {
            // draw for every vertex so the stream does not depend on topology
            let d = [
                normal.sample(&mut rng),
                normal.sample(&mut rng),
                normal.sample(&mut rng),
            ];
            if !adj.is_boundary(v) {
                p.x += d[0];
                p.y += d[1];
                p.z += d[2];
            }
        }
    }
    let nl = (mesh.max_label() as usize).max(NUM_CLASSES);
    let mut labels = mesh.labels.clone();
    if noise.label_scramble_rate > 0.0 && nl > 1 {
        let mut rng = noise.rng(STREAM_SCRAMBLE);
        for l in labels.iter_mut() {
            if rng.random::<f64>() < noise.label_scramble_rate {
                let k = rng.random_range(1..nl as Label);
                *l = if k >= *l { k + 1 } else { k };
            }
        }
    }
    let out = LabeledMesh {
        vertices,
        faces: mesh.faces.clone(),
        labels,
    };
    let flipped = flipped_faces(mesh, &out);
    if flipped > 0 {
        warn!("perturbation flipped the orientation of {flipped} faces");
    }
    Ok(out)
}

/// Faces whose normal turned by more than 90 degrees between two meshes of
/// equal connectivity; a cheap indicator of folds and self-intersections.
pub fn flipped_faces(before: &LabeledMesh, after: &LabeledMesh) -> usize {
    (0..before.num_faces())
        .filter(|&f| match (before.normal_area(f), after.normal_area(f)) {
            (Some((a, _)), Some((b, _))) => a.dot(&b) < 0.0,
            _ => true,
        })
        .count()
}
