//! Geometric and semantic evaluation against ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{LabeledMesh, Vec3};

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Distance from `p` to the nearest face of `mesh`.
pub fn point_mesh_distance(p: &Vec3, mesh: &LabeledMesh) -> f64 {
    (0..mesh.num_faces())
        .map(|f| {
            let [a, b, c] = mesh.corners(f);
            (closest_point_on_triangle(p, &a, &b, &c) - p).norm_squared()
        })
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Area-weighted uniform samples on the surface.
pub fn sample_surface(mesh: &LabeledMesh, count: usize, seed: u64) -> Vec<Vec3> {
    let mut cum = Vec::with_capacity(mesh.num_faces());
    let mut total = 0.0;
    for f in 0..mesh.num_faces() {
        total += mesh.normal_area(f).map_or(0.0, |(_, a)| a);
        cum.push(total);
    }
    if total <= 0.0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let t = rng.random::<f64>() * total;
            let f = cum.partition_point(|&c| c <= t).min(cum.len() - 1);
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let s = r1.sqrt();
            let [a, b, c] = mesh.corners(f);
            a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricError {
    /// Mean distance from samples on the test mesh to the reference.
    pub mean: f64,
    /// Largest sampled distance in either direction.
    pub max: f64,
}

/// Sampled surface distance between a test mesh and a reference mesh.
pub fn geometric_error(
    test: &LabeledMesh,
    reference: &LabeledMesh,
    samples: usize,
    seed: u64,
) -> Result<GeometricError> {
    if test.num_faces() == 0 || reference.num_faces() == 0 {
        return Err(Error::InvalidMesh("geometric error needs two non-empty meshes".into()));
    }
    let forward: Vec<f64> = sample_surface(test, samples, seed)
        .par_iter()
        .map(|p| point_mesh_distance(p, reference))
        .collect();
    let backward_max = sample_surface(reference, samples, seed ^ 0x5eed)
        .par_iter()
        .map(|p| point_mesh_distance(p, test))
        .reduce(|| 0.0, f64::max);
    let mean = if forward.is_empty() {
        0.0
    } else {
        forward.iter().sum::<f64>() / forward.len() as f64
    };
    Ok(GeometricError {
        mean,
        max: forward.iter().copied().fold(backward_max, f64::max),
    })
}

/// Confusion-matrix accuracies over labeled ground-truth pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAccuracy {
    /// `confusion[t][p]`: pixels of true class `t + 1` predicted as `p + 1`.
    pub confusion: Vec<Vec<u64>>,
    /// Labeled pixels predicted as background.
    pub unlabeled: u64,
    pub overall: f64,
    /// Mean of the per-class accuracies over classes present in the truth.
    pub average: f64,
    /// `c_ii / N_i` per class, `None` for classes absent from the truth.
    pub per_class: Vec<Option<f64>>,
}

/// Compares predicted and true class images of equal size; pixels with true
/// label 0 are ignored.
pub fn label_accuracy(pred: &[u32], truth: &[u32], num_labels: usize) -> Result<LabelAccuracy> {
    if pred.len() != truth.len() {
        return Err(Error::Config(format!(
            "class images differ in size: {} vs {} pixels",
            pred.len(),
            truth.len()
        )));
    }
    let mut confusion = vec![vec![0u64; num_labels]; num_labels];
    let mut unlabeled = 0;
    for (&p, &t) in pred.iter().zip(truth) {
        if t == 0 {
            continue;
        }
        if t as usize > num_labels || p as usize > num_labels {
            return Err(Error::Config(format!(
                "label {} exceeds {num_labels} classes",
                t.max(p)
            )));
        }
        if p == 0 {
            unlabeled += 1;
        } else {
            confusion[t as usize - 1][p as usize - 1] += 1;
        }
    }
    let row_totals: Vec<u64> = confusion.iter().map(|r| r.iter().sum()).collect();
    let n = row_totals.iter().sum::<u64>() + unlabeled;
    let correct: u64 = (0..num_labels).map(|i| confusion[i][i]).sum();
    // rows count only labeled predictions; unlabeled pixels still belong to N_i
    let mut class_n = row_totals.clone();
    for (&p, &t) in pred.iter().zip(truth) {
        if t != 0 && p == 0 {
            class_n[t as usize - 1] += 1;
        }
    }
    let per_class: Vec<Option<f64>> = (0..num_labels)
        .map(|i| (class_n[i] > 0).then(|| confusion[i][i] as f64 / class_n[i] as f64))
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    Ok(LabelAccuracy {
        overall: if n > 0 { correct as f64 / n as f64 } else { 0.0 },
        average: if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        },
        per_class,
        confusion,
        unlabeled,
    })
}

/// Combined geometric and semantic evaluation of a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall_accuracy: f64,
    pub average_accuracy: f64,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub mean_geometric_error: f64,
    pub max_geometric_error: f64,
}
