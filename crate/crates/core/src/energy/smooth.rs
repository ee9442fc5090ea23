//! Label-dependent smoothness terms and their exact gradients.

use std::f64::consts::PI;

use log::warn;
use rayon::prelude::*;

use super::{EnergyWeights, Formulation, VertexGradientField};
use crate::autodiff::Dual;
use crate::mesh::{edge_angle, one_ring_terms, to_arr, transition_endpoints, AdjacencyIndex, LabeledMesh, Vec3};

/// Thin-plate density `(|k1| + |k2|) / 2` at an interior vertex, `None` for
/// boundary vertices and degenerate fans.
pub fn thin_plate_density(mesh: &LabeledMesh, adj: &AdjacencyIndex, v: usize) -> Option<f64> {
    if adj.is_boundary(v) {
        return None;
    }
    let ring: Vec<[f64; 3]> = adj
        .ring_vertices(v)
        .iter()
        .map(|&r| to_arr(&mesh.vertices[r]))
        .collect();
    one_ring_terms(to_arr(&mesh.vertices[v]), &ring).map(|t| t.thin_plate())
}

/// Weight of the curvature penalty at `v`: `omega_l` for a homogeneous fan of
/// label `l`, zero otherwise. In baseline mode every interior vertex has
/// weight 1.
fn curvature_weight(
    mesh: &LabeledMesh,
    adj: &AdjacencyIndex,
    weights: &EnergyWeights,
    mode: Formulation,
    v: usize,
) -> f64 {
    match mode {
        Formulation::Baseline => {
            if adj.is_boundary(v) {
                0.0
            } else {
                1.0
            }
        }
        Formulation::Semantic => match transition_endpoints(mesh, adj, v) {
            Some(Ok(l)) => weights.omega(l),
            _ => 0.0,
        },
    }
}

fn weighted_curvature_sum(mesh: &LabeledMesh, adj: &AdjacencyIndex, weights: &EnergyWeights, mode: Formulation) -> f64 {
    let mut total = 0.0;
    for v in 0..mesh.num_vertices() {
        let w = curvature_weight(mesh, adj, weights, mode, v);
        if w == 0.0 {
            continue;
        }
        match thin_plate_density(mesh, adj, v) {
            Some(d) => total += w * d,
            None => warn!("vertex {v}: degenerate one-ring skipped in curvature term"),
        }
    }
    total
}

/// Class-weighted thin-plate penalty over vertices with a homogeneous fan.
pub fn intra_energy(mesh: &LabeledMesh, adj: &AdjacencyIndex, weights: &EnergyWeights) -> f64 {
    weighted_curvature_sum(mesh, adj, weights, Formulation::Semantic)
}

/// Unweighted thin-plate penalty over all interior vertices.
pub fn baseline_smooth_energy(mesh: &LabeledMesh, adj: &AdjacencyIndex) -> f64 {
    weighted_curvature_sum(mesh, adj, &EnergyWeights::default(), Formulation::Baseline)
}

/// Sum of `(pi - gamma)^2` over two-label transition vertices.
pub fn inter_energy(mesh: &LabeledMesh, adj: &AdjacencyIndex) -> f64 {
    (0..mesh.num_vertices())
        .filter_map(|v| match transition_endpoints(mesh, adj, v) {
            Some(Err((v1, v2))) => {
                let g = edge_angle(
                    to_arr(&mesh.vertices[v]),
                    to_arr(&mesh.vertices[v1]),
                    to_arr(&mesh.vertices[v2]),
                );
                Some((PI - g) * (PI - g))
            }
            _ => None,
        })
        .fold(0.0, |a, b| a + b)
}

/// Gradient of one vertex's thin-plate density with respect to the center
/// and its ring, by forward-mode differentiation. Entry 0 is the center.
fn density_gradient(mesh: &LabeledMesh, adj: &AdjacencyIndex, v: usize) -> Option<Vec<Vec3>> {
    let ids: Vec<usize> = std::iter::once(v).chain(adj.ring_vertices(v).iter().copied()).collect();
    let base: Vec<[f64; 3]> = ids.iter().map(|&i| to_arr(&mesh.vertices[i])).collect();
    let mut out = vec![Vec3::zeros(); ids.len()];
    for (slot, g) in out.iter_mut().enumerate() {
        for c in 0..3 {
            let pts: Vec<[Dual; 3]> = base
                .iter()
                .enumerate()
                .map(|(s, p)| {
                    let mut q = p.map(Dual::constant);
                    if s == slot {
                        q[c] = Dual::variable(p[c]);
                    }
                    q
                })
                .collect();
            let terms = one_ring_terms(pts[0], &pts[1..])?;
            g[c] = terms.thin_plate().d;
        }
    }
    Some(out)
}

/// Gradient of `(pi - gamma)^2` with respect to `(v, v1, v2)`.
fn angle_penalty_gradient(p: Vec3, a: Vec3, b: Vec3) -> Option<[Vec3; 3]> {
    let u = a - p;
    let w = b - p;
    let (lu, lw) = (u.norm(), w.norm());
    if lu == 0.0 || lw == 0.0 {
        return None;
    }
    let (uh, wh) = (u / lu, w / lw);
    let gamma = u.cross(&w).norm().atan2(u.dot(&w));
    let (sin, cos) = gamma.sin_cos();
    // (pi - gamma) / sin(gamma) tends to 1 at the minimum.
    let ratio = if PI - gamma < 1e-6 {
        1.0
    } else if sin < 1e-12 {
        return None;
    } else {
        (PI - gamma) / sin
    };
    // dE/dgamma = -2 (pi - gamma); dgamma/du = (uh cos - wh) / (|u| sin)
    let du = (uh * cos - wh) * (-2.0 * ratio / lu);
    let dw = (wh * cos - uh) * (-2.0 * ratio / lw);
    Some([-(du + dw), du, dw])
}

/// Gradient of `l2 E_intra + l3 E_inter` (semantic) or `l2 E_smooth`
/// (baseline). Terms with zero weight are skipped.
pub fn smoothness_gradients(
    mesh: &LabeledMesh,
    adj: &AdjacencyIndex,
    weights: &EnergyWeights,
    mode: Formulation,
) -> VertexGradientField {
    let n = mesh.num_vertices();
    let mut grad = VertexGradientField::zeros(n);
    if weights.lambda2 > 0.0 {
        let contribs: Vec<Option<(f64, Vec<Vec3>)>> = (0..n)
            .into_par_iter()
            .map(|v| {
                let w = curvature_weight(mesh, adj, weights, mode, v);
                if w == 0.0 {
                    return None;
                }
                density_gradient(mesh, adj, v).map(|g| (w * weights.lambda2, g))
            })
            .collect();
        for (v, c) in contribs.into_iter().enumerate() {
            if let Some((w, g)) = c {
                grad.0[v] += g[0] * w;
                for (&r, gr) in adj.ring_vertices(v).iter().zip(&g[1..]) {
                    grad.0[r] += gr * w;
                }
            }
        }
    }
    if mode == Formulation::Semantic && weights.lambda3 > 0.0 {
        for v in 0..n {
            if let Some(Err((v1, v2))) = transition_endpoints(mesh, adj, v) {
                let vs = &mesh.vertices;
                if let Some([gp, ga, gb]) = angle_penalty_gradient(vs[v], vs[v1], vs[v2]) {
                    grad.0[v] += gp * weights.lambda3;
                    grad.0[v1] += ga * weights.lambda3;
                    grad.0[v2] += gb * weights.lambda3;
                }
            }
        }
    }
    grad
}
