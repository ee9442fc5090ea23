//! Multiview data terms: photo-consistency (ZNCC) and semantic consistency
//! (SSD of class likelihoods), integrated over pixel correspondences of all
//! ordered view pairs.

use rayon::prelude::*;

use super::zncc::windowed_zncc;
use super::{Observations, VertexGradientField, ViewState};
use crate::mesh::{LabeledMesh, Vec3};
use crate::reproject::{correspond, sample_through, Correspondence};

/// Value of one data term with overlap statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DataTerm {
    pub value: f64,
    /// Pixels in the pairwise overlap domains, summed over pairs.
    pub pixels: usize,
    /// Window centers with a textureless patch (photo term only).
    pub uninformative: usize,
    /// Set when no view pair shares any surface point.
    pub no_overlap: bool,
}

/// What to evaluate in a data pass. `None` weights skip the term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataOptions {
    pub window: usize,
    pub photo_weight: Option<f64>,
    pub semantic_weight: Option<f64>,
    pub gradient: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataEvaluation {
    pub photo: DataTerm,
    pub semantic: DataTerm,
    /// Weighted sum of the requested terms' gradients.
    pub gradient: Option<VertexGradientField>,
}

struct PairResult {
    photo: DataTerm,
    semantic: DataTerm,
    gradient: Option<Vec<Vec3>>,
}

fn eval_pair(
    mesh: &LabeledMesh,
    obs: &Observations,
    state: &ViewState,
    i: usize,
    j: usize,
    opts: &DataOptions,
) -> PairResult {
    let corr = correspond(
        &obs.cameras[i],
        &obs.cameras[j],
        &state.rasters[i],
        &state.rasters[j],
        state.depth_tol,
    );
    let pixels = corr.count();
    let mut photo = DataTerm {
        pixels,
        ..DataTerm::default()
    };
    let mut semantic = photo;
    let (w, h) = (corr.width, corr.height);
    let np = w * h;

    // Per-pixel derivative of the weighted energy with respect to the warped
    // values of view j, per channel.
    let mut d_img: Option<Vec<f64>> = None;
    let mut d_lik: Option<Vec<f64>> = None;
    if pixels > 0 {
        if let Some(wp) = opts.photo_weight {
            let img_i = &obs.images[i];
            let warped = sample_through(&obs.images[j], &corr);
            let ch = img_i.channels();
            let res = windowed_zncc(
                img_i.data(),
                warped.data(),
                &corr.mask,
                w,
                h,
                ch,
                opts.window,
                opts.gradient,
            );
            photo.value = res.energy;
            photo.uninformative = res.uninformative;
            d_img = res.d_b.map(|mut d| {
                d.iter_mut().for_each(|v| *v *= wp);
                d
            });
        }
        if let Some(ws) = opts.semantic_weight {
            let li = &obs.likelihoods[i];
            let warped = sample_through(&obs.likelihoods[j], &corr);
            let ch = li.channels();
            let mut e = 0.0;
            let mut d = opts.gradient.then(|| vec![0.0; np * ch]);
            for idx in (0..np).filter(|&idx| corr.mask[idx]) {
                for c in 0..ch {
                    let r = li.data()[idx * ch + c] - warped.data()[idx * ch + c];
                    e += 0.5 * r * r;
                    if let Some(d) = d.as_mut() {
                        d[idx * ch + c] = -ws * r;
                    }
                }
            }
            semantic.value = e;
            d_lik = d;
        }
    }
    let gradient = opts.gradient.then(|| {
        let mut g = vec![Vec3::zeros(); mesh.num_vertices()];
        if pixels > 0 {
            scatter(
                mesh,
                obs,
                state,
                i,
                j,
                &corr,
                d_img.as_deref(),
                d_lik.as_deref(),
                &mut g,
            );
        }
        g
    });
    PairResult {
        photo,
        semantic,
        gradient,
    }
}

/// Chains the per-pixel derivatives through the image gradient of view `j`
/// and the projection into view `j`, then distributes the normal
/// displacement sensitivity to the three vertices of the visible face.
#[allow(clippy::too_many_arguments)]
fn scatter(
    mesh: &LabeledMesh,
    obs: &Observations,
    state: &ViewState,
    i: usize,
    j: usize,
    corr: &Correspondence,
    d_img: Option<&[f64]>,
    d_lik: Option<&[f64]>,
    g: &mut [Vec3],
) {
    let cam_j = &obs.cameras[j];
    let center_i = obs.cameras[i].center();
    let raster = &state.rasters[i];
    let img_ch = obs.images[j].channels();
    let lik_ch = obs.likelihoods.get(j).map_or(0, |l| l.channels());
    let mut img_grad = vec![[0.0; 2]; img_ch];
    let mut lik_grad = vec![[0.0; 2]; lik_ch];
    for idx in 0..corr.width * corr.height {
        if !corr.mask[idx] {
            continue;
        }
        let [u, v] = corr.coords[idx];
        let mut dx = 0.0;
        let mut dy = 0.0;
        if let Some(d) = d_img {
            let coef = &d[idx * img_ch..(idx + 1) * img_ch];
            if coef.iter().any(|&c| c != 0.0) {
                obs.images[j].sample_bilinear_gradient(u, v, &mut img_grad);
                for (c, gr) in coef.iter().zip(&img_grad) {
                    dx += c * gr[0];
                    dy += c * gr[1];
                }
            }
        }
        if let Some(d) = d_lik {
            let coef = &d[idx * lik_ch..(idx + 1) * lik_ch];
            if coef.iter().any(|&c| c != 0.0) {
                obs.likelihoods[j].sample_bilinear_gradient(u, v, &mut lik_grad);
                for (c, gr) in coef.iter().zip(&lik_grad) {
                    dx += c * gr[0];
                    dy += c * gr[1];
                }
            }
        }
        if dx == 0.0 && dy == 0.0 {
            continue;
        }
        let Some(face) = raster.face_at(idx) else {
            continue;
        };
        let Some(n) = state.normals[face] else {
            continue;
        };
        let x = corr.points[idx];
        let d_i = x - center_i;
        let nd = n.dot(&d_i);
        if nd.abs() < 1e-6 * d_i.norm() {
            continue;
        }
        let jac = cam_j.jacobian_at_camera_point(&cam_j.to_camera(&x));
        // derivative of the warped value along d_i
        let along = jac * d_i;
        let f = dx * along.x + dy * along.y;
        let push = n * (f / nd);
        let phi = raster.barycentric_at(idx);
        let tri = mesh.faces[face];
        for k in 0..3 {
            g[tri[k]] += push * phi[k];
        }
    }
}

/// Evaluates the requested data terms over all ordered view pairs. Pair
/// results are combined in lexicographic pair order.
pub fn data_terms(mesh: &LabeledMesh, obs: &Observations, state: &ViewState, opts: &DataOptions) -> DataEvaluation {
    let pairs = obs.pairs();
    let results: Vec<PairResult> = pairs
        .par_iter()
        .map(|&(i, j)| eval_pair(mesh, obs, state, i, j, opts))
        .collect();
    let mut photo = DataTerm::default();
    let mut semantic = DataTerm::default();
    let mut gradient = opts.gradient.then(|| VertexGradientField::zeros(mesh.num_vertices()));
    for r in &results {
        photo.value += r.photo.value;
        photo.pixels += r.photo.pixels;
        photo.uninformative += r.photo.uninformative;
        semantic.value += r.semantic.value;
        semantic.pixels += r.semantic.pixels;
        if let (Some(acc), Some(g)) = (gradient.as_mut(), r.gradient.as_ref()) {
            for (a, b) in acc.0.iter_mut().zip(g) {
                *a += b;
            }
        }
    }
    photo.no_overlap = photo.pixels == 0;
    semantic.no_overlap = semantic.pixels == 0;
    if opts.photo_weight.is_none() {
        photo = DataTerm::default();
    }
    if opts.semantic_weight.is_none() {
        semantic = DataTerm::default();
    }
    DataEvaluation {
        photo,
        semantic,
        gradient,
    }
}

fn options(window: usize, photo: bool, gradient: bool) -> DataOptions {
    DataOptions {
        window,
        photo_weight: photo.then_some(1.0),
        semantic_weight: (!photo).then_some(1.0),
        gradient,
    }
}

/// Sum of windowed `1 - ZNCC` costs over all ordered pairs.
pub fn photo_energy(mesh: &LabeledMesh, obs: &Observations, state: &ViewState, window: usize) -> DataTerm {
    data_terms(mesh, obs, state, &options(window, true, false)).photo
}

/// Gradient of [`photo_energy`], zero on `frozen` vertices.
pub fn photo_gradient(
    mesh: &LabeledMesh,
    obs: &Observations,
    state: &ViewState,
    window: usize,
    frozen: &[bool],
) -> VertexGradientField {
    let mut g = data_terms(mesh, obs, state, &options(window, true, true))
        .gradient
        .expect("gradient requested");
    g.zero_frozen(frozen);
    g
}

/// Half the squared likelihood difference, summed over labels, pixels and
/// ordered pairs. Zero without likelihood maps.
pub fn semantic_energy(mesh: &LabeledMesh, obs: &Observations, state: &ViewState) -> DataTerm {
    if obs.likelihoods.is_empty() {
        return DataTerm::default();
    }
    data_terms(mesh, obs, state, &options(3, false, false)).semantic
}

/// Gradient of [`semantic_energy`], zero on `frozen` vertices.
pub fn semantic_gradient(
    mesh: &LabeledMesh,
    obs: &Observations,
    state: &ViewState,
    frozen: &[bool],
) -> VertexGradientField {
    if obs.likelihoods.is_empty() {
        return VertexGradientField::zeros(mesh.num_vertices());
    }
    let mut g = data_terms(mesh, obs, state, &options(3, false, true))
        .gradient
        .expect("gradient requested");
    g.zero_frozen(frozen);
    g
}
