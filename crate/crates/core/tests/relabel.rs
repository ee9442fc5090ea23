use semref::camera::Camera;
use semref::classes::{FACADE, GROUND, ROOF};
use semref::energy::{Observations, ViewState};
use semref::image::{ImageView, LikelihoodStack, PixelGrid};
use semref::mesh::{build_adjacency, LabeledMesh, Vec3};
use semref::relabel::{
    brute_force_map, build_mrf, face_data_term, face_data_terms, loopy_bp, relabel, BpOptions, MrfProblem,
    RelabelParams, LIKELIHOOD_EPS,
};
use semref::synth::shapes::grid_plane;
use semref::synth::{make_scene, perturb_mesh, render_views, CameraRing, Layout, NoiseSpec, Scene, SceneSpec};

const EPS: f64 = LIKELIHOOD_EPS;

fn nadir(height: f64, px: usize) -> Camera {
    Camera::look_at(
        Vec3::new(0.0, 0.0, height),
        Vec3::zeros(),
        Vec3::new(0.0, 1.0, 0.0),
        60.0,
        px,
        px,
    )
    .unwrap()
}

/// One view whose likelihood is 1 for `label` wherever `face` is visible and
/// 0 elsewhere.
fn single_view(mesh: &LabeledMesh, cam: Camera, face: usize, label: usize) -> (Observations, ViewState) {
    let st = ViewState::new(mesh, std::slice::from_ref(&cam));
    let (w, h) = (cam.width, cam.height);
    let mut lik = vec![0.0; w * h * 4];
    for idx in 0..w * h {
        if st.rasters[0].face_at(idx) == Some(face) {
            lik[idx * 4 + label - 1] = 1.0;
        }
    }
    let obs = Observations::new(
        vec![cam],
        vec![ImageView::new(PixelGrid::filled(w, h, 1, 0.5)).unwrap()],
        vec![LikelihoodStack::new(PixelGrid::new(w, h, 4, lik).unwrap()).unwrap()],
    )
    .unwrap();
    (obs, st)
}

fn footprint(st: &ViewState, face: usize) -> usize {
    let r = &st.rasters[0];
    (0..r.width() * r.height())
        .filter(|&i| r.face_at(i) == Some(face))
        .count()
}

#[test]
fn face_cost_is_negative_log_of_pixel_sum() {
    let mesh = grid_plane(4, 4, 4.0, GROUND);
    let (obs, st) = single_view(&mesh, nadir(10.0, 64), 5, ROOF as usize);
    let n = footprint(&st, 5);
    assert!(n > 0);
    let cost = face_data_term(5, &mesh, &obs, &st);
    for (l, c) in cost.iter().enumerate() {
        let expected = if l + 1 == ROOF as usize {
            -(n as f64 + EPS).ln()
        } else {
            -EPS.ln()
        };
        assert!((c - expected).abs() < 1e-12, "label {}: {c} vs {expected}", l + 1);
    }
}

#[test]
fn invisible_face_is_data_neutral() {
    let mesh = grid_plane(4, 4, 4.0, GROUND);
    // a narrow view that only sees the middle of the plane
    let cam = Camera::look_at(
        Vec3::new(0.0, 0.0, 10.0),
        Vec3::zeros(),
        Vec3::new(0.0, 1.0, 0.0),
        400.0,
        32,
        32,
    )
    .unwrap();
    let (obs, st) = single_view(&mesh, cam, 5, ROOF as usize);
    let data = face_data_terms(&mesh, &obs, &st);
    assert!(data.invisible[0]);
    assert!(data.face(0).iter().all(|&c| c == -EPS.ln()));
}

#[test]
fn larger_footprint_lowers_the_cost() {
    let mesh = grid_plane(4, 4, 4.0, GROUND);
    let far = single_view(&mesh, nadir(12.0, 64), 5, ROOF as usize);
    let near = single_view(&mesh, nadir(8.0, 64), 5, ROOF as usize);
    assert!(footprint(&near.1, 5) > footprint(&far.1, 5));
    let r = ROOF as usize - 1;
    assert!(face_data_term(5, &mesh, &near.0, &near.1)[r] < face_data_term(5, &mesh, &far.0, &far.1)[r]);
}

#[test]
fn default_weights_are_stored() {
    let p = RelabelParams::default();
    assert_eq!((p.mu1, p.mu2), (0.35, 0.5));
    assert_eq!(p.bp, BpOptions::default());
}

fn sloped_scene() -> (LabeledMesh, Observations, ViewState) {
    let spec = SceneSpec {
        layout: Layout::PlaneBox,
        cameras: CameraRing {
            count: 4,
            width: 96,
            height_px: 96,
            ..SceneSpec::default().cameras
        },
        ..SceneSpec::default()
    };
    let s = make_scene(&spec).unwrap();
    let v = render_views(&s, &NoiseSpec::default()).unwrap();
    let obs = Observations::new(s.cameras.clone(), v.images, v.likelihoods).unwrap();
    let st = ViewState::new(&s.mesh, &obs.cameras);
    (s.mesh, obs, st)
}

#[test]
fn without_priors_the_map_is_the_per_face_argmin() {
    let (mesh, obs, st) = sloped_scene();
    let adj = build_adjacency(&mesh).unwrap();
    let params = RelabelParams {
        mu1: 0.0,
        mu2: 0.0,
        ..RelabelParams::default()
    };
    let data = face_data_terms(&mesh, &obs, &st);
    let problem = build_mrf(&mesh, &adj, &data, &params).unwrap();
    let bp = loopy_bp(&problem, &params.bp);
    for f in 0..mesh.num_faces() {
        let costs = data.face(f);
        let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
        // lowest label id among the minimizers
        let first = costs.iter().position(|&c| c == best).unwrap() + 1;
        assert_eq!(bp.assignment.labels[f] as usize, first, "face {f}");
    }
}

#[test]
fn strong_coupling_on_two_faces_never_disagrees() {
    let mesh = LabeledMesh::new(
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
        vec![1, 1],
    )
    .unwrap();
    let adj = build_adjacency(&mesh).unwrap();
    let costs = vec![0.3, 0.9, 0.1, 0.8, 0.6, 0.2, 0.5, 0.9];
    let data = semref::relabel::FaceDataTerms {
        num_labels: 4,
        costs: costs.clone(),
        invisible: vec![false; 2],
    };
    let params = RelabelParams {
        mu1: 0.0,
        mu2: 100.0,
        ..RelabelParams::default()
    };
    let problem = build_mrf(&mesh, &adj, &data, &params).unwrap();
    // enumerate all 16 assignments by hand
    let mut best = (f64::INFINITY, 0, 0);
    for a in 0..4 {
        for b in 0..4 {
            let e = costs[a] + costs[4 + b] + if a == b { 0.0 } else { 100.0 * (0.5 + 0.5) };
            if e < best.0 {
                best = (e, a, b);
            }
        }
    }
    assert_eq!(best.1, best.2);
    let bp = loopy_bp(&problem, &BpOptions::default());
    assert_eq!(bp.assignment.labels, vec![best.1 as u32 + 1, best.2 as u32 + 1]);
    assert!((bp.assignment.energy - best.0).abs() < 1e-9);
}

#[test]
fn bp_is_exact_on_a_tree() {
    // a star: node 0 joined to three leaves, each leaf with a tail
    let edges = vec![
        (0, 1, 0.4),
        (0, 2, 0.7),
        (0, 3, 0.2),
        (1, 4, 0.9),
        (2, 5, 0.3),
        (3, 6, 0.6),
    ];
    let unary: Vec<f64> = (0..7 * 4).map(|i| ((i * 37 + 11) % 17) as f64 / 17.0).collect();
    let p = MrfProblem::new(4, unary, edges).unwrap();
    let exact = brute_force_map(&p).unwrap();
    let bp = loopy_bp(&p, &BpOptions::default());
    assert!(bp.converged);
    assert!((bp.assignment.energy - exact.energy).abs() < 1e-9);
}

#[test]
fn large_coupling_gives_a_constant_labeling() {
    let edges: Vec<_> = (0..5).map(|i| (i, i + 1, 50.0)).chain([(0, 5, 50.0)]).collect();
    let unary = vec![
        0.1, 0.9, 0.5, 0.5, //
        0.8, 0.2, 0.5, 0.5, //
        0.7, 0.1, 0.5, 0.5, //
        0.9, 0.3, 0.5, 0.4, //
        0.2, 0.9, 0.5, 0.5, //
        0.6, 0.2, 0.5, 0.5,
    ];
    let sums: Vec<f64> = (0..4).map(|l| (0..6).map(|n| unary[n * 4 + l]).sum()).collect();
    let best = (0..4).min_by(|&a, &b| sums[a].total_cmp(&sums[b])).unwrap() as u32 + 1;
    let p = MrfProblem::new(4, unary, edges).unwrap();
    let bp = loopy_bp(&p, &BpOptions::default());
    assert_eq!(bp.assignment.labels, vec![best; 6]);
}

#[test]
fn optimal_labels_are_a_fixed_point() {
    let (mesh, obs, st) = sloped_scene();
    let adj = build_adjacency(&mesh).unwrap();
    let params = RelabelParams::default();
    let (once, _) = relabel(&mesh, &adj, &obs, &st, &params).unwrap();
    let (twice, report) = relabel(&once, &adj, &obs, &st, &params).unwrap();
    assert_eq!(twice.labels, once.labels);
    assert_eq!(report.changed_faces, 0);
    assert_eq!(twice.vertices, mesh.vertices);
}

fn area_agreement(a: &LabeledMesh, truth: &LabeledMesh) -> f64 {
    let area = |f| truth.normal_area(f).unwrap().1;
    let total: f64 = (0..truth.num_faces()).map(area).sum();
    let same: f64 = (0..truth.num_faces())
        .filter(|&f| a.labels[f] == truth.labels[f])
        .map(area)
        .sum();
    same / total
}

#[test]
fn corrupted_likelihoods_are_outvoted() {
    let spec = SceneSpec {
        cameras: CameraRing {
            width: 128,
            height_px: 128,
            ..SceneSpec::default().cameras
        },
        ..SceneSpec::default()
    };
    let s: Scene = make_scene(&spec).unwrap();
    let noise = NoiseSpec {
        likelihood_flip_rate: 0.2,
        label_scramble_rate: 0.15,
        seed: 9,
        ..NoiseSpec::default()
    };
    let v = render_views(&s, &noise).unwrap();
    let obs = Observations::new(s.cameras.clone(), v.images, v.likelihoods).unwrap();
    let scrambled = perturb_mesh(&s.mesh, &noise).unwrap();
    let adj = build_adjacency(&scrambled).unwrap();
    let st = ViewState::new(&scrambled, &obs.cameras);
    let (out, report) = relabel(&scrambled, &adj, &obs, &st, &RelabelParams::default()).unwrap();
    assert!(report.energy_after <= report.energy_before);
    let acc = area_agreement(&out, &s.mesh);
    assert!(acc >= 0.95, "{acc}");
    assert!(acc > area_agreement(&scrambled, &s.mesh));
}

#[test]
fn weakly_supported_roof_face_is_flipped_back() {
    let (mesh, mut obs, st) = sloped_scene();
    let adj = build_adjacency(&mesh).unwrap();
    let f = (0..mesh.num_faces()).find(|&f| mesh.labels[f] == ROOF).unwrap();
    // the face claims facade and its pixels carry no evidence
    let mut labels = mesh.labels.clone();
    labels[f] = FACADE;
    let wrong = mesh.with_labels(labels);
    for (raster, lik) in st.rasters.iter().zip(obs.likelihoods.iter_mut()) {
        let mut g = lik.clone().into_grid();
        for idx in 0..raster.width() * raster.height() {
            if raster.face_at(idx) == Some(f) {
                g.data_mut()[idx * 4..idx * 4 + 4].fill(0.25);
            }
        }
        *lik = LikelihoodStack::new(g).unwrap();
    }
    let (out, _) = relabel(&wrong, &adj, &obs, &st, &RelabelParams::default()).unwrap();
    assert_eq!(out.labels[f], ROOF);
}
