use semref::camera::Camera;
use semref::energy::{
    baseline_smooth_energy, frozen_vertices, photo_energy, photo_gradient, refine, semantic_energy, semantic_gradient,
    total_energy, EnergyWeights, Formulation, Observations, Schedule, ViewState,
};
use semref::image::{ImageView, LikelihoodStack, PixelGrid};
use semref::mesh::{build_adjacency, LabeledMesh, Vec3};
use semref::reproject::correspond;
use semref::synth::shapes::grid_plane;
use semref::synth::{
    make_scene, perturb_mesh, render_views, CameraRing, Layout, NoiseSpec, Scene, SceneSpec, Texture, TextureKind,
    TextureSpec,
};

fn scene(layout: Layout, count: usize, px: usize) -> Scene {
    let spec = SceneSpec {
        layout,
        cameras: CameraRing {
            count,
            width: px,
            height_px: px,
            ..SceneSpec::default().cameras
        },
        ..SceneSpec::default()
    };
    make_scene(&spec).unwrap()
}

fn observe(scene: &Scene, noise: &NoiseSpec) -> Observations {
    let v = render_views(scene, noise).unwrap();
    Observations::new(scene.cameras.clone(), v.images, v.likelihoods).unwrap()
}

fn scaled(mesh: &LabeledMesh, f: impl Fn(&Vec3) -> Vec3) -> LabeledMesh {
    mesh.with_vertices(mesh.vertices.iter().map(f).collect())
}

/// Two nadir cameras whose views of the z = 0 plane differ by a shift of
/// exactly 10 pixels. The left half of the plane is class 1, the right half
/// class 2.
fn shifted_pair() -> Scene {
    let up = Vec3::new(0.0, 1.0, 0.0);
    let cams = [0.0, 2.0]
        .iter()
        .map(|&x| Camera::look_at(Vec3::new(x, 0.0, 20.0), Vec3::new(x, 0.0, 0.0), up, 100.0, 96, 96).unwrap())
        .collect();
    let plane = grid_plane(8, 8, 12.0, 1);
    let labels = (0..plane.num_faces())
        .map(|f| {
            if plane.corners(f).iter().all(|p| p.x <= 0.0) {
                1
            } else {
                2
            }
        })
        .collect();
    Scene {
        mesh: plane.with_labels(labels),
        texture: Texture::new(TextureSpec {
            kind: TextureKind::ValueNoise,
            scale: 1.0,
            octaves: 2,
            seed: 3,
        }),
        cameras: cams,
        light: Vec3::new(0.0, 0.0, 1.0),
        num_labels: 4,
    }
}

#[test]
fn photo_energy_is_small_at_the_truth_and_grows_with_noise() {
    let s = scene(Layout::PlaneBox, 4, 256);
    let obs = observe(&s, &NoiseSpec::default());
    let at = |m: &LabeledMesh| {
        let st = ViewState::new(m, &obs.cameras);
        photo_energy(m, &obs, &st, 7)
    };
    let truth = at(&s.mesh);
    assert!(truth.pixels > 0);
    assert!(
        truth.value / truth.pixels as f64 <= 1e-2,
        "{}",
        truth.value / truth.pixels as f64
    );
    let noisy = perturb_mesh(
        &s.mesh,
        &NoiseSpec {
            vertex_sigma: 0.02,
            seed: 2,
            ..NoiseSpec::default()
        },
    )
    .unwrap();
    assert!(at(&noisy).value > truth.value);
}

#[test]
fn single_view_has_no_pairs() {
    let mut s = shifted_pair();
    s.cameras.truncate(1);
    let obs = observe(&s, &NoiseSpec::default());
    let st = ViewState::new(&s.mesh, &obs.cameras);
    let e = photo_energy(&s.mesh, &obs, &st, 7);
    assert_eq!(e.value, 0.0);
    assert!(e.no_overlap);
    assert_eq!(semantic_energy(&s.mesh, &obs, &st).value, 0.0);
}

#[test]
fn photo_gradient_vanishes_at_a_photo_consistent_plane() {
    let s = shifted_pair();
    let obs = observe(&s, &NoiseSpec::default());
    let adj = build_adjacency(&s.mesh).unwrap();
    let frozen = frozen_vertices(&s.mesh, &adj, &[]);
    let grad = |m: &LabeledMesh| {
        let st = ViewState::new(m, &obs.cameras);
        photo_gradient(m, &obs, &st, 7, &frozen)
    };
    let at_truth = grad(&s.mesh).max_norm();
    let lifted = scaled(&s.mesh, |p| p + Vec3::new(0.0, 0.0, 0.01 * s.mesh.diagonal()));
    let displaced = grad(&lifted);
    assert!(displaced.max_norm() > 0.0);
    assert!(
        at_truth <= 1e-6 * displaced.max_norm(),
        "{at_truth} vs {}",
        displaced.max_norm()
    );
    for (v, g) in displaced.0.iter().enumerate() {
        if frozen[v] {
            assert_eq!(*g, Vec3::zeros());
        }
    }
}

#[test]
fn consistent_likelihoods_give_zero_semantic_energy_and_gradient() {
    let s = shifted_pair();
    let obs = observe(&s, &NoiseSpec::default());
    let st = ViewState::new(&s.mesh, &obs.cameras);
    let e = semantic_energy(&s.mesh, &obs, &st);
    assert!(e.pixels > 0);
    assert!(e.value <= 1e-20, "{}", e.value);
    let adj = build_adjacency(&s.mesh).unwrap();
    let g = semantic_gradient(&s.mesh, &obs, &st, &frozen_vertices(&s.mesh, &adj, &[]));
    assert!(g.max_norm() <= 1e-9, "{}", g.max_norm());
}

#[test]
fn single_constant_class_gives_zero_semantic_energy() {
    let s = scene(Layout::Plane, 3, 48);
    let mut obs = observe(&s, &NoiseSpec::default());
    obs.likelihoods = obs
        .cameras
        .iter()
        .map(|c| LikelihoodStack::new(PixelGrid::filled(c.width, c.height, 1, 1.0)).unwrap())
        .collect();
    let st = ViewState::new(&s.mesh, &obs.cameras);
    // bilinear weights sum to one up to rounding
    assert!(semantic_energy(&s.mesh, &obs, &st).value <= 1e-25);
}

#[test]
fn swapped_classes_cost_the_constructed_residual() {
    let s = scene(Layout::Plane, 2, 64);
    let mut obs = observe(&s, &NoiseSpec::default());
    let (peak, other) = (0.9, 0.1 / 3.0);
    let map = |first: usize| {
        let mut px = [other; 4];
        px[first] = peak;
        LikelihoodStack::new(PixelGrid::new(64, 64, 4, px.repeat(64 * 64)).unwrap()).unwrap()
    };
    // view 1 claims class 2 where view 0 sees class 1
    obs.likelihoods = vec![map(0), map(1)];
    let st = ViewState::new(&s.mesh, &obs.cameras);
    let e = semantic_energy(&s.mesh, &obs, &st);

    let overlap: usize = [(0, 1), (1, 0)]
        .iter()
        .map(|&(i, j)| {
            correspond(
                &obs.cameras[i],
                &obs.cameras[j],
                &st.rasters[i],
                &st.rasters[j],
                st.depth_tol,
            )
            .count()
        })
        .sum();
    // two channels differ by the same amount on every overlap pixel
    let expected = overlap as f64 * 2.0 * 0.5 * (peak - other).powi(2);
    assert!(e.value > 0.0);
    assert!(
        (e.value - expected).abs() <= 1e-9 * expected,
        "{} vs {expected}",
        e.value
    );
}

#[test]
fn halving_likelihoods_quarters_the_semantic_gradient() {
    let s = scene(Layout::PlaneBox, 3, 64);
    let noise = NoiseSpec {
        vertex_sigma: 0.01,
        likelihood_flip_rate: 0.2,
        seed: 5,
        ..NoiseSpec::default()
    };
    let obs = observe(&s, &noise);
    let mesh = perturb_mesh(&s.mesh, &noise).unwrap();
    let adj = build_adjacency(&mesh).unwrap();
    let frozen = frozen_vertices(&mesh, &adj, &[]);
    let st = ViewState::new(&mesh, &obs.cameras);
    let full = semantic_gradient(&mesh, &obs, &st, &frozen);
    let mut half = obs.clone();
    half.likelihoods = obs.likelihoods.iter().map(|l| l.scaled(0.5).unwrap()).collect();
    let quarter = semantic_gradient(&mesh, &half, &st, &frozen);
    assert!(full.max_norm() > 0.0);
    for (a, b) in full.0.iter().zip(&quarter.0) {
        assert!((a * 0.25 - b).norm() <= 1e-12 * full.max_norm());
    }
}

#[test]
fn total_energy_combines_the_terms() {
    let s = scene(Layout::PlaneBox, 3, 64);
    let noise = NoiseSpec {
        vertex_sigma: 0.01,
        seed: 1,
        ..NoiseSpec::default()
    };
    let obs = observe(&s, &noise);
    let mesh = perturb_mesh(&s.mesh, &noise).unwrap();
    let adj = build_adjacency(&mesh).unwrap();
    let st = ViewState::new(&mesh, &obs.cameras);

    let w = EnergyWeights {
        lambda1: 0.7,
        lambda2: 3.0,
        lambda3: 0.2,
        ..EnergyWeights::default()
    };
    let e = total_energy(&mesh, &adj, &obs, &st, &w, Formulation::Semantic);
    let sum = e.e_photo + w.lambda1 * e.e_sem + w.lambda2 * e.e_intra + w.lambda3 * e.e_inter;
    assert!((e.e_total - sum).abs() <= 1e-9 * sum.abs());
    assert!(e.e_intra > 0.0 && e.e_inter >= 0.0);

    let zero = EnergyWeights {
        lambda1: 0.0,
        lambda2: 0.0,
        lambda3: 0.0,
        ..EnergyWeights::default()
    };
    let e0 = total_energy(&mesh, &adj, &obs, &st, &zero, Formulation::Semantic);
    assert_eq!(e0.e_total, e0.e_photo);
    assert_eq!(e0.e_photo, e.e_photo);

    let one = mesh.with_labels(vec![1; mesh.num_faces()]);
    let w2 = EnergyWeights {
        lambda1: 0.0,
        lambda2: 5.0,
        lambda3: 0.0,
        ..EnergyWeights::default()
    };
    let e1 = total_energy(&one, &adj, &obs, &st, &w2, Formulation::Semantic);
    let expected = e1.e_photo + 5.0 * baseline_smooth_energy(&one, &adj);
    assert_eq!(e1.e_sem, 0.0);
    assert_eq!(e1.e_inter, 0.0);
    assert!((e1.e_total - expected).abs() <= 1e-12 * expected);
}

#[test]
fn blank_images_on_a_flat_plane_leave_only_neutral_photo_cost() {
    let s = scene(Layout::Plane, 3, 48);
    let obs = Observations::new(
        s.cameras.clone(),
        s.cameras
            .iter()
            .map(|c| ImageView::new(PixelGrid::filled(c.width, c.height, 1, 0.0)).unwrap())
            .collect(),
        s.cameras
            .iter()
            .map(|c| LikelihoodStack::new(PixelGrid::filled(c.width, c.height, 4, 0.0)).unwrap())
            .collect(),
    )
    .unwrap();
    let adj = build_adjacency(&s.mesh).unwrap();
    let st = ViewState::new(&s.mesh, &obs.cameras);
    let e = total_energy(
        &s.mesh,
        &adj,
        &obs,
        &st,
        &EnergyWeights::default(),
        Formulation::Semantic,
    );
    assert_eq!((e.e_sem, e.e_intra, e.e_inter), (0.0, 0.0, 0.0));
    // every window is textureless and costs exactly 1
    let photo = photo_energy(&s.mesh, &obs, &st, 7);
    assert!(photo.uninformative > 0);
    assert_eq!(e.e_photo, photo.uninformative as f64);
    assert_eq!(e.e_total, e.e_photo);
}

#[test]
fn zero_iterations_return_the_input() {
    let s = scene(Layout::Plane, 2, 48);
    let obs = observe(&s, &NoiseSpec::default());
    let adj = build_adjacency(&s.mesh).unwrap();
    let frozen = frozen_vertices(&s.mesh, &adj, &[]);
    let sched = Schedule {
        max_iters: 0,
        ..Schedule::default()
    };
    let r = refine(
        &s.mesh,
        &adj,
        &obs,
        &EnergyWeights::default(),
        Formulation::Semantic,
        &sched,
        &frozen,
    )
    .unwrap();
    assert_eq!(r.mesh, s.mesh);
    assert_eq!(r.trace.len(), 1);
}

#[test]
fn optimal_scene_stays_put() {
    let s = shifted_pair();
    let obs = observe(&s, &NoiseSpec::default());
    let adj = build_adjacency(&s.mesh).unwrap();
    let frozen = frozen_vertices(&s.mesh, &adj, &[]);
    let sched = Schedule {
        step_size: 5e-5,
        max_iters: 10,
        ..Schedule::default()
    };
    let r = refine(
        &s.mesh,
        &adj,
        &obs,
        &EnergyWeights::default(),
        Formulation::Semantic,
        &sched,
        &frozen,
    )
    .unwrap();
    let moved = s
        .mesh
        .vertices
        .iter()
        .zip(&r.mesh.vertices)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(moved < 1e-4 * s.mesh.diagonal(), "{moved}");
}

#[test]
fn descent_recovers_a_perturbed_plane() {
    let mut spec = SceneSpec {
        layout: Layout::Plane,
        ..SceneSpec::default()
    };
    spec.cameras.width = 128;
    spec.cameras.height_px = 128;
    let s = make_scene(&spec).unwrap();
    let obs = observe(&s, &NoiseSpec::default());
    let noisy = perturb_mesh(
        &s.mesh,
        &NoiseSpec {
            vertex_sigma: 0.02,
            seed: 8,
            ..NoiseSpec::default()
        },
    )
    .unwrap();
    let adj = build_adjacency(&noisy).unwrap();
    let frozen = frozen_vertices(&noisy, &adj, &[]);
    let weights = EnergyWeights {
        lambda1: 0.0,
        lambda2: 750.0,
        lambda3: 0.0,
        ..EnergyWeights::default()
    };
    let sched = Schedule {
        step_size: 5e-5,
        max_iters: 200,
        ..Schedule::default()
    };
    let r = refine(&noisy, &adj, &obs, &weights, Formulation::Semantic, &sched, &frozen).unwrap();
    // distance of the vertices to the z = 0 plane
    let err = |m: &LabeledMesh| m.vertices.iter().map(|p| p.z.abs()).sum::<f64>() / m.num_vertices() as f64;
    let (before, after) = (err(&noisy), err(&r.mesh));
    assert!(after <= 0.25 * before, "{before} -> {after}");
    assert!(r.trace.windows(2).all(|w| w[1].e_total <= w[0].e_total));
}
