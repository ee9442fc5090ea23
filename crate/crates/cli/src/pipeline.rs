//! End-to-end driver: alternating geometric descent and relabeling, run
//! evaluation, and synthetic dataset generation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::io::{
    ensure_dir, load_mesh, save_camera, save_image, save_json, save_likelihoods, save_mesh, save_text, Dataset,
    DatasetManifest,
};
use semref::camera::Camera;
use semref::energy::{
    frozen_vertices, refine, total_energy, EnergyBreakdown, Formulation, Observations, StopReason, ViewState,
};
use semref::error::{Error, Result};
use semref::mesh::{build_adjacency, LabeledMesh};
use semref::raster::{rasterize, render_labels};
use semref::relabel::{relabel, RelabelReport};
use semref::synth::{
    geometric_error, label_accuracy, make_scene, perturb_mesh, render_views, EvalReport, NoiseSpec, SceneSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Geometry,
    Relabel,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Geometry => "geometry",
            Phase::Relabel => "relabel",
        }
    }
}

/// Energy after one event of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: usize,
    /// Accepted geometric step within the round; 0 for init and relabel rows.
    pub step: usize,
    pub phase: Phase,
    pub energy: EnergyBreakdown,
    /// MRF energy before and after a relabeling pass.
    pub mrf_before: Option<f64>,
    pub mrf_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub geometry_steps: usize,
    pub stop: StopReason,
    pub relabel: Option<RelabelReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub rounds: Vec<RoundReport>,
    pub initial_energy: EnergyBreakdown,
    pub final_energy: EnergyBreakdown,
    /// Present when the dataset carries a ground truth.
    pub initial_evaluation: Option<EvalReport>,
    pub evaluation: Option<EvalReport>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub mesh: LabeledMesh,
    pub trace: Vec<TraceRow>,
    pub report: RunReport,
}

/// Alternates `geo_iters_per_outer` descent steps with one relabeling pass,
/// `max_outer_iters` times. Relabeling runs only for the semantic
/// formulation with likelihood maps.
pub fn run_pipeline(data: &Dataset, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let adj = build_adjacency(&data.mesh).map_err(|e| e.in_stage("mesh"))?;
    let obs = Observations::new(data.cameras.clone(), data.images.clone(), data.likelihoods.clone())
        .map_err(|e| e.in_stage("observations"))?;
    let nl = obs.num_labels();
    if nl > 0 && data.mesh.max_label() as usize > nl {
        return Err(Error::Config(format!(
            "mesh uses label {} but the likelihood maps have {nl} classes",
            data.mesh.max_label()
        ))
        .in_stage("observations"));
    }
    let relabeling = cfg.formulation == Formulation::Semantic && nl > 0;
    if cfg.formulation == Formulation::Semantic && nl == 0 {
        warn!("no likelihood maps; the semantic term and relabeling are disabled");
    }
    let weights = cfg.energy_weights();
    let schedule = cfg.schedule();
    let params = cfg.relabel_params();

    let mut mesh = data.mesh.clone();
    let state = ViewState::new(&mesh, &obs.cameras);
    let initial_energy = total_energy(&mesh, &adj, &obs, &state, &weights, cfg.formulation);
    let mut trace = vec![TraceRow {
        round: 0,
        step: 0,
        phase: Phase::Init,
        energy: initial_energy,
        mrf_before: None,
        mrf_after: None,
    }];
    let mut rounds = Vec::new();
    let mut energy = initial_energy;
    for round in 0..cfg.max_outer_iters {
        let frozen = frozen_vertices(&mesh, &adj, &cfg.frozen_labels);
        let r = refine(&mesh, &adj, &obs, &weights, cfg.formulation, &schedule, &frozen)
            .map_err(|e| e.in_stage("geometry"))?;
        for (k, e) in r.trace.iter().enumerate().skip(1) {
            trace.push(TraceRow {
                round,
                step: k,
                phase: Phase::Geometry,
                energy: *e,
                mrf_before: None,
                mrf_after: None,
            });
        }
        let geometry_steps = r.trace.len() - 1;
        energy = *r.trace.last().expect("trace holds the initial energy");
        mesh = r.mesh;
        let mut report = None;
        if relabeling {
            let state = ViewState::new(&mesh, &obs.cameras);
            let (m, rep) = relabel(&mesh, &adj, &obs, &state, &params).map_err(|e| e.in_stage("relabel"))?;
            mesh = m;
            energy = total_energy(&mesh, &adj, &obs, &state, &weights, cfg.formulation);
            trace.push(TraceRow {
                round,
                step: 0,
                phase: Phase::Relabel,
                energy,
                mrf_before: Some(rep.energy_before),
                mrf_after: Some(rep.energy_after),
            });
            report = Some(rep);
        }
        info!(
            "round {round}: {geometry_steps} steps ({:?}), energy {:.6e}, relabeled {} faces",
            r.stop,
            energy.e_total,
            report.as_ref().map_or(0, |r| r.changed_faces)
        );
        let idle = geometry_steps == 0 && report.as_ref().is_none_or(|r| r.changed_faces == 0);
        rounds.push(RoundReport {
            round,
            geometry_steps,
            stop: r.stop,
            relabel: report,
        });
        if idle {
            info!("nothing changed in round {round}; stopping");
            break;
        }
    }

    let (initial_evaluation, evaluation) = match &data.truth {
        Some(truth) => {
            let ev = |m: &LabeledMesh| evaluate(m, truth, &data.cameras, cfg.eval_samples, cfg.seed);
            (
                Some(ev(&data.mesh).map_err(|e| e.in_stage("evaluation"))?),
                Some(ev(&mesh).map_err(|e| e.in_stage("evaluation"))?),
            )
        }
        None => (None, None),
    };
    Ok(PipelineOutput {
        mesh,
        trace,
        report: RunReport {
            seed: cfg.seed,
            rounds,
            initial_energy,
            final_energy: energy,
            initial_evaluation,
            evaluation,
        },
    })
}

/// Rendered-label accuracy over the views plus sampled surface distance.
pub fn evaluate(
    pred: &LabeledMesh,
    truth: &LabeledMesh,
    cameras: &[Camera],
    samples: usize,
    seed: u64,
) -> Result<EvalReport> {
    let nl = pred.max_label().max(truth.max_label()) as usize;
    let mut p = Vec::new();
    let mut t = Vec::new();
    for cam in cameras {
        p.extend(render_labels(pred, &rasterize(pred, cam)));
        t.extend(render_labels(truth, &rasterize(truth, cam)));
    }
    let acc = label_accuracy(&p, &t, nl)?;
    let geo = geometric_error(pred, truth, samples, seed)?;
    Ok(EvalReport {
        overall_accuracy: acc.overall,
        average_accuracy: acc.average,
        per_class_accuracy: acc.per_class,
        mean_geometric_error: geo.mean,
        max_geometric_error: geo.max,
    })
}

/// Trace as CSV, one row per event.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut s = String::from("round,step,phase,e_photo,e_sem,e_intra,e_inter,e_total,mrf_before,mrf_after\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.17e}"));
    for r in trace {
        let e = &r.energy;
        let _ = writeln!(
            s,
            "{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{}",
            r.round,
            r.step,
            r.phase.name(),
            e.e_photo,
            e.e_sem,
            e.e_intra,
            e.e_inter,
            e.e_total,
            opt(r.mrf_before),
            opt(r.mrf_after)
        );
    }
    s
}

/// Writes `mesh.obj`, `mesh.labels`, `trace.csv`, `report.json` and
/// `config.json` into `dir`.
pub fn write_run(out: &PipelineOutput, cfg: &PipelineConfig, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    save_mesh(&out.mesh, &dir.join("mesh.obj"))?;
    save_text(&trace_csv(&out.trace), &dir.join("trace.csv"))?;
    save_json(&out.report, &dir.join("report.json"))?;
    save_json(cfg, &dir.join("config.json"))
}

/// Input of the dataset generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct GenSpec {
    pub scene: SceneSpec,
    pub noise: NoiseSpec,
}

/// Renders a synthetic scene and writes a complete dataset into `dir`: the
/// perturbed initial mesh, cameras, 8-bit images, likelihood maps and the
/// ground truth, tied together by `manifest.json`.
pub fn generate_dataset(spec: &GenSpec, dir: &Path) -> Result<DatasetManifest> {
    let scene = make_scene(&spec.scene)?;
    let views = render_views(&scene, &spec.noise)?;
    let init = perturb_mesh(&scene.mesh, &spec.noise)?;
    ensure_dir(dir)?;
    save_mesh(&scene.mesh, &dir.join("truth.obj"))?;
    save_mesh(&init, &dir.join("init.obj"))?;
    let mut manifest = DatasetManifest {
        mesh: "init.obj".into(),
        labels: Some("init.labels".into()),
        cameras: Vec::new(),
        images: Vec::new(),
        likelihoods: Vec::new(),
        truth_mesh: Some("truth.obj".into()),
        truth_labels: Some("truth.labels".into()),
    };
    for (v, cam) in scene.cameras.iter().enumerate() {
        let name = |stem: &str, ext: &str| PathBuf::from(format!("{stem}_{v:02}.{ext}"));
        let (c, i, l) = (name("cam", "txt"), name("img", "pgm"), name("lik", "semf"));
        save_camera(cam, &dir.join(&c))?;
        save_image(&views.images[v], &dir.join(&i))?;
        save_likelihoods(&views.likelihoods[v], &dir.join(&l))?;
        manifest.cameras.push(c);
        manifest.images.push(i);
        manifest.likelihoods.push(l);
    }
    manifest.save(&dir.join("manifest.json"))?;
    save_json(spec, &dir.join("gen.json"))?;
    Ok(manifest)
}

/// Resolves a manifest argument given as a file or as a directory holding
/// `manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("manifest.json")
    } else {
        path.to_path_buf()
    }
}

fn parent(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

/// Evaluates a predicted mesh against the ground truth of a dataset.
///
/// `pred` is a mesh file, a run directory holding `mesh.obj`, or a dataset
/// (whose input mesh is then evaluated). `truth` is a dataset manifest or its
/// directory; it must name a ground-truth mesh.
pub fn evaluate_paths(pred: &Path, truth: &Path, samples: usize, seed: u64) -> Result<EvalReport> {
    let truth_manifest = manifest_path(truth);
    let m = DatasetManifest::load(&truth_manifest)?;
    let base = parent(&truth_manifest);
    let Some(truth_mesh) = &m.truth_mesh else {
        return Err(Error::Config(format!(
            "{} does not name a ground-truth mesh",
            truth_manifest.display()
        )));
    };
    let truth = load_mesh(
        &base.join(truth_mesh),
        m.truth_labels.as_ref().map(|p| base.join(p)).as_deref(),
    )?;
    let cameras = m
        .cameras
        .iter()
        .map(|p| crate::io::load_camera(&base.join(p)))
        .collect::<Result<Vec<_>>>()?;
    let pred_mesh = if pred.is_dir() {
        let run_mesh = pred.join("mesh.obj");
        if run_mesh.exists() {
            load_mesh(&run_mesh, None)?
        } else {
            let pm_path = pred.join("manifest.json");
            let pm = DatasetManifest::load(&pm_path)?;
            let pb = parent(&pm_path);
            load_mesh(&pb.join(&pm.mesh), pm.labels.as_ref().map(|p| pb.join(p)).as_deref())?
        }
    } else {
        load_mesh(pred, None)?
    };
    if pred_mesh.num_faces() == 0 {
        return Err(Error::InvalidMesh("predicted mesh has no faces".into()));
    }
    evaluate(&pred_mesh, &truth, &cameras, samples, seed)
}
