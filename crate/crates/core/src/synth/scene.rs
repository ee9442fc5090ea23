//! Procedural ground-truth worlds and their rendered observations.

use std::f64::consts::PI;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::shapes::MeshBuilder;
use crate::camera::Camera;
use crate::classes::{FACADE, GROUND, NUM_CLASSES, ROOF, VEGETATION};
use crate::error::{Error, Result};
use crate::image::{ImageView, LikelihoodStack, PixelGrid};
use crate::mesh::{LabeledMesh, Vec3};
use crate::raster::{rasterize, render_labels, RasterBuffers};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Plane,
    PlaneBox,
    PlaneBoxBlob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureKind {
    Checker,
    ValueNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextureSpec {
    pub kind: TextureKind,
    /// Feature size in world units.
    pub scale: f64,
    #[serde(default = "default_octaves")]
    pub octaves: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_octaves() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRing {
    pub count: usize,
    /// Horizontal distance from the look-at point.
    pub radius: f64,
    /// Height above the look-at point.
    pub height: f64,
    pub look_at: [f64; 3],
    /// Horizontal field of view in degrees.
    pub fov_deg: f64,
    pub width: usize,
    pub height_px: usize,
    /// Azimuth of the first camera in degrees.
    #[serde(default)]
    pub azimuth0_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
}

/// Description of a synthetic world: ground plane with an optional
/// building and vegetation blob, a procedural texture and a camera ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    pub layout: Layout,
    /// Side length of the square ground plane centered at the origin.
    pub ground_size: f64,
    /// Mesh resolution; box dimensions and offsets must be multiples of it.
    pub cell_size: f64,
    /// Box footprint center in the ground plane.
    #[serde(default)]
    pub box_center: [f64; 2],
    /// Box extent along x, y and its height.
    pub box_size: [f64; 3],
    pub blob: BlobSpec,
    pub texture: TextureSpec,
    pub cameras: CameraRing,
    /// Direction towards the light.
    pub light: [f64; 3],
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            layout: Layout::PlaneBox,
            ground_size: 24.0,
            cell_size: 2.0,
            box_center: [0.0, 0.0],
            box_size: [8.0, 8.0, 2.0],
            blob: BlobSpec {
                center: [-7.0, 7.0],
                radius: 3.0,
                height: 2.0,
            },
            texture: TextureSpec {
                kind: TextureKind::ValueNoise,
                scale: 1.5,
                octaves: 2,
                seed: 7,
            },
            cameras: CameraRing {
                count: 8,
                radius: 20.0,
                height: 22.5,
                look_at: [0.0, 0.0, 0.0],
                fov_deg: 60.0,
                width: 256,
                height_px: 256,
                azimuth0_deg: 20.0,
            },
            light: [0.4, 0.3, 1.0],
        }
    }
}

/// Procedural albedo in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Texture(TextureSpec);

impl Texture {
    pub fn new(spec: TextureSpec) -> Self {
        Texture(spec)
    }

    pub fn albedo(&self, p: &Vec3) -> f64 {
        let s = self.0;
        match s.kind {
            TextureKind::Checker => {
                let k = (p / s.scale).map(f64::floor);
                if (k.x + k.y + k.z).rem_euclid(2.0) < 0.5 {
                    0.25
                } else {
                    0.75
                }
            }
            TextureKind::ValueNoise => {
                let (mut sum, mut amp, mut norm) = (0.0, 1.0, 0.0);
                for o in 0..s.octaves.max(1) {
                    let q = p * (2f64.powi(o as i32) / s.scale);
                    sum += amp * value_noise(&q, s.seed.wrapping_add(o as u64));
                    norm += amp;
                    amp *= 0.5;
                }
                0.1 + 0.8 * sum / norm
            }
        }
    }
}

fn hash(x: i64, y: i64, z: i64, seed: u64) -> f64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [x, y, z] {
        h ^= v as u64;
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Lattice value noise with quintic blending, in `[0, 1]`.
fn value_noise(p: &Vec3, seed: u64) -> f64 {
    let base = p.map(f64::floor);
    let f = p - base;
    let fade = |t: f64| t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
    let w = f.map(fade);
    let (bx, by, bz) = (base.x as i64, base.y as i64, base.z as i64);
    let mut acc = 0.0;
    for dz in 0..2 {
        for dy in 0..2 {
            for dx in 0..2 {
                let wt = (if dx == 1 { w.x } else { 1.0 - w.x })
                    * (if dy == 1 { w.y } else { 1.0 - w.y })
                    * (if dz == 1 { w.z } else { 1.0 - w.z });
                acc += wt * hash(bx + dx, by + dy, bz + dz, seed);
            }
        }
    }
    acc
}

/// Ground-truth world.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: LabeledMesh,
    pub texture: Texture,
    pub cameras: Vec<Camera>,
    /// Unit direction towards the light.
    pub light: Vec3,
    pub num_labels: usize,
}

fn is_multiple(x: f64, step: f64) -> bool {
    let r = x / step;
    (r - r.round()).abs() < 1e-9
}

/// Builds the labeled ground-truth mesh, texture and camera ring.
pub fn make_scene(spec: &SceneSpec) -> Result<Scene> {
    let (g, c) = (spec.ground_size, spec.cell_size);
    if !(g > 0.0 && c > 0.0 && g.is_finite() && c.is_finite()) {
        return Err(Error::Config("ground_size and cell_size must be positive".into()));
    }
    if !is_multiple(g, c) {
        return Err(Error::Config(format!(
            "ground_size {g} is not a multiple of cell_size {c}"
        )));
    }
    let n = (g / c).round() as usize;
    let with_box = spec.layout != Layout::Plane;
    let [bx, by, bh] = spec.box_size;
    let [cx, cy] = spec.box_center;
    let (x0, y0) = (cx - bx / 2.0, cy - by / 2.0);
    if with_box {
        if !(bx > 0.0 && by > 0.0 && bh > 0.0) {
            return Err(Error::Config("box_size entries must be positive".into()));
        }
        if ![bx, by, x0 + g / 2.0, y0 + g / 2.0].iter().all(|&v| is_multiple(v, c)) {
            return Err(Error::Config("box footprint must align with the ground cells".into()));
        }
        if x0 <= -g / 2.0 || y0 <= -g / 2.0 || x0 + bx >= g / 2.0 || y0 + by >= g / 2.0 {
            return Err(Error::Config("box must lie strictly inside the ground plane".into()));
        }
    }
    if spec.cameras.count < 2 {
        return Err(Error::Config("camera ring needs at least 2 cameras".into()));
    }
    if !spec.texture.scale.is_finite() || spec.texture.scale <= 0.0 {
        return Err(Error::Config("texture scale must be positive".into()));
    }

    let mut b = MeshBuilder::new();
    let (ci, cj) = (
        ((x0 + g / 2.0) / c).round() as usize,
        ((y0 + g / 2.0) / c).round() as usize,
    );
    let (ni, nj) = ((bx / c).round() as usize, (by / c).round() as usize);
    let inside = |i: usize, j: usize| with_box && i >= ci && i < ci + ni && j >= cj && j < cj + nj;
    b.grid(
        Vec3::new(-g / 2.0, -g / 2.0, 0.0),
        Vec3::x() * g,
        Vec3::y() * g,
        n,
        n,
        GROUND,
        |i, j| !inside(i, j),
    );
    if with_box {
        let nz = (bh / c).ceil().max(1.0) as usize;
        let up = Vec3::z() * bh;
        let (x1, y1) = (x0 + bx, y0 + by);
        let all = |_: usize, _: usize| true;
        b.grid(Vec3::new(x0, y0, 0.0), Vec3::x() * bx, up, ni, nz, FACADE, all);
        b.grid(Vec3::new(x1, y0, 0.0), Vec3::y() * by, up, nj, nz, FACADE, all);
        b.grid(Vec3::new(x1, y1, 0.0), -Vec3::x() * bx, up, ni, nz, FACADE, all);
        b.grid(Vec3::new(x0, y1, 0.0), -Vec3::y() * by, up, nj, nz, FACADE, all);
        b.grid(Vec3::new(x0, y0, bh), Vec3::x() * bx, Vec3::y() * by, ni, nj, ROOF, all);
    }
    let mut mesh = b.build();

    if spec.layout == Layout::PlaneBoxBlob {
        let BlobSpec { center, radius, height } = spec.blob;
        if !(radius > 0.0 && height > 0.0) {
            return Err(Error::Config("blob radius and height must be positive".into()));
        }
        let ctr = Vector2::new(center[0], center[1]);
        let dist = |p: &Vec3| (Vector2::new(p.x, p.y) - ctr).norm();
        for p in mesh.vertices.iter_mut() {
            let d = dist(p);
            if p.z == 0.0 && d < radius {
                p.z = height * 0.5 * (1.0 + (PI * d / radius).cos());
            }
        }
        for f in 0..mesh.num_faces() {
            let cs = mesh.corners(f);
            if mesh.labels[f] == GROUND && dist(&((cs[0] + cs[1] + cs[2]) / 3.0)) < radius {
                mesh.labels[f] = VEGETATION;
            }
        }
        mesh = LabeledMesh::new(mesh.vertices, mesh.faces, mesh.labels)?;
    }

    let ring = &spec.cameras;
    let target = Vec3::from(ring.look_at);
    let focal = ring.width as f64 / 2.0 / (ring.fov_deg.to_radians() / 2.0).tan();
    let cameras = (0..ring.count)
        .map(|k| {
            let a = ring.azimuth0_deg.to_radians() + 2.0 * PI * k as f64 / ring.count as f64;
            let eye = target + Vec3::new(ring.radius * a.cos(), ring.radius * a.sin(), ring.height);
            Camera::look_at(eye, target, Vec3::z(), focal, ring.width, ring.height_px)
        })
        .collect::<Result<Vec<_>>>()?;
    let light = Vec3::from(spec.light);
    if !light.norm().is_finite() || light.norm() <= 0.0 {
        return Err(Error::Config("light direction must be non-zero".into()));
    }
    Ok(Scene {
        mesh,
        texture: Texture(spec.texture),
        cameras,
        light: light.normalize(),
        num_labels: NUM_CLASSES,
    })
}

/// Rendering and likelihood-corruption settings, plus the geometric
/// perturbation applied to build an initial mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// Per-coordinate standard deviation of vertex displacement, as a
    /// fraction of the mesh diagonal.
    #[serde(default)]
    pub vertex_sigma: f64,
    /// Fraction of foreground pixels whose likelihood peak is moved to a
    /// random wrong class.
    #[serde(default)]
    pub likelihood_flip_rate: f64,
    /// Standard deviation of additive image noise in 8-bit gray levels.
    #[serde(default)]
    pub image_gaussian_sigma: f64,
    /// Fraction of faces given a random wrong label in the initial mesh.
    #[serde(default)]
    pub label_scramble_rate: f64,
    /// Likelihood of the peak class; the rest is spread evenly.
    #[serde(default = "default_softening")]
    pub likelihood_peak: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_softening() -> f64 {
    0.9
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            vertex_sigma: 0.0,
            likelihood_flip_rate: 0.0,
            image_gaussian_sigma: 0.0,
            label_scramble_rate: 0.0,
            likelihood_peak: default_softening(),
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("likelihood_flip_rate", self.likelihood_flip_rate)?;
        unit("label_scramble_rate", self.label_scramble_rate)?;
        unit("likelihood_peak", self.likelihood_peak)?;
        if !(self.vertex_sigma >= 0.0 && self.image_gaussian_sigma >= 0.0) {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        Ok(())
    }

    /// Independent generator for one purpose (`stream`) under this seed.
    pub(crate) fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

pub(crate) const STREAM_IMAGE: u64 = 1 << 20;
pub(crate) const STREAM_LIKELIHOOD: u64 = 2 << 20;

/// Images, likelihood maps and ground-truth class images of every view.
#[derive(Debug, Clone)]
pub struct RenderedViews {
    pub images: Vec<ImageView>,
    pub likelihoods: Vec<LikelihoodStack>,
    /// Per-pixel ground-truth labels, 0 for background.
    pub classes: Vec<Vec<u32>>,
    /// Pixels whose likelihood peak was moved to a wrong class, per view.
    pub flipped: Vec<usize>,
}

/// Gray value of a background pixel.
const BACKGROUND: f64 = 0.5;
const AMBIENT: f64 = 0.35;

/// Renders flat-shaded textured images and softened one-hot likelihoods.
pub fn render_views(scene: &Scene, noise: &NoiseSpec) -> Result<RenderedViews> {
    noise.validate()?;
    let nl = scene.num_labels;
    let views: Vec<(ImageView, LikelihoodStack, Vec<u32>, usize)> = scene
        .cameras
        .par_iter()
        .enumerate()
        .map(|(v, cam)| {
            let raster = rasterize(&scene.mesh, cam);
            let classes = render_labels(&scene.mesh, &raster);
            let image = shade(scene, &raster, noise, v as u64)?;
            let (lik, flipped) = likelihoods(&classes, cam, nl, noise, v as u64)?;
            Ok((image, lik, classes, flipped))
        })
        .collect::<Result<_>>()?;
    let mut out = RenderedViews {
        images: Vec::new(),
        likelihoods: Vec::new(),
        classes: Vec::new(),
        flipped: Vec::new(),
    };
    for (i, l, c, f) in views {
        out.images.push(i);
        out.likelihoods.push(l);
        out.classes.push(c);
        out.flipped.push(f);
    }
    Ok(out)
}

fn shade(scene: &Scene, raster: &RasterBuffers, noise: &NoiseSpec, view: u64) -> Result<ImageView> {
    let (w, h) = (raster.width(), raster.height());
    let normals: Vec<Vec3> = (0..scene.mesh.num_faces())
        .map(|f| scene.mesh.normal_area(f).map_or(Vec3::z(), |(n, _)| n))
        .collect();
    let mut rng = noise.rng(STREAM_IMAGE + view);
    let gauss = Normal::new(0.0, noise.image_gaussian_sigma / 255.0).map_err(|e| Error::Config(e.to_string()))?;
    let mut data = vec![BACKGROUND; w * h];
    for (idx, px) in data.iter_mut().enumerate() {
        if let Some(f) = raster.face_at(idx) {
            let [a, b, c] = scene.mesh.corners(f);
            let bc = raster.barycentric_at(idx);
            let p = a * bc[0] + b * bc[1] + c * bc[2];
            let lambert = normals[f].dot(&scene.light).max(0.0);
            *px = scene.texture.albedo(&p) * (AMBIENT + (1.0 - AMBIENT) * lambert);
        }
        if noise.image_gaussian_sigma > 0.0 {
            *px = (*px + gauss.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    ImageView::new(PixelGrid::new(w, h, 1, data)?)
}

fn likelihoods(
    classes: &[u32],
    cam: &Camera,
    nl: usize,
    noise: &NoiseSpec,
    view: u64,
) -> Result<(LikelihoodStack, usize)> {
    let mut rng = noise.rng(STREAM_LIKELIHOOD + view);
    let peak = noise.likelihood_peak;
    let rest = if nl > 1 { (1.0 - peak) / (nl - 1) as f64 } else { 0.0 };
    let mut data = vec![1.0 / nl as f64; classes.len() * nl];
    let mut flipped = 0;
    for (idx, &c) in classes.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let mut class = c as usize - 1;
        if nl > 1 && rng.random::<f64>() < noise.likelihood_flip_rate {
            let k = rng.random_range(0..nl - 1);
            class = if k >= class { k + 1 } else { k };
            flipped += 1;
        }
        let px = &mut data[idx * nl..(idx + 1) * nl];
        px.fill(rest);
        px[class] = if nl > 1 { peak } else { 1.0 };
    }
    Ok((
        LikelihoodStack::new(PixelGrid::new(cam.width, cam.height, nl, data)?)?,
        flipped,
    ))
}
