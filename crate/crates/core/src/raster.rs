//! Z-buffer rasterization of labeled meshes.

use nalgebra::Vector2;
use rayon::prelude::*;

use crate::camera::Camera;
use crate::mesh::{LabeledMesh, Vec3};

const NO_FACE: u32 = u32::MAX;

/// Per-pixel visibility record of one view: nearest depth, face id and
/// perspective-correct barycentric coordinates of the hit point.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterBuffers {
    width: usize,
    height: usize,
    depth: Vec<f64>,
    face: Vec<u32>,
    bary: Vec<[f64; 3]>,
}

impl RasterBuffers {
    fn empty(width: usize, height: usize) -> Self {
        let n = width * height;
        RasterBuffers {
            width,
            height,
            depth: vec![f64::INFINITY; n],
            face: vec![NO_FACE; n],
            bary: vec![[0.0; 3]; n],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Camera-frame depth, `+inf` for background.
    #[inline]
    pub fn depth(&self, x: usize, y: usize) -> f64 {
        self.depth[y * self.width + x]
    }

    #[inline]
    pub fn face(&self, x: usize, y: usize) -> Option<usize> {
        self.face_at(y * self.width + x)
    }

    #[inline]
    pub fn face_at(&self, idx: usize) -> Option<usize> {
        let f = self.face[idx];
        (f != NO_FACE).then_some(f as usize)
    }

    #[inline]
    pub fn depth_at(&self, idx: usize) -> f64 {
        self.depth[idx]
    }

    #[inline]
    pub fn barycentric(&self, x: usize, y: usize) -> [f64; 3] {
        self.bary[y * self.width + x]
    }

    #[inline]
    pub fn barycentric_at(&self, idx: usize) -> [f64; 3] {
        self.bary[idx]
    }

    /// Number of pixels covered by the mesh.
    pub fn coverage(&self) -> usize {
        self.face.iter().filter(|&&f| f != NO_FACE).count()
    }
}

/// Rasterizes all faces with nearest-depth visibility at pixel centers.
///
/// Faces are drawn in ascending id order with a strict depth test, so equal
/// depths keep the lower face id. Faces with a vertex at or behind the camera
/// plane are skipped.
pub fn rasterize(mesh: &LabeledMesh, cam: &Camera) -> RasterBuffers {
    let (w, h) = (cam.width, cam.height);
    let mut buf = RasterBuffers::empty(w, h);
    let cam_pts: Vec<Vec3> = mesh.vertices.iter().map(|p| cam.to_camera(p)).collect();
    let k = cam.k;
    for (f, tri) in mesh.faces.iter().enumerate() {
        let pc = [cam_pts[tri[0]], cam_pts[tri[1]], cam_pts[tri[2]]];
        if pc.iter().any(|p| p.z <= 1e-9) {
            continue;
        }
        let px: [Vector2<f64>; 3] = pc.map(|p| {
            let q = k * p;
            Vector2::new(q.x / q.z, q.y / q.z)
        });
        let area = edge(&px[0], &px[1], &px[2]);
        if area.abs() < 1e-12 || !area.is_finite() {
            continue;
        }
        let min_x = px.iter().map(|p| p.x).fold(f64::INFINITY, f64::min).ceil().max(0.0);
        let max_x = px
            .iter()
            .map(|p| p.x)
            .fold(f64::NEG_INFINITY, f64::max)
            .floor()
            .min(w as f64 - 1.0);
        let min_y = px.iter().map(|p| p.y).fold(f64::INFINITY, f64::min).ceil().max(0.0);
        let max_y = px
            .iter()
            .map(|p| p.y)
            .fold(f64::NEG_INFINITY, f64::max)
            .floor()
            .min(h as f64 - 1.0);
        if min_x > max_x || min_y > max_y {
            continue;
        }
        let inv_area = 1.0 / area;
        let inv_z = [1.0 / pc[0].z, 1.0 / pc[1].z, 1.0 / pc[2].z];
        for y in min_y as usize..=max_y as usize {
            for x in min_x as usize..=max_x as usize {
                let p = Vector2::new(x as f64, y as f64);
                let b0 = edge(&px[1], &px[2], &p) * inv_area;
                let b1 = edge(&px[2], &px[0], &p) * inv_area;
                let b2 = edge(&px[0], &px[1], &p) * inv_area;
                if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                    continue;
                }
                let s = [b0 * inv_z[0], b1 * inv_z[1], b2 * inv_z[2]];
                let sum = s[0] + s[1] + s[2];
                let z = 1.0 / sum;
                let idx = y * w + x;
                if z < buf.depth[idx] {
                    buf.depth[idx] = z;
                    buf.face[idx] = f as u32;
                    buf.bary[idx] = [s[0] * z, s[1] * z, s[2] * z];
                }
            }
        }
    }
    buf
}

/// Rasterizes every view independently.
pub fn rasterize_all(mesh: &LabeledMesh, cams: &[Camera]) -> Vec<RasterBuffers> {
    cams.par_iter().map(|c| rasterize(mesh, c)).collect()
}

#[inline]
fn edge(a: &Vector2<f64>, b: &Vector2<f64>, p: &Vector2<f64>) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Per-pixel class image: label of the visible face, 0 for background.
pub fn render_labels(mesh: &LabeledMesh, raster: &RasterBuffers) -> Vec<u32> {
    raster
        .face
        .iter()
        .map(|&f| if f == NO_FACE { 0 } else { mesh.labels[f as usize] })
        .collect()
}
