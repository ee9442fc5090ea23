//! Cross-view reprojection `I_j o P_j o P_i^-1` through the mesh surface.

use nalgebra::Vector2;

use crate::camera::Camera;
use crate::image::PixelGrid;
use crate::mesh::Vec3;
use crate::raster::RasterBuffers;

/// Pixel correspondences from view `i` into view `j` over the common
/// visibility domain.
#[derive(Debug, Clone)]
pub struct Correspondence {
    pub width: usize,
    pub height: usize,
    /// Pixel `x_i` is in the domain iff `mask[x_i]`.
    pub mask: Vec<bool>,
    /// Position of the surface point in view `j`, valid where `mask` is set.
    pub coords: Vec<[f64; 2]>,
    /// Surface point hit by the pixel ray of view `i`, valid where `mask` is set.
    pub points: Vec<Vec3>,
}

impl Correspondence {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Finds the pixels of view `i` whose surface point is visible in view `j`.
///
/// A surface point passes the occlusion test when its depth in view `j` does
/// not exceed the depth of the surface visible there by more than
/// `depth_tol` plus the depth spanned by two pixel footprints of view `j`.
/// The footprint term absorbs the interpolation error of the depth buffer
/// across creases.
pub fn correspond(
    cam_i: &Camera,
    cam_j: &Camera,
    raster_i: &RasterBuffers,
    raster_j: &RasterBuffers,
    depth_tol: f64,
) -> Correspondence {
    let (w, h) = (raster_i.width(), raster_i.height());
    let (wj, hj) = (raster_j.width(), raster_j.height());
    let n = w * h;
    let mut mask = vec![false; n];
    let mut coords = vec![[0.0; 2]; n];
    let mut points = vec![Vec3::zeros(); n];
    let focal_j = cam_j.k[(0, 0)].min(cam_j.k[(1, 1)]);
    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            if raster_i.face_at(idx).is_none() {
                continue;
            }
            let depth = raster_i.depth_at(idx);
            let p = cam_i.backproject(&Vector2::new(x as f64, y as f64), depth);
            let Some((uv, zj)) = cam_j.project_opt(&p) else {
                continue;
            };
            if !(uv.x >= 0.0 && uv.y >= 0.0 && uv.x <= (wj - 1) as f64 && uv.y <= (hj - 1) as f64) {
                continue;
            }
            if zj > surface_depth(raster_j, uv.x, uv.y) + depth_tol + 2.0 * zj / focal_j {
                continue;
            }
            mask[idx] = true;
            coords[idx] = [uv.x, uv.y];
            points[idx] = p;
        }
    }
    Correspondence {
        width: w,
        height: h,
        mask,
        coords,
        points,
    }
}

/// Depth of the visible surface at a continuous pixel position, from
/// bilinear interpolation of inverse depth (exact inside a planar face).
/// Background pixels contribute zero inverse depth, so they never occlude.
fn surface_depth(raster: &RasterBuffers, x: f64, y: f64) -> f64 {
    let (w, h) = (raster.width(), raster.height());
    let x0 = (x.floor() as usize).min(w.saturating_sub(2));
    let y0 = (y.floor() as usize).min(h.saturating_sub(2));
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let inv = |xx: usize, yy: usize| 1.0 / raster.depth(xx, yy);
    let s = (1.0 - fx) * (1.0 - fy) * inv(x0, y0)
        + fx * (1.0 - fy) * inv(x1, y0)
        + (1.0 - fx) * fy * inv(x0, y1)
        + fx * fy * inv(x1, y1);
    1.0 / s
}

/// Samples `grid_j` at the corresponding positions. Pixels outside the
/// domain are zero.
pub fn sample_through(grid_j: &PixelGrid, corr: &Correspondence) -> PixelGrid {
    let ch = grid_j.channels();
    let mut out = PixelGrid::filled(corr.width, corr.height, ch, 0.0);
    for y in 0..corr.height {
        for x in 0..corr.width {
            let idx = y * corr.width + x;
            if corr.mask[idx] {
                let [u, v] = corr.coords[idx];
                grid_j.sample_bilinear(u, v, out.pixel_mut(x, y));
            }
        }
    }
    out
}

/// Reprojection of view `j` into view `i`.
#[derive(Debug, Clone)]
pub struct Reprojection {
    pub values: PixelGrid,
    pub mask: Vec<bool>,
}

/// Warps `grid_j` (an image or likelihood stack of view `j`) into view `i`
/// through the surface seen by both rasters.
pub fn reproject(
    grid_j: &PixelGrid,
    cam_i: &Camera,
    cam_j: &Camera,
    raster_i: &RasterBuffers,
    raster_j: &RasterBuffers,
    depth_tol: f64,
) -> Reprojection {
    let corr = correspond(cam_i, cam_j, raster_i, raster_j, depth_tol);
    let values = sample_through(grid_j, &corr);
    Reprojection {
        values,
        mask: corr.mask,
    }
}
