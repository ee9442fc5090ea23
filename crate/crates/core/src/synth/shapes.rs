//! Parametric test meshes and a vertex-welding builder for composite scenes.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::mesh::{Label, LabeledMesh, Vec3};

/// Accumulates triangles while welding vertices that land on the same
/// lattice point.
#[derive(Debug, Default)]
pub struct MeshBuilder {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    labels: Vec<Label>,
    index: HashMap<[i64; 3], usize>,
}

impl MeshBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(&mut self, p: Vec3) -> usize {
        let key = [p.x, p.y, p.z].map(|c| (c * 1e6).round() as i64);
        *self.index.entry(key).or_insert_with(|| {
            self.vertices.push(p);
            self.vertices.len() - 1
        })
    }

    pub fn triangle(&mut self, a: Vec3, b: Vec3, c: Vec3, label: Label) {
        let tri = [self.vertex(a), self.vertex(b), self.vertex(c)];
        self.faces.push(tri);
        self.labels.push(label);
    }

    /// Quad grid spanned by `u` and `v` from `origin`, oriented along
    /// `u x v`. Cells for which `keep(i, j)` is false are skipped.
    #[allow(clippy::too_many_arguments)]
    pub fn grid(
        &mut self,
        origin: Vec3,
        u: Vec3,
        v: Vec3,
        nu: usize,
        nv: usize,
        label: Label,
        keep: impl Fn(usize, usize) -> bool,
    ) {
        let at = |i: usize, j: usize| origin + u * (i as f64 / nu as f64) + v * (j as f64 / nv as f64);
        for j in 0..nv {
            for i in 0..nu {
                if !keep(i, j) {
                    continue;
                }
                let (p00, p10, p01, p11) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
                // alternate diagonals to avoid a directional bias
                if (i + j) % 2 == 0 {
                    self.triangle(p00, p10, p11, label);
                    self.triangle(p00, p11, p01, label);
                } else {
                    self.triangle(p00, p10, p01, label);
                    self.triangle(p10, p11, p01, label);
                }
            }
        }
    }

    pub fn build(self) -> LabeledMesh {
        LabeledMesh::new(self.vertices, self.faces, self.labels).expect("builder produces valid meshes")
    }
}

/// Regular tetrahedron with outward faces, all labeled 1.
pub fn tetrahedron() -> LabeledMesh {
    let v = vec![
        Vec3::new(1.0, 1.0, 1.0),
        Vec3::new(1.0, -1.0, -1.0),
        Vec3::new(-1.0, 1.0, -1.0),
        Vec3::new(-1.0, -1.0, 1.0),
    ];
    let f = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    LabeledMesh::new(v, f, vec![1; 4]).unwrap()
}

/// `nx x ny` cell grid of side `size` centered at the origin in the `z = 0`
/// plane, normals along `+z`. Vertex `(i, j)` has index `j * (nx + 1) + i`.
pub fn grid_plane(nx: usize, ny: usize, size: f64, label: Label) -> LabeledMesh {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Vec3::new(
                size * (i as f64 / nx as f64 - 0.5),
                size * (j as f64 / ny as f64 - 0.5),
                0.0,
            ));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            if (i + j) % 2 == 0 {
                faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            } else {
                faces.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                faces.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
    }
    let n = faces.len();
    LabeledMesh::new(vertices, faces, vec![label; n]).unwrap()
}

/// Subdivided icosahedron projected onto a sphere of radius `r`.
pub fn icosphere(r: f64, subdivisions: usize) -> LabeledMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let n = faces.len();
    LabeledMesh::new(verts.into_iter().map(|v| v * r).collect(), faces, vec![1; n]).unwrap()
}

/// Open tube of radius `r` along `z` from 0 to `h`, outward normals.
pub fn cylinder(r: f64, h: f64, segments: usize, rings: usize) -> LabeledMesh {
    let mut vertices = Vec::with_capacity(segments * (rings + 1));
    for k in 0..=rings {
        let z = h * k as f64 / rings as f64;
        for s in 0..segments {
            let a = 2.0 * PI * s as f64 / segments as f64;
            vertices.push(Vec3::new(r * a.cos(), r * a.sin(), z));
        }
    }
    let id = |s: usize, k: usize| k * segments + s % segments;
    let mut faces = Vec::with_capacity(2 * segments * rings);
    for k in 0..rings {
        for s in 0..segments {
            faces.push([id(s, k), id(s + 1, k), id(s + 1, k + 1)]);
            faces.push([id(s, k), id(s + 1, k + 1), id(s, k + 1)]);
        }
    }
    let n = faces.len();
    LabeledMesh::new(vertices, faces, vec![1; n]).unwrap()
}
