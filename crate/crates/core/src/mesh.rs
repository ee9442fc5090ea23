//! Labeled triangle meshes, one-ring adjacency and discrete differential
//! quantities.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::autodiff::{add, cross, dot, norm, scale, sub, Real, V3};
use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Semantic class id. Valid labels are `1..=L`; `0` is reserved for
/// "no label" in rendered class images.
pub type Label = u32;

/// Triangle mesh with one semantic label per face.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMesh {
    pub vertices: Vec<Vec3>,
    /// Vertex index triples, counter-clockwise seen from the outside.
    pub faces: Vec<[usize; 3]>,
    pub labels: Vec<Label>,
}

impl LabeledMesh {
    /// Builds a mesh after checking indices, label count and face areas.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != faces.len() {
            return Err(Error::InvalidMesh(format!(
                "{} labels for {} faces",
                labels.len(),
                faces.len()
            )));
        }
        if let Some(f) = labels.iter().position(|&l| l == 0) {
            return Err(Error::InvalidMesh(format!("face {f} has label 0; labels start at 1")));
        }
        if let Some(v) = vertices.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh(format!("vertex {v} has non-finite coordinates")));
        }
        for (f, tri) in faces.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "face {f} references vertex {bad} but the mesh has {} vertices",
                    vertices.len()
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::DegenerateFace { face: f });
            }
        }
        let mesh = LabeledMesh {
            vertices,
            faces,
            labels,
        };
        for f in 0..mesh.faces.len() {
            face_geometry(&mesh, f)?;
        }
        Ok(mesh)
    }

    /// Same topology and labels with a new vertex array. Geometry is not
    /// re-validated; refinement may pass through near-degenerate states.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Self {
        debug_assert_eq!(vertices.len(), self.vertices.len());
        LabeledMesh {
            vertices,
            faces: self.faces.clone(),
            labels: self.labels.clone(),
        }
    }

    pub fn with_labels(&self, labels: Vec<Label>) -> Self {
        debug_assert_eq!(labels.len(), self.faces.len());
        LabeledMesh {
            vertices: self.vertices.clone(),
            faces: self.faces.clone(),
            labels,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Length of the axis-aligned bounding box diagonal.
    pub fn diagonal(&self) -> f64 {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &self.vertices {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        if self.vertices.is_empty() {
            0.0
        } else {
            (hi - lo).norm()
        }
    }

    pub fn max_label(&self) -> Label {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    pub fn corners(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unit normal and area, or `None` for a (numerically) degenerate face.
    pub fn normal_area(&self, f: usize) -> Option<(Vec3, f64)> {
        let [a, b, c] = self.corners(f);
        let e1 = b - a;
        let e2 = c - a;
        let n = e1.cross(&e2);
        let len = n.norm();
        if len <= 1e-14 * e1.norm() * e2.norm() || len == 0.0 {
            None
        } else {
            Some((n / len, 0.5 * len))
        }
    }
}

/// Unit normal (counter-clockwise orientation) and area of face `f`.
pub fn face_geometry(mesh: &LabeledMesh, f: usize) -> Result<(Vec3, f64)> {
    mesh.normal_area(f).ok_or(Error::DegenerateFace { face: f })
}

/// One-ring and edge adjacency of a mesh.
#[derive(Debug, Clone)]
pub struct AdjacencyIndex {
    ring_faces: Vec<Vec<usize>>,
    ring_vertices: Vec<Vec<usize>>,
    boundary: Vec<bool>,
    face_neighbors: Vec<[Option<usize>; 3]>,
    edge_faces: HashMap<(usize, usize), [Option<usize>; 2]>,
}

impl AdjacencyIndex {
    /// Faces around `v`. For interior vertices the order is cyclic and
    /// counter-clockwise; face `ring_faces(v)[i]` is `(v, r[i], r[i+1])` where
    /// `r = ring_vertices(v)`.
    pub fn ring_faces(&self, v: usize) -> &[usize] {
        &self.ring_faces[v]
    }

    pub fn ring_vertices(&self, v: usize) -> &[usize] {
        &self.ring_vertices[v]
    }

    /// True for rim vertices, isolated vertices and non-manifold fans.
    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    /// Neighbor of `f` across its edge `k` (from corner `k` to corner `k + 1`).
    pub fn face_neighbors(&self, f: usize) -> &[Option<usize>; 3] {
        &self.face_neighbors[f]
    }

    pub fn edge_faces(&self, a: usize, b: usize) -> impl Iterator<Item = usize> + '_ {
        self.edge_faces
            .get(&(a.min(b), a.max(b)))
            .into_iter()
            .flat_map(|fs| fs.iter().flatten().copied())
    }

    pub fn num_vertices(&self) -> usize {
        self.boundary.len()
    }

    /// Unordered adjacent face pairs `(f, g)` with `f < g`, in ascending order.
    pub fn face_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for (f, nbrs) in self.face_neighbors.iter().enumerate() {
            for g in nbrs.iter().flatten() {
                if f < *g {
                    pairs.push((f, *g));
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }
}

/// Builds edge and one-ring adjacency.
pub fn build_adjacency(mesh: &LabeledMesh) -> Result<AdjacencyIndex> {
    let nv = mesh.vertices.len();
    let mut incident_edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (f, tri) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            incident_edges.entry((a.min(b), a.max(b))).or_default().push(f);
        }
    }
    for tri in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let count = incident_edges[&key].len();
            if count > 2 {
                return Err(Error::NonManifoldEdge {
                    a: key.0,
                    b: key.1,
                    count,
                });
            }
        }
    }
    let edge_faces: HashMap<(usize, usize), [Option<usize>; 2]> = incident_edges
        .into_iter()
        .map(|(k, fs)| (k, [fs.first().copied(), fs.get(1).copied()]))
        .collect();

    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for (f, tri) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if let Some(first) = directed.insert((a, b), f) {
                return Err(Error::InconsistentOrientation { a, b, first, second: f });
            }
        }
    }

    let face_neighbors = mesh
        .faces
        .iter()
        .enumerate()
        .map(|(f, tri)| {
            let mut out = [None; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                out[k] = directed.get(&(b, a)).copied().filter(|&g| g != f);
            }
            out
        })
        .collect();

    let mut incident: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); nv];
    for (f, tri) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            incident[tri[k]].push((f, tri[(k + 1) % 3], tri[(k + 2) % 3]));
        }
    }

    let mut ring_faces = Vec::with_capacity(nv);
    let mut ring_vertices = Vec::with_capacity(nv);
    let mut boundary = Vec::with_capacity(nv);
    for fan in &incident {
        let (faces, verts, is_boundary) = order_fan(fan);
        ring_faces.push(faces);
        ring_vertices.push(verts);
        boundary.push(is_boundary);
    }

    Ok(AdjacencyIndex {
        ring_faces,
        ring_vertices,
        boundary,
        face_neighbors,
        edge_faces,
    })
}

/// Orders the faces `(f, a, b)` around a vertex so that consecutive faces share
/// the edge `b == next.a`.
fn order_fan(fan: &[(usize, usize, usize)]) -> (Vec<usize>, Vec<usize>, bool) {
    if fan.is_empty() {
        return (Vec::new(), Vec::new(), true);
    }
    let by_a: HashMap<usize, usize> = fan.iter().enumerate().map(|(i, e)| (e.1, i)).collect();
    let starts: Vec<usize> = (0..fan.len())
        .filter(|&i| !fan.iter().any(|e| e.2 == fan[i].1))
        .collect();
    let start = starts.first().copied().unwrap_or(0);

    let mut visited = vec![false; fan.len()];
    let mut faces = Vec::with_capacity(fan.len());
    let mut verts = Vec::with_capacity(fan.len() + 1);
    let mut cur = start;
    let mut closed = false;
    loop {
        visited[cur] = true;
        faces.push(fan[cur].0);
        verts.push(fan[cur].1);
        match by_a.get(&fan[cur].2) {
            Some(&next) if next == start => {
                closed = true;
                break;
            }
            Some(&next) if !visited[next] => cur = next,
            _ => {
                verts.push(fan[cur].2);
                break;
            }
        }
    }
    let complete = visited.iter().all(|&v| v);
    if !complete {
        for (i, e) in fan.iter().enumerate() {
            if !visited[i] {
                faces.push(e.0);
                verts.push(e.1);
            }
        }
    }
    (faces, verts, !(closed && complete))
}

/// Classification of a vertex by the labels of its one-ring faces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VertexClass {
    /// All one-ring faces carry this label.
    Homogeneous(Label),
    /// Exactly two labels, each on one contiguous fan segment. `v1` and `v2`
    /// are the far endpoints of the two transition edges; `gamma` is the angle
    /// between them at the center vertex.
    TwoLabelTransition {
        v1: usize,
        v2: usize,
        gamma: f64,
    },
    Other,
}

/// Transition edge endpoints of a two-label fan, without the angle.
pub(crate) fn transition_endpoints(
    mesh: &LabeledMesh,
    adj: &AdjacencyIndex,
    v: usize,
) -> Option<std::result::Result<Label, (usize, usize)>> {
    if adj.is_boundary(v) {
        return None;
    }
    let faces = adj.ring_faces(v);
    let ring = adj.ring_vertices(v);
    let k = faces.len();
    let first = mesh.labels[faces[0]];
    let mut changes = [0usize; 2];
    let mut n_changes = 0;
    let mut other = None;
    for i in 0..k {
        let l = mesh.labels[faces[i]];
        if l != first {
            match other {
                None => other = Some(l),
                Some(o) if o != l => return None,
                _ => {}
            }
        }
        if mesh.labels[faces[(i + 1) % k]] != l {
            if n_changes == 2 {
                return None;
            }
            changes[n_changes] = i;
            n_changes += 1;
        }
    }
    match n_changes {
        0 => Some(Ok(first)),
        // Edge between faces i and i+1 is (v, ring[i+1]).
        2 => Some(Err((ring[(changes[0] + 1) % k], ring[(changes[1] + 1) % k]))),
        _ => None,
    }
}

/// Classifies `v` as homogeneous, a two-label transition, or other.
pub fn classify_vertex(mesh: &LabeledMesh, adj: &AdjacencyIndex, v: usize) -> VertexClass {
    match transition_endpoints(mesh, adj, v) {
        None => VertexClass::Other,
        Some(Ok(l)) => VertexClass::Homogeneous(l),
        Some(Err((v1, v2))) => {
            let p = to_arr(&mesh.vertices[v]);
            let gamma = edge_angle(p, to_arr(&mesh.vertices[v1]), to_arr(&mesh.vertices[v2]));
            VertexClass::TwoLabelTransition { v1, v2, gamma }
        }
    }
}

pub fn classify_all(mesh: &LabeledMesh, adj: &AdjacencyIndex) -> Vec<VertexClass> {
    (0..mesh.num_vertices())
        .map(|v| classify_vertex(mesh, adj, v))
        .collect()
}

/// Angle at `p` between `a - p` and `b - p`, in `[0, pi]`.
pub(crate) fn edge_angle(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let u = sub(a, p);
    let w = sub(b, p);
    norm(cross(u, w)).atan2(dot(u, w))
}

#[inline]
pub(crate) fn to_arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Principal, mean and Gaussian curvature at a vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureEstimate {
    pub kappa1: f64,
    pub kappa2: f64,
    pub mean: f64,
    pub gaussian: f64,
}

/// Discrete curvature at an interior vertex: cotangent mean-curvature normal
/// and angle deficit, both over the mixed Voronoi area.
pub fn principal_curvatures(mesh: &LabeledMesh, adj: &AdjacencyIndex, v: usize) -> Result<CurvatureEstimate> {
    if adj.is_boundary(v) {
        return Err(Error::DegenerateGeometry { vertex: v });
    }
    let center = to_arr(&mesh.vertices[v]);
    let ring: Vec<[f64; 3]> = adj
        .ring_vertices(v)
        .iter()
        .map(|&r| to_arr(&mesh.vertices[r]))
        .collect();
    let terms = one_ring_terms(center, &ring).ok_or(Error::DegenerateGeometry { vertex: v })?;
    let h_abs = terms.mean_abs();
    let k = terms.gaussian();
    let h = if dot(terms.mean_normal, terms.vertex_normal) > 0.0 {
        -h_abs
    } else {
        h_abs
    };
    let disc = (h * h - k).max(0.0).sqrt();
    Ok(CurvatureEstimate {
        kappa1: h + disc,
        kappa2: h - disc,
        mean: h,
        gaussian: k,
    })
}

/// Angle deficit (radians) over which the thin-plate density blends its
/// saddle and convex branches.
pub const DEFICIT_BLEND: f64 = 1e-3;

/// Cosine width over which a triangle's mixed-area share blends between the
/// Voronoi and obtuse formulas.
pub const RIGHT_ANGLE_BLEND: f64 = 1e-3;

/// Cotangent and angle-deficit sums of a closed fan.
pub(crate) struct OneRingTerms<T> {
    /// Sum of cotangent-weighted edge vectors; its norm over `4 * area` is |H|.
    pub mean_normal: V3<T>,
    /// Magnitude scale of the summands, used to detect a vanishing sum.
    pub magnitude: T,
    pub vertex_normal: V3<T>,
    pub area: T,
    pub angle_sum: T,
}

impl<T: Real> OneRingTerms<T> {
    pub fn mean_abs(&self) -> T {
        let s2 = dot(self.mean_normal, self.mean_normal);
        let m = self.magnitude.value();
        if s2.value() <= 1e-24 * m * m {
            // Flat fan: |H| has a kink here, use the zero subgradient.
            T::from_f64(0.0)
        } else {
            s2.sqrt() / (T::from_f64(4.0) * self.area)
        }
    }

    pub fn gaussian(&self) -> T {
        let deficit = T::from_f64(2.0 * PI) - self.angle_sum;
        if deficit.value().abs() <= 1e-12 {
            // rounding noise of a flat fan; sqrt(H^2 - K) would amplify it
            T::from_f64(0.0)
        } else {
            deficit / self.area
        }
    }

    /// Thin-plate density `(|k1| + |k2|) / 2`.
    ///
    /// Equals `|H|` for `K >= 0` and `sqrt(H^2 - K)` for `K < 0`. The switch
    /// at `K = 0` is blended by a logistic weight over an angle-deficit width
    /// of [`DEFICIT_BLEND`] so that the density stays differentiable where a
    /// principal curvature changes sign; outside `40 * DEFICIT_BLEND` the two
    /// branches are used as they are.
    pub fn thin_plate(&self) -> T {
        let h = self.mean_abs();
        let k = self.gaussian();
        if k.value() == 0.0 {
            return h;
        }
        let t = (T::from_f64(2.0 * PI) - self.angle_sum) / T::from_f64(DEFICIT_BLEND);
        let arg = if t.value() > 40.0 {
            h * h
        } else if t.value() < -40.0 {
            h * h - k
        } else {
            h * h - k / (T::from_f64(1.0) + t.exp())
        };
        if arg.value() <= 0.0 {
            T::from_f64(0.0)
        } else {
            arg.sqrt()
        }
    }
}

/// Evaluates the one-ring sums for the closed fan of triangles
/// `(center, ring[i], ring[i + 1])`.
pub(crate) fn one_ring_terms<T: Real>(center: V3<T>, ring: &[V3<T>]) -> Option<OneRingTerms<T>> {
    let k = ring.len();
    if k < 3 {
        return None;
    }
    let zero = T::from_f64(0.0);
    let mut mean_normal = [zero; 3];
    let mut vertex_normal = [zero; 3];
    let mut magnitude = 0.0;
    let mut area = zero;
    let mut angle_sum = zero;
    for i in 0..k {
        let q = ring[i];
        let r = ring[(i + 1) % k];
        let pq = sub(q, center);
        let pr = sub(r, center);
        let qr = sub(r, q);
        let n = cross(pq, pr);
        let cn = norm(n);
        let scale_ref = norm(pq).value() * norm(pr).value();
        if cn.value() <= 1e-12 * scale_ref {
            return None;
        }
        let tri_area = cn * T::from_f64(0.5);
        let dot_p = dot(pq, pr);
        let dot_q = -dot(pq, qr);
        let dot_r = dot(pr, qr);
        let cot_q = dot_q / cn;
        let cot_r = dot_r / cn;
        mean_normal = add(mean_normal, add(scale(pq, cot_r), scale(pr, cot_q)));
        magnitude += (cot_r.value() * norm(pq).value()).abs() + (cot_q.value() * norm(pr).value()).abs();
        vertex_normal = add(vertex_normal, n);
        angle_sum = angle_sum + cn.atan2(dot_p);
        let voronoi = (dot(pr, pr) * cot_q + dot(pq, pq) * cot_r) * T::from_f64(0.125);
        let cosines = [
            (dot_p / (norm(pq) * norm(pr)), 0.5),
            (dot_q / (norm(pq) * norm(qr)), 0.25),
            (dot_r / (norm(pr) * norm(qr)), 0.25),
        ];
        // at most one angle of a valid triangle is near a right angle
        let (cos, share) = cosines
            .into_iter()
            .min_by(|a, b| a.0.value().abs().total_cmp(&b.0.value().abs()))
            .unwrap();
        let t = cos / T::from_f64(RIGHT_ANGLE_BLEND);
        let mixed = if t.value() > 40.0 {
            voronoi
        } else if t.value() < -40.0 {
            tri_area * T::from_f64(share)
        } else {
            let w = T::from_f64(1.0) / (T::from_f64(1.0) + (-t).exp());
            voronoi * w + tri_area * T::from_f64(share) * (T::from_f64(1.0) - w)
        };
        area = area + mixed;
    }
    if area.value() <= 0.0 {
        return None;
    }
    Some(OneRingTerms {
        mean_normal,
        magnitude: T::from_f64(magnitude),
        vertex_normal,
        area,
        angle_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::shapes;
    use approx::assert_relative_eq;

    fn tri_mesh() -> LabeledMesh {
        LabeledMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
            vec![1],
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_is_all_boundary() {
        let mesh = tri_mesh();
        let adj = build_adjacency(&mesh).unwrap();
        for v in 0..3 {
            assert_eq!(adj.ring_faces(v), &[0]);
            assert!(adj.is_boundary(v));
            assert_eq!(classify_vertex(&mesh, &adj, v), VertexClass::Other);
        }
        assert_eq!(adj.face_neighbors(0), &[None, None, None]);
    }

    #[test]
    fn tetrahedron_is_closed() {
        let mesh = shapes::tetrahedron();
        let adj = build_adjacency(&mesh).unwrap();
        for v in 0..4 {
            assert_eq!(adj.ring_faces(v).len(), 3);
            assert!(!adj.is_boundary(v));
        }
        for f in 0..4 {
            for g in adj.face_neighbors(f).iter() {
                let g = g.unwrap();
                assert!(adj.face_neighbors(g).contains(&Some(f)));
            }
        }
        assert_eq!(adj.face_pairs().len(), 6);
    }

    #[test]
    fn three_faces_on_one_edge_is_rejected() {
        let vertices = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.5, 1.0, 0.0),
            Vec3::new(0.5, -1.0, 0.0),
            Vec3::new(0.5, 0.0, 1.0),
        ];
        let faces = vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]];
        let mesh = LabeledMesh::new(vertices, faces, vec![1, 1, 1]).unwrap();
        match build_adjacency(&mesh) {
            Err(Error::NonManifoldEdge { a, b, count }) => {
                assert_eq!((a, b, count), (0, 1, 3));
            }
            other => panic!("expected non-manifold error, got {other:?}"),
        }
    }

    #[test]
    fn flipped_face_is_rejected() {
        let vertices = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.5, 1.0, 0.0),
            Vec3::new(0.5, -1.0, 0.0),
        ];
        let mesh = LabeledMesh::new(vertices, vec![[0, 1, 2], [0, 1, 3]], vec![1, 1]).unwrap();
        assert!(matches!(
            build_adjacency(&mesh),
            Err(Error::InconsistentOrientation { .. })
        ));
    }

    #[test]
    fn mesh_validation() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert!(LabeledMesh::new(v.clone(), vec![[0, 1, 3]], vec![1]).is_err());
        assert!(LabeledMesh::new(v.clone(), vec![[0, 1, 1]], vec![1]).is_err());
        assert!(LabeledMesh::new(v.clone(), vec![[0, 1, 2]], vec![]).is_err());
        assert!(LabeledMesh::new(v.clone(), vec![[0, 1, 2]], vec![0]).is_err());
        let collinear = vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0];
        assert!(matches!(
            LabeledMesh::new(collinear, vec![[0, 1, 2]], vec![1]),
            Err(Error::DegenerateFace { face: 0 })
        ));
    }

    /// Hexagonal fan around the origin with six unit spokes.
    fn hex_fan(labels: [Label; 6]) -> LabeledMesh {
        let mut vertices = vec![Vec3::zeros()];
        for i in 0..6 {
            let t = i as f64 * PI / 3.0;
            vertices.push(Vec3::new(t.cos(), t.sin(), 0.0));
        }
        // A second ring keeps the center's neighbors from mattering; only the
        // center is classified, and its fan is closed.
        let faces = (0..6).map(|i| [0, 1 + i, 1 + (i + 1) % 6]).collect();
        LabeledMesh::new(vertices, faces, labels.to_vec()).unwrap()
    }

    #[test]
    fn uniform_fan_is_homogeneous() {
        let mesh = hex_fan([3; 6]);
        let adj = build_adjacency(&mesh).unwrap();
        assert!(!adj.is_boundary(0));
        assert_eq!(classify_vertex(&mesh, &adj, 0), VertexClass::Homogeneous(3));
    }

    #[test]
    fn straight_two_label_fan_has_gamma_pi() {
        let mesh = hex_fan([1, 1, 1, 2, 2, 2]);
        let adj = build_adjacency(&mesh).unwrap();
        match classify_vertex(&mesh, &adj, 0) {
            VertexClass::TwoLabelTransition { v1, v2, gamma } => {
                assert_relative_eq!(gamma, PI, epsilon = 1e-12);
                // each transition edge borders one face of each label
                for e in [v1, v2] {
                    let mut ls: Vec<Label> = adj.edge_faces(0, e).map(|f| mesh.labels[f]).collect();
                    ls.sort();
                    assert_eq!(ls, vec![1, 2]);
                }
            }
            other => panic!("unexpected class {other:?}"),
        }
    }

    #[test]
    fn bent_boundary_angle() {
        let mesh = hex_fan([1, 1, 2, 2, 2, 2]);
        let adj = build_adjacency(&mesh).unwrap();
        match classify_vertex(&mesh, &adj, 0) {
            VertexClass::TwoLabelTransition { gamma, .. } => {
                assert_relative_eq!(gamma, 2.0 * PI / 3.0, epsilon = 1e-12)
            }
            other => panic!("unexpected class {other:?}"),
        }
    }

    #[test]
    fn three_labels_or_split_segments_are_other() {
        for labels in [[1, 1, 2, 2, 3, 3], [1, 2, 1, 2, 1, 2], [1, 1, 2, 1, 1, 2]] {
            let mesh = hex_fan(labels);
            let adj = build_adjacency(&mesh).unwrap();
            assert_eq!(classify_vertex(&mesh, &adj, 0), VertexClass::Other, "{labels:?}");
        }
    }

    #[test]
    fn planar_grid_has_zero_curvature() {
        let mesh = shapes::grid_plane(6, 6, 1.0, 1);
        let adj = build_adjacency(&mesh).unwrap();
        let v = 3 * 7 + 3;
        assert!(!adj.is_boundary(v));
        let c = principal_curvatures(&mesh, &adj, v).unwrap();
        assert!(c.kappa1.abs() < 1e-12 && c.kappa2.abs() < 1e-12, "{c:?}");
    }

    #[test]
    fn icosphere_curvature_matches_radius() {
        let r = 2.5;
        let mesh = shapes::icosphere(r, 3);
        let adj = build_adjacency(&mesh).unwrap();
        for v in (0..mesh.num_vertices()).step_by(37) {
            let c = principal_curvatures(&mesh, &adj, v).unwrap();
            assert!((c.kappa1 * r - 1.0).abs() < 0.05, "{c:?}");
            assert!((c.kappa2 * r - 1.0).abs() < 0.05, "{c:?}");
        }
    }

    #[test]
    fn cylinder_curvature() {
        let mesh = shapes::cylinder(1.0, 4.0, 48, 24);
        let adj = build_adjacency(&mesh).unwrap();
        let mut checked = 0;
        for v in 0..mesh.num_vertices() {
            let z = mesh.vertices[v].z;
            if adj.is_boundary(v) || !(1.0..=3.0).contains(&z) {
                continue;
            }
            let c = principal_curvatures(&mesh, &adj, v).unwrap();
            assert!((c.kappa1 - 1.0).abs() < 0.1, "{c:?}");
            assert!(c.kappa2.abs() < 0.1, "{c:?}");
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn face_geometry_examples() {
        let mesh = tri_mesh();
        let (n, a) = face_geometry(&mesh, 0).unwrap();
        assert_relative_eq!(n, Vec3::z(), epsilon = 1e-15);
        assert_relative_eq!(a, 0.5);

        let flipped = LabeledMesh::new(mesh.vertices.clone(), vec![[0, 2, 1]], vec![1]).unwrap();
        let (n, _) = face_geometry(&flipped, 0).unwrap();
        assert_relative_eq!(n, -Vec3::z(), epsilon = 1e-15);

        let s = 1.7;
        let eq = LabeledMesh::new(
            vec![
                Vec3::zeros(),
                Vec3::new(s, 0.0, 0.0),
                Vec3::new(0.5 * s, 0.5 * s * 3f64.sqrt(), 0.0),
            ],
            vec![[0, 1, 2]],
            vec![1],
        )
        .unwrap();
        let (_, a) = face_geometry(&eq, 0).unwrap();
        assert_relative_eq!(a, s * s * 3f64.sqrt() / 4.0, max_relative = 1e-14);
    }
}
