//! File formats: OBJ meshes with a label sidecar, binary PLY meshes,
//! PGM/PPM images, SEMF1 likelihood rasters, camera text files and the
//! dataset manifest tying them together.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use semref::camera::Camera;
use semref::error::{Error, Result};
use semref::image::{ImageView, LikelihoodStack, PixelGrid};
use semref::mesh::{Label, LabeledMesh, Vec3};

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Default sidecar location: the mesh path with extension `labels`.
pub fn sidecar_path(mesh_path: &Path) -> PathBuf {
    mesh_path.with_extension("labels")
}

/// Loads an OBJ (with its label sidecar) or a binary PLY mesh, chosen by
/// extension. `labels` overrides the sidecar location for OBJ files.
pub fn load_mesh(path: &Path, labels: Option<&Path>) -> Result<LabeledMesh> {
    match extension(path).as_deref() {
        Some("obj") => {
            let side = labels.map_or_else(|| sidecar_path(path), Path::to_path_buf);
            load_obj(path, &side)
        }
        Some("ply") => load_ply(path),
        _ => Err(Error::format(path, "unknown mesh extension, expected .obj or .ply")),
    }
}

/// Writes the mesh as OBJ plus sidecar, or as binary PLY, by extension.
pub fn save_mesh(mesh: &LabeledMesh, path: &Path) -> Result<()> {
    match extension(path).as_deref() {
        Some("obj") => save_obj(mesh, path, &sidecar_path(path)),
        Some("ply") => save_ply(mesh, path),
        _ => Err(Error::format(path, "unknown mesh extension, expected .obj or .ply")),
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase)
}

pub fn load_obj(obj: &Path, sidecar: &Path) -> Result<LabeledMesh> {
    let text = read_text(obj)?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        let bad = |msg: String| Error::format(obj, format!("line {}: {msg}", ln + 1));
        match it.next() {
            Some("v") => {
                let xs: Vec<f64> = it
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad coordinate '{t}'"))))
                    .collect::<Result<_>>()?;
                if xs.len() != 3 {
                    return Err(bad("vertex needs three coordinates".into()));
                }
                vertices.push(Vec3::new(xs[0], xs[1], xs[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|_| bad(format!("bad face index '{t}'")))?;
                        let n = vertices.len() as i64;
                        let abs = if i < 0 { n + i } else { i - 1 };
                        if i == 0 || abs < 0 || abs >= n {
                            return Err(bad(format!("face index {i} out of range")));
                        }
                        Ok(abs as usize)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(bad(format!("only triangles are supported, got {} corners", idx.len())));
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    let labels = load_sidecar(sidecar)?;
    if labels.len() != faces.len() {
        return Err(Error::format(
            sidecar,
            format!(
                "label count does not match face count: {} vs {}",
                labels.len(),
                faces.len()
            ),
        ));
    }
    LabeledMesh::new(vertices, faces, labels)
}

fn load_sidecar(path: &Path) -> Result<Vec<Label>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(ln, l)| {
            l.trim()
                .parse::<Label>()
                .map_err(|_| Error::format(path, format!("line {}: bad label '{}'", ln + 1, l.trim())))
        })
        .collect()
}

pub fn save_obj(mesh: &LabeledMesh, obj: &Path, sidecar: &Path) -> Result<()> {
    let mut out = String::with_capacity(32 * (mesh.num_vertices() + mesh.num_faces()));
    for p in &mesh.vertices {
        out.push_str(&format!("v {} {} {}\n", p.x, p.y, p.z));
    }
    for f in &mesh.faces {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    write(obj, out.as_bytes())?;
    let labels: String = mesh.labels.iter().map(|l| format!("{l}\n")).collect();
    write(sidecar, labels.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Reads a binary little-endian PLY with `vertex` (x, y, z) and `face`
/// (`vertex_indices` list and an integer `label`) elements.
pub fn load_ply(path: &Path) -> Result<LabeledMesh> {
    let bytes = read(path)?;
    let bad = |m: String| Error::format(path, m);
    let end = bytes
        .windows(11)
        .position(|w| w == b"end_header\n")
        .ok_or_else(|| bad("missing end_header".into()))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8".into()))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(bad("missing ply magic".into()));
    }
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["format", "binary_little_endian", _] => {}
            ["format", other, ..] => return Err(bad(format!("unsupported PLY format {other}"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| bad(format!("bad element count '{count}'")))?,
                props: Vec::new(),
            }),
            ["property", "list", ct, it, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| bad("property before element".into()))?;
                let (c, i) = Scalar::parse(ct)
                    .zip(Scalar::parse(it))
                    .ok_or_else(|| bad(format!("unknown list types {ct} {it}")))?;
                el.props.push(Property::List(name.to_string(), c, i));
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| bad("property before element".into()))?;
                let s = Scalar::parse(ty).ok_or_else(|| bad(format!("unknown property type {ty}")))?;
                el.props.push(Property::Scalar(name.to_string(), s));
            }
            _ => return Err(bad(format!("unrecognized header line '{line}'"))),
        }
    }
    let mut pos = end + 11;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut labels = Vec::new();
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        let s = bytes
            .get(*pos..*pos + n)
            .ok_or_else(|| Error::format(path, format!("payload truncated at byte {}", *pos)))?;
        *pos += n;
        Ok(s)
    };
    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [None; 3];
            let mut idx = None;
            let mut label = None;
            for p in &el.props {
                match p {
                    Property::Scalar(name, s) => {
                        let v = s.read(take(&mut pos, s.size())?);
                        match (el.name.as_str(), name.as_str()) {
                            ("vertex", "x") => xyz[0] = Some(v),
                            ("vertex", "y") => xyz[1] = Some(v),
                            ("vertex", "z") => xyz[2] = Some(v),
                            ("face", "label") => label = Some(v),
                            _ => {}
                        }
                    }
                    Property::List(name, ct, it) => {
                        let n = ct.read(take(&mut pos, ct.size())?) as usize;
                        let vals: Vec<f64> = (0..n)
                            .map(|_| Ok(it.read(take(&mut pos, it.size())?)))
                            .collect::<Result<_>>()?;
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            idx = Some(vals);
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => {
                    let [Some(x), Some(y), Some(z)] = xyz else {
                        return Err(bad("vertex element lacks x, y or z".into()));
                    };
                    vertices.push(Vec3::new(x, y, z));
                }
                "face" => {
                    let idx = idx.ok_or_else(|| bad("face element lacks vertex_indices".into()))?;
                    if idx.len() != 3 {
                        return Err(bad(format!("only triangles are supported, got {} corners", idx.len())));
                    }
                    let l = label.ok_or_else(|| bad("face element lacks a label property".into()))?;
                    if l < 0.0 {
                        return Err(bad(format!("negative label {l}")));
                    }
                    faces.push([idx[0] as usize, idx[1] as usize, idx[2] as usize]);
                    labels.push(l as Label);
                }
                _ => {}
            }
        }
    }
    if pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes after payload", bytes.len() - pos)));
    }
    LabeledMesh::new(vertices, faces, labels)
}

pub fn save_ply(mesh: &LabeledMesh, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    let header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\n\
         property double z\nelement face {}\nproperty list uchar int vertex_indices\nproperty int label\nend_header\n",
        mesh.num_vertices(),
        mesh.num_faces()
    );
    out.extend_from_slice(header.as_bytes());
    for p in &mesh.vertices {
        for c in [p.x, p.y, p.z] {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for (f, &l) in mesh.faces.iter().zip(&mesh.labels) {
        out.push(3);
        for &i in f {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
        out.extend_from_slice(&(l as i32).to_le_bytes());
    }
    write(path, &out)
}

/// Splits a netpbm header into `count` whitespace-separated tokens, skipping
/// comments; returns the tokens and the offset of the payload.
fn pnm_header(bytes: &[u8], count: usize) -> Option<(Vec<String>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            i += 1;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return None;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    // exactly one whitespace byte separates header and raster
    (i < bytes.len()).then_some((tokens, i + 1))
}

/// Reads an 8-bit binary PGM (P5) or PPM (P6) image scaled to `[0, 1]`.
pub fn load_image(path: &Path) -> Result<ImageView> {
    let bytes = read(path)?;
    let bad = |m: String| Error::format(path, m);
    let (tok, off) = pnm_header(&bytes, 4).ok_or_else(|| bad("incomplete netpbm header".into()))?;
    let channels = match tok[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        m => return Err(bad(format!("unsupported magic '{m}', expected P5 or P6"))),
    };
    let parse = |t: &str| t.parse::<usize>().map_err(|_| bad(format!("bad header value '{t}'")));
    let (w, h, maxval) = (parse(&tok[1])?, parse(&tok[2])?, parse(&tok[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(bad(format!("only 8-bit images are supported, maxval {maxval}")));
    }
    let need = w * h * channels;
    let payload = &bytes[off..];
    if payload.len() != need {
        return Err(bad(format!(
            "expected {need} bytes of pixel data, found {}",
            payload.len()
        )));
    }
    let data = payload.iter().map(|&b| b as f64 / maxval as f64).collect();
    ImageView::new(PixelGrid::new(w, h, channels, data)?)
}

/// Writes a 1-channel image as P5 and a 3-channel image as P6.
pub fn save_image(image: &ImageView, path: &Path) -> Result<()> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    write(path, &out)
}

/// Reads a `SEMF1 W H L` likelihood raster, renormalizing pixels whose
/// class probabilities do not sum to one.
pub fn load_likelihoods(path: &Path) -> Result<LikelihoodStack> {
    let bytes = read(path)?;
    let bad = |m: String| Error::format(path, m);
    let (tok, off) = pnm_header(&bytes, 4).ok_or_else(|| bad("incomplete SEMF1 header".into()))?;
    if tok[0] != "SEMF1" {
        return Err(bad(format!("bad magic '{}', expected SEMF1", tok[0])));
    }
    let parse = |t: &str| t.parse::<usize>().map_err(|_| bad(format!("bad header value '{t}'")));
    let (w, h, l) = (parse(&tok[1])?, parse(&tok[2])?, parse(&tok[3])?);
    let expected = w * h * l * 4;
    let payload = &bytes[off..];
    if payload.len() != expected {
        return Err(bad(format!(
            "payload size mismatch: expected {expected} bytes, found {}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let (stack, fixed) = LikelihoodStack::normalized(PixelGrid::new(w, h, l, data)?)?;
    if fixed > 0 {
        warn!(
            "{}: renormalized {fixed} pixels whose likelihoods did not sum to 1",
            path.display()
        );
    }
    Ok(stack)
}

pub fn save_likelihoods(stack: &LikelihoodStack, path: &Path) -> Result<()> {
    let mut out = format!("SEMF1 {} {} {}\n", stack.width(), stack.height(), stack.channels()).into_bytes();
    for v in stack.data() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    write(path, &out)
}

/// Reads a camera file: three lines of `K`, three lines of `R` (world to
/// camera), one line `t` and one line `width height`. Blank lines and
/// `#` comments are skipped.
pub fn load_camera(path: &Path) -> Result<Camera> {
    let text = read_text(path)?;
    let bad = |m: String| Error::format(path, m);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| bad(format!("line {}: bad number '{v}'", n + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(vals);
    }
    if rows.len() != 8 {
        return Err(bad(format!("expected 8 lines (K, R, t, size), found {}", rows.len())));
    }
    let widths = [3, 3, 3, 3, 3, 3, 3, 2];
    for (i, (row, &w)) in rows.iter().zip(&widths).enumerate() {
        if row.len() != w {
            return Err(bad(format!("record {} needs {w} values, got {}", i + 1, row.len())));
        }
    }
    let mat = |r: &[Vec<f64>]| Matrix3::from_fn(|i, j| r[i][j]);
    let k = mat(&rows[0..3]);
    let r = mat(&rows[3..6]);
    let t = Vec3::new(rows[6][0], rows[6][1], rows[6][2]);
    let size = &rows[7];
    if size.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
        return Err(bad("image size must be positive integers".into()));
    }
    Camera::new(k, r, t, size[0] as usize, size[1] as usize).map_err(|e| bad(e.to_string()))
}

pub fn save_camera(cam: &Camera, path: &Path) -> Result<()> {
    let mut text = String::new();
    for m in [&cam.k, &cam.r] {
        for i in 0..3 {
            text.push_str(&format!("{} {} {}\n", m[(i, 0)], m[(i, 1)], m[(i, 2)]));
        }
    }
    text.push_str(&format!(
        "{} {} {}\n{} {}\n",
        cam.t.x, cam.t.y, cam.t.z, cam.width, cam.height
    ));
    write(path, text.as_bytes())
}

/// Files making up a dataset. Relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub mesh: PathBuf,
    /// Label sidecar of an OBJ mesh; defaults to the mesh path with
    /// extension `labels`.
    #[serde(default)]
    pub labels: Option<PathBuf>,
    pub cameras: Vec<PathBuf>,
    pub images: Vec<PathBuf>,
    #[serde(default)]
    pub likelihoods: Vec<PathBuf>,
    /// Optional ground truth for evaluation.
    #[serde(default)]
    pub truth_mesh: Option<PathBuf>,
    #[serde(default)]
    pub truth_labels: Option<PathBuf>,
}

/// A manifest with every referenced file parsed.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub mesh: LabeledMesh,
    pub cameras: Vec<Camera>,
    pub images: Vec<ImageView>,
    pub likelihoods: Vec<LikelihoodStack>,
    pub truth: Option<LabeledMesh>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write(path, text.as_bytes())
    }

    /// Loads all files, resolving relative paths against `base`.
    pub fn read_dataset(&self, base: &Path) -> Result<Dataset> {
        let at = |p: &Path| base.join(p);
        let n = self.cameras.len();
        if self.images.len() != n {
            return Err(Error::Config(format!(
                "manifest lists {n} cameras but {} images",
                self.images.len()
            )));
        }
        if !self.likelihoods.is_empty() && self.likelihoods.len() != n {
            return Err(Error::Config(format!(
                "manifest lists {n} cameras but {} likelihood files",
                self.likelihoods.len()
            )));
        }
        let mesh = load_mesh(&at(&self.mesh), self.labels.as_deref().map(at).as_deref())?;
        let cameras = self
            .cameras
            .iter()
            .map(|p| load_camera(&at(p)))
            .collect::<Result<_>>()?;
        let images = self.images.iter().map(|p| load_image(&at(p))).collect::<Result<_>>()?;
        let likelihoods = self
            .likelihoods
            .iter()
            .map(|p| load_likelihoods(&at(p)))
            .collect::<Result<_>>()?;
        let truth = match &self.truth_mesh {
            Some(m) => Some(load_mesh(&at(m), self.truth_labels.as_deref().map(at).as_deref())?),
            None => None,
        };
        Ok(Dataset {
            mesh,
            cameras,
            images,
            likelihoods,
            truth,
        })
    }
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text.as_bytes())
}

/// Reads a JSON document, reporting parse errors against `path`.
pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Creates `dir` and its parents.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes text to a file.
pub fn save_text(text: &str, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use semref::synth::shapes::tetrahedron;

    #[test]
    fn tetrahedron_obj_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = tetrahedron();
        let p = dir.path().join("t.obj");
        save_mesh(&m, &p).unwrap();
        let back = load_mesh(&p, None).unwrap();
        assert_eq!(back.num_vertices(), 4);
        assert_eq!(back.num_faces(), 4);
        assert_eq!(back, m);
    }

    #[test]
    fn short_sidecar_names_counts() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.obj");
        save_mesh(&tetrahedron(), &p).unwrap();
        fs::write(sidecar_path(&p), "1\n2\n3\n").unwrap();
        let err = load_mesh(&p, None).unwrap_err();
        assert!(err.to_string().contains("3 vs 4"), "{err}");
        assert!(err.is_validation());
    }

    #[test]
    fn obj_accepts_slashes_and_negative_indices() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.obj");
        fs::write(&p, "# c\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2//1 -1\n").unwrap();
        fs::write(sidecar_path(&p), "7\n").unwrap();
        let m = load_mesh(&p, None).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2]]);
        assert_eq!(m.labels, vec![7]);
    }

    #[test]
    fn ply_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = tetrahedron();
        m.labels = vec![1, 2, 3, 4];
        let p = dir.path().join("t.ply");
        save_mesh(&m, &p).unwrap();
        assert_eq!(load_mesh(&p, None).unwrap(), m);
        let mut bytes = fs::read(&p).unwrap();
        bytes.pop();
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_mesh(&p, None), Err(Error::Format { .. })));
    }

    #[test]
    fn pgm_values_scale_to_unit_range() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let mut bytes = b"P5\n# two by two\n2 2\n255\n".to_vec();
        bytes.extend([0u8, 255, 255, 0]);
        fs::write(&p, &bytes).unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0, 1.0, 0.0]);
        save_image(&img, &p).unwrap();
        assert_eq!(load_image(&p).unwrap(), img);
    }

    #[test]
    fn ppm_has_three_channels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.ppm");
        let mut bytes = b"P6 1 1 255\n".to_vec();
        bytes.extend([0u8, 51, 255]);
        fs::write(&p, &bytes).unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.data(), &[0.0, 0.2, 1.0]);
    }

    #[test]
    fn likelihoods_are_renormalized() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.semf");
        let mut bytes = b"SEMF1 2 1 2\n".to_vec();
        for v in [1.5f32, 0.5, 1.0, 1.0] {
            bytes.extend(v.to_le_bytes());
        }
        fs::write(&p, &bytes).unwrap();
        let l = load_likelihoods(&p).unwrap();
        assert_eq!(l.data(), &[0.75, 0.25, 0.5, 0.5]);
    }

    #[test]
    fn truncated_likelihoods_report_byte_counts() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.semf");
        let mut bytes = b"SEMF1 2 2 3\n".to_vec();
        bytes.extend([0u8; 40]);
        fs::write(&p, &bytes).unwrap();
        let msg = load_likelihoods(&p).unwrap_err().to_string();
        assert!(msg.contains("expected 48 bytes, found 40"), "{msg}");
    }

    #[test]
    fn camera_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cam = Camera::look_at(
            Vec3::new(3.0, -4.0, 5.0),
            Vec3::new(0.1, 0.2, 0.0),
            Vec3::z(),
            123.4,
            64,
            48,
        )
        .unwrap();
        let p = dir.path().join("c.txt");
        save_camera(&cam, &p).unwrap();
        assert_eq!(load_camera(&p).unwrap(), cam);
        fs::write(&p, "1 0 1\n0 1 1\n0 0 1\n").unwrap();
        assert!(matches!(load_camera(&p), Err(Error::Format { .. })));
    }
}
