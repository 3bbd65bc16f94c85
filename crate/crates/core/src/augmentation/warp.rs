//! Triangle meshes and piecewise affine texture warping.

use spade::{DelaunayTriangulation, HasPosition, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::raster::{Border, GrayImage};
use crate::shape::{shape_to_bbox, Shape};

const AREA_EPS: f64 = 1e-12;

pub type Point = (f64, f64);

struct IndexedVertex {
    position: Point2<f64>,
    index: usize,
}

impl HasPosition for IndexedVertex {
    type Scalar = f64;

    fn position(&self) -> Point2<f64> {
        self.position
    }
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1))
}

/// Delaunay triangulation of distinct points; returns index triples.
pub fn delaunay(points: &[Point]) -> Result<Vec<[usize; 3]>> {
    for (i, p) in points.iter().enumerate() {
        if !(p.0.is_finite() && p.1.is_finite()) {
            return Err(Error::NonFinite("mesh vertex"));
        }
        if points[..i].iter().any(|q| q == p) {
            return Err(Error::DegenerateTriangulation(format!(
                "duplicate vertex ({}, {})",
                p.0, p.1
            )));
        }
    }
    let mut tri: DelaunayTriangulation<IndexedVertex> = DelaunayTriangulation::new();
    for (index, &(x, y)) in points.iter().enumerate() {
        tri.insert(IndexedVertex {
            position: Point2::new(x, y),
            index,
        })
        .map_err(|e| Error::DegenerateTriangulation(format!("{e:?}")))?;
    }
    let triangles: Vec<[usize; 3]> = tri
        .inner_faces()
        .map(|f| f.vertices().map(|v| v.data().index))
        .filter(|t| signed_area(points[t[0]], points[t[1]], points[t[2]]).abs() > AREA_EPS)
        .collect();
    if triangles.is_empty() {
        return Err(Error::DegenerateTriangulation(
            "all vertices are collinear".into(),
        ));
    }
    Ok(triangles)
}

/// Row-major 2×3 affine map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine2(pub [[f64; 3]; 2]);

impl Affine2 {
    pub fn apply(&self, p: Point) -> Point {
        let m = &self.0;
        (
            m[0][0] * p.0 + m[0][1] * p.1 + m[0][2],
            m[1][0] * p.0 + m[1][1] * p.1 + m[1][2],
        )
    }
}

/// The affine map taking triangle `src` onto triangle `dst` vertex by vertex.
pub fn affine_from_triangles(src: [Point; 3], dst: [Point; 3]) -> Result<Affine2> {
    // Solve [x y 1] · [a b c]ᵀ = u for each output coordinate (Cramer's rule).
    let det = (src[1].0 - src[0].0) * (src[2].1 - src[0].1)
        - (src[2].0 - src[0].0) * (src[1].1 - src[0].1);
    if det.abs() < AREA_EPS {
        return Err(Error::DegenerateTriangulation(
            "source triangle has zero area".into(),
        ));
    }
    let solve = |u: [f64; 3]| -> [f64; 3] {
        let (x, y) = (
            [src[0].0, src[1].0, src[2].0],
            [src[0].1, src[1].1, src[2].1],
        );
        let a = (u[1] - u[0]) * (y[2] - y[0]) - (u[2] - u[0]) * (y[1] - y[0]);
        let b = (x[1] - x[0]) * (u[2] - u[0]) - (x[2] - x[0]) * (u[1] - u[0]);
        let (a, b) = (a / det, b / det);
        [a, b, u[0] - a * x[0] - b * y[0]]
    };
    Ok(Affine2([
        solve([dst[0].0, dst[1].0, dst[2].0]),
        solve([dst[0].1, dst[1].1, dst[2].1]),
    ]))
}

/// Source and destination vertices sharing one triangle topology.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpMesh {
    pub vertices_src: Vec<Point>,
    pub vertices_dst: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
}

impl WarpMesh {
    pub fn new(
        vertices_src: Vec<Point>,
        vertices_dst: Vec<Point>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self> {
        if vertices_src.len() != vertices_dst.len() {
            return Err(Error::DimensionMismatch {
                context: "mesh vertices",
                expected: vertices_src.len(),
                actual: vertices_dst.len(),
            });
        }
        for t in &triangles {
            if t.iter().any(|&i| i >= vertices_src.len()) {
                return Err(Error::DegenerateTriangulation(format!(
                    "triangle {t:?} references a missing vertex"
                )));
            }
            let [a, b, c] = t.map(|i| vertices_src[i]);
            if signed_area(a, b, c).abs() <= AREA_EPS {
                return Err(Error::DegenerateTriangulation(format!(
                    "triangle {t:?} has zero area"
                )));
            }
        }
        Ok(WarpMesh {
            vertices_src,
            vertices_dst,
            triangles,
        })
    }

    /// Mesh whose source and destination coincide.
    pub fn identity(vertices: Vec<Point>) -> Result<Self> {
        let triangles = delaunay(&vertices)?;
        WarpMesh::new(vertices.clone(), vertices, triangles)
    }

    pub fn src_triangle(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|i| self.vertices_src[i])
    }

    pub fn dst_triangle(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|i| self.vertices_dst[i])
    }

    /// True when some destination triangle is degenerate or has flipped
    /// orientation relative to its source.
    pub fn folds(&self) -> bool {
        (0..self.triangles.len()).any(|t| {
            let [a, b, c] = self.src_triangle(t);
            let [p, q, r] = self.dst_triangle(t);
            signed_area(a, b, c) * signed_area(p, q, r) <= 0.0
        })
    }
}

fn border_distance(p: Point, w: f64, h: f64) -> f64 {
    p.0.min(w - 1.0 - p.0).min(p.1).min(h - 1.0 - p.1).max(0.0)
}

/// Mesh over landmarks plus external anchor points.
///
/// External points are the corners and edge midpoints of the source shape's
/// box inflated by 50% (clamped to the image) and the four image corners. In
/// the destination they move by the mean landmark displacement, scaled down
/// linearly to zero at the image border.
pub fn build_warp_mesh(src: &Shape, dst: &Shape, image_size: (usize, usize)) -> Result<WarpMesh> {
    if src.num_landmarks() != dst.num_landmarks() {
        return Err(Error::DimensionMismatch {
            context: "warp mesh landmarks",
            expected: src.num_landmarks(),
            actual: dst.num_landmarks(),
        });
    }
    shape_to_bbox(dst)?;
    let b = shape_to_bbox(src)?;
    let (w, h) = (image_size.0 as f64, image_size.1 as f64);
    let (cx, cy) = b.center();
    let (hw, hh) = (0.75 * b.width(), 0.75 * b.height());
    let clamp = |x: f64, y: f64| (x.clamp(0.0, w - 1.0), y.clamp(0.0, h - 1.0));
    let mut external = Vec::with_capacity(12);
    for (sx, sy) in [
        (-1.0, -1.0),
        (0.0, -1.0),
        (1.0, -1.0),
        (1.0, 0.0),
        (1.0, 1.0),
        (0.0, 1.0),
        (-1.0, 1.0),
        (-1.0, 0.0),
    ] {
        external.push(clamp(cx + sx * hw, cy + sy * hh));
    }
    external.extend([(0.0, 0.0), (w - 1.0, 0.0), (w - 1.0, h - 1.0), (0.0, h - 1.0)]);

    let l = src.num_landmarks() as f64;
    let (mut dx, mut dy) = (0.0, 0.0);
    for ((sx, sy), (tx, ty)) in src.iter_points().zip(dst.iter_points()) {
        dx += (tx - sx) / l;
        dy += (ty - sy) / l;
    }
    let (mx, my) = src
        .iter_points()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0 / l, acc.1 + p.1 / l));
    let reference = border_distance((mx, my), w, h).max(1.0);

    let mut vertices_src: Vec<Point> = src.iter_points().collect();
    let mut vertices_dst: Vec<Point> = dst.iter_points().collect();
    for p in external {
        if vertices_src
            .iter()
            .any(|q| (q.0 - p.0).abs() < 1e-9 && (q.1 - p.1).abs() < 1e-9)
        {
            continue;
        }
        let decay = (border_distance(p, w, h) / reference).min(1.0);
        vertices_src.push(p);
        vertices_dst.push((p.0 + decay * dx, p.1 + decay * dy));
    }

    let triangles = delaunay(&vertices_src)?;
    WarpMesh::new(vertices_src, vertices_dst, triangles)
}

fn barycentric(p: Point, t: &[Point; 3]) -> (f64, f64, f64) {
    let area = signed_area(t[0], t[1], t[2]);
    let l0 = signed_area(p, t[1], t[2]) / area;
    let l1 = signed_area(t[0], p, t[2]) / area;
    (l0, l1, 1.0 - l0 - l1)
}

fn contains(p: Point, t: &[Point; 3]) -> bool {
    let (a, b, c) = barycentric(p, t);
    const TOL: f64 = -1e-9;
    a >= TOL && b >= TOL && c >= TOL
}

/// Per-pixel index of the first destination triangle covering it.
pub fn coverage(mesh: &WarpMesh, width: usize, height: usize) -> Vec<Option<usize>> {
    let mut owner = vec![None; width * height];
    for t in 0..mesh.triangles.len() {
        let tri = mesh.dst_triangle(t);
        if signed_area(tri[0], tri[1], tri[2]).abs() <= AREA_EPS {
            continue;
        }
        let xs = tri.map(|p| p.0);
        let ys = tri.map(|p| p.1);
        let x0 = xs.iter().cloned().fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let y0 = ys.iter().cloned().fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let x1 = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil();
        let y1 = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil();
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        let x1 = (x1 as usize).min(width - 1);
        let y1 = (y1 as usize).min(height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let slot = &mut owner[y * width + x];
                if slot.is_none() && contains((x as f64, y as f64), &tri) {
                    *slot = Some(t);
                }
            }
        }
    }
    owner
}

/// Maps the texture under each source triangle onto its destination triangle.
///
/// Destination pixels are pulled back through the inverse affine map of
/// their triangle and sampled bilinearly; pixels covered by no triangle keep
/// the source value.
pub fn piecewise_affine_warp(image: &GrayImage, mesh: &WarpMesh) -> Result<GrayImage> {
    let (w, h) = (image.width(), image.height());
    let mut inverse = Vec::with_capacity(mesh.triangles.len());
    for t in 0..mesh.triangles.len() {
        let (src, dst) = (mesh.src_triangle(t), mesh.dst_triangle(t));
        if src == dst {
            inverse.push(None);
        } else {
            // Folded destination triangles never own pixels; see `coverage`.
            inverse.push(affine_from_triangles(dst, src).ok());
        }
    }
    let owner = coverage(mesh, w, h);
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            if let Some(t) = owner[y * w + x] {
                if let Some(map) = inverse[t] {
                    let (sx, sy) = map.apply((x as f64, y as f64));
                    out.set(x, y, image.sample(sx, sy, Border::Clamp));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gives_two_triangles() {
        let tris = delaunay(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]).unwrap();
        assert_eq!(tris.len(), 2);
    }

    #[test]
    fn collinear_and_duplicate_inputs_rejected() {
        assert!(delaunay(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(delaunay(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 1.0)]).is_err());
    }

    #[test]
    fn affine_scale_by_two() {
        let a = affine_from_triangles(
            [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)],
            [(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)],
        )
        .unwrap();
        // Three-equation oracle: the images of the three vertices.
        assert_eq!(a.0, [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0]]);
        let b = affine_from_triangles(
            [(1.0, 1.0), (4.0, 2.0), (2.0, 5.0)],
            [(3.0, -1.0), (0.0, 7.0), (6.0, 6.0)],
        )
        .unwrap();
        for (s, d) in [((1.0, 1.0), (3.0, -1.0)), ((4.0, 2.0), (0.0, 7.0)), ((2.0, 5.0), (6.0, 6.0))] {
            let p = b.apply(s);
            assert!((p.0 - d.0).abs() < 1e-12 && (p.1 - d.1).abs() < 1e-12);
        }
        assert!(affine_from_triangles([(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)], [(0.0, 0.0); 3]).is_err());
    }

    fn face() -> Shape {
        Shape::from_points(&[
            (30.0, 35.0),
            (50.0, 34.0),
            (40.0, 45.0),
            (33.0, 55.0),
            (47.0, 55.5),
        ])
        .unwrap()
    }

    #[test]
    fn identity_mesh_has_identical_triangles_and_full_coverage() {
        let mesh = build_warp_mesh(&face(), &face(), (80, 70)).unwrap();
        for t in 0..mesh.triangles.len() {
            assert_eq!(mesh.src_triangle(t), mesh.dst_triangle(t));
        }
        let cov = coverage(&mesh, 80, 70);
        assert_eq!(cov.iter().filter(|c| c.is_none()).count(), 0);
    }

    #[test]
    fn displaced_mesh_still_covers_every_pixel() {
        let dst = face().translated(4.0, -2.0);
        let mesh = build_warp_mesh(&face(), &dst, (80, 70)).unwrap();
        assert_eq!(mesh.vertices_src.len(), 5 + 12);
        // Image corners stay fixed.
        let n = mesh.vertices_src.len();
        assert_eq!(mesh.vertices_dst[n - 4], (0.0, 0.0));
        assert_eq!(mesh.vertices_dst[n - 2], (79.0, 69.0));
        let cov = coverage(&mesh, 80, 70);
        assert_eq!(cov.iter().filter(|c| c.is_none()).count(), 0);
    }

    #[test]
    fn identity_warp_is_bit_exact() {
        let img = GrayImage::from_fn(80, 70, |x, y| ((x * 31 + y * 17) % 23) as f64 / 23.0);
        let mesh = build_warp_mesh(&face(), &face(), (80, 70)).unwrap();
        assert_eq!(piecewise_affine_warp(&img, &mesh).unwrap(), img);
    }

    #[test]
    fn translation_mesh_matches_shifted_pattern() {
        let period = 8.0;
        let pattern = |x: f64| 0.5 + 0.4 * (std::f64::consts::TAU * x / period).sin();
        let img = GrayImage::from_fn(64, 48, |x, _| pattern(x as f64));
        let mut src = Vec::new();
        for gy in 0..5 {
            for gx in 0..5 {
                src.push((8.0 + 10.0 * gx as f64 + 0.3 * gy as f64, 4.0 + 9.0 * gy as f64));
            }
        }
        let dst: Vec<Point> = src.iter().map(|p| (p.0 + 3.0, p.1)).collect();
        let triangles = delaunay(&src).unwrap();
        let mesh = WarpMesh::new(src, dst, triangles).unwrap();
        let out = piecewise_affine_warp(&img, &mesh).unwrap();
        let cov = coverage(&mesh, 64, 48);
        let mut checked = 0;
        for y in 0..48 {
            for x in 0..64 {
                if cov[y * 64 + x].is_some() {
                    let expect = pattern(x as f64 - 3.0);
                    assert!((out.get(x, y) - expect).abs() <= 1e-6);
                    checked += 1;
                } else {
                    assert_eq!(out.get(x, y), img.get(x, y));
                }
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn mesh_validation() {
        assert!(WarpMesh::new(vec![(0.0, 0.0)], vec![], vec![]).is_err());
        assert!(WarpMesh::new(
            vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)],
            vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)],
            vec![[0, 1, 2]]
        )
        .is_err());
        assert!(WarpMesh::new(vec![(0.0, 0.0)], vec![(0.0, 0.0)], vec![[0, 1, 2]]).is_err());
    }

    #[test]
    fn fold_detection() {
        let src = vec![(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)];
        let tri = vec![[0, 1, 2]];
        let same = WarpMesh::new(src.clone(), src.clone(), tri.clone()).unwrap();
        assert!(!same.folds());
        let mirrored = vec![(0.0, 0.0), (-10.0, 0.0), (0.0, 10.0)];
        assert!(WarpMesh::new(src.clone(), mirrored, tri.clone()).unwrap().folds());
        let collapsed = vec![(0.0, 0.0), (5.0, 5.0), (10.0, 10.0)];
        assert!(WarpMesh::new(src, collapsed, tri).unwrap().folds());
    }
}
