//! Lifting per-view layouts to world-frame 3D and merging them into one
//! scene layout.
//!
//! Two elements merge when they share a kind, their normals agree within 5
//! degrees, their planes are mutually within the distance threshold over the
//! overlap of their polygons, and each polygon centroid is visible
//! (unoccluded by the other view's layout planes) from the other camera.
//! Merging is single-linkage over that symmetric pairwise relation, which
//! makes fusion idempotent and monotone in the threshold.

use std::path::Path;

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::layout::{ElementKind, Layout2D};

/// Default plane-distance threshold for merging, meters.
pub const DEFAULT_FUSION_THRESHOLD: f64 = 0.1;
/// Normal agreement bound for merging, degrees.
pub const FUSION_NORMAL_DEG: f64 = 5.0;

/// World-frame plane: `normal . x = offset` with unit normal.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WorldPlane {
    pub normal: [f64; 3],
    pub offset: f64,
}

impl WorldPlane {
    pub fn normal_vec(&self) -> Vector3<f64> {
        Vector3::from(self.normal)
    }

    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal_vec().dot(p) - self.offset
    }
}

/// One layout element lifted to world coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct Element3D {
    pub view: usize,
    pub element: usize,
    pub kind: ElementKind,
    pub plane: WorldPlane,
    /// Boundary polygon in world coordinates, on the plane.
    pub polygon: Vec<[f64; 3]>,
    pub peak_probability: f64,
}

impl Element3D {
    pub fn centroid(&self) -> Vector3<f64> {
        let mut c = Vector3::zeros();
        for p in &self.polygon {
            c += Vector3::from(*p);
        }
        c / self.polygon.len().max(1) as f64
    }
}

/// Per-view 3D layout: lifted elements plus the camera center (needed by the
/// mutual-visibility test during fusion).
#[derive(Debug, Clone, Serialize)]
pub struct Layout3D {
    pub view: usize,
    pub camera_center: [f64; 3],
    pub elements: Vec<Element3D>,
}

impl Layout3D {
    pub fn camera(&self) -> Vector3<f64> {
        Vector3::from(self.camera_center)
    }
}

/// Place each element's plane at its regressed depth along its orientation
/// and transform to world; boundary polygons come from intersecting the
/// corner-loop rays with the plane.
pub fn lift(
    layout: &Layout2D,
    element_depths: &[f64],
    peak_probabilities: &[f64],
    pose: &Pose,
) -> Result<Layout3D> {
    if element_depths.len() != layout.elements().len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} depths", layout.elements().len()),
            actual: format!("{}", element_depths.len()),
        });
    }
    let cam = layout.camera();
    let mut elements = Vec::with_capacity(layout.elements().len());
    for (e, el) in layout.elements().iter().enumerate() {
        let d = element_depths[e];
        if !(d > 0.0) {
            return Err(Error::domain(format!("element {e} has non-positive depth {d}")));
        }
        // Camera-frame plane n.x = -d -> world plane (R n).x = (R n).t - d.
        let n_world = pose.transform_dir(el.orientation);
        let offset = n_world.dot(&pose.center()) - d;

        let plane = crate::geometry::Plane::new(el.orientation, d)?;
        let mut polygon = Vec::with_capacity(el.corner_loop.len());
        for &ci in &el.corner_loop {
            let corner = &layout.corners()[ci];
            let ray = cam.pixel_to_ray(corner.pixel())?;
            let t = plane.ray_intersection(&ray).ok_or_else(|| {
                Error::domain(format!(
                    "corner {ci} of element {e} does not see its plane at depth {d}"
                ))
            })?;
            let world = pose.transform_point(ray * t);
            polygon.push([world.x, world.y, world.z]);
        }
        elements.push(Element3D {
            view: 0,
            element: e,
            kind: el.kind,
            plane: WorldPlane {
                normal: [n_world.x, n_world.y, n_world.z],
                offset,
            },
            polygon,
            peak_probability: peak_probabilities.get(e).copied().unwrap_or(1.0),
        });
    }
    Ok(Layout3D {
        view: 0,
        camera_center: {
            let c = pose.center();
            [c.x, c.y, c.z]
        },
        elements,
    })
}

/// Distance below the camera of the single floor element.
pub fn camera_height(layout3d: &Layout3D) -> Result<f64> {
    let mut floors = layout3d
        .elements
        .iter()
        .filter(|e| e.kind == ElementKind::Floor);
    let floor = floors
        .next()
        .ok_or_else(|| Error::domain("layout has no floor element"))?;
    if floors.next().is_some() {
        return Err(Error::domain("layout has more than one floor element"));
    }
    let height = floor.plane.signed_distance(&layout3d.camera());
    if height <= 0.0 {
        return Err(Error::domain(format!(
            "camera is below the floor plane (signed distance {height})"
        )));
    }
    Ok(height)
}

// ---------------------------------------------------------------------------
// Fusion
// ---------------------------------------------------------------------------

/// One fused element: merged plane, contributing members, export polygon.
#[derive(Debug, Clone, Serialize)]
pub struct FusedElement {
    pub kind: ElementKind,
    pub plane: WorldPlane,
    /// (view, element) pairs merged into this element.
    pub members: Vec<(usize, usize)>,
    /// Convex outline of the member polygons projected on the merged plane.
    pub polygon: Vec<[f64; 3]>,
    pub total_weight: f64,
}

/// Globally fused scene layout.
#[derive(Debug, Clone, Serialize)]
pub struct SceneLayout {
    pub elements: Vec<FusedElement>,
    pub threshold: f64,
}

/// Symmetric pairwise merge test between elements of two views.
pub fn elements_mergeable(
    a: &Element3D,
    view_a: &Layout3D,
    b: &Element3D,
    view_b: &Layout3D,
    threshold: f64,
) -> bool {
    if a.kind != b.kind {
        return false;
    }
    let na = a.plane.normal_vec();
    let nb = b.plane.normal_vec();
    if na.dot(&nb) < FUSION_NORMAL_DEG.to_radians().cos() {
        return false;
    }
    if !mutual_plane_distance_ok(a, b, threshold) {
        return false;
    }
    // Each centroid must be visible from the other camera, unoccluded by the
    // other view's layout planes.
    visible_from(&b.centroid(), view_a, a.element) && visible_from(&a.centroid(), view_b, b.element)
}

/// Mutual point-to-plane distances over the overlap of the two polygons'
/// projections onto the average plane. No overlap means no merge.
fn mutual_plane_distance_ok(a: &Element3D, b: &Element3D, threshold: f64) -> bool {
    let normal = (a.plane.normal_vec() + b.plane.normal_vec()).normalize();
    let (tangent, bitangent) = plane_basis(&normal);
    let project = |poly: &[[f64; 3]]| -> Vec<[f64; 2]> {
        poly.iter()
            .map(|p| {
                let v = Vector3::from(*p);
                [tangent.dot(&v), bitangent.dot(&v)]
            })
            .collect()
    };
    let poly_a = project(&a.polygon);
    let poly_b = project(&b.polygon);

    let mut any_overlap = false;
    let mut max_dist = 0.0f64;
    {
        let mut check =
            |points: &[[f64; 3]], proj: &[[f64; 2]], other_proj: &[[f64; 2]], other: &WorldPlane| {
                for (p, q) in points.iter().zip(proj) {
                    if point_in_poly_2d(other_proj, q) {
                        any_overlap = true;
                        max_dist = max_dist.max(other.signed_distance(&Vector3::from(*p)).abs());
                    }
                }
            };
        check(&a.polygon, &poly_a, &poly_b, &b.plane);
        check(&b.polygon, &poly_b, &poly_a, &a.plane);
        let centroid_a = a.centroid();
        let centroid_b = b.centroid();
        check(
            &[[centroid_a.x, centroid_a.y, centroid_a.z]],
            &[[tangent.dot(&centroid_a), bitangent.dot(&centroid_a)]],
            &poly_b,
            &b.plane,
        );
        check(
            &[[centroid_b.x, centroid_b.y, centroid_b.z]],
            &[[tangent.dot(&centroid_b), bitangent.dot(&centroid_b)]],
            &poly_a,
            &a.plane,
        );
    }
    any_overlap && max_dist < threshold
}

fn plane_basis(normal: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let seed = if normal.x.abs() < 0.9 {
        Vector3::new(1.0, 0.0, 0.0)
    } else {
        Vector3::new(0.0, 1.0, 0.0)
    };
    let tangent = normal.cross(&seed).normalize();
    let bitangent = normal.cross(&tangent);
    (tangent, bitangent)
}

fn point_in_poly_2d(poly: &[[f64; 2]], p: &[f64; 2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let t = (p[1] - a[1]) / (b[1] - a[1]);
            if p[0] < a[0] + t * (b[0] - a[0]) {
                inside = !inside;
            }
        }
    }
    inside
}

/// Is `point` visible from the camera of `view`, i.e. not occluded by any of
/// the view's layout planes other than `skip_element`?
fn visible_from(point: &Vector3<f64>, view: &Layout3D, skip_element: usize) -> bool {
    let origin = view.camera();
    let dir = point - origin;
    let len = dir.norm();
    if len < 1e-9 {
        return true;
    }
    for el in &view.elements {
        if el.element == skip_element {
            continue;
        }
        let n = el.plane.normal_vec();
        let denom = n.dot(&dir);
        if denom.abs() < 1e-12 {
            continue;
        }
        let t = (el.plane.offset - n.dot(&origin)) / denom;
        // Strictly between the camera and the point, with a margin for
        // shared edges.
        if t <= 1e-6 || t >= 1.0 - 1e-6 {
            continue;
        }
        let hit = origin + dir * t;
        if point_in_polygon_3d(&el.polygon, &n, &hit) {
            return false;
        }
    }
    true
}

fn point_in_polygon_3d(polygon: &[[f64; 3]], normal: &Vector3<f64>, p: &Vector3<f64>) -> bool {
    if polygon.len() < 3 {
        return false;
    }
    let (tangent, bitangent) = plane_basis(normal);
    let proj: Vec<[f64; 2]> = polygon
        .iter()
        .map(|q| {
            let v = Vector3::from(*q);
            [tangent.dot(&v), bitangent.dot(&v)]
        })
        .collect();
    point_in_poly_2d(&proj, &[tangent.dot(p), bitangent.dot(p)])
}

/// Merge per-view layouts into a scene layout.
///
/// Builds the symmetric pairwise merge graph, merges connected components,
/// and averages planes weighted by peak probability. Deterministic: elements
/// are ordered by (view id, element id).
pub fn fuse(views: &[Layout3D], threshold: f64) -> Result<SceneLayout> {
    if views.is_empty() {
        return Err(Error::domain("fuse needs at least one view"));
    }
    if !(threshold > 0.0) {
        return Err(Error::domain(format!(
            "fusion threshold must be positive, got {threshold}"
        )));
    }
    // Flatten in deterministic order.
    let mut flat: Vec<(usize, &Element3D, &Layout3D)> = Vec::new();
    let mut order: Vec<(usize, usize)> = Vec::new();
    for (vi, view) in views.iter().enumerate() {
        for el in &view.elements {
            order.push((vi, el.element));
            flat.push((vi, el, view));
        }
    }
    let n = flat.len();

    // Union-find over pairwise-mergeable elements (single linkage).
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = i;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (vi, a, view_a) = flat[i];
            let (vj, b, view_b) = flat[j];
            if vi == vj {
                continue; // elements of one view never merge with each other
            }
            if elements_mergeable(a, view_a, b, view_b, threshold) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    // Collect components keyed by their smallest member.
    let mut components: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        components.entry(root).or_default().push(i);
    }

    let mut fused = Vec::with_capacity(components.len());
    for (_, members) in components {
        let mut normal_acc = Vector3::zeros();
        let mut offset_acc = 0.0f64;
        let mut weight_acc = 0.0f64;
        for &i in &members {
            let (_, el, _) = flat[i];
            let w = el.peak_probability.max(1e-12);
            normal_acc += el.plane.normal_vec() * w;
            offset_acc += el.plane.offset * w;
            weight_acc += w;
        }
        let normal = normal_acc.normalize();
        let offset = offset_acc / weight_acc;
        let plane = WorldPlane {
            normal: [normal.x, normal.y, normal.z],
            offset,
        };
        // Export outline: convex hull of all member polygon vertices
        // projected onto the merged plane.
        let mut points3: Vec<Vector3<f64>> = Vec::new();
        for &i in &members {
            for p in &flat[i].1.polygon {
                let v = Vector3::from(*p);
                points3.push(v - normal * plane.signed_distance(&v));
            }
        }
        let polygon = convex_outline(&points3, &normal);
        fused.push(FusedElement {
            kind: flat[members[0]].1.kind,
            plane,
            members: members.iter().map(|&i| order[i]).collect(),
            polygon,
            total_weight: weight_acc,
        });
    }
    Ok(SceneLayout {
        elements: fused,
        threshold,
    })
}

/// View layouts with every element's plane replaced by its fused plane,
/// for coherency evaluation after fusion.
pub fn apply_fused_planes(scene: &SceneLayout, views: &[Layout3D]) -> Vec<Layout3D> {
    let mut out = views.to_vec();
    for fused in &scene.elements {
        for &(vi, ei) in &fused.members {
            if let Some(view) = out.get_mut(vi) {
                for el in view.elements.iter_mut() {
                    if el.element == ei {
                        el.plane = fused.plane;
                    }
                }
            }
        }
    }
    out
}

/// Wrap fused elements as standalone single-element views, so a fused scene
/// can be fed through `fuse` again.
pub fn scene_as_views(scene: &SceneLayout, views: &[Layout3D]) -> Vec<Layout3D> {
    scene
        .elements
        .iter()
        .enumerate()
        .map(|(i, el)| {
            let (vi, _) = el.members[0];
            Layout3D {
                view: i,
                camera_center: views[vi].camera_center,
                elements: vec![Element3D {
                    view: i,
                    element: 0,
                    kind: el.kind,
                    plane: el.plane,
                    polygon: el.polygon.clone(),
                    peak_probability: el.total_weight,
                }],
            }
        })
        .collect()
}

/// 2D convex hull (Andrew monotone chain) of the points in the plane frame,
/// returned as 3D points.
fn convex_outline(points: &[Vector3<f64>], normal: &Vector3<f64>) -> Vec<[f64; 3]> {
    if points.len() < 3 {
        return points.iter().map(|p| [p.x, p.y, p.z]).collect();
    }
    let (tangent, bitangent) = plane_basis(normal);
    let mut proj: Vec<(f64, f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (tangent.dot(p), bitangent.dot(p), i))
        .collect();
    proj.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    proj.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    if proj.len() < 3 {
        return proj
            .iter()
            .map(|&(_, _, i)| {
                let p = points[i];
                [p.x, p.y, p.z]
            })
            .collect();
    }
    let cross = |o: &(f64, f64, usize), a: &(f64, f64, usize), b: &(f64, f64, usize)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64, usize)> = Vec::with_capacity(proj.len() * 2);
    // Lower then upper chain.
    for p in &proj {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower_len = hull.len() + 1;
    for p in proj.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull.iter()
        .map(|&(_, _, i)| {
            let p = points[i];
            [p.x, p.y, p.z]
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

impl SceneLayout {
    /// Triangulated ASCII PLY of the fused polygons.
    pub fn write_ply<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        let mut vertices: Vec<[f64; 3]> = Vec::new();
        let mut faces: Vec<[usize; 3]> = Vec::new();
        for el in &self.elements {
            let base = vertices.len();
            vertices.extend_from_slice(&el.polygon);
            // Fan triangulation; fused outlines are convex.
            for k in 1..el.polygon.len().saturating_sub(1) {
                faces.push([base, base + k, base + k + 1]);
            }
        }
        let mut text = String::new();
        text.push_str("ply\nformat ascii 1.0\n");
        text.push_str(&format!("element vertex {}\n", vertices.len()));
        text.push_str("property float x\nproperty float y\nproperty float z\n");
        text.push_str(&format!("element face {}\n", faces.len()));
        text.push_str("property list uchar int vertex_indices\nend_header\n");
        for v in &vertices {
            text.push_str(&format!("{:.6} {:.6} {:.6}\n", v[0], v[1], v[2]));
        }
        for f in &faces {
            text.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
        }
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// JSON plane list.
    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("scene layout serializes");
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
