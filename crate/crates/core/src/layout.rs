//! Per-view 2D layout representation: corners, edges, and planar elements
//! covering the whole panorama.
//!
//! Regions come either from a label raster (exact masks, the preferred path
//! when ground truth or a layout network provides them) or from rasterizing
//! the edge graph and flood filling the enclosed areas.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SphericalCamera;
use crate::raster::Raster;

/// Fitted normals within this angle of vertical snap to vertical.
const VERTICAL_SNAP_DEG: f64 = 15.0;

/// 2D layout corner with its relative (scale-free) depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    pub u: f64,
    pub v: f64,
    pub relative_depth: f64,
}

impl Corner {
    pub fn pixel(&self) -> [f64; 2] {
        [self.u, self.v]
    }
}

/// Undirected boundary edge between two corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge(pub usize, pub usize);

impl Edge {
    fn key(&self) -> (usize, usize) {
        (self.0.min(self.1), self.0.max(self.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Floor,
    Ceiling,
    Wall,
}

impl ElementKind {
    pub fn is_horizontal_surface(self) -> bool {
        matches!(self, ElementKind::Floor | ElementKind::Ceiling)
    }
}

impl std::fmt::Display for ElementKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ElementKind::Floor => write!(f, "floor"),
            ElementKind::Ceiling => write!(f, "ceiling"),
            ElementKind::Wall => write!(f, "wall"),
        }
    }
}

/// Planar layout element: a region of the panorama with a unit orientation.
#[derive(Debug, Clone)]
pub struct LayoutElement {
    pub kind: ElementKind,
    /// Unit plane orientation in the camera frame, facing the camera.
    pub orientation: Vector3<f64>,
    /// Corner indices of the boundary loop, in order.
    pub corner_loop: Vec<usize>,
    pub pixel_count: usize,
}

/// Per-view 2D layout: a piecewise planar model covering the whole panorama.
#[derive(Debug, Clone)]
pub struct Layout2D {
    cam: SphericalCamera,
    corners: Vec<Corner>,
    edges: Vec<Edge>,
    elements: Vec<LayoutElement>,
    /// Pixel -> element index; the per-element masks in one raster.
    labels: Raster<u16>,
}

impl Layout2D {
    /// Assemble and validate a layout from explicit parts and a label raster.
    pub fn new(
        cam: SphericalCamera,
        corners: Vec<Corner>,
        edges: Vec<Edge>,
        elements: Vec<LayoutElement>,
        labels: Raster<u16>,
    ) -> Result<Self> {
        if labels.width() != cam.width() || labels.height() != cam.height() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", cam.width(), cam.height()),
                actual: format!("{}x{}", labels.width(), labels.height()),
            });
        }
        if elements.is_empty() {
            return Err(Error::LayoutTopology("layout has no elements".into()));
        }
        for (i, c) in corners.iter().enumerate() {
            if !cam.contains(c.pixel()) {
                return Err(Error::domain(format!("corner {i} outside the image")));
            }
            if !(c.relative_depth > 0.0) {
                return Err(Error::domain(format!("corner {i} has non-positive relative depth")));
            }
        }
        for (i, e) in edges.iter().enumerate() {
            if e.0 == e.1 || e.0 >= corners.len() || e.1 >= corners.len() {
                return Err(Error::domain(format!("edge {i} has invalid corner indices")));
            }
        }
        // Every edge must back at least one element boundary.
        let loop_edges: BTreeSet<(usize, usize)> = elements
            .iter()
            .flat_map(|el| loop_edge_keys(&el.corner_loop))
            .collect();
        for (i, e) in edges.iter().enumerate() {
            if !loop_edges.contains(&e.key()) {
                return Err(Error::LayoutTopology(format!(
                    "edge {i} is not referenced by any element boundary"
                )));
            }
        }

        let mut layout = Layout2D {
            cam,
            corners,
            edges,
            elements,
            labels,
        };
        layout.recount_pixels()?;
        layout.validate_regions()?;
        layout.validate_orientations()?;
        Ok(layout)
    }

    fn recount_pixels(&mut self) -> Result<()> {
        let mut counts = vec![0usize; self.elements.len()];
        for &label in self.labels.data() {
            let label = label as usize;
            if label >= self.elements.len() {
                return Err(Error::LayoutTopology(format!(
                    "label {label} exceeds element count {}",
                    self.elements.len()
                )));
            }
            counts[label] += 1;
        }
        for (el, count) in self.elements.iter_mut().zip(&counts) {
            el.pixel_count = *count;
        }
        if let Some(i) = counts.iter().position(|&c| c == 0) {
            return Err(Error::LayoutTopology(format!("element {i} has an empty region")));
        }
        Ok(())
    }

    /// Regions must be 4-connected after longitude wraparound. Disjointness
    /// and full coverage hold by construction of the label raster.
    fn validate_regions(&self) -> Result<()> {
        let (w, h) = (self.labels.width(), self.labels.height());
        let mut seen = vec![false; w * h];
        let mut reached = vec![0usize; self.elements.len()];
        for start in 0..w * h {
            if seen[start] {
                continue;
            }
            let label = self.labels.data()[start];
            if reached[label as usize] > 0 {
                return Err(Error::LayoutTopology(format!(
                    "region of element {label} is not 4-connected"
                )));
            }
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            let mut size = 0usize;
            while let Some(idx) = queue.pop_front() {
                size += 1;
                let (u, v) = (idx % w, idx / w);
                let mut push = |nu: usize, nv: usize| {
                    let nidx = nv * w + nu;
                    if !seen[nidx] && self.labels.data()[nidx] == label {
                        seen[nidx] = true;
                        queue.push_back(nidx);
                    }
                };
                push((u + 1) % w, v);
                push((u + w - 1) % w, v);
                if v > 0 {
                    push(u, v - 1);
                }
                if v + 1 < h {
                    push(u, v + 1);
                }
            }
            reached[label as usize] = size;
        }
        Ok(())
    }

    fn validate_orientations(&self) -> Result<()> {
        for (i, el) in self.elements.iter().enumerate() {
            let n = el.orientation;
            if (n.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::domain(format!("element {i} orientation is not unit")));
            }
            let vertical = n.y.abs() > 1.0 - 1e-6;
            let horizontal = n.y.abs() < 1e-6;
            match el.kind {
                ElementKind::Floor | ElementKind::Ceiling if !vertical => {
                    return Err(Error::domain(format!(
                        "element {i} is {} but its orientation is not vertical",
                        el.kind
                    )));
                }
                ElementKind::Wall if !horizontal => {
                    return Err(Error::domain(format!(
                        "element {i} is a wall but its orientation is not horizontal"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn camera(&self) -> &SphericalCamera {
        &self.cam
    }

    pub fn corners(&self) -> &[Corner] {
        &self.corners
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn elements(&self) -> &[LayoutElement] {
        &self.elements
    }

    pub fn labels(&self) -> &Raster<u16> {
        &self.labels
    }

    /// Element index owning pixel (u, v).
    #[inline]
    pub fn element_at(&self, u: usize, v: usize) -> usize {
        self.labels.get(u, v) as usize
    }

    /// Pixels of one element's region, scanline order.
    pub fn region_pixels(&self, element: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.labels.width();
        self.labels
            .data()
            .iter()
            .enumerate()
            .filter(move |(_, &l)| l as usize == element)
            .map(move |(idx, _)| (idx % w, idx / w))
    }
}

fn loop_edge_keys(corner_loop: &[usize]) -> Vec<(usize, usize)> {
    let n = corner_loop.len();
    (0..n)
        .map(|i| {
            let a = corner_loop[i];
            let b = corner_loop[(i + 1) % n];
            (a.min(b), a.max(b))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Region extraction
// ---------------------------------------------------------------------------

/// Disjoint exhaustive partition of the panorama into flood-filled regions.
#[derive(Debug, Clone)]
pub struct RegionPartition {
    pub labels: Raster<u16>,
    pub count: usize,
}

impl RegionPartition {
    pub fn mask(&self, region: usize) -> Raster<bool> {
        self.labels.map(|l| l as usize == region)
    }

    pub fn pixel_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.count];
        for &l in self.labels.data() {
            counts[l as usize] += 1;
        }
        counts
    }
}

/// Rasterize the edge graph and flood fill the enclosed regions.
///
/// Boundary pixels join the region of their upper, then left, non-boundary
/// neighbor. Regions are numbered by first seed in scanline order.
pub fn extract_regions(
    corners: &[Corner],
    edges: &[Edge],
    cam: &SphericalCamera,
) -> Result<RegionPartition> {
    let (w, h) = (cam.width(), cam.height());
    let mut boundary = vec![false; w * h];
    for e in edges {
        if e.0 >= corners.len() || e.1 >= corners.len() {
            return Err(Error::domain(format!("edge references corner {} out of range", e.0.max(e.1))));
        }
        rasterize_edge(
            corners[e.0].pixel(),
            corners[e.1].pixel(),
            w,
            h,
            &mut boundary,
        );
    }

    const UNASSIGNED: u16 = u16::MAX;
    let mut labels = vec![UNASSIGNED; w * h];
    let mut count = 0usize;
    for start in 0..w * h {
        if boundary[start] || labels[start] != UNASSIGNED {
            continue;
        }
        if count >= u16::MAX as usize {
            return Err(Error::LayoutTopology("too many regions".into()));
        }
        let region = count as u16;
        count += 1;
        let mut queue = VecDeque::from([start]);
        labels[start] = region;
        while let Some(idx) = queue.pop_front() {
            let (u, v) = (idx % w, idx / w);
            let mut push = |nu: usize, nv: usize| {
                let nidx = nv * w + nu;
                if !boundary[nidx] && labels[nidx] == UNASSIGNED {
                    labels[nidx] = region;
                    queue.push_back(nidx);
                }
            };
            push((u + 1) % w, v);
            push((u + w - 1) % w, v);
            if v > 0 {
                push(u, v - 1);
            }
            if v + 1 < h {
                push(u, v + 1);
            }
        }
    }

    if count == 0 {
        return Err(Error::LayoutTopology(
            "boundary pixels cover the whole image".into(),
        ));
    }
    if !edges.is_empty() && count == 1 {
        return Err(Error::LayoutTopology(
            "open boundary: edges do not partition the image (one region floods everything)".into(),
        ));
    }

    // Assign boundary pixels: upper then left non-boundary neighbor first,
    // then sweep with any assigned neighbor until stable.
    for idx in 0..w * h {
        if !boundary[idx] {
            continue;
        }
        let (u, v) = (idx % w, idx / w);
        let up = if v > 0 { Some((v - 1) * w + u) } else { None };
        let left = (u + w - 1) % w + v * w;
        if let Some(up) = up {
            if !boundary[up] {
                labels[idx] = labels[up];
                continue;
            }
        }
        if !boundary[left] {
            labels[idx] = labels[left];
        }
    }
    loop {
        let mut changed = false;
        for idx in 0..w * h {
            if !boundary[idx] || labels[idx] != UNASSIGNED {
                continue;
            }
            let (u, v) = (idx % w, idx / w);
            let neighbors = [
                if v > 0 { Some((v - 1) * w + u) } else { None },
                Some((u + w - 1) % w + v * w),
                if v + 1 < h { Some((v + 1) * w + u) } else { None },
                Some((u + 1) % w + v * w),
            ];
            for n in neighbors.into_iter().flatten() {
                if labels[n] != UNASSIGNED {
                    labels[idx] = labels[n];
                    changed = true;
                    break;
                }
            }
        }
        if !changed {
            break;
        }
    }
    if labels.iter().any(|&l| l == UNASSIGNED) {
        return Err(Error::LayoutTopology(
            "boundary pixels could not be attributed to any region".into(),
        ));
    }

    Ok(RegionPartition {
        labels: Raster::from_vec(w, h, labels)?,
        count,
    })
}

/// 4-connected supercover rasterization of the segment, taking the shorter
/// way around the longitude seam.
fn rasterize_edge(p0: [f64; 2], p1: [f64; 2], w: usize, h: usize, boundary: &mut [bool]) {
    let mut du = p1[0] - p0[0];
    if du.abs() > w as f64 / 2.0 {
        du -= (w as f64) * du.signum();
    }
    let (x0, y0) = (p0[0], p0[1]);
    let (x1, y1) = (p0[0] + du, p1[1]);

    let mark = |boundary: &mut [bool], x: isize, y: isize| {
        let u = x.rem_euclid(w as isize) as usize;
        let v = y.clamp(0, h as isize - 1) as usize;
        boundary[v * w + u] = true;
    };

    let mut cx = x0.floor() as isize;
    let mut cy = y0.floor() as isize;
    let ex = x1.floor() as isize;
    let ey = y1.floor() as isize;
    mark(boundary, cx, cy);

    let dx = x1 - x0;
    let dy = y1 - y0;
    let step_x: isize = if dx > 0.0 { 1 } else { -1 };
    let step_y: isize = if dy > 0.0 { 1 } else { -1 };
    let mut t_max_x = if dx != 0.0 {
        let next = if dx > 0.0 { cx as f64 + 1.0 } else { cx as f64 };
        (next - x0) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy != 0.0 {
        let next = if dy > 0.0 { cy as f64 + 1.0 } else { cy as f64 };
        (next - y0) / dy
    } else {
        f64::INFINITY
    };
    let t_delta_x = if dx != 0.0 { (1.0 / dx).abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { (1.0 / dy).abs() } else { f64::INFINITY };

    let mut guard = 0usize;
    while (cx != ex || cy != ey) && guard < 4 * (w + h) {
        guard += 1;
        if t_max_x <= t_max_y {
            cx += step_x;
            t_max_x += t_delta_x;
        } else {
            cy += step_y;
            t_max_y += t_delta_y;
        }
        mark(boundary, cx, cy);
    }
}

// ---------------------------------------------------------------------------
// Element orientation
// ---------------------------------------------------------------------------

/// Snap a unit normal to exactly vertical when within 15 degrees of the up
/// axis, otherwise project it to the horizontal plane.
pub fn snap_orientation(n: Vector3<f64>) -> Result<Vector3<f64>> {
    let cos_snap = (VERTICAL_SNAP_DEG.to_radians()).cos();
    if n.y.abs() >= cos_snap {
        return Ok(Vector3::new(0.0, n.y.signum(), 0.0));
    }
    let horizontal = Vector3::new(n.x, 0.0, n.z);
    let norm = horizontal.norm();
    if norm < 1e-12 {
        return Err(Error::domain("cannot snap a vertical normal to horizontal"));
    }
    Ok(horizontal / norm)
}

/// Unit orientation of the plane best fitting the corners lifted along their
/// viewing rays, snapped to vertical or horizontal and signed to face the
/// camera.
pub fn element_orientation(
    corner_polygon: &[([f64; 2], f64)],
    cam: &SphericalCamera,
) -> Result<Vector3<f64>> {
    if corner_polygon.len() < 3 {
        return Err(Error::domain(format!(
            "need at least 3 corners, got {}",
            corner_polygon.len()
        )));
    }
    let max_depth = corner_polygon
        .iter()
        .map(|&(_, d)| d)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max_depth > 0.0) {
        return Err(Error::domain("corner depths must be positive"));
    }

    // Canonical scale: lifting with depths normalized by the maximum makes the
    // fit invariant to a global depth rescale up to rounding.
    let points: Vec<Vector3<f64>> = corner_polygon
        .iter()
        .map(|&(pixel, depth)| Ok(cam.pixel_to_ray(pixel)? * (depth / max_depth)))
        .collect::<Result<_>>()?;

    let centroid = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
    let mut cov = nalgebra::Matrix3::<f64>::zeros();
    for p in &points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eigen = nalgebra::SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
    let [smallest, middle, largest] = order;
    if eigen.eigenvalues[largest] <= 0.0
        || eigen.eigenvalues[middle] < 1e-12 * eigen.eigenvalues[largest]
    {
        return Err(Error::domain("corner polygon is collinear or degenerate"));
    }
    let normal = eigen.eigenvectors.column(smallest).into_owned().normalize();

    let snapped = snap_orientation(normal)?;
    // Face the camera: o . (mean point) < 0.
    if snapped.dot(&centroid) > 0.0 {
        Ok(-snapped)
    } else {
        Ok(snapped)
    }
}

// ---------------------------------------------------------------------------
// Evaluation loss over corner/edge maps
// ---------------------------------------------------------------------------

/// Per-pixel cross-entropy on corner probability maps plus L1 on edge maps,
/// summed over pixels.
pub fn layout_loss_2d(
    pred: (&Raster<f32>, &Raster<f32>),
    gt: (&Raster<f32>, &Raster<f32>),
) -> Result<f64> {
    let (pred_corners, pred_edges) = pred;
    let (gt_corners, gt_edges) = gt;
    for (a, b) in [
        (pred_corners, gt_corners),
        (pred_edges, gt_edges),
        (pred_corners, pred_edges),
    ] {
        if !a.same_shape(b) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", a.width(), a.height()),
                actual: format!("{}x{}", b.width(), b.height()),
            });
        }
    }
    let mut loss = 0.0f64;
    for (&p, &g) in pred_corners.data().iter().zip(gt_corners.data()) {
        let p = p as f64;
        let g = g as f64;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!(
                "predicted corner probability {p} outside (0, 1)"
            )));
        }
        loss -= g * p.ln() + (1.0 - g) * (1.0 - p).ln();
    }
    for (&p, &g) in pred_edges.data().iter().zip(gt_edges.data()) {
        loss += (p as f64 - g as f64).abs();
    }
    Ok(loss)
}

// ---------------------------------------------------------------------------
// JSON schema and loading
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ElementJson {
    kind: ElementKind,
    corners: Vec<usize>,
}

/// On-disk layout schema: corners, edges, per-element corner loops, and an
/// optional label-raster PNG with exact region masks.
#[derive(Debug, Serialize, Deserialize)]
pub struct LayoutJson {
    corners: Vec<Corner>,
    edges: Vec<[usize; 2]>,
    elements: Vec<ElementJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    regions: Option<String>,
}

impl Layout2D {
    /// Load a layout JSON (paths resolved relative to the JSON file).
    pub fn load<P: AsRef<Path>>(path: P, cam: &SphericalCamera) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let json: LayoutJson = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json(&json, cam, base)
    }

    pub fn from_json(json: &LayoutJson, cam: &SphericalCamera, base: &Path) -> Result<Self> {
        let corners = json.corners.clone();
        let edges: Vec<Edge> = json.edges.iter().map(|&[a, b]| Edge(a, b)).collect();

        let mut elements = Vec::with_capacity(json.elements.len());
        for el in &json.elements {
            let polygon: Vec<([f64; 2], f64)> = el
                .corners
                .iter()
                .map(|&i| {
                    corners
                        .get(i)
                        .map(|c| (c.pixel(), c.relative_depth))
                        .ok_or_else(|| Error::domain(format!("element references corner {i} out of range")))
                })
                .collect::<Result<_>>()?;
            let orientation = element_orientation(&polygon, cam)?;
            elements.push(LayoutElement {
                kind: el.kind,
                orientation,
                corner_loop: el.corners.clone(),
                pixel_count: 0,
            });
        }

        let labels = match &json.regions {
            Some(rel) => {
                let mask = Raster::<u8>::read_gray_png(base.join(rel))?;
                mask.map(|l| l as u16)
            }
            None => {
                let partition = extract_regions(&corners, &edges, cam)?;
                associate_regions(&partition, &corners, &elements, cam)?
            }
        };

        Layout2D::new(*cam, corners, edges, elements, labels)
    }

    /// Write the layout JSON plus the exact region label PNG next to it.
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        if self.elements.len() > 255 {
            return Err(Error::domain("cannot export more than 255 element labels to PNG"));
        }
        let regions_name = {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "layout".to_string());
            format!("{stem}_regions.png")
        };
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        self.labels.map(|l| l as u8).write_gray_png(base.join(&regions_name))?;
        let json = LayoutJson {
            corners: self.corners.clone(),
            edges: self.edges.iter().map(|e| [e.0, e.1]).collect(),
            elements: self
                .elements
                .iter()
                .map(|el| ElementJson {
                    kind: el.kind,
                    corners: el.corner_loop.clone(),
                })
                .collect(),
            regions: Some(regions_name),
        };
        let text = serde_json::to_string_pretty(&json).expect("layout serializes");
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Match flood-filled regions to elements via a representative interior pixel
/// per corner loop.
fn associate_regions(
    partition: &RegionPartition,
    corners: &[Corner],
    elements: &[LayoutElement],
    cam: &SphericalCamera,
) -> Result<Raster<u16>> {
    if partition.count != elements.len() {
        return Err(Error::LayoutTopology(format!(
            "extracted {} regions for {} elements",
            partition.count,
            elements.len()
        )));
    }
    let (w, h) = (cam.width(), cam.height());
    let mut region_to_element = vec![usize::MAX; partition.count];
    for (ei, el) in elements.iter().enumerate() {
        let rep = representative_pixel(el, corners, w, h)?;
        let region = partition.labels.get(rep.0, rep.1) as usize;
        if region_to_element[region] != usize::MAX {
            return Err(Error::LayoutTopology(format!(
                "elements {} and {ei} claim the same region",
                region_to_element[region]
            )));
        }
        region_to_element[region] = ei;
    }
    let data = partition
        .labels
        .data()
        .iter()
        .map(|&r| region_to_element[r as usize] as u16)
        .collect();
    Raster::from_vec(w, h, data)
}

/// Interior pixel of an element's loop: walls use the loop centroid
/// (longitude-aware); floors and ceilings shift the centroid toward their
/// pole, since their regions extend below/above the boundary loop.
fn representative_pixel(
    el: &LayoutElement,
    corners: &[Corner],
    w: usize,
    h: usize,
) -> Result<(usize, usize)> {
    if el.corner_loop.is_empty() {
        return Err(Error::LayoutTopology("element has an empty corner loop".into()));
    }
    let mut sin_sum = 0.0f64;
    let mut cos_sum = 0.0f64;
    let mut v_sum = 0.0f64;
    for &i in &el.corner_loop {
        let c = corners
            .get(i)
            .ok_or_else(|| Error::domain(format!("corner index {i} out of range")))?;
        let angle = c.u / w as f64 * std::f64::consts::TAU;
        sin_sum += angle.sin();
        cos_sum += angle.cos();
        v_sum += c.v;
    }
    let n = el.corner_loop.len() as f64;
    let mean_v = v_sum / n;
    let mean_u = if sin_sum.hypot(cos_sum) < 1e-9 {
        // Loop wraps the full longitude; any column works.
        w as f64 / 2.0
    } else {
        let angle = sin_sum.atan2(cos_sum);
        (angle / std::f64::consts::TAU).rem_euclid(1.0) * w as f64
    };
    let (u, v) = match el.kind {
        ElementKind::Wall => (mean_u, mean_v),
        ElementKind::Floor => (mean_u, (mean_v + h as f64) / 2.0),
        ElementKind::Ceiling => (mean_u, mean_v / 2.0),
    };
    let u = (u.floor() as usize).min(w - 1);
    let v = (v.floor() as usize).min(h - 1);
    Ok((u, v))
}
