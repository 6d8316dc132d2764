//! Synthetic room renderer: textured axis-aligned rooms rendered to
//! equirectangular panoramas with ground-truth layout, depth, and semantics.
//!
//! Rooms are rectilinear prisms (axis-aligned floor polygon extruded to the
//! ceiling height) plus optional axis-aligned occluder boxes labeled as
//! clutter. Layout depth is always measured against the layout planes,
//! ignoring occluders; the image and semantic passes see everything.

use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::confidence::SemanticLabel;
use crate::error::{Error, Result};
use crate::geometry::{Pose, SphericalCamera};
use crate::layout::{Corner, Edge, ElementKind, Layout2D, LayoutElement};
use crate::raster::{Raster, RgbRaster};

// ---------------------------------------------------------------------------
// Procedural textures
// ---------------------------------------------------------------------------

/// Procedural surface texture. `Constant` produces the textureless failure
/// mode that defeats photometric matching; the other two are matchable.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Texture {
    Checker {
        scale: f64,
        colors: [[u8; 3]; 2],
    },
    Noise {
        scale: f64,
        seed: u64,
        colors: [[u8; 3]; 2],
        /// Octave count; wavelengths run scale, scale/2, ... scale/2^(n-1).
        #[serde(default = "default_octaves")]
        octaves: u32,
    },
    Constant {
        color: [u8; 3],
    },
}

impl Texture {
    /// Sample at surface coordinates (a, b) with a band limit: `footprint` is
    /// the on-surface extent of one image pixel (meters), and content near or
    /// below that wavelength fades out (analytic mip filtering). Keeps the
    /// rendered texture alias-free at any distance and obliquity, so views
    /// agree on what they see.
    fn sample(&self, a: f64, b: f64, footprint: f64) -> [f64; 3] {
        match self {
            Texture::Checker { scale, colors } => {
                let ia = (a / scale).floor() as i64;
                let ib = (b / scale).floor() as i64;
                let c = colors[((ia + ib).rem_euclid(2)) as usize];
                let w = band_weight(*scale, footprint);
                let mid = [
                    (colors[0][0] as f64 + colors[1][0] as f64) / 2.0,
                    (colors[0][1] as f64 + colors[1][1] as f64) / 2.0,
                    (colors[0][2] as f64 + colors[1][2] as f64) / 2.0,
                ];
                [
                    mid[0] + (c[0] as f64 - mid[0]) * w,
                    mid[1] + (c[1] as f64 - mid[1]) * w,
                    mid[2] + (c[2] as f64 - mid[2]) * w,
                ]
            }
            Texture::Noise {
                scale,
                seed,
                colors,
                octaves,
            } => {
                let t = fractal_noise(a / scale, b / scale, *seed, *octaves, footprint / scale);
                let c0 = colors[0];
                let c1 = colors[1];
                [
                    c0[0] as f64 + (c1[0] as f64 - c0[0] as f64) * t,
                    c0[1] as f64 + (c1[1] as f64 - c0[1] as f64) * t,
                    c0[2] as f64 + (c1[2] as f64 - c0[2] as f64) * t,
                ]
            }
            Texture::Constant { color } => [color[0] as f64, color[1] as f64, color[2] as f64],
        }
    }
}

/// 1 when the wavelength spans at least four pixel footprints, 0 below two.
fn band_weight(wavelength: f64, footprint: f64) -> f64 {
    ((wavelength / footprint.max(1e-9) - 2.0) / 2.0).clamp(0.0, 1.0)
}

fn hash2(ix: i64, iy: i64, seed: u64) -> f64 {
    let mut h = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(ix as u64)
        .wrapping_mul(0xBF58_476D_1CE4_E5B9)
        .wrapping_add(iy as u64);
    h ^= h >> 30;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^= h >> 31;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smooth_noise(x: f64, y: f64, seed: u64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let sx = fx * fx * (3.0 - 2.0 * fx);
    let sy = fy * fy * (3.0 - 2.0 * fy);
    let (ix, iy) = (x0 as i64, y0 as i64);
    let v00 = hash2(ix, iy, seed);
    let v10 = hash2(ix + 1, iy, seed);
    let v01 = hash2(ix, iy + 1, seed);
    let v11 = hash2(ix + 1, iy + 1, seed);
    let top = v00 + (v10 - v00) * sx;
    let bot = v01 + (v11 - v01) * sx;
    top + (bot - top) * sy
}

fn default_octaves() -> u32 {
    3
}

fn fractal_noise(x: f64, y: f64, seed: u64, octaves: u32, footprint_rel: f64) -> f64 {
    let mut value = 0.0;
    let mut amplitude = 0.5;
    let mut frequency = 1.0;
    let mut total = 0.0;
    for octave in 0..octaves.max(1) as u64 {
        let weight = amplitude * band_weight(1.0 / frequency, footprint_rel);
        value += weight * smooth_noise(x * frequency, y * frequency, seed.wrapping_add(octave));
        total += weight;
        amplitude *= 0.7;
        frequency *= 2.0;
    }
    if total <= 0.0 {
        return 0.5;
    }
    (value / total).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Room specification
// ---------------------------------------------------------------------------

/// Axis-aligned occluder box with a clutter semantic label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OccluderBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub texture: Texture,
}

/// Per-surface textures; `walls` may list one texture per polygon edge or a
/// single texture reused for all walls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoomTextures {
    pub floor: Texture,
    pub ceiling: Texture,
    pub walls: Vec<Texture>,
}

/// Axis-aligned room: a rectilinear floor polygon extruded to `height`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoomSpec {
    /// Floor polygon vertices (x, z) in meters; edges must be axis-aligned.
    pub floor: Vec<[f64; 2]>,
    pub height: f64,
    pub textures: RoomTextures,
    #[serde(default)]
    pub occluders: Vec<OccluderBox>,
}

impl RoomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.floor.len() < 4 {
            return Err(Error::domain("floor polygon needs at least 4 vertices"));
        }
        if !(self.height > 0.0) {
            return Err(Error::domain("room height must be positive"));
        }
        let n = self.floor.len();
        for i in 0..n {
            let a = self.floor[i];
            let b = self.floor[(i + 1) % n];
            let dx = (b[0] - a[0]).abs();
            let dz = (b[1] - a[1]).abs();
            if !((dx > 1e-9) ^ (dz > 1e-9)) {
                return Err(Error::domain(format!(
                    "floor edge {i} is not axis-aligned or has zero length"
                )));
            }
        }
        for (i, occ) in self.occluders.iter().enumerate() {
            for k in 0..3 {
                if !(occ.min[k] < occ.max[k]) {
                    return Err(Error::domain(format!("occluder {i} has empty extent on axis {k}")));
                }
            }
            if occ.min[1] < -1e-9 || occ.max[1] > self.height + 1e-9 {
                return Err(Error::domain(format!("occluder {i} extends outside floor..ceiling")));
            }
            for &(x, z) in &[
                (occ.min[0], occ.min[2]),
                (occ.max[0], occ.min[2]),
                (occ.min[0], occ.max[2]),
                (occ.max[0], occ.max[2]),
            ] {
                if !point_in_polygon(&self.floor, x, z) {
                    return Err(Error::domain(format!("occluder {i} is not inside the room")));
                }
            }
        }
        if self.textures.walls.len() != 1 && self.textures.walls.len() != n {
            return Err(Error::domain(format!(
                "expected 1 or {n} wall textures, got {}",
                self.textures.walls.len()
            )));
        }
        Ok(())
    }

    /// Counter-clockwise copy of the floor polygon (in the x-right, z-up sense).
    fn floor_ccw(&self) -> Vec<[f64; 2]> {
        let mut poly = self.floor.clone();
        let n = poly.len();
        let area2: f64 = (0..n)
            .map(|i| {
                let a = poly[i];
                let b = poly[(i + 1) % n];
                a[0] * b[1] - b[0] * a[1]
            })
            .sum();
        if area2 < 0.0 {
            poly.reverse();
        }
        poly
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        point_in_polygon(&self.floor, x, z)
    }
}

fn point_in_polygon(poly: &[[f64; 2]], x: f64, z: f64) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a[1] > z) != (b[1] > z) {
            let t = (z - a[1]) / (b[1] - a[1]);
            if x < a[0] + t * (b[0] - a[0]) {
                inside = !inside;
            }
        }
    }
    inside
}

fn distance_to_segment(poly_a: [f64; 2], poly_b: [f64; 2], x: f64, z: f64) -> f64 {
    let (ax, az) = (poly_a[0], poly_a[1]);
    let (bx, bz) = (poly_b[0], poly_b[1]);
    let (dx, dz) = (bx - ax, bz - az);
    let len2 = dx * dx + dz * dz;
    let t = (((x - ax) * dx + (z - az) * dz) / len2).clamp(0.0, 1.0);
    let (px, pz) = (ax + t * dx, az + t * dz);
    ((x - px).powi(2) + (z - pz).powi(2)).sqrt()
}

// ---------------------------------------------------------------------------
// World model used by the renderer
// ---------------------------------------------------------------------------

/// Layout surface of the room: floor, ceiling, or one wall per polygon edge.
struct Surface {
    kind: ElementKind,
    /// World plane: normal points into the room, `normal . x = offset`.
    normal: Vector3<f64>,
    offset: f64,
    /// Wall extent: edge endpoints and texture frame; unused for floor/ceiling.
    edge: Option<([f64; 2], [f64; 2])>,
    texture: Texture,
}

struct RoomModel {
    surfaces: Vec<Surface>,
    occluders: Vec<OccluderBox>,
    height: f64,
    floor_poly: Vec<[f64; 2]>,
}

impl RoomModel {
    fn build(spec: &RoomSpec) -> Result<Self> {
        spec.validate()?;
        let poly = spec.floor_ccw();
        let n = poly.len();
        let mut surfaces = Vec::with_capacity(n + 2);
        surfaces.push(Surface {
            kind: ElementKind::Floor,
            normal: Vector3::new(0.0, 1.0, 0.0),
            offset: 0.0,
            edge: None,
            texture: spec.textures.floor.clone(),
        });
        surfaces.push(Surface {
            kind: ElementKind::Ceiling,
            normal: Vector3::new(0.0, -1.0, 0.0),
            offset: -spec.height,
            edge: None,
            texture: spec.textures.ceiling.clone(),
        });
        for i in 0..n {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            let (dx, dz) = (b[0] - a[0], b[1] - a[1]);
            let len = (dx * dx + dz * dz).sqrt();
            // Interior lies to the left of a CCW edge in the (x, z) plane.
            let normal = Vector3::new(-dz / len, 0.0, dx / len);
            let offset = normal.x * a[0] + normal.z * a[1];
            let texture = if spec.textures.walls.len() == 1 {
                spec.textures.walls[0].clone()
            } else {
                spec.textures.walls[i].clone()
            };
            surfaces.push(Surface {
                kind: ElementKind::Wall,
                normal,
                offset,
                edge: Some((a, b)),
                texture,
            });
        }
        Ok(RoomModel {
            surfaces,
            occluders: spec.occluders.clone(),
            height: spec.height,
            floor_poly: poly,
        })
    }

    /// Nearest layout surface hit by a world ray from `origin`.
    fn cast_layout(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in self.surfaces.iter().enumerate() {
            let denom = s.normal.dot(dir);
            if denom.abs() < 1e-12 {
                continue;
            }
            let t = (s.offset - s.normal.dot(origin)) / denom;
            if t <= 1e-9 {
                continue;
            }
            let p = origin + dir * t;
            let on_surface = match (&s.kind, &s.edge) {
                (ElementKind::Wall, Some((a, b))) => {
                    if p.y < -1e-9 || p.y > self.height + 1e-9 {
                        false
                    } else {
                        let along = (p.x - a[0]) * (b[0] - a[0]) + (p.z - a[1]) * (b[1] - a[1]);
                        let len2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
                        along >= -1e-9 && along <= len2 + 1e-9
                    }
                }
                _ => point_in_polygon(&self.floor_poly, p.x, p.z),
            };
            if on_surface && best.map_or(true, |(_, bt)| t < bt) {
                best = Some((i, t));
            }
        }
        best
    }

    /// Nearest occluder hit (slab method), if any.
    fn cast_occluders(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, b) in self.occluders.iter().enumerate() {
            let mut t_near = f64::NEG_INFINITY;
            let mut t_far = f64::INFINITY;
            let mut ok = true;
            for k in 0..3 {
                let o = origin[k];
                let d = dir[k];
                if d.abs() < 1e-15 {
                    if o < b.min[k] || o > b.max[k] {
                        ok = false;
                        break;
                    }
                } else {
                    let mut t0 = (b.min[k] - o) / d;
                    let mut t1 = (b.max[k] - o) / d;
                    if t0 > t1 {
                        std::mem::swap(&mut t0, &mut t1);
                    }
                    t_near = t_near.max(t0);
                    t_far = t_far.min(t1);
                }
            }
            if ok && t_near <= t_far && t_near > 1e-9 && best.map_or(true, |(_, bt)| t_near < bt) {
                best = Some((i, t_near));
            }
        }
        best
    }

    /// On-surface extent of one image pixel at hit distance `t`.
    fn footprint(t: f64, pixel_angle: f64, normal: &Vector3<f64>, dir: &Vector3<f64>) -> f64 {
        let cos_incidence = normal.dot(dir).abs().max(0.15);
        t * pixel_angle / cos_incidence
    }

    fn surface_color(
        &self,
        surface: usize,
        p: &Vector3<f64>,
        t: f64,
        dir: &Vector3<f64>,
        pixel_angle: f64,
    ) -> [f64; 3] {
        let s = &self.surfaces[surface];
        let fp = Self::footprint(t, pixel_angle, &s.normal, dir);
        match (&s.kind, &s.edge) {
            (ElementKind::Wall, Some((a, _))) => {
                let along = (p.x - a[0]).hypot(p.z - a[1]);
                s.texture.sample(along, p.y, fp)
            }
            _ => s.texture.sample(p.x, p.z, fp),
        }
    }

    fn occluder_color(
        &self,
        occluder: usize,
        p: &Vector3<f64>,
        t: f64,
        dir: &Vector3<f64>,
        pixel_angle: f64,
    ) -> [f64; 3] {
        let b = &self.occluders[occluder];
        // Texture frame from the face the ray entered.
        let eps = 1e-6;
        let tex = &b.texture;
        let (normal, coords) = if (p.x - b.min[0]).abs() < eps || (p.x - b.max[0]).abs() < eps {
            (Vector3::new(1.0, 0.0, 0.0), (p.z, p.y))
        } else if (p.y - b.min[1]).abs() < eps || (p.y - b.max[1]).abs() < eps {
            (Vector3::new(0.0, 1.0, 0.0), (p.x, p.z))
        } else {
            (Vector3::new(0.0, 0.0, 1.0), (p.x, p.y))
        };
        let fp = Self::footprint(t, pixel_angle, &normal, dir);
        tex.sample(coords.0, coords.1, fp)
    }
}

// ---------------------------------------------------------------------------
// Rendered views
// ---------------------------------------------------------------------------

/// One rendered panorama with its ground truth.
#[derive(Debug, Clone)]
pub struct RenderedView {
    pub image: RgbRaster,
    /// Per-pixel layout depth: distance from the camera center to the layout
    /// plane of the pixel's element, along the element normal (meters).
    pub depth_gt: Raster<f64>,
    /// Per-pixel semantic label ([`SemanticLabel`] palette), occluders included.
    pub semantic_gt: Raster<u8>,
    pub layout_gt: Layout2D,
    pub pose: Pose,
}

impl RenderedView {
    /// Ground-truth plane depth of one layout element (constant over its region).
    pub fn gt_element_depth(&self, element: usize) -> f64 {
        let (u, v) = self
            .layout_gt
            .region_pixels(element)
            .next()
            .expect("validated layouts have non-empty regions");
        self.depth_gt.get(u, v)
    }

    /// Fraction of this element's region that the semantic pass labels clutter.
    pub fn clutter_fraction(&self, element: usize) -> f64 {
        let mut clutter = 0usize;
        let mut total = 0usize;
        for (u, v) in self.layout_gt.region_pixels(element) {
            total += 1;
            if self.semantic_gt.get(u, v) == SemanticLabel::Clutter.to_u8() {
                clutter += 1;
            }
        }
        clutter as f64 / total.max(1) as f64
    }
}

/// Render one view of the room.
///
/// The RGB pass is supersampled 2x with a box filter and sees occluders; the
/// semantic pass sees occluders at native resolution; depth and layout ground
/// truth are computed against layout planes only.
pub fn render(spec: &RoomSpec, pose: &Pose, cam: &SphericalCamera) -> Result<RenderedView> {
    let model = RoomModel::build(spec)?;
    let c = pose.center();
    if !(c.y > 0.0 && c.y < spec.height) || !model_contains(&model, c.x, c.z) {
        return Err(Error::domain(format!(
            "camera center ({}, {}, {}) is outside the room",
            c.x, c.y, c.z
        )));
    }

    let (w, h) = (cam.width(), cam.height());

    // Layout pass: element label + plane depth per pixel.
    let mut labels = vec![0u16; w * h];
    let mut depth = vec![0f64; w * h];
    // Plane depth per surface is a constant: distance from the camera center.
    let surface_depth: Vec<f64> = model
        .surfaces
        .iter()
        .map(|s| s.normal.dot(&c) - s.offset)
        .collect();
    let mut surface_pixels = vec![0usize; model.surfaces.len()];
    for v in 0..h {
        for u in 0..w {
            let ray = cam.pixel_to_ray_unchecked([u as f64 + 0.5, v as f64 + 0.5]);
            let dir = pose.transform_dir(ray);
            let (surface, _) = model
                .cast_layout(&c, &dir)
                .ok_or_else(|| Error::domain("layout ray escaped the room (degenerate geometry)"))?;
            labels[v * w + u] = surface as u16;
            depth[v * w + u] = surface_depth[surface];
            surface_pixels[surface] += 1;
        }
    }

    // Semantic pass: occluders win when hit first.
    let mut semantic = vec![0u8; w * h];
    for v in 0..h {
        for u in 0..w {
            let ray = cam.pixel_to_ray_unchecked([u as f64 + 0.5, v as f64 + 0.5]);
            let dir = pose.transform_dir(ray);
            let surface = labels[v * w + u] as usize;
            let t_layout = {
                let s = &model.surfaces[surface];
                (s.offset - s.normal.dot(&c)) / s.normal.dot(&dir)
            };
            let label = match model.cast_occluders(&c, &dir) {
                Some((_, t_occ)) if t_occ < t_layout => SemanticLabel::Clutter,
                _ => match model.surfaces[surface].kind {
                    ElementKind::Floor => SemanticLabel::Floor,
                    ElementKind::Ceiling => SemanticLabel::Ceiling,
                    ElementKind::Wall => SemanticLabel::Wall,
                },
            };
            semantic[v * w + u] = label.to_u8();
        }
    }

    // RGB pass, 2x supersampled.
    let (w2, h2) = (w * 2, h * 2);
    let mut rgb_hi = vec![0f64; w2 * h2 * 3];
    for v in 0..h2 {
        for u in 0..w2 {
            let px = [u as f64 / 2.0 + 0.25, v as f64 / 2.0 + 0.25];
            let ray = cam.pixel_to_ray_unchecked(px);
            let dir = pose.transform_dir(ray);
            let layout_hit = model.cast_layout(&c, &dir);
            let occ_hit = model.cast_occluders(&c, &dir);
            let pixel_angle = std::f64::consts::PI / h2 as f64;
            let color = match (layout_hit, occ_hit) {
                (Some((_, tl)), Some((oi, to))) if to < tl => {
                    let p = c + dir * to;
                    model.occluder_color(oi, &p, to, &dir, pixel_angle)
                }
                (Some((si, tl)), _) => {
                    let p = c + dir * tl;
                    model.surface_color(si, &p, tl, &dir, pixel_angle)
                }
                (None, Some((oi, to))) => {
                    let p = c + dir * to;
                    model.occluder_color(oi, &p, to, &dir, pixel_angle)
                }
                (None, None) => [0.0, 0.0, 0.0],
            };
            let i = (v * w2 + u) * 3;
            rgb_hi[i] = color[0];
            rgb_hi[i + 1] = color[1];
            rgb_hi[i + 2] = color[2];
        }
    }
    let mut image = RgbRaster::filled(w, h, [0, 0, 0]);
    for v in 0..h {
        for u in 0..w {
            let mut acc = [0f64; 3];
            for (dv, du) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let i = ((2 * v + dv) * w2 + (2 * u + du)) * 3;
                acc[0] += rgb_hi[i];
                acc[1] += rgb_hi[i + 1];
                acc[2] += rgb_hi[i + 2];
            }
            image.set(
                u,
                v,
                [
                    (acc[0] / 4.0).round().clamp(0.0, 255.0) as u8,
                    (acc[1] / 4.0).round().clamp(0.0, 255.0) as u8,
                    (acc[2] / 4.0).round().clamp(0.0, 255.0) as u8,
                ],
            );
        }
    }

    let layout_gt = build_layout_gt(&model, pose, cam, &labels, &surface_pixels)?;

    Ok(RenderedView {
        image,
        depth_gt: Raster::from_vec(w, h, depth)?,
        semantic_gt: Raster::from_vec(w, h, semantic)?,
        layout_gt,
        pose: *pose,
    })
}

fn model_contains(model: &RoomModel, x: f64, z: f64) -> bool {
    point_in_polygon(&model.floor_poly, x, z)
}

/// Derive the ground-truth 2D layout analytically from the room geometry.
fn build_layout_gt(
    model: &RoomModel,
    pose: &Pose,
    cam: &SphericalCamera,
    surface_labels: &[u16],
    surface_pixels: &[usize],
) -> Result<Layout2D> {
    let n = model.floor_poly.len();
    let mut corners = Vec::with_capacity(2 * n);
    // Corner ordering: top (ceiling) ring first, then bottom (floor) ring.
    for ring in [model.height, 0.0] {
        for vtx in &model.floor_poly {
            let world = Vector3::new(vtx[0], ring, vtx[1]);
            let local = pose.inverse_transform_point(world);
            let px = cam.ray_to_pixel(local).map_err(|_| {
                Error::domain("room corner coincides with a camera center")
            })?;
            corners.push(Corner {
                u: px[0],
                v: px[1],
                relative_depth: local.norm(),
            });
        }
    }
    let top = |i: usize| i % n;
    let bottom = |i: usize| n + (i % n);

    let mut edges = Vec::new();
    for i in 0..n {
        edges.push(Edge(top(i), top(i + 1)));
        edges.push(Edge(bottom(i), bottom(i + 1)));
        edges.push(Edge(top(i), bottom(i)));
    }

    // Elements in surface order (floor, ceiling, walls), dropping invisible ones.
    let mut elements = Vec::new();
    let mut surface_to_element = vec![u16::MAX; model.surfaces.len()];
    for (si, s) in model.surfaces.iter().enumerate() {
        if surface_pixels[si] == 0 {
            continue;
        }
        let orientation_world = s.normal;
        let orientation = pose.inverse_transform_dir(orientation_world);
        let corner_loop = match s.kind {
            ElementKind::Floor => (0..n).map(bottom).collect::<Vec<_>>(),
            ElementKind::Ceiling => (0..n).map(top).collect::<Vec<_>>(),
            ElementKind::Wall => {
                let i = si - 2;
                vec![top(i), top(i + 1), bottom(i + 1), bottom(i)]
            }
        };
        surface_to_element[si] = elements.len() as u16;
        elements.push(LayoutElement {
            kind: s.kind,
            orientation,
            corner_loop,
            pixel_count: surface_pixels[si],
        });
    }

    // Drop edges whose every adjacent element disappeared.
    let kept_edges: Vec<Edge> = edges
        .into_iter()
        .filter(|e| {
            elements.iter().any(|el| {
                let lp = &el.corner_loop;
                (0..lp.len()).any(|i| {
                    let a = lp[i];
                    let b = lp[(i + 1) % lp.len()];
                    (a == e.0 && b == e.1) || (a == e.1 && b == e.0)
                })
            })
        })
        .collect();

    let labels = Raster::from_vec(
        cam.width(),
        cam.height(),
        surface_labels
            .iter()
            .map(|&s| surface_to_element[s as usize])
            .collect(),
    )?;

    Layout2D::new(*cam, corners, kept_edges, elements, labels)
}

// ---------------------------------------------------------------------------
// Scene specification and multi-view generation
// ---------------------------------------------------------------------------

/// Explicitly placed view: camera center plus yaw about the up axis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ViewSpec {
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
}

/// Scene spec: a room, a camera size, and either explicit views or a count of
/// randomly sampled ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub room: RoomSpec,
    pub camera: CameraSize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub views: Option<Vec<ViewSpec>>,
    #[serde(default = "default_n_views")]
    pub n_views: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CameraSize {
    pub width: usize,
    pub height: usize,
}

fn default_n_views() -> usize {
    3
}

impl SceneSpec {
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let spec: SceneSpec = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })?;
        spec.room.validate()?;
        Ok(spec)
    }
}

/// Render a deterministic multi-view scene.
///
/// Explicit views are used verbatim; otherwise `n_views` poses are sampled at
/// varied heights with a margin from the walls, seeded by `seed`.
pub fn make_scene(spec: &SceneSpec, n_views: usize, seed: u64) -> Result<Vec<RenderedView>> {
    let cam = SphericalCamera::new(spec.camera.width, spec.camera.height)?;
    let poses: Vec<Pose> = match &spec.views {
        Some(views) => {
            if views.is_empty() {
                return Err(Error::domain("scene spec lists zero views"));
            }
            views
                .iter()
                .map(|v| Pose::from_center_yaw(Vector3::from(v.position), v.yaw_deg.to_radians()))
                .collect()
        }
        None => sample_poses(&spec.room, n_views, seed)?,
    };
    poses
        .iter()
        .map(|pose| render(&spec.room, pose, &cam))
        .collect()
}

fn sample_poses(room: &RoomSpec, n_views: usize, seed: u64) -> Result<Vec<Pose>> {
    if n_views == 0 {
        return Err(Error::domain("n_views must be at least 1"));
    }
    room.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_z, mut max_z) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in &room.floor {
        min_x = min_x.min(v[0]);
        max_x = max_x.max(v[0]);
        min_z = min_z.min(v[1]);
        max_z = max_z.max(v[1]);
    }
    let margin = 0.3f64.min(0.2 * (max_x - min_x).min(max_z - min_z));
    let n_poly = room.floor.len();
    let mut poses = Vec::with_capacity(n_views);
    let mut attempts = 0usize;
    while poses.len() < n_views {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::domain("could not sample camera poses inside the room"));
        }
        let x = min_x + rng.gen::<f64>() * (max_x - min_x);
        let z = min_z + rng.gen::<f64>() * (max_z - min_z);
        if !room.contains(x, z) {
            continue;
        }
        let near_wall = (0..n_poly).any(|i| {
            distance_to_segment(room.floor[i], room.floor[(i + 1) % n_poly], x, z) < margin
        });
        if near_wall {
            continue;
        }
        // Varied heights exercise the scale metric across views.
        let y = room.height * (0.35 + 0.3 * rng.gen::<f64>());
        let yaw = rng.gen::<f64>() * std::f64::consts::TAU;
        poses.push(Pose::from_center_yaw(Vector3::new(x, y, z), yaw));
    }
    Ok(poses)
}

#[cfg(test)]
pub(crate) fn cuboid_spec(w: f64, l: f64, h: f64) -> RoomSpec {
    let half_w = w / 2.0;
    let half_l = l / 2.0;
    RoomSpec {
        floor: vec![
            [-half_w, -half_l],
            [half_w, -half_l],
            [half_w, half_l],
            [-half_w, half_l],
        ],
        height: h,
        textures: RoomTextures {
            floor: Texture::Noise {
                scale: 0.4,
                seed: 1,
                colors: [[235, 225, 210], [90, 70, 55]],
                octaves: 3,
            },
            ceiling: Texture::Noise {
                scale: 0.42,
                seed: 2,
                colors: [[245, 245, 245], [110, 115, 125]],
                octaves: 3,
            },
            walls: vec![Texture::Noise {
                scale: 0.45,
                seed: 3,
                colors: [[230, 215, 190], [70, 85, 105]],
                octaves: 3,
            }],
        },
        occluders: vec![],
    }
}
