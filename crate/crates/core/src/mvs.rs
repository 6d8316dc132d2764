//! Layout-oriented plane-sweep stereo.
//!
//! For every pixel of a layout element, hypothesis planes share the element's
//! orientation instead of the optical axis. Photometric costs over warped
//! patches become per-pixel probability distributions over depth, which are
//! compressed into one 1D probability map per element and regressed to a
//! single absolute depth by expectation.
//!
//! The deep feature extractor and 3D-UNet regularizer of learned MVS stacks
//! are replaced here by zero-mean-normalized photometric patches and a
//! separable box smoothing + softmin conversion.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::confidence::ConfidenceMap;
use crate::error::{Error, Result};
use crate::fusion::{lift, Layout3D};
use crate::geometry::{Plane, Pose, SphericalCamera};
use crate::layout::{ElementKind, Layout2D};
use crate::raster::Raster;

/// Cost assigned when no source view yields a valid warp.
pub const SENTINEL_COST: f64 = f64::INFINITY;

// ---------------------------------------------------------------------------
// Depth hypotheses
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisSpacing {
    Uniform,
    Inverse,
}

/// Strictly increasing depth hypothesis plan over [d_min, d_max].
#[derive(Debug, Clone)]
pub struct DepthHypotheses {
    values: Vec<f64>,
    spacing: HypothesisSpacing,
}

impl DepthHypotheses {
    pub fn new(d_min: f64, d_max: f64, count: usize, spacing: HypothesisSpacing) -> Result<Self> {
        if !(d_min > 0.0 && d_min < d_max) {
            return Err(Error::domain(format!(
                "need 0 < d_min < d_max, got [{d_min}, {d_max}]"
            )));
        }
        if count < 2 {
            return Err(Error::domain(format!(
                "need at least 2 hypotheses, got {count}"
            )));
        }
        let values = (0..count)
            .map(|i| {
                let t = i as f64 / (count - 1) as f64;
                match spacing {
                    HypothesisSpacing::Uniform => d_min + t * (d_max - d_min),
                    HypothesisSpacing::Inverse => {
                        1.0 / (1.0 / d_min + t * (1.0 / d_max - 1.0 / d_min))
                    }
                }
            })
            .collect();
        Ok(DepthHypotheses { values, spacing })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn d_min(&self) -> f64 {
        self.values[0]
    }

    pub fn d_max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn spacing(&self) -> HypothesisSpacing {
        self.spacing
    }

    /// Largest gap adjacent to the hypothesis nearest `depth`.
    pub fn local_spacing(&self, depth: f64) -> f64 {
        let k = self
            .values
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (*a - depth).abs().total_cmp(&(*b - depth).abs()))
            .map(|(i, _)| i)
            .unwrap();
        let before = if k > 0 {
            self.values[k] - self.values[k - 1]
        } else {
            0.0
        };
        let after = if k + 1 < self.values.len() {
            self.values[k + 1] - self.values[k]
        } else {
            0.0
        };
        before.max(after)
    }
}

// ---------------------------------------------------------------------------
// Views and parameters
// ---------------------------------------------------------------------------

/// Matching substrate of one panorama: grayscale intensities plus its pose.
#[derive(Debug, Clone)]
pub struct MatchView {
    pub luma: Raster<f32>,
    pub pose: Pose,
}

#[derive(Debug, Clone)]
pub struct ReconstructionParams {
    /// Patch half-width; the default 2 gives 5x5 patches.
    pub patch_radius: usize,
    /// Regions larger than this are subsampled by a deterministic stride.
    pub subsample_limit: usize,
    /// Softmin temperature, applied after costs are scaled to unit median.
    pub temperature: f64,
    /// Separable box smoothing radius on the sampled lattice; `None` disables.
    pub smoothing_radius: Option<usize>,
}

impl Default for ReconstructionParams {
    fn default() -> Self {
        ReconstructionParams {
            patch_radius: 2,
            subsample_limit: 20_000,
            temperature: 0.1,
            smoothing_radius: Some(2),
        }
    }
}

// ---------------------------------------------------------------------------
// Raw cost volume
// ---------------------------------------------------------------------------

/// Per-element slice of the raw cost volume over the sampled pixel lattice.
#[derive(Debug, Clone)]
pub struct ElementCosts {
    pub element: usize,
    /// Sampling stride: kept pixels have u % stride == 0 and v % stride == 0.
    pub stride: usize,
    /// Sampled pixels in scanline order.
    pub pixels: Vec<(u32, u32)>,
    /// Row-major pixels x hypotheses.
    pub costs: Vec<f64>,
    hyp_count: usize,
}

impl ElementCosts {
    pub fn cost(&self, pixel: usize, hyp: usize) -> f64 {
        self.costs[pixel * self.hyp_count + hyp]
    }
}

/// Raw matching cost volume (pixel x hypothesis), partitioned by element.
#[derive(Debug, Clone)]
pub struct RawCostVolume {
    pub elements: Vec<ElementCosts>,
    pub hyp_count: usize,
}

/// Photometric plane-sweep costs for every sampled pixel of every element.
///
/// For pixel p in element j at hypothesis d, a patch around p is warped into
/// every source view through the plane (o_j, d). Each patch is zero-mean
/// normalized; the cost is the variance of the source patches around the
/// cross-view mean (reference included), averaged over source views and patch
/// entries. Pixels whose warp fails for a view exclude that view; pixels with
/// no valid view get [`SENTINEL_COST`]. Zero-confidence pixels are skipped
/// (they cannot contribute downstream) unless the whole element carries zero
/// confidence, which keeps the fallback path computable.
pub fn matching_cost(
    ref_view: &MatchView,
    src_views: &[MatchView],
    layout: &Layout2D,
    hyp: &DepthHypotheses,
    conf: &ConfidenceMap,
    params: &ReconstructionParams,
) -> Result<RawCostVolume> {
    if src_views.is_empty() {
        return Err(Error::domain("matching_cost needs at least one source view"));
    }
    let ctx = SweepContext::new(ref_view, src_views, layout.camera())?;
    let elements = (0..layout.elements().len())
        .map(|e| element_cost_sweep(&ctx, layout, e, hyp, conf, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(RawCostVolume {
        elements,
        hyp_count: hyp.count(),
    })
}

/// Precomputed sweep state: ray lookup table and relative transforms.
struct SweepContext<'a> {
    cam: SphericalCamera,
    ref_luma: &'a Raster<f32>,
    src_lumas: Vec<&'a Raster<f32>>,
    /// x_src = rel_rot * x_ref + rel_t, per source view.
    rels: Vec<(Matrix3<f64>, Vector3<f64>)>,
    /// Viewing ray per integer texel center.
    rays: Vec<Vector3<f64>>,
}

impl<'a> SweepContext<'a> {
    fn new(
        ref_view: &'a MatchView,
        src_views: &'a [MatchView],
        cam: &SphericalCamera,
    ) -> Result<Self> {
        let (w, h) = (cam.width(), cam.height());
        for (i, v) in std::iter::once(ref_view).chain(src_views).enumerate() {
            if v.luma.width() != w || v.luma.height() != h {
                return Err(Error::ShapeMismatch {
                    expected: format!("{w}x{h}"),
                    actual: format!("view {i}: {}x{}", v.luma.width(), v.luma.height()),
                });
            }
        }
        let mut rays = Vec::with_capacity(w * h);
        for v in 0..h {
            for u in 0..w {
                rays.push(cam.pixel_to_ray_unchecked([u as f64 + 0.5, v as f64 + 0.5]));
            }
        }
        let rels = src_views
            .iter()
            .map(|src| {
                let rot = src.pose.rotation().transpose() * ref_view.pose.rotation();
                let t =
                    src.pose.rotation().transpose() * (ref_view.pose.center() - src.pose.center());
                (rot, t)
            })
            .collect();
        Ok(SweepContext {
            cam: *cam,
            ref_luma: &ref_view.luma,
            src_lumas: src_views.iter().map(|v| &v.luma).collect(),
            rels,
            rays,
        })
    }
}

/// Stride making the sampled count fit the subsample limit.
fn subsample_stride(region_pixels: usize, limit: usize) -> usize {
    if region_pixels <= limit {
        1
    } else {
        (region_pixels as f64 / limit as f64).sqrt().ceil() as usize
    }
}

fn element_cost_sweep(
    ctx: &SweepContext,
    layout: &Layout2D,
    element: usize,
    hyp: &DepthHypotheses,
    conf: &ConfidenceMap,
    params: &ReconstructionParams,
) -> Result<ElementCosts> {
    let el = &layout.elements()[element];
    let stride = subsample_stride(el.pixel_count, params.subsample_limit);
    let lattice: Vec<(u32, u32)> = layout
        .region_pixels(element)
        .filter(|&(u, v)| u % stride == 0 && v % stride == 0)
        .map(|(u, v)| (u as u32, v as u32))
        .collect();
    let any_weighted = lattice
        .iter()
        .any(|&(u, v)| conf.weight(u as usize, v as usize) > 0.0);
    let pixels: Vec<(u32, u32)> = if any_weighted {
        lattice
            .into_iter()
            .filter(|&(u, v)| conf.weight(u as usize, v as usize) > 0.0)
            .collect()
    } else {
        lattice
    };
    if pixels.is_empty() {
        return Err(Error::domain(format!(
            "element {element} has no sampled pixels at stride {stride}"
        )));
    }

    let hyp_count = hyp.count();
    let mut costs = vec![0.0f64; pixels.len() * hyp_count];
    let orientation = el.orientation;
    let src_usable = source_usability(ctx, orientation, hyp, params);
    costs
        .par_chunks_mut(hyp_count)
        .zip(pixels.par_iter())
        .for_each(|(row, &(u, v))| {
            pixel_cost_row(
                ctx,
                orientation,
                &src_usable,
                u as usize,
                v as usize,
                hyp,
                params,
                row,
            );
        });

    Ok(ElementCosts {
        element,
        stride,
        pixels,
        costs,
        hyp_count,
    })
}

/// The plane-induced warp into a source view degenerates when the hypothesis
/// plane passes close to that source's camera center (the warped patch
/// collapses onto the plane's horizon circle). Such (source, hypothesis)
/// pairs are unusable: the margin is the patch's angular footprint scaled by
/// depth.
fn source_usability(
    ctx: &SweepContext,
    orientation: Vector3<f64>,
    hyp: &DepthHypotheses,
    params: &ReconstructionParams,
) -> Vec<bool> {
    let n_src = ctx.rels.len();
    let footprint =
        2.0 * (2 * params.patch_radius + 1) as f64 * std::f64::consts::PI / ctx.cam.height() as f64;
    let mut usable = vec![true; n_src * hyp.count()];
    for (s, (rot, t)) in ctx.rels.iter().enumerate() {
        // Source camera center in the reference frame.
        let center = -(rot.transpose() * t);
        let d_singular = -orientation.dot(&center);
        for (hi, &d) in hyp.values().iter().enumerate() {
            usable[s * hyp.count() + hi] = (d - d_singular).abs() >= footprint * d;
        }
    }
    usable
}

/// Sweep one pixel across all hypotheses, writing one cost per hypothesis.
#[allow(clippy::too_many_arguments)]
fn pixel_cost_row(
    ctx: &SweepContext,
    orientation: Vector3<f64>,
    src_usable: &[bool],
    u: usize,
    v: usize,
    hyp: &DepthHypotheses,
    params: &ReconstructionParams,
    row: &mut [f64],
) {
    let (w, h) = (ctx.cam.width(), ctx.cam.height());
    let r = params.patch_radius as isize;
    let n_patch = ((2 * r + 1) * (2 * r + 1)) as usize;
    let n_src = ctx.src_lumas.len();

    // Patch texel coordinates (wrapped/clamped) and their rays.
    let mut coords = Vec::with_capacity(n_patch);
    for dv in -r..=r {
        for du in -r..=r {
            let up = (u as isize + du).rem_euclid(w as isize) as usize;
            let vp = (v as isize + dv).clamp(0, h as isize - 1) as usize;
            coords.push((up, vp));
        }
    }
    // Every patch ray must cross the plane in front of the camera.
    let mut inv_ndotr = Vec::with_capacity(n_patch);
    for &(up, vp) in &coords {
        let ray = &ctx.rays[vp * w + up];
        let ndotr = orientation.dot(ray);
        if ndotr >= -1e-12 {
            row.fill(SENTINEL_COST);
            return;
        }
        inv_ndotr.push(-1.0 / ndotr);
    }

    // Reference patch, normalized once.
    let mut ref_patch = vec![0.0f64; n_patch];
    for (k, &(up, vp)) in coords.iter().enumerate() {
        ref_patch[k] = ctx.ref_luma.get(up, vp) as f64;
    }
    normalize_patch(&mut ref_patch);

    // Rotated patch rays per source (hypothesis independent).
    let mut rot_rays = vec![Vector3::zeros(); n_src * n_patch];
    for (s, (rot, _)) in ctx.rels.iter().enumerate() {
        for (k, &(up, vp)) in coords.iter().enumerate() {
            rot_rays[s * n_patch + k] = rot * ctx.rays[vp * w + up];
        }
    }

    let mut patches: Vec<Vec<f64>> = vec![vec![0.0; n_patch]; 1 + n_src];
    patches[0].copy_from_slice(&ref_patch);
    let mut buf = vec![0.0f64; n_patch];

    for (hi, &d) in hyp.values().iter().enumerate() {
        let mut m = 1usize;
        for s in 0..n_src {
            if !src_usable[s * hyp.count() + hi] {
                continue;
            }
            let rel_t = ctx.rels[s].1;
            let mut valid = true;
            for k in 0..n_patch {
                let t = d * inv_ndotr[k];
                let p = rot_rays[s * n_patch + k] * t + rel_t;
                let norm = p.norm();
                if norm <= 1e-12 {
                    valid = false;
                    break;
                }
                let px = ctx.cam.ray_to_pixel_unchecked(p, norm);
                buf[k] = ctx.src_lumas[s].sample_bilinear(px[0], px[1]) as f64;
            }
            if valid {
                normalize_patch(&mut buf);
                patches[m].copy_from_slice(&buf);
                m += 1;
            }
        }
        if m == 1 {
            row[hi] = SENTINEL_COST;
            continue;
        }
        // Variance of the source patches around the cross-view mean
        // (reference included), averaged over sources and patch entries.
        let mut total = 0.0f64;
        for k in 0..n_patch {
            let mut mean = 0.0f64;
            for patch in patches.iter().take(m) {
                mean += patch[k];
            }
            mean /= m as f64;
            for patch in patches.iter().take(m).skip(1) {
                let d = patch[k] - mean;
                total += d * d;
            }
        }
        row[hi] = total / ((m - 1) as f64 * n_patch as f64);
    }
}

/// Zero-mean then unit-L2 normalization; near-constant patches become zeros.
fn normalize_patch(patch: &mut [f64]) {
    let n = patch.len() as f64;
    let mean = patch.iter().sum::<f64>() / n;
    for x in patch.iter_mut() {
        *x -= mean;
    }
    let norm = patch.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        patch.fill(0.0);
    } else {
        for x in patch.iter_mut() {
            *x /= norm;
        }
    }
}

// ---------------------------------------------------------------------------
// Cost -> probability
// ---------------------------------------------------------------------------

/// Per-pixel probability distributions over depth hypotheses for the sampled
/// pixel set. Every row sums to 1 within 1e-6.
#[derive(Debug, Clone)]
pub struct PixelProbVolume {
    pub pixels: Vec<(u32, u32)>,
    /// Row-major pixels x hypotheses.
    pub probs: Vec<f32>,
    pub hyp_count: usize,
}

impl PixelProbVolume {
    pub fn row(&self, pixel: usize) -> &[f32] {
        &self.probs[pixel * self.hyp_count..(pixel + 1) * self.hyp_count]
    }
}

/// Convert raw costs to per-pixel probabilities: per element, scale costs to
/// unit median, optionally box-smooth across the sampled lattice, then take a
/// softmin over hypotheses. Sentinel costs yield (near-)zero probability;
/// all-sentinel pixels fall back to a uniform distribution.
pub fn cost_to_probability(
    raw: &RawCostVolume,
    temperature: f64,
    smoothing_radius: Option<usize>,
) -> Result<PixelProbVolume> {
    if !(temperature > 0.0) {
        return Err(Error::domain(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let hyp_count = raw.hyp_count;
    let mut pixels = Vec::new();
    let mut probs = Vec::new();
    for el in &raw.elements {
        let mut costs = el.costs.clone();
        let scale = unit_median_scale(&costs);
        for c in costs.iter_mut() {
            *c *= scale;
        }
        if let Some(radius) = smoothing_radius {
            if radius > 0 {
                smooth_lattice(el, &mut costs, radius);
            }
        }
        for (pi, &(u, v)) in el.pixels.iter().enumerate() {
            pixels.push((u, v));
            let row = &costs[pi * hyp_count..(pi + 1) * hyp_count];
            let min = row.iter().copied().fold(f64::INFINITY, f64::min);
            if !min.is_finite() {
                probs.extend(std::iter::repeat(1.0f32 / hyp_count as f32).take(hyp_count));
                continue;
            }
            let weights: Vec<f64> = row
                .iter()
                .map(|&c| {
                    if c.is_finite() {
                        (-(c - min) / temperature).exp()
                    } else {
                        0.0
                    }
                })
                .collect();
            let total: f64 = weights.iter().sum();
            probs.extend(weights.iter().map(|&wgt| (wgt / total) as f32));
        }
    }
    Ok(PixelProbVolume {
        pixels,
        probs,
        hyp_count,
    })
}

fn unit_median_scale(costs: &[f64]) -> f64 {
    let mut finite: Vec<f64> = costs.iter().copied().filter(|c| c.is_finite()).collect();
    if finite.is_empty() {
        return 1.0;
    }
    let mid = finite.len() / 2;
    finite.select_nth_unstable_by(mid, f64::total_cmp);
    let median = finite[mid];
    if median > 1e-12 {
        1.0 / median
    } else {
        1.0
    }
}

/// Separable box filter over the element's sampled lattice, per hypothesis.
/// The u axis wraps (longitude); missing or sentinel cells do not contribute,
/// and sentinel cells stay sentinel.
fn smooth_lattice(el: &ElementCosts, costs: &mut [f64], radius: usize) {
    let hyp_count = el.hyp_count;
    let stride = el.stride as u32;
    let lat = |p: (u32, u32)| (p.0 / stride, p.1 / stride);
    let lat_w = el.pixels.iter().map(|&p| lat(p).0).max().unwrap_or(0) as usize + 1;
    let (min_lv, max_lv) = el.pixels.iter().fold((u32::MAX, 0u32), |(lo, hi), &p| {
        let lv = lat(p).1;
        (lo.min(lv), hi.max(lv))
    });
    let lat_h = (max_lv - min_lv) as usize + 1;
    let mut index = vec![usize::MAX; lat_w * lat_h];
    for (pi, &p) in el.pixels.iter().enumerate() {
        let (lu, lv) = lat(p);
        index[(lv - min_lv) as usize * lat_w + lu as usize] = pi;
    }

    let r = radius as isize;
    let mut pass = vec![0.0f64; costs.len()];
    // Horizontal pass with wraparound.
    for lv in 0..lat_h {
        for lu in 0..lat_w {
            let pi = index[lv * lat_w + lu];
            if pi == usize::MAX {
                continue;
            }
            let center_offset = pi * hyp_count;
            for hi in 0..hyp_count {
                let center = costs[center_offset + hi];
                if !center.is_finite() {
                    pass[center_offset + hi] = center;
                    continue;
                }
                let mut acc = 0.0;
                let mut cnt = 0usize;
                for du in -r..=r {
                    let nu = (lu as isize + du).rem_euclid(lat_w as isize) as usize;
                    let ni = index[lv * lat_w + nu];
                    if ni == usize::MAX {
                        continue;
                    }
                    let c = costs[ni * hyp_count + hi];
                    if c.is_finite() {
                        acc += c;
                        cnt += 1;
                    }
                }
                pass[center_offset + hi] = acc / cnt as f64;
            }
        }
    }
    // Vertical pass, clamped at the lattice bounds.
    for lv in 0..lat_h {
        for lu in 0..lat_w {
            let pi = index[lv * lat_w + lu];
            if pi == usize::MAX {
                continue;
            }
            let center_offset = pi * hyp_count;
            let mut out = vec![0.0f64; hyp_count];
            for (hi, slot) in out.iter_mut().enumerate() {
                let center = pass[center_offset + hi];
                if !center.is_finite() {
                    *slot = center;
                    continue;
                }
                let mut acc = 0.0;
                let mut cnt = 0usize;
                for dv in -r..=r {
                    let nv = lv as isize + dv;
                    if nv < 0 || nv >= lat_h as isize {
                        continue;
                    }
                    let ni = index[nv as usize * lat_w + lu];
                    if ni == usize::MAX {
                        continue;
                    }
                    let c = pass[ni * hyp_count + hi];
                    if c.is_finite() {
                        acc += c;
                        cnt += 1;
                    }
                }
                *slot = acc / cnt as f64;
            }
            costs[center_offset..center_offset + hyp_count].copy_from_slice(&out);
        }
    }
}

// ---------------------------------------------------------------------------
// 1D compression and regression
// ---------------------------------------------------------------------------

/// Weighted mean of per-pixel probability vectors over the masked pixels,
/// renormalized to a proper distribution.
pub fn aggregate_element(
    prob: &PixelProbVolume,
    element_mask: &Raster<bool>,
    conf: &ConfidenceMap,
) -> Result<Vec<f64>> {
    let mut acc = vec![0.0f64; prob.hyp_count];
    let mut weight_total = 0.0f64;
    let mut in_mask = 0usize;
    for (pi, &(u, v)) in prob.pixels.iter().enumerate() {
        let (u, v) = (u as usize, v as usize);
        if !element_mask.get(u, v) {
            continue;
        }
        in_mask += 1;
        let w = conf.weight(u, v);
        if w == 0.0 {
            continue;
        }
        weight_total += w;
        for (a, &p) in acc.iter_mut().zip(prob.row(pi)) {
            *a += w * p as f64;
        }
    }
    if in_mask == 0 {
        return Err(Error::domain("element mask covers no sampled pixels"));
    }
    if weight_total <= 0.0 {
        return Err(Error::ConfidenceDegenerate);
    }
    let total: f64 = acc.iter().sum();
    for a in acc.iter_mut() {
        *a /= total;
    }
    Ok(acc)
}

/// Expectation of depth under the 1D probability map.
pub fn regress_depth(prob_1d: &[f64], hyp: &DepthHypotheses) -> Result<f64> {
    if prob_1d.len() != hyp.count() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} probabilities", hyp.count()),
            actual: format!("{}", prob_1d.len()),
        });
    }
    let total: f64 = prob_1d.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::domain(format!(
            "probability vector sums to {total}, not 1"
        )));
    }
    Ok(prob_1d
        .iter()
        .zip(hyp.values())
        .map(|(&p, &d)| p * d)
        .sum())
}

/// Mean L1 between predicted and ground-truth element depths.
pub fn depth_loss(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} non-empty depths", gt.len()),
            actual: format!("{}", pred.len()),
        });
    }
    Ok(pred
        .iter()
        .zip(gt)
        .map(|(p, g)| (p - g).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

/// Combined evaluation scalar: 2D layout loss plus depth loss.
pub fn combined_loss(layout_loss: f64, depth_loss: f64) -> f64 {
    layout_loss + depth_loss
}

// ---------------------------------------------------------------------------
// Per-view reconstruction
// ---------------------------------------------------------------------------

/// One element's regressed state.
#[derive(Debug, Clone, Serialize)]
pub struct ElementEstimate {
    pub id: usize,
    pub kind: ElementKind,
    pub orientation: [f64; 3],
    pub depth: f64,
    pub peak_probability: f64,
    pub pixel_count: usize,
    #[serde(skip)]
    pub probability: Vec<f64>,
}

/// Full per-view result: estimates plus the lifted 3D layout.
#[derive(Debug, Clone)]
pub struct ViewReconstruction {
    pub elements: Vec<ElementEstimate>,
    pub layout3d: Layout3D,
}

/// Reconstruct one reference view end to end: cost volume, 1D compression,
/// depth regression, and lifting to a world-frame 3D layout.
///
/// Elements whose confidence degenerates to all-zero fall back to uniform
/// weights. Processing is element-by-element to bound cost-volume memory.
pub fn reconstruct_view(
    ref_view: &MatchView,
    src_views: &[MatchView],
    layout: &Layout2D,
    hyp: &DepthHypotheses,
    conf: &ConfidenceMap,
    params: &ReconstructionParams,
) -> Result<ViewReconstruction> {
    if src_views.is_empty() {
        return Err(Error::domain("reconstruct_view needs at least one source view"));
    }
    let ctx = SweepContext::new(ref_view, src_views, layout.camera())?;
    let mut estimates = Vec::with_capacity(layout.elements().len());
    for (e, el) in layout.elements().iter().enumerate() {
        let costs = element_cost_sweep(&ctx, layout, e, hyp, conf, params)?;
        let volume = cost_to_probability(
            &RawCostVolume {
                elements: vec![costs],
                hyp_count: hyp.count(),
            },
            params.temperature,
            params.smoothing_radius,
        )?;
        let mask = layout.labels().map(|l| l as usize == e);
        let prob_1d = match aggregate_element(&volume, &mask, conf) {
            Ok(p) => p,
            Err(Error::ConfidenceDegenerate) => {
                log::warn!("element {e}: all-zero confidence, falling back to uniform weights");
                let ones = ConfidenceMap::ones(conf.width(), conf.height());
                aggregate_element(&volume, &mask, &ones)?
            }
            Err(err) => return Err(err),
        };
        let depth = regress_depth(&prob_1d, hyp)?;
        let peak = prob_1d.iter().copied().fold(0.0f64, f64::max);
        estimates.push(ElementEstimate {
            id: e,
            kind: el.kind,
            orientation: [el.orientation.x, el.orientation.y, el.orientation.z],
            depth,
            peak_probability: peak,
            pixel_count: el.pixel_count,
            probability: prob_1d,
        });
    }
    let depths: Vec<f64> = estimates.iter().map(|e| e.depth).collect();
    let peaks: Vec<f64> = estimates.iter().map(|e| e.peak_probability).collect();
    let layout3d = lift(layout, &depths, &peaks, &ref_view.pose)?;
    Ok(ViewReconstruction {
        elements: estimates,
        layout3d,
    })
}

/// The plane a layout element sweeps at hypothesis depth `d`.
pub fn element_plane(layout: &Layout2D, element: usize, d: f64) -> Result<Plane> {
    Plane::new(layout.elements()[element].orientation, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::warp_layout;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hypotheses_increasing_and_bounded() {
        for spacing in [HypothesisSpacing::Uniform, HypothesisSpacing::Inverse] {
            let hyp = DepthHypotheses::new(0.3, 12.0, 128, spacing).unwrap();
            assert_eq!(hyp.count(), 128);
            assert!((hyp.d_min() - 0.3).abs() < 1e-12);
            assert!((hyp.d_max() - 12.0).abs() < 1e-12);
            for w in hyp.values().windows(2) {
                assert!(w[1] > w[0]);
            }
        }
        assert!(DepthHypotheses::new(0.0, 1.0, 8, HypothesisSpacing::Uniform).is_err());
        assert!(DepthHypotheses::new(2.0, 1.0, 8, HypothesisSpacing::Uniform).is_err());
        assert!(DepthHypotheses::new(0.3, 12.0, 1, HypothesisSpacing::Uniform).is_err());
    }

    #[test]
    fn inverse_spacing_is_denser_near() {
        let hyp = DepthHypotheses::new(0.5, 8.0, 32, HypothesisSpacing::Inverse).unwrap();
        let first_gap = hyp.values()[1] - hyp.values()[0];
        let last_gap = hyp.values()[31] - hyp.values()[30];
        assert!(first_gap < last_gap);
        assert!(hyp.local_spacing(0.5) <= hyp.local_spacing(8.0));
    }

    #[test]
    fn regress_depth_delta_and_uniform() {
        let hyp = DepthHypotheses::new(1.0, 3.0, 3, HypothesisSpacing::Uniform).unwrap();
        // Delta at a hypothesis returns exactly that hypothesis.
        let delta = vec![0.0, 1.0, 0.0];
        assert_eq!(regress_depth(&delta, &hyp).unwrap(), 2.0);
        // Uniform over {1 m, 3 m} -> 2 m.
        let two = vec![0.5, 0.0, 0.5];
        assert_eq!(regress_depth(&two, &hyp).unwrap(), 2.0);
        // Bounds hold for any distribution.
        let spread = vec![0.2, 0.5, 0.3];
        let d = regress_depth(&spread, &hyp).unwrap();
        assert!((1.0..=3.0).contains(&d));
    }

    #[test]
    fn regress_depth_rejects_unnormalized() {
        let hyp = DepthHypotheses::new(1.0, 3.0, 3, HypothesisSpacing::Uniform).unwrap();
        assert!(regress_depth(&[0.5, 0.0, 0.0], &hyp).is_err());
        assert!(regress_depth(&[0.5, 0.5], &hyp).is_err());
    }

    #[test]
    fn regress_matches_naive_loop_1e12() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let hyp = DepthHypotheses::new(0.4, 9.0, 64, HypothesisSpacing::Inverse).unwrap();
        for _ in 0..100 {
            let mut p: Vec<f64> = (0..64).map(|_| rng.gen::<f64>()).collect();
            let total: f64 = p.iter().sum();
            for x in p.iter_mut() {
                *x /= total;
            }
            let expected: f64 = (0..64).map(|i| p[i] * hyp.values()[i]).sum();
            let got = regress_depth(&p, &hyp).unwrap();
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn depth_loss_basics() {
        assert_eq!(depth_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let delta = depth_loss(&[1.1, 2.1, 3.1], &[1.0, 2.0, 3.0]).unwrap();
        assert!((delta - 0.1).abs() < 1e-12);
        assert!(depth_loss(&[1.0], &[1.0, 2.0]).is_err());
        assert!(depth_loss(&[], &[]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let n = rng.gen_range(1..10);
            let pred: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 5.0).collect();
            let gt: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 5.0).collect();
            let mut naive = 0.0;
            for i in 0..n {
                naive += (pred[i] - gt[i]).abs();
            }
            naive /= n as f64;
            assert!((depth_loss(&pred, &gt).unwrap() - naive).abs() < 1e-15);
            assert!(
                (combined_loss(0.25, depth_loss(&pred, &gt).unwrap())
                    - (0.25 + depth_loss(&pred, &gt).unwrap()))
                .abs()
                    < 1e-15
            );
        }
    }

    fn delta_volume(pixels: Vec<(u32, u32)>, bins: Vec<usize>, hyp_count: usize) -> PixelProbVolume {
        let mut probs = vec![0.0f32; pixels.len() * hyp_count];
        for (pi, &b) in bins.iter().enumerate() {
            probs[pi * hyp_count + b] = 1.0;
        }
        PixelProbVolume {
            pixels,
            probs,
            hyp_count,
        }
    }

    #[test]
    fn aggregate_shared_distribution_is_identity() {
        let pixels: Vec<(u32, u32)> = (0..6u32).map(|i| (i, 0)).collect();
        let q = [0.25f32, 0.5, 0.25];
        let probs: Vec<f32> = pixels.iter().flat_map(|_| q).collect();
        let vol = PixelProbVolume {
            pixels,
            probs,
            hyp_count: 3,
        };
        let mask = Raster::filled(8, 4, true);
        let conf = ConfidenceMap::ones(8, 4);
        let out = aggregate_element(&vol, &mask, &conf).unwrap();
        for (o, &e) in out.iter().zip(&q) {
            assert!((o - e as f64).abs() < 1e-7);
        }
    }

    #[test]
    fn aggregate_two_deltas_even_weights() {
        let vol = delta_volume(vec![(0, 0), (1, 0)], vec![0, 2], 3);
        let mask = Raster::filled(8, 4, true);
        let conf = ConfidenceMap::ones(8, 4);
        let out = aggregate_element(&vol, &mask, &conf).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-12);
        assert!(out[1].abs() < 1e-12);
        assert!((out[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn aggregate_zero_confidence_is_degenerate() {
        let vol = delta_volume(vec![(0, 0), (1, 0)], vec![0, 1], 2);
        let mask = Raster::filled(8, 4, true);
        let zeros =
            ConfidenceMap::combine(Raster::filled(8, 4, 0.0), Raster::filled(8, 4, 1.0)).unwrap();
        assert!(matches!(
            aggregate_element(&vol, &mask, &zeros),
            Err(Error::ConfidenceDegenerate)
        ));
    }

    #[test]
    fn aggregate_matches_naive_loop_and_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..100 {
            let hyp_count = rng.gen_range(2..12);
            let n = rng.gen_range(1..40);
            let pixels: Vec<(u32, u32)> =
                (0..n).map(|i| ((i % 8) as u32, (i / 8) as u32)).collect();
            let mut probs = vec![0.0f32; n * hyp_count];
            for pi in 0..n {
                let mut row: Vec<f32> = (0..hyp_count).map(|_| rng.gen::<f32>() + 1e-3).collect();
                let total: f32 = row.iter().sum();
                for x in row.iter_mut() {
                    *x /= total;
                }
                probs[pi * hyp_count..(pi + 1) * hyp_count].copy_from_slice(&row);
            }
            let vol = PixelProbVolume {
                pixels: pixels.clone(),
                probs,
                hyp_count,
            };
            let mask_data: Vec<bool> = (0..8 * 8).map(|_| rng.gen::<bool>()).collect();
            let mut mask = Raster::from_vec(8, 8, mask_data).unwrap();
            mask.set(pixels[0].0 as usize, pixels[0].1 as usize, true);
            let weights: Vec<f64> = (0..8 * 8).map(|_| 0.05 + rng.gen::<f64>() * 0.95).collect();
            let c = Raster::from_vec(8, 8, weights).unwrap();
            let conf = ConfidenceMap::combine(c, Raster::filled(8, 8, 1.0)).unwrap();

            let out = aggregate_element(&vol, &mask, &conf).unwrap();
            assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-6);

            // Naive double loop.
            let mut acc = vec![0.0f64; hyp_count];
            for (pi, &(u, v)) in vol.pixels.iter().enumerate() {
                if !mask.get(u as usize, v as usize) {
                    continue;
                }
                let w = conf.weight(u as usize, v as usize);
                for (h, slot) in acc.iter_mut().enumerate() {
                    *slot += w * vol.probs[pi * hyp_count + h] as f64;
                }
            }
            let total: f64 = acc.iter().sum();
            for x in acc.iter_mut() {
                *x /= total;
            }
            for (o, e) in out.iter().zip(&acc) {
                assert!((o - e).abs() < 1e-9);
            }

            // Scaling every weight by a common factor leaves the output unchanged.
            let scaled_weights: Vec<f64> = conf.c().data().iter().map(|&w| w * 0.37).collect();
            let scaled = ConfidenceMap::combine(
                Raster::from_vec(8, 8, scaled_weights).unwrap(),
                Raster::filled(8, 8, 1.0),
            )
            .unwrap();
            let out_scaled = aggregate_element(&vol, &mask, &scaled).unwrap();
            for (a, b) in out.iter().zip(&out_scaled) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmin_delta_and_uniform() {
        let el = ElementCosts {
            element: 0,
            stride: 1,
            pixels: vec![(0, 0), (1, 0)],
            costs: vec![0.0, SENTINEL_COST, SENTINEL_COST, 1.0, 1.0, 1.0],
            hyp_count: 3,
        };
        let raw = RawCostVolume {
            elements: vec![el],
            hyp_count: 3,
        };
        let vol = cost_to_probability(&raw, 0.1, None).unwrap();
        let row0 = vol.row(0);
        assert!((row0[0] - 1.0).abs() < 1e-6);
        assert!(row0[1] == 0.0 && row0[2] == 0.0);
        let row1 = vol.row(1);
        for &p in row1 {
            assert!((p - 1.0 / 3.0).abs() < 1e-6);
        }
        assert!(cost_to_probability(&raw, 0.0, None).is_err());
        // Normalization on random rows.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pixels: Vec<(u32, u32)> = (0..20u32).map(|i| (i, 0)).collect();
        let costs: Vec<f64> = (0..20 * 5).map(|_| rng.gen::<f64>() * 4.0).collect();
        let raw = RawCostVolume {
            elements: vec![ElementCosts {
                element: 0,
                stride: 1,
                pixels,
                costs,
                hyp_count: 5,
            }],
            hyp_count: 5,
        };
        let vol = cost_to_probability(&raw, 0.37, Some(1)).unwrap();
        for pi in 0..20 {
            let sum: f64 = vol.row(pi).iter().map(|&p| p as f64).sum();
            assert!((sum - 1.0).abs() < 1e-6, "sum={sum}");
        }
    }

    #[test]
    fn all_sentinel_pixel_gets_uniform_distribution() {
        let raw = RawCostVolume {
            elements: vec![ElementCosts {
                element: 0,
                stride: 1,
                pixels: vec![(0, 0)],
                costs: vec![SENTINEL_COST; 4],
                hyp_count: 4,
            }],
            hyp_count: 4,
        };
        let vol = cost_to_probability(&raw, 0.1, Some(2)).unwrap();
        for &p in vol.row(0) {
            assert!((p - 0.25).abs() < 1e-7);
        }
    }

    #[test]
    fn subsample_stride_respects_limit() {
        assert_eq!(subsample_stride(100, 200), 1);
        assert_eq!(subsample_stride(200, 200), 1);
        let stride = subsample_stride(35_000, 20_000);
        assert!(stride >= 2);
        assert!(35_000 / (stride * stride) <= 20_000);
    }

    // -- matching cost against synthetic views -------------------------------

    fn two_view_scene() -> Vec<crate::synth::RenderedView> {
        let spec = crate::synth::SceneSpec {
            room: crate::synth::cuboid_spec(4.0, 5.0, 2.6),
            camera: crate::synth::CameraSize {
                width: 128,
                height: 64,
            },
            views: Some(vec![
                crate::synth::ViewSpec {
                    position: [-0.4, 1.5, -0.3],
                    yaw_deg: 10.0,
                },
                crate::synth::ViewSpec {
                    position: [0.5, 1.3, 0.4],
                    yaw_deg: 130.0,
                },
            ]),
            n_views: 2,
        };
        crate::synth::make_scene(&spec, 2, 7).unwrap()
    }

    #[test]
    fn identical_view_identity_pose_has_zero_cost() {
        let views = two_view_scene();
        let v = &views[0];
        let mv = MatchView {
            luma: v.image.to_luma(),
            pose: v.pose,
        };
        let hyp = DepthHypotheses::new(0.5, 6.0, 8, HypothesisSpacing::Inverse).unwrap();
        let conf = ConfidenceMap::ones(128, 64);
        let params = ReconstructionParams::default();
        let raw = matching_cost(&mv, &[mv.clone()], &v.layout_gt, &hyp, &conf, &params).unwrap();
        for el in &raw.elements {
            for &c in &el.costs {
                assert_eq!(c, 0.0);
            }
        }
    }

    #[test]
    fn empty_source_set_rejected() {
        let views = two_view_scene();
        let v = &views[0];
        let mv = MatchView {
            luma: v.image.to_luma(),
            pose: v.pose,
        };
        let hyp = DepthHypotheses::new(0.5, 6.0, 8, HypothesisSpacing::Inverse).unwrap();
        let conf = ConfidenceMap::ones(128, 64);
        assert!(
            matching_cost(&mv, &[], &v.layout_gt, &hyp, &conf, &ReconstructionParams::default())
                .is_err()
        );
    }

    #[test]
    fn wall_argmin_lands_on_true_depth_for_interior_pixels() {
        let views = two_view_scene();
        let ref_v = &views[0];
        let mv_ref = MatchView {
            luma: ref_v.image.to_luma(),
            pose: ref_v.pose,
        };
        let mv_src = MatchView {
            luma: views[1].image.to_luma(),
            pose: views[1].pose,
        };
        let hyp = DepthHypotheses::new(0.3, 12.0, 96, HypothesisSpacing::Inverse).unwrap();
        let conf = ConfidenceMap::ones(128, 64);
        let params = ReconstructionParams::default();
        let raw = matching_cost(&mv_ref, &[mv_src], &ref_v.layout_gt, &hyp, &conf, &params).unwrap();

        let wall = ref_v
            .layout_gt
            .elements()
            .iter()
            .position(|e| e.kind == ElementKind::Wall)
            .unwrap();
        let d_true = ref_v.gt_element_depth(wall);
        let el = &raw.elements[wall];
        let labels = ref_v.layout_gt.labels();
        let mut good = 0usize;
        let mut total = 0usize;
        for (pi, &(u, v)) in el.pixels.iter().enumerate() {
            let (u, v) = (u as usize, v as usize);
            // Interior pixels only: every neighbor within 3 px shares the label.
            let interior = (-3isize..=3).all(|dv| {
                (-3isize..=3).all(|du| {
                    let uu = (u as isize + du).rem_euclid(128) as usize;
                    let vv = (v as isize + dv).clamp(0, 63) as usize;
                    labels.get(uu, vv) as usize == wall
                })
            });
            if !interior {
                continue;
            }
            total += 1;
            let row = &el.costs[pi * hyp.count()..(pi + 1) * hyp.count()];
            let argmin = row
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| a.total_cmp(b))
                .unwrap()
                .0;
            let nearest = hyp
                .values()
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| (*a - d_true).abs().total_cmp(&(*b - d_true).abs()))
                .unwrap()
                .0;
            if (argmin as isize - nearest as isize).abs() <= 1 {
                good += 1;
            }
        }
        assert!(total > 50, "need interior pixels, got {total}");
        let frac = good as f64 / total as f64;
        assert!(frac >= 0.95, "argmin hit rate {frac:.3} ({good}/{total})");
    }

    /// Brute-force per-pixel reimplementation: plain loops through the public
    /// warp operation, no batching or precomputation.
    fn naive_pixel_cost(
        ref_view: &MatchView,
        src_views: &[MatchView],
        layout: &Layout2D,
        element: usize,
        (u, v): (usize, usize),
        hyp: &DepthHypotheses,
        params: &ReconstructionParams,
    ) -> Vec<f64> {
        let cam = layout.camera();
        let (w, h) = (cam.width(), cam.height());
        let r = params.patch_radius as isize;
        let orientation = layout.elements()[element].orientation;
        let mut coords = Vec::new();
        for dv in -r..=r {
            for du in -r..=r {
                let up = (u as isize + du).rem_euclid(w as isize) as usize;
                let vp = (v as isize + dv).clamp(0, h as isize - 1) as usize;
                coords.push((up, vp));
            }
        }
        let footprint =
            2.0 * (2 * params.patch_radius + 1) as f64 * std::f64::consts::PI / h as f64;
        let mut out = Vec::with_capacity(hyp.count());
        for &d in hyp.values() {
            let plane = Plane::new(orientation, d).unwrap();
            let mut ref_patch = Vec::new();
            let mut plane_ok = true;
            for &(up, vp) in &coords {
                let ray = cam.pixel_to_ray([up as f64 + 0.5, vp as f64 + 0.5]).unwrap();
                if plane.ray_intersection(&ray).is_none() {
                    plane_ok = false;
                    break;
                }
                ref_patch.push(ref_view.luma.get(up, vp) as f64);
            }
            if !plane_ok {
                out.push(SENTINEL_COST);
                continue;
            }
            normalize_patch(&mut ref_patch);
            let mut patches: Vec<Vec<f64>> = vec![ref_patch];
            for src in src_views {
                // Same degenerate-warp exclusion as the batched path.
                let center = ref_view.pose.inverse_transform_point(src.pose.center());
                let d_singular = -orientation.dot(&center);
                if (d - d_singular).abs() < footprint * d {
                    continue;
                }
                let mut patch = Vec::with_capacity(coords.len());
                let mut ok = true;
                for &(up, vp) in &coords {
                    match warp_layout(
                        &ref_view.pose,
                        &src.pose,
                        &plane,
                        cam,
                        [up as f64 + 0.5, vp as f64 + 0.5],
                    )
                    .unwrap()
                    {
                        Some(px) => patch.push(src.luma.sample_bilinear(px[0], px[1]) as f64),
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    normalize_patch(&mut patch);
                    patches.push(patch);
                }
            }
            if patches.len() == 1 {
                out.push(SENTINEL_COST);
                continue;
            }
            let m = patches.len();
            let n_patch = coords.len();
            let mut total = 0.0;
            for k in 0..n_patch {
                let mean: f64 = patches.iter().map(|p| p[k]).sum::<f64>() / m as f64;
                for p in patches.iter().skip(1) {
                    total += (p[k] - mean) * (p[k] - mean);
                }
            }
            out.push(total / ((m - 1) as f64 * n_patch as f64));
        }
        out
    }

    #[test]
    fn matching_cost_matches_naive_reimplementation() {
        let views = two_view_scene();
        let mv: Vec<MatchView> = views
            .iter()
            .map(|v| MatchView {
                luma: v.image.to_luma(),
                pose: v.pose,
            })
            .collect();
        let hyp = DepthHypotheses::new(0.5, 8.0, 12, HypothesisSpacing::Inverse).unwrap();
        let conf = ConfidenceMap::ones(128, 64);
        let params = ReconstructionParams::default();
        let layout = &views[0].layout_gt;
        let raw = matching_cost(&mv[0], &mv[1..], layout, &hyp, &conf, &params).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for el in &raw.elements {
            for _ in 0..4 {
                let pi = rng.gen_range(0..el.pixels.len());
                let (u, v) = el.pixels[pi];
                let naive = naive_pixel_cost(
                    &mv[0],
                    &mv[1..],
                    layout,
                    el.element,
                    (u as usize, v as usize),
                    &hyp,
                    &params,
                );
                for (h, &expected) in naive.iter().enumerate() {
                    let got = el.cost(pi, h);
                    if expected.is_infinite() {
                        assert!(got.is_infinite());
                    } else {
                        assert!(
                            (got - expected).abs() < 1e-9,
                            "element {} pixel ({u},{v}) hyp {h}: {got} vs {expected}",
                            el.element
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn reconstruct_view_recovers_cuboid_depths() {
        let views = two_view_scene();
        let mv: Vec<MatchView> = views
            .iter()
            .map(|v| MatchView {
                luma: v.image.to_luma(),
                pose: v.pose,
            })
            .collect();
        let hyp = DepthHypotheses::new(0.3, 12.0, 128, HypothesisSpacing::Inverse).unwrap();
        let conf = ConfidenceMap::ones(128, 64);
        let params = ReconstructionParams::default();
        let rec =
            reconstruct_view(&mv[0], &mv[1..], &views[0].layout_gt, &hyp, &conf, &params).unwrap();
        for est in &rec.elements {
            let gt = views[0].gt_element_depth(est.id);
            let tol = 1.5 * hyp.local_spacing(gt);
            assert!(
                (est.depth - gt).abs() <= tol,
                "element {} ({}): {} vs gt {} (tol {tol})",
                est.id,
                est.kind,
                est.depth,
                gt
            );
            let sum: f64 = est.probability.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(est.depth >= hyp.d_min() && est.depth <= hyp.d_max());
        }
    }
}
