//! Temporary timing probe; run with `cargo test --test perf_probe -- --ignored --nocapture`.

use panolayout::confidence::ConfidenceMap;
use panolayout::mvs::{
    reconstruct_view, DepthHypotheses, HypothesisSpacing, MatchView, ReconstructionParams,
};
use panolayout::synth::{make_scene, CameraSize, RoomSpec, RoomTextures, SceneSpec, Texture, ViewSpec};

fn cuboid() -> RoomSpec {
    RoomSpec {
        floor: vec![[-2.0, -2.5], [2.0, -2.5], [2.0, 2.5], [-2.0, 2.5]],
        height: 2.6,
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

#[test]
#[ignore]
fn single_thread_full_size_probe() {
    let spec = SceneSpec {
        room: cuboid(),
        camera: CameraSize {
            width: 512,
            height: 256,
        },
        views: Some(vec![
            ViewSpec {
                position: [-0.5, 1.4, -0.35],
                yaw_deg: 0.0,
            },
            ViewSpec {
                position: [0.55, 1.6, 0.1],
                yaw_deg: 120.0,
            },
            ViewSpec {
                position: [-0.05, 1.8, 0.4],
                yaw_deg: 240.0,
            },
        ]),
        n_views: 3,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    pool.install(|| {
        let t0 = std::time::Instant::now();
        let views = make_scene(&spec, 3, 0).unwrap();
        println!("render: {:.1}s", t0.elapsed().as_secs_f64());

        // Light binomial prefilter on the matching luma.
        let blur = |src: &panolayout::raster::Raster<f32>| {
            let (w, h) = (src.width(), src.height());
            let mut tmp = panolayout::raster::Raster::filled(w, h, 0.0f32);
            for v in 0..h {
                for u in 0..w {
                    let l = src.get_wrapped(u as isize - 1, v as isize);
                    let c = src.get(u, v);
                    let r = src.get_wrapped(u as isize + 1, v as isize);
                    tmp.set(u, v, 0.25 * l + 0.5 * c + 0.25 * r);
                }
            }
            let mut out = panolayout::raster::Raster::filled(w, h, 0.0f32);
            for v in 0..h {
                for u in 0..w {
                    let t = tmp.get_wrapped(u as isize, v as isize - 1);
                    let c = tmp.get(u, v);
                    let b = tmp.get_wrapped(u as isize, v as isize + 1);
                    out.set(u, v, 0.25 * t + 0.5 * c + 0.25 * b);
                }
            }
            out
        };
        let mv: Vec<MatchView> = views
            .iter()
            .map(|v| MatchView {
                luma: blur(&v.image.to_luma()),
                pose: v.pose,
            })
            .collect();
        let hyp = DepthHypotheses::new(0.3, 12.0, 128, HypothesisSpacing::Inverse).unwrap();
        let conf = ConfidenceMap::ones(512, 256);
        let params = ReconstructionParams::default();

        // Per-pixel cost-curve quality on the far wall (element 4).
        {
            let i = 0;
            let srcs: Vec<MatchView> = (0..3).filter(|&j| j != i).map(|j| mv[j].clone()).collect();
            let raw = panolayout::mvs::matching_cost(
                &mv[i], &srcs, &views[i].layout_gt, &hyp, &conf, &params,
            )
            .unwrap();
            let el = &raw.elements[4];
            let d_true = views[i].gt_element_depth(4);
            let nearest = hyp
                .values()
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| (*a - d_true).abs().total_cmp(&(*b - d_true).abs()))
                .unwrap()
                .0;
            let n = hyp.count();
            let mut hist = [0usize; 10]; // valley contrast buckets
            let mut argmin_far = 0usize;
            let mut total = 0usize;
            for pi in 0..el.pixels.len() {
                let row: Vec<f64> = (0..n).map(|h| el.cost(pi, h)).collect();
                if row.iter().any(|c| !c.is_finite()) {
                    continue;
                }
                total += 1;
                let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
                let mut sorted = row.clone();
                sorted.sort_by(f64::total_cmp);
                let median = sorted[n / 2];
                let contrast = if median > 1e-12 { min / median } else { 1.0 };
                hist[((contrast * 10.0) as usize).min(9)] += 1;
                let argmin = row
                    .iter()
                    .enumerate()
                    .min_by(|(_, a), (_, b)| a.total_cmp(b))
                    .unwrap()
                    .0;
                if (argmin as isize - nearest as isize).abs() > 2 {
                    argmin_far += 1;
                }
            }
            println!(
                "element 4: {total} pixels, argmin off-true: {:.1}%",
                100.0 * argmin_far as f64 / total as f64
            );
            println!("min/median contrast histogram (0.0-1.0): {hist:?}");

            // Full cost curves of several pixels, median-scaled, as sparklines.
            for frac in [0.2, 0.35, 0.5, 0.65, 0.8] {
                let pi = (el.pixels.len() as f64 * frac) as usize;
                let row: Vec<f64> = (0..n).map(|h| el.cost(pi, h)).collect();
                let mut sorted = row.clone();
                sorted.sort_by(f64::total_cmp);
                let med = sorted[sorted.len() / 2];
                let glyphs: String = row
                    .iter()
                    .map(|c| {
                        let x = (c / med * 4.0).min(9.0) as usize;
                        char::from_digit(x as u32, 10).unwrap()
                    })
                    .collect();
                println!("pixel {:?} c/med x4: {}", el.pixels[pi], glyphs);
            }
            // Peak/expectation stats split by boundary distance.
            {
                let vol = panolayout::mvs::cost_to_probability(
                    &panolayout::mvs::RawCostVolume {
                        elements: vec![el.clone()],
                        hyp_count: n,
                    },
                    params.temperature,
                    Some(2),
                )
                .unwrap();
                let labels = views[0].layout_gt.labels();
                let is_interior = |u: usize, v: usize, margin: isize| -> bool {
                    (-margin..=margin).all(|dv| {
                        (-margin..=margin).all(|du| {
                            let uu = (u as isize + du).rem_euclid(512) as usize;
                            let vv = (v as isize + dv).clamp(0, 255) as usize;
                            labels.get(uu, vv) as usize == 4
                        })
                    })
                };
                let mut groups: [(usize, f64, f64); 2] = [(0, 0.0, 0.0); 2];
                for (pi, &(u, v)) in vol.pixels.iter().enumerate() {
                    let row = vol.row(pi);
                    let peak = row.iter().cloned().fold(0.0f32, f32::max) as f64;
                    let e: f64 = row
                        .iter()
                        .zip(hyp.values())
                        .map(|(&p, &d)| p as f64 * d)
                        .sum();
                    let g = if is_interior(u as usize, v as usize, 4) { 0 } else { 1 };
                    groups[g].0 += 1;
                    groups[g].1 += peak;
                    groups[g].2 += e - d_true;
                }
                for (name, g) in ["interior", "boundary"].iter().zip(&groups) {
                    println!(
                        "{name}: n={} mean peak {:.3} mean E err {:+.3}",
                        g.0,
                        g.1 / g.0 as f64,
                        g.2 / g.0 as f64
                    );
                }
            }
            for (label, radius) in [("none", None), ("r2", Some(2))] {
                let vol = panolayout::mvs::cost_to_probability(
                    &panolayout::mvs::RawCostVolume {
                        elements: vec![el.clone()],
                        hyp_count: n,
                    },
                    params.temperature,
                    radius,
                )
                .unwrap();
                // Per-pixel peak stats.
                let mut peak_sum = 0.0;
                let mut expectation_err_sum = 0.0;
                for pi in 0..vol.pixels.len() {
                    let row = vol.row(pi);
                    let peak = row.iter().cloned().fold(0.0f32, f32::max);
                    peak_sum += peak as f64;
                    let e: f64 = row
                        .iter()
                        .zip(hyp.values())
                        .map(|(&p, &d)| p as f64 * d)
                        .sum();
                    expectation_err_sum += e - d_true;
                }
                let np = vol.pixels.len() as f64;
                let mask = views[0].layout_gt.labels().map(|l| l as usize == 4);
                let agg = panolayout::mvs::aggregate_element(&vol, &mask, &conf).unwrap();
                let e_agg: f64 = agg.iter().zip(hyp.values()).map(|(&p, &d)| p * d).sum();
                println!(
                    "smoothing {label}: mean per-pixel peak {:.3}, mean per-pixel E err {:+.4}, aggregate E err {:+.4}",
                    peak_sum / np,
                    expectation_err_sum / np,
                    e_agg - d_true
                );
            }
        }

        let t1 = std::time::Instant::now();
        for radius in [2usize, 4, 6, 8] {
            let params = ReconstructionParams {
                smoothing_radius: Some(radius),
                ..params.clone()
            };
            let i = 0;
            let srcs: Vec<MatchView> = (0..3).filter(|&j| j != i).map(|j| mv[j].clone()).collect();
            let rec =
                reconstruct_view(&mv[i], &srcs, &views[i].layout_gt, &hyp, &conf, &params).unwrap();
            for est in &rec.elements {
                let gt = views[i].gt_element_depth(est.id);
                println!(
                    "radius {radius} element {} ({}): depth {:.4} gt {:.4} err {:+.4} peak {:.3}",
                    est.id,
                    est.kind,
                    est.depth,
                    gt,
                    est.depth - gt,
                    est.peak_probability
                );
            }
        }
        println!("4 radii, 1 view each: {:.1}s", t1.elapsed().as_secs_f64());
    });
}
