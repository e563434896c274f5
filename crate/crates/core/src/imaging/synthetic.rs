//! Procedural registered infrared/visible scenes for smoke training and demos.
//!
//! A scene is a set of rectangular structures with step edges, a striped
//! texture patch and a few warm targets. The visible image carries the
//! structure and texture under uneven illumination with the targets barely
//! distinguishable; the infrared image is smooth, with the targets as bright
//! Gaussian blobs and the structures as faint temperature steps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Image, PatchPair, PatchSet};

struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    vis: f64,
    ir: f64,
}

struct Blob {
    cx: f64,
    cy: f64,
    sx: f64,
    sy: f64,
    heat: f64,
}

/// One registered pair of unit-range gray images, `(ir, vi)`.
pub fn scene_pair(seed: u64, size: usize) -> (Image, Image) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f00d);
    let s = size as f64;

    let rects: Vec<Rect> = (0..rng.random_range(3..6))
        .map(|_| {
            let w = rng.random_range(0.15..0.5) * s;
            let h = rng.random_range(0.15..0.5) * s;
            let x0 = rng.random_range(0.0..s - w);
            let y0 = rng.random_range(0.0..s - h);
            Rect {
                x0,
                y0,
                x1: x0 + w,
                y1: y0 + h,
                vis: rng.random_range(-0.25..0.3),
                ir: rng.random_range(-0.05..0.08),
            }
        })
        .collect();
    let blobs: Vec<Blob> = (0..rng.random_range(1..4))
        .map(|_| Blob {
            cx: rng.random_range(0.15..0.85) * s,
            cy: rng.random_range(0.15..0.85) * s,
            sx: rng.random_range(0.04..0.1) * s,
            sy: rng.random_range(0.07..0.16) * s,
            heat: rng.random_range(0.45..0.7),
        })
        .collect();
    let stripe = {
        let x0 = rng.random_range(0.0..0.6) * s;
        let y0 = rng.random_range(0.0..0.6) * s;
        (x0, y0, x0 + 0.35 * s, y0 + 0.3 * s, rng.random_range(3.0..6.0))
    };
    let light_dir = rng.random_range(0.0..std::f64::consts::TAU);
    let base_vis = rng.random_range(0.3..0.45);
    let base_ir = rng.random_range(0.12..0.22);

    let mut ir = Vec::with_capacity(size * size);
    let mut vi = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let (u, v) = (fx / s - 0.5, fy / s - 0.5);
            let illum = 0.75 + 0.45 * (u * light_dir.cos() + v * light_dir.sin());
            let mut vis = base_vis;
            let mut heat = base_ir + 0.03 * (6.0 * u).sin() * (5.0 * v).cos();
            for r in &rects {
                if fx >= r.x0 && fx < r.x1 && fy >= r.y0 && fy < r.y1 {
                    vis += r.vis;
                    heat += r.ir;
                }
            }
            let (sx0, sy0, sx1, sy1, period) = stripe;
            if fx >= sx0 && fx < sx1 && fy >= sy0 && fy < sy1 && ((fx / period).floor() as i64) % 2 == 0 {
                vis += 0.18;
            }
            for b in &blobs {
                let d = ((fx - b.cx) / b.sx).powi(2) + ((fy - b.cy) / b.sy).powi(2);
                let g = (-0.5 * d).exp();
                heat += b.heat * g;
                vis += 0.06 * g;
            }
            vis = vis * illum + rng.random_range(-0.015..0.015);
            heat += rng.random_range(-0.01..0.01);
            vi.push(vis.clamp(0.0, 1.0));
            ir.push(heat.clamp(0.0, 1.0));
        }
    }
    (
        Image::from_unit_plane(size, size, ir).expect("sized by construction"),
        Image::from_unit_plane(size, size, vi).expect("sized by construction"),
    )
}

/// `count` scenes with seeds `first_seed..first_seed + count`.
pub fn scene_set(first_seed: u64, count: usize, size: usize) -> PatchSet {
    let patches = (0..count as u64)
        .map(|i| {
            let (ir, vi) = scene_pair(first_seed + i, size);
            PatchPair { ir, vi }
        })
        .collect();
    PatchSet { size, patches }
}
