//! Finite differences and brute-force reference implementations shared by
//! the integration tests. Nothing here calls into the library's numerics.

#![allow(dead_code)]

use std::collections::BTreeMap;

use le2fusion::nn::Tensor;
use le2fusion::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod netcheck;

pub const FD_STEP: f64 = 1e-4;
pub const FD_TOL: f64 = 1e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_tensor(shape: [usize; 4], lo: f64, hi: f64, seed: u64) -> Tensor {
    Tensor::random_uniform(shape, lo, hi, &mut rng(seed))
}

/// `‖a − n‖ / max(‖a‖, ‖n‖)`, zero when both vanish.
pub fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(n).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut n.iter().copied()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of `f` at the listed flat indices of `x`.
pub fn central_diff(mut f: impl FnMut(&Tensor) -> f64, x: &Tensor, idx: &[usize]) -> Vec<f64> {
    let mut probe = x.clone();
    idx.iter()
        .map(|&i| {
            let v = x.data()[i];
            probe.data_mut()[i] = v + FD_STEP;
            let up = f(&probe);
            probe.data_mut()[i] = v - FD_STEP;
            let down = f(&probe);
            probe.data_mut()[i] = v;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Central difference of `f` along direction `d` (entrywise step `h·d`).
pub fn directional_diff(mut f: impl FnMut(&Tensor) -> f64, x: &Tensor, d: &[f64]) -> f64 {
    let shifted = |s: f64| {
        let mut t = x.clone();
        for (v, dv) in t.data_mut().iter_mut().zip(d) {
            *v += s * FD_STEP * dv;
        }
        t
    };
    (f(&shifted(1.0)) - f(&shifted(-1.0))) / (2.0 * FD_STEP)
}

pub fn random_signs(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Up to `k` distinct flat indices below `n`, always including 0 and n-1.
pub fn sample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    if n <= k {
        return (0..n).collect();
    }
    let mut r = rng(seed);
    let mut out = vec![0, n - 1];
    while out.len() < k {
        let i = r.random_range(0..n);
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

/// A target that turns `mean |y − target|` into a fixed random ±1
/// projection of `y` for any perturbation smaller than 0.5.
pub fn projection_target(y: &Tensor, seed: u64) -> Tensor {
    let mut r = rng(seed);
    let data = y
        .data()
        .iter()
        .map(|&v| {
            let s: f64 = r.random_range(0.5..1.0);
            if r.random::<bool>() {
                v - s
            } else {
                v + s
            }
        })
        .collect();
    Tensor::new(y.shape(), data).unwrap()
}

pub fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    while i < 0 || i >= n {
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * (n - 1) - i;
        }
    }
    i as usize
}

/// Mean SSIM by direct 2-D windowed sums at every pixel.
pub fn ssim_oracle(x: &[f64], y: &[f64], h: usize, w: usize) -> f64 {
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut win = [[0.0; 11]; 11];
    let mut z = 0.0;
    for (i, row) in win.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            z += *v;
        }
    }
    let mut total = 0.0;
    for py in 0..h {
        for px in 0..w {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (i, row) in win.iter().enumerate() {
                for (j, wv) in row.iter().enumerate() {
                    let q = mirror(py as isize + i as isize - 5, h) * w + mirror(px as isize + j as isize - 5, w);
                    let wv = wv / z;
                    mx += wv * x[q];
                    my += wv * y[q];
                    sxx += wv * x[q] * x[q];
                    syy += wv * y[q] * y[q];
                    sxy += wv * x[q] * y[q];
                }
            }
            let (vx, vy, cxy) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    total / (h * w) as f64
}

/// Byte-scale values of a unit-range gray image.
pub fn bytes_of(img: &Image) -> Vec<f64> {
    img.to_byte().data().to_vec()
}

pub fn levels_of(img: &Image) -> Vec<i64> {
    bytes_of(img).iter().map(|v| v.round_ties_even() as i64).collect()
}

pub fn sd_oracle(v: &[f64]) -> f64 {
    // pairwise form of the population variance
    let n = v.len() as f64;
    let mut s = 0.0;
    for a in v {
        for b in v {
            s += (a - b) * (a - b);
        }
    }
    (s / (2.0 * n * n)).sqrt()
}

pub fn en_oracle(levels: &[i64]) -> f64 {
    let mut counts: BTreeMap<i64, f64> = BTreeMap::new();
    for &l in levels {
        *counts.entry(l).or_default() += 1.0;
    }
    let n = levels.len() as f64;
    n.log2() - counts.values().map(|c| c * c.log2()).sum::<f64>() / n
}

pub fn mi_oracle(x: &[i64], y: &[i64]) -> f64 {
    let n = x.len() as f64;
    let mut px: BTreeMap<i64, f64> = BTreeMap::new();
    let mut py: BTreeMap<i64, f64> = BTreeMap::new();
    let mut pxy: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    for (&a, &b) in x.iter().zip(y) {
        *px.entry(a).or_default() += 1.0 / n;
        *py.entry(b).or_default() += 1.0 / n;
        *pxy.entry((a, b)).or_default() += 1.0 / n;
    }
    pxy.iter().map(|(&(a, b), &p)| p * (p / (px[&a] * py[&b])).log2()).sum()
}

pub fn corr_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    let num = n * sxy - sx * sy;
    let (vx, vy) = (n * sxx - sx * sx, n * syy - sy * sy);
    if vx.abs() < 1e-9 * (1.0 + n * sxx) || vy.abs() < 1e-9 * (1.0 + n * syy) {
        return None;
    }
    Some(num / (vx * vy).sqrt())
}

pub fn scd_oracle(f: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let fb: Vec<f64> = f.iter().zip(b).map(|(p, q)| p - q).collect();
    let fa: Vec<f64> = f.iter().zip(a).map(|(p, q)| p - q).collect();
    corr_oracle(&fb, a).unwrap_or(0.0) + corr_oracle(&fa, b).unwrap_or(0.0)
}

/// Sobel responses at each pixel from explicit neighbourhood sums.
fn sobel_oracle(v: &[f64], h: usize, w: usize) -> Vec<(f64, f64)> {
    let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (mut gx, mut gy) = (0.0, 0.0);
            for i in 0..3 {
                for j in 0..3 {
                    let q = v[mirror(y as isize + i as isize - 1, h) * w + mirror(x as isize + j as isize - 1, w)];
                    gx += kx[i][j] * q;
                    gy += kx[j][i] * q;
                }
            }
            out.push((gx, gy));
        }
    }
    out
}

pub fn qabf_oracle(f: &[f64], a: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
    let field = |v: &[f64]| -> Vec<(f64, f64)> {
        sobel_oracle(v, h, w)
            .into_iter()
            .map(|(gx, gy)| {
                let g = (gx * gx + gy * gy).sqrt();
                let alpha = if gx == 0.0 { std::f64::consts::FRAC_PI_2 } else { (gy / gx).atan() };
                (g, alpha)
            })
            .collect()
    };
    let (ff, fa, fb) = (field(f), field(a), field(b));
    let keep = |(gs, as_): (f64, f64), (gf, af): (f64, f64)| {
        let g = if gs == 0.0 && gf == 0.0 { 0.0 } else { gs.min(gf) / gs.max(gf) };
        let al = 1.0 - (as_ - af).abs() / std::f64::consts::FRAC_PI_2;
        let qg = 0.9994 / (1.0 + (-15.0 * (g - 0.5)).exp());
        let qa = 0.9879 / (1.0 + (-22.0 * (al - 0.8)).exp());
        qg * qa
    };
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..h * w {
        num += keep(fa[i], ff[i]) * fa[i].0 + keep(fb[i], ff[i]) * fb[i].0;
        den += fa[i].0 + fb[i].0;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn gray(w: usize, h: usize, data: Vec<f64>) -> Image {
    Image::from_unit_plane(w, h, data).unwrap()
}

pub fn random_gray(w: usize, h: usize, seed: u64) -> Image {
    let mut r = rng(seed);
    gray(w, h, (0..w * h).map(|_| r.random::<f64>()).collect())
}

/// `(f, a, b)` with independent random sizes in `4..=8`.
pub fn random_triple(seed: u64) -> (Image, Image, Image) {
    let mut r = rng(seed);
    let (w, h) = (r.random_range(4..=8), r.random_range(4..=8));
    (random_gray(w, h, seed * 3 + 1), random_gray(w, h, seed * 3 + 2), random_gray(w, h, seed * 3 + 3))
}

/// Largest absolute gap between the library metrics and the oracles.
pub fn metric_deviation(f: &Image, a: &Image, b: &Image) -> f64 {
    use le2fusion::metrics::*;
    let (h, w) = (f.height(), f.width());
    let (fv, av, bv) = (bytes_of(f), bytes_of(a), bytes_of(b));
    let (fl, al, bl) = (levels_of(f), levels_of(a), levels_of(b));
    let pairs = [
        (metric_sd(f).unwrap(), sd_oracle(&fv)),
        (metric_en(f).unwrap(), en_oracle(&fl)),
        (metric_mi(f, a, b).unwrap(), mi_oracle(&fl, &al) + mi_oracle(&fl, &bl)),
        (metric_scd(f, a, b).unwrap().value, scd_oracle(&fv, &av, &bv)),
        (metric_qabf(f, a, b).unwrap(), qabf_oracle(&fv, &av, &bv, h, w)),
    ];
    pairs.iter().map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
