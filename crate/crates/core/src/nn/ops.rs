//! Forward definitions of the network and loss operators, with the adjoints
//! the tape uses for reverse-mode differentiation.
//!
//! Every spatial operator uses reflection padding and preserves (H, W).

use std::sync::LazyLock;

use super::gemm::{gemm, MatMut, MatRef};
use super::tensor::Tensor;
use crate::error::{FusionError, Result};

pub const LRELU_SLOPE: f64 = 0.2;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
/// Smoothing term of the edge-weight normalizer.
pub const EDGE_EPS: f64 = 1e-8;

pub const BOX3: [f64; 9] = [1.0 / 9.0; 9];
pub const SOBEL_X: [f64; 9] = [-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0];
pub const SOBEL_Y: [f64; 9] = [-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0];

/// Maps a padded coordinate back into `[0, n)` by mirror reflection
/// (edge sample not repeated). Requires `pad < n`.
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    debug_assert!((0..n).contains(&r), "reflection pad exceeds extent");
    r as usize
}

fn reflect_table(n: usize, k: usize) -> Vec<usize> {
    // table[d * n + i] = reflect(i + d - pad)
    let pad = (k / 2) as isize;
    let mut t = Vec::with_capacity(k * n);
    for d in 0..k as isize {
        for i in 0..n as isize {
            t.push(reflect(i + d - pad, n));
        }
    }
    t
}

fn check_pad(x: &Tensor, k: usize, what: &str) -> Result<()> {
    let pad = k / 2;
    if x.height() <= pad || x.width() <= pad {
        return Err(FusionError::shape(format!(
            "{what}: {}x{} too small for a {k}x{k} window",
            x.height(),
            x.width()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    LRelu,
    Tanh,
    None,
}

/// Shape of one square "same" convolution layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub activation: Activation,
}

impl ConvSpec {
    pub const fn new(in_channels: usize, out_channels: usize, kernel: usize, activation: Activation) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel,
            activation,
        }
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel, self.kernel]
    }

    pub fn bias_shape(&self) -> [usize; 4] {
        [self.out_channels, 1, 1, 1]
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn param_count(&self) -> usize {
        self.out_channels * (self.fan_in() + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if ![1, 3, 5].contains(&self.kernel) || self.in_channels == 0 || self.out_channels == 0 {
            return Err(FusionError::shape(format!("invalid conv spec {self:?}")));
        }
        Ok(())
    }
}

// Target ~8 MiB of im2col scratch per chunk.
const COL_BUDGET: usize = 1 << 20;

fn rows_per_chunk(k_total: usize, h: usize, w: usize) -> usize {
    (COL_BUDGET / (k_total * w).max(1)).clamp(1, h)
}

#[allow(clippy::too_many_arguments)]
fn im2col(
    x_item: &[f64],
    cin: usize,
    k: usize,
    h: usize,
    w: usize,
    rows: std::ops::Range<usize>,
    ry: &[usize],
    rx: &[usize],
    col: &mut [f64],
) {
    let n = rows.len() * w;
    let plane = h * w;
    let mut row = 0;
    for ci in 0..cin {
        let src = &x_item[ci * plane..(ci + 1) * plane];
        for ky in 0..k {
            for kx in 0..k {
                let dst = &mut col[row * n..(row + 1) * n];
                let rxs = &rx[kx * w..(kx + 1) * w];
                for (j, y) in rows.clone().enumerate() {
                    let sy = ry[ky * h + y] * w;
                    let out = &mut dst[j * w..(j + 1) * w];
                    for (o, &sx) in out.iter_mut().zip(rxs) {
                        *o = src[sy + sx];
                    }
                }
                row += 1;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn col2im(
    col: &[f64],
    cin: usize,
    k: usize,
    h: usize,
    w: usize,
    rows: std::ops::Range<usize>,
    ry: &[usize],
    rx: &[usize],
    dx_item: &mut [f64],
) {
    let n = rows.len() * w;
    let plane = h * w;
    let mut row = 0;
    for ci in 0..cin {
        let dst = &mut dx_item[ci * plane..(ci + 1) * plane];
        for ky in 0..k {
            for kx in 0..k {
                let src = &col[row * n..(row + 1) * n];
                let rxs = &rx[kx * w..(kx + 1) * w];
                for (j, y) in rows.clone().enumerate() {
                    let sy = ry[ky * h + y] * w;
                    for (&g, &sx) in src[j * w..(j + 1) * w].iter().zip(rxs) {
                        dst[sy + sx] += g;
                    }
                }
                row += 1;
            }
        }
    }
}

fn check_conv(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize)> {
    let [cout, cin, k, k2] = weight.shape();
    if k != k2 || k % 2 == 0 {
        return Err(FusionError::shape(format!("conv kernel must be odd and square, got {:?}", weight.shape())));
    }
    if x.channels() != cin {
        return Err(FusionError::shape(format!(
            "conv expects {cin} input channels, got {}",
            x.channels()
        )));
    }
    if bias.shape() != [cout, 1, 1, 1] {
        return Err(FusionError::shape(format!("bias shape {:?} for {cout} outputs", bias.shape())));
    }
    check_pad(x, k, "conv2d")?;
    Ok((cout, cin, k))
}

/// "Same" 2-D cross-correlation with reflection padding of `(k - 1) / 2`.
/// `weight` is `(out, in, k, k)`, `bias` is `(out, 1, 1, 1)`.
pub fn conv2d(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (cout, cin, k) = check_conv(x, weight, bias)?;
    let [b, _, h, w] = x.shape();
    let plane = h * w;
    let k_total = cin * k * k;
    let mut out = Tensor::zeros([b, cout, h, w]);
    let wmat = MatRef::row_major(weight.data(), cout, k_total);

    if k == 1 {
        for ib in 0..b {
            let xm = MatRef::row_major(x.item(ib), cin, plane);
            let o = &mut out.data_mut()[ib * cout * plane..(ib + 1) * cout * plane];
            gemm(1.0, wmat, xm, 0.0, MatMut::row_major(o, cout, plane));
        }
    } else {
        let ry = reflect_table(h, k);
        let rx = reflect_table(w, k);
        let chunk_rows = rows_per_chunk(k_total, h, w);
        let mut col = vec![0.0; k_total * chunk_rows * w];
        for ib in 0..b {
            let x_item = x.item(ib);
            let o = &mut out.data_mut()[ib * cout * plane..(ib + 1) * cout * plane];
            let mut y0 = 0;
            while y0 < h {
                let y1 = (y0 + chunk_rows).min(h);
                let n = (y1 - y0) * w;
                let col = &mut col[..k_total * n];
                im2col(x_item, cin, k, h, w, y0..y1, &ry, &rx, col);
                let c = MatMut {
                    data: &mut o[y0 * w..],
                    rows: cout,
                    cols: n,
                    row_stride: plane,
                    col_stride: 1,
                };
                gemm(1.0, wmat, MatRef::row_major(col, k_total, n), 0.0, c);
                y0 = y1;
            }
        }
    }

    let bias = bias.data();
    for ib in 0..b {
        for (co, &bv) in bias.iter().enumerate() {
            for v in out.plane_mut(ib, co) {
                *v += bv;
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d`] given the upstream gradient.
/// Returns `(dx, dweight, dbias)`; `dx` is skipped when `need_dx` is false.
pub fn conv2d_backward(
    x: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
    need_dx: bool,
) -> (Option<Tensor>, Tensor, Tensor) {
    let [cout, cin, k, _] = weight.shape();
    let [b, _, h, w] = x.shape();
    let plane = h * w;
    let k_total = cin * k * k;
    let mut dw = Tensor::zeros(weight.shape());
    let mut db = Tensor::zeros([cout, 1, 1, 1]);
    let mut dx = need_dx.then(|| Tensor::zeros(x.shape()));
    let wmat = MatRef::row_major(weight.data(), cout, k_total);

    for ib in 0..b {
        for co in 0..cout {
            db.data_mut()[co] += grad_out.plane(ib, co).iter().sum::<f64>();
        }
    }

    if k == 1 {
        for ib in 0..b {
            let g = MatRef::row_major(grad_out.item(ib), cout, plane);
            let xm = MatRef::row_major(x.item(ib), cin, plane);
            gemm(1.0, g, xm.t(), 1.0, MatMut::row_major(dw.data_mut(), cout, k_total));
            if let Some(dx) = dx.as_mut() {
                let d = &mut dx.data_mut()[ib * cin * plane..(ib + 1) * cin * plane];
                gemm(1.0, wmat.t(), g, 0.0, MatMut::row_major(d, cin, plane));
            }
        }
        return (dx, dw, db);
    }

    let ry = reflect_table(h, k);
    let rx = reflect_table(w, k);
    let chunk_rows = rows_per_chunk(k_total, h, w);
    let mut col = vec![0.0; k_total * chunk_rows * w];
    let mut dcol = if need_dx { vec![0.0; k_total * chunk_rows * w] } else { Vec::new() };
    for ib in 0..b {
        let x_item = x.item(ib);
        let g_item = grad_out.item(ib);
        let mut y0 = 0;
        while y0 < h {
            let y1 = (y0 + chunk_rows).min(h);
            let n = (y1 - y0) * w;
            let g = MatRef {
                data: &g_item[y0 * w..],
                rows: cout,
                cols: n,
                row_stride: plane,
                col_stride: 1,
            };
            let col = &mut col[..k_total * n];
            im2col(x_item, cin, k, h, w, y0..y1, &ry, &rx, col);
            gemm(
                1.0,
                g,
                MatRef::row_major(col, k_total, n).t(),
                1.0,
                MatMut::row_major(dw.data_mut(), cout, k_total),
            );
            if let Some(dx) = dx.as_mut() {
                let dcol = &mut dcol[..k_total * n];
                gemm(1.0, wmat.t(), g, 0.0, MatMut::row_major(dcol, k_total, n));
                let d = &mut dx.data_mut()[ib * cin * plane..(ib + 1) * cin * plane];
                col2im(dcol, cin, k, h, w, y0..y1, &ry, &rx, d);
            }
            y0 = y1;
        }
    }
    (dx, dw, db)
}

#[inline]
pub fn lrelu_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        v
    } else {
        LRELU_SLOPE * v
    }
}

pub fn lrelu(x: &Tensor) -> Tensor {
    x.map(lrelu_scalar)
}

pub fn lrelu_backward(x: &Tensor, grad: &Tensor) -> Tensor {
    x.zip_map(grad, |v, g| if v >= 0.0 { g } else { LRELU_SLOPE * g })
        .expect("shape checked at record time")
}

/// `(tanh(x) + 1) / 2`, mapping into the open unit interval.
pub fn tanh_map(x: &Tensor) -> Tensor {
    x.map(|v| 0.5 * (v.tanh() + 1.0))
}

pub fn tanh_map_backward(y: &Tensor, grad: &Tensor) -> Tensor {
    // y = (t + 1)/2  =>  dy/dx = (1 - t²)/2 = 2·y·(1 - y)
    y.zip_map(grad, |y, g| 2.0 * y * (1.0 - y) * g)
        .expect("shape checked at record time")
}

#[inline]
pub fn softplus_scalar(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

pub fn softplus(x: &Tensor) -> Tensor {
    x.map(softplus_scalar)
}

pub fn softplus_backward(x: &Tensor, grad: &Tensor) -> Tensor {
    x.zip_map(grad, |v, g| g / (1.0 + (-v).exp()))
        .expect("shape checked at record time")
}

pub fn activate(x: Tensor, act: Activation) -> Tensor {
    match act {
        Activation::LRelu => lrelu(&x),
        Activation::Tanh => tanh_map(&x),
        Activation::None => x,
    }
}

/// Depthwise correlation of every plane with a fixed `k×k` kernel.
pub fn filter2d(x: &Tensor, kernel: &[f64], k: usize) -> Result<Tensor> {
    assert_eq!(kernel.len(), k * k);
    check_pad(x, k, "filter2d")?;
    let [b, c, h, w] = x.shape();
    let ry = reflect_table(h, k);
    let rx = reflect_table(w, k);
    let mut out = Tensor::zeros(x.shape());
    for ib in 0..b {
        for ic in 0..c {
            let src = x.plane(ib, ic);
            let dst = out.plane_mut(ib, ic);
            for ky in 0..k {
                for kx in 0..k {
                    let kv = kernel[ky * k + kx];
                    if kv == 0.0 {
                        continue;
                    }
                    let rxs = &rx[kx * w..(kx + 1) * w];
                    for y in 0..h {
                        let sy = ry[ky * h + y] * w;
                        for (o, &sx) in dst[y * w..(y + 1) * w].iter_mut().zip(rxs) {
                            *o += kv * src[sy + sx];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`filter2d`] with respect to its input.
pub fn filter2d_adjoint(grad: &Tensor, kernel: &[f64], k: usize) -> Tensor {
    let [b, c, h, w] = grad.shape();
    let ry = reflect_table(h, k);
    let rx = reflect_table(w, k);
    let mut out = Tensor::zeros(grad.shape());
    for ib in 0..b {
        for ic in 0..c {
            let src = grad.plane(ib, ic);
            let dst = out.plane_mut(ib, ic);
            for ky in 0..k {
                for kx in 0..k {
                    let kv = kernel[ky * k + kx];
                    if kv == 0.0 {
                        continue;
                    }
                    let rxs = &rx[kx * w..(kx + 1) * w];
                    for y in 0..h {
                        let sy = ry[ky * h + y] * w;
                        for (&g, &sx) in src[y * w..(y + 1) * w].iter().zip(rxs) {
                            dst[sy + sx] += kv * g;
                        }
                    }
                }
            }
        }
    }
    out
}

/// 3×3 mean filter, stride 1.
pub fn box_avg3(x: &Tensor) -> Result<Tensor> {
    filter2d(x, &BOX3, 3)
}

fn check_single_channel(x: &Tensor, what: &str) -> Result<()> {
    if x.channels() != 1 {
        return Err(FusionError::shape(format!(
            "{what} expects a single channel, got {}",
            x.channels()
        )));
    }
    Ok(())
}

/// Sobel responses `(Gx, Gy)`.
pub fn sobel(x: &Tensor) -> Result<(Tensor, Tensor)> {
    check_single_channel(x, "sobel")?;
    check_pad(x, 3, "sobel")?;
    let [b, _, h, w] = x.shape();
    let (mut gx, mut gy) = (Tensor::zeros(x.shape()), Tensor::zeros(x.shape()));
    // Differences first, so flat regions give exactly zero.
    for ib in 0..b {
        let src = x.plane(ib, 0);
        let at = |y: usize, x: usize| src[y * w + x];
        for y in 0..h {
            let (ym, yp) = (reflect(y as isize - 1, h), reflect(y as isize + 1, h));
            for xx in 0..w {
                let (xm, xp) = (reflect(xx as isize - 1, w), reflect(xx as isize + 1, w));
                let dx = (at(ym, xp) - at(ym, xm)) + 2.0 * (at(y, xp) - at(y, xm)) + (at(yp, xp) - at(yp, xm));
                let dy = (at(yp, xm) - at(ym, xm)) + 2.0 * (at(yp, xx) - at(ym, xx)) + (at(yp, xp) - at(ym, xp));
                gx.plane_mut(ib, 0)[y * w + xx] = dx;
                gy.plane_mut(ib, 0)[y * w + xx] = dy;
            }
        }
    }
    Ok((gx, gy))
}

/// Gradient magnitude in L1 form, `|Gx| + |Gy|`.
pub fn sobel_mag(x: &Tensor) -> Result<Tensor> {
    let (gx, gy) = sobel(x)?;
    gx.zip_map(&gy, |a, b| a.abs() + b.abs())
}

pub fn sobel_mag_backward(x: &Tensor, grad: &Tensor) -> Tensor {
    let (gx, gy) = sobel(x).expect("shape checked at record time");
    let sx = gx.zip_map(grad, |d, g| d.signum_or_zero() * g).unwrap();
    let sy = gy.zip_map(grad, |d, g| d.signum_or_zero() * g).unwrap();
    let mut out = filter2d_adjoint(&sx, &SOBEL_X, 3);
    out.add_assign(&filter2d_adjoint(&sy, &SOBEL_Y, 3));
    out
}

trait SignumOrZero {
    fn signum_or_zero(self) -> Self;
}

impl SignumOrZero for f64 {
    #[inline]
    fn signum_or_zero(self) -> f64 {
        if self > 0.0 {
            1.0
        } else if self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

/// `x ⊕ (x ⊗ g)`. `g` either matches `x` or has one channel and is
/// broadcast across the channels of `x`.
pub fn gate(x: &Tensor, g: &Tensor) -> Result<Tensor> {
    check_gate(x, g)?;
    let [b, c, _, _] = x.shape();
    let mut out = x.clone();
    for ib in 0..b {
        for ic in 0..c {
            let gp = g.plane(ib, if g.channels() == 1 { 0 } else { ic });
            for (o, &gv) in out.plane_mut(ib, ic).iter_mut().zip(gp) {
                *o += *o * gv;
            }
        }
    }
    Ok(out)
}

fn check_gate(x: &Tensor, g: &Tensor) -> Result<()> {
    let [b, c, h, w] = x.shape();
    let [gb, gc, gh, gw] = g.shape();
    if gb != b || gh != h || gw != w || (gc != 1 && gc != c) {
        return Err(FusionError::shape(format!(
            "gate {:?} incompatible with features {:?}",
            g.shape(),
            x.shape()
        )));
    }
    Ok(())
}

/// Returns `(dx, dg)` for [`gate`].
pub fn gate_backward(x: &Tensor, g: &Tensor, grad: &Tensor) -> (Tensor, Tensor) {
    let [b, c, _, _] = x.shape();
    let mut dx = Tensor::zeros(x.shape());
    let mut dg = Tensor::zeros(g.shape());
    let broadcast = g.channels() == 1 && c != 1;
    for ib in 0..b {
        for ic in 0..c {
            let gc = if broadcast { 0 } else { ic };
            let xp = x.plane(ib, ic);
            let up = grad.plane(ib, ic);
            let gp = g.plane(ib, gc).to_vec();
            for ((d, &u), &gv) in dx.plane_mut(ib, ic).iter_mut().zip(up).zip(&gp) {
                *d = u * (1.0 + gv);
            }
            for ((d, &u), &xv) in dg.plane_mut(ib, gc).iter_mut().zip(up).zip(xp) {
                *d += u * xv;
            }
        }
    }
    (dx, dg)
}

/// Normalized share `(num + ε/2) / (num + other + ε)`.
///
/// The two shares of a pair sum to one exactly (up to rounding) and a
/// pair of zeros maps to one half each.
pub fn edge_ratio(num: &Tensor, other: &Tensor) -> Result<Tensor> {
    num.zip_map(other, |a, b| (a + 0.5 * EDGE_EPS) / (a + b + EDGE_EPS))
}

/// Returns `(d_num, d_other)` for [`edge_ratio`].
pub fn edge_ratio_backward(num: &Tensor, other: &Tensor, grad: &Tensor) -> (Tensor, Tensor) {
    let n = num.len();
    let (a, b, g) = (num.data(), other.data(), grad.data());
    let mut da = vec![0.0; n];
    let mut db = vec![0.0; n];
    for i in 0..n {
        let d = a[i] + b[i] + EDGE_EPS;
        let d2 = d * d;
        da[i] = g[i] * (b[i] + 0.5 * EDGE_EPS) / d2;
        db[i] = -g[i] * (a[i] + 0.5 * EDGE_EPS) / d2;
    }
    (
        Tensor::new(num.shape(), da).unwrap(),
        Tensor::new(num.shape(), db).unwrap(),
    )
}

/// Normalized 2-D Gaussian window, row-major `size × size`.
pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let g: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    let g: Vec<f64> = g.iter().map(|v| v / s).collect();
    let mut out = Vec::with_capacity(size * size);
    for &a in &g {
        for &b in &g {
            out.push(a * b);
        }
    }
    out
}

static SSIM_KERNEL: LazyLock<Vec<f64>> = LazyLock::new(|| gaussian_window(SSIM_WINDOW, SSIM_SIGMA));

fn ssim_filter(x: &Tensor) -> Result<Tensor> {
    filter2d(x, &SSIM_KERNEL, SSIM_WINDOW)
}

fn ssim_adjoint(x: &Tensor) -> Tensor {
    filter2d_adjoint(x, &SSIM_KERNEL, SSIM_WINDOW)
}

struct SsimStats {
    mu_x: Tensor,
    mu_y: Tensor,
    a1: Tensor,
    a2: Tensor,
    b1: Tensor,
    b2: Tensor,
    map: Tensor,
}

fn ssim_stats(x: &Tensor, y: &Tensor) -> Result<SsimStats> {
    if x.shape() != y.shape() {
        return Err(FusionError::shape(format!(
            "ssim operands differ: {:?} vs {:?}",
            x.shape(),
            y.shape()
        )));
    }
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mu_x = ssim_filter(x)?;
    let mu_y = ssim_filter(y)?;
    let xx = ssim_filter(&x.map(|v| v * v))?;
    let yy = ssim_filter(&y.map(|v| v * v))?;
    let xy = ssim_filter(&x.zip_map(y, |a, b| a * b)?)?;
    let n = x.len();
    let (mx, my) = (mu_x.data(), mu_y.data());
    let mut a1 = vec![0.0; n];
    let mut a2 = vec![0.0; n];
    let mut b1 = vec![0.0; n];
    let mut b2 = vec![0.0; n];
    let mut map = vec![0.0; n];
    for i in 0..n {
        let sxx = xx.data()[i] - mx[i] * mx[i];
        let syy = yy.data()[i] - my[i] * my[i];
        let sxy = xy.data()[i] - mx[i] * my[i];
        a1[i] = 2.0 * mx[i] * my[i] + c1;
        a2[i] = 2.0 * sxy + c2;
        b1[i] = mx[i] * mx[i] + my[i] * my[i] + c1;
        b2[i] = sxx + syy + c2;
        map[i] = a1[i] * a2[i] / (b1[i] * b2[i]);
    }
    let s = x.shape();
    Ok(SsimStats {
        mu_x,
        mu_y,
        a1: Tensor::new(s, a1)?,
        a2: Tensor::new(s, a2)?,
        b1: Tensor::new(s, b1)?,
        b2: Tensor::new(s, b2)?,
        map: Tensor::new(s, map)?,
    })
}

/// Mean SSIM over all pixels of all planes (Gaussian 11×11 window, σ = 1.5,
/// dynamic range 1).
pub fn ssim(x: &Tensor, y: &Tensor) -> Result<f64> {
    Ok(ssim_stats(x, y)?.map.mean())
}

/// Mean SSIM with its gradients with respect to both operands.
pub fn ssim_with_grads(x: &Tensor, y: &Tensor) -> Result<(f64, Tensor, Tensor)> {
    let st = ssim_stats(x, y)?;
    let dx = ssim_grad_first(x, y, &st, false);
    let dy = ssim_grad_first(y, x, &st, true);
    Ok((st.map.mean(), dx, dy))
}

/// Gradient of the mean SSIM with respect to its first operand only.
pub fn ssim_grad_x(x: &Tensor, y: &Tensor) -> Result<(f64, Tensor)> {
    let st = ssim_stats(x, y)?;
    let dx = ssim_grad_first(x, y, &st, false);
    Ok((st.map.mean(), dx))
}

// The SSIM map is symmetric in its operands, so the gradient w.r.t. the
// second operand is the same expression with the mean maps swapped.
fn ssim_grad_first(x: &Tensor, y: &Tensor, st: &SsimStats, swapped: bool) -> Tensor {
    let n = x.len();
    let inv_n = 1.0 / n as f64;
    let (mx, my) = if swapped {
        (st.mu_y.data(), st.mu_x.data())
    } else {
        (st.mu_x.data(), st.mu_y.data())
    };
    let (a1, a2, b1, b2, s) = (st.a1.data(), st.a2.data(), st.b1.data(), st.b2.data(), st.map.data());
    let mut g_mu = vec![0.0; n];
    let mut g_sq = vec![0.0; n];
    let mut g_cross = vec![0.0; n];
    for i in 0..n {
        let den = b1[i] * b2[i];
        let ds_dmu = 2.0 * my[i] * a2[i] / den - 2.0 * mx[i] * s[i] / b1[i];
        let ds_dsxy = 2.0 * a1[i] / den;
        let ds_dsxx = -s[i] / b2[i];
        g_mu[i] = inv_n * (ds_dmu - 2.0 * mx[i] * ds_dsxx - my[i] * ds_dsxy);
        g_sq[i] = inv_n * ds_dsxx;
        g_cross[i] = inv_n * ds_dsxy;
    }
    let shape = x.shape();
    let t_mu = ssim_adjoint(&Tensor::new(shape, g_mu).unwrap());
    let t_sq = ssim_adjoint(&Tensor::new(shape, g_sq).unwrap());
    let t_cross = ssim_adjoint(&Tensor::new(shape, g_cross).unwrap());
    let mut out = t_mu;
    for (i, o) in out.data_mut().iter_mut().enumerate() {
        *o += 2.0 * x.data()[i] * t_sq.data()[i] + y.data()[i] * t_cross.data()[i];
    }
    out
}

/// Mean absolute difference `(1/N) Σ |x − target|`.
pub fn mean_abs_diff(x: &Tensor, target: &Tensor) -> Result<f64> {
    x.expect_shape(target.shape())?;
    Ok(x.data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / x.len() as f64)
}

pub fn mean_abs_diff_backward(x: &Tensor, target: &Tensor, grad: f64) -> Tensor {
    let inv_n = grad / x.len() as f64;
    x.zip_map(target, |a, b| (a - b).signum_or_zero() * inv_n)
        .expect("shape checked at record time")
}

/// Elementwise maximum.
pub fn maximum(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.zip_map(b, f64::max)
}
