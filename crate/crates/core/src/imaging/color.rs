//! Full-range BT.601 RGB ↔ YCbCr.

use std::sync::LazyLock;

use super::{ColorSpace, Image, PixelRange};
use crate::error::{FusionError, Result};

const FORWARD: [[f64; 3]; 3] = [
    [0.299, 0.587, 0.114],
    [-0.168736, -0.331264, 0.5],
    [0.5, -0.418688, -0.081312],
];
const OFFSET: [f64; 3] = [0.0, 128.0, 128.0];

static INVERSE: LazyLock<[[f64; 3]; 3]> = LazyLock::new(|| invert3(&FORWARD));

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let cof = |r: usize, c: usize| {
        let (r0, r1) = ((r + 1) % 3, (r + 2) % 3);
        let (c0, c1) = ((c + 1) % 3, (c + 2) % 3);
        m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
    };
    let det = m[0][0] * cof(0, 0) + m[0][1] * cof(0, 1) + m[0][2] * cof(0, 2);
    let mut inv = [[0.0; 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = cof(c, r) / det;
        }
    }
    inv
}

fn convert(img: &Image, from: ColorSpace, to: ColorSpace, f: impl Fn([f64; 3]) -> [f64; 3]) -> Result<Image> {
    if img.space() != from {
        return Err(FusionError::Space {
            expected: from.name(),
            actual: img.space().name(),
        });
    }
    let bytes = img.to_byte();
    let mut data = Vec::with_capacity(bytes.data().len());
    for px in bytes.data().chunks_exact(3) {
        let out = f([px[0], px[1], px[2]]);
        data.extend(out.iter().map(|v| v.clamp(0.0, 255.0)));
    }
    Image::new(img.width(), img.height(), to, PixelRange::Byte, data)
}

/// Per-pixel full-range BT.601 conversion. Output is byte range, unrounded.
pub fn rgb_to_ycbcr(img: &Image) -> Result<Image> {
    convert(img, ColorSpace::Rgb, ColorSpace::YCbCr, |p| {
        let mut out = OFFSET;
        for (o, row) in out.iter_mut().zip(&FORWARD) {
            *o += row[0] * p[0] + row[1] * p[1] + row[2] * p[2];
        }
        out
    })
}

/// Inverse of [`rgb_to_ycbcr`], clamped to `[0, 255]`.
pub fn ycbcr_to_rgb(img: &Image) -> Result<Image> {
    let inv = &*INVERSE;
    convert(img, ColorSpace::YCbCr, ColorSpace::Rgb, |p| {
        let d = [p[0] - OFFSET[0], p[1] - OFFSET[1], p[2] - OFFSET[2]];
        let mut out = [0.0; 3];
        for (o, row) in out.iter_mut().zip(inv) {
            *o = row[0] * d[0] + row[1] * d[1] + row[2] * d[2];
        }
        out
    })
}

/// Reattaches chroma planes to a fused luma plane and returns RGB.
pub fn recombine(fused_y: &Image, cb: &Image, cr: &Image) -> Result<Image> {
    for (name, plane) in [("fused luma", fused_y), ("cb", cb), ("cr", cr)] {
        if plane.space() != ColorSpace::Gray {
            return Err(FusionError::Space {
                expected: "gray",
                actual: plane.space().name(),
            });
        }
        if plane.dims() != fused_y.dims() {
            return Err(FusionError::shape(format!(
                "{name} plane is {:?}, fused luma is {:?}",
                plane.dims(),
                fused_y.dims()
            )));
        }
    }
    let (y, cb, cr) = (fused_y.to_byte(), cb.to_byte(), cr.to_byte());
    let mut data = Vec::with_capacity(y.data().len() * 3);
    for ((&l, &b), &r) in y.data().iter().zip(cb.data()).zip(cr.data()) {
        data.extend([l, b, r]);
    }
    let ycc = Image::new(fused_y.width(), fused_y.height(), ColorSpace::YCbCr, PixelRange::Byte, data)?;
    ycbcr_to_rgb(&ycc)
}
