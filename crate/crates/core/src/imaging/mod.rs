//! Raster type, file I/O, YCbCr conversion and patch preparation.
//!
//! Network and loss math runs in unit range; byte range appears only at
//! file boundaries and in the metrics.

mod color;
pub mod synthetic;

use std::path::Path;

pub use color::{recombine, rgb_to_ycbcr, ycbcr_to_rgb};

use crate::error::{FusionError, Result};
use crate::nn::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelRange {
    /// `[0, 1]`
    Unit,
    /// `[0, 255]`
    Byte,
}

impl PixelRange {
    pub fn max(self) -> f64 {
        match self {
            PixelRange::Unit => 1.0,
            PixelRange::Byte => 255.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorSpace {
    Gray,
    Rgb,
    YCbCr,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Gray => 1,
            ColorSpace::Rgb | ColorSpace::YCbCr => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ColorSpace::Gray => "gray",
            ColorSpace::Rgb => "rgb",
            ColorSpace::YCbCr => "ycbcr",
        }
    }
}

/// Real-valued raster with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    space: ColorSpace,
    range: PixelRange,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, space: ColorSpace, range: PixelRange, data: Vec<f64>) -> Result<Self> {
        let expected = width * height * space.channels();
        if data.len() != expected {
            return Err(FusionError::shape(format!(
                "{width}x{height} {} image needs {expected} samples, got {}",
                space.name(),
                data.len()
            )));
        }
        let max = range.max();
        if let Some(v) = data.iter().find(|v| !(0.0..=max).contains(*v)) {
            return Err(FusionError::Range(format!("{v} outside [0, {max}]")));
        }
        Ok(Image {
            width,
            height,
            space,
            range,
            data,
        })
    }

    /// Single-channel unit-range image; values are clamped into `[0, 1]`.
    pub fn from_unit_plane(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let data = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Image::new(width, height, ColorSpace::Gray, PixelRange::Unit, data)
    }

    pub fn gray_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| b as f64).collect();
        Image::new(width, height, ColorSpace::Gray, PixelRange::Byte, data)
    }

    pub fn rgb_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| b as f64).collect();
        Image::new(width, height, ColorSpace::Rgb, PixelRange::Byte, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn range(&self) -> PixelRange {
        self.range
    }

    pub fn channels(&self) -> usize {
        self.space.channels()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels() + c]
    }

    pub fn to_range(&self, range: PixelRange) -> Image {
        if range == self.range {
            return self.clone();
        }
        let convert = |v: f64| match range {
            PixelRange::Unit => v / 255.0,
            PixelRange::Byte => v * 255.0,
        };
        Image {
            data: self.data.iter().map(|&v| convert(v).clamp(0.0, range.max())).collect(),
            range,
            ..*self
        }
    }

    pub fn to_unit(&self) -> Image {
        self.to_range(PixelRange::Unit)
    }

    pub fn to_byte(&self) -> Image {
        self.to_range(PixelRange::Byte)
    }

    /// One channel as a gray image in the same range.
    pub fn channel(&self, c: usize) -> Image {
        let n = self.channels();
        assert!(c < n, "channel {c} out of range");
        Image {
            data: self.data.iter().skip(c).step_by(n).copied().collect(),
            space: ColorSpace::Gray,
            ..*self
        }
    }

    /// Gray images pass through; RGB and YCbCr yield the BT.601 luma plane.
    pub fn luma(&self) -> Result<Image> {
        match self.space {
            ColorSpace::Gray => Ok(self.clone()),
            ColorSpace::YCbCr => Ok(self.channel(0)),
            ColorSpace::Rgb => Ok(rgb_to_ycbcr(self)?.channel(0)),
        }
    }

    /// Byte levels rounded half-to-even.
    pub fn to_levels(&self) -> Vec<u8> {
        self.to_byte()
            .data
            .iter()
            .map(|v| v.round_ties_even().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// `(1, 1, H, W)` unit-range tensor of a gray image.
    pub fn to_tensor(&self) -> Result<Tensor> {
        if self.space != ColorSpace::Gray {
            return Err(FusionError::Space {
                expected: "gray",
                actual: self.space.name(),
            });
        }
        Tensor::new([1, 1, self.height, self.width], self.to_unit().data)
    }

    /// Gray unit-range image from batch item `b`, channel 0.
    pub fn from_tensor(t: &Tensor, b: usize) -> Result<Image> {
        Image::from_unit_plane(t.width(), t.height(), t.plane(b, 0).to_vec())
    }

    /// Bilinear resampling with half-pixel centers and edge clamping, no
    /// antialiasing. Same-size requests return an exact copy.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Image {
        if (width, height) == (self.width, self.height) {
            return self.clone();
        }
        let n = self.channels();
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let taps = |dst: usize, scale: f64, len: usize| {
            let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
            let i0 = src.floor() as usize;
            let i1 = (i0 + 1).min(len - 1);
            (i0, i1, src - i0 as f64)
        };
        let mut data = Vec::with_capacity(width * height * n);
        for y in 0..height {
            let (y0, y1, fy) = taps(y, sy, self.height);
            for x in 0..width {
                let (x0, x1, fx) = taps(x, sx, self.width);
                for c in 0..n {
                    let top = self.get(x0, y0, c) * (1.0 - fx) + self.get(x1, y0, c) * fx;
                    let bot = self.get(x0, y1, c) * (1.0 - fx) + self.get(x1, y1, c) * fx;
                    data.push((top * (1.0 - fy) + bot * fy).clamp(0.0, self.range.max()));
                }
            }
        }
        Image {
            width,
            height,
            data,
            ..*self
        }
    }
}

fn image_err(path: &Path, e: image::ImageError) -> FusionError {
    match e {
        image::ImageError::IoError(io) => FusionError::io(path, io),
        image::ImageError::Unsupported(u) => FusionError::Format(format!("{}: {u}", path.display())),
        other => FusionError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, other.to_string())),
    }
}

/// Decodes an 8-bit PNG/JPEG/BMP into a byte-range gray or RGB image.
/// Alpha channels are dropped.
pub fn load_image(path: &Path) -> Result<Image> {
    let reader = image::ImageReader::open(path)
        .map_err(|e| FusionError::io(path, e))?
        .with_guessed_format()
        .map_err(|e| FusionError::io(path, e))?;
    let decoded = reader.decode().map_err(|e| image_err(path, e))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    use image::DynamicImage as D;
    match decoded {
        D::ImageLuma8(buf) => Image::gray_bytes(w, h, buf.as_raw()),
        D::ImageLumaA8(_) => Image::gray_bytes(w, h, decoded.to_luma8().as_raw()),
        D::ImageRgb8(buf) => Image::rgb_bytes(w, h, buf.as_raw()),
        D::ImageRgba8(_) => Image::rgb_bytes(w, h, decoded.to_rgb8().as_raw()),
        other => Err(FusionError::Format(format!(
            "{}: unsupported pixel type {:?}, only 8-bit images are accepted",
            path.display(),
            other.color()
        ))),
    }
}

/// Writes a gray or RGB image as 8 bits per channel, rounding half-to-even.
/// The encoder is picked from the file extension.
pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    let color = match img.space {
        ColorSpace::Gray => image::ExtendedColorType::L8,
        ColorSpace::Rgb => image::ExtendedColorType::Rgb8,
        ColorSpace::YCbCr => {
            return Err(FusionError::Space {
                expected: "gray or rgb",
                actual: "ycbcr",
            })
        }
    };
    image::save_buffer(path, &img.to_levels(), img.width as u32, img.height as u32, color)
        .map_err(|e| image_err(path, e))
}

/// Registered infrared/visible pair of unit-range gray patches.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchPair {
    pub ir: Image,
    pub vi: Image,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatchSet {
    pub size: usize,
    pub patches: Vec<PatchPair>,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Stacks the selected pairs into `(B, 1, S, S)` tensors `(ir, vi)`.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Tensor)> {
        let mut irs = Vec::with_capacity(indices.len());
        let mut vis = Vec::with_capacity(indices.len());
        for &i in indices {
            let p = &self.patches[i];
            irs.push(p.ir.to_tensor()?);
            vis.push(p.vi.to_tensor()?);
        }
        Ok((Tensor::stack_batch(&irs)?, Tensor::stack_batch(&vis)?))
    }
}

/// Resizes every pair to `size × size` gray unit-range patches, keeping order.
/// Colour inputs are reduced to luma first.
pub fn extract_patches(pairs: &[(Image, Image)], size: usize) -> Result<PatchSet> {
    let mut patches = Vec::with_capacity(pairs.len());
    for (i, (ir, vi)) in pairs.iter().enumerate() {
        if ir.dims() != vi.dims() {
            return Err(FusionError::shape(format!(
                "pair {i}: infrared {:?} and visible {:?} differ in size",
                ir.dims(),
                vi.dims()
            )));
        }
        let prep = |img: &Image| -> Result<Image> { Ok(img.luma()?.to_unit().resize_bilinear(size, size)) };
        patches.push(PatchPair {
            ir: prep(ir)?,
            vi: prep(vi)?,
        });
    }
    Ok(PatchSet { size, patches })
}
