use std::fmt;

use rand::Rng;

use crate::error::{FusionError, Result};

/// Dense `f64` tensor in (batch, channels, height, width) layout, row-major.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(FusionError::shape(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: [usize; 4], value: f64) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: [1, 1, 1, 1],
            data: vec![value],
        }
    }

    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut([usize; 4]) -> f64) -> Self {
        let [b, c, h, w] = shape;
        let mut data = Vec::with_capacity(b * c * h * w);
        for ib in 0..b {
            for ic in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f([ib, ic, y, x]));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    /// Uniform samples in `[lo, hi)`.
    pub fn random_uniform(shape: [usize; 4], lo: f64, hi: f64, rng: &mut impl Rng) -> Self {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(lo..hi)).collect();
        Tensor { shape, data }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn height(&self) -> usize {
        self.shape[2]
    }

    pub fn width(&self) -> usize {
        self.shape[3]
    }

    pub fn plane_len(&self) -> usize {
        self.shape[2] * self.shape[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn index(&self, [b, c, y, x]: [usize; 4]) -> usize {
        ((b * self.shape[1] + c) * self.shape[2] + y) * self.shape[3] + x
    }

    pub fn at(&self, idx: [usize; 4]) -> f64 {
        self.data[self.index(idx)]
    }

    pub fn set(&mut self, idx: [usize; 4], value: f64) {
        let i = self.index(idx);
        self.data[i] = value;
    }

    /// Contiguous H×W plane of one (batch, channel) pair.
    pub fn plane(&self, b: usize, c: usize) -> &[f64] {
        let n = self.plane_len();
        let start = (b * self.shape[1] + c) * n;
        &self.data[start..start + n]
    }

    pub fn plane_mut(&mut self, b: usize, c: usize) -> &mut [f64] {
        let n = self.plane_len();
        let start = (b * self.shape[1] + c) * n;
        &mut self.data[start..start + n]
    }

    /// All channels of one batch item.
    pub fn item(&self, b: usize) -> &[f64] {
        let n = self.shape[1] * self.plane_len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.expect_shape(other.shape)?;
        Ok(Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn expect_shape(&self, shape: [usize; 4]) -> Result<()> {
        if self.shape != shape {
            return Err(FusionError::shape(format!(
                "expected shape {shape:?}, got {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    /// Reinterpret with a new shape of equal element count.
    pub fn reshape(self, shape: [usize; 4]) -> Result<Tensor> {
        Tensor::new(shape, self.data)
    }

    /// Spatial transpose of every plane.
    pub fn transpose_hw(&self) -> Tensor {
        let [b, c, h, w] = self.shape;
        Tensor::from_fn([b, c, w, h], |[ib, ic, y, x]| self.at([ib, ic, x, y]))
    }

    /// Channel-wise concatenation; all parts must share batch and spatial dims.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| FusionError::shape("concat of zero tensors"))?;
        let [b, _, h, w] = first.shape;
        for p in parts {
            if p.shape[0] != b || p.shape[2] != h || p.shape[3] != w {
                return Err(FusionError::shape(format!(
                    "cannot concat {:?} with {:?}",
                    first.shape, p.shape
                )));
            }
        }
        let c_total: usize = parts.iter().map(|p| p.shape[1]).sum();
        let mut data = Vec::with_capacity(b * c_total * h * w);
        for ib in 0..b {
            for p in parts {
                data.extend_from_slice(p.item(ib));
            }
        }
        Ok(Tensor {
            shape: [b, c_total, h, w],
            data,
        })
    }

    /// Channels `[start, start + count)` of every batch item.
    pub fn slice_channels(&self, start: usize, count: usize) -> Tensor {
        let [b, c, h, w] = self.shape;
        assert!(start + count <= c, "channel slice out of range");
        let n = h * w;
        let mut data = Vec::with_capacity(b * count * n);
        for ib in 0..b {
            let base = (ib * c + start) * n;
            data.extend_from_slice(&self.data[base..base + count * n]);
        }
        Tensor {
            shape: [b, count, h, w],
            data,
        }
    }

    /// Batch items `[start, start + count)`.
    pub fn slice_batch(&self, start: usize, count: usize) -> Tensor {
        let [b, c, h, w] = self.shape;
        assert!(start + count <= b, "batch slice out of range");
        let n = c * h * w;
        Tensor {
            shape: [count, c, h, w],
            data: self.data[start * n..(start + count) * n].to_vec(),
        }
    }

    pub fn stack_batch(items: &[Tensor]) -> Result<Tensor> {
        let first = items
            .first()
            .ok_or_else(|| FusionError::EmptySet("stack of zero tensors".into()))?;
        let [_, c, h, w] = first.shape;
        let mut data = Vec::with_capacity(items.len() * first.len());
        let mut total_b = 0;
        for t in items {
            if t.shape[1..] != [c, h, w] {
                return Err(FusionError::shape(format!(
                    "cannot stack {:?} with {:?}",
                    first.shape, t.shape
                )));
            }
            total_b += t.shape[0];
            data.extend_from_slice(&t.data);
        }
        Ok(Tensor {
            shape: [total_b, c, h, w],
            data,
        })
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let preview: Vec<_> = self.data.iter().take(6).collect();
        write!(f, "Tensor{:?} {:?}", self.shape, preview)?;
        if self.data.len() > 6 {
            write!(f, "..")?;
        }
        Ok(())
    }
}
