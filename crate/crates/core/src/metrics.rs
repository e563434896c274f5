//! Fusion quality statistics: SD, EN, MI, SCD and Qabf.
//!
//! All metrics read gray images on the byte scale (colour inputs are
//! reduced to BT.601 luma). Histogram-based metrics quantize to 256 levels
//! with half-to-even rounding.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use crate::error::{FusionError, Result};
use crate::imaging::Image;
use crate::nn::{ops, Tensor};

/// Edge-preservation sigmoid constants (strength then orientation).
pub const QABF_GAMMA_G: f64 = 0.9994;
pub const QABF_KAPPA_G: f64 = -15.0;
pub const QABF_SIGMA_G: f64 = 0.5;
pub const QABF_GAMMA_A: f64 = 0.9879;
pub const QABF_KAPPA_A: f64 = -22.0;
pub const QABF_SIGMA_A: f64 = 0.8;

fn byte_values(img: &Image) -> Result<Image> {
    Ok(img.luma()?.to_byte())
}

fn check_same(images: &[&Image]) -> Result<()> {
    let dims = images[0].dims();
    if let Some(other) = images.iter().find(|i| i.dims() != dims) {
        return Err(FusionError::shape(format!(
            "metric operands differ in size: {dims:?} vs {:?}",
            other.dims()
        )));
    }
    Ok(())
}

/// Population standard deviation of the pixel values.
pub fn metric_sd(f: &Image) -> Result<f64> {
    let v = byte_values(f)?;
    let n = v.data().len() as f64;
    let mean = v.data().iter().sum::<f64>() / n;
    let var = v.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt())
}

fn entropy_of(counts: &[u64], total: u64) -> f64 {
    let total = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum()
}

/// Shannon entropy (bits) of the 256-bin histogram.
pub fn metric_en(f: &Image) -> Result<f64> {
    let levels = byte_values(f)?.to_levels();
    let mut hist = [0u64; 256];
    for &l in &levels {
        hist[l as usize] += 1;
    }
    Ok(entropy_of(&hist, levels.len() as u64))
}

/// Mutual information (bits) of two images from their joint histogram.
pub fn mutual_information(x: &Image, y: &Image) -> Result<f64> {
    check_same(&[x, y])?;
    let lx = byte_values(x)?.to_levels();
    let ly = byte_values(y)?.to_levels();
    let mut joint = vec![0u64; 256 * 256];
    let mut hx = [0u64; 256];
    let mut hy = [0u64; 256];
    for (&a, &b) in lx.iter().zip(&ly) {
        joint[a as usize * 256 + b as usize] += 1;
        hx[a as usize] += 1;
        hy[b as usize] += 1;
    }
    let n = lx.len() as u64;
    Ok(entropy_of(&hx, n) + entropy_of(&hy, n) - entropy_of(&joint, n))
}

/// `MI(f, a) + MI(f, b)`.
pub fn metric_mi(f: &Image, a: &Image, b: &Image) -> Result<f64> {
    check_same(&[f, a, b])?;
    Ok(mutual_information(f, a)? + mutual_information(f, b)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScdScore {
    pub value: f64,
    /// A correlation term had a zero-variance operand and was scored 0.
    pub degenerate: bool,
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Sum of correlations of differences, `r(f − b, a) + r(f − a, b)`.
pub fn metric_scd(f: &Image, a: &Image, b: &Image) -> Result<ScdScore> {
    check_same(&[f, a, b])?;
    let (f, a, b) = (byte_values(f)?, byte_values(a)?, byte_values(b)?);
    let diff = |x: &Image, y: &Image| -> Vec<f64> { x.data().iter().zip(y.data()).map(|(p, q)| p - q).collect() };
    let mut degenerate = false;
    let mut value = 0.0;
    for (d, src) in [(diff(&f, &b), &a), (diff(&f, &a), &b)] {
        match pearson(&d, src.data()) {
            Some(r) => value += r,
            None => degenerate = true,
        }
    }
    Ok(ScdScore { value, degenerate })
}

struct EdgeField {
    strength: Vec<f64>,
    angle: Vec<f64>,
}

fn edge_field(img: &Image) -> Result<EdgeField> {
    let v = byte_values(img)?;
    let t = Tensor::new([1, 1, v.height(), v.width()], v.data().to_vec())?;
    let (gx, gy) = ops::sobel(&t)?;
    let strength = gx.data().iter().zip(gy.data()).map(|(x, y)| x.hypot(*y)).collect();
    let angle = gx
        .data()
        .iter()
        .zip(gy.data())
        .map(|(&x, &y)| edge_angle(x, y))
        .collect();
    Ok(EdgeField { strength, angle })
}

/// Orientation `atan(gy / gx)`, with `π/2` where `gx = 0`.
pub fn edge_angle(gx: f64, gy: f64) -> f64 {
    if gx == 0.0 {
        FRAC_PI_2
    } else {
        (gy / gx).atan()
    }
}

/// Per-pixel preservation of a source edge `(g_src, α_src)` in the fused
/// image `(g_f, α_f)`.
pub fn edge_preservation(g_src: f64, a_src: f64, g_f: f64, a_f: f64) -> f64 {
    let ratio = if g_src == 0.0 && g_f == 0.0 {
        0.0
    } else if g_src > g_f {
        g_f / g_src
    } else {
        g_src / g_f
    };
    let orient = 1.0 - (a_src - a_f).abs() / FRAC_PI_2;
    let qg = QABF_GAMMA_G / (1.0 + (QABF_KAPPA_G * (ratio - QABF_SIGMA_G)).exp());
    let qa = QABF_GAMMA_A / (1.0 + (QABF_KAPPA_A * (orient - QABF_SIGMA_A)).exp());
    qg * qa
}

/// Edge-strength-weighted transfer of source edges into `f`, in `[0, 1]`.
/// Zero when neither source has any edge.
pub fn metric_qabf(f: &Image, a: &Image, b: &Image) -> Result<f64> {
    check_same(&[f, a, b])?;
    let (ef, ea, eb) = (edge_field(f)?, edge_field(a)?, edge_field(b)?);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..ef.strength.len() {
        let (ga, gb) = (ea.strength[i], eb.strength[i]);
        if ga == 0.0 && gb == 0.0 {
            continue;
        }
        let qa = edge_preservation(ga, ea.angle[i], ef.strength[i], ef.angle[i]);
        let qb = edge_preservation(gb, eb.angle[i], ef.strength[i], ef.angle[i]);
        num += qa * ga + qb * gb;
        den += ga + gb;
    }
    Ok(if den == 0.0 { 0.0 } else { num / den })
}

/// One evaluation item: sources and the fused result.
#[derive(Debug, Clone)]
pub struct Triple {
    pub name: String,
    pub ir: Image,
    pub vi: Image,
    pub fused: Image,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageMetrics {
    pub name: String,
    pub sd: f64,
    pub en: f64,
    pub mi: f64,
    pub scd: f64,
    pub qabf: f64,
    pub scd_degenerate: bool,
}

impl ImageMetrics {
    pub fn compute(name: &str, ir: &Image, vi: &Image, fused: &Image) -> Result<Self> {
        let scd = metric_scd(fused, ir, vi)?;
        Ok(ImageMetrics {
            name: name.to_string(),
            sd: metric_sd(fused)?,
            en: metric_en(fused)?,
            mi: metric_mi(fused, ir, vi)?,
            scd: scd.value,
            qabf: metric_qabf(fused, ir, vi)?,
            scd_degenerate: scd.degenerate,
        })
    }

    fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{}", self.name, self.sd, self.en, self.mi, self.scd, self.qabf)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub per_image: Vec<ImageMetrics>,
    pub mean: ImageMetrics,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "name,sd,en,mi,scd,qabf";

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", Self::CSV_HEADER).unwrap();
        for row in self.per_image.iter().chain(std::iter::once(&self.mean)) {
            writeln!(out, "{}", row.csv_row()).unwrap();
        }
        out
    }
}

pub fn evaluate_set(triples: &[Triple]) -> Result<MetricReport> {
    if triples.is_empty() {
        return Err(FusionError::EmptySet("no image triples to evaluate".into()));
    }
    let per_image = triples
        .iter()
        .map(|t| ImageMetrics::compute(&t.name, &t.ir, &t.vi, &t.fused))
        .collect::<Result<Vec<_>>>()?;
    let n = per_image.len() as f64;
    let avg = |f: fn(&ImageMetrics) -> f64| per_image.iter().map(f).sum::<f64>() / n;
    let mean = ImageMetrics {
        name: "MEAN".into(),
        sd: avg(|m| m.sd),
        en: avg(|m| m.en),
        mi: avg(|m| m.mi),
        scd: avg(|m| m.scd),
        qabf: avg(|m| m.qabf),
        scd_degenerate: per_image.iter().any(|m| m.scd_degenerate),
    };
    Ok(MetricReport { per_image, mean })
}
