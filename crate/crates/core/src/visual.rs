//! Deterministic visual descriptor and cosine change distance.
//!
//! Pipeline: grayscale (BT.601 luma) → 32×32 bilinear resize with half-pixel
//! centres → flatten → scale to [0,1] → mean-centre → L2-normalise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIDE: usize = 32;
pub const DESCRIPTOR_LEN: usize = SIDE * SIDE;
/// Centred vectors with a norm below this carry no structure.
pub const NORM_EPSILON: f64 = 1e-12;

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Row-major 8-bit pixel grid with 1 (gray), 3 (RGB) or 4 (RGBA) channels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("frame must be at least 1x1"));
        }
        if !matches!(channels, 1 | 3 | 4) {
            return Err(Error::invalid(format!("unsupported channel count {channels}")));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::invalid(format!("expected {} pixel bytes, got {}", width * height * channels, pixels.len())));
        }
        Ok(Frame { width, height, channels, pixels })
    }

    pub fn gray(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        Frame::new(width, height, 1, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    fn luma(&self) -> Vec<f64> {
        match self.channels {
            1 => self.pixels.iter().map(|&p| f64::from(p)).collect(),
            c => self
                .pixels
                .chunks_exact(c)
                .map(|px| LUMA[0] * f64::from(px[0]) + LUMA[1] * f64::from(px[1]) + LUMA[2] * f64::from(px[2]))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    values: Vec<f64>,
    /// Set when the centred vector had (near) zero norm; values are then all zero.
    degenerate: bool,
}

impl Descriptor {
    /// Wrap raw values, e.g. an externally computed descriptor.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() != DESCRIPTOR_LEN {
            return Err(Error::invalid(format!("descriptor must have {DESCRIPTOR_LEN} values, got {}", values.len())));
        }
        let degenerate = l2(&values) < NORM_EPSILON;
        Ok(Descriptor { values, degenerate })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Debug dump: 1024 comma-separated decimals.
    pub fn to_csv(&self) -> String {
        self.values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
    }
}

impl std::ops::Neg for Descriptor {
    type Output = Descriptor;

    fn neg(self) -> Descriptor {
        Descriptor { values: self.values.into_iter().map(|v| -v).collect(), degenerate: self.degenerate }
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Source sample position and blend weight for one output coordinate.
fn sample_axis(out: usize, out_len: usize, in_len: usize) -> (usize, usize, f64) {
    let pos = (out as f64 + 0.5) * in_len as f64 / out_len as f64 - 0.5;
    let pos = pos.clamp(0.0, (in_len - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(in_len - 1);
    (lo, hi, pos - lo as f64)
}

fn resize_bilinear(src: &[f64], width: usize, height: usize) -> Vec<f64> {
    let cols: Vec<_> = (0..SIDE).map(|x| sample_axis(x, SIDE, width)).collect();
    let mut out = Vec::with_capacity(DESCRIPTOR_LEN);
    for y in 0..SIDE {
        let (y0, y1, fy) = sample_axis(y, SIDE, height);
        for &(x0, x1, fx) in &cols {
            let top = (1.0 - fx) * src[y0 * width + x0] + fx * src[y0 * width + x1];
            let bottom = (1.0 - fx) * src[y1 * width + x0] + fx * src[y1 * width + x1];
            out.push((1.0 - fy) * top + fy * bottom);
        }
    }
    out
}

pub fn encode(frame: &Frame) -> Result<Descriptor> {
    if frame.width == 0 || frame.height == 0 || frame.pixels.is_empty() {
        return Err(Error::invalid("empty frame"));
    }
    let mut values: Vec<f64> = resize_bilinear(&frame.luma(), frame.width, frame.height).into_iter().map(|v| v / 255.0).collect();
    let mean = values.iter().sum::<f64>() / DESCRIPTOR_LEN as f64;
    values.iter_mut().for_each(|v| *v -= mean);

    let norm = l2(&values);
    if norm < NORM_EPSILON {
        return Ok(Descriptor { values: vec![0.0; DESCRIPTOR_LEN], degenerate: true });
    }
    values.iter_mut().for_each(|v| *v /= norm);
    Ok(Descriptor { values, degenerate: false })
}

/// `1 - cos(a, b)` in [0, 2]; zero when either descriptor is degenerate.
pub fn visual_distance(a: &Descriptor, b: &Descriptor) -> Result<f64> {
    if a.values.len() != b.values.len() {
        return Err(Error::invalid(format!("descriptor length mismatch: {} vs {}", a.values.len(), b.values.len())));
    }
    if a.degenerate || b.degenerate {
        return Ok(0.0);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let cos = dot / (l2(&a.values) * l2(&b.values));
    Ok((1.0 - cos).clamp(0.0, 2.0))
}
