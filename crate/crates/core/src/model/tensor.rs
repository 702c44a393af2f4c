use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Channel-major `channels x height x width` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "expected {} values for {channels}x{height}x{width}, got {}",
                channels * height * width,
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, row: usize, col: usize) -> T {
        self.data[(c * self.height + row) * self.width + col]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Stacks `parts` along the channel axis.
    pub fn concat(parts: &[&FeatureMap<T>]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("cannot concatenate zero feature maps".into()))?;
        let (h, w) = (first.height, first.width);
        if let Some(bad) = parts.iter().find(|p| (p.height, p.width) != (h, w)) {
            return Err(Error::Shape(format!(
                "spatial mismatch in concat: {}x{} vs {}x{}",
                h, w, bad.height, bad.width
            )));
        }
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.data.len()).sum());
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Ok(Self {
            channels: parts.iter().map(|p| p.channels).sum(),
            height: h,
            width: w,
            data,
        })
    }

    /// Channels `[start, start + count)`.
    pub fn slice_channels(&self, start: usize, count: usize) -> Self {
        let n = self.plane_len();
        Self {
            channels: count,
            height: self.height,
            width: self.width,
            data: self.data[start * n..(start + count) * n].to_vec(),
        }
    }

    /// Spatial crop `[row0, row0 + h) x [col0, col0 + w)` of every channel.
    pub fn crop(&self, row0: usize, col0: usize, h: usize, w: usize) -> Self {
        let mut out = Self::zeros(self.channels, h, w);
        for c in 0..self.channels {
            let src = self.plane(c);
            let dst = out.plane_mut(c);
            for r in 0..h {
                let s = (row0 + r) * self.width + col0;
                dst[r * w..(r + 1) * w].copy_from_slice(&src[s..s + w]);
            }
        }
        out
    }
}
