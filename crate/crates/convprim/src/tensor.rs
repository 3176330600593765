//! Quantized tensor and weight containers.
//!
//! All activations are stored as 8-bit signed integers in row-major
//! height -> width -> channel (HWC) order, so one spatial position holds a
//! contiguous channel vector. A tensor carries a power-of-two scale exponent
//! `dec`: element `e` represents the real value `e * 2^(dec - 7)`.

use crate::error::{Error, Result};

/// 8-bit quantized activation tensor in HWC layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QTensor {
    height: usize,
    width: usize,
    channels: usize,
    dec: i32,
    data: Vec<i8>,
}

impl QTensor {
    /// Builds a tensor from flat HWC data.
    pub fn new(height: usize, width: usize, channels: usize, dec: i32, data: Vec<i8>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Dimension(format!(
                "tensor dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "data length {} does not match shape {height}x{width}x{channels} = {expected}",
                data.len()
            )));
        }
        Ok(QTensor { height, width, channels, dec, data })
    }

    /// All-zero tensor of the given shape.
    pub fn zeros(height: usize, width: usize, channels: usize, dec: i32) -> Result<Self> {
        Self::new(height, width, channels, dec, vec![0; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dec(&self) -> i32 {
        self.dec
    }

    pub fn data(&self) -> &[i8] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flat offset of `(h, w, c)`: `(h * width + w) * channels + c`.
    ///
    /// Caller is responsible for coordinates being in range; combined with
    /// slice indexing this stays memory-safe either way.
    #[inline]
    pub fn flat_index(&self, h: usize, w: usize, c: usize) -> usize {
        (h * self.width + w) * self.channels + c
    }

    /// Bounds-checked element access.
    pub fn at(&self, h: usize, w: usize, c: usize) -> Result<i8> {
        if h >= self.height || w >= self.width || c >= self.channels {
            return Err(Error::Bounds(format!(
                "index ({h},{w},{c}) out of range for {}x{}x{} tensor",
                self.height, self.width, self.channels
            )));
        }
        Ok(self.data[self.flat_index(h, w, c)])
    }
}

/// 8-bit quantized convolution weights.
///
/// Layout is filter-major (OHWI): filter `n` occupies the contiguous slice
/// `[n * filter_len, (n + 1) * filter_len)` flattened in
/// (kernel-row, kernel-col, channel) order, which is exactly the order an
/// im2col column is sampled in.
///
/// `bias`, when present, holds one 32-bit value per output channel expressed
/// at accumulator scale `dec_weight + dec_input`; kernels add it before the
/// output shift.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QWeights {
    kernel_h: usize,
    kernel_w: usize,
    in_channels_per_group: usize,
    out_channels: usize,
    dec: i32,
    data: Vec<i8>,
    bias: Option<Vec<i32>>,
}

impl QWeights {
    pub fn new(
        kernel_h: usize,
        kernel_w: usize,
        in_channels_per_group: usize,
        out_channels: usize,
        dec: i32,
        data: Vec<i8>,
        bias: Option<Vec<i32>>,
    ) -> Result<Self> {
        if kernel_h == 0 || kernel_w == 0 || in_channels_per_group == 0 || out_channels == 0 {
            return Err(Error::Dimension(
                "weight dimensions must be positive".to_string(),
            ));
        }
        let expected = kernel_h * kernel_w * in_channels_per_group * out_channels;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "weight data length {} does not match {kernel_h}x{kernel_w}x{in_channels_per_group}x{out_channels} = {expected}",
                data.len()
            )));
        }
        if let Some(b) = &bias {
            if b.len() != out_channels {
                return Err(Error::Dimension(format!(
                    "bias length {} does not match {out_channels} output channels",
                    b.len()
                )));
            }
        }
        Ok(QWeights { kernel_h, kernel_w, in_channels_per_group, out_channels, dec, data, bias })
    }

    /// All-zero weights, no bias.
    pub fn zeros(
        kernel_h: usize,
        kernel_w: usize,
        in_channels_per_group: usize,
        out_channels: usize,
        dec: i32,
    ) -> Result<Self> {
        let len = kernel_h * kernel_w * in_channels_per_group * out_channels;
        Self::new(kernel_h, kernel_w, in_channels_per_group, out_channels, dec, vec![0; len], None)
    }

    pub fn kernel_h(&self) -> usize {
        self.kernel_h
    }

    pub fn kernel_w(&self) -> usize {
        self.kernel_w
    }

    pub fn in_channels_per_group(&self) -> usize {
        self.in_channels_per_group
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn dec(&self) -> i32 {
        self.dec
    }

    pub fn data(&self) -> &[i8] {
        &self.data
    }

    pub fn bias(&self) -> Option<&[i32]> {
        self.bias.as_deref()
    }

    /// Elements of one filter: `kernel_h * kernel_w * in_channels_per_group`.
    #[inline]
    pub fn filter_len(&self) -> usize {
        self.kernel_h * self.kernel_w * self.in_channels_per_group
    }

    /// Contiguous weights of filter `n` in (kernel-row, kernel-col, channel) order.
    #[inline]
    pub fn filter(&self, n: usize) -> &[i8] {
        let len = self.filter_len();
        &self.data[n * len..(n + 1) * len]
    }

    /// Element for (kernel row `ki`, kernel col `kj`, channel `m`, filter `n`).
    #[inline]
    pub fn at(&self, ki: usize, kj: usize, m: usize, n: usize) -> i8 {
        self.data[((n * self.kernel_h + ki) * self.kernel_w + kj) * self.in_channels_per_group + m]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_element_tensor() {
        let t = QTensor::new(1, 1, 1, 0, vec![5]).unwrap();
        assert_eq!(t.at(0, 0, 0).unwrap(), 5);
    }

    #[test]
    fn length_mismatch_is_dimension_error() {
        let err = QTensor::new(2, 2, 1, 0, vec![1, 2, 3]).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn shape_product_large() {
        let t = QTensor::zeros(32, 32, 16, 3).unwrap();
        assert_eq!(t.len(), 16384);
        assert_eq!(t.dec(), 3);
    }

    #[test]
    fn flat_offset_formula() {
        // (1*2 + 0)*2 + 1 = 5
        let t = QTensor::new(2, 2, 2, 0, (0..8).map(|v| v as i8).collect()).unwrap();
        assert_eq!(t.at(1, 0, 1).unwrap(), 5);
    }

    #[test]
    fn out_of_range_is_bounds_error() {
        let t = QTensor::zeros(2, 2, 2, 0).unwrap();
        assert!(matches!(t.at(2, 0, 0), Err(Error::Bounds(_))));
        assert!(matches!(t.at(0, 2, 0), Err(Error::Bounds(_))));
        assert!(matches!(t.at(0, 0, 2), Err(Error::Bounds(_))));
    }

    #[test]
    fn channel_increment_moves_offset_by_one() {
        let t = QTensor::zeros(3, 4, 5, 0).unwrap();
        for h in 0..3 {
            for w in 0..4 {
                for c in 0..4 {
                    assert_eq!(t.flat_index(h, w, c + 1), t.flat_index(h, w, c) + 1);
                }
            }
        }
    }

    #[test]
    fn weight_layout_filter_major() {
        // 2 filters of a 1x1x3 kernel: filter slices are contiguous.
        let w = QWeights::new(1, 1, 3, 2, 0, vec![1, 2, 3, 4, 5, 6], None).unwrap();
        assert_eq!(w.filter(0), &[1, 2, 3]);
        assert_eq!(w.filter(1), &[4, 5, 6]);
        assert_eq!(w.at(0, 0, 2, 1), 6);
    }

    #[test]
    fn bias_length_checked() {
        let err = QWeights::new(1, 1, 1, 2, 0, vec![1, 2], Some(vec![7])).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    proptest! {
        // The flat-offset map is a bijection onto [0, H*W*C).
        #[test]
        fn flat_offset_bijection(h in 1usize..5, w in 1usize..5, c in 1usize..5) {
            let t = QTensor::zeros(h, w, c, 0).unwrap();
            let mut seen = vec![false; h * w * c];
            for hh in 0..h {
                for ww in 0..w {
                    for cc in 0..c {
                        let idx = t.flat_index(hh, ww, cc);
                        prop_assert!(idx < seen.len());
                        prop_assert!(!seen[idx]);
                        seen[idx] = true;
                    }
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
        }
    }
}
