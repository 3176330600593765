//! Uniform symmetric power-of-two quantization.
//!
//! A float value `x_f` is stored as `x_i = floor(x_f * 2^(7 - dec))` with
//! `dec = ceil(log2(max |X_f|))` chosen per tensor, so `2^dec` is the scale
//! of quantization and the stored integer represents `x_i * 2^(dec - 7)`.
//! Because scales are powers of two, kernels requantize with bare shifts.

use crate::error::{Error, Result};
use crate::tensor::{QTensor, QWeights};

/// Float activation tensor (HWC layout, same shape fields as [`QTensor`]).
#[derive(Debug, Clone, PartialEq)]
pub struct FloatTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FloatTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Dimension(format!(
                "tensor dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Dimension(format!(
                "data length {} does not match shape {height}x{width}x{channels}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("tensor contains non-finite values".to_string()));
        }
        Ok(FloatTensor { height, width, channels, data })
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

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn flat_index(&self, h: usize, w: usize, c: usize) -> usize {
        (h * self.width + w) * self.channels + c
    }
}

/// Float convolution weights, filter-major like [`QWeights`].
#[derive(Debug, Clone, PartialEq)]
pub struct FloatWeights {
    kernel_h: usize,
    kernel_w: usize,
    in_channels_per_group: usize,
    out_channels: usize,
    data: Vec<f32>,
}

impl FloatWeights {
    pub fn new(
        kernel_h: usize,
        kernel_w: usize,
        in_channels_per_group: usize,
        out_channels: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if kernel_h * kernel_w * in_channels_per_group * out_channels != data.len() {
            return Err(Error::Dimension(format!(
                "weight data length {} does not match {kernel_h}x{kernel_w}x{in_channels_per_group}x{out_channels}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("weights contain non-finite values".to_string()));
        }
        Ok(FloatWeights { kernel_h, kernel_w, in_channels_per_group, out_channels, data })
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

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn filter_len(&self) -> usize {
        self.kernel_h * self.kernel_w * self.in_channels_per_group
    }

    pub fn filter(&self, n: usize) -> &[f32] {
        let len = self.filter_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn filter_mut(&mut self, n: usize) -> &mut [f32] {
        let len = self.filter_len();
        &mut self.data[n * len..(n + 1) * len]
    }
}

/// Scale exponent for a slice of finite floats: `ceil(log2(max |x|))`,
/// 0 when every value is zero.
pub fn choose_dec_for(values: &[f32]) -> Result<i32> {
    if values.is_empty() {
        return Err(Error::Domain("cannot choose dec for an empty tensor".to_string()));
    }
    let max_abs = values.iter().fold(0.0f64, |acc, &v| acc.max((v as f64).abs()));
    if max_abs == 0.0 {
        return Ok(0);
    }
    Ok(max_abs.log2().ceil() as i32)
}

/// Scale exponent for a tensor.
pub fn choose_dec(t: &FloatTensor) -> Result<i32> {
    choose_dec_for(t.data())
}

#[inline]
pub(crate) fn quantize_value_i8(x: f32, dec: i32) -> i8 {
    // floor toward -inf, then saturate to the 8-bit range: the exponent
    // choice of choose_dec only ever clips the +128 boundary case.
    let scaled = (x as f64) * (2.0f64).powi(7 - dec);
    scaled.floor().clamp(-128.0, 127.0) as i8
}

/// Quantizes a tensor at the given scale exponent.
pub fn quantize(t: &FloatTensor, dec: i32) -> QTensor {
    let data = t.data().iter().map(|&x| quantize_value_i8(x, dec)).collect();
    QTensor::new(t.height(), t.width(), t.channels(), dec, data)
        .expect("shape preserved by quantization")
}

/// Quantizes weights at the given scale exponent (no bias attached).
pub fn quantize_weights(w: &FloatWeights, dec: i32) -> QWeights {
    let data = w.data().iter().map(|&x| quantize_value_i8(x, dec)).collect();
    QWeights::new(w.kernel_h, w.kernel_w, w.in_channels_per_group, w.out_channels, dec, data, None)
        .expect("shape preserved by quantization")
}

/// Quantizes per-channel biases directly at accumulator scale
/// `dec_acc = dec_weight + dec_input`, as 32-bit integers. Kernels add these
/// to the accumulator before the output shift.
pub fn quantize_bias(bias: &[f32], dec_acc: i32) -> Result<Vec<i32>> {
    if bias.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("bias contains non-finite values".to_string()));
    }
    Ok(bias
        .iter()
        .map(|&b| {
            let scaled = (b as f64) * (2.0f64).powi(7 - dec_acc);
            scaled.floor().clamp(i32::MIN as f64, i32::MAX as f64) as i32
        })
        .collect())
}

/// Inverse map: each element becomes `x_i * 2^(dec - 7)`.
pub fn dequantize(t: &QTensor) -> FloatTensor {
    let scale = (2.0f32).powi(t.dec() - 7);
    let data = t.data().iter().map(|&x| x as f32 * scale).collect();
    FloatTensor::new(t.height(), t.width(), t.channels(), data)
        .expect("shape preserved by dequantization")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(x: f32) -> FloatTensor {
        FloatTensor::new(1, 1, 1, vec![x]).unwrap()
    }

    #[test]
    fn dec_for_unit_max_is_zero() {
        assert_eq!(choose_dec(&scalar(1.0)).unwrap(), 0);
    }

    #[test]
    fn dec_for_six_is_three() {
        // ceil(log2 6) = ceil(2.585) = 3
        assert_eq!(choose_dec(&FloatTensor::new(1, 1, 2, vec![-6.0, 2.0]).unwrap()).unwrap(), 3);
    }

    #[test]
    fn dec_for_all_zero_is_zero() {
        assert_eq!(choose_dec(&FloatTensor::new(2, 2, 1, vec![0.0; 4]).unwrap()).unwrap(), 0);
    }

    #[test]
    fn empty_slice_is_domain_error() {
        assert!(matches!(choose_dec_for(&[]), Err(Error::Domain(_))));
    }

    #[test]
    fn non_finite_rejected_at_construction() {
        assert!(matches!(
            FloatTensor::new(1, 1, 1, vec![f32::NAN]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            FloatTensor::new(1, 1, 1, vec![f32::INFINITY]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn quantize_half_at_dec_zero() {
        let q = quantize(&scalar(0.5), 0);
        assert_eq!(q.data()[0], 64);
        assert_eq!(q.dec(), 0);
    }

    #[test]
    fn quantize_one_saturates_to_127() {
        // floor(1.0 * 128) = 128, clipped to the 8-bit maximum.
        let q = quantize(&scalar(1.0), 0);
        assert_eq!(q.data()[0], 127);
    }

    #[test]
    fn quantize_zero_is_zero_at_any_dec() {
        for dec in -3..8 {
            assert_eq!(quantize(&scalar(0.0), dec).data()[0], 0);
        }
    }

    #[test]
    fn dequantize_examples() {
        let t = QTensor::new(1, 1, 3, 0, vec![64, -128, 32]).unwrap();
        let f = dequantize(&t);
        assert_eq!(f.data()[0], 0.5);
        assert_eq!(f.data()[1], -1.0);
        // 32 * 2^(3-7) = 2.0 at dec = 3
        let t3 = QTensor::new(1, 1, 1, 3, vec![32]).unwrap();
        assert_eq!(dequantize(&t3).data()[0], 2.0);
    }

    #[test]
    fn bias_quantized_at_accumulator_scale() {
        // dec_acc = 4: floor(1.5 * 2^3) = 12
        assert_eq!(quantize_bias(&[1.5, -1.5], 4).unwrap(), vec![12, -12]);
    }

    proptest! {
        // Round trip stays within one quantization step when the value is
        // representable without clipping.
        #[test]
        fn round_trip_error_below_one_step(x in -100.0f32..100.0, dec in -3i32..8) {
            let step = (2.0f64).powi(dec - 7);
            let raw = ((x as f64) * (2.0f64).powi(7 - dec)).floor();
            prop_assume!((-128.0..=127.0).contains(&raw));
            let q = quantize(&scalar(x), dec);
            let back = dequantize(&q).data()[0] as f64;
            prop_assert!((x as f64 - back).abs() < step);
        }

        // Eq. 4's exponent choice keeps |x| * 2^(7 - dec) <= 128.
        #[test]
        fn chosen_dec_bounds_scaled_magnitude(values in proptest::collection::vec(-1e6f32..1e6, 1..32)) {
            let t = FloatTensor::new(1, 1, values.len(), values.clone()).unwrap();
            let dec = choose_dec(&t).unwrap();
            for v in &values {
                prop_assert!((*v as f64).abs() * (2.0f64).powi(7 - dec) <= 128.0 + 1e-9);
            }
        }

        // Monotone non-decreasing in the input for a fixed exponent.
        #[test]
        fn quantize_is_monotone(a in -300.0f32..300.0, b in -300.0f32..300.0, dec in -2i32..8) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(quantize(&scalar(lo), dec).data()[0] <= quantize(&scalar(hi), dec).data()[0]);
        }
    }
}
