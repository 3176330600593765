//! Batch-normalization folding and an explicit quantized BN layer.
//!
//! Convolution-family layers fold BN into their float weights and biases
//! before quantization: out-channel n is scaled by `gamma_n / sqrt(var_n +
//! eps)` and the bias recentered accordingly. Add convolution cannot be
//! folded (its output is not a linear function of the weights), so it is
//! followed by [`QbnLayer`], a per-channel integer affine using the same
//! power-of-two scheme as weight quantization.

use crate::error::{Error, Result};
use crate::quant::{choose_dec_for, quantize_value_i8};
use crate::tensor::QTensor;

/// Float batch-normalization parameters, one entry per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BnParams {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
    pub eps: f32,
}

impl BnParams {
    pub fn new(gamma: Vec<f32>, beta: Vec<f32>, mean: Vec<f32>, var: Vec<f32>, eps: f32) -> Result<Self> {
        let c = gamma.len();
        if beta.len() != c || mean.len() != c || var.len() != c {
            return Err(Error::Dimension(format!(
                "BN parameter lengths differ: gamma {c}, beta {}, mean {}, var {}",
                beta.len(),
                mean.len(),
                var.len()
            )));
        }
        if var.iter().any(|&v| v + eps <= 0.0) {
            return Err(Error::Domain("var + eps must be positive for every channel".to_string()));
        }
        Ok(BnParams { gamma, beta, mean, var, eps })
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Identity normalization for `c` channels.
    pub fn identity(c: usize) -> Self {
        BnParams {
            gamma: vec![1.0; c],
            beta: vec![0.0; c],
            mean: vec![0.0; c],
            var: vec![1.0; c],
            eps: 0.0,
        }
    }

    /// Per-channel multiplier `gamma / sqrt(var + eps)`.
    pub fn scales(&self) -> Vec<f32> {
        self.gamma
            .iter()
            .zip(&self.var)
            .map(|(&g, &v)| g / (v + self.eps).sqrt())
            .collect()
    }
}

/// Folds BN into float convolution weights and biases (strictly
/// pre-quantization): returns the scaled weights and
/// `beta_n + (b_n - mean_n) * gamma_n / sqrt(var_n + eps)`.
pub fn fold_bn(
    weights: &crate::quant::FloatWeights,
    bias: &[f32],
    bn: &BnParams,
) -> Result<(crate::quant::FloatWeights, Vec<f32>)> {
    let c = weights.out_channels();
    if bn.channels() != c || bias.len() != c {
        return Err(Error::Dimension(format!(
            "BN folds over {} channels but weights have {c} filters and bias has {}",
            bn.channels(),
            bias.len()
        )));
    }
    let scales = bn.scales();
    let mut folded = weights.clone();
    for (n, &s) in scales.iter().enumerate() {
        for w in folded.filter_mut(n) {
            *w *= s;
        }
    }
    let folded_bias = bias
        .iter()
        .zip(&scales)
        .zip(bn.beta.iter().zip(&bn.mean))
        .map(|((&b, &s), (&beta, &mean))| beta + (b - mean) * s)
        .collect();
    Ok((folded, folded_bias))
}

/// Quantized per-channel affine: `((x * scale_c) >> shift_c) + offset_c`,
/// saturated to 8 bits. Scales are 8-bit values sharing one exponent
/// `dec_scale`; offsets are 32-bit values at the output scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QbnLayer {
    scale: Vec<i8>,
    dec_scale: i32,
    shift_amount: Vec<i32>,
    offset: Vec<i32>,
    dec_output: i32,
}

impl QbnLayer {
    pub fn new(
        scale: Vec<i8>,
        dec_scale: i32,
        shift_amount: Vec<i32>,
        offset: Vec<i32>,
        dec_output: i32,
    ) -> Result<Self> {
        let c = scale.len();
        if shift_amount.len() != c || offset.len() != c {
            return Err(Error::Dimension(format!(
                "per-channel lengths differ: scale {c}, shift {}, offset {}",
                shift_amount.len(),
                offset.len()
            )));
        }
        if shift_amount.iter().any(|&s| !(0..=31).contains(&s)) {
            return Err(Error::Configuration("shift amounts must lie in [0, 31]".to_string()));
        }
        Ok(QbnLayer { scale, dec_scale, shift_amount, offset, dec_output })
    }

    /// Quantizes float BN parameters for an input at `dec_input`: the
    /// per-channel multipliers share one exponent chosen like a weight
    /// tensor, the shift follows the convolution rule
    /// `dec_scale + dec_input - dec_output`, and `beta - mean * scale`
    /// becomes a 32-bit offset at the output scale.
    pub fn from_bn(bn: &BnParams, dec_input: i32, dec_output: i32) -> Result<Self> {
        let scales_f = bn.scales();
        if scales_f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("BN scales are not finite".to_string()));
        }
        let dec_scale = choose_dec_for(&scales_f)?;
        let shift = dec_scale + dec_input - dec_output;
        if !(0..=31).contains(&shift) {
            return Err(Error::Configuration(format!(
                "BN shift {shift} outside [0, 31]; adjust dec_output"
            )));
        }
        let scale = scales_f.iter().map(|&s| quantize_value_i8(s, dec_scale)).collect();
        let offset = bn
            .beta
            .iter()
            .zip(bn.mean.iter().zip(&scales_f))
            .map(|(&beta, (&mean, &s))| {
                let b = (beta - mean * s) as f64 * (2.0f64).powi(7 - dec_output);
                b.floor().clamp(i32::MIN as f64, i32::MAX as f64) as i32
            })
            .collect();
        QbnLayer::new(scale, dec_scale, vec![shift; bn.channels()], offset, dec_output)
    }

    pub fn channels(&self) -> usize {
        self.scale.len()
    }

    pub fn dec_scale(&self) -> i32 {
        self.dec_scale
    }

    pub fn dec_output(&self) -> i32 {
        self.dec_output
    }

    pub fn scale(&self) -> &[i8] {
        &self.scale
    }

    pub fn offset(&self) -> &[i32] {
        &self.offset
    }
}

/// Applies the quantized per-channel affine to every spatial position.
pub fn apply_qbn(x: &QTensor, layer: &QbnLayer) -> Result<QTensor> {
    let c = x.channels();
    if layer.channels() != c {
        return Err(Error::Dimension(format!(
            "QBN has {} channels, input has {c}",
            layer.channels()
        )));
    }
    let mut out = Vec::with_capacity(x.len());
    for (i, &v) in x.data().iter().enumerate() {
        let m = i % c;
        let scaled = (v as i32) * (layer.scale[m] as i32);
        let shifted = scaled >> layer.shift_amount[m];
        out.push((shifted + layer.offset[m]).clamp(-128, 127) as i8);
    }
    QTensor::new(x.height(), x.width(), c, layer.dec_output, out)
}
