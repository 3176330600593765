//! Seeded random inputs and weights for benchmarks and verification.
//!
//! Activations and weights are drawn uniformly over the full 8-bit range
//! [-128, 127].

use rand::Rng;

use crate::error::Result;
use crate::layer::{LayerSpec, LayerWeights, PrimitiveKind, ShiftTable};
use crate::tensor::{QTensor, QWeights};

pub fn random_qtensor<R: Rng>(rng: &mut R, height: usize, width: usize, channels: usize, dec: i32) -> QTensor {
    let data = (0..height * width * channels)
        .map(|_| rng.gen_range(-128i32..=127) as i8)
        .collect();
    QTensor::new(height, width, channels, dec, data).expect("generated shape is consistent")
}

pub fn random_qweights<R: Rng>(
    rng: &mut R,
    kernel: usize,
    in_per_group: usize,
    out_channels: usize,
    dec: i32,
    with_bias: bool,
) -> QWeights {
    let data = (0..kernel * kernel * in_per_group * out_channels)
        .map(|_| rng.gen_range(-128i32..=127) as i8)
        .collect();
    let bias = with_bias.then(|| (0..out_channels).map(|_| rng.gen_range(-16384i32..=16384)).collect());
    QWeights::new(kernel, kernel, in_per_group, out_channels, dec, data, bias)
        .expect("generated shape is consistent")
}

pub fn random_shift_table<R: Rng>(rng: &mut R, channels: usize, kernel: usize) -> ShiftTable {
    let radius = (kernel as i32 - 1) / 2;
    let shifts = (0..channels)
        .map(|_| (rng.gen_range(-radius..=radius), rng.gen_range(-radius..=radius)))
        .collect();
    ShiftTable::new(shifts)
}

/// Random weights matching the shapes `spec` requires.
pub fn random_weights_for<R: Rng>(rng: &mut R, spec: &LayerSpec, with_bias: bool) -> Result<LayerWeights> {
    spec.validate()?;
    Ok(match spec.kind {
        PrimitiveKind::Standard | PrimitiveKind::Add => LayerWeights::Dense(random_qweights(
            rng,
            spec.kernel,
            spec.in_channels,
            spec.out_channels,
            spec.dec_weight,
            with_bias,
        )),
        PrimitiveKind::Grouped => LayerWeights::Dense(random_qweights(
            rng,
            spec.kernel,
            spec.channels_per_group(),
            spec.out_channels,
            spec.dec_weight,
            with_bias,
        )),
        PrimitiveKind::Shift => LayerWeights::Dense(random_qweights(
            rng,
            1,
            spec.in_channels,
            spec.out_channels,
            spec.dec_weight,
            with_bias,
        )),
        PrimitiveKind::DepthwiseSeparable => LayerWeights::Separable {
            depthwise: random_qweights(rng, spec.kernel, 1, spec.in_channels, spec.dec_weight, false),
            pointwise: random_qweights(
                rng,
                1,
                spec.in_channels,
                spec.out_channels,
                spec.pointwise_dec_weight,
                with_bias,
            ),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_data() {
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(random_qtensor(&mut a, 4, 4, 3, 0), random_qtensor(&mut b, 4, 4, 3, 0));
    }

    #[test]
    fn weights_match_spec_shapes() {
        let spec = LayerSpec::grouped(8, 8, 4, 3, 2).with_decs(3, 3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_weights_for(&mut rng, &spec, true).unwrap();
        let dense = w.dense().unwrap();
        assert_eq!(dense.in_channels_per_group(), 4);
        assert_eq!(dense.out_channels(), 4);
        assert!(dense.bias().is_some());
    }
}
