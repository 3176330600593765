//! Fast-vs-reference bit-exactness suite.
//!
//! Samples random layer configurations spanning kernels {1,3,5,7}, widths
//! 4..=32, channel counts 1..=32 and groups {1,2,4}, rotating through the
//! four primitives that have a fast path, and demands elementwise equality
//! of the two paths with zero tolerance.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::randgen::{random_qtensor, random_shift_table, random_weights_for};
use crate::error::Result;
use crate::instrument::{run_layer, ExecPath};
use crate::layer::{LayerSpec, PrimitiveKind};

/// Outcome of a verification run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub cases: usize,
    pub mismatches: usize,
    /// Descriptions of the first few failing configurations.
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

/// Draws one random configuration for the given fast-path primitive.
fn random_config<R: Rng>(rng: &mut R, kind: PrimitiveKind) -> LayerSpec {
    let kernel = *[1usize, 3, 5, 7].iter().nth(rng.gen_range(0..4)).unwrap();
    let width = rng.gen_range(4..=32);
    let dec_input = rng.gen_range(0..=5);
    let dec_weight = rng.gen_range(0..=5);
    let dec_output = dec_input + dec_weight - rng.gen_range(0..=9);

    let spec = match kind {
        PrimitiveKind::Standard => {
            let cx = rng.gen_range(1..=32);
            let cy = rng.gen_range(1..=32);
            LayerSpec::standard(width, cx, cy, kernel)
        }
        PrimitiveKind::Grouped => {
            let g = *[1usize, 2, 4].iter().nth(rng.gen_range(0..3)).unwrap();
            let cx = g * rng.gen_range(1..=(32 / g));
            let cy = g * rng.gen_range(1..=(32 / g));
            LayerSpec::grouped(width, cx, cy, kernel, g)
        }
        PrimitiveKind::DepthwiseSeparable => {
            let cx = rng.gen_range(1..=32);
            let cy = rng.gen_range(1..=32);
            LayerSpec::depthwise_separable(width, cx, cy, kernel)
        }
        PrimitiveKind::Shift => {
            let cx = rng.gen_range(1..=32);
            let cy = rng.gen_range(1..=32);
            let table = random_shift_table(rng, cx, kernel);
            LayerSpec::shift(width, cx, cy, kernel, table)
        }
        PrimitiveKind::Add => unreachable!("add has no fast path"),
    };
    let spec = spec.with_decs(dec_input, dec_weight, dec_output);
    if kind == PrimitiveKind::DepthwiseSeparable {
        let pw_dec_weight = rng.gen_range(0..=5);
        let pw_dec_output = dec_output + pw_dec_weight - rng.gen_range(0..=9);
        spec.with_pointwise_decs(pw_dec_weight, pw_dec_output)
    } else {
        spec
    }
}

/// Runs `cases` random configurations and compares the fast path against
/// the reference path elementwise.
pub fn verify_bitexact(seed: u64, cases: usize) -> Result<VerifyReport> {
    const FAST_KINDS: [PrimitiveKind; 4] = [
        PrimitiveKind::Standard,
        PrimitiveKind::Grouped,
        PrimitiveKind::DepthwiseSeparable,
        PrimitiveKind::Shift,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    let mut failures = Vec::new();
    for case in 0..cases {
        let kind = FAST_KINDS[case % FAST_KINDS.len()];
        let spec = random_config(&mut rng, kind);
        debug_assert!(spec.validate().is_ok());
        let x = random_qtensor(&mut rng, spec.input_width, spec.input_width, spec.in_channels, spec.dec_input);
        let with_bias = rng.gen_bool(0.5);
        let weights = random_weights_for(&mut rng, &spec, with_bias)?;

        let reference = run_layer(&x, &weights, &spec, ExecPath::Reference)?;
        let fast = run_layer(&x, &weights, &spec, ExecPath::Fast)?;
        if reference != fast {
            mismatches += 1;
            if failures.len() < 8 {
                failures.push(format!(
                    "case {case}: {kind} k={} w={} cx={} cy={} g={} decs=({},{},{})",
                    spec.kernel,
                    spec.input_width,
                    spec.in_channels,
                    spec.out_channels,
                    spec.groups,
                    spec.dec_input,
                    spec.dec_weight,
                    spec.dec_output
                ));
            }
        }
    }
    Ok(VerifyReport { cases, mismatches, failures })
}
