//! Operation and memory-access counting.
//!
//! Kernels are generic over a [`Monitor`]; the production entry points pass
//! [`NullMonitor`], whose empty inlined methods compile away, and
//! [`run_counted`] passes [`OpCounters`]. Counted and production runs
//! therefore execute the same code and are output-equivalent by construction.
//!
//! Access discipline (element granularity):
//! - `loads` are element reads from the input, weight, widened-filter and
//!   column buffers. A padded tap reads its weight element but no input.
//! - `stores` are element writes to the output and column buffers.
//! - `mul` counts one multiply per inner-loop term, padded taps included,
//!   so it equals the theoretical MAC count of the cost model exactly.
//! - a packed dual MAC counts as 2 multiplies and 2 additions.
//! - `add_sub` counts accumulations, subtractions and bias additions;
//!   `abs_ops` counts absolute values (add convolution only).
//!
//! In the 2x2 GEMM block each loaded element is used twice but counted once
//! per load, which is precisely the register-level reuse the access-per-MAC
//! ratio measures.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::fastpath;
use crate::layer::{LayerSpec, LayerWeights, PrimitiveKind};
use crate::reference;
use crate::tensor::QTensor;

/// Sink for the counting hooks inside kernels.
pub trait Monitor {
    fn load(&mut self, n: u64);
    fn store(&mut self, n: u64);
    fn mul(&mut self, n: u64);
    fn add_sub(&mut self, n: u64);
    fn abs_op(&mut self, n: u64);
}

/// No-op monitor for production runs; every hook inlines to nothing.
pub struct NullMonitor;

impl Monitor for NullMonitor {
    #[inline(always)]
    fn load(&mut self, _n: u64) {}
    #[inline(always)]
    fn store(&mut self, _n: u64) {}
    #[inline(always)]
    fn mul(&mut self, _n: u64) {}
    #[inline(always)]
    fn add_sub(&mut self, _n: u64) {}
    #[inline(always)]
    fn abs_op(&mut self, _n: u64) {}
}

/// Tallies of one counted kernel run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub mul: u64,
    pub add_sub: u64,
    pub abs_ops: u64,
    pub loads: u64,
    pub stores: u64,
}

impl OpCounters {
    pub fn reset(&mut self) {
        *self = OpCounters::default();
    }

    /// loads + stores.
    pub fn accesses(&self) -> u64 {
        self.loads + self.stores
    }
}

impl Monitor for OpCounters {
    #[inline(always)]
    fn load(&mut self, n: u64) {
        self.loads += n;
    }
    #[inline(always)]
    fn store(&mut self, n: u64) {
        self.stores += n;
    }
    #[inline(always)]
    fn mul(&mut self, n: u64) {
        self.mul += n;
    }
    #[inline(always)]
    fn add_sub(&mut self, n: u64) {
        self.add_sub += n;
    }
    #[inline(always)]
    fn abs_op(&mut self, n: u64) {
        self.abs_ops += n;
    }
}

/// Which implementation executes a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecPath {
    Reference,
    Fast,
}

impl ExecPath {
    pub fn name(&self) -> &'static str {
        match self {
            ExecPath::Reference => "ref",
            ExecPath::Fast => "fast",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ref" | "reference" => Ok(ExecPath::Reference),
            "fast" => Ok(ExecPath::Fast),
            other => Err(Error::Parse(format!("unknown path '{other}'"))),
        }
    }
}

impl std::fmt::Display for ExecPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Dispatches one layer to the chosen path with an arbitrary monitor.
pub fn run_layer_with<M: Monitor>(
    x: &QTensor,
    weights: &LayerWeights,
    spec: &LayerSpec,
    path: ExecPath,
    mon: &mut M,
) -> Result<QTensor> {
    if path == ExecPath::Fast && !spec.kind.has_fast_path() {
        return Err(Error::UnsupportedPath(format!(
            "{} convolution has no packed fast path",
            spec.kind
        )));
    }
    match (spec.kind, path) {
        (PrimitiveKind::Standard, ExecPath::Reference) => {
            reference::conv_standard_with(x, weights.dense()?, spec, mon)
        }
        (PrimitiveKind::Standard, ExecPath::Fast) => {
            fastpath::conv_standard_fast_with(x, weights.dense()?, spec, mon)
        }
        (PrimitiveKind::Grouped, ExecPath::Reference) => {
            reference::conv_grouped_with(x, weights.dense()?, spec, mon)
        }
        (PrimitiveKind::Grouped, ExecPath::Fast) => {
            fastpath::conv_grouped_fast_with(x, weights.dense()?, spec, mon)
        }
        (PrimitiveKind::DepthwiseSeparable, ExecPath::Reference) => {
            let (dw, pw) = weights.separable()?;
            reference::conv_depthwise_separable_with(x, dw, pw, spec, mon)
        }
        (PrimitiveKind::DepthwiseSeparable, ExecPath::Fast) => {
            let (dw, pw) = weights.separable()?;
            fastpath::conv_dwsep_fast_with(x, dw, pw, spec, mon)
        }
        (PrimitiveKind::Shift, ExecPath::Reference) => {
            let table = spec.shift_table.as_ref().ok_or_else(|| {
                Error::Configuration("shift convolution requires a shift table".to_string())
            })?;
            reference::conv_shift_with(x, weights.dense()?, table, spec, mon)
        }
        (PrimitiveKind::Shift, ExecPath::Fast) => {
            fastpath::conv_shift_fast_with(x, weights.dense()?, spec, mon)
        }
        (PrimitiveKind::Add, ExecPath::Reference) => {
            reference::conv_add_with(x, weights.dense()?, spec, mon)
        }
        (PrimitiveKind::Add, ExecPath::Fast) => unreachable!("rejected above"),
    }
}

/// Production dispatch (uncounted).
pub fn run_layer(x: &QTensor, weights: &LayerWeights, spec: &LayerSpec, path: ExecPath) -> Result<QTensor> {
    run_layer_with(x, weights, spec, path, &mut NullMonitor)
}

/// Runs one layer while tallying every element access and arithmetic
/// operation. The output is bit-identical to the uncounted run.
pub fn run_counted(
    x: &QTensor,
    weights: &LayerWeights,
    spec: &LayerSpec,
    path: ExecPath,
) -> Result<(QTensor, OpCounters)> {
    let mut counters = OpCounters::default();
    let out = run_layer_with(x, weights, spec, path, &mut counters)?;
    Ok((out, counters))
}

/// Ratio of reference-path accesses per MAC to fast-path accesses per MAC,
/// as an exact rational. Access patterns are data-independent, so the ratio
/// is computed on zero tensors.
pub fn access_ratio(spec: &LayerSpec) -> Result<Ratio<u64>> {
    if !spec.kind.has_fast_path() {
        return Err(Error::UnsupportedPath(format!(
            "{} convolution has no fast path to compare against",
            spec.kind
        )));
    }
    spec.validate()?;
    let x = QTensor::zeros(spec.input_width, spec.input_width, spec.in_channels, spec.dec_input)?;
    let weights = LayerWeights::zeros_for(spec)?;
    let (_, ref_counts) = run_counted(&x, &weights, spec, ExecPath::Reference)?;
    let (_, fast_counts) = run_counted(&x, &weights, spec, ExecPath::Fast)?;
    let ref_per_mac = Ratio::new(ref_counts.accesses(), ref_counts.mul);
    let fast_per_mac = Ratio::new(fast_counts.accesses(), fast_counts.mul);
    Ok(ref_per_mac / fast_per_mac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost;
    use crate::layer::ShiftTable;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_tensor(r: &mut StdRng, h: usize, c: usize, dec: i32) -> QTensor {
        let data = (0..h * h * c).map(|_| r.gen_range(-128i32..=127) as i8).collect();
        QTensor::new(h, h, c, dec, data).unwrap()
    }

    #[test]
    fn shift_op_records_zero_multiplies() {
        let mut r = StdRng::seed_from_u64(3);
        let x = random_tensor(&mut r, 6, 5, 0);
        let table = ShiftTable::round_robin(5, 3);
        let mut counters = OpCounters::default();
        reference::shift_op_with(&x, &table, &mut counters).unwrap();
        assert_eq!(counters.mul, 0);
        assert_eq!(counters.stores, 6 * 6 * 5);
        assert!(counters.loads <= 6 * 6 * 5);
    }

    #[test]
    fn standard_mul_count_matches_cost_model() {
        let mut r = StdRng::seed_from_u64(5);
        let spec = LayerSpec::standard(6, 3, 4, 3).with_decs(0, 0, 0);
        let x = random_tensor(&mut r, 6, 3, 0);
        let weights = LayerWeights::zeros_for(&spec).unwrap();
        let (_, counters) = run_counted(&x, &weights, &spec, ExecPath::Reference).unwrap();
        assert_eq!(counters.mul, cost::executed_macs(&spec).unwrap());
        assert_eq!(counters.mul, 9 * 3 * 36 * 4);
    }

    #[test]
    fn counters_are_data_independent() {
        let spec = LayerSpec::grouped(5, 4, 4, 3, 2).with_decs(1, 1, 1);
        let weights = LayerWeights::zeros_for(&spec).unwrap();
        let mut r = StdRng::seed_from_u64(7);
        let xa = random_tensor(&mut r, 5, 4, 1);
        let xb = random_tensor(&mut r, 5, 4, 1);
        for path in [ExecPath::Reference, ExecPath::Fast] {
            let (_, ca) = run_counted(&xa, &weights, &spec, path).unwrap();
            let (_, cb) = run_counted(&xb, &weights, &spec, path).unwrap();
            assert_eq!(ca, cb);
        }
    }

    #[test]
    fn counted_output_equals_production_output() {
        let mut r = StdRng::seed_from_u64(11);
        let spec = LayerSpec::standard(5, 3, 2, 3).with_decs(2, 1, 1);
        let x = random_tensor(&mut r, 5, 3, 2);
        let data = (0..9 * 3 * 2).map(|_| r.gen_range(-128i32..=127) as i8).collect();
        let weights =
            LayerWeights::Dense(crate::tensor::QWeights::new(3, 3, 3, 2, 1, data, None).unwrap());
        for path in [ExecPath::Reference, ExecPath::Fast] {
            let plain = run_layer(&x, &weights, &spec, path).unwrap();
            let (counted, _) = run_counted(&x, &weights, &spec, path).unwrap();
            assert_eq!(plain, counted);
        }
    }

    #[test]
    fn add_fast_path_is_unsupported() {
        let spec = LayerSpec::add(4, 2, 2, 3).with_decs(0, 0, 0);
        let x = QTensor::zeros(4, 4, 2, 0).unwrap();
        let weights = LayerWeights::zeros_for(&spec).unwrap();
        assert!(matches!(
            run_layer(&x, &weights, &spec, ExecPath::Fast),
            Err(Error::UnsupportedPath(_))
        ));
        assert!(matches!(access_ratio(&spec), Err(Error::UnsupportedPath(_))));
    }

    #[test]
    fn access_ratio_above_one_for_standard_conv() {
        let spec = LayerSpec::standard(12, 16, 16, 3).with_decs(0, 0, 0);
        let ratio = access_ratio(&spec).unwrap();
        assert!(ratio > Ratio::from_integer(1));
    }
}
