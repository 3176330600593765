//! Sweep execution: seeded inputs, warm-up, wall-clock timing, counted run.
//!
//! Timing runs are strictly sequential; callers must not run benchmark
//! kernels concurrently. Latency is host wall-clock of the kernel call,
//! reported as mean and sample standard deviation over `repeats`
//! invocations after one untimed warm-up.

use std::hint::black_box;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::plan::{build_spec, ExperimentPlan, FixedParams, SweepConfig};
use crate::bench::randgen::{random_qtensor, random_weights_for};
use crate::cost;
use crate::error::{Error, Result};
use crate::instrument::{run_counted, run_layer, ExecPath, OpCounters};
use crate::layer::PrimitiveKind;

/// One measurement row. A sweep value that violates the primitive's
/// invariants (even kernel, non-divisible groups) produces a skip row:
/// `repeats == 0` with zeroed measurement fields, so invalid points stay
/// visible in the CSV without aborting the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub experiment: u32,
    pub primitive: PrimitiveKind,
    pub path: ExecPath,
    /// Plan coordinates; `groups` is the swept coordinate even for
    /// primitives that fix their own group structure.
    pub groups: usize,
    pub kernel: usize,
    pub input_width: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub dec_input: i32,
    pub dec_weight: i32,
    pub dec_output: i32,
    pub seed: u64,
    pub repeats: u32,
    pub macs_theoretical: u64,
    pub params: u64,
    pub latency_mean_ns: f64,
    pub latency_std_ns: f64,
    pub counters: OpCounters,
}

impl BenchRecord {
    pub fn is_skip(&self) -> bool {
        self.repeats == 0
    }

    fn skip(experiment: u32, primitive: PrimitiveKind, path: ExecPath, p: &FixedParams, seed: u64) -> Self {
        BenchRecord {
            experiment,
            primitive,
            path,
            groups: p.groups,
            kernel: p.kernel,
            input_width: p.input_width,
            in_channels: p.in_channels,
            out_channels: p.out_channels,
            dec_input: p.dec_input,
            dec_weight: p.dec_weight,
            dec_output: p.dec_output,
            seed,
            repeats: 0,
            macs_theoretical: 0,
            params: 0,
            latency_mean_ns: 0.0,
            latency_std_ns: 0.0,
            counters: OpCounters::default(),
        }
    }
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs one plan for one primitive on one path. Every sweep value yields a
/// row; invalid values yield skip rows and a warning string.
pub fn run_experiment(
    plan: &ExperimentPlan,
    primitive: PrimitiveKind,
    path: ExecPath,
    repeats: u32,
    seed: u64,
) -> Result<(Vec<BenchRecord>, Vec<String>)> {
    if path == ExecPath::Fast && !primitive.has_fast_path() {
        return Err(Error::UnsupportedPath(format!(
            "{primitive} convolution has no fast path"
        )));
    }
    if repeats == 0 {
        return Err(Error::Configuration("repeats must be at least 1".to_string()));
    }

    let mut records = Vec::with_capacity(plan.sweep_values.len());
    let mut warnings = Vec::new();
    for (idx, &value) in plan.sweep_values.iter().enumerate() {
        let point = plan.point(value);
        let spec = match build_spec(primitive, &point) {
            Ok(spec) => spec,
            Err(e) => {
                warnings.push(format!(
                    "experiment {} {primitive}/{path}: skipped {} = {value}: {e}",
                    plan.experiment_id,
                    plan.swept.name()
                ));
                records.push(BenchRecord::skip(plan.experiment_id, primitive, path, &point, seed));
                continue;
            }
        };

        // one deterministic stream per (point, primitive, path)
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((idx as u64) << 8) | ((primitive as u64) << 2) | path as u64);
        let x = random_qtensor(&mut rng, spec.input_width, spec.input_width, spec.in_channels, spec.dec_input);
        let weights = random_weights_for(&mut rng, &spec, false)?;

        black_box(run_layer(&x, &weights, &spec, path)?); // warm-up

        let mut samples = Vec::with_capacity(repeats as usize);
        for _ in 0..repeats {
            let t0 = Instant::now();
            let out = run_layer(&x, &weights, &spec, path)?;
            samples.push(t0.elapsed().as_nanos() as f64);
            black_box(&out);
        }
        let (latency_mean_ns, latency_std_ns) = mean_std(&samples);

        let (_, counters) = run_counted(&x, &weights, &spec, path)?;
        let report = cost::cost(&spec)?;

        records.push(BenchRecord {
            experiment: plan.experiment_id,
            primitive,
            path,
            groups: point.groups,
            kernel: point.kernel,
            input_width: point.input_width,
            in_channels: point.in_channels,
            out_channels: point.out_channels,
            dec_input: point.dec_input,
            dec_weight: point.dec_weight,
            dec_output: point.dec_output,
            seed,
            repeats,
            macs_theoretical: report.macs,
            params: report.params,
            latency_mean_ns,
            latency_std_ns,
            counters,
        });
    }
    Ok((records, warnings))
}

/// Runs a plan over its full primitive x path grid. Unsupported
/// combinations (add convolution on the fast path) are left out of the grid.
pub fn run_sweep(cfg: &SweepConfig) -> Result<(Vec<BenchRecord>, Vec<String>)> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for &primitive in &cfg.primitives {
        for &path in &cfg.paths {
            if path == ExecPath::Fast && !primitive.has_fast_path() {
                continue;
            }
            let (mut r, mut w) = run_experiment(&cfg.plan, primitive, path, cfg.repeats, cfg.seed)?;
            records.append(&mut r);
            warnings.append(&mut w);
        }
    }
    Ok((records, warnings))
}
