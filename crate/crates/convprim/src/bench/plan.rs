//! Experiment plans: one swept hyperparameter, the rest fixed.
//!
//! The five built-in plans encode the paper-style benchmark grid; plan files
//! (TOML, keys named like the CSV header) describe custom sweeps.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::instrument::ExecPath;
use crate::layer::{LayerSpec, PrimitiveKind, ShiftTable};

/// Which layer hyperparameter a plan sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweptParameter {
    Groups,
    Kernel,
    InputWidth,
    InChannels,
    /// Output channels (filter count).
    Filters,
}

impl SweptParameter {
    /// CSV-header spelling of the parameter.
    pub fn name(&self) -> &'static str {
        match self {
            SweptParameter::Groups => "groups",
            SweptParameter::Kernel => "kernel",
            SweptParameter::InputWidth => "input_width",
            SweptParameter::InChannels => "in_channels",
            SweptParameter::Filters => "out_channels",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "groups" => Ok(SweptParameter::Groups),
            "kernel" => Ok(SweptParameter::Kernel),
            "input_width" => Ok(SweptParameter::InputWidth),
            "in_channels" => Ok(SweptParameter::InChannels),
            "out_channels" | "filters" => Ok(SweptParameter::Filters),
            other => Err(Error::Parse(format!("unknown sweep parameter '{other}'"))),
        }
    }
}

/// The non-swept layer hyperparameters of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedParams {
    pub groups: usize,
    pub kernel: usize,
    pub input_width: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub dec_input: i32,
    pub dec_weight: i32,
    pub dec_output: i32,
}

impl Default for FixedParams {
    fn default() -> Self {
        FixedParams {
            groups: 1,
            kernel: 3,
            input_width: 16,
            in_channels: 16,
            out_channels: 16,
            dec_input: 3,
            dec_weight: 3,
            dec_output: 3,
        }
    }
}

/// One experiment: a swept parameter, its value list, and fixed values for
/// the other hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    /// 1..=5 for the built-in grid, 0 for custom plans.
    pub experiment_id: u32,
    pub swept: SweptParameter,
    pub sweep_values: Vec<usize>,
    pub fixed: FixedParams,
}

impl ExperimentPlan {
    /// Built-in experiment `id`:
    ///
    /// | id | swept        | values | kernel | width | C_x | C_y | G |
    /// |----|--------------|--------|--------|-------|-----|-----|---|
    /// | 1  | groups       | 1-32   | 3      | 10    | 128 | 64  | - |
    /// | 2  | kernel       | 1-11   | -      | 32    | 16  | 16  | 2 |
    /// | 3  | input width  | 8-32   | 3      | -     | 16  | 16  | 2 |
    /// | 4  | in channels  | 4-32   | 3      | 32    | -   | 16  | 2 |
    /// | 5  | filters      | 4-32   | 3      | 32    | 16  | -   | 2 |
    ///
    /// Sweep values that violate a primitive's invariants (even kernels,
    /// non-divisible groups) become skipped warning rows at run time.
    pub fn table2(id: u32) -> Result<Self> {
        let mut fixed = FixedParams::default();
        let (swept, values) = match id {
            1 => {
                fixed.kernel = 3;
                fixed.input_width = 10;
                fixed.in_channels = 128;
                fixed.out_channels = 64;
                (SweptParameter::Groups, (1..=32).collect())
            }
            2 => {
                fixed.groups = 2;
                fixed.input_width = 32;
                fixed.in_channels = 16;
                fixed.out_channels = 16;
                (SweptParameter::Kernel, (1..=11).collect())
            }
            3 => {
                fixed.groups = 2;
                fixed.kernel = 3;
                fixed.in_channels = 16;
                fixed.out_channels = 16;
                (SweptParameter::InputWidth, (8..=32).collect())
            }
            4 => {
                fixed.groups = 2;
                fixed.kernel = 3;
                fixed.input_width = 32;
                fixed.out_channels = 16;
                (SweptParameter::InChannels, (4..=32).collect())
            }
            5 => {
                fixed.groups = 2;
                fixed.kernel = 3;
                fixed.input_width = 32;
                fixed.in_channels = 16;
                (SweptParameter::Filters, (4..=32).collect())
            }
            other => {
                return Err(Error::Configuration(format!(
                    "experiment id must be 1..=5, got {other}"
                )))
            }
        };
        Ok(ExperimentPlan { experiment_id: id, swept, sweep_values: values, fixed })
    }

    /// All five built-in experiments.
    pub fn all_table2() -> Vec<ExperimentPlan> {
        (1..=5).map(|i| ExperimentPlan::table2(i).expect("static ids")).collect()
    }

    /// Hyperparameters of one sweep point: the fixed values with the swept
    /// parameter overridden.
    pub fn point(&self, value: usize) -> FixedParams {
        let mut p = self.fixed;
        match self.swept {
            SweptParameter::Groups => p.groups = value,
            SweptParameter::Kernel => p.kernel = value,
            SweptParameter::InputWidth => p.input_width = value,
            SweptParameter::InChannels => p.in_channels = value,
            SweptParameter::Filters => p.out_channels = value,
        }
        p
    }
}

/// Builds the layer a primitive actually runs at one sweep point. The
/// `groups` coordinate only binds grouped convolution; the other primitives
/// fix their own group structure. Shift convolution takes the deterministic
/// round-robin table.
pub fn build_spec(kind: PrimitiveKind, p: &FixedParams) -> Result<LayerSpec> {
    let spec = match kind {
        PrimitiveKind::Standard => {
            LayerSpec::standard(p.input_width, p.in_channels, p.out_channels, p.kernel)
        }
        PrimitiveKind::Add => LayerSpec::add(p.input_width, p.in_channels, p.out_channels, p.kernel),
        PrimitiveKind::Grouped => {
            LayerSpec::grouped(p.input_width, p.in_channels, p.out_channels, p.kernel, p.groups)
        }
        PrimitiveKind::DepthwiseSeparable => {
            LayerSpec::depthwise_separable(p.input_width, p.in_channels, p.out_channels, p.kernel)
        }
        PrimitiveKind::Shift => LayerSpec::shift(
            p.input_width,
            p.in_channels,
            p.out_channels,
            p.kernel,
            ShiftTable::round_robin(p.in_channels, p.kernel),
        ),
    }
    .with_decs(p.dec_input, p.dec_weight, p.dec_output);
    spec.validate()?;
    Ok(spec)
}

/// A parsed plan file: the sweep plus the grid of primitives and paths to
/// run it over.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub plan: ExperimentPlan,
    pub primitives: Vec<PrimitiveKind>,
    pub paths: Vec<ExecPath>,
    pub repeats: u32,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    experiment: Option<u32>,
    primitives: Option<Vec<String>>,
    paths: Option<Vec<String>>,
    repeats: Option<u32>,
    seed: Option<u64>,
    groups: Option<usize>,
    kernel: Option<usize>,
    input_width: Option<usize>,
    in_channels: Option<usize>,
    out_channels: Option<usize>,
    dec_input: Option<i32>,
    dec_weight: Option<i32>,
    dec_output: Option<i32>,
    sweep: SweepBlock,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepBlock {
    parameter: String,
    values: Vec<usize>,
}

/// Parses a TOML plan file.
pub fn parse_plan(text: &str) -> Result<SweepConfig> {
    let file: PlanFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let defaults = FixedParams::default();
    let fixed = FixedParams {
        groups: file.groups.unwrap_or(defaults.groups),
        kernel: file.kernel.unwrap_or(defaults.kernel),
        input_width: file.input_width.unwrap_or(defaults.input_width),
        in_channels: file.in_channels.unwrap_or(defaults.in_channels),
        out_channels: file.out_channels.unwrap_or(defaults.out_channels),
        dec_input: file.dec_input.unwrap_or(defaults.dec_input),
        dec_weight: file.dec_weight.unwrap_or(defaults.dec_weight),
        dec_output: file.dec_output.unwrap_or(defaults.dec_output),
    };
    if file.sweep.values.is_empty() {
        return Err(Error::Parse("sweep.values must not be empty".to_string()));
    }
    let plan = ExperimentPlan {
        experiment_id: file.experiment.unwrap_or(0),
        swept: SweptParameter::parse(&file.sweep.parameter)?,
        sweep_values: file.sweep.values,
        fixed,
    };
    let primitives = match file.primitives {
        Some(names) => names.iter().map(|n| PrimitiveKind::parse(n)).collect::<Result<Vec<_>>>()?,
        None => PrimitiveKind::ALL.to_vec(),
    };
    let paths = match file.paths {
        Some(names) => names.iter().map(|n| ExecPath::parse(n)).collect::<Result<Vec<_>>>()?,
        None => vec![ExecPath::Reference, ExecPath::Fast],
    };
    Ok(SweepConfig {
        plan,
        primitives,
        paths,
        repeats: file.repeats.unwrap_or(50),
        seed: file.seed.unwrap_or(42),
    })
}

/// Parses a plan file from disk.
pub fn load_plan(path: &Path) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_plan(&text)
}
