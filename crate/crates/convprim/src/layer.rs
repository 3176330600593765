//! Layer configuration shared by every kernel.
//!
//! A [`LayerSpec`] fixes one primitive completely: shapes, grouping, the
//! per-channel shift table for shift convolution, and the power-of-two scale
//! exponents the kernels requantize with. All kernels run at stride 1 with
//! zero same-padding, so the output spatial size always equals the input's.

use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::QWeights;

/// Maximum number of inner-loop terms per output element. Together with
/// 8-bit operands this guarantees 32-bit accumulation cannot overflow.
pub const MAX_TERMS_PER_OUTPUT: usize = 1 << 15;

/// The five convolution primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimitiveKind {
    Standard,
    Grouped,
    DepthwiseSeparable,
    Shift,
    Add,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 5] = [
        PrimitiveKind::Standard,
        PrimitiveKind::Grouped,
        PrimitiveKind::DepthwiseSeparable,
        PrimitiveKind::Shift,
        PrimitiveKind::Add,
    ];

    /// Identifier used in CSV files, plan files and on the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            PrimitiveKind::Standard => "standard",
            PrimitiveKind::Grouped => "grouped",
            PrimitiveKind::DepthwiseSeparable => "dwsep",
            PrimitiveKind::Shift => "shift",
            PrimitiveKind::Add => "add",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(PrimitiveKind::Standard),
            "grouped" => Ok(PrimitiveKind::Grouped),
            "dwsep" | "depthwise_separable" => Ok(PrimitiveKind::DepthwiseSeparable),
            "shift" => Ok(PrimitiveKind::Shift),
            "add" => Ok(PrimitiveKind::Add),
            other => Err(Error::Parse(format!("unknown primitive '{other}'"))),
        }
    }

    /// Add convolution has no packed fast path.
    pub fn has_fast_path(&self) -> bool {
        !matches!(self, PrimitiveKind::Add)
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-channel (row, col) displacements for shift convolution, each within
/// the kernel radius `(H_k - 1) / 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftTable {
    shifts: Vec<(i32, i32)>,
}

impl ShiftTable {
    pub fn new(shifts: Vec<(i32, i32)>) -> Self {
        ShiftTable { shifts }
    }

    /// Deterministic default assignment: enumerate the kernel offset grid
    /// centered on (0,0) in row-major order; channel `m` takes offset
    /// `m mod H_k^2`.
    pub fn round_robin(channels: usize, kernel: usize) -> Self {
        let radius = (kernel as i32 - 1) / 2;
        let mut grid = Vec::with_capacity(kernel * kernel);
        for a in -radius..=radius {
            for b in -radius..=radius {
                grid.push((a, b));
            }
        }
        let shifts = (0..channels).map(|m| grid[m % grid.len()]).collect();
        ShiftTable { shifts }
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    #[inline]
    pub fn shift(&self, channel: usize) -> (i32, i32) {
        self.shifts[channel]
    }

    pub fn shifts(&self) -> &[(i32, i32)] {
        &self.shifts
    }
}

/// Full configuration of one primitive layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub kind: PrimitiveKind,
    /// Spatial width H_x of the square input (and output).
    pub input_width: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Square kernel size H_k; must be odd for same-padding symmetry.
    pub kernel: usize,
    /// Group count G; 1 unless kind is grouped (depthwise separable uses
    /// G = C_x internally for its first stage).
    pub groups: usize,
    /// Required for shift convolution, exactly C_x entries.
    pub shift_table: Option<ShiftTable>,
    pub dec_input: i32,
    pub dec_weight: i32,
    /// Output exponent; for depthwise separable this is the intermediate
    /// (depthwise-stage) exponent.
    pub dec_output: i32,
    /// Depthwise separable only: pointwise-stage weight exponent.
    pub pointwise_dec_weight: i32,
    /// Depthwise separable only: final output exponent.
    pub pointwise_dec_output: i32,
}

impl LayerSpec {
    pub fn standard(input_width: usize, in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        LayerSpec {
            kind: PrimitiveKind::Standard,
            input_width,
            in_channels,
            out_channels,
            kernel,
            groups: 1,
            shift_table: None,
            dec_input: 0,
            dec_weight: 0,
            dec_output: 0,
            pointwise_dec_weight: 0,
            pointwise_dec_output: 0,
        }
    }

    pub fn grouped(
        input_width: usize,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        groups: usize,
    ) -> Self {
        LayerSpec {
            kind: PrimitiveKind::Grouped,
            groups,
            ..Self::standard(input_width, in_channels, out_channels, kernel)
        }
    }

    pub fn depthwise_separable(
        input_width: usize,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    ) -> Self {
        LayerSpec {
            kind: PrimitiveKind::DepthwiseSeparable,
            groups: in_channels,
            ..Self::standard(input_width, in_channels, out_channels, kernel)
        }
    }

    pub fn shift(
        input_width: usize,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        table: ShiftTable,
    ) -> Self {
        LayerSpec {
            kind: PrimitiveKind::Shift,
            shift_table: Some(table),
            ..Self::standard(input_width, in_channels, out_channels, kernel)
        }
    }

    pub fn add(input_width: usize, in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        LayerSpec {
            kind: PrimitiveKind::Add,
            ..Self::standard(input_width, in_channels, out_channels, kernel)
        }
    }

    /// Sets the three main scale exponents.
    pub fn with_decs(mut self, dec_input: i32, dec_weight: i32, dec_output: i32) -> Self {
        self.dec_input = dec_input;
        self.dec_weight = dec_weight;
        self.dec_output = dec_output;
        self.pointwise_dec_weight = dec_weight;
        self.pointwise_dec_output = dec_output;
        self
    }

    /// Sets the pointwise-stage exponents (depthwise separable).
    pub fn with_pointwise_decs(mut self, dec_weight: i32, dec_output: i32) -> Self {
        self.pointwise_dec_weight = dec_weight;
        self.pointwise_dec_output = dec_output;
        self
    }

    /// Kernel radius (H_k - 1) / 2.
    pub fn radius(&self) -> i32 {
        (self.kernel as i32 - 1) / 2
    }

    /// Input channels per group.
    pub fn channels_per_group(&self) -> usize {
        self.in_channels / self.groups
    }

    /// Filters per group.
    pub fn filters_per_group(&self) -> usize {
        self.out_channels / self.groups
    }

    /// Output shift of the standard-family inner loop:
    /// `dec_weight + dec_input - dec_output`.
    pub fn output_shift(&self) -> i32 {
        self.dec_weight + self.dec_input - self.dec_output
    }

    /// Output shift of the pointwise stage (depthwise separable); the stage
    /// consumes the intermediate tensor at `dec_output`.
    pub fn pointwise_output_shift(&self) -> i32 {
        self.pointwise_dec_weight + self.dec_output - self.pointwise_dec_output
    }

    /// Operand alignment and output shift of the add-convolution inner loop:
    /// `(input_shl, weight_shl, output_shift)`.
    pub fn add_alignment(&self) -> (i32, i32, i32) {
        let delta = self.dec_input - self.dec_weight;
        if delta > 0 {
            (0, delta, self.dec_input - self.dec_output)
        } else if delta < 0 {
            (-delta, 0, self.dec_weight - self.dec_output)
        } else {
            (0, 0, self.dec_weight - self.dec_output)
        }
    }

    fn check_shift(&self, label: &str, shift: i32) -> Result<()> {
        if shift < 0 {
            return Err(Error::Configuration(format!(
                "{label} output shift {shift} is negative; the inner loop only right-shifts"
            )));
        }
        if shift > 31 {
            return Err(Error::Configuration(format!(
                "{label} output shift {shift} exceeds the 32-bit accumulator width"
            )));
        }
        Ok(())
    }

    /// Checks every structural invariant of the configuration.
    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.in_channels == 0 || self.out_channels == 0 || self.kernel == 0 {
            return Err(Error::Configuration("layer dimensions must be positive".to_string()));
        }
        if self.kernel % 2 == 0 {
            return Err(Error::Configuration(format!(
                "kernel size {} must be odd for symmetric same-padding",
                self.kernel
            )));
        }
        match self.kind {
            PrimitiveKind::Standard | PrimitiveKind::Add | PrimitiveKind::Shift => {
                if self.groups != 1 {
                    return Err(Error::Configuration(format!(
                        "{} convolution requires groups = 1, got {}",
                        self.kind, self.groups
                    )));
                }
            }
            // grouping binds only the depthwise stage, which maps C_x -> C_x
            PrimitiveKind::DepthwiseSeparable => {
                if self.groups != self.in_channels {
                    return Err(Error::Configuration(format!(
                        "depthwise separable requires groups = in_channels, got {} != {}",
                        self.groups, self.in_channels
                    )));
                }
            }
            PrimitiveKind::Grouped => {
                if self.groups == 0
                    || self.in_channels % self.groups != 0
                    || self.out_channels % self.groups != 0
                {
                    return Err(Error::Configuration(format!(
                        "groups {} must divide in_channels {} and out_channels {}",
                        self.groups, self.in_channels, self.out_channels
                    )));
                }
            }
        }
        match (&self.kind, &self.shift_table) {
            (PrimitiveKind::Shift, Some(table)) => {
                if table.len() != self.in_channels {
                    return Err(Error::Configuration(format!(
                        "shift table has {} entries for {} input channels",
                        table.len(),
                        self.in_channels
                    )));
                }
                let radius = self.radius();
                for (c, &(a, b)) in table.shifts().iter().enumerate() {
                    if a.abs() > radius || b.abs() > radius {
                        return Err(Error::Configuration(format!(
                            "shift ({a},{b}) of channel {c} exceeds kernel radius {radius}"
                        )));
                    }
                }
            }
            (PrimitiveKind::Shift, None) => {
                return Err(Error::Configuration(
                    "shift convolution requires a shift table".to_string(),
                ));
            }
            (_, Some(_)) => {
                return Err(Error::Configuration(format!(
                    "{} convolution does not take a shift table",
                    self.kind
                )));
            }
            (_, None) => {}
        }

        // Accumulator safety: |products| <= 128 * 128 and a bounded term
        // count keep 32-bit accumulation exact.
        let terms = self.kernel * self.kernel * self.in_channels;
        if terms > MAX_TERMS_PER_OUTPUT {
            return Err(Error::Configuration(format!(
                "kernel^2 * in_channels = {terms} exceeds the accumulator-safe bound {MAX_TERMS_PER_OUTPUT}"
            )));
        }

        match self.kind {
            PrimitiveKind::Add => {
                let (xs, ws, shift) = self.add_alignment();
                if xs.max(ws) > 8 {
                    return Err(Error::Configuration(format!(
                        "add convolution operand alignment shift {} exceeds 8; accumulation would not fit 32 bits",
                        xs.max(ws)
                    )));
                }
                self.check_shift("add convolution", shift)?;
            }
            PrimitiveKind::DepthwiseSeparable => {
                self.check_shift("depthwise stage", self.output_shift())?;
                self.check_shift("pointwise stage", self.pointwise_output_shift())?;
            }
            _ => self.check_shift(self.kind.name(), self.output_shift())?,
        }
        Ok(())
    }

    /// Final output exponent (pointwise stage for depthwise separable,
    /// `dec_output` otherwise; shift_op alone preserves the input's).
    pub fn final_dec(&self) -> i32 {
        match self.kind {
            PrimitiveKind::DepthwiseSeparable => self.pointwise_dec_output,
            _ => self.dec_output,
        }
    }
}

/// Weight tensors a primitive needs, bundled for dispatch.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights {
    /// Standard, grouped, add, and shift (1x1 pointwise) convolutions.
    Dense(QWeights),
    /// Depthwise separable: H_k x H_k x 1 x C_x depthwise kernels plus the
    /// 1 x 1 x C_x x C_y pointwise stage.
    Separable { depthwise: QWeights, pointwise: QWeights },
}

impl LayerWeights {
    pub fn dense(&self) -> Result<&QWeights> {
        match self {
            LayerWeights::Dense(w) => Ok(w),
            LayerWeights::Separable { .. } => Err(Error::Configuration(
                "expected dense weights, got a depthwise separable pair".to_string(),
            )),
        }
    }

    pub fn separable(&self) -> Result<(&QWeights, &QWeights)> {
        match self {
            LayerWeights::Separable { depthwise, pointwise } => Ok((depthwise, pointwise)),
            LayerWeights::Dense(_) => Err(Error::Configuration(
                "expected a depthwise separable pair, got dense weights".to_string(),
            )),
        }
    }

    /// All-zero weights with the shapes `spec` requires.
    pub fn zeros_for(spec: &LayerSpec) -> Result<Self> {
        spec.validate()?;
        match spec.kind {
            PrimitiveKind::Standard | PrimitiveKind::Add => Ok(LayerWeights::Dense(QWeights::zeros(
                spec.kernel,
                spec.kernel,
                spec.in_channels,
                spec.out_channels,
                spec.dec_weight,
            )?)),
            PrimitiveKind::Grouped => Ok(LayerWeights::Dense(QWeights::zeros(
                spec.kernel,
                spec.kernel,
                spec.channels_per_group(),
                spec.out_channels,
                spec.dec_weight,
            )?)),
            PrimitiveKind::Shift => Ok(LayerWeights::Dense(QWeights::zeros(
                1,
                1,
                spec.in_channels,
                spec.out_channels,
                spec.dec_weight,
            )?)),
            PrimitiveKind::DepthwiseSeparable => Ok(LayerWeights::Separable {
                depthwise: QWeights::zeros(spec.kernel, spec.kernel, 1, spec.in_channels, spec.dec_weight)?,
                pointwise: QWeights::zeros(
                    1,
                    1,
                    spec.in_channels,
                    spec.out_channels,
                    spec.pointwise_dec_weight,
                )?,
            }),
        }
    }
}
