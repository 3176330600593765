//! Analytical parameter and MAC counts per primitive, with gain ratios
//! relative to a standard convolution of the same kernel, channel counts and
//! output width. Gains are exact rationals so tests compare them without
//! tolerance. Bias parameters are not counted.

use num_rational::Ratio;

use crate::error::Result;
use crate::layer::{LayerSpec, PrimitiveKind};

/// Cost summary of one layer configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostReport {
    /// Weight (and shift-component) parameter count.
    pub params: u64,
    /// Theoretical multiply-accumulate count; add convolution is charged
    /// like standard convolution even though it multiplies nothing.
    pub macs: u64,
    /// params / params(standard equivalent).
    pub param_gain: Ratio<u64>,
    /// macs / macs(standard equivalent).
    pub complexity_gain: Ratio<u64>,
}

fn standard_counts(spec: &LayerSpec) -> (u64, u64) {
    let k2 = (spec.kernel * spec.kernel) as u64;
    let cx = spec.in_channels as u64;
    let cy = spec.out_channels as u64;
    let hy2 = (spec.input_width * spec.input_width) as u64;
    (k2 * cx * cy, k2 * cx * hy2 * cy)
}

/// Parameter and MAC counts plus gains for a validated layer.
pub fn cost(spec: &LayerSpec) -> Result<CostReport> {
    spec.validate()?;
    let (std_params, std_macs) = standard_counts(spec);
    let k2 = (spec.kernel * spec.kernel) as u64;
    let g = spec.groups as u64;
    let cx = spec.in_channels as u64;
    let cy = spec.out_channels as u64;
    let hy2 = (spec.input_width * spec.input_width) as u64;

    let (params, macs) = match spec.kind {
        PrimitiveKind::Standard | PrimitiveKind::Add => (std_params, std_macs),
        PrimitiveKind::Grouped => (std_params / g, std_macs / g),
        PrimitiveKind::DepthwiseSeparable => (cx * (k2 + cy), cx * hy2 * (k2 + cy)),
        // the two shift components per channel count as parameters
        PrimitiveKind::Shift => (cx * (2 + cy), cx * cy * hy2),
    };

    Ok(CostReport {
        params,
        macs,
        param_gain: Ratio::new(params, std_params),
        complexity_gain: Ratio::new(macs, std_macs),
    })
}

/// Multiplies the reference kernel actually executes. Equals the
/// theoretical MAC count except for add convolution, whose inner loop
/// contains no multiplication.
pub fn executed_macs(spec: &LayerSpec) -> Result<u64> {
    let report = cost(spec)?;
    Ok(match spec.kind {
        PrimitiveKind::Add => 0,
        _ => report.macs,
    })
}

/// Absolute-difference operations the reference kernel executes (add
/// convolution only).
pub fn executed_abs_diffs(spec: &LayerSpec) -> Result<u64> {
    let report = cost(spec)?;
    Ok(match spec.kind {
        PrimitiveKind::Add => report.macs,
        _ => 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::ShiftTable;

    fn decs(spec: LayerSpec) -> LayerSpec {
        spec.with_decs(3, 3, 3)
    }

    #[test]
    fn standard_row_from_experiment_two() {
        // H_k=3, C_x=16, C_y=16, H_y=32: 9 * 16 * 1024 * 16
        let spec = decs(LayerSpec::standard(32, 16, 16, 3));
        let report = cost(&spec).unwrap();
        assert_eq!(report.macs, 2_359_296);
        assert_eq!(report.params, 9 * 16 * 16);
        assert_eq!(report.param_gain, Ratio::from_integer(1));
        assert_eq!(report.complexity_gain, Ratio::from_integer(1));
    }

    #[test]
    fn grouped_divides_by_g() {
        let spec = decs(LayerSpec::grouped(32, 16, 16, 3, 2));
        let report = cost(&spec).unwrap();
        assert_eq!(report.macs, 1_179_648);
        assert_eq!(report.complexity_gain, Ratio::new(1, 2));
        assert_eq!(report.param_gain, Ratio::new(1, 2));
    }

    #[test]
    fn shift_complexity_gain_is_inverse_kernel_square() {
        let spec = decs(LayerSpec::shift(32, 16, 16, 3, ShiftTable::round_robin(16, 3)));
        let report = cost(&spec).unwrap();
        assert_eq!(report.complexity_gain, Ratio::new(1, 9));
        assert_eq!(report.macs, 16 * 16 * 1024);
        assert_eq!(report.params, 16 * (2 + 16));
        // 2 / (C_y * H_k^2) + 1 / H_k^2
        assert_eq!(report.param_gain, Ratio::new(2, 16 * 9) + Ratio::new(1, 9));
    }

    #[test]
    fn dwsep_gain_closed_form() {
        let spec = decs(LayerSpec::depthwise_separable(32, 16, 16, 3));
        let report = cost(&spec).unwrap();
        let expected = Ratio::new(1u64, 16) + Ratio::new(1u64, 9);
        assert_eq!(report.complexity_gain, expected);
        assert_eq!(report.param_gain, expected);
        assert_eq!(report.params, 16 * (9 + 16));
        assert_eq!(report.macs, 16 * 1024 * (9 + 16));
    }

    #[test]
    fn add_charged_like_standard_but_multiplies_nothing() {
        let spec = decs(LayerSpec::add(32, 16, 16, 3));
        let report = cost(&spec).unwrap();
        assert_eq!(report.macs, 2_359_296);
        assert_eq!(report.param_gain, Ratio::from_integer(1));
        assert_eq!(executed_macs(&spec).unwrap(), 0);
        assert_eq!(executed_abs_diffs(&spec).unwrap(), 2_359_296);
    }

    #[test]
    fn shift_executes_only_pointwise_macs() {
        let spec = decs(LayerSpec::shift(10, 8, 4, 3, ShiftTable::round_robin(8, 3)));
        assert_eq!(executed_macs(&spec).unwrap(), 8 * 4 * 100);
    }

    #[test]
    fn dwsep_executed_macs_sum_stages() {
        let spec = decs(LayerSpec::depthwise_separable(8, 4, 6, 3));
        // depthwise 4*64*9 + pointwise 64*4*6
        assert_eq!(executed_macs(&spec).unwrap(), 4 * 64 * 9 + 64 * 4 * 6);
    }

    #[test]
    fn invalid_spec_is_configuration_error() {
        let spec = decs(LayerSpec::grouped(8, 5, 4, 3, 2));
        assert!(cost(&spec).is_err());
    }
}
