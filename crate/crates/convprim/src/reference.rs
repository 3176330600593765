//! Literal scalar reference kernels for the five primitives.
//!
//! These define correctness for the packed fast path. Every kernel runs at
//! stride 1 with zero same-padding and requantizes per the shared inner-loop
//! rule: accumulate products (or negated absolute differences for add
//! convolution) in 32 bits, add the bias at accumulator scale, arithmetic
//! right-shift by the output shift, saturate to 8 bits.
//!
//! Padded positions are treated as literal zeros *inside* the receptive
//! field: standard-family kernels multiply the weight into a zero operand
//! (so the executed multiply count matches the theoretical MAC count
//! exactly), and add convolution accumulates `-|w|` for them.
//!
//! The inner loops route both operands through [`black_box`], which pins
//! the kernels to genuinely scalar execution: every element access
//! materializes its operand and feeds one multiply (or absolute
//! difference), padded taps included, at a uniform cost for every
//! primitive.
//! Left to itself the autovectorizer would turn some of these loops into
//! SIMD code and others not, and the measured cost per MAC would stop being
//! uniform across primitives; exploiting vector hardware is the fast
//! path's job.

use std::hint::black_box;

use crate::error::{Error, Result};
use crate::instrument::{Monitor, NullMonitor};
use crate::layer::{LayerSpec, PrimitiveKind, ShiftTable};
use crate::tensor::{QTensor, QWeights};

/// Shift-then-saturate requantization shared by every kernel and the fast
/// path. `shift` must be in [0, 31] (validated by [`LayerSpec::validate`]).
#[inline]
pub(crate) fn requantize(acc: i32, shift: i32) -> i8 {
    ((acc >> shift).clamp(-128, 127)) as i8
}

fn check_input(x: &QTensor, spec: &LayerSpec) -> Result<()> {
    if x.height() != spec.input_width || x.width() != spec.input_width {
        return Err(Error::Dimension(format!(
            "input is {}x{}, layer expects a square {} input",
            x.height(),
            x.width(),
            spec.input_width
        )));
    }
    if x.channels() != spec.in_channels {
        return Err(Error::Dimension(format!(
            "input has {} channels, layer expects {}",
            x.channels(),
            spec.in_channels
        )));
    }
    if x.dec() != spec.dec_input {
        return Err(Error::Configuration(format!(
            "input dec {} does not match layer dec_input {}",
            x.dec(),
            spec.dec_input
        )));
    }
    Ok(())
}

pub(crate) fn check_weights(
    w: &QWeights,
    kernel: usize,
    in_per_group: usize,
    out_channels: usize,
    dec: i32,
) -> Result<()> {
    if w.kernel_h() != kernel || w.kernel_w() != kernel {
        return Err(Error::Dimension(format!(
            "weights are {}x{}, layer expects a {kernel}x{kernel} kernel",
            w.kernel_h(),
            w.kernel_w()
        )));
    }
    if w.in_channels_per_group() != in_per_group || w.out_channels() != out_channels {
        return Err(Error::Dimension(format!(
            "weights map {} channels to {} filters, layer expects {} -> {}",
            w.in_channels_per_group(),
            w.out_channels(),
            in_per_group,
            out_channels
        )));
    }
    if w.dec() != dec {
        return Err(Error::Configuration(format!(
            "weight dec {} does not match layer dec_weight {dec}",
            w.dec()
        )));
    }
    Ok(())
}

/// Core grouped multiply-accumulate loop; standard convolution is the G = 1
/// case but keeps its own literal implementation below.
fn grouped_mac_loop<M: Monitor>(
    x: &QTensor,
    w: &QWeights,
    spec: &LayerSpec,
    groups: usize,
    mon: &mut M,
) -> Vec<i8> {
    let h = spec.input_width;
    let k = spec.kernel;
    let r = spec.radius() as isize;
    let cpg = spec.in_channels / groups;
    let fpg = spec.out_channels / groups;
    let shift = spec.output_shift();
    let xd = x.data();
    let bias = w.bias();

    let mut out = vec![0i8; h * h * spec.out_channels];
    for g in 0..groups {
        let ch_base = g * cpg;
        for oy in 0..h {
            for ox in 0..h {
                let out_row = (oy * h + ox) * spec.out_channels + g * fpg;
                for nl in 0..fpg {
                    let n = g * fpg + nl;
                    let flt = w.filter(n);
                    let mut acc: i32 = match bias {
                        Some(b) => {
                            mon.load(1);
                            mon.add_sub(1);
                            b[n]
                        }
                        None => 0,
                    };
                    let mut t = 0;
                    for ki in 0..k {
                        let sy = oy as isize + ki as isize - r;
                        let row_ok = sy >= 0 && (sy as usize) < h;
                        for kj in 0..k {
                            let sx = ox as isize + kj as isize - r;
                            let fr = &flt[t..t + cpg];
                            if row_ok && sx >= 0 && (sx as usize) < h {
                                let base = x.flat_index(sy as usize, sx as usize, ch_base);
                                let xr = &xd[base..base + cpg];
                                for (xv, wv) in xr.iter().zip(fr) {
                                    acc += black_box(*xv as i32) * black_box(*wv as i32);
                                }
                                mon.load(2 * cpg as u64);
                            } else {
                                // padded tap: weight read, multiplied into zero
                                for wv in fr {
                                    acc += black_box(0i32) * black_box(*wv as i32);
                                }
                                mon.load(cpg as u64);
                            }
                            mon.mul(cpg as u64);
                            mon.add_sub(cpg as u64);
                            t += cpg;
                        }
                    }
                    out[out_row + nl] = requantize(acc, shift);
                    mon.store(1);
                }
            }
        }
    }
    out
}

/// Standard convolution: full cross-correlation over every input channel.
pub fn conv_standard_with<M: Monitor>(
    x: &QTensor,
    w: &QWeights,
    spec: &LayerSpec,
    mon: &mut M,
) -> Result<QTensor> {
    spec.validate()?;
    if spec.kind != PrimitiveKind::Standard {
        return Err(Error::Configuration(format!(
            "conv_standard called with a {} spec",
            spec.kind
        )));
    }
    check_input(x, spec)?;
    check_weights(w, spec.kernel, spec.in_channels, spec.out_channels, spec.dec_weight)?;

    let h = spec.input_width;
    let k = spec.kernel;
    let r = spec.radius() as isize;
    let cx = spec.in_channels;
    let cy = spec.out_channels;
    let shift = spec.output_shift();
    let xd = x.data();
    let bias = w.bias();

    let mut out = vec![0i8; h * h * cy];
    for oy in 0..h {
        for ox in 0..h {
            let out_row = (oy * h + ox) * cy;
            for n in 0..cy {
                let flt = w.filter(n);
                let mut acc: i32 = match bias {
                    Some(b) => {
                        mon.load(1);
                        mon.add_sub(1);
                        b[n]
                    }
                    None => 0,
                };
                let mut t = 0;
                for ki in 0..k {
                    let sy = oy as isize + ki as isize - r;
                    let row_ok = sy >= 0 && (sy as usize) < h;
                    for kj in 0..k {
                        let sx = ox as isize + kj as isize - r;
                        let fr = &flt[t..t + cx];
                        if row_ok && sx >= 0 && (sx as usize) < h {
                            let base = x.flat_index(sy as usize, sx as usize, 0);
                            let xr = &xd[base..base + cx];
                            for (xv, wv) in xr.iter().zip(fr) {
                                acc += black_box(*xv as i32) * black_box(*wv as i32);
                            }
                            mon.load(2 * cx as u64);
                        } else {
                            for wv in fr {
                                acc += black_box(0i32) * black_box(*wv as i32);
                            }
                            mon.load(cx as u64);
                        }
                        mon.mul(cx as u64);
                        mon.add_sub(cx as u64);
                        t += cx;
                    }
                }
                out[out_row + n] = requantize(acc, shift);
                mon.store(1);
            }
        }
    }
    QTensor::new(h, h, cy, spec.dec_output, out)
}

pub fn conv_standard(x: &QTensor, w: &QWeights, spec: &LayerSpec) -> Result<QTensor> {
    conv_standard_with(x, w, spec, &mut NullMonitor)
}

/// Grouped convolution: output channels of group g read only the input
/// channels of group g.
pub fn conv_grouped_with<M: Monitor>(
    x: &QTensor,
    w: &QWeights,
    spec: &LayerSpec,
    mon: &mut M,
) -> Result<QTensor> {
    spec.validate()?;
    if spec.kind != PrimitiveKind::Grouped {
        return Err(Error::Configuration(format!(
            "conv_grouped called with a {} spec",
            spec.kind
        )));
    }
    check_input(x, spec)?;
    check_weights(w, spec.kernel, spec.channels_per_group(), spec.out_channels, spec.dec_weight)?;
    let out = grouped_mac_loop(x, w, spec, spec.groups, mon);
    QTensor::new(spec.input_width, spec.input_width, spec.out_channels, spec.dec_output, out)
}

pub fn conv_grouped(x: &QTensor, w: &QWeights, spec: &LayerSpec) -> Result<QTensor> {
    conv_grouped_with(x, w, spec, &mut NullMonitor)
}

pub(crate) fn depthwise_stage_spec(spec: &LayerSpec) -> LayerSpec {
    LayerSpec::grouped(spec.input_width, spec.in_channels, spec.in_channels, spec.kernel, spec.in_channels)
        .with_decs(spec.dec_input, spec.dec_weight, spec.dec_output)
}

pub(crate) fn pointwise_stage_spec(spec: &LayerSpec) -> LayerSpec {
    LayerSpec::standard(spec.input_width, spec.in_channels, spec.out_channels, 1).with_decs(
        spec.dec_output,
        spec.pointwise_dec_weight,
        spec.pointwise_dec_output,
    )
}

/// Depthwise separable convolution: a depthwise stage (grouped with
/// G = C_x) requantized to the intermediate exponent, then a 1x1 pointwise
/// stage mixing channels.
pub fn conv_depthwise_separable_with<M: Monitor>(
    x: &QTensor,
    w_dw: &QWeights,
    w_pw: &QWeights,
    spec: &LayerSpec,
    mon: &mut M,
) -> Result<QTensor> {
    spec.validate()?;
    if spec.kind != PrimitiveKind::DepthwiseSeparable {
        return Err(Error::Configuration(format!(
            "conv_depthwise_separable called with a {} spec",
            spec.kind
        )));
    }
    check_input(x, spec)?;
    check_weights(w_dw, spec.kernel, 1, spec.in_channels, spec.dec_weight)?;
    check_weights(w_pw, 1, spec.in_channels, spec.out_channels, spec.pointwise_dec_weight)?;

    let intermediate = conv_grouped_with(x, w_dw, &depthwise_stage_spec(spec), mon)?;
    conv_standard_with(&intermediate, w_pw, &pointwise_stage_spec(spec), mon)
}

pub fn conv_depthwise_separable(
    x: &QTensor,
    w_dw: &QWeights,
    w_pw: &QWeights,
    spec: &LayerSpec,
) -> Result<QTensor> {
    conv_depthwise_separable_with(x, w_dw, w_pw, spec, &mut NullMonitor)
}

/// Per-channel spatial translation. Out-of-range sources read as zero; the
/// output keeps the input's shape and exponent. Pure data movement: records
/// no multiplies.
pub fn shift_op_with<M: Monitor>(x: &QTensor, table: &ShiftTable, mon: &mut M) -> Result<QTensor> {
    if table.len() != x.channels() {
        return Err(Error::Configuration(format!(
            "shift table has {} entries for {} channels",
            table.len(),
            x.channels()
        )));
    }
    let h = x.height();
    let w = x.width();
    let c = x.channels();
    let xd = x.data();
    let mut out = vec![0i8; xd.len()];
    for oy in 0..h {
        for ox in 0..w {
            let row = (oy * w + ox) * c;
            for m in 0..c {
                let (a, b) = table.shift(m);
                let sy = oy as isize + a as isize;
                let sx = ox as isize + b as isize;
                let v = if sy >= 0 && (sy as usize) < h && sx >= 0 && (sx as usize) < w {
                    mon.load(1);
                    xd[x.flat_index(sy as usize, sx as usize, m)]
                } else {
                    0
                };
                out[row + m] = v;
                mon.store(1);
            }
        }
    }
    QTensor::new(h, w, c, x.dec(), out)
}

pub fn shift_op(x: &QTensor, table: &ShiftTable) -> Result<QTensor> {
    shift_op_with(x, table, &mut NullMonitor)
}

/// Shift convolution: the MAC-free per-channel shift, then a 1x1 pointwise
/// convolution. Total multiplies are the pointwise stage's alone.
pub fn conv_shift_with<M: Monitor>(
    x: &QTensor,
    w_pw: &QWeights,
    table: &ShiftTable,
    spec: &LayerSpec,
    mon: &mut M,
) -> Result<QTensor> {
    spec.validate()?;
    if spec.kind != PrimitiveKind::Shift {
        return Err(Error::Configuration(format!("conv_shift called with a {} spec", spec.kind)));
    }
    check_input(x, spec)?;
    check_weights(w_pw, 1, spec.in_channels, spec.out_channels, spec.dec_weight)?;
    let radius = spec.radius();
    for (c, &(a, b)) in table.shifts().iter().enumerate() {
        if a.abs() > radius || b.abs() > radius {
            return Err(Error::Configuration(format!(
                "shift ({a},{b}) of channel {c} exceeds kernel radius {radius}"
            )));
        }
    }

    let shifted = shift_op_with(x, table, mon)?;
    let pw_spec = LayerSpec::standard(spec.input_width, spec.in_channels, spec.out_channels, 1)
        .with_decs(spec.dec_input, spec.dec_weight, spec.dec_output);
    conv_standard_with(&shifted, w_pw, &pw_spec, mon)
}

pub fn conv_shift(x: &QTensor, w_pw: &QWeights, table: &ShiftTable, spec: &LayerSpec) -> Result<QTensor> {
    conv_shift_with(x, w_pw, table, spec, &mut NullMonitor)
}

/// Add convolution: accumulates negated L1 distances between weight and
/// input. Operands are aligned to the coarser exponent by left-shifting the
/// finer one before the difference; every pre-activation output is <= 0.
pub fn conv_add_with<M: Monitor>(
    x: &QTensor,
    w: &QWeights,
    spec: &LayerSpec,
    mon: &mut M,
) -> Result<QTensor> {
    spec.validate()?;
    if spec.kind != PrimitiveKind::Add {
        return Err(Error::Configuration(format!("conv_add called with a {} spec", spec.kind)));
    }
    check_input(x, spec)?;
    check_weights(w, spec.kernel, spec.in_channels, spec.out_channels, spec.dec_weight)?;

    let h = spec.input_width;
    let k = spec.kernel;
    let r = spec.radius() as isize;
    let cx = spec.in_channels;
    let cy = spec.out_channels;
    let (x_shl, w_shl, shift) = spec.add_alignment();
    let xd = x.data();
    let bias = w.bias();

    let mut out = vec![0i8; h * h * cy];
    for oy in 0..h {
        for ox in 0..h {
            let out_row = (oy * h + ox) * cy;
            for n in 0..cy {
                let flt = w.filter(n);
                let mut acc: i32 = match bias {
                    Some(b) => {
                        mon.load(1);
                        mon.add_sub(1);
                        b[n]
                    }
                    None => 0,
                };
                let mut t = 0;
                for ki in 0..k {
                    let sy = oy as isize + ki as isize - r;
                    let row_ok = sy >= 0 && (sy as usize) < h;
                    for kj in 0..k {
                        let sx = ox as isize + kj as isize - r;
                        let fr = &flt[t..t + cx];
                        if row_ok && sx >= 0 && (sx as usize) < h {
                            let base = x.flat_index(sy as usize, sx as usize, 0);
                            let xr = &xd[base..base + cx];
                            for (xv, wv) in xr.iter().zip(fr) {
                                let a = black_box((*xv as i32) << x_shl);
                                let b = black_box((*wv as i32) << w_shl);
                                acc += -(a - b).abs();
                            }
                            mon.load(2 * cx as u64);
                        } else {
                            // padded tap contributes -|w| at aligned scale
                            for wv in fr {
                                let b = black_box((*wv as i32) << w_shl);
                                acc += -(black_box(0i32) - b).abs();
                            }
                            mon.load(cx as u64);
                        }
                        mon.abs_op(cx as u64);
                        mon.add_sub(2 * cx as u64);
                        t += cx;
                    }
                }
                out[out_row + n] = requantize(acc, shift);
                mon.store(1);
            }
        }
    }
    QTensor::new(h, h, cy, spec.dec_output, out)
}

pub fn conv_add(x: &QTensor, w: &QWeights, spec: &LayerSpec) -> Result<QTensor> {
    conv_add_with(x, w, spec, &mut NullMonitor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> StdRng {
        StdRng::seed_from_u64(seed)
    }

    fn random_tensor(r: &mut StdRng, h: usize, c: usize, dec: i32) -> QTensor {
        let data = (0..h * h * c).map(|_| r.gen_range(-128i32..=127) as i8).collect();
        QTensor::new(h, h, c, dec, data).unwrap()
    }

    fn random_weights(
        r: &mut StdRng,
        k: usize,
        cpg: usize,
        cout: usize,
        dec: i32,
        bias: bool,
    ) -> QWeights {
        let data = (0..k * k * cpg * cout).map(|_| r.gen_range(-128i32..=127) as i8).collect();
        let bias = bias.then(|| (0..cout).map(|_| r.gen_range(-1024i32..=1024)).collect());
        QWeights::new(k, k, cpg, cout, dec, data, bias).unwrap()
    }

    #[test]
    fn single_tap_trace() {
        // acc = 10 * 3 = 30, shift = 5 + 4 - 2 = 7, 30 >> 7 = 0
        let x = QTensor::new(1, 1, 1, 4, vec![10]).unwrap();
        let w = QWeights::new(1, 1, 1, 1, 5, vec![3], None).unwrap();
        let spec = LayerSpec::standard(1, 1, 1, 1).with_decs(4, 5, 2);
        let y = conv_standard(&x, &w, &spec).unwrap();
        assert_eq!(y.data(), &[0]);
    }

    #[test]
    fn halving_kernel_rounds_toward_neg_inf() {
        // w = 64 with an output shift of 7 halves the input with floor
        // semantics: dec_weight = 7, dec_input = dec_output = 0.
        let x = QTensor::new(1, 1, 4, 0, vec![100, -5, 1, -128]).unwrap();
        let w = QWeights::new(
            1,
            1,
            4,
            4,
            7,
            vec![
                64, 0, 0, 0, //
                0, 64, 0, 0, //
                0, 0, 64, 0, //
                0, 0, 0, 64,
            ],
            None,
        )
        .unwrap();
        let spec = LayerSpec::standard(1, 4, 4, 1).with_decs(0, 7, 0);
        let y = conv_standard(&x, &w, &spec).unwrap();
        assert_eq!(y.data(), &[50, -3, 0, -64]);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut r = rng(1);
        let x = random_tensor(&mut r, 5, 3, 2);
        let w = QWeights::zeros(3, 3, 3, 4, 1).unwrap();
        let spec = LayerSpec::standard(5, 3, 4, 3).with_decs(2, 1, 0);
        let y = conv_standard(&x, &w, &spec).unwrap();
        assert!(y.data().iter().all(|&v| v == 0));
        assert_eq!((y.height(), y.width(), y.channels()), (5, 5, 4));
    }

    #[test]
    fn bias_enters_before_output_shift() {
        // acc = 10 * 3 + 98 = 128, shift = 7 -> 1; without bias 30 >> 7 = 0
        let x = QTensor::new(1, 1, 1, 4, vec![10]).unwrap();
        let w = QWeights::new(1, 1, 1, 1, 5, vec![3], Some(vec![98])).unwrap();
        let spec = LayerSpec::standard(1, 1, 1, 1).with_decs(4, 5, 2);
        let y = conv_standard(&x, &w, &spec).unwrap();
        assert_eq!(y.data(), &[1]);
    }

    #[test]
    fn grouped_with_one_group_matches_standard() {
        let mut r = rng(7);
        for _ in 0..10 {
            let h = r.gen_range(2..7);
            let c = r.gen_range(1..6);
            let f = r.gen_range(1..6);
            let k = if r.gen_bool(0.5) { 1 } else { 3 };
            let x = random_tensor(&mut r, h, c, 3);
            let w = random_weights(&mut r, k, c, f, 2, true);
            let std_spec = LayerSpec::standard(h, c, f, k).with_decs(3, 2, 1);
            let grp_spec = LayerSpec::grouped(h, c, f, k, 1).with_decs(3, 2, 1);
            assert_eq!(
                conv_grouped(&x, &w, &grp_spec).unwrap(),
                conv_standard(&x, &w, &std_spec).unwrap()
            );
        }
    }

    #[test]
    fn group_isolation() {
        // G=2, C_x=4, C_y=4: outputs of group 0 ignore input channels 2-3.
        let mut r = rng(11);
        let spec = LayerSpec::grouped(4, 4, 4, 3, 2).with_decs(0, 0, 0);
        let w = random_weights(&mut r, 3, 2, 4, 0, false);
        let x = random_tensor(&mut r, 4, 4, 0);
        let base = conv_grouped(&x, &w, &spec).unwrap();

        let mut perturbed = x.data().to_vec();
        for (i, v) in perturbed.iter_mut().enumerate() {
            if i % 4 >= 2 {
                *v = v.wrapping_add(17);
            }
        }
        let x2 = QTensor::new(4, 4, 4, 0, perturbed).unwrap();
        let changed = conv_grouped(&x2, &w, &spec).unwrap();
        for pos in 0..16 {
            for n in 0..2 {
                assert_eq!(base.data()[pos * 4 + n], changed.data()[pos * 4 + n]);
            }
        }
    }

    #[test]
    fn fully_grouped_matches_independent_depthwise_oracle() {
        // G = C_x = C_y: per-channel convolution, checked against a direct
        // per-channel loop written independently of the kernel code.
        let mut r = rng(13);
        let (h, c, k) = (5, 4, 3);
        let x = random_tensor(&mut r, h, c, 1);
        let w = random_weights(&mut r, k, 1, c, 2, false);
        let spec = LayerSpec::grouped(h, c, c, k, c).with_decs(1, 2, 0);
        let got = conv_grouped(&x, &w, &spec).unwrap();

        let radius = (k as i32 - 1) / 2;
        let shift = 1 + 2 - 0;
        for oy in 0..h as i32 {
            for ox in 0..h as i32 {
                for m in 0..c {
                    let mut acc: i32 = 0;
                    for ki in 0..k as i32 {
                        for kj in 0..k as i32 {
                            let sy = oy + ki - radius;
                            let sx = ox + kj - radius;
                            let xv = if (0..h as i32).contains(&sy) && (0..h as i32).contains(&sx) {
                                x.at(sy as usize, sx as usize, m).unwrap() as i32
                            } else {
                                0
                            };
                            let wv = w.at(ki as usize, kj as usize, 0, m) as i32;
                            acc += xv * wv;
                        }
                    }
                    let expect = ((acc >> shift).clamp(-128, 127)) as i8;
                    assert_eq!(got.at(oy as usize, ox as usize, m).unwrap(), expect);
                }
            }
        }
    }

    #[test]
    fn dwsep_equals_grouped_then_pointwise() {
        let mut r = rng(17);
        for _ in 0..5 {
            let h = r.gen_range(3..6);
            let c = r.gen_range(1..5);
            let f = r.gen_range(1..5);
            let x = random_tensor(&mut r, h, c, 3);
            let w_dw = random_weights(&mut r, 3, 1, c, 2, false);
            let w_pw = random_weights(&mut r, 1, c, f, 1, true);
            let spec = LayerSpec::depthwise_separable(h, c, f, 3)
                .with_decs(3, 2, 2)
                .with_pointwise_decs(1, 0);
            let composed = conv_depthwise_separable(&x, &w_dw, &w_pw, &spec).unwrap();

            let dw_spec = LayerSpec::grouped(h, c, c, 3, c).with_decs(3, 2, 2);
            let pw_spec = LayerSpec::standard(h, c, f, 1).with_decs(2, 1, 0);
            let staged =
                conv_standard(&conv_grouped(&x, &w_dw, &dw_spec).unwrap(), &w_pw, &pw_spec).unwrap();
            assert_eq!(composed, staged);
        }
    }

    #[test]
    fn dwsep_identity_pointwise_reduces_to_depthwise() {
        // C_x = 1 with a unit pointwise weight and a zero pointwise shift
        // leaves the depthwise result unchanged.
        let mut r = rng(19);
        let x = random_tensor(&mut r, 4, 1, 2);
        let w_dw = random_weights(&mut r, 3, 1, 1, 1, false);
        let w_pw = QWeights::new(1, 1, 1, 1, 0, vec![1], None).unwrap();
        let spec = LayerSpec::depthwise_separable(4, 1, 1, 3)
            .with_decs(2, 1, 0)
            .with_pointwise_decs(0, 0);
        let full = conv_depthwise_separable(&x, &w_dw, &w_pw, &spec).unwrap();
        let dw_only = conv_grouped(&x, &w_dw, &depthwise_stage_spec(&spec)).unwrap();
        assert_eq!(full.data(), dw_only.data());
    }

    #[test]
    fn shift_identity_table_copies_input() {
        let mut r = rng(23);
        let x = random_tensor(&mut r, 5, 3, 2);
        let table = ShiftTable::new(vec![(0, 0); 3]);
        assert_eq!(shift_op(&x, &table).unwrap(), x);
    }

    #[test]
    fn shift_translates_rows_and_zero_fills() {
        // Single channel 3x3 ramp shifted by (1, 0): row r reads source
        // row r+1, the vacated last row reads zeros.
        let x = QTensor::new(3, 3, 1, 0, vec![1, 2, 3, 4, 5, 6, 7, 8, 9]).unwrap();
        let table = ShiftTable::new(vec![(1, 0)]);
        let y = shift_op(&x, &table).unwrap();
        assert_eq!(y.data(), &[4, 5, 6, 7, 8, 9, 0, 0, 0]);
    }

    #[test]
    fn shift_equals_one_hot_depthwise() {
        let mut r = rng(29);
        for _ in 0..10 {
            let h = r.gen_range(3..7);
            let c = r.gen_range(1..6);
            let k = 3;
            let radius = 1i32;
            let x = random_tensor(&mut r, h, c, 2);
            let shifts: Vec<(i32, i32)> = (0..c)
                .map(|_| (r.gen_range(-radius..=radius), r.gen_range(-radius..=radius)))
                .collect();
            let table = ShiftTable::new(shifts.clone());
            let shifted = shift_op(&x, &table).unwrap();

            // one-hot depthwise kernel: value 1 at (a + r, b + r), zero shift
            let mut data = vec![0i8; k * k * c];
            for (m, &(a, b)) in shifts.iter().enumerate() {
                let ki = (a + radius) as usize;
                let kj = (b + radius) as usize;
                data[(m * k + ki) * k + kj] = 1;
            }
            let w = QWeights::new(k, k, 1, c, 0, data, None).unwrap();
            let spec = LayerSpec::grouped(h, c, c, k, c).with_decs(2, 0, 2);
            assert_eq!(conv_grouped(&x, &w, &spec).unwrap(), shifted);
        }
    }

    #[test]
    fn conv_shift_zero_table_identity_pointwise() {
        // Zero shifts plus a per-channel unit pointwise weight at shift 0:
        // channelwise requantized copy of the input.
        let x = QTensor::new(2, 2, 2, 3, vec![5, -9, 17, 33, -120, 6, 0, 127]).unwrap();
        let mut pw = vec![0i8; 4];
        pw[0] = 1; // filter 0 reads channel 0
        pw[3] = 1; // filter 1 reads channel 1
        let w = QWeights::new(1, 1, 2, 2, 0, pw, None).unwrap();
        let table = ShiftTable::new(vec![(0, 0); 2]);
        let spec = LayerSpec::shift(2, 2, 2, 1, table.clone()).with_decs(3, 0, 3);
        let y = conv_shift(&x, &w, &table, &spec).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn add_trace_equal_decs() {
        // -|10 - 3| >> 2 = -7 >> 2 = -2 (arithmetic shift, floor)
        let x = QTensor::new(1, 1, 1, 4, vec![10]).unwrap();
        let w = QWeights::new(1, 1, 1, 1, 4, vec![3], None).unwrap();
        let spec = LayerSpec::add(1, 1, 1, 1).with_decs(4, 4, 2);
        assert_eq!(conv_add(&x, &w, &spec).unwrap().data(), &[-2]);
    }

    #[test]
    fn add_trace_coarser_input() {
        // dec_in = 5 > dec_w = 4: w << 1, -|10 - 6| >> (5 - 2) = -1
        let x = QTensor::new(1, 1, 1, 5, vec![10]).unwrap();
        let w = QWeights::new(1, 1, 1, 1, 4, vec![3], None).unwrap();
        let spec = LayerSpec::add(1, 1, 1, 1).with_decs(5, 4, 2);
        assert_eq!(conv_add(&x, &w, &spec).unwrap().data(), &[-1]);
    }

    #[test]
    fn add_identical_operands_give_zero() {
        let mut r = rng(31);
        let x = random_tensor(&mut r, 1, 4, 3);
        let w = QWeights::new(1, 1, 4, 1, 3, x.data().to_vec(), None).unwrap();
        let spec = LayerSpec::add(1, 4, 1, 1).with_decs(3, 3, 1);
        assert_eq!(conv_add(&x, &w, &spec).unwrap().data(), &[0]);
    }

    #[test]
    fn add_outputs_never_positive() {
        let mut r = rng(37);
        for _ in 0..20 {
            let h = r.gen_range(2..6);
            let c = r.gen_range(1..5);
            let f = r.gen_range(1..5);
            let x = random_tensor(&mut r, h, c, 4);
            let w = random_weights(&mut r, 3, c, f, 3, false);
            let spec = LayerSpec::add(h, c, f, 3).with_decs(4, 3, 2);
            let y = conv_add(&x, &w, &spec).unwrap();
            assert!(y.data().iter().all(|&v| v <= 0));
        }
    }

    #[test]
    fn accumulator_survives_extreme_inputs() {
        // Maximum term count (7^2 * 668 = 32732 <= 2^15) with every operand
        // at -128: |acc| peaks below 2^31 and the result saturates cleanly.
        let (h, c, k) = (3, 668, 7);
        let x = QTensor::new(h, h, c, 0, vec![-128; h * h * c]).unwrap();
        let w = QWeights::new(k, k, c, 1, 0, vec![-128; k * k * c], None).unwrap();
        let spec = LayerSpec::standard(h, c, 1, k).with_decs(0, 0, 0);
        let y = conv_standard(&x, &w, &spec).unwrap();
        assert!(y.data().iter().all(|&v| v == 127));

        let add_spec = LayerSpec::add(h, c, 1, k).with_decs(0, 0, 0);
        let w2 = QWeights::new(k, k, c, 1, 0, vec![127; k * k * c], None).unwrap();
        let y2 = conv_add(&x, &w2, &add_spec).unwrap();
        assert!(y2.data().iter().all(|&v| v == -128));
    }

    #[test]
    fn output_width_equals_input_width() {
        let mut r = rng(41);
        for k in [1usize, 3, 5] {
            let x = random_tensor(&mut r, 6, 4, 0);
            let w = random_weights(&mut r, k, 4, 3, 0, false);
            let spec = LayerSpec::standard(6, 4, 3, k).with_decs(0, 0, 0);
            let y = conv_standard(&x, &w, &spec).unwrap();
            assert_eq!((y.height(), y.width()), (6, 6));
        }
    }

    #[test]
    fn shape_mismatch_reported() {
        let x = QTensor::zeros(4, 4, 3, 0).unwrap();
        let w = QWeights::zeros(3, 3, 2, 4, 0).unwrap();
        let spec = LayerSpec::standard(4, 3, 4, 3);
        assert!(matches!(conv_standard(&x, &w, &spec), Err(Error::Dimension(_))));
        let spec_wrong_width = LayerSpec::standard(5, 3, 4, 3);
        assert!(matches!(
            conv_standard(&x, &w, &spec_wrong_width),
            Err(Error::Dimension(_))
        ));
    }
}
