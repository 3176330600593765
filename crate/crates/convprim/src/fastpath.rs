//! im2col fast path with packed dual multiply-accumulate.
//!
//! Mirrors the CMSIS-NN strategy: sample at most two input patches into a
//! column buffer (widened to 16 bits), pre-widen the filters once per layer,
//! and compute 2x2 blocks of (patch, filter) dot products two terms at a
//! time so every loaded element feeds two dot products. Grouped layers run
//! the algorithm per group; shift convolution samples each channel with its
//! own displacement instead of materializing the shifted tensor. Outputs are
//! bit-identical to the reference kernels. Add convolution has no fast path.

use crate::error::{Error, Result};
use crate::instrument::{Monitor, NullMonitor};
use crate::layer::{LayerSpec, PrimitiveKind};
use crate::reference::{check_weights, depthwise_stage_spec, pointwise_stage_spec, requantize};
use crate::tensor::{QTensor, QWeights};

/// Two-term packed multiply-accumulate: `acc + a0*b0 + a1*b1` on widened
/// 16-bit operands, accumulated in 32 bits without saturation.
#[inline(always)]
pub fn packed_mac(acc: i32, a: (i16, i16), b: (i16, i16)) -> i32 {
    acc + (a.0 as i32) * (b.0 as i32) + (a.1 as i32) * (b.1 as i32)
}

/// Column buffer holding at most two flattened patches widened to 16 bits.
#[derive(Debug, Clone)]
pub struct Im2ColBuffer {
    patch_len: usize,
    valid_count: usize,
    data: Vec<i16>,
}

impl Im2ColBuffer {
    /// Allocates space for exactly two patches of `patch_len` elements.
    pub fn with_patch_len(patch_len: usize) -> Self {
        Im2ColBuffer { patch_len, valid_count: 0, data: vec![0; 2 * patch_len] }
    }

    pub fn patch_len(&self) -> usize {
        self.patch_len
    }

    /// Number of filled columns: 0, 1 or 2.
    pub fn valid_count(&self) -> usize {
        self.valid_count
    }

    /// Total buffer capacity in widened elements (always two patches).
    pub fn capacity_elements(&self) -> usize {
        self.data.len()
    }

    /// Filled column `i`.
    pub fn column(&self, i: usize) -> &[i16] {
        debug_assert!(i < self.valid_count);
        &self.data[i * self.patch_len..(i + 1) * self.patch_len]
    }

    fn column_mut(&mut self, i: usize) -> &mut [i16] {
        &mut self.data[i * self.patch_len..(i + 1) * self.patch_len]
    }
}

fn check_positions(positions: &[(usize, usize)], width: usize) -> Result<()> {
    if positions.len() > 2 {
        return Err(Error::Configuration(format!(
            "column buffer holds at most 2 patches, got {} positions",
            positions.len()
        )));
    }
    for &(oy, ox) in positions {
        if oy >= width || ox >= width {
            return Err(Error::Bounds(format!(
                "output position ({oy},{ox}) outside {width}x{width}"
            )));
        }
    }
    Ok(())
}

/// Fills `buf` with the zero-padded receptive fields of up to two output
/// positions, reading input channels `[ch_base, ch_base + ch_count)` and
/// flattening in (kernel-row, kernel-col, channel) order.
fn fill_patches<M: Monitor>(
    buf: &mut Im2ColBuffer,
    x: &QTensor,
    kernel: usize,
    radius: isize,
    ch_base: usize,
    ch_count: usize,
    positions: &[(usize, usize)],
    mon: &mut M,
) {
    let h = x.height();
    let w = x.width();
    let xd = x.data();
    buf.valid_count = positions.len();
    for (p, &(oy, ox)) in positions.iter().enumerate() {
        let col = buf.column_mut(p);
        let mut t = 0;
        for ki in 0..kernel {
            let sy = oy as isize + ki as isize - radius;
            let row_ok = sy >= 0 && (sy as usize) < h;
            for kj in 0..kernel {
                let sx = ox as isize + kj as isize - radius;
                let dst = &mut col[t..t + ch_count];
                if row_ok && sx >= 0 && (sx as usize) < w {
                    let base = x.flat_index(sy as usize, sx as usize, ch_base);
                    for (d, s) in dst.iter_mut().zip(&xd[base..base + ch_count]) {
                        *d = *s as i16;
                    }
                    mon.load(ch_count as u64);
                } else {
                    dst.fill(0);
                }
                mon.store(ch_count as u64);
                t += ch_count;
            }
        }
    }
}

/// Samples up to two patches for the given output positions (group 0's
/// channels when the spec is grouped).
pub fn im2col_patches(
    x: &QTensor,
    spec: &LayerSpec,
    positions: &[(usize, usize)],
) -> Result<Im2ColBuffer> {
    im2col_patches_with(x, spec, positions, &mut NullMonitor)
}

pub fn im2col_patches_with<M: Monitor>(
    x: &QTensor,
    spec: &LayerSpec,
    positions: &[(usize, usize)],
    mon: &mut M,
) -> Result<Im2ColBuffer> {
    check_positions(positions, spec.input_width)?;
    let cpg = spec.channels_per_group();
    let mut buf = Im2ColBuffer::with_patch_len(spec.kernel * spec.kernel * cpg);
    fill_patches(&mut buf, x, spec.kernel, spec.radius() as isize, 0, cpg, positions, mon);
    Ok(buf)
}

/// Shift-convolution sampling: one entry per input channel, read at the
/// channel's displaced source coordinate (zero outside the input).
pub fn im2col_patches_shifted(
    x: &QTensor,
    spec: &LayerSpec,
    positions: &[(usize, usize)],
) -> Result<Im2ColBuffer> {
    im2col_patches_shifted_with(x, spec, positions, &mut NullMonitor)
}

pub fn im2col_patches_shifted_with<M: Monitor>(
    x: &QTensor,
    spec: &LayerSpec,
    positions: &[(usize, usize)],
    mon: &mut M,
) -> Result<Im2ColBuffer> {
    check_positions(positions, spec.input_width)?;
    let table = spec
        .shift_table
        .as_ref()
        .ok_or_else(|| Error::Configuration("shifted sampling requires a shift table".to_string()))?;
    if table.len() != x.channels() {
        return Err(Error::Configuration(format!(
            "shift table has {} entries for {} channels",
            table.len(),
            x.channels()
        )));
    }
    let h = x.height();
    let w = x.width();
    let xd = x.data();
    let c = x.channels();
    let mut buf = Im2ColBuffer::with_patch_len(c);
    buf.valid_count = positions.len();
    for (p, &(oy, ox)) in positions.iter().enumerate() {
        let col = buf.column_mut(p);
        for (m, slot) in col.iter_mut().enumerate() {
            let (a, b) = table.shift(m);
            let sy = oy as isize + a as isize;
            let sx = ox as isize + b as isize;
            *slot = if sy >= 0 && (sy as usize) < h && sx >= 0 && (sx as usize) < w {
                mon.load(1);
                xd[x.flat_index(sy as usize, sx as usize, m)] as i16
            } else {
                0
            };
            mon.store(1);
        }
    }
    Ok(buf)
}

/// Filters widened to 16 bits once per layer invocation, filter-major.
#[derive(Debug, Clone)]
pub struct WidenedFilters {
    filter_len: usize,
    count: usize,
    data: Vec<i16>,
}

impl WidenedFilters {
    /// Widens filters `[first, first + count)` of `w`.
    pub fn from_weights<M: Monitor>(w: &QWeights, first: usize, count: usize, mon: &mut M) -> Self {
        let filter_len = w.filter_len();
        let mut data = Vec::with_capacity(filter_len * count);
        for n in first..first + count {
            data.extend(w.filter(n).iter().map(|&v| v as i16));
        }
        mon.load((filter_len * count) as u64);
        mon.store((filter_len * count) as u64);
        WidenedFilters { filter_len, count, data }
    }

    pub fn filter_len(&self) -> usize {
        self.filter_len
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn filter(&self, i: usize) -> &[i16] {
        &self.data[i * self.filter_len..(i + 1) * self.filter_len]
    }
}

/// Up to four requantized outputs of a 2x2 (patch, filter) block, indexed
/// `[patch][filter]`; entries beyond the valid counts are zero.
pub type GemmBlock = [[i8; 2]; 2];

/// Computes the (patch, filter) block of dot products with the packed dual
/// MAC, two terms at a time with a scalar tail for odd column lengths, then
/// adds the bias and requantizes. Bit-identical to the reference inner loop.
pub fn gemm_2x2_packed<M: Monitor>(
    buf: &Im2ColBuffer,
    filters: &WidenedFilters,
    filter_indices: &[usize],
    bias: Option<[i32; 2]>,
    shift: i32,
    mon: &mut M,
) -> Result<GemmBlock> {
    let np = buf.valid_count();
    let nf = filter_indices.len();
    if np == 0 {
        return Err(Error::Configuration("column buffer holds no patches".to_string()));
    }
    if nf == 0 || nf > 2 {
        return Err(Error::Configuration(format!(
            "the block processes 1 or 2 filters, got {nf}"
        )));
    }
    let len = buf.patch_len();
    if filters.filter_len() != len {
        return Err(Error::Dimension(format!(
            "filter length {} does not match column length {len}",
            filters.filter_len()
        )));
    }

    let pairs = len / 2;
    let odd = len % 2 == 1;
    let mut acc = [[0i32; 2]; 2];
    if let Some(b) = bias {
        for row in acc.iter_mut().take(np) {
            for (f, cell) in row.iter_mut().enumerate().take(nf) {
                *cell = b[f];
            }
        }
        mon.add_sub((np * nf) as u64);
    }

    if np == 2 && nf == 2 {
        let even = pairs * 2;
        let c0 = buf.column(0);
        let c1 = buf.column(1);
        let f0 = filters.filter(filter_indices[0]);
        let f1 = filters.filter(filter_indices[1]);
        let (mut a00, mut a01, mut a10, mut a11) =
            (acc[0][0], acc[0][1], acc[1][0], acc[1][1]);
        // Vector-friendly form of walking the four slices two terms at a
        // time with packed_mac; exact integer accumulation makes it
        // bit-identical. Each element is loaded once and feeds both dot
        // products of its row/column of the block.
        for (((&a, &b), &u), &v) in c0[..even].iter().zip(&c1[..even]).zip(&f0[..even]).zip(&f1[..even]) {
            let (a, b, u, v) = (a as i32, b as i32, u as i32, v as i32);
            a00 += a * u;
            a01 += a * v;
            a10 += b * u;
            a11 += b * v;
        }
        // per pair step: 8 element loads feed 8 multiplies (4 packed MACs)
        mon.load(8 * pairs as u64);
        mon.mul(8 * pairs as u64);
        mon.add_sub(8 * pairs as u64);
        if odd {
            let k = len - 1;
            a00 += (c0[k] as i32) * (f0[k] as i32);
            a01 += (c0[k] as i32) * (f1[k] as i32);
            a10 += (c1[k] as i32) * (f0[k] as i32);
            a11 += (c1[k] as i32) * (f1[k] as i32);
            mon.load(4);
            mon.mul(4);
            mon.add_sub(4);
        }
        acc = [[a00, a01], [a10, a11]];
    } else {
        // degenerate 1x2 / 2x1 / 1x1 blocks at sweep tails
        for p in 0..np {
            let col = buf.column(p);
            for f in 0..nf {
                let flt = filters.filter(filter_indices[f]);
                let mut a = acc[p][f];
                for i in 0..pairs {
                    let k = 2 * i;
                    a = packed_mac(a, (col[k], col[k + 1]), (flt[k], flt[k + 1]));
                }
                if odd {
                    let k = len - 1;
                    a += (col[k] as i32) * (flt[k] as i32);
                }
                acc[p][f] = a;
            }
        }
        let per_pair = (2 * np + 2 * nf) as u64;
        mon.load(per_pair * pairs as u64);
        mon.mul((2 * np * nf) as u64 * pairs as u64);
        mon.add_sub((2 * np * nf) as u64 * pairs as u64);
        if odd {
            mon.load((np + nf) as u64);
            mon.mul((np * nf) as u64);
            mon.add_sub((np * nf) as u64);
        }
    }

    let mut out = [[0i8; 2]; 2];
    for p in 0..np {
        for f in 0..nf {
            out[p][f] = requantize(acc[p][f], shift);
        }
    }
    Ok(out)
}

/// Shared driver: im2col + blocked GEMM per group. `positions` walk the
/// output row-major, two at a time.
fn gemm_driver<M: Monitor>(
    x: &QTensor,
    w: &QWeights,
    spec: &LayerSpec,
    groups: usize,
    mon: &mut M,
) -> Result<Vec<i8>> {
    let h = spec.input_width;
    let cy = spec.out_channels;
    let cpg = spec.in_channels / groups;
    let fpg = cy / groups;
    let patch_len = spec.kernel * spec.kernel * cpg;
    let shift = spec.output_shift();
    let radius = spec.radius() as isize;
    let bias = w.bias();

    let mut out = vec![0i8; h * h * cy];
    let mut buf = Im2ColBuffer::with_patch_len(patch_len);
    let mut positions = [(0usize, 0usize); 2];

    for g in 0..groups {
        let widened = WidenedFilters::from_weights(w, g * fpg, fpg, mon);
        let ch_base = g * cpg;
        let mut pos = 0;
        while pos < h * h {
            let np = usize::min(2, h * h - pos);
            for (i, slot) in positions.iter_mut().enumerate().take(np) {
                let p = pos + i;
                *slot = (p / h, p % h);
            }
            fill_patches(&mut buf, x, spec.kernel, radius, ch_base, cpg, &positions[..np], mon);

            let mut f = 0;
            while f < fpg {
                let nf = usize::min(2, fpg - f);
                let block_bias = bias.map(|b| {
                    mon.load(nf as u64);
                    let b0 = b[g * fpg + f];
                    let b1 = if nf == 2 { b[g * fpg + f + 1] } else { 0 };
                    [b0, b1]
                });
                let indices = [f, f + 1];
                let block =
                    gemm_2x2_packed(&buf, &widened, &indices[..nf], block_bias, shift, mon)?;
                for p in 0..np {
                    let (oy, ox) = positions[p];
                    let row = (oy * h + ox) * cy + g * fpg + f;
                    for (dst, v) in out[row..row + nf].iter_mut().zip(block[p].iter()) {
                        *dst = *v;
                    }
                    mon.store(nf as u64);
                }
                f += nf;
            }
            pos += np;
        }
    }
    Ok(out)
}

/// Fast standard convolution (single-group im2col GEMM).
pub fn conv_standard_fast_with<M: Monitor>(
    x: &QTensor,
    w: &QWeights,
    spec: &LayerSpec,
    mon: &mut M,
) -> Result<QTensor> {
    spec.validate()?;
    if spec.kind != PrimitiveKind::Standard {
        return Err(Error::Configuration(format!(
            "conv_standard_fast called with a {} spec",
            spec.kind
        )));
    }
    check_fast_input(x, spec)?;
    check_weights(w, spec.kernel, spec.in_channels, spec.out_channels, spec.dec_weight)?;
    let out = gemm_driver(x, w, spec, 1, mon)?;
    QTensor::new(spec.input_width, spec.input_width, spec.out_channels, spec.dec_output, out)
}

pub fn conv_standard_fast(x: &QTensor, w: &QWeights, spec: &LayerSpec) -> Result<QTensor> {
    conv_standard_fast_with(x, w, spec, &mut NullMonitor)
}

/// Fast grouped convolution: the im2col GEMM applied to each group.
pub fn conv_grouped_fast_with<M: Monitor>(
    x: &QTensor,
    w: &QWeights,
    spec: &LayerSpec,
    mon: &mut M,
) -> Result<QTensor> {
    spec.validate()?;
    if spec.kind != PrimitiveKind::Grouped {
        return Err(Error::Configuration(format!(
            "conv_grouped_fast called with a {} spec",
            spec.kind
        )));
    }
    check_fast_input(x, spec)?;
    check_weights(w, spec.kernel, spec.channels_per_group(), spec.out_channels, spec.dec_weight)?;
    let out = gemm_driver(x, w, spec, spec.groups, mon)?;
    QTensor::new(spec.input_width, spec.input_width, spec.out_channels, spec.dec_output, out)
}

pub fn conv_grouped_fast(x: &QTensor, w: &QWeights, spec: &LayerSpec) -> Result<QTensor> {
    conv_grouped_fast_with(x, w, spec, &mut NullMonitor)
}

/// Fast depthwise separable convolution: per-channel im2col GEMM, then the
/// pointwise stage as a 1x1 single-group GEMM.
pub fn conv_dwsep_fast_with<M: Monitor>(
    x: &QTensor,
    w_dw: &QWeights,
    w_pw: &QWeights,
    spec: &LayerSpec,
    mon: &mut M,
) -> Result<QTensor> {
    spec.validate()?;
    if spec.kind != PrimitiveKind::DepthwiseSeparable {
        return Err(Error::Configuration(format!(
            "conv_dwsep_fast called with a {} spec",
            spec.kind
        )));
    }
    check_fast_input(x, spec)?;
    check_weights(w_dw, spec.kernel, 1, spec.in_channels, spec.dec_weight)?;
    check_weights(w_pw, 1, spec.in_channels, spec.out_channels, spec.pointwise_dec_weight)?;

    let dw_spec = depthwise_stage_spec(spec);
    let dw_out = gemm_driver(x, w_dw, &dw_spec, spec.in_channels, mon)?;
    let intermediate =
        QTensor::new(spec.input_width, spec.input_width, spec.in_channels, spec.dec_output, dw_out)?;
    let pw_spec = pointwise_stage_spec(spec);
    let out = gemm_driver(&intermediate, w_pw, &pw_spec, 1, mon)?;
    QTensor::new(
        spec.input_width,
        spec.input_width,
        spec.out_channels,
        spec.pointwise_dec_output,
        out,
    )
}

pub fn conv_dwsep_fast(
    x: &QTensor,
    w_dw: &QWeights,
    w_pw: &QWeights,
    spec: &LayerSpec,
) -> Result<QTensor> {
    conv_dwsep_fast_with(x, w_dw, w_pw, spec, &mut NullMonitor)
}

/// Fast shift convolution: im2col samples each channel at its displaced
/// coordinate (no intermediate tensor), then the pointwise GEMM.
pub fn conv_shift_fast_with<M: Monitor>(
    x: &QTensor,
    w_pw: &QWeights,
    spec: &LayerSpec,
    mon: &mut M,
) -> Result<QTensor> {
    spec.validate()?;
    if spec.kind != PrimitiveKind::Shift {
        return Err(Error::Configuration(format!(
            "conv_shift_fast called with a {} spec",
            spec.kind
        )));
    }
    check_fast_input(x, spec)?;
    check_weights(w_pw, 1, spec.in_channels, spec.out_channels, spec.dec_weight)?;

    let h = spec.input_width;
    let cy = spec.out_channels;
    let shift = spec.output_shift();
    let bias = w_pw.bias();

    let mut out = vec![0i8; h * h * cy];
    let widened = WidenedFilters::from_weights(w_pw, 0, cy, mon);
    let mut positions = [(0usize, 0usize); 2];
    let mut pos = 0;
    while pos < h * h {
        let np = usize::min(2, h * h - pos);
        for (i, slot) in positions.iter_mut().enumerate().take(np) {
            let p = pos + i;
            *slot = (p / h, p % h);
        }
        let buf = im2col_patches_shifted_with(x, spec, &positions[..np], mon)?;

        let mut f = 0;
        while f < cy {
            let nf = usize::min(2, cy - f);
            let block_bias = bias.map(|b| {
                mon.load(nf as u64);
                [b[f], if nf == 2 { b[f + 1] } else { 0 }]
            });
            let indices = [f, f + 1];
            let block = gemm_2x2_packed(&buf, &widened, &indices[..nf], block_bias, shift, mon)?;
            for p in 0..np {
                let (oy, ox) = positions[p];
                let row = (oy * h + ox) * cy + f;
                for (dst, v) in out[row..row + nf].iter_mut().zip(block[p].iter()) {
                    *dst = *v;
                }
                mon.store(nf as u64);
            }
            f += nf;
        }
        pos += np;
    }
    QTensor::new(h, h, cy, spec.dec_output, out)
}

pub fn conv_shift_fast(x: &QTensor, w_pw: &QWeights, spec: &LayerSpec) -> Result<QTensor> {
    conv_shift_fast_with(x, w_pw, spec, &mut NullMonitor)
}

fn check_fast_input(x: &QTensor, spec: &LayerSpec) -> Result<()> {
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
