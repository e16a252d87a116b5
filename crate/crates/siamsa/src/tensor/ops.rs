use super::{Matrix, Tensor, CHW, CS, CSHW};
use crate::error::{Error, Result};

/// 2-D convolution kernel bank with square odd taps and integer dilation.
///
/// Weights are laid out `[out_channel][in_channel][kh][kw]`. Following the
/// deep-learning convention the kernel is applied without flipping
/// (cross-correlation style).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kh: usize,
    pub kw: usize,
    pub dilation: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvKernel {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kh: usize,
        kw: usize,
        dilation: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "kernel extent must be odd, got {kh}x{kw}"
            )));
        }
        if dilation == 0 {
            return Err(Error::InvalidArgument("dilation must be >= 1".into()));
        }
        if weights.len() != out_channels * in_channels * kh * kw {
            return Err(Error::ShapeMismatch(format!(
                "kernel {out_channels}x{in_channels}x{kh}x{kw} needs {} weights, got {}",
                out_channels * in_channels * kh * kw,
                weights.len()
            )));
        }
        if bias.len() != out_channels {
            return Err(Error::ShapeMismatch(format!(
                "kernel with {out_channels} output channels needs {out_channels} biases, got {}",
                bias.len()
            )));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Invariant("non-finite kernel parameter".into()));
        }
        Ok(ConvKernel {
            out_channels,
            in_channels,
            kh,
            kw,
            dilation,
            weights,
            bias,
        })
    }

    /// Same kernel weights applied with a different dilation.
    pub fn with_dilation(&self, dilation: usize) -> ConvKernel {
        ConvKernel {
            dilation,
            ..self.clone()
        }
    }

    /// Spatial extent actually covered by the dilated taps.
    pub fn effective_extent(&self) -> (usize, usize) {
        (
            (self.kh - 1) * self.dilation + 1,
            (self.kw - 1) * self.dilation + 1,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding so the output keeps the input's height and width.
    Same,
    /// No padding; output shrinks by the effective kernel extent minus one.
    Valid,
}

/// Dilated 2-D convolution of a `channel x height x width` tensor.
///
/// Accumulation order is fixed (input channel, then kernel row, then kernel
/// column) with the bias added last, so results are reproducible bit for bit.
pub fn conv2d(x: &Tensor, k: &ConvKernel, padding: Padding) -> Result<Tensor> {
    x.expect_axes(&CHW)?;
    let (c_in, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    if c_in != k.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "input has {c_in} channels, kernel expects {}",
            k.in_channels
        )));
    }
    let (eh, ew) = k.effective_extent();
    let (out_h, out_w, pad_h, pad_w) = match padding {
        Padding::Same => (h, w, (eh - 1) / 2, (ew - 1) / 2),
        Padding::Valid => {
            if h < eh || w < ew {
                return Err(Error::ShapeMismatch(format!(
                    "valid convolution of {h}x{w} input with effective {eh}x{ew} kernel \
                     yields an empty output"
                )));
            }
            (h - eh + 1, w - ew + 1, 0, 0)
        }
    };
    let d = k.dilation;
    let mut out = Tensor::zeros(&CHW, &[k.out_channels, out_h, out_w]);
    let xdata = x.data();
    // Row-sliced accumulation. For every output element the contributions
    // still arrive in (in-channel, kernel row, kernel column) order with the
    // bias added last, so the result is bit-identical to the naive loop.
    for oc in 0..k.out_channels {
        for oy in 0..out_h {
            let orow_start = (oc * out_h + oy) * out_w;
            for ic in 0..c_in {
                for u in 0..k.kh {
                    let iy = oy as isize + (u * d) as isize - pad_h as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let xrow = &xdata[(ic * h + iy as usize) * w..][..w];
                    let krow = &k.weights[((oc * c_in + ic) * k.kh + u) * k.kw..][..k.kw];
                    for (v, &kv) in krow.iter().enumerate() {
                        // Valid output columns: 0 <= ox + v*d - pad_w < w.
                        let shift = (v * d) as isize - pad_w as isize;
                        let lo = (-shift).max(0) as usize;
                        let hi = ((w as isize - shift).min(out_w as isize)).max(0) as usize;
                        let orow = &mut out.data_mut()[orow_start + lo..orow_start + hi];
                        let xseg = &xrow[(lo as isize + shift) as usize..][..hi - lo];
                        for (o, &xv) in orow.iter_mut().zip(xseg) {
                            *o += xv * kv;
                        }
                    }
                }
            }
            let bias = k.bias[oc];
            for o in &mut out.data_mut()[orow_start..orow_start + out_w] {
                *o += bias;
            }
        }
    }
    out.check_finite()?;
    Ok(out)
}

/// Per-channel valid sliding inner product of `search` against `template`.
///
/// Channel `c` of the output correlates channel `c` of both inputs; no
/// channel mixing happens.
pub fn depthwise_xcorr(search: &Tensor, template: &Tensor) -> Result<Tensor> {
    search.expect_axes(&CHW)?;
    template.expect_axes(&CHW)?;
    let (c, sh, sw) = (search.shape()[0], search.shape()[1], search.shape()[2]);
    let (ct, th, tw) = (
        template.shape()[0],
        template.shape()[1],
        template.shape()[2],
    );
    if c != ct {
        return Err(Error::ShapeMismatch(format!(
            "search has {c} channels, template has {ct}"
        )));
    }
    if th > sh || tw > sw {
        return Err(Error::ShapeMismatch(format!(
            "template {th}x{tw} larger than search {sh}x{sw}"
        )));
    }
    let (out_h, out_w) = (sh - th + 1, sw - tw + 1);
    let mut out = Tensor::zeros(&CHW, &[c, out_h, out_w]);
    let sdata = search.data();
    let tdata = template.data();
    for ch in 0..c {
        for oy in 0..out_h {
            let orow_start = (ch * out_h + oy) * out_w;
            for u in 0..th {
                let srow = &sdata[(ch * sh + oy + u) * sw..][..sw];
                let trow = &tdata[(ch * th + u) * tw..][..tw];
                for (v, &tv) in trow.iter().enumerate() {
                    let orow = &mut out.data_mut()[orow_start..orow_start + out_w];
                    let sseg = &srow[v..v + out_w];
                    for (o, &sv) in orow.iter_mut().zip(sseg) {
                        *o += sv * tv;
                    }
                }
            }
        }
    }
    out.check_finite()?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    Avg,
    Max,
}

/// Pools a `channel x scale x height x width` tensor over its spatial axes,
/// keeping channel and scale.
pub fn global_pool(x: &Tensor, mode: PoolMode) -> Result<Tensor> {
    x.expect_axes(&CSHW)?;
    let (c, s, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    if h == 0 || w == 0 {
        return Err(Error::InvalidArgument(
            "global_pool over an empty spatial extent".into(),
        ));
    }
    let mut out = Tensor::zeros(&CS, &[c, s]);
    for ci in 0..c {
        for si in 0..s {
            let pooled = match mode {
                PoolMode::Avg => {
                    let mut sum = 0.0;
                    for y in 0..h {
                        for xx in 0..w {
                            sum += x.at4(ci, si, y, xx);
                        }
                    }
                    sum / (h * w) as f64
                }
                PoolMode::Max => {
                    let mut best = f64::NEG_INFINITY;
                    for y in 0..h {
                        for xx in 0..w {
                            best = best.max(x.at4(ci, si, y, xx));
                        }
                    }
                    best
                }
            };
            out.data_mut()[ci * s + si] = pooled;
        }
    }
    Ok(out)
}

/// Numerically safe softmax along the last axis of a matrix. Each row's
/// maximum is subtracted before exponentiation so large scores cannot
/// overflow.
pub fn softmax(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(m.rows, m.cols);
    for r in 0..m.rows {
        let row = &m.data[r * m.cols..(r + 1) * m.cols];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let out_row = &mut out.data[r * m.cols..(r + 1) * m.cols];
        for (o, &v) in out_row.iter_mut().zip(row) {
            *o = (v - max).exp();
            sum += *o;
        }
        for o in out_row.iter_mut() {
            *o /= sum;
        }
    }
    out
}

/// Softmax over the rows of a flat buffer; convenience wrapper used by the
/// classification head.
pub fn softmax_rows(rows: usize, cols: usize, data: &[f64]) -> Result<Matrix> {
    Ok(softmax(&Matrix::new(rows, cols, data.to_vec())?))
}
