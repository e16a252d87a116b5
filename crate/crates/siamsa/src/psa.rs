//! Pairwise scale-channel attention.
//!
//! Both feature sources (correlation result and anchor-proposal features)
//! are first refined by scale-channel self-attention; cross-attention then
//! injects scale cues from the refined correlation features into the
//! refined anchor-proposal features.
//!
//! Queries and keys are built from spatially pooled features, so attention
//! operates purely over the channel-scale plane: a `CS x CS` map whose rows
//! are softmax-normalized. Values keep the spatial extent of their source,
//! which is why cross-attention output inherits the value side's height and
//! width.

use crate::backbone::{ensure_array, ScaledTensor};
use crate::calls::{note_attention, note_psan_block};
use crate::error::{Error, Result};
use crate::tensor::{global_pool, softmax, Matrix, PoolMode, Tensor, CSHW};
use crate::weights::{init_conv, SeededUniform, WeightsBank};

/// Flattened query/key pair over the channel-scale plane, both of length
/// `C * S` in channel-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryKey {
    pub q: Vec<f64>,
    pub k: Vec<f64>,
}

/// Residual weights and the 1-D scale-convolution taps for the query, key,
/// and value projections. Taps are shared across channels; the window is
/// `min(3, S)` with zero padding along the scale axis, and tap `len/2`
/// always sits on the output scale (so a 1 there is the identity).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub gamma_self_corr: f64,
    pub gamma_self_apn: f64,
    pub gamma_cross: f64,
    pub q_taps: Vec<f64>,
    pub k_taps: Vec<f64>,
    pub v_taps: Vec<f64>,
}

pub const DEFAULT_GAMMA: f64 = 0.1;

impl AttentionWeights {
    /// Window length for a stack with `scales` scale slices.
    pub fn window(scales: usize) -> usize {
        scales.min(3)
    }

    /// Identity projections (center tap 1) with uniform residual weight
    /// `gamma`; the configuration used by closed-form tests.
    pub fn identity(scales: usize, gamma: f64) -> Self {
        let m = Self::window(scales);
        let mut taps = vec![0.0; m];
        taps[m / 2] = 1.0;
        AttentionWeights {
            gamma_self_corr: gamma,
            gamma_self_apn: gamma,
            gamma_cross: gamma,
            q_taps: taps.clone(),
            k_taps: taps.clone(),
            v_taps: taps,
        }
    }

    /// Registers projection taps and residual weights in `bank`, drawing
    /// fresh values for anything absent.
    pub fn build(scales: usize, bank: &mut WeightsBank, rng: &mut SeededUniform) -> Result<Self> {
        let m = Self::window(scales);
        ensure_array(bank, "psa.query.taps", &[m], || init_conv(rng, m, m))?;
        ensure_array(bank, "psa.key.taps", &[m], || init_conv(rng, m, m))?;
        ensure_array(bank, "psa.value.taps", &[m], || init_conv(rng, m, m))?;
        ensure_array(bank, "psa.gamma_self_corr", &[1], || vec![DEFAULT_GAMMA])?;
        ensure_array(bank, "psa.gamma_self_apn", &[1], || vec![DEFAULT_GAMMA])?;
        ensure_array(bank, "psa.gamma_cross", &[1], || vec![DEFAULT_GAMMA])?;
        Ok(AttentionWeights {
            gamma_self_corr: bank.take("psa.gamma_self_corr", &[1])?[0],
            gamma_self_apn: bank.take("psa.gamma_self_apn", &[1])?[0],
            gamma_cross: bank.take("psa.gamma_cross", &[1])?[0],
            q_taps: bank.take("psa.query.taps", &[m])?,
            k_taps: bank.take("psa.key.taps", &[m])?,
            v_taps: bank.take("psa.value.taps", &[m])?,
        })
    }

    fn check_window(&self, scales: usize) -> Result<()> {
        let m = Self::window(scales);
        if self.q_taps.len() != m || self.k_taps.len() != m || self.v_taps.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "projection taps sized {}/{}/{} for a window of {m}",
                self.q_taps.len(),
                self.k_taps.len(),
                self.v_taps.len()
            )));
        }
        Ok(())
    }
}

/// 1-D convolution along the scale axis of a pooled `channel x scale`
/// tensor; same padding, taps shared across channels.
fn scale_conv_pooled(pooled: &Tensor, taps: &[f64]) -> Vec<f64> {
    let (c, s) = (pooled.shape()[0], pooled.shape()[1]);
    let off = taps.len() / 2;
    let mut out = vec![0.0; c * s];
    for ci in 0..c {
        for si in 0..s {
            let mut acc = 0.0;
            for (d, &t) in taps.iter().enumerate() {
                let sj = si as isize + d as isize - off as isize;
                if sj < 0 || sj >= s as isize {
                    continue;
                }
                acc += t * pooled.data()[ci * s + sj as usize];
            }
            out[ci * s + si] = acc;
        }
    }
    out
}

/// Same convolution applied across the scale axis of a full 4-axis stack,
/// flattened to a `(C*S) x (H*W)` value matrix.
fn scale_conv_value(x: &ScaledTensor, taps: &[f64]) -> Matrix {
    let (c, s) = (x.channels(), x.scales());
    let (h, w) = x.spatial();
    let off = taps.len() / 2;
    let mut out = Matrix::zeros(c * s, h * w);
    for ci in 0..c {
        for si in 0..s {
            let row = ci * s + si;
            for y in 0..h {
                for xx in 0..w {
                    let mut acc = 0.0;
                    for (d, &t) in taps.iter().enumerate() {
                        let sj = si as isize + d as isize - off as isize;
                        if sj < 0 || sj >= s as isize {
                            continue;
                        }
                        acc += t * x.data.at4(ci, sj as usize, y, xx);
                    }
                    out.set(row, y * w + xx, acc);
                }
            }
        }
    }
    out
}

/// Row-softmaxed outer product of the query and key vectors: the `CS x CS`
/// attention map shared by self- and cross-attention.
pub fn attention_map(qk: &QueryKey) -> Result<Matrix> {
    if qk.q.len() != qk.k.len() {
        return Err(Error::ShapeMismatch(format!(
            "query length {} vs key length {}",
            qk.q.len(),
            qk.k.len()
        )));
    }
    let n = qk.q.len();
    let mut scores = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            scores.set(i, j, qk.q[i] * qk.k[j]);
        }
    }
    Ok(softmax(&scores))
}

/// Builds the query from average-pooled features and the key from
/// max-pooled features, each passed through its 1-D scale convolution and
/// flattened channel-major.
pub fn make_query_key(x: &ScaledTensor, w: &AttentionWeights) -> Result<QueryKey> {
    w.check_window(x.scales())?;
    let gap = global_pool(&x.data, PoolMode::Avg)?;
    let gmp = global_pool(&x.data, PoolMode::Max)?;
    Ok(QueryKey {
        q: scale_conv_pooled(&gap, &w.q_taps),
        k: scale_conv_pooled(&gmp, &w.k_taps),
    })
}

fn matrix_to_stack(m: &Matrix, like: &ScaledTensor) -> Result<ScaledTensor> {
    let (c, s) = (like.channels(), like.scales());
    let (h, w) = like.spatial();
    if m.rows != c * s || m.cols != h * w {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} attention output cannot reshape to {c}x{s}x{h}x{w}",
            m.rows, m.cols
        )));
    }
    let data = Tensor::new(&CSHW, &[c, s, h, w], m.data.clone())?;
    ScaledTensor::new(data, like.scale_dilations.clone())
}

/// Scale-channel self-attention with residual weight `gamma`:
/// `x + gamma * reshape(softmax(Q K^T) V)`. With `gamma == 0` the input
/// passes through bit-identically.
pub fn sc_self_attention(
    x: &ScaledTensor,
    w: &AttentionWeights,
    gamma: f64,
) -> Result<ScaledTensor> {
    note_attention();
    if gamma == 0.0 {
        return Ok(x.clone());
    }
    let qk = make_query_key(x, w)?;
    let attn = attention_map(&qk)?;
    let value = scale_conv_value(x, &w.v_taps);
    let refined = attn.matmul(&value)?;
    let refined = matrix_to_stack(&refined, x)?;
    let data = x.data.add_scaled(&refined.data, gamma)?;
    ScaledTensor::new(data, x.scale_dilations.clone())
}

/// Scale-channel cross-attention: queries and keys from `x_corr`, values
/// from `x_apn`, residual added on the value side. Output keeps `x_apn`'s
/// spatial extent.
pub fn sc_cross_attention(
    x_corr: &ScaledTensor,
    x_apn: &ScaledTensor,
    w: &AttentionWeights,
) -> Result<ScaledTensor> {
    note_attention();
    if x_corr.channels() != x_apn.channels() || x_corr.scales() != x_apn.scales() {
        return Err(Error::ShapeMismatch(format!(
            "cross-attention inputs disagree: {}x{} vs {}x{} (channels x scales)",
            x_corr.channels(),
            x_corr.scales(),
            x_apn.channels(),
            x_apn.scales()
        )));
    }
    if w.gamma_cross == 0.0 {
        return Ok(x_apn.clone());
    }
    let qk = make_query_key(x_corr, w)?;
    let attn = attention_map(&qk)?;
    let value = scale_conv_value(x_apn, &w.v_taps);
    let refined = attn.matmul(&value)?;
    let refined = matrix_to_stack(&refined, x_apn)?;
    let data = x_apn.data.add_scaled(&refined.data, w.gamma_cross)?;
    ScaledTensor::new(data, x_apn.scale_dilations.clone())
}

/// The full pairwise block: self-attention on both sources, then
/// cross-attention from the refined correlation features into the refined
/// anchor-proposal features.
pub fn psan_forward(
    r_corr: &ScaledTensor,
    f_apn: &ScaledTensor,
    w: &AttentionWeights,
) -> Result<ScaledTensor> {
    note_psan_block();
    let self_corr = sc_self_attention(r_corr, w, w.gamma_self_corr)?;
    let self_apn = sc_self_attention(f_apn, w, w.gamma_self_apn)?;
    sc_cross_attention(&self_corr, &self_apn, w)
}
