//! Feature extraction and the scale dimension: the 5-layer convolutional
//! stack, lifting plain features into scale stacks, scale-equivariant
//! convolution, and per-scale depthwise correlation.

use crate::error::{Error, Result};
use crate::tensor::{conv2d, depthwise_xcorr, ConvKernel, Padding, Tensor, CHW, CSHW};
use crate::weights::{init_conv, SeededUniform, WeightsBank};

/// Feature volume with an explicit scale axis. `scale_dilations[s]` records
/// the integer kernel dilation that realizes scale index `s`; index 0 is
/// always the identity scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledTensor {
    pub data: Tensor,
    pub scale_dilations: Vec<usize>,
}

impl ScaledTensor {
    pub fn new(data: Tensor, scale_dilations: Vec<usize>) -> Result<Self> {
        data.expect_axes(&CSHW)?;
        let s = data.shape()[1];
        if scale_dilations.len() != s {
            return Err(Error::ShapeMismatch(format!(
                "{s} scale slices but {} dilations",
                scale_dilations.len()
            )));
        }
        if scale_dilations.first() != Some(&1) {
            return Err(Error::InvalidArgument(
                "scale dilation list must start at 1".into(),
            ));
        }
        if !scale_dilations.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "scale dilations must be strictly increasing".into(),
            ));
        }
        Ok(ScaledTensor {
            data,
            scale_dilations,
        })
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn scales(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn spatial(&self) -> (usize, usize) {
        (self.data.shape()[2], self.data.shape()[3])
    }

    /// Extracts scale slice `s` as a plain `channel x height x width` tensor.
    pub fn slice(&self, s: usize) -> Tensor {
        let (c, _, h, w) = (
            self.data.shape()[0],
            self.data.shape()[1],
            self.data.shape()[2],
            self.data.shape()[3],
        );
        Tensor::from_fn(&CHW, &[c, h, w], |i| self.data.at4(i[0], s, i[1], i[2]))
    }

    /// Builds a stack from per-scale slices; all slices must agree in shape.
    pub fn from_slices(slices: &[Tensor], scale_dilations: Vec<usize>) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::InvalidArgument("empty scale stack".into()));
        }
        let (c, h, w) = (
            slices[0].shape()[0],
            slices[0].shape()[1],
            slices[0].shape()[2],
        );
        for sl in slices {
            sl.expect_axes(&CHW)?;
            if sl.shape() != [c, h, w] {
                return Err(Error::ShapeMismatch(format!(
                    "scale slice shape {:?} differs from {:?}",
                    sl.shape(),
                    [c, h, w]
                )));
            }
        }
        let s = slices.len();
        let mut out = Tensor::zeros(&CSHW, &[c, s, h, w]);
        for (si, sl) in slices.iter().enumerate() {
            for ci in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        out.set4(ci, si, y, x, sl.at3(ci, y, x));
                    }
                }
            }
        }
        ScaledTensor::new(out, scale_dilations)
    }

    /// Collapses the scale axis by taking the per-position maximum.
    pub fn max_over_scale(&self) -> Tensor {
        let (c, s, h, w) = (
            self.data.shape()[0],
            self.data.shape()[1],
            self.data.shape()[2],
            self.data.shape()[3],
        );
        Tensor::from_fn(&CHW, &[c, h, w], |i| {
            (0..s)
                .map(|si| self.data.at4(i[0], si, i[1], i[2]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
    }

    /// Center-crops the spatial extent to `(h, w)`; both must not exceed the
    /// current extent.
    pub fn center_crop(&self, h: usize, w: usize) -> Result<ScaledTensor> {
        let (ch, s) = (self.channels(), self.scales());
        let (h0, w0) = self.spatial();
        if h > h0 || w > w0 {
            return Err(Error::ShapeMismatch(format!(
                "cannot crop {h0}x{w0} up to {h}x{w}"
            )));
        }
        let (oy, ox) = ((h0 - h) / 2, (w0 - w) / 2);
        let data = Tensor::from_fn(&CSHW, &[ch, s, h, w], |i| {
            self.data.at4(i[0], i[1], i[2] + oy, i[3] + ox)
        });
        ScaledTensor::new(data, self.scale_dilations.clone())
    }
}

/// Configuration of the 5-layer stand-in backbone. All layers use 3x3
/// kernels; features are tapped after layers 4 and 5.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneConfig {
    pub channels: [usize; 5],
    pub strides: [usize; 5],
    pub rng_seed: u64,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig {
            channels: [8, 16, 24, 32, 32],
            strides: [2, 2, 2, 1, 1],
            rng_seed: 0,
        }
    }
}

pub const BACKBONE_KERNEL: usize = 3;

impl BackboneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels.contains(&0) {
            return Err(Error::InvalidArgument("zero-channel backbone layer".into()));
        }
        if self.strides.contains(&0) {
            return Err(Error::InvalidArgument("zero-stride backbone layer".into()));
        }
        Ok(())
    }

    /// Spatial extent after each layer for a square input of side `input`,
    /// or an error if some layer underflows.
    pub fn layer_extents(&self, input: usize) -> Result<[usize; 5]> {
        let mut e = input;
        let mut out = [0usize; 5];
        for (i, (&_c, &s)) in self.channels.iter().zip(&self.strides).enumerate() {
            if e < BACKBONE_KERNEL {
                return Err(Error::ShapeMismatch(format!(
                    "input {input} exhausted at backbone layer {}",
                    i + 1
                )));
            }
            e = (e - BACKBONE_KERNEL) / s + 1;
            out[i] = e;
        }
        Ok(out)
    }

    /// Product of the layer strides: how many input pixels one feature cell
    /// spans.
    pub fn total_stride(&self) -> usize {
        self.strides.iter().product()
    }
}

/// The 5-layer convolutional stack with immutable weights.
#[derive(Debug, Clone)]
pub struct Backbone {
    pub config: BackboneConfig,
    layers: Vec<ConvKernel>,
}

/// Features tapped from the last two backbone layers.
#[derive(Debug, Clone, PartialEq)]
pub struct TapFeatures {
    pub phi4: Tensor,
    pub phi5: Tensor,
}

impl Backbone {
    /// Registers the layer arrays into `bank`, drawing fresh values from
    /// `rng` for any array the bank does not already carry.
    pub fn build(
        cfg: &BackboneConfig,
        bank: &mut WeightsBank,
        rng: &mut SeededUniform,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut layers = Vec::with_capacity(5);
        let mut in_c = 3usize;
        for (i, &out_c) in cfg.channels.iter().enumerate() {
            let wname = format!("backbone.layer{}.weight", i + 1);
            let bname = format!("backbone.layer{}.bias", i + 1);
            let wcount = out_c * in_c * BACKBONE_KERNEL * BACKBONE_KERNEL;
            let fan_in = in_c * BACKBONE_KERNEL * BACKBONE_KERNEL;
            ensure_array(
                bank,
                &wname,
                &[out_c, in_c, BACKBONE_KERNEL, BACKBONE_KERNEL],
                || init_conv(rng, wcount, fan_in),
            )?;
            ensure_array(bank, &bname, &[out_c], || vec![0.0; out_c])?;
            let weights = bank.take(&wname, &[out_c, in_c, BACKBONE_KERNEL, BACKBONE_KERNEL])?;
            let bias = bank.take(&bname, &[out_c])?;
            layers.push(ConvKernel::new(
                out_c,
                in_c,
                BACKBONE_KERNEL,
                BACKBONE_KERNEL,
                1,
                weights,
                bias,
            )?);
            in_c = out_c;
        }
        Ok(Backbone {
            config: cfg.clone(),
            layers,
        })
    }

    /// Runs the stack on a `3 x P x P` image patch and returns the layer-4
    /// and layer-5 feature maps. ReLU follows layers 1-3; the tapped layers
    /// stay linear so correlation sees signed responses.
    pub fn forward(&self, patch: &Tensor) -> Result<TapFeatures> {
        patch.expect_axes(&CHW)?;
        if patch.shape()[0] != 3 {
            return Err(Error::ShapeMismatch(format!(
                "backbone expects 3 input channels, got {}",
                patch.shape()[0]
            )));
        }
        if patch.shape()[1] != patch.shape()[2] {
            return Err(Error::ShapeMismatch(format!(
                "backbone expects square patches, got {}x{}",
                patch.shape()[1],
                patch.shape()[2]
            )));
        }
        self.config.layer_extents(patch.shape()[1])?;
        let mut x = patch.clone();
        let mut phi4 = None;
        for (i, layer) in self.layers.iter().enumerate() {
            x = conv2d(&x, layer, Padding::Valid)?;
            if self.config.strides[i] > 1 {
                x = subsample(&x, self.config.strides[i]);
            }
            if i < 3 {
                x = x.map(|v| v.max(0.0));
            }
            if i == 3 {
                phi4 = Some(x.clone());
            }
        }
        Ok(TapFeatures {
            phi4: phi4.expect("five layers always pass the fourth"),
            phi5: x,
        })
    }
}

pub(crate) fn ensure_array(
    bank: &mut WeightsBank,
    name: &str,
    shape: &[usize],
    make: impl FnOnce() -> Vec<f64>,
) -> Result<()> {
    if bank.get(name).is_err() {
        bank.insert(name, shape, make())?;
    }
    Ok(())
}

/// Keeps every `stride`-th row and column starting at the origin. A stride-1
/// convolution followed by this equals a strided convolution.
fn subsample(x: &Tensor, stride: usize) -> Tensor {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (oh, ow) = (h.div_ceil(stride), w.div_ceil(stride));
    Tensor::from_fn(&CHW, &[c, oh, ow], |i| {
        x.at3(i[0], i[1] * stride, i[2] * stride)
    })
}

/// Normalized 3x3 binomial smoothing taps, the fixed kernel used to create
/// scale slices.
const BINOMIAL: [f64; 9] = [
    1.0 / 16.0,
    2.0 / 16.0,
    1.0 / 16.0,
    2.0 / 16.0,
    4.0 / 16.0,
    2.0 / 16.0,
    1.0 / 16.0,
    2.0 / 16.0,
    1.0 / 16.0,
];

/// Smooths every channel with the dilated binomial kernel under
/// edge-replicate padding, preserving the spatial extent. Replicate padding
/// keeps constant inputs constant, which zero padding would not.
pub fn smooth_channels(f: &Tensor, dilation: usize) -> Result<Tensor> {
    f.expect_axes(&CHW)?;
    let (c, h, w) = (f.shape()[0], f.shape()[1], f.shape()[2]);
    let d = dilation as isize;
    let mut out = Tensor::zeros(&CHW, &[c, h, w]);
    for ci in 0..c {
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for u in 0..3isize {
                    let iy = (y as isize + (u - 1) * d).clamp(0, h as isize - 1);
                    for v in 0..3isize {
                        let ix = (x as isize + (v - 1) * d).clamp(0, w as isize - 1);
                        acc += f.at3(ci, iy as usize, ix as usize) * BINOMIAL[(u * 3 + v) as usize];
                    }
                }
                out.set3(ci, y, x, acc);
            }
        }
    }
    Ok(out)
}

/// Lifts a plain feature map into a scale stack: slice 0 is the input
/// itself, slice `s` is the input smoothed at dilation `scales[s]`.
pub fn lift_to_scale_stack(f: &Tensor, scales: &[usize]) -> Result<ScaledTensor> {
    f.expect_axes(&CHW)?;
    if scales.is_empty() {
        return Err(Error::InvalidArgument("empty scale list".into()));
    }
    let mut slices = Vec::with_capacity(scales.len());
    for (i, &d) in scales.iter().enumerate() {
        if i == 0 {
            if d != 1 {
                return Err(Error::InvalidArgument(
                    "scale list must start with dilation 1".into(),
                ));
            }
            slices.push(f.clone());
        } else {
            slices.push(smooth_channels(f, d)?);
        }
    }
    ScaledTensor::from_slices(&slices, scales.to_vec())
}

/// Scale-equivariant convolution: output scale `s` applies the base kernel
/// dilated by `scale_dilations[s]`, summing contributions from the
/// `inter_scale` window of input scales centred on `s` (truncated at the
/// stack boundaries). Spatial padding is `same` so every slice keeps its
/// extent.
pub fn se_conv(x: &ScaledTensor, base: &ConvKernel, inter_scale: usize) -> Result<ScaledTensor> {
    if inter_scale % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "inter_scale window must be odd, got {inter_scale}"
        )));
    }
    let s = x.scales();
    if inter_scale > s {
        return Err(Error::InvalidArgument(format!(
            "inter_scale {inter_scale} exceeds scale count {s}"
        )));
    }
    if x.channels() != base.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "scale stack has {} channels, kernel expects {}",
            x.channels(),
            base.in_channels
        )));
    }
    let half = (inter_scale - 1) / 2;
    let (h, w) = x.spatial();
    let mut out_slices = Vec::with_capacity(s);
    for si in 0..s {
        let dilated = base.with_dilation(x.scale_dilations[si]);
        let no_bias = ConvKernel {
            bias: vec![0.0; dilated.out_channels],
            ..dilated.clone()
        };
        let mut acc = Tensor::zeros(&CHW, &[base.out_channels, h, w]);
        let lo = si.saturating_sub(half);
        let hi = (si + half).min(s - 1);
        for sj in lo..=hi {
            let slice = x.slice(sj);
            let contrib = if sj == si {
                // Bias is charged exactly once, on the centre scale, so the
                // single-window case is bit-identical to plain conv2d.
                conv2d(&slice, &dilated, Padding::Same)?
            } else {
                conv2d(&slice, &no_bias, Padding::Same)?
            };
            acc = acc.add_scaled(&contrib, 1.0)?;
        }
        out_slices.push(acc);
    }
    ScaledTensor::from_slices(&out_slices, x.scale_dilations.clone())
}

/// Depthwise correlation carried out independently on every scale slice.
pub fn se_dw_xcorr(search: &ScaledTensor, template: &ScaledTensor) -> Result<ScaledTensor> {
    if search.channels() != template.channels() {
        return Err(Error::ShapeMismatch(format!(
            "channel mismatch {} vs {}",
            search.channels(),
            template.channels()
        )));
    }
    if search.scales() != template.scales() || search.scale_dilations != template.scale_dilations {
        return Err(Error::ShapeMismatch(format!(
            "scale mismatch {:?} vs {:?}",
            search.scale_dilations, template.scale_dilations
        )));
    }
    let s = search.scales();
    let mut slices = Vec::with_capacity(s);
    for si in 0..s {
        slices.push(depthwise_xcorr(&search.slice(si), &template.slice(si))?);
    }
    ScaledTensor::from_slices(&slices, search.scale_dilations.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::test_rng;

    fn random_stack(
        rng: &mut crate::weights::SeededUniform,
        c: usize,
        scales: &[usize],
        h: usize,
        w: usize,
    ) -> ScaledTensor {
        let data = Tensor::from_fn(&CSHW, &[c, scales.len(), h, w], |_| {
            rng.next_uniform(-1.0, 1.0)
        });
        ScaledTensor::new(data, scales.to_vec()).unwrap()
    }

    #[test]
    fn backbone_extents_match_stride_arithmetic() {
        // Hand-derived before building: 3x3 valid conv then stride-s
        // subsampling gives (e - 3)/s + 1 per layer.
        let cfg = BackboneConfig::default();
        assert_eq!(cfg.layer_extents(127).unwrap(), [63, 31, 15, 13, 11]);
        assert_eq!(cfg.layer_extents(287).unwrap(), [143, 71, 35, 33, 31]);
        assert_eq!(cfg.total_stride(), 8);
    }

    #[test]
    fn backbone_forward_shapes_and_determinism() {
        let cfg = BackboneConfig::default();
        let build = || {
            let mut bank = WeightsBank::new();
            let mut rng = SeededUniform::new(cfg.rng_seed);
            Backbone::build(&cfg, &mut bank, &mut rng).unwrap()
        };
        let bb1 = build();
        let bb2 = build();
        let mut rng = test_rng(1);
        let img = Tensor::from_fn(&CHW, &[3, 127, 127], |_| rng.next_uniform(0.0, 1.0));
        let f1 = bb1.forward(&img).unwrap();
        let f2 = bb2.forward(&img).unwrap();
        assert_eq!(f1.phi4.shape(), &[32, 13, 13]);
        assert_eq!(f1.phi5.shape(), &[32, 11, 11]);
        assert_eq!(f1, f2, "same seed and input must be bit-identical");
    }

    #[test]
    fn backbone_zero_image_zero_bias_gives_zero_features() {
        let cfg = BackboneConfig::default();
        let mut bank = WeightsBank::new();
        let mut rng = SeededUniform::new(5);
        let bb = Backbone::build(&cfg, &mut bank, &mut rng).unwrap();
        let img = Tensor::zeros(&CHW, &[3, 127, 127]);
        let f = bb.forward(&img).unwrap();
        assert!(f.phi4.data().iter().all(|&v| v == 0.0));
        assert!(f.phi5.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backbone_rejects_wrong_patch_size() {
        let cfg = BackboneConfig::default();
        let mut bank = WeightsBank::new();
        let mut rng = SeededUniform::new(5);
        let bb = Backbone::build(&cfg, &mut bank, &mut rng).unwrap();
        let img = Tensor::zeros(&CHW, &[3, 4, 4]);
        assert!(bb.forward(&img).is_err());
    }

    #[test]
    fn lift_degenerate_scale_list_is_identity() {
        let mut rng = test_rng(2);
        let f = Tensor::from_fn(&CHW, &[2, 4, 4], |_| rng.next_uniform(-1.0, 1.0));
        let st = lift_to_scale_stack(&f, &[1]).unwrap();
        assert_eq!(st.scales(), 1);
        assert_eq!(st.slice(0), f);
    }

    #[test]
    fn lift_slice_zero_is_bit_identical_to_input() {
        let mut rng = test_rng(3);
        let f = Tensor::from_fn(&CHW, &[3, 6, 6], |_| rng.next_uniform(-2.0, 2.0));
        let st = lift_to_scale_stack(&f, &[1, 2, 3]).unwrap();
        assert_eq!(st.slice(0), f);
    }

    #[test]
    fn lift_constant_input_stays_constant() {
        let f = Tensor::filled(&CHW, &[2, 5, 5], 1.75);
        let st = lift_to_scale_stack(&f, &[1, 2, 3]).unwrap();
        for v in st.data.data() {
            assert!((v - 1.75).abs() < 1e-12);
        }
    }

    #[test]
    fn lift_slices_match_explicit_pad_plus_valid_conv() {
        // Oracle: replicate-pad by hand, then run the plain valid conv with a
        // per-channel diagonal kernel. Must agree exactly.
        let mut rng = test_rng(4);
        let (c, h, w) = (2, 6, 5);
        let f = Tensor::from_fn(&CHW, &[c, h, w], |_| rng.next_uniform(-1.0, 1.0));
        let scales = [1usize, 2, 3];
        let st = lift_to_scale_stack(&f, &scales).unwrap();
        for (si, &d) in scales.iter().enumerate().skip(1) {
            let pad = d;
            let padded = Tensor::from_fn(&CHW, &[c, h + 2 * pad, w + 2 * pad], |i| {
                let y = (i[1] as isize - pad as isize).clamp(0, h as isize - 1) as usize;
                let x = (i[2] as isize - pad as isize).clamp(0, w as isize - 1) as usize;
                f.at3(i[0], y, x)
            });
            let mut kweights = vec![0.0; c * c * 9];
            for ci in 0..c {
                for t in 0..9 {
                    kweights[(ci * c + ci) * 9 + t] = BINOMIAL[t];
                }
            }
            let k = ConvKernel::new(c, c, 3, 3, d, kweights, vec![0.0; c]).unwrap();
            let oracle = conv2d(&padded, &k, Padding::Valid).unwrap();
            assert_eq!(oracle.shape(), &[c, h, w]);
            let got = st.slice(si);
            for i in 0..got.data().len() {
                assert!(
                    (got.data()[i] - oracle.data()[i]).abs() <= 1e-12,
                    "slice {si} differs at {i}"
                );
            }
        }
    }

    #[test]
    fn se_conv_single_scale_reduces_to_conv2d() {
        let mut rng = test_rng(5);
        let f = Tensor::from_fn(&CHW, &[2, 5, 5], |_| rng.next_uniform(-1.0, 1.0));
        let st = lift_to_scale_stack(&f, &[1]).unwrap();
        let k = ConvKernel::new(
            3,
            2,
            3,
            3,
            1,
            (0..54).map(|_| rng.next_uniform(-0.5, 0.5)).collect(),
            vec![0.1, -0.2, 0.3],
        )
        .unwrap();
        let out = se_conv(&st, &k, 1).unwrap();
        let plain = conv2d(&f, &k, Padding::Same).unwrap();
        assert_eq!(out.slice(0), plain, "bit-exact reduction to conv2d");
    }

    #[test]
    fn se_conv_delta_kernel_is_identity_per_slice() {
        let mut rng = test_rng(6);
        let st = random_stack(&mut rng, 2, &[1, 2, 3], 5, 5);
        // Center tap 1 on the diagonal, everything else 0.
        let mut weights = vec![0.0; 2 * 2 * 9];
        for c in 0..2 {
            weights[(c * 2 + c) * 9 + 4] = 1.0;
        }
        let k = ConvKernel::new(2, 2, 3, 3, 1, weights, vec![0.0; 2]).unwrap();
        let out = se_conv(&st, &k, 1).unwrap();
        for s in 0..3 {
            assert_eq!(out.slice(s), st.slice(s));
        }
    }

    #[test]
    fn se_conv_window_one_matches_per_slice_oracle() {
        let mut rng = test_rng(7);
        let st = random_stack(&mut rng, 3, &[1, 2, 3], 7, 6);
        let k = ConvKernel::new(
            2,
            3,
            3,
            3,
            1,
            (0..54).map(|_| rng.next_uniform(-1.0, 1.0)).collect(),
            vec![0.5, -0.5],
        )
        .unwrap();
        let out = se_conv(&st, &k, 1).unwrap();
        for (s, &d) in st.scale_dilations.iter().enumerate() {
            let oracle = conv2d(&st.slice(s), &k.with_dilation(d), Padding::Same).unwrap();
            let got = out.slice(s);
            for i in 0..got.data().len() {
                assert!((got.data()[i] - oracle.data()[i]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn se_conv_window_three_sums_neighbour_scales() {
        let mut rng = test_rng(8);
        let st = random_stack(&mut rng, 2, &[1, 2, 3], 5, 5);
        let k = ConvKernel::new(
            2,
            2,
            3,
            3,
            1,
            (0..36).map(|_| rng.next_uniform(-1.0, 1.0)).collect(),
            vec![0.25, -0.75],
        )
        .unwrap();
        let out = se_conv(&st, &k, 3).unwrap();
        // Independent oracle: sum conv2d over the truncated scale window,
        // with the bias charged once.
        for (s, &d) in st.scale_dilations.iter().enumerate() {
            let kd = k.with_dilation(d);
            let kd0 = ConvKernel {
                bias: vec![0.0; 2],
                ..kd.clone()
            };
            let lo = s.saturating_sub(1);
            let hi = (s + 1).min(2);
            let mut expect = Tensor::zeros(&CHW, &[2, 5, 5]);
            for sj in lo..=hi {
                let part = if sj == s {
                    conv2d(&st.slice(sj), &kd, Padding::Same).unwrap()
                } else {
                    conv2d(&st.slice(sj), &kd0, Padding::Same).unwrap()
                };
                expect = expect.add_scaled(&part, 1.0).unwrap();
            }
            let got = out.slice(s);
            for i in 0..got.data().len() {
                assert!((got.data()[i] - expect.data()[i]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn se_conv_rejects_even_window_and_channel_mismatch() {
        let mut rng = test_rng(9);
        let st = random_stack(&mut rng, 2, &[1, 2], 4, 4);
        let k = ConvKernel::new(2, 2, 3, 3, 1, vec![0.0; 36], vec![0.0; 2]).unwrap();
        assert!(se_conv(&st, &k, 2).is_err());
        let k_bad = ConvKernel::new(2, 3, 3, 3, 1, vec![0.0; 54], vec![0.0; 2]).unwrap();
        assert!(se_conv(&st, &k_bad, 1).is_err());
    }

    #[test]
    fn se_dw_single_scale_reduces_to_depthwise() {
        let mut rng = test_rng(10);
        let search = random_stack(&mut rng, 2, &[1], 6, 6);
        let template = random_stack(&mut rng, 2, &[1], 3, 3);
        let out = se_dw_xcorr(&search, &template).unwrap();
        let plain = depthwise_xcorr(&search.slice(0), &template.slice(0)).unwrap();
        assert_eq!(out.slice(0), plain);
    }

    #[test]
    fn se_dw_unit_template_returns_search() {
        let mut rng = test_rng(11);
        let search = random_stack(&mut rng, 2, &[1, 2], 5, 5);
        let ones = Tensor::filled(&CSHW, &[2, 2, 1, 1], 1.0);
        let template = ScaledTensor::new(ones, vec![1, 2]).unwrap();
        let out = se_dw_xcorr(&search, &template).unwrap();
        assert_eq!(out.data, search.data);
    }

    #[test]
    fn se_dw_matches_per_slice_loop() {
        let mut rng = test_rng(12);
        let search = random_stack(&mut rng, 2, &[1, 2, 3], 6, 6);
        let template = random_stack(&mut rng, 2, &[1, 2, 3], 3, 3);
        let out = se_dw_xcorr(&search, &template).unwrap();
        for s in 0..3 {
            let oracle = depthwise_xcorr(&search.slice(s), &template.slice(s)).unwrap();
            assert_eq!(out.slice(s), oracle);
        }
    }

    #[test]
    fn se_dw_rejects_scale_mismatch() {
        let mut rng = test_rng(13);
        let a = random_stack(&mut rng, 2, &[1, 2], 5, 5);
        let b = random_stack(&mut rng, 2, &[1, 2, 3], 3, 3);
        assert!(se_dw_xcorr(&a, &b).is_err());
    }

    #[test]
    fn center_crop_takes_the_middle() {
        let data = Tensor::from_fn(&CSHW, &[1, 1, 5, 5], |i| (i[2] * 5 + i[3]) as f64);
        let st = ScaledTensor::new(data, vec![1]).unwrap();
        let cropped = st.center_crop(3, 3).unwrap();
        assert_eq!(cropped.data.at4(0, 0, 0, 0), 6.0);
        assert_eq!(cropped.data.at4(0, 0, 2, 2), 18.0);
    }
}
