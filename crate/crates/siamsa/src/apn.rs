//! Scale-aware anchor proposal: fusion of shallow and deep correlation
//! results followed by a two-layer anchor generation network that regresses
//! one box per feature cell.

use crate::backbone::{ensure_array, lift_to_scale_stack, se_dw_xcorr, ScaledTensor};
use crate::calls::note_apn;
use crate::error::{Error, Result};
use crate::psa::{sc_cross_attention, AttentionWeights};
use crate::tensor::{conv2d, depthwise_xcorr, ConvKernel, Padding, Tensor, CSHW};
use crate::tracker::BBox;
use crate::weights::{init_conv, SeededUniform, WeightsBank};

pub const DEFAULT_LAMBDA: f64 = 0.5;

/// Anchor side lengths are clamped into this range so any finite regression
/// output still decodes to a usable box.
pub const MIN_ANCHOR_SIDE: f64 = 1e-2;
pub const MAX_ANCHOR_SIDE: f64 = 1e6;

/// Fusion weights: the two scalar mixing weights plus the 1x1 projection
/// that maps the channel concatenation back to `C` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Row-major `[C][2C]`; the first `C` input channels are the shallow
    /// correlation, the last `C` the deep one.
    pub proj: Vec<f64>,
    pub channels: usize,
}

impl FusionWeights {
    pub fn build(channels: usize, bank: &mut WeightsBank, rng: &mut SeededUniform) -> Result<Self> {
        ensure_array(bank, "fusion.lambda1", &[1], || vec![DEFAULT_LAMBDA])?;
        ensure_array(bank, "fusion.lambda2", &[1], || vec![DEFAULT_LAMBDA])?;
        ensure_array(
            bank,
            "fusion.proj.weight",
            &[channels, 2 * channels],
            || init_conv(rng, channels * 2 * channels, 2 * channels),
        )?;
        Ok(FusionWeights {
            lambda1: bank.take("fusion.lambda1", &[1])?[0],
            lambda2: bank.take("fusion.lambda2", &[1])?[0],
            proj: bank.take("fusion.proj.weight", &[channels, 2 * channels])?,
            channels,
        })
    }

    /// Projection that keeps the shallow copy untouched: `[I | 0]`. Used by
    /// hand-computable tests.
    pub fn identity_proj(channels: usize, lambda1: f64, lambda2: f64) -> Self {
        let mut proj = vec![0.0; channels * 2 * channels];
        for c in 0..channels {
            proj[c * 2 * channels + c] = 1.0;
        }
        FusionWeights {
            lambda1,
            lambda2,
            proj,
            channels,
        }
    }
}

/// Geometry needed to place anchors on the search patch: the backbone's
/// total stride, the base anchor side in patch pixels (the template
/// object's geometric mean size mapped into search coordinates), and the
/// patch extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorGeometry {
    pub stride: f64,
    pub base_side: f64,
    pub patch_size: f64,
}

impl AnchorGeometry {
    /// Patch coordinate of grid cell `(i, j)` on a `gh x gw` grid, centred
    /// on the patch centre.
    pub fn cell_center(&self, i: usize, j: usize, gh: usize, gw: usize) -> (f64, f64) {
        let cx = (self.patch_size - 1.0) / 2.0 + (j as f64 - (gw as f64 - 1.0) / 2.0) * self.stride;
        let cy = (self.patch_size - 1.0) / 2.0 + (i as f64 - (gh as f64 - 1.0) / 2.0) * self.stride;
        (cx, cy)
    }

    /// Applies `(dx, dy, dw, dh)` offsets to a box centred at `(cx, cy)`
    /// with side `(w, h)`: centre shifts by `stride` per unit offset, sides
    /// scale exponentially and are clamped to a positive finite range, and
    /// the centre is clamped into the patch.
    pub fn decode(&self, cx: f64, cy: f64, w: f64, h: f64, off: [f64; 4]) -> BBox {
        let [dx, dy, dw, dh] = off;
        let ncx = (cx + dx * self.stride).clamp(0.0, self.patch_size - 1.0);
        let ncy = (cy + dy * self.stride).clamp(0.0, self.patch_size - 1.0);
        let nw = (w * dw.exp()).clamp(MIN_ANCHOR_SIDE, MAX_ANCHOR_SIDE);
        let nh = (h * dh.exp()).clamp(MIN_ANCHOR_SIDE, MAX_ANCHOR_SIDE);
        BBox::new(ncx - nw / 2.0, ncy - nh / 2.0, nw, nh)
    }
}

/// Per-cell proposed anchors plus the fused feature map they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorField {
    pub grid_h: usize,
    pub grid_w: usize,
    pub geometry: AnchorGeometry,
    /// Row-major `grid_h x grid_w` boxes in search-patch pixel coordinates.
    pub anchors: Vec<BBox>,
    /// The features the anchors were regressed from.
    pub features: ScaledTensor,
}

impl AnchorField {
    pub fn anchor(&self, i: usize, j: usize) -> BBox {
        self.anchors[i * self.grid_w + j]
    }

    /// Zero-offset field: every anchor is the base box at its cell centre.
    /// This is what the tracker uses when anchor proposal is disabled.
    pub fn base(features: ScaledTensor, geometry: AnchorGeometry) -> Self {
        let (gh, gw) = features.spatial();
        let mut anchors = Vec::with_capacity(gh * gw);
        for i in 0..gh {
            for j in 0..gw {
                let (cx, cy) = geometry.cell_center(i, j, gh, gw);
                anchors.push(geometry.decode(
                    cx,
                    cy,
                    geometry.base_side,
                    geometry.base_side,
                    [0.0; 4],
                ));
            }
        }
        AnchorField {
            grid_h: gh,
            grid_w: gw,
            geometry,
            anchors,
            features,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.anchors.len() != self.grid_h * self.grid_w {
            return Err(Error::Invariant(format!(
                "{} anchors on a {}x{} grid",
                self.anchors.len(),
                self.grid_h,
                self.grid_w
            )));
        }
        let (fh, fw) = self.features.spatial();
        if (fh, fw) != (self.grid_h, self.grid_w) {
            return Err(Error::Invariant(format!(
                "anchor grid {}x{} vs feature extent {fh}x{fw}",
                self.grid_h, self.grid_w
            )));
        }
        for (idx, a) in self.anchors.iter().enumerate() {
            let (cx, cy) = a.center();
            if a.w <= 0.0 || a.h <= 0.0 {
                return Err(Error::Invariant(format!("anchor {idx} has empty extent")));
            }
            if !(0.0..=self.geometry.patch_size - 1.0).contains(&cx)
                || !(0.0..=self.geometry.patch_size - 1.0).contains(&cy)
            {
                return Err(Error::Invariant(format!(
                    "anchor {idx} centre ({cx}, {cy}) escapes the patch"
                )));
            }
        }
        Ok(())
    }
}

/// The two-layer anchor generation network.
#[derive(Debug, Clone)]
pub struct AgnNet {
    conv1: ConvKernel,
    conv2: ConvKernel,
}

impl AgnNet {
    pub fn build(channels: usize, bank: &mut WeightsBank, rng: &mut SeededUniform) -> Result<Self> {
        let k = 3usize;
        let fan_in = channels * k * k;
        ensure_array(
            bank,
            "agn.conv1.weight",
            &[channels, channels, k, k],
            || init_conv(rng, channels * channels * k * k, fan_in),
        )?;
        ensure_array(bank, "agn.conv1.bias", &[channels], || vec![0.0; channels])?;
        ensure_array(bank, "agn.conv2.weight", &[4, channels, k, k], || {
            init_conv(rng, 4 * channels * k * k, fan_in)
        })?;
        ensure_array(bank, "agn.conv2.bias", &[4], || vec![0.0; 4])?;
        Ok(AgnNet {
            conv1: ConvKernel::new(
                channels,
                channels,
                k,
                k,
                1,
                bank.take("agn.conv1.weight", &[channels, channels, k, k])?,
                bank.take("agn.conv1.bias", &[channels])?,
            )?,
            conv2: ConvKernel::new(
                4,
                channels,
                k,
                k,
                1,
                bank.take("agn.conv2.weight", &[4, channels, k, k])?,
                bank.take("agn.conv2.bias", &[4])?,
            )?,
        })
    }

    /// Raw per-cell `(dx, dy, dw, dh)` maps: scale axis collapsed by max,
    /// then the two same-padded convolutions with a ReLU between them.
    pub fn regression_maps(&self, f_apn: &ScaledTensor) -> Result<Tensor> {
        let collapsed = f_apn.max_over_scale();
        let hidden = conv2d(&collapsed, &self.conv1, Padding::Same)?.map(|v| v.max(0.0));
        conv2d(&hidden, &self.conv2, Padding::Same)
    }

    /// Regresses one anchor per feature cell.
    pub fn forward(&self, f_apn: &ScaledTensor, geometry: AnchorGeometry) -> Result<AnchorField> {
        note_apn();
        let reg = self.regression_maps(f_apn)?;
        let (gh, gw) = (reg.shape()[1], reg.shape()[2]);
        let mut anchors = Vec::with_capacity(gh * gw);
        for i in 0..gh {
            for j in 0..gw {
                let (cx, cy) = geometry.cell_center(i, j, gh, gw);
                let off = [
                    reg.at3(0, i, j),
                    reg.at3(1, i, j),
                    reg.at3(2, i, j),
                    reg.at3(3, i, j),
                ];
                anchors.push(geometry.decode(cx, cy, geometry.base_side, geometry.base_side, off));
            }
        }
        let field = AnchorField {
            grid_h: gh,
            grid_w: gw,
            geometry,
            anchors,
            features: f_apn.clone(),
        };
        field.validate()?;
        Ok(field)
    }
}

/// Equalizes spatial extents by centre-cropping the larger map, then fuses
/// deep and shallow correlation results:
/// `F = R_d + lambda1 * cross_attention(qk from R_s, values R_d)
///        + lambda2 * proj(concat(R_s, R_d))`.
pub fn fuse_apn_features(
    r_d: &ScaledTensor,
    r_s: &ScaledTensor,
    w: &FusionWeights,
    att: &AttentionWeights,
) -> Result<ScaledTensor> {
    note_apn();
    if r_d.channels() != r_s.channels() || r_d.scales() != r_s.scales() {
        return Err(Error::ShapeMismatch(format!(
            "fusion inputs disagree: {}x{} vs {}x{} (channels x scales)",
            r_d.channels(),
            r_d.scales(),
            r_s.channels(),
            r_s.scales()
        )));
    }
    if r_d.channels() != w.channels {
        return Err(Error::ShapeMismatch(format!(
            "fusion projection built for {} channels, features have {}",
            w.channels,
            r_d.channels()
        )));
    }
    let (hd, wd) = r_d.spatial();
    let (hs, ws) = r_s.spatial();
    let (h, wid) = (hd.min(hs), wd.min(ws));
    let r_d = r_d.center_crop(h, wid)?;
    let r_s = r_s.center_crop(h, wid)?;

    let mut fused = r_d.data.clone();
    if w.lambda1 != 0.0 {
        let a_apn = sc_cross_attention(&r_s, &r_d, att)?;
        fused = fused.add_scaled(&a_apn.data, w.lambda1)?;
    }
    if w.lambda2 != 0.0 {
        let c_apn = concat_project(&r_s, &r_d, w)?;
        fused = fused.add_scaled(&c_apn, w.lambda2)?;
    }
    ScaledTensor::new(fused, r_d.scale_dilations.clone())
}

/// Channel-concatenates shallow and deep features and projects back to `C`
/// channels with the 1x1 fusion projection.
fn concat_project(r_s: &ScaledTensor, r_d: &ScaledTensor, w: &FusionWeights) -> Result<Tensor> {
    let (c, s) = (r_d.channels(), r_d.scales());
    let (h, wid) = r_d.spatial();
    let mut out = Tensor::zeros(&CSHW, &[c, s, h, wid]);
    for oc in 0..c {
        for si in 0..s {
            for y in 0..h {
                for x in 0..wid {
                    let mut acc = 0.0;
                    for ic in 0..c {
                        acc += w.proj[oc * 2 * c + ic] * r_s.data.at4(ic, si, y, x);
                    }
                    for ic in 0..c {
                        acc += w.proj[oc * 2 * c + c + ic] * r_d.data.at4(ic, si, y, x);
                    }
                    out.set4(oc, si, y, x, acc);
                }
            }
        }
    }
    Ok(out)
}

/// Template and search features as the correlation stage consumes them:
/// raw layer-4 maps for the shallow branch, lifted and scale-convolved
/// layer-5 stacks for the deep branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchFeatures {
    pub phi4: Tensor,
    pub phi5: ScaledTensor,
}

/// Everything the anchor-proposal stage needs beyond the features.
pub struct ApnParams<'a> {
    pub fusion: &'a FusionWeights,
    pub attention: &'a AttentionWeights,
    pub agn: &'a AgnNet,
    pub scales: &'a [usize],
}

/// Full anchor-proposal forward: deep per-scale correlation, shallow plain
/// correlation lifted into the scale stack, fusion, and anchor regression.
/// Returns the fused features (handed onward to the pairwise attention
/// block) together with the anchor field.
pub fn sa_apn_forward(
    z: &BranchFeatures,
    x: &BranchFeatures,
    params: &ApnParams<'_>,
    geometry: AnchorGeometry,
) -> Result<(ScaledTensor, AnchorField)> {
    note_apn();
    let r_d = se_dw_xcorr(&x.phi5, &z.phi5)?;
    let shallow = depthwise_xcorr(&x.phi4, &z.phi4)?;
    let r_s = lift_to_scale_stack(&shallow, params.scales)?;
    let f_apn = fuse_apn_features(&r_d, &r_s, params.fusion, params.attention)?;
    let anchors = params.agn.forward(&f_apn, geometry)?;
    Ok((f_apn, anchors))
}
