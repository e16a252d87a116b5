//! The end-to-end tracking loop: template initialization, per-frame search,
//! classification/regression heads over the refined correlation features,
//! box decoding with cosine-window penalty, and temporal size smoothing.
//!
//! With both ablation flags off the tracker degrades to the bare pipeline:
//! backbone, per-scale depthwise correlation, heads. The anchor proposal and
//! pairwise attention blocks are only ever entered when their flags are on.

use crate::apn::{
    sa_apn_forward, AgnNet, AnchorField, AnchorGeometry, ApnParams, BranchFeatures, FusionWeights,
};
use crate::backbone::{lift_to_scale_stack, se_conv, se_dw_xcorr, Backbone, BackboneConfig};
use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::psa::{psan_forward, AttentionWeights};
use crate::tensor::{conv2d, softmax_rows, ConvKernel, Padding, Tensor, CHW};
use crate::weights::{init_conv, SeededUniform, WeightsBank};

/// Axis-aligned box: top-left corner plus extents, all in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BBox::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    /// Largest part of the box that fits the `width x height` frame; the
    /// extents are capped first so the result always has positive area for
    /// positive inputs.
    pub fn clamp_to_frame(&self, width: f64, height: f64) -> BBox {
        let w = self.w.min(width);
        let h = self.h.min(height);
        BBox {
            x: self.x.clamp(0.0, width - w),
            y: self.y.clamp(0.0, height - h),
            w,
            h,
        }
    }
}

/// Square crop window over a frame: centre, side in frame pixels, and the
/// output resolution it resamples to. All patch/frame coordinate mapping
/// goes through this one struct so the two directions cannot drift apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropWindow {
    pub cx: f64,
    pub cy: f64,
    pub side: f64,
    pub out_size: usize,
}

impl CropWindow {
    /// Window around `b` with side `(max(w,h) + context*(w+h)/2) * inflate`.
    /// `inflate` is 1 for template crops; search crops pass
    /// `search_size / template_size` so the object keeps the same apparent
    /// scale in both patches.
    pub fn around(b: &BBox, out_size: usize, context: f64, inflate: f64) -> Result<Self> {
        if b.w <= 0.0 || b.h <= 0.0 || !b.w.is_finite() || !b.h.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "degenerate box {}x{} cannot anchor a crop",
                b.w, b.h
            )));
        }
        let side = (b.w.max(b.h) + context * (b.w + b.h) / 2.0) * inflate;
        let (cx, cy) = b.center();
        Ok(CropWindow {
            cx,
            cy,
            side,
            out_size,
        })
    }

    /// Pixels of the output patch per frame pixel.
    pub fn scale(&self) -> f64 {
        self.out_size as f64 / self.side
    }

    fn left(&self) -> f64 {
        self.cx - self.side / 2.0
    }

    fn top(&self) -> f64 {
        self.cy - self.side / 2.0
    }

    /// Frame coordinate sampled by output pixel centre `(px, py)`.
    pub fn source_of(&self, px: f64, py: f64) -> (f64, f64) {
        let step = self.side / self.out_size as f64;
        (
            self.left() + (px + 0.5) * step,
            self.top() + (py + 0.5) * step,
        )
    }

    /// Maps a frame-coordinate box into patch coordinates.
    pub fn to_patch(&self, b: &BBox) -> BBox {
        let s = self.scale();
        let (cx, cy) = b.center();
        BBox::from_center(
            (cx - self.left()) * s - 0.5,
            (cy - self.top()) * s - 0.5,
            b.w * s,
            b.h * s,
        )
    }

    /// Inverse of [`CropWindow::to_patch`].
    pub fn to_frame(&self, b: &BBox) -> BBox {
        let s = self.scale();
        let (cx, cy) = b.center();
        BBox::from_center(
            (cx + 0.5) / s + self.left(),
            (cy + 0.5) / s + self.top(),
            b.w / s,
            b.h / s,
        )
    }
}

/// Per-channel mean of a frame, used as the fill colour for out-of-frame
/// crop regions.
pub fn channel_mean(frame: &Tensor) -> Result<[f64; 3]> {
    frame.expect_axes(&CHW)?;
    let (c, h, w) = (frame.shape()[0], frame.shape()[1], frame.shape()[2]);
    if c != 3 || h == 0 || w == 0 {
        return Err(Error::InvalidArgument(format!(
            "expected a non-empty 3-channel frame, got {c}x{h}x{w}"
        )));
    }
    let mut mean = [0.0; 3];
    for (ci, m) in mean.iter_mut().enumerate() {
        let mut sum = 0.0;
        for y in 0..h {
            for x in 0..w {
                sum += frame.at3(ci, y, x);
            }
        }
        *m = sum / (h * w) as f64;
    }
    Ok(mean)
}

fn bilinear(frame: &Tensor, c: usize, x: f64, y: f64, pad: f64) -> f64 {
    let (h, w) = (frame.shape()[1] as isize, frame.shape()[2] as isize);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let sample = |xi: isize, yi: isize| -> f64 {
        if xi < 0 || yi < 0 || xi >= w || yi >= h {
            pad
        } else {
            frame.at3(c, yi as usize, xi as usize)
        }
    };
    let (x0, y0) = (x0 as isize, y0 as isize);
    let v00 = sample(x0, y0);
    let v10 = sample(x0 + 1, y0);
    let v01 = sample(x0, y0 + 1);
    let v11 = sample(x0 + 1, y0 + 1);
    v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy + v11 * fx * fy
}

/// Resamples the window out of the frame with bilinear interpolation;
/// samples falling outside the frame read the given pad colour.
pub fn sample_window(frame: &Tensor, win: &CropWindow, pad: [f64; 3]) -> Result<Tensor> {
    frame.expect_axes(&CHW)?;
    if win.side <= 0.0 || win.out_size == 0 {
        return Err(Error::InvalidArgument("empty crop window".into()));
    }
    let n = win.out_size;
    let out = Tensor::from_fn(&CHW, &[3, n, n], |i| {
        let (sx, sy) = win.source_of(i[2] as f64, i[1] as f64);
        bilinear(frame, i[0], sx, sy, pad[i[0]])
    });
    out.check_finite()?;
    Ok(out)
}

/// Square context crop centred on `b`, resampled to `out_size`, with
/// out-of-frame regions filled by the frame's channel mean.
pub fn crop_patch(frame: &Tensor, b: &BBox, out_size: usize, context: f64) -> Result<Tensor> {
    let win = CropWindow::around(b, out_size, context, 1.0)?;
    let pad = channel_mean(frame)?;
    sample_window(frame, &win, pad)
}

/// All learned (here: seeded) parameters of the tracker, plus the bank they
/// serialize through.
#[derive(Debug, Clone)]
pub struct ModelWeights {
    pub backbone: Backbone,
    pub se_kernel: ConvKernel,
    pub attention: AttentionWeights,
    pub fusion: FusionWeights,
    pub agn: AgnNet,
    pub cls_head: ConvKernel,
    pub reg_head: ConvKernel,
    pub bank: WeightsBank,
}

impl ModelWeights {
    /// Builds every component, reusing arrays already present in `bank` and
    /// drawing any missing ones from a stream seeded with `cfg.seed`.
    pub fn build(cfg: &TrackerConfig, mut bank: WeightsBank) -> Result<Self> {
        cfg.validate()?;
        let bb_cfg = BackboneConfig {
            rng_seed: cfg.seed,
            ..BackboneConfig::default()
        };
        if bb_cfg.channels[3] != bb_cfg.channels[4] {
            return Err(Error::InvalidArgument(
                "layer-4 and layer-5 channel counts must match for fusion".into(),
            ));
        }
        let channels = bb_cfg.channels[4];
        let mut rng = SeededUniform::new(cfg.seed);
        let backbone = Backbone::build(&bb_cfg, &mut bank, &mut rng)?;

        let k = 3usize;
        let fan_in = channels * k * k;
        crate::backbone::ensure_array(
            &mut bank,
            "se.conv.weight",
            &[channels, channels, k, k],
            || init_conv(&mut rng, channels * channels * k * k, fan_in),
        )?;
        crate::backbone::ensure_array(&mut bank, "se.conv.bias", &[channels], || {
            vec![0.0; channels]
        })?;
        let se_kernel = ConvKernel::new(
            channels,
            channels,
            k,
            k,
            1,
            bank.take("se.conv.weight", &[channels, channels, k, k])?,
            bank.take("se.conv.bias", &[channels])?,
        )?;

        let attention = AttentionWeights::build(cfg.scale_dilations.len(), &mut bank, &mut rng)?;
        let fusion = FusionWeights::build(channels, &mut bank, &mut rng)?;
        let agn = AgnNet::build(channels, &mut bank, &mut rng)?;

        crate::backbone::ensure_array(&mut bank, "head.cls.weight", &[2, channels, k, k], || {
            init_conv(&mut rng, 2 * channels * k * k, fan_in)
        })?;
        crate::backbone::ensure_array(&mut bank, "head.cls.bias", &[2], || vec![0.0; 2])?;
        crate::backbone::ensure_array(&mut bank, "head.reg.weight", &[4, channels, k, k], || {
            init_conv(&mut rng, 4 * channels * k * k, fan_in)
        })?;
        crate::backbone::ensure_array(&mut bank, "head.reg.bias", &[4], || vec![0.0; 4])?;
        let cls_head = ConvKernel::new(
            2,
            channels,
            k,
            k,
            1,
            bank.take("head.cls.weight", &[2, channels, k, k])?,
            bank.take("head.cls.bias", &[2])?,
        )?;
        let reg_head = ConvKernel::new(
            4,
            channels,
            k,
            k,
            1,
            bank.take("head.reg.weight", &[4, channels, k, k])?,
            bank.take("head.reg.bias", &[4])?,
        )?;

        Ok(ModelWeights {
            backbone,
            se_kernel,
            attention,
            fusion,
            agn,
            cls_head,
            reg_head,
            bank,
        })
    }

    pub fn from_seed(cfg: &TrackerConfig) -> Result<Self> {
        Self::build(cfg, WeightsBank::new())
    }

    pub fn from_file(cfg: &TrackerConfig, path: &std::path::Path) -> Result<Self> {
        Self::build(cfg, WeightsBank::load(path)?)
    }
}

/// Mutable per-sequence state: template features, the current box estimate
/// (which doubles as the size-smoothing memory), the pad colour recorded at
/// init, and the base anchor side derived from the template object.
#[derive(Debug, Clone)]
pub struct TrackerState {
    pub template: BranchFeatures,
    pub current: BBox,
    pub pad_color: [f64; 3],
    pub base_anchor_side: f64,
}

/// Single-object tracker; one instance owns one sequence's state. The
/// weights can be shared across instances because every forward is pure.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub cfg: TrackerConfig,
    pub model: ModelWeights,
    state: Option<TrackerState>,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, model: ModelWeights) -> Result<Self> {
        cfg.validate()?;
        // Fail fast on geometry the backbone cannot digest: both patch
        // sizes must survive the stride arithmetic and the template's
        // feature maps must fit inside the search's for valid correlation.
        let t_ext = model.backbone.config.layer_extents(cfg.template_size)?;
        let s_ext = model.backbone.config.layer_extents(cfg.search_size)?;
        if t_ext[3] > s_ext[3] || t_ext[4] > s_ext[4] {
            return Err(Error::InvalidArgument(format!(
                "template feature extents {:?} exceed search extents {:?}",
                t_ext, s_ext
            )));
        }
        Ok(Tracker {
            cfg,
            model,
            state: None,
        })
    }

    pub fn state(&self) -> Option<&TrackerState> {
        self.state.as_ref()
    }

    fn search_inflate(&self) -> f64 {
        self.cfg.search_size as f64 / self.cfg.template_size as f64
    }

    /// Lifts raw layer-5 features into the scale stack and applies the
    /// scale-equivariant convolution layer.
    fn se_features(&self, phi5: &Tensor) -> Result<crate::backbone::ScaledTensor> {
        let lifted = lift_to_scale_stack(phi5, &self.cfg.scale_dilations)?;
        se_conv(&lifted, &self.model.se_kernel, self.cfg.inter_scale)
    }

    fn extract_branch(&self, patch: &Tensor) -> Result<BranchFeatures> {
        let taps = self.model.backbone.forward(patch)?;
        Ok(BranchFeatures {
            phi4: taps.phi4,
            phi5: self.se_features(&taps.phi5)?,
        })
    }

    /// Initializes on the first frame's ground-truth box: crops the
    /// template patch, extracts and stores its features, and records the
    /// crop geometry the anchors will be based on.
    pub fn init(&mut self, frame: &Tensor, gt: &BBox) -> Result<()> {
        frame.expect_axes(&CHW)?;
        if gt.w <= 0.0 || gt.h <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "init box must have positive area, got {}x{}",
                gt.w, gt.h
            )));
        }
        let pad = channel_mean(frame)?;
        let win = CropWindow::around(gt, self.cfg.template_size, self.cfg.context_margin, 1.0)?;
        let patch = sample_window(frame, &win, pad)?;
        let template = self.extract_branch(&patch)?;

        // The template object's geometric-mean size expressed in search-patch
        // pixels; constant for the whole sequence.
        let search_win = CropWindow::around(
            gt,
            self.cfg.search_size,
            self.cfg.context_margin,
            self.search_inflate(),
        )?;
        let base_anchor_side = (gt.w * gt.h).sqrt() * search_win.scale();

        self.state = Some(TrackerState {
            template,
            current: *gt,
            pad_color: pad,
            base_anchor_side,
        });
        Ok(())
    }

    /// Tracks one frame: crops the search region around the current
    /// estimate, runs the enabled pipeline stages, decodes the best box,
    /// and updates the state. Returns the frame-coordinate box (clamped to
    /// the frame) and its classification score in `[0, 1]`.
    pub fn track_frame(&mut self, frame: &Tensor) -> Result<(BBox, f64)> {
        frame.expect_axes(&CHW)?;
        let state = self
            .state
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("track_frame before init".into()))?;
        let pad = channel_mean(frame)?;
        let win = CropWindow::around(
            &state.current,
            self.cfg.search_size,
            self.cfg.context_margin,
            self.search_inflate(),
        )?;
        let patch = sample_window(frame, &win, pad)?;
        let search = self.extract_branch(&patch)?;

        let r_corr = se_dw_xcorr(&search.phi5, &state.template.phi5)?;
        let geometry = AnchorGeometry {
            stride: self.model.backbone.config.total_stride() as f64,
            base_side: state.base_anchor_side,
            patch_size: self.cfg.search_size as f64,
        };

        let (f_apn, anchors) = if self.cfg.enable_sa_apn {
            let params = ApnParams {
                fusion: &self.model.fusion,
                attention: &self.model.attention,
                agn: &self.model.agn,
                scales: &self.cfg.scale_dilations,
            };
            sa_apn_forward(&state.template, &search, &params, geometry)?
        } else {
            (r_corr.clone(), AnchorField::base(r_corr.clone(), geometry))
        };

        let refined = if self.cfg.enable_psan {
            psan_forward(&r_corr, &f_apn, &self.model.attention)?
        } else {
            f_apn
        };

        let collapsed = refined.max_over_scale();
        let cls = conv2d(&collapsed, &self.model.cls_head, Padding::Same)?;
        let reg = conv2d(&collapsed, &self.model.reg_head, Padding::Same)?;

        let prev_patch = win.to_patch(&state.current);
        let (box_patch, score) = decode_and_select(&cls, &reg, &anchors, prev_patch, &self.cfg)?;
        let box_frame = win
            .to_frame(&box_patch)
            .clamp_to_frame(frame.shape()[2] as f64, frame.shape()[1] as f64);
        if box_frame.area() <= 0.0 {
            return Err(Error::Invariant(format!(
                "emitted box has empty area: {box_frame:?}"
            )));
        }
        self.state.as_mut().expect("checked above").current = box_frame;
        Ok((box_frame, score))
    }
}

/// 1-D Hann window of length `n`, peaking at the centre; a single sample is
/// the constant 1.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Argmax over window-penalized foreground scores. `scores` holds the
/// foreground probabilities row-major on a `gh x gw` grid; each is
/// multiplied by the 2-D Hann window raised to `window_influence`. Scaling
/// all scores by a positive constant cannot change the winner.
pub fn select_cell(scores: &[f64], gh: usize, gw: usize, window_influence: f64) -> (usize, usize) {
    let wy = hann(gh);
    let wx = hann(gw);
    let mut best = f64::NEG_INFINITY;
    let mut best_cell = (0, 0);
    for i in 0..gh {
        for j in 0..gw {
            let penalized = scores[i * gw + j] * (wy[i] * wx[j]).powf(window_influence);
            if penalized > best {
                best = penalized;
                best_cell = (i, j);
            }
        }
    }
    best_cell
}

/// Decodes the best candidate box from the head outputs.
///
/// Classification scores are softmax-normalized across the two class
/// channels (channel 1 is foreground), penalized by the cosine window, and
/// the winning cell's anchor is refined by the regression offsets using the
/// same parameterization the anchor network uses. The output size is
/// exponentially smoothed toward `prev`; everything stays in search-patch
/// coordinates.
pub fn decode_and_select(
    cls: &Tensor,
    reg: &Tensor,
    anchors: &AnchorField,
    prev: BBox,
    cfg: &TrackerConfig,
) -> Result<(BBox, f64)> {
    cls.expect_axes(&CHW)?;
    reg.expect_axes(&CHW)?;
    let (gh, gw) = (anchors.grid_h, anchors.grid_w);
    if cls.shape() != [2, gh, gw] {
        return Err(Error::ShapeMismatch(format!(
            "classification map {:?} does not cover a 2x{gh}x{gw} grid",
            cls.shape()
        )));
    }
    if reg.shape() != [4, gh, gw] {
        return Err(Error::ShapeMismatch(format!(
            "regression map {:?} does not cover a 4x{gh}x{gw} grid",
            reg.shape()
        )));
    }

    // Foreground probability per cell.
    let cells = gh * gw;
    let mut logits = Vec::with_capacity(cells * 2);
    for i in 0..gh {
        for j in 0..gw {
            logits.push(cls.at3(0, i, j));
            logits.push(cls.at3(1, i, j));
        }
    }
    let probs = softmax_rows(cells, 2, &logits)?;
    let fg: Vec<f64> = (0..cells).map(|r| probs.at(r, 1)).collect();

    let (bi, bj) = select_cell(&fg, gh, gw, cfg.window_influence);
    let anchor = anchors.anchor(bi, bj);
    let (acx, acy) = anchor.center();
    let off = [
        reg.at3(0, bi, bj),
        reg.at3(1, bi, bj),
        reg.at3(2, bi, bj),
        reg.at3(3, bi, bj),
    ];
    let candidate = anchors.geometry.decode(acx, acy, anchor.w, anchor.h, off);

    let s = cfg.size_smoothing;
    let (ccx, ccy) = candidate.center();
    let out = BBox::from_center(
        ccx,
        ccy,
        s * prev.w + (1.0 - s) * candidate.w,
        s * prev.h + (1.0 - s) * candidate.h,
    );
    Ok((out, fg[bi * gw + bj]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::ScaledTensor;
    use crate::tensor::CSHW;
    use crate::weights::test_rng;

    fn gradient_frame(w: usize, h: usize) -> Tensor {
        Tensor::from_fn(&CHW, &[3, h, w], |i| {
            (i[0] as f64 * 0.1 + i[1] as f64 * 0.7 + i[2] as f64 * 0.3) / (h + w) as f64
        })
    }

    #[test]
    fn crop_of_constant_frame_is_constant() {
        let frame = Tensor::filled(&CHW, &[3, 40, 60], 0.625);
        let b = BBox::new(20.0, 10.0, 12.0, 9.0);
        let patch = crop_patch(&frame, &b, 32, 0.5).unwrap();
        assert_eq!(patch.shape(), &[3, 32, 32]);
        for &v in patch.data() {
            assert!((v - 0.625).abs() < 1e-12);
        }
    }

    #[test]
    fn crop_fully_outside_frame_is_pad_colored() {
        let mut frame = Tensor::filled(&CHW, &[3, 20, 20], 0.25);
        // Perturb one pixel so the mean is not trivially the fill value.
        frame.set3(0, 0, 0, 0.45);
        let pad = channel_mean(&frame).unwrap();
        let b = BBox::new(1000.0, 1000.0, 10.0, 10.0);
        let patch = crop_patch(&frame, &b, 16, 0.5).unwrap();
        for c in 0..3 {
            for y in 0..16 {
                for x in 0..16 {
                    assert!((patch.at3(c, y, x) - pad[c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn crop_matches_independent_bilinear_oracle() {
        let frame = gradient_frame(50, 40);
        let b = BBox::new(12.0, 8.0, 14.0, 10.0);
        let (out, ctx) = (24usize, 0.5);
        let patch = crop_patch(&frame, &b, out, ctx).unwrap();
        let pad = channel_mean(&frame).unwrap();
        // Independent restatement of the geometry and interpolation.
        let side = b.w.max(b.h) + ctx * (b.w + b.h) / 2.0;
        let (cx, cy) = b.center();
        for c in 0..3 {
            for py in 0..out {
                for px in 0..out {
                    let sx = cx - side / 2.0 + (px as f64 + 0.5) * side / out as f64;
                    let sy = cy - side / 2.0 + (py as f64 + 0.5) * side / out as f64;
                    let (x0, y0) = (sx.floor(), sy.floor());
                    let (fx, fy) = (sx - x0, sy - y0);
                    let fetch = |xi: f64, yi: f64| -> f64 {
                        if xi < 0.0 || yi < 0.0 || xi >= 50.0 || yi >= 40.0 {
                            pad[c]
                        } else {
                            frame.at3(c, yi as usize, xi as usize)
                        }
                    };
                    let expect = fetch(x0, y0) * (1.0 - fx) * (1.0 - fy)
                        + fetch(x0 + 1.0, y0) * fx * (1.0 - fy)
                        + fetch(x0, y0 + 1.0) * (1.0 - fx) * fy
                        + fetch(x0 + 1.0, y0 + 1.0) * fx * fy;
                    assert!(
                        (patch.at3(c, py, px) - expect).abs() < 1e-4,
                        "pixel ({c},{py},{px})"
                    );
                }
            }
        }
    }

    #[test]
    fn crop_rejects_degenerate_box() {
        let frame = gradient_frame(20, 20);
        assert!(crop_patch(&frame, &BBox::new(5.0, 5.0, 0.0, 3.0), 16, 0.5).is_err());
    }

    #[test]
    fn window_round_trips_boxes() {
        let b = BBox::new(30.0, 40.0, 22.0, 18.0);
        let win = CropWindow::around(&b, 127, 0.5, 1.0).unwrap();
        let there = win.to_patch(&b);
        let back = win.to_frame(&there);
        assert!((back.x - b.x).abs() < 1e-9);
        assert!((back.y - b.y).abs() < 1e-9);
        assert!((back.w - b.w).abs() < 1e-9);
        assert!((back.h - b.h).abs() < 1e-9);
    }

    fn small_cfg() -> TrackerConfig {
        TrackerConfig {
            seed: 42,
            ..TrackerConfig::default()
        }
    }

    #[test]
    fn init_stores_box_and_is_deterministic() {
        let cfg = small_cfg();
        let model = ModelWeights::from_seed(&cfg).unwrap();
        let frame = gradient_frame(320, 240);
        let b = BBox::new(140.0, 100.0, 40.0, 30.0);
        let mut t1 = Tracker::new(cfg.clone(), model.clone()).unwrap();
        t1.init(&frame, &b).unwrap();
        assert_eq!(t1.state().unwrap().current, b);
        let mut t2 = Tracker::new(cfg, model).unwrap();
        t2.init(&frame, &b).unwrap();
        assert_eq!(
            t1.state().unwrap().template.phi5.data.data(),
            t2.state().unwrap().template.phi5.data.data()
        );
    }

    #[test]
    fn template_feature_extents_match_stride_arithmetic() {
        let cfg = small_cfg();
        let model = ModelWeights::from_seed(&cfg).unwrap();
        let extents = model
            .backbone
            .config
            .layer_extents(cfg.template_size)
            .unwrap();
        let frame = gradient_frame(320, 240);
        let mut t = Tracker::new(cfg, model).unwrap();
        t.init(&frame, &BBox::new(140.0, 100.0, 40.0, 30.0))
            .unwrap();
        let st = t.state().unwrap();
        assert_eq!(st.template.phi4.shape()[1], extents[3]);
        assert_eq!(st.template.phi5.spatial(), (extents[4], extents[4]));
    }

    #[test]
    fn track_before_init_is_rejected() {
        let cfg = small_cfg();
        let model = ModelWeights::from_seed(&cfg).unwrap();
        let mut t = Tracker::new(cfg, model).unwrap();
        let frame = gradient_frame(64, 64);
        assert!(t.track_frame(&frame).is_err());
    }

    #[test]
    fn select_cell_uniform_scores_full_window_picks_center() {
        let scores = vec![1.0; 21 * 21];
        assert_eq!(select_cell(&scores, 21, 21, 1.0), (10, 10));
    }

    #[test]
    fn select_cell_no_window_picks_dominant_score() {
        let mut scores = vec![0.1; 15 * 15];
        scores[3 * 15 + 11] = 0.9;
        assert_eq!(select_cell(&scores, 15, 15, 0.0), (3, 11));
    }

    #[test]
    fn select_cell_is_invariant_to_positive_scaling() {
        let mut rng = test_rng(60);
        for _ in 0..25 {
            let scores: Vec<f64> = (0..9 * 9).map(|_| rng.next_uniform(0.01, 1.0)).collect();
            let wi = rng.next_uniform(0.0, 1.0);
            let picked = select_cell(&scores, 9, 9, wi);
            for factor in [0.003, 7.0, 2500.0] {
                let scaled: Vec<f64> = scores.iter().map(|v| v * factor).collect();
                assert_eq!(select_cell(&scaled, 9, 9, wi), picked);
            }
        }
    }

    fn tiny_anchor_field(gh: usize, gw: usize) -> AnchorField {
        let g = AnchorGeometry {
            stride: 8.0,
            base_side: 40.0,
            patch_size: 287.0,
        };
        let features = ScaledTensor::new(Tensor::zeros(&CSHW, &[1, 1, gh, gw]), vec![1]).unwrap();
        AnchorField::base(features, g)
    }

    #[test]
    fn decode_smoothing_one_keeps_previous_size() {
        let field = tiny_anchor_field(5, 5);
        let mut rng = test_rng(61);
        let cls = Tensor::from_fn(&CHW, &[2, 5, 5], |_| rng.next_uniform(-1.0, 1.0));
        let reg = Tensor::from_fn(&CHW, &[4, 5, 5], |_| rng.next_uniform(-0.5, 0.5));
        let cfg = TrackerConfig {
            size_smoothing: 1.0,
            ..TrackerConfig::default()
        };
        let prev = BBox::new(100.0, 110.0, 33.0, 27.0);
        let (out, score) = decode_and_select(&cls, &reg, &field, prev, &cfg).unwrap();
        assert_eq!(out.w, prev.w);
        assert_eq!(out.h, prev.h);
        assert!((0.0..=1.0).contains(&score));
    }

    #[test]
    fn decode_window_influence_zero_takes_argmax_cell() {
        let field = tiny_anchor_field(5, 5);
        // Dominant foreground logit at cell (1, 3).
        let cls = Tensor::from_fn(&CHW, &[2, 5, 5], |i| {
            if i[0] == 1 && i[1] == 1 && i[2] == 3 {
                9.0
            } else {
                0.0
            }
        });
        let reg = Tensor::zeros(&CHW, &[4, 5, 5]);
        let cfg = TrackerConfig {
            window_influence: 0.0,
            size_smoothing: 0.0,
            ..TrackerConfig::default()
        };
        let prev = BBox::new(0.0, 0.0, 10.0, 10.0);
        let (out, score) = decode_and_select(&cls, &reg, &field, prev, &cfg).unwrap();
        let expect = field.anchor(1, 3);
        assert_eq!(out, expect);
        assert!(score > 0.99);
    }

    #[test]
    fn decode_full_window_uniform_scores_picks_center_anchor() {
        let field = tiny_anchor_field(7, 7);
        // All-zero logits: every cell's foreground probability is 0.5.
        let cls = Tensor::zeros(&CHW, &[2, 7, 7]);
        let reg = Tensor::zeros(&CHW, &[4, 7, 7]);
        let cfg = TrackerConfig {
            window_influence: 1.0,
            size_smoothing: 0.0,
            ..TrackerConfig::default()
        };
        let prev = BBox::new(0.0, 0.0, 10.0, 10.0);
        let (out, _) = decode_and_select(&cls, &reg, &field, prev, &cfg).unwrap();
        assert_eq!(out, field.anchor(3, 3), "window peak is the centre cell");
    }

    #[test]
    fn decode_rejects_extent_mismatch() {
        let field = tiny_anchor_field(5, 5);
        let cls = Tensor::zeros(&CHW, &[2, 4, 5]);
        let reg = Tensor::zeros(&CHW, &[4, 5, 5]);
        let cfg = TrackerConfig::default();
        assert!(
            decode_and_select(&cls, &reg, &field, BBox::new(0.0, 0.0, 1.0, 1.0), &cfg).is_err()
        );
    }

    #[test]
    fn clamp_keeps_boxes_inside_frame() {
        let b = BBox::new(-10.0, 95.0, 30.0, 30.0).clamp_to_frame(100.0, 100.0);
        assert!(b.x >= 0.0 && b.y >= 0.0);
        assert!(b.x + b.w <= 100.0 + 1e-9);
        assert!(b.y + b.h <= 100.0 + 1e-9);
        assert!(b.area() > 0.0);
        let huge = BBox::new(-50.0, -50.0, 500.0, 500.0).clamp_to_frame(100.0, 100.0);
        assert_eq!((huge.w, huge.h), (100.0, 100.0));
        assert_eq!((huge.x, huge.y), (0.0, 0.0));
    }
}
