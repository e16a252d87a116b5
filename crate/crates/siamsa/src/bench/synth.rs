//! Synthetic sequence generation: a textured rectangle moving over a
//! textured background with an exponential area trajectory, yielding exact
//! ground truth and auto-derived attribute tags.
//!
//! All texture comes from seeded value noise over an integer lattice, so
//! rendered frames are identical across platforms and runs.

use std::path::{Path, PathBuf};

use super::dataset::{Attribute, SequenceRecord};
use super::metrics::has_scale_variation;
use crate::error::{Error, Result};
use crate::tensor::{Tensor, CHW};
use crate::tracker::BBox;

/// Centre speed (px/frame) above which the fast-motion tag is derived.
pub const FAST_MOTION_SPEED: f64 = 20.0;

/// Parameters of one synthetic sequence. The object follows a linear centre
/// trajectory; its area grows exponentially from the initial box to
/// `area_growth` times it at the final frame, emulating the scale variation
/// of an approach.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub name: String,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub object: BBox,
    pub vx: f64,
    pub vy: f64,
    pub area_growth: f64,
    pub occlude_from: Option<usize>,
    pub occlude_to: Option<usize>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            name: "synth".into(),
            frames: 20,
            width: 320,
            height: 240,
            object: BBox::new(130.0, 95.0, 60.0, 50.0),
            vx: 0.0,
            vy: 0.0,
            area_growth: 1.0,
            occlude_from: None,
            occlude_to: None,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::InvalidArgument(
                "frame count must be positive".into(),
            ));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("frame size must be positive".into()));
        }
        let b = &self.object;
        if b.w <= 0.0 || b.h <= 0.0 {
            return Err(Error::InvalidArgument(
                "object must have positive size".into(),
            ));
        }
        if b.x < 0.0 || b.y < 0.0 || b.x + b.w > self.width as f64 || b.y + b.h > self.height as f64
        {
            return Err(Error::InvalidArgument(format!(
                "object {b:?} exceeds the {}x{} frame at t=0",
                self.width, self.height
            )));
        }
        if self.area_growth <= 0.0 || !self.area_growth.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "area_growth {} must be a positive real",
                self.area_growth
            )));
        }
        Ok(())
    }

    /// Flat key-value parse, mirroring the tracker config format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = SynthSpec::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!(
                    "synth spec line {}: expected key = value",
                    lineno + 1
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |e: &dyn std::fmt::Display| {
                Error::Parse(format!("synth spec line {}: bad {key}: {e}", lineno + 1))
            };
            match key {
                "name" => spec.name = value.to_string(),
                "frames" => spec.frames = value.parse().map_err(|e| bad(&e))?,
                "width" => spec.width = value.parse().map_err(|e| bad(&e))?,
                "height" => spec.height = value.parse().map_err(|e| bad(&e))?,
                "vx" => spec.vx = value.parse().map_err(|e| bad(&e))?,
                "vy" => spec.vy = value.parse().map_err(|e| bad(&e))?,
                "area_growth" => spec.area_growth = value.parse().map_err(|e| bad(&e))?,
                "occlude_from" => spec.occlude_from = Some(value.parse().map_err(|e| bad(&e))?),
                "occlude_to" => spec.occlude_to = Some(value.parse().map_err(|e| bad(&e))?),
                "seed" => spec.seed = value.parse().map_err(|e| bad(&e))?,
                "object" => {
                    spec.object = super::dataset::parse_box_line(value).map_err(|e| bad(&e))?;
                }
                other => {
                    return Err(Error::Parse(format!(
                        "synth spec line {}: unknown key {other:?}",
                        lineno + 1
                    )));
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read synth spec {path:?}: {e}")))?;
        Self::parse(&text)
    }

    /// Exact ground-truth trajectory implied by the parameters.
    pub fn trajectory(&self) -> Vec<BBox> {
        let n = self.frames;
        let (cx0, cy0) = self.object.center();
        (0..n)
            .map(|t| {
                let frac = if n <= 1 {
                    0.0
                } else {
                    t as f64 / (n - 1) as f64
                };
                let ratio = self.area_growth.powf(frac);
                let side_scale = ratio.sqrt();
                BBox::from_center(
                    cx0 + self.vx * t as f64,
                    cy0 + self.vy * t as f64,
                    self.object.w * side_scale,
                    self.object.h * side_scale,
                )
            })
            .collect()
    }

    fn occluded(&self, t: usize) -> bool {
        match (self.occlude_from, self.occlude_to) {
            (Some(a), Some(b)) => t >= a && t <= b,
            (Some(a), None) => t >= a,
            _ => false,
        }
    }

    /// Attribute tags derivable from the parameters: scale variation from
    /// the exact area trajectory (strict `|log2 R| > 1`), partial occlusion
    /// when an occluder is configured, fast motion above the speed
    /// threshold.
    pub fn derive_attributes(&self, gt: &[BBox]) -> Result<Vec<Attribute>> {
        let mut attrs = Vec::new();
        if has_scale_variation(gt)? {
            attrs.push(Attribute::Sv);
        }
        if (0..self.frames).any(|t| self.occluded(t)) {
            attrs.push(Attribute::Poc);
        }
        if (self.vx * self.vx + self.vy * self.vy).sqrt() > FAST_MOTION_SPEED {
            attrs.push(Attribute::Fm);
        }
        attrs.sort();
        Ok(attrs)
    }
}

/// SplitMix64-style avalanche; the basis of all procedural texture.
fn hash_u64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice(seed: u64, xi: i64, yi: i64) -> f64 {
    let h = hash_u64(
        seed ^ (xi as u64).wrapping_mul(0x85EB_CA6B)
            ^ (yi as u64).wrapping_mul(0xC2B2_AE35_0000_0001),
    );
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Two-octave value noise in `[0, 1]`.
pub fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let mut total = 0.0;
    let mut amplitude = 0.6;
    let mut freq = 1.0;
    for octave in 0..2u64 {
        let (fx, fy) = (x * freq, y * freq);
        let (x0, y0) = (fx.floor(), fy.floor());
        let (tx, ty) = (smoothstep(fx - x0), smoothstep(fy - y0));
        let (xi, yi) = (x0 as i64, y0 as i64);
        let s = seed.wrapping_add(octave.wrapping_mul(0x51ED_270B));
        let v00 = lattice(s, xi, yi);
        let v10 = lattice(s, xi + 1, yi);
        let v01 = lattice(s, xi, yi + 1);
        let v11 = lattice(s, xi + 1, yi + 1);
        let top = v00 * (1.0 - tx) + v10 * tx;
        let bot = v01 * (1.0 - tx) + v11 * tx;
        total += (top * (1.0 - ty) + bot * ty) * amplitude;
        amplitude *= 0.5;
        freq *= 2.0;
    }
    total / 0.9
}

/// Renders frame `t` of the sequence as a `3 x H x W` tensor in `[0, 1]`.
pub fn render_frame(spec: &SynthSpec, gt: &BBox, t: usize) -> Tensor {
    let (w, h) = (spec.width, spec.height);
    // Distinct channel tints keep the object separable from the background.
    let bg_tint = [0.35, 0.45, 0.55];
    let obj_tint = [0.85, 0.55, 0.25];
    let occluding = spec.occluded(t);
    let (ocx, _) = gt.center();
    Tensor::from_fn(&CHW, &[3, h, w], |i| {
        let (c, y, x) = (i[0], i[1] as f64, i[2] as f64);
        let inside = x >= gt.x && x < gt.x + gt.w && y >= gt.y && y < gt.y + gt.h;
        if occluding && inside {
            // A vertical bar over the object's middle quarter.
            let half = gt.w / 8.0;
            if (x - ocx).abs() <= half {
                return 0.5 + 0.1 * value_noise(spec.seed ^ 0xACC1, x * 0.3, y * 0.3);
            }
        }
        let v = if inside {
            // Texture in object-local coordinates so it scales with the box.
            let u = (x - gt.x) / gt.w;
            let vv = (y - gt.y) / gt.h;
            obj_tint[c] + 0.3 * (value_noise(spec.seed ^ 0x0B1E, u * 6.0, vv * 6.0) - 0.5)
        } else {
            bg_tint[c] + 0.3 * (value_noise(spec.seed, x * 0.05, y * 0.05) - 0.5)
        };
        v.clamp(0.0, 1.0)
    })
}

fn tensor_to_rgb(frame: &Tensor) -> image::RgbImage {
    let (h, w) = (frame.shape()[1], frame.shape()[2]);
    let mut img = image::RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let px = [
                (frame.at3(0, y, x) * 255.0).round().clamp(0.0, 255.0) as u8,
                (frame.at3(1, y, x) * 255.0).round().clamp(0.0, 255.0) as u8,
                (frame.at3(2, y, x) * 255.0).round().clamp(0.0, 255.0) as u8,
            ];
            img.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    img
}

/// Renders the sequence into `<out>/<name>/` in the standard dataset layout
/// and returns the loaded-equivalent record.
pub fn synth_sequence(spec: &SynthSpec, out: &Path) -> Result<SequenceRecord> {
    spec.validate()?;
    let gt = spec.trajectory();
    let attributes = spec.derive_attributes(&gt)?;
    let seq_dir = out.join(&spec.name);
    let img_dir = seq_dir.join("img");
    std::fs::create_dir_all(&img_dir)?;

    let mut frames: Vec<PathBuf> = Vec::with_capacity(spec.frames);
    for (t, b) in gt.iter().enumerate() {
        let frame = render_frame(spec, b, t);
        let path = img_dir.join(format!("{:04}.png", t + 1));
        tensor_to_rgb(&frame)
            .save(&path)
            .map_err(|e| Error::Dataset(format!("cannot write frame {path:?}: {e}")))?;
        frames.push(path);
    }

    let mut gt_text = String::new();
    for b in &gt {
        gt_text.push_str(&format!("{},{},{},{}\n", b.x, b.y, b.w, b.h));
    }
    std::fs::write(seq_dir.join("groundtruth_rect.txt"), gt_text)?;

    let mut attr_text = String::new();
    for a in &attributes {
        attr_text.push_str(a.tag());
        attr_text.push('\n');
    }
    std::fs::write(seq_dir.join("attributes.txt"), attr_text)?;

    Ok(SequenceRecord {
        name: spec.name.clone(),
        frames,
        ground_truth: gt,
        attributes,
    })
}
