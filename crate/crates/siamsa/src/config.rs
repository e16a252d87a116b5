//! Tracker configuration and its flat key-value file format.
//!
//! ```text
//! # comment
//! template_size = 127
//! search_size = 287
//! context_margin = 0.5
//! window_influence = 0.4
//! size_smoothing = 0.3
//! enable_psan = true
//! enable_sa_apn = true
//! seed = 0
//! scale_dilations = 1,2,3
//! inter_scale = 1
//! ```
//!
//! Every key is optional and defaults to the values above; unknown keys are
//! rejected so typos cannot silently fall back to defaults.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Template patch side in pixels.
    pub template_size: usize,
    /// Search patch side in pixels.
    pub search_size: usize,
    /// Context margin factor added around the object when cropping.
    pub context_margin: f64,
    /// Cosine window exponent in `[0, 1]`; 0 disables the window.
    pub window_influence: f64,
    /// Exponential size smoothing in `[0, 1]`; 1 freezes the box size.
    pub size_smoothing: f64,
    /// Enables the pairwise scale-channel attention block.
    pub enable_psan: bool,
    /// Enables the scale-aware anchor proposal network.
    pub enable_sa_apn: bool,
    /// Master seed for weight initialization.
    pub seed: u64,
    /// Integer kernel dilations realizing the scale axis; must start at 1
    /// and increase strictly.
    pub scale_dilations: Vec<usize>,
    /// Odd cross-scale summation window for scale-equivariant convolution.
    pub inter_scale: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            template_size: 127,
            search_size: 287,
            context_margin: 0.5,
            window_influence: 0.40,
            size_smoothing: 0.30,
            enable_psan: true,
            enable_sa_apn: true,
            seed: 0,
            scale_dilations: vec![1, 2, 3],
            inter_scale: 1,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.template_size == 0 || self.search_size == 0 {
            return Err(Error::InvalidArgument(
                "patch sizes must be positive".into(),
            ));
        }
        if self.template_size >= self.search_size {
            return Err(Error::InvalidArgument(format!(
                "template size {} must be smaller than search size {}",
                self.template_size, self.search_size
            )));
        }
        if !(0.0..=1.0).contains(&self.window_influence) {
            return Err(Error::InvalidArgument(format!(
                "window_influence {} outside [0, 1]",
                self.window_influence
            )));
        }
        if !(0.0..=1.0).contains(&self.size_smoothing) {
            return Err(Error::InvalidArgument(format!(
                "size_smoothing {} outside [0, 1]",
                self.size_smoothing
            )));
        }
        if self.context_margin < 0.0 || !self.context_margin.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "context_margin {} must be a non-negative real",
                self.context_margin
            )));
        }
        if self.scale_dilations.first() != Some(&1)
            || !self.scale_dilations.windows(2).all(|w| w[0] < w[1])
        {
            return Err(Error::InvalidArgument(format!(
                "scale_dilations {:?} must start at 1 and increase strictly",
                self.scale_dilations
            )));
        }
        if self.inter_scale % 2 == 0 || self.inter_scale > self.scale_dilations.len() {
            return Err(Error::InvalidArgument(format!(
                "inter_scale {} must be odd and at most the scale count {}",
                self.inter_scale,
                self.scale_dilations.len()
            )));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrackerConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("config line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |e: &dyn std::fmt::Display| {
                Error::Parse(format!("config line {}: bad {key}: {e}", lineno + 1))
            };
            match key {
                "template_size" => cfg.template_size = value.parse().map_err(|e| bad(&e))?,
                "search_size" => cfg.search_size = value.parse().map_err(|e| bad(&e))?,
                "context_margin" => cfg.context_margin = value.parse().map_err(|e| bad(&e))?,
                "window_influence" => cfg.window_influence = value.parse().map_err(|e| bad(&e))?,
                "size_smoothing" => cfg.size_smoothing = value.parse().map_err(|e| bad(&e))?,
                "enable_psan" => cfg.enable_psan = value.parse().map_err(|e| bad(&e))?,
                "enable_sa_apn" => cfg.enable_sa_apn = value.parse().map_err(|e| bad(&e))?,
                "seed" => cfg.seed = value.parse().map_err(|e| bad(&e))?,
                "inter_scale" => cfg.inter_scale = value.parse().map_err(|e| bad(&e))?,
                "scale_dilations" => {
                    cfg.scale_dilations = value
                        .split(',')
                        .map(|p| p.trim().parse().map_err(|e| bad(&e)))
                        .collect::<Result<_>>()?;
                }
                other => {
                    return Err(Error::Parse(format!(
                        "config line {}: unknown key {other:?}",
                        lineno + 1
                    )));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read config {path:?}: {e}")))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let dilations: Vec<String> = self.scale_dilations.iter().map(|d| d.to_string()).collect();
        format!(
            "template_size = {}\nsearch_size = {}\ncontext_margin = {}\n\
             window_influence = {}\nsize_smoothing = {}\nenable_psan = {}\n\
             enable_sa_apn = {}\nseed = {}\nscale_dilations = {}\ninter_scale = {}\n",
            self.template_size,
            self.search_size,
            self.context_margin,
            self.window_influence,
            self.size_smoothing,
            self.enable_psan,
            self.enable_sa_apn,
            self.seed,
            dilations.join(","),
            self.inter_scale,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
