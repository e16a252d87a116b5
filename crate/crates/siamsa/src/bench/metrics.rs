//! Tracking metrics: IoU, success and normalized-precision curves with
//! their AUCs, and the scale-variation histogram.
//!
//! Boundary conventions, stated once and used everywhere: success counts a
//! frame at threshold `t` iff `IoU > t` (strict); normalized precision
//! counts it iff the normalized centre distance is `<= t`; a frame counts
//! as scale variation iff `|log2 R| > 1` (strict), and `|log2 R| >= 2.5`
//! falls outside the histogram.

use super::dataset::{Attribute, SequenceRecord};
use crate::error::{Error, Result};
use crate::tracker::BBox;

/// Success thresholds `0, 0.01, ..., 1.0`.
pub fn success_thresholds() -> Vec<f64> {
    (0..=100).map(|i| i as f64 * 0.01).collect()
}

/// Normalized-precision thresholds `0, 0.005, ..., 0.5`.
pub fn np_thresholds() -> Vec<f64> {
    (0..=100).map(|i| i as f64 * 0.005).collect()
}

/// Intersection over union of two non-negative-extent boxes; 0 when the
/// union is empty.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Centre distance normalized by the ground-truth box extents; infinite
/// when the ground truth has no extent (the frame then fails every
/// threshold).
pub fn normalized_center_distance(pred: &BBox, gt: &BBox) -> f64 {
    if gt.w <= 0.0 || gt.h <= 0.0 {
        return f64::INFINITY;
    }
    let (pcx, pcy) = pred.center();
    let (gcx, gcy) = gt.center();
    let dx = (pcx - gcx) / gt.w;
    let dy = (pcy - gcy) / gt.h;
    (dx * dx + dy * dy).sqrt()
}

/// Success and normalized-precision curves over the standard threshold
/// grids.
pub fn success_and_precision_curves(pred: &[BBox], gt: &[BBox]) -> Result<(Vec<f64>, Vec<f64>)> {
    if pred.len() != gt.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} ground-truth boxes",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    let n = pred.len() as f64;
    let ious: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| iou(p, g)).collect();
    let dists: Vec<f64> = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| normalized_center_distance(p, g))
        .collect();
    let success = success_thresholds()
        .iter()
        .map(|&t| ious.iter().filter(|&&v| v > t).count() as f64 / n)
        .collect();
    let np = np_thresholds()
        .iter()
        .map(|&t| dists.iter().filter(|&&v| v <= t).count() as f64 / n)
        .collect();
    Ok((success, np))
}

/// Trapezoidal area under a sampled curve, normalized by the threshold
/// range so a constant 1 integrates to 1.
pub fn auc(curve: &[f64], thresholds: &[f64]) -> Result<f64> {
    if curve.len() < 2 {
        return Err(Error::InvalidArgument(
            "auc needs at least two samples".into(),
        ));
    }
    if curve.len() != thresholds.len() {
        return Err(Error::InvalidArgument(format!(
            "{} curve samples on {} thresholds",
            curve.len(),
            thresholds.len()
        )));
    }
    let mut area = 0.0;
    for i in 0..curve.len() - 1 {
        area += (curve[i] + curve[i + 1]) / 2.0 * (thresholds[i + 1] - thresholds[i]);
    }
    let range = thresholds[thresholds.len() - 1] - thresholds[0];
    if range <= 0.0 {
        return Err(Error::InvalidArgument("degenerate threshold range".into()));
    }
    Ok(area / range)
}

pub const SV_BINS: usize = 15;
pub const SV_BIN_WIDTH: f64 = 0.1;
pub const SV_LO: f64 = 1.0;
pub const SV_HI: f64 = 2.5;

/// Scale-variation summary of one ground-truth track: `ratios[t]` is
/// `|log2(area_t / area_0)|`, `bins` the fraction of frames falling in each
/// of the 15 histogram intervals `[1.0, 1.1) ... [2.4, 2.5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvHistogram {
    pub bins: Vec<f64>,
    pub frames: usize,
}

impl SvHistogram {
    pub fn empty() -> Self {
        SvHistogram {
            bins: vec![0.0; SV_BINS],
            frames: 0,
        }
    }

    /// Pools several histograms by total frame count.
    pub fn pooled(parts: &[&SvHistogram]) -> SvHistogram {
        let total: usize = parts.iter().map(|p| p.frames).sum();
        if total == 0 {
            return SvHistogram::empty();
        }
        let mut bins = vec![0.0; SV_BINS];
        for p in parts {
            for (b, v) in bins.iter_mut().zip(&p.bins) {
                *b += v * p.frames as f64;
            }
        }
        for b in &mut bins {
            *b /= total as f64;
        }
        SvHistogram {
            bins,
            frames: total,
        }
    }
}

/// Per-frame `|log2 R|` values relative to the first box's area.
pub fn sv_ratios(gt: &[BBox]) -> Result<Vec<f64>> {
    let first = gt
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty ground truth".into()))?;
    let a0 = first.area();
    if a0 <= 0.0 {
        return Err(Error::InvalidArgument(
            "initial ground-truth box has empty area".into(),
        ));
    }
    Ok(gt.iter().map(|b| (b.area() / a0).log2().abs()).collect())
}

/// True iff any frame's area ratio leaves the `[0.5, 2]` band, i.e.
/// `|log2 R| > 1` strictly.
pub fn has_scale_variation(gt: &[BBox]) -> Result<bool> {
    Ok(sv_ratios(gt)?.iter().any(|&v| v > 1.0))
}

/// Histogram of `|log2 R|` over `[1.0, 2.5)` in steps of 0.1, as fractions
/// of the total frame count. Exactly 1.0 is not scale variation (strict
/// inequality); at or above 2.5 is dropped.
pub fn sv_histogram(gt: &[BBox]) -> Result<SvHistogram> {
    let ratios = sv_ratios(gt)?;
    let mut bins = vec![0.0; SV_BINS];
    for v in &ratios {
        if *v > SV_LO && *v < SV_HI {
            let idx = ((v - SV_LO) / SV_BIN_WIDTH).floor() as usize;
            bins[idx.min(SV_BINS - 1)] += 1.0;
        }
    }
    let n = ratios.len() as f64;
    for b in &mut bins {
        *b /= n;
    }
    Ok(SvHistogram {
        bins,
        frames: ratios.len(),
    })
}

/// Success/NP curves with their AUCs for one prediction/ground-truth pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub success: Vec<f64>,
    pub np: Vec<f64>,
    pub auc_success: f64,
    pub auc_np: f64,
}

impl CurveSet {
    pub fn from_boxes(pred: &[BBox], gt: &[BBox]) -> Result<Self> {
        let (success, np) = success_and_precision_curves(pred, gt)?;
        let auc_success = auc(&success, &success_thresholds())?;
        let auc_np = auc(&np, &np_thresholds())?;
        Ok(CurveSet {
            success,
            np,
            auc_success,
            auc_np,
        })
    }

    /// Pointwise mean of curves; AUCs are the means of the member AUCs (the
    /// averaging convention used everywhere in this harness).
    pub fn mean_of(sets: &[&CurveSet]) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidArgument("mean of zero curve sets".into()));
        }
        let n = sets.len() as f64;
        let len_s = sets[0].success.len();
        let len_p = sets[0].np.len();
        let mut success = vec![0.0; len_s];
        let mut np = vec![0.0; len_p];
        let mut auc_s = 0.0;
        let mut auc_p = 0.0;
        for set in sets {
            if set.success.len() != len_s || set.np.len() != len_p {
                return Err(Error::InvalidArgument("curve length mismatch".into()));
            }
            for (a, b) in success.iter_mut().zip(&set.success) {
                *a += b;
            }
            for (a, b) in np.iter_mut().zip(&set.np) {
                *a += b;
            }
            auc_s += set.auc_success;
            auc_p += set.auc_np;
        }
        for a in success.iter_mut().chain(np.iter_mut()) {
            *a /= n;
        }
        Ok(CurveSet {
            success,
            np,
            auc_success: auc_s / n,
            auc_np: auc_p / n,
        })
    }
}

/// One evaluated sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEval {
    pub name: String,
    pub frames: usize,
    pub attributes: Vec<Attribute>,
    pub curves: CurveSet,
    pub sv: SvHistogram,
}

/// Full evaluation output: per-sequence results (sorted by name), the
/// overall aggregate, per-attribute aggregates for attributes that occur,
/// and the frame-pooled scale-variation histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub seed: Option<u64>,
    pub sequences: Vec<SequenceEval>,
    pub overall: CurveSet,
    pub attributes: Vec<(Attribute, usize, CurveSet)>,
    pub sv_overall: SvHistogram,
}

/// Mean curves and AUCs over the sequences carrying each attribute;
/// attributes with no sequences are absent from the output.
pub fn attribute_report(evals: &[SequenceEval]) -> Result<Vec<(Attribute, usize, CurveSet)>> {
    let mut out = Vec::new();
    for attr in Attribute::ALL {
        let members: Vec<&CurveSet> = evals
            .iter()
            .filter(|e| e.attributes.contains(&attr))
            .map(|e| &e.curves)
            .collect();
        if members.is_empty() {
            continue;
        }
        out.push((attr, members.len(), CurveSet::mean_of(&members)?));
    }
    Ok(out)
}

/// Evaluates predictions against their records and assembles the report.
/// `records` and `predictions` pair up by index; records need not be
/// pre-sorted.
pub fn evaluate(
    records: &[SequenceRecord],
    predictions: &[Vec<BBox>],
    seed: Option<u64>,
) -> Result<EvalReport> {
    if records.len() != predictions.len() {
        return Err(Error::InvalidArgument(format!(
            "{} records but {} prediction lists",
            records.len(),
            predictions.len()
        )));
    }
    if records.is_empty() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].name.cmp(&records[b].name));
    let mut sequences = Vec::with_capacity(records.len());
    for idx in order {
        let rec = &records[idx];
        let pred = &predictions[idx];
        if pred.len() != rec.ground_truth.len() {
            return Err(Error::InvalidArgument(format!(
                "sequence {}: {} predictions for {} frames",
                rec.name,
                pred.len(),
                rec.ground_truth.len()
            )));
        }
        sequences.push(SequenceEval {
            name: rec.name.clone(),
            frames: rec.len(),
            attributes: rec.attributes.clone(),
            curves: CurveSet::from_boxes(pred, &rec.ground_truth)?,
            sv: sv_histogram(&rec.ground_truth)?,
        });
    }
    let overall = CurveSet::mean_of(&sequences.iter().map(|s| &s.curves).collect::<Vec<_>>())?;
    let attributes = attribute_report(&sequences)?;
    let sv_overall = SvHistogram::pooled(&sequences.iter().map(|s| &s.sv).collect::<Vec<_>>());
    Ok(EvalReport {
        seed,
        sequences,
        overall,
        attributes,
        sv_overall,
    })
}
