//! Benchmark machinery: dataset loading, one-pass evaluation, metrics,
//! scale-variation analysis, synthetic sequences, and report files.

pub mod dataset;
pub mod metrics;
pub mod ope;
pub mod report;
pub mod synth;

pub use dataset::{load_sequence, Attribute, SequenceRecord};
pub use metrics::{
    attribute_report, auc, evaluate, iou, success_and_precision_curves, sv_histogram, CurveSet,
    EvalReport, SequenceEval, SvHistogram,
};
pub use ope::{oracle_boxes, run_ope, static_boxes, track_dataset};
pub use synth::{synth_sequence, SynthSpec};
