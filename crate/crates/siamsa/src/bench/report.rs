//! The evaluation report document: a nested key-value text format with
//! arrays, plus flat per-curve CSV side files for plotting, plus the ASCII
//! rendering used by the `report` subcommand.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::dataset::Attribute;
use super::metrics::{
    np_thresholds, success_thresholds, CurveSet, EvalReport, SequenceEval, SvHistogram, SV_BINS,
    SV_BIN_WIDTH, SV_LO,
};
use crate::error::{Error, Result};

pub const REPORT_HEADER: &str = "siamsa-report v1";

fn write_array(out: &mut String, indent: &str, key: &str, values: &[f64]) {
    let joined: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(out, "{indent}{key}: [{}]", joined.join(","));
}

fn write_curveset(out: &mut String, c: &CurveSet) {
    let _ = writeln!(out, "  auc_success: {}", c.auc_success);
    let _ = writeln!(out, "  auc_np: {}", c.auc_np);
    write_array(out, "  ", "success_curve", &c.success);
    write_array(out, "  ", "np_curve", &c.np);
}

/// Serializes a report. The output is deterministic: map-free, with
/// sequences and attributes in their canonical orders and floats in
/// shortest round-trip form.
pub fn report_to_text(r: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{REPORT_HEADER}");
    match r.seed {
        Some(s) => {
            let _ = writeln!(out, "seed: {s}");
        }
        None => {
            let _ = writeln!(out, "seed: none");
        }
    }
    let _ = writeln!(out, "sequences: {}", r.sequences.len());
    let _ = writeln!(out, "overall:");
    write_curveset(&mut out, &r.overall);
    write_array(&mut out, "  ", "sv_histogram", &r.sv_overall.bins);
    let _ = writeln!(out, "  sv_frames: {}", r.sv_overall.frames);
    for seq in &r.sequences {
        let _ = writeln!(out, "sequence {}:", seq.name);
        let _ = writeln!(out, "  frames: {}", seq.frames);
        let tags: Vec<&str> = seq.attributes.iter().map(|a| a.tag()).collect();
        let _ = writeln!(out, "  attributes: [{}]", tags.join(","));
        write_curveset(&mut out, &seq.curves);
        write_array(&mut out, "  ", "sv_histogram", &seq.sv.bins);
        let _ = writeln!(out, "  sv_frames: {}", seq.sv.frames);
    }
    for (attr, count, curves) in &r.attributes {
        let _ = writeln!(out, "attribute {}:", attr.tag());
        let _ = writeln!(out, "  sequences: {count}");
        write_curveset(&mut out, curves);
    }
    out
}

struct Section {
    header: String,
    entries: Vec<(String, String)>,
}

type TopLevelEntries = Vec<(String, String)>;

fn split_sections(text: &str) -> Result<(TopLevelEntries, Vec<Section>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty report".into()))?;
    if header.trim() != REPORT_HEADER {
        return Err(Error::Parse(format!(
            "unsupported report header {header:?}"
        )));
    }
    let mut top = Vec::new();
    let mut sections: Vec<Section> = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let indented = line.starts_with("  ");
        let trimmed = line.trim();
        if indented {
            let section = sections
                .last_mut()
                .ok_or_else(|| Error::Parse(format!("stray indented line {trimmed:?}")))?;
            let (k, v) = trimmed
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("bad entry line {trimmed:?}")))?;
            section.entries.push((k.trim().into(), v.trim().into()));
        } else if let Some(h) = trimmed.strip_suffix(':') {
            sections.push(Section {
                header: h.into(),
                entries: Vec::new(),
            });
        } else {
            let (k, v) = trimmed
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("bad top-level line {trimmed:?}")))?;
            top.push((k.trim().into(), v.trim().into()));
        }
    }
    Ok((top, sections))
}

fn parse_array(value: &str) -> Result<Vec<f64>> {
    let inner = value
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .ok_or_else(|| Error::Parse(format!("expected [array], got {value:?}")))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|e| Error::Parse(format!("bad array value {p:?}: {e}")))
        })
        .collect()
}

fn entry<'a>(section: &'a Section, key: &str) -> Result<&'a str> {
    section
        .entries
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| {
            Error::Parse(format!(
                "section {:?} is missing key {key:?}",
                section.header
            ))
        })
}

fn parse_curveset(section: &Section) -> Result<CurveSet> {
    Ok(CurveSet {
        success: parse_array(entry(section, "success_curve")?)?,
        np: parse_array(entry(section, "np_curve")?)?,
        auc_success: entry(section, "auc_success")?
            .parse()
            .map_err(|e| Error::Parse(format!("bad auc_success: {e}")))?,
        auc_np: entry(section, "auc_np")?
            .parse()
            .map_err(|e| Error::Parse(format!("bad auc_np: {e}")))?,
    })
}

fn parse_sv(section: &Section) -> Result<SvHistogram> {
    Ok(SvHistogram {
        bins: parse_array(entry(section, "sv_histogram")?)?,
        frames: entry(section, "sv_frames")?
            .parse()
            .map_err(|e| Error::Parse(format!("bad sv_frames: {e}")))?,
    })
}

/// Parses a report document written by [`report_to_text`].
pub fn report_from_text(text: &str) -> Result<EvalReport> {
    let (top, sections) = split_sections(text)?;
    let seed = match top.iter().find(|(k, _)| k == "seed") {
        Some((_, v)) if v != "none" => Some(
            v.parse()
                .map_err(|e| Error::Parse(format!("bad seed: {e}")))?,
        ),
        _ => None,
    };
    let mut overall = None;
    let mut sv_overall = None;
    let mut sequences = Vec::new();
    let mut attributes = Vec::new();
    for section in &sections {
        if section.header == "overall" {
            overall = Some(parse_curveset(section)?);
            sv_overall = Some(parse_sv(section)?);
        } else if let Some(name) = section.header.strip_prefix("sequence ") {
            let tags = entry(section, "attributes")?;
            let inner = tags
                .strip_prefix('[')
                .and_then(|v| v.strip_suffix(']'))
                .ok_or_else(|| Error::Parse(format!("bad attributes {tags:?}")))?;
            let attrs: Vec<Attribute> = inner
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(Attribute::parse)
                .collect::<Result<_>>()?;
            sequences.push(SequenceEval {
                name: name.into(),
                frames: entry(section, "frames")?
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad frames: {e}")))?,
                attributes: attrs,
                curves: parse_curveset(section)?,
                sv: parse_sv(section)?,
            });
        } else if let Some(tag) = section.header.strip_prefix("attribute ") {
            attributes.push((
                Attribute::parse(tag)?,
                entry(section, "sequences")?
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad sequences count: {e}")))?,
                parse_curveset(section)?,
            ));
        } else {
            return Err(Error::Parse(format!(
                "unknown section {:?}",
                section.header
            )));
        }
    }
    Ok(EvalReport {
        seed,
        sequences,
        overall: overall.ok_or_else(|| Error::Parse("report has no overall section".into()))?,
        attributes,
        sv_overall: sv_overall
            .ok_or_else(|| Error::Parse("report has no overall sv histogram".into()))?,
    })
}

pub fn save_report(r: &EvalReport, path: &Path) -> Result<()> {
    std::fs::write(path, report_to_text(r))?;
    Ok(())
}

pub fn load_report(path: &Path) -> Result<EvalReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read report {path:?}: {e}")))?;
    report_from_text(&text)
}

fn csv_path(report_path: &Path, suffix: &str) -> PathBuf {
    let mut name = report_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    name.push('.');
    name.push_str(suffix);
    report_path.with_file_name(name)
}

/// Writes the flat plotting CSVs next to the report: `<report>.success.csv`,
/// `<report>.np.csv`, and `<report>.sv.csv`. Columns are the overall
/// aggregate, each sequence, and each present attribute.
pub fn save_curve_csvs(r: &EvalReport, report_path: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (suffix, thresholds, pick) in [
        (
            "success.csv",
            success_thresholds(),
            (|c: &CurveSet| c.success.clone()) as fn(&CurveSet) -> Vec<f64>,
        ),
        ("np.csv", np_thresholds(), |c: &CurveSet| c.np.clone()),
    ] {
        let mut text = String::from("threshold,overall");
        for s in &r.sequences {
            let _ = write!(text, ",seq:{}", s.name);
        }
        for (a, _, _) in &r.attributes {
            let _ = write!(text, ",attr:{}", a.tag());
        }
        text.push('\n');
        let overall = pick(&r.overall);
        let per_seq: Vec<Vec<f64>> = r.sequences.iter().map(|s| pick(&s.curves)).collect();
        let per_attr: Vec<Vec<f64>> = r.attributes.iter().map(|(_, _, c)| pick(c)).collect();
        for (i, t) in thresholds.iter().enumerate() {
            let _ = write!(text, "{t},{}", overall[i]);
            for col in &per_seq {
                let _ = write!(text, ",{}", col[i]);
            }
            for col in &per_attr {
                let _ = write!(text, ",{}", col[i]);
            }
            text.push('\n');
        }
        let path = csv_path(report_path, suffix);
        std::fs::write(&path, text)?;
        written.push(path);
    }

    let mut text = String::from("bin_low,bin_high,overall");
    for s in &r.sequences {
        let _ = write!(text, ",seq:{}", s.name);
    }
    text.push('\n');
    for i in 0..SV_BINS {
        let lo = SV_LO + i as f64 * SV_BIN_WIDTH;
        let hi = lo + SV_BIN_WIDTH;
        let _ = write!(text, "{lo},{hi},{}", r.sv_overall.bins[i]);
        for s in &r.sequences {
            let _ = write!(text, ",{}", s.sv.bins[i]);
        }
        text.push('\n');
    }
    let path = csv_path(report_path, "sv.csv");
    std::fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}

fn bar(frac: f64, width: usize) -> String {
    let filled = (frac.clamp(0.0, 1.0) * width as f64).round() as usize;
    let mut s = String::with_capacity(width);
    for i in 0..width {
        s.push(if i < filled { '#' } else { '.' });
    }
    s
}

/// Plain-text summary of the report.
pub fn render_summary(r: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sequences evaluated: {}", r.sequences.len());
    if let Some(seed) = r.seed {
        let _ = writeln!(out, "seed: {seed}");
    }
    let _ = writeln!(
        out,
        "overall: success AUC {:.4}  |  NP AUC {:.4}",
        r.overall.auc_success, r.overall.auc_np
    );
    out
}

/// ASCII attribute table with AUC bars.
pub fn render_attribute_plots(r: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "attribute  seqs  success-auc  np-auc");
    for (attr, count, curves) in &r.attributes {
        let _ = writeln!(
            out,
            "{:<9} {:>5}  {:.4} {}  {:.4} {}",
            attr.tag(),
            count,
            curves.auc_success,
            bar(curves.auc_success, 20),
            curves.auc_np,
            bar(curves.auc_np, 20),
        );
    }
    if r.attributes.is_empty() {
        let _ = writeln!(out, "(no attributes present in this dataset)");
    }
    out
}

/// ASCII scale-variation histogram (fractions of all frames per
/// `|log2 R|` interval).
pub fn render_sv_histogram(r: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "|log2 R| histogram over {} frames",
        r.sv_overall.frames
    );
    let peak = r
        .sv_overall
        .bins
        .iter()
        .copied()
        .fold(0.0f64, f64::max)
        .max(1e-12);
    for (i, &b) in r.sv_overall.bins.iter().enumerate() {
        let lo = SV_LO + i as f64 * SV_BIN_WIDTH;
        let _ = writeln!(
            out,
            "[{:.1},{:.1})  {:>8.5}  {}",
            lo,
            lo + SV_BIN_WIDTH,
            b,
            bar(b / peak, 30)
        );
    }
    out
}
