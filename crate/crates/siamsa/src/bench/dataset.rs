//! Dataset loading: one directory per sequence with an `img/` folder,
//! `groundtruth_rect.txt` (CSV `x,y,w,h`, one line per frame, 0-based pixel
//! units), and `attributes.txt` (one tag per line).

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::{Tensor, CHW};
use crate::tracker::BBox;

/// The 11-attribute annotation vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Attribute {
    /// Aspect ratio change.
    Arc,
    /// Out of view.
    Ov,
    /// Background clutter.
    Bc,
    /// Fast motion.
    Fm,
    /// Low illumination.
    Li,
    /// Object blur.
    Ob,
    /// Partial occlusion.
    Poc,
    /// Scale variation.
    Sv,
    /// Similar object.
    Sob,
    /// Viewpoint change.
    Vc,
    /// Aerial manipulator attack.
    UamA,
}

impl Attribute {
    pub const ALL: [Attribute; 11] = [
        Attribute::Arc,
        Attribute::Ov,
        Attribute::Bc,
        Attribute::Fm,
        Attribute::Li,
        Attribute::Ob,
        Attribute::Poc,
        Attribute::Sv,
        Attribute::Sob,
        Attribute::Vc,
        Attribute::UamA,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Attribute::Arc => "ARC",
            Attribute::Ov => "OV",
            Attribute::Bc => "BC",
            Attribute::Fm => "FM",
            Attribute::Li => "LI",
            Attribute::Ob => "OB",
            Attribute::Poc => "POC",
            Attribute::Sv => "SV",
            Attribute::Sob => "SOB",
            Attribute::Vc => "VC",
            Attribute::UamA => "UAM-A",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Attribute::ALL
            .iter()
            .copied()
            .find(|a| a.tag() == s)
            .ok_or_else(|| {
                Error::Dataset(format!(
                    "unknown attribute tag {s:?}; expected one of {:?}",
                    Attribute::ALL.map(|a| a.tag())
                ))
            })
    }
}

impl std::fmt::Display for Attribute {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// A loaded benchmark sequence: ordered frame paths, one ground-truth box
/// per frame, and the attribute tags.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    pub name: String,
    pub frames: Vec<PathBuf>,
    pub ground_truth: Vec<BBox>,
    pub attributes: Vec<Attribute>,
}

impl SequenceRecord {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn has_attribute(&self, a: Attribute) -> bool {
        self.attributes.contains(&a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Dataset(format!("sequence {}: no frames", self.name)));
        }
        if self.frames.len() != self.ground_truth.len() {
            return Err(Error::Dataset(format!(
                "sequence {}: {} frames but {} annotation lines",
                self.name,
                self.frames.len(),
                self.ground_truth.len()
            )));
        }
        let first = &self.ground_truth[0];
        if first.w <= 0.0 || first.h <= 0.0 {
            return Err(Error::Dataset(format!(
                "sequence {}: first ground-truth box has empty area",
                self.name
            )));
        }
        Ok(())
    }
}

/// Parses one `x,y,w,h` annotation line.
pub fn parse_box_line(line: &str) -> Result<BBox> {
    let parts: Vec<&str> = line.trim().split(',').collect();
    if parts.len() != 4 {
        return Err(Error::Dataset(format!(
            "annotation line {line:?} does not have four comma-separated fields"
        )));
    }
    let mut vals = [0.0f64; 4];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p
            .trim()
            .parse()
            .map_err(|e| Error::Dataset(format!("bad number in {line:?}: {e}")))?;
    }
    Ok(BBox::new(vals[0], vals[1], vals[2], vals[3]))
}

/// Loads a sequence directory. Frames are the `jpg`/`jpeg`/`png` files in
/// `<dir>/img`, sorted by filename (zero-padded numeric names sort
/// correctly).
pub fn load_sequence(dir: &Path) -> Result<SequenceRecord> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| Error::Dataset(format!("sequence path {dir:?} has no name")))?;
    let img_dir = dir.join("img");
    if !img_dir.is_dir() {
        return Err(Error::Dataset(format!(
            "sequence {name}: missing image subfolder {img_dir:?}"
        )));
    }
    let mut frames: Vec<PathBuf> = std::fs::read_dir(&img_dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("jpg") | Some("jpeg") | Some("png")
            )
        })
        .collect();
    frames.sort();

    let gt_path = dir.join("groundtruth_rect.txt");
    let gt_text = std::fs::read_to_string(&gt_path)
        .map_err(|e| Error::Dataset(format!("sequence {name}: cannot read {gt_path:?}: {e}")))?;
    let ground_truth: Vec<BBox> = gt_text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(parse_box_line)
        .collect::<Result<_>>()?;

    let attr_path = dir.join("attributes.txt");
    let attr_text = std::fs::read_to_string(&attr_path)
        .map_err(|e| Error::Dataset(format!("sequence {name}: cannot read {attr_path:?}: {e}")))?;
    let mut attributes: Vec<Attribute> = attr_text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(Attribute::parse)
        .collect::<Result<_>>()?;
    attributes.sort();
    attributes.dedup();

    let record = SequenceRecord {
        name,
        frames,
        ground_truth,
        attributes,
    };
    record.validate()?;
    Ok(record)
}

/// Lists the sequence directories under a dataset root, sorted by name.
pub fn list_sequences(root: &Path) -> Result<Vec<PathBuf>> {
    if !root.is_dir() {
        return Err(Error::Dataset(format!(
            "dataset root {root:?} is not a directory"
        )));
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.is_dir() && p.join("groundtruth_rect.txt").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Dataset(format!(
            "dataset root {root:?} contains no sequence directories"
        )));
    }
    Ok(dirs)
}

/// Loads a frame image into a `3 x H x W` tensor with values in `[0, 1]`.
pub fn load_frame(path: &Path) -> Result<Tensor> {
    let img = image::open(path)
        .map_err(|e| Error::Dataset(format!("cannot decode frame {path:?}: {e}")))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut data = vec![0.0f64; 3 * h * w];
    for (y, row) in img.rows().enumerate() {
        for (x, px) in row.enumerate() {
            for c in 0..3 {
                data[(c * h + y) * w + x] = px.0[c] as f64 / 255.0;
            }
        }
    }
    Tensor::new(&CHW, &[3, h, w], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_line_parses_plain_csv() {
        let b = parse_box_line("10,20,30,40").unwrap();
        assert_eq!(b, BBox::new(10.0, 20.0, 30.0, 40.0));
        assert!(parse_box_line("1,2,3").is_err());
        assert!(parse_box_line("a,b,c,d").is_err());
    }

    #[test]
    fn attribute_vocabulary_round_trips() {
        for a in Attribute::ALL {
            assert_eq!(Attribute::parse(a.tag()).unwrap(), a);
        }
        assert!(Attribute::parse("XYZ").is_err());
    }

    #[test]
    fn three_frame_fixture_loads() {
        let dir = tempfile::tempdir().unwrap();
        let seq = dir.path().join("seq_a");
        std::fs::create_dir_all(seq.join("img")).unwrap();
        for i in 1..=3 {
            let img = image::RgbImage::from_pixel(8, 6, image::Rgb([100, 150, 200]));
            img.save(seq.join("img").join(format!("{i:04}.png")))
                .unwrap();
        }
        std::fs::write(
            seq.join("groundtruth_rect.txt"),
            "1,2,3,4\n2,3,3,4\n3,4,3,4\n",
        )
        .unwrap();
        std::fs::write(seq.join("attributes.txt"), "SV\nPOC\n").unwrap();
        let rec = load_sequence(&seq).unwrap();
        assert_eq!(rec.len(), 3);
        assert_eq!(rec.ground_truth[0], BBox::new(1.0, 2.0, 3.0, 4.0));
        assert_eq!(rec.attributes, vec![Attribute::Poc, Attribute::Sv]);
        let frame = load_frame(&rec.frames[0]).unwrap();
        assert_eq!(frame.shape(), &[3, 6, 8]);
        assert!((frame.at3(0, 0, 0) - 100.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn count_mismatch_names_both_counts() {
        let dir = tempfile::tempdir().unwrap();
        let seq = dir.path().join("seq_b");
        std::fs::create_dir_all(seq.join("img")).unwrap();
        for i in 1..=5 {
            let img = image::RgbImage::from_pixel(4, 4, image::Rgb([0, 0, 0]));
            img.save(seq.join("img").join(format!("{i:04}.png")))
                .unwrap();
        }
        std::fs::write(
            seq.join("groundtruth_rect.txt"),
            "1,1,2,2\n1,1,2,2\n1,1,2,2\n1,1,2,2\n",
        )
        .unwrap();
        std::fs::write(seq.join("attributes.txt"), "").unwrap();
        let err = load_sequence(&seq).unwrap_err().to_string();
        assert!(err.contains('5') && err.contains('4'), "got: {err}");
    }

    #[test]
    fn unknown_attribute_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let seq = dir.path().join("seq_c");
        std::fs::create_dir_all(seq.join("img")).unwrap();
        let img = image::RgbImage::from_pixel(4, 4, image::Rgb([0, 0, 0]));
        img.save(seq.join("img").join("0001.png")).unwrap();
        std::fs::write(seq.join("groundtruth_rect.txt"), "1,1,2,2\n").unwrap();
        std::fs::write(seq.join("attributes.txt"), "WOBBLE\n").unwrap();
        assert!(load_sequence(&seq).is_err());
    }
}
