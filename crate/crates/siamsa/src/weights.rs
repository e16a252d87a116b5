//! Named parameter arrays, their seeded initialization, and the text-based
//! weights file.
//!
//! The file format is line-oriented:
//!
//! ```text
//! siamsa-weights v1
//! array <name> <ndim> <d0> <d1> ...
//! <product(dims) whitespace-separated values, free to span lines>
//! array ...
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! save/load cycle is lossless.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const WEIGHTS_HEADER: &str = "siamsa-weights v1";

/// Deterministic uniform sampler; a thin wrapper so every init site and test
/// draws from the same stream type.
pub struct SeededUniform {
    rng: ChaCha8Rng,
}

impl SeededUniform {
    pub fn new(seed: u64) -> Self {
        SeededUniform {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.gen()
    }
}

/// Seeded sampler for unit tests; kept here so test code across modules uses
/// one stream construction.
pub fn test_rng(seed: u64) -> SeededUniform {
    SeededUniform::new(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(seed))
}

/// Ordered collection of named arrays. Iteration order is the insertion
/// order used by the model builder, so files are written deterministically.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightsBank {
    entries: Vec<(String, Entry)>,
    index: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl WeightsBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, shape: &[usize], values: Vec<f64>) -> Result<()> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "array {name}: shape {shape:?} implies {expected} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invariant(format!("array {name}: non-finite value")));
        }
        if self.index.contains_key(name) {
            return Err(Error::InvalidArgument(format!("duplicate array {name}")));
        }
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push((
            name.to_string(),
            Entry {
                shape: shape.to_vec(),
                values,
            },
        ));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<(&[usize], &[f64])> {
        self.index
            .get(name)
            .map(|&i| {
                let e = &self.entries[i].1;
                (e.shape.as_slice(), e.values.as_slice())
            })
            .ok_or_else(|| Error::Parse(format!("weights file is missing array {name}")))
    }

    /// Fetches an array and checks its shape in one step.
    pub fn take(&self, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
        let (got_shape, values) = self.get(name)?;
        if got_shape != shape {
            return Err(Error::ShapeMismatch(format!(
                "array {name}: expected shape {shape:?}, file has {got_shape:?}"
            )));
        }
        Ok(values.to_vec())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{WEIGHTS_HEADER}")?;
        for (name, e) in &self.entries {
            write!(w, "array {name} {}", e.shape.len())?;
            for d in &e.shape {
                write!(w, " {d}")?;
            }
            writeln!(w)?;
            for (i, v) in e.values.iter().enumerate() {
                if i > 0 {
                    w.write_all(if i % 8 == 0 { b"\n" } else { b" " })?;
                }
                write!(w, "{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty weights file".into()))??;
        if header.trim() != WEIGHTS_HEADER {
            return Err(Error::Parse(format!(
                "unsupported weights header {header:?}, expected {WEIGHTS_HEADER:?}"
            )));
        }
        let mut bank = WeightsBank::new();
        let mut pending: Option<(String, Vec<usize>, Vec<f64>)> = None;
        for line in lines {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix("array ") {
                if let Some((name, shape, values)) = pending.take() {
                    bank.finish_entry(name, shape, values)?;
                }
                let mut parts = rest.split_whitespace();
                let name = parts
                    .next()
                    .ok_or_else(|| Error::Parse("array line without a name".into()))?
                    .to_string();
                let ndim: usize = parts
                    .next()
                    .ok_or_else(|| Error::Parse(format!("array {name}: missing ndim")))?
                    .parse()
                    .map_err(|e| Error::Parse(format!("array {name}: bad ndim: {e}")))?;
                let shape: Vec<usize> = parts
                    .map(|p| {
                        p.parse()
                            .map_err(|e| Error::Parse(format!("array {name}: bad dim: {e}")))
                    })
                    .collect::<Result<_>>()?;
                if shape.len() != ndim {
                    return Err(Error::Parse(format!(
                        "array {name}: declared {ndim} dims, found {}",
                        shape.len()
                    )));
                }
                pending = Some((name, shape, Vec::new()));
            } else {
                let (name, _, values) = pending
                    .as_mut()
                    .ok_or_else(|| Error::Parse("values before any array line".into()))?;
                for tok in trimmed.split_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|e| Error::Parse(format!("array {name}: bad value: {e}")))?;
                    values.push(v);
                }
            }
        }
        if let Some((name, shape, values)) = pending.take() {
            bank.finish_entry(name, shape, values)?;
        }
        Ok(bank)
    }

    fn finish_entry(&mut self, name: String, shape: Vec<usize>, values: Vec<f64>) -> Result<()> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::Parse(format!(
                "array {name}: expected {expected} values, found {}",
                values.len()
            )));
        }
        self.insert(&name, &shape, values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)
            .map_err(|e| Error::Parse(format!("cannot open weights file {path:?}: {e}")))?;
        Self::read_from(f)
    }
}

/// Uniform init in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, the usual default
/// for conv layers.
pub fn init_conv(rng: &mut SeededUniform, count: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    (0..count)
        .map(|_| rng.next_uniform(-bound, bound))
        .collect()
}
