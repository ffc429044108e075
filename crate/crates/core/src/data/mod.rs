//! Binary datasets: text and PBM ingestion, random patterns, leaf orderings.

mod ordering;
pub mod pbm;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use ordering::{Ordering, OrderingDescriptor, OrderingKind};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageShape {
    Flat { len: usize },
    Image { height: usize, width: usize },
}

impl ImageShape {
    pub fn len(&self) -> usize {
        match *self {
            ImageShape::Flat { len } => len,
            ImageShape::Image { height, width } => height * width,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(height, width)`; a flat vector is drawn as one row.
    pub fn dims(&self) -> (usize, usize) {
        match *self {
            ImageShape::Flat { len } => (1, len),
            ImageShape::Image { height, width } => (height, width),
        }
    }
}

/// Rows of binary pixels; the empirical distribution puts `1/|T|` on each.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryDataset {
    pub samples: Vec<Vec<u8>>,
    pub shape: ImageShape,
    pub name: String,
}

impl BinaryDataset {
    pub fn new(samples: Vec<Vec<u8>>, shape: ImageShape, name: impl Into<String>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if s.len() != shape.len() {
                return Err(Error::Format(format!(
                    "row {} has {} pixels, expected {}",
                    i + 1,
                    s.len(),
                    shape.len()
                )));
            }
            if let Some(p) = s.iter().position(|&x| x > 1) {
                return Err(Error::Format(format!("row {} pixel {p} is not binary", i + 1)));
            }
        }
        Ok(Self {
            samples,
            shape,
            name: name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// First `k` rows.
    pub fn truncated(mut self, k: usize) -> Self {
        self.samples.truncate(k);
        self
    }
}

fn parse_token(tok: &str, line: usize, column: usize) -> Result<u8> {
    let bad = |message: String| Error::Parse { line, column, message };
    let v: f64 = tok
        .parse()
        .map_err(|_| bad(format!("token {tok:?} is not a number")))?;
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(bad(format!("token {tok:?} is neither 0 nor 1")))
    }
}

/// Parses whitespace-separated 0/1 rows (`"1"` and `"1.0000"` both accepted).
/// Rows of 784 values are read as 28×28 images, other lengths as flat
/// vectors.
pub fn parse_binarized_text(text: &str, name: &str) -> Result<BinaryDataset> {
    let mut samples = Vec::new();
    let mut width = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let row = raw
            .split_whitespace()
            .enumerate()
            .map(|(c, tok)| parse_token(tok, line, c + 1))
            .collect::<Result<Vec<u8>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Format(format!(
                    "line {line} has {} values, earlier lines have {w}",
                    row.len()
                )))
            }
            _ => {}
        }
        samples.push(row);
    }
    let w = width.ok_or_else(|| Error::Format(format!("{name}: no data rows")))?;
    let shape = if w == 784 {
        ImageShape::Image { height: 28, width: 28 }
    } else {
        ImageShape::Flat { len: w }
    };
    BinaryDataset::new(samples, shape, name)
}

/// One line per sample, pixels as space-separated `0`/`1`.
pub fn to_binarized_text(samples: &[Vec<u8>]) -> String {
    let mut out = String::with_capacity(samples.iter().map(|s| 2 * s.len()).sum());
    for s in samples {
        for (i, &x) in s.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push(if x == 0 { '0' } else { '1' });
        }
        out.push('\n');
    }
    out
}

pub fn load_binarized_text(path: impl AsRef<Path>) -> Result<BinaryDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_binarized_text(&text, &path.display().to_string())
}

/// Every `*.pbm` file of a directory, in file-name order. All images must
/// share one size.
pub fn load_pbm_dir(dir: impl AsRef<Path>) -> Result<BinaryDataset> {
    let dir = dir.as_ref();
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pbm"))
        .collect();
    files.sort();
    let mut samples = Vec::with_capacity(files.len());
    let mut dims = None;
    for f in &files {
        let bytes = std::fs::read(f).map_err(|e| Error::io(f, e))?;
        let img = pbm::read(&bytes)?;
        match dims {
            None => dims = Some((img.height, img.width)),
            Some(d) if d != (img.height, img.width) => {
                return Err(Error::Format(format!(
                    "{} is {}×{}, earlier images are {}×{}",
                    f.display(),
                    img.height,
                    img.width,
                    d.0,
                    d.1
                )))
            }
            _ => {}
        }
        samples.push(img.pixels);
    }
    let (height, width) = dims.ok_or_else(|| Error::Format(format!("no .pbm files in {}", dir.display())))?;
    BinaryDataset::new(samples, ImageShape::Image { height, width }, dir.display().to_string())
}

/// Fair-coin pixels from a seeded generator. With `distinct`, repeated rows
/// are redrawn.
pub fn gen_random_patterns(n_pixels: usize, count: usize, seed: u64, distinct: bool) -> Result<BinaryDataset> {
    if n_pixels == 0 || count == 0 {
        return Err(Error::Argument("need at least one pixel and one pattern".into()));
    }
    if distinct && n_pixels < 64 && count as u128 > 1u128 << n_pixels {
        return Err(Error::Argument(format!(
            "{count} distinct patterns do not exist on {n_pixels} pixels"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    let mut samples = Vec::with_capacity(count);
    while samples.len() < count {
        let row: Vec<u8> = (0..n_pixels).map(|_| rng.gen_range(0..2u8)).collect();
        if distinct && !seen.insert(row.clone()) {
            continue;
        }
        samples.push(row);
    }
    BinaryDataset::new(
        samples,
        ImageShape::Flat { len: n_pixels },
        format!("random-{n_pixels}x{count}-seed{seed}"),
    )
}
