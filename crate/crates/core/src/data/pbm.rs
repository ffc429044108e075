//! Binary portable bitmaps (`P4`). Pixel value 1 is black.

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitmap {
    pub width: usize,
    pub height: usize,
    /// Row-major, one byte per pixel.
    pub pixels: Vec<u8>,
}

pub fn write(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != width * height || width == 0 || height == 0 {
        return Err(Error::Argument(format!(
            "{} pixels do not form a {width}×{height} image",
            pixels.len()
        )));
    }
    let mut out = format!("P4\n{width} {height}\n").into_bytes();
    let row_bytes = width.div_ceil(8);
    for r in 0..height {
        let mut row = vec![0u8; row_bytes];
        for c in 0..width {
            if pixels[r * width + c] != 0 {
                row[c / 8] |= 0x80 >> (c % 8);
            }
        }
        out.extend(row);
    }
    Ok(out)
}

pub fn read(bytes: &[u8]) -> Result<Bitmap> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(3);
    while fields.len() < 3 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PBM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P4" {
        return Err(Error::Format(format!("expected P4 magic, found {:?}", fields[0])));
    }
    let dim = |s: &str| {
        s.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::Format(format!("bad PBM dimension {s:?}")))
    };
    let (width, height) = (dim(&fields[1])?, dim(&fields[2])?);
    pos += 1;
    let row_bytes = width.div_ceil(8);
    let body = bytes.get(pos..pos + row_bytes * height).ok_or_else(|| {
        Error::Format(format!("PBM body shorter than {}×{height} pixels", width))
    })?;
    let mut pixels = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            pixels.push((body[r * row_bytes + c / 8] >> (7 - c % 8)) & 1);
        }
    }
    Ok(Bitmap { width, height, pixels })
}

/// Tiles equally sized images into a grid with `cols` columns and a
/// one-pixel blank gutter.
pub fn contact_sheet(images: &[Vec<u8>], width: usize, height: usize, cols: usize) -> Result<Bitmap> {
    if images.is_empty() || cols == 0 {
        return Err(Error::Argument("contact sheet needs images and at least one column".into()));
    }
    let cols = cols.min(images.len());
    let rows = images.len().div_ceil(cols);
    let sw = cols * (width + 1) - 1;
    let sh = rows * (height + 1) - 1;
    let mut pixels = vec![0u8; sw * sh];
    for (k, img) in images.iter().enumerate() {
        if img.len() != width * height {
            return Err(Error::Argument(format!("image {k} is not {width}×{height}")));
        }
        let (oy, ox) = ((k / cols) * (height + 1), (k % cols) * (width + 1));
        for r in 0..height {
            for c in 0..width {
                pixels[(oy + r) * sw + ox + c] = img[r * width + c];
            }
        }
    }
    Ok(Bitmap {
        width: sw,
        height: sh,
        pixels,
    })
}
