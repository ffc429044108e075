use serde::{Deserialize, Serialize};

use super::{BinaryDataset, ImageShape};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderingKind {
    /// Row-major pixels on a chain of leaves, padded at both ends.
    Raster1d,
    /// Square power-of-two canvas read in Z-order, padded on the border.
    Hierarchical2d,
}

/// Serializable summary from which an [`Ordering`] is rebuilt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingDescriptor {
    pub kind: OrderingKind,
    pub raw_shape: ImageShape,
    pub padded: usize,
    pub horizontal_first: bool,
}

/// Bijection from raw pixels onto the non-padding leaf slots.
#[derive(Clone, Debug, PartialEq)]
pub struct Ordering {
    desc: OrderingDescriptor,
    slot_of_pixel: Vec<usize>,
    padding: Vec<usize>,
}

fn interleave(row: usize, col: usize, bits: u32, horizontal_first: bool) -> usize {
    let (lo, hi) = if horizontal_first { (col, row) } else { (row, col) };
    (0..bits).fold(0, |acc, b| acc | (((lo >> b) & 1) << (2 * b)) | (((hi >> b) & 1) << (2 * b + 1)))
}

impl Ordering {
    pub fn new(kind: OrderingKind, raw_shape: ImageShape) -> Result<Self> {
        Self::build(kind, raw_shape, true)
    }

    pub(crate) fn build(kind: OrderingKind, raw_shape: ImageShape, horizontal_first: bool) -> Result<Self> {
        let n = raw_shape.len();
        if n == 0 {
            return Err(Error::Argument("empty image".into()));
        }
        let (padded, slot_of_pixel) = match kind {
            OrderingKind::Raster1d => {
                let padded = n.next_power_of_two().max(2);
                let left = (padded - n) / 2;
                (padded, (0..n).map(|i| left + i).collect::<Vec<_>>())
            }
            OrderingKind::Hierarchical2d => {
                let ImageShape::Image { height, width } = raw_shape else {
                    return Err(Error::Argument("two-dimensional ordering needs image data".into()));
                };
                let side = height.max(width).next_power_of_two().max(2);
                let bits = side.trailing_zeros();
                let top = (side - height) / 2;
                let left = (side - width) / 2;
                let slots = (0..height)
                    .flat_map(|r| (0..width).map(move |c| (r, c)))
                    .map(|(r, c)| interleave(r + top, c + left, bits, horizontal_first))
                    .collect();
                (side * side, slots)
            }
        };
        let mut used = vec![false; padded];
        for &s in &slot_of_pixel {
            used[s] = true;
        }
        let padding = (0..padded).filter(|&s| !used[s]).collect();
        Ok(Self {
            desc: OrderingDescriptor {
                kind,
                raw_shape,
                padded,
                horizontal_first,
            },
            slot_of_pixel,
            padding,
        })
    }

    pub fn from_descriptor(d: &OrderingDescriptor) -> Result<Self> {
        let o = Self::build(d.kind, d.raw_shape, d.horizontal_first)?;
        if o.desc.padded != d.padded {
            return Err(Error::Format(format!(
                "ordering descriptor claims {} slots, layout gives {}",
                d.padded, o.desc.padded
            )));
        }
        Ok(o)
    }

    pub fn descriptor(&self) -> &OrderingDescriptor {
        &self.desc
    }

    pub fn kind(&self) -> OrderingKind {
        self.desc.kind
    }

    pub fn padded_len(&self) -> usize {
        self.desc.padded
    }

    pub fn raw_shape(&self) -> ImageShape {
        self.desc.raw_shape
    }

    /// Leaf slot of each raw pixel.
    pub fn slots(&self) -> &[usize] {
        &self.slot_of_pixel
    }

    /// Slots that always hold 0.
    pub fn padding(&self) -> &[usize] {
        &self.padding
    }

    pub fn apply_one(&self, raw: &[u8]) -> Result<Vec<u8>> {
        if raw.len() != self.slot_of_pixel.len() {
            return Err(Error::Argument(format!(
                "sample has {} pixels, ordering expects {}",
                raw.len(),
                self.slot_of_pixel.len()
            )));
        }
        let mut out = vec![0u8; self.desc.padded];
        for (&s, &v) in self.slot_of_pixel.iter().zip(raw) {
            out[s] = v;
        }
        Ok(out)
    }

    pub fn apply(&self, data: &BinaryDataset) -> Result<Vec<Vec<u8>>> {
        if data.shape != self.desc.raw_shape {
            return Err(Error::Argument(format!(
                "dataset shape {:?} does not match ordering shape {:?}",
                data.shape, self.desc.raw_shape
            )));
        }
        data.samples.iter().map(|s| self.apply_one(s)).collect()
    }

    /// Raw image from a leaf-ordered vector, dropping padding slots.
    pub fn invert(&self, leaves: &[u8]) -> Result<Vec<u8>> {
        if leaves.len() != self.desc.padded {
            return Err(Error::Argument(format!(
                "vector has {} slots, ordering has {}",
                leaves.len(),
                self.desc.padded
            )));
        }
        Ok(self.slot_of_pixel.iter().map(|&s| leaves[s]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(h: usize, w: usize) -> ImageShape {
        ImageShape::Image { height: h, width: w }
    }

    #[test]
    fn small_cases() {
        let o = Ordering::new(OrderingKind::Hierarchical2d, img(2, 2)).unwrap();
        assert_eq!(o.slots(), &[0, 1, 2, 3]);
        let v = Ordering::build(OrderingKind::Hierarchical2d, img(2, 2), false).unwrap();
        assert_eq!(v.slots(), &[0, 2, 1, 3]);

        let r = Ordering::new(OrderingKind::Raster1d, ImageShape::Flat { len: 14 }).unwrap();
        assert_eq!(r.padded_len(), 16);
        assert_eq!(r.padding(), &[0, 15]);
        let r = Ordering::new(OrderingKind::Raster1d, ImageShape::Flat { len: 13 }).unwrap();
        assert_eq!(r.padding(), &[0, 14, 15]);

        let m = Ordering::new(OrderingKind::Hierarchical2d, img(28, 28)).unwrap();
        assert_eq!(m.padded_len(), 1024);
        let ones = m.apply_one(&[1; 784]).unwrap();
        assert_eq!(ones.iter().filter(|&&x| x == 1).count(), 784);
        // two-pixel border on every side of the 32×32 canvas
        let side = 32;
        let mut canvas = vec![0u8; side * side];
        for &s in m.slots() {
            let (mut r, mut c) = (0, 0);
            for b in 0..5 {
                c |= ((s >> (2 * b)) & 1) << b;
                r |= ((s >> (2 * b + 1)) & 1) << b;
            }
            canvas[r * side + c] = 1;
        }
        for r in 0..side {
            for c in 0..side {
                let inside = (2..30).contains(&r) && (2..30).contains(&c);
                assert_eq!(canvas[r * side + c] == 1, inside);
            }
        }
        assert!(matches!(
            Ordering::new(OrderingKind::Hierarchical2d, ImageShape::Flat { len: 16 }),
            Err(crate::Error::Argument(_))
        ));
        let odd = Ordering::new(OrderingKind::Hierarchical2d, img(3, 5)).unwrap();
        assert_eq!(odd.padded_len(), 64);
    }

    #[test]
    fn aligned_blocks_are_contiguous() {
        for hf in [true, false] {
            let o = Ordering::build(OrderingKind::Hierarchical2d, img(16, 16), hf).unwrap();
            for j in 0..=4 {
                let b = 1 << j;
                for br in 0..16 / b {
                    for bc in 0..16 / b {
                        let mut slots: Vec<usize> = (0..b)
                            .flat_map(|r| (0..b).map(move |c| (br * b + r) * 16 + bc * b + c))
                            .map(|p| o.slots()[p])
                            .collect();
                        slots.sort_unstable();
                        assert_eq!(slots.last().unwrap() - slots[0] + 1, b * b);
                        assert_eq!(slots[0] % (b * b), 0);
                    }
                }
            }
        }
    }

    fn tree_distance(i: usize, j: usize) -> usize {
        if i == j {
            0
        } else {
            2 * (usize::BITS - (i ^ j).leading_zeros()) as usize
        }
    }

    #[test]
    fn two_dimensional_order_shortens_vertical_correlations() {
        let shape = img(28, 28);
        let mean = |o: &Ordering| {
            let mut acc = 0.0;
            let mut count = 0.0;
            for c in 0..28 {
                for r1 in 0..28 {
                    for r2 in r1 + 1..28 {
                        acc += tree_distance(o.slots()[r1 * 28 + c], o.slots()[r2 * 28 + c]) as f64;
                        count += 1.0;
                    }
                }
            }
            acc / count
        };
        let one = mean(&Ordering::new(OrderingKind::Raster1d, shape).unwrap());
        let two = mean(&Ordering::new(OrderingKind::Hierarchical2d, shape).unwrap());
        assert!(two < one, "{two} !< {one}");
    }

    #[test]
    fn descriptor_round_trip() {
        let o = Ordering::new(OrderingKind::Hierarchical2d, img(28, 28)).unwrap();
        let json = serde_json::to_string(o.descriptor()).unwrap();
        let back: OrderingDescriptor = serde_json::from_str(&json).unwrap();
        assert_eq!(Ordering::from_descriptor(&back).unwrap(), o);
    }

    proptest! {
        #[test]
        fn apply_then_invert_is_identity(
            h in 1usize..12, w in 1usize..12, two_d in any::<bool>(), hf in any::<bool>(), seed in any::<u64>()
        ) {
            let kind = if two_d { OrderingKind::Hierarchical2d } else { OrderingKind::Raster1d };
            let o = Ordering::build(kind, img(h, w), hf).unwrap();
            let raw: Vec<u8> = (0..h * w).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
            let leaves = o.apply_one(&raw).unwrap();
            prop_assert_eq!(o.invert(&leaves).unwrap(), raw);
            prop_assert!(o.padding().iter().all(|&s| leaves[s] == 0));
            prop_assert!(o.padded_len().is_power_of_two());
            prop_assert_eq!(o.padding().len() + h * w, o.padded_len());
        }
    }
}
