//! Packed binary descriptor string.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{PixelPoint, Point2};

/// Where a descriptor came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DescriptorSource {
    /// A map intersection node.
    Map { intersection_id: i64 },
    /// An intersection observed in the keyframe window with this index.
    Observed { window: usize },
}

/// A `Q`-bit descriptor plus the geometry needed to georeference it.
///
/// Bits are packed least-significant first into 64-bit words; bits past `Q`
/// in the last word are always zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DescriptorDump", try_from = "DescriptorDump")]
pub struct Descriptor {
    words: Vec<u64>,
    len: usize,
    /// Refined intersection point in pixels.
    pub refined_point: PixelPoint,
    /// Refined intersection point in the image's center frame, meters.
    pub refined_local: Point2,
    /// Characteristic orientation, a unit vector in the center frame.
    pub orientation: Point2,
    pub source: DescriptorSource,
}

impl Descriptor {
    pub fn zeros(len: usize, source: DescriptorSource) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
            refined_point: PixelPoint::default(),
            refined_local: Point2::default(),
            orientation: Point2::new(1.0, 0.0),
            source,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for {} bits", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range for {} bits", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Bitwise complement (geometry and source kept).
    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        for w in &mut out.words {
            *w = !*w;
        }
        out.clear_tail();
        out
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    /// Heading of the characteristic orientation in the center frame.
    pub fn heading(&self) -> f64 {
        self.orientation.y.atan2(self.orientation.x)
    }

    /// Number of differing bits.
    pub fn hamming(&self, other: &Descriptor) -> Result<u32> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                left: self.len,
                right: other.len,
            });
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum())
    }

    /// `ceil(Q / 8)` bytes, bit `i` at byte `i / 8`, position `i % 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push((self.words[k / 8] >> (8 * (k % 8))) as u8);
        }
        out
    }

    /// Replaces the bit string from [`Descriptor::to_bytes`] output.
    pub fn set_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        if bytes.len() != self.len.div_ceil(8) {
            return Err(Error::LengthMismatch {
                left: self.len,
                right: bytes.len() * 8,
            });
        }
        self.words.iter_mut().for_each(|w| *w = 0);
        for (k, &b) in bytes.iter().enumerate() {
            self.words[k / 8] |= (b as u64) << (8 * (k % 8));
        }
        let before = self.words.clone();
        self.clear_tail();
        if before != self.words {
            return Err(Error::Input("descriptor payload has bits set past its length".into()));
        }
        Ok(())
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.len.div_ceil(4));
        for b in self.to_bytes() {
            let _ = write!(s, "{b:02x}");
        }
        s
    }

    /// Bits as a `0`/`1` string in index order.
    pub fn to_bit_string(&self) -> String {
        (0..self.len).map(|i| if self.get(i) { '1' } else { '0' }).collect()
    }
}

/// JSON form of a descriptor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescriptorDump {
    pub bits: usize,
    pub hex: String,
    pub refined_point: [f64; 2],
    pub refined_local: [f64; 2],
    pub orientation: [f64; 2],
    pub source: DescriptorSource,
}

impl From<Descriptor> for DescriptorDump {
    fn from(d: Descriptor) -> Self {
        Self {
            bits: d.len,
            hex: d.to_hex(),
            refined_point: [d.refined_point.u, d.refined_point.v],
            refined_local: [d.refined_local.x, d.refined_local.y],
            orientation: [d.orientation.x, d.orientation.y],
            source: d.source,
        }
    }
}

impl TryFrom<DescriptorDump> for Descriptor {
    type Error = Error;

    fn try_from(dump: DescriptorDump) -> Result<Self> {
        let hex = dump.hex.as_bytes();
        if !hex.len().is_multiple_of(2) {
            return Err(Error::Input("descriptor hex has odd length".into()));
        }
        let bytes = hex
            .chunks(2)
            .map(|pair| {
                std::str::from_utf8(pair)
                    .ok()
                    .and_then(|s| u8::from_str_radix(s, 16).ok())
                    .ok_or_else(|| Error::Input("descriptor hex is not hexadecimal".into()))
            })
            .collect::<Result<Vec<u8>>>()?;
        let mut d = Descriptor::zeros(dump.bits, dump.source);
        d.set_bytes(&bytes)?;
        d.refined_point = PixelPoint::new(dump.refined_point[0], dump.refined_point[1]);
        d.refined_local = Point2::new(dump.refined_local[0], dump.refined_local[1]);
        d.orientation = Point2::new(dump.orientation[0], dump.orientation[1]);
        Ok(d)
    }
}
