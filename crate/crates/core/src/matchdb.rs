//! Map-intersection descriptor database with Hamming retrieval and the
//! `.ikdb` binary format.
//!
//! Layout (little-endian): magic `IKDB`, `u32` version, fingerprint block
//! (`f64` S, r, R_o, R_i; `u32` N_r, N_b; `f64` tau_s), `u32` Q, `u64` record
//! count, then per record: `i64` intersection id, `f64` x 3 global pose,
//! `f64` x 2 refined point, `f64` x 2 refined local point, `f64` x 2
//! orientation, and `ceil(Q / 8)` descriptor bytes.

use serde::{Deserialize, Serialize};

use crate::config::Fingerprint;
use crate::descriptor::{Descriptor, DescriptorSource};
use crate::error::{Error, Result};
use crate::raster::{PixelPoint, Point2, Pose2};

pub const MAGIC: &[u8; 4] = b"IKDB";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionRecord {
    pub intersection_id: i64,
    /// Map intersection pose: refined point in the map frame, heading of the
    /// characteristic orientation.
    pub global_pose: Pose2,
    pub descriptor: Descriptor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Position of the record in the database.
    pub index: usize,
    pub intersection_id: i64,
    pub hamming: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorDatabase {
    fingerprint: Fingerprint,
    bits: usize,
    records: Vec<IntersectionRecord>,
}

/// Number of differing bits; errors on length mismatch.
pub fn hamming(a: &Descriptor, b: &Descriptor) -> Result<u32> {
    a.hamming(b)
}

impl DescriptorDatabase {
    pub fn new(fingerprint: Fingerprint, bits: usize) -> Self {
        Self {
            fingerprint,
            bits,
            records: Vec::new(),
        }
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    /// Descriptor length Q shared by all records.
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn records(&self) -> &[IntersectionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: IntersectionRecord) -> Result<()> {
        if record.descriptor.len() != self.bits {
            return Err(Error::LengthMismatch {
                left: self.bits,
                right: record.descriptor.len(),
            });
        }
        self.records.push(record);
        Ok(())
    }

    /// Fails unless the query side was configured like the database.
    pub fn check_fingerprint(&self, query: &Fingerprint) -> Result<()> {
        match self.fingerprint.diff(query) {
            Some(msg) => Err(Error::FingerprintMismatch(msg)),
            None => Ok(()),
        }
    }

    /// The `top_n` records closest to `q`, ascending by Hamming distance, ties
    /// by intersection id and then insertion order.
    pub fn query(&self, q: &Descriptor, top_n: usize) -> Result<Vec<MatchResult>> {
        if q.len() != self.bits {
            return Err(Error::LengthMismatch {
                left: self.bits,
                right: q.len(),
            });
        }
        let mut all: Vec<MatchResult> = self
            .records
            .iter()
            .enumerate()
            .map(|(index, r)| {
                let hamming: u32 = r
                    .descriptor
                    .words()
                    .iter()
                    .zip(q.words())
                    .map(|(a, b)| (a ^ b).count_ones())
                    .sum();
                MatchResult {
                    index,
                    intersection_id: r.intersection_id,
                    hamming,
                }
            })
            .collect();
        let key = |m: &MatchResult| (m.hamming, m.intersection_id, m.index);
        if top_n < all.len() {
            if top_n == 0 {
                return Ok(Vec::new());
            }
            all.select_nth_unstable_by_key(top_n - 1, key);
            all.truncate(top_n);
        }
        all.sort_unstable_by_key(key);
        Ok(all)
    }

    pub fn record(&self, m: &MatchResult) -> &IntersectionRecord {
        &self.records[m.index]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let f = &self.fingerprint;
        for v in [f.image_size_m, f.resolution_m_per_px, f.descriptor_outer_radius_m, f.discrepant_radius_m] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&f.pattern_rings.to_le_bytes());
        out.extend_from_slice(&f.pattern_base_cells.to_le_bytes());
        out.extend_from_slice(&f.symmetry_threshold.to_le_bytes());
        out.extend_from_slice(&(self.bits as u32).to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&r.intersection_id.to_le_bytes());
            let d = &r.descriptor;
            for v in [
                r.global_pose.x,
                r.global_pose.y,
                r.global_pose.theta,
                d.refined_point.u,
                d.refined_point.v,
                d.refined_local.x,
                d.refined_local.y,
                d.orientation.x,
                d.orientation.y,
            ] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&d.to_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Database("bad magic, not an .ikdb file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Database(format!(
                "unsupported version {version}, expected {VERSION}"
            )));
        }
        let fingerprint = Fingerprint {
            image_size_m: r.f64()?,
            resolution_m_per_px: r.f64()?,
            descriptor_outer_radius_m: r.f64()?,
            discrepant_radius_m: r.f64()?,
            pattern_rings: r.u32()?,
            pattern_base_cells: r.u32()?,
            symmetry_threshold: r.f64()?,
        };
        let nr = fingerprint.pattern_rings as usize;
        let expected_bits = fingerprint.pattern_base_cells as usize * nr * (nr + 1) / 2;
        let bits = r.u32()? as usize;
        if bits != expected_bits {
            return Err(Error::Database(format!(
                "descriptor length {bits} does not match the fingerprint ({expected_bits})"
            )));
        }
        let count = r.u64()?;
        let record_size = 8 + 9 * 8 + bits.div_ceil(8) as u64;
        if count.saturating_mul(record_size) != (bytes.len() - r.pos) as u64 {
            return Err(Error::Database(format!(
                "{count} records need {} bytes, file holds {}",
                count.saturating_mul(record_size),
                bytes.len() - r.pos
            )));
        }
        let mut db = DescriptorDatabase::new(fingerprint, bits);
        for _ in 0..count {
            let intersection_id = r.i64()?;
            let mut v = [0.0; 9];
            for x in &mut v {
                *x = r.f64()?;
            }
            let mut d = Descriptor::zeros(bits, DescriptorSource::Map { intersection_id });
            d.set_bytes(r.take(bits.div_ceil(8))?)
                .map_err(|e| Error::Database(e.to_string()))?;
            d.refined_point = PixelPoint::new(v[3], v[4]);
            d.refined_local = Point2::new(v[5], v[6]);
            d.orientation = Point2::new(v[7], v[8]);
            db.records.push(IntersectionRecord {
                intersection_id,
                // stored values are already normalized; keep them bit-exact
                global_pose: Pose2 {
                    x: v[0],
                    y: v[1],
                    theta: v[2],
                },
                descriptor: d,
            });
        }
        Ok(db)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Database(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// One retrieved record, as written by the `match` command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedMatch {
    pub rank: usize,
    pub record: usize,
    pub intersection_id: i64,
    pub hamming: u32,
    /// Whether the distance is within the decision threshold.
    pub accepted: bool,
    #[serde(with = "crate::raster::pose::xyt")]
    pub global_pose: Pose2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMatches {
    pub query: Descriptor,
    pub matches: Vec<RankedMatch>,
}

/// Ranked candidates for a batch of query descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchDump {
    pub threshold: u32,
    pub queries: Vec<QueryMatches>,
}

impl MatchDump {
    /// Queries every descriptor against `db`, keeping `top_n` candidates each.
    pub fn build(db: &DescriptorDatabase, queries: &[Descriptor], top_n: usize, threshold: u32) -> Result<Self> {
        let queries = queries
            .iter()
            .map(|q| {
                let matches = db
                    .query(q, top_n)?
                    .iter()
                    .enumerate()
                    .map(|(rank, m)| RankedMatch {
                        rank: rank + 1,
                        record: m.index,
                        intersection_id: m.intersection_id,
                        hamming: m.hamming,
                        accepted: m.hamming <= threshold,
                        global_pose: db.record(m).global_pose,
                    })
                    .collect();
                Ok(QueryMatches {
                    query: q.clone(),
                    matches,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { threshold, queries })
    }

    pub fn match_count(&self) -> usize {
        self.queries.iter().map(|q| q.matches.len()).sum()
    }
}
