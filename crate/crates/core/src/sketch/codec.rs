//! `SKCH` wire format.
//!
//! ```text
//! magic "SKCH" | version u8 | kind u8 | dim u64 | m u64  (or rows u64, cols u64) | seed u64
//! | bucket values f32 ...            (row-major for count-sketch)
//! | bucket counts u32 ...            (averaged sketch only)
//! ```
//! All multi-byte fields little-endian. Kind: 1 count-min, 2 count-sketch,
//! 3 averaged; bit 7 set when the sketch uses the identity mapping.

use super::{AveragedSketch, CountMinArray, CountSketchTable};
use crate::error::{Error, Result};
use crate::hash::{HashKind, HashMapping};
use crate::wire::{Reader, Writer};

pub const SKETCH_MAGIC: &[u8; 4] = b"SKCH";
pub const SKETCH_VERSION: u8 = 1;

const KIND_COUNT_MIN: u8 = 1;
const KIND_COUNT_SKETCH: u8 = 2;
const KIND_AVERAGED: u8 = 3;
const IDENTITY_FLAG: u8 = 0x80;

#[derive(Debug, Clone, PartialEq)]
pub enum AnySketch {
    CountMin(CountMinArray),
    CountSketch(CountSketchTable),
    Averaged(AveragedSketch),
}

fn header(w: &mut Writer, kind: u8, identity: bool) {
    w.bytes(SKETCH_MAGIC);
    w.u8(SKETCH_VERSION);
    w.u8(kind | if identity { IDENTITY_FLAG } else { 0 });
}

fn mapping(kind: HashKind, seed: u64, buckets: usize, identity: bool) -> Result<HashMapping> {
    if identity {
        HashMapping::identity(buckets)
    } else {
        HashMapping::new(seed, buckets, kind)
    }
}

impl CountMinArray {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        header(
            &mut w,
            KIND_COUNT_MIN,
            self.mapping().kind() == HashKind::Identity,
        );
        w.u64(self.dim() as u64);
        w.u64(self.buckets().len() as u64);
        w.u64(self.mapping().seed());
        self.buckets().iter().for_each(|&v| w.f32(v));
        w.finish()
    }
}

impl CountSketchTable {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        header(
            &mut w,
            KIND_COUNT_SKETCH,
            self.row_mapping(0).kind() == HashKind::Identity,
        );
        w.u64(self.dim() as u64);
        w.u64(self.rows() as u64);
        w.u64(self.cols() as u64);
        w.u64(self.seed());
        self.table().iter().for_each(|&v| w.f32(v));
        w.finish()
    }
}

impl AveragedSketch {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        header(
            &mut w,
            KIND_AVERAGED,
            self.mapping().kind() == HashKind::Identity,
        );
        w.u64(self.dim() as u64);
        w.u64(self.buckets() as u64);
        w.u64(self.mapping().seed());
        self.sums().iter().for_each(|&v| w.f32(v));
        self.counts().iter().for_each(|&c| w.u32(c));
        w.finish()
    }
}

pub fn decode_sketch(bytes: &[u8]) -> Result<AnySketch> {
    let mut r = Reader::new(bytes);
    r.magic(SKETCH_MAGIC)?;
    let version = r.u8()?;
    if version != SKETCH_VERSION {
        return Err(Error::Decode(format!(
            "unsupported sketch version {version}"
        )));
    }
    let kind_byte = r.u8()?;
    let identity = kind_byte & IDENTITY_FLAG != 0;
    let dim = r.usize()?;
    if dim == 0 {
        return Err(Error::Decode("zero dimension".into()));
    }
    let out = match kind_byte & !IDENTITY_FLAG {
        KIND_COUNT_MIN => {
            let m = r.usize()?;
            let seed = r.u64()?;
            let map = mapping(HashKind::BucketOnly, seed, m, identity)
                .map_err(|e| Error::Decode(e.to_string()))?;
            let buckets = r.f32s(m)?;
            AnySketch::CountMin(CountMinArray::from_parts(dim, map, buckets))
        }
        KIND_COUNT_SKETCH => {
            let rows = r.usize()?;
            let cols = r.usize()?;
            let seed = r.u64()?;
            if identity && rows != 1 {
                return Err(Error::Decode(
                    "identity count-sketch must have one row".into(),
                ));
            }
            let mut sk = if identity {
                CountSketchTable::single_row(dim, HashMapping::identity(cols)?, seed)
            } else {
                CountSketchTable::new(dim, rows, cols, seed)
            }
            .map_err(|e| Error::Decode(e.to_string()))?;
            let cells = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Decode("table size overflow".into()))?;
            sk.set_table(r.f32s(cells)?)?;
            AnySketch::CountSketch(sk)
        }
        KIND_AVERAGED => {
            let m = r.usize()?;
            let seed = r.u64()?;
            let map = mapping(HashKind::BucketOnly, seed, m, identity)
                .map_err(|e| Error::Decode(e.to_string()))?;
            let sums = r.f32s(m)?;
            let counts = r.u32s(m)?;
            AnySketch::Averaged(AveragedSketch::from_parts(dim, map, sums, counts)?)
        }
        other => return Err(Error::Decode(format!("unknown sketch kind {other}"))),
    };
    r.finish()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradient::GradientVector;

    #[test]
    fn header_layout() {
        let sk = CountMinArray::new(3, 2, 0x0102_0304_0506_0708).unwrap();
        let b = sk.to_bytes();
        assert_eq!(&b[..4], b"SKCH");
        assert_eq!(b[4], 1);
        assert_eq!(b[5], 1);
        assert_eq!(&b[6..14], &3u64.to_le_bytes());
        assert_eq!(&b[14..22], &2u64.to_le_bytes());
        assert_eq!(&b[22..30], &0x0102_0304_0506_0708u64.to_le_bytes());
        assert_eq!(b.len(), 30 + 2 * 4);
    }

    #[test]
    fn round_trips_each_kind() {
        let g = GradientVector::new(vec![1.0, -2.0, 0.5, 4.0, 8.0]).unwrap();
        let mut cm = CountMinArray::new(5, 3, 11).unwrap();
        cm.insert(&g).unwrap();
        let mut cs = CountSketchTable::new(5, 3, 4, 12).unwrap();
        cs.insert_vector(&g).unwrap();
        let mut av = AveragedSketch::new(5, HashMapping::bucket_only(13, 2).unwrap()).unwrap();
        av.insert(&[(0, 1.0), (2, 0.5), (4, 8.0)]).unwrap();
        let ident = CountSketchTable::single_row(5, HashMapping::identity(5).unwrap(), 0).unwrap();

        assert_eq!(
            decode_sketch(&cm.to_bytes()).unwrap(),
            AnySketch::CountMin(cm.clone())
        );
        assert_eq!(
            decode_sketch(&cs.to_bytes()).unwrap(),
            AnySketch::CountSketch(cs.clone())
        );
        assert_eq!(
            decode_sketch(&av.to_bytes()).unwrap(),
            AnySketch::Averaged(av.clone())
        );
        assert_eq!(
            decode_sketch(&ident.to_bytes()).unwrap(),
            AnySketch::CountSketch(ident)
        );
    }

    #[test]
    fn rejects_corruption() {
        let cm = CountMinArray::new(3, 2, 1).unwrap();
        let mut b = cm.to_bytes();
        assert!(decode_sketch(&b[..b.len() - 1]).is_err());
        b.push(0);
        assert!(decode_sketch(&b).is_err());
        let mut bad_magic = cm.to_bytes();
        bad_magic[0] = b'X';
        assert!(decode_sketch(&bad_magic).is_err());
        let mut bad_kind = cm.to_bytes();
        bad_kind[5] = 9;
        assert!(decode_sketch(&bad_kind).is_err());
        let mut huge = cm.to_bytes();
        huge[14..22].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode_sketch(&huge).is_err());
    }
}
