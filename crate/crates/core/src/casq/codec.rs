use serde::{Deserialize, Serialize};

use crate::bitpack::{bits_for, pack, packed_len, unpack};
use crate::error::{Error, Result};
use crate::wire::{Reader, Writer};

use super::payload::{AssignmentCode, CasPayload};
use crate::hash::HashingMode;

pub const CAS_MAGIC: &[u8; 4] = b"CASQ";
pub const CAS_VERSION: u8 = 1;

/// magic, version, window id, N, K, W.
const FIXED_HEADER_BYTES: u64 = 4 + 1 + 8 * 4;

impl CasPayload {
    /// Serialize. Bucket values travel as `f32` means `S = Σ S^i / W`;
    /// a single-worker payload sends bit-packed labels, a merged one `u32`
    /// vote counts.
    pub fn to_bytes(&self) -> Vec<u8> {
        let k = self.num_clusters();
        let mut w = Writer::new();
        w.bytes(CAS_MAGIC);
        w.u8(CAS_VERSION);
        w.u64(self.window_id);
        w.u64(self.dim as u64);
        w.u64(k as u64);
        w.u64(self.workers);
        for &m in &self.bucket_counts {
            w.u32(m);
        }
        for c in 0..k {
            for v in self.averaged(c) {
                w.f32(v);
            }
        }
        match &self.assignment {
            AssignmentCode::Labels(labels) if self.workers == 1 => {
                let packed = pack(labels, bits_for(k as u64)).expect("labels below K");
                w.bytes(&packed);
            }
            code => {
                let votes = match code {
                    AssignmentCode::Votes(v) => v.clone(),
                    AssignmentCode::Labels(_) => self.votes(),
                };
                for v in votes {
                    w.u32(v);
                }
            }
        }
        w.finish()
    }

    /// Parse a payload. The seed and hashing mode are window parameters
    /// every worker already holds, so they are not on the wire.
    pub fn from_bytes(bytes: &[u8], global_seed: u64, hashing: HashingMode) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(CAS_MAGIC)?;
        let version = r.u8()?;
        if version != CAS_VERSION {
            return Err(Error::Decode(format!("unsupported CASQ version {version}")));
        }
        let window_id = r.u64()?;
        let dim = r.usize()?;
        let k = r.usize()?;
        let workers = r.u64()?;
        if dim == 0 || k == 0 || workers == 0 {
            return Err(Error::Decode(
                "zero dimension, cluster or worker count".into(),
            ));
        }
        let bucket_counts = r.u32s(k)?;
        let w = workers as f64;
        let bucket_sums = bucket_counts
            .iter()
            .map(|&m| Ok(r.f32s(m as usize)?.into_iter().map(|v| v * w).collect()))
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let assignment = if workers == 1 {
            let width = bits_for(k as u64);
            let packed = r.take(packed_len(dim, width))?;
            AssignmentCode::Labels(unpack(packed, width, dim)?)
        } else {
            let n = dim
                .checked_mul(k)
                .ok_or_else(|| Error::Decode("vote matrix size overflows".into()))?;
            AssignmentCode::Votes(r.u32s(n)?)
        };
        r.finish()?;
        let payload = CasPayload {
            window_id,
            dim,
            global_seed,
            hashing,
            bucket_counts,
            bucket_sums,
            assignment,
            workers,
        };
        payload.validate()?;
        Ok(payload)
    }
}

/// Exact byte budget of a serialized payload, split by section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CasCost {
    pub header_bits: u64,
    pub value_bits: u64,
    pub assignment_bits: u64,
}

impl CasCost {
    pub fn total_bits(&self) -> u64 {
        self.header_bits + self.value_bits + self.assignment_bits
    }

    /// Dense 32-bit gradient size over this payload's size.
    pub fn ratio_vs_dense(&self, dim: usize) -> f64 {
        32.0 * dim as f64 / self.total_bits() as f64
    }
}

impl CasCost {
    /// Size of a payload with these dimensions, without building it. A
    /// single worker sends packed labels, a merged payload sends votes.
    pub fn for_sizes(dim: usize, num_clusters: usize, total_buckets: usize, workers: u64) -> Self {
        let k = num_clusters as u64;
        let assignment_bits = if workers == 1 {
            8 * packed_len(dim, bits_for(k)) as u64
        } else {
            32 * dim as u64 * k
        };
        CasCost {
            header_bits: 8 * (FIXED_HEADER_BYTES + 4 * k),
            value_bits: 32 * total_buckets as u64,
            assignment_bits,
        }
    }
}

pub fn cas_cost(payload: &CasPayload) -> CasCost {
    let workers = match payload.assignment() {
        AssignmentCode::Labels(_) if payload.workers() == 1 => 1,
        _ => payload.workers().max(2),
    };
    CasCost::for_sizes(
        payload.dim(),
        payload.num_clusters(),
        payload.total_buckets(),
        workers,
    )
}

/// Bits on the wire for `payload`; always `8 * to_bytes().len()`.
pub fn cas_comm_bits(payload: &CasPayload) -> u64 {
    cas_cost(payload).total_bits()
}

/// Server-to-worker size of a two-cluster merged payload when the vote for
/// cluster 1 is sent as a count in `0..=W`: `N ceil(log2(W+1)) + 32 M`.
pub fn merged_downstream_bits(dim: usize, workers: u64, total_buckets: usize) -> u64 {
    dim as u64 * u64::from(bits_for(workers + 1)) + 32 * total_buckets as u64
}

/// Asymptotic downstream size relative to a 32-bit dense gradient,
/// `log2(W) / 32`.
pub fn nominal_downstream_ratio(workers: u64) -> f64 {
    (workers as f64).log2() / 32.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casq::{cas_compress, cas_merge, CasConfig, CasWindow};
    use crate::gradient::GradientVector;
    use rand::{Rng, SeedableRng};

    fn payload(dim: usize, k: usize, m: usize, seed: u64) -> (CasPayload, CasWindow) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g =
            GradientVector::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let window = CasWindow::build(&CasConfig::new(k, m, seed), 0, &g).unwrap();
        (
            cas_compress(&g, &window, &window.assign(&g)).unwrap(),
            window,
        )
    }

    #[test]
    fn header_layout() {
        let (p, _) = payload(10, 2, 4, 1);
        let b = p.to_bytes();
        assert_eq!(&b[..4], b"CASQ");
        assert_eq!(b[4], CAS_VERSION);
        assert_eq!(u64::from_le_bytes(b[13..21].try_into().unwrap()), 10);
        assert_eq!(u64::from_le_bytes(b[29..37].try_into().unwrap()), 1);
    }

    #[test]
    fn bits_match_serialized_length() {
        for (dim, k, m) in [(10, 1, 3), (100, 4, 16), (33, 8, 20)] {
            let (p, _) = payload(dim, k, m, 7);
            assert_eq!(cas_comm_bits(&p), 8 * p.to_bytes().len() as u64);
            let merged = cas_merge(&[p.clone(), p.clone(), p]).unwrap();
            assert_eq!(cas_comm_bits(&merged), 8 * merged.to_bytes().len() as u64);
        }
    }

    #[test]
    fn single_cluster_sends_no_labels() {
        let (p, _) = payload(64, 1, 8, 3);
        assert_eq!(cas_cost(&p).assignment_bits, 0);
    }

    #[test]
    fn bytes_round_trip() {
        let (p, w) = payload(50, 4, 12, 5);
        let merged = cas_merge(&[p.clone(), p.clone(), p.clone()]).unwrap();
        for q in [p, merged] {
            let bytes = q.to_bytes();
            let back = CasPayload::from_bytes(&bytes, w.global_seed(), w.hashing()).unwrap();
            assert_eq!(back.to_bytes(), bytes);
            assert_eq!(back.assignment(), q.assignment());
        }
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let (p, w) = payload(20, 2, 4, 5);
        let bytes = p.to_bytes();
        assert!(CasPayload::from_bytes(&bytes[..bytes.len() - 1], 5, w.hashing()).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(CasPayload::from_bytes(&extra, 5, w.hashing()).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(CasPayload::from_bytes(&bad, 5, w.hashing()).is_err());
    }

    #[test]
    fn downstream_variant_sizes() {
        assert_eq!(merged_downstream_bits(1000, 16, 0), 5000);
        assert_eq!(nominal_downstream_ratio(16), 0.125);
    }
}
