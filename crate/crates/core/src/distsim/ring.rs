use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::gradient::GradientVector;
use crate::merge::{FlatBuffer, Mergeable};
use crate::rng::rng_from;

/// Uncompressed payload: running sum of worker vectors and how many were
/// added.
#[derive(Debug, Clone, PartialEq)]
pub struct DensePayload {
    sum: Vec<f64>,
    workers: u64,
}

impl DensePayload {
    pub fn new(g: &GradientVector) -> Self {
        DensePayload {
            sum: g.as_slice().to_vec(),
            workers: 1,
        }
    }

    pub fn sum(&self) -> &[f64] {
        &self.sum
    }

    pub fn workers(&self) -> u64 {
        self.workers
    }

    pub fn mean(&self) -> Result<GradientVector> {
        let w = self.workers as f64;
        GradientVector::new(self.sum.iter().map(|v| v / w).collect())
    }

    pub fn wire_bytes(&self) -> u64 {
        4 * self.sum.len() as u64
    }
}

impl Mergeable for DensePayload {
    fn merge_from(&mut self, other: &Self) -> Result<()> {
        ensure_dim(self.sum.len(), other.sum.len())?;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        self.workers += other.workers;
        Ok(())
    }
}

impl FlatBuffer for DensePayload {
    fn to_flat(&self) -> Vec<f64> {
        let mut flat = self.sum.clone();
        flat.push(self.workers as f64);
        flat
    }

    fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        ensure_dim(self.sum.len() + 1, flat.len())?;
        Ok(DensePayload {
            sum: flat[..self.sum.len()].to_vec(),
            workers: flat[self.sum.len()] as u64,
        })
    }
}

/// Traffic of one simulated all-reduce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingStats {
    pub workers: usize,
    /// Bytes sent by all workers together in each logical step:
    /// `W-1` reduce-scatter steps followed by `W-1` all-gather steps.
    pub bytes_per_step: Vec<u64>,
}

impl RingStats {
    pub fn steps(&self) -> usize {
        self.bytes_per_step.len()
    }

    pub fn total_bytes(&self) -> u64 {
        self.bytes_per_step.iter().sum()
    }
}

/// Chunk boundaries: `len` split into `parts` contiguous ranges whose sizes
/// differ by at most one.
fn chunk_bounds(len: usize, parts: usize) -> Vec<(usize, usize)> {
    let base = len / parts;
    let extra = len % parts;
    let mut start = 0;
    (0..parts)
        .map(|c| {
            let size = base + usize::from(c < extra);
            let r = (start, start + size);
            start += size;
            r
        })
        .collect()
}

/// Ring order: workers sorted by a seeded shuffle, or `0..W` for seed `None`.
pub fn ring_order(workers: usize, seed: Option<u64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..workers).collect();
    if let Some(s) = seed {
        order.shuffle(&mut rng_from(s));
    }
    order
}

/// Simulate ring all-reduce over the flat buffers of `payloads`.
///
/// Each buffer is cut into `W` chunks. In reduce-scatter step `s`, ring
/// position `p` sends chunk `(p - s) mod W` to position `p + 1`, which adds
/// it to its own copy; after `W-1` steps position `p` owns the reduced chunk
/// `(p + 1) mod W`. All-gather then circulates the reduced chunks for
/// another `W-1` steps. Sends within a step happen simultaneously.
pub fn ring_allreduce<P: FlatBuffer>(
    payloads: &[P],
    order_seed: Option<u64>,
) -> Result<(P, RingStats)> {
    let w = payloads.len();
    let first = payloads
        .first()
        .ok_or_else(|| Error::Config("ring all-reduce needs at least one payload".into()))?;
    let order = ring_order(w, order_seed);
    let mut bufs: Vec<Vec<f64>> = order.iter().map(|&i| payloads[i].to_flat()).collect();
    let len = bufs[0].len();
    for b in &bufs {
        ensure_dim(len, b.len())?;
    }
    for i in 1..w {
        // parameter compatibility is checked by the payload's own merge
        first.clone().merge_from(&payloads[order[i]])?;
    }
    let chunks = chunk_bounds(len, w);
    let elem = first.wire_bytes_per_element();
    let mut bytes_per_step = Vec::with_capacity(2 * w.saturating_sub(1));

    for s in 0..w.saturating_sub(1) {
        let sent: Vec<(usize, Vec<f64>)> = (0..w)
            .map(|p| {
                let c = (p + w - s % w) % w;
                let (a, b) = chunks[c];
                (c, bufs[p][a..b].to_vec())
            })
            .collect();
        let mut step_bytes = 0;
        for (p, (c, data)) in sent.into_iter().enumerate() {
            let dst = (p + 1) % w;
            let (a, _) = chunks[c];
            for (k, v) in data.iter().enumerate() {
                bufs[dst][a + k] += v;
            }
            step_bytes += elem * data.len() as u64;
        }
        bytes_per_step.push(step_bytes);
    }
    for s in 0..w.saturating_sub(1) {
        let sent: Vec<(usize, Vec<f64>)> = (0..w)
            .map(|p| {
                let c = (p + 1 + w - s % w) % w;
                let (a, b) = chunks[c];
                (c, bufs[p][a..b].to_vec())
            })
            .collect();
        let mut step_bytes = 0;
        for (p, (c, data)) in sent.into_iter().enumerate() {
            let dst = (p + 1) % w;
            let (a, b) = chunks[c];
            bufs[dst][a..b].copy_from_slice(&data);
            step_bytes += elem * data.len() as u64;
        }
        bytes_per_step.push(step_bytes);
    }
    debug_assert!(bufs.iter().all(|b| b == &bufs[0]));
    Ok((
        first.with_flat(&bufs[0])?,
        RingStats {
            workers: w,
            bytes_per_step,
        },
    ))
}

/// Bytes an all-gather of the given per-worker payload sizes moves: every
/// payload reaches the other `W-1` workers.
pub fn allgather_bytes(payload_bytes: &[u64]) -> u64 {
    let w = payload_bytes.len() as u64;
    payload_bytes.iter().sum::<u64>() * w.saturating_sub(1)
}
