//! Traits shared by every payload that can be combined by addition.

use crate::error::{Error, Result};

/// A summary that two workers can combine without decompressing.
pub trait Mergeable: Clone {
    /// Fold `other` into `self`. Fails if the two were built with different
    /// parameters (seed, sizes, window).
    fn merge_from(&mut self, other: &Self) -> Result<()>;

    /// Merge in slice order.
    fn merge_all(items: &[Self]) -> Result<Self> {
        let (first, rest) = items
            .split_first()
            .ok_or_else(|| Error::Config("cannot merge an empty payload list".into()))?;
        let mut acc = first.clone();
        for item in rest {
            acc.merge_from(item)?;
        }
        Ok(acc)
    }
}

/// Payloads whose merge is element-wise addition of one flat buffer. This is
/// what lets a ring all-reduce split a payload into chunks and reduce them
/// independently.
pub trait FlatBuffer: Mergeable + Sized {
    fn to_flat(&self) -> Vec<f64>;

    /// Rebuild a payload with `self`'s parameters from a reduced buffer.
    fn with_flat(&self, flat: &[f64]) -> Result<Self>;

    /// Bytes one flat element occupies on the wire.
    fn wire_bytes_per_element(&self) -> u64 {
        4
    }
}
