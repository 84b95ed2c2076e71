//! Fixed-width bit packing, little-endian bit order within each byte.
//!
//! Value `k` occupies bits `[k*width, (k+1)*width)` of the stream, where stream
//! bit `b` is bit `b % 8` of byte `b / 8`.

use crate::error::{Error, Result};

/// Bits needed to store any value in `[0, n)`; zero when `n <= 1`.
pub fn bits_for(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

pub fn packed_len(count: usize, width: u32) -> usize {
    (count * width as usize).div_ceil(8)
}

pub fn pack(values: &[u32], width: u32) -> Result<Vec<u8>> {
    assert!(width <= 32);
    let mut out = vec![0u8; packed_len(values.len(), width)];
    if width == 0 {
        if let Some(&v) = values.iter().find(|&&v| v != 0) {
            return Err(Error::Config(format!("value {v} does not fit in 0 bits")));
        }
        return Ok(out);
    }
    let limit = if width == 32 { u64::MAX } else { 1u64 << width };
    let mut bit = 0usize;
    for &v in values {
        if u64::from(v) >= limit {
            return Err(Error::Config(format!(
                "value {v} does not fit in {width} bits"
            )));
        }
        let mut v = u64::from(v);
        let mut remaining = width as usize;
        while remaining > 0 {
            let byte = bit / 8;
            let offset = bit % 8;
            let take = remaining.min(8 - offset);
            out[byte] |= ((v & ((1 << take) - 1)) as u8) << offset;
            v >>= take;
            bit += take;
            remaining -= take;
        }
    }
    Ok(out)
}

pub fn unpack(bytes: &[u8], width: u32, count: usize) -> Result<Vec<u32>> {
    assert!(width <= 32);
    if bytes.len() < packed_len(count, width) {
        return Err(Error::Decode(format!(
            "need {} bytes for {count} values of {width} bits, have {}",
            packed_len(count, width),
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(count);
    let mut bit = 0usize;
    for _ in 0..count {
        let mut v = 0u64;
        let mut got = 0usize;
        while got < width as usize {
            let byte = bit / 8;
            let offset = bit % 8;
            let take = (width as usize - got).min(8 - offset);
            let chunk = (u64::from(bytes[byte]) >> offset) & ((1 << take) - 1);
            v |= chunk << got;
            got += take;
            bit += take;
        }
        out.push(v as u32);
    }
    Ok(out)
}

pub fn pack_bits(flags: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; flags.len().div_ceil(8)];
    for (i, _) in flags.iter().enumerate().filter(|(_, &f)| f) {
        out[i / 8] |= 1 << (i % 8);
    }
    out
}

pub fn unpack_bits(bytes: &[u8], count: usize) -> Result<Vec<bool>> {
    if bytes.len() < count.div_ceil(8) {
        return Err(Error::Decode("bitmap truncated".into()));
    }
    Ok((0..count)
        .map(|i| bytes[i / 8] >> (i % 8) & 1 == 1)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bits_for_small_values() {
        assert_eq!(bits_for(0), 0);
        assert_eq!(bits_for(1), 0);
        assert_eq!(bits_for(2), 1);
        assert_eq!(bits_for(4), 2);
        assert_eq!(bits_for(5), 3);
        assert_eq!(bits_for(17), 5);
    }

    #[test]
    fn little_endian_layout() {
        // 2-bit codes 1,2,3,0 -> 0b00_11_10_01
        assert_eq!(pack(&[1, 2, 3, 0], 2).unwrap(), vec![0b0011_1001]);
        // a 3-bit value straddling a byte boundary
        assert_eq!(pack(&[0, 0, 7], 3).unwrap(), vec![0b1100_0000, 0b0000_0001]);
        assert_eq!(
            pack_bits(&[true, false, false, true, false, false, false, false, true]),
            vec![0b0000_1001, 1]
        );
    }

    #[test]
    fn overflow_rejected() {
        assert!(pack(&[4], 2).is_err());
        assert!(pack(&[1], 0).is_err());
        assert!(unpack(&[0], 3, 3).is_err());
    }

    proptest! {
        #[test]
        fn pack_unpack_round_trip(width in 1u32..=32, raw in prop::collection::vec(any::<u32>(), 0..200)) {
            let mask = if width == 32 { u32::MAX } else { (1u32 << width) - 1 };
            let values: Vec<u32> = raw.iter().map(|v| v & mask).collect();
            let packed = pack(&values, width).unwrap();
            prop_assert_eq!(packed.len(), packed_len(values.len(), width));
            prop_assert_eq!(unpack(&packed, width, values.len()).unwrap(), values);
        }

        #[test]
        fn bitmap_round_trip(flags in prop::collection::vec(any::<bool>(), 0..100)) {
            prop_assert_eq!(unpack_bits(&pack_bits(&flags), flags.len()).unwrap(), flags);
        }
    }
}
