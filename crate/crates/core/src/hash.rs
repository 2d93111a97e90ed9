//! Portable hashing primitives shared by feature extraction and state
//! identifiers. All constants are fixed so golden values survive across
//! platforms.

/// 2^64 / phi, the Fibonacci hashing multiplier.
pub const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combine `value` into a running hash `acc`.
#[inline]
pub fn fold(acc: u64, value: u64) -> u64 {
    mix64(acc.rotate_left(5) ^ value.wrapping_mul(GOLDEN))
}

/// Fold a sequence of values starting from a fixed seed.
pub fn fold_all<I: IntoIterator<Item = u64>>(values: I) -> u64 {
    values.into_iter().fold(0x51_7CC1_B727_220A, fold)
}

/// Multiply-shift hash of `value` into `bits` output bits.
///
/// `index = ((value ^ salt) * multiplier) >> (64 - bits)`, with `bits == 0`
/// mapping everything to 0. `multiplier` must be odd.
#[inline]
pub fn multiply_shift(value: u64, salt: u64, multiplier: u64, bits: u32) -> u64 {
    if bits == 0 {
        0
    } else {
        (value ^ salt).wrapping_mul(multiplier) >> (64 - bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_is_order_sensitive() {
        assert_ne!(fold_all([1, 2]), fold_all([2, 1]));
        assert_eq!(fold_all([1, 2]), fold_all([1, 2]));
    }

    #[test]
    fn multiply_shift_range() {
        for v in 0..1000u64 {
            assert!(multiply_shift(v, 3, GOLDEN, 10) < 1024);
            assert_eq!(multiply_shift(v, 3, GOLDEN, 0), 0);
        }
    }
}
