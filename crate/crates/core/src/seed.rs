//! Deterministic seed derivation.

/// Combines two words through the splitmix64 finaliser.
pub fn mix64(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `words` into `seed` in order.
pub fn mix_all(seed: u64, words: &[u64]) -> u64 {
    words.iter().fold(seed, |acc, &w| mix64(acc, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_matters_and_is_stable() {
        assert_ne!(mix_all(1, &[2, 3]), mix_all(1, &[3, 2]));
        assert_eq!(mix_all(1, &[2, 3]), mix64(mix64(1, 2), 3));
    }
}
