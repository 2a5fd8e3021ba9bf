use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::Tensor;

/// Inverted-dropout mask: each entry is `1 / keep_prob` with probability
/// `keep_prob`, else `0`. Deterministic in `seed`.
pub fn dropout_mask(shape: &[usize], keep_prob: f64, seed: u64) -> Tensor {
    assert!(keep_prob > 0.0 && keep_prob <= 1.0, "keep_prob must lie in (0, 1]");
    if keep_prob == 1.0 {
        return Tensor::filled(shape, 1.0);
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let scale = 1.0 / keep_prob;
    let mut mask = Tensor::zeros(shape);
    for x in mask.data_mut() {
        if rng.gen::<f64>() < keep_prob {
            *x = scale;
        }
    }
    mask
}

/// Derives a child seed from a parent seed and a stream index.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keep_all() {
        let m = dropout_mask(&[3, 4], 1.0, 9);
        assert!(m.data().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn keep_fraction_near_half() {
        let n = 100_000;
        let m = dropout_mask(&[n], 0.5, 2024);
        let kept = m.data().iter().filter(|&&x| x != 0.0).count() as f64 / n as f64;
        assert!((kept - 0.5).abs() < 0.01, "{kept}");
        assert!(m.data().iter().all(|&x| x == 0.0 || x == 2.0));
    }

    #[test]
    fn seeded() {
        assert_eq!(dropout_mask(&[50], 0.3, 5), dropout_mask(&[50], 0.3, 5));
        assert_ne!(dropout_mask(&[50], 0.3, 5), dropout_mask(&[50], 0.3, 6));
    }
}
