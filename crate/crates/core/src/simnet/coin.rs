use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::types::ClusterId;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seed for `stream` under the run seed `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix(mix(seed) ^ mix(stream.wrapping_mul(0xD6E8_FEB8_6659_FD93)))
}

pub(crate) const NETWORK_STREAM: u64 = 1;
pub(crate) const ADVERSARY_STREAM: u64 = 2;
const COIN_STREAM_BASE: u64 = 1 << 32;

/// The common random source of a cluster. Every non-faulty replica of the
/// cluster holds an identical copy, so a draw made at the same protocol
/// point gives the same result everywhere; the simulator keeps one instance.
#[derive(Debug, Clone)]
pub struct SharedCoin {
    cluster: ClusterId,
    rng: ChaCha8Rng,
}

impl SharedCoin {
    pub fn new(run_seed: u64, cluster: ClusterId) -> Self {
        let seed = derive_seed(run_seed, COIN_STREAM_BASE + u64::from(cluster.0));
        Self {
            cluster,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn cluster(&self) -> ClusterId {
        self.cluster
    }

    /// Uniform draw from `0..range`.
    pub fn draw(&mut self, range: u64) -> u64 {
        assert!(range >= 1, "coin range must be positive");
        self.rng.random_range(0..range)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }
}

pub fn coin_draw(coin: &mut SharedCoin, range: u64) -> u64 {
    coin.draw(range)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_one_is_zero() {
        let mut coin = SharedCoin::new(5, ClusterId(1));
        assert!((0..100).all(|_| coin_draw(&mut coin, 1) == 0));
    }

    #[test]
    fn replicas_see_identical_draws() {
        let mut a = SharedCoin::new(77, ClusterId(1));
        let mut b = a.clone();
        let xs: Vec<u64> = (0..50).map(|_| a.draw(1000)).collect();
        let ys: Vec<u64> = (0..50).map(|_| b.draw(1000)).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn streams_differ_per_cluster_and_seed() {
        let draws = |seed, c| {
            let mut coin = SharedCoin::new(seed, ClusterId(c));
            (0..20).map(|_| coin.draw(1 << 40)).collect::<Vec<_>>()
        };
        assert_eq!(draws(1, 1), draws(1, 1));
        assert_ne!(draws(1, 1), draws(1, 2));
        assert_ne!(draws(1, 1), draws(2, 1));
    }
}
