use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Seed for an independent random stream, derived from a master seed, a
/// circuit identifier and a run index. Stable across platforms and releases.
pub fn stream_seed(seed: u64, circuit_id: &str, run: u64) -> u64 {
    splitmix64(seed ^ fnv1a(circuit_id.as_bytes()) ^ splitmix64(run.wrapping_add(1)))
}

pub(crate) fn stream(seed: u64, circuit_id: &str, run: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, circuit_id, run))
}
