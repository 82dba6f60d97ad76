//! Deterministic seeding helpers shared by the simulator, dataset
//! generation, trainers and the evaluation protocol.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mixes a master seed with a sequence of labels into a child seed.
///
/// Child streams for different label sequences are independent, and the
/// derivation is stable: the same inputs always give the same seed.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ 0x9e77_94e5_a2b8_d0c1);
    for &l in labels {
        h = splitmix64(h ^ splitmix64(l.wrapping_add(0x6a09_e667_f3bc_c909)));
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded generator used everywhere randomness is needed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One standard normal draw via Box-Muller.
///
/// Always consumes exactly two uniforms, which keeps generator streams
/// aligned between runs that branch differently on the sampled values.
pub fn next_gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
