//! Monte-Carlo runs of the real lock/unlock path and the baselines they are
//! held to.

use pokimd::fuzzycommit::{lock, sample_iris_with, unlock, CacheKey, IrisCode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TRIALS: usize = 1000;
pub const TOLERANCE: f64 = 0.02;
pub const TRIAL_SEED: u64 = 0x1415_9265;

/// (BER, success rate) measured by the exhaustive-search oracle over 1000
/// trials; regenerate with `cargo test -- --ignored regenerate_baselines`.
pub const BASELINES: [(f64, f64); 3] = [(0.05, 1.0), (0.10, 1.0), (0.35, 0.0)];

/// Fraction of trials in which a fresh sample at `ber` unlocks the right key.
pub fn measured_success_rate(ber: f64, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0;
    for _ in 0..trials {
        let ck = CacheKey::random(&mut rng);
        let theta = IrisCode::random(&mut rng);
        let sample = sample_iris_with(&theta, ber, &mut rng).unwrap();
        if unlock(&lock(&ck, &theta), &sample) == Ok(ck) {
            ok += 1;
        }
    }
    ok as f64 / trials as f64
}
