//! Seeded random streams.
//!
//! Every consumer derives its generator from the single run seed plus a
//! fixed stream label, so adding draws in one module never perturbs another.
//! Labels in use:
//!
//! | label            | consumer                                  |
//! |------------------|-------------------------------------------|
//! | `kmeans.init`    | centroid initialisation                   |
//! | `kmeans.sample`  | training subsample                        |
//! | `kmeans.repair`  | empty-cluster repair                      |
//! | `synth.flights`  | synthetic flight plans                    |
//! | `synth.noise`    | synthetic position noise                  |
//! | `synth.pois`     | synthetic scored point cloud              |
//! | `bench.queries`  | latency benchmark query stream            |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Generator for `label` under run seed `seed`.
pub fn stream(seed: u64, label: &str) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label));
    rng
}
