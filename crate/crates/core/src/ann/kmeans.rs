use rand::seq::index::sample;
use rand::Rng;

use crate::geo::EcefCoord;
use crate::par::{self, Exec};
use crate::rng;

/// Centroid initialisation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KMeansInit {
    /// Distinct training points drawn uniformly at random.
    #[default]
    RandomPoints,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iters: usize,
    pub seed: u64,
    pub init: KMeansInit,
    /// Training uses at most this many points per centroid (seeded
    /// subsample); all points are still assigned afterwards.
    pub max_points_per_centroid: usize,
    pub exec: Exec,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iters: 25,
            seed: 0,
            init: KMeansInit::RandomPoints,
            max_points_per_centroid: 64,
            exec: Exec::default(),
        }
    }
}

impl KMeansConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Index of the nearest centroid; ties go to the smaller index.
#[inline]
pub(crate) fn nearest_centroid(p: &EcefCoord, centroids: &[EcefCoord]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = p.sq_dist(c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

pub(crate) fn assign(points: &[EcefCoord], centroids: &[EcefCoord], exec: Exec) -> Vec<usize> {
    par::map(exec, points, |p| nearest_centroid(p, centroids))
}

/// Lloyd iterations; returns `nlist` centroids. Caller guarantees
/// `points.len() >= nlist >= 1`.
pub(crate) fn lloyd(points: &[EcefCoord], nlist: usize, cfg: &KMeansConfig) -> Vec<EcefCoord> {
    let cap = cfg.max_points_per_centroid.max(1).saturating_mul(nlist);
    let train: Vec<EcefCoord> = if points.len() > cap {
        let mut r = rng::stream(cfg.seed, "kmeans.sample");
        let mut idx = sample(&mut r, points.len(), cap).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| points[i]).collect()
    } else {
        points.to_vec()
    };

    let mut centroids: Vec<EcefCoord> = match cfg.init {
        KMeansInit::RandomPoints => {
            let mut r = rng::stream(cfg.seed, "kmeans.init");
            sample(&mut r, train.len(), nlist)
                .into_iter()
                .map(|i| train[i])
                .collect()
        }
    };

    let mut repair_rng = rng::stream(cfg.seed, "kmeans.repair");
    let mut labels = vec![usize::MAX; train.len()];
    for _ in 0..cfg.max_iters.max(1) {
        let next = assign(&train, &centroids, cfg.exec);
        let changed = next != labels;
        labels = next;
        if !changed {
            break;
        }

        // Accumulate relative to the first training point to keep the sums
        // small compared to Earth-radius magnitudes.
        let base = train[0];
        let mut sums = vec![EcefCoord::default(); nlist];
        let mut counts = vec![0usize; nlist];
        for (p, &l) in train.iter().zip(&labels) {
            sums[l] = sums[l] + (*p - base);
            counts[l] += 1;
        }
        for j in 0..nlist {
            if counts[j] > 0 {
                centroids[j] = base + sums[j] * (1.0 / counts[j] as f64);
            }
        }

        // Empty clusters take over the member of the largest cluster that
        // lies farthest from its centroid.
        for j in 0..nlist {
            if counts[j] != 0 {
                continue;
            }
            let big = (0..nlist)
                .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
                .expect("nlist >= 1");
            let far = train
                .iter()
                .enumerate()
                .filter(|(i, _)| labels[*i] == big)
                .max_by(|(ia, a), (ib, b)| {
                    a.sq_dist(&centroids[big])
                        .total_cmp(&b.sq_dist(&centroids[big]))
                        .then(ib.cmp(ia))
                })
                .map(|(i, _)| i);
            match far {
                Some(i) if counts[big] > 1 => {
                    centroids[j] = train[i];
                    labels[i] = j;
                    counts[big] -= 1;
                    counts[j] = 1;
                }
                _ => {
                    // Everything left is duplicated; any training point will do.
                    let i = repair_rng.random_range(0..train.len());
                    centroids[j] = train[i];
                }
            }
        }
    }
    centroids
}
