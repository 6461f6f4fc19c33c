//! Inverted-file approximate k-NN over 3D ECEF points.
//!
//! Points are partitioned by their nearest k-means centroid. A query scans
//! only the `nprobe` partitions whose centroids are closest to it and returns
//! the exact k nearest among those candidates. [`brute_force_search`] is the
//! exact reference.
//!
//! All distances are squared Euclidean. Ties are broken by the smaller point
//! index, so results are deterministic.

mod brute;
mod ivf;
mod kmeans;
mod snapshot;
mod topk;

pub use brute::{brute_force_search, BruteForce};
pub use ivf::{default_nlist, search, search_batch, train, IvfIndex, IvfSearcher};
pub use kmeans::{KMeansConfig, KMeansInit};
pub use snapshot::{load_snapshot, read_snapshot, save_snapshot, write_snapshot};

use crate::error::{AdfError, Result};
use crate::geo::EcefCoord;

/// Default number of partitions probed per query.
pub const DEFAULT_NPROBE: usize = 16;
/// Default number of neighbors retrieved per query.
pub const DEFAULT_K: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchParams {
    pub k: usize,
    pub nprobe: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            nprobe: DEFAULT_NPROBE,
        }
    }
}

impl SearchParams {
    pub fn new(k: usize, nprobe: usize) -> Self {
        Self { k, nprobe }
    }

    pub fn validate(&self, nlist: usize) -> Result<()> {
        if self.k == 0 {
            return Err(AdfError::InvalidParam("k must be >= 1".into()));
        }
        if self.nprobe == 0 || self.nprobe > nlist {
            return Err(AdfError::InvalidParam(format!(
                "nprobe must be in 1..={nlist}, got {}",
                self.nprobe
            )));
        }
        Ok(())
    }
}

/// Neighbors of one query, nearest first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborSet {
    pub indices: Vec<usize>,
    pub sq_dists: Vec<f64>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.sq_dists.iter().copied())
    }
}

/// Anything that can answer k-NN queries over a fixed point set.
pub trait NeighborSource: Sync {
    fn knn(&self, query: &EcefCoord, k: usize) -> Result<NeighborSet>;

    /// Number of indexed points.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) fn check_finite(points: &[EcefCoord]) -> Result<()> {
    match points.iter().position(|p| !p.is_finite()) {
        Some(i) => Err(AdfError::NonFiniteInput(i)),
        None => Ok(()),
    }
}
