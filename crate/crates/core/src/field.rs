//! The adaptive density field and the k-NN mean-distance baseline.
//!
//! For a query `x` with retrieved neighbours `i_1..i_k`:
//!
//! ```text
//! sigma_j = sigma0 / (s_{i_j} + eps)
//! F(x)    = sum_j s_{i_j} * exp(-|x - x_{i_j}|^2 / (2 sigma_j^2))
//! ```
//!
//! `F` is an unnormalised influence value, not a probability density. High
//! scores give narrow, tall kernels; low scores give broad, flat ones. In
//! fixed-bandwidth mode every `sigma_j` is the configured constant.
//!
//! The sum only covers the neighbours the index returns, so with an
//! approximate index `F` approximates the full kernel sum. Kernel locality
//! keeps the error from missed distant points small.

use crate::ann::{brute_force_search, IvfIndex, NeighborSet, NeighborSource};
use crate::error::{AdfError, Result};
use crate::geo::EcefCoord;
use crate::par::{self, Exec};
use crate::stats::CompensatedSum;

pub const DEFAULT_SIGMA0_M: f64 = 500.0;
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Kernel terms below this are flushed to zero.
pub const KERNEL_FLUSH: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Bandwidth {
    /// `sigma0 / (score + eps)` per neighbour.
    #[default]
    Adaptive,
    /// Constant kernel width in meters.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdfParams {
    pub sigma0_m: f64,
    pub k: usize,
    pub nprobe: usize,
    pub epsilon: f64,
    pub bandwidth: Bandwidth,
}

impl Default for AdfParams {
    fn default() -> Self {
        Self {
            sigma0_m: DEFAULT_SIGMA0_M,
            k: crate::ann::DEFAULT_K,
            nprobe: crate::ann::DEFAULT_NPROBE,
            epsilon: DEFAULT_EPSILON,
            bandwidth: Bandwidth::Adaptive,
        }
    }
}

impl AdfParams {
    pub fn fixed(sigma_m: f64) -> Self {
        Self {
            bandwidth: Bandwidth::Fixed(sigma_m),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(AdfError::InvalidParam(m.to_string()));
        if !(self.sigma0_m > 0.0 && self.sigma0_m.is_finite()) {
            return bad("sigma0 must be positive");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        if self.k == 0 {
            return bad("k must be >= 1");
        }
        if self.nprobe == 0 {
            return bad("nprobe must be >= 1");
        }
        if let Bandwidth::Fixed(s) = self.bandwidth {
            if !(s > 0.0 && s.is_finite()) {
                return bad("fixed bandwidth must be positive");
            }
        }
        Ok(())
    }
}

/// How negative input scores are handled at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScorePolicy {
    #[default]
    Reject,
    /// Map every score through `ln(1 + e^s)`.
    Softplus,
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Point positions (ECEF meters) with non-negative scores.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredPointSet {
    positions: Vec<EcefCoord>,
    scores: Vec<f64>,
}

impl ScoredPointSet {
    pub fn new(positions: Vec<EcefCoord>, scores: Vec<f64>) -> Result<Self> {
        Self::with_policy(positions, scores, ScorePolicy::Reject)
    }

    pub fn with_policy(
        positions: Vec<EcefCoord>,
        mut scores: Vec<f64>,
        policy: ScorePolicy,
    ) -> Result<Self> {
        if positions.len() != scores.len() {
            return Err(AdfError::InvalidParam(format!(
                "{} positions but {} scores",
                positions.len(),
                scores.len()
            )));
        }
        crate::ann::check_finite(&positions)?;
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(AdfError::NonFiniteInput(i));
        }
        match policy {
            ScorePolicy::Reject => {
                if let Some(i) = scores.iter().position(|&s| s < 0.0) {
                    return Err(AdfError::NegativeScore {
                        index: i,
                        score: scores[i],
                    });
                }
            }
            ScorePolicy::Softplus => scores.iter_mut().for_each(|s| *s = softplus(*s)),
        }
        Ok(Self { positions, scores })
    }

    pub fn positions(&self) -> &[EcefCoord] {
        &self.positions
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn max_score(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }
}

/// Field value at a query location.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct FieldValue(pub f64);

impl FieldValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn adaptive_bandwidth(score: f64, params: &AdfParams) -> f64 {
    match params.bandwidth {
        Bandwidth::Adaptive => params.sigma0_m / (score + params.epsilon),
        Bandwidth::Fixed(s) => s,
    }
}

/// `exp(-sq_dist / (2 sigma^2))`, flushed to zero below [`KERNEL_FLUSH`].
#[inline]
pub fn kernel_contribution(sq_dist: f64, sigma: f64) -> f64 {
    let k = (-0.5 * sq_dist / (sigma * sigma)).exp();
    if k < KERNEL_FLUSH {
        0.0
    } else {
        k
    }
}

/// Score-weighted kernel sum over an already retrieved neighbour set,
/// accumulated nearest first.
pub fn field_from_neighbors(n: &NeighborSet, pts: &ScoredPointSet, params: &AdfParams) -> FieldValue {
    let mut acc = CompensatedSum::default();
    for (i, d2) in n.iter() {
        let s = pts.scores[i];
        acc.add(s * kernel_contribution(d2, adaptive_bandwidth(s, params)));
    }
    FieldValue(acc.value().max(0.0))
}

/// Field value at `query` using any neighbour source.
pub fn evaluate_with<S: NeighborSource + ?Sized>(
    query: &EcefCoord,
    pts: &ScoredPointSet,
    source: &S,
    params: &AdfParams,
) -> Result<FieldValue> {
    if source.is_empty() {
        return Err(AdfError::EmptyIndex);
    }
    let n = source.knn(query, params.k)?;
    Ok(field_from_neighbors(&n, pts, params))
}

/// Field value at `query` through the IVF index (`params.nprobe` lists,
/// clamped to the index's list count).
pub fn evaluate(
    query: &EcefCoord,
    pts: &ScoredPointSet,
    idx: &IvfIndex,
    params: &AdfParams,
) -> Result<FieldValue> {
    evaluate_with(query, pts, &idx.searcher(params.nprobe), params)
}

/// Field at every indexed point. The point itself is one of its own
/// neighbours unless `include_self` is false.
pub fn evaluate_all_with<S: NeighborSource + ?Sized>(
    pts: &ScoredPointSet,
    source: &S,
    params: &AdfParams,
    include_self: bool,
    exec: Exec,
) -> Result<Vec<FieldValue>> {
    if source.is_empty() {
        return Err(AdfError::EmptyIndex);
    }
    par::map_range(exec, pts.len(), |i| {
        let q = &pts.positions[i];
        if include_self {
            return source.knn(q, params.k).map(|n| field_from_neighbors(&n, pts, params));
        }
        let mut n = source.knn(q, params.k + 1)?;
        match n.indices.iter().position(|&j| j == i) {
            Some(p) => {
                n.indices.remove(p);
                n.sq_dists.remove(p);
            }
            None => {
                n.indices.truncate(params.k);
                n.sq_dists.truncate(params.k);
            }
        }
        Ok(field_from_neighbors(&n, pts, params))
    })
    .into_iter()
    .collect()
}

pub fn evaluate_all(pts: &ScoredPointSet, idx: &IvfIndex, params: &AdfParams) -> Result<Vec<FieldValue>> {
    evaluate_all_with(pts, &idx.searcher(params.nprobe), params, true, Exec::default())
}

/// Mean Euclidean distance from `query` to its `k` nearest references.
/// Smaller means denser.
pub fn knn_density(query: &EcefCoord, ref_points: &[EcefCoord], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(AdfError::InvalidParam("k must be >= 1".into()));
    }
    if ref_points.len() < k {
        return Err(AdfError::TooFewPoints {
            needed: k,
            got: ref_points.len(),
        });
    }
    Ok(mean_distance(&brute_force_search(ref_points, query, k)?))
}

/// [`knn_density`] over an arbitrary neighbour source (e.g. the IVF index).
pub fn knn_density_with<S: NeighborSource + ?Sized>(query: &EcefCoord, source: &S, k: usize) -> Result<f64> {
    if source.len() < k {
        return Err(AdfError::TooFewPoints {
            needed: k,
            got: source.len(),
        });
    }
    Ok(mean_distance(&source.knn(query, k)?))
}

fn mean_distance(n: &NeighborSet) -> f64 {
    let mut acc = CompensatedSum::default();
    n.sq_dists.iter().for_each(|d2| acc.add(d2.sqrt()));
    acc.value() / n.len() as f64
}
