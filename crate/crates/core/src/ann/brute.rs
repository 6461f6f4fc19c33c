use super::topk::TopK;
use super::{NeighborSet, NeighborSource};
use crate::error::{AdfError, Result};
use crate::geo::EcefCoord;

/// Exact k nearest neighbours by linear scan.
pub fn brute_force_search(points: &[EcefCoord], query: &EcefCoord, k: usize) -> Result<NeighborSet> {
    if points.is_empty() {
        return Err(AdfError::EmptyIndex);
    }
    if k == 0 {
        return Err(AdfError::InvalidParam("k must be >= 1".into()));
    }
    let mut top = TopK::new(k);
    for (i, p) in points.iter().enumerate() {
        top.push(p.sq_dist(query), i);
    }
    Ok(top.into_sorted())
}

/// [`NeighborSource`] adaptor for [`brute_force_search`].
#[derive(Debug, Clone, Copy)]
pub struct BruteForce<'a> {
    points: &'a [EcefCoord],
}

impl<'a> BruteForce<'a> {
    pub fn new(points: &'a [EcefCoord]) -> Self {
        Self { points }
    }
}

impl NeighborSource for BruteForce<'_> {
    fn knn(&self, query: &EcefCoord, k: usize) -> Result<NeighborSet> {
        brute_force_search(self.points, query, k)
    }

    fn len(&self) -> usize {
        self.points.len()
    }
}
