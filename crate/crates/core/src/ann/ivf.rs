use super::kmeans::{assign, lloyd, KMeansConfig};
use super::topk::TopK;
use super::{check_finite, NeighborSet, NeighborSource, SearchParams};
use crate::error::{AdfError, Result};
use crate::geo::EcefCoord;
use crate::par::{self, Exec};

/// Partition count used for large inputs.
pub const MAX_NLIST: usize = 4096;

/// `min(4096, max(1, floor(sqrt(n)) * 4))`, never more than `n`.
pub fn default_nlist(n: usize) -> usize {
    let root = (n as f64).sqrt().floor() as usize;
    MAX_NLIST.min((root * 4).max(1)).min(n.max(1))
}

/// Trained inverted-file index. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct IvfIndex {
    centroids: Vec<EcefCoord>,
    lists: Vec<Vec<usize>>,
    points: Vec<EcefCoord>,
    /// Per-list copies of member coordinates, aligned with `lists`.
    list_points: Vec<Vec<EcefCoord>>,
}

/// Runs k-means with `nlist` clusters and files every point under its
/// nearest centroid.
pub fn train(points: &[EcefCoord], nlist: usize, cfg: &KMeansConfig) -> Result<IvfIndex> {
    if nlist == 0 {
        return Err(AdfError::InvalidParam("nlist must be >= 1".into()));
    }
    if points.len() < nlist {
        return Err(AdfError::TooFewPoints {
            needed: nlist,
            got: points.len(),
        });
    }
    check_finite(points)?;
    let centroids = lloyd(points, nlist, cfg);
    let labels = assign(points, &centroids, cfg.exec);
    let mut lists = vec![Vec::new(); nlist];
    for (i, &l) in labels.iter().enumerate() {
        lists[l].push(i);
    }
    Ok(IvfIndex::from_parts(centroids, lists, points.to_vec()))
}

impl IvfIndex {
    /// Assembles an index from already-consistent parts (used by the
    /// snapshot loader, which validates beforehand).
    pub(crate) fn from_parts(
        centroids: Vec<EcefCoord>,
        lists: Vec<Vec<usize>>,
        points: Vec<EcefCoord>,
    ) -> Self {
        let list_points = lists
            .iter()
            .map(|l| l.iter().map(|&i| points[i]).collect())
            .collect();
        Self {
            centroids,
            lists,
            points,
            list_points,
        }
    }

    pub fn nlist(&self) -> usize {
        self.centroids.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroids(&self) -> &[EcefCoord] {
        &self.centroids
    }

    pub fn lists(&self) -> &[Vec<usize>] {
        &self.lists
    }

    pub fn points(&self) -> &[EcefCoord] {
        &self.points
    }

    /// Indices of the `nprobe` nearest centroids (ties to smaller index).
    pub fn probe(&self, query: &EcefCoord, nprobe: usize) -> Vec<usize> {
        let mut top = TopK::new(nprobe.min(self.nlist()).max(1));
        for (j, c) in self.centroids.iter().enumerate() {
            top.push(c.sq_dist(query), j);
        }
        top.into_sorted().indices
    }

    /// True when the inverted lists partition `0..len()`.
    pub fn check_partition(&self) -> bool {
        let mut seen = vec![false; self.points.len()];
        for &i in self.lists.iter().flatten() {
            if i >= seen.len() || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        seen.into_iter().all(|s| s)
    }

    /// Searcher probing `nprobe` lists, clamped to `1..=nlist`.
    pub fn searcher(&self, nprobe: usize) -> IvfSearcher<'_> {
        IvfSearcher {
            index: self,
            nprobe: nprobe.clamp(1, self.nlist().max(1)),
        }
    }
}

/// Exact k-NN restricted to the union of the probed lists.
pub fn search(idx: &IvfIndex, query: &EcefCoord, params: &SearchParams) -> Result<NeighborSet> {
    if idx.is_empty() {
        return Err(AdfError::EmptyIndex);
    }
    params.validate(idx.nlist())?;
    let mut top = TopK::new(params.k);
    for j in idx.probe(query, params.nprobe) {
        for (p, &i) in idx.list_points[j].iter().zip(&idx.lists[j]) {
            top.push(p.sq_dist(query), i);
        }
    }
    Ok(top.into_sorted())
}

/// Searches many queries; output order follows `queries`.
pub fn search_batch(
    idx: &IvfIndex,
    queries: &[EcefCoord],
    params: &SearchParams,
    exec: Exec,
) -> Result<Vec<NeighborSet>> {
    par::map(exec, queries, |q| search(idx, q, params))
        .into_iter()
        .collect()
}

/// [`NeighborSource`] over an [`IvfIndex`] with a fixed probe count.
#[derive(Debug, Clone, Copy)]
pub struct IvfSearcher<'a> {
    index: &'a IvfIndex,
    nprobe: usize,
}

impl NeighborSource for IvfSearcher<'_> {
    fn knn(&self, query: &EcefCoord, k: usize) -> Result<NeighborSet> {
        search(self.index, query, &SearchParams::new(k, self.nprobe))
    }

    fn len(&self) -> usize {
        self.index.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::brute_force_search;
    use crate::ann::kmeans::nearest_centroid;
    use crate::ann::test_support::{oracle_knn, random_points};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> KMeansConfig {
        KMeansConfig::with_seed(42)
    }

    #[test]
    fn default_nlist_rule() {
        assert_eq!(default_nlist(1), 1);
        assert_eq!(default_nlist(4), 4);
        assert_eq!(default_nlist(100), 40);
        assert_eq!(default_nlist(10_000), 400);
        assert_eq!(default_nlist(1_000_000), 4000);
        assert_eq!(default_nlist(10_000_000), 4096);
    }

    #[test]
    fn single_list_centroid_is_mean() {
        let pts = random_points(50, 1000.0, 1);
        let idx = train(&pts, 1, &cfg()).unwrap();
        let base = pts[0];
        let mut s = EcefCoord::default();
        for p in &pts {
            s = s + (*p - base);
        }
        let mean = base + s * (1.0 / 50.0);
        assert!(idx.centroids()[0].dist(&mean) < 1e-6);
        assert_eq!(idx.lists()[0], (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn two_separated_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = EcefCoord::new(-1_334_000.0, 5_327_000.0, 3_236_000.0);
        let b = a + EcefCoord::new(10_000.0, 0.0, 0.0);
        let mut pts = Vec::new();
        for c in [a, b] {
            for _ in 0..100 {
                pts.push(
                    c + EcefCoord::new(
                        rng.random_range(-300.0..300.0),
                        rng.random_range(-300.0..300.0),
                        rng.random_range(-300.0..300.0),
                    ),
                );
            }
        }
        let idx = train(&pts, 2, &cfg()).unwrap();
        let mut lists: Vec<Vec<usize>> = idx.lists().to_vec();
        lists.sort();
        assert_eq!(lists[0], (0..100).collect::<Vec<_>>());
        assert_eq!(lists[1], (100..200).collect::<Vec<_>>());
        for (j, l) in idx.lists().iter().enumerate() {
            for &i in l {
                assert_eq!(nearest_centroid(&pts[i], idx.centroids()), j);
            }
        }
    }

    #[test]
    fn one_point_per_list_when_n_equals_nlist() {
        let pts = random_points(37, 5000.0, 5);
        let idx = train(&pts, 37, &cfg()).unwrap();
        assert!(idx.lists().iter().all(|l| l.len() == 1));
        assert!(idx.check_partition());
    }

    #[test]
    fn train_errors() {
        let pts = random_points(3, 10.0, 1);
        assert!(matches!(
            train(&pts, 4, &cfg()),
            Err(AdfError::TooFewPoints { needed: 4, got: 3 })
        ));
        let mut bad = pts.clone();
        bad[1].y = f64::NAN;
        assert!(matches!(train(&bad, 2, &cfg()), Err(AdfError::NonFiniteInput(1))));
    }

    #[test]
    fn query_on_indexed_point() {
        let pts = random_points(500, 10_000.0, 8);
        let idx = train(&pts, 20, &cfg()).unwrap();
        let n = search(&idx, &pts[123], &SearchParams::new(5, 20)).unwrap();
        assert_eq!(n.indices[0], 123);
        assert_eq!(n.sq_dists[0], 0.0);
    }

    #[test]
    fn full_probe_matches_brute_force() {
        let pts = random_points(1000, 20_000.0, 9);
        let idx = train(&pts, 30, &cfg()).unwrap();
        for q in random_points(50, 20_000.0, 10) {
            let a = search(&idx, &q, &SearchParams::new(10, 30)).unwrap();
            let b = brute_force_search(&pts, &q, 10).unwrap();
            let o = oracle_knn(&pts, &q, 10);
            assert_eq!(a, b);
            assert_eq!(a.indices, o.iter().map(|x| x.0).collect::<Vec<_>>());
        }
    }

    #[test]
    fn candidate_exhaustion() {
        let pts = vec![EcefCoord::new(1.0, 1.0, 1.0)];
        let idx = train(&pts, 1, &cfg()).unwrap();
        let n = search(&idx, &EcefCoord::default(), &SearchParams::new(5, 1)).unwrap();
        assert_eq!(n.len(), 1);
    }

    #[test]
    fn invalid_params() {
        let pts = random_points(10, 10.0, 1);
        let idx = train(&pts, 2, &cfg()).unwrap();
        assert!(search(&idx, &pts[0], &SearchParams::new(0, 1)).is_err());
        assert!(search(&idx, &pts[0], &SearchParams::new(1, 3)).is_err());
    }

    #[test]
    fn deterministic_training() {
        let pts = random_points(3000, 40_000.0, 21);
        let a = train(&pts, 60, &cfg()).unwrap();
        let b = train(&pts, 60, &cfg()).unwrap();
        assert_eq!(a, b);
        let mut seq = cfg();
        seq.exec = Exec::Sequential;
        assert_eq!(a, train(&pts, 60, &seq).unwrap());
    }

    #[test]
    fn subsampled_training_still_partitions() {
        let pts = random_points(5000, 40_000.0, 22);
        let mut c = cfg();
        c.max_points_per_centroid = 4;
        let idx = train(&pts, 50, &c).unwrap();
        assert!(idx.check_partition());
        assert_eq!(idx.lists().iter().map(Vec::len).sum::<usize>(), 5000);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn partition_and_nprobe_monotonicity(seed in 0u64..1000, nlist in 1usize..40, k in 1usize..30) {
            let pts = random_points(400, 8000.0, seed);
            let idx = train(&pts, nlist, &KMeansConfig::with_seed(seed)).unwrap();
            prop_assert!(idx.check_partition());
            let q = random_points(1, 8000.0, seed + 1)[0];
            let mut prev: Option<NeighborSet> = None;
            for p in 1..=nlist {
                let n = search(&idx, &q, &SearchParams::new(k, p)).unwrap();
                if let Some(prev) = &prev {
                    prop_assert!(n.len() >= prev.len());
                    for (a, b) in prev.sq_dists.iter().zip(&n.sq_dists) {
                        prop_assert!(b <= a);
                    }
                }
                prev = Some(n);
            }
            let full = prev.unwrap();
            let exact = brute_force_search(&pts, &q, k).unwrap();
            prop_assert_eq!(full, exact);
        }
    }
}
