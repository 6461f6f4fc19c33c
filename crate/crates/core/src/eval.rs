//! Spatial agreement between two POI sets and latency measurement.
//!
//! Matching is one-to-one: every pair closer than the threshold is a
//! candidate, candidates are taken nearest first (ties by `(index_a,
//! index_b)`), and each point is consumed at most once. Duplicate detections
//! near one reference point therefore count once as matched and otherwise as
//! unique.
//!
//! `precision = matched / |B|`, `recall = matched / |A|`; with `A` the
//! reference (kinematic baseline) and `B` the candidate (field) set.

use std::collections::HashMap;
use std::fmt;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::ann::IvfIndex;
use crate::error::{AdfError, Result};
use crate::field::{evaluate, evaluate_with, AdfParams, ScoredPointSet};
use crate::geo::EcefCoord;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchReport {
    pub threshold_m: f64,
    pub matched: usize,
    /// Points of A left unmatched.
    pub unique_a: usize,
    /// Points of B left unmatched.
    pub unique_b: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MatchReport {
    pub fn from_counts(matched: usize, unique_a: usize, unique_b: usize, threshold_m: f64) -> Self {
        let precision = ratio(matched, matched + unique_b);
        let recall = ratio(matched, matched + unique_a);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            threshold_m,
            matched,
            unique_a,
            unique_b,
            precision,
            recall,
            f1,
        }
    }
}

impl fmt::Display for MatchReport {
    /// Tab-separated: threshold, matched, unique_a, unique_b, precision,
    /// recall, f1 (ratios as percentages).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{:.2}\t{:.2}\t{:.2}",
            self.threshold_m,
            self.matched,
            self.unique_a,
            self.unique_b,
            self.precision * 100.0,
            self.recall * 100.0,
            self.f1 * 100.0
        )
    }
}

type Cell = (i64, i64, i64);

fn cell_of(p: &EcefCoord, size: f64) -> Cell {
    (
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    )
}

/// Candidate pairs `(sq_dist, ia, ib)` within `radius`, sorted.
fn candidate_pairs(a: &[EcefCoord], b: &[EcefCoord], radius: f64) -> Vec<(f64, usize, usize)> {
    let mut grid: HashMap<Cell, Vec<usize>> = HashMap::new();
    for (j, p) in b.iter().enumerate() {
        grid.entry(cell_of(p, radius)).or_default().push(j);
    }
    let r2 = radius * radius;
    let mut pairs = Vec::new();
    for (i, p) in a.iter().enumerate() {
        let (cx, cy, cz) = cell_of(p, radius);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(members) = grid.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &j in members {
                        let d2 = p.sq_dist(&b[j]);
                        if d2 <= r2 {
                            pairs.push((d2, i, j));
                        }
                    }
                }
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    pairs
}

/// Greedy nearest-first matching over the sorted pairs with `sq_dist <= r2`.
fn greedy(pairs: &[(f64, usize, usize)], na: usize, nb: usize, r2: f64) -> Vec<(usize, usize)> {
    let mut used_a = vec![false; na];
    let mut used_b = vec![false; nb];
    let mut out = Vec::new();
    for &(d2, i, j) in pairs {
        if d2 > r2 {
            break;
        }
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// Matched index pairs `(ia, ib)` in the order they were accepted.
pub fn matched_pairs(set_a: &[EcefCoord], set_b: &[EcefCoord], threshold_m: f64) -> Vec<(usize, usize)> {
    let pairs = candidate_pairs(set_a, set_b, threshold_m);
    greedy(&pairs, set_a.len(), set_b.len(), threshold_m * threshold_m)
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(AdfError::InvalidParam(format!("threshold must be positive, got {t}")))
    }
}

pub fn spatial_match(set_a: &[EcefCoord], set_b: &[EcefCoord], threshold_m: f64) -> Result<MatchReport> {
    check_threshold(threshold_m)?;
    let m = matched_pairs(set_a, set_b, threshold_m).len();
    Ok(MatchReport::from_counts(m, set_a.len() - m, set_b.len() - m, threshold_m))
}

/// One report per threshold. Candidate pairs are computed once at the
/// largest threshold; each smaller threshold uses the sorted prefix.
pub fn threshold_sweep(set_a: &[EcefCoord], set_b: &[EcefCoord], thresholds: &[f64]) -> Result<Vec<MatchReport>> {
    for &t in thresholds {
        check_threshold(t)?;
    }
    let Some(max_t) = thresholds.iter().copied().reduce(f64::max) else {
        return Ok(Vec::new());
    };
    let pairs = candidate_pairs(set_a, set_b, max_t);
    Ok(thresholds
        .iter()
        .map(|&t| {
            let m = greedy(&pairs, set_a.len(), set_b.len(), t * t).len();
            MatchReport::from_counts(m, set_a.len() - m, set_b.len() - m, t)
        })
        .collect())
}

/// Neighbour retrieval used by [`latency_bench`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    Ivf,
    Brute,
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchMode::Ivf => "ivf",
            BenchMode::Brute => "brute",
        })
    }
}

impl std::str::FromStr for BenchMode {
    type Err = AdfError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ivf" => Ok(BenchMode::Ivf),
            "brute" => Ok(BenchMode::Brute),
            _ => Err(AdfError::InvalidParam(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub mode: BenchMode,
    pub ms_per_query: f64,
    pub n_queries: usize,
    pub params: AdfParams,
    /// Field value per query, in query order.
    pub values: Vec<f64>,
}

pub const MIN_BENCH_QUERIES: usize = 100;

/// Seeded query stream: random indexed points jittered by a normal offset
/// of `sigma0` meters per axis.
pub fn bench_queries(pts: &ScoredPointSet, n_queries: usize, sigma0_m: f64, seed: u64) -> Vec<EcefCoord> {
    let mut r = rng::stream(seed, "bench.queries");
    let jitter = Normal::new(0.0, sigma0_m).expect("sigma0 > 0");
    (0..n_queries)
        .map(|_| {
            let p = pts.positions()[r.random_range(0..pts.len())];
            p + EcefCoord::new(jitter.sample(&mut r), jitter.sample(&mut r), jitter.sample(&mut r))
        })
        .collect()
}

/// Mean wall-clock milliseconds per field evaluation, single-threaded.
pub fn latency_bench(
    pts: &ScoredPointSet,
    idx: &IvfIndex,
    params: &AdfParams,
    mode: BenchMode,
    n_queries: usize,
    seed: u64,
) -> Result<BenchReport> {
    if n_queries < MIN_BENCH_QUERIES {
        return Err(AdfError::InvalidParam(format!(
            "need at least {MIN_BENCH_QUERIES} queries, got {n_queries}"
        )));
    }
    if pts.is_empty() {
        return Err(AdfError::EmptyIndex);
    }
    params.validate()?;
    let queries = bench_queries(pts, n_queries, params.sigma0_m, seed);
    let brute = crate::ann::BruteForce::new(pts.positions());
    let mut values = Vec::with_capacity(n_queries);
    let start = Instant::now();
    for q in &queries {
        let v = match mode {
            BenchMode::Ivf => evaluate(q, pts, idx, params)?,
            BenchMode::Brute => evaluate_with(q, pts, &brute, params)?,
        };
        values.push(v.0);
    }
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    Ok(BenchReport {
        mode,
        ms_per_query: (elapsed / n_queries as f64).max(f64::MIN_POSITIVE),
        n_queries,
        params: *params,
        values,
    })
}
