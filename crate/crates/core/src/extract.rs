//! Field evaluation along trajectories and per-trajectory relative
//! thresholds.
//!
//! A sample is a POI when its field value is at or above the given
//! percentile (linear interpolation) of the values seen along the same
//! trajectory. The threshold is relative to each flight, never global, so a
//! flight crossing a dense region must beat its own elevated background.
//! Ties count as POIs; a constant trace therefore flags every sample.

use crate::ann::{IvfIndex, NeighborSource};
use crate::error::{AdfError, Result};
use crate::field::{evaluate_with, knn_density_with, AdfParams, FieldValue, ScoredPointSet};
use crate::geo::{geodetic_to_ecef, EcefCoord, Ellipsoid, GeodeticCoord};
use crate::par::{self, Exec};
use crate::stats::percentile_linear;
use crate::trajectory::Trajectory;

pub const DEFAULT_PERCENTILE: f64 = 75.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub geo: GeodeticCoord,
    pub f: FieldValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrace {
    pub flight_id: String,
    pub samples: Vec<TraceSample>,
    pub poi_mask: Vec<bool>,
}

impl FieldTrace {
    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.f.0).collect()
    }

    pub fn poi_count(&self) -> usize {
        self.poi_mask.iter().filter(|&&m| m).count()
    }

    /// ECEF positions of flagged samples, in sample order.
    pub fn flagged_ecef(&self) -> Vec<EcefCoord> {
        let ell = Ellipsoid::WGS84;
        self.samples
            .iter()
            .zip(&self.poi_mask)
            .filter(|(_, &m)| m)
            .map(|(s, _)| geodetic_to_ecef(&s.geo, &ell))
            .collect()
    }
}

fn check_percentile(p: f64) -> Result<()> {
    if p > 0.0 && p < 100.0 {
        Ok(())
    } else {
        Err(AdfError::InvalidParam(format!("percentile must be in (0, 100), got {p}")))
    }
}

/// `v >= P_p(values)`.
pub fn mask_at_or_above(values: &[f64], percentile: f64) -> Vec<bool> {
    match percentile_linear(values, percentile) {
        Some(cut) => values.iter().map(|&v| v >= cut).collect(),
        None => Vec::new(),
    }
}

/// `v <= P_p(values)`.
pub fn mask_at_or_below(values: &[f64], percentile: f64) -> Vec<bool> {
    match percentile_linear(values, percentile) {
        Some(cut) => values.iter().map(|&v| v <= cut).collect(),
        None => Vec::new(),
    }
}

/// Field values along `traj` from any neighbour source, thresholded at
/// `percentile`.
pub fn evaluate_trace_with<S: NeighborSource + ?Sized>(
    traj: &Trajectory,
    pts: &ScoredPointSet,
    source: &S,
    params: &AdfParams,
    percentile: f64,
) -> Result<FieldTrace> {
    check_percentile(percentile)?;
    if traj.is_empty() {
        return Err(AdfError::TooShort {
            flight_id: traj.flight_id.clone(),
            needed: 1,
            got: 0,
        });
    }
    let ell = Ellipsoid::WGS84;
    let samples = traj
        .samples
        .iter()
        .map(|s| {
            let f = evaluate_with(&geodetic_to_ecef(&s.geo, &ell), pts, source, params)?;
            Ok(TraceSample { t: s.t, geo: s.geo, f })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trace = FieldTrace {
        flight_id: traj.flight_id.clone(),
        samples,
        poi_mask: Vec::new(),
    };
    trace.poi_mask = mask_at_or_above(&trace.values(), percentile);
    Ok(trace)
}

/// Field values along `traj` through the IVF index, masked at the 75th
/// percentile.
pub fn evaluate_trace(
    traj: &Trajectory,
    pts: &ScoredPointSet,
    idx: &IvfIndex,
    params: &AdfParams,
) -> Result<FieldTrace> {
    evaluate_trace_with(traj, pts, &idx.searcher(params.nprobe), params, DEFAULT_PERCENTILE)
}

/// Recomputes the mask of `trace` at a different percentile.
pub fn relative_threshold(trace: &FieldTrace, percentile: f64) -> Result<FieldTrace> {
    check_percentile(percentile)?;
    if trace.samples.is_empty() {
        return Err(AdfError::EmptyInput);
    }
    Ok(FieldTrace {
        poi_mask: mask_at_or_above(&trace.values(), percentile),
        ..trace.clone()
    })
}

/// Evaluates many trajectories; each trace depends only on its own
/// trajectory. Output order follows input.
pub fn extract_batch<S: NeighborSource + ?Sized>(
    trajs: &[Trajectory],
    pts: &ScoredPointSet,
    source: &S,
    params: &AdfParams,
    percentile: f64,
    exec: Exec,
) -> Vec<Result<FieldTrace>> {
    par::map(exec, trajs, |t| evaluate_trace_with(t, pts, source, params, percentile))
}

/// k-NN mean-distance baseline along one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTrace {
    pub flight_id: String,
    pub geo: Vec<GeodeticCoord>,
    /// Mean distance to the k nearest reference points (m).
    pub densities: Vec<f64>,
    pub poi_mask: Vec<bool>,
}

impl DensityTrace {
    pub fn flagged_ecef(&self) -> Vec<EcefCoord> {
        let ell = Ellipsoid::WGS84;
        self.geo
            .iter()
            .zip(&self.poi_mask)
            .filter(|(_, &m)| m)
            .map(|(g, _)| geodetic_to_ecef(g, &ell))
            .collect()
    }
}

/// Flags samples whose mean k-NN distance is at or below the
/// `percentile`-th percentile of the trajectory's own distances.
pub fn knn_density_trace<S: NeighborSource + ?Sized>(
    traj: &Trajectory,
    refs: &S,
    k: usize,
    percentile: f64,
) -> Result<DensityTrace> {
    check_percentile(percentile)?;
    let ell = Ellipsoid::WGS84;
    let densities = traj
        .samples
        .iter()
        .map(|s| knn_density_with(&geodetic_to_ecef(&s.geo, &ell), refs, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityTrace {
        flight_id: traj.flight_id.clone(),
        geo: traj.samples.iter().map(|s| s.geo).collect(),
        poi_mask: mask_at_or_below(&densities, percentile),
        densities,
    })
}
