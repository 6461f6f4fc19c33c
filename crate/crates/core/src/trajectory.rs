//! Kinematic residual pipeline that labels trajectory samples as POIs.
//!
//! Per flight:
//! 1. positions in an ENU frame anchored at the first sample, velocities
//!    (reported or differentiated) and accelerations;
//! 2. curvature `|v x a| / |v|^3` and a flight-specific smoothing factor
//!    `alpha = ln 5 / kappa_95`;
//! 3. one-step-ahead prediction blending a constant-acceleration step and a
//!    cubic Hermite extrapolation with weight `w = exp(-alpha kappa)`;
//! 4. residuals on the interior samples `2..n-2`, centred, scored by
//!    Mahalanobis distance under `Cov + lambda I` and divided by
//!    `sqrt(dt / mean dt)`;
//! 5. min-max normalisation per flight and a fixed score threshold.

use std::ops::Range;

use nalgebra::{Matrix3, Vector3};

use crate::error::{AdfError, Result};
use crate::geo::{geodetic_to_ecef, Ellipsoid, EnuCoord, EnuFrame, GeodeticCoord};
use crate::par::{self, Exec};
use crate::stats::{mean, percentile_linear};

pub type Vec3 = Vector3<f64>;

/// Minimum samples for the prediction pipeline (non-empty interior).
pub const MIN_SAMPLES: usize = 5;
/// Minimum interior residuals for a covariance estimate.
pub const MIN_RESIDUALS: usize = 4;
/// Curvature is zero below this speed (m/s).
pub const SPEED_GUARD: f64 = 0.1;
/// Floor for the 95th-percentile curvature (1/m).
pub const KAPPA_FLOOR: f64 = 1e-9;
/// Tikhonov term added to the residual covariance (m^2).
pub const DEFAULT_LAMBDA: f64 = 1e-5;
/// Denominator guard in min-max normalisation.
pub const NORM_EPS: f64 = 1e-12;
/// Loss spreads at or below this are treated as flat (no POIs).
pub const FLAT_LOSS_TOL: f64 = 1e-3;
pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    /// Seconds.
    pub t: f64,
    pub geo: GeodeticCoord,
    /// Velocity in the local ENU frame at this sample (m/s), if reported.
    pub vel_enu: Option<EnuCoord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub flight_id: String,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    /// Validates finiteness and strictly increasing time.
    pub fn new(flight_id: impl Into<String>, samples: Vec<TrajectorySample>) -> Result<Self> {
        let t = Self {
            flight_id: flight_id.into(),
            samples,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            let vel_ok = s
                .vel_enu
                .is_none_or(|v| v.east_m.is_finite() && v.north_m.is_finite() && v.up_m.is_finite());
            if !s.t.is_finite() || !s.geo.is_finite() || !vel_ok {
                return Err(AdfError::NonFiniteInput(i));
            }
            if i > 0 && s.t <= self.samples[i - 1].t {
                return Err(AdfError::NonMonotoneTime {
                    flight_id: self.flight_id.clone(),
                    index: i,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    fn require(&self, needed: usize) -> Result<()> {
        if self.samples.len() < needed {
            return Err(AdfError::TooShort {
                flight_id: self.flight_id.clone(),
                needed,
                got: self.samples.len(),
            });
        }
        Ok(())
    }
}

/// Interior sample range `2..n-2`.
pub fn interior_range(n: usize) -> Range<usize> {
    2..n.saturating_sub(2).max(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicSeries {
    /// ENU about the first sample (m).
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub accelerations: Vec<Vec3>,
    /// 1/m, non-negative.
    pub curvatures: Vec<f64>,
}

/// Time derivative of a sampled vector series, second-order accurate on
/// non-uniform grids: three-point central stencil inside, three-point
/// one-sided stencils at both ends. Requires at least three samples.
pub fn time_gradient(values: &[Vec3], t: &[f64]) -> Vec<Vec3> {
    let n = values.len();
    debug_assert!(n >= 3 && t.len() == n);
    let mut out = vec![Vec3::zeros(); n];
    for i in 1..n - 1 {
        let hs = t[i] - t[i - 1];
        let hd = t[i + 1] - t[i];
        out[i] = (values[i + 1] * (hs * hs) + values[i] * (hd * hd - hs * hs) - values[i - 1] * (hd * hd))
            / (hs * hd * (hd + hs));
    }
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    out[0] = values[0] * (-(2.0 * h1 + h2) / (h1 * (h1 + h2)))
        + values[1] * ((h1 + h2) / (h1 * h2))
        - values[2] * (h1 / (h2 * (h1 + h2)));
    let (h1, h2) = (t[n - 2] - t[n - 3], t[n - 1] - t[n - 2]);
    out[n - 1] = values[n - 3] * (h2 / (h1 * (h1 + h2))) - values[n - 2] * ((h1 + h2) / (h1 * h2))
        + values[n - 1] * ((2.0 * h2 + h1) / (h2 * (h1 + h2)));
    out
}

/// `|v x a| / |v|^3`, zero below [`SPEED_GUARD`].
pub fn curvature(v: &Vec3, a: &Vec3) -> f64 {
    let speed = v.norm();
    if speed < SPEED_GUARD {
        return 0.0;
    }
    v.cross(a).norm() / (speed * speed * speed)
}

fn enu_vec(e: &EnuCoord) -> Vec3 {
    Vec3::new(e.east_m, e.north_m, e.up_m)
}

pub fn derive_kinematics(traj: &Trajectory) -> Result<KinematicSeries> {
    traj.require(MIN_SAMPLES)?;
    traj.validate()?;
    let ell = Ellipsoid::WGS84;
    let frame = EnuFrame::new(traj.samples[0].geo, &ell);
    let t = traj.times();
    let positions: Vec<Vec3> = traj
        .samples
        .iter()
        .map(|s| enu_vec(&frame.to_enu(&geodetic_to_ecef(&s.geo, &ell))))
        .collect();

    let diffed = time_gradient(&positions, &t);
    let velocities: Vec<Vec3> = traj
        .samples
        .iter()
        .zip(diffed)
        .map(|(s, fd)| match s.vel_enu {
            // Reported velocity is in the sample's own ENU frame.
            Some(v) => {
                let local = EnuFrame::new(s.geo, &ell);
                enu_vec(&frame.rotate_to_enu(&local.rotate_to_ecef(&v)))
            }
            None => fd,
        })
        .collect();
    let accelerations = time_gradient(&velocities, &t);
    let curvatures = velocities
        .iter()
        .zip(&accelerations)
        .map(|(v, a)| curvature(v, a))
        .collect();
    Ok(KinematicSeries {
        positions,
        velocities,
        accelerations,
        curvatures,
    })
}

/// `ln 5 / max(kappa_95, KAPPA_FLOOR)`.
pub fn smoothing_alpha(curvatures: &[f64]) -> f64 {
    let k95 = percentile_linear(curvatures, 95.0).unwrap_or(0.0);
    5f64.ln() / k95.max(KAPPA_FLOOR)
}

/// Weight of the constant-acceleration predictor, `exp(-alpha kappa)`.
pub fn blend_weight(alpha: f64, kappa: f64) -> f64 {
    (-alpha * kappa).exp()
}

/// Cubic Hermite curve through `(t0, p0, m0)` and `(t1, p1, m1)` evaluated
/// at `t` (extrapolates when `t` lies outside `[t0, t1]`).
pub fn hermite(t0: f64, p0: &Vec3, m0: &Vec3, t1: f64, p1: &Vec3, m1: &Vec3, t: f64) -> Vec3 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    p0 * h00 + m0 * (h10 * h) + p1 * h01 + m1 * (h11 * h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSeries {
    pub interior: Range<usize>,
    pub predicted: Vec<Vec3>,
    pub residuals: Vec<Vec3>,
    pub weights: Vec<f64>,
    pub alpha: f64,
}

/// One-step-ahead blended prediction for each interior sample `i`:
/// constant acceleration from `i-1`, and the Hermite segment over
/// `[t_{i-2}, t_{i-1}]` extrapolated to `t_i`.
pub fn predict_blended(kin: &KinematicSeries, traj: &Trajectory) -> Result<PredictionSeries> {
    traj.require(MIN_SAMPLES)?;
    let n = traj.len();
    if kin.positions.len() != n {
        return Err(AdfError::InvalidParam("kinematics do not match trajectory".into()));
    }
    let t = traj.times();
    let alpha = smoothing_alpha(&kin.curvatures);
    let interior = interior_range(n);
    let (p, v, a) = (&kin.positions, &kin.velocities, &kin.accelerations);
    let mut predicted = Vec::with_capacity(interior.len());
    let mut residuals = Vec::with_capacity(interior.len());
    let mut weights = Vec::with_capacity(interior.len());
    for i in interior.clone() {
        let dt = t[i] - t[i - 1];
        let ca = p[i - 1] + v[i - 1] * dt + a[i - 1] * (0.5 * dt * dt);
        let spline = hermite(t[i - 2], &p[i - 2], &v[i - 2], t[i - 1], &p[i - 1], &v[i - 1], t[i]);
        let w = blend_weight(alpha, kin.curvatures[i]);
        let hat = ca * w + spline * (1.0 - w);
        residuals.push(hat - p[i]);
        predicted.push(hat);
        weights.push(w);
    }
    Ok(PredictionSeries {
        interior,
        predicted,
        residuals,
        weights,
        alpha,
    })
}

/// Mahalanobis distances of centred residuals under `Cov + lambda I`
/// (sample covariance, `m - 1` denominator).
pub fn mahalanobis_distances(residuals: &[Vec3], lambda: f64) -> Result<Vec<f64>> {
    let m = residuals.len();
    if m < MIN_RESIDUALS {
        return Err(AdfError::TooFewPoints {
            needed: MIN_RESIDUALS,
            got: m,
        });
    }
    let mean_r = residuals.iter().fold(Vec3::zeros(), |acc, r| acc + r) / m as f64;
    let centred: Vec<Vec3> = residuals.iter().map(|r| r - mean_r).collect();
    let cov = centred.iter().fold(Matrix3::zeros(), |acc, r| acc + r * r.transpose()) / (m - 1) as f64
        + Matrix3::identity() * lambda;
    let inv = cov
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| cov.try_inverse())
        .ok_or_else(|| AdfError::InvalidParam("residual covariance is singular".into()))?;
    Ok(centred
        .iter()
        .map(|r| (r.transpose() * inv * r)[(0, 0)].max(0.0).sqrt())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossSeries {
    pub interior: Range<usize>,
    pub distances: Vec<f64>,
    pub time_factors: Vec<f64>,
    pub losses: Vec<f64>,
    /// Min-max normalised losses in [0, 1].
    pub scores: Vec<f64>,
}

impl LossSeries {
    pub fn poi_mask(&self, threshold: f64) -> Vec<bool> {
        self.scores.iter().map(|&s| s >= threshold).collect()
    }
}

pub fn mahalanobis_loss(pred: &PredictionSeries, traj: &Trajectory, lambda: f64) -> Result<LossSeries> {
    if pred.residuals.len() < MIN_RESIDUALS {
        return Err(AdfError::TooShort {
            flight_id: traj.flight_id.clone(),
            needed: MIN_RESIDUALS + 4,
            got: traj.len(),
        });
    }
    let distances = mahalanobis_distances(&pred.residuals, lambda)?;
    let t = traj.times();
    let dts: Vec<f64> = pred.interior.clone().map(|i| t[i] - t[i - 1]).collect();
    let mean_dt = mean(&dts);
    let time_factors: Vec<f64> = dts.iter().map(|dt| (dt / mean_dt).sqrt()).collect();
    let losses: Vec<f64> = distances.iter().zip(&time_factors).map(|(d, f)| d / f).collect();
    let scores = normalize_scores(&losses);
    Ok(LossSeries {
        interior: pred.interior.clone(),
        distances,
        time_factors,
        losses,
        scores,
    })
}

/// `(L - min) / (max - min + eps)`; all zeros when the spread is at most
/// [`FLAT_LOSS_TOL`].
pub fn normalize_scores(losses: &[f64]) -> Vec<f64> {
    let (lo, hi) = losses
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| (lo.min(l), hi.max(l)));
    if losses.is_empty() || hi - lo <= FLAT_LOSS_TOL {
        return vec![0.0; losses.len()];
    }
    losses
        .iter()
        .map(|&l| ((l - lo) / (hi - lo + NORM_EPS)).clamp(0.0, 1.0))
        .collect()
}

/// A flagged trajectory sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PoiRecord {
    pub flight_id: String,
    pub point_index: usize,
    pub lon_deg: f64,
    pub lat_deg: f64,
    pub alt_m: f64,
    pub score: f64,
}

impl PoiRecord {
    pub fn geodetic(&self) -> GeodeticCoord {
        GeodeticCoord::from_degrees(self.lat_deg, self.lon_deg, self.alt_m)
    }
}

pub fn label_pois(loss: &LossSeries, traj: &Trajectory, threshold: f64) -> Vec<PoiRecord> {
    loss.interior
        .clone()
        .zip(&loss.scores)
        .filter(|(_, &s)| s >= threshold)
        .map(|(i, &s)| {
            let g = traj.samples[i].geo;
            PoiRecord {
                flight_id: traj.flight_id.clone(),
                point_index: i,
                lon_deg: g.lon_deg(),
                lat_deg: g.lat_deg(),
                alt_m: g.height_m,
                score: s,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub threshold: f64,
    pub lambda: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_SCORE_THRESHOLD,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

/// Runs the full kinematic pipeline on one flight.
pub fn run_baseline(traj: &Trajectory, cfg: &BaselineConfig) -> Result<(LossSeries, Vec<PoiRecord>)> {
    let kin = derive_kinematics(traj)?;
    let pred = predict_blended(&kin, traj)?;
    let loss = mahalanobis_loss(&pred, traj, cfg.lambda)?;
    let pois = label_pois(&loss, traj, cfg.threshold);
    Ok((loss, pois))
}

/// Runs [`run_baseline`] over many flights. Output order follows input.
pub fn run_baseline_batch(
    trajs: &[Trajectory],
    cfg: &BaselineConfig,
    exec: Exec,
) -> Vec<Result<(LossSeries, Vec<PoiRecord>)>> {
    par::map(exec, trajs, |t| run_baseline(t, cfg))
}
