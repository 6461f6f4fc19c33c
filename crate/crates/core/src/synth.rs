//! Seeded synthetic flights and scored point clouds.
//!
//! Flights are level 1 Hz tracks built from straight legs, constant-rate
//! turns and racetrack holding patterns. Each second is stepped in the local
//! east/north frame of the current position, so reported velocities agree
//! with the positions. Every turn entry and exit is recorded; turn entries
//! (onsets) are the ground-truth maneuver locations. The scored point cloud
//! is drawn around entries and exits alike.
//!
//! With `two_regime`, even-numbered flights fly a compact, turn-heavy
//! terminal area and odd-numbered flights a wide, mostly straight en-route
//! area, so point density differs strongly between the two.

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};

use crate::error::{AdfError, Result};
use crate::field::ScoredPointSet;
use crate::geo::{
    geodetic_to_ecef, meridian_radius, offset_geodetic, prime_vertical_radius, Ellipsoid, EnuCoord, GeodeticCoord,
};
use crate::rng::{self, StreamRng};
use crate::trajectory::{PoiRecord, Trajectory, TrajectorySample};

/// Score distribution for the point cloud, mapped onto `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreDist {
    Uniform { lo: f64, hi: f64 },
    Beta { alpha: f64, beta: f64, lo: f64, hi: f64 },
}

impl Default for ScoreDist {
    fn default() -> Self {
        ScoreDist::Uniform { lo: 0.75, hi: 1.0 }
    }
}

impl ScoreDist {
    fn sample(&self, r: &mut StreamRng) -> f64 {
        match *self {
            ScoreDist::Uniform { lo, hi } => lo + (hi - lo) * r.random::<f64>(),
            ScoreDist::Beta { alpha, beta, lo, hi } => {
                let b = Beta::new(alpha, beta).expect("validated");
                lo + (hi - lo) * b.sample(r)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi, shape_ok) = match *self {
            ScoreDist::Uniform { lo, hi } => (lo, hi, true),
            ScoreDist::Beta { alpha, beta, lo, hi } => (lo, hi, alpha > 0.0 && beta > 0.0),
        };
        if !(shape_ok && lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(AdfError::InvalidParam(format!("bad score distribution {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub n_flights: usize,
    /// Samples per flight (1 Hz).
    pub duration_s: usize,
    /// Probability that a straight leg is followed by a turn.
    pub turn_fraction: f64,
    /// Probability that a turn is flown as a full holding pattern.
    pub holding_fraction: f64,
    /// Std-dev of per-axis position noise (m).
    pub noise_m: f64,
    /// Size of the scored point cloud.
    pub n_points: usize,
    /// Horizontal std-dev of cloud points around their maneuver (m);
    /// vertical spread is a third of this.
    pub poi_spread_m: f64,
    pub scores: ScoreDist,
    pub two_regime: bool,
    /// Emit per-sample ENU velocities.
    pub with_velocity: bool,
    pub origin: GeodeticCoord,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_flights: 20,
            duration_s: 900,
            turn_fraction: 0.5,
            holding_fraction: 0.1,
            noise_m: 0.0,
            n_points: 10_000,
            poi_spread_m: 300.0,
            scores: ScoreDist::default(),
            two_regime: false,
            with_velocity: true,
            origin: GeodeticCoord::from_degrees(30.57, 103.95, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManeuverKind {
    TurnEntry,
    TurnExit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maneuver {
    pub flight_index: usize,
    /// Sample at which the turn rate changes.
    pub point_index: usize,
    pub kind: ManeuverKind,
    pub geo: GeodeticCoord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub trajectories: Vec<Trajectory>,
    pub maneuvers: Vec<Maneuver>,
    pub points: ScoredPointSet,
    /// Geodetic positions of `points`, same order.
    pub point_geo: Vec<GeodeticCoord>,
}

impl SynthData {
    pub fn maneuver_ecef(&self) -> Vec<crate::geo::EcefCoord> {
        let ell = Ellipsoid::WGS84;
        self.maneuvers.iter().map(|m| geodetic_to_ecef(&m.geo, &ell)).collect()
    }

    /// ECEF positions of turn onsets.
    pub fn onset_ecef(&self) -> Vec<crate::geo::EcefCoord> {
        let ell = Ellipsoid::WGS84;
        self.maneuvers
            .iter()
            .filter(|m| m.kind == ManeuverKind::TurnEntry)
            .map(|m| geodetic_to_ecef(&m.geo, &ell))
            .collect()
    }

    /// Maneuvers of one flight.
    pub fn maneuvers_of(&self, flight_index: usize) -> impl Iterator<Item = &Maneuver> {
        self.maneuvers.iter().filter(move |m| m.flight_index == flight_index)
    }

    /// Turn onsets as POI rows with score 1.
    pub fn onset_records(&self) -> Vec<PoiRecord> {
        self.maneuvers
            .iter()
            .filter(|m| m.kind == ManeuverKind::TurnEntry)
            .map(|m| PoiRecord {
                flight_id: self.trajectories[m.flight_index].flight_id.clone(),
                point_index: m.point_index,
                lon_deg: m.geo.lon_deg(),
                lat_deg: m.geo.lat_deg(),
                alt_m: m.geo.height_m,
                score: 1.0,
            })
            .collect()
    }

    /// The point cloud as POI rows under flight id `cloud`.
    pub fn point_records(&self) -> Vec<PoiRecord> {
        self.point_geo
            .iter()
            .zip(self.points.scores())
            .enumerate()
            .map(|(i, (g, &s))| PoiRecord {
                flight_id: "cloud".into(),
                point_index: i,
                lon_deg: g.lon_deg(),
                lat_deg: g.lat_deg(),
                alt_m: g.height_m,
                score: s,
            })
            .collect()
    }
}

/// Flight-plan envelope for one airspace regime.
#[derive(Debug, Clone, Copy)]
struct Regime {
    center: (f64, f64),
    radius_m: f64,
    speed: (f64, f64),
    leg_s: (u32, u32),
    turn_scale: f64,
}

const SINGLE: Regime = Regime {
    center: (0.0, 0.0),
    radius_m: 60_000.0,
    speed: (100.0, 180.0),
    leg_s: (30, 120),
    turn_scale: 1.0,
};
const TERMINAL: Regime = Regime {
    center: (0.0, 0.0),
    radius_m: 10_000.0,
    speed: (80.0, 130.0),
    leg_s: (20, 60),
    turn_scale: 1.0,
};
const ENROUTE: Regime = Regime {
    center: (250_000.0, 0.0),
    radius_m: 120_000.0,
    speed: (140.0, 180.0),
    leg_s: (90, 240),
    turn_scale: 0.25,
};

/// Piece of a flight plan: `secs` seconds at turn rate `omega` (rad/s).
#[derive(Debug, Clone, Copy)]
struct Piece {
    secs: u32,
    omega: f64,
}

fn plan(spec: &SynthSpec, reg: &Regime, r: &mut StreamRng) -> Vec<Piece> {
    let rate = r.random_range(1.5f64..3.0).to_radians();
    let turn_p = (spec.turn_fraction * reg.turn_scale).clamp(0.0, 1.0);
    let mut out = Vec::new();
    let mut total = 0u32;
    while (total as usize) < spec.duration_s {
        let leg = r.random_range(reg.leg_s.0..=reg.leg_s.1);
        out.push(Piece { secs: leg, omega: 0.0 });
        total += leg;
        if r.random::<f64>() >= turn_p {
            continue;
        }
        let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
        if r.random::<f64>() < spec.holding_fraction {
            let half = (std::f64::consts::PI / rate).round() as u32;
            let straight = r.random_range(30u32..=60);
            for _ in 0..2 {
                out.push(Piece { secs: half, omega: sign * rate });
                out.push(Piece { secs: straight, omega: 0.0 });
            }
            total += 2 * (half + straight);
        } else {
            let angle = r.random_range(30.0f64..150.0).to_radians();
            let secs = ((angle / rate).round() as u32).max(2);
            out.push(Piece { secs, omega: sign * rate });
            total += secs;
        }
    }
    out
}

struct FlightOut {
    traj: Trajectory,
    maneuvers: Vec<(usize, ManeuverKind)>,
}

/// Second-order geodetic step: radii of curvature taken at the midpoint.
fn step_midpoint(g: &GeodeticCoord, d: &EnuCoord, ell: &Ellipsoid) -> GeodeticCoord {
    let mid = offset_geodetic(g, &EnuCoord::new(d.east_m / 2.0, d.north_m / 2.0, d.up_m / 2.0), ell);
    let m = meridian_radius(mid.lat_rad, ell) + mid.height_m;
    let n = prime_vertical_radius(mid.lat_rad, ell) + mid.height_m;
    GeodeticCoord::new(
        g.lat_rad + d.north_m / m,
        g.lon_rad + d.east_m / (n * mid.lat_rad.cos()),
        g.height_m + d.up_m,
    )
}

fn fly(id: usize, spec: &SynthSpec, reg: &Regime, plan_rng: &mut StreamRng, noise: &mut StreamRng) -> FlightOut {
    let ell = Ellipsoid::WGS84;
    let ang = plan_rng.random_range(0.0..std::f64::consts::TAU);
    let rad = reg.radius_m * plan_rng.random::<f64>().sqrt();
    let alt = plan_rng.random_range(3000.0..9000.0);
    let start = EnuCoord::new(reg.center.0 + rad * ang.sin(), reg.center.1 + rad * ang.cos(), alt);
    let mut geo = offset_geodetic(&spec.origin, &start, &ell);
    let v = plan_rng.random_range(reg.speed.0..reg.speed.1);
    let mut h = plan_rng.random_range(0.0..std::f64::consts::TAU);
    let t0 = plan_rng.random_range(0u32..3600) as f64;
    let pieces = plan(spec, reg, plan_rng);
    let jitter = (spec.noise_m > 0.0).then(|| Normal::new(0.0, spec.noise_m).expect("finite"));

    let mut omegas = Vec::with_capacity(spec.duration_s);
    for p in &pieces {
        omegas.extend(std::iter::repeat_n(p.omega, p.secs as usize));
    }
    omegas.truncate(spec.duration_s.saturating_sub(1));

    let mut samples = Vec::with_capacity(spec.duration_s);
    let mut maneuvers = Vec::new();
    let mut prev_omega = 0.0;
    for i in 0..spec.duration_s {
        let omega = omegas.get(i).copied().unwrap_or(0.0);
        if i > 0 && omega != prev_omega {
            if prev_omega != 0.0 {
                maneuvers.push((i, ManeuverKind::TurnExit));
            }
            if omega != 0.0 {
                maneuvers.push((i, ManeuverKind::TurnEntry));
            }
        }
        let observed = match &jitter {
            Some(j) => offset_geodetic(
                &geo,
                &EnuCoord::new(j.sample(noise), j.sample(noise), j.sample(noise)),
                &ell,
            ),
            None => geo,
        };
        samples.push(TrajectorySample {
            t: t0 + i as f64,
            geo: observed,
            vel_enu: spec.with_velocity.then(|| EnuCoord::new(v * h.sin(), v * h.cos(), 0.0)),
        });
        // Exact arc (or line) over one second in the current local frame.
        let step = if omega == 0.0 {
            EnuCoord::new(v * h.sin(), v * h.cos(), 0.0)
        } else {
            let h1 = h + omega;
            EnuCoord::new(v / omega * (h.cos() - h1.cos()), v / omega * (h1.sin() - h.sin()), 0.0)
        };
        geo = step_midpoint(&geo, &step, &ell);
        h += omega;
        prev_omega = omega;
    }
    FlightOut {
        traj: Trajectory {
            flight_id: format!("SYN{id:05}"),
            samples,
        },
        maneuvers,
    }
}

fn validate(spec: &SynthSpec) -> Result<()> {
    let unit = |x: f64| (0.0..=1.0).contains(&x);
    if spec.n_flights == 0 || spec.duration_s < 2 {
        return Err(AdfError::InvalidParam("need at least one flight of two samples".into()));
    }
    if !unit(spec.turn_fraction) || !unit(spec.holding_fraction) {
        return Err(AdfError::InvalidParam("fractions must lie in [0, 1]".into()));
    }
    if !(spec.noise_m >= 0.0 && spec.poi_spread_m >= 0.0) {
        return Err(AdfError::InvalidParam("noise and spread must be non-negative".into()));
    }
    spec.scores.validate()
}

/// Generates flights, their maneuvers and a scored point cloud.
///
/// Cloud points are centred on maneuvers drawn uniformly at random; when a
/// run has no maneuvers they are centred on random track samples instead.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<SynthData> {
    validate(spec)?;
    let ell = Ellipsoid::WGS84;
    let mut plan_rng = rng::stream(seed, "synth.flights");
    let mut noise_rng = rng::stream(seed, "synth.noise");

    let mut trajectories = Vec::with_capacity(spec.n_flights);
    let mut maneuvers = Vec::new();
    for f in 0..spec.n_flights {
        let reg = match (spec.two_regime, f % 2) {
            (false, _) => &SINGLE,
            (true, 0) => &TERMINAL,
            (true, _) => &ENROUTE,
        };
        let out = fly(f, spec, reg, &mut plan_rng, &mut noise_rng);
        for (i, kind) in out.maneuvers {
            maneuvers.push(Maneuver {
                flight_index: f,
                point_index: i,
                kind,
                geo: out.traj.samples[i].geo,
            });
        }
        trajectories.push(out.traj);
    }

    let mut r = rng::stream(seed, "synth.pois");
    let horiz = Normal::new(0.0, spec.poi_spread_m.max(f64::MIN_POSITIVE)).expect("finite");
    let vert = Normal::new(0.0, (spec.poi_spread_m / 3.0).max(f64::MIN_POSITIVE)).expect("finite");
    let mut point_geo = Vec::with_capacity(spec.n_points);
    let mut positions = Vec::with_capacity(spec.n_points);
    let mut scores = Vec::with_capacity(spec.n_points);
    for _ in 0..spec.n_points {
        let centre = if maneuvers.is_empty() {
            let t = &trajectories[r.random_range(0..trajectories.len())];
            t.samples[r.random_range(0..t.samples.len())].geo
        } else {
            maneuvers[r.random_range(0..maneuvers.len())].geo
        };
        let d = EnuCoord::new(horiz.sample(&mut r), horiz.sample(&mut r), vert.sample(&mut r));
        let g = offset_geodetic(&centre, &d, &ell);
        positions.push(geodetic_to_ecef(&g, &ell));
        point_geo.push(g);
        scores.push(spec.scores.sample(&mut r));
    }
    Ok(SynthData {
        trajectories,
        maneuvers,
        points: ScoredPointSet::new(positions, scores)?,
        point_geo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{EcefCoord, EnuFrame};

    fn small() -> SynthSpec {
        SynthSpec {
            n_flights: 6,
            duration_s: 400,
            n_points: 500,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate(&small(), 11).unwrap();
        let b = generate(&small(), 11).unwrap();
        assert_eq!(a, b);
        let c = generate(&small(), 12).unwrap();
        assert_ne!(a.trajectories, c.trajectories);
    }

    #[test]
    fn flights_are_valid_and_sized() {
        let d = generate(&small(), 1).unwrap();
        assert_eq!(d.trajectories.len(), 6);
        for t in &d.trajectories {
            assert_eq!(t.len(), 400);
            t.validate().unwrap();
        }
        assert_eq!(d.points.len(), 500);
        assert!(d.points.scores().iter().all(|s| (0.75..=1.0).contains(s)));
    }

    #[test]
    fn speed_is_constant_along_track() {
        let d = generate(&small(), 2).unwrap();
        let ell = Ellipsoid::WGS84;
        for t in &d.trajectories {
            let p: Vec<EcefCoord> = t.samples.iter().map(|s| geodetic_to_ecef(&s.geo, &ell)).collect();
            let steps: Vec<f64> = p.windows(2).map(|w| w[0].dist(&w[1])).collect();
            let (lo, hi) = steps.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
            // chord vs arc and map-projection stretch stay well under 2 %
            assert!(hi / lo < 1.02, "{lo} {hi}");
        }
    }

    #[test]
    fn straight_only_has_no_maneuvers() {
        let spec = SynthSpec {
            turn_fraction: 0.0,
            ..small()
        };
        let d = generate(&spec, 3).unwrap();
        assert!(d.maneuvers.is_empty());
        assert_eq!(d.points.len(), 500);
    }

    #[test]
    fn maneuvers_pair_up() {
        let spec = SynthSpec {
            turn_fraction: 1.0,
            holding_fraction: 0.5,
            ..small()
        };
        let d = generate(&spec, 4).unwrap();
        for f in 0..spec.n_flights {
            let kinds: Vec<_> = d.maneuvers_of(f).map(|m| m.kind).collect();
            assert!(!kinds.is_empty());
            for (k, w) in kinds.iter().enumerate() {
                let expect = if k % 2 == 0 { ManeuverKind::TurnEntry } else { ManeuverKind::TurnExit };
                assert_eq!(*w, expect);
            }
        }
    }

    #[test]
    fn cloud_sits_near_maneuvers() {
        let spec = SynthSpec {
            turn_fraction: 1.0,
            poi_spread_m: 200.0,
            ..small()
        };
        let d = generate(&spec, 5).unwrap();
        let m = d.maneuver_ecef();
        for p in d.points.positions() {
            let near = m.iter().map(|q| q.dist(p)).fold(f64::MAX, f64::min);
            assert!(near < 200.0 * 6.0);
        }
    }

    #[test]
    fn two_regime_splits_density() {
        let spec = SynthSpec {
            two_regime: true,
            turn_fraction: 0.8,
            ..small()
        };
        let d = generate(&spec, 6).unwrap();
        let terminal = d.maneuvers.iter().filter(|m| m.flight_index % 2 == 0).count();
        let enroute = d.maneuvers.len() - terminal;
        assert!(terminal > 2 * enroute, "{terminal} vs {enroute}");
    }

    #[test]
    fn velocities_match_track() {
        let d = generate(&small(), 7).unwrap();
        let t = &d.trajectories[0];
        let ell = Ellipsoid::WGS84;
        let s = &t.samples[10];
        let frame = EnuFrame::new(s.geo, &ell);
        let fwd = frame.to_enu(&geodetic_to_ecef(&t.samples[11].geo, &ell));
        let v = s.vel_enu.unwrap();
        let dot = (fwd.east_m * v.east_m + fwd.north_m * v.north_m) / (fwd.norm() * v.norm());
        assert!(dot > 0.99);
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(generate(&SynthSpec { n_flights: 0, ..small() }, 1).is_err());
        assert!(generate(&SynthSpec { turn_fraction: 1.5, ..small() }, 1).is_err());
        let beta = ScoreDist::Beta { alpha: 0.0, beta: 1.0, lo: 0.0, hi: 1.0 };
        assert!(generate(&SynthSpec { scores: beta, ..small() }, 1).is_err());
    }
}
