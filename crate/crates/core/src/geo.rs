//! WGS84 geodetic, Earth-centred Earth-fixed and local east/north/up frames.
//!
//! Only the forward direction (geodetic to ECEF, ECEF to ENU) is provided.
//!
//! The ENU rotation is the conventional one:
//!
//! ```text
//! E = -sin(lon) dx + cos(lon) dy
//! N = -sin(lat) cos(lon) dx - sin(lat) sin(lon) dy + cos(lat) dz
//! U =  cos(lat) cos(lon) dx + cos(lat) sin(lon) dy + sin(lat) dz
//! ```
//!
//! Some printed variants of this matrix permute the `sin(lon)`/`cos(lon)`
//! entries; those do not yield an orthonormal east/north/up basis and are not
//! used here.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Reference ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub semi_major_axis_m: f64,
    pub flattening: f64,
    pub ecc_sq: f64,
}

impl Ellipsoid {
    pub const WGS84: Ellipsoid = Ellipsoid {
        semi_major_axis_m: 6_378_137.0,
        flattening: 1.0 / 298.257_223_563,
        ecc_sq: 6.694_379_990_14e-3,
    };

    pub fn semi_minor_axis_m(&self) -> f64 {
        self.semi_major_axis_m * (1.0 - self.flattening)
    }
}

impl Default for Ellipsoid {
    fn default() -> Self {
        Self::WGS84
    }
}

/// Geodetic position; angles in radians, height above the ellipsoid in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodeticCoord {
    pub lat_rad: f64,
    pub lon_rad: f64,
    pub height_m: f64,
}

impl GeodeticCoord {
    /// Builds a coordinate from radians, normalizing longitude to (-pi, pi].
    ///
    /// Latitude is clamped to [-pi/2, pi/2].
    pub fn new(lat_rad: f64, lon_rad: f64, height_m: f64) -> Self {
        Self {
            lat_rad: lat_rad.clamp(-PI / 2.0, PI / 2.0),
            lon_rad: normalize_lon(lon_rad),
            height_m,
        }
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64, height_m: f64) -> Self {
        Self::new(lat_deg.to_radians(), lon_deg.to_radians(), height_m)
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat_rad.to_degrees()
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon_rad.to_degrees()
    }

    pub fn is_finite(&self) -> bool {
        self.lat_rad.is_finite() && self.lon_rad.is_finite() && self.height_m.is_finite()
    }
}

fn normalize_lon(lon: f64) -> f64 {
    if !lon.is_finite() {
        return lon;
    }
    let mut l = lon.rem_euclid(2.0 * PI);
    if l > PI {
        l -= 2.0 * PI;
    }
    // rem_euclid maps -pi to pi, which is already in range.
    l
}

/// Earth-centred Earth-fixed position (or displacement) in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EcefCoord {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefCoord {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn sq_dist(&self, other: &EcefCoord) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn dist(&self, other: &EcefCoord) -> f64 {
        self.sq_dist(other).sqrt()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for EcefCoord {
    type Output = EcefCoord;
    fn add(self, o: EcefCoord) -> EcefCoord {
        EcefCoord::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for EcefCoord {
    type Output = EcefCoord;
    fn sub(self, o: EcefCoord) -> EcefCoord {
        EcefCoord::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for EcefCoord {
    type Output = EcefCoord;
    fn mul(self, s: f64) -> EcefCoord {
        EcefCoord::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Local tangent-plane coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnuCoord {
    pub east_m: f64,
    pub north_m: f64,
    pub up_m: f64,
}

impl EnuCoord {
    pub const fn new(east_m: f64, north_m: f64, up_m: f64) -> Self {
        Self {
            east_m,
            north_m,
            up_m,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.east_m * self.east_m + self.north_m * self.north_m + self.up_m * self.up_m).sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.east_m, self.north_m, self.up_m]
    }
}

/// Prime vertical radius of curvature `a / sqrt(1 - e^2 sin^2(lat))`.
pub fn prime_vertical_radius(lat_rad: f64, ell: &Ellipsoid) -> f64 {
    let s = lat_rad.sin();
    ell.semi_major_axis_m / (1.0 - ell.ecc_sq * s * s).sqrt()
}

/// Meridian radius of curvature `a (1 - e^2) / (1 - e^2 sin^2(lat))^1.5`.
pub fn meridian_radius(lat_rad: f64, ell: &Ellipsoid) -> f64 {
    let s = lat_rad.sin();
    let w = 1.0 - ell.ecc_sq * s * s;
    ell.semi_major_axis_m * (1.0 - ell.ecc_sq) / (w * w.sqrt())
}

pub fn geodetic_to_ecef(g: &GeodeticCoord, ell: &Ellipsoid) -> EcefCoord {
    let n = prime_vertical_radius(g.lat_rad, ell);
    let (sin_lat, cos_lat) = g.lat_rad.sin_cos();
    let (sin_lon, cos_lon) = g.lon_rad.sin_cos();
    EcefCoord::new(
        (n + g.height_m) * cos_lat * cos_lon,
        (n + g.height_m) * cos_lat * sin_lon,
        (n * (1.0 - ell.ecc_sq) + g.height_m) * sin_lat,
    )
}

pub fn ecef_to_enu(p: &EcefCoord, origin: &GeodeticCoord, ell: &Ellipsoid) -> EnuCoord {
    EnuFrame::new(*origin, ell).to_enu(p)
}

/// ENU frame with the origin's ECEF position and trig terms cached.
#[derive(Debug, Clone, Copy)]
pub struct EnuFrame {
    origin: GeodeticCoord,
    origin_ecef: EcefCoord,
    sin_lat: f64,
    cos_lat: f64,
    sin_lon: f64,
    cos_lon: f64,
}

impl EnuFrame {
    pub fn new(origin: GeodeticCoord, ell: &Ellipsoid) -> Self {
        let (sin_lat, cos_lat) = origin.lat_rad.sin_cos();
        let (sin_lon, cos_lon) = origin.lon_rad.sin_cos();
        Self {
            origin,
            origin_ecef: geodetic_to_ecef(&origin, ell),
            sin_lat,
            cos_lat,
            sin_lon,
            cos_lon,
        }
    }

    pub fn origin(&self) -> GeodeticCoord {
        self.origin
    }

    pub fn origin_ecef(&self) -> EcefCoord {
        self.origin_ecef
    }

    pub fn to_enu(&self, p: &EcefCoord) -> EnuCoord {
        self.rotate_to_enu(&(*p - self.origin_ecef))
    }

    /// Rotates an ECEF displacement (or velocity) into this frame.
    pub fn rotate_to_enu(&self, d: &EcefCoord) -> EnuCoord {
        EnuCoord::new(
            -self.sin_lon * d.x + self.cos_lon * d.y,
            -self.sin_lat * self.cos_lon * d.x - self.sin_lat * self.sin_lon * d.y
                + self.cos_lat * d.z,
            self.cos_lat * self.cos_lon * d.x + self.cos_lat * self.sin_lon * d.y
                + self.sin_lat * d.z,
        )
    }

    /// Inverse rotation: ENU vector expressed in ECEF axes.
    pub fn rotate_to_ecef(&self, v: &EnuCoord) -> EcefCoord {
        EcefCoord::new(
            -self.sin_lon * v.east_m - self.sin_lat * self.cos_lon * v.north_m
                + self.cos_lat * self.cos_lon * v.up_m,
            self.cos_lon * v.east_m - self.sin_lat * self.sin_lon * v.north_m
                + self.cos_lat * self.sin_lon * v.up_m,
            self.cos_lat * v.north_m + self.sin_lat * v.up_m,
        )
    }

    pub fn to_ecef(&self, v: &EnuCoord) -> EcefCoord {
        self.origin_ecef + self.rotate_to_ecef(v)
    }
}

/// Moves a geodetic position by a small local ENU displacement using the
/// local radii of curvature. Accurate for displacements of a few hundred
/// meters; used by the synthetic generator to step trajectories forward.
pub fn offset_geodetic(g: &GeodeticCoord, d: &EnuCoord, ell: &Ellipsoid) -> GeodeticCoord {
    let m = meridian_radius(g.lat_rad, ell) + g.height_m;
    let n = prime_vertical_radius(g.lat_rad, ell) + g.height_m;
    GeodeticCoord::new(
        g.lat_rad + d.north_m / m,
        g.lon_rad + d.east_m / (n * g.lat_rad.cos()),
        g.height_m + d.up_m,
    )
}
