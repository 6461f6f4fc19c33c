//! Adaptive density fields over Earth-fixed point sets.
//!
//! A scored point cloud (positions in ECEF meters, non-negative scores) is
//! turned into a query-conditioned influence field: for a query location the
//! `k` nearest scored points are retrieved through an inverted-file index and
//! each contributes a Gaussian kernel whose width shrinks as its score grows.
//!
//! Modules:
//! - [`geo`]: WGS84 geodetic, ECEF and ENU conversions.
//! - [`ann`]: inverted-file k-NN index, brute-force reference, snapshots.
//! - [`field`]: the field operator and the k-NN mean-distance baseline.
//! - [`trajectory`]: kinematic residual pipeline producing scored POIs.
//! - [`extract`]: field evaluation along trajectories with per-trace thresholds.
//! - [`eval`]: spatial matching metrics, sweeps and latency benchmarks.
//! - [`synth`]: seeded synthetic flights and scored point clouds.
//! - [`io`]: trajectory JSONL, POI CSV and report tables.

pub mod ann;
pub mod error;
pub mod eval;
pub mod extract;
pub mod field;
pub mod geo;
pub mod io;
pub mod par;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod trajectory;

pub use error::{AdfError, Result};
pub use geo::{EcefCoord, Ellipsoid, EnuCoord, GeodeticCoord};
pub use par::Exec;
