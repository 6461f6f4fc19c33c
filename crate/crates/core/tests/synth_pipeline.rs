use adf_core::eval::spatial_match;
use adf_core::geo::geodetic_to_ecef;
use adf_core::synth::{generate, SynthData, SynthSpec};
use adf_core::trajectory::{run_baseline, BaselineConfig};
use adf_core::{EcefCoord, Ellipsoid};

fn baseline_ecef(d: &SynthData) -> Vec<EcefCoord> {
    let ell = Ellipsoid::WGS84;
    let cfg = BaselineConfig::default();
    d.trajectories
        .iter()
        .flat_map(|t| run_baseline(t, &cfg).unwrap().1)
        .map(|p| geodetic_to_ecef(&p.geodetic(), &ell))
        .collect()
}

#[test]
fn straight_flights_yield_no_pois() {
    for with_velocity in [true, false] {
        let spec = SynthSpec {
            n_flights: 30,
            turn_fraction: 0.0,
            n_points: 100,
            with_velocity,
            ..Default::default()
        };
        let d = generate(&spec, 5).unwrap();
        assert!(d.maneuvers.is_empty());
        assert_eq!(baseline_ecef(&d).len(), 0);
    }
}

#[test]
fn turn_heavy_onsets_are_recalled() {
    for seed in [1, 2, 3] {
        for with_velocity in [true, false] {
            let spec = SynthSpec {
                n_flights: 40,
                turn_fraction: 1.0,
                holding_fraction: 0.0,
                n_points: 100,
                with_velocity,
                ..Default::default()
            };
            let d = generate(&spec, seed).unwrap();
            let gt = d.onset_ecef();
            let r = spatial_match(&gt, &baseline_ecef(&d), 200.0).unwrap();
            assert!(gt.len() > 200);
            assert!(r.recall > 0.8, "seed {seed}: recall {:.3}", r.recall);
        }
    }
}

#[test]
fn output_is_seed_deterministic() {
    let spec = SynthSpec {
        n_flights: 8,
        n_points: 2000,
        noise_m: 2.0,
        two_regime: true,
        ..Default::default()
    };
    let mut a = Vec::new();
    let mut b = Vec::new();
    adf_core::io::write_trajectories(&mut a, &generate(&spec, 9).unwrap().trajectories).unwrap();
    adf_core::io::write_trajectories(&mut b, &generate(&spec, 9).unwrap().trajectories).unwrap();
    assert_eq!(a, b);
}
