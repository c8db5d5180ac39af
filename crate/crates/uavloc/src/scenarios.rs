//! Built-in scenario builders shared by the examples, the CLI scenario
//! files, and the acceptance suite. Both mirror the measured system: a
//! rooftop radar site (one transmitter, three directional receivers within
//! 20 m) and a city-scale emitter layout (four omni receivers across a
//! 4 km by 4 km area, UAV at 30 m altitude).

use crate::airsim::GmClockParams;
use crate::scene::{
    Antenna, CaptureParams, EmitterPipelineParams, Impairments, Mode, Node, Position3,
    RadarPipelineParams, Role, ScenarioConfig, SolverParams, SyncParams, Trajectory, Waypoint,
};
use crate::waveform::WaveformSpec;
use std::f64::consts::PI;

fn directional(azimuth_deg: f64, elevation_deg: f64) -> Antenna {
    Antenna::Directional {
        boresight_azimuth_deg: azimuth_deg,
        boresight_elevation_deg: elevation_deg,
        beamwidth_10db_deg: 40.0,
        out_of_beam_loss_db: 20.0,
    }
}

/// Closed orbit around `center` with separate east/north radii, sampled
/// densely enough for piecewise-linear interpolation. Unequal radii keep a
/// radial velocity component over most of the orbit, which a delay-line
/// canceler needs to pass the target.
pub fn orbit_trajectory(
    center: Position3,
    radius_east_m: f64,
    radius_north_m: f64,
    duration_s: f64,
    revolutions: f64,
    n_waypoints: usize,
) -> Trajectory {
    let waypoints = (0..n_waypoints)
        .map(|i| {
            let frac = i as f64 / (n_waypoints - 1) as f64;
            let angle = 2.0 * PI * revolutions * frac;
            Waypoint {
                t_s: frac * duration_s,
                position_m: Position3::new(
                    center.east + radius_east_m * angle.sin(),
                    center.north + radius_north_m * angle.cos(),
                    center.up,
                ),
            }
        })
        .collect();
    Trajectory::new(waypoints)
}

/// Circling trajectory around `center` at a fixed radius.
pub fn circle_trajectory(
    center: Position3,
    radius_m: f64,
    duration_s: f64,
    revolutions: f64,
    n_waypoints: usize,
) -> Trajectory {
    orbit_trajectory(center, radius_m, radius_m, duration_s, revolutions, n_waypoints)
}

/// Rooftop radar scenario: one 46 dBm directional transmitter and three
/// 40-degree directional receivers on a building roof, UAV flying an
/// inward spiral arc around the site at 180-205 m range, 30 m above the
/// roof.
///
/// The receiver boresights fan at -10/0/+10 degrees so their pairwise beam
/// overlaps cover exactly the transmitter's own +/-20 degree window: inside
/// it at least two receivers always have fully in-beam two-way paths, and
/// outside it no azimuth offers more than one path better than one-way
/// out-of-beam loss, so two-receiver fixes are geometrically impossible
/// there. The constant radial rate of the spiral keeps the per-block
/// carrier rotation (and with it the delay-line canceler response) nearly
/// uniform along the whole arc.
pub fn rooftop_radar() -> ScenarioConfig {
    let roof = 12.0;
    let nodes = vec![
        Node {
            id: "tx01".into(),
            role: Role::Tx,
            position_m: Some(Position3::new(0.0, 0.0, roof)),
            antenna: directional(0.0, 9.0),
            eirp_dbm: Some(46.0),
        },
        Node {
            id: "rx01".into(),
            role: Role::Rx,
            position_m: Some(Position3::new(6.0, 2.0, roof)),
            antenna: directional(-10.0, 9.0),
            eirp_dbm: None,
        },
        Node {
            id: "rx02".into(),
            role: Role::Rx,
            position_m: Some(Position3::new(-5.0, 4.0, roof)),
            antenna: directional(0.0, 9.0),
            eirp_dbm: None,
        },
        Node {
            id: "rx03".into(),
            role: Role::Rx,
            position_m: Some(Position3::new(2.0, -7.0, roof + 0.5)),
            antenna: directional(10.0, 9.0),
            eirp_dbm: None,
        },
        Node {
            id: "beacon01".into(),
            role: Role::Beacon,
            position_m: Some(Position3::new(90.0, -40.0, 1.5)),
            antenna: Antenna::Omni,
            eirp_dbm: Some(23.0),
        },
        Node {
            id: "uav".into(),
            role: Role::Mobile,
            position_m: None,
            antenna: Antenna::Omni,
            eirp_dbm: Some(23.0),
        },
    ];
    // Inward spiral: azimuth -40 to +40 degrees at 5 deg/s, range 205 down
    // to 180 m over 16 s (~17.5 m/s ground speed, 1.56 m/s radial).
    let duration = 16.0;
    let n_waypoints = 1601;
    let waypoints = (0..n_waypoints)
        .map(|i| {
            let frac = i as f64 / (n_waypoints - 1) as f64;
            let az = (-40.0 + 80.0 * frac).to_radians();
            let r = 205.0 - 25.0 * frac;
            Waypoint {
                t_s: frac * duration,
                position_m: Position3::new(r * az.sin(), r * az.cos(), roof + 30.0),
            }
        })
        .collect();
    ScenarioConfig {
        schema_version: 1,
        mode: Mode::Radar,
        waveform: WaveformSpec::new(3.75e9, 1280, 16e-6),
        nodes,
        trajectory: Trajectory::new(waypoints),
        capture: CaptureParams { t0_s: 0.0, n_snapshots: 8000, snapshot_interval_s: 2e-3 },
        impairments: Impairments {
            snr_db: Some(20.0),
            direct_path_gain_db: -40.0,
            rcs_gain_db: -10.0,
            clutter: Vec::new(),
            clock: None,
        },
        solver: SolverParams { altitude_constraint_m: Some(roof + 30.0) },
        radar: RadarPipelineParams {
            average_k: 3,
            canceler_order: 1,
            detection_threshold_db: 12.0,
            max_targets: 2,
        },
        emitter: EmitterPipelineParams::default(),
        sync: Some(SyncParams::default()),
    }
}

/// City emitter scenario: four omni receivers spread over a 4 km by 4 km
/// area, 23 dBm UAV transmitter flying a straight leg at 30 m altitude
/// through the central region.
pub fn city_emitter() -> ScenarioConfig {
    let nodes = vec![
        Node {
            id: "rx01".into(),
            role: Role::Rx,
            position_m: Some(Position3::new(0.0, 0.0, 20.0)),
            antenna: Antenna::Omni,
            eirp_dbm: None,
        },
        Node {
            id: "rx02".into(),
            role: Role::Rx,
            position_m: Some(Position3::new(3600.0, 200.0, 25.0)),
            antenna: Antenna::Omni,
            eirp_dbm: None,
        },
        Node {
            id: "rx03".into(),
            role: Role::Rx,
            position_m: Some(Position3::new(3400.0, 3500.0, 18.0)),
            antenna: Antenna::Omni,
            eirp_dbm: None,
        },
        Node {
            id: "rx04".into(),
            role: Role::Rx,
            position_m: Some(Position3::new(-100.0, 3300.0, 22.0)),
            antenna: Antenna::Omni,
            eirp_dbm: None,
        },
        Node {
            id: "beacon01".into(),
            role: Role::Beacon,
            position_m: Some(Position3::new(1800.0, 1500.0, 2.0)),
            antenna: Antenna::Omni,
            eirp_dbm: Some(23.0),
        },
        Node {
            id: "uav".into(),
            role: Role::Mobile,
            position_m: None,
            antenna: Antenna::Omni,
            eirp_dbm: Some(23.0),
        },
    ];
    let trajectory = Trajectory::new(vec![
        Waypoint { t_s: 0.0, position_m: Position3::new(1200.0, 1200.0, 30.0) },
        Waypoint { t_s: 60.0, position_m: Position3::new(2200.0, 1800.0, 30.0) },
        Waypoint { t_s: 120.0, position_m: Position3::new(1800.0, 2600.0, 30.0) },
    ]);
    ScenarioConfig {
        schema_version: 1,
        mode: Mode::Emitter,
        waveform: WaveformSpec::new(3.75e9, 512, 16e-6),
        nodes,
        trajectory,
        capture: CaptureParams { t0_s: 0.0, n_snapshots: 120, snapshot_interval_s: 1.0 },
        impairments: Impairments {
            snr_db: Some(20.0),
            direct_path_gain_db: -40.0,
            rcs_gain_db: -10.0,
            clutter: Vec::new(),
            clock: Some(GmClockParams::default()),
        },
        solver: SolverParams { altitude_constraint_m: Some(30.0) },
        radar: RadarPipelineParams::default(),
        emitter: EmitterPipelineParams::default(),
        sync: Some(SyncParams::default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_scenarios_validate() {
        rooftop_radar().validate().unwrap();
        city_emitter().validate().unwrap();
    }

    #[test]
    fn builtin_scenarios_round_trip_through_toml() {
        for config in [rooftop_radar(), city_emitter()] {
            let text = config.to_toml_string().unwrap();
            let back = crate::scene::parse_scenario(&text).unwrap();
            assert_eq!(config, back);
        }
    }
}
