//! Scenario geometry: node roster, antennas, trajectories, and the scenario
//! file format. Single source of ground truth for all propagation delays.
//!
//! Positions are local ENU coordinates in meters, anchored at a scenario
//! origin. Azimuth is measured in degrees clockwise from north, elevation
//! upward from the horizontal plane. Scenario files are TOML with a
//! `schema_version` field; all lengths are meters, times seconds, powers
//! dBm, angles degrees (field names carry the unit suffix).

use crate::airsim::{ClutterPath, GmClockParams};
use crate::error::{Error, Result};
use crate::waveform::WaveformSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Speed of light in m/s. No atmospheric correction is applied; the
/// deviation is far below measurement error at the scales simulated here.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Point in the local ENU frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Position3 {
    pub east: f64,
    pub north: f64,
    pub up: f64,
}

impl Position3 {
    pub fn new(east: f64, north: f64, up: f64) -> Self {
        Self { east, north, up }
    }

    pub fn distance_to(&self, other: &Position3) -> f64 {
        let de = self.east - other.east;
        let dn = self.north - other.north;
        let du = self.up - other.up;
        (de * de + dn * dn + du * du).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.east.is_finite() && self.north.is_finite() && self.up.is_finite()
    }
}

impl From<[f64; 3]> for Position3 {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<Position3> for [f64; 3] {
    fn from(p: Position3) -> [f64; 3] {
        [p.east, p.north, p.up]
    }
}

/// Antenna pattern. The directional pattern is a two-level step: 0 dB inside
/// the 10 dB beamwidth cone, a flat loss outside. `out_of_beam_loss_db` is
/// the two-way total, so a single traversal outside the beam costs half of
/// it (20 dB configured -> -10 dB per traversal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Antenna {
    Omni,
    Directional {
        boresight_azimuth_deg: f64,
        boresight_elevation_deg: f64,
        beamwidth_10db_deg: f64,
        out_of_beam_loss_db: f64,
    },
}

/// Node role in the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Tx,
    Rx,
    Beacon,
    Mobile,
}

/// A stationary sensor/transmitter node, the calibration beacon, or the
/// mobile (UAV-mounted) node. Static roles carry a position; the mobile
/// node follows the scenario trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_m: Option<Position3>,
    pub antenna: Antenna,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eirp_dbm: Option<f64>,
}

impl Node {
    /// Position of a static node; mobile nodes have none.
    pub fn static_position(&self) -> Option<Position3> {
        self.position_m
    }
}

/// Timestamped waypoint of the mobile node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t_s: f64,
    pub position_m: Position3,
}

/// Mobile-node flight path; piecewise-linear between waypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Waypoint>) -> Self {
        Self { waypoints }
    }

    pub fn start_time(&self) -> f64 {
        self.waypoints.first().map(|w| w.t_s).unwrap_or(0.0)
    }

    pub fn end_time(&self) -> f64 {
        self.waypoints.last().map(|w| w.t_s).unwrap_or(0.0)
    }

    /// Position at time `t`; errors when `t` lies outside the span.
    pub fn sample(&self, t: f64) -> Result<Position3> {
        sample_trajectory(self, t)
    }

    pub fn covers(&self, t0: f64, t1: f64) -> bool {
        !self.waypoints.is_empty() && self.start_time() <= t0 && t1 <= self.end_time()
    }
}

/// Capture timing shared by both simulation modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptureParams {
    pub t0_s: f64,
    pub n_snapshots: usize,
    pub snapshot_interval_s: f64,
}

impl Default for CaptureParams {
    fn default() -> Self {
        Self { t0_s: 0.0, n_snapshots: 200, snapshot_interval_s: 5e-3 }
    }
}

/// Channel impairments applied by the capture simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Impairments {
    /// Sample-domain SNR; `None` disables noise entirely.
    pub snr_db: Option<f64>,
    /// Residual gain of the static Tx->Rx direct path after the absorbers,
    /// relative to the unobstructed free-space level.
    pub direct_path_gain_db: f64,
    /// Scalar target reflectivity term of the bistatic pathloss, dB.
    pub rcs_gain_db: f64,
    /// Static clutter taps, time-invariant by contract.
    pub clutter: Vec<ClutterPath>,
    /// Per-receiver clock error model; `None` means perfect clocks.
    pub clock: Option<GmClockParams>,
}

/// Position solver options shared by both pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SolverParams {
    /// Fix the solution altitude, enabling 2-receiver radar fixes and
    /// 3-receiver emitter fixes.
    pub altitude_constraint_m: Option<f64>,
}

/// Radar pipeline knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarPipelineParams {
    /// Consecutive snapshots averaged per block before clutter cancellation.
    pub average_k: usize,
    /// Delay-line canceler order (cascaded two-pulse stages).
    pub canceler_order: usize,
    /// Detection threshold above the estimated noise floor, dB.
    pub detection_threshold_db: f64,
    pub max_targets: usize,
}

impl Default for RadarPipelineParams {
    fn default() -> Self {
        Self { average_k: 20, canceler_order: 1, detection_threshold_db: 10.0, max_targets: 3 }
    }
}

/// Emitter pipeline knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct EmitterPipelineParams {
    /// Reference receiver id for the independent TDoA set; defaults to the
    /// first receiver in the roster.
    pub reference_rx: Option<String>,
    /// Cross-correlation search window; defaults to half the record length.
    pub search_window_s: Option<f64>,
}

/// Beacon-based synchronization calibration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyncParams {
    /// Rectangular low-pass window applied to the raw GNSS time error.
    pub filter_window_s: f64,
    /// Length of the beacon calibration recording.
    pub calibration_duration_s: f64,
    /// White measurement noise on each beacon delay estimate.
    pub beacon_noise_s: f64,
}

impl Default for SyncParams {
    fn default() -> Self {
        // Window default from sweeping the calibrated clock model (see the
        // sweep-filter command); minima sit around 7-21 s at the 1 Hz
        // cadence.
        Self { filter_window_s: 11.0, calibration_duration_s: 600.0, beacon_noise_s: 0.0 }
    }
}

/// Operating mode of the testbed scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Radar,
    Emitter,
}

/// Fully validated scenario: node roster, trajectory, waveform, and all
/// impairment/pipeline parameters. Immutable after load; safe to share
/// across workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub mode: Mode,
    pub waveform: WaveformSpec,
    pub nodes: Vec<Node>,
    pub trajectory: Trajectory,
    #[serde(default)]
    pub capture: CaptureParams,
    #[serde(default)]
    pub impairments: Impairments,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub radar: RadarPipelineParams,
    #[serde(default)]
    pub emitter: EmitterPipelineParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sync: Option<SyncParams>,
}

/// Current scenario schema version.
pub const SCHEMA_VERSION: u32 = 1;

impl ScenarioConfig {
    pub fn receivers(&self) -> Vec<&Node> {
        self.nodes.iter().filter(|n| n.role == Role::Rx).collect()
    }

    pub fn transmitters(&self) -> Vec<&Node> {
        self.nodes.iter().filter(|n| n.role == Role::Tx).collect()
    }

    pub fn mobile(&self) -> Option<&Node> {
        self.nodes.iter().find(|n| n.role == Role::Mobile)
    }

    pub fn beacon(&self) -> Option<&Node> {
        self.nodes.iter().find(|n| n.role == Role::Beacon)
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Check every scenario invariant; the error message names the field.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        self.waveform.validate()?;

        let mut seen = std::collections::BTreeSet::new();
        for node in &self.nodes {
            if !seen.insert(node.id.as_str()) {
                return Err(Error::Validation(format!("nodes: duplicate node id '{}'", node.id)));
            }
            match node.role {
                Role::Mobile => {
                    if node.position_m.is_some() {
                        return Err(Error::Validation(format!(
                            "node '{}': mobile node must not carry a static position",
                            node.id
                        )));
                    }
                }
                _ => match node.position_m {
                    Some(p) if p.is_finite() => {}
                    Some(_) => {
                        return Err(Error::Validation(format!(
                            "node '{}': position components must be finite",
                            node.id
                        )))
                    }
                    None => {
                        return Err(Error::Validation(format!(
                            "node '{}': static role requires position_m",
                            node.id
                        )))
                    }
                },
            }
            if matches!(node.role, Role::Tx | Role::Beacon) && node.eirp_dbm.is_none() {
                return Err(Error::Validation(format!(
                    "node '{}': role {:?} requires eirp_dbm",
                    node.id, node.role
                )));
            }
            if let Antenna::Directional { beamwidth_10db_deg, out_of_beam_loss_db, .. } =
                node.antenna
            {
                if beamwidth_10db_deg <= 0.0 {
                    return Err(Error::Validation(format!(
                        "node '{}': beamwidth_10db_deg must be > 0",
                        node.id
                    )));
                }
                if out_of_beam_loss_db < 0.0 {
                    return Err(Error::Validation(format!(
                        "node '{}': out_of_beam_loss_db must be >= 0",
                        node.id
                    )));
                }
            }
        }

        let n_mobile = self.nodes.iter().filter(|n| n.role == Role::Mobile).count();
        if n_mobile != 1 {
            return Err(Error::Validation(format!(
                "nodes: expected exactly one mobile node, found {n_mobile}"
            )));
        }

        let n_rx = self.receivers().len();
        match self.mode {
            Mode::Radar => {
                if self.transmitters().is_empty() {
                    return Err(Error::Validation(
                        "nodes: radar mode requires at least one stationary tx".into(),
                    ));
                }
                if n_rx < 2 {
                    return Err(Error::Validation(format!(
                        "nodes: radar mode requires at least 2 rx, found {n_rx}"
                    )));
                }
            }
            Mode::Emitter => {
                let min_rx = if self.solver.altitude_constraint_m.is_some() { 3 } else { 4 };
                if n_rx < min_rx {
                    return Err(Error::Validation(format!(
                        "nodes: emitter mode requires at least {min_rx} rx \
                         (altitude constraint {}), found {n_rx}",
                        if self.solver.altitude_constraint_m.is_some() { "set" } else { "unset" }
                    )));
                }
                if self.mobile().and_then(|n| n.eirp_dbm).is_none() {
                    return Err(Error::Validation(
                        "nodes: emitter mode requires eirp_dbm on the mobile node".into(),
                    ));
                }
            }
        }

        if self.trajectory.waypoints.is_empty() {
            return Err(Error::Validation("trajectory: at least one waypoint required".into()));
        }
        for w in &self.trajectory.waypoints {
            if !w.position_m.is_finite() || !w.t_s.is_finite() {
                return Err(Error::Validation("trajectory: waypoint values must be finite".into()));
            }
        }
        for pair in self.trajectory.waypoints.windows(2) {
            if pair[1].t_s <= pair[0].t_s {
                return Err(Error::Validation(format!(
                    "trajectory: timestamps must be strictly increasing ({} then {})",
                    pair[0].t_s, pair[1].t_s
                )));
            }
        }

        for (i, c) in self.impairments.clutter.iter().enumerate() {
            if c.delay_s < 0.0 {
                return Err(Error::Validation(format!("clutter[{i}]: delay_s must be >= 0")));
            }
            if !c.gain.0.is_finite() || !c.gain.1.is_finite() {
                return Err(Error::Validation(format!("clutter[{i}]: gain must be finite")));
            }
        }
        if let Some(clock) = &self.impairments.clock {
            clock.validate()?;
        }
        if self.capture.n_snapshots == 0 {
            return Err(Error::Validation("capture: n_snapshots must be > 0".into()));
        }
        if self.capture.snapshot_interval_s < self.waveform.symbol_length_s {
            return Err(Error::Validation(
                "capture: snapshot_interval_s must be >= waveform symbol_length_s".into(),
            ));
        }
        if self.radar.average_k == 0 {
            return Err(Error::Validation("radar: average_k must be >= 1".into()));
        }
        if self.radar.canceler_order == 0 {
            return Err(Error::Validation("radar: canceler_order must be >= 1".into()));
        }
        if let Some(id) = &self.emitter.reference_rx {
            match self.node(id) {
                Some(n) if n.role == Role::Rx => {}
                _ => {
                    return Err(Error::Validation(format!(
                        "emitter: reference_rx '{id}' is not an rx node"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Serialize to the scenario file format.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn write_to_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}

/// Load and validate a scenario file.
pub fn load_scenario<P: AsRef<Path>>(path: P) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(&path)?;
    parse_scenario(&text)
}

/// Parse and validate scenario text.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// One-way propagation delay between two points.
pub fn los_delay(a: Position3, b: Position3) -> f64 {
    a.distance_to(&b) / SPEED_OF_LIGHT
}

/// Propagation delay of the path transmitter -> target -> receiver.
pub fn bistatic_delay(tx: Position3, target: Position3, rx: Position3) -> f64 {
    (tx.distance_to(&target) + target.distance_to(&rx)) / SPEED_OF_LIGHT
}

/// Antenna gain in dB for a single traversal of the path `from -> to`,
/// evaluated at the antenna located at `from`.
pub fn antenna_gain(antenna: &Antenna, from: Position3, to: Position3) -> Result<f64> {
    match antenna {
        Antenna::Omni => {
            if from == to {
                return Err(Error::InvalidArgument(
                    "antenna_gain: from and to coincide".into(),
                ));
            }
            Ok(0.0)
        }
        Antenna::Directional {
            boresight_azimuth_deg,
            boresight_elevation_deg,
            beamwidth_10db_deg,
            out_of_beam_loss_db,
        } => {
            let de = to.east - from.east;
            let dn = to.north - from.north;
            let du = to.up - from.up;
            let norm = (de * de + dn * dn + du * du).sqrt();
            if norm == 0.0 {
                return Err(Error::InvalidArgument(
                    "antenna_gain: from and to coincide".into(),
                ));
            }
            let az = boresight_azimuth_deg.to_radians();
            let el = boresight_elevation_deg.to_radians();
            // Boresight unit vector in ENU; azimuth clockwise from north.
            let bore = (az.sin() * el.cos(), az.cos() * el.cos(), el.sin());
            let dot = (bore.0 * de + bore.1 * dn + bore.2 * du) / norm;
            let offset_deg = dot.clamp(-1.0, 1.0).acos().to_degrees();
            if offset_deg <= beamwidth_10db_deg / 2.0 {
                Ok(0.0)
            } else {
                Ok(-out_of_beam_loss_db / 2.0)
            }
        }
    }
}

/// Piecewise-linear trajectory interpolation.
pub fn sample_trajectory(traj: &Trajectory, t: f64) -> Result<Position3> {
    let wps = &traj.waypoints;
    if wps.is_empty() {
        return Err(Error::InvalidArgument("sample_trajectory: empty trajectory".into()));
    }
    let (start, end) = (traj.start_time(), traj.end_time());
    if t < start || t > end {
        return Err(Error::OutOfRange { t, start, end });
    }
    let idx = match wps.binary_search_by(|w| w.t_s.partial_cmp(&t).unwrap()) {
        Ok(i) => return Ok(wps[i].position_m),
        Err(i) => i,
    };
    let (a, b) = (&wps[idx - 1], &wps[idx]);
    let frac = (t - a.t_s) / (b.t_s - a.t_s);
    Ok(Position3::new(
        a.position_m.east + frac * (b.position_m.east - a.position_m.east),
        a.position_m.north + frac * (b.position_m.north - a.position_m.north),
        a.position_m.up + frac * (b.position_m.up - a.position_m.up),
    ))
}
