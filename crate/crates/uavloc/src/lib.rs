//! Desk-scale simulation twin of a distributed radar/emitter UAV
//! localization testbed.
//!
//! The crate generates Newman-phase OFDM sounding signals, simulates
//! coherent capture at spatially distributed receivers under realistic
//! clock, clutter, and noise impairments, and implements both localization
//! chains end to end: bistatic radar (snapshot averaging, delay-line
//! clutter cancellation, ML delay estimation, Kalman/Hungarian tracking,
//! bistatic least squares) and emitter TDoA (pairwise cross-correlation,
//! hyperbolic least squares), plus the beacon-based synchronization
//! calibration that ties distributed receivers to nanosecond level.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example waveform_sounding   # symbol synthesis + CIR estimation
//! cargo run --release --example clock_sync          # clock model, beacon calibration, drift compensation
//! cargo run --release --example radar_pipeline      # full radar chain on the rooftop scenario
//! cargo run --release --example emitter_pipeline    # full TDoA chain on the city scenario
//! cargo run --release --example iq_recording        # gap-padded IQ recording format
//! cargo run --release --example filter_sweep        # rectangular filter window sweep
//! ```
//!
//! A thin `uavloc` binary drives the same machinery from scenario files
//! (`simulate`, `calibrate`, `radar`, `emitter`, `sweep-filter`, `report`).
//!
//! # Module map
//!
//! - [`scene`] — geometry, node roster, trajectories, scenario files
//! - [`waveform`] — Newman-phase sounding symbol and CIR estimation
//! - [`airsim`] — coherent capture simulation with impairments
//! - [`sync`] — beacon calibration and GNSS drift compensation
//! - [`radar`] — radar processing chain and bistatic localization
//! - [`emitter`] — cross-correlation TDoA and hyperbolic localization
//! - [`harness`] — campaign orchestration, IQ format, reports

pub mod airsim;
pub mod emitter;
pub mod error;
pub mod harness;
pub mod lsq;
pub mod radar;
pub mod scene;
pub mod scenarios;
mod spectral;
mod streams;
pub mod sync;
pub mod waveform;

pub use error::{Error, Result};
pub use scene::{
    antenna_gain, bistatic_delay, load_scenario, los_delay, sample_trajectory, Antenna, Mode,
    Node, Position3, Role, ScenarioConfig, Trajectory, Waypoint, SPEED_OF_LIGHT,
};
pub use waveform::{
    crest_factor_db, estimate_cir, newman_phases, oversampled_crest_factor_db, synth_symbol,
    CirSnapshot, ReferenceSymbol, WaveformSpec,
};
