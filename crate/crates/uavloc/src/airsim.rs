//! Coherent multi-receiver capture simulation: geometric path delays,
//! step antenna patterns, static clutter, AWGN, and per-receiver clock
//! errors, producing per-receiver sample records and CIR snapshot series.
//!
//! Path delays (including fractional ones) are frequency-domain phase
//! ramps, exact under the circular symbol model. Each geometric path
//! carries its carrier phase `exp(-j 2 pi f_c tau)`, so a moving target
//! rotates between snapshots while static clutter stays fixed; receiver
//! clock error is applied as a pure delay shift of the whole CIR without
//! an additional carrier rotation (inter-node carrier phase is not
//! observable in the modeled system).

use crate::error::{Error, Result};
use crate::scene::{
    antenna_gain, bistatic_delay, los_delay, CaptureParams, Mode, Position3, ScenarioConfig,
};
use crate::spectral;
use crate::streams::{stream_rng, Domain};
use crate::sync::TimeErrorSeries;
use crate::waveform::{estimate_cir, synth_symbol, CirSnapshot, ReferenceSymbol};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One static clutter scatterer: a time-invariant tap at a fixed delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutterPath {
    pub delay_s: f64,
    /// Complex linear gain as `[re, im]`.
    pub gain: (f64, f64),
}

impl ClutterPath {
    pub fn complex_gain(&self) -> Complex64 {
        Complex64::new(self.gain.0, self.gain.1)
    }
}

/// Gauss-Markov + white-jitter clock model parameters. The GNSS timing
/// receiver observes the slow drift through independent white noise, at
/// the 1 PPS cadence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmClockParams {
    /// White jitter on the clock error itself.
    pub sigma_white_s: f64,
    /// Stationary standard deviation of the Gauss-Markov drift component.
    pub drift_scale_s: f64,
    /// Gauss-Markov correlation time.
    pub correlation_time_s: f64,
    /// White observation noise of the raw GNSS time error.
    pub gnss_noise_s: f64,
    /// Sampling interval of the drift/GNSS series (PPS cadence).
    pub sample_interval_s: f64,
}

impl Default for GmClockParams {
    fn default() -> Self {
        // Calibrated so that uncompensated pairwise TDoA std over one hour
        // sits near 1.27 ns: sqrt(2 * (0.85^2 + 0.30^2)) = 1.275 ns.
        Self {
            sigma_white_s: 0.30e-9,
            drift_scale_s: 0.85e-9,
            correlation_time_s: 120.0,
            gnss_noise_s: 0.40e-9,
            sample_interval_s: 1.0,
        }
    }
}

impl GmClockParams {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_white_s < 0.0 || self.drift_scale_s < 0.0 || self.gnss_noise_s < 0.0 {
            return Err(Error::Validation("clock: noise scales must be >= 0".into()));
        }
        if !self.correlation_time_s.is_finite() || self.correlation_time_s <= 0.0 {
            return Err(Error::Validation("clock: correlation_time_s must be > 0".into()));
        }
        if !self.sample_interval_s.is_finite() || self.sample_interval_s <= 0.0 {
            return Err(Error::Validation("clock: sample_interval_s must be > 0".into()));
        }
        Ok(())
    }
}

/// Simulated clock of one receiver: a constant per-power-cycle offset plus
/// a sampled time-varying drift, and the raw GNSS observation of the drift.
#[derive(Debug, Clone)]
pub struct ClockState {
    pub constant_offset_s: f64,
    /// Time-varying error relative to the constant offset.
    pub drift: TimeErrorSeries,
    /// Raw GNSS time error: drift observed through white noise.
    pub gnss_raw_error: TimeErrorSeries,
}

impl ClockState {
    /// Total clock error at time `t` (constant offset + interpolated drift).
    pub fn error_at(&self, t: f64) -> f64 {
        self.constant_offset_s + self.drift.interp(t)
    }

    /// A perfect clock covering `[0, duration]`.
    pub fn perfect(duration_s: f64) -> Self {
        let n = duration_s.ceil() as usize + 1;
        Self {
            constant_offset_s: 0.0,
            drift: TimeErrorSeries::new(0.0, 1.0, vec![0.0; n]),
            gnss_raw_error: TimeErrorSeries::new(0.0, 1.0, vec![0.0; n]),
        }
    }
}

/// Generate a clock state for one receiver. The constant offset is drawn
/// uniformly in +/-100 ns; the drift is a first-order Gauss-Markov process
/// plus white jitter, sampled over `[0, duration]`.
pub fn gen_clock_state(seed: u64, params: &GmClockParams, duration_s: f64) -> Result<ClockState> {
    params.validate()?;
    if !duration_s.is_finite() || duration_s <= 0.0 {
        return Err(Error::InvalidArgument("gen_clock_state: duration must be > 0".into()));
    }
    let mut rng = stream_rng(seed, Domain::Clock, 0, 0);
    let dt = params.sample_interval_s;
    let n = (duration_s / dt).floor() as usize + 1;

    let constant_offset_s = Uniform::new_inclusive(-100e-9, 100e-9).sample(&mut rng);

    let a = (-dt / params.correlation_time_s).exp();
    let innovation = params.drift_scale_s * (1.0 - a * a).sqrt();
    let std_normal = Normal::new(0.0, 1.0).unwrap();

    let mut gm = vec![0.0; n];
    if params.drift_scale_s > 0.0 {
        gm[0] = params.drift_scale_s * std_normal.sample(&mut rng);
        for i in 1..n {
            gm[i] = a * gm[i - 1] + innovation * std_normal.sample(&mut rng);
        }
    }
    let mut drift = vec![0.0; n];
    let mut gnss = vec![0.0; n];
    for i in 0..n {
        let jitter =
            if params.sigma_white_s > 0.0 { params.sigma_white_s * std_normal.sample(&mut rng) } else { 0.0 };
        drift[i] = gm[i] + jitter;
        let obs =
            if params.gnss_noise_s > 0.0 { params.gnss_noise_s * std_normal.sample(&mut rng) } else { 0.0 };
        gnss[i] = drift[i] + obs;
    }

    Ok(ClockState {
        constant_offset_s,
        drift: TimeErrorSeries::new(0.0, dt, drift),
        gnss_raw_error: TimeErrorSeries::new(0.0, dt, gnss),
    })
}

/// Generate one clock per receiver, each from its own stream of the seed.
pub fn gen_receiver_clocks(
    seed: u64,
    params: &GmClockParams,
    n_receivers: usize,
    duration_s: f64,
) -> Result<Vec<ClockState>> {
    (0..n_receivers)
        .map(|rx| gen_clock_state(seed ^ ((rx as u64 + 1) << 32), params, duration_s))
        .collect()
}

/// Free-space amplitude gain of a propagation path.
///
/// Emitter case (`d2 = None`): one-way Friis, amplitude falls as `1/d1`
/// (-6.02 dB per doubling). Radar case: bistatic product `d1 * d2` with the
/// scalar reflectivity term `rcs_gain_db` (-12.04 dB when both legs double).
pub fn pathloss(
    tx_eirp_dbm: f64,
    d1_m: f64,
    d2_m: Option<f64>,
    rcs_gain_db: f64,
    wavelength_m: f64,
) -> Result<f64> {
    if d1_m.is_nan() || d1_m <= 0.0 || d2_m.is_some_and(|d| d <= 0.0) {
        return Err(Error::InvalidArgument("pathloss: distances must be > 0".into()));
    }
    let eirp_sqrt_w = 10f64.powf((tx_eirp_dbm - 30.0) / 20.0);
    let gain = match d2_m {
        None => eirp_sqrt_w * wavelength_m / (4.0 * PI * d1_m),
        Some(d2) => {
            let rcs_amp = 10f64.powf(rcs_gain_db / 20.0);
            eirp_sqrt_w * rcs_amp * wavelength_m / ((4.0 * PI).powf(1.5) * d1_m * d2)
        }
    };
    Ok(gain)
}

/// Ground truth recorded alongside a simulated capture.
#[derive(Debug, Clone)]
pub struct CaptureTruth {
    /// Mobile node position per snapshot.
    pub uav_positions: Vec<Position3>,
    /// `[rx][snapshot]` geometric target-path delay (bistatic in radar
    /// mode, LOS in emitter mode), without clock error.
    pub target_delays: Vec<Vec<f64>>,
    /// `[rx][snapshot]` clock error applied at that receiver.
    pub clock_errors: Vec<Vec<f64>>,
}

/// Result of a coherent capture across all receivers. All receivers share
/// one snapshot time base.
#[derive(Debug, Clone)]
pub struct CaptureResult {
    pub rx_ids: Vec<String>,
    pub snapshot_times: Vec<f64>,
    pub sample_rate_hz: f64,
    /// `[rx][snapshot]` raw received sample records. Populated in emitter
    /// mode (the TDoA pipeline cross-correlates raw records); left empty by
    /// the radar capture to keep long captures in memory.
    pub samples: Vec<Vec<Vec<Complex64>>>,
    /// `[rx]` estimated CIR series.
    pub cirs: Vec<Vec<CirSnapshot>>,
    pub truth: CaptureTruth,
}

struct PathContribution {
    delay_s: f64,
    gain: Complex64,
}

/// Synthesize one noiseless received record as the sum of delayed, scaled
/// copies of the reference symbol.
fn synth_record(
    reference: &ReferenceSymbol,
    sample_rate: f64,
    paths: &[PathContribution],
) -> Vec<Complex64> {
    let n = reference.len();
    let scale = (n as f64).sqrt();
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    for path in paths {
        let mut path_spec: Vec<Complex64> =
            reference.spectrum.iter().map(|s| s * path.gain * scale).collect();
        spectral::apply_delay_ramp(&mut path_spec, path.delay_s * sample_rate);
        for (acc, v) in spectrum.iter_mut().zip(&path_spec) {
            *acc += v;
        }
    }
    spectral::idft(&spectrum)
}

/// Noise standard deviation per quadrature for a fixed receiver noise floor
/// at `snr_db` below the capture-mean signal power (unit power when the
/// capture is silent). Keeping sigma constant across a capture makes weak
/// snapshots genuinely weak instead of rescaling the floor onto them.
fn capture_noise_sigma(records: &[Vec<Complex64>], snr_db: f64) -> f64 {
    let mut power = 0.0;
    let mut count = 0usize;
    for record in records {
        power += record.iter().map(|s| s.norm_sqr()).sum::<f64>();
        count += record.len();
    }
    let mean = if count > 0 && power > 0.0 { power / count as f64 } else { 1.0 };
    (mean * 10f64.powf(-snr_db / 10.0) / 2.0).sqrt()
}

fn add_noise(record: &mut [Complex64], sigma: f64, rng: &mut rand_chacha::ChaCha8Rng) {
    for s in record.iter_mut() {
        *s += Complex64::new(sigma * sample_gauss(rng), sigma * sample_gauss(rng));
    }
}

fn sample_gauss(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    normal.sample(rng)
}

/// Carrier phase of a geometric path.
fn carrier_phase(center_frequency_hz: f64, delay_s: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * center_frequency_hz * delay_s)
}

fn amplitude_db(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

fn check_coverage(config: &ScenarioConfig, capture: &CaptureParams) -> Result<()> {
    if capture.snapshot_interval_s < config.waveform.symbol_length_s {
        return Err(Error::InvalidArgument(
            "capture: snapshot_interval_s must be >= symbol_length_s".into(),
        ));
    }
    let t_end = capture.t0_s + (capture.n_snapshots.saturating_sub(1)) as f64 * capture.snapshot_interval_s;
    if !config.trajectory.covers(capture.t0_s, t_end) {
        return Err(Error::OutOfRange {
            t: t_end,
            start: config.trajectory.start_time(),
            end: config.trajectory.end_time(),
        });
    }
    Ok(())
}

fn clock_error(clocks: Option<&[ClockState]>, rx_idx: usize, t: f64) -> f64 {
    clocks.map(|c| c[rx_idx].error_at(t)).unwrap_or(0.0)
}

/// Simulate a radar-mode capture: per receiver, the CIR holds the residual
/// direct Tx->Rx path, the moving-target bistatic path weighted by pathloss
/// and the two-way step antenna pattern, and the configured clutter taps;
/// the receiver clock error delays the whole CIR.
pub fn simulate_radar_capture(
    config: &ScenarioConfig,
    capture: &CaptureParams,
    clocks: Option<&[ClockState]>,
    seed: u64,
) -> Result<CaptureResult> {
    if config.mode != Mode::Radar {
        return Err(Error::InvalidArgument("simulate_radar_capture: scenario mode is not radar".into()));
    }
    check_coverage(config, capture)?;
    let tx = *config.transmitters().first().ok_or_else(|| {
        Error::Validation("radar capture requires a stationary tx".into())
    })?;
    let receivers = config.receivers();
    if let Some(c) = clocks {
        if c.len() != receivers.len() {
            return Err(Error::InvalidArgument(format!(
                "clocks: expected {} clock states, got {}",
                receivers.len(),
                c.len()
            )));
        }
    }
    let reference = synth_symbol(&config.waveform)?;
    let sample_rate = config.waveform.sample_rate();
    let fc = config.waveform.center_frequency_hz;
    let lambda = config.waveform.wavelength();
    let tx_pos = tx.static_position().unwrap();
    let tx_eirp = tx.eirp_dbm.unwrap();
    let imp = &config.impairments;

    let times: Vec<f64> = (0..capture.n_snapshots)
        .map(|i| capture.t0_s + i as f64 * capture.snapshot_interval_s)
        .collect();
    let uav_positions: Vec<Position3> =
        times.iter().map(|&t| config.trajectory.sample(t)).collect::<Result<_>>()?;

    let mut cirs = Vec::with_capacity(receivers.len());
    let mut target_delays = Vec::with_capacity(receivers.len());
    let mut clock_errors = Vec::with_capacity(receivers.len());

    for (rx_idx, rx) in receivers.iter().enumerate() {
        let rx_pos = rx.static_position().unwrap();
        let d_tx_rx = tx_pos.distance_to(&rx_pos);
        let direct_delay = los_delay(tx_pos, rx_pos);
        let direct_amp = if imp.direct_path_gain_db.is_finite() && d_tx_rx > 0.0 {
            pathloss(tx_eirp, d_tx_rx, None, 0.0, lambda)?
                * amplitude_db(
                    imp.direct_path_gain_db
                        + antenna_gain(&tx.antenna, tx_pos, rx_pos)?
                        + antenna_gain(&rx.antenna, rx_pos, tx_pos)?,
                )
        } else {
            0.0
        };

        let per_snapshot: Vec<(Vec<Complex64>, f64, f64)> = times
            .par_iter()
            .enumerate()
            .map(|(i, &t)| {
                let target = uav_positions[i];
                let d1 = tx_pos.distance_to(&target);
                let d2 = target.distance_to(&rx_pos);
                let geo_delay = bistatic_delay(tx_pos, target, rx_pos);
                let pattern_db = antenna_gain(&tx.antenna, tx_pos, target).unwrap_or(0.0)
                    + antenna_gain(&rx.antenna, rx_pos, target).unwrap_or(0.0);
                let target_amp = pathloss(tx_eirp, d1, Some(d2), imp.rcs_gain_db, lambda)
                    .unwrap_or(0.0)
                    * amplitude_db(pattern_db);
                let delta = clock_error(clocks, rx_idx, t);

                let mut paths = Vec::with_capacity(2 + imp.clutter.len());
                if direct_amp > 0.0 {
                    paths.push(PathContribution {
                        delay_s: direct_delay + delta,
                        gain: direct_amp * carrier_phase(fc, direct_delay),
                    });
                }
                if target_amp > 0.0 {
                    paths.push(PathContribution {
                        delay_s: geo_delay + delta,
                        gain: target_amp * carrier_phase(fc, geo_delay),
                    });
                }
                for c in &imp.clutter {
                    paths.push(PathContribution {
                        delay_s: c.delay_s + delta,
                        gain: c.complex_gain() * carrier_phase(fc, c.delay_s),
                    });
                }
                (synth_record(&reference, sample_rate, &paths), geo_delay, delta)
            })
            .collect();

        let sigma = imp
            .snr_db
            .map(|snr| {
                let records: Vec<Vec<Complex64>> =
                    per_snapshot.iter().map(|(r, _, _)| r.clone()).collect();
                capture_noise_sigma(&records, snr)
            })
            .unwrap_or(0.0);

        let cir_series: Vec<CirSnapshot> = per_snapshot
            .par_iter()
            .enumerate()
            .map(|(i, (record, _, _))| {
                let mut record = record.clone();
                if sigma > 0.0 {
                    let mut rng = stream_rng(seed, Domain::CaptureNoise, rx_idx as u64, i as u64);
                    add_noise(&mut record, sigma, &mut rng);
                }
                estimate_cir(&record, &reference, times[i], 1.0 / sample_rate)
                    .expect("record length matches reference by construction")
            })
            .collect();

        let mut delays = Vec::with_capacity(per_snapshot.len());
        let mut errors = Vec::with_capacity(per_snapshot.len());
        for (_, d, e) in &per_snapshot {
            delays.push(*d);
            errors.push(*e);
        }
        cirs.push(cir_series);
        target_delays.push(delays);
        clock_errors.push(errors);
    }

    Ok(CaptureResult {
        rx_ids: receivers.iter().map(|r| r.id.clone()).collect(),
        snapshot_times: times,
        sample_rate_hz: sample_rate,
        samples: Vec::new(),
        cirs,
        truth: CaptureTruth { uav_positions, target_delays, clock_errors },
    })
}

/// Simulate an emitter-mode capture: per receiver, a single LOS path from
/// the mobile transmitter plus that receiver's clock error and AWGN. Raw
/// sample records are kept for the cross-correlation pipeline.
pub fn simulate_emitter_capture(
    config: &ScenarioConfig,
    capture: &CaptureParams,
    clocks: Option<&[ClockState]>,
    seed: u64,
) -> Result<CaptureResult> {
    if config.mode != Mode::Emitter {
        return Err(Error::InvalidArgument(
            "simulate_emitter_capture: scenario mode is not emitter".into(),
        ));
    }
    check_coverage(config, capture)?;
    let mobile = config.mobile().ok_or_else(|| Error::Validation("no mobile node".into()))?;
    let eirp = mobile
        .eirp_dbm
        .ok_or_else(|| Error::Validation("emitter mode requires eirp_dbm on the mobile node".into()))?;
    let receivers = config.receivers();
    if let Some(c) = clocks {
        if c.len() != receivers.len() {
            return Err(Error::InvalidArgument(format!(
                "clocks: expected {} clock states, got {}",
                receivers.len(),
                c.len()
            )));
        }
    }
    let reference = synth_symbol(&config.waveform)?;
    let sample_rate = config.waveform.sample_rate();
    let fc = config.waveform.center_frequency_hz;
    let lambda = config.waveform.wavelength();
    let imp = &config.impairments;

    let times: Vec<f64> = (0..capture.n_snapshots)
        .map(|i| capture.t0_s + i as f64 * capture.snapshot_interval_s)
        .collect();
    let uav_positions: Vec<Position3> =
        times.iter().map(|&t| config.trajectory.sample(t)).collect::<Result<_>>()?;

    let mut samples = Vec::with_capacity(receivers.len());
    let mut cirs = Vec::with_capacity(receivers.len());
    let mut target_delays = Vec::with_capacity(receivers.len());
    let mut clock_errors = Vec::with_capacity(receivers.len());

    for (rx_idx, rx) in receivers.iter().enumerate() {
        let rx_pos = rx.static_position().unwrap();
        let noiseless: Vec<(Vec<Complex64>, f64, f64)> = times
            .par_iter()
            .enumerate()
            .map(|(i, &t)| {
                let uav = uav_positions[i];
                let d = uav.distance_to(&rx_pos);
                let geo_delay = los_delay(uav, rx_pos);
                let pattern_db = antenna_gain(&rx.antenna, rx_pos, uav).unwrap_or(0.0);
                let amp = pathloss(eirp, d, None, 0.0, lambda).unwrap_or(0.0)
                    * amplitude_db(pattern_db);
                let delta = clock_error(clocks, rx_idx, t);
                let paths = [PathContribution {
                    delay_s: geo_delay + delta,
                    gain: amp * carrier_phase(fc, geo_delay),
                }];
                (synth_record(&reference, sample_rate, &paths), geo_delay, delta)
            })
            .collect();

        let sigma = imp
            .snr_db
            .map(|snr| {
                let records: Vec<Vec<Complex64>> =
                    noiseless.iter().map(|(r, _, _)| r.clone()).collect();
                capture_noise_sigma(&records, snr)
            })
            .unwrap_or(0.0);

        let per_snapshot: Vec<(Vec<Complex64>, CirSnapshot)> = noiseless
            .par_iter()
            .enumerate()
            .map(|(i, (record, _, _))| {
                let mut record = record.clone();
                if sigma > 0.0 {
                    let mut rng = stream_rng(seed, Domain::CaptureNoise, rx_idx as u64, i as u64);
                    add_noise(&mut record, sigma, &mut rng);
                }
                let cir = estimate_cir(&record, &reference, times[i], 1.0 / sample_rate)
                    .expect("record length matches reference by construction");
                (record, cir)
            })
            .collect();

        let mut records = Vec::with_capacity(per_snapshot.len());
        let mut cir_series = Vec::with_capacity(per_snapshot.len());
        for (rec, cir) in per_snapshot {
            records.push(rec);
            cir_series.push(cir);
        }
        let mut delays = Vec::with_capacity(noiseless.len());
        let mut errors = Vec::with_capacity(noiseless.len());
        for (_, d, e) in &noiseless {
            delays.push(*d);
            errors.push(*e);
        }
        samples.push(records);
        cirs.push(cir_series);
        target_delays.push(delays);
        clock_errors.push(errors);
    }

    Ok(CaptureResult {
        rx_ids: receivers.iter().map(|r| r.id.clone()).collect(),
        snapshot_times: times,
        sample_rate_hz: sample_rate,
        samples,
        cirs,
        truth: CaptureTruth { uav_positions, target_delays, clock_errors },
    })
}

/// Sampling grid of a beacon calibration recording.
#[derive(Debug, Clone, Copy)]
pub struct BeaconSampling {
    pub t0_s: f64,
    pub interval_s: f64,
    pub n_samples: usize,
}

/// Measured delay series of a beacon transmission at every receiver:
/// geometric LOS delay plus the receiver clock error, with optional white
/// measurement noise. Feeds the synchronization calibration.
pub fn simulate_beacon_delays(
    beacon_pos: Position3,
    rx_positions: &[Position3],
    clocks: &[ClockState],
    sampling: BeaconSampling,
    noise_s: f64,
    seed: u64,
) -> Result<Vec<TimeErrorSeries>> {
    let BeaconSampling { t0_s, interval_s, n_samples } = sampling;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("simulate_beacon_delays: n_samples must be > 0".into()));
    }
    if rx_positions.len() != clocks.len() {
        return Err(Error::InvalidArgument(
            "simulate_beacon_delays: one clock state per receiver required".into(),
        ));
    }
    Ok(rx_positions
        .iter()
        .zip(clocks)
        .enumerate()
        .map(|(rx_idx, (rx_pos, clock))| {
            let geo = los_delay(beacon_pos, *rx_pos);
            let mut rng = stream_rng(seed, Domain::BeaconNoise, rx_idx as u64, 0);
            let values = (0..n_samples)
                .map(|i| {
                    let t = t0_s + i as f64 * interval_s;
                    let noise = if noise_s > 0.0 { noise_s * sample_gauss(&mut rng) } else { 0.0 };
                    geo + clock.error_at(t) + noise
                })
                .collect();
            TimeErrorSeries::new(t0_s, interval_s, values)
        })
        .collect())
}

/// White measurement noise stream for pipeline-level perturbation tests.
pub fn measurement_noise(seed: u64, unit: u64, n: usize, sigma: f64) -> Vec<f64> {
    let mut rng = stream_rng(seed, Domain::MeasurementNoise, unit, 0);
    (0..n).map(|_| sigma * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}
