//! Campaign orchestration: scenario-driven simulation runs, synchronization
//! calibration, pipeline execution, CSV/report emission, and the filter
//! window sweep. All randomness flows from one seed through counter-based
//! per-component streams, so a campaign is reproducible byte-for-byte and
//! independent of the worker count.

pub mod iq;

pub use iq::{read_iq, simulate_frame_loss, write_iq, Gap, IqStream};

use crate::airsim::{
    gen_receiver_clocks, simulate_beacon_delays, simulate_emitter_capture,
    simulate_radar_capture, BeaconSampling, CaptureResult, ClockState,
};
use crate::emitter::run_emitter_pipeline;
use crate::error::{Error, Result};
use crate::radar::run_radar_pipeline;
use crate::scene::{load_scenario, los_delay, Mode, Position3, ScenarioConfig};
use crate::sync::{beacon_calibrate, pairwise_tdoa, rect_lowpass, SyncCorrections, TimeErrorSeries};
use std::fmt::Write;
use std::path::Path;

/// Campaign-level options layered over the scenario file.
#[derive(Debug, Clone, Default)]
pub struct CampaignOptions {
    pub seed: u64,
    /// Worker-pool size; `None` uses the process-wide default.
    pub workers: Option<usize>,
    pub snapshots_override: Option<usize>,
    pub snr_override: Option<f64>,
}

/// Error statistics and per-run counts of a finished campaign.
#[derive(Debug, Clone)]
pub struct CampaignReport {
    pub mode: Mode,
    /// Fix opportunities (post-averaging blocks in radar mode, snapshots in
    /// emitter mode).
    pub n_opportunities: usize,
    pub n_fixes: usize,
    pub detection_fraction: f64,
    pub median_horizontal_error_m: f64,
    pub p90_horizontal_error_m: f64,
    pub p99_horizontal_error_m: f64,
}

impl CampaignReport {
    pub fn summary_text(&self) -> String {
        let mode = match self.mode {
            Mode::Radar => "radar",
            Mode::Emitter => "emitter",
        };
        format!(
            "mode: {mode}\n\
             fix_opportunities: {}\n\
             fixes: {}\n\
             detection_fraction: {:.4}\n\
             median_horizontal_error_m: {}\n\
             p90_horizontal_error_m: {}\n\
             p99_horizontal_error_m: {}\n",
            self.n_opportunities,
            self.n_fixes,
            self.detection_fraction,
            self.median_horizontal_error_m,
            self.p90_horizontal_error_m,
            self.p99_horizontal_error_m
        )
    }
}

/// Nearest-rank quantile of unsorted data; `q` in (0, 1].
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn capture_end(config: &ScenarioConfig) -> f64 {
    config.capture.t0_s
        + (config.capture.n_snapshots.saturating_sub(1)) as f64
            * config.capture.snapshot_interval_s
}

/// Generate per-receiver clocks when the scenario configures a clock model.
pub fn campaign_clocks(config: &ScenarioConfig, seed: u64) -> Result<Option<Vec<ClockState>>> {
    let Some(params) = &config.impairments.clock else {
        return Ok(None);
    };
    let calibration = config.sync.as_ref().map(|s| s.calibration_duration_s).unwrap_or(0.0);
    let duration = capture_end(config).max(calibration) + 2.0;
    let clocks = gen_receiver_clocks(seed, params, config.receivers().len(), duration)?;
    Ok(Some(clocks))
}

/// Run the beacon calibration configured in the scenario: simulate beacon
/// delay series at every receiver, estimate constant offsets, and low-pass
/// the raw GNSS error of each clock.
pub fn run_calibration(
    config: &ScenarioConfig,
    clocks: &[ClockState],
    seed: u64,
) -> Result<SyncCorrections> {
    let sync = config
        .sync
        .as_ref()
        .ok_or_else(|| Error::Validation("scenario has no [sync] section".into()))?;
    let beacon = config
        .beacon()
        .ok_or_else(|| Error::Validation("sync calibration requires a beacon node".into()))?;
    let beacon_pos = beacon.static_position().unwrap();
    let rx_nodes: Vec<(String, Position3)> = config
        .receivers()
        .iter()
        .map(|r| (r.id.clone(), r.static_position().unwrap()))
        .collect();
    let positions: Vec<Position3> = rx_nodes.iter().map(|(_, p)| *p).collect();
    let n_samples = sync.calibration_duration_s.max(1.0) as usize;
    let delays = simulate_beacon_delays(
        beacon_pos,
        &positions,
        clocks,
        BeaconSampling { t0_s: 0.0, interval_s: 1.0, n_samples },
        sync.beacon_noise_s,
        seed,
    )?;
    let offsets = beacon_calibrate(beacon_pos, &rx_nodes, &delays)?;
    let filtered_gnss: Vec<TimeErrorSeries> = clocks
        .iter()
        .map(|c| rect_lowpass(&c.gnss_raw_error, sync.filter_window_s))
        .collect::<Result<_>>()?;
    Ok(SyncCorrections { offsets, filtered_gnss })
}

/// Fix rows shared by both pipelines for CSV export.
struct FixRow {
    timestamp_s: f64,
    position: Position3,
    residual_s: f64,
    error_east_m: f64,
    error_north_m: f64,
    error_up_m: f64,
    horizontal_error_m: f64,
}

/// Execute a full campaign: simulate, calibrate when configured, run the
/// mode's pipeline, and write `fixes.csv`, `errors.csv`, the measurement
/// CSV (`detections.csv` / `tdoas.csv`), and `summary.txt` into `out_dir`.
/// Deterministic for a given scenario + seed, independent of worker count.
pub fn run_campaign<P: AsRef<Path>, Q: AsRef<Path>>(
    scenario_path: P,
    opts: &CampaignOptions,
    out_dir: Q,
) -> Result<CampaignReport> {
    let mut config = load_scenario(scenario_path)?;
    if let Some(n) = opts.snapshots_override {
        config.capture.n_snapshots = n;
    }
    if let Some(snr) = opts.snr_override {
        config.impairments.snr_db = Some(snr);
    }
    config.validate()?;

    let out_dir = out_dir.as_ref();
    match opts.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Solver(e.to_string()))?;
            pool.install(|| run_campaign_inner(&config, opts, out_dir))
        }
        None => run_campaign_inner(&config, opts, out_dir),
    }
}

fn run_campaign_inner(
    config: &ScenarioConfig,
    opts: &CampaignOptions,
    out_dir: &Path,
) -> Result<CampaignReport> {
    std::fs::create_dir_all(out_dir)?;
    let clocks = campaign_clocks(config, opts.seed)?;
    let corrections = match (&clocks, &config.sync, config.beacon()) {
        (Some(clocks), Some(_), Some(_)) => Some(run_calibration(config, clocks, opts.seed)?),
        _ => None,
    };

    let capture = config.capture.clone();
    let (rows, extra_csv, n_opportunities): (Vec<FixRow>, (String, String), usize) =
        match config.mode {
            Mode::Radar => {
                let result =
                    simulate_radar_capture(config, &capture, clocks.as_deref(), opts.seed)?;
                let out = run_radar_pipeline(&result, config, corrections.as_ref())?;
                let mut csv = String::from("timestamp_s,receiver,delay_s,amplitude\n");
                for d in &out.detections {
                    csv.push_str(&format!(
                        "{},{},{},{}\n",
                        d.snapshot_time_s, d.receiver, d.delay_s, d.amplitude
                    ));
                }
                let rows = out
                    .fixes
                    .iter()
                    .map(|f| FixRow {
                        timestamp_s: f.fix.timestamp_s,
                        position: f.fix.position,
                        residual_s: f.fix.residual_norm_s,
                        error_east_m: f.fix.position.east - f.true_position.east,
                        error_north_m: f.fix.position.north - f.true_position.north,
                        error_up_m: f.error_up_m,
                        horizontal_error_m: f.horizontal_error_m,
                    })
                    .collect();
                (rows, ("detections.csv".into(), csv), out.n_blocks)
            }
            Mode::Emitter => {
                let result =
                    simulate_emitter_capture(config, &capture, clocks.as_deref(), opts.seed)?;
                let out = run_emitter_pipeline(&result, config, corrections.as_ref())?;
                let mut csv = String::from("timestamp_s,rx_i,rx_j,tdoa_s,peak_quality_db\n");
                for m in &out.tdoas {
                    csv.push_str(&format!(
                        "{},{},{},{},{}\n",
                        m.timestamp_s, m.rx_i, m.rx_j, m.tdoa_s, m.peak_quality_db
                    ));
                }
                let rows = out
                    .fixes
                    .iter()
                    .map(|f| FixRow {
                        timestamp_s: f.fix.timestamp_s,
                        position: f.fix.position,
                        residual_s: f.fix.residual_norm_s,
                        error_east_m: f.fix.position.east - f.true_position.east,
                        error_north_m: f.fix.position.north - f.true_position.north,
                        error_up_m: f.error_up_m,
                        horizontal_error_m: f.horizontal_error_m,
                    })
                    .collect();
                (rows, ("tdoas.csv".into(), csv), capture.n_snapshots)
            }
        };

    let mut fixes_csv = String::from("timestamp_s,east_m,north_m,up_m,residual_s\n");
    let mut errors_csv = String::from(
        "timestamp_s,error_east_m,error_north_m,error_up_m,horizontal_error_m\n",
    );
    for r in &rows {
        fixes_csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.timestamp_s, r.position.east, r.position.north, r.position.up, r.residual_s
        ));
        errors_csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.timestamp_s, r.error_east_m, r.error_north_m, r.error_up_m, r.horizontal_error_m
        ));
    }
    std::fs::write(out_dir.join("fixes.csv"), fixes_csv)?;
    std::fs::write(out_dir.join("errors.csv"), errors_csv)?;
    std::fs::write(out_dir.join(&extra_csv.0), extra_csv.1)?;

    let errors: Vec<f64> = rows.iter().map(|r| r.horizontal_error_m).collect();
    let report = CampaignReport {
        mode: config.mode,
        n_opportunities,
        n_fixes: rows.len(),
        detection_fraction: if n_opportunities > 0 {
            rows.len() as f64 / n_opportunities as f64
        } else {
            0.0
        },
        median_horizontal_error_m: quantile(&errors, 0.5),
        p90_horizontal_error_m: quantile(&errors, 0.9),
        p99_horizontal_error_m: quantile(&errors, 0.99),
    };
    std::fs::write(out_dir.join("summary.txt"), report.summary_text())?;
    Ok(report)
}

/// One row of the filter window sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub window_s: f64,
    pub post_variance_s2: f64,
    pub is_minimum: bool,
}

/// Sweep rectangular filter windows over the scenario's clock model and
/// report the post-compensation pairwise TDoA variance per window,
/// averaged over all receiver pairs. A window of one sample applies no
/// drift correction, so that row is the uncompensated baseline. The
/// minimizer row is marked.
pub fn sweep_filter_window(
    config: &ScenarioConfig,
    windows_s: &[f64],
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let sync = config
        .sync
        .as_ref()
        .ok_or_else(|| Error::Validation("scenario has no [sync] section".into()))?;
    let beacon = config
        .beacon()
        .ok_or_else(|| Error::Validation("filter sweep requires a beacon node".into()))?;
    let clocks_params = config
        .impairments
        .clock
        .as_ref()
        .ok_or_else(|| Error::Validation("filter sweep requires a clock model".into()))?;
    let beacon_pos = beacon.static_position().unwrap();
    let rx_nodes: Vec<(String, Position3)> = config
        .receivers()
        .iter()
        .map(|r| (r.id.clone(), r.static_position().unwrap()))
        .collect();
    let positions: Vec<Position3> = rx_nodes.iter().map(|(_, p)| *p).collect();
    let n_samples = sync.calibration_duration_s.max(1.0) as usize;
    let clocks = gen_receiver_clocks(seed, clocks_params, positions.len(), n_samples as f64 + 2.0)?;
    let delays = simulate_beacon_delays(
        beacon_pos,
        &positions,
        &clocks,
        BeaconSampling { t0_s: 0.0, interval_s: 1.0, n_samples },
        sync.beacon_noise_s,
        seed,
    )?;
    let offsets = beacon_calibrate(beacon_pos, &rx_nodes, &delays)?;
    let geo: Vec<f64> = positions.iter().map(|p| los_delay(beacon_pos, *p)).collect();

    let pair_variance = |corrected: &[TimeErrorSeries]| -> Result<f64> {
        let mut total = 0.0;
        let mut pairs = 0usize;
        for i in 0..corrected.len() {
            for j in i + 1..corrected.len() {
                total += pairwise_tdoa(&corrected[i], &corrected[j], geo[i], geo[j])?.variance();
                pairs += 1;
            }
        }
        Ok(total / pairs.max(1) as f64)
    };

    let dt = clocks_params.sample_interval_s;
    let mut rows = Vec::with_capacity(windows_s.len());
    for &window in windows_s {
        let corrected: Vec<TimeErrorSeries> = if window <= dt {
            // Baseline row: offsets only, no drift correction.
            delays
                .iter()
                .zip(&offsets)
                .map(|(d, o)| {
                    TimeErrorSeries::new(
                        d.t0_s,
                        d.dt_s,
                        d.values.iter().map(|v| v - o.constant_offset_s).collect(),
                    )
                })
                .collect()
        } else {
            let filtered: Vec<TimeErrorSeries> = clocks
                .iter()
                .map(|c| rect_lowpass(&c.gnss_raw_error, window))
                .collect::<Result<_>>()?;
            crate::sync::compensate(&delays, &offsets, &filtered)?
        };
        rows.push(SweepRow { window_s: window, post_variance_s2: pair_variance(&corrected)?, is_minimum: false });
    }
    if let Some(min_idx) = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.post_variance_s2.partial_cmp(&b.1.post_variance_s2).unwrap())
        .map(|(i, _)| i)
    {
        rows[min_idx].is_minimum = true;
    }
    Ok(rows)
}

/// Render a sweep as an aligned plain-text table.
pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("window_s  post_variance_ns2  minimum\n");
    for r in rows {
        out.push_str(&format!(
            "{:<9} {:<18.6} {}\n",
            r.window_s,
            r.post_variance_s2 * 1e18,
            if r.is_minimum { "*" } else { "" }
        ));
    }
    out
}

/// Write a capture's records per receiver as IQ files with sidecars; raw
/// samples when present (emitter mode), estimated CIR tap series otherwise.
/// Returns the written file paths.
pub fn export_capture<P: AsRef<Path>>(
    capture: &CaptureResult,
    out_dir: P,
    frame_loss: Option<(usize, f64, u64)>,
) -> Result<Vec<std::path::PathBuf>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let mut paths = Vec::new();
    for (rx_idx, rx_id) in capture.rx_ids.iter().enumerate() {
        let samples: Vec<num_complex::Complex64> = if !capture.samples.is_empty()
            && !capture.samples[rx_idx].is_empty()
        {
            capture.samples[rx_idx].iter().flatten().copied().collect()
        } else {
            capture.cirs[rx_idx].iter().flat_map(|c| c.taps.iter()).copied().collect()
        };
        let mut stream = IqStream::new(
            samples,
            capture.sample_rate_hz,
            capture.snapshot_times.first().copied().unwrap_or(0.0),
        );
        if let Some((frame_size, fraction, seed)) = frame_loss {
            let n_frames = stream.samples.len().div_ceil(frame_size);
            let lose = ((n_frames as f64 * fraction).round() as usize).min(n_frames);
            let mut rng = crate::streams::stream_rng(
                seed,
                crate::streams::Domain::MeasurementNoise,
                rx_idx as u64,
                1,
            );
            use rand::seq::index::sample;
            let indices: Vec<usize> = sample(&mut rng, n_frames, lose).into_vec();
            stream = simulate_frame_loss(&stream, frame_size, &indices)?;
        }
        let path = out_dir.join(format!("{rx_id}.iq"));
        write_iq(&stream, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Recompute a summary from an `errors.csv` produced by [`run_campaign`].
pub fn report_from_errors_csv<P: AsRef<Path>>(path: P) -> Result<String> {
    let text = std::fs::read_to_string(path)?;
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let err: f64 = fields
            .last()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("errors.csv line {}: bad row", i + 1)))?;
        errors.push(err);
    }
    let mut out = String::new();
    writeln!(out, "fixes: {}", errors.len()).ok();
    writeln!(out, "median_horizontal_error_m: {}", quantile(&errors, 0.5)).ok();
    writeln!(out, "p90_horizontal_error_m: {}", quantile(&errors, 0.9)).ok();
    writeln!(out, "p99_horizontal_error_m: {}", quantile(&errors, 0.99)).ok();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_matches_sort_oracle() {
        let data = vec![5.0, 1.0, 4.0, 2.0, 3.0, 9.0, 7.0, 6.0, 8.0, 0.0];
        let mut sorted = data.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (q, expected_rank) in [(0.5, 5usize), (0.9, 9), (0.99, 10), (1.0, 10)] {
            assert_eq!(quantile(&data, q), sorted[expected_rank - 1], "q={q}");
        }
    }

    #[test]
    fn quantiles_monotone() {
        let data: Vec<f64> = (0..57).map(|i| ((i * 37) % 101) as f64).collect();
        let qs = [0.1, 0.25, 0.5, 0.75, 0.9, 0.99];
        let vals: Vec<f64> = qs.iter().map(|&q| quantile(&data, q)).collect();
        for pair in vals.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
    }
}
