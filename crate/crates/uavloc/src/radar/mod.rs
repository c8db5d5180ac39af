//! Radar processing chain: snapshot averaging, delay-line clutter
//! cancellation, successive-cancellation ML delay estimation,
//! Kalman/Hungarian delay tracking, and bistatic least-squares position
//! fusion.

mod assign;
mod track;

pub use assign::{assignment_cost, hungarian};
pub use track::{ConfirmedDelay, DelayTrack, Tracker, TrackerParams};

use crate::airsim::CaptureResult;
use crate::error::{Error, Result};
use crate::lsq::{self, ResidualRow, SolveOptions};
use crate::scene::{bistatic_delay, Mode, Position3, ScenarioConfig, SPEED_OF_LIGHT};
use crate::spectral;
use crate::sync::SyncCorrections;
use crate::waveform::{cir_spectrum, CirSnapshot};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// One estimated propagation path in a CIR snapshot.
#[derive(Debug, Clone)]
pub struct DelayDetection {
    pub delay_s: f64,
    /// Linear amplitude of the fitted path.
    pub amplitude: f64,
    pub snapshot_time_s: f64,
    pub receiver: String,
}

/// Target position estimate with solver diagnostics.
#[derive(Debug, Clone)]
pub struct PositionFix {
    pub position: Position3,
    /// RMS delay residual at the solution, seconds.
    pub residual_norm_s: f64,
    pub iterations: usize,
    pub timestamp_s: f64,
    pub converged: bool,
}

/// Non-overlapping block means of `k` consecutive complex CIRs. The output
/// timestamp is the block-center time; output length is `floor(n / k)`.
pub fn average_snapshots(cirs: &[CirSnapshot], k: usize) -> Result<Vec<CirSnapshot>> {
    if cirs.is_empty() {
        return Err(Error::InvalidArgument("average_snapshots: empty input".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("average_snapshots: k must be >= 1".into()));
    }
    let n_bins = cirs[0].taps.len();
    let blocks = cirs.len() / k;
    Ok((0..blocks)
        .map(|b| {
            let chunk = &cirs[b * k..(b + 1) * k];
            let mut taps = vec![Complex64::new(0.0, 0.0); n_bins];
            let mut t_sum = 0.0;
            for cir in chunk {
                t_sum += cir.timestamp_s;
                for (acc, tap) in taps.iter_mut().zip(&cir.taps) {
                    *acc += tap;
                }
            }
            let scale = 1.0 / k as f64;
            for tap in &mut taps {
                *tap *= scale;
            }
            CirSnapshot {
                taps,
                delay_resolution_s: chunk[0].delay_resolution_s,
                timestamp_s: t_sum * scale,
            }
        })
        .collect())
}

/// First-order (two-pulse) delay-line canceler: `out[i] = cir[i+1] - cir[i]`.
/// Time-invariant clutter cancels exactly; output length is `n - 1` and the
/// output timestamp is the newer snapshot's.
pub fn delay_line_canceler(cirs: &[CirSnapshot]) -> Result<Vec<CirSnapshot>> {
    if cirs.len() < 2 {
        return Err(Error::InvalidArgument(
            "delay_line_canceler: need at least 2 snapshots".into(),
        ));
    }
    Ok(cirs
        .windows(2)
        .map(|pair| CirSnapshot {
            taps: pair[1].taps.iter().zip(&pair[0].taps).map(|(b, a)| b - a).collect(),
            delay_resolution_s: pair[1].delay_resolution_s,
            timestamp_s: pair[1].timestamp_s,
        })
        .collect())
}

/// Higher-order canceler: `order` cascaded two-pulse stages.
pub fn delay_line_canceler_order(cirs: &[CirSnapshot], order: usize) -> Result<Vec<CirSnapshot>> {
    if order == 0 {
        return Ok(cirs.to_vec());
    }
    let mut out = delay_line_canceler(cirs)?;
    for _ in 1..order {
        out = delay_line_canceler(&out)?;
    }
    Ok(out)
}

/// Median-based noise floor of a CIR: `median(|taps|^2) / ln 2`, the
/// unbiased scale estimate for exponentially distributed noise power.
pub fn noise_floor(cir: &CirSnapshot) -> f64 {
    let mut powers: Vec<f64> = cir.taps.iter().map(|t| t.norm_sqr()).collect();
    powers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = powers.len();
    let median = if n % 2 == 1 {
        powers[n / 2]
    } else {
        0.5 * (powers[n / 2 - 1] + powers[n / 2])
    };
    median / std::f64::consts::LN_2
}

/// Successive-cancellation maximum-likelihood delay estimation.
///
/// Iteratively takes the strongest tap, refines its delay to sub-bin
/// precision (three-point parabolic seed, then a golden-section
/// maximization of the band-limited interpolated response, which is the
/// actual matched-filter maximum), subtracts the fitted path, and repeats
/// until `max_targets` paths are found or the residual falls below
/// `threshold_db` over the median noise floor.
pub fn ml_delay_estimate(
    cir: &CirSnapshot,
    max_targets: usize,
    threshold_db: f64,
    receiver: &str,
) -> Vec<DelayDetection> {
    let n = cir.taps.len();
    if n == 0 || max_targets == 0 {
        return Vec::new();
    }
    let floor = noise_floor(cir);
    let threshold_power = floor * 10f64.powf(threshold_db / 10.0);
    // Numerical dynamic-range stop: in noiseless CIRs the median floor is
    // rounding residue, which would otherwise re-detect the subtraction
    // remainder of an already-extracted path.
    let initial_peak = cir.taps.iter().map(|t| t.norm_sqr()).fold(0.0, f64::max);
    let range_floor = initial_peak * 1e-12;

    let mut spectrum = cir_spectrum(cir);
    let mut taps = cir.taps.clone();
    let mut detections = Vec::new();

    for _ in 0..max_targets {
        let mut peak_bin = 0usize;
        let mut peak_power = -1.0;
        for (i, t) in taps.iter().enumerate() {
            let p = t.norm_sqr();
            if p > peak_power {
                peak_power = p;
                peak_bin = i;
            }
        }
        if peak_power <= threshold_power.max(range_floor) || peak_power == 0.0 {
            break;
        }

        let y_minus = taps[(peak_bin + n - 1) % n].norm_sqr();
        let y_plus = taps[(peak_bin + 1) % n].norm_sqr();
        let seed = peak_bin as f64 + spectral::parabolic_offset(y_minus, peak_power, y_plus);
        let refined = spectral::golden_peak(&spectrum, seed - 0.5, seed + 0.5, 60);
        let refined = refined.rem_euclid(n as f64);
        let amplitude = spectral::interp_at(&spectrum, refined);

        detections.push(DelayDetection {
            delay_s: refined * cir.delay_resolution_s,
            amplitude: amplitude.norm(),
            snapshot_time_s: cir.timestamp_s,
            receiver: receiver.to_string(),
        });

        // Subtract the fitted path response and refresh the tap domain.
        for (k, s) in spectrum.iter_mut().enumerate() {
            let phase = -2.0 * PI * spectral::signed_freq(k, n) * refined / n as f64;
            *s -= amplitude * Complex64::from_polar(1.0, phase);
        }
        taps = spectral::idft(&spectrum);
    }
    detections
}

/// Bistatic least-squares target localization: minimizes the sum of squared
/// bistatic-delay residuals over the target position by damped Gauss-Newton
/// with analytic Jacobian.
pub fn localize_bistatic(
    tx: Position3,
    rx_delays: &[(Position3, f64)],
    initial_guess: Position3,
    fixed_altitude: Option<f64>,
    timestamp_s: f64,
    opts: &SolveOptions,
) -> Result<PositionFix> {
    let min_rx = if fixed_altitude.is_some() { 2 } else { 3 };
    if rx_delays.len() < min_rx {
        return Err(Error::InvalidArgument(format!(
            "localize_bistatic: need >= {min_rx} receiver delays, got {}",
            rx_delays.len()
        )));
    }
    let rx_delays = rx_delays.to_vec();
    let outcome = lsq::solve_position(
        initial_guess,
        fixed_altitude,
        move |p: Position3| {
            rx_delays
                .iter()
                .map(|(rx, tau)| {
                    let d_tx = p.distance_to(&tx).max(1e-9);
                    let d_rx = p.distance_to(rx).max(1e-9);
                    ResidualRow {
                        value: (d_tx + d_rx) / SPEED_OF_LIGHT - tau,
                        gradient: [
                            ((p.east - tx.east) / d_tx + (p.east - rx.east) / d_rx)
                                / SPEED_OF_LIGHT,
                            ((p.north - tx.north) / d_tx + (p.north - rx.north) / d_rx)
                                / SPEED_OF_LIGHT,
                            ((p.up - tx.up) / d_tx + (p.up - rx.up) / d_rx) / SPEED_OF_LIGHT,
                        ],
                    }
                })
                .collect()
        },
        opts,
    )?;
    Ok(PositionFix {
        position: outcome.position,
        residual_norm_s: outcome.residual_rms,
        iterations: outcome.iterations,
        timestamp_s,
        converged: outcome.converged,
    })
}

/// A fused radar fix with its ground-truth error.
#[derive(Debug, Clone)]
pub struct RadarFix {
    pub fix: PositionFix,
    pub true_position: Position3,
    pub horizontal_error_m: f64,
    pub error_up_m: f64,
    /// Receivers contributing a confirmed track to this fix.
    pub n_receivers: usize,
}

/// Output of the full radar chain on one capture.
#[derive(Debug, Clone)]
pub struct RadarPipelineOutput {
    pub fixes: Vec<RadarFix>,
    /// Post-canceler block count (fix opportunities).
    pub n_blocks: usize,
    /// Fraction of blocks that produced a fix.
    pub detection_fraction: f64,
    /// Every raw detection, for export.
    pub detections: Vec<DelayDetection>,
}

/// Run the complete radar processing chain on a capture: per receiver
/// average `k` snapshots, cancel static clutter, estimate path delays,
/// track them, then fuse confirmed per-receiver delays into position fixes
/// by bistatic least squares. Fixes are seeded with the previous fix (the
/// first from a coarse grid over the surveillance volume).
pub fn run_radar_pipeline(
    capture: &CaptureResult,
    config: &ScenarioConfig,
    sync: Option<&SyncCorrections>,
) -> Result<RadarPipelineOutput> {
    if config.mode != Mode::Radar {
        return Err(Error::InvalidArgument("run_radar_pipeline: scenario mode is not radar".into()));
    }
    let tx = config
        .transmitters()
        .first()
        .and_then(|n| n.static_position())
        .ok_or_else(|| Error::Validation("radar pipeline requires a stationary tx".into()))?;
    let receivers = config.receivers();
    let rx_positions: Vec<Position3> =
        receivers.iter().map(|r| r.static_position().unwrap()).collect();

    let params = &config.radar;
    let k = params.average_k;

    // Averaging and cancellation are pure per receiver; fan out.
    let cancelled: Vec<Vec<CirSnapshot>> = capture
        .cirs
        .par_iter()
        .map(|series| {
            let averaged = average_snapshots(series, k)?;
            delay_line_canceler_order(&averaged, params.canceler_order)
        })
        .collect::<Result<_>>()?;

    let n_blocks = cancelled.iter().map(|c| c.len()).min().unwrap_or(0);
    if n_blocks == 0 {
        return Err(Error::InvalidArgument(
            "run_radar_pipeline: capture too short for averaging and cancellation".into(),
        ));
    }
    let block_dt = k as f64 * capture.snapshot_times.get(1).map_or(1e-3, |t1| t1 - capture.snapshot_times[0]);

    let mut detections_per_rx_block: Vec<Vec<Vec<DelayDetection>>> = Vec::new();
    for (rx_idx, series) in cancelled.iter().enumerate() {
        let rx_id = &capture.rx_ids[rx_idx];
        let dets: Vec<Vec<DelayDetection>> = series
            .par_iter()
            .map(|cir| ml_delay_estimate(cir, params.max_targets, params.detection_threshold_db, rx_id))
            .collect();
        detections_per_rx_block.push(dets);
    }

    // Sequential per-receiver tracking.
    let mut trackers: Vec<Tracker> =
        receivers.iter().map(|_| Tracker::new(TrackerParams::default())).collect();
    let mut confirmed_per_block: Vec<Vec<Option<ConfirmedDelay>>> = vec![Vec::new(); n_blocks];
    for (rx_idx, tracker) in trackers.iter_mut().enumerate() {
        for block in 0..n_blocks {
            let confirmed = tracker.step(&detections_per_rx_block[rx_idx][block], block_dt)?;
            // Single-UAV setup: the strongest confirmed track is the target.
            let best = confirmed
                .into_iter()
                .max_by(|a, b| a.amplitude.partial_cmp(&b.amplitude).unwrap());
            confirmed_per_block[block].push(best);
        }
    }

    // Fusion.
    let min_rx = if config.solver.altitude_constraint_m.is_some() { 2 } else { 3 };
    let opts = SolveOptions::default();
    let mut fixes = Vec::new();
    let mut previous: Option<Position3> = None;
    let mut all_detections = Vec::new();
    for dets in detections_per_rx_block.iter() {
        for block in dets {
            all_detections.extend(block.iter().cloned());
        }
    }

    for block in 0..n_blocks {
        let t = cancelled[0][block].timestamp_s;
        let mut rx_delays = Vec::new();
        for (rx_idx, maybe) in confirmed_per_block[block].iter().enumerate() {
            if let Some(conf) = maybe {
                let mut delay = conf.delay_s;
                if let Some(corr) = sync {
                    delay -= corr.correction_at(rx_idx, t);
                }
                rx_delays.push((rx_positions[rx_idx], delay));
            }
        }
        if rx_delays.len() < min_rx {
            continue;
        }
        let seed = match previous {
            Some(p) => p,
            None => coarse_grid_seed(config, tx, &rx_delays),
        };
        let fix = match localize_bistatic(
            tx,
            &rx_delays,
            seed,
            config.solver.altitude_constraint_m,
            t,
            &opts,
        ) {
            Ok(f) => f,
            Err(Error::Solver(_)) => continue,
            Err(e) => return Err(e),
        };
        previous = Some(fix.position);
        let true_position = config.trajectory.sample(t)?;
        let de = fix.position.east - true_position.east;
        let dn = fix.position.north - true_position.north;
        fixes.push(RadarFix {
            horizontal_error_m: (de * de + dn * dn).sqrt(),
            error_up_m: fix.position.up - true_position.up,
            n_receivers: rx_delays.len(),
            fix,
            true_position,
        });
    }

    Ok(RadarPipelineOutput {
        detection_fraction: fixes.len() as f64 / n_blocks as f64,
        n_blocks,
        fixes,
        detections: all_detections,
    })
}

/// Coarse-grid seed over the surveillance volume (the trajectory bounding
/// box inflated by half its extent).
fn coarse_grid_seed(
    config: &ScenarioConfig,
    tx: Position3,
    rx_delays: &[(Position3, f64)],
) -> Position3 {
    let mut e = (f64::INFINITY, f64::NEG_INFINITY);
    let mut n = (f64::INFINITY, f64::NEG_INFINITY);
    let mut u = (f64::INFINITY, f64::NEG_INFINITY);
    for w in &config.trajectory.waypoints {
        e = (e.0.min(w.position_m.east), e.1.max(w.position_m.east));
        n = (n.0.min(w.position_m.north), n.1.max(w.position_m.north));
        u = (u.0.min(w.position_m.up), u.1.max(w.position_m.up));
    }
    let inflate = |r: (f64, f64)| {
        let span = (r.1 - r.0).max(20.0);
        (r.0 - span / 2.0, r.1 + span / 2.0)
    };
    let (e, n, u) = (inflate(e), inflate(n), inflate(u));
    let u = match config.solver.altitude_constraint_m {
        Some(alt) => (alt, alt),
        None => u,
    };
    let step = ((e.1 - e.0).max(n.1 - n.0) / 30.0).max(2.0);
    lsq::grid_min(e, n, u, step, |p| {
        rx_delays
            .iter()
            .map(|(rx, tau)| {
                let r = bistatic_delay(tx, p, *rx) - tau;
                r * r
            })
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn flat_cir(taps: Vec<Complex64>, t: f64) -> CirSnapshot {
        CirSnapshot { taps, delay_resolution_s: 1.0 / 32e6, timestamp_s: t }
    }

    fn path_cir(n: usize, paths: &[(f64, Complex64)], t: f64) -> CirSnapshot {
        let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
        for &(delay_bins, gain) in paths {
            for (k, s) in spectrum.iter_mut().enumerate() {
                let phase = -2.0 * PI * spectral::signed_freq(k, n) * delay_bins / n as f64;
                *s += gain * Complex64::from_polar(1.0, phase);
            }
        }
        flat_cir(spectral::idft(&spectrum), t)
    }

    #[test]
    fn average_k1_is_identity() {
        let cirs: Vec<CirSnapshot> = (0..4)
            .map(|i| path_cir(64, &[(5.0, Complex64::new(i as f64 + 1.0, 0.0))], i as f64))
            .collect();
        let out = average_snapshots(&cirs, 1).unwrap();
        assert_eq!(out.len(), 4);
        for (a, b) in out.iter().zip(&cirs) {
            assert_eq!(a.taps, b.taps);
        }
    }

    #[test]
    fn average_20_identical_snapshots_unchanged() {
        let cir = path_cir(64, &[(5.0, Complex64::new(1.0, -0.5))], 0.0);
        let cirs: Vec<CirSnapshot> = (0..40)
            .map(|i| CirSnapshot { timestamp_s: i as f64, ..cir.clone() })
            .collect();
        let out = average_snapshots(&cirs, 20).unwrap();
        assert_eq!(out.len(), 2);
        for (a, b) in out[0].taps.iter().zip(&cir.taps) {
            assert!((a - b).norm() < 1e-12);
        }
        // Block-center timestamp of the first block of 20: mean of 0..19.
        assert_abs_diff_eq!(out[0].timestamp_s, 9.5, epsilon = 1e-12);
    }

    #[test]
    fn average_noise_power_reduced_by_k() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let n = 256;
        let k = 20;
        let blocks = 60;
        let cirs: Vec<CirSnapshot> = (0..k * blocks)
            .map(|i| {
                let taps: Vec<Complex64> = (0..n)
                    .map(|_| {
                        Complex64::new(
                            rng.sample::<f64, _>(rand_distr::StandardNormal),
                            rng.sample::<f64, _>(rand_distr::StandardNormal),
                        )
                    })
                    .collect();
                flat_cir(taps, i as f64)
            })
            .collect();
        let input_power: f64 = cirs
            .iter()
            .flat_map(|c| c.taps.iter())
            .map(|t| t.norm_sqr())
            .sum::<f64>()
            / (k * blocks * n) as f64;
        let out = average_snapshots(&cirs, k).unwrap();
        let output_power: f64 = out
            .iter()
            .flat_map(|c| c.taps.iter())
            .map(|t| t.norm_sqr())
            .sum::<f64>()
            / (blocks * n) as f64;
        let reduction = input_power / output_power;
        assert!(
            (reduction - k as f64).abs() < 0.2 * k as f64,
            "noise power reduction {reduction}, expected ~{k}"
        );
    }

    #[test]
    fn average_empty_rejected() {
        assert!(average_snapshots(&[], 5).is_err());
    }

    #[test]
    fn canceler_nulls_static_series() {
        let cir = path_cir(64, &[(7.0, Complex64::new(0.9, 0.4))], 0.0);
        let cirs: Vec<CirSnapshot> = (0..6)
            .map(|i| CirSnapshot { timestamp_s: i as f64, ..cir.clone() })
            .collect();
        let out = delay_line_canceler(&cirs).unwrap();
        assert_eq!(out.len(), 5);
        for c in out {
            for tap in c.taps {
                assert_eq!(tap, Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn canceler_difference_structure() {
        let a = path_cir(64, &[(10.0, Complex64::new(1.0, 0.0))], 0.0);
        let b = path_cir(64, &[(11.0, Complex64::new(1.0, 0.0))], 1.0);
        let out = delay_line_canceler(&[a, b]).unwrap();
        assert!((out[0].taps[11] - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        assert!((out[0].taps[10] - Complex64::new(-1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn canceler_needs_two_snapshots() {
        let cir = path_cir(16, &[(1.0, Complex64::new(1.0, 0.0))], 0.0);
        assert!(delay_line_canceler(&[cir]).is_err());
    }

    #[test]
    fn canceler_frequency_response() {
        // A tap rotating by omega per snapshot has output/input power ratio
        // 2 - 2 cos(omega); verified at omega in {0, pi/4, pi}.
        let n = 32;
        for &omega in &[0.0, PI / 4.0, PI] {
            let snapshots: Vec<CirSnapshot> = (0..24)
                .map(|i| {
                    let gain = Complex64::from_polar(1.0, omega * i as f64);
                    path_cir(n, &[(4.0, gain)], i as f64)
                })
                .collect();
            let out = delay_line_canceler(&snapshots).unwrap();
            let in_power = 1.0;
            let out_power: f64 = out.iter().map(|c| c.taps[4].norm_sqr()).sum::<f64>()
                / out.len() as f64;
            let expected = 2.0 - 2.0 * omega.cos();
            assert_abs_diff_eq!(out_power / in_power, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn average_then_cancel_annihilates_constant_input() {
        let cir = path_cir(64, &[(3.0, Complex64::new(0.2, 0.8))], 0.0);
        let cirs: Vec<CirSnapshot> = (0..40)
            .map(|i| CirSnapshot { timestamp_s: i as f64, ..cir.clone() })
            .collect();
        let averaged = average_snapshots(&cirs, 4).unwrap();
        let out = delay_line_canceler(&averaged).unwrap();
        for c in out {
            assert!(c.taps.iter().all(|t| t.norm() < 1e-14));
        }
    }

    #[test]
    fn ml_exact_on_bin_path() {
        let cir = path_cir(512, &[(100.0, Complex64::new(1.0, 0.0))], 0.0);
        let dets = ml_delay_estimate(&cir, 3, 10.0, "rx01");
        assert_eq!(dets.len(), 1);
        let bins = dets[0].delay_s / cir.delay_resolution_s;
        assert_abs_diff_eq!(bins, 100.0, epsilon = 1e-7);
        assert_abs_diff_eq!(dets[0].amplitude, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn ml_fractional_offsets_within_two_hundredths_bin() {
        // Sweep of fractional offsets; the refinement must stay within
        // 0.02 bins everywhere (plain parabolic fitting on the Dirichlet
        // kernel is off by up to ~0.28 bins).
        let n = 512;
        for i in 0..20 {
            let frac = i as f64 / 20.0;
            let true_delay = 80.0 + frac;
            let cir = path_cir(n, &[(true_delay, Complex64::new(1.0, 0.0))], 0.0);
            let dets = ml_delay_estimate(&cir, 1, 10.0, "rx01");
            assert_eq!(dets.len(), 1, "offset {frac}: no detection");
            let err = (dets[0].delay_s / cir.delay_resolution_s - true_delay).abs();
            assert!(err <= 0.02, "offset {frac}: delay error {err} bins");
        }
    }

    #[test]
    fn ml_two_paths_with_level_difference() {
        // Two paths 3 bins apart, 6 dB level difference, SNR 30 dB: both
        // recovered within 0.1 bins by successive cancellation.
        use rand::{Rng, SeedableRng};
        let n = 512;
        let strong = Complex64::new(1.0, 0.0);
        let weak = Complex64::from_polar(0.501, 1.0); // -6.0 dB
        let mut cir = path_cir(n, &[(200.0, strong), (203.4, weak)], 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        // SNR 30 dB relative to the strong path, spread over n bins.
        let sigma = (1.0 / (2.0 * n as f64 * 1e3)).sqrt();
        for t in &mut cir.taps {
            *t += Complex64::new(
                sigma * rng.sample::<f64, _>(rand_distr::StandardNormal),
                sigma * rng.sample::<f64, _>(rand_distr::StandardNormal),
            );
        }
        let dets = ml_delay_estimate(&cir, 2, 10.0, "rx01");
        assert_eq!(dets.len(), 2);
        let mut bins: Vec<f64> = dets.iter().map(|d| d.delay_s / cir.delay_resolution_s).collect();
        bins.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((bins[0] - 200.0).abs() <= 0.1, "strong path error {}", bins[0] - 200.0);
        assert!((bins[1] - 203.4).abs() <= 0.1, "weak path error {}", bins[1] - 203.4);
    }

    #[test]
    fn ml_shift_equivariance() {
        let n = 256;
        let base_dets = ml_delay_estimate(
            &path_cir(n, &[(40.3, Complex64::new(1.0, 0.2))], 0.0),
            1,
            10.0,
            "rx01",
        );
        let shifted_dets = ml_delay_estimate(
            &path_cir(n, &[(40.3 + 17.0, Complex64::new(1.0, 0.2))], 0.0),
            1,
            10.0,
            "rx01",
        );
        let dres = 1.0 / 32e6;
        assert_abs_diff_eq!(
            shifted_dets[0].delay_s - base_dets[0].delay_s,
            17.0 * dres,
            epsilon = 1e-6 * dres
        );
    }

    #[test]
    fn ml_empty_when_below_threshold() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let taps: Vec<Complex64> = (0..128)
            .map(|_| {
                Complex64::new(
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                )
            })
            .collect();
        let cir = flat_cir(taps, 0.0);
        let dets = ml_delay_estimate(&cir, 5, 30.0, "rx01");
        assert!(dets.is_empty(), "pure noise should stay below a 30 dB threshold");
    }

    #[test]
    fn localize_exact_delays_three_rx() {
        let tx = Position3::new(0.0, 0.0, 12.0);
        let rxs = [
            Position3::new(6.0, 0.0, 12.0),
            Position3::new(-5.0, 3.0, 12.0),
            Position3::new(1.0, 7.0, 11.0),
        ];
        let target = Position3::new(130.0, 40.0, 35.0);
        let delays: Vec<(Position3, f64)> =
            rxs.iter().map(|rx| (*rx, bistatic_delay(tx, target, *rx))).collect();
        let fix = localize_bistatic(
            tx,
            &delays,
            Position3::new(100.0, 0.0, 30.0),
            None,
            0.0,
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(fix.converged);
        assert!(
            fix.position.distance_to(&target) < 1e-3,
            "error {} m",
            fix.position.distance_to(&target)
        );
    }

    #[test]
    fn localize_two_rx_with_altitude_constraint() {
        let tx = Position3::new(0.0, 0.0, 12.0);
        let rxs = [Position3::new(6.0, 0.0, 12.0), Position3::new(-5.0, 3.0, 12.0)];
        let target = Position3::new(130.0, 40.0, 35.0);
        let delays: Vec<(Position3, f64)> =
            rxs.iter().map(|rx| (*rx, bistatic_delay(tx, target, *rx))).collect();
        let fix = localize_bistatic(
            tx,
            &delays,
            Position3::new(100.0, 20.0, 35.0),
            Some(35.0),
            0.0,
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(fix.position.distance_to(&target) < 1e-3);
    }

    #[test]
    fn localize_rejects_too_few_receivers() {
        let tx = Position3::new(0.0, 0.0, 0.0);
        let delays = [(Position3::new(5.0, 0.0, 0.0), 1e-6)];
        assert!(localize_bistatic(
            tx,
            &delays,
            Position3::new(0.0, 0.0, 0.0),
            None,
            0.0,
            &SolveOptions::default()
        )
        .is_err());
    }

    #[test]
    fn localize_objective_non_increasing() {
        let tx = Position3::new(0.0, 0.0, 12.0);
        let rxs = [
            Position3::new(6.0, 0.0, 12.0),
            Position3::new(-5.0, 3.0, 12.0),
            Position3::new(1.0, 7.0, 11.0),
        ];
        let target = Position3::new(130.0, 40.0, 35.0);
        // Perturbed delays so the minimum is nonzero.
        let delays: Vec<(Position3, f64)> = rxs
            .iter()
            .enumerate()
            .map(|(i, rx)| {
                (*rx, bistatic_delay(tx, target, *rx) + (i as f64 - 1.0) * 0.5e-9)
            })
            .collect();
        let rx_delays = delays.clone();
        let outcome = lsq::solve_position(
            Position3::new(50.0, -60.0, 10.0),
            None,
            move |p: Position3| {
                rx_delays
                    .iter()
                    .map(|(rx, tau)| {
                        let d_tx = p.distance_to(&tx).max(1e-9);
                        let d_rx = p.distance_to(rx).max(1e-9);
                        ResidualRow {
                            value: (d_tx + d_rx) / SPEED_OF_LIGHT - tau,
                            gradient: [
                                ((p.east - tx.east) / d_tx + (p.east - rx.east) / d_rx)
                                    / SPEED_OF_LIGHT,
                                ((p.north - tx.north) / d_tx + (p.north - rx.north) / d_rx)
                                    / SPEED_OF_LIGHT,
                                ((p.up - tx.up) / d_tx + (p.up - rx.up) / d_rx) / SPEED_OF_LIGHT,
                            ],
                        }
                    })
                    .collect()
            },
            &SolveOptions::default(),
        )
        .unwrap();
        for pair in outcome.cost_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-30);
        }
    }

    #[test]
    fn localize_noisy_matches_grid_oracle() {
        // Rooftop-like geometry: 3 rx within 20 m, target at ~150 m, 1 ns
        // delay noise, flight altitude known. The LS fix must land in the
        // 0.1 m grid oracle's best cell (within one cell). The altitude
        // constraint mirrors the known-altitude demonstration flights; a
        // fully free vertical axis is unobservable from a 20 m receiver
        // cluster at this range.
        let tx = Position3::new(0.0, 0.0, 12.0);
        let rxs = [
            Position3::new(8.0, 2.0, 12.0),
            Position3::new(-7.0, 4.0, 13.5),
            Position3::new(2.0, -9.0, 11.0),
        ];
        let target = Position3::new(120.0, 80.0, 35.0);
        let noise = [0.9e-9, -1.2e-9, 0.4e-9];
        let delays: Vec<(Position3, f64)> = rxs
            .iter()
            .zip(noise)
            .map(|(rx, n)| (*rx, bistatic_delay(tx, target, *rx) + n))
            .collect();
        let fix = localize_bistatic(
            tx,
            &delays,
            Position3::new(100.0, 60.0, 35.0),
            Some(35.0),
            0.0,
            &SolveOptions::default(),
        )
        .unwrap();

        // Independent brute-force oracle: 0.1 m grid over a box around the
        // true position, exhaustive minimization of the same objective.
        let step = 0.1;
        let mut best = Position3::new(0.0, 0.0, 0.0);
        let mut best_cost = f64::INFINITY;
        let half = 10.0;
        let counts = (2.0 * half / step) as usize + 1;
        for i in 0..counts {
            for j in 0..counts {
                let p = Position3::new(
                    target.east - half + i as f64 * step,
                    target.north - half + j as f64 * step,
                    35.0,
                );
                let cost: f64 = delays
                    .iter()
                    .map(|(rx, tau)| {
                        let r = bistatic_delay(tx, p, *rx) - tau;
                        r * r
                    })
                    .sum();
                if cost < best_cost {
                    best_cost = cost;
                    best = p;
                }
            }
        }
        assert!(
            (fix.position.east - best.east).abs() <= step + 1e-9
                && (fix.position.north - best.north).abs() <= step + 1e-9,
            "fix {:?} not within one 0.1 m cell of oracle {:?}",
            fix.position,
            best
        );
    }

    #[test]
    fn clutter_suppression_ratio() {
        // Static clutter 40 dB above the target; after the canceler the
        // clutter residue (isolated by linearity) sits >= 60 dB below the
        // post-canceler target response.
        let n = 256;
        let clutter_gain = Complex64::new(100.0, 0.0); // +40 dB over unit target
        let make_series = |with_clutter: bool| -> Vec<CirSnapshot> {
            (0..12)
                .map(|i| {
                    let target_delay = 60.0 + 0.6 * i as f64;
                    let target_gain = Complex64::from_polar(1.0, 2.1 * i as f64);
                    let mut paths = vec![(target_delay, target_gain)];
                    if with_clutter {
                        paths.push((30.0, clutter_gain));
                    }
                    path_cir(n, &paths, i as f64)
                })
                .collect()
        };
        let with = delay_line_canceler(&make_series(true)).unwrap();
        let without = delay_line_canceler(&make_series(false)).unwrap();
        let mut clutter_residue = 0.0f64;
        let mut target_peak = 0.0f64;
        for (a, b) in with.iter().zip(&without) {
            for (ta, tb) in a.taps.iter().zip(&b.taps) {
                clutter_residue = clutter_residue.max((ta - tb).norm_sqr());
            }
            target_peak = target_peak.max(b.taps.iter().map(|t| t.norm_sqr()).fold(0.0, f64::max));
        }
        let suppression_db = 10.0 * (target_peak / clutter_residue.max(1e-300)).log10();
        assert!(
            suppression_db >= 60.0,
            "clutter residue only {suppression_db:.1} dB below target response"
        );
    }
}
