//! Emitter localization chain: pairwise cross-correlation TDoA extraction
//! and hyperbolic least-squares position estimation.

use crate::airsim::CaptureResult;
use crate::error::{Error, Result};
use crate::lsq::{self, ResidualRow, SolveOptions};
use crate::radar::PositionFix;
use crate::scene::{Mode, Position3, ScenarioConfig, SPEED_OF_LIGHT};
use crate::spectral;
use crate::sync::SyncCorrections;
use num_complex::Complex64;
use rayon::prelude::*;

/// One pairwise TDoA measurement. The pair is ordered by roster index and
/// `tdoa_s` is the arrival time at `rx_i` minus the arrival time at `rx_j`.
#[derive(Debug, Clone)]
pub struct TdoaMeasurement {
    pub rx_i: String,
    pub rx_j: String,
    pub tdoa_s: f64,
    /// Correlation peak-to-sidelobe ratio, dB.
    pub peak_quality_db: f64,
    pub timestamp_s: f64,
}

/// Cross-correlation TDoA between two equally long records.
///
/// Circular cross-correlation via the frequency domain; the integer-lag
/// argmax inside the search window is refined with a parabolic seed and a
/// golden-section maximization of the band-limited correlation, giving
/// sub-sample lags. Lags are signed: positive when `sig_i` arrives later.
pub fn xcorr_tdoa(
    rx_i: &str,
    rx_j: &str,
    sig_i: &[Complex64],
    sig_j: &[Complex64],
    sample_rate_hz: f64,
    search_window_s: f64,
    timestamp_s: f64,
) -> Result<TdoaMeasurement> {
    let n = sig_i.len();
    if n == 0 || sig_j.len() != n {
        return Err(Error::InvalidArgument("xcorr_tdoa: records must have equal nonzero length".into()));
    }
    let window_samples = (search_window_s * sample_rate_hz).round() as i64;
    if window_samples < 1 || window_samples as usize > n / 2 {
        return Err(Error::InvalidArgument(format!(
            "xcorr_tdoa: search window of {window_samples} samples exceeds half the record ({n})"
        )));
    }
    let energy_i: f64 = sig_i.iter().map(|s| s.norm_sqr()).sum();
    let energy_j: f64 = sig_j.iter().map(|s| s.norm_sqr()).sum();
    if energy_i == 0.0 || energy_j == 0.0 {
        return Err(Error::InvalidArgument("xcorr_tdoa: all-zero input record".into()));
    }

    // Cross-spectrum; corr(l) = sum_n sig_i[n] * conj(sig_j[n - l]).
    let spec_i = spectral::dft(sig_i);
    let spec_j = spectral::dft(sig_j);
    let cross: Vec<Complex64> =
        spec_i.iter().zip(&spec_j).map(|(a, b)| a * b.conj()).collect();
    let corr = spectral::idft(&cross);

    let mut peak_lag = 0i64;
    let mut peak_power = -1.0;
    for lag in -window_samples..=window_samples {
        let idx = lag.rem_euclid(n as i64) as usize;
        let p = corr[idx].norm_sqr() * (n as f64) * (n as f64);
        if p > peak_power {
            peak_power = p;
            peak_lag = lag;
        }
    }

    // Peak-to-sidelobe ratio over integer lags outside the main lobe.
    let mut sidelobe = 0.0f64;
    for lag in -(n as i64) / 2..(n as i64 + 1) / 2 {
        if (lag - peak_lag).abs() <= 2 {
            continue;
        }
        let idx = lag.rem_euclid(n as i64) as usize;
        sidelobe = sidelobe.max(corr[idx].norm_sqr());
    }
    let peak_idx = peak_lag.rem_euclid(n as i64) as usize;
    let peak_quality_db = if sidelobe > 0.0 {
        10.0 * (corr[peak_idx].norm_sqr() / sidelobe).log10()
    } else {
        f64::INFINITY
    };

    let ym = corr[(peak_lag - 1).rem_euclid(n as i64) as usize].norm_sqr();
    let y0 = corr[peak_idx].norm_sqr();
    let yp = corr[(peak_lag + 1).rem_euclid(n as i64) as usize].norm_sqr();
    let seed = peak_lag as f64 + spectral::parabolic_offset(ym, y0, yp);
    let refined = spectral::golden_peak(&cross, seed - 0.5, seed + 0.5, 60);

    Ok(TdoaMeasurement {
        rx_i: rx_i.to_string(),
        rx_j: rx_j.to_string(),
        tdoa_s: refined / sample_rate_hz,
        peak_quality_db,
        timestamp_s,
    })
}

/// Hyperbolic least-squares position estimation from TDoA measurements.
///
/// The full pairwise set is reduced to the independent set referenced to
/// `reference_rx`; the solver minimizes the sum of squared range-difference
/// residuals by damped Gauss-Newton with analytic Jacobian.
pub fn hyperbolic_ls(
    tdoas: &[TdoaMeasurement],
    rx_positions: &[(String, Position3)],
    reference_rx: &str,
    initial_guess: Position3,
    fixed_altitude: Option<f64>,
    timestamp_s: f64,
    opts: &SolveOptions,
) -> Result<PositionFix> {
    let ref_pos = rx_positions
        .iter()
        .find(|(id, _)| id == reference_rx)
        .map(|(_, p)| *p)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("hyperbolic_ls: unknown reference rx '{reference_rx}'"))
        })?;

    // Reduce to one TDoA per non-reference receiver.
    let mut reduced: Vec<(Position3, f64)> = Vec::new();
    for (id, pos) in rx_positions {
        if id == reference_rx {
            continue;
        }
        let tau = tdoas.iter().find_map(|m| {
            if m.rx_i == *id && m.rx_j == reference_rx {
                Some(m.tdoa_s)
            } else if m.rx_i == reference_rx && m.rx_j == *id {
                Some(-m.tdoa_s)
            } else {
                None
            }
        });
        if let Some(tau) = tau {
            reduced.push((*pos, tau));
        }
    }
    let needed = if fixed_altitude.is_some() { 2 } else { 3 };
    if reduced.len() < needed {
        return Err(Error::InvalidArgument(format!(
            "hyperbolic_ls: need >= {needed} independent TDoAs, got {}",
            reduced.len()
        )));
    }

    let outcome = lsq::solve_position(
        initial_guess,
        fixed_altitude,
        move |p: Position3| {
            let d_ref = p.distance_to(&ref_pos).max(1e-9);
            reduced
                .iter()
                .map(|(rx, tau)| {
                    let d = p.distance_to(rx).max(1e-9);
                    ResidualRow {
                        value: (d - d_ref) / SPEED_OF_LIGHT - tau,
                        gradient: [
                            ((p.east - rx.east) / d - (p.east - ref_pos.east) / d_ref)
                                / SPEED_OF_LIGHT,
                            ((p.north - rx.north) / d - (p.north - ref_pos.north) / d_ref)
                                / SPEED_OF_LIGHT,
                            ((p.up - rx.up) / d - (p.up - ref_pos.up) / d_ref) / SPEED_OF_LIGHT,
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

/// One emitter fix with its ground-truth error.
#[derive(Debug, Clone)]
pub struct EmitterFix {
    pub fix: PositionFix,
    pub true_position: Position3,
    pub horizontal_error_m: f64,
    pub error_up_m: f64,
}

/// Output of the emitter pipeline over a capture.
#[derive(Debug, Clone)]
pub struct EmitterPipelineOutput {
    pub fixes: Vec<EmitterFix>,
    /// All pairwise TDoA measurements, for export.
    pub tdoas: Vec<TdoaMeasurement>,
}

/// Run the emitter chain on a capture: per snapshot, compute all pairwise
/// TDoAs by cross-correlation, apply synchronization corrections, and solve
/// the hyperbolic least-squares problem seeded by the previous fix (the
/// first fix by a coarse grid over the receiver hull).
pub fn run_emitter_pipeline(
    capture: &CaptureResult,
    config: &ScenarioConfig,
    sync: Option<&SyncCorrections>,
) -> Result<EmitterPipelineOutput> {
    if config.mode != Mode::Emitter {
        return Err(Error::InvalidArgument(
            "run_emitter_pipeline: scenario mode is not emitter".into(),
        ));
    }
    if capture.samples.iter().all(|s| s.is_empty()) {
        return Err(Error::InvalidArgument(
            "run_emitter_pipeline: capture holds no raw sample records".into(),
        ));
    }
    let receivers = config.receivers();
    let rx_positions: Vec<(String, Position3)> = receivers
        .iter()
        .map(|r| (r.id.clone(), r.static_position().unwrap()))
        .collect();
    let reference_rx =
        config.emitter.reference_rx.clone().unwrap_or_else(|| rx_positions[0].0.clone());
    let n_rx = rx_positions.len();
    let n_snapshots = capture.snapshot_times.len();
    let record_len = capture.samples[0][0].len() as f64;
    let search_window_s = config
        .emitter
        .search_window_s
        .unwrap_or(record_len / capture.sample_rate_hz / 2.0);

    // TDoA extraction is pure per snapshot; fan out, keep order.
    let per_snapshot: Vec<Vec<TdoaMeasurement>> = (0..n_snapshots)
        .into_par_iter()
        .map(|snap| {
            let t = capture.snapshot_times[snap];
            let mut out = Vec::with_capacity(n_rx * (n_rx - 1) / 2);
            for i in 0..n_rx {
                for j in i + 1..n_rx {
                    let mut m = xcorr_tdoa(
                        &rx_positions[i].0,
                        &rx_positions[j].0,
                        &capture.samples[i][snap],
                        &capture.samples[j][snap],
                        capture.sample_rate_hz,
                        search_window_s,
                        t,
                    )?;
                    if let Some(corr) = sync {
                        m.tdoa_s -= corr.correction_at(i, t) - corr.correction_at(j, t);
                    }
                    out.push(m);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let opts = SolveOptions::default();
    let altitude = config.solver.altitude_constraint_m;
    let mut fixes = Vec::new();
    let mut previous: Option<Position3> = None;
    for (snap, tdoas) in per_snapshot.iter().enumerate() {
        let t = capture.snapshot_times[snap];
        let seed = match previous {
            Some(p) => p,
            None => coarse_grid_seed(&rx_positions, &reference_rx, tdoas, altitude),
        };
        let fix = match hyperbolic_ls(tdoas, &rx_positions, &reference_rx, seed, altitude, t, &opts)
        {
            Ok(f) => f,
            Err(Error::Solver(_)) => continue,
            Err(e) => return Err(e),
        };
        previous = Some(fix.position);
        let true_position = capture.truth.uav_positions[snap];
        let de = fix.position.east - true_position.east;
        let dn = fix.position.north - true_position.north;
        fixes.push(EmitterFix {
            horizontal_error_m: (de * de + dn * dn).sqrt(),
            error_up_m: fix.position.up - true_position.up,
            fix,
            true_position,
        });
    }

    Ok(EmitterPipelineOutput { fixes, tdoas: per_snapshot.into_iter().flatten().collect() })
}

fn coarse_grid_seed(
    rx_positions: &[(String, Position3)],
    reference_rx: &str,
    tdoas: &[TdoaMeasurement],
    altitude: Option<f64>,
) -> Position3 {
    let ref_pos = rx_positions
        .iter()
        .find(|(id, _)| id == reference_rx)
        .map(|(_, p)| *p)
        .unwrap_or(rx_positions[0].1);
    let mut e = (f64::INFINITY, f64::NEG_INFINITY);
    let mut n = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, p) in rx_positions {
        e = (e.0.min(p.east), e.1.max(p.east));
        n = (n.0.min(p.north), n.1.max(p.north));
    }
    let inflate = |r: (f64, f64)| {
        let span = (r.1 - r.0).max(100.0);
        (r.0 - span * 0.2, r.1 + span * 0.2)
    };
    let (e, n) = (inflate(e), inflate(n));
    let u = match altitude {
        Some(alt) => (alt, alt),
        None => (0.0, 120.0),
    };
    let step = ((e.1 - e.0).max(n.1 - n.0) / 60.0).max(1.0);
    let reduced: Vec<(Position3, f64)> = rx_positions
        .iter()
        .filter(|(id, _)| id != reference_rx)
        .filter_map(|(id, p)| {
            tdoas
                .iter()
                .find_map(|m| {
                    if m.rx_i == *id && m.rx_j == reference_rx {
                        Some(m.tdoa_s)
                    } else if m.rx_i == reference_rx && m.rx_j == *id {
                        Some(-m.tdoa_s)
                    } else {
                        None
                    }
                })
                .map(|tau| (*p, tau))
        })
        .collect();
    lsq::grid_min(e, n, u, step, |p| {
        let d_ref = p.distance_to(&ref_pos);
        reduced
            .iter()
            .map(|(rx, tau)| {
                let r = (p.distance_to(rx) - d_ref) / SPEED_OF_LIGHT - tau;
                r * r
            })
            .sum()
    })
}
