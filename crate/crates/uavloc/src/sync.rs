//! Beacon-based synchronization calibration and GNSS time-error
//! post-processing: constant-offset estimation against known geometry,
//! pairwise TDoA extraction (which cancels the beacon's own clock), and the
//! rectangular low-pass filter that turns the raw GNSS time error into a
//! usable drift correction.

use crate::error::{Error, Result};
use crate::scene::{los_delay, Position3};

/// Uniformly sampled time series of seconds-valued errors (or delays).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeErrorSeries {
    pub t0_s: f64,
    pub dt_s: f64,
    pub values: Vec<f64>,
}

impl TimeErrorSeries {
    pub fn new(t0_s: f64, dt_s: f64, values: Vec<f64>) -> Self {
        Self { t0_s, dt_s, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_at(&self, i: usize) -> f64 {
        self.t0_s + i as f64 * self.dt_s
    }

    pub fn end_time(&self) -> f64 {
        self.time_at(self.len().saturating_sub(1))
    }

    /// Linear interpolation at `t`, clamped to the series endpoints.
    pub fn interp(&self, t: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let x = (t - self.t0_s) / self.dt_s;
        if x <= 0.0 {
            return self.values[0];
        }
        let last = self.values.len() - 1;
        if x >= last as f64 {
            return self.values[last];
        }
        let i = x.floor() as usize;
        let frac = x - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn variance(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let m = self.mean();
        self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.values.len() as f64
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    fn aligned_with(&self, other: &Self) -> bool {
        self.len() == other.len()
            && (self.t0_s - other.t0_s).abs() < 1e-12
            && (self.dt_s - other.dt_s).abs() < 1e-15
    }

    /// Write as two-column CSV `t_seconds,error_seconds`.
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t_seconds,error_seconds")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.time_at(i), v)?;
        }
        Ok(())
    }

    /// Parse the two-column CSV form; the sampling must be uniform.
    pub fn from_csv<R: std::io::BufRead>(r: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("t_seconds")) {
                continue;
            }
            let mut parts = line.split(',');
            let t: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse(format!("line {}: bad time field", lineno + 1)))?;
            let v: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse(format!("line {}: bad error field", lineno + 1)))?;
            times.push(t);
            values.push(v);
        }
        if values.is_empty() {
            return Err(Error::Parse("empty time-error series".into()));
        }
        let t0 = times[0];
        let dt = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
        for (i, &t) in times.iter().enumerate() {
            if (t - (t0 + i as f64 * dt)).abs() > 1e-9 {
                return Err(Error::Parse(format!("non-uniform sampling at row {}", i + 1)));
            }
        }
        Ok(Self::new(t0, dt, values))
    }
}

/// Per-receiver constant synchronization offset estimated from beacon
/// measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetEstimate {
    pub receiver: String,
    pub constant_offset_s: f64,
    pub residual_std_s: f64,
}

/// Complete per-receiver synchronization correction: the beacon-calibrated
/// constant offset plus the filtered GNSS drift estimate. Receivers are
/// indexed in roster order.
#[derive(Debug, Clone)]
pub struct SyncCorrections {
    pub offsets: Vec<OffsetEstimate>,
    pub filtered_gnss: Vec<TimeErrorSeries>,
}

impl SyncCorrections {
    /// Delay correction to subtract from a measurement of receiver
    /// `rx_idx` taken at time `t`.
    pub fn correction_at(&self, rx_idx: usize, t: f64) -> f64 {
        self.offsets[rx_idx].constant_offset_s + self.filtered_gnss[rx_idx].interp(t)
    }

    /// Offset-only corrections (no drift term).
    pub fn from_offsets(offsets: Vec<OffsetEstimate>) -> Self {
        let filtered_gnss =
            offsets.iter().map(|_| TimeErrorSeries::new(0.0, 1.0, vec![0.0])).collect();
        Self { offsets, filtered_gnss }
    }
}

/// Estimate per-receiver constant offsets from beacon delay measurements at
/// an exactly known position: `offset = mean(measured - geometric)` and the
/// standard deviation of the same difference series.
pub fn beacon_calibrate(
    beacon_position: Position3,
    rx_nodes: &[(String, Position3)],
    measured_delays: &[TimeErrorSeries],
) -> Result<Vec<OffsetEstimate>> {
    if rx_nodes.len() != measured_delays.len() {
        return Err(Error::InvalidArgument(
            "beacon_calibrate: one delay series per receiver required".into(),
        ));
    }
    rx_nodes
        .iter()
        .zip(measured_delays)
        .map(|((id, pos), series)| {
            if series.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "beacon_calibrate: empty delay series for receiver '{id}'"
                )));
            }
            let geometric = los_delay(beacon_position, *pos);
            let diffs: Vec<f64> = series.values.iter().map(|d| d - geometric).collect();
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / diffs.len() as f64;
            Ok(OffsetEstimate {
                receiver: id.clone(),
                constant_offset_s: mean,
                residual_std_s: var.sqrt(),
            })
        })
        .collect()
}

/// Pairwise TDoA error series between two receivers:
/// `(d_i - geo_i) - (d_j - geo_j)` per timestamp. Any error common to both
/// series (in particular the beacon transmitter's own clock drift) cancels.
pub fn pairwise_tdoa(
    delays_i: &TimeErrorSeries,
    delays_j: &TimeErrorSeries,
    geometric_i: f64,
    geometric_j: f64,
) -> Result<TimeErrorSeries> {
    if !delays_i.aligned_with(delays_j) {
        return Err(Error::InvalidArgument("pairwise_tdoa: timestamp mismatch".into()));
    }
    let values = delays_i
        .values
        .iter()
        .zip(&delays_j.values)
        .map(|(a, b)| (a - geometric_i) - (b - geometric_j))
        .collect();
    Ok(TimeErrorSeries::new(delays_i.t0_s, delays_i.dt_s, values))
}

/// Centered moving average with a rectangular impulse response. Edges use a
/// shrinking symmetric window, so the output length equals the input length
/// and the DC gain is exactly one everywhere. The window is rounded to an
/// odd sample count.
pub fn rect_lowpass(series: &TimeErrorSeries, window_length_s: f64) -> Result<TimeErrorSeries> {
    if window_length_s < series.dt_s {
        return Err(Error::InvalidArgument(
            "rect_lowpass: window shorter than one sample".into(),
        ));
    }
    let w = ((window_length_s / series.dt_s).round() as usize).max(1);
    let half = (w - 1) / 2;
    let n = series.len();
    let values = (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let slice = &series.values[i - h..=i + h];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect();
    Ok(TimeErrorSeries::new(series.t0_s, series.dt_s, values))
}

/// Apply the full synchronization correction to measured delay series:
/// `corrected = measured - constant_offset - filtered_gnss(t)`, with the
/// filtered GNSS error interpolated at each measurement time.
pub fn compensate(
    delays: &[TimeErrorSeries],
    offsets: &[OffsetEstimate],
    filtered_gnss: &[TimeErrorSeries],
) -> Result<Vec<TimeErrorSeries>> {
    if delays.len() != offsets.len() || delays.len() != filtered_gnss.len() {
        return Err(Error::InvalidArgument(
            "compensate: per-receiver series, offsets, and gnss corrections must align".into(),
        ));
    }
    delays
        .iter()
        .zip(offsets)
        .zip(filtered_gnss)
        .map(|((series, offset), gnss)| {
            if !gnss.is_empty()
                && (series.end_time() < gnss.t0_s || gnss.end_time() < series.t0_s)
            {
                return Err(Error::InvalidArgument(format!(
                    "compensate: no time overlap between delays and gnss series for '{}'",
                    offset.receiver
                )));
            }
            let values = series
                .values
                .iter()
                .enumerate()
                .map(|(i, d)| d - offset.constant_offset_s - gnss.interp(series.time_at(i)))
                .collect();
            Ok(TimeErrorSeries::new(series.t0_s, series.dt_s, values))
        })
        .collect()
}
