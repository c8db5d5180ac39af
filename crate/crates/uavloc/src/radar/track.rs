//! Multi-target delay tracking: constant-velocity Kalman filters in the
//! delay domain, gated Hungarian association, m-of-n confirmation, and
//! miss-based deletion. One tracker instance runs per receiver.

use super::assign::{hungarian, FORBIDDEN};
use super::DelayDetection;
use crate::error::{Error, Result};
use std::collections::VecDeque;

/// Tracker configuration. The gate is a chi-squared bound (2 dof, 99%) on
/// the squared Mahalanobis distance between a detection and the predicted
/// track delay.
#[derive(Debug, Clone)]
pub struct TrackerParams {
    /// White delay-acceleration power spectral density of the CV model.
    pub process_noise: f64,
    /// Delay measurement standard deviation.
    pub measurement_noise_s: f64,
    /// Association gate on squared Mahalanobis distance.
    pub gate: f64,
    /// Confirm after `confirm_hits` hits within `confirm_window` updates.
    pub confirm_hits: usize,
    pub confirm_window: usize,
    /// Drop a track after this many consecutive misses.
    pub max_misses: usize,
    /// Initial delay-rate standard deviation for new tracks.
    pub initial_rate_std: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            process_noise: 1e-15,
            measurement_noise_s: 0.3e-9,
            gate: 9.21,
            confirm_hits: 2,
            confirm_window: 3,
            max_misses: 5,
            initial_rate_std: 2e-7,
        }
    }
}

/// One delay-domain track.
#[derive(Debug, Clone)]
pub struct DelayTrack {
    pub id: u64,
    /// State `[delay (s), delay rate (s/s)]`.
    pub state: [f64; 2],
    /// 2x2 state covariance, symmetric positive definite.
    pub covariance: [[f64; 2]; 2],
    /// Snapshots since birth.
    pub age: usize,
    /// Consecutive misses.
    pub misses: usize,
    pub confirmed: bool,
    pub last_amplitude: f64,
    hit_history: VecDeque<bool>,
}

impl DelayTrack {
    fn new(id: u64, detection: &DelayDetection, params: &TrackerParams) -> Self {
        let r = params.measurement_noise_s * params.measurement_noise_s;
        let mut hit_history = VecDeque::with_capacity(params.confirm_window);
        hit_history.push_back(true);
        Self {
            id,
            state: [detection.delay_s, 0.0],
            covariance: [[r, 0.0], [0.0, params.initial_rate_std * params.initial_rate_std]],
            age: 1,
            misses: 0,
            confirmed: false,
            last_amplitude: detection.amplitude,
            hit_history,
        }
    }

    pub fn covariance_trace(&self) -> f64 {
        self.covariance[0][0] + self.covariance[1][1]
    }

    fn predict(&mut self, dt: f64, q: f64) {
        let [tau, rate] = self.state;
        self.state = [tau + rate * dt, rate];
        let p = &self.covariance;
        // P = F P F' + Q for F = [[1, dt], [0, 1]].
        let p00 = p[0][0] + dt * (p[1][0] + p[0][1]) + dt * dt * p[1][1];
        let p01 = p[0][1] + dt * p[1][1];
        let p10 = p[1][0] + dt * p[1][1];
        let p11 = p[1][1];
        let dt2 = dt * dt;
        let dt3 = dt2 * dt;
        self.covariance = [
            [p00 + q * dt3 / 3.0, p01 + q * dt2 / 2.0],
            [p10 + q * dt2 / 2.0, p11 + q * dt],
        ];
    }

    fn innovation(&self, measured_delay: f64, r: f64) -> (f64, f64) {
        (measured_delay - self.state[0], self.covariance[0][0] + r)
    }

    fn update(&mut self, detection: &DelayDetection, r: f64) {
        let (y, s) = self.innovation(detection.delay_s, r);
        let k = [self.covariance[0][0] / s, self.covariance[1][0] / s];
        self.state[0] += k[0] * y;
        self.state[1] += k[1] * y;
        // Joseph form keeps the covariance symmetric positive definite.
        let p = self.covariance;
        let a = [[1.0 - k[0], 0.0], [-k[1], 1.0]];
        let mut ap = [[0.0f64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                ap[i][j] = a[i][0] * p[0][j] + a[i][1] * p[1][j];
            }
        }
        let mut apa = [[0.0f64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                apa[i][j] = ap[i][0] * a[j][0] + ap[i][1] * a[j][1];
            }
        }
        self.covariance = [
            [apa[0][0] + k[0] * r * k[0], apa[0][1] + k[0] * r * k[1]],
            [apa[1][0] + k[1] * r * k[0], apa[1][1] + k[1] * r * k[1]],
        ];
        self.last_amplitude = detection.amplitude;
    }

    fn record_outcome(&mut self, hit: bool, window: usize, confirm_hits: usize) {
        self.hit_history.push_back(hit);
        while self.hit_history.len() > window {
            self.hit_history.pop_front();
        }
        if !self.confirmed {
            let hits = self.hit_history.iter().filter(|&&h| h).count();
            if hits >= confirm_hits {
                self.confirmed = true;
            }
        }
    }
}

/// A confirmed target delay emitted by one tracker step.
#[derive(Debug, Clone)]
pub struct ConfirmedDelay {
    pub track_id: u64,
    pub delay_s: f64,
    pub amplitude: f64,
}

/// Per-receiver multi-target tracker. Sequential state machine; run one
/// instance per receiver, never shared across workers.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub params: TrackerParams,
    pub tracks: Vec<DelayTrack>,
    next_id: u64,
}

impl Tracker {
    pub fn new(params: TrackerParams) -> Self {
        Self { params, tracks: Vec::new(), next_id: 1 }
    }

    /// One predict/associate/update cycle. Returns the confirmed tracks
    /// that were updated with a detection this step.
    pub fn step(&mut self, detections: &[DelayDetection], dt: f64) -> Result<Vec<ConfirmedDelay>> {
        if dt.is_nan() || dt <= 0.0 {
            return Err(Error::InvalidArgument("track_step: dt must be > 0".into()));
        }
        let params = self.params.clone();
        let r = params.measurement_noise_s * params.measurement_noise_s;

        for track in &mut self.tracks {
            track.predict(dt, params.process_noise);
            track.age += 1;
        }

        let nt = self.tracks.len();
        let nd = detections.len();
        let mut assigned_detection = vec![usize::MAX; nt];
        let mut detection_taken = vec![false; nd];

        if nt > 0 && nd > 0 {
            // Padded square cost matrix: real pairings top-left, per-track
            // and per-detection dummy slots at the gate cost so rejecting an
            // out-of-gate pairing is always optimal.
            let n = nt + nd;
            let mut cost = vec![vec![FORBIDDEN; n]; n];
            for (i, track) in self.tracks.iter().enumerate() {
                for (j, det) in detections.iter().enumerate() {
                    let (y, s) = track.innovation(det.delay_s, r);
                    let mahal = y * y / s;
                    if mahal <= params.gate {
                        cost[i][j] = mahal;
                    }
                }
                cost[i][nd + i] = params.gate;
            }
            for (j, _) in detections.iter().enumerate() {
                cost[nt + j][j] = params.gate;
            }
            for row in cost.iter_mut().skip(nt) {
                for cell in row.iter_mut().skip(nd) {
                    *cell = 0.0;
                }
            }
            let assignment = hungarian(&cost);
            for (i, &j) in assignment.iter().enumerate().take(nt) {
                if j < nd && cost[i][j] < FORBIDDEN {
                    assigned_detection[i] = j;
                    detection_taken[j] = true;
                }
            }
        }

        let mut confirmed = Vec::new();
        for (i, track) in self.tracks.iter_mut().enumerate() {
            match assigned_detection[i] {
                usize::MAX => {
                    track.misses += 1;
                    track.record_outcome(false, params.confirm_window, params.confirm_hits);
                }
                j => {
                    track.update(&detections[j], r);
                    track.misses = 0;
                    track.record_outcome(true, params.confirm_window, params.confirm_hits);
                    if track.confirmed {
                        confirmed.push(ConfirmedDelay {
                            track_id: track.id,
                            delay_s: track.state[0],
                            amplitude: track.last_amplitude,
                        });
                    }
                }
            }
        }
        let max_misses = params.max_misses;
        self.tracks.retain(|t| t.misses < max_misses);

        for (j, det) in detections.iter().enumerate() {
            if !detection_taken[j] {
                self.tracks.push(DelayTrack::new(self.next_id, det, &params));
                self.next_id += 1;
            }
        }

        Ok(confirmed)
    }
}
