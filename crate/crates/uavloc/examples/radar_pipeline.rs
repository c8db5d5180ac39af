//! Run the full radar chain on the rooftop scenario: coherent capture,
//! snapshot averaging, delay-line clutter cancellation, ML delay
//! estimation, Kalman/Hungarian tracking, and bistatic least-squares
//! fusion.
//!
//! ```bash
//! cargo run --release --example radar_pipeline
//! ```

use uavloc::airsim::simulate_radar_capture;
use uavloc::harness::quantile;
use uavloc::radar::run_radar_pipeline;
use uavloc::scenarios::rooftop_radar;

fn main() {
    let mut config = rooftop_radar();
    // Trim the flight to keep the example quick; the full arc is used by
    // the acceptance suite.
    config.capture.n_snapshots = 3600;

    let capture = config.capture.clone();
    println!(
        "simulating {} snapshots at {} receivers...",
        capture.n_snapshots,
        config.receivers().len()
    );
    let result = simulate_radar_capture(&config, &capture, None, 7).unwrap();
    let out = run_radar_pipeline(&result, &config, None).unwrap();

    println!(
        "{} fix opportunities, {} fixes, detection fraction {:.3}",
        out.n_blocks,
        out.fixes.len(),
        out.detection_fraction
    );
    let errors: Vec<f64> = out.fixes.iter().map(|f| f.horizontal_error_m).collect();
    if !errors.is_empty() {
        println!(
            "horizontal error: median {:.2} m, p90 {:.2} m",
            quantile(&errors, 0.5),
            quantile(&errors, 0.9)
        );
    }
    for fix in out.fixes.iter().step_by(60) {
        println!(
            "  t = {:5.2} s: fix ({:7.1}, {:7.1}, {:5.1}) m, truth ({:7.1}, {:7.1}, {:5.1}) m, \
             {} rx, residual {:.2} ns",
            fix.fix.timestamp_s,
            fix.fix.position.east,
            fix.fix.position.north,
            fix.fix.position.up,
            fix.true_position.east,
            fix.true_position.north,
            fix.true_position.up,
            fix.n_receivers,
            fix.fix.residual_norm_s * 1e9
        );
    }
}
