//! Sweep the rectangular GNSS filter window and print the post-compensation
//! pairwise TDoA variance per candidate, marking the minimizer. The
//! one-sample window row is the uncompensated baseline.
//!
//! ```bash
//! cargo run --release --example filter_sweep
//! ```

use uavloc::harness::{sweep_filter_window, sweep_table};
use uavloc::scenarios::city_emitter;

fn main() {
    let mut config = city_emitter();
    config.sync.as_mut().unwrap().calibration_duration_s = 3600.0;

    let windows = [1.0, 3.0, 5.0, 7.0, 11.0, 15.0, 21.0, 31.0, 41.0, 61.0, 81.0, 121.0, 161.0, 321.0];
    let rows = sweep_filter_window(&config, &windows, 20260115).unwrap();
    print!("{}", sweep_table(&rows));

    let raw = rows[0].post_variance_s2;
    let best = rows.iter().find(|r| r.is_minimum).unwrap();
    println!(
        "\nbaseline std {:.3} ns -> best window {} s: std {:.3} ns ({:.1}x variance reduction)",
        raw.sqrt() * 1e9,
        best.window_s,
        best.post_variance_s2.sqrt() * 1e9,
        raw / best.post_variance_s2
    );
}
