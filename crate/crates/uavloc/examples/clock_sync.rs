//! Simulate GPSDO-style receiver clocks, calibrate constant offsets with a
//! beacon at a surveyed position, and compensate the drift with the
//! rectangular-filtered GNSS time error.
//!
//! ```bash
//! cargo run --release --example clock_sync
//! ```

use uavloc::airsim::{gen_receiver_clocks, simulate_beacon_delays, BeaconSampling, GmClockParams};
use uavloc::scene::{los_delay, Position3};
use uavloc::sync::{beacon_calibrate, compensate, pairwise_tdoa, rect_lowpass};

fn main() {
    let params = GmClockParams::default();
    let duration = 3600.0; // one hour at the 1 Hz PPS cadence
    let clocks = gen_receiver_clocks(1, &params, 2, duration).unwrap();

    let beacon = Position3::new(600.0, 200.0, 1.5);
    let rx_nodes = vec![
        ("rx01".to_string(), Position3::new(0.0, 0.0, 10.0)),
        ("rx02".to_string(), Position3::new(1250.0, 0.0, 12.0)),
    ];
    let positions: Vec<Position3> = rx_nodes.iter().map(|(_, p)| *p).collect();
    let geo: Vec<f64> = positions.iter().map(|p| los_delay(beacon, *p)).collect();

    let delays = simulate_beacon_delays(
        beacon,
        &positions,
        &clocks,
        BeaconSampling { t0_s: 0.0, interval_s: 1.0, n_samples: 3600 },
        0.0,
        1,
    )
    .unwrap();

    for (i, clock) in clocks.iter().enumerate() {
        println!(
            "rx{:02}: constant offset {:+7.2} ns, drift std {:5.3} ns",
            i + 1,
            clock.constant_offset_s * 1e9,
            clock.drift.std() * 1e9
        );
    }

    let offsets = beacon_calibrate(beacon, &rx_nodes, &delays).unwrap();
    for o in &offsets {
        println!(
            "{}: estimated offset {:+7.2} ns (residual std {:5.3} ns)",
            o.receiver,
            o.constant_offset_s * 1e9,
            o.residual_std_s * 1e9
        );
    }

    let raw = pairwise_tdoa(&delays[0], &delays[1], geo[0], geo[1]).unwrap();
    println!("\nraw pairwise TDoA std: {:5.3} ns", raw.std() * 1e9);

    let window = 11.0;
    let filtered: Vec<_> = clocks
        .iter()
        .map(|c| rect_lowpass(&c.gnss_raw_error, window).unwrap())
        .collect();
    let corrected = compensate(&delays, &offsets, &filtered).unwrap();
    let post = pairwise_tdoa(&corrected[0], &corrected[1], geo[0], geo[1]).unwrap();
    println!(
        "after offset + {window} s rectangular GNSS filter: {:5.3} ns ({:.1}x variance reduction)",
        post.std() * 1e9,
        raw.variance() / post.variance()
    );
}
