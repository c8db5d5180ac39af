//! The coherent IQ recording format: write a capture, lose Ethernet
//! frames, and show that zero padding preserves sample-time coherence.
//!
//! ```bash
//! cargo run --release --example iq_recording
//! ```

use num_complex::Complex64;
use uavloc::harness::{read_iq, simulate_frame_loss, write_iq, IqStream};
use uavloc::waveform::{synth_symbol, WaveformSpec};

fn main() {
    // A continuous recording of 64 back-to-back sounding symbols.
    let spec = WaveformSpec::new(3.75e9, 512, 16e-6);
    let symbol = synth_symbol(&spec).unwrap();
    let samples: Vec<Complex64> =
        std::iter::repeat_n(symbol.time_domain.iter(), 64).flatten().copied().collect();
    let stream = IqStream::new(samples, spec.sample_rate(), 10.0);
    println!(
        "recorded {} samples at {} MHz, epoch {} s",
        stream.samples.len(),
        stream.sample_rate_hz / 1e6,
        stream.epoch_s
    );

    // Lose three frames; the samples are zeroed in place, never removed.
    let lossy = simulate_frame_loss(&stream, 1024, &[2, 17, 30]).unwrap();
    for gap in &lossy.gaps {
        println!(
            "  gap: samples [{}, {}) zeroed (absolute time {:.6} s unchanged)",
            gap.start_index,
            gap.start_index + gap.length,
            lossy.time_of(gap.start_index)
        );
    }

    let dir = std::env::temp_dir().join("uavloc_iq_example");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("capture.iq");
    write_iq(&lossy, &path).unwrap();
    let on_disk = std::fs::metadata(&path).unwrap().len();
    println!(
        "wrote {} ({} bytes = 8 bytes/sample including gaps) + sidecar {}",
        path.display(),
        on_disk,
        path.with_extension("iq.meta").display()
    );

    let back = read_iq(&path).unwrap();
    assert_eq!(back.samples.len(), lossy.samples.len());
    assert_eq!(back.gaps, lossy.gaps);

    // Sample index still maps to absolute time after the gaps.
    let i = 31 * 1024;
    println!(
        "sample {} maps to t = {:.9} s in both the original and lossy streams",
        i,
        back.time_of(i)
    );
}
