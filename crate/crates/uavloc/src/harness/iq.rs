//! Coherent IQ recording format with zero-padded gap semantics.
//!
//! Binary layout: little-endian interleaved 32-bit float (I, Q) pairs.
//! Lost frames are written as zero samples and recorded in the gap list,
//! so sample index `i` always corresponds to absolute time
//! `epoch + i / sample_rate` — losing a frame never shifts later samples.
//! A plain-text TOML sidecar (`<file>.meta`) carries `schema_version`,
//! `sample_rate_hz`, `epoch_s`, and the gap list.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Zero-padded region of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub start_index: usize,
    pub length: usize,
}

/// A coherent complex baseband sample record.
#[derive(Debug, Clone, PartialEq)]
pub struct IqStream {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
    /// Absolute time of sample 0, seconds.
    pub epoch_s: f64,
    pub gaps: Vec<Gap>,
}

/// Sidecar schema version.
pub const IQ_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Sidecar {
    schema_version: u32,
    sample_rate_hz: f64,
    epoch_s: f64,
    gaps: Vec<(usize, usize)>,
}

impl IqStream {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64, epoch_s: f64) -> Self {
        Self { samples, sample_rate_hz, epoch_s, gaps: Vec::new() }
    }

    /// Absolute time of sample `i`; unaffected by any number of gaps.
    pub fn time_of(&self, i: usize) -> f64 {
        self.epoch_s + i as f64 / self.sample_rate_hz
    }

    /// Check the gap contract: every gap lies in range and holds zeros.
    pub fn validate(&self) -> Result<()> {
        if !self.sample_rate_hz.is_finite() || self.sample_rate_hz <= 0.0 {
            return Err(Error::Validation("iq stream: sample_rate_hz must be > 0".into()));
        }
        for gap in &self.gaps {
            let end = gap.start_index.checked_add(gap.length).ok_or_else(|| {
                Error::Validation("iq stream: gap range overflows".into())
            })?;
            if end > self.samples.len() {
                return Err(Error::Validation(format!(
                    "iq stream: gap [{}, {end}) exceeds {} samples",
                    gap.start_index,
                    self.samples.len()
                )));
            }
            if self.samples[gap.start_index..end].iter().any(|s| s.re != 0.0 || s.im != 0.0) {
                return Err(Error::Validation(format!(
                    "iq stream: gap at {} contains nonzero samples",
                    gap.start_index
                )));
            }
        }
        Ok(())
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".meta");
    std::path::PathBuf::from(os)
}

/// Write a stream as interleaved little-endian f32 (I, Q) pairs plus the
/// TOML sidecar. The file length is exactly `8 * samples.len()` bytes, gaps
/// included.
pub fn write_iq<P: AsRef<Path>>(stream: &IqStream, path: P) -> Result<()> {
    stream.validate()?;
    let path = path.as_ref();
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for s in &stream.samples {
        w.write_all(&(s.re as f32).to_le_bytes())?;
        w.write_all(&(s.im as f32).to_le_bytes())?;
    }
    w.flush()?;

    let sidecar = Sidecar {
        schema_version: IQ_SCHEMA_VERSION,
        sample_rate_hz: stream.sample_rate_hz,
        epoch_s: stream.epoch_s,
        gaps: stream.gaps.iter().map(|g| (g.start_index, g.length)).collect(),
    };
    let text = toml::to_string(&sidecar).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(sidecar_path(path), text)?;
    Ok(())
}

/// Read a stream written by [`write_iq`].
pub fn read_iq<P: AsRef<Path>>(path: P) -> Result<IqStream> {
    let path = path.as_ref();
    let meta_text = std::fs::read_to_string(sidecar_path(path))?;
    let sidecar: Sidecar =
        toml::from_str(&meta_text).map_err(|e| Error::Parse(e.to_string()))?;
    if sidecar.schema_version != IQ_SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "iq sidecar: unsupported schema_version {}",
            sidecar.schema_version
        )));
    }
    let mut bytes = Vec::new();
    BufReader::new(std::fs::File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse("iq file length is not a multiple of 8 bytes".into()));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| {
            Complex64::new(
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64,
                f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64,
            )
        })
        .collect();
    Ok(IqStream {
        samples,
        sample_rate_hz: sidecar.sample_rate_hz,
        epoch_s: sidecar.epoch_s,
        gaps: sidecar.gaps.iter().map(|&(s, l)| Gap { start_index: s, length: l }).collect(),
    })
}

/// Replace the designated frames with zeros and record them as gaps,
/// keeping the total length (and therefore every surviving sample's
/// absolute time) unchanged.
pub fn simulate_frame_loss(
    stream: &IqStream,
    frame_size: usize,
    loss_indices: &[usize],
) -> Result<IqStream> {
    if frame_size == 0 {
        return Err(Error::InvalidArgument("simulate_frame_loss: frame_size must be > 0".into()));
    }
    let n_frames = stream.samples.len().div_ceil(frame_size);
    let mut out = stream.clone();
    let mut indices: Vec<usize> = loss_indices.to_vec();
    indices.sort_unstable();
    indices.dedup();
    for &frame in &indices {
        if frame >= n_frames {
            return Err(Error::InvalidArgument(format!(
                "simulate_frame_loss: frame {frame} out of range ({n_frames} frames)"
            )));
        }
        let start = frame * frame_size;
        let end = (start + frame_size).min(stream.samples.len());
        for s in &mut out.samples[start..end] {
            *s = Complex64::new(0.0, 0.0);
        }
        out.gaps.push(Gap { start_index: start, length: end - start });
    }
    out.gaps.sort_by_key(|g| g.start_index);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn ramp_stream(n: usize) -> IqStream {
        let samples =
            (0..n).map(|i| Complex64::new(i as f64, -(i as f64) / 2.0)).collect();
        IqStream::new(samples, 32e6, 5.0)
    }

    #[test]
    fn file_is_eight_bytes_per_sample() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("a.iq");
        write_iq(&ramp_stream(1000), &path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 8000);
    }

    #[test]
    fn gap_bytes_are_zero() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("b.iq");
        let stream = simulate_frame_loss(&ramp_stream(1000), 100, &[5]).unwrap();
        write_iq(&stream, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8000);
        assert!(bytes[4000..4800].iter().all(|&b| b == 0), "gap region must be zero bytes");
    }

    #[test]
    fn round_trip_bit_identical() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.iq");
        // f32-representable values so the round trip is exact.
        let mut stream = ramp_stream(257);
        stream.gaps.clear();
        let stream = simulate_frame_loss(&stream, 64, &[1, 3]).unwrap();
        write_iq(&stream, &path).unwrap();
        let back = read_iq(&path).unwrap();
        assert_eq!(back.samples, stream.samples);
        assert_eq!(back.gaps, stream.gaps);
        assert_eq!(back.sample_rate_hz, stream.sample_rate_hz);
        assert_eq!(back.epoch_s, stream.epoch_s);
    }

    #[test]
    fn frame_loss_identity_without_losses() {
        let stream = ramp_stream(512);
        let out = simulate_frame_loss(&stream, 128, &[]).unwrap();
        assert_eq!(out, stream);
    }

    #[test]
    fn frame_loss_zeroes_expected_range() {
        let stream = ramp_stream(2048);
        let out = simulate_frame_loss(&stream, 256, &[3]).unwrap();
        assert_eq!(out.samples.len(), stream.samples.len());
        for i in 768..1024 {
            assert_eq!(out.samples[i], Complex64::new(0.0, 0.0));
        }
        assert_eq!(out.gaps, vec![Gap { start_index: 768, length: 256 }]);
        assert_eq!(out.samples[767], stream.samples[767]);
        assert_eq!(out.samples[1024], stream.samples[1024]);
    }

    #[test]
    fn frame_loss_out_of_range_rejected() {
        let stream = ramp_stream(100);
        assert!(simulate_frame_loss(&stream, 64, &[2]).is_err());
    }

    #[test]
    fn time_index_invariant_under_gaps() {
        let stream = ramp_stream(4096);
        let lossy = simulate_frame_loss(&stream, 128, &[0, 7, 31]).unwrap();
        for i in [0usize, 100, 2048, 4095] {
            assert_eq!(stream.time_of(i), lossy.time_of(i));
        }
    }

    #[test]
    fn validate_rejects_nonzero_gap() {
        let mut stream = ramp_stream(100);
        stream.gaps.push(Gap { start_index: 10, length: 5 });
        assert!(stream.validate().is_err());
    }
}
