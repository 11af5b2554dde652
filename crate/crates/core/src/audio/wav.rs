//! Minimal RIFF/WAVE reader and writer for 16-bit PCM mono files.
//!
//! Reading maps an integer sample `s` to `s / 32768`, so every decoded value
//! lies in `[-1, 1)`. Writing multiplies by 32768, rounds and clamps to the
//! i16 range, which makes `write(read(f))` reproduce the original sample
//! words exactly.

use std::fs;
use std::path::Path;

use super::Waveform;
use crate::error::{Error, Result};

const PCM_FORMAT: u16 = 1;
const READ_SCALE: f64 = 32768.0;

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_wav_bytes(&bytes)
}

fn u16_at(b: &[u8], off: usize) -> u16 {
    u16::from_le_bytes([b[off], b[off + 1]])
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

pub fn read_wav_bytes(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 {
        return Err(Error::MalformedWav("file shorter than RIFF header".into()));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::MalformedWav("missing RIFF/WAVE magic".into()));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut off = 12;
    while off + 8 <= bytes.len() {
        let id = &bytes[off..off + 4];
        let size = u32_at(bytes, off + 4) as usize;
        let body_start = off + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                Error::MalformedWav(format!(
                    "chunk {:?} overruns file",
                    String::from_utf8_lossy(id)
                ))
            })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::MalformedWav("fmt chunk too short".into()));
                }
                fmt = Some((
                    u16_at(body, 0),
                    u16_at(body, 2),
                    u32_at(body, 4),
                    u16_at(body, 14),
                ));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        off = body_end + (size & 1);
    }

    let (format, channels, sample_rate, bits) =
        fmt.ok_or_else(|| Error::MalformedWav("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::MalformedWav("missing data chunk".into()))?;
    if format != PCM_FORMAT {
        return Err(Error::UnsupportedWav(format!(
            "format tag {format} (only PCM = 1)"
        )));
    }
    if channels != 1 {
        return Err(Error::UnsupportedWav(format!(
            "{channels} channels (only mono)"
        )));
    }
    if bits != 16 {
        return Err(Error::UnsupportedWav(format!(
            "{bits} bits per sample (only 16)"
        )));
    }
    if sample_rate == 0 {
        return Err(Error::MalformedWav("zero sample rate".into()));
    }
    if data.len() % 2 != 0 {
        return Err(Error::MalformedWav("odd data chunk length".into()));
    }

    let samples = data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / READ_SCALE)
        .collect();
    Ok(Waveform::new(samples, sample_rate))
}

/// Quantizes one sample to a PCM16 word.
pub(crate) fn quantize(x: f64) -> i16 {
    let x = if x.is_nan() { 0.0 } else { x };
    (x * READ_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Serializes a waveform to a canonical 44-byte-header PCM16 mono file image.
pub fn wav_bytes(wave: &Waveform) -> Vec<u8> {
    let data_len = (wave.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&wave.sample_rate.to_le_bytes());
    out.extend_from_slice(&(wave.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &x in &wave.samples {
        out.extend_from_slice(&quantize(x).to_le_bytes());
    }
    out
}

pub fn write_wav(wave: &Waveform, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, wav_bytes(wave)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcm_file(words: &[i16], rate: u32) -> Vec<u8> {
        let samples = words.iter().map(|&w| w as f64 / READ_SCALE).collect();
        wav_bytes(&Waveform::new(samples, rate))
    }

    #[test]
    fn read_scales_by_32768() {
        let w = read_wav_bytes(&pcm_file(&[32767, 0, -32768], 16000)).unwrap();
        assert_eq!(w.samples, vec![0.999969482421875, 0.0, -1.0]);
        assert_eq!(w.sample_rate, 16000);
    }

    #[test]
    fn write_quantization_rule() {
        assert_eq!(quantize(1.0), 32767);
        assert_eq!(quantize(0.5), 16384);
        assert_eq!(quantize(-1.0), -32768);
        assert_eq!(quantize(2.0), 32767);
        assert_eq!(quantize(0.0), 0);
    }

    #[test]
    fn rejects_multichannel_and_non_pcm() {
        let mut b = pcm_file(&[1, 2], 8000);
        b[22] = 2;
        assert!(matches!(read_wav_bytes(&b), Err(Error::UnsupportedWav(_))));
        let mut b = pcm_file(&[1, 2], 8000);
        b[20] = 3;
        assert!(matches!(read_wav_bytes(&b), Err(Error::UnsupportedWav(_))));
        let mut b = pcm_file(&[1, 2], 8000);
        b[34] = 24;
        assert!(matches!(read_wav_bytes(&b), Err(Error::UnsupportedWav(_))));
    }

    #[test]
    fn rejects_malformed_headers() {
        assert!(matches!(read_wav_bytes(b"RIFF"), Err(Error::MalformedWav(_))));
        let mut b = pcm_file(&[1, 2], 8000);
        b[0] = b'X';
        assert!(matches!(read_wav_bytes(&b), Err(Error::MalformedWav(_))));
        let b = pcm_file(&[1, 2], 8000);
        assert!(matches!(
            read_wav_bytes(&b[..b.len() - 1]),
            Err(Error::MalformedWav(_))
        ));
    }

    #[test]
    fn skips_unknown_chunks() {
        let base = pcm_file(&[5, -5], 8000);
        let mut b = base[..36].to_vec();
        b.extend_from_slice(b"LIST");
        b.extend_from_slice(&3u32.to_le_bytes());
        b.extend_from_slice(&[1, 2, 3, 0]);
        b.extend_from_slice(&base[36..]);
        let w = read_wav_bytes(&b).unwrap();
        assert_eq!(w.samples.len(), 2);
    }

    proptest::proptest! {
        #[test]
        fn pcm_round_trip_is_byte_identical(words in proptest::collection::vec(proptest::num::i16::ANY, 0..512), rate in 1u32..96000) {
            let file = pcm_file(&words, rate);
            let back = wav_bytes(&read_wav_bytes(&file).unwrap());
            proptest::prop_assert_eq!(back, file);
        }
    }
}
