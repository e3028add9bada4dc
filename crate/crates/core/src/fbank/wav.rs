//! Minimal RIFF/WAVE support: 16-bit signed little-endian mono PCM.

use std::fs;
use std::path::Path;

use super::Pcm;
use crate::error::{bail, Result};

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

/// Parses a WAV file, normalising samples to `[-1, 1)` by dividing by 32768.
pub fn parse_wav(bytes: &[u8]) -> Result<Pcm> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        bail!(Format, "not a RIFF/WAVE file");
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let Some(end) = body.checked_add(size).filter(|&e| e <= bytes.len()) else {
            bail!(Format, "chunk {:?} runs past end of file", String::from_utf8_lossy(id));
        };
        match id {
            b"fmt " => {
                if size < 16 {
                    bail!(Format, "fmt chunk too short");
                }
                fmt = Some((
                    u16_at(bytes, body),
                    u16_at(bytes, body + 2),
                    u32_at(bytes, body + 4),
                    u16_at(bytes, body + 14),
                ));
            }
            b"data" => {
                let Some((audio_format, channels, sample_rate, bits)) = fmt else {
                    bail!(Format, "data chunk before fmt chunk");
                };
                // 0xFFFE is WAVE_FORMAT_EXTENSIBLE; accepted when the layout is still 16-bit mono.
                if !(audio_format == 1 || audio_format == 0xfffe) || bits != 16 {
                    bail!(Format, "only 16-bit PCM is supported (format {audio_format}, {bits} bits)");
                }
                if channels != 1 {
                    bail!(Format, "only mono audio is supported, got {channels} channels");
                }
                if !size.is_multiple_of(2) {
                    bail!(Format, "odd-sized 16-bit data chunk");
                }
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32768.0)
                    .collect();
                return Ok(Pcm {
                    sample_rate,
                    samples,
                });
            }
            _ => {}
        }
        pos = end + (size & 1);
    }
    bail!(Format, "no data chunk")
}

pub fn read_wav(path: &Path) -> Result<Pcm> {
    parse_wav(&fs::read(path)?)
}

/// Encodes samples as 16-bit mono PCM, clamping to the representable range.
pub fn encode_wav(pcm: &Pcm) -> Vec<u8> {
    let data_len = (pcm.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&pcm.sample_rate.to_le_bytes());
    out.extend_from_slice(&(pcm.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &pcm.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn write_wav(pcm: &Pcm, path: &Path) -> Result<()> {
    fs::write(path, encode_wav(pcm))?;
    Ok(())
}
