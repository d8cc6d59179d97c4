//! IqFrame file format.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "BLESIMIQ"
//! 8       4     sample rate, Hz, u32 little-endian
//! 12      4     symbol rate, Hz, u32 little-endian
//! 16      8*N   samples: re f32 LE, im f32 LE, interleaved
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::modem::IqFrame;

pub const MAGIC: &[u8; 8] = b"BLESIMIQ";
pub const HEADER_LEN: usize = 16;

pub fn encode(frame: &IqFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * frame.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(frame.sample_rate.round() as u32).to_le_bytes());
    out.extend_from_slice(&(frame.symbol_rate.round() as u32).to_le_bytes());
    for s in &frame.samples {
        out.extend_from_slice(&(s.re as f32).to_le_bytes());
        out.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<IqFrame> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(Error::Io("not an IQ frame file (bad magic)".into()));
    }
    let body = &bytes[HEADER_LEN..];
    if body.len() % 8 != 0 {
        return Err(Error::Io(format!(
            "truncated sample data ({} bytes)",
            body.len()
        )));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f32_at = |c: &[u8], o: usize| f32::from_le_bytes(c[o..o + 4].try_into().unwrap());
    let samples = body
        .chunks_exact(8)
        .map(|c| Complex64::new(f64::from(f32_at(c, 0)), f64::from(f32_at(c, 4))))
        .collect();
    Ok(IqFrame::new(
        samples,
        f64::from(u32_at(8)),
        f64::from(u32_at(12)),
    ))
}

pub fn write(path: &Path, frame: &IqFrame) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode(frame))?;
    w.flush()?;
    Ok(())
}

pub fn read(path: &Path) -> Result<IqFrame> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    decode(&buf)
}
