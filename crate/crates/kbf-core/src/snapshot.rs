//! The `KBF1` binary snapshot-file format.
//!
//! Layout, all little-endian:
//! - bytes 0..4: magic `KBF1`
//! - bytes 4..8: u32 channel count M
//! - bytes 8..16: u64 snapshot count T
//! - then T snapshots, each M complex samples as (f64 re, f64 im),
//!   channel-major within the snapshot
//!
//! Total size is exactly `16 + 16 * M * T` bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::Error;
use crate::Result;

pub const MAGIC: [u8; 4] = *b"KBF1";
pub const HEADER_LEN: u64 = 16;

/// Parsed header of a snapshot file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotHeader {
    pub channels: usize,
    pub frames: u64,
}

impl SnapshotHeader {
    pub fn file_len(&self) -> u64 {
        HEADER_LEN + 16 * self.channels as u64 * self.frames
    }
}

/// Write a complete snapshot file from an iterator of snapshots; each
/// snapshot must have exactly `channels` samples.
pub fn write_snapshots<I>(path: &Path, channels: usize, frames: u64, snapshots: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<Complex64>>,
{
    if channels == 0 || frames == 0 {
        return Err(Error::invalid("snapshot file needs M >= 1 and T >= 1"));
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_all(&(channels as u32).to_le_bytes())?;
    w.write_all(&frames.to_le_bytes())?;
    let mut written = 0u64;
    for snap in snapshots {
        if snap.len() != channels {
            return Err(Error::DimensionMismatch {
                expected: channels,
                got: snap.len(),
            });
        }
        for x in &snap {
            w.write_all(&x.re.to_le_bytes())?;
            w.write_all(&x.im.to_le_bytes())?;
        }
        written += 1;
    }
    if written != frames {
        return Err(Error::invalid(format!(
            "declared {frames} snapshots but received {written}"
        )));
    }
    w.flush()?;
    Ok(())
}

/// Streaming reader over a snapshot file.
#[derive(Debug)]
pub struct SnapshotReader {
    header: SnapshotHeader,
    reader: BufReader<File>,
    frames_read: u64,
    offset: u64,
}

impl SnapshotReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let file_len = file.metadata()?.len();
        let mut reader = BufReader::new(file);

        let mut magic = [0u8; 4];
        read_exact_or_format(&mut reader, &mut magic, 0)?;
        if magic != MAGIC {
            return Err(Error::Format {
                offset: 0,
                reason: format!("bad magic {magic:?}, expected {MAGIC:?}"),
            });
        }
        let mut m_bytes = [0u8; 4];
        read_exact_or_format(&mut reader, &mut m_bytes, 4)?;
        let channels = u32::from_le_bytes(m_bytes) as usize;
        let mut t_bytes = [0u8; 8];
        read_exact_or_format(&mut reader, &mut t_bytes, 8)?;
        let frames = u64::from_le_bytes(t_bytes);
        if channels == 0 {
            return Err(Error::Format {
                offset: 4,
                reason: "channel count must be >= 1".into(),
            });
        }
        if frames == 0 {
            return Err(Error::Format {
                offset: 8,
                reason: "snapshot count must be >= 1".into(),
            });
        }
        let header = SnapshotHeader { channels, frames };
        if file_len != header.file_len() {
            return Err(Error::Format {
                offset: file_len.min(header.file_len()),
                reason: format!(
                    "file is {file_len} bytes, header implies {}",
                    header.file_len()
                ),
            });
        }
        Ok(SnapshotReader {
            header,
            reader,
            frames_read: 0,
            offset: HEADER_LEN,
        })
    }

    pub fn header(&self) -> SnapshotHeader {
        self.header
    }

    /// Next snapshot, or `None` after the declared count.
    pub fn next_snapshot(&mut self) -> Result<Option<Vec<Complex64>>> {
        if self.frames_read >= self.header.frames {
            return Ok(None);
        }
        let mut snap = Vec::with_capacity(self.header.channels);
        let mut buf = [0u8; 16];
        for _ in 0..self.header.channels {
            read_exact_or_format(&mut self.reader, &mut buf, self.offset)?;
            self.offset += 16;
            let re = f64::from_le_bytes(buf[0..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(buf[8..16].try_into().expect("8 bytes"));
            snap.push(Complex64::new(re, im));
        }
        self.frames_read += 1;
        Ok(Some(snap))
    }
}

impl Iterator for SnapshotReader {
    type Item = Result<Vec<Complex64>>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_snapshot().transpose()
    }
}

fn read_exact_or_format(reader: &mut BufReader<File>, buf: &mut [u8], offset: u64) -> Result<()> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format {
                offset,
                reason: "unexpected end of file".into(),
            }
        } else {
            Error::Io(e)
        }
    })
}
