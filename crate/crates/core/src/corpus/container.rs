//! The little-endian binary container shared by embedding files (`DMEB`)
//! and logits checkpoints (`DMLG`).
//!
//! ```text
//! offset  size  field
//!      0     4  magic (ASCII)
//!      4     4  version, u32 = 1
//!      8     8  n, u64
//!     16     4  d, u32
//!     20     4  flags, u32
//!     24   ...  payload
//! ```

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub magic: [u8; 4],
    pub n: u64,
    pub d: u32,
    pub flags: u32,
}

impl Header {
    pub fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.magic);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&self.d.to_le_bytes());
        out.extend_from_slice(&self.flags.to_le_bytes());
    }

    pub fn decode(bytes: &[u8], expected_magic: &[u8; 4]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != expected_magic {
            let found = String::from_utf8_lossy(&bytes[..bytes.len().min(4)]).into_owned();
            return Err(Error::BadMagic {
                expected: String::from_utf8_lossy(expected_magic).into_owned(),
                found,
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated {
                expected: HEADER_LEN as u64,
                found: bytes.len() as u64,
            });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::BadVersion { version });
        }
        Ok(Header {
            magic: *expected_magic,
            n: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
            d: u32::from_le_bytes(bytes[16..20].try_into().unwrap()),
            flags: u32::from_le_bytes(bytes[20..24].try_into().unwrap()),
        })
    }
}

/// Checks that `bytes` holds exactly `payload` bytes after the header.
pub fn check_payload_len(bytes: &[u8], payload: u64) -> Result<()> {
    let expected = HEADER_LEN as u64 + payload;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(Error::Truncated { expected, found });
    }
    if found > expected {
        return Err(Error::TrailingBytes { offset: expected });
    }
    Ok(())
}
