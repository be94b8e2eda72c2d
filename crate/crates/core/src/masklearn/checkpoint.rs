//! Logits checkpoints in the shared container.
//!
//! Header `n` is the candidate count, `d = 1`, `flags = 0`. The payload is
//! the epoch counter (u64), `n` logits (f64), then `n` mapped rows (u64).

use std::path::Path;

use super::Logits;
use crate::corpus::{check_payload_len, Header, HEADER_LEN};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DMLG";

pub fn encode_checkpoint(l: &Logits, epoch: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 + 16 * l.len());
    Header {
        magic: *CHECKPOINT_MAGIC,
        n: l.len() as u64,
        d: 1,
        flags: 0,
    }
    .encode(&mut out);
    out.extend_from_slice(&epoch.to_le_bytes());
    for v in l.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &r in l.candidate_map() {
        out.extend_from_slice(&(r as u64).to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Logits, u64)> {
    let h = Header::decode(bytes, CHECKPOINT_MAGIC)?;
    if h.d != 1 {
        return Err(Error::invalid(format!(
            "checkpoint width must be 1, got {}",
            h.d
        )));
    }
    let n = usize::try_from(h.n).map_err(|_| Error::invalid("checkpoint too large"))?;
    let payload = (n as u64)
        .checked_mul(16)
        .and_then(|x| x.checked_add(8))
        .ok_or_else(|| Error::invalid("checkpoint too large"))?;
    check_payload_len(bytes, payload)?;
    let word = |k: usize| -> [u8; 8] {
        let at = HEADER_LEN + 8 * k;
        bytes[at..at + 8].try_into().unwrap()
    };
    let epoch = u64::from_le_bytes(word(0));
    let values: Vec<f64> = (0..n).map(|i| f64::from_le_bytes(word(1 + i))).collect();
    let map: Vec<usize> = (0..n)
        .map(|i| u64::from_le_bytes(word(1 + n + i)) as usize)
        .collect();
    Ok((Logits::new(values, map)?, epoch))
}

pub fn write_checkpoint(l: &Logits, epoch: u64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(l, epoch)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(Logits, u64)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
