//! Binary checkpoints of a running trajectory.
//!
//! Layout (little endian): magic `SPBCHKPT`, format version `u32`, step
//! `u64`, spin count `u32`, length-prefixed resolved configuration text, then
//! `2^n` amplitudes as `(re, im)` `f64` pairs.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use spinbath::{Complex64, StateVector};

use crate::error::CliError;

const MAGIC: &[u8; 8] = b"SPBCHKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    /// Resolved configuration (with seed) the state belongs to.
    pub config: String,
    pub state: StateVector,
}

fn bad(path: &Path, what: &str) -> CliError {
    CliError::Config {
        message: format!("{}: {what}", path.display()),
        line: None,
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let amps = self.state.amplitudes();
        let mut out = Vec::with_capacity(32 + self.config.len() + 16 * amps.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&(self.state.n_spins() as u32).to_le_bytes());
        out.extend_from_slice(&(self.config.len() as u64).to_le_bytes());
        out.extend_from_slice(self.config.as_bytes());
        for a in amps {
            out.extend_from_slice(&a.re.to_le_bytes());
            out.extend_from_slice(&a.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self, CliError> {
        let mut r = bytes;
        let mut take = |n: usize| -> Result<&[u8], CliError> {
            if r.len() < n {
                return Err(bad(path, "truncated checkpoint"));
            }
            let (head, tail) = r.split_at(n);
            r = tail;
            Ok(head)
        };
        if take(8)? != MAGIC {
            return Err(bad(path, "not a checkpoint file"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(bad(
                path,
                &format!("checkpoint format {version}, expected {VERSION}"),
            ));
        }
        let step = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let n_spins = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        if n_spins > 40 {
            return Err(bad(path, "implausible spin count"));
        }
        let len = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let config = String::from_utf8(take(len)?.to_vec())
            .map_err(|_| bad(path, "configuration is not UTF-8"))?;
        let dim = 1usize << n_spins;
        let raw = take(16 * dim)?;
        let amps = raw
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        if !r.is_empty() {
            return Err(bad(path, "trailing bytes after state"));
        }
        let state = StateVector::from_amplitudes(n_spins, amps)?;
        Ok(Self {
            step,
            config,
            state,
        })
    }

    /// Writes to a temporary sibling first so an interruption never leaves a
    /// half-written checkpoint behind.
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| CliError::io(&tmp, e))?;
        f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}
