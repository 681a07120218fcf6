//! Binary MDP container, little-endian throughout.
//!
//! ```text
//! offset size  field
//!      0    8  magic "MDPANO\0\0"
//!      8    4  format version (u32) = 1
//!     12    4  width W (u32)
//!     16    4  height H (u32)
//!     20    4  shell count M (u32)
//!     24    8  rho_min (f64, meters)
//!     32    8  rho_max (f64, meters)
//!     40    4  partition mode (u32): 0 equidistant radius, 1 equidistant inverse radius
//!     44    8  v_fov_slope (f64)
//!     52    M*5*W*H*4  payload: per layer the f32 planes C.r, C.g, C.b, D, alpha,
//!                      each row-major with row 0 at the top
//!    end    4  CRC-32 (IEEE) of the payload bytes
//! ```

use std::io::Write;
use std::path::Path;

use super::{payload_bytes, Mdp, MdpLayer, PartitionMode, ShellPartition, PLANES_PER_LAYER};
use crate::error::{Error, Result};
use crate::geometry::PanoMapping;

pub const MAGIC: [u8; 8] = *b"MDPANO\0\0";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 52;
pub const CHECKSUM_LEN: usize = 4;

pub fn file_len(width: usize, height: usize, shells: usize) -> u64 {
    HEADER_LEN as u64 + payload_bytes(width, height, shells) + CHECKSUM_LEN as u64
}

fn mode_code(mode: PartitionMode) -> u32 {
    match mode {
        PartitionMode::EquidistantRadius => 0,
        PartitionMode::EquidistantInverseRadius => 1,
    }
}

pub fn encode(mdp: &Mdp) -> Result<Vec<u8>> {
    mdp.validate()?;
    let (w, h, m) = (mdp.mapping.width, mdp.mapping.height, mdp.shell_count());
    let px = w * h;
    let mut out = Vec::with_capacity(file_len(w, h, m) as usize);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [w, h, m] {
        let v = u32::try_from(v).map_err(|_| Error::InvalidArgument("dimension exceeds u32".into()))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&mdp.partition.rho_min().to_le_bytes());
    out.extend_from_slice(&mdp.partition.rho_max().to_le_bytes());
    out.extend_from_slice(&mode_code(mdp.partition.mode()).to_le_bytes());
    out.extend_from_slice(&mdp.mapping.v_fov_slope.to_le_bytes());
    debug_assert_eq!(out.len(), HEADER_LEN);
    for layer in &mdp.layers {
        for c in 0..3 {
            for p in 0..px {
                out.extend_from_slice(&layer.color[3 * p + c].to_le_bytes());
            }
        }
        for v in layer.depth.iter().chain(&layer.alpha) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out[HEADER_LEN..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

pub fn decode(bytes: &[u8]) -> Result<Mdp> {
    if bytes.len() < MAGIC.len() || bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let version = u32_at(bytes, 8);
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (w, h, m) = (
        u32_at(bytes, 12) as usize,
        u32_at(bytes, 16) as usize,
        u32_at(bytes, 20) as usize,
    );
    let expected = file_len(w, h, m);
    if (bytes.len() as u64) < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len() as u64,
        });
    }
    if bytes.len() as u64 > expected {
        return Err(Error::InvalidArgument(format!(
            "{} trailing bytes after the checksum",
            bytes.len() as u64 - expected
        )));
    }
    let payload_end = bytes.len() - CHECKSUM_LEN;
    let stored = u32_at(bytes, payload_end);
    let computed = crc32fast::hash(&bytes[HEADER_LEN..payload_end]);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    let mode = match u32_at(bytes, 40) {
        0 => PartitionMode::EquidistantRadius,
        1 => PartitionMode::EquidistantInverseRadius,
        other => return Err(Error::InvalidArgument(format!("unknown partition mode {other}"))),
    };
    let partition = ShellPartition::new(f64_at(bytes, 24), f64_at(bytes, 32), m, mode)?;
    let mapping = PanoMapping::new(w, h, f64_at(bytes, 44))?;

    let px = w * h;
    let mut floats = bytes[HEADER_LEN..payload_end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let mut layers = Vec::with_capacity(m);
    for shell in 0..m {
        let mut layer = MdpLayer::empty(shell, px);
        for c in 0..3 {
            for p in 0..px {
                layer.color[3 * p + c] = floats.next().unwrap();
            }
        }
        for v in layer.depth.iter_mut().chain(layer.alpha.iter_mut()) {
            *v = floats.next().unwrap();
        }
        layers.push(layer);
    }
    debug_assert_eq!(PLANES_PER_LAYER, 5);
    Ok(Mdp {
        layers,
        mapping,
        partition,
    })
}

pub fn mdp_write(mdp: &Mdp, path: &Path) -> Result<()> {
    let bytes = encode(mdp)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    f.sync_all().map_err(|e| Error::io(path, e))
}

pub fn mdp_read(path: &Path) -> Result<Mdp> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
