//! Checkpoint file format.
//!
//! Layout, all little-endian:
//!   magic `RKQN` | version u32 | tube_types, rows, cols, stem_channels,
//!   residual_blocks, advantage_channels, value_channels (7 x u32) |
//!   optimizer step u64 | then f32 weights for primary, target, first
//!   moments, second moments, each in [`NetParams::param_slices`] order.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::scalar::Scalar;

use super::{AdamState, AgentParams, NetConfig, NetParams, QNetError};

const MAGIC: &[u8; 4] = b"RKQN";
const VERSION: u32 = 1;

pub fn save_checkpoint<S: Scalar>(agent: &AgentParams<S>, path: &Path) -> Result<(), QNetError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    let c = agent.config();
    for dim in [
        c.tube_types,
        c.rows,
        c.cols,
        c.stem_channels,
        c.residual_blocks,
        c.advantage_channels,
        c.value_channels,
    ] {
        w.write_u32::<LittleEndian>(dim as u32)?;
    }
    w.write_u64::<LittleEndian>(agent.opt.step)?;
    for net in [
        &agent.primary,
        &agent.target,
        &agent.opt.m,
        &agent.opt.v,
    ] {
        for slice in net.param_slices() {
            for &v in slice {
                w.write_f32::<LittleEndian>(v.to_f32())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read just the architecture header.
pub fn peek_config(path: &Path) -> Result<NetConfig, QNetError> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    read_header(&mut r).map(|(c, _)| c)
}

fn read_header<R: Read>(r: &mut R) -> Result<(NetConfig, u64), QNetError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(map_eof)?;
    if &magic != MAGIC {
        return Err(QNetError::BadMagic);
    }
    let version = r.read_u32::<LittleEndian>().map_err(map_eof)?;
    if version != VERSION {
        return Err(QNetError::UnsupportedVersion {
            found: version,
            expected: VERSION,
        });
    }
    let mut dims = [0usize; 7];
    for d in &mut dims {
        *d = r.read_u32::<LittleEndian>().map_err(map_eof)? as usize;
    }
    let step = r.read_u64::<LittleEndian>().map_err(map_eof)?;
    Ok((
        NetConfig {
            tube_types: dims[0],
            rows: dims[1],
            cols: dims[2],
            stem_channels: dims[3],
            residual_blocks: dims[4],
            advantage_channels: dims[5],
            value_channels: dims[6],
        },
        step,
    ))
}

fn map_eof(e: std::io::Error) -> QNetError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        QNetError::Truncated { expected: 1 }
    } else {
        QNetError::Io(e)
    }
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<AgentParams<S>, QNetError> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let (config, step) = read_header(&mut r)?;

    let mut read_net = |net: &mut NetParams<S>| -> Result<(), QNetError> {
        for slice in net.param_slices_mut() {
            let bytes = slice.len() * 4;
            let mut raw = vec![0u8; bytes];
            r.read_exact(&mut raw).map_err(|e| {
                if e.kind() == std::io::ErrorKind::UnexpectedEof {
                    QNetError::Truncated { expected: bytes }
                } else {
                    QNetError::Io(e)
                }
            })?;
            for (i, chunk) in raw.chunks_exact(4).enumerate() {
                slice[i] = S::from_f32(f32::from_le_bytes(chunk.try_into().unwrap()));
            }
        }
        Ok(())
    };

    let mut primary = NetParams::zeros(config);
    let mut target = NetParams::zeros(config);
    let mut opt = AdamState::new(config);
    opt.step = step;
    read_net(&mut primary)?;
    read_net(&mut target)?;
    read_net(&mut opt.m)?;
    read_net(&mut opt.v)?;

    let mut tail = [0u8; 1];
    match r.read(&mut tail)? {
        0 => Ok(AgentParams {
            primary,
            target,
            opt,
        }),
        _ => Err(QNetError::TrailingData),
    }
}
