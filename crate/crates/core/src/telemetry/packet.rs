//! The vest-to-host datagram.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "EQLV"
//!      4     1  version (1)
//!      5     4  seq        u32
//!      9     8  t_ms       u64
//!     17    12  ax ay az   f32 (g)
//!     29    12  gx gy gz   f32 (°/s)
//!     41    12  roll pitch yaw f32 (degrees, NaN when absent)
//!     53     4  crc        CRC-32 (IEEE) of bytes 0..53
//! ```
//!
//! All multi-byte fields are little-endian.

use crate::error::{Error, Result};
use crate::types::{ImuSample, OrientationState, Vec3};

pub const MAGIC: [u8; 4] = *b"EQLV";
pub const VERSION: u8 = 1;
pub const PACKET_LEN: usize = 57;
const CRC_OFFSET: usize = PACKET_LEN - 4;

pub type Packet = [u8; PACKET_LEN];

struct Cursor<'a> {
    buf: &'a mut [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn put(&mut self, bytes: &[u8]) {
        self.buf[self.pos..self.pos + bytes.len()].copy_from_slice(bytes);
        self.pos += bytes.len();
    }
}

pub fn encode_packet(sample: &ImuSample, orientation: Option<&OrientationState>) -> Packet {
    let mut out = [0u8; PACKET_LEN];
    let mut c = Cursor { buf: &mut out, pos: 0 };
    c.put(&MAGIC);
    c.put(&[VERSION]);
    c.put(&sample.seq.to_le_bytes());
    c.put(&sample.t_ms.to_le_bytes());
    for v in sample.accel.to_array().into_iter().chain(sample.gyro.to_array()) {
        c.put(&v.to_le_bytes());
    }
    let angles = match orientation {
        Some(o) => [o.roll_deg, o.pitch_deg, o.yaw_deg].map(|a| a as f32),
        None => [f32::NAN; 3],
    };
    for v in angles {
        c.put(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out[..CRC_OFFSET]);
    out[CRC_OFFSET..].copy_from_slice(&crc.to_le_bytes());
    out
}

fn f32_at(bytes: &[u8], offset: usize) -> f32 {
    f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

/// Checks, in order: length, magic, version, CRC.
///
/// Orientation is returned only when all three angles are present.
pub fn decode_packet(bytes: &[u8]) -> Result<(ImuSample, Option<OrientationState>)> {
    if bytes.len() != PACKET_LEN {
        return Err(Error::Length { expected: PACKET_LEN, actual: bytes.len() });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::Magic(magic));
    }
    if bytes[4] != VERSION {
        return Err(Error::Version(bytes[4]));
    }
    let carried = u32::from_le_bytes(bytes[CRC_OFFSET..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..CRC_OFFSET]);
    if carried != computed {
        return Err(Error::Integrity { computed, carried });
    }

    let seq = u32::from_le_bytes(bytes[5..9].try_into().unwrap());
    let t_ms = u64::from_le_bytes(bytes[9..17].try_into().unwrap());
    let v = |base: usize| Vec3::new(f32_at(bytes, base), f32_at(bytes, base + 4), f32_at(bytes, base + 8));
    let sample = ImuSample::new(seq, t_ms, v(17), v(29));
    let angles = v(41);
    let orientation = if angles.to_array().iter().any(|a| a.is_nan()) {
        None
    } else {
        Some(OrientationState::new(angles.x.into(), angles.y.into(), angles.z.into(), t_ms))
    };
    Ok((sample, orientation))
}
