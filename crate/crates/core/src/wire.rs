//! Byte layouts of the Hello and TC messages.
//!
//! Hello (all multi-byte fields big-endian):
//!
//! ```text
//!  0                   1                   2                   3
//! +-------------------------------+---------------+---------------+
//! |           Reserved            |     Htime     |  Willingness  |
//! +-------------------------------+---------------+---------------+
//! |             Non-link-specific data: x (i32, 1/4 m)            |
//! |             Non-link-specific data: y (i32, 1/4 m)            |
//! |             Non-link-specific data: z (i32, 1/4 m)            |
//! +---------------+---------------+-------------------------------+
//! |   Link Code   |   Reserved    |       Link Message Size       |
//! +---------------+---------------+-------------------------------+
//! |                   Neighbor interface address                  |
//! +---------------+-----------------------------------------------+
//! |  LQ forward   |                   Reserved                    |
//! +---------------+-----------------------------------------------+
//! :            ... more neighbors, more link messages ...         :
//! ```
//!
//! TC:
//!
//! ```text
//! | originator (32) | ANSN (16) | reserved (16) |
//! repeated { address (32) | LQ forward (8) | LQ reverse (8) | speed (16) }
//! ```
//!
//! The TC speed field is the originator's smoothed relative speed towards
//! that neighbor, signed, in cm/s.

use thiserror::Error;

use crate::metrics::ReceivingRatio;
use crate::model::{NodeId, Position};

/// Bytes before the first link message of a Hello.
pub const HELLO_HEADER_LEN: usize = 16;
/// Bytes of a TC header.
pub const TC_HEADER_LEN: usize = 8;
const LINK_HEADER_LEN: usize = 4;
const NEIGHBOR_ENTRY_LEN: usize = 8;
const TC_ENTRY_LEN: usize = 8;
const MAX_NEIGHBOR_BLOCKS: usize = 255;
/// Coordinates must stay strictly below this magnitude in meters.
pub const COORDINATE_LIMIT: f64 = (1u64 << 29) as f64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("buffer truncated: need {needed} bytes at offset {offset}, have {available}")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("link message {block}: declared size {declared} does not fit (remaining {remaining})")]
    BadLinkMessageSize {
        block: usize,
        declared: usize,
        remaining: usize,
    },
    #[error("link message {block}: unknown link code {code:#04x}")]
    UnknownLinkCode { block: usize, code: u8 },
    #[error("coordinate {0} m is outside the encodable range")]
    CoordinateOverflow(f64),
    #[error("{0} neighbor blocks exceed the limit of 255")]
    TooManyNeighbors(usize),
    #[error("willingness {0} is outside 0..=7")]
    BadWillingness(u8),
    #[error("validity time {0}s cannot be encoded")]
    BadHtime(f64),
    #[error("neighbor address 0 is not a node id")]
    ZeroAddress,
    #[error("TC body of {0} bytes is not a whole number of entries")]
    RaggedTcBody(usize),
}

/// A time value in the mantissa/exponent byte format used by OLSR:
/// `1/16 s * (1 + a/16) * 2^b` with `a` in the high nibble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Htime(u8);

impl Htime {
    const SCALE: f64 = 1.0 / 16.0;

    pub fn from_secs(secs: f64) -> Result<Self, WireError> {
        if !secs.is_finite() || secs < Self::SCALE {
            return Err(WireError::BadHtime(secs));
        }
        let ratio = secs / Self::SCALE;
        let mut b = ratio.log2().floor() as i32;
        let mut a = (16.0 * (ratio / 2f64.powi(b) - 1.0)).round() as i32;
        if a == 16 {
            a = 0;
            b += 1;
        }
        if b > 15 {
            return Err(WireError::BadHtime(secs));
        }
        Ok(Htime(((a as u8) << 4) | b as u8))
    }

    pub const fn from_byte(b: u8) -> Self {
        Htime(b)
    }

    pub const fn byte(self) -> u8 {
        self.0
    }

    pub fn as_secs(self) -> f64 {
        let a = (self.0 >> 4) as f64;
        let b = (self.0 & 0x0f) as i32;
        Self::SCALE * (1.0 + a / 16.0) * 2f64.powi(b)
    }
}

/// Receiving ratio quantized to one byte, `q = round(255 r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct LqByte(pub u8);

impl LqByte {
    pub fn quantize(r: ReceivingRatio) -> Self {
        LqByte((r.value() * 255.0).round() as u8)
    }

    pub fn ratio(self) -> ReceivingRatio {
        ReceivingRatio::new(self.0 as f64 / 255.0).expect("q/255 is within [0, 1]")
    }
}

/// Own position, signed fixed point with two fractional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PositionBlock {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl PositionBlock {
    pub fn from_position(p: Position) -> Result<Self, WireError> {
        Ok(PositionBlock {
            x: to_fixed(p.x)?,
            y: to_fixed(p.y)?,
            z: to_fixed(p.z)?,
        })
    }

    pub fn position(&self) -> Position {
        Position::new(
            self.x as f64 / 4.0,
            self.y as f64 / 4.0,
            self.z as f64 / 4.0,
        )
    }
}

fn to_fixed(v: f64) -> Result<i32, WireError> {
    if !v.is_finite() || v.abs() >= COORDINATE_LIMIT {
        return Err(WireError::CoordinateOverflow(v));
    }
    Ok((v * 4.0).round() as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LinkType {
    Unspecified = 0,
    Asymmetric = 1,
    Symmetric = 2,
    Lost = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NeighborType {
    NotNeighbor = 0,
    Symmetric = 1,
    Mpr = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct LinkCode {
    pub link: LinkType,
    pub neighbor: NeighborType,
}

impl LinkCode {
    pub const SYMMETRIC: LinkCode = LinkCode {
        link: LinkType::Symmetric,
        neighbor: NeighborType::Symmetric,
    };
    pub const ASYMMETRIC: LinkCode = LinkCode {
        link: LinkType::Asymmetric,
        neighbor: NeighborType::NotNeighbor,
    };

    pub fn byte(self) -> u8 {
        ((self.neighbor as u8) << 2) | self.link as u8
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        if b & 0xf0 != 0 {
            return None;
        }
        let link = match b & 0x03 {
            0 => LinkType::Unspecified,
            1 => LinkType::Asymmetric,
            2 => LinkType::Symmetric,
            _ => LinkType::Lost,
        };
        let neighbor = match (b >> 2) & 0x03 {
            0 => NeighborType::NotNeighbor,
            1 => NeighborType::Symmetric,
            2 => NeighborType::Mpr,
            _ => return None,
        };
        Some(LinkCode { link, neighbor })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborBlock {
    pub link_code: LinkCode,
    pub neighbor: NodeId,
    /// Our forward ratio for this neighbor, i.e. its reverse ratio.
    pub lq_forward: LqByte,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HelloMessage {
    pub htime: Htime,
    pub willingness: u8,
    pub position: PositionBlock,
    pub neighbors: Vec<NeighborBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TcEntry {
    pub neighbor: NodeId,
    pub lq_forward: LqByte,
    pub lq_reverse: LqByte,
    pub speed: SpeedField,
}

/// Relative speed in cm/s, saturating at the i16 range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpeedField(pub i16);

impl SpeedField {
    pub fn from_mps(v: f64) -> Self {
        if v.is_nan() {
            return SpeedField(0);
        }
        SpeedField((v * 100.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16)
    }

    pub fn mps(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcMessage {
    pub originator: NodeId,
    pub ansn: u16,
    pub advertised: Vec<TcEntry>,
}

/// `a` is newer than `b` under 16-bit wrap-around.
pub fn seq_newer(a: u16, b: u16) -> bool {
    a != b && a.wrapping_sub(b) < 0x8000
}

pub fn encode_hello(msg: &HelloMessage) -> Result<Vec<u8>, WireError> {
    if msg.willingness > 7 {
        return Err(WireError::BadWillingness(msg.willingness));
    }
    if msg.neighbors.len() > MAX_NEIGHBOR_BLOCKS {
        return Err(WireError::TooManyNeighbors(msg.neighbors.len()));
    }
    let mut out = Vec::with_capacity(
        HELLO_HEADER_LEN + msg.neighbors.len() * (LINK_HEADER_LEN + NEIGHBOR_ENTRY_LEN),
    );
    out.extend_from_slice(&[0, 0, msg.htime.byte(), msg.willingness]);
    for c in [msg.position.x, msg.position.y, msg.position.z] {
        out.extend_from_slice(&c.to_be_bytes());
    }
    // consecutive neighbors sharing a link code go into one link message
    for group in msg.neighbors.chunk_by(|a, b| a.link_code == b.link_code) {
        let size = LINK_HEADER_LEN + group.len() * NEIGHBOR_ENTRY_LEN;
        out.push(group[0].link_code.byte());
        out.push(0);
        out.extend_from_slice(&(size as u16).to_be_bytes());
        for n in group {
            out.extend_from_slice(&n.neighbor.get().to_be_bytes());
            out.extend_from_slice(&[n.lq_forward.0, 0, 0, 0]);
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.remaining() < n {
            return Err(WireError::Truncated {
                offset: self.pos,
                needed: n,
                available: self.remaining(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn node(&mut self) -> Result<NodeId, WireError> {
        NodeId::new(self.u32()?).map_err(|_| WireError::ZeroAddress)
    }
}

pub fn decode_hello(bytes: &[u8]) -> Result<HelloMessage, WireError> {
    let mut r = Reader::new(bytes);
    r.u16()?;
    let htime = Htime::from_byte(r.u8()?);
    let willingness = r.u8()?;
    if willingness > 7 {
        return Err(WireError::BadWillingness(willingness));
    }
    let position = PositionBlock {
        x: r.u32()? as i32,
        y: r.u32()? as i32,
        z: r.u32()? as i32,
    };
    let mut neighbors = Vec::new();
    let mut block = 0;
    while r.remaining() > 0 {
        let code_byte = r.u8()?;
        r.u8()?;
        let declared = r.u16()? as usize;
        let body = declared.checked_sub(LINK_HEADER_LEN);
        match body {
            Some(body) if body <= r.remaining() && body % NEIGHBOR_ENTRY_LEN == 0 => {}
            _ => {
                return Err(WireError::BadLinkMessageSize {
                    block,
                    declared,
                    remaining: r.remaining(),
                })
            }
        }
        let link_code = LinkCode::from_byte(code_byte).ok_or(WireError::UnknownLinkCode {
            block,
            code: code_byte,
        })?;
        let count = (declared - LINK_HEADER_LEN) / NEIGHBOR_ENTRY_LEN;
        for _ in 0..count {
            let neighbor = r.node()?;
            let lq = r.take(4)?[0];
            neighbors.push(NeighborBlock {
                link_code,
                neighbor,
                lq_forward: LqByte(lq),
            });
        }
        if neighbors.len() > MAX_NEIGHBOR_BLOCKS {
            return Err(WireError::TooManyNeighbors(neighbors.len()));
        }
        block += 1;
    }
    Ok(HelloMessage {
        htime,
        willingness,
        position,
        neighbors,
    })
}

pub fn encode_tc(msg: &TcMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(TC_HEADER_LEN + msg.advertised.len() * TC_ENTRY_LEN);
    out.extend_from_slice(&msg.originator.get().to_be_bytes());
    out.extend_from_slice(&msg.ansn.to_be_bytes());
    out.extend_from_slice(&[0, 0]);
    for e in &msg.advertised {
        out.extend_from_slice(&e.neighbor.get().to_be_bytes());
        out.extend_from_slice(&[e.lq_forward.0, e.lq_reverse.0]);
        out.extend_from_slice(&e.speed.0.to_be_bytes());
    }
    out
}

pub fn decode_tc(bytes: &[u8]) -> Result<TcMessage, WireError> {
    let mut r = Reader::new(bytes);
    let originator = r.node()?;
    let ansn = r.u16()?;
    r.u16()?;
    if !r.remaining().is_multiple_of(TC_ENTRY_LEN) {
        return Err(WireError::RaggedTcBody(r.remaining()));
    }
    let mut advertised = Vec::with_capacity(r.remaining() / TC_ENTRY_LEN);
    while r.remaining() > 0 {
        let neighbor = r.node()?;
        let lq = r.take(4)?;
        advertised.push(TcEntry {
            neighbor,
            lq_forward: LqByte(lq[0]),
            lq_reverse: LqByte(lq[1]),
            speed: SpeedField(i16::from_be_bytes([lq[2], lq[3]])),
        });
    }
    Ok(TcMessage {
        originator,
        ansn,
        advertised,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_hello() -> HelloMessage {
        HelloMessage {
            htime: Htime::from_secs(0.5).unwrap(),
            willingness: 3,
            position: PositionBlock::default(),
            neighbors: vec![],
        }
    }

    #[test]
    fn htime_half_second_is_exact() {
        let h = Htime::from_secs(0.5).unwrap();
        assert_eq!(h.byte(), 0x03);
        assert_eq!(h.as_secs(), 0.5);
        assert_eq!(Htime::from_secs(1.0).unwrap().as_secs(), 1.0);
        assert_eq!(Htime::from_secs(6.0).unwrap().as_secs(), 6.0);
        assert!(Htime::from_secs(0.01).is_err());
        assert!(Htime::from_secs(1e9).is_err());
    }

    #[test]
    fn position_fixed_point() {
        let b = PositionBlock::from_position(Position::new(300.25, -1.5, 0.0)).unwrap();
        assert_eq!(b.x as u32, 0x0000_04B1);
        assert_eq!(b.y as u32, 0xFFFF_FFFA);
        assert_eq!(b.z as u32, 0);
        assert_eq!(b.position(), Position::new(300.25, -1.5, 0.0));
        assert!(PositionBlock::from_position(Position::new(COORDINATE_LIMIT, 0.0, 0.0)).is_err());
        assert!(PositionBlock::from_position(Position::new(f64::NAN, 0.0, 0.0)).is_err());
    }

    #[test]
    fn lq_quantization_examples() {
        let q: Vec<u8> = [1.0, 0.5, 0.0]
            .iter()
            .map(|&v| LqByte::quantize(ReceivingRatio::new(v).unwrap()).0)
            .collect();
        assert_eq!(q, vec![255, 128, 0]);
        assert_eq!(LqByte(128).ratio().value(), 128.0 / 255.0);
    }

    #[test]
    fn truncated_hello_is_an_error() {
        let bytes = encode_hello(&empty_hello()).unwrap();
        assert_eq!(bytes.len(), HELLO_HEADER_LEN);
        assert!(matches!(
            decode_hello(&bytes[..bytes.len() - 1]),
            Err(WireError::Truncated { .. })
        ));
    }

    #[test]
    fn oversized_link_message_names_block() {
        let mut msg = empty_hello();
        for (i, code) in [LinkCode::SYMMETRIC, LinkCode::ASYMMETRIC]
            .into_iter()
            .enumerate()
        {
            msg.neighbors.push(NeighborBlock {
                link_code: code,
                neighbor: NodeId::of(i as u32 + 2),
                lq_forward: LqByte(200),
            });
        }
        let mut bytes = encode_hello(&msg).unwrap();
        // second link message starts after the header and one 12-byte block
        let second = HELLO_HEADER_LEN + LINK_HEADER_LEN + NEIGHBOR_ENTRY_LEN;
        bytes[second + 2..second + 4].copy_from_slice(&64u16.to_be_bytes());
        assert_eq!(
            decode_hello(&bytes),
            Err(WireError::BadLinkMessageSize {
                block: 1,
                declared: 64,
                remaining: 8
            })
        );
    }

    #[test]
    fn unknown_link_code_rejected() {
        let mut msg = empty_hello();
        msg.neighbors.push(NeighborBlock {
            link_code: LinkCode::SYMMETRIC,
            neighbor: NodeId::of(2),
            lq_forward: LqByte(1),
        });
        let mut bytes = encode_hello(&msg).unwrap();
        bytes[HELLO_HEADER_LEN] = 0x0f;
        assert_eq!(
            decode_hello(&bytes),
            Err(WireError::UnknownLinkCode {
                block: 0,
                code: 0x0f
            })
        );
    }

    #[test]
    fn encoder_limits() {
        let mut msg = empty_hello();
        msg.willingness = 8;
        assert_eq!(encode_hello(&msg), Err(WireError::BadWillingness(8)));
        let mut msg = empty_hello();
        msg.neighbors = (1..=256)
            .map(|i| NeighborBlock {
                link_code: LinkCode::SYMMETRIC,
                neighbor: NodeId::of(i),
                lq_forward: LqByte(0),
            })
            .collect();
        assert_eq!(encode_hello(&msg), Err(WireError::TooManyNeighbors(256)));
    }

    #[test]
    fn neighbors_grouped_by_link_code() {
        let mut msg = empty_hello();
        for i in 0..3 {
            msg.neighbors.push(NeighborBlock {
                link_code: LinkCode::SYMMETRIC,
                neighbor: NodeId::of(10 + i),
                lq_forward: LqByte(255),
            });
        }
        let bytes = encode_hello(&msg).unwrap();
        assert_eq!(
            bytes.len(),
            HELLO_HEADER_LEN + LINK_HEADER_LEN + 3 * NEIGHBOR_ENTRY_LEN
        );
        assert_eq!(&bytes[16..20], &[0x06, 0x00, 0x00, 28]);
        assert_eq!(decode_hello(&bytes).unwrap(), msg);
    }

    #[test]
    fn empty_tc_is_header_only() {
        let tc = TcMessage {
            originator: NodeId::of(5),
            ansn: 9,
            advertised: vec![],
        };
        let bytes = encode_tc(&tc);
        assert_eq!(bytes, vec![0, 0, 0, 5, 0, 9, 0, 0]);
        assert_eq!(decode_tc(&bytes).unwrap(), tc);
        assert_eq!(
            decode_tc(&bytes[..7]).unwrap_err(),
            WireError::Truncated {
                offset: 6,
                needed: 2,
                available: 1
            }
        );
        let mut ragged = bytes.clone();
        ragged.push(1);
        assert_eq!(decode_tc(&ragged), Err(WireError::RaggedTcBody(1)));
    }

    #[test]
    fn tc_entry_layout() {
        let tc = TcMessage {
            originator: NodeId::of(1),
            ansn: 0x0102,
            advertised: vec![TcEntry {
                neighbor: NodeId::of(0x0A0B0C0D),
                lq_forward: LqByte(255),
                lq_reverse: LqByte(128),
                speed: SpeedField::from_mps(-10.625),
            }],
        };
        let bytes = encode_tc(&tc);
        // -1062.5 cm/s rounds away from zero to -1063 = 0xFBD9
        assert_eq!(&bytes[8..], &[0x0A, 0x0B, 0x0C, 0x0D, 255, 128, 0xFB, 0xD9]);
        assert_eq!(decode_tc(&bytes).unwrap(), tc);
    }

    #[test]
    fn speed_field_saturates() {
        assert_eq!(SpeedField::from_mps(1e6), SpeedField(i16::MAX));
        assert_eq!(SpeedField::from_mps(-1e6), SpeedField(i16::MIN));
        assert_eq!(SpeedField::from_mps(f64::NAN), SpeedField(0));
        assert_eq!(SpeedField::from_mps(0.8).mps(), 0.8);
    }

    #[test]
    fn seq_wraparound() {
        assert!(seq_newer(1, 0));
        assert!(!seq_newer(0, 1));
        assert!(!seq_newer(7, 7));
        assert!(seq_newer(0, 65535));
        assert!(!seq_newer(65535, 0));
    }
}
