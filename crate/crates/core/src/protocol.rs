//! Over-the-air packet sent by the head and tail transmitters of a train, and
//! its fixed 5-octet radio frame.
//!
//! Frame layout:
//!
//! | octet | content                              |
//! |-------|--------------------------------------|
//! | 0     | preamble `0xA5`                      |
//! | 1..=2 | train id, big-endian                 |
//! | 3     | phase (`0x00` head, `0x01` tail)     |
//! | 4     | ones'-complement sum of octets 0..=3 |

use std::fmt;

use thiserror::Error;

pub const PREAMBLE: u8 = 0xA5;
pub const FRAME_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrainId(pub u16);

impl fmt::Display for TrainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which transmitter produced a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Head,
    Tail,
}

impl Phase {
    fn octet(self) -> u8 {
        match self {
            Phase::Head => 0x00,
            Phase::Tail => 0x01,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Head => "head",
            Phase::Tail => "tail",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrainPacket {
    pub train_id: TrainId,
    pub phase: Phase,
}

impl TrainPacket {
    pub fn new(train_id: u16, phase: Phase) -> Self {
        TrainPacket {
            train_id: TrainId(train_id),
            phase,
        }
    }
}

/// A checksummed radio frame. Only constructible through [`encode_packet`],
/// so every value satisfies the layout invariants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EncodedFrame([u8; FRAME_LEN]);

impl EncodedFrame {
    pub fn bytes(&self) -> &[u8; FRAME_LEN] {
        &self.0
    }
}

impl AsRef<[u8]> for EncodedFrame {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("frame length {0} (expected {FRAME_LEN})")]
    BadLength(usize),
    #[error("bad preamble {0:#04x}")]
    BadPreamble(u8),
    #[error("checksum mismatch: carried {carried:#04x}, computed {computed:#04x}")]
    BadChecksum { carried: u8, computed: u8 },
    #[error("unknown phase octet {0:#04x}")]
    BadPhase(u8),
}

/// Ones'-complement of the low 8 bits of the octet sum.
pub fn compute_checksum(payload: &[u8]) -> u8 {
    !payload.iter().fold(0u8, |acc, b| acc.wrapping_add(*b))
}

pub fn encode_packet(packet: TrainPacket) -> EncodedFrame {
    let [hi, lo] = packet.train_id.0.to_be_bytes();
    let mut bytes = [PREAMBLE, hi, lo, packet.phase.octet(), 0];
    bytes[4] = compute_checksum(&bytes[..4]);
    EncodedFrame(bytes)
}

pub fn decode_frame(frame: &[u8]) -> Result<TrainPacket, DecodeError> {
    let bytes: &[u8; FRAME_LEN] = frame
        .try_into()
        .map_err(|_| DecodeError::BadLength(frame.len()))?;
    if bytes[0] != PREAMBLE {
        return Err(DecodeError::BadPreamble(bytes[0]));
    }
    let computed = compute_checksum(&bytes[..4]);
    if computed != bytes[4] {
        return Err(DecodeError::BadChecksum {
            carried: bytes[4],
            computed,
        });
    }
    let phase = match bytes[3] {
        0x00 => Phase::Head,
        0x01 => Phase::Tail,
        other => return Err(DecodeError::BadPhase(other)),
    };
    Ok(TrainPacket {
        train_id: TrainId(u16::from_be_bytes([bytes[1], bytes[2]])),
        phase,
    })
}
