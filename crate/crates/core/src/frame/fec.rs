//! Forward error correction applied to the encrypted message before it is
//! split into frames.

use crate::error::{Error, Result};
use crate::frame::ldpc::LdpcCode;

/// A block code mapping `message_len` bits to `block_len` bits.
pub trait Codec: Send + Sync {
    fn name(&self) -> &'static str;
    fn message_len(&self) -> usize;
    fn block_len(&self) -> usize;
    /// Largest BSC flip probability the code is designed for.
    fn threshold(&self) -> f64;
    fn encode(&self, message: &[bool]) -> Result<Vec<bool>>;
    /// `None` marks an erased position.
    fn decode(&self, received: &[Option<bool>], flip: f64) -> Result<Vec<bool>>;

    fn rate(&self) -> f64 {
        self.message_len() as f64 / self.block_len() as f64
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}

/// Pass-through code; decoding fails on any erasure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityCodec {
    pub len: usize,
}

impl Codec for IdentityCodec {
    fn name(&self) -> &'static str {
        "identity"
    }

    fn message_len(&self) -> usize {
        self.len
    }

    fn block_len(&self) -> usize {
        self.len
    }

    fn threshold(&self) -> f64 {
        0.0
    }

    fn encode(&self, message: &[bool]) -> Result<Vec<bool>> {
        check_len(self.len, message.len())?;
        Ok(message.to_vec())
    }

    fn decode(&self, received: &[Option<bool>], _flip: f64) -> Result<Vec<bool>> {
        check_len(self.len, received.len())?;
        received
            .iter()
            .enumerate()
            .map(|(i, b)| b.ok_or_else(|| Error::DecodeFailure(format!("bit {i} erased"))))
            .collect()
    }
}

/// Three-fold repetition with majority voting over the unerased copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepetitionCodec {
    pub message_len: usize,
}

impl Codec for RepetitionCodec {
    fn name(&self) -> &'static str {
        "repetition3"
    }

    fn message_len(&self) -> usize {
        self.message_len
    }

    fn block_len(&self) -> usize {
        3 * self.message_len
    }

    fn threshold(&self) -> f64 {
        0.05
    }

    fn encode(&self, message: &[bool]) -> Result<Vec<bool>> {
        check_len(self.message_len, message.len())?;
        Ok(message.iter().flat_map(|&b| [b, b, b]).collect())
    }

    fn decode(&self, received: &[Option<bool>], _flip: f64) -> Result<Vec<bool>> {
        check_len(self.block_len(), received.len())?;
        received
            .chunks(3)
            .enumerate()
            .map(|(i, copies)| {
                let ones = copies.iter().filter(|c| **c == Some(true)).count();
                let zeros = copies.iter().filter(|c| **c == Some(false)).count();
                match ones.cmp(&zeros) {
                    std::cmp::Ordering::Greater => Ok(true),
                    std::cmp::Ordering::Less => Ok(false),
                    std::cmp::Ordering::Equal => {
                        Err(Error::DecodeFailure(format!("tied vote on bit {i}")))
                    }
                }
            })
            .collect()
    }
}

/// Systematic LDPC block code.
#[derive(Debug, Clone)]
pub struct LdpcCodec {
    code: LdpcCode,
    threshold: f64,
}

impl LdpcCodec {
    pub fn new(block_len: usize, rate: f64, seed: u64) -> Result<Self> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "fec_rate",
                value: rate,
                reason: "must lie in (0, 1]",
            });
        }
        let k = ((block_len as f64 * rate).round() as usize).max(1);
        let code = LdpcCode::random(block_len, k, seed)?;
        // empirical BP threshold of the (3, 6)-like ensembles at short length
        let threshold = 0.04 * (1.0 - code.rate()) / 0.5;
        Ok(Self { code, threshold })
    }

    pub fn code(&self) -> &LdpcCode {
        &self.code
    }
}

impl Codec for LdpcCodec {
    fn name(&self) -> &'static str {
        "ldpc"
    }

    fn message_len(&self) -> usize {
        self.code.dimension()
    }

    fn block_len(&self) -> usize {
        self.code.len()
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }

    fn encode(&self, message: &[bool]) -> Result<Vec<bool>> {
        self.code.encode(message)
    }

    fn decode(&self, received: &[Option<bool>], flip: f64) -> Result<Vec<bool>> {
        let word = self.code.decode(received, flip)?;
        Ok(self.code.extract_info(&word))
    }
}

/// Named codec selection used by configuration front ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodecKind {
    Identity,
    Repetition3,
    Ldpc,
}

impl std::str::FromStr for CodecKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "repetition3" => Ok(Self::Repetition3),
            "ldpc" => Ok(Self::Ldpc),
            other => Err(Error::Config {
                key: "fec".into(),
                reason: format!("unknown codec `{other}` (identity, repetition3, ldpc)"),
            }),
        }
    }
}

impl CodecKind {
    /// Builds a codec whose message block is roughly `message_len` bits.
    pub fn build(self, message_len: usize, seed: u64) -> Result<Box<dyn Codec>> {
        if message_len == 0 {
            return Err(Error::InvalidParameter {
                name: "fec_block",
                value: 0.0,
                reason: "must be positive",
            });
        }
        Ok(match self {
            Self::Identity => Box::new(IdentityCodec { len: message_len }),
            Self::Repetition3 => Box::new(RepetitionCodec { message_len }),
            Self::Ldpc => Box::new(LdpcCodec::new(2 * message_len, 0.5, seed)?),
        })
    }
}

/// `X = FEC(Y)`.
pub fn precode(codec: &dyn Codec, y: &[bool]) -> Result<Vec<bool>> {
    codec.encode(y)
}
