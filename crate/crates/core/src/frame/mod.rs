//! Frame coding for secure direct transmission.
//!
//! Data flow on Alice's side: message `M` → pad with pool bits
//! (`Y = M ⊕ S`) → FEC precoding (`X`) → split into frames → wiretap coset
//! coding (`Z`) → masking (`C = Z ⊕ L`) → channel. Bob reports which
//! positions arrived, Alice discloses `L` there, Bob unmasks, decodes and
//! reverses the chain. Secret bits for later pads are extracted from every
//! frame that satisfies the rate conditions.

pub mod channel;
pub mod fec;
pub mod ldpc;
pub mod pipeline;
pub mod pool;
pub mod wiretap;

pub use channel::{BitChannel, ChannelSpec, PulseChannel, SyntheticChannel};
pub use fec::{precode, Codec, CodecKind, IdentityCodec, LdpcCodec, RepetitionCodec};
pub use ldpc::LdpcCode;
pub use pipeline::{
    check_rate_conditions, run_frame_pipeline, FailureKind, FrameKind, FramePipeline,
    FrameTranscript, LinkEstimate, PipelineConfig, PipelineFailure, PipelineOutcome,
    PipelineReport, RateCheck,
};
pub use pool::{ssts_decrypt, ssts_encrypt, SstsPool};
pub use wiretap::{
    disclose, disclose_and_unmask, mask, secure_decode, secure_encode, unmask, Disclosure,
    FrameConfig, SecureCode,
};

/// Big-endian bit expansion of `bytes`.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<bool> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| b >> i & 1 == 1))
        .collect()
}

/// Inverse of [`bytes_to_bits`]; a trailing partial byte is zero-filled.
pub fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << (7 - i)))
        })
        .collect()
}
