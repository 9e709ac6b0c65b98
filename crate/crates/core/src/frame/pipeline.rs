//! Frame-by-frame secure transmission.
//!
//! Each frame is admitted only if its coding parameters satisfy the rate
//! conditions against the previous frame's link estimates:
//!
//! * security: `k_i / n_ci <= r_i - I(A:E)`
//! * reliability: `r_i < I(A:B)`
//!
//! The first frame carries random bits from which the initial secret pool
//! is extracted. Later frames either carry precoded ciphertext (`X`) or,
//! when the pool is too short to encrypt the next block, more random bits.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::channel::BitChannel;
use crate::frame::fec::{Codec, CodecKind};
use crate::frame::ldpc::random_bits;
use crate::frame::pool::SstsPool;
use crate::frame::wiretap::{
    decode_codeword, delivered_positions, disclose, mask, secure_encode, unmask_disclosed,
    FrameConfig, SecureCode,
};
use crate::rates::entropy;

/// Flip prior handed to the FEC decoder; its input has already been
/// through the frame decoder.
const FEC_FLIP_PRIOR: f64 = 1e-3;
const MIN_FLIP_PRIOR: f64 = 1e-4;

/// Per-frame link estimates, in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkEstimate {
    /// Delivered fraction `Q̂`.
    pub gain: f64,
    /// Measured bit error `Ê^X` on delivered positions.
    pub qber: f64,
    /// Phase error `Ê^Z`.
    pub phase_error: f64,
    pub i_ab: f64,
    pub i_ae: f64,
}

impl LinkEstimate {
    /// `I(A:B) = Q̂ (1 - f h(Ê^X))`, `I(A:E) = Q̂ h(Ê^Z)`.
    pub fn new(gain: f64, qber: f64, phase_error: f64, f: f64) -> Self {
        let qber = qber.clamp(0.0, 0.5);
        let phase_error = phase_error.clamp(0.0, 0.5);
        Self {
            gain,
            qber,
            phase_error,
            i_ab: gain * (1.0 - f * entropy(qber)),
            i_ae: gain * entropy(phase_error),
        }
    }

    /// Largest secure payload for a frame of `n_ci` uses at rate `r`.
    pub fn secure_capacity(&self, n_ci: usize, r: f64) -> usize {
        let bits = (n_ci as f64 * (r - self.i_ae)).floor();
        if bits > 0.0 {
            bits as usize
        } else {
            0
        }
    }
}

/// Outcome of [`check_rate_conditions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    pub accepted: bool,
    /// First frame, admitted without estimates.
    pub bootstrap: bool,
    /// `r_i - I(A:E) - k_i / n_ci`; negative violates security.
    pub security_margin: Option<f64>,
    /// `I(A:B) - r_i`; non-positive violates reliability.
    pub reliability_margin: Option<f64>,
    pub reason: Option<String>,
}

pub fn check_rate_conditions(cfg: &FrameConfig, prev: Option<&LinkEstimate>) -> Result<RateCheck> {
    let Some(est) = prev else {
        if cfg.frame_index <= 1 {
            return Ok(RateCheck {
                accepted: true,
                bootstrap: true,
                security_margin: None,
                reliability_margin: None,
                reason: None,
            });
        }
        return Err(Error::MissingEstimates {
            frame: cfg.frame_index,
        });
    };
    let security = cfg.r_i - est.i_ae - cfg.secure_rate();
    let reliability = est.i_ab - cfg.r_i;
    let mut reasons = Vec::new();
    if security < -1e-12 {
        reasons.push(format!(
            "security: k/n = {:.6} exceeds r - I(A:E) = {:.6}",
            cfg.secure_rate(),
            cfg.r_i - est.i_ae
        ));
    }
    if reliability <= 0.0 {
        reasons.push(format!(
            "reliability: r = {:.6} is not below I(A:B) = {:.6}",
            cfg.r_i, est.i_ab
        ));
    }
    Ok(RateCheck {
        accepted: reasons.is_empty(),
        bootstrap: false,
        security_margin: Some(security),
        reliability_margin: Some(reliability),
        reason: (!reasons.is_empty()).then(|| reasons.join("; ")),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameKind {
    /// Random payload used only to grow the secret pool.
    Bootstrap,
    /// Precoded ciphertext.
    Data,
}

/// Public record of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTranscript {
    pub index: u64,
    pub kind: FrameKind,
    pub config: FrameConfig,
    pub check: RateCheck,
    /// Ciphertext bits carried; the rest of `k_i` is padding.
    pub payload_bits: usize,
    pub delivered: usize,
    pub disclosed_positions: Vec<usize>,
    pub decoded: bool,
    pub estimate: Option<LinkEstimate>,
    pub extracted: usize,
    pub pool_alice: usize,
    pub pool_bob: usize,
    pub pools_equal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    /// A frame failed the rate conditions.
    Refused,
    /// The precoder could not recover a block.
    Decode,
    /// The frame budget ran out.
    FrameLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineFailure {
    pub frame: u64,
    pub kind: FailureKind,
    pub message: String,
    /// What the endpoints must do before resuming.
    pub directive: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub message_bits: usize,
    pub blocks: usize,
    pub fec: String,
    pub frames: Vec<FrameTranscript>,
    pub channel_uses: u64,
    /// Frames whose codeword Bob could not recover.
    pub decode_failures: Vec<u64>,
    pub success: bool,
    pub failure: Option<PipelineFailure>,
}

impl PipelineReport {
    pub fn pools_always_equal(&self) -> bool {
        self.frames.iter().all(|f| f.pools_equal)
    }

    pub fn data_frames(&self) -> usize {
        self.frames.iter().filter(|f| f.kind == FrameKind::Data).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    /// Bob's reconstruction of the message.
    pub message: Vec<bool>,
    pub report: PipelineReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// LDPC length of the frame code.
    pub code_len: usize,
    /// LDPC design rate.
    pub code_rate: f64,
    /// Channel uses per LDPC bit.
    pub repeat: usize,
    /// Error-correction inefficiency in the `I(A:B)` estimate.
    pub f: f64,
    /// Public seed for the codes and extraction permutations.
    pub code_seed: u64,
    pub fec: String,
    /// Target message block of the precoder.
    pub fec_block: usize,
    /// Flip prior for the first frame's decoder.
    pub initial_flip: f64,
    pub max_frames: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            code_len: 1024,
            code_rate: 0.5,
            repeat: 1,
            f: 1.2,
            code_seed: 0x5eed,
            fec: "ldpc".into(),
            fec_block: 512,
            initial_flip: 0.02,
            max_frames: 1_000_000,
        }
    }
}

pub struct FramePipeline {
    config: PipelineConfig,
    code: SecureCode,
    fec: Box<dyn Codec>,
}

impl std::fmt::Debug for FramePipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FramePipeline")
            .field("config", &self.config)
            .field("n_ci", &self.code.n_ci())
            .field("fec", &self.fec.name())
            .finish()
    }
}

struct Alice {
    pool: SstsPool,
    rng: ChaCha8Rng,
    /// Precoded ciphertext not yet sent.
    pending: VecDeque<bool>,
}

struct Bob {
    pool: SstsPool,
    /// Pads reserved for blocks still in flight, in block order.
    pads: VecDeque<Vec<bool>>,
    /// Received precoded bits of the current block; `None` when the frame
    /// carrying them failed.
    received: Vec<Option<bool>>,
    message: Vec<bool>,
}

impl FramePipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        let kind: CodecKind = config.fec.parse()?;
        let fec = kind.build(config.fec_block, config.code_seed ^ 0xfec)?;
        Self::with_codec(config, fec)
    }

    pub fn with_codec(config: PipelineConfig, fec: Box<dyn Codec>) -> Result<Self> {
        if !(config.f >= 1.0 && config.f.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "f",
                value: config.f,
                reason: "must be at least 1",
            });
        }
        let code =
            SecureCode::with_repetition(config.code_len, config.code_rate, config.repeat, config.code_seed)?;
        Ok(Self { config, code, fec })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn code(&self) -> &SecureCode {
        &self.code
    }

    pub fn codec(&self) -> &dyn Codec {
        self.fec.as_ref()
    }

    /// Runs the full session starting from empty pools.
    pub fn run<C: BitChannel>(&self, message: &[bool], channel: &mut C, seed: u64) -> Result<PipelineOutcome> {
        let mut alice = SstsPool::new();
        let mut bob = SstsPool::new();
        self.run_with_pools(message, channel, &mut alice, &mut bob, seed)
    }

    /// Runs the session on existing pools, which are left in their final
    /// state.
    pub fn run_with_pools<C: BitChannel>(
        &self,
        message: &[bool],
        channel: &mut C,
        alice_pool: &mut SstsPool,
        bob_pool: &mut SstsPool,
        seed: u64,
    ) -> Result<PipelineOutcome> {
        let m = self.fec.message_len();
        let blocks = message.len().div_ceil(m);
        let mut padded = message.to_vec();
        padded.resize(blocks * m, false);

        let mut alice = Alice {
            pool: std::mem::take(alice_pool),
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: VecDeque::new(),
        };
        let mut bob = Bob {
            pool: std::mem::take(bob_pool),
            pads: VecDeque::new(),
            received: Vec::new(),
            message: Vec::with_capacity(padded.len()),
        };
        let mut report = PipelineReport {
            message_bits: message.len(),
            blocks,
            fec: self.fec.name().into(),
            frames: Vec::new(),
            channel_uses: 0,
            decode_failures: Vec::new(),
            success: false,
            failure: None,
        };
        let start_uses = channel.uses();
        let mut next_block = 0;
        let mut prev: Option<LinkEstimate> = None;
        let mut index = 0u64;

        while bob.message.len() < padded.len() {
            index += 1;
            if index > self.config.max_frames {
                report.failure = Some(PipelineFailure {
                    frame: index,
                    kind: FailureKind::FrameLimit,
                    message: format!("message not delivered within {} frames", self.config.max_frames),
                    directive: None,
                });
                break;
            }
            let k_i = match &prev {
                None => self.code.dimension() / 2,
                Some(est) => est
                    .secure_capacity(self.code.n_ci(), self.code.rate())
                    .min(self.code.dimension()),
            };
            if k_i == 0 {
                let cfg = self.code.frame_config(index, 0);
                let check = check_rate_conditions(&cfg, prev.as_ref())?;
                report.failure = Some(refusal(
                    &report,
                    index,
                    "no secure capacity at the current link estimates".into(),
                    &check,
                ));
                break;
            }

            // encrypt further blocks while the pool allows
            while alice.pending.len() < k_i && next_block < blocks && alice.pool.available() >= m {
                let block = &padded[next_block * m..(next_block + 1) * m];
                let pad = alice.pool.take(m)?;
                bob.pads.push_back(bob.pool.take(m)?);
                let y: Vec<bool> = block.iter().zip(&pad).map(|(a, b)| a ^ b).collect();
                alice.pending.extend(self.fec.encode(&y)?);
                next_block += 1;
            }
            let kind = if alice.pending.is_empty() {
                FrameKind::Bootstrap
            } else {
                FrameKind::Data
            };
            let payload_bits = alice.pending.len().min(k_i);
            let cfg = self.code.frame_config(index, k_i);
            let check = check_rate_conditions(&cfg, prev.as_ref())?;
            if !check.accepted {
                report.failure = Some(refusal(
                    &report,
                    index,
                    check.reason.clone().unwrap_or_default(),
                    &check,
                ));
                report.frames.push(FrameTranscript {
                    index,
                    kind,
                    config: cfg,
                    check,
                    payload_bits: 0,
                    delivered: 0,
                    disclosed_positions: Vec::new(),
                    decoded: false,
                    estimate: None,
                    extracted: 0,
                    pool_alice: alice.pool.available(),
                    pool_bob: bob.pool.available(),
                    pools_equal: alice.pool == bob.pool,
                });
                break;
            }

            let mut x: Vec<bool> = alice.pending.drain(..payload_bits).collect();
            x.extend(random_bits(&mut alice.rng, k_i - payload_bits));
            let z = secure_encode(&self.code, &cfg, &x, &mut alice.rng)?;
            let (c, l) = mask(&z, &mut alice.rng);
            let received = channel.transmit(&c);
            let delivered = delivered_positions(&received);
            let disclosure = disclose(&l, &delivered)?;
            let z_bob = unmask_disclosed(&received, &disclosure)?;
            let prior = prev.map_or(self.config.initial_flip, |e| e.qber).max(MIN_FLIP_PRIOR);
            let decoded = decode_codeword(&self.code, &z_bob, prior).ok();
            if decoded.is_none() {
                report.decode_failures.push(index);
            }

            // Bob's corrected view of C and the measured error rate
            let gain = delivered.len() as f64 / self.code.n_ci() as f64;
            let (estimate, c_bob) = match &decoded {
                Some(word) => {
                    let c_bob: Vec<bool> = word.iter().zip(&l).map(|(a, b)| a ^ b).collect();
                    let errors = delivered
                        .iter()
                        .filter(|&&p| received[p] != Some(c_bob[p]))
                        .count();
                    let qber = if delivered.is_empty() {
                        0.5
                    } else {
                        errors as f64 / delivered.len() as f64
                    };
                    (LinkEstimate::new(gain, qber, channel.phase_error(), self.config.f), Some(c_bob))
                }
                None => {
                    let qber = prev.map_or(self.config.initial_flip, |e| e.qber);
                    (LinkEstimate::new(gain, qber, channel.phase_error(), self.config.f), None)
                }
            };

            if kind == FrameKind::Data {
                match (&decoded, payload_bits) {
                    (Some(word), _) => {
                        let base: Vec<bool> = word.iter().step_by(self.code.repeat()).copied().collect();
                        let info = self.code.ldpc().extract_info(&base);
                        bob.received.extend(info[..payload_bits].iter().map(|&b| Some(b)));
                    }
                    (None, n) => bob.received.extend(std::iter::repeat_n(None, n)),
                }
            }

            // SSTS extraction from delivered positions
            let r = self.code.rate();
            let mut extracted = 0;
            if let Some(c_bob) = &c_bob {
                if estimate.i_ab > r && r > estimate.i_ae {
                    let count = estimate.secure_capacity(self.code.n_ci(), r).min(delivered.len());
                    let mut order = delivered.clone();
                    order.shuffle(&mut extraction_rng(self.config.code_seed, index));
                    order.truncate(count);
                    let a: Vec<bool> = order.iter().map(|&p| c[p]).collect();
                    let b: Vec<bool> = order.iter().map(|&p| c_bob[p]).collect();
                    alice.pool.extend(&a);
                    bob.pool.extend(&b);
                    extracted = count;
                }
            }

            // Bob finishes any block whose precoded bits have all arrived
            let block_len = self.fec.block_len();
            while bob.received.len() >= block_len {
                let chunk: Vec<Option<bool>> = bob.received.drain(..block_len).collect();
                let pad = bob.pads.pop_front().ok_or(Error::PoolUnderflow {
                    requested: m,
                    available: 0,
                })?;
                match self.fec.decode(&chunk, FEC_FLIP_PRIOR) {
                    Ok(y) => bob.message.extend(y.iter().zip(&pad).map(|(a, b)| a ^ b)),
                    Err(e) => {
                        bob.message.extend(std::iter::repeat_n(false, m));
                        if report.failure.is_none() {
                            report.failure = Some(PipelineFailure {
                                frame: index,
                                kind: FailureKind::Decode,
                                message: e.to_string(),
                                directive: None,
                            });
                        }
                    }
                }
            }

            report.frames.push(FrameTranscript {
                index,
                kind,
                config: cfg,
                check,
                payload_bits,
                delivered: delivered.len(),
                disclosed_positions: delivered,
                decoded: decoded.is_some(),
                estimate: Some(estimate),
                extracted,
                pool_alice: alice.pool.available(),
                pool_bob: bob.pool.available(),
                pools_equal: alice.pool == bob.pool,
            });
            prev = Some(estimate);
        }

        report.channel_uses = channel.uses() - start_uses;
        bob.message.truncate(message.len());
        report.success = report.failure.is_none() && bob.message == message;
        *alice_pool = alice.pool;
        *bob_pool = bob.pool;
        Ok(PipelineOutcome {
            message: bob.message,
            report,
        })
    }
}

/// A refusal right after an undecodable frame is reported as that frame's
/// decode failure.
fn refusal(report: &PipelineReport, frame: u64, reason: String, check: &RateCheck) -> PipelineFailure {
    let last = report.frames.last().map(|f| (f.index, f.decoded));
    match last {
        Some((failed, false)) => PipelineFailure {
            frame: failed,
            kind: FailureKind::Decode,
            message: format!("frame {failed} could not be decoded; frame {frame} refused: {reason}"),
            directive: Some(replenish_directive(check)),
        },
        _ => PipelineFailure {
            frame,
            kind: FailureKind::Refused,
            message: reason,
            directive: Some(replenish_directive(check)),
        },
    }
}

fn extraction_rng(code_seed: u64, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(code_seed);
    rng.set_stream(frame);
    rng
}

fn replenish_directive(check: &RateCheck) -> String {
    match (check.security_margin, check.reliability_margin) {
        (_, Some(rel)) if rel <= 0.0 => {
            "re-estimate the channel and lower the code rate below I(A:B) before resuming".into()
        }
        _ => "replenish the secret pool with bootstrap frames at a smaller secure payload".into(),
    }
}

/// Runs `pipeline` on `message` with caller-held pools.
pub fn run_frame_pipeline<C: BitChannel>(
    message: &[bool],
    pipeline: &FramePipeline,
    channel: &mut C,
    pools: (&mut SstsPool, &mut SstsPool),
    seed: u64,
) -> Result<PipelineOutcome> {
    pipeline.run_with_pools(message, channel, pools.0, pools.1, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::channel::SyntheticChannel;

    fn cfg(index: u64, k: usize, n: usize, r: f64) -> FrameConfig {
        FrameConfig {
            frame_index: index,
            k_i: k,
            n_ci: n,
            r_i: r,
        }
    }

    #[test]
    fn rate_condition_examples() {
        let est = LinkEstimate {
            gain: 1.0,
            qber: 0.0,
            phase_error: 0.0,
            i_ab: 0.7,
            i_ae: 0.1,
        };
        assert!(check_rate_conditions(&cfg(2, 400, 1000, 0.5), Some(&est)).unwrap().accepted);
        let bad = check_rate_conditions(&cfg(2, 450, 1000, 0.5), Some(&est)).unwrap();
        assert!(!bad.accepted);
        assert!(bad.reason.unwrap().starts_with("security"));
        let unreliable = check_rate_conditions(&cfg(2, 100, 1000, 0.8), Some(&est)).unwrap();
        assert!(!unreliable.accepted);
        assert!(unreliable.reason.unwrap().contains("reliability"));
    }

    #[test]
    fn missing_estimates() {
        assert!(check_rate_conditions(&cfg(1, 10, 100, 0.5), None).unwrap().bootstrap);
        assert_eq!(
            check_rate_conditions(&cfg(3, 10, 100, 0.5), None),
            Err(Error::MissingEstimates { frame: 3 })
        );
    }

    #[test]
    fn link_estimate_formulas() {
        let e = LinkEstimate::new(0.5, 0.11, 0.2, 1.2);
        assert!((e.i_ab - 0.5 * (1.0 - 1.2 * entropy(0.11))).abs() < 1e-15);
        assert!((e.i_ae - 0.5 * entropy(0.2)).abs() < 1e-15);
        assert_eq!(e.secure_capacity(1000, 0.1), 0);
    }

    #[test]
    fn short_message_over_noisy_channel() {
        let pipeline = FramePipeline::new(PipelineConfig::default()).unwrap();
        let mut channel = SyntheticChannel::new(0.01, 0.05, 1).unwrap();
        let message: Vec<bool> = (0..700).map(|i| (i * 7) % 5 < 2).collect();
        let out = pipeline.run(&message, &mut channel, 2).unwrap();
        assert!(out.report.success, "{:?}", out.report.failure);
        assert_eq!(out.message, message);
        assert_eq!(out.report.frames[0].kind, FrameKind::Bootstrap);
        assert!(out.report.pools_always_equal());
    }

    #[test]
    fn excessive_noise_is_flagged_as_decode_failure() {
        let pipeline = FramePipeline::new(PipelineConfig::default()).unwrap();
        let mut channel = SyntheticChannel::new(0.2, 0.0, 7).unwrap();
        let out = pipeline.run(&[true; 100], &mut channel, 8).unwrap();
        let failure = out.report.failure.unwrap();
        assert_eq!(failure.kind, FailureKind::Decode);
        assert_eq!(failure.frame, 1);
        assert_eq!(out.report.decode_failures, [1]);
    }

    #[test]
    fn empty_message_needs_no_frames() {
        let pipeline = FramePipeline::new(PipelineConfig::default()).unwrap();
        let mut channel = SyntheticChannel::new(0.0, 0.0, 1).unwrap();
        let out = pipeline.run(&[], &mut channel, 0).unwrap();
        assert!(out.report.success);
        assert!(out.report.frames.is_empty());
    }

    #[test]
    fn refuses_frames_once_the_link_degrades() {
        let pipeline = FramePipeline::new(PipelineConfig::default()).unwrap();
        // clean bits, but Eve's share exceeds the code rate
        let mut channel = SyntheticChannel::new(0.0, 0.0, 3)
            .unwrap()
            .with_phase_error(0.3)
            .unwrap();
        let out = pipeline.run(&[true; 64], &mut channel, 4).unwrap();
        let failure = out.report.failure.clone().unwrap();
        assert_eq!(failure.kind, FailureKind::Refused);
        assert_eq!(failure.frame, 2);
        assert!(failure.directive.is_some());
        assert!(out.report.frames[0].decoded);
        assert_eq!(out.report.frames[0].extracted, 0);
        // only the admitted bootstrap frame touched the channel
        assert_eq!(out.report.channel_uses, pipeline.code().n_ci() as u64);
        assert!(!out.report.success);
    }

    #[test]
    fn prefilled_pools_skip_bootstrap() {
        let config = PipelineConfig {
            fec: "identity".into(),
            fec_block: 32,
            ..PipelineConfig::default()
        };
        let pipeline = FramePipeline::new(config).unwrap();
        let mut a = SstsPool::new();
        let mut b = SstsPool::new();
        let secret: Vec<bool> = (0..64).map(|i| i % 3 == 1).collect();
        a.extend(&secret);
        b.extend(&secret);
        let mut channel = SyntheticChannel::new(0.0, 0.0, 5).unwrap();
        let message = vec![true; 32];
        let out = run_frame_pipeline(&message, &pipeline, &mut channel, (&mut a, &mut b), 6).unwrap();
        assert!(out.report.success);
        assert_eq!(out.report.frames[0].kind, FrameKind::Data);
        assert_eq!(a, b);
        assert_eq!(a.consumed(), 32);
    }
}
