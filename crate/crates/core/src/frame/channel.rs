//! Channels carrying masked codeword bits from Alice to Bob.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Result};
use crate::params::{system_transmittance, SystemParams};
use crate::rates::z_error;
use crate::sim::{interfere_and_detect, prepare_round, Detector, Mode};

/// Delivers one bit per channel use, or an erasure.
pub trait BitChannel {
    fn transmit(&mut self, bits: &[bool]) -> Vec<Option<bool>>;

    /// Phase-error rate used to bound Eve's information per delivered bit.
    fn phase_error(&self) -> f64;

    /// Channel uses consumed so far.
    fn uses(&self) -> u64;
}

/// Binary symmetric channel with independent erasures.
#[derive(Debug, Clone)]
pub struct SyntheticChannel {
    pub flip: f64,
    pub erasure: f64,
    /// Phase error attributed to the channel; defaults to `flip`.
    pub phase_error: f64,
    rng: ChaCha8Rng,
    uses: u64,
}

impl SyntheticChannel {
    pub fn new(flip: f64, erasure: f64, seed: u64) -> Result<Self> {
        check_probability("flip", flip)?;
        check_probability("erasure", erasure)?;
        Ok(Self {
            flip,
            erasure,
            phase_error: flip,
            rng: ChaCha8Rng::seed_from_u64(seed),
            uses: 0,
        })
    }

    pub fn with_phase_error(mut self, phase_error: f64) -> Result<Self> {
        check_probability("phase_error", phase_error)?;
        self.phase_error = phase_error;
        Ok(self)
    }
}

impl BitChannel for SyntheticChannel {
    fn transmit(&mut self, bits: &[bool]) -> Vec<Option<bool>> {
        self.uses += bits.len() as u64;
        bits.iter()
            .map(|&b| {
                let erased = self.rng.random::<f64>() < self.erasure;
                let flipped = self.rng.random::<f64>() < self.flip;
                (!erased).then_some(b ^ flipped)
            })
            .collect()
    }

    fn phase_error(&self) -> f64 {
        self.phase_error
    }

    fn uses(&self) -> u64 {
        self.uses
    }
}

/// Runs each bit through the pulse-level model: the bit rides on Alice's
/// next coding-mode pulse and Bob keeps `bob_bit ⊕ click_D` when he was
/// also in coding mode and exactly one detector fired. Multi-intensity
/// rounds in between are spent on decoys and counted as uses.
#[derive(Debug, Clone)]
pub struct PulseChannel {
    params: SystemParams,
    detector: Detector,
    phase_error: f64,
    rng: ChaCha8Rng,
    uses: u64,
}

impl PulseChannel {
    pub fn new(params: &SystemParams, d: f64, seed: u64) -> Result<Self> {
        params.validate()?;
        let eta = system_transmittance(params, d)?;
        let phase_error = z_error(params.u, eta, params.p_d, params.n_max, params.include_vacuum)?;
        Ok(Self {
            params: params.clone(),
            detector: Detector::new(params, d)?,
            phase_error,
            rng: ChaCha8Rng::seed_from_u64(seed),
            uses: 0,
        })
    }
}

impl BitChannel for PulseChannel {
    fn transmit(&mut self, bits: &[bool]) -> Vec<Option<bool>> {
        bits.iter()
            .map(|&bit| loop {
                self.uses += 1;
                let mut pulse = prepare_round(&self.params, &mut self.rng, Some(bit));
                if pulse.alice.mode != Mode::Coding {
                    continue;
                }
                interfere_and_detect(&mut pulse, &self.detector, &mut self.rng);
                let kept = pulse.bob.mode == Mode::Coding && pulse.one_click();
                break kept.then(|| pulse.bob.bit.unwrap_or(false) ^ pulse.click_d);
            })
            .collect()
    }

    fn phase_error(&self) -> f64 {
        self.phase_error
    }

    fn uses(&self) -> u64 {
        self.uses
    }
}

/// Serializable channel description for transcripts and front ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChannelSpec {
    Synthetic { flip: f64, erasure: f64 },
    Pulse { distance_km: f64 },
}
