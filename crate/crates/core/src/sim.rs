//! Pulse-level Monte Carlo of mode preparation, single-photon interference at
//! Charlie, threshold detection, sifting and parameter estimation.
//!
//! Detection works at the intensity level: coherent states reaching the
//! detectors have Poissonian photon numbers, so each detector clicks with
//! probability `1 - (1 - p_d) e^{-mu}`. With `truth_access` the photon number
//! is sampled explicitly, which lets per-photon-number yields be tabulated.
//!
//! Campaigns are split into shards, each with its own ChaCha stream derived
//! from the master seed. For a fixed `(seed, shards)` the report is
//! bit-identical regardless of scheduling; different shard counts give
//! statistically compatible but different reports.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{system_transmittance, MisalignmentSim, SystemParams};
use crate::rates::{gain, x_error};

/// Largest photon number tabulated in truth-access mode.
pub const MAX_PHOTON_TAG: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Coding,
    MultiIntensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntensityLevel {
    Signal,
    Decoy1,
    Decoy2,
    Vacuum,
}

impl IntensityLevel {
    pub const DECOYS: [IntensityLevel; 3] = [Self::Decoy1, Self::Decoy2, Self::Vacuum];

    pub fn intensity(self, params: &SystemParams) -> f64 {
        match self {
            Self::Signal => params.u,
            Self::Decoy1 => params.nu1,
            Self::Decoy2 => params.nu2,
            Self::Vacuum => 0.0,
        }
    }

    fn decoy_index(self) -> Option<usize> {
        match self {
            Self::Decoy1 => Some(0),
            Self::Decoy2 => Some(1),
            Self::Vacuum => Some(2),
            Self::Signal => None,
        }
    }
}

/// What one party sent in a round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSetting {
    pub mode: Mode,
    /// Logical bit, coding mode only.
    pub bit: Option<bool>,
    pub level: IntensityLevel,
    pub intensity: f64,
    /// Radians in `[0, 2π)`.
    pub phase: f64,
    /// Phase slice index, multi-intensity mode only.
    pub phase_slice: Option<u32>,
}

/// One protocol round: both parties' choices and Charlie's announcement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub alice: PulseSetting,
    pub bob: PulseSetting,
    /// `m_C`: detector D0 clicked.
    pub click_c: bool,
    /// `m_D`: detector D1 clicked.
    pub click_d: bool,
    /// Sampled photon number, truth-access mode only.
    pub photon_tag: Option<u32>,
}

impl PulseRecord {
    pub fn one_click(&self) -> bool {
        self.click_c != self.click_d
    }
}

fn prepare_setting<R: Rng + ?Sized>(
    params: &SystemParams,
    rng: &mut R,
    forced_bit: Option<bool>,
) -> PulseSetting {
    if rng.random::<f64>() < params.p_multi {
        let level = IntensityLevel::DECOYS[rng.random_range(0..3)];
        let phase = rng.random::<f64>() * TAU;
        let slices = params.phase_slices;
        let slice = ((phase / TAU * slices as f64) as u32).min(slices - 1);
        PulseSetting {
            mode: Mode::MultiIntensity,
            bit: None,
            level,
            intensity: level.intensity(params),
            phase,
            phase_slice: Some(slice),
        }
    } else {
        let bit = forced_bit.unwrap_or_else(|| rng.random());
        PulseSetting {
            mode: Mode::Coding,
            bit: Some(bit),
            level: IntensityLevel::Signal,
            intensity: params.u,
            phase: if bit { PI } else { 0.0 },
            phase_slice: None,
        }
    }
}

/// Draws both parties' settings. Alice's coding bit comes from `alice_bit`
/// when the round carries codeword data, otherwise it is uniform.
pub fn prepare_round<R: Rng + ?Sized>(
    params: &SystemParams,
    rng: &mut R,
    alice_bit: Option<bool>,
) -> PulseRecord {
    let alice = prepare_setting(params, rng, alice_bit);
    let bob = prepare_setting(params, rng, None);
    PulseRecord {
        alice,
        bob,
        click_c: false,
        click_d: false,
        photon_tag: None,
    }
}

/// Charlie's interferometer and threshold detectors at a fixed distance.
#[derive(Debug, Clone, Copy)]
pub struct Detector {
    pub eta: f64,
    pub p_d: f64,
    pub offset: f64,
    pub jitter: MisalignmentSim,
}

impl Detector {
    pub fn new(params: &SystemParams, d: f64) -> Result<Self> {
        Ok(Self {
            eta: system_transmittance(params, d)?,
            p_d: params.p_d,
            offset: params.misalignment_phase(),
            jitter: params.misalignment_sim,
        })
    }

    fn phase_offset<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.jitter {
            MisalignmentSim::FixedOffset => self.offset,
            MisalignmentSim::RandomSign => {
                if rng.random() {
                    self.offset
                } else {
                    -self.offset
                }
            }
        }
    }

    /// Mean photon numbers `(mu_C, mu_D)` arriving at D0 and D1 for a phase
    /// difference `delta = phi_b - phi_a` (misalignment included).
    pub fn means(&self, pulse: &PulseRecord, delta: f64) -> (f64, f64) {
        let (ia, ib) = (pulse.alice.intensity, pulse.bob.intensity);
        let cross = 2.0 * (ia * ib).sqrt() * delta.cos();
        let mu_c = self.eta * (ia + ib + cross) / 2.0;
        let mu_d = self.eta * (ia + ib - cross) / 2.0;
        (mu_c.max(0.0), mu_d.max(0.0))
    }

    fn delta<R: Rng + ?Sized>(&self, pulse: &PulseRecord, rng: &mut R) -> f64 {
        pulse.bob.phase - pulse.alice.phase + self.phase_offset(rng)
    }

    /// Samples `(click_C, click_D)`.
    pub fn detect<R: Rng + ?Sized>(&self, pulse: &PulseRecord, rng: &mut R) -> (bool, bool) {
        let delta = self.delta(pulse, rng);
        let (mu_c, mu_d) = self.means(pulse, delta);
        let click_c = rng.random::<f64>() >= (1.0 - self.p_d) * (-mu_c).exp();
        let click_d = rng.random::<f64>() >= (1.0 - self.p_d) * (-mu_d).exp();
        (click_c, click_d)
    }

    /// Photon-resolved detection: samples the photon number entering the
    /// channel, loss and beam-splitter routing, then dark counts.
    pub fn detect_photons<R: Rng + ?Sized>(
        &self,
        pulse: &PulseRecord,
        rng: &mut R,
    ) -> (bool, bool, u32) {
        let delta = self.delta(pulse, rng);
        let (mu_c, mu_d) = self.means(pulse, delta);
        let total = pulse.alice.intensity + pulse.bob.intensity;
        let n = if total > 0.0 {
            Poisson::new(total).map(|p| p.sample(rng) as u64).unwrap_or(0)
        } else {
            0
        };
        let (mut hits_c, mut hits_d) = (0, 0);
        if n > 0 && self.eta > 0.0 {
            let survived = Binomial::new(n, self.eta).map(|b| b.sample(rng)).unwrap_or(0);
            let to_c = if mu_c + mu_d > 0.0 { mu_c / (mu_c + mu_d) } else { 0.5 };
            hits_c = Binomial::new(survived, to_c.clamp(0.0, 1.0))
                .map(|b| b.sample(rng))
                .unwrap_or(0);
            hits_d = survived - hits_c;
        }
        let click_c = hits_c > 0 || rng.random::<f64>() < self.p_d;
        let click_d = hits_d > 0 || rng.random::<f64>() < self.p_d;
        (click_c, click_d, n.min(u32::MAX as u64) as u32)
    }
}

/// Fills in the detector outcome of a prepared pulse.
pub fn interfere_and_detect<R: Rng + ?Sized>(
    pulse: &mut PulseRecord,
    detector: &Detector,
    rng: &mut R,
) {
    let (c, d) = detector.detect(pulse, rng);
    pulse.click_c = c;
    pulse.click_d = d;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiftClass {
    /// Coding/coding round with exactly one click.
    Coding,
    /// Multi/multi round, one click, equal intensities, matched phase slices.
    Decoy,
    Discarded,
}

fn slices_match(a: u32, b: u32, slices: u32) -> bool {
    let diff = (a + slices - b) % slices;
    diff == 0 || (slices.is_multiple_of(2) && diff == slices / 2)
}

/// Multi/multi round with equal intensities and matched phase slices,
/// regardless of the click pattern.
pub fn decoy_matched(record: &PulseRecord, slices: u32) -> bool {
    match (record.alice.phase_slice, record.bob.phase_slice) {
        (Some(a), Some(b)) => {
            record.alice.mode == Mode::MultiIntensity
                && record.bob.mode == Mode::MultiIntensity
                && record.alice.level == record.bob.level
                && slices_match(a, b, slices)
        }
        _ => false,
    }
}

pub fn classify(record: &PulseRecord, slices: u32) -> SiftClass {
    if !record.one_click() {
        return SiftClass::Discarded;
    }
    match (record.alice.mode, record.bob.mode) {
        (Mode::Coding, Mode::Coding) => SiftClass::Coding,
        (Mode::MultiIntensity, Mode::MultiIntensity) if decoy_matched(record, slices) => {
            SiftClass::Decoy
        }
        _ => SiftClass::Discarded,
    }
}

/// Whether a kept coding round contradicts the encoded bit relation: D0
/// should fire for equal bits, D1 for opposite bits.
pub fn is_bit_error(record: &PulseRecord) -> bool {
    let same = record.alice.bit == record.bob.bit;
    same != record.click_c
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SiftedSets {
    pub coding_kept: Vec<PulseRecord>,
    pub decoy_kept: Vec<PulseRecord>,
    pub discarded: Vec<PulseRecord>,
    /// All coding/coding rounds, including no-click and double-click ones.
    pub coding_rounds: u64,
    /// Matched decoy rounds per level (ν1, ν2, vacuum), any click pattern.
    pub decoy_rounds: [u64; 3],
}

pub fn sift(records: &[PulseRecord], slices: u32) -> SiftedSets {
    let mut out = SiftedSets::default();
    for r in records {
        if r.alice.mode == Mode::Coding && r.bob.mode == Mode::Coding {
            out.coding_rounds += 1;
        }
        if decoy_matched(r, slices) {
            if let Some(i) = r.alice.level.decoy_index() {
                out.decoy_rounds[i] += 1;
            }
        }
        match classify(r, slices) {
            SiftClass::Coding => out.coding_kept.push(*r),
            SiftClass::Decoy => out.decoy_kept.push(*r),
            SiftClass::Discarded => out.discarded.push(*r),
        }
    }
    out
}

/// Mergeable integer counters; merging is associative and commutative.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub rounds: u64,
    pub mode_matched: u64,
    pub coding_rounds: u64,
    pub coding_kept: u64,
    pub coding_errors: u64,
    pub disclosed: u64,
    pub disclosed_errors: u64,
    pub decoy_rounds: [u64; 3],
    pub decoy_kept: [u64; 3],
    /// Coding/coding rounds per sampled photon number (truth-access only).
    pub tagged_rounds: Vec<u64>,
    pub tagged_one_click: Vec<u64>,
}

impl Tally {
    pub fn merge(&mut self, other: &Tally) {
        self.rounds += other.rounds;
        self.mode_matched += other.mode_matched;
        self.coding_rounds += other.coding_rounds;
        self.coding_kept += other.coding_kept;
        self.coding_errors += other.coding_errors;
        self.disclosed += other.disclosed;
        self.disclosed_errors += other.disclosed_errors;
        for i in 0..3 {
            self.decoy_rounds[i] += other.decoy_rounds[i];
            self.decoy_kept[i] += other.decoy_kept[i];
        }
        if self.tagged_rounds.len() < other.tagged_rounds.len() {
            self.tagged_rounds.resize(other.tagged_rounds.len(), 0);
            self.tagged_one_click.resize(other.tagged_one_click.len(), 0);
        }
        for (i, (&n, &k)) in other
            .tagged_rounds
            .iter()
            .zip(&other.tagged_one_click)
            .enumerate()
        {
            self.tagged_rounds[i] += n;
            self.tagged_one_click[i] += k;
        }
    }

    /// Accounts one completed round. `disclose` marks kept coding rounds whose
    /// bits are published for QBER estimation.
    pub fn record(&mut self, r: &PulseRecord, slices: u32, disclose: bool) {
        self.rounds += 1;
        if r.alice.mode == r.bob.mode {
            self.mode_matched += 1;
        }
        let coding = r.alice.mode == Mode::Coding && r.bob.mode == Mode::Coding;
        if coding {
            self.coding_rounds += 1;
            if let Some(tag) = r.photon_tag {
                let slot = tag.min(MAX_PHOTON_TAG) as usize;
                if self.tagged_rounds.len() <= slot {
                    self.tagged_rounds.resize(MAX_PHOTON_TAG as usize + 1, 0);
                    self.tagged_one_click.resize(MAX_PHOTON_TAG as usize + 1, 0);
                }
                self.tagged_rounds[slot] += 1;
                self.tagged_one_click[slot] += u64::from(r.one_click());
            }
        }
        if decoy_matched(r, slices) {
            if let Some(i) = r.alice.level.decoy_index() {
                self.decoy_rounds[i] += 1;
                self.decoy_kept[i] += u64::from(r.one_click());
            }
        }
        if coding && r.one_click() {
            self.coding_kept += 1;
            let err = is_bit_error(r);
            self.coding_errors += u64::from(err);
            if disclose {
                self.disclosed += 1;
                self.disclosed_errors += u64::from(err);
            }
        }
    }
}

/// Binomial proportion with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    pub successes: u64,
    pub trials: u64,
}

impl Estimate {
    /// `None` for an empty sample.
    pub fn binomial(successes: u64, trials: u64) -> Option<Self> {
        (trials > 0).then(|| {
            let value = successes as f64 / trials as f64;
            Self {
                value,
                std_err: (value * (1.0 - value) / trials as f64).sqrt(),
                successes,
                trials,
            }
        })
    }

    /// `(value - expected) / sigma` with the binomial sigma evaluated at the
    /// expected proportion.
    pub fn z_score(&self, expected: f64) -> f64 {
        let sigma = (expected * (1.0 - expected) / self.trials as f64).sqrt();
        if sigma > 0.0 {
            (self.value - expected) / sigma
        } else if self.value == expected {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoyEstimate {
    pub level: IntensityLevel,
    pub intensity: f64,
    pub gain: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldEstimate {
    pub photons: u32,
    pub estimate: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub n_pulses: u64,
    pub distance_km: f64,
    pub seed: Option<u64>,
    pub shards: Option<u32>,
    pub params_digest: String,
    pub mode_match: Option<Estimate>,
    pub coding_rounds: u64,
    pub kept_coding: u64,
    /// One-click fraction among coding/coding rounds.
    pub gain: Option<Estimate>,
    /// QBER over all kept coding rounds.
    pub x_error: Option<Estimate>,
    /// QBER over the randomly disclosed subset only.
    pub x_error_disclosed: Option<Estimate>,
    pub decoys: Vec<DecoyEstimate>,
    /// Per-photon-number yields, truth-access mode only.
    pub yields: Option<Vec<YieldEstimate>>,
}

impl SimReport {
    pub fn from_tally(tally: &Tally, params: &SystemParams, distance_km: f64) -> Self {
        let yields = (!tally.tagged_rounds.is_empty()).then(|| {
            tally
                .tagged_rounds
                .iter()
                .zip(&tally.tagged_one_click)
                .enumerate()
                .map(|(n, (&rounds, &clicks))| YieldEstimate {
                    photons: n as u32,
                    estimate: Estimate::binomial(clicks, rounds),
                })
                .collect()
        });
        Self {
            n_pulses: tally.rounds,
            distance_km,
            seed: None,
            shards: None,
            params_digest: params.digest(),
            mode_match: Estimate::binomial(tally.mode_matched, tally.rounds),
            coding_rounds: tally.coding_rounds,
            kept_coding: tally.coding_kept,
            gain: Estimate::binomial(tally.coding_kept, tally.coding_rounds),
            x_error: Estimate::binomial(tally.coding_errors, tally.coding_kept),
            x_error_disclosed: Estimate::binomial(tally.disclosed_errors, tally.disclosed),
            decoys: IntensityLevel::DECOYS
                .iter()
                .enumerate()
                .map(|(i, &level)| DecoyEstimate {
                    level,
                    intensity: level.intensity(params),
                    gain: Estimate::binomial(tally.decoy_kept[i], tally.decoy_rounds[i]),
                })
                .collect(),
            yields,
        }
    }
}

/// Builds a report from sifted records. Disclosure for the sampled QBER is
/// drawn from `rng` with probability `sacrifice_fraction`. Per-photon yields
/// are tabulated when `truth_access` is set and the records carry tags.
pub fn estimate_parameters<R: Rng + ?Sized>(
    sifted: &SiftedSets,
    params: &SystemParams,
    distance_km: f64,
    truth_access: bool,
    rng: &mut R,
) -> SimReport {
    let mut tally = Tally {
        coding_rounds: sifted.coding_rounds,
        decoy_rounds: sifted.decoy_rounds,
        ..Tally::default()
    };
    tally.rounds =
        (sifted.coding_kept.len() + sifted.decoy_kept.len() + sifted.discarded.len()) as u64;
    let all = sifted
        .coding_kept
        .iter()
        .chain(&sifted.decoy_kept)
        .chain(&sifted.discarded);
    for r in all {
        if r.alice.mode == r.bob.mode {
            tally.mode_matched += 1;
        }
    }
    for r in &sifted.coding_kept {
        tally.coding_kept += 1;
        let err = is_bit_error(r);
        tally.coding_errors += u64::from(err);
        if rng.random::<f64>() < params.sacrifice_fraction {
            tally.disclosed += 1;
            tally.disclosed_errors += u64::from(err);
        }
    }
    for r in &sifted.decoy_kept {
        if let Some(i) = r.alice.level.decoy_index() {
            tally.decoy_kept[i] += 1;
        }
    }
    if truth_access {
        let coding = sifted
            .coding_kept
            .iter()
            .chain(&sifted.discarded)
            .filter(|r| r.alice.mode == Mode::Coding && r.bob.mode == Mode::Coding);
        for r in coding {
            if let Some(tag) = r.photon_tag {
                let slot = tag.min(MAX_PHOTON_TAG) as usize;
                if tally.tagged_rounds.is_empty() {
                    tally.tagged_rounds = vec![0; MAX_PHOTON_TAG as usize + 1];
                    tally.tagged_one_click = vec![0; MAX_PHOTON_TAG as usize + 1];
                }
                tally.tagged_rounds[slot] += 1;
                tally.tagged_one_click[slot] += u64::from(r.one_click());
            }
        }
    }
    SimReport::from_tally(&tally, params, distance_km)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignOptions {
    /// Sample explicit photon numbers and tabulate yields.
    pub truth_access: bool,
}

/// RNG stream for one shard of a campaign.
pub fn shard_rng(seed: u64, shard: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard as u64);
    rng
}

/// Number of pulses handled by `shard`.
pub fn shard_len(n_pulses: u64, shards: u32, shard: u32) -> u64 {
    let base = n_pulses / shards as u64;
    base + u64::from((shard as u64) < n_pulses % shards as u64)
}

fn run_shard(
    params: &SystemParams,
    detector: &Detector,
    pulses: u64,
    mut rng: ChaCha8Rng,
    options: CampaignOptions,
) -> Tally {
    let mut tally = Tally::default();
    if options.truth_access {
        tally.tagged_rounds = vec![0; MAX_PHOTON_TAG as usize + 1];
        tally.tagged_one_click = vec![0; MAX_PHOTON_TAG as usize + 1];
    }
    for _ in 0..pulses {
        let mut record = prepare_round(params, &mut rng, None);
        if options.truth_access {
            let (c, d, n) = detector.detect_photons(&record, &mut rng);
            record.click_c = c;
            record.click_d = d;
            record.photon_tag = Some(n);
        } else {
            interfere_and_detect(&mut record, detector, &mut rng);
        }
        let disclose = rng.random::<f64>() < params.sacrifice_fraction;
        tally.record(&record, params.phase_slices, disclose);
    }
    tally
}

/// Runs `n_pulses` rounds split over `shards` independent streams.
pub fn run_campaign(
    params: &SystemParams,
    d: f64,
    n_pulses: u64,
    seed: u64,
    shards: u32,
    options: CampaignOptions,
) -> Result<SimReport> {
    params.validate()?;
    if shards == 0 {
        return Err(Error::InvalidParameter {
            name: "shards",
            value: 0.0,
            reason: "must be >= 1",
        });
    }
    let detector = Detector::new(params, d)?;
    let job = |shard: u32| {
        run_shard(
            params,
            &detector,
            shard_len(n_pulses, shards, shard),
            shard_rng(seed, shard),
            options,
        )
    };
    #[cfg(feature = "parallel")]
    let tallies: Vec<Tally> = {
        use rayon::prelude::*;
        (0..shards).into_par_iter().map(job).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let tallies: Vec<Tally> = (0..shards).map(job).collect();

    let mut total = Tally::default();
    for t in &tallies {
        total.merge(t);
    }
    let mut report = SimReport::from_tally(&total, params, d);
    report.seed = Some(seed);
    report.shards = Some(shards);
    Ok(report)
}

/// Analytic predictions next to the empirical estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticComparison {
    pub gain_analytic: f64,
    pub gain_empirical: Option<f64>,
    pub gain_z: Option<f64>,
    pub x_error_analytic: f64,
    pub x_error_empirical: Option<f64>,
    pub x_error_z: Option<f64>,
}

pub fn compare_with_analytic(report: &SimReport, params: &SystemParams) -> Result<AnalyticComparison> {
    let eta = system_transmittance(params, report.distance_km)?;
    let gain_analytic = gain(params.u, eta, params.p_d)?;
    let x_error_analytic = x_error(params.u, eta, params.p_d, params.misalignment())?;
    Ok(AnalyticComparison {
        gain_analytic,
        gain_empirical: report.gain.map(|e| e.value),
        gain_z: report.gain.map(|e| e.z_score(gain_analytic)),
        x_error_analytic,
        x_error_empirical: report.x_error.map(|e| e.value),
        x_error_z: report.x_error.map(|e| e.z_score(x_error_analytic)),
    })
}
