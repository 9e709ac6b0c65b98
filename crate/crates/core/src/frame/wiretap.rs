//! Wiretap coset coding, random masking and selective disclosure.
//!
//! A frame carries `k_i` secure bits in a length-`n_ci` LDPC codeword. The
//! remaining information positions are filled with fresh random bits so
//! that the secure bits select a coset rather than a single codeword. The
//! codeword is then masked with a one-time random string `L`; Alice only
//! reveals `L` at the positions Bob actually received.
//!
//! On very lossy links each LDPC bit can be spread over several channel
//! uses (an inner repetition code); the copies' likelihoods are summed
//! before belief propagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::ldpc::{bit_llr, random_bits, LdpcCode};

/// Per-frame coding parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    /// 1-based frame index.
    pub frame_index: u64,
    /// Secure bits carried by the frame.
    pub k_i: usize,
    /// Channel uses per frame.
    pub n_ci: usize,
    /// Code rate `dim / n_ci` in bits per channel use.
    pub r_i: f64,
}

impl FrameConfig {
    pub fn secure_rate(&self) -> f64 {
        self.k_i as f64 / self.n_ci as f64
    }
}

/// The public code shared by every frame of a session.
#[derive(Debug, Clone)]
pub struct SecureCode {
    code: LdpcCode,
    repeat: usize,
}

impl SecureCode {
    /// LDPC code of length `n` and rate at least `r`, from a public seed.
    pub fn new(n: usize, r: f64, seed: u64) -> Result<Self> {
        Self::with_repetition(n, r, 1, seed)
    }

    /// As [`SecureCode::new`], with every codeword bit sent `repeat` times.
    pub fn with_repetition(n: usize, r: f64, repeat: usize, seed: u64) -> Result<Self> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "r_i",
                value: r,
                reason: "must lie in (0, 1]",
            });
        }
        if repeat == 0 {
            return Err(Error::InvalidParameter {
                name: "repeat",
                value: 0.0,
                reason: "must be positive",
            });
        }
        let k = ((n as f64 * r).round() as usize).max(1);
        Ok(Self {
            code: LdpcCode::random(n, k, seed)?,
            repeat,
        })
    }

    /// Channel uses per frame.
    pub fn n_ci(&self) -> usize {
        self.code.len() * self.repeat
    }

    pub fn repeat(&self) -> usize {
        self.repeat
    }

    pub fn dimension(&self) -> usize {
        self.code.dimension()
    }

    /// Information bits per channel use.
    pub fn rate(&self) -> f64 {
        self.dimension() as f64 / self.n_ci() as f64
    }

    fn spread(&self, word: &[bool]) -> Vec<bool> {
        word.iter()
            .flat_map(|&b| std::iter::repeat_n(b, self.repeat))
            .collect()
    }

    pub fn ldpc(&self) -> &LdpcCode {
        &self.code
    }

    /// Frame configuration carrying `k_i` secure bits.
    pub fn frame_config(&self, frame_index: u64, k_i: usize) -> FrameConfig {
        FrameConfig {
            frame_index,
            k_i,
            n_ci: self.n_ci(),
            r_i: self.rate(),
        }
    }

    fn check_config(&self, cfg: &FrameConfig) -> Result<()> {
        if cfg.n_ci != self.n_ci() {
            return Err(Error::LengthMismatch {
                expected: self.n_ci(),
                actual: cfg.n_ci,
            });
        }
        if cfg.k_i > self.dimension() {
            return Err(Error::RateViolation(format!(
                "k_i = {} exceeds the code dimension {}",
                cfg.k_i,
                self.dimension()
            )));
        }
        Ok(())
    }
}

/// Coset-encodes `x` (length `cfg.k_i`) into a codeword `Z`.
pub fn secure_encode<R: Rng + ?Sized>(
    code: &SecureCode,
    cfg: &FrameConfig,
    x: &[bool],
    rng: &mut R,
) -> Result<Vec<bool>> {
    code.check_config(cfg)?;
    if x.len() != cfg.k_i {
        return Err(Error::LengthMismatch {
            expected: cfg.k_i,
            actual: x.len(),
        });
    }
    let mut info = x.to_vec();
    info.extend(random_bits(rng, code.dimension() - cfg.k_i));
    Ok(code.spread(&code.code.encode(&info)?))
}

/// Recovers the full channel-level codeword from a partially known noisy
/// `Z`.
pub fn decode_codeword(code: &SecureCode, received: &[Option<bool>], flip: f64) -> Result<Vec<bool>> {
    if received.len() != code.n_ci() {
        return Err(Error::LengthMismatch {
            expected: code.n_ci(),
            actual: received.len(),
        });
    }
    let confidence = bit_llr(flip);
    let llr: Vec<f64> = received
        .chunks(code.repeat)
        .map(|copies| {
            copies
                .iter()
                .map(|c| match c {
                    Some(false) => confidence,
                    Some(true) => -confidence,
                    None => 0.0,
                })
                .sum()
        })
        .collect();
    Ok(code.spread(&code.code.decode_llr(&llr)?))
}

/// Decodes and returns the `k_i` secure bits.
pub fn secure_decode(
    code: &SecureCode,
    cfg: &FrameConfig,
    received: &[Option<bool>],
    flip: f64,
) -> Result<Vec<bool>> {
    code.check_config(cfg)?;
    let word = decode_codeword(code, received, flip)?;
    let base: Vec<bool> = word.iter().step_by(code.repeat).copied().collect();
    let mut info = code.code.extract_info(&base);
    info.truncate(cfg.k_i);
    Ok(info)
}

/// `C = Z ⊕ L` with a fresh uniform `L`. Returns `(C, L)`.
pub fn mask<R: Rng + ?Sized>(z: &[bool], rng: &mut R) -> (Vec<bool>, Vec<bool>) {
    let l = random_bits(rng, z.len());
    let c = z.iter().zip(&l).map(|(a, b)| a ^ b).collect();
    (c, l)
}

/// `Z = C ⊕ L`.
pub fn unmask(c: &[bool], l: &[bool]) -> Result<Vec<bool>> {
    if c.len() != l.len() {
        return Err(Error::LengthMismatch {
            expected: c.len(),
            actual: l.len(),
        });
    }
    Ok(c.iter().zip(l).map(|(a, b)| a ^ b).collect())
}

/// Mask values Alice publishes for the positions Bob reported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disclosure {
    pub positions: Vec<usize>,
    pub values: Vec<bool>,
}

pub fn disclose(l: &[bool], positions: &[usize]) -> Result<Disclosure> {
    let values = positions
        .iter()
        .map(|&p| {
            l.get(p).copied().ok_or(Error::PositionOutOfRange {
                position: p,
                len: l.len(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Disclosure {
        positions: positions.to_vec(),
        values,
    })
}

/// Bob's view of `Z`: unmasked bits at disclosed positions, erasures
/// everywhere else.
pub fn unmask_disclosed(c_received: &[Option<bool>], disclosure: &Disclosure) -> Result<Vec<Option<bool>>> {
    let mut z = vec![None; c_received.len()];
    for (&p, &l) in disclosure.positions.iter().zip(&disclosure.values) {
        let slot = c_received.get(p).ok_or(Error::PositionOutOfRange {
            position: p,
            len: c_received.len(),
        })?;
        z[p] = slot.map(|c| c ^ l);
    }
    Ok(z)
}

/// Discloses `L` at `positions` and unmasks Bob's received string.
pub fn disclose_and_unmask(
    positions: &[usize],
    l: &[bool],
    c_received: &[Option<bool>],
) -> Result<Vec<Option<bool>>> {
    if l.len() != c_received.len() {
        return Err(Error::LengthMismatch {
            expected: l.len(),
            actual: c_received.len(),
        });
    }
    unmask_disclosed(c_received, &disclose(l, positions)?)
}

/// Positions where Bob holds a bit.
pub fn delivered_positions(c_received: &[Option<bool>]) -> Vec<usize> {
    c_received
        .iter()
        .enumerate()
        .filter_map(|(i, b)| b.map(|_| i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mask_then_unmask_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = random_bits(&mut rng, 100);
        let (c, l) = mask(&z, &mut rng);
        assert_ne!(c, z);
        assert_eq!(unmask(&c, &l).unwrap(), z);
        assert!(unmask(&c, &l[..99]).is_err());
    }

    #[test]
    fn disclosure_rejects_bad_positions() {
        let l = vec![true; 8];
        assert_eq!(
            disclose(&l, &[8]),
            Err(Error::PositionOutOfRange { position: 8, len: 8 })
        );
        let c = vec![Some(true); 8];
        assert!(disclose_and_unmask(&[1, 9], &l, &c).is_err());
        let z = disclose_and_unmask(&[1, 3], &l, &c).unwrap();
        assert_eq!(z[1], Some(false));
        assert_eq!(z[0], None);
    }

    #[test]
    fn coset_coding_roundtrip_with_full_disclosure() {
        let code = SecureCode::new(512, 0.5, 3).unwrap();
        let cfg = code.frame_config(1, 200);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_bits(&mut rng, 200);
        let z = secure_encode(&code, &cfg, &x, &mut rng).unwrap();
        let (c, l) = mask(&z, &mut rng);
        let received: Vec<_> = c.iter().map(|&b| Some(b)).collect();
        let all: Vec<usize> = (0..512).collect();
        let z_bob = disclose_and_unmask(&all, &l, &received).unwrap();
        assert_eq!(secure_decode(&code, &cfg, &z_bob, 0.01).unwrap(), x);
    }

    #[test]
    fn same_secret_lands_in_different_codewords() {
        let code = SecureCode::new(256, 0.5, 4).unwrap();
        let cfg = code.frame_config(1, 64);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_bits(&mut rng, 64);
        let a = secure_encode(&code, &cfg, &x, &mut rng).unwrap();
        let b = secure_encode(&code, &cfg, &x, &mut rng).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn decodes_with_eighty_percent_disclosed() {
        let code = SecureCode::new(1024, 0.5, 6).unwrap();
        let cfg = code.frame_config(1, 300);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut successes = 0;
        for _ in 0..20 {
            let x = random_bits(&mut rng, 300);
            let z = secure_encode(&code, &cfg, &x, &mut rng).unwrap();
            let (c, l) = mask(&z, &mut rng);
            let received: Vec<_> = c
                .iter()
                .map(|&b| (rng.random::<f64>() < 0.8).then_some(b))
                .collect();
            let delivered = delivered_positions(&received);
            let z_bob = disclose_and_unmask(&delivered, &l, &received).unwrap();
            successes += usize::from(secure_decode(&code, &cfg, &z_bob, 1e-4).ok() == Some(x));
        }
        assert!(successes >= 19, "{successes}/20");
    }

    #[test]
    fn repetition_survives_heavy_loss() {
        let code = SecureCode::with_repetition(256, 0.5, 40, 8).unwrap();
        assert_eq!(code.n_ci(), 256 * 40);
        let cfg = code.frame_config(1, 64);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_bits(&mut rng, 64);
        let z = secure_encode(&code, &cfg, &x, &mut rng).unwrap();
        let (c, l) = mask(&z, &mut rng);
        // 97% loss, 1% flips on what arrives
        let received: Vec<_> = c
            .iter()
            .map(|&b| (rng.random::<f64>() < 0.03).then(|| b ^ (rng.random::<f64>() < 0.01)))
            .collect();
        let z_bob = disclose_and_unmask(&delivered_positions(&received), &l, &received).unwrap();
        assert_eq!(secure_decode(&code, &cfg, &z_bob, 0.01).unwrap(), x);
        assert_eq!(decode_codeword(&code, &z_bob, 0.01).unwrap(), z);
    }

    #[test]
    fn oversized_frames_are_rejected() {
        let code = SecureCode::new(64, 0.5, 1).unwrap();
        let cfg = code.frame_config(1, code.dimension() + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = vec![false; cfg.k_i];
        assert!(matches!(
            secure_encode(&code, &cfg, &x, &mut rng),
            Err(Error::RateViolation(_))
        ));
    }
}
