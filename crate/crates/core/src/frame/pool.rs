//! Pool of secret shared bits (SSTS) held by one endpoint.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// FIFO of shared secret bits. Bits are consumed from the front and
/// extractions are appended at the back, so two endpoints that apply the
/// same sequence of operations hold the same pool.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SstsPool {
    bits: VecDeque<bool>,
    consumed: u64,
    extracted: u64,
}

impl SstsPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn available(&self) -> usize {
        self.bits.len()
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn extracted(&self) -> u64 {
        self.extracted
    }

    pub fn extend(&mut self, bits: &[bool]) {
        self.bits.extend(bits);
        self.extracted += bits.len() as u64;
    }

    /// Removes `k` bits; on underflow nothing is consumed.
    pub fn take(&mut self, k: usize) -> Result<Vec<bool>> {
        if k > self.bits.len() {
            return Err(Error::PoolUnderflow {
                requested: k,
                available: self.bits.len(),
            });
        }
        self.consumed += k as u64;
        Ok(self.bits.drain(..k).collect())
    }
}

fn xor(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

/// One-time-pad `Y = M ⊕ S` with `S` drawn from the pool.
pub fn ssts_encrypt(m: &[bool], pool: &mut SstsPool) -> Result<Vec<bool>> {
    let s = pool.take(m.len())?;
    Ok(xor(m, &s))
}

/// `M = Y ⊕ S`.
pub fn ssts_decrypt(y: &[bool], pool: &mut SstsPool) -> Result<Vec<bool>> {
    ssts_encrypt(y, pool)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encrypt_decrypt_with_synchronised_pools() {
        let secret = [true, false, false, true, true];
        let (mut a, mut b) = (SstsPool::new(), SstsPool::new());
        a.extend(&secret);
        b.extend(&secret);
        let m = [true, true, false, false];
        let y = ssts_encrypt(&m, &mut a).unwrap();
        assert_eq!(y, [false, true, false, true]);
        assert_eq!(ssts_decrypt(&y, &mut b).unwrap(), m);
        assert_eq!(a, b);
        assert_eq!(a.available(), 1);
    }

    #[test]
    fn underflow_leaves_pool_untouched() {
        let mut p = SstsPool::new();
        p.extend(&[true; 3]);
        assert_eq!(
            p.take(4),
            Err(Error::PoolUnderflow {
                requested: 4,
                available: 3
            })
        );
        assert_eq!(p.available(), 3);
        assert_eq!(p.consumed(), 0);
    }

    #[test]
    fn fifo_order() {
        let mut p = SstsPool::new();
        p.extend(&[true, false]);
        p.extend(&[false]);
        assert_eq!(p.take(2).unwrap(), [true, false]);
        assert_eq!(p.take(1).unwrap(), [false]);
        assert_eq!(p.extracted(), 3);
    }
}
