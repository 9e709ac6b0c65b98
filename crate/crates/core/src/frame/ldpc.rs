//! Seeded random LDPC codes over GF(2).
//!
//! The parity-check matrix has column weight 3 (fewer when there are fewer
//! than three checks) with check degrees kept as even as possible. Encoding
//! is systematic through the reduced row echelon form of `H`; decoding is
//! sum-product belief propagation on the Tanner graph and handles erasures
//! (zero LLR) and bit flips together.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const COLUMN_WEIGHT: usize = 3;
const MAX_ITERATIONS: usize = 100;
const LLR_CAP: f64 = 40.0;

#[derive(Debug, Clone)]
pub struct LdpcCode {
    n: usize,
    /// Variable indices of each check.
    checks: Vec<Vec<usize>>,
    /// `(check, slot)` edges of each variable.
    var_edges: Vec<Vec<(usize, usize)>>,
    /// Free (systematic) columns, in increasing order.
    info_positions: Vec<usize>,
    /// For each pivot column, the free columns XORed into it.
    parity: Vec<(usize, Vec<usize>)>,
}

type BitRow = Vec<u64>;

fn get(row: &BitRow, j: usize) -> bool {
    row[j / 64] >> (j % 64) & 1 == 1
}

fn xor_into(dst: &mut BitRow, src: &BitRow) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

impl LdpcCode {
    /// Builds a length-`n` code with at least `k_target` information bits.
    pub fn random(n: usize, k_target: usize, seed: u64) -> Result<Self> {
        if n == 0 || k_target == 0 || k_target > n {
            return Err(Error::RateViolation(format!(
                "cannot build a code with n = {n}, k = {k_target}"
            )));
        }
        let m = n - k_target;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut checks: Vec<Vec<usize>> = vec![Vec::new(); m];
        let weight = COLUMN_WEIGHT.min(m);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut candidates: Vec<usize> = (0..m).collect();
        for &v in &order {
            // least-loaded checks first, random tie-break
            candidates.shuffle(&mut rng);
            candidates.sort_by_key(|&c| checks[c].len());
            for &c in candidates.iter().take(weight) {
                checks[c].push(v);
            }
        }
        for row in &mut checks {
            row.sort_unstable();
        }

        let mut var_edges = vec![Vec::new(); n];
        for (c, row) in checks.iter().enumerate() {
            for (slot, &v) in row.iter().enumerate() {
                var_edges[v].push((c, slot));
            }
        }

        // reduced row echelon form
        let words = n.div_ceil(64);
        let mut rows: Vec<BitRow> = checks
            .iter()
            .map(|vars| {
                let mut r = vec![0u64; words];
                for &v in vars {
                    r[v / 64] ^= 1 << (v % 64);
                }
                r
            })
            .collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..n {
            if rank == m {
                break;
            }
            let Some(found) = (rank..m).find(|&r| get(&rows[r], col)) else {
                continue;
            };
            rows.swap(rank, found);
            let pivot_row = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && get(row, col) {
                    xor_into(row, &pivot_row);
                }
            }
            pivots.push(col);
            rank += 1;
        }
        let mut is_pivot = vec![false; n];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let info_positions: Vec<usize> = (0..n).filter(|&j| !is_pivot[j]).collect();
        let parity = pivots
            .iter()
            .enumerate()
            .map(|(r, &p)| {
                let deps = info_positions
                    .iter()
                    .copied()
                    .filter(|&j| get(&rows[r], j))
                    .collect();
                (p, deps)
            })
            .collect();

        Ok(Self {
            n,
            checks,
            var_edges,
            info_positions,
            parity,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of information bits (`n - rank(H)`).
    pub fn dimension(&self) -> usize {
        self.info_positions.len()
    }

    pub fn rate(&self) -> f64 {
        self.dimension() as f64 / self.n as f64
    }

    pub fn encode(&self, info: &[bool]) -> Result<Vec<bool>> {
        if info.len() != self.dimension() {
            return Err(Error::LengthMismatch {
                expected: self.dimension(),
                actual: info.len(),
            });
        }
        let mut word = vec![false; self.n];
        for (&pos, &bit) in self.info_positions.iter().zip(info) {
            word[pos] = bit;
        }
        for (pivot, deps) in &self.parity {
            word[*pivot] = deps.iter().fold(false, |acc, &j| acc ^ word[j]);
        }
        Ok(word)
    }

    pub fn extract_info(&self, word: &[bool]) -> Vec<bool> {
        self.info_positions.iter().map(|&p| word[p]).collect()
    }

    pub fn is_codeword(&self, word: &[bool]) -> bool {
        word.len() == self.n
            && self
                .checks
                .iter()
                .all(|vars| !vars.iter().fold(false, |acc, &v| acc ^ word[v]))
    }

    /// Sum-product decoding. `None` entries are erasures; known bits are
    /// trusted according to the BSC flip probability `flip`.
    pub fn decode(&self, received: &[Option<bool>], flip: f64) -> Result<Vec<bool>> {
        let confidence = bit_llr(flip);
        let channel: Vec<f64> = received
            .iter()
            .map(|r| match r {
                Some(false) => confidence,
                Some(true) => -confidence,
                None => 0.0,
            })
            .collect();
        self.decode_llr(&channel)
    }

    /// Sum-product decoding from channel log-likelihood ratios
    /// `ln P(0)/P(1)`; zero marks an erasure.
    pub fn decode_llr(&self, channel: &[f64]) -> Result<Vec<bool>> {
        if channel.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: channel.len(),
            });
        }
        let mut hard: Vec<bool> = channel.iter().map(|&l| l < 0.0).collect();
        if channel.iter().all(|&l| l != 0.0) && self.is_codeword(&hard) {
            return Ok(hard);
        }

        // check-to-variable messages, indexed like `checks`
        let mut c2v: Vec<Vec<f64>> = self.checks.iter().map(|r| vec![0.0; r.len()]).collect();
        let mut tanh_buf = Vec::new();
        for _ in 0..MAX_ITERATIONS {
            for (c, vars) in self.checks.iter().enumerate() {
                tanh_buf.clear();
                for (slot, &v) in vars.iter().enumerate() {
                    let total: f64 = channel[v]
                        + self.var_edges[v]
                            .iter()
                            .map(|&(cc, s)| c2v[cc][s])
                            .sum::<f64>();
                    let v2c = (total - c2v[c][slot]).clamp(-LLR_CAP, LLR_CAP);
                    tanh_buf.push((v2c / 2.0).tanh());
                }
                for (slot, msg) in c2v[c].iter_mut().enumerate() {
                    let prod: f64 = tanh_buf
                        .iter()
                        .enumerate()
                        .filter(|&(s, _)| s != slot)
                        .map(|(_, t)| t)
                        .product();
                    let prod = prod.clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                    *msg = 2.0 * prod.atanh();
                }
            }
            let mut undecided = false;
            for v in 0..self.n {
                let total: f64 = channel[v]
                    + self.var_edges[v]
                        .iter()
                        .map(|&(c, s)| c2v[c][s])
                        .sum::<f64>();
                undecided |= total == 0.0;
                hard[v] = total < 0.0;
            }
            if !undecided && self.is_codeword(&hard) {
                return Ok(hard);
            }
        }
        Err(Error::DecodeFailure(format!(
            "belief propagation did not converge in {MAX_ITERATIONS} iterations"
        )))
    }
}

/// LLR magnitude of one bit seen through a BSC with flip probability `flip`.
pub fn bit_llr(flip: f64) -> f64 {
    let flip = flip.clamp(1e-12, 0.499);
    ((1.0 - flip) / flip).ln().min(LLR_CAP)
}

/// Uniform random bit string.
pub fn random_bits<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<bool> {
    (0..len).map(|_| rng.random()).collect()
}
