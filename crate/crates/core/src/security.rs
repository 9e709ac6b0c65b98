//! Eavesdropping bounds on the shared Alice–Bob state.
//!
//! After Charlie's announcement the (twirled) Alice–Bob state is Bell
//! diagonal. Eve's Holevo information about Alice's X-basis bit is
//! `H(λ) - h(λ1 + λ3)`, which never exceeds `h(λ3 + λ4)`, the binary entropy
//! of the phase error. The phase error itself is estimated from the
//! photon-number decomposition of `|√2 α⟩`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, Error, Result};
use crate::rates::{entropy, gain, poisson_table, series_tail, yield_n, SERIES_TAIL_TOLERANCE};

/// Weights of `|Ψ⁻⟩, |Ψ⁺⟩, |Φ⁻⟩, |Φ⁺⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellDiagonal {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
}

impl BellDiagonal {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64, lambda4: f64) -> Result<Self> {
        let state = Self {
            lambda1,
            lambda2,
            lambda3,
            lambda4,
        };
        for (name, v) in [
            ("lambda1", lambda1),
            ("lambda2", lambda2),
            ("lambda3", lambda3),
            ("lambda4", lambda4),
        ] {
            check_non_negative(name, v)?;
        }
        let total = state.weights().iter().sum::<f64>();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "lambda",
                value: total,
                reason: "weights must sum to 1",
            });
        }
        Ok(state)
    }

    pub fn weights(&self) -> [f64; 4] {
        [self.lambda1, self.lambda2, self.lambda3, self.lambda4]
    }

    /// Uniform sample from the probability simplex via sorted uniform
    /// spacings.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut cuts = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        cuts.sort_by(f64::total_cmp);
        let lambda1 = cuts[0];
        let lambda2 = cuts[1] - cuts[0];
        let lambda3 = cuts[2] - cuts[1];
        Self {
            lambda1,
            lambda2,
            lambda3,
            lambda4: 1.0 - lambda1 - lambda2 - lambda3,
        }
    }
}

fn shannon(weights: &[f64]) -> f64 {
    weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| -w * w.log2())
        .sum()
}

/// `I(A:E) = H(λ1, λ2, λ3, λ4) - h(λ1 + λ3)`.
pub fn eve_information(state: &BellDiagonal) -> f64 {
    shannon(&state.weights()) - entropy(state.lambda1 + state.lambda3)
}

/// `E^Z = λ3 + λ4`.
pub fn phase_error(state: &BellDiagonal) -> f64 {
    state.lambda3 + state.lambda4
}

/// `h(E^Z) - I(A:E)`; non-negative up to rounding.
pub fn eve_bound_gap(state: &BellDiagonal) -> f64 {
    entropy(phase_error(state).min(1.0)) - eve_information(state)
}

/// Photon-number decomposition of `|√2 α⟩` with `|α|² = u`.
///
/// Stores the probabilities `|C_2n|²` and `|C_{2n+1}|²` for
/// `n = 0..=n_max`; they equal the Poisson weights at mean `2u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockCoefficients {
    pub u: f64,
    pub n_max: usize,
    pub even: Vec<f64>,
    pub odd: Vec<f64>,
}

impl FockCoefficients {
    /// Amplitude `C_2n = e^{-u} (√2 α)^{2n} / √((2n)!)` for real `α = √u`.
    pub fn c_even(&self, n: usize) -> f64 {
        self.even[n].sqrt()
    }

    /// Amplitude `C_{2n+1}`.
    pub fn c_odd(&self, n: usize) -> f64 {
        self.odd[n].sqrt()
    }

    pub fn total_mass(&self) -> f64 {
        self.even.iter().chain(&self.odd).sum()
    }
}

pub fn fock_coefficients(u: f64, n_max: usize) -> Result<FockCoefficients> {
    check_non_negative("u", u)?;
    let mean = 2.0 * u;
    let table = poisson_table(mean, 2 * n_max + 2);
    let tail = series_tail(mean, n_max, table.iter().step_by(2).map(|w| w.sqrt()).sum());
    if tail > SERIES_TAIL_TOLERANCE {
        return Err(Error::TruncationNotConverged { n_max, tail });
    }
    let even = table.iter().step_by(2).copied().collect();
    let odd = table.iter().skip(1).step_by(2).copied().collect();
    Ok(FockCoefficients {
        u,
        n_max,
        even,
        odd,
    })
}

/// Weights of `|Ψ⁺⟩` and `|Φ⁺⟩` in the post-measurement state for D0-only
/// clicks. Not trace-normalised: the coherent cross terms make their sum
/// exceed one in general.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalWeights {
    pub w_psi_plus: f64,
    pub w_phi_plus: f64,
}

pub fn conditional_weights(
    u: f64,
    eta: f64,
    p_d: f64,
    n_max: usize,
    include_vacuum: bool,
) -> Result<ConditionalWeights> {
    let q = gain(u, eta, p_d)?;
    if q <= 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let fock = fock_coefficients(u, n_max)?;
    let start = usize::from(!include_vacuum);
    let even: f64 = (start..=n_max)
        .map(|n| (fock.even[n] * yield_n(2 * n as u32, eta, p_d)).sqrt())
        .sum();
    let odd: f64 = (0..=n_max)
        .map(|n| (fock.odd[n] * yield_n(2 * n as u32 + 1, eta, p_d)).sqrt())
        .sum();
    Ok(ConditionalWeights {
        w_psi_plus: odd * odd / q,
        w_phi_plus: even * even / q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::poisson_weight;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(l: [f64; 4]) -> BellDiagonal {
        BellDiagonal::new(l[0], l[1], l[2], l[3]).unwrap()
    }

    #[test]
    fn eve_information_examples() {
        assert_eq!(eve_information(&state([1.0, 0.0, 0.0, 0.0])), 0.0);
        assert!((eve_information(&state([0.25; 4])) - 1.0).abs() < 1e-15);
        assert!(eve_information(&state([0.5, 0.5, 0.0, 0.0])).abs() < 1e-15);
    }

    #[test]
    fn phase_error_examples() {
        assert_eq!(phase_error(&state([1.0, 0.0, 0.0, 0.0])), 0.0);
        assert_eq!(phase_error(&state([0.0, 0.0, 0.5, 0.5])), 1.0);
        assert!((phase_error(&state([0.2, 0.3, 0.1, 0.4])) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bound_gap_examples() {
        assert_eq!(eve_bound_gap(&state([0.25; 4])), 0.0);
        assert_eq!(eve_bound_gap(&state([1.0, 0.0, 0.0, 0.0])), 0.0);
    }

    #[test]
    fn eve_information_matches_conditional_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let s = BellDiagonal::sample(&mut rng);
            let a = s.lambda1 + s.lambda3;
            let b = s.lambda2 + s.lambda4;
            let alt = a * entropy(s.lambda1 / a) + b * entropy(s.lambda2 / b);
            assert!((eve_information(&s) - alt).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_states() {
        assert!(BellDiagonal::new(0.5, 0.5, 0.5, 0.0).is_err());
        assert!(BellDiagonal::new(-0.1, 0.6, 0.5, 0.0).is_err());
    }

    #[test]
    fn simplex_samples_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let s = BellDiagonal::sample(&mut rng);
            assert!(s.weights().iter().all(|&w| w >= 0.0));
            assert!((s.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fock_coefficient_examples() {
        let fock = fock_coefficients(0.046, 40).unwrap();
        assert!((fock.even[0] - 0.912_105_149_545_090_4).abs() < 1e-15);
        assert!((fock.total_mass() - 1.0).abs() < 1e-12);
        for n in 0..=40 {
            let e = poisson_weight(2 * n as u32, 0.092);
            let o = poisson_weight(2 * n as u32 + 1, 0.092);
            assert!((fock.even[n] - e).abs() <= 1e-12 * e.max(1e-300));
            assert!((fock.odd[n] - o).abs() <= 1e-12 * o.max(1e-300));
        }
        let vac = fock_coefficients(1e-12, 40).unwrap();
        assert!((vac.even[0] - 1.0).abs() < 1e-11);
        assert!(vac.odd[0] < 1e-11);
        assert!(fock_coefficients(5.0, 3).is_err());
    }

    #[test]
    fn amplitudes_follow_closed_form() {
        let u: f64 = 0.3;
        let fock = fock_coefficients(u, 10).unwrap();
        let mut factorial = 1.0;
        for k in 0..12usize {
            if k > 0 {
                factorial *= k as f64;
            }
            let amp = (-u).exp() * (2.0 * u).sqrt().powi(k as i32) / factorial.sqrt();
            let got = if k % 2 == 0 { fock.c_even(k / 2) } else { fock.c_odd(k / 2) };
            assert!((got - amp).abs() < 1e-14);
        }
    }

    #[test]
    fn conditional_weight_examples() {
        let w = conditional_weights(1e-9, 0.15, 0.0, 40, true).unwrap();
        assert!(w.w_phi_plus < 1e-8);
        let w = conditional_weights(0.046, 0.15, 8e-8, 40, true).unwrap();
        assert!((w.w_phi_plus / 8.570_904_727_737_58e-2 - 1.0).abs() < 1e-11);
        assert_eq!(
            conditional_weights(0.046, 0.0, 0.0, 40, true),
            Err(Error::DegenerateChannel)
        );
    }
}
