//! Two-state Gilbert-Elliot packet erasure channel.
//!
//! The channel toggles between a good and a bad state with transition
//! probabilities `alpha` (good to bad) and `beta` (bad to good). Each packet
//! transmission is one channel use: the packet is erased with probability
//! `eps0` in the good state and `eps1` in the bad state, after which the
//! state advances. The channel is sampled once per packet; the packet length
//! only stretches the time axis.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel occupancy state. `Good` corresponds to 0, `Bad` to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelState {
    Good,
    Bad,
}

impl ChannelState {
    /// Numeric encoding: `Good` is 0, `Bad` is 1.
    pub fn as_index(self) -> usize {
        match self {
            ChannelState::Good => 0,
            ChannelState::Bad => 1,
        }
    }

    fn toggled(self) -> Self {
        match self {
            ChannelState::Good => ChannelState::Bad,
            ChannelState::Bad => ChannelState::Good,
        }
    }
}

/// Outcome of one channel use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErasureFlag {
    pub erased: bool,
}

/// Parameters of an `(alpha, beta, eps0, eps1)` Gilbert-Elliot erasure channel.
///
/// All four fields are probabilities; `alpha + beta` must be positive so the
/// stationary distribution exists. Construction validates both, so every
/// `GEParams` value satisfies the invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGEParams")]
pub struct GEParams {
    alpha: f64,
    beta: f64,
    eps0: f64,
    eps1: f64,
}

/// Unvalidated mirror used for deserialization.
#[derive(Debug, Clone, Copy, Deserialize)]
struct RawGEParams {
    alpha: f64,
    beta: f64,
    eps0: f64,
    eps1: f64,
}

impl TryFrom<RawGEParams> for GEParams {
    type Error = Error;

    fn try_from(raw: RawGEParams) -> Result<Self> {
        GEParams::new(raw.alpha, raw.beta, raw.eps0, raw.eps1)
    }
}

impl GEParams {
    pub fn new(alpha: f64, beta: f64, eps0: f64, eps1: f64) -> Result<Self> {
        for (name, value) in [
            ("alpha", alpha),
            ("beta", beta),
            ("eps0", eps0),
            ("eps1", eps1),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidProbability { name, value });
            }
        }
        if alpha + beta <= 0.0 {
            return Err(Error::DegenerateChannel);
        }
        Ok(Self {
            alpha,
            beta,
            eps0,
            eps1,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    /// Stationary probability of the good state, `beta / (alpha + beta)`.
    pub fn steady_state_good(&self) -> f64 {
        self.beta / (self.alpha + self.beta)
    }

    /// Stationary probability of the bad state, `alpha / (alpha + beta)`.
    ///
    /// Computed directly rather than as `1 - steady_state_good()` so that
    /// `reversed()` swaps the two values bit-exactly.
    pub fn steady_state_bad(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Stationary per-use erasure probability
    /// `P = eps0 * pi_g + eps1 * (1 - pi_g)`.
    ///
    /// Evaluated as a single fraction `(eps0 * beta + eps1 * alpha) / (alpha + beta)`
    /// so the value is invariant under `reversed()` bit-exactly.
    pub fn marginal_erasure_prob(&self) -> f64 {
        (self.eps0 * self.beta + self.eps1 * self.alpha) / (self.alpha + self.beta)
    }

    /// Erasure probability conditioned on the current state.
    pub fn erasure_prob_in(&self, state: ChannelState) -> f64 {
        match state {
            ChannelState::Good => self.eps0,
            ChannelState::Bad => self.eps1,
        }
    }

    /// Relabels good as bad and vice versa: `(beta, alpha, eps1, eps0)`.
    ///
    /// The erasure process is distributionally unchanged; applying it twice
    /// is the identity.
    pub fn reversed(&self) -> GEParams {
        GEParams {
            alpha: self.beta,
            beta: self.alpha,
            eps0: self.eps1,
            eps1: self.eps0,
        }
    }

    /// One channel use: an erasure is drawn in the *current* state, then the
    /// state advances (emit-then-transition).
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: ChannelState,
        rng: &mut R,
    ) -> (ChannelState, ErasureFlag) {
        let erased = rng.random::<f64>() < self.erasure_prob_in(state);
        let flip_prob = match state {
            ChannelState::Good => self.alpha,
            ChannelState::Bad => self.beta,
        };
        let next = if rng.random::<f64>() < flip_prob {
            state.toggled()
        } else {
            state
        };
        (next, ErasureFlag { erased })
    }

    /// Draws a state from the stationary distribution.
    pub fn draw_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelState {
        if rng.random::<f64>() < self.steady_state_good() {
            ChannelState::Good
        } else {
            ChannelState::Bad
        }
    }
}

/// A seeded channel trajectory.
///
/// Owns its RNG and mutable state, so an instance is single-threaded;
/// distinct instances with distinct seeds can run in parallel. The same seed
/// always reproduces the same trace.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    params: GEParams,
    state: ChannelState,
    rng: ChaCha12Rng,
}

impl ChannelSampler {
    /// Starts a trajectory from a stationary state draw.
    pub fn from_seed(params: GEParams, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let state = params.draw_stationary(&mut rng);
        Self { params, state, rng }
    }

    pub fn params(&self) -> &GEParams {
        &self.params
    }

    pub fn state(&self) -> ChannelState {
        self.state
    }

    /// Advances the trajectory by one packet transmission.
    pub fn step(&mut self) -> ErasureFlag {
        let (next, flag) = self.params.step(self.state, &mut self.rng);
        self.state = next;
        flag
    }

    /// Redraws the state from the stationary distribution, keeping the RNG
    /// stream. Used for independent stationary windows.
    pub fn restart_stationary(&mut self) {
        self.state = self.params.draw_stationary(&mut self.rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ref_channel() -> GEParams {
        GEParams::new(0.2, 0.8, 0.2, 0.9).unwrap()
    }

    #[test]
    fn steady_state_values() {
        assert_eq!(ref_channel().steady_state_good(), 0.8);
        assert_eq!(
            GEParams::new(0.5, 0.5, 0.0, 0.0).unwrap().steady_state_good(),
            0.5
        );
        assert_eq!(
            GEParams::new(0.0, 1.0, 0.0, 0.0).unwrap().steady_state_good(),
            1.0
        );
    }

    #[test]
    fn degenerate_parameters_rejected() {
        assert!(matches!(
            GEParams::new(0.0, 0.0, 0.1, 0.2),
            Err(Error::DegenerateChannel)
        ));
        assert!(matches!(
            GEParams::new(-0.1, 0.5, 0.1, 0.2),
            Err(Error::InvalidProbability { name: "alpha", .. })
        ));
        assert!(matches!(
            GEParams::new(0.1, 0.5, 0.1, 1.2),
            Err(Error::InvalidProbability { name: "eps1", .. })
        ));
    }

    #[test]
    fn marginal_erasure_prob_values() {
        assert!((ref_channel().marginal_erasure_prob() - 0.34).abs() < 1e-15);
        let flat = GEParams::new(0.3, 0.4, 0.25, 0.25).unwrap();
        assert!((flat.marginal_erasure_prob() - 0.25).abs() < 1e-15);
        let clean = GEParams::new(0.3, 0.4, 0.0, 0.0).unwrap();
        assert_eq!(clean.marginal_erasure_prob(), 0.0);
    }

    #[test]
    fn reverse_swaps_fields_and_is_involutive() {
        let p = ref_channel();
        let r = p.reversed();
        assert_eq!(
            (r.alpha(), r.beta(), r.eps0(), r.eps1()),
            (0.8, 0.2, 0.9, 0.2)
        );
        assert_eq!(r.reversed(), p);
    }

    #[test]
    fn reverse_preserves_marginal_and_swaps_steady_state_exactly() {
        for (a, b, e0, e1) in [
            (0.2, 0.8, 0.2, 0.9),
            (0.13, 0.57, 0.041, 0.93),
            (0.9, 0.05, 0.5, 0.6),
        ] {
            let p = GEParams::new(a, b, e0, e1).unwrap();
            let r = p.reversed();
            // Bit-exact invariants, not approximate ones.
            assert_eq!(p.marginal_erasure_prob(), r.marginal_erasure_prob());
            assert_eq!(p.steady_state_good(), r.steady_state_bad());
            assert_eq!(p.steady_state_bad(), r.steady_state_good());
        }
    }

    #[test]
    fn step_is_deterministic_in_degenerate_erasure_cases() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let never = GEParams::new(0.2, 0.8, 0.0, 0.3).unwrap();
        for _ in 0..100 {
            let (_, flag) = never.step(ChannelState::Good, &mut rng);
            assert!(!flag.erased);
        }
        let always = GEParams::new(0.2, 0.8, 0.3, 1.0).unwrap();
        for _ in 0..100 {
            let (_, flag) = always.step(ChannelState::Bad, &mut rng);
            assert!(flag.erased);
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let mut a = ChannelSampler::from_seed(ref_channel(), 42);
        let mut b = ChannelSampler::from_seed(ref_channel(), 42);
        for _ in 0..1000 {
            assert_eq!(a.step(), b.step());
            assert_eq!(a.state(), b.state());
        }
    }

    #[test]
    fn long_run_erasure_frequency_matches_marginal() {
        // The reference channel has alpha + beta = 1, so the per-use erasures are
        // i.i.d. and the plain binomial standard error applies.
        let p = ref_channel();
        let mut sampler = ChannelSampler::from_seed(p, 7);
        let steps = 1_000_000;
        let mut erased = 0u64;
        for _ in 0..steps {
            if sampler.step().erased {
                erased += 1;
            }
        }
        let freq = erased as f64 / steps as f64;
        let prob = p.marginal_erasure_prob();
        let sigma = (prob * (1.0 - prob) / steps as f64).sqrt();
        assert!(
            (freq - prob).abs() < 3.0 * sigma.max(1e-12),
            "freq {freq} vs P {prob}"
        );
        assert!((freq - prob).abs() < 5e-3);
    }

    #[test]
    fn long_run_erasure_frequency_on_correlated_channel() {
        // alpha + beta != 1: successive uses are correlated, so the standard
        // error carries the factor from the geometric autocovariance
        //   cov(E_1, E_{1+t}) = (eps0 - eps1)^2 pi_g pi_b r^t,  r = 1 - alpha - beta.
        let p = GEParams::new(0.05, 0.2, 0.05, 0.6).unwrap();
        let mut sampler = ChannelSampler::from_seed(p, 11);
        let steps = 1_000_000;
        let mut erased = 0u64;
        for _ in 0..steps {
            if sampler.step().erased {
                erased += 1;
            }
        }
        let freq = erased as f64 / steps as f64;
        let prob = p.marginal_erasure_prob();
        let r = 1.0 - p.alpha() - p.beta();
        let pg = p.steady_state_good();
        let var = prob * (1.0 - prob)
            + 2.0 * (p.eps0() - p.eps1()).powi(2) * pg * (1.0 - pg) * r / (1.0 - r);
        let sigma = (var / steps as f64).sqrt();
        assert!(
            (freq - prob).abs() < 4.0 * sigma,
            "freq {freq} vs P {prob} (sigma {sigma})"
        );
    }

    #[test]
    fn stationarity_is_preserved_by_stepping() {
        let p = GEParams::new(0.3, 0.5, 0.1, 0.7).unwrap();
        // Analytical fixed point.
        let pg = p.steady_state_good();
        let after = pg * (1.0 - p.alpha()) + (1.0 - pg) * p.beta();
        assert!((after - pg).abs() < 1e-15);

        // Empirical: many independent chains, a few steps each; final-state
        // counts stay binomial around pi_g.
        let chains = 100_000;
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut good = 0u64;
        for _ in 0..chains {
            let mut s = p.draw_stationary(&mut rng);
            for _ in 0..5 {
                let (next, _) = p.step(s, &mut rng);
                s = next;
            }
            if s == ChannelState::Good {
                good += 1;
            }
        }
        let freq = good as f64 / chains as f64;
        let sigma = (pg * (1.0 - pg) / chains as f64).sqrt();
        assert!((freq - pg).abs() < 3.0 * sigma, "freq {freq} vs pi_g {pg}");
    }
}
