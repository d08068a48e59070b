//! Mean age-of-information (AoI) of a K-source round-robin status-update
//! system over a Gilbert-Elliot packet erasure channel, with and without
//! (n, k)-MDS block coding.
//!
//! The crate has four layers:
//!
//! * [`channel`] — the `(alpha, beta, eps0, eps1)` two-state erasure channel
//!   as a samplable Markov process with its stationary quantities;
//! * [`erasure`] — the erasure-count distribution `P(n, e)` (closed-form
//!   combinatorics plus a numerically stable recursion) and the MDS block
//!   error probability built on it;
//! * [`aoi`] and [`gaussian`] — closed-form mean AoI for the uncoded and
//!   coded systems, the CLT approximation with its regional forms, the
//!   optimal-block-size search and the coding gain;
//! * [`sim`] — an exact-sawtooth Monte Carlo simulator that validates every
//!   analytical formula, with deterministic seeded runs.
//!
//! The `aoi-mds` binary (see [`cli`]) exposes all of it as subcommands with
//! CSV/JSON output.

pub mod aoi;
pub mod channel;
pub mod cli;
pub mod erasure;
pub mod error;
pub mod gaussian;
pub mod sim;

pub use aoi::{
    AoiMode, AoiResult, ApproxValidity, CodingGain, EventProbabilities, InterarrivalMoments,
    SystemConfig, coded_aoi_approx, coded_aoi_exact, coded_interarrival_moments, coding_gain,
    event_probs, optimal_k, uncoded_aoi, uncoded_interarrival_pmf,
};
pub use channel::{ChannelSampler, ChannelState, ErasureFlag, GEParams};
pub use erasure::{
    ErasureCountPmf, PmfMethod, bep_mds, erasure_pmf_closed, erasure_pmf_dp,
    DEFAULT_CLOSED_FORM_CUTOFF,
};
pub use error::{Error, Result};
pub use gaussian::{GaussianApprox, Region, calibrate_c_eps, gaussian_aoi, normal_cdf, region_aoi};
pub use sim::{
    RecoveryAgeOffset, SimConfig, SimMode, SimReport, SourceReport, estimate_erasure_pmf,
    simulate, simulate_coded, simulate_uncoded,
};
