//! Closed-form mean age-of-information for the uncoded and MDS-coded
//! round-robin update systems.
//!
//! Time is measured in transmission slots; a packet takes `ell` slots. Every
//! mean-AoI expression reduces to `E[X^2] / (2 E[X]) + ell` for the
//! inter-arrival time `X` between successful receptions of one source, so
//! the per-system work is in the law of `X`.

use serde::{Deserialize, Serialize};

use crate::channel::GEParams;
use crate::erasure::bep_mds;
use crate::error::{Error, Result};

/// How many times larger than the formula's own threshold `K` must be before
/// the large-`K` approximation is reported as trustworthy.
const VALIDITY_MARGIN: f64 = 10.0;

/// Static description of the coded round-robin system: `K` sources sending
/// `ell`-slot packets, grouped into `lambda = K / k` blocks per round, each
/// block carrying `k` data packets of an `(n, k)`-MDS codeword.
///
/// Construction enforces `k | K`, `1 <= k <= n`, `K >= 1` and `ell >= 1`.
/// The exact per-source analysis and the simulator need the divisibility;
/// the large-`K` sweep objective treats `K / k` as real-valued instead and
/// takes raw integers (see [`coded_aoi_approx`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSystemConfig")]
pub struct SystemConfig {
    #[serde(rename = "K")]
    sources: u64,
    ell: u64,
    n: u64,
    k: u64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
struct RawSystemConfig {
    #[serde(rename = "K")]
    sources: u64,
    ell: u64,
    #[serde(default = "one")]
    n: u64,
    #[serde(default = "one")]
    k: u64,
}

fn one() -> u64 {
    1
}

impl TryFrom<RawSystemConfig> for SystemConfig {
    type Error = Error;

    fn try_from(raw: RawSystemConfig) -> Result<Self> {
        SystemConfig::new(raw.sources, raw.ell, raw.n, raw.k)
    }
}

impl SystemConfig {
    pub fn new(sources: u64, ell: u64, n: u64, k: u64) -> Result<Self> {
        if sources < 1 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if ell < 1 {
            return Err(Error::InvalidConfig("ell must be at least 1".into()));
        }
        if k < 1 || k > n {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= k <= n, got k = {k}, n = {n}"
            )));
        }
        if !sources.is_multiple_of(k) {
            return Err(Error::InvalidConfig(format!(
                "k = {k} must divide K = {sources} (K = lambda * k)"
            )));
        }
        Ok(Self {
            sources,
            ell,
            n,
            k,
        })
    }

    pub fn sources(&self) -> u64 {
        self.sources
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// Blocks per round, `lambda = K / k`.
    pub fn lambda(&self) -> u64 {
        self.sources / self.k
    }

    /// Slots per full round, `lambda * n * ell`.
    pub fn round_slots(&self) -> u64 {
        self.lambda() * self.n * self.ell
    }

    /// Block position of source `i`, i.e. `i mod k`.
    pub fn position(&self, source: u64) -> u64 {
        source % self.k
    }
}

/// Per-block outcome probabilities for one source: its packet arrives clean
/// (`p_a`), is erased but recovered from the block (`p_b`), or is lost with
/// the block (`p_c`). They sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventProbabilities {
    pub p_a: f64,
    pub p_b: f64,
    pub p_c: f64,
}

/// First two moments of the inter-arrival time between successful
/// receptions, in slots and slots^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterarrivalMoments {
    pub mean: f64,
    pub second_moment: f64,
}

/// Whether the uncoded formula keeps the `+ ell` delivery term or drops it
/// in the large-`K` regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AoiMode {
    Exact,
    LargeK,
}

/// Additive breakdown of a mean-AoI value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoiComponents {
    /// Inter-arrival term `E[X](1 + p_fail) / 2`-shaped contribution.
    pub main: f64,
    /// Block-position term (zero for uncoded and large-`K` forms).
    pub position: f64,
    /// The `+ ell` delivery term (zero when dropped).
    pub ell_term: f64,
}

/// A mean-AoI value. Divergence (update delivery probability zero) is a
/// first-class flag rather than an error so parameter sweeps can proceed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoiResult {
    /// Mean age in slots; `f64::INFINITY` when not finite.
    pub mean_aoi: f64,
    pub finite: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<AoiComponents>,
}

impl AoiResult {
    pub(crate) fn divergent() -> Self {
        Self {
            mean_aoi: f64::INFINITY,
            finite: false,
            components: None,
        }
    }

    pub(crate) fn finite_with(main: f64, position: f64, ell_term: f64) -> Self {
        Self {
            mean_aoi: main + position + ell_term,
            finite: true,
            components: Some(AoiComponents {
                main,
                position,
                ell_term,
            }),
        }
    }
}

/// Mean AoI of the uncoded round-robin system with per-packet erasure
/// probability `p`:
///
/// `K ell (1 + p) / (2 (1 - p))`, plus `ell` in [`AoiMode::Exact`].
///
/// Divergent when `p = 1`.
pub fn uncoded_aoi(sources: u64, ell: u64, p: f64, mode: AoiMode) -> AoiResult {
    debug_assert!((0.0..=1.0).contains(&p));
    if p >= 1.0 {
        return AoiResult::divergent();
    }
    let period = (sources * ell) as f64;
    let main = period * (1.0 + p) / (2.0 * (1.0 - p));
    let ell_term = match mode {
        AoiMode::Exact => ell as f64,
        AoiMode::LargeK => 0.0,
    };
    AoiResult::finite_with(main, 0.0, ell_term)
}

/// Pmf of the uncoded inter-arrival time: `x` failed rounds-to-success, so
/// `P(X = x K ell) = (1 - p) p^(x-1)` for `x >= 1`.
pub fn uncoded_interarrival_pmf(x: u64, p: f64) -> f64 {
    assert!(x >= 1, "attempt count starts at 1");
    (1.0 - p) * p.powi((x - 1).min(i32::MAX as u64) as i32)
}

/// Per-block event probabilities for a source of an `(n, k)`-coded system:
///
/// * `p_a = 1 - P` (own packet clean),
/// * `p_b = P (1 - BEP(n-1, k))` (erased, block still decodable),
/// * `p_c = P BEP(n-1, k)` (erased and lost).
///
/// The block error probability is evaluated over the other `n - 1` uses;
/// `BEP(n-1, n) = 1` makes `k = n` collapse to the uncoded case.
pub fn event_probs(cfg: &SystemConfig, params: &GEParams) -> EventProbabilities {
    event_probs_for_code(cfg.n(), cfg.k(), params)
}

/// [`event_probs`] from the bare code parameters; the rest of the system
/// configuration does not enter the per-block event law.
pub fn event_probs_for_code(n: u64, k: u64, params: &GEParams) -> EventProbabilities {
    let p = params.marginal_erasure_prob();
    let bep = bep_mds(n as usize - 1, k as usize, params);
    EventProbabilities {
        p_a: 1.0 - p,
        p_b: p * (1.0 - bep),
        p_c: p * bep,
    }
}

/// First two inter-arrival moments for source `source` of the coded system:
///
/// `E[X] = lambda n ell / (1 - p_c)` and
/// `E[X^2] = ((1 + p_c)(lambda n ell)^2 + 2 p_a p_b d^2) / (1 - p_c)^2`
///
/// where `d = (n - (source mod k)) ell` is the block-position offset.
/// Both moments are infinite when `p_c = 1`.
pub fn coded_interarrival_moments(
    source: u64,
    cfg: &SystemConfig,
    ev: &EventProbabilities,
) -> InterarrivalMoments {
    if ev.p_c >= 1.0 {
        return InterarrivalMoments {
            mean: f64::INFINITY,
            second_moment: f64::INFINITY,
        };
    }
    let period = cfg.round_slots() as f64;
    let d = ((cfg.n() - cfg.position(source)) * cfg.ell()) as f64;
    let fail = 1.0 - ev.p_c;
    InterarrivalMoments {
        mean: period / fail,
        second_moment: ((1.0 + ev.p_c) * period * period + 2.0 * ev.p_a * ev.p_b * d * d)
            / (fail * fail),
    }
}

/// Exact mean AoI of source `source` in the `(n, k)`-coded system:
///
/// `lambda n ell (1 + p_c) / (2 (1 - p_c))
///  + p_a p_b d^2 / (lambda n ell (1 - p_c)) + ell`
///
/// with `d = (n - (source mod k)) ell`. With `k = n` this reduces
/// algebraically to the uncoded value.
pub fn coded_aoi_exact(source: u64, cfg: &SystemConfig, params: &GEParams) -> AoiResult {
    let ev = event_probs(cfg, params);
    coded_aoi_exact_from_events(source, cfg, &ev)
}

/// [`coded_aoi_exact`] with the event probabilities supplied by the caller.
pub fn coded_aoi_exact_from_events(
    source: u64,
    cfg: &SystemConfig,
    ev: &EventProbabilities,
) -> AoiResult {
    if ev.p_c >= 1.0 {
        return AoiResult::divergent();
    }
    let period = cfg.round_slots() as f64;
    let d = ((cfg.n() - cfg.position(source)) * cfg.ell()) as f64;
    let main = period * (1.0 + ev.p_c) / (2.0 * (1.0 - ev.p_c));
    let position = ev.p_a * ev.p_b * d * d / (period * (1.0 - ev.p_c));
    AoiResult::finite_with(main, position, cfg.ell() as f64)
}

/// Large-`K` generic-source approximation of the coded mean AoI,
/// `K n ell (1 + p_c) / (2 k (1 - p_c))`.
///
/// `K / k` is treated as real-valued so every `k` in `[1, n]` can be swept
/// for a fixed `K`; divisibility only matters for the exact per-source form.
pub fn coded_aoi_approx(n: u64, k: u64, sources: u64, ell: u64, params: &GEParams) -> AoiResult {
    let p = params.marginal_erasure_prob();
    let p_c = p * bep_mds(n as usize - 1, k as usize, params);
    coded_aoi_approx_from_pc(n, k, sources, ell, p_c)
}

/// [`coded_aoi_approx`] with `p_c` supplied, for sweeps that reuse one pmf.
pub fn coded_aoi_approx_from_pc(n: u64, k: u64, sources: u64, ell: u64, p_c: f64) -> AoiResult {
    if p_c >= 1.0 {
        return AoiResult::divergent();
    }
    let main = sources as f64 * n as f64 * ell as f64 * (1.0 + p_c)
        / (2.0 * k as f64 * (1.0 - p_c));
    AoiResult::finite_with(main, 0.0, 0.0)
}

/// Diagnostic for the large-`K` approximation: the condition
/// `K >> max{ sqrt(2 p_a p_b n^2 / (1 + p_c)), 2 (1 - p_c) / (1 + p_c) }`
/// evaluated at the worst block position (`i mod k = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxValidity {
    /// The larger of the two terms on the right-hand side.
    pub threshold: f64,
    /// Whether `K` exceeds the threshold by at least a factor of ten.
    pub satisfied: bool,
}

pub fn approx_validity(n: u64, k: u64, sources: u64, params: &GEParams) -> ApproxValidity {
    let p = params.marginal_erasure_prob();
    let bep = bep_mds(n as usize - 1, k as usize, params);
    let (p_a, p_b) = (1.0 - p, p * (1.0 - bep));
    let p_c = p * bep;
    let position_term = (2.0 * p_a * p_b * (n as f64) * (n as f64) / (1.0 + p_c)).sqrt();
    let rate_term = 2.0 * (1.0 - p_c) / (1.0 + p_c);
    let threshold = position_term.max(rate_term);
    ApproxValidity {
        threshold,
        satisfied: sources as f64 >= VALIDITY_MARGIN * threshold,
    }
}

/// Exhaustive minimizer of [`coded_aoi_approx`] over `k` in `[1, n]`.
/// Ties break toward larger `k` (higher rate, less redundancy). A fully
/// divergent objective (per-use erasure probability 1) returns `k = n` with
/// the divergent flag set.
pub fn optimal_k(n: u64, params: &GEParams, sources: u64, ell: u64) -> (u64, AoiResult) {
    let p = params.marginal_erasure_prob();
    let pmf = crate::erasure::erasure_pmf_dp(n as usize - 1, params);
    let mut best_k = 0u64;
    let mut best = AoiResult::divergent();
    for k in 1..=n {
        let p_c = p * pmf.bep(k as usize);
        let candidate = coded_aoi_approx_from_pc(n, k, sources, ell, p_c);
        if best_k == 0 || candidate.mean_aoi <= best.mean_aoi {
            best_k = k;
            best = candidate;
        }
    }
    (best_k, best)
}

/// Uncoded-over-coded mean-AoI ratio at the optimal block size, together
/// with the `1 + P` ceiling the ratio approaches from below as `n` grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodingGain {
    pub k_star: u64,
    pub gain: f64,
    pub aoi_coded: f64,
    pub aoi_uncoded: f64,
    /// Asymptotic ceiling `1 + P`.
    pub ceiling: f64,
}

/// Gain of the optimally coded system over the uncoded one (large-`K`
/// objective on both sides); values above 1 mean coding helps.
pub fn coding_gain(n: u64, params: &GEParams, sources: u64, ell: u64) -> CodingGain {
    let p = params.marginal_erasure_prob();
    debug_assert!(p < 1.0, "gain undefined for an always-erasing channel");
    let (k_star, coded) = optimal_k(n, params, sources, ell);
    let uncoded = uncoded_aoi(sources, ell, p, AoiMode::LargeK);
    CodingGain {
        k_star,
        gain: uncoded.mean_aoi / coded.mean_aoi,
        aoi_coded: coded.mean_aoi,
        aoi_uncoded: uncoded.mean_aoi,
        ceiling: 1.0 + p,
    }
}
