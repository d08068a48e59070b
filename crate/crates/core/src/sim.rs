//! Slot-level Monte Carlo simulation of the K-source round-robin update
//! system over a sampled Gilbert-Elliot channel.
//!
//! One channel use per packet transmission; a packet occupies `ell` slots
//! and is timestamped at the start of its transmission slot. The channel
//! trajectory is continuous across blocks and rounds. All bookkeeping is in
//! integer slots, so reports are bit-identical for identical configs and the
//! sawtooth integral is exact (no per-slot sampling).

use serde::{Deserialize, Serialize};

use crate::aoi::{
    AoiMode, EventProbabilities, SystemConfig, coded_aoi_exact_from_events,
    coded_interarrival_moments, event_probs, uncoded_aoi,
};
use crate::channel::{ChannelSampler, GEParams};
use crate::error::{Error, Result};

/// Age value a block-recovered packet resets to at the end of its block.
///
/// The update is decoded `(n - (i mod k)) ell` slots after its generation
/// timestamp; the analytical event description books it one packet higher.
/// Both are exposed; the difference washes out for large `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryAgeOffset {
    /// Reset to `(n + 1 - (i mod k)) ell`, matching the event description
    /// the closed-form analysis uses.
    #[default]
    Analytical,
    /// Reset to `(n - (i mod k)) ell`, the raw timestamp geometry.
    Geometric,
}

/// Which transmission policy to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    Uncoded,
    Coded,
}

/// Full description of one simulation run. Deserializable from the JSON
/// config format (`schema_version` 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub schema_version: u32,
    pub mode: SimMode,
    pub channel: GEParams,
    pub system: SystemConfig,
    /// Total rounds simulated, warm-up included.
    pub rounds: u64,
    /// Rounds discarded before accumulation; defaults to
    /// `max(100, rounds / 10)` capped below `rounds`.
    #[serde(default)]
    pub warmup_rounds: Option<u64>,
    pub seed: u64,
    /// Defaults to one source per distinct block position (coded) or source
    /// 0 (uncoded).
    #[serde(default)]
    pub tracked_sources: Option<Vec<u64>>,
    #[serde(default)]
    pub recovery_age_offset: RecoveryAgeOffset,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != 1 {
            return Err(Error::InvalidConfig(format!(
                "unsupported schema_version {} (expected 1)",
                self.schema_version
            )));
        }
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be at least 1".into()));
        }
        let warmup = self.resolved_warmup();
        if warmup >= self.rounds {
            return Err(Error::InvalidConfig(format!(
                "warmup_rounds = {warmup} must be smaller than rounds = {}",
                self.rounds
            )));
        }
        for &s in self.tracked() .iter() {
            if s >= self.system.sources() {
                return Err(Error::InvalidConfig(format!(
                    "tracked source {s} out of range (K = {})",
                    self.system.sources()
                )));
            }
        }
        Ok(())
    }

    pub fn resolved_warmup(&self) -> u64 {
        match self.warmup_rounds {
            Some(w) => w,
            None => 100u64.max(self.rounds / 10).min(self.rounds.saturating_sub(1)),
        }
    }

    fn tracked(&self) -> Vec<u64> {
        match &self.tracked_sources {
            Some(list) => {
                let mut v = list.clone();
                v.sort_unstable();
                v.dedup();
                v
            }
            None => match self.mode {
                SimMode::Uncoded => vec![0],
                SimMode::Coded => (0..self.system.k()).collect(),
            },
        }
    }
}

/// Exact sawtooth bookkeeping for one tracked source.
///
/// The instantaneous age rises by one per slot and is reset at delivery
/// events; the integral is accumulated in half-slot^2 units (`2 * area`) so
/// the arithmetic stays in integers. The reset list supports an independent
/// polygon-sum recomputation of the same integral (double-entry check).
#[derive(Debug, Clone)]
pub struct AgeTrace {
    source: u64,
    position: u64,
    // Current linear segment: age(t) = seg_age + (t - seg_slot).
    seg_slot: u64,
    seg_age: u64,
    // Measurement-window accumulation.
    anchor: Option<(u64, u64)>,
    twice_integral: u128,
    resets: Vec<(u64, u64)>,
    prev_delivery: Option<u64>,
    sum_x: u128,
    sum_x2: u128,
    sum_x4: u128,
    samples_x: u64,
    deliveries: u64,
    events: [u64; 3],
}

impl AgeTrace {
    fn new(source: u64, position: u64) -> Self {
        Self {
            source,
            position,
            seg_slot: 0,
            seg_age: 0,
            anchor: None,
            twice_integral: 0,
            resets: Vec::new(),
            prev_delivery: None,
            sum_x: 0,
            sum_x2: 0,
            sum_x4: 0,
            samples_x: 0,
            deliveries: 0,
            events: [0; 3],
        }
    }

    fn begin_measurement(&mut self, slot: u64) {
        let age = self.seg_age + (slot - self.seg_slot);
        self.anchor = Some((slot, age));
        self.seg_slot = slot;
        self.seg_age = age;
    }

    fn record_event(&mut self, event: usize, measuring: bool) {
        if measuring {
            self.events[event] += 1;
        }
    }

    fn deliver(&mut self, slot: u64, reset_age: u64, measuring: bool) {
        if measuring {
            let dt = (slot - self.seg_slot) as u128;
            self.twice_integral += (2 * self.seg_age as u128 + dt) * dt;
            self.resets.push((slot, reset_age));
            if let Some(prev) = self.prev_delivery {
                let x = (slot - prev) as u128;
                self.sum_x += x;
                self.sum_x2 += x * x;
                self.sum_x4 += x * x * x * x;
                self.samples_x += 1;
            }
            self.prev_delivery = Some(slot);
            self.deliveries += 1;
        }
        self.seg_slot = slot;
        self.seg_age = reset_age;
    }

    fn finish(&mut self, end_slot: u64) {
        let dt = (end_slot - self.seg_slot) as u128;
        self.twice_integral += (2 * self.seg_age as u128 + dt) * dt;
    }

    pub fn source(&self) -> u64 {
        self.source
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    /// Accumulated age integral over the measurement window, in
    /// half-slot^2 units (`2 * integral`, kept integral-exact).
    pub fn twice_integral(&self) -> u128 {
        self.twice_integral
    }

    /// Reset events `(slot, age value)` recorded inside the measurement
    /// window.
    pub fn resets(&self) -> &[(u64, u64)] {
        &self.resets
    }

    /// Recomputes `2 * integral` from the anchor and the recorded resets.
    fn polygon_twice_integral(&self, end_slot: u64) -> u128 {
        let (mut slot, mut age) = self.anchor.expect("measurement never started");
        let mut acc: u128 = 0;
        for &(t, v) in &self.resets {
            let dt = (t - slot) as u128;
            acc += (2 * age as u128 + dt) * dt;
            slot = t;
            age = v;
        }
        let dt = (end_slot - slot) as u128;
        acc += (2 * age as u128 + dt) * dt;
        acc
    }
}

/// Per-source slice of the report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SourceReport {
    pub source: u64,
    pub position: u64,
    pub mean_aoi: f64,
    pub ex: f64,
    pub ex2: f64,
    pub deliveries: u64,
    /// Standard errors of the two empirical moments.
    pub ex_se: f64,
    pub ex2_se: f64,
    pub events: EventCounts,
    /// Closed-form prediction (per-source exact formula), when finite.
    pub mean_aoi_analytical: Option<f64>,
    pub rel_error: Option<f64>,
    pub ex_analytical: Option<f64>,
    pub ex2_analytical: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct EventCounts {
    pub a: u64,
    pub b: u64,
    pub c: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct EventFrequencies {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Everything a run produces. Identical configs (including the seed) yield
/// bit-identical reports.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimReport {
    pub schema_version: u32,
    pub mode: SimMode,
    pub seed: u64,
    pub rounds: u64,
    pub warmup_rounds: u64,
    pub measured_rounds: u64,
    pub sources: u64,
    pub ell: u64,
    pub n: u64,
    pub k: u64,
    pub lambda: u64,
    pub recovery_age_offset: RecoveryAgeOffset,
    pub channel: GEParams,
    pub marginal_erasure_prob: f64,
    /// Blocks inside the measurement window (packets, for the uncoded mode).
    pub blocks_simulated: u64,
    /// Global event frequencies over every (source, block) pair.
    pub event_frequencies: EventFrequencies,
    /// The per-block outcome probabilities the analysis predicts.
    pub event_probabilities_analytical: EventFrequencies,
    /// Empirical minus analytical; quantifies the independence
    /// approximation on correlated channels (zero-mean noise when
    /// `alpha + beta = 1`).
    pub event_discrepancy: EventFrequencies,
    /// Histogram of per-block erasure counts (length `n + 1`).
    pub erasure_histogram: Vec<u64>,
    /// Set when some tracked source saw no delivery in the window.
    pub no_delivery: bool,
    /// Incremental integral equals the polygon recomputation for every
    /// tracked source.
    pub sawtooth_consistent: bool,
    pub per_source: Vec<SourceReport>,
}

/// Simulates the uncoded policy: each round forwards one packet per source,
/// a failed packet is discarded, a delivered one resets the age to `ell`.
pub fn simulate_uncoded(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let sys = &cfg.system;
    let (sources, ell) = (sys.sources(), sys.ell());
    let round_len = sources * ell;
    let warmup = cfg.resolved_warmup();
    let end_slot = cfg.rounds * round_len;

    let mut sampler = ChannelSampler::from_seed(cfg.channel, cfg.seed);
    let tracked = cfg.tracked();
    let mut lookup = vec![usize::MAX; sources as usize];
    let mut traces: Vec<AgeTrace> = tracked
        .iter()
        .enumerate()
        .map(|(idx, &s)| {
            lookup[s as usize] = idx;
            AgeTrace::new(s, 0)
        })
        .collect();

    let mut histogram = vec![0u64; 2];
    let mut global_events = [0u64; 3];

    for round in 0..cfg.rounds {
        let measuring = round >= warmup;
        if round == warmup {
            let boundary = warmup * round_len;
            for t in &mut traces {
                t.begin_measurement(boundary);
            }
        }
        let round_start = round * round_len;
        for i in 0..sources {
            let erased = sampler.step().erased;
            let event = if erased { 2 } else { 0 };
            if measuring {
                histogram[erased as usize] += 1;
                global_events[event] += 1;
            }
            let slot_idx = lookup[i as usize];
            if slot_idx != usize::MAX {
                let trace = &mut traces[slot_idx];
                trace.record_event(event, measuring);
                if !erased {
                    trace.deliver(round_start + i * ell + ell, ell, measuring);
                }
            }
        }
    }
    for t in &mut traces {
        t.finish(end_slot);
    }

    let p = cfg.channel.marginal_erasure_prob();
    let analytical_events = EventProbabilities {
        p_a: 1.0 - p,
        p_b: 0.0,
        p_c: p,
    };
    let per_source = traces
        .iter()
        .map(|t| {
            let aoi = uncoded_aoi(sources, ell, p, AoiMode::Exact);
            let ex = if p < 1.0 {
                Some((sources * ell) as f64 / (1.0 - p))
            } else {
                None
            };
            let ex2 = ex.map(|m| m * m * (1.0 + p) / (1.0 - p));
            source_report(t, end_slot, aoi.finite.then_some(aoi.mean_aoi), ex, ex2)
        })
        .collect();

    Ok(assemble_report(
        cfg,
        warmup,
        (cfg.rounds - warmup) * sources,
        global_events,
        analytical_events,
        histogram,
        per_source,
        &traces,
        end_slot,
    ))
}

/// Simulates the `(n, k)`-MDS coded policy. Each round transmits
/// `lambda = K / k` blocks of `n` packets; a clean packet delivers at the
/// end of its own slot, an erased one is either recovered at the end of the
/// block (when the block holds at most `n - k` erasures) or lost with it.
pub fn simulate_coded(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let sys = &cfg.system;
    let (sources, ell, n, k) = (sys.sources(), sys.ell(), sys.n(), sys.k());
    let lambda = sys.lambda();
    let block_len = n * ell;
    let round_len = lambda * block_len;
    let warmup = cfg.resolved_warmup();
    let end_slot = cfg.rounds * round_len;

    let mut sampler = ChannelSampler::from_seed(cfg.channel, cfg.seed);
    let tracked = cfg.tracked();
    let mut lookup = vec![usize::MAX; sources as usize];
    let mut traces: Vec<AgeTrace> = tracked
        .iter()
        .enumerate()
        .map(|(idx, &s)| {
            lookup[s as usize] = idx;
            AgeTrace::new(s, sys.position(s))
        })
        .collect();

    let mut flags = vec![false; n as usize];
    let mut histogram = vec![0u64; n as usize + 1];
    let mut global_events = [0u64; 3];

    for round in 0..cfg.rounds {
        let measuring = round >= warmup;
        if round == warmup {
            let boundary = warmup * round_len;
            for t in &mut traces {
                t.begin_measurement(boundary);
            }
        }
        let round_start = round * round_len;
        for block in 0..lambda {
            let block_start = round_start + block * block_len;
            let mut total_erasures = 0u64;
            for flag in flags.iter_mut() {
                *flag = sampler.step().erased;
                total_erasures += *flag as u64;
            }
            if measuring {
                histogram[total_erasures as usize] += 1;
            }
            let recoverable = total_erasures <= n - k;
            for pos in 0..k {
                let source = block * k + pos;
                let event = if !flags[pos as usize] {
                    0
                } else if recoverable {
                    1
                } else {
                    2
                };
                if measuring {
                    global_events[event] += 1;
                }
                let idx = lookup[source as usize];
                if idx != usize::MAX {
                    let trace = &mut traces[idx];
                    trace.record_event(event, measuring);
                    match event {
                        0 => trace.deliver(block_start + (pos + 1) * ell, ell, measuring),
                        1 => {
                            let reset = match cfg.recovery_age_offset {
                                RecoveryAgeOffset::Analytical => (n + 1 - pos) * ell,
                                RecoveryAgeOffset::Geometric => (n - pos) * ell,
                            };
                            trace.deliver(block_start + block_len, reset, measuring);
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    for t in &mut traces {
        t.finish(end_slot);
    }

    let analytical_events = event_probs(sys, &cfg.channel);
    let per_source = traces
        .iter()
        .map(|t| {
            let aoi = coded_aoi_exact_from_events(t.source, sys, &analytical_events);
            let moments = coded_interarrival_moments(t.source, sys, &analytical_events);
            source_report(
                t,
                end_slot,
                aoi.finite.then_some(aoi.mean_aoi),
                moments.mean.is_finite().then_some(moments.mean),
                moments.second_moment.is_finite().then_some(moments.second_moment),
            )
        })
        .collect();

    Ok(assemble_report(
        cfg,
        warmup,
        (cfg.rounds - warmup) * lambda,
        global_events,
        analytical_events,
        histogram,
        per_source,
        &traces,
        end_slot,
    ))
}

/// Runs whichever policy the config selects.
pub fn simulate(cfg: &SimConfig) -> Result<SimReport> {
    match cfg.mode {
        SimMode::Uncoded => simulate_uncoded(cfg),
        SimMode::Coded => simulate_coded(cfg),
    }
}

fn source_report(
    trace: &AgeTrace,
    end_slot: u64,
    aoi_analytical: Option<f64>,
    ex_analytical: Option<f64>,
    ex2_analytical: Option<f64>,
) -> SourceReport {
    let (anchor_slot, _) = trace.anchor.expect("measurement never started");
    let elapsed = (end_slot - anchor_slot) as f64;
    let mean_aoi = trace.twice_integral as f64 / (2.0 * elapsed);
    let samples = trace.samples_x as f64;
    let (ex, ex2, ex_se, ex2_se) = if trace.samples_x > 0 {
        let ex = trace.sum_x as f64 / samples;
        let ex2 = trace.sum_x2 as f64 / samples;
        let ex4 = trace.sum_x4 as f64 / samples;
        let var_x = (ex2 - ex * ex).max(0.0);
        let var_x2 = (ex4 - ex2 * ex2).max(0.0);
        (
            ex,
            ex2,
            (var_x / samples).sqrt(),
            (var_x2 / samples).sqrt(),
        )
    } else {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    };
    SourceReport {
        source: trace.source,
        position: trace.position,
        mean_aoi,
        ex,
        ex2,
        deliveries: trace.deliveries,
        ex_se,
        ex2_se,
        events: EventCounts {
            a: trace.events[0],
            b: trace.events[1],
            c: trace.events[2],
        },
        mean_aoi_analytical: aoi_analytical,
        rel_error: aoi_analytical.map(|a| (mean_aoi - a) / a),
        ex_analytical,
        ex2_analytical,
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble_report(
    cfg: &SimConfig,
    warmup: u64,
    blocks: u64,
    global_events: [u64; 3],
    analytical: EventProbabilities,
    histogram: Vec<u64>,
    per_source: Vec<SourceReport>,
    traces: &[AgeTrace],
    end_slot: u64,
) -> SimReport {
    let total_events = global_events.iter().sum::<u64>().max(1) as f64;
    let freqs = EventFrequencies {
        a: global_events[0] as f64 / total_events,
        b: global_events[1] as f64 / total_events,
        c: global_events[2] as f64 / total_events,
    };
    let predicted = EventFrequencies {
        a: analytical.p_a,
        b: analytical.p_b,
        c: analytical.p_c,
    };
    let sawtooth_consistent = traces
        .iter()
        .all(|t| t.polygon_twice_integral(end_slot) == t.twice_integral);
    SimReport {
        schema_version: 1,
        mode: cfg.mode,
        seed: cfg.seed,
        rounds: cfg.rounds,
        warmup_rounds: warmup,
        measured_rounds: cfg.rounds - warmup,
        sources: cfg.system.sources(),
        ell: cfg.system.ell(),
        n: cfg.system.n(),
        k: cfg.system.k(),
        lambda: cfg.system.lambda(),
        recovery_age_offset: cfg.recovery_age_offset,
        channel: cfg.channel,
        marginal_erasure_prob: cfg.channel.marginal_erasure_prob(),
        blocks_simulated: blocks,
        event_frequencies: freqs,
        event_probabilities_analytical: predicted,
        event_discrepancy: EventFrequencies {
            a: freqs.a - predicted.a,
            b: freqs.b - predicted.b,
            c: freqs.c - predicted.c,
        },
        erasure_histogram: histogram,
        no_delivery: per_source.iter().any(|s| s.deliveries == 0),
        sawtooth_consistent,
        per_source,
    }
}

/// Frequency histogram of erasure counts over `windows` independent
/// stationary windows of `n` channel uses each.
pub fn estimate_erasure_pmf(n: usize, windows: u64, params: &GEParams, seed: u64) -> Vec<u64> {
    let mut sampler = ChannelSampler::from_seed(*params, seed);
    let mut histogram = vec![0u64; n + 1];
    for _ in 0..windows {
        sampler.restart_stationary();
        let mut count = 0usize;
        for _ in 0..n {
            count += sampler.step().erased as usize;
        }
        histogram[count] += 1;
    }
    histogram
}
