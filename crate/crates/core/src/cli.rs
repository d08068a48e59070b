//! Command-line front end: machine-readable analysis and simulation output.
//!
//! Subcommands: `pmf`, `bep`, `analyze`, `sweep`, `simulate`, `optimize`.
//! Every command writes CSV or JSON (`--format`), to stdout or `--out`.
//! Floats are printed with shortest-round-trip formatting, so parsing the
//! output recovers the exact doubles. Exit codes: 0 success, 2 validation
//! error, 3 degenerate result (no delivery for a tracked source).
//!
//! `AOI_MDS_THREADS` caps the rayon pool used for the sweep.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::aoi::{
    self, AoiMode, AoiResult, ApproxValidity, EventProbabilities, SystemConfig,
};
use crate::channel::GEParams;
use crate::erasure::{self, ErasureCountPmf};
use crate::error::Error;
use crate::gaussian::{self, GaussianApprox, Region, DEFAULT_C_EPS_TOLERANCE};
use crate::sim::{self, SimConfig, SimReport};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_DEGENERATE: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "aoi-mds",
    about = "Mean age-of-information analysis and simulation for round-robin \
             status updates over a Gilbert-Elliot erasure channel with MDS coding",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct ChannelArgs {
    /// Good-to-bad transition probability.
    #[arg(long)]
    alpha: f64,
    /// Bad-to-good transition probability.
    #[arg(long)]
    beta: f64,
    /// Erasure probability in the good state.
    #[arg(long)]
    eps0: f64,
    /// Erasure probability in the bad state.
    #[arg(long)]
    eps1: f64,
}

impl ChannelArgs {
    fn params(&self) -> Result<GEParams, Error> {
        GEParams::new(self.alpha, self.beta, self.eps0, self.eps1)
    }
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Erasure-count pmf P(n, e) over a window of n channel uses.
    Pmf {
        /// Window length in channel uses.
        #[arg(long)]
        n: usize,
        /// Also emit the closed-form column (n up to the stability cutoff).
        #[arg(long)]
        closed: bool,
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Block error probability of an (n, k)-MDS code.
    Bep {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Closed-form mean AoI for the uncoded and coded systems.
    Analyze {
        #[arg(long = "K")]
        sources: u64,
        #[arg(long)]
        ell: u64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
        /// Emit the exact per-source value for this index (requires k | K).
        #[arg(long)]
        source_index: Option<u64>,
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Mean-AoI sweep over the block size k for fixed n.
    Sweep {
        #[arg(long)]
        n: u64,
        #[arg(long = "K")]
        sources: u64,
        #[arg(long)]
        ell: u64,
        #[arg(long)]
        k_min: Option<u64>,
        #[arg(long)]
        k_max: Option<u64>,
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo simulation driven by a JSON config file.
    Simulate {
        /// Path to the SimConfig JSON (schema_version 1).
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Optimal block size, minimal mean AoI and coding gain for fixed n.
    Optimize {
        #[arg(long)]
        n: u64,
        #[arg(long = "K")]
        sources: u64,
        #[arg(long)]
        ell: u64,
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// Parses `args` and runs the selected command, returning the process exit
/// code. Parsing errors print usage and exit(2) via clap itself.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::parse_from(args);
    init_thread_pool();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            EXIT_VALIDATION
        }
    }
}

fn init_thread_pool() {
    if let Ok(value) = std::env::var("AOI_MDS_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads > 0 {
                // Ignore the error if a global pool already exists.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn dispatch(command: Command) -> Result<u8, Error> {
    match command {
        Command::Pmf {
            n,
            closed,
            channel,
            output,
        } => cmd_pmf(n, closed, &channel.params()?, &output),
        Command::Bep {
            n,
            k,
            channel,
            output,
        } => cmd_bep(n, k, &channel.params()?, &output),
        Command::Analyze {
            sources,
            ell,
            n,
            k,
            source_index,
            channel,
            output,
        } => cmd_analyze(sources, ell, n, k, source_index, &channel.params()?, &output),
        Command::Sweep {
            n,
            sources,
            ell,
            k_min,
            k_max,
            channel,
            output,
        } => cmd_sweep(n, sources, ell, k_min, k_max, &channel.params()?, &output),
        Command::Simulate { config, output } => cmd_simulate(&config, &output),
        Command::Optimize {
            n,
            sources,
            ell,
            channel,
            output,
        } => cmd_optimize(n, sources, ell, &channel.params()?, &output),
    }
}

fn write_output(output: &OutputArgs, text: &str) -> Result<(), Error> {
    match &output.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::InvalidConfig(format!("cannot write stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
    text.push('\n');
    text
}

/// CSV cell for a possibly divergent mean.
fn aoi_cell(result: &AoiResult) -> String {
    if result.finite {
        format!("{}", result.mean_aoi)
    } else {
        "divergent".to_string()
    }
}

#[derive(Serialize)]
struct PmfRow {
    e: usize,
    p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_closed: Option<f64>,
}

#[derive(Serialize)]
struct PmfOutput {
    schema_version: u32,
    command: &'static str,
    n: usize,
    channel: GEParams,
    rows: Vec<PmfRow>,
}

fn cmd_pmf(n: usize, closed: bool, params: &GEParams, output: &OutputArgs) -> Result<u8, Error> {
    if n < 1 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let dp = erasure::erasure_pmf_dp(n, params);
    let closed_pmf: Option<ErasureCountPmf> = if closed {
        Some(erasure::erasure_pmf_closed(n, params)?)
    } else {
        None
    };
    let rows: Vec<PmfRow> = (0..=n)
        .map(|e| PmfRow {
            e,
            p: dp.prob(e),
            p_closed: closed_pmf.as_ref().map(|c| c.prob(e)),
        })
        .collect();
    let text = match output.format {
        Format::Json => to_json(&PmfOutput {
            schema_version: 1,
            command: "pmf",
            n,
            channel: *params,
            rows,
        }),
        Format::Csv => {
            let mut text = String::new();
            text.push_str(if closed { "e,P,P_closed\n" } else { "e,P\n" });
            for row in rows {
                match row.p_closed {
                    Some(c) => text.push_str(&format!("{},{},{}\n", row.e, row.p, c)),
                    None => text.push_str(&format!("{},{}\n", row.e, row.p)),
                }
            }
            text
        }
    };
    write_output(output, &text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct BepOutput {
    schema_version: u32,
    command: &'static str,
    n: usize,
    k: usize,
    channel: GEParams,
    bep: f64,
}

fn cmd_bep(n: usize, k: usize, params: &GEParams, output: &OutputArgs) -> Result<u8, Error> {
    if n < 1 || k < 1 {
        return Err(Error::InvalidConfig("n and k must be at least 1".into()));
    }
    let bep = erasure::bep_mds(n, k, params);
    let text = match output.format {
        Format::Json => to_json(&BepOutput {
            schema_version: 1,
            command: "bep",
            n,
            k,
            channel: *params,
            bep,
        }),
        Format::Csv => format!("bep\n{bep}\n"),
    };
    write_output(output, &text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct AnalyzeOutput {
    schema_version: u32,
    command: &'static str,
    #[serde(rename = "K")]
    sources: u64,
    ell: u64,
    n: u64,
    k: u64,
    channel: GEParams,
    marginal_erasure_prob: f64,
    event_probabilities: EventProbabilities,
    uncoded_exact: AoiResult,
    uncoded_large_k: AoiResult,
    coded_approx: AoiResult,
    large_k_validity: ApproxValidity,
    #[serde(skip_serializing_if = "Option::is_none")]
    source_index: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coded_exact: Option<AoiResult>,
}

fn cmd_analyze(
    sources: u64,
    ell: u64,
    n: u64,
    k: u64,
    source_index: Option<u64>,
    params: &GEParams,
    output: &OutputArgs,
) -> Result<u8, Error> {
    if k < 1 || k > n {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    if sources < 1 || ell < 1 {
        return Err(Error::InvalidConfig("K and ell must be at least 1".into()));
    }
    let p = params.marginal_erasure_prob();
    // The generic analysis treats K / k as real-valued; the per-source exact
    // value needs the block structure, hence the divisibility requirement.
    let coded_exact = match source_index {
        Some(i) => {
            let cfg = SystemConfig::new(sources, ell, n, k)?;
            if i >= sources {
                return Err(Error::InvalidConfig(format!(
                    "source index {i} out of range (K = {sources})"
                )));
            }
            Some(aoi::coded_aoi_exact(i, &cfg, params))
        }
        None => None,
    };
    let out = AnalyzeOutput {
        schema_version: 1,
        command: "analyze",
        sources,
        ell,
        n,
        k,
        channel: *params,
        marginal_erasure_prob: p,
        event_probabilities: aoi::event_probs_for_code(n, k, params),
        uncoded_exact: aoi::uncoded_aoi(sources, ell, p, AoiMode::Exact),
        uncoded_large_k: aoi::uncoded_aoi(sources, ell, p, AoiMode::LargeK),
        coded_approx: aoi::coded_aoi_approx(n, k, sources, ell, params),
        large_k_validity: aoi::approx_validity(n, k, sources, params),
        source_index,
        coded_exact,
    };
    let text = match output.format {
        Format::Json => to_json(&out),
        Format::Csv => {
            let mut text = String::from(
                "K,ell,n,k,marginal_erasure_prob,p_a,p_b,p_c,uncoded_exact,uncoded_large_k,\
                 coded_approx,large_k_valid,source_index,coded_exact\n",
            );
            let ev = out.event_probabilities;
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                out.sources,
                out.ell,
                out.n,
                out.k,
                out.marginal_erasure_prob,
                ev.p_a,
                ev.p_b,
                ev.p_c,
                aoi_cell(&out.uncoded_exact),
                aoi_cell(&out.uncoded_large_k),
                aoi_cell(&out.coded_approx),
                out.large_k_validity.satisfied,
                out.source_index.map_or(String::new(), |i| i.to_string()),
                out.coded_exact
                    .as_ref()
                    .map_or(String::new(), aoi_cell),
            ));
            text
        }
    };
    write_output(output, &text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize, Clone)]
struct SweepRow {
    n: u64,
    k: u64,
    rate: f64,
    p_c: f64,
    aoi_approx: f64,
    aoi_gaussian: f64,
    aoi_uncoded: f64,
    gain: f64,
    region: Option<Region>,
}

#[derive(Serialize)]
struct SweepOutput {
    schema_version: u32,
    command: &'static str,
    n: u64,
    #[serde(rename = "K")]
    sources: u64,
    ell: u64,
    channel: GEParams,
    marginal_erasure_prob: f64,
    c_eps: f64,
    rows: Vec<SweepRow>,
    k_star: u64,
    rate_star: f64,
    aoi_star: f64,
    gain_star: f64,
}

fn cmd_sweep(
    n: u64,
    sources: u64,
    ell: u64,
    k_min: Option<u64>,
    k_max: Option<u64>,
    params: &GEParams,
    output: &OutputArgs,
) -> Result<u8, Error> {
    let k_min = k_min.unwrap_or(1);
    let k_max = k_max.unwrap_or(n);
    if !(1 <= k_min && k_min <= k_max && k_max <= n) {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= k_min <= k_max <= n, got k_min = {k_min}, k_max = {k_max}, n = {n}"
        )));
    }
    if sources < 1 || ell < 1 {
        return Err(Error::InvalidConfig("K and ell must be at least 1".into()));
    }
    let p = params.marginal_erasure_prob();
    let c_eps = gaussian::calibrate_c_eps(DEFAULT_C_EPS_TOLERANCE);
    let pmf = erasure::erasure_pmf_dp(n as usize - 1, params);
    let uncoded = aoi::uncoded_aoi(sources, ell, p, AoiMode::LargeK);

    let rows: Vec<SweepRow> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| {
            let p_c = p * pmf.bep(k as usize);
            let approx = aoi::coded_aoi_approx_from_pc(n, k, sources, ell, p_c);
            let mapping = GaussianApprox::from_k(k as f64, n, p, c_eps).ok();
            let aoi_gaussian = mapping
                .and_then(|m| gaussian::gaussian_aoi(m.c_n, n, sources, ell, p).ok())
                .map(|r| r.mean_aoi)
                .unwrap_or(approx.mean_aoi);
            SweepRow {
                n,
                k,
                rate: k as f64 / n as f64,
                p_c,
                aoi_approx: approx.mean_aoi,
                aoi_gaussian,
                aoi_uncoded: uncoded.mean_aoi,
                gain: uncoded.mean_aoi / approx.mean_aoi,
                region: mapping.map(|m| m.region),
            }
        })
        .collect();

    // Argmin over the emitted range, ties toward larger k.
    let mut best = &rows[0];
    for row in &rows {
        if row.aoi_approx <= best.aoi_approx {
            best = row;
        }
    }
    let (k_star, rate_star, aoi_star, gain_star) = (best.k, best.rate, best.aoi_approx, best.gain);

    let text = match output.format {
        Format::Json => to_json(&SweepOutput {
            schema_version: 1,
            command: "sweep",
            n,
            sources,
            ell,
            channel: *params,
            marginal_erasure_prob: p,
            c_eps,
            rows,
            k_star,
            rate_star,
            aoi_star,
            gain_star,
        }),
        Format::Csv => {
            let mut text =
                String::from("n,k,rate,p_c,aoi_approx,aoi_gaussian,aoi_uncoded,gain,region\n");
            for row in &rows {
                text.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    row.n,
                    row.k,
                    row.rate,
                    row.p_c,
                    row.aoi_approx,
                    row.aoi_gaussian,
                    row.aoi_uncoded,
                    row.gain,
                    row.region.map_or("", |r| r.label()),
                ));
            }
            text.push_str(&format!(
                "# k_star={k_star} rate={rate_star} aoi={aoi_star} gain={gain_star}\n"
            ));
            text
        }
    };
    write_output(output, &text)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SimulateOutput {
    schema_version: u32,
    command: &'static str,
    report: SimReport,
}

fn cmd_simulate(config_path: &PathBuf, output: &OutputArgs) -> Result<u8, Error> {
    let raw = fs::read_to_string(config_path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", config_path.display())))?;
    let cfg: SimConfig = serde_json::from_str(&raw)
        .map_err(|e| Error::InvalidConfig(format!("invalid simulation config: {e}")))?;
    let report = sim::simulate(&cfg)?;
    let no_delivery = report.no_delivery;

    let text = match output.format {
        Format::Json => to_json(&SimulateOutput {
            schema_version: 1,
            command: "simulate",
            report,
        }),
        Format::Csv => {
            let mut text = String::from(
                "source,position,mean_aoi,ex,ex2,deliveries,mean_aoi_analytical,rel_error\n",
            );
            for s in &report.per_source {
                text.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    s.source,
                    s.position,
                    s.mean_aoi,
                    s.ex,
                    s.ex2,
                    s.deliveries,
                    s.mean_aoi_analytical
                        .map_or("divergent".to_string(), |v| v.to_string()),
                    s.rel_error.map_or(String::new(), |v| v.to_string()),
                ));
            }
            text
        }
    };
    write_output(output, &text)?;
    Ok(if no_delivery { EXIT_DEGENERATE } else { EXIT_OK })
}

#[derive(Serialize)]
struct OptimizeOutput {
    schema_version: u32,
    command: &'static str,
    n: u64,
    #[serde(rename = "K")]
    sources: u64,
    ell: u64,
    channel: GEParams,
    marginal_erasure_prob: f64,
    k_star: u64,
    rate: f64,
    aoi_coded: f64,
    aoi_uncoded: f64,
    gain: f64,
    /// Asymptotic gain ceiling `1 + P`.
    gain_ceiling: f64,
    /// First-order optimal block size `n (1 - P)`.
    k_asymptotic: f64,
}

fn cmd_optimize(
    n: u64,
    sources: u64,
    ell: u64,
    params: &GEParams,
    output: &OutputArgs,
) -> Result<u8, Error> {
    if n < 1 || sources < 1 || ell < 1 {
        return Err(Error::InvalidConfig("n, K and ell must be at least 1".into()));
    }
    let p = params.marginal_erasure_prob();
    if p >= 1.0 {
        return Err(Error::Domain(
            "coding gain is undefined for an always-erasing channel".into(),
        ));
    }
    let gain = aoi::coding_gain(n, params, sources, ell);
    let out = OptimizeOutput {
        schema_version: 1,
        command: "optimize",
        n,
        sources,
        ell,
        channel: *params,
        marginal_erasure_prob: p,
        k_star: gain.k_star,
        rate: gain.k_star as f64 / n as f64,
        aoi_coded: gain.aoi_coded,
        aoi_uncoded: gain.aoi_uncoded,
        gain: gain.gain,
        gain_ceiling: gain.ceiling,
        k_asymptotic: n as f64 * (1.0 - p),
    };
    let text = match output.format {
        Format::Json => to_json(&out),
        Format::Csv => format!(
            "n,K,ell,marginal_erasure_prob,k_star,rate,aoi_coded,aoi_uncoded,gain,gain_ceiling,k_asymptotic\n\
             {},{},{},{},{},{},{},{},{},{},{}\n",
            out.n,
            out.sources,
            out.ell,
            out.marginal_erasure_prob,
            out.k_star,
            out.rate,
            out.aoi_coded,
            out.aoi_uncoded,
            out.gain,
            out.gain_ceiling,
            out.k_asymptotic,
        ),
    };
    write_output(output, &text)?;
    Ok(EXIT_OK)
}
