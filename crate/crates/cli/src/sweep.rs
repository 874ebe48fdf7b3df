use std::path::PathBuf;

use attn2d_core::cost::{predicted_words, reconcile};
use attn2d_core::dist::{simulate, DistAttnConfig, GlobalInputs, Pass, Strategy};
use attn2d_core::mesh::Phase;
use attn2d_core::{Precision, Scalar};
use clap::Args;
use serde::Serialize;

use crate::error::CliError;
use crate::opts::{emit, parse_list, precision, MaskArg};

/// First line of every sweep CSV.
pub const SCHEMA: &str = "# attn2d-sweep v1";

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Strategies, comma-separated.
    #[arg(long, default_value = "attn2d_no,attn2d_o,ring")]
    strategies: String,
    /// Sequence lengths, comma-separated.
    #[arg(long)]
    n: String,
    /// Processor counts, comma-separated. May be empty.
    #[arg(long)]
    p: String,
    /// Head dimension.
    #[arg(long, default_value_t = 8)]
    h: usize,
    #[arg(long, value_enum, default_value_t = MaskArg::Causal)]
    mask: MaskArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Row {
    strategy: &'static str,
    n: usize,
    h: usize,
    p: usize,
    mask: &'static str,
    phase: &'static str,
    words_measured: u64,
    words_predicted: u64,
    #[serde(rename = "match")]
    matches: bool,
    score_elems_min: u64,
    score_elems_max: u64,
}

fn measure<T: Scalar>(cfg: &DistAttnConfig, seed: u64) -> Result<Vec<Row>, CliError> {
    let x = GlobalInputs::<T>::random(cfg.n, cfg.h, seed);
    let r = simulate(cfg, &x, Pass::ForwardBackward)?;
    let all_match = reconcile(&r.ledger, cfg, Pass::ForwardBackward)?.all_match;
    let grid = cfg.grid()?;
    let min = r.score_elems.iter().copied().min().unwrap_or(0);
    let max = r.score_elems.iter().copied().max().unwrap_or(0);
    let mut rows = Vec::new();
    for phase in [Phase::AttentionFwd, Phase::AttentionBwd] {
        let mut measured = 0;
        let mut predicted = 0;
        for at in grid.coords() {
            measured = measured.max(r.ledger.proc_phase(at, phase).words_sent);
            predicted = predicted.max(predicted_words(cfg, at, phase)?);
        }
        rows.push(Row {
            strategy: cfg.strategy.as_str(),
            n: cfg.n,
            h: cfg.h,
            p: cfg.p,
            mask: cfg.mask.name(),
            phase: phase.as_str(),
            words_measured: measured,
            words_predicted: predicted,
            matches: all_match && measured == predicted,
            score_elems_min: min,
            score_elems_max: max,
        });
    }
    Ok(rows)
}

pub fn run(args: &SweepArgs) -> Result<(), CliError> {
    let precision = precision()?;
    let mut strategies: Vec<Strategy> = parse_list(&args.strategies, "strategy")?;
    let mut ns: Vec<usize> = parse_list(&args.n, "sequence length")?;
    let mut ps: Vec<usize> = parse_list(&args.p, "processor count")?;
    strategies.sort();
    strategies.dedup();
    ns.sort_unstable();
    ns.dedup();
    ps.sort_unstable();
    ps.dedup();

    let mut out = String::new();
    out.push_str(SCHEMA);
    out.push('\n');
    out.push_str("# words are the per-processor maximum of words sent in the phase\n");
    let mut skipped = Vec::new();
    let mut rows = Vec::new();
    for &strategy in &strategies {
        for &n in &ns {
            for &p in &ps {
                let cfg = DistAttnConfig::new(strategy, n, args.h, p)
                    .with_mask(args.mask.spec())
                    .with_precision(precision);
                if let Err(e) = cfg.validate() {
                    skipped.push(format!("# skipped {strategy} n={n} p={p}: {e}\n"));
                    continue;
                }
                rows.extend(match precision {
                    Precision::Double => measure::<f64>(&cfg, args.seed)?,
                    Precision::Single => measure::<f32>(&cfg, args.seed)?,
                });
            }
        }
    }
    for s in &skipped {
        out.push_str(s);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "strategy",
            "n",
            "h",
            "p",
            "mask",
            "phase",
            "words_measured",
            "words_predicted",
            "match",
            "score_elems_min",
            "score_elems_max",
        ])
        .map_err(|e| CliError::Config(e.to_string()))?;
    }
    for row in &rows {
        w.serialize(row).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
    emit(args.out.as_deref(), &out)
}
