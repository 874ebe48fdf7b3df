use std::path::PathBuf;

use attn2d_core::cost::{cost_table, CostParams, CostRow, FabricParams, ModelPreset};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::opts::{emit, parse_list};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Model preset: 760M, 2.7B, 13B, 66B or 175B.
    #[arg(long, conflicts_with = "params", required_unless_present = "params")]
    preset: Option<String>,
    /// Explicit sizes `b,n,h,m,l`.
    #[arg(long)]
    params: Option<String>,
    /// Batch size (with --preset).
    #[arg(long, default_value_t = 1, conflicts_with = "params")]
    b: u64,
    /// Sequence lengths, comma-separated (with --preset).
    #[arg(long, default_value = "16384", conflicts_with = "params")]
    n: String,
    /// Processor counts, comma-separated.
    #[arg(long)]
    p: String,
    /// Seconds per message; enables time estimates together with --beta.
    #[arg(long, requires = "beta")]
    alpha: Option<f64>,
    /// Seconds per word.
    #[arg(long, requires = "alpha")]
    beta: Option<f64>,
    /// Scalar operations per second per processor.
    #[arg(long, default_value_t = 1e14)]
    flops_rate: f64,
    /// Count compute for full (non-causal) attention.
    #[arg(long)]
    no_causal: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Model {
    name: String,
    l: u64,
    m: u64,
    h: u64,
    b: u64,
    ns: Vec<u64>,
}

fn model(args: &CostArgs) -> Result<Model, CliError> {
    if let Some(raw) = &args.params {
        let v: Vec<u64> = parse_list(raw, "cost parameter")?;
        let [b, n, h, m, l] = v[..] else {
            return Err(CliError::Config(format!(
                "--params expects b,n,h,m,l, got {} values",
                v.len()
            )));
        };
        return Ok(Model {
            name: "custom".into(),
            l,
            m,
            h,
            b,
            ns: vec![n],
        });
    }
    let preset = ModelPreset::by_name(args.preset.as_deref().unwrap_or_default())?;
    Ok(Model {
        name: preset.name.into(),
        l: preset.l,
        m: preset.m,
        h: preset.h,
        b: args.b,
        ns: parse_list(&args.n, "sequence length")?,
    })
}

#[derive(Serialize)]
struct FlatRow<'a> {
    strategy: &'static str,
    n: u64,
    p: u64,
    feasible: bool,
    reason: &'a str,
    order: &'static str,
    words_per_layer: Option<f64>,
    leading_words_per_layer: Option<u64>,
    words_per_step: Option<f64>,
    step_dominant: &'static str,
    memory_simplified: bool,
    comm_seconds: Option<f64>,
    compute_seconds: Option<f64>,
    total_seconds: Option<f64>,
}

const CSV_HEADER: [&str; 14] = [
    "strategy",
    "n",
    "p",
    "feasible",
    "reason",
    "order",
    "words_per_layer",
    "leading_words_per_layer",
    "words_per_step",
    "step_dominant",
    "memory_simplified",
    "comm_seconds",
    "compute_seconds",
    "total_seconds",
];

fn flatten(n: u64, row: &CostRow) -> FlatRow<'_> {
    FlatRow {
        strategy: row.strategy.as_str(),
        n,
        p: row.p,
        feasible: row.feasible,
        reason: row.reason.as_deref().unwrap_or(""),
        order: row.order,
        words_per_layer: row.words_per_layer,
        leading_words_per_layer: row.leading_words_per_layer,
        words_per_step: row.words_per_step,
        step_dominant: match row.step_dominant {
            attn2d_core::cost::Dominance::Linear => "linear",
            attn2d_core::cost::Dominance::Attention => "attention",
            attn2d_core::cost::Dominance::Comparable => "comparable",
        },
        memory_simplified: row.memory_simplified,
        comm_seconds: row.time.as_ref().map(|t| t.comm_seconds),
        compute_seconds: row.time.as_ref().map(|t| t.compute_seconds),
        total_seconds: row.time.as_ref().map(|t| t.total_seconds),
    }
}

pub fn run(args: &CostArgs) -> Result<(), CliError> {
    let model = model(args)?;
    let ps: Vec<u64> = parse_list(&args.p, "processor count")?;
    let fabric = match (args.alpha, args.beta) {
        (Some(alpha), Some(beta)) => {
            let f = FabricParams {
                alpha,
                beta,
                flops_rate: args.flops_rate,
            };
            f.validate()?;
            Some(f)
        }
        _ => None,
    };
    let causal = !args.no_causal;

    let mut tables = Vec::new();
    for &n in &model.ns {
        let base = CostParams::new(model.b, n, model.h, model.m, model.l, 1)?;
        tables.push((n, cost_table(&base, &ps, fabric.as_ref(), causal)?));
    }
    let flat: Vec<FlatRow> = tables
        .iter()
        .flat_map(|(n, rows)| rows.iter().map(move |r| flatten(*n, r)))
        .collect();

    let text = match args.format {
        Format::Csv => {
            let mut out = format!(
                "# attn2d-cost v1 model={} l={} m={} h={} b={} causal={}\n",
                model.name, model.l, model.m, model.h, model.b, causal
            );
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(Vec::new());
            let csv_err = |e: csv::Error| CliError::Config(e.to_string());
            w.write_record(CSV_HEADER).map_err(csv_err)?;
            for row in &flat {
                w.serialize(row).map_err(csv_err)?;
            }
            let body = w
                .into_inner()
                .map_err(|e| CliError::Config(e.to_string()))?;
            out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
            out
        }
        Format::Json => {
            let value = json!({
                "schema": "attn2d-cost v1",
                "model": {
                    "name": model.name,
                    "l": model.l,
                    "m": model.m,
                    "h": model.h,
                    "b": model.b,
                },
                "causal": causal,
                "fabric": fabric,
                "rows": flat,
            });
            let mut s = serde_json::to_string_pretty(&value).expect("table serializes");
            s.push('\n');
            s
        }
    };
    emit(args.out.as_deref(), &text)
}
