use std::path::PathBuf;

use attn2d_core::cost::reconcile;
use attn2d_core::dist::{simulate, DistAttnConfig, GlobalInputs, Pass, Strategy};
use attn2d_core::kernel::{reference_attention, reference_attention_grad};
use attn2d_core::{DenseMatrix, Precision, Scalar};
use clap::Args;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::opts::{emit, precision, MaskArg};

/// Largest sequence length for which the dense oracle is evaluated.
pub const ORACLE_MAX_N: usize = 4096;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    strategy: Strategy,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    h: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = MaskArg::Causal)]
    mask: MaskArg,
    /// Score scale; defaults to 1/sqrt(h).
    #[arg(long)]
    scale: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    json: Option<PathBuf>,
}

/// SHA-256 over the little-endian `f64` image of every element, row-major.
fn checksum<T: Scalar>(m: &DenseMatrix<T>) -> String {
    let mut hasher = Sha256::new();
    for &x in m.data() {
        hasher.update(x.to_f64().to_le_bytes());
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn oracle_errors<T: Scalar>(
    cfg: &DistAttnConfig,
    x: &GlobalInputs<T>,
    out: &DenseMatrix<T>,
    grads: &attn2d_core::kernel::AttnGrads<T>,
) -> Result<Value, CliError> {
    let (q, k, v, d_out) = (
        x.q.cast::<f64>(),
        x.k.cast::<f64>(),
        x.v.cast::<f64>(),
        x.d_out.cast::<f64>(),
    );
    let o = reference_attention(&q, &k, &v, &cfg.mask, cfg.scale)?;
    let g = reference_attention_grad(&q, &k, &v, &cfg.mask, cfg.scale, &d_out)?;
    Ok(json!({
        "forward": out.cast::<f64>().max_rel_err(&o)?,
        "dq": grads.dq.cast::<f64>().max_rel_err(&g.dq)?,
        "dk": grads.dk.cast::<f64>().max_rel_err(&g.dk)?,
        "dv": grads.dv.cast::<f64>().max_rel_err(&g.dv)?,
    }))
}

fn report<T: Scalar>(cfg: &DistAttnConfig, seed: u64) -> Result<Value, CliError> {
    let x = GlobalInputs::<T>::random(cfg.n, cfg.h, seed);
    let r = simulate(cfg, &x, Pass::ForwardBackward)?;
    let grads = r.grads.as_ref().expect("backward requested");
    let max_error = if cfg.n <= ORACLE_MAX_N {
        oracle_errors(cfg, &x, &r.output, grads)?
    } else {
        Value::Null
    };
    let rec = reconcile(&r.ledger, cfg, Pass::ForwardBackward)?;
    let peaks: Vec<Value> = r
        .stream_peaks
        .iter()
        .map(|((at, name), peak)| json!({"r": at.r, "c": at.c, "stream": name, "peak": peak}))
        .collect();
    Ok(json!({
        "schema": "attn2d-simulate v1",
        "config": {
            "strategy": cfg.strategy.as_str(),
            "n": cfg.n,
            "h": cfg.h,
            "p": cfg.p,
            "mask": cfg.mask.name(),
            "scale": cfg.scale,
            "precision": cfg.precision.as_str(),
            "seed": seed,
        },
        "checksum": {
            "output": checksum(&r.output),
            "dq": checksum(&grads.dq),
            "dk": checksum(&grads.dk),
            "dv": checksum(&grads.dv),
        },
        "max_error": max_error,
        "ledger": r.ledger.to_json(),
        "ledger_conserved": r.ledger.is_conserved(),
        "reconcile_match": rec.all_match,
        "score_elems": r.score_elems,
        "saved_words": r.saved_words,
        "stream_peaks": peaks,
    }))
}

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let precision = precision()?;
    let scale = args.scale.unwrap_or(1.0 / (args.h.max(1) as f64).sqrt());
    let cfg = DistAttnConfig::new(args.strategy, args.n, args.h, args.p)
        .with_mask(args.mask.spec())
        .with_scale(scale)
        .with_precision(precision);
    cfg.validate()?;
    let value = match precision {
        Precision::Double => report::<f64>(&cfg, args.seed)?,
        Precision::Single => report::<f32>(&cfg, args.seed)?,
    };
    let mut text = serde_json::to_string_pretty(&value).expect("report serializes");
    text.push('\n');
    emit(args.json.as_deref(), &text)
}
