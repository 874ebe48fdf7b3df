//! Exact ledger predictions for the simulated strategies.
//!
//! Every count here follows from the payload shapes of one schedule step
//! times the number of steps; none is fitted to measurements.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::dist::{DistAttnConfig, Pass, Strategy};
use crate::error::{Error, Result};
use crate::mesh::{CommLedger, Counters, Phase, ProcCoord};

/// Predicted counters for one operation label on one processor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OpPrediction {
    pub phase: Phase,
    pub op: &'static str,
    pub counters: Counters,
}

fn symmetric(msgs: u64, words_per_msg: u64) -> Counters {
    Counters {
        words_sent: msgs * words_per_msg,
        words_recv: msgs * words_per_msg,
        msgs_sent: msgs,
        msgs_recv: msgs,
    }
}

fn op(phase: Phase, op: &'static str, msgs: u64, words_per_msg: u64) -> OpPrediction {
    OpPrediction {
        phase,
        op,
        counters: symmetric(msgs, words_per_msg),
    }
}

/// Per-operation counters that processor `at` should record when running
/// `cfg` for `pass`. Both 2D variants move identical volumes.
pub fn predict_ops(cfg: &DistAttnConfig, at: ProcCoord, pass: Pass) -> Result<Vec<OpPrediction>> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    if !grid.contains(at) {
        return Err(Error::Config(format!("{at} is outside the {}x{} grid", grid.rows(), grid.cols())));
    }
    let (n, h, p) = (cfg.n as u64, cfg.h as u64, cfg.p as u64);
    let b = n / p;
    let fwd = Phase::AttentionFwd;
    let bwd = Phase::AttentionBwd;
    let mut out = Vec::new();
    match cfg.strategy {
        Strategy::Attn2dNo | Strategy::Attn2dO => {
            let hops = grid.side() as u64 - 1;
            let transposes = u64::from(at.r != at.c);
            out.push(op(fwd, "transpose_kv", transposes, 2 * b * h));
            out.push(op(fwd, "gather_q", hops, b * h));
            out.push(op(fwd, "gather_kv", hops, 2 * b * h));
            out.push(op(fwd, "scatter_out", hops, b * (h + 2)));
            if pass == Pass::ForwardBackward {
                out.push(op(bwd, "gather_q_bundle", hops, b * (3 * h + 2)));
                out.push(op(bwd, "gather_kv", hops, 2 * b * h));
                out.push(op(bwd, "scatter_dq", hops, b * h));
                out.push(op(bwd, "scatter_dkv", hops, 2 * b * h));
                out.push(op(bwd, "transpose_dkv", transposes, 2 * b * h));
            }
        }
        Strategy::Ring => {
            let hops = p - 1;
            out.push(op(fwd, "gather_kv", hops, 2 * b * h));
            if pass == Pass::ForwardBackward {
                out.push(op(bwd, "gather_kv", hops, 2 * b * h));
                out.push(op(bwd, "scatter_dkv", hops, 2 * b * h));
            }
        }
    }
    Ok(out)
}

/// Predicted words sent by `at` during `phase`.
pub fn predicted_words(cfg: &DistAttnConfig, at: ProcCoord, phase: Phase) -> Result<u64> {
    Ok(predict_ops(cfg, at, Pass::ForwardBackward)?
        .iter()
        .filter(|o| o.phase == phase)
        .map(|o| o.counters.words_sent)
        .sum())
}

/// Predicted against measured counters for one processor and operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReconcileRow {
    pub at: ProcCoord,
    pub phase: Phase,
    pub op: String,
    pub predicted: Counters,
    pub measured: Counters,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReconcileReport {
    pub rows: Vec<ReconcileRow>,
    pub all_match: bool,
}

impl ReconcileReport {
    pub fn mismatches(&self) -> impl Iterator<Item = &ReconcileRow> {
        self.rows.iter().filter(|r| !r.matches)
    }
}

/// Compares a measured ledger against [`predict_ops`] for every processor
/// and every attention-phase operation that either side mentions.
pub fn reconcile(ledger: &CommLedger, cfg: &DistAttnConfig, pass: Pass) -> Result<ReconcileReport> {
    let grid = cfg.grid()?;
    if ledger.grid() != grid {
        return Err(Error::Config(format!(
            "ledger grid {}x{} does not match {} processors for {}",
            ledger.grid().rows(),
            ledger.grid().cols(),
            cfg.p,
            cfg.strategy
        )));
    }
    let mut rows = Vec::new();
    for at in grid.coords() {
        let predicted = predict_ops(cfg, at, pass)?;
        for phase in [Phase::AttentionFwd, Phase::AttentionBwd] {
            let mut labels: BTreeSet<String> = ledger.ops(phase).into_iter().collect();
            labels.extend(predicted.iter().filter(|o| o.phase == phase).map(|o| o.op.to_string()));
            for label in labels {
                let want = predicted
                    .iter()
                    .find(|o| o.phase == phase && o.op == label)
                    .map(|o| o.counters)
                    .unwrap_or_default();
                let got = ledger.proc_op(at, phase, &label);
                rows.push(ReconcileRow {
                    at,
                    phase,
                    op: label,
                    predicted: want,
                    measured: got,
                    matches: want == got,
                });
            }
        }
    }
    let all_match = rows.iter().all(|r| r.matches);
    Ok(ReconcileReport { rows, all_match })
}
