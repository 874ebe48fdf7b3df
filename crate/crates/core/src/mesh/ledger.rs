use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::mesh::grid::{ProcCoord, ProcGrid};

/// Which part of a run a transfer belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AttentionFwd,
    AttentionBwd,
    Layout,
    CollectiveInternal,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::AttentionFwd => "attention_fwd",
            Phase::AttentionBwd => "attention_bwd",
            Phase::Layout => "layout",
            Phase::CollectiveInternal => "collective_internal",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub words_sent: u64,
    pub words_recv: u64,
    pub msgs_sent: u64,
    pub msgs_recv: u64,
}

impl Counters {
    fn absorb(&mut self, other: &Counters) {
        self.words_sent += other.words_sent;
        self.words_recv += other.words_recv;
        self.msgs_sent += other.msgs_sent;
        self.msgs_recv += other.msgs_recv;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    rank: usize,
    phase: Phase,
    op: String,
}

/// Exact per-processor transfer counts, keyed by phase and operation label.
///
/// Words are scalar elements, independent of precision.
#[derive(Debug, Clone, PartialEq)]
pub struct CommLedger {
    grid: ProcGrid,
    entries: BTreeMap<Key, Counters>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LedgerRow {
    pub r: usize,
    pub c: usize,
    pub phase: Phase,
    pub op: String,
    pub words_sent: u64,
    pub words_recv: u64,
    pub msgs_sent: u64,
    pub msgs_recv: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerExport {
    pub per_proc: Vec<LedgerRow>,
    pub totals: Counters,
}

impl CommLedger {
    pub fn new(grid: ProcGrid) -> Self {
        Self {
            grid,
            entries: BTreeMap::new(),
        }
    }

    pub fn grid(&self) -> ProcGrid {
        self.grid
    }

    fn slot(&mut self, at: ProcCoord, phase: Phase, op: &str) -> &mut Counters {
        let key = Key {
            rank: self.grid.rank(at),
            phase,
            op: op.to_string(),
        };
        self.entries.entry(key).or_default()
    }

    pub fn charge_send(&mut self, at: ProcCoord, phase: Phase, op: &str, words: u64) {
        let slot = self.slot(at, phase, op);
        slot.words_sent += words;
        slot.msgs_sent += 1;
    }

    pub fn charge_recv(&mut self, at: ProcCoord, phase: Phase, op: &str, words: u64) {
        let slot = self.slot(at, phase, op);
        slot.words_recv += words;
        slot.msgs_recv += 1;
    }

    /// Adds arbitrary counts to one entry. Used to build expected ledgers
    /// and to perturb one for negative tests.
    pub fn record(&mut self, at: ProcCoord, phase: Phase, op: &str, delta: Counters) {
        self.slot(at, phase, op).absorb(&delta);
    }

    /// Sum over the entries that satisfy `keep`.
    fn sum(&self, keep: impl Fn(&Key) -> bool) -> Counters {
        let mut out = Counters::default();
        for (k, v) in &self.entries {
            if keep(k) {
                out.absorb(v);
            }
        }
        out
    }

    pub fn totals(&self) -> Counters {
        self.sum(|_| true)
    }

    pub fn proc_totals(&self, at: ProcCoord) -> Counters {
        let rank = self.grid.rank(at);
        self.sum(|k| k.rank == rank)
    }

    pub fn proc_phase(&self, at: ProcCoord, phase: Phase) -> Counters {
        let rank = self.grid.rank(at);
        self.sum(|k| k.rank == rank && k.phase == phase)
    }

    pub fn proc_op(&self, at: ProcCoord, phase: Phase, op: &str) -> Counters {
        let rank = self.grid.rank(at);
        self.sum(|k| k.rank == rank && k.phase == phase && k.op == op)
    }

    /// Operation labels that appear for `phase`, in sorted order.
    pub fn ops(&self, phase: Phase) -> Vec<String> {
        let mut ops: Vec<String> = self
            .entries
            .keys()
            .filter(|k| k.phase == phase)
            .map(|k| k.op.clone())
            .collect();
        ops.sort();
        ops.dedup();
        ops
    }

    /// Whether every sent word and message was received somewhere.
    pub fn is_conserved(&self) -> bool {
        let t = self.totals();
        t.words_sent == t.words_recv && t.msgs_sent == t.msgs_recv
    }

    pub fn rows(&self) -> Vec<LedgerRow> {
        self.entries
            .iter()
            .map(|(k, v)| {
                let at = self.grid.coord(k.rank);
                LedgerRow {
                    r: at.r,
                    c: at.c,
                    phase: k.phase,
                    op: k.op.clone(),
                    words_sent: v.words_sent,
                    words_recv: v.words_recv,
                    msgs_sent: v.msgs_sent,
                    msgs_recv: v.msgs_recv,
                }
            })
            .collect()
    }

    pub fn export(&self) -> LedgerExport {
        LedgerExport {
            per_proc: self.rows(),
            totals: self.totals(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.export()).expect("ledger rows serialize")
    }
}
