//! Closed-form communication, memory and time models.
//!
//! Words are scalars per processor. Per-layer counts cover one forward and
//! one backward pass of the attention operation for all `b·m` (batch, head)
//! pairs.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::cost::schedule::predict_ops;
use crate::dist::{DistAttnConfig, Pass, Strategy};
use crate::error::{Error, Result};
use crate::mesh::{exact_sqrt, ProcCoord};

/// Attention parallelization strategies covered by the analytic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CostStrategy {
    Megatron,
    MegatronSp,
    SeqPar,
    Ring,
    Lightseq,
    Ulysses,
    Usp,
    Attn2d,
}

impl CostStrategy {
    pub const ALL: [CostStrategy; 8] = [
        CostStrategy::Megatron,
        CostStrategy::MegatronSp,
        CostStrategy::SeqPar,
        CostStrategy::Ring,
        CostStrategy::Lightseq,
        CostStrategy::Ulysses,
        CostStrategy::Usp,
        CostStrategy::Attn2d,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CostStrategy::Megatron => "megatron",
            CostStrategy::MegatronSp => "megatron_sp",
            CostStrategy::SeqPar => "seq_par",
            CostStrategy::Ring => "ring",
            CostStrategy::Lightseq => "lightseq",
            CostStrategy::Ulysses => "ulysses",
            CostStrategy::Usp => "usp",
            CostStrategy::Attn2d => "attn2d",
        }
    }

    /// Big-O form of the per-layer communication cost.
    pub fn order(self) -> &'static str {
        match self {
            CostStrategy::Ulysses | CostStrategy::Usp => "O(BNH)",
            CostStrategy::Attn2d => "O(BNMH/sqrt(P))",
            _ => "O(BNMH)",
        }
    }

    /// Whether the degree of parallelism is bounded by the head count.
    pub fn head_limited(self) -> bool {
        matches!(self, CostStrategy::Ulysses | CostStrategy::Usp)
    }
}

impl fmt::Display for CostStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CostStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        CostStrategy::ALL
            .into_iter()
            .find(|c| c.as_str() == key)
            .ok_or_else(|| Error::Config(format!("unknown cost strategy '{s}'")))
    }
}

/// Model architecture preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModelPreset {
    pub name: &'static str,
    /// Layers.
    pub l: u64,
    /// Attention heads.
    pub m: u64,
    /// Head dimension.
    pub h: u64,
}

impl ModelPreset {
    pub const ALL: [ModelPreset; 5] = [
        ModelPreset { name: "760M", l: 24, m: 16, h: 96 },
        ModelPreset { name: "2.7B", l: 32, m: 32, h: 80 },
        ModelPreset { name: "13B", l: 40, m: 40, h: 128 },
        ModelPreset { name: "66B", l: 64, m: 72, h: 128 },
        ModelPreset { name: "175B", l: 96, m: 96, h: 128 },
    ];

    pub fn hidden(&self) -> u64 {
        self.m * self.h
    }

    pub fn by_name(name: &str) -> Result<Self> {
        ModelPreset::ALL
            .into_iter()
            .find(|p| p.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| {
                let names: Vec<&str> = ModelPreset::ALL.iter().map(|p| p.name).collect();
                Error::Config(format!("unknown preset '{name}' (known: {})", names.join(", ")))
            })
    }
}

/// Problem sizes for the analytic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CostParams {
    pub b: u64,
    pub n: u64,
    pub h: u64,
    pub m: u64,
    pub l: u64,
    pub p: u64,
}

impl CostParams {
    pub fn new(b: u64, n: u64, h: u64, m: u64, l: u64, p: u64) -> Result<Self> {
        let params = Self { b, n, h, m, l, p };
        params.validate()?;
        Ok(params)
    }

    pub fn from_preset(preset: &ModelPreset, b: u64, n: u64, p: u64) -> Result<Self> {
        Self::new(b, n, preset.h, preset.m, preset.l, p)
    }

    pub fn with_p(self, p: u64) -> Result<Self> {
        Self::new(self.b, self.n, self.h, self.m, self.l, p)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.b, self.n, self.h, self.m, self.l, self.p].contains(&0) {
            return Err(Error::Config("cost parameters must all be positive".into()));
        }
        Ok(())
    }

    fn bnmh(&self) -> f64 {
        (self.b * self.n * self.m * self.h) as f64
    }

    fn sqrt_p(&self) -> f64 {
        (self.p as f64).sqrt()
    }
}

/// Per-layer communication of one strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommCost {
    pub strategy: CostStrategy,
    pub order: &'static str,
    /// The big-O expression evaluated without constants.
    pub asymptotic_words: f64,
    /// Exact per-processor words from the simulated schedule, for the
    /// strategies that are simulated and only when the sizes fit its layout.
    pub leading_words: Option<u64>,
}

fn simulated_words(strategy: Strategy, params: &CostParams) -> Option<u64> {
    let cfg = DistAttnConfig::new(
        strategy,
        usize::try_from(params.n).ok()?,
        usize::try_from(params.h).ok()?,
        usize::try_from(params.p).ok()?,
    );
    let grid = cfg.grid().ok()?;
    // the busiest processor: off the grid diagonal when there is one
    let at = if grid.is_square() && grid.side() > 1 {
        ProcCoord::new(0, 1)
    } else {
        ProcCoord::new(0, 0)
    };
    let ops = predict_ops(&cfg, at, Pass::ForwardBackward).ok()?;
    let per_head: u64 = ops.iter().map(|o| o.counters.words_sent).sum();
    Some(per_head * params.b * params.m)
}

/// Per-layer, per-processor communication words.
pub fn comm_cost(strategy: CostStrategy, params: &CostParams) -> Result<CommCost> {
    params.validate()?;
    if strategy.head_limited() && params.p > params.m {
        return Err(Error::Infeasible {
            strategy: strategy.as_str(),
            reason: format!(
                "parallel degree {} exceeds the {} attention heads",
                params.p, params.m
            ),
        });
    }
    let asymptotic_words = match strategy {
        CostStrategy::Ulysses | CostStrategy::Usp => (params.b * params.n * params.h) as f64,
        CostStrategy::Attn2d => params.bnmh() / params.sqrt_p(),
        _ => params.bnmh(),
    };
    let leading_words = match strategy {
        CostStrategy::Ring => simulated_words(Strategy::Ring, params),
        CostStrategy::Attn2d if exact_sqrt(params.p as usize).is_some() => {
            simulated_words(Strategy::Attn2dNo, params)
        }
        _ => None,
    };
    Ok(CommCost {
        strategy,
        order: strategy.order(),
        asymptotic_words,
        leading_words,
    })
}

/// Which term of a two-term total is larger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    Linear,
    Attention,
    Comparable,
}

/// Communication for one training step of a 2D-parallel model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepCost {
    /// Linear-layer term `L·M²·H²`.
    pub linear: f64,
    /// Attention term `B·L·M·N·H/√P`.
    pub attention: f64,
    pub total: f64,
    /// Decided by comparing `N` with the hidden size `M·H`.
    pub dominant: Dominance,
}

pub fn total_step_cost(params: &CostParams) -> Result<StepCost> {
    params.validate()?;
    let linear = (params.l * params.m * params.m * params.h * params.h) as f64;
    let attention = params.l as f64 * params.bnmh() / params.sqrt_p();
    let hidden = params.m * params.h;
    let dominant = match params.n.cmp(&hidden) {
        std::cmp::Ordering::Greater => Dominance::Attention,
        std::cmp::Ordering::Less => Dominance::Linear,
        std::cmp::Ordering::Equal => Dominance::Comparable,
    };
    Ok(StepCost {
        linear,
        attention,
        total: linear + attention,
        dominant,
    })
}

/// Resident words per processor over a training step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryCost {
    /// Saved activations of every layer: `B·L·M·N·H/P`.
    pub stored: f64,
    /// Largest per-layer working set that is freed after the layer.
    pub transient: f64,
    /// The stored term alone describes the total.
    pub simplified: bool,
    /// Both terms are equal.
    pub boundary: bool,
}

/// Memory per processor. The transient term depends on how much of the
/// sequence a strategy gathers at once: `N/√P` tokens for the 2D grid, one
/// `N/P` block in flight for the ring, and a full sequence for the others.
pub fn memory_cost(strategy: CostStrategy, params: &CostParams) -> Result<MemoryCost> {
    params.validate()?;
    let p = params.p as f64;
    let stored = (params.l as f64) * params.bnmh() / p;
    let bnh = (params.b * params.n * params.h) as f64;
    let transient = match strategy {
        CostStrategy::Attn2d => bnh / params.sqrt_p(),
        CostStrategy::Ring => bnh / p,
        _ => bnh,
    };
    Ok(MemoryCost {
        stored,
        transient,
        simplified: stored > transient,
        boundary: stored == transient,
    })
}

/// Latency/bandwidth/throughput parameters of a fabric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FabricParams {
    /// Seconds per message.
    pub alpha: f64,
    /// Seconds per word.
    pub beta: f64,
    /// Scalar operations per second per processor.
    pub flops_rate: f64,
}

impl FabricParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.flops_rate > 0.0) {
            return Err(Error::Config(
                "alpha and beta must be nonnegative and flops_rate positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeEstimate {
    pub messages: f64,
    pub words: f64,
    pub flops: f64,
    pub comm_seconds: f64,
    pub compute_seconds: f64,
    pub total_seconds: f64,
}

/// Messages per layer and processor. Ring and the 2D grid follow their
/// simulated schedules; the formula-only strategies are charged one ring
/// collective in each pass.
fn messages_per_layer(strategy: CostStrategy, params: &CostParams) -> f64 {
    let p = params.p as f64;
    match strategy {
        CostStrategy::Ring => 3.0 * (p - 1.0),
        CostStrategy::Attn2d => 8.0 * (params.sqrt_p() - 1.0) + 2.0 * f64::from(params.p > 1),
        _ => 2.0 * (p - 1.0),
    }
}

/// Scalar operations per evaluated score element: `4H` forward (scores and
/// weighted values) and `8H` backward (recomputed scores plus three
/// gradient products).
fn flops_per_score(h: u64) -> f64 {
    12.0 * h as f64
}

/// Seconds per training step: `α·messages + β·words + flops/flops_rate`.
/// Words come from the big-O expressions so ratios between strategies are
/// exact.
pub fn estimate_time(
    strategy: CostStrategy,
    params: &CostParams,
    fabric: &FabricParams,
    causal: bool,
) -> Result<TimeEstimate> {
    fabric.validate()?;
    let comm = comm_cost(strategy, params)?;
    let l = params.l as f64;
    let messages = l * messages_per_layer(strategy, params);
    let words = l * comm.asymptotic_words;
    let n = params.n as f64;
    let scores = if causal { n * (n + 1.0) / 2.0 } else { n * n };
    let flops = l * (params.b * params.m) as f64 * scores * flops_per_score(params.h)
        / params.p as f64;
    let comm_seconds = fabric.alpha * messages + fabric.beta * words;
    let compute_seconds = flops / fabric.flops_rate;
    Ok(TimeEstimate {
        messages,
        words,
        flops,
        comm_seconds,
        compute_seconds,
        total_seconds: comm_seconds + compute_seconds,
    })
}

/// One strategy at one processor count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    pub strategy: CostStrategy,
    pub p: u64,
    pub feasible: bool,
    pub reason: Option<String>,
    pub order: &'static str,
    pub words_per_layer: Option<f64>,
    pub leading_words_per_layer: Option<u64>,
    pub words_per_step: Option<f64>,
    pub step_dominant: Dominance,
    pub memory_simplified: bool,
    pub time: Option<TimeEstimate>,
}

/// Every strategy at every processor count in `p_list`. Infeasible
/// combinations are kept as flagged rows.
pub fn cost_table(
    base: &CostParams,
    p_list: &[u64],
    fabric: Option<&FabricParams>,
    causal: bool,
) -> Result<Vec<CostRow>> {
    let mut rows = Vec::new();
    for &p in p_list {
        let params = base.with_p(p)?;
        let step = total_step_cost(&params)?;
        for strategy in CostStrategy::ALL {
            let memory = memory_cost(strategy, &params)?;
            let row = match comm_cost(strategy, &params) {
                Ok(c) => CostRow {
                    strategy,
                    p,
                    feasible: true,
                    reason: None,
                    order: c.order,
                    words_per_layer: Some(c.asymptotic_words),
                    leading_words_per_layer: c.leading_words,
                    words_per_step: Some(c.asymptotic_words * params.l as f64),
                    step_dominant: step.dominant,
                    memory_simplified: memory.simplified,
                    time: fabric
                        .map(|f| estimate_time(strategy, &params, f, causal))
                        .transpose()?,
                },
                Err(Error::Infeasible { reason, .. }) => CostRow {
                    strategy,
                    p,
                    feasible: false,
                    reason: Some(reason),
                    order: strategy.order(),
                    words_per_layer: None,
                    leading_words_per_layer: None,
                    words_per_step: None,
                    step_dominant: step.dominant,
                    memory_simplified: memory.simplified,
                    time: None,
                },
                Err(e) => return Err(e),
            };
            rows.push(row);
        }
    }
    Ok(rows)
}
