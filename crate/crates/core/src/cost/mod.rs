//! Analytic cost model.
//!
//! [`analytic`] holds the per-layer communication orders of the common
//! attention parallelization strategies, the per-step and memory totals, a
//! latency/bandwidth time estimator and the model presets. [`schedule`]
//! predicts the exact per-processor ledger counts of the simulated
//! strategies and reconciles them against a measured [`CommLedger`].
//!
//! [`CommLedger`]: crate::mesh::CommLedger

pub mod analytic;
pub mod schedule;

pub use analytic::{
    comm_cost, cost_table, estimate_time, memory_cost, total_step_cost, CommCost, CostParams,
    CostRow, CostStrategy, Dominance, FabricParams, MemoryCost, ModelPreset, StepCost,
    TimeEstimate,
};
pub use schedule::{predict_ops, predicted_words, reconcile, OpPrediction, ReconcileReport, ReconcileRow};
