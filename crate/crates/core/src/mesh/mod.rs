//! Deterministic simulated processor grid.

mod collectives;
mod grid;
mod ledger;
mod payload;
mod spmd;

pub use collectives::{all_gather, check_partition, cyclic_slices, reduce_scatter};
pub use grid::{exact_sqrt, ProcCoord, ProcGrid};
pub use ledger::{CommLedger, Counters, LedgerExport, LedgerRow, Phase};
pub use payload::{Part, PartShape, Payload, PayloadReader, Shardable};
pub use spmd::{
    run_spmd, run_spmd_with, AsyncHandle, Comm, Lease, RecvBuffer, Slot, SpmdRun, Stream,
};
