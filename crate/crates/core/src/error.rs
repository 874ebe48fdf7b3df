use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("division by zero in row {row}")]
    DivisionByZero { row: usize },

    #[error("query row {row} is fully masked")]
    FullyMaskedRow { row: usize },

    #[error("deadlock: {0}")]
    Deadlock(String),

    #[error("simulation fault on p({r},{c}): {kind}")]
    Fault { r: usize, c: usize, kind: FaultKind },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("strategy {strategy} is infeasible: {reason}")]
    Infeasible {
        strategy: &'static str,
        reason: String,
    },

    #[error("invalid layout: {0}")]
    Layout(String),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}

/// Misuse of the simulated fabric detected at runtime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultKind {
    /// A receive buffer was read before its transfer was waited on.
    UnwaitedRead { transfer: u64 },
    /// A stream would hold more live buffers than its capacity.
    BufferOverflow {
        stream: String,
        capacity: usize,
    },
    /// Program finished with transfers that were never waited on.
    LeakedHandles { count: usize },
    /// Messages were sent but never received.
    UndeliveredMessages { count: usize },
    /// A handle or buffer that does not belong to this processor.
    UnknownTransfer { transfer: u64 },
    /// `to`/`from` describe an exchange the simulator cannot pair.
    AsymmetricSelfExchange,
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultKind::UnwaitedRead { transfer } => {
                write!(f, "read of buffer for transfer #{transfer} before wait")
            }
            FaultKind::BufferOverflow { stream, capacity } => {
                write!(f, "stream '{stream}' exceeded {capacity} live buffers")
            }
            FaultKind::LeakedHandles { count } => write!(f, "{count} transfer(s) never waited"),
            FaultKind::UndeliveredMessages { count } => {
                write!(f, "{count} message(s) sent but never received")
            }
            FaultKind::UnknownTransfer { transfer } => write!(f, "unknown transfer #{transfer}"),
            FaultKind::AsymmetricSelfExchange => {
                write!(f, "self-send must also receive from self")
            }
        }
    }
}
