//! Trace-driven memory-hierarchy simulator: multi-level caches with SHiP
//! replacement, a DDR5 bank/channel timing model with RFM and PRAC
//! Rowhammer mitigations, and a row-access LLC prefetcher that piggy-backs
//! column-cluster prefetches on demand activations.

pub mod addrmap;
pub mod churn;
pub mod config;
pub mod cache;
pub mod num;
pub mod orap;
pub mod prefetch;
pub mod trace;

/// Concrete scalar the simulator runs on; the real-valued math underneath
/// is generic over [`num::Scalar`].
pub type Real = f64;

pub use addrmap::{DramCoord, MappingDescriptor};
pub use config::SimConfig;
pub use trace::{AccessKind, TraceRecord, TraceSpec};
