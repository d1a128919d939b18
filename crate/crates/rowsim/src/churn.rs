//! Cache-churn stimulus: a repeating access pattern on a tiny LRU cache
//! where a next-line prefetcher raises the demand hit rate from 40% to 80%
//! while inflating cache fills by exactly one third.
//!
//! The pattern was found by brute-force search over repeating sequences of
//! at most 8 distinct blocks (see the oracle test in `tests/churn_oracle.rs`)
//! and is committed here as data: six distinct blocks, period ten, steady
//! state from the second period on.

use crate::cache::{AccessClass, AccessOutcome, Cache, FillClass, PrefetchEngine};
use crate::config::{CacheConfig, ReplacementKind};
use crate::prefetch::NextLinePrefetcher;

/// Block-number sequence of one period.
pub const CHURN_PATTERN: [u64; 10] = [0, 0, 0, 1, 2, 3, 4, 0, 5, 1];

/// Periods to run before measuring; the pattern reaches steady state after
/// one period.
pub const CHURN_WARMUP_PERIODS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChurnResult {
    pub demand_accesses: u64,
    pub demand_hits: u64,
    pub fills: u64,
}

impl ChurnResult {
    pub fn hit_rate(&self) -> f64 {
        self.demand_hits as f64 / self.demand_accesses as f64
    }
}

fn churn_cache() -> Cache {
    // 4-entry fully-associative LRU.
    Cache::new(&CacheConfig {
        name: "churn".into(),
        size_bytes: 4 * 64,
        ways: 4,
        latency_cycles: 1,
        mshr_entries: 4,
        replacement: ReplacementKind::Lru,
    })
}

/// Replay `periods` measured periods of the stimulus (after warmup) through
/// the real cache module with immediate fills, with or without the
/// next-line prefetcher.
pub fn replay_churn(with_prefetcher: bool, periods: usize) -> ChurnResult {
    let mut cache = churn_cache();
    let mut pf = NextLinePrefetcher;
    let mut result = ChurnResult {
        demand_accesses: 0,
        demand_hits: 0,
        fills: 0,
    };
    let ip = 0x400000;
    for period in 0..CHURN_WARMUP_PERIODS + periods {
        let measure = period >= CHURN_WARMUP_PERIODS;
        for &block in CHURN_PATTERN.iter() {
            if measure {
                result.demand_accesses += 1;
            }
            match cache.access(block, ip, false, AccessClass::Demand, 0, 0) {
                AccessOutcome::Hit { .. } => {
                    if measure {
                        result.demand_hits += 1;
                    }
                }
                AccessOutcome::MissAllocated => {
                    cache.fill(block, FillClass::Demand { ip }, 0);
                    if measure {
                        result.fills += 1;
                    }
                }
                other => panic!("unexpected outcome {other:?}"),
            }
            if with_prefetcher {
                let mut cands = Vec::new();
                pf.on_demand(ip, block, &mut cands);
                for target in cands {
                    match cache.access(
                        target,
                        ip,
                        false,
                        AccessClass::Prefetch(PrefetchEngine::Upstream),
                        0,
                        0,
                    ) {
                        AccessOutcome::Hit { .. } => {}
                        AccessOutcome::MissAllocated => {
                            cache.fill(target, FillClass::Prefetch(PrefetchEngine::Upstream), 0);
                            if measure {
                                result.fills += 1;
                            }
                        }
                        other => panic!("unexpected outcome {other:?}"),
                    }
                }
            }
        }
    }
    result
}
