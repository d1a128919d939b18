//! Row-access LLC prefetcher: Next-Column engine with hybrid IP/row
//! confidence.
//!
//! Confidence acts as a pending-prefetch budget. Every prefetch fill
//! advances a saturating issue counter whose rollover debits confidence;
//! every demand hit on a prefetched line advances a useful counter whose
//! rollover credits it. With issue max `i` and confidence step `c`, an
//! entry starting from full confidence can sink at most `floor(255*i/c)`
//! fills without any usefulness feedback, and the long-run equilibrium sits
//! at a usefulness of `useful_max / issue_max`.
//!
//! On an LLC miss the engine combines IP and row confidence (max), gates
//! low-confidence triggers probabilistically, translates confidence into a
//! cluster depth, and walks the next column clusters of the trigger's own
//! row so the resulting reads piggy-back on the activation the miss already
//! paid for.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::addrmap::{DramCoord, MappingDescriptor, BLOCK_BYTES};
use crate::cache::PrefetchEngine;
use crate::config::OrapParams;
use thiserror::Error;

pub const CONFIDENCE_MAX: u8 = 255;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OrapError {
    #[error("useful_max {useful} exceeds issue_max {issue}")]
    UsefulExceedsIssue { issue: u8, useful: u8 },
    #[error("counter maximum {0} outside supported range 1..=6")]
    CounterRange(u8),
    #[error("confidence increment {0} outside supported range 1..=4")]
    IncrementRange(u8),
}

/// Long-run usefulness a (issue_max, useful_max) pair converges to.
/// Pairs with useful_max > issue_max are rejected.
pub fn target_usefulness(issue_max: u8, useful_max: u8) -> Result<f64, OrapError> {
    if !(1..=6).contains(&issue_max) {
        return Err(OrapError::CounterRange(issue_max));
    }
    if !(1..=6).contains(&useful_max) {
        return Err(OrapError::CounterRange(useful_max));
    }
    if useful_max > issue_max {
        return Err(OrapError::UsefulExceedsIssue {
            issue: issue_max,
            useful: useful_max,
        });
    }
    Ok(useful_max as f64 / issue_max as f64)
}

/// Upper bound on fills one entry can absorb from full confidence with zero
/// usefulness feedback.
pub fn max_pending(issue_max: u8, increment: u8) -> Result<u32, OrapError> {
    if !(1..=6).contains(&issue_max) {
        return Err(OrapError::CounterRange(issue_max));
    }
    if !(1..=4).contains(&increment) {
        return Err(OrapError::IncrementRange(increment));
    }
    Ok(CONFIDENCE_MAX as u32 * issue_max as u32 / increment as u32)
}

/// 16-bit fold used to index both confidence tables.
pub fn hash16(x: u64) -> u16 {
    (x ^ (x >> 16) ^ (x >> 32) ^ (x >> 48)) as u16
}

/// Per-engine confidence lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lane {
    pub confidence: u8,
    pub issue: u8,
    pub useful: u8,
}

#[derive(Debug, Clone)]
struct TableEntry {
    valid: bool,
    tag: u16,
    lru: u8,
    lanes: [Lane; 2],
}

/// Set-associative saturating-confidence table (shared geometry for the
/// IP-indexed and row-indexed variants). Lookups allocate missing entries
/// at the configured initial confidence.
#[derive(Debug)]
pub struct ConfidenceTable {
    sets: usize,
    ways: usize,
    entries: Vec<TableEntry>,
    init_confidence: u8,
}

const LANE_NEXT_COLUMN: usize = 0;
const LANE_HSD: usize = 1;

fn lane_index(engine: PrefetchEngine) -> usize {
    match engine {
        PrefetchEngine::NextColumn => LANE_NEXT_COLUMN,
        PrefetchEngine::Hsd => LANE_HSD,
        PrefetchEngine::Upstream => LANE_NEXT_COLUMN,
    }
}

impl ConfidenceTable {
    pub fn new(entries: u32, ways: u32, init_confidence: u8) -> Self {
        let sets = (entries / ways) as usize;
        ConfidenceTable {
            sets,
            ways: ways as usize,
            entries: vec![
                TableEntry {
                    valid: false,
                    tag: 0,
                    lru: 0,
                    lanes: [Lane {
                        confidence: 0,
                        issue: 0,
                        useful: 0,
                    }; 2],
                };
                (entries as usize).max(1)
            ],
            init_confidence,
        }
    }

    fn set_and_tag(&self, key: u16) -> (usize, u16) {
        let set = (key as usize) & (self.sets - 1);
        let tag = key >> self.sets.trailing_zeros();
        (set, tag)
    }

    /// True-LRU touch using per-entry counters.
    fn touch(&mut self, set: usize, way: usize) {
        let base = set * self.ways;
        let old = self.entries[base + way].lru;
        for w in 0..self.ways {
            let e = &mut self.entries[base + w];
            if w == way {
                e.lru = 0;
            } else if e.valid && e.lru < old {
                e.lru += 1;
            }
        }
    }

    fn lookup_or_insert(&mut self, key: u16) -> usize {
        let (set, tag) = self.set_and_tag(key);
        let base = set * self.ways;
        if let Some(w) = (0..self.ways).find(|&w| {
            let e = &self.entries[base + w];
            e.valid && e.tag == tag
        }) {
            self.touch(set, w);
            return base + w;
        }
        // Allocate: invalid way first, else LRU (largest counter, lowest
        // index tie-break).
        let w = (0..self.ways)
            .find(|&w| !self.entries[base + w].valid)
            .unwrap_or_else(|| {
                (0..self.ways)
                    .max_by_key(|&w| (self.entries[base + w].lru, std::cmp::Reverse(w)))
                    .unwrap()
            });
        self.entries[base + w] = TableEntry {
            valid: true,
            tag,
            lru: self.entries[base + w].lru,
            lanes: [Lane {
                confidence: self.init_confidence,
                issue: 0,
                useful: 0,
            }; 2],
        };
        self.touch(set, w);
        base + w
    }

    /// Current confidence for `key` in the given engine lane, allocating a
    /// fresh entry when absent.
    pub fn confidence(&mut self, key: u16, engine: PrefetchEngine) -> u8 {
        let idx = self.lookup_or_insert(key);
        self.entries[idx].lanes[lane_index(engine)].confidence
    }

    /// Peek without allocating or touching LRU state.
    pub fn peek(&self, key: u16, engine: PrefetchEngine) -> Option<Lane> {
        let (set, tag) = self.set_and_tag(key);
        let base = set * self.ways;
        (0..self.ways)
            .find(|&w| {
                let e = &self.entries[base + w];
                e.valid && e.tag == tag
            })
            .map(|w| self.entries[base + w].lanes[lane_index(engine)])
    }

    /// Prefetch fill: advance the issue counter; rollover at `issue_max`
    /// debits confidence by `increment`.
    pub fn on_fill(&mut self, key: u16, engine: PrefetchEngine, issue_max: u8, increment: u8) {
        let idx = self.lookup_or_insert(key);
        let lane = &mut self.entries[idx].lanes[lane_index(engine)];
        lane.issue += 1;
        if lane.issue >= issue_max {
            lane.issue = 0;
            lane.confidence = lane.confidence.saturating_sub(increment);
        }
    }

    /// Demand hit on a prefetched line: advance the useful counter;
    /// rollover at `useful_max` credits confidence by `increment`.
    pub fn on_useful(&mut self, key: u16, engine: PrefetchEngine, useful_max: u8, increment: u8) {
        let idx = self.lookup_or_insert(key);
        let lane = &mut self.entries[idx].lanes[lane_index(engine)];
        lane.useful += 1;
        if lane.useful >= useful_max {
            lane.useful = 0;
            lane.confidence = lane.confidence.saturating_add(increment);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotOutcome {
    Fresh,
    Duplicate,
}

#[derive(Debug, Clone, Copy)]
struct PotEntry {
    valid: bool,
    page: u64,
    bitmap: u64,
    lru: u8,
}

/// Page-occupancy table: per 4 KiB page, a bitmap of lines recently
/// requested or filled. Filters duplicate candidates from both engines.
#[derive(Debug)]
pub struct PageOccupancyTable {
    sets: usize,
    ways: usize,
    entries: Vec<PotEntry>,
}

/// Blocks per 4 KiB page.
const POT_PAGE_BLOCKS: u64 = 64;

impl PageOccupancyTable {
    pub fn new(entries: u32, ways: u32) -> Self {
        PageOccupancyTable {
            sets: (entries / ways) as usize,
            ways: ways as usize,
            entries: vec![
                PotEntry {
                    valid: false,
                    page: 0,
                    bitmap: 0,
                    lru: 0,
                };
                entries as usize
            ],
        }
    }

    fn touch(&mut self, set: usize, way: usize) {
        let base = set * self.ways;
        let old = self.entries[base + way].lru;
        for w in 0..self.ways {
            let e = &mut self.entries[base + w];
            if w == way {
                e.lru = 0;
            } else if e.valid && e.lru < old {
                e.lru += 1;
            }
        }
    }

    fn find(&self, page: u64) -> (usize, Option<usize>) {
        let set = (page as usize) & (self.sets - 1);
        let base = set * self.ways;
        let way = (0..self.ways).find(|&w| {
            let e = &self.entries[base + w];
            e.valid && e.page == page
        });
        (set, way)
    }

    /// Is the block already recorded? Read-only.
    pub fn check(&self, block: u64) -> PotOutcome {
        let page = block / POT_PAGE_BLOCKS;
        let bit = block % POT_PAGE_BLOCKS;
        match self.find(page) {
            (_, Some(w)) => {
                let set = (page as usize) & (self.sets - 1);
                if self.entries[set * self.ways + w].bitmap & (1 << bit) != 0 {
                    PotOutcome::Duplicate
                } else {
                    PotOutcome::Fresh
                }
            }
            _ => PotOutcome::Fresh,
        }
    }

    /// Record the block, evicting the set's LRU page (clearing its history)
    /// if the page is new.
    pub fn record(&mut self, block: u64) {
        let page = block / POT_PAGE_BLOCKS;
        let bit = block % POT_PAGE_BLOCKS;
        let (set, way) = self.find(page);
        let base = set * self.ways;
        let w = match way {
            Some(w) => w,
            None => {
                let w = (0..self.ways)
                    .find(|&w| !self.entries[base + w].valid)
                    .unwrap_or_else(|| {
                        (0..self.ways)
                            .max_by_key(|&w| (self.entries[base + w].lru, std::cmp::Reverse(w)))
                            .unwrap()
                    });
                self.entries[base + w] = PotEntry {
                    valid: true,
                    page,
                    bitmap: 0,
                    lru: self.entries[base + w].lru,
                };
                w
            }
        };
        self.entries[base + w].bitmap |= 1 << bit;
        self.touch(set, w);
    }

    /// One-shot filter: duplicate if the bit is already set, otherwise set
    /// it and report fresh.
    pub fn filter_and_record(&mut self, block: u64) -> PotOutcome {
        let out = self.check(block);
        if out == PotOutcome::Fresh {
            self.record(block);
        } else {
            // A duplicate still refreshes the page's recency.
            let page = block / POT_PAGE_BLOCKS;
            if let (set, Some(w)) = self.find(page) {
                self.touch(set, w);
            }
        }
        out
    }
}

/// Issue probability for a trigger at confidence `c`: ungated at and above
/// `gate_full_confidence`, proportional below it, floored so cold entries
/// can eventually probe and rebuild confidence.
pub fn gate_probability(params: &OrapParams, c: u8) -> f64 {
    if c >= params.gate_full_confidence {
        1.0
    } else {
        (params.gate_slope * c as f64).max(params.gate_floor)
    }
}

/// Cluster depth for a confidence value, from the committed table.
pub fn depth_from_confidence(params: &OrapParams, c: u8) -> u32 {
    params.depth_table[c as usize] as u32
}

/// In-progress candidate burst from one trigger.
#[derive(Debug)]
struct Burst {
    blocks: Vec<u64>,
    cursor: usize,
    trigger_ip: u64,
    row_id: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct Candidate {
    pub block: u64,
    pub engine: PrefetchEngine,
    pub trigger_ip: u64,
    pub row_id: u64,
}

#[derive(Debug, Default, Clone)]
pub struct OrapStats {
    pub triggers: u64,
    pub gated: u64,
    pub zero_depth: u64,
    pub candidates_generated: u64,
    pub bursts_replaced: u64,
}

/// Per-core Next-Column engine plus the confidence tables shared with the
/// stream engine (IPCT carries one lane per engine; RCT only tracks the
/// Next-Column lane).
pub struct OrapEngine {
    pub params: OrapParams,
    ipct: ConfidenceTable,
    rct: ConfidenceTable,
    burst: Option<Burst>,
    rng: ChaCha8Rng,
    pub stats: OrapStats,
}

impl OrapEngine {
    pub fn new(params: &OrapParams, seed: u64) -> Self {
        use rand::SeedableRng;
        OrapEngine {
            ipct: ConfidenceTable::new(params.ipct_entries, params.ipct_ways, params.init_confidence),
            rct: ConfidenceTable::new(params.rct_entries, params.rct_ways, params.init_confidence),
            burst: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            params: params.clone(),
        stats: OrapStats::default(),
        }
    }

    /// Confidence the stream engine consults for its probability threshold.
    pub fn hsd_confidence(&mut self, ip: u64) -> u8 {
        self.ipct.confidence(hash16(ip), PrefetchEngine::Hsd)
    }

    /// Hybrid confidence for a Next-Column trigger: max of IP and row lanes,
    /// so either strong-IP or strong-row workloads keep prefetching.
    pub fn next_column_confidence(&mut self, ip: u64, row_id: u64) -> u8 {
        let c_ip = self.ipct.confidence(hash16(ip), PrefetchEngine::NextColumn);
        let c_row = self.rct.confidence(hash16(row_id), PrefetchEngine::NextColumn);
        c_ip.max(c_row)
    }

    /// LLC miss trigger (demand, or a stream-engine prefetch miss). Installs
    /// a candidate burst covering the next `depth` clusters of the trigger's
    /// row; candidates drain a few per cycle via [`next_candidates`].
    ///
    /// Returns the number of candidate blocks staged.
    pub fn on_llc_miss(
        &mut self,
        ip: u64,
        coord: &DramCoord,
        row_id: u64,
        mapping: &MappingDescriptor,
    ) -> usize {
        self.stats.triggers += 1;
        let c = self.next_column_confidence(ip, row_id);
        let p = gate_probability(&self.params, c);
        if p < 1.0 && !self.rng.gen_bool(p) {
            self.stats.gated += 1;
            return 0;
        }
        let depth = depth_from_confidence(&self.params, c);
        // A gate pass at zero confidence probes a single cluster so the
        // entry can rebuild; otherwise depth 0 issues nothing.
        let depth = if depth == 0 && c == 0 { 1 } else { depth };
        if depth == 0 {
            self.stats.zero_depth += 1;
            return 0;
        }
        let bases = mapping.next_clusters(coord, depth);
        if bases.is_empty() {
            return 0;
        }
        let lines = mapping.cluster_lines() as u64;
        let mut blocks = Vec::with_capacity(bases.len() * lines as usize);
        for base in bases {
            let first = base / BLOCK_BYTES;
            for i in 0..lines {
                blocks.push(first + i);
            }
        }
        let n = blocks.len();
        self.stats.candidates_generated += n as u64;
        if self.burst.is_some() {
            self.stats.bursts_replaced += 1;
        }
        self.burst = Some(Burst {
            blocks,
            cursor: 0,
            trigger_ip: ip,
            row_id,
        });
        n
    }

    /// Drain up to `n` staged candidates.
    pub fn next_candidates(&mut self, n: u32, out: &mut Vec<Candidate>) {
        if let Some(b) = &mut self.burst {
            for _ in 0..n {
                if b.cursor >= b.blocks.len() {
                    break;
                }
                out.push(Candidate {
                    block: b.blocks[b.cursor],
                    engine: PrefetchEngine::NextColumn,
                    trigger_ip: b.trigger_ip,
                    row_id: b.row_id,
                });
                b.cursor += 1;
            }
            if b.cursor >= b.blocks.len() {
                self.burst = None;
            }
        }
    }

    pub fn has_pending_candidates(&self) -> bool {
        self.burst.is_some()
    }

    /// Prefetch fill bookkeeping: issue counters advance in the IPCT lane of
    /// the originating engine, and in the RCT for Next-Column fills.
    pub fn on_prefetch_fill(&mut self, engine: PrefetchEngine, trigger_ip: u64, row_id: u64) {
        let (im, inc) = (self.params.issue_max, self.params.confidence_increment);
        self.ipct.on_fill(hash16(trigger_ip), engine, im, inc);
        if engine == PrefetchEngine::NextColumn {
            self.rct.on_fill(hash16(row_id), PrefetchEngine::NextColumn, im, inc);
        }
    }

    /// First demand hit on a prefetched line, attributed to the hitting IP.
    /// Stream-engine lines update the IPCT only.
    pub fn on_demand_hit_prefetched(&mut self, hit_ip: u64, row_id: u64, engine: PrefetchEngine) {
        let (um, inc) = (self.params.useful_max, self.params.confidence_increment);
        self.ipct.on_useful(hash16(hit_ip), engine, um, inc);
        if engine == PrefetchEngine::NextColumn {
            self.rct.on_useful(hash16(row_id), PrefetchEngine::NextColumn, um, inc);
        }
    }

    pub fn ipct(&mut self) -> &mut ConfidenceTable {
        &mut self.ipct
    }
    pub fn rct(&mut self) -> &mut ConfidenceTable {
        &mut self.rct
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::PrefetchEngine::{Hsd, NextColumn};

    fn params() -> OrapParams {
        OrapParams::default()
    }

    #[test]
    fn usefulness_table_exact_cells() {
        assert_eq!(target_usefulness(3, 2).unwrap(), 2.0 / 3.0);
        assert_eq!(target_usefulness(6, 3).unwrap(), 0.5);
        for k in 1..=6 {
            assert_eq!(target_usefulness(k, k).unwrap(), 1.0);
        }
        assert!(matches!(
            target_usefulness(3, 4),
            Err(OrapError::UsefulExceedsIssue { .. })
        ));
    }

    #[test]
    fn max_pending_cells() {
        assert_eq!(max_pending(5, 1).unwrap(), 1275);
        assert_eq!(max_pending(3, 2).unwrap(), 382);
        assert_eq!(max_pending(6, 4).unwrap(), 382);
        assert!(max_pending(7, 1).is_err());
        assert!(max_pending(5, 5).is_err());
    }

    #[test]
    fn depth_endpoints_and_monotonicity() {
        let p = params();
        assert_eq!(depth_from_confidence(&p, 0), 0);
        assert_eq!(depth_from_confidence(&p, 255), 8);
        let mut last = 0;
        for c in 0..=255u8 {
            let d = depth_from_confidence(&p, c);
            assert!(d >= last);
            last = d;
        }
    }

    #[test]
    fn gate_probability_values() {
        let p = params();
        assert_eq!(gate_probability(&p, 100), 1.0);
        assert_eq!(gate_probability(&p, 150), 1.0);
        assert!((gate_probability(&p, 50) - 0.475).abs() < 1e-12);
        assert_eq!(gate_probability(&p, 0), p.gate_floor);
    }

    #[test]
    fn cold_entry_probes_within_expected_triggers() {
        // With the 0.005 floor, a cold entry issues within ~200 triggers in
        // expectation; over 2000 seeded triggers at confidence 0 we must see
        // some but not many probes.
        let p = params();
        let mut eng = OrapEngine::new(&p, 7);
        let mapping = MappingDescriptor::preset("zen4").unwrap();
        // Force both tables to zero confidence.
        let ip = 0x400100u64;
        let coord = mapping.decompose(0).unwrap();
        let row_id = 0u64;
        let key = hash16(ip);
        let idx = eng.ipct.lookup_or_insert(key);
        eng.ipct.entries[idx].lanes[LANE_NEXT_COLUMN].confidence = 0;
        let rkey = hash16(row_id);
        let ridx = eng.rct.lookup_or_insert(rkey);
        eng.rct.entries[ridx].lanes[LANE_NEXT_COLUMN].confidence = 0;
        let mut probes = 0;
        for _ in 0..2000 {
            if eng.on_llc_miss(ip, &coord, row_id, &mapping) > 0 {
                probes += 1;
                eng.burst = None;
            }
        }
        assert!(probes >= 1, "cold entry never recovered");
        assert!(probes <= 40, "floor leaks too much: {probes}");
    }

    #[test]
    fn issue_rollover_decrements_after_five_fills() {
        let p = params();
        let mut eng = OrapEngine::new(&p, 1);
        let ip = 0x42;
        let start = eng.ipct.confidence(hash16(ip), NextColumn);
        for _ in 0..4 {
            eng.on_prefetch_fill(NextColumn, ip, 9);
        }
        assert_eq!(eng.ipct.confidence(hash16(ip), NextColumn), start);
        eng.on_prefetch_fill(NextColumn, ip, 9);
        assert_eq!(eng.ipct.confidence(hash16(ip), NextColumn), start - 1);
    }

    #[test]
    fn useful_rollover_increments_after_four_hits() {
        let p = params();
        let mut eng = OrapEngine::new(&p, 1);
        let ip = 0x43;
        let start = eng.ipct.confidence(hash16(ip), NextColumn);
        for _ in 0..3 {
            eng.on_demand_hit_prefetched(ip, 9, NextColumn);
        }
        assert_eq!(eng.ipct.confidence(hash16(ip), NextColumn), start);
        eng.on_demand_hit_prefetched(ip, 9, NextColumn);
        assert_eq!(eng.ipct.confidence(hash16(ip), NextColumn), start + 1);
    }

    #[test]
    fn hsd_hit_updates_ipct_only() {
        let p = params();
        let mut eng = OrapEngine::new(&p, 1);
        let (ip, row) = (0x44u64, 17u64);
        let row_before = eng.rct.confidence(hash16(row), NextColumn);
        let row_lane_before = eng.rct.peek(hash16(row), NextColumn).unwrap();
        for _ in 0..p.useful_max {
            eng.on_demand_hit_prefetched(ip, row, Hsd);
        }
        assert_eq!(
            eng.ipct.confidence(hash16(ip), Hsd),
            p.init_confidence + 1
        );
        let row_lane_after = eng.rct.peek(hash16(row), NextColumn).unwrap();
        assert_eq!(row_lane_before, row_lane_after);
        assert_eq!(eng.rct.confidence(hash16(row), NextColumn), row_before);
    }

    #[test]
    fn equilibrium_at_80_percent_usefulness() {
        // 4 useful per 5 issued with (5, 4) counters: zero drift.
        let p = params();
        let mut eng = OrapEngine::new(&p, 1);
        let ip = 0x45;
        let start = eng.ipct.confidence(hash16(ip), NextColumn);
        for _ in 0..200 {
            for _ in 0..5 {
                eng.on_prefetch_fill(NextColumn, ip, 3);
            }
            for _ in 0..4 {
                eng.on_demand_hit_prefetched(ip, 3, NextColumn);
            }
        }
        assert_eq!(eng.ipct.confidence(hash16(ip), NextColumn), start);
    }

    #[test]
    fn never_useful_stream_ceases_after_max_pending_fills() {
        let mut p = params();
        p.gate_floor = 0.0; // disable recovery probes to measure the bound
        let mut eng = OrapEngine::new(&p, 1);
        let ip = 0x46;
        let key = hash16(ip);
        let idx = eng.ipct.lookup_or_insert(key);
        eng.ipct.entries[idx].lanes[LANE_NEXT_COLUMN].confidence = CONFIDENCE_MAX;
        let mut fills = 0u32;
        loop {
            let lane = eng.ipct.peek(key, NextColumn).unwrap();
            if lane.confidence == 0 {
                break;
            }
            eng.on_prefetch_fill(NextColumn, ip, 1);
            fills += 1;
            assert!(fills <= 2000, "did not throttle");
        }
        assert_eq!(fills, max_pending(5, 1).unwrap());
    }

    #[test]
    fn hybrid_confidence_covers_ip_only_and_row_only() {
        let p = params();
        let mut eng = OrapEngine::new(&p, 1);
        let mapping = MappingDescriptor::preset("zen4").unwrap();
        // Warm the IP lane far above init, leave row cold, and vice versa.
        let warm_ip = 0x50u64;
        for _ in 0..(4 * 300) {
            eng.on_demand_hit_prefetched(warm_ip, 999, NextColumn);
        }
        // The row key 999 also warmed; use different rows below.
        let c = eng.next_column_confidence(warm_ip, 12345);
        assert_eq!(c, CONFIDENCE_MAX, "high IP carries cold row");

        let warm_row = 777u64;
        for _ in 0..(4 * 300) {
            // useful hits attributed to varying IPs keep any one IP cold
            // while the row lane saturates
            let ip = 0x9000 + (eng.stats.triggers as u64 % 7) * 8;
            eng.stats.triggers += 1;
            eng.on_demand_hit_prefetched(ip, warm_row, NextColumn);
        }
        let cold_ip = 0xabcd00u64;
        let c = eng.next_column_confidence(cold_ip, warm_row);
        assert_eq!(c, CONFIDENCE_MAX, "high row carries cold IP");
        // And both cold-ip/cold-row triggers still produce depth > 0 bursts
        // at init confidence.
        let coord = mapping.decompose(0).unwrap();
        let mut eng2 = OrapEngine::new(&p, 2);
        // init confidence 32 gates at p≈0.3; try until a pass.
        let mut issued = 0;
        for _ in 0..200 {
            issued += eng2.on_llc_miss(0x1, &coord, 0, &mapping);
            eng2.burst = None;
        }
        assert!(issued > 0);
    }

    #[test]
    fn candidates_stay_in_trigger_row() {
        let p = params();
        let mut eng = OrapEngine::new(&p, 1);
        let mapping = MappingDescriptor::preset("zen4").unwrap();
        let addr = 0x123 << 21 | 0x3 << 12; // some row, cluster 0
        let coord = mapping.decompose(addr).unwrap();
        let row_id = 42;
        // Saturate confidence so the gate passes deterministically.
        let idx = eng.ipct.lookup_or_insert(hash16(0x60));
        eng.ipct.entries[idx].lanes[LANE_NEXT_COLUMN].confidence = CONFIDENCE_MAX;
        let n = eng.on_llc_miss(0x60, &coord, row_id, &mapping);
        assert!(n > 0);
        let mut cands = Vec::new();
        eng.next_candidates(10_000, &mut cands);
        assert_eq!(cands.len(), n);
        for c in &cands {
            let cc = mapping.decompose(c.block * BLOCK_BYTES).unwrap();
            assert_eq!(cc.row, coord.row);
            assert_eq!(cc.bank, coord.bank);
            assert_eq!(cc.bankgroup, coord.bankgroup);
            assert_eq!(cc.channel, coord.channel);
            assert!(cc.cluster_index > coord.cluster_index);
        }
    }

    #[test]
    fn full_confidence_covers_depth_clusters() {
        let p = params();
        let mut eng = OrapEngine::new(&p, 1);
        let mapping = MappingDescriptor::preset("zen4").unwrap();
        let coord = mapping.decompose(0).unwrap();
        let idx = eng.ipct.lookup_or_insert(hash16(0x61));
        eng.ipct.entries[idx].lanes[LANE_NEXT_COLUMN].confidence = CONFIDENCE_MAX;
        let n = eng.on_llc_miss(0x61, &coord, 7, &mapping);
        // depth 8 clusters x 32 lines
        assert_eq!(n, 8 * 32);
    }

    #[test]
    fn miss_in_last_cluster_yields_nothing() {
        let p = params();
        let mut eng = OrapEngine::new(&p, 1);
        let mapping = MappingDescriptor::preset("zen4").unwrap();
        let mut coord = mapping.decompose(0).unwrap();
        coord.cluster_index = mapping.clusters_per_row() - 1;
        coord.column = coord.cluster_index * mapping.cluster_lines();
        let idx = eng.ipct.lookup_or_insert(hash16(0x62));
        eng.ipct.entries[idx].lanes[LANE_NEXT_COLUMN].confidence = CONFIDENCE_MAX;
        assert_eq!(eng.on_llc_miss(0x62, &coord, 7, &mapping), 0);
    }

    #[test]
    fn pot_first_touch_fresh_repeat_duplicate() {
        let mut pot = PageOccupancyTable::new(256, 8);
        assert_eq!(pot.filter_and_record(5), PotOutcome::Fresh);
        assert_eq!(pot.filter_and_record(5), PotOutcome::Duplicate);
        assert_eq!(pot.filter_and_record(6), PotOutcome::Fresh);
    }

    #[test]
    fn pot_lru_forgets_oldest_page() {
        // 257 distinct pages round-robin through a 256-entry, 8-way table:
        // set 0 sees 9 pages, evicting page 0; its history is forgotten.
        let mut pot = PageOccupancyTable::new(256, 8);
        for page in 0..257u64 {
            assert_eq!(pot.filter_and_record(page * 64), PotOutcome::Fresh);
        }
        assert_eq!(pot.filter_and_record(0), PotOutcome::Fresh);
        // Replay oracle: an explicit per-set LRU model agrees about which
        // pages survive.
        let mut pot2 = PageOccupancyTable::new(256, 8);
        let mut model: Vec<Vec<u64>> = vec![Vec::new(); 32];
        let mut touched = Vec::new();
        for page in 0..300u64 {
            pot2.filter_and_record(page * 64 + (page % 64));
            let set = (page % 32) as usize;
            model[set].retain(|&p| p != page);
            model[set].insert(0, page);
            model[set].truncate(8);
            touched.push(page);
        }
        for &page in &touched {
            let set = (page % 32) as usize;
            let survives = model[set].contains(&page);
            let dup = pot2.check(page * 64 + (page % 64)) == PotOutcome::Duplicate;
            assert_eq!(dup, survives, "page {page}");
        }
    }

    #[test]
    fn equilibrium_drift_sign_matches_usefulness() {
        // Bernoulli usefulness streams ±10% around the 80% target: drift
        // must be negative below target, positive above.
        use rand::{Rng, SeedableRng};
        for (p_useful, expect_positive) in [(0.7, false), (0.9, true)] {
            let p = params();
            let mut eng = OrapEngine::new(&p, 1);
            let mut rng = ChaCha8Rng::seed_from_u64(33);
            let ip = 0x70;
            let key = hash16(ip);
            let idx = eng.ipct.lookup_or_insert(key);
            eng.ipct.entries[idx].lanes[LANE_NEXT_COLUMN].confidence = 128;
            for _ in 0..20_000 {
                eng.on_prefetch_fill(NextColumn, ip, 1);
                if rng.gen_bool(p_useful) {
                    eng.on_demand_hit_prefetched(ip, 1, NextColumn);
                }
            }
            let end = eng.ipct.peek(key, NextColumn).unwrap().confidence;
            if expect_positive {
                assert!(end > 200, "drift should be positive, ended {end}");
            } else {
                assert!(end < 56, "drift should be negative, ended {end}");
            }
        }
    }
}
