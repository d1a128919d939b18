//! Reference first-level prefetchers: next-line and confirmed constant
//! stride. Both stop at 2 MiB page boundaries.

use crate::addrmap::BLOCK_BYTES;

/// 2 MiB pages; prefetchers never cross one.
pub const PAGE_BYTES: u64 = 2 * 1024 * 1024;
pub const PAGE_BLOCKS: u64 = PAGE_BYTES / BLOCK_BYTES;

fn same_page(a: u64, b: u64) -> bool {
    a / PAGE_BLOCKS == b / PAGE_BLOCKS
}

/// Emits block+1 on every demand access.
#[derive(Debug, Default)]
pub struct NextLinePrefetcher;

impl NextLinePrefetcher {
    pub fn on_demand(&mut self, _ip: u64, block: u64, out: &mut Vec<u64>) {
        let next = block + 1;
        if same_page(block, next) {
            out.push(next);
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct StrideEntry {
    ip: u64,
    valid: bool,
    last_block: u64,
    stride: i64,
    confirms: u8,
}

/// Per-IP constant-stride detector: a stride must repeat twice before
/// degree-4 prefetches are issued, and any outlier forces re-confirmation.
#[derive(Debug)]
pub struct StridePrefetcher {
    table: Vec<StrideEntry>,
    degree: u32,
}

const STRIDE_TABLE: usize = 64;

impl StridePrefetcher {
    pub fn new(degree: u32) -> Self {
        StridePrefetcher {
            table: vec![StrideEntry::default(); STRIDE_TABLE],
            degree,
        }
    }

    pub fn on_demand(&mut self, ip: u64, block: u64, out: &mut Vec<u64>) {
        let idx = ((ip ^ (ip >> 6) ^ (ip >> 12)) as usize) & (STRIDE_TABLE - 1);
        let e = &mut self.table[idx];
        if !e.valid || e.ip != ip {
            *e = StrideEntry {
                ip,
                valid: true,
                last_block: block,
                stride: 0,
                confirms: 0,
            };
            return;
        }
        let delta = block as i64 - e.last_block as i64;
        e.last_block = block;
        if delta == 0 {
            return;
        }
        if e.confirms > 0 && delta == e.stride {
            e.confirms = (e.confirms + 1).min(3);
        } else {
            e.stride = delta;
            e.confirms = 1;
        }
        if e.confirms >= 2 {
            for k in 1..=self.degree as i64 {
                let target = block as i64 + e.stride * k;
                if target < 0 {
                    break;
                }
                let target = target as u64;
                if !same_page(block, target) {
                    break;
                }
                out.push(target);
            }
        }
    }
}

impl Default for StridePrefetcher {
    fn default() -> Self {
        StridePrefetcher::new(4)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn next_line_emits_following_block() {
        let mut p = NextLinePrefetcher;
        let mut out = Vec::new();
        p.on_demand(1, 0, &mut out);
        assert_eq!(out, vec![1]);
    }

    #[test]
    fn next_line_stops_at_page_end() {
        let mut p = NextLinePrefetcher;
        let mut out = Vec::new();
        p.on_demand(1, PAGE_BLOCKS - 1, &mut out);
        assert!(out.is_empty());
    }

    #[test]
    fn stride_confirmed_twice_then_degree_4() {
        let mut p = StridePrefetcher::default();
        let mut out = Vec::new();
        // Byte addresses 0, 128, 256 are blocks 0, 2, 4.
        p.on_demand(9, 0, &mut out);
        p.on_demand(9, 2, &mut out);
        assert!(out.is_empty());
        p.on_demand(9, 4, &mut out);
        assert_eq!(out, vec![6, 8, 10, 12]);
    }

    #[test]
    fn non_constant_stride_stays_silent() {
        let mut p = StridePrefetcher::default();
        let mut out = Vec::new();
        for b in [0u64, 3, 4, 9, 11, 20] {
            p.on_demand(9, b, &mut out);
        }
        assert!(out.is_empty());
    }

    #[test]
    fn outlier_forces_reconfirmation() {
        // State-machine replay oracle: track (stride, confirms) by hand and
        // compare issuance decisions step by step.
        let blocks = [0u64, 2, 4, 6, 99, 101, 103, 105];
        let mut p = StridePrefetcher::default();
        let mut exp_stride = 0i64;
        let mut exp_confirms = 0u8;
        let mut last = None::<u64>;
        for b in blocks {
            let mut out = Vec::new();
            p.on_demand(9, b, &mut out);
            let should_issue = match last {
                None => false,
                Some(prev) => {
                    let delta = b as i64 - prev as i64;
                    if exp_confirms > 0 && delta == exp_stride {
                        exp_confirms = (exp_confirms + 1).min(3);
                    } else {
                        exp_stride = delta;
                        exp_confirms = 1;
                    }
                    exp_confirms >= 2
                }
            };
            last = Some(b);
            assert_eq!(!out.is_empty(), should_issue, "at block {b}");
        }
    }

    #[test]
    fn prefetches_never_cross_2mib_page() {
        let mut p = StridePrefetcher::default();
        let base = PAGE_BLOCKS - 6;
        for i in 0..5 {
            let trigger = base + i * 2;
            let mut out = Vec::new();
            p.on_demand(3, trigger, &mut out);
            for t in &out {
                assert!(same_page(trigger, *t));
            }
        }
    }
}
