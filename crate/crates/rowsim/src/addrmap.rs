//! Logical-to-physical DRAM address mapping.
//!
//! A [`MappingDescriptor`] assigns every physical address bit above the 64 B
//! block offset to one DRAM coordinate field. Column bits are split into a
//! low group (the line offset inside a column cluster, kept directly above
//! the block offset) and a high group (the cluster index within the row).
//! Bank and bankgroup index bits may be XORed with row bits so that
//! different rows stride across banks differently.
//!
//! The `zen4` presets commit an explicit layout extrapolated from published
//! reverse-engineered DDR5 controller mappings: block offset `[5:0]`,
//! in-cluster column `[10:6]` (32-line clusters), channel `[11]`, bank
//! `[13:12]` and bankgroup `[15:14]` each XOR-folded with low row bits,
//! cluster index `[20:16]` (32 clusters per row), and the row in the top 16
//! bits. Consecutive clusters of the same row are therefore 1024 blocks
//! apart in the logical space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cache lines are 64 B throughout.
pub const BLOCK_OFFSET_BITS: u32 = 6;
/// Bytes per cache line / DRAM burst.
pub const BLOCK_BYTES: u64 = 1 << BLOCK_OFFSET_BITS;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AddrMapError {
    #[error("address {addr:#x} outside physical space of {bits} bits")]
    OutOfRange { addr: u64, bits: u32 },
    #[error("invalid mapping: {0}")]
    Invalid(String),
    #[error("unknown mapping preset `{0}`")]
    UnknownPreset(String),
}

/// Decomposed DRAM coordinate of one cache-line address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DramCoord {
    pub channel: u32,
    pub rank: u32,
    pub bankgroup: u32,
    pub bank: u32,
    pub row: u64,
    /// Column in line units: `cluster_index * cluster_lines + in-cluster offset`.
    pub column: u32,
    pub cluster_index: u32,
}

/// Explicit bit layout of a logical-to-physical mapping.
///
/// All positions are absolute bit indices of the byte address, LSB first
/// within each field. The block offset occupies bits `[5:0]` implicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingDescriptor {
    pub name: String,
    pub channel_bits: Vec<u8>,
    pub rank_bits: Vec<u8>,
    pub bankgroup_bits: Vec<u8>,
    pub bank_bits: Vec<u8>,
    /// Line offset within a column cluster.
    pub column_low_bits: Vec<u8>,
    /// Cluster index within the row.
    pub column_high_bits: Vec<u8>,
    pub row_bits: Vec<u8>,
    /// Per bank-index bit: mask of row-field bits XORed into it.
    pub bank_xor_row_masks: Vec<u64>,
    /// Per bankgroup-index bit: mask of row-field bits XORed into it.
    pub bankgroup_xor_row_masks: Vec<u64>,
}

fn gather(addr: u64, bits: &[u8]) -> u64 {
    let mut out = 0u64;
    for (i, b) in bits.iter().enumerate() {
        out |= ((addr >> b) & 1) << i;
    }
    out
}

fn scatter(value: u64, bits: &[u8]) -> u64 {
    let mut out = 0u64;
    for (i, b) in bits.iter().enumerate() {
        out |= ((value >> i) & 1) << b;
    }
    out
}

fn fold_xor(field: u64, row: u64, masks: &[u64]) -> u64 {
    let mut out = field;
    for (i, mask) in masks.iter().enumerate() {
        out ^= (((row & mask).count_ones() as u64) & 1) << i;
    }
    out
}

impl MappingDescriptor {
    /// Total addressable bits, block offset included.
    pub fn address_bits(&self) -> u32 {
        BLOCK_OFFSET_BITS
            + (self.channel_bits.len()
                + self.rank_bits.len()
                + self.bankgroup_bits.len()
                + self.bank_bits.len()
                + self.column_low_bits.len()
                + self.column_high_bits.len()
                + self.row_bits.len()) as u32
    }

    pub fn physical_bytes(&self) -> u64 {
        1u64 << self.address_bits()
    }

    pub fn channels(&self) -> u32 {
        1 << self.channel_bits.len()
    }
    pub fn ranks(&self) -> u32 {
        1 << self.rank_bits.len()
    }
    pub fn bankgroups(&self) -> u32 {
        1 << self.bankgroup_bits.len()
    }
    pub fn banks(&self) -> u32 {
        1 << self.bank_bits.len()
    }
    pub fn rows(&self) -> u64 {
        1 << self.row_bits.len()
    }
    /// Lines per column cluster.
    pub fn cluster_lines(&self) -> u32 {
        1 << self.column_low_bits.len()
    }
    pub fn clusters_per_row(&self) -> u32 {
        1 << self.column_high_bits.len()
    }
    /// Line-granular columns per row.
    pub fn columns_per_row(&self) -> u32 {
        self.cluster_lines() * self.clusters_per_row()
    }
    /// Distinct (channel, rank, bankgroup, bank) combinations.
    pub fn total_banks(&self) -> u32 {
        self.channels() * self.ranks() * self.bankgroups() * self.banks()
    }

    /// Check the bit assignment is a permutation of bits `[address_bits-1 : 6]`.
    pub fn validate(&self) -> Result<(), AddrMapError> {
        let all: Vec<&[u8]> = vec![
            &self.channel_bits,
            &self.rank_bits,
            &self.bankgroup_bits,
            &self.bank_bits,
            &self.column_low_bits,
            &self.column_high_bits,
            &self.row_bits,
        ];
        let mut seen = 0u64;
        for bits in &all {
            for &b in bits.iter() {
                if (b as u32) < BLOCK_OFFSET_BITS || b as u32 >= self.address_bits() {
                    return Err(AddrMapError::Invalid(format!(
                        "bit {b} outside [{}, {})",
                        BLOCK_OFFSET_BITS,
                        self.address_bits()
                    )));
                }
                if seen & (1 << b) != 0 {
                    return Err(AddrMapError::Invalid(format!("bit {b} assigned twice")));
                }
                seen |= 1 << b;
            }
        }
        if seen.count_ones() + BLOCK_OFFSET_BITS != self.address_bits() {
            return Err(AddrMapError::Invalid(
                "bit assignment does not cover the address space".into(),
            ));
        }
        if self.bank_xor_row_masks.len() != self.bank_bits.len() {
            return Err(AddrMapError::Invalid(
                "bank_xor_row_masks length must match bank_bits".into(),
            ));
        }
        if self.bankgroup_xor_row_masks.len() != self.bankgroup_bits.len() {
            return Err(AddrMapError::Invalid(
                "bankgroup_xor_row_masks length must match bankgroup_bits".into(),
            ));
        }
        let row_mask = (1u64 << self.row_bits.len()) - 1;
        for m in self
            .bank_xor_row_masks
            .iter()
            .chain(self.bankgroup_xor_row_masks.iter())
        {
            if m & !row_mask != 0 {
                return Err(AddrMapError::Invalid(
                    "xor mask references nonexistent row bits".into(),
                ));
            }
        }
        Ok(())
    }

    /// Split a byte address into its DRAM coordinate.
    pub fn decompose(&self, addr: u64) -> Result<DramCoord, AddrMapError> {
        if self.address_bits() < 64 && addr >> self.address_bits() != 0 {
            return Err(AddrMapError::OutOfRange {
                addr,
                bits: self.address_bits(),
            });
        }
        let row = gather(addr, &self.row_bits);
        let bank = fold_xor(gather(addr, &self.bank_bits), row, &self.bank_xor_row_masks);
        let bankgroup = fold_xor(
            gather(addr, &self.bankgroup_bits),
            row,
            &self.bankgroup_xor_row_masks,
        );
        let low = gather(addr, &self.column_low_bits) as u32;
        let high = gather(addr, &self.column_high_bits) as u32;
        let column = high * self.cluster_lines() + low;
        Ok(DramCoord {
            channel: gather(addr, &self.channel_bits) as u32,
            rank: gather(addr, &self.rank_bits) as u32,
            bankgroup: bankgroup as u32,
            bank: bank as u32,
            row,
            column,
            cluster_index: high,
        })
    }

    /// Inverse of [`decompose`](Self::decompose); byte offset bits are zero.
    pub fn compose(&self, coord: &DramCoord) -> u64 {
        let bank_raw = fold_xor(coord.bank as u64, coord.row, &self.bank_xor_row_masks);
        let bg_raw = fold_xor(
            coord.bankgroup as u64,
            coord.row,
            &self.bankgroup_xor_row_masks,
        );
        let low = (coord.column % self.cluster_lines()) as u64;
        let high = (coord.column / self.cluster_lines()) as u64;
        scatter(coord.channel as u64, &self.channel_bits)
            | scatter(coord.rank as u64, &self.rank_bits)
            | scatter(bg_raw, &self.bankgroup_bits)
            | scatter(bank_raw, &self.bank_bits)
            | scatter(low, &self.column_low_bits)
            | scatter(high, &self.column_high_bits)
            | scatter(coord.row, &self.row_bits)
    }

    /// Base addresses of the next `n` column clusters in the same
    /// (channel, rank, bankgroup, bank, row). Truncates at the row end.
    pub fn next_clusters(&self, coord: &DramCoord, n: u32) -> Vec<u64> {
        let mut out = Vec::new();
        let last = self.clusters_per_row();
        for k in coord.cluster_index + 1..(coord.cluster_index + 1 + n).min(last) {
            let mut c = *coord;
            c.cluster_index = k;
            c.column = k * self.cluster_lines();
            out.push(self.compose(&c));
        }
        out
    }

    /// Flat index of the coordinate's bank across channels/ranks/bankgroups.
    pub fn flat_bank(&self, coord: &DramCoord) -> u32 {
        ((coord.channel * self.ranks() + coord.rank) * self.bankgroups() + coord.bankgroup)
            * self.banks()
            + coord.bank
    }

    /// Human-readable bit-layout table.
    pub fn describe(&self) -> String {
        fn row(name: &str, bits: &[u8]) -> String {
            if bits.is_empty() {
                format!("  {name:<12} -\n")
            } else {
                let list: Vec<String> = bits.iter().map(|b| b.to_string()).collect();
                format!("  {name:<12} [{}]\n", list.join(","))
            }
        }
        let mut s = format!(
            "mapping `{}`: {} address bits ({} B physical)\n",
            self.name,
            self.address_bits(),
            self.physical_bytes()
        );
        s.push_str(&row("offset", &(0..BLOCK_OFFSET_BITS as u8).collect::<Vec<_>>()));
        s.push_str(&row("column-low", &self.column_low_bits));
        s.push_str(&row("channel", &self.channel_bits));
        s.push_str(&row("bank", &self.bank_bits));
        s.push_str(&row("bankgroup", &self.bankgroup_bits));
        s.push_str(&row("column-high", &self.column_high_bits));
        s.push_str(&row("rank", &self.rank_bits));
        s.push_str(&row("row", &self.row_bits));
        for (i, m) in self.bank_xor_row_masks.iter().enumerate() {
            s.push_str(&format!("  bank[{i}] ^= row & {m:#x}\n"));
        }
        for (i, m) in self.bankgroup_xor_row_masks.iter().enumerate() {
            s.push_str(&format!("  bankgroup[{i}] ^= row & {m:#x}\n"));
        }
        s.push_str(&format!(
            "  {} clusters/row x {} lines/cluster, {} banks total\n",
            self.clusters_per_row(),
            self.cluster_lines(),
            self.total_banks()
        ));
        s
    }

    /// Built-in layouts. `zen4` is the default DDR5 layout; `row-local` and
    /// `bank-spread` are the two naive extremes used for mapping analysis;
    /// `zen4-1gib` is a downscaled layout for exhaustive sweeps;
    /// `zen4-8core` adds a rank bit and wider channel/bankgroup fields.
    pub fn preset(name: &str) -> Result<Self, AddrMapError> {
        let d = match name {
            "zen4" | "zen4-1core" => MappingDescriptor {
                name: "zen4".into(),
                column_low_bits: vec![6, 7, 8, 9, 10],
                channel_bits: vec![11],
                bank_bits: vec![12, 13],
                bankgroup_bits: vec![14, 15],
                column_high_bits: vec![16, 17, 18, 19, 20],
                rank_bits: vec![],
                row_bits: (21..37).collect(),
                bank_xor_row_masks: vec![0b0001, 0b0010],
                bankgroup_xor_row_masks: vec![0b0100, 0b1000],
            },
            "zen4-8core" => MappingDescriptor {
                name: "zen4-8core".into(),
                column_low_bits: vec![6, 7, 8, 9, 10],
                channel_bits: vec![11, 12],
                bank_bits: vec![13, 14],
                bankgroup_bits: vec![15, 16, 17],
                column_high_bits: vec![18, 19, 20, 21, 22],
                rank_bits: vec![23],
                row_bits: (24..40).collect(),
                bank_xor_row_masks: vec![0b001, 0b010],
                bankgroup_xor_row_masks: vec![0b0100, 0b1000, 0b10000],
            },
            "zen4-1gib" => MappingDescriptor {
                name: "zen4-1gib".into(),
                column_low_bits: vec![6, 7, 8, 9, 10],
                channel_bits: vec![11],
                bank_bits: vec![12, 13],
                bankgroup_bits: vec![14, 15],
                column_high_bits: vec![16, 17, 18, 19, 20],
                rank_bits: vec![],
                row_bits: (21..30).collect(),
                bank_xor_row_masks: vec![0b0001, 0b0010],
                bankgroup_xor_row_masks: vec![0b0100, 0b1000],
            },
            "row-local" => MappingDescriptor {
                name: "row-local".into(),
                column_low_bits: vec![6, 7, 8, 9, 10],
                column_high_bits: vec![11, 12, 13, 14, 15],
                channel_bits: vec![16],
                bank_bits: vec![17, 18],
                bankgroup_bits: vec![19, 20],
                rank_bits: vec![],
                row_bits: (21..37).collect(),
                bank_xor_row_masks: vec![0, 0],
                bankgroup_xor_row_masks: vec![0, 0],
            },
            "bank-spread" => MappingDescriptor {
                name: "bank-spread".into(),
                channel_bits: vec![6],
                bank_bits: vec![7, 8],
                bankgroup_bits: vec![9, 10],
                column_low_bits: vec![11, 12, 13, 14, 15],
                column_high_bits: vec![16, 17, 18, 19, 20],
                rank_bits: vec![],
                row_bits: (21..37).collect(),
                bank_xor_row_masks: vec![0, 0],
                bankgroup_xor_row_masks: vec![0, 0],
            },
            other => return Err(AddrMapError::UnknownPreset(other.into())),
        };
        debug_assert!(d.validate().is_ok());
        Ok(d)
    }
}

/// Dispersion / locality estimate of a trace under a mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingAnalysis {
    /// Requests per flat bank index.
    pub bank_counts: Vec<u64>,
    /// Effective number of banks in use (inverse Simpson index):
    /// 1.0 for a single bank, `total_banks` for a perfectly uniform spread.
    pub est_blp: f64,
    /// Fraction of consecutive references landing in the same
    /// (channel, rank, bankgroup, bank, row) as their predecessor.
    pub est_rowbuffer_hits: f64,
}

/// Estimate bank-level parallelism and rowbuffer locality for an address
/// stream under `mapping`.
pub fn analyze_mapping<I>(mapping: &MappingDescriptor, addrs: I) -> Result<MappingAnalysis, AddrMapError>
where
    I: IntoIterator<Item = u64>,
{
    let mut counts = vec![0u64; mapping.total_banks() as usize];
    let mut prev: Option<DramCoord> = None;
    let mut consecutive = 0u64;
    let mut total = 0u64;
    for addr in addrs {
        let c = mapping.decompose(addr)?;
        counts[mapping.flat_bank(&c) as usize] += 1;
        if let Some(p) = prev {
            total += 1;
            if p.channel == c.channel
                && p.rank == c.rank
                && p.bankgroup == c.bankgroup
                && p.bank == c.bank
                && p.row == c.row
            {
                consecutive += 1;
            }
        }
        prev = Some(c);
    }
    let sum: u64 = counts.iter().sum();
    if sum == 0 {
        return Err(AddrMapError::Invalid("empty trace".into()));
    }
    let sq: f64 = counts.iter().map(|&c| (c as f64) * (c as f64)).sum();
    let est_blp = (sum as f64) * (sum as f64) / sq;
    let est_rowbuffer_hits = if total == 0 {
        0.0
    } else {
        consecutive as f64 / total as f64
    };
    Ok(MappingAnalysis {
        bank_counts: counts,
        est_blp,
        est_rowbuffer_hits,
    })
}
