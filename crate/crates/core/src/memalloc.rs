//! PGAS allocation disciplines: local, striped, row-co-located and replicated.
//!
//! Allocations only bookkeep where each logical word lives; the words
//! themselves are reserved in the owning nodelet's memory. Allocation happens
//! during setup, resolution is pure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::machine::{GlobalAddress, Machine, NodeletId, Word};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AllocError {
    #[error("nodelet {nodelet} out of range (machine has {total} nodelets)")]
    BadNodelet { nodelet: NodeletId, total: usize },
    #[error("nodelet {nodelet} capacity exceeded: {requested} words requested, {available} available")]
    CapacityExceeded {
        nodelet: NodeletId,
        requested: u64,
        available: u64,
    },
    #[error("stripe granularity must be at least one word")]
    ZeroStripe,
    #[error("index {index} out of bounds for allocation of {len} words")]
    OutOfBounds { index: u64, len: u64 },
    #[error("replicated allocation needs a home nodelet")]
    MissingHome,
    #[error("only replicated allocations take a home nodelet")]
    UnexpectedHome,
    #[error("row {row} out of range ({rows} rows)")]
    BadRow { row: usize, rows: usize },
}

/// How the words of an allocation map onto nodelets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    /// Every word on one nodelet.
    Local(NodeletId),
    /// Round-robin over all nodelets in stripes of `stripe_words` words.
    Striped1D { stripe_words: u64 },
    /// Row `r` lives wholly on nodelet `r mod N`.
    Rows2D { row_lengths: Vec<u64> },
    /// One full copy per nodelet.
    Replicated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    layout: Layout,
    len: u64,
    nodelets: usize,
    /// Base offset of this allocation's extent on each nodelet.
    bases: Vec<u64>,
    /// Rows2D: logical start of each row, plus a final entry equal to `len`.
    row_starts: Vec<u64>,
    /// Rows2D: offset of each row relative to its nodelet's base.
    row_offsets: Vec<u64>,
}

fn check_capacity(machine: &Machine, nodelet: NodeletId, words: u64) -> Result<(), AllocError> {
    if let Some(cap) = machine.config().nodelet_capacity_words {
        let used = machine.extent(nodelet);
        let available = cap.saturating_sub(used);
        if words > available {
            return Err(AllocError::CapacityExceeded {
                nodelet,
                requested: words,
                available,
            });
        }
    }
    Ok(())
}

fn reserve_all(machine: &mut Machine, per_nodelet: &[u64]) -> Result<Vec<u64>, AllocError> {
    for (n, &w) in per_nodelet.iter().enumerate() {
        check_capacity(machine, n, w)?;
    }
    Ok(per_nodelet
        .iter()
        .enumerate()
        .map(|(n, &w)| machine.reserve(n, w))
        .collect())
}

/// Places `n_words` contiguously on one nodelet.
pub fn alloc_local(machine: &mut Machine, nodelet: NodeletId, n_words: u64) -> Result<Allocation, AllocError> {
    let total = machine.total_nodelets();
    if nodelet >= total {
        return Err(AllocError::BadNodelet { nodelet, total });
    }
    check_capacity(machine, nodelet, n_words)?;
    let mut bases = vec![0; total];
    bases[nodelet] = machine.reserve(nodelet, n_words);
    Ok(Allocation {
        layout: Layout::Local(nodelet),
        len: n_words,
        nodelets: total,
        bases,
        row_starts: Vec::new(),
        row_offsets: Vec::new(),
    })
}

/// Word-granular round-robin striping: word `i` lives on nodelet `i mod N`.
pub fn alloc_1d_striped(machine: &mut Machine, n_words: u64) -> Result<Allocation, AllocError> {
    alloc_striped(machine, n_words, 1)
}

/// Round-robin striping in units of `stripe_words` words.
pub fn alloc_striped(machine: &mut Machine, n_words: u64, stripe_words: u64) -> Result<Allocation, AllocError> {
    if stripe_words == 0 {
        return Err(AllocError::ZeroStripe);
    }
    let n = machine.total_nodelets() as u64;
    let stripes = n_words.div_ceil(stripe_words);
    let per: Vec<u64> = (0..n)
        .map(|k| {
            // stripes owned by nodelet k, the last one possibly partial
            let owned = stripes / n + u64::from(k < stripes % n);
            let mut words = owned * stripe_words;
            if owned > 0 && (stripes - 1) % n == k {
                words -= stripes * stripe_words - n_words;
            }
            words
        })
        .collect();
    let bases = reserve_all(machine, &per)?;
    Ok(Allocation {
        layout: Layout::Striped1D { stripe_words },
        len: n_words,
        nodelets: n as usize,
        bases,
        row_starts: Vec::new(),
        row_offsets: Vec::new(),
    })
}

/// Two-stage row allocation: compute each nodelet's share of rows (rows are
/// dealt round-robin), then place every row contiguously on its nodelet.
pub fn alloc_2d_rows(machine: &mut Machine, row_lengths: &[u64]) -> Result<Allocation, AllocError> {
    let n = machine.total_nodelets();
    let mut per = vec![0u64; n];
    let mut row_offsets = Vec::with_capacity(row_lengths.len());
    let mut row_starts = Vec::with_capacity(row_lengths.len() + 1);
    let mut start = 0u64;
    for (r, &len) in row_lengths.iter().enumerate() {
        let home = r % n;
        row_offsets.push(per[home]);
        row_starts.push(start);
        per[home] += len;
        start += len;
    }
    row_starts.push(start);
    let bases = reserve_all(machine, &per)?;
    Ok(Allocation {
        layout: Layout::Rows2D {
            row_lengths: row_lengths.to_vec(),
        },
        len: start,
        nodelets: n,
        bases,
        row_starts,
        row_offsets,
    })
}

/// One copy of `n_words` on every nodelet.
pub fn alloc_replicated(machine: &mut Machine, n_words: u64) -> Result<Allocation, AllocError> {
    let n = machine.total_nodelets();
    let bases = reserve_all(machine, &vec![n_words; n])?;
    Ok(Allocation {
        layout: Layout::Replicated,
        len: n_words,
        nodelets: n,
        bases,
        row_starts: Vec::new(),
        row_offsets: Vec::new(),
    })
}

impl Allocation {
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_replicated(&self) -> bool {
        matches!(self.layout, Layout::Replicated)
    }

    /// Maps logical word `index` to its global address. `home` selects the
    /// copy of a replicated allocation and must be `None` otherwise.
    pub fn resolve(&self, index: u64, home: Option<NodeletId>) -> Result<GlobalAddress, AllocError> {
        if index >= self.len {
            return Err(AllocError::OutOfBounds {
                index,
                len: self.len,
            });
        }
        match (&self.layout, home) {
            (Layout::Replicated, None) => return Err(AllocError::MissingHome),
            (Layout::Replicated, Some(h)) if h >= self.nodelets => {
                return Err(AllocError::BadNodelet {
                    nodelet: h,
                    total: self.nodelets,
                })
            }
            (Layout::Replicated, Some(_)) => {}
            (_, Some(_)) => return Err(AllocError::UnexpectedHome),
            (_, None) => {}
        }
        Ok(self.resolve_unchecked(index, home.unwrap_or(0)))
    }

    /// Fast path used by thread programs; `index` must be in bounds.
    pub fn resolve_unchecked(&self, index: u64, home: NodeletId) -> GlobalAddress {
        match &self.layout {
            Layout::Local(n) => GlobalAddress::new(*n, self.bases[*n] + index),
            Layout::Striped1D { stripe_words } => {
                let n = self.nodelets as u64;
                let stripe = index / stripe_words;
                let nodelet = (stripe % n) as usize;
                let offset = (stripe / n) * stripe_words + index % stripe_words;
                GlobalAddress::new(nodelet, self.bases[nodelet] + offset)
            }
            Layout::Rows2D { .. } => {
                // last row whose start is <= index; skips empty rows
                let r = self.row_starts.partition_point(|&s| s <= index) - 1;
                self.row_addr(r, index - self.row_starts[r])
            }
            Layout::Replicated => GlobalAddress::new(home, self.bases[home] + index),
        }
    }

    /// Nodelet owning logical word `index` (`home` only matters when replicated).
    pub fn nodelet_of(&self, index: u64, home: NodeletId) -> NodeletId {
        self.resolve_unchecked(index, home).nodelet_id
    }

    /// Address of word `within` of row `row` in a Rows2D allocation.
    pub fn resolve_row(&self, row: usize, within: u64) -> Result<GlobalAddress, AllocError> {
        let Layout::Rows2D { row_lengths } = &self.layout else {
            return Err(AllocError::BadRow { row, rows: 0 });
        };
        let len = *row_lengths
            .get(row)
            .ok_or(AllocError::BadRow { row, rows: row_lengths.len() })?;
        if within >= len {
            return Err(AllocError::OutOfBounds { index: within, len });
        }
        Ok(self.row_addr(row, within))
    }

    fn row_addr(&self, row: usize, within: u64) -> GlobalAddress {
        let home = row % self.nodelets;
        GlobalAddress::new(home, self.bases[home] + self.row_offsets[row] + within)
    }

    /// Writes `value` to logical word `index` of every copy (replicated) or
    /// of the single owner. Setup-phase only; not timed.
    pub fn write_all(&self, machine: &mut Machine, index: u64, value: Word) -> Result<(), AllocError> {
        if self.is_replicated() {
            for h in 0..self.nodelets {
                machine.write(self.resolve(index, Some(h))?, value);
            }
        } else {
            machine.write(self.resolve(index, None)?, value);
        }
        Ok(())
    }

    /// Initializes the allocation from a slice (every copy if replicated).
    pub fn fill_from(&self, machine: &mut Machine, values: &[Word]) -> Result<(), AllocError> {
        for (i, &v) in values.iter().enumerate() {
            self.write_all(machine, i as u64, v)?;
        }
        Ok(())
    }

    /// Reads the allocation back (the `home` copy if replicated).
    pub fn read_all(&self, machine: &Machine, home: NodeletId) -> Vec<Word> {
        (0..self.len)
            .map(|i| machine.read(self.resolve_unchecked(i, home)))
            .collect()
    }

    /// Number of words of this allocation held by each nodelet (one copy's
    /// worth per nodelet when replicated).
    pub fn words_per_nodelet(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.nodelets];
        match &self.layout {
            Layout::Replicated => out.iter_mut().for_each(|w| *w = self.len),
            _ => {
                for i in 0..self.len {
                    out[self.nodelet_of(i, 0)] += 1;
                }
            }
        }
        out
    }
}
