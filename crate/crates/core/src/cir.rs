//! Coarsest invariant refinement.
//!
//! Starting from a seed partition, each iteration splits every color by the
//! rows of `M P`: cells keep sharing a color iff they had the same color and
//! the same per-color sums. Rows are grouped through a hash table keyed by an
//! injective byte encoding of `(old color, row of M P)`. The fixed point is
//! the coarsest balanced partition finer than the seed.

use std::collections::HashMap;

use crate::balance::{check_compatible, BalanceError, RowAccumulator, SparseRow};
use crate::network::Network;
use crate::partition::Partition;

/// Basic-operation counts of one or more iterations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCount {
    /// Matrix entries folded into a row of `M P` (one per edge).
    pub entries_summed: u64,
    /// Colors written into hash keys (one for the old color plus one per
    /// non-identity sum).
    pub key_entries: u64,
    /// Hash-table lookups.
    pub probes: u64,
}

impl OpCount {
    pub fn total(&self) -> u64 {
        self.entries_summed + self.key_entries + self.probes
    }

    fn add(&mut self, other: &OpCount) {
        self.entries_summed += other.entries_summed;
        self.key_entries += other.key_entries;
        self.probes += other.probes;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationStats {
    pub rank_before: usize,
    pub rank_after: usize,
    pub ops: OpCount,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CirTrace {
    pub seed: Partition,
    /// Output of every iteration call, with its rank. The last entry repeats
    /// the converged partition.
    pub iterations: Vec<(Partition, usize)>,
    pub converged: Partition,
    pub stats: Vec<IterationStats>,
}

impl CirTrace {
    /// Iterations that actually split a color (calls minus the final
    /// confirming one).
    pub fn refinements(&self) -> usize {
        self.iterations.len() - 1
    }

    pub fn total_ops(&self) -> OpCount {
        let mut total = OpCount::default();
        for s in &self.stats {
            total.add(&s.ops);
        }
        total
    }
}

fn encode_key(old_color: usize, row: &SparseRow, key: &mut Vec<u8>) {
    key.clear();
    key.extend_from_slice(&(old_color as u64).to_le_bytes());
    for (k, sum) in row {
        key.extend_from_slice(&(*k as u64).to_le_bytes());
        sum.encode_canonical(key);
    }
}

fn iterate_counted(net: &Network, prev: &Partition, ops: &mut OpCount) -> Result<Partition, BalanceError> {
    let colors = prev.colors();
    let mut acc = RowAccumulator::new(net, prev);
    let mut table: HashMap<Vec<u8>, usize> = HashMap::with_capacity(prev.rank());
    let mut next = Vec::with_capacity(net.cell_count());
    let mut key = Vec::new();
    let mut combines = 0;
    for cell in 0..net.cell_count() {
        let row = acc.accumulate(net, colors, cell, &mut combines)?;
        ops.entries_summed += net.row(cell).entries.len() as u64;
        ops.key_entries += 1 + row.len() as u64;
        ops.probes += 1;
        encode_key(colors[cell], &row, &mut key);
        let fresh = table.len();
        let color = match table.get(key.as_slice()) {
            Some(&c) => c,
            None => {
                table.insert(key.clone(), fresh);
                fresh
            }
        };
        next.push(color);
    }
    let rank = table.len();
    Ok(Partition::from_canonical(next, rank))
}

/// One refinement step. The result is finer than `prev` and equals it iff
/// `prev` is balanced.
pub fn cir_iteration(net: &Network, prev: &Partition) -> Result<Partition, BalanceError> {
    check_compatible(net, prev)?;
    iterate_counted(net, prev, &mut OpCount::default())
}

/// Iterates to the coarsest balanced partition finer than `seed`.
pub fn cir(net: &Network, seed: &Partition) -> Result<CirTrace, BalanceError> {
    check_compatible(net, seed)?;
    let mut iterations = Vec::new();
    let mut stats = Vec::new();
    let mut current = seed.clone();
    loop {
        let mut ops = OpCount::default();
        let next = iterate_counted(net, &current, &mut ops)?;
        stats.push(IterationStats { rank_before: current.rank(), rank_after: next.rank(), ops });
        let converged = next.rank() == current.rank();
        iterations.push((next.clone(), next.rank()));
        current = next;
        if converged {
            break;
        }
    }
    Ok(CirTrace { seed: seed.clone(), iterations, converged: current, stats })
}

/// Converged partition only.
pub fn cir_partition(net: &Network, seed: &Partition) -> Result<Partition, BalanceError> {
    cir(net, seed).map(|trace| trace.converged)
}

/// The maximal balanced partition, `cir(type partition)`.
pub fn top(net: &Network) -> Partition {
    cir_partition(net, &net.type_partition()).expect("type partition is always compatible")
}
