//! The lattice of balanced partitions: join, meet, exhaustive enumeration and
//! a brute-force oracle.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde_json::json;
use thiserror::Error;

use crate::balance::{is_balanced, Balance, BalanceError, Counterexample};
use crate::cir::{cir_partition, top};
use crate::network::Network;
use crate::par::{self, Execution};
use crate::partition::Partition;
use crate::union_find::DisjointSets;

/// Default element budget for [`enumerate_balanced`].
pub const DEFAULT_BUDGET: usize = 100_000;

/// Largest network accepted by [`brute_force_balanced`].
pub const BRUTE_FORCE_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error("input partition is not balanced (cells {} and {} differ on color {})", .0.first, .0.second, .0.color)]
    NotBalanced(Counterexample),
    #[error("more than {budget} balanced partitions; enumeration stopped after {} elements", .partial.elements.len())]
    BudgetExceeded { budget: usize, partial: Box<BalancedLattice> },
    #[error("brute force is limited to {limit} cells, network has {cells}")]
    TooManyCells { cells: usize, limit: usize },
    #[error("color class of {0} cells is too large to split exhaustively")]
    ClassTooLarge(usize),
    #[error("internal error: join of balanced partitions is not balanced")]
    JoinNotBalanced,
}

/// Balanced partitions ordered by rank (coarsest first) and covers of the
/// Hasse diagram as `(finer, coarser)` index pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalancedLattice {
    pub elements: Vec<Partition>,
    pub covers: Vec<(usize, usize)>,
    pub top: Partition,
    pub bottom: Partition,
}

impl BalancedLattice {
    fn from_elements(mut elements: Vec<Partition>, top: Partition, exec: Execution) -> Self {
        sort_partitions(&mut elements);
        let covers = hasse_covers(&elements, exec);
        let bottom = Partition::trivial(top.len());
        BalancedLattice { elements, covers, top, bottom }
    }

    pub fn contains(&self, partition: &Partition) -> bool {
        self.elements.binary_search_by(|e| partition_order(e, partition)).is_ok()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn to_json(&self, net: &Network) -> serde_json::Value {
        json!({
            "elements": self.elements.iter().map(|e| net.format_partition(e)).collect::<Vec<_>>(),
            "covers": self.covers.iter().map(|&(a, b)| [a, b]).collect::<Vec<_>>(),
            "top": net.format_partition(&self.top),
            "bottom": net.format_partition(&self.bottom),
        })
    }

    /// Hasse diagram, finer partitions drawn below coarser ones.
    pub fn to_dot(&self, net: &Network) -> String {
        let mut out = String::from("digraph lattice {\n  rankdir=BT;\n  node [shape=box];\n");
        for (i, e) in self.elements.iter().enumerate() {
            let label = net.format_partition(e).replace('"', "\\\"");
            let _ = writeln!(out, "  e{i} [label=\"{label}\"];");
        }
        for (a, b) in &self.covers {
            let _ = writeln!(out, "  e{a} -> e{b};");
        }
        out.push_str("}\n");
        out
    }
}

fn partition_order(a: &Partition, b: &Partition) -> std::cmp::Ordering {
    a.rank().cmp(&b.rank()).then_with(|| a.colors().cmp(b.colors()))
}

/// Sorts by rank, then color vector; the order used by every listing here.
pub fn sort_partitions(parts: &mut [Partition]) {
    parts.sort_by(partition_order);
}

fn hasse_covers(elements: &[Partition], exec: Execution) -> Vec<(usize, usize)> {
    let upper = par::map_range(exec, elements.len(), |i| {
        // coarser elements have lower rank and therefore lower index;
        // scanning downward visits candidates from finest to coarsest
        let mut covers: Vec<usize> = Vec::new();
        for j in (0..i).rev() {
            let e = &elements[i];
            let c = &elements[j];
            if c.rank() == e.rank() || !e.is_finer(c).expect("same length") {
                continue;
            }
            if covers.iter().all(|&m| !elements[m].is_finer(c).expect("same length")) {
                covers.push(j);
            }
        }
        covers.sort_unstable();
        covers
    });
    upper
        .into_iter()
        .enumerate()
        .flat_map(|(i, cs)| cs.into_iter().map(move |j| (i, j)))
        .collect()
}

fn require_balanced(net: &Network, partition: &Partition) -> Result<(), LatticeError> {
    match is_balanced(net, partition)? {
        Balance::Balanced => Ok(()),
        Balance::Unbalanced(cx) => Err(LatticeError::NotBalanced(cx)),
    }
}

/// Least upper bound: the transitive closure of "same color in either".
pub fn join(net: &Network, a: &Partition, b: &Partition) -> Result<Partition, LatticeError> {
    require_balanced(net, a)?;
    require_balanced(net, b)?;
    let mut sets = DisjointSets::new(net.cell_count());
    for part in [a, b] {
        for class in part.classes() {
            for pair in class.windows(2) {
                sets.union(pair[0], pair[1]);
            }
        }
    }
    let joined = Partition::canonicalize(&sets.roots());
    if !is_balanced(net, &joined)?.is_balanced() {
        return Err(LatticeError::JoinNotBalanced);
    }
    Ok(joined)
}

/// Greatest lower bound: `cir` of the common refinement.
pub fn meet(net: &Network, a: &Partition, b: &Partition) -> Result<Partition, LatticeError> {
    require_balanced(net, a)?;
    require_balanced(net, b)?;
    let common = a.common_refinement(b).map_err(BalanceError::from)?;
    Ok(cir_partition(net, &common)?)
}

/// A class and the mask of members moved to a fresh color.
type Split = (Vec<usize>, u64);

/// Partitions obtained by splitting one class of `partition` in two; class
/// members keep their order and the first member stays in the old color.
fn split_seeds(partition: &Partition) -> Result<Vec<Vec<Split>>, LatticeError> {
    partition
        .classes()
        .into_iter()
        .filter(|class| class.len() >= 2)
        .map(|class| {
            if class.len() > 64 {
                return Err(LatticeError::ClassTooLarge(class.len()));
            }
            let count = (1u64 << (class.len() - 1)) - 1;
            Ok((1..=count).map(|mask| (class.clone(), mask)).collect())
        })
        .collect()
}

fn apply_split(partition: &Partition, class: &[usize], mask: u64) -> Partition {
    let mut colors = partition.colors().to_vec();
    let fresh = partition.rank();
    for (i, &cell) in class.iter().enumerate().skip(1) {
        if mask >> (i - 1) & 1 == 1 {
            colors[cell] = fresh;
        }
    }
    Partition::canonicalize(&colors)
}

/// Distinct `cir` results of every one-class split of `partition`, in
/// discovery order. Stops early once more than `limit` were found.
fn descendants(net: &Network, partition: &Partition, limit: usize) -> Result<Vec<Partition>, LatticeError> {
    let mut seen = HashSet::new();
    let mut found = Vec::new();
    for group in split_seeds(partition)? {
        for (class, mask) in group {
            let seed = apply_split(partition, &class, mask);
            let refined = cir_partition(net, &seed)?;
            if seen.insert(refined.clone()) {
                found.push(refined);
                if found.len() > limit {
                    return Ok(found);
                }
            }
        }
    }
    Ok(found)
}

/// Every balanced partition, found layer by layer from `⊤` by splitting one
/// class and refining with `cir`.
pub fn enumerate_balanced(net: &Network, budget: usize) -> Result<BalancedLattice, LatticeError> {
    enumerate_balanced_with(net, budget, Execution::default())
}

/// As [`enumerate_balanced`]; partitions of one layer are expanded through
/// `exec`, results are merged in layer order so the output does not depend on
/// it.
pub fn enumerate_balanced_with(
    net: &Network,
    budget: usize,
    exec: Execution,
) -> Result<BalancedLattice, LatticeError> {
    let top = top(net);
    let mut seen: HashSet<Partition> = HashSet::from([top.clone()]);
    let mut elements = vec![top.clone()];
    let mut layer = vec![top.clone()];
    while !layer.is_empty() {
        if elements.len() > budget {
            break;
        }
        let expanded = par::map(exec, &layer, |p| descendants(net, p, budget));
        let mut next = Vec::new();
        'merge: for found in expanded {
            for p in found? {
                if seen.insert(p.clone()) {
                    elements.push(p.clone());
                    next.push(p);
                    if elements.len() > budget {
                        break 'merge;
                    }
                }
            }
        }
        layer = next;
    }
    if elements.len() > budget {
        elements.truncate(budget);
        let partial = BalancedLattice::from_elements(elements, top, exec);
        return Err(LatticeError::BudgetExceeded { budget, partial: Box::new(partial) });
    }
    Ok(BalancedLattice::from_elements(elements, top, exec))
}

/// Every partition finer than the type partition (restricted growth strings
/// where a class only takes cells of its own type).
pub fn type_refining_partitions(net: &Network) -> Result<Vec<Partition>, LatticeError> {
    let n = net.cell_count();
    if n > BRUTE_FORCE_LIMIT {
        return Err(LatticeError::TooManyCells { cells: n, limit: BRUTE_FORCE_LIMIT });
    }
    fn extend(net: &Network, colors: &mut Vec<usize>, class_types: &mut Vec<usize>, out: &mut Vec<Partition>) {
        let cell = colors.len();
        if cell == net.cell_count() {
            out.push(Partition::canonicalize(colors));
            return;
        }
        let ty = net.cell_type(cell);
        for k in 0..class_types.len() {
            if class_types[k] == ty {
                colors.push(k);
                extend(net, colors, class_types, out);
                colors.pop();
            }
        }
        colors.push(class_types.len());
        class_types.push(ty);
        extend(net, colors, class_types, out);
        class_types.pop();
        colors.pop();
    }
    let mut out = Vec::new();
    extend(net, &mut Vec::with_capacity(n), &mut Vec::new(), &mut out);
    Ok(out)
}

/// Oracle: tests every type-refining partition for balance.
pub fn brute_force_balanced(net: &Network) -> Result<Vec<Partition>, LatticeError> {
    brute_force_balanced_with(net, Execution::default())
}

pub fn brute_force_balanced_with(net: &Network, exec: Execution) -> Result<Vec<Partition>, LatticeError> {
    let candidates = type_refining_partitions(net)?;
    let verdicts = par::map(exec, &candidates, |p| is_balanced(net, p).map(|b| b.is_balanced()));
    let mut balanced = Vec::new();
    for (p, verdict) in candidates.into_iter().zip(verdicts) {
        if verdict? {
            balanced.push(p);
        }
    }
    sort_partitions(&mut balanced);
    Ok(balanced)
}
