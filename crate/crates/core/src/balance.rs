//! Balanced partitions and quotient networks.
//!
//! A partition is balanced when same-colored cells have equal rows in `M P`,
//! i.e. the same per-color parallel of incoming weights.

use thiserror::Error;

use crate::monoid::{MonoidElement, MonoidError};
use crate::network::{Network, NetworkError};
use crate::par::{self, Execution};
use crate::partition::{Partition, PartitionError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BalanceError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("partition mixes cells of different types")]
    TypeIncompatible,
    #[error("partition is not balanced: cells {} and {} differ on color {}", .0.first, .0.second, .0.color)]
    NotBalanced(Counterexample),
    #[error(transparent)]
    Monoid(#[from] MonoidError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Two same-colored cells whose rows of `M P` differ at `color`
/// (all indices 0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counterexample {
    pub first: usize,
    pub second: usize,
    pub color: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Balance {
    Balanced,
    Unbalanced(Counterexample),
}

impl Balance {
    pub fn is_balanced(&self) -> bool {
        matches!(self, Balance::Balanced)
    }
}

/// Row `c` of `M P`: entry `k` is the parallel of `m_cd` over cells `d` of
/// color `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowSignature {
    pub owner_color: usize,
    pub sums: Vec<MonoidElement>,
}

/// Row of `M P` restricted to colors whose sum is not the identity, sorted by
/// color. Equal sparse rows ⇔ equal dense rows, since identities are unique.
pub type SparseRow = Vec<(usize, MonoidElement)>;

/// Scratch space for accumulating one row of `M P` in `O(deg)`.
pub(crate) struct RowAccumulator {
    slots: Vec<Option<MonoidElement>>,
    touched: Vec<usize>,
    color_types: Vec<usize>,
}

impl RowAccumulator {
    pub(crate) fn new(net: &Network, partition: &Partition) -> Self {
        Self::with_color_types(color_types(net, partition))
    }

    fn with_color_types(color_types: Vec<usize>) -> Self {
        RowAccumulator { slots: vec![None; color_types.len()], touched: Vec::new(), color_types }
    }

    /// Sums row `cell` by `colors`. Adds the number of monoid combines
    /// performed to `combines`.
    pub(crate) fn accumulate(
        &mut self,
        net: &Network,
        colors: &[usize],
        cell: usize,
        combines: &mut u64,
    ) -> Result<SparseRow, MonoidError> {
        let row = net.row(cell);
        for (source, weight) in row.entries {
            let k = colors[*source];
            match &mut self.slots[k] {
                Some(acc) => {
                    net.monoid_for(cell, *source).combine_in_place(acc, weight)?;
                    *combines += 1;
                }
                slot @ None => {
                    *slot = Some(weight.clone());
                    self.touched.push(k);
                }
            }
        }
        self.touched.sort_unstable();
        let mut out = Vec::with_capacity(self.touched.len());
        for k in self.touched.drain(..) {
            let sum = self.slots[k].take().expect("touched slot is filled");
            // parallels of non-identity weights may still collapse in
            // general monoids
            if &sum != net.identity(net.cell_type(cell), self.color_types[k]) {
                out.push((k, sum));
            }
        }
        Ok(out)
    }
}

/// Errors unless `partition` has one entry per cell and refines the types.
pub fn check_compatible(net: &Network, partition: &Partition) -> Result<(), BalanceError> {
    if partition.is_finer(&net.type_partition())? {
        Ok(())
    } else {
        Err(BalanceError::TypeIncompatible)
    }
}

/// Sparse rows of `M P` for every cell.
pub fn sparse_rows(net: &Network, partition: &Partition, exec: Execution) -> Result<Vec<SparseRow>, BalanceError> {
    check_compatible(net, partition)?;
    let types = color_types(net, partition);
    let mut combines = 0;
    let rows = if exec.is_parallel() {
        par::map_range(exec, net.cell_count(), |cell| {
            let mut combines = 0;
            RowAccumulator::with_color_types(types.clone()).accumulate(net, partition.colors(), cell, &mut combines)
        })
    } else {
        let mut acc = RowAccumulator::with_color_types(types);
        (0..net.cell_count())
            .map(|cell| acc.accumulate(net, partition.colors(), cell, &mut combines))
            .collect()
    };
    Ok(rows.into_iter().collect::<Result<_, _>>()?)
}

/// Type of each color of a type-compatible partition.
fn color_types(net: &Network, partition: &Partition) -> Vec<usize> {
    let mut types = vec![0; partition.rank()];
    for cell in 0..net.cell_count() {
        types[partition.color(cell)] = net.cell_type(cell);
    }
    types
}

fn densify(net: &Network, cell: usize, color_types: &[usize], sparse: &SparseRow) -> Vec<MonoidElement> {
    let target = net.cell_type(cell);
    let mut dense: Vec<MonoidElement> = color_types.iter().map(|&j| net.monoid(target, j).identity()).collect();
    for (k, sum) in sparse {
        dense[*k] = sum.clone();
    }
    dense
}

pub fn row_signature(net: &Network, partition: &Partition, cell: usize) -> Result<RowSignature, BalanceError> {
    check_compatible(net, partition)?;
    let mut combines = 0;
    let sparse = RowAccumulator::new(net, partition).accumulate(net, partition.colors(), cell, &mut combines)?;
    Ok(RowSignature {
        owner_color: partition.color(cell),
        sums: densify(net, cell, &color_types(net, partition), &sparse),
    })
}

/// The full matrix `M P`, one dense row per cell.
pub fn mp_table(net: &Network, partition: &Partition) -> Result<Vec<Vec<MonoidElement>>, BalanceError> {
    let rows = sparse_rows(net, partition, Execution::Sequential)?;
    let types = color_types(net, partition);
    Ok(rows
        .iter()
        .enumerate()
        .map(|(cell, row)| densify(net, cell, &types, row))
        .collect())
}

/// First color at which two sparse rows differ.
fn first_difference(a: &SparseRow, b: &SparseRow) -> Option<usize> {
    let (mut i, mut j) = (0, 0);
    loop {
        match (a.get(i), b.get(j)) {
            (None, None) => return None,
            (Some((k, _)), None) | (None, Some((k, _))) => return Some(*k),
            (Some((ka, wa)), Some((kb, wb))) => {
                if ka != kb {
                    return Some(*ka.min(kb));
                }
                if wa != wb {
                    return Some(*ka);
                }
                i += 1;
                j += 1;
            }
        }
    }
}

pub(crate) fn balance_of_rows(partition: &Partition, rows: &[SparseRow]) -> Balance {
    let mut representative: Vec<Option<usize>> = vec![None; partition.rank()];
    for (cell, row) in rows.iter().enumerate() {
        let color = partition.color(cell);
        match representative[color] {
            None => representative[color] = Some(cell),
            Some(first) => {
                if let Some(k) = first_difference(&rows[first], row) {
                    return Balance::Unbalanced(Counterexample { first, second: cell, color: k });
                }
            }
        }
    }
    Balance::Balanced
}

/// Decides balance; the counterexample is the first offending cell in cell
/// order, paired with the first cell of its color.
pub fn is_balanced(net: &Network, partition: &Partition) -> Result<Balance, BalanceError> {
    is_balanced_with(net, partition, Execution::Sequential)
}

pub fn is_balanced_with(net: &Network, partition: &Partition, exec: Execution) -> Result<Balance, BalanceError> {
    let rows = sparse_rows(net, partition, exec)?;
    Ok(balance_of_rows(partition, &rows))
}

/// Quotient network `Q` with `M P = P Q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotientResult {
    pub quotient: Network,
    pub relation: Partition,
}

impl QuotientResult {
    /// Checks `M P = P Q` entrywise against the original network.
    pub fn satisfies_relation(&self, net: &Network) -> Result<bool, BalanceError> {
        let mp = mp_table(net, &self.relation)?;
        for (cell, row) in mp.iter().enumerate() {
            let k = self.relation.color(cell);
            for (j, sum) in row.iter().enumerate() {
                if *sum != self.quotient.entry(k, j) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Separator used to name quotient cells after the cells they merge.
pub const QUOTIENT_ID_SEPARATOR: &str = "+";

/// The quotient network over a balanced partition. Quotient cells are named
/// by joining the merged ids with `+` and keep types and monoids.
pub fn quotient(net: &Network, partition: &Partition) -> Result<QuotientResult, BalanceError> {
    let rows = sparse_rows(net, partition, Execution::Sequential)?;
    if let Balance::Unbalanced(cx) = balance_of_rows(partition, &rows) {
        return Err(BalanceError::NotBalanced(cx));
    }
    let classes = partition.classes();
    let ids = classes
        .iter()
        .map(|class| {
            class
                .iter()
                .map(|&c| net.cell_ids()[c].as_str())
                .collect::<Vec<_>>()
                .join(QUOTIENT_ID_SEPARATOR)
        })
        .collect();
    let types = classes.iter().map(|class| net.cell_type(class[0])).collect();
    let edges = classes
        .iter()
        .enumerate()
        .flat_map(|(k, class)| rows[class[0]].iter().map(move |(j, sum)| (k, *j, sum.clone())))
        .collect();
    let quotient = Network::from_edges(net.type_names().to_vec(), ids, types, net.registry().clone(), edges)?;
    Ok(QuotientResult { quotient, relation: partition.clone() })
}

/// Outcome of comparing `(G/⋈₀₁)/⋈₁₂` with `G/⋈₀₂` where `P₀₂ = P₀₁P₁₂`.
#[derive(Debug, Clone)]
pub struct TransitivityReport {
    pub composed: Partition,
    pub two_step: Network,
    pub direct: Network,
}

impl TransitivityReport {
    /// Both routes give the same network (ids aside).
    pub fn holds(&self) -> bool {
        self.two_step.same_structure(&self.direct)
    }
}

pub fn check_transitivity(
    net: &Network,
    outer: &Partition,
    inner: &Partition,
) -> Result<TransitivityReport, BalanceError> {
    let first = quotient(net, outer)?;
    let two_step = quotient(&first.quotient, inner)?.quotient;
    let composed = outer.compose(inner)?;
    let direct = quotient(net, &composed)?.quotient;
    Ok(TransitivityReport { composed, two_step, direct })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn p(raw: &[usize]) -> Partition {
        Partition::canonicalize(raw)
    }

    fn nat(n: u64) -> MonoidElement {
        MonoidElement::Natural(n)
    }

    #[test]
    fn three_cell_signatures() {
        let net = fixtures::three_cell();
        let a = p(&[1, 1, 2]);
        assert_eq!(row_signature(&net, &a, 2).unwrap().sums, vec![nat(2), nat(1)]);
        let table = mp_table(&net, &a).unwrap();
        assert_eq!(table, vec![vec![nat(1), nat(1)], vec![nat(1), nat(1)], vec![nat(2), nat(1)]]);
        let t = Partition::trivial(3);
        for c in 0..3 {
            let sig = row_signature(&net, &t, c).unwrap();
            assert_eq!(sig.sums, (0..3).map(|d| net.entry(c, d)).collect::<Vec<_>>());
        }
    }

    #[test]
    fn resistor_signature() {
        let net = fixtures::resistor_six();
        let sig = row_signature(&net, &net.type_partition(), 0).unwrap();
        assert_eq!(sig.sums, vec![MonoidElement::ohms(15), MonoidElement::ohms(30)]);
    }

    #[test]
    fn balance_decisions() {
        let net = fixtures::three_cell();
        assert!(is_balanced(&net, &p(&[1, 1, 2])).unwrap().is_balanced());
        assert!(is_balanced(&net, &Partition::trivial(3)).unwrap().is_balanced());
        let chain = fixtures::chain();
        assert_eq!(
            is_balanced(&chain, &p(&[1, 2, 2])).unwrap(),
            Balance::Unbalanced(Counterexample { first: 1, second: 2, color: 0 })
        );
    }

    #[test]
    fn type_incompatible_partition() {
        let net = fixtures::resistor_six();
        assert_eq!(is_balanced(&net, &Partition::uniform(6)), Err(BalanceError::TypeIncompatible));
        assert!(matches!(is_balanced(&net, &Partition::uniform(4)), Err(BalanceError::Partition(_))));
    }

    #[test]
    fn three_cell_quotient() {
        let net = fixtures::three_cell();
        let result = quotient(&net, &p(&[1, 1, 2])).unwrap();
        let q = &result.quotient;
        assert_eq!(q.cell_ids(), ["1+2", "3"]);
        let expected = [[1, 1], [2, 1]];
        for (k, row) in expected.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(q.entry(k, j), nat(v));
            }
        }
        assert!(result.satisfies_relation(&net).unwrap());
        let trivial = quotient(&net, &Partition::trivial(3)).unwrap();
        assert!(trivial.quotient.same_structure(&net));
        assert!(matches!(quotient(&fixtures::chain(), &p(&[1, 2, 2])), Err(BalanceError::NotBalanced(_))));
    }

    #[test]
    fn resistor_quotient_rows_are_distinct_mp_rows() {
        let net = fixtures::resistor_six();
        let top = p(&[1, 1, 2, 3, 4, 4]);
        let result = quotient(&net, &top).unwrap();
        assert!(result.satisfies_relation(&net).unwrap());
        // rows of M P₂ worked out by hand from the matrix
        let inf = MonoidElement::open_circuit;
        let r = MonoidElement::ohms;
        let expected = [
            [r(15), r(30), inf(), inf()],
            [r(30), inf(), r(30), r(30)],
            [inf(), r(30), inf(), r(15)],
            [r(30), inf(), inf(), r(30)],
        ];
        for (k, row) in expected.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(&result.quotient.entry(k, j), v, "Q[{k}][{j}]");
            }
        }
    }

    #[test]
    fn transitivity_on_resistor_network() {
        let net = fixtures::resistor_six();
        let b1 = p(&[1, 1, 2, 3, 4, 5]);
        // merges the quotient cells holding 5 and 6
        let inner = p(&[1, 2, 3, 4, 4]);
        let report = check_transitivity(&net, &b1, &inner).unwrap();
        assert_eq!(report.composed, p(&[1, 1, 2, 3, 4, 4]));
        assert!(report.holds());
        let direct = quotient(&net, &report.composed).unwrap().quotient;
        assert!(report.two_step.same_structure(&direct));

        let identity = check_transitivity(&net, &b1, &Partition::trivial(5)).unwrap();
        assert!(identity.holds());
        assert_eq!(identity.composed, b1);
        let from_trivial = check_transitivity(&net, &Partition::trivial(6), &b1).unwrap();
        assert!(from_trivial.holds());
    }
}
