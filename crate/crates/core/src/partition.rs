//! Partitions of the cell set ("colorings") in canonical vector form.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("partitions have different sizes ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("partition is not finer than the target partition")]
    NotFiner,
    #[error("state is not synchronized on color class {color} (cells {cells:?})")]
    NotSynchronized { color: usize, cells: Vec<usize> },
    #[error("unknown cell id {0:?} in partition string")]
    UnknownCell(String),
    #[error("cell {0:?} appears more than once in partition string")]
    DuplicateCell(String),
    #[error("cell {0:?} is missing from partition string")]
    MissingCell(String),
    #[error("empty class in partition string")]
    EmptyClass,
}

/// A partition of `0..len` where `colors[c]` is the class of cell `c`.
///
/// Colors are 0-based and in first-occurrence order, so two partitions are
/// equal iff their color vectors are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    colors: Vec<usize>,
    rank: usize,
}

impl Partition {
    /// Relabels arbitrary class labels to first-occurrence order.
    pub fn canonicalize<L: Eq + std::hash::Hash>(raw: &[L]) -> Self {
        let mut seen: HashMap<&L, usize> = HashMap::with_capacity(raw.len());
        let colors = raw
            .iter()
            .map(|label| {
                let next = seen.len();
                *seen.entry(label).or_insert(next)
            })
            .collect();
        Partition { colors, rank: seen.len() }
    }

    /// Builds a partition from colors already in canonical order.
    pub(crate) fn from_canonical(colors: Vec<usize>, rank: usize) -> Self {
        debug_assert_eq!(Partition::canonicalize(&colors).colors, colors);
        Partition { colors, rank }
    }

    /// The finest partition: every cell in its own class.
    pub fn trivial(len: usize) -> Self {
        Partition { colors: (0..len).collect(), rank: len }
    }

    /// The coarsest partition: all cells share one class.
    pub fn uniform(len: usize) -> Self {
        Partition { colors: vec![0; len], rank: usize::from(len > 0) }
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn colors(&self) -> &[usize] {
        &self.colors
    }

    pub fn color(&self, cell: usize) -> usize {
        self.colors[cell]
    }

    /// Colors numbered from 1, as usually written down by hand.
    pub fn one_based(&self) -> Vec<usize> {
        self.colors.iter().map(|c| c + 1).collect()
    }

    pub fn is_trivial(&self) -> bool {
        self.rank == self.colors.len()
    }

    /// Cells of each class, classes in color order, cells ascending.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut classes = vec![Vec::new(); self.rank];
        for (cell, &color) in self.colors.iter().enumerate() {
            classes[color].push(cell);
        }
        classes
    }

    /// `self ≤ other`: every class of `self` lies inside a class of `other`.
    pub fn is_finer(&self, other: &Partition) -> Result<bool, PartitionError> {
        self.same_len(other)?;
        let mut image = vec![usize::MAX; self.rank];
        for (&a, &b) in self.colors.iter().zip(&other.colors) {
            if image[a] == usize::MAX {
                image[a] = b;
            } else if image[a] != b {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `other / self`: the partition of `self`'s colors that merges them into
    /// `other`, so that `(other/self)(self(c)) = other(c)`.
    pub fn quotient_partition(&self, other: &Partition) -> Result<Partition, PartitionError> {
        if !self.is_finer(other)? {
            return Err(PartitionError::NotFiner);
        }
        let mut image = vec![0; self.rank];
        for (&a, &b) in self.colors.iter().zip(&other.colors) {
            image[a] = b;
        }
        Ok(Partition::canonicalize(&image))
    }

    /// Inverse of [`Partition::quotient_partition`]: `outer(self(c))`.
    pub fn compose(&self, outer: &Partition) -> Result<Partition, PartitionError> {
        if outer.len() != self.rank {
            return Err(PartitionError::SizeMismatch(self.rank, outer.len()));
        }
        let colors: Vec<usize> = self.colors.iter().map(|&a| outer.colors[a]).collect();
        Ok(Partition::canonicalize(&colors))
    }

    /// Coarsest partition finer than both: cells share a class iff they share
    /// one in `self` and in `other`.
    pub fn common_refinement(&self, other: &Partition) -> Result<Partition, PartitionError> {
        self.same_len(other)?;
        let pairs: Vec<(usize, usize)> = self.colors.iter().copied().zip(other.colors.iter().copied()).collect();
        Ok(Partition::canonicalize(&pairs))
    }

    /// `x = P x̄`.
    pub fn lift<T: Clone>(&self, reduced: &[T]) -> Result<Vec<T>, PartitionError> {
        if reduced.len() != self.rank {
            return Err(PartitionError::SizeMismatch(self.rank, reduced.len()));
        }
        Ok(self.colors.iter().map(|&k| reduced[k].clone()).collect())
    }

    /// Inverse of [`Partition::lift`] on the polydiagonal; fails with the
    /// first class whose cells disagree.
    pub fn project<T: Clone + PartialEq>(&self, full: &[T]) -> Result<Vec<T>, PartitionError> {
        if full.len() != self.len() {
            return Err(PartitionError::SizeMismatch(self.len(), full.len()));
        }
        let mut reduced: Vec<Option<T>> = vec![None; self.rank];
        for (cell, value) in full.iter().enumerate() {
            let color = self.colors[cell];
            match &reduced[color] {
                None => reduced[color] = Some(value.clone()),
                Some(v) if v == value => {}
                Some(_) => {
                    return Err(PartitionError::NotSynchronized {
                        color,
                        cells: self.classes().swap_remove(color),
                    })
                }
            }
        }
        Ok(reduced.into_iter().map(|v| v.expect("every color is used")).collect())
    }

    /// Renders as `"1,2;3;4;5,6"` using the given cell ids.
    pub fn format_with_ids<S: AsRef<str>>(&self, ids: &[S]) -> String {
        self.classes()
            .iter()
            .map(|class| {
                class
                    .iter()
                    .map(|&c| ids[c].as_ref())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join(";")
    }

    /// Parses `"1,2;3;4;5,6"`, every id in `ids` appearing exactly once.
    pub fn parse_with_ids<S: AsRef<str>>(text: &str, ids: &[S]) -> Result<Partition, PartitionError> {
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_ref(), i)).collect();
        let mut labels: Vec<Option<usize>> = vec![None; ids.len()];
        for (class, group) in text.split(';').enumerate() {
            let group = group.trim();
            if group.is_empty() {
                return Err(PartitionError::EmptyClass);
            }
            for id in group.split(',').map(str::trim) {
                let &cell = index
                    .get(id)
                    .ok_or_else(|| PartitionError::UnknownCell(id.to_string()))?;
                if labels[cell].replace(class).is_some() {
                    return Err(PartitionError::DuplicateCell(id.to_string()));
                }
            }
        }
        let labels = labels
            .into_iter()
            .enumerate()
            .map(|(cell, l)| l.ok_or_else(|| PartitionError::MissingCell(ids[cell].as_ref().to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Partition::canonicalize(&labels))
    }

    fn same_len(&self, other: &Partition) -> Result<(), PartitionError> {
        if self.len() == other.len() {
            Ok(())
        } else {
            Err(PartitionError::SizeMismatch(self.len(), other.len()))
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<String> = (1..=self.len()).map(|i| i.to_string()).collect();
        f.write_str(&self.format_with_ids(&ids))
    }
}

/// A point of the polydiagonal of a partition, kept in both coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyPoint {
    pub full: Vec<f64>,
    pub reduced: Vec<f64>,
}

impl PolyPoint {
    pub fn from_reduced(partition: &Partition, reduced: Vec<f64>) -> Result<Self, PartitionError> {
        let full = partition.lift(&reduced)?;
        Ok(PolyPoint { full, reduced })
    }

    pub fn from_full(partition: &Partition, full: Vec<f64>) -> Result<Self, PartitionError> {
        let reduced = partition.project(&full)?;
        Ok(PolyPoint { full, reduced })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(raw: &[usize]) -> Partition {
        Partition::canonicalize(raw)
    }

    #[test]
    fn canonical_relabeling() {
        assert_eq!(p(&[2, 2, 1]).one_based(), vec![1, 1, 2]);
        assert_eq!(p(&[1, 1, 2, 3]).one_based(), vec![1, 1, 2, 3]);
        assert_eq!(p(&[5, 5, 5]).one_based(), vec![1, 1, 1]);
        assert_eq!(p(&[5, 5, 5]).rank(), 1);
    }

    #[test]
    fn refinement_order() {
        let a = p(&[1, 1, 2, 3]);
        let b = p(&[2, 2, 2, 1]);
        assert!(a.is_finer(&b).unwrap());
        assert!(!b.is_finer(&a).unwrap());
        assert!(Partition::trivial(4).is_finer(&b).unwrap());
        assert!(!p(&[1, 2, 1]).is_finer(&p(&[1, 1, 2])).unwrap());
        assert_eq!(a.is_finer(&Partition::trivial(3)), Err(PartitionError::SizeMismatch(4, 3)));
    }

    #[test]
    fn quotient_of_partitions() {
        let a = p(&[1, 1, 2, 3]);
        let b = p(&[1, 1, 1, 2]);
        assert_eq!(a.quotient_partition(&b).unwrap().one_based(), vec![1, 1, 2]);
        assert_eq!(a.quotient_partition(&a).unwrap(), Partition::trivial(3));
        assert_eq!(Partition::trivial(4).quotient_partition(&b).unwrap(), b);
        assert_eq!(b.quotient_partition(&a), Err(PartitionError::NotFiner));
    }

    #[test]
    fn common_refinement_pairs_colors() {
        let a = p(&[1, 1, 2, 2]);
        let b = p(&[1, 2, 2, 1]);
        assert_eq!(a.common_refinement(&b).unwrap(), Partition::trivial(4));
        assert_eq!(a.common_refinement(&a).unwrap(), a);
        assert_eq!(a.common_refinement(&Partition::trivial(4)).unwrap(), Partition::trivial(4));
    }

    #[test]
    fn lift_and_project() {
        let a = p(&[1, 1, 2]);
        assert_eq!(a.lift(&[5.0, 7.0]).unwrap(), vec![5.0, 5.0, 7.0]);
        assert_eq!(
            a.project(&[5.0, 6.0, 7.0]),
            Err(PartitionError::NotSynchronized { color: 0, cells: vec![0, 1] })
        );
        let t = Partition::trivial(3);
        assert_eq!(t.lift(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let point = PolyPoint::from_reduced(&a, vec![5.0, 7.0]).unwrap();
        assert_eq!(PolyPoint::from_full(&a, point.full.clone()).unwrap(), point);
    }

    #[test]
    fn text_form() {
        let ids = ["1", "2", "3", "4", "5", "6"];
        let part = Partition::parse_with_ids("1,2;3;4;5,6", &ids).unwrap();
        assert_eq!(part.one_based(), vec![1, 1, 2, 3, 4, 4]);
        assert_eq!(part.format_with_ids(&ids), "1,2;3;4;5,6");
        assert_eq!(Partition::parse_with_ids("5,6;1,2;3;4", &ids).unwrap(), part);
        assert!(matches!(Partition::parse_with_ids("1,2;3", &ids), Err(PartitionError::MissingCell(_))));
        assert!(matches!(Partition::parse_with_ids("1,1;2;3;4;5;6", &ids), Err(PartitionError::DuplicateCell(_))));
        assert!(matches!(Partition::parse_with_ids("1,2;;3;4;5,6", &ids), Err(PartitionError::EmptyClass)));
        assert!(matches!(Partition::parse_with_ids("1,9;2;3;4;5;6", &ids), Err(PartitionError::UnknownCell(_))));
    }

    fn arb_partition(len: usize) -> impl Strategy<Value = Partition> {
        prop::collection::vec(0usize..4, len).prop_map(|raw| Partition::canonicalize(&raw))
    }

    proptest! {
        #[test]
        fn finer_is_a_partial_order(a in arb_partition(6), b in arb_partition(6), c in arb_partition(6)) {
            prop_assert!(a.is_finer(&a).unwrap());
            if a.is_finer(&b).unwrap() && b.is_finer(&a).unwrap() {
                prop_assert_eq!(&a, &b);
            }
            if a.is_finer(&b).unwrap() && b.is_finer(&c).unwrap() {
                prop_assert!(a.is_finer(&c).unwrap());
            }
        }

        #[test]
        fn common_refinement_rank_bound(a in arb_partition(7), b in arb_partition(7)) {
            let m = a.common_refinement(&b).unwrap();
            prop_assert!(m.rank() >= a.rank().max(b.rank()));
            prop_assert!(m.is_finer(&a).unwrap() && m.is_finer(&b).unwrap());
        }

        #[test]
        fn quotient_partition_recomposes(a in arb_partition(7), b in arb_partition(7)) {
            // coarsen b so that a ≤ b holds
            let fine = a.common_refinement(&b).unwrap();
            let q = fine.quotient_partition(&b).unwrap();
            for cell in 0..7 {
                prop_assert_eq!(q.color(fine.color(cell)), b.color(cell));
            }
            prop_assert_eq!(fine.compose(&q).unwrap(), b);
        }

        #[test]
        fn canonical_form_is_label_invariant(raw in prop::collection::vec(0usize..5, 1..9), shift in 1usize..50) {
            let relabeled: Vec<usize> = raw.iter().map(|x| x * 7 + shift).collect();
            prop_assert_eq!(Partition::canonicalize(&raw), Partition::canonicalize(&relabeled));
        }
    }
}
