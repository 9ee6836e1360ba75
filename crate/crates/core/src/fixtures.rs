//! Small reference networks used throughout the tests and the CLI docs.

use crate::monoid::{MonoidElement, MonoidSpec};
use crate::network::{MonoidRegistry, Network, NetworkBuilder};

/// Three cells of one type with in-adjacency `[[1,0,1],[1,0,1],[1,1,1]]`.
pub fn three_cell() -> Network {
    let one = || MonoidElement::Natural(1);
    NetworkBuilder::new(["cell"])
        .uniform_monoid(MonoidSpec::NaturalAdd)
        .cell("1", "cell")
        .cell("2", "cell")
        .cell("3", "cell")
        .edge("1", "1", one())
        .edge("1", "3", one())
        .edge("2", "1", one())
        .edge("2", "3", one())
        .edge("3", "1", one())
        .edge("3", "2", one())
        .edge("3", "3", one())
        .build()
        .expect("valid fixture")
}

/// The chain `1 → 2 → 3`; its only balanced partition is the trivial one.
pub fn chain() -> Network {
    NetworkBuilder::new(["cell"])
        .uniform_monoid(MonoidSpec::NaturalAdd)
        .cell("1", "cell")
        .cell("2", "cell")
        .cell("3", "cell")
        .edge("2", "1", MonoidElement::Natural(1))
        .edge("3", "2", MonoidElement::Natural(1))
        .build()
        .expect("valid fixture")
}

/// Six cells of two types (`{1,2,5,6}` and `{3,4}`), every edge a 30 Ω
/// resistor.
pub fn resistor_six() -> Network {
    const EDGES: [(u8, u8); 16] = [
        (1, 1), (1, 2), (1, 3),
        (2, 1), (2, 2), (2, 3),
        (3, 1), (3, 4), (3, 5),
        (4, 3), (4, 5), (4, 6),
        (5, 1), (5, 5),
        (6, 2), (6, 5),
    ];
    let mut builder = NetworkBuilder::new(["a", "b"]).uniform_monoid(MonoidSpec::ResistorParallel);
    for (id, ty) in [("1", "a"), ("2", "a"), ("3", "b"), ("4", "b"), ("5", "a"), ("6", "a")] {
        builder = builder.cell(id, ty);
    }
    for (to, from) in EDGES {
        builder = builder.edge(to.to_string(), from.to_string(), MonoidElement::ohms(30));
    }
    builder.build().expect("valid fixture")
}

/// `n` cells of one type, every ordered pair joined by a unit edge.
pub fn all_to_all(n: usize) -> Network {
    let mut builder = NetworkBuilder::new(["cell"]).uniform_monoid(MonoidSpec::NaturalAdd);
    for c in 1..=n {
        builder = builder.cell(c.to_string(), "cell");
    }
    for c in 1..=n {
        for d in 1..=n {
            builder = builder.edge(c.to_string(), d.to_string(), MonoidElement::Natural(1));
        }
    }
    builder.build().expect("valid fixture")
}

/// Directed path `1 → 2 → … → n` with unit weights.
pub fn path(n: usize) -> Network {
    let mut builder = NetworkBuilder::new(["cell"]).uniform_monoid(MonoidSpec::NaturalAdd);
    for c in 1..=n {
        builder = builder.cell(c.to_string(), "cell");
    }
    for c in 2..=n {
        builder = builder.edge(c.to_string(), (c - 1).to_string(), MonoidElement::Natural(1));
    }
    builder.build().expect("valid fixture")
}

/// Path `1 → … → n` on top of the complete graph: the complete part adds
/// the same constant to every row, so each refinement step still splits off
/// one cell, but every step reads `n²` entries.
pub fn dense_path(n: usize) -> Network {
    let ids = (1..=n).map(|c| c.to_string()).collect();
    let edges = (0..n)
        .flat_map(|c| (0..n).map(move |d| (c, d, MonoidElement::Natural(if d + 1 == c { 2 } else { 1 }))))
        .collect();
    Network::from_edges(
        vec!["cell".to_string()],
        ids,
        vec![0; n],
        MonoidRegistry::uniform(1, MonoidSpec::NaturalAdd),
        edges,
    )
    .expect("valid fixture")
}
