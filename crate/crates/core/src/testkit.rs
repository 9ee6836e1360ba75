//! Seeded random networks and partitions for property tests, the acceptance
//! suite and benchmarks.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::monoid::{product_monoid, MonoidElement, MonoidSpec};
use crate::network::{MonoidRegistry, Network};
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonoidKind {
    NaturalAdd,
    Resistor,
    Free,
    Product,
}

impl MonoidKind {
    pub const ALL: [MonoidKind; 4] = [MonoidKind::NaturalAdd, MonoidKind::Resistor, MonoidKind::Free, MonoidKind::Product];

    pub fn spec(self) -> MonoidSpec {
        match self {
            MonoidKind::NaturalAdd => MonoidSpec::NaturalAdd,
            MonoidKind::Resistor => MonoidSpec::ResistorParallel,
            MonoidKind::Free => MonoidSpec::free(["a", "b"]),
            MonoidKind::Product => product_monoid(vec![MonoidSpec::NaturalAdd, MonoidSpec::ResistorParallel]),
        }
    }
}

/// A non-identity weight. Resistances come from a small set with many
/// coincidences (`30 ∥ 30 = 15`, `20 ∥ 60 = 15`) and are never short
/// circuits.
pub fn random_weight<R: Rng + ?Sized>(spec: &MonoidSpec, rng: &mut R) -> MonoidElement {
    match spec {
        MonoidSpec::NaturalAdd | MonoidSpec::NaturalMul => MonoidElement::Natural(rng.random_range(1..=3)),
        MonoidSpec::ResistorParallel => MonoidElement::ohms(*[10, 15, 20, 30, 60].choose(rng).expect("nonempty")),
        MonoidSpec::FreeCommutative { generators } => {
            let gens: Vec<&String> = generators.iter().collect();
            let mut counts = BTreeMap::new();
            for _ in 0..rng.random_range(1..=2) {
                *counts.entry((*gens.choose(rng).expect("generators")).clone()).or_insert(0) += 1;
            }
            MonoidElement::Multiset(counts)
        }
        MonoidSpec::Product { parts } => MonoidElement::Tuple(parts.iter().map(|p| random_weight(p, rng)).collect()),
        MonoidSpec::WithAnnihilator { inner } => random_weight(inner, rng),
    }
}

fn random_registry<R: Rng + ?Sized>(types: usize, primary: MonoidKind, rng: &mut R) -> MonoidRegistry {
    let mixed = types > 1 && rng.random_bool(0.5);
    let mut registry = MonoidRegistry::new();
    for t in 0..types {
        for s in 0..types {
            let kind = if mixed && (t, s) != (0, 0) { *MonoidKind::ALL.choose(rng).expect("kinds") } else { primary };
            registry.insert(t, s, kind.spec());
        }
    }
    registry
}

fn assemble(types: usize, cell_types: Vec<usize>, registry: MonoidRegistry, edges: Vec<(usize, usize, MonoidElement)>) -> Network {
    let type_names = (0..types).map(|t| ["a", "b", "c"][t].to_string()).collect();
    let ids = (1..=cell_types.len()).map(|c| c.to_string()).collect();
    Network::from_edges(type_names, ids, cell_types, registry, edges).expect("generated network is valid")
}

/// Random edges with density about `0.35`.
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, cells: usize, primary: MonoidKind) -> Network {
    let types = rng.random_range(1..=2.min(cells));
    let cell_types: Vec<usize> = (0..cells).map(|c| if c < types { c } else { rng.random_range(0..types) }).collect();
    let registry = random_registry(types, primary, rng);
    let mut edges = Vec::new();
    for c in 0..cells {
        for d in 0..cells {
            if rng.random_bool(0.35) {
                let spec = registry.get(cell_types[c], cell_types[d]).expect("registry covers all pairs");
                edges.push((c, d, random_weight(spec, rng)));
            }
        }
    }
    assemble(types, cell_types, registry, edges)
}

/// A network in which a random type-respecting partition is balanced: a
/// random quotient is drawn first, and each of its entries `q_kl` is given to
/// one random cell of class `l`, for every cell of class `k`.
pub fn lifted_network<R: Rng + ?Sized>(rng: &mut R, cells: usize, primary: MonoidKind) -> (Network, Partition) {
    let types = rng.random_range(1..=2.min(cells));
    let classes = rng.random_range(types..=cells.min(types + 3));
    let class_types: Vec<usize> = (0..classes).map(|k| if k < types { k } else { rng.random_range(0..types) }).collect();
    let mut colors: Vec<usize> = (0..cells).map(|c| if c < classes { c } else { rng.random_range(0..classes) }).collect();
    colors.rotate_left(rng.random_range(0..cells));
    let partition = Partition::canonicalize(&colors);
    let class_types: Vec<usize> = {
        // classes were renumbered by canonicalization
        let mut relabeled = vec![0; classes];
        for (c, &raw) in colors.iter().enumerate() {
            relabeled[partition.color(c)] = class_types[raw];
        }
        relabeled
    };
    let cell_types: Vec<usize> = (0..cells).map(|c| class_types[partition.color(c)]).collect();
    let registry = random_registry(types, primary, rng);
    let members = partition.classes();
    let mut edges = Vec::new();
    for k in 0..classes {
        for (l, sources) in members.iter().enumerate() {
            if !rng.random_bool(0.45) {
                continue;
            }
            let spec = registry.get(class_types[k], class_types[l]).expect("registry covers all pairs");
            let q = random_weight(spec, rng);
            for &c in &members[k] {
                let d = *sources.choose(rng).expect("class is nonempty");
                edges.push((c, d, q.clone()));
            }
        }
    }
    (assemble(types, cell_types, registry, edges), partition)
}

/// `count` networks of 2 to `max_cells` cells cycling through the monoid
/// kinds; odd entries are lifted from a quotient.
pub fn corpus(seed: u64, count: usize, max_cells: usize) -> Vec<Network> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let kind = MonoidKind::ALL[i % MonoidKind::ALL.len()];
            let cells = rng.random_range(2..=max_cells);
            if i % 2 == 1 {
                lifted_network(&mut rng, cells, kind).0
            } else {
                random_network(&mut rng, cells, kind)
            }
        })
        .collect()
}

/// A uniformly drawn restricted-growth string refined by the type partition.
pub fn random_partition<R: Rng + ?Sized>(rng: &mut R, net: &Network) -> Partition {
    let mut class_types: Vec<usize> = Vec::new();
    let mut colors = Vec::with_capacity(net.cell_count());
    for c in 0..net.cell_count() {
        let ty = net.cell_type(c);
        let options: Vec<usize> = (0..class_types.len()).filter(|&k| class_types[k] == ty).collect();
        let pick = rng.random_range(0..=options.len());
        if pick == options.len() {
            colors.push(class_types.len());
            class_types.push(ty);
        } else {
            colors.push(options[pick]);
        }
    }
    Partition::canonicalize(&colors)
}
