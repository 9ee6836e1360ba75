//! Coupled cell networks: typed cells plus an in-adjacency matrix of monoid
//! elements, with JSON and GraphViz front-ends.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::monoid::{Conductance, MonoidElement, MonoidError, MonoidSpec};
use crate::partition::{Partition, PartitionError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("network must have ≥1 cell")]
    NoCells,
    #[error("duplicate cell id {0:?}")]
    DuplicateCell(String),
    #[error("unknown cell {0:?}")]
    UnknownCell(String),
    #[error("invalid cell id {0:?}: ids must be nonempty and may not contain ',' or ';'")]
    InvalidCellId(String),
    #[error("duplicate type name {0:?}")]
    DuplicateType(String),
    #[error("unknown cell type {0:?}")]
    UnknownType(String),
    #[error("no monoid declared for edges from type {source_type:?} into type {target_type:?}")]
    MissingMonoid { target_type: String, source_type: String },
    #[error("monoid for edges from type {source_type:?} into type {target_type:?} declared twice")]
    DuplicateMonoid { target_type: String, source_type: String },
    #[error("{context}: {source}")]
    Monoid { context: String, source: MonoidError },
    #[error("{location}: {message}")]
    Schema { location: String, message: String },
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// Monoid per ordered pair `(target type, source type)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MonoidRegistry {
    table: BTreeMap<(usize, usize), MonoidSpec>,
}

impl MonoidRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `spec` for every ordered pair of `type_count` types.
    pub fn uniform(type_count: usize, spec: MonoidSpec) -> Self {
        let mut registry = Self::new();
        for i in 0..type_count {
            for j in 0..type_count {
                registry.insert(i, j, spec.clone());
            }
        }
        registry
    }

    /// Returns the previous entry, if any.
    pub fn insert(&mut self, target_type: usize, source_type: usize, spec: MonoidSpec) -> Option<MonoidSpec> {
        self.table.insert((target_type, source_type), spec)
    }

    pub fn get(&self, target_type: usize, source_type: usize) -> Option<&MonoidSpec> {
        self.table.get(&(target_type, source_type))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &MonoidSpec)> {
        self.table.iter()
    }
}

/// Row `c` of the in-adjacency matrix, non-identity entries only.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    pub owner: usize,
    pub entries: &'a [(usize, MonoidElement)],
}

/// An immutable coupled cell network.
///
/// The matrix is stored by rows, each row holding the non-identity entries
/// `m_cd` sorted by source cell `d`; absent entries are the identity of the
/// pair's monoid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    type_names: Vec<String>,
    cell_ids: Vec<String>,
    cell_types: Vec<usize>,
    registry: MonoidRegistry,
    /// `registry` flattened to `target * |T| + source`, with identities.
    table: Vec<(MonoidSpec, MonoidElement)>,
    rows: Vec<Vec<(usize, MonoidElement)>>,
}

/// Incremental, id-based construction of a [`Network`].
#[derive(Debug, Clone, Default)]
pub struct NetworkBuilder {
    type_names: Vec<String>,
    cells: Vec<(String, String)>,
    monoids: Vec<(String, String, MonoidSpec)>,
    uniform: Option<MonoidSpec>,
    edges: Vec<(String, String, MonoidElement)>,
}

impl NetworkBuilder {
    pub fn new<S: Into<String>>(types: impl IntoIterator<Item = S>) -> Self {
        NetworkBuilder {
            type_names: types.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }

    pub fn cell(mut self, id: impl Into<String>, cell_type: impl Into<String>) -> Self {
        self.cells.push((id.into(), cell_type.into()));
        self
    }

    pub fn monoid(mut self, target_type: impl Into<String>, source_type: impl Into<String>, spec: MonoidSpec) -> Self {
        self.monoids.push((target_type.into(), source_type.into(), spec));
        self
    }

    /// Uses `spec` for every type pair not given explicitly.
    pub fn uniform_monoid(mut self, spec: MonoidSpec) -> Self {
        self.uniform = Some(spec);
        self
    }

    /// Adds an edge `from → to`; repeated pairs are combined in parallel.
    pub fn edge(mut self, to: impl Into<String>, from: impl Into<String>, weight: MonoidElement) -> Self {
        self.edges.push((to.into(), from.into(), weight));
        self
    }

    pub fn build(self) -> Result<Network, NetworkError> {
        let type_index = index_names(&self.type_names).map_err(NetworkError::DuplicateType)?;
        let lookup_type = |name: &str| {
            type_index
                .get(name)
                .copied()
                .ok_or_else(|| NetworkError::UnknownType(name.to_string()))
        };
        let mut registry = MonoidRegistry::new();
        for (target, source, spec) in self.monoids {
            let key = (lookup_type(&target)?, lookup_type(&source)?);
            if registry.insert(key.0, key.1, spec).is_some() {
                return Err(NetworkError::DuplicateMonoid { target_type: target, source_type: source });
            }
        }
        if let Some(spec) = self.uniform {
            for i in 0..self.type_names.len() {
                for j in 0..self.type_names.len() {
                    if registry.get(i, j).is_none() {
                        registry.insert(i, j, spec.clone());
                    }
                }
            }
        }
        let mut cell_ids = Vec::with_capacity(self.cells.len());
        let mut cell_types = Vec::with_capacity(self.cells.len());
        for (id, ty) in self.cells {
            cell_types.push(lookup_type(&ty)?);
            cell_ids.push(id);
        }
        let cell_index = index_names(&cell_ids).map_err(NetworkError::DuplicateCell)?;
        let lookup_cell = |id: &str| {
            cell_index
                .get(id)
                .copied()
                .ok_or_else(|| NetworkError::UnknownCell(id.to_string()))
        };
        let edges = self
            .edges
            .into_iter()
            .map(|(to, from, w)| Ok((lookup_cell(&to)?, lookup_cell(&from)?, w)))
            .collect::<Result<Vec<_>, NetworkError>>()?;
        Network::from_edges(self.type_names, cell_ids, cell_types, registry, edges)
    }
}

fn index_names(names: &[String]) -> Result<HashMap<&str, usize>, String> {
    let mut index = HashMap::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        if index.insert(name.as_str(), i).is_some() {
            return Err(name.clone());
        }
    }
    Ok(index)
}

impl Network {
    /// Builds from indexed edges `(target, source, weight)`, merging parallel
    /// edges with the pair's monoid.
    pub fn from_edges(
        type_names: Vec<String>,
        cell_ids: Vec<String>,
        cell_types: Vec<usize>,
        registry: MonoidRegistry,
        edges: Vec<(usize, usize, MonoidElement)>,
    ) -> Result<Network, NetworkError> {
        if cell_ids.is_empty() {
            return Err(NetworkError::NoCells);
        }
        assert_eq!(cell_ids.len(), cell_types.len(), "one type per cell");
        index_names(&type_names).map_err(NetworkError::DuplicateType)?;
        index_names(&cell_ids).map_err(NetworkError::DuplicateCell)?;
        if let Some(bad) = cell_ids
            .iter()
            .find(|id| id.is_empty() || id.contains(',') || id.contains(';'))
        {
            return Err(NetworkError::InvalidCellId(bad.clone()));
        }
        if let Some(&t) = cell_types.iter().find(|&&t| t >= type_names.len()) {
            return Err(NetworkError::UnknownType(format!("#{t}")));
        }
        for i in 0..type_names.len() {
            for j in 0..type_names.len() {
                if registry.get(i, j).is_none() {
                    return Err(NetworkError::MissingMonoid {
                        target_type: type_names[i].clone(),
                        source_type: type_names[j].clone(),
                    });
                }
            }
        }
        let n = cell_ids.len();
        let mut dense: Vec<BTreeMap<usize, MonoidElement>> = vec![BTreeMap::new(); n];
        for (to, from, weight) in edges {
            if to >= n || from >= n {
                return Err(NetworkError::UnknownCell(format!("#{}", to.max(from))));
            }
            let spec = registry
                .get(cell_types[to], cell_types[from])
                .expect("registry checked complete");
            let context = || format!("edge {} -> {}", cell_ids[from], cell_ids[to]);
            let merged = match dense[to].remove(&from) {
                None => {
                    if !spec.contains(&weight) {
                        // combine with identity to get the carrier error
                        spec.combine(&spec.identity(), &weight)
                            .map_err(|source| NetworkError::Monoid { context: context(), source })?;
                    }
                    weight
                }
                Some(prev) => spec
                    .combine(&prev, &weight)
                    .map_err(|source| NetworkError::Monoid { context: context(), source })?,
            };
            dense[to].insert(from, merged);
        }
        let rows = dense
            .into_iter()
            .enumerate()
            .map(|(to, row)| {
                row.into_iter()
                    .filter(|(from, w)| {
                        let spec = registry.get(cell_types[to], cell_types[*from]).expect("complete");
                        *w != spec.identity()
                    })
                    .collect()
            })
            .collect();
        let t = type_names.len();
        let table = (0..t * t)
            .map(|i| {
                let spec = registry.get(i / t, i % t).expect("complete").clone();
                let identity = spec.identity();
                (spec, identity)
            })
            .collect();
        Ok(Network { type_names, cell_ids, cell_types, registry, table, rows })
    }

    pub fn cell_count(&self) -> usize {
        self.cell_ids.len()
    }

    pub fn type_count(&self) -> usize {
        self.type_names.len()
    }

    pub fn cell_ids(&self) -> &[String] {
        &self.cell_ids
    }

    pub fn type_names(&self) -> &[String] {
        &self.type_names
    }

    pub fn cell_types(&self) -> &[usize] {
        &self.cell_types
    }

    pub fn cell_type(&self, cell: usize) -> usize {
        self.cell_types[cell]
    }

    pub fn cell_index(&self, id: &str) -> Option<usize> {
        self.cell_ids.iter().position(|c| c == id)
    }

    pub fn registry(&self) -> &MonoidRegistry {
        &self.registry
    }

    /// Monoid of edges from type `source_type` into type `target_type`.
    pub fn monoid(&self, target_type: usize, source_type: usize) -> &MonoidSpec {
        &self.table[target_type * self.type_names.len() + source_type].0
    }

    /// Identity of [`Network::monoid`].
    pub fn identity(&self, target_type: usize, source_type: usize) -> &MonoidElement {
        &self.table[target_type * self.type_names.len() + source_type].1
    }

    /// Monoid of the entry `m_cd`.
    pub fn monoid_for(&self, target: usize, source: usize) -> &MonoidSpec {
        self.monoid(self.cell_types[target], self.cell_types[source])
    }

    /// The cell type partition.
    pub fn type_partition(&self) -> Partition {
        Partition::canonicalize(&self.cell_types)
    }

    pub fn row(&self, cell: usize) -> RowView<'_> {
        RowView { owner: cell, entries: &self.rows[cell] }
    }

    /// `m_cd`, the identity when there is no edge.
    pub fn entry(&self, target: usize, source: usize) -> MonoidElement {
        match self.rows[target].binary_search_by_key(&source, |(d, _)| *d) {
            Ok(pos) => self.rows[target][pos].1.clone(),
            Err(_) => self.monoid_for(target, source).identity(),
        }
    }

    /// Number of non-identity matrix entries.
    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Cells `d` with `m_cd ≠ 0`.
    pub fn in_neighborhood(&self, cell: usize) -> Vec<usize> {
        self.rows[cell].iter().map(|(d, _)| *d).collect()
    }

    pub fn in_neighborhood_of(&self, id: &str) -> Result<Vec<&str>, NetworkError> {
        let cell = self
            .cell_index(id)
            .ok_or_else(|| NetworkError::UnknownCell(id.to_string()))?;
        Ok(self
            .in_neighborhood(cell)
            .into_iter()
            .map(|d| self.cell_ids[d].as_str())
            .collect())
    }

    /// Equal up to cell ids.
    pub fn same_structure(&self, other: &Network) -> bool {
        self.type_names == other.type_names
            && self.cell_types == other.cell_types
            && self.registry == other.registry
            && self.rows == other.rows
    }

    pub fn parse_partition(&self, text: &str) -> Result<Partition, PartitionError> {
        Partition::parse_with_ids(text, &self.cell_ids)
    }

    pub fn format_partition(&self, partition: &Partition) -> String {
        partition.format_with_ids(&self.cell_ids)
    }
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    types: Vec<String>,
    cells: Vec<CellEntry>,
    monoids: Vec<MonoidEntry>,
    #[serde(default)]
    edges: Vec<EdgeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellEntry {
    #[serde(deserialize_with = "id_string")]
    id: String,
    #[serde(rename = "type")]
    cell_type: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct MonoidEntry {
    target_type: String,
    source_type: String,
    #[serde(flatten)]
    monoid: MonoidSpec,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeEntry {
    #[serde(deserialize_with = "id_string")]
    to: String,
    #[serde(deserialize_with = "id_string")]
    from: String,
    weight: ElementRepr,
}

fn id_string<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        Text(String),
        Number(u64),
    }
    Ok(match Id::deserialize(d)? {
        Id::Text(s) => s,
        Id::Number(n) => n.to_string(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResistorRepr {
    r: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NaturalRepr {
    n: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MultisetRepr {
    gens: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TupleRepr {
    tuple: Vec<ElementRepr>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnihilatorRepr {
    annihilator: bool,
}

/// Tagged JSON form of a [`MonoidElement`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ElementRepr {
    Resistor(ResistorRepr),
    Natural(NaturalRepr),
    Multiset(MultisetRepr),
    Tuple(TupleRepr),
    Annihilator(AnnihilatorRepr),
}

impl ElementRepr {
    fn from_element(element: &MonoidElement) -> Self {
        match element {
            MonoidElement::Resistor(g) => ElementRepr::Resistor(ResistorRepr { r: g.to_string() }),
            MonoidElement::Natural(n) => ElementRepr::Natural(NaturalRepr { n: *n }),
            MonoidElement::Multiset(gens) => ElementRepr::Multiset(MultisetRepr { gens: gens.clone() }),
            MonoidElement::Tuple(parts) => ElementRepr::Tuple(TupleRepr {
                tuple: parts.iter().map(ElementRepr::from_element).collect(),
            }),
            MonoidElement::Annihilator => ElementRepr::Annihilator(AnnihilatorRepr { annihilator: true }),
        }
    }

    fn to_element(&self) -> Result<MonoidElement, String> {
        Ok(match self {
            ElementRepr::Resistor(r) => {
                MonoidElement::Resistor(Conductance::parse_ohms(&r.r).map_err(|e| e.to_string())?)
            }
            ElementRepr::Natural(n) => MonoidElement::Natural(n.n),
            ElementRepr::Multiset(m) => {
                MonoidElement::Multiset(m.gens.iter().filter(|(_, &c)| c > 0).map(|(k, &c)| (k.clone(), c)).collect())
            }
            ElementRepr::Tuple(t) => {
                MonoidElement::Tuple(t.tuple.iter().map(ElementRepr::to_element).collect::<Result<_, _>>()?)
            }
            ElementRepr::Annihilator(a) if a.annihilator => MonoidElement::Annihilator,
            ElementRepr::Annihilator(_) => return Err("\"annihilator\" must be true".into()),
        })
    }
}

/// Parses a network from its JSON form.
pub fn parse(text: &str) -> Result<Network, NetworkError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: NetworkFile = serde_path_to_error::deserialize(de).map_err(|err| {
        let inner = err.inner();
        NetworkError::Schema {
            location: format!("line {} column {} ({})", inner.line(), inner.column(), err.path()),
            message: inner.to_string(),
        }
    })?;
    from_file(file)
}

fn from_file(file: NetworkFile) -> Result<Network, NetworkError> {
    if file.cells.is_empty() {
        return Err(NetworkError::NoCells);
    }
    let mut builder = NetworkBuilder::new(file.types);
    for cell in file.cells {
        builder = builder.cell(cell.id, cell.cell_type);
    }
    for m in file.monoids {
        builder = builder.monoid(m.target_type, m.source_type, m.monoid);
    }
    for (i, edge) in file.edges.into_iter().enumerate() {
        let weight = edge.weight.to_element().map_err(|message| NetworkError::Schema {
            location: format!("edges[{i}].weight"),
            message,
        })?;
        builder = builder.edge(edge.to, edge.from, weight);
    }
    builder.build()
}

/// Serializes to the JSON form accepted by [`parse`]. Output is deterministic.
pub fn serialize(net: &Network) -> String {
    let mut monoids = Vec::new();
    for (&(i, j), spec) in net.registry.iter() {
        monoids.push(MonoidEntry {
            target_type: net.type_names[i].clone(),
            source_type: net.type_names[j].clone(),
            monoid: spec.clone(),
        });
    }
    let file = NetworkFile {
        types: net.type_names.clone(),
        cells: net
            .cell_ids
            .iter()
            .zip(&net.cell_types)
            .map(|(id, &t)| CellEntry { id: id.clone(), cell_type: net.type_names[t].clone() })
            .collect(),
        monoids,
        edges: net
            .rows
            .iter()
            .enumerate()
            .flat_map(|(to, row)| {
                row.iter().map(move |(from, w)| EdgeEntry {
                    to: net.cell_ids[to].clone(),
                    from: net.cell_ids[*from].clone(),
                    weight: ElementRepr::from_element(w),
                })
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("network serializes")
}

// ---------------------------------------------------------------------------
// GraphViz

const SHAPES: [&str; 8] = ["circle", "box", "diamond", "hexagon", "triangle", "pentagon", "octagon", "ellipse"];

fn dot_quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for ch in text.chars() {
        if ch == '"' || ch == '\\' {
            out.push('\\');
        }
        out.push(ch);
    }
    out.push('"');
    out
}

/// HSV fill color for class `k`; hues are spread by the golden angle.
fn class_color(k: usize) -> String {
    let hue = (k as f64 * 0.618_033_988_749_895).fract();
    format!("{hue:.3} 0.45 0.95")
}

/// GraphViz digraph of the network; nodes are shaped by type and, when a
/// coloring is given, filled by class.
pub fn to_dot(net: &Network, coloring: Option<&Partition>) -> Result<String, NetworkError> {
    if let Some(p) = coloring {
        if p.len() != net.cell_count() {
            return Err(PartitionError::SizeMismatch(net.cell_count(), p.len()).into());
        }
    }
    let mut out = String::from("digraph network {\n  node [style=filled];\n");
    for (c, id) in net.cell_ids.iter().enumerate() {
        let fill = match coloring {
            Some(p) => class_color(p.color(c)),
            None => "lightgray".to_string(),
        };
        let _ = writeln!(
            out,
            "  {} [shape={}, fillcolor={}];",
            dot_quote(id),
            SHAPES[net.cell_types[c] % SHAPES.len()],
            dot_quote(&fill)
        );
    }
    for (to, row) in net.rows.iter().enumerate() {
        for (from, w) in row {
            let _ = writeln!(
                out,
                "  {} -> {} [label={}];",
                dot_quote(&net.cell_ids[*from]),
                dot_quote(&net.cell_ids[to]),
                dot_quote(&w.to_string())
            );
        }
    }
    out.push_str("}\n");
    Ok(out)
}

/// Distinct fill colors used by [`to_dot`] for a coloring.
pub fn dot_fill_colors(dot: &str) -> HashSet<String> {
    dot.lines()
        .filter_map(|line| line.split("fillcolor=").nth(1))
        .map(|rest| rest.trim_end_matches("];").to_string())
        .collect()
}
