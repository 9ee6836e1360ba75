//! Admissible dynamics: oracle components, evaluation on a network,
//! simulation, quotient comparison and the non-balance witness.
//!
//! Evaluation never hands raw rows to an oracle. The state `x` induces a
//! partition `A_x` (same type and bitwise-equal state); each cell's row is
//! summed per color of `A_x` and the oracle sees the compressed neighborhood
//! `(w̄, x̄)` sorted by source type and state. Cells with equal compressed
//! neighborhoods therefore follow the same arithmetic, which makes discrete
//! flow-invariance of balanced polydiagonals exact.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use num_traits::ToPrimitive;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::{self, is_balanced, row_signature, sparse_rows, Balance, BalanceError, Counterexample, SparseRow};
use crate::monoid::{Conductance, MonoidElement, MonoidError, MonoidSpec};
use crate::network::Network;
use crate::par::Execution;
use crate::partition::{Partition, PartitionError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("state has {found} coordinates, network has {expected} cells")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite state at step {step} in cell {cell}")]
    NonFinite { step: usize, cell: String },
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("end time must be non-negative and finite, got {0}")]
    InvalidEndTime(f64),
    #[error("partition is balanced; no witness exists")]
    Balanced,
    #[error("oracle refers to unknown cell type {0:?}")]
    UnknownType(String),
    #[error("weight map {kappa} is undefined on {element}")]
    KappaUndefined { kappa: String, element: String },
    #[error("oracle accepts at most {max} inputs, got {got}")]
    TooManyInputs { max: usize, got: usize },
    #[error("invalid oracle spec at {location}: {message}")]
    Schema { location: String, message: String },
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error(transparent)]
    Monoid(#[from] MonoidError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// One compressed input: the parallel of all weights from cells of
/// `source_type` whose state is `state`.
#[derive(Debug, Clone, Copy)]
pub struct Input<'a> {
    pub source_type: &'a str,
    pub monoid: &'a MonoidSpec,
    pub weight: &'a MonoidElement,
    pub state: f64,
}

/// An oracle component `f̂_i(x; w, xs)` for every cell type `i`.
///
/// Implementations must be consistent: merging inputs with equal source type
/// and state into one input carrying the parallel of their weights, or
/// adding an input of identity weight, must not change the output.
/// [`oracle_consistency_check`] fuzzes both conditions.
pub trait Oracle: Sync {
    fn component(&self, target_type: &str, x: f64, inputs: &[Input<'_>]) -> Result<f64, DynamicsError>;
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn component(&self, target_type: &str, x: f64, inputs: &[Input<'_>]) -> Result<f64, DynamicsError> {
        (**self).component(target_type, x, inputs)
    }
}

/// Internal map `g_i`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InternalMap {
    #[default]
    Zero,
    /// `Σ coeffs[k] x^k`.
    Polynomial { coeffs: Vec<f64> },
    /// `amplitude · sin(frequency · x + phase)`.
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl InternalMap {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            InternalMap::Zero => 0.0,
            InternalMap::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            InternalMap::Sine { amplitude, frequency, phase } => amplitude * (frequency * x + phase).sin(),
        }
    }
}

fn one() -> f64 {
    1.0
}

/// Weight homomorphism `κ` from a monoid into `(ℝ, +)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kappa {
    /// Naturals under `+` map to themselves, naturals under `×` to their
    /// logarithm, resistors to their conductance, multisets to their size
    /// and tuples to the sum over components; all times `scale`.
    Canonical {
        #[serde(default = "one")]
        scale: f64,
    },
    /// Multisets map to `Σ count · weights[label]` (missing labels weigh 0);
    /// tuples sum over components.
    Generators { weights: BTreeMap<String, f64> },
    Zero,
}

impl Default for Kappa {
    fn default() -> Self {
        Kappa::Canonical { scale: 1.0 }
    }
}

impl Kappa {
    pub fn name(&self) -> &'static str {
        match self {
            Kappa::Canonical { .. } => "canonical",
            Kappa::Generators { .. } => "generators",
            Kappa::Zero => "zero",
        }
    }

    pub fn apply(&self, monoid: &MonoidSpec, w: &MonoidElement) -> Result<f64, DynamicsError> {
        match self {
            Kappa::Zero => Ok(0.0),
            Kappa::Canonical { scale } => Ok(scale * self.raw(monoid, w)?),
            Kappa::Generators { .. } => self.raw(monoid, w),
        }
    }

    fn undefined(&self, w: &MonoidElement) -> DynamicsError {
        DynamicsError::KappaUndefined { kappa: self.name().to_string(), element: w.to_string() }
    }

    fn raw(&self, monoid: &MonoidSpec, w: &MonoidElement) -> Result<f64, DynamicsError> {
        let canonical = matches!(self, Kappa::Canonical { .. });
        match (monoid, w) {
            (MonoidSpec::WithAnnihilator { .. }, MonoidElement::Annihilator) => Err(self.undefined(w)),
            (MonoidSpec::WithAnnihilator { inner }, _) => self.raw(inner, w),
            (MonoidSpec::Product { parts }, MonoidElement::Tuple(items)) if parts.len() == items.len() => {
                parts.iter().zip(items).map(|(p, x)| self.raw(p, x)).sum()
            }
            (MonoidSpec::NaturalAdd, MonoidElement::Natural(n)) if canonical => Ok(*n as f64),
            (MonoidSpec::NaturalMul, MonoidElement::Natural(n)) if canonical && *n > 0 => Ok((*n as f64).ln()),
            (MonoidSpec::ResistorParallel, MonoidElement::Resistor(Conductance::Finite(g))) if canonical => {
                g.to_f64().ok_or_else(|| self.undefined(w))
            }
            (MonoidSpec::FreeCommutative { .. }, MonoidElement::Multiset(counts)) => match self {
                Kappa::Generators { weights } => Ok(counts
                    .iter()
                    .map(|(label, n)| *n as f64 * weights.get(label).copied().unwrap_or(0.0))
                    .sum()),
                _ => Ok(counts.values().map(|n| *n as f64).sum()),
            },
            _ => Err(self.undefined(w)),
        }
    }

    /// Fuzzes `κ(0) = 0` and `κ(a ∥ b) = κ(a) + κ(b)` on sampled elements.
    /// Pairs on which `κ` is undefined are counted, not judged.
    pub fn additivity_check<R: Rng + ?Sized>(&self, monoid: &MonoidSpec, trials: usize, rng: &mut R) -> AdditivityReport {
        let mut report = AdditivityReport { trials, violations: 0, undefined: 0, identity_ok: false };
        report.identity_ok = matches!(self.apply(monoid, &monoid.identity()), Ok(v) if v == 0.0);
        for _ in 0..trials {
            let (a, b) = (monoid.sample(rng), monoid.sample(rng));
            let Ok(sum) = monoid.combine(&a, &b) else {
                report.undefined += 1;
                continue;
            };
            match (self.apply(monoid, &a), self.apply(monoid, &b), self.apply(monoid, &sum)) {
                (Ok(ka), Ok(kb), Ok(ks)) => {
                    if !close(ka + kb, ks, 1e-12) {
                        report.violations += 1;
                    }
                }
                _ => report.undefined += 1,
            }
        }
        report
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdditivityReport {
    pub trials: usize,
    pub violations: usize,
    pub undefined: usize,
    pub identity_ok: bool,
}

impl AdditivityReport {
    pub fn is_clean(&self) -> bool {
        self.identity_ok && self.violations == 0
    }
}

/// Coupling map `h(x, y)` of a cell in state `x` with a neighbor in state `y`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coupling {
    #[default]
    Neighbor,
    /// `y − x`.
    Diffusive,
    Linear {
        #[serde(rename = "self")]
        own: f64,
        neighbor: f64,
    },
    TanhNeighbor,
    Zero,
}

impl Coupling {
    pub fn apply(&self, x: f64, y: f64) -> f64 {
        match self {
            Coupling::Neighbor => y,
            Coupling::Diffusive => y - x,
            Coupling::Linear { own, neighbor } => own * x + neighbor * y,
            Coupling::TanhNeighbor => y.tanh(),
            Coupling::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairOverride {
    pub target: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Kappa>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Coupling>,
}

/// Oracle of the form `f̂_i(x; w, xs) = g_i(x) + Σ_k κ_ij(w_k) · h_ij(x, xs_k)`.
///
/// `internal`, `kappa` and `coupling` apply to every type unless overridden
/// per target type (`types`) or per `(target, source)` pair (`pairs`, first
/// match wins).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default)]
    pub internal: InternalMap,
    #[serde(default)]
    pub kappa: Kappa,
    #[serde(default)]
    pub coupling: Coupling,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub types: BTreeMap<String, InternalMap>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<PairOverride>,
}

impl OracleSpec {
    /// `f(x) = M x` in the natural-number case: `g = 0`, `κ` canonical,
    /// `h(x, y) = y`.
    pub fn adjacency() -> Self {
        OracleSpec::default()
    }

    /// `g(x) = a·x`, `κ = scale · canonical`, `h(x, y) = y − x`.
    pub fn linear_diffusive(a: f64, scale: f64) -> Self {
        OracleSpec {
            internal: InternalMap::Polynomial { coeffs: vec![0.0, a] },
            kappa: Kappa::Canonical { scale },
            coupling: Coupling::Diffusive,
            ..OracleSpec::default()
        }
    }

    pub fn parse(text: &str) -> Result<Self, DynamicsError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            DynamicsError::Schema {
                location: format!("line {} column {} ({})", inner.line(), inner.column(), e.path()),
                message: inner.to_string(),
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("oracle spec serializes")
    }

    /// Rejects overrides naming types the network does not have.
    pub fn validate_for(&self, net: &Network) -> Result<(), DynamicsError> {
        let known = |name: &String| net.type_names().contains(name);
        let names = self.types.keys().chain(self.pairs.iter().flat_map(|p| [&p.target, &p.source]));
        for name in names {
            if !known(name) {
                return Err(DynamicsError::UnknownType(name.clone()));
            }
        }
        Ok(())
    }

    fn internal_for(&self, target: &str) -> &InternalMap {
        self.types.get(target).unwrap_or(&self.internal)
    }

    fn pair_for(&self, target: &str, source: &str) -> (&Kappa, &Coupling) {
        match self.pairs.iter().find(|p| p.target == target && p.source == source) {
            Some(p) => (p.kappa.as_ref().unwrap_or(&self.kappa), p.coupling.as_ref().unwrap_or(&self.coupling)),
            None => (&self.kappa, &self.coupling),
        }
    }
}

impl Oracle for OracleSpec {
    fn component(&self, target_type: &str, x: f64, inputs: &[Input<'_>]) -> Result<f64, DynamicsError> {
        let mut out = self.internal_for(target_type).apply(x);
        for input in inputs {
            let (kappa, coupling) = self.pair_for(target_type, input.source_type);
            out += kappa.apply(input.monoid, input.weight)? * coupling.apply(x, input.state);
        }
        Ok(out)
    }
}

/// Two-input oracle over naturals with `p(n) = n − 1`:
/// `g(x) + p(w₁)x₁ + p(w₂)x₂ + p(w₁)p(w₂)·c(x₁, x₂)`.
///
/// With `c = x₁x₂` merging equal inputs demands `p(w₁∥w₂)` depend on the
/// state, so the form is not consistent. With `c = (x₁+x₂)/2` it demands
/// `p(w₁∥w₂) = p(w₁)+p(w₂)+p(w₁)p(w₂)`, which holds under `×`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseOracle {
    pub cross: CrossTerm,
    pub internal: InternalMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossTerm {
    Product,
    Mean,
}

impl PairwiseOracle {
    pub fn new(cross: CrossTerm) -> Self {
        PairwiseOracle { cross, internal: InternalMap::Zero }
    }

    fn p(w: &MonoidElement) -> Result<f64, DynamicsError> {
        match w {
            MonoidElement::Natural(n) => Ok(*n as f64 - 1.0),
            other => Err(DynamicsError::KappaUndefined { kappa: "n - 1".into(), element: other.to_string() }),
        }
    }
}

impl Oracle for PairwiseOracle {
    fn component(&self, _target_type: &str, x: f64, inputs: &[Input<'_>]) -> Result<f64, DynamicsError> {
        let g = self.internal.apply(x);
        match inputs {
            [] => Ok(g),
            [a] => Ok(g + Self::p(a.weight)? * a.state),
            [a, b] => {
                let (pa, pb) = (Self::p(a.weight)?, Self::p(b.weight)?);
                let cross = match self.cross {
                    CrossTerm::Product => a.state * b.state,
                    CrossTerm::Mean => (a.state + b.state) / 2.0,
                };
                Ok(g + pa * a.state + pb * b.state + pa * pb * cross)
            }
            _ => Err(DynamicsError::TooManyInputs { max: 2, got: inputs.len() }),
        }
    }
}

/// Outputs `on_match` for cells of `target_type` whose inputs from
/// `source_type` in state `target_state` sum to `signature`, `otherwise` for
/// every other cell.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorOracle {
    pub target_type: String,
    pub source_type: String,
    pub monoid: MonoidSpec,
    pub target_state: f64,
    pub signature: MonoidElement,
    pub on_match: f64,
    pub otherwise: f64,
}

impl Oracle for IndicatorOracle {
    fn component(&self, target_type: &str, _x: f64, inputs: &[Input<'_>]) -> Result<f64, DynamicsError> {
        if target_type != self.target_type {
            return Ok(self.otherwise);
        }
        let mut sum = self.monoid.identity();
        for input in inputs {
            if input.source_type == self.source_type && input.state.to_bits() == self.target_state.to_bits() {
                sum = self.monoid.combine(&sum, input.weight)?;
            }
        }
        Ok(if sum == self.signature { self.on_match } else { self.otherwise })
    }
}

/// Pointwise sum of two oracles.
pub struct SumOracle<'a>(pub &'a dyn Oracle, pub &'a dyn Oracle);

impl Oracle for SumOracle<'_> {
    fn component(&self, target_type: &str, x: f64, inputs: &[Input<'_>]) -> Result<f64, DynamicsError> {
        Ok(self.0.component(target_type, x, inputs)? + self.1.component(target_type, x, inputs)?)
    }
}

/// An oracle multiplied by a constant.
pub struct ScaledOracle<'a>(pub f64, pub &'a dyn Oracle);

impl Oracle for ScaledOracle<'_> {
    fn component(&self, target_type: &str, x: f64, inputs: &[Input<'_>]) -> Result<f64, DynamicsError> {
        Ok(self.0 * self.1.component(target_type, x, inputs)?)
    }
}

/// Groups cells by type and bitwise-equal state.
pub fn state_partition(net: &Network, x: &[f64]) -> Result<Partition, DynamicsError> {
    check_dimension(net, x)?;
    let keys: Vec<(usize, u64)> = (0..net.cell_count()).map(|c| (net.cell_type(c), x[c].to_bits())).collect();
    Ok(Partition::canonicalize(&keys))
}

fn check_dimension(net: &Network, x: &[f64]) -> Result<(), DynamicsError> {
    if x.len() != net.cell_count() {
        return Err(DynamicsError::DimensionMismatch { expected: net.cell_count(), found: x.len() });
    }
    Ok(())
}

struct CompressedRows {
    rows: Vec<SparseRow>,
    representative: Vec<usize>,
}

const CACHE_LIMIT: usize = 64;

/// Evaluates `f = F̂|_G` on states of one network, caching the compressed
/// rows per state partition.
pub struct Evaluator<'n> {
    net: &'n Network,
    cache: HashMap<Partition, Arc<CompressedRows>>,
}

impl<'n> Evaluator<'n> {
    pub fn new(net: &'n Network) -> Self {
        Evaluator { net, cache: HashMap::new() }
    }

    fn compressed(&mut self, partition: Partition) -> Result<Arc<CompressedRows>, DynamicsError> {
        if let Some(rows) = self.cache.get(&partition) {
            return Ok(Arc::clone(rows));
        }
        let rows = sparse_rows(self.net, &partition, Execution::Sequential)?;
        let representative = partition.classes().iter().map(|class| class[0]).collect();
        let entry = Arc::new(CompressedRows { rows, representative });
        if self.cache.len() >= CACHE_LIMIT {
            self.cache.clear();
        }
        self.cache.insert(partition, Arc::clone(&entry));
        Ok(entry)
    }

    pub fn eval(&mut self, oracle: &dyn Oracle, x: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        let net = self.net;
        let compressed = self.compressed(state_partition(net, x)?)?;
        let names = net.type_names();
        let mut out = Vec::with_capacity(x.len());
        let mut inputs = Vec::new();
        for (cell, row) in compressed.rows.iter().enumerate() {
            let target = net.cell_type(cell);
            inputs.clear();
            inputs.extend(row.iter().map(|(k, weight)| {
                let rep = compressed.representative[*k];
                let source = net.cell_type(rep);
                (
                    source,
                    Input { source_type: &names[source], monoid: net.monoid(target, source), weight, state: x[rep] },
                )
            }));
            inputs.sort_by(|(ta, a), (tb, b)| ta.cmp(tb).then(a.state.total_cmp(&b.state)));
            let view: Vec<Input<'_>> = inputs.iter().map(|(_, i)| *i).collect();
            out.push(oracle.component(&names[target], x[cell], &view)?);
        }
        Ok(out)
    }
}

/// `f_c(x) = f̂_{type(c)}(x_c; m_c, x)` for every cell.
pub fn admissible_eval(net: &Network, oracle: &dyn Oracle, x: &[f64]) -> Result<Vec<f64>, DynamicsError> {
    Evaluator::new(net).eval(oracle, x)
}

/// Bitwise test of `x ∈ Δ_A`.
pub fn is_synchronized(partition: &Partition, x: &[f64]) -> bool {
    let mut seen: Vec<Option<u64>> = vec![None; partition.rank()];
    x.iter().zip(partition.colors()).all(|(v, &k)| match seen[k] {
        Some(bits) => bits == v.to_bits(),
        None => {
            seen[k] = Some(v.to_bits());
            true
        }
    })
}

/// States at uniformly spaced times; `times[i]` is the step index for maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub continuous: bool,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// First index whose state leaves `Δ_A` (bitwise).
    pub fn first_desync(&self, partition: &Partition) -> Option<usize> {
        self.states.iter().position(|x| !is_synchronized(partition, x))
    }

    /// `t` (or `n`) followed by one column per cell id.
    pub fn to_csv<S: AsRef<str>>(&self, ids: &[S]) -> String {
        let mut out = String::from(if self.continuous { "t" } else { "n" });
        for id in ids {
            out.push(',');
            out.push_str(id.as_ref());
        }
        out.push('\n');
        for (i, (t, x)) in self.times.iter().zip(&self.states).enumerate() {
            if self.continuous {
                let _ = write!(out, "{t}");
            } else {
                let _ = write!(out, "{i}");
            }
            for v in x {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn check_finite(net: &Network, x: &[f64], step: usize) -> Result<(), DynamicsError> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(c) => Err(DynamicsError::NonFinite { step, cell: net.cell_ids()[c].clone() }),
        None => Ok(()),
    }
}

/// `x_{n+1} = f(x_n)` for `steps` steps; `steps + 1` states.
pub fn simulate_map(net: &Network, oracle: &dyn Oracle, x0: &[f64], steps: usize) -> Result<Trajectory, DynamicsError> {
    check_dimension(net, x0)?;
    check_finite(net, x0, 0)?;
    let mut eval = Evaluator::new(net);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    for step in 1..=steps {
        let next = eval.eval(oracle, states.last().expect("nonempty"))?;
        check_finite(net, &next, step)?;
        states.push(next);
    }
    Ok(Trajectory { continuous: false, times: (0..=steps).map(|n| n as f64).collect(), states })
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect()
}

/// `ẋ = f(x)` by classical RK4 with step `dt` up to `t_end` (rounded to a
/// whole number of steps).
pub fn simulate_ode(
    net: &Network,
    oracle: &dyn Oracle,
    x0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, DynamicsError> {
    check_dimension(net, x0)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(DynamicsError::InvalidEndTime(t_end));
    }
    check_finite(net, x0, 0)?;
    let steps = (t_end / dt).round() as usize;
    let mut eval = Evaluator::new(net);
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    for step in 1..=steps {
        let x = states.last().expect("nonempty");
        let k1 = eval.eval(oracle, x)?;
        let k2 = eval.eval(oracle, &axpy(x, dt / 2.0, &k1))?;
        let k3 = eval.eval(oracle, &axpy(x, dt / 2.0, &k2))?;
        let k4 = eval.eval(oracle, &axpy(x, dt, &k3))?;
        let next: Vec<f64> = (0..x.len())
            .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        check_finite(net, &next, step)?;
        states.push(next);
    }
    Ok(Trajectory { continuous: true, times: (0..=steps).map(|i| i as f64 * dt).collect(), states })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Steps(usize),
    Ode { t_end: f64, dt: f64 },
}

fn simulate(net: &Network, oracle: &dyn Oracle, x0: &[f64], horizon: Horizon) -> Result<Trajectory, DynamicsError> {
    match horizon {
        Horizon::Steps(n) => simulate_map(net, oracle, x0, n),
        Horizon::Ode { t_end, dt } => simulate_ode(net, oracle, x0, t_end, dt),
    }
}

/// Runs the full system from `lift(x̄₀)` and the quotient system from `x̄₀`;
/// returns `max_t ‖x(t) − lift(x̄(t))‖∞`.
pub fn quotient_match(
    net: &Network,
    partition: &Partition,
    oracle: &dyn Oracle,
    reduced0: &[f64],
    horizon: Horizon,
) -> Result<f64, DynamicsError> {
    let q = balance::quotient(net, partition)?;
    let full = simulate(net, oracle, &partition.lift(reduced0)?, horizon)?;
    let reduced = simulate(&q.quotient, oracle, reduced0, horizon)?;
    let mut worst: f64 = 0.0;
    for (x, xbar) in full.states.iter().zip(&reduced.states) {
        let lifted = partition.lift(xbar)?;
        for (a, b) in x.iter().zip(&lifted) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// A state on `Δ_A` whose image under an admissible map leaves `Δ_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub counterexample: Counterexample,
    pub oracle: IndicatorOracle,
    pub state: Vec<f64>,
    pub output: Vec<f64>,
}

impl Witness {
    /// `x ∈ Δ_A` and `f(x) ∉ Δ_A`, re-evaluated from scratch.
    pub fn verify(&self, net: &Network, partition: &Partition) -> Result<bool, DynamicsError> {
        let output = admissible_eval(net, &self.oracle, &self.state)?;
        Ok(is_synchronized(partition, &self.state) && !is_synchronized(partition, &output))
    }
}

/// Builds the indicator oracle for a counterexample `(c, d, k)`: color `j`
/// gets state `j`, and `f̂` fires iff the inputs in state `k` sum to
/// `[m_c P]_k`, which `d` does not match.
pub fn unbalance_witness(net: &Network, partition: &Partition) -> Result<Witness, DynamicsError> {
    let cx = match is_balanced(net, partition)? {
        Balance::Balanced => return Err(DynamicsError::Balanced),
        Balance::Unbalanced(cx) => cx,
    };
    let reduced: Vec<f64> = (0..partition.rank()).map(|j| j as f64).collect();
    let state = partition.lift(&reduced)?;
    let target = net.cell_type(cx.first);
    let source_cell = partition.colors().iter().position(|&k| k == cx.color).expect("color is used");
    let source = net.cell_type(source_cell);
    let signature = row_signature(net, partition, cx.first)?.sums[cx.color].clone();
    let oracle = IndicatorOracle {
        target_type: net.type_names()[target].clone(),
        source_type: net.type_names()[source].clone(),
        monoid: net.monoid(target, source).clone(),
        target_state: cx.color as f64,
        signature,
        on_match: 1.0,
        otherwise: 0.0,
    };
    let output = admissible_eval(net, &oracle, &state)?;
    Ok(Witness { counterexample: cx, oracle, state, output })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub trials: usize,
    /// Trials skipped because the oracle is undefined on the neighborhood.
    pub undefined: usize,
    pub merge_violations: usize,
    pub deletion_violations: usize,
    pub max_deviation: f64,
}

impl ConsistencyReport {
    pub fn is_clean(&self) -> bool {
        self.merge_violations == 0 && self.deletion_violations == 0
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

struct RawInput {
    source: usize,
    weight: MonoidElement,
    state: f64,
}

/// Fuzzes the consistency conditions on random neighborhoods drawn from the
/// types and monoids of `net`: merging inputs of equal type and state, and
/// inserting an identity-weight input. Neighborhoods have at most
/// `max_inputs` entries; states come from a pool of two values per trial so
/// merges are frequent.
pub fn oracle_consistency_check<R: Rng + ?Sized>(
    oracle: &dyn Oracle,
    net: &Network,
    trials: usize,
    max_inputs: usize,
    rng: &mut R,
) -> ConsistencyReport {
    let mut report =
        ConsistencyReport { trials, undefined: 0, merge_violations: 0, deletion_violations: 0, max_deviation: 0.0 };
    let names = net.type_names();
    let tol = 1e-9;
    for _ in 0..trials {
        let target = rng.random_range(0..net.type_count());
        let x: f64 = rng.random_range(-2.0..2.0);
        let pool: [f64; 2] = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let k = rng.random_range(1..=max_inputs.max(1));
        let raw: Vec<RawInput> = (0..k)
            .map(|_| {
                let source = rng.random_range(0..net.type_count());
                let weight = net.monoid(target, source).sample(rng);
                RawInput { source, weight, state: pool[rng.random_range(0..2)] }
            })
            .collect();
        let view = |items: &[RawInput]| -> Vec<(usize, f64, MonoidElement)> {
            items.iter().map(|r| (r.source, r.state, r.weight.clone())).collect()
        };
        let eval = |items: &[(usize, f64, MonoidElement)]| -> Result<f64, DynamicsError> {
            let inputs: Vec<Input<'_>> = items
                .iter()
                .map(|(s, state, w)| Input {
                    source_type: &names[*s],
                    monoid: net.monoid(target, *s),
                    weight: w,
                    state: *state,
                })
                .collect();
            oracle.component(&names[target], x, &inputs)
        };

        let plain = view(&raw);
        let mut merged: Vec<(usize, f64, MonoidElement)> = Vec::new();
        let mut merge_failed = false;
        for (s, state, w) in &plain {
            match merged.iter_mut().find(|(ms, mstate, _)| ms == s && mstate.to_bits() == state.to_bits()) {
                Some(slot) => match net.monoid(target, *s).combine(&slot.2, w) {
                    Ok(sum) => slot.2 = sum,
                    Err(_) => merge_failed = true,
                },
                None => merged.push((*s, *state, w.clone())),
            }
        }
        let padded = (plain.len() < max_inputs).then(|| {
            let source = rng.random_range(0..net.type_count());
            let ghost = (source, pool[rng.random_range(0..2)], net.monoid(target, source).identity());
            let mut padded = plain.clone();
            padded.insert(rng.random_range(0..=padded.len()), ghost);
            padded
        });

        let base = match eval(&plain) {
            Ok(v) => v,
            Err(_) => {
                report.undefined += 1;
                continue;
            }
        };
        if merge_failed {
            report.undefined += 1;
            continue;
        }
        match eval(&merged) {
            Ok(v) => {
                report.max_deviation = report.max_deviation.max((v - base).abs());
                if !close(v, base, tol) {
                    report.merge_violations += 1;
                }
            }
            Err(_) => report.undefined += 1,
        }
        if let Some(padded) = padded {
            if let Ok(v) = eval(&padded) {
                report.max_deviation = report.max_deviation.max((v - base).abs());
                if !close(v, base, tol) {
                    report.deletion_violations += 1;
                }
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearityReport {
    pub samples: usize,
    pub max_additivity_error: f64,
    pub max_homogeneity_error: f64,
}

impl LinearityReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_additivity_error <= tol && self.max_homogeneity_error <= tol
    }
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / 1f64.max(x.abs()).max(y.abs())).fold(0.0, f64::max)
}

/// Checks that `o ↦ F̂|_G` is linear: the restriction of a sum is the sum of
/// restrictions, and scaling commutes with restriction (including by 0).
pub fn linearity_check<R: Rng + ?Sized>(
    net: &Network,
    a: &dyn Oracle,
    b: &dyn Oracle,
    samples: usize,
    rng: &mut R,
) -> Result<LinearityReport, DynamicsError> {
    let mut report = LinearityReport { samples, max_additivity_error: 0.0, max_homogeneity_error: 0.0 };
    let mut eval = Evaluator::new(net);
    for i in 0..samples {
        let x: Vec<f64> = (0..net.cell_count()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let fa = eval.eval(a, &x)?;
        let fb = eval.eval(b, &x)?;
        let fsum = eval.eval(&SumOracle(a, b), &x)?;
        let pointwise: Vec<f64> = fa.iter().zip(&fb).map(|(u, v)| u + v).collect();
        report.max_additivity_error = report.max_additivity_error.max(relative_error(&fsum, &pointwise));

        let alpha = if i % 4 == 0 { 0.0 } else { rng.random_range(-3.0..3.0) };
        let scaled = eval.eval(&ScaledOracle(alpha, a), &x)?;
        let expected: Vec<f64> = fa.iter().map(|u| alpha * u).collect();
        report.max_homogeneity_error = report.max_homogeneity_error.max(relative_error(&scaled, &expected));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::network::NetworkBuilder;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(raw: &[usize]) -> Partition {
        Partition::canonicalize(raw)
    }

    fn single_type(spec: MonoidSpec) -> Network {
        NetworkBuilder::new(["a"]).cell("1", "a").uniform_monoid(spec).build().unwrap()
    }

    #[test]
    fn adjacency_oracle_is_matrix_product() {
        let net = fixtures::three_cell();
        let x = [0.5, -1.25, 2.0];
        let f = admissible_eval(&net, &OracleSpec::adjacency(), &x).unwrap();
        assert_eq!(f, vec![0.5 + 2.0, 0.5 + 2.0, 0.5 - 1.25 + 2.0]);
    }

    #[test]
    fn identity_weights_leave_internal_dynamics() {
        let net = NetworkBuilder::new(["a"])
            .cell("1", "a")
            .cell("2", "a")
            .uniform_monoid(MonoidSpec::NaturalAdd)
            .edge("1", "2", MonoidElement::Natural(0))
            .build()
            .unwrap();
        let oracle = OracleSpec { internal: InternalMap::Polynomial { coeffs: vec![1.0, 0.0, 3.0] }, ..OracleSpec::default() };
        assert_eq!(admissible_eval(&net, &oracle, &[2.0, 5.0]).unwrap(), vec![13.0, 76.0]);
    }

    #[test]
    fn resistor_conductance_oracle() {
        let net = fixtures::resistor_six();
        let oracle = OracleSpec { coupling: Coupling::Diffusive, ..OracleSpec::default() };
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let f = admissible_eval(&net, &oracle, &x).unwrap();
        // cell 5 receives 30 Ω from cells 1 and 5
        assert!((f[4] - (1.0 - 5.0) / 30.0).abs() < 1e-15);
        // cell 1 receives from 1, 2, 3
        assert!((f[0] - ((2.0 - 1.0) + (3.0 - 1.0)) / 30.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_is_checked() {
        let net = fixtures::three_cell();
        assert_eq!(
            admissible_eval(&net, &OracleSpec::adjacency(), &[1.0]),
            Err(DynamicsError::DimensionMismatch { expected: 3, found: 1 })
        );
    }

    #[test]
    fn zero_oracle_is_constant() {
        let net = fixtures::resistor_six();
        let oracle = OracleSpec { kappa: Kappa::Zero, ..OracleSpec::default() };
        let x0 = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let traj = simulate_map(&net, &oracle, &x0, 5).unwrap();
        assert_eq!(traj.len(), 6);
        assert!(traj.states[1..].iter().all(|x| x.iter().all(|v| *v == 0.0)));
        let oracle = OracleSpec { coupling: Coupling::Zero, ..OracleSpec::default() };
        let ode = simulate_ode(&net, &oracle, &x0, 1.0, 0.25).unwrap();
        assert_eq!(ode.times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(ode.states.iter().all(|x| x == &x0));
    }

    #[test]
    fn one_map_step_is_evaluation() {
        let net = fixtures::three_cell();
        let x0 = [0.3, 0.1, -0.7];
        let traj = simulate_map(&net, &OracleSpec::adjacency(), &x0, 1).unwrap();
        assert_eq!(traj.states[1], admissible_eval(&net, &OracleSpec::adjacency(), &x0).unwrap());
    }

    #[test]
    fn discrete_synchrony_is_exact() {
        let net = fixtures::three_cell();
        let sync = p(&[1, 1, 2]);
        let oracle = OracleSpec {
            internal: InternalMap::Sine { amplitude: 0.7, frequency: 1.3, phase: 0.1 },
            coupling: Coupling::TanhNeighbor,
            kappa: Kappa::Canonical { scale: 0.3 },
            ..OracleSpec::default()
        };
        let traj = simulate_map(&net, &oracle, &[0.123, 0.123, -0.4], 200).unwrap();
        assert_eq!(traj.first_desync(&sync), None);
    }

    #[test]
    fn non_finite_states_abort() {
        let net = fixtures::all_to_all(3);
        let err = simulate_map(&net, &OracleSpec::adjacency(), &[1e308, 1e308, 1e308], 10).unwrap_err();
        assert_eq!(err, DynamicsError::NonFinite { step: 1, cell: "1".into() });
        assert_eq!(
            simulate_ode(&net, &OracleSpec::adjacency(), &[0.0; 3], 1.0, 0.0),
            Err(DynamicsError::InvalidStep(0.0))
        );
    }

    #[test]
    fn quotient_trajectories_match() {
        let net = fixtures::three_cell();
        let part = p(&[1, 1, 2]);
        let oracle = OracleSpec::linear_diffusive(-0.5, 0.5);
        let d = quotient_match(&net, &part, &oracle, &[0.3, -0.2], Horizon::Steps(50)).unwrap();
        assert_eq!(d, 0.0);
        let d = quotient_match(&net, &part, &oracle, &[0.3, -0.2], Horizon::Ode { t_end: 10.0, dt: 1e-3 }).unwrap();
        assert!(d <= 1e-8, "deviation {d}");
        let trivial = Partition::trivial(3);
        let d = quotient_match(&net, &trivial, &oracle, &[0.3, -0.2, 0.9], Horizon::Steps(20)).unwrap();
        assert_eq!(d, 0.0);
        assert!(matches!(
            quotient_match(&fixtures::chain(), &p(&[1, 2, 2]), &oracle, &[0.0, 1.0], Horizon::Steps(1)),
            Err(DynamicsError::Balance(BalanceError::NotBalanced(_)))
        ));
    }

    #[test]
    fn chain_witness() {
        let net = fixtures::chain();
        let a = p(&[1, 2, 2]);
        let w = unbalance_witness(&net, &a).unwrap();
        assert_eq!((w.counterexample.first, w.counterexample.second), (1, 2));
        assert!(is_synchronized(&a, &w.state));
        assert_ne!(w.output[1], w.output[2]);
        assert!(w.verify(&net, &a).unwrap());
        assert_eq!(unbalance_witness(&net, &Partition::trivial(3)), Err(DynamicsError::Balanced));
        assert_eq!(DynamicsError::Balanced.to_string(), "partition is balanced; no witness exists");
    }

    #[test]
    fn resistor_witness_splits_five_and_six() {
        let net = fixtures::resistor_six();
        let a = p(&[1, 2, 3, 4, 5, 5]);
        let w = unbalance_witness(&net, &a).unwrap();
        assert_eq!((w.counterexample.first, w.counterexample.second), (4, 5));
        assert!(w.verify(&net, &a).unwrap());
    }

    #[test]
    fn linear_oracle_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = fixtures::resistor_six();
        let report = oracle_consistency_check(&OracleSpec::linear_diffusive(0.3, 2.0), &net, 2000, 5, &mut rng);
        assert!(report.is_clean(), "{report:?}");
        assert!(report.undefined < report.trials);
    }

    #[test]
    fn cubic_form_is_inconsistent_and_mean_form_is_not() {
        let net = single_type(MonoidSpec::NaturalMul);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cubic = oracle_consistency_check(&PairwiseOracle::new(CrossTerm::Product), &net, 2000, 2, &mut rng);
        assert!(cubic.merge_violations > 0, "{cubic:?}");
        let mean = oracle_consistency_check(&PairwiseOracle::new(CrossTerm::Mean), &net, 2000, 2, &mut rng);
        assert!(mean.is_clean(), "{mean:?}");
    }

    #[test]
    fn kappa_is_additive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let specs = [
            MonoidSpec::NaturalAdd,
            MonoidSpec::ResistorParallel,
            MonoidSpec::free(["a", "b"]),
            crate::monoid::product_monoid(vec![MonoidSpec::NaturalAdd, MonoidSpec::ResistorParallel]),
        ];
        for spec in &specs {
            let report = Kappa::default().additivity_check(spec, 1000, &mut rng);
            assert!(report.is_clean(), "{spec:?}: {report:?}");
        }
        let weights = BTreeMap::from([("a".to_string(), 0.5), ("b".to_string(), -2.0)]);
        let report = Kappa::Generators { weights }.additivity_check(&specs[2], 1000, &mut rng);
        assert!(report.is_clean());
    }

    #[test]
    fn linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = fixtures::three_cell();
        let a = OracleSpec::linear_diffusive(0.2, 1.0);
        let b = OracleSpec::adjacency();
        assert!(linearity_check(&net, &a, &b, 200, &mut rng).unwrap().passes(1e-12));
        let c = OracleSpec {
            internal: InternalMap::Sine { amplitude: 1.0, frequency: 2.0, phase: 0.0 },
            coupling: Coupling::TanhNeighbor,
            ..OracleSpec::default()
        };
        let d = OracleSpec { internal: InternalMap::Polynomial { coeffs: vec![0.1, 0.0, 0.0, 1.0] }, ..OracleSpec::default() };
        assert!(linearity_check(&net, &c, &d, 200, &mut rng).unwrap().passes(1e-12));
        let zero = admissible_eval(&net, &ScaledOracle(0.0, &c), &[0.1, 0.2, 0.3]).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn spec_json_round_trip() {
        let text = r#"{
            "internal": {"kind": "polynomial", "coeffs": [0, -0.5]},
            "kappa": {"kind": "canonical", "scale": 2},
            "coupling": {"kind": "linear", "self": -1, "neighbor": 1},
            "pairs": [{"target": "a", "source": "b", "coupling": {"kind": "tanh_neighbor"}}]
        }"#;
        let spec = OracleSpec::parse(text).unwrap();
        assert_eq!(spec.kappa, Kappa::Canonical { scale: 2.0 });
        assert_eq!(OracleSpec::parse(&spec.to_json()).unwrap(), spec);
        assert_eq!(spec.validate_for(&fixtures::resistor_six()), Ok(()));
        assert_eq!(spec.validate_for(&fixtures::chain()), Err(DynamicsError::UnknownType("a".into())));
        assert!(matches!(OracleSpec::parse(r#"{"kapa": {}}"#), Err(DynamicsError::Schema { .. })));
    }

    #[test]
    fn trajectory_csv() {
        let net = fixtures::chain();
        let traj = simulate_map(&net, &OracleSpec::adjacency(), &[1.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(traj.to_csv(net.cell_ids()), "n,1,2,3\n0,1,0,0\n1,0,1,0\n2,0,0,1\n");
    }
}
