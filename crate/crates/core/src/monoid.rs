//! Commutative monoids used as edge-weight algebras.
//!
//! Every shipped monoid has exact, decidable equality. Resistors are kept as
//! rational conductances so that parallel composition is plain addition.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonoidError {
    #[error("element {element} is not in the carrier of {monoid}")]
    NotInCarrier { element: String, monoid: String },
    #[error("natural number overflow while combining {0} and {1}")]
    Overflow(u64, u64),
    #[error("invalid resistance {0:?}")]
    InvalidResistance(String),
}

/// Conductance of a resistor, `1/R`.
///
/// `Finite(0)` is an open circuit (`R = ∞`, the identity of parallel
/// composition) and `Infinite` is a short circuit (`R = 0`, the annihilator).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Conductance {
    Finite(BigRational),
    Infinite,
}

impl Conductance {
    pub fn open() -> Self {
        Conductance::Finite(BigRational::zero())
    }

    /// Conductance of a resistor of `ohms` (which must be nonnegative).
    pub fn from_ohms(ohms: BigRational) -> Result<Self, MonoidError> {
        if ohms.is_negative() {
            return Err(MonoidError::InvalidResistance(ohms.to_string()));
        }
        if ohms.is_zero() {
            Ok(Conductance::Infinite)
        } else {
            Ok(Conductance::Finite(ohms.recip()))
        }
    }

    pub fn from_ohms_int(ohms: i64) -> Result<Self, MonoidError> {
        Self::from_ohms(BigRational::from_integer(BigInt::from(ohms)))
    }

    /// Parses a resistance written as `"inf"`, an integer, `"p/q"` or a
    /// finite decimal such as `"7.5"`.
    pub fn parse_ohms(text: &str) -> Result<Self, MonoidError> {
        let t = text.trim();
        if t.eq_ignore_ascii_case("inf") || t == "∞" {
            return Ok(Self::open());
        }
        let bad = || MonoidError::InvalidResistance(text.to_string());
        let value = if let Some((num, den)) = t.split_once('/') {
            let num: BigInt = num.trim().parse().map_err(|_| bad())?;
            let den: BigInt = den.trim().parse().map_err(|_| bad())?;
            if den.is_zero() {
                return Err(bad());
            }
            BigRational::new(num, den)
        } else if let Some((int, frac)) = t.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
            let scale = num_traits::pow(BigInt::from(10), frac.len());
            BigRational::new(digits, scale)
        } else {
            BigRational::from_integer(t.parse().map_err(|_| bad())?)
        };
        Self::from_ohms(value)
    }

    /// Resistance in ohms, `None` for an open circuit.
    pub fn ohms(&self) -> Option<BigRational> {
        match self {
            Conductance::Finite(g) if g.is_zero() => None,
            Conductance::Finite(g) => Some(g.recip()),
            Conductance::Infinite => Some(BigRational::zero()),
        }
    }

    fn parallel(&self, other: &Self) -> Self {
        match (self, other) {
            (Conductance::Finite(a), Conductance::Finite(b)) => Conductance::Finite(a + b),
            _ => Conductance::Infinite,
        }
    }
}

impl fmt::Display for Conductance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.ohms() {
            None => f.write_str("inf"),
            Some(r) => write!(f, "{r}"),
        }
    }
}

/// A value of one of the shipped monoids.
///
/// Which monoid an element belongs to is decided by [`MonoidSpec::contains`];
/// `Natural` is shared by the additive and multiplicative naturals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MonoidElement {
    Resistor(Conductance),
    Natural(u64),
    /// Multiset of generator labels with multiplicities, zero counts never stored.
    Multiset(BTreeMap<String, u64>),
    Tuple(Vec<MonoidElement>),
    /// The adjoined absorbing element of [`MonoidSpec::WithAnnihilator`].
    Annihilator,
}

impl MonoidElement {
    pub fn ohms(ohms: i64) -> Self {
        MonoidElement::Resistor(Conductance::from_ohms_int(ohms).expect("nonnegative resistance"))
    }

    pub fn open_circuit() -> Self {
        MonoidElement::Resistor(Conductance::open())
    }

    pub fn multiset<'a>(labels: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts = BTreeMap::new();
        for label in labels {
            *counts.entry(label.to_string()).or_insert(0) += 1;
        }
        MonoidElement::Multiset(counts)
    }

    /// Appends an injective, self-delimiting byte encoding of the element.
    ///
    /// Used as hash-table key material: two elements of the same monoid get
    /// the same bytes iff they are equal.
    pub fn encode_canonical(&self, out: &mut Vec<u8>) {
        fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
            out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
            out.extend_from_slice(bytes);
        }
        match self {
            MonoidElement::Resistor(Conductance::Finite(g)) => {
                out.push(0);
                put_bytes(out, &g.numer().to_signed_bytes_le());
                put_bytes(out, &g.denom().to_signed_bytes_le());
            }
            MonoidElement::Resistor(Conductance::Infinite) => out.push(1),
            MonoidElement::Natural(n) => {
                out.push(2);
                out.extend_from_slice(&n.to_le_bytes());
            }
            MonoidElement::Multiset(counts) => {
                out.push(3);
                out.extend_from_slice(&(counts.len() as u32).to_le_bytes());
                for (label, count) in counts {
                    put_bytes(out, label.as_bytes());
                    out.extend_from_slice(&count.to_le_bytes());
                }
            }
            MonoidElement::Tuple(parts) => {
                out.push(4);
                out.extend_from_slice(&(parts.len() as u32).to_le_bytes());
                for part in parts {
                    part.encode_canonical(out);
                }
            }
            MonoidElement::Annihilator => out.push(5),
        }
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_canonical(&mut out);
        out
    }
}

impl fmt::Display for MonoidElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MonoidElement::Resistor(g) => write!(f, "{g}"),
            MonoidElement::Natural(n) => write!(f, "{n}"),
            MonoidElement::Multiset(counts) => {
                f.write_str("{")?;
                for (i, (label, count)) in counts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    if *count == 1 {
                        write!(f, "{label}")?;
                    } else {
                        write!(f, "{label}^{count}")?;
                    }
                }
                f.write_str("}")
            }
            MonoidElement::Tuple(parts) => {
                f.write_str("(")?;
                for (i, part) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{part}")?;
                }
                f.write_str(")")
            }
            MonoidElement::Annihilator => f.write_str("absorb"),
        }
    }
}

/// A computable commutative monoid.
///
/// Implemented by [`MonoidSpec`]; the trait exists so that [`law_check`] can
/// also be pointed at hand-written (possibly broken) operations.
pub trait CommutativeMonoid {
    type Element: Clone + PartialEq + fmt::Debug;

    fn identity(&self) -> Self::Element;
    fn combine(&self, a: &Self::Element, b: &Self::Element) -> Result<Self::Element, MonoidError>;
}

/// The shipped monoid kinds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonoidSpec {
    /// Resistors in parallel, identity `∞`, annihilator `0`.
    ResistorParallel,
    /// `(ℕ₀, +)`, the unweighted multigraph case.
    NaturalAdd,
    /// `(ℕ₀, ·)`, identity `1`, annihilator `0`.
    NaturalMul,
    /// Free commutative monoid (finite multisets) over the given generators.
    FreeCommutative { generators: BTreeSet<String> },
    /// Direct product, combined componentwise.
    Product { parts: Vec<MonoidSpec> },
    /// `inner` with a fresh absorbing element adjoined.
    WithAnnihilator { inner: Box<MonoidSpec> },
}

impl MonoidSpec {
    pub fn free<'a>(generators: impl IntoIterator<Item = &'a str>) -> Self {
        MonoidSpec::FreeCommutative {
            generators: generators.into_iter().map(str::to_string).collect(),
        }
    }

    pub fn identity(&self) -> MonoidElement {
        match self {
            MonoidSpec::ResistorParallel => MonoidElement::open_circuit(),
            MonoidSpec::NaturalAdd => MonoidElement::Natural(0),
            MonoidSpec::NaturalMul => MonoidElement::Natural(1),
            MonoidSpec::FreeCommutative { .. } => MonoidElement::Multiset(BTreeMap::new()),
            MonoidSpec::Product { parts } => {
                MonoidElement::Tuple(parts.iter().map(MonoidSpec::identity).collect())
            }
            MonoidSpec::WithAnnihilator { inner } => inner.identity(),
        }
    }

    /// The absorbing element, if the monoid has one.
    pub fn annihilator(&self) -> Option<MonoidElement> {
        match self {
            MonoidSpec::ResistorParallel => Some(MonoidElement::Resistor(Conductance::Infinite)),
            MonoidSpec::NaturalMul => Some(MonoidElement::Natural(0)),
            MonoidSpec::NaturalAdd | MonoidSpec::FreeCommutative { .. } => None,
            MonoidSpec::Product { parts } => parts
                .iter()
                .map(MonoidSpec::annihilator)
                .collect::<Option<Vec<_>>>()
                .map(MonoidElement::Tuple),
            MonoidSpec::WithAnnihilator { .. } => Some(MonoidElement::Annihilator),
        }
    }

    pub fn contains(&self, element: &MonoidElement) -> bool {
        match (self, element) {
            (MonoidSpec::ResistorParallel, MonoidElement::Resistor(g)) => match g {
                Conductance::Finite(g) => !g.is_negative(),
                Conductance::Infinite => true,
            },
            (MonoidSpec::NaturalAdd | MonoidSpec::NaturalMul, MonoidElement::Natural(_)) => true,
            (MonoidSpec::FreeCommutative { generators }, MonoidElement::Multiset(counts)) => counts
                .iter()
                .all(|(label, &count)| count > 0 && generators.contains(label)),
            (MonoidSpec::Product { parts }, MonoidElement::Tuple(items)) => {
                parts.len() == items.len() && parts.iter().zip(items).all(|(p, x)| p.contains(x))
            }
            (MonoidSpec::WithAnnihilator { .. }, MonoidElement::Annihilator) => true,
            (MonoidSpec::WithAnnihilator { inner }, other) => inner.contains(other),
            _ => false,
        }
    }

    fn check(&self, element: &MonoidElement) -> Result<(), MonoidError> {
        if self.contains(element) {
            Ok(())
        } else {
            Err(MonoidError::NotInCarrier {
                element: element.to_string(),
                monoid: self.name(),
            })
        }
    }

    /// `a ∥ b`.
    pub fn combine(&self, a: &MonoidElement, b: &MonoidElement) -> Result<MonoidElement, MonoidError> {
        self.check(a)?;
        self.check(b)?;
        self.try_combine_unchecked(a, b)
    }

    /// `acc ← acc ∥ w` without reallocating for naturals.
    pub(crate) fn combine_in_place(&self, acc: &mut MonoidElement, w: &MonoidElement) -> Result<(), MonoidError> {
        match (self, &mut *acc, w) {
            (MonoidSpec::NaturalAdd, MonoidElement::Natural(x), MonoidElement::Natural(y)) => {
                *x = x.checked_add(*y).ok_or(MonoidError::Overflow(*x, *y))?;
            }
            (MonoidSpec::NaturalMul, MonoidElement::Natural(x), MonoidElement::Natural(y)) => {
                *x = x.checked_mul(*y).ok_or(MonoidError::Overflow(*x, *y))?;
            }
            _ => *acc = self.try_combine_unchecked(acc, w)?,
        }
        Ok(())
    }

    pub(crate) fn try_combine_unchecked(
        &self,
        a: &MonoidElement,
        b: &MonoidElement,
    ) -> Result<MonoidElement, MonoidError> {
        Ok(match (self, a, b) {
            (MonoidSpec::ResistorParallel, MonoidElement::Resistor(x), MonoidElement::Resistor(y)) => {
                MonoidElement::Resistor(x.parallel(y))
            }
            (MonoidSpec::NaturalAdd, MonoidElement::Natural(x), MonoidElement::Natural(y)) => {
                MonoidElement::Natural(x.checked_add(*y).ok_or(MonoidError::Overflow(*x, *y))?)
            }
            (MonoidSpec::NaturalMul, MonoidElement::Natural(x), MonoidElement::Natural(y)) => {
                MonoidElement::Natural(x.checked_mul(*y).ok_or(MonoidError::Overflow(*x, *y))?)
            }
            (MonoidSpec::FreeCommutative { .. }, MonoidElement::Multiset(x), MonoidElement::Multiset(y)) => {
                let mut sum = x.clone();
                for (label, count) in y {
                    *sum.entry(label.clone()).or_insert(0) += count;
                }
                MonoidElement::Multiset(sum)
            }
            (MonoidSpec::Product { parts }, MonoidElement::Tuple(x), MonoidElement::Tuple(y)) => {
                MonoidElement::Tuple(
                    parts
                        .iter()
                        .zip(x.iter().zip(y))
                        .map(|(p, (u, v))| p.try_combine_unchecked(u, v))
                        .collect::<Result<_, _>>()?,
                )
            }
            (MonoidSpec::WithAnnihilator { .. }, MonoidElement::Annihilator, _)
            | (MonoidSpec::WithAnnihilator { .. }, _, MonoidElement::Annihilator) => {
                MonoidElement::Annihilator
            }
            (MonoidSpec::WithAnnihilator { inner }, x, y) => inner.try_combine_unchecked(x, y)?,
            _ => {
                return Err(MonoidError::NotInCarrier {
                    element: format!("{a} / {b}"),
                    monoid: self.name(),
                })
            }
        })
    }

    /// Parallel of all `items`; the empty parallel is the identity.
    pub fn sum<'a>(
        &self,
        items: impl IntoIterator<Item = &'a MonoidElement>,
    ) -> Result<MonoidElement, MonoidError> {
        items
            .into_iter()
            .try_fold(self.identity(), |acc, item| self.combine(&acc, item))
    }

    pub fn is_identity(&self, element: &MonoidElement) -> Result<bool, MonoidError> {
        self.check(element)?;
        Ok(*element == self.identity())
    }

    pub fn name(&self) -> String {
        match self {
            MonoidSpec::ResistorParallel => "resistor_parallel".into(),
            MonoidSpec::NaturalAdd => "natural_add".into(),
            MonoidSpec::NaturalMul => "natural_mul".into(),
            MonoidSpec::FreeCommutative { generators } => {
                let gens: Vec<&str> = generators.iter().map(String::as_str).collect();
                format!("free_commutative<{}>", gens.join(","))
            }
            MonoidSpec::Product { parts } => {
                let names: Vec<String> = parts.iter().map(MonoidSpec::name).collect();
                format!("product<{}>", names.join(","))
            }
            MonoidSpec::WithAnnihilator { inner } => format!("with_annihilator<{}>", inner.name()),
        }
    }

    /// Draws a random carrier element. Resistors are small positive integers,
    /// their reciprocals, open circuits and (rarely) short circuits.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MonoidElement {
        match self {
            MonoidSpec::ResistorParallel => match rng.random_range(0..10) {
                0 => MonoidElement::open_circuit(),
                1 => MonoidElement::Resistor(Conductance::Infinite),
                2 => MonoidElement::Resistor(Conductance::Finite(BigRational::new(
                    BigInt::from(rng.random_range(1..6)),
                    BigInt::one(),
                ))),
                _ => MonoidElement::ohms(rng.random_range(1..=60)),
            },
            MonoidSpec::NaturalAdd | MonoidSpec::NaturalMul => {
                MonoidElement::Natural(rng.random_range(0..6))
            }
            MonoidSpec::FreeCommutative { generators } => {
                let mut counts = BTreeMap::new();
                for label in generators {
                    let count = rng.random_range(0..3);
                    if count > 0 {
                        counts.insert(label.clone(), count);
                    }
                }
                MonoidElement::Multiset(counts)
            }
            MonoidSpec::Product { parts } => {
                MonoidElement::Tuple(parts.iter().map(|p| p.sample(rng)).collect())
            }
            MonoidSpec::WithAnnihilator { inner } => {
                if rng.random_range(0..8) == 0 {
                    MonoidElement::Annihilator
                } else {
                    inner.sample(rng)
                }
            }
        }
    }
}

impl CommutativeMonoid for MonoidSpec {
    type Element = MonoidElement;

    fn identity(&self) -> MonoidElement {
        MonoidSpec::identity(self)
    }

    fn combine(&self, a: &MonoidElement, b: &MonoidElement) -> Result<MonoidElement, MonoidError> {
        MonoidSpec::combine(self, a, b)
    }
}

/// Direct product of `parts`, e.g. merging two edge types into one weight.
pub fn product_monoid(parts: Vec<MonoidSpec>) -> MonoidSpec {
    assert!(!parts.is_empty(), "product of zero monoids");
    MonoidSpec::Product { parts }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Law {
    Associativity,
    Commutativity,
    Identity,
}

#[derive(Debug, Clone)]
pub struct LawViolation<E> {
    pub law: Law,
    pub elements: Vec<E>,
}

#[derive(Debug, Clone)]
pub struct LawReport<E> {
    pub trials: usize,
    pub violations: Vec<LawViolation<E>>,
}

impl<E> LawReport<E> {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Tests associativity, commutativity and two-sided identity on `trials`
/// random triples drawn from `samples`.
///
/// A combine error (e.g. overflow) on a triple skips that triple.
pub fn law_check<M, R>(
    monoid: &M,
    samples: &[M::Element],
    trials: usize,
    rng: &mut R,
) -> LawReport<M::Element>
where
    M: CommutativeMonoid,
    R: Rng + ?Sized,
{
    let mut violations = Vec::new();
    if samples.is_empty() {
        return LawReport { trials: 0, violations };
    }
    let e = monoid.identity();
    let pick = |rng: &mut R| samples[rng.random_range(0..samples.len())].clone();
    for _ in 0..trials {
        let (a, b, c) = (pick(rng), pick(rng), pick(rng));
        let op = |x: &M::Element, y: &M::Element| monoid.combine(x, y).ok();

        if let (Some(ab), Some(ba)) = (op(&a, &b), op(&b, &a)) {
            if ab != ba {
                violations.push(LawViolation { law: Law::Commutativity, elements: vec![a.clone(), b.clone()] });
            }
        }
        let left = op(&a, &b).and_then(|ab| op(&ab, &c));
        let right = op(&b, &c).and_then(|bc| op(&a, &bc));
        if let (Some(l), Some(r)) = (left, right) {
            if l != r {
                violations.push(LawViolation {
                    law: Law::Associativity,
                    elements: vec![a.clone(), b.clone(), c.clone()],
                });
            }
        }
        let ae = op(&a, &e);
        let ea = op(&e, &a);
        if ae.as_ref() != Some(&a) || ea.as_ref() != Some(&a) {
            violations.push(LawViolation { law: Law::Identity, elements: vec![a.clone()] });
        }
    }
    LawReport { trials, violations }
}
