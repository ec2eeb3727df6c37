//! Species, complexes, reactions and the falling-power combinatorics shared by every engine.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Ordered set of species names. Index `i` is the 0-based position of a name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpeciesTable {
    names: Vec<String>,
}

impl SpeciesTable {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut table = Vec::new();
        for name in names {
            let name = name.into();
            if name.is_empty() {
                return Err(Error::InvalidName(name));
            }
            if table.contains(&name) {
                return Err(Error::DuplicateSpecies(name));
            }
            table.push(name);
        }
        if table.is_empty() {
            return Err(Error::NoSpecies);
        }
        Ok(Self { names: table })
    }

    /// Number of species, `k`.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// A vector of natural numbers, one per species.
///
/// Used for complexes, reaction sources and targets, and pure states. Ordering is
/// lexicographic on the entries.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MultiIndex(Vec<u64>);

impl MultiIndex {
    pub fn new(entries: Vec<u64>) -> Self {
        Self(entries)
    }

    pub fn zeros(k: usize) -> Self {
        Self(alloc::vec![0; k])
    }

    pub fn unit(k: usize, i: usize) -> Self {
        let mut v = alloc::vec![0; k];
        v[i] = 1;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[u64] {
        &self.0
    }

    /// Total number of particles, `Σ ℓ_i`.
    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    /// Entrywise sum. Panics on length mismatch.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        assert_eq!(self.len(), other.len(), "multi-index length mismatch");
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Entrywise difference, or `None` if any entry would go negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        assert_eq!(self.len(), other.len(), "multi-index length mismatch");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    /// `self + change`, or `None` if the result leaves `ℕ^k`.
    pub fn apply(&self, change: &NetChange) -> Option<MultiIndex> {
        assert_eq!(self.len(), change.len(), "multi-index length mismatch");
        self.0
            .iter()
            .zip(change.entries())
            .map(|(&a, &d)| a.checked_add_signed(d))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    /// Whether `other ≤ self` entrywise.
    pub fn dominates(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

impl From<Vec<u64>> for MultiIndex {
    fn from(v: Vec<u64>) -> Self {
        Self(v)
    }
}

impl<const N: usize> From<[u64; N]> for MultiIndex {
    fn from(v: [u64; N]) -> Self {
        Self(v.to_vec())
    }
}

/// Signed change in species counts caused by one firing of a reaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NetChange(Vec<i64>);

impl NetChange {
    pub fn between(source: &MultiIndex, target: &MultiIndex) -> Self {
        Self(
            source
                .entries()
                .iter()
                .zip(target.entries())
                .map(|(&s, &t)| t as i64 - s as i64)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&d| d == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reaction {
    name: String,
    source: MultiIndex,
    target: MultiIndex,
    rate: f64,
}

impl Reaction {
    pub fn new(
        name: impl Into<String>,
        source: MultiIndex,
        target: MultiIndex,
        rate: f64,
    ) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidName(name));
        }
        if source.len() != target.len() {
            return Err(Error::LengthMismatch {
                expected: source.len(),
                found: target.len(),
            });
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::NonPositiveRate { name, rate });
        }
        Ok(Self {
            name,
            source,
            target,
            rate,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> &MultiIndex {
        &self.source
    }

    pub fn target(&self) -> &MultiIndex {
        &self.target
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `target − source`.
    pub fn net_change(&self) -> NetChange {
        NetChange::between(&self.source, &self.target)
    }

    pub(crate) fn with_rate(&self, rate: f64) -> Self {
        Self {
            rate,
            ..self.clone()
        }
    }
}

/// Species plus an ordered list of reactions with rate constants.
///
/// The set of complexes is implicit: every source and target of some reaction.
/// Repeated edges and reactions whose source equals their target are allowed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Network {
    species: SpeciesTable,
    reactions: Vec<Reaction>,
}

impl Network {
    pub fn new(species: SpeciesTable, reactions: Vec<Reaction>) -> Result<Self> {
        let k = species.len();
        for (i, r) in reactions.iter().enumerate() {
            for complex in [r.source(), r.target()] {
                if complex.len() != k {
                    return Err(Error::LengthMismatch {
                        expected: k,
                        found: complex.len(),
                    });
                }
            }
            if reactions[..i].iter().any(|q| q.name == r.name) {
                return Err(Error::DuplicateReaction(r.name.clone()));
            }
        }
        Ok(Self { species, reactions })
    }

    pub fn species(&self) -> &SpeciesTable {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    /// Number of species.
    pub fn k(&self) -> usize {
        self.species.len()
    }

    /// Distinct complexes in order of first appearance (source before target).
    pub fn complexes(&self) -> Vec<MultiIndex> {
        let mut out: Vec<MultiIndex> = Vec::new();
        for r in &self.reactions {
            for c in [r.source(), r.target()] {
                if !out.contains(c) {
                    out.push(c.clone());
                }
            }
        }
        out
    }

    /// Copy of the network with every rate constant multiplied by `factor`.
    pub fn scale_rates(&self, factor: f64) -> Result<Self> {
        let reactions = self
            .reactions
            .iter()
            .map(|r| {
                let rate = r.rate * factor;
                if !(rate > 0.0) || !rate.is_finite() {
                    Err(Error::NonPositiveRate {
                        name: r.name.clone(),
                        rate,
                    })
                } else {
                    Ok(r.with_rate(rate))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            species: self.species.clone(),
            reactions,
        })
    }
}

/// Expected counts or concentrations, one nonnegative real per species.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalState(Vec<f64>);

impl ClassicalState {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::InvalidClassicalState { index, value });
            }
        }
        Ok(Self(values))
    }

    /// Wraps values without the nonnegativity check; used for integrator output.
    pub(crate) fn unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `n (n−1) ⋯ (n−p+1)`: the number of ordered `p`-tuples of distinct elements of an
/// `n`-set. Zero when `p > n`, one when `p = 0`.
pub fn falling_power(n: u64, p: u64) -> Result<u64> {
    if p > n {
        return Ok(0);
    }
    let mut acc: u64 = 1;
    for j in 0..p {
        acc = acc
            .checked_mul(n - j)
            .ok_or(Error::Overflow("falling_power"))?;
    }
    Ok(acc)
}

/// `Π_i falling_power(l_i, m_i)`.
pub fn multi_falling_power(l: &MultiIndex, m: &MultiIndex) -> Result<u64> {
    if l.len() != m.len() {
        return Err(Error::LengthMismatch {
            expected: l.len(),
            found: m.len(),
        });
    }
    let mut acc: u64 = 1;
    for (&n, &p) in l.entries().iter().zip(m.entries()) {
        let f = falling_power(n, p)?;
        if f == 0 {
            return Ok(0);
        }
        acc = acc
            .checked_mul(f)
            .ok_or(Error::Overflow("multi_falling_power"))?;
    }
    Ok(acc)
}

/// Falling power evaluated in floating point; infallible, used on hot paths where
/// the result only feeds real arithmetic.
pub(crate) fn multi_falling_power_f64(l: &[u64], m: &[u64]) -> f64 {
    let mut acc = 1.0;
    for (&n, &p) in l.iter().zip(m) {
        if p > n {
            return 0.0;
        }
        for j in 0..p {
            acc *= (n - j) as f64;
        }
    }
    acc
}

/// `Π_i x_i^{m_i}` with `0^0 = 1`.
pub fn multi_power(x: &ClassicalState, m: &MultiIndex) -> Result<f64> {
    if x.len() != m.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: m.len(),
        });
    }
    Ok(multi_power_slice(x.values(), m.entries()))
}

pub(crate) fn multi_power_slice(x: &[f64], m: &[u64]) -> f64 {
    x.iter().zip(m).map(|(&b, &e)| powu(b, e)).product()
}

/// Integer power by repeated squaring.
pub(crate) fn powu(mut base: f64, mut exp: u64) -> f64 {
    let mut acc = 1.0;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= base;
        }
        base *= base;
        exp >>= 1;
    }
    acc
}
