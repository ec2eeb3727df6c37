//! Finitely supported formal power series in `z_1 … z_k` with real coefficients.
//!
//! A mixed state `Σ ψ_ℓ z^ℓ` stores the probability of pure state `ℓ` as the
//! coefficient of the monomial `z^ℓ`. Creation multiplies by `z_i`, annihilation is
//! `∂/∂z_i`, and the number operator is their composition. Every operator here maps
//! finitely supported series to finitely supported series, so the infinite series of
//! the continuous theory are represented by truncation with an explicit tail mass.
//!
//! Terms whose coefficient is exactly `0.0` are removed after every operation.

use alloc::collections::btree_map::{self, BTreeMap};
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{multi_falling_power_f64, ClassicalState, MultiIndex};
use crate::space::{StateSpace, Truncation};

#[derive(Debug, Clone, PartialEq)]
pub struct FockSeries {
    k: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl FockSeries {
    /// The zero series.
    pub fn zero(k: usize) -> Self {
        Self {
            k,
            terms: BTreeMap::new(),
        }
    }

    /// The monomial `z^l` with coefficient one.
    pub fn pure_state(l: &MultiIndex) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(l.clone(), 1.0);
        Self { k: l.len(), terms }
    }

    /// Builds a series from `(index, coefficient)` pairs, summing repeated indices.
    ///
    /// Panics if an index has the wrong length or a coefficient is not finite.
    pub fn from_terms<I>(k: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (MultiIndex, f64)>,
    {
        let mut out = Self::zero(k);
        for (l, c) in terms {
            out.add_term(l, c);
        }
        out.prune();
        out
    }

    fn add_term(&mut self, l: MultiIndex, c: f64) {
        assert_eq!(l.len(), self.k, "multi-index length mismatch");
        assert!(c.is_finite(), "non-finite coefficient {c} at {l:?}");
        *self.terms.entry(l).or_insert(0.0) += c;
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| *c != 0.0);
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of stored (nonzero) terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, l: &MultiIndex) -> f64 {
        self.terms.get(l).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> btree_map::Iter<'_, MultiIndex, f64> {
        self.terms.iter()
    }

    fn check_len(&self, m: &MultiIndex) -> Result<()> {
        if m.len() == self.k {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                expected: self.k,
                found: m.len(),
            })
        }
    }

    /// `a†^m Ψ`: shifts every index up by `m`.
    pub fn apply_creation(&self, m: &MultiIndex) -> Result<Self> {
        self.check_len(m)?;
        Ok(Self {
            k: self.k,
            terms: self.terms.iter().map(|(l, &c)| (l.add(m), c)).collect(),
        })
    }

    /// `a^m Ψ`: maps `z^ℓ` to `ℓ^{m̲} z^{ℓ−m}`; terms with `m_i > ℓ_i` vanish.
    pub fn apply_annihilation(&self, m: &MultiIndex) -> Result<Self> {
        self.check_len(m)?;
        let mut out = Self::zero(self.k);
        for (l, &c) in &self.terms {
            if let Some(lower) = l.checked_sub(m) {
                out.add_term(lower, c * multi_falling_power_f64(l.entries(), m.entries()));
            }
        }
        out.prune();
        Ok(out)
    }

    /// `N^{m̲} Ψ`: scales `z^ℓ` by `ℓ^{m̲}`.
    pub fn apply_number_falling(&self, m: &MultiIndex) -> Result<Self> {
        self.check_len(m)?;
        let mut out = Self::zero(self.k);
        for (l, &c) in &self.terms {
            let w = multi_falling_power_f64(l.entries(), m.entries());
            if w != 0.0 {
                out.terms.insert(l.clone(), c * w);
            }
        }
        out.prune();
        Ok(out)
    }

    /// `⟨Ψ⟩ = Σ_ℓ ψ_ℓ`.
    pub fn sum(&self) -> f64 {
        neumaier_sum(self.terms.values().copied())
    }

    /// `⟨N_i Ψ⟩ = Σ_ℓ ℓ_i ψ_ℓ` for every species.
    pub fn expect_number(&self) -> Vec<f64> {
        (0..self.k)
            .map(|i| {
                neumaier_sum(
                    self.terms
                        .iter()
                        .map(|(l, &c)| l.entries()[i] as f64 * c),
                )
            })
            .collect()
    }

    /// `⟨N^{m̲} Ψ⟩ = Σ_ℓ ℓ^{m̲} ψ_ℓ`.
    pub fn expect_number_falling(&self, m: &MultiIndex) -> Result<f64> {
        self.check_len(m)?;
        Ok(neumaier_sum(self.terms.iter().map(|(l, &c)| {
            multi_falling_power_f64(l.entries(), m.entries()) * c
        })))
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = Self {
            k: self.k,
            terms: self
                .terms
                .iter()
                .map(|(l, &c)| (l.clone(), c * factor))
                .collect(),
        };
        out.prune();
        out
    }

    /// `self + factor · other`.
    pub fn add_scaled(&self, other: &FockSeries, factor: f64) -> Self {
        assert_eq!(self.k, other.k, "species count mismatch");
        let mut out = self.clone();
        for (l, &c) in &other.terms {
            out.add_term(l.clone(), factor * c);
        }
        out.prune();
        out
    }

    /// Largest absolute coefficient difference over the union of supports.
    pub fn max_abs_diff(&self, other: &FockSeries) -> f64 {
        let mut worst: f64 = 0.0;
        for (l, &c) in &self.terms {
            worst = worst.max((c - other.get(l)).abs());
        }
        for (l, &c) in &other.terms {
            if !self.terms.contains_key(l) {
                worst = worst.max(c.abs());
            }
        }
        worst
    }
}

/// A series validated as a probability distribution: nonnegative coefficients that
/// sum to one within `epsilon`.
#[derive(Debug, Clone)]
pub struct MixedStateView<'a> {
    series: &'a FockSeries,
    epsilon: f64,
}

impl<'a> MixedStateView<'a> {
    pub fn new(series: &'a FockSeries, epsilon: f64) -> Result<Self> {
        if let Some((l, &c)) = series.iter().find(|(_, &c)| c < 0.0) {
            return Err(Error::NotMixed(format!("coefficient {c} at {l:?} is negative")));
        }
        let total = series.sum();
        if (total - 1.0).abs() > epsilon {
            return Err(Error::NotMixed(format!(
                "coefficients sum to {total}, not 1 within {epsilon}"
            )));
        }
        Ok(Self { series, epsilon })
    }

    pub fn series(&self) -> &'a FockSeries {
        self.series
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// A truncated product of independent Poisson distributions.
#[derive(Debug, Clone)]
pub struct CoherentState {
    pub series: FockSeries,
    /// Probability mass of the untruncated state lying outside the cap, `1 − Σ ψ_ℓ`.
    pub tail_mass: f64,
}

/// Poisson product state with means `c`, restricted to the states inside `cap`.
pub fn coherent_state(c: &ClassicalState, cap: &Truncation) -> Result<CoherentState> {
    let space = StateSpace::enumerate(c.len(), cap.clone())?;
    coherent_state_on(c, &space)
}

/// As [`coherent_state`], over an already enumerated space.
///
/// Coefficients are `Π_i exp(n_i ln c_i − c_i − ln n_i!)`, evaluated in log space so
/// large means do not overflow.
pub fn coherent_state_on(c: &ClassicalState, space: &StateSpace) -> Result<CoherentState> {
    if c.len() != space.k() {
        return Err(Error::LengthMismatch {
            expected: space.k(),
            found: c.len(),
        });
    }
    let top = space
        .states()
        .iter()
        .flat_map(|l| l.entries().iter().copied())
        .max()
        .unwrap_or(0) as usize;
    let log_pmf: Vec<Vec<f64>> = c
        .values()
        .iter()
        .map(|&mean| {
            (0..=top)
                .map(|n| {
                    if mean == 0.0 {
                        if n == 0 {
                            0.0
                        } else {
                            f64::NEG_INFINITY
                        }
                    } else {
                        n as f64 * libm::log(mean) - mean - libm::lgamma(n as f64 + 1.0)
                    }
                })
                .collect()
        })
        .collect();
    let mut terms = BTreeMap::new();
    for l in space.states() {
        let log_coeff: f64 = l
            .entries()
            .iter()
            .zip(&log_pmf)
            .map(|(&n, table)| table[n as usize])
            .sum();
        let coeff = libm::exp(log_coeff);
        if coeff != 0.0 {
            terms.insert(l.clone(), coeff);
        }
    }
    let series = FockSeries { k: space.k(), terms };
    let tail_mass = (1.0 - series.sum()).max(0.0);
    Ok(CoherentState { series, tail_mass })
}

/// Compensated summation; keeps expectation sums over many small terms accurate.
pub(crate) fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if libm::fabs(sum) >= libm::fabs(v) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
