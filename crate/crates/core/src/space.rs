//! Finite projections of `ℕ^k` used by the master-equation engine.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::FockSeries;
use crate::model::MultiIndex;

/// Default hard limit on the number of enumerated states.
pub const DEFAULT_STATE_LIMIT: usize = 2_000_000;

/// Which pure states are kept: per-species maxima, a maximum total count, or both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Truncation {
    per_species: Option<Vec<u64>>,
    total: Option<u64>,
}

impl Truncation {
    pub fn total(max_total: u64) -> Self {
        Self {
            per_species: None,
            total: Some(max_total),
        }
    }

    pub fn per_species(caps: Vec<u64>) -> Self {
        Self {
            per_species: Some(caps),
            total: None,
        }
    }

    pub fn both(caps: Vec<u64>, max_total: u64) -> Self {
        Self {
            per_species: Some(caps),
            total: Some(max_total),
        }
    }

    /// Same per-species cap for each of `k` species.
    pub fn uniform(k: usize, cap: u64) -> Self {
        Self::per_species(alloc::vec![cap; k])
    }

    pub fn per_species_caps(&self) -> Option<&[u64]> {
        self.per_species.as_deref()
    }

    pub fn max_total(&self) -> Option<u64> {
        self.total
    }

    pub fn contains(&self, l: &MultiIndex) -> bool {
        if let Some(caps) = &self.per_species {
            if caps.len() != l.len() || l.entries().iter().zip(caps).any(|(v, c)| v > c) {
                return false;
            }
        }
        match self.total {
            Some(t) => l.total() <= t,
            None => true,
        }
    }

    /// Largest count any single species can reach inside the cap.
    pub fn max_count(&self) -> u64 {
        let per = self
            .per_species
            .as_ref()
            .and_then(|c| c.iter().copied().max());
        match (per, self.total) {
            (Some(p), Some(t)) => p.min(t),
            (Some(p), None) => p,
            (None, Some(t)) => t,
            (None, None) => 0,
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        if self.per_species.is_none() && self.total.is_none() {
            return Err(Error::InvalidArgument("truncation needs a per-species or total cap"));
        }
        if let Some(caps) = &self.per_species {
            if caps.len() != k {
                return Err(Error::LengthMismatch {
                    expected: k,
                    found: caps.len(),
                });
            }
        }
        Ok(())
    }
}

/// Enumerated states inside a [`Truncation`], in graded-lexicographic order: by total
/// count, then lexicographically. The zero state is always ordinal 0.
#[derive(Debug, Clone)]
pub struct StateSpace {
    truncation: Truncation,
    k: usize,
    states: Vec<MultiIndex>,
    index: BTreeMap<MultiIndex, usize>,
}

impl StateSpace {
    pub fn enumerate(k: usize, truncation: Truncation) -> Result<Self> {
        Self::enumerate_with_limit(k, truncation, DEFAULT_STATE_LIMIT)
    }

    pub fn enumerate_with_limit(k: usize, truncation: Truncation, limit: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::NoSpecies);
        }
        truncation.validate(k)?;
        let caps: Vec<u64> = match &truncation.per_species {
            Some(c) => c.clone(),
            None => alloc::vec![u64::MAX; k],
        };
        let cap_sum = caps.iter().fold(0u64, |a, &c| a.saturating_add(c));
        let max_total = truncation.total.unwrap_or(u64::MAX).min(cap_sum);

        let mut states = Vec::new();
        let mut scratch = alloc::vec![0u64; k];
        let mut n = 0u64;
        while n <= max_total {
            compositions(&caps, 0, n, &mut scratch, &mut states, limit)?;
            if n == u64::MAX {
                break;
            }
            n += 1;
        }
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(Self {
            truncation,
            k,
            states,
            index,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn truncation(&self) -> &Truncation {
        &self.truncation
    }

    pub fn states(&self) -> &[MultiIndex] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn ordinal(&self, l: &MultiIndex) -> Option<usize> {
        self.index.get(l).copied()
    }

    pub fn state(&self, ordinal: usize) -> &MultiIndex {
        &self.states[ordinal]
    }

    /// Coefficients of `psi` as a dense vector indexed by ordinal.
    pub fn to_dense(&self, psi: &FockSeries) -> Result<Vec<f64>> {
        if psi.k() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                found: psi.k(),
            });
        }
        let mut out = alloc::vec![0.0; self.len()];
        let mut outside = Vec::new();
        for (l, &c) in psi.iter() {
            match self.ordinal(l) {
                Some(i) => out[i] = c,
                None => outside.push(l.clone()),
            }
        }
        if outside.is_empty() {
            Ok(out)
        } else {
            Err(Error::OutsideSpace(outside))
        }
    }

    pub fn to_series(&self, dense: &[f64]) -> FockSeries {
        assert_eq!(dense.len(), self.len(), "dense vector length mismatch");
        FockSeries::from_terms(
            self.k,
            self.states
                .iter()
                .zip(dense)
                .map(|(l, &c)| (l.clone(), c)),
        )
    }
}

/// Pushes every composition of `remaining` into the slots `pos..` (bounded by `caps`)
/// in lexicographically ascending order.
fn compositions(
    caps: &[u64],
    pos: usize,
    remaining: u64,
    scratch: &mut [u64],
    out: &mut Vec<MultiIndex>,
    limit: usize,
) -> Result<()> {
    let k = caps.len();
    if pos + 1 == k {
        if remaining <= caps[pos] {
            if out.len() >= limit {
                return Err(Error::StateSpaceTooLarge { limit });
            }
            scratch[pos] = remaining;
            out.push(MultiIndex::new(scratch.to_vec()));
        }
        return Ok(());
    }
    let rest_cap = caps[pos + 1..]
        .iter()
        .fold(0u64, |a, &c| a.saturating_add(c));
    let lo = remaining.saturating_sub(rest_cap);
    let hi = remaining.min(caps[pos]);
    if lo > hi {
        return Ok(());
    }
    for v in lo..=hi {
        scratch[pos] = v;
        compositions(caps, pos + 1, remaining - v, scratch, out, limit)?;
    }
    Ok(())
}
